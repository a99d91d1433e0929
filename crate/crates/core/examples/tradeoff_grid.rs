//! Workspace against catalyst as the partition parameter `k` grows: the
//! tape shrinks with `⌈n/k⌉` while each stack frame grows by one bit per
//! doubling of `k`.
//!
//! ```text
//! cargo run --release --example tradeoff_grid
//! ```

use catalytic_savitch::crt::{count_walks_exact_catalytic, ExactOptions, WalkQuery};
use catalytic_savitch::graph::corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 16;
    let graph = corpus::erdos_renyi(n, 0.25, 11);
    println!(
        "{:>3} {:>4} {:>10} {:>10} {:>6} {:>6} {:>10}",
        "k", "len", "catalyst", "workspace", "depth", "frame", "count"
    );
    for k in [1, 2, 4, 8, 16] {
        for length in [4, 16] {
            let query = WalkQuery {
                source: 0,
                target: n - 1,
                length,
                k,
                seed: 1,
            };
            let count = count_walks_exact_catalytic(&graph, &query, ExactOptions::default())?;
            let r = count.report;
            println!(
                "{k:>3} {length:>4} {:>10} {:>10} {:>6} {:>6} {:>10}",
                r.catalyst_bits,
                r.peak_workspace_bits,
                r.peak_stack_depth,
                r.frame_bits,
                count.value
            );
        }
    }
    Ok(())
}
