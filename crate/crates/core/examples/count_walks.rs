//! Exact walk counts on a random digraph, checked against the dynamic
//! programming reference.
//!
//! ```text
//! cargo run --example count_walks
//! ```

use catalytic_savitch::crt::{count_walks_exact_catalytic, ExactOptions, WalkQuery};
use catalytic_savitch::graph::corpus;
use catalytic_savitch::oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = corpus::erdos_renyi(7, 0.4, 2024);
    println!(
        "graph: {} vertices, {} edges",
        graph.vertex_count(),
        graph.edge_count()
    );

    for (length, k) in [(3, 1), (5, 2), (7, 3), (7, 7)] {
        let query = WalkQuery {
            source: 0,
            target: 6,
            length,
            k,
            seed: 42,
        };
        let count = count_walks_exact_catalytic(&graph, &query, ExactOptions::default())?;
        let expected = oracle::count_walks_exact(&graph, 0, 6, length);
        assert_eq!(count.value, expected);
        println!(
            "N_{length}(0, 6) = {:>4}  k={k}  primes={:?}  catalyst={} bits  workspace={} bits",
            count.value,
            count.witness.moduli,
            count.report.catalyst_bits,
            count.report.peak_workspace_bits
        );
    }
    Ok(())
}
