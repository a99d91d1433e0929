//! Reachability by counting: add a self-loop at the target and ask whether
//! any walk of length `n - 1` reaches it.
//!
//! ```text
//! cargo run --example stcon
//! ```

use catalytic_savitch::crt::{decide_stcon, ExactOptions};
use catalytic_savitch::graph::{corpus, parse_graph};
use catalytic_savitch::oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two components: a 3-cycle and a path 3 → 4 → 5.
    let graph = parse_graph("6 5\n0 1\n1 2\n2 0\n3 4\n4 5\n")?;
    for (s, t) in [(0, 2), (2, 1), (3, 5), (5, 3), (0, 4), (4, 4)] {
        let outcome = decide_stcon(&graph, s, t, 2, 7, ExactOptions::default())?;
        assert_eq!(outcome.reachable, oracle::reachable(&graph, s, t));
        let walks = outcome
            .count
            .map_or("-".to_string(), |c| c.value.to_string());
        println!(
            "{s} → {t}: {:<11} ({walks} walks of length 5 into the looped target)",
            if outcome.reachable {
                "REACHABLE"
            } else {
                "UNREACHABLE"
            }
        );
    }

    let mut agree = 0;
    for seed in 0..20 {
        let g = corpus::erdos_renyi(6, 0.2, seed);
        let reachable = decide_stcon(&g, 0, 5, 1, seed, ExactOptions::default())?.reachable;
        assert_eq!(reachable, oracle::reachable(&g, 0, 5));
        agree += 1;
    }
    println!("{agree}/20 random graphs agree with breadth-first search");
    Ok(())
}
