//! Residues modulo small primes and the count they pin down.
//!
//! ```text
//! cargo run --example crt_witness
//! ```

use catalytic_savitch::crt::{
    choose_moduli, count_walks_exact_catalytic, crt_reconstruct, ExactOptions, ModuliPolicy,
    WalkQuery,
};
use catalytic_savitch::graph::corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "23 from (1, 2, 3, 2) mod (2, 3, 5, 7): {}",
        crt_reconstruct(&[2, 3, 5, 7], &[1, 2, 3, 2])?
    );
    for (n, length) in [(3, 2), (8, 8), (16, 16)] {
        println!("n={n} ℓ={length}: moduli {:?}", choose_moduli(n, length));
    }

    let graph = corpus::complete(6, true);
    let query = WalkQuery {
        source: 1,
        target: 4,
        length: 6,
        k: 2,
        seed: 3,
    };
    for policy in [ModuliPolicy::Minimal, ModuliPolicy::StrictPaper] {
        let count = count_walks_exact_catalytic(
            &graph,
            &query,
            ExactOptions {
                policy,
                ..Default::default()
            },
        )?;
        println!("{policy:?}: {}", count.witness);
        println!("  as JSON: {}", serde_json::to_string(&count.witness)?);
    }
    Ok(())
}
