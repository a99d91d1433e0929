//! Forward and inverse program runs on a seeded tape. A forward run changes
//! only `V`; raising `U` by `b` raises the change at `V[t]` by exactly
//! `Σ_s N_ℓ(s, t)·b[s]`; the inverse run puts every bit back.
//!
//! ```text
//! cargo run --example compute_uncompute
//! ```

use catalytic_savitch::catalyst::{CatalyticTape, RegisterFile, Sign, TapeInit};
use catalytic_savitch::engine::{
    program_tape_shape, BlockLayout, Direction, Executor, SpaceMeter, TraceEvent,
};
use catalytic_savitch::graph::corpus;
use catalytic_savitch::oracle::WalkTable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = corpus::cycle(4);
    let (n, length, k, q) = (4, 3, 1, 11);
    let (blocks, regs) = program_tape_shape(n, length, k);
    let mut tape = CatalyticTape::allocate(blocks, regs, q, TapeInit::Seeded(5))?;
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    println!("initial tape (U, V, W1, W2):\n{}", tape.dump());

    let mut trace: Vec<TraceEvent> = Vec::new();
    let before = tape.values();
    Executor::new(&graph, k)?
        .with_trace(&mut trace)
        .run_program(&mut tape, length, 0, 0, Direction::Forward, &mut meter)?;
    let after = tape.values();
    let changed: Vec<usize> = (0..before.len())
        .filter(|&i| before[i] != after[i])
        .collect();
    assert!(changed.iter().all(|&i| i / regs == BlockLayout::V));
    println!(
        "forward run: {} updates, changed registers {changed:?} (all in V)",
        trace.len()
    );
    let plain_v = tape.block_values(BlockLayout::V)?;
    let mut exec = Executor::new(&graph, k)?;
    exec.run_program(&mut tape, length, 0, 0, Direction::Inverse, &mut meter)?;
    tape.verify_restored()?;

    // Same run with U raised by b.
    let b = [1, 0, 2, 5];
    for (s, &delta) in b.iter().enumerate() {
        tape.add_into(BlockLayout::U, s, delta, Sign::Plus)?;
    }
    exec.run_program(&mut tape, length, 0, 0, Direction::Forward, &mut meter)?;
    let bumped_v = tape.block_values(BlockLayout::V)?;
    exec.run_program(&mut tape, length, 0, 0, Direction::Inverse, &mut meter)?;
    for (s, &delta) in b.iter().enumerate() {
        tape.add_into(BlockLayout::U, s, delta, Sign::Minus)?;
    }

    let table = WalkTable::build(&graph, length);
    for t in 0..n {
        let expected: u64 = (0..n)
            .map(|s| table.get_mod(length, s, t, q) * b[s])
            .sum::<u64>()
            % q;
        let measured = (bumped_v[t] + q - plain_v[t]) % q;
        println!("V[{t}]: difference {measured}, Σ N_3(s,{t})·b[s] mod {q} = {expected}");
        assert_eq!(measured, expected);
    }

    tape.verify_restored()?;
    println!("tape restored bit for bit");
    println!("first updates:");
    for event in trace.iter().take(6) {
        println!("  {event}");
    }
    let report = meter.finish()?;
    println!(
        "peak stack depth {}, peak workspace {} bits, catalyst {} bits",
        report.peak_stack_depth, report.peak_workspace_bits, report.catalyst_bits
    );
    Ok(())
}
