use catalytic_savitch::catalyst::{
    CatalyticTape, PackedCatalyticTape, RegisterFile, Sign, TapeInit,
};
use catalytic_savitch::engine::{
    program_tape_shape, BlockLayout, Direction, Executor, SpaceMeter, TraceEvent,
};
use catalytic_savitch::graph::DirectedGraph;
use catalytic_savitch::oracle::WalkTable;
use proptest::prelude::*;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 97, 65_521];

#[derive(Debug, Clone)]
struct Case {
    graph: DirectedGraph,
    length: usize,
    k: usize,
    i: usize,
    j: usize,
    q: u64,
    seed: u64,
}

fn case(max_n: usize) -> impl Strategy<Value = Case> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec((0..n, 0..n), 0..=n * n),
                1..=n,
                1..=n,
                any::<u64>(),
                proptest::sample::select(PRIMES.to_vec()),
            )
        })
        .prop_flat_map(|(n, edges, length, k, seed, q)| {
            let graph = DirectedGraph::new(n, edges).unwrap();
            (0..k, 0..k).prop_map(move |(i, j)| Case {
                graph: graph.clone(),
                length,
                k,
                i,
                j,
                q,
                seed,
            })
        })
}

fn tape_for(c: &Case) -> CatalyticTape {
    let (blocks, regs) = program_tape_shape(c.graph.vertex_count(), c.length, c.k);
    CatalyticTape::allocate(blocks, regs, c.q, TapeInit::Seeded(c.seed)).unwrap()
}

fn run<R: RegisterFile>(c: &Case, tape: &mut R, direction: Direction) {
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    Executor::new(&c.graph, c.k)
        .unwrap()
        .run_program(tape, c.length, c.i, c.j, direction, &mut meter)
        .unwrap();
    meter.finish().unwrap();
}

/// Straightforward recursive rendering of the program family, used only to
/// cross-check the iterative executor's update sequence.
struct Reference<'a> {
    graph: &'a DirectedGraph,
    k: usize,
    r: usize,
    events: Vec<TraceEvent>,
}

impl Reference<'_> {
    #[allow(clippy::too_many_arguments)]
    fn program(
        &mut self,
        length: usize,
        i: usize,
        j: usize,
        direction: Direction,
        input: usize,
        output: usize,
        depth: usize,
    ) {
        if length == 1 {
            let mut edges: Vec<(usize, usize)> = self
                .graph
                .edges()
                .iter()
                .copied()
                .filter(|&(u, v)| u % self.k == i && v % self.k == j)
                .collect();
            let sign = match direction {
                Direction::Forward => Sign::Plus,
                Direction::Inverse => {
                    edges.reverse();
                    Sign::Minus
                }
            };
            for (u, v) in edges {
                self.events.push(TraceEvent {
                    sign,
                    input_block: input,
                    output_block: output,
                    input_reg: u / self.k,
                    output_reg: v / self.k,
                    edge: (u, v),
                });
            }
            return;
        }
        // Depth d (0-based) uses W_{r-d}, i.e. block r - d + 1.
        let scratch = self.r - depth + 1;
        let first = length.div_ceil(2);
        for m in 0..self.k {
            self.program(first, i, m, Direction::Forward, input, scratch, depth + 1);
            self.program(length / 2, m, j, direction, scratch, output, depth + 1);
            self.program(first, i, m, Direction::Inverse, input, scratch, depth + 1);
        }
    }
}

fn reference_trace(c: &Case, direction: Direction) -> Vec<TraceEvent> {
    let mut reference = Reference {
        graph: &c.graph,
        k: c.k,
        r: Executor::blocks_needed(c.length) - 2,
        events: Vec::new(),
    };
    reference.program(
        c.length,
        c.i,
        c.j,
        direction,
        BlockLayout::U,
        BlockLayout::V,
        0,
    );
    reference.events
}

/// `Σ_{u ≡ i} b[λ_u]·N_ℓ(u, v) mod q` at every position of block `V`.
fn expected_v_gain(c: &Case, b: &[u64]) -> Vec<u64> {
    let n = c.graph.vertex_count();
    let table = WalkTable::build(&c.graph, c.length);
    let regs = n.div_ceil(c.k);
    (0..regs)
        .map(|lambda_v| {
            let v = lambda_v * c.k + c.j;
            if v >= n {
                return 0;
            }
            (0..n)
                .filter(|u| u % c.k == c.i)
                .map(|u| {
                    let walks = u128::from(table.get_mod(c.length, u, v, c.q));
                    (walks * u128::from(b[u / c.k]) % u128::from(c.q)) as u64
                })
                .fold(0, |acc, x| (acc + x) % c.q)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forward_run_changes_only_v(c in case(7)) {
        let mut tape = tape_for(&c);
        let regs = tape.regs_per_block();
        let before = tape.values();
        run(&c, &mut tape, Direction::Forward);
        let after = tape.values();
        for (idx, (b, a)) in before.iter().zip(&after).enumerate() {
            if idx / regs != BlockLayout::V {
                prop_assert_eq!(b, a, "register {} outside V changed", idx);
            }
        }
    }

    #[test]
    fn inverse_undoes_forward(c in case(7), inverse_first in any::<bool>()) {
        let mut tape = tape_for(&c);
        let (first, second) = if inverse_first {
            (Direction::Inverse, Direction::Forward)
        } else {
            (Direction::Forward, Direction::Inverse)
        };
        run(&c, &mut tape, first);
        run(&c, &mut tape, second);
        prop_assert!(tape.verify_restored().is_ok());
    }

    #[test]
    fn v_difference_is_linear_in_u(c in case(6), b_seed in any::<u64>()) {
        let regs = c.graph.vertex_count().div_ceil(c.k);
        let b: Vec<u64> = (0..regs as u64)
            .map(|x| b_seed.wrapping_mul(x + 1).rotate_left(17) % c.q)
            .collect();

        let mut tape = tape_for(&c);
        let v0 = tape.block_values(BlockLayout::V).unwrap();
        run(&c, &mut tape, Direction::Forward);
        let plain = tape.block_values(BlockLayout::V).unwrap();
        run(&c, &mut tape, Direction::Inverse);

        for (reg, &delta) in b.iter().enumerate() {
            tape.add_into(BlockLayout::U, reg, delta, Sign::Plus).unwrap();
        }
        run(&c, &mut tape, Direction::Forward);
        let bumped = tape.block_values(BlockLayout::V).unwrap();
        run(&c, &mut tape, Direction::Inverse);
        for (reg, &delta) in b.iter().enumerate() {
            tape.add_into(BlockLayout::U, reg, delta, Sign::Minus).unwrap();
        }
        prop_assert!(tape.verify_restored().is_ok());

        let expected = expected_v_gain(&c, &b);
        for reg in 0..regs {
            let plain_delta = (plain[reg] + c.q - v0[reg]) % c.q;
            let bumped_delta = (bumped[reg] + c.q - v0[reg]) % c.q;
            prop_assert_eq!((bumped_delta + c.q - plain_delta) % c.q, expected[reg]);
        }
    }

    #[test]
    fn update_sequence_matches_recursive_reference(c in case(6), inverse in any::<bool>()) {
        let direction = if inverse { Direction::Inverse } else { Direction::Forward };
        let mut trace: Vec<TraceEvent> = Vec::new();
        let mut tape = tape_for(&c);
        let mut meter = SpaceMeter::new(tape.catalyst_bits());
        Executor::new(&c.graph, c.k)
            .unwrap()
            .with_trace(&mut trace)
            .run_program(&mut tape, c.length, c.i, c.j, direction, &mut meter)
            .unwrap();
        prop_assert_eq!(trace, reference_trace(&c, direction));
    }

    #[test]
    fn packed_and_plain_tapes_agree(c in case(5)) {
        let (blocks, regs) = program_tape_shape(c.graph.vertex_count(), c.length, c.k);
        let values: Vec<u64> = (0..(blocks * regs) as u64)
            .map(|x| c.seed.wrapping_add(x.wrapping_mul(0x9E37_79B9)) % c.q)
            .collect();
        let mut plain =
            CatalyticTape::allocate(blocks, regs, c.q, TapeInit::Explicit(values.clone())).unwrap();
        let mut packed =
            PackedCatalyticTape::allocate(blocks, regs, c.q, TapeInit::Explicit(values)).unwrap();
        run(&c, &mut plain, Direction::Forward);
        run(&c, &mut packed, Direction::Forward);
        prop_assert_eq!(plain.values(), packed.values());
        run(&c, &mut plain, Direction::Inverse);
        run(&c, &mut packed, Direction::Inverse);
        prop_assert!(plain.verify_restored().is_ok());
        prop_assert!(packed.verify_restored().is_ok());
    }

    #[test]
    fn stack_depth_and_frame_size(c in case(8)) {
        let mut tape = tape_for(&c);
        let mut meter = SpaceMeter::new(tape.catalyst_bits());
        let mut exec = Executor::new(&c.graph, c.k).unwrap();
        exec.run_program(&mut tape, c.length, c.i, c.j, Direction::Forward, &mut meter).unwrap();
        let report = meter.finish().unwrap();
        let inventory = exec.inventory(c.length, c.q);
        let depth = (usize::BITS - (c.length - 1).leading_zeros()) as usize;
        prop_assert_eq!(report.peak_stack_depth, depth);
        prop_assert_eq!(report.peak_stack_bits, depth as u64 * inventory.frame_bits);
        prop_assert_eq!(inventory.frame_bits, 3 + (usize::BITS - (c.k - 1).leading_zeros()) as u64);
        prop_assert_eq!(report.peak_workspace_bits, inventory.engine_peak_bits());
    }
}

#[test]
fn unpartitioned_path_trace() {
    let graph = DirectedGraph::new(3, [(0, 1), (1, 2)]).unwrap();
    let mut trace: Vec<TraceEvent> = Vec::new();
    let (blocks, regs) = program_tape_shape(3, 2, 1);
    let mut tape = CatalyticTape::allocate(blocks, regs, 5, TapeInit::Zeros).unwrap();
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    Executor::new(&graph, 1)
        .unwrap()
        .with_trace(&mut trace)
        .run_program(&mut tape, 2, 0, 0, Direction::Forward, &mut meter)
        .unwrap();
    let lines: Vec<String> = trace.iter().map(ToString::to_string).collect();
    assert_eq!(
        lines,
        [
            "+U[0]→W1[1] (edge 0,1)",
            "+U[1]→W1[2] (edge 1,2)",
            "+W1[0]→V[1] (edge 0,1)",
            "+W1[1]→V[2] (edge 1,2)",
            "-U[1]→W1[2] (edge 1,2)",
            "-U[0]→W1[1] (edge 0,1)",
        ]
    );
}
