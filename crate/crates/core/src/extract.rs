//! Two-run differencing: `N_ℓ(s, t) mod q` from a tape with unknown contents.
//!
//! The program is run once as is and once after bumping `U[λ_s]` by one.
//! Each run is followed by its inverse, so the tape comes back untouched,
//! and the difference of the two readings of `V[λ_t]` is the walk count
//! modulo `q` whatever the tape held.

use thiserror::Error;

use crate::catalyst::{
    CatalyticTape, Divergence, PackedCatalyticTape, RegisterFile, Sign, TapeError, TapeInit,
};
use crate::crt::CrtError;
use crate::engine::{
    BlockLayout, Category, Direction, EngineError, Executor, MeterReport, SpaceMeter, TraceSink,
    WorkspaceInventory,
};
use crate::graph::{residue_decompose, DirectedGraph, GraphError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("walk length {length} outside 1..={n}")]
    LengthOutOfRange { length: usize, n: usize },
    #[error("partition parameter {k} outside 1..={n}")]
    PartitionOutOfRange { k: usize, n: usize },
    #[error("catalyst not restored after running modulo {modulus}: {divergence}")]
    NotRestored {
        modulus: u64,
        divergence: Divergence,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Crt(#[from] CrtError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl RunError {
    /// Errors that mean an invariant of the machine broke, as opposed to bad
    /// input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            RunError::NotRestored { .. }
                | RunError::Engine(EngineError::Meter(_))
                | RunError::Engine(EngineError::MalformedStack { .. })
                | RunError::Crt(CrtError::InconsistentWitness { .. })
        )
    }
}

/// Which storage backs the registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// One word per register.
    #[default]
    Plain,
    /// All registers packed into one integer.
    Packed,
}

/// Deliberate faults, for exercising the restoration checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Skip the inverse run after the second forward run.
    SkipUncompute,
}

#[derive(Default)]
pub struct RunOptions<'a> {
    pub encoding: Encoding,
    pub fault: Fault,
    pub trace: Option<&'a mut dyn TraceSink>,
}

/// Parameters of one `N_ℓ(s, t) mod q` computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub source: usize,
    pub target: usize,
    pub length: usize,
    pub k: usize,
    pub modulus: u64,
    pub seed: u64,
}

/// Checks `s, t < n`, `1 ≤ ℓ ≤ n` and `1 ≤ k ≤ n`.
pub fn validate_query(
    graph: &DirectedGraph,
    source: usize,
    target: usize,
    length: usize,
    k: usize,
) -> Result<(), RunError> {
    let n = graph.vertex_count();
    for vertex in [source, target] {
        if vertex >= n {
            return Err(RunError::VertexOutOfRange { vertex, n });
        }
    }
    if length == 0 || length > n {
        return Err(RunError::LengthOutOfRange { length, n });
    }
    if k == 0 || k > n {
        return Err(RunError::PartitionOutOfRange { k, n });
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self, graph: &DirectedGraph) -> Result<(), RunError> {
        validate_query(graph, self.source, self.target, self.length, self.k)?;
        if !crate::arith::is_prime(self.modulus) {
            return Err(TapeError::NotPrime(self.modulus).into());
        }
        Ok(())
    }
}

/// The two readings and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reading {
    pub modulus: u64,
    pub alpha: [u64; 2],
    pub residue: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModResult {
    pub residue: u64,
    pub reading: Reading,
    pub meter: MeterReport,
    pub inventory: WorkspaceInventory,
    pub encoding_bits: u64,
}

/// Runs the two-run extraction on tapes it is handed.
pub struct Extractor<'a> {
    exec: Executor<'a>,
    fault: Fault,
    runs: usize,
}

impl<'a> Extractor<'a> {
    pub fn new(graph: &'a DirectedGraph, k: usize) -> Result<Self, RunError> {
        Ok(Self {
            exec: Executor::new(graph, k)?,
            fault: Fault::None,
            runs: 0,
        })
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = fault;
        self
    }

    pub fn with_trace<'s: 'a>(mut self, sink: Option<&'a mut (dyn TraceSink + 's)>) -> Self {
        if let Some(sink) = sink {
            self.exec = self.exec.with_trace(sink);
        }
        self
    }

    /// Program runs (forward and inverse) performed so far.
    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn executor(&self) -> &Executor<'a> {
        &self.exec
    }

    /// `N_length(source, target) mod q` with `q` the tape's working modulus.
    /// The tape must be shaped for `length` (see
    /// [`program_tape_shape`](crate::engine::program_tape_shape)).
    pub fn count_mod<R: RegisterFile>(
        &mut self,
        tape: &mut R,
        source: usize,
        target: usize,
        length: usize,
        meter: &mut SpaceMeter,
    ) -> Result<Reading, RunError> {
        let k = self.exec.k();
        let q = tape.modulus();
        let s = residue_decompose(source, k)?;
        let t = residue_decompose(target, k)?;
        let driver_bits =
            self.exec.inventory(length, q).driver_bits + tape.encoding_workspace_bits();
        meter.charge(Category::Scratch, driver_bits);

        let mut alpha = [0u64; 2];
        for c in 0..2u64 {
            tape.add_into(BlockLayout::U, s.lambda, c, Sign::Plus)?;
            self.exec.run_program(
                tape,
                length,
                s.residue,
                t.residue,
                Direction::Forward,
                meter,
            )?;
            self.runs += 1;
            alpha[c as usize] = tape.read(BlockLayout::V, t.lambda)?;
            if !(self.fault == Fault::SkipUncompute && c == 1) {
                self.exec.run_program(
                    tape,
                    length,
                    s.residue,
                    t.residue,
                    Direction::Inverse,
                    meter,
                )?;
                self.runs += 1;
            }
            tape.add_into(BlockLayout::U, s.lambda, c, Sign::Minus)?;
        }

        meter
            .release(Category::Scratch, driver_bits)
            .map_err(EngineError::from)?;
        Ok(Reading {
            modulus: q,
            alpha,
            residue: crate::catalyst::mod_add(alpha[1], alpha[0], q, Sign::Minus),
        })
    }
}

fn count_on<R: RegisterFile>(
    mut tape: R,
    graph: &DirectedGraph,
    cfg: &RunConfig,
    options: RunOptions<'_>,
) -> Result<ModResult, RunError> {
    let mut extractor = Extractor::new(graph, cfg.k)?
        .with_fault(options.fault)
        .with_trace(options.trace);
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    let reading = extractor.count_mod(&mut tape, cfg.source, cfg.target, cfg.length, &mut meter)?;
    tape.verify_restored()
        .map_err(|divergence| RunError::NotRestored {
            modulus: cfg.modulus,
            divergence,
        })?;
    let meter = meter.finish().map_err(EngineError::from)?;
    Ok(ModResult {
        residue: reading.residue,
        reading,
        meter,
        inventory: extractor.executor().inventory(cfg.length, cfg.modulus),
        encoding_bits: tape.encoding_workspace_bits(),
    })
}

/// `N_ℓ(s, t) mod q` on a fresh tape filled from `cfg.seed`. Fails with
/// [`RunError::NotRestored`] if the tape is not bit-identical afterwards.
pub fn count_walks_mod(graph: &DirectedGraph, cfg: &RunConfig) -> Result<ModResult, RunError> {
    count_walks_mod_with(graph, cfg, RunOptions::default())
}

pub fn count_walks_mod_with(
    graph: &DirectedGraph,
    cfg: &RunConfig,
    options: RunOptions<'_>,
) -> Result<ModResult, RunError> {
    cfg.validate(graph)?;
    let (blocks, regs) = crate::engine::program_tape_shape(graph.vertex_count(), cfg.length, cfg.k);
    let init = TapeInit::from_seed(cfg.seed);
    match options.encoding {
        Encoding::Plain => count_on(
            CatalyticTape::allocate(blocks, regs, cfg.modulus, init)?,
            graph,
            cfg,
            options,
        ),
        Encoding::Packed => count_on(
            PackedCatalyticTape::allocate(blocks, regs, cfg.modulus, init)?,
            graph,
            cfg,
            options,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::corpus;

    fn cfg(source: usize, target: usize, length: usize, k: usize, modulus: u64) -> RunConfig {
        RunConfig {
            source,
            target,
            length,
            k,
            modulus,
            seed: 0,
        }
    }

    #[test]
    fn single_edge() {
        let g = DirectedGraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(count_walks_mod(&g, &cfg(0, 1, 1, 1, 2)).unwrap().residue, 1);
    }

    #[test]
    fn edgeless_graph() {
        let g = DirectedGraph::empty(3).unwrap();
        for (s, t) in [(0, 0), (0, 2), (2, 1)] {
            assert_eq!(count_walks_mod(&g, &cfg(s, t, 1, 1, 5)).unwrap().residue, 0);
        }
    }

    #[test]
    fn three_cycle_closed_walk() {
        let g = corpus::cycle(3);
        assert_eq!(count_walks_mod(&g, &cfg(0, 0, 3, 1, 7)).unwrap().residue, 1);
    }

    #[test]
    fn complete_digraph_partitioned() {
        let g = corpus::complete(3, false);
        assert_eq!(
            count_walks_mod(&g, &cfg(0, 0, 2, 3, 11)).unwrap().residue,
            2
        );
    }

    #[test]
    fn seed_and_encoding_do_not_matter() {
        let g = corpus::complete(4, true);
        for k in 1..=4 {
            let mut residues = Vec::new();
            for seed in 0..10 {
                for encoding in [Encoding::Plain, Encoding::Packed] {
                    let c = RunConfig {
                        seed,
                        ..cfg(1, 2, 3, k, 7)
                    };
                    let result = count_walks_mod_with(
                        &g,
                        &c,
                        RunOptions {
                            encoding,
                            ..Default::default()
                        },
                    )
                    .unwrap();
                    residues.push(result.residue);
                }
            }
            // 4^3 / 4 = 16 walks of length 3 between two fixed vertices.
            assert!(
                residues.iter().all(|&r| r == 16 % 7),
                "k = {k}: {residues:?}"
            );
        }
    }

    #[test]
    fn skipped_uncompute_is_detected() {
        let g = corpus::path(3);
        let c = RunConfig {
            seed: 4,
            ..cfg(0, 2, 2, 1, 5)
        };
        let err = count_walks_mod_with(
            &g,
            &c,
            RunOptions {
                fault: Fault::SkipUncompute,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, RunError::NotRestored { modulus: 5, .. }));
        assert!(err.is_invariant_violation());
    }

    #[test]
    fn rejects_invalid_configs() {
        let g = corpus::path(3);
        assert!(matches!(
            count_walks_mod(&g, &cfg(3, 0, 1, 1, 5)),
            Err(RunError::VertexOutOfRange { .. })
        ));
        assert!(matches!(
            count_walks_mod(&g, &cfg(0, 1, 0, 1, 5)),
            Err(RunError::LengthOutOfRange { .. })
        ));
        assert!(matches!(
            count_walks_mod(&g, &cfg(0, 1, 4, 1, 5)),
            Err(RunError::LengthOutOfRange { .. })
        ));
        assert!(matches!(
            count_walks_mod(&g, &cfg(0, 1, 1, 4, 5)),
            Err(RunError::PartitionOutOfRange { .. })
        ));
        assert!(matches!(
            count_walks_mod(&g, &cfg(0, 1, 1, 1, 6)),
            Err(RunError::Tape(TapeError::NotPrime(6)))
        ));
    }

    #[test]
    fn driver_workspace_is_exact() {
        let g = corpus::complete(5, false);
        for k in 1..=5 {
            for length in 1..=5 {
                let r = count_walks_mod(&g, &cfg(0, 4, length, k, 13)).unwrap();
                assert_eq!(
                    r.meter.peak_workspace_bits,
                    r.inventory.driver_peak_bits(r.encoding_bits)
                );
                assert_eq!(
                    r.meter.catalyst_bits,
                    crate::engine::catalyst_bits_formula(5, length, k, 13)
                );
            }
        }
    }
}
