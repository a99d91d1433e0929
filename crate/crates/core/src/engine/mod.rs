//! Iterative executor for the reversible walk-propagation programs.
//!
//! `P^(ℓ)_{i,j}(U, V, W_1..W_r)` adds to every register `V[λ_v]`, `v ≡ j`,
//! information about the length-`ℓ` walks that start at residue-`i`
//! vertices. For `ℓ = 1` it is a single sweep over the qualifying edges
//! (`V[λ_v] ± U[λ_u]`). For `ℓ ≥ 2` it loops over the midpoint residue `m`
//! and, for each, propagates `⌈ℓ/2⌉` from `U` into `W_r`, `⌊ℓ/2⌋` from `W_r`
//! into `V`, and then undoes the first step. With `k = 1` there is a single
//! midpoint and this is the unpartitioned program.
//!
//! Recursion is replaced by a [`ControlStack`] of at most `⌈log₂ ℓ⌉` frames
//! and every frame, cursor and temporary is charged to a [`SpaceMeter`].

use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::arith::ceil_log2;
use crate::catalyst::{RegisterFile, Sign, TapeError};
use crate::graph::{block_len, DirectedGraph, GraphError, ResidueEdgeIndex};

pub mod meter;
pub mod stack;

pub use meter::{
    catalyst_bits_formula, frame_bits, Category, MeterError, MeterReport, SpaceMeter,
    WorkspaceInventory,
};
pub use stack::{BlockLayout, BlockRoles, Call, ControlFrame, ControlStack, Direction, Stage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("input and output block are both {0}")]
    BlockCollision(usize),
    #[error("walk length must be at least 1")]
    ZeroLength,
    #[error("program of length {length} needs {needed} blocks, tape has {found}")]
    InsufficientBlocks {
        length: usize,
        needed: usize,
        found: usize,
    },
    #[error("blocks must hold ⌈n/k⌉ = {expected} registers, tape has {found}")]
    RegisterCountMismatch { expected: usize, found: usize },
    #[error("partition parameter {k} outside 1..={n}")]
    PartitionOutOfRange { k: usize, n: usize },
    #[error("residue {residue} outside 0..{k}")]
    ResidueOutOfRange { residue: usize, k: usize },
    #[error("control stack of depth {depth} exceeds the {max_depth} available scratch blocks")]
    MalformedStack { depth: usize, max_depth: usize },
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One base-program register update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub sign: Sign,
    pub input_block: usize,
    pub output_block: usize,
    pub input_reg: usize,
    pub output_reg: usize,
    pub edge: (usize, usize),
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}[{}]→{}[{}] (edge {},{})",
            self.sign.symbol(),
            BlockLayout::name(self.input_block),
            self.input_reg,
            BlockLayout::name(self.output_block),
            self.output_reg,
            self.edge.0,
            self.edge.1
        )
    }
}

pub trait TraceSink {
    fn record(&mut self, event: &TraceEvent);
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, event: &TraceEvent) {
        self.push(*event);
    }
}

/// Writes one line per event.
pub struct LineTrace<W: Write>(pub W);

impl<W: Write> TraceSink for LineTrace<W> {
    fn record(&mut self, event: &TraceEvent) {
        // Trace output is best effort.
        let _ = writeln!(self.0, "{event}");
    }
}

/// Runs programs for one graph and one partition parameter.
pub struct Executor<'a> {
    graph: &'a DirectedGraph,
    index: ResidueEdgeIndex,
    k: usize,
    regs_per_block: usize,
    trace: Option<&'a mut dyn TraceSink>,
}

impl<'a> Executor<'a> {
    pub fn new(graph: &'a DirectedGraph, k: usize) -> Result<Self, EngineError> {
        let n = graph.vertex_count();
        if k == 0 || k > n {
            return Err(EngineError::PartitionOutOfRange { k, n });
        }
        Ok(Self {
            graph,
            index: ResidueEdgeIndex::new(graph, k)?,
            k,
            regs_per_block: block_len(n, k),
            trace: None,
        })
    }

    pub fn with_trace<'s: 'a>(mut self, sink: &'a mut (dyn TraceSink + 's)) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn graph(&self) -> &DirectedGraph {
        self.graph
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn regs_per_block(&self) -> usize {
        self.regs_per_block
    }

    /// `⌈log₂ ℓ⌉ + 2` blocks.
    pub fn blocks_needed(length: usize) -> usize {
        ceil_log2(length.max(1) as u64) as usize + 2
    }

    pub fn inventory(&self, length: usize, q: u64) -> WorkspaceInventory {
        WorkspaceInventory::new(
            self.graph.vertex_count(),
            self.graph.edge_count(),
            length,
            self.k,
            q,
        )
    }

    fn check_residue(&self, residue: usize) -> Result<(), EngineError> {
        if residue >= self.k {
            return Err(EngineError::ResidueOutOfRange { residue, k: self.k });
        }
        Ok(())
    }

    fn check_tape<R: RegisterFile>(&self, tape: &R, length: usize) -> Result<(), EngineError> {
        if tape.regs_per_block() != self.regs_per_block {
            return Err(EngineError::RegisterCountMismatch {
                expected: self.regs_per_block,
                found: tape.regs_per_block(),
            });
        }
        let needed = Self::blocks_needed(length);
        if tape.block_count() < needed {
            return Err(EngineError::InsufficientBlocks {
                length,
                needed,
                found: tape.block_count(),
            });
        }
        Ok(())
    }

    /// The base program: for each edge `(u, v)` with `u ≡ i`, `v ≡ j`,
    /// `output[λ_v] ← output[λ_v] ± input[λ_u]`. Inverse sweeps run the
    /// edges in reverse order and subtract.
    #[allow(clippy::too_many_arguments)]
    pub fn run_base<R: RegisterFile>(
        &mut self,
        tape: &mut R,
        input: usize,
        output: usize,
        i: usize,
        j: usize,
        direction: Direction,
        meter: &mut SpaceMeter,
    ) -> Result<(), EngineError> {
        if input == output {
            return Err(EngineError::BlockCollision(input));
        }
        self.check_residue(i)?;
        self.check_residue(j)?;
        self.check_tape(tape, 1)?;
        let sweep = self.inventory(1, tape.modulus()).sweep_bits;
        meter.charge(Category::Scratch, sweep);
        self.sweep(tape, input, output, i, j, direction)?;
        meter.release(Category::Scratch, sweep)?;
        Ok(())
    }

    fn sweep<R: RegisterFile>(
        &mut self,
        tape: &mut R,
        input: usize,
        output: usize,
        i: usize,
        j: usize,
        direction: Direction,
    ) -> Result<(), TapeError> {
        let k = self.k;
        let sign = match direction {
            Direction::Forward => Sign::Plus,
            Direction::Inverse => Sign::Minus,
        };
        let bucket = self.index.bucket(i, j);
        let mut apply = |&(u, v): &(usize, usize)| -> Result<(), TapeError> {
            let (src, dst) = (u / k, v / k);
            let operand = tape.read(input, src)?;
            tape.add_into(output, dst, operand, sign)?;
            if let Some(sink) = self.trace.as_deref_mut() {
                sink.record(&TraceEvent {
                    sign,
                    input_block: input,
                    output_block: output,
                    input_reg: src,
                    output_reg: dst,
                    edge: (u, v),
                });
            }
            Ok(())
        };
        match direction {
            Direction::Forward => bucket.iter().try_for_each(&mut apply),
            Direction::Inverse => bucket.iter().rev().try_for_each(&mut apply),
        }
    }

    /// Runs `P^(length)_{i,j}(U, V, W_1..W_r)` or its inverse on blocks
    /// `0, 1, 2..=r+1` of `tape`. Only block `V` changes.
    pub fn run_program<R: RegisterFile>(
        &mut self,
        tape: &mut R,
        length: usize,
        i: usize,
        j: usize,
        direction: Direction,
        meter: &mut SpaceMeter,
    ) -> Result<(), EngineError> {
        if length == 0 {
            return Err(EngineError::ZeroLength);
        }
        self.check_residue(i)?;
        self.check_residue(j)?;
        self.check_tape(tape, length)?;

        let inventory = self.inventory(length, tape.modulus());
        let layout = BlockLayout::new(inventory.depth as usize);
        let frame_bits = inventory.frame_bits;
        meter.charge(Category::Cursor, inventory.control_bits);

        let mut stack = ControlStack::new();
        let mut descend = true;
        loop {
            if descend {
                let call = stack.next_call(layout, length, i, j, direction)?;
                if call.length == 1 {
                    meter.charge(Category::Scratch, inventory.sweep_bits);
                    self.sweep(
                        tape,
                        call.roles.input,
                        call.roles.output,
                        call.from_residue,
                        call.to_residue,
                        call.direction,
                    )?;
                    meter.release(Category::Scratch, inventory.sweep_bits)?;
                    descend = false;
                } else {
                    stack.push(ControlFrame::new(call.direction));
                    meter.push_frame(frame_bits);
                }
            } else {
                let Some(top) = stack.top_mut() else {
                    break;
                };
                if top.advance(self.k) {
                    descend = true;
                } else {
                    stack.pop();
                    meter.pop_frame(frame_bits)?;
                }
            }
        }

        meter.release(Category::Cursor, inventory.control_bits)?;
        Ok(())
    }
}

/// `run_base` with a throwaway meter.
#[allow(clippy::too_many_arguments)]
pub fn run_base<R: RegisterFile>(
    tape: &mut R,
    input: usize,
    output: usize,
    graph: &DirectedGraph,
    i: usize,
    j: usize,
    k: usize,
    direction: Direction,
) -> Result<(), EngineError> {
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    Executor::new(graph, k)?.run_base(tape, input, output, i, j, direction, &mut meter)
}

/// Runs `P^(length)_{i,j}` (or its inverse) on `tape`, charging `meter`.
#[allow(clippy::too_many_arguments)]
pub fn run_program<R: RegisterFile>(
    tape: &mut R,
    graph: &DirectedGraph,
    length: usize,
    i: usize,
    j: usize,
    k: usize,
    direction: Direction,
    meter: &mut SpaceMeter,
) -> Result<(), EngineError> {
    Executor::new(graph, k)?.run_program(tape, length, i, j, direction, meter)
}

/// Allocates a tape shaped for `P^(length)` under partition parameter `k`.
pub fn program_tape_shape(n: usize, length: usize, k: usize) -> (usize, usize) {
    (Executor::blocks_needed(length), block_len(n, k))
}
