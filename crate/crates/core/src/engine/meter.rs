//! Workspace accounting.
//!
//! The host machine uses ordinary memory; the meter tracks how many bits of
//! regular workspace the modelled machine would hold, split by category, and
//! records the peak. Catalytic bits are fixed when the meter is created.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{bits_for, ceil_log2};
use crate::graph::block_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// Control frames.
    Stack,
    /// Base-sweep temporaries and driver values.
    Scratch,
    /// Replay registers and loop flags of the executor.
    Cursor,
}

impl Category {
    const ALL: [Category; 3] = [Category::Stack, Category::Scratch, Category::Cursor];

    fn slot(self) -> usize {
        match self {
            Category::Stack => 0,
            Category::Scratch => 1,
            Category::Cursor => 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeterError {
    #[error("released {released} {category:?} bits with only {held} held")]
    Underflow {
        category: Category,
        held: u64,
        released: u64,
    },
    #[error("{bits} workspace bits and {frames} frames still held at the end of the run")]
    Unbalanced { bits: u64, frames: usize },
}

/// Peak workspace and catalyst figures of one metered run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeterReport {
    pub catalyst_bits: u64,
    pub peak_workspace_bits: u64,
    pub peak_stack_depth: usize,
    pub peak_stack_bits: u64,
    pub peak_scratch_bits: u64,
    pub peak_cursor_bits: u64,
}

#[derive(Debug, Clone)]
pub struct SpaceMeter {
    catalyst_bits: u64,
    held: [u64; 3],
    peak: [u64; 3],
    peak_total: u64,
    depth: usize,
    peak_depth: usize,
}

impl SpaceMeter {
    pub fn new(catalyst_bits: u64) -> Self {
        Self {
            catalyst_bits,
            held: [0; 3],
            peak: [0; 3],
            peak_total: 0,
            depth: 0,
            peak_depth: 0,
        }
    }

    pub fn catalyst_bits(&self) -> u64 {
        self.catalyst_bits
    }

    pub fn held_bits(&self) -> u64 {
        self.held.iter().sum()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn charge(&mut self, category: Category, bits: u64) {
        let slot = category.slot();
        self.held[slot] += bits;
        self.peak[slot] = self.peak[slot].max(self.held[slot]);
        self.peak_total = self.peak_total.max(self.held_bits());
    }

    pub fn release(&mut self, category: Category, bits: u64) -> Result<(), MeterError> {
        let slot = category.slot();
        if self.held[slot] < bits {
            return Err(MeterError::Underflow {
                category,
                held: self.held[slot],
                released: bits,
            });
        }
        self.held[slot] -= bits;
        Ok(())
    }

    pub fn push_frame(&mut self, frame_bits: u64) {
        self.depth += 1;
        self.peak_depth = self.peak_depth.max(self.depth);
        self.charge(Category::Stack, frame_bits);
    }

    pub fn pop_frame(&mut self, frame_bits: u64) -> Result<(), MeterError> {
        self.release(Category::Stack, frame_bits)?;
        self.depth -= 1;
        Ok(())
    }

    pub fn report(&self) -> MeterReport {
        MeterReport {
            catalyst_bits: self.catalyst_bits,
            peak_workspace_bits: self.peak_total,
            peak_stack_depth: self.peak_depth,
            peak_stack_bits: self.peak[Category::Stack.slot()],
            peak_scratch_bits: self.peak[Category::Scratch.slot()],
            peak_cursor_bits: self.peak[Category::Cursor.slot()],
        }
    }

    /// Ends the run: every charge must have been released.
    pub fn finish(&self) -> Result<MeterReport, MeterError> {
        let bits = self.held_bits();
        if bits != 0 || self.depth != 0 {
            return Err(MeterError::Unbalanced {
                bits,
                frames: self.depth,
            });
        }
        Ok(self.report())
    }

    /// Peak of a single category.
    pub fn peak_of(&self, category: Category) -> u64 {
        self.peak[category.slot()]
    }

    pub fn categories() -> [Category; 3] {
        Category::ALL
    }
}

/// The exact workspace inventory of a run.
///
/// * frame: stage (2 bits), midpoint residue (`⌈log₂ k⌉`), direction (1 bit);
/// * control: the replayed length (`bits(ℓ)`), the replayed residue pair,
///   three block ids among `r + 2` blocks, and the descend/return flag;
/// * sweep: edge cursor (`bits(m)`), the operand `U[λ_u]` (`⌈log₂ q⌉`), and
///   the positions `λ_u`, `λ_v`;
/// * driver: `α_0`, `α_1` and the increment `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkspaceInventory {
    pub depth: u64,
    pub frame_bits: u64,
    pub control_bits: u64,
    pub sweep_bits: u64,
    pub driver_bits: u64,
}

impl WorkspaceInventory {
    pub fn new(n: usize, edge_count: usize, length: usize, k: usize, q: u64) -> Self {
        let r = ceil_log2(length as u64);
        let residue_bits = u64::from(ceil_log2(k as u64));
        let q_bits = u64::from(ceil_log2(q));
        let position_bits = u64::from(bits_for(block_len(n, k) as u64 - 1));
        Self {
            depth: u64::from(r),
            frame_bits: frame_bits(k),
            control_bits: u64::from(bits_for(length as u64))
                + 2 * residue_bits
                + 3 * u64::from(bits_for(u64::from(r) + 1))
                + 1,
            sweep_bits: u64::from(bits_for(edge_count as u64)) + q_bits + 2 * position_bits,
            driver_bits: 2 * q_bits + 1,
        }
    }

    /// Fixed, depth-independent part of the engine's workspace.
    pub fn engine_scratch_bits(&self) -> u64 {
        self.control_bits + self.sweep_bits
    }

    /// Peak workspace of a single `run_program`.
    pub fn engine_peak_bits(&self) -> u64 {
        self.depth * self.frame_bits + self.engine_scratch_bits()
    }

    /// Peak workspace of a two-run extraction, plus whatever the register
    /// encoding itself needs.
    pub fn driver_peak_bits(&self, encoding_bits: u64) -> u64 {
        self.engine_peak_bits() + self.driver_bits + encoding_bits
    }
}

/// Bits per control frame: `3 + ⌈log₂ k⌉`.
pub fn frame_bits(k: usize) -> u64 {
    3 + u64::from(ceil_log2(k as u64))
}

/// `(⌈log₂ ℓ⌉ + 2) · ⌈n/k⌉ · ⌈log₂ q⌉`.
pub fn catalyst_bits_formula(n: usize, length: usize, k: usize, q: u64) -> u64 {
    (u64::from(ceil_log2(length as u64)) + 2) * block_len(n, k) as u64 * u64::from(ceil_log2(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_charges() {
        let mut meter = SpaceMeter::new(0);
        meter.charge(Category::Scratch, 5);
        meter.release(Category::Scratch, 5).unwrap();
        let report = meter.finish().unwrap();
        assert_eq!(report.peak_workspace_bits, 5);
        assert_eq!(meter.held_bits(), 0);
    }

    #[test]
    fn nested_charges_peak() {
        let mut meter = SpaceMeter::new(0);
        meter.charge(Category::Scratch, 3);
        meter.charge(Category::Cursor, 4);
        meter.release(Category::Cursor, 4).unwrap();
        meter.release(Category::Scratch, 3).unwrap();
        assert_eq!(meter.finish().unwrap().peak_workspace_bits, 7);
    }

    #[test]
    fn unbalanced_run_is_an_error() {
        let mut meter = SpaceMeter::new(0);
        meter.charge(Category::Stack, 2);
        assert_eq!(
            meter.finish(),
            Err(MeterError::Unbalanced { bits: 2, frames: 0 })
        );
        assert!(matches!(
            meter.release(Category::Cursor, 1),
            Err(MeterError::Underflow { .. })
        ));
    }

    #[test]
    fn frames_track_depth() {
        let mut meter = SpaceMeter::new(10);
        meter.push_frame(4);
        meter.push_frame(4);
        meter.pop_frame(4).unwrap();
        meter.push_frame(4);
        meter.pop_frame(4).unwrap();
        meter.pop_frame(4).unwrap();
        let report = meter.finish().unwrap();
        assert_eq!(report.peak_stack_depth, 2);
        assert_eq!(report.peak_stack_bits, 8);
        assert_eq!(report.catalyst_bits, 10);
    }

    #[test]
    fn formulas() {
        assert_eq!(frame_bits(1), 3);
        assert_eq!(frame_bits(2), 4);
        assert_eq!(frame_bits(4), 5);
        assert_eq!(frame_bits(5), 6);
        // (⌈log₂ 8⌉ + 2) · ⌈16/4⌉ · ⌈log₂ 13⌉ = 5 · 4 · 4
        assert_eq!(catalyst_bits_formula(16, 8, 4, 13), 80);
        assert_eq!(catalyst_bits_formula(3, 1, 1, 2), 6);
    }
}
