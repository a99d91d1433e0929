//! The catalytic tape.
//!
//! A tape is a fixed number of blocks, each holding the same number of
//! registers over `Z_q`. Whatever the tape holds when it is allocated is the
//! catalyst: a computation may scribble on it freely but must leave it
//! bit-identical at the end, which [`RegisterFile::verify_restored`] checks
//! against a snapshot frozen at allocation time.
//!
//! Two storages implement [`RegisterFile`]:
//!
//! * [`CatalyticTape`] keeps one machine word per register.
//! * [`PackedCatalyticTape`] keeps the whole configuration as one integer
//!   `x = r_1 + r_2 q + … + r_m q^{m-1}` and tolerates raw contents that do
//!   not decode to a valid tuple (see [`packed`]).
//!
//! Both can be shared between several prime moduli (one CRT run per prime).
//! A plain register word `v` of `w` bits is read under modulus `q` as
//! `v mod q`; updates rewrite only that low digit and keep `⌊v/q⌋` fixed, so
//! a word is usable under `q` when `(⌊v/q⌋ + 1)·q ≤ 2^w`. Seeded tapes draw
//! their words from the range valid for every modulus in the set. For a
//! single-modulus tape `w = ⌈log₂ q⌉` and this is ordinary residue storage.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arith::{ceil_log2, is_prime};

pub mod packed;

pub use packed::{PackedCatalyticTape, PackedTape};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TapeError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {q} does not fit a {word_bits}-bit register")]
    ModulusTooWide { q: u64, word_bits: u32 },
    #[error("modulus {0} is not one of the moduli this tape was allocated for")]
    UnknownModulus(u64),
    #[error("block and register counts must be at least 1")]
    EmptyTape,
    #[error("initial value {value} at register {index} is out of range (limit {limit})")]
    InitValueOutOfRange {
        index: usize,
        value: u64,
        limit: u64,
    },
    #[error("expected {expected} initial values, got {found}")]
    InitLength { expected: usize, found: usize },
    #[error("register ({block}, {reg}) out of range for {blocks} blocks of {regs}")]
    IndexOutOfRange {
        block: usize,
        reg: usize,
        blocks: usize,
        regs: usize,
    },
    #[error("packed register index {index} out of range 1..={m}")]
    PackedIndexOutOfRange { index: usize, m: usize },
    #[error("operand {value} is not a residue modulo {q}")]
    OperandOutOfRange { value: u64, q: u64 },
    #[error("raw value has more than {bits} bits")]
    RawTooWide { bits: u64 },
    #[error("packed value is not a valid encoding; sanitize it first")]
    NotSanitized,
    #[error("at least one modulus is required")]
    NoModuli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// `value ± delta (mod q)` for residues `value, delta < q`.
#[inline]
pub fn mod_add(value: u64, delta: u64, q: u64, sign: Sign) -> u64 {
    match sign {
        Sign::Plus => {
            let s = value + delta;
            if s >= q {
                s - q
            } else {
                s
            }
        }
        Sign::Minus => {
            if value >= delta {
                value - delta
            } else {
                value + q - delta
            }
        }
    }
}

/// How a freshly allocated tape is filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TapeInit {
    Zeros,
    /// One value per register, block-major.
    Explicit(Vec<u64>),
    /// Pseudorandom contents from a ChaCha8 stream with this seed.
    Seeded(u64),
}

impl TapeInit {
    /// Seed `0` means an all-zero tape; anything else is pseudorandom.
    pub fn from_seed(seed: u64) -> Self {
        if seed == 0 {
            TapeInit::Zeros
        } else {
            TapeInit::Seeded(seed)
        }
    }
}

/// First register whose contents differ from the initial snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Divergence {
    #[error("register ({block}, {reg}) holds {found}, expected {expected}")]
    Register {
        block: usize,
        reg: usize,
        expected: u64,
        found: u64,
    },
    /// Packed storage whose raw bits differ without any register-level
    /// difference (high bits or the sanitization flag).
    #[error("raw encoding differs from the initial catalyst")]
    Encoding,
}

/// Block-structured registers over `Z_q` with reversible updates.
pub trait RegisterFile {
    /// The modulus runs currently operate under.
    fn modulus(&self) -> u64;
    fn block_count(&self) -> usize;
    fn regs_per_block(&self) -> usize;
    /// Total catalytic bits, fixed at allocation.
    fn catalyst_bits(&self) -> u64;
    /// Current residue of register `reg` in block `block`.
    fn read(&self, block: usize, reg: usize) -> Result<u64, TapeError>;
    /// `R ← R ± delta (mod q)`; nothing else changes.
    fn add_into(
        &mut self,
        block: usize,
        reg: usize,
        delta: u64,
        sign: Sign,
    ) -> Result<(), TapeError>;
    /// Switches to another of the moduli the tape was allocated for. Only
    /// legal while the tape is restored.
    fn set_modulus(&mut self, q: u64) -> Result<(), TapeError>;
    fn verify_restored(&self) -> Result<(), Divergence>;
    /// Workspace bits the storage itself needs while a run is active.
    fn encoding_workspace_bits(&self) -> u64 {
        0
    }

    fn is_restored(&self) -> bool {
        self.verify_restored().is_ok()
    }

    /// Current residues of one block.
    fn block_values(&self, block: usize) -> Result<Vec<u64>, TapeError> {
        (0..self.regs_per_block())
            .map(|reg| self.read(block, reg))
            .collect()
    }

    /// Current residues of the whole tape, block-major.
    fn values(&self) -> Vec<u64> {
        (0..self.block_count())
            .flat_map(|b| (0..self.regs_per_block()).map(move |r| (b, r)))
            .map(|(b, r)| self.read(b, r).expect("in range"))
            .collect()
    }

    /// Human-readable dump: a `q=.. blocks=.. regs=..` header, then one line
    /// of decimal residues per block.
    fn dump(&self) -> String {
        let mut out = format!(
            "q={} blocks={} regs={}\n",
            self.modulus(),
            self.block_count(),
            self.regs_per_block()
        );
        for b in 0..self.block_count() {
            let line: Vec<String> = self
                .block_values(b)
                .expect("in range")
                .iter()
                .map(u64::to_string)
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Checks a set of moduli: non-empty, all prime. Returns the largest.
pub(crate) fn validate_moduli(moduli: &[u64]) -> Result<u64, TapeError> {
    if let Some(&bad) = moduli.iter().find(|&&q| !is_prime(q)) {
        return Err(TapeError::NotPrime(bad));
    }
    moduli.iter().copied().max().ok_or(TapeError::NoModuli)
}

/// Plain tape: one `word_bits`-wide word per register.
#[derive(Debug, Clone)]
pub struct CatalyticTape {
    modulus: u64,
    moduli: Vec<u64>,
    word_bits: u32,
    block_count: usize,
    regs_per_block: usize,
    values: Vec<u64>,
    initial: Box<[u64]>,
}

impl CatalyticTape {
    /// Tape over `Z_q` with `⌈log₂ q⌉`-bit registers.
    pub fn allocate(
        block_count: usize,
        regs_per_block: usize,
        q: u64,
        init: TapeInit,
    ) -> Result<Self, TapeError> {
        Self::allocate_shared(block_count, regs_per_block, &[q], init)
    }

    /// Tape reusable under every modulus in `moduli`. Registers are
    /// `⌈log₂ max(moduli)⌉` bits wide; the working modulus starts at the largest.
    pub fn allocate_shared(
        block_count: usize,
        regs_per_block: usize,
        moduli: &[u64],
        init: TapeInit,
    ) -> Result<Self, TapeError> {
        let q_max = validate_moduli(moduli)?;
        if block_count == 0 || regs_per_block == 0 {
            return Err(TapeError::EmptyTape);
        }
        let word_bits = ceil_log2(q_max);
        let limit = shared_limit(word_bits, moduli);
        let len = block_count * regs_per_block;
        let values = match init {
            TapeInit::Zeros => vec![0; len],
            TapeInit::Explicit(values) => {
                if values.len() != len {
                    return Err(TapeError::InitLength {
                        expected: len,
                        found: values.len(),
                    });
                }
                if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v >= limit)
                {
                    return Err(TapeError::InitValueOutOfRange {
                        index,
                        value,
                        limit,
                    });
                }
                values
            }
            TapeInit::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| rng.gen_range(0..limit)).collect()
            }
        };
        let mut moduli = moduli.to_vec();
        moduli.sort_unstable();
        moduli.dedup();
        Ok(Self {
            modulus: q_max,
            moduli,
            word_bits,
            block_count,
            regs_per_block,
            initial: values.clone().into_boxed_slice(),
            values,
        })
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    /// Size in bits: `blocks · regs · ⌈log₂ q_max⌉`.
    pub fn bit_size(&self) -> u64 {
        (self.block_count * self.regs_per_block) as u64 * u64::from(self.word_bits)
    }

    /// Raw register words as allocated.
    pub fn initial_snapshot(&self) -> &[u64] {
        &self.initial
    }

    #[inline]
    fn index(&self, block: usize, reg: usize) -> Result<usize, TapeError> {
        if block >= self.block_count || reg >= self.regs_per_block {
            return Err(TapeError::IndexOutOfRange {
                block,
                reg,
                blocks: self.block_count,
                regs: self.regs_per_block,
            });
        }
        Ok(block * self.regs_per_block + reg)
    }
}

/// Largest `L` such that every word below `L` is usable under each modulus.
fn shared_limit(word_bits: u32, moduli: &[u64]) -> u64 {
    let capacity = 1u64 << word_bits;
    moduli
        .iter()
        .map(|&q| capacity / q * q)
        .min()
        .expect("non-empty moduli")
}

impl RegisterFile for CatalyticTape {
    fn modulus(&self) -> u64 {
        self.modulus
    }

    fn block_count(&self) -> usize {
        self.block_count
    }

    fn regs_per_block(&self) -> usize {
        self.regs_per_block
    }

    fn catalyst_bits(&self) -> u64 {
        self.bit_size()
    }

    #[inline]
    fn read(&self, block: usize, reg: usize) -> Result<u64, TapeError> {
        let idx = self.index(block, reg)?;
        Ok(self.values[idx] % self.modulus)
    }

    #[inline]
    fn add_into(
        &mut self,
        block: usize,
        reg: usize,
        delta: u64,
        sign: Sign,
    ) -> Result<(), TapeError> {
        let q = self.modulus;
        if delta >= q {
            return Err(TapeError::OperandOutOfRange { value: delta, q });
        }
        let idx = self.index(block, reg)?;
        let word = self.values[idx];
        let low = word % q;
        self.values[idx] = word - low + mod_add(low, delta, q, sign);
        Ok(())
    }

    fn set_modulus(&mut self, q: u64) -> Result<(), TapeError> {
        if !self.moduli.contains(&q) {
            return Err(TapeError::UnknownModulus(q));
        }
        self.modulus = q;
        Ok(())
    }

    fn verify_restored(&self) -> Result<(), Divergence> {
        match self
            .values
            .iter()
            .zip(self.initial.iter())
            .position(|(now, then)| now != then)
        {
            None => Ok(()),
            Some(idx) => Err(Divergence::Register {
                block: idx / self.regs_per_block,
                reg: idx % self.regs_per_block,
                expected: self.initial[idx],
                found: self.values[idx],
            }),
        }
    }
}

impl fmt::Display for CatalyticTape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_sizes() {
        let tape = CatalyticTape::allocate(2, 3, 5, TapeInit::Zeros).unwrap();
        assert_eq!(tape.values(), vec![0; 6]);
        assert_eq!(tape.bit_size(), 18);

        let one = CatalyticTape::allocate(1, 1, 2, TapeInit::Explicit(vec![1])).unwrap();
        assert_eq!(one.read(0, 0).unwrap(), 1);
    }

    #[test]
    fn allocation_errors() {
        assert_eq!(
            CatalyticTape::allocate(1, 1, 4, TapeInit::Zeros).unwrap_err(),
            TapeError::NotPrime(4)
        );
        assert!(matches!(
            CatalyticTape::allocate(1, 2, 5, TapeInit::Explicit(vec![1, 5])).unwrap_err(),
            TapeError::InitValueOutOfRange {
                index: 1,
                value: 5,
                ..
            }
        ));
        assert!(matches!(
            CatalyticTape::allocate(1, 2, 5, TapeInit::Explicit(vec![1])).unwrap_err(),
            TapeError::InitLength { .. }
        ));
        assert_eq!(
            CatalyticTape::allocate(0, 2, 5, TapeInit::Zeros).unwrap_err(),
            TapeError::EmptyTape
        );
    }

    #[test]
    fn seeded_values_are_residues() {
        let tape = CatalyticTape::allocate(4, 7, 13, TapeInit::Seeded(9)).unwrap();
        assert!(tape.values().iter().all(|&v| v < 13));
        let again = CatalyticTape::allocate(4, 7, 13, TapeInit::Seeded(9)).unwrap();
        assert_eq!(tape.values(), again.values());
    }

    #[test]
    fn add_into_is_modular() {
        let mut tape = CatalyticTape::allocate(1, 1, 5, TapeInit::Explicit(vec![1])).unwrap();
        tape.add_into(0, 0, 3, Sign::Plus).unwrap();
        assert_eq!(tape.read(0, 0).unwrap(), 4);
        tape.add_into(0, 0, 3, Sign::Plus).unwrap();
        assert_eq!(tape.read(0, 0).unwrap(), 2);
        tape.add_into(0, 0, 3, Sign::Minus).unwrap();
        tape.add_into(0, 0, 3, Sign::Minus).unwrap();
        assert_eq!(tape.read(0, 0).unwrap(), 1);
        assert!(tape.is_restored());
    }

    #[test]
    fn add_into_rejects_bad_indices() {
        let mut tape = CatalyticTape::allocate(2, 2, 5, TapeInit::Zeros).unwrap();
        assert!(matches!(
            tape.add_into(2, 0, 1, Sign::Plus),
            Err(TapeError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            tape.add_into(0, 2, 1, Sign::Plus),
            Err(TapeError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            tape.add_into(0, 0, 5, Sign::Plus),
            Err(TapeError::OperandOutOfRange { .. })
        ));
    }

    #[test]
    fn restoration_reports_first_divergence() {
        let mut tape = CatalyticTape::allocate(2, 3, 7, TapeInit::Seeded(3)).unwrap();
        assert!(tape.verify_restored().is_ok());
        let before = tape.read(1, 2).unwrap();
        tape.add_into(1, 2, 4, Sign::Plus).unwrap();
        match tape.verify_restored() {
            Err(Divergence::Register {
                block,
                reg,
                expected,
                found,
            }) => {
                assert_eq!((block, reg, expected), (1, 2, before));
                assert_eq!(found, (before + 4) % 7);
            }
            other => panic!("unexpected {other:?}"),
        }
        tape.add_into(1, 2, 4, Sign::Minus).unwrap();
        assert!(tape.verify_restored().is_ok());
    }

    #[test]
    fn dump_format() {
        let tape = CatalyticTape::allocate(2, 2, 5, TapeInit::Explicit(vec![1, 2, 3, 4])).unwrap();
        assert_eq!(tape.dump(), "q=5 blocks=2 regs=2\n1 2\n3 4\n");
    }

    #[test]
    fn shared_tape_switches_moduli() {
        let moduli = [2, 3, 5, 7];
        let mut tape = CatalyticTape::allocate_shared(3, 4, &moduli, TapeInit::Seeded(11)).unwrap();
        assert_eq!(tape.word_bits(), 3);
        assert_eq!(tape.bit_size(), 3 * 4 * 3);
        for q in moduli {
            tape.set_modulus(q).unwrap();
            for b in 0..3 {
                for r in 0..4 {
                    let before = tape.read(b, r).unwrap();
                    assert!(before < q);
                    tape.add_into(b, r, q - 1, Sign::Plus).unwrap();
                    assert_eq!(tape.read(b, r).unwrap(), (before + q - 1) % q);
                    assert!(tape.values.iter().all(|&w| w < 1 << tape.word_bits()));
                }
            }
            for b in 0..3 {
                for r in 0..4 {
                    tape.add_into(b, r, q - 1, Sign::Minus).unwrap();
                }
            }
            assert!(tape.is_restored());
        }
        assert_eq!(tape.set_modulus(11), Err(TapeError::UnknownModulus(11)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn signed_replay_in_reverse_restores(
                seed in any::<u64>(),
                ops in proptest::collection::vec((0usize..3, 0usize..4, 0u64..11, any::<bool>()), 0..60),
            ) {
                let mut tape = CatalyticTape::allocate(3, 4, 11, TapeInit::Seeded(seed)).unwrap();
                let signed = |plus: bool| if plus { Sign::Plus } else { Sign::Minus };
                for &(b, r, d, s) in &ops {
                    tape.add_into(b, r, d, signed(s)).unwrap();
                    prop_assert!(tape.read(b, r).unwrap() < 11);
                }
                for &(b, r, d, s) in ops.iter().rev() {
                    tape.add_into(b, r, d, signed(s).flip()).unwrap();
                }
                prop_assert!(tape.verify_restored().is_ok());
            }
        }
    }
}
