//! Register tuples packed into one integer.
//!
//! `m` registers over `Z_q` are stored as `x = r_1 + r_2·q + … + r_m·q^{m-1}`
//! in `⌈m·log₂ q⌉` bits, which is the information-theoretic minimum. Raw bits
//! that encode `x ≥ q^m` are repaired by clearing the most significant bit
//! and remembering that one bit of workspace; the bit is set again when the
//! computation is over. Register indices are 1-based inside this module.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{validate_moduli, Divergence, RegisterFile, Sign, TapeError, TapeInit};
use crate::arith::{bits_for, ceil_log2};

/// One packed register configuration plus its sanitization flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedTape {
    q: u64,
    m: usize,
    x: BigUint,
    msb_flipped: bool,
    bit_width: u64,
    /// `q^0 ..= q^m`.
    powers: Vec<BigUint>,
}

impl PackedTape {
    fn empty(q: u64, m: usize) -> Result<Self, TapeError> {
        if q < 2 {
            return Err(TapeError::NotPrime(q));
        }
        if m == 0 {
            return Err(TapeError::EmptyTape);
        }
        let mut powers = Vec::with_capacity(m + 1);
        powers.push(BigUint::one());
        for i in 0..m {
            let next = &powers[i] * q;
            powers.push(next);
        }
        let bit_width = (&powers[m] - 1u32).bits();
        Ok(Self {
            q,
            m,
            x: BigUint::zero(),
            msb_flipped: false,
            bit_width,
            powers,
        })
    }

    /// Encodes `values` (with `values[0]` as `r_1`).
    pub fn pack(values: &[u64], q: u64) -> Result<Self, TapeError> {
        let mut tape = Self::empty(q, values.len())?;
        for (index, &value) in values.iter().enumerate() {
            if value >= q {
                return Err(TapeError::InitValueOutOfRange {
                    index,
                    value,
                    limit: q,
                });
            }
            tape.x += &tape.powers[index] * value;
        }
        Ok(tape)
    }

    /// Wraps raw catalytic bits, which need not be a valid encoding.
    pub fn from_raw(q: u64, m: usize, x: BigUint) -> Result<Self, TapeError> {
        let mut tape = Self::empty(q, m)?;
        if x.bits() > tape.bit_width {
            return Err(TapeError::RawTooWide {
                bits: tape.bit_width,
            });
        }
        tape.x = x;
        Ok(tape)
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn register_count(&self) -> usize {
        self.m
    }

    pub fn raw(&self) -> &BigUint {
        &self.x
    }

    /// `⌈m·log₂ q⌉`.
    pub fn bit_width(&self) -> u64 {
        self.bit_width
    }

    /// `q^m`.
    pub fn capacity(&self) -> &BigUint {
        &self.powers[self.m]
    }

    pub fn msb_flipped(&self) -> bool {
        self.msb_flipped
    }

    pub fn is_valid(&self) -> bool {
        self.x < *self.capacity()
    }

    fn check_index(&self, i: usize) -> Result<(), TapeError> {
        if i == 0 || i > self.m {
            return Err(TapeError::PackedIndexOutOfRange {
                index: i,
                m: self.m,
            });
        }
        Ok(())
    }

    /// `r_i = ⌊x / q^{i-1}⌋ mod q`.
    pub fn unpack_register(&self, i: usize) -> Result<u64, TapeError> {
        self.check_index(i)?;
        if !self.is_valid() {
            return Err(TapeError::NotSanitized);
        }
        let digit = (&self.x / &self.powers[i - 1]) % self.q;
        Ok(digit.to_u64().expect("digit below q"))
    }

    /// All registers, `r_1` first.
    pub fn decode(&self) -> Result<Vec<u64>, TapeError> {
        if !self.is_valid() {
            return Err(TapeError::NotSanitized);
        }
        let mut rest = self.x.clone();
        let mut out = Vec::with_capacity(self.m);
        for _ in 0..self.m {
            let (quotient, digit) = rest.div_rem(&BigUint::from(self.q));
            out.push(digit.to_u64().expect("digit below q"));
            rest = quotient;
        }
        Ok(out)
    }

    fn add_mod_capacity(&mut self, amount: &BigUint, sign: Sign) {
        let capacity = &self.powers[self.m];
        self.x = match sign {
            Sign::Plus => (&self.x + amount) % capacity,
            Sign::Minus => (&self.x + capacity - amount) % capacity,
        };
    }

    /// `r_i ← r_i ± u (mod q)` on the encoding.
    ///
    /// Adds `±u·q^{i-1}` modulo `q^m`, then cancels the carry into `r_{i+1}`
    /// that occurs exactly when `r_i + u ≥ q` (or `r_i - u < 0`).
    pub fn packed_update(&mut self, i: usize, u: u64, sign: Sign) -> Result<(), TapeError> {
        self.check_index(i)?;
        if u >= self.q {
            return Err(TapeError::OperandOutOfRange {
                value: u,
                q: self.q,
            });
        }
        let current = self.unpack_register(i)?;
        let step = &self.powers[i - 1] * u;
        self.add_mod_capacity(&step, sign);
        let carried = match sign {
            Sign::Plus => current + u >= self.q,
            Sign::Minus => current < u,
        };
        if carried {
            let correction = self.powers[i].clone();
            self.add_mod_capacity(&correction, sign.flip());
        }
        Ok(())
    }

    /// Forces `x < q^m` by clearing the top bit if the encoding is invalid.
    pub fn sanitize(&mut self) {
        if self.is_valid() {
            return;
        }
        let top = self.bit_width - 1;
        // Clearing the top bit lands below 2^top, and 2^top ≤ q^m.
        assert!(
            BigUint::one() << top <= *self.capacity(),
            "top bit of a {}-bit encoding exceeds q^m",
            self.bit_width
        );
        assert!(self.x.bit(top), "invalid encoding without its top bit set");
        self.x.set_bit(top, false);
        self.msb_flipped = true;
        assert!(self.is_valid());
    }

    /// Undoes [`sanitize`](Self::sanitize).
    pub fn desanitize(&mut self) {
        if self.msb_flipped {
            self.x.set_bit(self.bit_width - 1, true);
            self.msb_flipped = false;
        }
    }
}

/// Block-structured registers stored as a single packed integer.
///
/// The catalyst is `⌈m·log₂ q_max⌉` raw bits. Under a modulus `q` the low
/// `⌈m·log₂ q⌉` bits form the active [`PackedTape`], sanitized on entry and
/// desanitized when the modulus changes or the raw contents are inspected.
#[derive(Debug, Clone)]
pub struct PackedCatalyticTape {
    moduli: Vec<u64>,
    block_count: usize,
    regs_per_block: usize,
    total_bits: u64,
    initial_raw: BigUint,
    high: BigUint,
    active: PackedTape,
}

fn low_bits(value: &BigUint, bits: u64) -> BigUint {
    value & ((BigUint::one() << bits) - 1u32)
}

impl PackedCatalyticTape {
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
        let m = block_count * regs_per_block;
        let template = PackedTape::empty(q_max, m)?;
        let total_bits = template.bit_width();
        let raw = match init {
            TapeInit::Zeros => BigUint::zero(),
            TapeInit::Explicit(values) => {
                if values.len() != m {
                    return Err(TapeError::InitLength {
                        expected: m,
                        found: values.len(),
                    });
                }
                PackedTape::pack(&values, q_max)?.x
            }
            TapeInit::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut bytes = vec![0u8; total_bits.div_ceil(8) as usize];
                rng.fill_bytes(&mut bytes);
                low_bits(&BigUint::from_bytes_le(&bytes), total_bits)
            }
        };
        let mut moduli = moduli.to_vec();
        moduli.sort_unstable();
        moduli.dedup();
        let mut tape = Self {
            moduli,
            block_count,
            regs_per_block,
            total_bits,
            initial_raw: raw.clone(),
            high: BigUint::zero(),
            active: template,
        };
        tape.open(q_max, raw)?;
        Ok(tape)
    }

    pub fn allocate(
        block_count: usize,
        regs_per_block: usize,
        q: u64,
        init: TapeInit,
    ) -> Result<Self, TapeError> {
        Self::allocate_shared(block_count, regs_per_block, &[q], init)
    }

    fn open(&mut self, q: u64, raw: BigUint) -> Result<(), TapeError> {
        let m = self.block_count * self.regs_per_block;
        let window = PackedTape::empty(q, m)?.bit_width();
        let mut active = PackedTape::from_raw(q, m, low_bits(&raw, window))?;
        active.sanitize();
        self.high = raw >> window;
        self.active = active;
        Ok(())
    }

    /// Current raw catalyst, as it would read after desanitizing.
    pub fn raw(&self) -> BigUint {
        let mut window = self.active.clone();
        window.desanitize();
        (&self.high << window.bit_width()) | window.x
    }

    pub fn initial_raw(&self) -> &BigUint {
        &self.initial_raw
    }

    pub fn active(&self) -> &PackedTape {
        &self.active
    }

    fn register(&self, block: usize, reg: usize) -> Result<usize, TapeError> {
        if block >= self.block_count || reg >= self.regs_per_block {
            return Err(TapeError::IndexOutOfRange {
                block,
                reg,
                blocks: self.block_count,
                regs: self.regs_per_block,
            });
        }
        Ok(block * self.regs_per_block + reg + 1)
    }
}

impl RegisterFile for PackedCatalyticTape {
    fn modulus(&self) -> u64 {
        self.active.q
    }

    fn block_count(&self) -> usize {
        self.block_count
    }

    fn regs_per_block(&self) -> usize {
        self.regs_per_block
    }

    fn catalyst_bits(&self) -> u64 {
        self.total_bits
    }

    fn read(&self, block: usize, reg: usize) -> Result<u64, TapeError> {
        let i = self.register(block, reg)?;
        self.active.unpack_register(i)
    }

    fn add_into(
        &mut self,
        block: usize,
        reg: usize,
        delta: u64,
        sign: Sign,
    ) -> Result<(), TapeError> {
        let i = self.register(block, reg)?;
        self.active.packed_update(i, delta, sign)
    }

    fn set_modulus(&mut self, q: u64) -> Result<(), TapeError> {
        if !self.moduli.contains(&q) {
            return Err(TapeError::UnknownModulus(q));
        }
        let raw = self.raw();
        self.open(q, raw)
    }

    fn verify_restored(&self) -> Result<(), Divergence> {
        if self.raw() == self.initial_raw {
            return Ok(());
        }
        let mut reference = self.clone();
        reference
            .open(self.active.q, self.initial_raw.clone())
            .expect("initial raw fits");
        let expected = reference.active.decode().expect("sanitized");
        let found = self.active.decode().expect("sanitized");
        match expected.iter().zip(&found).position(|(a, b)| a != b) {
            Some(idx) => Err(Divergence::Register {
                block: idx / self.regs_per_block,
                reg: idx % self.regs_per_block,
                expected: expected[idx],
                found: found[idx],
            }),
            None => Err(Divergence::Encoding),
        }
    }

    /// Sanitization flag, the extracted `r_i`, and the register index.
    fn encoding_workspace_bits(&self) -> u64 {
        let m = (self.block_count * self.regs_per_block) as u64;
        1 + u64::from(ceil_log2(self.active.q)) + u64::from(bits_for(m))
    }
}
