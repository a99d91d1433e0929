//! Exact walk counts from residues, and the reachability decision built on it.
//!
//! The two-run extraction only ever yields `N_ℓ(s,t) mod q`. Running it for
//! enough primes that their product exceeds the bound `n^ℓ ≥ N_ℓ(s,t)`
//! pins the count down, and mixed-radix reconstruction turns the residues
//! back into an integer. The same tape serves every prime because each
//! extraction leaves it as it found it.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{ceil_log2, is_prime, mod_inverse};
use crate::catalyst::{CatalyticTape, PackedCatalyticTape, RegisterFile, TapeInit};
use crate::engine::{frame_bits, program_tape_shape, EngineError, MeterReport, SpaceMeter};
use crate::extract::{validate_query, Encoding, Extractor, Fault, Reading, RunError};
use crate::graph::DirectedGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CrtError {
    #[error("{moduli} moduli but {residues} residues")]
    LengthMismatch { moduli: usize, residues: usize },
    #[error("modulus must be at least 1")]
    ZeroModulus,
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),
    #[error("residue {residue} is not below its modulus {modulus}")]
    ResidueOutOfRange { residue: u64, modulus: u64 },
    #[error("witness value disagrees with residue {residue} modulo {modulus}")]
    InconsistentWitness { modulus: u64, residue: u64 },
}

/// The primes in increasing order, by trial division.
#[derive(Debug, Clone)]
pub struct Primes {
    candidate: u64,
}

impl Primes {
    pub fn new() -> Self {
        Self { candidate: 2 }
    }
}

impl Default for Primes {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for Primes {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while !is_prime(self.candidate) {
            self.candidate += 1;
        }
        let p = self.candidate;
        self.candidate += 1;
        Some(p)
    }
}

/// The first `count` primes.
pub fn primes_stream(count: usize) -> Vec<u64> {
    Primes::new().take(count).collect()
}

/// Primes stay below `2^32` so every register operation fits a `u64`.
const PRIME_CAP: u64 = 1 << 32;

/// Shortest prefix of the primes whose product strictly exceeds `n^length`.
pub fn choose_moduli(n: usize, length: usize) -> Vec<u64> {
    let bound = BigUint::from(n).pow(length as u32);
    let mut product = BigUint::one();
    let mut moduli = Vec::new();
    for p in Primes::new() {
        if product > bound {
            break;
        }
        assert!(p < PRIME_CAP, "prime {p} does not fit the register word");
        product *= p;
        moduli.push(p);
    }
    assert!(
        moduli.len() <= 2 * n.max(1),
        "minimal prefix longer than 2n primes"
    );
    moduli
}

/// The first `2n` primes; their product exceeds `n^n`.
pub fn strict_moduli(n: usize) -> Vec<u64> {
    let moduli = primes_stream(2 * n);
    let product: BigUint = moduli.iter().map(|&p| BigUint::from(p)).product();
    assert!(
        product > BigUint::from(n).pow(n as u32),
        "2n primes do not exceed n^n"
    );
    assert!(moduli.iter().all(|&p| p < PRIME_CAP));
    moduli
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuliPolicy {
    /// Fewest primes whose product exceeds `n^ℓ`.
    #[default]
    Minimal,
    /// The first `2n` primes regardless of `ℓ`.
    StrictPaper,
}

impl ModuliPolicy {
    pub fn moduli(self, n: usize, length: usize) -> Vec<u64> {
        match self {
            ModuliPolicy::Minimal => choose_moduli(n, length),
            ModuliPolicy::StrictPaper => strict_moduli(n),
        }
    }
}

/// The unique `x < ∏ moduli` with `x ≡ residues[i] (mod moduli[i])`,
/// by Garner's mixed-radix combination.
pub fn crt_reconstruct(moduli: &[u64], residues: &[u64]) -> Result<BigUint, CrtError> {
    if moduli.len() != residues.len() {
        return Err(CrtError::LengthMismatch {
            moduli: moduli.len(),
            residues: residues.len(),
        });
    }
    for (idx, (&m, &r)) in moduli.iter().zip(residues).enumerate() {
        if m == 0 {
            return Err(CrtError::ZeroModulus);
        }
        if r >= m {
            return Err(CrtError::ResidueOutOfRange {
                residue: r,
                modulus: m,
            });
        }
        if let Some(&other) = moduli[..idx].iter().find(|&&o| o.gcd(&m) != 1) {
            return Err(CrtError::NotCoprime(other, m));
        }
    }

    let mut value = BigUint::zero();
    let mut radix = BigUint::one();
    for (&m, &r) in moduli.iter().zip(residues) {
        let current = (&value % m).to_u64().expect("below modulus");
        let radix_mod = (&radix % m).to_u64().expect("below modulus");
        let inverse = mod_inverse(radix_mod, m).expect("coprime moduli");
        let gap = (r + m - current) % m;
        let digit = (u128::from(gap) * u128::from(inverse) % u128::from(m)) as u64;
        value += &radix * digit;
        radix *= m;
    }
    Ok(value)
}

/// Per-prime residues of a count together with its reconstruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrtWitness {
    pub moduli: Vec<u64>,
    pub residues: Vec<u64>,
    /// Decimal, so the record survives JSON unchanged.
    #[serde(with = "decimal")]
    pub value: BigUint,
    #[serde(with = "decimal")]
    pub bound: BigUint,
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom(format!("not a decimal integer: {text}")))
    }
}

impl CrtWitness {
    pub fn from_residues(moduli: Vec<u64>, residues: Vec<u64>) -> Result<Self, CrtError> {
        let value = crt_reconstruct(&moduli, &residues)?;
        let bound = moduli.iter().map(|&m| BigUint::from(m)).product();
        let witness = Self {
            moduli,
            residues,
            value,
            bound,
        };
        witness.check()?;
        Ok(witness)
    }

    /// Re-checks `value < bound` and every congruence.
    pub fn check(&self) -> Result<(), CrtError> {
        for (&modulus, &residue) in self.moduli.iter().zip(&self.residues) {
            if &self.value % modulus != BigUint::from(residue) || self.value >= self.bound {
                return Err(CrtError::InconsistentWitness { modulus, residue });
            }
        }
        Ok(())
    }
}

impl fmt::Display for CrtWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self
            .moduli
            .iter()
            .zip(&self.residues)
            .map(|(m, r)| format!("{r} mod {m}"))
            .collect();
        write!(f, "{} = [{}]", self.value, pairs.join(", "))
    }
}

/// An exact-count query; the moduli are chosen from `n` and `length`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkQuery {
    pub source: usize,
    pub target: usize,
    pub length: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Default)]
pub struct ExactOptions<'a> {
    pub encoding: Encoding,
    pub policy: ModuliPolicy,
    /// One tape per modulus, each on its own thread.
    pub parallel_moduli: bool,
    pub fault: Fault,
    /// Engine trace; only honoured by the sequential driver.
    pub trace: Option<&'a mut dyn crate::engine::TraceSink>,
}

/// Space accounting of an exact count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactReport {
    /// Bits of one tape (the sequential driver uses exactly one).
    pub catalyst_bits: u64,
    pub peak_workspace_bits: u64,
    pub peak_stack_depth: usize,
    /// Measured bits held by control frames at the deepest point.
    pub peak_stack_bits: u64,
    pub frame_bits: u64,
    /// Program runs, forward and inverse.
    pub runs: usize,
    pub tapes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCount {
    pub value: BigUint,
    pub witness: CrtWitness,
    pub report: ExactReport,
    /// Largest `α`-difference inventory, for checking the meter.
    pub expected_peak_workspace_bits: u64,
}

struct Sweep {
    readings: Vec<Reading>,
    meter: MeterReport,
    runs: usize,
    expected_peak: u64,
}

fn sweep_moduli<R: RegisterFile>(
    mut tape: R,
    graph: &DirectedGraph,
    query: &WalkQuery,
    moduli: &[u64],
    fault: Fault,
    trace: Option<&mut dyn crate::engine::TraceSink>,
) -> Result<Sweep, RunError> {
    let mut extractor = Extractor::new(graph, query.k)?
        .with_fault(fault)
        .with_trace(trace);
    let mut meter = SpaceMeter::new(tape.catalyst_bits());
    let mut readings = Vec::with_capacity(moduli.len());
    let mut expected_peak = 0;
    for &q in moduli {
        tape.set_modulus(q)?;
        let reading = extractor.count_mod(
            &mut tape,
            query.source,
            query.target,
            query.length,
            &mut meter,
        )?;
        tape.verify_restored()
            .map_err(|divergence| RunError::NotRestored {
                modulus: q,
                divergence,
            })?;
        expected_peak = expected_peak.max(
            extractor
                .executor()
                .inventory(query.length, q)
                .driver_peak_bits(tape.encoding_workspace_bits()),
        );
        readings.push(reading);
    }
    let meter = meter.finish().map_err(EngineError::from)?;
    Ok(Sweep {
        readings,
        meter,
        runs: extractor.runs(),
        expected_peak,
    })
}

fn sweep_with_encoding(
    graph: &DirectedGraph,
    query: &WalkQuery,
    moduli: &[u64],
    tape_moduli: &[u64],
    encoding: Encoding,
    fault: Fault,
    trace: Option<&mut dyn crate::engine::TraceSink>,
) -> Result<Sweep, RunError> {
    let (blocks, regs) = program_tape_shape(graph.vertex_count(), query.length, query.k);
    let init = TapeInit::from_seed(query.seed);
    match encoding {
        Encoding::Plain => sweep_moduli(
            CatalyticTape::allocate_shared(blocks, regs, tape_moduli, init)?,
            graph,
            query,
            moduli,
            fault,
            trace,
        ),
        Encoding::Packed => sweep_moduli(
            PackedCatalyticTape::allocate_shared(blocks, regs, tape_moduli, init)?,
            graph,
            query,
            moduli,
            fault,
            trace,
        ),
    }
}

/// `N_ℓ(s, t)` exactly, from one catalytic extraction per prime.
pub fn count_walks_exact_catalytic(
    graph: &DirectedGraph,
    query: &WalkQuery,
    options: ExactOptions<'_>,
) -> Result<ExactCount, RunError> {
    validate_query(graph, query.source, query.target, query.length, query.k)?;
    let moduli = options.policy.moduli(graph.vertex_count(), query.length);

    let sweeps: Vec<Sweep> = if options.parallel_moduli {
        if options.trace.is_some() {
            log::warn!("engine trace is ignored when moduli run in parallel");
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = moduli
                .iter()
                .map(|&q| {
                    let moduli = &moduli;
                    scope.spawn(move || {
                        sweep_with_encoding(
                            graph,
                            query,
                            &[q],
                            moduli,
                            options.encoding,
                            options.fault,
                            None,
                        )
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("modulus worker panicked"))
                .collect::<Result<_, _>>()
        })?
    } else {
        vec![sweep_with_encoding(
            graph,
            query,
            &moduli,
            &moduli,
            options.encoding,
            options.fault,
            options.trace,
        )?]
    };

    let residues: Vec<u64> = sweeps
        .iter()
        .flat_map(|s| s.readings.iter().map(|r| r.residue))
        .collect();
    let witness = CrtWitness::from_residues(moduli, residues)?;
    let report = ExactReport {
        catalyst_bits: sweeps[0].meter.catalyst_bits,
        peak_workspace_bits: sweeps
            .iter()
            .map(|s| s.meter.peak_workspace_bits)
            .max()
            .unwrap_or(0),
        peak_stack_depth: sweeps
            .iter()
            .map(|s| s.meter.peak_stack_depth)
            .max()
            .unwrap_or(0),
        peak_stack_bits: sweeps
            .iter()
            .map(|s| s.meter.peak_stack_bits)
            .max()
            .unwrap_or(0),
        frame_bits: frame_bits(query.k),
        runs: sweeps.iter().map(|s| s.runs).sum(),
        tapes: sweeps.len(),
    };
    Ok(ExactCount {
        value: witness.value.clone(),
        expected_peak_workspace_bits: sweeps.iter().map(|s| s.expected_peak).max().unwrap_or(0),
        witness,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StconOutcome {
    pub reachable: bool,
    /// `N_{n-1}(s, t)` on the graph with a self-loop at `t`; absent for `n = 1`.
    pub count: Option<ExactCount>,
}

/// Directed `s`–`t` reachability: with a self-loop at `t`, `t` is reachable
/// from `s` iff some walk of length exactly `n - 1` ends there.
pub fn decide_stcon(
    graph: &DirectedGraph,
    source: usize,
    target: usize,
    k: usize,
    seed: u64,
    options: ExactOptions<'_>,
) -> Result<StconOutcome, RunError> {
    let n = graph.vertex_count();
    validate_query(graph, source, target, 1, k)?;
    if n == 1 {
        return Ok(StconOutcome {
            reachable: source == target,
            count: None,
        });
    }
    let looped = graph.add_self_loop(target)?;
    let query = WalkQuery {
        source,
        target,
        length: n - 1,
        k,
        seed,
    };
    let count = count_walks_exact_catalytic(&looped, &query, options)?;
    Ok(StconOutcome {
        reachable: !count.value.is_zero(),
        count: Some(count),
    })
}

/// `⌈log₂ q⌉` of the largest modulus.
pub fn widest_modulus_bits(moduli: &[u64]) -> u32 {
    moduli.iter().copied().max().map_or(0, ceil_log2)
}
