//! Word-size integer helpers shared by the tape, the engine and the CRT layer.

/// Number of bits needed to hold every value in `0..=max`. `bits_for(0) == 0`.
pub fn bits_for(max: u64) -> u32 {
    u64::BITS - max.leading_zeros()
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 of zero");
    bits_for(x - 1)
}

/// Primality by trial division.
pub fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= x {
        if x.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) == 1`.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quotient = old_r / r;
        (old_r, r) = (r, old_r - quotient * r);
        (old_s, s) = (s, old_s - quotient * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_widths() {
        assert_eq!(bits_for(0), 0);
        assert_eq!(bits_for(1), 1);
        assert_eq!(bits_for(4), 3);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
    }

    #[test]
    fn ceil_log2_matches_float() {
        for x in 1u64..5000 {
            assert_eq!(ceil_log2(x), (x as f64).log2().ceil() as u32, "x = {x}");
        }
    }

    #[test]
    fn primes_by_trial_division() {
        let primes: Vec<u64> = (0..30).filter(|&x| is_prime(x)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn inverses() {
        assert_eq!(mod_inverse(3, 7), Some(5));
        assert_eq!(mod_inverse(2, 4), None);
        for m in [5u64, 7, 11, 13] {
            for a in 1..m {
                assert_eq!(a * mod_inverse(a, m).unwrap() % m, 1);
            }
        }
    }
}
