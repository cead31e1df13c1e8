//! Exact counting in big-integer arithmetic and the closed-form bounds that
//! accompany each count.

use std::f64::consts::{E, LN_2};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `C(n, k)`, exact.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Natural logarithm of a big integer; `-∞` for zero.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * LN_2
}

pub fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `M_{d,s} = Σ_{ℓ=0}^{s} C(d, ℓ)`, the number of subsets of `{1..d}` of
/// size at most `s`.
pub fn count_m(d: u64, s: u64) -> Result<BigUint> {
    if s > d {
        return Err(Error::Domain(format!("need s ≤ d, got s={s}, d={d}")));
    }
    Ok((0..=s).map(|l| binomial(d, l)).sum())
}

/// `(ed/s)^s`, with the `s = 0` value taken as 1.
pub fn count_m_bound(d: u64, s: u64) -> f64 {
    if s == 0 {
        1.0
    } else {
        (E * d as f64 / s as f64).powi(s as i32)
    }
}

/// `|B^d_{s,m}| = C(M_{d,s}, m)`.
pub fn count_b(d: u64, s: u64, m: u64) -> Result<BigUint> {
    let big_m = count_m(d, s)?;
    let big_m = big_m
        .to_u64()
        .ok_or_else(|| Error::Domain(format!("M_{{{d},{s}}} does not fit in 64 bits")))?;
    Ok(binomial(big_m, m))
}

/// `(e M_{d,s} / m)^m`.
pub fn count_b_middle_bound(d: u64, s: u64, m: u64) -> Result<f64> {
    let big_m = to_f64(&count_m(d, s)?);
    Ok((E * big_m / m as f64).powi(m as i32))
}

/// `(e² d / (s m^{1/s}))^{ms}`.
pub fn structure_bound(d: u64, s: u64, m: u64) -> f64 {
    let (d, s, m) = (d as f64, s as f64, m as f64);
    (E * E * d / (s * m.powf(1.0 / s))).powf(m * s)
}

/// `|B^d_{s,m} \ B^d_{s-1,m}|`: collections of `m` distinct subsets of size
/// at most `s`, at least one of size exactly `s`.
pub fn stratum_count(d: u64, s: u64, m: u64) -> Result<BigUint> {
    let upper = count_b(d, s, m)?;
    if s == 0 {
        return Ok(upper);
    }
    let lower = count_b(d, s - 1, m)?;
    Ok(upper - lower)
}

/// `|P^d_{s,m}| = C(d, ms) (ms)! / ((s!)^m m!)`.
pub fn partition_count(d: u64, s: u64, m: u64) -> Result<BigUint> {
    let ms = m * s;
    if ms > d {
        return Err(Error::Domain(format!(
            "need ms ≤ d, got m={m}, s={s}, d={d}"
        )));
    }
    let num = binomial(d, ms) * factorial(ms);
    let den = num_traits::pow(factorial(s), m as usize) * factorial(m);
    Ok(num / den)
}

/// Lower side of the partition-count sandwich:
/// `s^{-(m-1)/2} (d / (s m^{1/s}))^{ms}`.
pub fn partition_lower_bound(d: u64, s: u64, m: u64) -> f64 {
    let (d, s, m) = (d as f64, s as f64, m as f64);
    s.powf(-(m - 1.0) / 2.0) * (d / (s * m.powf(1.0 / s))).powf(m * s)
}

/// Upper side of the partition-count sandwich; equals [`structure_bound`].
pub fn partition_upper_bound(d: u64, s: u64, m: u64) -> f64 {
    structure_bound(d, s, m)
}

/// `H_d = Σ_{s=0}^{d} Σ_{m=1}^{M_{d,s}} 2^{-sm}`, summed in closed form per `s`.
pub fn h_d(d: u64) -> f64 {
    let mut total = 1.0; // s = 0: M_{d,0} = 1, one term equal to 1
    for s in 1..=d {
        let big_m = to_f64(&count_m(d, s).expect("s ≤ d"));
        let r = 0.5f64.powi(s as i32);
        // r (1 - r^M) / (1 - r)
        let tail = if big_m * s as f64 > 2000.0 {
            0.0
        } else {
            r.powf(big_m)
        };
        total += r * (1.0 - tail) / (1.0 - r);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct double sum, the independent route for `H_d`.
    fn h_d_direct(d: u64) -> f64 {
        let mut total = 0.0;
        for s in 0..=d {
            let big_m = to_f64(&count_m(d, s).unwrap()) as u64;
            for m in 1..=big_m.min(4000) {
                total += 0.5f64.powi((s * m) as i32);
            }
        }
        total
    }

    #[test]
    fn small_counts() {
        assert_eq!(count_m(5, 0).unwrap(), BigUint::one());
        assert_eq!(count_m(3, 1).unwrap(), BigUint::from(4u32));
        assert_eq!(count_m(10, 2).unwrap(), BigUint::from(56u32));
        assert!(56.0 <= count_m_bound(10, 2));
        assert!((count_m_bound(10, 2) - 184.7).abs() < 0.1);
        assert!(count_m(2, 3).is_err());
    }

    #[test]
    fn partitions_of_four_into_pairs() {
        assert_eq!(partition_count(4, 2, 2).unwrap(), BigUint::from(3u32));
        assert!((partition_lower_bound(4, 2, 2) - 2.0f64.sqrt() * 2.0).abs() < 1e-12);
        assert!((partition_upper_bound(4, 2, 2) - 11_924.0).abs() < 10.0);
        assert_eq!(partition_count(7, 3, 1).unwrap(), binomial(7, 3));
        assert!(partition_count(4, 3, 2).is_err());
    }

    #[test]
    fn h_d_values() {
        assert!((h_d(1) - 1.75).abs() < 1e-15);
        for d in 1..=12 {
            assert!((h_d(d) - h_d_direct(d)).abs() < 1e-12, "d={d}");
        }
        for d in 1..=50 {
            assert!(h_d(d) <= E);
        }
    }

    #[test]
    fn stratum_counts() {
        // d = 3, s = 1: subsets {∅,{1},{2},{3}}; pairs with at least one singleton = C(4,2) - 0
        assert_eq!(stratum_count(3, 1, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(stratum_count(3, 1, 1).unwrap(), BigUint::from(3u32));
        assert_eq!(stratum_count(3, 0, 1).unwrap(), BigUint::one());
    }

    #[test]
    fn big_logs() {
        let x = num_traits::pow(BigUint::from(10u32), 400);
        assert!((ln_big(&x) - 400.0 * 10f64.ln()).abs() < 1e-9);
        assert!((ln_big(&BigUint::from(1000u32)) - 1000f64.ln()).abs() < 1e-15);
    }
}
