use std::f64::consts::LN_2;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::bandwidth::int_part;
use super::Candidate;
use crate::bounds::combinatorics::{binomial, count_m, h_d, ln_big};

/// Prior weights over candidates:
///
/// `π_{t,η} = 2^{-sm} / (H_d G^m |B^d_{s,m} \ B^d_{s-1,m}|)` with
/// `G = 1 + [ε^{-2}]` (or `1 + cutoff` when the cutoff is smaller), and
/// `π = 1/H_d` for the constant candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub d: usize,
    /// Number of admissible bandwidth values per support.
    pub grid_size: u64,
    /// True when the user cutoff replaced `[ε^{-2}]` in `grid_size`.
    pub cutoff_substituted: bool,
    ln_h: f64,
}

impl PriorSpec {
    pub fn new(d: usize, grid_size: u64) -> Self {
        PriorSpec {
            d,
            grid_size,
            cutoff_substituted: false,
            ln_h: h_d(d as u64).ln(),
        }
    }

    /// `G = 1 + min([ε^{-2}], cutoff)`.
    pub fn from_epsilon(d: usize, epsilon: f64, cutoff: u32) -> Self {
        let natural = int_part(1.0 / (epsilon * epsilon));
        let used = natural.min(cutoff as u64);
        PriorSpec {
            cutoff_substituted: used < natural,
            ..PriorSpec::new(d, used + 1)
        }
    }

    pub fn h_d(&self) -> f64 {
        self.ln_h.exp()
    }

    /// `ln |B^d_{s,m} \ B^d_{s-1,m}|`.
    pub fn ln_stratum(&self, s: usize, m: usize) -> f64 {
        let d = self.d as u64;
        let (s, m) = (s as u64, m as u64);
        let upper = count_m(d, s).expect("s ≤ d");
        let lower = if s == 0 {
            BigUint::ZERO
        } else {
            count_m(d, s - 1).expect("s ≤ d")
        };
        match (upper.to_u64(), lower.to_u64()) {
            (Some(u), Some(l)) if m <= 64 => ln_big(&(binomial(u, m) - binomial(l, m))),
            _ => {
                // Too large for exact products: ln C(n, m) through ln Γ.
                let lc = |n: f64| {
                    statrs::function::gamma::ln_gamma(n + 1.0)
                        - statrs::function::gamma::ln_gamma(m as f64 + 1.0)
                        - statrs::function::gamma::ln_gamma(n - m as f64 + 1.0)
                };
                let (u, l) = (
                    upper.to_f64().unwrap_or(f64::MAX),
                    lower.to_f64().unwrap_or(f64::MAX),
                );
                let lu = lc(u);
                if (m as f64) > l {
                    lu
                } else {
                    lu + (-(lc(l) - lu).exp()).ln_1p()
                }
            }
        }
    }

    /// `ln π_{t,η}`.
    pub fn log_prior(&self, cand: &Candidate) -> f64 {
        let m = cand.m();
        let s = cand.s_max();
        if m == 0 || s == 0 {
            // only the constant structure lives in stratum s = 0
            return if m <= 1 {
                -self.ln_h
            } else {
                f64::NEG_INFINITY
            };
        }
        -((s * m) as f64) * LN_2
            - self.ln_h
            - m as f64 * (self.grid_size as f64).ln()
            - self.ln_stratum(s, m)
    }
}
