use std::f64::consts::LN_2;

use rayon::prelude::*;

use super::codes::{varshamov_gilbert, HypercubeCode};
use super::packing::{PackingSet, Partition};
use crate::coeffs::CoefficientMap;
use crate::error::{Error, Result};
use crate::estimator::int_part;
use crate::model::{compose, sobolev_form, CompoundFunction, FamilyRule, Structure};
use crate::multiindex::{enumerate_indices, IndexBox, MultiIndex, Support};

/// `f_ω = γ Σ_{k ∈ I} ω_k φ_k(x_1, …, x_s)` for every word `ω` of a greedy
/// code on `I = {k ∈ Z^s : |k|_∞ ≤ t}`.
#[derive(Debug, Clone)]
pub struct SignFamily {
    pub gamma: f64,
    pub t: u32,
    pub s: usize,
    pub beta: f64,
    pub d: usize,
    /// `I`, embedded in `Z^d` on the first `s` coordinates.
    pub indices: Vec<MultiIndex>,
    pub code: HypercubeCode,
    pub members: Vec<CompoundFunction>,
}

/// The recommended `(t, γ)`: `t = [4 ε^{-2/(2β+s)}]` and
/// `γ^{-2} = (2t+1)^{2β+s} + 64 ε^{-2} / log 2`.
pub fn sign_family_recommended(epsilon: f64, beta: f64, s: usize) -> (u32, f64) {
    let e = 2.0 * beta + s as f64;
    let t = int_part(4.0 * epsilon.powf(-2.0 / e)) as u32;
    let inv = (2.0 * t as f64 + 1.0).powf(e) + 64.0 / (epsilon * epsilon * LN_2);
    (t, inv.powf(-0.5))
}

pub fn sign_family(gamma: f64, t: u32, s: usize, beta: f64, d: usize) -> Result<SignFamily> {
    if t < 4 {
        return Err(Error::Parameter(format!("need t ≥ 4, got {t}")));
    }
    if s == 0 || s > d {
        return Err(Error::Parameter(format!(
            "need 1 ≤ s ≤ d, got s={s}, d={d}"
        )));
    }
    let lhs = gamma * gamma * (2.0 * t as f64 + 1.0).powf(2.0 * beta + s as f64);
    if !(gamma > 0.0) || lhs > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!(
            "membership condition γ²(2t+1)^(2β+s) ≤ 1 violated: {lhs}"
        )));
    }
    let v = Support::prefix(s);
    let indices = enumerate_indices(&IndexBox::new(d, t, Some(v)))?;
    let code = varshamov_gilbert(indices.len() as u32)?;
    let structure = Structure::new(d, s, vec![v], FamilyRule::Disjoint)?;
    let mut members = Vec::with_capacity(code.len());
    for k in 0..code.len() {
        let bits = code.bits(k);
        let mut mean = 0.0;
        let mut atom = CoefficientMap::new(d);
        for (j, &b) in indices.iter().zip(&bits) {
            if b == 1 {
                if j.is_zero() {
                    mean = gamma;
                } else {
                    atom.insert(j.clone(), gamma)?;
                }
            }
        }
        let mut f = compose(mean, &structure, vec![(v, atom)])?;
        f.smoothness = Some((beta, 1.0));
        members.push(f);
    }
    Ok(SignFamily {
        gamma,
        t,
        s,
        beta,
        d,
        indices,
        code,
        members,
    })
}

impl SignFamily {
    /// Largest `|‖f_ω − f_ω'‖² − γ² Hamming(ω, ω')|` over all pairs.
    pub fn distance_law_error(&self) -> f64 {
        let dense: Vec<Vec<f64>> = self
            .members
            .iter()
            .map(|f| {
                let flat = f.flatten();
                self.indices.iter().map(|j| flat.get(j)).collect()
            })
            .collect();
        let g2 = self.gamma * self.gamma;
        (0..dense.len())
            .into_par_iter()
            .map(|a| {
                let mut worst: f64 = 0.0;
                for b in a..dense.len() {
                    let d2: f64 = dense[a]
                        .iter()
                        .zip(&dense[b])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    let h = super::codes::hamming(self.code.words[a], self.code.words[b]) as f64;
                    worst = worst.max((d2 - g2 * h).abs());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest Sobolev form over members; membership in `W(β, 1)` needs `≤ 1`.
    pub fn max_sobolev_form(&self) -> f64 {
        self.members
            .iter()
            .map(|f| sobolev_form(&f.flatten(), self.beta))
            .fold(0.0, f64::max)
    }

    /// `(1/|Ω|) Σ_ω K(P_{f_ω}, P_0)` and `log|Ω| / 16`.
    pub fn kl_budget(&self, epsilon: f64) -> (f64, f64) {
        let mean_kl = self
            .members
            .iter()
            .map(|f| {
                crate::sequence::kl_divergence(&f.flatten(), &CoefficientMap::new(self.d), epsilon)
            })
            .sum::<f64>()
            / self.members.len() as f64;
        (mean_kl, (self.members.len() as f64).ln() / 16.0)
    }
}

/// `τ = ¼ min(ε √(ms log 2 + log K), √L)`.
pub fn block_family_tau(epsilon: f64, m: usize, s: usize, k: usize, radius: f64) -> f64 {
    0.25 * (epsilon * ((m * s) as f64 * LN_2 + (k as f64).ln()).sqrt()).min(radius.sqrt())
}

/// `f_{k,ω} = (τ/√m) Σ_{V ∈ π^{(k)}} Π_{j ∈ V} φ_{ω_j}(x_j)` over a packing.
#[derive(Debug, Clone)]
pub struct BlockFamily {
    pub tau: f64,
    pub partitions: Vec<Partition>,
}

impl BlockFamily {
    pub fn new(tau: f64, packing: &PackingSet) -> Result<Self> {
        if packing.elements.is_empty() {
            return Err(Error::Domain("empty packing".into()));
        }
        Ok(BlockFamily {
            tau,
            partitions: packing.elements.clone(),
        })
    }

    pub fn m(&self) -> usize {
        self.partitions[0].m()
    }

    pub fn s(&self) -> usize {
        self.partitions[0].s()
    }

    /// `ω` is indexed by block position (canonical order) then coordinate
    /// position inside the block.
    pub fn member(&self, k: usize, omega: &[i8]) -> Result<CompoundFunction> {
        let p = self
            .partitions
            .get(k)
            .ok_or_else(|| Error::Domain(format!("partition index {k} out of range")))?;
        let (m, s, d) = (p.m(), p.s(), p.d());
        if omega.len() != m * s || omega.iter().any(|&w| w != 1 && w != -1) {
            return Err(Error::Domain(format!(
                "ω must be a ±1 vector of length {}",
                m * s
            )));
        }
        let c = self.tau / (m as f64).sqrt();
        let mut atoms = Vec::with_capacity(m);
        for (l, &v) in p.blocks().iter().enumerate() {
            let mut e = vec![0i32; d];
            for (i, coord) in v.coords().into_iter().enumerate() {
                e[coord - 1] = omega[l * s + i] as i32;
            }
            atoms.push((v, CoefficientMap::from_pairs(d, [(MultiIndex::new(e), c)])?));
        }
        let st = Structure::new(d, s, p.blocks().to_vec(), FamilyRule::Disjoint)?;
        compose(0.0, &st, atoms)
    }

    /// `2τ² (1 − a/m)`, `a` counting blocks shared with the same sign pattern.
    pub fn predicted_distance_sq(&self, k: usize, omega: &[i8], k2: usize, omega2: &[i8]) -> f64 {
        let (p, q) = (&self.partitions[k], &self.partitions[k2]);
        let s = self.s();
        let signs = |part: &Partition, om: &[i8], v: Support| -> Option<Vec<i8>> {
            part.blocks()
                .iter()
                .position(|&b| b == v)
                .map(|l| om[l * s..(l + 1) * s].to_vec())
        };
        let shared = p
            .blocks()
            .iter()
            .filter(|&&v| signs(p, omega, v).is_some() && signs(p, omega, v) == signs(q, omega2, v))
            .count();
        2.0 * self.tau * self.tau * (1.0 - shared as f64 / self.m() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::packing::{greedy_packing, rho, PARTITION_CEILING};
    use crate::model::SobolevBall;
    use crate::sequence::kl_divergence;
    use rand::Rng;

    #[test]
    fn sign_family_norms_and_distances() {
        let (t, s, beta) = (4, 1, 1.0);
        let gamma = (2.0 * t as f64 + 1.0f64).powf(-(2.0 * beta + s as f64) / 2.0);
        let fam = sign_family(gamma, t, s, beta, 3).unwrap();
        assert_eq!(fam.indices.len(), 9);
        assert!(fam.members.len() >= 3);
        assert!(fam.distance_law_error() < 1e-12);
        assert!(fam.max_sobolev_form() <= 1.0 + 1e-12);
        for (k, f) in fam.members.iter().enumerate() {
            let ones = fam.code.words[k].count_ones() as f64;
            assert!((f.flatten().sum_squares() - gamma * gamma * ones).abs() < 1e-12);
        }
        assert_eq!(fam.members[0].flatten().sum_squares(), 0.0);
    }

    #[test]
    fn sign_family_preconditions() {
        assert!(sign_family(0.001, 3, 1, 1.0, 2).is_err());
        assert!(matches!(
            sign_family(1.0, 4, 1, 1.0, 2),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn recommended_gamma_meets_the_budget() {
        let (t, g) = sign_family_recommended(0.5, 1.0, 1);
        assert_eq!(t, 6);
        let fam = sign_family(g, t, 1, 1.0, 2).unwrap();
        let (lhs, rhs) = fam.kl_budget(0.5);
        assert!(lhs <= rhs, "{lhs} > {rhs}");
    }

    #[test]
    fn block_family_identities() {
        let pk = greedy_packing(6, 2, 2, 0.5, PARTITION_CEILING).unwrap();
        let eps = 0.3;
        let tau = block_family_tau(eps, 2, 2, pk.elements.len(), 1.0);
        let fam = BlockFamily::new(tau, &pk).unwrap();
        let ones = vec![1i8; 4];
        let mut rng = crate::rng::chacha(8);
        for k in 0..pk.elements.len() {
            let f = fam.member(k, &ones).unwrap().flatten();
            let kl = kl_divergence(&f, &CoefficientMap::new(6), eps);
            assert!((kl - tau * tau / (2.0 * eps * eps)).abs() < 1e-12);
            for k2 in 0..pk.elements.len() {
                let g = fam.member(k2, &ones).unwrap().flatten();
                let r = rho(&pk.elements[k], &pk.elements[k2]).unwrap();
                assert!((f.squared_distance(&g) - 2.0 * tau * tau * r).abs() < 1e-12);
                let w: Vec<i8> = (0..4)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect();
                let h = fam.member(k2, &w).unwrap().flatten();
                let got = f.squared_distance(&h);
                assert!((got - fam.predicted_distance_sq(k, &ones, k2, &w)).abs() < 1e-12);
                assert!(got >= 2.0 * tau * tau * r - 1e-12);
            }
        }
    }

    #[test]
    fn block_family_members_in_the_ball() {
        let pk = greedy_packing(6, 3, 2, 1.0, PARTITION_CEILING).unwrap();
        let radius = 0.5;
        let tau = block_family_tau(0.9, 2, 3, pk.elements.len(), radius);
        assert!(tau <= radius.sqrt());
        let fam = BlockFamily::new(tau, &pk).unwrap();
        let f = fam.member(0, &[1, -1, 1, 1, 1, -1]).unwrap();
        for a in &f.atoms {
            assert!(SobolevBall::new(a.support, 2.0, radius)
                .unwrap()
                .contains(&a.coeffs, 1e-12));
        }
        assert!(fam.member(0, &[1, 0, 1, 1, 1, 1]).is_err());
    }
}
