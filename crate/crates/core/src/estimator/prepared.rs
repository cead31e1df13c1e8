use std::collections::HashMap;

use super::Candidate;
use crate::coeffs::CoefficientMap;
use crate::multiindex::{MultiIndex, Support};
use crate::sequence::SequenceObservation;

/// An observation laid out for repeated residual evaluation.
///
/// For each support `V` in a fixed pool, `cum[V][t]` holds the energy of the
/// nonzero observed coefficients with `supp(j) ⊆ V` and `|j|_∞ ≤ t`, so the
/// residual of a candidate with pairwise disjoint supports costs `O(m)`.
#[derive(Debug, Clone)]
pub struct PreparedObservation {
    d: usize,
    epsilon: f64,
    cutoff: u32,
    y0: f64,
    /// `Σ_{j ≠ 0} Y_j²`
    energy: f64,
    index: Vec<MultiIndex>,
    mask: Vec<u64>,
    norm: Vec<u32>,
    y: Vec<f64>,
    tables: Vec<(Support, Vec<f64>)>,
    lookup: HashMap<u64, usize>,
}

impl PreparedObservation {
    pub fn new(obs: &SequenceObservation, pool: &[Support]) -> Self {
        let mut index = Vec::with_capacity(obs.len());
        let mut mask = Vec::with_capacity(obs.len());
        let mut norm = Vec::with_capacity(obs.len());
        let mut y = Vec::with_capacity(obs.len());
        for (j, v) in obs.entries() {
            if j.is_zero() {
                continue;
            }
            index.push(j.clone());
            mask.push(j.support().mask());
            norm.push(j.sup_norm());
            y.push(*v);
        }
        let energy = y.iter().map(|v| v * v).sum();
        let width = obs.cutoff as usize + 1;
        let mut tables = Vec::with_capacity(pool.len());
        let mut lookup = HashMap::with_capacity(pool.len());
        for &v in pool {
            if lookup.contains_key(&v.mask()) {
                continue;
            }
            let mut cum = vec![0.0; width];
            for i in 0..y.len() {
                if mask[i] & !v.mask() == 0 {
                    cum[norm[i] as usize] += y[i] * y[i];
                }
            }
            for t in 1..width {
                cum[t] += cum[t - 1];
            }
            lookup.insert(v.mask(), tables.len());
            tables.push((v, cum));
        }
        PreparedObservation {
            d: obs.d,
            epsilon: obs.epsilon,
            cutoff: obs.cutoff,
            y0: obs.y0(),
            energy,
            index,
            mask,
            norm,
            y,
            tables,
            lookup,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn fast_path(&self, cand: &Candidate) -> bool {
        cand.supports_pairwise_disjoint()
            && cand
                .pairs()
                .all(|(v, _)| self.lookup.contains_key(&v.mask()))
    }

    fn keeps(cand: &Candidate, mask: u64, norm: u32) -> bool {
        cand.pairs()
            .any(|(v, t)| mask & !v.mask() == 0 && norm <= t)
    }

    /// `|Y − θ̂_{t,η}|²` over the observed index set.
    pub fn residual(&self, cand: &Candidate) -> f64 {
        if self.fast_path(cand) {
            let kept: f64 = cand
                .pairs()
                .map(|(v, t)| self.tables[self.lookup[&v.mask()]].1[t.min(self.cutoff) as usize])
                .sum();
            return (self.energy - kept).max(0.0);
        }
        (0..self.y.len())
            .filter(|&i| !Self::keeps(cand, self.mask[i], self.norm[i]))
            .map(|i| self.y[i] * self.y[i])
            .sum()
    }

    pub fn accumulator(&self) -> WeightAccumulator<'_> {
        WeightAccumulator {
            prep: self,
            band: vec![vec![0.0; self.cutoff as usize + 1]; self.tables.len()],
            direct: vec![0.0; self.y.len()],
        }
    }
}

/// Builds `Σ_c w_c θ̂_c` without materialising each projection estimate.
pub struct WeightAccumulator<'a> {
    prep: &'a PreparedObservation,
    band: Vec<Vec<f64>>,
    direct: Vec<f64>,
}

impl WeightAccumulator<'_> {
    pub fn add(&mut self, cand: &Candidate, w: f64) {
        if w == 0.0 {
            return;
        }
        let p = self.prep;
        if p.fast_path(cand) {
            for (v, t) in cand.pairs() {
                self.band[p.lookup[&v.mask()]][t.min(p.cutoff) as usize] += w;
            }
        } else {
            for i in 0..p.y.len() {
                if PreparedObservation::keeps(cand, p.mask[i], p.norm[i]) {
                    self.direct[i] += w;
                }
            }
        }
    }

    /// The weighted estimate; `Y_0` is kept verbatim.
    pub fn finish(self) -> CoefficientMap {
        let p = self.prep;
        // suffix sums: weight of bandwidths ≥ t
        let suffix: Vec<Vec<f64>> = self
            .band
            .iter()
            .map(|a| {
                let mut s = a.clone();
                for t in (0..s.len().saturating_sub(1)).rev() {
                    s[t] += s[t + 1];
                }
                s
            })
            .collect();
        let mut out = CoefficientMap::new(p.d);
        out.insert(MultiIndex::zero(p.d), p.y0).expect("dimension");
        for i in 0..p.y.len() {
            let mut mult = self.direct[i];
            for (k, (v, _)) in p.tables.iter().enumerate() {
                if p.mask[i] & !v.mask() == 0 {
                    mult += suffix[k][p.norm[i] as usize];
                }
            }
            if mult > 0.0 {
                out.insert(p.index[i].clone(), p.y[i] * mult.min(1.0))
                    .expect("dimension");
            }
        }
        out
    }
}
