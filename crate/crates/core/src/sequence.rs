//! Gaussian sequence observations `Y_j = θ_j + ε ξ_j`.

use std::io::{BufRead, Write};

use crate::coeffs::{format_real, CoefficientMap};
use crate::error::{Error, Result};
use crate::multiindex::{enumerate_indices, IndexBox, MultiIndex};
use crate::rng::{GaussianField, NoiseField};

/// Noisy coefficients on a finite, sorted index set.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceObservation {
    pub d: usize,
    pub epsilon: f64,
    pub cutoff: u32,
    pub seed: u64,
    entries: Vec<(MultiIndex, f64)>,
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "noise level must satisfy 0 < ε < 1, got {epsilon}"
        )))
    }
}

impl SequenceObservation {
    /// Wraps already-observed values. Indices are sorted and must be unique.
    pub fn from_entries(
        d: usize,
        epsilon: f64,
        cutoff: u32,
        seed: u64,
        mut entries: Vec<(MultiIndex, f64)>,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("duplicate index in observation".into()));
        }
        if entries
            .iter()
            .any(|(j, _)| j.dim() != d || j.sup_norm() > cutoff)
        {
            return Err(Error::Domain(format!(
                "observation index outside dimension {d} / cutoff {cutoff}"
            )));
        }
        Ok(SequenceObservation {
            d,
            epsilon,
            cutoff,
            seed,
            entries,
        })
    }

    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, j: &MultiIndex) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(j))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// `Y_0`, or zero if the constant index was not observed.
    pub fn y0(&self) -> f64 {
        self.get(&MultiIndex::zero(self.d)).unwrap_or(0.0)
    }

    pub fn contains(&self, j: &MultiIndex) -> bool {
        self.get(j).is_some()
    }

    pub fn as_coefficients(&self) -> CoefficientMap {
        CoefficientMap::from_pairs(self.d, self.entries.iter().cloned()).expect("dimension checked")
    }

    /// Adds `c` to `Y_0` (inserting it if absent).
    pub fn shift_constant(&mut self, c: f64) {
        let zero = MultiIndex::zero(self.d);
        match self.entries.binary_search_by(|(k, _)| k.cmp(&zero)) {
            Ok(i) => self.entries[i].1 += c,
            Err(i) => self.entries.insert(i, (zero, c)),
        }
    }

    /// Metadata line followed by the `j_1,…,j_d,y` table. Every observed
    /// index is written, including exact zeros.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# epsilon={}, cutoff={}, seed={}",
            format_real(self.epsilon),
            self.cutoff,
            self.seed
        )?;
        let header: Vec<String> = (1..=self.d).map(|i| format!("j_{i}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for (j, y) in &self.entries {
            let row: Vec<String> = j.entries().iter().map(|e| e.to_string()).collect();
            writeln!(out, "{},{}", row.join(","), format_real(*y))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing observation metadata line".into()))?;
        let (mut eps, mut cutoff, mut seed) = (None, None, None);
        for part in meta.split(',') {
            let (k, v) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata field {part:?}")))?;
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{k}={v}: {e}"));
            match k.trim() {
                "epsilon" => eps = Some(v.trim().parse::<f64>().map_err(|e| bad(&e))?),
                "cutoff" => cutoff = Some(v.trim().parse::<u32>().map_err(|e| bad(&e))?),
                "seed" => seed = Some(v.trim().parse::<u64>().map_err(|e| bad(&e))?),
                _ => {}
            }
        }
        let (Some(eps), Some(cutoff), Some(seed)) = (eps, cutoff, seed) else {
            return Err(Error::Parse(
                "metadata needs epsilon, cutoff and seed".into(),
            ));
        };
        let values = CoefficientMap::read_csv(input, "y")?;
        let entries = values.iter().map(|(j, &y)| (j.clone(), y)).collect();
        SequenceObservation::from_entries(values.dim(), eps, cutoff, seed, entries)
    }
}

/// Observes `f` on every index of `bx` with counter-based Gaussian noise.
pub fn observe(
    f: &CoefficientMap,
    epsilon: f64,
    bx: &IndexBox,
    seed: u64,
) -> Result<SequenceObservation> {
    let indices = enumerate_indices(bx)?;
    observe_on(
        f,
        epsilon,
        bx.cutoff,
        indices,
        seed,
        &GaussianField { seed },
    )
}

/// Observes `f` on an explicit index set with an arbitrary noise source.
pub fn observe_on(
    f: &CoefficientMap,
    epsilon: f64,
    cutoff: u32,
    indices: Vec<MultiIndex>,
    seed: u64,
    noise: &dyn NoiseField,
) -> Result<SequenceObservation> {
    check_epsilon(epsilon)?;
    if cutoff < 1 {
        return Err(Error::Parameter(
            "observation cutoff must be at least 1".into(),
        ));
    }
    let entries = indices
        .into_iter()
        .map(|j| {
            let y = f.get(&j) + epsilon * noise.xi(&j);
            (j, y)
        })
        .collect();
    SequenceObservation::from_entries(f.dim(), epsilon, cutoff, seed, entries)
}

/// `K(P_f, P_g) = ½ ε^{-2} ‖f − g‖₂²`.
pub fn kl_divergence(f: &CoefficientMap, g: &CoefficientMap, epsilon: f64) -> f64 {
    0.5 * f.squared_distance(g) / (epsilon * epsilon)
}
