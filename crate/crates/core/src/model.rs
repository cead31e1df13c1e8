//! Compound functions `f = f̄ + Σ_{V ∈ supp(η)} f_V`: structures, atoms,
//! Sobolev and tensor-product classes, and the norm-compatibility ratio.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::coeffs::CoefficientMap;
use crate::error::{Error, Result};
use crate::multiindex::{enumerate_indices, IndexBox, MultiIndex, Support};

/// Which collections of supports are admissible as a structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FamilyRule {
    /// Pairwise disjoint supports.
    #[default]
    Disjoint,
    /// Each support meets at most one other support.
    OverlapAtMostOne,
    Unrestricted,
}

impl FamilyRule {
    pub fn name(self) -> &'static str {
        match self {
            FamilyRule::Disjoint => "disjoint",
            FamilyRule::OverlapAtMostOne => "overlap-at-most-one",
            FamilyRule::Unrestricted => "unrestricted",
        }
    }

    /// The constant `C_*` for which the norm-compatibility inequality is
    /// claimed under this rule, if any.
    pub fn claimed_constant(self) -> Option<f64> {
        match self {
            FamilyRule::Disjoint => Some(1.0),
            FamilyRule::OverlapAtMostOne => Some(1.5),
            FamilyRule::Unrestricted => None,
        }
    }

    /// Returns a description of the first violation, if any.
    pub fn violation(self, supports: &[Support]) -> Option<String> {
        match self {
            FamilyRule::Unrestricted => None,
            FamilyRule::Disjoint => {
                for (a, &v) in supports.iter().enumerate() {
                    for &w in &supports[a + 1..] {
                        if v.intersects(w) {
                            return Some(format!("{v} and {w} overlap"));
                        }
                    }
                }
                None
            }
            FamilyRule::OverlapAtMostOne => {
                for (a, &v) in supports.iter().enumerate() {
                    let hits = supports
                        .iter()
                        .enumerate()
                        .filter(|&(b, &w)| b != a && v.intersects(w))
                        .count();
                    if hits > 1 {
                        return Some(format!("{v} meets {hits} other supports"));
                    }
                }
                None
            }
        }
    }

    pub fn admits(self, supports: &[Support]) -> bool {
        self.violation(supports).is_none()
    }
}

impl FromStr for FamilyRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disjoint" => Ok(FamilyRule::Disjoint),
            "overlap-at-most-one" | "pairwise-overlap-at-most-one" => {
                Ok(FamilyRule::OverlapAtMostOne)
            }
            "unrestricted" => Ok(FamilyRule::Unrestricted),
            other => Err(Error::Parse(format!("unknown family rule {other:?}"))),
        }
    }
}

impl fmt::Display for FamilyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The macroscopic parameter `η`, stored as its list of supports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Structure {
    d: usize,
    s: usize,
    supports: Vec<Support>,
    rule: FamilyRule,
}

impl Structure {
    /// Validates and builds a structure. Supports are stored sorted.
    pub fn new(d: usize, s: usize, supports: Vec<Support>, rule: FamilyRule) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::Domain(
                "a structure needs at least one support".into(),
            ));
        }
        let mut supports = supports;
        supports.sort();
        for &v in &supports {
            if !v.fits_dim(d) {
                return Err(Error::Domain(format!(
                    "support {v} is not contained in {{1..{d}}}"
                )));
            }
            if v.len() > s {
                return Err(Error::SupportTooLarge {
                    support: v.to_string(),
                    size: v.len(),
                    s,
                });
            }
        }
        if let Some(w) = supports.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSupport(w[0].to_string()));
        }
        if let Some(detail) = rule.violation(&supports) {
            return Err(Error::FamilyViolation {
                rule: rule.name().to_string(),
                detail,
            });
        }
        Ok(Structure {
            d,
            s,
            supports,
            rule,
        })
    }

    /// The structure `η₀` with no atoms (constant functions).
    pub fn constant(d: usize) -> Self {
        Structure {
            d,
            s: 0,
            supports: Vec::new(),
            rule: FamilyRule::Unrestricted,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The declared bound on `|V|`.
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn m(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    pub fn rule(&self) -> FamilyRule {
        self.rule
    }

    pub fn is_constant(&self) -> bool {
        self.supports.is_empty()
    }

    /// Largest support size actually present.
    pub fn max_support_size(&self) -> usize {
        self.supports.iter().map(|v| v.len()).max().unwrap_or(0)
    }

    /// One line per support, coordinates comma-separated and sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.supports {
            let coords: Vec<String> = v.coords().iter().map(|c| c.to_string()).collect();
            out.push_str(&coords.join(","));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Structure::to_text`]; `#` lines and blank lines are skipped.
    pub fn parse_text<R: BufRead>(input: R, d: usize, s: usize, rule: FamilyRule) -> Result<Self> {
        let mut supports = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let coords = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("{c:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            supports.push(Support::from_coords(&coords)?);
        }
        Structure::new(d, s, supports, rule)
    }
}

/// Sobolev form `Σ_j |j|_∞^{2β} θ_j²`.
pub fn sobolev_form(coeffs: &CoefficientMap, beta: f64) -> f64 {
    coeffs
        .iter()
        .map(|(j, &t)| (j.sup_norm() as f64).powf(2.0 * beta) * t * t)
        .sum()
}

/// The ellipsoid `W_V(β, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevBall {
    pub support: Support,
    pub beta: f64,
    pub radius: f64,
}

impl SobolevBall {
    pub fn new(support: Support, beta: f64, radius: f64) -> Result<Self> {
        if !(beta > 0.0) || !(radius > 0.0) {
            return Err(Error::Parameter(format!(
                "Sobolev ball needs beta > 0 and L > 0, got beta={beta}, L={radius}"
            )));
        }
        Ok(SobolevBall {
            support,
            beta,
            radius,
        })
    }

    /// Membership up to relative tolerance `tol`: all indices lie in
    /// `{supp(j) ⊆ V, j ≠ 0}` and the Sobolev form is at most `L`.
    pub fn contains(&self, coeffs: &CoefficientMap, tol: f64) -> bool {
        let admissible = coeffs
            .iter()
            .all(|(j, &t)| t == 0.0 || (!j.is_zero() && j.support().is_subset_of(self.support)));
        admissible && sobolev_form(coeffs, self.beta) <= self.radius * (1.0 + tol)
    }
}

/// Draws an atom in `W_V(β, L)` with Sobolev form exactly `fill · L`.
///
/// Proto-coefficients are i.i.d. standard normal on
/// `{ j ≠ 0 : supp(j) ⊆ V, |j|_∞ ≤ cutoff }` and are then rescaled.
/// `fill = 1` puts the atom on the boundary of the ellipsoid.
pub fn sample_sobolev_atom<R: Rng + ?Sized>(
    ball: &SobolevBall,
    d: usize,
    cutoff: u32,
    fill: f64,
    rng: &mut R,
) -> Result<CoefficientMap> {
    if cutoff < 1 {
        return Err(Error::Parameter("atom cutoff must be at least 1".into()));
    }
    if !(fill > 0.0 && fill <= 1.0) {
        return Err(Error::Parameter(format!(
            "fill ratio {fill} outside (0, 1]"
        )));
    }
    let indices: Vec<MultiIndex> =
        enumerate_indices(&IndexBox::new(d, cutoff, Some(ball.support)))?
            .into_iter()
            .filter(|j| !j.is_zero())
            .collect();
    let mut out = CoefficientMap::new(d);
    if indices.is_empty() {
        return Ok(out);
    }
    let proto: Vec<f64> = indices.iter().map(|_| rng.sample(StandardNormal)).collect();
    let form: f64 = indices
        .iter()
        .zip(&proto)
        .map(|(j, t)| (j.sup_norm() as f64).powf(2.0 * ball.beta) * t * t)
        .sum();
    let scale = (fill * ball.radius / form).sqrt();
    for (j, t) in indices.into_iter().zip(proto) {
        out.insert(j, t * scale)?;
    }
    Ok(out)
}

/// One component `f_V` of a compound function.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub support: Support,
    pub coeffs: CoefficientMap,
}

impl Atom {
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.sum_squares()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundFunction {
    pub d: usize,
    pub mean: f64,
    pub atoms: Vec<Atom>,
    /// `(β, L)` certificate, if the atoms were built for a Sobolev class.
    pub smoothness: Option<(f64, f64)>,
}

impl CompoundFunction {
    /// Coefficients of `f`: `θ_0 = f̄` plus the coefficientwise sum of atoms.
    pub fn flatten(&self) -> CoefficientMap {
        let mut out = CoefficientMap::new(self.d);
        if self.mean != 0.0 {
            out.insert(MultiIndex::zero(self.d), self.mean)
                .expect("dimension checked");
        }
        for atom in &self.atoms {
            for (j, &v) in &atom.coeffs {
                out.add(j.clone(), v).expect("dimension checked");
            }
        }
        out
    }

    /// `‖Σ f_V‖² / Σ ‖f_V‖²`.
    pub fn compatibility_ratio(&self) -> Result<f64> {
        verify_condition_3a(&self.atoms)
    }

    /// Sobolev form of each atom for the given `β`.
    pub fn sobolev_certificates(&self, beta: f64) -> Vec<(Support, f64)> {
        self.atoms
            .iter()
            .map(|a| (a.support, sobolev_form(&a.coeffs, beta)))
            .collect()
    }
}

/// Combines a mean and one atom per support of `structure`.
pub fn compose(
    mean: f64,
    structure: &Structure,
    atoms: Vec<(Support, CoefficientMap)>,
) -> Result<CompoundFunction> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(atoms.len());
    for (v, coeffs) in atoms {
        if !structure.supports().contains(&v) {
            return Err(Error::AtomMismatch(v.to_string()));
        }
        if !seen.insert(v) {
            return Err(Error::DuplicateSupport(v.to_string()));
        }
        if coeffs.dim() != structure.d() {
            return Err(Error::Domain(format!(
                "atom on {v} has dimension {}, structure has {}",
                coeffs.dim(),
                structure.d()
            )));
        }
        for (j, &t) in &coeffs {
            if t == 0.0 {
                continue;
            }
            if j.is_zero() {
                return Err(Error::ClassViolation {
                    index: j.to_string(),
                    reason: "atoms must have zero mean".into(),
                });
            }
            if !j.support().is_subset_of(v) {
                return Err(Error::ClassViolation {
                    index: j.to_string(),
                    reason: format!("support not contained in {v}"),
                });
            }
        }
        out.push(Atom { support: v, coeffs });
    }
    if let Some(missing) = structure.supports().iter().find(|v| !seen.contains(v)) {
        return Err(Error::AtomMismatch(format!("{missing} (no atom supplied)")));
    }
    Ok(CompoundFunction {
        d: structure.d(),
        mean,
        atoms: out,
        smoothness: None,
    })
}

/// Ratio `‖Σ_V f_V‖₂² / Σ_V ‖f_V‖₂²` realized by a list of atoms.
pub fn verify_condition_3a(atoms: &[Atom]) -> Result<f64> {
    let denom: f64 = atoms.iter().map(Atom::norm_sq).sum();
    if !(denom > 0.0) {
        return Err(Error::Domain("ratio undefined: all atoms are zero".into()));
    }
    let d = atoms[0].coeffs.dim();
    let mut sum = CoefficientMap::new(d);
    for a in atoms {
        for (j, &v) in &a.coeffs {
            sum.add(j.clone(), v)?;
        }
    }
    Ok(sum.sum_squares() / denom)
}

/// The parametric class `T(A)`: indices with entries drawn from `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorClass {
    values: BTreeSet<i32>,
}

impl TensorClass {
    pub fn new(values: impl IntoIterator<Item = i32>) -> Result<Self> {
        let values: BTreeSet<i32> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::Parameter(
                "tensor class needs a nonempty value set".into(),
            ));
        }
        Ok(TensorClass { values })
    }

    pub fn values(&self) -> &BTreeSet<i32> {
        &self.values
    }

    /// `k = max{|a| : a ∈ A}`.
    pub fn k(&self) -> u32 {
        self.values
            .iter()
            .map(|a| a.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn admits(&self, j: &MultiIndex, support: Support) -> bool {
        j.entries().iter().all(|a| self.values.contains(a)) && j.support().is_subset_of(support)
    }

    /// `J_{V,A} \ {0}` in lexicographic order.
    pub fn admissible_indices(&self, d: usize, support: Support) -> Result<Vec<MultiIndex>> {
        let bx = IndexBox::new(d, self.k(), Some(support));
        Ok(enumerate_indices(&bx)?
            .into_iter()
            .filter(|j| !j.is_zero() && self.admits(j, support))
            .collect())
    }
}

/// Builds an atom of the tensor-product class, rejecting indices outside
/// `J_{V,A} \ {0}`.
pub fn make_tensor_atom(
    d: usize,
    support: Support,
    class: &TensorClass,
    coefficients: impl IntoIterator<Item = (MultiIndex, f64)>,
) -> Result<CoefficientMap> {
    let mut out = CoefficientMap::new(d);
    for (j, v) in coefficients {
        if j.dim() != d {
            return Err(Error::Domain(format!("index {j} has wrong dimension")));
        }
        if j.is_zero() {
            return Err(Error::ClassViolation {
                index: j.to_string(),
                reason: "zero index is not an atom coefficient".into(),
            });
        }
        if !class.admits(&j, support) {
            return Err(Error::ClassViolation {
                index: j.to_string(),
                reason: format!(
                    "entries must lie in {:?} with support inside {support}",
                    class.values
                ),
            });
        }
        out.insert(j, v)?;
    }
    Ok(out)
}

/// A compound function with one Sobolev atom per support of `structure`,
/// each drawn by [`sample_sobolev_atom`] from a single seeded stream.
pub fn sample_sobolev_model(
    structure: &Structure,
    beta: f64,
    radius: f64,
    cutoff: u32,
    fill: f64,
    mean: f64,
    seed: u64,
) -> Result<CompoundFunction> {
    let mut rng = crate::rng::chacha(seed);
    let mut atoms = Vec::with_capacity(structure.m());
    for &v in structure.supports() {
        let ball = SobolevBall::new(v, beta, radius)?;
        atoms.push((
            v,
            sample_sobolev_atom(&ball, structure.d(), cutoff, fill, &mut rng)?,
        ));
    }
    let mut f = compose(mean, structure, atoms)?;
    f.smoothness = Some((beta, radius));
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chacha;
    use proptest::prelude::*;

    fn s(c: &[usize]) -> Support {
        Support::from_coords(c).unwrap()
    }

    fn mi(e: &[i32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn structure_validation() {
        let st = Structure::new(4, 2, vec![s(&[3, 4]), s(&[1, 2])], FamilyRule::Disjoint).unwrap();
        assert_eq!(st.m(), 2);
        assert_eq!(st.supports()[0], s(&[1, 2]));

        let e = Structure::new(4, 1, vec![s(&[1, 2])], FamilyRule::Disjoint).unwrap_err();
        assert!(matches!(e, Error::SupportTooLarge { size: 2, s: 1, .. }));

        let e = Structure::new(3, 2, vec![s(&[1]), s(&[1, 2])], FamilyRule::Disjoint).unwrap_err();
        assert!(matches!(e, Error::FamilyViolation { .. }));

        let e = Structure::new(3, 2, vec![s(&[1]), s(&[1])], FamilyRule::Unrestricted).unwrap_err();
        assert!(matches!(e, Error::DuplicateSupport(_)));

        assert!(Structure::new(3, 2, vec![s(&[4])], FamilyRule::Disjoint).is_err());
        assert!(Structure::new(3, 2, vec![], FamilyRule::Disjoint).is_err());
    }

    #[test]
    fn overlap_at_most_one_rule() {
        let ok = [s(&[1, 2]), s(&[2, 3]), s(&[4, 5])];
        assert!(FamilyRule::OverlapAtMostOne.admits(&ok));
        let chain = [s(&[1, 2]), s(&[2, 3]), s(&[3, 4])];
        assert!(!FamilyRule::OverlapAtMostOne.admits(&chain));
    }

    #[test]
    fn structure_text_round_trip() {
        let st = Structure::new(5, 2, vec![s(&[2, 5]), s(&[1])], FamilyRule::Disjoint).unwrap();
        assert_eq!(st.to_text(), "1\n2,5\n");
        let back =
            Structure::parse_text(st.to_text().as_bytes(), 5, 2, FamilyRule::Disjoint).unwrap();
        assert_eq!(back, st);
    }

    #[test]
    fn sobolev_sampling() {
        let mut rng = chacha(1);
        let empty = SobolevBall::new(Support::EMPTY, 1.0, 1.0).unwrap();
        assert!(sample_sobolev_atom(&empty, 2, 3, 1.0, &mut rng)
            .unwrap()
            .is_empty());

        let ball = SobolevBall::new(s(&[1]), 1.0, 1.0).unwrap();
        let atom = sample_sobolev_atom(&ball, 2, 2, 1.0, &mut rng).unwrap();
        assert_eq!(atom.len(), 4);
        assert!((sobolev_form(&atom, 1.0) - 1.0).abs() < 1e-12);
        assert!(atom
            .iter()
            .all(|(j, _)| !j.is_zero() && j.support().is_subset_of(s(&[1]))));

        let ball = SobolevBall::new(s(&[1, 2]), 2.0, 0.5).unwrap();
        let a = sample_sobolev_atom(&ball, 2, 3, 1.0, &mut chacha(9)).unwrap();
        let b = sample_sobolev_atom(&ball, 2, 3, 1.0, &mut chacha(9)).unwrap();
        assert_eq!(a, b);
        assert!(ball.contains(&a, 1e-12));

        let half = sample_sobolev_atom(&ball, 2, 3, 0.25, &mut chacha(9)).unwrap();
        assert!((sobolev_form(&half, 2.0) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn compose_examples() {
        let st = Structure::new(2, 1, vec![s(&[1])], FamilyRule::Disjoint).unwrap();
        let atom = CoefficientMap::from_pairs(2, [(mi(&[1, 0]), 0.3)]).unwrap();
        let f = compose(1.0, &st, vec![(s(&[1]), atom)]).unwrap();
        let flat = f.flatten();
        assert_eq!(flat.len(), 2);
        assert_eq!(flat.get(&mi(&[0, 0])), 1.0);
        assert_eq!(flat.get(&mi(&[1, 0])), 0.3);

        // overlapping supports add coefficientwise
        let st = Structure::new(2, 2, vec![s(&[1]), s(&[1, 2])], FamilyRule::Unrestricted).unwrap();
        let a = CoefficientMap::from_pairs(2, [(mi(&[1, 0]), 0.25)]).unwrap();
        let b = CoefficientMap::from_pairs(2, [(mi(&[1, 0]), 0.5), (mi(&[1, 1]), 1.0)]).unwrap();
        let f = compose(0.0, &st, vec![(s(&[1]), a), (s(&[1, 2]), b)]).unwrap();
        assert_eq!(f.flatten().get(&mi(&[1, 0])), 0.75);
    }

    #[test]
    fn compose_rejects_mismatches() {
        let st = Structure::new(2, 1, vec![s(&[1])], FamilyRule::Disjoint).unwrap();
        let atom = CoefficientMap::from_pairs(2, [(mi(&[0, 1]), 0.3)]).unwrap();
        assert!(matches!(
            compose(0.0, &st, vec![(s(&[2]), atom.clone())]),
            Err(Error::AtomMismatch(_))
        ));
        assert!(matches!(
            compose(0.0, &st, vec![(s(&[1]), atom)]),
            Err(Error::ClassViolation { .. })
        ));
        let zero = CoefficientMap::from_pairs(2, [(mi(&[0, 0]), 0.3)]).unwrap();
        assert!(compose(0.0, &st, vec![(s(&[1]), zero)]).is_err());
        assert!(matches!(
            compose(0.0, &st, vec![]),
            Err(Error::AtomMismatch(_))
        ));
    }

    #[test]
    fn compatibility_ratio_examples() {
        let a = Atom {
            support: s(&[1]),
            coeffs: CoefficientMap::from_pairs(2, [(mi(&[1, 0]), 0.3), (mi(&[-2, 0]), 0.1)])
                .unwrap(),
        };
        assert!((verify_condition_3a(std::slice::from_ref(&a)).unwrap() - 1.0).abs() < 1e-15);
        let twin = Atom {
            support: s(&[1, 2]),
            ..a.clone()
        };
        assert!((verify_condition_3a(&[a.clone(), twin]).unwrap() - 2.0).abs() < 1e-12);
        let b = Atom {
            support: s(&[2]),
            coeffs: CoefficientMap::from_pairs(2, [(mi(&[0, 3]), -0.7)]).unwrap(),
        };
        assert!((verify_condition_3a(&[a, b]).unwrap() - 1.0).abs() < 1e-12);
        let z = Atom {
            support: s(&[1]),
            coeffs: CoefficientMap::new(2),
        };
        assert!(verify_condition_3a(&[z]).is_err());
    }

    #[test]
    fn tensor_class_enumeration() {
        let binary = TensorClass::new([0, 1]).unwrap();
        assert_eq!(
            binary.admissible_indices(2, s(&[1, 2])).unwrap(),
            vec![mi(&[0, 1]), mi(&[1, 0]), mi(&[1, 1])]
        );
        let ternary = TensorClass::new([-1, 0, 1]).unwrap();
        assert_eq!(ternary.admissible_indices(2, s(&[1])).unwrap().len(), 2);

        let ok = make_tensor_atom(2, s(&[1, 2]), &binary, [(mi(&[1, 1]), 0.5)]).unwrap();
        assert_eq!(ok.len(), 1);
        let err = make_tensor_atom(2, s(&[1, 2]), &binary, [(mi(&[2, 0]), 0.5)]).unwrap_err();
        assert!(matches!(err, Error::ClassViolation { .. }));
    }

    fn random_structure(rule: FamilyRule, seed: u64) -> Option<Structure> {
        use rand::Rng;
        let mut rng = chacha(seed);
        let d = rng.random_range(2..=6usize);
        let s_max = rng.random_range(1..=3usize.min(d));
        let m = rng.random_range(1..=4usize);
        let mut supports = Vec::new();
        for _ in 0..50 {
            if supports.len() == m {
                break;
            }
            let size = rng.random_range(1..=s_max);
            let mut coords: Vec<usize> = (1..=d).collect();
            use rand::seq::SliceRandom;
            coords.shuffle(&mut rng);
            let v = Support::from_coords(&coords[..size]).unwrap();
            let mut trial = supports.clone();
            trial.push(v);
            if !supports.contains(&v) && rule.admits(&trial) {
                supports = trial;
            }
        }
        Structure::new(d, s_max, supports, rule).ok()
    }

    fn random_atoms(st: &Structure, seed: u64) -> Vec<Atom> {
        let mut rng = chacha(seed);
        st.supports()
            .iter()
            .map(|&v| {
                let ball = SobolevBall::new(v, 1.0, 1.0).unwrap();
                Atom {
                    support: v,
                    coeffs: sample_sobolev_atom(&ball, st.d(), 2, 1.0, &mut rng).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn overlap_rule_ratio_stays_below_three_halves_for_random_atoms() {
        let mut checked = 0;
        let mut seed = 0;
        while checked < 100 {
            seed += 1;
            let Some(st) = random_structure(FamilyRule::OverlapAtMostOne, seed) else {
                continue;
            };
            let atoms = random_atoms(&st, seed + 10_000);
            let r = verify_condition_3a(&atoms).unwrap();
            assert!(r <= 1.5, "seed {seed}: ratio {r}");
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn disjoint_ratio_is_one_and_split_recovers_norms(seed in 0u64..10_000) {
            if let Some(st) = random_structure(FamilyRule::Disjoint, seed) {
                let atoms = random_atoms(&st, seed);
                let norms: Vec<f64> = atoms.iter().map(Atom::norm_sq).collect();
                let f = compose(0.5, &st, atoms.iter().map(|a| (a.support, a.coeffs.clone())).collect()).unwrap();
                prop_assert!((f.compatibility_ratio().unwrap() - 1.0).abs() < 1e-12);
                let flat = f.flatten();
                for (&v, &n) in st.supports().iter().zip(&norms) {
                    let mut part = flat.clone();
                    part.retain(|j, _| !j.is_zero() && j.support().is_subset_of(v));
                    prop_assert!((part.sum_squares() - n).abs() <= 1e-12 * n.max(1.0));
                }
            }
        }

        #[test]
        fn sobolev_membership_ignores_signs(seed in 0u64..1000, flips in proptest::collection::vec(any::<bool>(), 24)) {
            let ball = SobolevBall::new(s(&[1, 2]), 1.5, 2.0).unwrap();
            let atom = sample_sobolev_atom(&ball, 2, 2, 1.0, &mut chacha(seed)).unwrap();
            let flipped = CoefficientMap::from_pairs(
                2,
                atom.iter().zip(flips.iter().cycle()).map(|((j, &t), &f)| (j.clone(), if f { -t } else { t })),
            ).unwrap();
            prop_assert_eq!(sobolev_form(&atom, 1.5), sobolev_form(&flipped, 1.5));
            prop_assert!(ball.contains(&flipped, 1e-12));
        }
    }
}
