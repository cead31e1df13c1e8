use super::Candidate;
use crate::error::{Error, Result};
use crate::model::Structure;
use crate::sequence::check_epsilon;

/// Integer part `[x]` for `x ≥ 0`, tolerant to representation error just
/// below an integer (`1/(0.1·0.1)` evaluates to `99.99999999999999`).
pub fn int_part(x: f64) -> u64 {
    if !(x > 0.0) {
        return 0;
    }
    (x + 1e-9 * x.max(1.0)).floor() as u64
}

/// `t_V = [(L / (3^{|V|} ε²))^{1/(2β+|V|)} ∧ ε^{-2}]`, clamped to `cutoff`.
pub fn oracle_bandwidth(
    beta: f64,
    radius: f64,
    epsilon: f64,
    atom_size: usize,
    cutoff: u32,
) -> Result<u32> {
    check_epsilon(epsilon)?;
    if !(beta > 0.0) || !(radius > 0.0) {
        return Err(Error::Parameter(format!(
            "need β > 0 and L > 0, got β={beta}, L={radius}"
        )));
    }
    let eps2 = epsilon * epsilon;
    if radius < eps2 {
        return Err(Error::Parameter(format!(
            "precondition L ≥ ε² violated: L={radius}, ε²={eps2}"
        )));
    }
    if (1.0 / eps2).ln() < radius.ln() / (2.0 * beta) {
        return Err(Error::Parameter(format!(
            "precondition log(ε⁻²) ≥ log(L)/(2β) violated: {} < {}",
            (1.0 / eps2).ln(),
            radius.ln() / (2.0 * beta)
        )));
    }
    let v = atom_size as f64;
    let first = (radius / (3f64.powf(v) * eps2)).powf(1.0 / (2.0 * beta + v));
    let t = int_part(first.min(1.0 / eps2));
    Ok(t.min(cutoff as u64) as u32)
}

/// The projection estimator with the bandwidth above on every support.
pub fn oracle_candidate(
    structure: &Structure,
    beta: f64,
    radius: f64,
    epsilon: f64,
    cutoff: u32,
) -> Result<Candidate> {
    let t = structure
        .supports()
        .iter()
        .map(|v| oracle_bandwidth(beta, radius, epsilon, v.len(), cutoff))
        .collect::<Result<Vec<_>>>()?;
    Candidate::new(structure.clone(), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_part_tolerance() {
        assert_eq!(int_part(1.0 / (0.1 * 0.1)), 100);
        assert_eq!(int_part(3.218), 3);
        assert_eq!(int_part(0.99), 0);
        assert_eq!(int_part(-2.0), 0);
    }

    #[test]
    fn worked_values() {
        assert_eq!(oracle_bandwidth(1.0, 1.0, 0.1, 1, 1000).unwrap(), 3);
        assert_eq!(oracle_bandwidth(1.0, 1.0, 0.5, 1, 1000).unwrap(), 1);
        assert_eq!(oracle_bandwidth(1.0, 1.0, 0.1, 1, 2).unwrap(), 2);
    }

    #[test]
    fn tiny_radius_gives_zero() {
        // ε² ≤ L < 3ε²
        assert_eq!(oracle_bandwidth(1.0, 0.02, 0.1, 1, 50).unwrap(), 0);
    }

    #[test]
    fn preconditions_named() {
        let e = oracle_bandwidth(1.0, 0.001, 0.1, 1, 50)
            .unwrap_err()
            .to_string();
        assert!(e.contains("L ≥ ε²"), "{e}");
        // log(4) < log(1e6)/2
        let e = oracle_bandwidth(1.0, 1e6, 0.5, 1, 50)
            .unwrap_err()
            .to_string();
        assert!(e.contains("log(ε⁻²)"), "{e}");
    }
}
