use compound_core::basis::{eval_basis, eval_function};
use compound_core::multiindex::enumerate_indices;
use compound_core::{CoefficientMap, IndexBox, MultiIndex};

/// Midpoint rule on `[0,1]^d` with `n` points per axis.
fn midpoint(d: usize, n: usize, g: impl Fn(&[f64]) -> f64) -> f64 {
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for flat in 0..n.pow(d as u32) {
        let mut rest = flat;
        for xi in x.iter_mut() {
            *xi = ((rest % n) as f64 + 0.5) / n as f64;
            rest /= n;
        }
        acc += g(&x);
    }
    acc / n.pow(d as u32) as f64
}

#[test]
fn orthonormal_up_to_three() {
    for d in 1..=2 {
        let idx = enumerate_indices(&IndexBox::full(d, 3)).unwrap();
        for a in &idx {
            for b in &idx {
                let ip = midpoint(d, 64, |x| eval_basis(a, x) * eval_basis(b, x));
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-3, "{a:?} {b:?}: {ip}");
            }
        }
    }
}

#[test]
fn parseval_on_random_coefficients() {
    use rand::Rng;
    let mut rng = compound_core::rng::chacha(17);
    for d in 1..=2 {
        let mut c = CoefficientMap::new(d);
        for j in enumerate_indices(&IndexBox::full(d, 3)).unwrap() {
            c.insert(j, rng.random_range(-1.0..1.0)).unwrap();
        }
        let energy = midpoint(d, 96, |x| eval_function(&c, x).powi(2));
        let rel = (energy - c.sum_squares()).abs() / c.sum_squares();
        assert!(rel < 1e-3, "d={d}: {energy} vs {}", c.sum_squares());
    }
}

#[test]
fn synthesis_matches_single_element() {
    let j = MultiIndex::new(vec![2, -3]);
    let c = CoefficientMap::from_pairs(2, [(j.clone(), 0.7)]).unwrap();
    for x in [[0.1, 0.2], [0.5, 0.9], [0.33, 0.0]] {
        assert!((eval_function(&c, &x) - 0.7 * eval_basis(&j, &x)).abs() < 1e-14);
    }
}
