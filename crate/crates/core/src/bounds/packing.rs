use std::fmt;
use std::io::Write;

use super::combinatorics::{partition_count, to_f64};
use crate::error::{Error, Result};
use crate::multiindex::Support;

/// Default ceiling on the number of partitions enumerated.
pub const PARTITION_CEILING: u64 = 10_000_000;

/// `m` pairwise disjoint blocks of exactly `s` coordinates out of `{1..d}`,
/// sorted by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    d: usize,
    s: usize,
    blocks: Vec<Support>,
}

impl Partition {
    pub fn new(d: usize, s: usize, mut blocks: Vec<Support>) -> Result<Self> {
        blocks.sort();
        let mut seen = Support::EMPTY;
        for &b in &blocks {
            if b.len() != s || !b.fits_dim(d) {
                return Err(Error::Domain(format!(
                    "block {b} must have exactly {s} coordinates in 1..={d}"
                )));
            }
            if b.intersects(seen) {
                return Err(Error::Domain(format!("block {b} overlaps another block")));
            }
            seen = seen.union(b);
        }
        Ok(Partition { d, s, blocks })
    }

    pub fn blocks(&self) -> &[Support] {
        &self.blocks
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

impl fmt::Display for Partition {
    /// `1,2|3,4`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            let c: Vec<String> = b.coords().iter().map(|c| c.to_string()).collect();
            f.write_str(&c.join(","))?;
        }
        Ok(())
    }
}

fn s_subsets(d: usize, s: usize) -> Vec<Support> {
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(s);
    fn rec(start: usize, d: usize, s: usize, stack: &mut Vec<usize>, out: &mut Vec<Support>) {
        if stack.len() == s {
            out.push(Support::from_coords(stack).expect("valid"));
            return;
        }
        for c in start..=d {
            if d - c + 1 < s - stack.len() {
                break;
            }
            stack.push(c);
            rec(c + 1, d, s, stack, out);
            stack.pop();
        }
    }
    rec(1, d, s, &mut stack, &mut out);
    out
}

/// Every element of `P^d_{s,m}` in canonical order.
pub fn enumerate_partitions(d: usize, s: usize, m: usize, ceiling: u64) -> Result<Vec<Partition>> {
    if s == 0 || m == 0 {
        return Err(Error::Domain(format!(
            "need s ≥ 1 and m ≥ 1, got s={s}, m={m}"
        )));
    }
    let count = partition_count(d as u64, s as u64, m as u64)?;
    if to_f64(&count) > ceiling as f64 {
        return Err(Error::capacity("partition enumeration", count, ceiling));
    }
    let blocks = s_subsets(d, s);
    let mut out = Vec::new();
    let mut stack: Vec<Support> = Vec::with_capacity(m);
    fn rec(
        blocks: &[Support],
        start: usize,
        m: usize,
        used: Support,
        stack: &mut Vec<Support>,
        out: &mut Vec<Vec<Support>>,
    ) {
        if stack.len() == m {
            out.push(stack.clone());
            return;
        }
        for i in start..blocks.len() {
            let b = blocks[i];
            if b.intersects(used) {
                continue;
            }
            stack.push(b);
            rec(blocks, i + 1, m, used.union(b), stack, out);
            stack.pop();
        }
    }
    // blocks are in lexicographic order, so increasing index means increasing minimum
    let mut raw = Vec::new();
    rec(&blocks, 0, m, Support::EMPTY, &mut stack, &mut raw);
    for b in raw {
        out.push(Partition { d, s, blocks: b });
    }
    Ok(out)
}

/// `ρ(π, π') = (1/m) Σ_ℓ 1(V_ℓ ∉ π')`.
pub fn rho(p: &Partition, q: &Partition) -> Result<f64> {
    if p.d != q.d || p.s != q.s || p.m() != q.m() {
        return Err(Error::Domain(format!(
            "partitions of different shapes: (d,s,m)=({},{},{}) vs ({},{},{})",
            p.d,
            p.s,
            p.m(),
            q.d,
            q.s,
            q.m()
        )));
    }
    Ok(rho_unchecked(p, q))
}

fn rho_unchecked(p: &Partition, q: &Partition) -> f64 {
    let missing = p
        .blocks
        .iter()
        .filter(|b| q.blocks.binary_search(b).is_err())
        .count();
    missing as f64 / p.m() as f64
}

/// A `ϑ`-separated family of partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingSet {
    pub theta: f64,
    pub elements: Vec<Partition>,
}

impl PackingSet {
    /// One partition per line.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.elements {
            writeln!(out, "{p}")?;
        }
        Ok(())
    }

    pub fn min_separation(&self) -> f64 {
        let mut min = f64::INFINITY;
        for (i, p) in self.elements.iter().enumerate() {
            for q in &self.elements[i + 1..] {
                min = min.min(rho_unchecked(p, q));
            }
        }
        min
    }
}

/// First-fit packing over the canonical enumeration order.
pub fn greedy_packing(
    d: usize,
    s: usize,
    m: usize,
    theta: f64,
    ceiling: u64,
) -> Result<PackingSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Parameter(format!(
            "separation ϑ must lie in (0, 1], got {theta}"
        )));
    }
    let all = enumerate_partitions(d, s, m, ceiling)?;
    let mut elements: Vec<Partition> = Vec::new();
    for p in all {
        if elements
            .iter()
            .all(|q| rho_unchecked(&p, q) >= theta - 1e-12)
        {
            elements.push(p);
        }
    }
    Ok(PackingSet { theta, elements })
}

/// Full post-pass: no enumerable partition could still be added.
pub fn is_maximal(
    packing: &PackingSet,
    d: usize,
    s: usize,
    m: usize,
    ceiling: u64,
) -> Result<bool> {
    let all = enumerate_partitions(d, s, m, ceiling)?;
    Ok(all.iter().all(|p| {
        packing.elements.contains(p)
            || packing
                .elements
                .iter()
                .any(|q| rho_unchecked(p, q) < packing.theta - 1e-12)
    }))
}

/// `−m log(8 e^{7/8} s^{1/2} / 7) + (ms/3) log(d / (s m^{1/s}))`.
pub fn packing_log_bound(d: usize, s: usize, m: usize) -> f64 {
    let (d, s, m) = (d as f64, s as f64, m as f64);
    -m * (8.0 * (7.0f64 / 8.0).exp() * s.sqrt() / 7.0).ln()
        + m * s / 3.0 * (d / (s * m.powf(1.0 / s))).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn part(d: usize, s: usize, blocks: &[&[usize]]) -> Partition {
        Partition::new(
            d,
            s,
            blocks
                .iter()
                .map(|b| Support::from_coords(b).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn four_into_pairs() {
        let all = enumerate_partitions(4, 2, 2, PARTITION_CEILING).unwrap();
        let names: Vec<String> = all.iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["1,2|3,4", "1,3|2,4", "1,4|2,3"]);
        let pk = greedy_packing(4, 2, 2, 1.0, PARTITION_CEILING).unwrap();
        assert_eq!(pk.elements.len(), 3);
    }

    #[test]
    fn counts_match_closed_form() {
        for d in 1..=8usize {
            for s in 1..=d {
                for m in 1..=d / s {
                    let n = enumerate_partitions(d, s, m, PARTITION_CEILING)
                        .unwrap()
                        .len();
                    assert_eq!(
                        BigUint::from(n),
                        partition_count(d as u64, s as u64, m as u64).unwrap(),
                        "({d},{s},{m})"
                    );
                }
            }
        }
        assert!(enumerate_partitions(4, 3, 2, PARTITION_CEILING).is_err());
    }

    #[test]
    fn rho_examples() {
        let p = part(6, 2, &[&[1, 2], &[3, 4]]);
        assert_eq!(rho(&p, &p).unwrap(), 0.0);
        assert_eq!(rho(&p, &part(6, 2, &[&[1, 3], &[2, 4]])).unwrap(), 1.0);
        assert_eq!(rho(&p, &part(6, 2, &[&[1, 2], &[5, 6]])).unwrap(), 0.5);
        assert!(rho(&p, &part(6, 3, &[&[1, 2, 3]])).is_err());
    }

    #[test]
    fn tiny_theta_takes_everything() {
        let all = enumerate_partitions(6, 2, 2, PARTITION_CEILING).unwrap();
        let pk = greedy_packing(6, 2, 2, 1e-9, PARTITION_CEILING).unwrap();
        assert_eq!(pk.elements, all);
        assert!(greedy_packing(6, 2, 2, 0.0, PARTITION_CEILING).is_err());
    }

    #[test]
    fn packing_is_separated_and_maximal() {
        for &(d, s, m, th) in &[
            (8, 2, 2, 0.5),
            (8, 1, 3, 1.0 / 3.0),
            (7, 3, 2, 1.0),
            (12, 1, 2, 0.125),
        ] {
            let pk = greedy_packing(d, s, m, th, PARTITION_CEILING).unwrap();
            assert!(pk.min_separation() >= th - 1e-12 || pk.elements.len() < 2);
            assert!(is_maximal(&pk, d, s, m, PARTITION_CEILING).unwrap());
        }
    }

    #[test]
    fn packing_bound_at_twelve() {
        let pk = greedy_packing(12, 1, 2, 0.125, PARTITION_CEILING).unwrap();
        let want = -2.0 * (8.0 * (0.875f64).exp() / 7.0).ln() + (2.0 / 3.0) * 6f64.ln();
        assert!((packing_log_bound(12, 1, 2) - want).abs() < 1e-14);
        assert!((pk.elements.len() as f64).ln() >= want);
    }

    #[test]
    fn capacity_rejected() {
        assert!(matches!(
            enumerate_partitions(50, 5, 5, PARTITION_CEILING),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn dump_format() {
        let pk = greedy_packing(4, 2, 2, 1.0, PARTITION_CEILING).unwrap();
        let mut buf = Vec::new();
        pk.write_dump(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "1,2|3,4\n1,3|2,4\n1,4|2,3\n"
        );
    }
}
