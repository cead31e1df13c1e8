use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Longest code length the exhaustive greedy construction accepts.
pub const MAX_CODE_LENGTH: u32 = 24;

/// Binary words of length `n` stored as bit masks (bit `i` is coordinate `i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypercubeCode {
    pub n: u32,
    pub words: Vec<u32>,
    /// Guaranteed pairwise Hamming distance.
    pub min_distance: u32,
}

pub fn hamming(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}

impl HypercubeCode {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Word `k` as a 0/1 vector.
    pub fn bits(&self, k: usize) -> Vec<u8> {
        (0..self.n)
            .map(|i| ((self.words[k] >> i) & 1) as u8)
            .collect()
    }

    /// Smallest pairwise distance, computed exhaustively; `None` below two words.
    pub fn realized_min_distance(&self) -> Option<u32> {
        let w = &self.words;
        (0..w.len())
            .into_par_iter()
            .filter_map(|i| w[i + 1..].iter().map(|&b| hamming(w[i], b)).min())
            .min()
    }

    /// One word per line as a bit string.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for k in 0..self.words.len() {
            let s: String = self
                .bits(k)
                .iter()
                .map(|b| if *b == 1 { '1' } else { '0' })
                .collect();
            writeln!(out, "{s}")?;
        }
        Ok(())
    }
}

/// Greedy lexicographic code of length `n` with distance `⌈n/8⌉`, starting
/// from the zero word. Every word not yet within distance `< ⌈n/8⌉` of a
/// chosen word is taken, so the result is a maximal code.
pub fn varshamov_gilbert(n: u32) -> Result<HypercubeCode> {
    if n == 0 {
        return Err(Error::Parameter("code length must be positive".into()));
    }
    if n > MAX_CODE_LENGTH {
        return Err(Error::capacity(
            "greedy code",
            format!("2^{n}"),
            1u64 << MAX_CODE_LENGTH,
        ));
    }
    let dist = n.div_ceil(8);
    let size = 1usize << n;
    let mut blocked = vec![false; size];
    let mut words = Vec::new();
    for w in 0..size as u32 {
        if blocked[w as usize] {
            continue;
        }
        words.push(w);
        mark_ball(w, n, dist - 1, &mut blocked);
    }
    Ok(HypercubeCode {
        n,
        words,
        min_distance: dist,
    })
}

fn mark_ball(center: u32, n: u32, radius: u32, blocked: &mut [bool]) {
    fn rec(x: u32, from: u32, n: u32, left: u32, blocked: &mut [bool]) {
        blocked[x as usize] = true;
        if left == 0 {
            return;
        }
        for i in from..n {
            rec(x ^ (1 << i), i + 1, n, left - 1, blocked);
        }
    }
    rec(center, 0, n, radius, blocked);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_nine() {
        let c = varshamov_gilbert(9).unwrap();
        assert!(c.len() >= 3);
        assert!(c.len() as f64 >= 2f64.powf(9.0 / 8.0));
        assert_eq!(c.words[0], 0);
        assert!(c.realized_min_distance().unwrap() >= 2);
    }

    #[test]
    fn sizes_meet_the_bound() {
        for n in 1..=16 {
            let c = varshamov_gilbert(n).unwrap();
            assert!(c.len() as f64 >= 2f64.powf(n as f64 / 8.0), "n={n}");
            if let Some(d) = c.realized_min_distance() {
                assert!(d >= n.div_ceil(8));
            }
        }
    }

    #[test]
    fn ceiling() {
        assert!(matches!(varshamov_gilbert(25), Err(Error::Capacity { .. })));
        assert!(varshamov_gilbert(0).is_err());
    }

    #[test]
    fn dump() {
        let c = varshamov_gilbert(2).unwrap();
        let mut buf = Vec::new();
        c.write_dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "00\n10\n01\n11\n");
    }
}
