//! Multi-indices `j ∈ Z^d`, coordinate supports, and truncated index boxes.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest ambient dimension representable by [`Support`].
pub const MAX_DIM: usize = 64;

/// Hard ceiling on the number of indices a single box may enumerate.
pub const INDEX_CEILING: u64 = 10_000_000;

/// An integer vector `j ∈ Z^d`. Ordering is lexicographic on the entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<i32>);

impl MultiIndex {
    pub fn new(entries: Vec<i32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// Index with `value` at 1-based coordinate `coord` and zeros elsewhere.
    pub fn axis(d: usize, coord: usize, value: i32) -> Self {
        let mut v = vec![0; d];
        v[coord - 1] = value;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[i32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// `|j|_∞`.
    pub fn sup_norm(&self) -> u32 {
        self.0.iter().map(|e| e.unsigned_abs()).max().unwrap_or(0)
    }

    /// Coordinates carrying a nonzero entry.
    pub fn support(&self) -> Support {
        let mut mask = 0u64;
        for (i, &e) in self.0.iter().enumerate() {
            if e != 0 {
                mask |= 1 << i;
            }
        }
        Support(mask)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// A subset of the coordinates `{1, …, d}`, stored as a bitmask.
///
/// Ordering compares the sorted coordinate lists lexicographically, so that
/// `{1,2} < {1,3} < {2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Support(u64);

impl Support {
    pub const EMPTY: Support = Support(0);

    /// Builds a support from 1-based coordinates.
    pub fn from_coords(coords: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &c in coords {
            if c == 0 || c > MAX_DIM {
                return Err(Error::Domain(format!(
                    "coordinate {c} outside 1..={MAX_DIM}"
                )));
            }
            mask |= 1 << (c - 1);
        }
        Ok(Support(mask))
    }

    pub fn from_mask(mask: u64) -> Self {
        Support(mask)
    }

    /// `{1, …, k}`.
    pub fn prefix(k: usize) -> Self {
        if k >= 64 {
            Support(u64::MAX)
        } else {
            Support((1u64 << k) - 1)
        }
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, coord: usize) -> bool {
        (1..=MAX_DIM).contains(&coord) && self.0 & (1 << (coord - 1)) != 0
    }

    pub fn is_subset_of(self, other: Support) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: Support) -> bool {
        self.0 & other.0 != 0
    }

    pub fn union(self, other: Support) -> Support {
        Support(self.0 | other.0)
    }

    /// Largest coordinate, or 0 for the empty set.
    pub fn max_coord(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn min_coord(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize + 1)
        }
    }

    /// Sorted 1-based coordinates.
    pub fn coords(self) -> Vec<usize> {
        (0..64)
            .filter(|i| self.0 & (1 << i) != 0)
            .map(|i| i + 1)
            .collect()
    }

    pub fn fits_dim(self, d: usize) -> bool {
        self.max_coord() <= d
    }
}

impl Ord for Support {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords().cmp(&other.coords())
    }
}

impl PartialOrd for Support {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coords: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", coords.join(","))
    }
}

/// The truncated index set `{ j : supp(j) ⊆ V, |j|_∞ ≤ N }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub d: usize,
    pub cutoff: u32,
    /// `None` means every coordinate is free.
    pub support: Option<Support>,
}

impl IndexBox {
    pub fn new(d: usize, cutoff: u32, support: Option<Support>) -> Self {
        IndexBox { d, cutoff, support }
    }

    pub fn full(d: usize, cutoff: u32) -> Self {
        IndexBox::new(d, cutoff, None)
    }

    fn free_coords(&self) -> Result<Support> {
        if self.d > MAX_DIM {
            return Err(Error::Domain(format!(
                "dimension {} exceeds {MAX_DIM}",
                self.d
            )));
        }
        match self.support {
            Some(v) if !v.fits_dim(self.d) => Err(Error::Domain(format!(
                "support {v} is not contained in {{1..{}}}",
                self.d
            ))),
            Some(v) => Ok(v),
            None => Ok(Support::prefix(self.d)),
        }
    }

    /// `(2N+1)^{|V|}`, saturating.
    pub fn count(&self) -> Result<u64> {
        let free = self.free_coords()?.len() as u32;
        Ok((2 * self.cutoff as u64 + 1).saturating_pow(free))
    }

    pub fn contains(&self, j: &MultiIndex) -> bool {
        j.dim() == self.d
            && j.sup_norm() <= self.cutoff
            && self.support.is_none_or(|v| j.support().is_subset_of(v))
    }
}

/// Every index of the box, in lexicographic order.
pub fn enumerate_indices(bx: &IndexBox) -> Result<Vec<MultiIndex>> {
    let free = bx.free_coords()?;
    let count = bx.count()?;
    if count > INDEX_CEILING {
        return Err(Error::capacity("index box", count, INDEX_CEILING));
    }
    let free: Vec<usize> = free.coords().iter().map(|c| c - 1).collect();
    let n = bx.cutoff as i32;
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0i32; bx.d];
    for &c in &free {
        current[c] = -n;
    }
    loop {
        out.push(MultiIndex(current.clone()));
        // odometer, last free coordinate fastest
        let mut k = free.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            let c = free[k];
            if current[c] < n {
                current[c] += 1;
                break;
            }
            current[c] = -n;
        }
    }
}

/// Sorted union of the boxes `{ supp(j) ⊆ V, |j|_∞ ≤ N }` over `supports`,
/// always including the zero index.
pub fn enumerate_union(d: usize, cutoff: u32, supports: &[Support]) -> Result<Vec<MultiIndex>> {
    let mut all = vec![MultiIndex::zero(d)];
    for &v in supports {
        all.extend(enumerate_indices(&IndexBox::new(d, cutoff, Some(v)))?);
    }
    all.sort();
    all.dedup();
    Ok(all)
}
