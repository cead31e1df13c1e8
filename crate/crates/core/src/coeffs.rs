//! Sparse coefficient arrays `θ = (θ_j)` and their CSV form.

use std::collections::btree_map::{self, BTreeMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

/// A sparse map from multi-index to coefficient. Absent indices are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientMap {
    d: usize,
    map: BTreeMap<MultiIndex, f64>,
}

impl CoefficientMap {
    pub fn new(d: usize) -> Self {
        CoefficientMap {
            d,
            map: BTreeMap::new(),
        }
    }

    pub fn from_pairs(
        d: usize,
        pairs: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut out = CoefficientMap::new(d);
        for (j, v) in pairs {
            out.insert(j, v)?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Overwrites the coefficient at `j`.
    pub fn insert(&mut self, j: MultiIndex, value: f64) -> Result<()> {
        self.check_dim(&j)?;
        self.map.insert(j, value);
        Ok(())
    }

    /// Adds `value` to the coefficient at `j`.
    pub fn add(&mut self, j: MultiIndex, value: f64) -> Result<()> {
        self.check_dim(&j)?;
        *self.map.entry(j).or_insert(0.0) += value;
        Ok(())
    }

    fn check_dim(&self, j: &MultiIndex) -> Result<()> {
        if j.dim() != self.d {
            return Err(Error::Domain(format!(
                "index {j} has dimension {}, expected {}",
                j.dim(),
                self.d
            )));
        }
        Ok(())
    }

    pub fn get(&self, j: &MultiIndex) -> f64 {
        self.map.get(j).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, MultiIndex, f64> {
        self.map.iter()
    }

    pub fn indices(&self) -> impl Iterator<Item = &MultiIndex> {
        self.map.keys()
    }

    /// `Σ θ_j²`, which equals `‖f‖₂²` by Parseval.
    pub fn sum_squares(&self) -> f64 {
        self.map.values().map(|v| v * v).sum()
    }

    /// `Σ_j (θ_j − θ'_j)²` over the union of both index sets.
    pub fn squared_distance(&self, other: &CoefficientMap) -> f64 {
        let mut total = 0.0;
        for (j, &a) in &self.map {
            let diff = a - other.get(j);
            total += diff * diff;
        }
        for (j, &b) in &other.map {
            if !self.map.contains_key(j) {
                total += b * b;
            }
        }
        total
    }

    pub fn scaled(&self, factor: f64) -> CoefficientMap {
        CoefficientMap {
            d: self.d,
            map: self
                .map
                .iter()
                .map(|(j, v)| (j.clone(), v * factor))
                .collect(),
        }
    }

    /// Drops explicit zeros.
    pub fn pruned(mut self) -> CoefficientMap {
        self.map.retain(|_, v| *v != 0.0);
        self
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&MultiIndex, f64) -> bool) {
        self.map.retain(|j, v| keep(j, *v));
    }

    pub fn is_finite(&self) -> bool {
        self.map.values().all(|v| v.is_finite())
    }

    /// Writes `j_1,…,j_d,<value_column>` rows in lexicographic index order.
    /// Zero coefficients are skipped.
    pub fn write_csv<W: Write>(&self, out: W, value_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("j_{i}")).collect();
        header.push(value_column.to_string());
        w.write_record(&header)?;
        for (j, v) in &self.map {
            if *v == 0.0 {
                continue;
            }
            let mut row: Vec<String> = j.entries().iter().map(|e| e.to_string()).collect();
            row.push(format_real(*v));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV written by [`CoefficientMap::write_csv`]. Lines starting
    /// with `#` are ignored; the dimension is taken from the header.
    pub fn read_csv<R: BufRead>(input: R, value_column: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = r.headers()?.clone();
        let d = header
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Parse("empty header".into()))?;
        for (i, name) in header.iter().take(d).enumerate() {
            if name != format!("j_{}", i + 1) {
                return Err(Error::Parse(format!("unexpected column {name:?}")));
            }
        }
        if &header[d] != value_column {
            return Err(Error::Parse(format!(
                "expected value column {value_column:?}, found {:?}",
                &header[d]
            )));
        }
        let mut out = CoefficientMap::new(d);
        for record in r.records() {
            let record = record?;
            let entries = record
                .iter()
                .take(d)
                .map(|s| {
                    s.parse::<i32>()
                        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let v: f64 = record[d]
                .parse()
                .map_err(|e| Error::Parse(format!("{:?}: {e}", &record[d])))?;
            out.insert(MultiIndex::new(entries), v)?;
        }
        Ok(out)
    }
}

impl<'a> IntoIterator for &'a CoefficientMap {
    type Item = (&'a MultiIndex, &'a f64);
    type IntoIter = btree_map::Iter<'a, MultiIndex, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.map.iter()
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}
