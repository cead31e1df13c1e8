use super::Candidate;
use crate::error::{Error, Result};
use crate::model::{FamilyRule, Structure};
use crate::multiindex::{Support, MAX_DIM};

/// The finite family of weak estimators the aggregate runs over: every
/// admissible collection of at most `m_max` nonempty supports of size at most
/// `s_max`, each with a bandwidth in `[0, cutoff]`, plus the constant
/// candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSpace {
    pub d: usize,
    pub s_max: usize,
    pub m_max: usize,
    pub cutoff: u32,
    pub rule: FamilyRule,
}

impl CandidateSpace {
    pub fn new(
        d: usize,
        s_max: usize,
        m_max: usize,
        cutoff: u32,
        rule: FamilyRule,
    ) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::Parameter(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        if s_max == 0 || s_max > d {
            return Err(Error::Parameter(format!(
                "need 1 ≤ s ≤ d, got s={s_max}, d={d}"
            )));
        }
        Ok(CandidateSpace {
            d,
            s_max,
            m_max,
            cutoff,
            rule,
        })
    }

    /// Nonempty subsets of `{1..d}` with at most `s_max` elements, sorted.
    pub fn pool(&self) -> Vec<Support> {
        let mut out = Vec::new();
        let mut chosen = Vec::with_capacity(self.s_max);
        fn rec(
            start: usize,
            d: usize,
            left: usize,
            chosen: &mut Vec<usize>,
            out: &mut Vec<Support>,
        ) {
            for c in start..=d {
                chosen.push(c);
                out.push(Support::from_coords(chosen).expect("valid coordinates"));
                if left > 1 {
                    rec(c + 1, d, left - 1, chosen, out);
                }
                chosen.pop();
            }
        }
        rec(1, self.d, self.s_max, &mut chosen, &mut out);
        out.sort();
        out
    }

    pub fn grid_size(&self) -> u64 {
        self.cutoff as u64 + 1
    }

    /// Admissible support collections in enumeration order: by size, then
    /// lexicographically in pool order. Stops with a capacity error once the
    /// implied candidate count passes `ceiling`.
    fn structures(&self, ceiling: u64) -> Result<Vec<Vec<Support>>> {
        let pool = self.pool();
        let g = self.grid_size();
        let mut count: u64 = 1;
        let mut out = Vec::new();
        for m in 1..=self.m_max.min(pool.len()) {
            let per = g.checked_pow(m as u32).unwrap_or(u64::MAX);
            let mut stack = Vec::with_capacity(m);
            let mut err = None;
            self.combos(&pool, 0, m, &mut stack, &mut |c| {
                count = count.saturating_add(per);
                if count > ceiling {
                    err = Some(count);
                    return false;
                }
                out.push(c.to_vec());
                true
            });
            if let Some(n) = err {
                return Err(Error::capacity(
                    "candidate space (use mcmc mode)",
                    format!("more than {}", n.min(ceiling)),
                    ceiling,
                ));
            }
        }
        Ok(out)
    }

    fn combos(
        &self,
        pool: &[Support],
        start: usize,
        m: usize,
        stack: &mut Vec<Support>,
        visit: &mut dyn FnMut(&[Support]) -> bool,
    ) -> bool {
        if stack.len() == m {
            return visit(stack);
        }
        for i in start..pool.len() {
            if pool.len() - i < m - stack.len() {
                break;
            }
            stack.push(pool[i]);
            // both rules are closed under taking sub-collections, so prefixes can be pruned
            let ok = self.rule.admits(stack);
            let go_on = !ok || self.combos(pool, i + 1, m, stack, visit);
            stack.pop();
            if !go_on {
                return false;
            }
        }
        true
    }

    /// Number of candidates, or a capacity error above `ceiling`.
    pub fn count(&self, ceiling: u64) -> Result<u64> {
        let g = self.grid_size();
        Ok(1 + self
            .structures(ceiling)?
            .iter()
            .map(|s| g.pow(s.len() as u32))
            .sum::<u64>())
    }

    /// All candidates: the constant first, then by number of supports,
    /// support collection, and bandwidth vector (last entry fastest).
    pub fn enumerate(&self, ceiling: u64) -> Result<Vec<Candidate>> {
        let structures = self.structures(ceiling)?;
        let mut out = vec![Candidate::constant(self.d)];
        for supports in structures {
            let m = supports.len();
            let st = Structure::new(self.d, self.s_max, supports, self.rule)?;
            let mut t = vec![0u32; m];
            loop {
                out.push(Candidate::new(st.clone(), t.clone())?);
                let mut done = true;
                for k in (0..m).rev() {
                    if t[k] < self.cutoff {
                        t[k] += 1;
                        done = false;
                        break;
                    }
                    t[k] = 0;
                }
                if done {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Whether a candidate belongs to this space.
    pub fn contains(&self, cand: &Candidate) -> bool {
        if cand.structure().is_constant() {
            return true;
        }
        let st = cand.structure();
        st.d() == self.d
            && cand.m() <= self.m_max
            && cand.s_max() <= self.s_max
            && cand.bandwidths().iter().all(|&t| t <= self.cutoff)
            && self.rule.admits(st.supports())
    }
}
