use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use compound_core::FamilyRule;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Mcmc,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Mode::Exact),
            "mcmc" => Ok(Mode::Mcmc),
            o => Err(format!("unknown mode {o:?} (expected exact or mcmc)")),
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Mcmc => "mcmc",
        }
    }
}

/// How the benchmark and simulate commands draw the true function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Random atoms inside the Sobolev ball.
    Sobolev,
    /// Per-`ε` hardest-case atoms on the ball boundary.
    LeastFavorable,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sobolev" => Ok(ModelKind::Sobolev),
            "least-favorable" => Ok(ModelKind::LeastFavorable),
            o => Err(format!(
                "unknown model {o:?} (expected sobolev or least-favorable)"
            )),
        }
    }
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sobolev => "sobolev",
            ModelKind::LeastFavorable => "least-favorable",
        }
    }
}

/// Settings as given, before defaults. Keys match the long flag names.
#[derive(Debug, Clone, Default)]
pub struct Layer {
    pub d: Option<usize>,
    pub s: Option<usize>,
    pub m: Option<usize>,
    pub beta: Option<f64>,
    pub radius: Option<f64>,
    pub epsilon: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub cutoff: Option<u32>,
    pub replicates: Option<usize>,
    pub mode: Option<Mode>,
    pub steps: Option<u64>,
    pub burn_in: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub family_rule: Option<FamilyRule>,
    pub theta: Option<f64>,
    pub mean: Option<f64>,
    pub model: Option<ModelKind>,
    pub obs: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| CliError::validation(format!("config key {key}: cannot parse {v:?}: {e}")))
}

pub fn parse_grid(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

impl Layer {
    /// Flat `key = value` file; `#` starts a comment, blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let mut l = Layer::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::validation(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    n + 1
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "d" => l.d = Some(parse(k, v)?),
                "s" => l.s = Some(parse(k, v)?),
                "m" => l.m = Some(parse(k, v)?),
                "beta" => l.beta = Some(parse(k, v)?),
                "L" => l.radius = Some(parse(k, v)?),
                "epsilon" => l.epsilon = Some(parse(k, v)?),
                "eps-grid" => {
                    l.eps_grid =
                        Some(parse_grid(v).map_err(|e| {
                            CliError::validation(format!("config key eps-grid: {e}"))
                        })?)
                }
                "cutoff" => l.cutoff = Some(parse(k, v)?),
                "replicates" => l.replicates = Some(parse(k, v)?),
                "mode" => l.mode = Some(parse(k, v)?),
                "steps" => l.steps = Some(parse(k, v)?),
                "burn-in" => l.burn_in = Some(parse(k, v)?),
                "seed" => l.seed = Some(parse(k, v)?),
                "out" => l.out = Some(PathBuf::from(v)),
                "threads" => l.threads = Some(parse(k, v)?),
                "family-rule" => l.family_rule = Some(parse(k, v)?),
                "theta" => l.theta = Some(parse(k, v)?),
                "mean" => l.mean = Some(parse(k, v)?),
                "model" => l.model = Some(parse(k, v)?),
                "obs" => l.obs = Some(PathBuf::from(v)),
                other => {
                    return Err(CliError::validation(format!(
                        "{}:{}: unknown key {other:?}",
                        path.display(),
                        n + 1
                    )))
                }
            }
        }
        Ok(l)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Layer) -> Layer {
        Layer {
            d: self.d.or(lower.d),
            s: self.s.or(lower.s),
            m: self.m.or(lower.m),
            beta: self.beta.or(lower.beta),
            radius: self.radius.or(lower.radius),
            epsilon: self.epsilon.or(lower.epsilon),
            eps_grid: self.eps_grid.or(lower.eps_grid),
            cutoff: self.cutoff.or(lower.cutoff),
            replicates: self.replicates.or(lower.replicates),
            mode: self.mode.or(lower.mode),
            steps: self.steps.or(lower.steps),
            burn_in: self.burn_in.or(lower.burn_in),
            seed: self.seed.or(lower.seed),
            out: self.out.or(lower.out),
            threads: self.threads.or(lower.threads),
            family_rule: self.family_rule.or(lower.family_rule),
            theta: self.theta.or(lower.theta),
            mean: self.mean.or(lower.mean),
            model: self.model.or(lower.model),
            obs: self.obs.or(lower.obs),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub s: usize,
    pub m: usize,
    pub beta: f64,
    pub radius: f64,
    pub epsilon: f64,
    pub eps_grid: Vec<f64>,
    /// `None` when not given; commands pick their own default.
    pub cutoff: Option<u32>,
    pub replicates: usize,
    pub mode: Mode,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub family_rule: FamilyRule,
    pub theta: f64,
    pub mean: f64,
    pub model: ModelKind,
    pub obs: Option<PathBuf>,
}

pub const DEFAULT_CUTOFF: u32 = 8;
pub const DEFAULT_GRID: [f64; 5] = [0.3, 0.2, 0.15, 0.1, 0.07];

impl RunConfig {
    pub fn resolve(l: Layer) -> Self {
        RunConfig {
            d: l.d.unwrap_or(2),
            s: l.s.unwrap_or(1),
            m: l.m.unwrap_or(1),
            beta: l.beta.unwrap_or(1.0),
            radius: l.radius.unwrap_or(1.0),
            epsilon: l.epsilon.unwrap_or(0.2),
            eps_grid: l.eps_grid.unwrap_or_else(|| DEFAULT_GRID.to_vec()),
            cutoff: l.cutoff,
            replicates: l.replicates.unwrap_or(200),
            mode: l.mode.unwrap_or(Mode::Exact),
            steps: l.steps.unwrap_or(100_000),
            burn_in: l.burn_in.unwrap_or(10_000),
            seed: l.seed.unwrap_or(0),
            out: l.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: l.threads,
            family_rule: l.family_rule.unwrap_or_default(),
            theta: l.theta.unwrap_or(0.125),
            mean: l.mean.unwrap_or(0.0),
            model: l.model.unwrap_or(ModelKind::Sobolev),
            obs: l.obs,
        }
    }

    pub fn cutoff_or_default(&self) -> u32 {
        self.cutoff.unwrap_or(DEFAULT_CUTOFF)
    }

    /// The settings a command actually used, for the manifest.
    pub fn entries(&self, keys: &[&str]) -> BTreeMap<String, String> {
        use compound_core::coeffs::format_real as f;
        let mut all = BTreeMap::new();
        all.insert("d", self.d.to_string());
        all.insert("s", self.s.to_string());
        all.insert("m", self.m.to_string());
        all.insert("beta", f(self.beta));
        all.insert("L", f(self.radius));
        all.insert("epsilon", f(self.epsilon));
        all.insert(
            "eps-grid",
            self.eps_grid
                .iter()
                .map(|&e| f(e))
                .collect::<Vec<_>>()
                .join(","),
        );
        all.insert("cutoff", self.cutoff_or_default().to_string());
        all.insert("replicates", self.replicates.to_string());
        all.insert("mode", self.mode.name().to_string());
        all.insert("steps", self.steps.to_string());
        all.insert("burn-in", self.burn_in.to_string());
        all.insert("seed", self.seed.to_string());
        all.insert("family-rule", self.family_rule.name().to_string());
        all.insert("theta", f(self.theta));
        all.insert("mean", f(self.mean));
        all.insert("model", self.model.name().to_string());
        keys.iter()
            .filter_map(|k| all.get(k).map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

pub fn check_eps(name: &str, eps: f64) -> Result<(), CliError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(CliError::validation(format!(
            "{name} = {eps} violates 0 < ε < 1"
        )))
    }
}

/// Shape constraints shared by every command that builds a model.
pub fn check_shape(c: &RunConfig) -> Result<(), CliError> {
    if c.d == 0 || c.d > compound_core::multiindex::MAX_DIM {
        return Err(CliError::validation(format!(
            "d = {} violates 1 <= d <= 64",
            c.d
        )));
    }
    if c.s == 0 || c.s > c.d {
        return Err(CliError::validation(format!(
            "s = {} violates 1 <= s <= d = {}",
            c.s, c.d
        )));
    }
    if c.m == 0 {
        return Err(CliError::validation("m = 0 violates m >= 1"));
    }
    if !(c.beta > 0.0) {
        return Err(CliError::validation(format!(
            "beta = {} violates beta > 0",
            c.beta
        )));
    }
    if !(c.radius > 0.0) {
        return Err(CliError::validation(format!(
            "L = {} violates L > 0",
            c.radius
        )));
    }
    if c.cutoff == Some(0) {
        return Err(CliError::validation("cutoff = 0 violates cutoff >= 1"));
    }
    Ok(())
}

/// The model structure: `m` consecutive disjoint blocks of `s` coordinates.
pub fn check_blocks(c: &RunConfig) -> Result<(), CliError> {
    if c.m * c.s > c.d {
        return Err(CliError::validation(format!(
            "m s = {} violates m s <= d = {} (the true structure uses disjoint blocks)",
            c.m * c.s,
            c.d
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        fs::write(&p, "# comment\nd = 5\nbeta=2 # trailing\neps-grid = 0.3, 0.2\nfamily-rule = unrestricted\n").unwrap();
        let file = Layer::from_file(&p).unwrap();
        let flags = Layer {
            d: Some(3),
            ..Layer::default()
        };
        let c = RunConfig::resolve(flags.over(file));
        assert_eq!(c.d, 3);
        assert_eq!(c.beta, 2.0);
        assert_eq!(c.eps_grid, vec![0.3, 0.2]);
        assert_eq!(c.family_rule, FamilyRule::Unrestricted);
        assert_eq!(c.s, 1);
    }

    #[test]
    fn bad_file_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.conf");
        fs::write(&p, "colour = blue\n").unwrap();
        assert_eq!(Layer::from_file(&p).unwrap_err().code, 2);
        fs::write(&p, "d 3\n").unwrap();
        assert!(Layer::from_file(&p).is_err());
        fs::write(&p, "d = x\n").unwrap();
        assert!(Layer::from_file(&p).is_err());
    }

    #[test]
    fn epsilon_range_named() {
        let e = check_eps("epsilon", 1.5).unwrap_err();
        assert!(e.message.contains("0 < ε < 1"));
        assert!(check_eps("epsilon", 0.5).is_ok());
    }
}
