use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use compound_core::coeffs::format_real;
use compound_core::risk::PreconditionCheck;

use crate::error::CliError;

/// Plain-text run record: config, seed, version, precondition checks,
/// outputs and headline results. Contains nothing time- or host-dependent.
#[derive(Debug, Default)]
pub struct Manifest {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<(String, f64, f64, bool)>,
    pub outputs: Vec<String>,
    pub results: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: BTreeMap<String, String>) -> Self {
        Manifest {
            subcommand: subcommand.to_string(),
            config,
            ..Manifest::default()
        }
    }

    /// Repeated identical checks are recorded once.
    pub fn check(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, holds: bool) {
        let entry = (name.into(), lhs, rhs, holds);
        if !self.checks.contains(&entry) {
            self.checks.push(entry);
        }
    }

    pub fn preconditions(&mut self, checks: &[PreconditionCheck]) {
        for c in checks {
            if !c.holds
                && !self
                    .checks
                    .iter()
                    .any(|e| e.0 == c.name && e.1 == c.lhs && e.2 == c.rhs)
            {
                eprintln!(
                    "warning: precondition {} does not hold ({} vs {})",
                    c.name, c.lhs, c.rhs
                );
            }
            self.check(c.name, c.lhs, c.rhs, c.holds);
        }
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = compound-minimax");
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "subcommand = {}", self.subcommand);
        s.push_str("\n[config]\n");
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k} = {v}");
        }
        s.push_str("\n[preconditions]\n");
        for (name, lhs, rhs, holds) in &self.checks {
            let _ = writeln!(
                s,
                "{name} : lhs={} rhs={} holds={holds}",
                format_real(*lhs),
                format_real(*rhs)
            );
        }
        s.push_str("\n[outputs]\n");
        for o in &self.outputs {
            let _ = writeln!(s, "{o}");
        }
        if !self.results.is_empty() {
            s.push_str("\n[results]\n");
            for (k, v) in &self.results {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let p = dir.join("manifest.txt");
        fs::write(&p, self.render()).map_err(|e| CliError::io(&p, e))
    }
}
