//! Reproducibility record written next to every output bundle.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::bundle::{Bundle, FileEntry};
use crate::config::RawConfig;
use crate::error::Result;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    OracleFailure,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::OracleFailure => 1,
            Status::NumericalFailure => 3,
        }
    }
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared: Option<f64>,
    pub measured: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, measured: f64, deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            level: None,
            declared: None,
            measured,
            deviation,
            tolerance,
            passed: deviation.is_finite() && deviation < tolerance,
        }
    }

    pub fn against(name: &str, level: usize, declared: f64, measured: f64, tolerance: f64) -> Self {
        Self {
            level: Some(level as i64),
            declared: Some(declared),
            ..Self::new(name, measured, (measured - declared).abs(), tolerance)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub index: usize,
    pub kind: String,
    pub params: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denominator_min: Option<f64>,
    pub capped_points: usize,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl StepLog {
    pub fn new(index: usize, kind: &str, params: String) -> Self {
        Self {
            index,
            kind: kind.to_string(),
            params,
            denominator_min: None,
            capped_points: 0,
            notes: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedStep {
    /// 0 for the base system, otherwise the step number.
    pub index: usize,
    pub phase: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: RawConfig,
    pub resolved: BTreeMap<String, Value>,
    pub base_checks: Vec<Check>,
    pub steps: Vec<StepLog>,
    pub summary: BTreeMap<String, Value>,
    pub failed_step: Option<FailedStep>,
    pub status: Status,
    pub timings: Vec<Timing>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: RawConfig) -> Self {
        Self {
            command: command.to_string(),
            config,
            resolved: BTreeMap::new(),
            base_checks: Vec::new(),
            steps: Vec::new(),
            summary: BTreeMap::new(),
            failed_step: None,
            status: Status::Ok,
            timings: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn resolve(&mut self, key: &str, value: impl Into<Value>) {
        self.resolved.insert(key.to_string(), value.into());
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(Timing {
            phase: phase.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn fail(&mut self, index: usize, phase: &str, error: impl ToString) {
        self.failed_step = Some(FailedStep {
            index,
            phase: phase.to_string(),
            error: error.to_string(),
        });
    }

    /// Worst outcome: a numerical failure outranks failed checks.
    pub fn settle(&mut self) {
        let checks_pass = self.base_checks.iter().all(|c| c.passed)
            && self.steps.iter().all(StepLog::passed);
        self.status = if self.failed_step.is_some() {
            Status::NumericalFailure
        } else if checks_pass {
            Status::Ok
        } else {
            Status::OracleFailure
        };
    }
}

/// A finished run, not yet on disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub bundle: Bundle,
    pub manifest: Manifest,
}

impl Outcome {
    /// Writes the bundle and then the manifest listing it.
    pub fn write(mut self, dir: &Path) -> Result<Manifest> {
        self.manifest.settle();
        self.manifest.files = self.bundle.write(dir)?;
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(dir.join(MANIFEST_NAME), json + "\n")?;
        Ok(self.manifest)
    }
}

impl Manifest {
    /// Console summary: one line per step with its oracle verdict.
    pub fn report(&self) -> String {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let mut out = String::new();
        if !self.base_checks.is_empty() {
            let ok = self.base_checks.iter().all(|c| c.passed);
            out += &format!("base: {} check(s) {}\n", self.base_checks.len(), verdict(ok));
        }
        for s in &self.steps {
            let levels: Vec<String> = s
                .checks
                .iter()
                .filter(|c| c.name == "isospectrality")
                .map(|c| format!("{:.6}", c.measured))
                .collect();
            let energies = if levels.is_empty() {
                String::new()
            } else {
                format!(" E = {{{}}}", levels.join(", "))
            };
            out += &format!(
                "step {} {} {}:{} {}\n",
                s.index,
                s.kind,
                s.params,
                energies,
                verdict(s.passed())
            );
        }
        if let Some(f) = &self.failed_step {
            out += &format!("failed at step {} ({}): {}\n", f.index, f.phase, f.error);
        }
        out += &format!("status: {:?}, {} file(s)\n", self.status, self.files.len() + 1);
        out
    }
}
