//! Residual certification report.
//!
//! A report is a set of named sections, each a list of checks
//! `(name, value, tolerance, kind, pass)`, plus run metadata. The JSON
//! layout has sorted keys and round-trip float precision; there are no
//! timestamps or host paths, so identical runs give identical bytes.
//!
//! ```json
//! {
//!   "metadata": { "command": "dilate", "norm": "...", "seed": 0, ... },
//!   "pass": true,
//!   "sections": {
//!     "psd": {
//!       "checks": [ { "kind": "min", "name": "min_eigenvalue", "pass": true,
//!                     "tolerance": -1e-10, "value": 0.0 } ],
//!       "pass": true, "status": "run"
//!     }
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_DESCRIPTION: &str = "induced 1-norm (max column sum)";

pub const SECTION_NAMES: [&str; 8] = [
    "input_summary",
    "parseval_checks",
    "k_relations",
    "psd",
    "factorization",
    "operator_residuals",
    "root_residuals",
    "dilation_certification",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Pass iff `value ≤ tolerance`.
    Max,
    /// Pass iff `value ≥ tolerance`.
    Min,
    /// Reported only; always passes when finite.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tolerance: Option<f64>,
    pub kind: CheckKind,
    pub pass: bool,
    /// Set when the measured value was NaN or infinite; `value` then holds
    /// `f64::MAX` with the sign of the original.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub non_finite: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: Option<f64>, kind: CheckKind) -> Self {
        let non_finite = !value.is_finite();
        let stored = if non_finite {
            if value < 0.0 {
                -f64::MAX
            } else {
                f64::MAX
            }
        } else {
            value
        };
        let mut c = Check {
            name: name.into(),
            value: stored,
            tolerance,
            kind,
            pass: false,
            non_finite,
        };
        c.pass = c.evaluate();
        c
    }

    pub fn max(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check::new(name, value, Some(tolerance), CheckKind::Max)
    }

    pub fn min(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check::new(name, value, Some(tolerance), CheckKind::Min)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Check::new(name, value, None, CheckKind::Info)
    }

    pub fn count(name: impl Into<String>, n: usize) -> Self {
        Check::info(name, n as f64)
    }

    /// Pass flag recomputed from value, tolerance and kind.
    pub fn evaluate(&self) -> bool {
        if self.non_finite || !self.value.is_finite() {
            return false;
        }
        match (self.kind, self.tolerance) {
            (CheckKind::Info, _) => true,
            (CheckKind::Max, Some(t)) => self.value <= t,
            (CheckKind::Min, Some(t)) => self.value >= t,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionStatus {
    Run,
    /// An error stopped the pipeline inside this section.
    Failed,
    /// Not reached because an earlier section stopped the pipeline.
    NotRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub status: SectionStatus,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Default for Section {
    fn default() -> Self {
        Section {
            status: SectionStatus::Run,
            checks: Vec::new(),
            pass: true,
            error: None,
            note: None,
        }
    }
}

impl Section {
    pub fn new() -> Self {
        Section::default()
    }

    pub fn not_run() -> Self {
        Section {
            status: SectionStatus::NotRun,
            pass: false,
            ..Section::default()
        }
    }

    pub fn push(&mut self, check: Check) -> &mut Self {
        self.pass &= check.pass;
        self.checks.push(check);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn fail(&mut self, error: &Error) {
        self.status = SectionStatus::Failed;
        self.error = Some(error.to_string());
        self.pass = false;
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn evaluate(&self) -> bool {
        self.status == SectionStatus::Run && self.checks.iter().all(Check::evaluate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub j_min: i64,
    pub j_max: i64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub radius: Option<u64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub norm: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<WindowMeta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub core: Option<WindowMeta>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Metadata {
    pub fn new(command: &str, seed: u64) -> Self {
        Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            norm: NORM_DESCRIPTION.to_string(),
            window: None,
            core: None,
            tolerances: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub sections: BTreeMap<String, Section>,
    pub pass: bool,
}

impl Report {
    pub fn new(metadata: Metadata) -> Self {
        Report {
            metadata,
            sections: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn insert(&mut self, name: &str, section: Section) {
        self.sections.insert(name.to_string(), section);
        self.pass = self.sections.values().all(|s| s.pass);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    /// Looks up `section/check`.
    pub fn check(&self, section: &str, name: &str) -> Option<&Check> {
        self.section(section)?.get(name)
    }

    /// Overall pass recomputed from the checks, ignoring stored flags.
    pub fn evaluate(&self) -> bool {
        self.sections.values().all(Section::evaluate)
    }

    pub fn to_json(&self) -> Result<String> {
        // going through Value sorts struct fields along with map keys
        let value = serde_json::to_value(self)
            .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
        let mut text = serde_json::to_string_pretty(&value)
            .map_err(|e| Error::Numerical(format!("report serialization: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }
}

pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Report::from_json(&text)
}
