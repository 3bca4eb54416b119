//! Certified intervals for each construction and checks of the claimed
//! two-sided inequalities on finite truncations.
//!
//! Every row compares four numbers: the claimed lower bound (evaluated on
//! the raw input α), the certified lower and upper bounds computed from the
//! built model, and the claimed upper bound. A row passes iff
//! claimed lower ≤ certified lower and certified upper ≤ claimed upper, up to
//! a relative tolerance.

mod props;
mod theorems;

pub use props::{
    verify_prop_optimal, verify_prop_second, EnvelopeReport, EnvelopeReportRow, GapReport, GapRow,
    OrthogonalCheck,
};
pub use theorems::{verify_controlled, verify_nocotype, verify_twosum, verify_type};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_TOLERANCE;
use crate::operators::TypeConstants;
use crate::sequences::{check_convexity, DecaySequence, Generator};
use crate::snumbers::Constants;
use crate::{Error, Result};

/// Which claimed lower bound a report asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClaimForm {
    /// Convex when the input is convex, general otherwise.
    #[default]
    Auto,
    /// Constant times α_{9m}.
    Convex,
    /// Constant times α_{18m}.
    General,
}

impl std::str::FromStr for ClaimForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ClaimForm::Auto),
            "convex" => Ok(ClaimForm::Convex),
            "general" => Ok(ClaimForm::General),
            _ => Err(Error::invalid(format!("unknown claim form `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Relative tolerance of every comparison.
    pub tolerance: f64,
    pub constants: Constants,
    pub type_constants: TypeConstants,
    pub form: ClaimForm,
    pub seed: u64,
    /// Run configuration echoed into the provenance block.
    pub config: Option<serde_json::Value>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            constants: Constants::default(),
            type_constants: TypeConstants::default(),
            form: ClaimForm::Auto,
            seed: 0,
            config: None,
        }
    }
}

impl VerifyOptions {
    fn check(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// `a ≤ b` up to relative tolerance `tol`.
pub(crate) fn le_tol(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs())
}

/// Convexity of the raw input. Closed forms are convex; tables are checked
/// together with their zero tail.
pub(crate) fn input_is_convex(seq: &DecaySequence) -> bool {
    match seq.generator() {
        Generator::Geometric { .. } | Generator::Power { .. } => true,
        Generator::Table { values } => {
            let mut v = values.clone();
            v.extend([0.0, 0.0]);
            check_convexity(&v).unwrap_or(false)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub m: usize,
    pub block: usize,
    /// Position of m relative to the block threshold m_k: `i` for m ≤ m_k,
    /// `ii` for m > m_k ≥ n_k/3, `iii` otherwise.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<String>,
    pub claimed_lower: f64,
    pub certified_lower: f64,
    pub certified_upper: f64,
    pub claimed_upper: f64,
    pub pass: bool,
}

/// A report-level assertion that is not tied to one m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl NamedCheck {
    pub(crate) fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub indices: Vec<usize>,
    pub thresholds: Vec<Option<usize>>,
    /// Blocks the claims are checked for; any further block is look-ahead.
    pub blocks_checked: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub minorant_horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chord_horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    pub kg: f64,
    pub p: f64,
    pub kappa_p: f64,
    /// Constant of the claimed lower bound actually asserted.
    pub c_lower: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub gauss_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub sequence: String,
    pub seed: u64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
}

impl Provenance {
    pub(crate) fn new(sequence: String, opts: &VerifyOptions) -> Self {
        Self {
            tool_version: crate::TOOL_VERSION.into(),
            sequence,
            seed: opts.seed,
            tolerance: opts.tolerance,
            config: opts.config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckReport {
    pub theorem: String,
    pub instantiation: String,
    pub sequence: String,
    pub claim_form: ClaimForm,
    /// `exact` when certified values are the model's s-numbers, `bounds`
    /// when they come from block restriction and rank splitting.
    pub certification: String,
    pub plan: PlanSummary,
    pub per_index: Vec<CheckRow>,
    pub checks: Vec<NamedCheck>,
    pub constants_used: ConstantsUsed,
    pub provenance: Provenance,
    pub overall_pass: bool,
}

impl TheoremCheckReport {
    pub fn failing_rows(&self) -> impl Iterator<Item = &CheckRow> {
        self.per_index.iter().filter(|r| !r.pass)
    }
}

/// Common output surface of all verification reports.
pub trait Report: Serialize {
    fn is_empty(&self) -> bool;
    fn overall_pass(&self) -> bool;
    fn csv(&self) -> String;
    /// Whitespace-separated columns with a `#` header line.
    fn plot_data(&self) -> String;

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }
}

impl Report for TheoremCheckReport {
    fn is_empty(&self) -> bool {
        self.per_index.is_empty()
    }

    fn overall_pass(&self) -> bool {
        self.overall_pass
    }

    fn csv(&self) -> String {
        let mut s = String::from("m,block,case,claimed_lower,certified_lower,certified_upper,claimed_upper,pass\n");
        for r in &self.per_index {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:e},{:e},{}",
                r.m,
                r.block,
                r.case.as_deref().unwrap_or(""),
                r.claimed_lower,
                r.certified_lower,
                r.certified_upper,
                r.claimed_upper,
                r.pass
            );
        }
        s
    }

    fn plot_data(&self) -> String {
        let mut s = String::from("# m claimed_lower certified_lower certified_upper claimed_upper\n");
        for r in &self.per_index {
            let _ = writeln!(
                s,
                "{} {:e} {:e} {:e} {:e}",
                r.m, r.claimed_lower, r.certified_lower, r.certified_upper, r.claimed_upper
            );
        }
        s
    }
}

/// Output locations for [`emit_report`]; `None` skips that artifact.
#[derive(Debug, Clone, Default)]
pub struct ReportPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_report<R: Report>(report: &R, paths: &ReportPaths) -> Result<()> {
    if report.is_empty() {
        return Err(Error::invalid("refusing to emit an empty report"));
    }
    if let Some(p) = &paths.json {
        write_file(p, &report.to_json())?;
    }
    if let Some(p) = &paths.csv {
        write_file(p, &report.csv())?;
    }
    if let Some(p) = &paths.plot {
        write_file(p, &report.plot_data())?;
    }
    Ok(())
}
