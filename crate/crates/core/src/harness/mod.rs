//! Experiment registry, JSON configuration, report emission and the
//! `run` entry point behind the CLI.
//!
//! A run evaluates one registered experiment on the configured grid and,
//! with refinement enabled, again on the grid with `2N - 1` points per axis.
//! Everything written to `report.json` and `cases.csv` is a function of the
//! configuration alone; wall time goes to a separate `timing.json`.

mod experiments;
pub mod family;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::maximal::{BumpSpec, ScaleLadder};
use crate::weights::WeightFamily;

pub use experiments::{equivalence_norms, EquivalenceNorms};

/// Version of the on-disk report layout.
pub const REPORT_FORMAT: u32 = 1;

/// Exit status of [`run_cli`].
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    Theorem1Equivalence,
    Lemma21Properties,
    Lemma32Boundedness,
    MaximalBoundedness,
    KernelBound36,
    AtomDecay37,
    AtomH1Bound35,
    TheoremC,
    Corollary1,
    WeightDuality,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        Self::Theorem1Equivalence,
        Self::Lemma21Properties,
        Self::Lemma32Boundedness,
        Self::MaximalBoundedness,
        Self::KernelBound36,
        Self::AtomDecay37,
        Self::AtomH1Bound35,
        Self::TheoremC,
        Self::Corollary1,
        Self::WeightDuality,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Theorem1Equivalence => "theorem1-equivalence",
            Self::Lemma21Properties => "lemma21-properties",
            Self::Lemma32Boundedness => "lemma32-boundedness",
            Self::MaximalBoundedness => "maximal-boundedness",
            Self::KernelBound36 => "kernel-bound-36",
            Self::AtomDecay37 => "atom-decay-37",
            Self::AtomH1Bound35 => "atom-h1-bound-35",
            Self::TheoremC => "theoremC",
            Self::Corollary1 => "corollary1",
            Self::WeightDuality => "weight-duality",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// Relative refinement tolerance used when the config leaves it unset.
    fn default_refine_rtol(&self) -> f64 {
        match self {
            Self::Lemma21Properties | Self::WeightDuality => 0.05,
            Self::Theorem1Equivalence => 0.20,
            Self::KernelBound36 => 0.25,
            _ => 0.30,
        }
    }

    fn default_weights(&self) -> Vec<WeightFamily> {
        let exp = WeightFamily::Exponential { c: 1.0 };
        match self {
            Self::MaximalBoundedness | Self::Lemma32Boundedness => vec![WeightFamily::Constant, exp],
            Self::WeightDuality => vec![
                WeightFamily::Constant,
                exp,
                WeightFamily::PowerLog { alpha: 1.0, beta: 1.0 },
                WeightFamily::Power { a: -0.5 },
            ],
            _ => vec![exp],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownExperiment {
                id: s.to_string(),
                valid: Self::valid_ids(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_half_width", rename = "L", alias = "half_width")]
    pub half_width: f64,
    #[serde(default = "default_n", rename = "N", alias = "n")]
    pub n: usize,
}

fn default_dim() -> usize {
    1
}
fn default_half_width() -> f64 {
    8.0
}
fn default_n() -> usize {
    257
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            half_width: default_half_width(),
            n: default_n(),
        }
    }
}

impl GridParams {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.half_width, self.n)
    }
}

/// A single weight family or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSelection {
    One(WeightFamily),
    Many(Vec<WeightFamily>),
}

impl WeightSelection {
    pub fn families(&self) -> Vec<WeightFamily> {
        match self {
            Self::One(w) => vec![*w],
            Self::Many(v) => v.clone(),
        }
    }
}

fn default_ladder() -> ScaleLadder {
    ScaleLadder::new(0.125, 2.0)
}

fn default_seed() -> u64 {
    1
}

/// Experiment-specific knobs. Unset options are filled per experiment
/// before the run and echoed in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Exponents `p` for the weight constants.
    #[serde(default)]
    pub exponents: Option<Vec<f64>>,
    /// Side bound of the local cubes.
    #[serde(default = "one")]
    pub max_side: f64,
    /// Larger side bound for the locality comparison.
    #[serde(default = "four")]
    pub locality_side: f64,
    /// Side of the cube `Q` in the growth fit.
    #[serde(default = "one")]
    pub growth_side: f64,
    #[serde(default = "eight")]
    pub growth_t_max: f64,
    #[serde(default = "eighth")]
    pub growth_step: f64,
    #[serde(default)]
    pub n_atoms: Option<usize>,
    #[serde(default = "twenty")]
    pub n_bumps: usize,
    /// Atom integrability exponent.
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    /// Clearance between atom cubes and the box edge.
    #[serde(default = "three")]
    pub margin: f64,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    /// Values of θ held to the two-δ refinement rule.
    #[serde(default = "default_stable_thetas")]
    pub stable_thetas: Vec<f64>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn four() -> f64 {
    4.0
}
fn eight() -> f64 {
    8.0
}
fn eighth() -> f64 {
    0.125
}
fn twenty() -> usize {
    20
}
fn default_thetas() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn default_stable_thetas() -> Vec<f64> {
    vec![0.25, 0.5]
}

impl Default for Params {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all params have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest admissible max/min ratio spread.
    #[serde(default = "default_spread")]
    pub spread_max: f64,
    /// Relative change allowed under refinement; unset means the
    /// experiment's default.
    #[serde(default)]
    pub refine_rtol: Option<f64>,
    /// Largest relative residual of the log-linear growth fit.
    #[serde(default = "default_fit")]
    pub fit_residual: f64,
    /// Required factor between the constants at the two side bounds.
    #[serde(default = "two")]
    pub locality_factor: f64,
    #[serde(default = "default_duality")]
    pub duality_rtol: f64,
}

fn default_spread() -> f64 {
    50.0
}
fn default_fit() -> f64 {
    0.10
}
fn default_duality() -> f64 {
    1e-10
}

impl Default for Thresholds {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all thresholds have defaults")
    }
}

/// One experiment run, as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub weight: Option<WeightSelection>,
    #[serde(default)]
    pub bump: BumpSpec,
    #[serde(default = "default_ladder")]
    pub ladder: ScaleLadder,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            experiment: id.as_str().to_string(),
            grid: GridParams::default(),
            weight: None,
            bump: BumpSpec::default(),
            ladder: default_ladder(),
            seed: default_seed(),
            refine: false,
            output: None,
            params: Params::default(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn id(&self) -> Result<ExperimentId> {
        self.experiment.parse()
    }

    /// Fills every unset knob with the experiment's default, using the
    /// configured (unrefined) grid, so a refined rerun sees the same values.
    pub fn resolved(&self) -> Result<Self> {
        let id = self.id()?;
        let grid = self.grid.build()?;
        let h = grid.spacing();
        let mut out = self.clone();
        if out.weight.is_none() {
            out.weight = Some(WeightSelection::Many(id.default_weights()));
        }
        for wf in out.weights() {
            wf.validate(grid.dim())?;
        }
        let p = &mut out.params;
        p.exponents.get_or_insert_with(|| match id {
            ExperimentId::WeightDuality => vec![1.5, 2.0, 3.0, 4.0],
            _ => vec![1.0, 1.5, 2.0, 4.0],
        });
        p.n_atoms.get_or_insert(match id {
            ExperimentId::AtomH1Bound35 => 100,
            _ => 50,
        });
        let unit = grid.placement_unit();
        p.r_max.get_or_insert(match id {
            ExperimentId::AtomDecay37 => 0.5,
            _ => 2.0,
        });
        p.r_min.get_or_insert(match id {
            ExperimentId::AtomDecay37 | ExperimentId::AtomH1Bound35 => (8.0 * h).max(2.0 * unit),
            _ => 0.25,
        });
        out.thresholds.refine_rtol.get_or_insert(id.default_refine_rtol());
        Ok(out)
    }

    pub fn weights(&self) -> Vec<WeightFamily> {
        self.weight.as_ref().map(|w| w.families()).unwrap_or_default()
    }

    pub(crate) fn refine_rtol(&self) -> f64 {
        self.thresholds.refine_rtol.unwrap_or(0.3)
    }
}

/// Per-case record: descriptor, named measurements and the case ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: usize,
    pub descriptor: String,
    pub values: BTreeMap<String, f64>,
    /// `None` when the case was skipped (zero denominator).
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub rule: String,
}

impl Criterion {
    pub(crate) fn new(name: impl Into<String>, passed: bool, value: Option<f64>, threshold: Option<f64>, rule: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold,
            rule: rule.into(),
        }
    }

    /// `value <= threshold`, failing on non-finite values.
    pub(crate) fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value.is_finite() && value <= threshold, Some(value), Some(threshold), "value <= threshold")
    }

    pub(crate) fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value.is_finite() && value >= threshold, Some(value), Some(threshold), "value >= threshold")
    }

    pub(crate) fn finite(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value.is_finite(), Some(value), None, "finite")
    }
}

/// How a summary metric is compared between the grid and its refinement.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Stability {
    /// `|fine - coarse| / |coarse| < rtol`
    Relative { metric: String, rtol: f64 },
    /// `|fine - coarse| <= band_coarse + band_fine`
    Band { metric: String, band: String },
}

/// What an experiment hands back for one grid.
#[derive(Clone, Debug, Default)]
pub(crate) struct Outcome {
    pub columns: Vec<String>,
    pub cases: Vec<CaseRecord>,
    pub metrics: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    pub stability: Vec<Stability>,
    pub family_version: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub n: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Relative change for `Relative` checks, absolute change for band
    /// checks.
    pub deltas: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub skipped: usize,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub refinement: Option<Refinement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: u32,
    pub experiment: String,
    pub family_version: Option<String>,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub cases: Vec<CaseRecord>,
    pub summary: Summary,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.summary.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The per-case table: `case_id, descriptor, <columns>, ratio`.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["case_id".to_string(), "descriptor".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("ratio".into());
        wtr.write_record(&header)?;
        for c in &self.cases {
            let mut row = vec![c.case_id.to_string(), c.descriptor.clone()];
            for col in &self.columns {
                row.push(c.values.get(col).map(|v| fmt_f64(*v)).unwrap_or_default());
            }
            row.push(c.ratio.map(fmt_f64).unwrap_or_default());
            wtr.write_record(&row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

fn stability_criteria(checks: &[Stability], coarse: &Outcome, fine: &Outcome) -> (Vec<Criterion>, BTreeMap<String, f64>) {
    let mut out = Vec::new();
    let mut deltas = BTreeMap::new();
    let get = |o: &Outcome, k: &str| o.metrics.get(k).copied().unwrap_or(f64::NAN);
    for check in checks {
        match check {
            Stability::Relative { metric, rtol } => {
                let (a, b) = (get(coarse, metric), get(fine, metric));
                let delta = if a == b { 0.0 } else { (b - a).abs() / a.abs() };
                deltas.insert(metric.clone(), delta);
                out.push(Criterion::new(
                    format!("refinement:{metric}"),
                    delta.is_finite() && delta < *rtol,
                    Some(delta),
                    Some(*rtol),
                    "|fine - coarse| / |coarse| < threshold",
                ));
            }
            Stability::Band { metric, band } => {
                let (a, b) = (get(coarse, metric), get(fine, metric));
                let allowed = get(coarse, band) + get(fine, band);
                let delta = (b - a).abs();
                deltas.insert(metric.clone(), delta);
                out.push(Criterion::new(
                    format!("refinement:{metric}"),
                    delta.is_finite() && delta <= allowed,
                    Some(delta),
                    Some(allowed),
                    "|fine - coarse| <= band coarse + band fine",
                ));
            }
        }
    }
    (out, deltas)
}

/// Runs a configuration in memory. The config is resolved first; the
/// returned report echoes the resolved values.
pub fn run_config(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let config = config.resolved()?;
    let id = config.id()?;
    let grid = config.grid.build()?;
    let coarse = experiments::dispatch(id, &config, grid)?;

    let mut criteria = coarse.criteria.clone();
    let refinement = if config.refine {
        let fine_grid = grid.refined();
        let fine = experiments::dispatch(id, &config, fine_grid)?;
        let (checks, deltas) = stability_criteria(&coarse.stability, &coarse, &fine);
        criteria.extend(checks);
        Some(Refinement {
            n: fine_grid.n(),
            metrics: fine.metrics,
            deltas,
        })
    } else {
        None
    };

    let mut ratios: Vec<f64> = coarse.cases.iter().filter_map(|c| c.ratio).filter(|r| r.is_finite()).collect();
    ratios.sort_by(f64::total_cmp);
    let summary = Summary {
        cases: coarse.cases.len(),
        skipped: coarse.cases.iter().filter(|c| c.ratio.is_none()).count(),
        min_ratio: ratios.first().copied(),
        max_ratio: ratios.last().copied(),
        median_ratio: median(&ratios),
        metrics: coarse.metrics,
        refinement,
    };
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        format: REPORT_FORMAT,
        experiment: id.as_str().to_string(),
        family_version: coarse.family_version,
        config,
        columns: coarse.columns,
        cases: coarse.cases,
        summary,
        criteria,
        passed,
    })
}

/// Paths of the files written by [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub dir: PathBuf,
    pub report_path: PathBuf,
    pub cases_path: PathBuf,
}

/// Loads `config_path`, applies the overrides, runs the experiment and
/// writes `report.json`, `cases.csv` and `timing.json` into the output
/// directory (`out`, else the config's `output`, else `out/<id>`).
pub fn run(config_path: &Path, out: Option<&Path>, seed: Option<u64>, refine: bool) -> Result<RunOutput> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.refine |= refine;
    let id = config.id()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(id.as_str()));
    let started = Instant::now();
    let report = run_config(&config)?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&dir)?;
    let report_path = dir.join("report.json");
    let cases_path = dir.join("cases.csv");
    fs::write(&report_path, report.to_json()?)?;
    fs::write(&cases_path, report.to_csv()?)?;
    let timing = serde_json::json!({ "experiment": id.as_str(), "wall_time_seconds": elapsed });
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(RunOutput {
        report,
        dir,
        report_path,
        cases_path,
    })
}

/// [`run`] mapped to a process exit code, with diagnostics on stderr.
pub fn run_cli(config_path: &Path, out: Option<&Path>, seed: Option<u64>, refine: bool) -> i32 {
    match run(config_path, out, seed, refine) {
        Ok(o) => {
            for c in &o.report.criteria {
                eprintln!(
                    "{} {}{}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value.map(|v| format!(" value={v:.6e}")).unwrap_or_default()
                );
            }
            eprintln!("wrote {} and {}", o.report_path.display(), o.cases_path.display());
            if o.report.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
