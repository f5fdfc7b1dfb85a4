//! Named experiments E1–E6: configuration, execution and CSV output.
//!
//! A run generates one dataset per replication (seed `sim.seed + r`), splits
//! it into train and hold-out, boosts every arm on it and writes
//! `curves_<arm>_<r>.csv` plus an across-replication `summary.csv`.
//! All output is a deterministic function of the resolved configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::Dataset;
use crate::engine::{run_boost, Algorithm, BoostConfig, Ensemble};
use crate::error::{Error, Result};
use crate::fmt::{format_real, round_sig9};
use crate::metrics::{CurvePoint, Split, EXTREME_HI, EXTREME_LO, NLL_CLIP};
use crate::simdata::{generate, split_train_holdout, SimModel, SimSpec};

pub const CURVE_HEADER: &str = "iteration,split,miscl,exp_loss,nll,prob_mse,frac_extreme";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentName {
    #[serde(rename = "E1", alias = "E1_StumpsVsTrees")]
    E1,
    #[serde(rename = "E2", alias = "E2_LongRunNoOverfit")]
    E2,
    #[serde(rename = "E3", alias = "E3_Shrinkage")]
    E3,
    #[serde(rename = "E4", alias = "E4_ProbDivergence")]
    E4,
    #[serde(rename = "E5", alias = "E5_SurrogateMismatch")]
    E5,
    #[serde(rename = "E6", alias = "E6_ModifiedAdaBoost")]
    E6,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::E1,
        ExperimentName::E2,
        ExperimentName::E3,
        ExperimentName::E4,
        ExperimentName::E5,
        ExperimentName::E6,
    ];

    pub fn long_name(self) -> &'static str {
        match self {
            ExperimentName::E1 => "E1_StumpsVsTrees",
            ExperimentName::E2 => "E2_LongRunNoOverfit",
            ExperimentName::E3 => "E3_Shrinkage",
            ExperimentName::E4 => "E4_ProbDivergence",
            ExperimentName::E5 => "E5_SurrogateMismatch",
            ExperimentName::E6 => "E6_ModifiedAdaBoost",
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    /// Accepts `E4`, `e4` or the long form `E4_ProbDivergence`.
    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| {
                s.eq_ignore_ascii_case(e.long_name()) || s.eq_ignore_ascii_case(&format!("{e:?}"))
            })
            .ok_or_else(|| Error::config(format!("unknown experiment {s:?}; expected E1..E6")))
    }
}

/// One boosting configuration within an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    /// Used in file names: letters, digits, `_`, `-` and `.` only.
    pub name: String,
    #[serde(default)]
    pub config: BoostConfig,
}

impl Arm {
    pub fn new(name: &str, config: BoostConfig) -> Self {
        Arm {
            name: name.to_string(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub sim: SimSpec,
    pub arms: Vec<Arm>,
    #[serde(alias = "R")]
    pub replications: usize,
    pub holdout_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 1000 train / 1000 hold-out points, q = 20, J = 5,
    /// M = 1000, R = 10, 8-leaf trees unless the experiment compares sizes.
    pub fn defaults(name: ExperimentName) -> Self {
        let model = match name {
            ExperimentName::E1 => SimModel::LogisticAdditive,
            _ => SimModel::TwoLevel,
        };
        let shrunk = BoostConfig {
            shrinkage: 0.1,
            ..BoostConfig::adaboost(8, 1.0, 1000)
        };
        let arms = match name {
            ExperimentName::E1 => vec![
                Arm::new("stumps", BoostConfig::adaboost(2, 1.0, 1000)),
                Arm::new("trees8", BoostConfig::adaboost(8, 1.0, 1000)),
            ],
            ExperimentName::E2 => vec![Arm::new("trees8", BoostConfig::adaboost(8, 1.0, 1000))],
            ExperimentName::E3 => vec![
                Arm::new("nu1", BoostConfig::adaboost(8, 1.0, 1000)),
                Arm::new("nu0.1", shrunk),
            ],
            ExperimentName::E4 | ExperimentName::E5 => {
                vec![Arm::new("adaboost", BoostConfig::adaboost(8, 1.0, 1000))]
            }
            ExperimentName::E6 => vec![
                Arm::new("lambda1", BoostConfig::adaboost(8, 1.0, 1000)),
                Arm::new("lambda2", BoostConfig::adaboost(8, 2.0, 1000)),
            ],
        };
        ExperimentConfig {
            name,
            sim: SimSpec {
                model,
                n: 2000,
                ..SimSpec::default()
            },
            arms,
            replications: 10,
            holdout_fraction: 0.5,
            out_dir: None,
        }
    }

    /// Merges a JSON document onto the defaults of the named experiment.
    ///
    /// Objects merge key by key, arrays and scalars replace. A top-level
    /// `iterations` key sets `iterations` on every arm. When `name` is given
    /// it must agree with any `name` in the document.
    pub fn from_json(text: &str, name: Option<ExperimentName>) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| Error::config("experiment config must be a JSON object"))?;
        let in_file = match obj.get("name") {
            Some(v) => Some(serde_json::from_value::<ExperimentName>(v.clone())?),
            None => None,
        };
        let name = match (name, in_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config(format!(
                    "--name {a:?} disagrees with config name {b:?}"
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(Error::config("experiment name missing")),
        };
        canonicalize(obj, &[("R", "replications")]);
        if let Some(Value::Object(sim)) = obj.get_mut("sim") {
            canonicalize(sim, &[("active", "J"), ("a", "slope")]);
        }
        let iterations = match obj.remove("iterations") {
            Some(v) => Some(serde_json::from_value::<usize>(v)?),
            None => None,
        };
        let mut merged = serde_json::to_value(ExperimentConfig::defaults(name))?;
        merge(&mut merged, doc);
        let mut cfg: ExperimentConfig = serde_json::from_value(merged)?;
        cfg.name = name;
        if let Some(m) = iterations {
            for arm in &mut cfg.arms {
                arm.config.iterations = m;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim
            .validate()
            .map_err(|e| Error::config(format!("sim: {e}")))?;
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::config("holdout_fraction must lie in (0, 1)"));
        }
        if self.arms.is_empty() {
            return Err(Error::config("at least one arm is required"));
        }
        let mut names = BTreeSet::new();
        for arm in &self.arms {
            let ok = !arm.name.is_empty()
                && arm
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
            if !ok {
                return Err(Error::config(format!("arm name {:?} is not file-safe", arm.name)));
            }
            if !names.insert(arm.name.as_str()) {
                return Err(Error::config(format!("duplicate arm name {:?}", arm.name)));
            }
            arm.config
                .validate()
                .map_err(|e| Error::config(format!("arm {}: {e}", arm.name)))?;
        }
        let adaboost = |f: &dyn Fn(&BoostConfig) -> bool| {
            self.arms
                .iter()
                .any(|a| a.config.algorithm == Algorithm::AdaBoost && f(&a.config))
        };
        match self.name {
            ExperimentName::E1 => {
                let stumps = self.arms.iter().any(|a| a.config.tree.max_leaves == 2);
                let larger = self.arms.iter().any(|a| a.config.tree.max_leaves > 2);
                if self.arms.len() < 2 || !stumps || !larger {
                    return Err(Error::config("E1 needs a stump arm and a larger-tree arm"));
                }
            }
            ExperimentName::E3 => {
                let any = |nu: f64| self.arms.iter().any(|a| a.config.shrinkage == nu);
                if !any(1.0) || !any(0.1) {
                    return Err(Error::config("E3 needs arms with shrinkage 1 and 0.1"));
                }
            }
            ExperimentName::E6 => {
                if !adaboost(&|c| c.step_multiplier == 1.0) || !adaboost(&|c| c.step_multiplier == 2.0)
                {
                    return Err(Error::config("E6 needs AdaBoost arms with step_multiplier 1 and 2"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Renames alias keys to the names the defaults serialize under, so that a
/// merge cannot produce both spellings.
fn canonicalize(obj: &mut serde_json::Map<String, Value>, aliases: &[(&str, &str)]) {
    for (alias, canonical) in aliases {
        if !obj.contains_key(*canonical) {
            if let Some(v) = obj.remove(*alias) {
                obj.insert(canonical.to_string(), v);
            }
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Curves of one arm on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub arm: String,
    pub replication: usize,
    pub curves: Vec<CurvePoint>,
    pub ensemble: Ensemble,
}

/// Per-replication statistics, each `None` when its curve is empty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    pub final_holdout_miscl: Option<f64>,
    pub best_holdout_miscl: Option<f64>,
    pub nll_argmin_iteration: Option<f64>,
    pub miscl_argmin_iteration: Option<f64>,
    pub max_frac_extreme: Option<f64>,
    pub max_exp_loss_drift: Option<f64>,
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "final_holdout_miscl",
    "best_holdout_miscl",
    "nll_argmin_iteration",
    "miscl_argmin_iteration",
    "max_frac_extreme",
    "max_exp_loss_drift",
];

impl RunStats {
    /// Statistics of a curve as written to disk (values rounded to 9
    /// significant digits), so they can be recomputed from the CSV files.
    ///
    /// Argmins take the earliest iteration attaining the minimum. The drift
    /// is the largest relative change of training exp-loss between
    /// consecutive recorded iterations.
    pub fn from_curves(curves: &[CurvePoint]) -> RunStats {
        let hold: Vec<&CurvePoint> = curves.iter().filter(|p| p.split == Split::Holdout).collect();
        let train: Vec<&CurvePoint> = curves.iter().filter(|p| p.split == Split::Train).collect();
        let r = round_sig9;
        let argmin = |key: &dyn Fn(&CurvePoint) -> f64| -> Option<f64> {
            let mut best: Option<(f64, usize)> = None;
            for p in &hold {
                let v = r(key(p));
                if best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, p.iteration));
                }
            }
            best.map(|(_, it)| it as f64)
        };
        let max = |vals: &mut dyn Iterator<Item = f64>| vals.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        RunStats {
            final_holdout_miscl: hold.last().map(|p| r(p.miscl)),
            best_holdout_miscl: max(&mut hold.iter().map(|p| -r(p.miscl))).map(|v| -v),
            nll_argmin_iteration: argmin(&|p| p.nll),
            miscl_argmin_iteration: argmin(&|p| p.miscl),
            max_frac_extreme: max(&mut hold.iter().map(|p| r(p.frac_extreme))),
            max_exp_loss_drift: max(&mut train
                .windows(2)
                .map(|w| ((r(w[1].exp_loss) - r(w[0].exp_loss)) / r(w[0].exp_loss)).abs())),
        }
    }

    fn values(&self) -> [Option<f64>; 6] {
        [
            self.final_holdout_miscl,
            self.best_holdout_miscl,
            self.nll_argmin_iteration,
            self.miscl_argmin_iteration,
            self.max_frac_extreme,
            self.max_exp_loss_drift,
        ]
    }
}

/// Mean and sample standard deviation over the replications where a
/// statistic is defined; the SD of a single value is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSd { mean, sd, count: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub replications: usize,
    /// In the order of [`SUMMARY_COLUMNS`].
    pub stats: [Option<MeanSd>; 6],
}

pub fn summarize(arm: &str, runs: &[&[CurvePoint]]) -> ArmSummary {
    let per_run: Vec<RunStats> = runs.iter().map(|c| RunStats::from_curves(c)).collect();
    let stats = std::array::from_fn(|k| {
        let vals: Vec<f64> = per_run.iter().filter_map(|s| s.values()[k]).collect();
        mean_sd(&vals)
    });
    ArmSummary {
        arm: arm.to_string(),
        replications: runs.len(),
        stats,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Replication-major, arms in configuration order.
    pub runs: Vec<Run>,
    pub summary: Vec<ArmSummary>,
}

impl ExperimentResult {
    pub fn runs_of<'a>(&'a self, arm: &'a str) -> impl Iterator<Item = &'a Run> + 'a {
        self.runs.iter().filter(move |r| r.arm == arm)
    }

    pub fn summary_of(&self, arm: &str) -> Option<&ArmSummary> {
        self.summary.iter().find(|s| s.arm == arm)
    }
}

/// Train and hold-out data of replication `r`.
pub fn replication_data(cfg: &ExperimentConfig, r: usize) -> Result<(Dataset, Dataset)> {
    let seed = cfg.sim.seed.wrapping_add(r as u64);
    let data = generate(&SimSpec {
        seed,
        ..cfg.sim.clone()
    })?;
    split_train_holdout(&data, 1.0 - cfg.holdout_fraction, seed)
}

/// Runs every (replication, arm) pair and, when `out_dir` is given, writes
/// the curve files, `summary.csv` and `experiment.json` there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data: Vec<(Dataset, Dataset)> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replication_data(cfg, r))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, &Arm)> = (0..cfg.replications)
        .flat_map(|r| cfg.arms.iter().map(move |a| (r, a)))
        .collect();
    let runs: Vec<Run> = jobs
        .into_par_iter()
        .map(|(r, arm)| {
            let boost = BoostConfig {
                seed: arm.config.seed.wrapping_add(r as u64),
                ..arm.config.clone()
            };
            let (train, holdout) = &data[r];
            let (ensemble, curves) = run_boost(train, holdout, &boost)?;
            Ok(Run {
                arm: arm.name.clone(),
                replication: r,
                curves,
                ensemble,
            })
        })
        .collect::<Result<_>>()?;
    let summary = cfg
        .arms
        .iter()
        .map(|a| {
            let curves: Vec<&[CurvePoint]> = runs
                .iter()
                .filter(|run| run.arm == a.name)
                .map(|run| run.curves.as_slice())
                .collect();
            summarize(&a.name, &curves)
        })
        .collect();
    let result = ExperimentResult {
        config: cfg.clone(),
        runs,
        summary,
    };
    if let Some(dir) = out_dir {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for run in &result.runs {
        let path = dir.join(format!("curves_{}_{}.csv", run.arm, run.replication));
        write_file(&path, &curves_csv(&run.curves))?;
    }
    write_file(&dir.join("summary.csv"), &summary_csv(&result.summary))?;
    let meta = RunMetadata::new(&result.config);
    write_file(&dir.join("experiment.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

/// Resolved configuration plus the evaluation constants behind the curves.
#[derive(Debug, Serialize)]
pub struct RunMetadata<'a, C: Serialize> {
    pub config: &'a C,
    pub nll_clip: f64,
    pub extreme_lo: f64,
    pub extreme_hi: f64,
    pub prng: &'static str,
}

impl<'a, C: Serialize> RunMetadata<'a, C> {
    pub fn new(config: &'a C) -> Self {
        RunMetadata {
            config,
            nll_clip: NLL_CLIP,
            extreme_lo: EXTREME_LO,
            extreme_hi: EXTREME_HI,
            prng: "ChaCha8",
        }
    }
}

pub fn curves_csv(curves: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.iteration,
            p.split.as_str(),
            format_real(p.miscl),
            format_real(p.exp_loss),
            format_real(p.nll),
            p.prob_mse.map(format_real).unwrap_or_default(),
            format_real(p.frac_extreme),
        );
    }
    out
}

pub fn summary_csv(summary: &[ArmSummary]) -> String {
    let mut out = String::from("arm,replications");
    for c in SUMMARY_COLUMNS {
        let _ = write!(out, ",{c}_mean,{c}_sd");
    }
    out.push('\n');
    for s in summary {
        let _ = write!(out, "{},{}", s.arm, s.replications);
        for st in &s.stats {
            match st {
                Some(m) => {
                    let _ = write!(out, ",{},{}", format_real(m.mean), format_real(m.sd));
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a curve file written by [`curves_csv`].
pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CURVE_HEADER {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected header {CURVE_HEADER}"),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| parse_error(path, line, e))?;
        let real = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("bad number {:?}", &rec[i]),
            })
        };
        let split = match &rec[1] {
            "train" => Split::Train,
            "holdout" => Split::Holdout,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("bad split {other:?}"),
                })
            }
        };
        out.push(CurvePoint {
            iteration: rec[0].parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("bad iteration {:?}", &rec[0]),
            })?,
            split,
            miscl: real(2)?,
            exp_loss: real(3)?,
            nll: real(4)?,
            prob_mse: if rec[5].is_empty() { None } else { Some(real(5)?) },
            frac_extreme: real(6)?,
        });
    }
    Ok(out)
}

fn parse_error(path: &Path, line: u64, e: csv::Error) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: e.to_string(),
    }
}

/// Reads a dataset in the `f1,…,fq,label[,true_prob]` schema.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load_csv(path)
}

/// Fits one configuration, writing `curves.csv`, `ensemble.json` and
/// `run.json` under `out_dir`.
pub fn fit(
    train: &Dataset,
    holdout: &Dataset,
    cfg: &BoostConfig,
    out_dir: &Path,
) -> Result<(Ensemble, Vec<CurvePoint>)> {
    let (ensemble, curves) = run_boost(train, holdout, cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join("curves.csv"), &curves_csv(&curves))?;
    write_file(&out_dir.join("ensemble.json"), &ensemble.to_json())?;
    let meta = RunMetadata::new(cfg);
    write_file(&out_dir.join("run.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok((ensemble, curves))
}
