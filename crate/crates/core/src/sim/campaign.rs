//! Monte-Carlo campaigns over the simulation protocols.
//!
//! Every trial derives its random streams (source families, sources, mixing,
//! test-points, outliers, noise) from `(master seed, trial index)`. Conditions
//! of one campaign therefore share sources and mixing matrices trial by trial,
//! and records are ordered by condition, trial and algorithm regardless of the
//! parallel schedule.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{MticaError, Result};
use crate::jd::JdOptions;
use crate::rng::SeedStream;
use crate::separation::{exponential_mtica, gaussian_mtica, SeparationEstimate};

use super::amari::amari_error;
use super::corrupt::{db_to_linear, gen_mixing, inject_outliers, mix, noisy_mix};
use super::sources::{sample_sources, SourceFamily, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// All channels share one law; one condition per law.
    SensitivityIdentical,
    /// Each channel's law is drawn uniformly from the family pool.
    SensitivityRandom,
    /// Random laws, `±magnitude` outliers added after mixing; one condition per count.
    Outliers,
    /// Random laws, additive uniform noise; one condition per SNR.
    Mismatch,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SensitivityIdentical => "sensitivity-identical",
            Experiment::SensitivityRandom => "sensitivity-random",
            Experiment::Outliers => "outliers",
            Experiment::Mismatch => "mismatch",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = MticaError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Experiment::SensitivityIdentical,
            Experiment::SensitivityRandom,
            Experiment::Outliers,
            Experiment::Mismatch,
        ]
        .into_iter()
        .find(|e| e.name() == s.trim())
        .ok_or_else(|| MticaError::InvalidParameter {
            name: "experiment",
            reason: format!("unknown experiment `{s}`"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Exponential MTICA (no whitening, non-orthogonal diagonalization).
    Emtica,
    /// Gaussian MTICA (whitening, orthogonal diagonalization).
    Gmtica,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Emtica => "emtica",
            Algorithm::Gmtica => "gmtica",
        }
    }

    /// Runs the algorithm with a test-point stream keyed by the algorithm name.
    pub fn separate(
        self,
        data: &DataMatrix,
        m: usize,
        tau: f64,
        seeds: &SeedStream,
        jd: &JdOptions,
    ) -> Result<SeparationEstimate> {
        let mut rng = seeds.stream(self.testpoint_label(), 0);
        match self {
            Algorithm::Emtica => exponential_mtica(data, m, &mut rng, jd),
            Algorithm::Gmtica => gaussian_mtica(data, m, tau, &mut rng, jd),
        }
    }

    fn testpoint_label(self) -> &'static str {
        match self {
            Algorithm::Emtica => "testpoints-emtica",
            Algorithm::Gmtica => "testpoints-gmtica",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = MticaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "emtica" | "exponential" => Ok(Algorithm::Emtica),
            "gmtica" | "gaussian" => Ok(Algorithm::Gmtica),
            other => Err(MticaError::InvalidParameter {
                name: "algorithm",
                reason: format!("unknown algorithm `{other}`"),
            }),
        }
    }
}

/// Simulation campaign parameters. Defaults follow the published protocol
/// except for the trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub p: usize,
    /// Test-points per algorithm.
    pub m: usize,
    /// Gaussian MT-function width.
    pub tau: f64,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Laws swept (identical experiment) or drawn from (other experiments).
    pub families: Vec<SourceFamily>,
    /// Fixed per-channel laws; overrides the random draw when set.
    pub sources: Option<Vec<SourceFamily>>,
    pub outlier_grid: Vec<usize>,
    pub outlier_magnitude: f64,
    pub snr_grid_db: Vec<f64>,
    pub cond_range: [f64; 2],
    pub jd_max_iter: usize,
    pub jd_tol: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::SensitivityIdentical,
            n: 1000,
            p: 5,
            m: 30,
            tau: 1.0,
            trials: 50,
            seed: 0,
            algorithms: vec![Algorithm::Emtica, Algorithm::Gmtica],
            families: SourceFamily::ALL.to_vec(),
            sources: None,
            outlier_grid: vec![0, 5, 10, 15, 20, 25],
            outlier_magnitude: 5.0,
            snr_grid_db: (0..=6).map(|k| 2.0 * k as f64).collect(),
            cond_range: [1.0, 2.0],
            jd_max_iter: 500,
            jd_tol: 1e-10,
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> MticaError {
    MticaError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl CampaignConfig {
    pub fn jd_options(&self) -> JdOptions {
        JdOptions {
            max_iter: self.jd_max_iter,
            tol: self.jd_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("p", self.p),
            ("m", self.m),
            ("trials", self.trials),
            ("jd_max_iter", self.jd_max_iter),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.n <= self.p {
            return Err(invalid(
                "n",
                format!("need more samples than channels (n = {}, p = {})", self.n, self.p),
            ));
        }
        if self.algorithms.contains(&Algorithm::Emtica) && self.m < 2 {
            return Err(invalid("m", "emtica needs at least 2 test-points"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.jd_tol.is_finite() && self.jd_tol > 0.0) {
            return Err(invalid("jd_tol", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "select at least one algorithm"));
        }
        if self.families.is_empty() {
            return Err(invalid("families", "must not be empty"));
        }
        if let Some(src) = &self.sources {
            if src.len() != self.p {
                return Err(invalid(
                    "sources",
                    format!("{} source laws given but p = {}", src.len(), self.p),
                ));
            }
        }
        let [lo, hi] = self.cond_range;
        if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
            return Err(invalid("cond_range", format!("need 1 <= lo < hi, got [{lo}, {hi}]")));
        }
        match self.experiment {
            Experiment::Outliers => {
                if self.outlier_grid.is_empty() {
                    return Err(invalid("outlier_grid", "must not be empty"));
                }
                if let Some(&k) = self.outlier_grid.iter().find(|&&k| k > self.n) {
                    return Err(invalid("outlier_grid", format!("count {k} exceeds n = {}", self.n)));
                }
                if !self.outlier_magnitude.is_finite() {
                    return Err(invalid("outlier_magnitude", "must be finite"));
                }
            }
            Experiment::Mismatch => {
                if self.snr_grid_db.is_empty() {
                    return Err(invalid("snr_grid_db", "must not be empty"));
                }
                if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("snr_grid_db", "values must be finite"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        match self.experiment {
            Experiment::SensitivityIdentical => self.families.iter().map(|&f| Condition::Family(f)).collect(),
            Experiment::SensitivityRandom => vec![Condition::Random],
            Experiment::Outliers => self.outlier_grid.iter().map(|&k| Condition::Outliers(k)).collect(),
            Experiment::Mismatch => self.snr_grid_db.iter().map(|&db| Condition::SnrDb(db)).collect(),
        }
    }
}

/// One grid point of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Family(SourceFamily),
    Random,
    Outliers(usize),
    SnrDb(f64),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Family(f) => f.name().to_string(),
            Condition::Random => "random".to_string(),
            Condition::Outliers(k) => format!("outliers={k}"),
            Condition::SnrDb(db) => format!("snr_db={db}"),
        }
    }
}

/// One algorithm run on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub condition: String,
    pub trial: usize,
    /// Seed of the trial's stream family.
    pub seed: u64,
    pub algorithm: Algorithm,
    pub source_families: Vec<SourceFamily>,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    /// `None` when the run failed; see `notes`.
    pub amari: Option<f64>,
    pub runtime_ms: f64,
    pub jd_iterations: usize,
    pub converged: bool,
    pub notes: String,
}

struct TrialData {
    families: Vec<SourceFamily>,
    mixing: DMatrix<f64>,
    observations: DataMatrix,
}

fn trial_data(cfg: &CampaignConfig, condition: &Condition, seeds: &SeedStream) -> Result<TrialData> {
    let p = cfg.p;
    let families = match (condition, &cfg.sources) {
        (Condition::Family(f), _) => vec![*f; p],
        (_, Some(fixed)) => fixed.clone(),
        _ => {
            let mut rng = seeds.stream("families", 0);
            (0..p)
                .map(|_| cfg.families[rng.random_range(0..cfg.families.len())])
                .collect()
        }
    };
    let specs: Vec<SourceSpec> = families.iter().map(|&f| SourceSpec::new(f)).collect();
    let sources = sample_sources(&specs, cfg.n, &mut seeds.stream("sources", 0))?;
    let mixing = gen_mixing(
        p,
        (cfg.cond_range[0], cfg.cond_range[1]),
        &mut seeds.stream("mixing", 0),
    )?;
    let observations = match *condition {
        Condition::SnrDb(db) => noisy_mix(&mixing, &sources, db_to_linear(db), &mut seeds.stream("noise", 0))?,
        Condition::Outliers(k) => inject_outliers(
            &mix(&mixing, &sources)?,
            k,
            cfg.outlier_magnitude,
            &mut seeds.stream("outliers", 0),
        )?,
        _ => mix(&mixing, &sources)?,
    };
    Ok(TrialData {
        families,
        mixing,
        observations,
    })
}

/// Runs every configured algorithm on one trial. Failures are recorded in
/// the returned records, never propagated.
pub fn run_trial(cfg: &CampaignConfig, condition: &Condition, trial: usize) -> Vec<TrialRecord> {
    let seeds = SeedStream::new(cfg.seed).child("trial", trial as u64);
    let record = |algorithm: Algorithm, families: Vec<SourceFamily>| TrialRecord {
        condition: condition.label(),
        trial,
        seed: seeds.seed(),
        algorithm,
        source_families: families,
        n: cfg.n,
        p: cfg.p,
        m: cfg.m,
        amari: None,
        runtime_ms: 0.0,
        jd_iterations: 0,
        converged: false,
        notes: String::new(),
    };

    let data = match trial_data(cfg, condition, &seeds) {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .algorithms
                .iter()
                .map(|&a| TrialRecord {
                    notes: format!("data generation failed: {e}"),
                    ..record(a, Vec::new())
                })
                .collect()
        }
    };
    let truth = data.mixing.clone().try_inverse();
    let jd = cfg.jd_options();

    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let mut rec = record(algorithm, data.families.clone());
            let start = Instant::now();
            let outcome = algorithm.separate(&data.observations, cfg.m, cfg.tau, &seeds, &jd);
            rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok(est) => {
                    rec.jd_iterations = est.jd.iterations;
                    rec.converged = est.jd.converged;
                    let mut notes = Vec::new();
                    if !est.dropped.is_empty() {
                        notes.push(format!("dropped={}", est.dropped.len()));
                    }
                    if est.degenerate {
                        notes.push("degenerate-spectrum".to_string());
                    }
                    match truth.as_ref().map(|b| amari_error(&est.b, b)) {
                        Some(Ok(d)) => rec.amari = Some(d),
                        Some(Err(e)) => notes.push(format!("amari failed: {e}")),
                        None => notes.push("mixing matrix not invertible".to_string()),
                    }
                    rec.notes = notes.join(";");
                }
                Err(e) => rec.notes = format!("error: {e}"),
            }
            rec
        })
        .collect()
}

/// Five-number summary plus mean of the Amari errors of one
/// `(condition, algorithm)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<ConditionSummary>,
}

impl CampaignResult {
    pub fn cell(&self, condition: &str, algorithm: Algorithm) -> Option<&ConditionSummary> {
        self.summary
            .iter()
            .find(|s| s.condition == condition && s.algorithm == algorithm)
    }

    /// Successful Amari errors of one cell, in trial order.
    pub fn errors(&self, condition: &str, algorithm: Algorithm) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.condition == condition && r.algorithm == algorithm)
            .filter_map(|r| r.amari)
            .collect()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(cfg: &CampaignConfig, records: &[TrialRecord]) -> Vec<ConditionSummary> {
    let mut out = Vec::new();
    for condition in cfg.conditions() {
        let label = condition.label();
        for &algorithm in &cfg.algorithms {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.condition == label && r.algorithm == algorithm)
                .collect();
            let mut errs: Vec<f64> = cell.iter().filter_map(|r| r.amari).collect();
            errs.sort_by(f64::total_cmp);
            let stat = |q: f64| (!errs.is_empty()).then(|| quantile(&errs, q));
            out.push(ConditionSummary {
                condition: label.clone(),
                algorithm,
                trials: cell.len(),
                failures: cell.len() - errs.len(),
                mean: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                min: stat(0.0),
                q1: stat(0.25),
                median: stat(0.5),
                q3: stat(0.75),
                max: stat(1.0),
            });
        }
    }
    out
}

/// Runs every `(condition, trial)` pair, in parallel on at most `jobs`
/// threads (all available cores when `None`).
pub fn run_experiment(cfg: &CampaignConfig, jobs: Option<usize>) -> Result<CampaignResult> {
    cfg.validate()?;
    let tasks: Vec<(Condition, usize)> = cfg
        .conditions()
        .into_iter()
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let run = || -> Vec<TrialRecord> {
        tasks
            .par_iter()
            .map(|(c, t)| run_trial(cfg, c, *t))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    let records = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| invalid("jobs", e.to_string()))?
            .install(run),
        None => run(),
    };
    let summary = summarize(cfg, &records);
    Ok(CampaignResult { records, summary })
}
