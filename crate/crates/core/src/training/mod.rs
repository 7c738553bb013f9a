//! Parameter fitting: EM for SL/IL, exact-expectation wake-sleep for CI/ICI,
//! and best-of-restarts selection.

mod em;
mod init;
mod params;
mod wake_sleep;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Pmf;
use crate::error::{Error, Result};
use crate::models::{GenerativeModel, ModelKind, ModelShape};

pub use em::em_run;
pub use init::random_init;
pub use wake_sleep::{wake_sleep_run, wake_sleep_sweep};

/// Restarts whose final log likelihoods differ by less than this are ties.
pub const RESTART_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Em,
    WakeSleep,
}

impl TrainMode {
    pub fn for_kind(kind: ModelKind) -> Self {
        if kind.has_recognition() {
            TrainMode::WakeSleep
        } else {
            TrainMode::Em
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Absolute log-likelihood change (nats per sample) that ends a run.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init_concentration: f64,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iters: 1000,
            tol: 1e-8,
            restarts: 20,
            seed: 0,
            init_concentration: 1.0,
            mode: TrainMode::Em,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::domain("tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::domain("restarts must be at least 1"));
        }
        if self.init_concentration.is_nan() || self.init_concentration <= 0.0 {
            return Err(Error::domain("init_concentration must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig { seed, ..self.clone() }
    }
}

/// Result of a single run from one initialization.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: GenerativeModel,
    pub final_loglik: f64,
    pub iters_run: usize,
    /// Log likelihood before each update.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loglik: f64,
    pub iters_run: usize,
    pub loglik_trace: Vec<f64>,
    pub restart_index_selected: usize,
    pub converged: bool,
    /// Final log likelihood of every restart, in restart order.
    pub restart_logliks: Vec<f64>,
    /// `Σ_x p̃(x) KL(p_G(Y|x) || Π_j p(Y_j|x))` for CI/ICI models.
    pub recognition_gap: Option<f64>,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `iteration,loglik` rows of the selected restart.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,loglik")?;
        for (i, ll) in self.loglik_trace.iter().enumerate() {
            writeln!(out, "{i},{ll}")?;
        }
        Ok(())
    }
}

/// Seed of restart `k`, independent of execution order.
pub fn restart_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul((k as u64).wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index of the best final log likelihood; the lowest index wins ties.
pub fn select_best(logliks: &[f64]) -> usize {
    let mut best = 0;
    for (k, &ll) in logliks.iter().enumerate().skip(1) {
        if ll > logliks[best] + RESTART_TIE_TOL {
            best = k;
        }
    }
    best
}

fn check_inputs(kind: ModelKind, shape: &ModelShape, pdata: &Pmf, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if pdata.space() != &shape.obs {
        return Err(Error::domain("data space does not match the model's observed space"));
    }
    if pdata.support().next().is_none() {
        return Err(Error::domain("data distribution has empty support"));
    }
    if kind == ModelKind::SL && shape.lat.num_vars() != 1 {
        return Err(Error::domain("SL models have a single latent variable"));
    }
    Ok(())
}

fn run_restarts<F>(
    kind: ModelKind,
    shape: &ModelShape,
    config: &TrainConfig,
    run: F,
) -> Result<(GenerativeModel, TrainReport)>
where
    F: Fn(&GenerativeModel) -> Result<(RunOutcome, Option<f64>)> + Sync,
{
    let outcomes = (0..config.restarts)
        .into_par_iter()
        .map(|k| {
            let init = random_init(shape, kind, restart_seed(config.seed, k), config.init_concentration)?;
            run(&init)
        })
        .collect::<Result<Vec<_>>>()?;
    let logliks: Vec<f64> = outcomes.iter().map(|(o, _)| o.final_loglik).collect();
    let best = select_best(&logliks);
    let (outcome, gap) = outcomes.into_iter().nth(best).expect("at least one restart");
    let report = TrainReport {
        final_loglik: outcome.final_loglik,
        iters_run: outcome.iters_run,
        loglik_trace: outcome.loglik_trace,
        restart_index_selected: best,
        converged: outcome.converged,
        restart_logliks: logliks,
        recognition_gap: gap,
    };
    Ok((outcome.model, report))
}

/// EM with random restarts for SL and IL models.
pub fn em_fit(
    kind: ModelKind,
    shape: &ModelShape,
    pdata: &Pmf,
    config: &TrainConfig,
) -> Result<(GenerativeModel, TrainReport)> {
    if kind.has_recognition() {
        return Err(Error::UnsupportedKind(format!("{kind} (EM fits SL and IL)")));
    }
    check_inputs(kind, shape, pdata, config)?;
    run_restarts(kind, shape, config, |init| Ok((em_run(init, pdata, config)?, None)))
}

/// Exact-expectation wake-sleep with random restarts for CI and ICI models.
pub fn wake_sleep_fit(
    kind: ModelKind,
    shape: &ModelShape,
    pdata: &Pmf,
    config: &TrainConfig,
) -> Result<(GenerativeModel, TrainReport)> {
    if !kind.has_recognition() {
        return Err(Error::UnsupportedKind(format!("{kind} (wake-sleep fits CI and ICI)")));
    }
    check_inputs(kind, shape, pdata, config)?;
    run_restarts(kind, shape, config, |init| {
        let (outcome, gap) = wake_sleep_run(init, pdata, config)?;
        Ok((outcome, Some(gap)))
    })
}

/// Dispatches on `config.mode`.
pub fn fit(
    kind: ModelKind,
    shape: &ModelShape,
    pdata: &Pmf,
    config: &TrainConfig,
) -> Result<(GenerativeModel, TrainReport)> {
    match config.mode {
        TrainMode::Em => em_fit(kind, shape, pdata, config),
        TrainMode::WakeSleep => wake_sleep_fit(kind, shape, pdata, config),
    }
}
