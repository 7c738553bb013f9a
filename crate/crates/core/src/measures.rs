//! Evaluation quantities: latent-observed dissimilarity (LOD), data-based
//! and model-based mutual information, and per-sample log likelihood.
//!
//! LOD compares the data distribution `p̃(x)` with the pmf
//! `q(x) ∝ exp(-f(x))`, where `f(x) = -Σ_y p(y|x) ln p(y)` is the expected
//! self-information of the latent layer given `x`. All values are in nats.

use serde::{Deserialize, Serialize};

use crate::dist::{floored_ln, kl_slices, log_sum_exp, Cpt, Pmf, StateSpace, SupportPolicy};
use crate::error::{Error, Result};
use crate::models::GenerativeModel;

/// Which conditional `p(y|x)` the measures use for a CI/ICI model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PosteriorSource {
    /// Exact Bayes posterior of the generative model.
    #[default]
    Generative,
    /// Factorized recognition tables (diagnostic).
    Recognition,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub policy: SupportPolicy,
    pub posterior: PosteriorSource,
}

impl EvalOptions {
    pub fn strict() -> Self {
        EvalOptions {
            policy: SupportPolicy::Strict,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub loglik: f64,
    pub mi: f64,
    pub lod: f64,
}

/// `f(x)`, its normalized exponential `q(x)` and `ln C`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSurprise {
    pub f: Vec<f64>,
    pub q: Pmf,
    pub log_normalizer: f64,
}

impl LatentSurprise {
    /// Builds `q = exp(-f) / C` with `ln C` from a log-sum-exp over `-f`.
    pub fn from_surprise(space: StateSpace, f: Vec<f64>) -> Result<Self> {
        if f.len() != space.total() || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("surprise must be finite and cover every observed state"));
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let log_normalizer = log_sum_exp(&neg);
        let q = neg.iter().map(|v| (v - log_normalizer).exp()).collect();
        Ok(LatentSurprise {
            q: Pmf::from_weights(space, q)?,
            f,
            log_normalizer,
        })
    }

    /// `KL(pdata || q)`.
    pub fn dissimilarity(&self, pdata: &Pmf, policy: SupportPolicy) -> Result<f64> {
        kl_slices(pdata.probs(), self.q.probs(), policy)
    }
}

/// `f(x) = -Σ_y enc(y|x) ln marginal(y)` over every row of `encoder`.
pub(crate) fn encoder_surprise(encoder: &Cpt, marginal: &[f64], policy: SupportPolicy) -> Result<LatentSurprise> {
    let f = (0..encoder.num_rows())
        .map(|x| {
            let row = encoder.row_checked(x)?;
            let mut s = 0.0;
            for (y, (&r, &m)) in row.iter().zip(marginal).enumerate() {
                if r <= 0.0 {
                    continue;
                }
                if m <= 0.0 && policy == SupportPolicy::Strict {
                    return Err(Error::Support { index: y, p: r });
                }
                s -= r * floored_ln(m);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    LatentSurprise::from_surprise(encoder.parent_space().clone(), f)
}

/// `Σ_x w(x) KL(enc(·|x) || marginal)` over the support of `weights`.
pub(crate) fn encoder_mi(encoder: &Cpt, marginal: &[f64], weights: &[f64], policy: SupportPolicy) -> Result<f64> {
    let mut mi = 0.0;
    for (x, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        mi += w * kl_slices(encoder.row_checked(x)?, marginal, policy)?;
    }
    Ok(mi.max(0.0))
}

fn check_space(model: &GenerativeModel, pdata: &Pmf) -> Result<()> {
    if pdata.space() != model.obs_space() {
        return Err(Error::domain(format!(
            "data space {:?} does not match model observed space {:?}",
            pdata.space().cards(),
            model.obs_space().cards()
        )));
    }
    Ok(())
}

fn encoder(model: &GenerativeModel, opts: EvalOptions, required: impl Fn(usize) -> bool) -> Result<Cpt> {
    match opts.posterior {
        PosteriorSource::Generative => model.resolved_posterior(opts.policy, required),
        PosteriorSource::Recognition => model.recognition_posterior(),
    }
}

pub fn expected_latent_information(model: &GenerativeModel, pdata: &Pmf) -> Result<LatentSurprise> {
    expected_latent_information_with(model, pdata, EvalOptions::default())
}

pub fn expected_latent_information_with(
    model: &GenerativeModel,
    pdata: &Pmf,
    opts: EvalOptions,
) -> Result<LatentSurprise> {
    check_space(model, pdata)?;
    // q normalizes over every observed state, so every row is needed
    let enc = encoder(model, opts, |_| true)?;
    encoder_surprise(&enc, model.prior_probs(), opts.policy)
}

/// Latent-observed dissimilarity `KL(p̃ || q)`.
pub fn lod(model: &GenerativeModel, pdata: &Pmf) -> Result<f64> {
    lod_with(model, pdata, EvalOptions::default())
}

pub fn lod_with(model: &GenerativeModel, pdata: &Pmf, opts: EvalOptions) -> Result<f64> {
    expected_latent_information_with(model, pdata, opts)?.dissimilarity(pdata, opts.policy)
}

/// Data-based mutual information `Σ_x p̃(x) KL(p(Y|x) || p(Y))`.
pub fn mi_data(model: &GenerativeModel, pdata: &Pmf) -> Result<f64> {
    mi_data_with(model, pdata, EvalOptions::default())
}

pub fn mi_data_with(model: &GenerativeModel, pdata: &Pmf, opts: EvalOptions) -> Result<f64> {
    check_space(model, pdata)?;
    let enc = encoder(model, opts, |x| pdata.get(x) > 0.0)?;
    encoder_mi(&enc, model.prior_probs(), pdata.probs(), opts.policy)
}

/// Model mutual information `I(X;Y)`, weighting by `p_G(x)`.
pub fn model_mi(model: &GenerativeModel) -> Result<f64> {
    model_mi_with(model, EvalOptions::default())
}

pub fn model_mi_with(model: &GenerativeModel, opts: EvalOptions) -> Result<f64> {
    let weights = model.obs_probs();
    let enc = encoder(model, opts, |x| weights[x] > 0.0)?;
    encoder_mi(&enc, model.prior_probs(), &weights, opts.policy)
}

/// Per-sample log likelihood `Σ_x p̃(x) ln p_G(x)`.
pub fn loglik(model: &GenerativeModel, pdata: &Pmf) -> Result<f64> {
    loglik_with(model, pdata, SupportPolicy::Smoothed)
}

pub fn loglik_with(model: &GenerativeModel, pdata: &Pmf, policy: SupportPolicy) -> Result<f64> {
    check_space(model, pdata)?;
    data_loglik(&model.obs_probs(), pdata, model.obs_space(), policy)
}

pub(crate) fn data_loglik(model_probs: &[f64], pdata: &Pmf, space: &StateSpace, policy: SupportPolicy) -> Result<f64> {
    let mut ll = 0.0;
    for x in pdata.support() {
        let pg = model_probs[x];
        if pg <= 0.0 && policy == SupportPolicy::Strict {
            return Err(Error::ZeroLikelihood {
                state: space.unindex(x),
            });
        }
        ll += pdata.get(x) * floored_ln(pg);
    }
    Ok(ll)
}

/// Log likelihood, data-based MI and LOD in one record.
pub fn evaluate(model: &GenerativeModel, pdata: &Pmf) -> Result<EvalScores> {
    evaluate_with(model, pdata, EvalOptions::default())
}

pub fn evaluate_with(model: &GenerativeModel, pdata: &Pmf, opts: EvalOptions) -> Result<EvalScores> {
    Ok(EvalScores {
        loglik: loglik_with(model, pdata, opts.policy)?,
        mi: mi_data_with(model, pdata, opts)?,
        lod: lod_with(model, pdata, opts)?,
    })
}
