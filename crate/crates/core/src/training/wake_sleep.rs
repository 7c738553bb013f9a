//! Exact-expectation wake-sleep for models with factorized recognition.
//!
//! Each sweep runs a sleep phase, which sets every recognition row
//! `p(y_j | x)` to the `j`-th marginal of the exact generative posterior,
//! followed by a wake phase, which refits the generative tables to the
//! completed data `p̃(x) Π_j p(y_j | x)`. With a single latent variable a
//! sweep is exactly one EM iteration.

use super::em::loglik_of;
use super::params::{data_support, Layout, Params};
use super::{RunOutcome, TrainConfig};
use crate::dist::{kl_slices, Pmf, SupportPolicy};
use crate::error::Result;
use crate::models::GenerativeModel;

/// Sleep phase: recognition rows for every observed state.
pub(crate) fn sleep(params: &mut Params, layout: &Layout) {
    let lt = layout.lat_total();
    let lat_cards = layout.lat_cards().to_vec();
    let mut row = vec![0.0; lt];
    let mut rec = params.rec.take().unwrap_or_else(|| {
        lat_cards
            .iter()
            .map(|&c| vec![0.0; layout.obs_digits.len() * c])
            .collect()
    });
    for x in 0..layout.obs_digits.len() {
        let px = params.joint_row(layout, x, &mut row);
        if px > 0.0 {
            row.iter_mut().for_each(|v| *v /= px);
        } else {
            params.clamped_posterior(layout, x, &mut row);
        }
        for (j, r) in rec.iter_mut().enumerate() {
            let c = lat_cards[j];
            r[x * c..(x + 1) * c].iter_mut().for_each(|v| *v = 0.0);
        }
        for (y, &p) in row.iter().enumerate() {
            for (j, r) in rec.iter_mut().enumerate() {
                r[x * lat_cards[j] + layout.lat_digits[y][j]] += p;
            }
        }
    }
    params.rec = Some(rec);
}

/// `Π_j rec_j(y_j | x)` for every latent state.
fn recognition_row(params: &Params, layout: &Layout, x: usize, out: &mut [f64]) {
    let rec = params.rec.as_ref().expect("recognition tables present");
    let lat_cards = layout.lat_cards();
    for (y, slot) in out.iter_mut().enumerate() {
        *slot = layout.lat_digits[y]
            .iter()
            .enumerate()
            .map(|(j, &d)| rec[j][x * lat_cards[j] + d])
            .product();
    }
}

/// Wake phase: generative refit to the recognition-completed data.
pub(crate) fn wake(params: &mut Params, layout: &Layout, support: &[(usize, f64)]) {
    let (mut counts, mut w) = Params::zero_counts(layout);
    let mut row = vec![0.0; layout.lat_total()];
    for &(x, px_data) in support {
        recognition_row(params, layout, x, &mut row);
        let xd = &layout.obs_digits[x];
        for (y, &r) in row.iter().enumerate() {
            let m = px_data * r;
            if m == 0.0 {
                continue;
            }
            w[y] += m;
            for (i, c) in counts.iter_mut().enumerate() {
                c[y * layout.obs_cards()[i] + xd[i]] += m;
            }
        }
    }
    params.maximize(layout, &counts, &w);
}

/// One sleep + wake sweep. Returns the log likelihood before the sweep.
pub(crate) fn sweep(params: &mut Params, layout: &Layout, support: &[(usize, f64)]) -> f64 {
    let ll = loglik_of(params, layout, support);
    sleep(params, layout);
    wake(params, layout, support);
    ll
}

/// One full sweep on a model, returning the updated model.
pub fn wake_sleep_sweep(model: &GenerativeModel, pdata: &Pmf) -> Result<GenerativeModel> {
    let layout = Layout::new(model.shape());
    let support = data_support(pdata);
    let mut params = Params::from_model(model);
    sweep(&mut params, &layout, &support);
    params.to_model(&layout)
}

/// `Σ_x p̃(x) KL(p_G(y|x) || Π_j p(y_j|x))`.
pub(crate) fn recognition_gap(params: &Params, layout: &Layout, support: &[(usize, f64)]) -> f64 {
    let lt = layout.lat_total();
    let mut post = vec![0.0; lt];
    let mut rec = vec![0.0; lt];
    let mut gap = 0.0;
    for &(x, p) in support {
        let px = params.joint_row(layout, x, &mut post);
        if px <= 0.0 {
            continue;
        }
        post.iter_mut().for_each(|v| *v /= px);
        recognition_row(params, layout, x, &mut rec);
        gap += p * kl_slices(&post, &rec, SupportPolicy::Smoothed).unwrap_or(0.0);
    }
    gap
}

/// Single wake-sleep run from `init`. Log likelihood is not monotone under
/// wake-sleep, so the best iterate seen is returned, with its recognition
/// tables refreshed by a final sleep phase.
pub fn wake_sleep_run(init: &GenerativeModel, pdata: &Pmf, config: &TrainConfig) -> Result<(RunOutcome, f64)> {
    let layout = Layout::new(init.shape());
    let support = data_support(pdata);
    let mut params = Params::from_model(init);
    let mut best = params.clone();
    let mut best_ll = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    for it in 0..config.max_iters {
        let snapshot = params.clone();
        let ll = sweep(&mut params, &layout, &support);
        if ll > best_ll {
            best_ll = ll;
            best = snapshot;
        }
        trace.push(ll);
        if it > 0 && (ll - trace[it - 1]).abs() < config.tol {
            converged = true;
            break;
        }
    }
    let last_ll = loglik_of(&params, &layout, &support);
    if last_ll >= best_ll {
        best_ll = last_ll;
        best = params;
    }
    sleep(&mut best, &layout);
    let gap = recognition_gap(&best, &layout, &support);
    Ok((
        RunOutcome {
            model: best.to_model(&layout)?,
            final_loglik: best_ll,
            iters_run: trace.len(),
            loglik_trace: trace,
            converged,
        },
        gap,
    ))
}
