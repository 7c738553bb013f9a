use super::params::{Layout, Params};
use super::{RunOutcome, TrainConfig};
use crate::dist::floored_ln;
use crate::error::Result;
use crate::models::GenerativeModel;

/// One EM iteration in place. Returns the log likelihood of the parameters
/// *before* the update.
pub(crate) fn em_iteration(params: &mut Params, layout: &Layout, support: &[(usize, f64)]) -> f64 {
    let lt = layout.lat_total();
    let (mut counts, mut w) = Params::zero_counts(layout);
    let mut row = vec![0.0; lt];
    let mut ll = 0.0;
    for &(x, px_data) in support {
        let px = params.joint_row(layout, x, &mut row);
        ll += px_data * floored_ln(px);
        if px <= 0.0 {
            continue;
        }
        let xd = &layout.obs_digits[x];
        let scale = px_data / px;
        for (y, &pxy) in row.iter().enumerate() {
            let r = pxy * scale;
            if r == 0.0 {
                continue;
            }
            w[y] += r;
            for (i, c) in counts.iter_mut().enumerate() {
                c[y * layout.obs_cards()[i] + xd[i]] += r;
            }
        }
    }
    params.maximize(layout, &counts, &w);
    ll
}

pub(crate) fn loglik_of(params: &Params, layout: &Layout, support: &[(usize, f64)]) -> f64 {
    let mut row = vec![0.0; layout.lat_total()];
    support
        .iter()
        .map(|&(x, p)| p * floored_ln(params.joint_row(layout, x, &mut row)))
        .sum()
}

/// Single EM run from `init` until the log-likelihood change drops below
/// `config.tol` or `config.max_iters` updates have been made.
pub fn em_run(init: &GenerativeModel, pdata: &crate::dist::Pmf, config: &TrainConfig) -> Result<RunOutcome> {
    let layout = Layout::new(init.shape());
    let support = super::params::data_support(pdata);
    let mut params = Params::from_model(init);
    let mut trace = Vec::new();
    let mut converged = false;
    for it in 0..config.max_iters {
        let ll = em_iteration(&mut params, &layout, &support);
        trace.push(ll);
        if it > 0 && (ll - trace[it - 1]).abs() < config.tol {
            converged = true;
            break;
        }
    }
    let final_loglik = loglik_of(&params, &layout, &support);
    Ok(RunOutcome {
        iters_run: trace.len(),
        model: params.to_model(&layout)?,
        final_loglik,
        loglik_trace: trace,
        converged,
    })
}
