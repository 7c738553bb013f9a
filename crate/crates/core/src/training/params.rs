//! Flat working copies of model tables used inside the training loops.

use crate::dist::{floored_ln, log_sum_exp, Cpt, Pmf, StateSpace};
use crate::error::Result;
use crate::models::{GenerativeModel, LatentPrior, ModelKind, ModelShape};

#[derive(Clone, Debug)]
pub(crate) struct Params {
    pub kind: ModelKind,
    /// `theta[i][y * K_i + x_i]`.
    pub theta: Vec<Vec<f64>>,
    /// Joint prior over the latent space.
    pub prior: Vec<f64>,
    /// Per-variable prior marginals for factored kinds.
    pub factors: Option<Vec<Vec<f64>>>,
    /// `rec[j][x * L_j + y_j]`.
    pub rec: Option<Vec<Vec<f64>>>,
}

/// Static index tables shared by every iteration on one shape.
pub(crate) struct Layout {
    pub shape: ModelShape,
    pub obs_digits: Vec<Vec<usize>>,
    pub lat_digits: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(shape: &ModelShape) -> Self {
        Layout {
            obs_digits: (0..shape.obs.total()).map(|x| shape.obs.unindex(x)).collect(),
            lat_digits: (0..shape.lat.total()).map(|y| shape.lat.unindex(y)).collect(),
            shape: shape.clone(),
        }
    }

    pub fn obs_cards(&self) -> &[usize] {
        self.shape.obs.cards()
    }

    pub fn lat_cards(&self) -> &[usize] {
        self.shape.lat.cards()
    }

    pub fn lat_total(&self) -> usize {
        self.shape.lat.total()
    }
}

impl Params {
    pub fn from_model(model: &GenerativeModel) -> Self {
        let factors = match model.prior() {
            LatentPrior::Joint(_) => None,
            LatentPrior::Factored(fs) => Some(fs.iter().map(|f| f.probs().to_vec()).collect()),
        };
        Params {
            kind: model.kind(),
            theta: model.theta().iter().map(|t| t.table().to_vec()).collect(),
            prior: model.prior_probs().to_vec(),
            factors,
            rec: model
                .recognition()
                .map(|r| r.iter().map(|c| c.table().to_vec()).collect()),
        }
    }

    pub fn to_model(&self, layout: &Layout) -> Result<GenerativeModel> {
        let shape = &layout.shape;
        let theta = self
            .theta
            .iter()
            .zip(shape.obs.cards())
            .map(|(t, &k)| Cpt::new(StateSpace::single(k)?, shape.lat.clone(), t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let prior = match &self.factors {
            None => LatentPrior::Joint(Pmf::from_weights(shape.lat.clone(), self.prior.clone())?),
            Some(fs) => LatentPrior::Factored(
                fs.iter()
                    .map(|f| Pmf::from_weights(StateSpace::single(f.len())?, f.clone()))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let rec = self
            .rec
            .as_ref()
            .map(|rs| {
                rs.iter()
                    .zip(shape.lat.cards())
                    .map(|(r, &c)| Cpt::new(StateSpace::single(c)?, shape.obs.clone(), r.clone()))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        GenerativeModel::new(self.kind, shape.clone(), theta, prior, rec)
    }

    /// Unnormalized `p(x, y)` for all `y`; returns `p(x)`.
    #[inline]
    pub fn joint_row(&self, layout: &Layout, x: usize, out: &mut [f64]) -> f64 {
        let xd = &layout.obs_digits[x];
        let mut total = 0.0;
        for (y, slot) in out.iter_mut().enumerate() {
            let mut p = self.prior[y];
            for (i, t) in self.theta.iter().enumerate() {
                p *= t[y * layout.obs_cards()[i] + xd[i]];
            }
            *slot = p;
            total += p;
        }
        total
    }

    /// Posterior computed from factors clamped to the probability floor.
    pub fn clamped_posterior(&self, layout: &Layout, x: usize, out: &mut [f64]) {
        let xd = &layout.obs_digits[x];
        for (y, slot) in out.iter_mut().enumerate() {
            let mut l = floored_ln(self.prior[y]);
            for (i, t) in self.theta.iter().enumerate() {
                l += floored_ln(t[y * layout.obs_cards()[i] + xd[i]]);
            }
            *slot = l;
        }
        let lse = log_sum_exp(out);
        out.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }

    /// M-step from expected counts: `counts[i][y * K_i + x_i]` and latent mass `w[y]`.
    ///
    /// Rows of latent states that received no mass keep their previous values.
    pub fn maximize(&mut self, layout: &Layout, counts: &[Vec<f64>], w: &[f64]) {
        for (i, t) in self.theta.iter_mut().enumerate() {
            let k = layout.obs_cards()[i];
            for (y, &wy) in w.iter().enumerate() {
                if wy <= 0.0 {
                    continue;
                }
                let row = &counts[i][y * k..(y + 1) * k];
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    for (dst, &c) in t[y * k..(y + 1) * k].iter_mut().zip(row) {
                        *dst = c / s;
                    }
                }
            }
        }
        let total: f64 = w.iter().sum();
        match &mut self.factors {
            None => {
                for (p, &wy) in self.prior.iter_mut().zip(w) {
                    *p = wy / total;
                }
            }
            Some(fs) => {
                for f in fs.iter_mut() {
                    f.iter_mut().for_each(|v| *v = 0.0);
                }
                for (y, &wy) in w.iter().enumerate() {
                    for (j, f) in fs.iter_mut().enumerate() {
                        f[layout.lat_digits[y][j]] += wy;
                    }
                }
                for f in fs.iter_mut() {
                    let s: f64 = f.iter().sum();
                    f.iter_mut().for_each(|v| *v /= s);
                }
                self.refresh_factored_prior(layout);
            }
        }
    }

    pub fn refresh_factored_prior(&mut self, layout: &Layout) {
        if let Some(fs) = &self.factors {
            for (y, p) in self.prior.iter_mut().enumerate() {
                *p = layout.lat_digits[y].iter().zip(fs).map(|(&d, f)| f[d]).product();
            }
        }
    }

    pub fn zero_counts(layout: &Layout) -> (Vec<Vec<f64>>, Vec<f64>) {
        let lt = layout.lat_total();
        (
            layout.obs_cards().iter().map(|&k| vec![0.0; lt * k]).collect(),
            vec![0.0; lt],
        )
    }
}

/// Observed states with positive data mass.
pub(crate) fn data_support(pdata: &Pmf) -> Vec<(usize, f64)> {
    pdata.support().map(|x| (x, pdata.get(x))).collect()
}
