//! The four two-layer model families.
//!
//! Every family shares the generative factorization
//! `p(x, y) = Π_i p(x_i | y) · p(y)`, with each `p(x_i | y)` a full table
//! over the joint latent configuration. They differ in the latent prior
//! (joint or factorized) and in whether a factorized recognition model
//! `Π_j p(y_j | x)` is carried alongside.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{floored_ln, log_sum_exp, Cpt, Pmf, StateSpace, SupportPolicy};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Single latent variable (latent class / naive Bayes).
    SL,
    /// Independent latent variables.
    IL,
    /// Latents conditionally independent given the observation.
    CI,
    /// Both independent and conditionally independent.
    ICI,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::SL, ModelKind::IL, ModelKind::CI, ModelKind::ICI];

    /// Prior stored as a product of per-variable marginals.
    pub fn has_factored_prior(self) -> bool {
        matches!(self, ModelKind::IL | ModelKind::ICI)
    }

    /// Carries a factorized recognition model.
    pub fn has_recognition(self) -> bool {
        matches!(self, ModelKind::CI | ModelKind::ICI)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SL => "SL",
            ModelKind::IL => "IL",
            ModelKind::CI => "CI",
            ModelKind::ICI => "ICI",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SL" => Ok(ModelKind::SL),
            "IL" => Ok(ModelKind::IL),
            "CI" => Ok(ModelKind::CI),
            "ICI" => Ok(ModelKind::ICI),
            other => Err(Error::domain(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub obs: StateSpace,
    pub lat: StateSpace,
}

impl ModelShape {
    pub fn new(obs: StateSpace, lat: StateSpace) -> Self {
        ModelShape { obs, lat }
    }

    /// Shape of an SL model with `latent_states` states.
    pub fn single_latent(obs: StateSpace, latent_states: usize) -> Result<Self> {
        Ok(ModelShape::new(obs, StateSpace::single(latent_states)?))
    }

    /// `n_latent` binary latent variables.
    pub fn binary_latents(obs: StateSpace, n_latent: usize) -> Result<Self> {
        Ok(ModelShape::new(obs, StateSpace::uniform(n_latent, 2)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LatentPrior {
    /// Unrestricted joint over the latent space.
    Joint(Pmf),
    /// One marginal per latent variable; the joint is their product.
    Factored(Vec<Pmf>),
}

impl LatentPrior {
    /// Dense joint table over `lat`.
    pub fn joint_probs(&self, lat: &StateSpace) -> Vec<f64> {
        match self {
            LatentPrior::Joint(p) => p.probs().to_vec(),
            LatentPrior::Factored(factors) => (0..lat.total())
                .map(|y| {
                    factors
                        .iter()
                        .enumerate()
                        .map(|(j, f)| f.get(lat.digit(y, j)))
                        .product()
                })
                .collect(),
        }
    }
}

/// A two-layer generative model together with its optional recognition tables.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeModel {
    kind: ModelKind,
    shape: ModelShape,
    theta: Vec<Cpt>,
    prior: LatentPrior,
    recognition: Option<Vec<Cpt>>,
    prior_joint: Vec<f64>,
}

impl GenerativeModel {
    pub fn new(
        kind: ModelKind,
        shape: ModelShape,
        theta: Vec<Cpt>,
        prior: LatentPrior,
        recognition: Option<Vec<Cpt>>,
    ) -> Result<Self> {
        let ModelShape { obs, lat } = &shape;
        if kind == ModelKind::SL && lat.num_vars() != 1 {
            return Err(Error::domain(format!(
                "SL models have one latent variable, got {}",
                lat.num_vars()
            )));
        }
        if theta.len() != obs.num_vars() {
            return Err(Error::domain(format!(
                "expected {} observation tables, got {}",
                obs.num_vars(),
                theta.len()
            )));
        }
        for (i, t) in theta.iter().enumerate() {
            if t.child_space().cards() != [obs.cards()[i]] || t.parent_space() != lat {
                return Err(Error::domain(format!("observation table {i} has the wrong shape")));
            }
            if !t.defined_mask().iter().all(|&d| d) {
                return Err(Error::domain(format!("observation table {i} has undefined rows")));
            }
        }
        match (&prior, kind.has_factored_prior()) {
            (LatentPrior::Joint(p), false) => {
                if p.space() != lat {
                    return Err(Error::domain("joint prior lives on the wrong space"));
                }
            }
            (LatentPrior::Factored(fs), true) => {
                if fs.len() != lat.num_vars() || fs.iter().zip(lat.cards()).any(|(f, &c)| f.space().cards() != [c]) {
                    return Err(Error::domain("factored prior does not match the latent space"));
                }
            }
            _ => {
                return Err(Error::domain(format!(
                    "{kind} requires a {} prior",
                    if kind.has_factored_prior() { "factored" } else { "joint" }
                )))
            }
        }
        match (&recognition, kind.has_recognition()) {
            (Some(rec), true) => {
                if rec.len() != lat.num_vars() {
                    return Err(Error::domain("need one recognition table per latent variable"));
                }
                for (j, r) in rec.iter().enumerate() {
                    if r.child_space().cards() != [lat.cards()[j]] || r.parent_space() != obs {
                        return Err(Error::domain(format!("recognition table {j} has the wrong shape")));
                    }
                    if !r.defined_mask().iter().all(|&d| d) {
                        return Err(Error::domain(format!("recognition table {j} has undefined rows")));
                    }
                }
            }
            (None, false) => {}
            (Some(_), false) => return Err(Error::domain(format!("{kind} models carry no recognition tables"))),
            (None, true) => return Err(Error::domain(format!("{kind} models need recognition tables"))),
        }
        let prior_joint = prior.joint_probs(lat);
        Ok(GenerativeModel {
            kind,
            shape,
            theta,
            prior,
            recognition,
            prior_joint,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn obs_space(&self) -> &StateSpace {
        &self.shape.obs
    }

    pub fn lat_space(&self) -> &StateSpace {
        &self.shape.lat
    }

    /// `p(x_i | y)` tables, one per observed variable.
    pub fn theta(&self) -> &[Cpt] {
        &self.theta
    }

    pub fn prior(&self) -> &LatentPrior {
        &self.prior
    }

    /// `p(y_j | x)` tables for CI/ICI models.
    pub fn recognition(&self) -> Option<&[Cpt]> {
        self.recognition.as_deref()
    }

    /// Joint latent prior `p(y)` as a dense table.
    pub fn prior_probs(&self) -> &[f64] {
        &self.prior_joint
    }

    pub fn latent_marginal(&self) -> Pmf {
        Pmf::from_weights(self.shape.lat.clone(), self.prior_joint.clone()).expect("prior is a valid pmf")
    }

    /// `Π_i p(x_i | y)`.
    #[inline]
    pub(crate) fn emission(&self, x_digits: &[usize], y: usize) -> f64 {
        let mut p = 1.0;
        for (t, &xi) in self.theta.iter().zip(x_digits) {
            p *= t.raw_row(y)[xi];
        }
        p
    }

    /// Unnormalized `p(x, y)` for one observed state, written into `out`.
    pub(crate) fn joint_row(&self, x_digits: &[usize], out: &mut [f64]) {
        for (y, slot) in out.iter_mut().enumerate() {
            *slot = self.emission(x_digits, y) * self.prior_joint[y];
        }
    }

    /// Full joint over observed variables followed by latent variables.
    pub fn joint(&self) -> Pmf {
        let lt = self.shape.lat.total();
        let mut probs = vec![0.0; self.shape.obs.total() * lt];
        for (x, row) in probs.chunks_mut(lt).enumerate() {
            let digits = self.shape.obs.unindex(x);
            self.joint_row(&digits, row);
        }
        let space = self.shape.obs.concat(&self.shape.lat);
        Pmf::from_weights(space, probs).expect("model joint has unit mass")
    }

    /// `p_G(x)` as a dense table (not renormalized).
    pub fn obs_probs(&self) -> Vec<f64> {
        let mut row = vec![0.0; self.shape.lat.total()];
        (0..self.shape.obs.total())
            .map(|x| {
                self.joint_row(&self.shape.obs.unindex(x), &mut row);
                row.iter().sum()
            })
            .collect()
    }

    pub fn obs_marginal(&self) -> Pmf {
        Pmf::from_weights(self.shape.obs.clone(), self.obs_probs()).expect("model marginal has mass")
    }

    /// Exact Bayes posterior `p_G(y | x)`; rows where `p_G(x) = 0` are undefined.
    pub fn posterior(&self) -> Cpt {
        let lt = self.shape.lat.total();
        let mut table = vec![0.0; self.shape.obs.total() * lt];
        for (x, row) in table.chunks_mut(lt).enumerate() {
            self.joint_row(&self.shape.obs.unindex(x), row);
        }
        Cpt::from_weights(self.shape.lat.clone(), self.shape.obs.clone(), table)
    }

    /// Posterior with undefined rows resolved per `policy`.
    ///
    /// Under [`SupportPolicy::Smoothed`] every undefined row is replaced by
    /// the posterior computed from factors clamped to the probability floor.
    /// Under [`SupportPolicy::Strict`] an undefined row for which
    /// `required(x)` holds is an error; other undefined rows stay undefined.
    pub fn resolved_posterior(&self, policy: SupportPolicy, required: impl Fn(usize) -> bool) -> Result<Cpt> {
        let post = self.posterior();
        if post.defined_mask().iter().all(|&d| d) {
            return Ok(post);
        }
        let lt = self.shape.lat.total();
        let mut table = post.table().to_vec();
        let mut defined = post.defined_mask().to_vec();
        for x in 0..defined.len() {
            if defined[x] {
                continue;
            }
            match policy {
                SupportPolicy::Strict if required(x) => {
                    return Err(Error::UndefinedRow {
                        state: self.shape.obs.unindex(x),
                    })
                }
                SupportPolicy::Strict => {}
                SupportPolicy::Smoothed => {
                    let row = self.clamped_posterior_row(&self.shape.obs.unindex(x));
                    table[x * lt..(x + 1) * lt].copy_from_slice(&row);
                    defined[x] = true;
                }
            }
        }
        Ok(Cpt::from_rows_unchecked(
            self.shape.lat.clone(),
            self.shape.obs.clone(),
            table,
            defined,
        ))
    }

    fn clamped_posterior_row(&self, x_digits: &[usize]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.shape.lat.total())
            .map(|y| {
                self.theta
                    .iter()
                    .zip(x_digits)
                    .map(|(t, &xi)| floored_ln(t.raw_row(y)[xi]))
                    .sum::<f64>()
                    + floored_ln(self.prior_joint[y])
            })
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter().map(|l| (l - lse).exp()).collect()
    }

    /// Per-latent-variable marginals of the posterior, one table per latent
    /// variable, with undefined rows resolved by smoothing.
    pub fn posterior_marginals(&self) -> Vec<Cpt> {
        let post = self
            .resolved_posterior(SupportPolicy::Smoothed, |_| true)
            .expect("smoothed posterior is total");
        let lat = &self.shape.lat;
        let n_obs = self.shape.obs.total();
        lat.cards()
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let mut t = vec![0.0; n_obs * c];
                for x in 0..n_obs {
                    for (y, &p) in post.raw_row(x).iter().enumerate() {
                        t[x * c + lat.digit(y, j)] += p;
                    }
                }
                Cpt::from_rows_unchecked(
                    StateSpace::single(c).expect("positive cardinality"),
                    self.shape.obs.clone(),
                    t,
                    vec![true; n_obs],
                )
            })
            .collect()
    }

    /// `Π_j p(y_j | x)` from the recognition tables.
    pub fn recognition_posterior(&self) -> Result<Cpt> {
        let rec = self
            .recognition
            .as_ref()
            .ok_or_else(|| Error::UnsupportedKind(self.kind.to_string()))?;
        let lat = &self.shape.lat;
        let lt = lat.total();
        let mut table = vec![0.0; self.shape.obs.total() * lt];
        for (x, row) in table.chunks_mut(lt).enumerate() {
            for (y, slot) in row.iter_mut().enumerate() {
                *slot = rec
                    .iter()
                    .enumerate()
                    .map(|(j, r)| r.raw_row(x)[lat.digit(y, j)])
                    .product();
            }
        }
        Ok(Cpt::from_rows_unchecked(
            lat.clone(),
            self.shape.obs.clone(),
            table,
            vec![true; self.shape.obs.total()],
        ))
    }

    /// Replaces the recognition tables (CI/ICI only).
    pub fn with_recognition(self, recognition: Vec<Cpt>) -> Result<Self> {
        GenerativeModel::new(self.kind, self.shape, self.theta, self.prior, Some(recognition))
    }

    /// SL model over one observed variable whose joint with the latent is `joint`
    /// (observed first, latent second).
    pub fn single_latent_from_joint(joint: &Pmf) -> Result<Self> {
        let cards = joint.space().cards();
        if cards.len() != 2 {
            return Err(Error::domain("expected a joint over (observed, latent)"));
        }
        let (k, l) = (cards[0], cards[1]);
        let obs = StateSpace::single(k)?;
        let lat = StateSpace::single(l)?;
        let prior = joint.marginalize(&[1])?;
        let mut theta = vec![0.0; l * k];
        for y in 0..l {
            let py = prior.get(y);
            for x in 0..k {
                theta[y * k + x] = if py > 0.0 {
                    joint.get(x * l + y) / py
                } else {
                    1.0 / k as f64
                };
            }
        }
        let theta = Cpt::from_weights(obs.clone(), lat.clone(), theta);
        GenerativeModel::new(
            ModelKind::SL,
            ModelShape::new(obs, lat),
            vec![theta],
            LatentPrior::Joint(prior),
            None,
        )
    }
}

/// Block-uniform latent refinement of `base`: latent state `l` belongs to
/// observed state `l / alpha`, and each observed state spreads uniformly
/// over its `alpha` latent states.
pub fn construct_expanding(base: &Pmf, alpha: usize) -> Result<GenerativeModel> {
    if alpha == 0 {
        return Err(Error::domain("alpha must be at least 1"));
    }
    let obs = base.space().clone();
    let lt = alpha
        .checked_mul(obs.total())
        .ok_or_else(|| Error::domain("expanded latent space overflows"))?;
    let lat = StateSpace::single(lt)?;
    let theta = (0..obs.num_vars())
        .map(|i| {
            let k = obs.cards()[i];
            let mut t = vec![0.0; lt * k];
            for l in 0..lt {
                t[l * k + obs.digit(l / alpha, i)] = 1.0;
            }
            Cpt::new(StateSpace::single(k)?, lat.clone(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    let prior = (0..lt).map(|l| base.get(l / alpha) / alpha as f64).collect();
    GenerativeModel::new(
        ModelKind::SL,
        ModelShape::new(obs, lat.clone()),
        theta,
        LatentPrior::Joint(Pmf::from_weights(lat, prior)?),
        None,
    )
}

/// Deterministic coarsening of `base`: `beta` consecutive observed states map
/// to each latent state and the model reproduces `base` exactly.
///
/// The observed side of the returned model is `base` flattened to a single
/// variable, since a block distribution over several variables does not in
/// general factor per variable.
pub fn construct_shrinking(base: &Pmf, beta: usize) -> Result<GenerativeModel> {
    let k = base.space().total();
    if beta == 0 || !k.is_multiple_of(beta) {
        return Err(Error::domain(format!(
            "beta = {beta} does not divide the {k} observed states"
        )));
    }
    let lt = k / beta;
    let obs = StateSpace::single(k)?;
    let lat = StateSpace::single(lt)?;
    let mut theta = vec![0.0; lt * k];
    let mut prior = vec![0.0; lt];
    for l in 0..lt {
        let block = l * beta..(l + 1) * beta;
        let mass: f64 = block.clone().map(|x| base.get(x)).sum();
        prior[l] = mass;
        for x in block {
            theta[l * k + x] = if mass > 0.0 {
                base.get(x) / mass
            } else {
                1.0 / beta as f64
            };
        }
    }
    let theta = Cpt::from_weights(obs.clone(), lat.clone(), theta);
    GenerativeModel::new(
        ModelKind::SL,
        ModelShape::new(obs, lat.clone()),
        vec![theta],
        LatentPrior::Joint(Pmf::from_weights(lat, prior)?),
        None,
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Joint of the best-LOD deterministic assignment, observed-major.
    pub(crate) fn table1_top_joint() -> Pmf {
        let mut w = vec![0.0; 18];
        for (x, y) in [0, 0, 1, 1, 2, 2].into_iter().enumerate() {
            w[x * 3 + y] = (x + 1) as f64;
        }
        Pmf::from_weights(StateSpace::new(vec![6, 3]).unwrap(), w).unwrap()
    }

    fn random_rows(rng: &mut ChaCha8Rng, rows: usize, width: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let w: Vec<f64> = (0..width).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = w.iter().sum();
            t.extend(w.iter().map(|v| v / s));
        }
        t
    }

    pub(crate) fn random_model(kind: ModelKind, obs: &[usize], lat: &[usize], seed: u64) -> GenerativeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = StateSpace::new(obs.to_vec()).unwrap();
        let lat = StateSpace::new(lat.to_vec()).unwrap();
        let theta = obs
            .cards()
            .iter()
            .map(|&k| {
                let t = random_rows(&mut rng, lat.total(), k);
                Cpt::new(StateSpace::single(k).unwrap(), lat.clone(), t).unwrap()
            })
            .collect();
        let prior = if kind.has_factored_prior() {
            LatentPrior::Factored(
                lat.cards()
                    .iter()
                    .map(|&c| Pmf::new(StateSpace::single(c).unwrap(), random_rows(&mut rng, 1, c)).unwrap())
                    .collect(),
            )
        } else {
            LatentPrior::Joint(Pmf::new(lat.clone(), random_rows(&mut rng, 1, lat.total())).unwrap())
        };
        let rec = kind.has_recognition().then(|| {
            lat.cards()
                .iter()
                .map(|&c| {
                    Cpt::new(
                        StateSpace::single(c).unwrap(),
                        obs.clone(),
                        random_rows(&mut rng, obs.total(), c),
                    )
                    .unwrap()
                })
                .collect()
        });
        GenerativeModel::new(kind, ModelShape::new(obs, lat), theta, prior, rec).unwrap()
    }

    #[test]
    fn table1_top_joint_roundtrips_through_sl_model() {
        let j = table1_top_joint();
        let m = GenerativeModel::single_latent_from_joint(&j).unwrap();
        let joint = m.joint();
        for (a, b) in joint.probs().iter().zip(j.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let post = m.posterior();
        for (x, y) in [0, 0, 1, 1, 2, 2].into_iter().enumerate() {
            let row = post.row(x).unwrap();
            assert_eq!(row[y], 1.0);
        }
    }

    #[test]
    fn point_mass_prior_supports_one_slice() {
        let m = random_model(ModelKind::CI, &[3, 2], &[2, 2], 3);
        let prior = Pmf::point_mass(m.lat_space().clone(), 2).unwrap();
        let m = GenerativeModel::new(
            ModelKind::CI,
            m.shape().clone(),
            m.theta().to_vec(),
            LatentPrior::Joint(prior),
            m.recognition().map(|r| r.to_vec()),
        )
        .unwrap();
        let j = m.joint();
        for (flat, &p) in j.probs().iter().enumerate() {
            if flat % 4 != 2 {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn uniform_il_gives_uniform_joint() {
        let obs = StateSpace::new(vec![3, 2]).unwrap();
        let lat = StateSpace::uniform(2, 2).unwrap();
        let theta = obs
            .cards()
            .iter()
            .map(|&k| Cpt::new(StateSpace::single(k).unwrap(), lat.clone(), vec![1.0 / k as f64; 4 * k]).unwrap())
            .collect();
        let prior = LatentPrior::Factored(vec![Pmf::uniform(StateSpace::single(2).unwrap()); 2]);
        let m = GenerativeModel::new(ModelKind::IL, ModelShape::new(obs, lat), theta, prior, None).unwrap();
        for &p in m.joint().probs() {
            assert!((p - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn prior_independent_model_has_prior_posterior() {
        let base = random_model(ModelKind::SL, &[3, 3], &[4], 9);
        let row_a = base.theta()[0].raw_row(0).to_vec();
        let row_b = base.theta()[1].raw_row(0).to_vec();
        let lat = base.lat_space().clone();
        let theta = vec![
            Cpt::new(StateSpace::single(3).unwrap(), lat.clone(), row_a.repeat(4)).unwrap(),
            Cpt::new(StateSpace::single(3).unwrap(), lat.clone(), row_b.repeat(4)).unwrap(),
        ];
        let m = GenerativeModel::new(ModelKind::SL, base.shape().clone(), theta, base.prior().clone(), None).unwrap();
        let post = m.posterior();
        for x in 0..9 {
            for (a, b) in post.row(x).unwrap().iter().zip(m.prior_probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn posterior_matches_brute_force_bayes() {
        for seed in 0..10 {
            let m = random_model(ModelKind::SL, &[3, 2], &[4], seed);
            let post = m.posterior();
            // brute force: enumerate the joint directly from the tables
            for x0 in 0..3 {
                for x1 in 0..2 {
                    let w: Vec<f64> = (0..4)
                        .map(|y| {
                            m.theta()[0].table()[y * 3 + x0] * m.theta()[1].table()[y * 2 + x1] * m.prior_probs()[y]
                        })
                        .collect();
                    let s: f64 = w.iter().sum();
                    let row = post.row(x0 * 2 + x1).unwrap();
                    for y in 0..4 {
                        assert!((row[y] - w[y] / s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn bayes_consistency_and_factored_latent_marginal() {
        for (seed, kind) in ModelKind::ALL.into_iter().enumerate() {
            let lat: &[usize] = if kind == ModelKind::SL { &[5] } else { &[2, 3] };
            let m = random_model(kind, &[3, 2, 2], lat, 100 + seed as u64);
            let joint = m.joint();
            let n_obs = m.obs_space().num_vars();
            let obs_vars: Vec<usize> = (0..n_obs).collect();
            let cond = joint.condition(&obs_vars).unwrap();
            let post = m.posterior();
            for (a, b) in cond.table().iter().zip(post.table()) {
                assert!((a - b).abs() < 1e-12);
            }
            let lat_vars: Vec<usize> = (n_obs..n_obs + m.lat_space().num_vars()).collect();
            let lm = joint.marginalize(&lat_vars).unwrap();
            if let LatentPrior::Factored(fs) = m.prior() {
                for y in 0..m.lat_space().total() {
                    let prod: f64 = fs
                        .iter()
                        .enumerate()
                        .map(|(j, f)| f.get(m.lat_space().digit(y, j)))
                        .product();
                    assert!((lm.get(y) - prod).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn recognition_posterior_examples() {
        let m = random_model(ModelKind::CI, &[3], &[4], 1);
        let r = m.recognition_posterior().unwrap();
        assert_eq!(r.table(), m.recognition().unwrap()[0].table());

        let obs = StateSpace::single(1).unwrap();
        let lat = StateSpace::uniform(2, 2).unwrap();
        let theta = vec![Cpt::new(obs.clone(), lat.clone(), vec![1.0; 4]).unwrap()];
        let rec = vec![
            Cpt::new(StateSpace::single(2).unwrap(), obs.clone(), vec![0.9, 0.1]).unwrap(),
            Cpt::new(StateSpace::single(2).unwrap(), obs.clone(), vec![0.3, 0.7]).unwrap(),
        ];
        let prior = LatentPrior::Factored(vec![Pmf::uniform(StateSpace::single(2).unwrap()); 2]);
        let m = GenerativeModel::new(ModelKind::ICI, ModelShape::new(obs, lat), theta, prior, Some(rec)).unwrap();
        let row = m.recognition_posterior().unwrap().row(0).unwrap().to_vec();
        for (a, b) in row.iter().zip([0.27, 0.63, 0.03, 0.07]) {
            assert!((a - b).abs() < 1e-15);
        }

        let sl = random_model(ModelKind::SL, &[3], &[2], 1);
        assert!(matches!(sl.recognition_posterior(), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn uniform_recognition_gives_uniform_rows() {
        let m = random_model(ModelKind::ICI, &[3, 3], &[2, 2], 4);
        let rec = m
            .lat_space()
            .cards()
            .iter()
            .map(|&c| {
                Cpt::new(
                    StateSpace::single(c).unwrap(),
                    m.obs_space().clone(),
                    vec![1.0 / c as f64; 9 * c],
                )
                .unwrap()
            })
            .collect();
        let m = m.with_recognition(rec).unwrap();
        for &v in m.recognition_posterior().unwrap().table() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn constructor_validation() {
        let m = random_model(ModelKind::IL, &[3], &[2, 2], 1);
        // IL with a joint prior is rejected
        let bad = GenerativeModel::new(
            ModelKind::IL,
            m.shape().clone(),
            m.theta().to_vec(),
            LatentPrior::Joint(m.latent_marginal()),
            None,
        );
        assert!(bad.is_err());
        // SL needs a single latent variable
        let bad = GenerativeModel::new(
            ModelKind::SL,
            m.shape().clone(),
            m.theta().to_vec(),
            LatentPrior::Joint(m.latent_marginal()),
            None,
        );
        assert!(bad.is_err());
        // CI needs recognition tables
        let bad = GenerativeModel::new(
            ModelKind::CI,
            m.shape().clone(),
            m.theta().to_vec(),
            LatentPrior::Joint(m.latent_marginal()),
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn expanding_examples() {
        let base = Pmf::from_weights(StateSpace::single(6).unwrap(), (1..=6).map(f64::from).collect()).unwrap();
        let m = construct_expanding(&base, 3).unwrap();
        for l in 0..18 {
            assert!((m.prior_probs()[l] - base.get(l / 3) / 3.0).abs() < 1e-15);
        }
        let post = m.posterior();
        for x in 0..6 {
            let row = post.row(x).unwrap();
            for (l, &v) in row.iter().enumerate() {
                let want = if l / 3 == x { 1.0 / 3.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-15);
            }
        }
        let u = construct_expanding(&Pmf::uniform(StateSpace::single(4).unwrap()), 2).unwrap();
        assert!(u.prior_probs().iter().all(|&p| (p - 0.125).abs() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let multi = Pmf::from_weights(StateSpace::new(vec![2, 3, 2]).unwrap(), w).unwrap();
        let m = construct_expanding(&multi, 2).unwrap();
        for (a, b) in m.obs_probs().iter().zip(multi.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shrinking_examples() {
        let base = Pmf::from_weights(StateSpace::single(6).unwrap(), (1..=6).map(f64::from).collect()).unwrap();
        assert!(matches!(construct_shrinking(&base, 4), Err(Error::Domain(_))));
        let m = construct_shrinking(&base, 2).unwrap();
        for (a, b) in m.obs_probs().iter().zip(base.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let post = m.posterior();
        for x in 0..6 {
            assert_eq!(post.row(x).unwrap()[x / 2], 1.0);
        }
    }
}
