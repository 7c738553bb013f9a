//! Higher-layer learning on top of a trained two-layer model.
//!
//! The lower model's posterior is pushed through the data to give a
//! distribution over its latent layer, an SL model is fitted to that, and
//! the chain `p̃(x) p_L(y|x) p_H(z|y)` is scored as an encoder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{Cpt, Pmf, StateSpace, SupportPolicy};
use crate::error::{Error, Result};
use crate::measures::{data_loglik, encoder_mi, encoder_surprise, EvalScores};
use crate::models::{GenerativeModel, LatentPrior, ModelKind, ModelShape};
use crate::training::{em_fit, restart_seed, TrainConfig, TrainMode, TrainReport, RESTART_TIE_TOL};

/// Default number of random bijection candidates tried by [`sl_to_binary`].
pub const DEFAULT_CANDIDATES: usize = 20;

/// One-to-one map from SL latent states onto `m`-bit codes.
///
/// Codes are flat indices into `m` binary variables, first bit most significant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bijection {
    perm: Vec<usize>,
}

impl Bijection {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        if !n.is_power_of_two() {
            return Err(Error::domain(format!("{n} states is not a power of two")));
        }
        let mut seen = vec![false; n];
        for &c in &perm {
            if c >= n || seen[c] {
                return Err(Error::domain("bijection is not a permutation"));
            }
            seen[c] = true;
        }
        Ok(Bijection { perm })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Self::new(perm)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// Number of bits `m`.
    pub fn bits(&self) -> usize {
        self.perm.len().trailing_zeros() as usize
    }

    pub fn code(&self, state: usize) -> usize {
        self.perm[state]
    }

    /// Relabels a distribution over SL states as one over codes.
    pub fn apply_to(&self, p: &Pmf) -> Result<Pmf> {
        let space = StateSpace::uniform(self.bits().max(1), 2)?;
        if p.space().total() != self.perm.len() {
            return Err(Error::domain("pmf size does not match the bijection"));
        }
        let mut probs = vec![0.0; self.perm.len()];
        for (s, &c) in self.perm.iter().enumerate() {
            probs[c] = p.get(s);
        }
        Pmf::from_weights(space, probs)
    }
}

/// `p̃(y) = Σ_x p̃(x) p_L(y|x)`.
pub fn pushforward_latent(lower: &GenerativeModel, pdata: &Pmf) -> Result<Pmf> {
    pushforward_with(lower, pdata, SupportPolicy::Smoothed)
}

pub fn pushforward_with(lower: &GenerativeModel, pdata: &Pmf, policy: SupportPolicy) -> Result<Pmf> {
    if pdata.space() != lower.obs_space() {
        return Err(Error::domain("data space does not match the lower model"));
    }
    let post = lower.resolved_posterior(policy, |x| pdata.get(x) > 0.0)?;
    let mut py = vec![0.0; lower.lat_space().total()];
    for x in pdata.support() {
        let w = pdata.get(x);
        for (acc, &p) in py.iter_mut().zip(post.row_checked(x)?) {
            *acc += w * p;
        }
    }
    Pmf::from_weights(lower.lat_space().clone(), py)
}

/// Relabels an SL model's latent states as `m` binary latent variables.
///
/// The result is a CI-kind model (joint prior, recognition tables set to the
/// per-bit posterior marginals) that defines the same distribution over `x`.
pub fn relabel_as_binary(lower: &GenerativeModel, bijection: &Bijection) -> Result<GenerativeModel> {
    if lower.kind() != ModelKind::SL {
        return Err(Error::UnsupportedKind(format!(
            "{} (binary conversion needs SL)",
            lower.kind()
        )));
    }
    let l = lower.lat_space().total();
    if bijection.as_slice().len() != l {
        return Err(Error::domain("bijection size does not match the latent space"));
    }
    let lat = StateSpace::uniform(bijection.bits().max(1), 2)?;
    if lat.total() != l {
        return Err(Error::domain(format!("{l} latent states cannot be written in bits")));
    }
    let theta = lower
        .theta()
        .iter()
        .map(|t| {
            let k = t.child_space().total();
            let mut table = vec![0.0; l * k];
            for s in 0..l {
                let c = bijection.code(s);
                table[c * k..(c + 1) * k].copy_from_slice(t.row(s).expect("theta rows are defined"));
            }
            Cpt::new(t.child_space().clone(), lat.clone(), table)
        })
        .collect::<Result<Vec<_>>>()?;
    let prior = bijection.apply_to(&lower.latent_marginal())?;
    let shape = ModelShape::new(lower.obs_space().clone(), lat);
    let skeleton = GenerativeModel::new(
        ModelKind::CI,
        shape.clone(),
        theta.clone(),
        LatentPrior::Joint(prior.clone()),
        Some(uniform_recognition(&shape)?),
    )?;
    skeleton.clone().with_recognition(skeleton.posterior_marginals())
}

fn uniform_recognition(shape: &ModelShape) -> Result<Vec<Cpt>> {
    shape
        .lat
        .cards()
        .iter()
        .map(|&c| {
            Cpt::new(
                StateSpace::single(c)?,
                shape.obs.clone(),
                vec![1.0 / c as f64; c * shape.obs.total()],
            )
        })
        .collect()
}

/// Higher SL model with `k_z` latent states fitted to `lower_latent_pdata`.
pub fn fit_higher(
    lower_latent_pdata: &Pmf,
    k_z: usize,
    config: &TrainConfig,
) -> Result<(GenerativeModel, TrainReport)> {
    if k_z == 0 {
        return Err(Error::domain("K_z must be at least 1"));
    }
    let shape = ModelShape::single_latent(lower_latent_pdata.space().clone(), k_z)?;
    let cfg = TrainConfig {
        mode: TrainMode::Em,
        ..config.clone()
    };
    em_fit(ModelKind::SL, &shape, lower_latent_pdata, &cfg)
}

/// Score of one bijection candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub bijection: Bijection,
    pub higher_loglik: f64,
}

/// Scores every candidate: fit a single-binary-latent SL on the relabeled
/// push-forward and record `Σ_y p̃(y) ln p_H(y)`.
pub fn score_bijections(pushed: &Pmf, candidates: &[Bijection], config: &TrainConfig) -> Result<Vec<CandidateScore>> {
    candidates
        .iter()
        .map(|b| {
            let relabeled = b.apply_to(pushed)?;
            let (_, report) = fit_higher(&relabeled, 2, config)?;
            Ok(CandidateScore {
                bijection: b.clone(),
                higher_loglik: report.final_loglik,
            })
        })
        .collect()
}

/// Highest score wins; ties go to the lexicographically smallest permutation.
pub fn select_bijection(scores: &[CandidateScore]) -> Option<&CandidateScore> {
    let best = scores.iter().map(|s| s.higher_loglik).fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .filter(|s| s.higher_loglik >= best - RESTART_TIE_TOL)
        .min_by(|a, b| a.bijection.cmp(&b.bijection))
}

/// Converts an SL model with `2^m` states into `m` binary latents, choosing
/// among `candidates` random bijections the one whose higher single-bit SL
/// model fits the push-forward best.
pub fn sl_to_binary(
    lower: &GenerativeModel,
    pdata: &Pmf,
    candidates: usize,
    config: &TrainConfig,
) -> Result<(GenerativeModel, Bijection)> {
    if lower.kind() != ModelKind::SL {
        return Err(Error::UnsupportedKind(format!(
            "{} (binary conversion needs SL)",
            lower.kind()
        )));
    }
    let l = lower.lat_space().total();
    if !l.is_power_of_two() || l < 2 {
        return Err(Error::domain(format!("SL latent size {l} is not a power of two")));
    }
    if candidates == 0 {
        return Err(Error::domain("need at least one bijection candidate"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, usize::MAX));
    let cands = (0..candidates)
        .map(|_| Bijection::random(l, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let pushed = pushforward_latent(lower, pdata)?;
    let scores = score_bijections(&pushed, &cands, config)?;
    let best = select_bijection(&scores)
        .expect("non-empty candidates")
        .bijection
        .clone();
    Ok((relabel_as_binary(lower, &best)?, best))
}

/// Lower model, optional SL bijection and higher SL model over the lower latents.
#[derive(Clone, Debug)]
pub struct StackedModel {
    /// Lower model, already converted to binary latents when it began as SL.
    pub lower: GenerativeModel,
    pub bijection: Option<Bijection>,
    pub higher: GenerativeModel,
    pub pdata: Pmf,
}

impl StackedModel {
    pub fn new(
        lower: GenerativeModel,
        bijection: Option<Bijection>,
        higher: GenerativeModel,
        pdata: Pmf,
    ) -> Result<Self> {
        if higher.kind() != ModelKind::SL {
            return Err(Error::domain("the higher model must be SL"));
        }
        if higher.obs_space() != lower.lat_space() {
            return Err(Error::domain("higher observed space must equal the lower latent space"));
        }
        if pdata.space() != lower.obs_space() {
            return Err(Error::domain("data space does not match the lower model"));
        }
        Ok(StackedModel {
            lower,
            bijection,
            higher,
            pdata,
        })
    }

    fn lower_encoder(&self, policy: SupportPolicy) -> Result<Cpt> {
        self.lower.resolved_posterior(policy, |_| true)
    }

    /// `p_C(z|x) = Σ_y p_H(z|y) p_L(y|x)` for every observed state.
    pub fn connected_encoder(&self, policy: SupportPolicy) -> Result<Cpt> {
        let low = self.lower_encoder(policy)?;
        let high = self.higher.resolved_posterior(policy, |_| true)?;
        let kz = self.higher.lat_space().total();
        let n_obs = self.lower.obs_space().total();
        let mut table = vec![0.0; n_obs * kz];
        for x in 0..n_obs {
            let out = &mut table[x * kz..(x + 1) * kz];
            for (y, &py) in low.row_checked(x)?.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                for (o, &pz) in out.iter_mut().zip(high.row_checked(y)?) {
                    *o += py * pz;
                }
            }
        }
        Ok(Cpt::from_weights(
            self.higher.lat_space().clone(),
            self.lower.obs_space().clone(),
            table,
        ))
    }
}

fn chain_scores(enc: &Cpt, pdata: &Pmf, loglik: f64, policy: SupportPolicy) -> Result<EvalScores> {
    let width = enc.child_space().total();
    let mut marginal = vec![0.0; width];
    for x in pdata.support() {
        for (m, &p) in marginal.iter_mut().zip(enc.row_checked(x)?) {
            *m += pdata.get(x) * p;
        }
    }
    let s: f64 = marginal.iter().sum();
    marginal.iter_mut().for_each(|m| *m /= s);
    let mi = encoder_mi(enc, &marginal, pdata.probs(), policy)?;
    let lod = encoder_surprise(enc, &marginal, policy)?.dissimilarity(pdata, policy)?;
    Ok(EvalScores { loglik, mi, lod })
}

/// Scores between `X` and the higher latent `Z` under the connected chain.
/// `loglik` is the higher model objective `Σ_y p̃(y) ln p_H(y)`.
pub fn connected_scores(stacked: &StackedModel) -> Result<EvalScores> {
    connected_scores_with(stacked, SupportPolicy::Smoothed)
}

pub fn connected_scores_with(stacked: &StackedModel, policy: SupportPolicy) -> Result<EvalScores> {
    let enc = stacked.connected_encoder(policy)?;
    let pushed = pushforward_with(&stacked.lower, &stacked.pdata, policy)?;
    let higher_ll = data_loglik(&stacked.higher.obs_probs(), &pushed, stacked.higher.obs_space(), policy)?;
    chain_scores(&enc, &stacked.pdata, higher_ll, policy)
}

/// Scores between `X` and the lower latent `Y` under the same chain, with the
/// data push-forward as the latent marginal. `loglik` is the lower model's.
pub fn lower_connected_scores(stacked: &StackedModel) -> Result<EvalScores> {
    let policy = SupportPolicy::Smoothed;
    let enc = stacked.lower_encoder(policy)?;
    let ll = crate::measures::loglik_with(&stacked.lower, &stacked.pdata, policy)?;
    chain_scores(&enc, &stacked.pdata, ll, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::{random_model, table1_top_joint};
    use crate::training::random_init;
    use rand::Rng;

    fn ramp6() -> Pmf {
        Pmf::from_weights(StateSpace::single(6).unwrap(), (1..=6).map(f64::from).collect()).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            restarts: 5,
            max_iters: 300,
            ..Default::default()
        }
    }

    #[test]
    fn bijection_validation() {
        assert!(Bijection::new(vec![0, 1, 2]).is_err());
        assert!(Bijection::new(vec![0, 0, 1, 2]).is_err());
        assert_eq!(Bijection::new(vec![3, 1, 0, 2]).unwrap().bits(), 2);
    }

    #[test]
    fn pushforward_examples() {
        let m = GenerativeModel::single_latent_from_joint(&table1_top_joint()).unwrap();
        let py = pushforward_latent(&m, &ramp6()).unwrap();
        for (a, b) in py.probs().iter().zip([3.0 / 21.0, 7.0 / 21.0, 11.0 / 21.0]) {
            assert!((a - b).abs() < 1e-15);
        }

        let p = ramp6();
        let ident = crate::models::construct_expanding(&p, 1).unwrap();
        let py = pushforward_latent(&ident, &p).unwrap();
        for (a, b) in py.probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-15);
        }

        // posterior rows equal to the prior
        let lat = StateSpace::single(3).unwrap();
        let obs = StateSpace::single(6).unwrap();
        let theta = Cpt::new(obs.clone(), lat.clone(), vec![1.0 / 6.0; 18]).unwrap();
        let prior = Pmf::new(lat.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let m = GenerativeModel::new(
            ModelKind::SL,
            ModelShape::new(obs, lat),
            vec![theta],
            LatentPrior::Joint(prior.clone()),
            None,
        )
        .unwrap();
        let py = pushforward_latent(&m, &p).unwrap();
        for (a, b) in py.probs().iter().zip(prior.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn relabeling_preserves_observed_marginal() {
        let m = random_model(ModelKind::SL, &[3, 3], &[8], 3);
        let p = Pmf::uniform(m.obs_space().clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let b = Bijection::random(8, &mut rng).unwrap();
            let c = relabel_as_binary(&m, &b).unwrap();
            assert_eq!(c.lat_space().cards(), &[2, 2, 2]);
            for (a, b) in c.obs_probs().iter().zip(m.obs_probs()) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(
                crate::measures::loglik(&c, &p).unwrap().to_bits(),
                crate::measures::loglik(&m, &p).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn one_bit_conversion_ties_break_lexicographically() {
        let m = random_model(ModelKind::SL, &[3], &[2], 5);
        let p = Pmf::uniform(m.obs_space().clone());
        let cfg = quick();
        let (c, b) = sl_to_binary(&m, &p, 20, &cfg).unwrap();
        // the two relabelings of one bit fit identically
        assert_eq!(b.as_slice(), &[0, 1]);
        assert_eq!(c.lat_space().cards(), &[2]);
        assert!(sl_to_binary(&random_model(ModelKind::SL, &[3], &[3], 5), &p, 20, &cfg).is_err());
    }

    #[test]
    fn adjacent_codes_win_for_two_point_pushforward() {
        // p̃(Y) concentrated on SL states 0 and 3
        let pushed = Pmf::new(StateSpace::single(4).unwrap(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let mut all = Vec::new();
        let mut perm = [0usize, 1, 2, 3];
        permutations(&mut perm, 0, &mut all);
        assert_eq!(all.len(), 24);
        let cands: Vec<Bijection> = all.into_iter().map(|p| Bijection::new(p.to_vec()).unwrap()).collect();
        let scores = score_bijections(&pushed, &cands, &quick()).unwrap();
        let adjacent = |b: &Bijection| (b.code(0) ^ b.code(3)).count_ones() == 1;
        let best_adjacent = scores
            .iter()
            .filter(|s| adjacent(&s.bijection))
            .map(|s| s.higher_loglik)
            .fold(f64::NEG_INFINITY, f64::max);
        for s in &scores {
            assert!(best_adjacent >= s.higher_loglik - 1e-6);
        }
        let chosen = select_bijection(&scores).unwrap();
        assert!(chosen.higher_loglik >= best_adjacent - 1e-6);
    }

    fn permutations(p: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
        if k == p.len() {
            out.push(*p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permutations(p, k + 1, out);
            p.swap(k, i);
        }
    }

    #[test]
    fn fit_higher_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = StateSpace::uniform(2, 2).unwrap();
        let py = Pmf::from_weights(space.clone(), (0..4).map(|_| rng.random::<f64>() + 0.1).collect()).unwrap();
        let (_, r) = fit_higher(
            &py,
            4,
            &TrainConfig {
                restarts: 20,
                ..quick()
            },
        )
        .unwrap();
        assert!((r.final_loglik + crate::dist::entropy(&py)).abs() < 1e-3);

        let a = Pmf::new(StateSpace::single(2).unwrap(), vec![0.3, 0.7]).unwrap();
        let b = Pmf::new(StateSpace::single(2).unwrap(), vec![0.6, 0.4]).unwrap();
        let prod = a.product(&b);
        let (_, r1) = fit_higher(&prod, 1, &quick()).unwrap();
        assert!((r1.final_loglik + crate::dist::entropy(&prod)).abs() < 1e-9);

        let pm = Pmf::point_mass(space, 2).unwrap();
        let (_, r) = fit_higher(&pm, 2, &quick()).unwrap();
        assert!(r.final_loglik.abs() < 1e-6);
        assert!(fit_higher(&pm, 0, &quick()).is_err());
    }

    fn copy_higher(y_space: &StateSpace, pushed: &Pmf, perm: &[usize]) -> GenerativeModel {
        // Z = perm^-1(Y): theta(y | z) = [y == perm[z]]
        let l = y_space.total();
        let mut theta = vec![0.0; l * l];
        let mut prior = vec![0.0; l];
        for z in 0..l {
            theta[z * l + perm[z]] = 1.0;
            prior[z] = pushed.get(perm[z]);
        }
        let zs = StateSpace::single(l).unwrap();
        GenerativeModel::new(
            ModelKind::SL,
            ModelShape::new(y_space.clone(), zs.clone()),
            vec![Cpt::new(y_space.clone(), zs.clone(), theta).unwrap()],
            LatentPrior::Joint(Pmf::from_weights(zs, prior).unwrap()),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_encoder_preserves_scores() {
        let lower = random_model(ModelKind::SL, &[3, 2], &[4], 12);
        let p = Pmf::from_weights(lower.obs_space().clone(), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let pushed = pushforward_latent(&lower, &p).unwrap();
        let higher = copy_higher(lower.lat_space(), &pushed, &[2, 0, 3, 1]);
        let s = StackedModel::new(lower, None, higher, p).unwrap();
        let xz = connected_scores(&s).unwrap();
        let xy = lower_connected_scores(&s).unwrap();
        assert!((xz.lod - xy.lod).abs() < 1e-12);
        assert!((xz.mi - xy.mi).abs() < 1e-12);
    }

    #[test]
    fn constant_higher_gives_zero_mi() {
        let lower = random_model(ModelKind::IL, &[3, 2], &[2, 2], 4);
        let ys = lower.lat_space().clone();
        let zs = StateSpace::single(3).unwrap();
        let theta = (0..2)
            .map(|_| Cpt::new(StateSpace::single(2).unwrap(), zs.clone(), vec![0.5; 6]).unwrap())
            .collect();
        let higher = GenerativeModel::new(
            ModelKind::SL,
            ModelShape::new(ys, zs.clone()),
            theta,
            LatentPrior::Joint(Pmf::new(zs, vec![0.2, 0.3, 0.5]).unwrap()),
            None,
        )
        .unwrap();
        let p = Pmf::uniform(lower.obs_space().clone());
        let s = StackedModel::new(lower, None, higher, p).unwrap();
        assert!(connected_scores(&s).unwrap().mi < 1e-12);
    }

    #[test]
    fn scores_invariant_to_z_relabeling() {
        let lower = random_model(ModelKind::CI, &[3, 2], &[2, 2], 6);
        let p = Pmf::uniform(lower.obs_space().clone());
        let higher = random_init(
            &ModelShape::single_latent(lower.lat_space().clone(), 3).unwrap(),
            ModelKind::SL,
            2,
            1.0,
        )
        .unwrap();
        // permute Z labels: z' = perm[z]
        let perm = [2usize, 0, 1];
        let kz = 3;
        let theta = higher
            .theta()
            .iter()
            .map(|t| {
                let k = t.child_space().total();
                let mut tab = vec![0.0; kz * k];
                for z in 0..kz {
                    tab[perm[z] * k..(perm[z] + 1) * k].copy_from_slice(t.row(z).unwrap());
                }
                Cpt::new(t.child_space().clone(), t.parent_space().clone(), tab).unwrap()
            })
            .collect();
        let mut prior = vec![0.0; kz];
        for z in 0..kz {
            prior[perm[z]] = higher.prior_probs()[z];
        }
        let permuted = GenerativeModel::new(
            ModelKind::SL,
            higher.shape().clone(),
            theta,
            LatentPrior::Joint(Pmf::from_weights(higher.lat_space().clone(), prior).unwrap()),
            None,
        )
        .unwrap();
        let a = connected_scores(&StackedModel::new(lower.clone(), None, higher, p.clone()).unwrap()).unwrap();
        let b = connected_scores(&StackedModel::new(lower, None, permuted, p).unwrap()).unwrap();
        assert!((a.lod - b.lod).abs() < 1e-12);
        assert!((a.mi - b.mi).abs() < 1e-12);
    }

    #[test]
    fn connected_scores_match_triple_joint() {
        for seed in 0..10u64 {
            let lower = random_model(ModelKind::ICI, &[3, 2], &[2, 2], seed);
            let higher = random_init(
                &ModelShape::single_latent(lower.lat_space().clone(), 3).unwrap(),
                ModelKind::SL,
                seed + 100,
                1.0,
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p =
                Pmf::from_weights(lower.obs_space().clone(), (0..6).map(|_| rng.random::<f64>()).collect()).unwrap();
            let s = StackedModel::new(lower.clone(), None, higher.clone(), p.clone()).unwrap();
            let got = connected_scores(&s).unwrap();

            let pl = lower.posterior();
            let ph = higher.posterior();
            let mut joint = [[0.0f64; 3]; 6];
            for (x, row) in joint.iter_mut().enumerate() {
                for y in 0..4 {
                    for (z, slot) in row.iter_mut().enumerate() {
                        *slot += p.get(x) * pl.row(x).unwrap()[y] * ph.row(y).unwrap()[z];
                    }
                }
            }
            let pz: Vec<f64> = (0..3).map(|z| joint.iter().map(|r| r[z]).sum()).collect();
            let mi: f64 = (0..6)
                .map(|x| {
                    (0..3)
                        .map(|z| {
                            let c = joint[x][z] / p.get(x);
                            if c > 0.0 {
                                joint[x][z] * (c / pz[z]).ln()
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
                })
                .sum();
            let f: Vec<f64> = (0..6)
                .map(|x| -(0..3).map(|z| joint[x][z] / p.get(x) * pz[z].ln()).sum::<f64>())
                .collect();
            let norm: f64 = f.iter().map(|v| (-v).exp()).sum();
            let lod: f64 = (0..6)
                .map(|x| p.get(x) * (p.get(x) / ((-f[x]).exp() / norm)).ln())
                .sum();
            assert!((got.mi - mi).abs() < 1e-12, "{} vs {mi}", got.mi);
            assert!((got.lod - lod).abs() < 1e-12, "{} vs {lod}", got.lod);

            let low = lower_connected_scores(&s).unwrap();
            assert!(got.mi <= low.mi + 1e-12);
        }
    }

    #[test]
    fn stacked_model_validation() {
        let lower = random_model(ModelKind::IL, &[3], &[2, 2], 4);
        let wrong = random_model(ModelKind::SL, &[2, 2, 2], &[2], 4);
        let p = Pmf::uniform(lower.obs_space().clone());
        assert!(StackedModel::new(lower, None, wrong, p).is_err());
    }
}
