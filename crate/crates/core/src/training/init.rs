use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::dist::{Cpt, Pmf, StateSpace};
use crate::error::{Error, Result};
use crate::models::{GenerativeModel, LatentPrior, ModelKind, ModelShape};

fn dirichlet_rows(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, rows: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let start = out.len();
        out.extend((0..width).map(|_| gamma.sample(rng)));
        let row = &mut out[start..];
        let s: f64 = row.iter().sum();
        if s > 0.0 && s.is_finite() {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / width as f64);
        }
    }
    out
}

/// Random model with every row and prior drawn from a symmetric
/// Dirichlet(`concentration`).
///
/// Draw order is observation tables, then prior, then recognition tables,
/// so SL/CI (and IL/ICI) models from the same seed share their generative
/// parameters.
pub fn random_init(shape: &ModelShape, kind: ModelKind, seed: u64, concentration: f64) -> Result<GenerativeModel> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::domain(format!("invalid concentration {concentration}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (obs, lat) = (&shape.obs, &shape.lat);
    let theta = obs
        .cards()
        .iter()
        .map(|&k| {
            let t = dirichlet_rows(&mut rng, &gamma, lat.total(), k);
            Cpt::new(StateSpace::single(k)?, lat.clone(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    let prior = if kind.has_factored_prior() {
        LatentPrior::Factored(
            lat.cards()
                .iter()
                .map(|&c| Pmf::new(StateSpace::single(c)?, dirichlet_rows(&mut rng, &gamma, 1, c)))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        LatentPrior::Joint(Pmf::new(lat.clone(), dirichlet_rows(&mut rng, &gamma, 1, lat.total()))?)
    };
    let recognition = kind
        .has_recognition()
        .then(|| {
            lat.cards()
                .iter()
                .map(|&c| {
                    let t = dirichlet_rows(&mut rng, &gamma, obs.total(), c);
                    Cpt::new(StateSpace::single(c)?, obs.clone(), t)
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    GenerativeModel::new(kind, shape.clone(), theta, prior, recognition)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> ModelShape {
        ModelShape::new(StateSpace::uniform(4, 3).unwrap(), StateSpace::uniform(3, 2).unwrap())
    }

    #[test]
    fn same_seed_same_model() {
        for kind in [ModelKind::IL, ModelKind::CI, ModelKind::ICI] {
            let a = random_init(&shape(), kind, 42, 1.0).unwrap();
            let b = random_init(&shape(), kind, 42, 1.0).unwrap();
            assert_eq!(a, b);
            let c = random_init(&shape(), kind, 43, 1.0).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let m = random_init(&shape(), ModelKind::CI, 1, 0.5).unwrap();
        for t in m.theta().iter().chain(m.recognition().unwrap()) {
            let w = t.child_space().total();
            for row in t.table().chunks(w) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!((m.prior_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_concentration_is_near_uniform() {
        let m = random_init(&shape(), ModelKind::ICI, 7, 1e3).unwrap();
        for t in m.theta() {
            for &v in t.table() {
                assert!((v - 1.0 / 3.0).abs() < 0.1);
            }
        }
        for &v in m.recognition().unwrap()[0].table() {
            assert!((v - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn sl_and_ci_share_generative_draws() {
        let s = ModelShape::new(StateSpace::uniform(2, 3).unwrap(), StateSpace::single(4).unwrap());
        let a = random_init(&s, ModelKind::SL, 9, 1.0).unwrap();
        let b = random_init(&s, ModelKind::CI, 9, 1.0).unwrap();
        assert_eq!(a.theta(), b.theta());
        assert_eq!(a.prior_probs(), b.prior_probs());
    }

    #[test]
    fn bad_concentration() {
        assert!(random_init(&shape(), ModelKind::SL, 0, 0.0).is_err());
    }
}
