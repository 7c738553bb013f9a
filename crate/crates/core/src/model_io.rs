//! Versioned JSON documents for trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{Cpt, Pmf, StateSpace};
use crate::error::{Error, Result};
use crate::models::{GenerativeModel, LatentPrior, ModelKind, ModelShape};

pub const MODEL_FORMAT: &str = "lodkit-model";
pub const MODEL_VERSION: u32 = 1;
pub const LAYOUT: &str = "row-major, last variable fastest";

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    layout: String,
    kind: ModelKind,
    obs_cards: Vec<usize>,
    lat_cards: Vec<usize>,
    /// One table per observed variable, `[y][x_i]`.
    theta: Vec<Vec<f64>>,
    prior: PriorDoc,
    /// One table per latent variable, `[x][y_j]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recognition: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PriorDoc {
    Joint(Vec<f64>),
    Factored(Vec<Vec<f64>>),
}

pub fn model_to_json(model: &GenerativeModel) -> Result<String> {
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        layout: LAYOUT.into(),
        kind: model.kind(),
        obs_cards: model.obs_space().cards().to_vec(),
        lat_cards: model.lat_space().cards().to_vec(),
        theta: model.theta().iter().map(|t| t.table().to_vec()).collect(),
        prior: match model.prior() {
            LatentPrior::Joint(p) => PriorDoc::Joint(p.probs().to_vec()),
            LatentPrior::Factored(ps) => PriorDoc::Factored(ps.iter().map(|p| p.probs().to_vec()).collect()),
        },
        recognition: model
            .recognition()
            .map(|r| r.iter().map(|t| t.table().to_vec()).collect()),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn model_from_json(s: &str) -> Result<GenerativeModel> {
    let doc: ModelDoc = serde_json::from_str(s)?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::domain(format!("not a model document: format {:?}", doc.format)));
    }
    if doc.version != MODEL_VERSION {
        return Err(Error::domain(format!("unsupported model version {}", doc.version)));
    }
    if doc.layout != LAYOUT {
        return Err(Error::domain(format!("unsupported layout {:?}", doc.layout)));
    }
    let obs = StateSpace::new(doc.obs_cards)?;
    let lat = StateSpace::new(doc.lat_cards)?;
    if doc.theta.len() != obs.num_vars() {
        return Err(Error::domain("one theta table per observed variable expected"));
    }
    let theta = doc
        .theta
        .into_iter()
        .zip(obs.cards())
        .map(|(t, &k)| Cpt::new(StateSpace::single(k)?, lat.clone(), t))
        .collect::<Result<Vec<_>>>()?;
    let prior = match doc.prior {
        PriorDoc::Joint(p) => LatentPrior::Joint(Pmf::new(lat.clone(), p)?),
        PriorDoc::Factored(ps) => {
            if ps.len() != lat.num_vars() {
                return Err(Error::domain("one prior factor per latent variable expected"));
            }
            LatentPrior::Factored(
                ps.into_iter()
                    .zip(lat.cards())
                    .map(|(p, &c)| Pmf::new(StateSpace::single(c)?, p))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let recognition = doc
        .recognition
        .map(|r| {
            if r.len() != lat.num_vars() {
                return Err(Error::domain("one recognition table per latent variable expected"));
            }
            r.into_iter()
                .zip(lat.cards())
                .map(|(t, &c)| Cpt::new(StateSpace::single(c)?, obs.clone(), t))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    GenerativeModel::new(doc.kind, ModelShape::new(obs, lat), theta, prior, recognition)
}

pub fn save_model(model: &GenerativeModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GenerativeModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
