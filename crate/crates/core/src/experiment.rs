//! Drivers for the worked example, the two-layer study over image patches
//! and the stacking study. Results are plain structs; writing them out is
//! left to callers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, StateSpace};
use crate::error::{Error, Result};
use crate::ingestion::{
    quantize_and_extract_with, synthetic_dataset, validate_patch_set, EmpiricalDataset, Images, PatchSpec, Quantization,
};
use crate::measures::{evaluate, lod, mi_data, EvalScores};
use crate::models::{GenerativeModel, ModelKind, ModelShape};
use crate::stacking::{
    connected_scores, fit_higher, lower_connected_scores, pushforward_latent, sl_to_binary, Bijection, StackedModel,
    DEFAULT_CANDIDATES,
};
use crate::stats::{offset_removal, pearson, CorrelationResult, ScoreRecord};
use crate::training::{fit, restart_seed, TrainConfig, TrainMode};

/// Derives an independent seed for a job identified by `path`.
pub fn job_seed(seed: u64, path: &[usize]) -> u64 {
    path.iter().fold(seed, |s, &k| restart_seed(s, k))
}

// ---------------------------------------------------------------- example

/// The single-variable example: `p̃(x) ∝ x` over six states and three latent
/// states, each latent state owning two observed states.
pub fn example_data() -> Pmf {
    Pmf::from_weights(
        StateSpace::single(6).expect("6 states"),
        (1..=6).map(f64::from).collect(),
    )
    .expect("positive weights")
}

/// SL model with a deterministic posterior `y = groups[x]` whose joint is
/// `p̃(x)[y = groups[x]]`.
pub fn deterministic_model(pdata: &Pmf, groups: &[usize], latent_states: usize) -> Result<GenerativeModel> {
    let k = pdata.space().total();
    if groups.len() != k || groups.iter().any(|&g| g >= latent_states) {
        return Err(Error::domain("groups must assign every observed state a latent state"));
    }
    let mut joint = vec![0.0; k * latent_states];
    for (x, &g) in groups.iter().enumerate() {
        joint[x * latent_states + g] = pdata.get(x);
    }
    let joint = Pmf::new(StateSpace::new(vec![k, latent_states])?, joint)?;
    GenerativeModel::single_latent_from_joint(&joint)
}

/// Best-LOD assignment: adjacent pairs.
pub const BEST_LOD_GROUPS: [usize; 6] = [0, 0, 1, 1, 2, 2];
/// Best-MI assignment: pairs of equal total mass.
pub const BEST_MI_GROUPS: [usize; 6] = [0, 1, 2, 2, 1, 0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

impl GoldenCheck {
    pub fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

pub fn table2_report() -> Result<Vec<GoldenCheck>> {
    let p = example_data();
    let p1 = deterministic_model(&p, &BEST_LOD_GROUPS, 3)?;
    let p2 = deterministic_model(&p, &BEST_MI_GROUPS, 3)?;
    let check = |name: &str, value: f64, expected: f64, tolerance: f64| GoldenCheck {
        name: name.into(),
        value,
        expected,
        tolerance,
    };
    Ok(vec![
        check("lod_p1", lod(&p1, &p)?, 0.0137, 5e-4),
        check("mi_p1", mi_data(&p1, &p)?, 0.983, 1e-3),
        check("lod_p2", lod(&p2, &p)?, 0.129, 1e-3),
        check("mi_p2", mi_data(&p2, &p)?, 1.0986, 1e-3),
    ])
}

/// Blocks of observed states sharing a latent state, each sorted, blocks
/// ordered by first element. Equal for assignments that differ only by a
/// relabeling of latent states.
pub fn canonical_partition(groups: &[usize]) -> Vec<Vec<usize>> {
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (x, &g) in groups.iter().enumerate() {
        blocks.entry(g).or_default().push(x);
    }
    let mut out: Vec<Vec<usize>> = blocks.into_values().collect();
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub assignments: usize,
    pub min_lod: f64,
    /// Distinct partitions attaining the minimum LOD (within 1e-12).
    pub min_lod_partitions: Vec<Vec<Vec<usize>>>,
    pub max_mi: f64,
    pub max_mi_partitions: Vec<Vec<Vec<usize>>>,
}

impl OracleReport {
    pub fn lod_matches(&self) -> bool {
        self.min_lod_partitions == vec![canonical_partition(&BEST_LOD_GROUPS)]
    }

    pub fn mi_matches(&self) -> bool {
        self.max_mi_partitions == vec![canonical_partition(&BEST_MI_GROUPS)]
    }
}

/// LOD, MI and canonical partition of one assignment.
type Scored = (f64, f64, Vec<Vec<usize>>);

/// Scores every deterministic assignment of the six observed states to three
/// latent states.
pub fn oracle_report() -> Result<OracleReport> {
    const TIE: f64 = 1e-12;
    let p = example_data();
    let (k, l) = (6usize, 3usize);
    let n = l.pow(k as u32);
    let mut scored: Vec<Scored> = Vec::with_capacity(n);
    for code in 0..n {
        let groups: Vec<usize> = (0..k).map(|x| code / l.pow((k - 1 - x) as u32) % l).collect();
        let m = deterministic_model(&p, &groups, l)?;
        scored.push((lod(&m, &p)?, mi_data(&m, &p)?, canonical_partition(&groups)));
    }
    let min_lod = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_mi = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let collect = |pick: &dyn Fn(&Scored) -> bool| {
        let mut parts: Vec<Vec<Vec<usize>>> = scored.iter().filter(|s| pick(s)).map(|s| s.2.clone()).collect();
        parts.sort();
        parts.dedup();
        parts
    };
    Ok(OracleReport {
        assignments: n,
        min_lod,
        min_lod_partitions: collect(&|s| s.0 <= min_lod + TIE),
        max_mi,
        max_mi_partitions: collect(&|s| s.1 >= max_mi - TIE),
    })
}

// ---------------------------------------------------------------- two-layer

/// Where per-patch datasets come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Mnist,
    Synthetic { strength: f64 },
}

pub const DEFAULT_SYNTHETIC_STRENGTH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerConfig {
    pub kinds: Vec<ModelKind>,
    /// Latent sizes `s`: SL gets `2^s` states, the others `s` binary variables.
    pub sizes: Vec<usize>,
    pub patches: Vec<PatchSpec>,
    pub quantization: Quantization,
    pub data: DataSource,
    /// `mode` is ignored; each kind uses its own trainer.
    pub train: TrainConfig,
}

impl Default for TwoLayerConfig {
    fn default() -> Self {
        TwoLayerConfig {
            kinds: ModelKind::ALL.to_vec(),
            sizes: (1..=6).collect(),
            patches: crate::ingestion::default_patch_locations(),
            quantization: Quantization::EqualWidth,
            data: DataSource::Synthetic {
                strength: DEFAULT_SYNTHETIC_STRENGTH,
            },
            train: TrainConfig::default(),
        }
    }
}

impl TwoLayerConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        validate_patch_set(&self.patches)?;
        if self.kinds.is_empty() || self.sizes.is_empty() || self.patches.is_empty() {
            return Err(Error::domain("kinds, sizes and patches must be non-empty"));
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s == 0 || s > 16) {
            return Err(Error::domain(format!("latent size {s} outside 1..=16")));
        }
        Ok(())
    }
}

pub fn shape_for(kind: ModelKind, obs: &StateSpace, size: usize) -> Result<ModelShape> {
    match kind {
        ModelKind::SL => ModelShape::single_latent(obs.clone(), 1 << size),
        _ => ModelShape::binary_latents(obs.clone(), size),
    }
}

/// One dataset per patch, either quantized from `images` or synthetic.
pub fn patch_datasets(config: &TwoLayerConfig, images: Option<&Images>) -> Result<Vec<EmpiricalDataset>> {
    config
        .patches
        .iter()
        .enumerate()
        .map(|(n, spec)| match (&config.data, images) {
            (DataSource::Mnist, Some(im)) => quantize_and_extract_with(im, spec, config.quantization),
            (DataSource::Mnist, None) => Err(Error::domain("MNIST data source selected but no images given")),
            (DataSource::Synthetic { strength }, _) => {
                synthetic_dataset(job_seed(config.train.seed, &[0xDA7A, n]), &spec.space()?, *strength)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerRow {
    pub patch_set: usize,
    pub kind: ModelKind,
    pub size: usize,
    pub latent_states: usize,
    pub scores: EvalScores,
    pub iters: usize,
    pub converged: bool,
    pub restart_selected: usize,
    pub recognition_gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedLower {
    pub patch_set: usize,
    pub kind: ModelKind,
    pub size: usize,
    pub model: GenerativeModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Loglik,
    Mi,
    Lod,
}

impl Score {
    pub const ALL: [Score; 3] = [Score::Loglik, Score::Mi, Score::Lod];

    pub fn of(self, s: &EvalScores) -> f64 {
        match self {
            Score::Loglik => s.loglik,
            Score::Mi => s.mi,
            Score::Lod => s.lod,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Score::Loglik => "loglik",
            Score::Mi => "mi",
            Score::Lod => "lod",
        }
    }
}

/// Offset-removed scores, row-aligned with [`TwoLayerResult::rows`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedRow {
    pub patch_set: usize,
    pub kind: ModelKind,
    pub size: usize,
    pub scores: EvalScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: ModelKind,
    pub size: usize,
    pub score: Score,
    pub mean: f64,
    /// Sample standard deviation over patch sets (0 for a single set).
    pub stddev: f64,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct TwoLayerResult {
    pub rows: Vec<TwoLayerRow>,
    pub adjusted: Vec<AdjustedRow>,
    pub summary: Vec<SummaryRow>,
    pub models: Vec<TrainedLower>,
}

/// Trains every (patch set, kind, size) model and scores it.
pub fn run_two_layer(config: &TwoLayerConfig, datasets: &[EmpiricalDataset]) -> Result<TwoLayerResult> {
    config.validate()?;
    if datasets.len() != config.patches.len() {
        return Err(Error::domain("one dataset per patch expected"));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|n| {
            config
                .kinds
                .iter()
                .enumerate()
                .flat_map(move |(ki, _)| config.sizes.iter().map(move |&s| (n, ki, s)))
        })
        .collect();
    let trained = jobs
        .par_iter()
        .map(|&(n, ki, s)| {
            let kind = config.kinds[ki];
            let pdata = datasets[n].pmf();
            let shape = shape_for(kind, pdata.space(), s)?;
            let cfg = TrainConfig {
                seed: job_seed(config.train.seed, &[n, kind as usize, s]),
                mode: TrainMode::for_kind(kind),
                ..config.train.clone()
            };
            let (model, report) = fit(kind, &shape, pdata, &cfg)?;
            let scores = evaluate(&model, pdata)?;
            Ok((
                TwoLayerRow {
                    patch_set: n,
                    kind,
                    size: s,
                    latent_states: shape.lat.total(),
                    scores,
                    iters: report.iters_run,
                    converged: report.converged,
                    restart_selected: report.restart_index_selected,
                    recognition_gap: report.recognition_gap,
                },
                TrainedLower {
                    patch_set: n,
                    kind,
                    size: s,
                    model,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, models): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    let adjusted = adjust(&rows)?;
    let summary = summarize(&adjusted);
    Ok(TwoLayerResult {
        rows,
        adjusted,
        summary,
        models,
    })
}

/// Applies offset removal to each score separately.
pub fn adjust(rows: &[TwoLayerRow]) -> Result<Vec<AdjustedRow>> {
    let per_score = Score::ALL
        .iter()
        .map(|&sc| {
            let recs: Vec<ScoreRecord> = rows
                .iter()
                .map(|r| ScoreRecord {
                    kind: r.kind,
                    size: r.size,
                    patch_set: r.patch_set,
                    value: sc.of(&r.scores),
                })
                .collect();
            offset_removal(&recs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, r)| AdjustedRow {
            patch_set: r.patch_set,
            kind: r.kind,
            size: r.size,
            scores: EvalScores {
                loglik: per_score[0][i].value,
                mi: per_score[1][i].value,
                lod: per_score[2][i].value,
            },
        })
        .collect())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(adjusted: &[AdjustedRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(ModelKind, usize, Score), Vec<f64>> = BTreeMap::new();
    for r in adjusted {
        for sc in Score::ALL {
            cells.entry((r.kind, r.size, sc)).or_default().push(sc.of(&r.scores));
        }
    }
    cells
        .into_iter()
        .map(|((kind, size, score), v)| {
            let (mean, stddev) = mean_std(&v);
            SummaryRow {
                kind,
                size,
                score,
                mean,
                stddev,
                n: v.len(),
            }
        })
        .collect()
}

fn summary_mean(summary: &[SummaryRow], kind: ModelKind, size: usize, score: Score) -> Option<f64> {
    summary
        .iter()
        .find(|r| r.kind == kind && r.size == size && r.score == score)
        .map(|r| r.mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Qualitative checks on mean adjusted scores: for sizes ≥ 4, CI has the
/// lowest LOD and the order CI < SL < ICI < IL holds; MI grows with size
/// for every kind.
pub fn trend_checks(summary: &[SummaryRow]) -> Vec<TrendCheck> {
    let order = [ModelKind::CI, ModelKind::SL, ModelKind::ICI, ModelKind::IL];
    let mut sizes: Vec<usize> = summary.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out = Vec::new();
    let mut lowest = Vec::new();
    let mut ordered = Vec::new();
    for &s in sizes.iter().filter(|&&s| s >= 4) {
        let lods: Option<Vec<f64>> = order.iter().map(|&k| summary_mean(summary, k, s, Score::Lod)).collect();
        let Some(lods) = lods else { continue };
        let detail = order
            .iter()
            .zip(&lods)
            .map(|(k, v)| format!("{k}={v:.5}"))
            .collect::<Vec<_>>()
            .join(" ");
        lowest.push((lods[1..].iter().all(|&v| lods[0] < v), format!("N_y={s}: {detail}")));
        ordered.push((lods.windows(2).all(|w| w[0] < w[1]), format!("N_y={s}: {detail}")));
    }
    let fold = |name: &str, v: Vec<(bool, String)>| TrendCheck {
        name: name.into(),
        passed: !v.is_empty() && v.iter().all(|c| c.0),
        detail: if v.is_empty() {
            "no sizes >= 4 with all four kinds".into()
        } else {
            v.into_iter().map(|c| c.1).collect::<Vec<_>>().join("; ")
        },
    };
    out.push(fold("ci_lowest_lod", lowest));
    out.push(fold("lod_order_ci_sl_ici_il", ordered));
    for kind in ModelKind::ALL {
        let mis: Vec<(usize, f64)> = sizes
            .iter()
            .filter_map(|&s| summary_mean(summary, kind, s, Score::Mi).map(|m| (s, m)))
            .collect();
        if mis.len() < 2 {
            continue;
        }
        out.push(TrendCheck {
            name: format!("mi_increasing_{}", kind.as_str().to_lowercase()),
            passed: mis.windows(2).all(|w| w[1].1 > w[0].1),
            detail: mis
                .iter()
                .map(|(s, m)| format!("{s}:{m:.4}"))
                .collect::<Vec<_>>()
                .join(" "),
        });
    }
    out
}

// ---------------------------------------------------------------- stacking

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    /// Lower sizes `N_y` to stack on; higher sizes are `K_z = 2..=2^(N_y-2)`.
    pub sizes: Vec<usize>,
    pub candidates: usize,
    pub train: TrainConfig,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            sizes: (3..=6).collect(),
            candidates: DEFAULT_CANDIDATES,
            train: TrainConfig::default(),
        }
    }
}

pub fn higher_sizes(lower_size: usize) -> Vec<usize> {
    if lower_size < 3 {
        return Vec::new();
    }
    (2..=1usize << (lower_size - 2)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackRow {
    pub lower_kind: ModelKind,
    pub n_y: usize,
    pub k_z: usize,
    pub patch_set: usize,
    pub lod_xy: f64,
    pub lod_xz: f64,
    pub mi_xy: f64,
    pub mi_xz: f64,
    pub higher_loglik: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub kind: ModelKind,
    pub score: Score,
    /// `None` when the correlation is undefined (too few rows or no variance).
    pub result: Option<CorrelationResult>,
}

#[derive(Clone, Debug)]
pub struct StackResult {
    pub rows: Vec<StackRow>,
    pub correlations: Vec<CorrelationRow>,
    /// Chosen bijection per converted SL lower, keyed by (patch set, N_y).
    pub bijections: Vec<(usize, usize, Bijection)>,
}

/// Stacks higher SL models on every eligible lower model.
pub fn run_stack(config: &StackConfig, lowers: &[TrainedLower], datasets: &[EmpiricalDataset]) -> Result<StackResult> {
    config.train.validate()?;
    let eligible: Vec<&TrainedLower> = lowers.iter().filter(|l| config.sizes.contains(&l.size)).collect();
    let missing: Vec<String> = config
        .sizes
        .iter()
        .flat_map(|&s| {
            ModelKind::ALL
                .into_iter()
                .flat_map(move |k| (0..datasets.len()).map(move |n| (k, s, n)))
        })
        .filter(|&(k, s, n)| !eligible.iter().any(|l| l.kind == k && l.size == s && l.patch_set == n))
        .map(|(k, s, n)| format!("{k}/N_y={s}/patch={n}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::domain(format!("missing lower models: {}", missing.join(", "))));
    }
    let per_lower = eligible
        .par_iter()
        .map(|l| {
            let data = datasets
                .get(l.patch_set)
                .ok_or_else(|| Error::domain(format!("no dataset for patch set {}", l.patch_set)))?;
            let pdata = data.pmf();
            let seed = job_seed(config.train.seed, &[l.patch_set, l.kind as usize, l.size]);
            let em = TrainConfig {
                seed,
                mode: TrainMode::Em,
                ..config.train.clone()
            };
            let (lower, bijection) = if l.kind == ModelKind::SL {
                let (m, b) = sl_to_binary(&l.model, pdata, config.candidates, &em)?;
                (m, Some(b))
            } else {
                (l.model.clone(), None)
            };
            let pushed = pushforward_latent(&lower, pdata)?;
            let mut rows = Vec::new();
            let mut xy: Option<EvalScores> = None;
            for k_z in higher_sizes(l.size) {
                let (higher, _) = fit_higher(&pushed, k_z, &em.with_seed(job_seed(seed, &[k_z])))?;
                let stacked = StackedModel::new(lower.clone(), bijection.clone(), higher, pdata.clone())?;
                let xz = connected_scores(&stacked)?;
                let xy = match &xy {
                    Some(v) => *v,
                    None => {
                        let v = lower_connected_scores(&stacked)?;
                        xy = Some(v);
                        v
                    }
                };
                rows.push(StackRow {
                    lower_kind: l.kind,
                    n_y: l.size,
                    k_z,
                    patch_set: l.patch_set,
                    lod_xy: xy.lod,
                    lod_xz: xz.lod,
                    mi_xy: xy.mi,
                    mi_xz: xz.mi,
                    higher_loglik: xz.loglik,
                });
            }
            Ok((rows, bijection.map(|b| (l.patch_set, l.size, b))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut bijections = Vec::new();
    for (r, b) in per_lower {
        rows.extend(r);
        bijections.extend(b);
    }
    rows.sort_by_key(|r| (r.lower_kind, r.patch_set, r.n_y, r.k_z));
    let correlations = correlation_table(&rows);
    Ok(StackResult {
        rows,
        correlations,
        bijections,
    })
}

/// Pearson correlation of X-Y against X-Z scores per lower kind, for LOD and MI.
pub fn correlation_table(rows: &[StackRow]) -> Vec<CorrelationRow> {
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        let sel: Vec<&StackRow> = rows.iter().filter(|r| r.lower_kind == kind).collect();
        if sel.is_empty() {
            continue;
        }
        for (score, xy, xz) in [
            (
                Score::Lod,
                sel.iter().map(|r| r.lod_xy).collect::<Vec<_>>(),
                sel.iter().map(|r| r.lod_xz).collect::<Vec<_>>(),
            ),
            (
                Score::Mi,
                sel.iter().map(|r| r.mi_xy).collect(),
                sel.iter().map(|r| r.mi_xz).collect(),
            ),
        ] {
            out.push(CorrelationRow {
                kind,
                score,
                result: pearson(&xy, &xz).ok(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_goldens() {
        for c in table2_report().unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn oracle_recovers_both_assignments() {
        let r = oracle_report().unwrap();
        assert_eq!(r.assignments, 729);
        assert!(r.lod_matches(), "{:?}", r.min_lod_partitions);
        assert!(r.mi_matches(), "{:?}", r.max_mi_partitions);
        assert!((r.min_lod - 0.0137).abs() < 5e-4);
        assert!((r.max_mi - 3f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn partitions_ignore_labels() {
        assert_eq!(
            canonical_partition(&[2, 2, 0, 0, 1, 1]),
            canonical_partition(&BEST_LOD_GROUPS)
        );
        assert_ne!(
            canonical_partition(&BEST_MI_GROUPS),
            canonical_partition(&BEST_LOD_GROUPS)
        );
    }

    #[test]
    fn higher_size_sweep() {
        let counts: Vec<usize> = (3..=6).map(|s| higher_sizes(s).len()).collect();
        assert_eq!(counts, vec![1, 3, 7, 15]);
        assert_eq!(8 * counts.iter().sum::<usize>(), 208);
        assert!(higher_sizes(2).is_empty());
    }

    fn tiny_config() -> TwoLayerConfig {
        TwoLayerConfig {
            sizes: vec![1, 2, 3],
            patches: crate::ingestion::default_patch_locations()[..2].to_vec(),
            train: TrainConfig {
                restarts: 2,
                max_iters: 60,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn small_two_layer_and_stack() {
        let cfg = tiny_config();
        let data = patch_datasets(&cfg, None).unwrap();
        let res = run_two_layer(&cfg, &data).unwrap();
        assert_eq!(res.rows.len(), 2 * 4 * 3);
        assert_eq!(res.summary.len(), 4 * 3 * 3);
        // the smallest size collapses to its cross-patch mean
        for r in res.adjusted.iter().filter(|r| r.size == 1) {
            let m = summary_mean(&res.summary, r.kind, 1, Score::Lod).unwrap();
            assert!((r.scores.lod - m).abs() < 1e-12);
        }
        let again = run_two_layer(&cfg, &data).unwrap();
        assert_eq!(res.rows, again.rows);

        let sc = StackConfig {
            sizes: vec![3],
            candidates: 3,
            train: cfg.train.clone(),
        };
        let st = run_stack(&sc, &res.models, &data).unwrap();
        assert_eq!(st.rows.len(), 4 * 2);
        assert_eq!(st.bijections.len(), 2);
        assert_eq!(st.correlations.len(), 8);
        assert!(st.correlations.iter().all(|c| c.result.is_none()));
        for r in &st.rows {
            assert!(r.mi_xz <= r.mi_xy + 1e-9);
        }
        let err = run_stack(&StackConfig { sizes: vec![4], ..sc }, &res.models, &data).unwrap_err();
        assert!(err.to_string().contains("missing lower models"));
    }

    #[test]
    fn mnist_source_needs_images() {
        let cfg = TwoLayerConfig {
            data: DataSource::Mnist,
            ..tiny_config()
        };
        assert!(patch_datasets(&cfg, None).is_err());
    }
}
