use std::path::Path;

use lodkit::experiment::{AdjustedRow, CorrelationRow, StackRow, SummaryRow, TwoLayerRow};
use lodkit::stacking::Bijection;

use crate::Failure;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, Failure> {
    csv::Writer::from_path(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(Failure::io(path))
}

macro_rules! rec {
    ($w:expr, $path:expr, [$($v:expr),* $(,)?]) => {
        $w.write_record([$($v.to_string()),*])
            .map_err(|e| Failure::Data(format!("{}: {e}", $path.display())))?
    };
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_raw(path: &Path, rows: &[TwoLayerRow], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(
        w,
        path,
        [
            "patch_set",
            "kind",
            "n_y",
            "latent_states",
            "loglik",
            "mi",
            "lod",
            "iters",
            "converged",
            "restart_selected",
            "recognition_gap",
            "fingerprint",
        ]
    );
    for r in rows {
        rec!(
            w,
            path,
            [
                r.patch_set,
                r.kind,
                r.size,
                r.latent_states,
                r.scores.loglik,
                r.scores.mi,
                r.scores.lod,
                r.iters,
                r.converged,
                r.restart_selected,
                opt(r.recognition_gap),
                fp,
            ]
        );
    }
    finish(w, path)
}

pub fn write_adjusted(path: &Path, rows: &[AdjustedRow], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(
        w,
        path,
        ["patch_set", "kind", "n_y", "loglik", "mi", "lod", "fingerprint"]
    );
    for r in rows {
        rec!(
            w,
            path,
            [
                r.patch_set,
                r.kind,
                r.size,
                r.scores.loglik,
                r.scores.mi,
                r.scores.lod,
                fp
            ]
        );
    }
    finish(w, path)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(w, path, ["kind", "n_y", "score", "mean", "stddev", "n", "fingerprint"]);
    for r in rows {
        rec!(w, path, [r.kind, r.size, r.score.as_str(), r.mean, r.stddev, r.n, fp]);
    }
    finish(w, path)
}

pub fn write_stack(path: &Path, rows: &[StackRow], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(
        w,
        path,
        [
            "lower_kind",
            "n_y",
            "k_z",
            "patch_set",
            "lod_xy",
            "lod_xz",
            "mi_xy",
            "mi_xz",
            "higher_loglik",
            "fingerprint",
        ]
    );
    for r in rows {
        rec!(
            w,
            path,
            [
                r.lower_kind,
                r.n_y,
                r.k_z,
                r.patch_set,
                r.lod_xy,
                r.lod_xz,
                r.mi_xy,
                r.mi_xz,
                r.higher_loglik,
                fp,
            ]
        );
    }
    finish(w, path)
}

pub fn write_correlations(path: &Path, rows: &[CorrelationRow], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(w, path, ["model", "score_kind", "r", "p", "n", "fingerprint"]);
    for c in rows {
        let (r, p, n) = match c.result {
            Some(res) => (res.r.to_string(), res.p_value.to_string(), res.n.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        rec!(w, path, [c.kind, c.score.as_str(), r, p, n, fp]);
    }
    finish(w, path)
}

pub fn write_bijections(path: &Path, rows: &[(usize, usize, Bijection)], fp: &str) -> Result<(), Failure> {
    let mut w = writer(path)?;
    rec!(w, path, ["patch_set", "n_y", "codes", "fingerprint"]);
    for (n, s, b) in rows {
        let codes = b.as_slice().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        rec!(w, path, [n, s, codes, fp]);
    }
    finish(w, path)
}
