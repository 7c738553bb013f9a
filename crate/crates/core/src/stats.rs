//! Offset removal across patch sets and Pearson correlation with a
//! two-tailed t-test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;

/// One score for a (model kind, size, patch set) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub kind: ModelKind,
    pub size: usize,
    pub patch_set: usize,
    pub value: f64,
}

/// `V_q(m,s,n) = V_a(m) + V(m,s,n) − V(m,s₀,n)`, where `s₀` is the smallest
/// size recorded for kind `m` and `V_a(m)` the mean of `V(m,s₀,·)` over patch
/// sets. Output order follows the input.
pub fn offset_removal(records: &[ScoreRecord]) -> Result<Vec<ScoreRecord>> {
    let mut smallest: BTreeMap<ModelKind, usize> = BTreeMap::new();
    for r in records {
        let s = smallest.entry(r.kind).or_insert(r.size);
        *s = (*s).min(r.size);
    }
    let mut base: BTreeMap<(ModelKind, usize), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| smallest[&r.kind] == r.size) {
        if base.insert((r.kind, r.patch_set), r.value).is_some() {
            return Err(Error::domain(format!(
                "duplicate entry for {} size {} patch set {}",
                r.kind, r.size, r.patch_set
            )));
        }
    }
    let mut mean: BTreeMap<ModelKind, (f64, usize)> = BTreeMap::new();
    for (&(k, _), &v) in &base {
        let e = mean.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    records
        .iter()
        .map(|r| {
            let b = base.get(&(r.kind, r.patch_set)).ok_or_else(|| {
                Error::domain(format!(
                    "{} patch set {} has no size-{} entry",
                    r.kind, r.patch_set, smallest[&r.kind]
                ))
            })?;
            let (sum, n) = mean[&r.kind];
            Ok(ScoreRecord {
                value: sum / n as f64 + r.value - b,
                ..*r
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-tailed.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::domain(format!("length mismatch {} vs {}", n, ys.len())));
    }
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 samples, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::domain("correlation undefined for zero variance"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if 1.0 - r.abs() <= f64::EPSILON {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        two_tailed_t(t, df)
    };
    Ok(CorrelationResult { r, p_value, n })
}

/// `P(|T| ≥ |t|)` for Student-t with `df` degrees of freedom.
pub fn two_tailed_t(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Student-t CDF.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * two_tailed_t(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

// Lanczos, g = 7, n = 9
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

// modified Lentz
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
