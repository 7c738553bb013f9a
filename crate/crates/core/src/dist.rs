//! Dense probability tables over small discrete product spaces.
//!
//! Every table uses the same mixed-radix layout: row-major with the first
//! variable most significant and the last variable varying fastest. CPT
//! layouts, model serialization and IDX ingestion all rely on it.

use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before any logarithm is taken.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on the total mass of a table before it is renormalized.
pub const NORM_TOL: f64 = 1e-9;

/// How zero probabilities are treated where a logarithm is needed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SupportPolicy {
    /// Clamp to [`PROB_FLOOR`] before taking logs.
    #[default]
    Smoothed,
    /// Refuse, reporting the offending state.
    Strict,
}

/// Sums within rounding noise of one are left alone so that re-validating
/// a normalized table is bit-exact.
#[inline]
fn is_unit(sum: f64) -> bool {
    (sum - 1.0).abs() <= 8.0 * f64::EPSILON
}

#[inline]
pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Cardinalities of an ordered tuple of finite discrete variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateSpace {
    cards: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl StateSpace {
    pub fn new(cards: Vec<usize>) -> Result<Self> {
        if cards.is_empty() {
            return Err(Error::domain("state space needs at least one variable"));
        }
        if let Some(pos) = cards.iter().position(|&c| c == 0) {
            return Err(Error::domain(format!("variable {pos} has cardinality 0")));
        }
        let mut total: usize = 1;
        for &c in &cards {
            total = total
                .checked_mul(c)
                .ok_or_else(|| Error::domain(format!("state space {cards:?} overflows usize")))?;
        }
        let mut strides = vec![1; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        Ok(StateSpace { cards, strides, total })
    }

    /// Space of a single variable with `card` states.
    pub fn single(card: usize) -> Result<Self> {
        Self::new(vec![card])
    }

    /// `n` variables of identical cardinality.
    pub fn uniform(n: usize, card: usize) -> Result<Self> {
        Self::new(vec![card; n])
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn index(&self, state: &[usize]) -> Result<usize> {
        if state.len() != self.cards.len() {
            return Err(Error::domain(format!(
                "state has {} values, space has {} variables",
                state.len(),
                self.cards.len()
            )));
        }
        let mut flat = 0;
        for (var, (&v, &c)) in state.iter().zip(&self.cards).enumerate() {
            if v >= c {
                return Err(Error::domain(format!(
                    "value {v} of variable {var} out of range (cardinality {c})"
                )));
            }
            flat += v * self.strides[var];
        }
        Ok(flat)
    }

    /// Inverse of [`StateSpace::index`].
    ///
    /// Panics if `flat >= total`.
    pub fn unindex(&self, flat: usize) -> Vec<usize> {
        assert!(flat < self.total, "flat index {flat} out of range {}", self.total);
        self.cards
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (flat / s) % c)
            .collect()
    }

    #[inline]
    pub fn digit(&self, flat: usize, var: usize) -> usize {
        (flat / self.strides[var]) % self.cards[var]
    }

    /// Variables of `self` followed by those of `other`.
    pub fn concat(&self, other: &StateSpace) -> StateSpace {
        let mut cards = self.cards.clone();
        cards.extend_from_slice(&other.cards);
        StateSpace::new(cards).expect("product of valid spaces")
    }

    /// Sub-space over `vars`, in the given order.
    pub fn subspace(&self, vars: &[usize]) -> Result<StateSpace> {
        let cards = vars
            .iter()
            .map(|&v| {
                self.cards
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::domain(format!("variable {v} not in space")))
            })
            .collect::<Result<Vec<_>>>()?;
        StateSpace::new(cards)
    }

    /// Flat index of every state projected onto `vars`.
    pub(crate) fn projection(&self, vars: &[usize]) -> Result<(StateSpace, Vec<usize>)> {
        let sub = self.subspace(vars)?;
        let map = (0..self.total)
            .map(|flat| {
                vars.iter()
                    .zip(sub.strides())
                    .map(|(&v, &s)| self.digit(flat, v) * s)
                    .sum()
            })
            .collect();
        Ok((sub, map))
    }
}

/// Dense probability mass function over a [`StateSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    space: StateSpace,
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates a table that already sums to one within [`NORM_TOL`] and
    /// renormalizes it exactly.
    pub fn new(space: StateSpace, probs: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&space, &probs)?;
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("pmf sums to {sum}, expected 1")));
        }
        Ok(Pmf::normalized(space, probs, sum))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        let sum = check_entries(&space, &weights)?;
        if sum <= 0.0 {
            return Err(Error::domain("weights have zero total mass"));
        }
        Ok(Pmf::normalized(space, weights, sum))
    }

    fn normalized(space: StateSpace, mut probs: Vec<f64>, sum: f64) -> Self {
        if !is_unit(sum) {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Pmf { space, probs }
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.total();
        Pmf {
            space,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(space: StateSpace, flat: usize) -> Result<Self> {
        if flat >= space.total() {
            return Err(Error::domain(format!("state {flat} out of range")));
        }
        let mut probs = vec![0.0; space.total()];
        probs[flat] = 1.0;
        Ok(Pmf { space, probs })
    }

    /// Independent joint `self ⊗ other` over the concatenated space.
    pub fn product(&self, other: &Pmf) -> Pmf {
        let space = self.space.concat(&other.space);
        let probs = self
            .probs
            .iter()
            .flat_map(|&a| other.probs.iter().map(move |&b| a * b))
            .collect();
        Pmf { space, probs }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.probs[flat]
    }

    /// Indices with non-zero mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }

    /// The same table viewed as a single variable over all states.
    pub fn flattened(&self) -> Pmf {
        Pmf {
            space: StateSpace::single(self.space.total()).expect("non-empty space"),
            probs: self.probs.clone(),
        }
    }

    /// Sums out every variable not in `keep`. The result's variables follow
    /// the ascending order of `keep`.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Pmf> {
        let keep = sorted_vars(keep, self.space.num_vars())?;
        if keep.is_empty() {
            return Err(Error::domain("marginalize needs a non-empty keep set"));
        }
        let (sub, map) = self.space.projection(&keep)?;
        let mut probs = vec![0.0; sub.total()];
        for (&p, &j) in self.probs.iter().zip(&map) {
            probs[j] += p;
        }
        let sum: f64 = probs.iter().sum();
        Ok(Pmf::normalized(sub, probs, sum))
    }

    /// Conditional table of the remaining variables given `given`.
    pub fn condition(&self, given: &[usize]) -> Result<Cpt> {
        let n = self.space.num_vars();
        let given = sorted_vars(given, n)?;
        if given.is_empty() || given.len() == n {
            return Err(Error::domain(
                "condition needs a proper, non-empty set of parent variables",
            ));
        }
        let child: Vec<usize> = (0..n).filter(|v| !given.contains(v)).collect();
        let (parent_space, pmap) = self.space.projection(&given)?;
        let (child_space, cmap) = self.space.projection(&child)?;
        let width = child_space.total();
        let mut table = vec![0.0; parent_space.total() * width];
        for (flat, &p) in self.probs.iter().enumerate() {
            table[pmap[flat] * width + cmap[flat]] += p;
        }
        Ok(Cpt::from_weights(child_space, parent_space, table))
    }
}

fn check_entries(space: &StateSpace, probs: &[f64]) -> Result<f64> {
    if probs.len() != space.total() {
        return Err(Error::domain(format!(
            "table has {} entries, space has {} states",
            probs.len(),
            space.total()
        )));
    }
    if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain(format!(
            "entry {i} is negative or not finite ({})",
            probs[i]
        )));
    }
    Ok(probs.iter().sum())
}

fn sorted_vars(vars: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut v = vars.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&x| x >= n) {
        return Err(Error::domain(format!("variable {bad} not in space")));
    }
    Ok(v)
}

/// `KL(p || q)` in nats with the default smoothing policy.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    kl_divergence_with(p, q, SupportPolicy::Smoothed)
}

pub fn kl_divergence_with(p: &Pmf, q: &Pmf, policy: SupportPolicy) -> Result<f64> {
    if p.space != q.space {
        return Err(Error::domain("kl_divergence: pmfs live on different spaces"));
    }
    kl_slices(&p.probs, &q.probs, policy)
}

/// `Σ p ln(p/q)` over raw slices; only `q` is clamped.
pub(crate) fn kl_slices(p: &[f64], q: &[f64], policy: SupportPolicy) -> Result<f64> {
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 && policy == SupportPolicy::Strict {
            return Err(Error::Support { index: i, p: pi });
        }
        d += pi * (pi.ln() - floored_ln(qi));
    }
    Ok(d.max(0.0))
}

/// Shannon entropy in nats.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_slice(&p.probs)
}

pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `ln Σ exp(v)`, stable for large magnitudes.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Conditional probability table: one distribution over `child_space` for
/// every configuration of `parent_space`.
///
/// Rows whose parent configuration carries no mass are stored as undefined
/// rather than filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    child_space: StateSpace,
    parent_space: StateSpace,
    table: Vec<f64>,
    defined: Vec<bool>,
}

impl Cpt {
    /// All rows must be defined distributions.
    pub fn new(child_space: StateSpace, parent_space: StateSpace, table: Vec<f64>) -> Result<Self> {
        let defined = vec![true; parent_space.total()];
        Self::with_undefined(child_space, parent_space, table, defined)
    }

    /// Rows with `defined[r] == false` are ignored and zero-filled.
    pub fn with_undefined(
        child_space: StateSpace,
        parent_space: StateSpace,
        mut table: Vec<f64>,
        defined: Vec<bool>,
    ) -> Result<Self> {
        let width = child_space.total();
        if table.len() != width * parent_space.total() || defined.len() != parent_space.total() {
            return Err(Error::domain("cpt table size does not match its spaces"));
        }
        for (r, row) in table.chunks_mut(width).enumerate() {
            if !defined[r] {
                row.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::domain(format!("cpt row {r} has invalid entry {v}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(Error::domain(format!("cpt row {r} sums to {sum}")));
            }
            if !is_unit(sum) {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Cpt {
            child_space,
            parent_space,
            table,
            defined,
        })
    }

    /// Normalizes each row of non-negative weights; all-zero rows become undefined.
    pub(crate) fn from_weights(child_space: StateSpace, parent_space: StateSpace, mut table: Vec<f64>) -> Self {
        let width = child_space.total();
        let mut defined = vec![true; parent_space.total()];
        for (r, row) in table.chunks_mut(width).enumerate() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            } else {
                defined[r] = false;
            }
        }
        Cpt {
            child_space,
            parent_space,
            table,
            defined,
        }
    }

    /// Builds from rows that are known to be valid distributions.
    pub(crate) fn from_rows_unchecked(
        child_space: StateSpace,
        parent_space: StateSpace,
        table: Vec<f64>,
        defined: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(table.len(), child_space.total() * parent_space.total());
        Cpt {
            child_space,
            parent_space,
            table,
            defined,
        }
    }

    pub fn child_space(&self) -> &StateSpace {
        &self.child_space
    }

    pub fn parent_space(&self) -> &StateSpace {
        &self.parent_space
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn is_defined(&self, parent: usize) -> bool {
        self.defined[parent]
    }

    pub fn defined_mask(&self) -> &[bool] {
        &self.defined
    }

    pub fn num_rows(&self) -> usize {
        self.defined.len()
    }

    /// Row for a parent configuration, `None` if undefined.
    pub fn row(&self, parent: usize) -> Option<&[f64]> {
        self.defined[parent].then(|| self.raw_row(parent))
    }

    pub fn row_checked(&self, parent: usize) -> Result<&[f64]> {
        self.row(parent).ok_or_else(|| Error::UndefinedRow {
            state: self.parent_space.unindex(parent),
        })
    }

    #[inline]
    pub(crate) fn raw_row(&self, parent: usize) -> &[f64] {
        let w = self.child_space.total();
        &self.table[parent * w..(parent + 1) * w]
    }

    /// `p(parent, child)` laid out with parent variables first.
    pub fn reconstruct(&self, parent_marginal: &Pmf) -> Result<Vec<f64>> {
        if parent_marginal.space() != &self.parent_space {
            return Err(Error::domain("parent marginal lives on a different space"));
        }
        let mut out = Vec::with_capacity(self.table.len());
        for (r, &pr) in parent_marginal.probs().iter().enumerate() {
            match self.row(r) {
                Some(row) => out.extend(row.iter().map(|c| c * pr)),
                None if pr == 0.0 => out.extend(std::iter::repeat_n(0.0, self.child_space.total())),
                None => {
                    return Err(Error::UndefinedRow {
                        state: self.parent_space.unindex(r),
                    })
                }
            }
        }
        Ok(out)
    }
}
