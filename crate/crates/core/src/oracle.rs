//! Exact ANOVA quantities by tensor-product quadrature, for small dimensions.
//!
//! [`AnovaOracle`] evaluates `f` once on the full `n_q^s` Gauss–Legendre grid
//! and derives every projection `P_{-u} f` by contracting axes of that tensor.
//! Marginals are memoized by subset mask, so each grid value is computed once.
//!
//! The pointwise operators ([`AnovaProjection`], [`AnchoredProjection`],
//! [`AnovaTerm`], [`separability_residual`]) work at arbitrary points and wrap
//! any [`Objective`].

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use log::{debug, warn};
use thiserror::Error;

use crate::function::{EvalError, Objective};
use crate::quadrature::QuadratureRule;
use crate::subset::{IndexError, Partition, VariableSubset};

/// Largest tensor grid the oracle will evaluate.
pub const MAX_GRID_POINTS: u64 = 100_000_000;

const GRID_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "oracle grid of {nodes}^{dim} points exceeds the budget of {MAX_GRID_POINTS} evaluations"
    )]
    Infeasible { dim: usize, nodes: usize },
    #[error("anchor has {got} coordinates, expected {expected}")]
    AnchorLength { expected: usize, got: usize },
    #[error("anchor coordinate {index} = {value} lies outside [0,1]")]
    AnchorOutside { index: usize, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// `n_q^dim`, or `None` when it exceeds [`MAX_GRID_POINTS`].
pub fn grid_size(nodes: usize, dim: usize) -> Option<usize> {
    let mut total: u64 = 1;
    for _ in 0..dim {
        total = total.checked_mul(nodes as u64)?;
        if total > MAX_GRID_POINTS {
            return None;
        }
    }
    Some(total as usize)
}

/// Anchor `t` of the anchored decomposition, in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPoint(Vec<f64>);

impl AnchorPoint {
    pub fn new(t: Vec<f64>) -> Result<Self, OracleError> {
        if let Some((index, &value)) = t
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(OracleError::AnchorOutside {
                index: index + 1,
                value,
            });
        }
        Ok(AnchorPoint(t))
    }

    /// `(1/2, …, 1/2)`.
    pub fn center(dim: usize) -> Self {
        AnchorPoint(vec![0.5; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    fn check(&self, dim: usize) -> Result<(), OracleError> {
        if self.0.len() != dim {
            return Err(OracleError::AnchorLength {
                expected: dim,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

/// `P_j f`: integrates out `x_j` with `rule`.
pub struct AnovaProjection<'r, F> {
    inner: F,
    axis: usize,
    rule: &'r QuadratureRule,
}

/// Free-function form of [`AnovaProjection::new`].
pub fn project_anova<F: Objective>(
    f: F,
    j: usize,
    rule: &QuadratureRule,
) -> Result<AnovaProjection<'_, F>, OracleError> {
    AnovaProjection::new(f, j, rule)
}

impl<'r, F: Objective> AnovaProjection<'r, F> {
    pub fn new(inner: F, j: usize, rule: &'r QuadratureRule) -> Result<Self, OracleError> {
        VariableSubset::singleton(j)?.check_within(inner.dim())?;
        Ok(AnovaProjection {
            inner,
            axis: j - 1,
            rule,
        })
    }
}

impl<F: Objective> Objective for AnovaProjection<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut points = Vec::with_capacity(self.rule.len() * x.len());
        for &t in self.rule.nodes() {
            points.extend_from_slice(x);
            let last = points.len() - x.len();
            points[last + self.axis] = t;
        }
        let values = self.inner.evaluate_batch(&points)?;
        Ok(weighted_sum(self.rule.weights(), &values))
    }
}

/// `P_j f` for the anchored decomposition: fixes `x_j = t_j`.
pub struct AnchoredProjection<F> {
    inner: F,
    axis: usize,
    value: f64,
}

/// Free-function form of [`AnchoredProjection::new`].
pub fn project_anchored<F: Objective>(
    f: F,
    j: usize,
    t: &AnchorPoint,
) -> Result<AnchoredProjection<F>, OracleError> {
    AnchoredProjection::new(f, j, t)
}

impl<F: Objective> AnchoredProjection<F> {
    pub fn new(inner: F, j: usize, t: &AnchorPoint) -> Result<Self, OracleError> {
        t.check(inner.dim())?;
        VariableSubset::singleton(j)?.check_within(inner.dim())?;
        Ok(AnchoredProjection {
            inner,
            axis: j - 1,
            value: t.0[j - 1],
        })
    }
}

impl<F: Objective> Objective for AnchoredProjection<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut y = x.to_vec();
        y[self.axis] = self.value;
        self.inner.evaluate(&y)
    }
}

/// `P_{-keep}(f)(x)`: integrates every coordinate outside `keep` with the tensor rule.
pub fn partial_integral<F: Objective + ?Sized>(
    f: &F,
    keep: VariableSubset,
    x: &[f64],
    rule: &QuadratureRule,
) -> Result<f64, OracleError> {
    let dim = f.dim();
    let free: Vec<usize> = keep.complement(dim)?.iter().map(|j| j - 1).collect();
    let count = grid_size(rule.len(), free.len()).ok_or(OracleError::Infeasible {
        dim: free.len(),
        nodes: rule.len(),
    })?;
    let n = rule.len();
    let mut total = 0.0;
    let mut start = 0;
    while start < count {
        let end = (start + GRID_CHUNK).min(count);
        let mut points = Vec::with_capacity((end - start) * dim);
        let mut weights = Vec::with_capacity(end - start);
        for flat in start..end {
            let mut rest = flat;
            let mut w = 1.0;
            points.extend_from_slice(x);
            let base = points.len() - dim;
            for &axis in &free {
                let k = rest % n;
                rest /= n;
                points[base + axis] = rule.nodes()[k];
                w *= rule.weights()[k];
            }
            weights.push(w);
        }
        let values = f.evaluate_batch(&points)?;
        total += weighted_sum(&weights, &values);
        start = end;
    }
    Ok(total)
}

/// The ANOVA term `f_u`, evaluated pointwise through the recursion
/// `f_u = P_{-u} f − Σ_{v ⊊ u} f_v` with `f_∅ = ∫ f`.
pub struct AnovaTerm<'r, F> {
    inner: F,
    subset: VariableSubset,
    rule: &'r QuadratureRule,
}

/// Free-function form of [`AnovaTerm::new`].
pub fn anova_term<F: Objective>(
    f: F,
    u: VariableSubset,
    rule: &QuadratureRule,
) -> Result<AnovaTerm<'_, F>, OracleError> {
    AnovaTerm::new(f, u, rule)
}

impl<'r, F: Objective> AnovaTerm<'r, F> {
    pub fn new(
        inner: F,
        subset: VariableSubset,
        rule: &'r QuadratureRule,
    ) -> Result<Self, OracleError> {
        subset.check_within(inner.dim())?;
        Ok(AnovaTerm {
            inner,
            subset,
            rule,
        })
    }

    fn term(
        &self,
        u: VariableSubset,
        x: &[f64],
        memo: &mut HashMap<VariableSubset, f64>,
    ) -> Result<f64, OracleError> {
        if let Some(&v) = memo.get(&u) {
            return Ok(v);
        }
        let mut value = partial_integral(&self.inner, u, x, self.rule)?;
        for v in u.subsets().filter(|&v| v != u) {
            value -= self.term(v, x, memo)?;
        }
        memo.insert(u, value);
        Ok(value)
    }

    pub fn evaluate_term(&self, x: &[f64]) -> Result<f64, OracleError> {
        self.term(self.subset, x, &mut HashMap::new())
    }
}

impl<F: Objective> Objective for AnovaTerm<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self.evaluate_term(x) {
            Ok(v) => Ok(v),
            Err(OracleError::Eval(e)) => Err(e),
            Err(other) => Err(EvalError::External {
                line: None,
                reason: other.to_string(),
            }),
        }
    }
}

/// How the projections in [`separability_residual`] are realised.
#[derive(Debug, Clone, Copy)]
pub enum ResidualMode<'a> {
    Anchored(&'a AnchorPoint),
    Anova(&'a QuadratureRule),
}

/// `f(x) + (m−1)·P_{[1:s]} f − Σ_j P_{-u_j}(f)(x)`, which vanishes for all `x`
/// exactly when `f` is separable with respect to `p`.
pub fn separability_residual<F: Objective + ?Sized>(
    f: &F,
    p: &Partition,
    x: &[f64],
    mode: ResidualMode<'_>,
) -> Result<f64, OracleError> {
    let dim = f.dim();
    if p.dim() != dim {
        return Err(EvalError::DimensionMismatch {
            expected: dim,
            got: p.dim(),
        }
        .into());
    }
    let m = p.len() as f64;
    if p.len() == 1 {
        // I − P_{-[1:s]} = I − I; still evaluated so bad points are reported
        f.evaluate(x)?;
        return Ok(0.0);
    }
    match mode {
        ResidualMode::Anchored(t) => {
            t.check(dim)?;
            let mut points = Vec::with_capacity((p.len() + 2) * dim);
            points.extend_from_slice(x);
            points.extend_from_slice(t.coords());
            for &block in p.blocks() {
                crate::function::mixed_point_into(x, t.coords(), block, &mut points);
            }
            let values = f.evaluate_batch(&points)?;
            let blocks: f64 = values[2..].iter().sum();
            Ok(values[0] + (m - 1.0) * values[1] - blocks)
        }
        ResidualMode::Anova(rule) => {
            let fx = f.evaluate(x)?;
            let mean = partial_integral(f, VariableSubset::EMPTY, x, rule)?;
            let mut blocks = 0.0;
            for &block in p.blocks() {
                blocks += partial_integral(f, block, x, rule)?;
            }
            Ok(fx + (m - 1.0) * mean - blocks)
        }
    }
}

/// Exact ANOVA quantities of `f`, computed on a tensor Gauss–Legendre grid.
pub struct AnovaOracle {
    dim: usize,
    rule: QuadratureRule,
    // marginal tensors P_{-u} f on the u-subgrid, keyed by mask
    marginals: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    terms: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    evaluations: usize,
}

impl AnovaOracle {
    /// Evaluates `f` on the full grid. Fails when `n_q^s` exceeds [`MAX_GRID_POINTS`].
    pub fn new<F: Objective + ?Sized>(f: &F, rule: QuadratureRule) -> Result<Self, OracleError> {
        let dim = f.dim();
        let n = rule.len();
        let count = grid_size(n, dim).ok_or(OracleError::Infeasible { dim, nodes: n })?;
        let mut values = Vec::with_capacity(count);
        let mut start = 0;
        while start < count {
            let end = (start + GRID_CHUNK).min(count);
            let mut points = Vec::with_capacity((end - start) * dim);
            for flat in start..end {
                let mut rest = flat;
                for _ in 0..dim {
                    points.push(rule.nodes()[rest % n]);
                    rest /= n;
                }
            }
            values.extend(f.evaluate_batch(&points)?);
            start = end;
        }
        debug!("oracle grid: {count} evaluations ({n}^{dim})");
        let full = crate::subset::full_mask(dim);
        let mut marginals = HashMap::new();
        marginals.insert(full, Arc::new(values));
        Ok(AnovaOracle {
            dim,
            rule,
            marginals: Mutex::new(marginals),
            terms: Mutex::new(HashMap::new()),
            evaluations: count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Function evaluations spent building the grid.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `P_{-u} f` tabulated on the `u`-subgrid (first index of `u` varies fastest).
    pub fn marginal(&self, u: VariableSubset) -> Result<Arc<Vec<f64>>, OracleError> {
        u.check_within(self.dim)?;
        Ok(self.marginal_mask(u.mask()))
    }

    fn marginal_mask(&self, mask: u64) -> Arc<Vec<f64>> {
        if let Some(t) = self.marginals.lock().unwrap().get(&mask) {
            return Arc::clone(t);
        }
        let full = crate::subset::full_mask(self.dim);
        let missing = full & !mask;
        let axis_bit = missing & missing.wrapping_neg();
        let parent_mask = mask | axis_bit;
        let parent = self.marginal_mask(parent_mask);
        let position = (parent_mask & (axis_bit - 1)).count_ones();
        let reduced = Arc::new(contract_axis(
            &parent,
            self.rule.len(),
            position,
            self.rule.weights(),
        ));
        self.marginals
            .lock()
            .unwrap()
            .entry(mask)
            .or_insert(reduced)
            .clone()
    }

    /// `f_∅ = ∫ f`.
    pub fn mean(&self) -> f64 {
        self.marginal_mask(0)[0]
    }

    /// `∫ (g − c)²` over the subgrid of `u`, with `g` tabulated there.
    fn centered_square_integral(&self, values: &[f64], u: VariableSubset, c: f64) -> f64 {
        let squared: Vec<f64> = values.iter().map(|v| (v - c) * (v - c)).collect();
        integrate_all(squared, self.rule.len(), u.len(), self.rule.weights())
    }

    /// `σ² = ∫ f² − (∫ f)²`.
    pub fn sigma2(&self) -> f64 {
        let full = VariableSubset::from_mask(crate::subset::full_mask(self.dim));
        let grid = self.marginal_mask(full.mask());
        self.centered_square_integral(&grid, full, self.mean())
    }

    /// `τ̲²_u = ∫ (P_{-u} f)² dx_u − f_∅²`; zero for the empty set.
    pub fn tau_lower(&self, u: VariableSubset) -> Result<f64, OracleError> {
        u.check_within(self.dim)?;
        if u.is_empty() {
            return Ok(0.0);
        }
        let g = self.marginal_mask(u.mask());
        Ok(self.centered_square_integral(&g, u, self.mean()))
    }

    /// `τ̄²_u = σ² − τ̲²_{-u}`.
    pub fn tau_upper(&self, u: VariableSubset) -> Result<f64, OracleError> {
        let minus_u = u.complement(self.dim)?;
        let value = self.sigma2() - self.tau_lower(minus_u)?;
        Ok(clip_negative(value, self.sigma2(), "tau_upper"))
    }

    /// `γ² = σ² − Σ_j τ̲²_{u_j}`.
    pub fn gamma2(&self, p: &Partition) -> Result<f64, OracleError> {
        if p.dim() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            }
            .into());
        }
        let mut lower = 0.0;
        for &block in p.blocks() {
            lower += self.tau_lower(block)?;
        }
        Ok(self.sigma2() - lower)
    }

    /// `f_u` tabulated on the `u`-subgrid.
    pub fn term(&self, u: VariableSubset) -> Result<Arc<Vec<f64>>, OracleError> {
        u.check_within(self.dim)?;
        Ok(self.term_mask(u))
    }

    fn term_mask(&self, u: VariableSubset) -> Arc<Vec<f64>> {
        if let Some(t) = self.terms.lock().unwrap().get(&u.mask()) {
            return Arc::clone(t);
        }
        let mut values = self.marginal_mask(u.mask()).as_ref().clone();
        for v in u.subsets().filter(|&v| v != u) {
            let fv = self.term_mask(v);
            let n = self.rule.len();
            for (flat, slot) in values.iter_mut().enumerate() {
                *slot -= fv[restrict_index(flat, n, u, v)];
            }
        }
        let values = Arc::new(values);
        self.terms
            .lock()
            .unwrap()
            .entry(u.mask())
            .or_insert(values)
            .clone()
    }

    /// `σ²_u = ∫ f_u²`.
    pub fn sigma2_term(&self, u: VariableSubset) -> Result<f64, OracleError> {
        let t = self.term(u)?;
        if u.is_empty() {
            return Ok(0.0);
        }
        Ok(self.centered_square_integral(&t, u, 0.0))
    }

    /// Largest `|∫₀¹ f_u dx_j|` over the remaining coordinates.
    pub fn term_axis_integral_max(&self, u: VariableSubset, j: usize) -> Result<f64, OracleError> {
        if !u.contains(j) {
            return Err(IndexError::OutOfRange {
                index: j,
                dim: u.len(),
            }
            .into());
        }
        let t = self.term(u)?;
        let position = (u.mask() & ((1u64 << (j - 1)) - 1)).count_ones();
        let reduced = contract_axis(&t, self.rule.len(), position, self.rule.weights());
        Ok(reduced.iter().fold(0.0, |acc, v| acc.max(v.abs())))
    }

    /// `∫ f_u f_v`.
    pub fn term_inner_product(
        &self,
        u: VariableSubset,
        v: VariableSubset,
    ) -> Result<f64, OracleError> {
        let fu = self.term(u)?;
        let fv = self.term(v)?;
        let w = u.union(v);
        let n = self.rule.len();
        let size = n.pow(w.len() as u32);
        let product: Vec<f64> = (0..size)
            .map(|flat| fu[restrict_index(flat, n, w, u)] * fv[restrict_index(flat, n, w, v)])
            .collect();
        Ok(integrate_all(product, n, w.len(), self.rule.weights()))
    }

    /// Component variances for every nonempty `u` with `|u| ≤ max_order`.
    pub fn report(&self, max_order: usize) -> AnovaReport {
        let full = VariableSubset::from_mask(crate::subset::full_mask(self.dim));
        let mut terms = BTreeMap::new();
        for u in full
            .subsets()
            .filter(|u| !u.is_empty() && u.len() <= max_order)
        {
            terms.insert(u, self.sigma2_term(u).expect("subset of [1:s]"));
        }
        AnovaReport {
            mean: self.mean(),
            sigma2: self.sigma2(),
            terms,
            truncated: max_order < self.dim,
        }
    }
}

/// Free-function form of [`AnovaOracle::sigma2`].
pub fn oracle_sigma2<F: Objective + ?Sized>(
    f: &F,
    rule: &QuadratureRule,
) -> Result<f64, OracleError> {
    Ok(AnovaOracle::new(f, rule.clone())?.sigma2())
}

/// Free-function form of [`AnovaOracle::tau_lower`].
pub fn oracle_tau_lower<F: Objective + ?Sized>(
    f: &F,
    u: VariableSubset,
    rule: &QuadratureRule,
) -> Result<f64, OracleError> {
    AnovaOracle::new(f, rule.clone())?.tau_lower(u)
}

/// Free-function form of [`AnovaOracle::tau_upper`].
pub fn oracle_tau_upper<F: Objective + ?Sized>(
    f: &F,
    u: VariableSubset,
    rule: &QuadratureRule,
) -> Result<f64, OracleError> {
    AnovaOracle::new(f, rule.clone())?.tau_upper(u)
}

/// `f_∅` and the component variances `σ²_u`.
#[derive(Debug, Clone)]
pub struct AnovaReport {
    pub mean: f64,
    pub sigma2: f64,
    pub terms: BTreeMap<VariableSubset, f64>,
    /// Whether an order cap left some terms out.
    pub truncated: bool,
}

impl AnovaReport {
    /// `Σ_{∅≠v⊆u} σ²_v` over the reported terms.
    pub fn tau_lower(&self, u: VariableSubset) -> f64 {
        self.terms
            .iter()
            .filter(|(v, _)| v.is_subset_of(u))
            .map(|(_, s)| s)
            .sum()
    }

    /// `Σ_{v∩u≠∅} σ²_v` over the reported terms.
    pub fn tau_upper(&self, u: VariableSubset) -> f64 {
        self.terms
            .iter()
            .filter(|(v, _)| !v.is_disjoint(u))
            .map(|(_, s)| s)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.terms.values().sum()
    }
}

fn clip_negative(value: f64, scale: f64, what: &str) -> f64 {
    if value >= 0.0 {
        return value;
    }
    if value < -1e-12 * scale.abs().max(1.0) {
        warn!("{what} = {value:e} is negative beyond rounding; clipped to 0");
    }
    0.0
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    crate::sum::pairwise_sum_by(values.len(), |k| weights[k] * values[k])
}

/// Integrates out the axis at `position` of a tensor with `n` points per axis.
fn contract_axis(tensor: &[f64], n: usize, position: u32, weights: &[f64]) -> Vec<f64> {
    let stride = n.pow(position);
    let outer = tensor.len() / (stride * n);
    let mut out = vec![0.0; stride * outer];
    for o in 0..outer {
        for r in 0..stride {
            let mut acc = 0.0;
            for (k, &w) in weights.iter().enumerate() {
                acc += w * tensor[r + stride * (k + n * o)];
            }
            out[r + stride * o] = acc;
        }
    }
    out
}

fn integrate_all(mut tensor: Vec<f64>, n: usize, axes: usize, weights: &[f64]) -> f64 {
    for _ in 0..axes {
        tensor = contract_axis(&tensor, n, 0, weights);
    }
    tensor[0]
}

/// Maps a flat index on the `outer`-subgrid to the flat index of its
/// restriction to `inner ⊆ outer`.
fn restrict_index(flat: usize, n: usize, outer: VariableSubset, inner: VariableSubset) -> usize {
    let mut rest = flat;
    let mut out = 0;
    let mut stride = 1;
    for j in outer.iter() {
        let digit = rest % n;
        rest /= n;
        if inner.contains(j) {
            out += digit * stride;
            stride *= n;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{Benchmark, FunctionSpec};

    fn set(indices: &[usize]) -> VariableSubset {
        VariableSubset::from_indices(indices.iter().copied()).unwrap()
    }

    fn expr(text: &str, dim: usize) -> FunctionSpec {
        FunctionSpec::expression(text, dim).unwrap()
    }

    #[test]
    fn anova_projection_examples() {
        let rule = QuadratureRule::gauss_legendre(8);
        let f = expr("x1 + x2", 2);
        let p = project_anova(&f, 2, &rule).unwrap();
        for x in [[0.1, 0.9], [0.7, 0.2]] {
            assert!((p.evaluate(&x).unwrap() - (x[0] + 0.5)).abs() < 1e-15);
        }
        let f = expr("x1*x2", 2);
        let p = project_anova(&f, 1, &rule).unwrap();
        assert!((p.evaluate(&[0.3, 0.6]).unwrap() - 0.3).abs() < 1e-15);
        let c = expr("2.5", 2);
        let p = project_anova(&c, 1, &rule).unwrap();
        assert!((p.evaluate(&[0.3, 0.6]).unwrap() - 2.5).abs() < 1e-14);
        assert!(project_anova(&c, 3, &rule).is_err());
    }

    #[test]
    fn anchored_projection_examples() {
        let f = expr("x1 + x2", 2);
        let t = AnchorPoint::new(vec![0.5, 0.0]).unwrap();
        let p = project_anchored(&f, 2, &t).unwrap();
        assert_eq!(p.evaluate(&[0.3, 0.8]).unwrap(), 0.3);

        let g = expr("x1*x2", 2);
        let t = AnchorPoint::new(vec![0.5, 1.0]).unwrap();
        let p = project_anchored(&g, 2, &t).unwrap();
        assert_eq!(p.evaluate(&[0.3, 0.8]).unwrap(), 0.3);
        let twice = project_anchored(&p, 2, &t).unwrap();
        assert_eq!(
            twice.evaluate(&[0.3, 0.8]).unwrap(),
            p.evaluate(&[0.3, 0.8]).unwrap()
        );
        assert!(AnchorPoint::new(vec![1.5]).is_err());
    }

    #[test]
    fn anova_term_examples() {
        let rule = QuadratureRule::gauss_legendre(8);
        let f = expr("x1*x2", 2);
        let t = anova_term(&f, VariableSubset::EMPTY, &rule).unwrap();
        assert!((t.evaluate(&[0.3, 0.7]).unwrap() - 0.25).abs() < 1e-15);
        let t = anova_term(&f, set(&[1]), &rule).unwrap();
        for x1 in [0.0, 0.3, 1.0] {
            assert!((t.evaluate(&[x1, 0.9]).unwrap() - (x1 / 2.0 - 0.25)).abs() < 1e-15);
        }
        let g = expr("x1 + x2", 2);
        let t = anova_term(&g, set(&[1, 2]), &rule).unwrap();
        assert!(t.evaluate(&[0.2, 0.9]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pointwise_term_matches_grid_term() {
        let rule = QuadratureRule::gauss_legendre(6);
        let f = FunctionSpec::builtin(Benchmark::Paper5, 5).unwrap();
        let oracle = AnovaOracle::new(&f, rule.clone()).unwrap();
        let u = set(&[2, 4]);
        let grid = oracle.term(u).unwrap();
        let t = anova_term(&f, u, &rule).unwrap();
        let nodes = rule.nodes();
        // flat index (k2, k4) with x2 fastest
        let (k2, k4) = (1, 4);
        let x = [0.5, nodes[k2], 0.5, nodes[k4], 0.5];
        assert!((t.evaluate(&x).unwrap() - grid[k2 + 6 * k4]).abs() < 1e-14);
    }

    #[test]
    fn oracle_values_for_bilinear() {
        let rule = QuadratureRule::default();
        let f = FunctionSpec::builtin(Benchmark::Bilinear, 2).unwrap();
        let o = AnovaOracle::new(&f, rule).unwrap();
        assert!((o.mean() - 0.25).abs() < 1e-15);
        assert!((o.sigma2() - 7.0 / 144.0).abs() < 1e-12);
        assert!((o.tau_lower(set(&[1])).unwrap() - 1.0 / 48.0).abs() < 1e-12);
        assert!((o.tau_lower(set(&[1, 2])).unwrap() - 7.0 / 144.0).abs() < 1e-12);
        assert!((o.tau_upper(set(&[1])).unwrap() - 1.0 / 36.0).abs() < 1e-12);
        assert!((o.tau_upper(set(&[1, 2])).unwrap() - o.sigma2()).abs() < 1e-15);
        let singletons = Partition::singletons(2).unwrap();
        assert!((o.gamma2(&singletons).unwrap() - 1.0 / 144.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_values_for_simple_functions() {
        let rule = QuadratureRule::default();
        let sphere = FunctionSpec::builtin(Benchmark::Sphere, 2).unwrap();
        assert!((oracle_sigma2(&sphere, &rule).unwrap() - 8.0 / 45.0).abs() < 1e-12);
        let c = expr("3", 2);
        assert!(oracle_sigma2(&c, &rule).unwrap().abs() < 1e-15);
        let add = expr("x1 + x2", 2);
        assert!((oracle_tau_lower(&add, set(&[1]), &rule).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        assert!((oracle_tau_upper(&add, set(&[1]), &rule).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_guard() {
        let f = FunctionSpec::builtin(Benchmark::Sphere, 12).unwrap();
        assert!(matches!(
            AnovaOracle::new(&f, QuadratureRule::default()),
            Err(OracleError::Infeasible { dim: 12, nodes: 32 })
        ));
        assert_eq!(grid_size(10, 8), Some(100_000_000));
        assert_eq!(grid_size(10, 9), None);
    }

    #[test]
    fn term_sums_reconstruct_function() {
        let rule = QuadratureRule::gauss_legendre(5);
        let f = expr("x1*x2*x3 + exp(x1)*x3", 3);
        let o = AnovaOracle::new(&f, rule.clone()).unwrap();
        let full = VariableSubset::full(3).unwrap();
        let grid = o.marginal(full).unwrap();
        let n = rule.len();
        for flat in [0, 17, 64, 124] {
            let total: f64 = full
                .subsets()
                .map(|u| o.term(u).unwrap()[restrict_index(flat, n, full, u)])
                .sum();
            assert!((total - grid[flat]).abs() < 1e-13);
        }
    }

    #[test]
    fn residual_examples() {
        let zero = AnchorPoint::new(vec![0.0, 0.0]).unwrap();
        let singletons = Partition::singletons(2).unwrap();
        let add = expr("x1 + x2", 2);
        for x in [[0.1, 0.2], [0.9, 0.4], [1.0, 1.0]] {
            let r = separability_residual(&add, &singletons, &x, ResidualMode::Anchored(&zero))
                .unwrap();
            assert!(r.abs() < 1e-15);
        }
        let bilinear = expr("x1*x2", 2);
        let r = separability_residual(
            &bilinear,
            &singletons,
            &[1.0, 1.0],
            ResidualMode::Anchored(&zero),
        )
        .unwrap();
        assert_eq!(r, 1.0);

        let rule = QuadratureRule::gauss_legendre(8);
        // x1 x2 − x1/2 − x2/2 + 1/4 at (1,1)
        let r = separability_residual(
            &bilinear,
            &singletons,
            &[1.0, 1.0],
            ResidualMode::Anova(&rule),
        )
        .unwrap();
        assert!((r - 0.25).abs() < 1e-15);

        let trivial = Partition::trivial(2).unwrap();
        for mode in [ResidualMode::Anchored(&zero), ResidualMode::Anova(&rule)] {
            assert_eq!(
                separability_residual(&bilinear, &trivial, &[0.3, 0.8], mode).unwrap(),
                0.0
            );
        }
    }
}
