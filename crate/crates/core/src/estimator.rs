//! Monte Carlo estimators of `σ²`, the lower and upper Sobol' indices, and the
//! separability index
//!
//! ```text
//! γ²_{u_1..u_m} = σ² − Σ_j τ̲²_{u_j}
//!              = ∫∫ f(x)·( f(x) + (m−1) f(z) − Σ_j f(x_{u_j}, z_{-u_j}) ) dx dz
//! ```
//!
//! All estimators share the function values cached on a [`SampleBatch`], and
//! every average is an index-ordered pairwise sum, so results are bit-stable
//! across thread counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::function::{EvalError, Objective};
use crate::sample::SampleBatch;
use crate::subset::{IndexError, Partition, VariableSubset};
use crate::sum;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("the lower index of the empty set is not estimated")]
    EmptySubset,
    #[error("partition is for dimension {partition}, function has dimension {function}")]
    DimensionMismatch { partition: usize, function: usize },
}

/// How a near-zero `γ̂²` is turned into a yes/no answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum DecisionRule {
    /// Separable iff `max_i |t_i| ≤ tol_abs + tol_rel·scale`.
    Residual { tol_abs: f64, tol_rel: f64 },
    /// Separable iff `|γ̂²| ≤ c·stderr + tol_abs`.
    Statistical { c: f64, tol_abs: f64 },
}

impl DecisionRule {
    pub const DEFAULT_TOL_ABS: f64 = 1e-12;
    pub const DEFAULT_TOL_REL: f64 = 1e-9;
    pub const DEFAULT_C: f64 = 3.0;

    pub fn residual() -> Self {
        DecisionRule::Residual {
            tol_abs: Self::DEFAULT_TOL_ABS,
            tol_rel: Self::DEFAULT_TOL_REL,
        }
    }

    pub fn statistical() -> Self {
        DecisionRule::Statistical {
            c: Self::DEFAULT_C,
            tol_abs: Self::DEFAULT_TOL_ABS,
        }
    }
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule::residual()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Separable,
    NonSeparable,
}

impl Decision {
    pub fn is_separable(self) -> bool {
        self == Decision::Separable
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Separable => "separable",
            Decision::NonSeparable => "non-separable",
        })
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub stderr: f64,
}

impl MeanEstimate {
    fn from_terms(terms: &[f64]) -> Self {
        let n = terms.len();
        let value = sum::mean(terms);
        let stderr = if n > 1 {
            let ss = sum::pairwise_sum_by(n, |i| (terms[i] - value) * (terms[i] - value));
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate { value, stderr }
    }
}

/// Result of one separability test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityEstimate {
    pub partition: Partition,
    pub n: usize,
    pub seed: u64,
    pub gamma2_hat: f64,
    pub sigma2_hat: f64,
    /// `γ̂²/σ̂²`, absent when `σ̂² ≤ 0`.
    pub normalized: Option<f64>,
    pub stderr: f64,
    /// `max_i |f(x_i) + (m−1) f(z_i) − Σ_j f(x_{i,u_j}, z_{i,-u_j})|`
    pub residual_max: f64,
    /// Largest `|f|` among the values entering this estimate.
    pub scale: f64,
    /// `σ̂² ≤ 0`: the normalized index is omitted.
    pub degenerate_variance: bool,
    pub rule: DecisionRule,
    pub decision: Decision,
}

/// Applies `rule` to an estimate's statistics.
pub fn decide_zero(e: &SeparabilityEstimate, rule: DecisionRule) -> Decision {
    decide(e.gamma2_hat, e.stderr, e.residual_max, e.scale, rule)
}

fn decide(gamma2: f64, stderr: f64, residual_max: f64, scale: f64, rule: DecisionRule) -> Decision {
    let separable = match rule {
        DecisionRule::Residual { tol_abs, tol_rel } => residual_max <= tol_abs + tol_rel * scale,
        DecisionRule::Statistical { c, tol_abs } => gamma2.abs() <= c * stderr + tol_abs,
    };
    if separable {
        Decision::Separable
    } else {
        Decision::NonSeparable
    }
}

fn full(b: &SampleBatch) -> VariableSubset {
    VariableSubset::full(b.dim()).expect("batch dimension is valid")
}

/// `(1/n) Σ f(x_i)(f(x_i) − f(z_i))`.
pub fn estimate_sigma2<F: Objective + ?Sized>(
    f: &F,
    b: &SampleBatch,
) -> Result<MeanEstimate, EstimateError> {
    let fx = b.column(f, full(b))?;
    let fz = b.column(f, VariableSubset::EMPTY)?;
    let terms: Vec<f64> = fx.iter().zip(fz.iter()).map(|(x, z)| x * (x - z)).collect();
    Ok(MeanEstimate::from_terms(&terms))
}

/// `(1/n) Σ f(x_i)(f(x_{i,u}, z_{i,-u}) − f(z_i))`.
pub fn estimate_tau_lower<F: Objective + ?Sized>(
    f: &F,
    u: VariableSubset,
    b: &SampleBatch,
) -> Result<MeanEstimate, EstimateError> {
    if u.is_empty() {
        return Err(EstimateError::EmptySubset);
    }
    u.check_within(b.dim())?;
    let fx = b.column(f, full(b))?;
    let fz = b.column(f, VariableSubset::EMPTY)?;
    let fy = b.column(f, u)?;
    let terms: Vec<f64> = (0..b.len()).map(|i| fx[i] * (fy[i] - fz[i])).collect();
    Ok(MeanEstimate::from_terms(&terms))
}

/// `σ̂² − τ̲̂²_{-u}` on the same batch; the standard error is that of the
/// per-sample difference `f(x_i)(f(x_i) − f(x_{i,-u}, z_{i,u}))`.
pub fn estimate_tau_upper<F: Objective + ?Sized>(
    f: &F,
    u: VariableSubset,
    b: &SampleBatch,
) -> Result<MeanEstimate, EstimateError> {
    if u.is_empty() {
        return Err(EstimateError::EmptySubset);
    }
    let minus_u = u.complement(b.dim())?;
    let sigma2 = estimate_sigma2(f, b)?;
    if minus_u.is_empty() {
        return Ok(sigma2);
    }
    let lower = estimate_tau_lower(f, minus_u, b)?;
    let fx = b.column(f, full(b))?;
    let fy = b.column(f, minus_u)?;
    let terms: Vec<f64> = (0..b.len()).map(|i| fx[i] * (fx[i] - fy[i])).collect();
    Ok(MeanEstimate {
        value: sigma2.value - lower.value,
        stderr: MeanEstimate::from_terms(&terms).stderr,
    })
}

/// Monte Carlo estimate of `γ²` for partition `p`.
///
/// On a fresh batch this costs `n·(m+2)` evaluations for `m ≥ 2` (`2n` for the
/// trivial partition, whose block is `[1:s]`); `f(x_i)` and `f(z_i)` are shared
/// with every other estimate on the batch.
pub fn estimate_gamma<F: Objective + ?Sized>(
    f: &F,
    p: &Partition,
    b: &SampleBatch,
    rule: DecisionRule,
) -> Result<SeparabilityEstimate, EstimateError> {
    if p.dim() != b.dim() || f.dim() != b.dim() {
        return Err(EstimateError::DimensionMismatch {
            partition: p.dim(),
            function: f.dim(),
        });
    }
    let n = b.len();
    let m = p.len() as f64;
    let fx = b.column(f, full(b))?;
    let fz = b.column(f, VariableSubset::EMPTY)?;
    let blocks = p
        .blocks()
        .iter()
        .map(|&u| b.column(f, u))
        .collect::<Result<Vec<_>, _>>()?;

    let mut residual_max = 0.0f64;
    let mut scale = 0.0f64;
    let mut products = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = fx[i] + (m - 1.0) * fz[i];
        for column in &blocks {
            t -= column[i];
        }
        residual_max = residual_max.max(t.abs());
        scale = blocks
            .iter()
            .fold(scale.max(fx[i].abs()).max(fz[i].abs()), |acc, c| {
                acc.max(c[i].abs())
            });
        products.push(fx[i] * t);
    }
    let gamma = MeanEstimate::from_terms(&products);
    let sigma2 = estimate_sigma2(f, b)?.value;
    let degenerate_variance = sigma2 <= 0.0;
    // A constant f has zero residuals and passes either rule on its own. A
    // negative σ̂² from sampling noise must not force a verdict.
    let decision = decide(gamma.value, gamma.stderr, residual_max, scale, rule);
    Ok(SeparabilityEstimate {
        partition: p.clone(),
        n,
        seed: b.seed(),
        gamma2_hat: gamma.value,
        sigma2_hat: sigma2,
        normalized: (!degenerate_variance).then(|| gamma.value / sigma2),
        stderr: gamma.stderr,
        residual_max,
        scale,
        degenerate_variance,
        rule,
        decision,
    })
}

/// `estimate_gamma` with every variable in its own block: `n·(s+2)` evaluations.
pub fn full_separability_screen<F: Objective + ?Sized>(
    f: &F,
    b: &SampleBatch,
    rule: DecisionRule,
) -> Result<SeparabilityEstimate, EstimateError> {
    let p = Partition::singletons(b.dim())?;
    estimate_gamma(f, &p, b, rule)
}
