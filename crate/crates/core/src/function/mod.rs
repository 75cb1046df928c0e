//! Black-box functions on `[0,1]^s`.
//!
//! A [`FunctionSpec`] wraps one of three sources (a built-in benchmark, a parsed
//! expression, or an external program), maps unit-cube points onto its declared
//! box with the affine map `a + (b - a)·x`, rejects non-finite values, and counts
//! raw evaluations.

mod builtin;
mod expr;
mod external;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::subset::VariableSubset;

pub use builtin::Benchmark;
pub use expr::{parse_expression, BinOp, Expr, Func, ParseError, ParseErrorKind};
pub use external::ExternalEvaluator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {index} = {value} lies outside [0,1]")]
    OutsideCube { index: usize, value: f64 },
    #[error("non-finite value {value} at point {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },
    #[error("{function} is undefined at {argument}")]
    Domain {
        function: &'static str,
        argument: f64,
    },
    #[error("external evaluator failed{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    External { line: Option<usize>, reason: String },
    #[error("external evaluator timed out after {0:?}")]
    Timeout(std::time::Duration),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("{name} requires dimension {required}, got {got}")]
    FixedDimension {
        name: &'static str,
        required: usize,
        got: usize,
    },
    #[error("{name} requires dimension at least {min}, got {got}")]
    TooSmall {
        name: &'static str,
        min: usize,
        got: usize,
    },
    #[error("domain has {got} intervals for dimension {dim}")]
    DomainLength { dim: usize, got: usize },
    #[error("interval {index} is empty or not finite: [{lower}, {upper}]")]
    BadInterval {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("cannot parse domain {0:?}; expected \"a1:b1,a2:b2,...\"")]
    DomainSyntax(String),
    #[error("unknown builtin {0:?}")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Anything that can be evaluated on `[0,1]^dim`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError>;

    /// Evaluates a flat list of points (`dim` coordinates each), preserving order.
    fn evaluate_batch(&self, points: &[f64]) -> Result<Vec<f64>, EvalError> {
        points
            .par_chunks(self.dim())
            .map(|p| self.evaluate(p))
            .collect()
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, points: &[f64]) -> Result<Vec<f64>, EvalError> {
        (**self).evaluate_batch(points)
    }
}

/// Per-variable box `[a_j, b_j]` that `[0,1]^s` is mapped onto.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn unit(dim: usize) -> Self {
        Domain {
            bounds: vec![(0.0, 1.0); dim],
        }
    }

    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SpecError> {
        for (index, &(lower, upper)) in bounds.iter().enumerate() {
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(SpecError::BadInterval {
                    index: index + 1,
                    lower,
                    upper,
                });
            }
        }
        Ok(Domain { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn is_unit(&self) -> bool {
        self.bounds.iter().all(|&b| b == (0.0, 1.0))
    }

    fn map_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(
            x.iter()
                .zip(&self.bounds)
                .map(|(&t, &(a, b))| a + (b - a) * t),
        );
    }
}

impl FromStr for Domain {
    type Err = SpecError;

    /// `"a1:b1,a2:b2,..."`
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syntax = || SpecError::DomainSyntax(text.to_string());
        let bounds = text
            .split(',')
            .map(|item| {
                let (a, b) = item.split_once(':').ok_or_else(syntax)?;
                let a = a.trim().parse::<f64>().map_err(|_| syntax())?;
                let b = b.trim().parse::<f64>().map_err(|_| syntax())?;
                Ok((a, b))
            })
            .collect::<Result<Vec<_>, SpecError>>()?;
        Domain::new(bounds)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (a, b)) in self.bounds.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}:{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum Source {
    Builtin(Benchmark),
    Expression(Expr),
    External(ExternalEvaluator),
}

/// A black-box function with a dimension, a source, a domain map and an
/// evaluation counter.
#[derive(Debug)]
pub struct FunctionSpec {
    dim: usize,
    source: Source,
    domain: Domain,
    evaluations: AtomicU64,
}

impl FunctionSpec {
    pub fn builtin(benchmark: Benchmark, dim: usize) -> Result<Self, SpecError> {
        benchmark.check_dim(dim)?;
        Ok(Self::from_source(Source::Builtin(benchmark), dim))
    }

    pub fn expression(text: &str, dim: usize) -> Result<Self, SpecError> {
        if dim == 0 {
            return Err(SpecError::ZeroDimension);
        }
        let expr = parse_expression(text, dim)?;
        Ok(Self::from_source(Source::Expression(expr), dim))
    }

    pub fn external(evaluator: ExternalEvaluator, dim: usize) -> Result<Self, SpecError> {
        if dim == 0 {
            return Err(SpecError::ZeroDimension);
        }
        Ok(Self::from_source(Source::External(evaluator), dim))
    }

    fn from_source(source: Source, dim: usize) -> Self {
        FunctionSpec {
            dim,
            source,
            domain: Domain::unit(dim),
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self, SpecError> {
        if domain.bounds.len() != self.dim {
            return Err(SpecError::DomainLength {
                dim: self.dim,
                got: domain.bounds.len(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Raw evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some((index, &value)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(EvalError::OutsideCube {
                index: index + 1,
                value,
            });
        }
        Ok(())
    }

    fn eval_pure(&self, x: &[f64], scratch: &mut Vec<f64>) -> Result<f64, EvalError> {
        let y: &[f64] = if self.domain.is_unit() {
            x
        } else {
            scratch.clear();
            self.domain.map_into(x, scratch);
            scratch
        };
        let value = match &self.source {
            Source::Builtin(b) => b.eval(y),
            Source::Expression(e) => e.eval(y)?,
            Source::External(_) => unreachable!("external sources are evaluated in batches"),
        };
        if !value.is_finite() {
            return Err(EvalError::NonFinite {
                value,
                point: x.to_vec(),
            });
        }
        Ok(value)
    }
}

impl Objective for FunctionSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        if let Source::External(_) = self.source {
            return self.evaluate_batch(x).map(|v| v[0]);
        }
        self.check_point(x)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.eval_pure(x, &mut Vec::new())
    }

    fn evaluate_batch(&self, points: &[f64]) -> Result<Vec<f64>, EvalError> {
        if !points.len().is_multiple_of(self.dim) {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: points.len() % self.dim,
            });
        }
        for p in points.chunks(self.dim) {
            self.check_point(p)?;
        }
        let count = (points.len() / self.dim) as u64;
        self.evaluations.fetch_add(count, Ordering::Relaxed);
        match &self.source {
            Source::External(ext) => {
                let mut mapped = Vec::with_capacity(points.len());
                for p in points.chunks(self.dim) {
                    self.domain.map_into(p, &mut mapped);
                }
                ext.evaluate_batch(&mapped, self.dim).map_err(|e| match e {
                    EvalError::NonFinite { value, point } => {
                        let k = mapped
                            .chunks(self.dim)
                            .position(|p| p == point.as_slice())
                            .unwrap_or(0);
                        EvalError::NonFinite {
                            value,
                            point: points[k * self.dim..(k + 1) * self.dim].to_vec(),
                        }
                    }
                    other => other,
                })
            }
            _ => points
                .par_chunks(self.dim)
                .map_init(Vec::new, |scratch, p| self.eval_pure(p, scratch))
                .collect(),
        }
    }
}

/// The point `(x_u, z_{-u})`: coordinates from `x` on `u`, from `z` elsewhere.
pub fn mixed_point(x: &[f64], z: &[f64], u: VariableSubset) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    mixed_point_into(x, z, u, &mut out);
    out
}

pub(crate) fn mixed_point_into(x: &[f64], z: &[f64], u: VariableSubset, out: &mut Vec<f64>) {
    debug_assert_eq!(x.len(), z.len());
    let mask = u.mask();
    out.extend(
        x.iter()
            .zip(z)
            .enumerate()
            .map(|(j, (&xj, &zj))| if mask >> j & 1 == 1 { xj } else { zj }),
    );
}
