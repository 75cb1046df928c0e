//! Additive separability of black-box functions on the unit cube.
//!
//! A function `f` on `[0,1]^s` is separable with respect to disjoint blocks
//! `u_1, …, u_m` covering `[1:s]` when it is a sum of functions each depending on
//! one block only. This crate
//!
//! - estimates the separability index `γ² = σ² − Σ_j τ̲²_{u_j}` by plain Monte
//!   Carlo ([`estimator`]), along with `σ²` and the lower/upper Sobol' indices;
//! - discovers the blocks by testing candidate subsets against their complement
//!   ([`search`]);
//! - computes the same quantities exactly by tensor Gauss–Legendre quadrature for
//!   small `s` ([`oracle`]), for verification.
//!
//! ```
//! use sepscan_core::{discover_partition, Benchmark, DecisionRule, FunctionSpec, SampleBatch};
//!
//! let f = FunctionSpec::builtin(Benchmark::Paper5, 5).unwrap();
//! let batch = SampleBatch::generate(5, 1024, 0).unwrap();
//! let found = discover_partition(&f, &batch, DecisionRule::default()).unwrap();
//! assert_eq!(found.partition.to_string(), "{1}|{2,4}|{3,5}");
//! ```

pub mod estimator;
pub mod function;
pub mod oracle;
pub mod quadrature;
pub mod sample;
pub mod search;
pub mod subset;
pub mod sum;

pub use estimator::{
    decide_zero, estimate_gamma, estimate_sigma2, estimate_tau_lower, estimate_tau_upper,
    full_separability_screen, Decision, DecisionRule, EstimateError, MeanEstimate,
    SeparabilityEstimate,
};
pub use function::{
    mixed_point, parse_expression, Benchmark, Domain, EvalError, Expr, ExternalEvaluator,
    FunctionSpec, Objective, ParseError, Source, SpecError,
};
pub use oracle::{
    anova_term, oracle_sigma2, oracle_tau_lower, oracle_tau_upper, project_anchored, project_anova,
    separability_residual, AnchorPoint, AnovaOracle, AnovaReport, OracleError, ResidualMode,
};
pub use quadrature::QuadratureRule;
pub use sample::{generate_samples, SampleBatch, SampleError};
pub use search::{
    discover_partition, refine_partition, SearchError, SearchOptions, SearchOutcome, SearchTrace,
    TraceEntry,
};
pub use subset::{
    complement, enumerate_candidates, validate_partition, IndexError, Partition, VariableSubset,
};
