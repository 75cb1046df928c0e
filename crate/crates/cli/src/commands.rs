use anyhow::{bail, Result};
use serde::Serialize;

use sepscan_core::oracle::grid_size;
use sepscan_core::{
    discover_partition, estimate_gamma, estimate_sigma2, estimate_tau_lower, estimate_tau_upper,
    full_separability_screen, refine_partition, separability_residual, AnchorPoint, AnovaOracle,
    FunctionSpec, MeanEstimate, Objective, Partition, QuadratureRule, ResidualMode, SampleBatch,
    SearchOptions, SearchOutcome, SeparabilityEstimate, VariableSubset,
};

use crate::config::RunConfig;

/// Largest dimension `oracle` accepts.
pub const ORACLE_MAX_DIM: usize = 6;
/// Points in the oracle's residual verification grid.
pub const VERIFICATION_POINTS: usize = 1000;

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Estimate(SeparabilityEstimate),
    Sobol(SobolPayload),
    Analyze(AnalyzePayload),
    Oracle(OraclePayload),
}

#[derive(Debug, Serialize)]
pub struct SobolRow {
    pub subset: VariableSubset,
    pub lower: f64,
    pub lower_stderr: f64,
    pub upper: f64,
    pub upper_stderr: f64,
    pub lower_normalized: Option<f64>,
    pub upper_normalized: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SobolPayload {
    pub sigma2: f64,
    pub sigma2_stderr: f64,
    pub indices: Vec<SobolRow>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzePayload {
    pub partition: Partition,
    pub blocks: Vec<VariableSubset>,
    pub candidates_tested: usize,
    pub truncated: bool,
    pub trace: Vec<sepscan_core::TraceEntry>,
    pub search_evaluations: u64,
    pub verification_evaluations: u64,
    pub verification: Option<SeparabilityEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<VariableSubset>,
}

impl From<SearchOutcome> for AnalyzePayload {
    fn from(out: SearchOutcome) -> Self {
        AnalyzePayload {
            blocks: out.partition.blocks().to_vec(),
            candidates_tested: out.trace.candidates_tested(),
            truncated: out.trace.truncated,
            search_evaluations: out.trace.search_evaluations,
            verification_evaluations: out.trace.verification_evaluations,
            trace: out.trace.entries,
            partition: out.partition,
            verification: out.verification,
            flagged: out.flagged,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OracleIndex {
    pub subset: VariableSubset,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleTerm {
    pub subset: VariableSubset,
    pub sigma2: f64,
}

#[derive(Debug, Serialize)]
pub struct OraclePayload {
    pub nodes: usize,
    pub grid_evaluations: usize,
    pub mean: f64,
    pub sigma2: f64,
    pub partition: Partition,
    pub gamma2: f64,
    pub normalized: Option<f64>,
    /// Largest anchored-mode residual over the verification grid.
    pub residual_max: f64,
    pub residual_scale: f64,
    pub verification_points: usize,
    pub indices: Vec<OracleIndex>,
    pub terms: Vec<OracleTerm>,
}

/// Outcome of a command, with the exit code it maps to.
pub struct Outcome {
    pub payload: Payload,
    pub exit_code: u8,
}

fn decision_exit(e: &SeparabilityEstimate) -> u8 {
    if e.decision.is_separable() {
        0
    } else {
        1
    }
}

pub fn run_screen(f: &FunctionSpec, config: &RunConfig) -> Result<Outcome> {
    let batch = SampleBatch::generate(config.dim, config.samples, config.seed)?;
    let e = full_separability_screen(f, &batch, config.rule)?;
    Ok(Outcome {
        exit_code: decision_exit(&e),
        payload: Payload::Estimate(e),
    })
}

pub fn run_index(f: &FunctionSpec, config: &RunConfig, partition: &Partition) -> Result<Outcome> {
    let batch = SampleBatch::generate(config.dim, config.samples, config.seed)?;
    let e = estimate_gamma(f, partition, &batch, config.rule)?;
    Ok(Outcome {
        exit_code: decision_exit(&e),
        payload: Payload::Estimate(e),
    })
}

fn normalized(value: f64, sigma2: f64) -> Option<f64> {
    (sigma2 > 0.0).then(|| value / sigma2)
}

pub fn run_sobol(
    f: &FunctionSpec,
    config: &RunConfig,
    subsets: &[VariableSubset],
) -> Result<Outcome> {
    if subsets.is_empty() {
        bail!("sobol needs at least one --subset");
    }
    let batch = SampleBatch::generate(config.dim, config.samples, config.seed)?;
    let sigma2: MeanEstimate = estimate_sigma2(f, &batch)?;
    let mut indices = Vec::with_capacity(subsets.len());
    for &u in subsets {
        if u.is_empty() {
            bail!("--subset must be nonempty");
        }
        u.check_within(config.dim)?;
        let lower = estimate_tau_lower(f, u, &batch)?;
        let upper = estimate_tau_upper(f, u, &batch)?;
        indices.push(SobolRow {
            subset: u,
            lower: lower.value,
            lower_stderr: lower.stderr,
            upper: upper.value,
            upper_stderr: upper.stderr,
            lower_normalized: normalized(lower.value, sigma2.value),
            upper_normalized: normalized(upper.value, sigma2.value),
        });
    }
    Ok(Outcome {
        payload: Payload::Sobol(SobolPayload {
            sigma2: sigma2.value,
            sigma2_stderr: sigma2.stderr,
            indices,
        }),
        exit_code: 0,
    })
}

pub fn run_analyze(
    f: &FunctionSpec,
    config: &RunConfig,
    prior: Option<&Partition>,
    max_candidates: usize,
) -> Result<Outcome> {
    let batch = SampleBatch::generate(config.dim, config.samples, config.seed)?;
    let options = SearchOptions {
        rule: config.rule,
        max_candidates,
    };
    let outcome = match prior {
        Some(p) => refine_partition(f, &batch, options, p)?,
        None => discover_partition(f, &batch, options)?,
    };
    let exit_code = if outcome.truncated() { 3 } else { 0 };
    Ok(Outcome {
        payload: Payload::Analyze(outcome.into()),
        exit_code,
    })
}

/// Default node count: the largest of 32, 16, 8 whose tensor grid fits the budget.
pub fn default_nodes(dim: usize) -> usize {
    [32, 16, 8]
        .into_iter()
        .find(|&n| grid_size(n, dim).is_some())
        .unwrap_or(8)
}

pub fn run_oracle(
    f: &FunctionSpec,
    config: &RunConfig,
    partition: Option<&Partition>,
    subsets: &[VariableSubset],
    nodes: usize,
) -> Result<Outcome> {
    if config.dim > ORACLE_MAX_DIM {
        bail!(
            "oracle is limited to s <= {ORACLE_MAX_DIM} (requested s = {}); the tensor grid would exceed the evaluation budget",
            config.dim
        );
    }
    let oracle = AnovaOracle::new(f, QuadratureRule::gauss_legendre(nodes))?;
    let partition = match partition {
        Some(p) => p.clone(),
        None => Partition::singletons(config.dim)?,
    };
    let gamma2 = oracle.gamma2(&partition)?;
    let sigma2 = oracle.sigma2();

    // residual check on a reproducible random grid, anchored at the cube centre
    let grid = SampleBatch::generate(config.dim, VERIFICATION_POINTS, config.seed)?;
    let anchor = AnchorPoint::center(config.dim);
    let mut residual_max = 0.0f64;
    let mut residual_scale = 0.0f64;
    for i in 0..grid.len() {
        let x = grid.x(i);
        let r = separability_residual(f, &partition, x, ResidualMode::Anchored(&anchor))?;
        residual_max = residual_max.max(r.abs());
        residual_scale = residual_scale.max(f.evaluate(x)?.abs());
    }

    let mut indices = Vec::new();
    for &u in subsets {
        indices.push(OracleIndex {
            subset: u,
            lower: oracle.tau_lower(u)?,
            upper: oracle.tau_upper(u)?,
        });
    }
    let report = oracle.report(config.dim);
    let terms = report
        .terms
        .iter()
        .map(|(&subset, &sigma2)| OracleTerm { subset, sigma2 })
        .collect();
    Ok(Outcome {
        payload: Payload::Oracle(OraclePayload {
            nodes,
            grid_evaluations: oracle.evaluations(),
            mean: oracle.mean(),
            sigma2,
            partition,
            gamma2,
            normalized: normalized(gamma2, sigma2),
            residual_max,
            residual_scale,
            verification_points: VERIFICATION_POINTS,
            indices,
            terms,
        }),
        exit_code: 0,
    })
}
