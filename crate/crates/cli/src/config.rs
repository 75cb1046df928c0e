use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use sepscan_core::{Benchmark, DecisionRule, Domain, ExternalEvaluator, FunctionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Residual,
    Statistical,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Function to analyse: builtin:NAME, expr:"...", or exec:PATH [ARGS...]
    #[arg(short = 'f', long = "function")]
    pub function: String,

    /// Dimension s (inferred for fixed-dimension builtins)
    #[arg(short = 's', long = "dim")]
    pub dim: Option<usize>,

    /// Monte Carlo sample count n
    #[arg(short = 'n', long = "samples", default_value_t = 4096)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Box the unit cube is mapped onto, "a1:b1,a2:b2,..."
    #[arg(long)]
    pub domain: Option<String>,

    #[arg(long, value_enum, default_value_t = RuleKind::Residual)]
    pub rule: RuleKind,

    #[arg(long = "tol-rel", default_value_t = DecisionRule::DEFAULT_TOL_REL)]
    pub tol_rel: f64,

    #[arg(long = "tol-abs", default_value_t = DecisionRule::DEFAULT_TOL_ABS)]
    pub tol_abs: f64,

    #[arg(long = "c-stat", default_value_t = DecisionRule::DEFAULT_C)]
    pub c_stat: f64,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,

    /// Seconds before an external evaluator batch is killed
    #[arg(long = "exec-timeout")]
    pub exec_timeout: Option<f64>,
}

/// Everything that determines a report's content. Echoed in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub function: String,
    pub dim: usize,
    pub domain: Option<String>,
    pub samples: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub rule: DecisionRule,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_candidates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

impl CommonArgs {
    pub fn decision_rule(&self) -> DecisionRule {
        match self.rule {
            RuleKind::Residual => DecisionRule::Residual {
                tol_abs: self.tol_abs,
                tol_rel: self.tol_rel,
            },
            RuleKind::Statistical => DecisionRule::Statistical {
                c: self.c_stat,
                tol_abs: self.tol_abs,
            },
        }
    }

    /// Builds the function and the config echo.
    pub fn resolve(&self, command: &'static str) -> Result<(FunctionSpec, RunConfig)> {
        let (spec, dim) = build_function(&self.function, self.dim, self.exec_timeout)?;
        let spec = match &self.domain {
            Some(text) => {
                let domain: Domain = text.parse()?;
                spec.with_domain(domain)?
            }
            None => spec,
        };
        if self.samples == 0 {
            bail!("--samples must be at least 1");
        }
        let config = RunConfig {
            command,
            function: self.function.clone(),
            dim,
            domain: self.domain.clone(),
            samples: self.samples,
            seed: self.seed,
            rule: self.decision_rule(),
            format: self.format,
            partition: None,
            subsets: Vec::new(),
            budget_candidates: None,
            nodes: None,
        };
        Ok((spec, config))
    }
}

fn build_function(
    selector: &str,
    dim: Option<usize>,
    timeout: Option<f64>,
) -> Result<(FunctionSpec, usize)> {
    let Some((kind, body)) = selector.split_once(':') else {
        bail!("function {selector:?} must be builtin:NAME, expr:\"...\" or exec:PATH");
    };
    let require_dim = || dim.with_context(|| format!("-s/--dim is required for {kind}: functions"));
    match kind {
        "builtin" => {
            let benchmark: Benchmark = body.parse()?;
            let dim = match (dim, benchmark.fixed_dim()) {
                (Some(d), _) => d,
                (None, Some(d)) => d,
                (None, None) => bail!("-s/--dim is required for builtin:{benchmark}"),
            };
            Ok((FunctionSpec::builtin(benchmark, dim)?, dim))
        }
        "expr" => {
            let dim = require_dim()?;
            Ok((FunctionSpec::expression(body, dim)?, dim))
        }
        "exec" => {
            let dim = require_dim()?;
            let mut words = body.split_whitespace();
            let program = words.next().context("exec: needs a program path")?;
            let mut evaluator =
                ExternalEvaluator::new(program).with_args(words.map(str::to_string).collect());
            if let Some(secs) = timeout {
                evaluator = evaluator.with_timeout(std::time::Duration::from_secs_f64(secs));
            }
            Ok((FunctionSpec::external(evaluator, dim)?, dim))
        }
        other => bail!("unknown function source {other:?}; use builtin:, expr: or exec:"),
    }
}
