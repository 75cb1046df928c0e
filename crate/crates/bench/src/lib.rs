//! Shared fixtures for the criterion benchmarks.

use sepscan_core::{Benchmark, FunctionSpec, SampleBatch};

/// Builtin function with its batch, ready to estimate on.
pub fn fixture(benchmark: Benchmark, dim: usize, n: usize) -> (FunctionSpec, SampleBatch) {
    let f = FunctionSpec::builtin(benchmark, dim).expect("valid benchmark dimension");
    let b = SampleBatch::generate(dim, n, 0).expect("valid batch");
    (f, b)
}

/// Additive function of `dim / 2` coupled pairs, written as an expression so
/// the parser and tree evaluator are on the measured path.
pub fn paired_expression(dim: usize) -> FunctionSpec {
    let text = (1..=dim / 2)
        .map(|k| format!("exp(x{}*x{})", 2 * k - 1, 2 * k))
        .collect::<Vec<_>>()
        .join(" + ");
    FunctionSpec::expression(&text, dim).expect("valid expression")
}
