//! Block discovery.
//!
//! Candidates `u` are tested one at a time against their complement with the
//! two-block index `γ²_{u,-u}`. For rank `r = 1..s-1` the candidates are
//! `v ∪ {r}` with `v` drawn from the not-yet-assigned indices below `r`; the
//! first separable candidate becomes a block and the search moves on to
//! `r + 1`. Whatever is left at the end forms the last block.

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::estimator::{
    estimate_gamma, Decision, DecisionRule, EstimateError, SeparabilityEstimate,
};
use crate::function::Objective;
use crate::sample::SampleBatch;
use crate::subset::{Candidates, Partition, VariableSubset};

/// Default cap on the number of candidates tested.
pub const DEFAULT_MAX_CANDIDATES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub rule: DecisionRule,
    pub max_candidates: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            rule: DecisionRule::default(),
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

impl From<DecisionRule> for SearchOptions {
    fn from(rule: DecisionRule) -> Self {
        SearchOptions {
            rule,
            ..SearchOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub candidate: VariableSubset,
    pub gamma2: f64,
    pub residual_max: f64,
    pub stderr: f64,
    pub decision: Decision,
}

impl TraceEntry {
    fn from_estimate(candidate: VariableSubset, e: &SeparabilityEstimate) -> Self {
        TraceEntry {
            candidate,
            gamma2: e.gamma2_hat,
            residual_max: e.residual_max,
            stderr: e.stderr,
            decision: e.decision,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
    /// Raw evaluations spent while testing candidates.
    pub search_evaluations: u64,
    /// Raw evaluations spent re-checking the final partition.
    pub verification_evaluations: u64,
    pub truncated: bool,
}

impl SearchTrace {
    pub fn candidates_tested(&self) -> usize {
        self.entries.len()
    }

    pub fn candidates(&self) -> Vec<VariableSubset> {
        self.entries.iter().map(|e| e.candidate).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub partition: Partition,
    pub trace: SearchTrace,
    /// Full m-block estimate for the returned partition (absent for `m = 1`
    /// or a truncated search).
    pub verification: Option<SeparabilityEstimate>,
    /// Prior blocks that failed their own two-block check (refinement only).
    pub flagged: Vec<VariableSubset>,
}

impl SearchOutcome {
    pub fn truncated(&self) -> bool {
        self.trace.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("search failed after {} candidates: {source}", trace.candidates_tested())]
pub struct SearchError {
    #[source]
    pub source: EstimateError,
    pub trace: SearchTrace,
}

struct Searcher<'a, F: ?Sized> {
    f: &'a F,
    batch: &'a SampleBatch,
    options: SearchOptions,
    trace: SearchTrace,
}

impl<'a, F: Objective + ?Sized> Searcher<'a, F> {
    fn new(f: &'a F, batch: &'a SampleBatch, options: SearchOptions) -> Self {
        Searcher {
            f,
            batch,
            options,
            trace: SearchTrace::default(),
        }
    }

    fn fail(self, source: EstimateError) -> SearchError {
        SearchError {
            source,
            trace: self.trace,
        }
    }

    fn columns(&self) -> u64 {
        self.batch.cached_columns() as u64
    }

    /// Tests `γ²_{u,-u}` and records it. `None` once the budget is exhausted.
    fn test(&mut self, u: VariableSubset) -> Result<Option<Decision>, EstimateError> {
        if self.trace.entries.len() >= self.options.max_candidates {
            self.trace.truncated = true;
            return Ok(None);
        }
        let before = self.columns();
        let split = Partition::split(u, self.batch.dim())?;
        let e = estimate_gamma(self.f, &split, self.batch, self.options.rule)?;
        self.trace.search_evaluations += (self.columns() - before) * self.batch.len() as u64;
        self.trace.entries.push(TraceEntry::from_estimate(u, &e));
        Ok(Some(e.decision))
    }

    /// Splits `domain` into blocks, each separable from its complement in `[1:s]`.
    fn split_domain(
        &mut self,
        domain: VariableSubset,
    ) -> Result<Vec<VariableSubset>, EstimateError> {
        let members = domain.to_vec();
        let mut blocks = Vec::new();
        let mut assigned = VariableSubset::EMPTY;
        'ranks: for (position, &r) in members
            .iter()
            .enumerate()
            .take(members.len().saturating_sub(1))
        {
            let below = VariableSubset::from_indices(members[..position].iter().copied())?;
            for u in Candidates::new(r, below.difference(assigned)) {
                match self.test(u)? {
                    None => break 'ranks,
                    Some(Decision::Separable) => {
                        blocks.push(u);
                        assigned = assigned.union(u);
                        continue 'ranks;
                    }
                    Some(Decision::NonSeparable) => {}
                }
            }
        }
        let rest = domain.difference(assigned);
        if !rest.is_empty() {
            blocks.push(rest);
        }
        Ok(blocks)
    }

    fn finish(
        mut self,
        blocks: Vec<VariableSubset>,
        flagged: Vec<VariableSubset>,
    ) -> Result<SearchOutcome, SearchError> {
        let partition = match Partition::new(blocks, self.batch.dim()) {
            Ok(p) => p,
            Err(e) => return Err(self.fail(e.into())),
        };
        let mut verification = None;
        if partition.len() > 1 && !self.trace.truncated && flagged.is_empty() {
            let before = self.columns();
            let e = match estimate_gamma(self.f, &partition, self.batch, self.options.rule) {
                Ok(e) => e,
                Err(err) => return Err(self.fail(err)),
            };
            self.trace.verification_evaluations =
                (self.columns() - before) * self.batch.len() as u64;
            if !e.decision.is_separable() {
                warn!(
                    "partition {partition} failed its m-block re-check (residual {:e})",
                    e.residual_max
                );
            }
            verification = Some(e);
        }
        Ok(SearchOutcome {
            partition,
            trace: self.trace,
            verification,
            flagged,
        })
    }
}

/// Finds the number of blocks and the blocks themselves.
pub fn discover_partition<F: Objective + ?Sized>(
    f: &F,
    b: &SampleBatch,
    options: impl Into<SearchOptions>,
) -> Result<SearchOutcome, SearchError> {
    let mut searcher = Searcher::new(f, b, options.into());
    let all = VariableSubset::full(b.dim()).expect("batch dimension is valid");
    match searcher.split_domain(all) {
        Ok(blocks) => searcher.finish(blocks, Vec::new()),
        Err(e) => Err(searcher.fail(e)),
    }
}

/// Re-checks every block of `prior` against its complement and, when all pass,
/// splits each block further with the same search restricted to its variables.
/// Blocks that fail are listed in [`SearchOutcome::flagged`] and `prior` is
/// returned unchanged.
pub fn refine_partition<F: Objective + ?Sized>(
    f: &F,
    b: &SampleBatch,
    options: impl Into<SearchOptions>,
    prior: &Partition,
) -> Result<SearchOutcome, SearchError> {
    let options = options.into();
    if prior.len() == 1 {
        return discover_partition(f, b, options);
    }
    let mut searcher = Searcher::new(f, b, options);
    let mut flagged = Vec::new();
    for &block in prior.blocks() {
        match searcher.test(block) {
            Ok(Some(Decision::NonSeparable)) => flagged.push(block),
            Ok(Some(Decision::Separable)) => {}
            Ok(None) => break,
            Err(e) => return Err(searcher.fail(e)),
        }
    }
    if !flagged.is_empty() || searcher.trace.truncated {
        let blocks = prior.blocks().to_vec();
        return searcher.finish(blocks, flagged);
    }
    let mut blocks = Vec::new();
    for &block in prior.blocks() {
        match searcher.split_domain(block) {
            Ok(parts) => blocks.extend(parts),
            Err(e) => return Err(searcher.fail(e)),
        }
    }
    searcher.finish(blocks, flagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{Benchmark, FunctionSpec};

    fn set(indices: &[usize]) -> VariableSubset {
        VariableSubset::from_indices(indices.iter().copied()).unwrap()
    }

    fn run(benchmark: Benchmark, dim: usize, n: usize, seed: u64) -> SearchOutcome {
        let f = FunctionSpec::builtin(benchmark, dim).unwrap();
        let b = SampleBatch::generate(dim, n, seed).unwrap();
        discover_partition(&f, &b, DecisionRule::default()).unwrap()
    }

    #[test]
    fn worked_example_trace() {
        let out = run(Benchmark::Paper5, 5, 1024, 0);
        assert_eq!(
            out.trace.candidates(),
            vec![
                set(&[1]),
                set(&[2]),
                set(&[3]),
                set(&[2, 3]),
                set(&[4]),
                set(&[2, 4])
            ]
        );
        assert_eq!(out.partition.to_string(), "{1}|{2,4}|{3,5}");
        assert!(out.verification.unwrap().decision.is_separable());
    }

    #[test]
    fn fully_separable_is_linear() {
        let out = run(Benchmark::Sphere, 4, 256, 3);
        assert_eq!(
            out.trace.candidates(),
            vec![set(&[1]), set(&[2]), set(&[3])]
        );
        assert_eq!(out.partition, Partition::singletons(4).unwrap());
    }

    #[test]
    fn non_separable_is_exhaustive() {
        let out = run(Benchmark::Product, 3, 256, 3);
        assert_eq!(
            out.trace.candidates(),
            vec![set(&[1]), set(&[2]), set(&[1, 2])]
        );
        assert_eq!(out.partition, Partition::trivial(3).unwrap());
        assert!(out.verification.is_none());
    }

    #[test]
    fn one_dimensional_function() {
        let out = run(Benchmark::Sphere, 1, 16, 0);
        assert!(out.trace.entries.is_empty());
        assert_eq!(out.partition, Partition::trivial(1).unwrap());
    }

    #[test]
    fn candidate_budget_truncates() {
        let f = FunctionSpec::builtin(Benchmark::Product, 5).unwrap();
        let b = SampleBatch::generate(5, 64, 0).unwrap();
        let options = SearchOptions {
            max_candidates: 4,
            ..SearchOptions::default()
        };
        let out = discover_partition(&f, &b, options).unwrap();
        assert!(out.truncated());
        assert_eq!(out.trace.candidates_tested(), 4);
    }

    #[test]
    fn evaluation_errors_keep_partial_trace() {
        // log is undefined for x3 < 1/2
        let f = FunctionSpec::expression("x1 + x2 + log(x3 - 0.5)", 3).unwrap();
        let b = SampleBatch::generate(3, 64, 0).unwrap();
        let err = discover_partition(&f, &b, DecisionRule::default()).unwrap_err();
        assert!(matches!(err.source, EstimateError::Eval(_)));
    }

    #[test]
    fn refine_splits_coarse_block() {
        let f = FunctionSpec::builtin(Benchmark::Paper5, 5).unwrap();
        let b = SampleBatch::generate(5, 1024, 1).unwrap();
        let prior = Partition::parse("{1}|{2,3,4,5}", 5).unwrap();
        let out = refine_partition(&f, &b, DecisionRule::default(), &prior).unwrap();
        assert!(out.flagged.is_empty());
        assert_eq!(out.partition.to_string(), "{1}|{2,4}|{3,5}");
        assert!(out.partition.refines(&prior));
    }

    #[test]
    fn refine_flags_invalid_blocks() {
        let f = FunctionSpec::builtin(Benchmark::Bilinear, 2).unwrap();
        let b = SampleBatch::generate(2, 256, 1).unwrap();
        let prior = Partition::singletons(2).unwrap();
        let out = refine_partition(&f, &b, DecisionRule::default(), &prior).unwrap();
        assert_eq!(out.flagged, vec![set(&[1]), set(&[2])]);
        assert_eq!(out.partition, prior);
    }

    #[test]
    fn refine_trivial_prior_matches_discovery() {
        let f = FunctionSpec::builtin(Benchmark::Paper5, 5).unwrap();
        let b = SampleBatch::generate(5, 256, 2).unwrap();
        let d = discover_partition(&f, &b.fresh(), DecisionRule::default()).unwrap();
        let r = refine_partition(
            &f,
            &b,
            DecisionRule::default(),
            &Partition::trivial(5).unwrap(),
        )
        .unwrap();
        assert_eq!(d, r);
    }
}
