use proptest::prelude::*;
use sepscan_core::{
    estimate_gamma, project_anchored, project_anova, separability_residual, AnchorPoint,
    AnovaOracle, Benchmark, DecisionRule, FunctionSpec, Objective, Partition, QuadratureRule,
    ResidualMode, SampleBatch, VariableSubset,
};

const SMOOTH: &str = "exp(x1*x2) + x3*sin(2*x1) + x2^2*x3";

fn smooth() -> FunctionSpec {
    FunctionSpec::expression(SMOOTH, 3).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn anova_projections_commute(x in point(), i in 1usize..=3, j in 1usize..=3) {
        let f = smooth();
        let rule = QuadratureRule::gauss_legendre(16);
        let ij = project_anova(project_anova(&f, j, &rule).unwrap(), i, &rule).unwrap();
        let ji = project_anova(project_anova(&f, i, &rule).unwrap(), j, &rule).unwrap();
        let (a, b) = (ij.evaluate(&x).unwrap(), ji.evaluate(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn anova_projection_is_idempotent(x in point(), j in 1usize..=3) {
        let f = smooth();
        let rule = QuadratureRule::gauss_legendre(16);
        let once = project_anova(&f, j, &rule).unwrap();
        let twice = project_anova(project_anova(&f, j, &rule).unwrap(), j, &rule).unwrap();
        let (a, b) = (once.evaluate(&x).unwrap(), twice.evaluate(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn anchored_projections_commute_and_are_idempotent(
        x in point(),
        t in point(),
        i in 1usize..=3,
        j in 1usize..=3,
    ) {
        let f = smooth();
        let t = AnchorPoint::new(t).unwrap();
        let ij = project_anchored(project_anchored(&f, j, &t).unwrap(), i, &t).unwrap();
        let ji = project_anchored(project_anchored(&f, i, &t).unwrap(), j, &t).unwrap();
        prop_assert_eq!(ij.evaluate(&x).unwrap(), ji.evaluate(&x).unwrap());
        let jj = project_anchored(project_anchored(&f, j, &t).unwrap(), j, &t).unwrap();
        let once = project_anchored(&f, j, &t).unwrap();
        prop_assert_eq!(jj.evaluate(&x).unwrap(), once.evaluate(&x).unwrap());
    }

    #[test]
    fn projection_removes_dependence(x in point(), y in 0.0f64..=1.0, j in 1usize..=3) {
        let f = smooth();
        let rule = QuadratureRule::gauss_legendre(16);
        let p = project_anova(&f, j, &rule).unwrap();
        let mut moved = x.clone();
        moved[j - 1] = y;
        prop_assert_eq!(p.evaluate(&x).unwrap(), p.evaluate(&moved).unwrap());
    }

    #[test]
    fn both_residual_modes_vanish_on_separable_pairs(x in point(), t in point()) {
        let f = FunctionSpec::expression("exp(x1*x3) + sqrt(1 + x2)", 3).unwrap();
        let p = Partition::parse("{1,3}|{2}", 3).unwrap();
        let t = AnchorPoint::new(t).unwrap();
        let rule = QuadratureRule::gauss_legendre(16);
        let anchored = separability_residual(&f, &p, &x, ResidualMode::Anchored(&t)).unwrap();
        let anova = separability_residual(&f, &p, &x, ResidualMode::Anova(&rule)).unwrap();
        prop_assert!(anchored.abs() <= 1e-14);
        prop_assert!(anova.abs() <= 1e-13);
    }
}

#[test]
fn oracle_gamma_matches_its_definition() {
    let f = smooth();
    let oracle = AnovaOracle::new(&f, QuadratureRule::gauss_legendre(24)).unwrap();
    let full = VariableSubset::full(3).unwrap();
    for u in full.subsets().filter(|u| !u.is_empty() && *u != full) {
        let p = Partition::split(u, 3).unwrap();
        let lower: f64 = p
            .blocks()
            .iter()
            .map(|&b| oracle.tau_lower(b).unwrap())
            .sum();
        let gamma = oracle.gamma2(&p).unwrap();
        assert!((gamma - (oracle.sigma2() - lower)).abs() < 1e-14, "{p}");
        // γ² sums the variance of every term that straddles the split
        let straddling: f64 = full
            .subsets()
            .filter(|v| {
                !v.is_empty() && !v.is_subset_of(u) && !v.is_subset_of(u.complement(3).unwrap())
            })
            .map(|v| oracle.sigma2_term(v).unwrap())
            .sum();
        assert!(
            (gamma - straddling).abs() < 1e-13,
            "{p}: {gamma} vs {straddling}"
        );
    }
}

#[test]
fn oracle_gamma_vanishes_on_ground_truth() {
    for (b, dim, nodes) in [
        (Benchmark::Paper5, 5, 6),
        (Benchmark::Sphere, 4, 8),
        (Benchmark::SumSin, 3, 24),
    ] {
        let f = FunctionSpec::builtin(b, dim).unwrap();
        let oracle = AnovaOracle::new(&f, QuadratureRule::gauss_legendre(nodes)).unwrap();
        let p = b.ground_truth(dim).unwrap();
        let gamma = oracle.gamma2(&p).unwrap();
        assert!(gamma.abs() < 1e-14, "{b}: {gamma}");
    }
}

#[test]
fn estimator_averages_to_oracle() {
    let f = FunctionSpec::builtin(Benchmark::Chain, 3).unwrap();
    let p = Partition::singletons(3).unwrap();
    let exact = AnovaOracle::new(&f, QuadratureRule::gauss_legendre(4))
        .unwrap()
        .gamma2(&p)
        .unwrap();
    let estimates: Vec<_> = (0..20)
        .map(|seed| {
            let b = SampleBatch::generate(3, 5000, seed).unwrap();
            estimate_gamma(&f, &p, &b, DecisionRule::residual()).unwrap()
        })
        .collect();
    let mean = estimates.iter().map(|e| e.gamma2_hat).sum::<f64>() / estimates.len() as f64;
    let stderr = estimates.iter().map(|e| e.stderr).sum::<f64>()
        / estimates.len() as f64
        / (estimates.len() as f64).sqrt();
    assert!(
        (mean - exact).abs() < 4.0 * stderr,
        "{mean} vs {exact} ± {stderr}"
    );
    assert!(estimates.iter().all(|e| !e.decision.is_separable()));
}
