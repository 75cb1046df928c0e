use std::fmt::Write as _;

use serde::Serialize;

use crate::commands::Payload;
use crate::config::{Format, RunConfig};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub payload: &'a Payload,
    pub eval_count: u64,
    /// Excluded from the determinism contract; always the last field.
    pub wall_time_ms: f64,
}

impl Report<'_> {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => csv(self.payload),
            Format::Text => text(self),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv(payload: &Payload) -> String {
    let mut out = String::new();
    match payload {
        Payload::Estimate(e) => {
            out.push_str(
                "partition,n,seed,gamma2,sigma2,normalized,stderr,residual_max,scale,decision\n",
            );
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{},{},{},{}",
                e.partition,
                e.n,
                e.seed,
                e.gamma2_hat,
                e.sigma2_hat,
                opt(e.normalized),
                e.stderr,
                e.residual_max,
                e.scale,
                e.decision
            );
        }
        Payload::Sobol(s) => {
            out.push_str("subset,lower,lower_stderr,upper,upper_stderr,lower_normalized,upper_normalized,sigma2\n");
            for r in &s.indices {
                let _ = writeln!(
                    out,
                    "\"{}\",{},{},{},{},{},{},{}",
                    r.subset,
                    r.lower,
                    r.lower_stderr,
                    r.upper,
                    r.upper_stderr,
                    opt(r.lower_normalized),
                    opt(r.upper_normalized),
                    s.sigma2
                );
            }
        }
        Payload::Analyze(a) => {
            out.push_str("step,candidate,gamma2,residual_max,stderr,decision\n");
            for (k, e) in a.trace.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},\"{}\",{},{},{},{}",
                    k + 1,
                    e.candidate,
                    e.gamma2,
                    e.residual_max,
                    e.stderr,
                    e.decision
                );
            }
        }
        Payload::Oracle(o) => {
            out.push_str("quantity,subset,value\n");
            let _ = writeln!(out, "mean,,{}", o.mean);
            let _ = writeln!(out, "sigma2,,{}", o.sigma2);
            let _ = writeln!(out, "gamma2,\"{}\",{}", o.partition, o.gamma2);
            let _ = writeln!(out, "residual_max,\"{}\",{}", o.partition, o.residual_max);
            for i in &o.indices {
                let _ = writeln!(out, "tau_lower,\"{}\",{}", i.subset, i.lower);
                let _ = writeln!(out, "tau_upper,\"{}\",{}", i.subset, i.upper);
            }
            for t in &o.terms {
                let _ = writeln!(out, "sigma2_term,\"{}\",{}", t.subset, t.sigma2);
            }
        }
    }
    out
}

fn text(report: &Report<'_>) -> String {
    let mut out = String::new();
    let c = report.config;
    let _ = writeln!(
        out,
        "sepscan {} {}  s={} n={} seed={}",
        c.command, c.function, c.dim, c.samples, c.seed
    );
    match report.payload {
        Payload::Estimate(e) => {
            let _ = writeln!(out, "partition     {}", e.partition);
            let _ = writeln!(out, "gamma2        {:.6e} ± {:.2e}", e.gamma2_hat, e.stderr);
            let _ = writeln!(out, "sigma2        {:.6e}", e.sigma2_hat);
            if let Some(v) = e.normalized {
                let _ = writeln!(out, "normalized    {v:.6e}");
            }
            let _ = writeln!(
                out,
                "residual max  {:.3e} (scale {:.3e})",
                e.residual_max, e.scale
            );
            let _ = writeln!(out, "decision      {}", e.decision);
        }
        Payload::Sobol(s) => {
            let _ = writeln!(out, "sigma2 {:.6e} ± {:.2e}", s.sigma2, s.sigma2_stderr);
            for r in &s.indices {
                let _ = writeln!(
                    out,
                    "{:<12} lower {:.6e} ± {:.2e}  upper {:.6e} ± {:.2e}",
                    r.subset.to_string(),
                    r.lower,
                    r.lower_stderr,
                    r.upper,
                    r.upper_stderr
                );
            }
        }
        Payload::Analyze(a) => {
            for e in &a.trace {
                let mark = if e.decision.is_separable() { "*" } else { " " };
                let _ = writeln!(
                    out,
                    "{mark} {:<16} gamma2 {:+.3e}  residual {:.3e}",
                    e.candidate.to_string(),
                    e.gamma2,
                    e.residual_max
                );
            }
            let _ = writeln!(
                out,
                "partition {}  ({} candidates)",
                a.partition, a.candidates_tested
            );
            if a.truncated {
                let _ = writeln!(out, "search truncated");
            }
            if !a.flagged.is_empty() {
                let flagged: Vec<String> = a.flagged.iter().map(|b| b.to_string()).collect();
                let _ = writeln!(out, "flagged blocks {}", flagged.join(" "));
            }
        }
        Payload::Oracle(o) => {
            let _ = writeln!(out, "mean {:.12e}  sigma2 {:.12e}", o.mean, o.sigma2);
            let _ = writeln!(out, "gamma2 {} = {:.12e}", o.partition, o.gamma2);
            let _ = writeln!(
                out,
                "residual max {:.3e} over {} points",
                o.residual_max, o.verification_points
            );
            for i in &o.indices {
                let _ = writeln!(
                    out,
                    "{:<12} lower {:.12e}  upper {:.12e}",
                    i.subset.to_string(),
                    i.lower,
                    i.upper
                );
            }
        }
    }
    let _ = writeln!(out, "evaluations {}", report.eval_count);
    out
}
