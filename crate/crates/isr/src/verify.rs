//! Timed property suites over the core oracles.

use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use isr_core::verify::{
    curve_suite, gradient_suite, loss_curves, matching_suite, metric_suite, queue_suite, slump_root, CurvePoint,
    SuiteOutcome,
};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Matching,
    Gradients,
    Curves,
    Queue,
    Metrics,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub suite: Suite,
    /// Random instances for the assignment sweep.
    pub instances: usize,
    /// Random configurations for the gradient checks.
    pub configs: usize,
    pub seed: u64,
    /// Where the curve suite writes its CSV, if anywhere.
    pub curves_csv: Option<std::path::PathBuf>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            instances: 1000,
            configs: 500,
            seed: 0,
            curves_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub worst: f64,
    pub seconds: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn from_outcome(o: &SuiteOutcome, seconds: f64) -> Self {
        Self {
            name: o.name.to_string(),
            passed: o.passed(),
            checks: o.checks,
            worst: o.worst,
            seconds,
            failures: o.failures.clone(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

pub fn write_curves(path: &Path, curves: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["gamma", "p", "loss", "grad_stopgrad", "grad_kept"])
        .map_err(Error::csv(path))?;
    for c in curves {
        w.write_record([c.gamma, c.p, c.loss, c.grad_stopgrad, c.grad_kept].map(|v| v.to_string()))
            .map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Runs the requested suites. Gradient families report separately.
pub fn run(opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    let wants = |s: Suite| opts.suite == Suite::All || opts.suite == s;
    let mut reports = Vec::new();
    if wants(Suite::Matching) {
        let (o, t) = timed(|| matching_suite(opts.instances, 7, opts.seed));
        reports.push(SuiteReport::from_outcome(&o, t));
    }
    if wants(Suite::Gradients) {
        let (o, t) = timed(|| gradient_suite(opts.configs, opts.seed, 1e-5, 1e-4));
        for s in o.suites() {
            reports.push(SuiteReport::from_outcome(s, t));
        }
    }
    if wants(Suite::Curves) {
        let (o, t) = timed(|| {
            let curves = loss_curves(&[0.0, 2.0, 4.0, 6.0, 8.0]);
            (curve_suite(&curves, opts.seed), curves)
        });
        if let Some(path) = &opts.curves_csv {
            write_curves(path, &o.1)?;
        }
        for gamma in [2.0, 4.0, 6.0, 8.0] {
            log::info!("slump root gamma {gamma}: {:.9} (e^(-1/gamma) = {:.9})", slump_root(gamma), (-1.0 / gamma as f64).exp());
        }
        reports.push(SuiteReport::from_outcome(&o.0, t));
    }
    if wants(Suite::Queue) {
        let (o, t) = timed(|| queue_suite(300, opts.seed));
        reports.push(SuiteReport::from_outcome(&o, t));
    }
    if wants(Suite::Metrics) {
        let (o, t) = timed(|| metric_suite(2000, 20_000, opts.seed));
        reports.push(SuiteReport::from_outcome(&o, t));
    }
    Ok(reports)
}
