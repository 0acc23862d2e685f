//! Ablation studies: component arms, focal comparison, hyper-parameter sweeps,
//! data-size trend and training-time scaling.

use std::path::Path;
use std::time::Instant;

use isr_core::data::{Dataset, WorldConfig};
use isr_core::eval::{evaluate, RetrievalSplit};
use isr_core::trainer::{train_with_clock, Objective, TrainConfig, TrainStatus};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::WallClock;

/// World used by the ordering experiments: the default world with a larger identity
/// pool, so people rarely recur across training videos, and twice the held-out videos.
pub fn acceptance_world(seed: u64) -> WorldConfig {
    WorldConfig {
        num_identities: 1000,
        heldout_videos: 40,
        seed,
        ..WorldConfig::default()
    }
}

/// Shortened schedule used by the ordering experiments.
pub fn acceptance_training() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        lr: 5e-4,
        queue_capacity: 1024,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub config: TrainConfig,
}

impl Arm {
    fn new(name: impl Into<String>, config: TrainConfig) -> Self {
        Self {
            name: name.into(),
            config,
        }
    }
}

fn with_weights(base: &TrainConfig, gamma: f64, lambda: f64) -> TrainConfig {
    let mut c = base.clone();
    c.objective = Objective::Isr;
    c.loss.gamma = gamma;
    c.loss.lambda = lambda;
    c
}

/// `instance_disc`, `cp_only`, `cp+rc`, `cp+q`, `cp+rc+q`, using `base`'s gamma and lambda
/// for the enabled terms.
pub fn component_arms(base: &TrainConfig) -> Vec<Arm> {
    let (g, l) = (base.loss.gamma, base.loss.lambda);
    let mut instance = with_weights(base, 0.0, 0.0);
    instance.objective = Objective::InstanceDiscrimination;
    vec![
        Arm::new("instance_disc", instance),
        Arm::new("cp_only", with_weights(base, 0.0, 0.0)),
        Arm::new("cp+rc", with_weights(base, g, 0.0)),
        Arm::new("cp+q", with_weights(base, 0.0, l)),
        Arm::new("cp+rc+q", with_weights(base, g, l)),
    ]
}

/// Reliability weighting against focal weighting, both without the queue term.
pub fn focal_arms(base: &TrainConfig) -> Vec<Arm> {
    let mut focal = with_weights(base, base.loss.gamma, 0.0);
    focal.objective = Objective::IsrFocal;
    vec![
        Arm::new("cp+rc", with_weights(base, base.loss.gamma, 0.0)),
        Arm::new("cp+focal", focal),
    ]
}

pub fn delta_arms(base: &TrainConfig, deltas: &[f64]) -> Vec<Arm> {
    deltas
        .iter()
        .map(|&d| {
            let mut c = with_weights(base, base.loss.gamma, base.loss.lambda);
            c.delta_max_seconds = d;
            Arm::new(format!("delta={d}"), c)
        })
        .collect()
}

pub fn gamma_arms(base: &TrainConfig, gammas: &[f64]) -> Vec<Arm> {
    gammas
        .iter()
        .map(|&g| Arm::new(format!("gamma={g}"), with_weights(base, g, base.loss.lambda)))
        .collect()
}

pub fn lambda_arms(base: &TrainConfig, lambdas: &[f64]) -> Vec<Arm> {
    lambdas
        .iter()
        .map(|&l| Arm::new(format!("lambda={l}"), with_weights(base, base.loss.gamma, l)))
        .collect()
}

/// One trained and evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub train_videos: usize,
    pub rank_1: f64,
    pub rank_5: f64,
    pub rank_10: f64,
    pub map: f64,
    pub completed: bool,
    pub seconds: f64,
}

/// Trains `arm` with `seed` on `dataset` and scores it on `split`.
pub fn run_arm(dataset: &Dataset, split: &RetrievalSplit, arm: &Arm, seed: u64) -> Result<RunResult> {
    let cfg = TrainConfig {
        seed,
        ..arm.config.clone()
    };
    let start = Instant::now();
    let out = train_with_clock(dataset, &cfg, &mut WallClock::start())?;
    let seconds = start.elapsed().as_secs_f64();
    let report = evaluate(&out.encoder, split)?;
    let completed = out.status == TrainStatus::Completed;
    if let TrainStatus::Aborted { step, reason } = &out.status {
        log::warn!("{} seed {seed}: aborted at step {step}: {reason}", arm.name);
    }
    log::info!(
        "{} seed {seed}: rank-1 {:.3} mAP {:.3} ({seconds:.1}s)",
        arm.name,
        report.rank_1,
        report.map
    );
    Ok(RunResult {
        arm: arm.name.clone(),
        seed,
        train_videos: dataset.train_videos().count(),
        rank_1: report.rank_1,
        rank_5: report.rank_5,
        rank_10: report.rank_10,
        map: report.map,
        completed,
        seconds,
    })
}

/// Every arm with every seed, arm-major.
pub fn run_arms(dataset: &Dataset, split: &RetrievalSplit, arms: &[Arm], seeds: &[u64]) -> Result<Vec<RunResult>> {
    let mut out = Vec::with_capacity(arms.len() * seeds.len());
    for arm in arms {
        for &seed in seeds {
            out.push(run_arm(dataset, split, arm, seed)?);
        }
    }
    Ok(out)
}

/// `arm` trained on the first `n` training videos for each `n` in `sizes`; the held-out
/// split is shared.
pub fn data_size_study(
    dataset: &Dataset,
    split: &RetrievalSplit,
    arm: &Arm,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<Vec<RunResult>> {
    let mut out = Vec::new();
    for &n in sizes {
        let subset = dataset.with_train_videos(n);
        let sized = Arm::new(format!("videos={n}"), arm.config.clone());
        for &seed in seeds {
            out.push(run_arm(&subset, split, &sized, seed)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub arm: String,
    pub runs: usize,
    pub rank_1_mean: f64,
    pub rank_1_std: f64,
    pub rank_5_mean: f64,
    pub rank_10_mean: f64,
    pub map_mean: f64,
    pub map_std: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Per-arm summaries in order of first appearance.
pub fn summarize(results: &[RunResult]) -> Vec<Summary> {
    let mut arms: Vec<&str> = Vec::new();
    for r in results {
        if !arms.contains(&r.arm.as_str()) {
            arms.push(&r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let runs: Vec<&RunResult> = results.iter().filter(|r| r.arm == arm).collect();
            let col = |f: fn(&RunResult) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (rank_1_mean, rank_1_std) = mean_std(&col(|r| r.rank_1));
            let (map_mean, map_std) = mean_std(&col(|r| r.map));
            Summary {
                arm: arm.to_string(),
                runs: runs.len(),
                rank_1_mean,
                rank_1_std,
                rank_5_mean: mean_std(&col(|r| r.rank_5)).0,
                rank_10_mean: mean_std(&col(|r| r.rank_10)).0,
                map_mean,
                map_std,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    for r in rows {
        w.serialize(r).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation with average ranks for ties; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, _) = mean_std(&lx);
    let (my, _) = mean_std(&ly);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub videos: usize,
    pub seconds_per_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
}

/// Wall-clock seconds per training epoch on the first `n` training videos, for each `n`.
/// Each size runs `epochs` epochs; the fastest of `repeats` runs is kept.
pub fn measure_training_scaling(
    dataset: &Dataset,
    cfg: &TrainConfig,
    sizes: &[usize],
    epochs: usize,
    repeats: usize,
) -> Result<ScalingReport> {
    if sizes.len() < 3 {
        return Err(Error::Argument {
            flag: "sizes",
            reason: format!("need at least 3 sizes, got {}", sizes.len()),
        });
    }
    let cfg = TrainConfig {
        epochs,
        ..cfg.clone()
    };
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let subset = dataset.with_train_videos(n);
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            train_with_clock(&subset, &cfg, &mut WallClock::start())?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        log::info!("{n} videos: {:.3}s per epoch", best / epochs as f64);
        points.push(ScalingPoint {
            videos: subset.train_videos().count(),
            seconds_per_epoch: best / epochs as f64,
        });
    }
    let slope = log_log_slope(
        &points
            .iter()
            .map(|p| (p.videos as f64, p.seconds_per_epoch))
            .collect::<Vec<_>>(),
    );
    Ok(ScalingReport { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 90.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Ties take average ranks: y ranks (1.5, 1.5, 3).
        let rho = spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 7.0]);
        assert!((rho - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_laws() {
        let pts: Vec<(f64, f64)> = [12.0, 25.0, 50.0, 100.0].iter().map(|&x| (x, 0.3 * x)).collect();
        assert!((log_log_slope(&pts) - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x: &f64| (x, x.powf(1.5))).collect();
        assert!((log_log_slope(&pts) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn arm_definitions() {
        let base = acceptance_training();
        let arms = component_arms(&base);
        let names: Vec<&str> = arms.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["instance_disc", "cp_only", "cp+rc", "cp+q", "cp+rc+q"]);
        assert_eq!(arms[0].config.objective, Objective::InstanceDiscrimination);
        assert_eq!((arms[1].config.loss.gamma, arms[1].config.loss.lambda), (0.0, 0.0));
        assert_eq!((arms[2].config.loss.gamma, arms[2].config.loss.lambda), (6.0, 0.0));
        assert_eq!((arms[3].config.loss.gamma, arms[3].config.loss.lambda), (0.0, 5.0));
        assert_eq!((arms[4].config.loss.gamma, arms[4].config.loss.lambda), (6.0, 5.0));
        let focal = focal_arms(&base);
        assert_eq!(focal[1].config.objective, Objective::IsrFocal);
        assert_eq!(focal[1].config.loss.lambda, 0.0);
        let deltas = delta_arms(&base, &[0.5, 8.0]);
        assert_eq!(deltas[1].config.delta_max_seconds, 8.0);
        assert_eq!(deltas[1].name, "delta=8");
    }

    #[test]
    fn summaries_keep_arm_order() {
        let r = |arm: &str, seed, rank_1| RunResult {
            arm: arm.into(),
            seed,
            train_videos: 1,
            rank_1,
            rank_5: 1.0,
            rank_10: 1.0,
            map: rank_1,
            completed: true,
            seconds: 0.0,
        };
        let s = summarize(&[r("b", 0, 0.5), r("a", 0, 0.2), r("b", 1, 0.7)]);
        assert_eq!(s[0].arm, "b");
        assert_eq!(s[0].runs, 2);
        assert!((s[0].rank_1_mean - 0.6).abs() < 1e-12);
        assert_eq!(s[1].rank_1_std, 0.0);
    }
}
