//! Oracle suites: exhaustive matching, finite-difference gradients, loss-curve
//! properties, queue ranking and retrieval metrics. Each returns the worst observed
//! discrepancy so callers can apply their own tolerances and timing.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::{Activation, Architecture, Encoder};
use crate::eval::{evaluate_embeddings, EvalReport};
use crate::losses::{
    focal_loss, modulated_grad_p, modulated_loss, objective, objective_value_frozen, queue_loss, rc_batch_loss,
    rc_loss, rc_loss_kept_gradient, reliability_from_similarities, AnchorNegatives,
};
use crate::matching::{brute_force_assignment, solve_assignment};
use crate::queue::NegativeQueue;
use crate::rng::Rng;
use crate::trainer::super_frame_blocks;
use crate::types::{dot, AssociationMatrix, FeatureMatrix, LossConfig, Matrix, Modulation, NegativeSelection};

/// Outcome of one suite: how many checks ran, the worst discrepancy, and any failures.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checks: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, discrepancy: f64, tolerance: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if discrepancy > self.worst || discrepancy.is_nan() {
            self.worst = discrepancy;
        }
        if !(discrepancy <= tolerance) && self.failures.len() < 20 {
            self.failures.push(format!("{} (discrepancy {discrepancy:e} > {tolerance:e})", what()));
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.5, what);
    }
}

/// Largest component difference relative to the largest component of either vector.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale < 1e-14 {
        diff
    } else {
        diff / scale
    }
}

/// Five-point central differences of `f` at `x`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut at = |probe: &mut Vec<f64>, i: usize, offset: f64| {
        probe[i] = x[i] + offset;
        let v = f(probe);
        probe[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| {
            let (p1, m1) = (at(&mut probe, i, h), at(&mut probe, i, -h));
            let (p2, m2) = (at(&mut probe, i, 2.0 * h), at(&mut probe, i, -2.0 * h));
            (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
        })
        .collect()
}

fn random_cost(rng: &mut Rng, m: usize, n: usize) -> Matrix {
    let data = (0..m * n).map(|_| rng.uniform_range(0.0, 2.0)).collect();
    Matrix::from_row_major(m, n, data).expect("shape")
}

/// `solve_assignment` against exhaustive enumeration on random `m <= n <= max_side` instances.
pub fn matching_suite(instances: usize, max_side: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("matching");
    let mut rng = Rng::derive(seed, "verify-matching");
    for t in 0..instances {
        let n = 1 + rng.below(max_side);
        let m = 1 + rng.below(n);
        let c = random_cost(&mut rng, m, n);
        match (solve_assignment(&c), brute_force_assignment(&c)) {
            (Ok(fast), Ok(slow)) => {
                out.record((fast.total_cost - slow.total_cost).abs(), 1e-9, || {
                    format!("instance {t} ({m}x{n}): {} vs {}", fast.total_cost, slow.total_cost)
                });
            }
            (a, b) => out.require(false, || format!("instance {t}: {a:?} / {b:?}")),
        }
    }
    out
}

/// Random `40 x 80` instances solved back to back; returns their total cost (timing is the caller's).
pub fn matching_scale_workload(instances: usize, seed: u64) -> f64 {
    let mut rng = Rng::derive(seed, "verify-matching-scale");
    (0..instances)
        .map(|_| {
            let c = random_cost(&mut rng, 40, 80);
            solve_assignment(&c).map(|m| m.total_cost).unwrap_or(f64::NAN)
        })
        .sum()
}

fn random_association(rng: &mut Rng, m: usize, n: usize) -> AssociationMatrix {
    let mut cols: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut cols);
    cols.truncate(m);
    AssociationMatrix::from_assignment(cols, n).expect("injective")
}

fn unit_columns(rng: &mut Rng, d: usize, m: usize) -> FeatureMatrix {
    let raw: Vec<f64> = (0..d * m).map(|_| rng.normal()).collect();
    FeatureMatrix::normalized(d, &raw).expect("nonzero gaussian columns")
}

/// Worst relative errors of each gradient family over a finite-difference sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientOutcome {
    pub rc_stopgrad: SuiteOutcome,
    pub kept: SuiteOutcome,
    pub focal: SuiteOutcome,
    pub queue: SuiteOutcome,
    pub pipeline: SuiteOutcome,
}

impl GradientOutcome {
    pub fn suites(&self) -> [&SuiteOutcome; 5] {
        [&self.rc_stopgrad, &self.kept, &self.focal, &self.queue, &self.pipeline]
    }

    pub fn passed(&self) -> bool {
        self.suites().iter().all(|s| s.passed())
    }
}

fn similarity_loss_check(
    out: &mut SuiteOutcome,
    sim: &Matrix,
    tau: f64,
    analytic: &Matrix,
    tol: f64,
    mut value: impl FnMut(&Matrix) -> f64,
    label: &str,
) {
    let (m, n) = (sim.rows(), sim.cols());
    let numeric = central_differences(sim.as_slice(), 1e-4, |s| {
        value(&Matrix::from_row_major(m, n, s.to_vec()).expect("shape"))
    });
    let err = relative_error(analytic.as_slice(), &numeric);
    out.record(err, tol, || format!("{label}: m={m} n={n} tau={tau}"));
}

/// Finite-difference checks of every loss family and of the full encoder pipeline.
pub fn gradient_suite(configs: usize, seed: u64, loss_tol: f64, pipeline_tol: f64) -> GradientOutcome {
    let mut rng = Rng::derive(seed, "verify-gradients");
    let mut res = GradientOutcome {
        rc_stopgrad: SuiteOutcome::new("gradients/rc_stopgrad"),
        kept: SuiteOutcome::new("gradients/rc_kept"),
        focal: SuiteOutcome::new("gradients/focal"),
        queue: SuiteOutcome::new("gradients/queue"),
        pipeline: SuiteOutcome::new("gradients/pipeline"),
    };
    for _ in 0..configs {
        let n = 1 + rng.below(7);
        let m = 1 + rng.below(n);
        let tau = rng.uniform_range(0.05, 0.5);
        let gamma = rng.uniform_range(0.0, 8.0);
        let sim = Matrix::from_row_major(m, n, (0..m * n).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
            .expect("shape");
        let pi = random_association(&mut rng, m, n);
        let report = reliability_from_similarities(&sim, &pi, tau).expect("valid");

        let frozen: Vec<f64> = report.p.iter().map(|&p| libm::pow(p, gamma)).collect();
        let g = rc_loss(&report, gamma).similarity_gradient(&report, 1.0);
        similarity_loss_check(&mut res.rc_stopgrad, &sim, tau, &g, loss_tol, |s| {
            let r = reliability_from_similarities(s, &pi, tau).expect("valid");
            r.log_p.iter().zip(&frozen).map(|(lp, w)| -w * lp).sum()
        }, "rc_loss");

        let g = rc_loss_kept_gradient(&report, gamma).similarity_gradient(&report, 1.0);
        similarity_loss_check(&mut res.kept, &sim, tau, &g, loss_tol, |s| {
            rc_loss_kept_gradient(&reliability_from_similarities(s, &pi, tau).expect("valid"), gamma).sum()
        }, "rc_loss_kept_gradient");

        let g = focal_loss(&report, gamma).similarity_gradient(&report, 1.0);
        similarity_loss_check(&mut res.focal, &sim, tau, &g, loss_tol, |s| {
            focal_loss(&reliability_from_similarities(s, &pi, tau).expect("valid"), gamma).sum()
        }, "focal_loss");

        queue_check(&mut rng, &mut res.queue, loss_tol);
        pipeline_check(&mut rng, &mut res.pipeline, pipeline_tol);
    }
    res
}

fn queue_check(rng: &mut Rng, out: &mut SuiteOutcome, tol: f64) {
    let d = 2 + rng.below(4);
    let m = 1 + rng.below(4);
    let anchors = unit_columns(rng, d, m);
    let negs: Vec<FeatureMatrix> = (0..m)
        .map(|_| {
            let k = 1 + rng.below(6);
            unit_columns(rng, d, k)
        })
        .collect();
    let q = queue_loss(&anchors, &negs).expect("shapes");
    let mut analytic = q.grad_anchors.clone();
    for g in &q.grad_negatives {
        analytic.extend_from_slice(g);
    }
    let mut flat = anchors.as_slice().to_vec();
    for n in &negs {
        flat.extend_from_slice(n.as_slice());
    }
    let sizes: Vec<usize> = negs.iter().map(|n| n.len()).collect();
    let numeric = central_differences(&flat, 1e-4, |v| {
        let a = FeatureMatrix::unchecked(d, v[..d * m].to_vec());
        let mut at = d * m;
        let ns: Vec<FeatureMatrix> = sizes
            .iter()
            .map(|&k| {
                let f = FeatureMatrix::unchecked(d, v[at..at + d * k].to_vec());
                at += d * k;
                f
            })
            .collect();
        queue_loss(&a, &ns).expect("shapes").value
    });
    let err = relative_error(&analytic, &numeric);
    out.record(err, tol, || format!("queue_loss: d={d} m={m} k={sizes:?}"));
}

/// Two videos, two frames each, three crops per frame, through a tanh encoder.
fn pipeline_check(rng: &mut Rng, out: &mut SuiteOutcome, tol: f64) {
    let arch = Architecture {
        dims: vec![6, 5, 4],
        activation: Activation::Tanh,
    };
    let Ok(encoder) = Encoder::new(arch.clone(), rng) else {
        return out.require(false, || String::from("encoder init"));
    };
    let crops = 12;
    let input: Vec<f64> = (0..6 * crops).map(|_| rng.normal()).collect();
    let (emb, cache) = match encoder.forward(&input) {
        Ok(v) => v,
        Err(e) => return out.require(false, || format!("forward: {e}")),
    };
    // Columns 0..6 are frame A (video 0 then 1), 6..12 frame B.
    let x_side: Vec<(usize, u32)> = (0..6).map(|c| (c, (c / 3) as u32)).collect();
    let y_side: Vec<(usize, u32)> = (6..12).map(|c| (c, ((c - 6) / 3) as u32)).collect();
    let blocks = super_frame_blocks(&emb, &x_side, &y_side).expect("non-empty frames");
    let modulation = match rng.below(4) {
        0 => Modulation::ReliabilityStopgrad,
        1 => Modulation::ReliabilityKept,
        2 => Modulation::Focal,
        _ => Modulation::None,
    };
    let cfg = LossConfig {
        tau: rng.uniform_range(0.1, 0.5),
        gamma: rng.uniform_range(0.0, 8.0),
        lambda: rng.uniform_range(0.0, 5.0),
        modulation,
        ..LossConfig::default()
    };
    let negatives: Vec<AnchorNegatives> = blocks
        .iter()
        .flat_map(|b| b.anchors.clone())
        .map(|anchor| AnchorNegatives {
            anchor,
            negatives: unit_columns(rng, 4, 3),
        })
        .collect();
    let loss = match objective(&emb, &blocks, &negatives, &cfg) {
        Ok(l) => l,
        Err(e) => return out.require(false, || format!("objective: {e}")),
    };
    let analytic = encoder.backward(&cache, &loss.grad).expect("matching cache");
    let mut probe = encoder.clone();
    let numeric = central_differences(encoder.params(), 1e-4, |p| {
        probe.params_mut().copy_from_slice(p);
        let (e, _) = probe.forward(&input).expect("finite");
        objective_value_frozen(&e, &blocks, &negatives, &cfg, &loss.frozen).expect("shapes")
    });
    let err = relative_error(&analytic, &numeric);
    out.record(err, tol, || format!("pipeline: {modulation:?} gamma={} lambda={}", cfg.gamma, cfg.lambda));
}

/// One sample of the loss curves as a function of reliability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub gamma: f64,
    pub p: f64,
    pub loss: f64,
    pub grad_stopgrad: f64,
    pub grad_kept: f64,
}

/// Loss and `dL/dp` under both gradient treatments at `p = 0.001, 0.002, ..., 1.0`.
pub fn loss_curves(gammas: &[f64]) -> Vec<CurvePoint> {
    let mut rows = Vec::with_capacity(gammas.len() * 1000);
    for &gamma in gammas {
        for i in 1..=1000 {
            let p = i as f64 / 1000.0;
            let lp = libm::log(p);
            rows.push(CurvePoint {
                gamma,
                p,
                loss: modulated_loss(Modulation::ReliabilityStopgrad, p, lp, gamma),
                grad_stopgrad: modulated_grad_p(Modulation::ReliabilityStopgrad, p, lp, gamma),
                grad_kept: modulated_grad_p(Modulation::ReliabilityKept, p, lp, gamma),
            });
        }
    }
    rows
}

/// Interior root of the kept-gradient `dL/dp` located by bisection.
pub fn slump_root(gamma: f64) -> f64 {
    let g = |p: f64| modulated_grad_p(Modulation::ReliabilityKept, p, libm::log(p), gamma);
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Suppression, slump and scale-calibration properties of the reliability-guided loss.
pub fn curve_suite(curves: &[CurvePoint], seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("curves");
    for c in curves {
        let expected = libm::pow(c.p, c.gamma - 1.0);
        let err = (c.grad_stopgrad.abs() - expected).abs() / expected;
        out.record(err, 1e-9, || format!("|dL/dp| at gamma={} p={}", c.gamma, c.p));
    }
    let point = |gamma: f64, p: f64| modulated_grad_p(Modulation::ReliabilityStopgrad, p, libm::log(p), gamma).abs();
    out.record((point(6.0, 0.1) - 1e-5).abs() / 1e-5, 1e-9, || String::from("gamma 6, p 0.1"));
    out.record((point(6.0, 0.9) - 0.59049).abs() / 0.59049, 1e-9, || String::from("gamma 6, p 0.9"));
    out.record((point(0.0, 0.1) - 10.0).abs() / 10.0, 1e-9, || String::from("gamma 0, p 0.1"));
    for gamma in [2.0, 4.0, 6.0, 8.0] {
        let analytic = libm::exp(-1.0 / gamma);
        let root = slump_root(gamma);
        out.record((root - analytic).abs(), 1e-6, || format!("slump root gamma={gamma}"));
        let g = |p: f64| modulated_grad_p(Modulation::ReliabilityKept, p, libm::log(p), gamma);
        out.record(g(analytic).abs(), 1e-9, || format!("kept gradient at e^(-1/{gamma})"));
        out.require(g(analytic - 1e-3) > 0.0 && g(analytic + 1e-3) < 0.0, || {
            format!("kept gradient sign change around the root, gamma={gamma}")
        });
    }
    let mut rng = Rng::derive(seed, "verify-alpha");
    for _ in 0..500 {
        let m = 1 + rng.below(16);
        let gamma = rng.uniform_range(0.0, 8.0);
        let ps: Vec<f64> = (0..m).map(|_| rng.uniform_range(1e-3, 1.0)).collect();
        let lps: Vec<f64> = ps.iter().map(|&p| libm::log(p)).collect();
        let per: Vec<f64> = ps.iter().zip(&lps).map(|(&p, &lp)| -libm::pow(p, gamma) * lp).collect();
        let zero: Vec<f64> = lps.iter().map(|lp| -lp).collect();
        let scaled = rc_batch_loss(&per, &zero).loss;
        let plain = zero.iter().sum::<f64>() / m as f64;
        out.record((scaled - plain).abs(), 1e-9, || format!("alpha calibration m={m} gamma={gamma}"));
    }
    out
}

/// Queue selection against a full sort, cross-video purity, and FIFO eviction order.
pub fn queue_suite(trials: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("queue");
    let mut rng = Rng::derive(seed, "verify-queue");
    for t in 0..trials {
        let capacity = 1 + rng.below(2000);
        let d = 2 + rng.below(6);
        let Ok(mut q) = NegativeQueue::new(capacity, d) else {
            out.require(false, || String::from("queue construction"));
            continue;
        };
        let inserted = rng.below(2 * capacity + 1);
        let batch: Vec<(Vec<f64>, u32)> = (0..inserted)
            .map(|_| (unit_columns(&mut rng, d, 1).col(0).to_vec(), rng.below(6) as u32))
            .collect();
        let evicted = q.enqueue(batch).unwrap_or(usize::MAX);
        out.require(evicted == inserted.saturating_sub(capacity), || format!("trial {t}: eviction count"));
        let first_kept = inserted.saturating_sub(capacity) as u64;
        let fifo = q.iter().enumerate().all(|(i, e)| e.insertion_index == first_kept + i as u64);
        out.require(fifo && q.len() <= capacity, || format!("trial {t}: FIFO order"));

        let anchor = unit_columns(&mut rng, d, 1).col(0).to_vec();
        let video = rng.below(6) as u32;
        let k = 1 + rng.below(40);
        for mode in [NegativeSelection::MostSimilar, NegativeSelection::MostDissimilar] {
            let sel = q.select_negatives(&anchor, video, k, mode);
            let mut oracle: Vec<(f64, usize)> = q
                .iter()
                .enumerate()
                .filter(|(_, e)| e.video_id != video)
                .map(|(pos, e)| (dot(&anchor, &e.embedding), pos))
                .collect();
            oracle.sort_by(|a, b| match mode {
                NegativeSelection::MostSimilar => b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)),
                NegativeSelection::MostDissimilar => a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)),
            });
            let shortfall = oracle.len() < k;
            oracle.truncate(k);
            let expected: Vec<usize> = oracle.iter().map(|o| o.1).collect();
            out.require(sel.positions == expected && sel.shortfall == shortfall, || {
                format!("trial {t}: {mode:?} selection differs from full sort")
            });
            out.require(sel.positions.iter().all(|&p| q.get(p).video_id != video), || {
                format!("trial {t}: same-video negative selected")
            });
        }
    }
    out
}

/// mAP and CMC by direct rank enumeration.
pub fn brute_force_metrics(query: &FeatureMatrix, qids: &[u32], gallery: &FeatureMatrix, gids: &[u32]) -> EvalReport {
    let mut hits = [0usize; 3];
    let mut aps = Vec::new();
    let mut excluded = 0;
    for (q, &qid) in query.columns().zip(qids) {
        if !gids.contains(&qid) {
            excluded += 1;
            continue;
        }
        let sims: Vec<f64> = gallery.columns().map(|g| dot(q, g)).collect();
        let rank = |g: usize| {
            1 + (0..sims.len())
                .filter(|&h| sims[h] > sims[g] || (sims[h] == sims[g] && h < g))
                .count()
        };
        let mut relevant: Vec<usize> = (0..sims.len()).filter(|&g| gids[g] == qid).map(rank).collect();
        relevant.sort_unstable();
        for (slot, k) in [1usize, 5, 10].iter().enumerate() {
            if relevant[0] <= *k {
                hits[slot] += 1;
            }
        }
        let mut sum = 0.0;
        for (found, &r) in relevant.iter().enumerate() {
            sum += (found + 1) as f64 / r as f64;
        }
        aps.push(sum / relevant.len() as f64);
    }
    let n = aps.len();
    let frac = |h: usize| if n == 0 { 0.0 } else { h as f64 / n as f64 };
    EvalReport {
        rank_1: frac(hits[0]),
        rank_5: frac(hits[1]),
        rank_10: frac(hits[2]),
        map: if n == 0 { 0.0 } else { aps.iter().sum::<f64>() / n as f64 },
        per_query_ap: aps,
        num_queries: n,
        excluded_queries: excluded,
    }
}

/// `E[AP]` for one relevant item among `g` under a uniformly random ranking.
pub fn expected_single_match_ap(g: usize) -> f64 {
    (1..=g).map(|r| 1.0 / r as f64).sum::<f64>() / g as f64
}

pub fn cmc_monotone(r: &EvalReport) -> bool {
    r.rank_1 <= r.rank_5 && r.rank_5 <= r.rank_10 && (0.0..=1.0).contains(&r.map)
}

/// Metric oracle on random splits with galleries of at most eight items.
pub fn metric_suite(splits: usize, monte_carlo_trials: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("metrics");
    let mut rng = Rng::derive(seed, "verify-metrics");
    for t in 0..splits {
        let g = 1 + rng.below(8);
        let qn = 1 + rng.below(5);
        let ids = 1 + rng.below(4) as u32;
        let gallery = unit_columns(&mut rng, 3, g);
        let query = unit_columns(&mut rng, 3, qn);
        let gids: Vec<u32> = (0..g).map(|_| rng.below(ids as usize) as u32).collect();
        let qids: Vec<u32> = (0..qn).map(|_| rng.below(ids as usize) as u32).collect();
        let fast = evaluate_embeddings(&query, &qids, &gallery, &gids);
        let slow = brute_force_metrics(&query, &qids, &gallery, &gids);
        out.require(fast == slow, || format!("split {t}: {fast:?} vs {slow:?}"));
        out.require(cmc_monotone(&fast), || format!("split {t}: CMC not monotone"));

        let mut perm: Vec<usize> = (0..g).collect();
        rng.shuffle(&mut perm);
        let shuffled = gallery.select(&perm);
        let sids: Vec<u32> = perm.iter().map(|&i| gids[i]).collect();
        let again = evaluate_embeddings(&query, &qids, &shuffled, &sids);
        out.require(
            again.rank_1 == fast.rank_1
                && again.rank_5 == fast.rank_5
                && again.rank_10 == fast.rank_10
                && (again.map - fast.map).abs() <= 1e-15,
            || format!("split {t}: gallery permutation changed the metrics"),
        );
    }
    for g in 2..=8 {
        let mut total = 0.0;
        for _ in 0..monte_carlo_trials {
            let gallery = unit_columns(&mut rng, 8, g);
            let query = unit_columns(&mut rng, 8, 1);
            let mut gids = vec![1u32; g];
            gids[rng.below(g)] = 0;
            total += evaluate_embeddings(&query, &[0], &gallery, &gids).map;
        }
        let mc = total / monte_carlo_trials as f64;
        out.record((mc - expected_single_match_ap(g)).abs(), 1e-2, || format!("expected AP, gallery {g}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_scale() {
        assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_error(&[1.0, 2.0], &[1.0, 2.002]) - 0.002 / 2.002).abs() < 1e-15);
        assert_eq!(relative_error(&[0.0], &[0.0]), 0.0);
    }

    #[test]
    fn expected_ap_small_galleries() {
        assert_eq!(expected_single_match_ap(1), 1.0);
        assert!((expected_single_match_ap(2) - 0.75).abs() < 1e-15);
        assert!((expected_single_match_ap(3) - 11.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn slump_roots() {
        assert!((slump_root(6.0) - 0.846_481_724_890_614).abs() < 1e-9);
    }
}
