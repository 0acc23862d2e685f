//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use isr::ablate::{
    acceptance_training, acceptance_world, component_arms, delta_arms, focal_arms, measure_training_scaling,
    run_arms, spearman, Arm, RunResult,
};
use isr::manifest::file_sha256;
use isr_core::data::generate_world;
use isr_core::eval::build_retrieval_split;
use isr_core::verify::{curve_suite, gradient_suite, loss_curves, matching_suite, metric_suite, SuiteOutcome};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    passed: bool,
    detail: String,
}

fn report(n: usize, title: &str, v: Verdict, failures: &mut usize) {
    if !v.passed {
        *failures += 1;
    }
    println!("{} {n:>2} {title}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
}

fn suite_detail(o: &SuiteOutcome) -> String {
    let mut s = format!("{} checks, worst {:.2e}", o.checks, o.worst);
    if let Some(f) = o.failures.first() {
        s.push_str(&format!(", first failure: {f}"));
    }
    s
}

fn means(results: &[RunResult]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        let e = acc.entry(r.arm.clone()).or_default();
        e.0 += r.rank_1;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn rank_1(results: &[RunResult], arm: &str, seed: u64) -> f64 {
    results
        .iter()
        .find(|r| r.arm == arm && r.seed == seed)
        .map(|r| r.rank_1)
        .unwrap_or(f64::NAN)
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn isr(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_isr"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("isr {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism(root: &Path) -> Result<usize, String> {
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    for run in ["a", "b"] {
        let dir = root.join(run);
        isr(&["gen-data", "--out", &s(&dir.join("data")), "--seed", "11", "--num-videos", "20"])?;
        isr(&[
            "train",
            "--data",
            &s(&dir.join("data")),
            "--out",
            &s(&dir.join("run")),
            "--seed",
            "11",
            "--epochs",
            "3",
        ])?;
    }
    let artifacts = [
        "data/dataset.json",
        "data/observations.f32le",
        "run/checkpoints/final.json",
        "run/checkpoints/final.f64le",
        "run/logs/steps.csv",
        "run/reports/train_summary.json",
    ];
    for a in artifacts {
        let ha = file_sha256(&root.join("a").join(a)).map_err(|e| e.to_string())?;
        let hb = file_sha256(&root.join("b").join(a)).map_err(|e| e.to_string())?;
        if ha != hb {
            return Err(format!("{a} differs"));
        }
    }
    Ok(artifacts.len())
}

fn main() {
    let mut failures = 0;

    let start = Instant::now();
    let m = matching_suite(1000, 7, 0);
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "assignment oracle",
        Verdict {
            passed: m.passed() && m.worst <= 1e-9 && secs < 5.0,
            detail: format!("{}, {secs:.2}s", suite_detail(&m)),
        },
        &mut failures,
    );

    let start = Instant::now();
    let g = gradient_suite(500, 0, 1e-5, 1e-4);
    let secs = start.elapsed().as_secs_f64();
    let detail = g
        .suites()
        .iter()
        .map(|s| format!("{} {:.1e}", s.name, s.worst))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        2,
        "gradient suite",
        Verdict {
            passed: g.passed() && secs < 30.0,
            detail: format!("{detail}, {secs:.2}s"),
        },
        &mut failures,
    );

    let c = curve_suite(&loss_curves(&[0.0, 2.0, 4.0, 6.0, 8.0]), 0);
    report(
        3,
        "reliability curves",
        Verdict {
            passed: c.passed(),
            detail: suite_detail(&c),
        },
        &mut failures,
    );

    let world = acceptance_world(0);
    let dataset = generate_world(&world).expect("acceptance world generates");
    let split = build_retrieval_split(&dataset, 0);
    let base = acceptance_training();

    let arms: Vec<Arm> = component_arms(&base)
        .into_iter()
        .filter(|a| a.name != "cp+q")
        .chain(focal_arms(&base).into_iter().filter(|a| a.name == "cp+focal"))
        .collect();
    let mut results = run_arms(&dataset, &split, &arms, &SEEDS).expect("component arms train");
    let mu = means(&results);
    let (id, cp, rc, rcq) = (mu["instance_disc"], mu["cp_only"], mu["cp+rc"], mu["cp+rc+q"]);
    report(
        4,
        "component ordering",
        Verdict {
            passed: id < cp && cp < rc && rc <= rcq && rc - cp >= 0.10,
            detail: format!(
                "mean rank-1 instance_disc {} < cp_only {} < cp+rc {} <= cp+rc+q {}, gap {} points",
                pct(id),
                pct(cp),
                pct(rc),
                pct(rcq),
                pct(rc - cp)
            ),
        },
        &mut failures,
    );

    let wins = SEEDS
        .iter()
        .filter(|&&s| rank_1(&results, "cp+rc", s) > rank_1(&results, "cp+focal", s))
        .count();
    report(
        5,
        "reliability beats focal",
        Verdict {
            passed: wins >= 2,
            detail: format!("cp+rc wins {wins}/3 seeds (mean {} vs {})", pct(rc), pct(mu["cp+focal"])),
        },
        &mut failures,
    );

    let deltas = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut sweep: Vec<f64> = Vec::new();
    let new_deltas: Vec<f64> = deltas.iter().copied().filter(|&d| d != base.delta_max_seconds).collect();
    let delta_results = run_arms(&dataset, &split, &delta_arms(&base, &new_deltas), &SEEDS).expect("delta arms train");
    let dmu = means(&delta_results);
    for d in deltas {
        sweep.push(if d == base.delta_max_seconds { rcq } else { dmu[&format!("delta={d}")] });
    }
    let best = (0..sweep.len()).max_by(|&a, &b| sweep[a].total_cmp(&sweep[b])).unwrap();
    let interior = best > 0 && best + 1 < sweep.len();
    report(
        6,
        "time-gap trade-off",
        Verdict {
            passed: interior && sweep[best] > sweep[0] && sweep[best] > sweep[sweep.len() - 1],
            detail: format!(
                "mean rank-1 over delta {:?}: [{}], max at {}s",
                deltas,
                sweep.iter().map(|&v| pct(v)).collect::<Vec<_>>().join(", "),
                deltas[best]
            ),
        },
        &mut failures,
    );
    results.extend(delta_results);

    let full = dataset.train_videos().count();
    let sizes = [12usize, 25, 50, 100];
    let rcq_arm = Arm {
        name: "cp+rc+q".into(),
        config: base.clone(),
    };
    let mut per_seed: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for &n in &sizes {
        if n == full {
            for &s in &SEEDS {
                per_seed.entry(s).or_default().push((n as f64, rank_1(&results, "cp+rc+q", s)));
            }
            continue;
        }
        let subset = dataset.with_train_videos(n);
        let sized = run_arms(&subset, &split, std::slice::from_ref(&rcq_arm), &SEEDS).expect("subset arms train");
        for r in &sized {
            per_seed.entry(r.seed).or_default().push((n as f64, r.rank_1));
        }
        results.extend(sized);
    }
    let rhos: Vec<f64> = per_seed
        .values()
        .map(|pts| {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            spearman(&x, &y)
        })
        .collect();
    let curve: Vec<String> = sizes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let m = per_seed.values().map(|p| p[i].1).sum::<f64>() / SEEDS.len() as f64;
            format!("{n}:{}", pct(m))
        })
        .collect();
    report(
        7,
        "data-size trend",
        Verdict {
            passed: rhos.iter().all(|&r| r > 0.8),
            detail: format!(
                "spearman per seed [{}], mean rank-1 {}",
                rhos.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", "),
                curve.join(" ")
            ),
        },
        &mut failures,
    );

    let scaling = measure_training_scaling(&dataset, &base, &sizes, 2, 2).expect("scaling runs");
    report(
        8,
        "training-time scaling",
        Verdict {
            passed: (scaling.slope - 1.0).abs() <= 0.25,
            detail: format!(
                "log-log slope {:.3} over [{}] s/epoch",
                scaling.slope,
                scaling
                    .points
                    .iter()
                    .map(|p| format!("{}:{:.3}", p.videos, p.seconds_per_epoch))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        },
        &mut failures,
    );

    let metrics = metric_suite(2000, 20_000, 0);
    let cmc_ok = results
        .iter()
        .all(|r| r.rank_1 <= r.rank_5 && r.rank_5 <= r.rank_10);
    report(
        9,
        "metric oracle",
        Verdict {
            passed: metrics.passed() && cmc_ok,
            detail: format!(
                "{}, CMC monotone on {} training reports: {cmc_ok}",
                suite_detail(&metrics),
                results.len()
            ),
        },
        &mut failures,
    );

    let tmp = tempfile::tempdir().expect("temporary directory");
    let det = determinism(tmp.path());
    report(
        10,
        "determinism",
        Verdict {
            passed: det.is_ok(),
            detail: match det {
                Ok(n) => format!("{n} artifacts byte-identical across two runs"),
                Err(e) => e,
            },
        },
        &mut failures,
    );

    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
