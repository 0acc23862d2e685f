//! Command-line definitions and command implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use isr_core::data::{generate_world, Dataset, WorldConfig};
use isr_core::encoder::{Activation, Encoder};
use isr_core::eval::{build_retrieval_split, chance_rank_1, embed_crops, evaluate, heldout_frame_pairs, mining_precision};
use isr_core::rng::Rng;
use isr_core::trainer::{train_with_clock, Objective, TrainConfig, TrainStatus};
use isr_core::{Modulation, NegativeSelection};
use serde::Serialize;
use serde_json::json;

use crate::ablate::{
    acceptance_training, acceptance_world, component_arms, data_size_study, delta_arms, focal_arms, gamma_arms,
    lambda_arms, measure_training_scaling, run_arms, spearman, summarize, write_csv, Arm, RunResult,
};
use crate::error::{Error, Result};
use crate::formats::{
    create_dir, read_checkpoint, read_dataset, write_checkpoint, write_dataset, write_embeddings, write_json,
    write_step_logs, Checkpoint, DATASET_FILE, OBSERVATIONS_FILE,
};
use crate::manifest::{file_sha256, RunManifest, RunState};
use crate::verify::{self, Suite, VerifyOptions};
use crate::WallClock;

#[derive(Debug, Parser)]
#[command(name = "isr", version, about = "Identity-seeking self-supervised representation learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic video world.
    GenData(GenDataArgs),
    /// Train an encoder on a generated world.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the held-out videos.
    Eval(EvalArgs),
    /// Run the oracle and property suites.
    Verify(VerifyArgs),
    /// Train and compare ablation arms over several seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WorldPreset {
    /// 200 identities, 100 training and 20 held-out videos.
    Default,
    /// 1000 identities and 40 held-out videos, as used by the ordering experiments.
    Acceptance,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = WorldPreset::Default)]
    pub preset: WorldPreset,
    #[arg(long)]
    pub num_identities: Option<usize>,
    #[arg(long)]
    pub identity_dim: Option<usize>,
    #[arg(long)]
    pub obs_dim: Option<usize>,
    #[arg(long)]
    pub num_videos: Option<usize>,
    #[arg(long)]
    pub identities_per_video: Option<usize>,
    #[arg(long)]
    pub frames_per_video: Option<usize>,
    /// Seconds between stored frames.
    #[arg(long)]
    pub frame_interval: Option<f64>,
    #[arg(long)]
    pub presence_prob: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub camera_shift: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub heldout_videos: Option<usize>,
    #[arg(long)]
    pub heldout_identities: Option<usize>,
    #[arg(long)]
    pub pose_dim: Option<usize>,
    #[arg(long)]
    pub pose_ratio: Option<f64>,
    /// Correlation time of the pose process, seconds.
    #[arg(long)]
    pub pose_correlation: Option<f64>,
    /// Mean visit length of an identity, seconds.
    #[arg(long)]
    pub dwell: Option<f64>,
}

macro_rules! override_fields {
    ($target:expr, $args:expr, $($field:ident => $arg:ident),* $(,)?) => {
        $(if let Some(v) = $args.$arg { $target.$field = v; })*
    };
}

impl GenDataArgs {
    pub fn world(&self) -> WorldConfig {
        let mut w = match self.preset {
            WorldPreset::Default => WorldConfig {
                seed: self.seed,
                ..WorldConfig::default()
            },
            WorldPreset::Acceptance => acceptance_world(self.seed),
        };
        override_fields!(w, self,
            num_identities => num_identities,
            identity_dim => identity_dim,
            obs_dim => obs_dim,
            num_videos => num_videos,
            identities_per_video => identities_per_video,
            frames_per_video => frames_per_video,
            frame_interval_seconds => frame_interval,
            presence_prob => presence_prob,
            appearance_noise_sigma => noise_sigma,
            camera_shift_sigma => camera_shift,
            dropout_rate => dropout_rate,
            heldout_videos => heldout_videos,
            heldout_identities => heldout_identities,
            pose_dim => pose_dim,
            pose_ratio => pose_ratio,
            pose_correlation_seconds => pose_correlation,
            dwell_seconds => dwell,
        );
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Isr,
    InstanceDiscrimination,
    IsrNoRc,
    IsrNoQueue,
    IsrFocal,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Isr => Objective::Isr,
            ObjectiveArg::InstanceDiscrimination => Objective::InstanceDiscrimination,
            ObjectiveArg::IsrNoRc => Objective::IsrNoRc,
            ObjectiveArg::IsrNoQueue => Objective::IsrNoQueue,
            ObjectiveArg::IsrFocal => Objective::IsrFocal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NegModeArg {
    MostSimilar,
    MostDissimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModulationArg {
    ReliabilityStopgrad,
    ReliabilityKept,
    Focal,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainPreset {
    /// 50 epochs, lr 1e-4, queue capacity 8192.
    Full,
    /// 20 epochs, lr 5e-4, queue capacity 1024.
    Acceptance,
}

/// Training flags; unset flags take the preset's value.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum, default_value_t = TrainPreset::Full)]
    pub preset: TrainPreset,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Reliability exponent [default: 6]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Queue loss weight [default: 5]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Softmax temperature [default: 0.1]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Queue negatives per anchor [default: 32]
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest time gap between paired frames, seconds [default: 4.0]
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub neg_mode: Option<NegModeArg>,
    #[arg(long, value_enum)]
    pub modulation: Option<ModulationArg>,
    #[arg(long)]
    pub queue_cap: Option<usize>,
    #[arg(long)]
    pub videos_per_super_frame: Option<usize>,
    /// Crops per super-frame side [default: 80]
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub frames_per_video: Option<usize>,
    #[arg(long)]
    pub samples_per_video: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Focusing exponent of the focal baseline [default: 2]
    #[arg(long)]
    pub focal_gamma: Option<f64>,
    /// Noise level of instance-discrimination views [default: the world's appearance noise]
    #[arg(long)]
    pub augment_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainFlags {
    pub fn config(&self) -> TrainConfig {
        let mut c = match self.preset {
            TrainPreset::Full => TrainConfig::default(),
            TrainPreset::Acceptance => acceptance_training(),
        };
        c.seed = self.seed;
        override_fields!(c.loss, self,
            gamma => gamma,
            lambda => lambda,
            tau => tau,
            k => k,
        );
        override_fields!(c, self,
            delta_max_seconds => delta_max,
            epochs => epochs,
            lr => lr,
            queue_capacity => queue_cap,
            videos_per_super_frame => videos_per_super_frame,
            super_frame_budget => budget,
            frames_per_video => frames_per_video,
            samples_per_video_per_epoch => samples_per_video,
            hidden_dim => hidden,
            embed_dim => embed_dim,
            weight_decay => weight_decay,
            focal_gamma => focal_gamma,
        );
        if let Some(o) = self.objective {
            c.objective = o.into();
        }
        if let Some(m) = self.neg_mode {
            c.loss.negative_selection = match m {
                NegModeArg::MostSimilar => NegativeSelection::MostSimilar,
                NegModeArg::MostDissimilar => NegativeSelection::MostDissimilar,
            };
        }
        if let Some(m) = self.modulation {
            c.loss.modulation = match m {
                ModulationArg::ReliabilityStopgrad => Modulation::ReliabilityStopgrad,
                ModulationArg::ReliabilityKept => Modulation::ReliabilityKept,
                ModulationArg::Focal => Modulation::Focal,
                ModulationArg::None => Modulation::None,
            };
        }
        if let Some(a) = self.activation {
            c.activation = match a {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Tanh => Activation::Tanh,
            };
        }
        if self.augment_sigma.is_some() {
            c.augment_sigma = self.augment_sigma;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory or checkpoint metadata file.
    #[arg(long, required_unless_present = "untrained")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate a freshly initialized encoder instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    pub untrained: bool,
    /// Initialization seed for `--untrained`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the query/gallery crop choice.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Frame pairs per held-out video for mining precision.
    #[arg(long, default_value_t = 10)]
    pub mining_pairs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the query and gallery embeddings as CSV.
    #[arg(long)]
    pub export_embeddings: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 500)]
    pub configs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the curve CSV and suite summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Components,
    Focal,
    Delta,
    Gamma,
    Lambda,
    DataSize,
    Scaling,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub study: Study,
    /// Number of training seeds (0, 1, ...).
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Sweep values: seconds for delta, exponents for gamma, weights for lambda, video
    /// counts for data-size and scaling.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Epochs per timed run in the scaling study.
    #[arg(long, default_value_t = 2)]
    pub scaling_epochs: usize,
    #[command(flatten)]
    pub flags: TrainFlags,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Verify(a) => verify_cmd(&a),
        Command::Ablate(a) => ablate(&a),
    }
}

fn layout(out: &Path) -> Result<()> {
    for sub in ["checkpoints", "logs", "reports"] {
        create_dir(&out.join(sub))?;
    }
    Ok(())
}

fn dataset_files(data: &Path) -> (PathBuf, PathBuf) {
    let manifest = if data.is_dir() { data.join(DATASET_FILE) } else { data.to_path_buf() };
    let obs = manifest.with_file_name(OBSERVATIONS_FILE);
    (manifest, obs)
}

/// Identifies the dataset by content, for inclusion in a run's configuration.
fn dataset_identity(data: &Path) -> Result<serde_json::Value> {
    let (manifest, obs) = dataset_files(data);
    Ok(json!({
        "dataset_sha256": file_sha256(&manifest)?,
        "observations_sha256": file_sha256(&obs)?,
    }))
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let world = args.world();
    world.validate()?;
    create_dir(&args.out)?;
    let mut manifest = RunManifest::begin(&args.out, "gen-data", world.seed, &world)?;
    let dataset = generate_world(&world)?;
    let files = write_dataset(&args.out, &dataset)?;
    manifest.add_artifacts(&args.out, &files)?;
    manifest.finish(&args.out, RunState::Completed)?;
    println!(
        "wrote {} videos, {} crops to {}",
        dataset.videos.len(),
        dataset.num_crops(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    objective: &'static str,
    steps: usize,
    status: TrainStatus,
    final_loss_total: Option<f64>,
    final_pair_precision: Option<f64>,
    queue_len: usize,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let cfg = args.flags.config();
    cfg.validate()?;
    let dataset = read_dataset(&args.data)?;
    layout(&args.out)?;
    let config = json!({ "train": cfg, "data": dataset_identity(&args.data)? });
    let mut manifest = RunManifest::begin(&args.out, "train", cfg.seed, &config)?;
    let outcome = train_with_clock(&dataset, &cfg, &mut WallClock::start())?;

    let ckpt = Checkpoint {
        encoder: outcome.encoder.clone(),
        optimizer: outcome.optimizer.clone(),
        objective: outcome.objective,
        config_hash: manifest.config_hash.clone(),
        status: outcome.status.clone(),
    };
    let mut files = write_checkpoint(&args.out.join("checkpoints"), "final", &ckpt)?;
    let (steps, timing) = (args.out.join("logs/steps.csv"), args.out.join("logs/timing.csv"));
    write_step_logs(&steps, &timing, &outcome.log)?;
    let last = outcome.log.last();
    let summary = TrainSummary {
        objective: outcome.objective.tag(),
        steps: outcome.log.len(),
        status: outcome.status.clone(),
        final_loss_total: last.map(|s| s.loss_total),
        final_pair_precision: last.map(|s| s.pair_precision),
        queue_len: outcome.queue_len,
    };
    let summary_path = args.out.join("reports/train_summary.json");
    write_json(&summary_path, &summary)?;
    files.extend([steps, timing, summary_path]);
    manifest.add_artifacts(&args.out, &files)?;
    match outcome.status {
        TrainStatus::Completed => {
            manifest.finish(&args.out, RunState::Completed)?;
            println!(
                "{}: {} steps, final loss {:.4}, pair precision {:.3}",
                outcome.objective.tag(),
                outcome.log.len(),
                summary.final_loss_total.unwrap_or(f64::NAN),
                summary.final_pair_precision.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        TrainStatus::Aborted { step, reason } => {
            manifest.finish(&args.out, RunState::Failed { reason: reason.clone() })?;
            Err(Error::Aborted { step, reason })
        }
    }
}

#[derive(Serialize)]
struct EvalSummary {
    rank_1: f64,
    rank_5: f64,
    rank_10: f64,
    map: f64,
    chance_rank_1: f64,
    mining_precision: Option<f64>,
    num_queries: usize,
    excluded_queries: usize,
    gallery_size: usize,
}

fn untrained_encoder(dataset: &Dataset, seed: u64) -> Result<Encoder> {
    let cfg = TrainConfig::default();
    Ok(Encoder::new(cfg.architecture(dataset.config.obs_dim), &mut Rng::derive(seed, "init"))?)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let dataset = read_dataset(&args.data)?;
    let (encoder, source) = match &args.checkpoint {
        Some(path) => (read_checkpoint(path)?.encoder, json!({ "checkpoint": path })),
        None => (untrained_encoder(&dataset, args.seed)?, json!({ "untrained_seed": args.seed })),
    };
    if encoder.input_dim() != dataset.config.obs_dim {
        return Err(Error::Argument {
            flag: "checkpoint",
            reason: format!(
                "encoder expects {} inputs, dataset has obs_dim {}",
                encoder.input_dim(),
                dataset.config.obs_dim
            ),
        });
    }
    layout(&args.out)?;
    let config = json!({
        "encoder": source,
        "encoder_params_sha256": crate::manifest::hex(&sha2_of_params(&encoder)),
        "data": dataset_identity(&args.data)?,
        "split_seed": args.split_seed,
        "mining_pairs": args.mining_pairs,
    });
    let mut manifest = RunManifest::begin(&args.out, "eval", args.split_seed, &config)?;
    let split = build_retrieval_split(&dataset, args.split_seed);
    if split.query.is_empty() || split.gallery.is_empty() {
        return Err(Error::Argument {
            flag: "data",
            reason: "held-out videos yield an empty query or gallery set".into(),
        });
    }
    let report = evaluate(&encoder, &split)?;
    let qids: Vec<u32> = split.query.iter().map(|c| c.true_identity).collect();
    let gids: Vec<u32> = split.gallery.iter().map(|c| c.true_identity).collect();
    let pairs = heldout_frame_pairs(&dataset, args.mining_pairs, TrainConfig::default().delta_max_seconds, args.split_seed);
    let summary = EvalSummary {
        rank_1: report.rank_1,
        rank_5: report.rank_5,
        rank_10: report.rank_10,
        map: report.map,
        chance_rank_1: chance_rank_1(&qids, &gids),
        mining_precision: mining_precision(&encoder, &pairs)?,
        num_queries: report.num_queries,
        excluded_queries: report.excluded_queries,
        gallery_size: split.gallery.len(),
    };
    let json_path = args.out.join("reports/eval.json");
    write_json(&json_path, &json!({ "summary": summary, "report": report }))?;
    let csv_path = args.out.join("reports/eval.csv");
    write_csv(&csv_path, &[&summary])?;
    let mut files = vec![json_path, csv_path];
    if args.export_embeddings {
        let crops: Vec<_> = split.query.iter().chain(&split.gallery).cloned().collect();
        let emb = embed_crops(&encoder, &crops)?;
        let path = args.out.join("reports/embeddings.csv");
        write_embeddings(&path, encoder.output_dim(), &crops, &emb)?;
        files.push(path);
    }
    manifest.add_artifacts(&args.out, &files)?;
    manifest.finish(&args.out, RunState::Completed)?;
    println!(
        "rank-1 {:.4}  rank-5 {:.4}  rank-10 {:.4}  mAP {:.4}  (chance rank-1 {:.4}, {} queries)",
        summary.rank_1, summary.rank_5, summary.rank_10, summary.map, summary.chance_rank_1, summary.num_queries
    );
    Ok(())
}

fn sha2_of_params(encoder: &Encoder) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in encoder.params() {
        h.update(p.to_le_bytes());
    }
    h.finalize().to_vec()
}

pub fn verify_cmd(args: &VerifyArgs) -> Result<()> {
    let curves_csv = match &args.out {
        Some(out) => {
            create_dir(&out.join("reports"))?;
            Some(out.join("reports/curves.csv"))
        }
        None => None,
    };
    let opts = VerifyOptions {
        suite: args.suite,
        instances: args.instances,
        configs: args.configs,
        seed: args.seed,
        curves_csv: curves_csv.filter(|_| matches!(args.suite, Suite::All | Suite::Curves)),
    };
    let mut manifest = match &args.out {
        Some(out) => Some(RunManifest::begin(
            out,
            "verify",
            args.seed,
            &json!({
                "suite": format!("{:?}", args.suite).to_lowercase(),
                "instances": args.instances,
                "configs": args.configs,
            }),
        )?),
        None => None,
    };
    let reports = verify::run(&opts)?;
    for r in &reports {
        println!(
            "{:<24} {}  checks {:>6}  worst {:.3e}  {:.2}s",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.checks,
            r.worst,
            r.seconds
        );
        for f in &r.failures {
            println!("    {f}");
        }
    }
    if let (Some(out), Some(m)) = (&args.out, manifest.as_mut()) {
        let rows: Vec<_> = reports
            .iter()
            .map(|r| json!({ "suite": r.name, "passed": r.passed, "checks": r.checks, "worst": r.worst, "seconds": r.seconds }))
            .collect();
        let path = out.join("reports/verify.json");
        write_json(&path, &rows)?;
        let mut files = vec![path];
        files.extend(opts.curves_csv.clone());
        m.add_artifacts(out, &files)?;
        m.finish(out, RunState::Completed)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(failed.join(", ")))
    }
}

fn values_or(args: &AblateArgs, default: &[f64]) -> Vec<f64> {
    if args.values.is_empty() {
        default.to_vec()
    } else {
        args.values.clone()
    }
}

fn sizes(values: &[f64]) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Argument {
                    flag: "values",
                    reason: format!("video count must be a positive integer, got {v}"),
                })
            }
        })
        .collect()
}

#[derive(Serialize)]
struct TrendRow {
    seed: u64,
    spearman: f64,
}

#[derive(Serialize)]
struct ScalingRow {
    videos: usize,
    seconds_per_epoch: f64,
    slope: f64,
}

pub fn ablate(args: &AblateArgs) -> Result<()> {
    let base = args.flags.config();
    base.validate()?;
    let dataset = read_dataset(&args.data)?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    if seeds.is_empty() {
        return Err(Error::Argument {
            flag: "seeds",
            reason: "need at least one seed".into(),
        });
    }
    layout(&args.out)?;
    let study = format!("{:?}", args.study).to_lowercase();
    let config = json!({
        "study": study,
        "train": base,
        "seeds": seeds,
        "values": args.values,
        "split_seed": args.split_seed,
        "data": dataset_identity(&args.data)?,
    });
    let mut manifest = RunManifest::begin(&args.out, "ablate", base.seed, &config)?;
    let split = build_retrieval_split(&dataset, args.split_seed);
    let reports = args.out.join("reports");
    let mut files = Vec::new();

    let arms: Option<Vec<Arm>> = match args.study {
        Study::Components => Some(component_arms(&base)),
        Study::Focal => Some(focal_arms(&base)),
        Study::Delta => Some(delta_arms(&base, &values_or(args, &[0.5, 1.0, 2.0, 4.0, 8.0]))),
        Study::Gamma => Some(gamma_arms(&base, &values_or(args, &[0.0, 2.0, 4.0, 6.0, 8.0]))),
        Study::Lambda => Some(lambda_arms(&base, &values_or(args, &[0.0, 1.0, 3.0, 5.0, 7.0, 9.0]))),
        Study::DataSize | Study::Scaling => None,
    };
    let results: Vec<RunResult> = match (args.study, arms) {
        (_, Some(arms)) => run_arms(&dataset, &split, &arms, &seeds)?,
        (Study::DataSize, None) => {
            let sizes = sizes(&values_or(args, &[12.0, 25.0, 50.0, 100.0]))?;
            let arm = Arm {
                name: "cp+rc+q".into(),
                config: base.clone(),
            };
            let results = data_size_study(&dataset, &split, &arm, &sizes, &seeds)?;
            let trend: Vec<TrendRow> = seeds
                .iter()
                .map(|&s| {
                    let runs: Vec<&RunResult> = results.iter().filter(|r| r.seed == s).collect();
                    let x: Vec<f64> = runs.iter().map(|r| r.train_videos as f64).collect();
                    let y: Vec<f64> = runs.iter().map(|r| r.rank_1).collect();
                    TrendRow {
                        seed: s,
                        spearman: spearman(&x, &y),
                    }
                })
                .collect();
            for t in &trend {
                println!("seed {}: spearman {:.3}", t.seed, t.spearman);
            }
            let path = reports.join("data_size_trend.csv");
            write_csv(&path, &trend)?;
            files.push(path);
            results
        }
        _ => {
            let sizes = sizes(&values_or(args, &[12.0, 25.0, 50.0, 100.0]))?;
            let report = measure_training_scaling(&dataset, &base, &sizes, args.scaling_epochs, 2)?;
            let rows: Vec<ScalingRow> = report
                .points
                .iter()
                .map(|p| ScalingRow {
                    videos: p.videos,
                    seconds_per_epoch: p.seconds_per_epoch,
                    slope: report.slope,
                })
                .collect();
            for r in &rows {
                println!("{:>5} videos  {:.3}s per epoch", r.videos, r.seconds_per_epoch);
            }
            println!("log-log slope {:.3}", report.slope);
            let path = reports.join("scaling.csv");
            write_csv(&path, &rows)?;
            files.push(path);
            Vec::new()
        }
    };
    if !results.is_empty() {
        let runs_path = reports.join(format!("{study}_runs.csv"));
        write_csv(&runs_path, &results)?;
        let summary = summarize(&results);
        let summary_path = reports.join(format!("{study}_summary.csv"));
        write_csv(&summary_path, &summary)?;
        for s in &summary {
            println!(
                "{:<16} rank-1 {:6.2} ± {:5.2}   mAP {:6.2} ± {:5.2}   ({} runs)",
                s.arm,
                100.0 * s.rank_1_mean,
                100.0 * s.rank_1_std,
                100.0 * s.map_mean,
                100.0 * s.map_std,
                s.runs
            );
        }
        files.extend([runs_path, summary_path]);
    }
    manifest.add_artifacts(&args.out, &files)?;
    manifest.finish(&args.out, RunState::Completed)?;
    Ok(())
}
