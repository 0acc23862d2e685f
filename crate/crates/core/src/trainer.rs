//! The training loop: super-frame sampling, within-video pair mining, the
//! reliability-guided objective with queue negatives, and AdamW updates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{sample_super_frames, CropRecord, Dataset, SuperFramePair, Video};
use crate::encoder::{Activation, Architecture, Encoder};
use crate::error::{invalid, Error, Result};
use crate::losses::{objective, AnchorNegatives, LossOutput, PositiveBlock};
use crate::matching::mine_positive_pairs;
use crate::optim::{AdamWConfig, OptimizerState};
use crate::queue::NegativeQueue;
use crate::rng::Rng;
use crate::types::{AssociationMatrix, FeatureMatrix, LossConfig, Modulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Isr,
    InstanceDiscrimination,
    /// `gamma = 0`.
    IsrNoRc,
    /// `lambda = 0`.
    IsrNoQueue,
    /// Focal modulation in place of the reliability factor.
    IsrFocal,
}

impl Objective {
    pub fn tag(self) -> &'static str {
        match self {
            Objective::Isr => "isr",
            Objective::InstanceDiscrimination => "instance_discrimination",
            Objective::IsrNoRc => "isr_no_rc",
            Objective::IsrNoQueue => "isr_no_queue",
            Objective::IsrFocal => "isr_focal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub delta_max_seconds: f64,
    pub videos_per_super_frame: usize,
    pub super_frame_budget: usize,
    pub frames_per_video: usize,
    pub epochs: usize,
    pub samples_per_video_per_epoch: usize,
    pub queue_capacity: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub activation: Activation,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Focusing exponent of the focal baseline.
    pub focal_gamma: f64,
    /// White-noise level of the instance-discrimination views; `None` uses the world's.
    pub augment_sigma: Option<f64>,
    pub seed: u64,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            delta_max_seconds: 4.0,
            videos_per_super_frame: 4,
            super_frame_budget: 80,
            frames_per_video: 3,
            epochs: 50,
            samples_per_video_per_epoch: 16,
            queue_capacity: 8192,
            hidden_dim: 64,
            embed_dim: 32,
            activation: Activation::Relu,
            lr: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            focal_gamma: 2.0,
            augment_sigma: None,
            seed: 0,
            objective: Objective::Isr,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.delta_max_seconds > 0.0) {
            return Err(invalid("delta_max_seconds", "must be positive"));
        }
        let positive = [
            ("videos_per_super_frame", self.videos_per_super_frame),
            ("super_frame_budget", self.super_frame_budget),
            ("epochs", self.epochs),
            ("samples_per_video_per_epoch", self.samples_per_video_per_epoch),
            ("queue_capacity", self.queue_capacity),
            ("hidden_dim", self.hidden_dim),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.frames_per_video < 2 {
            return Err(invalid("frames_per_video", "must be at least 2"));
        }
        if self.embed_dim < 2 {
            return Err(invalid("embed_dim", "must be at least 2"));
        }
        if !(self.focal_gamma >= 0.0) {
            return Err(invalid("focal_gamma", "must be nonnegative"));
        }
        if let Some(s) = self.augment_sigma {
            if !(s >= 0.0) {
                return Err(invalid("augment_sigma", "must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Loss settings after applying the objective's overrides.
    pub fn effective_loss(&self) -> LossConfig {
        let mut l = self.loss;
        match self.objective {
            Objective::Isr | Objective::InstanceDiscrimination => {}
            Objective::IsrNoRc => l.gamma = 0.0,
            Objective::IsrNoQueue => l.lambda = 0.0,
            Objective::IsrFocal => {
                l.modulation = Modulation::Focal;
                l.gamma = self.focal_gamma;
            }
        }
        l
    }

    pub fn architecture(&self, obs_dim: usize) -> Architecture {
        Architecture {
            dims: vec![obs_dim, self.hidden_dim, self.embed_dim],
            activation: self.activation,
        }
    }

    pub fn steps_per_epoch(&self, train_videos: usize) -> u64 {
        (self.samples_per_video_per_epoch * train_videos.div_ceil(self.videos_per_super_frame)) as u64
    }

    pub fn optimizer(&self, total_steps: u64) -> AdamWConfig {
        AdamWConfig {
            base_lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
            total_steps: total_steps.max(1),
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub epoch: u64,
    pub loss_rc: f64,
    pub loss_queue: f64,
    pub loss_total: f64,
    pub alpha: f64,
    pub mean_reliability: f64,
    pub min_reliability: f64,
    pub pairs: usize,
    /// Fraction of mined pairs whose hidden identities agree.
    pub pair_precision: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrainStatus {
    Completed,
    Aborted { step: u64, reason: String },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub objective: Objective,
    /// Final parameters, or the last parameters before a failing step.
    pub encoder: Encoder,
    pub optimizer: OptimizerState,
    pub log: Vec<StepLog>,
    pub status: TrainStatus,
    pub queue_len: usize,
}

/// Monotone millisecond clock; the core has no time source of its own.
pub trait Clock {
    fn elapsed_ms(&mut self) -> f64;
}

/// Reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&mut self) -> f64 {
        0.0
    }
}

/// Columns of the step's embedding matrix with their provenance.
struct StepBatch<'a> {
    crops: Vec<&'a CropRecord>,
    input: Vec<f64>,
    /// Fixed positives (instance discrimination).
    blocks: Vec<PositiveBlock>,
    /// Super-frame sides to mine after encoding (cross-frame positives).
    sides: Vec<(Vec<(usize, u32)>, Vec<(usize, u32)>)>,
}

/// Positive blocks of one super-frame, given the embedding columns of each side.
///
/// Pairs are mined within each video, but every anchor's softmax runs over the whole
/// opposite side of the super-frame, so other videos' crops act as in-batch negatives.
/// Each side lists `(column, video_id)` sorted by video. Videos absent from either side
/// are skipped. Returns up to two blocks: X anchors over Y, and Y anchors over X for
/// videos whose X side was the larger one.
pub fn super_frame_blocks(
    emb: &FeatureMatrix,
    x_side: &[(usize, u32)],
    y_side: &[(usize, u32)],
) -> Result<Vec<PositiveBlock>> {
    let x_cols: Vec<usize> = x_side.iter().map(|c| c.0).collect();
    let y_cols: Vec<usize> = y_side.iter().map(|c| c.0).collect();
    // (anchor column, candidate position within the opposite side)
    let mut forward: Vec<(usize, usize)> = Vec::new();
    let mut backward: Vec<(usize, usize)> = Vec::new();
    let mut xi = 0;
    while xi < x_side.len() {
        let vid = x_side[xi].1;
        let xs: Vec<usize> = (xi..x_side.len()).take_while(|&i| x_side[i].1 == vid).collect();
        xi += xs.len();
        let ys: Vec<usize> = (0..y_side.len()).filter(|&j| y_side[j].1 == vid).collect();
        if ys.is_empty() {
            continue;
        }
        let xe = emb.select(&xs.iter().map(|&i| x_cols[i]).collect::<Vec<_>>());
        let ye = emb.select(&ys.iter().map(|&j| y_cols[j]).collect::<Vec<_>>());
        let mined = mine_positive_pairs(&xe, &ye)?;
        for (i, j) in mined.xy_pairs() {
            if mined.swapped {
                backward.push((y_cols[ys[j]], xs[i]));
            } else {
                forward.push((x_cols[xs[i]], ys[j]));
            }
        }
    }
    let mut blocks = Vec::new();
    for (pairs, candidates) in [(forward, y_cols), (backward, x_cols)] {
        if pairs.is_empty() {
            continue;
        }
        let cols = candidates.len();
        let (anchors, assign): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        blocks.push(PositiveBlock {
            anchors,
            candidates,
            association: AssociationMatrix::from_assignment(assign, cols)?,
        });
    }
    Ok(blocks)
}

fn pair_stats(blocks: &[PositiveBlock], crops: &[&CropRecord]) -> (usize, usize) {
    let mut total = 0;
    let mut correct = 0;
    for b in blocks {
        for (r, &c) in b.association.assignment().iter().enumerate() {
            let (x, y) = (crops[b.anchors[r]], crops[b.candidates[c]]);
            assert_eq!(x.video_id, y.video_id, "positive pair crosses videos");
            total += 1;
            if x.true_identity == y.true_identity {
                correct += 1;
            }
        }
    }
    (total, correct)
}

fn push_obs(input: &mut Vec<f64>, obs: &[f32]) {
    input.extend(obs.iter().map(|&v| v as f64));
}

/// Stateful trainer; [`train`] drives it to completion.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    loss: LossConfig,
    train: Vec<&'a Video>,
    obs_dim: usize,
    augment_sigma: f64,
    sampler: Rng,
    augment: Rng,
    pub encoder: Encoder,
    pub optimizer: OptimizerState,
    pub queue: NegativeQueue,
    steps_per_epoch: u64,
    total_steps: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let train: Vec<&Video> = dataset.train_videos().collect();
        if train.is_empty() {
            return Err(invalid("dataset", "no training videos"));
        }
        let obs_dim = dataset.config.obs_dim;
        let steps_per_epoch = cfg.steps_per_epoch(train.len());
        let total_steps = steps_per_epoch * cfg.epochs as u64;
        let encoder = Encoder::new(cfg.architecture(obs_dim), &mut Rng::derive(cfg.seed, "init"))?;
        let optimizer = OptimizerState::new(encoder.parameter_count(), cfg.optimizer(total_steps))?;
        let queue = NegativeQueue::new(cfg.queue_capacity, cfg.embed_dim)?;
        Ok(Self {
            loss: cfg.effective_loss(),
            cfg: cfg.clone(),
            train,
            obs_dim,
            augment_sigma: cfg.augment_sigma.unwrap_or(dataset.config.appearance_noise_sigma),
            sampler: Rng::derive(cfg.seed, "sampling"),
            augment: Rng::derive(cfg.seed, "augment"),
            encoder,
            optimizer,
            queue,
            steps_per_epoch,
            total_steps,
        })
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.steps_per_epoch
    }

    /// Video groups for one epoch: shuffled passes over the training set, chunked.
    pub fn epoch_groups(&mut self) -> Vec<Vec<usize>> {
        let mut groups = Vec::with_capacity(self.steps_per_epoch as usize);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        for _ in 0..self.cfg.samples_per_video_per_epoch {
            self.sampler.shuffle(&mut order);
            for chunk in order.chunks(self.cfg.videos_per_super_frame) {
                groups.push(chunk.to_vec());
            }
        }
        groups
    }

    fn cross_frame_batch(&mut self, group: &[usize]) -> Result<Option<StepBatch<'a>>> {
        let videos: Vec<&'a Video> = group.iter().map(|&i| self.train[i]).collect();
        let supers: Vec<SuperFramePair> = sample_super_frames(
            &videos,
            self.cfg.frames_per_video,
            self.cfg.delta_max_seconds,
            self.cfg.super_frame_budget,
            &mut self.sampler,
        );
        let mut crops: Vec<&'a CropRecord> = Vec::new();
        let mut sides = Vec::with_capacity(supers.len());
        for sf in &supers {
            let mut side = |refs: &[(usize, usize, usize)]| -> Vec<(usize, u32)> {
                refs.iter()
                    .map(|&(v, f, c)| {
                        let crop = &videos[v].frames[f].crops[c];
                        crops.push(crop);
                        (crops.len() - 1, crop.video_id)
                    })
                    .collect()
            };
            let x = side(&sf.x);
            let y = side(&sf.y);
            sides.push((x, y));
        }
        if crops.is_empty() {
            return Ok(None);
        }
        let mut input = Vec::with_capacity(crops.len() * self.obs_dim);
        for c in &crops {
            push_obs(&mut input, &c.observation);
        }
        Ok(Some(StepBatch {
            crops,
            input,
            blocks: Vec::new(),
            sides,
        }))
    }

    fn instance_batch(&mut self, group: &[usize]) -> Result<Option<StepBatch<'a>>> {
        let videos: Vec<&'a Video> = group.iter().map(|&i| self.train[i]).collect();
        let supers = sample_super_frames(
            &videos,
            self.cfg.frames_per_video,
            self.cfg.delta_max_seconds,
            self.cfg.super_frame_budget,
            &mut self.sampler,
        );
        let std = self.augment_sigma / libm::sqrt(self.obs_dim as f64);
        let mut crops: Vec<&'a CropRecord> = Vec::new();
        let mut input = Vec::new();
        let mut blocks = Vec::new();
        for sf in &supers {
            if sf.x.is_empty() {
                continue;
            }
            let mut views = [Vec::new(), Vec::new()];
            for view in &mut views {
                for &(v, f, c) in &sf.x {
                    let crop = &videos[v].frames[f].crops[c];
                    for &o in &crop.observation {
                        input.push(o as f64 + std * self.augment.normal());
                    }
                    crops.push(crop);
                    view.push(crops.len() - 1);
                }
            }
            let n = sf.x.len();
            let [anchors, candidates] = views;
            blocks.push(PositiveBlock {
                anchors,
                candidates,
                association: AssociationMatrix::from_assignment((0..n).collect(), n)?,
            });
        }
        if crops.is_empty() {
            return Ok(None);
        }
        Ok(Some(StepBatch {
            crops,
            input,
            blocks,
            sides: Vec::new(),
        }))
    }

    fn negatives(&self, emb: &FeatureMatrix, batch: &StepBatch<'_>) -> Vec<AnchorNegatives> {
        if self.loss.lambda == 0.0 || self.queue.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for b in &batch.blocks {
            for &a in &b.anchors {
                let sel = self.queue.select_negatives(
                    emb.col(a),
                    batch.crops[a].video_id,
                    self.loss.k,
                    self.loss.negative_selection,
                );
                out.push(AnchorNegatives {
                    anchor: a,
                    negatives: self.queue.gather(&sel),
                });
            }
        }
        out
    }

    /// Runs one optimization step on a group of video positions.
    ///
    /// Returns `Ok(None)` when the group yields no usable frame pair.
    pub fn step(&mut self, group: &[usize], epoch: u64) -> Result<Option<StepLog>> {
        let batch = match self.cfg.objective {
            Objective::InstanceDiscrimination => self.instance_batch(group)?,
            _ => self.cross_frame_batch(group)?,
        };
        let Some(mut batch) = batch else {
            return Ok(None);
        };
        let (emb, cache) = self.encoder.forward(&batch.input)?;
        // Pairs are mined with the current encoder, every step.
        for (x, y) in &batch.sides {
            batch.blocks.extend(super_frame_blocks(&emb, x, y)?);
        }
        if batch.blocks.is_empty() {
            return Ok(None);
        }
        let negatives = self.negatives(&emb, &batch);
        let out: LossOutput = objective(&emb, &batch.blocks, &negatives, &self.loss)?;
        if !out.total.is_finite() {
            return Err(Error::NonFiniteGradient {
                index: 0,
                value: out.total,
            });
        }
        let grads = self.encoder.backward(&cache, &out.grad)?;
        let step = self.optimizer.step;
        let lr = self.optimizer.step(self.encoder.params_mut(), &grads)?;
        self.queue.enqueue(
            emb.columns()
                .zip(&batch.crops)
                .map(|(e, c)| (e.to_vec(), c.video_id)),
        )?;
        let (pairs, correct) = pair_stats(&batch.blocks, &batch.crops);
        let n_rel = out.reliabilities.len().max(1) as f64;
        Ok(Some(StepLog {
            step,
            epoch,
            loss_rc: out.rc,
            loss_queue: out.queue,
            loss_total: out.total,
            alpha: out.alpha,
            mean_reliability: out.reliabilities.iter().sum::<f64>() / n_rel,
            min_reliability: out.reliabilities.iter().copied().fold(1.0, f64::min),
            pairs,
            pair_precision: if pairs == 0 { 0.0 } else { correct as f64 / pairs as f64 },
            lr,
            wall_ms: 0.0,
        }))
    }

    /// Trains until the epoch budget is used or a step fails.
    pub fn run(mut self, clock: &mut dyn Clock) -> TrainOutcome {
        let mut log = Vec::with_capacity(self.total_steps as usize);
        let mut status = TrainStatus::Completed;
        'epochs: for epoch in 0..self.cfg.epochs as u64 {
            for group in self.epoch_groups() {
                let before = clock.elapsed_ms();
                match self.step(&group, epoch) {
                    Ok(Some(mut entry)) => {
                        entry.wall_ms = clock.elapsed_ms() - before;
                        log.push(entry);
                    }
                    Ok(None) => {}
                    Err(e) => {
                        status = TrainStatus::Aborted {
                            step: self.optimizer.step,
                            reason: format!("{e}"),
                        };
                        break 'epochs;
                    }
                }
            }
        }
        TrainOutcome {
            objective: self.cfg.objective,
            queue_len: self.queue.len(),
            encoder: self.encoder,
            optimizer: self.optimizer,
            log,
            status,
        }
    }
}

/// Full training run for `cfg.objective`.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_clock(dataset, cfg, &mut NoClock)
}

pub fn train_with_clock(dataset: &Dataset, cfg: &TrainConfig, clock: &mut dyn Clock) -> Result<TrainOutcome> {
    Ok(Trainer::new(dataset, cfg)?.run(clock))
}

/// Instance-discrimination baseline: two noise-perturbed views of each crop are the positives.
pub fn train_instance_discrimination(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        objective: Objective::InstanceDiscrimination,
        ..cfg.clone()
    };
    train(dataset, &cfg)
}
