//! On-disk formats: datasets, checkpoints, step logs and embedding exports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use isr_core::data::{CropRecord, Dataset, FrameSet, Video, WorldConfig};
use isr_core::encoder::{Architecture, Encoder};
use isr_core::optim::{AdamWConfig, OptimizerState};
use isr_core::trainer::{Objective, StepLog, TrainStatus};
use isr_core::FeatureMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_FILE: &str = "dataset.json";
pub const OBSERVATIONS_FILE: &str = "observations.f32le";
const DATASET_FORMAT: &str = "isr-dataset-v1";
const CHECKPOINT_FORMAT: &str = "isr-checkpoint-v1";

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::json(path))?;
    w.write_all(b"\n").map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(Error::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(Error::json(path))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(Error::io(path))
}

#[derive(Serialize, Deserialize)]
struct FrameEntry {
    frame_index: u32,
    timestamp_seconds: f64,
    /// Identity of each crop, in storage order; the crop count is its length.
    identities: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct VideoEntry {
    video_id: u32,
    heldout: bool,
    roster: Vec<u32>,
    frames: Vec<FrameEntry>,
}

#[derive(Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    config: WorldConfig,
    observations: String,
    obs_dim: usize,
    num_crops: usize,
    videos: Vec<VideoEntry>,
}

/// Writes `dataset.json` and `observations.f32le` into `dir`; returns both paths.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let obs_path = dir.join(OBSERVATIONS_FILE);
    let mut w = BufWriter::new(File::create(&obs_path).map_err(Error::io(&obs_path))?);
    let mut videos = Vec::with_capacity(dataset.videos.len());
    for v in &dataset.videos {
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in &v.frames {
            for c in &f.crops {
                for x in &c.observation {
                    w.write_all(&x.to_le_bytes()).map_err(Error::io(&obs_path))?;
                }
            }
            frames.push(FrameEntry {
                frame_index: f.frame_index,
                timestamp_seconds: f.timestamp_seconds,
                identities: f.crops.iter().map(|c| c.true_identity).collect(),
            });
        }
        videos.push(VideoEntry {
            video_id: v.video_id,
            heldout: v.heldout,
            roster: v.roster.clone(),
            frames,
        });
    }
    w.flush().map_err(Error::io(&obs_path))?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        config: dataset.config.clone(),
        observations: OBSERVATIONS_FILE.into(),
        obs_dim: dataset.config.obs_dim,
        num_crops: dataset.num_crops(),
        videos,
    };
    let manifest_path = dir.join(DATASET_FILE);
    write_json(&manifest_path, &manifest)?;
    Ok(vec![manifest_path, obs_path])
}

/// Reads a dataset from a directory holding `dataset.json`, or from that file itself.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() { path.join(DATASET_FILE) } else { path.to_path_buf() };
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::format(&manifest_path, format!("unknown format `{}`", manifest.format)));
    }
    manifest.config.validate()?;
    let obs_path = manifest_path.with_file_name(&manifest.observations);
    let mut bytes = Vec::new();
    File::open(&obs_path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(Error::io(&obs_path))?;
    let d = manifest.obs_dim;
    if bytes.len() != manifest.num_crops * d * 4 {
        return Err(Error::format(
            &obs_path,
            format!("expected {} bytes, found {}", manifest.num_crops * d * 4, bytes.len()),
        ));
    }
    let mut floats = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let mut videos = Vec::with_capacity(manifest.videos.len());
    let mut seen = 0usize;
    for v in manifest.videos {
        let frames = v
            .frames
            .into_iter()
            .map(|f| FrameSet {
                video_id: v.video_id,
                frame_index: f.frame_index,
                timestamp_seconds: f.timestamp_seconds,
                crops: f
                    .identities
                    .iter()
                    .map(|&id| CropRecord {
                        observation: floats.by_ref().take(d).collect(),
                        video_id: v.video_id,
                        frame_index: f.frame_index,
                        timestamp_seconds: f.timestamp_seconds,
                        true_identity: id,
                    })
                    .collect(),
            })
            .collect::<Vec<_>>();
        seen += frames.iter().map(|f| f.crops.len()).sum::<usize>();
        videos.push(Video {
            video_id: v.video_id,
            heldout: v.heldout,
            roster: v.roster,
            frames,
        });
    }
    if seen != manifest.num_crops {
        return Err(Error::format(
            &manifest_path,
            format!("frame table lists {seen} crops, header says {}", manifest.num_crops),
        ));
    }
    Ok(Dataset {
        config: manifest.config,
        videos,
    })
}

/// Encoder parameters with optimizer state and run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: Encoder,
    pub optimizer: OptimizerState,
    pub objective: Objective,
    pub config_hash: String,
    pub status: TrainStatus,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    format: String,
    architecture: Architecture,
    parameter_count: usize,
    step: u64,
    learning_rate: f64,
    optimizer: AdamWConfig,
    objective: Objective,
    config_hash: String,
    status: TrainStatus,
    arrays: String,
    /// Arrays stored back to back in the binary file, each `parameter_count` little-endian f64.
    layout: Vec<String>,
}

/// Writes `<stem>.json` metadata and `<stem>.f64le` arrays; returns both paths.
pub fn write_checkpoint(dir: &Path, stem: &str, ckpt: &Checkpoint) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let bin_name = format!("{stem}.f64le");
    let bin_path = dir.join(&bin_name);
    let mut w = BufWriter::new(File::create(&bin_path).map_err(Error::io(&bin_path))?);
    for array in [
        ckpt.encoder.params(),
        &ckpt.optimizer.first_moment,
        &ckpt.optimizer.second_moment,
    ] {
        for x in array {
            w.write_all(&x.to_le_bytes()).map_err(Error::io(&bin_path))?;
        }
    }
    w.flush().map_err(Error::io(&bin_path))?;
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.into(),
        architecture: ckpt.encoder.architecture().clone(),
        parameter_count: ckpt.encoder.parameter_count(),
        step: ckpt.optimizer.step,
        learning_rate: ckpt.optimizer.current_lr(),
        optimizer: ckpt.optimizer.config,
        objective: ckpt.objective,
        config_hash: ckpt.config_hash.clone(),
        status: ckpt.status.clone(),
        arrays: bin_name,
        layout: vec!["params".into(), "first_moment".into(), "second_moment".into()],
    };
    let meta_path = dir.join(format!("{stem}.json"));
    write_json(&meta_path, &meta)?;
    Ok(vec![meta_path, bin_path])
}

/// Reads a checkpoint from its metadata file, or from a run directory's final checkpoint.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let meta_path = if path.is_dir() {
        path.join("checkpoints").join("final.json")
    } else {
        path.to_path_buf()
    };
    let meta: CheckpointMeta = read_json(&meta_path)?;
    if meta.format != CHECKPOINT_FORMAT {
        return Err(Error::format(&meta_path, format!("unknown format `{}`", meta.format)));
    }
    let bin_path = meta_path.with_file_name(&meta.arrays);
    let bytes = fs::read(&bin_path).map_err(Error::io(&bin_path))?;
    let n = meta.parameter_count;
    if bytes.len() != 3 * n * 8 {
        return Err(Error::format(&bin_path, format!("expected {} bytes, found {}", 3 * n * 8, bytes.len())));
    }
    let mut values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    let mut take = || values.by_ref().take(n).collect::<Vec<f64>>();
    let encoder = Encoder::from_params(meta.architecture, take())?;
    let mut optimizer = OptimizerState::new(n, meta.optimizer)?;
    optimizer.first_moment = take();
    optimizer.second_moment = take();
    optimizer.step = meta.step;
    Ok(Checkpoint {
        encoder,
        optimizer,
        objective: meta.objective,
        config_hash: meta.config_hash,
        status: meta.status,
    })
}

/// Step-log row without wall-clock time, so that identical runs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StepRow {
    step: u64,
    epoch: u64,
    loss_rc: f64,
    loss_queue: f64,
    loss_total: f64,
    alpha: f64,
    mean_reliability: f64,
    min_reliability: f64,
    pairs: usize,
    pair_precision: f64,
    lr: f64,
}

/// Writes the deterministic step log and a separate `step,wall_ms` timing file.
pub fn write_step_logs(steps_path: &Path, timing_path: &Path, log: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(steps_path).map_err(Error::csv(steps_path))?;
    for s in log {
        w.serialize(StepRow {
            step: s.step,
            epoch: s.epoch,
            loss_rc: s.loss_rc,
            loss_queue: s.loss_queue,
            loss_total: s.loss_total,
            alpha: s.alpha,
            mean_reliability: s.mean_reliability,
            min_reliability: s.min_reliability,
            pairs: s.pairs,
            pair_precision: s.pair_precision,
            lr: s.lr,
        })
        .map_err(Error::csv(steps_path))?;
    }
    w.flush().map_err(Error::io(steps_path))?;
    let mut t = csv::Writer::from_path(timing_path).map_err(Error::csv(timing_path))?;
    t.write_record(["step", "wall_ms"]).map_err(Error::csv(timing_path))?;
    for s in log {
        t.write_record([s.step.to_string(), s.wall_ms.to_string()])
            .map_err(Error::csv(timing_path))?;
    }
    t.flush().map_err(Error::io(timing_path))
}

/// Reads a step log back; `wall_ms` is zero.
pub fn read_step_log(path: &Path) -> Result<Vec<StepLog>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    r.deserialize::<StepRow>()
        .map(|row| {
            let s = row.map_err(Error::csv(path))?;
            Ok(StepLog {
                step: s.step,
                epoch: s.epoch,
                loss_rc: s.loss_rc,
                loss_queue: s.loss_queue,
                loss_total: s.loss_total,
                alpha: s.alpha,
                mean_reliability: s.mean_reliability,
                min_reliability: s.min_reliability,
                pairs: s.pairs,
                pair_precision: s.pair_precision,
                lr: s.lr,
                wall_ms: 0.0,
            })
        })
        .collect()
}

/// One labelled embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub identity: u32,
    pub video_id: u32,
    pub embedding: Vec<f64>,
}

/// CSV with header `id,video_id,e0,...` and one row per crop. An empty crop list writes
/// only the header; `dim` fixes its width.
pub fn write_embeddings(path: &Path, dim: usize, crops: &[CropRecord], emb: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    let mut header = vec!["id".to_string(), "video_id".to_string()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(Error::csv(path))?;
    for (c, e) in crops.iter().zip(emb.columns()) {
        let mut row = vec![c.true_identity.to_string(), c.video_id.to_string()];
        row.extend(e.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_embeddings(path: &Path) -> Result<Vec<EmbeddingRow>> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let width = r.headers().map_err(Error::csv(path))?.len();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(Error::csv(path))?;
        if record.len() != width {
            return Err(Error::format(path, format!("row has {} fields, header {width}", record.len())));
        }
        let bad = |field: &str| Error::format(path, format!("unparsable field `{field}`"));
        let int = |s: &str| s.parse::<u32>().map_err(|_| bad(s));
        rows.push(EmbeddingRow {
            identity: int(&record[0])?,
            video_id: int(&record[1])?,
            embedding: record
                .iter()
                .skip(2)
                .map(|s| s.parse::<f64>().map_err(|_| bad(s)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}
