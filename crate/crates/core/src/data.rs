//! Synthetic pedestrian-crop video streams with hidden identity labels.
//!
//! Each video films a roster of identities through its own linear camera. A crop's
//! observation is `A_v proto_id + sigma (r B z(t) + e)`: `z(t)` is a slowly drifting
//! pose process living in a shared nuisance subspace `B`, `e` is white noise, and `r`
//! is `pose_ratio`. Identities walk in and out of view as a two-state Markov chain whose
//! mean visit length is `dwell_seconds`, so distant frames share fewer people.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub num_identities: usize,
    pub identity_dim: usize,
    pub obs_dim: usize,
    pub num_videos: usize,
    pub identities_per_video: usize,
    pub frames_per_video: usize,
    pub frame_interval_seconds: f64,
    pub presence_prob: f64,
    pub appearance_noise_sigma: f64,
    pub camera_shift_sigma: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Held-out evaluation videos, filmed with unseen cameras.
    pub heldout_videos: usize,
    /// Identities reserved for held-out videos; never seen in training.
    pub heldout_identities: usize,
    /// Dimension of the shared nuisance (pose) subspace.
    pub pose_dim: usize,
    /// Pose amplitude relative to the white appearance noise.
    pub pose_ratio: f64,
    pub pose_correlation_seconds: f64,
    /// Mean length of an uninterrupted visit by one identity.
    pub dwell_seconds: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            num_identities: 200,
            identity_dim: 16,
            obs_dim: 48,
            num_videos: 100,
            identities_per_video: 8,
            frames_per_video: 40,
            frame_interval_seconds: 7.0 / 30.0,
            presence_prob: 0.3,
            appearance_noise_sigma: 0.8,
            camera_shift_sigma: 0.3,
            dropout_rate: 0.3,
            seed: 0,
            heldout_videos: 20,
            heldout_identities: 40,
            pose_dim: 8,
            pose_ratio: 3.0,
            pose_correlation_seconds: 1.0,
            dwell_seconds: 1.5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_identities", self.num_identities),
            ("identity_dim", self.identity_dim),
            ("obs_dim", self.obs_dim),
            ("identities_per_video", self.identities_per_video),
            ("frames_per_video", self.frames_per_video),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if self.identities_per_video > self.num_identities {
            return Err(invalid(
                "identities_per_video",
                format!(
                    "{} exceeds num_identities {}",
                    self.identities_per_video, self.num_identities
                ),
            ));
        }
        if self.heldout_videos > 0 && self.identities_per_video > self.heldout_identities {
            return Err(invalid(
                "identities_per_video",
                format!(
                    "{} exceeds heldout_identities {}",
                    self.identities_per_video, self.heldout_identities
                ),
            ));
        }
        if self.obs_dim < self.identity_dim {
            return Err(invalid(
                "obs_dim",
                format!("{} is smaller than identity_dim {}", self.obs_dim, self.identity_dim),
            ));
        }
        if !(self.presence_prob > 0.0 && self.presence_prob <= 1.0) {
            return Err(invalid("presence_prob", format!("{} not in (0, 1]", self.presence_prob)));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(invalid("dropout_rate", format!("{} not in [0, 1)", self.dropout_rate)));
        }
        let nonneg = [
            ("appearance_noise_sigma", self.appearance_noise_sigma),
            ("camera_shift_sigma", self.camera_shift_sigma),
            ("pose_ratio", self.pose_ratio),
        ];
        for (field, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be finite and nonnegative, got {v}")));
            }
        }
        let pos = [
            ("frame_interval_seconds", self.frame_interval_seconds),
            ("pose_correlation_seconds", self.pose_correlation_seconds),
            ("dwell_seconds", self.dwell_seconds),
        ];
        for (field, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn video_duration(&self) -> f64 {
        (self.frames_per_video.saturating_sub(1)) as f64 * self.frame_interval_seconds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropRecord {
    pub observation: Vec<f32>,
    pub video_id: u32,
    pub frame_index: u32,
    pub timestamp_seconds: f64,
    /// Ground truth; only evaluation and diagnostics read it.
    pub true_identity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub video_id: u32,
    pub frame_index: u32,
    pub timestamp_seconds: f64,
    pub crops: Vec<CropRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub video_id: u32,
    pub heldout: bool,
    /// Identities the video can show.
    pub roster: Vec<u32>,
    pub frames: Vec<FrameSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: WorldConfig,
    /// Training videos first, then held-out videos; `video_id` equals the position.
    pub videos: Vec<Video>,
}

impl Dataset {
    pub fn train_videos(&self) -> impl Iterator<Item = &Video> {
        self.videos.iter().filter(|v| !v.heldout)
    }

    pub fn heldout_videos(&self) -> impl Iterator<Item = &Video> {
        self.videos.iter().filter(|v| v.heldout)
    }

    /// Copy keeping only the first `n` training videos (held-out videos are unchanged).
    pub fn with_train_videos(&self, n: usize) -> Dataset {
        let mut kept = 0;
        let videos = self
            .videos
            .iter()
            .filter(|v| {
                if v.heldout {
                    return true;
                }
                kept += 1;
                kept <= n
            })
            .cloned()
            .collect();
        Dataset {
            config: WorldConfig {
                num_videos: n.min(self.config.num_videos),
                ..self.config.clone()
            },
            videos,
        }
    }

    pub fn num_crops(&self) -> usize {
        self.videos
            .iter()
            .flat_map(|v| &v.frames)
            .map(|f| f.crops.len())
            .sum()
    }
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, std: f64) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.normal() * std).collect()
}

fn unit_gaussian(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if let Ok(u) = crate::types::l2_normalize(&v) {
            return u;
        }
    }
}

/// Row-major `rows x cols` matrix times vector.
fn mat_vec(m: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += crate::types::dot(row, v);
    }
}

struct Shared {
    prototypes: Vec<Vec<f64>>,
    base_camera: Vec<f64>,
    nuisance: Vec<f64>,
}

fn generate_video(cfg: &WorldConfig, shared: &Shared, video_id: u32, heldout: bool) -> Video {
    let mut rng = Rng::derive(cfg.seed, &format!("video-{video_id}"));
    let (pool_start, pool_size) = if heldout {
        (cfg.num_identities, cfg.heldout_identities)
    } else {
        (0, cfg.num_identities)
    };
    let mut pool: Vec<u32> = (0..pool_size as u32).map(|i| i + pool_start as u32).collect();
    rng.shuffle(&mut pool);
    let mut roster: Vec<u32> = pool[..cfg.identities_per_video].to_vec();
    roster.sort_unstable();

    let (obs, id_dim) = (cfg.obs_dim, cfg.identity_dim);
    let obs_std = 1.0 / libm::sqrt(obs as f64);
    let shift = gaussian_matrix(&mut rng, obs, id_dim, obs_std);
    let camera: Vec<f64> = shared
        .base_camera
        .iter()
        .zip(&shift)
        .map(|(a, g)| a + cfg.camera_shift_sigma * g)
        .collect();
    // Clean appearance of each roster identity under this camera.
    let clean: Vec<Vec<f64>> = roster
        .iter()
        .map(|&id| {
            let mut out = vec![0.0; obs];
            mat_vec(&camera, id_dim, &shared.prototypes[id as usize], &mut out);
            out
        })
        .collect();

    let dt = cfg.frame_interval_seconds;
    let rho = libm::exp(-dt / cfg.pose_correlation_seconds);
    let innov = libm::sqrt(1.0 - rho * rho);
    let pose_std = 1.0 / libm::sqrt(cfg.pose_dim.max(1) as f64);
    let (leave, enter) = if cfg.presence_prob >= 1.0 {
        (0.0, 1.0)
    } else {
        let leave = 1.0 - libm::exp(-dt / cfg.dwell_seconds);
        (leave, (leave * cfg.presence_prob / (1.0 - cfg.presence_prob)).min(1.0))
    };

    let r = roster.len();
    let mut pose: Vec<Vec<f64>> = (0..r)
        .map(|_| (0..cfg.pose_dim).map(|_| rng.normal() * pose_std).collect())
        .collect();
    let mut present: Vec<bool> = (0..r).map(|_| rng.bernoulli(cfg.presence_prob)).collect();
    let sigma = cfg.appearance_noise_sigma;
    let pose_amp = sigma * cfg.pose_ratio;

    let mut frames = Vec::with_capacity(cfg.frames_per_video);
    for f in 0..cfg.frames_per_video {
        if f > 0 {
            for (slot, z) in present.iter_mut().zip(pose.iter_mut()) {
                let u = rng.uniform();
                *slot = if *slot { u >= leave } else { u < enter };
                for c in z.iter_mut() {
                    *c = rho * *c + innov * pose_std * rng.normal();
                }
            }
        }
        let mut visible: Vec<usize> = (0..r).filter(|&i| present[i]).collect();
        if !visible.is_empty() && rng.bernoulli(cfg.dropout_rate) {
            let drop = rng.below(visible.len());
            visible.remove(drop);
        }
        rng.shuffle(&mut visible);
        let timestamp = f as f64 * dt;
        let crops = visible
            .iter()
            .map(|&slot| {
                let mut o = clean[slot].clone();
                if pose_amp > 0.0 {
                    let scaled: Vec<f64> = pose[slot].iter().map(|c| c * pose_amp).collect();
                    mat_vec(&shared.nuisance, cfg.pose_dim, &scaled, &mut o);
                }
                let observation = o
                    .iter()
                    .map(|&v| {
                        let noise = if sigma > 0.0 { sigma * obs_std * rng.normal() } else { 0.0 };
                        (v + noise) as f32
                    })
                    .collect();
                CropRecord {
                    observation,
                    video_id,
                    frame_index: f as u32,
                    timestamp_seconds: timestamp,
                    true_identity: roster[slot],
                }
            })
            .collect();
        frames.push(FrameSet {
            video_id,
            frame_index: f as u32,
            timestamp_seconds: timestamp,
            crops,
        });
    }
    Video {
        video_id,
        heldout,
        roster,
        frames,
    }
}

/// Deterministic synthetic world: `num_videos` training videos followed by held-out ones.
pub fn generate_world(cfg: &WorldConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = Rng::derive(cfg.seed, "world");
    let total_ids = cfg.num_identities + cfg.heldout_identities;
    let prototypes = (0..total_ids).map(|_| unit_gaussian(&mut rng, cfg.identity_dim)).collect();
    let obs_std = 1.0 / libm::sqrt(cfg.obs_dim as f64);
    let base_camera = gaussian_matrix(&mut rng, cfg.obs_dim, cfg.identity_dim, obs_std);
    let nuisance = gaussian_matrix(&mut rng, cfg.obs_dim, cfg.pose_dim, obs_std);
    let shared = Shared {
        prototypes,
        base_camera,
        nuisance,
    };
    let videos = (0..cfg.num_videos + cfg.heldout_videos)
        .map(|v| generate_video(cfg, &shared, v as u32, v >= cfg.num_videos))
        .collect();
    Ok(Dataset {
        config: cfg.clone(),
        videos,
    })
}

/// Two distinct frames no more than `delta_max` apart, uniform over all such unordered pairs.
pub fn sample_frame_pair(video: &Video, delta_max: f64, rng: &mut Rng) -> Result<(usize, usize)> {
    let windows = later_frames_within(video, delta_max);
    let total: usize = windows.iter().sum();
    if total == 0 {
        return Err(Error::NoEligiblePair);
    }
    let mut u = rng.below(total);
    for (i, &w) in windows.iter().enumerate() {
        if u < w {
            return Ok((i, i + 1 + u));
        }
        u -= w;
    }
    unreachable!("index within total")
}

/// For each frame, how many later frames lie within `delta_max` of it.
fn later_frames_within(video: &Video, delta_max: f64) -> Vec<usize> {
    let frames = &video.frames;
    (0..frames.len())
        .map(|i| {
            frames[i + 1..]
                .iter()
                .take_while(|f| f.timestamp_seconds - frames[i].timestamp_seconds <= delta_max)
                .count()
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `count` distinct frames spanning at most `delta_max`, uniform over such subsets, ascending.
pub fn sample_frame_group(video: &Video, count: usize, delta_max: f64, rng: &mut Rng) -> Option<Vec<usize>> {
    if count == 0 {
        return Some(Vec::new());
    }
    let windows = later_frames_within(video, delta_max);
    let weights: Vec<usize> = windows.iter().map(|&w| binomial(w, count - 1)).collect();
    let total: usize = weights.iter().sum();
    if total == 0 {
        return None;
    }
    let mut u = rng.below(total);
    let first = weights
        .iter()
        .position(|&w| {
            if u < w {
                true
            } else {
                u -= w;
                false
            }
        })
        .expect("index within total");
    let mut later: Vec<usize> = (first + 1..=first + windows[first]).collect();
    // Partial Fisher-Yates for a uniform (count - 1)-subset.
    for i in 0..count - 1 {
        let j = i + rng.below(later.len() - i);
        later.swap(i, j);
    }
    let mut group = vec![first];
    group.extend_from_slice(&later[..count - 1]);
    group.sort_unstable();
    Some(group)
}

/// One side of a super-frame entry: `(video position, frame index, crop index)`.
pub type CropRef = (usize, usize, usize);

/// Merged frame pair across several videos. Positives stay within a video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuperFramePair {
    pub x: Vec<CropRef>,
    pub y: Vec<CropRef>,
}

impl SuperFramePair {
    pub fn video_ids(&self, videos: &[&Video]) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .x
            .iter()
            .chain(&self.y)
            .map(|&(v, _, _)| videos[v].video_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Frame pairs of each video: all pairs of a `frames_per_video` group when one fits in
/// `delta_max`, otherwise independently drawn pairs; `None` when the video has no pair.
fn video_pairs(video: &Video, frames_per_video: usize, delta_max: f64, rng: &mut Rng) -> Option<Vec<(usize, usize)>> {
    let n = frames_per_video.max(2);
    let combos = |g: &[usize]| {
        let mut out = Vec::new();
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                out.push((g[a], g[b]));
            }
        }
        out
    };
    if let Some(group) = sample_frame_group(video, n, delta_max, rng) {
        return Some(combos(&group));
    }
    let wanted = binomial(n, 2);
    let mut out = Vec::with_capacity(wanted);
    for _ in 0..wanted {
        match sample_frame_pair(video, delta_max, rng) {
            Ok(p) => out.push(p),
            Err(_) => return None,
        }
    }
    Some(out)
}

fn truncate_side(side: &mut Vec<CropRef>, videos: &[&Video], budget: usize) {
    side.sort_by_key(|&(v, _, c)| (videos[v].video_id, c));
    side.truncate(budget);
}

/// Super-frame pairs for one step: each video contributes the pairs among its sampled
/// frames, pair `s` of every video is merged into super-frame `s`, and each side keeps
/// at most `budget` crops ordered by `(video_id, crop index)`.
pub fn sample_super_frames(
    videos: &[&Video],
    frames_per_video: usize,
    delta_max: f64,
    budget: usize,
    rng: &mut Rng,
) -> Vec<SuperFramePair> {
    let mut supers: Vec<SuperFramePair> = Vec::new();
    for (vpos, video) in videos.iter().enumerate() {
        let Some(pairs) = video_pairs(video, frames_per_video, delta_max, rng) else {
            continue;
        };
        if supers.len() < pairs.len() {
            supers.resize_with(pairs.len(), SuperFramePair::default);
        }
        for (s, (fa, fb)) in pairs.into_iter().enumerate() {
            let sf = &mut supers[s];
            sf.x.extend((0..video.frames[fa].crops.len()).map(|c| (vpos, fa, c)));
            sf.y.extend((0..video.frames[fb].crops.len()).map(|c| (vpos, fb, c)));
        }
    }
    for sf in &mut supers {
        truncate_side(&mut sf.x, videos, budget);
        truncate_side(&mut sf.y, videos, budget);
    }
    supers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldConfig {
        WorldConfig {
            num_identities: 30,
            num_videos: 6,
            heldout_videos: 2,
            heldout_identities: 10,
            identities_per_video: 5,
            frames_per_video: 12,
            seed: 11,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn validation_errors() {
        let bad = WorldConfig {
            identities_per_video: 300,
            ..WorldConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "identities_per_video", .. })));
        let bad = WorldConfig {
            obs_dim: 8,
            ..WorldConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = WorldConfig {
            dropout_rate: 1.0,
            ..WorldConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = WorldConfig {
            presence_prob: 0.0,
            ..WorldConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(WorldConfig::default().validate().is_ok());
    }

    #[test]
    fn deterministic_world_repeats_observations() {
        let cfg = WorldConfig {
            appearance_noise_sigma: 0.0,
            camera_shift_sigma: 0.0,
            presence_prob: 1.0,
            dropout_rate: 0.0,
            ..small()
        };
        let ds = generate_world(&cfg).unwrap();
        for v in &ds.videos {
            let first = &v.frames[0];
            assert_eq!(first.crops.len(), cfg.identities_per_video);
            for f in &v.frames {
                assert_eq!(f.crops.len(), cfg.identities_per_video);
                for c in &f.crops {
                    let reference = first.crops.iter().find(|r| r.true_identity == c.true_identity).unwrap();
                    assert_eq!(reference.observation, c.observation);
                }
            }
        }
    }

    #[test]
    fn frame_invariants() {
        let ds = generate_world(&small()).unwrap();
        assert_eq!(ds.videos.len(), 8);
        for (pos, v) in ds.videos.iter().enumerate() {
            assert_eq!(v.video_id as usize, pos);
            assert_eq!(v.heldout, pos >= 6);
            for f in &v.frames {
                let mut ids: Vec<u32> = f.crops.iter().map(|c| c.true_identity).collect();
                ids.sort_unstable();
                let before = ids.len();
                ids.dedup();
                assert_eq!(before, ids.len());
                for c in &f.crops {
                    assert_eq!((c.video_id, c.frame_index), (f.video_id, f.frame_index));
                    assert!(c.observation.iter().all(|x| x.is_finite()));
                    assert!(v.roster.contains(&c.true_identity));
                    if v.heldout {
                        assert!(c.true_identity >= 30);
                    } else {
                        assert!(c.true_identity < 30);
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_world() {
        assert_eq!(generate_world(&small()).unwrap(), generate_world(&small()).unwrap());
        let other = WorldConfig { seed: 12, ..small() };
        assert_ne!(generate_world(&small()).unwrap(), generate_world(&other).unwrap());
    }

    #[test]
    fn frame_pair_respects_bound() {
        let ds = generate_world(&small()).unwrap();
        let v = &ds.videos[0];
        let mut rng = Rng::new(1);
        assert_eq!(sample_frame_pair(v, 0.1, &mut rng), Err(Error::NoEligiblePair));
        for _ in 0..500 {
            let (a, b) = sample_frame_pair(v, 0.5, &mut rng).unwrap();
            assert!(a < b);
            assert!(v.frames[b].timestamp_seconds - v.frames[a].timestamp_seconds <= 0.5);
        }
    }

    #[test]
    fn frame_group_spans_bound() {
        let ds = generate_world(&small()).unwrap();
        let v = &ds.videos[0];
        let mut rng = Rng::new(2);
        for _ in 0..300 {
            let g = sample_frame_group(v, 3, 1.0, &mut rng).unwrap();
            assert_eq!(g.len(), 3);
            assert!(g[0] < g[1] && g[1] < g[2]);
            assert!(v.frames[g[2]].timestamp_seconds - v.frames[g[0]].timestamp_seconds <= 1.0);
        }
        assert!(sample_frame_group(v, 3, 0.3, &mut rng).is_none());
    }

    #[test]
    fn super_frames_single_video_and_budget() {
        let ds = generate_world(&WorldConfig {
            presence_prob: 1.0,
            dropout_rate: 0.0,
            ..small()
        })
        .unwrap();
        let mut rng = Rng::new(5);
        let one = [&ds.videos[0]];
        let sf = sample_super_frames(&one, 3, 4.0, 80, &mut rng);
        assert_eq!(sf.len(), 3);
        for s in &sf {
            assert_eq!(s.x.len(), 5);
            assert_eq!(s.video_ids(&one), vec![0]);
            let fx = s.x[0].1;
            assert!(s.x.iter().all(|c| c.1 == fx));
        }
        let all: Vec<&Video> = ds.train_videos().collect();
        let sf = sample_super_frames(&all, 3, 4.0, 80, &mut rng);
        assert_eq!(sf[0].x.len(), 30);
        assert_eq!(sf[0].video_ids(&all).len(), 6);
        let sf = sample_super_frames(&all, 3, 4.0, 12, &mut rng);
        for s in &sf {
            assert_eq!(s.x.len(), 12);
            let keys: Vec<(u32, usize)> = s.x.iter().map(|&(v, _, c)| (all[v].video_id, c)).collect();
            let mut sorted = keys.clone();
            sorted.sort_unstable();
            assert_eq!(keys, sorted);
        }
    }
}
