//! Retrieval evaluation (CMC rank-k and mAP) on held-out videos, plus mining precision.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{sample_frame_pair, CropRecord, Dataset, FrameSet};
use crate::encoder::{stack_observations, Encoder};
use crate::error::Result;
use crate::matching::mine_positive_pairs;
use crate::rng::Rng;
use crate::types::{dot, FeatureMatrix};

/// Query and gallery crops drawn from disjoint held-out videos.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalSplit {
    pub query: Vec<CropRecord>,
    pub gallery: Vec<CropRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rank_1: f64,
    pub rank_5: f64,
    pub rank_10: f64,
    pub map: f64,
    pub per_query_ap: Vec<f64>,
    pub num_queries: usize,
    /// Queries whose identity never appears in the gallery.
    pub excluded_queries: usize,
}

/// One crop per (video, identity) from held-out videos. The first half of the held-out
/// videos provides queries, the second half the gallery.
pub fn build_retrieval_split(dataset: &Dataset, seed: u64) -> RetrievalSplit {
    let mut rng = Rng::derive(seed, "retrieval-split");
    let heldout: Vec<_> = dataset.heldout_videos().collect();
    let half = heldout.len() / 2;
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    for (i, video) in heldout.iter().enumerate() {
        for &id in &video.roster {
            let sightings: Vec<&CropRecord> = video
                .frames
                .iter()
                .flat_map(|f| f.crops.iter())
                .filter(|c| c.true_identity == id)
                .collect();
            if sightings.is_empty() {
                continue;
            }
            let pick = sightings[rng.below(sightings.len())].clone();
            if i < half {
                query.push(pick);
            } else {
                gallery.push(pick);
            }
        }
    }
    RetrievalSplit { query, gallery }
}

/// Unit embeddings of a list of crops, in order.
pub fn embed_crops(encoder: &Encoder, crops: &[CropRecord]) -> Result<FeatureMatrix> {
    let input = stack_observations(crops.iter().map(|c| c.observation.as_slice()));
    Ok(encoder.forward(&input)?.0)
}

/// Gallery indices by descending similarity, ties broken by ascending index.
pub fn rank_gallery(query: &[f64], gallery: &FeatureMatrix) -> Vec<usize> {
    let sims: Vec<f64> = gallery.columns().map(|g| dot(query, g)).collect();
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order
}

/// Average precision of a ranked relevance list: mean over hit positions `r` of hits-in-top-`r` / `r`.
pub fn average_precision(relevant: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &rel) in relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// CMC and mAP from precomputed embeddings.
pub fn evaluate_embeddings(
    query: &FeatureMatrix,
    query_ids: &[u32],
    gallery: &FeatureMatrix,
    gallery_ids: &[u32],
) -> EvalReport {
    let mut hits = [0usize; 3];
    let mut aps = Vec::with_capacity(query.len());
    let mut excluded = 0;
    for (q, &qid) in query.columns().zip(query_ids) {
        if !gallery_ids.contains(&qid) {
            excluded += 1;
            continue;
        }
        let order = rank_gallery(q, gallery);
        let relevant: Vec<bool> = order.iter().map(|&g| gallery_ids[g] == qid).collect();
        let first = relevant.iter().position(|&r| r).expect("identity present in gallery");
        for (slot, k) in [1usize, 5, 10].iter().enumerate() {
            if first < *k {
                hits[slot] += 1;
            }
        }
        aps.push(average_precision(&relevant));
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

/// Expected Rank-1 under a uniformly random gallery ranking: the mean over scored queries
/// of the fraction of gallery items sharing the query's identity.
pub fn chance_rank_1(query_ids: &[u32], gallery_ids: &[u32]) -> f64 {
    let fractions: Vec<f64> = query_ids
        .iter()
        .map(|q| gallery_ids.iter().filter(|g| *g == q).count())
        .filter(|&n| n > 0)
        .map(|n| n as f64 / gallery_ids.len() as f64)
        .collect();
    if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    }
}

/// Encodes the split and scores it without any adaptation.
pub fn evaluate(encoder: &Encoder, split: &RetrievalSplit) -> Result<EvalReport> {
    let q = embed_crops(encoder, &split.query)?;
    let g = embed_crops(encoder, &split.gallery)?;
    let qid: Vec<u32> = split.query.iter().map(|c| c.true_identity).collect();
    let gid: Vec<u32> = split.gallery.iter().map(|c| c.true_identity).collect();
    Ok(evaluate_embeddings(&q, &qid, &g, &gid))
}

/// Fraction of mined pairs whose hidden identities agree; `None` when nothing was mined.
pub fn mining_precision(encoder: &Encoder, pairs: &[(&FrameSet, &FrameSet)]) -> Result<Option<f64>> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for (a, b) in pairs {
        if a.crops.is_empty() || b.crops.is_empty() {
            continue;
        }
        let x = embed_crops(encoder, &a.crops)?;
        let y = embed_crops(encoder, &b.crops)?;
        let mined = mine_positive_pairs(&x, &y)?;
        for (i, j) in mined.xy_pairs() {
            total += 1;
            if a.crops[i].true_identity == b.crops[j].true_identity {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 {
        None
    } else {
        Some(correct as f64 / total as f64)
    })
}

/// `per_video` frame pairs within `delta_max` from every held-out video.
pub fn heldout_frame_pairs(dataset: &Dataset, per_video: usize, delta_max: f64, seed: u64) -> Vec<(&FrameSet, &FrameSet)> {
    let mut rng = Rng::derive(seed, "mining-pairs");
    let mut out = Vec::new();
    for video in dataset.heldout_videos() {
        for _ in 0..per_video {
            if let Ok((a, b)) = sample_frame_pair(video, delta_max, &mut rng) {
                out.push((&video.frames[a], &video.frames[b]));
            }
        }
    }
    out
}
