//! FIFO memory queue of detached embeddings used as cross-video negatives.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::types::{dot, norm, FeatureMatrix, NegativeSelection, UNIT_NORM_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub embedding: Vec<f64>,
    pub video_id: u32,
    /// Assigned by the queue on insertion; strictly increasing.
    pub insertion_index: u64,
}

#[derive(Debug, Clone)]
pub struct NegativeQueue {
    capacity: usize,
    dim: usize,
    entries: VecDeque<QueueEntry>,
    next_index: u64,
}

/// Result of a negative lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Positions into the queue, ordered from the most extreme similarity.
    pub positions: Vec<usize>,
    pub similarities: Vec<f64>,
    /// Fewer than `k` eligible entries were available.
    pub shortfall: bool,
}

impl NegativeQueue {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("queue_capacity", "must be positive"));
        }
        Ok(Self {
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity),
            next_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, position: usize) -> &QueueEntry {
        &self.entries[position]
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &QueueEntry> + ExactSizeIterator {
        self.entries.iter()
    }

    /// Appends unit-norm embeddings in order and evicts the oldest overflow. Returns the eviction count.
    pub fn enqueue<I>(&mut self, batch: I) -> Result<usize>
    where
        I: IntoIterator<Item = (Vec<f64>, u32)>,
    {
        let mut evicted = 0;
        for (embedding, video_id) in batch {
            if embedding.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: embedding.len(),
                });
            }
            let n = norm(&embedding);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm {
                    index: self.next_index as usize,
                    norm: n,
                });
            }
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
                evicted += 1;
            }
            self.entries.push_back(QueueEntry {
                embedding,
                video_id,
                insertion_index: self.next_index,
            });
            self.next_index += 1;
        }
        Ok(evicted)
    }

    /// The `k` entries from other videos with the lowest (`MostDissimilar`) or highest
    /// (`MostSimilar`) dot product with `anchor`. Ties go to the older entry.
    pub fn select_negatives(
        &self,
        anchor: &[f64],
        anchor_video: u32,
        k: usize,
        mode: NegativeSelection,
    ) -> Selection {
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.video_id != anchor_video)
            .map(|(pos, e)| {
                let s = dot(anchor, &e.embedding);
                let key = match mode {
                    NegativeSelection::MostDissimilar => s,
                    NegativeSelection::MostSimilar => -s,
                };
                (key, pos)
            })
            .collect();
        let shortfall = scored.len() < k;
        let take = k.min(scored.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take > 0 && take < scored.len() {
            scored.select_nth_unstable_by(take - 1, cmp);
            scored.truncate(take);
        }
        scored.sort_unstable_by(cmp);
        let positions: Vec<usize> = scored.iter().map(|&(_, p)| p).collect();
        let similarities = positions.iter().map(|&p| dot(anchor, &self.entries[p].embedding)).collect();
        Selection {
            positions,
            similarities,
            shortfall,
        }
    }

    /// Selected negatives as a feature matrix.
    pub fn gather(&self, selection: &Selection) -> FeatureMatrix {
        let mut data = Vec::with_capacity(selection.positions.len() * self.dim);
        for &p in &selection.positions {
            data.extend_from_slice(&self.entries[p].embedding);
        }
        FeatureMatrix::from_unit_columns(self.dim, data).unwrap_or_else(|_| FeatureMatrix::empty(self.dim))
    }
}
