//! Reliability-guided contrastive loss, its baselines, and the memory-queue loss.
//!
//! Every loss returns its value together with the exact gradient the optimizer sees.
//! Gradients are expressed first with respect to the reliability `p` (per anchor) and
//! then chained into similarity scores `s_ij = x_i . y_j` and finally into embeddings.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::{dot, AssociationMatrix, FeatureMatrix, LossConfig, Matrix, Modulation};

/// Lower clamp on reliabilities before taking logarithms.
pub const P_FLOOR: f64 = 1e-300;

/// Per-anchor softmax alignment of `X` against `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    /// `p(x_i)`, clamped to `[P_FLOOR, 1]`.
    pub p: Vec<f64>,
    /// `log p(x_i)` from the log-softmax, more accurate than `ln(p)` near 1.
    pub log_p: Vec<f64>,
    pub matched: Vec<usize>,
    /// Row-major `m x n` softmax over columns.
    pub softmax: Matrix,
    pub tau: f64,
}

impl ReliabilityReport {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Reliability of every mined pair from a precomputed `m x n` similarity matrix.
pub fn reliability_from_similarities(
    sim: &Matrix,
    pi: &AssociationMatrix,
    tau: f64,
) -> Result<ReliabilityReport> {
    if pi.rows() != sim.rows() || pi.cols() != sim.cols() {
        return Err(Error::DimensionMismatch {
            expected: sim.rows() * sim.cols(),
            actual: pi.rows() * pi.cols(),
        });
    }
    let (m, n) = (sim.rows(), sim.cols());
    let mut softmax = Matrix::zeros(m, n);
    let mut p = Vec::with_capacity(m);
    let mut log_p = Vec::with_capacity(m);
    for i in 0..m {
        let row = sim.row(i);
        let top = (0..n).fold(0, |best, j| if row[j] > row[best] { j } else { best });
        let max = row[top];
        let mut rest = 0.0;
        for (j, &s) in row.iter().enumerate() {
            let e = libm::exp((s - max) / tau);
            softmax.set(i, j, e);
            if j != top {
                rest += e;
            }
        }
        let z = 1.0 + rest;
        let log_z = libm::log1p(rest);
        let mut mass = 0.0;
        let mut log_mass = f64::NEG_INFINITY;
        for j in 0..n {
            let e = softmax.get(i, j) / z;
            softmax.set(i, j, e);
            if pi.get(i, j) {
                mass += e;
                log_mass = (row[j] - max) / tau - log_z;
            }
        }
        p.push(mass.clamp(P_FLOOR, 1.0));
        log_p.push(log_mass.max(libm::log(P_FLOOR)).min(0.0));
    }
    Ok(ReliabilityReport {
        p,
        log_p,
        matched: pi.assignment().to_vec(),
        softmax,
        tau,
    })
}

/// `p(x_i) = sum_j pi_ij exp(x_i.y_j / tau) / sum_j exp(x_i.y_j / tau)`.
pub fn reliability(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    pi: &AssociationMatrix,
    tau: f64,
) -> Result<ReliabilityReport> {
    reliability_from_similarities(&x.similarities(y)?, pi, tau)
}

/// Loss of one anchor as a function of its reliability.
pub fn modulated_loss(mode: Modulation, p: f64, log_p: f64, gamma: f64) -> f64 {
    match mode {
        Modulation::ReliabilityStopgrad | Modulation::ReliabilityKept => -libm::pow(p, gamma) * log_p,
        Modulation::Focal => -libm::pow(1.0 - p, gamma) * log_p,
        Modulation::None => -log_p,
    }
}

/// `dL/dp` of [`modulated_loss`] as seen by back-propagation.
pub fn modulated_grad_p(mode: Modulation, p: f64, log_p: f64, gamma: f64) -> f64 {
    match mode {
        Modulation::ReliabilityStopgrad => -libm::pow(p, gamma) / p,
        Modulation::ReliabilityKept => -libm::pow(p, gamma - 1.0) * (gamma * log_p + 1.0),
        Modulation::Focal => {
            let q = 1.0 - p;
            let factor_term = if gamma == 0.0 || log_p == 0.0 {
                0.0
            } else {
                gamma * libm::pow(q, gamma - 1.0) * log_p
            };
            factor_term - libm::pow(q, gamma) / p
        }
        Modulation::None => -1.0 / p,
    }
}

/// Per-anchor loss values with their gradients with respect to `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLosses {
    pub values: Vec<f64>,
    pub grad_p: Vec<f64>,
}

impl AnchorLosses {
    fn evaluate(report: &ReliabilityReport, mode: Modulation, gamma: f64) -> Self {
        let (values, grad_p) = report
            .p
            .iter()
            .zip(&report.log_p)
            .map(|(&p, &lp)| (modulated_loss(mode, p, lp, gamma), modulated_grad_p(mode, p, lp, gamma)))
            .unzip();
        Self { values, grad_p }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Chains `scale * dL/dp` into `dL/ds_ij = dL/dp * p (pi_ij - sigma_ij) / tau`.
    pub fn similarity_gradient(&self, report: &ReliabilityReport, scale: f64) -> Matrix {
        let (m, n) = (report.softmax.rows(), report.softmax.cols());
        let mut g = Matrix::zeros(m, n);
        for i in 0..m {
            let coef = scale * self.grad_p[i] * report.p[i] / report.tau;
            let hit = report.matched[i];
            let off: f64 = (0..n).filter(|&j| j != hit).map(|j| report.softmax.get(i, j)).sum();
            for j in 0..n {
                let residual = if j == hit { off } else { -report.softmax.get(i, j) };
                g.set(i, j, coef * residual);
            }
        }
        g
    }
}

/// `-p^gamma log p` with `p^gamma` held constant in back-propagation.
pub fn rc_loss(report: &ReliabilityReport, gamma: f64) -> AnchorLosses {
    AnchorLosses::evaluate(report, Modulation::ReliabilityStopgrad, gamma)
}

/// Same value as [`rc_loss`] but differentiated through `p^gamma`.
pub fn rc_loss_kept_gradient(report: &ReliabilityReport, gamma: f64) -> AnchorLosses {
    AnchorLosses::evaluate(report, Modulation::ReliabilityKept, gamma)
}

/// `-(1 - p)^gamma log p`, differentiated through the factor.
pub fn focal_loss(report: &ReliabilityReport, gamma: f64) -> AnchorLosses {
    AnchorLosses::evaluate(report, Modulation::Focal, gamma)
}

/// Batch-level scale of the reliability-guided loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchScale {
    pub loss: f64,
    pub alpha: f64,
}

/// `(alpha / m) sum_i L_i` where `alpha = sum L_{gamma=0} / sum L` is a constant.
pub fn rc_batch_loss(per_anchor: &[f64], per_anchor_gamma_zero: &[f64]) -> BatchScale {
    let m = per_anchor.len();
    if m == 0 {
        return BatchScale { loss: 0.0, alpha: 1.0 };
    }
    let den: f64 = per_anchor.iter().sum();
    let num: f64 = per_anchor_gamma_zero.iter().sum();
    let alpha = if den > 0.0 && num.is_finite() { num / den } else { 1.0 };
    BatchScale {
        loss: alpha * den / m as f64,
        alpha,
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Value and gradients of the memory-queue loss.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueLossOutput {
    /// Mean over anchors of the per-anchor mean softplus.
    pub value: f64,
    pub per_anchor: Vec<f64>,
    /// `d x m`, column per anchor.
    pub grad_anchors: Vec<f64>,
    /// One `d x k_i` block per anchor.
    pub grad_negatives: Vec<Vec<f64>>,
    /// Anchors that had no negatives and contributed zero.
    pub flagged: Vec<usize>,
}

/// `L_Q(x_i) = (1/k) sum_j ln(1 + exp(x_i . f_j))`, averaged over anchors.
pub fn queue_loss(anchors: &FeatureMatrix, negatives: &[FeatureMatrix]) -> Result<QueueLossOutput> {
    if negatives.len() != anchors.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            actual: negatives.len(),
        });
    }
    let d = anchors.dim();
    let m = anchors.len();
    let mut per_anchor = Vec::with_capacity(m);
    let mut grad_anchors = vec![0.0; d * m];
    let mut grad_negatives = Vec::with_capacity(m);
    let mut flagged = Vec::new();
    let inv_m = if m == 0 { 0.0 } else { 1.0 / m as f64 };
    for (i, (x, negs)) in anchors.columns().zip(negatives).enumerate() {
        if negs.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: negs.dim(),
            });
        }
        let k = negs.len();
        if k == 0 {
            flagged.push(i);
            per_anchor.push(0.0);
            grad_negatives.push(Vec::new());
            continue;
        }
        let inv_k = 1.0 / k as f64;
        let mut total = 0.0;
        let mut gneg = vec![0.0; d * k];
        let gx = &mut grad_anchors[i * d..(i + 1) * d];
        for (j, f) in negs.columns().enumerate() {
            let s = dot(x, f);
            total += softplus(s);
            let w = sigmoid(s) * inv_k * inv_m;
            for t in 0..d {
                gx[t] += w * f[t];
                gneg[j * d + t] = w * x[t];
            }
        }
        per_anchor.push(total * inv_k);
        grad_negatives.push(gneg);
    }
    let value = per_anchor.iter().sum::<f64>() * inv_m;
    Ok(QueueLossOutput {
        value,
        per_anchor,
        grad_anchors,
        grad_negatives,
        flagged,
    })
}

/// `L = L_RC + lambda * L_Q`.
#[inline]
pub fn total_loss(rc: f64, queue: f64, lambda: f64) -> f64 {
    rc + lambda * queue
}

/// Anchors are rows of `association`, candidates its columns.
///
/// Indices refer to columns of the embedding matrix passed to [`objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveBlock {
    pub anchors: Vec<usize>,
    pub candidates: Vec<usize>,
    pub association: AssociationMatrix,
}

/// Queue negatives for one embedding column.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorNegatives {
    pub anchor: usize,
    pub negatives: FeatureMatrix,
}

/// Quantities the objective treats as constants during differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenFactors {
    pub alpha: f64,
    /// Per-anchor `p^gamma` in block order (stop-gradient modulation only).
    pub weights: Vec<f64>,
}

/// Full objective value, diagnostics, and gradient with respect to the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    pub rc: f64,
    pub queue: f64,
    pub alpha: f64,
    /// Reliability of every anchor in block order.
    pub reliabilities: Vec<f64>,
    /// `d x N` gradient, one column per embedding.
    pub grad: Vec<f64>,
    /// Gradient with respect to each anchor's queue negatives (constants for the optimizer).
    pub grad_negatives: Vec<Vec<f64>>,
    pub queue_flagged: usize,
    pub frozen: FrozenFactors,
}

fn block_similarities(emb: &FeatureMatrix, block: &PositiveBlock) -> Matrix {
    let mut data = Vec::with_capacity(block.anchors.len() * block.candidates.len());
    for &a in &block.anchors {
        let x = emb.col(a);
        for &c in &block.candidates {
            data.push(dot(x, emb.col(c)));
        }
    }
    Matrix::from_row_major(block.anchors.len(), block.candidates.len(), data)
        .expect("block shape")
}

fn queue_anchor_matrix(emb: &FeatureMatrix, negatives: &[AnchorNegatives]) -> FeatureMatrix {
    let idx: Vec<usize> = negatives.iter().map(|n| n.anchor).collect();
    emb.select(&idx)
}

/// `L_RC + lambda L_Q` over a batch of positive blocks and queue negatives.
///
/// `alpha` and, for the stop-gradient modulation, every `p^gamma` are constants.
pub fn objective(
    emb: &FeatureMatrix,
    blocks: &[PositiveBlock],
    negatives: &[AnchorNegatives],
    cfg: &LossConfig,
) -> Result<LossOutput> {
    let d = emb.dim();
    let mut grad = vec![0.0; emb.as_slice().len()];
    let mut reports = Vec::with_capacity(blocks.len());
    let mut losses = Vec::with_capacity(blocks.len());
    let mut values = Vec::new();
    let mut values_zero = Vec::new();
    let mut weights = Vec::new();
    for block in blocks {
        let sim = block_similarities(emb, block);
        let report = reliability_from_similarities(&sim, &block.association, cfg.tau)?;
        let anchor_losses = AnchorLosses::evaluate(&report, cfg.modulation, cfg.gamma);
        values.extend_from_slice(&anchor_losses.values);
        values_zero.extend(report.log_p.iter().map(|lp| -lp));
        weights.extend(report.p.iter().map(|&p| libm::pow(p, cfg.gamma)));
        reports.push(report);
        losses.push(anchor_losses);
    }

    let scale = match cfg.modulation {
        Modulation::ReliabilityStopgrad | Modulation::ReliabilityKept => rc_batch_loss(&values, &values_zero),
        Modulation::Focal | Modulation::None => BatchScale {
            loss: if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 },
            alpha: 1.0,
        },
    };
    let per_anchor_scale = if values.is_empty() {
        0.0
    } else {
        scale.alpha / values.len() as f64
    };

    for ((block, report), anchor_losses) in blocks.iter().zip(&reports).zip(&losses) {
        let g = anchor_losses.similarity_gradient(report, per_anchor_scale);
        for (r, &a) in block.anchors.iter().enumerate() {
            for (c, &b) in block.candidates.iter().enumerate() {
                let w = g.get(r, c);
                if w == 0.0 {
                    continue;
                }
                for t in 0..d {
                    grad[a * d + t] += w * emb.col(b)[t];
                    grad[b * d + t] += w * emb.col(a)[t];
                }
            }
        }
    }

    let (queue_value, grad_negatives, queue_flagged) = if negatives.is_empty() || cfg.lambda == 0.0 {
        (0.0, Vec::new(), 0)
    } else {
        let anchors = queue_anchor_matrix(emb, negatives);
        let negs: Vec<FeatureMatrix> = negatives.iter().map(|n| n.negatives.clone()).collect();
        let q = queue_loss(&anchors, &negs)?;
        for (i, n) in negatives.iter().enumerate() {
            for t in 0..d {
                grad[n.anchor * d + t] += cfg.lambda * q.grad_anchors[i * d + t];
            }
        }
        let gneg = q
            .grad_negatives
            .into_iter()
            .map(|g| g.into_iter().map(|v| cfg.lambda * v).collect())
            .collect();
        (q.value, gneg, q.flagged.len())
    };

    Ok(LossOutput {
        total: total_loss(scale.loss, queue_value, cfg.lambda),
        rc: scale.loss,
        queue: queue_value,
        alpha: scale.alpha,
        reliabilities: reports.iter().flat_map(|r| r.p.iter().copied()).collect(),
        grad,
        grad_negatives,
        queue_flagged,
        frozen: FrozenFactors {
            alpha: scale.alpha,
            weights,
        },
    })
}

/// Value of [`objective`] with `alpha` and the stop-gradient weights pinned to `frozen`.
///
/// Finite differences of this function reproduce the analytic gradient of [`objective`].
pub fn objective_value_frozen(
    emb: &FeatureMatrix,
    blocks: &[PositiveBlock],
    negatives: &[AnchorNegatives],
    cfg: &LossConfig,
    frozen: &FrozenFactors,
) -> Result<f64> {
    let mut rc_sum = 0.0;
    let mut count = 0usize;
    for block in blocks {
        let sim = block_similarities(emb, block);
        let report = reliability_from_similarities(&sim, &block.association, cfg.tau)?;
        for (&p, &lp) in report.p.iter().zip(&report.log_p) {
            rc_sum += match cfg.modulation {
                Modulation::ReliabilityStopgrad => -frozen.weights[count] * lp,
                mode => modulated_loss(mode, p, lp, cfg.gamma),
            };
            count += 1;
        }
    }
    let rc = if count == 0 {
        0.0
    } else {
        frozen.alpha * rc_sum / count as f64
    };
    let queue = if negatives.is_empty() || cfg.lambda == 0.0 {
        0.0
    } else {
        let anchors = queue_anchor_matrix(emb, negatives);
        let negs: Vec<FeatureMatrix> = negatives.iter().map(|n| n.negatives.clone()).collect();
        queue_loss(&anchors, &negs)?.value
    };
    Ok(total_loss(rc, queue, cfg.lambda))
}
