//! Structure-recovery metrics (SHD, TPR, FDR and their client means) and
//! ranking metrics (AUROC, AUPR) over combined edge scores.

use std::fs;
use std::path::Path;

use crate::dbn::{BinaryDbn, WeightedDbn};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;

/// Exact-direction confusion counts; `reversed` applies to `W` only and
/// counts pairs where only the orientation is wrong.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub reversed: usize,
}

impl ConfusionCounts {
    pub fn tpr(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn fdr(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.fp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// Missing + extra + misoriented, with a pure reversal costing one edit.
    pub fn shd(&self) -> usize {
        self.fn_ + self.fp - self.reversed
    }
}

fn check_shapes(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<()> {
    if pred.d() != truth.d() || pred.p() != truth.p() {
        return Err(Error::Dim(format!(
            "graph shapes differ: (d={}, p={}) vs (d={}, p={})",
            pred.d(),
            pred.p(),
            truth.d(),
            truth.p()
        )));
    }
    Ok(())
}

pub fn confusion_w(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<ConfusionCounts> {
    check_shapes(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for &(i, j) in truth.w_edges() {
        if pred.has_w_edge(i, j) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
            if pred.has_w_edge(j, i) && !truth.has_w_edge(j, i) {
                c.reversed += 1;
            }
        }
    }
    for &(i, j) in pred.w_edges() {
        if !truth.has_w_edge(i, j) {
            c.fp += 1;
        }
    }
    Ok(c)
}

pub fn confusion_a(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<ConfusionCounts> {
    check_shapes(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for edge in truth.a_edges() {
        if pred.a_edges().contains(edge) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    for edge in pred.a_edges() {
        if !truth.a_edges().contains(edge) {
            c.fp += 1;
        }
    }
    Ok(c)
}

/// `(shd_w, shd_a)`: intra-slice distance counts reversals once, lag edges
/// have fixed orientation so only additions and deletions count.
pub fn shd(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<(usize, usize)> {
    Ok((confusion_w(pred, truth)?.shd(), confusion_a(pred, truth)?.shd()))
}

/// `((tpr_w, fdr_w), (tpr_a, fdr_a))` under exact-direction matching.
/// Empty prediction has FDR 0; empty truth has TPR 1.
pub fn tpr_fdr(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<((f64, f64), (f64, f64))> {
    let cw = confusion_w(pred, truth)?;
    let ca = confusion_a(pred, truth)?;
    Ok(((cw.tpr(), cw.fdr()), (ca.tpr(), ca.fdr())))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMetrics {
    pub shd: usize,
    pub tpr: f64,
    pub fdr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub w: PairMetrics,
    pub a: PairMetrics,
    pub auroc: Option<f64>,
    pub aupr: Option<f64>,
}

pub fn evaluate(pred: &BinaryDbn, truth: &BinaryDbn) -> Result<MetricsReport> {
    let cw = confusion_w(pred, truth)?;
    let ca = confusion_a(pred, truth)?;
    Ok(MetricsReport {
        w: PairMetrics {
            shd: cw.shd(),
            tpr: cw.tpr(),
            fdr: cw.fdr(),
        },
        a: PairMetrics {
            shd: ca.shd(),
            tpr: ca.tpr(),
            fdr: ca.fdr(),
        },
        auroc: None,
        aupr: None,
    })
}

/// Arithmetic means across clients (mSHD, mTPR, mFDR per matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct MeanMetrics {
    pub shd_w: f64,
    pub tpr_w: f64,
    pub fdr_w: f64,
    pub shd_a: f64,
    pub tpr_a: f64,
    pub fdr_a: f64,
    pub per_client: Vec<MetricsReport>,
}

pub fn mean_metrics(reports: &[MetricsReport]) -> Result<MeanMetrics> {
    if reports.is_empty() {
        return Err(Error::Argument("need at least one report".into()));
    }
    let k = reports.len() as f64;
    Ok(MeanMetrics {
        shd_w: reports.iter().map(|r| r.w.shd as f64).sum::<f64>() / k,
        tpr_w: reports.iter().map(|r| r.w.tpr).sum::<f64>() / k,
        fdr_w: reports.iter().map(|r| r.w.fdr).sum::<f64>() / k,
        shd_a: reports.iter().map(|r| r.a.shd as f64).sum::<f64>() / k,
        tpr_a: reports.iter().map(|r| r.a.tpr).sum::<f64>() / k,
        fdr_a: reports.iter().map(|r| r.a.fdr).sum::<f64>() / k,
        per_client: reports.to_vec(),
    })
}

/// Element-wise score combination `|W| + Σ_lag |A_lag|`, the ranking input
/// for gold-standard evaluation.
pub fn combined_scores<T: Scalar>(dbn: &WeightedDbn<T>) -> Mat<T> {
    let d = dbn.d();
    let mut scores = dbn.w().map(|v| v.abs());
    for lag in 1..=dbn.p() {
        let block = dbn.a().row_block((lag - 1) * d, d);
        for i in 0..d {
            for j in 0..d {
                scores[(i, j)] += block[(i, j)].abs();
            }
        }
    }
    scores
}

/// Rank-based AUROC (ties share the average rank, equivalent to trapezoidal
/// integration over tie groups) and step-integrated AUPR.
pub fn auroc_aupr<T: Scalar>(
    scores: &Mat<T>,
    gold: &Mat<T>,
    mask_diagonal: bool,
) -> Result<(f64, f64)> {
    if scores.rows() != gold.rows() || scores.cols() != gold.cols() {
        return Err(Error::Dim(format!(
            "scores are {}x{} but gold standard is {}x{}",
            scores.rows(),
            scores.cols(),
            gold.rows(),
            gold.cols()
        )));
    }
    let half = T::cast(0.5);
    let mut cells: Vec<(f64, bool)> = Vec::new();
    for i in 0..scores.rows() {
        for j in 0..scores.cols() {
            if mask_diagonal && i == j {
                continue;
            }
            cells.push((scores[(i, j)].lossy_f64(), gold[(i, j)] > half));
        }
    }
    let n_pos = cells.iter().filter(|(_, positive)| *positive).count();
    let n_neg = cells.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!(
            "gold standard needs both classes, has {n_pos} positives and {n_neg} negatives"
        )));
    }

    // Ascending by score; ties resolved by assigning the group's average rank.
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must be comparable"));
    let mut rank_sum_pos = 0.0;
    let mut idx = 0;
    while idx < cells.len() {
        let mut end = idx + 1;
        while end < cells.len() && cells[end].0 == cells[idx].0 {
            end += 1;
        }
        let avg_rank = (idx + 1 + end) as f64 / 2.0; // ranks are 1-based
        let group_pos = cells[idx..end].iter().filter(|(_, p)| *p).count();
        rank_sum_pos += avg_rank * group_pos as f64;
        idx = end;
    }
    let auroc = (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0)
        / (n_pos as f64 * n_neg as f64);

    // AUPR: Σ (R_i - R_{i-1})·P_i over descending score thresholds, tie
    // groups processed as one threshold.
    let mut aupr = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut idx = cells.len();
    while idx > 0 {
        let mut start = idx - 1;
        while start > 0 && cells[start - 1].0 == cells[idx - 1].0 {
            start -= 1;
        }
        for cell in &cells[start..idx] {
            if cell.1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        aupr += (recall - prev_recall) * precision;
        prev_recall = recall;
        idx = start;
    }
    Ok((auroc, aupr))
}

/// Reads a gold-standard edge list with whitespace-separated lines
/// `G<i> G<j> {0|1}` (1-based labels); unlisted pairs are negatives.
/// When `d` is `None` the size is inferred from the largest label.
pub fn read_gold_edge_list<T: Scalar>(
    path: impl AsRef<Path>,
    d: Option<usize>,
) -> Result<Mat<T>> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path)?;
    let ingest_err = |line: usize, msg: String| Error::Ingest {
        path: path_str.clone(),
        line,
        msg,
    };
    let parse_label = |token: &str, line: usize| -> Result<usize> {
        let digits = token.trim_start_matches(|c: char| !c.is_ascii_digit());
        let idx: usize = digits
            .parse()
            .map_err(|_| ingest_err(line, format!("bad node label {token:?}")))?;
        if idx == 0 {
            return Err(ingest_err(line, format!("node labels are 1-based: {token:?}")));
        }
        Ok(idx - 1)
    };

    let mut edges: Vec<(usize, usize, bool)> = Vec::new();
    let mut max_idx = 0usize;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(ingest_err(
                lineno,
                format!("expected `Gi Gj 0|1`, got {} tokens", tokens.len()),
            ));
        }
        let from = parse_label(tokens[0], lineno)?;
        let to = parse_label(tokens[1], lineno)?;
        let flag = match tokens[2] {
            "0" => false,
            "1" => true,
            other => return Err(ingest_err(lineno, format!("bad edge flag {other:?}"))),
        };
        max_idx = max_idx.max(from).max(to);
        edges.push((from, to, flag));
    }
    let d = d.unwrap_or(max_idx + 1);
    if max_idx >= d {
        return Err(Error::Argument(format!(
            "edge list references node {} but d = {d}",
            max_idx + 1
        )));
    }
    let mut gold = Mat::zeros(d, d);
    for (from, to, flag) in edges {
        gold[(from, to)] = if flag { T::one() } else { T::zero() };
    }
    Ok(gold)
}

/// Reads a binary adjacency matrix from CSV (optional non-numeric header row).
pub fn read_gold_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Mat<T>> {
    crate::dbn::read_matrix_csv(path)
}
