//! The learned object: weighted intra-slice matrix `W` (d×d) and stacked
//! inter-slice lag matrices `A` ([A₁ᵀ; …; A_pᵀ], (p·d)×d), plus thresholding
//! to binary graphs and file round trips.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDbn<T> {
    d: usize,
    p: usize,
    w: Mat<T>,
    a: Mat<T>,
}

impl<T: Scalar> WeightedDbn<T> {
    pub fn new(w: Mat<T>, a: Mat<T>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Dim(format!(
                "intra-slice matrix must be square, got {}x{}",
                w.rows(),
                w.cols()
            )));
        }
        let d = w.rows();
        if d == 0 {
            return Err(Error::Dim("need at least one variable".into()));
        }
        if a.cols() != d || a.rows() % d != 0 || a.rows() == 0 {
            return Err(Error::Dim(format!(
                "lag matrix must stack p blocks of {d}x{d}, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        Ok(WeightedDbn {
            d,
            p: a.rows() / d,
            w,
            a,
        })
    }

    pub fn zero(d: usize, p: usize) -> Self {
        WeightedDbn {
            d,
            p,
            w: Mat::zeros(d, d),
            a: Mat::zeros(p * d, d),
        }
    }

    /// Builds the stacked lag matrix from per-lag blocks.
    pub fn from_lag_blocks(w: Mat<T>, blocks: &[Mat<T>]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dim("need at least one lag block".into()));
        }
        let refs: Vec<&Mat<T>> = blocks.iter().collect();
        WeightedDbn::new(w, Mat::vstack(&refs)?)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn w(&self) -> &Mat<T> {
        &self.w
    }

    pub fn a(&self) -> &Mat<T> {
        &self.a
    }

    /// Diagonal entries of `W` are optimization artifacts; evaluation and
    /// serialization always see them as zero.
    pub fn with_zeroed_diagonal(mut self) -> Self {
        self.w.zero_diagonal();
        self
    }

    /// Rows `(i-1)·d .. i·d` of the stacked lag matrix, `i` in `1..=p`.
    pub fn lag_block(&self, i: usize) -> Result<Mat<T>> {
        if i == 0 || i > self.p {
            return Err(Error::Argument(format!(
                "lag index {i} out of range 1..={}",
                self.p
            )));
        }
        Ok(self.a.row_block((i - 1) * self.d, self.d))
    }

    /// Keeps edges with `|weight| > tau`; the diagonal of `W` is always dropped.
    pub fn threshold(&self, tau_w: f64, tau_a: f64) -> Result<BinaryDbn> {
        if tau_w < 0.0 || tau_a < 0.0 {
            return Err(Error::Argument(format!(
                "thresholds must be nonnegative, got ({tau_w}, {tau_a})"
            )));
        }
        let tw = T::cast(tau_w);
        let ta = T::cast(tau_a);
        let mut w_edges = BTreeSet::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if i != j && self.w[(i, j)].abs() > tw {
                    w_edges.insert((i, j));
                }
            }
        }
        let mut a_edges = BTreeSet::new();
        for lag in 1..=self.p {
            for i in 0..self.d {
                for j in 0..self.d {
                    if self.a[((lag - 1) * self.d + i, j)].abs() > ta {
                        a_edges.insert((lag, i, j));
                    }
                }
            }
        }
        Ok(BinaryDbn {
            d: self.d,
            p: self.p,
            w_edges,
            a_edges,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = DbnDoc {
            d: self.d,
            p: self.p,
            w: rows_f64(&self.w),
            a: rows_f64(&self.a),
        };
        let mut file = fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, &doc)
            .map_err(|e| Error::Numeric(format!("json encode: {e}")))?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(&path)?;
        let doc: DbnDoc = serde_json::from_str(&text).map_err(|e| Error::Ingest {
            path: path.as_ref().display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let w = mat_from_f64(&doc.w)?;
        let a = mat_from_f64(&doc.a)?;
        let dbn = WeightedDbn::new(w, a)?;
        if dbn.d != doc.d || dbn.p != doc.p {
            return Err(Error::Dim(format!(
                "declared (d={}, p={}) but matrices give (d={}, p={})",
                doc.d, doc.p, dbn.d, dbn.p
            )));
        }
        Ok(dbn)
    }

    /// One CSV file per matrix, header row `j0..j{d-1}`.
    pub fn write_csv(&self, w_path: impl AsRef<Path>, a_path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(&self.w, w_path)?;
        write_matrix_csv(&self.a, a_path)
    }
}

pub fn write_matrix_csv<T: Scalar>(mat: &Mat<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..mat.cols()).map(|j| format!("j{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..mat.rows() {
        let row: Vec<String> = mat.row(i).iter().map(|v| format!("{}", v.lossy_f64())).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Mat<T>> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path)?;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 && line.starts_with('j') {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Ingest {
                path: path_str.clone(),
                line: idx + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            row.push(T::cast(v));
        }
        rows.push(row);
    }
    Mat::from_rows(&rows)
}

#[derive(Serialize, Deserialize)]
struct DbnDoc {
    d: usize,
    p: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

fn rows_f64<T: Scalar>(m: &Mat<T>) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.lossy_f64()).collect())
        .collect()
}

fn mat_from_f64<T: Scalar>(rows: &[Vec<f64>]) -> Result<Mat<T>> {
    let converted: Vec<Vec<T>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| T::cast(v)).collect())
        .collect();
    Mat::from_rows(&converted)
}

/// Thresholded graph: directed intra-slice edges and oriented lag edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryDbn {
    d: usize,
    p: usize,
    /// Directed pairs `(i, j)` meaning `i -> j`, never `i == j`.
    w_edges: BTreeSet<(usize, usize)>,
    /// `(lag, i, j)` with `lag` in `1..=p`.
    a_edges: BTreeSet<(usize, usize, usize)>,
}

impl BinaryDbn {
    pub fn new(
        d: usize,
        p: usize,
        w_edges: BTreeSet<(usize, usize)>,
        a_edges: BTreeSet<(usize, usize, usize)>,
    ) -> Result<Self> {
        if w_edges.iter().any(|&(i, j)| i == j || i >= d || j >= d) {
            return Err(Error::Argument(
                "intra-slice edges must be off-diagonal and in range".into(),
            ));
        }
        if a_edges
            .iter()
            .any(|&(l, i, j)| l == 0 || l > p || i >= d || j >= d)
        {
            return Err(Error::Argument("lag edges out of range".into()));
        }
        Ok(BinaryDbn {
            d,
            p,
            w_edges,
            a_edges,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn w_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.w_edges
    }

    pub fn a_edges(&self) -> &BTreeSet<(usize, usize, usize)> {
        &self.a_edges
    }

    pub fn has_w_edge(&self, i: usize, j: usize) -> bool {
        self.w_edges.contains(&(i, j))
    }

    /// Kahn's algorithm on the intra-slice edges.
    pub fn is_acyclic_w(&self) -> bool {
        let mut indegree = vec![0usize; self.d];
        for &(_, j) in &self.w_edges {
            indegree[j] += 1;
        }
        let mut queue: Vec<usize> = (0..self.d).filter(|&v| indegree[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &(i, j) in &self.w_edges {
                if i == v {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        seen == self.d
    }
}

/// Per-client ground truth for the heterogeneous setting; all clients share
/// `d` and `p` but have their own weighted graphs.
#[derive(Clone, Debug)]
pub struct HeterogeneousTruth<T> {
    truths: Vec<WeightedDbn<T>>,
}

impl<T: Scalar> HeterogeneousTruth<T> {
    pub fn new(truths: Vec<WeightedDbn<T>>) -> Result<Self> {
        let first = truths
            .first()
            .ok_or_else(|| Error::Argument("need at least one client truth".into()))?;
        let (d, p) = (first.d(), first.p());
        if truths.iter().any(|t| t.d() != d || t.p() != p) {
            return Err(Error::Dim(
                "all client truths must share the same d and p".into(),
            ));
        }
        Ok(HeterogeneousTruth { truths })
    }

    pub fn clients(&self) -> usize {
        self.truths.len()
    }

    pub fn truth(&self, k: usize) -> &WeightedDbn<T> {
        &self.truths[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightedDbn<T>> {
        self.truths.iter()
    }
}
