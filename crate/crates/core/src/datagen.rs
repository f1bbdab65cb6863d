//! Seeded synthetic ground truth, SVAR simulation, lagged design matrices,
//! and client partitioning.
//!
//! All randomness flows from the config seed through deterministic stream
//! derivation, so identical seeds give bit-identical datasets regardless of
//! how generation is parallelized.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dbn::{HeterogeneousTruth, WeightedDbn};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::numkit::lu_solve;
use crate::scalar::Scalar;

pub const STREAM_INTRA: u64 = 1;
pub const STREAM_INTER: u64 = 2;
/// Noise substream tag: the simulator samples standard normals realization by
/// realization, step by step, coordinate by coordinate from
/// `ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_NOISE))`.
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_CLIENT_BASE: u64 = 0x1000;

/// SplitMix64 finalizer over `(master, stream)`, for independent substreams.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How inter-slice weight magnitudes shrink with the lag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayMode {
    /// Lag `i` scaled by `1/eta^(i-1)`: influence fades with temporal distance.
    PerLag,
    /// Every lag scaled by the same `1/eta^(p-1)`.
    Uniform,
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub d: usize,
    pub p: usize,
    /// Target mean degree (both directions) of the intra-slice DAG.
    pub intra_mean_degree: f64,
    /// Target mean out-degree per lag block.
    pub inter_mean_out_degree: f64,
    /// Base of the exponential decay of inter-slice weights, >= 1.
    pub eta: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub decay: DecayMode,
    /// Steps simulated and discarded before the recorded series.
    pub burn_in: usize,
}

impl GenConfig {
    pub fn new(d: usize, p: usize, seed: u64) -> Self {
        GenConfig {
            d,
            p,
            intra_mean_degree: 4.0,
            inter_mean_out_degree: 1.0,
            eta: 1.5,
            noise_std: 1.0,
            seed,
            decay: DecayMode::PerLag,
            burn_in: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Argument(format!("need d >= 2, got {}", self.d)));
        }
        if self.p < 1 {
            return Err(Error::Argument("need p >= 1".into()));
        }
        if self.eta < 1.0 {
            return Err(Error::Argument(format!("need eta >= 1, got {}", self.eta)));
        }
        if !(self.noise_std > 0.0) {
            return Err(Error::Argument(format!(
                "need noise_std > 0, got {}",
                self.noise_std
            )));
        }
        if self.intra_mean_degree < 0.0 || self.inter_mean_out_degree < 0.0 {
            return Err(Error::Argument("mean degrees must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Low-connectivity preset: expected node degree `⌊d/2⌋ - d/5`.
pub fn low_connectivity_degree(d: usize) -> f64 {
    (d / 2) as f64 - d as f64 / 5.0
}

/// High-connectivity preset: expected node degree `d - d/5`.
pub fn high_connectivity_degree(d: usize) -> f64 {
    d as f64 - d as f64 / 5.0
}

fn sample_signed_weight<T: Scalar>(rng: &mut ChaCha8Rng, scale: f64) -> T {
    let magnitude = rng.gen_range(0.3..0.5);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    T::cast(sign * magnitude * scale)
}

/// Weighted intra-slice DAG: Bernoulli(`degree/d`) edges on the strict lower
/// triangle, weights from `±[0.3, 0.5]`, then a random node relabeling.
pub fn gen_intra_dag<T: Scalar>(cfg: &GenConfig) -> Result<Mat<T>> {
    cfg.validate()?;
    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INTRA));
    let prob = (cfg.intra_mean_degree / d as f64).min(1.0);
    let mut tri = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            if rng.gen_range(0.0..1.0) < prob {
                tri[(i, j)] = sample_signed_weight(&mut rng, 1.0);
            }
        }
    }
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut w = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if tri[(i, j)] != T::zero() {
                w[(perm[i], perm[j])] = tri[(i, j)];
            }
        }
    }
    Ok(w)
}

/// Stacked weighted lag matrices: each lag block is an independent bipartite
/// Bernoulli(`out_degree/d`) graph with decayed weight magnitudes.
pub fn gen_inter_graphs<T: Scalar>(cfg: &GenConfig) -> Result<Mat<T>> {
    cfg.validate()?;
    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INTER));
    let prob = (cfg.inter_mean_out_degree / d as f64).min(1.0);
    let mut a = Mat::zeros(cfg.p * d, d);
    for lag in 1..=cfg.p {
        let scale = match cfg.decay {
            DecayMode::PerLag => 1.0 / cfg.eta.powi(lag as i32 - 1),
            DecayMode::Uniform => 1.0 / cfg.eta.powi(cfg.p as i32 - 1),
        };
        for i in 0..d {
            for j in 0..d {
                if rng.gen_range(0.0..1.0) < prob {
                    a[((lag - 1) * d + i, j)] = sample_signed_weight(&mut rng, scale);
                }
            }
        }
    }
    Ok(a)
}

/// Intra- and inter-slice truth from one config.
pub fn gen_truth<T: Scalar>(cfg: &GenConfig) -> Result<WeightedDbn<T>> {
    WeightedDbn::new(gen_intra_dag(cfg)?, gen_inter_graphs(cfg)?)
}

/// Simulates `m` realizations of length `t_len + 1` from the structural model:
/// the first `p` states are pure noise, then
/// `x_t = (I - W)⁻ᵀ (Σᵢ Aᵢᵀ x_{t-i} + u_t)` with `u_t ~ N(0, noise_std²·I)`.
pub fn simulate_svar<T: Scalar>(
    truth: &WeightedDbn<T>,
    t_len: usize,
    m: usize,
    noise_std: f64,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<Mat<T>>> {
    let d = truth.d();
    let p = truth.p();
    if t_len < p {
        return Err(Error::Argument(format!(
            "series length T={t_len} must be at least the order p={p}"
        )));
    }
    let eye = Mat::identity(d);
    let propagate = lu_solve(&eye.sub(truth.w()).transpose(), &eye)
        .map_err(|e| e.with_context("I - W is singular"))?;
    let lag_t: Vec<Mat<T>> = (1..=p)
        .map(|i| truth.lag_block(i).map(|b| b.transpose()))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_NOISE));
    let total = burn_in + t_len + 1;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut series = Mat::zeros(total, d);
        let mut noise = vec![T::zero(); d];
        for t in 0..total {
            for v in noise.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = T::cast(z * noise_std);
            }
            if t < p {
                series.row_mut(t).copy_from_slice(&noise);
            } else {
                let mut rhs = noise.clone();
                for (i, a_t) in lag_t.iter().enumerate() {
                    let prev = series.row(t - i - 1).to_vec();
                    let contrib = a_t.mul_vec(&prev);
                    for (r, c) in rhs.iter_mut().zip(contrib) {
                        *r += c;
                    }
                }
                let x = propagate.mul_vec(&rhs);
                series.row_mut(t).copy_from_slice(&x);
            }
        }
        out.push(series.row_block(burn_in, t_len + 1));
    }
    Ok(out)
}

/// Lagged design matrices stacked over realizations: row `r` of `X_t` is
/// `x_{p+r}` and row `r` of `X_lag` is `[x_{p+r-1}, …, x_{p+r-p}]`.
pub fn build_designs<T: Scalar>(series: &[Mat<T>], p: usize) -> Result<(Mat<T>, Mat<T>)> {
    if p == 0 {
        return Err(Error::Argument("need p >= 1".into()));
    }
    let first = series
        .first()
        .ok_or_else(|| Error::Argument("need at least one realization".into()))?;
    let d = first.cols();
    let mut x_t_rows = Vec::new();
    let mut x_lag_rows = Vec::new();
    for (idx, realization) in series.iter().enumerate() {
        if realization.cols() != d {
            return Err(Error::Dim(format!(
                "realization {idx} has {} variables, expected {d}",
                realization.cols()
            )));
        }
        if realization.rows() < p + 1 {
            return Err(Error::Argument(format!(
                "realization {idx} has {} steps, need at least p+1 = {}",
                realization.rows(),
                p + 1
            )));
        }
        for r in 0..realization.rows() - p {
            x_t_rows.push(realization.row(p + r).to_vec());
            let mut lag_row = Vec::with_capacity(p * d);
            for i in 1..=p {
                lag_row.extend_from_slice(realization.row(p + r - i));
            }
            x_lag_rows.push(lag_row);
        }
    }
    Ok((Mat::from_rows(&x_t_rows)?, Mat::from_rows(&x_lag_rows)?))
}

/// One client's share of the lagged designs.
#[derive(Clone, Debug)]
pub struct ClientDataset<T> {
    x_t: Mat<T>,
    x_lag: Mat<T>,
}

impl<T: Scalar> ClientDataset<T> {
    pub fn new(x_t: Mat<T>, x_lag: Mat<T>) -> Result<Self> {
        if x_t.rows() != x_lag.rows() {
            return Err(Error::Dim(format!(
                "design row mismatch: {} vs {}",
                x_t.rows(),
                x_lag.rows()
            )));
        }
        if x_t.rows() == 0 {
            return Err(Error::Argument("client dataset has no rows".into()));
        }
        if x_t.cols() == 0 || x_lag.cols() % x_t.cols() != 0 || x_lag.cols() == 0 {
            return Err(Error::Dim(format!(
                "lag design width {} is not a positive multiple of d = {}",
                x_lag.cols(),
                x_t.cols()
            )));
        }
        Ok(ClientDataset { x_t, x_lag })
    }

    pub fn x_t(&self) -> &Mat<T> {
        &self.x_t
    }

    pub fn x_lag(&self) -> &Mat<T> {
        &self.x_lag
    }

    /// Effective sample size.
    pub fn n_k(&self) -> usize {
        self.x_t.rows()
    }

    pub fn d(&self) -> usize {
        self.x_t.cols()
    }

    pub fn p(&self) -> usize {
        self.x_lag.cols() / self.x_t.cols()
    }

    /// Sufficient statistics for the least-squares loss.
    pub fn gram(&self) -> Gram<T> {
        let inv_n = T::cast(1.0 / self.n_k() as f64);
        Gram {
            s: self.x_t.tn_mul(&self.x_t).scale(inv_n),
            m: self.x_t.tn_mul(&self.x_lag).scale(inv_n),
            n: self.x_lag.tn_mul(&self.x_lag).scale(inv_n),
        }
    }
}

/// Normalized Gram matrices `S = XᵗᵀXᵗ/n`, `M = XᵗᵀX_lag/n`, `N = X_lagᵀX_lag/n`.
#[derive(Clone, Debug)]
pub struct Gram<T> {
    pub s: Mat<T>,
    pub m: Mat<T>,
    pub n: Mat<T>,
}

impl<T: Scalar> Gram<T> {
    pub fn d(&self) -> usize {
        self.s.rows()
    }

    pub fn pd(&self) -> usize {
        self.n.rows()
    }

    /// Least-squares loss `1/(2n)‖X_t - X_t·W - X_lag·A‖²_F` and its gradients,
    /// evaluated through the Gram matrices.
    pub fn loss_grad(&self, w: &Mat<T>, a: &Mat<T>) -> (T, Mat<T>, Mat<T>) {
        let u = self.s.matmul(w).add(&self.m.matmul(a));
        let v = self.m.tn_mul(w).add(&self.n.matmul(a));
        let m_t = self.m.transpose();
        let half = T::cast(0.5);
        let two = T::cast(2.0);
        let value = half
            * (self.s.trace() - two * self.s.dot(w) - two * m_t.dot(a) + w.dot(&u) + a.dot(&v));
        (value, u.sub(&self.s), v.sub(&m_t))
    }

    pub fn loss(&self, w: &Mat<T>, a: &Mat<T>) -> T {
        self.loss_grad(w, a).0
    }
}

/// Splits rows into contiguous per-client blocks; any remainder goes to the
/// first clients one row each.
pub fn partition<T: Scalar>(
    x_t: &Mat<T>,
    x_lag: &Mat<T>,
    k: usize,
) -> Result<Vec<ClientDataset<T>>> {
    if k == 0 {
        return Err(Error::Argument("need at least one client".into()));
    }
    let n = x_t.rows();
    if x_lag.rows() != n {
        return Err(Error::Dim("design row mismatch".into()));
    }
    if n < k {
        return Err(Error::Argument(format!(
            "cannot split {n} rows across {k} clients"
        )));
    }
    let base = n / k;
    let remainder = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for idx in 0..k {
        let size = base + usize::from(idx < remainder);
        out.push(ClientDataset::new(
            x_t.row_block(start, size),
            x_lag.row_block(start, size),
        )?);
        start += size;
    }
    Ok(out)
}

/// Shared truth, one simulated series of `n_total` effective samples,
/// partitioned across `k` clients.
pub struct HomogeneousScene<T> {
    pub truth: WeightedDbn<T>,
    pub datasets: Vec<ClientDataset<T>>,
}

pub fn gen_homogeneous<T: Scalar>(
    cfg: &GenConfig,
    n_total: usize,
    k: usize,
) -> Result<HomogeneousScene<T>> {
    cfg.validate()?;
    let truth = gen_truth(cfg)?;
    let t_len = n_total + cfg.p - 1;
    let series = simulate_svar(&truth, t_len, 1, cfg.noise_std, cfg.burn_in, cfg.seed)?;
    let (x_t, x_lag) = build_designs(&series, cfg.p)?;
    let datasets = partition(&x_t, &x_lag, k)?;
    Ok(HomogeneousScene { truth, datasets })
}

/// Independent truth and series per client, sub-seeded from the master seed;
/// no partitioning.
pub struct HeterogeneousScene<T> {
    pub truth: HeterogeneousTruth<T>,
    pub datasets: Vec<ClientDataset<T>>,
}

pub fn gen_heterogeneous<T: Scalar>(
    cfg: &GenConfig,
    k: usize,
    n_k: usize,
) -> Result<HeterogeneousScene<T>> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Argument("need at least one client".into()));
    }
    let mut truths = Vec::with_capacity(k);
    let mut datasets = Vec::with_capacity(k);
    for client in 0..k {
        let mut sub_cfg = cfg.clone();
        sub_cfg.seed = derive_seed(cfg.seed, STREAM_CLIENT_BASE + client as u64);
        let truth = gen_truth::<T>(&sub_cfg)?;
        let t_len = n_k + cfg.p - 1;
        let series = simulate_svar(
            &truth,
            t_len,
            1,
            cfg.noise_std,
            cfg.burn_in,
            sub_cfg.seed,
        )?;
        let (x_t, x_lag) = build_designs(&series, cfg.p)?;
        datasets.push(ClientDataset::new(x_t, x_lag)?);
        truths.push(truth);
    }
    Ok(HeterogeneousScene {
        truth: HeterogeneousTruth::new(truths)?,
        datasets,
    })
}

/// Writes realizations as CSV with columns `realization,t,v0..v{d-1}`.
pub fn write_series_csv<T: Scalar>(series: &[Mat<T>], path: impl AsRef<Path>) -> Result<()> {
    let d = series.first().map_or(0, |s| s.cols());
    let mut out = String::new();
    out.push_str("realization,t");
    for j in 0..d {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for (m, realization) in series.iter().enumerate() {
        for t in 0..realization.rows() {
            out.push_str(&format!("{m},{t}"));
            for v in realization.row(t) {
                out.push_str(&format!(",{}", v.lossy_f64()));
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_series_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Mat<T>>> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path)?;
    let ingest_err = |line: usize, msg: String| Error::Ingest {
        path: path_str.clone(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ingest_err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "realization" || fields[1] != "t" {
        return Err(ingest_err(
            1,
            "expected header realization,t,v0,...".into(),
        ));
    }
    let d = fields.len() - 2;

    let mut series: Vec<Vec<Vec<T>>> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != d + 2 {
            return Err(ingest_err(
                lineno,
                format!("expected {} fields, got {}", d + 2, parts.len()),
            ));
        }
        let m: usize = parts[0]
            .trim()
            .parse()
            .map_err(|_| ingest_err(lineno, format!("bad realization index {:?}", parts[0])))?;
        let t: usize = parts[1]
            .trim()
            .parse()
            .map_err(|_| ingest_err(lineno, format!("bad time index {:?}", parts[1])))?;
        if m == series.len() {
            series.push(Vec::new());
        } else if m + 1 != series.len() {
            return Err(ingest_err(
                lineno,
                format!("realization index {m} out of order"),
            ));
        }
        let realization = series.last_mut().expect("just ensured non-empty");
        if t != realization.len() {
            return Err(ingest_err(
                lineno,
                format!("time index {t} out of order, expected {}", realization.len()),
            ));
        }
        let mut row = Vec::with_capacity(d);
        for field in &parts[2..] {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| ingest_err(lineno, format!("not a number: {field:?}")))?;
            row.push(T::cast(v));
        }
        realization.push(row);
    }
    if series.is_empty() {
        return Err(ingest_err(1, "no data rows".into()));
    }
    series.iter().map(|rows| Mat::from_rows(rows)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_cfg() -> GenConfig {
        GenConfig::new(8, 2, 42)
    }

    #[test]
    fn identical_seeds_give_identical_scenes() {
        let a: HomogeneousScene<f64> = gen_homogeneous(&test_cfg(), 40, 4).unwrap();
        let b: HomogeneousScene<f64> = gen_homogeneous(&test_cfg(), 40, 4).unwrap();
        assert_eq!(a.truth, b.truth);
        for (x, y) in a.datasets.iter().zip(&b.datasets) {
            assert_eq!(x.x_t(), y.x_t());
            assert_eq!(x.x_lag(), y.x_lag());
        }
    }

    #[test]
    fn intra_weights_live_in_the_stated_band() {
        for seed in 0..20 {
            let mut cfg = test_cfg();
            cfg.seed = seed;
            let w: Mat<f64> = gen_intra_dag(&cfg).unwrap();
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    let v = w[(i, j)].abs();
                    assert!(v == 0.0 || (0.3..=0.5).contains(&v), "weight {v}");
                }
            }
        }
    }

    #[test]
    fn inter_decay_scales_deeper_lags() {
        let mut cfg = GenConfig::new(10, 3, 7);
        cfg.eta = 1.5;
        let a: Mat<f64> = gen_inter_graphs(&cfg).unwrap();
        let scale = 1.0 / 1.5f64.powi(2);
        for i in 0..10 {
            for j in 0..10 {
                let v = a[(20 + i, j)].abs();
                assert!(
                    v == 0.0 || (0.3 * scale..=0.5 * scale).contains(&v),
                    "lag-3 weight {v}"
                );
            }
        }
        // Uniform decay scales the first lag too.
        cfg.decay = DecayMode::Uniform;
        let a: Mat<f64> = gen_inter_graphs(&cfg).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let v = a[(i, j)].abs();
                assert!(v == 0.0 || v <= 0.5 * scale + 1e-12, "lag-1 weight {v}");
            }
        }
    }

    #[test]
    fn designs_layout_matches_the_lag_convention() {
        // p = 1, series (x0, x1, x2): X_t rows are (x1, x2), X_lag rows (x0, x1).
        let series = vec![Mat::from_fn(3, 2, |t, j| (10 * t + j) as f64)];
        let (x_t, x_lag) = build_designs(&series, 1).unwrap();
        assert_eq!(x_t.row(0), &[10.0, 11.0]);
        assert_eq!(x_t.row(1), &[20.0, 21.0]);
        assert_eq!(x_lag.row(0), &[0.0, 1.0]);
        assert_eq!(x_lag.row(1), &[10.0, 11.0]);
    }

    #[test]
    fn shortest_valid_series_gives_one_row() {
        let series = vec![Mat::from_fn(3, 2, |t, j| (t + j) as f64)];
        let (x_t, _) = build_designs(&series, 2).unwrap();
        assert_eq!(x_t.rows(), 1);
        assert!(build_designs(&series, 3).is_err());
    }

    #[test]
    fn partition_sizes_follow_the_remainder_rule() {
        let x = Mat::<f64>::zeros(10, 2);
        let xl = Mat::<f64>::zeros(10, 2);
        let parts = partition(&x, &xl, 3).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|c| c.n_k()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(partition(&x, &xl, 0).is_err());
        assert!(partition(&x, &xl, 11).is_err());
    }

    #[test]
    fn zero_noise_zero_graphs_give_zero_series() {
        let truth = WeightedDbn::<f64>::zero(3, 1);
        let series = simulate_svar(&truth, 10, 2, 0.0, 0, 5).unwrap();
        assert_eq!(series.len(), 2);
        for s in &series {
            assert_eq!(s.max_abs(), 0.0);
        }
    }

    #[test]
    fn series_csv_round_trip() {
        let truth: WeightedDbn<f64> = gen_truth(&test_cfg()).unwrap();
        let series = simulate_svar(&truth, 12, 3, 1.0, 0, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write_series_csv(&series, &path).unwrap();
        let back: Vec<Mat<f64>> = read_series_csv(&path).unwrap();
        assert_eq!(series, back);
    }

    #[test]
    fn ragged_series_csv_reports_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "realization,t,v0,v1\n0,0,1.0,2.0\n0,1,3.0\n").unwrap();
        let err = read_series_csv::<f64>(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn gram_loss_matches_direct_residual() {
        let cfg = test_cfg();
        let truth: WeightedDbn<f64> = gen_truth(&cfg).unwrap();
        let series = simulate_svar(&truth, 30, 1, 1.0, 0, 3).unwrap();
        let (x_t, x_lag) = build_designs(&series, cfg.p).unwrap();
        let data = ClientDataset::new(x_t.clone(), x_lag.clone()).unwrap();
        let w = Mat::from_fn(cfg.d, cfg.d, |i, j| ((i + j) % 3) as f64 * 0.1);
        let a = Mat::from_fn(cfg.p * cfg.d, cfg.d, |i, j| ((i * j) % 2) as f64 * 0.05);
        let residual = x_t.sub(&x_t.matmul(&w)).sub(&x_lag.matmul(&a));
        let direct = residual.frob_norm().powi(2) / (2.0 * data.n_k() as f64);
        let via_gram = data.gram().loss(&w, &a);
        assert!((direct - via_gram).abs() < 1e-10 * (1.0 + direct));
    }
}
