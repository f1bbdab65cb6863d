//! Centralized solver and the comparison strategies built on it: per-client
//! averaging, oracle best-client selection, and pooled fitting.

use crate::datagen::ClientDataset;
use crate::dbn::{BinaryDbn, WeightedDbn};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::metrics::shd;
use crate::numkit::{acyclicity, bound_minimize, BoundMinimizeConfig};
use crate::scalar::Scalar;
use crate::split::Split;

const RHO_CAP: f64 = 1e16;

#[derive(Clone, Debug)]
pub struct DynotearsConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub h_tol: f64,
    pub rho_init: f64,
    pub rho_mult: f64,
    pub max_outer: usize,
    /// Penalty escalates when `h` fails to shrink by this factor per outer step.
    pub progress_ratio: f64,
    pub inner: BoundMinimizeConfig,
}

impl Default for DynotearsConfig {
    fn default() -> Self {
        DynotearsConfig {
            lambda_w: 0.1,
            lambda_a: 0.1,
            h_tol: 1e-8,
            rho_init: 1.0,
            rho_mult: 10.0,
            max_outer: 100,
            progress_ratio: 0.25,
            inner: BoundMinimizeConfig::default(),
        }
    }
}

impl DynotearsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_mult > 1.0) {
            return Err(Error::Argument(format!(
                "need rho_mult > 1, got {}",
                self.rho_mult
            )));
        }
        if !(self.progress_ratio > 0.0 && self.progress_ratio < 1.0) {
            return Err(Error::Argument(format!(
                "need 0 < progress_ratio < 1, got {}",
                self.progress_ratio
            )));
        }
        if self.lambda_w < 0.0 || self.lambda_a < 0.0 {
            return Err(Error::Argument("sparsity weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Centralized structure learning by the augmented-Lagrangian outer loop over
/// the acyclicity equality constraint.
pub fn dynotears_fit<T: Scalar>(
    x_t: &Mat<T>,
    x_lag: &Mat<T>,
    cfg: &DynotearsConfig,
) -> Result<WeightedDbn<T>> {
    cfg.validate()?;
    let data = ClientDataset::new(x_t.clone(), x_lag.clone())?;
    let gram = data.gram();
    let d = data.d();
    let pd = data.p() * d;
    let lam_w = T::cast(cfg.lambda_w);
    let lam_a = T::cast(cfg.lambda_a);
    let half = T::cast(0.5);

    let split = Split::new(d, pd);
    let mut x = vec![T::zero(); split.len()];
    let lower = vec![T::zero(); split.len()];
    let mut alpha = T::zero();
    let mut rho = cfg.rho_init;
    let mut h_prev = f64::INFINITY;

    for _ in 0..cfg.max_outer {
        let r = T::cast(rho);
        let a_mult = alpha;
        let objective = |x: &[T], grad: &mut [T]| -> T {
            let w = split.unpack_w(x);
            let a = split.unpack_a(x);
            let acy = match acyclicity(&w) {
                Ok(acy) => acy,
                Err(_) => {
                    grad.iter_mut().for_each(|g| *g = T::zero());
                    return T::infinity();
                }
            };
            let (loss, mut gw, ga) = gram.loss_grad(&w, &a);
            let coef = a_mult + r * acy.value;
            gw.add_scaled(&acy.gradient, coef);
            let value = loss
                + a_mult * acy.value
                + r * half * acy.value * acy.value
                + split.penalty(x, lam_w, lam_a);
            split.write_grad(&gw, Some(&ga), lam_w, lam_a, grad);
            value
        };
        let res = bound_minimize(objective, &x, &lower, &cfg.inner)?;
        if !res.converged {
            log::warn!(
                "inner solve stopped at projected gradient {:e} after {} iterations",
                res.projected_gradient_norm.lossy_f64(),
                res.iterations
            );
        }
        x = res.x;

        let h = acyclicity(&split.unpack_w(&x))?.value.lossy_f64();
        alpha += T::cast(rho * h);
        if h > cfg.progress_ratio * h_prev {
            rho = (rho * cfg.rho_mult).min(RHO_CAP);
        }
        h_prev = h;
        if h <= cfg.h_tol {
            break;
        }
    }

    WeightedDbn::new(split.unpack_w(&x), split.unpack_a(&x)).map(|m| m.with_zeroed_diagonal())
}

/// Entrywise mean of per-client fits, then thresholding. The averaged graph
/// may contain cycles; none are removed.
pub fn ave_baseline<T: Scalar>(
    fits: &[WeightedDbn<T>],
    tau_w: f64,
    tau_a: f64,
) -> Result<(BinaryDbn, WeightedDbn<T>)> {
    let first = fits
        .first()
        .ok_or_else(|| Error::Argument("need at least one fit".into()))?;
    let (d, p) = (first.d(), first.p());
    if fits.iter().any(|f| f.d() != d || f.p() != p) {
        return Err(Error::Dim("fits must share d and p".into()));
    }
    let inv_k = T::cast(1.0 / fits.len() as f64);
    let mut w = Mat::zeros(d, d);
    let mut a = Mat::zeros(p * d, d);
    for fit in fits {
        w.add_scaled(fit.w(), inv_k);
        a.add_scaled(fit.a(), inv_k);
    }
    let averaged = WeightedDbn::new(w, a)?;
    Ok((averaged.threshold(tau_w, tau_a)?, averaged))
}

/// Per-client fit with the lowest `SHD(W) + SHD(A)` against the ground truth;
/// ties go to the lowest client index. Evaluation-only reference.
pub fn best_baseline<T: Scalar>(
    fits: &[WeightedDbn<T>],
    truth: &BinaryDbn,
    tau_w: f64,
    tau_a: f64,
) -> Result<(usize, BinaryDbn)> {
    if fits.is_empty() {
        return Err(Error::Argument("need at least one fit".into()));
    }
    let mut best: Option<(usize, usize, BinaryDbn)> = None;
    for (k, fit) in fits.iter().enumerate() {
        let graph = fit.threshold(tau_w, tau_a)?;
        let (shd_w, shd_a) = shd(&graph, truth)?;
        let total = shd_w + shd_a;
        let better = match &best {
            None => true,
            Some((_, best_total, _)) => total < *best_total,
        };
        if better {
            best = Some((k, total, graph));
        }
    }
    let (k, _, graph) = best.expect("fits is non-empty");
    Ok((k, graph))
}

/// Concatenates all client rows and runs the centralized solver.
pub fn alldata_baseline<T: Scalar>(
    datasets: &[ClientDataset<T>],
    cfg: &DynotearsConfig,
) -> Result<WeightedDbn<T>> {
    if datasets.is_empty() {
        return Err(Error::Argument("need at least one client dataset".into()));
    }
    let x_ts: Vec<&Mat<T>> = datasets.iter().map(|ds| ds.x_t()).collect();
    let x_lags: Vec<&Mat<T>> = datasets.iter().map(|ds| ds.x_lag()).collect();
    dynotears_fit(&Mat::vstack(&x_ts)?, &Mat::vstack(&x_lags)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::partition;

    #[test]
    fn zero_data_gives_zero_model() {
        let x_t = Mat::<f64>::zeros(10, 3);
        let x_lag = Mat::<f64>::zeros(10, 6);
        let fit = dynotears_fit(&x_t, &x_lag, &DynotearsConfig::default()).unwrap();
        assert_eq!(fit.w().max_abs(), 0.0);
        assert_eq!(fit.a().max_abs(), 0.0);
    }

    #[test]
    fn huge_sparsity_weight_gives_zero_model() {
        let x_t = Mat::from_fn(20, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let x_lag = Mat::from_fn(20, 2, |i, j| ((i * 3 + j) % 4) as f64 - 1.5);
        let mut cfg = DynotearsConfig::default();
        cfg.lambda_w = 1e6;
        cfg.lambda_a = 1e6;
        let fit = dynotears_fit(&x_t, &x_lag, &cfg).unwrap();
        assert_eq!(fit.w().max_abs(), 0.0);
        assert_eq!(fit.a().max_abs(), 0.0);
    }

    #[test]
    fn averaging_cancels_opposite_weights() {
        let mut w_pos = Mat::<f64>::zeros(2, 2);
        w_pos[(0, 1)] = 0.4;
        let mut w_neg = Mat::<f64>::zeros(2, 2);
        w_neg[(0, 1)] = -0.4;
        let a = Mat::<f64>::zeros(2, 2);
        let fits = vec![
            WeightedDbn::new(w_pos, a.clone()).unwrap(),
            WeightedDbn::new(w_neg, a).unwrap(),
        ];
        let (graph, averaged) = ave_baseline(&fits, 0.3, 0.3).unwrap();
        assert_eq!(averaged.w().max_abs(), 0.0);
        assert!(graph.w_edges().is_empty());
    }

    #[test]
    fn averaging_dilutes_a_single_strong_edge() {
        let mut w_strong = Mat::<f64>::zeros(2, 2);
        w_strong[(0, 1)] = 0.9;
        let a = Mat::<f64>::zeros(2, 2);
        let mut fits = vec![WeightedDbn::new(w_strong, a.clone()).unwrap()];
        for _ in 0..3 {
            fits.push(WeightedDbn::new(Mat::zeros(2, 2), a.clone()).unwrap());
        }
        let (graph, averaged) = ave_baseline(&fits, 0.3, 0.3).unwrap();
        assert!((averaged.w()[(0, 1)] - 0.225).abs() < 1e-15);
        assert!(graph.w_edges().is_empty());
    }

    #[test]
    fn identical_fits_average_to_themselves() {
        let mut w = Mat::<f64>::zeros(2, 2);
        w[(1, 0)] = 0.5;
        let fit = WeightedDbn::new(w, Mat::zeros(2, 2)).unwrap();
        let (_, averaged) = ave_baseline(&[fit.clone(), fit.clone()], 0.3, 0.3).unwrap();
        assert!(averaged.w().sub(fit.w()).max_abs() < 1e-15);
    }

    #[test]
    fn best_picks_lowest_shd_with_index_tiebreak() {
        let mut w_truth = Mat::<f64>::zeros(3, 3);
        w_truth[(0, 1)] = 0.5;
        w_truth[(1, 2)] = 0.5;
        let a = Mat::<f64>::zeros(3, 3);
        let truth_dbn = WeightedDbn::new(w_truth.clone(), a.clone()).unwrap();
        let truth = truth_dbn.threshold(0.0, 0.0).unwrap();

        let mut w_off = Mat::<f64>::zeros(3, 3);
        w_off[(2, 0)] = 0.5;
        let fits = vec![
            WeightedDbn::new(w_off, a.clone()).unwrap(),
            WeightedDbn::new(w_truth, a.clone()).unwrap(),
        ];
        let (idx, graph) = best_baseline(&fits, &truth, 0.3, 0.3).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(&graph, &truth);

        // All identical: the first client wins.
        let same = vec![fits[1].clone(), fits[1].clone(), fits[1].clone()];
        let (idx, _) = best_baseline(&same, &truth, 0.3, 0.3).unwrap();
        assert_eq!(idx, 0);
    }

    #[test]
    fn alldata_with_one_client_equals_direct_fit() {
        let x_t = Mat::from_fn(30, 2, |i, j| (((i * 13 + j * 5) % 11) as f64 - 5.0) / 5.0);
        let x_lag = Mat::from_fn(30, 2, |i, j| (((i * 7 + j * 3) % 9) as f64 - 4.0) / 4.0);
        let datasets = partition(&x_t, &x_lag, 1).unwrap();
        let cfg = DynotearsConfig::default();
        let pooled = alldata_baseline(&datasets, &cfg).unwrap();
        let direct = dynotears_fit(&x_t, &x_lag, &cfg).unwrap();
        assert_eq!(pooled, direct);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let fits: Vec<WeightedDbn<f64>> = Vec::new();
        assert!(ave_baseline(&fits, 0.3, 0.3).is_err());
        let truth = WeightedDbn::<f64>::zero(2, 1).threshold(0.0, 0.0).unwrap();
        assert!(best_baseline(&fits, &truth, 0.3, 0.3).is_err());
        let datasets: Vec<ClientDataset<f64>> = Vec::new();
        assert!(alldata_baseline(&datasets, &DynotearsConfig::default()).is_err());
    }
}
