//! Consensus-ADMM federated learning of a single global DBN.
//!
//! Each round: every client minimizes its ridge-regularized local quadratic in
//! closed form (two Schur-complement solves), the server minimizes the
//! penalized global objective over the nonnegative split with the
//! quasi-Newton solver, then dual variables and penalties are updated.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::datagen::{ClientDataset, Gram};
use crate::dbn::WeightedDbn;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::numkit::{
    acyclicity, bound_minimize, chol_solve, cholesky, spd_solve, BoundMinimizeConfig,
};
use crate::scalar::Scalar;
use crate::split::Split;

#[derive(Clone, Debug)]
pub struct FdbnlConfig {
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub rho1_init: f64,
    pub rho2_init: f64,
    /// Multiplicative penalty growth factors, both > 1.
    pub phi1: f64,
    pub phi2: f64,
    pub max_rounds: usize,
    pub h_tol: f64,
    pub primal_tol: f64,
    pub rho_max: f64,
    /// Solve the global A block by entrywise soft thresholding instead of
    /// jointly with W. Off by default: the joint solve is the reference path.
    pub a_block_closed_form: bool,
    pub inner: BoundMinimizeConfig,
}

impl Default for FdbnlConfig {
    fn default() -> Self {
        FdbnlConfig {
            lambda_w: 0.1,
            lambda_a: 0.1,
            rho1_init: 1.0,
            rho2_init: 1.0,
            phi1: 1.6,
            phi2: 1.1,
            max_rounds: 200,
            h_tol: 1e-8,
            primal_tol: 1e-6,
            rho_max: 1e16,
            a_block_closed_form: false,
            inner: BoundMinimizeConfig::default(),
        }
    }
}

impl FdbnlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi1 > 1.0) || !(self.phi2 > 1.0) {
            return Err(Error::Argument(format!(
                "penalty factors must exceed 1, got phi1={}, phi2={}",
                self.phi1, self.phi2
            )));
        }
        if !(self.rho1_init > 0.0) || !(self.rho2_init > 0.0) || !(self.rho_max > 0.0) {
            return Err(Error::Argument("penalties must be positive".into()));
        }
        if self.lambda_w < 0.0 || self.lambda_a < 0.0 {
            return Err(Error::Argument("sparsity weights must be nonnegative".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Argument("need at least one round".into()));
        }
        Ok(())
    }
}

/// Full ADMM state: globals, per-client locals, duals, penalties.
#[derive(Clone, Debug)]
pub struct FdbnlState<T> {
    pub w: Mat<T>,
    pub a: Mat<T>,
    pub local_b: Vec<Mat<T>>,
    pub local_d: Vec<Mat<T>>,
    pub beta: Vec<Mat<T>>,
    pub gamma: Vec<Mat<T>>,
    pub alpha: T,
    pub rho1: f64,
    pub rho2: f64,
    pub round: usize,
}

impl<T: Scalar> FdbnlState<T> {
    pub fn init(d: usize, p: usize, clients: usize, cfg: &FdbnlConfig) -> Self {
        FdbnlState {
            w: Mat::zeros(d, d),
            a: Mat::zeros(p * d, d),
            local_b: vec![Mat::zeros(d, d); clients],
            local_d: vec![Mat::zeros(p * d, d); clients],
            beta: vec![Mat::zeros(d, d); clients],
            gamma: vec![Mat::zeros(p * d, d); clients],
            alpha: T::zero(),
            rho1: cfg.rho1_init,
            rho2: cfg.rho2_init,
            round: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub round: usize,
    pub h: f64,
    pub max_primal_w: f64,
    pub max_primal_a: f64,
    pub objective: f64,
    pub rho1: f64,
    pub rho2: f64,
}

pub fn write_trace_csv(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("round,h,max_primal_W,max_primal_A,objective,rho1,rho2\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.round, r.h, r.max_primal_w, r.max_primal_a, r.objective, r.rho1, r.rho2
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Closed-form minimizer of the local augmented quadratic: solves the block
/// system `[P M; Mᵀ Q]·[B; D] = [b1; b2]` through both Schur complements.
pub fn local_update<T: Scalar>(
    data: &ClientDataset<T>,
    w: &Mat<T>,
    a: &Mat<T>,
    beta_k: &Mat<T>,
    gamma_k: &Mat<T>,
    rho2: f64,
) -> Result<(Mat<T>, Mat<T>)> {
    local_update_gram(&data.gram(), w, a, beta_k, gamma_k, rho2)
}

pub(crate) fn local_update_gram<T: Scalar>(
    gram: &Gram<T>,
    w: &Mat<T>,
    a: &Mat<T>,
    beta_k: &Mat<T>,
    gamma_k: &Mat<T>,
    rho2: f64,
) -> Result<(Mat<T>, Mat<T>)> {
    if !(rho2 > 0.0) {
        return Err(Error::Argument(format!("need rho2 > 0, got {rho2}")));
    }
    let r = T::cast(rho2);
    let d = gram.d();
    let pd = gram.pd();

    let mut p_mat = gram.s.clone();
    for i in 0..d {
        p_mat[(i, i)] += r;
    }
    let mut q_mat = gram.n.clone();
    for i in 0..pd {
        q_mat[(i, i)] += r;
    }
    let m_t = gram.m.transpose();
    let b1 = gram.s.sub(beta_k).add(&w.scale(r));
    let b2 = m_t.sub(gamma_k).add(&a.scale(r));

    let lq = cholesky(&q_mat)?;
    let q_inv_mt = chol_solve(&lq, &m_t);
    let q_inv_b2 = chol_solve(&lq, &b2);
    let schur_p = p_mat.sub(&gram.m.matmul(&q_inv_mt));
    let local_b = spd_solve(&schur_p, &b1.sub(&gram.m.matmul(&q_inv_b2)))?;

    let lp = cholesky(&p_mat)?;
    let p_inv_m = chol_solve(&lp, &gram.m);
    let p_inv_b1 = chol_solve(&lp, &b1);
    let schur_q = q_mat.sub(&gram.m.tn_mul(&p_inv_m));
    let local_d = spd_solve(&schur_q, &b2.sub(&gram.m.tn_mul(&p_inv_b1)))?;

    Ok((local_b, local_d))
}

fn soft_threshold<T: Scalar>(m: &Mat<T>, level: T) -> Mat<T> {
    m.map(|v| v.signum() * (v.abs() - level).max(T::zero()))
}

/// Minimizes the penalized consensus objective over `(W, A)`; warm-started at
/// `(w_init, a_init)`.
#[allow(clippy::too_many_arguments)]
pub fn global_update<T: Scalar>(
    local_b: &[Mat<T>],
    local_d: &[Mat<T>],
    beta: &[Mat<T>],
    gamma: &[Mat<T>],
    alpha: T,
    rho1: f64,
    rho2: f64,
    cfg: &FdbnlConfig,
    w_init: &Mat<T>,
    a_init: &Mat<T>,
) -> Result<(Mat<T>, Mat<T>)> {
    let k = local_b.len();
    if k == 0 || local_d.len() != k || beta.len() != k || gamma.len() != k {
        return Err(Error::Argument(
            "need matching per-client locals and duals for at least one client".into(),
        ));
    }
    let d = w_init.rows();
    let pd = a_init.rows();
    let sum = |mats: &[Mat<T>]| {
        let mut acc = mats[0].clone();
        for m in &mats[1..] {
            acc.add_scaled(m, T::one());
        }
        acc
    };
    let sum_b = sum(local_b);
    let sum_d = sum(local_d);
    let sum_beta = sum(beta);
    let sum_gamma = sum(gamma);

    let r2 = T::cast(rho2);
    let r1 = T::cast(rho1);
    let kf = T::cast(k as f64);
    let lam_w = T::cast(cfg.lambda_w);
    let lam_a = T::cast(cfg.lambda_a);
    let half = T::cast(0.5);

    // Consensus part for one block: rho2/2·(K‖X‖² - 2⟨ΣX_k, X⟩) - ⟨Σdual, X⟩,
    // dropping terms constant in X. Gradient: rho2·(K·X - ΣX_k) - Σdual.
    let consensus =
        |x: &Mat<T>, sum_x: &Mat<T>, sum_dual: &Mat<T>| -> (T, Mat<T>) {
            let value = r2 * half * (kf * x.dot(x) - T::cast(2.0) * sum_x.dot(x))
                - sum_dual.dot(x);
            let mut grad = x.scale(r2 * kf);
            grad.add_scaled(sum_x, -r2);
            grad.add_scaled(sum_dual, -T::one());
            (value, grad)
        };

    if cfg.a_block_closed_form {
        // A decouples from the acyclicity term: entrywise soft threshold of
        // the dual-adjusted client mean at level lambda_a/(K·rho2).
        let mut target = sum_d.clone();
        target.add_scaled(&sum_gamma, T::one() / r2);
        let a_sol = soft_threshold(&target.scale(T::one() / kf), lam_a / (kf * r2));

        let split = Split::new(d, 0);
        let x0 = split.pack(w_init, None);
        let lower = vec![T::zero(); x0.len()];
        let objective = |x: &[T], grad: &mut [T]| -> T {
            let w = split.unpack_w(x);
            let acy = match acyclicity(&w) {
                Ok(acy) => acy,
                Err(_) => {
                    grad.iter_mut().for_each(|g| *g = T::zero());
                    return T::infinity();
                }
            };
            let (c_val, mut gw) = consensus(&w, &sum_b, &sum_beta);
            let coef = alpha + r1 * acy.value;
            gw.add_scaled(&acy.gradient, coef);
            let value = alpha * acy.value + r1 * half * acy.value * acy.value + c_val
                + split.penalty(x, lam_w, T::zero());
            split.write_grad(&gw, None, lam_w, T::zero(), grad);
            value
        };
        let res = bound_minimize(objective, &x0, &lower, &cfg.inner)?;
        if !res.converged {
            log::warn!(
                "global W update stopped at projected gradient {:e} after {} iterations",
                res.projected_gradient_norm.lossy_f64(),
                res.iterations
            );
        }
        return Ok((split.unpack_w(&res.x), a_sol));
    }

    let split = Split::new(d, pd);
    let x0 = split.pack(w_init, Some(a_init));
    let lower = vec![T::zero(); x0.len()];
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
        let (cw_val, mut gw) = consensus(&w, &sum_b, &sum_beta);
        let (ca_val, ga) = consensus(&a, &sum_d, &sum_gamma);
        let coef = alpha + r1 * acy.value;
        gw.add_scaled(&acy.gradient, coef);
        let value = alpha * acy.value
            + r1 * half * acy.value * acy.value
            + cw_val
            + ca_val
            + split.penalty(x, lam_w, lam_a);
        split.write_grad(&gw, Some(&ga), lam_w, lam_a, grad);
        value
    };
    let res = bound_minimize(objective, &x0, &lower, &cfg.inner)?;
    if !res.converged {
        log::warn!(
            "global update stopped at projected gradient {:e} after {} iterations",
            res.projected_gradient_norm.lossy_f64(),
            res.iterations
        );
    }
    Ok((split.unpack_w(&res.x), split.unpack_a(&res.x)))
}

/// Dual ascent and penalty growth, capped at `rho_max`.
pub fn dual_update<T: Scalar>(state: &mut FdbnlState<T>, cfg: &FdbnlConfig) -> Result<()> {
    let h = acyclicity(&state.w)?.value;
    let r2 = T::cast(state.rho2);
    for k in 0..state.beta.len() {
        let mut step = state.local_b[k].sub(&state.w);
        step = step.scale(r2);
        state.beta[k].add_scaled(&step, T::one());
        let mut step_a = state.local_d[k].sub(&state.a);
        step_a = step_a.scale(r2);
        state.gamma[k].add_scaled(&step_a, T::one());
    }
    state.alpha += T::cast(state.rho1) * h;
    state.rho1 = (state.rho1 * cfg.phi1).min(cfg.rho_max);
    state.rho2 = (state.rho2 * cfg.phi2).min(cfg.rho_max);
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FdbnlFit<T> {
    /// Final global model with the diagonal of `W` zeroed.
    pub dbn: WeightedDbn<T>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub state: FdbnlState<T>,
}

/// Runs the full consensus loop until the acyclicity and primal residuals meet
/// their tolerances or `max_rounds` is reached.
///
/// The algorithm draws no randomness; `seed` is accepted for interface
/// symmetry with the personalized variant and recorded nowhere.
pub fn run_fdbnl<T: Scalar>(
    datasets: &[ClientDataset<T>],
    cfg: &FdbnlConfig,
    seed: u64,
) -> Result<FdbnlFit<T>> {
    let _ = seed;
    cfg.validate()?;
    let first = datasets
        .first()
        .ok_or_else(|| Error::Argument("need at least one client dataset".into()))?;
    let (d, p) = (first.d(), first.p());
    if datasets.iter().any(|ds| ds.d() != d || ds.p() != p) {
        return Err(Error::Dim("all clients must share d and p".into()));
    }
    let clients = datasets.len();
    let grams: Vec<Gram<T>> = datasets.par_iter().map(|ds| ds.gram()).collect();

    let mut state = FdbnlState::init(d, p, clients, cfg);
    let mut trace = Vec::new();
    let mut converged = false;
    let lam_w = T::cast(cfg.lambda_w);
    let lam_a = T::cast(cfg.lambda_a);

    for round in 1..=cfg.max_rounds {
        state.round = round;
        let locals: Vec<(Mat<T>, Mat<T>)> = grams
            .par_iter()
            .enumerate()
            .map(|(k, gram)| {
                local_update_gram(gram, &state.w, &state.a, &state.beta[k], &state.gamma[k], state.rho2)
                    .map_err(|e| e.with_context(&format!("client {k}, round {round}")))
            })
            .collect::<Result<_>>()?;
        for (k, (b, dk)) in locals.into_iter().enumerate() {
            state.local_b[k] = b;
            state.local_d[k] = dk;
        }

        let (w, a) = global_update(
            &state.local_b,
            &state.local_d,
            &state.beta,
            &state.gamma,
            state.alpha,
            state.rho1,
            state.rho2,
            cfg,
            &state.w,
            &state.a,
        )
        .map_err(|e| e.with_context(&format!("global update, round {round}")))?;
        state.w = w;
        state.a = a;

        let h = acyclicity(&state.w)
            .map_err(|e| e.with_context(&format!("round {round}")))?
            .value
            .lossy_f64();
        let max_primal_w = state
            .local_b
            .iter()
            .map(|b| b.sub(&state.w).frob_norm().lossy_f64())
            .fold(0.0, f64::max);
        let max_primal_a = state
            .local_d
            .iter()
            .map(|dk| dk.sub(&state.a).frob_norm().lossy_f64())
            .fold(0.0, f64::max);
        let objective = grams
            .iter()
            .map(|g| g.loss(&state.w, &state.a))
            .sum::<T>()
            + lam_w * state.w.l1_norm()
            + lam_a * state.a.l1_norm();
        trace.push(TraceRow {
            round,
            h,
            max_primal_w,
            max_primal_a,
            objective: objective.lossy_f64(),
            rho1: state.rho1,
            rho2: state.rho2,
        });

        dual_update(&mut state, cfg)?;

        if h <= cfg.h_tol && max_primal_w <= cfg.primal_tol && max_primal_a <= cfg.primal_tol {
            converged = true;
            break;
        }
    }

    let dbn = WeightedDbn::new(state.w.clone(), state.a.clone())?.with_zeroed_diagonal();
    Ok(FdbnlFit {
        dbn,
        trace,
        converged,
        state,
    })
}
