//! Personalized federated DBN learning for heterogeneous clients.
//!
//! Every client keeps its own model `(W_k, A_k)`, pulled toward an auxiliary
//! copy `(W̃_k, Ã_k)` with proximal weight `mu`; the auxiliaries are tied to
//! the global model through consensus constraints. Clients carry the local
//! acyclicity penalty, the auxiliary and server updates are exact closed
//! forms, and only a sampled subset of clients needs to work each round.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::{ClientDataset, Gram};
use crate::dbn::WeightedDbn;
use crate::error::{Error, Result};
use crate::fdbnl::FdbnlConfig;
use crate::mat::Mat;
use crate::numkit::{acyclicity, bound_minimize};
use crate::scalar::Scalar;
use crate::split::Split;

#[derive(Clone, Debug)]
pub struct PfdbnlConfig {
    pub base: FdbnlConfig,
    /// Proximal weight balancing personalization against the shared model.
    pub mu: f64,
    /// Clients sampled per round; `None` means full participation.
    pub participants_per_round: Option<usize>,
}

impl Default for PfdbnlConfig {
    fn default() -> Self {
        PfdbnlConfig {
            base: FdbnlConfig::default(),
            mu: 0.1,
            participants_per_round: None,
        }
    }
}

impl PfdbnlConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.mu > 0.0) {
            return Err(Error::Argument(format!("need mu > 0, got {}", self.mu)));
        }
        if self.participants_per_round == Some(0) {
            return Err(Error::Argument("need at least one participant".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PfdbnlState<T> {
    pub w: Mat<T>,
    pub a: Mat<T>,
    pub personal_w: Vec<Mat<T>>,
    pub personal_a: Vec<Mat<T>>,
    pub aux_w: Vec<Mat<T>>,
    pub aux_a: Vec<Mat<T>>,
    pub beta: Vec<Mat<T>>,
    pub gamma: Vec<Mat<T>>,
    /// Per-client acyclicity of the personal model, cached across rounds so
    /// absentees contribute their last value to the dual update.
    pub h_personal: Vec<T>,
    /// Clients that computed updates this round.
    pub participants: Vec<usize>,
    pub alpha: T,
    pub rho1: f64,
    pub rho2: f64,
    pub round: usize,
}

impl<T: Scalar> PfdbnlState<T> {
    pub fn init(d: usize, p: usize, clients: usize, cfg: &PfdbnlConfig) -> Self {
        PfdbnlState {
            w: Mat::zeros(d, d),
            a: Mat::zeros(p * d, d),
            personal_w: vec![Mat::zeros(d, d); clients],
            personal_a: vec![Mat::zeros(p * d, d); clients],
            aux_w: vec![Mat::zeros(d, d); clients],
            aux_a: vec![Mat::zeros(p * d, d); clients],
            beta: vec![Mat::zeros(d, d); clients],
            gamma: vec![Mat::zeros(p * d, d); clients],
            h_personal: vec![T::zero(); clients],
            participants: Vec::new(),
            alpha: T::zero(),
            rho1: cfg.base.rho1_init,
            rho2: cfg.base.rho2_init,
            round: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PTraceRow {
    pub round: usize,
    pub h: f64,
    pub max_primal_w: f64,
    pub max_primal_a: f64,
    pub objective: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub participants: Vec<usize>,
    pub mean_h_personal: f64,
}

pub fn write_trace_csv(rows: &[PTraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(
        "round,h,max_primal_W,max_primal_A,objective,rho1,rho2,participants,mean_h_personal\n",
    );
    for r in rows {
        let ids: Vec<String> = r.participants.iter().map(|k| k.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.round,
            r.h,
            r.max_primal_w,
            r.max_primal_a,
            r.objective,
            r.rho1,
            r.rho2,
            ids.join(";"),
            r.mean_h_personal
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Minimizes the personal subproblem: local loss, proximal pull toward the
/// auxiliary copy, local acyclicity penalty, and ℓ1 terms via the split.
pub fn personal_update<T: Scalar>(
    data: &ClientDataset<T>,
    aux_w: &Mat<T>,
    aux_a: &Mat<T>,
    alpha: T,
    rho1: f64,
    cfg: &PfdbnlConfig,
    warm: Option<(&Mat<T>, &Mat<T>)>,
) -> Result<(Mat<T>, Mat<T>)> {
    personal_update_gram(&data.gram(), aux_w, aux_a, alpha, rho1, cfg, warm)
}

pub(crate) fn personal_update_gram<T: Scalar>(
    gram: &Gram<T>,
    aux_w: &Mat<T>,
    aux_a: &Mat<T>,
    alpha: T,
    rho1: f64,
    cfg: &PfdbnlConfig,
    warm: Option<(&Mat<T>, &Mat<T>)>,
) -> Result<(Mat<T>, Mat<T>)> {
    if !(rho1 > 0.0) {
        return Err(Error::Argument(format!("need rho1 > 0, got {rho1}")));
    }
    cfg.validate()?;
    let d = gram.d();
    let pd = gram.pd();
    let mu = T::cast(cfg.mu);
    let r1 = T::cast(rho1);
    let lam_w = T::cast(cfg.base.lambda_w);
    let lam_a = T::cast(cfg.base.lambda_a);
    let half = T::cast(0.5);
    let two = T::cast(2.0);

    let split = Split::new(d, pd);
    let x0 = match warm {
        Some((w, a)) => split.pack(w, Some(a)),
        None => split.pack(aux_w, Some(aux_a)),
    };
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
        let (loss, mut gw, mut ga) = gram.loss_grad(&w, &a);
        let dw = w.sub(aux_w);
        let da = a.sub(aux_a);
        let coef = alpha + r1 * acy.value;
        gw.add_scaled(&dw, two * mu);
        gw.add_scaled(&acy.gradient, coef);
        ga.add_scaled(&da, two * mu);
        let value = loss
            + mu * (dw.dot(&dw) + da.dot(&da))
            + alpha * acy.value
            + r1 * half * acy.value * acy.value
            + split.penalty(x, lam_w, lam_a);
        split.write_grad(&gw, Some(&ga), lam_w, lam_a, grad);
        value
    };
    let res = bound_minimize(objective, &x0, &lower, &cfg.base.inner)?;
    if !res.converged {
        log::warn!(
            "personal update stopped at projected gradient {:e} after {} iterations",
            res.projected_gradient_norm.lossy_f64(),
            res.iterations
        );
    }
    Ok((split.unpack_w(&res.x), split.unpack_a(&res.x)))
}

/// Exact minimizer of the auxiliary subproblem:
/// `W̃_k = (2μ·W_k + ρ2·W - β_k) / (2μ + ρ2)` and the same shape for `Ã_k`.
#[allow(clippy::too_many_arguments)]
pub fn aux_update<T: Scalar>(
    personal_w: &Mat<T>,
    personal_a: &Mat<T>,
    w: &Mat<T>,
    a: &Mat<T>,
    beta_k: &Mat<T>,
    gamma_k: &Mat<T>,
    rho2: f64,
    mu: f64,
) -> Result<(Mat<T>, Mat<T>)> {
    if !(2.0 * mu + rho2 > 0.0) {
        return Err(Error::Argument(format!(
            "need 2*mu + rho2 > 0, got mu={mu}, rho2={rho2}"
        )));
    }
    let two_mu = T::cast(2.0 * mu);
    let r2 = T::cast(rho2);
    let denom = T::one() / (two_mu + r2);
    let mut aux_w = personal_w.scale(two_mu);
    aux_w.add_scaled(w, r2);
    aux_w.add_scaled(beta_k, -T::one());
    let mut aux_a = personal_a.scale(two_mu);
    aux_a.add_scaled(a, r2);
    aux_a.add_scaled(gamma_k, -T::one());
    Ok((aux_w.scale(denom), aux_a.scale(denom)))
}

/// Exact minimizer of the server's consensus quadratic:
/// `W = (1/K)·Σ(W̃_k + β_k/ρ2)`, likewise for `A`.
pub fn global_aggregate<T: Scalar>(
    aux_w: &[Mat<T>],
    aux_a: &[Mat<T>],
    beta: &[Mat<T>],
    gamma: &[Mat<T>],
    rho2: f64,
) -> Result<(Mat<T>, Mat<T>)> {
    let k = aux_w.len();
    if k == 0 || aux_a.len() != k || beta.len() != k || gamma.len() != k {
        return Err(Error::Argument(
            "need matching auxiliaries and duals for at least one client".into(),
        ));
    }
    if !(rho2 > 0.0) {
        return Err(Error::Argument(format!("need rho2 > 0, got {rho2}")));
    }
    let inv_r2 = T::cast(1.0 / rho2);
    let inv_k = T::cast(1.0 / k as f64);
    let mut w = Mat::zeros(aux_w[0].rows(), aux_w[0].cols());
    let mut a = Mat::zeros(aux_a[0].rows(), aux_a[0].cols());
    for i in 0..k {
        w.add_scaled(&aux_w[i], T::one());
        w.add_scaled(&beta[i], inv_r2);
        a.add_scaled(&aux_a[i], T::one());
        a.add_scaled(&gamma[i], inv_r2);
    }
    Ok((w.scale(inv_k), a.scale(inv_k)))
}

/// Dual ascent for the participating clients, the shared acyclicity
/// multiplier driven by the mean personal `h`, and capped penalty growth.
pub fn dual_update_personalized<T: Scalar>(
    state: &mut PfdbnlState<T>,
    cfg: &PfdbnlConfig,
) -> Result<()> {
    let r2 = T::cast(state.rho2);
    for &k in &state.participants {
        let step_w = state.aux_w[k].sub(&state.w).scale(r2);
        state.beta[k].add_scaled(&step_w, T::one());
        let step_a = state.aux_a[k].sub(&state.a).scale(r2);
        state.gamma[k].add_scaled(&step_a, T::one());
    }
    let clients = state.h_personal.len();
    let mean_h = state.h_personal.iter().copied().sum::<T>() / T::cast(clients as f64);
    state.alpha += T::cast(state.rho1) * mean_h;
    state.rho1 = (state.rho1 * cfg.base.phi1).min(cfg.base.rho_max);
    state.rho2 = (state.rho2 * cfg.base.phi2).min(cfg.base.rho_max);
    Ok(())
}

/// Uniform sample of `j` distinct clients out of `k`, in ascending order.
pub fn sample_participants(rng: &mut ChaCha8Rng, k: usize, j: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, k, j).into_vec();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Debug)]
pub struct PfdbnlFit<T> {
    /// Per-client personalized models, the evaluation targets.
    pub personal: Vec<WeightedDbn<T>>,
    pub global: WeightedDbn<T>,
    pub trace: Vec<PTraceRow>,
    pub converged: bool,
    pub state: PfdbnlState<T>,
}

pub fn run_pfdbnl<T: Scalar>(
    datasets: &[ClientDataset<T>],
    cfg: &PfdbnlConfig,
    seed: u64,
) -> Result<PfdbnlFit<T>> {
    cfg.validate()?;
    let first = datasets
        .first()
        .ok_or_else(|| Error::Argument("need at least one client dataset".into()))?;
    let (d, p) = (first.d(), first.p());
    if datasets.iter().any(|ds| ds.d() != d || ds.p() != p) {
        return Err(Error::Dim("all clients must share d and p".into()));
    }
    let clients = datasets.len();
    let j = cfg.participants_per_round.unwrap_or(clients);
    if j == 0 || j > clients {
        return Err(Error::Argument(format!(
            "participants per round must be in 1..={clients}, got {j}"
        )));
    }
    let grams: Vec<Gram<T>> = datasets.par_iter().map(|ds| ds.gram()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = PfdbnlState::init(d, p, clients, cfg);
    let mut trace = Vec::new();
    let mut converged = false;
    let lam_w = T::cast(cfg.base.lambda_w);
    let lam_a = T::cast(cfg.base.lambda_a);
    let mu = T::cast(cfg.mu);

    for round in 1..=cfg.base.max_rounds {
        state.round = round;
        state.participants = if j == clients {
            (0..clients).collect()
        } else {
            sample_participants(&mut rng, clients, j)
        };

        let updates: Vec<(usize, Mat<T>, Mat<T>, Mat<T>, Mat<T>, T)> = state
            .participants
            .par_iter()
            .map(|&k| {
                let (w_k, a_k) = personal_update_gram(
                    &grams[k],
                    &state.aux_w[k],
                    &state.aux_a[k],
                    state.alpha,
                    state.rho1,
                    cfg,
                    Some((&state.personal_w[k], &state.personal_a[k])),
                )
                .map_err(|e| e.with_context(&format!("client {k}, round {round}")))?;
                let h_k = acyclicity(&w_k)
                    .map_err(|e| e.with_context(&format!("client {k}, round {round}")))?
                    .value;
                let (aux_w_k, aux_a_k) = aux_update(
                    &w_k,
                    &a_k,
                    &state.w,
                    &state.a,
                    &state.beta[k],
                    &state.gamma[k],
                    state.rho2,
                    cfg.mu,
                )?;
                Ok((k, w_k, a_k, aux_w_k, aux_a_k, h_k))
            })
            .collect::<Result<_>>()?;
        for (k, w_k, a_k, aux_w_k, aux_a_k, h_k) in updates {
            state.personal_w[k] = w_k;
            state.personal_a[k] = a_k;
            state.aux_w[k] = aux_w_k;
            state.aux_a[k] = aux_a_k;
            state.h_personal[k] = h_k;
        }

        let (w, a) = global_aggregate(
            &state.aux_w,
            &state.aux_a,
            &state.beta,
            &state.gamma,
            state.rho2,
        )?;
        state.w = w;
        state.a = a;

        let mean_h = state
            .h_personal
            .iter()
            .copied()
            .sum::<T>()
            .lossy_f64()
            / clients as f64;
        let max_primal_w = state
            .aux_w
            .iter()
            .map(|x| x.sub(&state.w).frob_norm().lossy_f64())
            .fold(0.0, f64::max);
        let max_primal_a = state
            .aux_a
            .iter()
            .map(|x| x.sub(&state.a).frob_norm().lossy_f64())
            .fold(0.0, f64::max);
        let h_global = acyclicity(&state.w)?.value.lossy_f64();
        let objective: T = (0..clients)
            .map(|k| {
                let dw = state.personal_w[k].sub(&state.w);
                let da = state.personal_a[k].sub(&state.a);
                grams[k].loss(&state.personal_w[k], &state.personal_a[k])
                    + mu * (dw.dot(&dw) + da.dot(&da))
                    + lam_w * state.personal_w[k].l1_norm()
                    + lam_a * state.personal_a[k].l1_norm()
            })
            .sum();
        trace.push(PTraceRow {
            round,
            h: h_global,
            max_primal_w,
            max_primal_a,
            objective: objective.lossy_f64(),
            rho1: state.rho1,
            rho2: state.rho2,
            participants: state.participants.clone(),
            mean_h_personal: mean_h,
        });

        dual_update_personalized(&mut state, cfg)?;

        if mean_h <= cfg.base.h_tol && max_primal_w <= cfg.base.primal_tol {
            converged = true;
            break;
        }
    }

    let personal: Vec<WeightedDbn<T>> = (0..clients)
        .map(|k| {
            WeightedDbn::new(state.personal_w[k].clone(), state.personal_a[k].clone())
                .map(|m| m.with_zeroed_diagonal())
        })
        .collect::<Result<_>>()?;
    let global =
        WeightedDbn::new(state.w.clone(), state.a.clone())?.with_zeroed_diagonal();
    Ok(PfdbnlFit {
        personal,
        global,
        trace,
        converged,
        state,
    })
}
