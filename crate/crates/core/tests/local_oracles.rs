//! Oracles for the federated local and global updates: the closed-form local
//! solve is checked against its first-order conditions and against a direct
//! numerical minimization of the same augmented objective, and the global lag
//! block is checked against its entrywise soft-threshold solution.

use dbnl_core::datagen::ClientDataset;
use dbnl_core::fdbnl::{global_update, local_update, FdbnlConfig};
use dbnl_core::numkit::{bound_minimize, no_lower_bounds, BoundMinimizeConfig};
use dbnl_core::Mat64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct LocalInstance {
    data: ClientDataset<f64>,
    w: Mat64,
    a: Mat64,
    beta: Mat64,
    gamma: Mat64,
    rho2: f64,
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat64 {
    Mat64::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

fn random_instance(rng: &mut ChaCha8Rng) -> LocalInstance {
    let d = rng.gen_range(2..=8);
    let p = rng.gen_range(1..=3);
    let n_k = rng.gen_range(5..=100);
    LocalInstance {
        data: ClientDataset::new(
            random_mat(rng, n_k, d, 1.0),
            random_mat(rng, n_k, p * d, 1.0),
        )
        .unwrap(),
        w: random_mat(rng, d, d, 0.5),
        a: random_mat(rng, p * d, d, 0.5),
        beta: random_mat(rng, d, d, 0.3),
        gamma: random_mat(rng, p * d, d, 0.3),
        rho2: rng.gen_range(0.5..5.0),
    }
}

/// Gradients of the augmented local objective, assembled independently from
/// the raw designs.
fn local_gradients(inst: &LocalInstance, b: &Mat64, dk: &Mat64) -> (Mat64, Mat64) {
    let n_k = inst.data.n_k() as f64;
    let x_t = inst.data.x_t();
    let x_lag = inst.data.x_lag();
    let residual = x_t.sub(&x_t.matmul(b)).sub(&x_lag.matmul(dk));
    let grad_b = x_t
        .tn_mul(&residual)
        .scale(-1.0 / n_k)
        .add(&inst.beta)
        .add(&b.sub(&inst.w).scale(inst.rho2));
    let grad_d = x_lag
        .tn_mul(&residual)
        .scale(-1.0 / n_k)
        .add(&inst.gamma)
        .add(&dk.sub(&inst.a).scale(inst.rho2));
    (grad_b, grad_d)
}

fn right_hand_sides(inst: &LocalInstance) -> (Mat64, Mat64) {
    let gram = inst.data.gram();
    let b1 = gram
        .s
        .sub(&inst.beta)
        .add(&inst.w.scale(inst.rho2));
    let b2 = gram
        .m
        .transpose()
        .sub(&inst.gamma)
        .add(&inst.a.scale(inst.rho2));
    (b1, b2)
}

#[test]
fn closed_form_zeroes_the_local_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let (b, dk) = local_update(
            &inst.data, &inst.w, &inst.a, &inst.beta, &inst.gamma, inst.rho2,
        )
        .unwrap();
        let (grad_b, grad_d) = local_gradients(&inst, &b, &dk);
        let (b1, b2) = right_hand_sides(&inst);
        let tol = 1e-8 * (1.0 + b1.frob_norm() + b2.frob_norm());
        assert!(grad_b.max_abs() <= tol, "B gradient {}", grad_b.max_abs());
        assert!(grad_d.max_abs() <= tol, "D gradient {}", grad_d.max_abs());
    }
}

#[test]
fn closed_form_matches_numerical_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(616);
    for _ in 0..5 {
        let inst = random_instance(&mut rng);
        let (b, dk) = local_update(
            &inst.data, &inst.w, &inst.a, &inst.beta, &inst.gamma, inst.rho2,
        )
        .unwrap();

        let d = inst.w.rows();
        let pd = inst.a.rows();
        let n_b = d * d;
        let objective = |x: &[f64], grad: &mut [f64]| {
            let bm = Mat64::from_vec(d, d, x[..n_b].to_vec()).unwrap();
            let dm = Mat64::from_vec(pd, d, x[n_b..].to_vec()).unwrap();
            let n_k = inst.data.n_k() as f64;
            let x_t = inst.data.x_t();
            let x_lag = inst.data.x_lag();
            let residual = x_t.sub(&x_t.matmul(&bm)).sub(&x_lag.matmul(&dm));
            let db = bm.sub(&inst.w);
            let dd = dm.sub(&inst.a);
            let value = residual.frob_norm().powi(2) / (2.0 * n_k)
                + inst.beta.dot(&db)
                + 0.5 * inst.rho2 * db.dot(&db)
                + inst.gamma.dot(&dd)
                + 0.5 * inst.rho2 * dd.dot(&dd);
            let (gb, gd) = local_gradients(&inst, &bm, &dm);
            grad[..n_b].copy_from_slice(gb.as_slice());
            grad[n_b..].copy_from_slice(gd.as_slice());
            value
        };
        let x0 = vec![0.0; n_b + pd * d];
        let res = bound_minimize(
            objective,
            &x0,
            &no_lower_bounds(x0.len()),
            &BoundMinimizeConfig {
                grad_tol: 1e-10,
                max_iter: 5000,
                ..Default::default()
            },
        )
        .unwrap();
        let b_num = Mat64::from_vec(d, d, res.x[..n_b].to_vec()).unwrap();
        let d_num = Mat64::from_vec(pd, d, res.x[n_b..].to_vec()).unwrap();
        assert!(
            b.sub(&b_num).max_abs() < 1e-6,
            "B mismatch {}",
            b.sub(&b_num).max_abs()
        );
        assert!(
            dk.sub(&d_num).max_abs() < 1e-6,
            "D mismatch {}",
            dk.sub(&d_num).max_abs()
        );
    }
}

#[test]
fn global_lag_block_matches_soft_threshold_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(717);
    let d = 4;
    let pd = 8;
    let clients = 3;
    let local_b: Vec<Mat64> = (0..clients).map(|_| random_mat(&mut rng, d, d, 0.5)).collect();
    let local_d: Vec<Mat64> = (0..clients)
        .map(|_| random_mat(&mut rng, pd, d, 0.5))
        .collect();
    let beta: Vec<Mat64> = (0..clients).map(|_| random_mat(&mut rng, d, d, 0.2)).collect();
    let gamma: Vec<Mat64> = (0..clients)
        .map(|_| random_mat(&mut rng, pd, d, 0.2))
        .collect();
    let rho2 = 1.7;
    let mut cfg = FdbnlConfig {
        lambda_w: 0.05,
        lambda_a: 0.12,
        ..Default::default()
    };
    cfg.inner.grad_tol = 1e-9;
    cfg.inner.max_iter = 3000;

    // First-order conditions give A = soft((1/K)Σ(D_k + γ_k/ρ2), λ_A/(K·ρ2)).
    let mut target = Mat64::zeros(pd, d);
    for k in 0..clients {
        target.add_scaled(&local_d[k], 1.0);
        target.add_scaled(&gamma[k], 1.0 / rho2);
    }
    target = target.scale(1.0 / clients as f64);
    let level = cfg.lambda_a / (clients as f64 * rho2);
    let oracle = target.map(|v| v.signum() * (v.abs() - level).max(0.0));

    for closed_form in [false, true] {
        cfg.a_block_closed_form = closed_form;
        let (_, a) = global_update(
            &local_b,
            &local_d,
            &beta,
            &gamma,
            0.3,
            1.0,
            rho2,
            &cfg,
            &Mat64::zeros(d, d),
            &Mat64::zeros(pd, d),
        )
        .unwrap();
        let diff = a.sub(&oracle).max_abs();
        assert!(diff < 1e-6, "closed_form={closed_form}: A differs by {diff}");
    }
}
