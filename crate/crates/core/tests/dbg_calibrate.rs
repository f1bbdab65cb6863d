// temporary: joint rho grid
use dbnl_core::datagen::{gen_homogeneous, GenConfig, HomogeneousScene};
use dbnl_core::fdbnl::{run_fdbnl, FdbnlConfig};
use dbnl_core::metrics::shd;

#[test]
fn fdbnl_rho_grid2() {
    for rho1 in [1e3, 1e4, 1e5] {
        for rho2 in [1.0, 10.0] {
            for lam in [0.02, 0.05] {
                let mut hits = 0;
                let mut w_sum = 0;
                let mut a_sum = 0;
                let mut conv = 0;
                let mut per = Vec::new();
                for seed in 0..10u64 {
                    let gen = GenConfig::new(5, 3, 1000 + seed);
                    let HomogeneousScene { truth, datasets } =
                        gen_homogeneous::<f64>(&gen, 500, 10).unwrap();
                    let mut cfg = FdbnlConfig::default();
                    cfg.lambda_w = lam;
                    cfg.lambda_a = lam;
                    cfg.rho1_init = rho1;
                    cfg.rho2_init = rho2;
                    let fit = run_fdbnl(&datasets, &cfg, seed).unwrap();
                    if fit.converged { conv += 1; }
                    let pred = fit.dbn.threshold(0.3, 0.3).unwrap();
                    let tg = truth.threshold(0.3, 0.3).unwrap();
                    let (dw, da) = shd(&pred, &tg).unwrap();
                    w_sum += dw; a_sum += da;
                    per.push((dw, da));
                    if dw <= 1 && da <= 2 { hits += 1; }
                }
                println!(
                    "rho1={rho1:.0e} rho2={rho2} lam={lam}: hits {hits}/10 conv {conv}/10 mean (w {:.1}, a {:.1}) {:?}",
                    w_sum as f64 / 10.0, a_sum as f64 / 10.0, per
                );
            }
        }
    }
}
