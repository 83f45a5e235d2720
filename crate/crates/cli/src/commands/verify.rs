//! `melnikov verify`: pass/fail report over the Picard-Fuchs, second-order,
//! Riccati, reflection, derivative-identity, annihilator, and BT-h0 suites.
//!
//! Grid conventions match the acceptance suite: first-order residual grids
//! use an absolute 1e-2 guard; second-order and Riccati grids a guard of
//! 0.02 x interval width; the second-derivative-ratio Riccati skips +-0.05
//! around the single interior zero of I00''.

use crate::config::{self, FileConfig};
use crate::out::{fmt_f, OutDir, Summary};
use crate::par::par_map;
use anyhow::Result;
use melnikov_core::picard_fuchs::{
    annihilator_degree_bounds, construct_annihilator, guarded_grid, pf_residual, pf_system,
    riccati_residual, second_order_residual, PfBlock, RiccatiKind,
};
use melnikov_core::quad::{
    abelian_derivative, abelian_integral_with, fd_derivative, fd_step, lower_abelian_integral,
    IntegralId,
};
use melnikov_core::rational::rat;
use melnikov_core::reduction::{melnikov_representation, PerturbationSampler};
use melnikov_core::zeros::bt_second_derivative_zero;
use melnikov_core::SystemId;

const BOTH: [SystemId; 2] = [SystemId::Lv, SystemId::Bt];

struct SuiteResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn systems(cfg_sys: Option<SystemId>) -> Vec<SystemId> {
    cfg_sys.map(|s| vec![s]).unwrap_or_else(|| BOTH.to_vec())
}

fn fraction_grid(sys: SystemId, points: usize, fraction: f64) -> Vec<f64> {
    let (lo, hi) = sys.energy_interval();
    guarded_grid(sys, points, fraction * (hi - lo))
}

pub fn run(
    file: &FileConfig,
    common: &crate::CommonArgs,
    reps: Option<usize>,
    inject_pf_fault: bool,
) -> Result<u8> {
    let cfg = config::resolve(file, common)?;
    let grid = cfg.grid.unwrap_or(30).max(4);
    let reps = reps.or(cfg.reps).unwrap_or(5);
    let systems = systems(cfg.system);
    let mut results: Vec<SuiteResult> = Vec::new();

    // Picard-Fuchs first-order residuals, with the optional fault hook.
    {
        let mut worst: f64 = 0.0;
        let mut worst_at = String::new();
        for &sys in &systems {
            for block in [PfBlock::V1, PfBlock::V2] {
                let mut pf = pf_system(sys, block);
                if inject_pf_fault && sys == systems[0] && block == PfBlock::V1 {
                    pf.a[0][0] += rat(1, 1000);
                }
                let hs = guarded_grid(sys, grid, 1e-2);
                let rs = par_map(cfg.threads, &hs, |&h| pf_residual(&pf, h));
                for (h, r) in hs.iter().zip(rs) {
                    let r = r.map_err(|e| anyhow::anyhow!("{e}"))?;
                    if r > worst {
                        worst = r;
                        worst_at = format!("{}/{block:?} h={h}", sys.name());
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "picard-fuchs",
            passed: worst < 1e-6,
            detail: format!("worst residual {} at {worst_at}", fmt_f(worst)),
        });
    }

    // printed second-order relations
    {
        let mut worst: f64 = 0.0;
        let mut worst_at = String::new();
        for &sys in &systems {
            let blocks: &[PfBlock] = match sys {
                SystemId::Lv => &[PfBlock::V2],
                SystemId::Bt => &[PfBlock::V1, PfBlock::V2],
            };
            for &block in blocks {
                let hs = fraction_grid(sys, grid, 0.02);
                let rs = par_map(cfg.threads, &hs, |&h| second_order_residual(sys, block, h));
                for (h, r) in hs.iter().zip(rs) {
                    let r = r.map_err(|e| anyhow::anyhow!("{e}"))?;
                    if r > worst {
                        worst = r;
                        worst_at = format!("{}/{block:?} h={h}", sys.name());
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "second-order",
            passed: worst < 1e-5,
            detail: format!("worst residual {} at {worst_at}", fmt_f(worst)),
        });
    }

    // Riccati reductions
    {
        let mut worst: f64 = 0.0;
        let mut worst_at = String::new();
        let h0 = bt_second_derivative_zero().map_err(|e| anyhow::anyhow!("{e}"))?;
        for &sys in &systems {
            let kinds: &[RiccatiKind] = match sys {
                SystemId::Lv => &[RiccatiKind::OmegaLv],
                SystemId::Bt => &[RiccatiKind::ChiBtV2, RiccatiKind::OmegaBtSecond],
            };
            for &kind in kinds {
                for h in fraction_grid(sys, grid, 0.02) {
                    if kind == RiccatiKind::OmegaBtSecond && (h - h0).abs() <= 0.05 {
                        continue;
                    }
                    let r = riccati_residual(sys, kind, h).map_err(|e| anyhow::anyhow!("{e}"))?;
                    if r > worst {
                        worst = r;
                        worst_at = format!("{kind:?} h={h}");
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "riccati",
            passed: worst < 1e-5,
            detail: format!("worst residual {} at {worst_at}", fmt_f(worst)),
        });
    }

    // reflection identity J = (-1)^{j+1} I
    {
        let mut worst: f64 = 0.0;
        let mut worst_at = String::from("-");
        for &sys in &systems {
            let lo_i = if sys == SystemId::Lv { -1 } else { 0 };
            for h in fraction_grid(sys, 10, 2e-3) {
                for i in lo_i..=6i32 {
                    for j in 0..=(6 - i.max(0)) as u32 {
                        let id = IntegralId::new(sys, i, j).map_err(|e| anyhow::anyhow!("{e}"))?;
                        let upper =
                            abelian_integral_with(id, h, cfg.tol).map_err(|e| anyhow::anyhow!("{e}"))?;
                        let lower =
                            lower_abelian_integral(id, h).map_err(|e| anyhow::anyhow!("{e}"))?;
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        let err = (lower + sign * upper).abs() / (1.0 + upper.abs());
                        if err > worst {
                            worst = err;
                            worst_at = format!("{} ({i},{j}) h={h}", sys.name());
                        }
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "reflection",
            passed: worst < 1e-8,
            detail: format!("worst deviation {} at {worst_at}", fmt_f(worst)),
        });
    }

    // derivative identities vs finite differences (wider guard: the
    // difference stencil loses accuracy fastest at the saddle end)
    {
        let mut worst: f64 = 0.0;
        let mut worst_at = String::new();
        for &sys in &systems {
            for h in fraction_grid(sys, 10, 0.04) {
                for (i, j) in [(0, 2), (1, 2), (0, 3), (2, 3)] {
                    let id = IntegralId::new(sys, i, j).map_err(|e| anyhow::anyhow!("{e}"))?;
                    let ident = abelian_derivative(id, h).map_err(|e| anyhow::anyhow!("{e}"))?;
                    let delta = fd_step(sys, h, 1e-3);
                    let fd = fd_derivative(&mut |t| abelian_integral_with(id, t, 1e-12), h, delta)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    let err = (ident - fd).abs() / (1.0 + ident.abs());
                    if err > worst {
                        worst = err;
                        worst_at = format!("{} ({i},{j}) h={h}", sys.name());
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "derivative-identity",
            passed: worst < 1e-4,
            detail: format!("worst deviation {} at {worst_at}", fmt_f(worst)),
        });
    }

    // annihilator construction on random representations
    {
        let mut failures = 0usize;
        let mut constructed = 0usize;
        let mut min_kernel = usize::MAX;
        for &sys in &systems {
            let mut sampler = PerturbationSampler::new(1000 + cfg.seed);
            for n in 2..=4u32 {
                for _ in 0..reps {
                    let p = sampler.perturbation(n);
                    let rep = match melnikov_representation(sys, &p) {
                        Ok(r) => r,
                        Err(_) => {
                            failures += 1;
                            continue;
                        }
                    };
                    match construct_annihilator(sys, &rep) {
                        Ok(ann) => {
                            constructed += 1;
                            min_kernel = min_kernel.min(ann.kernel_dim);
                            let (d2, d1, d0) = annihilator_degree_bounds(sys, n);
                            if ann.p2.degree() > d2 || ann.p1.degree() > d1 || ann.p0.degree() > d0 {
                                failures += 1;
                            }
                        }
                        Err(_) => failures += 1,
                    }
                }
            }
        }
        results.push(SuiteResult {
            name: "annihilator",
            passed: failures == 0,
            detail: format!("{constructed} constructed, min kernel dim {min_kernel}, {failures} failures"),
        });
    }

    // the single interior zero of I00'' (BT)
    if systems.contains(&SystemId::Bt) {
        match bt_second_derivative_zero() {
            Ok(h0) => results.push(SuiteResult {
                name: "bt-h0",
                passed: true,
                detail: format!("single sign change at h0 = {}", fmt_f(h0)),
            }),
            Err(e) => results.push(SuiteResult {
                name: "bt-h0",
                passed: false,
                detail: format!("{e}"),
            }),
        }
    }

    let out = OutDir::create(&cfg.out)?;
    let mut summary = Summary::new("verify");
    summary.kv("systems", systems.iter().map(|s| s.name()).collect::<Vec<_>>().join("+"));
    summary.kv("grid", grid);
    summary.kv("fault_injected", inject_pf_fault);
    let mut all_ok = true;
    for r in &results {
        let line = format!("suite {}: {} ({})", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        println!("{line}");
        summary.kv(&format!("suite {}", r.name), format!("{} ({})", if r.passed { "PASS" } else { "FAIL" }, r.detail));
        all_ok &= r.passed;
    }
    summary.kv("result", if all_ok { "PASS" } else { "FAIL" });
    out.write("verify.txt", &summary.finish())?;
    Ok(if all_ok { 0 } else { 1 })
}
