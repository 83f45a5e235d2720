//! `melnikov reduce`: basis representation of a perturbation plus the
//! residual-vs-oracle table, and the annihilating operator when the target
//! block is alive.

use crate::config::{self, FileConfig};
use crate::out::{fmt_f, OutDir, Summary, Table};
use crate::pio::resolve_perturbation;
use anyhow::Result;
use melnikov_core::picard_fuchs::construct_annihilator;
use melnikov_core::quad::melnikov_direct_with;
use melnikov_core::reduction::{
    basis_elements, evaluate_representation, melnikov_representation, MelnikovRepresentation,
};

const ORACLE_TOL: f64 = 1e-6;

pub fn run(file: &FileConfig, common: &crate::CommonArgs) -> Result<u8> {
    let cfg = config::resolve(file, common)?;
    let sys = config::require_system(&cfg)?;
    let (p, origin) = resolve_perturbation(&cfg)?;
    let grid = cfg.grid.unwrap_or(20).max(2);

    let rep = melnikov_representation(sys, &p).map_err(|e| anyhow::anyhow!("{e}"))?;
    let out = OutDir::create(&cfg.out)?;
    out.write("representation.txt", &rep.export_text())?;

    // residual-vs-oracle table over a guarded grid
    let (lo, hi) = sys.energy_interval();
    let guard = 5e-3 * (hi - lo);
    let mut table = Table::new("h,direct,representation,abs_err");
    let mut max_mismatch = 0.0f64;
    for k in 0..grid {
        let h = lo + guard + (hi - lo - 2.0 * guard) * k as f64 / (grid - 1) as f64;
        let direct = melnikov_direct_with(sys, &p, h, cfg.tol).map_err(|e| anyhow::anyhow!("{e}"))?;
        let via = evaluate_representation(&rep, h).map_err(|e| anyhow::anyhow!("{e}"))?;
        let rel = (via - direct).abs() / (1.0 + direct.abs());
        max_mismatch = max_mismatch.max(rel);
        table.row(&[fmt_f(h), fmt_f(direct), fmt_f(via), fmt_f((via - direct).abs())]);
    }
    out.write("oracle.csv", &table.finish())?;

    let bounds_ok = rep.check_degree_invariants(false);
    let mut summary = Summary::new("reduce");
    summary.kv("system", sys.name());
    summary.kv("perturbation", &origin);
    summary.kv("degree", rep.degree());
    summary.kv("denom_power", rep.denom_power());
    summary.kv("denom_bound", MelnikovRepresentation::denom_bound(sys, rep.degree()));
    for (k, &(i, j)) in basis_elements(sys).iter().enumerate() {
        summary.kv(
            &format!("coeff_degree I[{i},{j}]"),
            rep.decomposition().coeffs()[k].degree(),
        );
    }
    summary.kv("max_oracle_mismatch", fmt_f(max_mismatch));
    summary.kv("oracle_ok", max_mismatch < ORACLE_TOL);
    summary.kv(
        "degree_bounds_ok",
        match &bounds_ok {
            Ok(()) => "true".to_string(),
            Err(e) => format!("false ({e})"),
        },
    );

    // annihilator export when the target block is nonzero
    match construct_annihilator(sys, &rep) {
        Ok(ann) => {
            out.write("annihilator.txt", &ann.export_text())?;
            summary.kv("annihilator", "written");
            summary.kv("annihilator_kernel_dim", ann.kernel_dim);
        }
        Err(melnikov_core::Error::Precondition(_)) => {
            summary.kv("annihilator", "skipped (target block is zero)");
        }
        Err(e) => return Err(anyhow::anyhow!("{e}")),
    }

    out.write("summary.txt", &summary.finish())?;
    let ok = max_mismatch < ORACLE_TOL && bounds_ok.is_ok();
    println!(
        "reduce: max oracle mismatch {} ({})",
        fmt_f(max_mismatch),
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { 1 })
}
