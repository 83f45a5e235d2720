//! `melnikov cycles`: Melnikov zero report, simulated limit-cycle search,
//! and the comparison between the two.

use crate::config::{self, FileConfig};
use crate::out::{fmt_f, OutDir, Summary, Table};
use crate::pio::resolve_perturbation;
use anyhow::Result;
use melnikov_core::reduction::melnikov_representation;
use melnikov_core::sim::{find_limit_cycles, integrate_piecewise, section_interval, SimOptions};
use melnikov_core::systems::{hamiltonian, PlanarState, Side};
use melnikov_core::zeros::{isolate_zeros, ZeroKind};

/// Energy guard (fraction of the interval width) for the cycle-search
/// window; keeps eps-perturbed trajectories away from the separatrix.
const SEARCH_GUARD_FRACTION: f64 = 0.08;

pub fn run(
    file: &FileConfig,
    common: &crate::CommonArgs,
    eps: Option<f64>,
    samples: Option<usize>,
    trajectory_from: Option<f64>,
    trajectory_events: usize,
) -> Result<u8> {
    let cfg = config::resolve(file, common)?;
    let sys = config::require_system(&cfg)?;
    let eps = match eps.or(cfg.eps) {
        Some(e) if e != 0.0 => e,
        Some(_) => return super::usage_error("eps must be nonzero for a cycle search"),
        None => 1e-3,
    };
    let samples = samples.or(cfg.samples).unwrap_or(25).max(2);
    let grid = cfg.grid.unwrap_or(512);
    let (p, origin) = resolve_perturbation(&cfg)?;

    let rep = melnikov_representation(sys, &p).map_err(|e| anyhow::anyhow!("{e}"))?;
    let report = isolate_zeros(&rep, grid, 0.0).map_err(|e| anyhow::anyhow!("{e}"))?;

    let out = OutDir::create(&cfg.out)?;
    let mut ztable = Table::new("h_lo,h_hi,root,kind");
    let mut ztext = String::from("zero-report v1\n");
    ztext.push_str(&format!("system: {}\n", sys.name()));
    ztext.push_str(&format!("degree: {}\n", rep.degree()));
    ztext.push_str(&format!("grid: {}\n", report.grid));
    ztext.push_str(&format!("tol: {}\n", fmt_f(report.tol)));
    ztext.push_str(&format!("bound: {}\n", report.bound));
    ztext.push_str(&format!("within_bound: {}\n", report.within_bound));
    ztext.push_str(&format!("all_zero: {}\n", report.all_zero));
    ztext.push_str(&format!("brackets: {}\n", report.brackets.len()));
    for (k, b) in report.brackets.iter().enumerate() {
        let kind = match b.kind {
            ZeroKind::OddSimple => "odd-simple",
            ZeroKind::EvenSuspected => "even-suspected",
        };
        ztext.push_str(&format!(
            "bracket {k}: h_lo={} h_hi={} root={} kind={kind}\n",
            fmt_f(b.h_lo),
            fmt_f(b.h_hi),
            fmt_f(b.root)
        ));
        ztable.row(&[fmt_f(b.h_lo), fmt_f(b.h_hi), fmt_f(b.root), kind.to_string()]);
    }
    out.write("zeros.csv", &ztable.finish())?;
    out.write("zeros.txt", &ztext)?;

    // cycle search over the guarded section window
    let opts = SimOptions::default();
    let (lo, hi) = sys.energy_interval();
    let h_guard = SEARCH_GUARD_FRACTION * (hi - lo);
    let window = section_interval(sys, h_guard).map_err(|e| anyhow::anyhow!("{e}"))?;
    let findings = find_limit_cycles(sys, &p, eps, window, samples, &opts)
        .map_err(|e| anyhow::anyhow!("cycle search: {e}"))?;

    let mut ctable = Table::new("fixed_x,h_cycle,residual");
    for f in &findings {
        ctable.row(&[fmt_f(f.fixed_x), fmt_f(f.h_cycle), fmt_f(f.residual)]);
    }
    out.write("cycles.csv", &ctable.finish())?;

    // zeros inside the searched energy window, for the comparison
    let h_window = (lo + h_guard, hi - h_guard);
    let odd_in_window = report
        .brackets
        .iter()
        .filter(|b| b.kind == ZeroKind::OddSimple && b.root > h_window.0 && b.root < h_window.1)
        .count();

    let mut summary = Summary::new("cycles");
    summary.kv("system", sys.name());
    summary.kv("perturbation", &origin);
    summary.kv("eps", fmt_f(eps));
    summary.kv("grid", report.grid);
    summary.kv("samples", samples);
    summary.kv("bound", report.bound);
    summary.kv("odd_zeros_total", report.odd_count());
    summary.kv("even_suspected", report.brackets.len() - report.odd_count());
    summary.kv("within_bound", report.within_bound);
    summary.kv("search_h_window", format!("{} .. {}", fmt_f(h_window.0), fmt_f(h_window.1)));
    summary.kv("odd_zeros_in_window", odd_in_window);
    summary.kv("cycles_found", findings.len());
    summary.kv("counts_match", odd_in_window == findings.len());

    if let Some(x0) = trajectory_from {
        let mut topts = SimOptions::default();
        topts.record_points = true;
        let h0 = hamiltonian(sys, x0, 0.0).map_err(|e| anyhow::anyhow!("{e}"))?;
        sys.check_interior(h0).map_err(|e| anyhow::anyhow!("{e}"))?;
        let start = PlanarState { x: x0, y: 0.0, side: Side::Upper };
        let traj = integrate_piecewise(sys, &p, eps, start, trajectory_events, &topts)
            .map_err(|e| anyhow::anyhow!("trajectory dump: {e}"))?;
        let mut ttable = Table::new("t,x,y,side");
        for pt in &traj.points {
            let side = match pt.side {
                Side::Upper => "upper",
                Side::Lower => "lower",
                Side::OnSection => "on-section",
            };
            ttable.row(&[fmt_f(pt.t), fmt_f(pt.x), fmt_f(pt.y), side.to_string()]);
        }
        out.write("trajectory.csv", &ttable.finish())?;
        summary.kv("trajectory_points", traj.points.len());
        summary.kv("trajectory_events", traj.events.len());
    }

    out.write("summary.txt", &summary.finish())?;
    println!(
        "cycles: {} odd zeros in window, {} cycles found, bound {} ({})",
        odd_in_window,
        findings.len(),
        report.bound,
        if report.within_bound { "within bound" } else { "BOUND EXCEEDED" }
    );
    Ok(if report.within_bound { 0 } else { 1 })
}
