//! `melnikov integrals`: tabulate I_{i,j}(h) over an h-grid.

use crate::config::{self, FileConfig};
use crate::out::{fmt_f, OutDir, Summary, Table};
use crate::par::par_map;
use anyhow::Result;
use melnikov_core::quad::{abelian_integral_with, IntegralId};

pub fn parse_pairs(s: &str) -> Result<Vec<(i32, u32)>> {
    let mut pairs = Vec::new();
    for chunk in s.split(';').filter(|c| !c.trim().is_empty()) {
        let Some((i, j)) = chunk.split_once(',') else {
            anyhow::bail!("pair {chunk:?} is not of the form i,j");
        };
        pairs.push((i.trim().parse()?, j.trim().parse()?));
    }
    Ok(pairs)
}

pub fn run(
    file: &FileConfig,
    common: &crate::CommonArgs,
    pairs_arg: Option<&str>,
    h_min: Option<f64>,
    h_max: Option<f64>,
) -> Result<u8> {
    let cfg = config::resolve(file, common)?;
    let sys = config::require_system(&cfg)?;
    let pairs_raw = match pairs_arg.or_else(|| file.get("pairs")) {
        Some(p) => p.to_string(),
        None => return super::usage_error("integrals requires --pairs (or the pairs config key)"),
    };
    let pairs = parse_pairs(&pairs_raw)?;
    if pairs.is_empty() {
        return super::usage_error("the (i,j) pair list is empty");
    }
    let grid = cfg.grid.unwrap_or(20);
    if grid < 2 {
        return super::usage_error("grid must be at least 2");
    }

    let (lo, hi) = sys.energy_interval();
    let guard = 1e-3 * (hi - lo);
    let h_min = h_min.or_else(|| file.get("h_min").and_then(|v| v.parse().ok())).unwrap_or(lo + guard);
    let h_max = h_max.or_else(|| file.get("h_max").and_then(|v| v.parse().ok())).unwrap_or(hi - guard);
    if !(h_min < h_max) {
        return super::usage_error("h_min must be below h_max");
    }

    let hs: Vec<f64> = (0..grid)
        .map(|k| h_min + (h_max - h_min) * k as f64 / (grid - 1) as f64)
        .collect();

    let mut table = Table::new("i,j,h,value");
    for &(i, j) in &pairs {
        let id = IntegralId::new(sys, i, j).map_err(|e| anyhow::anyhow!("{e}"))?;
        let values = par_map(cfg.threads, &hs, |&h| abelian_integral_with(id, h, cfg.tol));
        for (h, v) in hs.iter().zip(values) {
            let v = v.map_err(|e| anyhow::anyhow!("I[{i},{j}]({h}): {e}"))?;
            table.row(&[i.to_string(), j.to_string(), fmt_f(*h), fmt_f(v)]);
        }
    }

    let out = OutDir::create(&cfg.out)?;
    out.write("integrals.csv", &table.finish())?;
    let mut summary = Summary::new("integrals");
    summary.kv("system", sys.name());
    summary.kv("pairs", pairs.len());
    summary.kv("grid", grid);
    summary.kv("h_min", fmt_f(h_min));
    summary.kv("h_max", fmt_f(h_max));
    summary.kv("rows", pairs.len() * grid);
    out.write("summary.txt", &summary.finish())?;
    println!("integrals: wrote {} rows to {}", pairs.len() * grid, cfg.out.display());
    Ok(0)
}
