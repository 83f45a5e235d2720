//! Perturbation file format and random construction.
//!
//! File format (one coefficient per line):
//! ```text
//! perturbation v1
//! degree: 2
//! a+ 0 0 1/2
//! b- 1 1 -0.25
//! ```
//! Kinds are a+, a-, b+, b- for f⁺, f⁻, g⁺, g⁻; values are exact rationals
//! (`num/den`, integer, or plain decimal).

use anyhow::{bail, Context, Result};
use melnikov_core::rational::parse_rational;
use melnikov_core::reduction::PerturbationSampler;
use melnikov_core::systems::{CoeffKind, Perturbation};
use std::path::Path;

pub fn read_perturbation(path: &Path) -> Result<Perturbation> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading perturbation {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    if header.trim() != "perturbation v1" {
        bail!("{}: expected header 'perturbation v1'", path.display());
    }
    let mut degree: Option<u32> = None;
    let mut entries: Vec<(CoeffKind, u32, u32, melnikov_core::rational::BigRational)> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("degree:") {
            degree = Some(v.trim().parse().with_context(|| format!("line {}", lineno + 1))?);
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            bail!("{}:{}: expected '<kind> <i> <j> <value>'", path.display(), lineno + 1);
        }
        let kind = match parts[0] {
            "a+" => CoeffKind::APlus,
            "a-" => CoeffKind::AMinus,
            "b+" => CoeffKind::BPlus,
            "b-" => CoeffKind::BMinus,
            other => bail!("{}:{}: unknown kind {other}", path.display(), lineno + 1),
        };
        let i: u32 = parts[1].parse().with_context(|| format!("line {}", lineno + 1))?;
        let j: u32 = parts[2].parse().with_context(|| format!("line {}", lineno + 1))?;
        let value = parse_rational(parts[3])
            .with_context(|| format!("{}:{}: bad rational {}", path.display(), lineno + 1, parts[3]))?;
        entries.push((kind, i, j, value));
    }
    let degree = degree.context("missing 'degree:' line")?;
    let mut p = Perturbation::new(degree);
    for (kind, i, j, value) in entries {
        p.set(kind, i, j, value)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    }
    Ok(p)
}

/// The perturbation a run works with: a file when given, otherwise a dense
/// random draw from the documented seeded stream.
pub fn resolve_perturbation(cfg: &crate::config::RunConfig) -> Result<(Perturbation, String)> {
    if let Some(path) = &cfg.perturbation {
        let p = read_perturbation(path)?;
        Ok((p, format!("file {}", path.display())))
    } else {
        let p = PerturbationSampler::new(cfg.seed).perturbation(cfg.degree);
        Ok((p, format!("random seed={} degree={}", cfg.seed, cfg.degree)))
    }
}
