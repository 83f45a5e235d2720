//! Zero isolation for Melnikov representations, multiplicity flags, and the
//! theoretical upper-bound envelopes.

use crate::error::{Error, Result};
use crate::reduction::{cached_basis_values, evaluate_representation_with_basis, MelnikovRepresentation};
use crate::systems::{endpoint_d2x_dh2, oval_endpoints, SystemId};

/// Default zero-isolation grid size.
pub const DEFAULT_GRID: usize = 512;
/// Guard fraction of the interval width at both ends.
pub const GRID_GUARD_FRACTION: f64 = 1e-3;

/// Classification of an isolated zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroKind {
    /// Sign change across the bracket: odd multiplicity.
    OddSimple,
    /// |M| dips below tolerance without a sign change: suspected even zero.
    EvenSuspected,
}

/// One isolated zero with its bracket.
#[derive(Debug, Clone, Copy)]
pub struct ZeroBracket {
    pub h_lo: f64,
    pub h_hi: f64,
    pub root: f64,
    pub kind: ZeroKind,
}

/// Zeros of M on the guarded energy interval, checked against the bound.
#[derive(Debug, Clone)]
pub struct ZeroReport {
    pub brackets: Vec<ZeroBracket>,
    pub grid: usize,
    pub tol: f64,
    pub bound: u64,
    pub within_bound: bool,
    /// Set when M vanished identically on the whole grid.
    pub all_zero: bool,
}

impl ZeroReport {
    pub fn odd_count(&self) -> usize {
        self.brackets.iter().filter(|b| b.kind == ZeroKind::OddSimple).count()
    }
}

/// Upper bound of Theorem 1.1 on the number of zeros (counting multiplicity)
/// of the first-order Melnikov function for a degree-n perturbation.
pub fn theoretical_bound(sys: SystemId, n: u32) -> Result<u64> {
    if n < 1 {
        return Err(Error::Precondition(format!("degree must be at least 1 (got {n})")));
    }
    Ok(match sys {
        SystemId::Lv => match n {
            1 => 37,
            2 => 57,
            3 => 93,
            _ => 36 * n as u64 - 65,
        },
        SystemId::Bt => 12 * n as u64 + 6,
    })
}

/// Evaluates M on a uniform guarded grid, brackets sign changes, refines by
/// bisection, and flags below-tolerance local minima of |M| without a sign
/// change as suspected even zeros.
pub fn isolate_zeros(rep: &MelnikovRepresentation, grid: usize, tol: f64) -> Result<ZeroReport> {
    if grid < 64 {
        return Err(Error::Precondition(format!("grid must be at least 64 (got {grid})")));
    }
    let sys = rep.sys();
    let (lo, hi) = sys.energy_interval();
    let guard = GRID_GUARD_FRACTION * (hi - lo);
    let (a, b) = (lo + guard, hi - guard);
    let bound = theoretical_bound(sys, rep.degree())?;

    let eval = |h: f64| -> Result<f64> {
        let basis = cached_basis_values(sys, h, 1e-11)?;
        Ok(evaluate_representation_with_basis(rep, h, &basis))
    };

    let hs: Vec<f64> = (0..grid).map(|k| a + (b - a) * k as f64 / (grid - 1) as f64).collect();
    let ms: Vec<f64> = hs.iter().map(|&h| eval(h)).collect::<Result<_>>()?;

    let max_abs = ms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(ZeroReport {
            brackets: Vec::new(),
            grid,
            tol,
            bound,
            within_bound: true,
            all_zero: true,
        });
    }
    let tol = if tol > 0.0 { tol } else { 1e-10 * max_abs };

    let mut brackets = Vec::new();
    for k in 0..grid - 1 {
        let (h0, h1) = (hs[k], hs[k + 1]);
        let (m0, m1) = (ms[k], ms[k + 1]);
        if m0 == 0.0 {
            // grid point exactly on a zero: classify from the neighbors
            if k > 0 && ms[k - 1] * m1 < 0.0 {
                continue; // already captured by the surrounding sign change
            }
        }
        if m0 * m1 < 0.0 {
            let (mut x0, mut x1, mut f0) = (h0, h1, m0);
            let mut root = 0.5 * (x0 + x1);
            for _ in 0..200 {
                root = 0.5 * (x0 + x1);
                let fm = eval(root)?;
                if fm.abs() <= tol || (x1 - x0) < 1e-14 {
                    break;
                }
                if fm.signum() == f0.signum() {
                    x0 = root;
                    f0 = fm;
                } else {
                    x1 = root;
                }
            }
            brackets.push(ZeroBracket { h_lo: h0, h_hi: h1, root, kind: ZeroKind::OddSimple });
        } else if k > 0 && k + 1 < grid {
            // strict local minimum of |M| dipping below tolerance, away from
            // any sign change (those are already counted as odd)
            let cur = ms[k].abs();
            let same_sign =
                ms[k - 1].signum() == ms[k].signum() && ms[k].signum() == ms[k + 1].signum();
            if same_sign && cur <= tol && cur < ms[k - 1].abs() && cur <= ms[k + 1].abs() && ms[k] != 0.0
            {
                brackets.push(ZeroBracket {
                    h_lo: hs[k - 1],
                    h_hi: hs[k + 1],
                    root: hs[k],
                    kind: ZeroKind::EvenSuspected,
                });
            }
        }
    }

    let odd = brackets.iter().filter(|b| b.kind == ZeroKind::OddSimple).count() as u64;
    Ok(ZeroReport { brackets, grid, tol, bound, within_bound: odd <= bound, all_zero: false })
}

/// The single interior zero h₀ of I₀,₀″ for BT, from the closed endpoint
/// form I₀,₀″(h) = x_b″(h) − x_a″(h) with x″ = 2x/(1−x²)³, located by
/// bisection after asserting exactly one sign change on the guarded
/// interval.
pub fn bt_second_derivative_zero() -> Result<f64> {
    let sys = SystemId::Bt;
    let (lo, hi) = sys.energy_interval();
    let guard = GRID_GUARD_FRACTION * (hi - lo);
    let f = |h: f64| -> Result<f64> {
        let e = oval_endpoints(sys, h)?;
        Ok(endpoint_d2x_dh2(sys, e.x_b) - endpoint_d2x_dh2(sys, e.x_a))
    };
    let n = 4096;
    let (a, b) = (lo + guard, hi - guard);
    let mut crossings = Vec::new();
    let mut prev_h = a;
    let mut prev = f(a)?;
    for k in 1..n {
        let h = a + (b - a) * k as f64 / (n - 1) as f64;
        let cur = f(h)?;
        if prev.signum() != cur.signum() {
            crossings.push((prev_h, h));
        }
        prev = cur;
        prev_h = h;
    }
    if crossings.len() != 1 {
        return Err(Error::Consistency(format!(
            "I00'' should change sign exactly once on the guarded interval, found {}",
            crossings.len()
        )));
    }
    let (mut x0, mut x1) = crossings[0];
    let mut f0 = f(x0)?;
    for _ in 0..200 {
        let mid = 0.5 * (x0 + x1);
        let fm = f(mid)?;
        if fm == 0.0 || (x1 - x0) < 1e-15 {
            return Ok(mid);
        }
        if fm.signum() == f0.signum() {
            x0 = mid;
            f0 = fm;
        } else {
            x1 = mid;
        }
    }
    Ok(0.5 * (x0 + x1))
}
