//! Numerical evaluation of the Abelian integrals I_{i,j}(h), J_{i,j}(h),
//! their h-derivatives, and the direct line-integral Melnikov function that
//! serves as the independent oracle for the reduction engine.
//!
//! Index convention: for LV the integrand is x^{i−4} y^j (the x⁻⁴ integrating
//! factor is folded into the index), for BT it is x^i y^j. The upper branch
//! Γ_h⁺ runs from x_a to x_b, the lower branch Γ_h⁻ back from x_b to x_a.
//!
//! Integrands with j ≥ 1 vanish like √(x−x_a)·√(x_b−x) at the oval endpoints,
//! so every quadrature runs in the angular variable x = c + r·sin θ, where the
//! branch factorizes as y = r·cos θ·√(s(x)) with s smooth and positive; the
//! substitution removes the square-root behavior exactly.

use crate::error::{Error, Result};
use crate::gauss;
use crate::systems::{oval_endpoints, SystemId};
use num_traits::ToPrimitive;

/// Default absolute+relative quadrature tolerance.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Order cap for the adaptive rule (doubling from 16).
pub const MAX_QUAD_ORDER: usize = 1 << 14;

/// One Abelian integral I_{i,j} of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntegralId {
    pub sys: SystemId,
    pub i: i32,
    pub j: u32,
}

impl IntegralId {
    pub fn new(sys: SystemId, i: i32, j: u32) -> Result<Self> {
        if sys == SystemId::Bt && i < 0 {
            return Err(Error::UnsupportedIndex { sys: sys.name(), i: i as i64, j: j as i64 });
        }
        Ok(IntegralId { sys, i, j })
    }

    /// Exponent of x actually appearing in the integrand.
    fn x_exponent(&self) -> i32 {
        self.i + self.sys.weight_exponent()
    }
}

/// Level-oval geometry shared by the quadratures at one (sys, h).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Oval {
    pub sys: SystemId,
    pub h: f64,
    pub x_a: f64,
    pub x_b: f64,
    center: f64,
    radius: f64,
    /// Third real root of the branch cubic, outside [x_a, x_b].
    third_root: f64,
}

impl Oval {
    pub fn new(sys: SystemId, h: f64) -> Result<Self> {
        let e = oval_endpoints(sys, h)?;
        // Sum of the cubic's roots gives the third one in closed form.
        let third_root = match sys {
            SystemId::Lv => -9.0 / (8.0 * h) - e.x_a - e.x_b,
            SystemId::Bt => -e.x_a - e.x_b,
        };
        Ok(Oval {
            sys,
            h,
            x_a: e.x_a,
            x_b: e.x_b,
            center: 0.5 * (e.x_a + e.x_b),
            radius: 0.5 * (e.x_b - e.x_a),
            third_root,
        })
    }

    pub fn x_of(&self, theta: f64) -> f64 {
        self.center + self.radius * theta.sin()
    }

    /// Smooth positive factor with y_upper = r·cos θ·√(s(x)).
    fn smooth_factor(&self, x: f64) -> f64 {
        match self.sys {
            SystemId::Lv => (-2.0 * self.h * (x - self.third_root)).max(0.0),
            SystemId::Bt => (2.0 / 3.0 * (self.third_root - x)).max(0.0),
        }
    }

    pub fn y_upper(&self, theta: f64) -> f64 {
        self.radius * theta.cos() * self.smooth_factor(self.x_of(theta)).sqrt()
    }

    /// d(y²/2)/dx, the numerator of dy/dx = num/y on either branch.
    fn dy_numerator(&self, x: f64) -> f64 {
        match self.sys {
            SystemId::Lv => 3.0 * self.h * x * x + 2.25 * x - 0.75,
            SystemId::Bt => x * x - 1.0,
        }
    }
}

/// Adaptive Gauss–Legendre over θ ∈ [−π/2, π/2] with order doubling.
pub(crate) fn theta_quadrature(f: &mut dyn FnMut(f64) -> f64, tol: f64) -> Result<f64> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut order = 16;
    let mut prev = gauss::integrate_fixed(order, -half_pi, half_pi, f);
    let mut update = f64::INFINITY;
    while order < MAX_QUAD_ORDER {
        order *= 2;
        let next = gauss::integrate_fixed(order, -half_pi, half_pi, f);
        update = (next - prev).abs();
        if update <= tol * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy { estimate: prev, last_update: update })
}

fn powi_checked(x: f64, e: i32) -> f64 {
    x.powi(e)
}

/// Upper-branch integral ∫ x^pow · y^j dx by the angular substitution.
fn branch_dx_integral(oval: &Oval, pow: i32, j: u32, tol: f64) -> Result<f64> {
    if j == 0 {
        return Ok(power_antiderivative(pow, oval.x_a, oval.x_b));
    }
    let r = oval.radius;
    theta_quadrature(
        &mut |t| {
            let x = oval.x_of(t);
            let y = oval.y_upper(t);
            powi_checked(x, pow) * y.powi(j as i32) * r * t.cos()
        },
        tol,
    )
}

/// Closed-form ∫_a^b x^pow dx.
fn power_antiderivative(pow: i32, a: f64, b: f64) -> f64 {
    if pow == -1 {
        (b / a).ln()
    } else {
        let e = pow + 1;
        (b.powi(e) - a.powi(e)) / e as f64
    }
}

/// I_{i,j}(h) over the upper branch, x_a → x_b.
pub fn abelian_integral(id: IntegralId, h: f64) -> Result<f64> {
    abelian_integral_with(id, h, DEFAULT_QUAD_TOL)
}

pub fn abelian_integral_with(id: IntegralId, h: f64, tol: f64) -> Result<f64> {
    let oval = Oval::new(id.sys, h)?;
    branch_dx_integral(&oval, id.x_exponent(), id.j, tol)
}

/// J_{i,j}(h) over the lower branch, traversed x_b → x_a, by its own
/// quadrature. Exists to test the reflection identity, so it deliberately
/// does not reuse (−1)^{j+1}·I.
pub fn lower_abelian_integral(id: IntegralId, h: f64) -> Result<f64> {
    lower_abelian_integral_with(id, h, DEFAULT_QUAD_TOL)
}

pub fn lower_abelian_integral_with(id: IntegralId, h: f64, tol: f64) -> Result<f64> {
    let oval = Oval::new(id.sys, h)?;
    let pow = id.x_exponent();
    let j = id.j;
    if j == 0 {
        // Reversed traversal of the same pure power of x.
        return Ok(-power_antiderivative(pow, oval.x_a, oval.x_b));
    }
    let r = oval.radius;
    let forward = theta_quadrature(
        &mut |t| {
            let x = oval.x_of(t);
            let y_lower = -oval.y_upper(t);
            powi_checked(x, pow) * y_lower.powi(j as i32) * r * t.cos()
        },
        tol,
    )?;
    Ok(-forward)
}

/// Step for central differences in h, clamped by the distance to the
/// interval endpoints (guard band included).
pub fn fd_step(sys: SystemId, h: f64, scale: f64) -> f64 {
    let (lo, hi) = sys.energy_interval();
    let width = hi - lo;
    (scale * width).min(0.2 * (h - lo)).min(0.2 * (hi - h))
}

/// 5-point central first derivative of a pointwise-computed function.
pub fn fd_derivative(f: &mut dyn FnMut(f64) -> Result<f64>, h: f64, delta: f64) -> Result<f64> {
    let m2 = f(h - 2.0 * delta)?;
    let m1 = f(h - delta)?;
    let p1 = f(h + delta)?;
    let p2 = f(h + 2.0 * delta)?;
    Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * delta))
}

/// 5-point central second derivative.
pub fn fd_second_derivative(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    h: f64,
    delta: f64,
) -> Result<f64> {
    let m2 = f(h - 2.0 * delta)?;
    let m1 = f(h - delta)?;
    let c = f(h)?;
    let p1 = f(h + delta)?;
    let p2 = f(h + 2.0 * delta)?;
    Ok((-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * delta * delta))
}

/// dI_{i,j}/dh. For j ≥ 2 this is exact up to quadrature via the derivative
/// identities (LV: I'_{i,j} = j·I_{i+3,j−2}; BT: I'_{i,j} = j·I_{i,j−2});
/// j ∈ {0, 1} falls back to five-point central differences.
pub fn abelian_derivative(id: IntegralId, h: f64) -> Result<f64> {
    if id.j >= 2 {
        let shifted = match id.sys {
            SystemId::Lv => IntegralId { sys: id.sys, i: id.i + 3, j: id.j - 2 },
            SystemId::Bt => IntegralId { sys: id.sys, i: id.i, j: id.j - 2 },
        };
        return Ok(id.j as f64 * abelian_integral(shifted, h)?);
    }
    let delta = fd_step(id.sys, h, 1e-3);
    fd_derivative(&mut |t| abelian_integral_with(id, t, 1e-12), h, delta)
}

/// Green-shift factor turning −∫ w·x^i y^j dy into +factor·∫ w·x^{i−1} y^{j+1} dx
/// on the same branch. Zero for BT with i = 0, where the dy-integral vanishes.
pub(crate) fn green_shift_factor(sys: SystemId, i: u32, j: u32) -> f64 {
    match sys {
        SystemId::Lv => (i as f64 - 4.0) / (j as f64 + 1.0),
        SystemId::Bt => i as f64 / (j as f64 + 1.0),
    }
}

/// First-order Melnikov function by direct piecewise quadrature.
///
/// Every dy-term is first rewritten through the Green identity into a
/// dx-integral on its own branch (the all-dx form); each resulting integral is
/// then evaluated by branch quadrature. No reflection, recurrence, or basis
/// reduction is involved, which makes this the oracle for the engine.
pub fn melnikov_direct(sys: SystemId, p: &crate::systems::Perturbation, h: f64) -> Result<f64> {
    melnikov_direct_with(sys, p, h, DEFAULT_QUAD_TOL)
}

pub fn melnikov_direct_with(
    sys: SystemId,
    p: &crate::systems::Perturbation,
    h: f64,
    tol: f64,
) -> Result<f64> {
    let oval = Oval::new(sys, h)?;
    let w = sys.weight_exponent();
    let mut total = 0.0;

    let upper = |i: i32, j: u32| branch_dx_integral(&oval, i + w, j, tol);
    for (&(i, j), c) in p.b_plus.iter() {
        let c = c.to_f64().unwrap_or(f64::NAN);
        if c != 0.0 {
            total += c * upper(i as i32, j)?;
        }
    }
    for (&(i, j), c) in p.a_plus.iter() {
        let c = c.to_f64().unwrap_or(f64::NAN);
        let factor = green_shift_factor(sys, i, j);
        if c != 0.0 && factor != 0.0 {
            total += c * factor * upper(i as i32 - 1, j + 1)?;
        }
    }

    for (&(i, j), c) in p.b_minus.iter() {
        let c = c.to_f64().unwrap_or(f64::NAN);
        if c != 0.0 {
            total += c * lower_dx_integral(&oval, i as i32 + w, j, tol)?;
        }
    }
    for (&(i, j), c) in p.a_minus.iter() {
        let c = c.to_f64().unwrap_or(f64::NAN);
        let factor = green_shift_factor(sys, i, j);
        if c != 0.0 && factor != 0.0 {
            total += c * factor * lower_dx_integral(&oval, i as i32 - 1 + w, j + 1, tol)?;
        }
    }
    Ok(total)
}

/// Lower-branch dx-integral with the x_b → x_a traversal.
fn lower_dx_integral(oval: &Oval, pow: i32, j: u32, tol: f64) -> Result<f64> {
    if j == 0 {
        return Ok(-power_antiderivative(pow, oval.x_a, oval.x_b));
    }
    let r = oval.radius;
    let forward = theta_quadrature(
        &mut |t| {
            let x = oval.x_of(t);
            let y = -oval.y_upper(t);
            powi_checked(x, pow) * y.powi(j as i32) * r * t.cos()
        },
        tol,
    )?;
    Ok(-forward)
}

/// Raw dy-path: ∫ w·x^i y^j dy over the upper branch, for cross-checking the
/// Green-converted form. `margin` ∈ [0, 0.5) restricts to the interior
/// sub-interval [x_a + m·(x_b−x_a), x_b − m·(x_b−x_a)]; with margin = 0 the
/// angular substitution absorbs the 1/y endpoint blow-up of dy = (num/y)dx.
pub fn dy_integral_raw(sys: SystemId, i: i32, j: u32, h: f64, margin: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::Precondition(format!("margin {margin} outside [0, 0.5)")));
    }
    let oval = Oval::new(sys, h)?;
    let pow = i + sys.weight_exponent();
    let r = oval.radius;
    if margin == 0.0 {
        return theta_quadrature(
            &mut |t| {
                let x = oval.x_of(t);
                let num = oval.dy_numerator(x);
                let s = oval.smooth_factor(x);
                if j == 0 {
                    // y^{-1} dx = dθ/√s exactly under the substitution
                    powi_checked(x, pow) * num / s.sqrt()
                } else {
                    let y = oval.y_upper(t);
                    powi_checked(x, pow) * y.powi(j as i32 - 1) * num * r * t.cos()
                }
            },
            DEFAULT_QUAD_TOL,
        );
    }
    // Interior sub-interval in plain x; integrand is smooth there.
    let width = oval.x_b - oval.x_a;
    let a = oval.x_a + margin * width;
    let b = oval.x_b - margin * width;
    let mut order = 16;
    let mut f = |x: f64| {
        let y = crate::systems::branch_radicand(sys, x, h).max(0.0).sqrt();
        powi_checked(x, pow) * y.powi(j as i32 - 1) * oval.dy_numerator(x)
    };
    let mut prev = gauss::integrate_fixed(order, a, b, &mut f);
    let mut update = f64::INFINITY;
    while order < MAX_QUAD_ORDER {
        order *= 2;
        let next = gauss::integrate_fixed(order, a, b, &mut f);
        update = (next - prev).abs();
        if update <= DEFAULT_QUAD_TOL * (1.0 + next.abs()) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy { estimate: prev, last_update: update })
}
