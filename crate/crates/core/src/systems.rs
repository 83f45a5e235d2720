//! The two unperturbed systems, their first integrals and level-oval
//! geometry, and the perturbed piecewise vector fields.
//!
//! LV is the reduced generic Lotka–Volterra system
//! `(ẋ, ẏ) = (xy, 3/2 y² − 9/8 x² + 3/2 x − 3/8)` with first integral
//! `H(x,y) = x⁻³(y²/2 − 9/8 x² + 3/4 x − 1/8)` and integrating factor `x⁻⁴`;
//! its period annulus spans `h ∈ (−1/2, 0)`. BT is the Bogdanov–Takens form
//! `(ẋ, ẏ) = (y, −1 + x²)` with `H = y²/2 + x − x³/3` and `h ∈ (−2/3, 2/3)`.
//!
//! Level ovals are traversed with x increasing from `x_a` to `x_b` on the
//! upper branch and back on the lower branch, which orients the closed orbit
//! clockwise, the same direction as the flow.

use crate::error::{Error, Result};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use std::collections::BTreeMap;

/// Guard band around the energy interval endpoints where the oval degenerates.
pub const DEGENERATE_GUARD: f64 = 1e-12;
/// Relative tolerance for oval endpoint abscissae.
const ENDPOINT_RTOL: f64 = 1e-13;

/// Selects one of the two systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemId {
    Lv,
    Bt,
}

impl SystemId {
    /// Open energy interval of the period annulus.
    pub fn energy_interval(self) -> (f64, f64) {
        match self {
            SystemId::Lv => (-0.5, 0.0),
            SystemId::Bt => (-2.0 / 3.0, 2.0 / 3.0),
        }
    }

    /// Exponent w in the integrating factor x^w (−4 for LV, 0 for BT). The
    /// same power weights every Abelian integrand.
    pub fn weight_exponent(self) -> i32 {
        match self {
            SystemId::Lv => -4,
            SystemId::Bt => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Lv => "LV",
            SystemId::Bt => "BT",
        }
    }

    /// Validates that h lies strictly inside the energy interval and
    /// outside the degeneracy guard band.
    pub fn check_interior(self, h: f64) -> Result<()> {
        let (lo, hi) = self.energy_interval();
        if !(h > lo && h < hi) {
            return Err(Error::EnergyRange { h, lo, hi });
        }
        if h - lo <= DEGENERATE_GUARD || hi - h <= DEGENERATE_GUARD {
            return Err(Error::DegenerateOval { h, guard: DEGENERATE_GUARD });
        }
        Ok(())
    }
}

/// Abscissae where the level oval `H(x, y) = h` meets the switching line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvalEndpoints {
    pub x_a: f64,
    pub x_b: f64,
    pub h: f64,
}

/// Which half-plane subsystem governs a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
    OnSection,
}

impl Side {
    pub fn of_y(y: f64) -> Side {
        if y > 0.0 {
            Side::Upper
        } else if y < 0.0 {
            Side::Lower
        } else {
            Side::OnSection
        }
    }
}

/// Planar state with its resolved half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    pub side: Side,
}

impl PlanarState {
    pub fn new(x: f64, y: f64) -> Self {
        PlanarState { x, y, side: Side::of_y(y) }
    }
}

/// One triangular coefficient array indexed by `(i, j)` with `i + j ≤ n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoeffArray(BTreeMap<(u32, u32), BigRational>);

impl CoeffArray {
    pub fn get(&self, i: u32, j: u32) -> BigRational {
        self.0.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &BigRational)> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(num_traits::Zero::is_zero)
    }
}

/// The four polynomial perturbations f±, g± of degree ≤ n, with exact
/// rational coefficients so the reduction engine stays exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    degree: u32,
    pub a_plus: CoeffArray,
    pub a_minus: CoeffArray,
    pub b_plus: CoeffArray,
    pub b_minus: CoeffArray,
}

/// Which of the four coefficient arrays a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffKind {
    /// f⁺ coefficient a⁺_{i,j}
    APlus,
    /// f⁻ coefficient a⁻_{i,j}
    AMinus,
    /// g⁺ coefficient b⁺_{i,j}
    BPlus,
    /// g⁻ coefficient b⁻_{i,j}
    BMinus,
}

impl Perturbation {
    pub fn new(degree: u32) -> Self {
        Perturbation {
            degree,
            a_plus: CoeffArray::default(),
            a_minus: CoeffArray::default(),
            b_plus: CoeffArray::default(),
            b_minus: CoeffArray::default(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn set(&mut self, kind: CoeffKind, i: u32, j: u32, c: BigRational) -> Result<()> {
        if i + j > self.degree {
            return Err(Error::Precondition(format!(
                "coefficient index ({i},{j}) exceeds degree {}",
                self.degree
            )));
        }
        let arr = match kind {
            CoeffKind::APlus => &mut self.a_plus,
            CoeffKind::AMinus => &mut self.a_minus,
            CoeffKind::BPlus => &mut self.b_plus,
            CoeffKind::BMinus => &mut self.b_minus,
        };
        arr.0.insert((i, j), c);
        Ok(())
    }

    /// Integer-pair convenience used throughout the tests.
    pub fn set_q(&mut self, kind: CoeffKind, i: u32, j: u32, num: i64, den: i64) -> Result<()> {
        self.set(kind, i, j, crate::rational::rat(num, den))
    }

    pub fn is_zero(&self) -> bool {
        self.a_plus.is_empty() && self.a_minus.is_empty() && self.b_plus.is_empty() && self.b_minus.is_empty()
    }

    /// Scales every coefficient by `s`.
    pub fn scaled(&self, s: &BigRational) -> Self {
        let scale = |a: &CoeffArray| CoeffArray(a.0.iter().map(|(k, v)| (*k, v * s)).collect());
        Perturbation {
            degree: self.degree,
            a_plus: scale(&self.a_plus),
            a_minus: scale(&self.a_minus),
            b_plus: scale(&self.b_plus),
            b_minus: scale(&self.b_minus),
        }
    }

    /// Coefficient-wise sum; the degree is the larger of the two.
    pub fn add(&self, other: &Self) -> Self {
        let merge = |a: &CoeffArray, b: &CoeffArray| {
            let mut out = a.0.clone();
            for (k, v) in &b.0 {
                let slot = out.entry(*k).or_default();
                *slot += v;
            }
            CoeffArray(out)
        };
        Perturbation {
            degree: self.degree.max(other.degree),
            a_plus: merge(&self.a_plus, &other.a_plus),
            a_minus: merge(&self.a_minus, &other.a_minus),
            b_plus: merge(&self.b_plus, &other.b_plus),
            b_minus: merge(&self.b_minus, &other.b_minus),
        }
    }

    pub(crate) fn compile(&self) -> CompiledPerturbation {
        CompiledPerturbation {
            f_plus: PolyXy::compile(&self.a_plus),
            g_plus: PolyXy::compile(&self.b_plus),
            f_minus: PolyXy::compile(&self.a_minus),
            g_minus: PolyXy::compile(&self.b_minus),
        }
    }
}

/// f64 mirror of a bivariate polynomial for the integrator hot path.
#[derive(Debug, Clone)]
pub(crate) struct PolyXy {
    terms: Vec<(u32, u32, f64)>,
}

impl PolyXy {
    fn compile(a: &CoeffArray) -> Self {
        PolyXy {
            terms: a
                .0
                .iter()
                .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                .map(|(&(i, j), c)| (i, j, c.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub(crate) fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledPerturbation {
    pub f_plus: PolyXy,
    pub g_plus: PolyXy,
    pub f_minus: PolyXy,
    pub g_minus: PolyXy,
}

/// First integral H of the unperturbed system.
pub fn hamiltonian(sys: SystemId, x: f64, y: f64) -> Result<f64> {
    match sys {
        SystemId::Lv => {
            if x <= 0.0 {
                return Err(Error::Domain(format!("LV first integral requires x > 0 (got x = {x})")));
            }
            Ok(x.powi(-3) * (0.5 * y * y - 1.125 * x * x + 0.75 * x - 0.125))
        }
        SystemId::Bt => Ok(0.5 * y * y + x - x * x * x / 3.0),
    }
}

/// H(x, 0) restricted to the switching line.
pub(crate) fn h_on_section(sys: SystemId, x: f64) -> f64 {
    match sys {
        SystemId::Lv => {
            let t = 3.0 * x - 1.0;
            -t * t / (8.0 * x * x * x)
        }
        SystemId::Bt => x - x * x * x / 3.0,
    }
}

/// dH/dx on the switching line.
pub(crate) fn dh_dx_on_section(sys: SystemId, x: f64) -> f64 {
    match sys {
        SystemId::Lv => 3.0 / (8.0 * x.powi(4)) * (3.0 * x - 1.0) * (x - 1.0),
        SystemId::Bt => 1.0 - x * x,
    }
}

/// d²H/dx² on the switching line.
pub(crate) fn d2h_dx2_on_section(sys: SystemId, x: f64) -> f64 {
    match sys {
        SystemId::Lv => -2.25 * x.powi(-3) + 4.5 * x.powi(-4) - 1.5 * x.powi(-5),
        SystemId::Bt => -2.0 * x,
    }
}

/// dx/dh of an oval endpoint abscissa: 1 / H_x(x, 0).
pub(crate) fn endpoint_dx_dh(sys: SystemId, x: f64) -> f64 {
    1.0 / dh_dx_on_section(sys, x)
}

/// d²x/dh² of an oval endpoint abscissa: −H_xx / H_x³. For BT this is the
/// closed form 2x/(1−x²)³.
pub(crate) fn endpoint_d2x_dh2(sys: SystemId, x: f64) -> f64 {
    let hx = dh_dx_on_section(sys, x);
    -d2h_dx2_on_section(sys, x) / (hx * hx * hx)
}

/// Safeguarded Newton with bisection fallback on a sign-changing bracket.
fn solve_on_bracket(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootFind(format!(
            "no sign change on bracket [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = if d != 0.0 { x - fx / d } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= ENDPOINT_RTOL * x.abs().max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    // Bisection alone contracts well past 1e-13 relative within 200 steps.
    Ok(x)
}

/// The two oval endpoint abscissae adjacent to the center.
pub fn oval_endpoints(sys: SystemId, h: f64) -> Result<OvalEndpoints> {
    sys.check_interior(h)?;
    let f = |x: f64| h_on_section(sys, x) - h;
    let df = |x: f64| dh_dx_on_section(sys, x);
    let (x_a, x_b) = match sys {
        SystemId::Lv => {
            let x_a = solve_on_bracket(f, df, 1.0 / 3.0 + 1e-14, 1.0)?;
            // H(x,0) > -9/(8x) for x > 1, so the asymptote root bounds x_b.
            let hi = -9.0 / (8.0 * h);
            let x_b = solve_on_bracket(f, df, 1.0, hi.max(1.0 + 1e-12))?;
            (x_a, x_b)
        }
        SystemId::Bt => {
            let x_a = solve_on_bracket(f, df, -2.0, -1.0)?;
            let x_b = solve_on_bracket(f, df, -1.0, 1.0)?;
            (x_a, x_b)
        }
    };
    Ok(OvalEndpoints { x_a, x_b, h })
}

/// Radicand 2·(h·x³-polynomial) whose square root is the upper branch.
pub(crate) fn branch_radicand(sys: SystemId, x: f64, h: f64) -> f64 {
    match sys {
        SystemId::Lv => 2.0 * (h * x * x * x + 1.125 * x * x - 0.75 * x + 0.125),
        SystemId::Bt => 2.0 * (h - x + x * x * x / 3.0),
    }
}

/// y ≥ 0 with H(x, y) = h on the upper branch.
pub fn upper_branch(sys: SystemId, x: f64, h: f64) -> Result<f64> {
    sys.check_interior(h)?;
    let rad = branch_radicand(sys, x, h);
    // Absorb roundoff from endpoints solved to 1e-13 relative.
    let tol = 1e-10 * (1.0 + x.abs().powi(3));
    if rad < -tol {
        return Err(Error::Domain(format!(
            "x = {x} lies outside the oval [x_a, x_b] at h = {h} (radicand {rad})"
        )));
    }
    Ok(rad.max(0.0).sqrt())
}

/// Right-hand side of the perturbed piecewise system.
pub fn vector_field(sys: SystemId, state: &PlanarState, eps: f64, p: &Perturbation) -> Result<(f64, f64)> {
    let compiled = p.compile();
    vector_field_compiled(sys, state.x, state.y, state.side, eps, &compiled)
}

pub(crate) fn vector_field_compiled(
    sys: SystemId,
    x: f64,
    y: f64,
    side: Side,
    eps: f64,
    p: &CompiledPerturbation,
) -> Result<(f64, f64)> {
    let (f, g) = match side {
        Side::Upper => (&p.f_plus, &p.g_plus),
        Side::Lower => (&p.f_minus, &p.g_minus),
        Side::OnSection => {
            return Err(Error::Precondition(
                "state lies on the switching line; resolve the side first".into(),
            ))
        }
    };
    let (x0dot, y0dot) = unperturbed_field(sys, x, y);
    Ok((x0dot + eps * f.eval(x, y), y0dot + eps * g.eval(x, y)))
}

/// Unperturbed half-plane field (identical on both sides).
pub(crate) fn unperturbed_field(sys: SystemId, x: f64, y: f64) -> (f64, f64) {
    match sys {
        SystemId::Lv => (x * y, 1.5 * y * y - 1.125 * x * x + 1.5 * x - 0.375),
        SystemId::Bt => (y, -1.0 + x * x),
    }
}
