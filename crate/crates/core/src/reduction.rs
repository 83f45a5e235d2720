//! Exact-rational recurrence engine expressing any I_{i,j} in the system's
//! basis integrals and assembling the full Melnikov representation.
//!
//! Reduction order: powers of y are lowered first (two at a time) until the
//! index is a base or basis case, then powers of x are lowered; each x-step
//! costs one factor 1/h for LV. All arithmetic is exact; floating point
//! enters only at evaluation time.

use crate::error::{Error, Result};
use crate::quad::abelian_integral_with;
use crate::rational::{rat, RationalPoly};
use crate::systems::{Perturbation, SystemId};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

/// Basis integrals of each system, in the fixed export order.
pub fn basis_elements(sys: SystemId) -> &'static [(i32, u32)] {
    match sys {
        SystemId::Lv => &[(0, 1), (-1, 1), (1, 0), (0, 0), (0, 2)],
        SystemId::Bt => &[(0, 0), (1, 0), (0, 1), (1, 1)],
    }
}

fn basis_index(sys: SystemId, i: i32, j: u32) -> Option<usize> {
    basis_elements(sys).iter().position(|&(bi, bj)| bi == i && bj == j)
}

/// Quadrature values of the basis integrals, in `basis_elements` order.
pub fn basis_values(sys: SystemId, h: f64, tol: f64) -> Result<Vec<f64>> {
    basis_elements(sys)
        .iter()
        .map(|&(i, j)| {
            abelian_integral_with(crate::quad::IntegralId::new(sys, i, j)?, h, tol)
        })
        .collect()
}

/// `basis_values` behind a process-wide memo table; grid sweeps over many
/// representations share every quadrature. Values depend only on the key.
pub fn cached_basis_values(sys: SystemId, h: f64, tol: f64) -> Result<Vec<f64>> {
    type Key = (SystemId, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Vec<f64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (sys, h.to_bits(), tol.to_bits());
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let values = basis_values(sys, h, tol)?;
    cache.lock().unwrap().insert(key, values.clone());
    Ok(values)
}

/// Exact decomposition of one integral (or linear combination) over the
/// basis: value = h^{−denom_power} · Σ coeffs[k] · I_{basis[k]}.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisDecomposition {
    sys: SystemId,
    denom_power: u32,
    coeffs: Vec<RationalPoly>,
}

impl BasisDecomposition {
    pub fn zero(sys: SystemId) -> Self {
        BasisDecomposition {
            sys,
            denom_power: 0,
            coeffs: vec![RationalPoly::zero(); basis_elements(sys).len()],
        }
    }

    fn unit(sys: SystemId, i: i32, j: u32) -> Self {
        let mut d = Self::zero(sys);
        let k = basis_index(sys, i, j).expect("unit() requires a basis pair");
        d.coeffs[k] = RationalPoly::constant(BigRational::one());
        d
    }

    pub fn sys(&self) -> SystemId {
        self.sys
    }

    pub fn denom_power(&self) -> u32 {
        self.denom_power
    }

    pub fn coeffs(&self) -> &[RationalPoly] {
        &self.coeffs
    }

    pub fn coeff_for(&self, i: i32, j: u32) -> Option<&RationalPoly> {
        basis_index(self.sys, i, j).map(|k| &self.coeffs[k])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(RationalPoly::is_zero)
    }

    /// Cancels common powers of h between the numerators and denominator.
    fn normalized(mut self) -> Self {
        if self.is_zero() {
            self.denom_power = 0;
            return self;
        }
        while self.denom_power > 0 && self.coeffs.iter().all(|c| c.divisible_by_h_pow(1)) {
            for c in &mut self.coeffs {
                *c = c.shift_down(1);
            }
            self.denom_power -= 1;
        }
        self
    }

    /// self + p(h) · other, denominators aligned.
    fn add_scaled(&self, other: &Self, p: &RationalPoly) -> Self {
        assert_eq!(self.sys, other.sys);
        let m = self.denom_power.max(other.denom_power);
        let lift_a = (m - self.denom_power) as usize;
        let lift_b = (m - other.denom_power) as usize;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.shift_up(lift_a).add(&b.mul(p).shift_up(lift_b)))
            .collect();
        BasisDecomposition { sys: self.sys, denom_power: m, coeffs }.normalized()
    }

    fn scaled(&self, s: &BigRational) -> Self {
        BasisDecomposition {
            sys: self.sys,
            denom_power: self.denom_power,
            coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(),
        }
        .normalized()
    }

    fn div_h(mut self) -> Self {
        if self.is_zero() {
            return self;
        }
        self.denom_power += 1;
        self.normalized()
    }

    /// Numeric value of the decomposition given basis integral values.
    pub fn evaluate_with_basis(&self, h: f64, basis: &[f64]) -> f64 {
        let num: f64 = self
            .coeffs
            .iter()
            .zip(basis)
            .map(|(c, v)| c.eval_f64(h) * v)
            .sum();
        num / h.powi(self.denom_power as i32)
    }

    pub fn evaluate(&self, h: f64, tol: f64) -> Result<f64> {
        let basis = basis_values(self.sys, h, tol)?;
        Ok(self.evaluate_with_basis(h, &basis))
    }
}

/// Collapses g±-terms and Green-converted f±-terms into one ρ-weighted sum
/// over upper-branch integrals, using J_{i,j} = (−1)^{j+1} I_{i,j}.
pub fn rho_from_perturbation(sys: SystemId, p: &Perturbation) -> BTreeMap<(i32, u32), BigRational> {
    let mut rho: BTreeMap<(i32, u32), BigRational> = BTreeMap::new();
    let mut bump = |i: i32, j: u32, v: BigRational| {
        if !v.is_zero() {
            let slot = rho.entry((i, j)).or_default();
            *slot += v;
        }
    };
    for (&(i, j), c) in p.b_plus.iter() {
        bump(i as i32, j, c.clone());
    }
    for (&(i, j), c) in p.b_minus.iter() {
        // J_{i,j} = (−1)^{j+1} I_{i,j}
        let sign = if j % 2 == 0 { -1 } else { 1 };
        bump(i as i32, j, c * rat(sign, 1));
    }
    // Green shift: −∫ w x^i y^j dy = +factor · ∫ w x^{i−1} y^{j+1} dx
    for (&(i, j), c) in p.a_plus.iter() {
        let f = green_factor_exact(sys, i, j);
        bump(i as i32 - 1, j + 1, c * &f);
    }
    for (&(i, j), c) in p.a_minus.iter() {
        let f = green_factor_exact(sys, i, j);
        // J_{i−1,j+1} = (−1)^{j+2} I = (−1)^j I
        let sign = if j % 2 == 0 { 1 } else { -1 };
        bump(i as i32 - 1, j + 1, c * &f * rat(sign, 1));
    }
    rho.retain(|_, v| !v.is_zero());
    rho
}

fn green_factor_exact(sys: SystemId, i: u32, j: u32) -> BigRational {
    match sys {
        SystemId::Lv => rat(i as i64 - 4, j as i64 + 1),
        SystemId::Bt => rat(i as i64, j as i64 + 1),
    }
}

/// Exact decomposition of I_{i,j} over the system's basis.
pub fn reduce_monomial(sys: SystemId, i: i32, j: u32) -> Result<Arc<BasisDecomposition>> {
    static MEMO: OnceLock<Mutex<HashMap<(SystemId, i32, u32), Arc<BasisDecomposition>>>> =
        OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = memo.lock().unwrap().get(&(sys, i, j)) {
        return Ok(hit.clone());
    }
    let computed = Arc::new(reduce_uncached(sys, i, j)?);
    memo.lock().unwrap().insert((sys, i, j), computed.clone());
    Ok(computed)
}

fn unsupported(sys: SystemId, i: i32, j: u32) -> Error {
    Error::UnsupportedIndex { sys: sys.name(), i: i as i64, j: j as i64 }
}

fn reduce_uncached(sys: SystemId, i: i32, j: u32) -> Result<BasisDecomposition> {
    if basis_index(sys, i, j).is_some() {
        return Ok(BasisDecomposition::unit(sys, i, j));
    }
    match sys {
        SystemId::Lv => reduce_lv(i, j),
        SystemId::Bt => reduce_bt(i, j),
    }
}

/// Accumulates Σ pₖ(h)·I_{iₖ,jₖ} [ /h ] from recurrence right-hand sides.
struct Combo {
    sys: SystemId,
    acc: BasisDecomposition,
}

impl Combo {
    fn new(sys: SystemId) -> Self {
        Combo { sys, acc: BasisDecomposition::zero(sys) }
    }

    fn term(self, num: i64, den: i64, i: i32, j: u32) -> Result<Self> {
        self.poly_term(RationalPoly::from_pairs(&[(num, den)]), i, j)
    }

    /// Adds (n1/d1 + (n2/d2)·h) · I_{i,j}.
    fn linear_term(self, n0: i64, d0: i64, n1: i64, d1: i64, i: i32, j: u32) -> Result<Self> {
        self.poly_term(RationalPoly::from_pairs(&[(n0, d0), (n1, d1)]), i, j)
    }

    fn poly_term(mut self, p: RationalPoly, i: i32, j: u32) -> Result<Self> {
        let sub = reduce_monomial(self.sys, i, j)?;
        self.acc = self.acc.add_scaled(&sub, &p);
        Ok(self)
    }

    fn done(self) -> Result<BasisDecomposition> {
        Ok(self.acc)
    }

    fn done_over_h(self) -> Result<BasisDecomposition> {
        Ok(self.acc.div_h())
    }
}

fn reduce_lv(i: i32, j: u32) -> Result<BasisDecomposition> {
    let sys = SystemId::Lv;
    if i < -3 {
        return Err(unsupported(sys, i, j));
    }
    if j >= 2 {
        if (i, j) == (-3, 4) {
            // The y-lowering relation is singular here (2i+3j−6 = 0); express
            // through h·I_{0,2} = ½I_{−3,4} − (9/8)I_{−1,2} + (3/4)I_{−2,2} − (1/8)I_{−3,2}.
            return Combo::new(sys)
                .poly_term(RationalPoly::from_pairs(&[(0, 1), (2, 1)]), 0, 2)?
                .term(9, 4, -1, 2)?
                .term(-3, 2, -2, 2)?
                .term(1, 4, -3, 2)?
                .done();
        }
        let d = 2 * i as i64 + 3 * j as i64 - 6;
        if d == 0 {
            return Err(unsupported(sys, i, j));
        }
        // (2i+3j−6) I_{i,j} = (9j/4) I_{i+2,j−2} − 3j I_{i+1,j−2} + (3j/4) I_{i,j−2}
        let jq = j as i64;
        return Combo::new(sys)
            .term(9 * jq, 4 * d, i + 2, j - 2)?
            .term(-3 * jq, d, i + 1, j - 2)?
            .term(3 * jq, 4 * d, i, j - 2)?
            .done();
    }
    match (i, j) {
        // I_{1,1} = I_{0,1} by the x-axis symmetry argument
        (1, 1) => Combo::new(sys).term(1, 1, 0, 1)?.done(),
        (2, 1) => Combo::new(sys).term(-3, 2, 0, 1)?.term(1, 1, -1, 1)?.done_over_h(),
        (3, 1) => Combo::new(sys).term(-1, 2, 0, 1)?.done_over_h(),
        (2, 0) => Combo::new(sys).term(4, 3, 1, 0)?.term(-1, 3, 0, 0)?.done(),
        (3, 0) => Combo::new(sys)
            .term(1, 2, 0, 2)?
            .term(-3, 4, 1, 0)?
            .term(1, 4, 0, 0)?
            .done_over_h(),
        // Eliminations of the negative-index stragglers
        (-1, 0) => Combo::new(sys)
            .linear_term(-9, 2, -8, 3, 1, 0)?
            .linear_term(9, 2, 2, 3, 0, 0)?
            .done(),
        (-2, 1) => Combo::new(sys)
            .linear_term(-18, 5, -4, 5, 0, 1)?
            .term(21, 5, -1, 1)?
            .done(),
        (-3, 1) => Combo::new(sys)
            .linear_term(-81, 5, -28, 5, 0, 1)?
            .term(72, 5, -1, 1)?
            .done(),
        (-2, 0) => Combo::new(sys)
            .linear_term(0, 1, -16, 5, 1, 0)?
            .term(-27, 5, 0, 0)?
            .term(24, 5, -1, 0)?
            .done(),
        (-3, 0) => Combo::new(sys)
            .linear_term(0, 1, -4, 1, 0, 0)?
            .term(-6, 1, -1, 0)?
            .term(5, 1, -2, 0)?
            .done(),
        (i, j) if i >= 4 => {
            // (2i+3j−6) h I_{i,j} = −(i+j−4)(9/4) I_{i−1,j}
            //                      + (2i+j−10)(3/4) I_{i−2,j} − (i−6)(1/4) I_{i−3,j}
            let iq = i as i64;
            let jq = j as i64;
            let d = 2 * iq + 3 * jq - 6;
            Combo::new(sys)
                .term(-9 * (iq + jq - 4), 4 * d, i - 1, j)?
                .term(3 * (2 * iq + jq - 10), 4 * d, i - 2, j)?
                .term(-(iq - 6), 4 * d, i - 3, j)?
                .done_over_h()
        }
        _ => Err(unsupported(sys, i, j)),
    }
}

fn reduce_bt(i: i32, j: u32) -> Result<BasisDecomposition> {
    let sys = SystemId::Bt;
    if i < 0 {
        return Err(unsupported(sys, i, j));
    }
    if j >= 2 {
        // I_{i,j} = 6j/(2i+3j+2) · ( h I_{i,j−2} − (2/3) I_{i+1,j−2} )
        let iq = i as i64;
        let jq = j as i64;
        let d = 2 * iq + 3 * jq + 2;
        return Combo::new(sys)
            .poly_term(RationalPoly::from_pairs(&[(0, 1), (6 * jq, d)]), i, j - 2)?
            .term(-4 * jq, d, i + 1, j - 2)?
            .done();
    }
    match (i, j) {
        (2, _) => Combo::new(sys).term(1, 1, 0, j)?.done(),
        (i, _) if i >= 3 => {
            // I_{i,j} = I_{i−2,j} − (i−2)/(j+2) I_{i−3,j+2}
            let iq = i as i64;
            Combo::new(sys)
                .term(1, 1, i - 2, j)?
                .term(-(iq - 2), j as i64 + 2, i - 3, j + 2)?
                .done()
        }
        _ => Err(unsupported(sys, i, j)),
    }
}

/// The assembled Melnikov representation of a perturbation: numerator
/// coefficients over the minimal common power of h.
#[derive(Debug, Clone, PartialEq)]
pub struct MelnikovRepresentation {
    sys: SystemId,
    n: u32,
    decomposition: BasisDecomposition,
}

impl MelnikovRepresentation {
    pub fn sys(&self) -> SystemId {
        self.sys
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn decomposition(&self) -> &BasisDecomposition {
        &self.decomposition
    }

    pub fn denom_power(&self) -> u32 {
        self.decomposition.denom_power
    }

    pub fn is_zero(&self) -> bool {
        self.decomposition.is_zero()
    }

    /// Builds a representation directly from basis coefficients (used by
    /// tests and import).
    pub fn from_parts(sys: SystemId, n: u32, denom_power: u32, coeffs: Vec<RationalPoly>) -> Self {
        assert_eq!(coeffs.len(), basis_elements(sys).len());
        MelnikovRepresentation {
            sys,
            n,
            decomposition: BasisDecomposition { sys, denom_power, coeffs }.normalized(),
        }
    }

    /// Denominator exponent bound of the representation lemmas.
    pub fn denom_bound(sys: SystemId, n: u32) -> u32 {
        match sys {
            SystemId::Bt => 0,
            SystemId::Lv => match n {
                0 | 1 => 0,
                2 | 3 => n - 2,
                _ => n - 3,
            },
        }
    }

    /// Degree bound for the coefficient of basis element k, measured at the
    /// common denominator h^denom_bound. `None` means unconstrained.
    pub fn coeff_degree_bound(sys: SystemId, n: u32, k: usize) -> Option<i64> {
        match sys {
            SystemId::Bt => {
                // deg β1 ≤ [n/2]; β2, β3 ≤ [(n−1)/2]; β4 ≤ [(n−2)/2]
                let f = |num: i64| num.div_euclid(2);
                Some(match k {
                    0 => f(n as i64),
                    1 | 2 => f(n as i64 - 1),
                    _ => f(n as i64 - 2),
                })
            }
            SystemId::Lv => {
                if n == 1 {
                    // Only the structural claims hold at n = 1: no 1/h power
                    // and no I_{0,2} component. Degrees are unconstrained.
                    return if k == 4 { Some(-1) } else { None };
                }
                Some(Self::denom_bound(sys, n) as i64)
            }
        }
    }

    /// Checks the degree/denominator invariants against the lemma bounds.
    ///
    /// `strict` additionally pins the LV I_{1,0}/I_{0,0} coefficients to the
    /// printed bound; those two can exceed it by exactly one h-degree when
    /// the perturbation carries asymmetric a±_{0,j} (odd j) content, which
    /// the x^{−5} eliminations route through I_{−1,0}.
    pub fn check_degree_invariants(&self, strict: bool) -> std::result::Result<(), String> {
        let bound_m = Self::denom_bound(self.sys, self.n);
        let m = self.decomposition.denom_power;
        if m > bound_m {
            return Err(format!("denom_power {m} exceeds bound {bound_m}"));
        }
        let lift = (bound_m - m) as i64;
        for (k, c) in self.decomposition.coeffs.iter().enumerate() {
            let Some(bound) = Self::coeff_degree_bound(self.sys, self.n, k) else {
                continue;
            };
            let deg_at_bound = if c.is_zero() { -1 } else { c.degree() + lift };
            let slack = if !strict && self.sys == SystemId::Lv && (k == 2 || k == 3) { 1 } else { 0 };
            if deg_at_bound > bound + slack {
                let (i, j) = basis_elements(self.sys)[k];
                return Err(format!(
                    "coefficient of I[{i},{j}] has degree {deg_at_bound} at denominator \
                     h^{bound_m}, bound {bound}"
                ));
            }
        }
        Ok(())
    }

    pub fn export_text(&self) -> String {
        let mut out = String::new();
        out.push_str("melnikov-representation v1\n");
        out.push_str(&format!("system: {}\n", self.sys.name()));
        out.push_str(&format!("degree: {}\n", self.n));
        out.push_str(&format!("denom_power: {}\n", self.decomposition.denom_power));
        for (k, &(i, j)) in basis_elements(self.sys).iter().enumerate() {
            out.push_str(&format!(
                "coeff I[{},{}]: {}\n",
                i,
                j,
                poly_to_text(&self.decomposition.coeffs[k])
            ));
        }
        out
    }

    pub fn import_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "melnikov-representation v1" {
            return Err(Error::Precondition(format!("unknown representation header: {header}")));
        }
        let mut sys = None;
        let mut degree = None;
        let mut denom = None;
        let mut coeffs: Vec<(String, RationalPoly)> = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::Precondition(format!("malformed line: {line}")))?;
            match key.trim() {
                "system" => {
                    sys = Some(match value.trim() {
                        "LV" => SystemId::Lv,
                        "BT" => SystemId::Bt,
                        other => {
                            return Err(Error::Precondition(format!("unknown system {other}")))
                        }
                    })
                }
                "degree" => degree = value.trim().parse::<u32>().ok(),
                "denom_power" => denom = value.trim().parse::<u32>().ok(),
                key if key.starts_with("coeff ") => {
                    coeffs.push((key[6..].to_string(), poly_from_text(value.trim())?));
                }
                other => return Err(Error::Precondition(format!("unknown key {other}"))),
            }
        }
        let sys = sys.ok_or_else(|| Error::Precondition("missing system".into()))?;
        let n = degree.ok_or_else(|| Error::Precondition("missing degree".into()))?;
        let m = denom.ok_or_else(|| Error::Precondition("missing denom_power".into()))?;
        let elements = basis_elements(sys);
        if coeffs.len() != elements.len() {
            return Err(Error::Precondition(format!(
                "expected {} coefficient lines, found {}",
                elements.len(),
                coeffs.len()
            )));
        }
        let mut ordered = Vec::with_capacity(elements.len());
        for (&(i, j), (label, poly)) in elements.iter().zip(coeffs) {
            let want = format!("I[{i},{j}]");
            if label != want {
                return Err(Error::Precondition(format!("expected {want}, found {label}")));
            }
            ordered.push(poly);
        }
        Ok(Self::from_parts(sys, n, m, ordered))
    }
}

pub(crate) fn poly_to_text(p: &RationalPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    p.coeffs()
        .iter()
        .map(|c| format!("{}/{}", c.numer(), c.denom()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn poly_from_text(s: &str) -> Result<RationalPoly> {
    if s == "0" || s.is_empty() {
        return Ok(RationalPoly::zero());
    }
    let mut coeffs = Vec::new();
    for tok in s.split_whitespace() {
        let (n, d) = tok
            .split_once('/')
            .ok_or_else(|| Error::Precondition(format!("malformed rational {tok}")))?;
        let n: num_bigint::BigInt =
            n.parse().map_err(|_| Error::Precondition(format!("malformed numerator {n}")))?;
        let d: num_bigint::BigInt =
            d.parse().map_err(|_| Error::Precondition(format!("malformed denominator {d}")))?;
        coeffs.push(BigRational::new(n, d));
    }
    Ok(RationalPoly::from_coeffs(coeffs))
}

/// Σ ρ_{i,j} · reduce_monomial(i,j), over the minimal common denominator.
pub fn melnikov_representation(sys: SystemId, p: &Perturbation) -> Result<MelnikovRepresentation> {
    if p.degree() < 1 {
        return Err(Error::Precondition("perturbation degree must be at least 1".into()));
    }
    let rho = rho_from_perturbation(sys, p);
    let mut acc = BasisDecomposition::zero(sys);
    for ((i, j), w) in &rho {
        let sub = reduce_monomial(sys, *i, *j)?;
        acc = acc.add_scaled(&sub.scaled(w), &RationalPoly::constant(BigRational::one()));
    }
    Ok(MelnikovRepresentation { sys, n: p.degree(), decomposition: acc })
}

/// Numeric M(h) from a representation and quadrature basis values.
pub fn evaluate_representation(rep: &MelnikovRepresentation, h: f64) -> Result<f64> {
    rep.sys.check_interior(h)?;
    rep.decomposition.evaluate(h, crate::quad::DEFAULT_QUAD_TOL)
}

/// As `evaluate_representation` with caller-supplied basis values (used for
/// grid sweeps where the quadratures are shared across representations).
pub fn evaluate_representation_with_basis(
    rep: &MelnikovRepresentation,
    h: f64,
    basis: &[f64],
) -> f64 {
    rep.decomposition.evaluate_with_basis(h, basis)
}

/// Deterministic generator for random test perturbations: coefficients are
/// uniform dyadic rationals k/2^16 with k ∈ [−2^16, 2^16], drawn from a
/// SplitMix64 stream so identical seeds give identical perturbations.
pub struct PerturbationSampler {
    state: u64,
}

impl PerturbationSampler {
    pub fn new(seed: u64) -> Self {
        PerturbationSampler { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn next_coeff(&mut self) -> BigRational {
        let span = 2 * 65536 + 1;
        let k = (self.next_u64() % span) as i64 - 65536;
        rat(k, 65536)
    }

    /// Dense random perturbation of the given degree.
    pub fn perturbation(&mut self, n: u32) -> Perturbation {
        use crate::systems::CoeffKind::*;
        let mut p = Perturbation::new(n);
        for kind in [APlus, AMinus, BPlus, BMinus] {
            for i in 0..=n {
                for j in 0..=(n - i) {
                    p.set(kind, i, j, self.next_coeff()).unwrap();
                }
            }
        }
        p
    }

    /// Dense random perturbation without asymmetric odd-j a±_{0,j} content,
    /// the family for which the printed LV degree bounds hold strictly.
    pub fn perturbation_symmetric_a0(&mut self, n: u32) -> Perturbation {
        use crate::systems::CoeffKind::*;
        let mut p = self.perturbation(n);
        for j in (1..=n).step_by(2) {
            let c = p.a_plus.get(0, j);
            p.set(AMinus, 0, j, c).unwrap();
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{abelian_integral, dy_integral_raw, IntegralId};
    use crate::systems::CoeffKind;

    fn poly(pairs: &[(i64, i64)]) -> RationalPoly {
        RationalPoly::from_pairs(pairs)
    }

    fn decomp_of(sys: SystemId, i: i32, j: u32) -> BasisDecomposition {
        (*reduce_monomial(sys, i, j).unwrap()).clone()
    }

    #[test]
    fn lv_base_identities_exact() {
        // I_{2,0} = 4/3 I_{1,0} − 1/3 I_{0,0}
        let d = decomp_of(SystemId::Lv, 2, 0);
        assert_eq!(d.denom_power(), 0);
        assert_eq!(d.coeff_for(1, 0).unwrap(), &poly(&[(4, 3)]));
        assert_eq!(d.coeff_for(0, 0).unwrap(), &poly(&[(-1, 3)]));
        assert!(d.coeff_for(0, 2).unwrap().is_zero());
        // I_{3,1} = (1/h)(−1/2 I_{0,1})
        let d = decomp_of(SystemId::Lv, 3, 1);
        assert_eq!(d.denom_power(), 1);
        assert_eq!(d.coeff_for(0, 1).unwrap(), &poly(&[(-1, 2)]));
        // I_{1,1} = I_{0,1}
        let d = decomp_of(SystemId::Lv, 1, 1);
        assert_eq!(d.denom_power(), 0);
        assert_eq!(d.coeff_for(0, 1).unwrap(), &poly(&[(1, 1)]));
        // I_{2,1} = (1/h)(−3/2 I_{0,1} + I_{−1,1})
        let d = decomp_of(SystemId::Lv, 2, 1);
        assert_eq!(d.denom_power(), 1);
        assert_eq!(d.coeff_for(0, 1).unwrap(), &poly(&[(-3, 2)]));
        assert_eq!(d.coeff_for(-1, 1).unwrap(), &poly(&[(1, 1)]));
        // I_{3,0} = (1/h)(1/2 I_{0,2} − 3/4 I_{1,0} + 1/4 I_{0,0})
        let d = decomp_of(SystemId::Lv, 3, 0);
        assert_eq!(d.denom_power(), 1);
        assert_eq!(d.coeff_for(0, 2).unwrap(), &poly(&[(1, 2)]));
        assert_eq!(d.coeff_for(1, 0).unwrap(), &poly(&[(-3, 4)]));
        assert_eq!(d.coeff_for(0, 0).unwrap(), &poly(&[(1, 4)]));
    }

    #[test]
    fn bt_base_identities_exact() {
        // I_{0,2} = (3/2)h I_{0,0} − I_{1,0}
        let d = decomp_of(SystemId::Bt, 0, 2);
        assert_eq!(d.denom_power(), 0);
        assert_eq!(d.coeff_for(0, 0).unwrap(), &poly(&[(0, 1), (3, 2)]));
        assert_eq!(d.coeff_for(1, 0).unwrap(), &poly(&[(-1, 1)]));
        // I_{2,1} = I_{0,1}
        let d = decomp_of(SystemId::Bt, 2, 1);
        assert_eq!(d.coeff_for(0, 1).unwrap(), &poly(&[(1, 1)]));
        // I_{0,3} = (18/11)h I_{0,1} − (12/11) I_{1,1}
        let d = decomp_of(SystemId::Bt, 0, 3);
        assert_eq!(d.coeff_for(0, 1).unwrap(), &poly(&[(0, 1), (18, 11)]));
        assert_eq!(d.coeff_for(1, 1).unwrap(), &poly(&[(-12, 11)]));
        // I_{2,0} = I_{0,0}; I_{3,0} = −(3/4)h I_{0,0} + (3/2) I_{1,0}
        let d = decomp_of(SystemId::Bt, 3, 0);
        assert_eq!(d.coeff_for(0, 0).unwrap(), &poly(&[(0, 1), (-3, 4)]));
        assert_eq!(d.coeff_for(1, 0).unwrap(), &poly(&[(3, 2)]));
        // I_{1,2} = −(4/5) I_{0,0} + (6/5)h I_{1,0}
        let d = decomp_of(SystemId::Bt, 1, 2);
        assert_eq!(d.coeff_for(0, 0).unwrap(), &poly(&[(-4, 5)]));
        assert_eq!(d.coeff_for(1, 0).unwrap(), &poly(&[(0, 1), (6, 5)]));
    }

    #[test]
    fn lv_negative_index_eliminations_match_quadrature() {
        let h = -0.23;
        for (i, j) in [(-1, 0), (-2, 0), (-3, 0), (-2, 1), (-3, 1), (-1, 2), (-3, 4)] {
            let d = decomp_of(SystemId::Lv, i, j);
            let direct = abelian_integral(IntegralId::new(SystemId::Lv, i, j).unwrap(), h).unwrap();
            let via = d.evaluate(h, 1e-12).unwrap();
            assert!(
                (via - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                "({i},{j}): {via} vs {direct}"
            );
        }
    }

    #[test]
    fn reduce_unsupported_indices() {
        assert!(reduce_monomial(SystemId::Lv, -4, 0).is_err());
        assert!(reduce_monomial(SystemId::Bt, -1, 2).is_err());
    }

    #[test]
    fn rho_examples() {
        // even-j cancellation of matched b± constants
        for sys in [SystemId::Lv, SystemId::Bt] {
            let mut p = Perturbation::new(1);
            p.set_q(CoeffKind::BPlus, 0, 0, 1, 1).unwrap();
            p.set_q(CoeffKind::BMinus, 0, 0, 1, 1).unwrap();
            assert!(rho_from_perturbation(sys, &p).is_empty());
        }
        // LV Green shift: a+_{1,0} = 1 → ρ_{0,1} = (1−4)/(0+1) = −3
        let mut p = Perturbation::new(1);
        p.set_q(CoeffKind::APlus, 1, 0, 1, 1).unwrap();
        let rho = rho_from_perturbation(SystemId::Lv, &p);
        assert_eq!(rho.get(&(0, 1)), Some(&rat(-3, 1)));
        // BT: a+_{2,0} = 1 → ρ_{1,1} = +2, fixed by the line-integral oracle:
        // the Melnikov contribution is −∫x²dy and must equal ρ·I_{1,1}.
        let mut p = Perturbation::new(2);
        p.set_q(CoeffKind::APlus, 2, 0, 1, 1).unwrap();
        let rho = rho_from_perturbation(SystemId::Bt, &p);
        assert_eq!(rho.get(&(1, 1)), Some(&rat(2, 1)));
        let h = 0.1;
        let m_term = -dy_integral_raw(SystemId::Bt, 2, 0, h, 0.0).unwrap();
        let i11 = abelian_integral(IntegralId::new(SystemId::Bt, 1, 1).unwrap(), h).unwrap();
        assert!((m_term - 2.0 * i11).abs() < 1e-8 * (1.0 + i11.abs()));
    }

    #[test]
    fn representation_zero_and_linearity() {
        let p = Perturbation::new(3);
        let rep = melnikov_representation(SystemId::Lv, &p).unwrap();
        assert!(rep.is_zero());
        assert_eq!(rep.denom_power(), 0);
        assert_eq!(evaluate_representation(&rep, -0.3).unwrap(), 0.0);

        // rep(p1 + λ p2) = rep(p1) + λ rep(p2), coefficient-wise
        let mut s = PerturbationSampler::new(17);
        let p1 = s.perturbation(3);
        let p2 = s.perturbation(3);
        let lambda = rat(-7, 3);
        let combo = p1.add(&p2.scaled(&lambda));
        let r_combo = melnikov_representation(SystemId::Lv, &combo).unwrap();
        let r1 = melnikov_representation(SystemId::Lv, &p1).unwrap();
        let r2 = melnikov_representation(SystemId::Lv, &p2).unwrap();
        let sum = r1
            .decomposition()
            .add_scaled(r2.decomposition(), &RationalPoly::constant(lambda));
        assert_eq!(r_combo.decomposition(), &sum);
    }

    #[test]
    fn bt_beta1_doubling_example() {
        let mut p = Perturbation::new(1);
        p.set_q(CoeffKind::BPlus, 0, 0, 1, 1).unwrap();
        p.set_q(CoeffKind::BMinus, 0, 0, -1, 1).unwrap();
        let rep = melnikov_representation(SystemId::Bt, &p).unwrap();
        assert_eq!(rep.decomposition().coeff_for(0, 0).unwrap(), &poly(&[(2, 1)]));
        for (i, j) in [(1, 0), (0, 1), (1, 1)] {
            assert!(rep.decomposition().coeff_for(i, j).unwrap().is_zero());
        }
        // evaluation at h = 0 gives 2·I00(0) = 2√3
        let v = evaluate_representation(&rep, 0.0).unwrap();
        assert!((v - 2.0 * 3.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn lv_positive_melnikov_example() {
        // g+ = g− = y doubles the odd block: M = 2 I_{0,1} > 0
        let mut p = Perturbation::new(1);
        p.set_q(CoeffKind::BPlus, 0, 1, 1, 1).unwrap();
        p.set_q(CoeffKind::BMinus, 0, 1, 1, 1).unwrap();
        let rep = melnikov_representation(SystemId::Lv, &p).unwrap();
        for k in 1..12 {
            let h = -0.5 + 0.5 * k as f64 / 12.0;
            assert!(evaluate_representation(&rep, h).unwrap() > 0.0);
        }
    }

    #[test]
    fn lv_a01_reduction_is_degree_one() {
        // f+ = y: M = −2 I_{−1,2} = (−4h − 9/4) I_{1,0} + (h + 3/4) I_{0,0};
        // the degree-1 coefficients here are the documented deviation from
        // the printed n = 1 degree claim.
        let mut p = Perturbation::new(1);
        p.set_q(CoeffKind::APlus, 0, 1, 1, 1).unwrap();
        let rep = melnikov_representation(SystemId::Lv, &p).unwrap();
        assert_eq!(rep.denom_power(), 0);
        assert_eq!(rep.decomposition().coeff_for(1, 0).unwrap(), &poly(&[(-9, 4), (-4, 1)]));
        assert_eq!(rep.decomposition().coeff_for(0, 0).unwrap(), &poly(&[(3, 4), (1, 1)]));
        assert!(rep.decomposition().coeff_for(0, 2).unwrap().is_zero());
        assert!(rep.check_degree_invariants(false).is_ok());
        assert!(rep.check_degree_invariants(true).is_ok());

        // at n = 2 the printed bound is degree 0 and the same term violates
        // it, while the relaxed bound still holds
        let mut p = Perturbation::new(2);
        p.set_q(CoeffKind::APlus, 0, 1, 1, 1).unwrap();
        let rep = melnikov_representation(SystemId::Lv, &p).unwrap();
        assert!(rep.check_degree_invariants(true).is_err());
        assert!(rep.check_degree_invariants(false).is_ok());
    }

    #[test]
    fn reduction_matches_quadrature_sampled() {
        for (sys, hs) in [
            (SystemId::Lv, [-0.38, -0.17]),
            (SystemId::Bt, [-0.3, 0.45]),
        ] {
            let lo = if sys == SystemId::Lv { -1 } else { 0 };
            for i in lo..=5i32 {
                for j in 0..=(5 - i.max(0)) as u32 {
                    let d = decomp_of(sys, i, j);
                    for &h in &hs {
                        let direct =
                            abelian_integral(IntegralId::new(sys, i, j).unwrap(), h).unwrap();
                        let via = d.evaluate(h, 1e-12).unwrap();
                        assert!(
                            (via - direct).abs() <= 1e-7 * (1.0 + direct.abs()),
                            "{sys:?} ({i},{j}) h={h}: {via} vs {direct}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn representation_matches_direct_oracle_sampled() {
        let mut s = PerturbationSampler::new(5);
        for sys in [SystemId::Lv, SystemId::Bt] {
            let p = s.perturbation(4);
            let rep = melnikov_representation(sys, &p).unwrap();
            let (lo, hi) = sys.energy_interval();
            for k in 1..6 {
                let h = lo + (hi - lo) * k as f64 / 6.0;
                let direct = crate::quad::melnikov_direct(sys, &p, h).unwrap();
                let via = evaluate_representation(&rep, h).unwrap();
                assert!(
                    (via - direct).abs() <= 1e-6 * (1.0 + direct.abs()),
                    "{sys:?} h={h}: {via} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn bt_parity_doubles_odd_block() {
        // b+ = b−, a+ = a−: representation equals twice the odd-j part of
        // the plus-side-only perturbation.
        let mut s = PerturbationSampler::new(11);
        let base = s.perturbation(4);
        let mut sym = Perturbation::new(4);
        let mut plus_only = Perturbation::new(4);
        for i in 0..=4u32 {
            for j in 0..=(4 - i) {
                let a = base.a_plus.get(i, j);
                let b = base.b_plus.get(i, j);
                sym.set(CoeffKind::APlus, i, j, a.clone()).unwrap();
                sym.set(CoeffKind::AMinus, i, j, a.clone()).unwrap();
                sym.set(CoeffKind::BPlus, i, j, b.clone()).unwrap();
                sym.set(CoeffKind::BMinus, i, j, b.clone()).unwrap();
                plus_only.set(CoeffKind::APlus, i, j, a).unwrap();
                plus_only.set(CoeffKind::BPlus, i, j, b).unwrap();
            }
        }
        for sys in [SystemId::Lv, SystemId::Bt] {
            let r_sym = melnikov_representation(sys, &sym).unwrap();
            let r_plus = melnikov_representation(sys, &plus_only).unwrap();
            for (k, &(i, j)) in basis_elements(sys).iter().enumerate() {
                let got = &r_sym.decomposition().coeffs()[k];
                if j % 2 == 1 {
                    let want = r_plus.decomposition().coeffs()[k].scale(&rat(2, 1));
                    // denominators may differ; compare after alignment
                    let lift_got =
                        got.shift_up((r_plus.denom_power().saturating_sub(r_sym.denom_power())) as usize);
                    let lift_want =
                        want.shift_up((r_sym.denom_power().saturating_sub(r_plus.denom_power())) as usize);
                    assert_eq!(lift_got, lift_want, "{sys:?} I[{i},{j}]");
                } else {
                    assert!(got.is_zero(), "{sys:?} even coefficient I[{i},{j}] = {got:?}");
                }
            }
        }
    }

    #[test]
    fn degree_invariants_on_random_suite() {
        for sys in [SystemId::Lv, SystemId::Bt] {
            for n in 1..=6u32 {
                let mut s = PerturbationSampler::new(1000 + n as u64);
                for trial in 0..25 {
                    let p = s.perturbation_symmetric_a0(n);
                    let rep = melnikov_representation(sys, &p).unwrap();
                    rep.check_degree_invariants(true)
                        .unwrap_or_else(|e| panic!("{sys:?} n={n} trial {trial}: {e}"));
                    // dense draws realize the maximal denominator
                    assert_eq!(rep.denom_power(), MelnikovRepresentation::denom_bound(sys, n));
                    let p = s.perturbation(n);
                    let rep = melnikov_representation(sys, &p).unwrap();
                    rep.check_degree_invariants(false)
                        .unwrap_or_else(|e| panic!("{sys:?} n={n} trial {trial} (general): {e}"));
                }
            }
        }
    }

    #[test]
    fn export_import_round_trip() {
        let mut s = PerturbationSampler::new(23);
        for sys in [SystemId::Lv, SystemId::Bt] {
            let p = s.perturbation(4);
            let rep = melnikov_representation(sys, &p).unwrap();
            let text = rep.export_text();
            let back = MelnikovRepresentation::import_text(&text).unwrap();
            assert_eq!(&back, &rep);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = PerturbationSampler::new(42).perturbation(3);
        let b = PerturbationSampler::new(42).perturbation(3);
        assert_eq!(a, b);
        let c = PerturbationSampler::new(43).perturbation(3);
        assert_ne!(a, c);
    }
}
