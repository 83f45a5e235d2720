//! Exact rational polynomials in the energy variable and the little linear
//! algebra the reduction and annihilator machinery needs.
//!
//! Coefficients are arbitrary-precision rationals; floating point enters only
//! through [`RationalPoly::eval_f64`].

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Shorthand for an exact rational from an integer pair.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses an exact rational from `num/den`, an integer, or a plain decimal
/// (which converts exactly via a power of ten).
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let (sign, int_digits) = match int_part.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, int_part.strip_prefix('+').unwrap_or(int_part)),
        };
        if !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac_part);
        let n: BigInt = digits.parse().ok()?;
        let d = BigInt::from(10u32).pow(frac_part.len() as u32);
        return Some(BigRational::new(BigInt::from(sign) * n, d));
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from(n))
}

/// Dense polynomial in `h` with exact rational coefficients, ascending powers.
///
/// Invariant: no trailing zero coefficients; the zero polynomial stores an
/// empty coefficient vector and reports degree −1.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalPoly {
    coeffs: Vec<BigRational>,
}

impl RationalPoly {
    pub fn zero() -> Self {
        RationalPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// Builds from ascending-power coefficients, trimming trailing zeros.
    pub fn from_coeffs(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        RationalPoly { coeffs }
    }

    /// Convenience constructor from `(num, den)` pairs, ascending powers.
    pub fn from_pairs(pairs: &[(i64, i64)]) -> Self {
        Self::from_coeffs(pairs.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial at −1.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Coefficient of `h^k` (zero beyond the stored length).
    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            out.push(self.coeff(k) + other.coeff(k));
        }
        Self::from_coeffs(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            out.push(self.coeff(k) - other.coeff(k));
        }
        Self::from_coeffs(out)
    }

    pub fn neg(&self) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self::from_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_coeffs(out)
    }

    /// Multiplies by `h^k`.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); k];
        out.extend(self.coeffs.iter().cloned());
        RationalPoly { coeffs: out }
    }

    /// Divides by `h^k`; panics if some low-order coefficient is nonzero.
    pub fn shift_down(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        assert!(
            self.coeffs.iter().take(k).all(Zero::is_zero),
            "polynomial not divisible by h^{k}"
        );
        Self::from_coeffs(self.coeffs.iter().skip(k).cloned().collect())
    }

    /// True when `h^k` divides the polynomial (always true for zero).
    pub fn divisible_by_h_pow(&self, k: usize) -> bool {
        self.is_zero() || (self.coeffs.len() > k && self.coeffs.iter().take(k).all(Zero::is_zero))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * BigRational::from(BigInt::from(k)))
                .collect(),
        )
    }

    pub fn eval_f64(&self, h: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * h + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    pub fn eval_rat(&self, h: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * h + c;
        }
        acc
    }
}

impl fmt::Debug for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| if k == 0 { format!("{c}") } else { format!("({c})h^{k}") })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// Kernel vector of an exact rational matrix, by fraction-free elimination.
///
/// Rows are equations, columns unknowns. Returns the kernel dimension and one
/// kernel vector: the basis vector associated with the first free column,
/// normalized so its first nonzero entry is 1. Returns dimension 0 and an
/// empty vector when the kernel is trivial.
pub fn kernel_vector(rows: &[Vec<BigRational>], ncols: usize) -> (usize, Vec<BigRational>) {
    // Clear denominators row by row; the kernel is unchanged.
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|row| {
            debug_assert_eq!(row.len(), ncols);
            let mut lcm = BigInt::one();
            for c in row {
                lcm = num_integer::lcm(lcm, c.denom().clone());
            }
            row.iter().map(|c| c.numer() * (&lcm / c.denom())).collect()
        })
        .collect();

    // Bareiss fraction-free elimination with first-nonzero pivoting, which
    // keeps the output deterministic.
    let nrows = m.len();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..nrows {
            for k in c + 1..ncols {
                let t = &m[r][c] * &m[i][k] - &m[i][c] * &m[r][k];
                m[i][k] = &t / &prev;
            }
            m[i][c] = BigInt::zero();
        }
        prev = m[r][c].clone();
        pivot_cols.push(c);
        r += 1;
        if r == nrows {
            break;
        }
    }

    let free_cols: Vec<usize> = (0..ncols).filter(|c| !pivot_cols.contains(c)).collect();
    let dim = free_cols.len();
    if dim == 0 {
        return (0, Vec::new());
    }

    // Back-substitute with the first free variable set to 1.
    let free = free_cols[0];
    let mut x = vec![BigRational::zero(); ncols];
    x[free] = BigRational::one();
    for (row, &pc) in pivot_cols.iter().enumerate().rev() {
        let mut s = BigRational::zero();
        for k in pc + 1..ncols {
            if !x[k].is_zero() && !m[row][k].is_zero() {
                s += BigRational::from(m[row][k].clone()) * &x[k];
            }
        }
        x[pc] = -s / BigRational::from(m[row][pc].clone());
    }

    // First nonzero entry scaled to 1.
    if let Some(first) = x.iter().find(|v| !v.is_zero()).cloned() {
        for v in &mut x {
            *v /= &first;
        }
    }
    (dim, x)
}

/// Nearest rational with the given power-of-two denominator.
pub fn rational_from_f64_dyadic(v: f64, log2_den: u32) -> BigRational {
    let den = 1i64 << log2_den;
    let num = (v * den as f64).round() as i64;
    rat(num, den)
}

/// Exact magnitude comparison helper for tests on rationals.
pub fn rat_abs(v: &BigRational) -> BigRational {
    v.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/4"), Some(rat(3, 4)));
        assert_eq!(parse_rational("-7"), Some(rat(-7, 1)));
        assert_eq!(parse_rational("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rational("1.5"), Some(rat(3, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn degree_and_trim() {
        let p = RationalPoly::from_pairs(&[(1, 2), (0, 1), (0, 1)]);
        assert_eq!(p.degree(), 0);
        assert_eq!(RationalPoly::zero().degree(), -1);
        assert!(RationalPoly::from_pairs(&[(0, 1)]).is_zero());
    }

    #[test]
    fn shift_round_trip() {
        let p = RationalPoly::from_pairs(&[(3, 4), (-1, 2)]);
        assert_eq!(p.shift_up(2).shift_down(2), p);
        assert!(p.shift_up(1).divisible_by_h_pow(1));
        assert!(!p.divisible_by_h_pow(1));
    }

    #[test]
    fn derivative_basic() {
        // d/dh (1/2 + 3h + h^2) = 3 + 2h
        let p = RationalPoly::from_pairs(&[(1, 2), (3, 1), (1, 1)]);
        assert_eq!(p.derivative(), RationalPoly::from_pairs(&[(3, 1), (2, 1)]));
    }

    #[test]
    fn kernel_of_simple_system() {
        // x + y - 2z = 0 ; x - y = 0  =>  kernel spanned by (1, 1, 1)
        let rows = vec![
            vec![rat(1, 1), rat(1, 1), rat(-2, 1)],
            vec![rat(1, 1), rat(-1, 1), rat(0, 1)],
        ];
        let (dim, v) = kernel_vector(&rows, 3);
        assert_eq!(dim, 1);
        assert_eq!(v, vec![rat(1, 1), rat(1, 1), rat(1, 1)]);
    }

    #[test]
    fn kernel_trivial() {
        let rows = vec![vec![rat(1, 1), rat(0, 1)], vec![rat(0, 1), rat(1, 1)]];
        let (dim, v) = kernel_vector(&rows, 2);
        assert_eq!(dim, 0);
        assert!(v.is_empty());
    }

    #[test]
    fn kernel_picks_first_free_column_deterministically() {
        // Single equation x + y + z = 0: two free columns, expect the vector
        // for the first one, scaled to leading coefficient 1.
        let rows = vec![vec![rat(1, 1), rat(1, 1), rat(1, 1)]];
        let (dim, v) = kernel_vector(&rows, 3);
        assert_eq!(dim, 2);
        assert_eq!(v, vec![rat(1, 1), rat(-1, 1), rat(0, 1)]);
    }

    proptest! {
        #[test]
        fn mul_matches_pointwise_eval(a in proptest::collection::vec(-20i64..20, 0..5),
                                      b in proptest::collection::vec(-20i64..20, 0..5),
                                      x in -4i64..4) {
            let pa = RationalPoly::from_coeffs(a.iter().map(|&n| rat(n, 1)).collect());
            let pb = RationalPoly::from_coeffs(b.iter().map(|&n| rat(n, 1)).collect());
            let x = rat(x, 3);
            let lhs = pa.mul(&pb).eval_rat(&x);
            let rhs = pa.eval_rat(&x) * pb.eval_rat(&x);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn kernel_vector_annihilates(rows in proptest::collection::vec(
            proptest::collection::vec(-6i64..6, 4), 1..3)) {
            let m: Vec<Vec<BigRational>> = rows.iter()
                .map(|r| r.iter().map(|&n| rat(n, 1)).collect())
                .collect();
            let (dim, v) = kernel_vector(&m, 4);
            prop_assume!(dim > 0);
            for row in &m {
                let s: BigRational = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                prop_assert!(s.is_zero());
            }
        }
    }
}
