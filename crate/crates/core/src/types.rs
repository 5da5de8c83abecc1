//! Shared value types: the generator polynomial, the shift configuration and
//! points of `C^k`.

use std::fmt;
use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex matrix used for Jacobians of iterates and eigenvector bases.
pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One-variable polynomial over `C`, coefficients stored lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySpec {
    coeffs: Vec<Complex64>,
}

impl PolySpec {
    /// Builds a polynomial, trimming exact zero leading coefficients.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Self { coeffs }
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        Self::new(vec![c, ZERO, ONE])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().expect("non-empty coefficients")
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == ONE
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn eval_deriv(&self, z: Complex64) -> Complex64 {
        self.eval_with_deriv(z).1
    }

    /// Value and first derivative in a single Horner pass.
    pub fn eval_with_deriv(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut value = ZERO;
        let mut deriv = ZERO;
        for &c in self.coeffs.iter().rev() {
            deriv = deriv * z + value;
            value = value * z + c;
        }
        (value, deriv)
    }

    pub fn derivative(&self) -> PolySpec {
        if self.coeffs.len() == 1 {
            return PolySpec::new(vec![ZERO]);
        }
        PolySpec::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    /// `p^n(z)` together with `(p^n)'(z)` by the chain rule.
    pub fn iterate_with_deriv(&self, z: Complex64, n: usize) -> (Complex64, Complex64) {
        let mut w = z;
        let mut deriv = ONE;
        for _ in 0..n {
            let (v, dv) = self.eval_with_deriv(w);
            deriv *= dv;
            w = v;
        }
        (w, deriv)
    }

    pub fn iterate(&self, z: Complex64, n: usize) -> Complex64 {
        (0..n).fold(z, |w, _| self.eval(w))
    }

    /// Cauchy bound: every root of `p(w) = t` with `|t| <= |p(w)|` lies inside.
    /// Also a radius beyond which `|p(w)| > |w|` grows geometrically.
    pub fn coefficient_bound(&self) -> f64 {
        let lead = self.leading().norm();
        let max_lower = self.coeffs[..self.degree()]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        1.0 + max_lower / lead
    }
}

impl fmt::Display for PolySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if *c == ZERO && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{i}")?,
            }
        }
        Ok(())
    }
}

/// The shift-like map `S_a(z) = (z_2, ..., z_k, p(z_{k-nu+1}) + a z_1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub k: usize,
    pub nu: usize,
    pub a: Complex64,
    pub p: PolySpec,
}

impl ShiftSpec {
    /// Builds and validates a shift (monicity is not required here).
    pub fn new(k: usize, nu: usize, a: Complex64, p: PolySpec) -> Result<Self> {
        let s = Self { k, nu, a, p };
        validate_shift(&s, false)?;
        Ok(s)
    }

    pub fn with_a(&self, a: Complex64) -> Self {
        Self { a, ..self.clone() }
    }

    /// `eta = nu (k - nu)`, the period of the regular iterate.
    pub fn eta(&self) -> usize {
        self.nu * (self.k - self.nu)
    }

    /// Zero-based index of `z_{k-nu+1}`, the first tail coordinate.
    pub fn tail_start(&self) -> usize {
        self.k - self.nu
    }

    pub fn degree(&self) -> usize {
        self.p.degree()
    }

    pub fn check_point(&self, z: &Point) -> Result<()> {
        if z.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: z.len(),
            });
        }
        Ok(())
    }
}

/// Confirms `k >= 3`, `1 <= nu <= k-1`, `d >= 2`, and monicity when asked.
pub fn validate_shift(s: &ShiftSpec, require_monic: bool) -> Result<()> {
    if s.k < 3 {
        return Err(Error::DimensionTooSmall(s.k));
    }
    if s.nu < 1 || s.nu >= s.k {
        return Err(Error::TypeOutOfRange {
            nu: s.nu,
            max: s.k - 1,
        });
    }
    if s.p.degree() < 2 {
        return Err(Error::DegreeTooSmall(s.p.degree()));
    }
    if require_monic && !s.p.is_monic() {
        return Err(Error::NotMonic(s.p.leading()));
    }
    if !s.a.re.is_finite() || !s.a.im.is_finite() {
        return Err(Error::InvalidParameter(format!("a = {} is not finite", s.a)));
    }
    Ok(())
}

/// A point of `C^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<Complex64>);

impl Point {
    pub fn zeros(k: usize) -> Self {
        Point(vec![ZERO; k])
    }

    pub fn from_real(coords: &[f64]) -> Self {
        Point(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Sup norm over coordinate moduli.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Euclidean norm on `C^k = R^{2k}`.
    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn dist_inf(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Deref for Point {
    type Target = Vec<Complex64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for Point {
    fn from(v: Vec<Complex64>) -> Self {
        Point(v)
    }
}

/// Largest entry modulus of a complex matrix.
pub fn max_entry(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Shorthand used throughout the tests.
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
