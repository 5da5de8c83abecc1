//! Forward and inverse iteration of `S_a`, Jacobians, the graph map and the
//! indeterminacy patterns of the regular iterate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ComplexMatrix, Point, PolySpec, ShiftSpec, ONE, ZERO};

/// Coordinates beyond this modulus count as escaped.
pub const ESCAPE_MODULUS: f64 = 1e30;
/// Backward iteration refuses parameters smaller than this.
pub const MIN_INVERTIBLE_A: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// A recorded orbit. `step` is the signed number of single steps between
/// consecutive points: `1`/`-1` for single steps, `nu` for forward blocks and
/// `-(k - nu)` for backward blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub origin: Point,
    pub step: i64,
    pub points: Vec<Point>,
}

fn escaped(z: &Point) -> bool {
    z.iter()
        .any(|c| !(c.re.is_finite() && c.im.is_finite()) || c.norm() > ESCAPE_MODULUS)
}

fn require_invertible(s: &ShiftSpec) -> Result<()> {
    if s.a.norm() < MIN_INVERTIBLE_A {
        return Err(Error::NonInvertible(s.a.norm()));
    }
    Ok(())
}

/// `S_a(z) = (z_2, ..., z_k, p(z_{k-nu+1}) + a z_1)`.
pub fn apply_shift(s: &ShiftSpec, z: &Point) -> Result<Point> {
    s.check_point(z)?;
    Ok(shift_unchecked(s, z))
}

fn shift_unchecked(s: &ShiftSpec, z: &Point) -> Point {
    let k = s.k;
    let mut out = Vec::with_capacity(k);
    out.extend_from_slice(&z[1..]);
    out.push(s.p.eval(z[k - s.nu]) + s.a * z[0]);
    Point(out)
}

/// `S_a^{-1}(z) = (a^{-1}(z_k - p(z_{k-nu})), z_1, ..., z_{k-1})`.
pub fn apply_shift_inverse(s: &ShiftSpec, z: &Point) -> Result<Point> {
    s.check_point(z)?;
    require_invertible(s)?;
    Ok(inverse_unchecked(s, z))
}

fn inverse_unchecked(s: &ShiftSpec, z: &Point) -> Point {
    let k = s.k;
    let mut out = Vec::with_capacity(k);
    out.push((z[k - 1] - s.p.eval(z[k - s.nu - 1])) / s.a);
    out.extend_from_slice(&z[..k - 1]);
    Point(out)
}

/// `n`-fold composition of `S_a` (negative `n` uses the inverse).
pub fn iterate(s: &ShiftSpec, z: &Point, n: i64) -> Result<Point> {
    s.check_point(z)?;
    if n < 0 {
        require_invertible(s)?;
    }
    let mut w = z.clone();
    for i in 1..=n.unsigned_abs() as i64 {
        w = if n > 0 {
            shift_unchecked(s, &w)
        } else {
            inverse_unchecked(s, &w)
        };
        if escaped(&w) {
            return Err(Error::Escaped {
                step: i * n.signum(),
            });
        }
    }
    Ok(w)
}

/// Like [`iterate`] but keeps every intermediate point.
pub fn iterate_orbit(s: &ShiftSpec, z: &Point, n: i64) -> Result<Orbit> {
    s.check_point(z)?;
    if n < 0 {
        require_invertible(s)?;
    }
    let mut points = vec![z.clone()];
    for i in 1..=n.unsigned_abs() as i64 {
        let last = points.last().expect("non-empty orbit");
        let w = if n > 0 {
            shift_unchecked(s, last)
        } else {
            inverse_unchecked(s, last)
        };
        if escaped(&w) {
            return Err(Error::Escaped {
                step: i * n.signum(),
            });
        }
        points.push(w);
    }
    Ok(Orbit {
        origin: z.clone(),
        step: if n < 0 { -1 } else { 1 },
        points,
    })
}

/// One forward `nu`-block:
/// `(z_{nu+1}, ..., z_k, a z_1 + p(z_{k-nu+1}), ..., a z_nu + p(z_k))`.
fn forward_block(s: &ShiftSpec, z: &Point) -> Point {
    let (k, nu) = (s.k, s.nu);
    let mut out = Vec::with_capacity(k);
    out.extend_from_slice(&z[nu..]);
    for i in 0..nu {
        out.push(s.a * z[i] + s.p.eval(z[k - nu + i]));
    }
    Point(out)
}

/// One backward `(k-nu)`-block:
/// `(a^{-1}(z_{nu+1} - p(z_1)), ..., a^{-1}(z_k - p(z_{k-nu})), z_1, ..., z_nu)`.
fn backward_block(s: &ShiftSpec, z: &Point) -> Point {
    let (k, nu) = (s.k, s.nu);
    let mut out = Vec::with_capacity(k);
    for i in 0..k - nu {
        out.push((z[nu + i] - s.p.eval(z[i])) / s.a);
    }
    out.extend_from_slice(&z[..nu]);
    Point(out)
}

/// `m` blocks of `nu` forward steps or `k - nu` backward steps.
pub fn block_iterate(s: &ShiftSpec, z: &Point, m: usize, direction: Direction) -> Result<Point> {
    s.check_point(z)?;
    if direction == Direction::Backward {
        require_invertible(s)?;
    }
    let (len, sign) = match direction {
        Direction::Forward => (s.nu as i64, 1),
        Direction::Backward => ((s.k - s.nu) as i64, -1),
    };
    let mut w = z.clone();
    for i in 1..=m as i64 {
        w = match direction {
            Direction::Forward => forward_block(s, &w),
            Direction::Backward => backward_block(s, &w),
        };
        if escaped(&w) {
            return Err(Error::Escaped {
                step: sign * i * len,
            });
        }
    }
    Ok(w)
}

/// Recorded orbit of `m` blocks, including the origin.
pub fn block_orbit(s: &ShiftSpec, z: &Point, m: usize, direction: Direction) -> Result<Orbit> {
    s.check_point(z)?;
    if direction == Direction::Backward {
        require_invertible(s)?;
    }
    let step = match direction {
        Direction::Forward => s.nu as i64,
        Direction::Backward => -((s.k - s.nu) as i64),
    };
    let mut points = vec![z.clone()];
    for i in 1..=m as i64 {
        let last = points.last().expect("non-empty orbit");
        let w = match direction {
            Direction::Forward => forward_block(s, last),
            Direction::Backward => backward_block(s, last),
        };
        if escaped(&w) {
            return Err(Error::Escaped { step: i * step });
        }
        points.push(w);
    }
    Ok(Orbit {
        origin: z.clone(),
        step,
        points,
    })
}

/// Jacobian of a single forward step at `z`.
pub fn step_jacobian(s: &ShiftSpec, z: &Point) -> ComplexMatrix {
    let k = s.k;
    let mut m = ComplexMatrix::zeros(k, k);
    for i in 0..k - 1 {
        m[(i, i + 1)] = ONE;
    }
    m[(k - 1, 0)] = s.a;
    m[(k - 1, k - s.nu)] += s.p.eval_deriv(z[k - s.nu]);
    m
}

/// Jacobian of `S_a^{-1}` at `z`.
pub fn inverse_step_jacobian(s: &ShiftSpec, z: &Point) -> ComplexMatrix {
    let k = s.k;
    let mut m = ComplexMatrix::zeros(k, k);
    m[(0, k - s.nu - 1)] = -s.p.eval_deriv(z[k - s.nu - 1]) / s.a;
    m[(0, k - 1)] += ONE / s.a;
    for i in 1..k {
        m[(i, i - 1)] = ONE;
    }
    m
}

fn check_matrix(m: &ComplexMatrix, step: i64) -> Result<()> {
    if m.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Escaped { step })
    }
}

/// `DS_a^n(z)` by the chain rule along the orbit.
pub fn jacobian(s: &ShiftSpec, z: &Point, n: usize) -> Result<ComplexMatrix> {
    s.check_point(z)?;
    if n == 0 {
        return Err(Error::InvalidParameter("jacobian needs n >= 1".into()));
    }
    let mut w = z.clone();
    let mut acc = ComplexMatrix::identity(s.k, s.k);
    for i in 1..=n as i64 {
        acc = step_jacobian(s, &w) * acc;
        check_matrix(&acc, i)?;
        w = shift_unchecked(s, &w);
        if escaped(&w) {
            return Err(Error::Escaped { step: i });
        }
    }
    Ok(acc)
}

/// Jacobian of `S_a^{-n}` at `z`.
pub fn inverse_jacobian(s: &ShiftSpec, z: &Point, n: usize) -> Result<ComplexMatrix> {
    s.check_point(z)?;
    require_invertible(s)?;
    let mut w = z.clone();
    let mut acc = ComplexMatrix::identity(s.k, s.k);
    for i in 1..=n as i64 {
        acc = inverse_step_jacobian(s, &w) * acc;
        check_matrix(&acc, -i)?;
        w = inverse_unchecked(s, &w);
        if escaped(&w) {
            return Err(Error::Escaped { step: -i });
        }
    }
    Ok(acc)
}

/// The point of the graph `Gamma_nu` with free parameters `w`: the first
/// `nu` coordinates are `w` and every later coordinate is `p` of the one `nu`
/// places earlier.
pub fn graph_phi(p: &PolySpec, k: usize, nu: usize, w: &[Complex64]) -> Result<Point> {
    if w.len() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: w.len(),
        });
    }
    if nu == 0 || nu >= k {
        return Err(Error::TypeOutOfRange {
            nu,
            max: k.saturating_sub(1),
        });
    }
    let mut out = Vec::with_capacity(k);
    out.extend_from_slice(w);
    for j in nu..k {
        out.push(p.eval(out[j - nu]));
    }
    Ok(Point(out))
}

/// Coordinatewise `p` on the graph parameters.
pub fn p_nu(p: &PolySpec, w: &[Complex64]) -> Vec<Complex64> {
    w.iter().map(|&x| p.eval(x)).collect()
}

/// `c(z) = max_i |z_{nu+i} - p(z_i)|`, zero exactly on the graph.
pub fn graph_residual(s: &ShiftSpec, z: &Point) -> f64 {
    (0..s.k - s.nu)
        .map(|i| (z[s.nu + i] - s.p.eval(z[i])).norm())
        .fold(0.0, f64::max)
}

/// Pattern of a set of homogeneous coordinates at infinity: which affine
/// slots (1-based) are free and which are forced to zero. The homogenising
/// coordinate is always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinatePattern {
    pub free: Vec<usize>,
    pub zero: Vec<usize>,
}

impl CoordinatePattern {
    fn from_free(k: usize, free: Vec<usize>) -> Self {
        let zero = (1..=k).filter(|i| !free.contains(i)).collect();
        Self { free, zero }
    }

    pub fn intersects(&self, other: &CoordinatePattern) -> bool {
        self.free.iter().any(|i| other.free.contains(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndeterminacyDescription {
    /// Indeterminacy of the `eta`-th iterate.
    pub plus_set: Vec<CoordinatePattern>,
    /// Indeterminacy of its inverse.
    pub minus_set: Vec<CoordinatePattern>,
    pub disjoint: bool,
    /// Patterns for `S_a` and `S_a^{-1}` themselves.
    pub single_plus: CoordinatePattern,
    pub single_minus: CoordinatePattern,
    /// Whether the single-step patterns meet (`S_a` is then not regular).
    pub single_step_overlap: bool,
}

/// Closed-form indeterminacy patterns of `S_a^eta` and of `S_a`.
pub fn indeterminacy_sets(s: &ShiftSpec) -> IndeterminacyDescription {
    let (k, nu) = (s.k, s.nu);
    let plus = CoordinatePattern::from_free(k, (1..=k - nu).collect());
    let minus = CoordinatePattern::from_free(k, (k - nu + 1..=k).collect());
    let disjoint = !plus.intersects(&minus);
    // The top-degree part of S_a only involves z_{k-nu+1}; that of S_a^{-1}
    // only z_{k-nu}. Each vanishes when its one variable does.
    let single_plus = CoordinatePattern::from_free(k, (1..=k).filter(|&i| i != k - nu + 1).collect());
    let single_minus = CoordinatePattern::from_free(k, (1..=k).filter(|&i| i != k - nu).collect());
    let single_step_overlap = single_plus.intersects(&single_minus);
    IndeterminacyDescription {
        plus_set: vec![plus],
        minus_set: vec![minus],
        disjoint,
        single_plus,
        single_minus,
        single_step_overlap,
    }
}

/// Whether `S_a^eta` reduces to a graph-preserving map at `a = 0`.
pub fn is_degenerate(s: &ShiftSpec) -> bool {
    s.a == ZERO
}
