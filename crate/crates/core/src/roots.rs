//! Roots of one-variable polynomials via companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{PolySpec, ZERO};

const NEWTON_STEPS: usize = 4;

/// All `d` roots of `p`, with multiplicity, polished by a few Newton steps.
pub fn roots(p: &PolySpec) -> Result<Vec<Complex64>> {
    let d = p.degree();
    let c = p.coeffs();
    let lead = p.leading();
    if lead == ZERO {
        return Ok(Vec::new());
    }
    match d {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![-c[0] / lead]),
        2 => {
            let (a, b, cc) = (lead, c[1], c[0]);
            let disc = (b * b - a * cc * 4.0).sqrt();
            // Pick the sign that avoids cancellation, then use Vieta.
            let q = if (b.conj() * disc).re >= 0.0 {
                -(b + disc) / 2.0
            } else {
                -(b - disc) / 2.0
            };
            if q == ZERO {
                return Ok(vec![ZERO, ZERO]);
            }
            return Ok(vec![q / a, cc / q]);
        }
        _ => {}
    }
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -c[i] / lead;
    }
    let eig = m
        .try_schur(1e-15, 10_000)
        .ok_or(Error::RootSolve { target: ZERO })?
        .eigenvalues()
        .ok_or(Error::RootSolve { target: ZERO })?;
    let dp = p.derivative();
    let mut out = Vec::with_capacity(d);
    for mut z in eig.iter().copied() {
        for _ in 0..NEWTON_STEPS {
            let f = p.eval(z);
            let df = dp.eval(z);
            if df.norm() < 1e-300 {
                break;
            }
            let step = f / df;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z -= step;
        }
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::RootSolve { target: ZERO });
        }
        out.push(z);
    }
    Ok(out)
}

/// Solutions of `p(w) = t`.
pub fn preimages(p: &PolySpec, t: Complex64) -> Result<Vec<Complex64>> {
    let mut c = p.coeffs().to_vec();
    c[0] -= t;
    roots(&PolySpec::new(c)).map_err(|_| Error::RootSolve { target: t })
}

/// The preimage of `t` under `p` nearest to `hint`. Quadratics are solved
/// in closed form; higher degrees try Newton from `hint` before falling back
/// to the full solve.
pub fn nearest_preimage(p: &PolySpec, t: Complex64, hint: Complex64) -> Result<Complex64> {
    if p.degree() > 2 {
        let mut z = hint;
        for _ in 0..40 {
            let (f, df) = p.eval_with_deriv(z);
            let step = (f - t) / df;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            z -= step;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                // Accept only if no other root is closer to the hint.
                if (z - hint).norm() < 0.25 * root_separation(p, z) {
                    return Ok(z);
                }
                break;
            }
        }
    }
    preimages(p, t)?
        .into_iter()
        .min_by(|a, b| (a - hint).norm().total_cmp(&(b - hint).norm()))
        .ok_or(Error::RootSolve { target: t })
}

/// Lower bound on the distance from the root `z` of `p - t` to the other
/// roots: deflate by `(w - z)`, expand the quotient around `z` and apply the
/// Cauchy lower bound `|q_0| / (|q_0| + max_j |q_j|)`.
fn root_separation(p: &PolySpec, z: Complex64) -> f64 {
    let c = p.coeffs();
    let d = p.degree();
    let mut q = vec![ZERO; d];
    let mut carry = ZERO;
    for i in (1..=d).rev() {
        carry = carry * z + c[i];
        q[i - 1] = carry;
    }
    let shifted: Vec<Complex64> = (0..d)
        .map(|j| {
            let mut acc = ZERO;
            let mut binom = 1.0f64;
            for (i, &qi) in q.iter().enumerate().skip(j) {
                if i > j {
                    binom = binom * i as f64 / (i - j) as f64;
                }
                acc += qi * binom * z.powu((i - j) as u32);
            }
            acc
        })
        .collect();
    let q0 = shifted[0].norm();
    let qmax = shifted[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    if q0 == 0.0 {
        0.0
    } else {
        q0 / (q0 + qmax)
    }
}
