//! Truncated Green functions for `p`, for product maps and for `S_a` in both
//! time directions, plus the degeneration comparands.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::graph_residual;
use crate::error::{Error, Result};
use crate::filtration::{classify_point, RegionLabel};
use crate::types::{Point, PolySpec, ShiftSpec};

/// Norm past which the logarithmic asymptotic is used.
pub const REFINE_NORM: f64 = 1e12;
const MAX_EXTRA_LEVELS: usize = 200;

/// A truncated Green function value. `escaped_at` is the first level at which
/// the orbit passed the escape radius; `value` is zero if it never did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEval {
    pub value: f64,
    pub level: usize,
    pub escaped_at: Option<usize>,
}

/// A real number or the `-inf` sentinel for points on the graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    NegInfinity,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::NegInfinity => None,
        }
    }
}

/// Core truncation loop. `step` advances one level; `check` returns the
/// norm and whether the state lies in the escaping region. After escape the
/// orbit keeps going (uncounted) until the norm passes [`REFINE_NORM`], and
/// the value is `(log|w| + offset) / d^levels`.
fn truncate<T, S, C>(start: T, n: usize, d: usize, offset: f64, escape: f64, step: S, check: C) -> GreenEval
where
    S: Fn(&T) -> T,
    C: Fn(&T) -> (f64, bool),
{
    let d = d as f64;
    let mut w = start;
    let mut escaped_at = None;
    for level in 0..=n {
        let (norm, inside) = check(&w);
        if inside && norm > escape {
            escaped_at = Some(level);
            break;
        }
        if level < n {
            w = step(&w);
        }
    }
    let Some(level) = escaped_at else {
        return GreenEval {
            value: 0.0,
            level: n,
            escaped_at: None,
        };
    };
    let mut levels = level;
    for _ in 0..MAX_EXTRA_LEVELS {
        let (norm, inside) = check(&w);
        if inside && norm > REFINE_NORM {
            break;
        }
        w = step(&w);
        levels += 1;
    }
    let (norm, _) = check(&w);
    GreenEval {
        value: ((norm.ln() + offset) / d.powi(levels as i32)).max(0.0),
        level: n,
        escaped_at,
    }
}

/// Escape radius for `p` alone.
pub fn escape_radius_1d(p: &PolySpec) -> f64 {
    2.0 * p.coefficient_bound()
}

/// Escape radius for `S_a` in either direction.
pub fn escape_radius(s: &ShiftSpec) -> f64 {
    2.0 * s.p.coefficient_bound().max(1.0 + s.a.norm())
}

/// `G_p(z)` truncated at level `n`.
pub fn green_1d(p: &PolySpec, z: Complex64, n: usize) -> GreenEval {
    let d = p.degree();
    let offset = p.leading().norm().ln() / (d as f64 - 1.0);
    truncate(z, n, d, offset, escape_radius_1d(p), |w| p.eval(*w), |w| (w.norm(), true))
}

/// `G_{p_nu}(w) = max_i G_p(w_i)`.
pub fn green_prod(p: &PolySpec, nu: usize, w: &[Complex64], n: usize) -> Result<GreenEval> {
    if w.len() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: w.len(),
        });
    }
    w.iter()
        .map(|&x| green_1d(p, x, n))
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::EmptyResult("green_prod needs at least one coordinate".into()))
}

fn forward_block(s: &ShiftSpec, z: &Point) -> Point {
    let (k, nu) = (s.k, s.nu);
    let mut out = Vec::with_capacity(k);
    out.extend_from_slice(&z[nu..]);
    for i in 0..nu {
        out.push(s.a * z[i] + s.p.eval(z[k - nu + i]));
    }
    Point(out)
}

fn backward_block(s: &ShiftSpec, z: &Point) -> Point {
    let (k, nu) = (s.k, s.nu);
    let mut out = Vec::with_capacity(k);
    for i in 0..k - nu {
        out.push((z[nu + i] - s.p.eval(z[i])) / s.a);
    }
    out.extend_from_slice(&z[..nu]);
    Point(out)
}

/// `G_a^+(z)` from `n` forward `nu`-blocks in the sup norm.
pub fn green_plus(s: &ShiftSpec, z: &Point, n: usize) -> Result<GreenEval> {
    s.check_point(z)?;
    let d = s.degree();
    let offset = s.p.leading().norm().ln() / (d as f64 - 1.0);
    let r = escape_radius(s);
    Ok(truncate(
        z.clone(),
        n,
        d,
        offset,
        r,
        |w| forward_block(s, w),
        |w| (w.norm_inf(), matches!(classify_point(s, r, w), RegionLabel::PlusCone(_))),
    ))
}

/// `G_a^-(z)` from `n` backward `(k-nu)`-blocks in the sup norm. Deep in
/// `V_R^-` one block multiplies the norm by roughly `|lead| |w|^{d-1} / |a|`,
/// which fixes the additive constant of the asymptotic.
pub fn green_minus(s: &ShiftSpec, z: &Point, n: usize) -> Result<GreenEval> {
    s.check_point(z)?;
    if s.a.norm() == 0.0 {
        return Err(Error::NonInvertible(0.0));
    }
    let d = s.degree();
    let offset = (s.p.leading().norm().ln() - s.a.norm().ln()) / (d as f64 - 1.0);
    let r = escape_radius(s);
    Ok(truncate(
        z.clone(),
        n,
        d,
        offset,
        r,
        |w| backward_block(s, w),
        |w| (w.norm_inf(), matches!(classify_point(s, r, w), RegionLabel::MinusCone(_))),
    ))
}

/// Plain truncation `log+ ||S_a^{nu n}(z)|| / d^n` without refinement.
pub fn green_plus_raw(s: &ShiftSpec, z: &Point, n: usize) -> f64 {
    let w = (0..n).fold(z.clone(), |w, _| forward_block(s, &w));
    w.norm_inf().ln().max(0.0) / (s.degree() as f64).powi(n as i32)
}

/// Plain truncation `log+ ||S_a^{-(k-nu) n}(z)|| / d^n` without refinement.
pub fn green_minus_raw(s: &ShiftSpec, z: &Point, n: usize) -> f64 {
    let w = (0..n).fold(z.clone(), |w, _| backward_block(s, &w));
    w.norm_inf().ln().max(0.0) / (s.degree() as f64).powi(n as i32)
}

/// `H_a(z) = G_a^-(z) + log|a| / d`.
pub fn h_a(s: &ShiftSpec, z: &Point, n: usize) -> Result<f64> {
    let g = green_minus(s, z, n)?;
    Ok(g.value + s.a.norm().ln() / s.degree() as f64)
}

/// `G_a^-(z) + log|a| / (d - 1)`: the shift under which the backward Green
/// function has a finite limit as `a -> 0` off the graph.
pub fn h_a_convergent(s: &ShiftSpec, z: &Point, n: usize) -> Result<f64> {
    let g = green_minus(s, z, n)?;
    Ok(g.value + s.a.norm().ln() / (s.degree() as f64 - 1.0))
}

/// `F(z) = (1/d) log c(z)`, `-inf` on the graph.
pub fn f_limit(s: &ShiftSpec, z: &Point) -> Result<Extended> {
    s.check_point(z)?;
    let c = graph_residual(s, z);
    if c == 0.0 {
        return Ok(Extended::NegInfinity);
    }
    Ok(Extended::Finite(c.ln() / s.degree() as f64))
}

/// Limit of [`h_a_convergent`] as `a -> 0`: `F(z) + log|lead| / (d (d-1))`.
pub fn f_limit_convergent(s: &ShiftSpec, z: &Point) -> Result<Extended> {
    let d = s.degree() as f64;
    Ok(match f_limit(s, z)? {
        Extended::Finite(x) => Extended::Finite(x + s.p.leading().norm().ln() / (d * (d - 1.0))),
        Extended::NegInfinity => Extended::NegInfinity,
    })
}

/// Parameter bound below which one backward block pushes a compact set with
/// residual at least `c_min` and coordinates at most `m` into `V_R^-`.
pub fn pullback_parameter_bound(c_min: f64, m: f64, r: f64) -> f64 {
    c_min / m.max(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{block_iterate, graph_phi, Direction};
    use crate::filtration::{orbit_verdict, Verdict};
    use crate::qmc::stream;
    use crate::types::{c, ZERO};
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::{LN_2, TAU};

    fn z2() -> PolySpec {
        PolySpec::from_real(&[0.0, 0.0, 1.0])
    }

    fn shift(k: usize, nu: usize, a: Complex64, p: PolySpec) -> ShiftSpec {
        ShiftSpec::new(k, nu, a, p).unwrap()
    }

    #[test]
    fn green_1d_examples() {
        let p = z2();
        for n in 1..10 {
            for t in [0.0, 1.0, 2.5] {
                let g = green_1d(&p, Complex64::from_polar(2.0, t), n);
                assert!((g.value - LN_2).abs() < 1e-12, "{g:?}");
            }
        }
        assert_eq!(green_1d(&p, c(0.6, 0.7), 30).value, 0.0);
        assert_eq!(green_1d(&p, c(1.0, 0.0), 30).value, 0.0);

        let q = PolySpec::from_real(&[-1.0, 0.0, 1.0]);
        let g30 = green_1d(&q, c(2.0, 0.0), 30).value;
        let g40 = green_1d(&q, c(2.0, 0.0), 40).value;
        assert!(g30 > 0.0 && g30 <= 3f64.ln());
        assert!((g30 - g40).abs() < 1e-6);
    }

    /// Independent oracle: a long plain truncation without refinement.
    #[test]
    fn refinement_matches_plain_limit() {
        let q = PolySpec::from_real(&[-1.0, 0.0, 1.0]);
        let z = c(1.3, 0.4);
        let mut w = z;
        let mut n = 0;
        while w.norm() < 1e100 {
            w = q.eval(w);
            n += 1;
        }
        let plain = w.norm().ln() / 2f64.powi(n);
        assert!((green_1d(&q, z, 60).value - plain).abs() < 1e-12);
    }

    #[test]
    fn green_prod_examples() {
        let p = z2();
        let g = green_prod(&p, 2, &[c(0.5, 0.0), c(0.0, -0.9)], 20).unwrap();
        assert_eq!(g.value, 0.0);
        let g = green_prod(&p, 2, &[ZERO, c(3.0, 0.0)], 20).unwrap();
        assert!((g.value - 3f64.ln()).abs() < 1e-12);
        assert!(green_prod(&p, 2, &[ZERO], 20).is_err());
    }

    #[test]
    fn green_plus_vanishes_on_bounded_orbits() {
        let s = shift(3, 2, c(0.1, 0.0), z2());
        let mut rng = stream(3, 0);
        let mut seen = 0;
        for _ in 0..200 {
            let z = Point((0..3).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
            if orbit_verdict(&s, 2.0, &z, 200).verdict == Verdict::Bounded {
                seen += 1;
                for n in [1, 5, 25] {
                    assert_eq!(green_plus(&s, &z, n).unwrap().value, 0.0);
                }
            }
        }
        assert!(seen > 10);
    }

    #[test]
    fn green_minus_examples() {
        let s = shift(3, 2, c(0.3, 0.1), z2());
        assert_eq!(green_minus(&s, &Point::zeros(3), 25).unwrap().value, 0.0);
        assert!(matches!(
            green_minus(&s.with_a(ZERO), &Point::zeros(3), 5),
            Err(Error::NonInvertible(_))
        ));
        let z = Point::from_real(&[5.0, 0.2, 0.1]);
        let g5 = green_minus(&s, &z, 5).unwrap().value;
        let g10 = green_minus(&s, &z, 10).unwrap().value;
        assert!(g5 > 0.0);
        assert!((g5 - g10).abs() < 1e-6);
    }

    #[test]
    fn refined_minus_matches_plain_limit() {
        // The constant in the backward refinement carries -log|a|/(d-1).
        let s = shift(3, 1, c(0.2, 0.0), z2());
        let z = Point::from_real(&[0.9, -0.4, 0.3]);
        // Differences of consecutive plain logarithms do not depend on the
        // additive constant: L_{n+1} - L_n ~ (d-1) d^n G.
        let mut w = z.clone();
        let mut n = 0;
        while w.norm_inf() < 1e80 {
            w = backward_block(&s, &w);
            n += 1;
        }
        let next = backward_block(&s, &w);
        let plain = (next.norm_inf().ln() - w.norm_inf().ln()) / 2f64.powi(n);
        let refined = green_minus(&s, &z, 40).unwrap().value;
        assert!((plain - refined).abs() < 1e-9, "{plain} vs {refined}");
    }

    #[test]
    fn h_a_examples() {
        let s = shift(3, 2, c(0.1, 0.0), z2());
        assert!((h_a(&s, &Point::zeros(3), 20).unwrap() - 0.1f64.ln() / 2.0).abs() < 1e-15);
        let y = Point::from_real(&[3.0, 0.0, 0.0]);
        let w = Point::from_real(&[0.0, 0.0, 0.0]);
        let dh = h_a(&s, &y, 20).unwrap() - h_a(&s, &w, 20).unwrap();
        let dg = green_minus(&s, &y, 20).unwrap().value - green_minus(&s, &w, 20).unwrap().value;
        assert!((dh - dg).abs() < 1e-12);
        assert!(h_a(&s.with_a(ZERO), &w, 5).is_err());
    }

    #[test]
    fn f_examples() {
        let s = shift(3, 2, ZERO, z2());
        assert_eq!(f_limit(&s, &Point::from_real(&[1.0, 0.0, 2.0])).unwrap(), Extended::Finite(0.0));
        let g = graph_phi(&s.p, 3, 2, &[c(0.3, 0.2), c(0.1, -0.5)]).unwrap();
        assert_eq!(f_limit(&s, &g).unwrap(), Extended::NegInfinity);
    }

    #[test]
    fn convergent_shift_approaches_f() {
        let z = Point::from_real(&[0.5, 0.2, 1.4]);
        let base = shift(3, 2, ZERO, z2());
        let f = f_limit_convergent(&base, &z).unwrap().finite().unwrap();
        let mut prev = f64::INFINITY;
        for a in [0.1, 0.01, 0.001] {
            let err = (h_a_convergent(&base.with_a(c(a, 0.0)), &z, 30).unwrap() - f).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.01, "{prev}");
    }

    #[test]
    fn pullback_pushes_into_minus_cone() {
        let s0 = shift(3, 2, ZERO, z2());
        let (m, r, c_min) = (2.0, 2.0, 0.5);
        let bound = pullback_parameter_bound(c_min, m, r);
        let s = s0.with_a(Complex64::from_polar(0.99 * bound, 0.7));
        let mut rng = stream(11, 0);
        let mut checked = 0;
        while checked < 2000 {
            let z = Point((0..3).map(|_| Complex64::from_polar(m * rng.gen::<f64>(), TAU * rng.gen::<f64>())).collect());
            if graph_residual(&s, &z) < c_min || z.norm_inf() > m {
                continue;
            }
            let w = block_iterate(&s, &z, 1, Direction::Backward).unwrap();
            assert!(classify_point(&s, r, &w).is_minus());
            checked += 1;
        }
    }

    fn escaping_point() -> impl Strategy<Value = (ShiftSpec, Point)> {
        (3usize..=5, 0usize..10, 0.05f64..0.9, 0.0f64..TAU, prop::collection::vec(-4.0f64..4.0, 10))
            .prop_map(|(k, nu, a, t, xs)| {
                let nu = 1 + nu % (k - 1);
                let s = shift(k, nu, Complex64::from_polar(a, t), PolySpec::from_real(&[-0.5, 0.0, 1.0]));
                let z = Point((0..k).map(|i| c(xs[2 * i], xs[2 * i + 1])).collect());
                (s, z)
            })
    }

    proptest! {
        #[test]
        fn forward_functional_equation((s, z) in escaping_point()) {
            let g = green_plus(&s, &z, 25).unwrap();
            prop_assume!(g.escaped_at.is_some());
            let w = block_iterate(&s, &z, 1, Direction::Forward).unwrap();
            let gw = green_plus(&s, &w, 25).unwrap();
            prop_assert!((gw.value - 2.0 * g.value).abs() <= 1e-6, "{:?} {:?}", g, gw);
            prop_assert!(g.value >= 0.0);
        }

        #[test]
        fn backward_functional_equation((s, z) in escaping_point()) {
            let g = green_minus(&s, &z, 25).unwrap();
            prop_assume!(g.escaped_at.is_some());
            let w = block_iterate(&s, &z, 1, Direction::Backward).unwrap();
            let gw = green_minus(&s, &w, 25).unwrap();
            prop_assert!((gw.value - 2.0 * g.value).abs() <= 1e-6, "{:?} {:?}", g, gw);
            let g30 = green_minus(&s, &z, 30).unwrap();
            prop_assert!((g30.value - g.value).abs() <= 1e-6);
        }

        #[test]
        fn degenerate_plus_is_product_green((k, nu, xs) in (3usize..=5, 0usize..10, prop::collection::vec(-2.0f64..2.0, 10))) {
            let nu = 1 + nu % (k - 1);
            let p = PolySpec::from_real(&[-0.5, 0.0, 1.0]);
            let s = shift(k, nu, ZERO, p.clone());
            let z = Point((0..k).map(|i| c(xs[2 * i], xs[2 * i + 1])).collect());
            let g = green_plus(&s, &z, 40).unwrap().value;
            let want = green_prod(&p, nu, &z[k - nu..], 60).unwrap().value;
            prop_assert!((g - want).abs() <= 1e-9, "{} vs {}", g, want);
        }

        #[test]
        fn plain_truncation_increments_decay_by_d((s, mut z) in escaping_point()) {
            // In V_R^+ with ||w|| >= 6 one block maps log||w|| to 2 log||w|| + O(0.2),
            // so consecutive truncations differ by at most log 2 / 2^(n+1).
            let k = s.k;
            z[k - 1] = c(6.0, 1.0);
            let g: Vec<f64> = (1..8).map(|n| green_plus_raw(&s, &z, n)).collect();
            for (i, w) in g.windows(2).enumerate() {
                let n = i as i32 + 1;
                prop_assert!((w[1] - w[0]).abs() * 2f64.powi(n + 1) <= LN_2, "n = {} in {:?}", n, g);
            }
        }
    }
}
