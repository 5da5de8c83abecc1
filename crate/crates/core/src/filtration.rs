//! The regions `V_R`, `V_R^i`, `V_R^±`, a sampled filtration radius and
//! orbit classification.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_shift, apply_shift_inverse};
use crate::error::{Error, Result};
use crate::qmc::{halton, stream};
use crate::types::{Point, ShiftSpec};

/// Relative gap required between `|p(w)|` and `(1 + |a|max)|w|`.
pub const FILTRATION_MARGIN: f64 = 0.1;
/// Samples used by the radius certificate.
pub const CERTIFICATE_SAMPLES: usize = 10_000;
const MAX_RADIUS: f64 = 1e8;

/// Which piece of `C^k = V_R ∪ V_R^+ ∪ V_R^-` a point lies in. Indices are
/// 1-based coordinate numbers of the dominating coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    Inner,
    PlusCone(usize),
    MinusCone(usize),
}

impl RegionLabel {
    pub fn is_plus(self) -> bool {
        matches!(self, RegionLabel::PlusCone(_))
    }

    pub fn is_minus(self) -> bool {
        matches!(self, RegionLabel::MinusCone(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Bounded,
    Escaping(usize),
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitVerdict {
    pub verdict: Verdict,
    pub horizon: usize,
}

/// Label of `z`; argmax ties go to the smallest index.
pub fn classify_point(s: &ShiftSpec, r: f64, z: &Point) -> RegionLabel {
    let mut best = 0;
    let mut best_norm = z[0].norm();
    for (i, c) in z.iter().enumerate().skip(1) {
        let n = c.norm();
        if n > best_norm {
            best = i;
            best_norm = n;
        }
    }
    if best_norm <= r {
        RegionLabel::Inner
    } else if best >= s.k - s.nu {
        RegionLabel::PlusCone(best + 1)
    } else {
        RegionLabel::MinusCone(best + 1)
    }
}

/// The `a` of modulus `amax` that most reduces `|p(w) + a z_1|`.
fn worst_parameter(pw: Complex64, z1: Complex64, amax: f64) -> Complex64 {
    if pw.norm() == 0.0 || z1.norm() == 0.0 {
        return Complex64::new(amax, 0.0);
    }
    -(pw / pw.norm()) * (z1.conj() / z1.norm()) * amax
}

/// Quasi-random point on a boundary shell of `V_R^i` for tail index `i`
/// (0-based), together with the adversarial parameter for its image.
fn shell_sample(s: &ShiftSpec, r: f64, amax: f64, i: usize, n: u64) -> (Point, Complex64) {
    let k = s.k;
    let h = halton(n, 2 * k);
    // Shells at radii between R and 8R; other coordinates biased outward.
    let t = r * 2f64.powf(3.0 * h[0]);
    let z: Vec<Complex64> = (0..k)
        .map(|j| {
            if j == i {
                Complex64::from_polar(t, TAU * h[1])
            } else {
                let m = if j < i { 2 * j + 2 } else { 2 * j };
                Complex64::from_polar(t * h[m].powf(0.25), TAU * h[m + 1])
            }
        })
        .collect();
    let pw = s.p.eval(z[k - s.nu]);
    let a = worst_parameter(pw, z[0], amax);
    (Point(z), a)
}

/// Sampled certificate that `R` is a filtration radius for all `|a| <= amax`.
pub fn certify_radius(s: &ShiftSpec, amax: f64, r: f64, samples: usize) -> bool {
    // Growth check on circles |w| in [R, 8R].
    let growth_ok = (0..samples as u64).into_par_iter().all(|n| {
        let h = halton(n, 2);
        let w = Complex64::from_polar(r * 2f64.powf(3.0 * h[0]), TAU * h[1]);
        s.p.eval(w).norm() >= (1.0 + amax) * w.norm() + FILTRATION_MARGIN
    });
    if !growth_ok {
        return false;
    }
    let tail: Vec<usize> = (s.k - s.nu..s.k).collect();
    let per = samples.div_ceil(tail.len()) as u64;
    tail.par_iter().all(|&i| {
        (0..per).all(|n| {
            let (z, a) = shell_sample(s, r, amax, i, n);
            if !classify_point(s, r, &z).is_plus() {
                return true;
            }
            match apply_shift(&s.with_a(a), &z) {
                Ok(w) => classify_point(s, r, &w).is_plus(),
                Err(_) => false,
            }
        })
    })
}

/// Smallest `R = 2^j` (j >= 0) passing [`certify_radius`].
pub fn find_filtration_radius(s: &ShiftSpec, amax: f64) -> Result<f64> {
    if !(amax > 0.0 && amax < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|a|max = {amax} must lie in (0, 1)"
        )));
    }
    let mut r = 1.0;
    while r <= MAX_RADIUS {
        if certify_radius(s, amax, r, CERTIFICATE_SAMPLES) {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(Error::FiltrationSearch(MAX_RADIUS))
}

/// Forward orbit verdict over `horizon` single steps.
pub fn orbit_verdict(s: &ShiftSpec, r: f64, z: &Point, horizon: usize) -> OrbitVerdict {
    let done = |verdict| OrbitVerdict { verdict, horizon };
    let mut w = z.clone();
    let mut label = classify_point(s, r, &w);
    if label.is_plus() {
        return done(Verdict::Escaping(0));
    }
    if horizon == 0 {
        return done(Verdict::Undetermined);
    }
    for n in 1..=horizon {
        w = match apply_shift(s, &w) {
            Ok(w) if w.is_finite() => w,
            _ => return done(Verdict::Undetermined),
        };
        label = classify_point(s, r, &w);
        if label.is_plus() {
            return done(Verdict::Escaping(n));
        }
    }
    if label == RegionLabel::Inner {
        done(Verdict::Bounded)
    } else {
        done(Verdict::Undetermined)
    }
}

/// Whether the backward orbit of `z` avoids `V_R^-` for `horizon` steps.
pub fn backward_bounded(s: &ShiftSpec, r: f64, z: &Point, horizon: usize) -> bool {
    let mut w = z.clone();
    for _ in 0..=horizon {
        if classify_point(s, r, &w).is_minus() {
            return false;
        }
        w = match apply_shift_inverse(s, &w) {
            Ok(w) if w.is_finite() => w,
            _ => return false,
        };
    }
    true
}

/// Offsets of the `3^k - 1` real-part grid neighbours.
fn neighbour_offsets(k: usize, delta: f64) -> Vec<Vec<f64>> {
    let total = 3usize.pow(k as u32);
    (0..total)
        .filter(|&m| m != (total - 1) / 2)
        .map(|mut m| {
            (0..k)
                .map(|_| {
                    let d = (m % 3) as f64 - 1.0;
                    m /= 3;
                    d * delta
                })
                .collect()
        })
        .collect()
}

/// Uniform point of the polydisc `V_R`.
pub fn sample_polydisc(k: usize, r: f64, rng: &mut impl Rng) -> Point {
    Point(
        (0..k)
            .map(|_| {
                let rho = r * rng.gen::<f64>().sqrt();
                Complex64::from_polar(rho, TAU * rng.gen::<f64>())
            })
            .collect(),
    )
}

/// Fraction of uniform samples of `V_R` that look like interior points of
/// `K_a^-`: the sample and all its grid neighbours at spacing `R/100` stay
/// backward bounded through the horizon.
pub fn k_minus_interior_fraction(
    s: &ShiftSpec,
    r: f64,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    let a = s.a.norm();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("|a| = {a} must lie in (0, 1)")));
    }
    if samples == 0 {
        return Err(Error::EmptyResult("no samples requested".into()));
    }
    let offsets = neighbour_offsets(s.k, r / 100.0);
    let hits: usize = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let z = sample_polydisc(s.k, r, &mut stream(seed, i));
            let interior = backward_bounded(s, r, &z, horizon)
                && offsets.iter().all(|off| {
                    let mut y = z.clone();
                    for (c, d) in y.iter_mut().zip(off) {
                        c.re += d;
                    }
                    backward_bounded(s, r, &y, horizon)
                });
            usize::from(interior)
        })
        .sum();
    Ok(hits as f64 / samples as f64)
}

/// Where backward-bounded points sit relative to the two containment
/// readings `K^- ⊂ V_R ∪ V_R^+` and `K^- ⊂ V_R ∩ V_R^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub samples: usize,
    /// Samples whose backward orbit stays below `BACKWARD_BOUND` for the horizon.
    pub bounded: usize,
    pub in_union: f64,
    pub in_intersection: f64,
}

/// Norm cap for the containment test's notion of a bounded backward orbit.
pub const BACKWARD_BOUND: f64 = 1e6;

/// Keeps the candidates whose backward orbit stays below [`BACKWARD_BOUND`]
/// for `horizon` steps and reports the share of them in `V_R ∪ V_R^+` and in
/// `V_R ∩ V_R^+`.
pub fn k_minus_containment(s: &ShiftSpec, r: f64, candidates: &[Point], horizon: usize) -> Result<ContainmentReport> {
    if s.a.norm() == 0.0 {
        return Err(Error::NonInvertible(0.0));
    }
    let flags: Vec<Option<(bool, bool)>> = candidates
        .par_iter()
        .map(|z| {
            let mut w = z.clone();
            for _ in 0..horizon {
                w = apply_shift_inverse(s, &w).ok()?;
                if !(w.is_finite() && w.norm_inf() <= BACKWARD_BOUND) {
                    return None;
                }
            }
            let label = classify_point(s, r, z);
            let inner = z.norm_inf() <= r;
            Some((inner || label.is_plus(), inner && label.is_plus()))
        })
        .collect();
    let kept: Vec<(bool, bool)> = flags.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::EmptyResult("no sample stayed backward bounded".into()));
    }
    let share = |f: fn(&(bool, bool)) -> bool| kept.iter().filter(|x| f(x)).count() as f64 / kept.len() as f64;
    Ok(ContainmentReport {
        samples: candidates.len(),
        bounded: kept.len(),
        in_union: share(|x| x.0),
        in_intersection: share(|x| x.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{c, PolySpec, ZERO};
    use proptest::prelude::*;

    fn shift(k: usize, nu: usize, a: f64, p: &[f64]) -> ShiftSpec {
        ShiftSpec::new(k, nu, c(a, 0.0), PolySpec::from_real(p)).unwrap()
    }

    const Z2: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn classify_examples() {
        let s = shift(3, 2, 0.1, &Z2);
        assert_eq!(classify_point(&s, 2.0, &Point::zeros(3)), RegionLabel::Inner);
        assert_eq!(
            classify_point(&s, 2.0, &Point::from_real(&[0.0, 0.0, 5.0])),
            RegionLabel::PlusCone(3)
        );
        assert_eq!(
            classify_point(&s, 2.0, &Point::from_real(&[5.0, 0.0, 0.0])),
            RegionLabel::MinusCone(1)
        );
        // Ties go to the smallest index.
        assert_eq!(
            classify_point(&s, 2.0, &Point::from_real(&[5.0, 5.0, 5.0])),
            RegionLabel::MinusCone(1)
        );
        assert_eq!(
            classify_point(&s, 2.0, &Point::from_real(&[0.0, 5.0, 5.0])),
            RegionLabel::PlusCone(2)
        );
    }

    #[test]
    fn radius_for_z_squared() {
        let s = shift(3, 2, 0.1, &Z2);
        let r = find_filtration_radius(&s, 0.5).unwrap();
        assert!(r <= 4.0, "R = {r}");
        assert!(certify_radius(&s, 0.5, 2.0 * r, CERTIFICATE_SAMPLES));
        assert!(matches!(find_filtration_radius(&s, 1.5), Err(Error::InvalidParameter(_))));
    }

    /// Independent oracle: dense random boundary sampling with many phases
    /// of `a`, classified directly.
    #[test]
    fn radius_survives_dense_oracle() {
        use rand::Rng;
        for nu in 1..=2 {
            let base = shift(3, nu, 0.1, &Z2);
            let r = find_filtration_radius(&base, 0.5).unwrap();
            let mut rng = stream(7, nu as u64);
            let mut checked = 0;
            for _ in 0..20_000 {
                let t = r * (1.0 + 3.0 * rng.gen::<f64>());
                let i = rng.gen_range(3 - nu..3);
                let mut z = sample_polydisc(3, t, &mut rng);
                z[i] = Complex64::from_polar(t, TAU * rng.gen::<f64>());
                if !classify_point(&base, r, &z).is_plus() {
                    continue;
                }
                let a = Complex64::from_polar(0.5 * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>());
                let w = apply_shift(&base.with_a(a), &z).unwrap();
                assert!(classify_point(&base, r, &w).is_plus(), "{z:?} -> {w:?}");
                checked += 1;
            }
            assert!(checked > 10_000);
        }
    }

    #[test]
    fn verdict_examples() {
        let s = shift(3, 2, 0.1, &Z2);
        assert_eq!(orbit_verdict(&s, 4.0, &Point::zeros(3), 50).verdict, Verdict::Bounded);
        let v = orbit_verdict(&s, 4.0, &Point::from_real(&[10.0, 10.0, 10.0]), 50);
        assert_eq!(v.verdict, Verdict::Escaping(1));
        assert_eq!(orbit_verdict(&s, 4.0, &Point::zeros(3), 0).verdict, Verdict::Undetermined);
        let v = orbit_verdict(&s, 4.0, &Point::from_real(&[0.0, 0.0, 9.0]), 0);
        assert_eq!(v.verdict, Verdict::Escaping(0));
    }

    #[test]
    fn origin_is_backward_bounded() {
        let s = shift(3, 2, 0.5, &Z2);
        assert!(backward_bounded(&s, 2.0, &Point::zeros(3), 200));
    }

    #[test]
    fn interior_fraction_is_small() {
        let s = shift(3, 2, 0.5, &Z2);
        let f = k_minus_interior_fraction(&s, 2.0, 10_000, 40, 1).unwrap();
        assert!(f <= 1e-3, "fraction {f}");
        let g = k_minus_interior_fraction(&s, 2.0, 2_000, 80, 1).unwrap();
        let f_short = k_minus_interior_fraction(&s, 2.0, 2_000, 40, 1).unwrap();
        assert!(g <= f_short);
        assert!(k_minus_interior_fraction(&s.with_a(ZERO), 2.0, 10, 5, 1).is_err());
    }

    #[test]
    fn union_reading_holds() {
        let s = shift(3, 2, 0.5, &Z2);
        // J_a points are backward bounded; random polydisc points mostly are not.
        let mut pts = crate::measures::sample_mu_a(&s, 500, 40, 3).unwrap().points;
        let mut rng = stream(5, 0);
        pts.extend((0..500).map(|_| sample_polydisc(3, 4.0, &mut rng)));
        let rep = k_minus_containment(&s, 2.0, &pts, 8).unwrap();
        assert!(rep.bounded >= 500 && rep.bounded < 1000, "{rep:?}");
        assert_eq!(rep.in_union, 1.0);
        assert!(rep.in_intersection < 0.01, "{rep:?}");
        assert!(k_minus_containment(&s.with_a(ZERO), 2.0, &pts, 5).is_err());
        assert!(k_minus_containment(&s, 2.0, &[], 5).is_err());
    }

    #[test]
    fn neighbour_count() {
        assert_eq!(neighbour_offsets(3, 0.1).len(), 26);
        assert!(neighbour_offsets(3, 0.1).iter().all(|o| o.iter().any(|&d| d != 0.0)));
    }

    proptest! {
        #[test]
        fn labels_partition_space(coords in prop::collection::vec(-10.0f64..10.0, 8), r in 0.5f64..5.0) {
            let s = shift(4, 2, 0.1, &Z2);
            let z = Point((0..4).map(|i| c(coords[2 * i], coords[2 * i + 1])).collect());
            let label = classify_point(&s, r, &z);
            let max = z.norm_inf();
            match label {
                RegionLabel::Inner => prop_assert!(max <= r),
                RegionLabel::PlusCone(i) => {
                    prop_assert!(i >= 3 && max > r && z[i - 1].norm() == max);
                }
                RegionLabel::MinusCone(i) => {
                    prop_assert!(i <= 2 && max > r && z[i - 1].norm() == max);
                }
            }
        }

        #[test]
        fn bounded_orbits_never_visit_plus_cone(coords in prop::collection::vec(-1.5f64..1.5, 6)) {
            let s = shift(3, 2, 0.1, &Z2);
            let z = Point((0..3).map(|i| c(coords[2 * i], coords[2 * i + 1])).collect());
            let v = orbit_verdict(&s, 2.0, &z, 60);
            if v.verdict == Verdict::Bounded {
                let mut w = z.clone();
                for _ in 0..=60 {
                    prop_assert!(!classify_point(&s, 2.0, &w).is_plus());
                    w = apply_shift(&s, &w).unwrap();
                }
            }
        }
    }
}
