//! Eigensplitting of `DS_0^eta` and the adapted norm built on it.

use num_complex::Complex64;
use serde::Serialize;

use super::cover::PlaneCover;
use super::partition::{PartitionLabel, Symbol};
use crate::error::{Error, Result};
use crate::types::{Point, ShiftSpec, ONE, ZERO};

/// Splitting at `z` for `a = 0`. `E_0` is spanned by the first `k - nu`
/// standard vectors (the kernel of `DS_0^eta`); `vectors[i]` spans `E_{i+1}`
/// with eigenvalue `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Splitting {
    pub z: Point,
    pub e0_dim: usize,
    pub vectors: Vec<Vec<Complex64>>,
    pub eigenvalues: Vec<Complex64>,
    /// Per tail slot, the direction carried along orbits by `DS_0^eta`:
    /// tail entry 1 and `1/(p^l)'(z_q)` at position `q` that lies `l` steps
    /// of `nu` below the tail. `None` where some such derivative vanishes.
    pub covariant: Vec<Option<Vec<Complex64>>>,
    pub label: Option<PartitionLabel>,
}

/// Zero-based first position and its exponent for tail slot `i` (1-based)
/// from `k = m nu + r`; later positions step by `nu` and add one.
fn first_entry(k: usize, nu: usize, i: usize) -> (usize, usize) {
    let (m, r) = (k / nu, k % nu);
    if i > nu - r {
        (i + r - nu - 1, k - nu - m)
    } else {
        (i + r - 1, k + 1 - nu - m)
    }
}

/// Eigenvectors normalised so that the first nonzero entry is 1: entry at
/// exponent `e` is `(p^{e - e_0})'(p^{e_0}(w))` with `w` the tail coordinate.
pub fn eigen_split(s: &ShiftSpec, z: &Point) -> Result<Splitting> {
    s.check_point(z)?;
    if s.a != ZERO {
        return Err(Error::InvalidParameter("eigen_split needs a = 0".into()));
    }
    let (k, nu) = (s.k, s.nu);
    let mut vectors = Vec::with_capacity(nu);
    let mut eigenvalues = Vec::with_capacity(nu);
    for i in 1..=nu {
        let w = z[k - nu + i - 1];
        let (first, e0) = first_entry(k, nu, i);
        let base = s.p.iterate(w, e0);
        let mut v = vec![ZERO; k];
        let (mut pos, mut e) = (first, e0);
        while pos < k {
            v[pos] = s.p.iterate_with_deriv(base, e - e0).1;
            pos += nu;
            e += 1;
        }
        vectors.push(v);
        eigenvalues.push(s.p.iterate_with_deriv(w, k - nu).1);
    }
    let covariant = (0..nu).map(|t| covariant_axis(s, z, t)).collect();
    Ok(Splitting {
        z: z.clone(),
        e0_dim: k - nu,
        vectors,
        eigenvalues,
        covariant,
        label: None,
    })
}

fn covariant_axis(s: &ShiftSpec, z: &Point, t: usize) -> Option<Vec<Complex64>> {
    let tail = s.tail_start() + t;
    let mut v = vec![ZERO; s.k];
    v[tail] = ONE;
    let mut l = 1;
    while l * s.nu <= tail {
        let q = tail - l * s.nu;
        let d = s.p.iterate_with_deriv(z[q], l).1;
        if d == ZERO {
            return None;
        }
        v[q] = ONE / d;
        l += 1;
    }
    Some(v)
}

impl Splitting {
    pub fn with_label(mut self, label: PartitionLabel) -> Self {
        self.label = Some(label);
        self
    }

    /// Covariant axis of tail slot `t`, used for the unstable part.
    pub fn unstable_axis(&self, t: usize) -> Result<Vec<Complex64>> {
        self.covariant[t]
            .clone()
            .ok_or_else(|| Error::InvalidParameter(format!("slot {t} meets a critical point")))
    }

    /// Eigenvector of tail slot `t` (0-based) scaled to tail component 1.
    pub fn tail_normalized(&self, t: usize) -> Result<Vec<Complex64>> {
        let pos = self.e0_dim + t;
        let lead = self.vectors[t][pos];
        if lead == ZERO {
            return Err(Error::InvalidParameter(format!("eigenvector {t} has no tail component")));
        }
        Ok(self.vectors[t].iter().map(|x| x / lead).collect())
    }
}

/// Unstable coefficients and stable remainder of `v` at a labelled point.
/// The unstable part uses the covariant axes: they agree with the
/// eigenvectors in the tail and, unlike them, are mapped onto each other by
/// `DS_0^eta`, so the stable remainder of an image stays small.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedParts {
    /// Coefficient on each expanding slot's tail-normalised eigenvector.
    pub unstable: Vec<Complex64>,
    /// `v` minus its unstable part; zero on expanding tail slots.
    pub stable: Vec<Complex64>,
    pub expanding: Vec<usize>,
}

pub fn adapted_parts(split: &Splitting, label: &PartitionLabel, v: &[Complex64]) -> Result<AdaptedParts> {
    let k = split.z.len();
    if v.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: v.len() });
    }
    let mut stable = v.to_vec();
    let mut unstable = Vec::new();
    let mut expanding = Vec::new();
    for (t, sym) in label.0.iter().enumerate() {
        match sym {
            Symbol::Zero => {
                let u = split.unstable_axis(t)?;
                let c = v[split.e0_dim + t];
                for (x, y) in stable.iter_mut().zip(&u) {
                    *x -= c * y;
                }
                unstable.push(c);
                expanding.push(t);
            }
            Symbol::C => {}
            Symbol::Inf => return Err(Error::OutsideCover(split.z[split.e0_dim + t])),
        }
    }
    Ok(AdaptedParts {
        unstable,
        stable,
        expanding,
    })
}

/// Stable and unstable parts of the adapted norm: Euclidean on `E_0`,
/// `1/dist` weighted on contracting tail slots, plain modulus on the
/// expanding coefficients.
pub fn adapted_components(
    cover: &PlaneCover,
    split: &Splitting,
    label: &PartitionLabel,
    v: &[Complex64],
) -> Result<(f64, f64)> {
    let parts = adapted_parts(split, label, v)?;
    let head = parts.stable[..split.e0_dim].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let mut s_norm = head;
    for (t, sym) in label.0.iter().enumerate() {
        if *sym == Symbol::C {
            let w = split.z[split.e0_dim + t];
            let dist = cover.boundary_distance(w)?;
            s_norm += parts.stable[split.e0_dim + t].norm() / dist;
        }
    }
    let u_norm = parts.unstable.iter().map(|c| c.norm()).sum();
    Ok((s_norm, u_norm))
}

pub fn adapted_norm(cover: &PlaneCover, split: &Splitting, label: &PartitionLabel, v: &[Complex64]) -> Result<f64> {
    let (s, u) = adapted_components(cover, split, label, v)?;
    Ok(s + u)
}

/// Standard basis vector `e_j` in `C^k`.
pub fn unit(k: usize, j: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; k];
    v[j] = ONE;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::jacobian;
    use crate::hyperbolicity::cover::{build_plane_cover, PlaneBox};
    use crate::hyperbolicity::one_d::julia_cloud_1d;
    use crate::types::{c, PolySpec};
    use proptest::prelude::*;

    fn spec(k: usize, nu: usize, p: PolySpec) -> ShiftSpec {
        ShiftSpec::new(k, nu, ZERO, p).unwrap()
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn k3_type2_vectors() {
        let p = PolySpec::from_real(&[-1.0, 0.0, 1.0]);
        let z = Point(vec![c(0.3, 0.1), c(0.7, -0.2), c(-0.4, 0.9)]);
        let sp = eigen_split(&spec(3, 2, p.clone()), &z).unwrap();
        assert_eq!(sp.e0_dim, 1);
        assert!(close(sp.eigenvalues[0], p.eval_deriv(z[1])));
        assert!(close(sp.eigenvalues[1], p.eval_deriv(z[2])));
        let want0 = [ZERO, ONE, ZERO];
        let want1 = [ONE, ZERO, p.eval_deriv(z[2])];
        for j in 0..3 {
            assert!(close(sp.vectors[0][j], want0[j]));
            assert!(close(sp.vectors[1][j], want1[j]));
        }
    }

    #[test]
    fn k3_type1_vector() {
        let p = PolySpec::from_real(&[0.25, 0.0, 1.0]);
        let z = Point(vec![c(0.3, 0.1), c(0.7, -0.2), c(-0.4, 0.9)]);
        let sp = eigen_split(&spec(3, 1, p.clone()), &z).unwrap();
        let d2 = p.iterate_with_deriv(z[2], 2).1;
        let want = [ONE, p.eval_deriv(z[2]), d2];
        for j in 0..3 {
            assert!(close(sp.vectors[0][j], want[j]));
        }
        assert!(close(sp.eigenvalues[0], d2));
    }

    #[test]
    fn rejects_nonzero_a() {
        let p = PolySpec::quadratic(ZERO);
        let s = ShiftSpec::new(3, 2, c(0.01, 0.0), p).unwrap();
        assert!(eigen_split(&s, &Point::zeros(3)).is_err());
    }

    fn residual(k: usize, nu: usize, z: &Point) -> f64 {
        let s = spec(k, nu, PolySpec::from_real(&[-0.5, 0.0, 1.0]));
        let sp = eigen_split(&s, z).unwrap();
        let d = jacobian(&s, z, s.eta()).unwrap();
        let mut worst: f64 = 0.0;
        for (v, lam) in sp.vectors.iter().zip(&sp.eigenvalues) {
            let vv = nalgebra::DVector::from_column_slice(v);
            let img = &d * &vv;
            let scale = 1.0 + lam.norm() * vv.norm();
            let err = (img - vv * *lam).norm() / scale;
            worst = worst.max(err);
        }
        let mut kernel = worst;
        for j in 0..sp.e0_dim {
            kernel = kernel.max(d.column(j).norm());
        }
        kernel
    }

    proptest! {
        #[test]
        fn eigen_residuals(
            coords in proptest::collection::vec((-1.2f64..1.2, -1.2f64..1.2), 5),
            case in 0usize..4,
        ) {
            let (k, nu) = [(3, 1), (3, 2), (4, 2), (5, 2)][case];
            let z = Point(coords[..k].iter().map(|&(x, y)| c(x, y)).collect());
            prop_assert!(residual(k, nu, &z) <= 1e-9);
        }

        #[test]
        fn norm_is_homogeneous(t in (-3.0f64..3.0, -3.0f64..3.0), v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3)) {
            let (cover, s) = circle_cover();
            let z = Point(vec![c(0.2, 0.0), c(0.0, 1.0), c(0.6, 0.8)]);
            let label = PartitionLabel::of(&cover, &s, &z);
            let sp = eigen_split(&s, &z).unwrap();
            let v: Vec<Complex64> = v.iter().map(|&(x, y)| c(x, y)).collect();
            let t = c(t.0, t.1);
            let tv: Vec<Complex64> = v.iter().map(|x| x * t).collect();
            let a = adapted_norm(&cover, &sp, &label, &tv).unwrap();
            let b = t.norm() * adapted_norm(&cover, &sp, &label, &v).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
        }
    }

    fn circle_cover() -> (PlaneCover, ShiftSpec) {
        static COVER: std::sync::OnceLock<PlaneCover> = std::sync::OnceLock::new();
        let p = PolySpec::quadratic(ZERO);
        let cover = COVER.get_or_init(|| {
            let cloud = julia_cloud_1d(&p, 2000, 3).unwrap();
            build_plane_cover(&p, &cloud, 0.1, PlaneBox::square(2.0), 0.02).unwrap()
        });
        (cover.clone(), spec(3, 2, p))
    }

    #[test]
    fn zero_vector_has_zero_norm() {
        let (cover, s) = circle_cover();
        let z = Point(vec![c(0.3, 0.0), ZERO, c(0.6, 0.8)]);
        let label = PartitionLabel::of(&cover, &s, &z);
        assert_eq!(label.to_string(), "(c,0)");
        let sp = eigen_split(&s, &z).unwrap();
        assert_eq!(adapted_norm(&cover, &sp, &label, &[ZERO; 3]).unwrap(), 0.0);
    }

    #[test]
    fn circle_tail_expands_by_two() {
        let (cover, s) = circle_cover();
        let z = Point(vec![c(0.3, 0.0), c(0.0, 1.0), c(0.6, 0.8)]);
        let label = PartitionLabel::of(&cover, &s, &z);
        assert_eq!(label.to_string(), "(0,0)");
        let sp = eigen_split(&s, &z).unwrap();
        let d = jacobian(&s, &z, s.eta()).unwrap();
        let y = crate::dynamics::iterate(&s, &z, s.eta() as i64).unwrap();
        let sy = eigen_split(&s, &y).unwrap();
        for t in 0..2 {
            let u = sp.tail_normalized(t).unwrap();
            let img: Vec<Complex64> = (&d * nalgebra::DVector::from_column_slice(&u)).iter().copied().collect();
            let before = adapted_parts(&sp, &label, &u).unwrap();
            let after = adapted_parts(&sy, &label, &img).unwrap();
            let ratio = after.unstable[t].norm() / before.unstable[t].norm();
            assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
        }
    }
}
