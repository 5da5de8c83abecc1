//! Sample clouds for the equilibrium measures, the shadowing sampler for
//! `mu_a`, Hausdorff distances, Lyapunov estimators and the degeneration
//! sweep.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{graph_phi, graph_residual, jacobian};
use crate::error::{Error, Result};
use crate::potential::{f_limit, green_minus, green_plus, h_a};
use crate::qmc::{halton, stream};
use crate::roots::{nearest_preimage, preimages};
use crate::types::{ComplexMatrix, Point, PolySpec, ShiftSpec, ONE, ZERO};

/// Default length of backward branch chains.
pub const DEFAULT_BURN_IN: usize = 40;
const PAST_STREAM: u64 = 0x5eed_0000_0000_0001;
const POWER_STREAM: u64 = 0x5eed_0000_0000_0002;
const POWER_STEPS: usize = 20;
const SHADOW_TOL: f64 = 1e-14;
const SHADOW_SWEEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Brolin1d,
    Product,
    GraphPushforward,
    GreenMinimizer,
    Shadowing,
}

/// Uniformly weighted point samples standing in for a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCloud {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl MeasureCloud {
    pub fn uniform(points: Vec<Point>, provenance: Provenance) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self {
            points,
            weights,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

/// Random stream for coordinate `t` of sample `i`.
fn coordinate_stream(seed: u64, i: usize, t: usize) -> ChaCha8Rng {
    stream(seed, ((i as u64) << 8) | t as u64)
}

/// One Brolin chain: start on a circle outside the filled Julia set and take
/// `burn_in` uniformly chosen preimages.
fn brolin_point(p: &PolySpec, burn_in: usize, rng: &mut ChaCha8Rng) -> Result<Complex64> {
    let r0 = 1.5 * p.coefficient_bound();
    let mut z = Complex64::from_polar(r0, TAU * rng.gen::<f64>());
    for _ in 0..burn_in {
        let roots = preimages(p, z)?;
        z = roots[rng.gen_range(0..roots.len())];
    }
    Ok(z)
}

/// `count` samples of the equilibrium measure of `p` by backward chains.
pub fn sample_mu_p(p: &PolySpec, count: usize, burn_in: usize, seed: u64) -> Result<MeasureCloud> {
    if p.degree() < 2 {
        return Err(Error::DegreeTooSmall(p.degree()));
    }
    let points = (0..count)
        .into_par_iter()
        .map(|i| brolin_point(p, burn_in, &mut coordinate_stream(seed, i, 0)).map(|z| Point(vec![z])))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCloud::uniform(points, Provenance::Brolin1d))
}

/// Independent `nu`-fold products of Brolin samples. Coordinate 0 of each
/// sample coincides with the matching [`sample_mu_p`] draw.
pub fn sample_mu_p_nu(p: &PolySpec, nu: usize, count: usize, burn_in: usize, seed: u64) -> Result<MeasureCloud> {
    if p.degree() < 2 {
        return Err(Error::DegreeTooSmall(p.degree()));
    }
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            (0..nu)
                .map(|t| brolin_point(p, burn_in, &mut coordinate_stream(seed, i, t)))
                .collect::<Result<Vec<_>>>()
                .map(Point)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCloud::uniform(points, Provenance::Product))
}

/// Applies the graph map to every sample of a `nu`-dimensional cloud.
pub fn pushforward_graph(cloud: &MeasureCloud, p: &PolySpec, k: usize, nu: usize) -> Result<MeasureCloud> {
    let points = cloud
        .points
        .iter()
        .map(|w| graph_phi(p, k, nu, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCloud {
        points,
        weights: cloud.weights.clone(),
        provenance: Provenance::GraphPushforward,
    })
}

/// Largest distance from a point of `from` to its nearest point of `to`.
pub fn directed_hausdorff(from: &[Point], to: &[Point]) -> f64 {
    from.par_iter()
        .map(|x| to.iter().map(|y| x.dist2(y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance in the Euclidean metric of `C^k`.
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyResult("hausdorff distance of an empty cloud".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// How a residue class of the orbit sequence is seeded in the shadowing
/// solve: on the Julia set of `p` (a Brolin chain), or on an attracting
/// cycle of `p` given by its points in orbit order.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSeed {
    Julia,
    Cycle(Vec<Complex64>),
}

/// An orbit of `S_a` is a scalar sequence with
/// `x_{j+nu} = p(x_j) + a x_{j+nu-k}`; the point is `(x_0, ..., x_{k-1})`.
/// Residue classes mod `nu` decouple at `a = 0`. Starting from the `a = 0`
/// sequence the solve relaxes Julia classes through inverse branches (from
/// the future down) and cycle classes through `p` (from the past up), both
/// of which contract.
fn shadow_point(
    s: &ShiftSpec,
    chains: &[ChainSeed],
    burn_in: usize,
    seed: u64,
    i: usize,
) -> Result<Point> {
    let (k, nu) = (s.k, s.nu as i64);
    let lo = -((burn_in * s.k) as i64);
    let hi = (k as i64 - 1) + (burn_in as i64) * nu;
    let len = (hi - lo + 1) as usize;
    let at = |j: i64| (j - lo) as usize;
    let mut x = vec![ZERO; len];
    for (t, chain) in chains.iter().enumerate() {
        let t_i = t as i64;
        let mut past = coordinate_stream(seed ^ PAST_STREAM, i, t);
        match chain {
            ChainSeed::Julia => {
                let w = brolin_point(&s.p, burn_in, &mut coordinate_stream(seed, i, t))?;
                x[at(t_i)] = w;
                let mut j = t_i + nu;
                while j <= hi {
                    x[at(j)] = s.p.eval(x[at(j - nu)]);
                    j += nu;
                }
                let mut j = t_i - nu;
                while j >= lo {
                    let roots = preimages(&s.p, x[at(j + nu)])?;
                    x[at(j)] = roots[past.gen_range(0..roots.len())];
                    j -= nu;
                }
            }
            ChainSeed::Cycle(cycle) => {
                if cycle.is_empty() {
                    return Err(Error::InvalidParameter("empty attracting cycle".into()));
                }
                let q = cycle.len() as i64;
                let phase = past.gen_range(0..q);
                let mut j = t_i - nu * ((t_i - lo) / nu);
                while j <= hi {
                    let m = (j - t_i) / nu;
                    x[at(j)] = cycle[(phase + m).rem_euclid(q) as usize];
                    j += nu;
                }
            }
        }
    }
    if s.a != ZERO {
        let kk = k as i64;
        let julia = |j: i64| matches!(chains[j.rem_euclid(nu) as usize], ChainSeed::Julia);
        for _ in 0..SHADOW_SWEEPS {
            let mut change: f64 = 0.0;
            let mut j = hi - nu;
            while j >= lo {
                if julia(j) && j + nu - kk >= lo {
                    let target = x[at(j + nu)] - s.a * x[at(j + nu - kk)];
                    let new = nearest_preimage(&s.p, target, x[at(j)])?;
                    change = change.max((new - x[at(j)]).norm());
                    x[at(j)] = new;
                }
                j -= 1;
            }
            for j in lo + kk..=hi {
                if !julia(j) {
                    let new = s.p.eval(x[at(j - nu)]) + s.a * x[at(j - kk)];
                    change = change.max((new - x[at(j)]).norm());
                    x[at(j)] = new;
                }
            }
            if change < SHADOW_TOL {
                break;
            }
        }
    }
    let z = Point(x[at(0)..at(k as i64)].to_vec());
    if !z.is_finite() {
        return Err(Error::Escaped { step: 0 });
    }
    Ok(z)
}

/// Points of bounded bi-infinite orbits of `S_a` shadowing the `a = 0`
/// sequences seeded by `chains` (one entry per residue class mod `nu`).
pub fn sample_shadow(
    s: &ShiftSpec,
    chains: &[ChainSeed],
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<MeasureCloud> {
    if chains.len() != s.nu {
        return Err(Error::DimensionMismatch {
            expected: s.nu,
            got: chains.len(),
        });
    }
    let points = (0..count)
        .into_par_iter()
        .map(|i| shadow_point(s, chains, burn_in, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCloud::uniform(points, Provenance::Shadowing))
}

/// Samples of `supp mu_a` near the image of the Julia torus. With the same
/// seed and `a = 0` this reproduces
/// `pushforward_graph(sample_mu_p_nu(..))` exactly.
pub fn sample_mu_a(s: &ShiftSpec, count: usize, burn_in: usize, seed: u64) -> Result<MeasureCloud> {
    sample_shadow(s, &vec![ChainSeed::Julia; s.nu], count, burn_in, seed)
}

/// Quasi-random search for points of `V_R` with `max(G^+, G^-) < eps` at
/// truncation `n`. Starts are graph points over a Halton grid of the
/// parameter polydisc (off the graph `G^-` is of order `log(1/|a|)`), each
/// refined by a compass search on `max(G^+, G^-)`.
pub fn approximate_supp_mu_a(s: &ShiftSpec, r: f64, grid: usize, eps: f64, n: usize) -> Result<MeasureCloud> {
    if s.a.norm() == 0.0 {
        return Err(Error::NonInvertible(0.0));
    }
    let (k, nu) = (s.k, s.nu);
    let objective = |z: &Point| -> f64 {
        let gp = green_plus(s, z, n).map_or(f64::INFINITY, |g| g.value);
        let gm = green_minus(s, z, n).map_or(f64::INFINITY, |g| g.value);
        gp.max(gm)
    };
    let found: Vec<Option<Point>> = (0..grid as u64)
        .into_par_iter()
        .map(|idx| {
            let h = halton(idx, 2 * nu);
            let w: Vec<Complex64> = (0..nu)
                .map(|j| Complex64::from_polar(r * h[2 * j].sqrt(), TAU * h[2 * j + 1]))
                .collect();
            let z = graph_phi(&s.p, k, nu, &w).ok()?;
            if z.norm_inf() > r {
                return None;
            }
            let (z, value) = compass_search(z, &objective, eps);
            (value < eps && z.norm_inf() <= r).then_some(z)
        })
        .collect();
    let points: Vec<Point> = found.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no point of {grid} with max(G+, G-) < {eps}"
        )));
    }
    Ok(MeasureCloud::uniform(points, Provenance::GreenMinimizer))
}

/// Derivative-free descent along the real and imaginary coordinate axes,
/// halving the step on failure. Stops once the value drops below `target`.
fn compass_search(mut z: Point, f: &dyn Fn(&Point) -> f64, target: f64) -> (Point, f64) {
    let mut value = f(&z);
    let mut step = 0.05;
    let mut evals = 0;
    while value >= target && step > 1e-4 && evals < 400 {
        let mut improved = false;
        for j in 0..z.len() {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                for sign in [1.0, -1.0] {
                    let mut y = z.clone();
                    y[j] += dir * (sign * step);
                    let v = f(&y);
                    evals += 1;
                    if v < value {
                        z = y;
                        value = v;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (z, value)
}

/// Whether the Lyapunov integrand is `log ||D||` (default) or `||D||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    #[default]
    LogNorm,
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub n: usize,
    pub samples: usize,
    pub dropped: usize,
    pub stderr: f64,
}

fn summarize(values: Vec<Option<f64>>, n: usize) -> Result<LyapunovEstimate> {
    let total = values.len();
    if total == 0 {
        return Err(Error::EmptyResult("lyapunov estimate over an empty cloud".into()));
    }
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let dropped = total - kept.len();
    if 2 * dropped > total {
        return Err(Error::TooManyDrops { dropped, total });
    }
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let var = if kept.len() > 1 {
        kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        value: mean,
        n,
        samples: kept.len(),
        dropped,
        stderr: (var / m).sqrt(),
    })
}

/// Product map `p_nu`: `D p_nu^n` is diagonal, so the 2-norm is
/// `max_i |(p^n)'(w_i)|`.
pub fn lyapunov_product(p: &PolySpec, cloud: &MeasureCloud, n: usize) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("lyapunov needs n >= 1".into()));
    }
    let values = cloud
        .points
        .par_iter()
        .map(|w| {
            let best = w
                .iter()
                .map(|&x| {
                    let (v, dv) = p.iterate_with_deriv(x, n);
                    if v.norm() < 1e30 && dv.re.is_finite() && dv.im.is_finite() {
                        Some(dv.norm().ln())
                    } else {
                        None
                    }
                })
                .collect::<Option<Vec<f64>>>()?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            best.is_finite().then_some(best / n as f64)
        })
        .collect();
    summarize(values, n)
}

/// Operator 2-norm by power iteration on `M^* M` from a fixed start vector.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    let k = m.ncols();
    let mut rng = stream(POWER_STREAM, 0);
    let mut v = nalgebra::DVector::from_fn(k, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let mh = m.adjoint();
    for _ in 0..POWER_STEPS {
        let w = &mh * (m * &v);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v = w / Complex64::new(norm, 0.0);
    }
    (m * v).norm()
}

/// `(1/n) * mean over the cloud of log ||D(S_a^eta)^n||`.
pub fn lyapunov_shift(s: &ShiftSpec, cloud: &MeasureCloud, n: usize, integrand: Integrand) -> Result<LyapunovEstimate> {
    if n == 0 {
        return Err(Error::InvalidParameter("lyapunov needs n >= 1".into()));
    }
    let steps = s.eta() * n;
    let values = cloud
        .points
        .par_iter()
        .map(|z| {
            let j = jacobian(s, z, steps).ok()?;
            let norm = operator_norm(&j);
            if !(norm.is_finite() && norm > 0.0) {
                return None;
            }
            Some(match integrand {
                Integrand::LogNorm => norm.ln() / n as f64,
                Integrand::Norm => norm / n as f64,
            })
        })
        .collect();
    summarize(values, n)
}

/// One row of the degeneration report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub hausdorff: f64,
    #[serde(rename = "sup_Ha_minus_F")]
    pub sup_ha_minus_f: f64,
    pub lyapunov: f64,
    pub lyapunov_stderr: f64,
    pub samples: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub count: usize,
    pub burn_in: usize,
    pub green_level: usize,
    pub lyapunov_n: usize,
    pub seed: u64,
    pub test_set: Vec<Point>,
}

impl SweepConfig {
    pub fn new(p: &PolySpec, k: usize, nu: usize) -> Self {
        Self {
            count: 2000,
            burn_in: DEFAULT_BURN_IN,
            green_level: 30,
            lyapunov_n: 10,
            seed: 0,
            test_set: default_test_set(p, k, nu, 32),
        }
    }
}

/// Fixed off-graph compact set: quasi-random points of the polydisc of
/// radius 1.5 whose graph residual is at least 0.5.
pub fn default_test_set(p: &PolySpec, k: usize, nu: usize, size: usize) -> Vec<Point> {
    let probe = ShiftSpec {
        k,
        nu,
        a: ZERO,
        p: p.clone(),
    };
    (0u64..)
        .map(|i| {
            let h = halton(i, 2 * k);
            Point(
                (0..k)
                    .map(|j| Complex64::from_polar(1.5 * h[2 * j].sqrt(), TAU * h[2 * j + 1]))
                    .collect(),
            )
        })
        .filter(|z| graph_residual(&probe, z) >= 0.5)
        .take(size)
        .collect()
}

/// `sup_K |H_a - F|` over a test set.
pub fn sup_h_minus_f(s: &ShiftSpec, test_set: &[Point], level: usize) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for z in test_set {
        let f = f_limit(s, z)?
            .finite()
            .ok_or_else(|| Error::InvalidParameter("test point lies on the graph".into()))?;
        sup = sup.max((h_a(s, z, level)? - f).abs());
    }
    Ok(sup)
}

/// Per parameter: support distance between the `mu_a` cloud and the
/// pushed-forward product cloud, `sup |H_a - F|` and the Lyapunov estimate.
pub fn degeneration_sweep(
    p: &PolySpec,
    k: usize,
    nu: usize,
    a_list: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if a_list.is_empty() {
        return Err(Error::InvalidParameter("empty parameter list".into()));
    }
    if a_list.iter().any(|&a| !(a > 0.0 && a < 1.0)) || a_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "parameters must be strictly decreasing in (0, 1)".into(),
        ));
    }
    let base = ShiftSpec::new(k, nu, ONE, p.clone())?;
    let product = sample_mu_p_nu(p, nu, config.count, config.burn_in, config.seed)?;
    let reference = pushforward_graph(&product, p, k, nu)?;
    a_list
        .iter()
        .map(|&a| {
            let s = base.with_a(Complex64::new(a, 0.0));
            let cloud = sample_mu_a(&s, config.count, config.burn_in, config.seed)?;
            let lyap = lyapunov_shift(&s, &cloud, config.lyapunov_n, Integrand::LogNorm)?;
            Ok(SweepRow {
                a,
                hausdorff: hausdorff(&cloud.points, &reference.points)?,
                sup_ha_minus_f: sup_h_minus_f(&s, &config.test_set, config.green_level)?,
                lyapunov: lyap.value,
                lyapunov_stderr: lyap.stderr,
                samples: lyap.samples,
                n: lyap.n,
            })
        })
        .collect()
}
