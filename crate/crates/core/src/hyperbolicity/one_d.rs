//! One-variable hyperbolicity: critical orbit fates, attracting cycles and
//! uniform divergence under small perturbations.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{sample_mu_p, MeasureCloud, DEFAULT_BURN_IN};
use crate::potential::escape_radius_1d;
use crate::qmc::stream;
use crate::roots::roots;
use crate::types::{PolySpec, ONE};

const MAX_PERIOD: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractingCycle {
    pub period: usize,
    pub representative: Complex64,
    pub multiplier: Complex64,
    pub points: Vec<Complex64>,
}

impl AttractingCycle {
    fn contains(&self, z: Complex64, tol: f64) -> bool {
        self.points.iter().any(|c| (c - z).norm() <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalFate {
    ConvergedToCycle(usize),
    Escaped { step: usize },
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityVerdict1D {
    pub is_hyperbolic: bool,
    pub connected_julia: bool,
    pub critical_points: Vec<Complex64>,
    pub critical_orbit_fates: Vec<CriticalFate>,
    pub attracting_cycles: Vec<AttractingCycle>,
}

/// Follows every critical orbit for `horizon` steps, then looks for a
/// near-return within `tol` to detect the limiting cycle.
pub fn classify_hyperbolic(p: &PolySpec, horizon: usize, tol: f64) -> Result<HyperbolicityVerdict1D> {
    if p.degree() < 2 {
        return Err(Error::DegreeTooSmall(p.degree()));
    }
    let critical_points = roots(&p.derivative())?;
    let escape = escape_radius_1d(p);
    let mut cycles: Vec<AttractingCycle> = Vec::new();
    let mut fates = Vec::with_capacity(critical_points.len());
    for &c in &critical_points {
        let mut z = c;
        let mut fate = None;
        for step in 0..horizon {
            if z.norm() > escape {
                fate = Some(CriticalFate::Escaped { step });
                break;
            }
            z = p.eval(z);
        }
        let fate = match fate {
            Some(f) => f,
            None => match detect_cycle(p, z, tol) {
                Some(cycle) if cycle.multiplier.norm() < 1.0 => {
                    let idx = match cycles.iter().position(|k| k.contains(z, 10.0 * tol)) {
                        Some(i) => i,
                        None => {
                            cycles.push(cycle);
                            cycles.len() - 1
                        }
                    };
                    CriticalFate::ConvergedToCycle(idx)
                }
                _ => CriticalFate::Undetermined,
            },
        };
        fates.push(fate);
    }
    let is_hyperbolic = fates.iter().all(|f| !matches!(f, CriticalFate::Undetermined));
    let connected_julia = !fates.iter().any(|f| matches!(f, CriticalFate::Escaped { .. }));
    Ok(HyperbolicityVerdict1D {
        is_hyperbolic,
        connected_julia,
        critical_points,
        critical_orbit_fates: fates,
        attracting_cycles: cycles,
    })
}

fn detect_cycle(p: &PolySpec, z: Complex64, tol: f64) -> Option<AttractingCycle> {
    let mut w = z;
    let mut points = vec![z];
    for q in 1..=MAX_PERIOD {
        w = p.eval(w);
        if (w - z).norm() <= tol {
            let multiplier = points.iter().fold(ONE, |m, &x| m * p.eval_deriv(x));
            return Some(AttractingCycle {
                period: q,
                representative: z,
                multiplier,
                points,
            });
        }
        points.push(w);
    }
    None
}

/// Julia set samples (the Brolin cloud).
pub fn julia_cloud_1d(p: &PolySpec, count: usize, seed: u64) -> Result<MeasureCloud> {
    sample_mu_p(p, count, DEFAULT_BURN_IN, seed)
}

/// A perturbed orbit that failed to reach the target radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub start: Complex64,
    pub sequence: usize,
    pub final_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceOutcome {
    pub passed: bool,
    pub target_radius: f64,
    /// Largest number of steps any orbit needed.
    pub worst_steps: usize,
    pub witness: Option<DivergenceWitness>,
}

/// Radius the perturbed orbits must exceed: ten times the 1-D escape bound.
pub fn divergence_target(p: &PolySpec) -> f64 {
    10.0 * p.coefficient_bound()
}

fn steps_to_escape(p: &PolySpec, z0: Complex64, target: f64, horizon: usize, mut w: impl FnMut(Complex64) -> Complex64) -> Option<usize> {
    let mut z = z0;
    for n in 0..=horizon {
        if z.norm() > target {
            return Some(n);
        }
        z = p.eval(z) + w(z);
    }
    None
}

/// Every start escapes past `10 R_p` within `horizon` under every one of
/// `sequences` random perturbation sequences drawn from `D(0, eta)`.
pub fn eta_divergence_test(
    p: &PolySpec,
    eta: f64,
    starts: &[Complex64],
    sequences: usize,
    horizon: usize,
    seed: u64,
) -> DivergenceOutcome {
    let target = divergence_target(p);
    let results: Vec<std::result::Result<usize, DivergenceWitness>> = (0..starts.len() * sequences)
        .into_par_iter()
        .map(|idx| {
            let (si, j) = (idx / sequences, idx % sequences);
            let mut rng = stream(seed, idx as u64);
            let z0 = starts[si];
            let mut last = z0;
            let out = steps_to_escape(p, z0, target, horizon, |z| {
                last = z;
                Complex64::from_polar(eta * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>())
            });
            out.ok_or(DivergenceWitness {
                start: z0,
                sequence: j,
                final_modulus: last.norm(),
            })
        })
        .collect();
    let mut worst_steps = 0;
    let mut witness = None;
    for r in results {
        match r {
            Ok(n) => worst_steps = worst_steps.max(n),
            Err(w) => {
                witness.get_or_insert(w);
            }
        }
    }
    DivergenceOutcome {
        passed: witness.is_none(),
        target_radius: target,
        worst_steps,
        witness,
    }
}

/// The greedy adversary pushes each step straight back toward the origin.
pub fn adversarial_escapes(p: &PolySpec, eta: f64, z0: Complex64, horizon: usize) -> bool {
    let target = divergence_target(p);
    let mut z = z0;
    for _ in 0..=horizon {
        if z.norm() > target {
            return true;
        }
        let pz = p.eval(z);
        let pull = if pz.norm() > 0.0 { -pz / pz.norm() * eta } else { Complex64::new(0.0, 0.0) };
        z = pz + pull;
    }
    false
}

/// Largest `eta` (to within `2^-iters` of `eta_max`) for which the greedy
/// adversary fails to stop escape from every start.
pub fn divergence_threshold(p: &PolySpec, starts: &[Complex64], horizon: usize, eta_max: f64, iters: usize) -> f64 {
    let all_escape = |eta: f64| starts.par_iter().all(|&z| adversarial_escapes(p, eta, z, horizon));
    if all_escape(eta_max) {
        return eta_max;
    }
    let (mut lo, mut hi) = (0.0, eta_max);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if all_escape(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
