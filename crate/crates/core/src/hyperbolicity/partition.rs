//! Labels of the Julia-set partition: one symbol per tail coordinate, read
//! off the plane cover, and the invariant sets `J_m` built from them.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::cover::{CellLabel, PlaneCover};
use super::one_d::AttractingCycle;
use crate::dynamics::{block_iterate, Direction};
use crate::error::{Error, Result};
use crate::measures::{sample_shadow, ChainSeed, MeasureCloud};
use crate::types::{Point, ShiftSpec};

/// Where a tail coordinate sits: the Julia collar `U`, a bounded
/// complementary component `U_c`, or the unbounded one `U_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Zero,
    C,
    Inf,
}

impl From<CellLabel> for Symbol {
    fn from(l: CellLabel) -> Self {
        match l {
            CellLabel::Collar => Symbol::Zero,
            CellLabel::Bounded(_) => Symbol::C,
            CellLabel::Unbounded => Symbol::Inf,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Zero => "0",
            Symbol::C => "c",
            Symbol::Inf => "inf",
        })
    }
}

/// One symbol per tail coordinate `z_{k-nu+1}, ..., z_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionLabel(pub Vec<Symbol>);

impl PartitionLabel {
    pub fn of(cover: &PlaneCover, s: &ShiftSpec, z: &Point) -> Self {
        Self(z[s.tail_start()..].iter().map(|&w| cover.lookup(w).into()).collect())
    }

    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|&&x| x == Symbol::Zero).count()
    }

    /// Labels outside the region containing `J_a`: any `inf`, or all `c`.
    pub fn is_violation(&self) -> bool {
        self.0.contains(&Symbol::Inf) || self.0.iter().all(|&x| x == Symbol::C)
    }

    /// All labels over `{0, c}` except the all-`c` one, in lexicographic order.
    pub fn admissible(nu: usize) -> Vec<Self> {
        (0..(1usize << nu) - 1)
            .map(|bits| {
                Self((0..nu).map(|t| if bits >> (nu - 1 - t) & 1 == 1 { Symbol::C } else { Symbol::Zero }).collect())
            })
            .collect()
    }
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for PartitionLabel {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

/// Chain seeds realising `label` in the shadowing sampler: tail slot `t`
/// drives residue class `(k - nu + t) mod nu`, seeded on the Julia set for
/// symbol `0` and on `cycle` for symbol `c`.
pub fn chains_for(s: &ShiftSpec, label: &PartitionLabel, cycle: Option<&AttractingCycle>) -> Result<Vec<ChainSeed>> {
    if label.0.len() != s.nu || label.is_violation() {
        return Err(Error::InvalidParameter(format!("label {label} is not admissible")));
    }
    let mut chains = vec![ChainSeed::Julia; s.nu];
    for (t, sym) in label.0.iter().enumerate() {
        if *sym == Symbol::C {
            let cyc = cycle.ok_or_else(|| Error::InvalidParameter(format!("label {label} needs an attracting cycle")))?;
            chains[(s.tail_start() + t) % s.nu] = ChainSeed::Cycle(cyc.points.clone());
        }
    }
    Ok(chains)
}

/// Points of `J_a` for every admissible label, from bounded orbits that
/// shadow the `a = 0` sequences. Labels with a `c` symbol use the first
/// attracting cycle and are skipped when `p` has none.
pub fn julia_candidates(
    s: &ShiftSpec,
    cycles: &[AttractingCycle],
    per_label: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<(PartitionLabel, MeasureCloud)>> {
    let mut out = Vec::new();
    for (idx, label) in PartitionLabel::admissible(s.nu).into_iter().enumerate() {
        if label.0.contains(&Symbol::C) && cycles.is_empty() {
            continue;
        }
        let chains = chains_for(s, &label, cycles.first())?;
        let cloud = sample_shadow(s, &chains, per_label, burn_in, seed.wrapping_add(LABEL_SEED_STEP.wrapping_mul(idx as u64)))?;
        out.push((label, cloud));
    }
    Ok(out)
}

const LABEL_SEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

/// Forward `nu`-blocks followed when grouping and clustering. `J` repels,
/// so rounding errors roughly double per block; 16 keeps them far below the
/// collar width.
pub const ORBIT_BLOCKS: usize = 16;
/// Trailing orbit points used to approximate the limit set.
pub const TAIL_POINTS: usize = 8;
/// Clustering radius for limit sets.
pub const CLUSTER_RADIUS: f64 = 0.05;
/// Violation fraction above which the region check counts as failed.
pub const MAX_VIOLATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPoint {
    pub point: Point,
    pub label: PartitionLabel,
    pub violation: bool,
    /// Fewest `0` symbols over labels met along the forward block orbit;
    /// `None` for violations and escaping orbits.
    pub group: Option<usize>,
    /// Clusters of the orbit tail, a stand-in for the size of `L(z)`.
    pub limit_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub samples: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    pub regions_ok: bool,
    /// Fraction of grouped points whose `nu`-block image has the same group.
    pub invariance: f64,
    pub label_counts: BTreeMap<String, usize>,
    pub group_counts: BTreeMap<usize, usize>,
    pub escaped: usize,
    pub mean_limit_clusters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub points: Vec<LabeledPoint>,
    pub report: PartitionReport,
}

fn greedy_clusters(pts: &[Point], r: f64) -> usize {
    let mut centres: Vec<&Point> = Vec::new();
    for p in pts {
        if !centres.iter().any(|c| c.dist2(p) <= r) {
            centres.push(p);
        }
    }
    centres.len()
}

/// Orbit of `nu`-blocks, stopping early on escape.
fn block_path(s: &ShiftSpec, z: &Point, blocks: usize) -> (Vec<Point>, bool) {
    let mut path = vec![z.clone()];
    for _ in 0..blocks {
        match block_iterate(s, path.last().unwrap(), s.nu, Direction::Forward) {
            Ok(w) => path.push(w),
            Err(_) => return (path, true),
        }
    }
    (path, false)
}

fn group_of(cover: &PlaneCover, s: &ShiftSpec, path: &[Point]) -> Option<usize> {
    let mut m = usize::MAX;
    for w in path {
        let l = PartitionLabel::of(cover, s, w);
        if l.is_violation() {
            return None;
        }
        m = m.min(l.zeros());
    }
    Some(m)
}

/// Labels each candidate by its tail coordinates, groups labelled points
/// into `J_m` by the fewest `0` symbols along the forward block orbit and
/// approximates `L(z)` by clustering the orbit tail.
pub fn partition_julia(s: &ShiftSpec, cover: &PlaneCover, candidates: &MeasureCloud) -> Result<Partition> {
    if candidates.is_empty() {
        return Err(Error::EmptyResult("no Julia candidates to partition".into()));
    }
    let rows: Vec<(LabeledPoint, Option<usize>, bool)> = candidates
        .points
        .par_iter()
        .map(|z| {
            let label = PartitionLabel::of(cover, s, z);
            let violation = label.is_violation();
            let (path, escaped) = block_path(s, z, ORBIT_BLOCKS);
            let group = if violation || escaped { None } else { group_of(cover, s, &path) };
            let image_group = if escaped { None } else { group_of(cover, s, &path[1..]) };
            let tail = &path[path.len().saturating_sub(TAIL_POINTS)..];
            let lp = LabeledPoint {
                point: z.clone(),
                label,
                violation,
                group,
                limit_clusters: greedy_clusters(tail, CLUSTER_RADIUS),
            };
            (lp, image_group, escaped)
        })
        .collect();
    let n = rows.len();
    let violations = rows.iter().filter(|r| r.0.violation).count();
    let escaped = rows.iter().filter(|r| r.2).count();
    let grouped: Vec<_> = rows.iter().filter(|r| r.0.group.is_some()).collect();
    let kept = grouped.iter().filter(|r| r.1 == r.0.group).count();
    let mut label_counts = BTreeMap::new();
    let mut group_counts = BTreeMap::new();
    for (lp, _, _) in &rows {
        *label_counts.entry(lp.label.to_string()).or_insert(0) += 1;
        if let Some(m) = lp.group {
            *group_counts.entry(m).or_insert(0) += 1;
        }
    }
    let violation_fraction = violations as f64 / n as f64;
    let report = PartitionReport {
        samples: n,
        violations,
        violation_fraction,
        regions_ok: violation_fraction <= MAX_VIOLATION_FRACTION,
        invariance: if grouped.is_empty() { 0.0 } else { kept as f64 / grouped.len() as f64 },
        label_counts,
        group_counts,
        escaped,
        mean_limit_clusters: rows.iter().map(|r| r.0.limit_clusters as f64).sum::<f64>() / n as f64,
    };
    Ok(Partition {
        points: rows.into_iter().map(|r| r.0).collect(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::cover::{build_plane_cover, PlaneBox};
    use crate::hyperbolicity::one_d::{classify_hyperbolic, julia_cloud_1d};
    use crate::measures::Provenance;
    use num_complex::Complex64;
    use crate::types::{c, PolySpec, ZERO};

    fn cover_for(p: &PolySpec) -> PlaneCover {
        let cloud = julia_cloud_1d(p, 20000, 1).unwrap();
        build_plane_cover(p, &cloud, 0.05, PlaneBox::square(2.0), 0.01).unwrap()
    }

    fn agreement(s: &ShiftSpec, cover: &PlaneCover, per: usize) -> Vec<(PartitionLabel, f64, Partition)> {
        let cycles = classify_hyperbolic(&s.p, 200, 1e-9).unwrap().attracting_cycles;
        julia_candidates(s, &cycles, per, 40, 11)
            .unwrap()
            .into_iter()
            .map(|(label, cloud)| {
                let part = partition_julia(s, cover, &cloud).unwrap();
                let hit = part.points.iter().filter(|p| p.label == label).count();
                (label, hit as f64 / per as f64, part)
            })
            .collect()
    }

    #[test]
    fn admissible_labels() {
        let names: Vec<String> = PartitionLabel::admissible(2).iter().map(|l| l.to_string()).collect();
        assert_eq!(names, ["(0,0)", "(0,c)", "(c,0)"]);
        assert_eq!(PartitionLabel::admissible(1)[0].to_string(), "(0)");
        assert!(PartitionLabel(vec![Symbol::C, Symbol::C]).is_violation());
        assert!(PartitionLabel(vec![Symbol::Zero, Symbol::Inf]).is_violation());
        assert_eq!(PartitionLabel(vec![Symbol::Zero, Symbol::C]).zeros(), 1);
    }

    #[test]
    fn z2_sets_at_zero() {
        let p = PolySpec::quadratic(ZERO);
        let s = ShiftSpec::new(3, 2, ZERO, p.clone()).unwrap();
        let cover = cover_for(&p);
        for (label, frac, part) in agreement(&s, &cover, 300) {
            assert!(frac >= 0.95, "{label}: {frac}");
            for lp in &part.points {
                let z = &lp.point;
                let on_circle = |w: Complex64| (w.norm() - 1.0).abs() < 1e-9;
                match label.to_string().as_str() {
                    "(0,c)" => assert!(z[0].norm() < 1e-12 && z[2].norm() < 1e-12 && on_circle(z[1])),
                    "(c,0)" => assert!(z[1].norm() < 1e-12 && on_circle(z[0]) && (z[2] - z[0] * z[0]).norm() < 1e-9),
                    _ => assert!(on_circle(z[0]) && on_circle(z[1]) && (z[2] - z[0] * z[0]).norm() < 1e-9),
                }
            }
            assert_eq!(part.report.group_counts.keys().copied().collect::<Vec<_>>(), vec![label.zeros()]);
        }
    }

    #[test]
    fn small_a_labels_and_invariance() {
        for c0 in [0.0, -1.0] {
            let p = PolySpec::from_real(&[c0, 0.0, 1.0]);
            let s = ShiftSpec::new(3, 2, c(1e-3, 0.0), p.clone()).unwrap();
            let cover = cover_for(&p);
            for (label, frac, part) in agreement(&s, &cover, 200) {
                assert!(frac >= 0.90, "{c0} {label}: {frac}");
                assert!(part.points.iter().all(|lp| !lp.label.0.contains(&Symbol::Inf)));
                assert!(part.report.regions_ok);
                assert!(part.report.invariance >= 0.99, "{}", part.report.invariance);
            }
        }
    }

    #[test]
    fn flags_violations() {
        let p = PolySpec::quadratic(ZERO);
        let s = ShiftSpec::new(3, 2, c(1e-3, 0.0), p.clone()).unwrap();
        let cover = cover_for(&p);
        let pts = vec![
            Point(vec![ZERO, ZERO, ZERO]),
            Point(vec![ZERO, c(1.9, 0.0), c(1.0, 0.0)]),
        ];
        let part = partition_julia(&s, &cover, &MeasureCloud::uniform(pts, Provenance::Shadowing)).unwrap();
        assert_eq!(part.report.violations, 2);
        assert!(!part.report.regions_ok);
        assert!(part.points.iter().all(|lp| lp.group.is_none()));
        let empty = MeasureCloud::uniform(vec![], Provenance::Shadowing);
        assert!(partition_julia(&s, &cover, &empty).is_err());
    }

    #[test]
    fn cycle_orbit_has_small_limit_set() {
        let p = PolySpec::from_real(&[-1.0, 0.0, 1.0]);
        let s = ShiftSpec::new(3, 1, ZERO, p.clone()).unwrap();
        assert_eq!(greedy_clusters(&block_path(&s, &Point(vec![ZERO, c(-1.0, 0.0), ZERO]), ORBIT_BLOCKS).0[8..], 0.05), 2);
    }
}
