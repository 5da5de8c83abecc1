//! Grid cover of the plane: a collar `U` around the sampled Julia set, the
//! bounded complementary components `U_c` and the unbounded one `U_inf`.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::MeasureCloud;
use crate::types::PolySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellLabel {
    Collar,
    Bounded(usize),
    Unbounded,
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl PlaneBox {
    pub fn square(half: f64) -> Self {
        Self {
            x0: -half,
            x1: half,
            y0: -half,
            y1: half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneCover {
    pub bbox: PlaneBox,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub eps: f64,
    pub labels: Vec<CellLabel>,
    pub components: usize,
    /// Fraction of `U_c` cell centres whose `p`-image lies in `U_c`, for
    /// the plain `eps`-collar and after pruning.
    pub invariance_raw: f64,
    pub invariance: f64,
    pub pruned_cells: usize,
    /// Centres of collar cells adjacent to each bounded component.
    boundary: Vec<Vec<Complex64>>,
}

impl PlaneCover {
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.bbox.x0) / self.h;
        let fy = (z.im - self.bbox.y0) / self.h;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some((ix, iy))
    }

    pub fn center(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(
            self.bbox.x0 + (ix as f64 + 0.5) * self.h,
            self.bbox.y0 + (iy as f64 + 0.5) * self.h,
        )
    }

    pub fn label_at(&self, ix: usize, iy: usize) -> CellLabel {
        self.labels[iy * self.nx + ix]
    }

    /// Label of the cell containing `z`; points outside the box are in `U_inf`.
    pub fn lookup(&self, z: Complex64) -> CellLabel {
        match self.cell_of(z) {
            Some((ix, iy)) => self.label_at(ix, iy),
            None => CellLabel::Unbounded,
        }
    }

    /// Distance from `z` to the collar cells bounding its component.
    pub fn boundary_distance(&self, z: Complex64) -> Result<f64> {
        match self.lookup(z) {
            CellLabel::Bounded(c) => Ok(self.boundary[c]
                .iter()
                .map(|b| (b - z).norm())
                .fold(f64::INFINITY, f64::min)),
            _ => Err(Error::OutsideCover(z)),
        }
    }

    /// Whether the cell of `z` lies within `cells` cells of a non-collar cell.
    pub fn near_collar_edge(&self, z: Complex64, cells: usize) -> bool {
        let Some((ix, iy)) = self.cell_of(z) else {
            return true;
        };
        let r = cells as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                    return true;
                }
                if self.label_at(x as usize, y as usize) != CellLabel::Collar {
                    return true;
                }
            }
        }
        false
    }

    /// Whether a cell within `cells` of the one holding `z` has a different
    /// label class (collar against complement).
    pub fn near_label_change(&self, z: Complex64, cells: usize) -> bool {
        let Some((ix, iy)) = self.cell_of(z) else {
            return true;
        };
        let collar = self.label_at(ix, iy) == CellLabel::Collar;
        let r = cells as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                    return true;
                }
                if (self.label_at(x as usize, y as usize) == CellLabel::Collar) != collar {
                    return true;
                }
            }
        }
        false
    }

    /// Centres of all cells with the given label class.
    pub fn cells_where(&self, pred: impl Fn(CellLabel) -> bool) -> Vec<Complex64> {
        let mut out = Vec::new();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if pred(self.label_at(ix, iy)) {
                    out.push(self.center(ix, iy));
                }
            }
        }
        out
    }
}

/// Stamps the `eps`-collar of the cloud, flood-fills the complement from the
/// box border to get `U_inf` and numbers the remaining components.
pub fn build_plane_cover(p: &PolySpec, cloud: &MeasureCloud, eps: f64, bbox: PlaneBox, h: f64) -> Result<PlaneCover> {
    if !(eps > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter("cover needs eps > 0 and h > 0".into()));
    }
    if cloud.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: cloud.dim(),
        });
    }
    let nx = ((bbox.x1 - bbox.x0) / h).ceil() as usize;
    let ny = ((bbox.y1 - bbox.y0) / h).ceil() as usize;
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidParameter("cover resolution too coarse".into()));
    }
    let mut cover = PlaneCover {
        bbox,
        nx,
        ny,
        h,
        eps,
        labels: vec![CellLabel::Unbounded; nx * ny],
        components: 0,
        invariance_raw: 1.0,
        invariance: 1.0,
        pruned_cells: 0,
        boundary: Vec::new(),
    };
    let mut collar = vec![false; nx * ny];
    let reach = (eps / h).ceil() as i64 + 1;
    for pt in &cloud.points {
        let z = pt[0];
        let cx = ((z.re - bbox.x0) / h).floor() as i64;
        let cy = ((z.im - bbox.y0) / h).floor() as i64;
        for y in (cy - reach).max(0)..=(cy + reach).min(ny as i64 - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(nx as i64 - 1) {
                if (cover.center(x as usize, y as usize) - z).norm() <= eps {
                    collar[y as usize * nx + x as usize] = true;
                }
            }
        }
    }
    let (labels, boundary, components) = label_components(&cover, &collar);
    cover.labels = labels;
    cover.boundary = boundary;
    cover.components = components;
    cover.invariance_raw = bounded_invariance(&cover, p);
    // A Euclidean collar is not p-invariant where |p'| < 1 near J: move
    // bounded cells whose image leaves U_c into the collar until it is.
    let mut pruned = 0;
    loop {
        let mut changed = false;
        for i in 0..nx * ny {
            if matches!(cover.labels[i], CellLabel::Bounded(_))
                && !matches!(cover.lookup(p.eval(cover.center(i % nx, i / nx))), CellLabel::Bounded(_))
            {
                collar[i] = true;
                cover.labels[i] = CellLabel::Collar;
                changed = true;
                pruned += 1;
            }
        }
        if !changed {
            break;
        }
    }
    let (labels, boundary, components) = label_components(&cover, &collar);
    cover.labels = labels;
    cover.boundary = boundary;
    cover.components = components;
    cover.pruned_cells = pruned;
    cover.invariance = bounded_invariance(&cover, p);
    if components == 0 {
        return Err(Error::CoverInconsistent("no bounded complementary component survives".into()));
    }
    Ok(cover)
}

fn bounded_invariance(cover: &PlaneCover, p: &PolySpec) -> f64 {
    let bounded = cover.cells_where(|l| matches!(l, CellLabel::Bounded(_)));
    if bounded.is_empty() {
        return 1.0;
    }
    let inside = bounded
        .iter()
        .filter(|&&z| matches!(cover.lookup(p.eval(z)), CellLabel::Bounded(_)))
        .count();
    inside as f64 / bounded.len() as f64
}

/// Flood fill from the border for `U_inf`, then numbered components.
fn label_components(cover: &PlaneCover, collar: &[bool]) -> (Vec<CellLabel>, Vec<Vec<Complex64>>, usize) {
    let (nx, ny) = (cover.nx, cover.ny);
    let neighbours = |i: usize| {
        let (x, y) = (i % nx, i / nx);
        let mut v = Vec::with_capacity(4);
        if x > 0 {
            v.push(i - 1);
        }
        if x + 1 < nx {
            v.push(i + 1);
        }
        if y > 0 {
            v.push(i - nx);
        }
        if y + 1 < ny {
            v.push(i + nx);
        }
        v
    };
    let mut labels = vec![CellLabel::Unbounded; nx * ny];
    let mut seen = collar.to_vec();
    let mut queue = VecDeque::new();
    for i in 0..nx * ny {
        let (x, y) = (i % nx, i / nx);
        if (x == 0 || y == 0 || x == nx - 1 || y == ny - 1) && !seen[i] {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbours(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    for i in 0..nx * ny {
        if collar[i] {
            labels[i] = CellLabel::Collar;
        }
    }
    let mut boundary = Vec::new();
    let mut components = 0;
    for start in 0..nx * ny {
        if seen[start] {
            continue;
        }
        let mut edge = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            labels[i] = CellLabel::Bounded(components);
            for j in neighbours(i) {
                if collar[j] {
                    edge.push(j);
                } else if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        edge.sort_unstable();
        edge.dedup();
        boundary.push(edge.into_iter().map(|j| cover.center(j % nx, j / nx)).collect());
        components += 1;
    }
    (labels, boundary, components)
}
