use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Grid, Point};
use crate::error::{Error, Result};
use crate::linalg::{CsrBuilder, CsrMatrix};
use crate::math;
use crate::perturb::Perturbation;

/// A perturbation together with its requested center and the grid node it
/// was snapped to.
#[derive(Debug, Clone)]
pub struct PlacedWell {
    pub perturbation: Perturbation,
    pub center: Point,
    pub node: [usize; 3],
    pub snapped_center: Point,
    pub snap_distance: f64,
}

/// `-Δ_h + Σᵢ 𝓛ᵢ(· - Xᵢ)` on a Dirichlet grid, assembled once.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    matrix: CsrMatrix,
    wells: Vec<PlacedWell>,
    warnings: Vec<String>,
}

/// Assemble the second-order finite-difference Hamiltonian. Well centers are
/// snapped to the nearest node; supports must be pairwise disjoint and lie
/// inside the open box.
pub fn assemble_hamiltonian(grid: &Grid, wells: &[(Perturbation, Point)]) -> Result<DiscreteOperator> {
    let dim = grid.dim();
    let h = grid.h();
    let l = grid.half_width();
    let mut placed = Vec::with_capacity(wells.len());
    let mut warnings = Vec::new();
    for (i, (p, x)) in wells.iter().enumerate() {
        if x[dim..].iter().any(|&c| c != 0.0) {
            return Err(Error::Shape(format!("center of well {i} has components beyond dimension {dim}")));
        }
        let (node, snap) = grid.nearest_node(x).ok_or(Error::SupportOutsideBox(i))?;
        let mut snapped = [0.0; 3];
        for a in 0..dim {
            snapped[a] = grid.coord(node[a]);
            if math::abs(snapped[a]) + p.support_radius() >= l {
                return Err(Error::SupportOutsideBox(i));
            }
        }
        if snap > 1e-9 * h {
            warnings.push(format!("well {i} center snapped by {snap:e} to the nearest node"));
        }
        placed.push(PlacedWell {
            perturbation: p.clone(),
            center: *x,
            node,
            snapped_center: snapped,
            snap_distance: snap,
        });
    }
    for i in 0..placed.len() {
        for j in i + 1..placed.len() {
            let d = distance(&placed[i].snapped_center, &placed[j].snapped_center);
            if d < placed[i].perturbation.support_radius() + placed[j].perturbation.support_radius() {
                return Err(Error::OverlappingSupports(i, j));
            }
        }
    }
    let mut b = CsrBuilder::new(grid.len());
    let inv_h2 = 1.0 / (h * h);
    for idx in 0..grid.len() {
        let mi = grid.multi_index(idx);
        b.push(idx, idx, 2.0 * dim as f64 * inv_h2);
        for a in 0..dim {
            for s in [-1i64, 1] {
                let mut off = [0i64; 3];
                off[a] = s;
                if let Some(j) = grid.offset_index(&mi, &off) {
                    b.push(idx, j, -inv_h2);
                }
            }
        }
    }
    for (i, w) in placed.iter().enumerate() {
        let trip = w.perturbation.stencil(grid, &w.node).map_err(|e| match e {
            Error::SupportOutsideBox(_) => Error::SupportOutsideBox(i),
            other => other,
        })?;
        for (r, c, v) in trip {
            b.push(r, c, v);
        }
    }
    Ok(DiscreteOperator {
        grid: grid.clone(),
        matrix: b.build(),
        wells: placed,
        warnings,
    })
}

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    math::hypot3(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn wells(&self) -> &[PlacedWell] {
        &self.wells
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out = H u`
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.matrix.apply(u, out);
    }

    /// Distance from each shifted support to the box boundary compared with
    /// `5/κ_min`; one message per offending well.
    pub fn margin_warnings(&self, kappa_min: f64) -> Vec<String> {
        let need = 5.0 / kappa_min;
        let l = self.grid.half_width();
        let mut out = Vec::new();
        for (i, w) in self.wells.iter().enumerate() {
            let reach = (0..self.grid.dim())
                .map(|a| math::abs(w.snapped_center[a]))
                .fold(0.0, f64::max)
                + w.perturbation.support_radius();
            let margin = l - reach;
            if margin < need {
                out.push(format!(
                    "well {i}: box margin {margin:.3} is below 5/kappa_min = {need:.3}"
                ));
            }
        }
        out
    }

    /// Largest `|(Hu,v) - (u,Hv)| / (‖u‖‖v‖)` over seeded random pairs.
    pub fn symmetry_defect(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        let mut hu = vec![0.0; n];
        let mut hv = vec![0.0; n];
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            self.apply(&u, &mut hu);
            self.apply(&v, &mut hv);
            let a = self.grid.inner(&hu, &v);
            let b = self.grid.inner(&u, &hv);
            worst = worst.max(math::abs(a - b) / (self.grid.norm(&u) * self.grid.norm(&v)));
        }
        worst
    }
}
