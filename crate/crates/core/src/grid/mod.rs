//! Uniform Dirichlet grids on `[-L, L]ⁿ`, finite-difference Hamiltonians,
//! lowest eigenpairs and resolvent solves.

mod eigen;
mod operator;
mod resolvent;

use alloc::vec::Vec;

pub use eigen::{lowest_eigenpairs, EigenOptions, EigenPair, EigenReport, SolverPath};
pub use operator::{assemble_hamiltonian, DiscreteOperator, PlacedWell};
pub use resolvent::{resolvent_solve, ResolventOptions};

use crate::error::{Error, Result};
use crate::math;

/// A point of ℝⁿ padded with zeros to three components.
pub type Point = [f64; 3];

/// Default memory budget for [`Grid::new`]: 16 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 16 * (1 << 30);

/// Interior nodes of a uniform tensor grid on `[-L, L]ⁿ` with homogeneous
/// Dirichlet boundary. Node `i` (1-based along an axis) sits at `i·h - L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    h: f64,
    steps: usize,
    requested_h: f64,
}

impl Grid {
    /// Build a grid under [`DEFAULT_MEMORY_BUDGET`].
    pub fn new(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        Self::with_budget(dim, half_width, h, DEFAULT_MEMORY_BUDGET)
    }

    /// Build a grid; a spacing that does not divide `half_width` is snapped
    /// downward to the next one that does (see [`Grid::snapped_from`]).
    pub fn with_budget(dim: usize, half_width: f64, h: f64, budget: u64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(half_width > 0.0 && half_width.is_finite()) || !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid("half_width and h must be positive".into()));
        }
        let q = half_width / h;
        let nearest = math::round(q);
        let steps = if math::abs(q - nearest) <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            math::ceil(q)
        };
        if steps < 16.0 {
            return Err(Error::InvalidGrid(alloc::format!(
                "half_width / h = {q} must be at least 16"
            )));
        }
        if steps > 1e9 {
            return Err(Error::MemoryBudget {
                required: u64::MAX,
                budget,
            });
        }
        let grid = Self {
            dim,
            half_width,
            h: half_width / steps,
            steps: steps as usize,
            requested_h: h,
        };
        let required = grid.estimated_bytes();
        if required > budget {
            return Err(Error::MemoryBudget { required, budget });
        }
        Ok(grid)
    }

    /// Rough working-set estimate: a `(2n+1)`-point stencil in CSR form plus
    /// two dozen solver vectors per node.
    pub fn estimated_bytes(&self) -> u64 {
        let per_node = 16 * (2 * self.dim as u64 + 1) + 8 * 24;
        per_node.saturating_mul(self.len() as u64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// The spacing originally asked for, when it had to be snapped.
    pub fn snapped_from(&self) -> Option<f64> {
        (math::abs(self.requested_h - self.h) > 1e-12 * self.h).then_some(self.requested_h)
    }

    /// Interior nodes along one axis, `2L/h - 1`.
    pub fn nodes_per_axis(&self) -> usize {
        2 * self.steps - 1
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        let m = self.nodes_per_axis();
        (0..self.dim).map(|_| m).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `hⁿ`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        math::powi(self.h, self.dim as i32)
    }

    /// Coordinate of 0-based interior index `i` along an axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h - self.half_width
    }

    /// Index of the node at the origin along each axis.
    pub fn center_index(&self) -> usize {
        self.steps - 1
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let m = self.nodes_per_axis();
        let mut out = [0; 3];
        let mut r = idx;
        for a in 0..self.dim {
            out[a] = r % m;
            r /= m;
        }
        out
    }

    pub fn linear_index(&self, mi: &[usize; 3]) -> usize {
        let m = self.nodes_per_axis();
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * m + mi[a];
        }
        idx
    }

    /// Linear index of `mi + offset`, or `None` when it leaves the interior.
    pub fn offset_index(&self, mi: &[usize; 3], offset: &[i64; 3]) -> Option<usize> {
        let m = self.nodes_per_axis() as i64;
        let mut t = [0usize; 3];
        for a in 0..self.dim {
            let v = mi[a] as i64 + offset[a];
            if v < 0 || v >= m {
                return None;
            }
            t[a] = v as usize;
        }
        Some(self.linear_index(&t))
    }

    pub fn point(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.coord(mi[a]);
        }
        p
    }

    /// Nearest interior node to `p` and the distance to it.
    pub fn nearest_node(&self, p: &Point) -> Option<([usize; 3], f64)> {
        let m = self.nodes_per_axis() as i64;
        let mut mi = [0usize; 3];
        let mut d2 = 0.0;
        for a in 0..self.dim {
            let i = math::round((p[a] + self.half_width) / self.h) as i64 - 1;
            if i < 0 || i >= m {
                return None;
            }
            mi[a] = i as usize;
            let d = self.coord(i as usize) - p[a];
            d2 += d * d;
        }
        Some((mi, math::sqrt(d2)))
    }

    pub fn sample(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    /// Discrete `L₂` inner product `Σ u v hⁿ`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        crate::linalg::dot(u, v) * self.cell_volume()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        math::sqrt(self.inner(u, u))
    }

    /// `Σ_edges (forward difference)² hⁿ`, the discrete `‖∇u‖²` with
    /// Dirichlet boundary.
    pub fn gradient_norm_sq(&self, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for idx in 0..self.len() {
            let mi = self.multi_index(idx);
            for a in 0..self.dim {
                let mut off = [0i64; 3];
                off[a] = 1;
                let next = self.offset_index(&mi, &off).map_or(0.0, |j| u[j]);
                let d = next - u[idx];
                s += d * d;
                if mi[a] == 0 {
                    s += u[idx] * u[idx];
                }
            }
        }
        s * self.cell_volume() / (self.h * self.h)
    }

    /// Multilinear interpolation of a grid function; the function is zero on
    /// the Dirichlet boundary. `None` outside the closed box.
    pub fn interpolate(&self, u: &[f64], p: &Point) -> Option<f64> {
        let m = self.nodes_per_axis() as i64;
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            let s = (p[a] + self.half_width) / self.h;
            if s < -1e-12 || s > (self.steps * 2) as f64 + 1e-12 {
                return None;
            }
            let f = math::floor(s);
            let mut fl = f as i64;
            let mut t = s - f;
            if fl >= 2 * self.steps as i64 {
                fl = 2 * self.steps as i64 - 1;
                t = 1.0;
            }
            base[a] = fl - 1;
            frac[a] = t;
        }
        let corners = 1usize << self.dim;
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut mi = [0usize; 3];
            let mut inside = true;
            for a in 0..self.dim {
                let bit = (c >> a) & 1;
                let i = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                if i < 0 || i >= m {
                    inside = false;
                } else {
                    mi[a] = i as usize;
                }
            }
            if inside && w != 0.0 {
                acc += w * u[self.linear_index(&mi)];
            }
        }
        Some(acc)
    }
}
