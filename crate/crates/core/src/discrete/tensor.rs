//! Periodic tensor-product chart [-L, L)^m with a symmetrized
//! forward/backward difference discretization of -div_g(a grad u) + a h u:
//!
//!   A = (1/2) sum_ij [ (D+_i)^T c^ij D+_j + (D-_i)^T c^ij D-_j ] h^m + mass,
//!
//! with c = a sqrt(g) g^{-1} sampled at the nodes. A is symmetric and, for
//! h > 0, positive definite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::Dimension;
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::solver::krylov::{cg, KrylovOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    /// points per axis
    pub n: usize,
    /// half width L of the periodic box; defaults to the cutoff radius
    #[serde(default)]
    pub half_width: Option<f64>,
    /// resolution floor near the core; lowering it below 8 is for
    /// demonstrations on coarse boxes only
    #[serde(default = "default_min_nodes")]
    pub min_nodes_per_delta: f64,
}

fn default_min_nodes() -> f64 {
    crate::discrete::MIN_NODES_PER_DELTA
}

impl TensorSpec {
    pub fn new(n: usize) -> Self {
        TensorSpec {
            n,
            half_width: None,
            min_nodes_per_delta: default_min_nodes(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorGrid {
    pub m: Dimension,
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub min_nodes_per_delta: f64,
    len: usize,
    strides: Vec<usize>,
    /// a sqrt(g) g^{ij}: m*m entries per node, or m diagonal entries when the
    /// metric is flat
    coef: Vec<f64>,
    full: bool,
    pub weights: Vec<f64>,
    pub a_nodes: Vec<f64>,
    mass: Vec<f64>,
    diag: Vec<f64>,
    pub solve_tol: f64,
}

impl TensorGrid {
    pub fn new(model: &ManifoldModel, spec: TensorSpec) -> Result<Self> {
        let m = model.dim();
        let d = m.get();
        if !(spec.min_nodes_per_delta > 0.0) {
            return Err(BlabError::InvalidParameter("min_nodes_per_delta must be positive".into()));
        }
        if spec.n < 4 {
            return Err(BlabError::InvalidParameter("tensor grid needs at least 4 points per axis".into()));
        }
        let half_width = spec.half_width.unwrap_or(model.cutoff.radius);
        if half_width < model.cutoff.radius {
            return Err(BlabError::InvalidParameter(format!(
                "box half width {half_width} does not contain the cutoff support (radius {})",
                model.cutoff.radius
            )));
        }
        let len = spec
            .n
            .checked_pow(d as u32)
            .filter(|l| *l <= 20_000_000)
            .ok_or_else(|| BlabError::InvalidParameter(format!("{}^{} nodes is too many", spec.n, d)))?;
        let hh = 2.0 * half_width / spec.n as f64;
        let strides: Vec<usize> = (0..d).map(|i| spec.n.pow(i as u32)).collect();
        let full = model.metric_hessian().iter().any(|v| *v != 0.0);
        let per = if full { d * d } else { d };
        let mut coef = vec![0.0; len * per];
        let mut weights = vec![0.0; len];
        let mut a_nodes = vec![0.0; len];
        let mut mass = vec![0.0; len];
        let vol = hh.powi(d as i32);
        let mut y = vec![0.0; d];
        for idx in 0..len {
            coords_into(idx, spec.n, half_width, hh, &mut y);
            let sg = model.sqrt_det_g_unchecked(&y);
            if !(sg > 0.0) {
                return Err(BlabError::InvalidParameter(format!(
                    "metric jet degenerates inside the box (sqrt det g = {sg:e})"
                )));
            }
            let a = model.a_at(&y);
            if !(a > 0.0) {
                return Err(BlabError::InvalidParameter(format!("weight a is not positive inside the box ({a:e})")));
            }
            if full {
                let gi = model.metric_inverse_unchecked(&y);
                for i in 0..d {
                    for j in 0..d {
                        coef[idx * per + i * d + j] = a * sg * gi[(i, j)];
                    }
                }
            } else {
                for i in 0..d {
                    coef[idx * per + i] = a;
                }
            }
            weights[idx] = vol * sg;
            a_nodes[idx] = a;
            mass[idx] = vol * sg * a * model.h0;
        }
        let mut g = TensorGrid {
            m,
            n: spec.n,
            half_width,
            spacing: hh,
            min_nodes_per_delta: spec.min_nodes_per_delta,
            len,
            strides,
            coef,
            full,
            weights,
            a_nodes,
            mass,
            diag: Vec::new(),
            solve_tol: 1e-12,
        };
        g.diag = (0..len).map(|y| g.diag_entry(y)).collect();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.m.get()];
        coords_into(idx, self.n, self.half_width, self.spacing, &mut y);
        y
    }

    /// Index of the node at the chart origin.
    pub fn origin(&self) -> usize {
        let c = self.n / 2;
        self.strides.iter().map(|s| c * s).sum()
    }

    fn shift(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let n = self.n;
        let s = self.strides[axis];
        let c = (idx / s) % n;
        if forward {
            if c + 1 == n {
                idx + s - n * s
            } else {
                idx + s
            }
        } else if c == 0 {
            idx + n * s - s
        } else {
            idx - s
        }
    }

    #[inline]
    fn c(&self, idx: usize, i: usize, j: usize) -> f64 {
        let d = self.m.get();
        if self.full {
            self.coef[idx * d * d + i * d + j]
        } else if i == j {
            self.coef[idx * d + i]
        } else {
            0.0
        }
    }

    fn diag_entry(&self, y: usize) -> f64 {
        let d = self.m.get();
        let f = 0.5 * self.spacing.powi(d as i32 - 2);
        let mut s = 0.0;
        for i in 0..d {
            s += self.c(self.shift(y, i, false), i, i) + self.c(self.shift(y, i, true), i, i);
            for j in 0..d {
                s += 2.0 * self.c(y, i, j);
            }
        }
        let v = f * s + self.mass[y];
        if v > 0.0 {
            v
        } else {
            1.0
        }
    }

    /// sum_j c^ij(x) D+_j u(x) (forward) or D-_j u(x) (backward), times h.
    #[inline]
    fn flux(&self, u: &[f64], x: usize, i: usize, forward: bool) -> f64 {
        if !self.full {
            let du = if forward {
                u[self.shift(x, i, true)] - u[x]
            } else {
                u[x] - u[self.shift(x, i, false)]
            };
            return self.c(x, i, i) * du;
        }
        let d = self.m.get();
        let mut s = 0.0;
        for j in 0..d {
            let du = if forward {
                u[self.shift(x, j, true)] - u[x]
            } else {
                u[x] - u[self.shift(x, j, false)]
            };
            s += self.c(x, i, j) * du;
        }
        s
    }

    /// A u, so that <u, v>_H = u^T A v.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let d = self.m.get();
        let f = 0.5 * self.spacing.powi(d as i32 - 2);
        (0..self.len)
            .into_par_iter()
            .map(|y| {
                let mut s = 0.0;
                for i in 0..d {
                    s += self.flux(u, self.shift(y, i, false), i, true) - self.flux(u, y, i, true);
                    s += self.flux(u, y, i, false) - self.flux(u, self.shift(y, i, true), i, false);
                }
                f * s + self.mass[y] * u[y]
            })
            .collect()
    }

    /// Positive diagonal of A (used for Jacobi preconditioning).
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
        let opts = KrylovOptions {
            rel_tol: self.solve_tol,
            max_iter: 20_000,
            restart: 0,
        };
        let diag = &self.diag;
        let res = cg(
            |v| self.apply(v),
            |r| r.iter().zip(diag).map(|(a, b)| a / b).collect(),
            b,
            x0,
            opts,
        )?;
        Ok(res.x)
    }

    /// Multilinear periodic interpolation at y.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> f64 {
        let d = self.m.get();
        let n = self.n;
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let s = ((y[i] + self.half_width) / self.spacing).rem_euclid(n as f64);
            let f = s.floor();
            base[i] = f as usize % n;
            frac[i] = s - f;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for i in 0..d {
                let bit = (corner >> i) & 1;
                idx += ((base[i] + bit) % n) * self.strides[i];
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
            }
            if w != 0.0 {
                total += w * values[idx];
            }
        }
        total
    }
}

fn coords_into(idx: usize, n: usize, l: f64, hh: f64, y: &mut [f64]) {
    let mut r = idx;
    for v in y.iter_mut() {
        *v = -l + (r % n) as f64 * hh;
        r /= n;
    }
}
