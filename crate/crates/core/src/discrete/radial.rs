//! Radial finite-volume chart for rotationally symmetric models.
//!
//! Nodes rho_i = delta * zeta_i with zeta_i = hz sinh(b i) / b, the same
//! sequence for every delta: spacing hz at the bubble core, growing by a
//! factor of about (1 + b) per cell. The sequence is cut at the first node
//! beyond R / delta and the last node is moved onto R, where the Dirichlet
//! condition sits. Because the grid is fixed in bubble units, its leading
//! discretization error does not depend on delta.

use serde::{Deserialize, Serialize};

use crate::bubble::Dimension;
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::moments::sphere_volume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSpec {
    /// node spacing at the origin in units of delta
    pub hz: f64,
    /// per-cell growth rate b of the spacing
    pub growth: f64,
    /// refuse to build grids with more cells than this
    pub max_cells: usize,
}

impl Default for RadialSpec {
    fn default() -> Self {
        RadialSpec {
            hz: 1.0 / 192.0,
            growth: 2e-4,
            max_cells: 400_000,
        }
    }
}

impl RadialSpec {
    pub fn zeta(&self, i: f64) -> f64 {
        if self.growth == 0.0 {
            self.hz * i
        } else {
            self.hz * (self.growth * i).sinh() / self.growth
        }
    }

    /// Number of cells needed to reach zeta = z.
    pub fn cells_for(&self, z: f64) -> f64 {
        if self.growth == 0.0 {
            z / self.hz
        } else {
            (z * self.growth / self.hz).asinh() / self.growth
        }
    }
}

/// Minimum nodes per delta near the bubble core.
pub const MIN_NODES_PER_DELTA: f64 = 8.0;

/// Symmetric positive definite tridiagonal matrix with a cached factorization.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    piv: Vec<f64>,
}

impl Tridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let mut piv = vec![0.0; n];
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - off[i - 1] * off[i - 1] / piv[i - 1]
            };
            if !(p > 0.0) {
                return Err(BlabError::LinearSolve(format!(
                    "discrete operator is not positive definite (pivot {p:e} at node {i})"
                )));
            }
            piv[i] = p;
        }
        Ok(Tridiag { diag, off, piv })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = if i == 0 { b[0] } else { b[i] - self.off[i - 1] / self.piv[i - 1] * y[i - 1] };
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = if i + 1 == n {
                y[i] / self.piv[i]
            } else {
                (y[i] - self.off[i] * x[i + 1]) / self.piv[i]
            };
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub m: Dimension,
    pub delta: f64,
    pub spec: RadialSpec,
    /// rho_0 .. rho_N (the last node carries the Dirichlet condition)
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a_nodes: Vec<f64>,
    /// edge conductances
    pub kappa: Vec<f64>,
    /// rho f'/f of a g^rr sqrt(g) at edge midpoints
    edge_log: Vec<f64>,
    /// rho f'/f of a sqrt(g) at nodes
    node_log: Vec<f64>,
    h0: f64,
    pub op: Tridiag,
}

impl RadialGrid {
    pub fn new(model: &ManifoldModel, delta: f64, spec: RadialSpec) -> Result<Self> {
        if !model.is_rotationally_symmetric() {
            return Err(BlabError::NotRadial(format!("model '{}' is not rotationally symmetric", model.name)));
        }
        if 1.0 / spec.hz < MIN_NODES_PER_DELTA {
            return Err(BlabError::UnderResolved {
                nodes_per_delta: 1.0 / spec.hz,
                required: MIN_NODES_PER_DELTA,
            });
        }
        if !(spec.growth >= 0.0) || !spec.growth.is_finite() {
            return Err(BlabError::InvalidParameter(format!("grid growth must be nonnegative, got {}", spec.growth)));
        }
        let m = model.dim();
        let mf = m.as_f64();
        let radius = model.cutoff.radius;
        let zmax = radius / delta;
        let need = spec.cells_for(zmax).ceil();
        if !(need <= spec.max_cells as f64) {
            return Err(BlabError::InvalidParameter(format!(
                "radial grid needs {need} cells to reach the chart radius (limit {})",
                spec.max_cells
            )));
        }
        let mut n = need as usize;
        let mut nodes: Vec<f64>;
        if n < 16 {
            // delta comparable to the chart: a uniform grid is finer than asked
            n = 16;
            nodes = (0..=n).map(|i| radius * i as f64 / n as f64).collect();
        } else {
            nodes = (0..=n).map(|i| delta * spec.zeta(i as f64)).collect();
            if n > 16 && radius - nodes[n - 1] < 0.5 * (nodes[n - 1] - nodes[n - 2]) {
                // avoid a sliver cell next to the boundary
                nodes.pop();
                n -= 1;
            }
        }
        nodes[n] = radius;

        let om = sphere_volume(m.get() - 1);
        let a_rad = |r: f64| {
            let mut y = vec![0.0; m.get()];
            y[0] = r;
            model.a_at(&y)
        };
        // every coefficient has the form f0 + beta rho^2, so rho f'/f = 2 (f - f0)/f
        let log_a = |a: f64| 2.0 * (a - model.a0) / a;
        let log_unit = |f: f64| 2.0 * (f - 1.0) / f;
        let mut kappa = vec![0.0; n];
        let mut edge_log = vec![0.0; n];
        for i in 0..n {
            let (r0, r1) = (nodes[i], nodes[i + 1]);
            let mid = 0.5 * (r0 + r1);
            let (grr, sg) = model.radial_metric(mid);
            let d = r1 - r0;
            let a = a_rad(mid);
            kappa[i] = om * a * grr * sg * (r1.powf(mf) - r0.powf(mf)) / (mf * d * d);
            edge_log[i] = log_a(a) + log_unit(grr) + log_unit(sg);
        }
        let mut weights = vec![0.0; n];
        let mut a_nodes = vec![0.0; n];
        let mut node_log = vec![0.0; n];
        for i in 0..n {
            let lo = if i == 0 { 0.0 } else { 0.5 * (nodes[i - 1] + nodes[i]) };
            let hi = 0.5 * (nodes[i] + nodes[i + 1]);
            let (_, sg) = model.radial_metric(nodes[i]);
            weights[i] = om * sg * (hi.powf(mf) - lo.powf(mf)) / mf;
            a_nodes[i] = a_rad(nodes[i]);
            node_log[i] = log_a(a_nodes[i]) + log_unit(sg);
        }
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for i in 0..n {
            diag[i] = kappa[i] + if i > 0 { kappa[i - 1] } else { 0.0 } + weights[i] * a_nodes[i] * model.h0;
            if i + 1 < n {
                off[i] = -kappa[i];
            }
        }
        let op = Tridiag::new(diag, off)?;
        Ok(RadialGrid {
            m,
            delta,
            spec,
            nodes,
            weights,
            a_nodes,
            kappa,
            edge_log,
            node_log,
            h0: model.h0,
            op,
        })
    }

    /// delta d/d delta of J_eps(u) on the grid family rho_i = delta zeta_i,
    /// with the nodal values held fixed in bubble units (u = delta^(-(m-2)/2) v).
    ///
    /// In those units only the coefficients move with delta, so the
    /// derivative is a sum of small local terms and has no cancellation:
    ///
    ///   (1/2) sum kappa_i L_F (du_i)^2 + (1/2) sum w a h u^2 (2 + L_G)
    ///   - (1/p) sum w a (u+)^p (k eps + L_G)
    ///
    /// with L_f = rho f'/f, F = a g^rr sqrt(g) at edge midpoints and
    /// G = a sqrt(g) at nodes. The boundary node is pinned at R, which only
    /// touches the last cell where every field vanishes.
    pub fn scale_derivative(&self, u: &[f64], p: f64, eps: f64) -> f64 {
        let n = self.len();
        let k = self.m.k();
        let mut grad = 0.0;
        for i in 0..n {
            let du = if i + 1 < n { u[i + 1] - u[i] } else { -u[i] };
            grad += self.kappa[i] * self.edge_log[i] * du * du;
        }
        let mut mass = 0.0;
        let mut pow = 0.0;
        for i in 0..n {
            let wa = self.weights[i] * self.a_nodes[i];
            mass += wa * self.h0 * u[i] * u[i] * (2.0 + self.node_log[i]);
            pow += wa * u[i].max(0.0).powf(p) * (k * eps + self.node_log[i]);
        }
        0.5 * grad + 0.5 * mass - pow / p
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Linear interpolation of nodal values onto radius r (zero beyond the chart).
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let n = self.len();
        if r >= self.nodes[n] {
            return 0.0;
        }
        let idx = match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let v0 = values[idx];
        let v1 = if idx + 1 < n { values[idx + 1] } else { 0.0 };
        let s = (r - self.nodes[idx]) / (self.nodes[idx + 1] - self.nodes[idx]);
        v0 + s * (v1 - v0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_inverts() {
        let s = RadialSpec::default();
        for z in [0.5, 10.0, 300.0] {
            assert!((s.zeta(s.cells_for(z)) - z).abs() < 1e-9 * z);
        }
    }

    #[test]
    fn tridiagonal_solve() {
        let t = Tridiag::new(vec![4.0, 4.0, 4.0, 4.0], vec![-1.0, -1.0, -1.0]).unwrap();
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let b = t.apply(&x);
        let y = t.solve(&b);
        for i in 0..4 {
            assert!((x[i] - y[i]).abs() < 1e-14);
        }
    }
}
