//! Kernel projection, the linearized operator L, the remainder R, the
//! nonlinear term N and the contraction fixed point for the correction Phi.
//!
//! Everything lives on one chart. With A the discrete operator of <., .>_H
//! and w the quadrature weights, i*_H(v) = A^(-1)(w v), so
//!
//!   L(x)   = pi_perp(x - A^(-1)(w a f'(W) x))
//!   R      = pi_perp(A^(-1)(w a f(W)) - W)
//!   N(Phi) = pi_perp(A^(-1)(w a (f(W+Phi) - f(W) - f'(W) Phi)))
//!
//! and Phi solves L(Phi) = N(Phi) + R on K_perp.
//!
//! On tensor charts every A^(-1) is an iterative solve, so each fixed point
//! step instead solves the equivalent saddle point system
//!
//!   (A - M) x + A Z c = w a (f(W+Phi) - f'(W) Phi) - A W,   (A Z)^T x = 0
//!
//! with M = diag(w a f'(W)), by MINRES without inner solves.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discrete::{build_kernel, build_w, dot, energy_of, norm_h, norm_ls, AnsatzParams, ChartGrid, DiscreteField, GridSpec};
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::solver::krylov::{gmres, minres, KrylovOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsOptions {
    pub max_iter: usize,
    /// stopping tolerance on ||Phi_(n+1) - Phi_n||_(H,s), relative to ||W||_H
    pub tol: f64,
    /// relative tolerance of the inner GMRES solves for L
    pub krylov_tol: f64,
    /// a step ratio at or above this value counts as a failure to contract
    pub contraction_limit: f64,
}

impl Default for LsOptions {
    fn default() -> Self {
        LsOptions {
            max_iter: 60,
            tol: 1e-13,
            krylov_tol: 1e-14,
            contraction_limit: 0.95,
        }
    }
}

/// Result of the correction fixed point at one (eps, t, eta).
#[derive(Debug, Clone)]
pub struct LsState {
    pub eps: f64,
    pub t: f64,
    pub eta: Vec<f64>,
    pub correction: DiscreteField,
    pub multipliers: Vec<f64>,
    /// ||pi_perp(u - i*(a f(u)))||_H / ||W||_H at u = W + Phi
    pub residual_h: f64,
    pub iterations: usize,
    pub krylov_iterations: usize,
    /// ||Phi_(n+1) - Phi_n||_(H,s) per iteration
    pub steps: Vec<f64>,
    /// largest step ratio above the roundoff floor, if any was measurable
    pub contraction: Option<f64>,
    pub phi_norm_h: f64,
    pub phi_norm_hs: f64,
    pub remainder_norm_h: f64,
    pub w_norm_h: f64,
    /// max_i |<Phi, Z^i>_H| / (||Phi||_H ||Z^i||_H)
    pub orthogonality: f64,
    pub energy: f64,
    /// dJ(W + Phi)/dt along the reduced family
    pub gradient_t: f64,
}

/// Serializable digest of an LsState.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsSummary {
    pub eps: f64,
    pub t: f64,
    pub eta: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub residual_h: f64,
    pub iterations: usize,
    pub contraction: Option<f64>,
    pub phi_norm_h: f64,
    pub phi_norm_hs: f64,
    pub remainder_norm_h: f64,
    pub orthogonality: f64,
    pub energy: f64,
    pub gradient_t: f64,
}

impl LsState {
    pub fn summary(&self) -> LsSummary {
        LsSummary {
            eps: self.eps,
            t: self.t,
            eta: self.eta.clone(),
            multipliers: self.multipliers.clone(),
            residual_h: self.residual_h,
            iterations: self.iterations,
            contraction: self.contraction,
            phi_norm_h: self.phi_norm_h,
            phi_norm_hs: self.phi_norm_hs,
            remainder_norm_h: self.remainder_norm_h,
            orthogonality: self.orthogonality,
            energy: self.energy,
            gradient_t: self.gradient_t,
        }
    }

    pub fn multiplier_sum(&self) -> f64 {
        self.multipliers.iter().map(|v| v.abs()).sum()
    }
}

/// Exponent s_eps of the auxiliary Lebesgue norm: 2* - (m/2) eps for
/// eps < 0, and 2* (H-norm alone) for eps > 0.
pub fn s_eps(m: usize, eps: f64) -> f64 {
    let mf = m as f64;
    let ts = 2.0 * mf / (mf - 2.0);
    if eps < 0.0 {
        ts - 0.5 * mf * eps
    } else {
        ts
    }
}

/// Everything the reduction needs at one (eps, t, eta).
pub struct LsContext {
    pub model: ManifoldModel,
    pub params: AnsatzParams,
    pub chart: Arc<ChartGrid>,
    pub w: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    az: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
    gram_factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// w_i a_i
    aw: Vec<f64>,
    pub p: f64,
    pub w_norm_h: f64,
}

impl LsContext {
    /// Build a fresh chart for the scale of `params` and the kernel on it.
    pub fn new(model: &ManifoldModel, params: AnsatzParams, spec: &GridSpec) -> Result<Self> {
        let chart = Arc::new(ChartGrid::build(model, spec, params.delta())?);
        Self::with_chart(model, params, chart)
    }

    pub fn with_chart(model: &ManifoldModel, params: AnsatzParams, chart: Arc<ChartGrid>) -> Result<Self> {
        let w = build_w(model, &chart, &params)?.values;
        let z: Vec<Vec<f64>> = build_kernel(model, &chart, &params)?.into_iter().map(|f| f.values).collect();
        let az: Vec<Vec<f64>> = z.iter().map(|v| chart.apply(v)).collect();
        let k = z.len();
        let gram = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&az[i], &z[j]) + dot(&az[j], &z[i])));
        let dvec: Vec<f64> = (0..k).map(|i| gram[(i, i)].sqrt()).collect();
        if dvec.iter().any(|d| !(*d > 0.0)) {
            return Err(BlabError::SingularGram(f64::INFINITY));
        }
        let normalized = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (dvec[i] * dvec[j]));
        let ev = normalized.clone().symmetric_eigenvalues();
        let cond = ev.max() / ev.min();
        if !(ev.min() > 0.0) || cond > 1e10 {
            return Err(BlabError::SingularGram(cond));
        }
        let gram_factor = gram.clone().cholesky().ok_or(BlabError::SingularGram(cond))?;
        let aw: Vec<f64> = chart.weights().iter().zip(chart.a_nodes()).map(|(w, a)| w * a).collect();
        let p = params.power(model.dim());
        let w_norm_h = norm_h(&chart, &w);
        Ok(LsContext {
            model: model.clone(),
            params,
            chart,
            w,
            z,
            az,
            gram,
            gram_factor,
            aw,
            p,
            w_norm_h,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn field(&self, values: Vec<f64>) -> DiscreteField {
        DiscreteField {
            values,
            chart: self.chart.clone(),
        }
    }

    fn f(&self, u: f64) -> f64 {
        if u > 0.0 {
            u.powf(self.p - 1.0)
        } else {
            0.0
        }
    }

    fn fp(&self, u: f64) -> f64 {
        if u > 0.0 {
            (self.p - 1.0) * u.powf(self.p - 2.0)
        } else {
            0.0
        }
    }

    /// A^(-1) b.
    pub fn solve_a(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.chart.solve(b, None)
    }

    /// i*_H(v): the u with <u, phi>_H = int v phi for all grid functions phi.
    pub fn adjoint_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = v.iter().zip(self.chart.weights()).map(|(x, w)| x * w).collect();
        self.solve_a(&rhs)
    }

    /// Coefficients c with f - sum c_j Z^j orthogonal to every Z^i.
    pub fn kernel_coefficients(&self, f: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_iterator(self.z.len(), self.az.iter().map(|a| dot(a, f)));
        self.gram_factor.solve(&rhs).iter().copied().collect()
    }

    pub fn project_perp(&self, f: &[f64]) -> Vec<f64> {
        let c = self.kernel_coefficients(f);
        let mut out = f.to_vec();
        for (cj, zj) in c.iter().zip(&self.z) {
            for (o, v) in out.iter_mut().zip(zj) {
                *o -= cj * v;
            }
        }
        out
    }

    /// max_i |<f, Z^i>_H| / (||f||_H ||Z^i||_H).
    pub fn orthogonality(&self, f: &[f64]) -> f64 {
        let nf = norm_h(&self.chart, f);
        if nf == 0.0 {
            return 0.0;
        }
        self.az
            .iter()
            .enumerate()
            .map(|(i, a)| dot(a, f).abs() / (nf * self.gram[(i, i)].sqrt()))
            .fold(0.0, f64::max)
    }

    /// ||v||_H plus the L^(s_eps) norm when eps < 0.
    pub fn norm_hs(&self, v: &[f64]) -> f64 {
        let h = norm_h(&self.chart, v);
        if self.params.eps < 0.0 {
            h + norm_ls(&self.chart, v, s_eps(self.model.dim().get(), self.params.eps))
        } else {
            h
        }
    }

    pub fn apply_l(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = (0..x.len()).map(|i| self.aw[i] * self.fp(self.w[i]) * x[i]).collect();
        let s = self.solve_a(&rhs)?;
        let d: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a - b).collect();
        Ok(self.project_perp(&d))
    }

    pub fn remainder(&self) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = (0..self.w.len()).map(|i| self.aw[i] * self.f(self.w[i])).collect();
        let s = self.solve_a(&rhs)?;
        let d: Vec<f64> = s.iter().zip(&self.w).map(|(a, b)| a - b).collect();
        Ok(self.project_perp(&d))
    }

    pub fn nonlinear(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = (0..phi.len())
            .map(|i| {
                let w = self.w[i];
                self.aw[i] * (self.f(w + phi[i]) - self.f(w) - self.fp(w) * phi[i])
            })
            .collect();
        Ok(self.project_perp(&self.solve_a(&rhs)?))
    }

    /// u - i*_H(a f(u)).
    pub fn full_residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = (0..u.len()).map(|i| self.aw[i] * self.f(u[i])).collect();
        let s = self.solve_a(&rhs)?;
        Ok(u.iter().zip(&s).map(|(a, b)| a - b).collect())
    }

    /// lambda with u - i*(a f(u)) - sum lambda_j Z^j orthogonal to K.
    pub fn multipliers(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let u: Vec<f64> = self.w.iter().zip(phi).map(|(a, b)| a + b).collect();
        Ok(self.kernel_coefficients(&self.full_residual(&u)?))
    }

    /// J_eps(W + Phi).
    pub fn energy(&self, phi: &[f64]) -> Result<f64> {
        let u: Vec<f64> = self.w.iter().zip(phi).map(|(a, b)| a + b).collect();
        energy_of(&self.chart, &u, self.p)
    }

    /// dJ(W + Phi)/dt. On a radial chart the grid scales with delta and the
    /// derivative is taken along that family (exact for the discrete energy
    /// up to O(lambda |Phi|) terms). On a fixed chart d_t W = Z^0/(2t) and
    /// the derivative is (G lambda)_0 / (2t).
    pub fn reduced_gradient_t(&self, phi: &[f64], multipliers: &[f64]) -> f64 {
        let t = self.params.t;
        match self.chart.as_ref() {
            ChartGrid::Radial(g) => {
                let u: Vec<f64> = self.w.iter().zip(phi).map(|(a, b)| a + b).collect();
                g.scale_derivative(&u, self.p, self.params.eps) / (2.0 * t)
            }
            ChartGrid::Tensor(_) => {
                let gl: f64 = (0..multipliers.len()).map(|j| self.gram[(0, j)] * multipliers[j]).sum();
                gl / (2.0 * t)
            }
        }
    }

    fn solve_l(&self, b: &[f64], x0: &[f64], opts: &LsOptions) -> Result<(Vec<f64>, usize)> {
        let kopts = KrylovOptions {
            rel_tol: opts.krylov_tol,
            max_iter: 600,
            restart: 60,
        };
        let res = gmres(|x| self.apply_l(x), b, Some(x0), kopts)?;
        // the last digits are limited by the conditioning of A^(-1) in the
        // Euclidean metric; accept anything within a factor 1e3 of the target
        if !res.converged && res.rel_residual > 1e3 * opts.krylov_tol {
            return Err(BlabError::LinearSolve(format!(
                "GMRES for L stopped at relative residual {:e}",
                res.rel_residual
            )));
        }
        Ok((self.project_perp(&res.x), res.iterations))
    }

    /// One fixed point step on a tensor chart via the bordered system.
    fn bordered_step(&self, phi: &[f64], opts: &LsOptions) -> Result<(Vec<f64>, usize)> {
        let ChartGrid::Tensor(g) = self.chart.as_ref() else {
            return Err(BlabError::LinearSolve("bordered solve needs a tensor chart".into()));
        };
        let n = self.w.len();
        let k = self.z.len();
        let aw_w = self.chart.apply(&self.w);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let w = self.w[i];
                self.aw[i] * (self.f(w + phi[i]) - self.fp(w) * phi[i]) - aw_w[i]
            })
            .collect();
        rhs.extend(std::iter::repeat_n(0.0, k));
        let m: Vec<f64> = (0..n).map(|i| self.aw[i] * self.fp(self.w[i])).collect();
        let diag = g.diagonal();
        let schur: Vec<f64> = self
            .az
            .iter()
            .map(|a| a.iter().zip(diag).map(|(x, d)| x * x / d).sum())
            .collect();
        let op = |v: &[f64]| -> Vec<f64> {
            let (x, c) = v.split_at(n);
            let mut y = self.chart.apply(x);
            for i in 0..n {
                y[i] -= m[i] * x[i];
            }
            for (cj, a) in c.iter().zip(&self.az) {
                for (yi, ai) in y.iter_mut().zip(a) {
                    *yi += cj * ai;
                }
            }
            y.extend(self.az.iter().map(|a| dot(a, x)));
            y
        };
        let precond = |r: &[f64]| -> Vec<f64> {
            let mut y: Vec<f64> = r[..n].iter().zip(diag).map(|(a, d)| a / d).collect();
            y.extend(r[n..].iter().zip(&schur).map(|(a, s)| a / s));
            y
        };
        let mut x0 = phi.to_vec();
        x0.extend(std::iter::repeat_n(0.0, k));
        let kopts = KrylovOptions {
            rel_tol: opts.krylov_tol,
            max_iter: 5000,
            restart: 0,
        };
        let res = minres(op, precond, &rhs, Some(&x0), kopts)?;
        if !res.converged && res.rel_residual > 1e3 * opts.krylov_tol {
            return Err(BlabError::LinearSolve(format!(
                "MINRES for the bordered system stopped at relative residual {:e}",
                res.rel_residual
            )));
        }
        let mut x = res.x;
        x.truncate(n);
        Ok((self.project_perp(&x), res.iterations))
    }

    /// Iterate Phi_(n+1) = L^(-1)(N(Phi_n) + R) on K_perp.
    pub fn correction_fixed_point(&self, opts: &LsOptions) -> Result<LsState> {
        let n = self.w.len();
        let r = self.remainder()?;
        let floor = 10.0 * opts.tol * self.w_norm_h;
        let mut phi = vec![0.0; n];
        let mut steps = Vec::new();
        let mut contraction: Option<f64> = None;
        let mut slow = 0;
        let mut kit = 0;
        let mut converged = false;
        let bordered = matches!(self.chart.as_ref(), ChartGrid::Tensor(_));
        for it in 0..opts.max_iter {
            let (next, k) = if bordered {
                self.bordered_step(&phi, opts)?
            } else {
                let nphi = self.nonlinear(&phi)?;
                let b: Vec<f64> = nphi.iter().zip(&r).map(|(a, c)| a + c).collect();
                self.solve_l(&b, &phi, opts)?
            };
            kit += k;
            let diff: Vec<f64> = next.iter().zip(&phi).map(|(a, c)| a - c).collect();
            let dn = self.norm_hs(&diff);
            if !dn.is_finite() {
                return Err(BlabError::NonContraction {
                    ratio: f64::INFINITY,
                    iteration: it,
                });
            }
            if let Some(&prev) = steps.last() {
                if dn > floor && prev > 0.0 {
                    let ratio: f64 = dn / prev;
                    contraction = Some(contraction.map_or(ratio, |c: f64| c.max(ratio)));
                    if ratio >= opts.contraction_limit {
                        slow += 1;
                    } else {
                        slow = 0;
                    }
                    if slow >= 3 || ratio > 2.0 {
                        return Err(BlabError::NonContraction { ratio, iteration: it });
                    }
                }
            }
            steps.push(dn);
            phi = next;
            log::trace!("fixed point it {it}: step {dn:e}");
            if dn < opts.tol * self.w_norm_h {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(BlabError::MaxIterations(opts.max_iter));
        }
        let u: Vec<f64> = self.w.iter().zip(&phi).map(|(a, b)| a + b).collect();
        let full = self.full_residual(&u)?;
        let residual_h = norm_h(&self.chart, &self.project_perp(&full)) / self.w_norm_h;
        let multipliers = self.kernel_coefficients(&full);
        let energy = energy_of(&self.chart, &u, self.p)?;
        let gradient_t = self.reduced_gradient_t(&phi, &multipliers);
        Ok(LsState {
            gradient_t,
            eps: self.params.eps,
            t: self.params.t,
            eta: self.params.eta.clone(),
            orthogonality: self.orthogonality(&phi),
            phi_norm_h: norm_h(&self.chart, &phi),
            phi_norm_hs: self.norm_hs(&phi),
            remainder_norm_h: norm_h(&self.chart, &r),
            w_norm_h: self.w_norm_h,
            correction: self.field(phi),
            multipliers,
            residual_h,
            iterations: steps.len(),
            krylov_iterations: kit,
            steps,
            contraction,
            energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::discrete::TensorSpec;
    use crate::geometry::model::flat;

    #[test]
    fn bordered_step_matches_projected_solve() {
        let m = Dimension::new(5).unwrap();
        let model = flat(m, 1.0).unwrap().with_isotropic_weight(1.0, 0.2).unwrap().with_h(0.5);
        let spec = GridSpec::Tensor(TensorSpec {
            n: 6,
            half_width: None,
            min_nodes_per_delta: 0.5,
        });
        let params = AnsatzParams::new(0.1, 1.0, vec![0.0; 5], (0.1, 10.0)).unwrap();
        let ctx = LsContext::new(&model, params, &spec).unwrap();
        let opts = LsOptions {
            krylov_tol: 1e-12,
            ..LsOptions::default()
        };
        let n = ctx.w.len();
        let phi: Vec<f64> = ctx.project_perp(&(0..n).map(|i| 0.01 * ((i % 7) as f64 - 3.0)).collect::<Vec<_>>());
        let (a, _) = ctx.bordered_step(&phi, &opts).unwrap();
        let r = ctx.remainder().unwrap();
        let nphi = ctx.nonlinear(&phi).unwrap();
        let b: Vec<f64> = nphi.iter().zip(&r).map(|(x, y)| x + y).collect();
        let (g, _) = ctx.solve_l(&b, &phi, &opts).unwrap();
        let d: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x - y).collect();
        assert!(ctx.norm_hs(&d) < 1e-8 * ctx.norm_hs(&g), "{} vs {}", ctx.norm_hs(&d), ctx.norm_hs(&g));
    }
}
