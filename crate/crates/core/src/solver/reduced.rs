//! The finite-dimensional reduced problem: critical points of
//! (t, eta) -> J_eps(W + Phi), found as zeros of the Lagrange multipliers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{AnsatzParams, ChartGrid, DiscreteField, GridSpec};
use crate::energy::phi::{regime_decision, sign_of, theta, ReducedEnergyFn, ThetaConvention};
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::solver::ls::{LsContext, LsOptions, LsState, LsSummary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReduceOptions {
    /// admissible [alpha, beta] for t; defaults to [t0/4, 4 t0]
    pub t_interval: Option<(f64, f64)>,
    /// stop when the Newton step is below newton_tol (relative in t, absolute in eta)
    pub newton_tol: f64,
    pub max_newton: usize,
    /// central-difference step for the Jacobian, relative to the variable scale
    pub grad_step: f64,
    pub ls: LsOptions,
    pub convention: ThetaConvention,
    /// refuse to solve outside the existence regime (needs m >= 9)
    pub enforce_regime: bool,
    /// Newton starting point for t; defaults to t0
    pub initial_t: Option<f64>,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            t_interval: None,
            newton_tol: 1e-7,
            max_newton: 30,
            grad_step: 1e-4,
            ls: LsOptions::default(),
            convention: ThetaConvention::Verified,
            enforce_regime: true,
            initial_t: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub eps: f64,
    pub t_eps: f64,
    pub eta_eps: Vec<f64>,
    pub t0: f64,
    pub theta: f64,
    pub state: LsState,
    /// u = W + Phi
    pub solution: DiscreteField,
    /// W alone on the same chart
    pub ansatz: DiscreteField,
    pub newton_iterations: usize,
    /// reduced gradient norm at the returned point, from the multipliers
    pub gradient_norm: f64,
    pub history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSummary {
    pub eps: f64,
    pub t_eps: f64,
    pub eta_eps: Vec<f64>,
    pub t0: f64,
    pub theta: f64,
    pub t_rel_error: f64,
    pub newton_iterations: usize,
    pub gradient_norm: f64,
    pub phi_over_eps_log: f64,
    pub min_on_support: f64,
    pub ls: LsSummary,
}

impl ReducedSolution {
    pub fn summary(&self) -> ReducedSummary {
        let e = self.eps.abs();
        ReducedSummary {
            eps: self.eps,
            t_eps: self.t_eps,
            eta_eps: self.eta_eps.clone(),
            t0: self.t0,
            theta: self.theta,
            t_rel_error: (self.t_eps - self.t0).abs() / self.t0,
            newton_iterations: self.newton_iterations,
            gradient_norm: self.gradient_norm,
            phi_over_eps_log: self.state.phi_norm_h / (e * e.ln().abs()),
            min_on_support: self.min_on_support(),
            ls: self.state.summary(),
        }
    }

    /// Smallest value of u where W is positive.
    pub fn min_on_support(&self) -> f64 {
        self.solution
            .values
            .iter()
            .zip(&self.ansatz.values)
            .filter(|(_, w)| **w > 0.0)
            .map(|(u, _)| *u)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reduced target point and interval for a model and sign of eps.
pub fn reduced_target(model: &ManifoldModel, eps: f64, opts: &ReduceOptions) -> Result<(f64, f64, (f64, f64))> {
    let sign = sign_of(eps);
    let th = theta(model, opts.convention)?;
    if opts.enforce_regime {
        let d = regime_decision(model.dim(), th, sign)?;
        if !d.solve {
            return Err(if th == 0.0 {
                BlabError::DegenerateTheta
            } else {
                BlabError::RegimeMismatch { theta: th, sign_eps: sign }
            });
        }
    }
    let f = ReducedEnergyFn::from_model(model, sign, opts.convention)?;
    let cp = f.critical_point()?;
    let interval = opts.t_interval.unwrap_or((0.25 * cp.t0, 4.0 * cp.t0));
    Ok((th, cp.t0, interval))
}

/// Shared or per-point charts.
pub struct ChartSource {
    spec: GridSpec,
    fixed: Option<Arc<ChartGrid>>,
}

impl ChartSource {
    pub fn new(model: &ManifoldModel, spec: GridSpec, delta_hint: f64) -> Result<Self> {
        let fixed = if spec.is_adaptive() {
            None
        } else {
            Some(Arc::new(ChartGrid::build(model, &spec, delta_hint)?))
        };
        Ok(ChartSource { spec, fixed })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn context(&self, model: &ManifoldModel, params: AnsatzParams) -> Result<LsContext> {
        match &self.fixed {
            Some(c) => LsContext::with_chart(model, params, c.clone()),
            None => LsContext::new(model, params, &self.spec),
        }
    }
}

/// Run the correction fixed point at one point of the reduced variables.
pub fn correction_at(
    model: &ManifoldModel,
    source: &ChartSource,
    eps: f64,
    t: f64,
    eta: &[f64],
    interval: (f64, f64),
    opts: &LsOptions,
) -> Result<(LsContext, LsState)> {
    let params = AnsatzParams::new(eps, t, eta.to_vec(), interval)?;
    let ctx = source.context(model, params)?;
    let st = ctx.correction_fixed_point(opts)?;
    Ok((ctx, st))
}

/// Reduced equations at x = (t, eta_1..eta_k): dJ/dt on radial charts, the
/// multipliers lambda_j on fixed charts. Both vanish exactly at critical
/// points of the reduced energy.
fn reduced_equations(
    model: &ManifoldModel,
    source: &ChartSource,
    eps: f64,
    x: &[f64],
    interval: (f64, f64),
    opts: &LsOptions,
) -> Result<Vec<f64>> {
    let mut eta = vec![0.0; model.dim().get()];
    eta[..x.len() - 1].copy_from_slice(&x[1..]);
    let st = correction_at(model, source, eps, x[0], &eta, interval, opts)?.1;
    Ok(if source.spec().is_adaptive() {
        vec![st.gradient_t]
    } else {
        st.multipliers[..x.len()].to_vec()
    })
}

/// Solve the reduced problem for one eps.
///
/// Newton with a central-difference Jacobian on the reduced equations. On a
/// fixed chart grad J(W + Phi) = sum_j lambda_j <Z^j, d(W + Phi)>_H with a
/// nonsingular coupling near (t0, 0), so lambda = 0 is solved directly. On a
/// radial chart the grid moves with delta and dJ/dt is evaluated along the
/// moving family. Either way no differences of J itself are taken: its t
/// dependence is O(|eps|) against an O(1) total.
pub fn reduced_solve(model: &ManifoldModel, eps: f64, spec: &GridSpec, opts: &ReduceOptions) -> Result<ReducedSolution> {
    let (th, t0, interval) = reduced_target(model, eps, opts)?;
    let source = ChartSource::new(model, *spec, (eps.abs() * t0).sqrt())?;
    let m = model.dim().get();
    // eta stays at 0 for even models (exact by symmetry) and on radial charts
    let n_eta = if model.is_even() || spec.is_adaptive() { 0 } else { m };
    let nv = 1 + n_eta;
    let mut x = vec![0.0; nv];
    x[0] = opts.initial_t.unwrap_or(t0).clamp(interval.0, interval.1);
    let scale = |i: usize, x: &[f64]| if i == 0 { x[0] } else { 1.0 };
    let eqs = |x: &[f64]| reduced_equations(model, &source, eps, x, interval, &opts.ls);

    let mut history = Vec::new();
    let mut iters = 0;
    let mut converged = false;
    for it in 0..opts.max_newton {
        iters = it + 1;
        let f0 = eqs(&x)?;
        let mut jac = nalgebra::DMatrix::zeros(nv, nv);
        for i in 0..nv {
            let h = opts.grad_step * scale(i, &x);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = eqs(&xp)?;
            let fm = eqs(&xm)?;
            for r in 0..nv {
                jac[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        history.push((x[0], f0[0]));
        let step = jac
            .lu()
            .solve(&nalgebra::DVector::from_vec(f0.clone()))
            .ok_or_else(|| BlabError::NewtonFailure("singular Jacobian of the reduced equations".into()))?;
        let mut size = 0.0f64;
        for i in 0..nv {
            let mut s = -step[i];
            if i == 0 {
                // at most halve or double t per step and stay inside [alpha, beta]
                s = s.clamp(-0.5 * x[0], x[0]);
                s = (x[0] + s).clamp(interval.0, interval.1) - x[0];
            }
            size = size.max(s.abs() / scale(i, &x));
            x[i] += s;
        }
        log::debug!("newton {it}: t = {:.12}, lambda_0 = {:e}, step {size:e}", x[0], f0[0]);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(BlabError::NewtonFailure("reduced variables became non-finite".into()));
        }
        if size < opts.newton_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(BlabError::NewtonFailure(format!(
            "no convergence in {} steps (last t = {})",
            opts.max_newton, x[0]
        )));
    }
    let mut eta = vec![0.0; m];
    eta[..n_eta].copy_from_slice(&x[1..]);
    let (ctx, state) = correction_at(model, &source, eps, x[0], &eta, interval, &opts.ls)?;
    let gradient_norm = if spec.is_adaptive() {
        state.gradient_t.abs()
    } else {
        // dJ/deta_i ~ -lambda_i ||Z^i||_H^2
        (state.gradient_t.powi(2)
            + (1..state.multipliers.len())
                .map(|j| (state.multipliers[j] * ctx.gram()[(j, j)]).powi(2))
                .sum::<f64>())
        .sqrt()
    };
    let u: Vec<f64> = ctx.w.iter().zip(&state.correction.values).map(|(a, b)| a + b).collect();
    Ok(ReducedSolution {
        eps,
        t_eps: x[0],
        eta_eps: eta,
        t0,
        theta: th,
        solution: ctx.field(u),
        ansatz: ctx.field(ctx.w.clone()),
        state,
        newton_iterations: iters,
        gradient_norm,
        history,
    })
}

/// Independent reductions across a ladder, in ladder order.
pub fn reduce_ladder(
    model: &ManifoldModel,
    ladder: &[f64],
    spec: &GridSpec,
    opts: &ReduceOptions,
) -> Vec<Result<ReducedSolution>> {
    ladder.par_iter().map(|&e| reduced_solve(model, e, spec, opts)).collect()
}

/// Multipliers at a fixed t (off the critical point they measure the
/// reduced gradient).
pub fn multipliers_at(model: &ManifoldModel, eps: f64, t: f64, spec: &GridSpec, opts: &ReduceOptions) -> Result<LsState> {
    let (_, t0, interval) = reduced_target(model, eps, opts)?;
    let source = ChartSource::new(model, *spec, (eps.abs() * t0).sqrt())?;
    let eta = vec![0.0; model.dim().get()];
    Ok(correction_at(model, &source, eps, t, &eta, interval, &opts.ls)?.1)
}

/// Least-squares slope of log y against log x.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
