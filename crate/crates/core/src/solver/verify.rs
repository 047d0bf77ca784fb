//! A posteriori checks on an assembled solution: the strong-form residual of
//! -div_g(a grad u) + a h u = a (u+)^(p-1), its behavior under refinement,
//! concentration at the chart origin and the size of grad a . grad W.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bubble::Profile;
use crate::discrete::{dot, AnsatzParams, ChartGrid, DiscreteField, GridSpec};
use crate::error::Result;
use crate::geometry::model::ManifoldModel;
use crate::solver::reduced::{log_slope, reduced_solve, ReduceOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// sqrt(r^T A^(-1) r), the H-dual norm of the weak residual
    pub dual: f64,
    /// the same norm of the nonlinearity a (u+)^(p-1)
    pub source_dual: f64,
    /// dual / source_dual (0 for u = 0)
    pub relative: f64,
    /// discrete L2 norm of the nodal residual, relative to that of the source
    pub relative_l2: f64,
}

/// Residual of u on its own chart.
pub fn residual_report(model: &ManifoldModel, eps: f64, u: &DiscreteField) -> Result<ResidualReport> {
    let chart = &u.chart;
    let p = model.dim().two_star() - eps;
    let src: Vec<f64> = chart
        .weights()
        .iter()
        .zip(chart.a_nodes())
        .zip(&u.values)
        .map(|((w, a), v)| w * a * v.max(0.0).powf(p - 1.0))
        .collect();
    let au = chart.apply(&u.values);
    let r: Vec<f64> = au.iter().zip(&src).map(|(a, b)| a - b).collect();
    let dual_of = |v: &[f64]| -> Result<f64> {
        if v.iter().all(|x| *x == 0.0) {
            return Ok(0.0);
        }
        Ok(dot(v, &chart.solve(v, None)?).max(0.0).sqrt())
    };
    let l2_of = |v: &[f64]| -> f64 {
        v.iter()
            .zip(chart.weights())
            .map(|(x, w)| if *w > 0.0 { x * x / w } else { 0.0 })
            .sum::<f64>()
            .sqrt()
    };
    let dual = dual_of(&r)?;
    let source_dual = dual_of(&src)?;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else if a == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ResidualReport {
        dual,
        source_dual,
        relative: ratio(dual, source_dual),
        relative_l2: ratio(l2_of(&r), l2_of(&src)),
    })
}

/// Interpolate u onto another chart of the same model.
pub fn transfer(u: &DiscreteField, target: &Arc<ChartGrid>) -> DiscreteField {
    let values = (0..target.len()).map(|i| u.chart.interpolate(&u.values, &target.position(i))).collect();
    DiscreteField {
        values,
        chart: target.clone(),
    }
}

/// Residual of u measured on a reference chart.
pub fn reference_residual(model: &ManifoldModel, eps: f64, u: &DiscreteField, reference: &Arc<ChartGrid>) -> Result<ResidualReport> {
    residual_report(model, eps, &transfer(u, reference))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub nodes: usize,
    pub spacing: f64,
    pub t_eps: f64,
    pub own: ResidualReport,
    pub reference: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub eps: f64,
    pub levels: Vec<RefinementLevel>,
    pub reference_nodes: usize,
    /// log2 of successive reference-residual ratios
    pub orders: Vec<f64>,
    pub decreasing: bool,
}

/// Solve at `levels` successively refined grids and measure every solution
/// on a common chart one refinement beyond the finest.
pub fn refinement_study(
    model: &ManifoldModel,
    eps: f64,
    spec: &GridSpec,
    levels: usize,
    opts: &ReduceOptions,
) -> Result<RefinementStudy> {
    let mut specs = vec![*spec];
    for _ in 1..levels.max(1) {
        let s = specs.last().unwrap().refined();
        specs.push(s);
    }
    let sols: Vec<_> = specs.iter().map(|s| reduced_solve(model, eps, s, opts)).collect::<Result<_>>()?;
    let finest = sols.last().unwrap();
    let ref_spec = specs.last().unwrap().refined();
    let reference = Arc::new(ChartGrid::build(model, &ref_spec, (eps.abs() * finest.t_eps).sqrt())?);
    let mut out = Vec::with_capacity(sols.len());
    for s in &sols {
        out.push(RefinementLevel {
            nodes: s.solution.chart.len(),
            spacing: s.solution.chart.origin_spacing(),
            t_eps: s.t_eps,
            own: residual_report(model, eps, &s.solution)?,
            reference: reference_residual(model, eps, &s.solution, &reference)?,
        });
    }
    let orders: Vec<f64> = out
        .windows(2)
        .map(|w| (w[0].reference.relative / w[1].reference.relative).log2())
        .collect();
    let decreasing = out.windows(2).all(|w| w[1].reference.relative < w[0].reference.relative);
    Ok(RefinementStudy {
        eps,
        levels: out,
        reference_nodes: reference.len(),
        orders,
        decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub argmax_index: usize,
    /// distance of the argmax node from the chart origin
    pub argmax_distance: f64,
    pub cell: f64,
    pub within_cell: bool,
    pub peak: f64,
    /// radius where u first drops to half its peak along the first axis
    pub r_half: f64,
    /// r_half / rho_h: the delta of a bubble with the same half width
    pub width: f64,
    /// width / sqrt|eps|, to be compared with sqrt(t0)
    pub width_ratio: f64,
    pub sqrt_t0: f64,
    pub width_error: f64,
}

/// Half-maximum radius of the unit bubble: sqrt(2^(2/(m-2)) - 1).
pub fn half_width_unit(m: usize) -> f64 {
    (2f64.powf(2.0 / (m as f64 - 2.0)) - 1.0).sqrt()
}

pub fn concentration(u: &DiscreteField, eps: f64, t0: f64) -> ConcentrationReport {
    let chart = &u.chart;
    let (imax, peak) = u
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let pos = chart.position(imax);
    let dist = pos.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cell = chart.origin_spacing();
    let m = chart.dim().get();

    let step = cell / 16.0;
    let mut y = vec![0.0; m];
    let mut prev = (0.0, chart.interpolate(&u.values, &y));
    let mut r_half = f64::NAN;
    let limit = match chart.as_ref() {
        ChartGrid::Radial(g) => *g.nodes.last().unwrap(),
        ChartGrid::Tensor(g) => g.half_width,
    };
    let mut r = step;
    while r < limit {
        y[0] = r;
        let v = chart.interpolate(&u.values, &y);
        if v <= 0.5 * peak {
            let s = (prev.1 - 0.5 * peak) / (prev.1 - v);
            r_half = prev.0 + s * (r - prev.0);
            break;
        }
        prev = (r, v);
        r += step;
    }
    let width = r_half / half_width_unit(m);
    let width_ratio = width / eps.abs().sqrt();
    let sqrt_t0 = t0.sqrt();
    ConcentrationReport {
        argmax_index: imax,
        argmax_distance: dist,
        cell,
        within_cell: dist <= cell * (1.0 + 1e-12),
        peak,
        r_half,
        width,
        width_ratio,
        sqrt_t0,
        width_error: (width_ratio - sqrt_t0).abs() / sqrt_t0,
    }
}

/// || <grad a, grad W>_g ||_q on the chart, with W evaluated in closed form.
pub fn weighted_gradient_norm(model: &ManifoldModel, chart: &ChartGrid, params: &AnsatzParams, q: f64) -> f64 {
    let m = model.dim();
    let n = m.get();
    let prof = Profile::new(m);
    let delta = params.delta();
    let scale = delta.powf(-m.k());
    let flat = model.metric_hessian().iter().all(|v| *v == 0.0);
    let mut sum = 0.0;
    let mut z = vec![0.0; n];
    let mut gw = vec![0.0; n];
    let mut ga = vec![0.0; n];
    for (i, w) in chart.weights().iter().enumerate() {
        let y = chart.position(i);
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let chi = model.cutoff.value(r);
        let dchi = model.cutoff.derivative(r);
        if chi == 0.0 && dchi == 0.0 {
            continue;
        }
        for c in 0..n {
            z[c] = y[c] / delta - params.eta[c];
        }
        let s: f64 = z.iter().map(|v| v * v).sum();
        let uz = prof.g(s);
        let g1 = prof.g1(s);
        for c in 0..n {
            let radial = if r > 0.0 { dchi * y[c] / r } else { 0.0 };
            gw[c] = scale * (radial * uz + chi * 2.0 * g1 * z[c] / delta);
            ga[c] = model.a_grad[c] + (0..n).map(|d| model.a_hess[c * n + d] * y[d]).sum::<f64>();
        }
        let v = if flat {
            dot(&ga, &gw)
        } else {
            let gi = model.metric_inverse_unchecked(&y);
            (0..n).map(|c| (0..n).map(|d| ga[c] * gi[(c, d)] * gw[d]).sum::<f64>()).sum()
        };
        sum += w * v.abs().powf(q);
    }
    sum.powf(1.0 / q)
}

/// Exponent q = m s / (m + 2 s) paired with s = s_eps.
pub fn gradient_exponent(m: usize, eps: f64) -> f64 {
    let s = crate::solver::ls::s_eps(m, eps);
    let mf = m as f64;
    mf * s / (mf + 2.0 * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientScaling {
    pub deltas: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
}

/// ||grad a . grad W||_q along an eps ladder at fixed t; the slope in delta
/// should be 2.
pub fn gradient_scaling(model: &ManifoldModel, ladder: &[f64], t: f64, spec: &GridSpec) -> Result<GradientScaling> {
    let n = model.dim().get();
    let mut deltas = Vec::new();
    let mut norms = Vec::new();
    for &eps in ladder {
        let params = AnsatzParams::new(eps, t, vec![0.0; n], (0.5 * t, 2.0 * t))?;
        let chart = ChartGrid::build(model, spec, params.delta())?;
        let q = gradient_exponent(n, eps);
        deltas.push(params.delta());
        norms.push(weighted_gradient_norm(model, &chart, &params, q));
    }
    let slope = log_slope(&deltas, &norms);
    Ok(GradientScaling { deltas, norms, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::discrete::RadialSpec;
    use crate::geometry::model::flat;

    #[test]
    fn zero_field_has_zero_residual() {
        let model = flat(Dimension::new(9).unwrap(), 1.0).unwrap().with_h(1.0);
        let spec = GridSpec::Radial(RadialSpec {
            hz: 1.0 / 16.0,
            growth: 1e-2,
            max_cells: 10_000,
        });
        let chart = Arc::new(ChartGrid::build(&model, &spec, 0.05).unwrap());
        let r = residual_report(&model, 0.01, &DiscreteField::zeros(chart)).unwrap();
        assert_eq!(r.dual, 0.0);
        assert_eq!(r.relative, 0.0);
    }

    #[test]
    fn half_width_of_unit_bubble() {
        let m = 9;
        let p = Profile::new(Dimension::new(m).unwrap());
        let r = half_width_unit(m);
        assert!((p.u(r) / p.u(0.0) - 0.5).abs() < 1e-14);
    }
}
