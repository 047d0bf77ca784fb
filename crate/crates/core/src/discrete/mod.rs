//! Discrete charts, fields on them, and the ansatz W, Z^i transplanted onto
//! a chart.

pub mod radial;
pub mod tensor;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bubble::{Dimension, Profile};
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;

pub use radial::{RadialGrid, RadialSpec, MIN_NODES_PER_DELTA};
pub use tensor::{TensorGrid, TensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridSpec {
    Radial(RadialSpec),
    Tensor(TensorSpec),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Radial(RadialSpec::default())
    }
}

impl GridSpec {
    /// The same family at twice the resolution.
    pub fn refined(&self) -> GridSpec {
        match *self {
            GridSpec::Radial(s) => GridSpec::Radial(RadialSpec {
                hz: 0.5 * s.hz,
                growth: 0.5 * s.growth,
                max_cells: 2 * s.max_cells,
            }),
            GridSpec::Tensor(s) => GridSpec::Tensor(TensorSpec { n: 2 * s.n, ..s }),
        }
    }

    /// Whether the chart depends on delta (and so is rebuilt when t moves).
    pub fn is_adaptive(&self) -> bool {
        matches!(self, GridSpec::Radial(_))
    }
}

#[derive(Debug, Clone)]
pub enum ChartGrid {
    Radial(RadialGrid),
    Tensor(TensorGrid),
}

impl ChartGrid {
    /// Build a chart for concentration scale delta. Tensor charts ignore delta.
    pub fn build(model: &ManifoldModel, spec: &GridSpec, delta: f64) -> Result<ChartGrid> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(BlabError::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(match spec {
            GridSpec::Radial(s) => ChartGrid::Radial(RadialGrid::new(model, delta, *s)?),
            GridSpec::Tensor(s) => ChartGrid::Tensor(TensorGrid::new(model, *s)?),
        })
    }

    pub fn dim(&self) -> Dimension {
        match self {
            ChartGrid::Radial(g) => g.m,
            ChartGrid::Tensor(g) => g.m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ChartGrid::Radial(_) => "radial",
            ChartGrid::Tensor(_) => "tensor",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ChartGrid::Radial(g) => g.len(),
            ChartGrid::Tensor(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weights including sqrt(det g).
    pub fn weights(&self) -> &[f64] {
        match self {
            ChartGrid::Radial(g) => &g.weights,
            ChartGrid::Tensor(g) => &g.weights,
        }
    }

    pub fn a_nodes(&self) -> &[f64] {
        match self {
            ChartGrid::Radial(g) => &g.a_nodes,
            ChartGrid::Tensor(g) => &g.a_nodes,
        }
    }

    /// Chart coordinates of node i (radial nodes sit on the first axis).
    pub fn position(&self, i: usize) -> Vec<f64> {
        match self {
            ChartGrid::Radial(g) => {
                let mut y = vec![0.0; g.m.get()];
                y[0] = g.nodes[i];
                y
            }
            ChartGrid::Tensor(g) => g.coords(i),
        }
    }

    /// Node spacing at the chart origin.
    pub fn origin_spacing(&self) -> f64 {
        match self {
            ChartGrid::Radial(g) => g.nodes[1] - g.nodes[0],
            ChartGrid::Tensor(g) => g.spacing,
        }
    }

    pub fn origin_index(&self) -> usize {
        match self {
            ChartGrid::Radial(_) => 0,
            ChartGrid::Tensor(g) => g.origin(),
        }
    }

    /// Number of kernel directions the chart can represent: Z^0 only on a
    /// radial chart, Z^0..Z^m on a tensor chart.
    pub fn kernel_count(&self) -> usize {
        match self {
            ChartGrid::Radial(_) => 1,
            ChartGrid::Tensor(g) => g.m.get() + 1,
        }
    }

    /// The discrete operator of <., .>_H.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ChartGrid::Radial(g) => g.op.apply(u),
            ChartGrid::Tensor(g) => g.apply(u),
        }
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
        let x = match self {
            ChartGrid::Radial(g) => g.op.solve(b),
            ChartGrid::Tensor(g) => g.solve(b, x0)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BlabError::LinearSolve("non-finite solution".into()));
        }
        Ok(x)
    }

    /// Interpolate nodal values at chart point y.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> f64 {
        match self {
            ChartGrid::Radial(g) => g.interpolate(values, y.iter().map(|v| v * v).sum::<f64>().sqrt()),
            ChartGrid::Tensor(g) => g.interpolate(values, y),
        }
    }

    pub fn check_resolution(&self, delta: f64) -> Result<()> {
        let per = delta / self.origin_spacing();
        let required = match self {
            ChartGrid::Radial(_) => MIN_NODES_PER_DELTA,
            ChartGrid::Tensor(g) => g.min_nodes_per_delta,
        };
        if per < required * (1.0 - 1e-9) {
            return Err(BlabError::UnderResolved {
                nodes_per_delta: per,
                required,
            });
        }
        Ok(())
    }
}

/// Nodal values on a chart.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub values: Vec<f64>,
    pub chart: Arc<ChartGrid>,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>, chart: Arc<ChartGrid>) -> Result<Self> {
        if values.len() != chart.len() {
            return Err(BlabError::InvalidParameter(format!(
                "field has {} values for a chart of {} nodes",
                values.len(),
                chart.len()
            )));
        }
        Ok(DiscreteField { values, chart })
    }

    pub fn zeros(chart: Arc<ChartGrid>) -> Self {
        DiscreteField {
            values: vec![0.0; chart.len()],
            chart,
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(chart: Arc<ChartGrid>, f: F) -> Self {
        let values = (0..chart.len()).map(|i| f(&chart.position(i))).collect();
        DiscreteField { values, chart }
    }

    pub fn integral(&self) -> f64 {
        dot(&self.values, self.chart.weights())
    }

    pub fn inner_h(&self, other: &[f64]) -> f64 {
        dot(&self.chart.apply(&self.values), other)
    }

    pub fn norm_h(&self) -> f64 {
        norm_h(&self.chart, &self.values)
    }

    pub fn norm_ls(&self, s: f64) -> f64 {
        norm_ls(&self.chart, &self.values, s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_h(chart: &ChartGrid, v: &[f64]) -> f64 {
    dot(&chart.apply(v), v).max(0.0).sqrt()
}

pub fn norm_ls(chart: &ChartGrid, v: &[f64], s: f64) -> f64 {
    chart
        .weights()
        .iter()
        .zip(v)
        .map(|(w, x)| w * x.abs().powf(s))
        .sum::<f64>()
        .powf(1.0 / s)
}

/// Parameters of the ansatz W_{delta, eta} with delta = sqrt(|eps| t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub eps: f64,
    pub t: f64,
    pub eta: Vec<f64>,
    pub t_interval: (f64, f64),
}

impl AnsatzParams {
    pub fn new(eps: f64, t: f64, eta: Vec<f64>, t_interval: (f64, f64)) -> Result<Self> {
        if eps == 0.0 || !eps.is_finite() {
            return Err(BlabError::InvalidParameter(format!("eps must be nonzero and finite, got {eps}")));
        }
        let (lo, hi) = t_interval;
        if !(lo > 0.0 && hi > lo) {
            return Err(BlabError::InvalidParameter(format!("t interval [{lo}, {hi}] must satisfy 0 < alpha < beta")));
        }
        if !(t >= lo && t <= hi) {
            return Err(BlabError::TOutOfInterval { t, alpha: lo, beta: hi });
        }
        Ok(AnsatzParams { eps, t, eta, t_interval })
    }

    pub fn delta(&self) -> f64 {
        (self.eps.abs() * self.t).sqrt()
    }

    /// Exponent p = 2* - eps of the nonlinearity's primitive.
    pub fn power(&self, m: Dimension) -> f64 {
        m.two_star() - self.eps
    }
}

fn check_ansatz(model: &ManifoldModel, chart: &ChartGrid, params: &AnsatzParams) -> Result<()> {
    let m = model.dim();
    if chart.dim() != m {
        return Err(BlabError::InvalidParameter("chart and model dimensions differ".into()));
    }
    if params.eta.len() != m.get() {
        return Err(BlabError::InvalidParameter(format!("eta must have {} entries", m.get())));
    }
    if params.t < params.t_interval.0 || params.t > params.t_interval.1 {
        return Err(BlabError::TOutOfInterval {
            t: params.t,
            alpha: params.t_interval.0,
            beta: params.t_interval.1,
        });
    }
    if matches!(chart, ChartGrid::Radial(_)) && params.eta.iter().any(|v| *v != 0.0) {
        return Err(BlabError::NotRadial("a radial chart only carries eta = 0".into()));
    }
    chart.check_resolution(params.delta())
}

/// Evaluate chi(|y|) delta^(-(m-2)/2) F(y/delta - eta) on the nodes.
fn transplant<F: Fn(&[f64]) -> f64>(
    model: &ManifoldModel,
    chart: &Arc<ChartGrid>,
    params: &AnsatzParams,
    f: F,
) -> DiscreteField {
    let m = model.dim();
    let delta = params.delta();
    let scale = delta.powf(-m.k());
    let mut z = vec![0.0; m.get()];
    let values = (0..chart.len())
        .map(|i| {
            let y = chart.position(i);
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let chi = model.cutoff.value(r);
            if chi == 0.0 {
                return 0.0;
            }
            for q in 0..z.len() {
                z[q] = y[q] / delta - params.eta[q];
            }
            chi * scale * f(&z)
        })
        .collect();
    DiscreteField {
        values,
        chart: chart.clone(),
    }
}

/// W = chi(y) delta^(-(m-2)/2) U(y/delta - eta).
pub fn build_w(model: &ManifoldModel, chart: &Arc<ChartGrid>, params: &AnsatzParams) -> Result<DiscreteField> {
    check_ansatz(model, chart, params)?;
    let p = Profile::new(model.dim());
    Ok(transplant(model, chart, params, |z| p.g(z.iter().map(|v| v * v).sum())))
}

/// Z^i = chi(y) delta^(-(m-2)/2) V_i(y/delta - eta), with V_0 = -kU - z.grad U
/// and V_i = dU/dz_i.
pub fn build_z(model: &ManifoldModel, chart: &Arc<ChartGrid>, params: &AnsatzParams, i: usize) -> Result<DiscreteField> {
    check_ansatz(model, chart, params)?;
    let m = model.dim().get();
    if i > m {
        return Err(BlabError::IndexOutOfRange { index: i, max: m });
    }
    if i >= chart.kernel_count() {
        return Err(BlabError::NotRadial(format!("Z^{i} is not representable on a {} chart", chart.kind())));
    }
    let p = Profile::new(model.dim());
    Ok(if i == 0 {
        transplant(model, chart, params, |z| p.v0_s(z.iter().map(|v| v * v).sum()))
    } else {
        transplant(model, chart, params, |z| z[i - 1] * 2.0 * p.g1(z.iter().map(|v| v * v).sum()))
    })
}

/// All kernel fields the chart can carry.
pub fn build_kernel(model: &ManifoldModel, chart: &Arc<ChartGrid>, params: &AnsatzParams) -> Result<Vec<DiscreteField>> {
    (0..chart.kernel_count()).map(|i| build_z(model, chart, params, i)).collect()
}

/// J_eps(u) = (1/2) <u, u>_H - (1/p) int a (u+)^p with p = 2* - eps.
pub fn energy_of(chart: &ChartGrid, values: &[f64], p: f64) -> Result<f64> {
    let quad = 0.5 * dot(&chart.apply(values), values);
    let pow: f64 = chart
        .weights()
        .iter()
        .zip(chart.a_nodes())
        .zip(values)
        .map(|((w, a), u)| w * a * u.max(0.0).powf(p))
        .sum();
    let j = quad - pow / p;
    if !j.is_finite() {
        return Err(BlabError::QuadratureFailure("energy_exact"));
    }
    Ok(j)
}

/// Chart quadrature of J_eps on a field.
pub fn energy_exact(model: &ManifoldModel, eps: f64, w: &DiscreteField) -> Result<f64> {
    energy_of(&w.chart, &w.values, model.dim().two_star() - eps)
}

/// adjoint_apply: u with <u, phi>_H = int v phi for every grid function phi.
pub fn adjoint_apply(chart: &ChartGrid, v: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = v.iter().zip(chart.weights()).map(|(x, w)| x * w).collect();
    chart.solve(&rhs, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::model::flat;

    #[test]
    fn tensor_operator_is_symmetric() {
        let m = Dimension::new(3).unwrap();
        let model = flat(m, 1.0).unwrap().with_isotropic_weight(1.0, 2.0).unwrap().with_h(1.0);
        let spec = GridSpec::Tensor(TensorSpec::new(8));
        let chart = ChartGrid::build(&model, &spec, 1.0).unwrap();
        let u: Vec<f64> = (0..chart.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..chart.len()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let a = dot(&chart.apply(&u), &v);
        let b = dot(&u, &chart.apply(&v));
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn tensor_constant_field_sees_only_mass() {
        let m = Dimension::new(3).unwrap();
        let model = flat(m, 1.0).unwrap().with_h(2.0);
        let chart = ChartGrid::build(&model, &GridSpec::Tensor(TensorSpec::new(6)), 1.0).unwrap();
        let one = vec![1.0; chart.len()];
        let au = chart.apply(&one);
        for (x, w) in au.iter().zip(chart.weights()) {
            assert!((x - 2.0 * w).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let m = Dimension::new(9).unwrap();
        let model = flat(m, 1.0).unwrap();
        let chart = ChartGrid::build(&model, &GridSpec::Radial(RadialSpec { hz: 1.0 / 16.0, growth: 1e-2, max_cells: 1000 }), 0.05).unwrap();
        let z = DiscreteField::zeros(Arc::new(chart));
        assert_eq!(energy_exact(&model, 0.01, &z).unwrap(), 0.0);
    }
}
