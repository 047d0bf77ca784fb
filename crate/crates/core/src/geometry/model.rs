use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bubble::Dimension;
use crate::error::{BlabError, Result};

/// Radial cutoff: 1 on [0, r/2], 0 beyond r, quintic smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub radius: f64,
}

impl Cutoff {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(BlabError::InvalidParameter(format!("cutoff radius must be positive, got {radius}")));
        }
        Ok(Cutoff { radius })
    }

    pub fn value(&self, rho: f64) -> f64 {
        let h = 0.5 * self.radius;
        let s = ((rho - h) / h).clamp(0.0, 1.0);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        let h = 0.5 * self.radius;
        let s = (rho - h) / h;
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        -30.0 * s * s * (1.0 - s) * (1.0 - s) / h
    }

    pub fn second_derivative(&self, rho: f64) -> f64 {
        let h = 0.5 * self.radius;
        let s = (rho - h) / h;
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (h * h)
    }

    /// sup |chi'| = 15 / (8 (r/2)) = 3.75 / r.
    pub fn max_slope(&self) -> f64 {
        3.75 / self.radius
    }
}

/// Second-order normal-coordinate model of (M, g) at a point, with quadratic
/// weight a and constant potential h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    m: Dimension,
    /// H[i][j][r][k] flattened as ((i*m + j)*m + r)*m + k
    metric_hessian: Vec<f64>,
    pub a0: f64,
    pub a_grad: Vec<f64>,
    /// row-major m x m
    pub a_hess: Vec<f64>,
    pub h0: f64,
    pub injectivity_radius: f64,
    pub cutoff: Cutoff,
    pub name: String,
}

const SYM_TOL: f64 = 1e-12;

impl ManifoldModel {
    pub fn new(
        m: Dimension,
        metric_hessian: Vec<f64>,
        a0: f64,
        a_grad: Vec<f64>,
        a_hess: Vec<f64>,
        h0: f64,
        injectivity_radius: f64,
    ) -> Result<Self> {
        let n = m.get();
        if metric_hessian.len() != n.pow(4) || a_grad.len() != n || a_hess.len() != n * n {
            return Err(BlabError::InvalidParameter("model arrays have inconsistent sizes".into()));
        }
        if !(a0 > 0.0) {
            return Err(BlabError::InvalidParameter(format!("a(xi0) must be positive, got {a0}")));
        }
        if !h0.is_finite() || metric_hessian.iter().chain(&a_grad).chain(&a_hess).any(|x| !x.is_finite()) {
            return Err(BlabError::InvalidParameter("model data must be finite".into()));
        }
        let idx = |i: usize, j: usize, r: usize, k: usize| ((i * n + j) * n + r) * n + k;
        for i in 0..n {
            for j in 0..n {
                for r in 0..n {
                    for k in 0..n {
                        let v = metric_hessian[idx(i, j, r, k)];
                        if (v - metric_hessian[idx(j, i, r, k)]).abs() > SYM_TOL
                            || (v - metric_hessian[idx(i, j, k, r)]).abs() > SYM_TOL
                        {
                            return Err(BlabError::AsymmetricJet(format!(
                                "H[{i}][{j}][{r}][{k}] breaks (i,j) or (r,k) symmetry"
                            )));
                        }
                    }
                }
                if (a_hess[i * n + j] - a_hess[j * n + i]).abs() > SYM_TOL {
                    return Err(BlabError::AsymmetricJet(format!("D^2 a is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(ManifoldModel {
            m,
            metric_hessian,
            a0,
            a_grad,
            a_hess,
            h0,
            injectivity_radius,
            cutoff: Cutoff::new(injectivity_radius)?,
            name: "custom".into(),
        })
    }

    pub fn dim(&self) -> Dimension {
        self.m
    }

    pub fn hessian(&self, i: usize, j: usize, r: usize, k: usize) -> f64 {
        let n = self.m.get();
        self.metric_hessian[((i * n + j) * n + r) * n + k]
    }

    pub fn metric_hessian(&self) -> &[f64] {
        &self.metric_hessian
    }

    fn check_chart(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.m.get() {
            return Err(BlabError::InvalidParameter("point has wrong dimension".into()));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= self.injectivity_radius {
            return Err(BlabError::ChartExit {
                norm,
                radius: self.injectivity_radius,
            });
        }
        Ok(())
    }

    /// g^{ij}(y) = delta_ij + 1/2 H_ijrk y_r y_k without the chart check.
    pub fn metric_inverse_unchecked(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.m.get();
        let mut g = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for r in 0..n {
                    for k in 0..n {
                        s += self.hessian(i, j, r, k) * y[r] * y[k];
                    }
                }
                g[(i, j)] += 0.5 * s;
            }
        }
        g
    }

    pub fn metric_inverse_at(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_chart(y)?;
        Ok(self.metric_inverse_unchecked(y))
    }

    pub fn sqrt_det_g_unchecked(&self, y: &[f64]) -> f64 {
        let n = self.m.get();
        let mut s = 0.0;
        for q in 0..n {
            for r in 0..n {
                for k in 0..n {
                    s += self.hessian(q, q, r, k) * y[r] * y[k];
                }
            }
        }
        1.0 - 0.25 * s
    }

    pub fn sqrt_det_g(&self, y: &[f64]) -> Result<f64> {
        self.check_chart(y)?;
        Ok(self.sqrt_det_g_unchecked(y))
    }

    pub fn scalar_curvature(&self) -> f64 {
        let n = self.m.get();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.hessian(i, i, j, j) - self.hessian(i, j, i, j);
            }
        }
        s
    }

    /// Weight a(y) = a0 + grad a . y + 1/2 y^T D^2 a y.
    pub fn a_at(&self, y: &[f64]) -> f64 {
        let n = self.m.get();
        let mut v = self.a0;
        for i in 0..n {
            v += self.a_grad[i] * y[i];
            for j in 0..n {
                v += 0.5 * self.a_hess[i * n + j] * y[i] * y[j];
            }
        }
        v
    }

    pub fn a_hess_matrix(&self) -> DMatrix<f64> {
        let n = self.m.get();
        DMatrix::from_row_slice(n, n, &self.a_hess)
    }

    pub fn laplacian_a(&self) -> f64 {
        let n = self.m.get();
        (0..n).map(|i| self.a_hess[i * n + i]).sum()
    }

    pub fn a_grad_norm(&self) -> f64 {
        self.a_grad.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn with_h(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Quadratic weight a(y) = a0 + (c/2)|y|^2.
    pub fn with_isotropic_weight(mut self, a0: f64, c: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(BlabError::InvalidParameter(format!("a(xi0) must be positive, got {a0}")));
        }
        let n = self.m.get();
        self.a0 = a0;
        self.a_grad = vec![0.0; n];
        self.a_hess = (0..n * n).map(|q| if q / n == q % n { c } else { 0.0 }).collect();
        Ok(self)
    }

    pub fn with_weight(mut self, a0: f64, a_grad: Vec<f64>, a_hess: Vec<f64>) -> Result<Self> {
        let m = self.m;
        let rebuilt = ManifoldModel::new(m, self.metric_hessian.clone(), a0, a_grad, a_hess, self.h0, self.injectivity_radius)?;
        self.a0 = rebuilt.a0;
        self.a_grad = rebuilt.a_grad;
        self.a_hess = rebuilt.a_hess;
        Ok(self)
    }

    /// True when the model is invariant under rotations about the origin:
    /// the metric jet is a multiple of the round-sphere jet, grad a = 0 and
    /// D^2 a is a multiple of the identity.
    pub fn is_rotationally_symmetric(&self) -> bool {
        let n = self.m.get();
        let sphere = sphere_jet(n, 1.0);
        // flat index of (0, 0, 1, 1)
        let k = n + 1;
        let c = if sphere[k] != 0.0 {
            self.hessian(0, 0, 1, 1) / sphere[k]
        } else {
            0.0
        };
        let metric_ok = self
            .metric_hessian
            .iter()
            .zip(&sphere)
            .all(|(h, s)| (h - c * s).abs() <= 1e-12 * (1.0 + h.abs()));
        let hd = self.a_hess[0];
        let weight_ok = self.a_grad.iter().all(|g| *g == 0.0)
            && (0..n * n).all(|q| {
                let target = if q / n == q % n { hd } else { 0.0 };
                (self.a_hess[q] - target).abs() <= 1e-12 * (1.0 + hd.abs())
            });
        metric_ok && weight_ok
    }

    /// Radial metric data at |y| = rho: (g^{rr}, sqrt(det g)).
    pub fn radial_metric(&self, rho: f64) -> (f64, f64) {
        let n = self.m.get();
        let mut y = vec![0.0; n];
        y[0] = rho;
        let g = self.metric_inverse_unchecked(&y);
        (g[(0, 0)], self.sqrt_det_g_unchecked(&y))
    }

    /// Even under y -> -y (always true for jets with grad a = 0).
    pub fn is_even(&self) -> bool {
        self.a_grad.iter().all(|g| *g == 0.0)
    }
}

/// Second derivatives of g^{ij} for the round sphere of radius rho in normal
/// coordinates: (1/(3 rho^2)) (2 d_ij d_rk - d_ir d_jk - d_ik d_jr).
pub fn sphere_jet(n: usize, rho: f64) -> Vec<f64> {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let c = 1.0 / (3.0 * rho * rho);
    let mut h = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for r in 0..n {
                for k in 0..n {
                    h[((i * n + j) * n + r) * n + k] =
                        c * (2.0 * d(i, j) * d(r, k) - d(i, r) * d(j, k) - d(i, k) * d(j, r));
                }
            }
        }
    }
    h
}

/// Flat chart: H = 0, a = 1, h = 0.
pub fn flat(m: Dimension, chart_radius: f64) -> Result<ManifoldModel> {
    let n = m.get();
    Ok(ManifoldModel::new(m, vec![0.0; n.pow(4)], 1.0, vec![0.0; n], vec![0.0; n * n], 0.0, chart_radius)?
        .with_name("flat"))
}

/// Round sphere of curvature radius `rho`.
pub fn round_sphere(m: Dimension, rho: f64, chart_radius: f64) -> Result<ManifoldModel> {
    if !(rho > 0.0) {
        return Err(BlabError::InvalidParameter(format!("sphere radius must be positive, got {rho}")));
    }
    let n = m.get();
    Ok(ManifoldModel::new(m, sphere_jet(n, rho), 1.0, vec![0.0; n], vec![0.0; n * n], 0.0, chart_radius)?
        .with_name("round_sphere"))
}

/// Random metric jet symmetrized in (i,j) and (r,k), scaled by `amplitude`.
pub fn perturbed_flat(m: Dimension, seed: u64, amplitude: f64, chart_radius: f64) -> Result<ManifoldModel> {
    let n = m.get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n.pow(4)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = symmetrize_jet(n, &raw, amplitude);
    Ok(ManifoldModel::new(m, h, 1.0, vec![0.0; n], vec![0.0; n * n], 0.0, chart_radius)?.with_name("perturbed_flat"))
}

/// Average over the (i,j) and (r,k) transpositions.
pub fn symmetrize_jet(n: usize, raw: &[f64], scale: f64) -> Vec<f64> {
    let idx = |i: usize, j: usize, r: usize, k: usize| ((i * n + j) * n + r) * n + k;
    let mut h = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for r in 0..n {
                for k in 0..n {
                    h[idx(i, j, r, k)] = 0.25
                        * scale
                        * (raw[idx(i, j, r, k)] + raw[idx(j, i, r, k)] + raw[idx(i, j, k, r)] + raw[idx(j, i, k, r)]);
                }
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_profile() {
        let c = Cutoff::new(1.0).unwrap();
        assert_eq!(c.value(0.2), 1.0);
        assert_eq!(c.value(1.2), 0.0);
        assert!((c.value(0.75) - 0.5).abs() < 1e-15);
        assert!((c.derivative(0.75).abs() - c.max_slope()).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_jet_rejected() {
        let m = Dimension::new(3).unwrap();
        let mut h = vec![0.0; 81];
        h[1] = 1.0;
        let r = ManifoldModel::new(m, h, 1.0, vec![0.0; 3], vec![0.0; 9], 0.0, 1.0);
        assert!(matches!(r, Err(BlabError::AsymmetricJet(_))));
    }

    #[test]
    fn chart_exit() {
        let m = Dimension::new(3).unwrap();
        let f = flat(m, 0.5).unwrap();
        assert!(matches!(f.metric_inverse_at(&[0.6, 0.0, 0.0]), Err(BlabError::ChartExit { .. })));
    }

    #[test]
    fn symmetry_detection() {
        let m = Dimension::new(4).unwrap();
        assert!(round_sphere(m, 2.0, 1.0).unwrap().is_rotationally_symmetric());
        assert!(!perturbed_flat(m, 3, 0.1, 1.0).unwrap().is_rotationally_symmetric());
        let w = flat(m, 1.0).unwrap().with_isotropic_weight(1.0, 2.0).unwrap();
        assert!(w.is_rotationally_symmetric());
    }
}
