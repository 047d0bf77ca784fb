use serde::{Deserialize, Serialize};

use crate::energy::phi::ThetaConvention;
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::poly::Poly;

/// M x_omega K with a flat fiber K of dimension `fiber_dim`, metric g + omega^2 kappa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedProduct {
    pub base: ManifoldModel,
    pub fiber_dim: usize,
    pub omega0: f64,
    pub omega_grad: Vec<f64>,
    /// row-major m x m
    pub omega_hess: Vec<f64>,
    pub h_invariant: bool,
}

/// Value, gradient and Hessian of the induced weight at the base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightJet {
    pub a0: f64,
    pub a_grad: Vec<f64>,
    pub a_hess: Vec<f64>,
}

impl WarpedProduct {
    pub fn new(
        base: ManifoldModel,
        fiber_dim: usize,
        omega0: f64,
        omega_grad: Vec<f64>,
        omega_hess: Vec<f64>,
        h_invariant: bool,
    ) -> Result<Self> {
        let n = base.dim().get();
        if fiber_dim == 0 {
            return Err(BlabError::InvalidParameter("fiber dimension must be at least 1".into()));
        }
        if !(omega0 > 0.0) {
            return Err(BlabError::InvalidParameter(format!("omega(xi0) must be positive, got {omega0}")));
        }
        if omega_grad.len() != n || omega_hess.len() != n * n {
            return Err(BlabError::InvalidParameter("omega jet has inconsistent sizes".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (omega_hess[i * n + j] - omega_hess[j * n + i]).abs() > 1e-12 {
                    return Err(BlabError::AsymmetricJet("D^2 omega is not symmetric".into()));
                }
            }
        }
        Ok(WarpedProduct {
            base,
            fiber_dim,
            omega0,
            omega_grad,
            omega_hess,
            h_invariant,
        })
    }

    pub fn m(&self) -> usize {
        self.base.dim().get()
    }

    /// Exponent of the induced weight a = omega^k: the fiber dimension.
    pub fn weight_exponent(&self) -> usize {
        self.fiber_dim
    }

    pub fn omega_at(&self, y: &[f64]) -> f64 {
        let n = self.m();
        let mut v = self.omega0;
        for i in 0..n {
            v += self.omega_grad[i] * y[i];
            for j in 0..n {
                v += 0.5 * self.omega_hess[i * n + j] * y[i] * y[j];
            }
        }
        v
    }

    pub fn omega_grad_at(&self, y: &[f64]) -> Vec<f64> {
        let n = self.m();
        (0..n)
            .map(|i| self.omega_grad[i] + (0..n).map(|j| self.omega_hess[i * n + j] * y[j]).sum::<f64>())
            .collect()
    }

    /// The fiber over the base point is minimal iff grad omega = 0.
    pub fn fiber_is_minimal(&self) -> bool {
        self.omega_grad.iter().all(|g| *g == 0.0)
    }

    /// Jet of a = omega^p at the base point by the chain rule.
    pub fn weight_jet_with_exponent(&self, p: f64) -> WeightJet {
        let n = self.m();
        let w = self.omega0;
        let a0 = w.powf(p);
        let a_grad = self.omega_grad.iter().map(|g| p * w.powf(p - 1.0) * g).collect();
        let mut a_hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a_hess[i * n + j] = p * w.powf(p - 1.0) * self.omega_hess[i * n + j]
                    + p * (p - 1.0) * w.powf(p - 2.0) * self.omega_grad[i] * self.omega_grad[j];
            }
        }
        WeightJet { a0, a_grad, a_hess }
    }

    pub fn weight_jet(&self) -> WeightJet {
        self.weight_jet_with_exponent(self.weight_exponent() as f64)
    }

    /// Delta omega / omega at the base point.
    pub fn laplacian_omega_ratio(&self) -> f64 {
        let n = self.m();
        (0..n).map(|i| self.omega_hess[i * n + i]).sum::<f64>() / self.omega0
    }

    /// The anisotropic problem on M: weight a = omega^k and the same h.
    pub fn reduce_to_anisotropic(&self) -> Result<ManifoldModel> {
        if !self.h_invariant {
            return Err(BlabError::FiberDependentPotential);
        }
        let jet = self.weight_jet();
        Ok(self.base.clone().with_weight(jet.a0, jet.a_grad, jet.a_hess)?.with_name("warped_reduction"))
    }

    /// Sigma_g(Gamma), so that Theta = h(Gamma) - Sigma_g(Gamma). Needs grad omega = 0.
    pub fn sigma_gamma(&self, conv: ThetaConvention) -> Result<f64> {
        if !self.fiber_is_minimal() {
            let g = self.omega_grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            return Err(BlabError::NotCritical("the fiber base point", g));
        }
        let mf = self.m() as f64;
        let s = self.base.scalar_curvature();
        Ok((mf - 2.0) / (4.0 * (mf - 1.0)) * s
            - conv.laplacian_coefficient(mf) * self.weight_exponent() as f64 * self.laplacian_omega_ratio())
    }

    /// omega as an explicit polynomial in the base coordinates.
    pub fn omega_poly(&self) -> Poly {
        let n = self.m();
        let mut p = Poly::affine(self.omega0, &self.omega_grad);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(&e, 0.5 * self.omega_hess[i * n + j]);
            }
        }
        p
    }
}

/// Flat-base identity omega * div(omega^k grad v) = omega^(k+1) Delta v + k omega^k grad omega . grad v,
/// checked exactly on polynomials. Returns the largest residual coefficient.
pub fn divergence_form_defect(omega: &Poly, v: &Poly, k: u32, coefficient: f64) -> f64 {
    let n = omega.nvars();
    let mut wk = Poly::constant(n, 1.0);
    for _ in 0..k {
        wk = wk.mul(omega);
    }
    let mut div = Poly::zero(n);
    let mut lap = Poly::zero(n);
    let mut cross = Poly::zero(n);
    for i in 0..n {
        let dv = v.derivative(i);
        div.add_assign_scaled(&wk.mul(&dv).derivative(i), 1.0);
        lap.add_assign_scaled(&dv.derivative(i), 1.0);
        cross.add_assign_scaled(&omega.derivative(i).mul(&dv), 1.0);
    }
    let lhs = omega.mul(&div);
    let mut rhs = wk.mul(omega).mul(&lap);
    rhs.add_assign_scaled(&wk.mul(&cross), coefficient);
    lhs.max_diff(&rhs)
}

/// Discrepancy of one resolution of the warped Laplacian check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpedDiscrepancy {
    pub step: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedCheck {
    pub coarse: WarpedDiscrepancy,
    pub fine: WarpedDiscrepancy,
    /// log2(coarse/fine); about 2 for the second-order stencil
    pub order: f64,
}

/// Laplace-Beltrami of u on the product chart (base coords y, fiber coords th)
/// by central differences of the flux sqrt(G) G^{ab} d_b u, G = g + omega^2 I_k.
fn product_laplacian<F: Fn(&[f64], &[f64]) -> f64>(wp: &WarpedProduct, u: &F, y: &[f64], th: &[f64], h: f64) -> f64 {
    let n = wp.m();
    let k = wp.fiber_dim;
    let dim = n + k;
    let split = |x: &[f64]| -> (Vec<f64>, Vec<f64>) { (x[..n].to_vec(), x[n..].to_vec()) };
    let eval = |x: &[f64]| {
        let (a, b) = split(x);
        u(&a, &b)
    };
    let metric = |x: &[f64]| {
        let (a, _) = split(x);
        let gi = wp.base.metric_inverse_unchecked(&a);
        let w = wp.omega_at(&a);
        let vol = wp.base.sqrt_det_g_unchecked(&a) * w.powi(k as i32);
        (gi, w, vol)
    };
    let mut x0 = y.to_vec();
    x0.extend_from_slice(th);
    let flux = |x: &[f64], a: usize| -> f64 {
        let (gi, w, vol) = metric(x);
        let mut grad = vec![0.0; dim];
        for b in 0..dim {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[b] += h;
            xm[b] -= h;
            grad[b] = (eval(&xp) - eval(&xm)) / (2.0 * h);
        }
        let mut f = 0.0;
        if a < n {
            for b in 0..n {
                f += gi[(a, b)] * grad[b];
            }
        } else {
            f = grad[a] / (w * w);
        }
        vol * f
    };
    let mut div = 0.0;
    for a in 0..dim {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[a] += h;
        xm[a] -= h;
        div += (flux(&xp, a) - flux(&xm, a)) / (2.0 * h);
    }
    let (_, _, vol) = metric(&x0);
    div / vol
}

/// Base Laplacian plus coefficient * g(grad omega, grad u)/omega, same stencil.
fn reduced_laplacian<F: Fn(&[f64], &[f64]) -> f64>(
    wp: &WarpedProduct,
    u: &F,
    y: &[f64],
    th: &[f64],
    h: f64,
    coefficient: f64,
) -> f64 {
    let n = wp.m();
    let eval = |a: &[f64]| u(a, th);
    let grad_at = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|b| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[b] += h;
                xm[b] -= h;
                (eval(&xp) - eval(&xm)) / (2.0 * h)
            })
            .collect()
    };
    let flux = |x: &[f64], a: usize| {
        let gi = wp.base.metric_inverse_unchecked(x);
        let g = grad_at(x);
        wp.base.sqrt_det_g_unchecked(x) * (0..n).map(|b| gi[(a, b)] * g[b]).sum::<f64>()
    };
    let mut div = 0.0;
    for a in 0..n {
        let mut xp = y.to_vec();
        let mut xm = y.to_vec();
        xp[a] += h;
        xm[a] -= h;
        div += (flux(&xp, a) - flux(&xm, a)) / (2.0 * h);
    }
    let lap = div / wp.base.sqrt_det_g_unchecked(y);
    let gi = wp.base.metric_inverse_unchecked(y);
    let gw = wp.omega_grad_at(y);
    let gu = grad_at(y);
    let mut cross = 0.0;
    for a in 0..n {
        for b in 0..n {
            cross += gi[(a, b)] * gw[a] * gu[b];
        }
    }
    lap + coefficient * cross / wp.omega_at(y)
}

/// Max over `points` of |Delta_{g + omega^2 kappa} u - (Delta_g u + c g(grad omega, grad u)/omega)|.
pub fn warped_laplacian_discrepancy<F: Fn(&[f64], &[f64]) -> f64>(
    wp: &WarpedProduct,
    u: &F,
    points: &[Vec<f64>],
    h: f64,
    coefficient: f64,
) -> Result<f64> {
    let n = wp.m();
    let mut worst: f64 = 0.0;
    for p in points {
        if p.len() != n {
            return Err(BlabError::InvalidParameter("sample point has wrong dimension".into()));
        }
        let th0 = vec![0.0; wp.fiber_dim];
        let u0 = u(p, &th0).abs().max(1.0);
        for c in 0..wp.fiber_dim {
            for s in [0.37, 1.3] {
                let mut th = th0.clone();
                th[c] = s;
                let d = (u(p, &th) - u(p, &th0)).abs();
                if d > 1e-12 * u0 {
                    return Err(BlabError::NonInvariantFunction(d));
                }
            }
        }
        let lhs = product_laplacian(wp, u, p, &th0, h);
        let rhs = reduced_laplacian(wp, u, p, &th0, h, coefficient);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Warped Laplacian identity with the fiber-dimension coefficient, at steps h and h/2.
pub fn warped_laplacian_check<F: Fn(&[f64], &[f64]) -> f64>(
    wp: &WarpedProduct,
    u: &F,
    points: &[Vec<f64>],
    h: f64,
) -> Result<WarpedCheck> {
    let c = wp.fiber_dim as f64;
    let d1 = warped_laplacian_discrepancy(wp, u, points, h, c)?;
    let d2 = warped_laplacian_discrepancy(wp, u, points, 0.5 * h, c)?;
    let order = if d1 > 0.0 && d2 > 0.0 { (d1 / d2).log2() } else { f64::INFINITY };
    Ok(WarpedCheck {
        coarse: WarpedDiscrepancy { step: h, discrepancy: d1 },
        fine: WarpedDiscrepancy {
            step: 0.5 * h,
            discrepancy: d2,
        },
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::geometry::model::flat;

    fn wp(k: usize) -> WarpedProduct {
        let m = Dimension::new(3).unwrap();
        let base = flat(m, 1.0).unwrap();
        WarpedProduct::new(base, k, 1.0, vec![0.0; 3], vec![0.2, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.2], true).unwrap()
    }

    #[test]
    fn minimal_fiber_predicate() {
        assert!(wp(2).fiber_is_minimal());
    }

    #[test]
    fn fiber_dependent_potential_rejected() {
        let mut w = wp(2);
        w.h_invariant = false;
        assert!(matches!(w.reduce_to_anisotropic(), Err(BlabError::FiberDependentPotential)));
    }

    #[test]
    fn non_invariant_function_rejected() {
        let w = wp(2);
        let u = |y: &[f64], th: &[f64]| y[0] + th[0];
        let r = warped_laplacian_discrepancy(&w, &u, &[vec![0.1, 0.0, 0.0]], 1e-3, 2.0);
        assert!(matches!(r, Err(BlabError::NonInvariantFunction(_))));
    }
}
