//! Energy of the bubble ansatz on a model chart, reduced to one-dimensional
//! radial integrals.
//!
//! With y = delta (z + eta) and rho = |z| the ansatz reads
//! W = delta^(-(m-2)/2) chi(delta rho) U(rho), the cutoff being centred on the
//! bubble. Every metric and weight factor is a polynomial in z, so each energy
//! term is a finite sum over degrees D of (spherical moments of the degree-D
//! part) times a radial integral of rho^(D + m - 1).

use serde::{Deserialize, Serialize};

use crate::bubble::{BubbleParams, Profile};
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;
use crate::moments::SphericalMoments;
use crate::poly::Poly;
use crate::quadrature::{integrate_breaks, QuadOptions};

/// The three parts of J_eps(W): J = grad + mass - power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzEnergy {
    pub eps: f64,
    pub t: f64,
    pub delta: f64,
    pub grad: f64,
    pub mass: f64,
    pub power: f64,
    pub total: f64,
}

/// Polynomials a sqrt(g) and a sqrt(g) g^{ij} z_i z_j in the bubble variable z.
pub struct AnsatzPolys {
    pub mass: Poly,
    pub grad: Poly,
}

pub fn ansatz_polys(model: &ManifoldModel, delta: f64, eta: &[f64]) -> AnsatzPolys {
    let n = model.dim().get();
    let ys: Vec<Poly> = (0..n)
        .map(|i| {
            let mut c = vec![0.0; n];
            c[i] = delta;
            Poly::affine(delta * eta[i], &c)
        })
        .collect();
    let metric_zero = model.metric_hessian().iter().all(|h| *h == 0.0);
    let mut yy: Vec<Vec<Option<Poly>>> = vec![vec![None; n]; n];
    let mut yy_at = |r: usize, k: usize| -> Poly {
        let (a, b) = if r <= k { (r, k) } else { (k, r) };
        if yy[a][b].is_none() {
            yy[a][b] = Some(ys[a].mul(&ys[b]));
        }
        yy[a][b].clone().unwrap()
    };

    let mut zsq = Poly::zero(n);
    for i in 0..n {
        let mut e = vec![0u32; n];
        e[i] = 2;
        zsq.add_term(&e, 1.0);
    }

    let (gsum, sqrtg) = if metric_zero {
        (zsq.clone(), Poly::constant(n, 1.0))
    } else {
        let mut gsum = zsq.clone();
        let mut sqrtg = Poly::constant(n, 1.0);
        for r in 0..n {
            for k in 0..n {
                let mut quad = Poly::zero(n);
                let mut tr = 0.0;
                for i in 0..n {
                    tr += model.hessian(i, i, r, k);
                    for j in 0..n {
                        let h = model.hessian(i, j, r, k);
                        if h != 0.0 {
                            let mut e = vec![0u32; n];
                            e[i] += 1;
                            e[j] += 1;
                            quad.add_term(&e, 0.5 * h);
                        }
                    }
                }
                if !quad.is_empty() || tr != 0.0 {
                    let p = yy_at(r, k);
                    if !quad.is_empty() {
                        gsum.add_assign_scaled(&quad.mul(&p), 1.0);
                    }
                    if tr != 0.0 {
                        sqrtg.add_assign_scaled(&p, -0.25 * tr);
                    }
                }
            }
        }
        (gsum, sqrtg)
    };

    let mut a = Poly::constant(n, model.a0);
    for i in 0..n {
        if model.a_grad[i] != 0.0 {
            a.add_assign_scaled(&ys[i], model.a_grad[i]);
        }
        for j in 0..n {
            let c = model.a_hess[i * n + j];
            if c != 0.0 {
                a.add_assign_scaled(&yy_at(i, j), 0.5 * c);
            }
        }
    }
    let mass = a.mul(&sqrtg);
    let grad = mass.mul(&gsum);
    AnsatzPolys { mass, grad }
}

fn radial_breaks(outer: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = 0.5;
    while x < outer {
        b.push(x);
        x *= 2.0;
    }
    b.push(0.5 * outer);
    b.push(outer);
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup();
    b
}

/// J_eps of the ansatz W_{delta, eta} with delta = sqrt(|eps| t).
pub fn ansatz_energy(model: &ManifoldModel, eps: f64, t: f64, eta: &[f64]) -> Result<AnsatzEnergy> {
    let m = model.dim();
    let n = m.get();
    if eta.len() != n {
        return Err(BlabError::InvalidParameter("eta has the wrong dimension".into()));
    }
    let params = BubbleParams::from_eps(eps, t, eta.to_vec())?;
    let delta = params.delta();
    let mf = m.as_f64();
    let prof = Profile::new(m);
    let chi = model.cutoff;
    let outer = chi.radius / delta;

    let polys = ansatz_polys(model, delta, eta);
    let sm = SphericalMoments::new(n, 8);
    let s_grad = polys.grad.reduce_by_degree(|a| sm.get(a));
    let s_mass = polys.mass.reduce_by_degree(|a| sm.get(a));

    let p = m.two_star() - eps;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        max_intervals: 4000,
    };
    let breaks = radial_breaks(outer);
    let gfun = |rho: f64| chi.value(delta * rho) * prof.du(rho) + delta * chi.derivative(delta * rho) * prof.u(rho);
    let cu = |rho: f64| chi.value(delta * rho) * prof.u(rho);

    let mut grad = 0.0;
    for (d, &s) in s_grad.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let pw = d as f64 - 2.0 + mf - 1.0;
        let v = integrate_breaks(|r: f64| gfun(r).powi(2) * r.powf(pw), &breaks, opts)?.value;
        grad += 0.5 * s * v;
    }
    let mut mass = 0.0;
    let mut power = 0.0;
    for (d, &s) in s_mass.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let pw = d as f64 + mf - 1.0;
        if model.h0 != 0.0 {
            let v = integrate_breaks(|r: f64| cu(r).powi(2) * r.powf(pw), &breaks, opts)?.value;
            mass += 0.5 * model.h0 * delta * delta * s * v;
        }
        let v = integrate_breaks(
            |r: f64| {
                let c = cu(r);
                if c > 0.0 {
                    c.powf(p) * r.powf(pw)
                } else {
                    0.0
                }
            },
            &breaks,
            opts,
        )?
        .value;
        power += s * v;
    }
    power *= delta.powf(eps * (mf - 2.0) / 2.0) / p;
    let total = grad + mass - power;
    if !total.is_finite() {
        return Err(BlabError::QuadratureFailure("ansatz energy"));
    }
    Ok(AnsatzEnergy {
        eps,
        t,
        delta,
        grad,
        mass,
        power,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::geometry::model::{flat, round_sphere};
    use crate::moments::k_pow;

    #[test]
    fn flat_energy_near_leading_term() {
        let m = Dimension::new(9).unwrap();
        let model = flat(m, 1.0).unwrap();
        let e = ansatz_energy(&model, 1e-6, 1.0, &[0.0; 9]).unwrap();
        let lead = k_pow(m) / 9.0;
        assert!(((e.total - lead) / lead).abs() < 1e-4);
    }

    #[test]
    fn sphere_polys_match_pointwise() {
        let m = Dimension::new(5).unwrap();
        let model = round_sphere(m, 2.0, 1.0).unwrap().with_isotropic_weight(1.5, 0.4).unwrap();
        let delta = 0.05;
        let eta = [0.3, -0.2, 0.1, 0.0, 0.5];
        let polys = ansatz_polys(&model, delta, &eta);
        let z = [0.7, 1.1, -0.4, 0.2, -0.9];
        let y: Vec<f64> = z.iter().zip(&eta).map(|(a, b)| delta * (a + b)).collect();
        let g = model.metric_inverse_at(&y).unwrap();
        let mut gz = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                gz += g[(i, j)] * z[i] * z[j];
            }
        }
        let sg = model.sqrt_det_g(&y).unwrap();
        let a = model.a_at(&y);
        assert!((polys.mass.eval(&z) - a * sg).abs() < 1e-13);
        assert!((polys.grad.eval(&z) - a * sg * gz).abs() < 1e-12);
    }
}
