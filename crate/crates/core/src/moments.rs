//! Moment integrals I^q_p, sphere constants and radial reductions of the
//! bubble integrals.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::bubble::{alpha, Dimension, Profile};
use crate::checks::Check;
use crate::error::{BlabError, Result};
use crate::quadrature::{integrate_breaks, integrate_half_line, QuadOptions};

const MODULE: &str = "bubble_calculus";

/// I^q_p = int_0^inf r^q / (1+r)^p dr with both evaluation routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIntegral {
    pub p: f64,
    pub q: f64,
    /// Beta closed form Gamma(q+1) Gamma(p-q-1) / Gamma(p).
    pub value: f64,
    /// Adaptive quadrature value.
    pub quadrature: f64,
}

impl MomentIntegral {
    pub fn agreement(&self) -> f64 {
        ((self.value - self.quadrature) / self.value).abs()
    }
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p - q > 1.0) || !(q > -1.0) {
        return Err(BlabError::DivergentMoment { p, q });
    }
    Ok(())
}

pub fn moment_closed(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    Ok((ln_gamma(q + 1.0) + ln_gamma(p - q - 1.0) - ln_gamma(p)).exp())
}

pub fn moment_quadrature(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let f = |r: f64| {
        if r == 0.0 {
            if q == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (q * r.ln() - p * r.ln_1p()).exp()
        }
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        max_intervals: 20000,
    };
    // fine breakpoints near the origin absorb the r^q endpoint behaviour
    let mut breaks = vec![0.0];
    let mut x = 1e-12;
    while x < 1.0 {
        breaks.push(x);
        x *= 8.0;
    }
    breaks.push(1.0);
    let head = integrate_breaks(f, &breaks, opts)?;
    let tail = integrate_half_line(|r: f64| f(1.0 + r), 1.0, p - q, 1e-15, opts)?;
    Ok(head.value + tail.value)
}

pub fn moment_integral(p: f64, q: f64) -> Result<MomentIntegral> {
    Ok(MomentIntegral {
        p,
        q,
        value: moment_closed(p, q)?,
        quadrature: moment_quadrature(p, q)?,
    })
}

/// Relative defects of I^q_{p+1} = ((p-q-1)/p) I^q_p and
/// I^{q+1}_{p+1} = ((q+1)/(p-q-1)) I^q_{p+1}, evaluated on the closed form.
pub fn recurrence_defects(p: f64, q: f64) -> Result<(f64, f64)> {
    let i_pq = moment_closed(p, q)?;
    let i_p1q = moment_closed(p + 1.0, q)?;
    let i_p1q1 = moment_closed(p + 1.0, q + 1.0)?;
    let r1 = (i_p1q - (p - q - 1.0) / p * i_pq) / i_p1q;
    let r2 = (i_p1q1 - (q + 1.0) / (p - q - 1.0) * i_p1q) / i_p1q1;
    Ok((r1.abs(), r2.abs()))
}

/// Same recurrences evaluated on the quadrature branch.
pub fn recurrence_defects_quadrature(p: f64, q: f64) -> Result<(f64, f64)> {
    let i_pq = moment_quadrature(p, q)?;
    let i_p1q = moment_quadrature(p + 1.0, q)?;
    let i_p1q1 = moment_quadrature(p + 1.0, q + 1.0)?;
    let r1 = (i_p1q - (p - q - 1.0) / p * i_pq) / i_p1q;
    let r2 = (i_p1q1 - (q + 1.0) / (p - q - 1.0) * i_p1q) / i_p1q1;
    Ok((r1.abs(), r2.abs()))
}

/// The 20 (p, q) pairs used by the moment checks.
pub fn standard_pairs() -> Vec<(f64, f64)> {
    let mut v = Vec::new();
    for &p in &[3.0, 4.5, 6.0, 9.0, 12.0] {
        for &frac in &[0.0, 0.25, 0.5, 0.75] {
            let q = frac * (p - 2.0);
            v.push((p, q));
        }
    }
    v
}

/// Volume of the unit n-sphere in R^(n+1).
pub fn sphere_volume(n: usize) -> f64 {
    let a = (n as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(a) / gamma(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereConstants {
    pub omega_m: f64,
    pub omega_m_minus_1: f64,
    pub k_m: f64,
}

pub fn sphere_constants(m: Dimension) -> SphereConstants {
    let mf = m.as_f64();
    let omega_m = sphere_volume(m.get());
    SphereConstants {
        omega_m,
        omega_m_minus_1: sphere_volume(m.get() - 1),
        k_m: (4.0 / (mf * (mf - 2.0) * omega_m.powf(2.0 / mf))).sqrt(),
    }
}

/// K_m^(-m), the common value of the Dirichlet energy and the critical norm of U.
pub fn k_pow(m: Dimension) -> f64 {
    sphere_constants(m).k_m.powf(-m.as_f64())
}

/// int over S^(m-1) of theta^alpha.
pub fn spherical_moment(m: usize, alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let total: u32 = alpha.iter().sum();
    let mut ln = 0.0;
    let mut zeros = m;
    for &a in alpha {
        if a > 0 {
            ln += ln_gamma((a as f64 + 1.0) / 2.0);
            zeros -= 1;
        }
    }
    ln += zeros as f64 * ln_gamma(0.5);
    2.0 * (ln - ln_gamma((total as f64 + m as f64) / 2.0)).exp()
}

/// Cache of spherical moments for multi-indices of bounded degree.
#[derive(Debug, Clone)]
pub struct SphericalMoments {
    m: usize,
    half_gamma: Vec<f64>,
    denom: Vec<f64>,
}

impl SphericalMoments {
    pub fn new(m: usize, max_degree: usize) -> Self {
        // Gamma((2j+1)/2) for j = 0..=max_degree/2 and Gamma((D+m)/2) for even D
        let half_gamma = (0..=max_degree / 2).map(|j| gamma(j as f64 + 0.5)).collect();
        let denom = (0..=max_degree).map(|d| gamma((d as f64 + m as f64) / 2.0)).collect();
        SphericalMoments { m, half_gamma, denom }
    }

    pub fn get(&self, alpha: &[u32]) -> f64 {
        let mut prod = 2.0;
        let mut total = 0usize;
        for i in 0..self.m {
            let a = alpha.get(i).copied().unwrap_or(0) as usize;
            if a % 2 == 1 {
                return 0.0;
            }
            prod *= self.half_gamma[a / 2];
            total += a;
        }
        prod / self.denom[total]
    }
}

/// int_0^inf f(r) r^(power) dr for an integrand decaying like r^(-decay).
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, power: f64, decay: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        max_intervals: 4000,
    };
    let g = |r: f64| if r == 0.0 && power > 0.0 { 0.0 } else { f(r) * r.powf(power) };
    Ok(integrate_half_line(g, 1.0, decay, 1e-15, opts)?.value)
}

/// int_0^inf (1+r^2)^(-pw) r^q dr = (1/2) I^((q-1)/2)_pw.
pub fn rational_radial(pw: f64, q: f64) -> Result<f64> {
    Ok(0.5 * moment_closed(pw, 0.5 * (q - 1.0))?)
}

/// Radial integrals of the bubble that enter the energy expansion, over R^m
/// with weight |z|^(2j). Both the quadrature and the I^q_p routes are given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleIntegrals {
    /// int |grad U|^2 |z|^(2j)
    pub grad: f64,
    /// int U^(2*) |z|^(2j)
    pub crit: f64,
    /// int U^2 |z|^(2j), infinite when not integrable
    pub mass: f64,
}

/// Whole-space bubble integrals via radial quadrature.
pub fn bubble_integrals_quadrature(m: Dimension, j: u32) -> Result<BubbleIntegrals> {
    let p = Profile::new(m);
    let mf = m.as_f64();
    let om = sphere_constants(m).omega_m_minus_1;
    let pw = mf - 1.0 + 2.0 * j as f64;
    let ts = m.two_star();
    let grad = om * radial_integral(|r| p.du(r).powi(2), pw, 2.0 * mf - 2.0 - pw)?;
    let crit = om * radial_integral(|r| p.u(r).powf(ts), pw, 2.0 * mf - pw)?;
    let mass_decay = 2.0 * mf - 4.0 - pw;
    let mass = if mass_decay > 1.0 {
        om * radial_integral(|r| p.u(r).powi(2), pw, mass_decay)?
    } else {
        f64::INFINITY
    };
    Ok(BubbleIntegrals { grad, crit, mass })
}

/// Whole-space bubble integrals via the moment closed form.
pub fn bubble_integrals_closed(m: Dimension, j: u32) -> Result<BubbleIntegrals> {
    let mf = m.as_f64();
    let a = alpha(m);
    let om = sphere_constants(m).omega_m_minus_1;
    let q = mf - 1.0 + 2.0 * j as f64;
    let grad = om * a * a * (mf - 2.0).powi(2) * rational_radial(mf, q + 2.0)?;
    let crit = om * a.powf(m.two_star()) * rational_radial(mf, q)?;
    let mass = match rational_radial(mf - 2.0, q) {
        Ok(v) => om * a * a * v,
        Err(_) => f64::INFINITY,
    };
    Ok(BubbleIntegrals { grad, crit, mass })
}

/// ||grad U_delta||^2 and ||U_delta||_{2*}^(2*) computed in unscaled variables.
pub fn rescaled_norms(m: Dimension, delta: f64) -> Result<(f64, f64)> {
    let p = Profile::new(m);
    let mf = m.as_f64();
    let om = sphere_constants(m).omega_m_minus_1;
    let k = m.k();
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        max_intervals: 4000,
    };
    let du = |r: f64| delta.powf(-k - 1.0) * p.du(r / delta);
    let u = |r: f64| delta.powf(-k) * p.u(r / delta);
    let g = integrate_half_line(|r: f64| du(r).powi(2) * r.powf(mf - 1.0), delta, mf - 1.0, 1e-15, opts)?;
    let c = integrate_half_line(
        |r: f64| u(r).powf(m.two_star()) * r.powf(mf - 1.0),
        delta,
        mf + 1.0,
        1e-15,
        opts,
    )?;
    Ok((om * g.value, om * c.value))
}

/// The three fourth-moment identities of the bubble, each as a check.
pub fn fourth_moment_checks(m: Dimension, tol: f64) -> Result<Vec<Check>> {
    if m.get() <= 4 {
        return Err(BlabError::NotIntegrable {
            m: m.get(),
            detail: "fourth moments of (U'/|z|)^2 need m >= 5".into(),
        });
    }
    let n = m.get();
    let p = Profile::new(m);
    let mf = m.as_f64();
    let sm = SphericalMoments::new(n, 4);
    // radial parts
    let w4 = radial_integral(|r| p.du_over_r(r).powi(2), mf + 3.0, mf - 3.0)?;
    let w2_grad = radial_integral(|r| p.du(r).powi(2), mf + 1.0, mf - 3.0)?;
    let w2_crit = radial_integral(|r| p.u(r).powf(m.two_star()), mf + 1.0, mf - 1.0)?;
    let mono = |idx: &[usize]| {
        let mut a = vec![0u32; n];
        for &i in idx {
            a[i] += 1;
        }
        sm.get(&a)
    };

    let mut out = Vec::new();
    // (a) z_i^4 versus 3 z_i^2 z_j^2
    let lhs_a = w4 * mono(&[0, 0, 0, 0]);
    let rhs_a = 3.0 * w4 * mono(&[0, 0, 1, 1]);
    out.push(Check::relative(MODULE, "fourth_moment_a", lhs_a, rhs_a, tol));

    // (b) full tensor against the decomposition with the printed factor 1/2,
    // and against the isotropic factor 1/3 implied by (a)
    let z1 = w4 * mono(&[0, 0, 0, 0]);
    let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for (name, factor) in [("fourth_moment_b", 0.5), ("fourth_moment_b_isotropic", 1.0 / 3.0)] {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for h in 0..n {
                        let lhs = w4 * mono(&[i, j, k, h]);
                        let rhs = factor * z1 * (dl(i, j) * dl(h, k) + dl(i, k) * dl(j, h) + dl(i, h) * dl(j, k));
                        worst = worst.max((lhs - rhs).abs() / z1);
                    }
                }
            }
        }
        out.push(Check::absolute(MODULE, name, worst, 0.0, 1.0, tol));
    }

    // (c) 1/2 int |grad U|^2 z_i^2 - 1/2* int U^2* z_i^2 = int (d_i U)^2 z_i^2
    let m2 = mono(&[0, 0]);
    let lhs_c = 0.5 * w2_grad * m2 - w2_crit * m2 / m.two_star();
    let rhs_c = w4 * mono(&[0, 0, 0, 0]);
    out.push(Check::relative(MODULE, "fourth_moment_c", lhs_c, rhs_c, tol));
    Ok(out)
}

/// Gram matrix of int grad V_i . grad V_j, normalized to unit diagonal.
pub fn kernel_gradient_gram(m: Dimension) -> Result<Vec<Vec<f64>>> {
    let n = m.get();
    let p = Profile::new(m);
    let mf = m.as_f64();
    let sm = SphericalMoments::new(n, 2);
    let e = |idx: &[usize]| {
        let mut a = vec![0u32; n];
        for &i in idx {
            a[i] += 1;
        }
        sm.get(&a)
    };
    let zero = vec![0u32; n];
    // V_0 = g0(s): grad V_0 = 2 g0'(s) z
    let d00 = sm.get(&zero) * radial_integral(|r| (2.0 * r * p.v0_s1(r * r)).powi(2), mf - 1.0, mf - 1.0)?;
    // V_i = z_i phi(s): grad V_i . grad V_j = delta_ij phi^2 + z_i z_j (4 phi phi' + 4 s phi'^2)
    let phi = |r: f64| 2.0 * p.g1(r * r);
    let dphi = |r: f64| 2.0 * p.g2(r * r);
    let diag = radial_integral(|r| phi(r).powi(2), mf - 1.0, mf + 1.0)?;
    let cross = radial_integral(
        |r| 4.0 * phi(r) * dphi(r) + 4.0 * r * r * dphi(r).powi(2),
        mf + 1.0,
        mf + 1.0,
    )?;
    // grad V_0 . grad V_i = 2 g0'(s) z_i (phi + 2 s phi')
    let mixed = radial_integral(
        |r| 2.0 * p.v0_s1(r * r) * (phi(r) + 2.0 * r * r * dphi(r)),
        mf,
        mf,
    )?;
    let mut g = vec![vec![0.0; n + 1]; n + 1];
    g[0][0] = d00;
    for i in 1..=n {
        g[0][i] = mixed * e(&[i - 1]);
        g[i][0] = g[0][i];
        for j in 1..=n {
            g[i][j] = if i == j { diag * sm.get(&zero) } else { 0.0 } + cross * e(&[i - 1, j - 1]);
        }
    }
    let d: Vec<f64> = (0..=n).map(|i| g[i][i].sqrt()).collect();
    for i in 0..=n {
        for j in 0..=n {
            g[i][j] /= d[i] * d[j];
        }
    }
    Ok(g)
}

/// ||V_i||^2_{D^{1,2}} for i = 0 and i >= 1 (all translations share a value).
pub fn kernel_norms(m: Dimension) -> Result<(f64, f64)> {
    let n = m.get();
    let p = Profile::new(m);
    let mf = m.as_f64();
    let sm = SphericalMoments::new(n, 2);
    let zero = vec![0u32; n];
    let mut e11 = vec![0u32; n];
    e11[0] = 2;
    let v0 = sm.get(&zero) * radial_integral(|r| (2.0 * r * p.v0_s1(r * r)).powi(2), mf - 1.0, mf - 1.0)?;
    let phi = |r: f64| 2.0 * p.g1(r * r);
    let dphi = |r: f64| 2.0 * p.g2(r * r);
    let diag = radial_integral(|r| phi(r).powi(2), mf - 1.0, mf + 1.0)?;
    let cross = radial_integral(
        |r| 4.0 * phi(r) * dphi(r) + 4.0 * r * r * dphi(r).powi(2),
        mf + 1.0,
        mf + 1.0,
    )?;
    Ok((v0, diag * sm.get(&zero) + cross * sm.get(&e11)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_moments() {
        assert!((moment_closed(2.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((moment_closed(3.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(matches!(moment_closed(2.0, 1.0), Err(BlabError::DivergentMoment { .. })));
        assert!(matches!(moment_closed(3.0, -1.0), Err(BlabError::DivergentMoment { .. })));
    }

    #[test]
    fn sphere_volumes() {
        use std::f64::consts::PI;
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_volume(1) - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn spherical_moment_cache_matches_direct() {
        let sm = SphericalMoments::new(5, 6);
        for a in [[0u32, 0, 0, 0, 0], [2, 0, 0, 0, 0], [2, 2, 2, 0, 0], [4, 0, 2, 0, 0], [1, 1, 0, 0, 0]] {
            assert!((sm.get(&a) - spherical_moment(5, &a)).abs() < 1e-13 * (1.0 + sm.get(&a)));
        }
        assert!((sm.get(&[0; 5]) - sphere_volume(4)).abs() < 1e-13);
    }
}
