//! The standard bubble U(z) = alpha_m (1 + |z|^2)^(-(m-2)/2), its rescalings and
//! the kernel functions of the linearized equation.
//!
//! Radial functions are written as g(s) with s = |z|^2. For such a function
//! Delta g(|z|^2) = 2m g'(s) + 4 s g''(s), which has no singularity at the
//! origin, and the partial derivatives z_i * 2 g'(s) are also smooth.

use serde::{Deserialize, Serialize};

use crate::error::{BlabError, Result};

/// Dimension of the base manifold. Always at least 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(BlabError::DimensionTooSmall {
                m,
                min: 3,
                context: "bubble definitions",
            });
        }
        Ok(Dimension(m))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Critical Sobolev exponent 2m/(m-2).
    pub fn two_star(self) -> f64 {
        let m = self.as_f64();
        2.0 * m / (m - 2.0)
    }

    /// (m - 2)/2, the decay exponent of the bubble in s = |z|^2.
    pub fn k(self) -> f64 {
        0.5 * (self.as_f64() - 2.0)
    }

    pub fn require(self, min: usize, context: &'static str) -> Result<()> {
        if self.0 < min {
            Err(BlabError::DimensionTooSmall { m: self.0, min, context })
        } else {
            Ok(())
        }
    }
}

/// Concentration scale and centre offset of a rescaled bubble. The bubble is
/// centred at y = delta * eta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    delta: f64,
    eta: Vec<f64>,
}

impl BubbleParams {
    pub fn new(delta: f64, eta: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(BlabError::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if eta.iter().any(|x| !x.is_finite()) {
            return Err(BlabError::InvalidParameter("eta has non-finite entries".into()));
        }
        Ok(BubbleParams { delta, eta })
    }

    /// delta = sqrt(|eps| t).
    pub fn from_eps(eps: f64, t: f64, eta: Vec<f64>) -> Result<Self> {
        if eps == 0.0 || !(t > 0.0) {
            return Err(BlabError::InvalidParameter(format!(
                "need eps != 0 and t > 0 (eps = {eps}, t = {t})"
            )));
        }
        Self::new((eps.abs() * t).sqrt(), eta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }
}

pub fn alpha(m: Dimension) -> f64 {
    let mf = m.as_f64();
    (mf * (mf - 2.0)).powf((mf - 2.0) / 4.0)
}

/// Radial profile g(s) = alpha (1+s)^(-k) and its first three s-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    m: Dimension,
    alpha: f64,
    k: f64,
}

impl Profile {
    pub fn new(m: Dimension) -> Self {
        Profile {
            m,
            alpha: alpha(m),
            k: m.k(),
        }
    }

    pub fn dim(&self) -> Dimension {
        self.m
    }

    /// U as a function of r = |z|.
    pub fn u(&self, r: f64) -> f64 {
        self.g(r * r)
    }

    /// dU/dr.
    pub fn du(&self, r: f64) -> f64 {
        2.0 * r * self.g1(r * r)
    }

    /// (dU/dr)/r, smooth at r = 0.
    pub fn du_over_r(&self, r: f64) -> f64 {
        2.0 * self.g1(r * r)
    }

    /// V_0 as a function of r.
    pub fn v0(&self, r: f64) -> f64 {
        self.v0_s(r * r)
    }

    /// dV_0/dr.
    pub fn dv0(&self, r: f64) -> f64 {
        2.0 * r * self.v0_s1(r * r)
    }

    pub fn g(&self, s: f64) -> f64 {
        self.alpha * (1.0 + s).powf(-self.k)
    }

    pub fn g1(&self, s: f64) -> f64 {
        -self.k * self.alpha * (1.0 + s).powf(-self.k - 1.0)
    }

    pub fn g2(&self, s: f64) -> f64 {
        self.k * (self.k + 1.0) * self.alpha * (1.0 + s).powf(-self.k - 2.0)
    }

    pub fn g3(&self, s: f64) -> f64 {
        -self.k * (self.k + 1.0) * (self.k + 2.0) * self.alpha * (1.0 + s).powf(-self.k - 3.0)
    }

    /// V_0 = -k U - r U' = k alpha (s - 1)(1+s)^(-k-1).
    pub fn v0_s(&self, s: f64) -> f64 {
        self.k * self.alpha * (s - 1.0) * (1.0 + s).powf(-self.k - 1.0)
    }

    pub fn v0_s1(&self, s: f64) -> f64 {
        let k = self.k;
        k * self.alpha * (1.0 + s).powf(-k - 2.0) * ((k + 2.0) - k * s)
    }

    pub fn v0_s2(&self, s: f64) -> f64 {
        let k = self.k;
        k * self.alpha * (1.0 + s).powf(-k - 3.0) * (k * (k + 1.0) * s - k - (k + 2.0) * (k + 2.0))
    }

    /// Delta U at |z|^2 = s.
    pub fn laplacian_u(&self, s: f64) -> f64 {
        2.0 * self.m.as_f64() * self.g1(s) + 4.0 * s * self.g2(s)
    }

    /// Delta V_0 at |z|^2 = s.
    pub fn laplacian_v0(&self, s: f64) -> f64 {
        2.0 * self.m.as_f64() * self.v0_s1(s) + 4.0 * s * self.v0_s2(s)
    }

    /// Delta V_i / z_i at |z|^2 = s, for V_i = z_i phi(s) with phi = 2 g'.
    pub fn laplacian_vi_over_zi(&self, s: f64) -> f64 {
        let m = self.m.as_f64();
        2.0 * (m + 2.0) * 2.0 * self.g2(s) + 4.0 * s * 2.0 * self.g3(s)
    }
}

fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum()
}

fn check_len(m: Dimension, z: &[f64]) -> Result<()> {
    if z.len() != m.get() {
        return Err(BlabError::InvalidParameter(format!(
            "expected a {}-vector, got length {}",
            m.get(),
            z.len()
        )));
    }
    Ok(())
}

pub fn bubble_eval(m: Dimension, z: &[f64]) -> Result<f64> {
    check_len(m, z)?;
    Ok(Profile::new(m).g(norm2(z)))
}

/// delta^(-(m-2)/2) U((z - y)/delta) with y = delta * eta.
pub fn bubble_rescaled(m: Dimension, params: &BubbleParams, z: &[f64]) -> Result<f64> {
    check_len(m, z)?;
    check_len(m, params.eta())?;
    let d = params.delta();
    let s: f64 = z
        .iter()
        .zip(params.eta())
        .map(|(zi, ei)| {
            let w = zi / d - ei;
            w * w
        })
        .sum();
    Ok(d.powf(-m.k()) * Profile::new(m).g(s))
}

/// Kernel function V_i: i = 0 is the dilation mode, 1..=m the translations.
pub fn kernel_eval(m: Dimension, i: usize, z: &[f64]) -> Result<f64> {
    check_len(m, z)?;
    if i > m.get() {
        return Err(BlabError::IndexOutOfRange { index: i, max: m.get() });
    }
    let p = Profile::new(m);
    let s = norm2(z);
    Ok(if i == 0 { p.v0_s(s) } else { z[i - 1] * 2.0 * p.g1(s) })
}

/// Gradient of V_i at z.
pub fn kernel_gradient(m: Dimension, i: usize, z: &[f64]) -> Result<Vec<f64>> {
    check_len(m, z)?;
    if i > m.get() {
        return Err(BlabError::IndexOutOfRange { index: i, max: m.get() });
    }
    let p = Profile::new(m);
    let s = norm2(z);
    if i == 0 {
        let c = 2.0 * p.v0_s1(s);
        return Ok(z.iter().map(|x| c * x).collect());
    }
    let phi = 2.0 * p.g1(s);
    let dphi = 2.0 * p.g2(s);
    let zi = z[i - 1];
    Ok(z
        .iter()
        .enumerate()
        .map(|(j, x)| 2.0 * dphi * zi * x + if j == i - 1 { phi } else { 0.0 })
        .collect())
}

/// Max over the radial nodes of |-Delta U - U^(2*-1)|, relative to max U^(2*-1).
pub fn bubble_residual(m: Dimension, nodes: &[f64]) -> f64 {
    let p = Profile::new(m);
    let e = m.two_star() - 1.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &r in nodes {
        let s = r * r;
        let rhs = p.g(s).powf(e);
        worst = worst.max((-p.laplacian_u(s) - rhs).abs());
        scale = scale.max(rhs);
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Relative residual of -Delta V_i = (2*-1) U^(2*-2) V_i along a ray.
pub fn kernel_residual(m: Dimension, i: usize, nodes: &[f64]) -> Result<f64> {
    if i > m.get() {
        return Err(BlabError::IndexOutOfRange { index: i, max: m.get() });
    }
    let p = Profile::new(m);
    let e = m.two_star() - 2.0;
    let c = m.two_star() - 1.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &r in nodes {
        let s = r * r;
        // along the ray z = r e_i (or e_1 for V_0)
        let (lap, v) = if i == 0 {
            (p.laplacian_v0(s), p.v0_s(s))
        } else {
            (r * p.laplacian_vi_over_zi(s), r * 2.0 * p.g1(s))
        };
        let rhs = c * p.g(s).powf(e) * v;
        worst = worst.max((-lap - rhs).abs());
        scale = scale.max(rhs.abs()).max(lap.abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Uniform radial nodes on [0, r_max] (n nodes including both ends).
pub fn radial_nodes(n: usize, r_max: f64) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(Dimension::new(2), Err(BlabError::DimensionTooSmall { .. })));
    }

    #[test]
    fn alpha_values() {
        let d9 = Dimension::new(9).unwrap();
        assert!((bubble_eval(d9, &[0.0; 9]).unwrap() - 63f64.powf(1.75)).abs() < 1e-9);
        let d6 = Dimension::new(6).unwrap();
        assert_eq!(alpha(d6), 24.0);
        let mut z = [0.0; 6];
        z[0] = 1.0;
        assert!((bubble_eval(d6, &z).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn v0_matches_definition() {
        let m = Dimension::new(7).unwrap();
        let p = Profile::new(m);
        for r in [0.0, 0.3, 1.0, 2.5] {
            let direct = -m.k() * p.u(r) - r * p.du(r);
            assert!((direct - p.v0(r)).abs() < 1e-12 * p.u(0.0));
        }
        assert!((p.v0(0.0) + m.k() * alpha(m)).abs() < 1e-12);
    }

    #[test]
    fn residual_at_origin_is_finite() {
        let m = Dimension::new(9).unwrap();
        let r = bubble_residual(m, &[0.0]);
        assert!(r.is_finite() && r < 1e-12);
    }

    #[test]
    fn kernel_index_checked() {
        let m = Dimension::new(3).unwrap();
        assert!(matches!(kernel_eval(m, 4, &[0.0; 3]), Err(BlabError::IndexOutOfRange { .. })));
        assert_eq!(kernel_eval(m, 2, &[0.0; 3]).unwrap(), 0.0);
    }
}
