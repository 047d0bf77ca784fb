//! The threshold Theta, the reduced function Phi(t, eta) and its critical point.

use serde::{Deserialize, Serialize};

use crate::bubble::Dimension;
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;

/// Coefficient in front of Delta a / a inside Theta.
///
/// `Verified` is the value obtained by evaluating the bubble integrals,
/// 3(m-2)/(4(m-1)). `Printed` is twice that, 3(m-2)/(2(m-1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaConvention {
    #[default]
    Verified,
    Printed,
}

impl ThetaConvention {
    pub fn laplacian_coefficient(self, m: f64) -> f64 {
        match self {
            ThetaConvention::Verified => 3.0 * (m - 2.0) / (4.0 * (m - 1.0)),
            ThetaConvention::Printed => 3.0 * (m - 2.0) / (2.0 * (m - 1.0)),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "verified" => Ok(ThetaConvention::Verified),
            "printed" => Ok(ThetaConvention::Printed),
            other => Err(BlabError::Config(format!("unknown theta convention '{other}'"))),
        }
    }
}

/// (m-2)/(4(m-1)), the scalar-curvature coefficient.
pub fn curvature_coefficient(m: f64) -> f64 {
    (m - 2.0) / (4.0 * (m - 1.0))
}

/// 2(m-1)/((m-2)(m-4)), the factor multiplying Theta in Phi.
pub fn mass_coefficient(m: f64) -> f64 {
    2.0 * (m - 1.0) / ((m - 2.0) * (m - 4.0))
}

/// (m-2)^2/8, the log t coefficient.
pub fn log_coefficient(m: f64) -> f64 {
    (m - 2.0).powi(2) / 8.0
}

pub fn sign_of(eps: f64) -> i8 {
    if eps > 0.0 {
        1
    } else {
        -1
    }
}

/// Theta = h - (m-2)/(4(m-1)) S_g + kappa Delta a / a, at a critical point of a.
pub fn theta(model: &ManifoldModel, conv: ThetaConvention) -> Result<f64> {
    model.dim().require(5, "the reduced energy (needs m > 4)")?;
    let g = model.a_grad_norm();
    if g > 1e-12 * model.a0.max(1.0) {
        return Err(BlabError::NotCritical("xi0", g));
    }
    let m = model.dim().as_f64();
    Ok(model.h0 - curvature_coefficient(m) * model.scalar_curvature()
        + conv.laplacian_coefficient(m) * model.laplacian_a() / model.a0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedEnergyFn {
    pub m: Dimension,
    pub theta: f64,
    /// D^2 a / a, row-major
    pub a_hess_normalized: Vec<f64>,
    pub sign_eps: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t0: f64,
    pub eta0: Vec<f64>,
    pub nondegenerate: bool,
    pub phi_tt: f64,
}

impl ReducedEnergyFn {
    pub fn new(m: Dimension, theta: f64, a_hess_normalized: Vec<f64>, sign_eps: i8) -> Result<Self> {
        m.require(5, "the reduced energy (needs m > 4)")?;
        if a_hess_normalized.len() != m.get() * m.get() {
            return Err(BlabError::InvalidParameter("D^2 a / a has the wrong size".into()));
        }
        if sign_eps != 1 && sign_eps != -1 {
            return Err(BlabError::InvalidParameter("sign_eps must be +1 or -1".into()));
        }
        Ok(ReducedEnergyFn {
            m,
            theta,
            a_hess_normalized,
            sign_eps,
        })
    }

    pub fn from_model(model: &ManifoldModel, sign_eps: i8, conv: ThetaConvention) -> Result<Self> {
        let th = theta(model, conv)?;
        let hn = model.a_hess.iter().map(|v| v / model.a0).collect();
        Self::new(model.dim(), th, hn, sign_eps)
    }

    fn mf(&self) -> f64 {
        self.m.as_f64()
    }

    /// Coefficient of t at eta = 0.
    pub fn linear_coefficient(&self) -> f64 {
        mass_coefficient(self.mf()) * self.theta
    }

    fn quad(&self, eta: &[f64]) -> f64 {
        let n = self.m.get();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += eta[i] * self.a_hess_normalized[i * n + j] * eta[j];
            }
        }
        q
    }

    fn check(&self, t: f64, eta: &[f64]) -> Result<()> {
        if !(t > 0.0) {
            return Err(BlabError::InvalidParameter(format!("Phi needs t > 0, got {t}")));
        }
        if eta.len() != self.m.get() {
            return Err(BlabError::InvalidParameter("eta has the wrong dimension".into()));
        }
        Ok(())
    }

    pub fn phi_eval(&self, t: f64, eta: &[f64]) -> Result<f64> {
        self.check(t, eta)?;
        Ok((self.linear_coefficient() + 0.5 * self.quad(eta)) * t
            - self.sign_eps as f64 * log_coefficient(self.mf()) * t.ln())
    }

    /// (d/dt, d/deta_1, ..., d/deta_m).
    pub fn gradient(&self, t: f64, eta: &[f64]) -> Result<Vec<f64>> {
        self.check(t, eta)?;
        let n = self.m.get();
        let mut g = Vec::with_capacity(n + 1);
        g.push(self.linear_coefficient() + 0.5 * self.quad(eta) - self.sign_eps as f64 * log_coefficient(self.mf()) / t);
        for i in 0..n {
            let s: f64 = (0..n)
                .map(|j| 0.5 * (self.a_hess_normalized[i * n + j] + self.a_hess_normalized[j * n + i]) * eta[j])
                .sum();
            g.push(t * s);
        }
        Ok(g)
    }

    pub fn critical_point(&self) -> Result<CriticalPoint> {
        let c = self.linear_coefficient();
        if self.theta == 0.0 {
            return Err(BlabError::DegenerateTheta);
        }
        let sign = self.sign_eps as f64;
        if sign * c <= 0.0 {
            return Err(BlabError::RegimeMismatch {
                theta: self.theta,
                sign_eps: self.sign_eps,
            });
        }
        let l = log_coefficient(self.mf());
        let mut t = sign * l / c;
        for _ in 0..50 {
            let f = c - sign * l / t;
            let fp = sign * l / (t * t);
            let dt = f / fp;
            t -= dt;
            if dt.abs() <= 1e-15 * t {
                break;
            }
        }
        let phi_tt = sign * l / (t * t);
        let hess_nonsingular = {
            let n = self.m.get();
            let mat = nalgebra::DMatrix::from_row_slice(n, n, &self.a_hess_normalized);
            let sv = mat.singular_values();
            let max = sv.max();
            max > 0.0 && sv.min() > 1e-12 * max
        };
        Ok(CriticalPoint {
            t0: t,
            eta0: vec![0.0; self.m.get()],
            nondegenerate: phi_tt != 0.0 && hess_nonsingular,
            phi_tt,
        })
    }

    /// [t0/4, 4 t0] when a critical point exists, else [0.25, 4].
    pub fn default_interval(&self) -> (f64, f64) {
        match self.critical_point() {
            Ok(cp) => (0.25 * cp.t0, 4.0 * cp.t0),
            Err(_) => (0.25, 4.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeDecision {
    pub theta: f64,
    pub sign_eps: i8,
    pub solve: bool,
    pub reason: String,
}

/// Solve iff Theta and eps have the same (nonzero) sign; needs m >= 9.
pub fn regime_decision(m: Dimension, theta: f64, sign_eps: i8) -> Result<RegimeDecision> {
    m.require(9, "the existence regime")?;
    let (solve, reason) = if theta == 0.0 {
        (false, "Theta = 0: degenerate threshold".to_string())
    } else if (theta > 0.0) == (sign_eps > 0) {
        (
            true,
            if sign_eps > 0 {
                "subcritical: eps > 0 with Theta > 0".to_string()
            } else {
                "supercritical: eps < 0 with Theta < 0".to_string()
            },
        )
    } else {
        (false, format!("regime mismatch: Theta = {theta:e} with sign(eps) = {sign_eps}"))
    };
    Ok(RegimeDecision {
        theta,
        sign_eps,
        solve,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_critical_point() {
        let m = Dimension::new(9).unwrap();
        let th = 1.0 / mass_coefficient(9.0);
        let f = ReducedEnergyFn::new(m, th, vec![0.0; 81], 1).unwrap();
        let cp = f.critical_point().unwrap();
        assert!((cp.t0 - 49.0 / 8.0).abs() < 1e-12);
        assert!(!cp.nondegenerate); // D^2 a = 0 here
    }

    #[test]
    fn regime_requires_dimension_nine() {
        let m = Dimension::new(7).unwrap();
        assert!(matches!(regime_decision(m, 1.0, 1), Err(BlabError::DimensionTooSmall { .. })));
    }

    #[test]
    fn mismatch_and_degenerate() {
        let m = Dimension::new(9).unwrap();
        let f = ReducedEnergyFn::new(m, -1.0, vec![0.0; 81], 1).unwrap();
        assert!(matches!(f.critical_point(), Err(BlabError::RegimeMismatch { .. })));
        let g = ReducedEnergyFn::new(m, 0.0, vec![0.0; 81], 1).unwrap();
        assert!(matches!(g.critical_point(), Err(BlabError::DegenerateTheta)));
    }
}
