//! Closed-form identities between bubble integrals that pin the expansion
//! coefficients.

use serde::{Deserialize, Serialize};

use crate::bubble::{Dimension, Profile};
use crate::checks::Check;
use crate::error::{BlabError, Result};
use crate::moments::{
    bubble_integrals_closed, bubble_integrals_quadrature, fourth_moment_checks, k_pow, radial_integral,
    SphericalMoments,
};

const MODULE: &str = "reduced_energy";

/// Target used for the weighted second-moment lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LockTarget {
    /// 3 K^(-m) / (m (m - 4)), as printed.
    #[default]
    Printed,
    /// 3 K^(-m) / (2 m (m - 4)), the value the integrals actually take.
    Verified,
}

impl LockTarget {
    pub fn value(self, m: Dimension) -> f64 {
        let mf = m.as_f64();
        let base = 3.0 * k_pow(m) / (mf * (mf - 4.0));
        match self {
            LockTarget::Printed => base,
            LockTarget::Verified => 0.5 * base,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "printed" => Ok(LockTarget::Printed),
            "verified" => Ok(LockTarget::Verified),
            other => Err(BlabError::Config(format!("unknown lock target '{other}'"))),
        }
    }
}

/// The eta-quadratic bracket, which must vanish.
pub fn eta_bracket(m: Dimension) -> Result<(f64, f64)> {
    let mf = m.as_f64();
    let n = m.get();
    let p = Profile::new(m);
    let b0 = bubble_integrals_quadrature(m, 0)?;
    let sm = SphericalMoments::new(n, 2);
    let mut e = vec![0u32; n];
    e[0] = 2;
    let zi2 = sm.get(&e) * radial_integral(|r| p.du_over_r(r).powi(2), mf + 1.0, mf - 1.0)?;
    let value = (mf - 2.0) / (8.0 * mf) * b0.crit + 0.25 * zi2 - 0.125 * b0.grad;
    Ok((value, b0.grad))
}

/// (1/(4m)) int |z|^2 |grad U|^2 - ((m-2)/(4m^2)) int |z|^2 U^(2*).
pub fn lock_a_value(m: Dimension) -> Result<f64> {
    let mf = m.as_f64();
    let b1 = bubble_integrals_quadrature(m, 1)?;
    Ok(b1.grad / (4.0 * mf) - (mf - 2.0) / (4.0 * mf * mf) * b1.crit)
}

/// (1/4) int |grad U|^2 - ((m-2)/(4m)) int U^(2*).
pub fn lock_b_value(m: Dimension) -> Result<f64> {
    let mf = m.as_f64();
    let b0 = bubble_integrals_quadrature(m, 0)?;
    Ok(0.25 * b0.grad - (mf - 2.0) / (4.0 * mf) * b0.crit)
}

/// All identity locks for dimension m.
pub fn identity_checks(m: Dimension, tol: f64, lock_a: LockTarget) -> Result<Vec<Check>> {
    m.require(5, "the identity locks")?;
    let mf = m.as_f64();
    let kp = k_pow(m);
    let mut out = Vec::new();

    let (bracket, scale) = eta_bracket(m)?;
    out.push(Check::absolute(MODULE, "eta_bracket_vanishes", bracket, 0.0, scale, tol));

    out.push(Check::relative(MODULE, "lock_a_weighted_second_moment", lock_a_value(m)?, lock_a.value(m), tol));
    out.push(Check::relative(MODULE, "lock_b_dirichlet_critical", lock_b_value(m)?, kp / (2.0 * mf), tol));

    for c in fourth_moment_checks(m, tol)? {
        out.push(Check {
            module: MODULE.into(),
            ..c
        });
    }
    Ok(out)
}

/// Quadrature versus I^q_p route for the bubble integrals with |z|^(2j), j = 0, 1.
pub fn radial_reduction_checks(m: Dimension, tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for j in 0..=1u32 {
        let q = bubble_integrals_quadrature(m, j)?;
        let c = bubble_integrals_closed(m, j)?;
        out.push(Check::relative("bubble_calculus", format!("radial_reduction_grad_j{j}"), q.grad, c.grad, tol));
        out.push(Check::relative("bubble_calculus", format!("radial_reduction_crit_j{j}"), q.crit, c.crit, tol));
        if c.mass.is_finite() {
            out.push(Check::relative("bubble_calculus", format!("radial_reduction_mass_j{j}"), q.mass, c.mass, tol));
        }
    }
    Ok(out)
}
