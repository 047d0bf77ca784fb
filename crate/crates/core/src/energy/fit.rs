//! Least-squares extraction of the small-eps expansion of the ansatz energy.
//!
//! The leading basis is {1, eps log|eps|, eps, |eps|}. Second and third order
//! terms eps^j L^k and |eps| eps^(j-1) L^k (L = log|eps|, k <= j) are carried
//! as nuisance regressors so that the leading coefficients are not biased by
//! the next orders of the expansion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::chart::ansatz_energy;
use crate::energy::phi::{log_coefficient, mass_coefficient};
use crate::error::{BlabError, Result};
use crate::geometry::model::ManifoldModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub eps: f64,
    pub j_exact: f64,
    pub fit_residual: f64,
}

/// Leading coefficients of J = A + B eps log|eps| + C eps + D |eps| + ...
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingCoeffs {
    pub constant: f64,
    pub eps_log: f64,
    pub eps: f64,
    pub abs_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub model: String,
    pub m: usize,
    pub t: f64,
    pub eta: Vec<f64>,
    pub a0: f64,
    pub h0: f64,
    pub order: usize,
    pub coeffs: LeadingCoeffs,
    /// per unit a(xi0)
    pub a_m: f64,
    /// per unit a(xi0); minus the eps log|eps| coefficient
    pub b_m: f64,
    pub rows: Vec<FitRow>,
    pub residual_max: f64,
    pub condition: f64,
    /// (largest k kept, max |residual| / |eps_min|) for truncated ladders
    pub truncations: Vec<(f64, f64)>,
}

/// Two-sided ladder +-2^(-k) for k = k_min, k_min + step, ..., k_max.
pub fn two_sided_ladder(k_min: f64, k_max: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for s in [1.0, -1.0] {
        let mut k = k_min;
        while k <= k_max + 1e-9 {
            v.push(s * 2f64.powf(-k));
            k += step;
        }
    }
    v
}

/// The ladder used by default: k = 6..14 in half steps, both signs.
pub fn default_ladder() -> Vec<f64> {
    two_sided_ladder(6.0, 14.0, 0.5)
}

fn basis_row(e: f64, order: usize) -> Vec<f64> {
    let l = e.abs().ln();
    let a = e.abs();
    let mut r = vec![1.0, e * l, e, a];
    for j in 2..=order {
        let ej = e.powi(j as i32);
        let aj = a * e.powi(j as i32 - 1);
        for k in 0..=j {
            r.push(ej * l.powi(k as i32));
            r.push(aj * l.powi(k as i32));
        }
    }
    r
}

pub fn basis_size(order: usize) -> usize {
    basis_row(0.5, order).len()
}

/// Least-squares fit of energies against the extended basis.
pub fn fit_energies(data: &[(f64, f64)], order: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let ncol = basis_size(order);
    let signs = (data.iter().any(|d| d.0 > 0.0), data.iter().any(|d| d.0 < 0.0));
    if data.len() < ncol + 2 {
        return Err(BlabError::IllConditionedFit(format!(
            "{} ladder points for {} regressors",
            data.len(),
            ncol
        )));
    }
    if !(signs.0 && signs.1) {
        return Err(BlabError::IllConditionedFit(
            "eps and |eps| cannot be separated on a one-sided ladder".into(),
        ));
    }
    let n = data.len();
    let mut x = DMatrix::zeros(n, ncol);
    for (i, &(e, _)) in data.iter().enumerate() {
        for (j, v) in basis_row(e, order).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let scale: Vec<f64> = (0..ncol).map(|j| x.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for j in 0..ncol {
        let s = scale[j];
        x.column_mut(j).scale_mut(1.0 / s);
    }
    let y = DVector::from_iterator(n, data.iter().map(|d| d.1));
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e15 {
        return Err(BlabError::IllConditionedFit(format!("condition number {cond:e}")));
    }
    let c = svd
        .solve(&y, 0.0)
        .map_err(|e| BlabError::IllConditionedFit(e.to_string()))?;
    let resid = &y - &x * &c;
    let coeffs: Vec<f64> = c.iter().zip(&scale).map(|(v, s)| v / s).collect();
    Ok((coeffs, resid.iter().copied().collect(), cond))
}

/// Evaluate the ansatz energy along the ladder (in parallel, ordered by ladder index).
pub fn ladder_energies(model: &ManifoldModel, t: f64, eta: &[f64], ladder: &[f64]) -> Result<Vec<(f64, f64)>> {
    ladder
        .par_iter()
        .map(|&e| ansatz_energy(model, e, t, eta).map(|en| (e, en.total)))
        .collect()
}

pub fn expansion_fit(model: &ManifoldModel, t: f64, eta: &[f64], ladder: &[f64]) -> Result<ExpansionReport> {
    expansion_fit_order(model, t, eta, ladder, 3)
}

pub fn expansion_fit_order(
    model: &ManifoldModel,
    t: f64,
    eta: &[f64],
    ladder: &[f64],
    order: usize,
) -> Result<ExpansionReport> {
    let data = ladder_energies(model, t, eta, ladder)?;
    let (c, resid, cond) = fit_energies(&data, order)?;
    let rows: Vec<FitRow> = data
        .iter()
        .zip(&resid)
        .map(|(&(eps, j), &r)| FitRow {
            eps,
            j_exact: j,
            fit_residual: r,
        })
        .collect();
    let residual_max = resid.iter().fold(0.0f64, |a, r| a.max(r.abs()));

    // ratio test: refit on ladders truncated at the small end
    let mut truncations = Vec::new();
    let kmax = data.iter().map(|d| -d.0.abs().log2()).fold(0.0f64, f64::max);
    for drop in [2.0, 1.0, 0.0] {
        let cut = kmax - drop;
        let sub: Vec<(f64, f64)> = data.iter().copied().filter(|d| -d.0.abs().log2() <= cut + 1e-9).collect();
        if let Ok((_, r, _)) = fit_energies(&sub, order) {
            let emin = sub.iter().map(|d| d.0.abs()).fold(f64::INFINITY, f64::min);
            let rm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            truncations.push((cut, rm / emin));
        }
    }

    let coeffs = LeadingCoeffs {
        constant: c[0],
        eps_log: c[1],
        eps: c[2],
        abs_eps: c[3],
    };
    Ok(ExpansionReport {
        model: model.name.clone(),
        m: model.dim().get(),
        t,
        eta: eta.to_vec(),
        a0: model.a0,
        h0: model.h0,
        order,
        coeffs,
        a_m: c[0] / model.a0,
        b_m: -c[1] / model.a0,
        rows,
        residual_max,
        condition: cond,
        truncations,
    })
}

/// d_m from two fits at different t: the eps coefficient moves by
/// -d (m-2)^2/8 (log t1 - log t2) per unit a(xi0).
pub fn d_from_t_pair(r1: &ExpansionReport, r2: &ExpansionReport) -> f64 {
    let m = r1.m as f64;
    -(r1.coeffs.eps - r2.coeffs.eps) / (r1.a0 * log_coefficient(m) * (r1.t.ln() - r2.t.ln()))
}

/// Predicted change of the |eps| coefficient when h shifts by dh: d C t dh a0.
pub fn h_shift_prediction(m: usize, d_m: f64, t: f64, dh: f64, a0: f64) -> f64 {
    a0 * d_m * mass_coefficient(m as f64) * t * dh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(basis_size(1), 4);
        assert_eq!(basis_size(3), 18);
    }

    #[test]
    fn recovers_synthetic_coefficients() {
        let truth = [0.7, -0.3, 0.11, 0.05];
        let data: Vec<(f64, f64)> = default_ladder()
            .into_iter()
            .map(|e| {
                let l = e.abs().ln();
                (e, truth[0] + truth[1] * e * l + truth[2] * e + truth[3] * e.abs() + 0.4 * e * e * l * l)
            })
            .collect();
        let (c, _, _) = fit_energies(&data, 3).unwrap();
        for i in 0..4 {
            assert!((c[i] - truth[i]).abs() < 1e-8, "coef {i}: {}", c[i]);
        }
    }

    #[test]
    fn one_sided_ladder_rejected() {
        let data: Vec<(f64, f64)> = (0..30).map(|k| (2f64.powi(-k - 6), 1.0)).collect();
        assert!(matches!(fit_energies(&data, 3), Err(BlabError::IllConditionedFit(_))));
    }
}
