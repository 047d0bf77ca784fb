//! Preconditioned conjugate gradients, MINRES and restarted GMRES on plain vectors.

use crate::discrete::dot;
use crate::error::{BlabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    /// GMRES restart length (ignored by CG)
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            rel_tol: 1e-12,
            max_iter: 1000,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// CG for symmetric positive definite systems. Fails if the tolerance is not
/// reached or a nonpositive curvature direction shows up.
pub fn cg<A, P>(apply: A, precond: P, b: &[f64], x0: Option<&[f64]>, opts: KrylovOptions) -> Result<KrylovResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok(KrylovResult {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..opts.max_iter {
        let rn = norm(&r);
        if rn <= opts.rel_tol * bn {
            return Ok(KrylovResult {
                x,
                iterations: it,
                rel_residual: rn / bn,
                converged: true,
            });
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(BlabError::LinearSolve(format!(
                "operator is not positive definite (p^T A p = {pap:e} at CG iteration {it})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = norm(&r);
    Err(BlabError::LinearSolve(format!(
        "CG stalled at relative residual {:e} after {} iterations",
        rn / bn,
        opts.max_iter
    )))
}

/// Restarted GMRES(k) with modified Gram-Schmidt and Givens rotations.
pub fn gmres<A>(apply: A, b: &[f64], x0: Option<&[f64]>, opts: KrylovOptions) -> Result<KrylovResult>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let bn = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bn == 0.0 {
        return Ok(KrylovResult {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let k = opts.restart.max(1);
    let mut total = 0;
    let mut rel = f64::INFINITY;
    while total < opts.max_iter {
        let ax = apply(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        rel = beta / bn;
        if rel <= opts.rel_tol {
            return Ok(KrylovResult {
                x,
                iterations: total,
                rel_residual: rel,
                converged: true,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0; k]; k + 1];
        let mut cs = vec![0.0; k];
        let mut sn = vec![0.0; k];
        let mut g = vec![0.0; k + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..k {
            if total >= opts.max_iter {
                break;
            }
            total += 1;
            let mut w = apply(&v[j])?;
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                for (wq, vq) in w.iter_mut().zip(&v[i]) {
                    *wq -= hij * vq;
                }
            }
            let wn = norm(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            rel = g[j + 1].abs() / bn;
            if rel <= opts.rel_tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|t| t / wn).collect());
        }
        if used == 0 {
            break;
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for q in i + 1..used {
                s -= h[i][q] * y[q];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xq, vq) in x.iter_mut().zip(&v[i]) {
                *xq += yi * vq;
            }
        }
        if rel <= opts.rel_tol {
            let ax = apply(&x)?;
            let rn = norm(&b.iter().zip(&ax).map(|(a, c)| a - c).collect::<Vec<_>>());
            rel = rn / bn;
            if rel <= opts.rel_tol * 10.0 {
                return Ok(KrylovResult {
                    x,
                    iterations: total,
                    rel_residual: rel,
                    converged: true,
                });
            }
        }
    }
    Ok(KrylovResult {
        x,
        iterations: total,
        rel_residual: rel,
        converged: false,
    })
}

/// Preconditioned MINRES for symmetric, possibly indefinite systems. The
/// preconditioner must be symmetric positive definite. Convergence is judged
/// on the true residual; the recurrence restarts from it when they disagree.
pub fn minres<A, P>(apply: A, precond: P, b: &[f64], x0: Option<&[f64]>, opts: KrylovOptions) -> Result<KrylovResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        return Ok(KrylovResult {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let not_spd = || BlabError::LinearSolve("MINRES preconditioner is not positive definite".into());
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut total = 0;
    let mut rel;
    loop {
        let ax = apply(&x);
        let mut r1: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let rn = norm(&r1);
        rel = rn / bn;
        if rel <= opts.rel_tol || total >= opts.max_iter {
            break;
        }
        let mut y = precond(&r1);
        let b1 = dot(&r1, &y);
        if !(b1 > 0.0) {
            return Err(not_spd());
        }
        let beta1 = b1.sqrt();
        // stop the recurrence a little early and let the outer loop check
        let target = 0.5 * opts.rel_tol * bn / rn * beta1;
        let mut r2 = r1.clone();
        let (mut oldb, mut beta) = (0.0, beta1);
        let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
        let (mut cs, mut sn) = (-1.0, 0.0);
        let mut w = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut k = 0;
        while total < opts.max_iter {
            total += 1;
            k += 1;
            let v: Vec<f64> = y.iter().map(|t| t / beta).collect();
            y = apply(&v);
            if k >= 2 {
                let f = beta / oldb;
                for (yi, ri) in y.iter_mut().zip(&r1) {
                    *yi -= f * ri;
                }
            }
            let alfa = dot(&v, &y);
            let f = alfa / beta;
            for (yi, ri) in y.iter_mut().zip(&r2) {
                *yi -= f * ri;
            }
            r1 = std::mem::replace(&mut r2, y);
            y = precond(&r2);
            oldb = beta;
            let bb = dot(&r2, &y);
            if bb < 0.0 {
                return Err(not_spd());
            }
            beta = bb.sqrt();
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta);
            if gamma == 0.0 {
                break;
            }
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;
            let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
            w = (0..n).map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma).collect();
            for (xi, wi) in x.iter_mut().zip(&w) {
                *xi += phi * wi;
            }
            if phibar <= target || beta == 0.0 {
                break;
            }
        }
    }
    Ok(KrylovResult {
        x,
        iterations: total,
        rel_residual: rel,
        converged: rel <= opts.rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                2.5 * x[i] - l - r
            })
            .collect()
    }

    #[test]
    fn cg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let res = cg(laplace_1d, |r| r.to_vec(), &b, None, KrylovOptions::default()).unwrap();
        let ax = laplace_1d(&res.x);
        for i in 0..50 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn minres_solves_saddle_point_system() {
        let n = 40;
        let c: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let op = |x: &[f64]| -> Vec<f64> {
            let mut y = laplace_1d(&x[..n]);
            for i in 0..n {
                y[i] += c[i] * x[n];
            }
            y.push(dot(&c, &x[..n]));
            y
        };
        let b: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.7).sin()).collect();
        let opts = KrylovOptions {
            rel_tol: 1e-12,
            max_iter: 500,
            restart: 0,
        };
        let res = minres(op, |r| r.to_vec(), &b, None, opts).unwrap();
        assert!(res.converged);
        let ax = op(&res.x);
        for i in 0..=n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let op = |x: &[f64]| -> Result<Vec<f64>> {
            let n = x.len();
            Ok((0..n)
                .map(|i| 3.0 * x[i] + if i + 1 < n { 0.7 * x[i + 1] } else { 0.0 } - if i > 0 { 0.2 * x[i - 1] } else { 0.0 })
                .collect())
        };
        let b: Vec<f64> = (0..80).map(|i| 1.0 + (i as f64 * 0.3).cos()).collect();
        let opts = KrylovOptions {
            rel_tol: 1e-13,
            max_iter: 400,
            restart: 10,
        };
        let res = gmres(op, &b, None, opts).unwrap();
        assert!(res.converged);
        let ax = op(&res.x).unwrap();
        for i in 0..80 {
            assert!((ax[i] - b[i]).abs() < 1e-11);
        }
    }
}
