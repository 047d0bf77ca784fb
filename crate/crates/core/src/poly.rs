//! Sparse multivariate polynomials with real coefficients. Exponents are packed
//! five bits per variable into a u64, so at most 12 variables of degree < 32.

use std::collections::HashMap;

const BITS: u32 = 5;
const MASK: u64 = (1 << BITS) - 1;
pub const MAX_VARS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: HashMap<u64, f64>,
}

fn pack(exps: &[u32]) -> u64 {
    exps.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &e)| acc | ((e as u64) << (BITS * i as u32)))
}

pub fn unpack(key: u64, nvars: usize) -> Vec<u32> {
    (0..nvars).map(|i| ((key >> (BITS * i as u32)) & MASK) as u32).collect()
}

fn key_degree(key: u64, nvars: usize) -> u32 {
    (0..nvars).map(|i| ((key >> (BITS * i as u32)) & MASK) as u32).sum()
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS, "at most {MAX_VARS} variables");
        Poly {
            nvars,
            terms: HashMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        if c != 0.0 {
            p.terms.insert(0, c);
        }
        p
    }

    /// c * x_i
    pub fn var(nvars: usize, i: usize, c: f64) -> Self {
        let mut e = vec![0u32; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(pack(&e), c);
        p
    }

    /// Affine polynomial c0 + sum_i c[i] x_i.
    pub fn affine(c0: f64, c: &[f64]) -> Self {
        let mut p = Self::constant(c.len(), c0);
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                p.add_term(&{
                    let mut e = vec![0u32; c.len()];
                    e[i] = 1;
                    e
                }, ci);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: &[u32], c: f64) {
        debug_assert!(exps.iter().all(|&e| (e as u64) <= MASK));
        *self.terms.entry(pack(exps)).or_insert(0.0) += c;
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(&pack(exps)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        self.terms.iter().map(move |(&k, &c)| (unpack(k, self.nvars), c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&k| key_degree(k, self.nvars)).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_assign_scaled(other, 1.0);
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Poly, s: f64) {
        assert_eq!(self.nvars, other.nvars);
        for (&k, &c) in &other.terms {
            *self.terms.entry(k).or_insert(0.0) += s * c;
        }
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(&k, &c)| (k, c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut terms: HashMap<u64, f64> = HashMap::with_capacity(self.terms.len() * other.terms.len());
        for (&k1, &c1) in &self.terms {
            for (&k2, &c2) in &other.terms {
                // per-variable exponents never overflow their 5-bit field for the
                // degrees used here, so packed keys simply add
                *terms.entry(k1 + k2).or_insert(0.0) += c1 * c2;
            }
        }
        Poly {
            nvars: self.nvars,
            terms,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&ei, &xi)| xi.powi(ei as i32)).product::<f64>())
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (mut e, c) in self.terms() {
            if e[i] > 0 {
                let f = e[i] as f64;
                e[i] -= 1;
                out.add_term(&e, c * f);
            }
        }
        out
    }

    /// Drop coefficients below `tol` in absolute value.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    /// Sum of coefficient * weight(exponents) grouped by total degree.
    pub fn reduce_by_degree<F: Fn(&[u32]) -> f64>(&self, weight: F) -> Vec<f64> {
        let mut out = vec![0.0; self.degree() as usize + 1];
        for (e, c) in self.terms() {
            let d: u32 = e.iter().sum();
            out[d as usize] += c * weight(&e);
        }
        out
    }

    /// Largest |coefficient| difference between two polynomials.
    pub fn max_diff(&self, other: &Poly) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, c) in &self.terms {
            worst = worst.max((c - other.terms.get(k).copied().unwrap_or(0.0)).abs());
        }
        for (k, c) in &other.terms {
            if !self.terms.contains_key(k) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiply_and_evaluate() {
        let x = Poly::affine(1.0, &[1.0, 0.0]);
        let y = Poly::affine(-2.0, &[0.0, 3.0]);
        let p = x.mul(&y).mul(&x);
        let pt = [0.7, -1.3];
        let direct = (1.0 + 0.7f64).powi(2) * (-2.0 + 3.0 * -1.3);
        assert!((p.eval(&pt) - direct).abs() < 1e-12);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn derivative_of_square() {
        let x = Poly::var(3, 2, 2.0);
        let p = x.mul(&x);
        let d = p.derivative(2);
        assert!((d.coefficient(&[0, 0, 1]) - 8.0).abs() < 1e-15);
    }
}
