//! Reference values computed independently (30-digit radial quadrature and
//! Beta functions straight from the definitions) and frozen here.

#![allow(clippy::excessive_precision)]

use blab_core::bubble::{alpha, bubble_eval, Dimension};
use blab_core::energy::identities::{lock_a_value, lock_b_value, LockTarget};
use blab_core::energy::phi::{curvature_coefficient, log_coefficient, mass_coefficient, ThetaConvention};
use blab_core::moments::{
    bubble_integrals_closed, bubble_integrals_quadrature, k_pow, moment_closed, moment_quadrature, sphere_volume,
    spherical_moment,
};

fn dim(m: usize) -> Dimension {
    Dimension::new(m).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// (m, alpha_m, int |grad U|^2 = int U^(2*), lock A integral, lock B integral)
const BUBBLE_TABLE: &[(usize, f64, f64, f64, f64)] = &[
    (5, 7.6219912223192210442, 844.36026476273855969, 253.30807942882156791, 84.436026476273855969),
    (6, 24.0, 7143.8461471410785684, 892.98076839263482105, 595.32051226175654737),
    (9, 1408.7890311303900304, 6227742.236170424931, 207591.4078723474977, 345985.6797872458295),
    (12, 157744.09656148784068, 8630028709.081174375, 134844198.57939334961, 359584529.54504893229),
];

#[test]
fn bubble_normalization_and_energy() {
    for &(m, a, energy, _, _) in BUBBLE_TABLE {
        let d = dim(m);
        assert!(rel(alpha(d), a) < 1e-14, "alpha_{m}");
        assert!(rel(bubble_eval(d, &vec![0.0; m]).unwrap(), a) < 1e-14);
        assert!(rel(k_pow(d), energy) < 1e-12, "K^-m for m = {m}");
        for b in [bubble_integrals_quadrature(d, 0).unwrap(), bubble_integrals_closed(d, 0).unwrap()] {
            assert!(rel(b.grad, energy) < 1e-10, "grad m = {m}");
            assert!(rel(b.crit, energy) < 1e-10, "crit m = {m}");
        }
    }
}

#[test]
fn bubble_value_off_centre() {
    // U(z) = alpha (1 + |z|^2)^(-(m-2)/2) at |z|^2 = 3
    let z = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let want = 1408.7890311303900304 * 4f64.powf(-3.5);
    assert!(rel(bubble_eval(dim(9), &z).unwrap(), want) < 1e-14);
}

#[test]
fn lock_integrals() {
    for &(m, _, energy, lock_a, lock_b) in BUBBLE_TABLE {
        let d = dim(m);
        assert!(rel(lock_a_value(d).unwrap(), lock_a) < 1e-9, "lock A m = {m}");
        assert!(rel(lock_b_value(d).unwrap(), lock_b) < 1e-9, "lock B m = {m}");
        assert!(rel(lock_b, energy / (2.0 * m as f64)) < 1e-15);
        // the integral is half the printed target
        assert!(rel(LockTarget::Verified.value(d), lock_a) < 1e-12);
        assert!(rel(LockTarget::Printed.value(d), 2.0 * lock_a) < 1e-12);
    }
}

#[test]
fn moment_values() {
    let table = [
        (3.0, 0.5, std::f64::consts::FRAC_PI_8),
        (6.0, 2.0, 0.033333333333333333333),
        (9.0, 3.5, 0.00335558297349984019),
        (4.5, 1.25, 0.11036158793460547134),
        (12.0, 7.5, 0.0011684619282722657804),
        // anchors I^(m/2)_m for m = 5, 6, 9, 12
        (5.0, 2.5, 0.12271846303085129838),
        (6.0, 3.0, 0.05),
        (9.0, 4.5, 0.0043143209659283659586),
        (12.0, 6.0, 0.00043290043290043290043),
    ];
    for (p, q, v) in table {
        assert!(rel(moment_closed(p, q).unwrap(), v) < 1e-13, "closed I^{q}_{p}");
        assert!(rel(moment_quadrature(p, q).unwrap(), v) < 1e-10, "quadrature I^{q}_{p}");
    }
    assert!(moment_closed(2.0, 1.0).is_err());
    assert!(moment_closed(3.0, -1.5).is_err());
}

#[test]
fn sphere_volumes_and_moments() {
    use std::f64::consts::PI;
    assert!(rel(sphere_volume(1), 2.0 * PI) < 1e-14);
    assert!(rel(sphere_volume(2), 4.0 * PI) < 1e-14);
    assert!(rel(sphere_volume(4), 26.318945069571622984) < 1e-14);
    assert!(rel(sphere_volume(8), 29.686580124648361824) < 1e-14);
    for m in [5usize, 9, 12] {
        let s = sphere_volume(m - 1);
        let mf = m as f64;
        let mut a = vec![0u32; m];
        a[0] = 2;
        assert!(rel(spherical_moment(m, &a), s / mf) < 1e-13);
        a[0] = 4;
        assert!(rel(spherical_moment(m, &a), 3.0 * s / (mf * (mf + 2.0))) < 1e-13);
        a[0] = 2;
        a[1] = 2;
        assert!(rel(spherical_moment(m, &a), s / (mf * (mf + 2.0))) < 1e-13);
        a[1] = 1;
        assert_eq!(spherical_moment(m, &a), 0.0);
    }
}

#[test]
fn reduced_energy_coefficients() {
    // m = 9
    assert!(rel(curvature_coefficient(9.0), 7.0 / 32.0) < 1e-15);
    assert!(rel(log_coefficient(9.0), 6.125) < 1e-15);
    assert!(rel(mass_coefficient(9.0), 16.0 / 35.0) < 1e-15);
    assert!(rel(ThetaConvention::Verified.laplacian_coefficient(9.0), 21.0 / 32.0) < 1e-15);
    assert!(rel(ThetaConvention::Printed.laplacian_coefficient(9.0), 21.0 / 16.0) < 1e-15);
}
