use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blab_core::bubble::{bubble_eval, bubble_rescaled, kernel_eval, kernel_gradient, kernel_residual, radial_nodes, BubbleParams, Dimension};
use blab_core::config::{validate_ladder, ModelSpec};
use blab_core::discrete::{dot, AnsatzParams, GridSpec, RadialSpec};
use blab_core::energy::phi::regime_decision;
use blab_core::moments::{moment_closed, moment_quadrature, recurrence_defects, rescaled_norms};
use blab_core::report::{summary_json, table_csv, Outcome, Table};
use blab_core::solver::ls::LsContext;

fn dim(m: usize) -> Dimension {
    Dimension::new(m).unwrap()
}

fn point(m: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_agree_and_recur(p in 2.6f64..14.0, frac in 0.0f64..0.95) {
        let q = frac * (p - 2.1);
        let c = moment_closed(p, q).unwrap();
        let n = moment_quadrature(p, q).unwrap();
        prop_assert!((c - n).abs() <= 1e-9 * c);
        let (r1, r2) = recurrence_defects(p, q).unwrap();
        prop_assert!(r1 < 1e-11 && r2 < 1e-11, "{r1:e} {r2:e}");
    }

    #[test]
    fn bubble_is_positive_and_radially_decreasing(m in 5usize..=12, seed in any::<u64>()) {
        let z = point(m, seed, 3.0);
        let u = bubble_eval(dim(m), &z).unwrap();
        let z2: Vec<f64> = z.iter().map(|x| 1.1 * x).collect();
        prop_assert!(u > 0.0);
        prop_assert!(bubble_eval(dim(m), &z2).unwrap() <= u);
    }

    #[test]
    fn translation_kernel_is_partial_derivative(m in 5usize..=12, seed in any::<u64>(), i in 1usize..=5) {
        let d = dim(m);
        let z = point(m, seed, 2.0);
        let h = 1e-5;
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[i - 1] += h;
        zm[i - 1] -= h;
        let fd = (bubble_eval(d, &zp).unwrap() - bubble_eval(d, &zm).unwrap()) / (2.0 * h);
        let v = kernel_eval(d, i, &z).unwrap();
        prop_assert!((fd - v).abs() <= 1e-6 * (1.0 + v.abs()) * bubble_eval(d, &vec![0.0; m]).unwrap());
    }

    #[test]
    fn dilation_kernel_is_scale_derivative(m in 5usize..=12, seed in any::<u64>()) {
        // V_0 = d/dl [l^(-k) U(z/l)] at l = 1
        let d = dim(m);
        let z = point(m, seed, 2.0);
        let h = 1e-5;
        let at = |l: f64| bubble_rescaled(d, &BubbleParams::new(l, vec![0.0; m]).unwrap(), &z).unwrap();
        let fd = (at(1.0 + h) - at(1.0 - h)) / (2.0 * h);
        let v = kernel_eval(d, 0, &z).unwrap();
        prop_assert!((fd - v).abs() <= 1e-6 * bubble_eval(d, &vec![0.0; m]).unwrap());
    }

    #[test]
    fn kernel_gradients_match_differences(m in 5usize..=9, seed in any::<u64>(), i in 0usize..=5) {
        let d = dim(m);
        let z = point(m, seed, 1.5);
        let g = kernel_gradient(d, i, &z).unwrap();
        let scale = bubble_eval(d, &vec![0.0; m]).unwrap();
        for j in 0..m {
            let h = 1e-5;
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let fd = (kernel_eval(d, i, &zp).unwrap() - kernel_eval(d, i, &zm).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * scale, "j = {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn energy_is_scale_invariant(m in 5usize..=12, ld in -3.0f64..3.0) {
        let d = dim(m);
        let (g1, c1) = rescaled_norms(d, 1.0).unwrap();
        let (g, c) = rescaled_norms(d, 10f64.powf(ld)).unwrap();
        prop_assert!((g - g1).abs() <= 1e-9 * g1);
        prop_assert!((c - c1).abs() <= 1e-9 * c1);
    }

    #[test]
    fn regime_depends_on_sign_agreement_only(theta in -10.0f64..10.0, pos in any::<bool>(), m in 9usize..=14) {
        prop_assume!(theta != 0.0);
        let s: i8 = if pos { 1 } else { -1 };
        let d = regime_decision(dim(m), theta, s).unwrap();
        prop_assert_eq!(d.solve, (theta > 0.0) == pos);
        let flipped = regime_decision(dim(m), -theta, -s).unwrap();
        prop_assert_eq!(flipped.solve, d.solve);
    }

    #[test]
    fn ladders_are_accepted_iff_monotone_one_signed(mut mags in proptest::collection::vec(1e-8f64..1.0, 1..12), neg in any::<bool>()) {
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        mags.dedup();
        let s = if neg { -1.0 } else { 1.0 };
        let l: Vec<f64> = mags.iter().map(|x| s * x).collect();
        prop_assert!(validate_ladder(&l).is_ok());
        if l.len() > 1 {
            let mut r = l.clone();
            r.reverse();
            prop_assert!(validate_ladder(&r).is_err());
            let mut mixed = l.clone();
            mixed[1] = -mixed[1];
            prop_assert!(validate_ladder(&mixed).is_err());
        }
    }

    #[test]
    fn csv_values_round_trip(rows in proptest::collection::vec((any::<f64>(), -1e300f64..1e300), 1..20)) {
        let mut t = Table::new("t", &["a", "b"]);
        for (a, b) in &rows {
            prop_assume!(a.is_finite());
            t.push(vec![*a, *b]);
        }
        let text = table_csv(&t).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<(f64, f64)> = rd.deserialize().map(|r| r.unwrap()).collect();
        prop_assert_eq!(back.len(), rows.len());
        for ((a, b), (x, y)) in rows.iter().zip(&back) {
            prop_assert_eq!(a.to_bits(), x.to_bits());
            prop_assert_eq!(b.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn kernel_functions_solve_linearized_equation() {
    let nodes = radial_nodes(200, 20.0);
    for m in [5, 6, 9, 12] {
        for i in [0, 1] {
            let r = kernel_residual(dim(m), i, &nodes).unwrap();
            assert!(r < 1e-9, "m = {m}, V_{i}: {r:e}");
        }
    }
}

#[test]
fn summary_json_is_reproducible() {
    let mut o = Outcome::new("reduce");
    o.section("x", &vec![1.0, 2.0]);
    let a = summary_json(&o, &"cfg", 5).unwrap();
    let b = summary_json(&o, &"cfg", 5).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], "blab.summary/1");
    assert!(!a.contains("time"));
}

/// A coarse m = 9 radial chart for the operator properties.
fn context() -> &'static LsContext {
    static CTX: OnceLock<LsContext> = OnceLock::new();
    CTX.get_or_init(|| {
        let m = dim(9);
        let model = ModelSpec::catalog("flat-weighted").unwrap().build(m, 0).unwrap();
        let spec = GridSpec::Radial(RadialSpec {
            hz: 1.0 / 32.0,
            growth: 2e-3,
            max_cells: 400_000,
        });
        let params = AnsatzParams::new(1e-3, 1.0, vec![0.0; 9], (0.1, 10.0)).unwrap();
        LsContext::new(&model, params, &spec).unwrap()
    })
}

fn random_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projection_is_h_orthogonal_and_idempotent(seed in any::<u64>()) {
        let ctx = context();
        let x = random_field(ctx.w.len(), seed);
        let p = ctx.project_perp(&x);
        prop_assert!(ctx.orthogonality(&p) < 1e-10);
        let pp = ctx.project_perp(&p);
        let d: Vec<f64> = p.iter().zip(&pp).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&d, &d).sqrt() <= 1e-12 * dot(&p, &p).sqrt());
    }

    #[test]
    fn linearized_operator_is_h_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let ctx = context();
        let n = ctx.w.len();
        let u = ctx.project_perp(&random_field(n, s1));
        let v = ctx.project_perp(&random_field(n, s2));
        let lu = ctx.apply_l(&u).unwrap();
        let lv = ctx.apply_l(&v).unwrap();
        let a = dot(&ctx.chart.apply(&lu), &v);
        let b = dot(&ctx.chart.apply(&u), &lv);
        let scale = dot(&ctx.chart.apply(&u), &u).sqrt() * dot(&ctx.chart.apply(&v), &v).sqrt();
        prop_assert!((a - b).abs() <= 1e-9 * scale, "{a:e} vs {b:e}");
    }
}

#[test]
fn remainder_lies_in_the_complement() {
    let ctx = context();
    let r = ctx.remainder().unwrap();
    assert!(ctx.orthogonality(&r) < 1e-10);
}
