//! The four pipelines behind the CLI. Each returns an `Outcome` holding its
//! checks, the data for the JSON summary, CSV tables and plots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{alpha, bubble_residual, kernel_residual, radial_nodes, Dimension, Profile};
use crate::checks::Check;
use crate::config::{Command, FourthMomentForm, ModelSpec, RunConfig};
use crate::discrete::{dot, GridSpec};
use crate::energy::fit::{d_from_t_pair, expansion_fit, h_shift_prediction};
use crate::energy::identities::{identity_checks, radial_reduction_checks};
use crate::energy::phi::{log_coefficient, regime_decision, theta};
use crate::error::{BlabError, Result};
use crate::geometry::model::{round_sphere, ManifoldModel};
use crate::moments::{k_pow, moment_integral, moment_quadrature, recurrence_defects, recurrence_defects_quadrature, sphere_volume, standard_pairs};
use crate::report::{Outcome, Plot, Series, Table};
use crate::solver::ls::LsOptions;
use crate::solver::reduced::{log_slope, multipliers_at, reduce_ladder, reduced_solve, reduced_target, ReduceOptions, ReducedSolution};
use crate::solver::verify::{concentration, gradient_scaling, refinement_study, residual_report};

const BUBBLE: &str = "bubble_calculus";
const GEOMETRY: &str = "manifold_geometry";
const ENERGY: &str = "reduced_energy";
const SOLVER: &str = "ls_solver";

pub fn run(command: Command, cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    match command {
        Command::VerifyIdentities => verify_identities(cfg),
        Command::FitExpansion => fit_expansion(cfg, seed),
        Command::Reduce => reduce(cfg, seed),
        Command::Continuation => continuation(cfg, seed),
    }
}

/// Radius for the 200-node bubble residual grid.
pub const BUBBLE_GRID_RADIUS: f64 = 20.0;

/// I_m^(m/2) against 2 K^(-m) / (alpha^2 (m-2)^2 omega_(m-1)).
pub fn anchor_check(m: Dimension, tol: f64) -> Result<Check> {
    let mf = m.as_f64();
    let target = 2.0 * k_pow(m) / (alpha(m).powi(2) * (mf - 2.0).powi(2) * sphere_volume(m.get() - 1));
    Ok(Check::relative(BUBBLE, format!("anchor_I_m_half_m_{}", m.get()), moment_quadrature(mf, 0.5 * mf)?, target, tol))
}

/// Scalar curvature of the round unit sphere jet against m (m - 1).
pub fn curvature_check(m: Dimension, tol: f64) -> Result<Check> {
    let mf = m.as_f64();
    let s = round_sphere(m, 1.0, 1.0)?.scalar_curvature();
    Ok(Check::relative(GEOMETRY, format!("round_sphere_scalar_curvature_m{}", m.get()), s, mf * (mf - 1.0), tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeRow {
    pub model: String,
    pub theta: f64,
    pub sign_eps: i8,
    pub solve: bool,
    pub expected: bool,
    pub reason: String,
}

/// Solve/refuse decisions for Theta of both signs against eps of both signs.
pub fn regime_table(cfg: &RunConfig) -> Result<(Vec<RegimeRow>, Vec<Check>)> {
    let m = cfg.dimension();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for name in ["flat-weighted", "flat-weighted-negative"] {
        let model = ModelSpec::catalog(name)?.build(m, 0)?;
        let th = theta(&model, cfg.conventions.theta)?;
        for sign in [1i8, -1] {
            let d = regime_decision(m, th, sign)?;
            let expected = (th > 0.0 && sign > 0) || (th < 0.0 && sign < 0);
            // the solver must agree with the decision
            let opts = ReduceOptions {
                convention: cfg.conventions.theta,
                ..ReduceOptions::default()
            };
            let solver_accepts = reduced_target(&model, sign as f64 * 1e-3, &opts).is_ok();
            checks.push(Check::flag(
                ENERGY,
                format!("regime_theta{}_eps{}", if th > 0.0 { "pos" } else { "neg" }, if sign > 0 { "pos" } else { "neg" }),
                d.solve == expected && solver_accepts == expected,
            ));
            rows.push(RegimeRow {
                model: name.into(),
                theta: th,
                sign_eps: sign,
                solve: d.solve,
                expected,
                reason: d.reason,
            });
        }
    }
    Ok((rows, checks))
}

fn verify_identities(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::new(Command::VerifyIdentities.name());
    let nodes = radial_nodes(200, BUBBLE_GRID_RADIUS);

    let mut bubble = Table::new("bubble_residuals", &["m", "bubble", "kernel_v0", "kernel_v1"]);
    for &d in &cfg.dims {
        let m = Dimension::new(d)?;
        let r = bubble_residual(m, &nodes);
        let k0 = kernel_residual(m, 0, &nodes)?;
        let k1 = kernel_residual(m, 1, &nodes)?;
        out.checks.push(Check::at_most(BUBBLE, format!("bubble_pde_residual_m{d}"), r, cfg.tol("bubble_residual")));
        out.info.push(Check::at_most(BUBBLE, format!("kernel_v0_residual_m{d}"), k0, cfg.tol("bubble_residual")));
        out.info.push(Check::at_most(BUBBLE, format!("kernel_v1_residual_m{d}"), k1, cfg.tol("bubble_residual")));
        bubble.push(vec![d as f64, r, k0, k1]);
    }

    let mut moments = Table::new(
        "moments",
        &["p", "q", "closed", "quadrature", "agreement", "recurrence_1", "recurrence_2", "recurrence_1_quad", "recurrence_2_quad"],
    );
    for (p, q) in standard_pairs() {
        let mi = moment_integral(p, q)?;
        let (r1, r2) = recurrence_defects(p, q)?;
        let (s1, s2) = recurrence_defects_quadrature(p, q)?;
        out.checks.push(Check::at_most(BUBBLE, format!("moment_closed_vs_quadrature_p{p}_q{q}"), mi.agreement(), cfg.tol("moment")));
        out.checks.push(Check::at_most(BUBBLE, format!("recurrence_p_p{p}_q{q}"), r1, cfg.tol("recurrence")));
        out.checks.push(Check::at_most(BUBBLE, format!("recurrence_q_p{p}_q{q}"), r2, cfg.tol("recurrence")));
        out.info.push(Check::at_most(BUBBLE, format!("recurrence_quadrature_p{p}_q{q}"), s1.max(s2), cfg.tol("moment")));
        moments.push(vec![p, q, mi.value, mi.quadrature, mi.agreement(), r1, r2, s1, s2]);
    }
    for &d in &cfg.dims {
        out.checks.push(anchor_check(Dimension::new(d)?, cfg.tol("anchor"))?);
    }

    let m = cfg.dimension();
    if m.get() >= 5 {
        for c in identity_checks(m, cfg.tol("identity"), cfg.conventions.lock_a)? {
            let asserted = !matches!(
                (c.name.as_str(), cfg.conventions.fourth_moment),
                ("fourth_moment_b", FourthMomentForm::Isotropic) | ("fourth_moment_b_isotropic", FourthMomentForm::Printed)
            );
            if asserted {
                out.checks.push(c);
            } else {
                out.info.push(c);
            }
        }
        out.info.extend(radial_reduction_checks(m, cfg.tol("moment"))?);
    }

    let mut dims = vec![3];
    if m.get() != 3 {
        dims.push(m.get());
    }
    for d in dims {
        out.checks.push(curvature_check(Dimension::new(d)?, cfg.tol("curvature"))?);
    }

    if m.get() >= 9 {
        let (rows, checks) = regime_table(cfg)?;
        out.checks.extend(checks);
        out.section("regime", &rows);
    }

    let p = Profile::new(m);
    let mut prof = Table::new("bubble_profile", &["r", "U", "V0", "dU_dr"]);
    for i in 0..=200 {
        let r = 6.0 * i as f64 / 200.0;
        prof.push(vec![r, p.u(r), p.v0(r), p.du(r)]);
    }
    out.plots.push(Plot {
        name: "bubble_profile".into(),
        title: format!("bubble and V0, m = {}", m.get()),
        x_label: "r".into(),
        y_label: "value".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                label: "U".into(),
                points: prof.rows.iter().map(|r| (r[0], r[1])).collect(),
            },
            Series {
                label: "V0".into(),
                points: prof.rows.iter().map(|r| (r[0], r[2])).collect(),
            },
        ],
    });
    out.tables.extend([bubble, moments, prof]);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct FitSummary {
    model: String,
    m: usize,
    t: f64,
    t2: f64,
    dh: f64,
    a_m: f64,
    a_m_target: f64,
    b_m: f64,
    d_m: f64,
    b_over_d: f64,
    b_over_d_target: f64,
    h_shift: f64,
    h_shift_predicted: f64,
    residual_max: f64,
    condition: f64,
    truncations: Vec<(f64, f64)>,
}

fn fit_expansion(cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Command::FitExpansion.name());
    let model = cfg.build_model(Command::FitExpansion, seed)?;
    let m = model.dim();
    let mf = m.as_f64();
    let mags: Vec<f64> = cfg.ladder(Command::FitExpansion).iter().map(|e| e.abs()).collect();
    let ladder: Vec<f64> = mags.iter().copied().chain(mags.iter().map(|e| -e)).collect();
    let eta = vec![0.0; m.get()];
    let f = cfg.fit;
    let shifted = model.clone().with_h(model.h0 + f.dh);
    let jobs = [(&model, f.t), (&model, f.t2), (&shifted, f.t)];
    let reports: Vec<_> = jobs
        .par_iter()
        .map(|(mo, t)| expansion_fit(mo, *t, &eta, &ladder))
        .collect::<Result<_>>()?;
    let (r1, r2, r3) = (&reports[0], &reports[1], &reports[2]);
    let d = d_from_t_pair(r1, r2);
    let a_target = k_pow(m) / mf;
    let bd_target = log_coefficient(mf);
    let shift = r3.coeffs.abs_eps - r1.coeffs.abs_eps;
    let shift_pred = h_shift_prediction(m.get(), d, f.t, f.dh, model.a0);

    out.checks.push(Check::relative(ENERGY, "a_m_leading_coefficient", r1.a_m, a_target, cfg.tol("a_m")));
    out.checks.push(Check::relative(ENERGY, "b_m_over_d_m", r1.b_m / d, bd_target, cfg.tol("b_over_d")));
    out.checks.push(Check::relative(ENERGY, "h_shift_abs_eps_coefficient", shift, shift_pred, cfg.tol("h_shift")));

    let mut rows = Table::new("fit_rows", &["eps", "J", "fit_residual"]);
    for r in &r1.rows {
        rows.push(vec![r.eps, r.j_exact, r.fit_residual]);
    }
    let side = |positive: bool| Series {
        label: if positive { "eps > 0" } else { "eps < 0" }.into(),
        points: r1
            .rows
            .iter()
            .filter(|r| (r.eps > 0.0) == positive)
            .map(|r| (r.eps.abs(), r.j_exact - r1.coeffs.constant))
            .collect(),
    };
    out.plots.push(Plot {
        name: "energy_vs_eps".into(),
        title: format!("J_eps(W) - A at t = {}", f.t),
        x_label: "|eps|".into(),
        y_label: "J - A".into(),
        log_x: true,
        log_y: false,
        series: vec![side(true), side(false)],
    });
    out.section(
        "fit",
        &FitSummary {
            model: model.name.clone(),
            m: m.get(),
            t: f.t,
            t2: f.t2,
            dh: f.dh,
            a_m: r1.a_m,
            a_m_target: a_target,
            b_m: r1.b_m,
            d_m: d,
            b_over_d: r1.b_m / d,
            b_over_d_target: bd_target,
            h_shift: shift,
            h_shift_predicted: shift_pred,
            residual_max: r1.residual_max,
            condition: r1.condition,
            truncations: r1.truncations.clone(),
        },
    );
    out.section("reports", &reports);
    out.tables.push(rows);
    Ok(out)
}

pub fn reduce_options(cfg: &RunConfig) -> ReduceOptions {
    ReduceOptions {
        t_interval: cfg.t_interval,
        newton_tol: cfg.tol("newton_tol"),
        ls: LsOptions {
            tol: cfg.tol("ls_tol"),
            ..LsOptions::default()
        },
        convention: cfg.conventions.theta,
        enforce_regime: cfg.enforce_regime,
        ..ReduceOptions::default()
    }
}

/// Records the regime decision; false means the run is refused.
fn regime_gate(out: &mut Outcome, model: &ManifoldModel, eps: f64, opts: &ReduceOptions) -> Result<bool> {
    match reduced_target(model, eps, opts) {
        Ok(_) => {
            out.checks.push(Check::flag(ENERGY, "regime_compatible", true));
            Ok(true)
        }
        Err(e @ (BlabError::RegimeMismatch { .. } | BlabError::DegenerateTheta)) => {
            log::error!("{e}");
            out.checks.push(Check::flag(ENERGY, "regime_compatible", false));
            out.section("diagnostic", &e.to_string());
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
struct LadderRow {
    eps: f64,
    t_eps: f64,
    t0: f64,
    t_rel_error: f64,
    phi_norm_h: f64,
    phi_over_eps_log: f64,
    contraction: Option<f64>,
    residual_h: f64,
    gradient_norm: f64,
    newton_iterations: usize,
    nodes: usize,
    energy: f64,
    min_on_support: f64,
}

fn ladder_row(s: &ReducedSolution) -> LadderRow {
    let sm = s.summary();
    LadderRow {
        eps: s.eps,
        t_eps: s.t_eps,
        t0: s.t0,
        t_rel_error: sm.t_rel_error,
        phi_norm_h: s.state.phi_norm_h,
        phi_over_eps_log: sm.phi_over_eps_log,
        contraction: s.state.contraction,
        residual_h: s.state.residual_h,
        gradient_norm: s.gradient_norm,
        newton_iterations: s.newton_iterations,
        nodes: s.solution.chart.len(),
        energy: s.state.energy,
        min_on_support: sm.min_on_support,
    }
}

/// Per-run checks shared by reduce and continuation.
fn run_checks(out: &mut Outcome, cfg: &RunConfig, sols: &[ReducedSolution]) {
    for s in sols {
        let tag = format!("eps{:.3e}", s.eps);
        out.checks.push(Check::at_most(
            SOLVER,
            format!("contraction_{tag}"),
            s.state.contraction.unwrap_or(0.0),
            cfg.tol("contraction"),
        ));
        out.checks.push(Check::at_most(SOLVER, format!("ls_residual_{tag}"), s.state.residual_h, cfg.tol("ls_tol")));
        out.checks.push(Check::at_most(SOLVER, format!("reduced_gradient_{tag}"), s.gradient_norm, cfg.tol("newton_tol")));
        out.checks.push(Check::at_most(SOLVER, format!("orthogonality_{tag}"), s.state.orthogonality, cfg.tol("orthogonality")));
        out.checks.push(Check::flag(SOLVER, format!("positive_on_support_{tag}"), s.min_on_support() > 0.0));
        out.checks.push(Check::flag(SOLVER, format!("eta_zero_by_symmetry_{tag}"), s.eta_eps.iter().all(|v| *v == 0.0)));
    }
}

fn solution_plots(out: &mut Outcome, sols: &[ReducedSolution]) {
    let mut cross = Table::new("cross_section", &["eps", "r", "r_over_delta", "u", "W", "phi"]);
    for s in sols {
        let chart = &s.solution.chart;
        let delta = (s.eps.abs() * s.t_eps).sqrt();
        let n = chart.dim().get();
        let mut y = vec![0.0; n];
        for i in 0..=240 {
            let r = delta * 12.0 * i as f64 / 240.0;
            y[0] = r;
            let u = chart.interpolate(&s.solution.values, &y);
            let w = chart.interpolate(&s.ansatz.values, &y);
            cross.push(vec![s.eps, r, r / delta, u, w, u - w]);
        }
    }
    let series: Vec<Series> = sols
        .iter()
        .map(|s| {
            let delta = (s.eps.abs() * s.t_eps).sqrt();
            let scale = delta.powf(s.solution.chart.dim().k());
            Series {
                label: format!("eps = {:.2e}", s.eps),
                points: cross
                    .rows
                    .iter()
                    .filter(|r| r[0] == s.eps)
                    .map(|r| (r[2], r[3] * scale))
                    .collect(),
            }
        })
        .collect();
    out.plots.push(Plot {
        name: "solution_cross_section".into(),
        title: "u = W + Phi along the first axis (bubble units)".into(),
        x_label: "|y| / delta".into(),
        y_label: "delta^((m-2)/2) u".into(),
        log_x: false,
        log_y: false,
        series,
    });
    let pts = |f: &dyn Fn(&ReducedSolution) -> (f64, f64)| sols.iter().map(f).collect::<Vec<_>>();
    out.plots.push(Plot {
        name: "t_eps_vs_eps".into(),
        title: "reduced critical point".into(),
        x_label: "|eps|".into(),
        y_label: "t".into(),
        log_x: true,
        log_y: false,
        series: vec![
            Series {
                label: "t_eps".into(),
                points: pts(&|s| (s.eps.abs(), s.t_eps)),
            },
            Series {
                label: "t0".into(),
                points: pts(&|s| (s.eps.abs(), s.t0)),
            },
        ],
    });
    out.plots.push(Plot {
        name: "phi_vs_eps_log".into(),
        title: "correction size".into(),
        x_label: "|eps| |log|eps||".into(),
        y_label: "||Phi||_H".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "||Phi||_H".into(),
            points: pts(&|s| (s.eps.abs() * s.eps.abs().ln().abs(), s.state.phi_norm_h)),
        }],
    });
    out.plots.push(Plot {
        name: "energy_vs_eps".into(),
        title: "J_eps(W + Phi) at the critical point".into(),
        x_label: "|eps|".into(),
        y_label: "J".into(),
        log_x: true,
        log_y: false,
        series: vec![Series {
            label: "J_eps".into(),
            points: pts(&|s| (s.eps.abs(), s.state.energy)),
        }],
    });
    out.tables.push(cross);
}

fn ladder_table(rows: &[LadderRow]) -> Table {
    let mut t = Table::new(
        "ladder",
        &[
            "eps", "t_eps", "t0", "t_rel_error", "phi_norm_h", "phi_over_eps_log", "contraction", "residual_h",
            "gradient_norm", "newton_iterations", "nodes", "energy", "min_on_support",
        ],
    );
    for r in rows {
        t.push(vec![
            r.eps,
            r.t_eps,
            r.t0,
            r.t_rel_error,
            r.phi_norm_h,
            r.phi_over_eps_log,
            r.contraction.unwrap_or(f64::NAN),
            r.residual_h,
            r.gradient_norm,
            r.newton_iterations as f64,
            r.nodes as f64,
            r.energy,
            r.min_on_support,
        ]);
    }
    t
}

/// Random-pair symmetry of the discrete H form and idempotence of pi_perp.
fn operator_invariants(out: &mut Outcome, cfg: &RunConfig, model: &ManifoldModel, s: &ReducedSolution, seed: u64) -> Result<()> {
    let chart = s.solution.chart.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.len();
    let mut worst_adj: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    let opts = reduce_options(cfg);
    let (_, _, interval) = reduced_target(model, s.eps, &opts)?;
    let params = crate::discrete::AnsatzParams::new(s.eps, s.t_eps, s.eta_eps.clone(), interval)?;
    let ctx = crate::solver::ls::LsContext::with_chart(model, params, chart.clone())?;
    for _ in 0..4 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = dot(&chart.apply(&u), &v);
        let b = dot(&u, &chart.apply(&v));
        let scale = (dot(&chart.apply(&u), &u) * dot(&chart.apply(&v), &v)).sqrt();
        worst_adj = worst_adj.max((a - b).abs() / scale);
        let p1 = ctx.project_perp(&u);
        let p2 = ctx.project_perp(&p1);
        let diff: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| x - y).collect();
        let dn = crate::discrete::norm_h(&chart, &diff);
        let pn = crate::discrete::norm_h(&chart, &p1);
        worst_idem = worst_idem.max(dn / pn);
    }
    out.checks.push(Check::at_most(SOLVER, "h_form_symmetry_random_pairs", worst_adj, cfg.tol("adjoint")));
    out.checks.push(Check::at_most(SOLVER, "projection_idempotence_random", worst_idem, cfg.tol("adjoint")));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct MultiplierScaling {
    t: f64,
    eps: Vec<f64>,
    sums: Vec<f64>,
    exponent: f64,
}

/// Sum |lambda_j| along the ladder at a fixed t off the critical point.
pub fn multiplier_scaling(model: &ManifoldModel, ladder: &[f64], spec: &GridSpec, opts: &ReduceOptions) -> Result<(f64, Vec<f64>, f64)> {
    let (_, t0, _) = reduced_target(model, ladder[0], opts)?;
    let t = 0.5 * t0;
    let sums: Vec<f64> = ladder
        .par_iter()
        .map(|&e| multipliers_at(model, e, t, spec, opts).map(|s| s.multiplier_sum()))
        .collect::<Result<_>>()?;
    let slope = log_slope(ladder, &sums);
    Ok((t, sums, slope))
}

fn reduce(cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Command::Reduce.name());
    let model = cfg.build_model(Command::Reduce, seed)?;
    let ladder = cfg.ladder(Command::Reduce);
    crate::config::validate_ladder(&ladder)?;
    let spec = cfg.grid_spec();
    let opts = reduce_options(cfg);
    if !regime_gate(&mut out, &model, ladder[0], &opts)? {
        return Ok(out);
    }
    let sols: Vec<ReducedSolution> = reduce_ladder(&model, &ladder, &spec, &opts).into_iter().collect::<Result<_>>()?;
    run_checks(&mut out, cfg, &sols);
    let rows: Vec<LadderRow> = sols.iter().map(ladder_row).collect();

    let ratios: Vec<f64> = rows.iter().map(|r| r.phi_over_eps_log).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    out.checks.push(Check::at_most(SOLVER, "phi_over_eps_log_variation", hi / lo, cfg.tol("phi_variation")));

    let last = sols.last().expect("nonempty ladder");
    out.checks.push(Check::at_most(
        SOLVER,
        "t_eps_relative_error_smallest_eps",
        (last.t_eps - last.t0).abs() / last.t0,
        cfg.tol("t_rel"),
    ));
    let conc: Vec<_> = sols.iter().map(|s| concentration(&s.solution, s.eps, s.t0)).collect();
    let c_last = conc.last().unwrap();
    out.checks.push(Check::flag(SOLVER, "argmax_within_one_cell", c_last.within_cell));
    out.checks.push(Check::at_most(SOLVER, "width_over_sqrt_eps_vs_sqrt_t0", c_last.width_error, cfg.tol("width")));

    let residuals: Vec<_> = sols
        .iter()
        .map(|s| Ok((residual_report(&model, s.eps, &s.solution)?, residual_report(&model, s.eps, &s.ansatz)?)))
        .collect::<Result<_>>()?;
    out.section("residuals_u_and_w", &residuals);

    if cfg.refinement_levels >= 2 {
        let study = refinement_study(&model, last.eps, &spec, cfg.refinement_levels, &opts)?;
        out.checks.push(Check::flag(SOLVER, "pde_residual_decreases_under_refinement", study.decreasing));
        let mut t = Table::new("refinement", &["nodes", "spacing", "t_eps", "own_relative", "reference_relative"]);
        for l in &study.levels {
            t.push(vec![l.nodes as f64, l.spacing, l.t_eps, l.own.relative, l.reference.relative]);
        }
        out.tables.push(t);
        out.section("refinement", &study);
    }

    let grad = gradient_scaling(&model, &ladder, last.t0, &spec)?;
    out.checks.push(Check::relative(SOLVER, "grad_a_grad_w_delta_slope", grad.slope, 2.0, cfg.tol("grad_slope")));
    out.section("gradient_scaling", &grad);

    let (t_fixed, sums, exponent) = multiplier_scaling(&model, &ladder, &spec, &opts)?;
    out.checks.push(Check::within(
        SOLVER,
        "multiplier_sum_exponent",
        exponent,
        cfg.tol("multiplier_exponent_lo"),
        cfg.tol("multiplier_exponent_hi"),
    ));
    let mut mt = Table::new("multipliers", &["eps", "t", "lambda_sum"]);
    for (e, s) in ladder.iter().zip(&sums) {
        mt.push(vec![*e, t_fixed, *s]);
    }
    out.plots.push(Plot {
        name: "multipliers_vs_eps".into(),
        title: format!("sum |lambda_j| at t = {t_fixed:.4}"),
        x_label: "|eps|".into(),
        y_label: "sum |lambda_j|".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: format!("slope {exponent:.3}"),
            points: ladder.iter().map(|e| e.abs()).zip(sums.iter().copied()).collect(),
        }],
    });
    out.tables.push(mt);
    out.section(
        "multiplier_scaling",
        &MultiplierScaling {
            t: t_fixed,
            eps: ladder.clone(),
            sums,
            exponent,
        },
    );

    operator_invariants(&mut out, cfg, &model, last, seed)?;

    out.section("model", &model_digest(&model, cfg)?);
    out.section("ladder", &rows);
    out.section("concentration", &conc);
    out.tables.push(ladder_table(&rows));
    solution_plots(&mut out, &sols);
    Ok(out)
}

fn continuation(cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new(Command::Continuation.name());
    let model = cfg.build_model(Command::Continuation, seed)?;
    let ladder = cfg.ladder(Command::Continuation);
    crate::config::validate_ladder(&ladder)?;
    let spec = cfg.grid_spec();
    let base = reduce_options(cfg);
    if !regime_gate(&mut out, &model, ladder[0], &base)? {
        return Ok(out);
    }
    let mut sols: Vec<ReducedSolution> = Vec::with_capacity(ladder.len());
    for &eps in &ladder {
        let opts = ReduceOptions {
            initial_t: sols.last().map(|s| s.t_eps),
            ..base
        };
        sols.push(reduced_solve(&model, eps, &spec, &opts)?);
    }
    run_checks(&mut out, cfg, &sols);
    let dist: Vec<f64> = sols
        .iter()
        .map(|s| ((s.t_eps - s.t0).powi(2) + s.eta_eps.iter().map(|v| v * v).sum::<f64>()).sqrt())
        .collect();
    out.checks.push(Check::flag(
        SOLVER,
        "distance_to_t0_decreasing",
        dist.windows(2).all(|w| w[1] < w[0]),
    ));
    let rows: Vec<LadderRow> = sols.iter().map(ladder_row).collect();
    out.section("model", &model_digest(&model, cfg)?);
    out.section("ladder", &rows);
    out.section("distance_to_t0", &dist);
    out.tables.push(ladder_table(&rows));
    solution_plots(&mut out, &sols);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct ModelDigest {
    name: String,
    m: usize,
    a0: f64,
    laplacian_a: f64,
    h: f64,
    scalar_curvature: f64,
    theta: f64,
    chart_radius: f64,
    grid: GridSpec,
}

fn model_digest(model: &ManifoldModel, cfg: &RunConfig) -> Result<ModelDigest> {
    Ok(ModelDigest {
        name: model.name.clone(),
        m: model.dim().get(),
        a0: model.a0,
        laplacian_a: model.laplacian_a(),
        h: model.h0,
        scalar_curvature: model.scalar_curvature(),
        theta: theta(model, cfg.conventions.theta)?,
        chart_radius: model.cutoff.radius,
        grid: cfg.grid_spec(),
    })
}
