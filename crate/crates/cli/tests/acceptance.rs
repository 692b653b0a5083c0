//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are pinned below.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::process::Command;
use std::time::Instant;

use boussinesq_core::harness::{
    self, convergence_study, manufactured_solution_error, manufactured_temporal_error, Knob, LevelRun, StudyResult,
};
use boussinesq_core::laws::{catalog, check_h0_values, estimate_constants, eval_clarke, mollify, PiecewiseLaw};
use boussinesq_core::mesh::{build_rect_mesh, Rect, Side, SideTags};
use boussinesq_core::scenario;
use boussinesq_core::spaces::build_spaces;

const IDENTITY_TOL: f64 = 1e-11;
const ORACLE_TOL: f64 = 1e-8;
const SLACK_TOL: f64 = 1e-9;
const ENERGY_SPREAD: f64 = 2.0;
const STUDY_RATIO: f64 = 0.75;
const SPATIAL_ORDER: f64 = 1.8;
const TEMPORAL_WINDOW: (f64, f64) = (1.7, 2.4);
const LAW_SAMPLES: usize = 10_000;

struct Line {
    pass: bool,
    text: String,
}

fn report(n: usize, title: &str, pass: bool, detail: String, start: Instant) -> Line {
    let text = format!(
        "criterion {n:>2} [{}] {title}: {detail} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    println!("{text}");
    Line { pass, text }
}

fn unit_spaces(n: usize, contact: &[Side]) -> boussinesq_core::spaces::DiscreteSpaces {
    let tags = if contact.is_empty() { SideTags::all_dirichlet() } else { SideTags::with_contact(contact) };
    build_spaces(&build_rect_mesh(Rect::unit(), n, n, tags).unwrap()).unwrap()
}

fn skew_identities() -> Line {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut control = f64::INFINITY;
    let mut pass = true;
    for n in [4, 8, 16] {
        let r = harness::identity_tests(&unit_spaces(n, &[Side::Bottom]), 100, 2024 + n as u64).unwrap();
        worst = worst.max(r.a1_antisymmetry).max(r.a1_diagonal).max(r.b1_diagonal);
        control = control.min(r.plain_a1_diagonal.max(r.plain_b1_diagonal));
        pass &= r.pass;
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= worst <= IDENTITY_TOL && control > 0.0 && secs < 10.0;
    report(
        1,
        "skew-form identities, meshes 4/8/16, 100 trials",
        pass,
        format!("max relative {worst:.2e} (tol {IDENTITY_TOL:e}), plain-form control {control:.2e} > 0"),
        start,
    )
}

fn oracle_equivalence() -> Line {
    let start = Instant::now();
    let (ru, rt) = oracle::boundary_residual_linear();
    let devs = [
        ("A0", oracle::viscous_form()),
        ("C", oracle::divergence_form()),
        ("B0", oracle::conductivity_form()),
        ("G", oracle::p_laplacian_form()),
        ("residual_u", ru),
        ("residual_theta", rt),
        ("residual_const", oracle::boundary_residual_constant()),
    ];
    let worst = devs.iter().fold(0.0f64, |m, d| m.max(d.1));
    let pass = worst <= ORACLE_TOL && start.elapsed().as_secs_f64() < 30.0;
    let detail = devs.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect::<Vec<_>>().join(", ");
    report(2, "assembled forms vs independent quadrature, 4x4", pass, format!("{detail} (tol {ORACLE_TOL:e})"), start)
}

/// Clarke hull of `j'` on `[s - r, s + r]`.
fn window_hull(law: &PiecewiseLaw, s: f64, r: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = (0..=64).map(|i| s - r + 2.0 * r * i as f64 / 64.0).collect();
    pts.extend(law.kinks().into_iter().filter(|k| (k - s).abs() <= r));
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        let c = eval_clarke(law, x);
        (lo.min(c.lo), hi.max(c.hi))
    })
}

fn law_suite() -> Line {
    let start = Instant::now();
    let mut problems = Vec::new();
    let abs0 = eval_clarke(&catalog::abs(), 0.0);
    if (abs0.lo, abs0.hi) != (-1.0, 1.0) {
        problems.push(format!("|s| at 0 gives [{}, {}]", abs0.lo, abs0.hi));
    }
    let (mu_s, mu_k, s0) = (0.5, 0.3, 0.4);
    let jump = eval_clarke(&catalog::stick_slip_jump(mu_s, mu_k, s0), s0);
    if (jump.lo, jump.hi) != (mu_k, mu_s) {
        problems.push(format!("stick-slip breakpoint gives [{}, {}]", jump.lo, jump.hi));
    }

    let m = 8;
    let r = 1.0 / m as f64;
    for name in catalog::NAMES {
        let base = catalog::by_name(name).unwrap();
        let law = mollify(&base, m).unwrap();
        let c0 = estimate_constants(&base, 10.0, 2001).unwrap().growth;
        for i in 0..LAW_SAMPLES {
            let s = -3.0 + 6.0 * i as f64 / (LAW_SAMPLES - 1) as f64;
            let d = law.derivative(s);
            let (lo, hi) = window_hull(&base, s, r);
            if !(d >= lo - 1e-12 && d <= hi + 1e-12) {
                problems.push(format!("{name}: Dj_m({s}) = {d} outside [{lo}, {hi}]"));
                break;
            }
            if d.abs() > c0 * (1.0 + s.abs() + r) + 1e-12 {
                problems.push(format!("{name}: growth bound fails at {s}"));
                break;
            }
            if base.odd && law.derivative(-s) != -d {
                problems.push(format!("{name}: not odd at {s}"));
                break;
            }
        }
    }

    let weakening = catalog::slip_weakening(0.5, 0.3, 2.0);
    let samples: Vec<f64> = (0..200).map(|i| 0.3 + 2.7 * i as f64 / 199.0).collect();
    let dev: Vec<f64> = [4, 8, 16, 32]
        .iter()
        .map(|&m| {
            let l = mollify(&weakening, m).unwrap();
            samples.iter().map(|&s| (l.derivative(s) - weakening.derivative(s)).abs()).fold(0.0, f64::max)
        })
        .collect();
    if !dev.windows(2).all(|w| w[1] < w[0]) {
        problems.push(format!("smooth-region deviation not monotone: {dev:?}"));
    }
    let pass = problems.is_empty() && start.elapsed().as_secs_f64() < 10.0;
    let detail = if problems.is_empty() {
        format!(
            "Clarke intervals exact, {} laws x {LAW_SAMPLES} samples in hull/odd/growth, deviation {:.1e} -> {:.1e} over m = 4..32",
            catalog::NAMES.len(),
            dev[0],
            dev[3]
        )
    } else {
        problems.join("; ")
    };
    report(3, "nonsmooth-law suite", pass, detail, start)
}

fn h0_examples() -> Line {
    let start = Instant::now();
    let rt8 = 2.0 * std::f64::consts::SQRT_2;
    let a = check_h0_values(1.0, 0.0, 0.0, 10.0, 1.0, 1.0, 1.0);
    let b = check_h0_values(0.0, 0.0, 1.0, 1.0, 0.1, 1.0, 1.0);
    let c = check_h0_values(0.75, 0.0, 0.0, rt8 * 0.75 * 0.5, 1.0, 0.5, 1.0);
    let pass = a.passes()
        && a.velocity.margin() == 10.0 - rt8
        && !b.passes()
        && !b.temperature.pass
        && b.temperature.rhs == rt8
        && c.velocity.lhs == c.velocity.rhs
        && !c.velocity.pass
        && start.elapsed().as_secs_f64() < 1.0;
    report(
        4,
        "H0 arithmetic examples",
        pass,
        format!(
            "margin {} = 10 - 2sqrt2, fail at 0.1 < 2sqrt2, fail at equality {} = {}",
            a.velocity.margin(),
            c.velocity.lhs,
            c.velocity.rhs
        ),
        start,
    )
}

struct Study {
    result: StudyResult,
    runs: Vec<LevelRun>,
    seconds: f64,
}

fn cavity_study() -> Study {
    let start = Instant::now();
    let (result, runs) = convergence_study(&scenario::heated_cavity_slip(), Knob::TimeStep, 4).unwrap();
    Study {
        result,
        runs,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn energy_inequality(s: &Study) -> Line {
    let start = Instant::now();
    let h0 = s.runs.iter().all(|r| r.output.constants.h0.passes());
    let slack = s.result.levels.iter().map(|l| l.min_relative_slack).fold(f64::INFINITY, f64::min);
    let totals: Vec<f64> = s.result.levels.iter().map(|l| l.energy_total).collect();
    let spread = totals.iter().fold(0.0f64, |m, &x| m.max(x)) / totals.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let verdicts = s.runs.iter().all(|r| harness::energy_report(&r.output).verdict == harness::Verdict::Pass);
    let pass = h0 && verdicts && slack >= -SLACK_TOL && spread <= ENERGY_SPREAD && s.seconds < 300.0;
    report(
        5,
        "energy inequality, heated-cavity-slip, dt = T/64..T/512",
        pass,
        format!(
            "H0 {h0}, min relative slack {slack:.2e} (>= -{SLACK_TOL:e}), energy totals [{}] spread {spread:.3} (<= {ENERGY_SPREAD}), study {:.0} s",
            fmt_list(&totals),
            s.seconds
        ),
        start,
    )
}

fn retardation_convergence(s: &Study) -> Line {
    let start = Instant::now();
    let ru = StudyResult::ratios(&s.result.diff_u);
    let rt = StudyResult::ratios(&s.result.diff_theta);
    let pass = StudyResult::cauchy_pass(&s.result.diff_u) && StudyResult::cauchy_pass(&s.result.diff_theta);
    report(
        6,
        "retardation convergence",
        pass,
        format!("u ratios [{}], theta ratios [{}] (decreasing, last <= {STUDY_RATIO})", fmt_list(&ru), fmt_list(&rt)),
        start,
    )
}

fn regularizer_vanishing(s: &Study) -> Line {
    let start = Instant::now();
    let sums: Vec<f64> = s.result.levels.iter().map(|l| l.regularizer_sum).collect();
    let r = StudyResult::ratios(&sums);
    let pass = sums[0] > 0.0 && StudyResult::cauchy_pass(&sums);
    report(
        7,
        "regularizer vanishing",
        pass,
        format!("dt sum h theta'G theta = [{}], ratios [{}] (last <= {STUDY_RATIO})", sums.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "), fmt_list(&r)),
        start,
    )
}

fn manufactured() -> Line {
    let start = Instant::now();
    let t_final = 0.25;
    let dt = t_final / 2048.0;
    let base = scenario::manufactured(6, dt, t_final);
    let table = manufactured_solution_error(&base, &[(6, dt), (12, dt), (24, dt)]).unwrap();
    let (ou, ot) = (table.orders_u(), table.orders_theta());
    let spatial = ou.iter().chain(&ot).all(|&o| o >= SPATIAL_ORDER);

    let dts: Vec<f64> = [8.0, 16.0, 32.0, 64.0].iter().map(|k| t_final / k).collect();
    let finest = table.rows.last().unwrap();
    let tt = manufactured_temporal_error(&base, 24, &dts, finest).unwrap();
    let (ru, rt) = (tt.ratios_u(), tt.ratios_theta());
    let (lo, hi) = TEMPORAL_WINDOW;
    let temporal = ru.iter().chain(&rt).all(|r| (lo..=hi).contains(r));
    let pass = spatial && temporal && start.elapsed().as_secs_f64() < 600.0;
    report(
        8,
        "manufactured solution",
        pass,
        format!(
            "spatial orders 6/12/24 at T/2048: u [{}], theta [{}] (>= {SPATIAL_ORDER}); temporal ratios at 24, dt = T/8..T/64 vs T/2048: u [{}], theta [{}] (in [{lo}, {hi}])",
            fmt_list(&ou),
            fmt_list(&ot),
            fmt_list(&ru),
            fmt_list(&rt)
        ),
        start,
    )
}

fn multiplier_bounds(s: &Study) -> Line {
    let start = Instant::now();
    // worst value of |xi| / bound over all points and steps
    let mut worst_u: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    let mut points = 0usize;
    for run in &s.runs {
        let sp = &run.spaces;
        let c0 = run.output.constants.friction.growth;
        let c1 = run.output.constants.heat_flux.growth;
        let m = run.summary.m as f64;
        for st in run.output.trajectory.iter().skip(1) {
            let su = sp.tangential_trace(&sp.expand_velocity(&st.u));
            let stt = sp.temperature_trace(&sp.expand_temperature(&st.theta));
            for k in 0..su.len() {
                worst_u = worst_u.max(st.xi[k].abs() / (c0 * (1.0 + su[k].abs() + c0 / m)));
                worst_t = worst_t.max(st.xi1[k].abs() / (c1 * (1.0 + stt[k].abs() + c1 / m)));
                points += 1;
            }
        }
    }
    let xi_sums: Vec<f64> = s.result.levels.iter().map(|l| l.xi_sum).collect();
    let spread = xi_sums.windows(2).map(|w| (w[1] / w[0]).max(w[0] / w[1])).fold(0.0, f64::max);
    let pass = points > 0 && worst_u <= 1.0 + 1e-12 && worst_t <= 1.0 + 1e-12 && spread <= 2.0;
    report(
        9,
        "multiplier bounds",
        pass,
        format!(
            "{points} point-steps, max |xi|/c0(1+|u_t|+c0/m) = {worst_u:.3}, max |xi1|/c1(1+|theta|+c1/m) = {worst_t:.3}, dt sum |xi|^2 level ratio <= {spread:.3}"
        ),
        start,
    )
}

fn determinism() -> Line {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut csv = Vec::new();
    let mut ok = true;
    for d in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_boussinesq"))
            .args(["run", "--scenario", "heated-cavity-slip", "--threads", "1", "--out-dir"])
            .arg(d.path())
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        ok &= out.status.success();
        csv.push(std::fs::read(d.path().join("monitors.csv")).unwrap_or_default());
    }
    let pass = ok && !csv[0].is_empty() && csv[0] == csv[1];
    report(
        10,
        "determinism",
        pass,
        format!("two single-threaded heated-cavity-slip runs, monitor CSVs {} bytes, identical {}", csv[0].len(), csv[0] == csv[1]),
        start,
    )
}

fn main() {
    let mut lines = vec![skew_identities(), oracle_equivalence(), law_suite(), h0_examples()];
    let study = cavity_study();
    lines.push(energy_inequality(&study));
    lines.push(retardation_convergence(&study));
    lines.push(regularizer_vanishing(&study));
    lines.push(manufactured());
    lines.push(multiplier_bounds(&study));
    drop(study);
    lines.push(determinism());

    let failed: Vec<&Line> = lines.iter().filter(|l| !l.pass).collect();
    println!("acceptance: {} of {} criteria pass", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        for l in failed {
            eprintln!("{}", l.text);
        }
        std::process::exit(1);
    }
}
