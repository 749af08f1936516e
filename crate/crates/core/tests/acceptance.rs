//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false` so the lines always print.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Exp1, StandardNormal};

use wiener_sampling::analytics::{
    mmse_age_value, solve_beta_age, solve_beta_mmse, zero_wait_age_optimal, zero_wait_mmse_optimal, DEFAULT_SOLVER_TOL,
};
use wiener_sampling::experiments::{write_csv_to, PolicyKind, SweepConfig, SweepKind};
use wiener_sampling::sim::{cycle_identity_check, run_cycles, simulate};
use wiener_sampling::stats::Moments;
use wiener_sampling::wiener::{dt_halving, wald_moment_oracle, TauSpec};
use wiener_sampling::{Binding, DelayModel, FrequencyConstraint, PolicySpec, SimOptions};

const MC_DRAWS: usize = 10_000_000;
const SIM_CYCLES: usize = 200_000;
const WALD_RUNS: usize = 1_000_000;
const IDENTITY_CYCLES: usize = 100_000;
const SE_SIGMAS: f64 = 4.0;
const CI_INFLATION: f64 = 2.0;
const REL_ERR: f64 = 0.02;
const RESIDUAL_MAX: f64 = 1e-8;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {detail}", if ok { "ok  " } else { "BAD " }));
    }
}

fn exp1() -> DelayModel {
    DelayModel::exponential(1.0).unwrap()
}

/// Draws of `Y` sampled directly, not through the library.
fn draw_delay(model: &str, sigma: f64, rng: &mut StdRng) -> f64 {
    match model {
        "exp" => rng.sample::<f64, _>(Exp1),
        _ => {
            let z: f64 = rng.sample(StandardNormal);
            (sigma * z - 0.5 * sigma * sigma).exp()
        }
    }
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let models = [("exp", 0.0), ("lognorm", 0.25), ("lognorm", 1.0)];
    let caps = [0.1, 0.8, 1.5, f64::INFINITY];
    let mut seed = 1000u64;
    for (name, sigma) in models {
        let model = if name == "exp" {
            exp1()
        } else {
            DelayModel::lognormal(sigma).unwrap()
        };
        for f in caps {
            let cap = FrequencyConstraint::max(f).unwrap();
            for signal in [true, false] {
                seed += 1;
                let sol = if signal {
                    solve_beta_mmse(&model, cap, DEFAULT_SOLVER_TOL)
                } else {
                    solve_beta_age(&model, cap, DEFAULT_SOLVER_TOL)
                };
                let law = if name == "exp" { "exp(1)".to_string() } else { format!("lognorm({sigma})") };
                let label = format!("{} {law} f={f}", if signal { "mmse" } else { "age " });
                let sol = match sol {
                    Ok(s) => s,
                    Err(e) => {
                        out.check(false, format!("{label}: solver error {e}"));
                        continue;
                    }
                };
                let beta = sol.beta;
                let mut rng = StdRng::seed_from_u64(seed);
                let mut first = Moments::default();
                let mut stationary = Moments::default();
                for _ in 0..MC_DRAWS {
                    let y = draw_delay(name, sigma, &mut rng);
                    let x = if signal {
                        let z: f64 = rng.sample(StandardNormal);
                        y * z * z
                    } else {
                        y
                    };
                    let a = beta.max(x);
                    let b = (beta * beta).max(x * x);
                    first.push(a);
                    stationary.push(a - b / (2.0 * beta));
                }
                let (gap, se) = match sol.binding {
                    Binding::FrequencyConstraint => (first.mean() - 1.0 / f, first.std_err()),
                    Binding::UnconstrainedStationarity => (stationary.mean(), stationary.std_err()),
                };
                out.check(
                    sol.residual <= RESIDUAL_MAX && gap.abs() <= SE_SIGMAS * se,
                    format!(
                        "{label}: beta {beta:.9} residual {:.1e} binding {} mc gap {gap:+.2e} ({:.1} se)",
                        sol.residual,
                        sol.binding,
                        gap / se
                    ),
                );
            }
        }
    }
    out
}

fn sim_vs_theory(policy: PolicySpec, analytic: f64, seed: u64) -> Outcome {
    let mut out = Outcome::new();
    let r = run_cycles(policy, &exp1(), SimOptions::new(SIM_CYCLES, seed)).unwrap();
    let err = (r.mse.value - analytic).abs();
    out.check(
        r.mse.contains(analytic, CI_INFLATION) && err / analytic <= REL_ERR,
        format!(
            "{policy}: simulated mse {:.5} +- {:.5}, analytic {analytic:.5}, rel err {:.2}%",
            r.mse.value,
            r.mse.half_width,
            100.0 * err / analytic
        ),
    );
    out
}

fn criterion_2() -> Outcome {
    let s = solve_beta_mmse(&exp1(), FrequencyConstraint::Unbounded, DEFAULT_SOLVER_TOL).unwrap();
    sim_vs_theory(PolicySpec::SignalThreshold { beta: s.beta }, s.objective, 21)
}

fn criterion_3() -> Outcome {
    let s = solve_beta_age(&exp1(), FrequencyConstraint::Unbounded, DEFAULT_SOLVER_TOL).unwrap();
    let mut out = sim_vs_theory(PolicySpec::AgeThreshold { beta: s.beta }, s.objective, 31);
    let mmse = mmse_age_value(s.beta, &exp1()).unwrap();
    out.check(
        (mmse - s.objective).abs() <= 1e-12 * s.objective,
        format!("mse of the age-optimal policy {mmse:.12} equals its age {:.12}", s.objective),
    );
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let r = run_cycles(PolicySpec::ZeroWait, &exp1(), SimOptions::new(SIM_CYCLES, 41)).unwrap();
    out.check(
        r.mse.contains(2.0, 1.0),
        format!("mse {:.5} +- {:.5} vs 2", r.mse.value, r.mse.half_width),
    );
    out.check(
        r.age.contains(2.0, 1.0),
        format!("age {:.5} +- {:.5} vs 2", r.age.value, r.age.half_width),
    );
    let combined = r.mse.half_width.hypot(r.age.half_width);
    out.check(
        (r.mse.value - r.age.value).abs() <= combined,
        format!("|mse - age| = {:.5} <= {combined:.5}", (r.mse.value - r.age.value).abs()),
    );
    out
}

fn ratio(model: &DelayModel, f: f64) -> f64 {
    let cap = FrequencyConstraint::max(f).unwrap();
    let m = solve_beta_mmse(model, cap, DEFAULT_SOLVER_TOL).unwrap();
    let a = solve_beta_age(model, cap, DEFAULT_SOLVER_TOL).unwrap();
    m.objective / mmse_age_value(a.beta, model).unwrap()
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let r = ratio(&exp1(), 0.01);
    out.check((r - 1.0 / 3.0).abs() <= 0.05, format!("exp(1) f=0.01 ratio {r:.6}"));
    let zero = DelayModel::degenerate(0.0).unwrap();
    for f in [1e-3, 0.01, 0.1, 1.0, 10.0, 1e3] {
        let r = ratio(&zero, f);
        out.check((r - 1.0 / 3.0).abs() <= 1e-9, format!("det(0) f={f} ratio {r:.12}"));
    }
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let model = exp1();
    for (k, f) in [1.0, 1.5].into_iter().enumerate() {
        let cap = FrequencyConstraint::max(f).unwrap();
        let bm = solve_beta_mmse(&model, cap, DEFAULT_SOLVER_TOL).unwrap().beta;
        let ba = solve_beta_age(&model, cap, DEFAULT_SOLVER_TOL).unwrap().beta;
        let seed = 60 + 3 * k as u64;
        let run = |p, s| run_cycles(p, &model, SimOptions::new(SIM_CYCLES, s)).unwrap().mse;
        let opt = run(PolicySpec::SignalThreshold { beta: bm }, seed);
        let age = run(PolicySpec::AgeThreshold { beta: ba }, seed + 1);
        let zw = run(PolicySpec::ZeroWait, seed + 2);
        for ((a, na), (b, nb)) in [((opt, "opt"), (age, "age-opt")), ((age, "age-opt"), (zw, "zero-wait"))] {
            let slack = a.half_width.hypot(b.half_width);
            out.check(
                a.value <= b.value + slack,
                format!(
                    "f={f}: mse_{na} {:.4} <= mse_{nb} {:.4} (+{slack:.4})",
                    a.value, b.value
                ),
            );
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let dt = 1e-3;
    let m = wald_moment_oracle(TauSpec::Hitting { start: 0.0, threshold: 1.0 }, WALD_RUNS, dt, 71).unwrap();
    for (name, e, expected) in [("E[tau]", m.tau, 1.0), ("E[int W^2]", m.integral, 1.0 / 6.0)] {
        out.check(
            (e.value - expected).abs() <= SE_SIGMAS * e.std_err,
            format!("+-1 hitting {name} {:.5} vs {expected:.5} ({:+.2} se)", e.value, (e.value - expected) / e.std_err),
        );
    }
    for (k, (b, beta)) in [(0.0f64, 1.0f64), (0.5, 1.0)].into_iter().enumerate() {
        let m = wald_moment_oracle(TauSpec::Hitting { start: b, threshold: beta.sqrt() }, WALD_RUNS, dt, 72 + k as u64)
            .unwrap();
        let expected = beta - b * b;
        out.check(
            (m.tau.value - expected).abs() <= SE_SIGMAS * m.tau.std_err,
            format!(
                "E_x tau* (b={b}, beta={beta}) {:.5} vs {expected} ({:+.2} se)",
                m.tau.value,
                (m.tau.value - expected) / m.tau.std_err
            ),
        );
    }
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let policy = PolicySpec::SignalThreshold { beta: 1.0 };
    let run = simulate(policy, &exp1(), SimOptions::new(IDENTITY_CYCLES, 81)).unwrap();
    let report = cycle_identity_check(&run.records, policy, &exp1(), SE_SIGMAS).unwrap();
    for c in report.checks {
        out.check(
            c.pass,
            format!(
                "{}: {:.5} vs {:.5} (tol {:.5})",
                c.name, c.observed.value, c.expected, c.tolerance
            ),
        );
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let cases = [
        ("zero_wait_age_optimal(det 1)", zero_wait_age_optimal(&DelayModel::degenerate(1.0).unwrap()), true),
        ("zero_wait_age_optimal(exp 1)", zero_wait_age_optimal(&exp1()), false),
        ("zero_wait_mmse_optimal(det 0)", zero_wait_mmse_optimal(&DelayModel::degenerate(0.0).unwrap()), true),
        ("zero_wait_mmse_optimal(det 1)", zero_wait_mmse_optimal(&DelayModel::degenerate(1.0).unwrap()), false),
        ("zero_wait_mmse_optimal(exp 1)", zero_wait_mmse_optimal(&exp1()), false),
        (
            "zero_wait_mmse_optimal(lognorm 0.5)",
            zero_wait_mmse_optimal(&DelayModel::lognormal(0.5).unwrap()),
            false,
        ),
    ];
    for (name, got, want) in cases {
        out.check(got == want, format!("{name} = {got}"));
    }
    out
}

fn criterion_10() -> Outcome {
    let mut out = Outcome::new();
    let opts = SimOptions::new(20_000, 101);
    let policy = PolicySpec::SignalThreshold { beta: 1.0 };
    let a = serde_json::to_string(&run_cycles(policy, &exp1(), opts).unwrap()).unwrap();
    let b = serde_json::to_string(&run_cycles(policy, &exp1(), opts).unwrap()).unwrap();
    out.check(a == b, "simulation repeated with the same seed is byte-identical".into());

    let spec = TauSpec::Hitting { start: 0.0, threshold: 1.0 };
    let a = wald_moment_oracle(spec, 50_000, 1e-2, 102).unwrap();
    let b = wald_moment_oracle(spec, 50_000, 1e-2, 102).unwrap();
    out.check(a == b, "stopping-time oracle repeated with the same seed is identical".into());

    let cfg = SweepConfig {
        grid: vec![0.5, 1.5],
        policies: vec![PolicyKind::SignalThreshold, PolicyKind::ZeroWait, PolicyKind::Uniform],
        n_cycles: 5_000,
        dt: Some(0.01),
        ..SweepConfig::default_for(SweepKind::FmaxSweep, 103)
    };
    let csv = |c: &SweepConfig| {
        let mut buf = Vec::new();
        write_csv_to(&wiener_sampling::experiments::run_sweep(c).unwrap(), &mut buf).unwrap();
        buf
    };
    out.check(csv(&cfg) == csv(&cfg), "sweep CSV repeated with the same seed is byte-identical".into());

    let h = dt_halving(0.0, 1.0, WALD_RUNS, 1e-3, 104).unwrap();
    let (dtau, ctau) = (h.tau_diff.value, h.tau_combined_error());
    let (dint, cint) = (h.integral_diff.value, h.integral_combined_error());
    out.check(
        dtau.abs() < ctau,
        format!("dt 1e-3 -> 5e-4: E[tau] moves {dtau:+.2e}, combined MC error {ctau:.2e}"),
    );
    out.check(
        dint.abs() < cint,
        format!("dt 1e-3 -> 5e-4: E[int W^2] moves {dint:+.2e}, combined MC error {cint:.2e}"),
    );
    out
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fixed-point correctness against an independent Monte Carlo oracle", criterion_1),
        ("signal-threshold simulation matches the MMSE objective", criterion_2),
        ("age-threshold simulation matches the age objective", criterion_3),
        ("zero-wait age and mse equal 2 on exp(1)", criterion_4),
        ("small f_max ratio tends to 1/3", criterion_5),
        ("ordering opt <= age-opt <= zero-wait", criterion_6),
        ("stopping-time identities", criterion_7),
        ("per-cycle identities on simulated records", criterion_8),
        ("zero-wait optimality criteria", criterion_9),
        ("determinism and dt halving", criterion_10),
    ];
    // `cargo test -- <filter>` passes arguments; run only matching criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let tag = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| tag.contains(f.as_str()) || title.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        for l in &o.lines {
            println!("    {l}");
        }
        println!(
            "{} {tag}: {title} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
