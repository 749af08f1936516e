use proptest::prelude::*;

use wiener_sampling::analytics::{
    conditional_max_w2, conditional_max_w4, mmse_age_value, solve_beta_age, solve_beta_mmse, DEFAULT_SOLVER_TOL,
};
use wiener_sampling::experiments::{
    read_csv_from, round12, write_csv_to, Feasibility, PolicyCell, PolicyKind, SweepKind, SweepRow, SweepTable,
};
use wiener_sampling::rng::derive_seed;
use wiener_sampling::{DelayModel, FrequencyConstraint};

fn exp1() -> DelayModel {
    DelayModel::exponential(1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaled_moments(d in 0.01f64..100.0, mean in 0.1f64..10.0) {
        let inner = DelayModel::exponential(mean).unwrap();
        let s = DelayModel::scaled(inner.clone(), d).unwrap();
        prop_assert!((s.mean() - d * inner.mean()).abs() <= 1e-12 * d * mean);
        prop_assert!((s.second_moment() - d * d * inner.second_moment()).abs() <= 1e-12 * s.second_moment());
    }

    #[test]
    fn conditional_expectations_dominate_their_arguments(c in 0.0f64..50.0, y in 0.0f64..50.0) {
        // Jensen: E[max(c, yZ²)] >= max(c, y) and E[max(c², y²Z⁴)] >= max(c², 3y²).
        let w2 = conditional_max_w2(c, y);
        let w4 = conditional_max_w4(c, y);
        prop_assert!(w2 >= c.max(y) * (1.0 - 1e-12));
        prop_assert!(w4 >= (c * c).max(3.0 * y * y) * (1.0 - 1e-12));
        prop_assert!(w2 <= c + y + 1e-12);
    }

    #[test]
    fn lognormal_solutions_converge(sigma in 0.05f64..1.5, f in 0.05f64..5.0) {
        let m = DelayModel::lognormal(sigma).unwrap();
        let cap = FrequencyConstraint::max(f).unwrap();
        let s = solve_beta_mmse(&m, cap, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!(s.residual <= DEFAULT_SOLVER_TOL);
        prop_assert!(s.beta >= 0.0);
        let a = solve_beta_age(&m, cap, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!(a.residual <= DEFAULT_SOLVER_TOL);
        // The signal-aware optimum never does worse than the age optimum.
        prop_assert!(s.objective <= mmse_age_value(a.beta, &m).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn optimal_mse_is_nonincreasing_in_fmax(f1 in 0.01f64..2.0, step in 1.0001f64..3.0) {
        let f2 = f1 * step;
        let at = |f: f64| {
            let cap = FrequencyConstraint::max(f).unwrap();
            let m = solve_beta_mmse(&exp1(), cap, DEFAULT_SOLVER_TOL).unwrap().objective;
            let a = solve_beta_age(&exp1(), cap, DEFAULT_SOLVER_TOL).unwrap();
            (m, mmse_age_value(a.beta, &exp1()).unwrap())
        };
        let (m1, a1) = at(f1);
        let (m2, a2) = at(f2);
        prop_assert!(m2 <= m1 * (1.0 + 1e-8));
        prop_assert!(a2 <= a1 * (1.0 + 1e-8));
    }

    #[test]
    fn thresholds_scale_linearly_with_delay(d in 0.05f64..50.0) {
        let base_m = solve_beta_mmse(&exp1(), FrequencyConstraint::Unbounded, 1e-11).unwrap().beta;
        let base_a = solve_beta_age(&exp1(), FrequencyConstraint::Unbounded, 1e-11).unwrap().beta;
        let scaled = DelayModel::scaled(exp1(), d).unwrap();
        let m = solve_beta_mmse(&scaled, FrequencyConstraint::Unbounded, 1e-11).unwrap().beta;
        let a = solve_beta_age(&scaled, FrequencyConstraint::Unbounded, 1e-11).unwrap().beta;
        prop_assert!((m / (d * base_m) - 1.0).abs() < 1e-7);
        prop_assert!((a / (d * base_a) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn deterministic_delay_age_threshold_is_half(y in 0.01f64..100.0) {
        let m = DelayModel::degenerate(y).unwrap();
        let a = solve_beta_age(&m, FrequencyConstraint::Unbounded, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!((a.beta - y / 2.0).abs() <= 1e-8 * y);
    }

    #[test]
    fn derived_seeds_differ(master in any::<u64>(), i in 0u64..1_000_000) {
        prop_assert_ne!(derive_seed(master, i), derive_seed(master, i + 1));
        prop_assert_eq!(derive_seed(master, i), derive_seed(master, i));
    }
}

fn opt_num() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (-1e6f64..1e6).prop_map(|x| Some(round12(x)))]
}

fn cell(policy: PolicyKind) -> impl Strategy<Value = PolicyCell> {
    (
        prop_oneof![
            Just(Feasibility::Feasible),
            Just(Feasibility::Infeasible),
            Just(Feasibility::Divergent)
        ],
        proptest::collection::vec(opt_num(), 8),
    )
        .prop_map(move |(flag, v)| PolicyCell {
            policy,
            flag,
            beta: v[0],
            analytic_mse: v[1],
            analytic_age: v[2],
            mse: v[3],
            mse_ci95: v[4],
            age: v[5],
            age_ci95: v[6],
            rate: v[7],
        })
}

fn table() -> impl Strategy<Value = SweepTable> {
    let policies = proptest::sample::subsequence(PolicyKind::ALL.to_vec(), 1..=4);
    let kind = prop_oneof![
        Just(SweepKind::FmaxSweep),
        Just(SweepKind::SigmaSweep),
        Just(SweepKind::ScaleSweep)
    ];
    (kind, policies).prop_flat_map(|(kind, policies)| {
        let cells: Vec<_> = policies.iter().map(|&p| cell(p)).collect();
        let row = (
            1e-6f64..1e6,
            prop_oneof![Just(f64::INFINITY), (1e-3f64..1e3).prop_map(round12)],
            opt_num(),
            cells,
            "[a-z ,\"';:=-]{0,20}",
        )
            .prop_map(|(p, f_max, ratio, cells, note)| SweepRow {
                parameter: round12(p),
                f_max,
                ratio,
                cells,
                note,
            });
        proptest::collection::vec(row, 0..6).prop_map(move |rows| SweepTable {
            kind,
            policies: policies.clone(),
            rows,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trips_exactly(t in table()) {
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &t);
        let mut again = Vec::new();
        write_csv_to(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}
