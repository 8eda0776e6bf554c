//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a result differs from its expectation. Sub-criteria in
//! `EXPECTED_FAILURES` are known to be unattainable and must still fail.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use batchlab::calibration::{
    calibration_report, realized_strengths, select_sample_paths, terminal_adjustment_table,
    Money, TreatmentKind, TreatmentSpec,
};
use batchlab::ctmc::{
    build_generator, closed_form_deltas, metrics, numeric_deltas, solve_poisson, steady_state,
};
use batchlab::des::{
    classify_assignments, couple, estimate_metrics, generate_sample_path_with, regenerate,
    Assignment, Distribution, EstimateOptions, PathLaws, ViolationCounts,
};
use batchlab::{
    admit_count, DecisionRule, RewardSpec, Strategy, StrategyProfile, SystemParams, SystemState,
};

const EXPECTED_FAILURES: &[&str] = &["3b", "4b", "5"];

struct Outcome {
    id: &'static str,
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(id: &'static str, pass: bool, summary: impl Into<String>) -> Self {
        Self {
            id,
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn detail(mut self, lines: impl IntoIterator<Item = String>) -> Self {
        self.details.extend(lines);
        self
    }
}

fn st(s: &str) -> SystemState {
    s.parse().unwrap()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect()
}

/// Row order of the published adjustment tables, after the empty state.
const TABLE_STATES: [&str; 8] = [
    "(0,0,1)", "(0,1,0)", "(0,2,0)", "(0,1,1)", "(0,2,1)", "(1,1,1)", "(1,2,1)", "(2,1,1)",
];

fn criterion_1() -> Vec<Outcome> {
    // Arrival rates rise while service rates fall, so lambda/mu spans 1e-4..1e4.
    let lambdas = logspace(-2.0, 2.0, 20);
    let mus: Vec<f64> = logspace(-2.0, 2.0, 20).into_iter().rev().collect();
    let mut worst_rel: f64 = 0.0;
    let mut worst_d2b: f64 = 0.0;
    let mut failures = Vec::new();
    for (&l, &m) in lambdas.iter().zip(&mus) {
        let closed = closed_form_deltas(l, m);
        let num = numeric_deltas(l, m).unwrap();
        for ((name, c), (_, n)) in closed.as_array().into_iter().zip(num.as_array()) {
            if name == "delta2_B" {
                worst_d2b = worst_d2b.max(n.abs());
                if n.abs() > 1e-10 {
                    failures.push(format!("lambda={l:.3e} mu={m:.3e}: {name} = {n:e}"));
                }
                continue;
            }
            let rel = (c - n).abs() / c.abs();
            worst_rel = worst_rel.max(rel);
            if !(rel <= 1e-8) {
                failures.push(format!("lambda={l:.3e} mu={m:.3e}: {name} rel err {rel:e}"));
            }
        }
    }
    vec![Outcome::new(
        "1",
        failures.is_empty(),
        format!(
            "closed-form differences over 20 log-spaced pairs: max rel err {worst_rel:.1e} (<= 1e-8), max |delta2_B| {worst_d2b:.1e} (<= 1e-10)"
        ),
    )
    .detail(failures)]
}

fn table_check(
    id: &'static str,
    label: &str,
    values: &[f64],
    printed: &[f64; 8],
    tol: f64,
) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for ((s, v), p) in TABLE_STATES.iter().zip(values).zip(printed) {
        let diff = v - p;
        worst = worst.max(diff.abs());
        let mark = if diff.abs() <= tol { "" } else { "  <-- off" };
        rows.push(format!("{s}: computed {v:.4}, printed {p:.3}, diff {diff:+.4}{mark}"));
    }
    let pass = worst <= tol;
    let out = Outcome::new(
        id,
        pass,
        format!("{label}: max |diff| {worst:.4} (tol {tol})"),
    );
    if pass {
        out
    } else {
        out.detail(rows)
    }
}

fn relative_values(reward: &RewardSpec, strategy: Strategy) -> Vec<f64> {
    let params = SystemParams::experimental();
    let table = terminal_adjustment_table(&params, reward, &StrategyProfile::experimental(strategy))
        .unwrap();
    TABLE_STATES
        .iter()
        .map(|s| table.credit(&st(s)).unwrap())
        .collect()
}

fn criterion_2() -> Vec<Outcome> {
    let printed = [0.038, 0.705, 1.174, 0.720, 1.181, 0.999, 1.294, 1.294];
    let h = relative_values(&RewardSpec::PersonalThroughput { focal: 0 }, Strategy::Batch);
    vec![table_check("2", "IT table (personal reward, batch)", &h, &printed, 0.005)]
}

fn criterion_3() -> Vec<Outcome> {
    let gt_printed = [0.82, 0.82, 1.36, 1.55, 2.05, 2.13, 2.56, 2.60];
    let st_printed = [2.59, 2.59, 5.99, 4.63, 7.80, 7.26, 10.58, 10.58];
    let gt = relative_values(&RewardSpec::GroupThroughput, Strategy::NoBatch);
    let occ = relative_values(&RewardSpec::Occupancy, Strategy::NoBatch);
    let a = table_check("3a", "GT table (group reward, no-batch)", &gt, &gt_printed, 0.02);
    let mut b = table_check("3b", "GT-ST table (occupancy reward, no-batch)", &occ, &st_printed, 0.02);

    // Diagnostic: the printed values match the batch-profile occupancy
    // values scaled by the uniformization rate lambda + 2 mu.
    let p = SystemParams::experimental();
    let scale = p.arrival_rate + 2.0 * p.service_rate;
    let scaled: Vec<f64> = relative_values(&RewardSpec::Occupancy, Strategy::Batch)
        .iter()
        .map(|h| h * scale)
        .collect();
    let diag = table_check("3b*", "batch-profile occupancy values x (lambda + 2 mu)", &scaled, &st_printed, 0.02);
    b.details.push(format!(
        "diagnostic {}: {}",
        if diag.pass { "PASS" } else { "FAIL" },
        diag.summary
    ));
    b.details.extend(diag.details);
    vec![a, b]
}

fn criterion_4() -> Vec<Outcome> {
    let cases = [
        (TreatmentKind::It, 14.8, Money::from_cents(437)),
        (TreatmentKind::Gt, 15.2, Money::from_cents(465)),
        (TreatmentKind::GtSt, 15.4, Money::from_cents(422)),
    ];
    let mut strength_ok = true;
    let mut earnings_ok = true;
    let mut s_lines = Vec::new();
    let mut e_lines = Vec::new();
    for (kind, strength, earnings) in cases {
        let r = calibration_report(&TreatmentSpec::paper(kind).unwrap()).unwrap();
        let ds = r.incentive_strength - strength;
        let de = r.expected_earnings_opt - earnings;
        strength_ok &= ds.abs() <= 0.3;
        earnings_ok &= de.micros().abs() <= Money::from_cents(2).micros();
        s_lines.push(format!("{kind}: {:.2}% vs {strength}%", r.incentive_strength));
        e_lines.push(format!(
            "{kind}: {} vs {earnings} (expected metric {:.3} under the optimal strategy)",
            r.expected_earnings_opt, r.expected_metric_opt
        ));
    }
    vec![
        Outcome::new("4a", strength_ok, format!("incentive strengths within 0.3pp: {}", s_lines.join(", "))),
        Outcome::new("4b", earnings_ok, format!("expected optimal earnings within $0.02: {}", e_lines.join("; "))),
    ]
}

fn criterion_5() -> Vec<Outcome> {
    let params = SystemParams::experimental();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut profiles = vec![StrategyProfile {
        rules: vec![DecisionRule::greedy(2), DecisionRule::greedy(2)],
        decision_order: vec![1, 0],
    }];
    profiles.extend((0..100).map(|_| StrategyProfile::random(&params, &[2, 2], vec![1, 0], &mut rng)));
    let laws = [
        ("exponential", PathLaws::exponential()),
        ("deterministic", PathLaws::with_service(Distribution::Deterministic { value: 15.0 })),
        ("lognormal", PathLaws::with_service(Distribution::Lognormal { mean: 15.0, cv: 1.0 })),
    ];

    let mut pass = true;
    let mut refined = true;
    let mut lines = Vec::new();
    for (name, law) in laws {
        let per_seed: Vec<(usize, ViolationCounts)> = (0..1000u64)
            .into_par_iter()
            .map(|seed| {
                let path = generate_sample_path_with(&params, seed, 600.0, law).unwrap();
                let mut failing = 0;
                let mut total = ViolationCounts::default();
                for profile in &profiles {
                    let r = couple(&path, &params, profile).unwrap();
                    failing += usize::from(!r.dominance_holds);
                    total.occupancy += r.violations.occupancy;
                    total.completions += r.violations.completions;
                    total.admissions += r.violations.admissions;
                    total.occupancy_same_admissions += r.violations.occupancy_same_admissions;
                }
                (failing, total)
            })
            .collect();
        let runs = 1000 * profiles.len();
        let failing: usize = per_seed.iter().map(|(f, _)| f).sum();
        let sum = |f: fn(&ViolationCounts) -> usize| per_seed.iter().map(|(_, v)| f(v)).sum::<usize>();
        let (n, c, a, same) = (
            sum(|v| v.occupancy),
            sum(|v| v.completions),
            sum(|v| v.admissions),
            sum(|v| v.occupancy_same_admissions),
        );
        pass &= failing == 0;
        refined &= c == 0 && a == 0 && same == 0;
        lines.push(format!(
            "{name}: {failing}/{runs} runs violate dominance; checkpoint violations N {n}, C {c}, admissions {a}, N with equal admissions {same}"
        ));
    }
    lines.push(format!(
        "diagnostic {}: C and admission dominance hold everywhere and every N violation follows extra admissions by the reference",
        if refined { "PASS" } else { "FAIL" }
    ));
    vec![Outcome::new(
        "5",
        pass,
        "coupling dominance N_star <= N_alt and C_star >= C_alt over 1000 paths x 101 profiles x 3 service laws",
    )
    .detail(lines)]
}

fn criterion_6() -> Vec<Outcome> {
    let params = SystemParams::experimental();
    let mut out = Vec::new();
    for (id, strategy) in [("6a", Strategy::Batch), ("6b", Strategy::NoBatch)] {
        let profile = StrategyProfile::experimental(strategy);
        let exact = metrics(&params, &profile).unwrap();
        let pi = steady_state(&build_generator(&params, &profile).unwrap()).unwrap();
        let mut opts = EstimateOptions::new(1000, 1.0e4, 0);
        opts.warmup = 500.0;
        let mc = estimate_metrics(&params, &profile, &opts).unwrap();

        let mut checks = vec![
            ("throughput", mc.system_throughput, exact.system_throughput),
            ("sojourn", mc.mean_sojourn, exact.mean_sojourn),
            ("blocking", mc.blocking_rate, exact.blocking_rate),
        ];
        for (s, p) in pi.iter() {
            checks.push(("state", mc.state_fraction(s), p));
        }
        let mut worst: f64 = 0.0;
        let mut lines = Vec::new();
        for (k, (name, est, value)) in checks.iter().enumerate() {
            let z = if est.se > 0.0 {
                (est.mean - value).abs() / est.se
            } else if est.mean == *value {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            let label = if *name == "state" {
                format!("state {}", pi.states[k - 3])
            } else {
                name.to_string()
            };
            lines.push(format!(
                "{label}: exact {value:.6}, estimate {:.6} +- {:.6} ({z:.2} s.e.)",
                est.mean, est.se
            ));
        }
        let pass = worst <= 3.0;
        let o = Outcome::new(
            id,
            pass,
            format!(
                "Monte Carlo vs exact under {}: 1000 runs x 1e4 units, worst deviation {worst:.2} s.e. over {} quantities",
                strategy.label(),
                checks.len()
            ),
        );
        out.push(if pass { o } else { o.detail(lines) });
    }
    out
}

fn criterion_7() -> Vec<Outcome> {
    let lambdas = logspace(-2.0, 1.0, 10);
    let mus = logspace(-2.0, 1.0, 10);
    let reward = RewardSpec::PersonalThroughput { focal: 0 };
    let mut failures = Vec::new();
    for &l in &lambdas {
        for &m in &mus {
            let params = SystemParams::experimental_with_rates(l, m);
            let solve = |s| {
                let profile = StrategyProfile::experimental(s);
                let gen = build_generator(&params, &profile).unwrap();
                let g = solve_poisson(&gen, &reward, &params.empty_state()).unwrap().gain;
                (g, metrics(&params, &profile).unwrap())
            };
            let (gb, mb) = solve(Strategy::Batch);
            let (gnb, mnb) = solve(Strategy::NoBatch);
            if !(gb > gnb) {
                failures.push(format!("lambda={l:.3e} mu={m:.3e}: g_B {gb:e} <= g_NB {gnb:e}"));
            }
            if !(mnb.system_throughput >= mb.system_throughput) {
                failures.push(format!(
                    "lambda={l:.3e} mu={m:.3e}: throughput NB {:e} < B {:e}",
                    mnb.system_throughput, mb.system_throughput
                ));
            }
            if !(mnb.mean_sojourn <= mb.mean_sojourn) {
                failures.push(format!(
                    "lambda={l:.3e} mu={m:.3e}: sojourn NB {:e} > B {:e}",
                    mnb.mean_sojourn, mb.mean_sojourn
                ));
            }
        }
    }
    vec![Outcome::new(
        "7",
        failures.is_empty(),
        format!("gain and system-metric ordering on a 10x10 grid: {} violations", failures.len()),
    )
    .detail(failures)]
}

fn criterion_8() -> Vec<Outcome> {
    let specs: Vec<TreatmentSpec> = [TreatmentKind::It, TreatmentKind::Gt, TreatmentKind::GtSt]
        .into_iter()
        .map(|k| TreatmentSpec::paper(k).unwrap())
        .collect();
    let picked = select_sample_paths(&specs, 10_000, 2.0, 0).unwrap();
    let mut lines = Vec::new();
    let mut replay_ok = true;
    for p in &picked {
        let theory: Vec<f64> = p.strengths.iter().map(|s| s.theoretical).collect();
        let path = regenerate(&p.meta).unwrap();
        let again = realized_strengths(&path, &specs, &theory).unwrap();
        replay_ok &= again == p.strengths;
        lines.push(format!(
            "seed {}: {}",
            p.meta.seed,
            p.strengths
                .iter()
                .map(|s| format!("{} {:.2}%", s.kind, s.realized.unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    vec![Outcome::new(
        "8",
        picked.len() >= 2 && replay_ok,
        format!(
            "path selection at 2pp over 1e4 candidates: {} qualifying, replays {}",
            picked.len(),
            if replay_ok { "exact" } else { "differ" }
        ),
    )
    .detail(lines)]
}

fn criterion_9() -> Vec<Outcome> {
    let a = |t: f64, physician: usize, patient: u64| Assignment { t, physician, patient };
    let sizes = |xs: &[Assignment]| -> Vec<u32> {
        classify_assignments(xs, 5.0).iter().map(|l| l.batch_size).collect()
    };
    let example = classify_assignments(&[a(0.0, 0, 1), a(2.0, 0, 2), a(4.0, 0, 3)], 5.0);
    let mut failures = Vec::new();
    if !example.iter().all(|l| l.batched && l.batch_size == 3) {
        failures.push(format!("0/2/4 example: {example:?}"));
    }
    let cases: [(&str, Vec<Assignment>, Vec<u32>); 4] = [
        ("gap beyond window", vec![a(0.0, 0, 1), a(10.0, 0, 2)], vec![1, 1]),
        ("gap equal to window", vec![a(0.0, 0, 1), a(5.0, 0, 2)], vec![2, 2]),
        (
            "two separate pairs",
            vec![a(0.0, 0, 1), a(4.0, 0, 2), a(20.0, 0, 3), a(23.0, 0, 4)],
            vec![2, 2, 2, 2],
        ),
        ("different physicians", vec![a(0.0, 0, 1), a(1.0, 1, 2)], vec![1, 1]),
    ];
    for (name, xs, want) in cases {
        let got = sizes(&xs);
        if got != want {
            failures.push(format!("{name}: got {got:?}, want {want:?}"));
        }
    }
    vec![Outcome::new(
        "9",
        failures.is_empty(),
        "batch classifier: 0/2/4 with a 5-unit window is one batch of 3; chaining cases",
    )
    .detail(failures)]
}

fn criterion_10() -> Vec<Outcome> {
    let want = [3, 3, 2, 1, 0];
    let states: [&[&str]; 5] = [
        &["(0,0,0)"],
        &["(0,1,0)", "(0,0,1)", "(1,0,0)"],
        &["(0,1,1)", "(0,2,0)", "(1,1,0)", "(2,0,0)"],
        &["(0,2,1)", "(1,1,1)", "(3,0,0)"],
        &["(1,2,1)", "(2,1,1)", "(4,0,0)", "(0,2,2)"],
    ];
    let mut failures = Vec::new();
    for (n, group) in states.iter().enumerate() {
        for s in group.iter() {
            let got = admit_count(&st(s), 3, 4);
            if got != want[n] {
                failures.push(format!("{s}: admitted {got}, want {}", want[n]));
            }
        }
    }
    vec![Outcome::new(
        "10",
        failures.is_empty(),
        "admission of a group of 3 into 4 rooms: 0/1 -> 3, 2 -> 2, 3 -> 1, 4 -> 0",
    )
    .detail(failures)]
}

fn main() -> ExitCode {
    let criteria: [fn() -> Vec<Outcome>; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut unexpected = Vec::new();
    for run in criteria {
        let start = Instant::now();
        let outcomes = run();
        let secs = start.elapsed().as_secs_f64();
        for o in outcomes {
            let expected_fail = EXPECTED_FAILURES.contains(&o.id);
            let tag = match (o.pass, expected_fail) {
                (true, false) => "PASS",
                (false, true) => "FAIL (expected)",
                (false, false) => "FAIL",
                (true, true) => "PASS (unexpected)",
            };
            println!("criterion {:<3} {tag:<17} {} [{secs:.2}s]", o.id, o.summary);
            for d in &o.details {
                println!("      {d}");
            }
            if o.pass == expected_fail {
                unexpected.push(o.id);
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all results as expected");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected results for {unexpected:?}");
        ExitCode::FAILURE
    }
}
