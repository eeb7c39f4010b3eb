//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mismatch_qkd::cli;
use mismatch_qkd::oracles::{
    bell_state_ratio, check_decoy_bracketing, check_fock, check_lemma4, check_objective_convexity,
    check_prop3, check_prop4, RootForm, TrialReport,
};
use mismatch_qkd::scalarmath::{p01_min, theta};
use mismatch_qkd::simulate::{eta_grid, sweep_figure, sweep_row};
use mismatch_qkd::{MismatchEta, Probability};

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn from_report(r: &TrialReport) -> Outcome {
    outcome(r.passed(), r.to_string())
}

fn from_reports(rs: &[TrialReport]) -> Outcome {
    let pass = rs.iter().all(TrialReport::passed);
    let detail = rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ");
    outcome(pass, detail)
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took >= limit {
            o.pass = false;
        }
        o.detail = format!("{} [{:.3}s, limit {:.0}s]", o.detail, took.as_secs_f64(), limit.as_secs_f64());
    }
    o
}

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

fn c1_eta_one() -> Outcome {
    let args = [
        "mismatch-qkd", "keyrate", "--mode", "multiphoton", "--eta", "1", "--p-det", "1", "--p1", "0.5",
        "--q", "0.05", "--qz", "0.05", "--p01", "1e-5",
    ];
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(args, &mut out, &mut err);
    let text = String::from_utf8_lossy(&out);
    let k: Option<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("k = "))
        .and_then(|v| v.trim().parse().ok());
    let reference = 1.0 - 2.0 * h(0.05);
    match k {
        Some(k) => outcome(
            code == 0 && (k - reference).abs() <= 2e-3,
            format!("K = {k:.6}, 1 - 2h(0.05) = {reference:.6}, exit {code}"),
        ),
        None => outcome(false, format!("no K in output, exit {code}")),
    }
}

fn c2_sweep_shape() -> Outcome {
    let grid = eta_grid(0.5, 1.0, 51).unwrap();
    let rows = sweep_figure(Probability::new(0.05).unwrap(), Probability::new(1e-5).unwrap(), &grid).unwrap();
    let mut problems = Vec::new();
    if rows.len() != 51 {
        problems.push(format!("{} rows", rows.len()));
    }
    for r in &rows {
        match r.k_main {
            None => problems.push(format!("abort at eta={}", r.eta)),
            Some(k) if k > r.k_tight + 1e-9 => {
                problems.push(format!("k_main {k} > k_tight {} at eta={}", r.k_tight, r.eta))
            }
            _ => {}
        }
    }
    // Ascending eta: k_main must not increase as eta decreases.
    for w in rows.windows(2) {
        if let (Some(lo), Some(hi)) = (w[0].k_main, w[1].k_main) {
            if lo > hi {
                problems.push(format!("k_main rises from {hi} to {lo} as eta drops to {}", w[0].eta));
            }
        }
    }
    let ends = format!(
        "k_main(0.5) = {:.6}, k_main(1) = {:.6}",
        rows[0].k_main.unwrap_or(f64::NAN),
        rows[rows.len() - 1].k_main.unwrap_or(f64::NAN)
    );
    if problems.is_empty() {
        outcome(true, ends)
    } else {
        outcome(false, format!("{ends}; {}", problems.join("; ")))
    }
}

fn c3_ratio() -> Outcome {
    let row = sweep_row(
        Probability::new(0.09).unwrap(),
        Probability::new(1e-5).unwrap(),
        MismatchEta::new(0.8).unwrap(),
    )
    .unwrap();
    match row.ratio {
        Some(r) => outcome(r >= 0.90, format!("ratio = {r:.6}")),
        None => outcome(false, format!("status {}", row.status)),
    }
}

fn c4_p01min() -> Outcome {
    // Independent scan of 2y log2(3) + 2h(y) - 1 for its first sign change.
    let f = |y: f64| 2.0 * y * 3f64.log2() + 2.0 * h(y) - 1.0;
    let step = 1e-6;
    let mut scan = f64::NAN;
    let mut y = 0.0;
    while y < 0.5 {
        let next = y + step;
        if f(y) < 0.0 && f(next) >= 0.0 {
            scan = 0.5 * (y + next);
            break;
        }
        y = next;
    }
    let root = p01_min(3).unwrap();
    let values: Vec<f64> = (3..=10).map(|n| p01_min(n).unwrap()).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        (root - scan).abs() <= 2e-6 && monotone,
        format!(
            "bisection {root:.9}, scan {scan:.9}, p01_min(10) = {:.9}, nondecreasing: {monotone}",
            values[values.len() - 1]
        ),
    )
}

fn c5_double_click() -> Outcome {
    let reports: Vec<TrialReport> = (3..=5).map(|n| check_lemma4(n, 1000, SEED).unwrap()).collect();
    from_reports(&reports)
}

fn c6_single_photon() -> Outcome {
    from_report(&check_prop3(1000, SEED).unwrap())
}

fn c7_two_photon_random() -> Outcome {
    from_report(&check_prop4(1000, SEED, RootForm::AsDerived).unwrap())
}

fn c7_two_photon_bell() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for e in [0.5, 0.9] {
        let eta = MismatchEta::new(e).unwrap();
        let ratio = bell_state_ratio(eta);
        let target = (1.0 + theta(eta, 2)) / 4.0;
        pass &= (ratio - target).abs() <= 1e-10;
        parts.push(format!("eta={e}: q2/t2 = {ratio:.10}, (1+theta2)/4 = {target:.10}"));
    }
    outcome(pass, parts.join("; "))
}

fn c8_convexity() -> Outcome {
    from_report(&check_objective_convexity(200, SEED).unwrap())
}

fn c9_decoy() -> Outcome {
    from_report(&check_decoy_bracketing(100, SEED).unwrap())
}

fn c10_fock() -> Outcome {
    from_report(&check_fock(200, SEED).unwrap())
}

fn main() -> ExitCode {
    let criteria: [(&str, Option<u64>, fn() -> Outcome); 11] = [
        ("1  eta=1 consistency", Some(1), c1_eta_one),
        ("2  efficiency sweep shape", Some(5), c2_sweep_shape),
        ("3  ratio at eta=0.8, Q=0.09", None, c3_ratio),
        ("4  p01_min root and monotonicity", None, c4_p01min),
        ("5  double-click entropic bound", Some(30), c5_double_click),
        ("6  single-photon entropy bound", None, c6_single_photon),
        ("7a two-photon bounds, random states", None, c7_two_photon_random),
        ("7b two-photon bounds, Bell state", None, c7_two_photon_bell),
        ("8  objective convexity", None, c8_convexity),
        ("9  decoy bracketing", None, c9_decoy),
        ("10 Fock infrastructure", None, c10_fock),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(limit.map(Duration::from_secs), f);
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
