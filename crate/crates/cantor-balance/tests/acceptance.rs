//! One line per acceptance criterion. Runs as a plain binary so the lines always print.
//!
//! `CANTOR_SEED` picks the seed (default 7). `CANTOR_STRICT=1` adds the strict-regime
//! repair run at `t = 2`, `eta = 2^-13`, `n = 30`.

use std::time::{Duration, Instant};

use cantor_balance::harness::{run_suite, Suite, SuiteConfig, SuiteReport};
use cantor_balance::ratio::pow2_neg;
use cantor_balance::repair::{construct_m, Mode, Regime, RepairInstance};
use cantor_balance::{CubeSet, Signs};

/// Criterion number, wall-clock budget.
const BUDGETS: [(u8, u64); 9] = [(1, 60), (2, 10), (3, 300), (4, 120), (5, 120), (6, 60), (7, 180), (8, 180), (9, 30)];

fn run_criterion(c: u8, cfg: &SuiteConfig) -> (Vec<SuiteReport>, Duration) {
    let start = Instant::now();
    let reports = Suite::ALL.into_iter().filter(|s| s.criterion() == c).map(|s| run_suite(s, cfg)).collect();
    (reports, start.elapsed())
}

fn summary(reports: &[SuiteReport]) -> String {
    reports
        .iter()
        .map(|r| match &r.first_failure {
            None => format!("{} {}/{}", r.suite, r.cases - r.failures, r.cases),
            Some(f) => format!("{} {}/{} first failure: {f}", r.suite, r.cases - r.failures, r.cases),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn strict_run() -> bool {
    // F = <++> minus nothing, Q and Z empty, k/2^n in (eta/2, eta)
    let n = 30;
    let inst = RepairInstance {
        t: 2,
        eta: pow2_neg(13),
        n,
        k: (1 << (n - 14)) + 1,
        f: CubeSet::cylinder(&"++".parse::<Signs>().unwrap(), 2).unwrap(),
        q: CubeSet::empty(2),
        z: CubeSet::empty(2),
    };
    match construct_m(&inst, Mode::SwapDescent, Regime::Strict) {
        Ok(r) => {
            let ok = r.certificate.below_bound && r.certificate.exchange_inequality && r.certificate.semibalance.holds;
            println!("strict regime n = 30: {} (S = {})", if ok { "PASS" } else { "FAIL" }, r.s_objective);
            ok
        }
        Err(e) => {
            println!("strict regime n = 30: FAIL ({e})");
            false
        }
    }
}

fn main() {
    let seed = std::env::var("CANTOR_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = SuiteConfig { seed, resolution: 12 };
    let mut all_pass = true;
    let mut first_json = Vec::new();
    for (c, budget) in BUDGETS {
        let (reports, took) = run_criterion(c, &cfg);
        let ok = reports.iter().all(|r| r.passed()) && took < Duration::from_secs(budget);
        all_pass &= ok;
        println!(
            "criterion {c}: {} in {:.1}s (budget {budget}s): {}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            summary(&reports)
        );
        first_json.extend(reports.iter().map(|r| serde_json::to_string(r).unwrap()));
    }
    // criterion 10: the same seed gives the same bytes, suite by suite
    let again: Vec<String> = Suite::ALL.iter().map(|&s| serde_json::to_string(&run_suite(s, &cfg)).unwrap()).collect();
    let order: Vec<Suite> =
        BUDGETS.iter().flat_map(|&(c, _)| Suite::ALL.into_iter().filter(move |s| s.criterion() == c)).collect();
    let differing: Vec<String> = order
        .iter()
        .zip(&first_json)
        .filter(|(s, j)| again[Suite::ALL.iter().position(|x| x == *s).unwrap()] != **j)
        .map(|(s, _)| s.to_string())
        .collect();
    let ok = differing.is_empty() && first_json.len() == Suite::ALL.len();
    all_pass &= ok;
    println!(
        "criterion 10: {}: {} suites re-run with seed {seed}, {} with differing JSON{}",
        if ok { "PASS" } else { "FAIL" },
        again.len(),
        differing.len(),
        if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) }
    );
    if std::env::var("CANTOR_STRICT").as_deref() == Ok("1") {
        all_pass &= strict_run();
    }
    if !all_pass {
        std::process::exit(1);
    }
}
