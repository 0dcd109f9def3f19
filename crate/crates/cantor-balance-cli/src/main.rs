//! `cantor-balance`: batch front-end for the balance, repair, extension and forcing code.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails, 2 for usage
//! and input errors, 3 for internal contract violations.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use cantor_balance::balance::{is_m_balanced, is_mt_balanced, is_semibalanced};
use cantor_balance::examples::{aviles_measure, balanced_open_u, maximal_cylinders, plebanek_b, svg_cylinders};
use cantor_balance::extension::{build_gstar_witness, check_gstar, grothendieck_gap, ExtensionConfig, StarAlgebra};
use cantor_balance::forcing::{run_stages, ForcingConfig, ScheduledFamily};
use cantor_balance::harness::{run_suite, seeded_schedule, Suite, SuiteConfig};
use cantor_balance::measures::{FAMeasure, NormalFamily};
use cantor_balance::ratio;
use cantor_balance::repair::{construct_m, rademacher_tail_mass, Mode, Regime, RepairInstance};
use cantor_balance::{CubeSet, Error, FiniteAlgebra, Rational};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "cantor-balance",
    version,
    about = "Exact balance checks, repairs, extension steps and forcing runs on the Cantor cube"
)]
struct Cli {
    /// JSON file with defaults for the flags; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check (t, eps)-semibalance, (m, t, eps)- or (m, eps)-balance of a set.
    CheckBalance {
        /// The set as `N:hex`.
        #[arg(long)]
        set: String,
        #[arg(long)]
        eps: String,
        /// Level m for balance.
        #[arg(long, conflicts_with = "semi")]
        m: Option<u32>,
        /// Upper end of the window for (m, t, eps)-balance.
        #[arg(long, requires = "m")]
        t: Option<u32>,
        /// Check (t, eps)-semibalance at this t instead.
        #[arg(long)]
        semi: Option<u32>,
    },
    /// Build M for a repair instance read as JSON.
    Repair {
        /// Instance file; stdin when absent.
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::SwapDescent)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = RegimeArg::Relaxed)]
        regime: RegimeArg,
    },
    /// Run K extension steps on a chain and a normal family read as JSON.
    Extend {
        /// Input file with `chain`, `family`, `steps` and optional `config`; stdin when absent.
        input: Option<PathBuf>,
    },
    /// Generic runs over seeded point-mass families.
    ForceRun {
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Length each condition chain must reach.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        families: Option<usize>,
        #[arg(long)]
        family_len: Option<usize>,
        /// The chain of algebras is A_1, ..., A_levels.
        #[arg(long)]
        levels: Option<u32>,
        /// Stages of scheduled families as JSON, instead of seeded ones.
        #[arg(long, conflicts_with_all = ["stages", "families", "family_len"])]
        schedule: Option<PathBuf>,
        /// Write the schedule that was run.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Emit a named object as JSON, optionally as an SVG cylinder diagram.
    Examples {
        #[arg(value_enum, ignore_case = true)]
        which: ExampleArg,
        /// Truncation level of U.
        #[arg(long, default_value_t = 3)]
        levels: u32,
        /// Resolution for B and theta_n.
        #[arg(long, default_value_t = 8)]
        k: u32,
        /// Index n of theta_n.
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the lemma suites and print a pass table.
    VerifyLemmas {
        #[arg(long)]
        resolution: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Only these suites.
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time the main kernels.
    Bench {
        #[arg(long)]
        resolution: Option<u32>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SwapDescent,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    U,
    Plebanek,
    Aviles,
}

/// Optional defaults from `--config`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    resolution: Option<u32>,
    stages: Option<usize>,
    depth: Option<usize>,
    families: Option<usize>,
    family_len: Option<usize>,
    levels: Option<u32>,
}

#[derive(Deserialize)]
struct ExtendInput {
    chain: Vec<FiniteAlgebra>,
    family: NormalFamily,
    steps: usize,
    #[serde(default)]
    config: Option<ExtensionConfig>,
}

#[derive(Serialize)]
struct ExtendOutput {
    witness: cantor_balance::extension::GStarWitness,
    state: cantor_balance::extension::ExtensionState,
    gstar: cantor_balance::extension::CheckReport,
    gap: Option<String>,
}

#[derive(Serialize)]
struct SetExample {
    name: String,
    set: CubeSet,
    #[serde(with = "ratio::text")]
    lambda: Rational,
    maximal_cylinders: Vec<String>,
}

#[derive(Serialize)]
struct MeasureExample {
    name: String,
    measure: FAMeasure,
    #[serde(with = "ratio::text")]
    norm: Rational,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Internal(_)) => 3,
            Some(Error::Parse(_) | Error::Parameter(_) | Error::BadResolution(_)) => 2,
            Some(_) => 1,
            None => 2,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type Outcome = Result<bool, Failure>;

fn read_input(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(load_config).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, &file) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(command: Command, file: &FileConfig) -> Outcome {
    match command {
        Command::CheckBalance { set, eps, m, t, semi } => {
            let a = CubeSet::from_text(&set)?;
            let eps = ratio::from_text(&eps)?;
            let report = match (semi, m, t) {
                (Some(t), _, _) => is_semibalanced(&a, t, &eps),
                (None, Some(m), Some(t)) => is_mt_balanced(&a, m, t, &eps)?,
                (None, Some(m), None) => is_m_balanced(&a, m, &eps)?,
                (None, None, _) => return Err(anyhow!("give --m or --semi").into()),
            };
            print_json(&report)?;
            Ok(report.holds)
        }
        Command::Repair { input, mode, regime } => {
            let inst: RepairInstance =
                serde_json::from_str(&read_input(input.as_deref())?).context("parsing the instance")?;
            let mode = match mode {
                ModeArg::SwapDescent => Mode::SwapDescent,
                ModeArg::Exhaustive => Mode::Exhaustive,
            };
            let regime = match regime {
                RegimeArg::Strict => Regime::Strict,
                RegimeArg::Relaxed => Regime::Relaxed,
            };
            let r = construct_m(&inst, mode, regime)?;
            print_json(&r)?;
            let c = &r.certificate;
            Ok(c.below_bound && c.exchange_inequality && (regime == Regime::Relaxed || c.semibalance.holds))
        }
        Command::Extend { input } => {
            let inp: ExtendInput = serde_json::from_str(&read_input(input.as_deref())?).context("parsing the input")?;
            inp.family.validate()?;
            let cfg = inp.config.unwrap_or_default();
            let (witness, state) = build_gstar_witness(&inp.chain, &inp.family, inp.steps, &cfg)?;
            let gstar = check_gstar(&StarAlgebra::Clopen, &witness.g, &inp.family, &witness, &cfg);
            let gap = grothendieck_gap(&inp.family, &witness, &cfg).err();
            let ok = gstar.holds && gap.is_none();
            print_json(&ExtendOutput { witness, state, gstar, gap })?;
            Ok(ok)
        }
        Command::ForceRun { stages, seed, depth, families, family_len, levels, schedule, schedule_out } => {
            let stages = stages.or(file.stages).unwrap_or(1);
            let seed = seed.or(file.seed).unwrap_or(0);
            let depth = depth.or(file.depth).unwrap_or(4);
            let families = families.or(file.families).unwrap_or(2);
            let len = family_len.or(file.family_len).unwrap_or(8);
            let levels = levels.or(file.levels).unwrap_or(3);
            if stages == 0 || levels == 0 {
                return Err(anyhow!("--stages and --levels must be positive").into());
            }
            let chain: Vec<FiniteAlgebra> =
                (1..=levels).map(|j| FiniteAlgebra::level(j, j)).collect::<Result<_, _>>()?;
            let schedules: Vec<Vec<ScheduledFamily>> = match schedule {
                Some(path) => {
                    let s: Vec<Vec<ScheduledFamily>> =
                        serde_json::from_str(&read_input(Some(&path))?).context("parsing the schedule")?;
                    for f in s.iter().flatten() {
                        f.family.validate()?;
                    }
                    s
                }
                None => (0..stages as u64)
                    .map(|i| seeded_schedule(seed.wrapping_add(i), families, len))
                    .collect::<Result<_, _>>()?,
            };
            if schedules.is_empty() {
                return Err(anyhow!("the schedule has no stages").into());
            }
            if let Some(path) = schedule_out {
                let text = serde_json::to_string_pretty(&schedules).map_err(anyhow::Error::from)?;
                fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            let runs = run_stages(&schedules, depth, &chain, &ForcingConfig::default())?;
            print_json(&runs)?;
            Ok(runs.iter().all(|r| r.holds))
        }
        Command::Examples { which, levels, k, n, svg } => {
            let want_svg = svg.is_some();
            let (json, picture) = match which {
                ExampleArg::U => {
                    let u = balanced_open_u(levels)?;
                    let depth = u.resolution();
                    (set_example("U", u.clone())?, want_svg.then(|| svg_cylinders(&[(&u, "#b2182b")], depth)))
                }
                ExampleArg::Plebanek => {
                    let b = plebanek_b(k)?;
                    (set_example("B", b.clone())?, want_svg.then(|| svg_cylinders(&[(&b, "#2166ac")], k)))
                }
                ExampleArg::Aviles => {
                    let th = aviles_measure(n, k)?;
                    let carrier = th.carrier(k)?;
                    let ex = MeasureExample { name: format!("theta_{n}"), norm: th.norm(), measure: th };
                    (
                        serde_json::to_value(ex).map_err(anyhow::Error::from)?,
                        want_svg.then(|| svg_cylinders(&[(&carrier, "#1b7837")], k)),
                    )
                }
            };
            print_json(&json)?;
            if let (Some(path), Some(text)) = (svg, picture) {
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(true)
        }
        Command::VerifyLemmas { resolution, seed, suites, json, csv } => {
            let cfg = SuiteConfig {
                seed: seed.or(file.seed).unwrap_or(0),
                resolution: resolution.or(file.resolution).unwrap_or(12),
            };
            let chosen: Vec<Suite> = if suites.is_empty() {
                Suite::ALL.to_vec()
            } else {
                suites.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
            };
            println!("{:<22} {:>3} {:>8} {:>6}  {:<4}  statement", "suite", "#", "cases", "fail", "");
            let mut reports = Vec::new();
            for s in chosen {
                let r = run_suite(s, &cfg);
                println!(
                    "{:<22} {:>3} {:>8} {:>6}  {:<4}  {}",
                    s.name(),
                    s.criterion(),
                    r.cases,
                    r.failures,
                    if r.passed() { "pass" } else { "FAIL" },
                    s.statement()
                );
                if let Some(f) = &r.first_failure {
                    println!("    first failure: {f}");
                }
                reports.push(r);
            }
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&reports).map_err(anyhow::Error::from)?;
                fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = csv {
                let mut text = String::from("suite,criterion,cases,failures,passed\n");
                for r in &reports {
                    text += &format!(
                        "{},{},{},{},{}\n",
                        r.suite.name(),
                        r.suite.criterion(),
                        r.cases,
                        r.failures,
                        r.passed()
                    );
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::Bench { resolution } => {
            bench(resolution.or(file.resolution).unwrap_or(20))?;
            Ok(true)
        }
    }
}

fn set_example(name: &str, set: CubeSet) -> anyhow::Result<serde_json::Value> {
    let ex = SetExample {
        name: name.into(),
        lambda: set.lambda().to_rational(),
        maximal_cylinders: maximal_cylinders(&set).iter().map(|s| s.to_string()).collect(),
        set,
    };
    Ok(serde_json::to_value(ex)?)
}

fn bench(res: u32) -> Result<(), Failure> {
    let time = |name: &str, f: &mut dyn FnMut() -> Result<(), Error>| -> Result<(), Failure> {
        let start = Instant::now();
        f()?;
        println!("{name:<40} {:>10.3} ms", start.elapsed().as_secs_f64() * 1e3);
        Ok(())
    };
    let a = CubeSet::from_atoms(res, (0..1u64 << res).filter(|x| x.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 62 == 0));
    time(&format!("phi_r for all r at resolution {res}"), &mut || {
        let _: i64 = (1..=res).map(|r| a.phi_count(r)).sum();
        Ok(())
    })?;
    time(&format!("(m, eps)-balance at m = {}, resolution {res}", res / 2), &mut || {
        is_m_balanced(&a, res / 2, &ratio::frac(1, 8)).map(|_| ())
    })?;
    let d: Vec<Rational> = (1..=16).map(|i| ratio::frac(i, 3)).collect();
    time("Rademacher tail mass, 16 terms", &mut || rademacher_tail_mass(&d, &ratio::frac(1, 2)).map(|_| ()))?;
    let inst = RepairInstance {
        t: 1,
        eta: ratio::pow2_neg(7),
        n: 16,
        k: 400,
        f: CubeSet::cylinder(&"+".parse().expect("signs"), 16)?,
        q: CubeSet::empty(16),
        z: CubeSet::empty(16),
    };
    time("swap descent, n = 16, k = 400", &mut || construct_m(&inst, Mode::SwapDescent, Regime::Relaxed).map(|_| ()))?;
    let chain: Vec<FiniteAlgebra> = (1..=3).map(|j| FiniteAlgebra::level(j, j)).collect::<Result<_, _>>()?;
    let fam = seeded_schedule(0, 1, 12)?.remove(0).family;
    time("three extension steps", &mut || {
        build_gstar_witness(&chain, &fam, 3, &ExtensionConfig::default()).map(|_| ())
    })?;
    Ok(())
}
