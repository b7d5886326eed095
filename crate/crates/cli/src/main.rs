mod pipeline;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use csaopt_core::certifier::{certify, ucap_precheck, CertStatus};
use csaopt_core::data_model::{BufferSpec, CapLimit, Regime, RegimeSelector};
use csaopt_core::explorer::hybrid_optimize;
use csaopt_core::governance::{write_report, RESULTS};
use csaopt_core::instance_gen::{generate, GenMode, GenSpec};
use csaopt_core::{serialize_case, Allocation, CaseInput, Fraction, Problem};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "csaopt", version, about = "Collateral allocation under CSA terms: explore, certify, audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case file and print its derived quantities.
    Validate {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Full pipeline: baselines, hybrid search, certification, audit bundle.
    Optimize {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Certify an allocation (default: the hybrid result) and print the report.
    Certify {
        #[arg(long)]
        case: PathBuf,
        /// Comma-separated lot counts in inventory order.
        #[arg(long, value_delimiter = ',')]
        lots: Option<Vec<u32>>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Minimal feasible buffer B* and the coverage-cap pre-check.
    Bstar {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the pipeline once per parameter value; writes frontier.json.
    Sweep {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a synthetic case file.
    Gen {
        #[arg(long, value_enum, default_value = "desk")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n_items: Option<usize>,
        #[arg(long)]
        regime: Option<Regime>,
        #[arg(long)]
        buffer_bps: Option<f64>,
        #[arg(long)]
        cash_cap: Option<f64>,
        #[arg(long)]
        scenarios: Option<usize>,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render report.html from the artifacts of a bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tiny,
    Desk,
    CapTight,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Gamma,
    Mu,
    Lambda,
    BufferBps,
    CashCap,
    NMax,
    KMax,
    P,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    buffer_bps: Option<f64>,
    /// Cash cap as a fraction of coverage.
    #[arg(long)]
    cash_cap: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    sa_iters: Option<u64>,
    #[arg(long)]
    plateau_s: Option<u64>,
    #[arg(long)]
    wall_seconds: Option<f64>,
    /// Pure simulated annealing.
    #[arg(long, conflicts_with = "must_jump")]
    no_jump: bool,
    /// Shrink over-wide jump subsets instead of skipping.
    #[arg(long)]
    must_jump: bool,
}

impl Overrides {
    fn apply(&self, case: &mut CaseInput) {
        if let Some(r) = self.regime {
            case.regime = RegimeSelector::uniform(r);
        }
        if let Some(bps) = self.buffer_bps {
            case.window.buffer = BufferSpec::Bps(bps);
        }
        if let Some(f) = self.cash_cap {
            case.caps.cash_cap = Some(CapLimit::FractionOfU(Fraction::from_f64(f)));
        }
        let w = &mut case.weights;
        for (flag, slot) in [
            (self.lambda, &mut w.lambda_movement),
            (self.mu, &mut w.mu_cvar),
            (self.gamma, &mut w.gamma_overshoot),
        ] {
            if let Some(v) = flag {
                *slot = v;
                w.calibrated = false;
            }
        }
        let l = &mut case.solver_limits;
        if let Some(v) = self.seed {
            l.seed = v;
        }
        if let Some(v) = self.n_max {
            l.n_max = v;
        }
        if let Some(v) = self.k_max {
            l.k_max = v;
        }
        if let Some(v) = self.p {
            l.depth_p = v;
        }
        if let Some(v) = self.sa_iters {
            l.sa_iterations = v;
        }
        if let Some(v) = self.plateau_s {
            l.plateau_window = v;
        }
        if let Some(v) = self.wall_seconds {
            l.wall_seconds = v;
        }
        if self.no_jump {
            l.jumps_enabled = false;
        }
        if self.must_jump {
            l.must_jump = true;
        }
    }
}

fn case_with(path: &Path, overrides: &Overrides) -> Result<CaseInput> {
    let mut case = pipeline::load_case(path)?;
    overrides.apply(&mut case);
    case.validate()?;
    case.solver_limits.validate()?;
    Ok(case)
}

/// Writes to standard output; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json(v: &Value) -> Result<()> {
    emit(&serde_json::to_string_pretty(v)?)
}

fn validate(case: CaseInput) -> Result<u8> {
    let warnings = case.warnings();
    let p = Problem::new(case)?;
    print_json(&json!({
        "valid": true,
        "r_eff": p.r_eff,
        "buffer": p.buffer,
        "hard_cap_enabled": p.hard_cap,
        "eligible_items": p.len(),
        "ineligible": p.ineligible,
        "weights": {
            "lambda": p.lambda,
            "mu": p.mu,
            "gamma": p.gamma,
        },
        "warnings": warnings,
    }))?;
    Ok(0)
}

fn optimize(case: CaseInput, out: &Path) -> Result<u8> {
    let outcome = pipeline::run(case, out)?;
    let c = &outcome.certification;
    eprintln!(
        "status {:?}  J {}  bound {}  gap {}  bundle {}",
        c.status,
        c.incumbent_j.map_or("-".into(), |j| format!("{j:.6}")),
        c.best_bound.map_or("-".into(), |b| format!("{b:.6}")),
        c.gap.map_or("-".into(), |g| format!("{g:.3e}")),
        out.display()
    );
    if c.status == CertStatus::Infeasible {
        if let Some(b) = &outcome.b_star {
            eprintln!(
                "infeasible_u_cap: minimal feasible buffer B* = {} ({:.1} bps)",
                b.reported(),
                b.b_star_bps
            );
        }
    }
    Ok(outcome.exit_code())
}

fn certify_cmd(case: CaseInput, lots: Option<Vec<u32>>) -> Result<u8> {
    let limits = case.solver_limits.clone();
    let p = Problem::new(case)?;
    let x = match lots {
        Some(l) => {
            if l.len() != p.len() {
                bail!("--lots has {} entries, the case has {} eligible items", l.len(), p.len());
            }
            Allocation::new(l)
        }
        None => hybrid_optimize(&p, &limits)
            .map(|h| h.best)
            .unwrap_or_else(|_| Allocation::new(vec![0; p.len()])),
    };
    let report = certify(&p, &x, &limits)?;
    print_json(&serde_json::to_value(&report)?)?;
    Ok(if report.status == CertStatus::Infeasible { 2 } else { 0 })
}

fn bstar(case: CaseInput) -> Result<u8> {
    let p = Problem::new(case)?;
    let b = ucap_precheck(&p)?;
    print_json(&json!({
        "usd": b.reported(),
        "bps": b.b_star_bps,
        "infeasible_u_cap": b.infeasible_u_cap,
        "report": b,
    }))?;
    Ok(if b.infeasible_u_cap { 2 } else { 0 })
}

fn sweep_point(param: SweepParam, value: f64) -> Overrides {
    let mut o = Overrides::default();
    match param {
        SweepParam::Gamma => o.gamma = Some(value),
        SweepParam::Mu => o.mu = Some(value),
        SweepParam::Lambda => o.lambda = Some(value),
        SweepParam::BufferBps => o.buffer_bps = Some(value),
        SweepParam::CashCap => o.cash_cap = Some(value),
        SweepParam::NMax => o.n_max = Some(value as usize),
        SweepParam::KMax => o.k_max = Some(value as usize),
        SweepParam::P => o.p = Some(value as usize),
    }
    o
}

fn sweep(case: CaseInput, out: &Path, param: SweepParam, values: &[f64]) -> Result<u8> {
    let name = param.to_possible_value().expect("named").get_name().to_string();
    let points: Vec<Result<Value>> = values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut c = case.clone();
            sweep_point(param, v).apply(&mut c);
            c.validate()?;
            c.solver_limits.validate()?;
            let dir = out.join(format!("point_{k}"));
            let o = pipeline::run(c, &dir)?;
            let sol = o.certification.solution_breakdown.as_ref();
            Ok(json!({
                "value": v,
                "bundle": format!("point_{k}"),
                "status": o.status,
                "j": o.certification.incumbent_j,
                "overshoot": sol.map(|b| b.overshoot_value),
                "base_cost": sol.map(|b| b.base_cost_abs),
                "cvar": sol.map(|b| b.cvar_value),
                "movement_lots": sol.map(|b| b.movement_lots),
            }))
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let frontier = json!({ "param": name, "points": points });
    fs::create_dir_all(out)?;
    fs::write(out.join("frontier.json"), serde_json::to_vec_pretty(&frontier)?)?;
    print_json(&frontier)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn gen(
    mode: Mode,
    seed: u64,
    n_items: Option<usize>,
    regime: Option<Regime>,
    buffer_bps: Option<f64>,
    cash_cap: Option<f64>,
    scenarios: Option<usize>,
    out: Option<&Path>,
) -> Result<u8> {
    let mut spec = match mode {
        Mode::Tiny => GenSpec::tiny(),
        Mode::Desk => GenSpec::desk(seed),
        Mode::CapTight => GenSpec::cap_tight(seed),
    };
    spec.seed = seed;
    if let Some(n) = n_items {
        if spec.mode == GenMode::Tiny {
            bail!("--n-items does not apply to the tiny fixture");
        }
        spec.n_items = n;
    }
    if let Some(r) = regime {
        spec.regime = r;
    }
    if let Some(b) = buffer_bps {
        spec.buffer_bps = b;
    }
    if cash_cap.is_some() {
        spec.cash_cap = cash_cap;
    }
    if let Some(s) = scenarios {
        spec.scenarios = s;
    }
    let bytes = serialize_case(&generate(&spec))?;
    match out {
        Some(path) => fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&String::from_utf8_lossy(&bytes))?,
    }
    Ok(0)
}

fn report(bundle: &Path) -> Result<u8> {
    if !bundle.join(RESULTS).exists() {
        eprintln!("warning: {} has no {RESULTS}", bundle.display());
    }
    let path = write_report(bundle)?;
    emit(&path.display().to_string())?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { case, overrides } => validate(case_with(&case, &overrides)?),
        Command::Optimize { case, out, overrides } => optimize(case_with(&case, &overrides)?, &out),
        Command::Certify { case, lots, overrides } => certify_cmd(case_with(&case, &overrides)?, lots),
        Command::Bstar { case, overrides } => bstar(case_with(&case, &overrides)?),
        Command::Sweep { case, out, param, values, overrides } => {
            sweep(case_with(&case, &overrides)?, &out, param, &values)
        }
        Command::Gen { mode, seed, n_items, regime, buffer_bps, cash_cap, scenarios, out } => {
            gen(mode, seed, n_items, regime, buffer_bps, cash_cap, scenarios, out.as_deref())
        }
        Command::Report { bundle } => report(&bundle),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
