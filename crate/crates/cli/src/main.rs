use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use vrpsd_core::instance::{load_instance, to_json, CvrplibOptions};
use vrpsd_core::oracle::{brute_force_solve, check_monotonicity, check_subsequence_monotonicity, check_superadditivity};
use vrpsd_core::recourse::{or_cost_to_go, recourse, simulate_or};
use vrpsd_core::solver::{solve, SolveOptions, SolveStatus};
use vrpsd_core::{builtin, reproduce, Error, Instance, InstanceFormat, Path, Policy, VariantConfig};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_LIMIT: u8 = 2;

#[derive(Parser)]
#[command(name = "vrpsd", version, about = "Exact solver for the VRP with stochastic demands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance to optimality.
    Solve(SolveArgs),
    /// Recourse of a single route.
    Evaluate(EvaluateArgs),
    /// Exhaustively check a recourse property.
    Check(CheckArgs),
    /// Run the checks bundled with an embedded instance.
    Reproduce {
        #[arg(value_parser = builtin::NAMES)]
        name: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Print an embedded instance as JSON.
    Export {
        #[arg(value_parser = builtin::NAMES)]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file, or the name of an embedded instance (fig1, fig2, thm4).
    instance: String,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// JSON sidecar with demand and fleet settings for CVRPLIB files.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Round CVRPLIB Euclidean distances to integers.
    #[arg(long)]
    round_distances: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Cvrplib,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value = "or", value_parser = parse_policy)]
    policy: Policy,
    /// Derive fleet sizes and load factor from the data (vrpsd, ecc, frc, basic).
    #[arg(long, value_parser = parse_variant)]
    variant: Option<VariantConfig>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    no_e_cuts: bool,
    #[arg(long)]
    no_s_cuts: bool,
    /// Single recourse variable with classic optimality cuts.
    #[arg(long)]
    classic: bool,
    /// Compare the optimum with exhaustive enumeration (n ≤ 9).
    #[arg(long)]
    oracle_check: bool,
    /// `depth=k`: verify superadditivity on concatenations up to k customers first.
    #[arg(long, value_parser = parse_depth)]
    check_superadditivity: Option<usize>,
    /// Solve even when that check finds a violation.
    #[arg(long)]
    allow_non_superadditive: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write every added cut as JSON lines.
    #[arg(long)]
    cuts_log: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Customers in visiting order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    route: Vec<usize>,
    #[arg(long, default_value = "or", value_parser = parse_policy)]
    policy: Policy,
    /// Monte-Carlo samples for an independent estimate (OR only).
    #[arg(long)]
    simulate: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Property {
    Superadditivity,
    Monotonicity,
    Subsequence,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(value_enum, required = true)]
    property: Property,
    #[arg(long, default_value = "or", value_parser = parse_policy)]
    policy: Policy,
    /// Longest path (or largest set) examined.
    #[arg(long)]
    max_len: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).map_err(|e| e.to_string())
}

fn parse_variant(s: &str) -> Result<VariantConfig, String> {
    VariantConfig::parse(s).map_err(|e| e.to_string())
}

fn parse_depth(s: &str) -> Result<usize, String> {
    s.strip_prefix("depth=")
        .unwrap_or(s)
        .parse()
        .map_err(|_| format!("expected depth=k, got '{s}'"))
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    instance: String,
    options: Value,
    result: Value,
    seed: u64,
    version: &'static str,
    wall_time_s: f64,
}

fn load(args: &InstanceArgs) -> anyhow::Result<Instance> {
    let path = FsPath::new(&args.instance);
    if !path.exists() {
        if let Some(inst) = builtin::by_name(&args.instance) {
            return Ok(inst);
        }
    }
    let format = match args.format {
        Some(Format::Json) => InstanceFormat::Json,
        Some(Format::Cvrplib) => cvrplib(args),
        None if path.extension().is_some_and(|e| e == "vrp") => cvrplib(args),
        None => InstanceFormat::Json,
    };
    load_instance(path, &format).with_context(|| format!("loading {}", args.instance))
}

fn cvrplib(args: &InstanceArgs) -> InstanceFormat {
    InstanceFormat::Cvrplib {
        sidecar: args.sidecar.clone(),
        options: CvrplibOptions {
            round_distances: args.round_distances,
            ..Default::default()
        },
    }
}

fn emit(out: &OutputArgs, report: &RunReport, table: impl FnOnce() -> String) -> anyhow::Result<()> {
    let text = if out.table {
        table()
    } else {
        serde_json::to_string_pretty(report)?
    };
    match &out.out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => print_stdout(&text),
    }
}

/// Prints to stdout; a reader closing the pipe early is not an error.
fn print_stdout(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<u8> {
    let start = Instant::now();
    let mut inst = load(&args.instance)?;
    if let Some(v) = args.variant {
        inst = v.apply(&inst)?;
    }
    let options = SolveOptions {
        time_limit_s: args.time_limit,
        node_limit: args.node_limit,
        set_cuts: !args.no_s_cuts,
        edge_set_cuts: !args.no_e_cuts,
        classic: args.classic,
        check_superadditivity: args.check_superadditivity,
        allow_non_superadditive: args.allow_non_superadditive,
        record_cuts: args.cuts_log.is_some(),
        seed: args.seed,
        ..Default::default()
    };
    let sol = match solve(&inst, args.policy, &options) {
        Err(Error::Limit(msg)) => {
            eprintln!("limit reached: {msg}");
            return Ok(EXIT_LIMIT);
        }
        other => other?,
    };
    if let Some(p) = &args.cuts_log {
        let lines: Vec<String> = sol.cut_log.iter().map(serde_json::to_string).collect::<Result<_, _>>()?;
        std::fs::write(p, lines.join("\n") + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    let mut result = serde_json::to_value(&sol)?;
    let mut code = if sol.status == SolveStatus::Limit { EXIT_LIMIT } else { EXIT_OK };
    if args.oracle_check {
        let exact = brute_force_solve(&inst, args.policy)?;
        let matches = (exact.objective - sol.objective).abs() <= 1e-6;
        result["oracle"] = json!({ "objective": exact.objective, "matches": matches });
        if !matches && sol.status == SolveStatus::Optimal {
            code = EXIT_ERROR;
        }
    }
    let report = RunReport {
        command: "solve",
        instance: inst.name().to_string(),
        options: json!({
            "policy": args.policy,
            "variant": args.variant.map(|v| v.name()),
            "solver": options,
        }),
        result,
        seed: args.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    emit(&args.out, &report, || {
        let mut t = format!(
            "{:<8} {:>12} {:>12}  route\n",
            "route", "first-stage", "recourse"
        );
        for (k, r) in sol.routes.iter().enumerate() {
            t += &format!("{:<8} {:>12.6} {:>12.6}  {:?}\n", k + 1, r.first_stage, r.recourse, r.customers);
        }
        t += &format!(
            "objective {:.6}  bound {:.6}  gap {:.2e}  status {:?}  nodes {}",
            sol.objective, sol.lower_bound, sol.gap, sol.status, sol.stats.nodes
        );
        t
    })?;
    Ok(code)
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<u8> {
    let start = Instant::now();
    let inst = load(&args.instance)?;
    let path = Path::new(args.route.clone(), inst.n())?;
    if !inst.fits(path.customers()) {
        bail!("route {path} exceeds the expected-load limit {}", inst.route_limit());
    }
    let value = recourse(&inst, &path, args.policy);
    let first_stage = vrpsd_core::oracle::route_cost(&inst, path.customers());
    let mut result = json!({
        "route": path.customers(),
        "policy": args.policy,
        "first_stage": first_stage,
        "recourse": value,
        "total": first_stage + value.best,
    });
    if args.policy == Policy::Or {
        let profile = or_cost_to_go(&inst, &path);
        result["restock_thresholds"] = json!(profile.thresholds());
        if let Some(samples) = args.simulate {
            let est = simulate_or(&inst, &profile, samples, args.seed);
            let agrees = (est.mean - value.forward).abs() <= 4.0 * est.std_error.max(1e-12);
            result["simulation"] = json!({ "estimate": est, "within_4_std_errors": agrees });
        }
    } else if args.simulate.is_some() {
        bail!("--simulate is only available for the OR policy");
    }
    let report = RunReport {
        command: "evaluate",
        instance: inst.name().to_string(),
        options: json!({ "policy": args.policy, "simulate": args.simulate }),
        result,
        seed: args.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    emit(&args.out, &report, || {
        format!(
            "route {path}  {}: forward {:.6}  backward {:.6}  best {:.6}  first-stage {:.6}",
            args.policy.name(),
            value.forward,
            value.backward,
            value.best,
            first_stage
        )
    })?;
    Ok(EXIT_OK)
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<u8> {
    let start = Instant::now();
    let inst = load(&args.instance)?;
    let (holds, result) = match args.property {
        Property::Superadditivity => {
            let r = check_superadditivity(&inst, args.policy, args.max_len.unwrap_or(inst.n().min(7)))?;
            (r.holds, serde_json::to_value(r)?)
        }
        Property::Monotonicity => {
            let r = check_monotonicity(&inst, args.max_len.unwrap_or(inst.n().min(5)))?;
            (r.holds, serde_json::to_value(r)?)
        }
        Property::Subsequence => {
            let r = check_subsequence_monotonicity(&inst, args.policy, args.max_len.unwrap_or(inst.n().min(6)))?;
            (r.holds, serde_json::to_value(r)?)
        }
    };
    let report = RunReport {
        command: "check",
        instance: inst.name().to_string(),
        options: json!({ "property": args.property, "policy": args.policy, "max_len": args.max_len }),
        result,
        seed: 0,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let detail = report.result.clone();
    emit(&args.out, &report, || {
        let witness = detail.get("violation").filter(|v| !v.is_null()).map(|v| v.to_string()).unwrap_or_default();
        format!("{}: {}  {}", inst.name(), if holds { "holds" } else { "VIOLATED" }, witness)
    })?;
    Ok(if holds { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_reproduce(name: &str, out: OutputArgs) -> anyhow::Result<u8> {
    let start = Instant::now();
    let r = reproduce::run(name)?;
    let passed = r.passed;
    let table_rows = r.assertions.clone();
    let report = RunReport {
        command: "reproduce",
        instance: name.to_string(),
        options: json!({}),
        result: serde_json::to_value(&r)?,
        seed: 0,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    emit(&out, &report, || {
        table_rows
            .iter()
            .map(|a| format!("[{}] {}  {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail))
            .collect::<Vec<_>>()
            .join("\n")
    })?;
    Ok(if passed { EXIT_OK } else { EXIT_ERROR })
}

fn cmd_export(name: &str, out: Option<PathBuf>) -> anyhow::Result<u8> {
    let inst = builtin::by_name(name).ok_or_else(|| anyhow!("unknown instance {name}"))?;
    let text = to_json(&inst);
    match out {
        Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => print_stdout(&text)?,
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Check(a) => cmd_check(a),
        Command::Reproduce { name, out } => cmd_reproduce(&name, out),
        Command::Export { name, out } => cmd_export(&name, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
