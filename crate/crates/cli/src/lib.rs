//! Command-line front end for the screenline toolkit.
//!
//! Every command reads an instance file (except `gen`), dispatches to one
//! library operation and writes canonical JSON (sorted keys, fixed float
//! formatting) to `--out` or standard output. Timing goes to standard error
//! only, so artifacts are byte-identical across runs and thread counts.
//!
//! Exit codes: 0 success, 1 validation or usage error (and an infeasible
//! contract under `check`), 2 violated model assumption, 3 size cap hit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use screenline::diagnostics::{extract_limit, hausdorff, penalized_indirect_utility, penalty_threshold, singular_set, MenuSequence, MenuSequenceDoc};
use screenline::families::{self, build_family, FamilyParams, GridSpec, RandomFamilyKind, RandomShape};
use screenline::json::to_canonical_string;
use screenline::solvers::{solve_local_search_traced, uptake};
use screenline::{
    admissible_set, bound_certificate, budget_indirect_utility, check_feasible, contract_cost, improve, solve_bruteforce,
    solve_local_search, solve_menu_enum, Contract, ContractDoc, Error, Instance, Menu, Payload, SearchParams, VariantKind,
};

#[derive(Debug, Parser)]
#[command(name = "screenline", version, about = "Screening problems on finite grids")]
pub struct Cli {
    /// Instance JSON file.
    #[arg(long, global = true)]
    instance: Option<PathBuf>,
    /// Output file; standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the instance tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SCREENLINE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write an instance file.
    Gen {
        #[command(subcommand)]
        source: GenSource,
    },
    /// Check a contract for feasibility; exits 1 if it is infeasible.
    Check {
        /// Contract JSON (`{"assignment": {...}}`) or a solve report.
        #[arg(long)]
        contract: PathBuf,
    },
    /// Solve the instance.
    Solve {
        #[arg(long, value_enum, default_value_t = SolverName::Menu)]
        solver: SolverName,
        #[command(flatten)]
        search: SearchArgs,
        /// Write a CSV of (item, price, attributes, uptake); defaults to the
        /// `--out` path with a `.csv` extension.
        #[arg(long, num_args = 0..=1)]
        emit_plot: Option<Option<PathBuf>>,
    },
    /// Apply the variant's improvement operator to a feasible contract.
    Improve {
        /// Contract JSON (`{"assignment": {...}}`) or a solve report.
        #[arg(long)]
        contract: PathBuf,
    },
    /// Admissible set and, for family instances, the bound certificate.
    Coercivity,
    /// Diagnostics.
    Diag {
        #[command(subcommand)]
        which: Diag,
    },
}

#[derive(Debug, Subcommand)]
enum GenSource {
    /// A built-in fixture: toy-a, toy-b or toy-c.
    Fixture { name: String },
    /// A seeded random instance.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Types (budget points in the budget variant).
        #[arg(long, default_value_t = 3)]
        types: usize,
        #[arg(long, default_value_t = 8)]
        allocs: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Full)]
        variant: VariantArg,
    },
    /// A family instance from `{"params": ..., "grid": ...}`.
    Family {
        #[arg(long)]
        spec: PathBuf,
    },
    /// A seeded random family instance.
    RandomFamily {
        #[arg(long, value_enum)]
        kind: FamilyKindArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
enum Diag {
    /// Hausdorff distance between two menus.
    Hausdorff {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<usize>,
    },
    /// Limit of a menu sequence; without `--sequence`, of local search's
    /// best-so-far menus.
    Limit {
        #[arg(long)]
        sequence: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Budget points where the menu's indirect utility jumps.
    Singular {
        #[arg(long, value_delimiter = ',', required = true)]
        menu: Vec<usize>,
        /// CSV of (type, budget, v*, v*_-); defaults to the `--out` path
        /// with a `.csv` extension, and is skipped without either.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Penalized indirect utility over a list of penalty weights.
    Penalized {
        #[arg(long, value_delimiter = ',', required = true)]
        menu: Vec<usize>,
        /// Type id.
        #[arg(long = "type")]
        type_id: String,
        #[arg(long)]
        budget: f64,
        #[arg(long, value_delimiter = ',', default_value = "0,1,10,100")]
        lambda: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Largest menu considered (default: number of points).
    #[arg(long)]
    max_menu: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
}

impl SearchArgs {
    fn params(&self) -> SearchParams {
        SearchParams {
            max_menu_size: self.max_menu,
            restarts: self.restarts,
            seed: self.seed,
            ..SearchParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverName {
    Brute,
    Menu,
    Local,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Full,
    Partial,
    Budget,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyKindArg {
    Quasilinear,
    NonlinearG,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Success,
    /// Artifacts were written but the result is negative (infeasible contract).
    Rejected(String),
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let started = Instant::now();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(anyhow::Error::from)
        .and_then(|pool| pool.install(|| dispatch(&cli)));
    let elapsed = started.elapsed();
    match result {
        Ok(Outcome::Success) => {
            eprintln!("screenline: done in {:.3} s", elapsed.as_secs_f64());
            0
        }
        Ok(Outcome::Rejected(msg)) => {
            eprintln!("screenline: {msg}");
            1
        }
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(core) => {
            eprintln!("error: {}: {e:#}", core.kind());
            core.exit_code()
        }
        None => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    if let Command::Gen { source } = &cli.command {
        let instance = generate(source)?;
        let instance = match cli.tol {
            Some(t) => instance.with_tol(t)?,
            None => instance,
        };
        emit(cli, &instance.to_doc())?;
        return Ok(Outcome::Success);
    }
    let instance = load(cli)?;
    match &cli.command {
        Command::Gen { .. } => unreachable!("handled above"),
        Command::Check { contract } => {
            let contract = read_contract(&instance, contract)?;
            let report = check_feasible(&instance, &contract)?;
            emit(cli, &report)?;
            if report.feasible {
                Ok(Outcome::Success)
            } else {
                Ok(Outcome::Rejected("contract is infeasible".into()))
            }
        }
        Command::Solve { solver, search, emit_plot } => {
            let params = search.params();
            let report = match solver {
                SolverName::Brute => solve_bruteforce(&instance, &params)?,
                SolverName::Menu => solve_menu_enum(&instance, &params)?,
                SolverName::Local => solve_local_search(&instance, &params)?,
            };
            eprintln!(
                "screenline: {} solver finished in {:.3} s",
                report.solver,
                report.stats.wall_time.as_secs_f64()
            );
            emit(cli, &report.to_doc(&instance))?;
            if let Some(path) = emit_plot {
                let path = csv_path(cli, path.as_deref(), "--emit-plot")?;
                write_file(&path, &plot_csv(&instance, &report.menu, &report.contract))?;
            }
            Ok(Outcome::Success)
        }
        Command::Improve { contract } => {
            let input = read_contract(&instance, contract)?;
            let before = contract_cost(&instance, &input)?;
            let (output, trace) = improve(&instance, &input)?;
            let after = contract_cost(&instance, &output)?;
            emit(
                cli,
                &json!({
                    "contract": output.to_doc(&instance),
                    "trace": trace,
                    "value_before": before,
                    "value_after": after,
                }),
            )?;
            Ok(Outcome::Success)
        }
        Command::Coercivity => {
            let mask = admissible_set(&instance)?;
            let certificate = instance.family().map(|f| bound_certificate(&instance, f)).transpose()?;
            emit(cli, &json!({ "mask": mask, "certificate": certificate }))?;
            Ok(Outcome::Success)
        }
        Command::Diag { which } => diag(cli, &instance, which),
    }
}

fn diag(cli: &Cli, instance: &Instance, which: &Diag) -> anyhow::Result<Outcome> {
    match which {
        Diag::Hausdorff { a, b } => {
            let (a, b) = (Menu::new(a.iter().copied())?, Menu::new(b.iter().copied())?);
            let distance = hausdorff(instance, &a, &b)?;
            emit(cli, &json!({ "a": a, "b": b, "distance": distance }))?;
        }
        Diag::Limit { sequence, tail, search } => {
            let seq = match sequence {
                Some(path) => {
                    let doc: MenuSequenceDoc =
                        serde_json::from_str(&read_file(path)?).map_err(|e| Error::Schema(e.to_string()))?;
                    MenuSequence::from_doc(instance, &doc)?
                }
                None => solve_local_search_traced(instance, &search.params())?.1,
            };
            let limit = extract_limit(instance, &seq, *tail)?;
            let last = seq.contracts.as_ref().and_then(|c| c.last()).expect("extract_limit checked contracts");
            emit(
                cli,
                &json!({
                    "sequence": seq.to_doc(instance),
                    "limit": {
                        "menu": limit.menu,
                        "contract": limit.contract.to_doc(instance),
                        "value": limit.value,
                    },
                    "final_value": contract_cost(instance, last)?,
                }),
            )?;
        }
        Diag::Singular { menu, csv } => {
            let menu = Menu::new(menu.iter().copied())?;
            let report = singular_set(instance, &menu)?;
            emit(cli, &report)?;
            if let Ok(path) = csv_path(cli, csv.as_deref(), "--csv") {
                let mut out = String::from("type,budget,v_star,v_star_minus,singular\n");
                for j in &report.jumps {
                    writeln!(out, "{},{},{},{},{}", j.type_id, j.budget, j.v_star, j.v_star_minus, j.singular)?;
                }
                write_file(&path, &out)?;
            }
        }
        Diag::Penalized { menu, type_id, budget, lambda } => {
            let menu = Menu::new(menu.iter().copied())?;
            let x = instance
                .type_index(type_id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown type `{type_id}`")))?;
            let values = lambda
                .iter()
                .map(|&l| Ok(json!({ "lambda": l, "value": penalized_indirect_utility(instance, &menu, x, *budget, l)? })))
                .collect::<anyhow::Result<Vec<Value>>>()?;
            emit(
                cli,
                &json!({
                    "menu": menu,
                    "type": type_id,
                    "budget": budget,
                    "budget_indirect_utility": budget_indirect_utility(instance, &menu, x, *budget)?,
                    "threshold": penalty_threshold(instance, &menu, x, *budget)?,
                    "values": values,
                }),
            )?;
        }
    }
    Ok(Outcome::Success)
}

fn generate(source: &GenSource) -> anyhow::Result<Instance> {
    Ok(match source {
        GenSource::Fixture { name } => families::fixture(name).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown fixture `{name}` (expected toy-a, toy-b or toy-c)"))
        })?,
        GenSource::Random { seed, types, allocs, variant } => {
            let variant = match variant {
                VariantArg::Full => VariantKind::Full,
                VariantArg::Partial => VariantKind::Partial,
                VariantArg::Budget => VariantKind::Budget,
            };
            families::random_instance(*seed, RandomShape::new(*types, *allocs, variant))?
        }
        GenSource::Family { spec } => {
            #[derive(serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Spec {
                params: FamilyParams,
                grid: GridSpec,
            }
            let spec: Spec = serde_json::from_str(&read_file(spec)?).map_err(|e| Error::Schema(e.to_string()))?;
            build_family(&spec.params, &spec.grid)?
        }
        GenSource::RandomFamily { kind, seed } => {
            let kind = match kind {
                FamilyKindArg::Quasilinear => RandomFamilyKind::Quasilinear,
                FamilyKindArg::NonlinearG => RandomFamilyKind::NonlinearG,
            };
            families::random_family(*seed, kind)?
        }
    })
}

fn load(cli: &Cli) -> anyhow::Result<Instance> {
    let path = cli.instance.as_ref().ok_or_else(|| anyhow!("--instance is required"))?;
    let instance = Instance::from_json(&read_file(path)?)?;
    Ok(match cli.tol {
        Some(t) => instance.with_tol(t)?,
        None => instance,
    })
}

/// Reads a contract document, or the `contract` field of a solve report.
fn read_contract(instance: &Instance, path: &Path) -> anyhow::Result<Contract> {
    let mut value: Value = serde_json::from_str(&read_file(path)?).map_err(|e| Error::Schema(e.to_string()))?;
    if value.get("assignment").is_none() {
        if let Some(inner) = value.get_mut("contract") {
            value = inner.take();
        }
    }
    let doc: ContractDoc = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(Contract::from_doc(instance, &doc)?)
}

fn plot_csv(instance: &Instance, menu: &Menu, contract: &Contract) -> String {
    let uptake = uptake(instance, contract);
    let dim = menu
        .items()
        .iter()
        .filter_map(|&z| instance.payload(z).attrs().map(<[f64]>::len))
        .max()
        .unwrap_or(0);
    let mut out = String::from("item,price");
    for i in 1..=dim {
        let _ = write!(out, ",q{i}");
    }
    out.push_str(",uptake\n");
    for &z in menu.items() {
        let _ = write!(out, "{z},");
        if let Payload::Priced { price, attrs } = instance.payload(z) {
            let _ = write!(out, "{price}");
            for i in 0..dim {
                out.push(',');
                if let Some(q) = attrs.get(i) {
                    let _ = write!(out, "{q}");
                }
            }
        } else {
            out.push_str(&",".repeat(dim));
        }
        let _ = writeln!(out, ",{}", uptake.get(&z).copied().unwrap_or(0.0));
    }
    out
}

fn csv_path(cli: &Cli, explicit: Option<&Path>, flag: &str) -> anyhow::Result<PathBuf> {
    match (explicit, &cli.out) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(out)) => Ok(out.with_extension("csv")),
        (None, None) => bail!("{flag} needs a path when --out is not given"),
    }
}

fn emit<T: Serialize + ?Sized>(cli: &Cli, value: &T) -> anyhow::Result<()> {
    let text = to_canonical_string(value);
    match &cli.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
