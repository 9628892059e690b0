use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cptlaw_core::allocator::{coefficients, isoloss_grid, optimal_allocation};
use cptlaw_core::fitter::{
    compare_laws, extract_compute_frontier, fit_cpt, fit_frontier, fit_scratch, FitConfig, FixedTerms,
    DEFAULT_BINS_PER_DECADE,
};
use cptlaw_core::laws::LawRecord;
use cptlaw_core::synth::{generate_runset, paper_replica_config, SynthConfig};
use cptlaw_core::transfer::{empirical_transfer, forgetting_curves, parametric_transfer, TransferReport, DEFAULT_LEVELS};
use cptlaw_core::{ExtendedCptParams, RunSet, ScalingLaw, Strategy, TrainingRun};

use crate::docs::{self, *};
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};
use crate::output::{write_csv, write_json, Format};
use crate::runlog::{read_runs_file, write_runs_file};
use crate::tables::{forgetting_rows, isoloss_rows, transfer_rows};

/// Fit and apply scaling laws for pre-training and continual pre-training.
#[derive(Debug, Parser)]
#[command(name = "cptlaw", version)]
struct Cli {
    /// JSON file of fit-configuration overrides.
    #[arg(long, global = true, env = "CPTLAW_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a from-scratch or CPT loss law to a run log.
    Fit(FitArgs),
    /// Extract the compute frontier of a run log and fit a power law to it.
    Frontier(FrontierArgs),
    /// Compute-optimal parameters and tokens for given FLOP budgets.
    Allocate(AllocateArgs),
    /// Loss over an (N, D) grid plus the efficient frontier, for contour plots.
    Isoloss(IsoLossArgs),
    /// Tokens and FLOPs a CPT run saves relative to training from scratch.
    Transfer(TransferArgs),
    /// Per-language compute/loss curves of replay runs.
    Replay(ReplayArgs),
    /// Generate a synthetic run log from a known law.
    Synth(SynthArgs),
    /// Fit both law families to one run log and compare their objectives.
    CompareLaws(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Scratch,
    Cpt,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Scratch => Strategy::Scratch,
            StrategyArg::Cpt => Strategy::Cpt,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, value_name = "FILE")]
    runs: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// From-scratch fit supplying E, A and alpha (required for --strategy cpt).
    #[arg(long, value_name = "FILE")]
    fixed_from: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Per-record residuals as CSV.
    #[arg(long, value_name = "FILE")]
    residuals: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FrontierArgs {
    #[arg(long, value_name = "FILE")]
    runs: PathBuf,
    /// Only use runs of this strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, default_value_t = DEFAULT_BINS_PER_DECADE)]
    bins_per_decade: usize,
    /// Fit L = A'·C^-g' instead of E' + A'·C^-g'.
    #[arg(long)]
    fix_offset_zero: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    #[arg(long, value_name = "FILE")]
    fit: PathBuf,
    /// FLOP budget; repeat or comma-separate for several.
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    compute: Vec<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IsoLossArgs {
    #[arg(long, value_name = "FILE")]
    fit: PathBuf,
    #[arg(long, value_name = "LO:HI", value_parser = parse_range, default_value = "1e7:1e11")]
    n_range: (f64, f64),
    #[arg(long, value_name = "LO:HI", value_parser = parse_range, default_value = "1e9:1e13")]
    d_range: (f64, f64),
    #[arg(long, default_value_t = 50)]
    resolution: usize,
    /// `.csv` for long-form rows, `.json` for the full grid.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TransferArgs {
    /// Run log holding the from-scratch run.
    #[arg(long, value_name = "FILE", requires = "cpt_run", conflicts_with_all = ["scratch_fit", "cpt_fit"])]
    pt_run: Option<PathBuf>,
    /// Run log holding the CPT run.
    #[arg(long, value_name = "FILE", requires = "pt_run")]
    cpt_run: Option<PathBuf>,
    /// Run id within --pt-run (needed when the file holds several runs).
    #[arg(long)]
    pt_id: Option<String>,
    #[arg(long)]
    cpt_id: Option<String>,
    #[arg(long, value_name = "FILE", requires_all = ["cpt_fit", "n", "d"])]
    scratch_fit: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "scratch_fit")]
    cpt_fit: Option<PathBuf>,
    /// Model size for the parametric path.
    #[arg(long, requires = "scratch_fit")]
    n: Option<f64>,
    /// CPT token counts for the parametric path; comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., requires = "scratch_fit")]
    d: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long, value_name = "FILE")]
    runs: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    PaperScratch,
    PaperCpt,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum, required_unless_present = "law", conflicts_with = "law")]
    preset: Option<Preset>,
    /// Params document with the ground-truth law; sizes default to the catalog.
    #[arg(long, value_name = "FILE")]
    law: Option<PathBuf>,
    /// Standard deviation of the log-normal loss noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parameter counts; comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sizes: Vec<u64>,
    #[arg(long)]
    records_per_run: Option<usize>,
    #[arg(long)]
    token_multiple: Option<f64>,
    #[arg(long)]
    language: Option<String>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, value_name = "FILE")]
    runs: PathBuf,
    /// From-scratch fit supplying E, A and alpha for the extended law.
    #[arg(long, value_name = "FILE")]
    fixed_from: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound {lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound {hi:?}: {e}"))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("range must satisfy 0 < LO < HI, got {s:?}"));
    }
    Ok((lo, hi))
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => docs::read_fit_config(p)?,
        None => FitConfig::default(),
    };
    match cli.command {
        Command::Fit(a) => cmd_fit(a, base),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Allocate(a) => cmd_allocate(a),
        Command::Isoloss(a) => cmd_isoloss(a),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Synth(a) => cmd_synth(a),
        Command::CompareLaws(a) => cmd_compare(a, base),
    }
}

fn expect_format(path: &Path, allowed: &[Format]) -> Result<Format> {
    let f = Format::from_path(path)?;
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("{} has an unsupported extension for this command", path.display())))
    }
}

fn select_strategy(runs: RunSet, strategy: Strategy) -> Result<RunSet> {
    let kept: Vec<TrainingRun> = runs.into_runs().into_iter().filter(|r| r.strategy() == strategy).collect();
    if kept.is_empty() {
        return Err(cptlaw_core::Error::Validation(format!("no {strategy} runs in the run log")).into());
    }
    Ok(RunSet::new(kept)?)
}

fn cmd_fit(a: FitArgs, mut cfg: FitConfig) -> Result<()> {
    expect_format(&a.out, &[Format::Json])?;
    if let Some(r) = &a.residuals {
        expect_format(r, &[Format::Csv])?;
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(w) = a.warmup_fraction {
        cfg.warmup_fraction = w;
    }
    cfg.validate()?;
    let strategy = Strategy::from(a.strategy);
    let fixed = match (strategy, &a.fixed_from) {
        (Strategy::Scratch, Some(_)) => {
            return Err(CliError::Usage("--fixed-from only applies to --strategy cpt".into()));
        }
        (Strategy::Cpt, None) => {
            return Err(CliError::Usage("--strategy cpt requires --fixed-from <scratch fit>".into()));
        }
        (Strategy::Cpt, Some(p)) => Some(FixedTerms::from(&docs::read_chinchilla(p)?)),
        (Strategy::Scratch, None) => None,
    };
    let runs = select_strategy(read_runs_file(&a.runs)?, strategy)?;
    let (law, objective, n_points, chosen_init, residuals): (LawRecord, _, _, _, _) = match fixed {
        None => {
            let r = fit_scratch(&runs, &cfg)?;
            (r.params.into(), r.objective, r.n_points, r.chosen_init, r.residuals)
        }
        Some(fixed) => {
            let r = fit_cpt(&runs, &fixed, &cfg)?;
            (r.params.into(), r.objective, r.n_points, r.chosen_init, r.residuals)
        }
    };
    let doc = FitDoc { schema_version: SCHEMA_VERSION, law, objective, n_points, chosen_init, config: cfg };
    write_json(&a.out, &doc)?;
    if let Some(path) = &a.residuals {
        write_csv(path, &residuals)?;
    }
    println!("{strategy} fit on {} runs, {n_points} records: objective {objective:.6e}", runs.len());
    print_law(&law);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn print_law(law: &LawRecord) {
    match law {
        LawRecord::Chinchilla(p) => println!(
            "  E = {:.6}  A = {:.6}  B = {:.6}  alpha = {:.6}  beta = {:.6}",
            p.e, p.a, p.b, p.alpha, p.beta
        ),
        LawRecord::ExtendedCpt(p) => println!(
            "  E = {:.6}  A = {:.6}  alpha = {:.6}  B' = {:.6}  beta' = {:.6}  gamma = {:.6}",
            p.e, p.a, p.alpha, p.b_prime, p.beta_prime, p.gamma
        ),
        LawRecord::Frontier(p) => {
            println!("  L = {:.6} + {:.6} * C^-{:.6}", p.offset, p.coefficient, p.exponent)
        }
    }
}

fn cmd_frontier(a: FrontierArgs) -> Result<()> {
    expect_format(&a.out, &[Format::Json])?;
    let mut runs = read_runs_file(&a.runs)?;
    if let Some(s) = a.strategy {
        runs = select_strategy(runs, s.into())?;
    }
    let points = extract_compute_frontier(&runs, a.bins_per_decade)?;
    let law = LawRecord::Frontier(fit_frontier(&points, a.fix_offset_zero)?);
    println!("{} frontier points from {} runs", points.len(), runs.len());
    print_law(&law);
    write_json(
        &a.out,
        &FrontierDoc { schema_version: SCHEMA_VERSION, law, bins_per_decade: a.bins_per_decade, points },
    )?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_allocate(a: AllocateArgs) -> Result<()> {
    if let Some(out) = &a.out {
        expect_format(out, &[Format::Json])?;
    }
    let law = docs::read_scaling_law(&a.fit)?;
    let k = coefficients(&law)?;
    println!("N_opt = {:.6} * C^{:.6}   D_opt = {:.6} * C^{:.6}   (G = {:.6})", k.k_n, k.a, k.k_d, k.b, k.g);
    let plans = a.compute.iter().map(|&c| optimal_allocation(&k, c, &law)).collect::<cptlaw_core::Result<Vec<_>>>()?;
    for p in &plans {
        println!("C = {:.4e}: N_opt = {:.4e}, D_opt = {:.4e}, loss = {:.6}", p.compute, p.n_opt, p.d_opt, p.predicted_loss);
    }
    if let Some(out) = &a.out {
        write_json(out, &AllocationDoc { schema_version: SCHEMA_VERSION, law: law.into(), coefficients: k, plans })?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_isoloss(a: IsoLossArgs) -> Result<()> {
    let format = expect_format(&a.out, &[Format::Json, Format::Csv])?;
    let law = docs::read_scaling_law(&a.fit)?;
    let grid = isoloss_grid(&law, a.n_range, a.d_range, a.resolution)?;
    match format {
        Format::Csv => write_csv(&a.out, isoloss_rows(&grid))?,
        _ => write_json(&a.out, &IsoLossDoc { schema_version: SCHEMA_VERSION, law: law.into(), grid })?,
    }
    println!("{0}x{0} grid with {0} frontier points; wrote {1}", a.resolution, a.out.display());
    Ok(())
}

fn pick_run(path: &Path, id: Option<&str>) -> Result<TrainingRun> {
    let set = read_runs_file(path)?;
    match id {
        Some(id) => set
            .get(id)
            .cloned()
            .ok_or_else(|| cptlaw_core::Error::Validation(format!("no run {id} in {}", path.display())).into()),
        None if set.len() == 1 => Ok(set.into_runs().remove(0)),
        None => Err(CliError::Usage(format!(
            "{} holds {} runs; choose one with --pt-id/--cpt-id",
            path.display(),
            set.len()
        ))),
    }
}

fn parametric_report(scratch: &cptlaw_core::ChinchillaParams, cpt: &ExtendedCptParams, n: f64, ds: &[f64]) -> Result<TransferReport> {
    let mut r = TransferReport {
        loss_levels: Vec::new(),
        d_pt: Vec::new(),
        d_cpt: Vec::new(),
        transferred_tokens: Vec::new(),
        flops_saved_fraction: Vec::new(),
    };
    for &d in ds {
        let t = parametric_transfer(scratch, cpt, n, d)?;
        let d_pt = d + t;
        r.loss_levels.push(cpt.eval(n, d)?);
        r.d_pt.push(d_pt);
        r.d_cpt.push(d);
        r.transferred_tokens.push(t);
        r.flops_saved_fraction.push(t / d_pt);
    }
    Ok(r)
}

fn cmd_transfer(a: TransferArgs) -> Result<()> {
    if let Some(out) = &a.out {
        expect_format(out, &[Format::Json, Format::Csv])?;
    }
    let (mode, report) = match (&a.pt_run, &a.cpt_run, &a.scratch_fit, &a.cpt_fit) {
        (Some(pt), Some(cpt), None, None) => {
            let pt = pick_run(pt, a.pt_id.as_deref())?;
            let cpt = pick_run(cpt, a.cpt_id.as_deref())?;
            (TransferMode::Empirical, empirical_transfer(&pt, &cpt, a.levels)?)
        }
        (None, None, Some(sf), Some(cf)) => {
            let scratch = docs::read_chinchilla(sf)?;
            let cpt = match docs::read_law(cf)? {
                LawRecord::ExtendedCpt(p) => p,
                _ => return Err(CliError::format(cf, "expected an extended_cpt law")),
            };
            let n = a.n.ok_or_else(|| CliError::Usage("--n is required with --scratch-fit".into()))?;
            if a.d.is_empty() {
                return Err(CliError::Usage("--d is required with --scratch-fit".into()));
            }
            (TransferMode::Parametric, parametric_report(&scratch, &cpt, n, &a.d)?)
        }
        _ => {
            return Err(CliError::Usage(
                "give either --pt-run and --cpt-run, or --scratch-fit, --cpt-fit, --n and --d".into(),
            ))
        }
    };
    for row in transfer_rows(&report) {
        println!(
            "loss {:.5}: D_PT = {:.4e}, D_CPT = {:.4e}, transferred = {:.4e}, FLOPs saved = {:.2}%",
            row.loss_level,
            row.d_pt,
            row.d_cpt,
            row.transferred_tokens,
            100.0 * row.flops_saved_fraction
        );
    }
    if let Some(out) = &a.out {
        match Format::from_path(out)? {
            Format::Csv => write_csv(out, transfer_rows(&report))?,
            _ => write_json(out, &TransferDoc { schema_version: SCHEMA_VERSION, mode, report })?,
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let format = expect_format(&a.out, &[Format::Json, Format::Csv])?;
    let curves = forgetting_curves(&read_runs_file(&a.runs)?)?;
    match format {
        Format::Csv => write_csv(&a.out, forgetting_rows(&curves))?,
        _ => write_json(&a.out, &ReplayDoc { schema_version: SCHEMA_VERSION, curves: curves.clone() })?,
    }
    println!("{} replay curves; wrote {}", curves.len(), a.out.display());
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    expect_format(&a.out, &[Format::Jsonl])?;
    let mut cfg = match (a.preset, &a.law) {
        (Some(Preset::PaperScratch), None) => paper_replica_config(Strategy::Scratch)?,
        (Some(Preset::PaperCpt), None) => paper_replica_config(Strategy::Cpt)?,
        (None, Some(path)) => {
            let law: ScalingLaw = docs::read_scaling_law(path)?;
            let base = paper_replica_config(Strategy::Scratch)?;
            SynthConfig { law, ..base }
        }
        _ => return Err(CliError::Usage("give exactly one of --preset and --law".into())),
    };
    cfg.noise_sigma = a.noise;
    cfg.seed = a.seed;
    if !a.sizes.is_empty() {
        cfg.param_sizes = a.sizes;
    }
    if let Some(r) = a.records_per_run {
        cfg.records_per_run = r;
    }
    if let Some(m) = a.token_multiple {
        cfg.token_multiple = m;
    }
    if let Some(l) = a.language {
        cfg.language = l;
    }
    let runs = generate_runset(&cfg)?;
    write_runs_file(&a.out, &runs)?;
    println!("{} runs, {} records; wrote {}", runs.len(), runs.n_records(), a.out.display());
    Ok(())
}

fn cmd_compare(a: CompareArgs, cfg: FitConfig) -> Result<()> {
    if let Some(out) = &a.out {
        expect_format(out, &[Format::Json])?;
    }
    let reference = a.fixed_from.as_deref().map(docs::read_chinchilla).transpose()?;
    let runs = read_runs_file(&a.runs)?;
    let c = compare_laws(&runs, &cfg, reference.as_ref())?;
    println!("chinchilla error {:.6e}", c.chinchilla_error);
    println!("extended   error {:.6e}  (gamma = {:.6})", c.extended_error, c.gamma_fitted);
    if let Some(out) = &a.out {
        write_json(out, &ComparisonDoc { schema_version: SCHEMA_VERSION, comparison: c })?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
