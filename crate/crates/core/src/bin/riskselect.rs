use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use riskselect::classifiers::{ClassifierConfig, ClassifierKind};
use riskselect::cost_model::LevelMapping;
use riskselect::data_model::stratified_split;
use riskselect::experiment::{
    ce_vga_surface, load_problem, open_input, ranking, run_single_on, run_sweep_on, write_results, write_surface,
    DataSource, ExperimentPlan,
};
use riskselect::loss_model::write_loss;
use riskselect::selectors::{read_ordering, CeConfig, RankScheme, SelectorKind};
use riskselect::synthgen::{generate, SynthSpec};

#[derive(Parser)]
#[command(name = "riskselect", version, about = "Budget-constrained feature selection minimizing misclassification risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selector at one budget and seed.
    Run(PlanArgs),
    /// Run the grid of prefix lengths x budgets x selectors x seeds.
    Sweep(PlanArgs),
    /// Write a synthetic dataset (features, devices, costs, loss) to a directory.
    Synth(SynthCmd),
    /// Print the feature ranking used by prefix sweeps, one name per line.
    Rank(PlanArgs),
}

#[derive(Args, Default, Clone)]
struct SynthFlags {
    /// Use a generated dataset instead of --features/--devices/--costs.
    #[arg(long)]
    synth: bool,
    #[arg(long)]
    synth_devices: Option<usize>,
    #[arg(long)]
    synth_m: Option<usize>,
    #[arg(long)]
    synth_informative: Option<usize>,
    #[arg(long)]
    synth_rows: Option<usize>,
    #[arg(long)]
    synth_separation: Option<f64>,
    #[arg(long)]
    synth_noise: Option<f64>,
    #[arg(long)]
    synth_seed: Option<u64>,
}

impl SynthFlags {
    fn any(&self) -> bool {
        self.synth
            || self.synth_devices.is_some()
            || self.synth_m.is_some()
            || self.synth_informative.is_some()
            || self.synth_rows.is_some()
            || self.synth_separation.is_some()
            || self.synth_noise.is_some()
            || self.synth_seed.is_some()
    }

    fn apply(&self, mut spec: SynthSpec) -> SynthSpec {
        spec.n_devices = self.synth_devices.unwrap_or(spec.n_devices);
        spec.m_features = self.synth_m.unwrap_or(spec.m_features);
        spec.n_informative = self.synth_informative.unwrap_or(spec.n_informative);
        spec.rows_per_device = self.synth_rows.unwrap_or(spec.rows_per_device);
        spec.class_separation = self.synth_separation.unwrap_or(spec.class_separation);
        spec.noise_std = self.synth_noise.unwrap_or(spec.noise_std);
        spec.seed = self.synth_seed.unwrap_or(spec.seed);
        spec
    }
}

#[derive(Args)]
struct SynthCmd {
    #[command(flatten)]
    synth: SynthFlags,
    /// TOML file with a [synth] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// TOML file whose keys are flag names; flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    devices: Option<PathBuf>,
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Loss table; defaults to 2 for a type mismatch plus 1 for a brand mismatch.
    #[arg(long)]
    loss: Option<PathBuf>,
    /// Numeric values of low,medium,high cost levels.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    cost_levels: Vec<f64>,
    #[command(flatten)]
    synth: SynthFlags,
    /// Budgets, comma separated; `inf` means unconstrained.
    #[arg(long, value_delimiter = ',')]
    budget: Vec<f64>,
    /// ce, brute, cga, rga, vga; comma separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    selector: Vec<String>,
    /// tree or gnb.
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_split: Option<usize>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// CE convergence tolerance on the inclusion probabilities.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    train_frac: Option<f64>,
    /// Feature prefix lengths for sweeps, comma separated.
    #[arg(long, value_delimiter = ',')]
    prefix: Vec<usize>,
    /// `single-risk` or `file:<path>` (one feature name per line).
    #[arg(long)]
    rank_scheme: Option<String>,
    /// Largest feature count handed to brute force.
    #[arg(long)]
    m_limit: Option<usize>,
    /// Results CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CE per-iteration trace as JSON lines (run only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// CE minus VGA risk surface CSV (sweep only).
    #[arg(long)]
    surface_out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum OneOrMany<T> {
    #[default]
    None,
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::None => Vec::new(),
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    features: Option<PathBuf>,
    devices: Option<PathBuf>,
    costs: Option<PathBuf>,
    loss: Option<PathBuf>,
    cost_levels: Option<Vec<f64>>,
    synth: Option<SynthSpec>,
    #[serde(default)]
    budget: OneOrMany<f64>,
    #[serde(default)]
    selector: OneOrMany<String>,
    classifier: Option<String>,
    max_depth: Option<usize>,
    min_split: Option<usize>,
    eta: Option<usize>,
    tmax: Option<usize>,
    rho: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    epsilon: Option<f64>,
    #[serde(default)]
    seed: OneOrMany<u64>,
    train_frac: Option<f64>,
    #[serde(default)]
    prefix: OneOrMany<usize>,
    rank_scheme: Option<String>,
    m_limit: Option<usize>,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    surface_out: Option<PathBuf>,
    workers: Option<usize>,
}

fn read_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))
}

fn pick_vec<T>(cli: Vec<T>, file: OneOrMany<T>) -> Vec<T> {
    if cli.is_empty() {
        file.into_vec()
    } else {
        cli
    }
}

/// Command-line arguments merged over the config file.
struct Resolved {
    plan: ExperimentPlan,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    surface_out: Option<PathBuf>,
}

fn resolve(args: PlanArgs) -> Result<Resolved> {
    let cfg = read_config(args.config.as_deref())?;

    let features = args.features.or(cfg.features);
    let source = if let Some(features) = features {
        let devices = args.devices.or(cfg.devices).context("--devices is required with --features")?;
        let costs = args.costs.or(cfg.costs).context("--costs is required with --features")?;
        let levels = match pick_vec(args.cost_levels, OneOrMany::Many(cfg.cost_levels.unwrap_or_default())).as_slice() {
            [] => LevelMapping::default(),
            &[low, medium, high] => LevelMapping::new(low, medium, high)?,
            other => bail!("--cost-levels needs three values, got {}", other.len()),
        };
        DataSource::Files { features, devices, costs, loss: args.loss.or(cfg.loss), levels }
    } else if args.synth.any() || cfg.synth.is_some() {
        DataSource::Synth(args.synth.apply(cfg.synth.unwrap_or_default()))
    } else {
        bail!("no data: pass --features/--devices/--costs or --synth");
    };

    let mut plan = ExperimentPlan::new(source);
    let kind = match args.classifier.or(cfg.classifier) {
        Some(name) => name.parse::<ClassifierKind>()?,
        None => ClassifierKind::DecisionTree,
    };
    let defaults = ClassifierConfig::default();
    plan.classifier = ClassifierConfig {
        kind,
        max_depth: args.max_depth.or(cfg.max_depth).unwrap_or(defaults.max_depth),
        min_split: args.min_split.or(cfg.min_split).unwrap_or(defaults.min_split),
    };
    let selectors = pick_vec(args.selector, cfg.selector);
    if !selectors.is_empty() {
        plan.selectors = selectors.iter().map(|s| s.parse::<SelectorKind>()).collect::<Result<_, _>>()?;
    }
    let budgets = pick_vec(args.budget, cfg.budget);
    if !budgets.is_empty() {
        plan.budgets = budgets;
    }
    let seeds = pick_vec(args.seed, cfg.seed);
    if !seeds.is_empty() {
        plan.seeds = seeds;
    }
    plan.prefix_lengths = pick_vec(args.prefix, cfg.prefix);
    let ce = CeConfig::default();
    plan.ce = CeConfig {
        eta: args.eta.or(cfg.eta).unwrap_or(ce.eta),
        t_max: args.tmax.or(cfg.tmax).unwrap_or(ce.t_max),
        rho: args.rho.or(cfg.rho).unwrap_or(ce.rho),
        alpha: args.alpha.or(cfg.alpha).unwrap_or(ce.alpha),
        beta: args.beta.or(cfg.beta).unwrap_or(ce.beta),
        epsilon_converge: args.epsilon.or(cfg.epsilon).unwrap_or(ce.epsilon_converge),
        seed: 0,
    };
    plan.train_fraction = args.train_frac.or(cfg.train_frac).unwrap_or(plan.train_fraction);
    plan.rank_scheme = match args.rank_scheme.or(cfg.rank_scheme).as_deref() {
        None | Some("single-risk") => RankScheme::SingleRisk,
        Some(s) if s.starts_with("file:") => {
            let path = Path::new(&s["file:".len()..]);
            let names = read_ordering(io::BufReader::new(open_input(path)?))
                .with_context(|| format!("{}", path.display()))?;
            RankScheme::File(names)
        }
        Some(other) => bail!("unknown rank scheme `{other}` (expected single-risk or file:<path>)"),
    };
    plan.m_limit = args.m_limit.or(cfg.m_limit).unwrap_or(plan.m_limit);
    plan.workers = args.workers.or(cfg.workers).unwrap_or(0);
    Ok(Resolved {
        plan,
        out: args.out.or(cfg.out),
        trace: args.trace.or(cfg.trace),
        surface_out: args.surface_out.or(cfg.surface_out),
    })
}

fn create(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(io::stdout().lock()),
        Some(p) if p.as_os_str() == "-" => Box::new(io::stdout().lock()),
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("{}", p.display()))?)),
    })
}

fn cmd_run(args: PlanArgs) -> Result<()> {
    let r = resolve(args)?;
    let plan = &r.plan;
    if plan.selectors.len() != 1 || plan.budgets.len() != 1 || plan.seeds.len() != 1 {
        bail!("run takes exactly one selector, budget and seed; use sweep for grids");
    }
    let problem = load_problem(&plan.source)?;
    let (result, row) = run_single_on(&problem, plan)?;
    write_results(&[row], create(r.out.as_deref())?)?;
    if let Some(path) = &r.trace {
        let trace = result.trace.as_ref().context("--trace is only available for the ce selector")?;
        trace.write_json_lines(create(Some(path))?).with_context(|| format!("{}", path.display()))?;
    }
    let names: Vec<&str> =
        result.selection.selected_indices().iter().map(|&k| problem.dataset.feature_names()[k].as_str()).collect();
    eprintln!(
        "{}: risk {:.6}, cost {} of {}, {} features [{}]",
        result.selector_name,
        result.report.risk,
        result.report.total_cost,
        plan.budgets[0],
        names.len(),
        names.join(", ")
    );
    Ok(())
}

fn cmd_sweep(args: PlanArgs) -> Result<()> {
    let r = resolve(args)?;
    let problem = load_problem(&r.plan.source)?;
    let rows = run_sweep_on(&problem, &r.plan)?;
    write_results(&rows, create(r.out.as_deref())?)?;
    if let Some(path) = &r.surface_out {
        write_surface(&ce_vga_surface(&rows), create(Some(path))?)?;
    }
    Ok(())
}

fn cmd_rank(args: PlanArgs) -> Result<()> {
    let r = resolve(args)?;
    let problem = load_problem(&r.plan.source)?;
    let split = stratified_split(&problem.dataset, r.plan.train_fraction, r.plan.seeds[0])?;
    let order = ranking(&problem, &r.plan, &split)?;
    let mut out = create(r.out.as_deref())?;
    for k in order {
        writeln!(out, "{}", problem.dataset.feature_names()[k])?;
    }
    Ok(())
}

fn cmd_synth(cmd: SynthCmd) -> Result<()> {
    let cfg = read_config(cmd.config.as_deref())?;
    let spec = cmd.synth.apply(cfg.synth.unwrap_or_default());
    let (dataset, costs) = generate(&spec)?;
    let dir = &cmd.out;
    fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    let file = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("{}", path.display()))?))
    };
    dataset.write_features(file("features.csv")?)?;
    dataset.write_devices(file("devices.csv")?)?;
    costs.write_csv(dataset.feature_names(), file("costs.csv")?)?;
    write_loss(&riskselect::loss_model::build_default_loss(dataset.devices()), dataset.devices(), file("loss.csv")?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(cmd) => cmd_synth(cmd),
        Command::Rank(args) => cmd_rank(args),
    }
}
