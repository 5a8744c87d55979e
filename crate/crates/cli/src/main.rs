use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use monogp::amd::{self, AmdConfig, HyperMode, MCount, Placement};
use monogp::data::{self, SyntheticFamily, SyntheticSpec, TargetColumn};
use monogp::experiments::{self, LppdSettings};
use monogp::KernelFamily;

#[derive(Parser)]
#[command(name = "monogp", version, about = "Monotonicity detection with Gaussian processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect monotonic input dimensions of a data set.
    Detect(Opts),
    /// Write a synthetic data set as CSV.
    Synth(Opts),
    /// Distribution of the p1 acceptance limit over repeated synthetic data.
    SweepP1(Opts),
    /// Edge-lppd of plain, monotone and detected models on synthetic data.
    LppdCompare(Opts),
    /// (p1, p2) detection regions per dimension.
    Robustness(Opts),
}

/// Every tunable. Unset flags fall back to the `--config` file, then to defaults.
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default, deny_unknown_fields)]
struct Opts {
    /// JSON config file; an earlier report or CSV output also works.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Validate the configuration and print the planned number of fits.
    #[arg(long)]
    #[serde(skip)]
    dry_run: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    #[serde(skip)]
    jobs: Option<usize>,
    /// Output file (JSON for reports, CSV for tables).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Secondary output: text summary for detect, quantile table for sweeps, CSV for robustness.
    #[arg(long)]
    summary: Option<PathBuf>,

    /// Input table (comma- or whitespace-delimited).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column name or zero-based index (default: last column).
    #[arg(long)]
    target: Option<String>,
    /// The input table has no header row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_header: Option<bool>,
    /// Skip normalizing inputs and targets.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_normalize: Option<bool>,

    /// Synthetic function, e.g. linear:1 or sigmoid:2 (detect/synth), comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',')]
    family: Option<Vec<String>>,
    /// Sample size(s).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Signal variance fraction(s).
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Repetitions per sweep cell.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,

    /// se, linear or se-linear.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    p1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p2: Option<f64>,
    /// Fixed number of virtual points per dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Virtual points as a fraction of N (default 1/3).
    #[arg(long)]
    m_fraction: Option<f64>,
    /// Round the fraction up instead of to nearest.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    m_ceil: Option<bool>,
    /// grid, uniform or subsample (default: grid for 1-D inputs, uniform otherwise).
    #[arg(long)]
    placement: Option<String>,
    /// Keep the plain GP hyperparameters for the monotone models.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    reuse_plain: Option<bool>,
    /// Starts for the plain GP hyperparameter search.
    #[arg(long)]
    restarts: Option<usize>,
    /// Probit steepness of the virtual observations.
    #[arg(long)]
    steepness: Option<f64>,
    #[arg(long)]
    ep_damping: Option<f64>,
    #[arg(long)]
    ep_tolerance: Option<f64>,
    #[arg(long)]
    ep_max_sweeps: Option<usize>,

    /// Fresh test points per repetition (lppd-compare).
    #[arg(long)]
    test_points: Option<usize>,
    /// Outermost fraction of test points scored (lppd-compare).
    #[arg(long)]
    edge_fraction: Option<f64>,
    /// Use only the acceptance half of the detection rule (lppd-compare).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    one_sided: Option<bool>,
    /// Direction assumed by the always-monotone model (lppd-compare).
    #[arg(long, allow_negative_numbers = true)]
    assumed_sign: Option<f64>,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

fn lib<T>(r: monogp::Result<T>) -> anyhow::Result<T> {
    r.map_err(anyhow::Error::from)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<monogp::Error>() {
            return if e.is_numerical() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    let (name, opts) = match command {
        Command::Detect(o) => ("detect", o),
        Command::Synth(o) => ("synth", o),
        Command::SweepP1(o) => ("sweep-p1", o),
        Command::LppdCompare(o) => ("lppd-compare", o),
        Command::Robustness(o) => ("robustness", o),
    };
    if let Some(j) = opts.jobs {
        if j == 0 {
            return usage("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("starting worker pool")?;
    }
    let cfg = resolve(&opts)?;
    match name {
        "detect" => cmd_detect(&cfg, opts.dry_run, false),
        "robustness" => cmd_detect(&cfg, opts.dry_run, true),
        "synth" => cmd_synth(&cfg, opts.dry_run),
        "sweep-p1" => cmd_sweep_p1(&cfg, opts.dry_run),
        _ => cmd_lppd_compare(&cfg, opts.dry_run),
    }
}

/// Fully resolved settings.
struct Resolved {
    opts: Opts,
    amd: AmdConfig,
    seed: u64,
}

fn read_config_file(path: &Path) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // CSV outputs carry their config on a leading `# ` line
    let json_text = match text.lines().next() {
        Some(first) if first.starts_with("# ") => first[2..].to_string(),
        _ => text,
    };
    let v: Value = match serde_json::from_str(&json_text) {
        Ok(v) => v,
        Err(e) => return usage(format!("{}: not a JSON config: {e}", path.display())),
    };
    // reports wrap the settings in a "config" object
    let v = match v.get("config") {
        Some(c) => c.clone(),
        None => v,
    };
    match v.get("options") {
        Some(o) => Ok(o.clone()),
        None => Ok(v),
    }
}

fn resolve(cli: &Opts) -> anyhow::Result<Resolved> {
    let mut merged = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => json!({}),
    };
    let Value::Object(over) = serde_json::to_value(cli)? else {
        unreachable!("options serialize to an object")
    };
    let Value::Object(base) = &mut merged else {
        return usage("config file must hold a JSON object");
    };
    for (k, v) in over {
        if !v.is_null() {
            base.insert(k, v);
        }
    }
    let mut opts: Opts = match serde_json::from_value(merged) {
        Ok(o) => o,
        Err(e) => return usage(format!("invalid config: {e}")),
    };
    opts.config = None;
    let seed = opts.seed.unwrap_or(0);
    opts.seed = Some(seed);

    let kernel = match opts.kernel.as_deref() {
        None => KernelFamily::SquaredExponential,
        Some(k) => KernelFamily::parse(k).map_err(|e| UsageError(e.to_string()))?,
    };
    let placement = match opts.placement.as_deref() {
        None => None,
        Some(p) => Some(Placement::parse(p).map_err(|e| UsageError(e.to_string()))?),
    };
    let m_count = match (opts.m, opts.m_fraction, opts.m_ceil.unwrap_or(false)) {
        (Some(_), Some(_), _) => return usage("give either --m or --m-fraction, not both"),
        (Some(m), None, _) => MCount::Fixed(m),
        (None, f, true) => MCount::FractionCeil(f.unwrap_or(1.0 / 3.0)),
        (None, f, false) => MCount::Fraction(f.unwrap_or(1.0 / 3.0)),
    };
    let mut amd = AmdConfig {
        p1: opts.p1.unwrap_or(0.99),
        p2: opts.p2.unwrap_or(0.5),
        kernel,
        m_count,
        placement,
        hyper_mode: if opts.reuse_plain.unwrap_or(false) {
            HyperMode::ReusePlain
        } else {
            HyperMode::Refit
        },
        ..AmdConfig::default()
    }
    .seeded(seed);
    if let Some(r) = opts.restarts {
        amd.optim.restarts = r;
    }
    if let Some(s) = opts.steepness {
        amd.steepness = s;
    }
    if let Some(d) = opts.ep_damping {
        amd.monotone.ep.damping = d;
    }
    if let Some(t) = opts.ep_tolerance {
        amd.monotone.ep.tolerance = t;
    }
    if let Some(s) = opts.ep_max_sweeps {
        amd.monotone.ep.max_sweeps = s;
    }
    if let Err(e) = amd.validate() {
        return usage(e.to_string());
    }
    let parallel_jobs = rayon::current_num_threads();
    amd.parallel = parallel_jobs > 1;
    Ok(Resolved {
        opts,
        amd,
        seed,
    })
}

fn metadata() -> Value {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({ "generated_unix": secs, "version": env!("CARGO_PKG_VERSION") })
}

/// The config as embedded in outputs: options only, since everything else is derived from them.
fn config_echo(cfg: &Resolved) -> Value {
    json!({ "options": cfg.opts, "effective": { "amd": cfg.amd, "seed": cfg.seed } })
}

fn write_output(path: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn csv_header_line(cfg: &Resolved) -> anyhow::Result<String> {
    Ok(format!("# {}\n", serde_json::to_string(&config_echo(cfg))?))
}

fn families(cfg: &Resolved) -> anyhow::Result<Vec<SyntheticFamily>> {
    let Some(list) = &cfg.opts.family else {
        return usage("--family is required");
    };
    list.iter()
        .map(|s| SyntheticFamily::parse(s).map_err(|e| UsageError(e.to_string()).into()))
        .collect()
}

struct Loaded {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
}

fn load_input(cfg: &Resolved) -> anyhow::Result<Loaded> {
    let o = &cfg.opts;
    let (x, y, names) = match (&o.data, &o.family) {
        (Some(_), Some(_)) => return usage("give either --data or --family, not both"),
        (Some(path), None) => {
            let target = o.target.as_deref().map(TargetColumn::parse).unwrap_or(TargetColumn::Last);
            let ds = lib(data::load_csv(path, &target, !o.no_header.unwrap_or(false)))?;
            (ds.x, ds.y, ds.column_names)
        }
        (None, Some(_)) => {
            let fams = families(cfg)?;
            let [family] = fams.as_slice() else {
                return usage("detection takes a single --family");
            };
            let d = lib(data::generate(&synthetic_spec(cfg, *family)?))?;
            (d.x_raw, d.y_raw, vec!["x".to_string()])
        }
        (None, None) => return usage("give --data or --family"),
    };
    if o.no_normalize.unwrap_or(false) {
        Ok(Loaded { x, y, names })
    } else {
        let (x, y, _) = lib(data::normalize(&x, &y))?;
        Ok(Loaded { x, y, names })
    }
}

fn single<T: Copy>(v: &Option<Vec<T>>, what: &str, default: T) -> anyhow::Result<T> {
    match v.as_deref() {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => usage(format!("--{what} takes a single value here")),
    }
}

fn synthetic_spec(cfg: &Resolved, family: SyntheticFamily) -> anyhow::Result<SyntheticSpec> {
    let spec = SyntheticSpec {
        family,
        n: single(&cfg.opts.n, "n", 30)?,
        snr: single(&cfg.opts.snr, "snr", 0.9)?,
        seed: cfg.seed,
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(spec)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn cmd_detect(cfg: &Resolved, dry_run: bool, regions: bool) -> anyhow::Result<()> {
    let input = load_input(cfg)?;
    let d = input.x.ncols();
    if dry_run {
        println!(
            "planned: {} plain fit + {} monotone EP fits ({} input dimension(s), N = {})",
            1,
            2 * d,
            d,
            input.x.nrows()
        );
        return Ok(());
    }
    let det = lib(amd::amd_detect(&input.x, &input.y, &cfg.amd))?;
    let name = |i: usize| input.names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));

    let mut summary = String::new();
    for (i, r) in det.dimensions.iter().enumerate() {
        summary.push_str(&format!(
            "{}: {:+} (E+ {}, E- {}, p1 limit + {}, - {})\n",
            name(i),
            r.direction,
            fmt_opt(r.energy_plus),
            fmt_opt(r.energy_minus),
            fmt_opt(det.p1_limit(i, 1.0)),
            fmt_opt(det.p1_limit(i, -1.0)),
        ));
    }
    let region_list = det.regions();
    let mut out = json!({
        "metadata": metadata(),
        "config": config_echo(cfg),
        "columns": input.names,
        "report": det,
    });
    if regions {
        out["regions"] = serde_json::to_value(&region_list)?;
        let mut csv = csv_header_line(cfg)?;
        csv.push_str("dim,name,direction_if_detected,p1_limit_plus,p2_limit_plus,p1_limit_minus,p2_limit_minus,p1_width\n");
        for r in &region_list {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.dim,
                name(r.dim),
                r.direction_if_detected,
                csv_opt(r.p1_limit_plus),
                csv_opt(r.p2_limit_plus),
                csv_opt(r.p1_limit_minus),
                csv_opt(r.p2_limit_minus),
                r.p1_width
            ));
        }
        if let Some(p) = &cfg.opts.summary {
            write_output(Some(p), &csv)?;
        }
    } else if let Some(p) = &cfg.opts.summary {
        write_output(Some(p), &summary)?;
    }
    let text = serde_json::to_string_pretty(&out)? + "\n";
    match &cfg.opts.out {
        Some(p) => {
            write_output(Some(p), &text)?;
            print!("{summary}");
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_synth(cfg: &Resolved, dry_run: bool) -> anyhow::Result<()> {
    let fams = families(cfg)?;
    let [family] = fams.as_slice() else {
        return usage("synth takes a single --family");
    };
    let spec = synthetic_spec(cfg, *family)?;
    if dry_run {
        println!("planned: {} points of {}", spec.n, family.label());
        return Ok(());
    }
    let d = lib(data::generate(&spec))?;
    let (x, y) = if cfg.opts.no_normalize.unwrap_or(false) {
        (&d.x_raw, &d.y_raw)
    } else {
        (&d.x, &d.y)
    };
    let body = data::to_csv(x, y, &["x".to_string()], "y");
    write_output(cfg.opts.out.as_deref(), &(csv_header_line(cfg)? + &body))
}

struct Cell {
    index: u64,
    family: SyntheticFamily,
    n: usize,
    snr: f64,
}

fn cells(cfg: &Resolved) -> anyhow::Result<Vec<Cell>> {
    let fams = families(cfg)?;
    let ns = cfg.opts.n.clone().unwrap_or_else(|| vec![30]);
    let snrs = cfg.opts.snr.clone().unwrap_or_else(|| vec![0.9]);
    let mut out = Vec::new();
    for family in &fams {
        for &n in &ns {
            for &snr in &snrs {
                let spec = SyntheticSpec { family: *family, n, snr, seed: 0 };
                spec.validate().map_err(|e| UsageError(e.to_string()))?;
                out.push(Cell {
                    index: out.len() as u64,
                    family: *family,
                    n,
                    snr,
                });
            }
        }
    }
    Ok(out)
}

fn cell_prefix(c: &Cell) -> String {
    let (name, a) = c.family.parts();
    format!("{name},{a},{},{}", c.n, c.snr)
}

fn quantile_rows(prefix: &str, label: &str, values: &[f64]) -> String {
    match experiments::summarize(values) {
        Some(s) => format!("{prefix},{label},{},{},{},{}\n", s.count, s.median, s.q05, s.q95),
        None => format!("{prefix},{label},0,,,\n"),
    }
}

fn cmd_sweep_p1(cfg: &Resolved, dry_run: bool) -> anyhow::Result<()> {
    let cells = cells(cfg)?;
    let reps = cfg.opts.reps.unwrap_or(200);
    if dry_run {
        println!(
            "planned: {} cells x {reps} repetitions = {} detections ({} fits)",
            cells.len(),
            cells.len() * reps,
            3 * cells.len() * reps
        );
        return Ok(());
    }
    let mut amd_cfg = cfg.amd.clone();
    amd_cfg.parallel = false;
    let mut csv = csv_header_line(cfg)?;
    csv.push_str("family,a,n,snr,rep,data_seed,detection_seed,p1_limit,p2_limit,direction,error\n");
    let mut summary = csv_header_line(cfg)?;
    summary.push_str("family,a,n,snr,quantity,count,median,q05,q95\n");
    for cell in &cells {
        let rows: Vec<_> = (0..reps)
            .into_par_iter()
            .map(|rep| experiments::p1_sweep_rep(cell.family, cell.n, cell.snr, cfg.seed, cell.index, rep, &amd_cfg))
            .collect();
        let prefix = cell_prefix(cell);
        let (mut p1s, mut p2s) = (Vec::new(), Vec::new());
        for (rep, row) in rows.into_iter().enumerate() {
            match row {
                Ok(r) => {
                    csv.push_str(&format!(
                        "{prefix},{rep},{},{},{},{},{},\n",
                        r.data_seed,
                        r.detection_seed,
                        csv_opt(r.p1_limit),
                        csv_opt(r.p2_limit),
                        r.direction
                    ));
                    p1s.extend(r.p1_limit);
                    p2s.extend(r.p2_limit);
                }
                Err(e) => {
                    log::warn!("{prefix} repetition {rep}: {e}");
                    csv.push_str(&format!("{prefix},{rep},,,,,,\"{}\"\n", e.to_string().replace('"', "'")));
                }
            }
        }
        summary.push_str(&quantile_rows(&prefix, "p1_limit", &p1s));
        summary.push_str(&quantile_rows(&prefix, "p2_limit", &p2s));
    }
    write_output(cfg.opts.out.as_deref(), &csv)?;
    match &cfg.opts.summary {
        Some(p) => write_output(Some(p), &summary),
        None if cfg.opts.out.is_some() => {
            print!("{}", summary.split_once('\n').map_or("", |(_, rest)| rest));
            Ok(())
        }
        None => Ok(()),
    }
}

fn cmd_lppd_compare(cfg: &Resolved, dry_run: bool) -> anyhow::Result<()> {
    let cells = cells(cfg)?;
    let reps = cfg.opts.reps.unwrap_or(200);
    let defaults = LppdSettings::default();
    let settings = LppdSettings {
        test_points: cfg.opts.test_points.unwrap_or(defaults.test_points),
        edge_fraction: cfg.opts.edge_fraction.unwrap_or(defaults.edge_fraction),
        assumed_sign: cfg.opts.assumed_sign.unwrap_or(defaults.assumed_sign),
        one_sided: cfg.opts.one_sided.unwrap_or(defaults.one_sided),
    };
    if !(settings.edge_fraction > 0.0 && settings.edge_fraction < 1.0) {
        bail!(UsageError("--edge-fraction must lie in (0, 1)".into()));
    }
    if settings.assumed_sign != 1.0 && settings.assumed_sign != -1.0 {
        bail!(UsageError("--assumed-sign must be 1 or -1".into()));
    }
    if dry_run {
        println!(
            "planned: {} cells x {reps} repetitions = {} detections ({} fits)",
            cells.len(),
            cells.len() * reps,
            3 * cells.len() * reps
        );
        return Ok(());
    }
    let mut amd_cfg = cfg.amd.clone();
    amd_cfg.parallel = false;
    let mut csv = csv_header_line(cfg)?;
    csv.push_str("family,a,n,snr,rep,data_seed,detection_seed,test_seed,direction,lppd_plain,lppd_monotone,lppd_amd,delta_monotone,delta_amd,error\n");
    let mut summary = csv_header_line(cfg)?;
    summary.push_str("family,a,n,snr,quantity,count,median,q05,q95\n");
    for cell in &cells {
        let rows: Vec<_> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                experiments::lppd_compare_rep(cell.family, cell.n, cell.snr, cfg.seed, cell.index, rep, &amd_cfg, &settings)
            })
            .collect();
        let prefix = cell_prefix(cell);
        let (mut dm, mut da) = (Vec::new(), Vec::new());
        for (rep, row) in rows.into_iter().enumerate() {
            match row {
                Ok(r) => {
                    csv.push_str(&format!(
                        "{prefix},{rep},{},{},{},{},{},{},{},{},{},\n",
                        r.data_seed,
                        r.detection_seed,
                        r.test_seed,
                        r.direction,
                        r.lppd_plain,
                        r.lppd_monotone,
                        r.lppd_amd,
                        r.delta_monotone,
                        r.delta_amd
                    ));
                    dm.push(r.delta_monotone);
                    da.push(r.delta_amd);
                }
                Err(e) => {
                    log::warn!("{prefix} repetition {rep}: {e}");
                    csv.push_str(&format!("{prefix},{rep},,,,,,,,,,\"{}\"\n", e.to_string().replace('"', "'")));
                }
            }
        }
        summary.push_str(&quantile_rows(&prefix, "delta_monotone", &dm));
        summary.push_str(&quantile_rows(&prefix, "delta_amd", &da));
    }
    write_output(cfg.opts.out.as_deref(), &csv)?;
    match &cfg.opts.summary {
        Some(p) => write_output(Some(p), &summary),
        None if cfg.opts.out.is_some() => {
            print!("{}", summary.split_once('\n').map_or("", |(_, rest)| rest));
            Ok(())
        }
        None => Ok(()),
    }
}
