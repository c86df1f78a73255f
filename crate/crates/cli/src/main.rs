use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crisis_abm::config::{parse_config, Config};
use crisis_abm::emit::{self, Format, Header};
use crisis_abm::experiment::{self, sweep_with, SweepTable};
use crisis_abm::scheduler::run;
use crisis_abm::{Mechanism, Setting};

#[derive(Parser)]
#[command(name = "crisis-abm", version, about = "Macro-financial agent-based simulator with bank resolution mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a single trajectory.
    Run(RunArgs),
    /// Ensemble averages over a grid of refinancing rates and mechanisms.
    Sweep(SweepArgs),
    /// Stylized-fact battery; exits with status 1 when it fails.
    Validate(ValidateArgs),
    /// The three mechanisms on one shared seed.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Published variable-parameter setting; replaces the setting block.
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..=2))]
    setting: Option<i64>,
    /// Refinancing rate, or a comma-separated grid.
    #[arg(long)]
    r0: Option<String>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon in steps.
    #[arg(long)]
    t_max: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `csv` or `json`.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Also write plot-ready `plot_*.csv` files, one per chart.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// `pa`, `bailout` or `bailin`.
    #[arg(long)]
    mechanism: Option<String>,
    /// Write the event log as JSON lines.
    #[arg(long)]
    events: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// One mechanism or a comma-separated list.
    #[arg(long)]
    mechanism: Option<String>,
    /// Seeds per cell.
    #[arg(long)]
    seeds: Option<usize>,
    /// Archive every run's series as gzip CSV under `<out>/runs`.
    #[arg(long)]
    archive: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Seeds in the battery.
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    /// Start equity of every bank.
    #[arg(long, default_value_t = 50.0)]
    bank_equity: f64,
    /// Steps dropped from the start of the regression window.
    #[arg(long, default_value_t = 100)]
    burn_in: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    events: bool,
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|e| anyhow::anyhow!("invalid value for `{key}`: {e}")))
        .collect()
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => Config::default(),
        };
        if let Some(n) = self.setting {
            cfg.apply_setting(Setting::from_number(n)?);
        }
        if let Some(r) = &self.r0 {
            cfg.grid = parse_list(r, "r0")?;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(t) = self.t_max {
            cfg.t_max = t;
        }
        Ok(cfg)
    }

    fn format(&self) -> Result<Format> {
        Ok(self.format.parse()?)
    }
}

fn set_mechanisms(cfg: &mut Config, arg: &Option<String>) -> Result<()> {
    if let Some(m) = arg {
        cfg.mechanisms = parse_list::<Mechanism>(m, "mechanism")?;
    }
    Ok(())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    set_mechanisms(&mut cfg, &args.mechanism)?;
    cfg.validate()?;
    if cfg.grid.len() > 1 || cfg.mechanisms.len() > 1 {
        bail!("`run` takes one rate and one mechanism; use `sweep` for grids");
    }
    let rc = cfg.run_config();
    let out = run(&rc)?;
    let header = Header { config: &cfg, seed: rc.seed };
    let dir = &args.common.out;
    let mut paths = vec![emit::write_run(dir, "run", &header, rc.mechanism, rc.r0, &out, args.common.format()?)?];
    if args.events {
        paths.push(emit::write_events(&dir.join("events.jsonl"), &header, &out.events)?);
    }
    if args.common.plot_data {
        paths.extend(emit::write_compare_plot_data(dir, &header, &[(rc.mechanism, &out)])?);
    }
    report(&paths);
    let insolvencies: usize = out.rows.iter().map(|r| r.insolvencies.len()).sum();
    println!(
        "steps {} | termination {:?} | first crisis {} | insolvencies {insolvencies}",
        out.last_step(),
        out.termination,
        out.first_crisis().map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
    );
    Ok(())
}

fn print_table(table: &SweepTable) {
    println!("{:>8} {:>8} {:>8} {:>10} {:>10} {:>8} {:>8} {:>5}", "r0", "mech", "U", "Y", "CV", "i_n", "M", "empty");
    for c in &table.cells {
        println!(
            "{:>8.4} {:>8} {:>8.4} {:>10.2} {:>10.2} {:>8.4} {:>8.3} {:>5}",
            c.r0,
            c.mechanism.as_str(),
            c.u.mean,
            c.y.mean,
            c.cv.mean,
            c.i_n.mean,
            c.m.mean,
            c.n_flagged
        );
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    set_mechanisms(&mut cfg, &args.mechanism)?;
    if let Some(n) = args.seeds {
        cfg.n_seeds = n;
    }
    cfg.validate()?;
    let dir = args.common.out.clone();
    let header = Header { config: &cfg, seed: cfg.base_seed };
    let archive_dir = dir.join("runs");
    let archive_errors = std::sync::Mutex::new(Vec::new());
    let table = sweep_with(&cfg.sweep_spec(), |key, out| {
        if args.archive {
            if let Err(e) = emit::archive_run(&archive_dir, &header, key, out) {
                archive_errors.lock().expect("lock").push(e.to_string());
            }
        }
    })?;
    if let Some(e) = archive_errors.into_inner().expect("lock").into_iter().next() {
        bail!("archiving failed: {e}");
    }
    let mut paths = vec![emit::write_sweep(&dir, &header, &table, args.common.format()?)?];
    if args.common.plot_data {
        paths.extend(emit::write_sweep_plot_data(&dir, &header, &table)?);
    }
    report(&paths);
    print_table(&table);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<bool> {
    let mut cfg = args.common.load()?;
    if args.common.r0.is_none() {
        cfg.grid = vec![0.021];
    }
    if args.common.t_max.is_none() {
        cfg.t_max = 2000;
    }
    cfg.params.bank_equity0 = args.bank_equity;
    cfg.n_seeds = args.seeds;
    cfg.mechanisms = vec![Mechanism::PurchaseAndAssumption];
    cfg.validate()?;
    if cfg.grid.len() != 1 {
        bail!("`validate` takes a single rate");
    }
    let report_ = experiment::validate(
        &cfg.params,
        cfg.grid[0],
        cfg.sweep_spec().seeds().collect::<Vec<_>>(),
        cfg.t_max,
        args.burn_in,
    )?;
    let header = Header { config: &cfg, seed: cfg.base_seed };
    let dir = &args.common.out;
    let mut paths = vec![emit::write_validation(dir, &header, &report_)?];
    if args.common.plot_data {
        if let Some(first) = report_.facts.first() {
            let h = Header { config: &cfg, seed: first.seed };
            paths.extend(emit::write_validation_plot_data(dir, &h, first)?);
        }
    }
    report(&paths);
    let need = report_.required();
    let n = report_.facts.len();
    let verdict = |k: usize| if k >= need { "PASS" } else { "FAIL" };
    println!("zipf exponent in [0.5, 1.5]: {}/{n} seeds (need {need}) {}", report_.zipf, verdict(report_.zipf));
    println!("okun slope < 0, p < 0.05:     {}/{n} seeds (need {need}) {}", report_.okun, verdict(report_.okun));
    println!("phillips slope < 0, p < 0.05: {}/{n} seeds (need {need}) {}", report_.phillips, verdict(report_.phillips));
    Ok(report_.passed())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    cfg.mechanisms = Mechanism::ALL.to_vec();
    cfg.validate()?;
    if cfg.grid.len() != 1 {
        bail!("`compare` takes a single rate");
    }
    let dir: &Path = &args.common.out;
    let format = args.common.format()?;
    let header = Header { config: &cfg, seed: cfg.base_seed };
    let mut outputs = Vec::new();
    let mut paths = Vec::new();
    for m in Mechanism::ALL {
        let rc = crisis_abm::params::RunConfig::new(cfg.params.clone(), cfg.grid[0], m, cfg.t_max, cfg.base_seed);
        let out = run(&rc).with_context(|| format!("running {m}"))?;
        paths.push(emit::write_run(dir, &format!("compare_{m}"), &header, m, rc.r0, &out, format)?);
        if args.events {
            paths.push(emit::write_events(&dir.join(format!("events_{m}.jsonl")), &header, &out.events)?);
        }
        outputs.push((m, out));
    }
    if args.common.plot_data {
        let refs: Vec<_> = outputs.iter().map(|(m, o)| (*m, o)).collect();
        paths.extend(emit::write_compare_plot_data(dir, &header, &refs)?);
    }
    report(&paths);
    for (m, out) in &outputs {
        let n = out.rows.len().max(1) as f64;
        let y = out.rows.iter().map(|r| r.output).sum::<f64>() / n;
        let u = out.rows.iter().map(|r| r.unemployment).sum::<f64>() / n;
        println!(
            "{:>8}: mean Y {y:.2} | mean U {u:.4} | first crisis {} | steps {}",
            m.as_str(),
            out.first_crisis().map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
            out.last_step()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
        Command::Compare(a) => cmd_compare(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
