//! Command-line front end: `persistlab <command> --config run.toml`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use crate::boundary::{restrict_to_extinction_set, AttractorItem};
use crate::dynsys::{self, FocalDecomposition, Times};
use crate::error::Error;
use crate::exec;
use crate::linearize::{lyapunov_exponent, LyapunovOptions};
use crate::models::{self, BuiltModel};
use crate::persist::{
    self, boundary_attractors, certify_sequence_with, combined_verdict, sweep_cell, sweep_cells,
    PersistenceFunction, SweepRow, SweepTable, Verdict,
};

use config::{Format, RunConfig};
use output::{num, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INCOMPLETE: i32 = 4;
pub const EXIT_EXTINCTION: i32 = 5;
pub const THREADS_ENV: &str = "PERSISTLAB_THREADS";
const JOURNAL_HEADER: &str = "# persistlab-sweep-journal v1";

#[derive(Debug, Parser)]
#[command(name = "persistlab", version, about = "Numerical persistence certificates for population models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set model.params.d=1.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.directory).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in models, their parameters and analytic conditions.
    ListModels,
    /// Simulate one trajectory.
    Simulate(RunArgs),
    /// Estimate the limit sets on the extinction set of each focal block.
    Boundary(RunArgs),
    /// Running Lyapunov exponent of each focal cocycle.
    Lyapunov(RunArgs),
    /// Certify persistence of each focal block.
    Certify(RunArgs),
    /// Certify over a one- or two-parameter grid.
    Sweep(RunArgs),
}

/// A failed command: exit code and message.
#[derive(Debug)]
struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownModel { .. } | Error::UnknownParameter { .. } | Error::ParamOutOfRange { .. } => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure(code, e.to_string())
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure(EXIT_RUNTIME, format!("i/o error: {e}"))
}

/// Parses `args` (without the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("persistlab")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => exec::configure_threads(n),
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return EXIT_CONFIG;
            }
        }
    }
    let result = match cli.command {
        Command::ListModels => {
            print!("{}", list_models());
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => load(&a).and_then(|c| cmd_simulate(&c)),
        Command::Boundary(a) => load(&a).and_then(|c| cmd_boundary(&c)),
        Command::Lyapunov(a) => load(&a).and_then(|c| cmd_lyapunov(&c)),
        Command::Certify(a) => load(&a).and_then(|c| cmd_certify(&c)),
        Command::Sweep(a) => load(&a).and_then(|c| cmd_sweep(&c)),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn load(a: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = config::load(a.config.as_deref(), &a.set).map_err(|m| Failure(EXIT_CONFIG, m))?;
    if let Some(dir) = &a.output {
        cfg.directory = dir.clone();
    }
    Ok(cfg)
}

pub fn list_models() -> String {
    let mut s = String::new();
    for m in models::registry() {
        s.push_str(&format!("{} ({:?}; components {})\n", m.name, m.kind, m.components.join(", ")));
        s.push_str(&format!("  {}\n", m.summary));
        let params: Vec<String> = m.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        s.push_str(&format!("  parameters: {}\n", params.join(" ")));
        s.push_str(&format!("  conditions: {}\n", m.conditions.join("  ")));
    }
    s
}

struct Prepared {
    built: BuiltModel,
    blocks: Vec<FocalDecomposition>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, Failure> {
    let built = models::build_model(&cfg.model, &cfg.params)?;
    let blocks = cfg
        .focal
        .iter()
        .map(|b| {
            let idx = persist::focal_indices(&built.spec, b).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
            built.spec.kolmogorov_decomposition(&idx).map_err(Failure::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared { built, blocks })
}

fn rho_for(cfg: &RunConfig, dec: &FocalDecomposition) -> PersistenceFunction {
    match cfg.rho.as_str() {
        "min_component" => PersistenceFunction::min_component(dec.focal()),
        _ => PersistenceFunction::sum_abs(dec.focal()),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.directory).map_err(io_failure)?;
    Ok(cfg.directory.clone())
}

fn initial_state(cfg: &RunConfig, dim: usize) -> Vec<f64> {
    cfg.initial.clone().unwrap_or_else(|| vec![1.0; dim])
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32, Failure> {
    let p = prepare(cfg)?;
    let model = &p.built.spec;
    let dec = &p.blocks[0];
    let rho = rho_for(cfg, dec);
    let z0 = initial_state(cfg, model.dim());
    let traj = dynsys::simulate(model, Some(dec), &z0, cfg.simulate_horizon, cfg.stride, cfg.certify.dt)?;
    let dir = out_dir(cfg)?;
    let mut header = vec!["time".to_string()];
    header.extend(model.component_names().iter().cloned());
    header.push("rho".into());
    let time = |i: usize| match &traj.times {
        Times::Steps(s) => s[i].to_string(),
        Times::Real(t) => num(t[i]),
    };
    let rows: Vec<Vec<String>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let mut r = vec![time(i)];
            r.extend(z.iter().map(|v| num(*v)));
            r.push(num(rho.eval(z)));
            r
        })
        .collect();
    if cfg.wants(Format::Csv) {
        output::write_csv(dir.join("simulate.csv"), &header, &rows).map_err(io_failure)?;
    }
    if cfg.wants(Format::Svg) {
        let series: Vec<Series> = model
            .component_names()
            .iter()
            .enumerate()
            .map(|(k, name)| Series {
                label: name,
                points: (0..traj.len()).map(|i| (traj.times.get(i), traj.states[i][k])).collect(),
            })
            .collect();
        let svg = output::line_chart(&format!("{} trajectory", model.name()), "time", "state", &series);
        fs::write(dir.join("simulate.svg"), svg).map_err(io_failure)?;
    }
    println!("simulated {} records of {}", traj.len(), model.name());
    Ok(EXIT_OK)
}

fn cmd_boundary(cfg: &RunConfig) -> Result<i32, Failure> {
    let p = prepare(cfg)?;
    let model = &p.built.spec;
    let mut header: Vec<String> = ["focal", "item", "kind", "role", "period"].iter().map(|s| s.to_string()).collect();
    header.extend(model.component_names().iter().cloned());
    let mut rows = Vec::new();
    for (b, dec) in cfg.focal.iter().zip(&p.blocks) {
        let sub = restrict_to_extinction_set(model, dec)?;
        let est = boundary_attractors(&sub, &cfg.certify)?;
        println!("{b}: {} boundary limit set(s)", est.members.len());
        for (k, item) in est.members.iter().enumerate() {
            let (period, pts): (usize, Vec<(&str, &[f64])>) = match item {
                AttractorItem::Equilibrium { point, .. } => (1, vec![("point", point)]),
                AttractorItem::PeriodicOrbit { points, period } => {
                    (*period, points.iter().map(|p| ("point", p.as_slice())).collect())
                }
                AttractorItem::CompactBox { lower, upper, .. } => (0, vec![("lower", lower), ("upper", upper)]),
            };
            println!("  {} {}", k + 1, item.kind_name());
            for (role, x) in pts {
                let mut r = vec![
                    b.clone(),
                    (k + 1).to_string(),
                    item.kind_name().to_string(),
                    role.to_string(),
                    period.to_string(),
                ];
                r.extend(sub.embed(x).iter().map(|v| num(*v)));
                rows.push(r);
            }
        }
    }
    let dir = out_dir(cfg)?;
    if cfg.wants(Format::Csv) {
        output::write_csv(dir.join("boundary.csv"), &header, &rows).map_err(io_failure)?;
    }
    Ok(EXIT_OK)
}

fn cmd_lyapunov(cfg: &RunConfig) -> Result<i32, Failure> {
    let p = prepare(cfg)?;
    let model = &p.built.spec;
    let z0 = initial_state(cfg, model.dim());
    let opts = LyapunovOptions {
        dt: cfg.certify.dt,
        ..LyapunovOptions::default()
    };
    let header: Vec<String> = ["focal", "time", "log_growth", "running_average"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (b, dec) in cfg.focal.iter().zip(&p.blocks) {
        let est = lyapunov_exponent(model, dec, &z0, cfg.certify.lyapunov_horizon, None, &opts)?;
        println!("{b}: exponent {} (limsup {}) over {}", num(est.value), num(est.limsup), num(est.horizon));
        for c in &est.diagnostics {
            rows.push(vec![b.clone(), num(c.time), num(c.log_growth), num(c.running_average)]);
        }
        series.push((b.clone(), est.diagnostics.iter().map(|c| (c.time.log10(), c.running_average)).collect()));
    }
    let dir = out_dir(cfg)?;
    if cfg.wants(Format::Csv) {
        output::write_csv(dir.join("lyapunov.csv"), &header, &rows).map_err(io_failure)?;
    }
    if cfg.wants(Format::Svg) {
        let s: Vec<Series> = series.iter().map(|(l, pts)| Series { label: l, points: pts.clone() }).collect();
        let svg = output::line_chart("running Lyapunov exponent", "log10 time", "average", &s);
        fs::write(dir.join("lyapunov.svg"), svg).map_err(io_failure)?;
    }
    Ok(EXIT_OK)
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::CertifiedPersistent => EXIT_OK,
        Verdict::EvidenceIncomplete => EXIT_INCOMPLETE,
        Verdict::ExtinctionDetected => EXIT_EXTINCTION,
    }
}

fn certify_config(cfg: &RunConfig, built: &BuiltModel) -> Result<persist::CertifyConfig, Failure> {
    let mut c = cfg.certify.clone();
    let names: Vec<String> = cfg.assume_persistent.clone();
    c.assume_persistent = built.spec.indices_of(&names).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    Ok(c)
}

fn cmd_certify(cfg: &RunConfig) -> Result<i32, Failure> {
    let p = prepare(cfg)?;
    let c = certify_config(cfg, &p.built)?;
    let mut certs = certify_sequence_with(&p.built.spec, &p.blocks, &c, |d| rho_for(cfg, d))?;
    for cert in &mut certs {
        cert.analytic_conditions = p.built.conditions.clone();
    }
    let text = output::certificate_text(&certs);
    let dir = out_dir(cfg)?;
    if cfg.wants(Format::Certificate) {
        fs::write(dir.join("certificate.txt"), &text).map_err(io_failure)?;
    }
    print!("{text}");
    Ok(verdict_code(combined_verdict(&certs)))
}

/// Completed rows recorded by an earlier run with the same configuration.
fn read_journal(path: &std::path::Path, fingerprint: &str) -> Vec<(usize, Vec<String>)> {
    let Ok(file) = fs::File::open(path) else {
        return Vec::new();
    };
    let mut lines = BufReader::new(file).lines();
    let header_ok = matches!(lines.next(), Some(Ok(l)) if l == JOURNAL_HEADER)
        && matches!(lines.next(), Some(Ok(l)) if l == format!("# config {fingerprint}"));
    if !header_ok {
        return Vec::new();
    }
    let mut out = Vec::new();
    for line in lines.map_while(|l| l.ok()) {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
        let Some(Ok(rec)) = rdr.records().next() else {
            continue;
        };
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if let Some((idx, rest)) = fields.split_first() {
            if let Ok(i) = idx.parse::<usize>() {
                out.push((i, rest.to_vec()));
            }
        }
    }
    out
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32, Failure> {
    if cfg.sweep.is_empty() {
        return Err(Failure(EXIT_CONFIG, "missing `sweep.vary` section".into()));
    }
    let info = models::lookup(&cfg.model)?;
    let c = {
        let built = models::build_model(&cfg.model, &cfg.params)?;
        certify_config(cfg, &built)?
    };
    let cells = sweep_cells(&cfg.sweep)?;
    let mut table = SweepTable {
        model: cfg.model.clone(),
        axes: cfg.sweep.iter().map(|a| a.name.clone()).collect(),
        condition_names: info.conditions.iter().map(|s| s.to_string()).collect(),
        focal_blocks: cfg.focal.clone(),
        rows: Vec::new(),
    };
    let width = output::sweep_header(&table).len();
    let dir = out_dir(cfg)?;
    let journal_path = dir.join("sweep.journal");
    let fingerprint = cfg.fingerprint().replace('\n', " ");
    let mut done: Vec<Option<Vec<String>>> = vec![None; cells.len()];
    for (i, rec) in read_journal(&journal_path, &fingerprint) {
        if i < cells.len() && rec.len() == width {
            done[i] = Some(rec);
        }
    }
    let resumed = done.iter().filter(|d| d.is_some()).count();
    if resumed == 0 {
        let mut f = fs::File::create(&journal_path).map_err(io_failure)?;
        writeln!(f, "{JOURNAL_HEADER}\n# config {fingerprint}").map_err(io_failure)?;
    }
    let journal = Mutex::new(
        OpenOptions::new()
            .append(true)
            .open(&journal_path)
            .map_err(io_failure)?,
    );
    let pending: Vec<usize> = (0..cells.len()).filter(|&i| done[i].is_none()).collect();
    let computed: Vec<(usize, SweepRow)> = c.execution.map(&pending, |&i| {
        let row = sweep_cell(&cfg.model, &cfg.params, &cfg.sweep, i, &cells[i], &cfg.focal, &c);
        let mut fields = vec![i.to_string()];
        fields.extend(output::sweep_record(&table, &row));
        if let Ok(mut f) = journal.lock() {
            let _ = writeln!(f, "{}", output::csv_line(&fields));
            let _ = f.flush();
        }
        (i, row)
    });
    let mut records: Vec<Vec<String>> = Vec::with_capacity(cells.len());
    let mut computed = computed.into_iter().peekable();
    for (i, slot) in done.into_iter().enumerate() {
        match slot {
            Some(rec) => {
                records.push(rec.clone());
                table.rows.push(row_from_record(&table, i, &rec));
            }
            None => {
                let (j, row) = computed.next().expect("one computed row per pending cell");
                debug_assert_eq!(i, j);
                records.push(output::sweep_record(&table, &row));
                table.rows.push(row);
            }
        }
    }
    if cfg.wants(Format::Csv) {
        output::write_csv(dir.join("sweep.csv"), &output::sweep_header(&table), &records).map_err(io_failure)?;
    }
    if cfg.wants(Format::Svg) {
        let svg = if table.axes.len() == 1 {
            let series: Vec<Series> = table
                .focal_blocks
                .iter()
                .enumerate()
                .map(|(b, label)| Series {
                    label,
                    points: table
                        .rows
                        .iter()
                        .map(|r| (r.values[0], r.blocks.get(b).map_or(f64::NAN, |x| x.epsilon_hat)))
                        .collect(),
                })
                .collect();
            output::line_chart(&format!("{} sweep", table.model), &table.axes[0], "epsilon_hat", &series)
        } else {
            output::verdict_map(&format!("{} verdicts", table.model), &table)
        };
        fs::write(dir.join("sweep.svg"), svg).map_err(io_failure)?;
    }
    println!("swept {} cells ({resumed} resumed from journal)", cells.len());
    Ok(EXIT_OK)
}

fn parse_verdict(s: &str) -> Verdict {
    match s {
        "CertifiedPersistent" => Verdict::CertifiedPersistent,
        "ExtinctionDetected" => Verdict::ExtinctionDetected,
        _ => Verdict::EvidenceIncomplete,
    }
}

fn parse_num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Rebuilds the parts of a row needed for plotting from its CSV record.
fn row_from_record(table: &SweepTable, index: usize, rec: &[String]) -> SweepRow {
    let na = table.axes.len();
    let nc = table.condition_names.len();
    let blocks = table
        .focal_blocks
        .iter()
        .enumerate()
        .map(|(b, focal)| persist::BlockResult {
            focal: focal.clone(),
            epsilon_hat: parse_num(&rec[na + nc + 2 * b]),
            verdict: parse_verdict(&rec[na + nc + 2 * b + 1]),
        })
        .collect();
    SweepRow {
        index,
        values: rec[..na].iter().map(|s| parse_num(s)).collect(),
        conditions: Vec::new(),
        blocks,
        verdict: parse_verdict(&rec[rec.len() - 2]),
        error: None,
    }
}
