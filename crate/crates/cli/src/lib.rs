//! Command-line driver: JSON configuration, subcommand dispatch and CSV
//! output for `nnflow-core`.

pub mod config;
pub mod expr;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nnflow_core::constitutive::{check_admissibility, AdmissibilitySpec};
use nnflow_core::diagnostics::{bounds_report, nikolskii_seminorm, summary_lines, BoundsReport};
use nnflow_core::discretization::write_field_csv;
use nnflow_core::io::{fmt_num, CsvWriter};
use nnflow_core::nfunction::{conjugate_table, ConjugateParams};
use nnflow_core::solver::{refine_study, LadderParam, Solver};
use nnflow_core::tensor::SymMat;
use nnflow_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{load_config, ConfigFile, LoadedConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nnflow", version, about = "Heat-conducting non-Newtonian flow on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    pub config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Seed for sampled checks (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps between diagnostics records (overrides `diagnostics.cadence`).
    #[arg(long)]
    pub cadence: Option<usize>,
    /// Print nothing but errors.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full simulation with diagnostics.
    Run(Common),
    /// Admissibility and hypothesis report only.
    Check(Common),
    /// Export a table of the complementary function.
    Conjugate(Common),
    /// Refinement study, e.g. `--ladder dt=1e-2,5e-3,2.5e-3`.
    Refine {
        #[command(flatten)]
        common: Common,
        /// `<param>=<v1>,<v2>,...` with param one of dt, N, n, k, eps.
        #[arg(long)]
        ladder: String,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run(c) | Command::Check(c) | Command::Conjugate(c) => c,
            Command::Refine { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Check(_) => "check",
            Command::Conjugate(_) => "conjugate",
            Command::Refine { .. } => "refine",
        }
    }
}

/// Reproducibility record written before any other output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub config_path: String,
    pub output_dir: String,
    pub seed: u64,
    pub config: ConfigFile,
    pub hypotheses: Vec<String>,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::StepRejected { .. } | Error::NotPositiveDefinite { .. } | Error::AbortedRun { .. } => EXIT_ABORTED,
        _ => EXIT_INVALID,
    }
}

/// Parses `param=v1,v2,...`.
pub fn parse_ladder(spec: &str) -> Result<(LadderParam, Vec<f64>)> {
    let bad = || Error::InvalidInput(format!("ladder `{spec}` is not of the form param=v1,v2,..."));
    let (name, vals) = spec.split_once('=').ok_or_else(bad)?;
    let param = match name.trim() {
        "dt" => LadderParam::Dt,
        "N" => LadderParam::N,
        "n" | "n_velocity" => LadderParam::NVelocity,
        "k" | "n_temperature" => LadderParam::NTemperature,
        "eps" | "epsilon" => LadderParam::Epsilon,
        other => return Err(Error::InvalidInput(format!("unknown ladder parameter `{other}`"))),
    };
    let values = vals
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    Ok((param, values))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

struct Session {
    loaded: LoadedConfig,
    dir: PathBuf,
    quiet: bool,
}

impl Session {
    fn open(cmd: &Command) -> Result<Self> {
        let c = cmd.common();
        let mut file = {
            let text = fs::read_to_string(&c.config)
                .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", c.config.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", c.config.display())))?
        };
        if let Some(s) = c.seed {
            file.seed = s;
        }
        if let Some(k) = c.cadence {
            file.diagnostics.cadence = k;
        }
        let dir = c.output.clone().unwrap_or_else(|| PathBuf::from(&file.output.directory));
        file.output.directory = dir.display().to_string();
        let loaded = file.resolve()?;
        fs::create_dir_all(&dir)?;
        let hypotheses = loaded
            .sim
            .verdict
            .iter()
            .flat_map(|v| &v.checks)
            .map(|h| {
                let state = if h.informational { "info" } else if h.passed { "pass" } else { "fail" };
                format!("{}: {state}: {}", h.name, h.detail)
            })
            .collect();
        let manifest = RunManifest {
            tool: format!("nnflow {}", env!("CARGO_PKG_VERSION")),
            command: cmd.name().to_string(),
            config_path: c.config.display().to_string(),
            output_dir: dir.display().to_string(),
            seed: loaded.file.seed,
            config: loaded.file.clone(),
            hypotheses,
        };
        let mut w = create(&dir, "manifest.json")?;
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(Self { loaded, dir, quiet: c.quiet })
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }
}

fn write_bounds_csv(b: &BoundsReport, out: impl Write) -> Result<()> {
    let mut w = CsvWriter::new(
        out,
        "per-record density and temperature extremes against the declared bounds; footer row is the worst case",
        &["t", "rho_min", "rho_max", "rho_overshoot", "theta_min", "theta_undershoot"],
    )?;
    for r in &b.rows {
        w.row(&[r.t, r.rho_min, r.rho_max, r.rho_overshoot, r.theta_min, r.theta_undershoot])?;
    }
    let rho_min = b.rows.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min);
    let rho_max = b.rows.iter().map(|r| r.rho_max).fold(f64::NEG_INFINITY, f64::max);
    w.row_with_labels(
        &["worst".to_string()],
        &[rho_min, rho_max, b.worst_rho_overshoot, b.theta_min, b.worst_theta_undershoot],
    )?;
    w.finish()?.flush()?;
    Ok(())
}

fn cmd_run(s: &Session) -> Result<i32> {
    let solver = Solver::new(s.loaded.sim.clone())?;
    let out = solver.run()?;
    let traj = &out.trajectory;
    traj.write_csv(create(&s.dir, "records.csv")?)?.flush()?;
    write_bounds_csv(&bounds_report(traj), create(&s.dir, "bounds.csv")?)?;

    let mut lines = summary_lines(traj)?;
    let deltas = s.loaded.file.nikolskii_deltas();
    if !deltas.is_empty() {
        lines.push(format!("nikolskii_seminorm={}", fmt_num(nikolskii_seminorm(traj, &deltas)?)));
    }
    lines.push(format!("steps={}", out.steps));
    let mut w = create(&s.dir, "summary.txt")?;
    for l in &lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;

    if s.loaded.file.output.fields {
        let basis = solver.basis();
        let vel = basis.synthesize_velocity(&out.final_state.alpha)?;
        let theta = basis.synthesize_temperature(&out.final_state.nu)?;
        let names = ["u1", "u2", "u3"];
        let mut cols: Vec<(&str, &[f64])> = vec![("rho", &out.final_state.rho)];
        cols.extend(vel.iter().enumerate().map(|(c, v)| (names[c], v.as_slice())));
        cols.push(("theta", &theta));
        write_field_csv(solver.grid(), &cols, create(&s.dir, "fields_final.csv")?)?.flush()?;
    }
    for l in &lines {
        s.say(l);
    }
    Ok(EXIT_OK)
}

fn cmd_check(s: &Session) -> Result<i32> {
    let sim = &s.loaded.sim;
    let mut spec = AdmissibilitySpec::torus(sim.dim, 3);
    spec.seed = sim.seed;
    let report = check_admissibility(&sim.stress, &sim.heat, &spec)?;
    let mut lines = vec![format!("seed={}", report.seed), format!("coercivity_const={}", fmt_num(report.coercivity_const))];
    for c in report.checks() {
        lines.push(format!("{}={} worst={} {}", c.name, if c.passed { "pass" } else { "fail" }, fmt_num(c.worst), c.witness));
    }
    let verdict = sim.verdict.as_ref();
    for h in verdict.iter().flat_map(|v| &v.checks) {
        let state = if h.informational { "info" } else if h.passed { "pass" } else { "fail" };
        lines.push(format!("hypothesis.{}={state} {}", h.name, h.detail));
    }
    let ok = report.all_passed() && verdict.map_or(true, |v| v.all_passed());
    lines.push(format!("all_pass={ok}"));
    let desc = format!("sampled admissibility checks, seed {}; passed is 1 or 0", report.seed);
    let mut csv = CsvWriter::new(create(&s.dir, "admissibility.csv")?, &desc, &["check", "passed", "worst"])?;
    for c in report.checks() {
        csv.row_with_labels(&[c.name.to_string()], &[if c.passed { 1.0 } else { 0.0 }, c.worst])?;
    }
    csv.finish()?.flush()?;
    let mut w = create(&s.dir, "check.txt")?;
    for l in &lines {
        writeln!(w, "{}", l.trim_end())?;
        s.say(l.trim_end());
    }
    w.flush()?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_conjugate(s: &Session) -> Result<i32> {
    let sim = &s.loaded.sim;
    let d = sim.dim;
    let nf = sim.stress.nfunction();
    let diag = &s.loaded.file.diagnostics;
    if diag.conjugate_directions == 0 || diag.conjugate_radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidInput("diagnostics.conjugate_radii must be nonnegative with at least one direction".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let dirs: Vec<SymMat> = (0..diag.conjugate_directions).map(|_| SymMat::random_unit(d, &mut rng)).collect();
    let xs: Vec<Vec<f64>> = vec![vec![0.0; d], vec![std::f64::consts::FRAC_PI_2; d]];
    let mut samples = Vec::new();
    for x in &xs {
        for e in &dirs {
            for &r in &diag.conjugate_radii {
                samples.push((x.clone(), *e * r));
            }
        }
    }
    let rows = conjugate_table(nf, &samples, &ConjugateParams::default())?;
    let packed = SymMat::packed_len(d);
    let mut columns: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    columns.push("radius".into());
    columns.extend((0..packed).map(|i| format!("l{i}")));
    columns.extend(["m_star".to_string(), "m_star_closed".to_string()]);
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let desc = format!("complementary function of {}; l* are packed upper-triangle entries", nf.label());
    let mut w = CsvWriter::new(create(&s.dir, "conjugate.csv")?, &desc, &col_refs)?;
    for row in &rows {
        let mut v = row.x.clone();
        v.push(row.l.norm());
        v.extend(row.l.pack());
        v.push(row.value);
        v.push(nf.closed_form_conjugate(&row.x, &row.l).unwrap_or(f64::NAN));
        w.row(&v)?;
    }
    w.finish()?.flush()?;
    s.say(&format!("rows={}", rows.len()));
    Ok(EXIT_OK)
}

fn cmd_refine(s: &Session, ladder: &str) -> Result<i32> {
    let (param, values) = parse_ladder(ladder)?;
    let report = refine_study(&s.loaded.sim, param, &values)?;
    report.write_csv(create(&s.dir, "refine.csv")?)?.flush()?;
    for l in &report.levels {
        match &l.failure {
            Some(f) => s.say(&format!("{}={} failed: {f}", param.as_str(), fmt_num(l.value))),
            None => s.say(&format!(
                "{}={} dashboard={} velocity_diff={} observed_order={}",
                param.as_str(),
                fmt_num(l.value),
                fmt_num(l.dashboard),
                fmt_num(l.velocity_diff),
                fmt_num(l.observed_order)
            )),
        }
    }
    if report.levels.iter().all(|l| l.failure.is_some()) {
        return Ok(EXIT_ABORTED);
    }
    Ok(EXIT_OK)
}

fn dispatch(cmd: &Command) -> Result<i32> {
    let session = Session::open(cmd)?;
    match cmd {
        Command::Run(_) => cmd_run(&session),
        Command::Check(_) => cmd_check(&session),
        Command::Conjugate(_) => cmd_conjugate(&session),
        Command::Refine { ladder, .. } => cmd_refine(&session, ladder),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    let level = if cli.command.common().quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
