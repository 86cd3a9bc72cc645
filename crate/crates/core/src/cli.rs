//! Command-line front end: one verb per reproducible experiment.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::config::{lines_fragment, GridSpec, Lines};
use crate::io::{load_config, sweep_csv_string, write_atomic, write_touchstone, Manifest, RunConfig, TwoPortPoint};
use crate::network::{IterationMode, OperatingPoint, Port, SurfaceSet};
use crate::optimizer::{evaluate_objective, ga_optimize, DesignVector, Problem};
use crate::surface::{cache_dir, cached_surface, SolverKind};
use crate::sweep::{crossovers, sweep_frequency, sweep_power, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "nltr", version, about = "Diode-limiter T/R switch simulation and line synthesis")]
pub struct Cli {
    /// JSON run configuration; omitted fields take the reference design.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverArg>,
    /// Index every NC surface by the excitation power, no feedback.
    #[arg(long, global = true, conflicts_with = "self_consistent")]
    pub direct: bool,
    /// Iterate NC drive levels to a fixed point.
    #[arg(long, global = true)]
    pub self_consistent: bool,
    /// Add the closed-form receive-mode coefficient columns to sweep CSVs.
    #[arg(long, global = true)]
    pub paper_eq4: bool,
    /// Optimizer seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Print the configuration after defaults and overrides, then exit.
    #[arg(long, global = true)]
    pub print_effective_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Hb,
    Transient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Figure {
    /// NC impedance surface, 0.6–1.5 GHz × −40…+30 dBm.
    Fig3,
    /// Frequency sweep at −30 dBm, 0.8–1.3 GHz.
    Fig5,
    /// Power sweep at 1.2 GHz, −40…+30 dBm.
    Fig6,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the NC impedance over the configured grid.
    Surface,
    /// Sweep frequency at fixed antenna power.
    SweepFreq {
        #[arg(long, allow_negative_numbers = true)]
        power: Option<f64>,
        #[arg(long)]
        f_start: Option<f64>,
        #[arg(long)]
        f_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Sweep antenna power at fixed frequency.
    SweepPower {
        #[arg(long)]
        freq: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p_start: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Regenerate the data behind one reference figure.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Synthesize the line parameters with the genetic algorithm.
    Optimize,
    /// Load and validate the configuration, printing its hash.
    ValidateConfig,
}

/// Receive-mode figures reported for the built switch; the manifest
/// records the margin to each.
const REFERENCE_IL_DB: f64 = 1.0;
const REFERENCE_ISOLATION_DB: f64 = 18.0;
const REFERENCE_RL_DB: f64 = 10.0;

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Configuration with command-line overrides applied.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = cli.solver {
        cfg.solver.kind = match s {
            SolverArg::Hb => SolverKind::Hb,
            SolverArg::Transient => SolverKind::Transient,
        };
    }
    if cli.direct {
        cfg.operating.iteration = IterationMode::Direct;
    }
    if cli.self_consistent {
        cfg.operating.iteration = IterationMode::SelfConsistent;
    }
    if let Some(seed) = cli.seed {
        cfg.optimizer.ga.seed = seed;
    }
    match &cli.command {
        Some(Command::SweepFreq {
            power,
            f_start,
            f_stop,
            points,
        }) => {
            let s = &mut cfg.sweeps.frequency;
            s.power_dbm = power.unwrap_or(s.power_dbm);
            s.f_start_hz = f_start.unwrap_or(s.f_start_hz);
            s.f_stop_hz = f_stop.unwrap_or(s.f_stop_hz);
            s.points = points.unwrap_or(s.points);
        }
        Some(Command::SweepPower {
            freq,
            p_start,
            p_stop,
            points,
        }) => {
            let s = &mut cfg.sweeps.power;
            s.f_hz = freq.unwrap_or(s.f_hz);
            s.p_start_dbm = p_start.unwrap_or(s.p_start_dbm);
            s.p_stop_dbm = p_stop.unwrap_or(s.p_stop_dbm);
            s.points = points.unwrap_or(s.points);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = effective_config(&cli)?;
    let out_err = |e| Error::io("<stdout>", e);
    if cli.print_effective_config {
        return stdout.write_all(cfg.effective_json().as_bytes()).map_err(out_err);
    }
    let Some(command) = &cli.command else {
        return Err(Error::config("command", "no command given (see --help)"));
    };
    if let Command::ValidateConfig = command {
        return writeln!(stdout, "ok {}", cfg.hash()).map_err(out_err);
    }
    let mut job = Job::new(&cfg, command_name(command))?;
    match command {
        Command::Surface => job.surface("surface.csv", &cfg.surface_grid)?,
        Command::SweepFreq { .. } => {
            let s = cfg.sweeps.frequency;
            job.frequency_sweep("sweep_freq.csv", s.power_dbm, s.f_start_hz, s.f_stop_hz, s.points, cli.paper_eq4)?
        }
        Command::SweepPower { .. } => {
            let s = cfg.sweeps.power;
            job.power_sweep("sweep_power.csv", s.f_hz, s.p_start_dbm, s.p_stop_dbm, s.points, cli.paper_eq4)?
        }
        Command::Reproduce { figure } => match figure {
            Figure::Fig3 => job.surface("fig3.csv", &GridSpec::default())?,
            Figure::Fig5 => job.frequency_sweep("fig5.csv", -30.0, 0.8e9, 1.3e9, cfg.sweeps.frequency.points, cli.paper_eq4)?,
            Figure::Fig6 => job.power_sweep("fig6.csv", 1.2e9, -40.0, 30.0, cfg.sweeps.power.points, cli.paper_eq4)?,
        },
        Command::Optimize => job.optimize()?,
        Command::ValidateConfig => unreachable!("handled above"),
    }
    let manifest = job.finish()?;
    writeln!(stdout, "wrote {} file(s) to {}", manifest.files.len(), cfg.output_dir.display()).map_err(out_err)
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Surface => "surface".into(),
        Command::SweepFreq { .. } => "sweep-freq".into(),
        Command::SweepPower { .. } => "sweep-power".into(),
        Command::Reproduce { figure } => format!("reproduce {}", format!("{figure:?}").to_lowercase()),
        Command::Optimize => "optimize".into(),
        Command::ValidateConfig => "validate-config".into(),
    }
}

/// One command's outputs plus the manifest that records them.
struct Job<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    manifest: Manifest,
    started: Instant,
}

impl<'a> Job<'a> {
    fn new(cfg: &'a RunConfig, command: String) -> Result<Self> {
        let dir = cfg.output_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Job {
            cfg,
            dir,
            manifest: Manifest::new(command, cfg.hash(), cfg.solver.kind.to_string()),
            started: Instant::now(),
        })
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f()?;
        self.manifest.timings_s.insert(phase.into(), t.elapsed().as_secs_f64());
        Ok(r)
    }

    fn surfaces(&mut self) -> Result<SurfaceSet> {
        let (design, grid, solver) = (self.cfg.design(), self.cfg.surface_grid.grid()?, self.cfg.solver);
        self.time("surfaces", || SurfaceSet::build(&design, &grid, &solver, cache_dir().as_deref()))
    }

    fn summarize(&mut self, key: &str, value: serde_json::Value) {
        self.manifest.summary.insert(key.into(), value);
    }

    fn surface(&mut self, name: &str, grid: &GridSpec) -> Result<()> {
        let (nc, grid, solver) = (self.cfg.nc(), grid.grid()?, self.cfg.solver);
        let s = self.time("surface", || cached_surface(&nc, &grid, &solver, cache_dir().as_deref()))?;
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        self.emit(name, &buf)?;
        self.summarize("f_points", json!(grid.f_axis.len()));
        self.summarize("p_points", json!(grid.p_axis.len()));
        Ok(())
    }

    fn frequency_sweep(&mut self, name: &str, p_dbm: f64, f0: f64, f1: f64, n: usize, eq4: bool) -> Result<()> {
        let surfaces = self.surfaces()?;
        let (design, op) = (self.cfg.design(), self.cfg.operating);
        let rows = self.time("sweep", || sweep_frequency(&design, &surfaces, p_dbm, f0, f1, n, &op, eq4))?;
        let (table, ops): (Vec<SweepRow>, Vec<OperatingPoint>) = rows.into_iter().unzip();
        self.emit(name, sweep_csv_string(&table)?.as_bytes())?;
        let hash = format!("config sha256 {}", self.manifest.config_hash);
        for (file, other) in [("ant_rx.s2p", Port::Rx), ("ant_tx.s2p", Port::Tx)] {
            let pts = two_port_series(&ops, Port::Ant, other);
            let comments = [format!("nltr {} ant-{other} at {p_dbm} dBm", env!("CARGO_PKG_VERSION")), hash.clone()];
            self.emit(file, write_touchstone(&pts, design.z_p, &comments)?.as_bytes())?;
        }
        self.summarize("rows", json!(table.len()));
        self.summarize("modes", mode_counts(&table));
        self.summarize("reference_margin_db", reference_margins(&table));
        Ok(())
    }

    fn power_sweep(&mut self, name: &str, f_hz: f64, p0: f64, p1: f64, n: usize, eq4: bool) -> Result<()> {
        let surfaces = self.surfaces()?;
        let (design, op) = (self.cfg.design(), self.cfg.operating);
        let rows = self.time("sweep", || sweep_power(&design, &surfaces, f_hz, p0, p1, n, &op, eq4))?;
        let table: Vec<SweepRow> = rows.into_iter().map(|r| r.0).collect();
        self.emit(name, sweep_csv_string(&table)?.as_bytes())?;
        self.summarize("rows", json!(table.len()));
        self.summarize("modes", mode_counts(&table));
        self.summarize("crossovers_dbm", json!(crossovers(&table)));
        Ok(())
    }

    fn optimize(&mut self) -> Result<()> {
        let problem = Problem {
            base: self.cfg.design(),
            surfaces: self.surfaces()?,
            operating: self.cfg.operating,
        };
        let (ga, obj) = (self.cfg.optimizer.ga, self.cfg.optimizer.objective);
        let reference = evaluate_objective(&DesignVector::from_design(&problem.base), &obj, &problem);
        let report = self.time("optimize", || ga_optimize(&ga, &obj, &problem))?;
        let mut trace = Vec::new();
        report.write_trace_csv(&mut trace)?;
        self.emit("ga_trace.csv", &trace)?;
        let best = report.best.apply(&problem.base);
        let lines = Lines {
            it1: best.it1,
            it2: best.it2,
            it3: best.it3,
        };
        self.emit("best_design.json", lines_fragment(&lines).as_bytes())?;
        self.summarize("best_score", json!(report.best_score));
        self.summarize("configured_design_score", json!(reference));
        self.summarize("evaluations", json!(report.evaluations));
        self.summarize("seed", json!(ga.seed));
        Ok(())
    }

    fn finish(mut self) -> Result<Manifest> {
        self.manifest.timings_s.insert("total".into(), self.started.elapsed().as_secs_f64());
        let path = self.dir.join("manifest.json");
        self.manifest.write(&path)?;
        Ok(self.manifest)
    }
}

/// The two-port between `a` and `b` with the third port terminated.
fn two_port_series(ops: &[OperatingPoint], a: Port, b: Port) -> Vec<TwoPortPoint> {
    ops.iter()
        .map(|op| {
            let s = |to, from| op.sparams.get(to, from);
            TwoPortPoint {
                f_hz: op.frequency.hz(),
                s: [[s(a, a), s(a, b)], [s(b, a), s(b, b)]],
            }
        })
        .collect()
}

fn mode_counts(rows: &[SweepRow]) -> serde_json::Value {
    let count = |m: &str| rows.iter().filter(|r| r.mode.to_string() == m).count();
    json!({ "Rx": count("Rx"), "Transition": count("Transition"), "Tx": count("Tx") })
}

/// Worst receive-path figures over the sweep and their margin to the
/// reference figures (positive when met).
fn reference_margins(rows: &[SweepRow]) -> serde_json::Value {
    let worst_il = rows.iter().map(|r| r.il_ant_rx_db).fold(f64::NEG_INFINITY, f64::max);
    let worst_iso = rows.iter().map(|r| r.isolation_db).fold(f64::INFINITY, f64::min);
    let worst_rl = rows.iter().map(|r| r.rl_db).fold(f64::INFINITY, f64::min);
    json!({
        "il_ant_rx_db": { "worst": worst_il, "reference": REFERENCE_IL_DB, "margin": REFERENCE_IL_DB - worst_il },
        "isolation_db": { "worst": worst_iso, "reference": REFERENCE_ISOLATION_DB, "margin": worst_iso - REFERENCE_ISOLATION_DB },
        "rl_db": { "worst": worst_rl, "reference": REFERENCE_RL_DB, "margin": worst_rl - REFERENCE_RL_DB },
    })
}

/// Reads the manifest a command left in `dir`.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nltr").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn overrides_apply_to_effective_config() {
        let cli = parse(&["--solver", "transient", "--direct", "--seed", "9", "--out", "x", "sweep-freq", "--power", "-20", "--points", "5"]);
        let cfg = effective_config(&cli).unwrap();
        assert_eq!(cfg.solver.kind, SolverKind::Transient);
        assert_eq!(cfg.operating.iteration, IterationMode::Direct);
        assert_eq!(cfg.optimizer.ga.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
        assert_eq!(cfg.sweeps.frequency.power_dbm, -20.0);
        assert_eq!(cfg.sweeps.frequency.points, 5);
    }

    #[test]
    fn iteration_flags_conflict() {
        assert!(Cli::try_parse_from(["nltr", "--direct", "--self-consistent", "surface"]).is_err());
    }

    #[test]
    fn reproduce_names() {
        assert_eq!(command_name(&parse(&["reproduce", "fig6"]).command.unwrap()), "reproduce fig6");
    }

    #[test]
    fn effective_config_printout_is_byte_stable() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        run(parse(&["--print-effective-config"]), &mut a).unwrap();
        run(parse(&["--print-effective-config"]), &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(String::from_utf8(a).unwrap(), RunConfig::default().effective_json());
    }

    #[test]
    fn missing_command_is_a_config_error() {
        assert_eq!(run(parse(&[]), &mut Vec::new()).unwrap_err().exit_code(), 2);
    }

    mod end_to_end {
        use super::*;
        use crate::io::{parse_touchstone, read_sweep_csv};
        use crate::network::Mode;

        fn exec(dir: &Path, args: &[&str]) -> Result<()> {
            static CACHE: std::sync::Once = std::sync::Once::new();
            CACHE.call_once(|| std::env::set_var("NLTR_CACHE_DIR", std::env::temp_dir().join("nltr-unit-cache")));
            let args: Vec<String> = args
                .iter()
                .enumerate()
                .map(|(i, a)| match i.checked_sub(1).map(|j| args[j]) {
                    Some("--out" | "--config") => dir.join(a).display().to_string(),
                    _ => a.to_string(),
                })
                .collect();
            run(Cli::try_parse_from(std::iter::once("nltr".to_string()).chain(args)).unwrap(), &mut Vec::new())
        }

        fn code(r: Result<()>) -> i32 {
            r.err().map_or(0, |e| e.exit_code())
        }

        fn rows(path: &Path) -> Vec<crate::sweep::SweepRow> {
            read_sweep_csv(std::fs::read(path).unwrap().as_slice(), path).unwrap()
        }

        #[test]
        fn exit_code_contract() {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            std::fs::write(d.join("neg.json"), r#"{"z_p": -50}"#).unwrap();
            std::fs::write(d.join("empty.json"), "").unwrap();
            std::fs::write(d.join("strict.json"), r#"{"solver": {"hb": {"max_iterations": 1, "tolerance": 1e-12}}}"#).unwrap();

            assert_eq!(code(exec(d, &["validate-config"])), 0);
            let neg = exec(d, &["--config", "neg.json", "validate-config"]).unwrap_err();
            assert_eq!(neg.exit_code(), 2);
            assert!(neg.to_string().contains("z_p"));
            let empty = exec(d, &["--config", "empty.json", "validate-config"]).unwrap_err();
            assert_eq!(empty.exit_code(), 2);
            assert!(empty.to_string().contains("line 1"));
            assert_eq!(main_with_args(["nltr", "--bogus"]), 2);
            assert_eq!(code(exec(d, &["--out", "o", "sweep-freq", "--f-start", "2e9", "--f-stop", "2.5e9"])), 2);
            assert_eq!(code(exec(d, &["--config", "missing.json", "validate-config"])), 4);
            std::fs::write(d.join("oblock"), "").unwrap();
            assert_eq!(code(exec(d, &["--out", "oblock/sub", "reproduce", "fig6"])), 4);
            let strict = exec(d, &["--config", "strict.json", "--out", "os", "surface"]).unwrap_err();
            assert_eq!(strict.exit_code(), 3);
            assert!(strict.to_string().contains("GHz"));
        }

        #[test]
        fn sweeps_and_figures_write_their_files() {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            exec(d, &["--out", "one", "sweep-freq", "--points", "1"]).unwrap();
            assert_eq!(rows(&d.join("one/sweep_freq.csv")).len(), 1);
            for f in ["ant_rx.s2p", "ant_tx.s2p"] {
                let t = parse_touchstone(&std::fs::read_to_string(d.join("one").join(f)).unwrap(), Path::new(f)).unwrap();
                assert_eq!(t.points.len(), 1);
            }

            exec(d, &["--out", "op", "sweep-power", "--p-start", "-30", "--p-stop", "-30", "--points", "1"]).unwrap();
            assert_eq!(rows(&d.join("op/sweep_power.csv")).len(), 1);

            exec(d, &["--out", "of", "reproduce", "fig3"]).unwrap();
            let fig3 = std::fs::read_to_string(d.join("of/fig3.csv")).unwrap();
            assert!(fig3.starts_with("f_hz,p_dbm,re_ohm,im_ohm\n"));
            assert_eq!(fig3.lines().count(), 1 + 46 * 36);

            exec(d, &["--out", "of", "--paper-eq4", "reproduce", "fig6"]).unwrap();
            let fig6 = std::fs::read_to_string(d.join("of/fig6.csv")).unwrap();
            let header = fig6.lines().next().unwrap();
            assert!(header.contains("p_out_tx_dbm,p_out_rx_dbm"));
            assert!(header.ends_with("eq4_s21_im"));
            let low = rows(&d.join("of/fig6.csv"));
            assert_eq!(low.len(), 71);
            assert!(low.iter().filter(|r| r.p_dbm <= -10.0).all(|r| r.il_ant_rx_db <= 2.0));

            let manifest = read_manifest(&d.join("of")).unwrap();
            assert_eq!(manifest.command, "reproduce fig6");
            assert_eq!(manifest.config_hash.len(), 64);
            assert!(manifest.summary.contains_key("crossovers_dbm"));
        }

        #[test]
        fn low_power_band_is_receive_mode() {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            exec(d, &["--out", "o", "sweep-freq", "--power", "-30", "--points", "51"]).unwrap();
            let r = rows(&d.join("o/sweep_freq.csv"));
            assert_eq!(r.len(), 51);
            assert!(r.iter().all(|r| r.mode == Mode::Rx));
        }

        #[test]
        fn optimize_is_reproducible_and_emits_a_usable_fragment() {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            std::fs::write(d.join("small.json"), r#"{"optimizer": {"ga": {"population": 8, "generations": 3}}}"#).unwrap();
            for out in ["oa", "ob"] {
                exec(d, &["--config", "small.json", "--seed", "5", "--out", out, "optimize"]).unwrap();
            }
            let ta = std::fs::read(d.join("oa/ga_trace.csv")).unwrap();
            assert_eq!(ta, std::fs::read(d.join("ob/ga_trace.csv")).unwrap());
            assert!(String::from_utf8_lossy(&ta).starts_with("generation,best_score,mean_score\n"));
            assert_eq!(code(exec(d, &["--config", "oa/best_design.json", "validate-config"])), 0);
        }
    }
}
