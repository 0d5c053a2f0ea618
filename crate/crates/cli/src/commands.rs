//! The `run`, `equilibrium` and `reproduce` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use driftfv::diagnostics::{CaseSummary, CSV_HEADER};
use driftfv::vtk::{write_state, write_vtk};
use driftfv::{solve_equilibrium, DiagnosticsRecord, DopingProfile, EquilibriumState, PnCase, Problem, State};

use crate::config::{Config, MeshSource};
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Number of worker threads from `DRIFTFV_THREADS`, defaulting to the
/// available parallelism.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("DRIFTFV_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("DRIFTFV_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Command-line overrides of the `[output]` section.
#[derive(Debug, Clone, Default)]
pub struct OutputOverrides {
    pub csv: Option<PathBuf>,
    pub vtk_every: Option<usize>,
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(CliError::io(dir)),
        _ => Ok(()),
    }
}

/// Fills in default output paths and makes the mesh path absolute, so that
/// the echo reproduces the run from any directory.
fn resolve(mut config: Config, name: &str, overrides: &OutputOverrides) -> Config {
    if let Some(csv) = &overrides.csv {
        config.output.csv = Some(csv.clone());
    }
    if let Some(k) = overrides.vtk_every {
        config.output.vtk_every = k;
    }
    let csv = config.output.csv.get_or_insert_with(|| PathBuf::from(format!("{name}.csv"))).clone();
    config.output.manifest.get_or_insert_with(|| csv.with_extension("manifest.json"));
    if config.output.vtk_every > 0 {
        config.output.vtk_dir.get_or_insert_with(|| match csv.parent() {
            Some(dir) if !dir.as_os_str().is_empty() => dir.to_path_buf(),
            _ => PathBuf::from("."),
        });
    }
    if let MeshSource::File(f) = &mut config.mesh {
        if let Ok(abs) = std::path::absolute(&*f) {
            *f = abs;
        }
    }
    config
}

fn build_problem(config: &Config) -> Result<Problem, CliError> {
    let mesh = config.build_mesh()?;
    let problem = Problem::discretize(&config.spec(), mesh)?;
    config.stepper.validate(&problem)?;
    Ok(problem)
}

/// Result of one transient scenario.
pub struct CaseOutcome {
    pub summary: CaseSummary,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub timings: Vec<(String, f64)>,
    /// The entropy chain is checked only when a decay theorem applies.
    pub degenerate: bool,
}

impl CaseOutcome {
    fn chain_error(&self) -> Option<CliError> {
        let chain = &self.summary.chain;
        (!self.degenerate && !chain.is_clean()).then(|| {
            CliError::Invariant(format!(
                "{}: entropy inequality violated at {} steps, E increased at {} steps (first at step {})",
                self.summary.name,
                chain.inequality_violations.len(),
                chain.monotonicity_violations.len(),
                chain.first_violation().unwrap_or(0)
            ))
        })
    }
}

/// Equilibrium plus transient run of a resolved config, streaming the CSV
/// and the VTK snapshots.
pub fn execute(config: &Config, name: &str) -> Result<CaseOutcome, CliError> {
    let mut timings = Vec::new();
    let clock = Instant::now();
    let problem = build_problem(config)?;
    timings.push(("setup".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let eq = solve_equilibrium(&problem, config.eq_tol, config.eq_max_iter)?;
    timings.push(("equilibrium".to_string(), clock.elapsed().as_secs_f64()));

    let csv_path = config.output.csv.clone().expect("resolved config");
    create_parent(&csv_path)?;
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(CliError::io(&csv_path))?);
    writeln!(csv, "{CSV_HEADER}").map_err(CliError::io(&csv_path))?;
    let mut outputs = vec![csv_path.clone()];

    let every = config.output.vtk_every;
    let vtk_dir = config.output.vtk_dir.clone().unwrap_or_default();
    if every > 0 {
        fs::create_dir_all(&vtk_dir).map_err(CliError::io(&vtk_dir))?;
    }
    let last_step = config.stepper.num_steps();
    let mut io_error: Option<CliError> = None;
    let mut sink = |record: &DiagnosticsRecord, state: &State| {
        if io_error.is_some() {
            return;
        }
        if let Err(e) = writeln!(csv, "{}", record.csv_row()) {
            io_error = Some(CliError::Io { path: csv_path.display().to_string(), source: e });
            return;
        }
        if every > 0 && (state.step.is_multiple_of(every) || state.step == last_step) {
            let path = vtk_dir.join(format!("{name}_{:06}.vtk", state.step));
            match write_vtk(&path, &problem.mesh, state, &eq) {
                Ok(()) => outputs.push(path),
                Err(e) => io_error = Some(CliError::Io { path: path.display().to_string(), source: e }),
            }
        }
    };
    let clock = Instant::now();
    let result = driftfv::run(&problem, &eq, &config.stepper, &mut sink);
    timings.push(("transient".to_string(), clock.elapsed().as_secs_f64()));
    csv.flush().map_err(CliError::io(&csv_path))?;
    drop(csv);
    if let Some(e) = io_error {
        return Err(e);
    }
    let run = result?;
    let eps = run.epsilon(config.stepper.fp_tol);
    let summary = CaseSummary::new(name, problem.degenerate, &run.records, eps);
    Ok(CaseOutcome { summary, outputs, warnings: run.warnings, timings, degenerate: problem.degenerate })
}

fn describe(summary: &CaseSummary) -> String {
    let fit = match &summary.fit {
        Ok(f) => format!("decay rate {:.4} (R^2 {:.4}, {} points)", f.alpha, f.r_squared, f.window.len()),
        Err(e) => format!("no decay fit ({e})"),
    };
    format!(
        "{}: {} steps, E0 {:.4e}, E_final {:.4e}, {fit}, {} inequality violations{}",
        summary.name,
        summary.steps,
        summary.e0,
        summary.e_final,
        summary.chain.inequality_violations.len(),
        if summary.experimental { " [experimental]" } else { "" }
    )
}

/// `driftfv run <cfg>`.
pub fn run_scenario(cfg: &Path, overrides: &OutputOverrides, threads: usize) -> Result<RunManifest, CliError> {
    let clock = Instant::now();
    let name = stem(cfg);
    let config = resolve(Config::from_file(cfg)?, &name, overrides);
    let mut manifest = RunManifest::new("run", config.to_ini(), threads);
    manifest.time("config", clock.elapsed().as_secs_f64());
    let outcome = execute(&config, &name)?;
    for (phase, s) in &outcome.timings {
        manifest.time(phase, *s);
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    manifest.notes = outcome.warnings.clone();
    manifest.notes.push(describe(&outcome.summary));
    manifest.outputs = outcome.outputs.clone();
    println!("{}", describe(&outcome.summary));
    let manifest_path = config.output.manifest.clone().expect("resolved config");
    manifest.write(&manifest_path)?;
    match outcome.chain_error() {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Cell table `cell,x,y,N,P,Psi`.
pub fn write_cell_csv<W: Write>(mut out: W, problem: &Problem, eq: &EquilibriumState) -> std::io::Result<()> {
    writeln!(out, "cell,x,y,N,P,Psi")?;
    for c in problem.mesh.cells() {
        let k = c.id;
        writeln!(
            out,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.center[0], c.center[1], eq.n.cells[k], eq.p.cells[k], eq.psi.cells[k]
        )?;
    }
    Ok(())
}

/// `driftfv equilibrium <cfg>`: the thermal equilibrium as a cell CSV and a
/// VTK file.
pub fn equilibrium_only(cfg: &Path, overrides: &OutputOverrides, threads: usize) -> Result<RunManifest, CliError> {
    let clock = Instant::now();
    let name = format!("{}_equilibrium", stem(cfg));
    let mut config = Config::from_file(cfg)?;
    // the transient outputs of the file do not apply here
    config.output.csv = None;
    config.output.manifest = None;
    config.output.vtk_every = 0;
    config.output.vtk_dir = None;
    let config = resolve(config, &name, &OutputOverrides { csv: overrides.csv.clone(), vtk_every: None });
    let mut manifest = RunManifest::new("equilibrium", config.to_ini(), threads);
    let problem = build_problem(&config)?;
    manifest.time("setup", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let eq = solve_equilibrium(&problem, config.eq_tol, config.eq_max_iter)?;
    manifest.time("equilibrium", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let csv_path = config.output.csv.clone().expect("resolved config");
    let vtk_path = csv_path.with_extension("vtk");
    create_parent(&csv_path)?;
    let mut out = BufWriter::new(File::create(&csv_path).map_err(CliError::io(&csv_path))?);
    write_cell_csv(&mut out, &problem, &eq).and_then(|()| out.flush()).map_err(CliError::io(&csv_path))?;
    let state = State { n: eq.n.clone(), p: eq.p.clone(), psi: eq.psi.clone(), step: 0, t: 0.0 };
    let mut out = BufWriter::new(File::create(&vtk_path).map_err(CliError::io(&vtk_path))?);
    write_state(&mut out, &problem.mesh, &state, &eq).and_then(|()| out.flush()).map_err(CliError::io(&vtk_path))?;
    manifest.time("output", clock.elapsed().as_secs_f64());

    let note = format!("equilibrium: {} Newton iterations, residual {:.3e}", eq.iterations, eq.residual);
    println!("{note}");
    manifest.notes.push(note);
    manifest.outputs = vec![csv_path.clone(), vtk_path];
    manifest.write(&config.output.manifest.clone().expect("resolved config"))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub outdir: PathBuf,
    pub mesh: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    /// Overrides the preset end time.
    pub t_end: Option<f64>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { outdir: PathBuf::from("reproduce"), mesh: None, nx: 32, ny: 32, t_end: None }
    }
}

/// The ten diode scenarios in report order.
pub fn reproduce_cases() -> Vec<(PnCase, DopingProfile)> {
    PnCase::ALL.into_iter().flat_map(|c| [DopingProfile::Zero, DopingProfile::Pn].map(|d| (c, d))).collect()
}

/// Report of `driftfv reproduce`.
pub struct SuiteReport {
    pub manifest: RunManifest,
    pub summaries: Vec<CaseSummary>,
    pub lines: Vec<String>,
}

/// `driftfv reproduce`: runs every scenario, writing one CSV and one config
/// echo per case, `summary.csv`, `summary.txt` and `manifest.json`. Cases
/// run on up to `threads` worker threads; results do not depend on it.
pub fn reproduce(options: &ReproduceOptions, threads: usize) -> Result<SuiteReport, CliError> {
    let clock = Instant::now();
    let outdir = &options.outdir;
    fs::create_dir_all(outdir).map_err(CliError::io(outdir))?;
    let mut configs = Vec::new();
    for (case, doping) in reproduce_cases() {
        let name = format!("{}_{}", case.name(), doping.name());
        let mut config = Config::preset(case, doping);
        config.mesh = match &options.mesh {
            Some(f) => MeshSource::File(f.clone()),
            None => MeshSource::Cartesian { nx: options.nx, ny: options.ny },
        };
        if let Some(t) = options.t_end {
            config.stepper.t_end = t;
        }
        config.output.csv = Some(outdir.join(format!("{name}.csv")));
        config.output.manifest = Some(outdir.join("manifest.json"));
        let config = resolve(config, &name, &OutputOverrides::default());
        let cfg_path = outdir.join(format!("{name}.cfg"));
        fs::write(&cfg_path, config.to_ini()).map_err(CliError::io(&cfg_path))?;
        configs.push((name, config, cfg_path));
    }
    let echo: String = configs.iter().map(|(n, c, _)| format!("# {n}\n{}\n", c.to_ini())).collect();
    let mut manifest = RunManifest::new("reproduce", echo, threads);
    manifest.time("setup", clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CaseOutcome, CliError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(configs.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((name, config, _)) = configs.get(i) else { break };
                let outcome = execute(config, name);
                match &outcome {
                    Ok(o) => eprintln!("{}", describe(&o.summary)),
                    Err(e) => eprintln!("{name}: failed: {e}"),
                }
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    manifest.time("cases", clock.elapsed().as_secs_f64());

    let mut summaries = Vec::new();
    let mut lines = Vec::new();
    let mut first_error = None;
    let mut table = format!("{}\n", CaseSummary::HEADER);
    for ((name, _, cfg_path), outcome) in configs.iter().zip(results.into_inner().unwrap()) {
        match outcome.expect("every case ran") {
            Ok(o) => {
                lines.push(describe(&o.summary));
                table.push_str(&o.summary.csv_row());
                table.push('\n');
                for (phase, s) in &o.timings {
                    manifest.time(&format!("{name}/{phase}"), *s);
                }
                manifest.notes.extend(o.warnings.iter().map(|w| format!("{name}: {w}")));
                if first_error.is_none() {
                    first_error = o.chain_error();
                }
                manifest.outputs.extend(o.outputs.iter().cloned());
                summaries.push(o.summary);
            }
            Err(e) => {
                lines.push(format!("{name}: failed: {e}"));
                first_error.get_or_insert(e);
            }
        }
        manifest.outputs.push(cfg_path.clone());
    }
    lines.extend(doping_comparison(&summaries));

    let summary_csv = outdir.join("summary.csv");
    fs::write(&summary_csv, table).map_err(CliError::io(&summary_csv))?;
    let summary_txt = outdir.join("summary.txt");
    fs::write(&summary_txt, lines.join("\n") + "\n").map_err(CliError::io(&summary_txt))?;
    manifest.outputs.push(summary_csv);
    manifest.outputs.push(summary_txt);
    manifest.notes.extend(lines.iter().cloned());
    manifest.write(&outdir.join("manifest.json"))?;
    for line in &lines {
        println!("{line}");
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(SuiteReport { manifest, summaries, lines }),
    }
}

/// Decay rates of each case with and without doping, side by side.
fn doping_comparison(summaries: &[CaseSummary]) -> Vec<String> {
    let rate =
        |name: &str| summaries.iter().find(|s| s.name == name).and_then(|s| s.fit.as_ref().ok()).map(|f| f.alpha);
    PnCase::ALL
        .into_iter()
        .filter_map(|case| {
            let zero = rate(&format!("{}_zero", case.name()))?;
            let pn = rate(&format!("{}_pn", case.name()))?;
            Some(format!(
                "{}: decay rate {zero:.4} with zero doping, {pn:.4} with pn doping (relative difference {:.1}%)",
                case.name(),
                100.0 * (pn - zero).abs() / zero.abs().max(pn.abs())
            ))
        })
        .collect()
}
