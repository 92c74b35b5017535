//! `skyflow` command-line interface: scenario validation and generation,
//! single solves, parameter sweeps, Pareto/curve post-processing, design
//! comparison, and GeoJSON noise-map export.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skyflow_core::export;
use skyflow_core::harness::{self, SweepPlan};
use skyflow_core::optimizer::{ccp_solve, CcpOptions, ProblemSpec, Solution};
use skyflow_core::scenario::{load_scenario, save_scenario, BuiltScenario, Scenario, ScenarioError};
use skyflow_core::synth::{generate_synthetic, SynthConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "skyflow",
    version,
    about = "Noise-aware, fairness-constrained traffic flow assignment for multi-layer UAM networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Solver configuration, overridable by flags or environment variables
/// (SKYFLOW_CCP_TOL, SKYFLOW_CCP_MAX_ITER).
#[derive(Args, Debug)]
struct SolverArgs {
    /// CCP convergence tolerance on the LP objective
    #[arg(long)]
    ccp_tol: Option<f64>,
    /// Maximum CCP iterations
    #[arg(long)]
    ccp_max_iter: Option<usize>,
    /// LP backend selection; "simplex" is the embedded default
    #[arg(long, default_value = "simplex")]
    backend: String,
}

impl SolverArgs {
    fn resolve(&self) -> Result<CcpOptions> {
        if self.backend != "simplex" {
            bail!("unknown LP backend \"{}\"; available: simplex", self.backend);
        }
        let mut options = CcpOptions::default();
        if let Some(tol) = env_f64("SKYFLOW_CCP_TOL")? {
            options.tolerance = tol;
        }
        if let Some(iters) = env_usize("SKYFLOW_CCP_MAX_ITER")? {
            options.max_iterations = iters;
        }
        if let Some(tol) = self.ccp_tol {
            options.tolerance = tol;
        }
        if let Some(iters) = self.ccp_max_iter {
            options.max_iterations = iters;
        }
        Ok(options)
    }
}

/// Design parameters for a single solve; unset values fall back to the
/// scenario's [problem] section.
#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    /// Mean noise-increase cap in dB ("inf" disables)
    #[arg(long)]
    mean_noise_cap: Option<f64>,
    /// Flow-averaged extra-energy cap ("inf" disables)
    #[arg(long)]
    extra_energy_cap: Option<f64>,
}

impl DesignArgs {
    fn apply(&self, spec: &mut ProblemSpec) {
        if let Some(v) = self.omega {
            spec.omega = v;
        }
        if let Some(v) = self.delta1 {
            spec.delta1 = v;
        }
        if let Some(v) = self.delta2 {
            spec.delta2 = v;
        }
        if let Some(v) = self.mean_noise_cap {
            spec.mean_noise_cap_db = v;
        }
        if let Some(v) = self.extra_energy_cap {
            spec.extra_energy_cap = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file, reporting every validation issue found
    Validate {
        scenario: PathBuf,
        /// Also write the incidence matrices as CSV into this directory
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
    /// Solve one design and write the solution dump plus metric tables
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        /// Output directory (solution.json, routes_energy.csv, ...)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the link-community impact matrix CSV
        #[arg(long)]
        emit_impact: bool,
        /// Also write the five incidence matrices as CSV
        #[arg(long)]
        emit_matrices: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run a parameter sweep described by a plan file
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Override the plan's worker count
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (sweep_points.csv)
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Pareto-filter sweep points and emit efficiency-fairness curves
    Pareto {
        /// sweep_points.csv from a previous sweep
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Demand bands used to condition the noise curve
        #[arg(long, default_value_t = 4)]
        demand_bins: usize,
    },
    /// Re-solve selected designs under utilitarian and egalitarian criteria
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Grid indices of the designs to compare, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        select: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve one design and export the community noise map as GeoJSON
    ExportNoiseMap {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Generate a synthetic scenario file
    GenScenario {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 19)]
        vertiports: usize,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 292)]
        communities: usize,
        /// Directed O-D pair count (round trips, must be even)
        #[arg(long, default_value_t = 62)]
        od_pairs: usize,
        /// Undirected corridor count to trim the layout to
        #[arg(long)]
        undirected_links: Option<usize>,
        /// Square area edge length in miles
        #[arg(long, default_value_t = 31.0)]
        area_mi: f64,
        /// Output scenario file
        #[arg(long)]
        out: PathBuf,
    },
}

fn env_f64(name: &str) -> Result<Option<f64>> {
    match std::env::var(name) {
        Ok(v) => Ok(Some(v.parse().with_context(|| format!("{name} must be a number, got \"{v}\""))?)),
        Err(_) => Ok(None),
    }
}

fn env_usize(name: &str) -> Result<Option<usize>> {
    match std::env::var(name) {
        Ok(v) => Ok(Some(v.parse().with_context(|| format!("{name} must be an integer, got \"{v}\""))?)),
        Err(_) => Ok(None),
    }
}

/// Tracks files written by one invocation; on failure everything written so
/// far is removed so no partial outputs survive.
struct OutputGuard {
    created: Vec<PathBuf>,
    keep: bool,
}

impl OutputGuard {
    fn new() -> Self {
        OutputGuard { created: Vec::new(), keep: false }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
        }
        std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    fn done(mut self) {
        self.keep = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.keep {
            for path in &self.created {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

fn load_built(path: &Path) -> Result<(Scenario, BuiltScenario)> {
    let scenario = load_scenario(path)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let built = scenario.build(base_dir)?;
    for warning in &built.warnings {
        eprintln!("warning: {warning}");
    }
    Ok((scenario, built))
}

fn solution_dump(scenario: &Scenario, spec: &ProblemSpec, solution: &Solution) -> serde_json::Value {
    serde_json::json!({
        "scenario": scenario.name,
        "parameters": {
            "omega": spec.omega,
            "delta1": spec.delta1,
            "delta2": spec.delta2,
            "max_noise_increase_db": spec.max_noise_increase_db,
            "mean_noise_cap_db": if spec.mean_noise_cap_db.is_finite() { Some(spec.mean_noise_cap_db) } else { None },
            "extra_energy_cap": if spec.extra_energy_cap.is_finite() { Some(spec.extra_energy_cap) } else { None },
            "epsilon": spec.epsilon,
            "duration_s": spec.duration_s,
        },
        "solution": solution,
    })
}

fn print_summary(solution: &Solution) {
    let m = &solution.metrics;
    println!(
        "status={:?} iterations={} objective={:.6}",
        solution.status, solution.iterations, m.objective
    );
    println!(
        "mean_demand={:.2}% gini_demand={:.4} mean_noise_increase={:.3} dB gini_noise={:.4} extra_energy={:.2}%",
        m.mean_demand * 100.0,
        m.gini_demand,
        m.mean_noise_increase_db,
        m.gini_noise_increase,
        m.avg_extra_energy * 100.0
    );
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scenario, dump_matrices } => {
            let result = load_scenario(&scenario);
            match result {
                Ok(s) => {
                    let built = s.build(scenario.parent().unwrap_or(Path::new(".")))?;
                    for warning in &built.warnings {
                        println!("warning: {warning}");
                    }
                    if let Some(dir) = dump_matrices {
                        let mut guard = OutputGuard::new();
                        for (name, m) in [
                            ("E", &built.matrices.e),
                            ("F", &built.matrices.f),
                            ("H", &built.matrices.h),
                            ("J", &built.matrices.j),
                            ("K", &built.matrices.k),
                        ] {
                            guard.write(&dir.join(format!("incidence_{name}.csv")), &export::matrix_csv(name, m))?;
                        }
                        guard.done();
                    }
                    println!(
                        "ok: {} vertiports, {} nodes, {} links, {} routes, {} O-D pairs, {} communities",
                        built.topology.n_vertiports(),
                        built.topology.n_nodes(),
                        built.topology.n_links(),
                        built.topology.n_routes(),
                        built.topology.n_od_pairs(),
                        built.communities.len()
                    );
                    Ok(())
                }
                Err(ScenarioError::Invalid(issues)) => {
                    for issue in &issues {
                        println!("error: {issue}");
                    }
                    bail!("scenario has {} validation issue(s)", issues.len());
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Solve { scenario, design, out, emit_impact, emit_matrices, solver } => {
            let options = solver.resolve()?;
            let (scenario_file, built) = load_built(&scenario)?;
            let mut spec = built.problem.clone();
            design.apply(&mut spec);
            let solution = ccp_solve(&spec, &options)?;
            print_summary(&solution);
            if let Some(dir) = out {
                let mut guard = OutputGuard::new();
                let dump = solution_dump(&scenario_file, &spec, &solution);
                guard.write(&dir.join("solution.json"), &serde_json::to_string_pretty(&dump)?)?;
                guard.write(
                    &dir.join("routes_energy.csv"),
                    &export::route_energy_csv(&built.topology, &spec.extra_energy),
                )?;
                if emit_impact {
                    guard.write(
                        &dir.join("impact_matrix.csv"),
                        &export::impact_matrix_csv(&built.impact, &built.communities),
                    )?;
                }
                if emit_matrices {
                    for (name, m) in [
                        ("E", &built.matrices.e),
                        ("F", &built.matrices.f),
                        ("H", &built.matrices.h),
                        ("J", &built.matrices.j),
                        ("K", &built.matrices.k),
                    ] {
                        guard.write(&dir.join(format!("incidence_{name}.csv")), &export::matrix_csv(name, m))?;
                    }
                }
                guard.done();
            }
            Ok(())
        }
        Command::Sweep { scenario, plan, workers, out, solver } => {
            let options = solver.resolve()?;
            let (_, built) = load_built(&scenario)?;
            let plan_text = std::fs::read_to_string(&plan)
                .with_context(|| format!("reading {}", plan.display()))?;
            let mut plan = SweepPlan::from_toml(&plan_text)?;
            if let Some(w) = workers {
                plan.workers = w;
            }
            let points = harness::run_sweep(&built.problem, &plan, &options)?;
            let mut guard = OutputGuard::new();
            guard.write(&out.join("sweep_points.csv"), &export::design_points_to_csv(&points))?;
            guard.done();
            let solved = points.iter().filter(|p| p.status.solved()).count();
            println!("{} cells solved, {} failed", solved, points.len() - solved);
            Ok(())
        }
        Command::Pareto { points, out, demand_bins } => {
            let text = std::fs::read_to_string(&points)
                .with_context(|| format!("reading {}", points.display()))?;
            let all = export::design_points_from_csv(&text)?;
            let pareto = harness::pareto_filter(&all);
            let (demand_curve, warn_a) =
                harness::efficiency_fairness_curve(&all, harness::CurveAspect::Demand, demand_bins);
            let (noise_curve, warn_b) =
                harness::efficiency_fairness_curve(&all, harness::CurveAspect::Noise, demand_bins);
            for w in warn_a.iter().chain(&warn_b) {
                eprintln!("warning: {w}");
            }
            let mut guard = OutputGuard::new();
            guard.write(&out.join("pareto_points.csv"), &export::design_points_to_csv(&pareto))?;
            guard.write(&out.join("demand_fairness_curve.csv"), &export::curve_to_csv(&demand_curve))?;
            guard.write(&out.join("noise_fairness_curve.csv"), &export::curve_to_csv(&noise_curve))?;
            guard.done();
            println!("{} of {} points are Pareto-efficient", pareto.len(), all.len());
            Ok(())
        }
        Command::Compare { scenario, points, select, out, solver } => {
            let options = solver.resolve()?;
            let (_, built) = load_built(&scenario)?;
            let text = std::fs::read_to_string(&points)
                .with_context(|| format!("reading {}", points.display()))?;
            let all = export::design_points_from_csv(&text)?;
            let selected: Vec<_> = select
                .iter()
                .map(|idx| {
                    all.iter()
                        .find(|p| p.index == *idx)
                        .cloned()
                        .ok_or_else(|| anyhow!("no design point with index {idx} in {}", points.display()))
                })
                .collect::<Result<_>>()?;
            let table = harness::compare_designs(&built.problem, &selected, &options)?;
            let mut guard = OutputGuard::new();
            guard.write(&out.join("comparison_boxplot.csv"), &export::comparison_boxplot_csv(&table))?;
            guard.write(&out.join("comparison_radar.csv"), &export::comparison_radar_csv(&table))?;
            guard.done();
            for row in &table.rows {
                if !row.status.solved() {
                    eprintln!("warning: design {} ({:?}) did not solve", row.design_index, row.criterion);
                }
            }
            println!("compared {} designs under both criteria", selected.len());
            Ok(())
        }
        Command::ExportNoiseMap { scenario, design, out, solver } => {
            let options = solver.resolve()?;
            let (_, built) = load_built(&scenario)?;
            let mut spec = built.problem.clone();
            design.apply(&mut spec);
            let solution = ccp_solve(&spec, &options)?;
            print_summary(&solution);
            let geo = export::noise_map_geojson(
                &built.communities,
                &solution.metrics.community_noise_dba,
                &solution.metrics.noise_increase_db,
                &built.reaction,
            );
            let mut guard = OutputGuard::new();
            guard.write(&out.join("noise_map.geojson"), &serde_json::to_string_pretty(&geo)?)?;
            guard.done();
            Ok(())
        }
        Command::GenScenario { seed, vertiports, layers, communities, od_pairs, undirected_links, area_mi, out } => {
            let area_ft = area_mi * 5280.0;
            let defaults = SynthConfig::default();
            let cfg = SynthConfig {
                seed,
                n_vertiports: vertiports,
                n_layers: layers,
                n_communities: communities,
                n_od_pairs: od_pairs,
                area_width_ft: area_ft,
                area_height_ft: area_ft,
                target_undirected_links: undirected_links.or(if vertiports == 19 {
                    defaults.target_undirected_links
                } else {
                    None
                }),
                ..defaults
            };
            let scenario = generate_synthetic(&cfg)?;
            scenario.validate()?;
            save_scenario(&scenario, &out)?;
            println!(
                "wrote {} ({} vertiports, {} layers, {} O-D pairs, {} communities, {} undirected links)",
                out.display(),
                scenario.vertiports.len(),
                scenario.layers.altitudes_agl_ft.len(),
                scenario.od_pairs.len(),
                scenario.communities.len(),
                scenario.links.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
