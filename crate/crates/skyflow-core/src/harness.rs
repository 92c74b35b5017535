//! Design-space exploration: parameter sweeps, Pareto filtering,
//! efficiency-fairness curves, and utilitarian/egalitarian design
//! comparisons.
//!
//! A sweep walks the grid ω × Δ1 × Δ2 × mean-noise-cap × energy-cap in a
//! fixed nested order, solves every cell (optionally multi-started from
//! seeded random linearization points, keeping the best), and records the
//! exact recomputed metrics. Cells run concurrently up to the configured
//! worker count; results are keyed by grid index, so the output is identical
//! for any worker count.

use crate::optimizer::{ccp_solve, CcpOptions, ProblemSpec, SolveStatus};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep plan: {0}")]
    BadPlan(String),
    #[error("worker pool failed: {0}")]
    Pool(String),
    #[error("design comparison needs at least one selected point")]
    EmptySelection,
}

/// Grids over the five swept parameters plus execution policy. Infinite cap
/// entries mean "constraint inactive".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub omega: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub mean_noise_cap_db: Vec<f64>,
    pub extra_energy_cap: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Seeds the multi-start policy; with one replication nothing is random.
    #[serde(default)]
    pub seed: u64,
    /// Solver starts per cell; the best final objective wins.
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_workers() -> usize {
    1
}

fn default_replications() -> usize {
    1
}

impl SweepPlan {
    /// Parse and validate a plan from TOML text. Infinite caps are written
    /// as `inf`.
    pub fn from_toml(text: &str) -> Result<SweepPlan, HarnessError> {
        let plan: SweepPlan =
            toml::from_str(text).map_err(|e| HarnessError::BadPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let grids = [
            ("omega", &self.omega),
            ("delta1", &self.delta1),
            ("delta2", &self.delta2),
            ("mean_noise_cap_db", &self.mean_noise_cap_db),
            ("extra_energy_cap", &self.extra_energy_cap),
        ];
        for (name, grid) in grids {
            if grid.is_empty() {
                return Err(HarnessError::BadPlan(format!("{name} grid is empty")));
            }
        }
        if self.omega.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(HarnessError::BadPlan("omega values must lie in [0,1]".into()));
        }
        for (name, grid) in [("delta1", &self.delta1), ("delta2", &self.delta2)] {
            if grid.iter().any(|v| !(*v >= 0.0)) {
                return Err(HarnessError::BadPlan(format!("{name} values must be nonnegative")));
            }
        }
        for (name, grid) in [
            ("mean_noise_cap_db", &self.mean_noise_cap_db),
            ("extra_energy_cap", &self.extra_energy_cap),
        ] {
            if grid.iter().any(|v| !(*v >= 0.0)) {
                return Err(HarnessError::BadPlan(format!("{name} values must be nonnegative")));
            }
        }
        if self.replications == 0 {
            return Err(HarnessError::BadPlan("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.omega.len()
            * self.delta1.len()
            * self.delta2.len()
            * self.mean_noise_cap_db.len()
            * self.extra_energy_cap.len()
    }

    /// Parameters of a grid cell; the index walks ω outermost, energy cap
    /// innermost.
    pub fn cell(&self, index: usize) -> (f64, f64, f64, f64, f64) {
        let mut rest = index;
        let pu = self.extra_energy_cap[rest % self.extra_energy_cap.len()];
        rest /= self.extra_energy_cap.len();
        let mu = self.mean_noise_cap_db[rest % self.mean_noise_cap_db.len()];
        rest /= self.mean_noise_cap_db.len();
        let d2 = self.delta2[rest % self.delta2.len()];
        rest /= self.delta2.len();
        let d1 = self.delta1[rest % self.delta1.len()];
        rest /= self.delta1.len();
        let omega = self.omega[rest % self.omega.len()];
        (omega, d1, d2, mu, pu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Converged,
    IterationCap,
    Infeasible,
    Error(String),
}

impl CellStatus {
    pub fn solved(&self) -> bool {
        matches!(self, CellStatus::Converged | CellStatus::IterationCap)
    }
}

/// One solved grid cell: its parameters and exact recomputed metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub index: usize,
    pub omega: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub mean_noise_cap_db: f64,
    pub extra_energy_cap: f64,
    pub status: CellStatus,
    pub mean_demand_pct: f64,
    pub mean_noise_increase_db: f64,
    pub extra_energy_pct: f64,
    pub gini_demand: f64,
    pub gini_noise_increase: f64,
    pub objective: f64,
    pub iterations: usize,
}

fn apply_design(spec: &ProblemSpec, omega: f64, d1: f64, d2: f64, mu: f64, pu: f64) -> ProblemSpec {
    let mut s = spec.clone();
    s.omega = omega;
    s.delta1 = d1;
    s.delta2 = d2;
    s.mean_noise_cap_db = mu;
    s.extra_energy_cap = pu;
    s
}

fn solve_cell(
    spec: &ProblemSpec,
    plan: &SweepPlan,
    ccp: &CcpOptions,
    index: usize,
) -> DesignPoint {
    let (omega, d1, d2, mu, pu) = plan.cell(index);
    let cell_spec = apply_design(spec, omega, d1, d2, mu, pu);
    let mut best: Option<(f64, crate::optimizer::Solution)> = None;
    let mut error: Option<String> = None;
    for rep in 0..plan.replications {
        let mut options = ccp.clone();
        if rep > 0 {
            let stream = plan.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ rep as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            options.initial_flow =
                Some((0..cell_spec.n_links()).map(|_| rng.gen_range(0.001..1.0)).collect());
        }
        match ccp_solve(&cell_spec, &options) {
            Ok(sol) => {
                let score = if sol.status == SolveStatus::Infeasible {
                    f64::NEG_INFINITY
                } else {
                    sol.metrics.objective
                };
                if best.as_ref().map_or(true, |(s, _)| score > *s) {
                    best = Some((score, sol));
                }
            }
            Err(e) => error = Some(e.to_string()),
        }
    }
    match best {
        Some((_, sol)) => {
            let status = match sol.status {
                SolveStatus::Converged => CellStatus::Converged,
                SolveStatus::IterationCap => CellStatus::IterationCap,
                SolveStatus::Infeasible => CellStatus::Infeasible,
            };
            DesignPoint {
                index,
                omega,
                delta1: d1,
                delta2: d2,
                mean_noise_cap_db: mu,
                extra_energy_cap: pu,
                status,
                mean_demand_pct: sol.metrics.mean_demand * 100.0,
                mean_noise_increase_db: sol.metrics.mean_noise_increase_db,
                extra_energy_pct: sol.metrics.avg_extra_energy * 100.0,
                gini_demand: sol.metrics.gini_demand,
                gini_noise_increase: sol.metrics.gini_noise_increase,
                objective: sol.metrics.objective,
                iterations: sol.iterations,
            }
        }
        None => DesignPoint {
            index,
            omega,
            delta1: d1,
            delta2: d2,
            mean_noise_cap_db: mu,
            extra_energy_cap: pu,
            status: CellStatus::Error(error.unwrap_or_else(|| "unknown".into())),
            mean_demand_pct: f64::NAN,
            mean_noise_increase_db: f64::NAN,
            extra_energy_pct: f64::NAN,
            gini_demand: f64::NAN,
            gini_noise_increase: f64::NAN,
            objective: f64::NAN,
            iterations: 0,
        },
    }
}

/// Run every grid cell, concurrently up to `plan.workers`, in grid order.
/// Failures are recorded in the point's status, never dropped.
pub fn run_sweep(
    spec: &ProblemSpec,
    plan: &SweepPlan,
    ccp: &CcpOptions,
) -> Result<Vec<DesignPoint>, HarnessError> {
    plan.validate()?;
    let n = plan.n_cells();
    let workers = plan.workers.max(1);
    let mut points: Vec<DesignPoint> = if workers == 1 {
        (0..n).map(|i| solve_cell(spec, plan, ccp, i)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(|i| solve_cell(spec, plan, ccp, i)).collect()
        })
    };
    points.sort_by_key(|p| p.index);
    Ok(points)
}

fn dominates(a: &DesignPoint, b: &DesignPoint) -> bool {
    let ge = a.mean_demand_pct >= b.mean_demand_pct
        && a.mean_noise_increase_db <= b.mean_noise_increase_db
        && a.extra_energy_pct <= b.extra_energy_pct;
    let strict = a.mean_demand_pct > b.mean_demand_pct
        || a.mean_noise_increase_db < b.mean_noise_increase_db
        || a.extra_energy_pct < b.extra_energy_pct;
    ge && strict
}

/// Non-dominated subset under (maximize demand, minimize noise increase,
/// minimize extra energy). Unsolved cells are skipped; exact duplicates keep
/// their first-seen grid order.
pub fn pareto_filter(points: &[DesignPoint]) -> Vec<DesignPoint> {
    let solved: Vec<&DesignPoint> = points.iter().filter(|p| p.status.solved()).collect();
    let mut kept = Vec::new();
    'outer: for (i, p) in solved.iter().enumerate() {
        for (j, q) in solved.iter().enumerate() {
            if i == j {
                continue;
            }
            if dominates(q, p) {
                continue 'outer;
            }
            let equal = q.mean_demand_pct == p.mean_demand_pct
                && q.mean_noise_increase_db == p.mean_noise_increase_db
                && q.extra_energy_pct == p.extra_energy_pct;
            if equal && j < i {
                continue 'outer; // duplicate: earlier grid order wins
            }
        }
        kept.push((*p).clone());
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveAspect {
    Demand,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub index: usize,
    pub mean: f64,
    pub gini: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub aspect: CurveAspect,
    pub bands: Vec<CurveBand>,
}

/// Efficiency-fairness trade-off table.
///
/// For the demand aspect, points are conditioned on the mean-noise-cap
/// setting (one band per distinct cap) and each band keeps its
/// (mean demand up, Gini down) frontier. For the noise aspect, points are
/// conditioned on quantized mean-demand bands and each band keeps its
/// (mean increase down, Gini down) frontier. Bands that end up empty are
/// omitted and reported as warnings.
pub fn efficiency_fairness_curve(
    points: &[DesignPoint],
    aspect: CurveAspect,
    demand_bins: usize,
) -> (CurveTable, Vec<String>) {
    let solved: Vec<&DesignPoint> = points.iter().filter(|p| p.status.solved()).collect();
    let mut warnings = Vec::new();
    let mut bands = Vec::new();
    match aspect {
        CurveAspect::Demand => {
            let mut caps: Vec<f64> = solved.iter().map(|p| p.mean_noise_cap_db).collect();
            caps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            caps.dedup();
            for cap in caps {
                let members: Vec<CurvePoint> = solved
                    .iter()
                    .filter(|p| p.mean_noise_cap_db == cap)
                    .map(|p| CurvePoint { index: p.index, mean: p.mean_demand_pct, gini: p.gini_demand })
                    .collect();
                let frontier = band_frontier(members, true);
                if frontier.is_empty() {
                    warnings.push(format!("demand band mean_noise_cap={cap}: empty, omitted"));
                } else {
                    bands.push(CurveBand { label: format!("mean_noise_cap={cap}"), points: frontier });
                }
            }
        }
        CurveAspect::Noise => {
            let bins = demand_bins.max(1);
            let lo = solved.iter().map(|p| p.mean_demand_pct).fold(f64::INFINITY, f64::min);
            let hi = solved.iter().map(|p| p.mean_demand_pct).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                return (CurveTable { aspect, bands }, vec!["no solved points".into()]);
            }
            let width = ((hi - lo) / bins as f64).max(1e-9);
            for b in 0..bins {
                let (b_lo, b_hi) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
                let members: Vec<CurvePoint> = solved
                    .iter()
                    .filter(|p| {
                        p.mean_demand_pct >= b_lo
                            && (p.mean_demand_pct < b_hi || (b == bins - 1 && p.mean_demand_pct <= b_hi))
                    })
                    .map(|p| CurvePoint {
                        index: p.index,
                        mean: p.mean_noise_increase_db,
                        gini: p.gini_noise_increase,
                    })
                    .collect();
                let label = format!("demand {:.1}-{:.1}%", b_lo, b_hi);
                let frontier = band_frontier(members, false);
                if frontier.is_empty() {
                    warnings.push(format!("noise band {label}: empty, omitted"));
                } else {
                    bands.push(CurveBand { label, points: frontier });
                }
            }
        }
    }
    (CurveTable { aspect, bands }, warnings)
}

/// Keep the non-dominated (mean, gini) points of one band, sorted by mean.
/// `mean_is_good` selects whether larger means are preferable.
fn band_frontier(mut members: Vec<CurvePoint>, mean_is_good: bool) -> Vec<CurvePoint> {
    let better = |a: &CurvePoint, b: &CurvePoint| {
        let mean_ge = if mean_is_good { a.mean >= b.mean } else { a.mean <= b.mean };
        let mean_gt = if mean_is_good { a.mean > b.mean } else { a.mean < b.mean };
        mean_ge && a.gini <= b.gini && (mean_gt || a.gini < b.gini)
    };
    members.sort_by(|a, b| a.index.cmp(&b.index));
    let mut kept: Vec<CurvePoint> = Vec::new();
    'outer: for (i, p) in members.iter().enumerate() {
        for (j, q) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            if better(q, p) {
                continue 'outer;
            }
            if q.mean == p.mean && q.gini == p.gini && j < i {
                continue 'outer;
            }
        }
        kept.push(p.clone());
    }
    kept.sort_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap().then(a.index.cmp(&b.index)));
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Thresholds wide enough to exceed the utility range: the welfare
    /// function reduces to the mean.
    Utilitarian,
    /// Zero thresholds: the welfare function protects the minimum.
    Egalitarian,
}

impl Criterion {
    pub fn thresholds(&self) -> (f64, f64) {
        match self {
            Criterion::Utilitarian => (1.0, 1.0),
            Criterion::Egalitarian => (0.0, 0.0),
        }
    }
}

/// Five-number summary of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    BoxStats {
        min: sorted[0],
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        max: *sorted.last().unwrap(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignComparison {
    pub design_index: usize,
    pub criterion: Criterion,
    pub status: CellStatus,
    /// Distribution of demand-fulfillment ratios (already in [0, 1]).
    pub demand_box: BoxStats,
    /// Distribution of noise increases normalized by the cap to [0, 1].
    pub noise_box: BoxStats,
    pub extra_energy: f64,
    pub mean_demand: f64,
    pub gini_demand: f64,
    pub mean_noise_increase_db: f64,
    pub gini_noise_increase: f64,
}

/// One radar row: the five axes (demand mean, demand fairness, noise
/// mitigation mean, noise mitigation fairness, energy saving), normalized so
/// the best design per axis scores 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub design_index: usize,
    pub values: [f64; 5],
}

pub const RADAR_AXES: [&str; 5] = [
    "demand_fulfillment_mean",
    "demand_fulfillment_fairness",
    "noise_mitigation_mean",
    "noise_mitigation_fairness",
    "energy_saving",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<DesignComparison>,
    pub radar_utilitarian: Vec<RadarRow>,
    pub radar_egalitarian: Vec<RadarRow>,
}

/// Re-solve each selected design under both criteria and produce boxplot and
/// radar tables. Solver failures flag the affected row and drop it from the
/// radar normalization.
pub fn compare_designs(
    spec: &ProblemSpec,
    selected: &[DesignPoint],
    ccp: &CcpOptions,
) -> Result<ComparisonTable, HarnessError> {
    if selected.is_empty() {
        return Err(HarnessError::EmptySelection);
    }
    let mut rows = Vec::new();
    for point in selected {
        for criterion in [Criterion::Utilitarian, Criterion::Egalitarian] {
            let (d1, d2) = criterion.thresholds();
            let cell = apply_design(
                spec,
                point.omega,
                d1,
                d2,
                point.mean_noise_cap_db,
                point.extra_energy_cap,
            );
            let row = match ccp_solve(&cell, ccp) {
                Ok(sol) => {
                    let status = match sol.status {
                        SolveStatus::Converged => CellStatus::Converged,
                        SolveStatus::IterationCap => CellStatus::IterationCap,
                        SolveStatus::Infeasible => CellStatus::Infeasible,
                    };
                    let noise_norm: Vec<f64> = sol
                        .metrics
                        .noise_increase_db
                        .iter()
                        .map(|n| n / cell.max_noise_increase_db)
                        .collect();
                    DesignComparison {
                        design_index: point.index,
                        criterion,
                        status,
                        demand_box: box_stats(&sol.metrics.demand_fulfillment),
                        noise_box: box_stats(&noise_norm),
                        extra_energy: sol.metrics.avg_extra_energy,
                        mean_demand: sol.metrics.mean_demand,
                        gini_demand: sol.metrics.gini_demand,
                        mean_noise_increase_db: sol.metrics.mean_noise_increase_db,
                        gini_noise_increase: sol.metrics.gini_noise_increase,
                    }
                }
                Err(e) => DesignComparison {
                    design_index: point.index,
                    criterion,
                    status: CellStatus::Error(e.to_string()),
                    demand_box: box_stats(&[f64::NAN]),
                    noise_box: box_stats(&[f64::NAN]),
                    extra_energy: f64::NAN,
                    mean_demand: f64::NAN,
                    gini_demand: f64::NAN,
                    mean_noise_increase_db: f64::NAN,
                    gini_noise_increase: f64::NAN,
                },
            };
            rows.push(row);
        }
    }
    let radar = |criterion: Criterion, rows: &[DesignComparison], dmax: f64| -> Vec<RadarRow> {
        let members: Vec<&DesignComparison> = rows
            .iter()
            .filter(|r| r.criterion == criterion && r.status.solved())
            .collect();
        let raw: Vec<(usize, [f64; 5])> = members
            .iter()
            .map(|r| {
                (
                    r.design_index,
                    [
                        r.mean_demand.max(0.0),
                        (1.0 - r.gini_demand).max(0.0),
                        (1.0 - r.mean_noise_increase_db / dmax).max(0.0),
                        (1.0 - r.gini_noise_increase).max(0.0),
                        (1.0 - r.extra_energy).max(0.0),
                    ],
                )
            })
            .collect();
        let mut maxima = [0.0_f64; 5];
        for (_, vals) in &raw {
            for (m, v) in maxima.iter_mut().zip(vals) {
                *m = m.max(*v);
            }
        }
        raw.into_iter()
            .map(|(idx, vals)| {
                let mut norm = [0.0; 5];
                for k in 0..5 {
                    norm[k] = if maxima[k] > 0.0 { vals[k] / maxima[k] } else { 0.0 };
                }
                RadarRow { design_index: idx, values: norm }
            })
            .collect()
    };
    let dmax = spec.max_noise_increase_db;
    Ok(ComparisonTable {
        radar_utilitarian: radar(Criterion::Utilitarian, &rows, dmax),
        radar_egalitarian: radar(Criterion::Egalitarian, &rows, dmax),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_ccp() -> CcpOptions {
        CcpOptions { max_iterations: 20, ..Default::default() }
    }

    fn toy_plan() -> SweepPlan {
        SweepPlan {
            omega: vec![0.0, 1.0],
            delta1: vec![0.3],
            delta2: vec![0.3],
            mean_noise_cap_db: vec![f64::INFINITY],
            extra_energy_cap: vec![f64::INFINITY],
            workers: 1,
            seed: 0,
            replications: 1,
        }
    }

    fn fake_point(index: usize, demand: f64, noise: f64, energy: f64) -> DesignPoint {
        DesignPoint {
            index,
            omega: 0.5,
            delta1: 0.3,
            delta2: 0.3,
            mean_noise_cap_db: f64::INFINITY,
            extra_energy_cap: f64::INFINITY,
            status: CellStatus::Converged,
            mean_demand_pct: demand,
            mean_noise_increase_db: noise,
            extra_energy_pct: energy,
            gini_demand: 0.1,
            gini_noise_increase: 0.2,
            objective: 0.5,
            iterations: 3,
        }
    }

    #[test]
    fn degenerate_sweep_equals_direct_solve() {
        let spec = crate::optimizer::tests::toy_spec();
        let plan = SweepPlan { omega: vec![0.6], ..toy_plan() };
        let points = run_sweep(&spec, &plan, &quick_ccp()).unwrap();
        assert_eq!(points.len(), 1);
        let direct = ccp_solve(&spec, &quick_ccp()).unwrap();
        assert!((points[0].objective - direct.metrics.objective).abs() < 1e-12);
        assert_eq!(points[0].status, CellStatus::Converged);
    }

    #[test]
    fn omega_weight_orders_mean_demand() {
        let spec = crate::optimizer::tests::toy_spec();
        let points = run_sweep(&spec, &toy_plan(), &quick_ccp()).unwrap();
        let at = |w: f64| points.iter().find(|p| p.omega == w).unwrap();
        assert!(at(1.0).mean_demand_pct >= at(0.0).mean_demand_pct);
    }

    #[test]
    fn parallel_and_serial_identical() {
        let spec = crate::optimizer::tests::toy_spec();
        let mut plan = toy_plan();
        plan.delta1 = vec![0.0, 0.3];
        let serial = run_sweep(&spec, &plan, &quick_ccp()).unwrap();
        plan.workers = 4;
        let parallel = run_sweep(&spec, &plan, &quick_ccp()).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn pareto_filter_cases() {
        let a = fake_point(0, 80.0, 5.0, 10.0);
        let b = fake_point(1, 70.0, 6.0, 12.0);
        let kept = pareto_filter(&[a.clone(), b]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].index, 0);
        // single point survives alone
        assert_eq!(pareto_filter(&[a.clone()]).len(), 1);
        // duplicates keep exactly one copy, the earlier index
        let dup = fake_point(5, 80.0, 5.0, 10.0);
        let kept = pareto_filter(&[a, dup]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].index, 0);
        // failed cells are excluded
        let mut bad = fake_point(2, 99.0, 0.0, 0.0);
        bad.status = CellStatus::Error("x".into());
        assert!(pareto_filter(&[bad]).is_empty());
    }

    #[test]
    fn pareto_filter_is_antichain_and_complete() {
        let mut points = Vec::new();
        let mut k = 0;
        for d in [40.0, 60.0, 80.0] {
            for n in [2.0, 8.0] {
                for e in [5.0, 15.0] {
                    points.push(fake_point(k, d + e * 0.1, n, e));
                    k += 1;
                }
            }
        }
        let kept = pareto_filter(&points);
        for a in &kept {
            for b in &kept {
                assert!(!(a.index != b.index && dominates(a, b) && dominates(b, a)));
                if a.index != b.index {
                    assert!(!dominates(a, b) || !dominates(b, a));
                }
            }
        }
        // every removed point is dominated by some kept point (or a duplicate)
        for p in &points {
            if kept.iter().any(|kp| kp.index == p.index) {
                continue;
            }
            assert!(
                kept.iter().any(|kp| dominates(kp, p)
                    || (kp.mean_demand_pct == p.mean_demand_pct
                        && kp.mean_noise_increase_db == p.mean_noise_increase_db
                        && kp.extra_energy_pct == p.extra_energy_pct)),
                "point {} removed but not dominated",
                p.index
            );
        }
    }

    #[test]
    fn curve_bands_and_frontier() {
        let mut points = vec![
            fake_point(0, 50.0, 4.0, 0.0),
            fake_point(1, 60.0, 4.0, 0.0),
            fake_point(2, 55.0, 4.0, 0.0),
        ];
        points[0].mean_noise_cap_db = 5.0;
        points[1].mean_noise_cap_db = 5.0;
        points[2].mean_noise_cap_db = 10.0;
        points[0].gini_demand = 0.05;
        points[1].gini_demand = 0.2;
        points[2].gini_demand = 0.1;
        let (table, warnings) = efficiency_fairness_curve(&points, CurveAspect::Demand, 4);
        assert!(warnings.is_empty());
        assert_eq!(table.bands.len(), 2); // one per distinct cap
        // within the cap=5 band both points survive (one fairer, one higher)
        assert_eq!(table.bands[0].points.len(), 2);
        // frontier property: nothing dominates anything else within a band
        for band in &table.bands {
            for a in &band.points {
                for b in &band.points {
                    assert!(!(a.mean > b.mean && a.gini < b.gini));
                }
            }
        }
    }

    #[test]
    fn comparison_boxes_and_radar() {
        let spec = crate::optimizer::tests::toy_spec();
        let selected = [fake_point(0, 50.0, 1.0, 0.0)];
        let table = compare_designs(&spec, &selected, &quick_ccp()).unwrap();
        assert_eq!(table.rows.len(), 2);
        // symmetric two-route instance equalizes demand: zero IQR
        for row in &table.rows {
            assert!(row.status.solved());
            assert!((row.demand_box.q3 - row.demand_box.q1).abs() < 1e-9);
        }
        // egalitarian never increases demand inequality at matched settings
        let util = &table.rows[0];
        let egal = &table.rows[1];
        assert!(egal.gini_demand <= util.gini_demand + 1e-9);
        // radar normalization puts the best design at 1 on each axis
        for rows in [&table.radar_utilitarian, &table.radar_egalitarian] {
            for k in 0..5 {
                let best = rows.iter().map(|r| r.values[k]).fold(0.0, f64::max);
                assert!((best - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_stats_quartiles() {
        let s = box_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
    }

    #[test]
    fn plan_validation() {
        let mut plan = toy_plan();
        plan.omega = vec![];
        assert!(plan.validate().is_err());
        let mut plan = toy_plan();
        plan.omega = vec![1.5];
        assert!(plan.validate().is_err());
        let mut plan = toy_plan();
        plan.replications = 0;
        assert!(plan.validate().is_err());
    }
}
