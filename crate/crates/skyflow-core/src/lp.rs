//! Linear programming: problem container and the embedded solver.
//!
//! The solver is a bounded-variable revised primal simplex with a dense
//! explicit basis inverse, Dantzig pricing with a Bland's-rule fallback for
//! degeneracy, and a composite (artificial-free) phase 1 that also repairs
//! warm-started bases. Problems here are desk scale (a few thousand rows),
//! where a dense inverse with product-form updates is simple and fast enough.
//!
//! Conventions: one slack variable per row (`a·x + s = rhs` with slack bounds
//! encoding the sense), maximization objective, variable bounds may be
//! infinite on either side. Degenerate entering ties break toward the lowest
//! variable index, so repeated solves of the same model are bit-identical.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {var}, but the program has {n_vars}")]
    BadVarIndex { row: usize, var: usize, n_vars: usize },
    #[error("variable {var} has empty bound interval [{lower}, {upper}]")]
    EmptyBounds { var: usize, lower: f64, upper: f64 },
    #[error("coefficient for variable {var} in row {row} is not finite")]
    NonFiniteCoefficient { row: usize, var: usize },
    #[error("iteration limit {0} exceeded")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("warm-start basis is unusable: {0}")]
    BadBasis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct RawRow {
    coeffs: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

/// A linear program: maximize `objective · x` subject to rows and bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<RawRow>,
}

impl LinearProgram {
    /// A program over `n_vars` variables, all initially `[0, +inf)` with zero
    /// objective.
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn objective_coeff(&self, var: usize) -> f64 {
        self.objective[var]
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Append `coeffs · x (sense) rhs`. Duplicate variable entries in one row
    /// are summed.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(RawRow { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<(), LpError> {
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                if v >= self.n_vars {
                    return Err(LpError::BadVarIndex { row: r, var: v, n_vars: self.n_vars });
                }
                if !c.is_finite() {
                    return Err(LpError::NonFiniteCoefficient { row: r, var: v });
                }
            }
        }
        for v in 0..self.n_vars {
            if self.lower[v] > self.upper[v] {
                return Err(LpError::EmptyBounds { var: v, lower: self.lower[v], upper: self.upper[v] });
            }
        }
        Ok(())
    }
}

/// Resolved basis of an optimal solve, reusable to warm-start a related model
/// with the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisState {
    /// Basic variable per row (structural `0..n`, slack `n..n+m`).
    pub basic: Vec<usize>,
    /// For each variable, whether a nonbasic variable rests at its upper bound.
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: BasisState,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Absolute bound-violation tolerance.
    pub feas_tol: f64,
    /// Reduced-cost tolerance.
    pub opt_tol: f64,
    /// Hard iteration cap; `None` picks a size-based default.
    pub max_iters: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { feas_tol: 1e-7, opt_tol: 1e-9, max_iters: None }
    }
}

/// Pluggable LP backend contract.
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve_warm(&self, lp: &LinearProgram, warm: Option<&BasisState>) -> Result<LpOutcome, LpError>;

    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, LpError> {
        self.solve_warm(lp, None)
    }
}

/// The embedded revised simplex backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexBackend {
    pub options: SimplexOptions,
}

impl LpBackend for SimplexBackend {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn solve_warm(&self, lp: &LinearProgram, warm: Option<&BasisState>) -> Result<LpOutcome, LpError> {
        lp.validate()?;
        if let Some(basis) = warm {
            // a stale basis can be unusable outright or drift into numerical
            // trouble mid-solve; either way a cold start is the fallback
            let mut w = Worker::build(lp, self.options);
            if w.install_basis(basis).is_ok() {
                match w.run() {
                    Err(LpError::Numerical(_)) | Err(LpError::BadBasis(_)) => {}
                    other => return other,
                }
            }
        }
        Worker::build(lp, self.options).run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

const PIVOT_TOL: f64 = 1e-7;
const ZERO_TOL: f64 = 1e-12;
const DEGENERATE_STREAK_FOR_BLAND: usize = 60;
const REFACTOR_INTERVAL: usize = 512;

struct Worker {
    m: usize,
    nt: usize, // structural + slack
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    obj_min: Vec<f64>, // minimize form
    b: Vec<f64>,
    binv: Vec<f64>, // m x m row-major
    basic: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    opts: SimplexOptions,
    iterations: usize,
    degenerate_streak: usize,
    n_structural: usize,
    obj_scale: f64,
    /// Devex pricing weights, one per variable.
    devex: Vec<f64>,
    /// Basis changes since the inverse was last rebuilt from scratch.
    pivots_since_factor: usize,
}

impl Worker {
    fn build(lp: &LinearProgram, opts: SimplexOptions) -> Worker {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let nt = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nt];
        let mut b = vec![0.0; m];
        let mut lower = Vec::with_capacity(nt);
        let mut upper = Vec::with_capacity(nt);
        lower.extend_from_slice(&lp.lower);
        upper.extend_from_slice(&lp.upper);
        for (r, row) in lp.rows.iter().enumerate() {
            // row equilibration: divide by the largest structural coefficient
            let scale = row
                .coeffs
                .iter()
                .map(|&(_, c)| c.abs())
                .fold(0.0_f64, f64::max)
                .max(1e-12);
            let mut sums: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            for &(v, c) in &row.coeffs {
                match sums.iter_mut().find(|(sv, _)| *sv == v) {
                    Some((_, sc)) => *sc += c / scale,
                    None => sums.push((v, c / scale)),
                }
            }
            for (v, c) in sums {
                if c != 0.0 {
                    cols[v].push((r, c));
                }
            }
            b[r] = row.rhs / scale;
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cols[n + r].push((r, 1.0));
        }
        // minimize the negated objective, normalized for tolerance stability
        let obj_scale = lp
            .objective
            .iter()
            .map(|c| c.abs())
            .fold(0.0_f64, f64::max)
            .max(1e-12);
        let mut obj_min = vec![0.0; nt];
        for v in 0..n {
            obj_min[v] = -lp.objective[v] / obj_scale;
        }

        let mut w = Worker {
            m,
            nt,
            cols,
            lower,
            upper,
            obj_min,
            b,
            binv: identity(m),
            basic: (n..nt).collect(),
            state: vec![VarState::AtLower; nt],
            x: vec![0.0; nt],
            opts,
            iterations: 0,
            degenerate_streak: 0,
            n_structural: n,
            obj_scale,
            devex: vec![1.0; nt],
            pivots_since_factor: 0,
        };
        for v in 0..nt {
            w.state[v] = w.default_nonbasic_state(v);
            w.x[v] = w.nonbasic_value(v);
        }
        for (r, &s) in w.basic.clone().iter().enumerate() {
            w.state[s] = VarState::Basic(r);
        }
        w.recompute_basics();
        w
    }

    fn default_nonbasic_state(&self, v: usize) -> VarState {
        if self.lower[v].is_finite() {
            VarState::AtLower
        } else if self.upper[v].is_finite() {
            VarState::AtUpper
        } else {
            VarState::FreeZero
        }
    }

    fn nonbasic_value(&self, v: usize) -> f64 {
        match self.state[v] {
            VarState::AtLower => self.lower[v],
            VarState::AtUpper => self.upper[v],
            VarState::FreeZero => 0.0,
            VarState::Basic(_) => self.x[v],
        }
    }

    /// Install an external basis: refactorize and set nonbasic states.
    fn install_basis(&mut self, basis: &BasisState) -> Result<(), LpError> {
        if basis.basic.len() != self.m || basis.at_upper.len() != self.nt {
            return Err(LpError::BadBasis("shape mismatch".into()));
        }
        let mut seen = vec![false; self.nt];
        for &v in &basis.basic {
            if v >= self.nt || seen[v] {
                return Err(LpError::BadBasis("duplicate or out-of-range variable".into()));
            }
            seen[v] = true;
        }
        self.basic = basis.basic.clone();
        for v in 0..self.nt {
            self.state[v] = if seen[v] {
                VarState::Basic(0) // fixed below
            } else if basis.at_upper[v] && self.upper[v].is_finite() {
                VarState::AtUpper
            } else if self.lower[v].is_finite() {
                VarState::AtLower
            } else if self.upper[v].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        for (r, &v) in self.basic.iter().enumerate() {
            self.state[v] = VarState::Basic(r);
        }
        for v in 0..self.nt {
            if !matches!(self.state[v], VarState::Basic(_)) {
                self.x[v] = self.nonbasic_value(v);
            }
        }
        self.refactorize()?;
        self.recompute_basics();
        self.pivots_since_factor = 0;
        Ok(())
    }

    /// Rebuild `binv` from the basic columns by Gauss-Jordan elimination.
    fn refactorize(&mut self) -> Result<(), LpError> {
        let m = self.m;
        // bmat = B augmented; reduce in place while applying ops to inv
        let mut bmat = vec![0.0; m * m];
        for (c, &v) in self.basic.iter().enumerate() {
            for &(r, val) in &self.cols[v] {
                bmat[r * m + c] = val;
            }
        }
        let mut inv = identity(m);
        for col in 0..m {
            // partial pivot
            let mut piv = col;
            let mut best = bmat[col * m + col].abs();
            for r in col + 1..m {
                let a = bmat[r * m + col].abs();
                if a > best {
                    best = a;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(LpError::BadBasis(format!("singular basis at column {col}")));
            }
            if piv != col {
                for k in 0..m {
                    bmat.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = bmat[col * m + col];
            for k in 0..m {
                bmat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = bmat[r * m + col];
                if f.abs() < ZERO_TOL {
                    continue;
                }
                for k in 0..m {
                    bmat[r * m + k] -= f * bmat[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        // binv = inv * P where row permutation is already folded in by the swaps
        self.binv = inv;
        Ok(())
    }

    /// x_B = B^{-1} (b - N x_N)
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for v in 0..self.nt {
            if matches!(self.state[v], VarState::Basic(_)) {
                continue;
            }
            let xv = self.nonbasic_value(v);
            if xv != 0.0 {
                for &(row, val) in &self.cols[v] {
                    r[row] -= val * xv;
                }
            }
        }
        let mut xb = vec![0.0; m];
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(&r) {
                acc += a * b;
            }
            xb[i] = acc;
        }
        for (i, &v) in self.basic.iter().enumerate() {
            self.x[v] = xb[i];
        }
    }

    fn violation(&self, v: usize) -> f64 {
        let x = self.x[v];
        if x < self.lower[v] - self.opts.feas_tol {
            self.lower[v] - x
        } else if x > self.upper[v] + self.opts.feas_tol {
            x - self.upper[v]
        } else {
            0.0
        }
    }

    fn total_infeasibility(&self) -> f64 {
        self.basic.iter().map(|&v| self.violation(v)).sum()
    }

    /// Phase-aware cost of a basic variable in minimize form.
    fn basic_cost(&self, v: usize, phase1: bool) -> f64 {
        if phase1 {
            if self.x[v] > self.upper[v] + self.opts.feas_tol {
                1.0
            } else if self.x[v] < self.lower[v] - self.opts.feas_tol {
                -1.0
            } else {
                0.0
            }
        } else {
            self.obj_min[v]
        }
    }

    /// π = c_B^T B^{-1}, exploiting sparsity of c_B.
    fn btran_pi(&self, phase1: bool) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (i, &v) in self.basic.iter().enumerate() {
            let c = self.basic_cost(v, phase1);
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (p, a) in pi.iter_mut().zip(row) {
                *p += c * a;
            }
        }
        pi
    }

    fn reduced_cost(&self, v: usize, pi: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.obj_min[v] };
        let mut d = c;
        for &(r, a) in &self.cols[v] {
            d -= pi[r] * a;
        }
        d
    }

    /// α = B^{-1} A_j for the entering column.
    fn ftran(&self, v: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, a) in &self.cols[v] {
            if a == 0.0 {
                continue;
            }
            for i in 0..m {
                alpha[i] += a * self.binv[i * m + r];
            }
        }
        alpha
    }

    /// Rebuild the inverse from the current basis; if the basis has drifted
    /// into singularity, fall back to the all-slack basis rather than fail.
    fn refresh(&mut self) {
        if self.refactorize().is_err() {
            self.reset_to_slack_basis();
            return;
        }
        self.recompute_basics();
        self.pivots_since_factor = 0;
    }

    /// Last-ditch repair: forget the basis, keep nonbasic values where
    /// possible, and let phase 1 rebuild feasibility.
    fn reset_to_slack_basis(&mut self) {
        let n = self.n_structural;
        for v in 0..self.nt {
            self.state[v] = self.default_nonbasic_state(v);
            self.x[v] = self.nonbasic_value(v);
        }
        self.basic = (n..self.nt).collect();
        for (r, &s) in self.basic.clone().iter().enumerate() {
            self.state[s] = VarState::Basic(r);
        }
        self.binv = identity(self.m);
        self.devex.iter_mut().for_each(|w| *w = 1.0);
        self.degenerate_streak = 0;
        self.pivots_since_factor = 0;
        self.recompute_basics();
    }

    fn run(&mut self) -> Result<LpOutcome, LpError> {
        let iter_cap = self
            .opts
            .max_iters
            .unwrap_or_else(|| 5000 + 200 * (self.m + self.n_structural));
        let feas_goal = self.opts.feas_tol * (1.0 + self.m as f64).sqrt();
        loop {
            // phase 1: drive total bound infeasibility to zero
            loop {
                if self.pivots_since_factor >= REFACTOR_INTERVAL {
                    self.refresh();
                }
                if self.total_infeasibility() <= feas_goal {
                    break;
                }
                match self.iterate(true, iter_cap)? {
                    StepResult::Moved => {}
                    StepResult::NoDirection => {
                        if self.pivots_since_factor == 0 {
                            return Ok(LpOutcome::Infeasible);
                        }
                        // conclusions only count on a fresh factorization
                        self.refresh();
                    }
                    StepResult::Unbounded => {
                        // the phase-1 objective is bounded below; an
                        // unbounded ray means the factorization went stale
                        if self.pivots_since_factor == 0 {
                            return Err(LpError::Numerical("phase 1 reported an unbounded ray".into()));
                        }
                        self.refresh();
                    }
                }
            }
            // phase 2
            self.degenerate_streak = 0;
            self.devex.iter_mut().for_each(|w| *w = 1.0);
            let optimal = loop {
                if self.pivots_since_factor >= REFACTOR_INTERVAL {
                    self.refresh();
                    if self.total_infeasibility() > feas_goal {
                        break false; // drift pushed a basic out of bounds
                    }
                }
                match self.iterate(false, iter_cap)? {
                    StepResult::Moved => {}
                    StepResult::NoDirection => {
                        if self.pivots_since_factor == 0 {
                            if self.total_infeasibility() <= feas_goal {
                                break true;
                            }
                            break false;
                        }
                        self.refresh();
                        if self.total_infeasibility() > feas_goal {
                            break false;
                        }
                    }
                    StepResult::Unbounded => {
                        if self.pivots_since_factor == 0 {
                            return Ok(LpOutcome::Unbounded);
                        }
                        self.refresh();
                        if self.total_infeasibility() > feas_goal {
                            break false;
                        }
                    }
                }
            };
            if optimal {
                break;
            }
        }
        let x = self.x[..self.n_structural].to_vec();
        let mut objective = 0.0;
        for (v, &xv) in x.iter().enumerate() {
            objective += -self.obj_min[v] * self.obj_scale * xv;
        }
        let at_upper = (0..self.nt).map(|v| self.state[v] == VarState::AtUpper).collect();
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            iterations: self.iterations,
            basis: BasisState { basic: self.basic.clone(), at_upper },
        }))
    }

    fn iterate(&mut self, phase1: bool, iter_cap: usize) -> Result<StepResult, LpError> {
        self.iterations += 1;
        if self.iterations > iter_cap {
            return Err(LpError::IterationLimit(iter_cap));
        }
        let bland = self.degenerate_streak >= DEGENERATE_STREAK_FOR_BLAND;
        let pi = self.btran_pi(phase1);

        // entering variable: direction +1 increases from lower/free, -1
        // decreases from upper/free; devex-weighted pricing unless Bland's
        // rule is active
        let mut entering: Option<(usize, f64, f64, f64)> = None; // (var, direction, score, d)
        for v in 0..self.nt {
            if self.lower[v] == self.upper[v] {
                continue; // fixed variables (equality slacks) never enter
            }
            let (up_ok, down_ok) = match self.state[v] {
                VarState::Basic(_) => continue,
                VarState::AtLower => (true, false),
                VarState::AtUpper => (false, true),
                VarState::FreeZero => (true, true),
            };
            let d = self.reduced_cost(v, &pi, phase1);
            let dir = if up_ok && d < -self.opts.opt_tol {
                1.0
            } else if down_ok && d > self.opts.opt_tol {
                -1.0
            } else {
                continue;
            };
            if bland {
                entering = Some((v, dir, 0.0, d));
                break;
            }
            let score = d * d / self.devex[v];
            if entering.map_or(true, |(_, _, s, _)| score > s) {
                entering = Some((v, dir, score, d));
            }
        }
        let (enter, dir, _, d_enter) = match entering {
            Some(e) => e,
            None => return Ok(StepResult::NoDirection),
        };

        let alpha = self.ftran(enter);
        if phase1 && !bland {
            self.long_step_phase1(enter, dir, -d_enter.abs(), &alpha)
        } else {
            self.classic_step(enter, dir, &alpha, bland)
        }
    }

    /// Textbook single-breakpoint ratio test and pivot.
    fn classic_step(&mut self, enter: usize, dir: f64, alpha: &[f64], bland: bool) -> Result<StepResult, LpError> {
        let own_span = if dir > 0.0 {
            self.upper[enter] - self.nonbasic_value(enter)
        } else {
            self.nonbasic_value(enter) - self.lower[enter]
        };
        let mut t_max = own_span; // may be +inf
        let mut leaving: Option<(usize, bool)> = None; // (row, leaves_at_upper)
        for (i, &v) in self.basic.iter().enumerate() {
            let a = dir * alpha[i];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let xv = self.x[v];
            let above = xv > self.upper[v] + self.opts.feas_tol;
            let below = xv < self.lower[v] - self.opts.feas_tol;
            // x_v moves by -a * t
            let (limit, at_upper) = if a > 0.0 {
                // decreasing
                if above {
                    (Some(xv - self.upper[v]), true)
                } else if below {
                    (None, false) // already below; keeps worsening, priced in
                } else if self.lower[v].is_finite() {
                    (Some((xv - self.lower[v]).max(0.0)), false)
                } else {
                    (None, false)
                }
            } else {
                // increasing
                if below {
                    (Some(self.lower[v] - xv), false)
                } else if above {
                    (None, true)
                } else if self.upper[v].is_finite() {
                    (Some((self.upper[v] - xv).max(0.0)), true)
                } else {
                    (None, true)
                }
            };
            if let Some(room) = limit {
                let ratio = room / a.abs();
                let better = match leaving {
                    None => ratio < t_max - ZERO_TOL,
                    Some((row, _)) => {
                        ratio < t_max - ZERO_TOL
                            || (ratio < t_max + ZERO_TOL && {
                                if bland {
                                    v < self.basic[row]
                                } else {
                                    alpha[i].abs() > alpha[row].abs()
                                }
                            })
                    }
                };
                if better {
                    t_max = ratio.max(0.0);
                    leaving = Some((i, at_upper));
                }
            }
        }

        if t_max.is_infinite() {
            return Ok(StepResult::Unbounded);
        }
        self.count_degenerate(t_max);
        match leaving {
            None => {
                self.apply_bound_flip(enter, dir, t_max, alpha);
                Ok(StepResult::Moved)
            }
            Some((row, leaves_at_upper)) => {
                self.apply_pivot(row, leaves_at_upper, t_max, enter, dir, alpha)?;
                Ok(StepResult::Moved)
            }
        }
    }

    /// Piecewise-linear phase-1 ratio test: step through bound crossings
    /// while the total-infeasibility rate keeps improving, pivoting at the
    /// breakpoint where it stops. One such step can retire many violations
    /// that the single-breakpoint test would need separate pivots for.
    fn long_step_phase1(
        &mut self,
        enter: usize,
        dir: f64,
        initial_rate: f64,
        alpha: &[f64],
    ) -> Result<StepResult, LpError> {
        const OWN_BOUND: usize = usize::MAX;
        // (t, gain, row, leaves_at_upper)
        let mut breakpoints: Vec<(f64, f64, usize, bool)> = Vec::new();
        let own_span = if dir > 0.0 {
            self.upper[enter] - self.nonbasic_value(enter)
        } else {
            self.nonbasic_value(enter) - self.lower[enter]
        };
        if own_span.is_finite() {
            breakpoints.push((own_span.max(0.0), f64::INFINITY, OWN_BOUND, dir > 0.0));
        }
        for (i, &v) in self.basic.iter().enumerate() {
            let a = dir * alpha[i];
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let xv = self.x[v];
            let gain = a.abs();
            if a > 0.0 {
                // x_v decreases: may cross its upper (if above), then lower
                if xv > self.upper[v] + self.opts.feas_tol {
                    breakpoints.push(((xv - self.upper[v]) / a, gain, i, true));
                }
                if self.lower[v].is_finite() && xv > self.lower[v] - self.opts.feas_tol {
                    breakpoints.push((((xv - self.lower[v]) / a).max(0.0), gain, i, false));
                }
            } else {
                // x_v increases: may cross its lower (if below), then upper
                let a_abs = -a;
                if xv < self.lower[v] - self.opts.feas_tol {
                    breakpoints.push(((self.lower[v] - xv) / a_abs, gain, i, false));
                }
                if self.upper[v].is_finite() && xv < self.upper[v] + self.opts.feas_tol {
                    breakpoints.push((((self.upper[v] - xv) / a_abs).max(0.0), gain, i, true));
                }
            }
        }
        if breakpoints.is_empty() {
            return Ok(StepResult::Unbounded);
        }
        breakpoints.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.2.cmp(&b.2)));
        let mut rate = initial_rate;
        let mut stop = 0;
        for (k, bp) in breakpoints.iter().enumerate() {
            stop = k;
            rate += bp.1;
            if rate >= -self.opts.opt_tol {
                break;
            }
        }
        // among breakpoints tied at the stopping step, pivot on the largest
        // |alpha| for numerical stability
        let t_stop = breakpoints[stop].0;
        let mut chosen = breakpoints[stop];
        for bp in &breakpoints[..stop] {
            if bp.0 >= t_stop - 1e-9 * (1.0 + t_stop) && bp.1 > chosen.1 {
                chosen = *bp;
            }
        }
        let (t, _, row, at_upper) = chosen;
        self.count_degenerate(t);
        if row == OWN_BOUND {
            self.apply_bound_flip(enter, dir, t, alpha);
        } else {
            self.apply_pivot(row, at_upper, t, enter, dir, alpha)?;
        }
        Ok(StepResult::Moved)
    }

    fn count_degenerate(&mut self, t: f64) {
        if t <= ZERO_TOL {
            self.degenerate_streak += 1;
        } else {
            self.degenerate_streak = 0;
        }
    }

    fn apply_bound_flip(&mut self, enter: usize, dir: f64, t: f64, alpha: &[f64]) {
        for (i, &v) in self.basic.iter().enumerate() {
            self.x[v] -= dir * t * alpha[i];
        }
        self.state[enter] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
        self.x[enter] = self.nonbasic_value(enter);
    }

    fn apply_pivot(
        &mut self,
        row: usize,
        leaves_at_upper: bool,
        t: f64,
        enter: usize,
        dir: f64,
        alpha: &[f64],
    ) -> Result<(), LpError> {
        let new_enter_value = self.nonbasic_value(enter) + dir * t;
        for (i, &v) in self.basic.iter().enumerate() {
            self.x[v] -= dir * t * alpha[i];
        }
        let leave_var = self.basic[row];
        self.x[leave_var] = if leaves_at_upper { self.upper[leave_var] } else { self.lower[leave_var] };
        self.state[leave_var] = if leaves_at_upper {
            VarState::AtUpper
        } else if self.lower[leave_var].is_finite() {
            VarState::AtLower
        } else {
            VarState::FreeZero
        };
        self.basic[row] = enter;
        self.state[enter] = VarState::Basic(row);
        self.x[enter] = new_enter_value;
        let pivot_element = alpha[row];
        let w_enter = self.devex[enter];
        self.update_binv(row, alpha)?;
        self.devex_update(row, leave_var, pivot_element, w_enter);
        Ok(())
    }

    /// Reference-framework devex weight update using the post-pivot inverse
    /// row; heuristic, so approximations here affect speed, not correctness.
    fn devex_update(&mut self, row: usize, leave_var: usize, pivot_element: f64, w_enter: f64) {
        let m = self.m;
        let brow = &self.binv[row * m..(row + 1) * m];
        let mut overflow = false;
        for v in 0..self.nt {
            if matches!(self.state[v], VarState::Basic(_)) || self.lower[v] == self.upper[v] {
                continue;
            }
            let mut gamma = 0.0;
            for &(r, a) in &self.cols[v] {
                gamma += brow[r] * a;
            }
            if gamma != 0.0 {
                let candidate = gamma * gamma * w_enter;
                if candidate > self.devex[v] {
                    self.devex[v] = candidate;
                }
            }
            overflow |= self.devex[v] > 1e8;
        }
        self.devex[leave_var] = (w_enter / (pivot_element * pivot_element)).max(1.0);
        if overflow {
            self.devex.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    /// Product-form update of the explicit inverse after pivoting `alpha` into
    /// `row`.
    fn update_binv(&mut self, row: usize, alpha: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let piv = alpha[row];
        self.pivots_since_factor += 1;
        if piv.abs() < PIVOT_TOL * 0.1 {
            // rare: rebuild from scratch instead of dividing by ~0
            self.refresh();
            return Ok(());
        }
        let inv_piv = 1.0 / piv;
        // scale pivot row first
        {
            let r = &mut self.binv[row * m..(row + 1) * m];
            for v in r.iter_mut() {
                *v *= inv_piv;
            }
        }
        let pivot_row: Vec<f64> = self.binv[row * m..(row + 1) * m].to_vec();
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = alpha[i];
            if f.abs() < ZERO_TOL {
                continue;
            }
            let r = &mut self.binv[i * m..(i + 1) * m];
            for (rv, pv) in r.iter_mut().zip(&pivot_row) {
                *rv -= f * pv;
            }
        }
        Ok(())
    }
}

enum StepResult {
    Moved,
    NoDirection,
    Unbounded,
}

fn identity(m: usize) -> Vec<f64> {
    let mut id = vec![0.0; m * m];
    for i in 0..m {
        id[i * m + i] = 1.0;
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn solve(lp: &LinearProgram) -> LpOutcome {
        SimplexBackend::default().solve(lp).unwrap()
    }

    fn optimal(lp: &LinearProgram) -> LpSolution {
        match solve(lp) {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn single_variable_cap() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0)], Sense::Le, 3.0);
        let s = optimal(&lp);
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0)], Sense::Le, -1.0);
        assert!(matches!(solve(&lp), LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0);
        assert!(matches!(solve(&lp), LpOutcome::Unbounded));
    }

    #[test]
    fn equality_and_free_variables() {
        // maximize -|x| encoded as max -(p+n), x = p - n free via equality
        let mut lp = LinearProgram::new(3);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_objective(1, -1.0);
        lp.set_objective(2, -1.0);
        lp.add_row(vec![(0, 1.0), (1, -1.0), (2, 1.0)], Sense::Eq, 0.0);
        lp.add_row(vec![(0, 1.0)], Sense::Eq, -4.0);
        let s = optimal(&lp);
        assert!((s.x[0] + 4.0).abs() < 1e-8);
        assert!((s.objective + 4.0).abs() < 1e-8);
    }

    #[test]
    fn bounded_variables_flip() {
        // max x + 2y, x in [1, 4], y in [-2, 5], x + y <= 6
        let mut lp = LinearProgram::new(2);
        lp.set_bounds(0, 1.0, 4.0);
        lp.set_bounds(1, -2.0, 5.0);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 2.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 6.0);
        let s = optimal(&lp);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!((s.x[1] - 5.0).abs() < 1e-9);
        assert!((s.objective - 11.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds_and_ge_rows() {
        // min x + y st x + 2y >= 4, 3x + y >= 6, x,y in [-10, 10]
        let mut lp = LinearProgram::new(2);
        lp.set_bounds(0, -10.0, 10.0);
        lp.set_bounds(1, -10.0, 10.0);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -1.0);
        lp.add_row(vec![(0, 1.0), (1, 2.0)], Sense::Ge, 4.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0)], Sense::Ge, 6.0);
        let s = optimal(&lp);
        // optimum at intersection (1.6, 1.2)
        assert!((s.x[0] - 1.6).abs() < 1e-8);
        assert!((s.x[1] - 1.2).abs() < 1e-8);
    }

    #[test]
    fn degenerate_ties_resolved_deterministically() {
        // several identical columns; lowest index should enter first
        let mut lp = LinearProgram::new(3);
        for v in 0..3 {
            lp.set_objective(v, 1.0);
        }
        lp.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 1.0);
        let a = optimal(&lp);
        let b = optimal(&lp);
        assert_eq!(a.x, b.x);
        assert!((a.x[0] - 1.0).abs() < 1e-9);
        assert_eq!(a.x[1], 0.0);
    }

    #[test]
    fn transportation_problem() {
        // 2 supplies (10, 20), 2 demands (15, 15), costs [[1,4],[3,2]]
        // minimize => maximize negative; optimum ships 10 from s0->d0,
        // 5 from s1->d0, 15 from s1->d1, cost 10 + 15 + 30 = 55
        let mut lp = LinearProgram::new(4); // x00 x01 x10 x11
        let costs = [1.0, 4.0, 3.0, 2.0];
        for (v, c) in costs.iter().enumerate() {
            lp.set_objective(v, -c);
        }
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 10.0);
        lp.add_row(vec![(2, 1.0), (3, 1.0)], Sense::Le, 20.0);
        lp.add_row(vec![(0, 1.0), (2, 1.0)], Sense::Eq, 15.0);
        lp.add_row(vec![(1, 1.0), (3, 1.0)], Sense::Eq, 15.0);
        let s = optimal(&lp);
        assert!((s.objective + 55.0).abs() < 1e-8, "{}", s.objective);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let mut lp = LinearProgram::new(3);
        lp.set_objective(0, 2.0);
        lp.set_objective(1, 3.0);
        lp.set_objective(2, 1.0);
        lp.add_row(vec![(0, 1.0), (1, 2.0), (2, 1.0)], Sense::Le, 10.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0)], Sense::Le, 15.0);
        let cold = optimal(&lp);
        // perturb the rhs and warm start
        let mut lp2 = lp.clone();
        lp2.rows[0].rhs = 11.0;
        let warm = match SimplexBackend::default().solve_warm(&lp2, Some(&cold.basis)).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("{other:?}"),
        };
        let cold2 = match SimplexBackend::default().solve(&lp2).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("{other:?}"),
        };
        assert!((warm.objective - cold2.objective).abs() < 1e-8);
        assert!(warm.iterations <= cold2.iterations);
    }

    /// Strong-duality cross check on random inequality-form programs:
    /// max c·x st Ax <= b, 0 <= x <= u has dual
    /// min b·y + u·w st A^T y + w >= c, y, w >= 0.
    #[test]
    fn strong_duality_on_random_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..40 {
            let n = rng.gen_range(2..7);
            let m = rng.gen_range(1..6);
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect())
                .collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..8.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();

            let mut primal = LinearProgram::new(n);
            for v in 0..n {
                primal.set_objective(v, c[v]);
                primal.set_bounds(v, 0.0, u[v]);
            }
            for r in 0..m {
                let coeffs: Vec<(usize, f64)> = (0..n).map(|v| (v, a[r][v])).collect();
                primal.add_row(coeffs, Sense::Le, b[r]);
            }

            let mut dual = LinearProgram::new(m + n);
            for r in 0..m {
                dual.set_objective(r, -b[r]);
            }
            for v in 0..n {
                dual.set_objective(m + v, -u[v]);
            }
            for v in 0..n {
                let mut coeffs: Vec<(usize, f64)> = (0..m).map(|r| (r, a[r][v])).collect();
                coeffs.push((m + v, 1.0));
                dual.add_row(coeffs, Sense::Ge, c[v]);
            }

            let p = optimal(&primal);
            let d = optimal(&dual);
            assert!(
                (p.objective + d.objective).abs() < 1e-6,
                "case {case}: primal {} vs dual {}",
                p.objective,
                -d.objective
            );
            // primal solution is feasible
            for r in 0..m {
                let lhs: f64 = (0..n).map(|v| a[r][v] * p.x[v]).sum();
                assert!(lhs <= b[r] + 1e-7);
            }
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let mut lp = LinearProgram::new(n);
        for v in 0..n {
            lp.set_objective(v, rng.gen_range(-1.0..2.0));
            lp.set_bounds(v, 0.0, rng.gen_range(1.0..5.0));
        }
        for _ in 0..6 {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|v| (v, rng.gen_range(-1.0..2.0))).collect();
            lp.add_row(coeffs, Sense::Le, rng.gen_range(1.0..6.0));
        }
        let a = optimal(&lp);
        let b = optimal(&lp);
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
