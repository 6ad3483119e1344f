//! Primal log-barrier interior-point solver for small dense convex QCQPs.
//!
//! ```text
//! minimize    f_0(x)
//! subject to  f_i(x) <= 0,   i = 1..m
//! f_i(x) = Σ_b x_b^T Q_ib x_b + l_i^T x + c_i,   Q_ib ⪰ 0
//! ```
//!
//! Quadratic parts are stored as dense symmetric blocks on contiguous index
//! ranges, which matches the per-column structure of the beamforming blocks
//! and keeps box/disk constraints cheap. A phase-1 problem
//! (`min s  s.t. f_i(x) <= s, s >= -1`) produces a strictly feasible start
//! when the supplied point is not one.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Dense symmetric block `Q` acting on `x[offset .. offset + Q.nrows()]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub offset: usize,
    pub matrix: DMatrix<f64>,
}

/// `Σ_b x_b^T Q_b x_b + l^T x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub blocks: Vec<Block>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl Quadratic {
    pub fn zero(dim: usize) -> Self {
        Quadratic {
            blocks: Vec::new(),
            linear: DVector::zeros(dim),
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Adds `scale * Q` at `offset`, merging with an existing block of the
    /// same placement.
    pub fn add_block(&mut self, offset: usize, matrix: &DMatrix<f64>, scale: f64) {
        if scale == 0.0 {
            return;
        }
        debug_assert!(offset + matrix.nrows() <= self.dim());
        if let Some(b) = self
            .blocks
            .iter_mut()
            .find(|b| b.offset == offset && b.matrix.nrows() == matrix.nrows())
        {
            b.matrix += matrix * scale;
        } else {
            self.blocks.push(Block {
                offset,
                matrix: matrix * scale,
            });
        }
    }

    /// Adds `scale * x_i^2`.
    pub fn add_square(&mut self, i: usize, scale: f64) {
        self.add_block(i, &DMatrix::from_element(1, 1, 1.0), scale);
    }

    /// Adds `self + scale * other`.
    pub fn add_scaled(&mut self, other: &Quadratic, scale: f64) {
        for b in &other.blocks {
            self.add_block(b.offset, &b.matrix, scale);
        }
        self.linear.axpy(scale, &other.linear, 1.0);
        self.constant += scale * other.constant;
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.linear.dot(x) + self.constant;
        for b in &self.blocks {
            let xb = x.rows(b.offset, b.matrix.nrows());
            v += (xb.transpose() * &b.matrix * xb)[(0, 0)];
        }
        v
    }

    /// Writes `∇f(x)` into `out`.
    pub fn gradient(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.copy_from(&self.linear);
        for b in &self.blocks {
            let n = b.matrix.nrows();
            let gb = &b.matrix * x.rows(b.offset, n) * 2.0;
            let mut dst = out.rows_mut(b.offset, n);
            dst += gb;
        }
    }

    /// `H += 2 * scale * Q` over all blocks.
    fn add_hessian(&self, scale: f64, h: &mut DMatrix<f64>) {
        for b in &self.blocks {
            let n = b.matrix.nrows();
            let mut view = h.view_mut((b.offset, b.offset), (n, n));
            view += &b.matrix * (2.0 * scale);
        }
    }

    /// Indices with a nonzero gradient contribution.
    fn support(&self) -> Vec<usize> {
        let mut mark = vec![false; self.dim()];
        for b in &self.blocks {
            for i in b.offset..b.offset + b.matrix.nrows() {
                mark[i] = true;
            }
        }
        for (i, l) in self.linear.iter().enumerate() {
            if *l != 0.0 {
                mark[i] = true;
            }
        }
        mark.iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
            .collect()
    }

    /// True when the function does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        self.linear.iter().all(|l| *l == 0.0)
            && self
                .blocks
                .iter()
                .all(|b| b.matrix.iter().all(|q| *q == 0.0))
    }

    /// Same function over `dim + extra` variables (new ones unused).
    fn extended(&self, extra: usize) -> Quadratic {
        let mut linear = DVector::zeros(self.dim() + extra);
        linear.rows_mut(0, self.dim()).copy_from(&self.linear);
        Quadratic {
            blocks: self.blocks.clone(),
            linear,
            constant: self.constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qcqp {
    pub objective: Quadratic,
    pub constraints: Vec<Quadratic>,
}

impl Qcqp {
    pub fn new(objective: Quadratic) -> Self {
        Qcqp {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn push(&mut self, c: Quadratic) {
        debug_assert_eq!(c.dim(), self.dim());
        self.constraints.push(c);
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSettings {
    /// Target KKT residual (relative stationarity, complementarity, primal).
    pub tol: f64,
    /// Target duality gap `m / t` of the last centering stage.
    pub gap: f64,
    /// Newton steps allowed per centering stage.
    pub max_newton: usize,
    /// Barrier parameter growth factor.
    pub mu: f64,
    pub t0: f64,
    /// Constraint violation accepted when comparing against the start point.
    pub feas_tol: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            tol: 1e-6,
            gap: 1e-8,
            max_newton: 200,
            mu: 10.0,
            t0: 1.0,
            feas_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub newton_steps: usize,
    pub status: Status,
    /// Optimal phase-1 slack when phase 1 ran.
    pub phase1_slack: Option<f64>,
    /// The supplied start point was returned because it was at least as good.
    pub kept_start: bool,
}

struct Centered {
    x: DVector<f64>,
    t: f64,
    steps: usize,
    exhausted: bool,
    stationarity: f64,
}

/// Solves `problem` starting from `x0`, which need not be feasible.
///
/// If `x0` is feasible within `feas_tol` and at least as good as the barrier
/// solution, `x0` is returned, so the result never has a worse objective
/// than a feasible start.
pub fn solve(problem: &Qcqp, x0: &DVector<f64>, settings: &BarrierSettings) -> QcqpSolution {
    let mut active = Vec::with_capacity(problem.constraints.len());
    let mut constant_violation = f64::NEG_INFINITY;
    for c in &problem.constraints {
        if c.is_constant() {
            constant_violation = constant_violation.max(c.constant);
        } else {
            active.push(c.clone());
        }
    }
    let start_violation = problem.max_violation(x0);
    let start_feasible = start_violation <= settings.feas_tol;
    let infeasible = |slack: f64, steps: usize| QcqpSolution {
        x: x0.clone(),
        objective: problem.objective.value(x0),
        kkt_residual: f64::INFINITY,
        newton_steps: steps,
        status: Status::Infeasible,
        phase1_slack: Some(slack),
        kept_start: true,
    };
    if constant_violation > settings.feas_tol {
        return infeasible(constant_violation, 0);
    }
    let reduced = Qcqp {
        objective: problem.objective.clone(),
        constraints: active,
    };

    let mut steps = 0;
    let mut phase1_slack = None;
    let strictly_feasible = reduced.constraints.iter().all(|c| c.value(x0) < 0.0);
    let start = if strictly_feasible {
        x0.clone()
    } else {
        let (x, s, n) = phase_one(&reduced, x0, settings);
        steps += n;
        phase1_slack = Some(s);
        if s >= 0.0 {
            // No interior point; the start is the only usable candidate.
            if start_feasible {
                return QcqpSolution {
                    x: x0.clone(),
                    objective: problem.objective.value(x0),
                    kkt_residual: start_violation.max(0.0),
                    newton_steps: steps,
                    status: Status::Optimal,
                    phase1_slack,
                    kept_start: true,
                };
            }
            return infeasible(s, steps);
        }
        x
    };

    let c = center_path(&reduced, start, settings);
    steps += c.steps;
    let m = reduced.constraints.len() as f64;
    let gap = m / c.t;
    let violation = reduced.max_violation(&c.x).max(0.0);
    let kkt = c.stationarity.max(gap).max(violation);
    // An early stage running out of steps is harmless if later stages
    // still reach the tolerance.
    if c.exhausted {
        log::debug!(
            "barrier: a centering stage used all {} Newton steps",
            settings.max_newton
        );
    }
    let status = if kkt <= settings.tol {
        Status::Optimal
    } else {
        Status::MaxIterations
    };
    let obj = problem.objective.value(&c.x);
    if start_feasible {
        let obj0 = problem.objective.value(x0);
        if obj0 <= obj {
            return QcqpSolution {
                x: x0.clone(),
                objective: obj0,
                kkt_residual: kkt,
                newton_steps: steps,
                status,
                phase1_slack,
                kept_start: true,
            };
        }
    }
    QcqpSolution {
        x: c.x,
        objective: obj,
        kkt_residual: kkt,
        newton_steps: steps,
        status,
        phase1_slack,
        kept_start: false,
    }
}

/// Returns a point with maximal (capped) slack, the optimal slack value and
/// the Newton steps spent.
fn phase_one(
    problem: &Qcqp,
    x0: &DVector<f64>,
    settings: &BarrierSettings,
) -> (DVector<f64>, f64, usize) {
    let n = problem.dim();
    let mut objective = Quadratic::zero(n + 1);
    objective.linear[n] = 1.0;
    let mut p1 = Qcqp::new(objective);
    for c in &problem.constraints {
        let mut e = c.extended(1);
        e.linear[n] = -1.0;
        p1.push(e);
    }
    // s >= -1 keeps the phase-1 problem bounded.
    let mut floor = Quadratic::zero(n + 1);
    floor.linear[n] = -1.0;
    floor.constant = -1.0;
    p1.push(floor);

    let s0 = problem.max_violation(x0).max(-0.5) + 1.0;
    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(x0);
    z0[n] = s0;
    let settings = BarrierSettings {
        gap: 1e-7,
        ..*settings
    };
    let c = center_path_until(&p1, z0, &settings, |z| z[n] < -0.5);
    let x = c.x.rows(0, n).into_owned();
    // The true max violation is at most the slack variable.
    (x.clone(), problem.max_violation(&x), c.steps)
}

fn center_path(problem: &Qcqp, x: DVector<f64>, settings: &BarrierSettings) -> Centered {
    center_path_until(problem, x, settings, |_| false)
}

fn center_path_until(
    problem: &Qcqp,
    mut x: DVector<f64>,
    settings: &BarrierSettings,
    done: impl Fn(&DVector<f64>) -> bool,
) -> Centered {
    let m = problem.constraints.len();
    let supports: Vec<Vec<usize>> = problem.constraints.iter().map(|c| c.support()).collect();
    let mut t = settings.t0;
    let mut steps = 0;
    let mut exhausted = false;
    let mut stationarity;
    if m == 0 {
        // Unconstrained: one Newton stage at t = 1 is exact for a quadratic.
        let (xn, n, ex, st) = newton_center(problem, &supports, x, 1.0, settings);
        return Centered {
            x: xn,
            t: f64::INFINITY,
            steps: n,
            exhausted: ex,
            stationarity: st,
        };
    }
    loop {
        let (xn, n, ex, st) = newton_center(problem, &supports, x, t, settings);
        x = xn;
        steps += n;
        stationarity = st;
        exhausted |= ex;
        if done(&x) || (m as f64) / t <= settings.gap {
            break;
        }
        t *= settings.mu;
    }
    Centered {
        x,
        t,
        steps,
        exhausted,
        stationarity,
    }
}

/// Damped Newton on `t f_0 − Σ log(−f_i)`. Returns the centered point,
/// steps taken, whether the step budget ran out, and the relative
/// stationarity residual of the associated dual point.
///
/// The barrier function is self-concordant, so the damped step
/// `1 / (1 + λ)` needs no sufficient-decrease test. That matters once
/// `t f_0` is large: barrier values then carry too few significant digits
/// to compare.
fn newton_center(
    problem: &Qcqp,
    supports: &[Vec<usize>],
    mut x: DVector<f64>,
    t: f64,
    settings: &BarrierSettings,
) -> (DVector<f64>, usize, bool, f64) {
    let n = problem.dim();
    let mut grad = DVector::zeros(n);
    let mut gi = DVector::zeros(n);
    let mut g0 = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut steps = 0;
    let mut stalled = 0;
    let mut last_decrement = f64::INFINITY;
    if !strictly_inside(problem, &x) {
        return (x, 0, false, f64::INFINITY);
    }
    loop {
        problem.objective.gradient(&x, &mut g0);
        grad.copy_from(&g0);
        grad *= t;
        hess.fill(0.0);
        problem.objective.add_hessian(t, &mut hess);
        for (c, sup) in problem.constraints.iter().zip(supports) {
            let g = c.value(&x);
            let inv = -1.0 / g;
            c.gradient(&x, &mut gi);
            for &i in sup {
                grad[i] += inv * gi[i];
            }
            c.add_hessian(inv, &mut hess);
            let inv2 = inv * inv;
            for &i in sup {
                let a = gi[i] * inv2;
                for &j in sup {
                    hess[(i, j)] += a * gi[j];
                }
            }
        }
        let scale = g0.amax().max(1.0);
        let stationarity = grad.amax() / t / scale;
        let step = match solve_spd(&hess, &(-&grad)) {
            Some(s) => s,
            None => return (x, steps, false, stationarity),
        };
        let decrement = -grad.dot(&step);
        if !(decrement > 1e-14) {
            return (x, steps, false, stationarity);
        }
        // Roundoff floor: the decrement stops shrinking near the center.
        if decrement < 1e-6 {
            if decrement >= 0.5 * last_decrement {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if stalled >= 3 {
                return (x, steps, false, stationarity);
            }
        }
        last_decrement = decrement;
        if steps >= settings.max_newton {
            return (x, steps, true, stationarity);
        }
        let lambda = decrement.sqrt();
        let mut alpha = if lambda <= 0.25 {
            1.0
        } else {
            1.0 / (1.0 + lambda)
        };
        let mut trial = &x + &step * alpha;
        while !strictly_inside(problem, &trial) {
            alpha *= 0.5;
            if alpha < 1e-14 {
                return (x, steps, false, stationarity);
            }
            trial = &x + &step * alpha;
        }
        x = trial;
        steps += 1;
    }
}

fn strictly_inside(problem: &Qcqp, x: &DVector<f64>) -> bool {
    problem.constraints.iter().all(|c| c.value(x) < 0.0)
}

/// Cholesky solve with a growing diagonal shift on failure.
fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let diag = h.diagonal().amax().max(1e-300);
    let mut shift = diag * 1e-14;
    for _ in 0..12 {
        let mut hs = h.clone();
        for i in 0..hs.nrows() {
            hs[(i, i)] += shift;
        }
        if let Some(ch) = hs.cholesky() {
            return Some(ch.solve(rhs));
        }
        shift *= 100.0;
    }
    None
}
