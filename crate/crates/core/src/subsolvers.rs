//! Convex blocks of the WMMSE surrogate problem.
//!
//! With equalizers and weights frozen in a [`WmmseState`], every link's
//! averaged WMSE is
//!
//! ```text
//! ξ̄(p, F) = Σ_{s ∈ received} p_s f_s^H Ψ̄ f_s + t̄ σ² − 2 √p_d Re{θ̄ f_d} + v̄
//! ```
//!
//! which is a convex quadratic in `q = √p` (for fixed `F`) and in `F` (for
//! fixed `p`). The power and transmissive blocks are posed as QCQPs and
//! handed to [`crate::qcqp`]; the common-rate block is a one-constraint LP
//! solved exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::design::Design;
use crate::error::Result;
use crate::qcqp::{self, BarrierSettings, Qcqp, Quadratic, Status};
use crate::wmmse::{Link, WmmseState};

/// Default KKT tolerance of the block solvers.
pub const DEFAULT_TOL: f64 = 1e-6;

/// How links, rate variables and constraints are assembled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Common plus private streams. Rate variables are the common-rate
    /// shares `C_k`, held fixed in the power and transmissive blocks.
    Rsma,
    /// Private streams only; common power, column and rates pinned to zero.
    Sdma,
    /// One stream per user decoded by SIC. Each stream has a rate variable
    /// `r_l <= 1 − ξ̄` for every decoder, optimized jointly in every block.
    Noma,
}

/// Averaged coefficients plus the constants of the surrogate problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemData {
    pub state: WmmseState,
    pub noise_variance: f64,
    pub max_power: f64,
    pub qos_threshold: f64,
    pub weights: Vec<f64>,
    pub formulation: Formulation,
}

/// Outcome of one block solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    /// Surrogate objective at the returned point.
    pub objective: f64,
    /// Surrogate objective at the incoming point.
    pub incoming_objective: f64,
    /// Raw solver variables.
    pub solution: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: Status,
    pub phase1_slack: Option<f64>,
}

impl SolverReport {
    fn exact(objective: f64, incoming: f64, solution: Vec<f64>) -> Self {
        SolverReport {
            objective,
            incoming_objective: incoming,
            solution,
            kkt_residual: 0.0,
            iterations: 0,
            status: Status::Optimal,
            phase1_slack: None,
        }
    }
}

/// `Σ_row coef ξ̄_link + Σ a r <= rhs`.
#[derive(Debug, Clone)]
struct Row {
    links: Vec<(usize, f64)>,
    rates: Vec<(usize, f64)>,
    rhs: f64,
}

#[derive(Debug, Clone)]
struct Program {
    /// Streams whose power/column are optimization variables.
    active: Vec<usize>,
    objective_links: Vec<(usize, f64)>,
    rate_objective: Vec<f64>,
    rows: Vec<Row>,
    rate_lower: Vec<f64>,
    joint_rates: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockKind {
    Power,
    Transmissive,
}

impl BlockKind {
    fn name(self) -> &'static str {
        match self {
            BlockKind::Power => "power",
            BlockKind::Transmissive => "transmissive",
        }
    }
}

/// Updated design and rate variables after a block solve.
#[derive(Debug, Clone)]
pub(crate) struct BlockOutcome {
    pub design: Design,
    pub rates: Vec<f64>,
    pub report: SolverReport,
}

impl SubproblemData {
    pub fn num_users(&self) -> usize {
        self.weights.len()
    }

    fn num_streams(&self) -> usize {
        self.num_users() + 1
    }

    fn program(&self) -> Program {
        let k_users = self.num_users();
        let st = &self.state;
        match self.formulation {
            Formulation::Rsma | Formulation::Sdma => {
                let rsma = self.formulation == Formulation::Rsma;
                let mut rows = Vec::new();
                if rsma {
                    for k in 0..k_users {
                        rows.push(Row {
                            links: vec![(st.common(k), 1.0)],
                            rates: (0..k_users).map(|j| (j, 1.0)).collect(),
                            rhs: 1.0,
                        });
                    }
                }
                for k in 0..k_users {
                    rows.push(Row {
                        links: vec![(st.private(k), 1.0)],
                        rates: vec![(k, -1.0)],
                        rhs: 1.0 - self.qos_threshold,
                    });
                }
                Program {
                    active: if rsma {
                        (0..=k_users).collect()
                    } else {
                        (1..=k_users).collect()
                    },
                    objective_links: (0..k_users)
                        .map(|k| (st.private(k), self.weights[k]))
                        .collect(),
                    rate_objective: self.weights.iter().map(|u| -u).collect(),
                    rows,
                    rate_lower: vec![0.0; k_users],
                    joint_rates: false,
                }
            }
            Formulation::Noma => Program {
                active: (1..=k_users).collect(),
                objective_links: Vec::new(),
                rate_objective: self.weights.iter().map(|u| -u).collect(),
                rows: st
                    .links
                    .iter()
                    .enumerate()
                    .map(|(i, l)| Row {
                        links: vec![(i, 1.0)],
                        rates: vec![(l.stream - 1, 1.0)],
                        rhs: 1.0,
                    })
                    .collect(),
                rate_lower: vec![self.qos_threshold.max(0.0); k_users],
                joint_rates: true,
            },
        }
    }

    /// Surrogate WMSE of every link at `design`.
    pub fn surrogates(&self, design: &Design) -> Vec<f64> {
        self.state.surrogates(design, self.noise_variance)
    }

    /// `Λ_i,k = Σ_{k'} p_k' f_k'^H Ψ̄_i,k f_k'` over the private streams.
    pub fn interference_term(&self, link: usize, design: &Design) -> f64 {
        let avg = &self.state.averages[link];
        (1..self.num_streams())
            .map(|j| {
                let p = design.power[j];
                if p == 0.0 {
                    0.0
                } else {
                    p * avg.quadratic(&design.transmissive.column(j).into_owned())
                }
            })
            .sum()
    }

    /// `μ = √p_d Re{θ̄ f_d}` for the link's decoded stream.
    pub fn signal_term(&self, link: usize, design: &Design) -> f64 {
        let l = &self.state.links[link];
        design.power[l.stream].sqrt()
            * self.state.averages[link].linear(&design.transmissive.column(l.stream).into_owned())
    }

    /// `Σ_k u_k (Λ_p,k + t̄_p,k σ² − 2 μ_p,k + v̄_p,k − C_k)`, assembled from
    /// the averaged coefficients (RSMA / SDMA layouts).
    pub fn p4_objective(&self, design: &Design) -> f64 {
        (0..self.num_users())
            .map(|k| {
                let li = self.state.private(k);
                let a = &self.state.averages[li];
                self.weights[k]
                    * (self.interference_term(li, design) + a.t * self.noise_variance
                        - 2.0 * self.signal_term(li, design)
                        + a.v
                        - design.common_rates[k])
            })
            .sum()
    }

    /// Surrogate objective for the given design and rate variables.
    pub fn objective(&self, design: &Design, rates: &[f64]) -> f64 {
        let prog = self.program();
        let xi = self.surrogates(design);
        prog.objective_links
            .iter()
            .map(|&(l, w)| w * xi[l])
            .sum::<f64>()
            + prog
                .rate_objective
                .iter()
                .zip(rates)
                .map(|(a, r)| a * r)
                .sum::<f64>()
    }

    /// Largest violation of the coupled surrogate constraints.
    pub fn max_violation(&self, design: &Design, rates: &[f64]) -> f64 {
        let prog = self.program();
        let xi = self.surrogates(design);
        let rows = prog.rows.iter().map(|row| {
            row.links.iter().map(|&(l, c)| c * xi[l]).sum::<f64>()
                + row.rates.iter().map(|&(j, a)| a * rates[j]).sum::<f64>()
                - row.rhs
        });
        let lower = prog.rate_lower.iter().zip(rates).map(|(lo, r)| lo - r);
        rows.chain(lower).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rate variables at which the incumbent sits: `design.common_rates` for
    /// RSMA/SDMA, and `min_i (1 − ξ̄_i,l)` per NOMA stream.
    pub fn incumbent_rates(&self, design: &Design) -> Vec<f64> {
        match self.formulation {
            Formulation::Rsma | Formulation::Sdma => design.common_rates.iter().copied().collect(),
            Formulation::Noma => {
                let xi = self.surrogates(design);
                let mut r = vec![f64::INFINITY; self.num_users()];
                for (l, x) in self.state.links.iter().zip(&xi) {
                    let j = l.stream - 1;
                    r[j] = r[j].min(1.0 - x);
                }
                r.iter()
                    .map(|v| if v.is_finite() { *v } else { 0.0 })
                    .collect()
            }
        }
    }

    /// Subproblem matrices as JSON for offline comparison.
    pub fn dump_json(&self) -> Result<String> {
        let pair = |z: &Complex64| [z.re, z.im];
        let links: Vec<_> = self
            .state
            .links
            .iter()
            .zip(&self.state.averages)
            .map(|(l, a)| {
                serde_json::json!({
                    "user": l.user,
                    "stream": l.stream,
                    "interferers": l.interferers,
                    "t": a.t,
                    "v": a.v,
                    "theta": a.theta.iter().map(pair).collect::<Vec<_>>(),
                    "psi": a.psi.row_iter().map(|r| r.iter().map(pair).collect::<Vec<_>>()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let doc = serde_json::json!({
            "formulation": self.formulation,
            "noise_variance": self.noise_variance,
            "max_power": self.max_power,
            "qos_threshold": self.qos_threshold,
            "weights": self.weights,
            "links": links,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Builds the QCQP of one block around `design` (other block fixed).
    fn block_problem(
        &self,
        kind: BlockKind,
        design: &Design,
        rates: &[f64],
    ) -> (Qcqp, DVector<f64>, Layout) {
        let prog = self.program();
        let n = design.num_subarrays();
        let width = match kind {
            BlockKind::Power => 1,
            BlockKind::Transmissive => 2 * n,
        };
        let mut var_of = vec![None; self.num_streams()];
        for (i, &s) in prog.active.iter().enumerate() {
            var_of[s] = Some(i * width);
        }
        let rate_offset = prog.active.len() * width;
        let k_users = self.num_users();
        let dim = rate_offset + if prog.joint_rates { k_users } else { 0 };
        let layout = Layout {
            kind,
            width,
            var_of,
            rate_offset,
            joint_rates: prog.joint_rates,
        };

        let links: Vec<Quadratic> = (0..self.state.links.len())
            .map(|l| self.link_quadratic(kind, l, design, &layout, dim))
            .collect();

        let mut objective = Quadratic::zero(dim);
        for &(l, w) in &prog.objective_links {
            objective.add_scaled(&links[l], w);
        }
        for (j, a) in prog.rate_objective.iter().enumerate() {
            if prog.joint_rates {
                objective.linear[rate_offset + j] += a;
            } else {
                objective.constant += a * rates[j];
            }
        }
        let mut problem = Qcqp::new(objective);
        for row in &prog.rows {
            let mut c = Quadratic::zero(dim);
            for &(l, coef) in &row.links {
                c.add_scaled(&links[l], coef);
            }
            for &(j, a) in &row.rates {
                if prog.joint_rates {
                    c.linear[rate_offset + j] += a;
                } else {
                    c.constant += a * rates[j];
                }
            }
            c.constant -= row.rhs;
            problem.push(c);
        }
        if prog.joint_rates {
            for (j, lo) in prog.rate_lower.iter().enumerate() {
                let mut c = Quadratic::zero(dim);
                c.linear[rate_offset + j] = -1.0;
                c.constant = *lo;
                problem.push(c);
            }
        }
        match kind {
            BlockKind::Power => {
                let mut ball = Quadratic::zero(dim);
                for i in 0..prog.active.len() {
                    ball.add_square(i, 1.0);
                    let mut nonneg = Quadratic::zero(dim);
                    nonneg.linear[i] = -1.0;
                    problem.push(nonneg);
                }
                ball.constant = -self.max_power;
                problem.push(ball);
            }
            BlockKind::Transmissive => {
                for i in 0..prog.active.len() {
                    for e in 0..n {
                        let mut disk = Quadratic::zero(dim);
                        disk.add_square(i * width + e, 1.0);
                        disk.add_square(i * width + n + e, 1.0);
                        disk.constant = -1.0;
                        problem.push(disk);
                    }
                }
            }
        }

        let mut x0 = DVector::zeros(dim);
        for (i, &s) in prog.active.iter().enumerate() {
            match kind {
                BlockKind::Power => x0[i] = design.power[s].max(0.0).sqrt(),
                BlockKind::Transmissive => {
                    for e in 0..n {
                        let z = design.transmissive[(e, s)];
                        x0[i * width + e] = z.re;
                        x0[i * width + n + e] = z.im;
                    }
                }
            }
        }
        if prog.joint_rates {
            for j in 0..k_users {
                x0[rate_offset + j] = rates[j];
            }
        }
        (problem, x0, layout)
    }

    /// Link WMSE as a quadratic in the block variables.
    fn link_quadratic(
        &self,
        kind: BlockKind,
        l: usize,
        design: &Design,
        layout: &Layout,
        dim: usize,
    ) -> Quadratic {
        let link: &Link = &self.state.links[l];
        let avg = &self.state.averages[l];
        let mut q = Quadratic::zero(dim);
        q.constant = avg.t * self.noise_variance + avg.v;
        match kind {
            BlockKind::Power => {
                for s in link.received_streams() {
                    let f = design.transmissive.column(s).into_owned();
                    match layout.var_of[s] {
                        Some(i) => q.add_square(i, avg.quadratic(&f)),
                        None => q.constant += design.power[s] * avg.quadratic(&f),
                    }
                }
                let f = design.transmissive.column(link.stream).into_owned();
                let b = avg.linear(&f);
                match layout.var_of[link.stream] {
                    Some(i) => q.linear[i] -= 2.0 * b,
                    None => q.constant -= 2.0 * design.power[link.stream].sqrt() * b,
                }
            }
            BlockKind::Transmissive => {
                let n = design.num_subarrays();
                let lifted = lift_hermitian(&avg.psi);
                for s in link.received_streams() {
                    let p = design.power[s];
                    if p == 0.0 {
                        continue;
                    }
                    match layout.var_of[s] {
                        Some(off) => q.add_block(off, &lifted, p),
                        None => {
                            q.constant +=
                                p * avg.quadratic(&design.transmissive.column(s).into_owned())
                        }
                    }
                }
                let sp = design.power[link.stream].sqrt();
                match layout.var_of[link.stream] {
                    Some(off) if sp != 0.0 => {
                        for e in 0..n {
                            q.linear[off + e] -= 2.0 * sp * avg.theta[e].re;
                            q.linear[off + n + e] += 2.0 * sp * avg.theta[e].im;
                        }
                    }
                    Some(_) => {}
                    None => {
                        q.constant -= 2.0
                            * sp
                            * avg.linear(&design.transmissive.column(link.stream).into_owned())
                    }
                }
            }
        }
        q
    }

    /// Solves one block; the returned design differs from `design` only in
    /// that block's variables.
    pub(crate) fn solve_block(
        &self,
        kind: BlockKind,
        design: &Design,
        rates: &[f64],
        tol: f64,
    ) -> BlockOutcome {
        let incoming = self.objective(design, rates);
        let (problem, x0, layout) = self.block_problem(kind, design, rates);
        let settings = BarrierSettings {
            tol,
            gap: (tol * 1e-2).min(1e-8),
            ..BarrierSettings::default()
        };
        let sol = qcqp::solve(&problem, &x0, &settings);
        log::trace!(
            "{} block: status {:?}, {} Newton steps, kkt {:.2e}",
            kind.name(),
            sol.status,
            sol.newton_steps,
            sol.kkt_residual
        );
        let mut out = design.clone();
        let mut new_rates = rates.to_vec();
        if sol.status != Status::Infeasible {
            layout.write_back(&sol.x, &mut out, &mut new_rates);
        }
        let report = SolverReport {
            objective: if sol.status == Status::Infeasible {
                incoming
            } else {
                self.objective(&out, &new_rates)
            },
            incoming_objective: incoming,
            solution: sol.x.iter().copied().collect(),
            kkt_residual: sol.kkt_residual,
            iterations: sol.newton_steps,
            status: sol.status,
            phase1_slack: sol.phase1_slack,
        };
        BlockOutcome {
            design: out,
            rates: new_rates,
            report,
        }
    }
}

struct Layout {
    kind: BlockKind,
    width: usize,
    var_of: Vec<Option<usize>>,
    rate_offset: usize,
    joint_rates: bool,
}

impl Layout {
    fn write_back(&self, x: &DVector<f64>, design: &mut Design, rates: &mut [f64]) {
        for (s, var) in self.var_of.iter().enumerate() {
            let Some(off) = *var else { continue };
            match self.kind {
                BlockKind::Power => design.power[s] = x[off].max(0.0).powi(2),
                BlockKind::Transmissive => {
                    let n = self.width / 2;
                    for e in 0..n {
                        design.transmissive[(e, s)] = Complex64::new(x[off + e], x[off + n + e]);
                    }
                }
            }
        }
        if self.joint_rates {
            for (j, r) in rates.iter_mut().enumerate() {
                *r = x[self.rate_offset + j];
            }
        }
    }
}

/// Real symmetric `[[A, −B], [B, A]]` for Hermitian `Ψ = A + iB`, so that
/// `f^H Ψ f = [x; y]^T L [x; y]` with `f = x + iy`.
pub fn lift_hermitian(psi: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = psi.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            // Symmetrize against roundoff.
            let z = (psi[(i, j)] + psi[(j, i)].conj()) * 0.5;
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// Power block with `F` and `c` fixed. Returns the new power vector.
pub fn solve_power(
    data: &SubproblemData,
    design: &Design,
    tol: f64,
) -> (DVector<f64>, SolverReport) {
    let rates = data.incumbent_rates(design);
    let out = data.solve_block(BlockKind::Power, design, &rates, tol);
    (out.design.power, out.report)
}

/// Transmissive block with `p` and `c` fixed. Returns the new matrix `F`.
pub fn solve_transmissive(
    data: &SubproblemData,
    design: &Design,
    tol: f64,
) -> (DMatrix<Complex64>, SolverReport) {
    let rates = data.incumbent_rates(design);
    let out = data.solve_block(BlockKind::Transmissive, design, &rates, tol);
    (out.design.transmissive, out.report)
}

/// Exact solution of
/// `max Σ u_k C_k  s.t.  Σ C_k <= budget,  C_k >= lower_k`:
/// every user gets its lower bound and the remaining budget goes to the
/// largest weight (ties to the lowest index). `None` when the lower bounds
/// exceed the budget by more than `tol`.
pub fn allocate_common_rate(
    budget: f64,
    lower: &[f64],
    weights: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let need: f64 = lower.iter().sum();
    if need > budget + tol {
        return None;
    }
    let mut c = lower.to_vec();
    let spare = (budget - need).max(0.0);
    if spare > 0.0 && !c.is_empty() {
        let mut best = 0;
        for (k, u) in weights.iter().enumerate() {
            if *u > weights[best] {
                best = k;
            }
        }
        c[best] += spare;
    }
    Some(c)
}

/// Common-rate block with `p` and `F` fixed, given the surrogate WMSEs of the
/// common and private links at the current point.
pub fn solve_common_rate(
    data: &SubproblemData,
    xi_common: &[f64],
    xi_private: &[f64],
    tol: f64,
) -> (DVector<f64>, SolverReport) {
    let k_users = data.num_users();
    let budget = match data.formulation {
        Formulation::Rsma => xi_common
            .iter()
            .map(|x| 1.0 - x)
            .fold(f64::INFINITY, f64::min),
        _ => 0.0,
    };
    let lower: Vec<f64> = xi_private
        .iter()
        .map(|x| (x - 1.0 + data.qos_threshold).max(0.0))
        .collect();
    let weighted_private: f64 = data
        .weights
        .iter()
        .zip(xi_private)
        .map(|(u, x)| u * x)
        .sum();
    match allocate_common_rate(budget.max(0.0), &lower, &data.weights, tol) {
        Some(c) if budget >= -tol => {
            let objective =
                weighted_private - data.weights.iter().zip(&c).map(|(u, x)| u * x).sum::<f64>();
            let c = DVector::from_vec(c);
            let report = SolverReport::exact(objective, f64::NAN, c.iter().copied().collect());
            (c, report)
        }
        _ => {
            let need: f64 = lower.iter().sum();
            let report = SolverReport {
                objective: f64::NAN,
                incoming_objective: f64::NAN,
                solution: Vec::new(),
                kkt_residual: f64::INFINITY,
                iterations: 0,
                status: Status::Infeasible,
                phase1_slack: Some(need - budget.max(0.0)),
            };
            (DVector::zeros(k_users), report)
        }
    }
}

/// Runs the common-rate block at `design`, filling in the incoming objective.
pub(crate) fn common_rate_block(
    data: &SubproblemData,
    design: &Design,
    tol: f64,
) -> (DVector<f64>, SolverReport) {
    let xi = data.surrogates(design);
    let k_users = data.num_users();
    let xi_c: Vec<f64> = (0..k_users).map(|k| xi[data.state.common(k)]).collect();
    let xi_p: Vec<f64> = (0..k_users).map(|k| xi[data.state.private(k)]).collect();
    let (c, mut report) = solve_common_rate(data, &xi_c, &xi_p, tol);
    report.incoming_objective = data.objective(design, &data.incumbent_rates(design));
    (c, report)
}
