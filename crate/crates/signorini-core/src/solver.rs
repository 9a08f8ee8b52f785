//! Monotone finite-difference solver for Dirichlet, thick obstacle and
//! thin obstacle problems driven by a convex Bellman operator.
//!
//! Discretization: centered second differences on the diagonal; mixed
//! derivatives enter through corner second differences oriented by the
//! sign of the coefficient, with the matched weight removed from the
//! axis terms. Diagonal dominance of every member makes every off-center
//! weight nonnegative, so each frozen-policy system is an M-matrix and
//! the scheme obeys a discrete comparison principle.
//!
//! Outer loop: Howard policy iteration (argmax member per node, ties to
//! the lowest index). Inner loop: projected SOR sweeps on the frozen
//! system, driven to a tenth of the requested tolerance; the obstacle is
//! enforced by projection onto {u >= obstacle} inside each sweep.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Inherent f64 methods shadow the trait when std is linked (tests).
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::{Grid, NodeClass, ScalarField};
use crate::operators::BellmanFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Jacobi,
    GaussSeidel,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::Jacobi => "jacobi",
            SweepMode::GaussSeidel => "gauss_seidel",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Absolute tolerance on the discrete operator residual.
    pub tol: f64,
    /// Cap on total sweeps; None picks 10 * |family| * N^2.
    pub max_iters: Option<usize>,
    pub sweep_mode: SweepMode,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iters: None,
            sweep_mode: SweepMode::GaussSeidel,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SolveError {
    NoConvergence {
        last_residual: f64,
        iterations: usize,
    },
    InfeasibleObstacle,
    InvalidInput(&'static str),
}

impl SolveError {
    pub fn kind(&self) -> &'static str {
        match self {
            SolveError::NoConvergence { .. } => "no-convergence",
            SolveError::InfeasibleObstacle => "infeasible-obstacle",
            SolveError::InvalidInput(_) => "invalid-spec",
        }
    }
}

impl core::fmt::Display for SolveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolveError::NoConvergence {
                last_residual,
                iterations,
            } => write!(
                f,
                "no-convergence: residual {last_residual:.3e} after {iterations} sweeps"
            ),
            SolveError::InfeasibleObstacle => {
                write!(f, "infeasible-obstacle: obstacle exceeds boundary data")
            }
            SolveError::InvalidInput(m) => write!(f, "invalid-spec: {m}"),
        }
    }
}

/// Converged-solve record. All fields are deterministic functions of the
/// problem; reruns produce bitwise-identical values.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    /// Total sweeps across all policy iterations.
    pub iterations: usize,
    pub policy_iterations: usize,
    /// Max |F_h(D^2 u)| over equation nodes off the active set.
    pub max_pde_residual: f64,
    /// Max positive part of F_h(D^2 u) over all equation nodes.
    pub max_supersolution_violation: f64,
    /// Max over constrained nodes of |min(u - obstacle, -F_h(D^2 u))|.
    pub complementarity_gap: f64,
    /// Constrained nodes with u - obstacle <= tol, ascending.
    pub active_set: Vec<usize>,
    /// Inner linear solver description.
    pub inner_solver: String,
}

/// Thin obstacle problem: constraint u >= obstacle on THIN nodes only.
/// The obstacle field must carry values on every in-ball plane node (the
/// extension and penalization constructions read it under BOUNDARY plane
/// nodes too); the boundary field on every BOUNDARY node.
#[derive(Clone, Debug)]
pub struct ThinObstacleSpec {
    pub family: BellmanFamily,
    pub obstacle: ScalarField,
    pub boundary: ScalarField,
}

/// Thick obstacle problem: constraint at every equation node.
#[derive(Clone, Debug)]
pub struct ThickObstacleSpec {
    pub family: BellmanFamily,
    pub obstacle: ScalarField,
    pub boundary: ScalarField,
}

/// One member's monotone stencil: strictly positive off-center taps as
/// flat-index deltas, a negative center weight, and the constant.
pub(crate) struct MemberStencil {
    pub(crate) taps: Vec<(isize, f64)>,
    pub(crate) center: f64,
    pub(crate) c: f64,
}

pub(crate) fn build_stencils(grid: &Grid, family: &BellmanFamily) -> Vec<MemberStencil> {
    let spec = grid.spec;
    let n = spec.n;
    let h2 = spec.h * spec.h;
    let flat_delta = |off: [i64; 3]| -> isize {
        let stride_j = spec.size as isize;
        let stride_k = (spec.size * spec.size) as isize;
        match n {
            2 => off[0] as isize + off[1] as isize * stride_j,
            _ => off[0] as isize + off[1] as isize * stride_j + off[2] as isize * stride_k,
        }
    };
    family
        .members()
        .iter()
        .map(|m| {
            let l = &m.matrix;
            let mut taps: Vec<(isize, f64)> = Vec::new();
            let mut push = |off: [i64; 3], w: f64| {
                if w > 0.0 {
                    taps.push((flat_delta(off), w));
                    taps.push((flat_delta([-off[0], -off[1], -off[2]]), w));
                }
            };
            for i in 0..n {
                let mut mixed = 0.0;
                for j in 0..n {
                    if j != i {
                        mixed += l.a[i][j].abs();
                    }
                }
                // clamp: validation allows a -1e-12 dominance margin
                let w = (l.a[i][i] - mixed).max(0.0) / h2;
                let mut off = [0i64; 3];
                off[i] = 1;
                push(off, w);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let lij = l.a[i][j];
                    if lij != 0.0 {
                        let mut off = [0i64; 3];
                        off[i] = 1;
                        off[j] = if lij > 0.0 { 1 } else { -1 };
                        push(off, lij.abs() / h2);
                    }
                }
            }
            let center: f64 = -taps.iter().map(|t| t.1).sum::<f64>();
            MemberStencil {
                taps,
                center,
                c: m.c,
            }
        })
        .collect()
}

/// Nodal value of the monotone discrete operator for one member.
#[inline]
fn member_value(st: &MemberStencil, u: &[f64], idx: usize) -> f64 {
    let mut s = st.center * u[idx] + st.c;
    for &(d, w) in &st.taps {
        s += w * u[(idx as isize + d) as usize];
    }
    s
}

/// F_h(D^2 u) at an equation node: max over members of the monotone
/// stencil value. This is the operator the solver drives to zero and the
/// one residuals are measured against.
pub fn monotone_bellman_value(
    grid: &Grid,
    family: &BellmanFamily,
    field: &ScalarField,
    idx: usize,
) -> f64 {
    debug_assert!(grid.is_equation_node(idx));
    let stencils = build_stencils(grid, family);
    stencils
        .iter()
        .map(|st| member_value(st, &field.values, idx))
        .fold(f64::NEG_INFINITY, f64::max)
}

struct Problem<'a> {
    grid: &'a Grid,
    family: &'a BellmanFamily,
    eq_nodes: Vec<usize>,
    /// Dirichlet + initial values on the full lattice.
    initial: Vec<f64>,
    /// Lower obstacle per lattice node; -inf where unconstrained.
    obstacle: Vec<f64>,
}

struct Solved {
    u: Vec<f64>,
    report: SolveReport,
}

const OUTER_CAP: usize = 400;
const INNER_CHECK: usize = 16;

fn run(problem: &Problem<'_>, opts: SolveOptions) -> Result<Solved, SolveError> {
    let grid = problem.grid;
    let spec = grid.spec;
    let family = problem.family;
    if family.n() != spec.n {
        return Err(SolveError::InvalidInput(
            "family dimension does not match grid",
        ));
    }
    let tol = opts.tol;
    if !(tol > 0.0) {
        return Err(SolveError::InvalidInput("tolerance must be positive"));
    }
    let max_sweeps = opts
        .max_iters
        .unwrap_or(10 * family.len() * spec.size * spec.size);

    let stencils = build_stencils(grid, family);
    let mut u = problem.initial.clone();
    for (idx, &phi) in problem.obstacle.iter().enumerate() {
        if phi > f64::NEG_INFINITY && u[idx] < phi {
            u[idx] = phi;
        }
    }
    let mut policy: Vec<u16> = vec![0; u.len()];
    let select = |u: &[f64], policy: &mut [u16]| -> usize {
        let mut changes = 0;
        for &idx in &problem.eq_nodes {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0u16;
            for (g, st) in stencils.iter().enumerate() {
                let v = member_value(st, u, idx);
                if v > best {
                    best = v;
                    arg = g as u16;
                }
            }
            if policy[idx] != arg {
                policy[idx] = arg;
                changes += 1;
            }
        }
        changes
    };

    let omega0 = match opts.sweep_mode {
        SweepMode::Jacobi => 1.0,
        SweepMode::GaussSeidel => (2.0 / (1.0 + (core::f64::consts::PI * spec.h).sin())).min(1.95),
    };
    let mut omega = omega0;
    let mut sweeps = 0usize;
    let mut outers = 0usize;
    let mut inner_target = tol / 10.0;
    let mut scratch = vec![
        0.0f64;
        if opts.sweep_mode == SweepMode::Jacobi {
            u.len()
        } else {
            0
        }
    ];

    // frozen-policy residual: |equation| off the obstacle, positive part on it
    let frozen_residual = |u: &[f64], policy: &[u16]| -> f64 {
        let mut r: f64 = 0.0;
        for &idx in &problem.eq_nodes {
            let v = member_value(&stencils[policy[idx] as usize], u, idx);
            let active = u[idx] <= problem.obstacle[idx];
            r = r.max(if active { v.max(0.0) } else { v.abs() });
        }
        r
    };

    select(&mut u, &mut policy);
    loop {
        outers += 1;
        if outers > OUTER_CAP {
            return Err(SolveError::NoConvergence {
                last_residual: frozen_residual(&u, &policy),
                iterations: sweeps,
            });
        }
        // inner: projected SOR/Jacobi on the frozen system
        let mut stall = 0u32;
        let mut best_frozen = f64::INFINITY;
        loop {
            let mut budget_hit = false;
            for _ in 0..INNER_CHECK {
                if sweeps >= max_sweeps {
                    budget_hit = true;
                    break;
                }
                sweeps += 1;
                match opts.sweep_mode {
                    SweepMode::GaussSeidel => {
                        // Alternate the sweep direction: one-directional
                        // over-relaxation can amplify oscillatory modes on
                        // corner-coupled stencils, symmetric passes damp them.
                        let forward = sweeps % 2 == 1;
                        let n_eq = problem.eq_nodes.len();
                        for k in 0..n_eq {
                            let idx = problem.eq_nodes[if forward { k } else { n_eq - 1 - k }];
                            let st = &stencils[policy[idx] as usize];
                            let mut r = st.c;
                            for &(d, w) in &st.taps {
                                r += w * u[(idx as isize + d) as usize];
                            }
                            let t = -r / st.center;
                            let relaxed = u[idx] + omega * (t - u[idx]);
                            u[idx] = relaxed.max(problem.obstacle[idx]);
                        }
                    }
                    SweepMode::Jacobi => {
                        scratch.copy_from_slice(&u);
                        for &idx in &problem.eq_nodes {
                            let st = &stencils[policy[idx] as usize];
                            let mut r = st.c;
                            for &(d, w) in &st.taps {
                                r += w * u[(idx as isize + d) as usize];
                            }
                            let t = -r / st.center;
                            scratch[idx] = t.max(problem.obstacle[idx]);
                        }
                        u.copy_from_slice(&scratch);
                    }
                }
            }
            let res = frozen_residual(&u, &policy);
            if res <= inner_target {
                break;
            }
            if budget_hit {
                return Err(SolveError::NoConvergence {
                    last_residual: res,
                    iterations: sweeps,
                });
            }
            // Divergence safeguard: back off toward plain Gauss-Seidel, which the
            // M-matrix structure guarantees to converge.  The sup-norm residual of
            // over-relaxed sweeps oscillates transiently, so only sustained growth
            // well past the best residual seen for this policy counts as divergence.
            if res > best_frozen * 10.0 {
                stall += 1;
                if stall >= 3 && omega > 1.0 {
                    omega = 1.0 + 0.85 * (omega - 1.0);
                    if omega < 1.02 {
                        omega = 1.0;
                    }
                    stall = 0;
                    best_frozen = res;
                }
            } else {
                stall = 0;
            }
            best_frozen = best_frozen.min(res);
        }
        let changes = select(&mut u, &mut policy);
        if changes == 0 {
            let report = assemble_report(problem, &stencils, &u, tol, sweeps, outers, omega, opts);
            if report.max_pde_residual <= tol
                && report.max_supersolution_violation <= tol
                && report.complementarity_gap <= tol
            {
                return Ok(Solved { u, report });
            }
            // policies stable but the nonlinear residual is not yet at
            // tolerance: tighten the inner target and keep sweeping
            inner_target *= 0.25;
            if inner_target < 1e-305 {
                return Err(SolveError::NoConvergence {
                    last_residual: report.max_pde_residual,
                    iterations: sweeps,
                });
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    problem: &Problem<'_>,
    stencils: &[MemberStencil],
    u: &[f64],
    tol: f64,
    sweeps: usize,
    outers: usize,
    omega: f64,
    opts: SolveOptions,
) -> SolveReport {
    let mut active_set = Vec::new();
    let mut max_res: f64 = 0.0;
    let mut max_super: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for &idx in &problem.eq_nodes {
        let f = stencils
            .iter()
            .map(|st| member_value(st, u, idx))
            .fold(f64::NEG_INFINITY, f64::max);
        max_super = max_super.max(f);
        let phi = problem.obstacle[idx];
        if phi > f64::NEG_INFINITY {
            let slack = u[idx] - phi;
            if slack <= tol {
                active_set.push(idx);
            }
            max_gap = max_gap.max(slack.min(-f).abs());
            if slack > tol {
                max_res = max_res.max(f.abs());
            }
        } else {
            max_res = max_res.max(f.abs());
        }
    }
    SolveReport {
        iterations: sweeps,
        policy_iterations: outers,
        max_pde_residual: max_res,
        max_supersolution_violation: max_super,
        complementarity_gap: max_gap,
        active_set,
        inner_solver: format!(
            "projected-sor(omega={:.4}, mode={})",
            omega,
            opts.sweep_mode.as_str()
        ),
    }
}

fn check_boundary_data(grid: &Grid, boundary: &ScalarField) -> Result<(), SolveError> {
    if boundary.spec != grid.spec {
        return Err(SolveError::InvalidInput(
            "boundary field on a different grid",
        ));
    }
    for &b in grid.boundary_nodes() {
        if !boundary.at(b).is_finite() {
            return Err(SolveError::InvalidInput("non-finite boundary value"));
        }
    }
    Ok(())
}

fn base_initial(grid: &Grid, boundary: &ScalarField) -> Vec<f64> {
    let mut init = vec![0.0; grid.spec.node_count()];
    for &b in grid.boundary_nodes() {
        init[b] = boundary.at(b);
    }
    init
}

fn unconstrained(grid: &Grid) -> Vec<f64> {
    vec![f64::NEG_INFINITY; grid.spec.node_count()]
}

/// Dirichlet problem F_h(D^2 u) = 0 on INTERIOR and THIN nodes, u = g on
/// BOUNDARY nodes.
pub fn solve_dirichlet(
    grid: &Grid,
    family: &BellmanFamily,
    boundary: &ScalarField,
    opts: SolveOptions,
) -> Result<(ScalarField, SolveReport), SolveError> {
    check_boundary_data(grid, boundary)?;
    let eq_nodes: Vec<usize> = (0..grid.spec.node_count())
        .filter(|&i| grid.is_equation_node(i))
        .collect();
    let problem = Problem {
        grid,
        family,
        eq_nodes,
        initial: base_initial(grid, boundary),
        obstacle: unconstrained(grid),
    };
    let solved = run(&problem, opts)?;
    Ok((
        ScalarField {
            spec: grid.spec,
            values: solved.u,
        },
        solved.report,
    ))
}

/// Thick obstacle problem: u >= obstacle at every equation node,
/// max(F_h(D^2 u), obstacle - u) = 0 in the complementarity sense.
pub fn solve_thick_obstacle(
    grid: &Grid,
    spec: &ThickObstacleSpec,
    opts: SolveOptions,
) -> Result<(ScalarField, SolveReport), SolveError> {
    check_boundary_data(grid, &spec.boundary)?;
    if spec.obstacle.spec != grid.spec {
        return Err(SolveError::InvalidInput(
            "obstacle field on a different grid",
        ));
    }
    for &b in grid.boundary_nodes() {
        if spec.obstacle.at(b) > spec.boundary.at(b) + 1e-12 {
            return Err(SolveError::InfeasibleObstacle);
        }
    }
    let eq_nodes: Vec<usize> = (0..grid.spec.node_count())
        .filter(|&i| grid.is_equation_node(i))
        .collect();
    let mut obstacle = unconstrained(grid);
    for &idx in &eq_nodes {
        let v = spec.obstacle.at(idx);
        if !v.is_finite() {
            return Err(SolveError::InvalidInput("non-finite obstacle value"));
        }
        obstacle[idx] = v;
    }
    let problem = Problem {
        grid,
        family: &spec.family,
        eq_nodes,
        initial: base_initial(grid, &spec.boundary),
        obstacle,
    };
    let solved = run(&problem, opts)?;
    Ok((
        ScalarField {
            spec: grid.spec,
            values: solved.u,
        },
        solved.report,
    ))
}

/// Thin obstacle problem: F_h(D^2 u) = 0 at INTERIOR nodes,
/// max(F_h(D^2 u), obstacle - u) = 0 at THIN nodes.
pub fn solve_thin_obstacle(
    grid: &Grid,
    spec: &ThinObstacleSpec,
    opts: SolveOptions,
) -> Result<(ScalarField, SolveReport), SolveError> {
    check_boundary_data(grid, &spec.boundary)?;
    if spec.obstacle.spec != grid.spec {
        return Err(SolveError::InvalidInput(
            "obstacle field on a different grid",
        ));
    }
    let eq_nodes: Vec<usize> = (0..grid.spec.node_count())
        .filter(|&i| grid.is_equation_node(i))
        .collect();
    let mut obstacle = unconstrained(grid);
    for &t in grid.thin_nodes() {
        let v = spec.obstacle.at(t);
        if !v.is_finite() {
            return Err(SolveError::InvalidInput("non-finite obstacle value"));
        }
        obstacle[t] = v;
    }
    let problem = Problem {
        grid,
        family: &spec.family,
        eq_nodes,
        initial: base_initial(grid, &spec.boundary),
        obstacle,
    };
    let solved = run(&problem, opts)?;
    Ok((
        ScalarField {
            spec: grid.spec,
            values: solved.u,
        },
        solved.report,
    ))
}

/// Obstacle extension: two independent Dirichlet solves on the half
/// balls with data -m on the curved boundary and the obstacle on the
/// plane, glued along the plane. Lies below any admissible solution with
/// |g| <= m.
pub fn extend_obstacle(
    grid: &Grid,
    family: &BellmanFamily,
    obstacle: &ScalarField,
    m: f64,
    opts: SolveOptions,
) -> Result<ScalarField, SolveError> {
    if obstacle.spec != grid.spec {
        return Err(SolveError::InvalidInput(
            "obstacle field on a different grid",
        ));
    }
    if !m.is_finite() {
        return Err(SolveError::InvalidInput("non-finite bound"));
    }
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let mut out = vec![0.0; spec.node_count()];
    for &p in grid.plane_nodes() {
        out[p] = obstacle.at(p);
    }
    for side in [1.0f64, -1.0] {
        let eq_nodes: Vec<usize> = grid
            .interior_nodes()
            .iter()
            .copied()
            .filter(|&i| side * spec.position(i)[axis] > 0.0)
            .collect();
        let mut initial = vec![0.0; spec.node_count()];
        for &b in grid.boundary_nodes() {
            let x = spec.position(b)[axis];
            initial[b] = if x == 0.0 { obstacle.at(b) } else { -m };
        }
        for &p in grid.plane_nodes() {
            initial[p] = obstacle.at(p);
        }
        let problem = Problem {
            grid,
            family,
            eq_nodes: eq_nodes.clone(),
            initial,
            obstacle: unconstrained(grid),
        };
        let solved = run(&problem, opts)?;
        for &i in &eq_nodes {
            out[i] = solved.u[i];
        }
        for &b in grid.boundary_nodes() {
            if side * spec.position(b)[axis] > 0.0 {
                out[b] = -m;
            }
        }
    }
    Ok(ScalarField { spec, values: out })
}

/// Penalized problem output.
#[derive(Clone, Debug)]
pub struct PenalizedSolution {
    pub u: ScalarField,
    /// Max |x_n| over the contact set of the penalized obstacle.
    pub band_half_width: f64,
    pub report: SolveReport,
}

/// Thick solve against h_eps = max(h, obstacle(x') - x_n^2 / eps) with
/// boundary data max(u_ref, obstacle(x') - x_n^2 / eps), where h is the
/// obstacle extension. The contact set concentrates in a band
/// |x_n| <= C eps around the plane.
pub fn penalized_solve(
    grid: &Grid,
    spec: &ThinObstacleSpec,
    u_ref: &ScalarField,
    eps: f64,
    opts: SolveOptions,
) -> Result<PenalizedSolution, SolveError> {
    if !(eps > 0.0) {
        return Err(SolveError::InvalidInput("epsilon must be positive"));
    }
    if u_ref.spec != grid.spec {
        return Err(SolveError::InvalidInput(
            "reference field on a different grid",
        ));
    }
    let gspec = grid.spec;
    let axis = grid.normal_axis();
    let mut g_norm: f64 = 0.0;
    for &b in grid.boundary_nodes() {
        g_norm = g_norm.max(spec.boundary.at(b).abs());
    }
    let mut phi_norm: f64 = 0.0;
    for &p in grid.plane_nodes() {
        phi_norm = phi_norm.max(spec.obstacle.at(p).abs());
    }
    let m = g_norm.max(phi_norm);
    let h = extend_obstacle(grid, &spec.family, &spec.obstacle, m, opts)?;

    let h_bar = |idx: usize| -> f64 {
        let xn = gspec.position(idx)[axis];
        spec.obstacle.at(grid.plane_projection(idx)) - xn * xn / eps
    };
    let mut h_eps = h.clone();
    let mut boundary = spec.boundary.clone();
    for idx in 0..gspec.node_count() {
        if grid.class(idx) == NodeClass::Exterior {
            continue;
        }
        h_eps.values[idx] = h.at(idx).max(h_bar(idx));
    }
    for &b in grid.boundary_nodes() {
        boundary.values[b] = u_ref.at(b).max(h_bar(b));
    }
    let thick = ThickObstacleSpec {
        family: spec.family.clone(),
        obstacle: h_eps,
        boundary,
    };
    let (u, report) = solve_thick_obstacle(grid, &thick, opts)?;
    let mut band: f64 = 0.0;
    for &idx in &report.active_set {
        band = band.max(gspec.position(idx)[axis].abs());
    }
    Ok(PenalizedSolution {
        u,
        band_half_width: band,
        report,
    })
}
