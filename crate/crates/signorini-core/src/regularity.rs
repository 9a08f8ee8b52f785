//! Measurements on computed solutions: normal derivative jumps, Hölder
//! exponents from affine-flatness decay fits, discrete derivative
//! bounds, comparison barriers, and the auxiliary fields used by the
//! regularity audits.

use alloc::vec::Vec;
// Inherent f64 methods shadow the trait when std is linked (tests).
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::{Grid, NodeClass, ScalarField, Side};
use crate::linalg::{linear_fit, DenseMatrix};
use crate::operators::BellmanFamily;

#[derive(Clone, Debug)]
pub enum RegularityError {
    InsufficientRadii,
    InvalidCylinder(&'static str),
    InvalidInput(&'static str),
}

impl RegularityError {
    pub fn kind(&self) -> &'static str {
        match self {
            RegularityError::InsufficientRadii => "insufficient-radii",
            RegularityError::InvalidCylinder(_) => "invalid-cylinder",
            RegularityError::InvalidInput(_) => "invalid-spec",
        }
    }
}

impl core::fmt::Display for RegularityError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RegularityError::InsufficientRadii => {
                write!(
                    f,
                    "insufficient-radii: a decay fit needs at least three usable scales"
                )
            }
            RegularityError::InvalidCylinder(m) => write!(f, "invalid-cylinder: {m}"),
            RegularityError::InvalidInput(m) => write!(f, "invalid-spec: {m}"),
        }
    }
}

/// Even reflection about the plane: v(x) = (u(x) + u(x mirrored)) / 2.
/// The odd part carries no derivative jump, so v keeps the jump of u
/// while being symmetric; for admissible solutions v is a supersolution
/// of the extremal lower envelope.
pub fn symmetrize(grid: &Grid, field: &ScalarField) -> ScalarField {
    let spec = grid.spec;
    let mut v = field.clone();
    for idx in 0..spec.node_count() {
        if grid.class(idx) == NodeClass::Exterior {
            continue;
        }
        v.values[idx] = 0.5 * (field.at(idx) + field.at(spec.reflect(idx)));
    }
    v
}

/// Normal derivative jump at THIN nodes via second-order one-sided
/// differences from both sides:
/// sigma = [-6 f(0) + 4(f(h) + f(-h)) - (f(2h) + f(-2h))] / (2h)
/// along the normal axis. Zero away from THIN nodes. Nonpositive up to
/// truncation wherever the solution is admissible, and identically
/// twice the upper one-sided derivative of the symmetrized field.
pub fn compute_sigma(grid: &Grid, field: &ScalarField) -> ScalarField {
    let mut sigma = ScalarField::constant(grid.spec, 0.0);
    for &t in grid.thin_nodes() {
        // thin nodes satisfy |x|^2 + (2h)^2 < 1, so both stencils exist
        let above = crate::grid::one_sided_normal_derivative(grid, field, t, Side::Above).unwrap();
        let below = crate::grid::one_sided_normal_derivative(grid, field, t, Side::Below).unwrap();
        sigma.values[t] = above - below;
    }
    sigma
}

/// Contact set partition of the thin set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoincidenceSet {
    /// THIN nodes with u - obstacle <= contact_tol, ascending.
    pub contact: Vec<usize>,
    /// Contact nodes with an in-plane axis neighbor that is THIN and
    /// off contact.
    pub free_boundary: Vec<usize>,
    /// The remaining THIN nodes, ascending.
    pub off_contact: Vec<usize>,
}

pub fn coincidence_set(
    grid: &Grid,
    u: &ScalarField,
    obstacle: &ScalarField,
    contact_tol: f64,
) -> CoincidenceSet {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let is_contact = |idx: usize| u.at(idx) - obstacle.at(idx) <= contact_tol;
    let mut contact = Vec::new();
    let mut off_contact = Vec::new();
    for &t in grid.thin_nodes() {
        if is_contact(t) {
            contact.push(t);
        } else {
            off_contact.push(t);
        }
    }
    let free_boundary = contact
        .iter()
        .copied()
        .filter(|&t| {
            (0..spec.n).filter(|&d| d != axis).any(|d| {
                [-1i64, 1].iter().any(|&s| {
                    let mut off = [0i64; 3];
                    off[d] = s;
                    match spec.offset(t, off) {
                        Some(nb) => grid.class(nb) == NodeClass::Thin && !is_contact(nb),
                        None => false,
                    }
                })
            })
        })
        .collect();
    CoincidenceSet {
        contact,
        free_boundary,
        off_contact,
    }
}

/// Discrete one-sided derivative and curvature extremes over the ball
/// of the given radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBounds {
    /// Max |u(x + he) - u(x)| / (h|e|) over axis and diagonal directions.
    pub lipschitz: f64,
    /// Min in-plane second difference quotient over tangential axes and
    /// tangential diagonals.
    pub semiconvexity_min: f64,
    /// Max normal second difference over INTERIOR nodes; stencils
    /// centered on the plane are excluded because the derivative jump
    /// concentrates negative curvature there.
    pub semiconcavity_max: f64,
}

fn direction_set(n: usize) -> Vec<[i64; 3]> {
    let mut dirs = Vec::new();
    for i in 0..n {
        let mut e = [0i64; 3];
        e[i] = 1;
        dirs.push(e);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for s in [1i64, -1] {
                let mut e = [0i64; 3];
                e[i] = 1;
                e[j] = s;
                dirs.push(e);
            }
        }
    }
    dirs
}

pub fn derivative_bounds(grid: &Grid, field: &ScalarField, region_radius: f64) -> DerivativeBounds {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let dirs = direction_set(spec.n);
    let r2 = region_radius * region_radius;
    let mut lip: f64 = 0.0;
    let mut semiconvex = f64::INFINITY;
    let mut semiconcave = f64::NEG_INFINITY;
    for idx in 0..spec.node_count() {
        if grid.class(idx) == NodeClass::Exterior || spec.radius2(idx) > r2 {
            continue;
        }
        for e in &dirs {
            let len2: i64 = e.iter().map(|c| c * c).sum();
            let elen = ((len2 as f64).sqrt()) * spec.h;
            let fwd = spec
                .offset(idx, *e)
                .filter(|&nb| grid.class(nb) != NodeClass::Exterior);
            let bwd = spec
                .offset(idx, [-e[0], -e[1], -e[2]])
                .filter(|&nb| grid.class(nb) != NodeClass::Exterior);
            if let Some(f) = fwd {
                lip = lip.max((field.at(f) - field.at(idx)).abs() / elen);
            }
            let (Some(f), Some(b)) = (fwd, bwd) else {
                continue;
            };
            let dd = (field.at(f) - 2.0 * field.at(idx) + field.at(b)) / (elen * elen);
            if e[axis] == 0 {
                semiconvex = semiconvex.min(dd);
            }
            let normal = (0..spec.n).all(|d| (d == axis) == (e[d] != 0));
            if normal && grid.class(idx) == NodeClass::Interior {
                semiconcave = semiconcave.max(dd);
            }
        }
    }
    DerivativeBounds {
        lipschitz: lip,
        semiconvexity_min: semiconvex,
        semiconcavity_max: semiconcave,
    }
}

/// One affine least-squares fit at a single scale.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFit {
    pub radius: f64,
    /// Intercept at the center.
    pub a: f64,
    /// Gradient, first n entries meaningful.
    pub b: [f64; 3],
    /// Sup over the fitted ball of |u - (a + b.(x - x0))|.
    pub sup_residual: f64,
}

/// Power-law fit of a decay quantity E(r) ~ C r^p on a radius ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderEstimate {
    /// Fitted Hölder exponent alpha; +infinity sentinel when saturated.
    pub exponent: f64,
    /// Fitted prefactor C.
    pub prefactor: f64,
    /// Radii that entered the log-log regression, ascending.
    pub radii_used: Vec<f64>,
    /// Root mean square residual of the log-log line.
    pub fit_rms: f64,
    /// Every scale decayed below 1e-10: the quantity vanishes to
    /// precision and no exponent is recoverable.
    pub saturated: bool,
}

/// Half-octave radius ladder descending from r_max to 4h, ascending
/// order. A pure octave ladder leaves too few scales on coarse grids.
pub fn default_radii(grid: &Grid, r_max: f64) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut r = r_max;
    while r >= 4.0 * grid.spec.h - 1e-12 {
        radii.push(r);
        r /= core::f64::consts::SQRT_2;
    }
    radii.reverse();
    radii
}

/// Fit log E against log r; `shift` is subtracted from the slope so the
/// flatness fit can report alpha out of an r^{1+alpha} law.
fn fit_decay(radii: &[f64], values: &[f64], shift: f64) -> Result<HolderEstimate, RegularityError> {
    if values.iter().all(|&e| e < 1e-10) {
        return Ok(HolderEstimate {
            exponent: f64::INFINITY,
            prefactor: 0.0,
            radii_used: Vec::new(),
            fit_rms: 0.0,
            saturated: true,
        });
    }
    let mut used = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&r, &e) in radii.iter().zip(values) {
        if e > 1e-12 {
            used.push(r);
            xs.push(r.ln());
            ys.push(e.ln());
        }
    }
    if xs.len() < 3 {
        return Err(RegularityError::InsufficientRadii);
    }
    let (slope, intercept, rms) = linear_fit(&xs, &ys);
    Ok(HolderEstimate {
        exponent: slope - shift,
        prefactor: intercept.exp(),
        radii_used: used,
        fit_rms: rms,
        saturated: false,
    })
}

/// Deviation from affine behavior around a node: at each radius, the
/// least-squares affine fit over the ball (restricted to the closed
/// upper half when the center sits on the plane) and its sup residual
/// E(r). E decays like r^{1+alpha} for a field that is C^{1,alpha} on
/// the fitted side; the estimate reports alpha. Radii below 4h are
/// discarded as unresolvable.
pub fn flatness_fit(
    grid: &Grid,
    field: &ScalarField,
    center: usize,
    radii: &[f64],
) -> Result<(Vec<AffineFit>, HolderEstimate), RegularityError> {
    let spec = grid.spec;
    let class = grid.class(center);
    if class != NodeClass::Thin && class != NodeClass::Interior {
        return Err(RegularityError::InvalidInput(
            "flatness center must be a thin or interior node",
        ));
    }
    let half_only = class == NodeClass::Thin;
    let axis = grid.normal_axis();
    let x0 = spec.position(center);
    let mut fits = Vec::new();
    let mut kept_radii = Vec::new();
    let mut values = Vec::new();
    for &r in radii {
        if r < 4.0 * spec.h - 1e-12 {
            continue;
        }
        let r2 = r * r;
        let mut pts: Vec<(usize, [f64; 3])> = Vec::new();
        for idx in 0..spec.node_count() {
            if grid.class(idx) == NodeClass::Exterior {
                continue;
            }
            let x = spec.position(idx);
            if half_only && x[axis] < 0.0 {
                continue;
            }
            let d2: f64 = (0..spec.n).map(|d| (x[d] - x0[d]) * (x[d] - x0[d])).sum();
            if d2 <= r2 + 1e-12 {
                pts.push((idx, x));
            }
        }
        if pts.len() < spec.n + 2 {
            return Err(RegularityError::InvalidInput(
                "radius captures too few nodes",
            ));
        }
        let dim = spec.n + 1;
        let mut ata = DenseMatrix::zeros(dim);
        let mut atb = alloc::vec![0.0f64; dim];
        for &(idx, x) in &pts {
            let mut row = [0.0f64; 4];
            row[0] = 1.0;
            for d in 0..spec.n {
                row[d + 1] = x[d] - x0[d];
            }
            for a in 0..dim {
                for b in 0..dim {
                    ata.add(a, b, row[a] * row[b]);
                }
                atb[a] += row[a] * field.at(idx);
            }
        }
        let coef = ata
            .solve(atb)
            .ok_or(RegularityError::InvalidInput("degenerate affine fit"))?;
        let mut sup: f64 = 0.0;
        for &(idx, x) in &pts {
            let mut fit = coef[0];
            for d in 0..spec.n {
                fit += coef[d + 1] * (x[d] - x0[d]);
            }
            sup = sup.max((field.at(idx) - fit).abs());
        }
        let mut b = [0.0f64; 3];
        b[..spec.n].copy_from_slice(&coef[1..=spec.n]);
        fits.push(AffineFit {
            radius: r,
            a: coef[0],
            b,
            sup_residual: sup,
        });
        kept_radii.push(r);
        values.push(sup);
    }
    if kept_radii.len() < 3 {
        return Err(RegularityError::InsufficientRadii);
    }
    let est = fit_decay(&kept_radii, &values, 1.0)?;
    Ok((fits, est))
}

/// Decay of the normal derivative jump around a node of the free
/// boundary: E(r) = sup |sigma| over thin nodes within distance r.
/// Fitting E ~ C r^alpha estimates the Hölder exponent of sigma, which
/// vanishes at the free boundary.
pub fn sigma_holder(
    grid: &Grid,
    sigma: &ScalarField,
    center: usize,
    radii: &[f64],
) -> Result<HolderEstimate, RegularityError> {
    let spec = grid.spec;
    if grid.class(center) != NodeClass::Thin {
        return Err(RegularityError::InvalidInput("center must be a thin node"));
    }
    let x0 = spec.position(center);
    let mut kept = Vec::new();
    let mut values = Vec::new();
    for &r in radii {
        if r < 4.0 * spec.h - 1e-12 {
            continue;
        }
        let r2 = r * r;
        let mut sup: f64 = 0.0;
        for &t in grid.thin_nodes() {
            let x = spec.position(t);
            let d2: f64 = (0..spec.n).map(|d| (x[d] - x0[d]) * (x[d] - x0[d])).sum();
            if d2 <= r2 + 1e-12 {
                sup = sup.max(sigma.at(t).abs());
            }
        }
        kept.push(r);
        values.push(sup);
    }
    if kept.len() < 3 {
        return Err(RegularityError::InsufficientRadii);
    }
    fit_decay(&kept, &values, 0.0)
}

/// Outcome of one barrier comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierReport {
    /// Sup of v - psi over the lateral-and-top boundary of the cylinder
    /// in the open upper half space.
    pub sup_gap: f64,
    /// Discretization allowance 10 h (1 + kappa).
    pub tol: f64,
    /// sup_gap >= -tol.
    pub ok: bool,
}

/// Compare the solution against the quadratic barrier
/// psi = phi(x0) + grad phi(x0) . (x' - x0') + kappa |x - x0|^2
///       - kappa (n - 1) (Lambda / lambda) x_n^2
/// touching the obstacle at x0 from below. Any admissible member maps
/// psi to a nonnegative value, so on a converged solution v the sup of
/// v - psi over the cylinder boundary in {x_n > 0} cannot be negative
/// beyond discretization error.
#[allow(clippy::too_many_arguments)]
pub fn barrier_check(
    grid: &Grid,
    v: &ScalarField,
    obstacle: &ScalarField,
    family: &BellmanFamily,
    center: usize,
    kappa: f64,
    radius: f64,
    height: f64,
) -> Result<BarrierReport, RegularityError> {
    let spec = grid.spec;
    if grid.class(center) != NodeClass::Thin {
        return Err(RegularityError::InvalidInput(
            "barrier center must be a thin node",
        ));
    }
    let axis = grid.normal_axis();
    let x0 = spec.position(center);
    if radius < 2.0 * spec.h || height < 2.0 * spec.h {
        return Err(RegularityError::InvalidCylinder(
            "cylinder thinner than two mesh widths",
        ));
    }
    let tang_norm: f64 = (0..spec.n)
        .filter(|&d| d != axis)
        .map(|d| x0[d] * x0[d])
        .sum::<f64>()
        .sqrt();
    if (tang_norm + radius) * (tang_norm + radius) + height * height >= 1.0 {
        return Err(RegularityError::InvalidCylinder(
            "cylinder leaves the unit ball",
        ));
    }
    // in-plane gradient and curvature of the obstacle at the center
    let mut grad = [0.0f64; 3];
    let mut sup_tt: f64 = 0.0;
    for d in 0..spec.n {
        if d == axis {
            continue;
        }
        let mut off = [0i64; 3];
        off[d] = 1;
        let fwd = spec
            .offset(center, off)
            .ok_or(RegularityError::InvalidInput(
                "obstacle stencil leaves lattice",
            ))?;
        off[d] = -1;
        let bwd = spec
            .offset(center, off)
            .ok_or(RegularityError::InvalidInput(
                "obstacle stencil leaves lattice",
            ))?;
        grad[d] = (obstacle.at(fwd) - obstacle.at(bwd)) / (2.0 * spec.h);
        sup_tt = sup_tt.max(
            ((obstacle.at(fwd) - 2.0 * obstacle.at(center) + obstacle.at(bwd)) / (spec.h * spec.h))
                .abs(),
        );
    }
    if !(kappa > sup_tt) {
        return Err(RegularityError::InvalidInput(
            "kappa must exceed the obstacle's tangential curvature",
        ));
    }
    let normal_coef = kappa * (spec.n as f64 - 1.0) * family.big_lambda / family.lambda;
    let mut sup_gap = f64::NEG_INFINITY;
    for idx in 0..spec.node_count() {
        if grid.class(idx) == NodeClass::Exterior {
            continue;
        }
        let x = spec.position(idx);
        let xn = x[axis];
        if xn <= 0.0 || xn > height + 1e-12 {
            continue;
        }
        let d2_tang: f64 = (0..spec.n)
            .filter(|&d| d != axis)
            .map(|d| (x[d] - x0[d]) * (x[d] - x0[d]))
            .sum();
        if d2_tang > radius * radius + 1e-12 {
            continue;
        }
        // keep only the lateral shell and the top slab of the cylinder
        let on_lateral = d2_tang > (radius - spec.h) * (radius - spec.h);
        let on_top = xn > height - spec.h;
        if !(on_lateral || on_top) {
            continue;
        }
        let mut psi = obstacle.at(center) + kappa * (d2_tang + xn * xn) - normal_coef * xn * xn;
        for d in 0..spec.n {
            if d != axis {
                psi += grad[d] * (x[d] - x0[d]);
            }
        }
        sup_gap = sup_gap.max(v.at(idx) - psi);
    }
    if !sup_gap.is_finite() {
        return Err(RegularityError::InvalidCylinder(
            "cylinder boundary captures no nodes",
        ));
    }
    let tol = 10.0 * spec.h * (1.0 + kappa);
    Ok(BarrierReport {
        sup_gap,
        tol,
        ok: sup_gap >= -tol,
    })
}

/// Remove the normal derivative jump at one contact node:
/// u_z(x) = u(x) - sigma_value max(x_n, 0). Near the node the result is
/// C^1 across the plane up to the Hölder error of sigma.
pub fn subtract_jump(grid: &Grid, u: &ScalarField, sigma_value: f64) -> ScalarField {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let mut out = u.clone();
    for idx in 0..spec.node_count() {
        if grid.class(idx) == NodeClass::Exterior {
            continue;
        }
        let xn = spec.position(idx)[axis];
        if xn > 0.0 {
            out.values[idx] -= sigma_value * xn;
        }
    }
    out
}

/// Distance from w to the solution of the unconstrained equation with
/// w's own boundary trace, paired with the sup of w's derivative jump:
/// small jump forces small gap. Returns (gap, sigma_norm) with
/// gap = max |psi - w| over non-exterior nodes.
pub fn dirichlet_gap(
    grid: &Grid,
    family: &BellmanFamily,
    w: &ScalarField,
    opts: crate::solver::SolveOptions,
) -> Result<(f64, f64), crate::solver::SolveError> {
    let (psi, _) = crate::solver::solve_dirichlet(grid, family, w, opts)?;
    let mut gap: f64 = 0.0;
    for idx in 0..grid.spec.node_count() {
        if grid.class(idx) != NodeClass::Exterior {
            gap = gap.max((psi.at(idx) - w.at(idx)).abs());
        }
    }
    let sigma = compute_sigma(grid, w);
    let sigma_norm = sigma.sup_norm_over(grid.thin_nodes());
    Ok((gap, sigma_norm))
}

/// Scale constant for tolerance heuristics: sup |u| plus the largest of
/// the obstacle's sup, in-plane gradient and in-plane curvature over the
/// thin set.
pub fn scale_constant(grid: &Grid, u: &ScalarField, obstacle: &ScalarField) -> f64 {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let mut unorm: f64 = 0.0;
    for idx in 0..spec.node_count() {
        if grid.class(idx) != NodeClass::Exterior {
            unorm = unorm.max(u.at(idx).abs());
        }
    }
    let mut obs: f64 = 0.0;
    for &t in grid.thin_nodes() {
        obs = obs.max(obstacle.at(t).abs());
        for d in 0..spec.n {
            if d == axis {
                continue;
            }
            let mut off = [0i64; 3];
            off[d] = 1;
            let fwd = spec.offset(t, off);
            off[d] = -1;
            let bwd = spec.offset(t, off);
            if let (Some(f), Some(b)) = (fwd, bwd) {
                let g = (obstacle.at(f) - obstacle.at(b)) / (2.0 * spec.h);
                let c =
                    (obstacle.at(f) - 2.0 * obstacle.at(t) + obstacle.at(b)) / (spec.h * spec.h);
                obs = obs.max(g.abs()).max(c.abs());
            }
        }
    }
    unorm + obs
}

/// Aggregated per-solution regularity measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    /// Scale constant: sup |u| + obstacle size proxy.
    pub k0: f64,
    pub lipschitz: f64,
    pub semiconvexity_min: f64,
    pub semiconcavity_max: f64,
    /// Most negative normal derivative jump over the thin set.
    pub sigma_min: f64,
    /// Flatness exponent of u at the measurement node.
    pub alpha_u: HolderEstimate,
    /// Decay exponent of sigma at the measurement node.
    pub alpha_sigma: HolderEstimate,
}
