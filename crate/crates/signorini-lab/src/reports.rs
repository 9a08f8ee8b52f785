//! Serializable report shapes and the per-run invariant flags that the
//! consolidated summary carries. Every flag restates a solver or regularity
//! invariant verbatim; a run with any flag false is suspect even when the
//! solve itself converged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use signorini_core::grid::{
    discrete_hessian, one_sided_normal_derivative, Grid, ScalarField, Side,
};
use signorini_core::operators::{pucci_extremal, BellmanFamily, Extremal};
use signorini_core::regularity::{
    coincidence_set, compute_sigma, symmetrize, AffineFit, HolderEstimate, RegularityReport,
};
use signorini_core::solver::SolveReport;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReportDto {
    pub iterations: usize,
    pub policy_iterations: usize,
    pub max_pde_residual: f64,
    pub max_supersolution_violation: f64,
    pub complementarity_gap: f64,
    pub active_set: Vec<usize>,
    pub inner_solver: String,
    /// Wall-clock time; informational only, excluded from determinism checks.
    pub wall_seconds: f64,
    #[serde(default)]
    pub cached: bool,
}

impl SolveReportDto {
    pub fn new(report: &SolveReport, wall_seconds: f64, cached: bool) -> Self {
        SolveReportDto {
            iterations: report.iterations,
            policy_iterations: report.policy_iterations,
            max_pde_residual: report.max_pde_residual,
            max_supersolution_violation: report.max_supersolution_violation,
            complementarity_gap: report.complementarity_gap,
            active_set: report.active_set.clone(),
            inner_solver: report.inner_solver.clone(),
            wall_seconds,
            cached,
        }
    }
}

/// JSON cannot carry infinities: a saturated decay fit (all residuals at
/// rounding level) serializes exponent as null and sets `saturated`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HolderDto {
    pub exponent: Option<f64>,
    pub prefactor: f64,
    pub radii_used: Vec<f64>,
    pub fit_rms: f64,
    pub saturated: bool,
}

impl HolderDto {
    /// `shift` converts the stored exponent to the raw log-log slope of the
    /// measured decay: the affine-approximation error of u decays like
    /// r^(1+alpha), so its report entry carries shift = 1.
    fn from_estimate(h: &HolderEstimate, shift: f64) -> Self {
        HolderDto {
            exponent: h.exponent.is_finite().then_some(h.exponent + shift),
            prefactor: h.prefactor,
            radii_used: h.radii_used.clone(),
            fit_rms: h.fit_rms,
            saturated: h.saturated,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegularityReportDto {
    pub k0: f64,
    pub lipschitz: f64,
    pub semiconvexity_min: f64,
    pub semiconcavity_max: f64,
    pub sigma_min: f64,
    pub alpha_u: HolderDto,
    pub alpha_sigma: HolderDto,
    pub contact_count: usize,
    pub free_boundary_count: usize,
}

impl RegularityReportDto {
    pub fn new(
        report: &RegularityReport,
        contact_count: usize,
        free_boundary_count: usize,
    ) -> Self {
        RegularityReportDto {
            k0: report.k0,
            lipschitz: report.lipschitz,
            semiconvexity_min: report.semiconvexity_min,
            semiconcavity_max: report.semiconcavity_max,
            sigma_min: report.sigma_min,
            alpha_u: HolderDto::from_estimate(&report.alpha_u, 1.0),
            alpha_sigma: HolderDto::from_estimate(&report.alpha_sigma, 0.0),
            contact_count,
            free_boundary_count,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpsRow {
    pub eps: f64,
    /// sup over non-exterior nodes of (u_eps - u).
    pub sup_excess: f64,
    pub band_half_width: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BarrierRow {
    /// Tangential coordinates of the sampled off-contact node.
    pub center: Vec<f64>,
    pub sup_gap: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub key: String,
    pub solve: SolveReportDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityReportDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_sweep: Option<Vec<EpsRow>>,
    pub pass: BTreeMap<String, bool>,
}

pub struct FlagInputs<'a> {
    pub grid: &'a Grid,
    /// The family actually solved (post-shear); its constants are the
    /// ellipticity envelope used by the extremal-operator check.
    pub family: &'a BellmanFamily,
    pub obstacle: &'a ScalarField,
    pub boundary: &'a ScalarField,
    pub u: &'a ScalarField,
    pub report: &'a SolveReport,
    pub tol: f64,
    pub contact_tol: f64,
}

/// Per-run invariant flags. Each entry restates one invariant:
/// - max_principle: min g - tol <= u <= max(max g, max phi) + tol off the
///   exterior (maximum principle, obstacle-adjusted upper bound);
/// - complementarity: u >= phi - tol on the thin set, F_h <= tol everywhere,
///   and min(u - phi, -F_h) <= tol in magnitude;
/// - sigma_nonpositive: sigma <= 10h at every thin node;
/// - sigma_off_contact: |sigma| <= 10h at off-contact nodes >= 4h from contact;
/// - sigma_identity: compute_sigma(u) = 2 * upper derivative of symmetrize(u)
///   to 1e-12;
/// - pucci_supersolution: minimal extremal operator of the discrete hessian of
///   the symmetrization is <= tol_pucci at every interior node;
/// - thin_complementarity_v: v >= phi - tol and |min(v - phi, -sigma)| <= 10h
///   at every thin node.
pub fn compute_flags(inp: &FlagInputs<'_>, tol_pucci: f64) -> BTreeMap<String, bool> {
    let grid = inp.grid;
    let spec = grid.spec;
    let tol = inp.tol;
    let tol_sigma = 10.0 * spec.h;

    let mut flags = BTreeMap::new();

    let mut g_lo = f64::INFINITY;
    let mut g_hi = f64::NEG_INFINITY;
    for &b in grid.boundary_nodes() {
        g_lo = g_lo.min(inp.boundary.at(b));
        g_hi = g_hi.max(inp.boundary.at(b));
    }
    let mut phi_hi = f64::NEG_INFINITY;
    for &t in grid.thin_nodes() {
        phi_hi = phi_hi.max(inp.obstacle.at(t));
    }
    let hi = g_hi.max(phi_hi);
    let mut max_principle = true;
    for idx in 0..spec.node_count() {
        if grid.class(idx) == signorini_core::grid::NodeClass::Exterior {
            continue;
        }
        let v = inp.u.at(idx);
        if v < g_lo - tol || v > hi + tol {
            max_principle = false;
            break;
        }
    }
    flags.insert("max_principle".to_string(), max_principle);

    let mut min_slack: f64 = 0.0;
    for &t in grid.thin_nodes() {
        min_slack = min_slack.min(inp.u.at(t) - inp.obstacle.at(t));
    }
    flags.insert(
        "complementarity".to_string(),
        min_slack >= -tol
            && inp.report.max_supersolution_violation <= tol
            && inp.report.complementarity_gap <= tol,
    );

    let sigma = compute_sigma(grid, inp.u);
    let mut sigma_max = f64::NEG_INFINITY;
    for &t in grid.thin_nodes() {
        sigma_max = sigma_max.max(sigma.at(t));
    }
    flags.insert("sigma_nonpositive".to_string(), sigma_max <= tol_sigma);

    let coin = coincidence_set(grid, inp.u, inp.obstacle, inp.contact_tol);
    let mut off_ok = true;
    for &t in &coin.off_contact {
        let x = spec.position(t);
        let mut d2 = f64::INFINITY;
        for &c in &coin.contact {
            let y = spec.position(c);
            let mut s = 0.0;
            for a in 0..spec.n {
                s += (x[a] - y[a]) * (x[a] - y[a]);
            }
            d2 = d2.min(s);
        }
        if d2 >= 16.0 * spec.h * spec.h && sigma.at(t).abs() > tol_sigma {
            off_ok = false;
            break;
        }
    }
    flags.insert("sigma_off_contact".to_string(), off_ok);

    let v = symmetrize(grid, inp.u);
    let mut ident = true;
    for &t in grid.thin_nodes() {
        let d_up = one_sided_normal_derivative(grid, &v, t, Side::Above)
            .expect("thin nodes carry one-sided stencils");
        if (sigma.at(t) - 2.0 * d_up).abs() > 1e-12 {
            ident = false;
            break;
        }
    }
    flags.insert("sigma_identity".to_string(), ident);

    let mut pucci_ok = true;
    for &i in grid.interior_nodes() {
        if let Ok(h) = discrete_hessian(grid, &v, i) {
            let m_minus = pucci_extremal(
                &h,
                inp.family.lambda,
                inp.family.big_lambda,
                Extremal::Minus,
            );
            if m_minus > tol_pucci {
                pucci_ok = false;
                break;
            }
        }
    }
    flags.insert("pucci_supersolution".to_string(), pucci_ok);

    let mut v_comp = true;
    for &t in grid.thin_nodes() {
        let slack = v.at(t) - inp.obstacle.at(t);
        if slack < -tol || slack.min(-sigma.at(t)).abs() > tol_sigma {
            v_comp = false;
            break;
        }
    }
    flags.insert("thin_complementarity_v".to_string(), v_comp);

    flags
}

/// Flag for the affine invariance of the flatness fit: adding an affine
/// function to the field must leave the fitted exponent unchanged.
pub fn flatness_affine_invariant(base: &HolderEstimate, shifted: &HolderEstimate) -> bool {
    if base.saturated || shifted.saturated {
        return base.saturated == shifted.saturated;
    }
    (base.exponent - shifted.exponent).abs() <= 1e-6
}

/// Flag from an epsilon sweep: the penalized excess must strictly decrease.
pub fn penalization_decreasing(rows: &[EpsRow]) -> bool {
    rows.windows(2).all(|w| w[1].sup_excess < w[0].sup_excess)
}

pub fn barrier_all_ok(rows: &[BarrierRow]) -> bool {
    rows.iter().all(|r| r.ok)
}

/// Per-radius affine fit table rows (plot-ready).
pub fn flatness_rows(fits: &[AffineFit], n: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(fits.len());
    for f in fits {
        let mut row = vec![
            crate::field_io::fmt_float(f.radius),
            crate::field_io::fmt_float(f.sup_residual),
            crate::field_io::fmt_float(f.a),
        ];
        for b in f.b.iter().take(n) {
            row.push(crate::field_io::fmt_float(*b));
        }
        rows.push(row);
    }
    rows
}
