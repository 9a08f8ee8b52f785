//! Reference solutions the solver is audited against: the closed-form
//! planar half-space solution with a flat obstacle, and a brute-force
//! active-set enumerator for small thin obstacle instances.

use alloc::vec;
use alloc::vec::Vec;
// Inherent f64 methods shadow the trait when std is linked (tests).
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::{Grid, ScalarField};
use crate::linalg::DenseMatrix;
use crate::solver::{build_stencils, ThinObstacleSpec};

#[derive(Clone, Debug)]
pub enum OracleError {
    UnsupportedDimension,
    Infeasible,
    Ambiguous,
    InvalidInput(&'static str),
}

impl OracleError {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleError::UnsupportedDimension => "unsupported-dimension",
            OracleError::Infeasible => "infeasible",
            OracleError::Ambiguous => "ambiguous",
            OracleError::InvalidInput(_) => "invalid-spec",
        }
    }
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::UnsupportedDimension => {
                write!(f, "unsupported-dimension: closed form exists in 2d only")
            }
            OracleError::Infeasible => write!(f, "infeasible: no candidate active set admissible"),
            OracleError::Ambiguous => {
                write!(f, "ambiguous: multiple distinct admissible solutions")
            }
            OracleError::InvalidInput(m) => write!(f, "invalid-spec: {m}"),
        }
    }
}

/// Closed-form harmonic solution of the planar zero-obstacle problem:
/// u = Re (x_1 + i |x_2|)^{3/2} in polar form, contact set {x_2 = 0,
/// x_1 <= 0}. The slit branch is returned as an exact zero so evenness
/// and contact values hold bitwise.
pub fn exact_signorini_value(x: [f64; 2]) -> f64 {
    let (x1, x2a) = (x[0], x[1].abs());
    if x2a == 0.0 && x1 <= 0.0 {
        return 0.0;
    }
    let r = (x1 * x1 + x2a * x2a).sqrt();
    let theta = x2a.atan2(x1);
    r.powf(1.5) * (1.5 * theta).cos()
}

/// Normal derivative jump of the closed-form solution across the plane:
/// -3 sqrt(-x_1) on the contact ray, zero elsewhere.
pub fn exact_sigma(x1: f64) -> f64 {
    if x1 < 0.0 {
        -3.0 * (-x1).sqrt()
    } else {
        0.0
    }
}

/// Sample the closed-form solution on a 2d grid.
pub fn exact_signorini_field(grid: &Grid) -> Result<ScalarField, OracleError> {
    if grid.spec.n != 2 {
        return Err(OracleError::UnsupportedDimension);
    }
    Ok(ScalarField::from_fn(grid, |x| {
        exact_signorini_value([x[0], x[1]])
    }))
}

const MAX_ENUMERATED_THIN: usize = 12;

/// Solve a single-member thin obstacle instance by trying every subset
/// of THIN nodes as the active set and solving the resulting linear
/// system directly. Admissibility: u >= obstacle - 1e-10 on THIN nodes
/// and operator value <= 1e-10 on the clamped ones. Coincident solutions
/// from different labelings are merged; genuinely distinct admissible
/// solutions are an error.
///
/// Returns the solution and its active set {u - obstacle <= tol}.
pub fn brute_force_thin_obstacle(
    grid: &Grid,
    spec: &ThinObstacleSpec,
    tol: f64,
) -> Result<(ScalarField, Vec<usize>), OracleError> {
    if spec.family.len() != 1 {
        return Err(OracleError::InvalidInput(
            "enumeration handles one member only",
        ));
    }
    if spec.family.n() != grid.spec.n {
        return Err(OracleError::InvalidInput(
            "family dimension does not match grid",
        ));
    }
    let thin = grid.thin_nodes();
    if thin.len() > MAX_ENUMERATED_THIN {
        return Err(OracleError::InvalidInput(
            "too many thin nodes to enumerate",
        ));
    }
    let stencil = &build_stencils(grid, &spec.family)[0];
    let eq_nodes: Vec<usize> = (0..grid.spec.node_count())
        .filter(|&i| grid.is_equation_node(i))
        .collect();
    let mut row_of = vec![usize::MAX; grid.spec.node_count()];
    for (r, &idx) in eq_nodes.iter().enumerate() {
        row_of[idx] = r;
    }
    let m = eq_nodes.len();

    let mut best: Option<Vec<f64>> = None;
    for mask in 0u32..(1u32 << thin.len()) {
        let clamped = |idx: usize| -> bool {
            thin.iter()
                .enumerate()
                .any(|(t, &node)| node == idx && mask & (1 << t) != 0)
        };
        let mut a = DenseMatrix::zeros(m);
        let mut b = vec![0.0f64; m];
        for (r, &idx) in eq_nodes.iter().enumerate() {
            if clamped(idx) {
                a.set(r, r, 1.0);
                b[r] = spec.obstacle.at(idx);
                continue;
            }
            a.set(r, r, stencil.center);
            b[r] = -stencil.c;
            for &(d, w) in &stencil.taps {
                let nb = (idx as isize + d) as usize;
                if row_of[nb] != usize::MAX {
                    a.add(r, row_of[nb], w);
                } else {
                    b[r] -= w * spec.boundary.at(nb);
                }
            }
        }
        let Some(sol) = a.solve(b) else { continue };

        // admissibility on the full lattice
        let mut u = vec![0.0f64; grid.spec.node_count()];
        for &bnode in grid.boundary_nodes() {
            u[bnode] = spec.boundary.at(bnode);
        }
        for (r, &idx) in eq_nodes.iter().enumerate() {
            u[idx] = sol[r];
        }
        let feasible = thin.iter().all(|&t| u[t] >= spec.obstacle.at(t) - 1e-10)
            && thin.iter().filter(|&&t| clamped(t)).all(|&t| {
                let mut v = stencil.center * u[t] + stencil.c;
                for &(d, w) in &stencil.taps {
                    v += w * u[(t as isize + d) as usize];
                }
                v <= 1e-10
            });
        if !feasible {
            continue;
        }
        match &best {
            None => best = Some(u),
            Some(prev) => {
                let diff = prev
                    .iter()
                    .zip(&u)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0f64, f64::max);
                if diff > 1e-9 {
                    return Err(OracleError::Ambiguous);
                }
            }
        }
    }
    let Some(u) = best else {
        return Err(OracleError::Infeasible);
    };
    let active: Vec<usize> = thin
        .iter()
        .copied()
        .filter(|&t| u[t] - spec.obstacle.at(t) <= tol)
        .collect();
    Ok((
        ScalarField {
            spec: grid.spec,
            values: u,
        },
        active,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, discrete_hessian};
    use crate::linalg::SymMat;
    use crate::operators::{BellmanFamily, LinearOperator};
    use crate::solver::{solve_thin_obstacle, SolveOptions};

    #[test]
    fn closed_form_reference_values() {
        assert_eq!(exact_signorini_value([0.25, 0.0]), 0.125);
        assert_eq!(exact_signorini_value([-0.25, 0.0]), 0.0);
        assert_eq!(exact_signorini_value([-0.9, 0.0]), 0.0);
        assert_eq!(exact_sigma(-0.25), -1.5);
        assert_eq!(exact_sigma(0.25), 0.0);
        assert_eq!(exact_sigma(0.0), 0.0);
    }

    #[test]
    fn closed_form_is_even_in_x2_bitwise() {
        for &x1 in &[-0.7, -0.2, 0.0, 0.3, 0.8] {
            for &x2 in &[0.1, 0.35, 0.9] {
                assert_eq!(
                    exact_signorini_value([x1, x2]),
                    exact_signorini_value([x1, -x2])
                );
            }
        }
    }

    #[test]
    fn closed_form_nonnegative_on_plane_and_above_zero_obstacle() {
        let g = build_grid(2, 65).unwrap();
        let u = exact_signorini_field(&g).unwrap();
        for &t in g.thin_nodes() {
            assert!(u.at(t) >= 0.0);
        }
    }

    #[test]
    fn closed_form_discretely_harmonic_away_from_slit() {
        let g = build_grid(2, 65).unwrap();
        let u = exact_signorini_field(&g).unwrap();
        let h2 = g.spec.h * g.spec.h;
        for idx in 0..g.spec.node_count() {
            if !g.is_equation_node(idx) {
                continue;
            }
            let x = g.spec.position(idx);
            // fourth derivatives blow up toward the contact ray
            // {x_2 = 0, x_1 <= 0}; measure the distance to that set
            let dist = if x[0] <= 0.0 {
                x[1].abs()
            } else {
                (x[0] * x[0] + x[1] * x[1]).sqrt()
            };
            if dist < 0.3 {
                continue;
            }
            let hess = discrete_hessian(&g, &u, idx).unwrap();
            let lap = hess.a[0][0] + hess.a[1][1];
            assert!(
                lap.abs() < 60.0 * h2,
                "laplacian {lap} at {x:?} exceeds truncation bound"
            );
        }
    }

    #[test]
    fn exact_field_rejects_3d() {
        let g = build_grid(3, 9).unwrap();
        assert_eq!(
            exact_signorini_field(&g).unwrap_err().kind(),
            "unsupported-dimension"
        );
    }

    fn laplace_family(n: usize) -> BellmanFamily {
        BellmanFamily::new(
            vec![LinearOperator {
                matrix: SymMat::identity(n),
                c: 0.0,
            }],
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn brute_force_matches_iterative_solver_on_closed_form_data() {
        let g = build_grid(2, 9).unwrap();
        let spec = ThinObstacleSpec {
            family: laplace_family(2),
            obstacle: ScalarField::constant(g.spec, 0.0),
            boundary: exact_signorini_field(&g).unwrap(),
        };
        let (ub, active_b) = brute_force_thin_obstacle(&g, &spec, 1e-10).unwrap();
        let opts = SolveOptions {
            tol: 1e-10,
            ..SolveOptions::default()
        };
        let (ui, report) = solve_thin_obstacle(&g, &spec, opts).unwrap();
        for idx in 0..g.spec.node_count() {
            assert!((ub.at(idx) - ui.at(idx)).abs() < 1e-8);
        }
        assert_eq!(active_b, report.active_set);
    }

    #[test]
    fn brute_force_handles_anisotropic_member_with_mixed_term() {
        let g = build_grid(2, 13).unwrap();
        let (m, _) = SymMat::from_row_major(2, &[1.4, -0.3, -0.3, 0.9]);
        let fam = BellmanFamily::new(vec![LinearOperator { matrix: m, c: 0.0 }], 0.5, 1.8).unwrap();
        let spec =
            ThinObstacleSpec {
                family: fam,
                obstacle: ScalarField::from_fn(&g, |x| {
                    if x[1] == 0.0 {
                        0.1 - x[0] * x[0]
                    } else {
                        0.0
                    }
                }),
                boundary: ScalarField::from_fn(&g, |x| 0.05 * x[0] - 0.1 * x[1]),
            };
        let (ub, active_b) = brute_force_thin_obstacle(&g, &spec, 1e-10).unwrap();
        assert!(
            !active_b.is_empty(),
            "low boundary data against a bump must touch"
        );
        let opts = SolveOptions {
            tol: 1e-10,
            ..SolveOptions::default()
        };
        let (ui, report) = solve_thin_obstacle(&g, &spec, opts).unwrap();
        for idx in 0..g.spec.node_count() {
            assert!((ub.at(idx) - ui.at(idx)).abs() < 1e-8);
        }
        assert_eq!(active_b, report.active_set);
    }

    #[test]
    fn brute_force_degenerate_zero_data_is_fully_active() {
        let g = build_grid(2, 9).unwrap();
        let spec = ThinObstacleSpec {
            family: laplace_family(2),
            obstacle: ScalarField::constant(g.spec, 0.0),
            boundary: ScalarField::constant(g.spec, 0.0),
        };
        let (u, active) = brute_force_thin_obstacle(&g, &spec, 1e-10).unwrap();
        assert_eq!(active, g.thin_nodes().to_vec());
        for idx in 0..g.spec.node_count() {
            assert_eq!(u.at(idx), 0.0);
        }
    }

    #[test]
    fn brute_force_rejects_multi_member_and_large_grids() {
        let g = build_grid(2, 9).unwrap();
        let fam = BellmanFamily::new(
            vec![
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: 0.0,
                },
                LinearOperator {
                    matrix: SymMat::identity(2),
                    c: -1.0,
                },
            ],
            1.0,
            1.0,
        )
        .unwrap();
        let spec = ThinObstacleSpec {
            family: fam,
            obstacle: ScalarField::constant(g.spec, 0.0),
            boundary: ScalarField::constant(g.spec, 0.0),
        };
        assert_eq!(
            brute_force_thin_obstacle(&g, &spec, 1e-10)
                .unwrap_err()
                .kind(),
            "invalid-spec"
        );

        let g33 = build_grid(2, 33).unwrap();
        let spec33 = ThinObstacleSpec {
            family: laplace_family(2),
            obstacle: ScalarField::constant(g33.spec, 0.0),
            boundary: ScalarField::constant(g33.spec, 0.0),
        };
        assert_eq!(
            brute_force_thin_obstacle(&g33, &spec33, 1e-10)
                .unwrap_err()
                .kind(),
            "invalid-spec"
        );
    }
}
