//! Scenario configs: hand-editable TOML, a few named builtins, and the
//! resolution step that turns sources (builtin names or files) into a grid,
//! a family, and sampled obstacle/boundary fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use signorini_core::grid::{build_grid, Grid, ScalarField};
use signorini_core::linalg::SymMat;
use signorini_core::operators::{BellmanFamily, LinearOperator};
use signorini_core::oracle::exact_signorini_value;
use signorini_core::solver::{SolveOptions, SweepMode};

use crate::error::LabError;
use crate::family_io;
use crate::field_io;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Spatial dimension (2 or 3).
    pub n: usize,
    /// Nodes per axis, odd so the plane x_n = 0 is a grid plane.
    pub grid: usize,
    /// Builtin family name (laplace | pucci2 | aniso3) or a JSON file path.
    pub family: String,
    /// zero | paraboloid | CSV file path.
    pub obstacle: String,
    /// exact-signorini | tilted-signorini | constant | CSV file path.
    pub boundary: String,
    /// Paraboloid obstacle parameters (a, b): phi(x') = a - b |x'|^2.
    #[serde(default)]
    pub paraboloid: Option<[f64; 2]>,
    /// Boundary constant when boundary = "constant".
    #[serde(default)]
    pub constant: Option<f64>,
    /// Family member whose mixed normal entries the shear removes.
    #[serde(default)]
    pub pivot_index: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// gauss_seidel (default) | jacobi.
    #[serde(default)]
    pub sweep_mode: Option<String>,
    #[serde(default)]
    pub epsilon_sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsConfig>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Tangential position of the flatness/sigma measurement center; the
    /// nearest thin node is used. Defaults to the free-boundary node.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    /// Emit the per-node sigma profile CSV.
    #[serde(default)]
    pub sigma_profile: Option<bool>,
    /// Region radius for Lipschitz/semiconvexity scans (default 0.75).
    #[serde(default)]
    pub derivative_radius: Option<f64>,
    /// Number of off-contact nodes to run the barrier comparison at (default 0).
    #[serde(default)]
    pub barrier_samples: Option<usize>,
    /// Quadratic opening of the barrier (default 2 sup|phi_tt| + 1).
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Slack threshold separating contact from off-contact (default 1e-6).
    #[serde(default)]
    pub contact_tol: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| LabError::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), LabError> {
        if self.name.is_empty() {
            return Err(LabError::invalid("scenario name must be nonempty"));
        }
        if !(self.n == 2 || self.n == 3) {
            return Err(LabError::invalid("dimension must be 2 or 3"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(LabError::invalid("tol must be positive and finite"));
            }
        }
        if let Some(m) = &self.sweep_mode {
            if m != "gauss_seidel" && m != "jacobi" {
                return Err(LabError::invalid(
                    "sweep_mode must be gauss_seidel or jacobi",
                ));
            }
        }
        if self.obstacle == "paraboloid" && self.paraboloid.is_none() {
            return Err(LabError::invalid(
                "paraboloid obstacle needs `paraboloid = [a, b]`",
            ));
        }
        if self.boundary == "constant" && self.constant.is_none() {
            return Err(LabError::invalid("constant boundary needs `constant = c`"));
        }
        if let Some(eps) = &self.epsilon_sweep {
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(LabError::invalid("epsilon_sweep entries must be positive"));
            }
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::default();
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        opts.max_iters = self.max_iters;
        if self.sweep_mode.as_deref() == Some("jacobi") {
            opts.sweep_mode = SweepMode::Jacobi;
        }
        opts
    }
}

/// Config text plus where it came from; the raw bytes are the cache key.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    pub text: String,
    /// Directory for resolving relative file references.
    pub base: PathBuf,
    /// Builtin name or file path, for log lines.
    pub origin: String,
}

impl ConfigSource {
    /// A builtin scenario name, or a path to a TOML file.
    pub fn load(arg: &str) -> Result<Self, LabError> {
        if let Some(text) = builtin_scenario(arg) {
            return Ok(ConfigSource {
                text: text.to_string(),
                base: PathBuf::from("."),
                origin: arg.to_string(),
            });
        }
        let path = Path::new(arg);
        if !path.is_file() {
            return Err(LabError::invalid(format!(
                "`{arg}` is neither a builtin scenario nor a config file"
            )));
        }
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(ConfigSource {
            text,
            base,
            origin: arg.to_string(),
        })
    }
}

/// Everything a run needs, with sources resolved and sampled on the grid.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    /// Family as authored, before the plane-preserving shear.
    pub family: BellmanFamily,
    pub obstacle: ScalarField,
    pub boundary: ScalarField,
}

pub fn resolve(source: &ConfigSource) -> Result<Scenario, LabError> {
    let config = ScenarioConfig::parse(&source.text)?;
    let grid = build_grid(config.n, config.grid)?;
    let family = resolve_family(&config, &source.base)?;
    if family.n() != config.n {
        return Err(LabError::invalid(format!(
            "family dimension {} does not match grid dimension {}",
            family.n(),
            config.n
        )));
    }
    let obstacle = resolve_obstacle(&config, &grid, &source.base)?;
    let boundary = resolve_boundary(&config, &grid, &source.base)?;
    Ok(Scenario {
        config,
        grid,
        family,
        obstacle,
        boundary,
    })
}

fn diag_member(n: usize, d: &[f64]) -> LinearOperator {
    let mut m = SymMat::identity(n);
    for i in 0..n {
        m.a[i][i] = d[i];
    }
    LinearOperator { matrix: m, c: 0.0 }
}

fn sym2(a: f64, b: f64, d: f64) -> LinearOperator {
    let (m, _) = SymMat::from_row_major(2, &[a, b, b, d]);
    LinearOperator { matrix: m, c: 0.0 }
}

fn resolve_family(config: &ScenarioConfig, base: &Path) -> Result<BellmanFamily, LabError> {
    let n = config.n;
    match config.family.as_str() {
        "laplace" => Ok(BellmanFamily::new(
            vec![diag_member(n, &[1.0; 3][..n])],
            1.0,
            1.0,
        )?),
        "pucci2" => {
            let mut iso = vec![1.0; n];
            iso[0] = 2.0;
            Ok(BellmanFamily::new(
                vec![diag_member(n, &[1.0; 3][..n]), diag_member(n, &iso)],
                1.0,
                2.0,
            )?)
        }
        "aniso3" => {
            if n != 2 {
                return Err(LabError::invalid(
                    "builtin family aniso3 is two-dimensional",
                ));
            }
            Ok(BellmanFamily::new(
                vec![
                    sym2(1.5, 0.0, 0.75),
                    sym2(1.25, 0.35, 1.0),
                    sym2(1.0, -0.3, 1.25),
                ],
                0.7,
                1.55,
            )?)
        }
        other => family_io::read_family(&base.join(other)),
    }
}

fn resolve_obstacle(
    config: &ScenarioConfig,
    grid: &Grid,
    base: &Path,
) -> Result<ScalarField, LabError> {
    let axis = grid.normal_axis();
    match config.obstacle.as_str() {
        "zero" => Ok(ScalarField::constant(grid.spec, 0.0)),
        "paraboloid" => {
            let [a, b] = config.paraboloid.expect("validated");
            Ok(ScalarField::from_fn(grid, |x| {
                let mut t2 = 0.0;
                for (i, xi) in x.iter().enumerate().take(grid.spec.n) {
                    if i != axis {
                        t2 += xi * xi;
                    }
                }
                a - b * t2
            }))
        }
        path => field_io::read_field(&base.join(path), grid),
    }
}

fn resolve_boundary(
    config: &ScenarioConfig,
    grid: &Grid,
    base: &Path,
) -> Result<ScalarField, LabError> {
    match config.boundary.as_str() {
        "exact-signorini" => {
            if config.n != 2 {
                return Err(LabError::invalid("exact-signorini data is two-dimensional"));
            }
            Ok(ScalarField::from_fn(grid, |x| {
                exact_signorini_value([x[0], x[1]])
            }))
        }
        "tilted-signorini" => {
            // The closed-form trace plus a harmonic odd-in-x_n cubic; the tilt
            // vanishes on the plane, so the obstacle geometry is unchanged
            // while the solution loses even symmetry.
            if config.n != 2 {
                return Err(LabError::invalid(
                    "tilted-signorini data is two-dimensional",
                ));
            }
            Ok(ScalarField::from_fn(grid, |x| {
                exact_signorini_value([x[0], x[1]])
                    + 0.25 * (x[1] * x[1] * x[1] - 3.0 * x[0] * x[0] * x[1])
            }))
        }
        "constant" => Ok(ScalarField::constant(
            grid.spec,
            config.constant.expect("validated"),
        )),
        path => field_io::read_field(&base.join(path), grid),
    }
}

/// Builtin scenario table. `signorini-2d` is the analytic benchmark with the
/// full diagnostic set; the six suite entries pair each builtin family with a
/// zero and a paraboloid obstacle at N = 129.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    Some(match name {
        "signorini-2d" => {
            r#"
name = "signorini-2d"
n = 2
grid = 65
family = "laplace"
obstacle = "zero"
boundary = "exact-signorini"

[diagnostics]
center = [0.0]
sigma_profile = true
derivative_radius = 0.75
barrier_samples = 10
"#
        }
        "laplace-zero" => {
            r#"
name = "laplace-zero"
n = 2
grid = 129
family = "laplace"
obstacle = "zero"
boundary = "exact-signorini"

[diagnostics]
center = [0.0]
sigma_profile = true
"#
        }
        "laplace-paraboloid" => {
            r#"
name = "laplace-paraboloid"
n = 2
grid = 129
family = "laplace"
obstacle = "paraboloid"
paraboloid = [0.5, 4.0]
boundary = "constant"
constant = 0.0

[diagnostics]
sigma_profile = true
"#
        }
        "pucci2-zero" => {
            r#"
name = "pucci2-zero"
n = 2
grid = 129
family = "pucci2"
obstacle = "zero"
boundary = "tilted-signorini"

[diagnostics]
center = [0.0]
sigma_profile = true
"#
        }
        "pucci2-paraboloid" => {
            r#"
name = "pucci2-paraboloid"
n = 2
grid = 129
family = "pucci2"
obstacle = "paraboloid"
paraboloid = [0.5, 4.0]
boundary = "constant"
constant = 0.0

[diagnostics]
sigma_profile = true
"#
        }
        "aniso3-zero" => {
            r#"
name = "aniso3-zero"
n = 2
grid = 129
family = "aniso3"
obstacle = "zero"
boundary = "tilted-signorini"

[diagnostics]
center = [0.0]
sigma_profile = true
"#
        }
        "aniso3-paraboloid" => {
            r#"
name = "aniso3-paraboloid"
n = 2
grid = 129
family = "aniso3"
obstacle = "paraboloid"
paraboloid = [0.5, 4.0]
boundary = "constant"
constant = 0.0

[diagnostics]
sigma_profile = true
"#
        }
        _ => return None,
    })
}

pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "signorini-2d",
    "laplace-zero",
    "laplace-paraboloid",
    "pucci2-zero",
    "pucci2-paraboloid",
    "aniso3-zero",
    "aniso3-paraboloid",
];
