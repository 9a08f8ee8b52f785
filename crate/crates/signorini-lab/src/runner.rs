//! Scenario execution: normalize the family, solve, run diagnostics, and
//! leave plot-ready artifacts in a content-addressed output directory.
//! Reruns with byte-identical configs reuse the cached solve.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use signorini_core::grid::{second_difference, Grid, NodeClass, ScalarField};
use signorini_core::operators::{normalize_family, NormalizationResult};
use signorini_core::oracle::brute_force_thin_obstacle;
use signorini_core::regularity::{
    barrier_check, coincidence_set, compute_sigma, default_radii, derivative_bounds, flatness_fit,
    scale_constant, sigma_holder, symmetrize, CoincidenceSet, RegularityReport,
};
use signorini_core::solver::{penalized_solve, solve_thin_obstacle, SolveReport, ThinObstacleSpec};

use crate::config::{resolve, ConfigSource, Scenario};
use crate::error::LabError;
use crate::field_io::{self, fmt_float};
use crate::reports::{
    barrier_all_ok, compute_flags, flatness_affine_invariant, flatness_rows,
    penalization_decreasing, BarrierRow, EpsRow, FlagInputs, RegularityReportDto, SolveReportDto,
    Summary,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Content hash of the exact config bytes plus the code version; the first
/// 16 hex digits name the output directory.
pub fn scenario_key(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update(VERSION.as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Write-temp-then-rename so readers never observe partial artifacts.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| LabError::new("io", "artifact path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| LabError::new("io", e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LabError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LabError::incomplete(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LabError::incomplete(format!("{}: {e}", path.display())))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Deterministic parallel map: contiguous chunks, results in input order.
pub fn par_map<T, U, F>(threads: usize, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let mut chunks: Vec<Vec<T>> = Vec::new();
    let mut it = items.into_iter();
    loop {
        let c: Vec<T> = it.by_ref().take(chunk).collect();
        if c.is_empty() {
            break;
        }
        chunks.push(c);
    }
    let f = &f;
    let mut results: Vec<Vec<U>> = Vec::with_capacity(chunks.len());
    std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| s.spawn(move || c.into_iter().map(f).collect::<Vec<U>>()))
            .collect();
        for h in handles {
            results.push(h.join().expect("diagnostic worker panicked"));
        }
    });
    results.into_iter().flatten().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunMeta {
    name: String,
    key: String,
    version: String,
    origin: String,
    /// Directory file references in the config resolve against.
    base: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NormalizationDto {
    a_bar: Vec<f64>,
    envelope: [f64; 2],
    lambda: f64,
    big_lambda: f64,
    members: usize,
}

/// A completed (or cache-restored) solve with everything diagnostics need.
pub struct Run {
    pub scenario: Scenario,
    pub normalization: NormalizationResult,
    pub dir: PathBuf,
    pub key: String,
    pub u: ScalarField,
    pub report: SolveReport,
    pub wall_seconds: f64,
    pub cached: bool,
}

pub fn run_solve(source: &ConfigSource, out: &Path) -> Result<Run, LabError> {
    let scenario = resolve(source)?;
    let pivot = scenario.config.pivot_index.unwrap_or(0);
    let normalization = normalize_family(&scenario.family, pivot)?;
    let key = scenario_key(&source.text);
    let dir = out.join(format!("{}-{}", sanitize(&scenario.config.name), key));
    fs::create_dir_all(&dir)?;

    write_atomic(&dir.join("config.toml"), source.text.as_bytes())?;
    write_json(
        &dir.join("meta.json"),
        &RunMeta {
            name: scenario.config.name.clone(),
            key: key.clone(),
            version: VERSION.to_string(),
            origin: source.origin.clone(),
            base: source.base.clone(),
        },
    )?;

    let sol_path = dir.join("solution.csv");
    let rep_path = dir.join("solve_report.json");
    if sol_path.is_file() && rep_path.is_file() {
        let u = field_io::read_field(&sol_path, &scenario.grid)?;
        let dto: SolveReportDto = read_json(&rep_path)?;
        let report = SolveReport {
            iterations: dto.iterations,
            policy_iterations: dto.policy_iterations,
            max_pde_residual: dto.max_pde_residual,
            max_supersolution_violation: dto.max_supersolution_violation,
            complementarity_gap: dto.complementarity_gap,
            active_set: dto.active_set.clone(),
            inner_solver: dto.inner_solver.clone(),
        };
        return Ok(Run {
            scenario,
            normalization,
            dir,
            key,
            u,
            report,
            wall_seconds: dto.wall_seconds,
            cached: true,
        });
    }

    let spec = ThinObstacleSpec {
        family: normalization.family.clone(),
        obstacle: scenario.obstacle.clone(),
        boundary: scenario.boundary.clone(),
    };
    let opts = scenario.config.solve_options();
    let t0 = Instant::now();
    let (u, report) = solve_thin_obstacle(&scenario.grid, &spec, opts)?;
    let wall_seconds = t0.elapsed().as_secs_f64();

    field_io::write_field(&sol_path, &scenario.grid, &u)?;
    write_json(
        &rep_path,
        &SolveReportDto::new(&report, wall_seconds, false),
    )?;
    write_json(
        &dir.join("normalization.json"),
        &NormalizationDto {
            a_bar: normalization.a_bar[..scenario.config.n - 1].to_vec(),
            envelope: [normalization.envelope.0, normalization.envelope.1],
            lambda: normalization.family.lambda,
            big_lambda: normalization.family.big_lambda,
            members: normalization.family.len(),
        },
    )?;
    Ok(Run {
        scenario,
        normalization,
        dir,
        key,
        u,
        report,
        wall_seconds,
        cached: false,
    })
}

fn tangential(grid: &Grid, idx: usize) -> Vec<f64> {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    let x = spec.position(idx);
    (0..spec.n).filter(|&a| a != axis).map(|a| x[a]).collect()
}

fn pick_center(
    grid: &Grid,
    coin: &CoincidenceSet,
    wanted: Option<&[f64]>,
) -> Result<usize, LabError> {
    let spec = grid.spec;
    let axis = grid.normal_axis();
    if grid.thin_nodes().is_empty() {
        return Err(LabError::invalid(
            "grid has no thin nodes to center diagnostics on",
        ));
    }
    let dist2 = |idx: usize, target: &[f64]| -> f64 {
        let x = spec.position(idx);
        let mut s = 0.0;
        let mut k = 0;
        for a in 0..spec.n {
            if a != axis {
                let d = x[a] - target.get(k).copied().unwrap_or(0.0);
                s += d * d;
                k += 1;
            }
        }
        s
    };
    if let Some(target) = wanted {
        if target.len() != spec.n - 1 {
            return Err(LabError::invalid(format!(
                "diagnostics center must have {} tangential coordinates",
                spec.n - 1
            )));
        }
        return Ok(*grid
            .thin_nodes()
            .iter()
            .min_by(|&&a, &&b| dist2(a, target).total_cmp(&dist2(b, target)))
            .expect("nonempty"));
    }
    let origin = vec![0.0; spec.n - 1];
    let pool: &[usize] = if coin.free_boundary.is_empty() {
        grid.thin_nodes()
    } else {
        &coin.free_boundary
    };
    Ok(*pool
        .iter()
        .min_by(|&&a, &&b| dist2(a, &origin).total_cmp(&dist2(b, &origin)))
        .expect("nonempty"))
}

fn default_kappa(grid: &Grid, obstacle: &ScalarField) -> f64 {
    let axis = grid.normal_axis();
    let mut sup = 0.0f64;
    for &t in grid.thin_nodes() {
        for a in 0..grid.spec.n {
            if a == axis {
                continue;
            }
            let mut dir = [0i64; 3];
            dir[a] = 1;
            if let Ok(d2) = second_difference(grid, obstacle, t, dir) {
                sup = sup.max(d2.abs());
            }
        }
    }
    2.0 * sup + 1.0
}

/// Tolerance for the extremal-operator supersolution flag. The identity
/// v = (u + u∘reflect)/2 transfers the solver residual to v exactly for
/// axis-aligned members, but mixed members evaluate their cross terms on a
/// different (corner) stencil than the centered one used here; near the
/// free boundary that stencil disagreement scales like sqrt(h) times the
/// solution scale.
pub fn pucci_flag_tol(grid: &Grid, k0: f64, tol: f64) -> f64 {
    tol.max(10.0 * grid.spec.h.sqrt() * k0.max(1.0))
}

pub struct Diagnostics {
    pub report: RegularityReport,
    pub center: usize,
    pub coin: CoincidenceSet,
    pub barrier: Vec<BarrierRow>,
}

pub fn run_diagnostics(run: &Run, threads: usize) -> Result<Diagnostics, LabError> {
    let grid = &run.scenario.grid;
    let cfg = run.scenario.config.diagnostics.clone().unwrap_or_default();
    let contact_tol = cfg.contact_tol.unwrap_or(1e-6);
    let coin = coincidence_set(grid, &run.u, &run.scenario.obstacle, contact_tol);
    let sigma = compute_sigma(grid, &run.u);
    let mut sigma_min = 0.0f64;
    for &t in grid.thin_nodes() {
        sigma_min = sigma_min.min(sigma.at(t));
    }
    let bounds = derivative_bounds(grid, &run.u, cfg.derivative_radius.unwrap_or(0.75));
    let k0 = scale_constant(grid, &run.u, &run.scenario.obstacle);

    let center = pick_center(grid, &coin, cfg.center.as_deref())?;
    let radii = default_radii(grid, 0.25);
    let (fits, alpha_u) = flatness_fit(grid, &run.u, center, &radii)?;
    let alpha_sigma = sigma_holder(grid, &sigma, center, &radii)?;

    let samples = cfg.barrier_samples.unwrap_or(0);
    let barrier = if samples == 0 {
        Vec::new()
    } else {
        let kappa = cfg
            .kappa
            .unwrap_or_else(|| default_kappa(grid, &run.scenario.obstacle));
        let v = symmetrize(grid, &run.u);
        let spec = grid.spec;
        let axis = grid.normal_axis();
        let pool = &coin.off_contact;
        if pool.is_empty() {
            return Err(LabError::invalid(
                "barrier diagnostics need off-contact nodes",
            ));
        }
        let mut picked = Vec::new();
        for i in 0..samples.min(pool.len()) {
            let j = i * pool.len() / samples.min(pool.len());
            let node = pool[j];
            if picked.last() != Some(&node) {
                picked.push(node);
            }
        }
        let rows = par_map(threads, picked, |node| {
            let x0 = spec.position(node);
            let mut t2 = 0.0;
            for a in 0..spec.n {
                if a != axis {
                    t2 += x0[a] * x0[a];
                }
            }
            let rim = 1.0 - t2.sqrt();
            let mut r = 0.2f64.min(0.45 * rim);
            while r >= 2.0 * spec.h {
                let reach = (t2.sqrt() + r).hypot(r);
                if reach < 1.0 - spec.h {
                    break;
                }
                r *= 0.8;
            }
            if r < 2.0 * spec.h {
                return None;
            }
            match barrier_check(
                grid,
                &v,
                &run.scenario.obstacle,
                &run.normalization.family,
                node,
                kappa,
                r,
                r,
            ) {
                Ok(rep) => Some(BarrierRow {
                    center: tangential(grid, node),
                    sup_gap: rep.sup_gap,
                    tol: rep.tol,
                    ok: rep.ok,
                }),
                Err(_) => None,
            }
        });
        rows.into_iter().flatten().collect()
    };

    let report = RegularityReport {
        k0,
        lipschitz: bounds.lipschitz,
        semiconvexity_min: bounds.semiconvexity_min,
        semiconcavity_max: bounds.semiconcavity_max,
        sigma_min,
        alpha_u,
        alpha_sigma,
    };

    // artifacts
    let n = grid.spec.n;
    let dto = RegularityReportDto::new(&report, coin.contact.len(), coin.free_boundary.len());
    write_json(
        &run.dir.join("regularity_report.json"),
        &CenteredRegularity {
            center: tangential(grid, center),
            report: dto,
        },
    )?;

    let mut fit_csv = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut fit_csv);
        let header: &[&str] = if n == 2 {
            &["r", "E", "a", "b1", "b2"]
        } else {
            &["r", "E", "a", "b1", "b2", "b3"]
        };
        w.write_record(header)
            .map_err(|e| LabError::new("io", e.to_string()))?;
        for row in flatness_rows(&fits, n) {
            w.write_record(&row)
                .map_err(|e| LabError::new("io", e.to_string()))?;
        }
        w.flush()?;
    }
    write_atomic(&run.dir.join("flatness.csv"), &fit_csv)?;

    if cfg.sigma_profile.unwrap_or(false) {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let header: &[&str] = if n == 2 {
                &["x1", "sigma"]
            } else {
                &["x1", "x2", "sigma"]
            };
            w.write_record(header)
                .map_err(|e| LabError::new("io", e.to_string()))?;
            for &t in grid.thin_nodes() {
                let mut row: Vec<String> = tangential(grid, t).into_iter().map(fmt_float).collect();
                row.push(fmt_float(sigma.at(t)));
                w.write_record(&row)
                    .map_err(|e| LabError::new("io", e.to_string()))?;
            }
            w.flush()?;
        }
        write_atomic(&run.dir.join("sigma_profile.csv"), &buf)?;
    }

    if !barrier.is_empty() {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let header: &[&str] = if n == 2 {
                &["x1", "sup_gap", "tol", "ok"]
            } else {
                &["x1", "x2", "sup_gap", "tol", "ok"]
            };
            w.write_record(header)
                .map_err(|e| LabError::new("io", e.to_string()))?;
            for row in &barrier {
                let mut rec: Vec<String> = row.center.iter().copied().map(fmt_float).collect();
                rec.push(fmt_float(row.sup_gap));
                rec.push(fmt_float(row.tol));
                rec.push(row.ok.to_string());
                w.write_record(&rec)
                    .map_err(|e| LabError::new("io", e.to_string()))?;
            }
            w.flush()?;
        }
        write_atomic(&run.dir.join("barrier.csv"), &buf)?;
    }

    Ok(Diagnostics {
        report,
        center,
        coin,
        barrier,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CenteredRegularity {
    /// Tangential coordinates of the measurement center.
    center: Vec<f64>,
    #[serde(flatten)]
    report: RegularityReportDto,
}

pub fn run_sweep(run: &Run) -> Result<Vec<EpsRow>, LabError> {
    let eps_list =
        run.scenario.config.epsilon_sweep.clone().ok_or_else(|| {
            LabError::invalid("sweep needs `epsilon_sweep = [...]` in the config")
        })?;
    let grid = &run.scenario.grid;
    let spec = ThinObstacleSpec {
        family: run.normalization.family.clone(),
        obstacle: run.scenario.obstacle.clone(),
        boundary: run.scenario.boundary.clone(),
    };
    let opts = run.scenario.config.solve_options();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in &eps_list {
        let pen = penalized_solve(grid, &spec, &run.u, eps, opts)?;
        let mut sup_excess = f64::NEG_INFINITY;
        for idx in 0..grid.spec.node_count() {
            if grid.class(idx) != NodeClass::Exterior {
                sup_excess = sup_excess.max(pen.u.at(idx) - run.u.at(idx));
            }
        }
        rows.push(EpsRow {
            eps,
            sup_excess,
            band_half_width: pen.band_half_width,
            iterations: pen.report.iterations,
        });
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["eps", "sup_excess", "band_half_width", "iterations"])
            .map_err(|e| LabError::new("io", e.to_string()))?;
        for r in &rows {
            w.write_record([
                fmt_float(r.eps),
                fmt_float(r.sup_excess),
                fmt_float(r.band_half_width),
                r.iterations.to_string(),
            ])
            .map_err(|e| LabError::new("io", e.to_string()))?;
        }
        w.flush()?;
    }
    write_atomic(&run.dir.join("epsilon_sweep.csv"), &buf)?;
    Ok(rows)
}

fn read_eps_rows(path: &Path) -> Result<Vec<EpsRow>, LabError> {
    let text = fs::read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| LabError::incomplete(e.to_string()))?;
        let get = |i: usize| -> Result<f64, LabError> {
            rec.get(i)
                .ok_or_else(|| LabError::incomplete("short epsilon row"))?
                .parse()
                .map_err(|e| LabError::incomplete(format!("epsilon row: {e}")))
        };
        rows.push(EpsRow {
            eps: get(0)?,
            sup_excess: get(1)?,
            band_half_width: get(2)?,
            iterations: rec
                .get(3)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LabError::incomplete("short epsilon row"))?,
        });
    }
    Ok(rows)
}

fn read_barrier_rows(path: &Path, n: usize) -> Result<Vec<BarrierRow>, LabError> {
    let text = fs::read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let tang = n - 1;
    for rec in r.records() {
        let rec = rec.map_err(|e| LabError::incomplete(e.to_string()))?;
        if rec.len() != tang + 3 {
            return Err(LabError::incomplete("malformed barrier row"));
        }
        let mut center = Vec::with_capacity(tang);
        for i in 0..tang {
            center.push(
                rec[i]
                    .parse()
                    .map_err(|e| LabError::incomplete(format!("barrier row: {e}")))?,
            );
        }
        let f = |i: usize| -> Result<f64, LabError> {
            rec[tang + i]
                .parse()
                .map_err(|e| LabError::incomplete(format!("barrier row: {e}")))
        };
        rows.push(BarrierRow {
            center,
            sup_gap: f(0)?,
            tol: f(1)?,
            ok: &rec[tang + 2] == "true",
        });
    }
    Ok(rows)
}

/// Consolidates a finished run directory into summary.json (or .csv):
/// solve + regularity reports merged with one pass/fail flag per invariant.
pub fn emit_report(dir: &Path, format: crate::Format) -> Result<Summary, LabError> {
    let meta: RunMeta = read_json(&dir.join("meta.json"))?;
    let cfg_path = dir.join("config.toml");
    if !cfg_path.is_file() {
        return Err(LabError::incomplete("run directory has no config.toml"));
    }
    let text = fs::read_to_string(&cfg_path)?;
    let source = ConfigSource {
        text,
        base: meta.base.clone(),
        origin: meta.origin.clone(),
    };
    let scenario = resolve(&source)?;
    let normalization =
        normalize_family(&scenario.family, scenario.config.pivot_index.unwrap_or(0))?;

    let sol_path = dir.join("solution.csv");
    let rep_path = dir.join("solve_report.json");
    if !sol_path.is_file() || !rep_path.is_file() {
        return Err(LabError::incomplete("run directory has no completed solve"));
    }
    let u = field_io::read_field(&sol_path, &scenario.grid)?;
    let solve_dto: SolveReportDto = read_json(&rep_path)?;
    let report = SolveReport {
        iterations: solve_dto.iterations,
        policy_iterations: solve_dto.policy_iterations,
        max_pde_residual: solve_dto.max_pde_residual,
        max_supersolution_violation: solve_dto.max_supersolution_violation,
        complementarity_gap: solve_dto.complementarity_gap,
        active_set: solve_dto.active_set.clone(),
        inner_solver: solve_dto.inner_solver.clone(),
    };

    let tol = scenario.config.solve_options().tol;
    let contact_tol = scenario
        .config
        .diagnostics
        .as_ref()
        .and_then(|d| d.contact_tol)
        .unwrap_or(1e-6);
    let k0 = scale_constant(&scenario.grid, &u, &scenario.obstacle);
    let inputs = FlagInputs {
        grid: &scenario.grid,
        family: &normalization.family,
        obstacle: &scenario.obstacle,
        boundary: &scenario.boundary,
        u: &u,
        report: &report,
        tol,
        contact_tol,
    };
    let mut pass = compute_flags(&inputs, pucci_flag_tol(&scenario.grid, k0, tol));

    let reg_path = dir.join("regularity_report.json");
    let regularity = if reg_path.is_file() {
        let centered: CenteredRegularity = read_json(&reg_path)?;
        // affine invariance of the flatness fit, rechecked on the stored field
        let coin = coincidence_set(&scenario.grid, &u, &scenario.obstacle, contact_tol);
        let center = pick_center(&scenario.grid, &coin, Some(&centered.center))?;
        let radii = default_radii(&scenario.grid, 0.25);
        if let Ok((_, base)) = flatness_fit(&scenario.grid, &u, center, &radii) {
            let mut shifted_field = u.clone();
            let spec = scenario.grid.spec;
            for idx in 0..spec.node_count() {
                let x = spec.position(idx);
                let mut affine = 0.37;
                for (a, xa) in x.iter().enumerate().take(spec.n) {
                    affine += (0.3 + 0.4 * a as f64) * xa;
                }
                shifted_field.set(idx, shifted_field.at(idx) + affine);
            }
            if let Ok((_, shifted)) = flatness_fit(&scenario.grid, &shifted_field, center, &radii) {
                pass.insert(
                    "flatness_affine_invariance".to_string(),
                    flatness_affine_invariant(&base, &shifted),
                );
            }
        }
        Some(centered.report)
    } else {
        None
    };

    let barrier_path = dir.join("barrier.csv");
    if barrier_path.is_file() {
        let rows = read_barrier_rows(&barrier_path, scenario.config.n)?;
        pass.insert("barrier_nonnegative".to_string(), barrier_all_ok(&rows));
    }

    let eps_path = dir.join("epsilon_sweep.csv");
    let epsilon_sweep = if eps_path.is_file() {
        let rows = read_eps_rows(&eps_path)?;
        pass.insert(
            "penalization_decreasing".to_string(),
            penalization_decreasing(&rows),
        );
        Some(rows)
    } else {
        None
    };

    let summary = Summary {
        name: meta.name.clone(),
        key: meta.key.clone(),
        solve: solve_dto,
        regularity,
        epsilon_sweep,
        pass,
    };
    match format {
        crate::Format::Json => write_json(&dir.join("summary.json"), &summary)?,
        crate::Format::Csv => {
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["field", "value"])
                    .map_err(|e| LabError::new("io", e.to_string()))?;
                let value = serde_json::to_value(&summary)
                    .map_err(|e| LabError::new("io", e.to_string()))?;
                let mut rows: Vec<(String, String)> = Vec::new();
                flatten_json("", &value, &mut rows);
                for (k, v) in rows {
                    w.write_record([k, v])
                        .map_err(|e| LabError::new("io", e.to_string()))?;
                }
                w.flush()?;
            }
            write_atomic(&dir.join("summary.csv"), &buf)?;
        }
    }
    Ok(summary)
}

fn flatten_json(prefix: &str, value: &serde_json::Value, rows: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, rows);
            }
        }
        serde_json::Value::Array(items) => {
            if items.len() > 32 {
                rows.push((format!("{prefix}.len"), items.len().to_string()));
            } else {
                for (i, v) in items.iter().enumerate() {
                    flatten_json(&format!("{prefix}[{i}]"), v, rows);
                }
            }
        }
        serde_json::Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleInstance {
    pub label: String,
    pub max_abs_diff: f64,
    pub active_sets_match: bool,
    pub active_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleComparison {
    pub instances: Vec<OracleInstance>,
    pub worst_diff: f64,
    pub all_match: bool,
}

/// Cross-checks the iterative solver against active-set enumeration on the
/// configured instance plus seeded random perturbations of its data.
pub fn oracle_compare(
    source: &ConfigSource,
    out: &Path,
    seed: u64,
    trials: usize,
) -> Result<OracleComparison, LabError> {
    let run = run_solve(source, out)?;
    let grid = &run.scenario.grid;
    let opts = run.scenario.config.solve_options();
    let mut instances = Vec::new();

    let check = |label: String,
                 obstacle: ScalarField,
                 boundary: ScalarField|
     -> Result<OracleInstance, LabError> {
        let spec = ThinObstacleSpec {
            family: run.normalization.family.clone(),
            obstacle,
            boundary,
        };
        let (u_it, rep) = solve_thin_obstacle(grid, &spec, opts)?;
        let (u_br, active) = brute_force_thin_obstacle(grid, &spec, opts.tol)?;
        let mut diff = 0.0f64;
        for idx in 0..grid.spec.node_count() {
            if grid.class(idx) != NodeClass::Exterior {
                diff = diff.max((u_it.at(idx) - u_br.at(idx)).abs());
            }
        }
        Ok(OracleInstance {
            label,
            max_abs_diff: diff,
            active_sets_match: rep.active_set == active,
            active_count: active.len(),
        })
    };

    instances.push(check(
        "configured".to_string(),
        run.scenario.obstacle.clone(),
        run.scenario.boundary.clone(),
    )?);

    let axis = grid.normal_axis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let a = rng.random_range(-0.1..0.5);
        let b = rng.random_range(0.5..6.0);
        let c: [f64; 5] = core::array::from_fn(|_| rng.random_range(-0.7..0.7));
        let obstacle = ScalarField::from_fn(grid, |x| {
            let mut t2 = 0.0;
            for (i, xi) in x.iter().enumerate().take(grid.spec.n) {
                if i != axis {
                    t2 += xi * xi;
                }
            }
            a - b * t2
        });
        let boundary = ScalarField::from_fn(grid, |x| {
            c[0] + c[1] * x[0]
                + c[2] * x[1]
                + c[3] * x[0] * x[1]
                + c[4] * (x[0] * x[0] - x[1] * x[1])
        });
        instances.push(check(format!("random-{t}"), obstacle, boundary)?);
    }

    let worst_diff = instances.iter().fold(0.0f64, |m, i| m.max(i.max_abs_diff));
    let all_match = instances.iter().all(|i| i.active_sets_match) && worst_diff <= 1e-8;
    let cmp = OracleComparison {
        instances,
        worst_diff,
        all_match,
    };
    write_json(&run.dir.join("oracle_compare.json"), &cmp)?;
    if !cmp.all_match {
        return Err(LabError::new(
            "oracle-mismatch",
            format!("worst nodewise difference {:.3e}", cmp.worst_diff),
        ));
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_keys_hash_content() {
        let a = scenario_key("name = \"x\"\ngrid = 17\n");
        let b = scenario_key("name = \"x\"\ngrid = 17\n");
        let c = scenario_key("name = \"x\"\ngrid = 33\n");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
        assert!(a.chars().all(|ch| ch.is_ascii_hexdigit()));
    }

    #[test]
    fn par_map_preserves_input_order() {
        let items: Vec<usize> = (0..103).collect();
        for threads in [1, 2, 5, 16] {
            let out = par_map(threads, items.clone(), |i| i * i);
            assert_eq!(
                out,
                items.iter().map(|i| i * i).collect::<Vec<_>>(),
                "threads={threads}"
            );
        }
    }

    #[test]
    fn atomic_writes_leave_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.json");
        write_atomic(&path, b"{}\n").unwrap();
        write_atomic(&path, b"{\"v\": 2}\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{\"v\": 2}\n");
        let names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["artifact.json".to_string()]);
    }

    #[test]
    fn sanitize_keeps_path_friendly_characters() {
        assert_eq!(sanitize("pucci2-zero"), "pucci2-zero");
        assert_eq!(sanitize("a/b c"), "a-b-c");
    }

    #[test]
    fn flatten_json_uses_dotted_paths() {
        let v = serde_json::json!({"pass": {"sigma_nonpositive": true}, "name": "x"});
        let mut rows = Vec::new();
        flatten_json("", &v, &mut rows);
        assert!(rows.contains(&("pass.sigma_nonpositive".to_string(), "true".to_string())));
        assert!(rows.contains(&("name".to_string(), "x".to_string())));
    }
}
