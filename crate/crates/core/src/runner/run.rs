//! Stage execution, summaries and artifact files for one case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{BoundarySpec, CaseConfig, Stage};
use crate::almgren::{
    blowup_profile, classify_mode, doubling_bounds, frequency_trace, vanishing_order,
    Classification, FrequencyTrace, VanishingOrder, EXCLUDED_INNER_RINGS,
};
use crate::closed_forms::ProblemParams;
use crate::error::{Error, Result};
use crate::field::{
    field_csv, solve_linear, solve_semilinear, weighted_l2_distance, write_afld, BoundaryDatum,
    ExtensionField, HalfDiskGrid,
};
use crate::fourier::{beta_coefficients, picard_semilinear_modes, BetaEntry, ModeExpansion};
use crate::inequality::{
    coercivity, hardy_boundary, hardy_trace, reports_csv, sobolev_trace_report, InequalityReport,
};
use crate::sphere::{AngularBasis, AngularMesh, Spectrum};

/// Sigma used for the lower doubling bound H(r) >= K2 r^{2 gamma + sigma}.
pub const DOUBLING_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub weak_residual: f64,
    pub cg_iterations: usize,
    pub coercivity_margin: f64,
    pub picard_iterations: Option<usize>,
    pub smallness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmgrenSummary {
    pub gamma_hat: f64,
    pub gamma_stderr: f64,
    pub gamma_richardson: f64,
    pub delta_hat: f64,
    pub estimators_agree: bool,
    pub monotonicity_defect: f64,
    pub above_lower_bound: bool,
    pub classification: Classification,
    pub k1: f64,
    pub k2: f64,
    pub limit_estimate: f64,
    pub limit_spread: f64,
    pub blowup_tau: f64,
    pub blowup_distance: f64,
    pub vanishing_order: VanishingOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSummary {
    pub modes: usize,
    pub iterations: usize,
    pub ode_residual: f64,
    /// Weighted L2 distance between the mode reconstruction and the field solve.
    pub distance_to_field: f64,
    pub betas: Vec<BetaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySummary {
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub report_only: usize,
    /// Largest report-only ratio.
    pub empirical_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case_id: String,
    pub config_hash: String,
    pub stages: Vec<Stage>,
    pub params: ProblemParams,
    pub hardy_constant: f64,
    pub lowest_eigenvalues: Vec<(u32, usize, f64)>,
    pub solve: Option<SolveSummary>,
    pub almgren: Option<AlmgrenSummary>,
    pub fourier: Option<FourierSummary>,
    pub inequalities: Option<InequalitySummary>,
    /// Why later stages were skipped, e.g. a vanishing field.
    pub rejection: Option<String>,
    pub wall_time_s: f64,
}

/// Everything a case produced, kept in memory.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub config: CaseConfig,
    pub summary: RunSummary,
    pub spectrum: Option<Spectrum>,
    pub field: Option<ExtensionField>,
    pub trace: Option<FrequencyTrace>,
    pub expansion: Option<ModeExpansion>,
    pub inequalities: Vec<(String, InequalityReport)>,
}

fn stage_err(stage: Stage, e: Error) -> Error {
    Error::Stage {
        stage: stage.name().to_string(),
        source: Box::new(e),
    }
}

/// The boundary datum named by `which` on `mesh`.
pub fn boundary_datum(
    params: &ProblemParams,
    mesh: &AngularMesh,
    which: &BoundarySpec,
) -> Result<BoundaryDatum> {
    let nodes = mesh.len();
    let from_basis = |ell: u32, terms: &[(usize, f64)], scale: f64| -> Result<BoundaryDatum> {
        let basis = AngularBasis::full(params, mesh, ell)?;
        let mut values = vec![0.0; nodes];
        for &(k, w) in terms {
            let v = basis.vectors.get(k.wrapping_sub(1)).ok_or_else(|| {
                Error::Domain(format!(
                    "mode {k} does not exist; degree {ell} has {} modes",
                    basis.len()
                ))
            })?;
            for (a, b) in values.iter_mut().zip(v) {
                *a += scale * w * b;
            }
        }
        BoundaryDatum::new(ell, values)
    };
    match which {
        BoundarySpec::Mode { ell, index, scale } => from_basis(*ell, &[(*index, 1.0)], *scale),
        BoundarySpec::Mixed { ell, terms, scale } => from_basis(*ell, terms, *scale),
        BoundarySpec::Custom {
            ell,
            samples,
            scale,
        } => {
            let last = (samples.len() - 1) as f64;
            let values = mesh
                .nodes()
                .iter()
                .map(|&phi| {
                    let x = (phi / std::f64::consts::FRAC_PI_2 * last).clamp(0.0, last);
                    let i = (x.floor() as usize).min(samples.len() - 2);
                    let t = x - i as f64;
                    scale * ((1.0 - t) * samples[i] + t * samples[i + 1])
                })
                .collect();
            BoundaryDatum::new(*ell, values)
        }
        BoundarySpec::Zero { ell } => Ok(BoundaryDatum::zero(*ell, nodes)),
    }
}

/// Radii at which the inequalities are checked: R, R/10, ... above 10 r_min.
fn check_radii(grid: &HalfDiskGrid) -> Vec<f64> {
    let (r_out, r_in) = (grid.outer_radius(), grid.inner_radius());
    (0..)
        .map(|j| r_out * 10f64.powi(-j))
        .take_while(|&r| r >= 10.0 * r_in)
        .collect()
}

/// Run the stages of `config` (plus their prerequisites) without touching disk.
pub fn run_case_in_memory(config: &CaseConfig) -> Result<CaseRun> {
    let problems = super::config::validate(config);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let started = Instant::now();
    let params = config.params()?;
    let stages = Stage::closure(&config.run.pipeline);
    let gs = config.grid;
    let mesh = AngularMesh::graded(gs.angular_nodes, gs.grading)?;
    let grid = HalfDiskGrid::new(gs.outer_radius, gs.r_min, gs.radial_cells, mesh.clone())?;
    let mut summary = RunSummary {
        case_id: config.id.clone(),
        config_hash: config.hash(),
        stages: stages.clone(),
        params,
        hardy_constant: params.hardy_constant(),
        lowest_eigenvalues: Vec::new(),
        solve: None,
        almgren: None,
        fourier: None,
        inequalities: None,
        rejection: None,
        wall_time_s: 0.0,
    };
    let mut run = CaseRun {
        config: config.clone(),
        summary: summary.clone(),
        spectrum: None,
        field: None,
        trace: None,
        expansion: None,
        inequalities: Vec::new(),
    };
    let mut class = None;
    let g =
        boundary_datum(&params, &mesh, &config.boundary).map_err(|e| stage_err(Stage::Solve, e))?;
    for &stage in &stages {
        match stage {
            Stage::Spectrum => {
                let sp =
                    Spectrum::new(&params, &mesh, config.run.ell_max, config.run.modes_per_ell)
                        .map_err(|e| stage_err(stage, e))?;
                summary.lowest_eigenvalues = sp
                    .modes
                    .iter()
                    .take(8)
                    .map(|m| (m.ell, m.index_within_ell, m.mu))
                    .collect();
                run.spectrum = Some(sp);
            }
            Stage::Solve => {
                let (field, s) = match config.f {
                    Some(f) if f.coefficient != 0.0 => {
                        let (field, rep) = solve_semilinear(params, &grid, &g, config.h, f)
                            .map_err(|e| stage_err(stage, e))?;
                        (
                            field,
                            SolveSummary {
                                weak_residual: rep.last.weak_residual,
                                cg_iterations: rep.last.cg_iterations,
                                coercivity_margin: rep.last.coercivity_margin,
                                picard_iterations: Some(rep.iterations),
                                smallness: Some(rep.smallness),
                            },
                        )
                    }
                    _ => {
                        let (field, rep) = solve_linear(params, &grid, &g, config.h)
                            .map_err(|e| stage_err(stage, e))?;
                        (
                            field,
                            SolveSummary {
                                weak_residual: rep.weak_residual,
                                cg_iterations: rep.cg_iterations,
                                coercivity_margin: rep.coercivity_margin,
                                picard_iterations: None,
                                smallness: None,
                            },
                        )
                    }
                };
                summary.solve = Some(s);
                run.field = Some(field);
            }
            Stage::Almgren => {
                let field = run.field.as_ref().expect("solve precedes almgren");
                let spectrum = run.spectrum.as_ref().expect("spectrum precedes almgren");
                let trace = match frequency_trace(field) {
                    Ok(t) => t,
                    Err(Error::Integrity(msg)) => {
                        summary.rejection = Some(format!("almgren: {msg}"));
                        continue;
                    }
                    Err(e) => return Err(stage_err(stage, e)),
                };
                let c =
                    classify_mode(trace.gamma_hat, spectrum).map_err(|e| stage_err(stage, e))?;
                let bounds = doubling_bounds(&trace, DOUBLING_SIGMA);
                let tau = grid.radius(EXCLUDED_INNER_RINGS);
                let blowup =
                    blowup_profile(field, tau, &c, spectrum).map_err(|e| stage_err(stage, e))?;
                let order = vanishing_order(field).map_err(|e| stage_err(stage, e))?;
                summary.almgren = Some(AlmgrenSummary {
                    gamma_hat: trace.gamma_hat,
                    gamma_stderr: trace.gamma_stderr,
                    gamma_richardson: trace.gamma_richardson,
                    delta_hat: trace.delta_hat,
                    estimators_agree: trace.estimators_agree(),
                    monotonicity_defect: trace.monotonicity_defect(),
                    above_lower_bound: trace.above_lower_bound(),
                    classification: c.clone(),
                    k1: bounds.k1,
                    k2: bounds.k2,
                    limit_estimate: bounds.limit_estimate,
                    limit_spread: bounds.limit_spread,
                    blowup_tau: tau,
                    blowup_distance: blowup.distance_to_eigenspace,
                    vanishing_order: order,
                });
                class = Some(c);
                run.trace = Some(trace);
            }
            Stage::Fourier => {
                let Some(c) = class.as_ref() else { continue };
                let field = run.field.as_ref().expect("solve precedes fourier");
                let spectrum = run.spectrum.as_ref().expect("spectrum precedes fourier");
                let (mut exp, basis) = picard_semilinear_modes(
                    params,
                    &grid,
                    &g,
                    config.h,
                    config.f,
                    config.run.fourier_modes,
                    config.run.picard_tol,
                )
                .map_err(|e| stage_err(stage, e))?;
                let rebuilt = exp
                    .reconstruct(&grid, &basis)
                    .map_err(|e| stage_err(stage, e))?;
                let distance =
                    weighted_l2_distance(&rebuilt, field).map_err(|e| stage_err(stage, e))?;
                exp.betas = beta_coefficients(field, spectrum, c, grid.outer_radius())
                    .map_err(|e| stage_err(stage, e))?;
                summary.fourier = Some(FourierSummary {
                    modes: exp.truncation(),
                    iterations: exp.iterations,
                    ode_residual: exp.ode_residual,
                    distance_to_field: distance,
                    betas: exp.betas.clone(),
                });
                run.expansion = Some(exp);
            }
            Stage::Inequalities => {
                let field = run.field.as_ref().expect("solve precedes inequalities");
                let mut rows = Vec::new();
                for r in check_radii(&grid) {
                    let reps = [
                        hardy_boundary(field, r),
                        hardy_trace(field, r),
                        coercivity(field, r, params.lambda),
                        sobolev_trace_report(field, r),
                    ];
                    for rep in reps {
                        rows.push((config.id.clone(), rep.map_err(|e| stage_err(stage, e))?));
                    }
                }
                let count =
                    |want: Option<bool>| rows.iter().filter(|(_, r)| r.passed == want).count();
                summary.inequalities = Some(InequalitySummary {
                    checked: rows.len(),
                    passed: count(Some(true)),
                    failed: count(Some(false)),
                    report_only: count(None),
                    empirical_constant: rows
                        .iter()
                        .filter_map(|(_, r)| r.empirical_constant)
                        .fold(0.0, f64::max),
                });
                run.inequalities = rows;
            }
        }
    }
    summary.wall_time_s = started.elapsed().as_secs_f64();
    run.summary = summary;
    Ok(run)
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn with_hash(hash: &str, csv: &str) -> String {
    format!("# config_hash={hash}\n{csv}")
}

/// Write the artifacts of a finished case into `dir`; returns the files written.
pub fn write_artifacts(run: &CaseRun, dir: &Path) -> Result<Vec<PathBuf>> {
    let hash = &run.summary.config_hash;
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    if let Some(sp) = &run.spectrum {
        files.push(("spectrum.csv", with_hash(hash, &sp.to_csv()).into_bytes()));
    }
    if let Some(field) = &run.field {
        files.push(("field.csv", with_hash(hash, &field_csv(field)).into_bytes()));
        let mut bin = Vec::new();
        write_afld(&field.values, &mut bin)?;
        files.push(("field.afld", bin));
    }
    if let Some(t) = &run.trace {
        files.push(("frequency.csv", with_hash(hash, &t.to_csv()).into_bytes()));
    }
    if let Some(e) = &run.expansion {
        files.push(("modes.csv", with_hash(hash, &e.to_csv()).into_bytes()));
    }
    if run.summary.inequalities.is_some() {
        files.push((
            "inequalities.csv",
            with_hash(hash, &reports_csv(&run.inequalities)).into_bytes(),
        ));
    }
    let json =
        serde_json::to_string_pretty(&run.summary).map_err(|e| Error::Numeric(e.to_string()))?;
    files.push(("summary.json", json.into_bytes()));
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Run a case and write its artifacts under `dir`.
pub fn run_case(config: &CaseConfig, dir: &Path) -> Result<RunSummary> {
    let run = run_case_in_memory(config)?;
    write_artifacts(&run, dir)?;
    Ok(run.summary)
}

/// Run several cases on `jobs` worker threads, one case per worker. Each
/// case writes into `out/<case id>` unless its config names a directory.
pub fn run_cases(
    configs: &[CaseConfig],
    out: Option<&Path>,
    jobs: usize,
) -> Vec<Result<RunSummary>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build();
    let work = || {
        configs
            .par_iter()
            .map(|c| {
                let dir = match (out, &c.output_dir) {
                    (Some(o), _) => o.join(&c.id),
                    (None, Some(d)) => d.clone(),
                    (None, None) => Path::new("out").join(&c.id),
                };
                run_case(c, &dir)
            })
            .collect()
    };
    match pool {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}
