//! Experiment orchestration behind the command-line interface: `run`
//! evolves a configured flow and writes snapshots plus energy.csv,
//! `diagnose` replays stored histories through the diagnostics, and `check`
//! runs the built-in self-audits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::clifford::{chirality_projector, gamma_matrices, ComplexMatrix};
use crate::config::{serialize_config, RunConfig};
use crate::diagnostics::csv::{
    fmt_f64, write_detector_csv, write_energy_csv, write_monotonicity_csv, write_profile_csv,
};
use crate::diagnostics::{
    curvature_scaling_profile, detect_singular_set, energy_report, hausdorff_bound,
    max_principle_check, monotonicity_scan, rescale_blowup, vitali_cover, DetectorConfig,
};
use crate::error::{Result, SwError};
use crate::fields::{gauge_transform, make_initial, Normed};
use crate::flow::{evolve, read_history, write_snapshot, BlowupInfo, FlowState, IntegratorConfig};
use crate::functional::{gradient_check, sw_functional, ModelParams};
use crate::lattice::build_lattice;

/// Outcome of `run`; a blow-up is an experiment result, not an I/O failure.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub snapshots_written: usize,
    pub sw_initial: f64,
    pub sw_final: f64,
    pub sup_bound_ok: bool,
    pub blowup: Option<BlowupInfo>,
    pub out_dir: PathBuf,
}

/// Evolve the configured flow and write snapshots, energy.csv, and the
/// resolved config into the output directory.
pub fn run_command(config: &RunConfig, out_override: Option<&Path>) -> Result<RunSummary> {
    let lattice = build_lattice(config.m, config.n, config.length)?;
    let fiber = config.resolved_fiber()?;
    let params = ModelParams::new(lattice.clone(), config.s_const, fiber)?;
    let (phi, a) = make_initial(&config.init, &lattice, fiber)?;
    let integrator = IntegratorConfig {
        scheme: config.integrator,
        cfl: config.cfl,
        t_end: config.t_end,
        snapshot_every: config.snapshot_every,
    };
    let history = evolve(FlowState { t: 0.0, phi, a }, &params, &integrator)?;

    let out_dir = out_override.unwrap_or(&config.out_dir).to_path_buf();
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("config.ini"), serialize_config(config))?;
    for (state, step) in history.snapshots.iter().zip(&history.snapshot_steps) {
        let path = out_dir.join(format!("snap_{step:08}.swfl"));
        write_snapshot(state, &params, &path)?;
    }
    let records = energy_report(&history)?;
    write_energy_csv(&out_dir.join("energy.csv"), &records)?;
    let sup_report = max_principle_check(&history)?;

    let summary = RunSummary {
        steps: history.steps.len().saturating_sub(1),
        snapshots_written: history.snapshots.len(),
        sw_initial: history.steps.first().map(|r| r.sw).unwrap_or(0.0),
        sw_final: history.steps.last().map(|r| r.sw).unwrap_or(0.0),
        sup_bound_ok: sup_report.pass,
        blowup: history.blowup,
        out_dir,
    };
    fs::write(
        summary.out_dir.join("summary.txt"),
        format!("{}\n", summary_line(&summary)),
    )?;
    Ok(summary)
}

/// One-line run summary, shared by stdout and summary.txt.
pub fn summary_line(summary: &RunSummary) -> String {
    match summary.blowup {
        Some(info) => format!(
            "blow-up at t = {} (step {}); partial history: {} snapshots, SW {} -> {}",
            fmt_f64(info.t),
            info.step,
            summary.snapshots_written,
            fmt_f64(summary.sw_initial),
            fmt_f64(summary.sw_final),
        ),
        None => format!(
            "{} steps, {} snapshots, SW {} -> {}, sup bound {}",
            summary.steps,
            summary.snapshots_written,
            fmt_f64(summary.sw_initial),
            fmt_f64(summary.sw_final),
            if summary.sup_bound_ok { "ok" } else { "VIOLATED" },
        ),
    }
}

/// Options shared by the diagnose subcommands; unset fields fall back to
/// probe defaults derived from the stored history.
#[derive(Clone, Debug, Default)]
pub struct DiagnoseOpts {
    pub x0: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub ratio: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnoseKind {
    Monotonicity,
    Detect,
    Profile,
    Rescale,
}

/// Run one diagnostic over a stored history directory, writing its CSV (or
/// rescaled snapshot) next to the history unless `out_dir` says otherwise.
/// Returns the lines it printed so callers can test the echoed summary.
pub fn diagnose_command(
    kind: DiagnoseKind,
    history_dir: &Path,
    opts: &DiagnoseOpts,
    out_dir: Option<&Path>,
) -> Result<Vec<String>> {
    let history = read_history(history_dir)?;
    let lattice = history.params.lattice.clone();
    let out = out_dir.unwrap_or(history_dir);
    fs::create_dir_all(out)?;
    let center = || {
        opts.x0
            .clone()
            .unwrap_or_else(|| vec![lattice.length() / 2.0; lattice.dim()])
    };
    let last_t = history.snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let mut lines = Vec::new();

    match kind {
        DiagnoseKind::Monotonicity => {
            let t0 = opts.t0.unwrap_or(last_t);
            let default_radii = DetectorConfig::defaults(&lattice).radii;
            let radii = opts.radii.clone().unwrap_or(default_radii);
            let table = monotonicity_scan(&history, &center(), t0, &radii)?;
            write_monotonicity_csv(&out.join("monotonicity.csv"), &table)?;
            match table.fitted {
                Some((a, c)) => lines.push(format!(
                    "monotonicity: {} radii, fitted a = {}, c = {}",
                    table.rows.len(),
                    fmt_f64(a),
                    fmt_f64(c)
                )),
                None => lines.push(format!(
                    "monotonicity: {} radii, fit unattainable on the search grid",
                    table.rows.len()
                )),
            }
        }
        DiagnoseKind::Detect => {
            let state = history.snapshots.last().ok_or_else(|| {
                SwError::Precondition("detector needs at least one snapshot".into())
            })?;
            let mut config = DetectorConfig::defaults(&lattice);
            if let Some(delta) = opts.delta {
                config.delta = delta;
            }
            if let Some(radii) = &opts.radii {
                config.radii = radii.clone();
                config.r1 = radii.iter().cloned().fold(0.0, f64::max);
            }
            let scan = detect_singular_set(&state.phi, &state.a, &config, &history.params)?;
            write_detector_csv(&out.join("detector.csv"), &lattice, &scan)?;
            let min_radius = config.radii.iter().cloned().fold(f64::INFINITY, f64::min);
            let report = vitali_cover(&scan.flagged, min_radius, &lattice)?;
            let bound = hausdorff_bound(history.initial_sw(), config.delta, lattice.dim());
            lines.push(format!(
                "detector: {} flagged sites, {} vitali centers, hausdorff sum {} (bound {})",
                scan.flagged.len(),
                report.centers.len(),
                fmt_f64(report.hausdorff_sum),
                fmt_f64(bound)
            ));
        }
        DiagnoseKind::Profile => {
            let state = history.snapshots.last().ok_or_else(|| {
                SwError::Precondition("profile needs at least one snapshot".into())
            })?;
            let l = lattice.length();
            let radii = opts.radii.clone().unwrap_or_else(|| {
                vec![
                    l / 16.0,
                    l / 8.0,
                    3.0 * l / 16.0,
                    l / 4.0,
                    3.0 * l / 8.0,
                    l / 2.0,
                ]
            });
            let rows = curvature_scaling_profile(
                &state.phi,
                &state.a,
                &center(),
                &radii,
                &history.params,
            )?;
            write_profile_csv(&out.join("profile.csv"), &rows)?;
            lines.push(format!("profile: {} radii written", rows.len()));
        }
        DiagnoseKind::Rescale => {
            let ratio = opts.ratio.unwrap_or(2);
            let t0 = opts.t0.unwrap_or(last_t);
            let x0 = center();
            // Snap the requested center to the nearest lattice site.
            let h = lattice.spacing();
            let n = lattice.sites_per_axis();
            let coords: Vec<usize> = x0
                .iter()
                .map(|&v| ((v / h).round() as i64).rem_euclid(n as i64) as usize)
                .collect();
            let site = lattice.site_from_coords(&coords);
            let (phi, a) = rescale_blowup(&history, site, t0, ratio)?;
            let rescaled_params = ModelParams::new(
                phi.lattice().clone(),
                history.params.s_const,
                history.params.fiber,
            )?;
            let state = FlowState { t: 0.0, phi, a };
            write_snapshot(&state, &rescaled_params, &out.join("rescaled.swfl"))?;
            lines.push(format!(
                "rescale: ratio {ratio} about site {site}, wrote rescaled.swfl (spacing {})",
                fmt_f64(1.0 / ratio as f64)
            ));
        }
    }
    for line in &lines {
        println!("{line}");
    }
    Ok(lines)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Clifford,
    Gauge,
    Gradient,
}

/// Built-in self-audits; returns the printed lines and whether all passed.
pub fn check_command(kind: CheckKind, config: &RunConfig) -> Result<(Vec<String>, bool)> {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, pass: bool, detail: String| {
        lines.push(format!(
            "{}: {name} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        ));
        pass
    };
    match kind {
        CheckKind::Clifford => {
            let rep = gamma_matrices(config.m)?;
            let id = ComplexMatrix::identity(rep.fiber);
            let mut worst: f64 = 0.0;
            for j in 0..rep.m {
                for k in 0..rep.m {
                    let ac = rep.gammas[j]
                        .mul(&rep.gammas[k])
                        .add(&rep.gammas[k].mul(&rep.gammas[j]));
                    let expected = if j == k {
                        id.scale(num_complex::Complex64::new(2.0, 0.0))
                    } else {
                        ComplexMatrix::zeros(rep.fiber)
                    };
                    worst = worst.max(ac.sub(&expected).max_abs());
                }
            }
            ok &= record(
                "anticommutator relations",
                worst < 1e-13,
                format!("max defect {worst:.3e}"),
            );
            let mut herm: f64 = 0.0;
            for g in &rep.gammas {
                herm = herm.max(g.sub(&g.dagger()).max_abs());
                herm = herm.max(g.dagger().mul(g).sub(&id).max_abs());
            }
            ok &= record(
                "hermitian unitary generators",
                herm < 1e-13,
                format!("max defect {herm:.3e}"),
            );
            if config.m % 2 == 0 {
                let p = chirality_projector(&rep)?;
                let idem = p.mul(&p).sub(&p).max_abs();
                let rank = p.trace().re;
                let target = rep.fiber as f64 / 2.0;
                ok &= record(
                    "chirality projector",
                    idem < 1e-13 && (rank - target).abs() < 1e-13,
                    format!("idempotency {idem:.3e}, rank {rank}"),
                );
            }
        }
        CheckKind::Gauge => {
            let lattice = build_lattice(config.m, config.n, config.length)?;
            let fiber = config.resolved_fiber()?;
            let params = ModelParams::new(lattice.clone(), config.s_const, fiber)?;
            let (phi, a) = make_initial(&config.init, &lattice, fiber)?;
            let sw = sw_functional(&phi, &a, &params)?;
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.init.seed ^ 0x9e3779b9);
            let mut chi = crate::lattice::SiteScalarField::zeros(lattice.clone());
            for v in chi.values.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let (phi2, a2) = gauge_transform(&phi, &a, &chi)?;
            let sw2 = sw_functional(&phi2, &a2, &params)?;
            let sw_dev = (sw2 - sw).abs() / sw.abs().max(1.0);
            ok &= record(
                "functional gauge invariance",
                sw_dev <= 1e-12,
                format!("relative deviation {sw_dev:.3e}"),
            );
            let mut point_dev: f64 = 0.0;
            for s in 0..lattice.site_count() {
                point_dev = point_dev.max((phi2.norm_sq_at(s) - phi.norm_sq_at(s)).abs());
            }
            ok &= record(
                "pointwise |phi| invariance",
                point_dev <= 1e-12 * phi.norms().sup.powi(2).max(1.0),
                format!("max deviation {point_dev:.3e}"),
            );
        }
        CheckKind::Gradient => {
            let lattice = build_lattice(config.m, config.n, config.length)?;
            let fiber = config.resolved_fiber()?;
            let params = ModelParams::new(lattice.clone(), config.s_const, fiber)?;
            let (phi, a) = make_initial(&config.init, &lattice, fiber)?;
            let report = gradient_check(&phi, &a, &params, 1e-4, config.init.seed ^ 0x51)?;
            ok &= record(
                "variational gradient",
                report.max_rel_err <= 1e-6,
                format!(
                    "max relative error {:.3e} over {} directions",
                    report.max_rel_err, report.samples
                ),
            );
        }
    }
    for line in &lines {
        println!("{line}");
    }
    Ok((lines, ok))
}

/// Process exit code per error class: configuration 2, blow-up 3, domain /
/// precondition / shape / unsupported 4, format 5, io 6.
pub fn exit_code(err: &SwError) -> i32 {
    match err {
        SwError::Config(_) => 2,
        SwError::BlowUp { .. } => 3,
        SwError::Domain(_)
        | SwError::Precondition(_)
        | SwError::Shape(_)
        | SwError::Unsupported(_) => 4,
        SwError::Format(_) => 5,
        SwError::Io(_) => 6,
    }
}
