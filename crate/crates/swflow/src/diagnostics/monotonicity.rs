//! Backward heat-kernel monotonicity quantities.
//!
//! Over the slab T_R(z₀) = M × [t₀-4R², t₀-R²],
//!
//!   Φ(R) = R² ∫_{T_R} e(φ,a)·χ²·G dV dt,
//!   𝓕(R) = ∫_{T_R} R·τ·( |b + (x_k/2t)·F_{k·}|² + 2|ψ + (x_k/2t)·D_kφ|² )·χ²·G dV dt,
//!
//! with χ the radial cutoff, G the backward heat kernel centered at z₀,
//! τ = t₀ - t, offsets by nearest image, and the velocities (ψ, b)
//! recomputed exactly from the flow right-hand side at each snapshot.  Since
//! t - t₀ < 0 on the slab, the prefactor is taken as R·τ > 0, which makes 𝓕
//! the non-negative dissipation-type quantity the monotonicity inequality
//! trades against dΦ/dR.  Time integration is trapezoidal over the stored
//! snapshots inside the slab; cutoff and kernel weights are evaluated at the
//! base site of each link and plaquette contribution.

use crate::diagnostics::{cutoff_value, heat_kernel, Probe};
use crate::error::{Result, SwError};
use crate::fields::covariant_diff;
use crate::flow::FlowHistory;
use crate::functional::{curvature, energy_density_parts, flow_rhs};

/// Snapshot indices with t₀-4R² ≤ t ≤ t₀-R² (inclusive with rounding slack).
fn slab_snapshots(history: &FlowHistory, probe: &Probe) -> Result<Vec<usize>> {
    let r_sq = probe.radius * probe.radius;
    let lo = probe.t0 - 4.0 * r_sq;
    let hi = probe.t0 - r_sq;
    let tol = 1e-12 * probe.t0.abs().max(1.0);
    let times: Vec<f64> = history.snapshots.iter().map(|s| s.t).collect();
    let first = *times.first().ok_or_else(|| {
        SwError::Precondition("monotonicity quantities need stored snapshots".into())
    })?;
    let last = *times.last().unwrap();
    if first > lo + tol || last < hi - tol {
        return Err(SwError::Precondition(format!(
            "history [{first}, {last}] does not cover the slab [{lo}, {hi}]"
        )));
    }
    let selected: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= lo - tol && times[i] <= hi + tol)
        .collect();
    if selected.len() < 3 {
        return Err(SwError::Precondition(format!(
            "slab [{lo}, {hi}] holds only {} snapshots; need at least 3",
            selected.len()
        )));
    }
    Ok(selected)
}

/// Evaluate (Φ, 𝓕) for one probe over the stored history.
pub fn monotonicity_quantities(history: &FlowHistory, probe: &Probe) -> Result<(f64, f64)> {
    let params = &history.params;
    let lat = params.lattice.clone();
    let selected = slab_snapshots(history, probe)?;
    let (m, nf) = (lat.dim(), params.fiber);
    let cell = lat.cell_volume();
    let length = lat.length();
    let radius = probe.radius;

    // Time integrands at each selected snapshot.
    let mut times = Vec::with_capacity(selected.len());
    let mut phi_integrand = Vec::with_capacity(selected.len());
    let mut f_integrand = Vec::with_capacity(selected.len());
    for &i in &selected {
        let state = &history.snapshots[i];
        let tau = probe.t0 - state.t;
        let dphi = covariant_diff(&state.phi, &state.a)?;
        let f = curvature(&state.a);
        let e = energy_density_parts(&state.phi, &dphi, &f, params.s_const);
        let (psi, b) = flow_rhs(&state.phi, &state.a, params)?;

        let mut sum_e = 0.0;
        let mut sum_f = 0.0;
        for s in 0..lat.site_count() {
            let v = lat.nearest_image(&lat.position(s), &probe.x0);
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cut = cutoff_value(r, length);
            if cut == 0.0 {
                continue;
            }
            let g = heat_kernel(&v, tau, m)?;
            let w = cut * cut * g;
            sum_e += e.values[s] * w;

            // Link part: |b_j + Σ_k (x_k/2t)·F_{kj}|² with x/2t = -v/(2τ).
            let mut link_part = 0.0;
            for j in 0..m {
                let mut val = b.values[s * m + j];
                for k in 0..m {
                    if k == j {
                        continue;
                    }
                    let fkj = if k < j {
                        f.get(s, lat.pair_index(k, j))
                    } else {
                        -f.get(s, lat.pair_index(j, k))
                    };
                    val += -v[k] / (2.0 * tau) * fkj;
                }
                link_part += val * val;
            }
            // Spinor part: 2|ψ + Σ_k (x_k/2t)·D_kφ|².
            let mut spin_part = 0.0;
            for c in 0..nf {
                let mut val = psi.values[s * nf + c];
                for k in 0..m {
                    val += -v[k] / (2.0 * tau) * dphi.values[(s * m + k) * nf + c];
                }
                spin_part += val.norm_sqr();
            }
            sum_f += (link_part + 2.0 * spin_part) * w;
        }
        times.push(state.t);
        phi_integrand.push(cell * sum_e);
        f_integrand.push(radius * tau * cell * sum_f);
    }

    let trapezoid = |ys: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..ys.len() - 1 {
            acc += 0.5 * (times[i + 1] - times[i]) * (ys[i] + ys[i + 1]);
        }
        acc
    };
    Ok((
        radius * radius * trapezoid(&phi_integrand),
        trapezoid(&f_integrand),
    ))
}

/// One probe radius with its quantities.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicityRow {
    pub radius: f64,
    pub phi: f64,
    pub f: f64,
}

/// Radius scan plus the smallest non-negative constants (a, c) on a search
/// grid for which R ↦ e^{aR}·Φ(R) + c·R²·SW₀ is non-decreasing across the
/// rows; `None` when no grid point works.
#[derive(Clone, Debug)]
pub struct MonotonicityTable {
    pub rows: Vec<MonotonicityRow>,
    pub fitted: Option<(f64, f64)>,
    pub sw_initial: f64,
}

fn fit_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut v = 0.0625;
    for _ in 0..13 {
        grid.push(v);
        v *= 2.0;
    }
    grid
}

fn is_monotone(rows: &[MonotonicityRow], a: f64, c: f64, sw0: f64) -> bool {
    let expr = |row: &MonotonicityRow| {
        (a * row.radius).exp() * row.phi + c * row.radius * row.radius * sw0
    };
    rows.windows(2).all(|w| {
        let lo = expr(&w[0]);
        let hi = expr(&w[1]);
        hi >= lo - 1e-12 * lo.abs().max(1.0)
    })
}

/// Evaluate (Φ, 𝓕) on a grid of radii and fit the corollary constants.
pub fn monotonicity_scan(
    history: &FlowHistory,
    x0: &[f64],
    t0: f64,
    radii: &[f64],
) -> Result<MonotonicityTable> {
    if radii.is_empty() {
        return Err(SwError::Precondition("radius grid must be nonempty".into()));
    }
    let lat = history.params.lattice.clone();
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let probe = Probe::new(&lat, x0.to_vec(), t0, radius)?;
        let (phi, f) = monotonicity_quantities(history, &probe)?;
        rows.push(MonotonicityRow { radius, phi, f });
    }
    rows.sort_by(|p, q| p.radius.partial_cmp(&q.radius).unwrap());
    let sw_initial = history.initial_sw();
    let grid = fit_grid();
    let mut fitted = None;
    'search: for &a in &grid {
        for &c in &grid {
            if is_monotone(&rows, a, c, sw_initial) {
                fitted = Some((a, c));
                break 'search;
            }
        }
    }
    Ok(MonotonicityTable {
        rows,
        fitted,
        sw_initial,
    })
}
