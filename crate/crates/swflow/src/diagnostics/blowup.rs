//! Parabolic blow-up rescaling and the curvature scaling profile.
//!
//! Zooming by R_n = k·h maps y-lattice points j/k onto original sites
//! x_n + j·h exactly, so the discrete scaling identities
//! |f'|² = R_n⁴|f|² and |D'φ'|² = R_n²|Dφ|² hold at machine precision:
//! stencil and spacing rescale together.

use crate::error::{Result, SwError};
use crate::fields::{ConnectionField, SpinorField};
use crate::flow::FlowHistory;
use crate::functional::{curvature, ModelParams};
use crate::lattice::{build_lattice, SiteScalarField};

/// Rescale the snapshot at time `t_n` about the site `x_site` with ratio
/// k ≥ 2: the output lives on a lattice with spacing 1/k and period n/k,
/// with φ'(y) = φ(x_n + R_n·y) and a' = R_n·a.
pub fn rescale_blowup(
    history: &FlowHistory,
    x_site: usize,
    t_n: f64,
    k: usize,
) -> Result<(SpinorField, ConnectionField)> {
    if k < 2 {
        return Err(SwError::Domain(format!(
            "rescaling ratio must be at least 2, got {k}"
        )));
    }
    let lat = history.params.lattice.clone();
    let n = lat.sites_per_axis();
    if n % k != 0 {
        return Err(SwError::Domain(format!(
            "ratio {k} must divide the sites per axis {n} (k·h must divide L)"
        )));
    }
    let tol = 1e-12 * t_n.abs().max(1.0);
    let snapshot = history
        .snapshots
        .iter()
        .find(|s| (s.t - t_n).abs() <= tol)
        .ok_or_else(|| SwError::Precondition(format!("no stored snapshot at t = {t_n}")))?;
    if x_site >= lat.site_count() {
        return Err(SwError::Domain(format!(
            "center site {x_site} out of range"
        )));
    }

    let m = lat.dim();
    let scale = k as f64 * lat.spacing(); // R_n
    let rescaled_lat = build_lattice(m, n, n as f64 / k as f64)?;
    let fiber = history.params.fiber;
    let mut phi = SpinorField::zeros(rescaled_lat.clone(), fiber);
    let mut a = ConnectionField::zeros(rescaled_lat.clone());
    let c0 = lat.coords(x_site);
    let mut coords = vec![0usize; m];
    let mut shifted = vec![0usize; m];
    for s in 0..rescaled_lat.site_count() {
        rescaled_lat.coords_into(s, &mut coords);
        for axis in 0..m {
            shifted[axis] = coords[axis] + c0[axis];
        }
        let orig = lat.site_from_coords(&shifted);
        for c in 0..fiber {
            phi.values[s * fiber + c] = snapshot.phi.values[orig * fiber + c];
        }
        for axis in 0..m {
            a.0.values[s * m + axis] = scale * snapshot.a.values[orig * m + axis];
        }
    }
    Ok((phi, a))
}

/// Rows (r, r^{2-m} ∫_{B_r(x₀)} density) for a given per-site density.
pub fn profile_rows(dens: &SiteScalarField, x0: &[f64], r_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    let lat = dens.lattice().clone();
    let m = lat.dim() as i32;
    for &r in r_list {
        if !(r > 0.0 && r <= lat.length() / 2.0) {
            return Err(SwError::Domain(format!(
                "profile radius must lie in (0, L/2], got {r}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let r_sq = r * r;
        let mut sum = 0.0;
        for s in 0..lat.site_count() {
            let v = lat.nearest_image(&lat.position(s), x0);
            if v.iter().map(|x| x * x).sum::<f64>() <= r_sq {
                sum += dens.values[s];
            }
        }
        rows.push((r, r.powi(2 - m) * lat.cell_volume() * sum));
    }
    Ok(rows)
}

/// r^{2-m} ∫_{B_r(x₀)} |f|² per requested radius — the quantity whose growth
/// in r drives the final scaling contradiction.  Emitted for inspection; no
/// bound is asserted on raw lattice data.
pub fn curvature_scaling_profile(
    phi: &SpinorField,
    a: &ConnectionField,
    x0: &[f64],
    r_list: &[f64],
    params: &ModelParams,
) -> Result<Vec<(f64, f64)>> {
    crate::lattice::same_lattice(phi.lattice(), a.lattice())?;
    crate::lattice::same_lattice(phi.lattice(), &params.lattice)?;
    let f = curvature(a);
    let lat = phi.lattice().clone();
    let mut dens = SiteScalarField::zeros(lat.clone());
    for s in 0..lat.site_count() {
        dens.values[s] = f.norm_sq_at(s);
    }
    profile_rows(&dens, x0, r_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{covariant_diff, make_initial, InitKind, InitialDataSpec};
    use crate::flow::FlowState;
    use crate::lattice::build_lattice;

    fn history_one_snapshot(
        m: usize,
        n: usize,
        seed: u64,
    ) -> (FlowHistory, SpinorField, ConnectionField) {
        let lat = build_lattice(m, n, 1.0).unwrap();
        let spec = InitialDataSpec {
            kind: InitKind::RandomFourier,
            amplitude: 0.8,
            seed,
            max_mode: 2,
            center: vec![0.5; m],
            width: 0.125,
        };
        let (phi, a) = make_initial(&spec, &lat, 2).unwrap();
        let params = ModelParams::new(lat.clone(), 0.0, 2).unwrap();
        let history = FlowHistory {
            params,
            snapshots: vec![FlowState {
                t: 0.25,
                phi: phi.clone(),
                a: ConnectionField(a.0.clone()),
            }],
            snapshot_steps: vec![0],
            steps: vec![],
            blowup: None,
        };
        (history, phi, a)
    }

    #[test]
    fn rescaling_scales_curvature_and_covariant_difference_exactly() {
        for (m, n, k, seed) in [(4usize, 8usize, 2usize, 21u64), (5, 8, 4, 24)] {
            let (history, phi, a) = history_one_snapshot(m, n, seed);
            let lat = history.params.lattice.clone();
            let scale = k as f64 * lat.spacing();
            let center = lat.site_from_coords(&vec![3; m]);
            let (phi2, a2) = rescale_blowup(&history, center, 0.25, k).unwrap();

            let f = curvature(&a);
            let f2 = curvature(&a2);
            let d = covariant_diff(&phi, &a).unwrap();
            let d2 = covariant_diff(&phi2, &a2).unwrap();
            let lat2 = phi2.lattice().clone();
            let c0 = lat.coords(center);
            let mut worst_f: f64 = 0.0;
            let mut worst_d: f64 = 0.0;
            for s in 0..lat2.site_count() {
                let mut shifted = lat2.coords(s);
                for axis in 0..m {
                    shifted[axis] += c0[axis];
                }
                let orig = lat.site_from_coords(&shifted);
                let scaled_f = f2.norm_sq_at(s);
                let expect_f = scale.powi(4) * f.norm_sq_at(orig);
                worst_f = worst_f.max((scaled_f - expect_f).abs());
                let scaled_d = d2.norm_sq_at(s);
                let expect_d = scale.powi(2) * d.norm_sq_at(orig);
                worst_d = worst_d.max((scaled_d - expect_d).abs());
            }
            assert!(worst_f <= 1e-12, "m={m} k={k}: |f'|² mismatch {worst_f}");
            assert!(worst_d <= 1e-12, "m={m} k={k}: |D'φ'|² mismatch {worst_d}");
            // Rescaled lattice has spacing 1/k.
            assert!((lat2.spacing() - 1.0 / k as f64).abs() < 1e-15);
            // sup of the shrunken spinor R_n·φ' equals R_n · sup|φ|.
            use crate::fields::Normed;
            assert!((scale * phi2.norms().sup - scale * phi.norms().sup).abs() < 1e-15);
        }
    }

    #[test]
    fn rescale_rejects_bad_ratio_and_time() {
        let (history, _, _) = history_one_snapshot(4, 8, 22);
        assert!(matches!(
            rescale_blowup(&history, 0, 0.25, 3),
            Err(SwError::Domain(_))
        ));
        assert!(matches!(
            rescale_blowup(&history, 0, 0.25, 1),
            Err(SwError::Domain(_))
        ));
        assert!(matches!(
            rescale_blowup(&history, 0, 0.5, 2),
            Err(SwError::Precondition(_))
        ));
    }

    #[test]
    fn profile_of_zero_curvature_is_zero_everywhere() {
        let lat = build_lattice(4, 8, 1.0).unwrap();
        let phi = SpinorField::zeros(lat.clone(), 2);
        let a = ConnectionField::zeros(lat.clone());
        let params = ModelParams::new(lat.clone(), 0.0, 2).unwrap();
        let rows =
            curvature_scaling_profile(&phi, &a, &[0.5; 4], &[0.1, 0.2, 0.4], &params).unwrap();
        assert!(rows.iter().all(|&(_, v)| v == 0.0));
        assert!(matches!(
            curvature_scaling_profile(&phi, &a, &[0.5; 4], &[0.6], &params),
            Err(SwError::Domain(_))
        ));
    }

    #[test]
    fn constant_density_profile_grows_like_r_squared() {
        // Synthetic constant |f|² density: value(r) = r^{2-m}·c·vol(B_r),
        // so doubling r multiplies the row by ~4 up to ball discretization.
        let lat = build_lattice(4, 16, 1.0).unwrap();
        let mut dens = SiteScalarField::zeros(lat.clone());
        for v in dens.values.iter_mut() {
            *v = 0.7;
        }
        let rows = profile_rows(&dens, &[0.5; 4], &[0.1875, 0.375]).unwrap();
        let ratio = rows[1].1 / rows[0].1;
        assert!(
            (ratio - 4.0).abs() <= 0.4,
            "expected ~4 (within 10%), got {ratio}"
        );
    }

    #[test]
    fn profile_matches_naive_loop_oracle() {
        let (_, phi, a) = history_one_snapshot(4, 8, 23);
        let lat = phi.lattice().clone();
        let params = ModelParams::new(lat.clone(), 0.0, 2).unwrap();
        let x0 = vec![0.3, 0.5, 0.7, 0.2];
        let r = 0.37;
        let rows = curvature_scaling_profile(&phi, &a, &x0, &[r], &params).unwrap();
        // Oracle: raw stencil sum.
        let h = lat.spacing();
        let m = lat.dim();
        let mut sum = 0.0;
        for s in 0..lat.site_count() {
            let v = lat.nearest_image(&lat.position(s), &x0);
            if v.iter().map(|x| x * x).sum::<f64>() > r * r {
                continue;
            }
            for j in 0..m {
                for k in (j + 1)..m {
                    let sj = lat.fwd(s, j);
                    let sk = lat.fwd(s, k);
                    let f = ((a.get(sj, k) - a.get(s, k)) - (a.get(sk, j) - a.get(s, j))) / h;
                    sum += f * f;
                }
            }
        }
        let oracle = r.powi(2 - m as i32) * lat.cell_volume() * sum;
        assert!((rows[0].1 - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }
}
