//! CSV emission with round-trip-exact floats (17 significant digits).

use std::fs;
use std::path::Path;

use crate::diagnostics::{DetectorScan, EnergyRecord, MonotonicityTable};
use crate::error::Result;
use crate::lattice::Lattice;

/// 17 significant digits: enough for f64 values to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Schema: step, t, sw, sup_phi, dsw_dt, identity_residual.
pub fn write_energy_csv(path: &Path, records: &[EnergyRecord]) -> Result<()> {
    let mut out = String::from("step,t,sw,sup_phi,dsw_dt,identity_residual\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            fmt_f64(r.t),
            fmt_f64(r.sw),
            fmt_f64(r.sup_phi),
            fmt_opt(r.dsw_dt),
            fmt_opt(r.identity_residual),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Schema: R, Phi, F, fitted_a, fitted_c (fit columns repeated per row,
/// empty when unattainable).
pub fn write_monotonicity_csv(path: &Path, table: &MonotonicityTable) -> Result<()> {
    let mut out = String::from("R,Phi,F,fitted_a,fitted_c\n");
    let (fa, fc) = match table.fitted {
        Some((a, c)) => (fmt_f64(a), fmt_f64(c)),
        None => (String::new(), String::new()),
    };
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(row.radius),
            fmt_f64(row.phi),
            fmt_f64(row.f),
            fa,
            fc,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Schema: one integer coordinate column per axis, one energy column per
/// radius, then the flag.
pub fn write_detector_csv(path: &Path, lattice: &Lattice, scan: &DetectorScan) -> Result<()> {
    let m = lattice.dim();
    let mut out = String::new();
    for axis in 0..m {
        out.push_str(&format!("c{axis},"));
    }
    for (i, r) in scan.radii.iter().enumerate() {
        out.push_str(&format!("e_r{i}_{},", fmt_f64(*r)));
    }
    out.push_str("flagged\n");
    let flag_set: std::collections::HashSet<usize> = scan.flagged.iter().copied().collect();
    let mut coords = vec![0usize; m];
    for s in 0..lattice.site_count() {
        lattice.coords_into(s, &mut coords);
        for c in &coords {
            out.push_str(&format!("{c},"));
        }
        for e in &scan.energies {
            out.push_str(&fmt_f64(e[s]));
            out.push(',');
        }
        out.push_str(if flag_set.contains(&s) { "1\n" } else { "0\n" });
    }
    fs::write(path, out)?;
    Ok(())
}

/// Schema: r, value.
pub fn write_profile_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("r,value\n");
    for &(r, v) in rows {
        out.push_str(&format!("{},{}\n", fmt_f64(r), fmt_f64(v)));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -2.5e-17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }
}
