//! Computable forms of the analytic apparatus around the flow: the energy
//! identity, the sup bound, backward heat-kernel monotonicity quantities,
//! ε-regularity detection with Vitali covers, blow-up rescaling, and the
//! curvature scaling profile.
//!
//! The detector threshold δ and radius cap R₁, and the monotonicity
//! constants (a, c), are existence constants with no canonical values; they
//! enter as configuration and fit outputs, never as hard-coded assertions.

mod blowup;
mod detector;
mod energy;
mod monotonicity;

pub mod csv;

pub use blowup::{curvature_scaling_profile, profile_rows, rescale_blowup};
pub use detector::{
    detect_singular_set, hausdorff_bound, local_energy, vitali_cover, DetectorReport, DetectorScan,
    LocalEnergyMode,
};
pub use energy::{energy_report, max_principle_check, EnergyRecord, MaxPrincipleReport};
pub use monotonicity::{
    monotonicity_quantities, monotonicity_scan, MonotonicityRow, MonotonicityTable,
};

use crate::error::{Result, SwError};
use crate::lattice::Lattice;

/// Space-time probe z₀ = (x₀, t₀) with slab radius R.
///
/// The slab [t₀-4R², t₀-R²] must start at non-negative time, so
/// R ≤ √t₀/2; the cutoff geometry caps R at the injectivity radius L/2.
#[derive(Clone, Debug)]
pub struct Probe {
    pub x0: Vec<f64>,
    pub t0: f64,
    pub radius: f64,
}

impl Probe {
    pub fn new(lattice: &Lattice, x0: Vec<f64>, t0: f64, radius: f64) -> Result<Self> {
        if x0.len() != lattice.dim() {
            return Err(SwError::Shape(format!(
                "probe center needs {} components, got {}",
                lattice.dim(),
                x0.len()
            )));
        }
        if !(t0 >= 0.0) {
            return Err(SwError::Domain(format!(
                "probe time must be >= 0, got {t0}"
            )));
        }
        let cap = lattice.injectivity_radius().min(t0.sqrt() / 2.0);
        if !(radius > 0.0 && radius <= cap) {
            return Err(SwError::Precondition(format!(
                "probe radius must satisfy 0 < R <= min(i(M), sqrt(t0)/2) = {cap}, got {radius}"
            )));
        }
        Ok(Self { x0, t0, radius })
    }
}

/// ε-regularity detector configuration.  The paper-style constants (δ, R₁)
/// are free parameters here; defaults δ = 0.05 and radii {L/4, L/8, L/16}.
#[derive(Clone, Debug)]
pub struct DetectorConfig {
    pub delta: f64,
    pub radii: Vec<f64>,
    pub r1: f64,
}

impl DetectorConfig {
    pub fn defaults(lattice: &Lattice) -> Self {
        let l = lattice.length();
        Self {
            delta: 0.05,
            radii: vec![l / 4.0, l / 8.0, l / 16.0],
            r1: l / 4.0,
        }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(SwError::Config(format!(
                "detector threshold must be positive, got {}",
                self.delta
            )));
        }
        if self.radii.is_empty() {
            return Err(SwError::Config("detector needs at least one radius".into()));
        }
        let cap = lattice.injectivity_radius().min(self.r1);
        for &r in &self.radii {
            if !(r > 0.0 && r <= cap) {
                return Err(SwError::Config(format!(
                    "detector radius {r} outside (0, min(i(M), R1)] = (0, {cap}]"
                )));
            }
        }
        Ok(())
    }
}

/// Radial cutoff: identically 1 on [0, L/4], identically 0 beyond L/2, and a
/// monotone C² quintic smoothstep in between.
pub fn cutoff_value(r: f64, length: f64) -> f64 {
    let plateau = length / 4.0;
    let support = length / 2.0;
    if r <= plateau {
        1.0
    } else if r >= support {
        0.0
    } else {
        let u = (r - plateau) / plateau;
        1.0 - (10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5))
    }
}

/// Backward heat kernel weight (4πτ)^{-m/2}·exp(-|offset|²/4τ) with
/// τ = t₀ - t > 0 and `offset` the nearest-image separation from x₀.
pub fn heat_kernel(offset: &[f64], tau: f64, m: usize) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(SwError::Domain(format!(
            "heat kernel needs tau > 0, got {tau}"
        )));
    }
    let r_sq: f64 = offset.iter().map(|v| v * v).sum();
    Ok((4.0 * std::f64::consts::PI * tau).powf(-(m as f64) / 2.0) * (-r_sq / (4.0 * tau)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn cutoff_plateau_support_and_midpoint() {
        let l = 2.0;
        assert_eq!(cutoff_value(0.0, l), 1.0);
        assert_eq!(cutoff_value(l / 4.0, l), 1.0);
        assert_eq!(cutoff_value(l / 2.0, l), 0.0);
        assert_eq!(cutoff_value(10.0 * l, l), 0.0);
        // r = 3L/8 sits at u = 1/2 where the smoothstep is 1/2.
        assert!((cutoff_value(3.0 * l / 8.0, l) - 0.5).abs() < 1e-15);
        // Monotone non-increasing across the shoulder.
        let mut prev = 1.0;
        for i in 0..=100 {
            let r = l / 4.0 + (l / 4.0) * i as f64 / 100.0;
            let v = cutoff_value(r, l);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn heat_kernel_peak_symmetry_and_domain() {
        let tau = 0.3;
        let peak = heat_kernel(&[0.0; 4], tau, 4).unwrap();
        assert!((peak - (4.0 * std::f64::consts::PI * tau).powi(-2)).abs() < 1e-15);
        let v = [0.1, -0.2, 0.05, 0.3];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(
            heat_kernel(&v, tau, 4).unwrap(),
            heat_kernel(&neg, tau, 4).unwrap()
        );
        assert!(matches!(heat_kernel(&v, 0.0, 4), Err(SwError::Domain(_))));
        assert!(matches!(heat_kernel(&v, -1.0, 4), Err(SwError::Domain(_))));
    }

    #[test]
    fn heat_kernel_lattice_mass_is_nearly_one() {
        // h^m-sum of G·cutoff² at tau = (L/16)² captures nearly the full
        // Gaussian mass: the plateau holds to 4 sigma and the smoothstep
        // recovers most of the shoulder.
        let lat = build_lattice(4, 16, 1.0).unwrap();
        let l = lat.length();
        let tau = (l / 16.0) * (l / 16.0);
        let x0 = vec![l / 2.0; 4];
        let mut sum = 0.0;
        for s in 0..lat.site_count() {
            let v = lat.nearest_image(&lat.position(s), &x0);
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = cutoff_value(r, l);
            sum += c * c * heat_kernel(&v, tau, 4).unwrap();
        }
        sum *= lat.cell_volume();
        assert!(
            sum > 0.9 && sum <= 1.0,
            "truncated Gaussian mass {sum} outside (0.9, 1.0]"
        );
    }

    #[test]
    fn probe_enforces_radius_caps() {
        let lat = build_lattice(4, 8, 1.0).unwrap();
        // sqrt(t0)/2 = 0.25 < i(M) = 0.5.
        assert!(Probe::new(&lat, vec![0.5; 4], 0.25, 0.2).is_ok());
        assert!(matches!(
            Probe::new(&lat, vec![0.5; 4], 0.25, 0.3),
            Err(SwError::Precondition(_))
        ));
        // i(M) caps even when t0 is large.
        assert!(matches!(
            Probe::new(&lat, vec![0.5; 4], 100.0, 0.6),
            Err(SwError::Precondition(_))
        ));
        assert!(matches!(
            Probe::new(&lat, vec![0.5; 3], 0.25, 0.2),
            Err(SwError::Shape(_))
        ));
    }

    #[test]
    fn detector_config_validation() {
        let lat = build_lattice(4, 8, 1.0).unwrap();
        let cfg = DetectorConfig::defaults(&lat);
        assert!(cfg.validate(&lat).is_ok());
        assert_eq!(cfg.radii, vec![0.25, 0.125, 0.0625]);
        let bad = DetectorConfig {
            delta: 0.0,
            ..cfg.clone()
        };
        assert!(bad.validate(&lat).is_err());
        let bad = DetectorConfig {
            radii: vec![0.3],
            r1: 0.25,
            ..cfg
        };
        assert!(bad.validate(&lat).is_err());
    }
}
