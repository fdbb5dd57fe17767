//! Spinor and connection containers, gauge transformations, covariant
//! differences, norms, and initial-data presets.
//!
//! The connection is stored as the real carrier a with A = i·a; a gauge
//! function χ acts by φ ↦ e^{-iχ}φ, a ↦ a + 2·d₀χ.  The covariant forward
//! difference carries the link phase θ_k(x) = (h/2)·a_k(x), which makes the
//! discrete gauge covariance exact: D_kφ picks up exactly the base-point
//! phase e^{-iχ(x)}.

use std::ops::Deref;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SwError};
use crate::lattice::{d_site_to_link, same_lattice, Lattice, LinkField, SiteScalarField};

/// Complex N-vector per site (the section of the spinor bundle).
#[derive(Clone, Debug)]
pub struct SpinorField {
    lattice: Arc<Lattice>,
    fiber: usize,
    pub values: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(lattice: Arc<Lattice>, fiber: usize) -> Self {
        let len = lattice.site_count() * fiber;
        Self {
            lattice,
            fiber,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    #[inline]
    pub fn site(&self, s: usize) -> &[Complex64] {
        &self.values[s * self.fiber..(s + 1) * self.fiber]
    }

    #[inline]
    pub fn site_mut(&mut self, s: usize) -> &mut [Complex64] {
        &mut self.values[s * self.fiber..(s + 1) * self.fiber]
    }

    /// |φ(x)|² at one site.
    #[inline]
    pub fn norm_sq_at(&self, s: usize) -> f64 {
        self.site(s).iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Real link field carrying the unitary connection, A = i·a with A₀ = 0.
#[derive(Clone, Debug)]
pub struct ConnectionField(pub LinkField);

impl ConnectionField {
    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        Self(LinkField::zeros(lattice))
    }
}

impl Deref for ConnectionField {
    type Target = LinkField;
    fn deref(&self) -> &LinkField {
        &self.0
    }
}

/// Link-indexed spinor field: the covariant difference D_kφ per (site, k).
#[derive(Clone, Debug)]
pub struct LinkSpinorField {
    lattice: Arc<Lattice>,
    fiber: usize,
    pub values: Vec<Complex64>,
}

impl LinkSpinorField {
    pub fn zeros(lattice: Arc<Lattice>, fiber: usize) -> Self {
        let len = lattice.site_count() * lattice.dim() * fiber;
        Self {
            lattice,
            fiber,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    #[inline]
    pub fn link(&self, s: usize, k: usize) -> &[Complex64] {
        let base = (s * self.lattice.dim() + k) * self.fiber;
        &self.values[base..base + self.fiber]
    }

    /// Σ_k |D_kφ(x)|² at one site.
    pub fn norm_sq_at(&self, s: usize) -> f64 {
        let m = self.lattice.dim();
        let base = s * m * self.fiber;
        self.values[base..base + m * self.fiber]
            .iter()
            .map(|v| v.norm_sqr())
            .sum()
    }
}

/// l2 = sqrt(h^m Σ |·|²); sup = max pointwise modulus (spinors: Euclidean
/// norm of the fiber vector).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub sup: f64,
}

pub trait Normed {
    fn norms(&self) -> Norms;
}

fn real_norms(lattice: &Lattice, values: &[f64]) -> Norms {
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let sup = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Norms {
        l2: (lattice.cell_volume() * sum_sq).sqrt(),
        sup,
    }
}

impl Normed for SiteScalarField {
    fn norms(&self) -> Norms {
        real_norms(self.lattice(), &self.values)
    }
}

impl Normed for LinkField {
    fn norms(&self) -> Norms {
        real_norms(self.lattice(), &self.values)
    }
}

impl Normed for crate::lattice::PlaquetteField {
    fn norms(&self) -> Norms {
        real_norms(self.lattice(), &self.values)
    }
}

impl Normed for ConnectionField {
    fn norms(&self) -> Norms {
        self.0.norms()
    }
}

impl Normed for SpinorField {
    fn norms(&self) -> Norms {
        let mut sum_sq = 0.0;
        let mut sup: f64 = 0.0;
        for s in 0..self.lattice.site_count() {
            let p = self.norm_sq_at(s);
            sum_sq += p;
            sup = sup.max(p);
        }
        Norms {
            l2: (self.lattice.cell_volume() * sum_sq).sqrt(),
            sup: sup.sqrt(),
        }
    }
}

impl Normed for LinkSpinorField {
    fn norms(&self) -> Norms {
        let m = self.lattice.dim();
        let nf = self.fiber;
        let mut sum_sq = 0.0;
        let mut sup: f64 = 0.0;
        for chunk in self.values.chunks(m * nf) {
            let p: f64 = chunk.iter().map(|v| v.norm_sqr()).sum();
            sum_sq += p;
            sup = sup.max(p);
        }
        Norms {
            l2: (self.lattice.cell_volume() * sum_sq).sqrt(),
            sup: sup.sqrt(),
        }
    }
}

/// Apply g = e^{iχ}: φ ↦ e^{-iχ}φ, a ↦ a + 2·d₀χ.
pub fn gauge_transform(
    phi: &SpinorField,
    a: &ConnectionField,
    chi: &SiteScalarField,
) -> Result<(SpinorField, ConnectionField)> {
    same_lattice(phi.lattice(), a.lattice())?;
    same_lattice(phi.lattice(), chi.lattice())?;
    let lat = phi.lattice().clone();
    let nf = phi.fiber();

    let mut phi_out = phi.clone();
    for s in 0..lat.site_count() {
        let phase = Complex64::from_polar(1.0, -chi.values[s]);
        for c in 0..nf {
            phi_out.values[s * nf + c] = phase * phi.values[s * nf + c];
        }
    }

    let dchi = d_site_to_link(chi);
    let mut a_out = ConnectionField(a.0.clone());
    for (v, d) in a_out.0.values.iter_mut().zip(&dchi.values) {
        *v += 2.0 * d;
    }
    Ok((phi_out, a_out))
}

/// Link transporters U_k(x) = e^{iθ}, θ = (h/2)·a_k(x).
///
/// Parallel map over links; each entry depends only on its own input, so the
/// result is identical for every thread count.
pub(crate) fn transporters(a: &ConnectionField) -> Vec<Complex64> {
    let mut u = Vec::new();
    transporters_into(a, &mut u);
    u
}

pub(crate) fn transporters_into(a: &ConnectionField, u: &mut Vec<Complex64>) {
    use rayon::prelude::*;
    let half_h = 0.5 * a.lattice().spacing();
    u.resize(a.values.len(), Complex64::new(0.0, 0.0));
    u.par_iter_mut()
        .with_min_len(4096)
        .zip(a.values.par_iter())
        .for_each(|(out, &v)| {
            let (sin, cos) = (half_h * v).sin_cos();
            *out = Complex64::new(cos, sin);
        });
}

/// Gauge-covariant forward difference
/// D_kφ(x) = [U_k(x)·φ(x+h e_k) - φ(x)]/h with U_k(x) = e^{i(h/2)a_k(x)}.
pub fn covariant_diff(phi: &SpinorField, a: &ConnectionField) -> Result<LinkSpinorField> {
    same_lattice(phi.lattice(), a.lattice())?;
    let u = transporters(a);
    Ok(covariant_diff_with(phi, &u))
}

pub(crate) fn covariant_diff_with(phi: &SpinorField, u: &[Complex64]) -> LinkSpinorField {
    let mut out = LinkSpinorField::zeros(phi.lattice().clone(), phi.fiber());
    covariant_diff_with_into(phi, u, &mut out);
    out
}

pub(crate) fn covariant_diff_with_into(
    phi: &SpinorField,
    u: &[Complex64],
    out: &mut LinkSpinorField,
) {
    use rayon::prelude::*;
    let lat = phi.lattice().clone();
    let (m, nf) = (lat.dim(), phi.fiber());
    let inv_h = 1.0 / lat.spacing();
    out.values
        .par_chunks_exact_mut(m * nf)
        .with_min_len(512)
        .enumerate()
        .for_each(|(s, site_row)| {
            let here = &phi.values[s * nf..(s + 1) * nf];
            let phases = &u[s * m..(s + 1) * m];
            for (k, link_row) in site_row.chunks_exact_mut(nf).enumerate() {
                let t = lat.fwd(s, k);
                let phase = phases[k];
                let next = &phi.values[t * nf..(t + 1) * nf];
                for c in 0..nf {
                    link_row[c] = (phase * next[c] - here[c]) * inv_h;
                }
            }
        });
}

/// Initial-data preset kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// Band-limited random plane-wave superposition, coefficients decaying
    /// like 1/(1+|k|²).
    RandomFourier,
    /// Gaussian spinor lump plus an azimuthal connection concentrated at
    /// `center` with scale `width`.
    Bubble,
    /// φ = 0 and a single transverse connection mode a_2 = α sin(2πx_1/L).
    MaxwellMode,
    /// Uniform spinor (α, 0, ..., 0), a = 0.
    Constant,
}

/// Validated description of initial data; deterministic in `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDataSpec {
    pub kind: InitKind,
    pub amplitude: f64,
    pub seed: u64,
    pub max_mode: usize,
    pub center: Vec<f64>,
    pub width: f64,
}

impl InitialDataSpec {
    fn validate(&self, lattice: &Lattice) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(SwError::Config(format!(
                "initial amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.max_mode < 1 {
            return Err(SwError::Config("max_mode must be at least 1".into()));
        }
        if !(self.width > 0.0 && self.width <= lattice.length() / 4.0) {
            return Err(SwError::Config(format!(
                "bubble width must lie in (0, L/4], got {}",
                self.width
            )));
        }
        if self.center.len() != lattice.dim() {
            return Err(SwError::Config(format!(
                "center must have {} components, got {}",
                lattice.dim(),
                self.center.len()
            )));
        }
        Ok(())
    }
}

/// Number of random plane waves per field component in `RandomFourier`.
const FOURIER_WAVES: usize = 16;

fn synth_waves(
    lattice: &Lattice,
    rng: &mut ChaCha8Rng,
    max_mode: usize,
    out: &mut dyn FnMut(usize, Complex64),
) {
    let m = lattice.dim();
    let two_pi_over_l = 2.0 * std::f64::consts::PI / lattice.length();
    let mm = max_mode as i64;
    let mut modes = Vec::with_capacity(FOURIER_WAVES);
    for _ in 0..FOURIER_WAVES {
        let k: Vec<i64> = (0..m).map(|_| rng.gen_range(-mm..=mm)).collect();
        let k_sq: f64 = k.iter().map(|&q| (q * q) as f64).sum();
        let decay = 1.0 / (1.0 + k_sq);
        let coeff = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay;
        modes.push((k, coeff));
    }
    for s in 0..lattice.site_count() {
        let x = lattice.position(s);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, coeff) in &modes {
            let phase: f64 =
                k.iter().zip(&x).map(|(&q, &xi)| q as f64 * xi).sum::<f64>() * two_pi_over_l;
            acc += coeff * Complex64::from_polar(1.0, phase);
        }
        out(s, acc);
    }
}

/// Build (φ₀, a₀) from a preset.  Identical spec (including seed) gives
/// bitwise-identical fields; the generator is ChaCha8 seeded with `seed`.
pub fn make_initial(
    spec: &InitialDataSpec,
    lattice: &Arc<Lattice>,
    fiber: usize,
) -> Result<(SpinorField, ConnectionField)> {
    spec.validate(lattice)?;
    let mut phi = SpinorField::zeros(lattice.clone(), fiber);
    let mut a = ConnectionField::zeros(lattice.clone());
    let amp = spec.amplitude;
    match spec.kind {
        InitKind::Constant => {
            for s in 0..lattice.site_count() {
                phi.values[s * fiber] = Complex64::new(amp, 0.0);
            }
        }
        InitKind::MaxwellMode => {
            let l = lattice.length();
            for s in 0..lattice.site_count() {
                let x1 = lattice.position(s)[0];
                a.0.set(s, 1, amp * (2.0 * std::f64::consts::PI * x1 / l).sin());
            }
        }
        InitKind::Bubble => {
            let w = spec.width;
            for s in 0..lattice.site_count() {
                let v = lattice.nearest_image(&lattice.position(s), &spec.center);
                let r_sq: f64 = v.iter().map(|x| x * x).sum();
                let g = (-r_sq / (2.0 * w * w)).exp();
                phi.values[s * fiber] = Complex64::new(amp * g, 0.0);
                a.0.set(s, 0, -amp * v[1] / w * g);
                a.0.set(s, 1, amp * v[0] / w * g);
            }
        }
        InitKind::RandomFourier => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for c in 0..fiber {
                synth_waves(lattice, &mut rng, spec.max_mode, &mut |s, v| {
                    phi.values[s * fiber + c] = amp * v;
                });
            }
            let m = lattice.dim();
            for k in 0..m {
                synth_waves(lattice, &mut rng, spec.max_mode, &mut |s, v| {
                    a.0.values[s * m + k] = amp * v.re;
                });
            }
        }
    }
    Ok((phi, a))
}
