//! Explicit time integration of the gradient flow, history recording, and
//! bit-exact snapshot persistence.
//!
//! The time step comes from the parabolic stability bound dt = cfl·h²/(2m);
//! euler exists for convergence tests, rk4 is the working scheme.  Non-finite
//! values abort the run with a blow-up record rather than being clamped —
//! concentration is something to detect, not hide.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, SwError};
use crate::fields::{ConnectionField, Normed, SpinorField};
use crate::functional::{
    flow_rhs_into, sw_functional, sw_functional_with, ModelParams, RhsBuffers,
};
use crate::lattice::{build_lattice, Lattice, LinkField};

/// One point on a trajectory.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub phi: SpinorField,
    pub a: ConnectionField,
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }
}

/// Integration parameters; dt = cfl·h²/(2m), stable for cfl in (0, 1].
#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
}

/// Per-step scalar log: enough to audit the energy inequality at every
/// accepted step without storing fields.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub sw: f64,
    pub sup_phi: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BlowupInfo {
    pub t: f64,
    pub step: usize,
}

/// Recorded trajectory: full snapshots on a cadence plus the scalar step log.
#[derive(Clone, Debug)]
pub struct FlowHistory {
    pub params: ModelParams,
    pub snapshots: Vec<FlowState>,
    /// Step index of each snapshot.
    pub snapshot_steps: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub blowup: Option<BlowupInfo>,
}

impl FlowHistory {
    pub fn initial_sw(&self) -> f64 {
        self.steps.first().map(|r| r.sw).unwrap_or(0.0)
    }
}

/// dt = cfl·h²/(2m).  Stability of the explicit schemes is guaranteed for
/// cfl ≤ 1; larger values are accepted so that instability experiments can
/// drive the flow into a recorded blow-up on purpose.
pub fn cfl_dt(lattice: &Lattice, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0) || !cfl.is_finite() {
        return Err(SwError::Config(format!("cfl must be positive, got {cfl}")));
    }
    let h = lattice.spacing();
    Ok(cfl * h * h / (2.0 * lattice.dim() as f64))
}

fn axpy_state(
    phi: &SpinorField,
    a: &ConnectionField,
    coeff: f64,
    psi: &SpinorField,
    b: &LinkField,
) -> (SpinorField, ConnectionField) {
    let mut phi_out = phi.clone();
    for (v, d) in phi_out.values.iter_mut().zip(&psi.values) {
        *v += coeff * d;
    }
    let mut a_out = ConnectionField(a.0.clone());
    for (v, d) in a_out.0.values.iter_mut().zip(&b.values) {
        *v += coeff * d;
    }
    (phi_out, a_out)
}

fn all_finite(phi: &SpinorField, a: &ConnectionField) -> bool {
    phi.values
        .iter()
        .all(|v| v.re.is_finite() && v.im.is_finite())
        && a.values.iter().all(|v| v.is_finite())
}

/// Reusable stage storage for the integrator; `evolve` keeps one across its
/// whole run so the large intermediates are allocated once.
pub struct StepWork {
    bufs: RhsBuffers,
    k_phi: [SpinorField; 4],
    k_a: [LinkField; 4],
    stage_phi: SpinorField,
    stage_a: ConnectionField,
}

impl StepWork {
    pub fn new(params: &ModelParams) -> Self {
        let lat = params.lattice.clone();
        let mk_p = || SpinorField::zeros(lat.clone(), params.fiber);
        let mk_a = || LinkField::zeros(lat.clone());
        Self {
            bufs: RhsBuffers::new(),
            k_phi: [mk_p(), mk_p(), mk_p(), mk_p()],
            k_a: [mk_a(), mk_a(), mk_a(), mk_a()],
            stage_phi: mk_p(),
            stage_a: ConnectionField(mk_a()),
        }
    }
}

fn stage_into(
    base_phi: &SpinorField,
    base_a: &ConnectionField,
    coeff: f64,
    kp: &SpinorField,
    ka: &LinkField,
    out_phi: &mut SpinorField,
    out_a: &mut ConnectionField,
) {
    for i in 0..base_phi.values.len() {
        out_phi.values[i] = base_phi.values[i] + coeff * kp.values[i];
    }
    for i in 0..base_a.values.len() {
        out_a.0.values[i] = base_a.values[i] + coeff * ka.values[i];
    }
}

/// Advance one step of (∂φ/∂t, ∂a/∂t) = flow_rhs(φ, a).
pub fn step(state: &FlowState, params: &ModelParams, dt: f64, scheme: Scheme) -> Result<FlowState> {
    let mut work = StepWork::new(params);
    step_with(state, params, dt, scheme, &mut work)
}

/// `step` with caller-owned scratch.
pub fn step_with(
    state: &FlowState,
    params: &ModelParams,
    dt: f64,
    scheme: Scheme,
    work: &mut StepWork,
) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(SwError::Config(format!("dt must be positive, got {dt}")));
    }
    let next = match scheme {
        Scheme::Euler => {
            let (kp, ka) = (&mut work.k_phi[0], &mut work.k_a[0]);
            flow_rhs_into(&state.phi, &state.a, params, &mut work.bufs, kp, ka)?;
            let (phi, a) = axpy_state(&state.phi, &state.a, dt, kp, ka);
            FlowState {
                t: state.t + dt,
                phi,
                a,
            }
        }
        Scheme::Rk4 => {
            let [k1, k2, k3, k4] = &mut work.k_phi;
            let [l1, l2, l3, l4] = &mut work.k_a;
            flow_rhs_into(&state.phi, &state.a, params, &mut work.bufs, k1, l1)?;
            stage_into(
                &state.phi,
                &state.a,
                0.5 * dt,
                k1,
                l1,
                &mut work.stage_phi,
                &mut work.stage_a,
            );
            flow_rhs_into(
                &work.stage_phi,
                &work.stage_a,
                params,
                &mut work.bufs,
                k2,
                l2,
            )?;
            stage_into(
                &state.phi,
                &state.a,
                0.5 * dt,
                k2,
                l2,
                &mut work.stage_phi,
                &mut work.stage_a,
            );
            flow_rhs_into(
                &work.stage_phi,
                &work.stage_a,
                params,
                &mut work.bufs,
                k3,
                l3,
            )?;
            stage_into(
                &state.phi,
                &state.a,
                dt,
                k3,
                l3,
                &mut work.stage_phi,
                &mut work.stage_a,
            );
            flow_rhs_into(
                &work.stage_phi,
                &work.stage_a,
                params,
                &mut work.bufs,
                k4,
                l4,
            )?;
            let sixth = dt / 6.0;
            let mut phi = state.phi.clone();
            for i in 0..phi.values.len() {
                phi.values[i] +=
                    sixth * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
            }
            let mut a = ConnectionField(state.a.0.clone());
            for i in 0..a.0.values.len() {
                a.0.values[i] +=
                    sixth * (l1.values[i] + 2.0 * l2.values[i] + 2.0 * l3.values[i] + l4.values[i]);
            }
            FlowState {
                t: state.t + dt,
                phi,
                a,
            }
        }
    };
    if !all_finite(&next.phi, &next.a) {
        return Err(SwError::BlowUp { t: next.t });
    }
    Ok(next)
}

/// Integrate from `initial` to t_end, recording snapshots every
/// `snapshot_every` steps plus the initial and final states.  On blow-up the
/// partial history is preserved and flagged.
pub fn evolve(
    initial: FlowState,
    params: &ModelParams,
    config: &IntegratorConfig,
) -> Result<FlowHistory> {
    if config.snapshot_every == 0 {
        return Err(SwError::Config("snapshot_every must be at least 1".into()));
    }
    if !(config.t_end >= 0.0) {
        return Err(SwError::Config(format!(
            "t_end must be non-negative, got {}",
            config.t_end
        )));
    }
    let dt_cap = cfl_dt(&params.lattice, config.cfl)?;
    let n_steps = if config.t_end == 0.0 {
        0
    } else {
        // Small slack so t_end = k·dt yields exactly k steps despite rounding.
        (config.t_end / dt_cap - 1e-9).ceil().max(1.0) as usize
    };
    let dt = if n_steps == 0 {
        0.0
    } else {
        config.t_end / n_steps as f64
    };

    let mut history = FlowHistory {
        params: params.clone(),
        snapshots: Vec::new(),
        snapshot_steps: Vec::new(),
        steps: Vec::new(),
        blowup: None,
    };
    let mut state = initial;
    let mut work = StepWork::new(params);
    let sw = sw_functional_with(&state.phi, &state.a, params, &mut work.bufs)?;
    history.steps.push(StepRecord {
        step: 0,
        t: state.t,
        sw,
        sup_phi: state.phi.norms().sup,
    });
    history.snapshots.push(state.clone());
    history.snapshot_steps.push(0);

    for k in 1..=n_steps {
        match step_with(&state, params, dt, config.scheme, &mut work) {
            Ok(next) => state = next,
            Err(SwError::BlowUp { t }) => {
                history.blowup = Some(BlowupInfo { t, step: k });
                return Ok(history);
            }
            Err(e) => return Err(e),
        }
        let sw = sw_functional_with(&state.phi, &state.a, params, &mut work.bufs)?;
        history.steps.push(StepRecord {
            step: k,
            t: state.t,
            sw,
            sup_phi: state.phi.norms().sup,
        });
        if k % config.snapshot_every == 0 || k == n_steps {
            history.snapshots.push(state.clone());
            history.snapshot_steps.push(k);
        }
    }
    Ok(history)
}

const MAGIC: &[u8; 4] = b"SWFL";
const VERSION: u32 = 1;
const HEADER_BYTES: usize = 44;

/// Write one state in the normative little-endian layout:
/// magic "SWFL", u32 version, u32 m, u32 n, f64 L, f64 t, f64 S, u32 N,
/// spinor payload (site-major, fiber minor, re/im per component), then the
/// connection payload (site-major, axis minor).
pub fn write_snapshot(state: &FlowState, params: &ModelParams, path: &Path) -> Result<()> {
    let lat = &params.lattice;
    let mut buf: Vec<u8> =
        Vec::with_capacity(HEADER_BYTES + 16 * state.phi.values.len() + 8 * state.a.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(lat.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(lat.sites_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&lat.length().to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&params.s_const.to_le_bytes());
    buf.extend_from_slice(&(params.fiber as u32).to_le_bytes());
    for v in &state.phi.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    for v in &state.a.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(SwError::Format("snapshot file truncated".into()));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Read a snapshot written by `write_snapshot`; the round trip is bit-exact.
///
/// Pass an existing lattice to share it across snapshots of one history; it
/// must match the header exactly.
pub fn read_snapshot(
    path: &Path,
    lattice: Option<Arc<Lattice>>,
) -> Result<(FlowState, ModelParams)> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
    };
    if cur.take(4)? != MAGIC {
        return Err(SwError::Format("bad magic (expected SWFL)".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(SwError::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let m = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    let length = cur.f64()?;
    let t = cur.f64()?;
    let s_const = cur.f64()?;
    let fiber = cur.u32()? as usize;
    let lat = match lattice {
        Some(lat) => {
            if lat.dim() != m || lat.sites_per_axis() != n || lat.length() != length {
                return Err(SwError::Format(
                    "snapshot header disagrees with history lattice".into(),
                ));
            }
            lat
        }
        None => build_lattice(m, n, length)
            .map_err(|e| SwError::Format(format!("invalid lattice in header: {e}")))?,
    };
    let sites = lat.site_count();
    let expected = HEADER_BYTES + 16 * sites * fiber + 8 * sites * m;
    if data.len() != expected {
        return Err(SwError::Format(format!(
            "payload length {} does not match header shape (expected {expected})",
            data.len()
        )));
    }
    let mut phi = SpinorField::zeros(lat.clone(), fiber);
    for v in phi.values.iter_mut() {
        let re = cur.f64()?;
        let im = cur.f64()?;
        *v = Complex64::new(re, im);
    }
    let mut a = ConnectionField::zeros(lat.clone());
    for v in a.0.values.iter_mut() {
        *v = cur.f64()?;
    }
    let params = ModelParams::new(lat, s_const, fiber)
        .map_err(|e| SwError::Format(format!("invalid model header: {e}")))?;
    Ok((FlowState { t, phi, a }, params))
}

/// Read every `snap_*.swfl` file in a directory as one history, sorted by
/// time.  Other `.swfl` files (e.g. rescale outputs) are ignored.
pub fn read_history(dir: &Path) -> Result<FlowHistory> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|x| x == "swfl").unwrap_or(false)
                && p.file_name()
                    .and_then(|f| f.to_str())
                    .map(|f| f.starts_with("snap_"))
                    .unwrap_or(false)
        })
        .collect();
    if paths.is_empty() {
        return Err(SwError::Precondition(format!(
            "no snapshot files (snap_*.swfl) found in {}",
            dir.display()
        )));
    }
    paths.sort();
    let mut snapshots = Vec::with_capacity(paths.len());
    let mut params: Option<ModelParams> = None;
    for p in &paths {
        let lat = params.as_ref().map(|p: &ModelParams| p.lattice.clone());
        let (state, file_params) = read_snapshot(p, lat)?;
        match &params {
            None => params = Some(file_params),
            Some(existing) => {
                if existing.s_const != file_params.s_const || existing.fiber != file_params.fiber {
                    return Err(SwError::Format(
                        "snapshots in history have inconsistent model headers".into(),
                    ));
                }
            }
        }
        snapshots.push(state);
    }
    snapshots.sort_by(|x, y| x.t.partial_cmp(&y.t).unwrap());
    for w in snapshots.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(SwError::Format(
                "snapshot times must be strictly increasing".into(),
            ));
        }
    }
    let params = params.unwrap();
    let steps = snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(StepRecord {
                step: i,
                t: s.t,
                sw: sw_functional(&s.phi, &s.a, &params)?,
                sup_phi: s.phi.norms().sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let snapshot_steps = (0..snapshots.len()).collect();
    Ok(FlowHistory {
        params,
        snapshots,
        snapshot_steps,
        steps,
        blowup: None,
    })
}
