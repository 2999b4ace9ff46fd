//! Right-hand side of the contour equations and adaptive time stepping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::interface::{Boundary, DomainSpec, InterfaceProfile, PlaneKind, Snapshot};
use crate::kernels::periodized_from_parts;
use crate::par;
use crate::quadrature::{integrate, QuadOptions};

/// Treatment of the reflected term near points where the interface
/// (nearly) touches the bottom, i.e. where `f(x) <= h_floor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TouchRule {
    /// Replace the reflected-term node value by its touching limit.
    Node,
    /// Add the exact-minus-trapezoid error of the local Taylor model of the
    /// full integrand over the `2 window + 1` cells around the node.
    Cell { window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RhsOptions {
    /// `h_floor = h_floor_factor * dx * max_slope`.
    pub h_floor_factor: f64,
    pub touch_rule: TouchRule,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self {
            h_floor_factor: 10.0,
            touch_rule: TouchRule::Cell { window: 4 },
        }
    }
}

impl RhsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_floor_factor.is_finite() && self.h_floor_factor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "h_floor_factor must be finite and non-negative, got {}",
                self.h_floor_factor
            )));
        }
        Ok(())
    }
}

/// `f_t` for the half-plane equation (difference plus reflected term).
pub fn rhs_halfplane(profile: &InterfaceProfile) -> Result<Vec<f64>> {
    rhs_halfplane_with(profile, &RhsOptions::default())
}

pub fn rhs_halfplane_with(profile: &InterfaceProfile, opts: &RhsOptions) -> Result<Vec<f64>> {
    if profile.domain().plane != PlaneKind::HalfPlane {
        return Err(Error::Domain("rhs_halfplane needs a half-plane profile".into()));
    }
    if let Some((index, &value)) = profile.samples().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeHeight { index, value });
    }
    rhs(profile.domain(), profile.samples(), opts)
}

/// `f_t` for the whole-plane equation (difference term only).
pub fn rhs_plane(profile: &InterfaceProfile) -> Result<Vec<f64>> {
    if profile.domain().plane != PlaneKind::WholePlane {
        return Err(Error::Domain("rhs_plane needs a whole-plane profile".into()));
    }
    rhs(profile.domain(), profile.samples(), &RhsOptions::default())
}

/// Right-hand side for either plane kind. Samples are not required to be
/// non-negative so that Runge–Kutta stages slightly below the bottom can
/// still be evaluated.
pub fn rhs(domain: &DomainSpec, samples: &[f64], opts: &RhsOptions) -> Result<Vec<f64>> {
    let profile = InterfaceProfile::from_samples(
        DomainSpec {
            plane: PlaneKind::WholePlane,
            ..*domain
        },
        samples.to_vec(),
    )?;
    let (fx, fxx) = profile.first_two_derivatives();
    let n = samples.len();
    let dx = profile.dx();
    let half = domain.plane == PlaneKind::HalfPlane;
    let max_slope = fx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h_floor = opts.h_floor_factor * dx * max_slope;
    let f = samples;

    let out = match domain.boundary {
        Boundary::Periodic { period } => {
            let w = PI / period;
            let sin2: Vec<f64> = (0..n).map(|k| (2.0 * w * k as f64 * dx).sin()).collect();
            let omc: Vec<f64> = (0..n)
                .map(|k| {
                    let s = (w * k as f64 * dx).sin();
                    2.0 * s * s
                })
                .collect();
            par::map_indices(n, |i| {
                let (f0, fx0) = (f[i], fx[i]);
                let mut acc = 0.0;
                for k in 1..n {
                    let j = if k <= i { i - k } else { i + n - k };
                    let dm = f0 - f[j];
                    let sm = (w * dm).sinh();
                    acc += (fx0 - fx[j]) * periodized_from_parts(w, sin2[k], omc[k], 2.0 * sm * sm);
                    if half {
                        let dp = f0 + f[j];
                        let sp = (w * dp).sinh();
                        acc += (fx0 + fx[j]) * periodized_from_parts(w, sin2[k], omc[k], 2.0 * sp * sp);
                    }
                }
                finish_point(acc, f0, fx0, fxx[i], dx, half, h_floor, opts, 0.0)
            })
        }
        Boundary::Asymptotic { psi_inf, half_width } => par::map_indices(n, |i| {
            let (f0, fx0) = (f[i], fx[i]);
            let mut acc = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let y = (i as f64 - j as f64) * dx;
                let dm = f0 - f[j];
                acc += y * (fx0 - fx[j]) / (y * y + dm * dm);
                if half {
                    let dp = f0 + f[j];
                    acc += y * (fx0 + fx[j]) / (y * y + dp * dp);
                }
            }
            // Sources beyond the grid sit at psi_inf with zero slope; their
            // contribution integrates to a logarithm in closed form.
            let x = -half_width + i as f64 * dx;
            let a = x - half_width + 0.5 * dx;
            let b = x + half_width + 0.5 * dx;
            let tail = |d: f64| 0.5 * fx0 * ((a * a + d * d) / (b * b + d * d)).ln();
            let mut far = tail(f0 - psi_inf);
            if half {
                far += tail(f0 + psi_inf);
            }
            finish_point(acc, f0, fx0, fxx[i], dx, half, h_floor, opts, far)
        }),
    };

    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteRhs {
            index,
            x: profile.x(index),
        });
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn finish_point(
    acc: f64,
    f0: f64,
    fx0: f64,
    fxx0: f64,
    dx: f64,
    half: bool,
    h_floor: f64,
    opts: &RhsOptions,
    far: f64,
) -> f64 {
    let node_minus = fxx0 / (1.0 + fx0 * fx0);
    if !half {
        return dx * (acc + node_minus) + far;
    }
    if f0 > h_floor {
        return dx * (acc + node_minus) + far;
    }
    match opts.touch_rule {
        TouchRule::Node => dx * (acc + node_minus + touching_limit_plus(fx0, fxx0)) + far,
        TouchRule::Cell { window } => {
            let local = LocalModel { f0, fx0, fxx0 };
            dx * (acc + local.node()) + local.correction(dx, window) + far
        }
    }
}

/// Limit of the even part of the reflected integrand at `y = 0` for a
/// profile touching the bottom (`f = 0`) with slope `fx0`.
fn touching_limit_plus(fx0: f64, fxx0: f64) -> f64 {
    let q = 1.0 + fx0 * fx0;
    -fxx0 / q + 2.0 * fx0 * fx0 * fxx0 / (q * q)
}

/// Second-order Taylor model of the paired integrand around `y = 0`.
struct LocalModel {
    f0: f64,
    fx0: f64,
    fxx0: f64,
}

impl LocalModel {
    fn minus(&self, y: f64) -> f64 {
        let d = self.fx0 * y - 0.5 * self.fxx0 * y * y;
        y * (self.fxx0 * y) / (y * y + d * d)
    }

    fn plus(&self, y: f64) -> f64 {
        let d = 2.0 * self.f0 - self.fx0 * y + 0.5 * self.fxx0 * y * y;
        y * (2.0 * self.fx0 - self.fxx0 * y) / (y * y + d * d)
    }

    /// `m(y) + m(-y)` for `y > 0`.
    fn even(&self, y: f64) -> f64 {
        self.minus(y) + self.minus(-y) + self.plus(y) + self.plus(-y)
    }

    fn node(&self) -> f64 {
        let minus = self.fxx0 / (1.0 + self.fx0 * self.fx0);
        let plus = if self.f0 == 0.0 {
            touching_limit_plus(self.fx0, self.fxx0)
        } else {
            0.0
        };
        minus + plus
    }

    /// Exact integral of the model over the window minus its trapezoid sum.
    fn correction(&self, dx: f64, window: usize) -> f64 {
        let reach = (window as f64 + 0.5) * dx;
        let mut breaks: Vec<f64> = (0..=window).map(|j| (j as f64 + 0.5) * dx).collect();
        let width = 2.0 * self.f0.abs();
        if width > 0.0 {
            breaks.extend([0.5 * width, width, 2.0 * width]);
        }
        let scale = self.fxx0.abs().max(1e-300) * dx;
        let opts = QuadOptions::with_tol(1e-13 * scale, 1e-10);
        let exact = integrate(|y| self.even(y), 0.0, reach, &breaks, &opts).value;
        let trap = dx * (self.node() + (1..=window).map(|j| self.even(j as f64 * dx)).sum::<f64>());
        exact - trap
    }
}

/// Error tolerances and step bounds for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Steps never exceed `cfl_cap * dx`.
    pub cfl_cap: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            dt_init: 1e-4,
            dt_min: 1e-10,
            dt_max: 1e-2,
            cfl_cap: 1.0,
        }
    }
}

impl StepControl {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            out.push(format!("rtol must be positive, got {}", self.rtol));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            out.push(format!("atol must be positive, got {}", self.atol));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            out.push(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.cfl_cap > 0.0 && self.cfl_cap <= 1.0) {
            out.push(format!("cfl_cap must lie in (0, 1], got {}", self.cfl_cap));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub profile: InterfaceProfile,
    /// Last accepted step (0 before the first step).
    pub dt_last: f64,
    /// Step size proposed by the controller for the next attempt.
    pub dt_next: f64,
    pub step_count: usize,
    pub reject_count: usize,
    /// Number of accepted steps whose result was clamped at the bottom.
    pub clamp_events: usize,
    /// Total mass added by clamping (`dx * Σ clamped undershoot`).
    pub clamp_mass: f64,
}

impl SimState {
    pub fn new(profile: InterfaceProfile, control: &StepControl) -> Self {
        Self {
            t: 0.0,
            profile,
            dt_last: 0.0,
            dt_next: control.dt_init,
            step_count: 0,
            reject_count: 0,
            clamp_events: 0,
            clamp_mass: 0.0,
        }
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_from(
    domain: &DomainSpec,
    y: &[f64],
    k1: &[f64],
    h: f64,
    opts: &RhsOptions,
) -> Result<Vec<f64>> {
    let k2 = rhs(domain, &axpy(y, 0.5 * h, k1), opts)?;
    let k3 = rhs(domain, &axpy(y, 0.5 * h, &k2), opts)?;
    let k4 = rhs(domain, &axpy(y, h, &k3), opts)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// One full step and two half steps from `y`; returns
/// `(two_half_steps, max_i |y2 - y1| / 15 / (atol + rtol |y2|))`.
fn doubled_step(
    domain: &DomainSpec,
    y: &[f64],
    k1: &[f64],
    h: f64,
    control: &StepControl,
    opts: &RhsOptions,
) -> Result<(Vec<f64>, f64)> {
    let y1 = rk4_from(domain, y, k1, h, opts)?;
    let ym = rk4_from(domain, y, k1, 0.5 * h, opts)?;
    let km = rhs(domain, &ym, opts)?;
    let y2 = rk4_from(domain, &ym, &km, 0.5 * h, opts)?;
    let err = y1
        .iter()
        .zip(&y2)
        .zip(y)
        .map(|((a, b), y0)| {
            let scale = control.atol + control.rtol * b.abs().max(y0.abs());
            (b - a).abs() / 15.0 / scale
        })
        .fold(0.0_f64, f64::max);
    Ok((y2, err))
}

/// Maximum-norm step-doubling estimate of the local error of one RK4 step
/// of size `h` (unscaled).
pub fn local_error_estimate(profile: &InterfaceProfile, h: f64, opts: &RhsOptions) -> Result<f64> {
    let d = profile.domain();
    let y = profile.samples();
    let k1 = rhs(d, y, opts)?;
    let y1 = rk4_from(d, y, &k1, h, opts)?;
    let ym = rk4_from(d, y, &k1, 0.5 * h, opts)?;
    let km = rhs(d, &ym, opts)?;
    let y2 = rk4_from(d, &ym, &km, 0.5 * h, opts)?;
    Ok(y1.iter().zip(&y2).map(|(a, b)| (b - a).abs() / 15.0).fold(0.0, f64::max))
}

/// Advance by one accepted step, never past `t_stop`.
pub fn step(
    state: &SimState,
    control: &StepControl,
    opts: &RhsOptions,
    t_stop: f64,
) -> Result<SimState> {
    let domain = *state.profile.domain();
    let y = state.profile.samples();
    let k1 = rhs(&domain, y, opts)?;
    let cap = (control.cfl_cap * state.profile.dx()).min(control.dt_max);
    let mut proposal = state.dt_next.min(cap);
    let mut rejects = 0;
    let blowup = |rejects: usize| {
        let mut s = state.clone();
        s.reject_count += rejects;
        Err(Error::BlowupSuspected(Box::new(s)))
    };
    loop {
        let remaining = t_stop - state.t;
        let limited = proposal >= remaining;
        let h = if limited { remaining } else { proposal };
        if proposal < control.dt_min {
            return blowup(rejects);
        }
        let (mut y2, err) = match doubled_step(&domain, y, &k1, h, control, opts) {
            Ok(v) => v,
            Err(Error::NonFiniteRhs { .. }) => (Vec::new(), f64::INFINITY),
            Err(e) => return Err(e),
        };
        let grow = if err == 0.0 {
            2.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 2.0)
        };
        if err > 1.0 || !err.is_finite() {
            rejects += 1;
            proposal = h * grow.min(0.9);
            continue;
        }
        let mut clamped = 0.0;
        if domain.plane == PlaneKind::HalfPlane {
            let undershoot = y2.iter().fold(0.0_f64, |m, v| m.max(-v));
            if undershoot > control.atol {
                rejects += 1;
                proposal = 0.5 * h;
                continue;
            }
            for v in y2.iter_mut().filter(|v| **v < 0.0) {
                clamped -= *v;
                *v = 0.0;
            }
        }
        let profile = InterfaceProfile::from_samples(domain, y2)?;
        let dt_next = if limited { state.dt_next.max(h) } else { h * grow };
        return Ok(SimState {
            t: if limited { t_stop } else { state.t + h },
            profile,
            dt_last: h,
            dt_next,
            step_count: state.step_count + 1,
            reject_count: state.reject_count + rejects,
            clamp_events: state.clamp_events + usize::from(clamped > 0.0),
            clamp_mass: state.clamp_mass + clamped * state.profile.dx(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    #[serde(rename = "completed")]
    Completed,
    BlowupSuspected,
    NonFinite,
    WallClock,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::BlowupSuspected => "BlowupSuspected",
            Termination::NonFinite => "NonFinite",
            Termination::WallClock => "WallClock",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    /// Human-readable cause of the termination.
    pub detail: String,
    pub final_state: SimState,
    /// Non-fatal notes from scenario construction.
    pub warnings: Vec<String>,
}

/// `dx * max|f_xx| / max|f_x|`, or 0 for flat profiles.
pub fn curvature_resolution_ratio(profile: &InterfaceProfile) -> f64 {
    let (fx, fxx) = profile.first_two_derivatives();
    let slope = fx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if slope == 0.0 {
        return 0.0;
    }
    profile.dx() * fxx.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / slope
}

pub fn run(config: &SimConfig) -> Result<RunOutput> {
    run_with(config, |_| {})
}

/// Advance the configured scenario from `t = 0` to `t_end` or an earlier
/// termination. `on_step` sees every accepted state.
pub fn run_with(config: &SimConfig, mut on_step: impl FnMut(&SimState)) -> Result<RunOutput> {
    config.validate()?;
    let generated = config.scenario.build(&config.domain, config.n)?;
    let gamma = config.gamma_prime;
    let mut snap_times: Vec<f64> = config.snapshot_times.iter().copied().filter(|&s| s > 0.0).collect();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut next_snap = 0;

    let mut state = SimState::new(generated.profile, &config.step);
    let mut holder = state.profile.holder_seminorm_fxx(gamma)?;
    let mut accumulator = 0.0;
    let mut records = vec![DiagnosticsRecord::measure(&state.profile, 0.0, gamma, 0.0)?];
    let mut snapshots = vec![state.profile.to_snapshot(0.0)];
    let started = std::time::Instant::now();
    let mut since_record = 0;

    let (termination, detail) = loop {
        if state.t >= config.t_end {
            break (Termination::Completed, format!("reached t_end = {}", config.t_end));
        }
        if let Some(cap) = config.termination.wall_clock_seconds {
            if started.elapsed().as_secs_f64() > cap {
                break (Termination::WallClock, format!("wall-clock cap of {cap} s exceeded"));
            }
        }
        let t_stop = snap_times.get(next_snap).copied().unwrap_or(config.t_end).min(config.t_end);
        let next = match step(&state, &config.step, &config.rhs, t_stop) {
            Ok(s) => s,
            Err(Error::BlowupSuspected(s)) => {
                let msg = format!("step size fell below dt_min = {:e} at t = {}", config.step.dt_min, s.t);
                state = *s;
                break (Termination::BlowupSuspected, msg);
            }
            Err(e @ (Error::NonFiniteRhs { .. } | Error::InvalidProfile(_))) => {
                break (Termination::NonFinite, e.to_string());
            }
            Err(e) => return Err(e),
        };
        let h_next = next.profile.holder_seminorm_fxx(gamma)?;
        accumulator += 0.5 * (holder.powi(4) + h_next.powi(4)) * (next.t - state.t);
        holder = h_next;
        state = next;
        on_step(&state);
        since_record += 1;
        if next_snap < snap_times.len() && state.t == t_stop {
            snapshots.push(state.profile.to_snapshot(state.t));
            next_snap += 1;
        }
        let ratio = curvature_resolution_ratio(&state.profile);
        if ratio > config.termination.resolution_limit {
            break (
                Termination::BlowupSuspected,
                format!(
                    "curvature unresolved at t = {}: dx max|f_xx| / max|f_x| = {ratio:.3} > {}",
                    state.t, config.termination.resolution_limit
                ),
            );
        }
        if since_record == config.record_every {
            records.push(DiagnosticsRecord::measure(&state.profile, state.t, gamma, accumulator)?);
            since_record = 0;
        }
    };

    if records.last().is_some_and(|r| r.t != state.t) {
        records.push(DiagnosticsRecord::measure(&state.profile, state.t, gamma, accumulator)?);
    }
    if snapshots.last().is_some_and(|s| s.t != state.t) {
        snapshots.push(state.profile.to_snapshot(state.t));
    }
    Ok(RunOutput {
        records,
        snapshots,
        termination,
        detail,
        final_state: state,
        warnings: generated.warnings,
    })
}
