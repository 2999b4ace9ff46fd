//! The one-dimensional functionals `H`, `H⁺` behind the half-plane slope
//! principle, the structure of `g`, and the integral identities used to
//! identify the tent `a|y - a⁻¹|` as the minimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    db_g_minus, db_g_plus, g_prime_numerator, g_unchecked, h_r_unchecked, h_unchecked, SlopeParam,
};
use crate::quadrature::{gauss7, gauss7_unit, integrate, integrate_to_infinity, QuadOptions};

/// Largest slope for which the variational statements are claimed.
pub const A_MAX: f64 = 0.3;

/// `a` must lie in `(0, 3/10]`.
pub fn check_slope(a: f64) -> Result<SlopeParam> {
    if !(a > 0.0 && a <= A_MAX) {
        return Err(Error::InvalidParameter(format!("a must lie in (0, 3/10], got {a}")));
    }
    SlopeParam::new(a)
}

/// Quadrature value with an error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn quad_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-12, 1e-11)
}

/// `∫_{y0}^∞ [h(y, c + s(y - y0)) + h(y, d - s(y - y0))] dy` with the second
/// argument of each term a linear continuation.
fn linear_tail_pair(p: SlopeParam, y0: f64, c: f64, d: f64, s: f64) -> Estimate {
    let r = integrate_to_infinity(
        |y| h_unchecked(p, y, c + s * (y - y0)) + h_unchecked(p, y, d - s * (y - y0)),
        y0,
        &[],
        &quad_opts(),
    );
    Estimate { value: r.value, error: r.error }
}

/// `H(f) = ∫ [h(y, f(0) + f(y)) + h(y, f(0) - f(y))] dy` over the real line.
///
/// `H` is finite only when `f'(0) = -a`; near the origin `f` is replaced by
/// that linearization, on which `h(y, ±ay)` vanishes identically. The rest is
/// integrated adaptively on `[-y_max, y_max]` (split at `breaks`), with `f`
/// continued linearly beyond at its slopes at `±y_max`.
pub fn h_functional(p: SlopeParam, f: &dyn Fn(f64) -> f64, breaks: &[f64], y_max: f64) -> Result<Estimate> {
    let a = p.a();
    let f0 = f(0.0);
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "H needs f(0) > 0 for its scaling normalization, got {f0}"
        )));
    }
    if !(y_max.is_finite() && y_max > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation length must be positive, got {y_max}")));
    }
    let h0 = 1e-6 * f0.min(y_max);
    let right0 = (f(h0) - f0) / h0;
    let left0 = (f0 - f(-h0)) / h0;
    if (right0 + a).abs() > 1e-4 || (left0 + a).abs() > 1e-4 {
        return Err(Error::InvalidParameter(format!(
            "H diverges unless f'(0) = -a; one-sided slopes are {left0} and {right0}"
        )));
    }
    // the cut keeps the rounding of f(0) - f(y) away from the 1/y³ singularity
    let nearest_break = breaks.iter().map(|b| b.abs()).filter(|&b| b > 0.0).fold(f64::INFINITY, f64::min);
    let eps = (1e-2 * f0.min(y_max)).min(0.5 * nearest_break);
    let near = gauss7(
        |y| h_unchecked(p, y, 2.0 * f0 - a * y) + h_unchecked(p, y, -2.0 * f0 - a * y),
        0.0,
        eps,
    );
    // y and -y together, using h(-y, r) = h(y, -r)
    let pair = |y: f64| {
        let (u, v) = (f(y), f(-y));
        h_unchecked(p, y, f0 + u) + h_unchecked(p, y, f0 - u) + h_unchecked(p, y, -(f0 + v))
            + h_unchecked(p, y, v - f0)
    };
    let pts: Vec<f64> = breaks.iter().map(|b| b.abs()).collect();
    let body = integrate(pair, eps, y_max, &pts, &quad_opts());

    let delta = 1e-3 * y_max;
    let (fr, fl) = (f(y_max), f(-y_max));
    let sr = (fr - f(y_max - delta)) / delta;
    // for y = -t: h(-t, r) = h(t, -r) and f(-t) = fl + sl (t - y_max)
    let sl = (fl - f(-y_max + delta)) / delta;
    let right = linear_tail_pair(p, y_max, f0 + fr, f0 - fr, sr);
    let left = linear_tail_pair(p, y_max, -(f0 + fl), fl - f0, -sl);
    let value = near + body.value + right.value + left.value;
    if !value.is_finite() {
        return Err(Error::NonFinite("h_functional"));
    }
    Ok(Estimate {
        value,
        error: body.error + right.error + left.error,
    })
}

/// Closed form `H⁺(tent) = ∫₀^∞ h(y, 2 - ay) dy = -(1 - 3a²) / (4a(1 + a²))`,
/// from `a(1 + a²) h(y, 2 - ay) = d/dy Q(y)`.
pub fn h_plus_tent_exact(p: SlopeParam) -> f64 {
    let a = p.a();
    -(1.0 - 3.0 * a * a) / (4.0 * a * (1.0 + a * a))
}

/// `Q(y) = (1 - 3a² - 2a(1 - a²) y) / (y² + (2 - ay)²)`.
pub fn tent_primitive(p: SlopeParam, y: f64) -> f64 {
    let a = p.a();
    let r = 2.0 - a * y;
    (1.0 - 3.0 * a * a - 2.0 * a * (1.0 - a * a) * y) / (y * y + r * r)
}

/// Piecewise-linear `f` on a uniform grid over `[0, Y]` with `f(0) = 1`,
/// first slope `-a` and all slopes in `[-a, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalCandidate {
    a: f64,
    y_max: f64,
    samples: Vec<f64>,
}

impl VariationalCandidate {
    pub fn new(p: SlopeParam, y_max: f64, samples: Vec<f64>) -> Result<Self> {
        let m = samples.len().saturating_sub(1);
        if m < 2 {
            return Err(Error::InvalidParameter("candidate needs at least 2 cells".into()));
        }
        if !(y_max.is_finite() && y_max > 0.0) {
            return Err(Error::InvalidParameter(format!("Y must be positive, got {y_max}")));
        }
        let a = p.a();
        let dx = y_max / m as f64;
        let tol = 1e-9;
        if samples[0] != 1.0 {
            return Err(Error::InvalidProfile(format!("f(0) must be 1, got {}", samples[0])));
        }
        if ((samples[1] - samples[0]) / dx + a).abs() > tol {
            return Err(Error::InvalidProfile("first slope must equal -a".into()));
        }
        for (k, w) in samples.windows(2).enumerate() {
            let s = (w[1] - w[0]) / dx;
            if !s.is_finite() || s.abs() > a + tol {
                return Err(Error::InvalidProfile(format!("slope {s} on cell {k} outside [-a, a]")));
            }
        }
        if let Some(k) = samples.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidProfile(format!("negative value at node {k}")));
        }
        Ok(Self { a, y_max, samples })
    }

    /// Cumulative construction from cell slopes: `f_{k+1} = max(f_k + σ_k dx, 0)`.
    /// The first slope is forced to `-a` and all slopes clamped to `[-a, a]`.
    pub fn from_slopes(p: SlopeParam, y_max: f64, slopes: &[f64]) -> Result<Self> {
        let (samples, _) = build_from_slopes(p.a(), y_max / slopes.len() as f64, slopes);
        Self::new(p, y_max, samples)
    }

    /// `a|y - a⁻¹|` sampled on `m` cells.
    pub fn tent(p: SlopeParam, y_max: f64, m: usize) -> Result<Self> {
        let a = p.a();
        let dx = y_max / m as f64;
        let samples = (0..=m).map(|k| (1.0 - a * k as f64 * dx).abs()).collect();
        Self::new(p, y_max, samples)
    }

    pub fn slope_param(&self) -> SlopeParam {
        SlopeParam::new(self.a).expect("validated on construction")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn cells(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.y_max / self.cells() as f64
    }

    pub fn slopes(&self) -> Vec<f64> {
        let dx = self.dx();
        self.samples.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
    }

    /// `max_k |f(y_k) - a|y_k - a⁻¹||`.
    pub fn sup_distance_to_tent(&self) -> f64 {
        let dx = self.dx();
        self.samples
            .iter()
            .enumerate()
            .map(|(k, v)| (v - (1.0 - self.a * k as f64 * dx).abs()).abs())
            .fold(0.0, f64::max)
    }
}

/// Samples from slopes plus `∂f_{k+1}/∂f_k` per cell (0 where the floor
/// is active).
fn build_from_slopes(a: f64, dx: f64, slopes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(slopes.len() + 1);
    let mut live = Vec::with_capacity(slopes.len());
    f.push(1.0);
    for (k, &s) in slopes.iter().enumerate() {
        let s = if k == 0 { -a } else { s.clamp(-a, a) };
        let u = f[k] + s * dx;
        live.push(if u < 0.0 { 0.0 } else { 1.0 });
        f.push(u.max(0.0));
    }
    (f, live)
}

/// Projection onto the constraint set: clamp, then replace each slope by
/// the one the floored profile actually has.
fn project_slopes(a: f64, dx: f64, slopes: &mut [f64]) {
    let (f, _) = build_from_slopes(a, dx, slopes);
    for (k, s) in slopes.iter_mut().enumerate() {
        *s = if k == 0 { -a } else { ((f[k + 1] - f[k]) / dx).clamp(-a, a) };
    }
}

/// `H⁺(f) = ∫₀^∞ [h(y, 1 + f) + h(y, 1 - f)] dy` for a candidate, continued
/// beyond `Y` with its last slope (floored at 0).
pub fn h_plus(c: &VariationalCandidate) -> Result<f64> {
    let (v, _) = h_plus_and_gradient(c.slope_param(), c.dx(), &c.samples, false);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("h_plus"))
    }
}

/// Value and (optionally) gradient with respect to the node values.
fn h_plus_and_gradient(p: SlopeParam, dx: f64, f: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
    let m = f.len() - 1;
    let nodes = gauss7_unit();
    let mut grad = if want_grad { vec![0.0; m + 1] } else { Vec::new() };
    let mut value = 0.0;
    for k in 0..m {
        let mut cell = 0.0;
        for &(t, w) in &nodes {
            let y = (k as f64 + t) * dx;
            let v = f[k] + t * (f[k + 1] - f[k]);
            // on the first cell 1 - f = ay, where h vanishes identically
            let lower = if k == 0 { 0.0 } else { h_unchecked(p, y, 1.0 - v) };
            cell += w * (h_unchecked(p, y, 1.0 + v) + lower);
            if want_grad {
                let d = w * dx * (h_r_unchecked(p, y, 1.0 + v) - h_r_unchecked(p, y, 1.0 - v));
                grad[k] += d * (1.0 - t);
                grad[k + 1] += d * t;
            }
        }
        value += cell * dx;
    }

    // linear continuation f_M + s (y - Y), floored at 0
    let y0 = m as f64 * dx;
    let fm = f[m];
    let s = (f[m] - f[m - 1]) / dx;
    let cont = |y: f64| (fm + s * (y - y0)).max(0.0);
    let stop = if s < 0.0 { y0 - fm / s } else { f64::INFINITY };
    let opts = quad_opts();
    let tail = integrate_to_infinity(
        |y| {
            let v = cont(y);
            h_unchecked(p, y, 1.0 + v) + h_unchecked(p, y, 1.0 - v)
        },
        y0,
        &[stop],
        &opts,
    );
    value += tail.value;
    if want_grad {
        let dr = |y: f64| {
            let v = cont(y);
            h_r_unchecked(p, y, 1.0 + v) - h_r_unchecked(p, y, 1.0 - v)
        };
        let live = |y: f64| y < stop;
        let d_level = integrate_to_infinity(|y| if live(y) { dr(y) } else { 0.0 }, y0, &[stop], &opts).value;
        let d_slope =
            integrate_to_infinity(|y| if live(y) { dr(y) * (y - y0) } else { 0.0 }, y0, &[stop], &opts).value;
        grad[m] += d_level + d_slope / dx;
        grad[m - 1] -= d_slope / dx;
    }
    (value, grad)
}

/// Value of `H⁺` and its gradient with respect to the free slopes
/// (entries `1..M`; entry 0 is pinned and reported as 0).
fn value_and_slope_gradient(p: SlopeParam, dx: f64, slopes: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (f, live) = build_from_slopes(p.a(), dx, slopes);
    let (value, gf) = h_plus_and_gradient(p, dx, &f, true);
    let m = slopes.len();
    let mut gs = vec![0.0; m];
    let mut adj = gf[m];
    for k in (1..m).rev() {
        gs[k] = live[k] * dx * adj;
        adj = gf[k] + live[k] * adj;
    }
    (value, gs, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when the projected-gradient step moves no slope by more than this.
    pub step_tol: f64,
    /// Stop when the value improves by less than this over 50 iterations.
    pub stall_tol: f64,
    /// Required sup-distance of every start's result to the tent.
    pub tent_tol: f64,
    /// Seed of the random start and the restart perturbations.
    pub seed: u64,
    /// Size, relative to `a`, of the slope perturbation applied after each
    /// stationary point to leave saddles such as the flat continuation.
    pub jitter: f64,
    pub max_restarts: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            step_tol: 1e-12,
            stall_tol: 1e-13,
            tent_tol: 5e-2,
            seed: 7,
            jitter: 1e-2,
            max_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartLog {
    pub start: String,
    pub iterations: usize,
    pub initial_value: f64,
    pub final_value: f64,
    pub sup_distance: f64,
    pub converged: bool,
    /// Perturbed restarts that lowered the value.
    pub restarts: usize,
    /// `(iteration, value)` every 100 iterations and at the end.
    pub history: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub best: VariationalCandidate,
    pub value: f64,
    pub tent_value: f64,
    pub logs: Vec<StartLog>,
}

/// Admissible starting slopes: the tent, the flat continuation
/// `max(1 - ay, 0)`, an early turn to `+a`, a nearly flat profile, and a
/// random admissible profile.
fn starts(a: f64, dx: f64, m: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let turn = |y_turn: f64| -> Vec<f64> {
        (0..m)
            .map(|k| if (k as f64 + 0.5) * dx < y_turn { -a } else { a })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random: Vec<f64> = (0..m).map(|_| rng.random_range(-a..=a)).collect();
    let mut flat_top = vec![0.0; m];
    flat_top[0] = -a;
    let floor: Vec<f64> = (0..=m).map(|k| (1.0 - a * k as f64 * dx).max(0.0)).collect();
    let descend_then_flat = floor.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    vec![
        ("tent".into(), turn(1.0 / a)),
        ("descend_then_flat".into(), descend_then_flat),
        ("early_turn".into(), turn(0.5 / a)),
        ("flat".into(), flat_top),
        ("random".into(), random),
    ]
}

/// Projected spectral gradient descent on the slopes with Armijo
/// backtracking.
fn descend(p: SlopeParam, dx: f64, mut slopes: Vec<f64>, opts: &MinimizeOptions) -> (Vec<f64>, StartLog) {
    let a = p.a();
    let project = |s: &mut [f64]| project_slopes(a, dx, s);
    project(&mut slopes);
    let (mut value, mut grad, _) = value_and_slope_gradient(p, dx, &slopes);
    let initial_value = value;
    let mut alpha = 1.0 / grad.iter().fold(1e-300_f64, |m, g| m.max(g.abs())) * a;
    let mut history = vec![(0, value)];
    let mut window_start = value;
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let mut step = alpha;
        let (trial, tv, tg, moved) = loop {
            let mut trial: Vec<f64> = slopes.iter().zip(&grad).map(|(s, g)| s - step * g).collect();
            project(&mut trial);
            let decrease: f64 = grad.iter().zip(slopes.iter().zip(&trial)).map(|(g, (s, t))| g * (s - t)).sum();
            let moved = slopes.iter().zip(&trial).fold(0.0_f64, |m, (s, t)| m.max((s - t).abs()));
            let (tv, tg, _) = value_and_slope_gradient(p, dx, &trial);
            if tv <= value - 1e-4 * decrease || moved <= opts.step_tol {
                break (trial, tv, tg, moved);
            }
            step *= 0.5;
        };
        // Barzilai–Borwein step for the next iteration
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..slopes.len() {
            let ds = trial[k] - slopes[k];
            ss += ds * ds;
            sy += ds * (tg[k] - grad[k]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e6) } else { (2.0 * step).min(1e6) };
        slopes = trial;
        let improved = tv <= value;
        if improved {
            value = tv;
        }
        grad = tg;
        if it % 100 == 0 {
            history.push((it, value));
        }
        if moved <= opts.step_tol {
            converged = true;
            break;
        }
        if it % 50 == 0 {
            if window_start - value < opts.stall_tol {
                converged = true;
                break;
            }
            window_start = value;
        }
    }
    history.push((it, value));
    let log = StartLog {
        start: String::new(),
        iterations: it,
        initial_value,
        final_value: value,
        sup_distance: f64::NAN,
        converged,
        restarts: 0,
        history,
    };
    (slopes, log)
}

/// Multi-start minimization of `H⁺` over candidates on `m` cells of
/// `[0, y_max]`. Fails when no start converges; each start's distance to
/// the tent is logged.
pub fn minimize_h_plus(a: f64, y_max: f64, m: usize, opts: &MinimizeOptions) -> Result<MinimizeOutcome> {
    let p = check_slope(a)?;
    if y_max < 10.0 / a * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "truncation Y = {y_max} must be at least 10/a = {}",
            10.0 / a
        )));
    }
    if m < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 cells, got {m}")));
    }
    let dx = y_max / m as f64;
    let tent_value = h_plus(&VariationalCandidate::tent(p, y_max, m)?)?;
    let mut logs = Vec::new();
    let mut best: Option<(f64, VariationalCandidate)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    for (name, init) in starts(a, dx, m, opts.seed) {
        let (mut slopes, mut log) = descend(p, dx, init, opts);
        for _ in 0..opts.max_restarts {
            let kicked: Vec<f64> = slopes
                .iter()
                .map(|s| s + opts.jitter * a * rng.random_range(-1.0..=1.0))
                .collect();
            let (s2, l2) = descend(p, dx, kicked, opts);
            log.iterations += l2.iterations;
            if l2.final_value >= log.final_value - opts.stall_tol {
                break;
            }
            let offset = log.iterations - l2.iterations;
            log.history.extend(l2.history.iter().map(|&(i, v)| (i + offset, v)));
            log.final_value = l2.final_value;
            log.converged = l2.converged;
            log.restarts += 1;
            slopes = s2;
        }
        let cand = VariationalCandidate::from_slopes(p, y_max, &slopes)?;
        log.start = name;
        log.sup_distance = cand.sup_distance_to_tent();
        if best.as_ref().is_none_or(|(v, _)| log.final_value < *v) {
            best = Some((log.final_value, cand));
        }
        logs.push(log);
    }
    if logs.iter().all(|l| !l.converged) {
        let detail = logs
            .iter()
            .map(|l| format!("{}: {} iterations, H⁺ = {}", l.start, l.iterations, l.final_value))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::NotConverged { what: "minimize_h_plus", detail });
    }
    let (value, best) = best.expect("at least one start");
    Ok(MinimizeOutcome { best, value, tent_value, logs })
}

/// Smallest `C` with `|f(y) - (1 - ay)| <= C y^{3/2}` at the candidate's
/// nodes in `(0, 1]`; observed, not imposed.
pub fn near_origin_constant(c: &VariationalCandidate) -> f64 {
    let dx = c.dx();
    c.samples
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, v)| (k as f64 * dx, v))
        .take_while(|(y, _)| *y <= 1.0 + 1e-12)
        .map(|(y, v)| (v - (1.0 - c.a * y)).abs() / y.powf(1.5))
        .fold(0.0, f64::max)
}

/// Local extrema `s1 < s2 < s3 < s4` of `g` and the values there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GExtrema {
    pub points: [f64; 4],
    pub values: [f64; 4],
}

/// Roots of `g'` by sign-change scan and bisection. The scan covers
/// `[-50, 50]` widened to the Cauchy root bound of the quartic numerator.
pub fn g_extrema(a: f64) -> Result<GExtrema> {
    let p = check_slope(a)?;
    let big_a = p.big_a();
    let reach = 50.0_f64.max(1.0 + 6.0_f64.max(2.0 * big_a));
    let steps = 200_000;
    let h = 2.0 * reach / steps as f64;
    let q = |s: f64| g_prime_numerator(p, s);
    let mut roots = Vec::new();
    let mut lo = -reach;
    let mut q_lo = q(lo);
    for k in 1..=steps {
        let hi = -reach + k as f64 * h;
        let q_hi = q(hi);
        if q_lo == 0.0 {
            roots.push(lo);
        } else if q_lo * q_hi < 0.0 {
            let (mut l, mut r) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if mid <= l || mid >= r {
                    break;
                }
                if q(l) * q(mid) <= 0.0 {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        lo = hi;
        q_lo = q_hi;
    }
    if roots.len() != 4 {
        return Err(Error::NotConverged {
            what: "g_extrema",
            detail: format!("found {} sign changes of g' in [-{reach}, {reach}], expected 4", roots.len()),
        });
    }
    let points = [roots[0], roots[1], roots[2], roots[3]];
    let values = points.map(|s| g_unchecked(p, s));
    Ok(GExtrema { points, values })
}

impl GExtrema {
    /// `s1 < -a⁻¹ < s2 < -a < 0 < s3 < a < s4`.
    pub fn brackets_hold(&self, a: f64) -> bool {
        let [s1, s2, s3, s4] = self.points;
        s1 < -1.0 / a && -1.0 / a < s2 && s2 < -a && 0.0 < s3 && s3 < a && a < s4
    }

    /// Negative minima at `s1, s3`, positive maxima at `s2, s4`.
    pub fn signs_hold(&self) -> bool {
        let [g1, g2, g3, g4] = self.values;
        g1 < 0.0 && g2 > 0.0 && g3 < 0.0 && g4 > 0.0
    }
}

/// `∫_α^β g(s) ds = h(1, β) - h(1, α)` since `∂_s h(1, s) = g(s)`.
pub fn g_integral_exact(p: SlopeParam, alpha: f64, beta: f64) -> f64 {
    h_unchecked(p, 1.0, beta) - h_unchecked(p, 1.0, alpha)
}

fn g_integral(p: SlopeParam, alpha: f64, beta: f64) -> Estimate {
    let r = integrate(|s| g_unchecked(p, s), alpha, beta, &[], &QuadOptions::with_tol(1e-14, 1e-12));
    Estimate { value: r.value, error: r.error }
}

/// One sampled instance of `∫_{s0-a}^{s0-b} g > ∫_b^a g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalitySample {
    pub b: f64,
    pub s0: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Combined quadrature error bound of both sides.
    pub error: f64,
}

impl InequalitySample {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn holds(&self) -> bool {
        self.margin() > self.error
    }
}

/// Evaluates the one-sided comparison integral for every `(b, s0)` pair;
/// requires `b ∈ [-a, a)` and `s0 < 0`.
pub fn verify_g_comparison(a: f64, b_samples: &[f64], s0_samples: &[f64]) -> Result<Vec<InequalitySample>> {
    let p = check_slope(a)?;
    for &b in b_samples {
        if !(b >= -a && b < a) {
            return Err(Error::InvalidParameter(format!("b = {b} outside [-a, a)")));
        }
    }
    for &s0 in s0_samples {
        if !(s0 < 0.0 && s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("s0 = {s0} must be negative")));
        }
    }
    let mut out = Vec::with_capacity(b_samples.len() * s0_samples.len());
    for &b in b_samples {
        let rhs = g_integral(p, b, a);
        for &s0 in s0_samples {
            let lhs = g_integral(p, s0 - a, s0 - b);
            out.push(InequalitySample {
                b,
                s0,
                lhs: lhs.value,
                rhs: rhs.value,
                error: lhs.error + rhs.error,
            });
        }
    }
    Ok(out)
}

/// The first-variation integral for a turn at `p` before `a⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnIntegral {
    /// `∫_p^∞ [-g((2 - 2ap)/y + a) + g(2ap/y - a)] y⁻³ dy` by quadrature.
    pub quadrature: Estimate,
    /// `∂_B G⁺(2 - 2ap, p) - ∂_B G⁻(2ap, p)`, the same integral in closed form.
    pub closed_form: f64,
    /// `2a` times the closed form, the normalization the printed bound uses.
    pub scaled_closed_form: f64,
    /// `-4(1 - ap)² / [p² + (2 - ap)²]²`.
    pub bound: f64,
}

pub fn turn_integral(a: f64, p_turn: f64) -> Result<TurnIntegral> {
    let p = check_slope(a)?;
    if !(p_turn > 0.0 && p_turn < 1.0 / a) {
        return Err(Error::InvalidParameter(format!("p = {p_turn} outside (0, 1/a)")));
    }
    let ap = a * p_turn;
    let r = integrate_to_infinity(
        |y| (-g_unchecked(p, (2.0 - 2.0 * ap) / y + a) + g_unchecked(p, 2.0 * ap / y - a)) / (y * y * y),
        p_turn,
        &[],
        &QuadOptions::with_tol(1e-13, 1e-11),
    );
    let closed = db_g_plus(p, 2.0 - 2.0 * ap, p_turn)? - db_g_minus(p, 2.0 * ap, p_turn)?;
    let q = p_turn * p_turn + (2.0 - ap) * (2.0 - ap);
    Ok(TurnIntegral {
        quadrature: Estimate { value: r.value, error: r.error },
        closed_form: closed,
        scaled_closed_form: 2.0 * a * closed,
        bound: -4.0 * (1.0 - ap) * (1.0 - ap) / (q * q),
    })
}

/// The first-variation integral past `a⁻¹`, which vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroIntegral {
    /// `∂_B G⁺(0, a⁻¹) - ∂_B G⁻(2, a⁻¹)`.
    pub closed_form: f64,
    pub plus_term: f64,
    pub minus_term: f64,
    /// `∫_{a⁻¹}^∞ [-g(a) + g(2/y - a)] y⁻³ dy`.
    pub quadrature: Estimate,
}

pub fn zero_integral(a: f64) -> Result<ZeroIntegral> {
    let p = check_slope(a)?;
    let y0 = 1.0 / a;
    let plus = db_g_plus(p, 0.0, y0)?;
    let minus = db_g_minus(p, 2.0, y0)?;
    let ga = g_unchecked(p, a);
    let r = integrate_to_infinity(
        |y| (-ga + g_unchecked(p, 2.0 / y - a)) / (y * y * y),
        y0,
        &[],
        &QuadOptions::with_tol(1e-14, 1e-12),
    );
    Ok(ZeroIntegral {
        closed_form: plus - minus,
        plus_term: plus,
        minus_term: minus,
        quadrature: Estimate { value: r.value, error: r.error },
    })
}

/// Sampled check of `h_a(y, r) >= 0` on the cone `|r| <= a|y|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub a: f64,
    pub samples: usize,
    /// Smallest `y² h_a(y, r)` seen (scale-free).
    pub min_scaled: f64,
    pub violations: usize,
}

/// `n` random points per slope with `|y| ∈ [10⁻³, 10³]` (log-uniform) and
/// `r = t a |y|`, `t ∈ [-1, 1]`. Values below `-tol` after scaling by `y²`
/// count as violations.
pub fn check_h_nonneg(a_samples: &[f64], n: usize, seed: u64, tol: f64) -> Result<Vec<ConeReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    a_samples
        .iter()
        .map(|&a| {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!("cone check needs a in (0, 1], got {a}")));
            }
            let p = SlopeParam::new(a)?;
            let mut min_scaled = f64::INFINITY;
            let mut violations = 0;
            for _ in 0..n {
                let mag = 10f64.powf(rng.random_range(-3.0..=3.0));
                let y = if rng.random_bool(0.5) { mag } else { -mag };
                let r = rng.random_range(-1.0..=1.0) * a * mag;
                let v = y * y * h_unchecked(p, y, r);
                min_scaled = min_scaled.min(v);
                if v < -tol {
                    violations += 1;
                }
            }
            Ok(ConeReport { a, samples: n, min_scaled, violations })
        })
        .collect()
}

/// Largest deviation between a central difference of [`tent_primitive`] and
/// `a(1 + a²) h(y, 2 - ay)` over `ys`.
pub fn verify_tent_derivative(a: f64, ys: &[f64]) -> Result<f64> {
    let p = SlopeParam::new(a)?;
    let mut worst = 0.0_f64;
    for &y in ys {
        let step = 1e-5 * y.abs().max(1.0);
        let fd = (tent_primitive(p, y + step) - tent_primitive(p, y - step)) / (2.0 * step);
        let exact = a * (1.0 + a * a) * h_unchecked(p, y, 2.0 - a * y);
        worst = worst.max((fd - exact).abs());
    }
    Ok(worst)
}
