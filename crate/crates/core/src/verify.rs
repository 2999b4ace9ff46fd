//! Kernel and variational verification suites with a flat JSON report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{
    db_g_minus, db_g_plus, g_minus, g_plus, g_unchecked, h_unchecked, lambda_unchecked, periodized_kernel,
    tilde_lambda_rate, SlopeParam,
};
use crate::par;
use crate::variational::{
    check_h_nonneg, check_slope, g_extrema, h_functional, h_plus, h_plus_tent_exact, minimize_h_plus,
    near_origin_constant, turn_integral, verify_g_comparison, verify_tent_derivative, zero_integral,
    MinimizeOptions, VariationalCandidate,
};

/// One line of the report. A null (non-finite) `bound` marks a measured
/// quantity that is reported but not judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// Error text when the check could not be evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(check: &str, params: &[(&str, f64)], value: f64, bound: f64, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
            bound,
            pass,
            note: None,
        }
    }

    /// `value <= bound`.
    fn at_most(check: &str, params: &[(&str, f64)], value: f64, bound: f64) -> Self {
        Self::new(check, params, value, bound, value <= bound)
    }

    /// `value >= bound`.
    fn at_least(check: &str, params: &[(&str, f64)], value: f64, bound: f64) -> Self {
        Self::new(check, params, value, bound, value >= bound)
    }

    fn failed(check: &str, params: &[(&str, f64)], err: impl std::fmt::Display) -> Self {
        Self {
            note: Some(err.to_string()),
            ..Self::new(check, params, f64::NAN, f64::NAN, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernels,
    Variational,
    All,
}

pub const DEFAULT_A: [f64; 4] = [0.05, 0.1, 0.2, 0.3];

/// Settings shared by the suites. Defaults are the pinned acceptance sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub cone_samples: usize,
    pub minimizer_cells: usize,
    pub minimize: MinimizeOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            cone_samples: 10_000,
            minimizer_cells: 1000,
            minimize: MinimizeOptions::default(),
        }
    }
}

type Item<'a> = Box<dyn Fn() -> Vec<CheckResult> + Sync + Send + 'a>;

fn run_items(items: Vec<Item<'_>>) -> Vec<CheckResult> {
    par::map_items(&items, |f| f()).into_iter().flatten().collect()
}

/// Runs the requested suites. Variational checks reject `a` outside
/// `(0, 3/10]` before anything is computed.
pub fn run_suite(suite: Suite, a_list: &[f64], opts: &SuiteOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Variational | Suite::All) {
        for &a in a_list {
            check_slope(a)?;
        }
    }
    if matches!(suite, Suite::Kernels | Suite::All) {
        out.extend(kernel_suite(a_list, opts)?);
    }
    if matches!(suite, Suite::Variational | Suite::All) {
        out.extend(variational_suite(a_list, opts)?);
    }
    Ok(out)
}

/// Identities of `h`, `λ`, `G±` and the periodized kernel.
pub fn kernel_suite(a_list: &[f64], opts: &SuiteOptions) -> Result<Vec<CheckResult>> {
    let params: Vec<SlopeParam> = a_list.iter().map(|&a| SlopeParam::new(a)).collect::<Result<_>>()?;
    let seed = opts.seed;
    let mut items: Vec<Item> = Vec::new();
    items.push(Box::new(move || vec![tilde_lambda_check(seed)]));
    items.push(Box::new(|| vec![periodized_check()]));
    for &p in &params {
        let a = p.a();
        items.push(Box::new(move || vec![tent_ray_check(p, seed)]));
        let cone_samples = opts.cone_samples;
        items.push(Box::new(move || {
            let pr = [("a", a)];
            match check_h_nonneg(&[a], cone_samples, seed, 1e-12) {
                Ok(r) => vec![CheckResult::new(
                    "h_nonnegative_in_cone",
                    &[("a", a), ("samples", cone_samples as f64)],
                    r[0].min_scaled,
                    -1e-12,
                    r[0].violations == 0,
                )],
                Err(e) => vec![CheckResult::failed("h_nonnegative_in_cone", &pr, e)],
            }
        }));
        items.push(Box::new(move || {
            let ys: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.05).collect();
            let worst = verify_tent_derivative(a, &ys).unwrap_or(f64::NAN);
            vec![CheckResult::at_most("tent_antiderivative", &[("a", a)], worst, 1e-8)]
        }));
        items.push(Box::new(move || antiderivative_checks(p)));
    }
    Ok(run_items(items))
}

fn tent_ray_check(p: SlopeParam, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let y = rng.random_range(0.1..=50.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        worst = worst.max(h_unchecked(p, y, p.a() * y).abs());
    }
    CheckResult::at_most("h_vanishes_on_tent_ray", &[("a", p.a())], worst, 1e-12)
}

fn tilde_lambda_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a3b);
    let mut worst = f64::INFINITY;
    let n = 10_000;
    for _ in 0..n {
        let (x, y, c) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(-10.0..10.0));
        let lam = lambda_unchecked(x, y, c);
        let tilde = tilde_lambda_rate(x, y, c).unwrap_or(f64::NAN);
        worst = worst.min((tilde - lam) / lam.max(1.0));
    }
    CheckResult::at_least("tilde_lambda_dominates", &[("samples", n as f64)], worst, -1e-15)
}

fn periodized_check() -> CheckResult {
    let (y, d, nu) = (0.25_f64, 0.5_f64, 1.0_f64);
    let n_max = 100_000;
    let mut sum = y / (y * y + d * d);
    for n in 1..=n_max {
        let (yp, ym) = (y + n as f64 * nu, y - n as f64 * nu);
        sum += yp / (yp * yp + d * d) + ym / (ym * ym + d * d);
    }
    // paired terms behave like -2y/(nν)², whose remainder is added back
    sum -= 2.0 * y / (nu * nu * (n_max as f64 + 0.5));
    let closed = periodized_kernel(y, d, nu).unwrap_or(f64::NAN);
    CheckResult::at_most(
        "periodized_kernel_vs_sum",
        &[("y", y), ("d", d), ("nu", nu)],
        ((closed - sum) / closed).abs(),
        1e-8,
    )
}

fn antiderivative_checks(p: SlopeParam) -> Vec<CheckResult> {
    let a = p.a();
    let hs = 1e-5;
    let mut dy = 0.0_f64;
    let mut db = 0.0_f64;
    let mut err = false;
    for (b, y) in [(2.0, 1.0), (1.0, 2.0), (-0.7, 0.4), (0.3, -1.5), (0.0, 1.0 / a)] {
        let (Ok(pp), Ok(pm), Ok(dp), Ok(dm)) = (
            g_plus(p, b, y + hs).and_then(|u| Ok(u - g_plus(p, b, y - hs)?)),
            g_minus(p, b, y + hs).and_then(|u| Ok(u - g_minus(p, b, y - hs)?)),
            g_plus(p, b + hs, y).and_then(|u| Ok(u - g_plus(p, b - hs, y)?)),
            g_minus(p, b + hs, y).and_then(|u| Ok(u - g_minus(p, b - hs, y)?)),
        ) else {
            err = true;
            continue;
        };
        let rel = |fd: f64, exact: f64| (fd / (2.0 * hs) - exact).abs() / (1.0 + exact.abs());
        dy = dy.max(rel(pp, h_unchecked(p, y, b + a * y))).max(rel(pm, h_unchecked(p, y, b - a * y)));
        match (db_g_plus(p, b, y), db_g_minus(p, b, y)) {
            (Ok(u), Ok(v)) => db = db.max(rel(dp, u)).max(rel(dm, v)),
            _ => err = true,
        }
    }
    if err {
        dy = f64::NAN;
        db = f64::NAN;
    }
    vec![
        CheckResult::at_most("antiderivative_in_y", &[("a", a)], dy, 1e-8),
        CheckResult::at_most("antiderivative_in_b", &[("a", a)], db, 1e-8),
    ]
}

/// The structure of `g`, the integral identities and inequalities, the tent
/// values of `H` and `H⁺`, and the multi-start minimizer.
pub fn variational_suite(a_list: &[f64], opts: &SuiteOptions) -> Result<Vec<CheckResult>> {
    let params: Vec<SlopeParam> = a_list.iter().map(|&a| check_slope(a)).collect::<Result<_>>()?;
    let mut items: Vec<Item> = Vec::new();
    for &p in &params {
        let a = p.a();
        items.push(Box::new(move || g_structure_checks(p)));
        items.push(Box::new(move || vec![comparison_check(a)]));
        items.push(Box::new(move || turn_checks(a)));
        items.push(Box::new(move || zero_checks(a)));
        items.push(Box::new(move || tent_checks(p)));
        items.push(Box::new(move || minimizer_checks(a, opts)));
    }
    Ok(run_items(items))
}

fn g_structure_checks(p: SlopeParam) -> Vec<CheckResult> {
    let a = p.a();
    let pr = [("a", a)];
    let g0 = g_unchecked(p, 0.0);
    let mut out = vec![CheckResult::at_most(
        "g_at_zero_is_minus_big_a",
        &pr,
        (g0 + p.big_a()).abs(),
        1e-14,
    )];
    match g_extrema(a) {
        Ok(e) => {
            let ok = e.brackets_hold(a) && e.signs_hold();
            out.push(CheckResult::new("g_extrema_structure", &pr, 4.0, 4.0, ok));
        }
        Err(err) => out.push(CheckResult::failed("g_extrema_structure", &pr, err)),
    }
    let gm = g_unchecked(p, -a);
    let margin = (1..=100_000)
        .map(|k| g_unchecked(p, -a - k as f64 * 1e-3) - gm)
        .fold(f64::INFINITY, f64::min);
    out.push(CheckResult::new("g_exceeds_value_at_minus_a", &pr, margin, 0.0, margin > 0.0));
    out
}

/// 20 `b` in `[-a, a)` by 20 `s0` in `[-10, -0.01]`.
pub fn comparison_grid(a: f64) -> (Vec<f64>, Vec<f64>) {
    let bs = (0..20).map(|k| -a + 2.0 * a * k as f64 / 20.0).collect();
    let s0 = (0..20).map(|k| -10.0 + (10.0 - 0.01) * k as f64 / 19.0).collect();
    (bs, s0)
}

fn comparison_check(a: f64) -> CheckResult {
    let (bs, s0) = comparison_grid(a);
    let pr = [("a", a), ("pairs", (bs.len() * s0.len()) as f64)];
    match verify_g_comparison(a, &bs, &s0) {
        Ok(samples) => {
            let worst = samples.iter().map(|s| s.margin() - s.error).fold(f64::INFINITY, f64::min);
            CheckResult::new("g_integral_comparison", &pr, worst, 0.0, worst > 0.0)
        }
        Err(e) => CheckResult::failed("g_integral_comparison", &pr, e),
    }
}

/// 100 turn points `p = (k + 1/2) / (100 a)`.
pub fn turn_points(a: f64) -> Vec<f64> {
    (0..100).map(|k| (k as f64 + 0.5) / (100.0 * a)).collect()
}

fn turn_checks(a: f64) -> Vec<CheckResult> {
    let pts = turn_points(a);
    let pr = [("a", a), ("points", pts.len() as f64)];
    let mut excess = f64::NEG_INFINITY;
    let mut largest = f64::NEG_INFINITY;
    let mut agreement = 0.0_f64;
    for &q in &pts {
        match turn_integral(a, q) {
            Ok(t) => {
                excess = excess.max(t.scaled_closed_form - t.bound);
                largest = largest.max(t.closed_form).max(t.quadrature.value);
                agreement = agreement.max((t.quadrature.value - t.closed_form).abs() / t.closed_form.abs().max(1.0));
            }
            Err(_) => {
                excess = f64::NAN;
                largest = f64::NAN;
                agreement = f64::NAN;
                break;
            }
        }
    }
    vec![
        CheckResult::new("turn_integral_negative", &pr, largest, 0.0, largest < 0.0),
        CheckResult::new("turn_integral_printed_bound", &pr, excess, 0.0, excess < 0.0),
        CheckResult::at_most("turn_integral_quadrature", &pr, agreement, 1e-4),
    ]
}

fn zero_checks(a: f64) -> Vec<CheckResult> {
    let pr = [("a", a)];
    match zero_integral(a) {
        Ok(z) => vec![
            CheckResult::at_most("zero_identity_closed_form", &pr, z.closed_form.abs(), 1e-12),
            CheckResult::at_most(
                "zero_identity_term_value",
                &pr,
                (z.plus_term - a / (2.0 * (1.0 + a * a))).abs(),
                1e-12,
            ),
            CheckResult::at_most("zero_identity_quadrature", &pr, z.quadrature.value.abs(), 1e-4),
        ],
        Err(e) => vec![CheckResult::failed("zero_identity_closed_form", &pr, e)],
    }
}

fn tent_checks(p: SlopeParam) -> Vec<CheckResult> {
    let a = p.a();
    let y_max = 100.0 / a;
    let tent = move |y: f64| (a * y - 1.0).abs();
    let h = h_functional(p, &tent, &[1.0 / a], y_max).map(|e| e.value.abs()).unwrap_or(f64::NAN);
    let hp = VariationalCandidate::tent(p, 10.0 / a, 1000)
        .and_then(|c| h_plus(&c))
        .map(|v| (v - h_plus_tent_exact(p)).abs())
        .unwrap_or(f64::NAN);
    vec![
        CheckResult::at_most("tent_h_vanishes", &[("a", a), ("Y", y_max)], h, 1e-4),
        CheckResult::at_most("tent_h_plus_closed_form", &[("a", a), ("Y", 10.0 / a)], hp, 1e-8),
    ]
}

fn minimizer_checks(a: f64, opts: &SuiteOptions) -> Vec<CheckResult> {
    let y_max = 10.0 / a;
    let m = opts.minimizer_cells;
    let pr = [("a", a), ("Y", y_max), ("M", m as f64)];
    match minimize_h_plus(a, y_max, m, &opts.minimize) {
        Ok(out) => {
            let dist = out.logs.iter().map(|l| l.sup_distance).fold(0.0, f64::max);
            let lowest = out.logs.iter().map(|l| l.final_value).fold(f64::INFINITY, f64::min);
            vec![
                CheckResult::at_most("minimizer_distance_to_tent", &pr, dist, opts.minimize.tent_tol),
                CheckResult::at_least("minimizer_value_floor", &pr, lowest, out.tent_value - 1e-4),
                CheckResult::new(
                    "minimizer_near_origin_constant",
                    &pr,
                    near_origin_constant(&out.best),
                    f64::NAN,
                    true,
                ),
            ]
        }
        Err(e) => vec![CheckResult::failed("minimizer_distance_to_tent", &pr, e)],
    }
}

/// Fixed-width table, one row per check, then a pass count.
pub fn summary_table(results: &[CheckResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<32} {:<36} {:>13} {:>13}  result", "check", "params", "value", "bound");
    for r in results {
        let params = r
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        let bound = if r.bound.is_finite() { format!("{:.4e}", r.bound) } else { "-".into() };
        let verdict = match (r.pass, r.bound.is_finite()) {
            (true, false) => "INFO",
            (true, true) => "PASS",
            (false, _) => "FAIL",
        };
        let _ = writeln!(s, "{:<32} {:<36} {:>13.4e} {:>13}  {verdict}", r.check, params, r.value, bound);
        if let Some(note) = &r.note {
            let _ = writeln!(s, "    {note}");
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    let _ = writeln!(s, "{passed}/{} checks passed", results.len());
    s
}
