//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

// Kronrod abscissae on [-1, 1] (non-negative half), QUADPACK ordering.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 20_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Kronrod-minus-Gauss error estimate summed over the final partition.
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

/// One 15-point Kronrod panel on `[a, b]`: returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        rk += w * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// 7-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss7<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut r = WG[3] * f(c);
    for (k, &w) in WG.iter().take(3).enumerate() {
        let dx = h * XGK[2 * k + 1];
        r += w * (f(c - dx) + f(c + dx));
    }
    r * h
}

/// Nodes and weights of the 7-point Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss7_unit() -> [(f64, f64); 7] {
    let mut out = [(0.5, 0.5 * WG[3]); 7];
    for k in 0..3 {
        let x = 0.5 * XGK[2 * k + 1];
        out[2 * k] = (0.5 - x, 0.5 * WG[k]);
        out[2 * k + 1] = (0.5 + x, 0.5 * WG[k]);
    }
    out
}

/// Adaptive integration over `[a, b]`, pre-split at `breaks` (points outside
/// the interval are ignored).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().copied().filter(|&p| p > lo && p < hi))
        .chain(std::iter::once(hi))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    // (lo, hi, value, error)
    let mut panels: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();

    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        let converged = err <= tol && total.is_finite();
        if converged || !err.is_finite() || panels.len() >= opts.max_intervals {
            return QuadResult {
                value: sign * total,
                error: err,
                intervals: panels.len(),
                converged,
            };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty partition");
        let (l, r, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            // interval can no longer be split in floating point
            return QuadResult {
                value: sign * panels.iter().map(|p| p.2).sum::<f64>(),
                error: f64::INFINITY,
                intervals: panels.len(),
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, l, m);
        let (v2, e2) = gk15(&f, m, r);
        panels.push((l, m, v1, e1));
        panels.push((m, r, v2, e2));
    }
}

/// Adaptive integration over `[a, ∞)` via `y = a + (1 - t) / t`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> QuadResult {
    // y = a + (1 - t)/t  <=>  t = 1/(1 + y - a)
    let tbreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&y| y > a)
        .map(|&y| 1.0 / (1.0 + y - a))
        .collect();
    let g = |t: f64| {
        let y = a + (1.0 - t) / t;
        f(y) / (t * t)
    };
    integrate(g, 0.0, 1.0, &tbreaks, opts)
}
