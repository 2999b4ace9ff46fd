//! Trajectory monitors: mass, energy, dissipation, slope and curvature
//! indicators, and the checks built on them.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interface::{Boundary, InterfaceProfile, PlaneKind};
use crate::kernels::lambda_unchecked;
use crate::par;

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "max_slope",
    "l1_mass",
    "l2_energy",
    "lambda_dissipation",
    "ln_dissipation",
    "min_height",
    "holder_fxx",
    "blowup_accumulator",
];

/// Images `|n| <= LAMBDA_IMAGES` of the periodic λ sum are added
/// explicitly; the rest through their large-`c` expansion.
const LAMBDA_IMAGES: i32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub max_slope: f64,
    pub l1_mass: f64,
    pub l2_energy: f64,
    /// Half-plane only.
    pub lambda_dissipation: Option<f64>,
    /// Whole plane only.
    pub ln_dissipation: Option<f64>,
    pub min_height: f64,
    pub holder_fxx: f64,
    /// Time integral of `holder_fxx⁴` up to `t`.
    pub blowup_accumulator: f64,
}

impl DiagnosticsRecord {
    /// All monitors of `profile` at time `t`; the accumulator is supplied
    /// by the caller.
    pub fn measure(
        profile: &InterfaceProfile,
        t: f64,
        gamma_prime: f64,
        blowup_accumulator: f64,
    ) -> Result<Self> {
        let half = profile.domain().plane == PlaneKind::HalfPlane;
        Ok(Self {
            t,
            max_slope: profile.max_slope(),
            l1_mass: profile.l1_mass(),
            l2_energy: profile.l2_energy(),
            lambda_dissipation: if half { Some(lambda_dissipation(profile)?) } else { None },
            ln_dissipation: if half { None } else { Some(ln_dissipation_plane(profile)) },
            min_height: profile.min_height(),
            holder_fxx: profile.holder_seminorm_fxx(gamma_prime)?,
            blowup_accumulator,
        })
    }

    fn fields(&self) -> [String; 9] {
        let num = |v: f64| format!("{v:e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        [
            num(self.t),
            num(self.max_slope),
            num(self.l1_mass),
            num(self.l2_energy),
            opt(self.lambda_dissipation),
            opt(self.ln_dissipation),
            num(self.min_height),
            num(self.holder_fxx),
            num(self.blowup_accumulator),
        ]
    }
}

/// `∫∫ λ(f(x), f(y), x - y) dx dy` over one period (or the grid) times the
/// real line.
pub fn lambda_dissipation(profile: &InterfaceProfile) -> Result<f64> {
    if profile.domain().plane != PlaneKind::HalfPlane {
        return Err(Error::Domain(
            "the λ dissipation bound applies to the half-plane only".into(),
        ));
    }
    let f = profile.samples();
    let n = f.len();
    let dx = profile.dx();
    let fx = profile.derivative(1)?;
    let rows = match profile.domain().boundary {
        Boundary::Periodic { period } => par::map_indices(n, |i| {
            let a = f[i];
            let mut acc = if a > 0.0 {
                fx[i] * fx[i] / (2.0 * (1.0 + fx[i] * fx[i]))
            } else {
                0.0
            };
            for (j, &b) in f.iter().enumerate() {
                if j == i {
                    continue;
                }
                let c = (i as f64 - j as f64) * dx;
                for img in -LAMBDA_IMAGES..=LAMBDA_IMAGES {
                    acc += lambda_unchecked(a, b, c + img as f64 * period);
                }
                acc += lambda_image_tail(a, b, c, period);
            }
            acc
        }),
        Boundary::Asymptotic { psi_inf, half_width } => par::map_indices(n, |i| {
            let a = f[i];
            let mut acc = if a > 0.0 {
                fx[i] * fx[i] / (2.0 * (1.0 + fx[i] * fx[i]))
            } else {
                0.0
            };
            for (j, &b) in f.iter().enumerate() {
                if j != i {
                    acc += lambda_unchecked(a, b, (i as f64 - j as f64) * dx);
                }
            }
            // (x on the grid, y beyond it) and the mirrored pair
            let x = -half_width + i as f64 * dx;
            let left = x + half_width + 0.5 * dx;
            let right = half_width - 0.5 * dx - x;
            acc + 2.0 * (lambda_tail(a, psi_inf, left) + lambda_tail(a, psi_inf, right)) / dx
        }),
    };
    Ok(dx * dx * rows.iter().sum::<f64>())
}

/// `Σ_{|n| > LAMBDA_IMAGES} λ(a, b, c + nν)` from
/// `λ = A c⁻⁴ (1 - (p + q) c⁻² + …)`, each power summed by the midpoint
/// Euler–Maclaurin formula.
fn lambda_image_tail(a: f64, b: f64, c: f64, period: f64) -> f64 {
    let p = (a + b) * (a + b);
    let q = (a - b) * (a - b);
    let amp = 0.5 * p * q;
    if amp == 0.0 {
        return 0.0;
    }
    let m = LAMBDA_IMAGES as f64 + 0.5;
    // Σ_{n > K} (nν ± c)^-k over both signs
    let power_sum = |k: i32| {
        [m * period + c, m * period - c]
            .iter()
            .map(|&u| u.powi(1 - k) / (period * (k - 1) as f64) - k as f64 * period / 24.0 * u.powi(-k - 1))
            .sum::<f64>()
    };
    amp * (power_sum(4) - (p + q) * power_sum(6))
}

/// `∫_{u0}^∞ λ(a, b, c) dc`.
fn lambda_tail(a: f64, b: f64, u0: f64) -> f64 {
    let p = (a + b) * (a + b);
    let q = (a - b) * (a - b);
    let amp = 0.5 * p * q;
    if amp == 0.0 {
        return 0.0;
    }
    // ∫_{u0}^∞ dc / (c² + r²)
    let inv = |r2: f64| {
        let r = r2.sqrt();
        (0.5 * PI - (u0 / r).atan()) / r
    };
    if (q - p).abs() <= 1e-8 * p {
        let r2 = 0.5 * (p + q);
        amp / (2.0 * r2) * (inv(r2) - u0 / (u0 * u0 + r2))
    } else {
        amp / (q - p) * (inv(p) - inv(q))
    }
}

/// `∫∫ ln(1 + ((f(x) - f(y)) / (x - y))²) dx dy` over one period (or the
/// grid) times the real line. The diagonal carries its limit `ln(1 + f_x²)`.
pub fn ln_dissipation_plane(profile: &InterfaceProfile) -> f64 {
    let f = profile.samples();
    let n = f.len();
    let dx = profile.dx();
    let fx = profile.derivative(1).expect("order 1 is valid");
    let rows = match profile.domain().boundary {
        Boundary::Periodic { period } => {
            let w = PI / period;
            let sin_sq: Vec<f64> = (0..n)
                .map(|k| {
                    let s = (w * k as f64 * dx).sin();
                    s * s
                })
                .collect();
            par::map_indices(n, |i| {
                let mut acc = (fx[i] * fx[i]).ln_1p();
                for j in 0..n {
                    if j != i {
                        let sh = (w * (f[i] - f[j])).sinh();
                        acc += (sh * sh / sin_sq[i.abs_diff(j)]).ln_1p();
                    }
                }
                acc
            })
        }
        Boundary::Asymptotic { psi_inf, half_width } => par::map_indices(n, |i| {
            let mut acc = (fx[i] * fx[i]).ln_1p();
            for j in 0..n {
                if j != i {
                    let c = (i as f64 - j as f64) * dx;
                    let d = f[i] - f[j];
                    acc += (d * d / (c * c)).ln_1p();
                }
            }
            let x = -half_width + i as f64 * dx;
            let d = (f[i] - psi_inf).abs();
            let tail = |u0: f64| {
                if d == 0.0 {
                    0.0
                } else {
                    PI * d - u0 * (d * d / (u0 * u0)).ln_1p() - 2.0 * d * (u0 / d).atan()
                }
            };
            let left = x + half_width + 0.5 * dx;
            let right = half_width - 0.5 * dx - x;
            acc + 2.0 * (tail(left) + tail(right)) / dx
        }),
    };
    dx * dx * rows.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub status: CheckStatus,
    /// Largest violation measure found (increment, residual or drift).
    pub worst: f64,
    /// Index of the record (or record pair start) attaining `worst`.
    pub worst_index: Option<usize>,
    pub detail: String,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    fn not_applicable(check: &str, detail: String) -> Self {
        Self {
            check: check.into(),
            status: CheckStatus::NotApplicable,
            worst: 0.0,
            worst_index: None,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneKey {
    MaxSlope,
    L2Energy,
}

/// Largest increment of `key` between consecutive records; passes when it
/// does not exceed `tol`. `slope_threshold` is the slope below which the
/// maximum principle applies (3/10 on the half-plane, 1 on the plane).
pub fn check_monotone(
    records: &[DiagnosticsRecord],
    key: MonotoneKey,
    tol: f64,
    slope_threshold: f64,
) -> CheckReport {
    let name = match key {
        MonotoneKey::MaxSlope => "max_slope_monotone",
        MonotoneKey::L2Energy => "l2_energy_monotone",
    };
    if records.len() < 2 {
        return CheckReport::not_applicable(name, "fewer than two records".into());
    }
    if key == MonotoneKey::MaxSlope && records[0].max_slope > slope_threshold {
        return CheckReport::not_applicable(
            name,
            format!(
                "initial max slope {:.6} exceeds the threshold {slope_threshold}",
                records[0].max_slope
            ),
        );
    }
    let value = |r: &DiagnosticsRecord| match key {
        MonotoneKey::MaxSlope => r.max_slope,
        MonotoneKey::L2Energy => r.l2_energy,
    };
    let (idx, worst) = records
        .windows(2)
        .map(|w| value(&w[1]) - value(&w[0]))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    let pass = worst <= tol;
    CheckReport {
        check: name.into(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        worst: worst.max(0.0),
        worst_index: Some(idx),
        detail: format!(
            "largest increment {worst:.3e} between t = {} and t = {} (tol {tol:.1e})",
            records[idx].t,
            records[idx + 1].t
        ),
    }
}

/// For every consecutive pair: `(E₂ - E₁)/(t₂ - t₁) <= -(1 - slack) min(λ₁, λ₂) + tol`.
pub fn check_energy_inequality(records: &[DiagnosticsRecord], tol: f64, slack: f64) -> CheckReport {
    let name = "energy_inequality";
    if records.len() < 2 {
        return CheckReport::not_applicable(name, "fewer than two records".into());
    }
    if records.iter().any(|r| r.lambda_dissipation.is_none()) {
        return CheckReport::not_applicable(name, "records carry no λ dissipation".into());
    }
    let mut worst = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, w) in records.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        let rate = (w[1].l2_energy - w[0].l2_energy) / dt;
        let lam = w[0].lambda_dissipation.unwrap().min(w[1].lambda_dissipation.unwrap());
        let excess = rate + (1.0 - slack) * lam;
        if excess > worst {
            worst = excess;
            idx = i;
        }
    }
    if worst == f64::NEG_INFINITY {
        return CheckReport::not_applicable(name, "no record pair with positive time step".into());
    }
    let pass = worst <= tol;
    CheckReport {
        check: name.into(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        worst,
        worst_index: Some(idx),
        detail: format!(
            "largest dE/dt + {:.2}·λ = {worst:.3e} at t = {} (tol {tol:.1e})",
            1.0 - slack,
            records[idx].t
        ),
    }
}

/// `max |m(t) - m(0)|` against `tol`.
pub fn check_mass(records: &[DiagnosticsRecord], tol: f64) -> CheckReport {
    let name = "mass_conservation";
    let Some(first) = records.first() else {
        return CheckReport::not_applicable(name, "no records".into());
    };
    let (idx, drift) = records
        .iter()
        .map(|r| (r.l1_mass - first.l1_mass).abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    CheckReport {
        check: name.into(),
        status: if drift <= tol { CheckStatus::Pass } else { CheckStatus::Fail },
        worst: drift,
        worst_index: Some(idx),
        detail: format!("largest |Δ mass| {drift:.3e} at t = {} (tol {tol:.1e})", records[idx].t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularityBound {
    Bound { value: f64, mass: f64 },
    NotApplicable { reason: String },
}

impl SingularityBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            SingularityBound::Bound { value, .. } => Some(*value),
            SingularityBound::NotApplicable { .. } => None,
        }
    }
}

/// Upper bound on the singular time of touching periodic half-plane data
/// from `dE/dt <= -L⁶/20` and `E >= 0`: `T <= 20 ‖ψ‖²₂ / L⁶` when the mass
/// `L` lies in `(0, 3/40)`. Period `ν` data are reduced to period 1 through
/// the scaling `f(x, t) -> f(νx, νt)/ν`.
pub fn singularity_time_bound(psi: &InterfaceProfile) -> SingularityBound {
    let na = |reason: String| SingularityBound::NotApplicable { reason };
    let d = psi.domain();
    let Boundary::Periodic { period } = d.boundary else {
        return na("requires periodic data".into());
    };
    if d.plane != PlaneKind::HalfPlane {
        return na("requires half-plane data".into());
    }
    if psi.min_height() != 0.0 {
        return na(format!("requires min ψ = 0, got {:e}", psi.min_height()));
    }
    let slope = psi.max_slope();
    if slope > 0.3 + 1e-12 {
        return na(format!("requires max slope <= 3/10, got {slope:.6}"));
    }
    let mass = psi.l1_mass() / (period * period);
    let energy = psi.l2_energy() / period.powi(3);
    if !(mass > 0.0 && mass < 3.0 / 40.0) {
        return na(format!("mass (period-1 units) {mass:.6} outside (0, 3/40)"));
    }
    SingularityBound::Bound {
        value: period * 20.0 * energy / mass.powi(6),
        mass,
    }
}

pub fn write_csv<W: Write>(records: &[DiagnosticsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a diagnostics CSV; errors carry the 1-based line number.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::Csv { row: 1, message: e.to_string() })?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Csv {
            row: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv { row, message: e.to_string() })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Csv {
                row,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let parse = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::Csv {
                row,
                message: format!("bad number {:?} in column {}", &rec[i], CSV_HEADER[i]),
            })
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                parse(i).map(Some)
            }
        };
        out.push(DiagnosticsRecord {
            t: parse(0)?,
            max_slope: parse(1)?,
            l1_mass: parse(2)?,
            l2_energy: parse(3)?,
            lambda_dissipation: opt(4)?,
            ln_dissipation: opt(5)?,
            min_height: parse(6)?,
            holder_fxx: parse(7)?,
            blowup_accumulator: parse(8)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::rhs_plane;
    use crate::interface::DomainSpec;
    use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

    fn periodic(plane: PlaneKind, n: usize, f: impl Fn(f64) -> f64) -> InterfaceProfile {
        InterfaceProfile::from_fn(DomainSpec::periodic(plane, 1.0).unwrap(), n, f).unwrap()
    }

    fn record(t: f64, slope: f64, mass: f64, energy: f64, lam: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            max_slope: slope,
            l1_mass: mass,
            l2_energy: energy,
            lambda_dissipation: Some(lam),
            ln_dissipation: None,
            min_height: 0.0,
            holder_fxx: 1.0,
            blowup_accumulator: t,
        }
    }

    #[test]
    fn constant_profiles_dissipate_nothing() {
        for c in [0.0, 0.1, 1.0] {
            let p = periodic(PlaneKind::HalfPlane, 64, |_| c);
            assert_eq!(lambda_dissipation(&p).unwrap(), 0.0);
            let q = periodic(PlaneKind::WholePlane, 64, |_| c);
            assert_eq!(ln_dissipation_plane(&q), 0.0);
        }
    }

    #[test]
    fn lambda_rejects_whole_plane() {
        let p = periodic(PlaneKind::WholePlane, 16, |_| 1.0);
        assert!(lambda_dissipation(&p).is_err());
    }

    #[test]
    fn lambda_matches_direct_quadrature() {
        let f = |x: f64| 0.3 + 0.1 * (2.0 * PI * x).sin() + 0.05 * (4.0 * PI * x).cos();
        let p = periodic(PlaneKind::HalfPlane, 256, f);
        let got = lambda_dissipation(&p).unwrap();

        // outer trapezoid (spectral for periodic integrands), inner adaptive
        // quadrature over the whole line
        let m = 64;
        let opts = QuadOptions::with_tol(1e-14, 1e-12);
        let mut oracle = 0.0;
        for i in 0..m {
            let x = i as f64 / m as f64;
            let g = |y: f64| lambda_unchecked(f(x), f(y), x - y);
            let breaks: Vec<f64> = (-20..=20).map(|k| x + k as f64).collect();
            let mid = integrate(g, x - 20.0, x + 20.0, &breaks, &opts).value;
            let right = integrate_to_infinity(g, x + 20.0, &[], &opts).value;
            let left = integrate_to_infinity(|u| g(2.0 * x - u), x + 20.0, &[], &opts).value;
            oracle += (mid + right + left) / m as f64;
        }
        assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn lambda_two_level_lower_bound() {
        for l in [0.02, 0.05, 0.07] {
            let p = periodic(PlaneKind::HalfPlane, 512, |x| l / 2.0 - l / 4.0 * (2.0 * PI * x).cos());
            let v = lambda_dissipation(&p).unwrap();
            assert!(v >= l.powi(6) / 20.0, "L = {l}: {v}");
        }
    }

    #[test]
    fn lambda_refinement() {
        let f = |x: f64| 0.05 * (1.0 - (2.0 * PI * x).cos());
        let a = lambda_dissipation(&periodic(PlaneKind::HalfPlane, 128, f)).unwrap();
        let b = lambda_dissipation(&periodic(PlaneKind::HalfPlane, 256, f)).unwrap();
        assert!(((a - b) / b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn asymptotic_lambda_insensitive_to_window() {
        let bump = |x: f64| {
            if x.abs() < 1.0 {
                1.0 - 0.2 * (0.5 + 0.5 * (PI * x).cos())
            } else {
                1.0
            }
        };
        let at = |half: f64, n: usize| {
            let d = DomainSpec::asymptotic(PlaneKind::HalfPlane, 1.0, half).unwrap();
            lambda_dissipation(&InterfaceProfile::from_fn(d, n, bump).unwrap()).unwrap()
        };
        let a = at(4.0, 256);
        let b = at(8.0, 512);
        assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn ln_dissipation_matches_energy_rate() {
        // d/dt ∫ f² = 2 ∫ f f_t = -∫∫ ln(1 + (Δf/Δx)²)
        let f = |x: f64| 0.08 * (2.0 * PI * x).sin() + 0.02 * (6.0 * PI * x).cos();
        let p = periodic(PlaneKind::WholePlane, 256, f);
        let ft = rhs_plane(&p).unwrap();
        let rate: f64 = 2.0 * p.dx() * p.samples().iter().zip(&ft).map(|(a, b)| a * b).sum::<f64>();
        let ln = ln_dissipation_plane(&p);
        assert!(((rate + ln) / ln).abs() < 1e-6, "{rate} vs {ln}");
    }

    #[test]
    fn ln_dissipation_scales_quadratically() {
        let f = |x: f64| 0.1 * (2.0 * PI * x).sin();
        let p = periodic(PlaneKind::WholePlane, 128, f);
        for s in [0.5, 3.0] {
            let d = DomainSpec::periodic(PlaneKind::WholePlane, s).unwrap();
            let q = InterfaceProfile::from_fn(d, 128, |x| s * f(x / s)).unwrap();
            let (a, b) = (ln_dissipation_plane(&p), ln_dissipation_plane(&q));
            // difference quotients are invariant, the area element scales by s²
            assert!((b - s * s * a).abs() < 1e-12 * b.abs(), "s = {s}: {b} vs {}", s * s * a);
        }
    }

    #[test]
    fn asymptotic_ln_insensitive_to_window() {
        let bump = |x: f64| if x.abs() < 1.0 { 0.3 * (0.5 + 0.5 * (PI * x).cos()) } else { 0.0 };
        let at = |half: f64, n: usize| {
            let d = DomainSpec::asymptotic(PlaneKind::WholePlane, 0.0, half).unwrap();
            ln_dissipation_plane(&InterfaceProfile::from_fn(d, n, bump).unwrap())
        };
        let a = at(4.0, 256);
        let b = at(8.0, 512);
        assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn lambda_tail_matches_quadrature() {
        let opts = QuadOptions::with_tol(1e-15, 1e-13);
        for (a, b, u0) in [(0.3, 1.0, 0.5), (1.0, 1.0, 2.0), (0.0, 0.7, 0.1), (0.2, 0.2 + 1e-10, 1.0)] {
            let q = integrate_to_infinity(|c| lambda_unchecked(a, b, c), u0, &[], &opts).value;
            let t = lambda_tail(a, b, u0);
            assert!((q - t).abs() <= 1e-10 * q.abs().max(1e-12), "({a},{b},{u0}): {q} vs {t}");
        }
    }

    #[test]
    fn monotone_check_contract() {
        let flat: Vec<_> = (0..5).map(|k| record(k as f64, 0.2, 1.0, 1.0, 0.0)).collect();
        let r = check_monotone(&flat, MonotoneKey::MaxSlope, 1e-6, 0.3);
        assert!(r.passed());
        assert_eq!(r.worst, 0.0);

        let mut jump = flat.clone();
        jump[3].max_slope = 0.25;
        let r = check_monotone(&jump, MonotoneKey::MaxSlope, 1e-6, 0.3);
        assert_eq!(r.status, CheckStatus::Fail);
        assert_eq!(r.worst_index, Some(2));

        let steep: Vec<_> = (0..3).map(|k| record(k as f64, 0.5, 1.0, 1.0, 0.0)).collect();
        let r = check_monotone(&steep, MonotoneKey::MaxSlope, 1e-6, 0.3);
        assert_eq!(r.status, CheckStatus::NotApplicable);
        assert_eq!(check_monotone(&flat[..1], MonotoneKey::L2Energy, 0.0, 1.0).status, CheckStatus::NotApplicable);
    }

    #[test]
    fn energy_check_contract() {
        let flat: Vec<_> = (0..4).map(|k| record(k as f64, 0.2, 1.0, 1.0, 0.0)).collect();
        assert!(check_energy_inequality(&flat, 1e-12, 0.1).passed());

        let decaying: Vec<_> = (0..4).map(|k| record(k as f64, 0.2, 1.0, 1.0 - k as f64, 1.0)).collect();
        assert!(check_energy_inequality(&decaying, 1e-12, 0.1).passed());

        let growing: Vec<_> = (0..4).map(|k| record(k as f64, 0.2, 1.0, 1.0 + k as f64, 0.5)).collect();
        let r = check_energy_inequality(&growing, 1e-6, 0.1);
        assert_eq!(r.status, CheckStatus::Fail);
        assert!((r.worst - 1.45).abs() < 1e-12);
    }

    #[test]
    fn mass_check_reports_drift() {
        let mut rs: Vec<_> = (0..4).map(|k| record(k as f64, 0.2, 1.0, 1.0, 0.0)).collect();
        assert_eq!(check_mass(&rs, 0.0).status, CheckStatus::Pass);
        rs[2].l1_mass += 3e-6;
        let r = check_mass(&rs, 1e-6);
        assert_eq!(r.status, CheckStatus::Fail);
        assert_eq!(r.worst_index, Some(2));
        assert!((r.worst - 3e-6).abs() < 1e-15);
    }

    #[test]
    fn singularity_bound_example() {
        let eps = 0.05;
        let psi = periodic(PlaneKind::HalfPlane, 256, |x| eps * (1.0 - (2.0 * PI * x).cos()) / 2.0);
        let SingularityBound::Bound { value, mass } = singularity_time_bound(&psi) else {
            panic!("bound expected");
        };
        assert!((mass - 0.025).abs() < 1e-14);
        let expected = 20.0 * 9.375e-4 / 0.025_f64.powi(6);
        assert!(((value - expected) / expected).abs() < 1e-12, "{value}");
        assert!((value / 7.68e7 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn singularity_bound_scales_like_eps_to_minus_four() {
        let b = |eps: f64| {
            let psi = periodic(PlaneKind::HalfPlane, 128, |x| eps * (1.0 - (2.0 * PI * x).cos()) / 2.0);
            singularity_time_bound(&psi).value().unwrap()
        };
        let r = b(0.02) / b(0.04);
        assert!((r - 16.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn singularity_bound_preconditions() {
        let heavy = periodic(PlaneKind::HalfPlane, 128, |x| 0.09 * (1.0 - (2.0 * PI * x).cos()));
        assert!(singularity_time_bound(&heavy).value().is_none());
        let lifted = periodic(PlaneKind::HalfPlane, 128, |x| 0.02 + 0.01 * (2.0 * PI * x).cos());
        assert!(singularity_time_bound(&lifted).value().is_none());
        let plane = periodic(PlaneKind::WholePlane, 128, |x| 0.01 * (1.0 - (2.0 * PI * x).cos()));
        assert!(singularity_time_bound(&plane).value().is_none());
    }

    #[test]
    fn singularity_bound_period_rescaling() {
        // period-ν data ψ(x) = ν φ(x/ν) have singular time ν T_φ
        let phi = |x: f64| 0.03 * (1.0 - (2.0 * PI * x).cos());
        let base = singularity_time_bound(&periodic(PlaneKind::HalfPlane, 128, phi)).value().unwrap();
        let nu = 2.5;
        let d = DomainSpec::periodic(PlaneKind::HalfPlane, nu).unwrap();
        let psi = InterfaceProfile::from_fn(d, 128, |x| nu * phi(x / nu)).unwrap();
        let v = singularity_time_bound(&psi).value().unwrap();
        assert!((v / (nu * base) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let rs = vec![
            record(0.0, 0.3, 0.025, 9.375e-4, 1.0 / 3.0),
            DiagnosticsRecord {
                lambda_dissipation: None,
                ln_dissipation: Some(1e-300),
                ..record(0.1, f64::MIN_POSITIVE, -2.5e-17, 0.1 + 0.2, 0.0)
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "t,max_slope,l1_mass,l2_energy,lambda_dissipation,ln_dissipation,min_height,holder_fxx,blowup_accumulator\n"
        ));
        assert!(text.lines().nth(2).unwrap().contains(",,1e-300,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rs);
    }

    #[test]
    fn csv_errors_carry_row_numbers() {
        let rs: Vec<_> = (0..3).map(|k| record(k as f64, 0.2, 1.0, 1.0, 0.0)).collect();
        let mut buf = Vec::new();
        write_csv(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let truncated = &text[..text.len() - 12];
        match read_csv(truncated.as_bytes()) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
        let garbled = text.replacen("1e0", "x", 1);
        assert!(matches!(read_csv(garbled.as_bytes()), Err(Error::Csv { row: 2, .. })));
        assert!(matches!(read_csv("a,b\n".as_bytes()), Err(Error::Csv { row: 1, .. })));
    }
}
