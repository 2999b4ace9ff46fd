//! Initial-data templates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interface::{Boundary, DomainSpec, InterfaceProfile, PlaneKind};

/// Slope threshold of the half-plane maximum principle.
pub const HALF_PLANE_SLOPE_LIMIT: f64 = 0.3;
/// Slope threshold of the whole-plane maximum principle.
pub const PLANE_SLOPE_LIMIT: f64 = 1.0;

/// `max |d/dx cos⁴(πx/w)| = (3√3/4) π / w`.
const TAPER_SLOPE: f64 = 0.75 * 1.732_050_807_568_877_2 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneShape {
    /// `ψ∞ + amplitude cos⁴(πx/width)` on `|x| < width/2`.
    Bump,
    /// `amplitude sin(2πx/ν)`.
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// `ε (1 - cos(2πx/ν)) / 2`; give `epsilon` or `slope_target`.
    PeriodicTouchingBump {
        epsilon: Option<f64>,
        slope_target: Option<f64>,
    },
    /// `ψ∞ - ε cos⁴(πx/width)` on `|x| < width/2`, `ψ∞` elsewhere.
    LocalizedBumpOnConstant { epsilon: f64, width: f64 },
    /// Whole-plane graph; give `amplitude` or `slope_target`.
    PlaneGraph {
        shape: PlaneShape,
        amplitude: Option<f64>,
        slope_target: Option<f64>,
        width: Option<f64>,
    },
    /// `f ≡ level` (the far-field level in asymptotic mode).
    Constant { level: Option<f64> },
}

/// A generated profile with the template's analytic slope and any
/// non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub profile: InterfaceProfile,
    pub analytic_max_slope: f64,
    pub warnings: Vec<String>,
}

fn amplitude_or_slope(
    amplitude: Option<f64>,
    slope_target: Option<f64>,
    slope_per_amplitude: f64,
    name: &str,
) -> Result<f64> {
    match (amplitude, slope_target) {
        (Some(a), None) => Ok(a),
        (None, Some(s)) => Ok(s / slope_per_amplitude),
        _ => Err(Error::InvalidParameter(format!(
            "give exactly one of {name} and slope_target"
        ))),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `ψ(x) = ε (1 - cos(2πx/ν)) / 2`, touching the bottom at `x = 0`.
pub fn periodic_touching_bump(epsilon: f64, nu: f64, n: usize) -> Result<InterfaceProfile> {
    positive("epsilon", epsilon)?;
    positive("period", nu)?;
    let slope = epsilon * PI / nu;
    if slope > HALF_PLANE_SLOPE_LIMIT * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} gives max slope {slope:.6} above the half-plane bound 3/10 \
             (need epsilon <= 3 nu / (10 pi) = {:.6})",
            HALF_PLANE_SLOPE_LIMIT * nu / PI
        )));
    }
    let domain = DomainSpec::periodic(PlaneKind::HalfPlane, nu)?;
    InterfaceProfile::new(
        domain,
        (0..n)
            .map(|i| {
                let x = i as f64 * nu / n as f64;
                0.5 * epsilon * (1.0 - (2.0 * PI * x / nu).cos())
            })
            .collect(),
    )
}

fn taper(x: f64, width: f64) -> f64 {
    if 2.0 * x.abs() >= width {
        0.0
    } else {
        (PI * x / width).cos().powi(4)
    }
}

/// `ψ∞ - ε cos⁴(πx/width)` on `|x| < width/2` over `[-X, X]`; touches the
/// bottom at `x = 0` exactly when `ε = ψ∞`.
pub fn localized_bump_on_constant(
    psi_inf: f64,
    epsilon: f64,
    width: f64,
    half_width: f64,
    n: usize,
) -> Result<InterfaceProfile> {
    positive("psi_inf", psi_inf)?;
    positive("epsilon", epsilon)?;
    positive("width", width)?;
    if epsilon > psi_inf {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} exceeds psi_inf = {psi_inf}: the bump would cross the bottom"
        )));
    }
    if width > half_width {
        return Err(Error::InvalidParameter(format!(
            "bump width {width} does not fit in [-X/2, X/2] with X = {half_width}"
        )));
    }
    let slope = TAPER_SLOPE * epsilon / width;
    if slope > HALF_PLANE_SLOPE_LIMIT * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "max slope {slope:.6} above the half-plane bound 3/10; widen the bump to at least {:.6}",
            TAPER_SLOPE * epsilon / HALF_PLANE_SLOPE_LIMIT
        )));
    }
    let domain = DomainSpec::asymptotic(PlaneKind::HalfPlane, psi_inf, half_width)?;
    let dx = 2.0 * half_width / n as f64;
    let samples = (0..n)
        .map(|i| {
            // an integer offset from the centre keeps x = 0 exact
            let x = if n.is_multiple_of(2) {
                (i as f64 - (n / 2) as f64) * dx
            } else {
                -half_width + i as f64 * dx
            };
            psi_inf - epsilon * taper(x, width)
        })
        .collect();
    InterfaceProfile::new(domain, samples)
}

/// Whole-plane graph for the plane maximum principle. A slope above 1 is
/// reported as a warning.
pub fn plane_graph(
    shape: PlaneShape,
    amplitude: f64,
    width: Option<f64>,
    domain: DomainSpec,
    n: usize,
) -> Result<Generated> {
    if domain.plane != PlaneKind::WholePlane {
        return Err(Error::Domain("plane_graph builds whole-plane data".into()));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!("amplitude must be finite, got {amplitude}")));
    }
    let (profile, slope) = match (shape, domain.boundary) {
        (PlaneShape::Sine, Boundary::Periodic { period }) => {
            let p = InterfaceProfile::from_fn(domain, n, |x| amplitude * (2.0 * PI * x / period).sin())?;
            (p, 2.0 * PI * amplitude.abs() / period)
        }
        (PlaneShape::Sine, Boundary::Asymptotic { .. }) => {
            return Err(Error::Domain("sine data require a periodic domain".into()))
        }
        (PlaneShape::Bump, boundary) => {
            let width = width
                .ok_or_else(|| Error::InvalidParameter("bump shape needs a width".into()))?;
            positive("width", width)?;
            let (level, centre, fits) = match boundary {
                Boundary::Periodic { period } => (0.0, 0.5 * period, width <= period),
                Boundary::Asymptotic { psi_inf, half_width } => (psi_inf, 0.0, width <= half_width),
            };
            if !fits {
                return Err(Error::InvalidParameter(format!(
                    "bump width {width} does not fit in the domain"
                )));
            }
            let p = InterfaceProfile::new(
                domain,
                (0..n)
                    .map(|i| {
                        let x = domain.origin() + i as f64 * domain.length() / n as f64;
                        level + amplitude * taper(x - centre, width)
                    })
                    .collect(),
            )?;
            (p, TAPER_SLOPE * amplitude.abs() / width)
        }
    };
    let mut warnings = Vec::new();
    if slope > PLANE_SLOPE_LIMIT {
        warnings.push(format!(
            "max slope {slope:.6} exceeds 1: the plane maximum principle is not guaranteed"
        ));
    }
    Ok(Generated { profile, analytic_max_slope: slope, warnings })
}

impl ScenarioSpec {
    /// Sample the template on `domain` with `n` points.
    pub fn build(&self, domain: &DomainSpec, n: usize) -> Result<Generated> {
        domain.validate()?;
        let plain = |profile: InterfaceProfile, slope: f64| Generated {
            profile,
            analytic_max_slope: slope,
            warnings: Vec::new(),
        };
        match *self {
            ScenarioSpec::PeriodicTouchingBump { epsilon, slope_target } => {
                let Boundary::Periodic { period } = domain.boundary else {
                    return Err(Error::Domain("periodic_touching_bump needs a periodic domain".into()));
                };
                if domain.plane != PlaneKind::HalfPlane {
                    return Err(Error::Domain("periodic_touching_bump needs the half-plane".into()));
                }
                let eps = amplitude_or_slope(epsilon, slope_target, PI / period, "epsilon")?;
                Ok(plain(periodic_touching_bump(eps, period, n)?, eps * PI / period))
            }
            ScenarioSpec::LocalizedBumpOnConstant { epsilon, width } => {
                let (PlaneKind::HalfPlane, Boundary::Asymptotic { psi_inf, half_width }) =
                    (domain.plane, domain.boundary)
                else {
                    return Err(Error::Domain(
                        "localized_bump_on_constant needs an asymptotic half-plane domain".into(),
                    ));
                };
                let p = localized_bump_on_constant(psi_inf, epsilon, width, half_width, n)?;
                Ok(plain(p, TAPER_SLOPE * epsilon / width))
            }
            ScenarioSpec::PlaneGraph { shape, amplitude, slope_target, width } => {
                let per_amp = match (shape, domain.boundary) {
                    (PlaneShape::Sine, Boundary::Periodic { period }) => 2.0 * PI / period,
                    (PlaneShape::Bump, _) => TAPER_SLOPE / width.unwrap_or(f64::NAN),
                    _ => f64::NAN,
                };
                let amp = amplitude_or_slope(amplitude, slope_target, per_amp, "amplitude")?;
                plane_graph(shape, amp, width, *domain, n)
            }
            ScenarioSpec::Constant { level } => {
                let level = match (level, domain.boundary) {
                    (None, Boundary::Asymptotic { psi_inf, .. }) => psi_inf,
                    (Some(l), Boundary::Asymptotic { psi_inf, .. }) if l != psi_inf => {
                        return Err(Error::InvalidParameter(format!(
                            "constant level {l} differs from the far-field level {psi_inf}"
                        )))
                    }
                    (Some(l), _) => l,
                    (None, Boundary::Periodic { .. }) => {
                        return Err(Error::InvalidParameter("constant scenario needs a level".into()))
                    }
                };
                Ok(plain(InterfaceProfile::new(*domain, vec![level; n])?, 0.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn touching_bump_at_the_slope_limit() {
        let p = periodic_touching_bump(0.3 / PI, 1.0, 512).unwrap();
        assert_eq!(p.min_height(), 0.0);
        assert_eq!(p.samples()[0], 0.0);
        // grid points x = 1/4, 3/4 carry the extremal slope
        assert!((p.max_slope() - 0.3).abs() < 1e-12, "{}", p.max_slope());
    }

    #[test]
    fn touching_bump_mass_in_window() {
        let p = periodic_touching_bump(0.05, 1.0, 256).unwrap();
        assert!((p.l1_mass() - 0.025).abs() < 1e-15);
        assert!(p.l1_mass() < 3.0 / 40.0);
    }

    #[test]
    fn touching_bump_rejects_steep_data() {
        let e = periodic_touching_bump(1.0, 1.0, 64).unwrap_err().to_string();
        assert!(e.contains("3/10"), "{e}");
    }

    #[test]
    fn localized_bump_touching_and_control() {
        let p = localized_bump_on_constant(0.5, 0.5, 8.0, 10.0, 1024).unwrap();
        assert_eq!(p.min_height(), 0.0);
        assert_eq!(p.samples()[512], 0.0);
        let q = localized_bump_on_constant(0.5, 0.25, 8.0, 10.0, 1024).unwrap();
        assert!((q.min_height() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn localized_bump_slope_matches_taper() {
        let (eps, w) = (0.4, 8.0);
        let p = localized_bump_on_constant(0.5, eps, w, 10.0, 1 << 15).unwrap();
        let exact = TAPER_SLOPE * eps / w;
        assert!((p.max_slope() - exact).abs() < 1e-6, "{} vs {exact}", p.max_slope());
    }

    #[test]
    fn localized_bump_contract_errors() {
        assert!(localized_bump_on_constant(0.5, 0.6, 8.0, 10.0, 256).is_err());
        // support wider than [-X/2, X/2]
        assert!(localized_bump_on_constant(0.5, 0.5, 12.0, 10.0, 256).is_err());
        // too narrow for the slope bound
        let e = localized_bump_on_constant(0.5, 0.5, 1.0, 10.0, 256).unwrap_err().to_string();
        assert!(e.contains("3/10"), "{e}");
    }

    #[test]
    fn plane_sine_slope_and_warning() {
        let d = DomainSpec::periodic(PlaneKind::WholePlane, 1.0).unwrap();
        let g = plane_graph(PlaneShape::Sine, 0.9 / (2.0 * PI), None, d, 256).unwrap();
        assert!(g.warnings.is_empty());
        assert!((g.profile.max_slope() - 0.9).abs() < 1e-12);
        let g = plane_graph(PlaneShape::Sine, 1.5 / (2.0 * PI), None, d, 256).unwrap();
        assert_eq!(g.warnings.len(), 1);
    }

    #[test]
    fn plane_graph_needs_whole_plane() {
        let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
        assert!(plane_graph(PlaneShape::Sine, 0.1, None, d, 64).is_err());
    }

    #[test]
    fn spec_slope_target_and_constant() {
        let d = DomainSpec::periodic(PlaneKind::WholePlane, 1.0).unwrap();
        let s = ScenarioSpec::PlaneGraph {
            shape: PlaneShape::Sine,
            amplitude: None,
            slope_target: Some(0.9),
            width: None,
        };
        let g = s.build(&d, 128).unwrap();
        assert!((g.analytic_max_slope - 0.9).abs() < 1e-15);

        let c = ScenarioSpec::Constant { level: Some(0.7) }.build(&d, 64).unwrap();
        assert_eq!(c.profile.max_slope(), 0.0);
        let a = DomainSpec::asymptotic(PlaneKind::HalfPlane, 1.0, 4.0).unwrap();
        assert!(ScenarioSpec::Constant { level: Some(0.5) }.build(&a, 64).is_err());
        assert_eq!(ScenarioSpec::Constant { level: None }.build(&a, 64).unwrap().profile.samples()[3], 1.0);
    }

    #[test]
    fn spec_rejects_mismatched_domain() {
        let plane = DomainSpec::periodic(PlaneKind::WholePlane, 1.0).unwrap();
        let bump = ScenarioSpec::PeriodicTouchingBump { epsilon: Some(0.05), slope_target: None };
        assert!(bump.build(&plane, 64).is_err());
        let both = ScenarioSpec::PeriodicTouchingBump { epsilon: Some(0.05), slope_target: Some(0.1) };
        let half = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
        assert!(both.build(&half, 64).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn touching_bumps_are_valid(frac in 0.01..=1.0f64, nu in 0.5..4.0f64, log_n in 4u32..10) {
            let eps = frac * 0.3 * nu / PI;
            let p = periodic_touching_bump(eps, nu, 1 << log_n).unwrap();
            prop_assert_eq!(p.min_height(), 0.0);
            prop_assert!(p.max_slope() <= 0.3 + 1e-12);
            prop_assert!((p.max_slope() - eps * PI / nu).abs() <= eps * PI / nu * (PI / (1 << log_n) as f64).powi(2));
        }

        #[test]
        fn localized_bumps_are_valid(psi in 0.1..1.0f64, frac in 0.1..=1.0f64, n in 64usize..600) {
            let eps = frac * psi;
            let width = TAPER_SLOPE * eps / 0.3 * 1.01;
            let half = 2.0 * width + 1.0;
            let p = localized_bump_on_constant(psi, eps, width, half, n).unwrap();
            prop_assert!(p.min_height() >= 0.0);
            prop_assert!(p.max_slope() <= 0.3 + 1e-3);
        }
    }
}
