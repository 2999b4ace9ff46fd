//! Uniform-grid interface profiles: derivatives, norms and snapshots.

use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    /// Fluid above an impermeable bottom at height 0; heights must stay non-negative.
    HalfPlane,
    WholePlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Periodic { period: f64 },
    /// `f - psi_inf` is (initially) supported in `[-half_width, half_width]`.
    Asymptotic { psi_inf: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub plane: PlaneKind,
    pub boundary: Boundary,
}

impl DomainSpec {
    pub fn new(plane: PlaneKind, boundary: Boundary) -> Result<Self> {
        let d = Self { plane, boundary };
        d.validate()?;
        Ok(d)
    }

    pub fn periodic(plane: PlaneKind, period: f64) -> Result<Self> {
        Self::new(plane, Boundary::Periodic { period })
    }

    pub fn asymptotic(plane: PlaneKind, psi_inf: f64, half_width: f64) -> Result<Self> {
        Self::new(plane, Boundary::Asymptotic { psi_inf, half_width })
    }

    pub fn validate(&self) -> Result<()> {
        match self.boundary {
            Boundary::Periodic { period } => {
                if !(period.is_finite() && period > 0.0) {
                    return Err(Error::Domain(format!("period must be positive, got {period}")));
                }
            }
            Boundary::Asymptotic { psi_inf, half_width } => {
                if !(half_width.is_finite() && half_width > 0.0) {
                    return Err(Error::Domain(format!(
                        "half-width must be positive, got {half_width}"
                    )));
                }
                if !psi_inf.is_finite() {
                    return Err(Error::Domain("far-field level must be finite".into()));
                }
                if self.plane == PlaneKind::HalfPlane && psi_inf < 0.0 {
                    return Err(Error::Domain(format!(
                        "half-plane far-field level must be >= 0, got {psi_inf}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic { .. })
    }

    /// Length of the computational interval (period or `2X`).
    pub fn length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic { period } => period,
            Boundary::Asymptotic { half_width, .. } => 2.0 * half_width,
        }
    }

    /// Reference level subtracted in mass and energy (0 when periodic).
    pub fn reference_level(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic { .. } => 0.0,
            Boundary::Asymptotic { psi_inf, .. } => psi_inf,
        }
    }

    /// Left end of the grid: 0 when periodic, `-X` otherwise.
    pub fn origin(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic { .. } => 0.0,
            Boundary::Asymptotic { half_width, .. } => -half_width,
        }
    }
}

/// Heights `f(x_i)` at `x_i = origin + i dx`, `dx = length / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceProfile {
    domain: DomainSpec,
    samples: Vec<f64>,
    dx: f64,
}

impl InterfaceProfile {
    /// Construct initial data, enforcing every profile invariant including the
    /// far-field convention in asymptotic mode.
    pub fn new(domain: DomainSpec, samples: Vec<f64>) -> Result<Self> {
        let p = Self::from_samples(domain, samples)?;
        if let Boundary::Asymptotic { psi_inf, .. } = domain.boundary {
            let n = p.len();
            let edge = n.div_ceil(20);
            let outer = p.samples[..edge].iter().chain(&p.samples[n - edge..]);
            if let Some(v) = outer.copied().find(|v| (v - psi_inf).abs() > 1e-12) {
                return Err(Error::InvalidProfile(format!(
                    "sample {v} on the outer 10% of the grid differs from the far-field level {psi_inf}"
                )));
            }
        }
        Ok(p)
    }

    /// Construct an evolved profile. Only grid shape, finiteness and (for the
    /// half-plane) non-negativity are checked: the nonlocal flow does not keep
    /// `f - psi_inf` compactly supported.
    pub fn from_samples(domain: DomainSpec, samples: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        let n = samples.len();
        if n < MIN_GRID {
            return Err(Error::InvalidProfile(format!(
                "grid needs at least {MIN_GRID} points, got {n}"
            )));
        }
        if domain.is_periodic() && !n.is_power_of_two() {
            return Err(Error::InvalidProfile(format!(
                "periodic grid size must be a power of two, got {n}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!("non-finite sample at index {i}")));
        }
        if domain.plane == PlaneKind::HalfPlane {
            if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| v < 0.0) {
                return Err(Error::NegativeHeight { index, value });
            }
        }
        let dx = domain.length() / n as f64;
        Ok(Self { domain, samples, dx })
    }

    /// Sample `f` at the grid points.
    pub fn from_fn(domain: DomainSpec, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        domain.validate()?;
        let dx = domain.length() / n as f64;
        let x0 = domain.origin();
        Self::new(domain, (0..n).map(|i| f(x0 + i as f64 * dx)).collect())
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.domain.origin() + i as f64 * self.dx
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn derivative(&self, order: u32) -> Result<Vec<f64>> {
        match order {
            0 => Ok(self.samples.clone()),
            1..=3 => Ok(match self.domain.boundary {
                Boundary::Periodic { period } => {
                    spectral_derivatives(&self.samples, period, &[order]).remove(0)
                }
                Boundary::Asymptotic { .. } => fd_derivative(&self.samples, self.dx, order),
            }),
            _ => Err(Error::InvalidParameter(format!(
                "derivative order must be at most 3, got {order}"
            ))),
        }
    }

    /// `(f_x, f_xx)` sharing one forward transform in periodic mode.
    pub fn first_two_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        match self.domain.boundary {
            Boundary::Periodic { period } => {
                let mut d = spectral_derivatives(&self.samples, period, &[1, 2]);
                let fxx = d.pop().expect("two orders requested");
                (d.pop().expect("two orders requested"), fxx)
            }
            Boundary::Asymptotic { .. } => (
                fd_derivative(&self.samples, self.dx, 1),
                fd_derivative(&self.samples, self.dx, 2),
            ),
        }
    }

    pub fn max_slope(&self) -> f64 {
        let fx = self.derivative(1).expect("order 1 is valid");
        fx.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫ f` over one period, or `∫ (f - psi_inf)` over the grid.
    pub fn l1_mass(&self) -> f64 {
        let level = self.domain.reference_level();
        self.dx * par::neumaier_sum(self.samples.iter().map(|v| v - level))
    }

    /// `∫ f²` over one period, or `∫ (f - psi_inf)²` over the grid.
    pub fn l2_energy(&self) -> f64 {
        let level = self.domain.reference_level();
        self.dx * par::neumaier_sum(self.samples.iter().map(|v| (v - level) * (v - level)))
    }

    /// Largest `|f_xx(x_i) - f_xx(x_j)| / |x_i - x_j|^γ'` over grid pairs
    /// (periodic distance when periodic).
    pub fn holder_seminorm_fxx(&self, gamma_prime: f64) -> Result<f64> {
        if !(gamma_prime > 0.0 && gamma_prime <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hölder exponent must lie in (0, 1], got {gamma_prime}"
            )));
        }
        let fxx = self.derivative(2)?;
        Ok(holder_seminorm(&fxx, self.dx, self.domain.is_periodic(), gamma_prime))
    }

    pub fn to_snapshot(&self, t: f64) -> Snapshot {
        Snapshot {
            t,
            domain: self.domain,
            n: self.len(),
            dx: self.dx,
            samples: self.samples.clone(),
        }
    }
}

pub(crate) fn holder_seminorm(g: &[f64], dx: f64, periodic: bool, gamma_prime: f64) -> f64 {
    let n = g.len();
    let row_max = par::map_indices(n, |i| {
        let mut m = 0.0_f64;
        for j in (i + 1)..n {
            let k = j - i;
            let cells = if periodic { k.min(n - k) } else { k };
            let dist = cells as f64 * dx;
            m = m.max((g[i] - g[j]).abs() / dist.powf(gamma_prime));
        }
        m
    });
    row_max.into_iter().fold(0.0, f64::max)
}

/// Spectral derivatives of periodic samples, one output per requested order.
/// The Nyquist coefficient is dropped for odd orders so that real data map
/// to real derivatives.
pub fn spectral_derivatives(samples: &[f64], period: f64, orders: &[u32]) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let base = 2.0 * std::f64::consts::PI / period;
    orders
        .iter()
        .map(|&order| {
            let mut buf: Vec<Complex64> = spec
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                    if order % 2 == 1 && n.is_multiple_of(2) && k == n / 2 {
                        return Complex64::new(0.0, 0.0);
                    }
                    c * Complex64::new(0.0, base * kk).powu(order)
                })
                .collect();
            inv.process(&mut buf);
            buf.iter().map(|c| c.re / n as f64).collect()
        })
        .collect()
}

/// Fourth-order centred differences; samples beyond the ends repeat the
/// end values. Written in difference form so constants map to exact zeros.
pub fn fd_derivative(samples: &[f64], dx: f64, order: u32) -> Vec<f64> {
    let n = samples.len() as isize;
    let at = |i: isize| samples[i.clamp(0, n - 1) as usize];
    (0..n)
        .map(|i| {
            let f0 = at(i);
            let odd = |k: isize| at(i + k) - at(i - k);
            let even = |k: isize| (at(i + k) - f0) + (at(i - k) - f0);
            match order {
                1 => (2.0 / 3.0 * odd(1) - 1.0 / 12.0 * odd(2)) / dx,
                2 => (4.0 / 3.0 * even(1) - 1.0 / 12.0 * even(2)) / (dx * dx),
                3 => (odd(2) - 1.625 * odd(1) - 0.125 * odd(3)) / (dx * dx * dx),
                _ => unreachable!("order checked by caller"),
            }
        })
        .collect()
}

/// Persisted profile at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub t: f64,
    pub domain: DomainSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub dx: f64,
    pub samples: Vec<f64>,
}

impl Snapshot {
    pub fn to_profile(&self) -> Result<InterfaceProfile> {
        if self.samples.len() != self.n {
            return Err(Error::InvalidProfile(format!(
                "snapshot declares N = {} but holds {} samples",
                self.n,
                self.samples.len()
            )));
        }
        InterfaceProfile::from_samples(self.domain, self.samples.clone())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic_half(n: usize, eps: f64) -> InterfaceProfile {
        let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
        InterfaceProfile::from_fn(d, n, |x| eps * (1.0 - (2.0 * PI * x).cos()) / 2.0).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::periodic(PlaneKind::HalfPlane, 0.0).is_err());
        assert!(DomainSpec::asymptotic(PlaneKind::HalfPlane, -1.0, 1.0).is_err());
        assert!(DomainSpec::asymptotic(PlaneKind::WholePlane, -1.0, 1.0).is_ok());
        assert!(DomainSpec::asymptotic(PlaneKind::WholePlane, 0.0, 0.0).is_err());
    }

    #[test]
    fn profile_invariants() {
        let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
        assert!(InterfaceProfile::new(d, vec![1.0; 100]).is_err());
        assert!(InterfaceProfile::new(d, vec![1.0; 4]).is_err());
        let mut s = vec![1.0; 16];
        s[3] = -1e-3;
        assert!(matches!(
            InterfaceProfile::new(d, s),
            Err(Error::NegativeHeight { index: 3, .. })
        ));
        let mut s = vec![1.0; 16];
        s[5] = f64::NAN;
        assert!(InterfaceProfile::new(d, s).is_err());

        let a = DomainSpec::asymptotic(PlaneKind::HalfPlane, 1.0, 2.0).unwrap();
        let mut s = vec![1.0; 40];
        s[20] = 0.5;
        assert!(InterfaceProfile::new(a, s.clone()).is_ok());
        s[0] = 0.9;
        assert!(InterfaceProfile::new(a, s.clone()).is_err());
        assert!(InterfaceProfile::from_samples(a, s).is_ok());
    }

    #[test]
    fn constant_profile_monitors() {
        let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
        let p = InterfaceProfile::new(d, vec![0.7; 64]).unwrap();
        for order in 1..=3 {
            assert!(p.derivative(order).unwrap().iter().all(|v| v.abs() < 1e-14));
        }
        assert!(p.max_slope() < 1e-14);
        assert_eq!(p.sup_norm(), 0.7);
        assert_eq!(p.min_height(), 0.7);
        assert!(p.holder_seminorm_fxx(0.5).unwrap() < 1e-12);

        let a = DomainSpec::asymptotic(PlaneKind::WholePlane, 0.3, 5.0).unwrap();
        let p = InterfaceProfile::new(a, vec![0.3; 64]).unwrap();
        assert_eq!(p.derivative(1).unwrap(), vec![0.0; 64]);
        assert_eq!(p.l1_mass(), 0.0);
        assert_eq!(p.l2_energy(), 0.0);
        assert!(p.derivative(4).is_err());
    }

    #[test]
    fn spectral_derivatives_of_cosine_bump() {
        let eps = 3.0 / (10.0 * PI);
        let p = periodic_half(256, eps);
        let f1 = p.derivative(1).unwrap();
        let f2 = p.derivative(2).unwrap();
        let f3 = p.derivative(3).unwrap();
        for i in 0..p.len() {
            let x = p.x(i);
            let w = 2.0 * PI * x;
            assert!((f1[i] - eps * PI * w.sin()).abs() < 1e-10);
            assert!((f2[i] - 2.0 * eps * PI * PI * w.cos()).abs() < 1e-10);
            assert!((f3[i] + 4.0 * eps * PI.powi(3) * w.sin()).abs() < 1e-7);
        }
        let (a, b) = p.first_two_derivatives();
        assert_eq!(a, f1);
        assert_eq!(b, f2);
        assert!((p.max_slope() - 0.3).abs() < 1e-6);
        assert_eq!(p.min_height(), 0.0);
    }

    #[test]
    fn finite_differences_are_fourth_order() {
        let err = |n: usize| {
            let d = DomainSpec::asymptotic(PlaneKind::WholePlane, 0.0, 10.0).unwrap();
            let p = InterfaceProfile::from_fn(d, n, |x| (-x * x).exp()).unwrap();
            let mut e = [0.0_f64; 3];
            for (o, eo) in e.iter_mut().enumerate() {
                let der = p.derivative(o as u32 + 1).unwrap();
                for (i, v) in der.iter().enumerate() {
                    let x = p.x(i);
                    let g = (-x * x).exp();
                    let exact = match o {
                        0 => -2.0 * x * g,
                        1 => (4.0 * x * x - 2.0) * g,
                        _ => (12.0 * x - 8.0 * x * x * x) * g,
                    };
                    *eo = eo.max((v - exact).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(400), err(800));
        for o in 0..3 {
            let rate = (e1[o] / e2[o]).log2();
            assert!(rate > 3.7, "order {} rate {rate}", o + 1);
        }
    }

    #[test]
    fn mass_and_energy_of_cosine_bump() {
        let eps = 0.05;
        let p = periodic_half(128, eps);
        assert!((p.l1_mass() - eps / 2.0).abs() < 1e-15);
        assert!((p.l2_energy() - 3.0 * eps * eps / 8.0).abs() < 1e-15);
    }

    #[test]
    fn holder_seminorm_examples() {
        let eps = 3.0 / (10.0 * PI);
        let p = periodic_half(256, eps);
        let v = p.holder_seminorm_fxx(1.0).unwrap();
        let exact = 4.0 * eps * PI.powi(3);
        assert!((v - exact).abs() < 0.05 * exact, "{v} vs {exact}");

        let d = DomainSpec::asymptotic(PlaneKind::WholePlane, 0.0, 1.0).unwrap();
        let q = InterfaceProfile::from_samples(d, (0..64).map(|i| {
            let x = -1.0 + i as f64 / 32.0;
            x * x
        }).collect()).unwrap();
        let fxx = q.derivative(2).unwrap();
        let interior = &fxx[4..60];
        assert!(holder_seminorm(interior, q.dx(), false, 0.5) < 1e-9);
        assert!(q.holder_seminorm_fxx(0.0).is_err());
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let p = periodic_half(64, 0.0917);
        let snap = p.to_snapshot(0.123_456_789_012_345_6);
        let text = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&text).unwrap();
        assert_eq!(back, snap);
        for (a, b) in back.samples.iter().zip(p.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["t", "domain", "N", "dx", "samples"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(back.to_profile().unwrap(), p);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_samples() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0f64..2.0, 32)
        }

        proptest! {
            #[test]
            fn derivative_is_linear(u in arb_samples(), v in arb_samples(), c in -3.0f64..3.0) {
                let d = DomainSpec::periodic(PlaneKind::WholePlane, 2.0).unwrap();
                let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
                let pu = InterfaceProfile::new(d, u).unwrap();
                let pv = InterfaceProfile::new(d, v).unwrap();
                let pw = InterfaceProfile::new(d, w).unwrap();
                for order in 1..=3 {
                    let (du, dv, dw) = (pu.derivative(order).unwrap(), pv.derivative(order).unwrap(), pw.derivative(order).unwrap());
                    let scale = dw.iter().chain(&du).fold(1.0f64, |m, x| m.max(x.abs()));
                    for i in 0..du.len() {
                        prop_assert!((dw[i] - du[i] - c * dv[i]).abs() < 1e-10 * scale);
                    }
                }
            }

            #[test]
            fn norms_invariant_under_rotation(u in arb_samples(), k in 0usize..32) {
                let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
                let mut r = u.clone();
                r.rotate_left(k);
                let (p, q) = (InterfaceProfile::new(d, u).unwrap(), InterfaceProfile::new(d, r).unwrap());
                prop_assert!((p.l1_mass() - q.l1_mass()).abs() < 1e-14);
                prop_assert!((p.l2_energy() - q.l2_energy()).abs() < 1e-14);
            }

            #[test]
            fn holder_scales_linearly(u in arb_samples(), c in 0.1f64..5.0) {
                let d = DomainSpec::periodic(PlaneKind::HalfPlane, 1.0).unwrap();
                let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
                let (p, q) = (InterfaceProfile::new(d, u).unwrap(), InterfaceProfile::new(d, cu).unwrap());
                let (hp, hq) = (p.holder_seminorm_fxx(0.5).unwrap(), q.holder_seminorm_fxx(0.5).unwrap());
                prop_assert!(hp >= 0.0);
                prop_assert!((hq - c * hp).abs() <= 1e-9 * (1.0 + hq));
            }
        }
    }
}
