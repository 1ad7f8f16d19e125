//! N-functions: generators, conjugates, shifts, growth indices and the
//! vector fields `A(ζ) = Φ'(|ζ|) ζ/|ζ|` and `V(ζ) = Ψ'(|ζ|) ζ/|ζ|`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Relative tolerance used for every quadrature-defined value of `Φ`.
pub const QUAD_REL_TOL: f64 = 1e-12;

/// Default floor for the linearization of `A` at `ζ = 0`.
pub const DEFAULT_EPS_REG: f64 = 1e-10;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    Power { p: f64 },
    ShiftedPower { p: f64, kappa: f64 },
    Shifted { base: NFunction, a: f64 },
    Conjugate { base: NFunction },
    Psi { base: NFunction },
    Custom { name: String, phi: ScalarFn, dphi: ScalarFn, ddphi: ScalarFn },
}

struct Inner {
    family: Family,
    characteristics: OnceLock<(f64, f64)>,
}

/// A convex generator `Φ` together with its first two derivatives.
///
/// Cheap to clone; values are immutable and can be shared across threads.
#[derive(Clone)]
pub struct NFunction(Arc<Inner>);

/// Public description of how an [`NFunction`] was built.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyTag {
    Power(f64),
    ShiftedPower(f64, f64),
    Shifted(f64),
    Conjugate,
    Psi,
    Custom(String),
}

impl fmt::Debug for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.family {
            Family::Power { p } => write!(f, "Power({p})"),
            Family::ShiftedPower { p, kappa } => write!(f, "ShiftedPower({p}, {kappa})"),
            Family::Shifted { base, a } => write!(f, "Shifted({base:?}, {a})"),
            Family::Conjugate { base } => write!(f, "Conjugate({base:?})"),
            Family::Psi { base } => write!(f, "Psi({base:?})"),
            Family::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl NFunction {
    fn from_family(family: Family) -> Self {
        NFunction(Arc::new(Inner {
            family,
            characteristics: OnceLock::new(),
        }))
    }

    /// `Φ_p(t) = t^p / p`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("power N-function needs p > 1, got {p}")));
        }
        Ok(Self::from_family(Family::Power { p }))
    }

    /// `Φ_{p,κ}` with `Φ'(t) = (κ + t)^{p-2} t`.
    pub fn shifted_power(p: f64, kappa: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("shifted power needs p > 1, got {p}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("shifted power needs kappa >= 0, got {kappa}")));
        }
        if kappa == 0.0 {
            return Self::power(p);
        }
        Ok(Self::from_family(Family::ShiftedPower { p, kappa }))
    }

    /// A user-supplied N-function. The caller is responsible for the
    /// consistency of the three closures.
    pub fn custom<F, G, H>(name: &str, phi: F, dphi: G, ddphi: H) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_family(Family::Custom {
            name: name.to_string(),
            phi: Arc::new(phi),
            dphi: Arc::new(dphi),
            ddphi: Arc::new(ddphi),
        })
    }

    pub fn family(&self) -> FamilyTag {
        match &self.0.family {
            Family::Power { p } => FamilyTag::Power(*p),
            Family::ShiftedPower { p, kappa } => FamilyTag::ShiftedPower(*p, *kappa),
            Family::Shifted { a, .. } => FamilyTag::Shifted(*a),
            Family::Conjugate { .. } => FamilyTag::Conjugate,
            Family::Psi { .. } => FamilyTag::Psi,
            Family::Custom { name, .. } => FamilyTag::Custom(name.clone()),
        }
    }

    /// The exponent `p` of power-type families, if any.
    pub fn power_exponent(&self) -> Option<f64> {
        match &self.0.family {
            Family::Power { p } | Family::ShiftedPower { p, .. } => Some(*p),
            _ => None,
        }
    }

    /// `Φ(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        let t = t.abs();
        if t == 0.0 {
            return 0.0;
        }
        match &self.0.family {
            Family::Power { p } => t.powf(*p) / p,
            Family::ShiftedPower { p, kappa } => shifted_power_phi(*p, *kappa, t),
            Family::Custom { phi, .. } => phi(t),
            _ => quad::integrate(|s| self.dphi(s), 0.0, t, QUAD_REL_TOL, 0.0),
        }
    }

    /// `Φ'(t)`.
    pub fn dphi(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.0.family {
            Family::Power { p } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(p - 1.0)
                }
            }
            Family::ShiftedPower { p, kappa } => (kappa + t).powf(p - 2.0) * t,
            Family::Shifted { base, a } => {
                if t == 0.0 {
                    0.0
                } else {
                    base.dphi(a + t) * t / (a + t)
                }
            }
            Family::Conjugate { base } => numeric_inverse(base, t),
            Family::Psi { base } => (t * base.dphi(t)).sqrt(),
            Family::Custom { dphi, .. } => dphi(t),
        }
    }

    /// `Φ''(t)`; at `t = 0` the one-sided limit, which may be `0` or `∞`.
    pub fn ddphi(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.0.family {
            Family::Power { p } => {
                if t == 0.0 {
                    match p.partial_cmp(&2.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0,
                        _ => 0.0,
                    }
                } else {
                    (p - 1.0) * t.powf(p - 2.0)
                }
            }
            Family::ShiftedPower { p, kappa } => {
                (kappa + t).powf(p - 3.0) * (kappa + (p - 1.0) * t)
            }
            Family::Shifted { base, a } => {
                let s = a + t;
                if s == 0.0 {
                    return base.ddphi(0.0);
                }
                base.ddphi(s) * t / s + base.dphi(s) * a / (s * s)
            }
            Family::Conjugate { base } => {
                let s = numeric_inverse(base, t);
                1.0 / base.ddphi(s)
            }
            Family::Psi { base } => {
                let t = if t == 0.0 { f64::MIN_POSITIVE } else { t };
                let d = (t * base.dphi(t)).sqrt();
                (base.dphi(t) + t * base.ddphi(t)) / (2.0 * d)
            }
            Family::Custom { ddphi, .. } => ddphi(t),
        }
    }

    /// `Φ'(t)/t`, with the `t → 0` limit at zero.
    pub fn dphi_over_t(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.0.family {
            Family::Power { p } => {
                if t == 0.0 {
                    self.ddphi(0.0)
                } else {
                    t.powf(p - 2.0)
                }
            }
            Family::ShiftedPower { p, kappa } => (kappa + t).powf(p - 2.0),
            _ => {
                if t == 0.0 {
                    self.ddphi(0.0)
                } else {
                    self.dphi(t) / t
                }
            }
        }
    }

    /// Generalized inverse `(Φ')^{-1}(t) = sup{s : Φ'(s) ≤ t}`.
    pub fn dphi_inverse(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.0.family {
            Family::Power { p } => t.powf(1.0 / (p - 1.0)),
            Family::ShiftedPower { p, .. } if *p == 2.0 => t,
            _ => numeric_inverse(self, t),
        }
    }

    /// The complementary function `Φ*`, using closed forms where available.
    pub fn conjugate(&self) -> NFunction {
        match &self.0.family {
            Family::Power { p } => NFunction::from_family(Family::Power { p: p / (p - 1.0) }),
            Family::Conjugate { base } => base.clone(),
            _ => self.conjugate_by_quadrature(),
        }
    }

    /// The complementary function built purely numerically: `(Φ*)'` is the
    /// bisection/Newton inverse of `Φ'` and `Φ*` its quadrature.
    pub fn conjugate_by_quadrature(&self) -> NFunction {
        NFunction::from_family(Family::Conjugate { base: self.clone() })
    }

    /// Shifted function `Φ_a` with `Φ_a'(t) = Φ'(a + t) t / (a + t)`.
    pub fn shift(&self, a: f64) -> Result<NFunction> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("shift needs a >= 0, got {a}")));
        }
        if a == 0.0 {
            return Ok(self.clone());
        }
        Ok(match &self.0.family {
            Family::Power { p } => NFunction::shifted_power(*p, a)?,
            Family::ShiftedPower { p, kappa } => NFunction::shifted_power(*p, kappa + a)?,
            _ => NFunction::from_family(Family::Shifted { base: self.clone(), a }),
        })
    }

    /// The function `Ψ` with `Ψ'(t) = sqrt(t Φ'(t))`.
    pub fn psi(&self) -> NFunction {
        match &self.0.family {
            Family::Power { p } => NFunction::from_family(Family::Power { p: p / 2.0 + 1.0 }),
            Family::ShiftedPower { p, kappa } => NFunction::from_family(Family::ShiftedPower {
                p: p / 2.0 + 1.0,
                kappa: *kappa,
            }),
            _ => NFunction::from_family(Family::Psi { base: self.clone() }),
        }
    }

    /// Sampled bounds `(lower, upper)` of `Φ'(t) / (t Φ''(t))` on the log grid
    /// `[1e-8, 1e8]`; cached after the first call.
    pub fn characteristics(&self) -> (f64, f64) {
        *self.0.characteristics.get_or_init(|| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for t in log_grid(1e-8, 1e8, 200) {
                let r = self.dphi(t) / (t * self.ddphi(t));
                if r.is_finite() {
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            (lo, hi)
        })
    }

    /// `A(ζ) = Φ'(|ζ|) ζ / |ζ|`.
    pub fn vector_a<const D: usize>(&self, z: &[f64; D]) -> [f64; D] {
        let t = norm(z);
        if t == 0.0 {
            return [0.0; D];
        }
        let s = self.dphi_over_t(t);
        z.map(|zi| s * zi)
    }

    /// `V(ζ) = Ψ'(|ζ|) ζ / |ζ|` with `Ψ'(t) = sqrt(t Φ'(t))`.
    pub fn vector_v<const D: usize>(&self, z: &[f64; D]) -> [f64; D] {
        let t = norm(z);
        if t == 0.0 {
            return [0.0; D];
        }
        let s = self.dphi_over_t(t).sqrt();
        z.map(|zi| s * zi)
    }

    /// Jacobian of `A` at `ζ`, regularized to `eps_reg · I` at `ζ = 0` when
    /// the limit of `Φ'(t)/t` is `0` or `∞`.
    pub fn linearized_a<const D: usize>(&self, z: &[f64; D], eps_reg: f64) -> [[f64; D]; D] {
        let t = norm(z);
        if t == 0.0 {
            let l = self.dphi_over_t(0.0);
            let l = if l.is_finite() && l > 0.0 { l } else { eps_reg };
            return scaled_identity(l);
        }
        radial_tangential(z, t, self.ddphi(t), self.dphi_over_t(t))
    }

    /// Jacobian of `V` at `ζ` (used for `∇V(∇v) = DV(∇v) D²v`).
    pub fn linearized_v<const D: usize>(&self, z: &[f64; D]) -> [[f64; D]; D] {
        let t = norm(z);
        if t == 0.0 {
            let l = self.dphi_over_t(0.0).sqrt();
            return scaled_identity(l);
        }
        let psi1 = (t * self.dphi(t)).sqrt();
        let psi2 = (self.dphi(t) + t * self.ddphi(t)) / (2.0 * psi1);
        radial_tangential(z, t, psi2, psi1 / t)
    }

    /// Sampled `Δ₂` constant, `sup Φ(2t)/Φ(t)` over `[1e-8, 1e8]`.
    pub fn estimate_delta2(&self) -> Delta2Estimate {
        let base = ratio_sup(self, 2.0, &log_grid(1e-8, 1e8, 200));
        let wide = ratio_sup(self, 2.0, &log_grid(1e-12, 1e12, 300));
        let divergent = !base.is_finite() || !wide.is_finite() || wide > 1.01 * base;
        Delta2Estimate {
            value: base,
            extended_value: wide,
            divergent,
        }
    }

    /// Lower and upper growth indices from `h(λ) = sup_t Φ(λt)/Φ(t)`.
    pub fn estimate_indices(&self) -> IndexEstimate {
        let grid = log_grid(1e-8, 1e8, 200);
        let lower_l = [1e-3, 1e-4, 1e-5];
        let upper_l = [1e3, 1e4, 1e5];
        let fit = |ls: &[f64]| {
            let pts: Vec<(f64, f64)> = ls
                .iter()
                .map(|&l| (l.ln(), ratio_sup(self, l, &grid).ln()))
                .collect();
            regression_slope(&pts)
        };
        let i_lower = fit(&lower_l);
        let i_upper = fit(&upper_l);
        IndexEstimate {
            i_lower,
            i_upper,
            divergent: !i_lower.is_finite() || !i_upper.is_finite(),
            lambda_lower: lower_l.to_vec(),
            lambda_upper: upper_l.to_vec(),
            t_range: (1e-8, 1e8),
            t_points: 200,
        }
    }
}

/// `Φ_{p,κ}(t)` without quadrature: a binomial series for `t ≤ κ/2`, the
/// antiderivative in `u = κ + t` otherwise.
fn shifted_power_phi(p: f64, kappa: f64, t: f64) -> f64 {
    if p == 2.0 {
        return 0.5 * t * t;
    }
    if kappa == 0.0 {
        return t.powf(p) / p;
    }
    let x = t / kappa;
    if x <= 0.5 {
        let mut coef = 1.0;
        let mut xp = x * x;
        let mut sum = xp / 2.0;
        for k in 1..400 {
            coef *= (p - 2.0 - (k as f64 - 1.0)) / k as f64;
            xp *= x;
            let term = coef * xp / (k as f64 + 2.0);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        kappa.powf(p) * sum
    } else {
        let u = kappa + t;
        (u.powf(p) - kappa.powf(p)) / p - kappa * (u.powf(p - 1.0) - kappa.powf(p - 1.0)) / (p - 1.0)
    }
}

/// Solves `Φ'(s) = t` by bracketing and safeguarded Newton steps.
fn numeric_inverse(f: &NFunction, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if !t.is_finite() {
        return f64::INFINITY;
    }
    let mut lo;
    let mut hi;
    let s0 = 1.0;
    if f.dphi(s0) <= t {
        lo = s0;
        hi = 16.0 * s0;
        while f.dphi(hi) <= t {
            lo = hi;
            hi *= 16.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
    } else {
        hi = s0;
        lo = s0 / 16.0;
        while f.dphi(lo) > t {
            hi = lo;
            lo /= 16.0;
            if lo == 0.0 {
                return 0.0;
            }
        }
    }
    // invariant: dphi(lo) <= t < dphi(hi)
    let mut s = (lo * hi).sqrt();
    for _ in 0..200 {
        let g = f.dphi(s) - t;
        if g <= 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if g == 0.0 || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        let d = f.ddphi(s);
        let newton = s - g / d;
        s = if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if s == lo || s == hi {
            break;
        }
    }
    s
}

fn ratio_sup(f: &NFunction, lambda: f64, grid: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for &t in grid {
        let r = f.phi(lambda * t) / f.phi(t);
        if !r.is_finite() {
            return f64::INFINITY;
        }
        sup = sup.max(r);
    }
    sup
}

fn regression_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` logarithmically spaced points on `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub(crate) fn norm<const D: usize>(z: &[f64; D]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scaled_identity<const D: usize>(l: f64) -> [[f64; D]; D] {
    let mut m = [[0.0; D]; D];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = l;
    }
    m
}

/// `radial · P + tangential · (I − P)` with `P = ζζᵀ/|ζ|²`.
fn radial_tangential<const D: usize>(
    z: &[f64; D],
    t: f64,
    radial: f64,
    tangential: f64,
) -> [[f64; D]; D] {
    let mut m = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            let pij = z[i] * z[j] / (t * t);
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = radial * pij + tangential * (id - pij);
        }
    }
    m
}

/// The family `a ↦ Φ_a` of shifted N-functions.
#[derive(Clone, Debug)]
pub struct ShiftFamily {
    pub base: NFunction,
}

impl ShiftFamily {
    pub fn new(base: NFunction) -> Self {
        Self { base }
    }

    pub fn at(&self, a: f64) -> Result<NFunction> {
        self.base.shift(a)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Delta2Estimate {
    /// `sup Φ(2t)/Φ(t)` on the standard grid.
    pub value: f64,
    /// The same supremum on a grid extended by four decades each way.
    pub extended_value: f64,
    pub divergent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexEstimate {
    pub i_lower: f64,
    pub i_upper: f64,
    pub divergent: bool,
    pub lambda_lower: Vec<f64>,
    pub lambda_upper: Vec<f64>,
    pub t_range: (f64, f64),
    pub t_points: usize,
}

/// Serializable description of an N-function, as used in problem files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NFunctionSpec {
    Power { p: f64 },
    ShiftedPower { p: f64, kappa: f64 },
}

impl NFunctionSpec {
    pub fn build(&self) -> Result<NFunction> {
        match *self {
            NFunctionSpec::Power { p } => NFunction::power(p),
            NFunctionSpec::ShiftedPower { p, kappa } => NFunction::shifted_power(p, kappa),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn power_values() {
        let f = NFunction::power(2.0).unwrap();
        assert_eq!(f.phi(2.0), 2.0);
        assert_eq!(f.phi(0.0), 0.0);
        let g = NFunction::power(3.0).unwrap();
        assert!(rel(g.phi(1.0), 1.0 / 3.0) < 1e-15);
        assert!(NFunction::power(1.0).is_err());
        assert!(NFunction::shifted_power(2.0, -1.0).is_err());
    }

    #[test]
    fn shifted_power_derivatives() {
        let f = NFunction::shifted_power(3.0, 1.0).unwrap();
        assert_eq!(f.dphi(2.0), 6.0);
        let g = NFunction::shifted_power(2.0, 5.0).unwrap();
        for t in [0.1, 1.0, 7.0] {
            assert!(rel(g.dphi(t), t) < 1e-15);
        }
        // reduction to the power case
        let h = NFunction::shifted_power(2.5, 0.0).unwrap();
        assert_eq!(h.family(), FamilyTag::Power(2.5));
    }

    #[test]
    fn shifted_power_phi_matches_quadrature() {
        for &(p, k) in &[(1.5, 1.0), (3.0, 0.1), (4.0, 1.0), (2.5, 100.0), (1.2, 0.01)] {
            let f = NFunction::shifted_power(p, k).unwrap();
            for t in log_grid(1e-6, 1e4, 37) {
                let oracle = quad::integrate(|s| (k + s).powf(p - 2.0) * s, 0.0, t, 1e-13, 0.0);
                assert!(rel(f.phi(t), oracle) < 1e-11, "p={p} k={k} t={t}");
            }
        }
    }

    #[test]
    fn second_derivative_matches_difference_quotient() {
        let fs = [
            NFunction::power(1.5).unwrap(),
            NFunction::shifted_power(3.0, 0.5).unwrap(),
            NFunction::shifted_power(1.5, 1.0).unwrap().shift(2.0).unwrap(),
            NFunction::shifted_power(1.7, 1.0).unwrap().conjugate(),
        ];
        for f in &fs {
            for t in [0.3, 1.0, 4.0] {
                let h = 1e-6 * t;
                let fd = (f.dphi(t + h) - f.dphi(t - h)) / (2.0 * h);
                assert!(rel(f.ddphi(t), fd) < 1e-6, "{f:?} t={t}");
            }
        }
    }

    #[test]
    fn conjugate_of_power_closed_form() {
        let f = NFunction::power(3.0).unwrap();
        let c = f.conjugate_by_quadrature();
        for t in [1e-3f64, 0.5, 2.0, 100.0] {
            let exact = t.powf(1.5) / 1.5;
            assert!(rel(c.phi(t), exact) < 1e-9, "t={t}");
        }
        let two = NFunction::power(2.0).unwrap().conjugate();
        assert_eq!(two.family(), FamilyTag::Power(2.0));
    }

    #[test]
    fn double_conjugation_returns_original() {
        let f = NFunction::shifted_power(3.0, 1.0).unwrap();
        let cc = f.conjugate_by_quadrature().conjugate_by_quadrature();
        for t in [0.1, 1.0, 10.0] {
            assert!(rel(cc.phi(t), f.phi(t)) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn shift_by_zero_is_identity_and_power_shift_is_shifted_power() {
        let f = NFunction::power(2.5).unwrap();
        let s0 = f.shift(0.0).unwrap();
        for t in [0.1, 1.0, 3.0] {
            assert_eq!(s0.phi(t), f.phi(t));
        }
        let s = f.shift(0.7).unwrap();
        assert_eq!(s.family(), FamilyTag::ShiftedPower(2.5, 0.7));
        assert!(f.shift(-1.0).is_err());
        // generic shift path against the formula
        let g = NFunction::shifted_power(1.5, 1.0).unwrap().conjugate();
        let ga = g.shift(2.0).unwrap();
        let t = 1.3;
        assert!(rel(ga.dphi(t), g.dphi(2.0 + t) * t / (2.0 + t)) < 1e-14);
    }

    #[test]
    fn delta2_of_power() {
        for p in [1.5, 2.0, 3.0] {
            let d = NFunction::power(p).unwrap().estimate_delta2();
            assert!(rel(d.value, 2f64.powf(p)) < 1e-12);
            assert!(!d.divergent);
        }
        for k in [0.0, 1.0, 100.0] {
            let d = NFunction::shifted_power(3.0, k).unwrap().estimate_delta2();
            assert!(d.value <= 8.0 + 1e-9 && !d.divergent);
        }
    }

    #[test]
    fn exponential_is_flagged_non_delta2() {
        let f = NFunction::custom("exp", |t: f64| t.exp() - t - 1.0, |t: f64| t.exp() - 1.0, |t: f64| t.exp());
        assert!(f.estimate_delta2().divergent);
        assert!(f.estimate_indices().divergent);
    }

    #[test]
    fn indices_of_built_in_families() {
        let e = NFunction::power(2.7).unwrap().estimate_indices();
        assert!((e.i_lower - 2.7).abs() < 0.05 && (e.i_upper - 2.7).abs() < 0.05);
        let e = NFunction::shifted_power(4.0, 1.0).unwrap().estimate_indices();
        assert!((e.i_lower - 2.0).abs() < 0.05, "{e:?}");
        assert!((e.i_upper - 4.0).abs() < 0.05, "{e:?}");
        let e = NFunction::shifted_power(2.0, 1.0).unwrap().estimate_indices();
        assert!((e.i_lower - 2.0).abs() < 0.05 && (e.i_upper - 2.0).abs() < 0.05);
    }

    #[test]
    fn characteristics_of_shifted_power() {
        // Φ'/(tΦ'') = (κ+t)/(κ+(p−1)t) lies between min and max of {1, 1/(p−1)}
        let (lo, hi) = NFunction::shifted_power(3.0, 1.0).unwrap().characteristics();
        assert!(lo >= 0.5 - 1e-12 && hi <= 1.0 + 1e-12);
        assert!(lo < 0.51 && hi > 0.99);
    }

    #[test]
    fn vector_fields() {
        let f = NFunction::shifted_power(3.0, 1.0).unwrap();
        assert_eq!(f.vector_a(&[0.0, 0.0]), [0.0, 0.0]);
        let z = [0.6, -0.8];
        let a = f.vector_a(&z);
        assert!(rel(a[0], 2.0 * 0.6) < 1e-15 && rel(a[1], -2.0 * 0.8) < 1e-15);
        let v = f.vector_v(&z);
        assert!(rel(v[0], 2f64.sqrt() * 0.6) < 1e-15);
        let lin = NFunction::power(2.0).unwrap();
        assert_eq!(lin.vector_a(&z), z);
        assert_eq!(lin.linearized_a(&z, 1e-10), [[1.0, 0.0], [0.0, 1.0]]);
        let m = f.linearized_a(&[1.0, 0.0], 1e-10);
        // Φ''(1) = (1+1)^0 (1 + 2·1) = 3, Φ'(1)/1 = 2
        assert!(rel(m[0][0], 3.0) < 1e-15 && rel(m[1][1], 2.0) < 1e-15);
        assert_eq!(m[0][1], 0.0);
    }

    #[test]
    fn linearization_at_zero_is_regularized() {
        let f = NFunction::power(3.0).unwrap();
        assert_eq!(f.linearized_a(&[0.0, 0.0], 1e-10), [[1e-10, 0.0], [0.0, 1e-10]]);
        let g = NFunction::power(1.5).unwrap();
        assert_eq!(g.linearized_a(&[0.0, 0.0], 1e-7)[0][0], 1e-7);
        let h = NFunction::shifted_power(3.0, 0.5).unwrap();
        assert_eq!(h.linearized_a(&[0.0, 0.0], 1e-10)[0][0], 0.5);
    }

    #[test]
    fn psi_of_power_is_power() {
        let f = NFunction::power(3.0).unwrap();
        let psi = f.psi();
        assert_eq!(psi.family(), FamilyTag::Power(2.5));
        for t in [0.2, 1.0, 5.0] {
            assert!(rel(psi.dphi(t), (t * f.dphi(t)).sqrt()) < 1e-14);
        }
        let g = NFunction::shifted_power(1.5, 1.0).unwrap().conjugate();
        let pg = g.psi();
        for t in [0.2, 1.0, 5.0] {
            assert!(rel(pg.dphi(t), (t * g.dphi(t)).sqrt()) < 1e-14);
        }
    }

    #[test]
    fn spec_round_trip() {
        let s = NFunctionSpec::ShiftedPower { p: 3.0, kappa: 0.1 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<NFunctionSpec>(&j).unwrap(), s);
        assert_eq!(s.build().unwrap().family(), FamilyTag::ShiftedPower(3.0, 0.1));
    }
}
