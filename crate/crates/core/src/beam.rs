//! Physical parameters, derived spectral constants and the stabilizability
//! classifier.
//!
//! Everything spectral in this crate hangs off [`DerivedConstants`]: the two
//! reciprocal wave speeds `zeta1 >= zeta2` of the coupled stretching system and
//! the mixing coefficients `b1 > 0 > b2` that tie charge to displacement in each
//! eigenfamily.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{self, Fraction};

/// Default denominator budget for rational detection.
pub const DEFAULT_QMAX: u64 = 10_000;
/// Default tolerance for rational detection.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Material and geometric constants of a single piezoelectric beam.
///
/// `thickness << length` is assumed by the thin-beam model but not enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters {
    /// Mass density per unit volume.
    pub rho: f64,
    /// Elastic stiffness.
    pub alpha1: f64,
    /// Impermittivity.
    pub beta: f64,
    /// Piezoelectric coefficient.
    pub gamma: f64,
    /// Magnetic permeability.
    pub mu: f64,
    pub length: f64,
    pub thickness: f64,
}

impl BeamParameters {
    pub fn new(
        rho: f64,
        alpha1: f64,
        beta: f64,
        gamma: f64,
        mu: f64,
        length: f64,
        thickness: f64,
    ) -> Result<Self> {
        let p = Self {
            rho,
            alpha1,
            beta,
            gamma,
            mu,
            length,
            thickness,
        };
        p.validate()?;
        Ok(p)
    }

    /// All seven constants set to one. The wave-speed ratio is then the golden
    /// section `(3 - sqrt 5) / 2`.
    pub fn unit() -> Self {
        Self {
            rho: 1.0,
            alpha1: 1.0,
            beta: 1.0,
            gamma: 1.0,
            mu: 1.0,
            length: 1.0,
            thickness: 1.0,
        }
    }

    /// Unit constants except `gamma`, chosen so that `zeta2/zeta1 = ratio`.
    ///
    /// With `rho = alpha1 = beta = mu = 1` the characteristic roots satisfy
    /// `zeta1^2 zeta2^2 = 1` and `zeta1^2 + zeta2^2 = gamma^2 + 2`, so
    /// `gamma^2 = r + 1/r - 2` with `r = ratio`.
    pub fn unit_with_ratio(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "wave-speed ratio must lie in (0, 1), got {ratio}"
            )));
        }
        let g2 = ratio + 1.0 / ratio - 2.0;
        let mut p = Self::unit();
        p.gamma = g2.sqrt();
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }

    /// `(key, value)` pairs in canonical order.
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("rho", self.rho),
            ("alpha1", self.alpha1),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("length", self.length),
            ("thickness", self.thickness),
        ]
    }

    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut p = *self;
        match name {
            "rho" => p.rho = value,
            "alpha1" => p.alpha1 = value,
            "beta" => p.beta = value,
            "gamma" => p.gamma = value,
            "mu" => p.mu = value,
            "length" => p.length = value,
            "thickness" => p.thickness = value,
            other => return Err(Error::InvalidInput(format!("unknown parameter `{other}`"))),
        }
        Ok(p)
    }

    /// `alpha = alpha1 + gamma^2 beta`.
    pub fn alpha(&self) -> f64 {
        self.alpha1 + self.gamma * self.gamma * self.beta
    }
}

/// Constants derived from [`BeamParameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl DerivedConstants {
    /// `zeta2 / zeta1`, always in `(0, 1)` for a coupled beam.
    pub fn ratio(&self) -> f64 {
        self.zeta2 / self.zeta1
    }

    pub fn zeta(&self, family: u8) -> f64 {
        if family == 1 {
            self.zeta1
        } else {
            self.zeta2
        }
    }

    pub fn b(&self, family: u8) -> f64 {
        if family == 1 {
            self.b1
        } else {
            self.b2
        }
    }
}

pub fn derive_constants(params: &BeamParameters) -> Result<DerivedConstants> {
    params.validate()?;
    let BeamParameters {
        rho,
        alpha1,
        beta,
        gamma,
        mu,
        ..
    } = *params;
    if gamma == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let alpha = params.alpha();

    // zeta^2 are the roots of z^2 - s z + prod = 0
    let s = gamma * gamma * mu / alpha1 + mu / beta + rho / alpha1;
    let prod = rho * mu / (beta * alpha1);
    // s^2 - 4 prod rewritten as a sum of squares so it never cancels
    let d = gamma * gamma * mu / alpha1 + mu / beta - rho / alpha1;
    let disc = (d * d + 4.0 * rho * gamma * gamma * mu / (alpha1 * alpha1)).sqrt();
    let z1sq = 0.5 * (s + disc);
    let z2sq = prod / z1sq;

    // b1, b2 are the roots of b^2 - c b - rho/mu = 0; take the large one directly
    let c = gamma + alpha1 / (gamma * beta) - rho / (gamma * mu);
    let r = (c * c + 4.0 * rho / mu).sqrt();
    let (b1, b2) = if c >= 0.0 {
        let b1 = 0.5 * (c + r);
        (b1, -(rho / mu) / b1)
    } else {
        let b2 = 0.5 * (c - r);
        (-(rho / mu) / b2, b2)
    };

    Ok(DerivedConstants {
        alpha,
        zeta1: z1sq.sqrt(),
        zeta2: z2sq.sqrt(),
        b1,
        b2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityClass {
    /// `zeta2/zeta1 = p/q` with `p`, `q` both odd: imaginary closed-loop eigenvalues exist.
    NotStronglyStable,
    /// No low-denominator rational ratio: energy tends to zero without a uniform rate.
    StronglyStableNotExp,
    /// `zeta2/zeta1 = p/q` with exactly one of `p`, `q` even.
    ExponentiallyStable,
}

impl StabilityClass {
    pub fn label(&self) -> &'static str {
        match self {
            StabilityClass::NotStronglyStable => "NOT_STRONGLY_STABLE",
            StabilityClass::StronglyStableNotExp => "STRONGLY_STABLE_NOT_EXP",
            StabilityClass::ExponentiallyStable => "EXPONENTIALLY_STABLE",
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub ratio: f64,
    pub class: StabilityClass,
    /// Smallest-denominator fraction within `tol` if one exists, otherwise the
    /// best approximation found with `q <= qmax`.
    pub approximant: Option<Fraction>,
    /// Uniform spectral gap, present only for the exponentially stable class.
    pub gap: Option<f64>,
    /// Observation time `2 pi / gap`.
    pub min_time: Option<f64>,
    pub qmax: u64,
    pub tol: f64,
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.class)?;
        if let Some(a) = self.approximant {
            if self.class != StabilityClass::StronglyStableNotExp {
                write!(f, " p={} q={}", a.p, a.q)?;
            } else {
                write!(f, " ratio={:.10} best={}/{} err={:.3e}", self.ratio, a.p, a.q, a.error)?;
            }
        }
        if let (Some(g), Some(t)) = (self.gap, self.min_time) {
            write!(f, " gap={g:.4} Tmin={t:.3}")?;
        }
        Ok(())
    }
}

/// Uniform gap `(pi/L) min(1/zeta1, 1/zeta2, 1/(2 zeta2 q))` of the exponent
/// family when `zeta2/zeta1 = p/q` has mixed parity.
pub fn mixed_parity_gap(dc: &DerivedConstants, length: f64, q: u64) -> f64 {
    let m = (1.0 / dc.zeta1)
        .min(1.0 / dc.zeta2)
        .min(1.0 / (2.0 * dc.zeta2 * q as f64));
    PI / length * m
}

pub fn classify_stability(
    dc: &DerivedConstants,
    length: f64,
    qmax: u64,
    tol: f64,
) -> Result<StabilityReport> {
    if qmax < 1 {
        return Err(Error::InvalidBudget(format!("qmax must be >= 1, got {qmax}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidBudget(format!("tol must be > 0, got {tol}")));
    }
    if !(length > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "length",
            value: length,
        });
    }
    let ratio = dc.ratio();
    let hit = rational::simplest_within(ratio, qmax, tol);
    let (class, approximant, gap) = match hit {
        Some(f) => {
            let p_odd = f.p % 2 == 1;
            let q_odd = f.q % 2 == 1;
            if p_odd && q_odd {
                (StabilityClass::NotStronglyStable, Some(f), None)
            } else {
                // reduced fractions are never even/even
                let gap = mixed_parity_gap(dc, length, f.q);
                (StabilityClass::ExponentiallyStable, Some(f), Some(gap))
            }
        }
        None => (
            StabilityClass::StronglyStableNotExp,
            rational::best_approximation(ratio, qmax),
            None,
        ),
    };
    Ok(StabilityReport {
        ratio,
        class,
        approximant,
        gap,
        min_time: gap.map(|g| 2.0 * PI / g),
        qmax,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn golden_constants() {
        let dc = derive_constants(&BeamParameters::unit()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // zeta^4 - 3 zeta^2 + 1 = 0
        assert!((dc.zeta1 - ((3.0 + 5f64.sqrt()) / 2.0).sqrt()).abs() < 1e-14);
        assert!((dc.zeta1 - phi).abs() < 1e-14);
        assert!((dc.zeta2 - 1.0 / phi).abs() < 1e-14);
        assert!((dc.b1 - phi).abs() < 1e-14);
        assert!((dc.b2 + 1.0 / phi).abs() < 1e-14);
        assert_eq!(dc.alpha, 2.0);
    }

    #[test]
    fn half_ratio_constants() {
        let p = BeamParameters {
            gamma: 0.5f64.sqrt(),
            ..BeamParameters::unit()
        };
        let dc = derive_constants(&p).unwrap();
        // zeta^4 - 2.5 zeta^2 + 1 = (zeta^2 - 2)(zeta^2 - 1/2)
        assert!((dc.zeta1 - 2f64.sqrt()).abs() < 1e-14);
        assert!((dc.zeta2 - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((dc.b1 - 2f64.sqrt()).abs() < 1e-14);
        assert!((dc.b2 + 0.5f64.sqrt()).abs() < 1e-14);
        assert!((dc.ratio() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn b_agrees_with_characteristic_root_form() {
        let p = BeamParameters::new(2.0, 0.7, 3.0, 0.4, 1.3, 1.0, 0.1).unwrap();
        let dc = derive_constants(&p).unwrap();
        let b1 = (p.alpha1 * dc.zeta1 * dc.zeta1 - p.rho) / (p.gamma * p.mu);
        let b2 = (p.alpha1 * dc.zeta2 * dc.zeta2 - p.rho) / (p.gamma * p.mu);
        assert!(rel(b1, dc.b1) < 1e-12);
        assert!(rel(b2, dc.b2) < 1e-12);
        assert!(rel(dc.b1 * dc.b2, -p.rho / p.mu) < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        let e = BeamParameters::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveParameter { name: "gamma", .. }));
        let e = BeamParameters::new(1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveParameter { name: "alpha1", .. }));
        let raw = BeamParameters {
            mu: f64::NAN,
            ..BeamParameters::unit()
        };
        assert!(derive_constants(&raw).is_err());
    }

    #[test]
    fn classify_examples() {
        let dc = derive_constants(&BeamParameters::unit()).unwrap();
        let r = classify_stability(&dc, 1.0, 50, 1e-9).unwrap();
        assert_eq!(r.class, StabilityClass::StronglyStableNotExp);
        assert!(r.gap.is_none());

        let third = derive_constants(&BeamParameters::unit_with_ratio(1.0 / 3.0).unwrap()).unwrap();
        let r = classify_stability(&third, 1.0, DEFAULT_QMAX, DEFAULT_TOL).unwrap();
        assert_eq!(r.class, StabilityClass::NotStronglyStable);
        let a = r.approximant.unwrap();
        assert_eq!((a.p, a.q), (1, 3));

        let p = BeamParameters {
            gamma: 0.5f64.sqrt(),
            ..BeamParameters::unit()
        };
        let dc = derive_constants(&p).unwrap();
        let r = classify_stability(&dc, 1.0, DEFAULT_QMAX, DEFAULT_TOL).unwrap();
        assert_eq!(r.class, StabilityClass::ExponentiallyStable);
        let a = r.approximant.unwrap();
        assert_eq!((a.p, a.q), (1, 2));
        let gap = r.gap.unwrap();
        assert!((gap - PI / (2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((r.min_time.unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            r.to_string(),
            "EXPONENTIALLY_STABLE p=1 q=2 gap=1.1107 Tmin=5.657"
        );
    }

    #[test]
    fn classify_rejects_bad_budget() {
        let dc = derive_constants(&BeamParameters::unit()).unwrap();
        assert!(matches!(
            classify_stability(&dc, 1.0, 0, 1e-9),
            Err(Error::InvalidBudget(_))
        ));
        assert!(matches!(
            classify_stability(&dc, 1.0, 10, 0.0),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn unit_with_ratio_hits_target() {
        for r in [0.5, 1.0 / 3.0, 0.2, 3.0 / 7.0] {
            let dc = derive_constants(&BeamParameters::unit_with_ratio(r).unwrap()).unwrap();
            assert!((dc.ratio() - r).abs() < 1e-14);
        }
    }
}
