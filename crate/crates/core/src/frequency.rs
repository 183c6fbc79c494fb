//! Boundary-control transfer function: closed form, an independent
//! finite-difference boundary-value solve, the damped loop and right-half-plane
//! boundedness scans.
//!
//! With `G` mapping the voltage `V` to the observation `B* z = -(1/h) pdot(L)`,
//!
//! ```text
//! G(s) = c2 tanh(zeta2 s L) + c1 tanh(zeta1 s L),
//! c2 =  b2 (b1 gamma - alpha/beta) / (zeta2 alpha1 h^2 (b1 - b2)),
//! c1 = -b1 (b2 gamma - alpha/beta) / (zeta1 alpha1 h^2 (b1 - b2)).
//! ```

use num_complex::Complex64;

use crate::beam::{BeamParameters, DerivedConstants};
use crate::error::{Error, Result};
use crate::linalg::{solve_block_tridiagonal, Block2};
use crate::parallel::par_map;

type C = Complex64;

/// Smallest grid accepted by the boundary-value solvers.
pub const MIN_BVP_CELLS: usize = 64;

/// A sample `(s, G(s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    pub s: C,
    pub g: C,
}

/// The two residues `(c1, c2)` multiplying `tanh(zeta1 s L)` and `tanh(zeta2 s L)`.
pub fn transfer_coefficients(dc: &DerivedConstants, params: &BeamParameters) -> (f64, f64) {
    let h2 = params.thickness * params.thickness;
    let ab = dc.alpha / params.beta;
    let den = params.alpha1 * h2 * (dc.b1 - dc.b2);
    let c2 = dc.b2 * (dc.b1 * params.gamma - ab) / (dc.zeta2 * den);
    let c1 = -dc.b1 * (dc.b2 * params.gamma - ab) / (dc.zeta1 * den);
    (c1, c2)
}

/// `G(+inf) = c1 + c2`.
pub fn transfer_limit(dc: &DerivedConstants, params: &BeamParameters) -> f64 {
    let (c1, c2) = transfer_coefficients(dc, params);
    c1 + c2
}

/// `tanh w` via `(1 - e^{-2w}) / (1 + e^{-2w})` on the right half plane.
fn tanh_scaled(w: C) -> C {
    if w.re < 0.0 {
        return -tanh_scaled(-w);
    }
    let e = (-2.0 * w).exp();
    (1.0 - e) / (1.0 + e)
}

/// `|cosh w|`, saturating for large `|Re w|`.
fn cosh_abs(w: C) -> f64 {
    if w.re.abs() > 30.0 {
        f64::INFINITY
    } else {
        w.cosh().norm()
    }
}

pub fn transfer_closed(s: C, dc: &DerivedConstants, params: &BeamParameters) -> Result<C> {
    let l = params.length;
    let w1 = s * (dc.zeta1 * l);
    let w2 = s * (dc.zeta2 * l);
    if cosh_abs(w1) < 1e-12 || cosh_abs(w2) < 1e-12 {
        return Err(Error::PoleProximity { s });
    }
    let (c1, c2) = transfer_coefficients(dc, params);
    Ok(tanh_scaled(w2) * c2 + tanh_scaled(w1) * c1)
}

/// Loop transfer `u -> y` of the damped system `V = -(1/2) B* z + u`,
/// `y = -B* z + u`: `G_d = (1 - G/2) / (1 + G/2)`.
pub fn transfer_damped(s: C, dc: &DerivedConstants, params: &BeamParameters) -> Result<C> {
    let g = transfer_closed(s, dc, params)?;
    Ok((1.0 - 0.5 * g) / (1.0 + 0.5 * g))
}

/// Assembles and solves the discrete boundary-value problem
/// `S U'' = s^2 D U`, `U(0) = 0`, with `S = [[alpha, -gamma beta], [-gamma beta, beta]]`,
/// `D = diag(rho, mu)` and the charge flux at `x = L` driven by the voltage.
/// `boundary` returns the extra diagonal term and right-hand side of the
/// charge equation at the last node.
fn solve_bvp(s: C, params: &BeamParameters, cells: usize, boundary: (C, C)) -> Result<[C; 2]> {
    params.validate()?;
    if cells < MIN_BVP_CELLS {
        return Err(Error::InvalidInput(format!(
            "boundary-value solve needs at least {MIN_BVP_CELLS} cells, got {cells}"
        )));
    }
    let dx = params.length / cells as f64;
    let gb = params.gamma * params.beta;
    let inv = 1.0 / (dx * dx);
    let st = Block2::from_real([[params.alpha() * inv, -gb * inv], [-gb * inv, params.beta * inv]]);
    let s2 = s * s;
    let mut diag = Block2::zero();
    for r in 0..2 {
        for c in 0..2 {
            diag.0[r][c] = -2.0 * st.0[r][c];
        }
    }
    diag.0[0][0] -= s2 * params.rho;
    diag.0[1][1] -= s2 * params.mu;
    let mut twice = st;
    for r in 0..2 {
        for c in 0..2 {
            twice.0[r][c] *= 2.0;
        }
    }
    let mut lower = vec![st; cells];
    let upper = vec![st; cells];
    let mut diags = vec![diag; cells];
    let mut rhs = vec![[C::new(0.0, 0.0); 2]; cells];
    lower[cells - 1] = twice;
    diags[cells - 1].0[1][1] += boundary.0;
    rhs[cells - 1][1] = boundary.1;
    let x = solve_block_tridiagonal(&lower, &diags, &upper, &rhs).ok_or(Error::SingularSystem)?;
    Ok(x[cells - 1])
}

/// `G(s) = -s Z(L) / h` from a second-order finite-difference solve with unit voltage.
pub fn transfer_bvp(s: C, params: &BeamParameters, cells: usize) -> Result<C> {
    let dx = params.length / cells.max(1) as f64;
    let h = params.thickness;
    // last row: ... + (2/dx)(-V/h) = s^2 mu Z_N, moved to the right-hand side
    let [_, z] = solve_bvp(s, params, cells, (C::new(0.0, 0.0), C::new(2.0 / (dx * h), 0.0)))?;
    let g = -s * z / h;
    if g.re.is_finite() && g.im.is_finite() {
        Ok(g)
    } else {
        Err(Error::SingularSystem)
    }
}

/// `G_d(s) = y/u` from a boundary-value solve with the feedback
/// `V = s Z(L)/(2h) + u` built into the last row; `y = s Z(L)/h + u`.
pub fn transfer_damped_bvp(s: C, params: &BeamParameters, cells: usize) -> Result<C> {
    let dx = params.length / cells.max(1) as f64;
    let h = params.thickness;
    // -(2/dx)(s Z_N/(2h) + 1)/h on the left becomes a diagonal term plus a source
    let diag = -s / (dx * h * h);
    let [_, z] = solve_bvp(s, params, cells, (diag, C::new(2.0 / (dx * h), 0.0)))?;
    let y = s * z / h + 1.0;
    if y.re.is_finite() && y.im.is_finite() {
        Ok(y)
    } else {
        Err(Error::SingularSystem)
    }
}

/// Result of a scan along `Re s = s1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessScan {
    pub sup: f64,
    pub argmax: C,
    /// `|c2| 2/(1 - e^{-2 s1 zeta2 L}) + |c1| 2/(1 - e^{-2 s1 zeta1 L})`.
    pub bound: f64,
}

/// Analytic bound on `|G|` over `Re s >= s1`.
pub fn analytic_bound(s1: f64, dc: &DerivedConstants, params: &BeamParameters) -> f64 {
    let (c1, c2) = transfer_coefficients(dc, params);
    let l = params.length;
    let t = |z: f64| 2.0 / -(-2.0 * s1 * z * l).exp_m1();
    c2.abs() * t(dc.zeta2) + c1.abs() * t(dc.zeta1)
}

/// Samples `|G|` at `n` evenly spaced points of `Re s = s1`, `|Im s| <= im_max`.
pub fn boundedness_scan(
    s1: f64,
    im_max: f64,
    n: usize,
    dc: &DerivedConstants,
    params: &BeamParameters,
) -> Result<BoundednessScan> {
    if !(s1 > 0.0) {
        return Err(Error::InvalidInput(format!("scan abscissa must be > 0, got {s1}")));
    }
    if !(im_max >= 0.0) || n == 0 {
        return Err(Error::InvalidInput("scan needs im_max >= 0 and n >= 1".into()));
    }
    let points: Vec<C> = (0..n)
        .map(|k| {
            let im = if n == 1 {
                0.0
            } else {
                -im_max + 2.0 * im_max * k as f64 / (n - 1) as f64
            };
            C::new(s1, im)
        })
        .collect();
    let values = par_map(&points, |_, &s| transfer_closed(s, dc, params).map(|g| g.norm()));
    let mut sup = f64::NEG_INFINITY;
    let mut argmax = points[0];
    for (s, v) in points.iter().zip(values) {
        let v = v?;
        if v > sup {
            sup = v;
            argmax = *s;
        }
    }
    Ok(BoundednessScan {
        sup,
        argmax,
        bound: analytic_bound(s1, dc, params),
    })
}

/// `G` at each point, in order.
pub fn frequency_response(points: &[C], dc: &DerivedConstants, params: &BeamParameters) -> Result<Vec<FrequencyPoint>> {
    par_map(points, |_, &s| transfer_closed(s, dc, params).map(|g| FrequencyPoint { s, g }))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::derive_constants;

    fn golden() -> (BeamParameters, DerivedConstants) {
        let p = BeamParameters::unit();
        (p, derive_constants(&p).unwrap())
    }

    #[test]
    fn golden_coefficients_and_limits() {
        let (p, dc) = golden();
        let (c1, c2) = transfer_coefficients(&dc, &p);
        assert!((c2 - 0.170_820_393_249_936_9).abs() < 1e-12, "{c2}");
        assert!((c1 - 1.170_820_393_249_937).abs() < 1e-12, "{c1}");
        assert_eq!(transfer_closed(C::new(0.0, 0.0), &dc, &p).unwrap(), C::new(0.0, 0.0));
        let g_inf = transfer_closed(C::new(200.0, 0.0), &dc, &p).unwrap();
        assert!((g_inf.re - 3.0 / 5f64.sqrt()).abs() < 1e-12);
        let g1 = transfer_closed(C::new(1.0, 0.0), &dc, &p).unwrap();
        assert!((g1.re - 1.1762).abs() < 1e-4, "{g1}");
    }

    #[test]
    fn conjugate_symmetry() {
        let (p, dc) = golden();
        for s in [C::new(0.3, 2.0), C::new(2.0, -7.5), C::new(1e-3, 40.0)] {
            let a = transfer_closed(s.conj(), &dc, &p).unwrap();
            let b = transfer_closed(s, &dc, &p).unwrap().conj();
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn pole_is_flagged() {
        let (p, dc) = golden();
        let s = C::new(0.0, std::f64::consts::PI / (2.0 * dc.zeta1));
        assert!(matches!(transfer_closed(s, &dc, &p), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn bvp_agrees_and_converges() {
        let (p, dc) = golden();
        let s = C::new(0.5, 0.0);
        let exact = transfer_closed(s, &dc, &p).unwrap();
        let e1 = (transfer_bvp(s, &p, 256).unwrap() - exact).norm();
        let e2 = (transfer_bvp(s, &p, 512).unwrap() - exact).norm();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
        let s = C::new(1.3, -2.1);
        let g = transfer_bvp(s, &p, 2048).unwrap();
        let exact = transfer_closed(s, &dc, &p).unwrap();
        assert!((g - exact).norm() / exact.norm() < 1e-5);
        assert!(transfer_bvp(s, &p, 16).is_err());
    }

    #[test]
    fn damped_loop() {
        let (p, dc) = golden();
        let gd = transfer_damped(C::new(0.0, 0.0), &dc, &p).unwrap();
        assert_eq!(gd, C::new(1.0, 0.0));
        let r = 3.0 / 5f64.sqrt();
        let gd = transfer_damped(C::new(300.0, 0.0), &dc, &p).unwrap();
        assert!((gd.re - (2.0 - r) / (2.0 + r)).abs() < 1e-12);
        let s = C::new(0.7, 3.3);
        let a = transfer_damped(s, &dc, &p).unwrap();
        let b = transfer_damped_bvp(s, &p, 2048).unwrap();
        assert!((a - b).norm() < 1e-5, "{a} {b}");
        assert!(a.norm() <= 1.0);
    }

    #[test]
    fn scan_respects_bound() {
        let (p, dc) = golden();
        let scan = boundedness_scan(1.0, 200.0, 4001, &dc, &p).unwrap();
        assert!(scan.sup.is_finite() && scan.sup <= scan.bound);
        let far = boundedness_scan(5.0, 200.0, 4001, &dc, &p).unwrap();
        assert!((far.sup - 3.0 / 5f64.sqrt()).abs() < 0.01 * 3.0 / 5f64.sqrt());
        let near = boundedness_scan(0.01, 200.0, 4001, &dc, &p).unwrap();
        assert!(near.sup > scan.sup && near.sup <= near.bound);
        assert!(boundedness_scan(0.0, 1.0, 3, &dc, &p).is_err());
    }
}
