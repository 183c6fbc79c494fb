//! Exact eigenstructure of the undamped generator and everything that can be
//! computed from modal coefficients in closed form.
//!
//! The generator has purely imaginary eigenvalues `±i sigma_j / zeta_k` with
//! `sigma_j = (2j-1) pi / (2L)`, `k = 1, 2`. Every finite-energy state expands as
//!
//! ```text
//! phi = sum_j  c1j Psi_1j + d1j Psi_-1j + c2j Psi_2j + d2j Psi_-2j
//! Psi_{±k j} = (1/lambda_kj, b_k/lambda_kj, ±1, ±b_k) sin(sigma_j x),  lambda_kj = i sigma_j/zeta_k
//! ```
//!
//! and the eigenfunctions are orthogonal in the energy inner product with
//! `||Psi_{±k j}||^2 = L (rho + b_k^2 mu)`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::beam::{BeamParameters, DerivedConstants};
use crate::error::{Error, Result};

type C = Complex64;

const I: C = C::new(0.0, 1.0);
const ZERO: C = C::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Identifies one eigenpair: `family` 1 or 2 selects `zeta1` or `zeta2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub family: u8,
    pub sign: Sign,
    pub j: usize,
}

impl ModeIndex {
    pub fn new(family: u8, sign: Sign, j: usize) -> Self {
        assert!(family == 1 || family == 2, "family must be 1 or 2");
        assert!(j >= 1, "mode index j starts at 1");
        Self { family, sign, j }
    }
}

/// `sigma_j = (2j - 1) pi / (2L)`.
pub fn sigma(j: usize, length: f64) -> f64 {
    (2 * j - 1) as f64 * PI / (2.0 * length)
}

pub fn eigenvalue(mode: ModeIndex, dc: &DerivedConstants, length: f64) -> C {
    I * (mode.sign.factor() * sigma(mode.j, length) / dc.zeta(mode.family))
}

/// All eigenvalues with `j <= modes`, ordered by `j`, then family, then sign.
pub fn eigenvalues(dc: &DerivedConstants, length: f64, modes: usize) -> Result<Vec<(ModeIndex, C)>> {
    if modes < 1 {
        return Err(Error::InvalidTruncation(modes));
    }
    let mut out = Vec::with_capacity(4 * modes);
    for j in 1..=modes {
        for family in [1u8, 2] {
            for sign in [Sign::Plus, Sign::Minus] {
                let m = ModeIndex::new(family, sign, j);
                out.push((m, eigenvalue(m, dc, length)));
            }
        }
    }
    Ok(out)
}

/// Component vector `(v, p, vdot, pdot)` of the eigenfunction at `x`.
pub fn eigenfunction(mode: ModeIndex, dc: &DerivedConstants, length: f64, x: f64) -> [C; 4] {
    let plus = eigenvalue(ModeIndex { sign: Sign::Plus, ..mode }, dc, length);
    let b = dc.b(mode.family);
    let s = mode.sign.factor();
    let w = (sigma(mode.j, length) * x).sin();
    let inv = plus.inv();
    [inv * w, inv * (b * w), C::new(s * w, 0.0), C::new(s * b * w, 0.0)]
}

/// Coefficients `{c1j, d1j, c2j, d2j}`, `j = 1..=J`, stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoefficients {
    pub c1: Vec<C>,
    pub d1: Vec<C>,
    pub c2: Vec<C>,
    pub d2: Vec<C>,
}

impl ModalCoefficients {
    pub fn zeros(modes: usize) -> Self {
        Self {
            c1: vec![ZERO; modes],
            d1: vec![ZERO; modes],
            c2: vec![ZERO; modes],
            d2: vec![ZERO; modes],
        }
    }

    /// Truncation order `J`.
    pub fn order(&self) -> usize {
        self.c1.len()
    }

    fn slot(&self, family: u8, sign: Sign) -> &Vec<C> {
        match (family, sign) {
            (1, Sign::Plus) => &self.c1,
            (1, Sign::Minus) => &self.d1,
            (_, Sign::Plus) => &self.c2,
            (_, Sign::Minus) => &self.d2,
        }
    }

    fn slot_mut(&mut self, family: u8, sign: Sign) -> &mut Vec<C> {
        match (family, sign) {
            (1, Sign::Plus) => &mut self.c1,
            (1, Sign::Minus) => &mut self.d1,
            (_, Sign::Plus) => &mut self.c2,
            (_, Sign::Minus) => &mut self.d2,
        }
    }

    pub fn get(&self, mode: ModeIndex) -> C {
        self.slot(mode.family, mode.sign)
            .get(mode.j - 1)
            .copied()
            .unwrap_or(ZERO)
    }

    pub fn set(&mut self, mode: ModeIndex, value: C) -> Result<()> {
        let available = self.order();
        let slot = self.slot_mut(mode.family, mode.sign);
        match slot.get_mut(mode.j - 1) {
            Some(c) => {
                *c = value;
                Ok(())
            }
            None => Err(Error::TruncationTooSmall {
                needed: mode.j,
                available,
            }),
        }
    }

    /// Nonzero entries as `(mode, coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, C)> + '_ {
        (1..=self.order()).flat_map(move |j| {
            [(1u8, Sign::Plus), (1, Sign::Minus), (2, Sign::Plus), (2, Sign::Minus)]
                .into_iter()
                .map(move |(f, s)| {
                    let m = ModeIndex::new(f, s, j);
                    (m, self.get(m))
                })
        })
    }

    /// Plain coefficient sum `sum |c|^2 + |d|^2`.
    pub fn l2_norm2(&self) -> f64 {
        [&self.c1, &self.d1, &self.c2, &self.d2]
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    pub fn scaled(&self, k: C) -> Self {
        let f = |v: &Vec<C>| v.iter().map(|z| z * k).collect();
        Self {
            c1: f(&self.c1),
            d1: f(&self.d1),
            c2: f(&self.c2),
            d2: f(&self.d2),
        }
    }
}

/// Four fields `(v, p, vdot, pdot)` sampled at `n + 1` uniform nodes of `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunctions {
    pub length: f64,
    pub v: Vec<C>,
    pub p: Vec<C>,
    pub vdot: Vec<C>,
    pub pdot: Vec<C>,
}

impl StateFunctions {
    pub fn zeros(length: f64, cells: usize) -> Self {
        let z = vec![ZERO; cells + 1];
        Self {
            length,
            v: z.clone(),
            p: z.clone(),
            vdot: z.clone(),
            pdot: z,
        }
    }

    pub fn from_fn(length: f64, cells: usize, f: impl Fn(f64) -> [C; 4]) -> Self {
        let mut s = Self::zeros(length, cells);
        for i in 0..=cells {
            let x = length * i as f64 / cells as f64;
            let [a, b, c, d] = f(x);
            s.v[i] = a;
            s.p[i] = b;
            s.vdot[i] = c;
            s.pdot[i] = d;
        }
        s
    }

    pub fn from_real_fn(length: f64, cells: usize, f: impl Fn(f64) -> [f64; 4]) -> Self {
        Self::from_fn(length, cells, |x| f(x).map(|r| C::new(r, 0.0)))
    }

    pub fn cells(&self) -> usize {
        self.v.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.length * i as f64 / self.cells() as f64
    }

    pub fn fields(&self) -> [&Vec<C>; 4] {
        [&self.v, &self.p, &self.vdot, &self.pdot]
    }

    /// Largest absolute sample difference over all four fields.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.fields()
            .iter()
            .flat_map(|a| a.iter().map(|x| x.norm()))
            .fold(0.0, f64::max)
    }
}

fn trapezoid_weights(cells: usize, dx: f64) -> impl Fn(usize) -> f64 {
    move |i| if i == 0 || i == cells { 0.5 * dx } else { dx }
}

/// Sine coefficients `(2/L) int f sin(sigma_j x) dx` by the trapezoid rule,
/// for `j = 1..=modes`.
fn sine_coefficients(f: &[C], length: f64, modes: usize) -> Vec<C> {
    let cells = f.len() - 1;
    let dx = length / cells as f64;
    let w = trapezoid_weights(cells, dx);
    (1..=modes)
        .map(|j| {
            let s = sigma(j, length);
            let acc: C = f
                .iter()
                .enumerate()
                .map(|(i, &fi)| fi * (w(i) * (s * i as f64 * dx).sin()))
                .sum();
            acc * (2.0 / length)
        })
        .collect()
}

/// Projects sampled fields onto the eigenbasis, `j = 1..=modes`.
pub fn project(state: &StateFunctions, dc: &DerivedConstants, modes: usize) -> Result<ModalCoefficients> {
    if modes < 1 {
        return Err(Error::InvalidTruncation(modes));
    }
    if state.cells() < 2 {
        return Err(Error::InvalidInput("state needs at least two cells".into()));
    }
    let scale = state.max_abs().max(1e-300);
    let v0 = state.v[0].norm();
    let p0 = state.p[0].norm();
    if v0 > 1e-12 * scale || p0 > 1e-12 * scale {
        return Err(Error::NotClamped { v0, p0 });
    }
    let length = state.length;
    let sv = sine_coefficients(&state.v, length, modes);
    let sp = sine_coefficients(&state.p, length, modes);
    let svd = sine_coefficients(&state.vdot, length, modes);
    let spd = sine_coefficients(&state.pdot, length, modes);

    let mut out = ModalCoefficients::zeros(modes);
    for j in 1..=modes {
        let l1 = eigenvalue(ModeIndex::new(1, Sign::Plus, j), dc, length).inv();
        let l2 = eigenvalue(ModeIndex::new(2, Sign::Plus, j), dc, length).inv();
        let (b1, b2) = (C::new(dc.b1, 0.0), C::new(dc.b2, 0.0));
        let one = C::new(1.0, 0.0);
        // unknowns (c1, d1, c2, d2)
        let m = Matrix4::new(
            l1, l1, l2, l2, //
            b1 * l1, b1 * l1, b2 * l2, b2 * l2, //
            one, -one, one, -one, //
            b1, -b1, b2, -b2,
        );
        let rhs = Vector4::new(sv[j - 1], sp[j - 1], svd[j - 1], spd[j - 1]);
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularModeSystem { j })?;
        if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularModeSystem { j });
        }
        out.c1[j - 1] = sol[0];
        out.d1[j - 1] = sol[1];
        out.c2[j - 1] = sol[2];
        out.d2[j - 1] = sol[3];
    }
    Ok(out)
}

/// Evaluates the truncated expansion on `cells + 1` uniform nodes.
pub fn reconstruct(
    coeffs: &ModalCoefficients,
    dc: &DerivedConstants,
    length: f64,
    cells: usize,
) -> StateFunctions {
    let mut out = StateFunctions::zeros(length, cells);
    for j in 1..=coeffs.order() {
        let c1 = coeffs.c1[j - 1];
        let d1 = coeffs.d1[j - 1];
        let c2 = coeffs.c2[j - 1];
        let d2 = coeffs.d2[j - 1];
        if c1 == ZERO && d1 == ZERO && c2 == ZERO && d2 == ZERO {
            continue;
        }
        let l1 = eigenvalue(ModeIndex::new(1, Sign::Plus, j), dc, length).inv();
        let l2 = eigenvalue(ModeIndex::new(2, Sign::Plus, j), dc, length).inv();
        let amp = [
            l1 * (c1 + d1) + l2 * (c2 + d2),
            l1 * (c1 + d1) * dc.b1 + l2 * (c2 + d2) * dc.b2,
            (c1 - d1) + (c2 - d2),
            (c1 - d1) * dc.b1 + (c2 - d2) * dc.b2,
        ];
        let s = sigma(j, length);
        for i in 0..=cells {
            let w = (s * out.x(i)).sin();
            out.v[i] += amp[0] * w;
            out.p[i] += amp[1] * w;
            out.vdot[i] += amp[2] * w;
            out.pdot[i] += amp[3] * w;
        }
    }
    out
}

/// Relative root-mean-square difference between `state` and the truncated
/// reconstruction of `coeffs` on the same nodes.
pub fn truncation_residual(state: &StateFunctions, coeffs: &ModalCoefficients, dc: &DerivedConstants) -> f64 {
    let rec = reconstruct(coeffs, dc, state.length, state.cells());
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in state.fields().iter().zip(rec.fields().iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            num += (x - y).norm_sqr();
            den += x.norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Advances the modal coefficients of the undamped system by `t` (any sign).
pub fn propagate(coeffs: &ModalCoefficients, dc: &DerivedConstants, length: f64, t: f64) -> ModalCoefficients {
    let mut out = coeffs.clone();
    for j in 1..=coeffs.order() {
        let s = sigma(j, length);
        let e1 = C::from_polar(1.0, s / dc.zeta1 * t);
        let e2 = C::from_polar(1.0, s / dc.zeta2 * t);
        out.c1[j - 1] *= e1;
        out.d1[j - 1] *= e1.conj();
        out.c2[j - 1] *= e2;
        out.d2[j - 1] *= e2.conj();
    }
    out
}

/// Squared energy norm of the expansion,
/// `L sum_j (rho + b1^2 mu)(|c1j|^2 + |d1j|^2) + (rho + b2^2 mu)(|c2j|^2 + |d2j|^2)`.
/// The physical energy is `thickness / 2` times this value.
pub fn modal_norm2(coeffs: &ModalCoefficients, params: &BeamParameters, dc: &DerivedConstants) -> f64 {
    let w1 = params.rho + dc.b1 * dc.b1 * params.mu;
    let w2 = params.rho + dc.b2 * dc.b2 * params.mu;
    let s1: f64 = coeffs.c1.iter().chain(&coeffs.d1).map(|z| z.norm_sqr()).sum();
    let s2: f64 = coeffs.c2.iter().chain(&coeffs.d2).map(|z| z.norm_sqr()).sum();
    params.length * (w1 * s1 + w2 * s2)
}

/// Equivalence constants `(L min(rho + bk^2 mu), L max(rho + bk^2 mu))` between the
/// coefficient sum and the squared energy norm.
pub fn norm_equivalence(params: &BeamParameters, dc: &DerivedConstants) -> (f64, f64) {
    let w1 = params.rho + dc.b1 * dc.b1 * params.mu;
    let w2 = params.rho + dc.b2 * dc.b2 * params.mu;
    (params.length * w1.min(w2), params.length * w1.max(w2))
}

/// `int_0^T e^{i w t} dt`, written as `T e^{i w T/2} sinc(w T/2)` so it is exact at `w = 0`.
pub fn exp_integral(w: f64, t: f64) -> C {
    let half = 0.5 * w * t;
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    C::from_polar(t * sinc, half)
}

/// Terms `(frequency, amplitude)` of the exponential sum `sum g_n e^{i s_n t}`
/// with frequencies closer than `1e-12` relative merged.
pub fn merge_frequencies(mut terms: Vec<(f64, C)>) -> Vec<(f64, C)> {
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, C)> = Vec::with_capacity(terms.len());
    for (s, g) in terms {
        match out.last_mut() {
            Some((s0, g0)) if (s - *s0).abs() <= 1e-12 * s.abs().max(s0.abs()).max(1e-300) => {
                *g0 += g;
            }
            _ => out.push((s, g)),
        }
    }
    out
}

/// `int_0^T |sum_n g_n e^{i s_n t}|^2 dt` by exact pairwise integration.
pub fn exp_sum_energy(terms: &[(f64, C)], t: f64) -> f64 {
    let mut acc = 0.0;
    for (m, &(sm, gm)) in terms.iter().enumerate() {
        acc += gm.norm_sqr() * t;
        for &(sn, gn) in &terms[m + 1..] {
            // the (m, n) and (n, m) terms are complex conjugates
            acc += 2.0 * (gm * gn.conj() * exp_integral(sm - sn, t)).re;
        }
    }
    acc.max(0.0)
}

/// The observation `B* phi(t) = -(1/h) pdot(L, t)` as an exponential sum,
/// before the `-1/h` factor.
pub fn output_terms(coeffs: &ModalCoefficients, dc: &DerivedConstants, length: f64) -> Vec<(f64, C)> {
    let mut terms = Vec::with_capacity(4 * coeffs.order());
    for j in 1..=coeffs.order() {
        // sin(sigma_j L) = (-1)^(j+1)
        let sgn = if j % 2 == 1 { 1.0 } else { -1.0 };
        let s = sigma(j, length);
        let (s1, s2) = (s / dc.zeta1, s / dc.zeta2);
        let push = |terms: &mut Vec<(f64, C)>, f: f64, g: C| {
            if g != ZERO {
                terms.push((f, g));
            }
        };
        push(&mut terms, s1, coeffs.c1[j - 1] * (sgn * dc.b1));
        push(&mut terms, -s1, -coeffs.d1[j - 1] * (sgn * dc.b1));
        push(&mut terms, s2, coeffs.c2[j - 1] * (sgn * dc.b2));
        push(&mut terms, -s2, -coeffs.d2[j - 1] * (sgn * dc.b2));
    }
    merge_frequencies(terms)
}

/// Closed-form `int_0^T |B* phi(t)|^2 dt` for the undamped trajectory starting
/// from `coeffs`.
pub fn output_integral(
    coeffs: &ModalCoefficients,
    dc: &DerivedConstants,
    length: f64,
    thickness: f64,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("observation time must be > 0, got {t}")));
    }
    let terms = output_terms(coeffs, dc, length);
    Ok(exp_sum_energy(&terms, t) / (thickness * thickness))
}

/// Pointwise `B* phi(t)` of the undamped trajectory.
pub fn output_at(coeffs: &ModalCoefficients, dc: &DerivedConstants, length: f64, thickness: f64, t: f64) -> C {
    let sum: C = output_terms(coeffs, dc, length)
        .iter()
        .map(|&(s, g)| g * C::from_polar(1.0, s * t))
        .sum();
    -sum / thickness
}

/// Solves `A_d U = G` for the closed-loop generator with feedback gain `1/(2h)`.
///
/// With the kernel `K(x, r) = min(x, r)`,
/// ```text
/// u3 = g1,  u4 = g2,
/// u1 = -(1/alpha1) int (rho g3 + gamma mu g4) K dr             - gamma g2(L) x / (2 h^2 alpha1)
/// u2 = -(1/alpha1) int (gamma rho g3 + alpha mu g4 / beta) K dr - alpha g2(L) x / (2 h^2 beta alpha1)
/// ```
/// Integrals use the cumulative trapezoid rule on the supplied nodes.
pub fn resolvent_zero(g: &StateFunctions, params: &BeamParameters) -> Result<StateFunctions> {
    let cells = g.cells();
    if cells < 2 {
        return Err(Error::QuadratureFailure("need at least two cells".into()));
    }
    let finite = g
        .fields()
        .iter()
        .all(|f| f.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    if !finite {
        return Err(Error::QuadratureFailure("non-finite samples".into()));
    }
    let BeamParameters {
        rho,
        alpha1,
        beta,
        gamma,
        mu,
        thickness: h,
        ..
    } = *params;
    let alpha = params.alpha();
    let dx = g.dx();

    let f1: Vec<C> = (0..=cells)
        .map(|i| g.vdot[i] * rho + g.pdot[i] * (gamma * mu))
        .collect();
    let f2: Vec<C> = (0..=cells)
        .map(|i| g.vdot[i] * (gamma * rho) + g.pdot[i] * (alpha * mu / beta))
        .collect();
    let k1 = green_integral(&f1, dx);
    let k2 = green_integral(&f2, dx);
    let gl = g.p[cells];

    let mut u = StateFunctions::zeros(g.length, cells);
    for i in 0..=cells {
        let x = g.x(i);
        u.v[i] = -k1[i] / alpha1 - gl * (gamma * x / (2.0 * h * h * alpha1));
        u.p[i] = -k2[i] / alpha1 - gl * (alpha * x / (2.0 * h * h * beta * alpha1));
        u.vdot[i] = g.v[i];
        u.pdot[i] = g.p[i];
    }
    if u.max_abs().is_finite() {
        Ok(u)
    } else {
        Err(Error::QuadratureFailure("integral overflowed".into()))
    }
}

/// `w(x) = int_0^L min(x, r) f(r) dr = int_0^x r f dr + x int_x^L f dr` on uniform nodes.
fn green_integral(f: &[C], dx: f64) -> Vec<C> {
    let n = f.len();
    // cumulative int_0^x r f(r) dr and int_0^x f(r) dr
    let mut a = vec![ZERO; n];
    let mut b = vec![ZERO; n];
    for i in 1..n {
        let r0 = (i - 1) as f64 * dx;
        let r1 = i as f64 * dx;
        a[i] = a[i - 1] + (f[i - 1] * r0 + f[i] * r1) * (0.5 * dx);
        b[i] = b[i - 1] + (f[i - 1] + f[i]) * (0.5 * dx);
    }
    let total = b[n - 1];
    (0..n)
        .map(|i| a[i] + (total - b[i]) * (i as f64 * dx))
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
    fn golden_eigenvalues() {
        let (_, dc) = golden();
        let ev = eigenvalues(&dc, 1.0, 3).unwrap();
        assert_eq!(ev.len(), 12);
        let l11 = eigenvalue(ModeIndex::new(1, Sign::Plus, 1), &dc, 1.0);
        let l21 = eigenvalue(ModeIndex::new(2, Sign::Plus, 1), &dc, 1.0);
        assert!(l11.re == 0.0 && (l11.im - 0.970_805_519_362_733).abs() < 1e-9);
        assert!(l21.re == 0.0 && (l21.im - 2.541_601_846_000_62).abs() < 1e-9);
        for (m, l) in &ev {
            let other = eigenvalue(
                ModeIndex {
                    sign: if m.sign == Sign::Plus { Sign::Minus } else { Sign::Plus },
                    ..*m
                },
                &dc,
                1.0,
            );
            assert_eq!(*l, -other);
        }
        assert!(matches!(eigenvalues(&dc, 1.0, 0), Err(Error::InvalidTruncation(0))));
    }

    #[test]
    fn eigenfunction_endpoints() {
        let (_, dc) = golden();
        for family in [1, 2] {
            for sign in [Sign::Plus, Sign::Minus] {
                let m = ModeIndex::new(family, sign, 3);
                assert!(eigenfunction(m, &dc, 1.0, 0.0).iter().all(|z| z.norm() == 0.0));
            }
        }
        let m = ModeIndex::new(1, Sign::Plus, 1);
        let e = eigenfunction(m, &dc, 1.0, 1.0);
        let l = eigenvalue(m, &dc, 1.0);
        let expect = [l.inv(), l.inv() * dc.b1, C::new(1.0, 0.0), C::new(dc.b1, 0.0)];
        for k in 0..4 {
            assert!((e[k] - expect[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn project_single_eigenvector() {
        let (_, dc) = golden();
        let m = ModeIndex::new(1, Sign::Plus, 1);
        let st = StateFunctions::from_fn(1.0, 2048, |x| eigenfunction(m, &dc, 1.0, x));
        let c = project(&st, &dc, 8).unwrap();
        for (mode, z) in c.iter() {
            let want = if mode == m { C::new(1.0, 0.0) } else { ZERO };
            assert!((z - want).norm() < 1e-10, "{mode:?} {z}");
        }
    }

    #[test]
    fn project_zero_and_velocity_sine() {
        let (_, dc) = golden();
        let c = project(&StateFunctions::zeros(1.0, 2048), &dc, 4).unwrap();
        assert_eq!(c.l2_norm2(), 0.0);

        let st = StateFunctions::from_real_fn(1.0, 2048, |x| [0.0, 0.0, (PI * x / 2.0).sin(), 0.0]);
        let c = project(&st, &dc, 4).unwrap();
        let denom = 2.0 * (dc.b1 - dc.b2);
        let c11 = -dc.b2 / denom;
        let c21 = dc.b1 / denom;
        assert!((c11 - 0.138_196_601_125_010_5).abs() < 1e-12);
        assert!((c21 - 0.361_803_398_874_989_5).abs() < 1e-12);
        assert!((c.c1[0] - c11).norm() < 1e-10);
        assert!((c.d1[0] + c11).norm() < 1e-10);
        assert!((c.c2[0] - c21).norm() < 1e-10);
        assert!((c.d2[0] + c21).norm() < 1e-10);
        for j in 1..4 {
            assert!(c.c1[j].norm() < 1e-10 && c.c2[j].norm() < 1e-10);
        }
    }

    #[test]
    fn project_rejects_unclamped_state() {
        let (_, dc) = golden();
        let st = StateFunctions::from_real_fn(1.0, 64, |_| [1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(project(&st, &dc, 4), Err(Error::NotClamped { .. })));
    }

    #[test]
    fn propagate_phases() {
        let (p, dc) = golden();
        let mut c = ModalCoefficients::zeros(2);
        c.c1[0] = C::new(1.0, 0.0);
        assert_eq!(propagate(&c, &dc, 1.0, 0.0), c);
        let t = 2.7;
        let c_t = propagate(&c, &dc, 1.0, t);
        let l = eigenvalue(ModeIndex::new(1, Sign::Plus, 1), &dc, 1.0);
        assert!((c_t.c1[0] - (l * t).exp()).norm() < 1e-14);
        assert!((c_t.c1[0].norm() - 1.0).abs() < 1e-14);
        assert!((modal_norm2(&c_t, &p, &dc) - modal_norm2(&c, &p, &dc)).abs() < 1e-14);
    }

    #[test]
    fn modal_norm_single_mode() {
        let (p, dc) = golden();
        let mut c = ModalCoefficients::zeros(1);
        assert_eq!(modal_norm2(&c, &p, &dc), 0.0);
        c.c1[0] = C::new(1.0, 0.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((modal_norm2(&c, &p, &dc) - (1.0 + phi * phi)).abs() < 1e-13);
    }

    #[test]
    fn exp_integral_limits() {
        assert_eq!(exp_integral(0.0, 3.0), C::new(3.0, 0.0));
        let w = 1.3;
        let t = 2.2;
        let exact = (C::from_polar(1.0, w * t) - 1.0) / (I * w);
        assert!((exp_integral(w, t) - exact).norm() < 1e-14);
        let tiny = 1e-10;
        assert!((exp_integral(tiny, t) - C::new(t, 0.5 * tiny * t * t)).norm() < 1e-15);
    }

    #[test]
    fn single_mode_output_integral() {
        let p = BeamParameters {
            gamma: 0.5f64.sqrt(),
            ..BeamParameters::unit()
        };
        let dc = derive_constants(&p).unwrap();
        let mut c = ModalCoefficients::zeros(1);
        assert_eq!(output_integral(&c, &dc, 1.0, 1.0, 3.0).unwrap(), 0.0);
        c.c1[0] = C::new(1.0, 0.0);
        let val = output_integral(&c, &dc, 1.0, 1.0, 3.0).unwrap();
        assert!((val - 6.0).abs() < 1e-12, "{val}");
        assert!(output_integral(&c, &dc, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn resolvent_zero_examples() {
        let (p, _) = golden();
        let zero = StateFunctions::zeros(1.0, 256);
        assert_eq!(resolvent_zero(&zero, &p).unwrap().max_abs(), 0.0);

        let g = StateFunctions::from_real_fn(1.0, 1024, |_| [0.0, 0.0, 1.0, 0.0]);
        let u = resolvent_zero(&g, &p).unwrap();
        for i in 0..=1024 {
            let x = u.x(i);
            let w = x - x * x / 2.0;
            assert!((u.v[i].re + w).abs() < 1e-12);
            assert!((u.p[i].re + w).abs() < 1e-12);
            assert_eq!(u.vdot[i], ZERO);
        }

        let g = StateFunctions::from_real_fn(1.0, 1024, |x| [0.0, x, 0.0, 0.0]);
        let u = resolvent_zero(&g, &p).unwrap();
        for i in 0..=1024 {
            let x = u.x(i);
            assert!((u.v[i].re + x / 2.0).abs() < 1e-12);
            assert!((u.p[i].re + x).abs() < 1e-12);
            assert!((u.pdot[i].re - x).abs() < 1e-15);
        }
        // beta u2x(L) - gamma beta u1x(L) = -u4(L)/(2h^2)
        let n = 1024;
        let d1 = (u.v[n] - u.v[n - 1]).re * n as f64;
        let d2 = (u.p[n] - u.p[n - 1]).re * n as f64;
        assert!((p.beta * d2 - p.gamma * p.beta * d1 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn resolvent_rejects_non_finite() {
        let (p, _) = golden();
        let mut g = StateFunctions::zeros(1.0, 16);
        g.vdot[3] = C::new(f64::NAN, 0.0);
        assert!(matches!(resolvent_zero(&g, &p), Err(Error::QuadratureFailure(_))));
    }
}
