//! Odd/odd Diophantine approximants, the near-unobservable states built from
//! them, observability quotients, Ingham gaps and empirical frame bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beam::{mixed_parity_gap, BeamParameters, DerivedConstants};
use crate::error::{Error, Result};
use crate::parallel::{par_map, task_seed};
use crate::rational::{distance, gcd};
use crate::spectral::{self, exp_integral, exp_sum_energy, ModalCoefficients};

type C = Complex64;

/// Relative error below which an odd/odd fraction counts as exact.
pub const EXACT_TOL: f64 = 8.0 * f64::EPSILON;

/// Default ceiling on `err * q^2` for accepted approximants.
pub const DEFAULT_CQ2_CEILING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddApproximant {
    pub p: u64,
    pub q: u64,
    pub err: f64,
    pub cq2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximantSearch {
    pub approximants: Vec<OddApproximant>,
    /// Largest `err * q^2` along the returned sequence.
    pub max_cq2: f64,
    /// An exact odd/odd representation was found; the search stopped there.
    pub exact: bool,
    /// Fewer than the requested number were found below `qmax`.
    pub exhausted: bool,
}

/// Odd/odd approximants of `zeta` with strictly increasing `q` and strictly
/// decreasing error, using the default `err * q^2` ceiling.
pub fn odd_odd_approximants(zeta: f64, count: usize, qmax: u64) -> Result<ApproximantSearch> {
    odd_odd_approximants_with(zeta, count, qmax, DEFAULT_CQ2_CEILING)
}

/// Exhaustive search over odd `q = 3, 5, ..., qmax`: the nearest odd `p` is kept
/// when `gcd(p, q) = 1`, its error beats every earlier record and
/// `err * q^2 <= ceiling`.
pub fn odd_odd_approximants_with(zeta: f64, count: usize, qmax: u64, ceiling: f64) -> Result<ApproximantSearch> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidInput(format!("zeta must be positive, got {zeta}")));
    }
    if count < 1 {
        return Err(Error::InvalidBudget("count must be at least 1".into()));
    }
    if qmax < 3 {
        return Err(Error::InvalidBudget(format!("qmax must be at least 3, got {qmax}")));
    }
    if !(ceiling > 0.0) {
        return Err(Error::InvalidBudget(format!("ceiling must be > 0, got {ceiling}")));
    }
    let mut out = Vec::new();
    let mut best = f64::INFINITY;
    let mut exact = false;
    let mut q = 3u64;
    while q <= qmax && out.len() < count {
        let target = zeta * q as f64;
        // odd neighbours of zeta q
        let lo = {
            let f = target.floor() as i64;
            if f.rem_euclid(2) == 1 {
                f
            } else {
                f - 1
            }
        };
        let mut pick: Option<(u64, f64)> = None;
        for p in [lo, lo + 2] {
            if p < 1 {
                continue;
            }
            let p = p as u64;
            let e = distance(zeta, p, q);
            if pick.is_none_or(|(_, pe)| e < pe) {
                pick = Some((p, e));
            }
        }
        if let Some((p, err)) = pick {
            let cq2 = err * (q as f64) * (q as f64);
            if gcd(p, q) == 1 && err < best && cq2 <= ceiling {
                best = err;
                out.push(OddApproximant { p, q, err, cq2 });
                if err <= EXACT_TOL * zeta {
                    exact = true;
                    break;
                }
            }
        }
        q += 2;
    }
    let max_cq2 = out.iter().map(|a| a.cq2).fold(0.0, f64::max);
    let exhausted = !exact && out.len() < count;
    Ok(ApproximantSearch {
        approximants: out,
        max_cq2,
        exact,
        exhausted,
    })
}

/// Signs with `kappa1 sin(q pi/2) = kappa2 sin(p pi/2) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedSigns {
    pub kappa1: i8,
    pub kappa2: i8,
}

impl IndexedSigns {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p % 2 == 0 || q % 2 == 0 {
            return Err(Error::InvalidInput(format!("{p}/{q} is not odd/odd")));
        }
        let k = |n: u64| if (n + 1) % 4 == 0 { -1 } else { 1 };
        Ok(Self {
            kappa1: k(q),
            kappa2: k(p),
        })
    }
}

/// Coefficients of `Phi = Phi_1 - Phi_2`: `c1 = kappa1/b1` at `j = (q+1)/2`,
/// `c2 = -kappa2/b2` at `j = (p+1)/2`, all others zero, in an array of order `modes`.
pub fn phi_m(approx: &OddApproximant, dc: &DerivedConstants, modes: usize) -> Result<ModalCoefficients> {
    let signs = IndexedSigns::new(approx.p, approx.q)?;
    let j1 = ((approx.q + 1) / 2) as usize;
    let j2 = ((approx.p + 1) / 2) as usize;
    let needed = j1.max(j2);
    if modes < needed {
        return Err(Error::TruncationTooSmall {
            needed,
            available: modes,
        });
    }
    let mut c = ModalCoefficients::zeros(modes);
    c.c1[j1 - 1] = C::new(signs.kappa1 as f64 / dc.b1, 0.0);
    c.c2[j2 - 1] = C::new(-(signs.kappa2 as f64) / dc.b2, 0.0);
    Ok(c)
}

/// Smallest truncation order holding [`phi_m`] for `approx`.
pub fn phi_m_order(approx: &OddApproximant) -> usize {
    ((approx.q.max(approx.p) + 1) / 2) as usize
}

/// `int_0^T |B* phi|^2 / ||phi||^2` for the undamped trajectory from `coeffs`.
pub fn observability_quotient(
    coeffs: &ModalCoefficients,
    dc: &DerivedConstants,
    params: &BeamParameters,
    t: f64,
) -> Result<f64> {
    let n2 = spectral::modal_norm2(coeffs, params, dc);
    if !(n2 > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(spectral::output_integral(coeffs, dc, params.length, params.thickness, t)? / n2)
}

/// Upper bound `pi^2 T^3 C^2 / (12 L^2 h^2 zeta2^2 q^2)` on the output energy of
/// [`phi_m`], with `C = err q^2` of the approximant.
pub fn phi_output_bound(approx: &OddApproximant, dc: &DerivedConstants, params: &BeamParameters, t: f64) -> f64 {
    let l = params.length;
    let h = params.thickness;
    let q = approx.q as f64;
    std::f64::consts::PI.powi(2) * t.powi(3) * approx.cq2 * approx.cq2 / (12.0 * l * l * h * h * dc.zeta2 * dc.zeta2 * q * q)
}

/// Uniform gap and minimal observation time for a mixed-parity ratio `p/q`.
pub fn ingham_gap(dc: &DerivedConstants, length: f64, p: u64, q: u64) -> Result<(f64, f64)> {
    if p == 0 || q == 0 {
        return Err(Error::InvalidInput("p and q must be positive".into()));
    }
    if gcd(p, q) != 1 {
        return Err(Error::InvalidInput(format!("{p}/{q} is not reduced")));
    }
    if p % 2 == 1 && q % 2 == 1 {
        return Err(Error::ParityViolation { p, q });
    }
    let ratio = dc.ratio();
    if distance(ratio, p, q) > 1e-9 {
        return Err(Error::NotRational { ratio, p, q });
    }
    let gap = mixed_parity_gap(dc, length, q);
    Ok((gap, 2.0 * std::f64::consts::PI / gap))
}

/// All eigenfrequencies `±sigma_j / zeta_k`, `j <= jmax`, sorted.
pub fn exponent_family(dc: &DerivedConstants, length: f64, jmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(4 * jmax);
    for j in 1..=jmax {
        let s = spectral::sigma(j, length);
        for z in [dc.zeta1, dc.zeta2] {
            out.push(s / z);
            out.push(-s / z);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Smallest distance between distinct entries of a sorted list.
pub fn min_gap(sorted: &[f64]) -> f64 {
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBounds {
    pub cmin: f64,
    pub cmax: f64,
    /// Extremes over the random trials only.
    pub trial_min: f64,
    pub trial_max: f64,
    /// Extreme eigenvalues of the Gram matrix.
    pub gram_min: f64,
    pub gram_max: f64,
    /// Number of adjacent exponent pairs closer than `1e-12` relative.
    pub duplicates: usize,
    pub seed: u64,
}

/// `int_0^T |sum g_n e^{i s_n t}|^2 dt / sum |g_n|^2`.
pub fn frame_ratio(exponents: &[f64], g: &[C], t: f64) -> f64 {
    let terms: Vec<(f64, C)> = exponents.iter().copied().zip(g.iter().copied()).collect();
    let den: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    exp_sum_energy(&terms, t) / den
}

/// Gram matrix `M_mn = int_0^T e^{i (s_m - s_n) t} dt`.
pub fn gram_matrix(exponents: &[f64], t: f64) -> DMatrix<C> {
    let n = exponents.len();
    DMatrix::from_fn(n, n, |m, k| exp_integral(exponents[m] - exponents[k], t))
}

/// Extreme eigenpairs of a Hermitian matrix through its real symmetric embedding.
fn hermitian_extremes(m: &DMatrix<C>) -> ((f64, Vec<C>), (f64, Vec<C>)) {
    let n = m.nrows();
    let big = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
        let (rr, cc) = (r % n, c % n);
        let z = m[(rr, cc)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = big.symmetric_eigen();
    let pick = |k: usize| {
        let v = eig.eigenvectors.column(k);
        let x: Vec<C> = (0..n).map(|i| C::new(v[i], v[i + n])).collect();
        (eig.eigenvalues[k], x)
    };
    let (mut kmin, mut kmax) = (0, 0);
    for k in 0..2 * n {
        if eig.eigenvalues[k] < eig.eigenvalues[kmin] {
            kmin = k;
        }
        if eig.eigenvalues[k] > eig.eigenvalues[kmax] {
            kmax = k;
        }
    }
    (pick(kmin), pick(kmax))
}

/// Empirical frame bounds over `trials` seeded complex-Gaussian coefficient
/// vectors together with the extreme eigenvectors of the Gram matrix.
pub fn ingham_frame(exponents: &[f64], t: f64, trials: usize, seed: u64) -> Result<FrameBounds> {
    if exponents.is_empty() {
        return Err(Error::InvalidInput("need at least one exponent".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("observation time must be > 0, got {t}")));
    }
    if trials < 1 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if exponents.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("exponents must be finite".into()));
    }
    let mut sorted = exponents.to_vec();
    sorted.sort_by(f64::total_cmp);
    let duplicates = sorted
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() <= 1e-12 * w[0].abs().max(w[1].abs()).max(1.0))
        .count();

    let n = exponents.len();
    let ids: Vec<u64> = (0..trials as u64).collect();
    let ratios = par_map(&ids, |_, &k| {
        let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, k));
        let g: Vec<C> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C::new(re, im)
            })
            .collect();
        frame_ratio(exponents, &g, t)
    });
    let trial_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let trial_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let gram = gram_matrix(exponents, t);
    let ((lmin, vmin), (lmax, vmax)) = hermitian_extremes(&gram);
    // the quadratic form is g^T M conj(g), so the extremal vectors are conjugated
    let rmin = frame_ratio(exponents, &vmin.iter().map(|z| z.conj()).collect::<Vec<_>>(), t);
    let rmax = frame_ratio(exponents, &vmax.iter().map(|z| z.conj()).collect::<Vec<_>>(), t);
    Ok(FrameBounds {
        cmin: trial_min.min(rmin).max(0.0),
        cmax: trial_max.max(rmax),
        trial_min,
        trial_max,
        gram_min: lmin.max(0.0),
        gram_max: lmax,
        duplicates,
        seed,
    })
}
