//! Rational approximation of positive reals by continued fractions.
//!
//! The expansion is carried out on the exact dyadic value of the `f64`, so the
//! partial quotients carry no floating-point drift.

/// A fraction `p/q` together with its distance to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fraction {
    pub p: u64,
    pub q: u64,
    pub error: f64,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `|x - p/q|` evaluated with a fused multiply-add so that exact fractions give 0.
pub fn distance(x: f64, p: u64, q: u64) -> f64 {
    x.mul_add(q as f64, -(p as f64)).abs() / q as f64
}

fn exact_ratio(x: f64) -> (u128, u128) {
    const SHIFT: i32 = 100;
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mut mant = (bits & ((1u64 << 52) - 1)) as u128;
    let e = if exp == 0 {
        -1074
    } else {
        mant |= 1u128 << 52;
        exp - 1075
    };
    if e >= 0 {
        // integers beyond 2^53; the denominator stays 1
        let e = e.min(74) as u32;
        return (mant << e, 1);
    }
    let k = -e;
    if k <= SHIFT {
        let mut num = mant;
        let mut den = 1u128 << k;
        while num % 2 == 0 && den > 1 {
            num /= 2;
            den /= 2;
        }
        (num, den)
    } else {
        // tiny values: round onto the 2^-100 lattice
        let shift = (k - SHIFT) as u32;
        let num = if shift >= 128 { 0 } else { mant >> shift };
        (num, 1u128 << SHIFT)
    }
}

/// Convergents and semiconvergents of `x` in increasing denominator order,
/// stopping once the denominator exceeds `qmax`.
pub fn candidates(x: f64, qmax: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    if !(x.is_finite() && x >= 0.0) || qmax == 0 {
        return out;
    }
    let (mut num, mut den) = exact_ratio(x);
    // h_{n-2}/k_{n-2}, h_{n-1}/k_{n-1}
    let (mut h2, mut k2): (u128, u128) = (0, 1);
    let (mut h1, mut k1): (u128, u128) = (1, 0);
    let qmax = qmax as u128;
    while den != 0 {
        let a = num / den;
        let r = num % den;
        // semiconvergents (h2 + m h1)/(k2 + m k1), m = 1..a-1
        if k1 > 0 {
            for m in 1..a {
                let q = k2 + m * k1;
                if q > qmax {
                    return out;
                }
                let p = h2 + m * h1;
                out.push((p as u64, q as u64));
            }
        }
        let h = a * h1 + h2;
        let k = a * k1 + k2;
        if k > qmax {
            return out;
        }
        if k > 0 {
            out.push((h as u64, k as u64));
        }
        h2 = h1;
        k2 = k1;
        h1 = h;
        k1 = k;
        num = den;
        den = r;
    }
    out
}

/// The smallest-denominator fraction with `p >= 1`, `q <= qmax` and
/// `|x - p/q| <= tol`, if any.
pub fn simplest_within(x: f64, qmax: u64, tol: f64) -> Option<Fraction> {
    candidates(x, qmax)
        .into_iter()
        .filter(|&(p, _)| p >= 1)
        .map(|(p, q)| Fraction {
            p,
            q,
            error: distance(x, p, q),
        })
        .find(|f| f.error <= tol)
}

/// Best approximation with `p >= 1` and `q <= qmax`; ties go to the smaller denominator.
pub fn best_approximation(x: f64, qmax: u64) -> Option<Fraction> {
    let mut best: Option<Fraction> = None;
    for (p, q) in candidates(x, qmax) {
        if p == 0 {
            continue;
        }
        let f = Fraction {
            p,
            q,
            error: distance(x, p, q),
        };
        if best.is_none_or(|b| f.error < b.error) {
            best = Some(f);
        }
    }
    best
}
