//! Small dense and banded solvers used by the spectral and frequency modules.

use num_complex::Complex64;

type C = Complex64;

/// 2x2 complex block, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block2(pub [[C; 2]; 2]);

impl Block2 {
    pub fn zero() -> Self {
        Block2([[C::new(0.0, 0.0); 2]; 2])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Block2([
            [C::new(m[0][0], 0.0), C::new(m[0][1], 0.0)],
            [C::new(m[1][0], 0.0), C::new(m[1][1], 0.0)],
        ])
    }

    pub fn det(&self) -> C {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inv(&self) -> Option<Self> {
        let d = self.det();
        let scale = self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        if d.norm() <= 1e-300 || d.norm() <= 1e-14 * scale * scale {
            return None;
        }
        let m = &self.0;
        Some(Block2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn mul(&self, o: &Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        let mut r = [[C::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Block2(r)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.0;
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] -= o.0[i][j];
            }
        }
        Block2(r)
    }

    pub fn apply(&self, v: [C; 2]) -> [C; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }
}

/// Solves the block-tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// by block Gaussian elimination without pivoting across blocks.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_block_tridiagonal(
    lower: &[Block2],
    diag: &[Block2],
    upper: &[Block2],
    rhs: &[[C; 2]],
) -> Option<Vec<[C; 2]>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c_prime: Vec<Block2> = Vec::with_capacity(n);
    let mut d_prime: Vec<[C; 2]> = Vec::with_capacity(n);
    for i in 0..n {
        let (m, r) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            let lc = lower[i].mul(&c_prime[i - 1]);
            let ld = lower[i].apply(d_prime[i - 1]);
            (
                diag[i].sub(&lc),
                [rhs[i][0] - ld[0], rhs[i][1] - ld[1]],
            )
        };
        let inv = m.inv()?;
        c_prime.push(inv.mul(&upper[i]));
        d_prime.push(inv.apply(r));
    }
    let mut x = vec![[C::new(0.0, 0.0); 2]; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        let cx = c_prime[i].apply(x[i + 1]);
        x[i] = [d_prime[i][0] - cx[0], d_prime[i][1] - cx[1]];
    }
    if x.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Number of eigenvalues below `shift` of the real symmetric block-tridiagonal
/// matrix with 2x2 diagonal blocks `diag` and off-diagonal blocks `off`
/// (`off[i]` couples block `i` to block `i+1`), by Sylvester's law of inertia
/// applied to the block LDL^T factorisation.
pub fn count_below(diag: &[[[f64; 2]; 2]], off: &[[[f64; 2]; 2]], shift: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    // running pivot block D_i
    let mut prev: Option<[[f64; 2]; 2]> = None;
    for i in 0..n {
        let mut d = diag[i];
        d[0][0] -= shift;
        d[1][1] -= shift;
        if let Some(pd) = prev {
            // D_i = A_i - B^T D_{i-1}^{-1} B with B = off[i-1]
            let b = off[i - 1];
            let mut det = pd[0][0] * pd[1][1] - pd[0][1] * pd[1][0];
            if det == 0.0 {
                det = f64::MIN_POSITIVE;
            }
            let inv = [
                [pd[1][1] / det, -pd[0][1] / det],
                [-pd[1][0] / det, pd[0][0] / det],
            ];
            // t = D^{-1} B
            let mut t = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    t[r][c] = inv[r][0] * b[0][c] + inv[r][1] * b[1][c];
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    d[r][c] -= b[0][r] * t[0][c] + b[1][r] * t[1][c];
                }
            }
        }
        // inertia of a symmetric 2x2 block
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        let tr = d[0][0] + d[1][1];
        count += if det < 0.0 {
            1
        } else if tr < 0.0 {
            2
        } else {
            0
        };
        prev = Some(d);
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_solver_matches_dense() {
        // 3 blocks, compare against a dense Gaussian solve via nalgebra
        let n = 3;
        let mk = |a: f64, b: f64| C::new(a, b);
        let diag: Vec<Block2> = (0..n)
            .map(|i| {
                Block2([
                    [mk(4.0 + i as f64, 0.3), mk(0.5, -0.1)],
                    [mk(0.2, 0.0), mk(5.0, -0.2 * i as f64)],
                ])
            })
            .collect();
        let lower: Vec<Block2> = (0..n)
            .map(|_| Block2([[mk(1.0, 0.1), mk(0.0, 0.0)], [mk(0.3, 0.0), mk(-1.0, 0.0)]]))
            .collect();
        let upper: Vec<Block2> = (0..n)
            .map(|_| Block2([[mk(-0.5, 0.0), mk(0.2, 0.0)], [mk(0.0, 0.4), mk(1.0, 0.0)]]))
            .collect();
        let rhs: Vec<[C; 2]> = (0..n).map(|i| [mk(i as f64, 1.0), mk(1.0, -(i as f64))]).collect();
        let x = solve_block_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();

        let mut a = nalgebra::DMatrix::<C>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    a[(2 * i + r, 2 * i + c)] = diag[i].0[r][c];
                    if i > 0 {
                        a[(2 * i + r, 2 * (i - 1) + c)] = lower[i].0[r][c];
                    }
                    if i + 1 < n {
                        a[(2 * i + r, 2 * (i + 1) + c)] = upper[i].0[r][c];
                    }
                }
            }
        }
        let b = nalgebra::DVector::from_iterator(2 * n, rhs.iter().flatten().copied());
        let xd = a.lu().solve(&b).unwrap();
        for i in 0..n {
            for r in 0..2 {
                assert!((x[i][r] - xd[2 * i + r]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sturm_count_matches_dense_eigenvalues() {
        let n = 6;
        let diag: Vec<[[f64; 2]; 2]> = (0..n)
            .map(|i| [[2.0 + i as f64 * 0.1, 0.3], [0.3, 3.0 - i as f64 * 0.2]])
            .collect();
        let off: Vec<[[f64; 2]; 2]> = (0..n - 1).map(|_| [[-1.0, 0.2], [0.1, -0.7]]).collect();
        let mut a = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    a[(2 * i + r, 2 * i + c)] = diag[i][r][c];
                    if i + 1 < n {
                        a[(2 * i + r, 2 * (i + 1) + c)] = off[i][r][c];
                        a[(2 * (i + 1) + c, 2 * i + r)] = off[i][r][c];
                    }
                }
            }
        }
        let eig = a.symmetric_eigen().eigenvalues;
        for shift in [-1.0, 0.5, 1.0, 2.0, 2.7, 3.3, 4.0, 10.0] {
            let expected = eig.iter().filter(|&&e| e < shift).count();
            assert_eq!(count_below(&diag, &off, shift), expected, "shift {shift}");
        }
    }
}
