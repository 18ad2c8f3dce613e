//! Small fixed-size matrix helpers plus a dense Cholesky factorisation.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

pub type Mat4 = [[f64; 4]; 4];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY4: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn add4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = *a;
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] += b[i][j];
        }
    }
    c
}

pub fn scale4(a: &Mat4, s: f64) -> Mat4 {
    let mut c = *a;
    c.iter_mut().flatten().for_each(|x| *x *= s);
    c
}

/// Row vector times matrix.
pub fn vec_mul4(v: &[f64; 4], a: &Mat4) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, vk) in v.iter().enumerate() {
        for j in 0..4 {
            out[j] += vk * a[k][j];
        }
    }
    out
}

pub fn max_abs4(a: &Mat4) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff4(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

fn norm1_4(a: &Mat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a · x = b` for a 4×4 right-hand side by Gaussian elimination with
/// partial pivoting. Returns `None` on an exactly zero pivot.
pub fn solve4(a: &Mat4, b: &Mat4) -> Option<Mat4> {
    let mut a = *a;
    let mut b = *b;
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..4 {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let mut x = [[0.0; 4]; 4];
    for rhs in 0..4 {
        for row in (0..4).rev() {
            let mut s = b[row][rhs];
            for k in row + 1..4 {
                s -= a[row][k] * x[k][rhs];
            }
            x[row][rhs] = s / a[row][row];
        }
    }
    Some(x)
}

pub fn inverse4(a: &Mat4) -> Option<Mat4> {
    solve4(a, &IDENTITY4)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm4(a: &Mat4) -> Mat4 {
    const THETA13: f64 = 5.371920351148152;
    let norm = norm1_4(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = scale4(a, 0.5.powi(squarings));
    let b = &PADE13;
    let a2 = mul4(&a, &a);
    let a4 = mul4(&a2, &a2);
    let a6 = mul4(&a4, &a2);
    let mut u_inner = [[0.0; 4]; 4];
    let mut v = [[0.0; 4]; 4];
    let mut v_hi = [[0.0; 4]; 4];
    let mut u_hi = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let id = if i == j { 1.0 } else { 0.0 };
            u_hi[i][j] = b[13] * a6[i][j] + b[11] * a4[i][j] + b[9] * a2[i][j];
            u_inner[i][j] = b[7] * a6[i][j] + b[5] * a4[i][j] + b[3] * a2[i][j] + b[1] * id;
            v_hi[i][j] = b[12] * a6[i][j] + b[10] * a4[i][j] + b[8] * a2[i][j];
            v[i][j] = b[6] * a6[i][j] + b[4] * a4[i][j] + b[2] * a2[i][j] + b[0] * id;
        }
    }
    let u = mul4(&a, &add4(&mul4(&a6, &u_hi), &u_inner));
    let v = add4(&mul4(&a6, &v_hi), &v);
    let mut p = v;
    let mut q = v;
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] += u[i][j];
            q[i][j] -= u[i][j];
        }
    }
    let mut r = solve4(&q, &p).unwrap_or([[f64::NAN; 4]; 4]);
    for _ in 0..squarings {
        r = mul4(&r, &r);
    }
    r
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse2(a: &Mat2) -> Mat2 {
    let d = det2(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

pub fn apply2(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }

    /// Cholesky factorisation `A = L Lᵀ` of a symmetric positive-definite
    /// matrix. On failure returns the index and value of the first
    /// non-positive pivot.
    pub fn cholesky(&self) -> core::result::Result<Cholesky, (usize, f64)> {
        let n = self.n;
        let mut l = self.data.clone();
        for j in 0..n {
            let row_j = &mut l[j * n..j * n + n];
            let d = row_j[j] - row_j[..j].iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err((j, d));
            }
            let djj = d.sqrt();
            row_j[j] = djj;
            for i in j + 1..n {
                let (upper, lower) = l.split_at_mut(i * n);
                let row_j = &upper[j * n..j * n + n];
                let row_i = &mut lower[..n];
                let mut s = row_i[j];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / djj;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Cholesky { n, l })
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Smallest diagonal entry of the factor.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i * self.n + i])
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let mut a = [[0.0; 4]; 4];
        let d = [0.3, -2.0, 7.5, 0.0];
        for i in 0..4 {
            a[i][i] = d[i];
        }
        let e = expm4(&a);
        for i in 0..4 {
            assert!((e[i][i] - d[i].exp()).abs() <= 1e-13 * d[i].exp());
        }
    }

    #[test]
    fn expm_of_nilpotent() {
        let mut a = [[0.0; 4]; 4];
        a[0][1] = 2.0;
        a[1][2] = 3.0;
        let e = expm4(&a);
        assert!((e[0][1] - 2.0).abs() < 1e-15);
        assert!((e[0][2] - 3.0).abs() < 1e-15);
        assert!((e[1][2] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let a = [
            [4.0, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.0, 2.0],
            [0.0, 1.0, 5.0, 1.0],
            [2.0, 0.0, 1.0, 6.0],
        ];
        let inv = inverse4(&a).unwrap();
        assert!(max_abs_diff4(&mul4(&a, &inv), &IDENTITY4) < 1e-14);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let n = 5;
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, 1.0 / (1.0 + (i as f64 - j as f64).abs()));
            }
            a.add(i, i, 1.0);
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let b = a.mul_vec(&x);
        let sol = a.cholesky().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
        assert!(matches!(a.negated().cholesky(), Err((0, _))));
    }
}
