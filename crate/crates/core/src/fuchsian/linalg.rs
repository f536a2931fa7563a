//! Cartan-space data of `SL(d, R)`: Jordan and Cartan projections, flags,
//! the Iwasawa cocycle, symmetric powers and linear functionals.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// A point of `{a in R^d : a_1 + ... + a_d = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CartanVector(pub Vec<f64>);

impl CartanVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Simple root `a_k - a_{k+1}`, `1 <= k < d`.
    pub fn alpha(&self, k: usize) -> f64 {
        self.0[k - 1] - self.0[k]
    }

    /// Fundamental weight `a_1 + ... + a_k`.
    pub fn omega(&self, k: usize) -> f64 {
        self.0[..k].iter().sum()
    }

    pub fn zero(d: usize) -> Self {
        CartanVector(vec![0.0; d])
    }

    pub fn add(&self, other: &CartanVector) -> CartanVector {
        CartanVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CartanVector) -> CartanVector {
        CartanVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs_diff(&self, other: &CartanVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_unimodular(a: &Matrix) -> Result<()> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    let det = a.determinant();
    let scale = a.norm().powi(a.nrows() as i32).max(1.0);
    if !det.is_finite() || (det - 1.0).abs() > 1e-8 * scale {
        return Err(Error::NumericallySingular(det));
    }
    Ok(())
}

/// Sorted log-moduli of the eigenvalues.
pub fn jordan_projection(a: &Matrix) -> Result<CartanVector> {
    check_unimodular(a)?;
    let mut v: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.norm().ln()).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    recenter(&mut v);
    Ok(CartanVector(v))
}

/// Log singular values, decreasing.
pub fn cartan_projection(a: &Matrix) -> Result<CartanVector> {
    check_unimodular(a)?;
    let mut v: Vec<f64> = a.singular_values().iter().map(|s| s.ln()).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    recenter(&mut v);
    Ok(CartanVector(v))
}

/// Removes the rounding drift of `sum log = log det = 0`.
fn recenter(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// `(jordan, cartan)`.
pub fn projections(a: &Matrix) -> Result<(CartanVector, CartanVector)> {
    Ok((jordan_projection(a)?, cartan_projection(a)?))
}

/// A complete flag, stored as an orthonormal basis whose first `k` columns
/// span the `k`-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    basis: Matrix,
}

impl Flag {
    /// Accepts a basis that is orthonormal within `1e-10`.
    pub fn new(basis: Matrix) -> Result<Self> {
        if !basis.is_square() {
            return Err(Error::DegenerateFlag("basis is not square".into()));
        }
        let d = basis.nrows();
        let gram = basis.transpose() * &basis;
        let err = (gram - Matrix::identity(d, d)).amax();
        if !(err <= 1e-10) {
            return Err(Error::DegenerateFlag(format!("basis is not orthonormal (error {err:e})")));
        }
        Ok(Flag { basis })
    }

    pub fn standard(d: usize) -> Self {
        Flag {
            basis: Matrix::identity(d, d),
        }
    }

    /// The flag spanned by the leading columns of any invertible matrix.
    pub fn spanned_by(m: &Matrix) -> Result<Self> {
        let qr = m.clone().qr();
        let r = qr.r();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (0..r.nrows()).any(|i| !(r[(i, i)].abs() > 1e-14 * scale)) {
            return Err(Error::DegenerateFlag("spanning vectors are dependent".into()));
        }
        Ok(Flag { basis: qr.q() })
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `A F`.
    pub fn apply(&self, a: &Matrix) -> Result<Flag> {
        Flag::spanned_by(&(a * &self.basis))
    }

    /// Attracting flag of a loxodromic matrix, by orthogonal iteration.
    pub fn attracting(a: &Matrix) -> Result<Flag> {
        let d = a.nrows();
        let mut f = Flag::standard(d);
        // A fixed generic start avoids the repelling subspaces of typical
        // test matrices.
        let mut start = Matrix::identity(d, d);
        for i in 0..d {
            for j in 0..d {
                start[(i, j)] += 0.3 / (1.0 + i as f64 + 2.0 * j as f64);
            }
        }
        f = Flag::spanned_by(&start).unwrap_or(f);
        for _ in 0..2000 {
            let next = f.apply(a)?;
            let moved = (0..d)
                .map(|k| 1.0 - next.basis.column(k).dot(&f.basis.column(k)).abs())
                .fold(0.0, f64::max);
            f = next;
            if moved < 1e-16 {
                break;
            }
        }
        Ok(f)
    }

    /// Sine of the smallest principal angle between `F^k` and a subspace
    /// with orthonormal basis `w` (of dimension `d - k`).
    pub fn transversality(&self, k: usize, w: &Matrix) -> f64 {
        let fk = self.basis.columns(0, k);
        let m = Matrix::from_fn(fk.ncols() + w.ncols(), self.dim(), |i, j| {
            if i < k {
                fk[(j, i)]
            } else {
                w[(j, i - k)]
            }
        });
        // For complementary subspaces the product of sines of principal
        // angles is |det [F^k | W]|; the smallest sine is bounded below by it.
        m.determinant().abs()
    }
}

/// `B(A, F)`: log of the diagonal of the triangular factor of `A K`, where
/// `F = K F_0`.
pub fn iwasawa_cocycle(a: &Matrix, flag: &Flag) -> Result<CartanVector> {
    if a.nrows() != flag.dim() {
        return Err(Error::InvalidArgument("matrix and flag dimensions differ".into()));
    }
    let r = (a * flag.basis()).qr().r();
    let mut v: Vec<f64> = (0..r.nrows()).map(|i| r[(i, i)].abs().ln()).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateFlag("triangular factor has a zero diagonal entry".into()));
    }
    recenter(&mut v);
    Ok(CartanVector(v))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Sym^{d-1}` of a 2x2 matrix in the monomial basis
/// `x^{d-1}, x^{d-2} y, ..., y^{d-1}`, after rescaling to determinant one.
pub fn sym_power_monomial(a: &Matrix2<f64>, d: usize) -> Matrix {
    assert!(d >= 2, "symmetric power needs d >= 2");
    let det = a.determinant();
    let a = a / det.abs().sqrt();
    let m = d - 1;
    // Column j is the image of x^{m-j} y^j with x -> a11 x + a21 y,
    // y -> a12 x + a22 y, expanded in powers of y.
    let (p, q) = ([a[(0, 0)], a[(1, 0)]], [a[(0, 1)], a[(1, 1)]]);
    let mul = |u: &[f64], v: &[f64]| {
        let mut out = vec![0.0; u.len() + v.len() - 1];
        for (i, x) in u.iter().enumerate() {
            for (j, y) in v.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    let mut out = Matrix::zeros(d, d);
    for j in 0..d {
        let mut poly = vec![1.0];
        for _ in 0..m - j {
            poly = mul(&poly, &p);
        }
        for _ in 0..j {
            poly = mul(&poly, &q);
        }
        for (i, c) in poly.into_iter().enumerate() {
            out[(i, j)] = c;
        }
    }
    out
}

/// `Sym^{d-1}` in the basis `sqrt(C(d-1, j)) x^{d-1-j} y^j`, in which
/// rotations act orthogonally; this is the basis used for flags and
/// cocycles.
pub fn sym_power(a: &Matrix2<f64>, d: usize) -> Matrix {
    let mono = sym_power_monomial(a, d);
    let m = d - 1;
    Matrix::from_fn(d, d, |i, j| mono[(i, j)] * (binomial(m, j) / binomial(m, i)).sqrt())
}

/// Osculating flag of the Veronese curve at the line spanned by `v`:
/// `F^k` is spanned by `v^{d-1}, v^{d-2} w, ..., v^{d-k} w^{k-1}` for any
/// `w` independent of `v`.
pub fn veronese_flag(v: [f64; 2], d: usize) -> Flag {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let (c, s) = (v[0] / n, v[1] / n);
    let k = Matrix2::new(c, -s, s, c);
    Flag {
        basis: sym_power(&k, d),
    }
}

/// A linear functional on the Cartan space, `phi(a) = sum c_i a_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub name: String,
    pub coeffs: Vec<f64>,
}

impl Functional {
    /// `sum a_k alpha_k`.
    pub fn from_alpha(a: &[f64]) -> Self {
        let d = a.len() + 1;
        let mut c = vec![0.0; d];
        for (k, &x) in a.iter().enumerate() {
            c[k] += x;
            c[k + 1] -= x;
        }
        let name = a
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(k, &x)| if x == 1.0 { format!("alpha{}", k + 1) } else { format!("{x}*alpha{}", k + 1) })
            .collect::<Vec<_>>()
            .join("+");
        Functional { name, coeffs: c }
    }

    /// `sum a_k omega_k`.
    pub fn from_omega(a: &[f64]) -> Self {
        let d = a.len() + 1;
        let mut c = vec![0.0; d];
        for (k, &x) in a.iter().enumerate() {
            for ci in c.iter_mut().take(k + 1) {
                *ci += x;
            }
        }
        let name = a
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(k, &x)| if x == 1.0 { format!("omega{}", k + 1) } else { format!("{x}*omega{}", k + 1) })
            .collect::<Vec<_>>()
            .join("+");
        Functional { name, coeffs: c }
    }

    pub fn alpha(k: usize, d: usize) -> Self {
        let mut a = vec![0.0; d - 1];
        a[k - 1] = 1.0;
        Self::from_alpha(&a)
    }

    pub fn omega(k: usize, d: usize) -> Self {
        let mut a = vec![0.0; d - 1];
        a[k - 1] = 1.0;
        Self::from_omega(&a)
    }

    /// Hilbert length `omega_1 + omega_{d-1} = a_1 - a_d`.
    pub fn hilbert(d: usize) -> Self {
        let mut c = vec![0.0; d];
        c[0] = 1.0;
        c[d - 1] -= 1.0;
        Functional {
            name: "hilbert".into(),
            coeffs: c,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn apply(&self, v: &CartanVector) -> f64 {
        self.coeffs.iter().zip(&v.0).map(|(c, x)| c * x).sum()
    }

    /// Value on `(d-1-2j)_j`, the direction of every cocycle value of a
    /// symmetric power.
    pub fn sym_weight(&self) -> f64 {
        let d = self.dim();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * (d as f64 - 1.0 - 2.0 * j as f64))
            .sum()
    }
}

pub fn to_matrix(m: &Matrix2<f64>) -> Matrix {
    Matrix::from_fn(2, 2, |i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn projection_examples() {
        let (l, k) = projections(&m(&[&[2.0, 0.0], &[0.0, 0.5]])).unwrap();
        assert!((l.0[0] - 2f64.ln()).abs() < 1e-14 && (k.0[0] - 2f64.ln()).abs() < 1e-14);
        let (l, k) = projections(&m(&[&[2.0, 1.0], &[0.0, 0.5]])).unwrap();
        assert!((l.0[0] - 2f64.ln()).abs() < 1e-12);
        // sigma_1^2 is the larger root of mu + 1/mu = tr(A A^T) = 5.25.
        let mu = (5.25 + (5.25f64 * 5.25 - 4.0).sqrt()) / 2.0;
        assert!((k.0[0] - 0.5 * mu.ln()).abs() < 1e-12);
        let (l, k) = projections(&Matrix::identity(3, 3)).unwrap();
        assert!(l.norm() < 1e-15 && k.norm() < 1e-15);
        assert!(matches!(
            projections(&m(&[&[2.0, 0.0], &[0.0, 2.0]])),
            Err(Error::NumericallySingular(_))
        ));
    }

    #[test]
    fn cocycle_examples() {
        let t = 0.7f64;
        let b = iwasawa_cocycle(&m(&[&[t.exp(), 0.0], &[0.0, (-t).exp()]]), &Flag::standard(2)).unwrap();
        assert!((b.0[0] - t).abs() < 1e-14 && (b.0[1] + t).abs() < 1e-14);
        let f = veronese_flag([0.3, 0.8], 3);
        assert!(iwasawa_cocycle(&Matrix::identity(3, 3), &f).unwrap().norm() < 1e-14);
    }

    #[test]
    fn sym_power_examples() {
        let s = sym_power(&Matrix2::new(2.0, 0.0, 0.0, 0.5), 3);
        let want = m(&[&[4.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.25]]);
        assert!((s - want).amax() < 1e-14);
        let u = sym_power(&Matrix2::new(1.0, 1.0, 0.0, 1.0), 3) - Matrix::identity(3, 3);
        assert!((&u * &u).amax() > 0.1);
        assert!((&u * &u * &u).amax() < 1e-14);
        let h = Matrix2::new(2.0, 1.0, 1.0, 1.0);
        let l = jordan_projection(&sym_power(&h, 3)).unwrap();
        let t = 2.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((l.alpha(1) - t).abs() < 1e-9 && (l.alpha(2) - t).abs() < 1e-9);
        // Rotations act orthogonally in the rescaled basis.
        let r = sym_power(&Matrix2::new(0.6, -0.8, 0.8, 0.6), 4);
        assert!((r.transpose() * &r - Matrix::identity(4, 4)).amax() < 1e-14);
    }

    #[test]
    fn functionals() {
        let v = CartanVector(vec![3.0, 1.0, -4.0]);
        assert_eq!(Functional::alpha(2, 3).apply(&v), 5.0);
        assert_eq!(Functional::omega(2, 3).apply(&v), 4.0);
        assert_eq!(Functional::hilbert(3).apply(&v), 7.0);
        assert_eq!(Functional::from_alpha(&[1.0, 1.0]).apply(&v), 7.0);
        assert_eq!(Functional::from_alpha(&[1.0, 1.0]).sym_weight(), 4.0);
    }
}
