//! Dense linear-algebra helpers (Hermitian eigenproblems, SVD, Haar
//! unitaries) backed by nalgebra. Kernel-valued callers pass the quadrature
//! weight so eigenvalues come out in operator normalization.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use nalgebra::DMatrix;
use rand::Rng;

pub(crate) fn to_na(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Largest singular value of the raw matrix.
pub fn op_norm(a: &Array2<C64>) -> f64 {
    if a.iter().all(|z| z.norm_sqr() == 0.0) {
        return 0.0;
    }
    let m = to_na(a);
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian operator with kernel `a` and quadrature
/// weight `w` (the matrix form is w·a), ascending.
pub fn eigvalsh_scaled(a: &Array2<C64>, w: f64) -> Array1<f64> {
    let m = to_na(a) * C64::new(w, 0.0);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Array1::from(ev)
}

/// Full Hermitian eigendecomposition in operator normalization. Returns
/// (eigenvalues ascending, eigenvectors as columns of the matrix form).
pub fn eigh_scaled(a: &Array2<C64>, w: f64) -> (Array1<f64>, DMatrix<C64>) {
    let m = to_na(a) * C64::new(w, 0.0);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = m.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Hermitize the operator with kernel `a`, clip negative eigenvalues at 0,
/// and return the repaired kernel plus the largest clipped magnitude.
pub fn clip_psd_scaled(a: &Array2<C64>, w: f64) -> (Array2<C64>, f64) {
    let (vals, vecs) = eigh_scaled(a, w);
    let mut clipped = 0.0f64;
    let n = vals.len();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        let v = vals[i];
        if v < 0.0 {
            clipped = clipped.max(-v);
            d[(i, i)] = C64::new(0.0, 0.0);
        } else {
            d[(i, i)] = C64::new(v, 0.0);
        }
    }
    let mat = &vecs * d * vecs.adjoint();
    (from_na(&mat).mapv(|z| z / w), clipped)
}

/// Inverse of the Hermitian positive definite operator with kernel `a`;
/// returns the inverse in kernel normalization.
pub fn inv_hermitian_scaled(a: &Array2<C64>, w: f64) -> Array2<C64> {
    let (vals, vecs) = eigh_scaled(a, w);
    let n = vals.len();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        assert!(
            vals[i] > 0.0,
            "inv_hermitian: operator not positive definite (eig {} = {})",
            i,
            vals[i]
        );
        d[(i, i)] = C64::new(1.0 / vals[i], 0.0);
    }
    let mat = &vecs * d * vecs.adjoint();
    from_na(&mat).mapv(|z| z / w)
}

/// Haar-distributed unitary matrix (QR of a complex Ginibre sample with the
/// R-diagonal phases absorbed).
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> Array2<C64> {
    let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
        C64::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        ) / 2.0f64.sqrt()
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    from_na(&q)
}
