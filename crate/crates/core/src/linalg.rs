//! Small dense helpers shared by the classifier and the ring-cavity code.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::CMatrix;

/// Largest entry magnitude, `max |m_ij|`. Zero for an empty matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |m_ij - conj(m_ji)|`, the Hermiticity defect of a square matrix.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Embed a real matrix as a complex one.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Multiply each column by a unit phase so its largest-magnitude component is real and
/// positive. Components within a relative 1e-12 of the maximum count as ties and the first
/// one wins.
pub fn align_column_phases(v: &mut CMatrix) {
    for mut col in v.column_iter_mut() {
        let peak = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if peak == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .copied()
            .find(|z| z.norm() >= peak * (1.0 - 1e-12))
            .expect("peak component exists");
        let phase = pivot.conj() / pivot.norm();
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues and phase-aligned
/// eigenvectors. Returns `None` when the iterative solver does not converge.
///
/// The mean diagonal is removed before the solve so that a large common offset does not
/// swamp the splitting.
pub fn hermitian_eigen(m: &CMatrix) -> Option<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let shift = (0..n).map(|i| m[(i, i)].re).sum::<f64>() / n as f64;
    let mut centered = m.clone();
    for i in 0..n {
        centered[(i, i)] -= Complex64::new(shift, 0.0);
    }
    // Symmetrise so tiny Hermiticity defects do not leak into the solver.
    let centered = (centered.clone() + centered.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = centered.try_symmetric_eigen(f64::EPSILON, 10_000)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i] + shift).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    align_column_phases(&mut vectors);
    Some((values, vectors))
}

/// True when every off-diagonal entry is exactly zero.
pub fn is_diagonal(m: &CMatrix) -> bool {
    let (r, c) = m.shape();
    (0..r).all(|i| (0..c).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}
