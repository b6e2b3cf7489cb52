//! Reduction of a linear system model to its cavity eigenbasis and first-order
//! classification of each mechanical coordinate.
//!
//! In the eigenbasis of `H0` every coupling coefficient `H̃_j = V† H_j V` splits into entries
//! inside a degenerate cluster, which shift eigenfrequencies (dispersive), and entries
//! between clusters, which rotate the eigenmodes without shifting them (coherent). The
//! decay rates of the eigenmodes are the row norms of `V(x)† Γ(x)`; their first derivative
//! is the dissipative part.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{hermitian_eigen, is_diagonal, max_abs};
use crate::system_model::{LinearSystemModel, ModelError};
use crate::CMatrix;

/// Relative degeneracy tolerance on eigenvalue gaps.
pub const DEGENERACY_RTOL: f64 = 1e-9;
/// Relative zero threshold for coupling entries.
pub const ZERO_RTOL: f64 = 1e-10;
/// Multiple of machine epsilon used for the eigenvector-conditioning floor.
const CONDITIONING_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("eigensolver did not converge on {matrix}")]
    EigensolverFailure { matrix: String },
    #[error("mechanical coordinate {index} out of range (model has {n_mech})")]
    CoordinateOutOfRange { index: usize, n_mech: usize },
}

/// Eigen-decomposition of `H0` with degenerate clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    /// Ascending eigenfrequencies, rad/s.
    pub eigvals: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigvecs: CMatrix,
    /// Index groups of (numerically) equal eigenvalues, in ascending order.
    pub clusters: Vec<Vec<usize>>,
    pub tol_deg: f64,
    /// True when `H0` was exactly diagonal and no eigensolver was involved.
    pub exact: bool,
}

impl EigenStructure {
    /// Cluster index of every mode.
    pub fn cluster_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.eigvals.len()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                out[i] = c;
            }
        }
        out
    }

    /// Smallest gap between distinct clusters.
    pub fn min_cluster_gap(&self) -> Option<f64> {
        self.clusters
            .windows(2)
            .map(|w| self.eigvals[w[1][0]] - self.eigvals[*w[0].last().expect("non-empty cluster")])
            .min_by(f64::total_cmp)
    }

    /// Relative floor below which coupling entries cannot be resolved, given the accuracy
    /// of numerically computed eigenvectors of nearly degenerate clusters.
    fn noise_floor(&self) -> f64 {
        if self.exact {
            return 0.0;
        }
        let scale = self.eigvals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        match self.min_cluster_gap() {
            Some(gap) if gap > 0.0 => CONDITIONING_FACTOR * f64::EPSILON * scale / gap,
            _ => 0.0,
        }
    }
}

pub fn diagonalize_unperturbed(model: &LinearSystemModel) -> Result<EigenStructure, ClassifyError> {
    let violations = model.violations();
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations).into());
    }
    let n = model.n_modes;
    let exact = is_diagonal(&model.h0);
    let (eigvals, eigvecs) = if exact {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| model.h0[(a, a)].re.total_cmp(&model.h0[(b, b)].re));
        let mut v = CMatrix::zeros(n, n);
        for (col, &row) in order.iter().enumerate() {
            v[(row, col)] = Complex64::new(1.0, 0.0);
        }
        (order.iter().map(|&i| model.h0[(i, i)].re).collect::<Vec<_>>(), v)
    } else {
        hermitian_eigen(&model.h0).ok_or_else(|| ClassifyError::EigensolverFailure { matrix: "H0".into() })?
    };
    let magnitude = eigvals.iter().fold(1.0_f64, |a: f64, v| a.max(v.abs()));
    let tol_deg = DEGENERACY_RTOL * magnitude;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match clusters.last_mut() {
            Some(last) if eigvals[i] - eigvals[*last.last().expect("non-empty")] <= tol_deg => last.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    Ok(EigenStructure {
        eigvals,
        eigvecs,
        clusters,
        tol_deg,
        exact,
    })
}

/// Dispersive / coherent / dissipative indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CouplingFlags {
    pub dispersive: bool,
    pub coherent: bool,
    pub dissipative: bool,
}

impl CouplingFlags {
    pub fn any(&self) -> bool {
        self.dispersive || self.coherent || self.dissipative
    }
}

/// First-order analysis of one mechanical coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateReport {
    pub label: String,
    /// `dω_i/dx`, rad/s per m.
    pub dispersive_shifts: Vec<f64>,
    /// Eigenmode rotation `f'` with `a(x) = (I + x f') a(0)`, per m. Zero on the diagonal and
    /// inside degenerate clusters.
    pub coherent_mixing: CMatrix,
    /// `d√(2γ_i)/dx`, √(rad/s) per m.
    pub dissipative_derivs: Vec<f64>,
    pub flags: CouplingFlags,
    /// `V† H_j V` in the basis used for this coordinate.
    pub omega_coefficient: CMatrix,
    /// Linear coefficient of `V(x)† Γ(x)`, including the mode rotation.
    pub gamma_coefficient: CMatrix,
    /// Basis (columns) the coordinate was analysed in.
    pub basis: CMatrix,
    /// The coordinate needed its own rotation of a degenerate cluster, different from the
    /// canonical basis.
    pub rotation_conflict: bool,
    /// Absolute zero thresholds applied to the frequency and decay-rate arrays.
    pub threshold: f64,
    pub gamma_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub eigvals: Vec<f64>,
    pub clusters: Vec<Vec<usize>>,
    pub tol_deg: f64,
    /// Canonical basis: eigenvectors of `H0`, refined inside degenerate clusters.
    pub basis: CMatrix,
    /// `V† Γ0`.
    pub gamma0: CMatrix,
    pub coordinates: Vec<CoordinateReport>,
}

impl ClassificationReport {
    /// Union of the per-coordinate flags.
    pub fn flags(&self) -> CouplingFlags {
        self.coordinates.iter().fold(CouplingFlags::default(), |acc, c| CouplingFlags {
            dispersive: acc.dispersive || c.flags.dispersive,
            coherent: acc.coherent || c.flags.coherent,
            dissipative: acc.dissipative || c.flags.dissipative,
        })
    }

    pub fn has_rotation_conflict(&self) -> bool {
        self.coordinates.iter().any(|c| c.rotation_conflict)
    }
}

fn block(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

fn block_off_diagonal(m: &CMatrix, idx: &[usize]) -> f64 {
    let mut worst = 0.0_f64;
    for &a in idx {
        for &b in idx {
            if a != b {
                worst = worst.max(m[(a, b)].norm());
            }
        }
    }
    worst
}

fn coordinate_threshold(model: &LinearSystemModel, eig: &EigenStructure, j: usize) -> f64 {
    max_abs(&model.hj[j]) * ZERO_RTOL.max(eig.noise_floor())
}

/// Rotate `basis` inside each group of `groups` so that `coefficient` becomes diagonal
/// there. Returns the refined groups: members with equal new diagonal entries stay together.
fn refine_groups(
    basis: &mut CMatrix,
    coefficient: &CMatrix,
    groups: &[Vec<usize>],
    threshold: f64,
) -> Result<Vec<Vec<usize>>, ClassifyError> {
    let mut out = Vec::new();
    for group in groups {
        if group.len() < 2 {
            out.push(group.clone());
            continue;
        }
        let h = basis.adjoint() * coefficient * &*basis;
        let shifts: Vec<f64> = if block_off_diagonal(&h, group) <= threshold {
            group.iter().map(|&i| h[(i, i)].re).collect()
        } else {
            let (values, rotation) = hermitian_eigen(&block(&h, group))
                .ok_or_else(|| ClassifyError::EigensolverFailure { matrix: "cluster block".into() })?;
            let cols = CMatrix::from_fn(basis.nrows(), group.len(), |r, c| basis[(r, group[c])]);
            let rotated = cols * rotation;
            for (c, &i) in group.iter().enumerate() {
                basis.set_column(i, &rotated.column(c));
            }
            values
        };
        // Split into runs of equal shifts (the block eigenvalues come out ascending).
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.sort_by(|&a, &b| shifts[a].total_cmp(&shifts[b]));
        let mut run: Vec<usize> = vec![group[order[0]]];
        for w in order.windows(2) {
            if shifts[w[1]] - shifts[w[0]] <= threshold {
                run.push(group[w[1]]);
            } else {
                out.push(std::mem::take(&mut run));
                run.push(group[w[1]]);
            }
        }
        out.push(run);
    }
    Ok(out)
}

fn analyze(
    model: &LinearSystemModel,
    eig: &EigenStructure,
    basis: CMatrix,
    j: usize,
    rotation_conflict: bool,
) -> CoordinateReport {
    let n = model.n_modes;
    let threshold = coordinate_threshold(model, eig, j);
    let h = basis.adjoint() * &model.hj[j] * &basis;
    let cluster = eig.cluster_of();
    let dispersive_shifts: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    let mut mixing = CMatrix::zeros(n, n);
    let mut cross = 0.0_f64;
    for i in 0..n {
        for l in 0..n {
            if cluster[i] != cluster[l] {
                mixing[(i, l)] = h[(i, l)] / (eig.eigvals[i] - eig.eigvals[l]);
                cross = cross.max(h[(i, l)].norm());
            }
        }
    }
    let g0 = basis.adjoint() * &model.gamma0;
    let gamma_coefficient = &mixing * &g0 + basis.adjoint() * &model.gammaj[j];
    let dissipative_derivs: Vec<f64> = (0..n)
        .map(|i| {
            let r0 = g0.row(i);
            let r1 = gamma_coefficient.row(i);
            let norm0 = r0.norm();
            if norm0 > 0.0 {
                r0.iter().zip(r1.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm0
            } else {
                r1.norm()
            }
        })
        .collect();
    let gamma_scale = max_abs(&model.gammaj[j]) + max_abs(&(&mixing * &g0));
    let gamma_threshold = gamma_scale * ZERO_RTOL.max(eig.noise_floor());
    let peak = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let flags = CouplingFlags {
        dispersive: peak(&dispersive_shifts) > threshold,
        coherent: cross > threshold,
        dissipative: peak(&dissipative_derivs) > gamma_threshold,
    };
    CoordinateReport {
        label: model.mech_labels.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)),
        dispersive_shifts,
        coherent_mixing: mixing,
        dissipative_derivs,
        flags,
        omega_coefficient: h,
        gamma_coefficient,
        basis,
        rotation_conflict,
        threshold,
        gamma_threshold,
    }
}

/// Analyse coordinate `j` on its own: degenerate clusters of `H0` are rotated to
/// diagonalize the corresponding blocks of `H_j`.
pub fn first_order_analysis(
    model: &LinearSystemModel,
    eig: &EigenStructure,
    j: usize,
) -> Result<CoordinateReport, ClassifyError> {
    if j >= model.n_mech {
        return Err(ClassifyError::CoordinateOutOfRange {
            index: j,
            n_mech: model.n_mech,
        });
    }
    let mut basis = eig.eigvecs.clone();
    refine_groups(&mut basis, &model.hj[j], &eig.clusters, coordinate_threshold(model, eig, j))?;
    Ok(analyze(model, eig, basis, j, false))
}

/// Canonical basis: clusters are refined by the first coordinate, and any degeneracy left
/// over by the following coordinates in order.
fn canonical_basis(model: &LinearSystemModel, eig: &EigenStructure) -> Result<CMatrix, ClassifyError> {
    let mut basis = eig.eigvecs.clone();
    let mut groups: Vec<Vec<usize>> = eig.clusters.iter().filter(|c| c.len() > 1).cloned().collect();
    for j in 0..model.n_mech {
        if groups.is_empty() {
            break;
        }
        groups = refine_groups(&mut basis, &model.hj[j], &groups, coordinate_threshold(model, eig, j))?;
        groups.retain(|g| g.len() > 1);
    }
    Ok(basis)
}

pub fn classify(model: &LinearSystemModel) -> Result<ClassificationReport, ClassifyError> {
    let eig = diagonalize_unperturbed(model)?;
    let basis = canonical_basis(model, &eig)?;
    let mut coordinates = Vec::with_capacity(model.n_mech);
    for j in 0..model.n_mech {
        let threshold = coordinate_threshold(model, &eig, j);
        let h = basis.adjoint() * &model.hj[j] * &basis;
        let conflict = eig
            .clusters
            .iter()
            .any(|c| c.len() > 1 && block_off_diagonal(&h, c) > threshold);
        if conflict {
            let mut own = basis.clone();
            refine_groups(&mut own, &model.hj[j], &eig.clusters, threshold)?;
            coordinates.push(analyze(model, &eig, own, j, true));
        } else {
            coordinates.push(analyze(model, &eig, basis.clone(), j, false));
        }
    }
    Ok(ClassificationReport {
        eigvals: eig.eigvals.clone(),
        clusters: eig.clusters.clone(),
        tol_deg: eig.tol_deg,
        gamma0: basis.adjoint() * &model.gamma0,
        basis,
        coordinates,
    })
}

/// Model re-expressed in its canonical eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    /// `H0` diagonal; `H_j`, `Γ` rotated into the basis.
    pub model: LinearSystemModel,
    /// Columns are the canonical modes in the original basis.
    pub basis: CMatrix,
    /// Per coordinate, the eigenmode rotation `f'` (`a(x) = (I + x f') a(0)`).
    pub mode_derivatives: Vec<CMatrix>,
    /// Per coordinate, `dω_i/dx`.
    pub frequency_derivatives: Vec<Vec<f64>>,
}

pub fn canonicalize(model: &LinearSystemModel) -> Result<CanonicalForm, ClassifyError> {
    let report = classify(model)?;
    let v = &report.basis;
    let vd = v.adjoint();
    let n = model.n_modes;
    let h0 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        report.eigvals.iter().map(|&w| Complex64::new(w, 0.0)),
    ));
    let canonical = LinearSystemModel {
        n_modes: n,
        n_mech: model.n_mech,
        h0,
        hj: model.hj.iter().map(|h| &vd * h * v).collect(),
        gamma0: &vd * &model.gamma0,
        gammaj: model.gammaj.iter().map(|g| &vd * g).collect(),
        mode_labels: (1..=n).map(|i| format!("mode{i}")).collect(),
        mech_labels: model.mech_labels.clone(),
    };
    let cluster = {
        let eig = diagonalize_unperturbed(model)?;
        eig.cluster_of()
    };
    let mut mode_derivatives = Vec::new();
    let mut frequency_derivatives = Vec::new();
    for h in &canonical.hj {
        let mut f = CMatrix::zeros(n, n);
        for i in 0..n {
            for l in 0..n {
                if cluster[i] != cluster[l] {
                    f[(i, l)] = h[(i, l)] / (report.eigvals[i] - report.eigvals[l]);
                }
            }
        }
        mode_derivatives.push(f);
        frequency_derivatives.push((0..n).map(|i| h[(i, i)].re).collect());
    }
    Ok(CanonicalForm {
        model: canonical.validate()?,
        basis: report.basis,
        mode_derivatives,
        frequency_derivatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::{coupled_cavity, ligo_arms, racetrack, three_mode};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn clusters_of_exact_degeneracy() {
        let m = LinearSystemModel::closed(
            CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(5.0, 0.0), c(7.0, 0.0), c(5.0, 0.0)])),
            vec![CMatrix::zeros(3, 3)],
        )
        .unwrap();
        let eig = diagonalize_unperturbed(&m).unwrap();
        assert_eq!(eig.eigvals, vec![5.0, 5.0, 7.0]);
        assert_eq!(eig.clusters, vec![vec![0, 1], vec![2]]);
        assert!(eig.exact);
        // Stable order: the two 5's keep their original relative order.
        assert_eq!(eig.eigvecs[(0, 0)], c(1.0, 0.0));
        assert_eq!(eig.eigvecs[(2, 1)], c(1.0, 0.0));
    }

    #[test]
    fn coupled_cavity_zeroth_order() {
        let (w1, w2, ws) = (1.0, 1.6, 0.5);
        let eig = diagonalize_unperturbed(&coupled_cavity(w1, w2, ws, 0.1, 0.2).unwrap()).unwrap();
        let r = (0.3_f64.powi(2) + ws * ws).sqrt();
        assert!((eig.eigvals[0] - (1.3 - r)).abs() < 1e-15);
        assert!((eig.eigvals[1] - (1.3 + r)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_pair_is_dispersive() {
        let g = 0.25;
        let rep = classify(&three_mode(3.0, 3.0, g).unwrap()).unwrap();
        let c0 = &rep.coordinates[0];
        assert!((c0.dispersive_shifts[0] + g).abs() < 1e-15 && (c0.dispersive_shifts[1] - g).abs() < 1e-15);
        assert!(max_abs(&c0.coherent_mixing) < 1e-15);
        assert_eq!(
            c0.flags,
            CouplingFlags {
                dispersive: true,
                coherent: false,
                dissipative: false
            }
        );
    }

    #[test]
    fn split_pair_is_coherent() {
        let (g, dw) = (0.25, 0.1);
        let rep = classify(&three_mode(3.0 - dw, 3.0 + dw, g).unwrap()).unwrap();
        let c0 = &rep.coordinates[0];
        assert_eq!(c0.dispersive_shifts, vec![0.0, 0.0]);
        let expected = -g / (2.0 * dw);
        assert!((c0.coherent_mixing[(0, 1)].re - expected).abs() < 1e-12 * expected.abs());
        assert!((c0.coherent_mixing[(1, 0)].re + expected).abs() < 1e-12 * expected.abs());
        assert!(c0.flags.coherent && !c0.flags.dispersive);
    }

    #[test]
    fn zero_coupling_has_no_flags() {
        let rep = classify(&three_mode(1.0, 2.0, 0.0).unwrap()).unwrap();
        assert!(!rep.flags().any());
        let rep = classify(&racetrack(1.0, 1e4, 0.0).unwrap()).unwrap();
        assert!(!rep.flags().any());
    }

    #[test]
    fn racetrack_is_dissipative_only() {
        let rep = classify(&racetrack(1.0, 1e4, 3.0).unwrap()).unwrap();
        let f = rep.flags();
        assert!(f.dissipative && !f.dispersive && !f.coherent);
        assert!((rep.coordinates[0].dissipative_derivs[0] - 3.0).abs() < 1e-15);
        // With no static leakage the derivative is the row norm of Γ1.
        let rep = classify(&racetrack(1.0, 0.0, 3.0).unwrap()).unwrap();
        assert_eq!(rep.coordinates[0].dissipative_derivs[0], 3.0);
    }

    #[test]
    fn ligo_arms_dispersive_for_both_coordinates() {
        let rep = classify(&ligo_arms(1.77e15, 1.77e15 / 4e3).unwrap()).unwrap();
        assert_eq!(rep.coordinates.len(), 2);
        for c in &rep.coordinates {
            assert!(c.flags.dispersive && !c.flags.coherent && !c.flags.dissipative);
            assert!(!c.rotation_conflict);
        }
    }

    #[test]
    fn conflicting_rotations_are_flagged() {
        let h0 = CMatrix::identity(2, 2);
        let sx = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let sz = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let m = LinearSystemModel::closed(h0, vec![sz, sx]).unwrap();
        let rep = classify(&m).unwrap();
        assert!(!rep.coordinates[0].rotation_conflict);
        assert!(rep.coordinates[1].rotation_conflict);
        let d = &rep.coordinates[1].dispersive_shifts;
        assert!((d[0] + 1.0).abs() < 1e-15 && (d[1] - 1.0).abs() < 1e-15);
        assert!(rep.has_rotation_conflict());
    }

    #[test]
    fn canonical_input_gives_identity_basis() {
        let m = coupled_cavity(1.0, 2.0, 0.0, 0.3, 0.4).unwrap();
        let form = canonicalize(&m).unwrap();
        assert_eq!(form.basis, CMatrix::identity(2, 2));
        let rep = classify(&m).unwrap();
        assert!(rep.flags().dispersive && !rep.flags().coherent);
    }

    #[test]
    fn out_of_range_coordinate() {
        let m = three_mode(1.0, 2.0, 0.1).unwrap();
        let eig = diagonalize_unperturbed(&m).unwrap();
        assert!(matches!(
            first_order_analysis(&m, &eig, 1),
            Err(ClassifyError::CoordinateOutOfRange { .. })
        ));
    }
}
