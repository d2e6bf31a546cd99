//! Oblique projection onto `V` along `W⊥`.
//!
//! With `u_i = v_i − P_{W⊥} v_i` spanning `W`, the projector is
//! `E = Σ_i v_i ⟨w_i, ·⟩ = Σ_n η_n ⟨ξ_n, ·⟩`, where `ψ_n`, `σ_n` come from the
//! singular system of the cross Gram matrix, `ξ_n = Ŵψ_n/σ_n` is an
//! orthonormal basis of `W` and `η_n = V̂ψ_n/σ_n` its biorthogonal partner
//! in `V`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::hilbert::{
    orthonormalize, project_unchecked, remove_component, AtomFamily, SpaceSpec, DEFAULT_RANK_TOL,
};

/// Relative eigenvalue cut `λ_n > eig_tol · λ_1` used for the pseudo-inverse.
pub const DEFAULT_EIG_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorTolerances {
    /// Orthonormalization / intersection threshold (relative residual norm).
    pub rank_tol: f64,
    /// Relative eigenvalue threshold of the Gram pseudo-inverse.
    pub eig_tol: f64,
}

impl Default for ProjectorTolerances {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            eig_tol: DEFAULT_EIG_TOL,
        }
    }
}

/// Builds `u_i = v_i − P_{W⊥} v_i` and an orthonormal basis of `W⊥`.
pub fn complement_family(
    v_family: &AtomFamily,
    wperp_raw: &AtomFamily,
    rank_tol: f64,
) -> Result<(AtomFamily, AtomFamily)> {
    if !v_family.same_space(wperp_raw) {
        return Err(Error::SpaceMismatch);
    }
    if v_family.is_empty() {
        return Err(Error::InvalidArgument("signal family has no atoms".into()));
    }
    let space = v_family.space().clone();
    let v_norms = v_family.norms();
    if let Some(index) = v_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateAtom { index });
    }
    let wperp_basis = if wperp_raw.is_empty() {
        AtomFamily::empty(space.clone())
    } else {
        orthonormalize(wperp_raw, rank_tol)?.basis
    };

    let mut u = v_family.atoms().clone();
    remove_component(&wperp_basis, &mut u);
    remove_component(&wperp_basis, &mut u);
    let u_family = AtomFamily::new(space, u)?;
    for (index, (un, vn)) in u_family.norms().into_iter().zip(&v_norms).enumerate() {
        if un < rank_tol * vn {
            return Err(Error::SubspacesIntersect {
                index,
                relative_norm: un / vn,
            });
        }
    }
    Ok((u_family, wperp_basis))
}

/// Orthonormal basis of `span{u_i}` with residual `W⊥` content removed.
fn w_basis(u_family: &AtomFamily, wperp_basis: &AtomFamily, rank_tol: f64) -> Result<AtomFamily> {
    let first = orthonormalize(u_family, rank_tol)?;
    if wperp_basis.is_empty() || first.rank == 0 {
        return Ok(first.basis);
    }
    let mut q = first.basis.atoms().clone();
    remove_component(wperp_basis, &mut q);
    let cleaned = AtomFamily::new(u_family.space().clone(), q)?;
    Ok(orthonormalize(&cleaned, rank_tol)?.basis)
}

/// The families that define a splitting problem, with the derived `u_i`,
/// `W⊥` basis and `W` basis cached for repeated use.
#[derive(Debug, Clone)]
pub struct SplittingProblem {
    v: AtomFamily,
    u: AtomFamily,
    wperp: AtomFamily,
    w: AtomFamily,
    rank_tol: f64,
}

impl SplittingProblem {
    pub fn new(v_family: AtomFamily, wperp_raw: &AtomFamily, rank_tol: f64) -> Result<Self> {
        let (u, wperp) = complement_family(&v_family, wperp_raw, rank_tol)?;
        let w = w_basis(&u, &wperp, rank_tol)?;
        Ok(Self {
            v: v_family,
            u,
            wperp,
            w,
            rank_tol,
        })
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        self.v.space()
    }

    pub fn v(&self) -> &AtomFamily {
        &self.v
    }

    pub fn u(&self) -> &AtomFamily {
        &self.u
    }

    /// Orthonormal basis of `W⊥`.
    pub fn wperp_basis(&self) -> &AtomFamily {
        &self.wperp
    }

    /// Orthonormal basis of `W = span{u_i}`.
    pub fn w_basis(&self) -> &AtomFamily {
        &self.w
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn project_wperp(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.space().check_len(f.len())?;
        Ok(project_unchecked(&self.wperp, f.as_slice()))
    }

    /// `P_W f`, evaluated as `P_W (f − P_{W⊥} f)`.
    pub fn project_w(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let g = f - self.project_wperp(f)?;
        Ok(project_unchecked(&self.w, g.as_slice()))
    }
}

/// Full singular-system representation of the oblique projector.
#[derive(Debug, Clone)]
pub struct ObliqueProjector {
    v: AtomFamily,
    u: AtomFamily,
    wperp: AtomFamily,
    psi: DMatrix<f64>,
    sigma: Vec<f64>,
    xi: AtomFamily,
    eta: AtomFamily,
}

impl ObliqueProjector {
    pub fn build(
        v_family: &AtomFamily,
        wperp_raw: &AtomFamily,
        tol: &ProjectorTolerances,
    ) -> Result<Self> {
        let problem = SplittingProblem::new(v_family.clone(), wperp_raw, tol.rank_tol)?;
        Self::from_problem(&problem, tol.eig_tol)
    }

    /// Builds from the singular system of `G = (⟨q_i, v_j⟩)`, `q_i` an
    /// orthonormal basis of `W`. `G*G` equals the Gram matrix of the `u_i`,
    /// so the right singular vectors are the `ψ_n` and `ξ_n = Σ_i q_i l_n(i)`.
    pub fn from_problem(problem: &SplittingProblem, eig_tol: f64) -> Result<Self> {
        check_eig_tol(eig_tol)?;
        let space = problem.space().clone();
        let q = problem.w_basis();
        if q.is_empty() {
            return Err(Error::DegenerateSubspace);
        }
        let g = space.cross_gram(q.atoms(), problem.v().atoms());
        let svd = SVD::new(g, true, true);
        let left = svd.u.expect("left singular vectors requested");
        let right_t = svd.v_t.expect("right singular vectors requested");
        let values = svd.singular_values;

        let order = descending_order(values.as_slice());
        let top = values[order[0]];
        if !(top > 0.0) {
            return Err(Error::DegenerateSubspace);
        }
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&k| values[k] * values[k] > eig_tol * top * top)
            .collect();

        let m = problem.v().len();
        let mut psi = DMatrix::zeros(m, kept.len());
        let mut left_kept = DMatrix::zeros(left.nrows(), kept.len());
        let mut sigma = Vec::with_capacity(kept.len());
        for (col, &k) in kept.iter().enumerate() {
            let mut p = right_t.row(k).transpose();
            let mut l = left.column(k).into_owned();
            if sign_flip(p.as_slice()) {
                p.neg_mut();
                l.neg_mut();
            }
            psi.set_column(col, &p);
            left_kept.set_column(col, &l);
            sigma.push(values[k]);
        }
        let xi = q.atoms() * &left_kept;
        Self::assemble(problem, psi, sigma, xi)
    }

    /// Builds from the eigendecomposition of the Hermitian Gram matrix of
    /// the `u_i` directly, with `ξ_n = Ŵψ_n/σ_n`.
    pub fn from_gram_eigen(problem: &SplittingProblem, eig_tol: f64) -> Result<Self> {
        check_eig_tol(eig_tol)?;
        let space = problem.space().clone();
        let u = problem.u();
        let gram = space.cross_gram(u.atoms(), u.atoms());
        let eig = SymmetricEigen::new(gram);
        let order = descending_order(eig.eigenvalues.as_slice());
        let top = eig.eigenvalues[order[0]];
        if !(top > 0.0) {
            return Err(Error::DegenerateSubspace);
        }
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&k| eig.eigenvalues[k] > eig_tol * top)
            .collect();
        let m = u.len();
        let mut psi = DMatrix::zeros(m, kept.len());
        let mut sigma = Vec::with_capacity(kept.len());
        for (col, &k) in kept.iter().enumerate() {
            let mut p = eig.eigenvectors.column(k).into_owned();
            if sign_flip(p.as_slice()) {
                p.neg_mut();
            }
            psi.set_column(col, &p);
            sigma.push(eig.eigenvalues[k].sqrt());
        }
        let mut xi = u.atoms() * &psi;
        for (mut c, s) in xi.column_iter_mut().zip(&sigma) {
            c.scale_mut(1.0 / s);
        }
        Self::assemble(problem, psi, sigma, xi)
    }

    fn assemble(
        problem: &SplittingProblem,
        psi: DMatrix<f64>,
        sigma: Vec<f64>,
        xi: DMatrix<f64>,
    ) -> Result<Self> {
        let space = problem.space().clone();
        let mut eta = problem.v().atoms() * &psi;
        for (mut c, s) in eta.column_iter_mut().zip(&sigma) {
            c.scale_mut(1.0 / s);
        }
        Ok(Self {
            v: problem.v().clone(),
            u: problem.u().clone(),
            wperp: problem.wperp_basis().clone(),
            psi,
            sigma,
            xi: AtomFamily::new(space.clone(), xi)?,
            eta: AtomFamily::new(space, eta)?,
        })
    }

    pub fn v_family(&self) -> &AtomFamily {
        &self.v
    }

    pub fn u_family(&self) -> &AtomFamily {
        &self.u
    }

    pub fn wperp_basis(&self) -> &AtomFamily {
        &self.wperp
    }

    /// `M × N`, column `n` is `ψ_n`.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Singular values in descending order.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn xi(&self) -> &AtomFamily {
        &self.xi
    }

    pub fn eta(&self) -> &AtomFamily {
        &self.eta
    }

    /// Numerical rank `N`.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `⟨ξ_n, f⟩` for every `n`.
    pub fn xi_coefficients(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        self.v.space().check_len(f.len())?;
        Ok(self.v.space().correlations(self.xi.atoms(), f.as_slice()))
    }

    /// `Σ_n η_n ⟨ξ_n, f⟩`.
    pub fn apply(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.xi_coefficients(f)?;
        Ok(self.eta.atoms() * c)
    }

    /// Dual vectors `w_i = Σ_n ξ_n σ_n⁻¹ ψ_n(i)*`, so that `E = Σ_i v_i⟨w_i, ·⟩`.
    pub fn measurement_vectors(&self) -> AtomFamily {
        let mut scaled = self.psi.transpose();
        for (n, s) in self.sigma.iter().enumerate() {
            scaled.row_mut(n).scale_mut(1.0 / s);
        }
        AtomFamily::from_parts(self.v.space().clone(), self.xi.atoms() * scaled)
    }

    pub fn truncate(&self, r: usize) -> Result<TruncatedProjector<'_>> {
        if r == 0 || r > self.rank() {
            return Err(Error::TruncationOutOfRange {
                requested: r,
                rank: self.rank(),
            });
        }
        Ok(TruncatedProjector { parent: self, r })
    }

    /// Largest principal angle between `V` and `W` (radians).
    pub fn min_angle(&self) -> Result<f64> {
        let qv = orthonormalize(&self.v, DEFAULT_RANK_TOL)?.basis;
        let c = self.v.space().cross_gram(qv.atoms(), self.xi.atoms());
        let s = c.singular_values();
        let smallest = s.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(smallest.clamp(0.0, 1.0).acos())
    }
}

/// Leading `r` terms of the singular expansion: `Σ_{n≤r} η_n ⟨ξ_n, ·⟩`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedProjector<'a> {
    parent: &'a ObliqueProjector,
    r: usize,
}

impl TruncatedProjector<'_> {
    pub fn terms(&self) -> usize {
        self.r
    }

    pub fn apply(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.parent.xi_coefficients(f)?;
        let eta = self.parent.eta.atoms().columns(0, self.r);
        Ok(eta * c.rows(0, self.r))
    }
}

fn check_eig_tol(eig_tol: f64) -> Result<()> {
    if !(eig_tol > 0.0 && eig_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("eig_tol must be in (0, 1), got {eig_tol}")));
    }
    Ok(())
}

/// Indices sorted by descending value, ties kept in index order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Sign convention: the largest-magnitude entry (first on ties) is positive.
fn sign_flip(p: &[f64]) -> bool {
    let mut best = 0;
    for (i, x) in p.iter().enumerate() {
        if x.abs() > p[best].abs() {
            best = i;
        }
    }
    p.get(best).is_some_and(|x| *x < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn r2() -> Arc<SpaceSpec> {
        Arc::new(SpaceSpec::euclidean(vec![0.0, 1.0]).unwrap())
    }

    fn fam(space: &Arc<SpaceSpec>, cols: &[&[f64]]) -> AtomFamily {
        let n = space.len();
        AtomFamily::new(
            space.clone(),
            DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]),
        )
        .unwrap()
    }

    #[test]
    fn empty_wperp_leaves_atoms_unchanged() {
        let s = r2();
        let v = fam(&s, &[&[1.0, 2.0]]);
        let (u, wp) = complement_family(&v, &AtomFamily::empty(s), 1e-10).unwrap();
        assert_eq!(u.atoms(), v.atoms());
        assert!(wp.is_empty());
    }

    #[test]
    fn orthogonal_wperp_leaves_atoms_unchanged() {
        let s = r2();
        let (u, _) = complement_family(&fam(&s, &[&[1.0, 0.0]]), &fam(&s, &[&[0.0, 1.0]]), 1e-10)
            .unwrap();
        assert_eq!(u.atom(0), &[1.0, 0.0]);
    }

    #[test]
    fn hand_projection_of_complement() {
        let s = r2();
        let (u, _) = complement_family(
            &fam(&s, &[&[1.0, 0.0]]),
            &fam(&s, &[&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]]),
            1e-10,
        )
        .unwrap();
        assert!((u.atom(0)[0] - 0.5).abs() < 1e-15);
        assert!((u.atom(0)[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn intersecting_subspaces_are_detected() {
        let s = r2();
        let err = complement_family(&fam(&s, &[&[1.0, 1.0]]), &fam(&s, &[&[2.0, 2.0]]), 1e-10)
            .unwrap_err();
        assert!(matches!(err, Error::SubspacesIntersect { index: 0, .. }));
    }

    #[test]
    fn zero_signal_atom_is_rejected() {
        let s = r2();
        let err = complement_family(&fam(&s, &[&[1.0, 0.0], &[0.0, 0.0]]), &AtomFamily::empty(s), 1e-10)
            .unwrap_err();
        assert_eq!(err, Error::DegenerateAtom { index: 1 });
    }

    #[test]
    fn two_dimensional_hand_case() {
        let s = r2();
        let p = ObliqueProjector::build(
            &fam(&s, &[&[1.0, 0.0]]),
            &fam(&s, &[&[1.0, 1.0]]),
            &ProjectorTolerances::default(),
        )
        .unwrap();
        let e = p.apply(&DVector::from_vec(vec![2.0, 1.0])).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && e[1].abs() < 1e-12, "{e}");
        assert!((p.min_angle().unwrap() - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_case_has_unit_spectrum() {
        let s = Arc::new(SpaceSpec::euclidean((0..4).map(f64::from).collect()).unwrap());
        let v = AtomFamily::new(s.clone(), DMatrix::identity(4, 2)).unwrap();
        let p = ObliqueProjector::build(&v, &AtomFamily::empty(s), &ProjectorTolerances::default())
            .unwrap();
        assert_eq!(p.rank(), 2);
        for sg in p.sigma() {
            assert!((sg - 1.0).abs() < 1e-12);
        }
        let w = p.measurement_vectors();
        assert!((w.atoms() - v.atoms()).abs().max() < 1e-12);
        // ξ and η span the same plane as v; with equal singular values the
        // individual vectors are only defined up to rotation, so compare
        // the projector action.
        let f = DVector::from_vec(vec![1.0, -2.0, 3.0, 4.0]);
        let e = p.apply(&f).unwrap();
        assert!((e - DVector::from_vec(vec![1.0, -2.0, 0.0, 0.0])).abs().max() < 1e-12);
    }

    #[test]
    fn identical_and_orthogonal_angles() {
        let s = r2();
        let same = ObliqueProjector::build(
            &fam(&s, &[&[1.0, 0.0]]),
            &AtomFamily::empty(s.clone()),
            &ProjectorTolerances::default(),
        )
        .unwrap();
        assert!(same.min_angle().unwrap().abs() < 1e-7);

        // V = span{e1}, W = span{e2} cannot come from a complement, so check
        // the angle helper on a projector whose ξ is replaced by e2.
        let mut orth = same.clone();
        orth.xi = fam(&s, &[&[0.0, 1.0]]);
        assert!((orth.min_angle().unwrap() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn truncation_range_is_checked() {
        let s = r2();
        let p = ObliqueProjector::build(
            &fam(&s, &[&[1.0, 0.0]]),
            &AtomFamily::empty(s),
            &ProjectorTolerances::default(),
        )
        .unwrap();
        assert!(p.truncate(0).is_err());
        assert!(p.truncate(2).is_err());
        assert!(p.truncate(1).is_ok());
    }

    #[test]
    fn ordering_is_stable_on_ties() {
        assert_eq!(descending_order(&[1.0, 3.0, 3.0, 2.0]), vec![1, 2, 3, 0]);
    }
}
