//! Sampled inner-product spaces.
//!
//! Signals are sample vectors over a fixed grid. A [`SpaceSpec`] carries the
//! grid and, for the quadrature kind, the per-sample weights that turn the
//! discrete sum into an approximation of `∫ f(x)* g(x) dx`. Scalars are real;
//! every formula below is written so that the first argument of an inner
//! product is the conjugated one.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual below which an atom is treated as numerically dependent.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Tolerance used when checking that a basis is orthonormal.
pub const ORTHONORMAL_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Quadrature,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    kind: SpaceKind,
    grid: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl SpaceSpec {
    /// Quadrature space with explicit weights.
    pub fn quadrature(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if weights.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpace(
                "quadrature weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            kind: SpaceKind::Quadrature,
            grid,
            weights: Some(weights),
        })
    }

    /// Composite trapezoid rule on a uniform grid over `[a, b]`.
    ///
    /// The number of intervals is `round((b - a) / step)`; the actual spacing
    /// is adjusted so that both end points are grid points.
    pub fn trapezoid(a: f64, b: f64, step: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidSpace(format!("bad interval [{a}, {b}]")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidSpace(format!("bad grid step {step}")));
        }
        let intervals = ((b - a) / step).round().max(1.0) as usize;
        let h = (b - a) / intervals as f64;
        let grid: Vec<f64> = (0..=intervals).map(|k| a + h * k as f64).collect();
        let mut weights = vec![h; intervals + 1];
        weights[0] = 0.5 * h;
        weights[intervals] = 0.5 * h;
        Self::quadrature(grid, weights)
    }

    /// Plain dot-product space over the given abscissae.
    pub fn euclidean(grid: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        Ok(Self {
            kind: SpaceKind::Euclidean,
            grid,
            weights: None,
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Mean grid spacing (1 for a single-point grid).
    pub fn step(&self) -> f64 {
        let n = self.grid.len();
        if n < 2 {
            1.0
        } else {
            (self.grid[n - 1] - self.grid[0]) / (n - 1) as f64
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// `⟨f, g⟩`, conjugate-linear in `f`.
    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(self.dot(f.as_slice(), g.as_slice()))
    }

    pub fn norm(&self, f: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }

    /// Unchecked inner product on raw sample slices of equal length.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), g.len());
        match &self.weights {
            Some(w) => f
                .iter()
                .zip(g)
                .zip(w)
                .map(|((a, b), w)| w * a * b)
                .sum(),
            None => f.iter().zip(g).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn norm_of(&self, f: &[f64]) -> f64 {
        self.dot(f, f).max(0.0).sqrt()
    }

    /// `rows^* diag(weights) cols` for column-stacked sample matrices.
    pub fn cross_gram(&self, rows: &DMatrix<f64>, cols: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(rows.nrows(), self.len());
        debug_assert_eq!(cols.nrows(), self.len());
        match &self.weights {
            Some(w) => {
                let mut weighted = cols.clone();
                for mut column in weighted.column_iter_mut() {
                    for (x, wk) in column.iter_mut().zip(w) {
                        *x *= wk;
                    }
                }
                rows.tr_mul(&weighted)
            }
            None => rows.tr_mul(cols),
        }
    }

    /// Inner products of every column of `atoms` with `f`.
    pub fn correlations(&self, atoms: &DMatrix<f64>, f: &[f64]) -> DVector<f64> {
        let weighted: DVector<f64> = match &self.weights {
            Some(w) => DVector::from_iterator(f.len(), f.iter().zip(w).map(|(a, b)| a * b)),
            None => DVector::from_column_slice(f),
        };
        atoms.tr_mul(&weighted)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidSpace("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpace("non-finite abscissa".into()));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidSpace("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Ordered collection of sampled atoms over a shared space, stored as the
/// columns of a `samples × atoms` matrix.
#[derive(Debug, Clone)]
pub struct AtomFamily {
    space: Arc<SpaceSpec>,
    atoms: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl AtomFamily {
    pub fn new(space: Arc<SpaceSpec>, atoms: DMatrix<f64>) -> Result<Self> {
        space.check_len(atoms.nrows())?;
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("atoms must be finite".into()));
        }
        Ok(Self {
            space,
            atoms,
            labels: None,
        })
    }

    pub fn from_columns(space: Arc<SpaceSpec>, columns: &[DVector<f64>]) -> Result<Self> {
        let n = space.len();
        for c in columns {
            space.check_len(c.len())?;
        }
        let atoms = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Self::new(space, atoms)
    }

    pub fn empty(space: Arc<SpaceSpec>) -> Self {
        let n = space.len();
        Self {
            space,
            atoms: DMatrix::zeros(n, 0),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn samples(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let n = self.atoms.nrows();
        &self.atoms.as_slice()[i * n..(i + 1) * n]
    }

    pub fn atom_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.atom(i))
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.space.norm_of(self.atom(i)))
            .collect()
    }

    /// Sub-family in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "atom index {bad} out of range 0..{}",
                self.len()
            )));
        }
        let atoms = self.atoms.select_columns(indices.iter());
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Ok(Self {
            space: self.space.clone(),
            atoms,
            labels,
        })
    }

    /// Every atom scaled to unit norm. Zero atoms are left untouched.
    pub fn normalized(&self) -> Self {
        let mut atoms = self.atoms.clone();
        for (j, norm) in self.norms().into_iter().enumerate() {
            if norm > 0.0 {
                atoms.column_mut(j).scale_mut(1.0 / norm);
            }
        }
        Self {
            space: self.space.clone(),
            atoms,
            labels: self.labels.clone(),
        }
    }

    /// `Σ_i coeffs_i · atom_i`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<DVector<f64>> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        Ok(&self.atoms * DVector::from_column_slice(coeffs))
    }

    pub fn same_space(&self, other: &AtomFamily) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    pub(crate) fn from_parts(space: Arc<SpaceSpec>, atoms: DMatrix<f64>) -> Self {
        debug_assert_eq!(atoms.nrows(), space.len());
        Self {
            space,
            atoms,
            labels: None,
        }
    }
}

/// Matrix of inner products `⟨row_i, col_j⟩`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub row_tag: Option<String>,
    pub col_tag: Option<String>,
}

impl GramMatrix {
    pub fn tagged(mut self, rows: &str, cols: &str) -> Self {
        self.row_tag = Some(rows.to_owned());
        self.col_tag = Some(cols.to_owned());
        self
    }
}

pub fn inner(f: &DVector<f64>, g: &DVector<f64>, space: &SpaceSpec) -> Result<f64> {
    space.inner(f, g)
}

pub fn gram(rows: &AtomFamily, cols: &AtomFamily) -> Result<GramMatrix> {
    if !rows.same_space(cols) {
        return Err(Error::SpaceMismatch);
    }
    Ok(GramMatrix {
        entries: rows.space.cross_gram(&rows.atoms, &cols.atoms),
        row_tag: None,
        col_tag: None,
    })
}

/// Result of [`orthonormalize`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub basis: AtomFamily,
    pub rank: usize,
    /// `M × rank` matrix with `q_k = Σ_i map[(i, k)] a_i`.
    pub map: DMatrix<f64>,
    /// Input indices that produced a basis vector, in order.
    pub kept: Vec<usize>,
}

/// Modified Gram–Schmidt with one full re-orthogonalization pass.
///
/// Atoms whose residual falls below `rank_tol` times the largest input atom
/// norm are dropped.
pub fn orthonormalize(family: &AtomFamily, rank_tol: f64) -> Result<Orthonormalized> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("cannot orthonormalize an empty family".into()));
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let space = family.space();
    let m = family.len();
    let n = family.samples();
    let largest = family.norms().into_iter().fold(0.0, f64::max);
    let threshold = rank_tol * largest;

    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut t_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();

    if largest > 0.0 {
        for k in 0..m {
            let mut v = family.atom(k).to_vec();
            let mut t = vec![0.0; m];
            t[k] = 1.0;
            for _pass in 0..2 {
                for (q, tq) in q_cols.iter().zip(&t_cols) {
                    let r = space.dot(q, &v);
                    for (x, qx) in v.iter_mut().zip(q) {
                        *x -= r * qx;
                    }
                    for (x, tx) in t.iter_mut().zip(tq) {
                        *x -= r * tx;
                    }
                }
            }
            let norm = space.norm_of(&v);
            if norm > threshold {
                let inv = 1.0 / norm;
                v.iter_mut().for_each(|x| *x *= inv);
                t.iter_mut().for_each(|x| *x *= inv);
                q_cols.push(v);
                t_cols.push(t);
                kept.push(k);
            }
        }
    }

    let rank = q_cols.len();
    let basis = DMatrix::from_fn(n, rank, |i, j| q_cols[j][i]);
    let map = DMatrix::from_fn(m, rank, |i, j| t_cols[j][i]);
    Ok(Orthonormalized {
        basis: AtomFamily::from_parts(space.clone(), basis),
        rank,
        map,
        kept,
    })
}

/// Largest entry of `|Gram(basis) − I|`.
pub fn orthonormality_defect(basis: &AtomFamily) -> f64 {
    let g = basis.space().cross_gram(basis.atoms(), basis.atoms());
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `Σ_i q_i ⟨q_i, f⟩` for an orthonormal basis.
pub fn project_orthogonal(basis: &AtomFamily, f: &DVector<f64>) -> Result<DVector<f64>> {
    basis.space().check_len(f.len())?;
    let deviation = orthonormality_defect(basis);
    if deviation > ORTHONORMAL_CHECK_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(project_unchecked(basis, f.as_slice()))
}

pub(crate) fn project_unchecked(basis: &AtomFamily, f: &[f64]) -> DVector<f64> {
    if basis.is_empty() {
        return DVector::zeros(f.len());
    }
    let c = basis.space().correlations(basis.atoms(), f);
    basis.atoms() * c
}

/// Removes from every column of `m` its projection onto the orthonormal `basis`.
pub(crate) fn remove_component(basis: &AtomFamily, m: &mut DMatrix<f64>) {
    if basis.is_empty() || m.ncols() == 0 {
        return;
    }
    let c = basis.space().cross_gram(basis.atoms(), m);
    m.gemm(-1.0, basis.atoms(), &c, 1.0);
}
