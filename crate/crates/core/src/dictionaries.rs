//! Atom families: cardinal B-splines, power-law and Gaussian backgrounds,
//! cosine vectors, and random sparse test signals.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hilbert::{AtomFamily, SpaceSpec};

const DIVISIBILITY_TOL: f64 = 1e-12;

/// Translated, dilated cardinal B-splines on `[a, b]`.
///
/// Atom `k` is `B((x − a − k·τ) / (s·h))` where `B` is the cardinal B-spline of
/// the given order with integer knots `0..=order`, `h` the knot spacing, `s`
/// the support scale and `τ` the translation step. Every atom whose support
/// meets the open interval is kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSpec {
    pub interval: (f64, f64),
    pub knot_spacing: f64,
    /// Number of knot intervals in the support (cubic = 4).
    pub order: usize,
    pub support_scale: usize,
    pub translation_step: f64,
}

impl SplineSpec {
    /// Cubic basis with knots at `a + k·h`.
    pub fn cubic_basis(a: f64, b: f64, knot_spacing: f64) -> Result<Self> {
        Self::dictionary(a, b, knot_spacing, 1, knot_spacing)
    }

    /// Cubic splines of support `4·scale·h` translated by `step`.
    pub fn dictionary(a: f64, b: f64, knot_spacing: f64, support_scale: usize, step: f64) -> Result<Self> {
        let spec = Self {
            interval: (a, b),
            knot_spacing,
            order: 4,
            support_scale,
            translation_step: step,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
        }
        if !(self.knot_spacing > 0.0 && self.knot_spacing.is_finite()) {
            return Err(Error::InvalidArgument("knot spacing must be positive".into()));
        }
        if !(self.translation_step > 0.0 && self.translation_step.is_finite()) {
            return Err(Error::InvalidArgument("translation step must be positive".into()));
        }
        if self.order == 0 || self.support_scale == 0 {
            return Err(Error::InvalidArgument("order and support scale must be at least 1".into()));
        }
        let ratio = (b - a) / self.knot_spacing;
        if (ratio - ratio.round()).abs() * self.knot_spacing > DIVISIBILITY_TOL * (b - a).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "knot spacing {} does not divide the interval length {}",
                self.knot_spacing,
                b - a
            )));
        }
        Ok(())
    }

    pub fn support_width(&self) -> f64 {
        self.order as f64 * self.support_scale as f64 * self.knot_spacing
    }

    /// Translation indices `k` of the atoms meeting `(a, b)`.
    pub fn shifts(&self) -> std::ops::RangeInclusive<i64> {
        let (a, b) = self.interval;
        let tau = self.translation_step;
        let eps = DIVISIBILITY_TOL * (b - a).max(1.0);
        // a + kτ + width > a  and  a + kτ < b
        let lo = (-(self.support_width() - eps) / tau).ceil() as i64;
        let lo = if lo as f64 * tau + self.support_width() <= eps { lo + 1 } else { lo };
        let hi = ((b - a - eps) / tau).floor() as i64;
        lo..=hi
    }

    pub fn count(&self) -> usize {
        let r = self.shifts();
        (r.end() - r.start() + 1).max(0) as usize
    }
}

/// Cardinal B-spline with knots `0, 1, …, order` by the Cox–de Boor recursion.
pub fn cardinal_bspline(order: usize, t: f64) -> f64 {
    if order == 0 || !(0.0..order as f64).contains(&t) {
        return 0.0;
    }
    if order == 1 {
        return 1.0;
    }
    let p = (order - 1) as f64;
    (t * cardinal_bspline(order - 1, t) + (order as f64 - t) * cardinal_bspline(order - 1, t - 1.0)) / p
}

/// Samples the atoms of `spec` on `space`. Atoms are raw recursion values,
/// not normalized.
pub fn bspline_family(spec: &SplineSpec, space: &Arc<SpaceSpec>) -> Result<AtomFamily> {
    spec.validate()?;
    let (a, b) = spec.interval;
    let grid = space.grid();
    let tol = 1e-9 * (b - a);
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if first > a + tol || last < b - tol {
        return Err(Error::InvalidArgument(format!(
            "grid [{first}, {last}] does not cover [{a}, {b}]"
        )));
    }
    let width = spec.support_scale as f64 * spec.knot_spacing;
    let shifts = spec.shifts();
    let n = spec.count();
    let mut atoms = DMatrix::zeros(grid.len(), n);
    let mut labels = Vec::with_capacity(n);
    for (col, k) in shifts.enumerate() {
        let start = a + k as f64 * spec.translation_step;
        for (row, &x) in grid.iter().enumerate() {
            atoms[(row, col)] = cardinal_bspline(spec.order, (x - start) / width);
        }
        labels.push(format!("B[{k}]"));
    }
    AtomFamily::new(space.clone(), atoms)?.with_labels(labels)
}

/// `y_i(x) = (x + 1)^(−0.05·i)`, `i = 1..=count`.
pub fn power_background(count: usize, space: &Arc<SpaceSpec>) -> Result<AtomFamily> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let grid = space.grid();
    if grid.iter().any(|&x| x <= -1.0) {
        return Err(Error::InvalidArgument("power background needs x > -1".into()));
    }
    let atoms = DMatrix::from_fn(grid.len(), count, |r, c| {
        (grid[r] + 1.0).powf(-0.05 * (c + 1) as f64)
    });
    let labels = (1..=count).map(|i| format!("y[{i}]")).collect();
    AtomFamily::new(space.clone(), atoms)?.with_labels(labels)
}

/// Euclidean `R^L` indexed by `j = 1..=L`.
pub fn euclidean_space(l: usize) -> Result<Arc<SpaceSpec>> {
    Ok(Arc::new(SpaceSpec::euclidean((1..=l).map(|j| j as f64).collect())?))
}

/// `v_i(j) = cos(π(2j − 1)(i − 1) / (2L))`, `i = 1..=m`, `j = 1..=L`.
pub fn cosine_family(l: usize, m: usize) -> Result<AtomFamily> {
    if m == 0 || m > l {
        return Err(Error::InvalidArgument(format!("need 1 <= M <= L, got M = {m}, L = {l}")));
    }
    let space = euclidean_space(l)?;
    let atoms = DMatrix::from_fn(l, m, |r, c| {
        let j = (r + 1) as f64;
        (std::f64::consts::PI * (2.0 * j - 1.0) * c as f64 / (2.0 * l as f64)).cos()
    });
    let labels = (1..=m).map(|i| format!("cos[{i}]")).collect();
    AtomFamily::new(space, atoms)?.with_labels(labels)
}

/// Abscissa used for the Gaussian bumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussianAbscissa {
    /// `x_j = j / L`.
    #[default]
    Scaled,
    /// `x_j = j`; every bump except the first few vanishes on the grid.
    Literal,
    /// `x_j = 0.005·count·j / L`: the grid spans every bump center.
    Covering,
}

/// `y_i(j) = exp(−35000 (x_j − 0.005·i)²)`, `i = 1..=count`.
pub fn gaussian_background(count: usize, l: usize, abscissa: GaussianAbscissa) -> Result<AtomFamily> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let space = euclidean_space(l)?;
    let atoms = DMatrix::from_fn(l, count, |r, c| {
        let j = (r + 1) as f64;
        let x = match abscissa {
            GaussianAbscissa::Scaled => j / l as f64,
            GaussianAbscissa::Literal => j,
            GaussianAbscissa::Covering => 0.005 * count as f64 * j / l as f64,
        };
        let d = x - 0.005 * (c + 1) as f64;
        (-35000.0 * d * d).exp()
    });
    let labels = (1..=count).map(|i| format!("g[{i}]")).collect();
    AtomFamily::new(space, atoms)?.with_labels(labels)
}

/// Coefficient distributions for random instances (uniform on each range).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffLaw {
    pub signal: (f64, f64),
    pub background: (f64, f64),
}

impl Default for CoeffLaw {
    fn default() -> Self {
        Self {
            signal: (-1.0, 1.0),
            background: (0.0, 1.0),
        }
    }
}

impl CoeffLaw {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("signal", self.signal), ("background", self.background)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad {name} coefficient range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Sorted atom indices.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `f1`.
    pub component: DVector<f64>,
    pub background_coeffs: Vec<f64>,
    /// `f2`.
    pub background: DVector<f64>,
}

fn draw(rng: &mut (impl Rng + ?Sized), (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Random `K`-sparse element of the span of `signal`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    /// Sorted atom indices.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub component: DVector<f64>,
}

/// Uniform random `K`-subset with coefficients uniform on `range`.
pub fn random_sparse_signal<R: Rng + ?Sized>(
    signal: &AtomFamily,
    k: usize,
    rng: &mut R,
    range: (f64, f64),
) -> Result<SparseSignal> {
    if k > signal.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the {} available atoms",
            signal.len()
        )));
    }
    CoeffLaw { signal: range, background: range }.validate()?;
    let mut support = index::sample(rng, signal.len(), k).into_vec();
    support.sort_unstable();
    let coefficients: Vec<f64> = support.iter().map(|_| draw(rng, range)).collect();
    let mut component = DVector::zeros(signal.samples());
    for (&i, &c) in support.iter().zip(&coefficients) {
        component.axpy(c, &signal.atom_vector(i), 1.0);
    }
    Ok(SparseSignal { support, coefficients, component })
}

/// Combination of every background atom with coefficients uniform on `range`.
pub fn random_background<R: Rng + ?Sized>(
    background: &AtomFamily,
    rng: &mut R,
    range: (f64, f64),
) -> Result<(Vec<f64>, DVector<f64>)> {
    CoeffLaw { signal: range, background: range }.validate()?;
    let coeffs: Vec<f64> = (0..background.len()).map(|_| draw(rng, range)).collect();
    let sum = if background.is_empty() {
        DVector::zeros(background.samples())
    } else {
        background.combine(&coeffs)?
    };
    Ok((coeffs, sum))
}

/// `f = Σ_{i∈S} c_i v_i + Σ_j b_j y_j` with a uniform random `K`-subset `S`.
pub fn random_instance<R: Rng + ?Sized>(
    signal: &AtomFamily,
    background: &AtomFamily,
    k: usize,
    rng: &mut R,
    law: &CoeffLaw,
) -> Result<(DVector<f64>, GroundTruth)> {
    if !signal.same_space(background) {
        return Err(Error::SpaceMismatch);
    }
    law.validate()?;
    let sparse = random_sparse_signal(signal, k, rng, law.signal)?;
    let (background_coeffs, bg) = random_background(background, rng, law.background)?;
    let f = &sparse.component + &bg;
    Ok((
        f,
        GroundTruth {
            support: sparse.support,
            coefficients: sparse.coefficients,
            component: sparse.component,
            background_coeffs,
            background: bg,
        },
    ))
}
