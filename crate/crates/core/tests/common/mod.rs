#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use oblique_pursuit::{AtomFamily, SpaceSpec};
use rand::Rng;

pub fn euclid(n: usize) -> Arc<SpaceSpec> {
    Arc::new(SpaceSpec::euclidean((0..n).map(|i| i as f64).collect()).unwrap())
}

/// Trapezoid space on `[0, 1]` with `n` samples.
pub fn quad(n: usize) -> Arc<SpaceSpec> {
    Arc::new(SpaceSpec::trapezoid(0.0, 1.0, 1.0 / (n - 1) as f64).unwrap())
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub struct Toy {
    pub space: Arc<SpaceSpec>,
    pub v: AtomFamily,
    pub wperp: AtomFamily,
}

/// Independent random atoms; `V` and `W⊥` generic, hence well separated.
pub fn well_conditioned(rng: &mut impl Rng, space: Arc<SpaceSpec>, m: usize, p: usize) -> Toy {
    let n = space.len();
    let v = AtomFamily::new(space.clone(), random_matrix(rng, n, m)).unwrap();
    let wperp = AtomFamily::new(space.clone(), random_matrix(rng, n, p)).unwrap();
    Toy { space, v, wperp }
}

/// `m` atoms inside a random `d`-dimensional subspace (redundant when
/// `m > d`), with noise atoms leaning towards that subspace.
pub fn redundant_coupled(
    rng: &mut impl Rng,
    space: Arc<SpaceSpec>,
    d: usize,
    m: usize,
    p: usize,
    coupling: f64,
) -> Toy {
    let n = space.len();
    let frame = random_matrix(rng, n, d);
    let v = &frame * random_matrix(rng, d, m);
    let y = &frame * random_matrix(rng, d, p) * coupling + random_matrix(rng, n, p);
    Toy {
        v: AtomFamily::new(space.clone(), v).unwrap(),
        wperp: AtomFamily::new(space.clone(), y).unwrap(),
        space,
    }
}

/// `⟨a_i, b_j⟩` through the space weights, computed directly.
pub fn weighted_gram(space: &SpaceSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let w: Vec<f64> = match space.weights() {
        Some(w) => w.to_vec(),
        None => vec![1.0; space.len()],
    };
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        (0..a.nrows()).map(|k| w[k] * a[(k, i)] * b[(k, j)]).sum()
    })
}

pub fn ip(space: &SpaceSpec, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let w = space.weights();
    (0..a.len())
        .map(|k| w.map_or(1.0, |w| w[k]) * a[k] * b[k])
        .sum()
}

pub fn nrm(space: &SpaceSpec, a: &DVector<f64>) -> f64 {
    ip(space, a, a).sqrt()
}

/// `u_i = v_i − P_{W⊥} v_i` by normal equations on the raw noise atoms.
pub fn complement_oracle(toy: &Toy) -> DMatrix<f64> {
    let y = toy.wperp.atoms();
    let v = toy.v.atoms();
    if y.ncols() == 0 {
        return v.clone();
    }
    let gyy = weighted_gram(&toy.space, y, y);
    let gyv = weighted_gram(&toy.space, y, v);
    let coef = gyy.lu().solve(&gyv).unwrap();
    v - y * coef
}

/// Orthogonal projection onto the span of the columns of `a` by normal
/// equations.
pub fn span_projection(space: &SpaceSpec, a: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(f.len());
    }
    let g = weighted_gram(space, a, a);
    let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
    let b = weighted_gram(space, a, &fm);
    let c = g.lu().solve(&b).unwrap();
    (a * c).column(0).into_owned()
}

pub fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Dual vectors `w = U_S (U_Sᵀ U_S)^{-1}` of the selected complement atoms.
pub fn batch_measurement(space: &SpaceSpec, u: &DMatrix<f64>, sel: &[usize]) -> Vec<DVector<f64>> {
    let us = columns(u, sel);
    let g = weighted_gram(space, &us, &us);
    let inv = g.try_inverse().unwrap();
    let w = us * inv;
    (0..sel.len()).map(|i| w.column(i).into_owned()).collect()
}

/// `‖P_W f − P_{W_S} f‖` with `W = span u`, `W_S = span u_S`.
pub fn support_objective(space: &SpaceSpec, u: &DMatrix<f64>, f: &DVector<f64>, sel: &[usize]) -> f64 {
    let target = span_projection(space, u, f);
    let part = span_projection(space, &columns(u, sel), f);
    nrm(space, &(target - part))
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Independent random atoms whose noise atoms are `V`-combinations plus a
/// perturbation of size `delta`: `V` and `W⊥` nearly intersect.
pub fn coupled_independent(rng: &mut impl Rng, space: Arc<SpaceSpec>, m: usize, p: usize, delta: f64) -> Toy {
    let n = space.len();
    let v = random_matrix(rng, n, m);
    let y = &v * random_matrix(rng, m, p) + random_matrix(rng, n, p) * delta;
    Toy {
        v: AtomFamily::new(space.clone(), v).unwrap(),
        wperp: AtomFamily::new(space.clone(), y).unwrap(),
        space,
    }
}
