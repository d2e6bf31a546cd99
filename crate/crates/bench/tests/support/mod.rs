//! Direct oracles: normal equations, Gram inverses and exhaustive search.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use oblique_pursuit::{AtomFamily, SpaceSpec};
use rand::Rng;

pub fn euclid(n: usize) -> Arc<SpaceSpec> {
    Arc::new(SpaceSpec::euclidean((0..n).map(|i| i as f64).collect()).unwrap())
}

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

pub fn well_conditioned(rng: &mut impl Rng, space: Arc<SpaceSpec>, m: usize, p: usize) -> Toy {
    let n = space.len();
    Toy {
        v: AtomFamily::new(space.clone(), random_matrix(rng, n, m)).unwrap(),
        wperp: AtomFamily::new(space.clone(), random_matrix(rng, n, p)).unwrap(),
        space,
    }
}

/// Noise atoms are `V`-combinations perturbed by `delta`, so `V` and `W⊥`
/// nearly intersect.
pub fn ill_conditioned(rng: &mut impl Rng, space: Arc<SpaceSpec>, m: usize, p: usize, delta: f64) -> Toy {
    let n = space.len();
    let v = random_matrix(rng, n, m);
    let y = &v * random_matrix(rng, m, p) + random_matrix(rng, n, p) * delta;
    Toy {
        v: AtomFamily::new(space.clone(), v).unwrap(),
        wperp: AtomFamily::new(space.clone(), y).unwrap(),
        space,
    }
}

pub fn weighted_gram(space: &SpaceSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let w: Vec<f64> = space.weights().map_or_else(|| vec![1.0; space.len()], |w| w.to_vec());
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| (0..a.nrows()).map(|k| w[k] * a[(k, i)] * b[(k, j)]).sum())
}

pub fn ip(space: &SpaceSpec, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let w = space.weights();
    (0..a.len()).map(|k| w.map_or(1.0, |w| w[k]) * a[k] * b[k]).sum()
}

pub fn nrm(space: &SpaceSpec, a: &DVector<f64>) -> f64 {
    ip(space, a, a).sqrt()
}

/// `v_i − P_{W⊥} v_i` from the raw noise atoms.
pub fn complement_oracle(toy: &Toy) -> DMatrix<f64> {
    let y = toy.wperp.atoms();
    let v = toy.v.atoms();
    if y.ncols() == 0 {
        return v.clone();
    }
    let coef = weighted_gram(&toy.space, y, y).lu().solve(&weighted_gram(&toy.space, y, v)).unwrap();
    v - y * coef
}

pub fn span_projection(space: &SpaceSpec, a: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(f.len());
    }
    let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
    let c = weighted_gram(space, a, a).lu().solve(&weighted_gram(space, a, &fm)).unwrap();
    (a * c).column(0).into_owned()
}

pub fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// `U_S (U_Sᵀ U_S)^{-1}`, one column per selected atom.
pub fn batch_measurement(space: &SpaceSpec, u: &DMatrix<f64>, sel: &[usize]) -> Vec<DVector<f64>> {
    let us = columns(u, sel);
    let inv = weighted_gram(space, &us, &us).try_inverse().unwrap();
    let w = us * inv;
    (0..sel.len()).map(|i| w.column(i).into_owned()).collect()
}

/// `‖P_W f − P_{W_S} f‖`.
pub fn support_objective(space: &SpaceSpec, u: &DMatrix<f64>, f: &DVector<f64>, sel: &[usize]) -> f64 {
    let target = span_projection(space, u, f);
    nrm(space, &(target - span_projection(space, &columns(u, sel), f)))
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
