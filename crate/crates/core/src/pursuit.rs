//! Adaptive search for the sparse sub-subspace `V_K ⊂ V` on which the
//! oblique projection is stable and exact.
//!
//! Forward selection is OOMP applied to the projected signal `P_W f` with the
//! dictionary `{u_i}`: at every step the atom maximizing
//! `|⟨γ_n, f⟩| / ‖γ_n‖`, `γ_n = u_n − P_{W_k} u_n`, is added. Measurement
//! vectors `w_i^k` and coefficients `c_i^k = ⟨w_i^k, f⟩` are updated
//! recursively on every forward and backward step. When forward selection
//! stalls before `P_W f = P_{W_k} f`, atoms are swapped (one at a time, then
//! in pairs, …) and, failing that, the search restarts from a different first
//! atom.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{orthonormalize, project_unchecked, remove_component, AtomFamily};
use crate::oblique::SplittingProblem;

/// `‖P_W f‖ ≤ NULL_TARGET_TOL · ‖f‖` is treated as a signal with no
/// component outside `W⊥`.
pub const NULL_TARGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitConfig {
    /// Relative tolerance on `‖P_W f − P_{W_k} f‖ / ‖P_W f‖`.
    pub stop_tol: f64,
    /// Smallest admissible `‖γ_n‖ / ‖u_n‖`; below it a forward step is refused.
    pub stab_tol: f64,
    /// Hard cap on selected atoms (`None`: number of atoms).
    pub r_max: Option<usize>,
    pub max_swap_depth: usize,
    pub max_restarts: usize,
    /// A swap is committed only if it lowers the squared objective by more
    /// than this relative amount.
    pub swap_min_improvement: f64,
    /// Drop atoms whose removal keeps the objective within `stop_tol` once
    /// converged.
    pub prune: bool,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            stop_tol: 1e-8,
            stab_tol: 1e-7,
            r_max: None,
            max_swap_depth: 3,
            max_restarts: 10,
            swap_min_improvement: 1e-12,
            prune: true,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self, atoms: usize) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")))
            }
        };
        positive("stop_tol", self.stop_tol)?;
        positive("stab_tol", self.stab_tol)?;
        positive("swap_min_improvement", self.swap_min_improvement)?;
        if let Some(r) = self.r_max {
            if r == 0 || r > atoms {
                return Err(Error::InvalidArgument(format!(
                    "r_max must be in 1..={atoms}, got {r}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PursuitDiagnostics {
    pub forward_steps: usize,
    pub backward_steps: usize,
    /// Committed swaps.
    pub swaps: usize,
    pub max_swap_depth_used: usize,
    /// Re-initializations performed (0 when the first attempt succeeded).
    pub restarts: usize,
    /// `‖P_W f − P_{W_k} f‖ / ‖P_W f‖` of the returned state.
    pub final_residual: f64,
}

#[derive(Debug, Clone)]
pub struct PursuitResult {
    /// Selected atom indices, in selection order.
    pub support: Vec<usize>,
    /// `c_i` paired with `support`.
    pub coefficients: Vec<f64>,
    /// `Σ_i c_i v_{ℓ_i}`.
    pub component: DVector<f64>,
    pub converged: bool,
    pub diagnostics: PursuitDiagnostics,
}

impl PursuitResult {
    pub fn sorted_support(&self) -> Vec<usize> {
        let mut s = self.support.clone();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone)]
pub struct PursuitState<'a> {
    problem: &'a SplittingProblem,
    f: DVector<f64>,
    f_norm: f64,
    target: DVector<f64>,
    target_norm: f64,
    stab_tol: f64,
    selected: Vec<usize>,
    w: Vec<DVector<f64>>,
    coeffs: Vec<f64>,
    q_sel: Vec<DVector<f64>>,
    /// `P_{W_k} P_W f`.
    proj: DVector<f64>,
    /// Column `n` is `γ_n = u_n − P_{W_k} u_n`.
    gamma: DMatrix<f64>,
    u_norms: Vec<f64>,
    forward_steps: usize,
    backward_steps: usize,
}

impl<'a> PursuitState<'a> {
    /// Empty selection; `γ_n = u_n`, `P_W f` computed once.
    pub fn new(f: &DVector<f64>, problem: &'a SplittingProblem, stab_tol: f64) -> Result<Self> {
        if !(stab_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("stab_tol must be positive, got {stab_tol}")));
        }
        let space = problem.space();
        space.check_len(f.len())?;
        let target = problem.project_w(f)?;
        let target_norm = space.norm_of(target.as_slice());
        Ok(Self {
            problem,
            f: f.clone(),
            f_norm: space.norm_of(f.as_slice()),
            target_norm,
            target,
            stab_tol,
            selected: Vec::new(),
            w: Vec::new(),
            coeffs: Vec::new(),
            q_sel: Vec::new(),
            proj: DVector::zeros(f.len()),
            gamma: problem.u().atoms().clone(),
            u_norms: problem.u().norms(),
            forward_steps: 0,
            backward_steps: 0,
        })
    }

    pub fn problem(&self) -> &SplittingProblem {
        self.problem
    }

    pub fn signal(&self) -> &DVector<f64> {
        &self.f
    }

    /// `P_W f`.
    pub fn target_pw(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn measurement_vectors(&self) -> &[DVector<f64>] {
        &self.w
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Orthonormal basis of `W_k`.
    pub fn q_basis(&self) -> &[DVector<f64>] {
        &self.q_sel
    }

    pub fn gamma(&self, n: usize) -> &[f64] {
        let rows = self.gamma.nrows();
        &self.gamma.as_slice()[n * rows..(n + 1) * rows]
    }

    pub fn gamma_norm(&self, n: usize) -> f64 {
        self.problem.space().norm_of(self.gamma(n))
    }

    /// `P_{W_k} f`.
    pub fn projection(&self) -> &DVector<f64> {
        &self.proj
    }

    /// `‖P_W f − P_{W_k} f‖`.
    pub fn objective(&self) -> f64 {
        let r = &self.target - &self.proj;
        self.problem.space().norm_of(r.as_slice())
    }

    pub fn relative_residual(&self) -> f64 {
        if self.target_norm == 0.0 {
            0.0
        } else {
            self.objective() / self.target_norm
        }
    }

    pub fn is_null_target(&self) -> bool {
        self.target_norm <= NULL_TARGET_TOL * self.f_norm
    }

    pub fn converged(&self, stop_tol: f64) -> bool {
        self.is_null_target() || self.objective() <= stop_tol * self.target_norm
    }

    /// `Σ_i c_i^k v_{ℓ_i}`, the oblique projection onto `V_k` along `W⊥`.
    pub fn component(&self) -> DVector<f64> {
        let v = self.problem.v();
        let mut out = DVector::zeros(self.f.len());
        for (&l, &c) in self.selected.iter().zip(&self.coeffs) {
            out.axpy(c, &DVector::from_column_slice(v.atom(l)), 1.0);
        }
        out
    }

    fn admissible(&self, n: usize, norm: f64) -> bool {
        norm > self.stab_tol * self.u_norms[n]
    }

    /// OOMP scores `|⟨γ_n, f⟩| / ‖γ_n‖` for every admissible unselected atom.
    /// Since `γ_n ∈ W`, `⟨γ_n, f⟩ = ⟨γ_n, P_W f⟩`.
    fn scores(&self, excluded: &[usize]) -> Vec<(usize, f64)> {
        let space = self.problem.space();
        let corr = space.correlations(&self.gamma, self.target.as_slice());
        (0..self.gamma.ncols())
            .filter(|n| !self.selected.contains(n) && !excluded.contains(n))
            .filter_map(|n| {
                let norm = self.gamma_norm(n);
                self.admissible(n, norm).then(|| (n, corr[n].abs() / norm))
            })
            .collect()
    }

    pub fn select_forward(&self) -> Result<usize> {
        self.select_forward_excluding(&[])
    }

    /// Forward choice ignoring the atoms in `excluded`.
    pub fn select_forward_excluding(&self, excluded: &[usize]) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (n, s) in self.scores(excluded) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((n, s));
            }
        }
        best.map(|(n, _)| n).ok_or(Error::StabilityStop)
    }

    /// Admissible atoms ordered by decreasing score (ties: lowest index).
    pub fn ranking(&self) -> Vec<usize> {
        let mut s = self.scores(&[]);
        s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        s.into_iter().map(|(n, _)| n).collect()
    }

    /// Relative consistency error of adding `candidate`:
    /// `|⟨γ_ℓ, f⟩| / ‖γ_ℓ‖`.
    pub fn consistency_error(&self, candidate: usize) -> Result<f64> {
        self.check_index(candidate)?;
        let g = self.gamma(candidate);
        let space = self.problem.space();
        let norm = space.norm_of(g);
        if norm == 0.0 {
            return Err(Error::ZeroResidual(candidate));
        }
        Ok(space.dot(g, self.target.as_slice()).abs() / norm)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.gamma.ncols() {
            return Err(Error::InvalidArgument(format!(
                "atom index {n} out of range 0..{}",
                self.gamma.ncols()
            )));
        }
        Ok(())
    }

    /// Adds atom `l`:
    /// `w_{k+1} = γ_l/‖γ_l‖²`, `w_i ← w_i − w_{k+1}⟨v_l, w_i⟩`,
    /// `c_{k+1} = ⟨w_{k+1}, f⟩`, `c_i ← c_i − c_{k+1}⟨w_i, v_l⟩`.
    pub fn forward_step(&mut self, l: usize) -> Result<()> {
        self.check_index(l)?;
        if self.selected.contains(&l) {
            return Err(Error::AlreadySelected(l));
        }
        let space = self.problem.space().clone();

        // γ_l restricted to W and re-orthogonalized against W_k.
        let mut g = DMatrix::from_column_slice(self.gamma.nrows(), 1, self.gamma(l));
        remove_component(self.problem.wperp_basis(), &mut g);
        let mut g = g.column(0).into_owned();
        for _pass in 0..2 {
            for q in &self.q_sel {
                let r = space.dot(q.as_slice(), g.as_slice());
                g.axpy(-r, q, 1.0);
            }
        }
        let norm = space.norm_of(g.as_slice());
        if !self.admissible(l, norm) {
            return Err(Error::StabilityStop);
        }
        let q = &g / norm;
        let w_new = &g / (norm * norm);

        let v_l = self.problem.v().atom(l);
        let c_new = space.dot(w_new.as_slice(), self.f.as_slice());
        for (w_i, c_i) in self.w.iter_mut().zip(self.coeffs.iter_mut()) {
            let alpha = space.dot(v_l, w_i.as_slice());
            w_i.axpy(-alpha, &w_new, 1.0);
            *c_i -= c_new * alpha;
        }

        let t = space.dot(q.as_slice(), self.target.as_slice());
        self.proj.axpy(t, &q, 1.0);

        let q_mat = DMatrix::from_column_slice(q.len(), 1, q.as_slice());
        let row = space.cross_gram(&q_mat, &self.gamma);
        self.gamma.gemm(-1.0, &q_mat, &row, 1.0);
        self.gamma.column_mut(l).fill(0.0);

        self.selected.push(l);
        self.w.push(w_new);
        self.coeffs.push(c_new);
        self.q_sel.push(q);
        self.forward_steps += 1;
        Ok(())
    }

    /// Backward choice: the selected atom minimizing `|c_i| / ‖w_i‖`
    /// (ties: lowest atom index).
    pub fn select_backward(&self) -> Result<usize> {
        let space = self.problem.space();
        let mut best: Option<(usize, f64)> = None;
        for ((&l, w), c) in self.selected.iter().zip(&self.w).zip(&self.coeffs) {
            let ratio = c.abs() / space.norm_of(w.as_slice());
            let better = match best {
                None => true,
                Some((bl, br)) => ratio < br || (ratio == br && l < bl),
            };
            if better {
                best = Some((l, ratio));
            }
        }
        best.map(|(l, _)| l).ok_or(Error::EmptySelection)
    }

    /// Removes atom `j`:
    /// `w_i ← w_i − w_j⟨w_j, w_i⟩/‖w_j‖²`, `c_i ← c_i − c_j⟨w_i, w_j⟩/‖w_j‖²`.
    /// The basis of `W_k` and the residual atoms are rebuilt from the
    /// retained `u` atoms.
    pub fn backward_step(&mut self, j: usize) -> Result<()> {
        let p = self
            .selected
            .iter()
            .position(|&l| l == j)
            .ok_or(Error::NotSelected(j))?;
        let space = self.problem.space().clone();
        let w_j = self.w[p].clone();
        let c_j = self.coeffs[p];
        let nj2 = space.dot(w_j.as_slice(), w_j.as_slice());
        for (i, (w_i, c_i)) in self.w.iter_mut().zip(self.coeffs.iter_mut()).enumerate() {
            if i == p {
                continue;
            }
            let a = space.dot(w_i.as_slice(), w_j.as_slice()) / nj2;
            w_i.axpy(-a, &w_j, 1.0);
            *c_i -= c_j * a;
        }
        self.selected.remove(p);
        self.w.remove(p);
        self.coeffs.remove(p);
        self.rebuild_subspace()?;
        self.backward_steps += 1;
        Ok(())
    }

    fn rebuild_subspace(&mut self) -> Result<()> {
        let space = self.problem.space().clone();
        let n = self.f.len();
        let u = self.problem.u();
        self.gamma = u.atoms().clone();
        if self.selected.is_empty() {
            self.q_sel.clear();
            self.proj = DVector::zeros(n);
            return Ok(());
        }
        let sub = u.select(&self.selected)?;
        let first = orthonormalize(&sub, f64::EPSILON)?.basis;
        let mut q = first.atoms().clone();
        remove_component(self.problem.wperp_basis(), &mut q);
        let basis = orthonormalize(&AtomFamily::new(space, q)?, f64::EPSILON)?.basis;
        if basis.len() != self.selected.len() {
            return Err(Error::StabilityStop);
        }
        self.q_sel = (0..basis.len()).map(|i| basis.atom_vector(i)).collect();
        self.proj = project_unchecked(&basis, self.target.as_slice());
        remove_component(&basis, &mut self.gamma);
        for &l in &self.selected {
            self.gamma.column_mut(l).fill(0.0);
        }
        Ok(())
    }

    /// Swap refinement at a fixed depth: `depth` backward steps followed by
    /// `depth` forward steps (the removed atoms are not eligible to come
    /// back in the same cycle). A cycle is committed only if it strictly
    /// lowers the objective; the loop ends at the first non-improving
    /// cycle. Returns the number of committed swaps.
    pub fn swap_refine(&mut self, depth: usize, config: &PursuitConfig) -> Result<usize> {
        if depth == 0 {
            return Err(Error::InvalidArgument("swap depth must be at least 1".into()));
        }
        let mut commits = 0;
        while depth <= self.selected.len() && !self.converged(config.stop_tol) {
            let before = self.objective();
            let mut trial = self.clone();
            let mut removed = Vec::with_capacity(depth);
            for _ in 0..depth {
                let j = trial.select_backward()?;
                trial.backward_step(j)?;
                removed.push(j);
            }
            let mut complete = true;
            for _ in 0..depth {
                let step = trial
                    .select_forward_excluding(&removed)
                    .and_then(|l| trial.forward_step(l));
                match step {
                    Ok(()) => {}
                    Err(Error::StabilityStop) => {
                        complete = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            let after = trial.objective();
            if complete && after * after < before * before * (1.0 - config.swap_min_improvement) {
                *self = trial;
                commits += 1;
            } else {
                break;
            }
        }
        Ok(commits)
    }

    /// Forward steps until converged, `r_max` atoms, or no admissible atom.
    fn forward_until(&mut self, r_max: usize, stop_tol: f64) -> Result<()> {
        while !self.converged(stop_tol) && self.selected.len() < r_max {
            match self.select_forward().and_then(|l| self.forward_step(l)) {
                Ok(()) => {}
                Err(Error::StabilityStop) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Swaps at increasing depth; after a successful deeper swap the search
    /// drops back to depth 1.
    fn refine(&mut self, config: &PursuitConfig, diag: &mut PursuitDiagnostics) -> Result<()> {
        let mut depth = 1;
        while depth <= config.max_swap_depth.min(self.selected.len())
            && !self.converged(config.stop_tol)
        {
            let commits = self.swap_refine(depth, config)?;
            diag.swaps += commits;
            diag.max_swap_depth_used = diag.max_swap_depth_used.max(depth);
            if commits > 0 && depth > 1 {
                depth = 1;
            } else {
                depth += 1;
            }
        }
        Ok(())
    }

    /// Candidates are tried in increasing `|c_i| / ‖w_i‖`; any atom whose
    /// removal keeps the state converged is dropped.
    fn prune(&mut self, stop_tol: f64) -> Result<()> {
        let space = self.problem.space().clone();
        let mut order: Vec<(usize, f64)> = self
            .selected
            .iter()
            .zip(&self.w)
            .zip(&self.coeffs)
            .map(|((&l, w), c)| (l, c.abs() / space.norm_of(w.as_slice())))
            .collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let budget = stop_tol * self.target_norm;
        for (l, _) in order {
            // Removing atom l raises the squared objective by (|c_l| / ‖w_l‖)².
            let p = self.selected.iter().position(|&x| x == l).ok_or(Error::NotSelected(l))?;
            let ratio = self.coeffs[p].abs() / space.norm_of(self.w[p].as_slice());
            if self.objective().hypot(ratio) > budget * (1.0 + 1e-6) {
                continue;
            }
            let mut trial = self.clone();
            trial.backward_step(l)?;
            if trial.converged(stop_tol) {
                *self = trial;
            }
        }
        Ok(())
    }

    fn into_result(self, converged: bool, mut diag: PursuitDiagnostics) -> PursuitResult {
        diag.forward_steps += self.forward_steps;
        diag.backward_steps += self.backward_steps;
        diag.final_residual = self.relative_residual();
        PursuitResult {
            component: self.component(),
            support: self.selected,
            coefficients: self.coeffs,
            converged,
            diagnostics: diag,
        }
    }
}

/// Full search: forward selection, swap refinement with escalating depth and
/// re-initialization from the next-best first atom.
pub fn oblique_pursuit(
    f: &DVector<f64>,
    problem: &SplittingProblem,
    config: &PursuitConfig,
) -> Result<PursuitResult> {
    let m = problem.v().len();
    config.validate(m)?;
    let base = PursuitState::new(f, problem, config.stab_tol)?;
    let mut diag = PursuitDiagnostics::default();
    if base.is_null_target() {
        return Ok(base.into_result(true, diag));
    }

    let r_max = config.r_max.unwrap_or(m);
    let ranking = base.ranking();
    let mut best: Option<PursuitState> = None;
    let mut spent = PursuitDiagnostics::default();
    for (attempt, &first) in ranking.iter().enumerate().take(config.max_restarts + 1) {
        let mut state = base.clone();
        state.forward_step(first)?;
        state.forward_until(r_max, config.stop_tol)?;
        if !state.converged(config.stop_tol) {
            state.refine(config, &mut diag)?;
        }
        diag.restarts = attempt;
        let improved = best
            .as_ref()
            .is_none_or(|b| state.objective() < b.objective());
        if improved {
            if let Some(old) = best.replace(state) {
                spent.forward_steps += old.forward_steps;
                spent.backward_steps += old.backward_steps;
            }
        } else {
            spent.forward_steps += state.forward_steps;
            spent.backward_steps += state.backward_steps;
        }
        if best.as_ref().is_some_and(|b| b.converged(config.stop_tol)) {
            break;
        }
    }

    let Some(mut state) = best else {
        // No admissible atom at all.
        return Ok(base.into_result(false, diag));
    };
    let converged = state.converged(config.stop_tol);
    if converged && config.prune {
        state.prune(config.stop_tol)?;
    }
    diag.forward_steps = spent.forward_steps;
    diag.backward_steps = spent.backward_steps;
    Ok(state.into_result(converged, diag))
}

/// [`oblique_pursuit`] from raw families.
pub fn oblique_pursuit_raw(
    f: &DVector<f64>,
    v_family: &AtomFamily,
    wperp_raw: &AtomFamily,
    rank_tol: f64,
    config: &PursuitConfig,
) -> Result<PursuitResult> {
    let problem = SplittingProblem::new(v_family.clone(), wperp_raw, rank_tol)?;
    oblique_pursuit(f, &problem, config)
}
