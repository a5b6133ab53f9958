//! Laplace-approximated maximum likelihood for binomial-logit models with
//! crossed random intercepts.
//!
//! For fixed random-effect standard deviations `sigma`, the joint conditional
//! mode of the spherical random effects `u` (with `b = sigma * u`) and the fixed
//! effects `beta` is found by penalized IRLS, minimizing
//!
//! `phi(u, beta) = -sum log p(y | eta) + |u|^2 / 2`.
//!
//! The Laplace deviance at that mode is
//!
//! `dev(sigma) = 2 phi + log det(L Z' W Z L + I)`
//!
//! and is minimized over `log sigma` with Nelder-Mead.
//!
//! The random-effects factor with the most levels is eliminated through its
//! diagonal block, leaving a dense Schur complement over the remaining random
//! effects plus `beta`. For the usual case-by-method layouts that dense block is
//! small, so each Newton step costs `O(n k^2)` with `k` the dense size.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::{DesignMatrices, TermLayout};
use super::optim::{nelder_mead, NelderMeadOptions};
use super::GlmmError;

/// Log-sigma bounds used by the outer search.
const LOG_SIGMA_MIN: f64 = -15.0;
const LOG_SIGMA_MAX: f64 = 6.0;
/// Standard deviations below this are tried at exactly zero after the search.
const SNAP_TO_ZERO: f64 = 2.5e-3;
/// Fixed-effect magnitude that signals a diverging (separated) fit.
const DIVERGENCE_LIMIT: f64 = 30.0;
/// Relative phi decrease below which a Newton step is not worth taking.
const DECREMENT_TOL: f64 = 1e-15;
/// Simplex size on the log-sigma scale at which the outer search stops.
const OUTER_X_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_inner: usize,
    pub max_outer: usize,
    /// Outer stopping rule on the spread of simplex deviances. The search also
    /// stops once the simplex has shrunk to 1e-6 on the log-sigma scale.
    pub outer_tol: f64,
    /// Inner stopping rule on the Euclidean norm of the penalized gradient.
    /// Large designs rarely reach it in double precision, so the inner loop
    /// also stops when a Newton step can no longer lower the objective.
    pub inner_tol: f64,
    /// Adds a Jeffreys-prior (Firth) penalty to the inner objective.
    pub firth: bool,
    /// Pins the random-effect standard deviations (one per grouping factor,
    /// in design order) and skips the outer search.
    pub fixed_sigmas: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_inner: 200,
            max_outer: 500,
            outer_tol: 1e-8,
            inner_tol: 1e-6,
            firth: false,
            fixed_sigmas: None,
        }
    }
}

impl FitOptions {
    pub fn pinned(sigmas: Vec<f64>) -> Self {
        FitOptions {
            fixed_sigmas: Some(sigmas),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub outer_evaluations: usize,
    pub outer_converged: bool,
    pub outer_change: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmmFit {
    pub coefficient_names: Vec<String>,
    /// Log-odds scale.
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Random-intercept variance per grouping factor.
    pub variance_components: BTreeMap<String, f64>,
    /// Laplace approximation of the marginal log-likelihood.
    pub loglik: f64,
    pub converged: bool,
    pub convergence: ConvergenceRecord,
    pub n_obs: usize,
    pub n_groups: BTreeMap<String, usize>,
    /// Conditional modes of the random intercepts, in level order.
    pub random_modes: BTreeMap<String, Vec<f64>>,
    pub random_levels: BTreeMap<String, Vec<String>>,
    pub layout: TermLayout,
}

impl GlmmFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coefficient_names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn sigma(&self, factor: &str) -> Option<f64> {
        self.variance_components.get(factor).map(|v| v.sqrt())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.coefficients.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }

    pub fn ensure_converged(&self) -> Result<(), GlmmError> {
        if self.converged {
            Ok(())
        } else {
            Err(GlmmError::NonConvergence(format!(
                "{} outer evaluations, inner gradient norm {:.3e}",
                self.convergence.outer_evaluations, self.convergence.gradient_norm
            )))
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Negative Bernoulli log-likelihood of one observation.
#[inline]
fn nll(y: f64, eta: f64) -> f64 {
    if y > 0.5 {
        softplus(-eta)
    } else {
        softplus(eta)
    }
}

/// Joint conditional mode: diagonal-block random effects and the dense vector
/// `[u_other..., beta...]`.
#[derive(Debug, Clone)]
struct Mode {
    u_diag: Vec<f64>,
    v: Vec<f64>,
}

/// Weighted cross-product blocks at a given mode.
struct Blocks {
    /// Diagonal block entries, one per level of the eliminated factor.
    a: Vec<f64>,
    /// Row-major `q_diag x m` coupling block.
    b: Vec<f64>,
    /// Schur complement of the diagonal block, `m x m`.
    schur: DMatrix<f64>,
}

struct Evaluation {
    deviance: f64,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
    covariance: DMatrix<f64>,
}

struct Engine<'a> {
    design: &'a DesignMatrices,
    /// Random factor eliminated through its diagonal block.
    diag: Option<usize>,
    /// Remaining random factors and their offsets in the dense vector.
    dense: Vec<(usize, usize)>,
    /// Number of random effects held in the dense vector.
    n_dense_u: usize,
    /// Dense vector size: `n_dense_u + p`.
    m: usize,
    x_nz: Vec<Vec<(usize, f64)>>,
    options: &'a FitOptions,
}

impl<'a> Engine<'a> {
    fn new(design: &'a DesignMatrices, options: &'a FitOptions) -> Self {
        let diag = (0..design.random.len()).max_by_key(|&k| (design.random[k].n_levels(), usize::MAX - k));
        let mut dense = Vec::new();
        let mut offset = 0;
        for (k, block) in design.random.iter().enumerate() {
            if Some(k) != diag {
                dense.push((k, offset));
                offset += block.n_levels();
            }
        }
        let p = design.n_fixed();
        let x_nz = (0..design.n_obs())
            .map(|i| {
                (0..p)
                    .filter_map(|j| {
                        let v = design.x[(i, j)];
                        (v != 0.0).then_some((offset + j, v))
                    })
                    .collect()
            })
            .collect();
        Engine {
            design,
            diag,
            dense,
            n_dense_u: offset,
            m: offset + p,
            x_nz,
            options,
        }
    }

    fn n_diag(&self) -> usize {
        self.diag.map_or(0, |k| self.design.random[k].n_levels())
    }

    fn zero_mode(&self) -> Mode {
        Mode {
            u_diag: vec![0.0; self.n_diag()],
            v: vec![0.0; self.m],
        }
    }

    fn sigma_diag(&self, sigmas: &[f64]) -> f64 {
        self.diag.map_or(0.0, |k| sigmas[k])
    }

    /// Nonzeros of the dense part of row `i`.
    fn dense_row(&self, i: usize, sigmas: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        for &(k, offset) in &self.dense {
            out.push((offset + self.design.random[k].index[i], sigmas[k]));
        }
        out.extend_from_slice(&self.x_nz[i]);
    }

    fn diag_level(&self, i: usize) -> Option<usize> {
        self.diag.map(|k| self.design.random[k].index[i])
    }

    fn linear_predictor(&self, sigmas: &[f64], mode: &Mode) -> Vec<f64> {
        let sd = self.sigma_diag(sigmas);
        let mut row = Vec::new();
        (0..self.design.n_obs())
            .map(|i| {
                self.dense_row(i, sigmas, &mut row);
                let mut eta: f64 = row.iter().map(|&(j, v)| v * mode.v[j]).sum();
                if let Some(c) = self.diag_level(i) {
                    eta += sd * mode.u_diag[c];
                }
                eta
            })
            .collect()
    }

    fn penalty(&self, mode: &Mode) -> f64 {
        let u2: f64 = mode.u_diag.iter().map(|u| u * u).sum::<f64>()
            + mode.v[..self.n_dense_u].iter().map(|u| u * u).sum::<f64>();
        0.5 * u2
    }

    fn conditional_nll(&self, eta: &[f64]) -> f64 {
        self.design.y.iter().zip(eta).map(|(&y, &e)| nll(y, e)).sum()
    }

    fn assemble(&self, sigmas: &[f64], eta: &[f64]) -> Blocks {
        let nd = self.n_diag();
        let m = self.m;
        let sd = self.sigma_diag(sigmas);
        let mut a = vec![1.0; nd];
        let mut b = vec![0.0; nd * m];
        let mut dm = DMatrix::<f64>::zeros(m, m);
        let mut row = Vec::new();
        for (i, &e) in eta.iter().enumerate() {
            let p = logistic(e);
            let w = p * (1.0 - p);
            if w == 0.0 {
                continue;
            }
            self.dense_row(i, sigmas, &mut row);
            for &(j, vj) in &row {
                let wv = w * vj;
                for &(k, vk) in &row {
                    dm[(j, k)] += wv * vk;
                }
            }
            if let Some(c) = self.diag_level(i) {
                a[c] += w * sd * sd;
                let brow = &mut b[c * m..(c + 1) * m];
                for &(j, vj) in &row {
                    brow[j] += w * sd * vj;
                }
            }
        }
        for j in 0..self.n_dense_u {
            dm[(j, j)] += 1.0;
        }
        if sd != 0.0 {
            for c in 0..nd {
                let brow = &b[c * m..(c + 1) * m];
                let inv = 1.0 / a[c];
                for j in 0..m {
                    let bj = brow[j] * inv;
                    if bj == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        dm[(j, k)] -= bj * brow[k];
                    }
                }
            }
        }
        Blocks { a, b, schur: dm }
    }

    /// Leverages of the joint penalized system, needed for the Firth score.
    fn leverages(&self, sigmas: &[f64], eta: &[f64], blocks: &Blocks, schur_inv: &DMatrix<f64>) -> Vec<f64> {
        let m = self.m;
        let sd = self.sigma_diag(sigmas);
        let mut row = Vec::new();
        let mut t = vec![0.0; m];
        eta.iter()
            .enumerate()
            .map(|(i, &e)| {
                let p = logistic(e);
                let w = p * (1.0 - p);
                self.dense_row(i, sigmas, &mut row);
                t.iter_mut().for_each(|x| *x = 0.0);
                let mut quad = 0.0;
                if let Some(c) = self.diag_level(i) {
                    let ac = blocks.a[c];
                    quad += sd * sd / ac;
                    let brow = &blocks.b[c * m..(c + 1) * m];
                    for j in 0..m {
                        t[j] = sd * brow[j] / ac;
                    }
                }
                for &(j, v) in &row {
                    t[j] -= v;
                }
                let st = schur_inv * DMatrix::from_column_slice(m, 1, &t);
                quad += t.iter().zip(st.iter()).map(|(x, y)| x * y).sum::<f64>();
                w * quad
            })
            .collect()
    }

    /// Penalized gradient `[g_u_diag; g_v]` given working residuals `r`.
    fn gradient(&self, sigmas: &[f64], mode: &Mode, r: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sd = self.sigma_diag(sigmas);
        let mut gu = mode.u_diag.clone();
        let mut gv = vec![0.0; self.m];
        gv[..self.n_dense_u].copy_from_slice(&mode.v[..self.n_dense_u]);
        let mut row = Vec::new();
        for (i, &ri) in r.iter().enumerate() {
            self.dense_row(i, sigmas, &mut row);
            for &(j, v) in &row {
                gv[j] += ri * v;
            }
            if let Some(c) = self.diag_level(i) {
                gu[c] += ri * sd;
            }
        }
        (gu, gv)
    }

    fn log_det_full(blocks: &Blocks, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
        let diag: f64 = blocks.a.iter().map(|a| a.ln()).sum();
        diag + 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    fn objective(&self, sigmas: &[f64], mode: &Mode) -> (f64, Vec<f64>) {
        let eta = self.linear_predictor(sigmas, mode);
        let mut phi = self.conditional_nll(&eta) + self.penalty(mode);
        if self.options.firth {
            let blocks = self.assemble(sigmas, &eta);
            match cholesky(&blocks.schur) {
                Some(chol) => phi -= 0.5 * Self::log_det_full(&blocks, &chol),
                None => phi = f64::INFINITY,
            }
        }
        (phi, eta)
    }

    /// Penalized IRLS to the joint mode, updating `mode` in place.
    fn evaluate(&self, sigmas: &[f64], mode: &mut Mode) -> Result<Evaluation, GlmmError> {
        let m = self.m;
        let p = self.design.n_fixed();
        let (mut phi, mut eta) = self.objective(sigmas, mode);
        if !phi.is_finite() {
            *mode = self.zero_mode();
            (phi, eta) = self.objective(sigmas, mode);
        }
        let mut iterations = 0;
        let mut converged = false;
        let mut gradient_norm;
        loop {
            let blocks = self.assemble(sigmas, &eta);
            let chol = cholesky(&blocks.schur)
                .ok_or_else(|| GlmmError::Numerical("penalized system is not positive definite".into()))?;
            let mut r: Vec<f64> = eta.iter().zip(&self.design.y).map(|(&e, &y)| logistic(e) - y).collect();
            if self.options.firth {
                let inv = chol.inverse();
                let h = self.leverages(sigmas, &eta, &blocks, &inv);
                for ((ri, hi), &e) in r.iter_mut().zip(&h).zip(&eta) {
                    *ri -= hi * (0.5 - logistic(e));
                }
            }
            let (gu, gv) = self.gradient(sigmas, mode, &r);
            gradient_norm = (gu.iter().chain(&gv).map(|g| g * g).sum::<f64>()).sqrt();
            if gradient_norm < self.options.inner_tol {
                converged = true;
                break;
            }
            if iterations >= self.options.max_inner {
                break;
            }
            iterations += 1;

            // Newton direction through the Schur complement.
            let mut rhs = DMatrix::from_iterator(m, 1, gv.iter().map(|g| -g));
            for (c, &g) in gu.iter().enumerate() {
                let scale = g / blocks.a[c];
                if scale != 0.0 {
                    let brow = &blocks.b[c * m..(c + 1) * m];
                    for j in 0..m {
                        rhs[j] += brow[j] * scale;
                    }
                }
            }
            let dv = chol.solve(&rhs);
            let du: Vec<f64> = gu
                .iter()
                .enumerate()
                .map(|(c, &g)| {
                    let brow = &blocks.b[c * m..(c + 1) * m];
                    let bd: f64 = brow.iter().zip(dv.iter()).map(|(x, y)| x * y).sum();
                    (-g - bd) / blocks.a[c]
                })
                .collect();
            // Newton decrement: the predicted drop in phi for a full step.
            let decrement: f64 = gu.iter().zip(&du).map(|(g, d)| g * d).sum::<f64>()
                + gv.iter().zip(dv.iter()).map(|(g, d)| g * d).sum::<f64>();
            if -decrement < DECREMENT_TOL * (1.0 + phi.abs()) {
                converged = true;
                break;
            }

            let mut step = 1.0;
            let mut accepted = false;
            let mut stalled = false;
            for _ in 0..40 {
                let trial = Mode {
                    u_diag: mode.u_diag.iter().zip(&du).map(|(u, d)| u + step * d).collect(),
                    v: mode.v.iter().zip(dv.iter()).map(|(v, d)| v + step * d).collect(),
                };
                let (trial_phi, trial_eta) = self.objective(sigmas, &trial);
                if trial_phi.is_finite() && trial_phi <= phi {
                    stalled = phi - trial_phi <= DECREMENT_TOL * (1.0 + phi.abs());
                    *mode = trial;
                    phi = trial_phi;
                    eta = trial_eta;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !self.options.firth {
                let beta = &mode.v[self.n_dense_u..];
                if beta.iter().any(|b| b.abs() > DIVERGENCE_LIMIT) {
                    return Err(GlmmError::CompleteSeparation("fixed-effect estimates diverge".into()));
                }
            }
            if stalled {
                // Rounding noise in the gradient; phi no longer moves.
                converged = true;
                break;
            }
            if !accepted {
                // No descent possible at machine precision: the mode is as
                // good as it gets for this sigma.
                break;
            }
        }

        let blocks = self.assemble(sigmas, &eta);
        let chol = cholesky(&blocks.schur)
            .ok_or_else(|| GlmmError::Numerical("penalized system is not positive definite".into()))?;
        let covariance = chol
            .inverse()
            .view((self.n_dense_u, self.n_dense_u), (p, p))
            .into_owned();
        // log det of the random-effects block only.
        let mut log_det: f64 = blocks.a.iter().map(|a| a.ln()).sum();
        if self.n_dense_u > 0 {
            let uu = blocks.schur.view((0, 0), (self.n_dense_u, self.n_dense_u)).into_owned();
            let c = cholesky(&uu)
                .ok_or_else(|| GlmmError::Numerical("random-effects block is not positive definite".into()))?;
            log_det += 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        let deviance = 2.0 * (self.conditional_nll(&eta) + self.penalty(mode)) + log_det;
        Ok(Evaluation {
            deviance,
            iterations,
            gradient_norm,
            converged,
            covariance,
        })
    }

    fn beta<'m>(&self, mode: &'m Mode) -> &'m [f64] {
        &mode.v[self.n_dense_u..]
    }

    /// Conditional modes `b = sigma * u` for factor `k`.
    fn random_mode(&self, k: usize, sigmas: &[f64], mode: &Mode) -> Vec<f64> {
        if Some(k) == self.diag {
            mode.u_diag.iter().map(|u| u * sigmas[k]).collect()
        } else {
            let &(_, offset) = self.dense.iter().find(|(kk, _)| *kk == k).expect("dense factor");
            let n = self.design.random[k].n_levels();
            mode.v[offset..offset + n].iter().map(|u| u * sigmas[k]).collect()
        }
    }
}

fn cholesky(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::Cholesky::new(sym)
}

/// Fits the model described by `design`.
///
/// A fit that exhausts its iteration caps is returned with `converged == false`;
/// see [`GlmmFit::ensure_converged`].
pub fn fit(design: &DesignMatrices, options: &FitOptions) -> Result<GlmmFit, GlmmError> {
    let n = design.n_obs();
    let p = design.n_fixed();
    if n < p + 1 {
        return Err(GlmmError::InvalidSpec(format!(
            "{n} observations for {p} fixed effects"
        )));
    }
    let first = design.y[0];
    if design.y.iter().all(|&y| y == first) && !options.firth {
        return Err(GlmmError::CompleteSeparation("response has a single class".into()));
    }
    let k = design.random.len();
    if let Some(s) = &options.fixed_sigmas {
        if s.len() != k || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GlmmError::InvalidSpec(format!(
                "{} pinned standard deviations for {k} grouping factors",
                s.len()
            )));
        }
    }

    let engine = Engine::new(design, options);
    let mut mode = engine.zero_mode();

    let (sigmas, outer_evaluations, outer_converged, outer_change) = match &options.fixed_sigmas {
        Some(s) => (s.clone(), 1, true, 0.0),
        None if k == 0 => (Vec::new(), 1, true, 0.0),
        None => {
            let zeros = vec![0.0; k];
            let zero_dev = engine.evaluate(&zeros, &mut mode)?.deviance;
            let zero_mode = mode.clone();

            let to_sigmas = |psi: &[f64]| -> Vec<f64> {
                psi.iter()
                    .map(|&x| x.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX).exp())
                    .collect()
            };
            let mut failure = None;
            let mut warm = mode.clone();
            let result = nelder_mead(
                |psi| match engine.evaluate(&to_sigmas(psi), &mut warm) {
                    Ok(e) => e.deviance,
                    Err(err) => {
                        failure.get_or_insert(err);
                        f64::INFINITY
                    }
                },
                &vec![0.0; k],
                &NelderMeadOptions {
                    initial_step: 1.0,
                    f_tol: options.outer_tol,
                    x_tol: OUTER_X_TOL,
                    max_evaluations: options.max_outer,
                },
            );
            if !result.value.is_finite() {
                return Err(failure.unwrap_or_else(|| GlmmError::Numerical("outer search failed".into())));
            }
            let mut best = to_sigmas(&result.point);
            let mut best_dev = result.value;
            let mut best_mode = None;
            // Boundary estimates: the log scale never reaches zero exactly.
            for j in 0..k {
                if best[j] < SNAP_TO_ZERO {
                    let mut trial = best.clone();
                    trial[j] = 0.0;
                    let mut m = warm.clone();
                    if let Ok(e) = engine.evaluate(&trial, &mut m) {
                        if e.deviance <= best_dev {
                            best = trial;
                            best_dev = e.deviance;
                            best_mode = Some(m);
                        }
                    }
                }
            }
            if zero_dev <= best_dev {
                best = zeros;
                best_mode = Some(zero_mode);
            }
            mode = best_mode.unwrap_or(warm);
            (best, result.evaluations, result.converged, result.spread)
        }
    };

    let eval = engine.evaluate(&sigmas, &mut mode)?;
    let beta = engine.beta(&mode).to_vec();
    let se: Vec<f64> = (0..p).map(|j| eval.covariance[(j, j)].max(0.0).sqrt()).collect();
    if !options.firth && beta.iter().zip(&se).any(|(b, s)| b.abs() > 10.0 && *s > 5.0 * b.abs()) {
        return Err(GlmmError::CompleteSeparation(
            "diverging coefficient with vanishing curvature".into(),
        ));
    }

    let mut variance_components = BTreeMap::new();
    let mut n_groups = BTreeMap::new();
    let mut random_modes = BTreeMap::new();
    let mut random_levels = BTreeMap::new();
    for (j, block) in design.random.iter().enumerate() {
        variance_components.insert(block.name.clone(), sigmas[j] * sigmas[j]);
        n_groups.insert(block.name.clone(), block.n_levels());
        random_modes.insert(block.name.clone(), engine.random_mode(j, &sigmas, &mode));
        random_levels.insert(block.name.clone(), block.levels.clone());
    }
    let covariance = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| 0.5 * (eval.covariance[(i, j)] + eval.covariance[(j, i)]))
                .collect()
        })
        .collect();
    Ok(GlmmFit {
        coefficient_names: design.columns.clone(),
        coefficients: beta,
        covariance,
        variance_components,
        loglik: -0.5 * eval.deviance,
        converged: outer_converged && eval.converged,
        convergence: ConvergenceRecord {
            outer_evaluations,
            outer_converged,
            outer_change,
            inner_iterations: eval.iterations,
            inner_converged: eval.converged,
            gradient_norm: eval.gradient_norm,
        },
        n_obs: n,
        n_groups,
        random_modes,
        random_levels,
        layout: design.layout.clone(),
    })
}

/// Laplace deviance at the given standard deviations, for diagnostics and tests.
pub fn laplace_deviance(design: &DesignMatrices, sigmas: &[f64], options: &FitOptions) -> Result<f64, GlmmError> {
    let engine = Engine::new(design, options);
    let mut mode = engine.zero_mode();
    Ok(engine.evaluate(sigmas, &mut mode)?.deviance)
}
