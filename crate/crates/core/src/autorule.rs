//! Layer-wise ADMM pre-training of a single projection.
//!
//! Minimizes `½‖X̃ − ΘᵀΘX̃‖² + (η/2)·tr(ΘX̃L X̃ᵀΘᵀ)` subject to `ΘX̃ ⪰ 0` and
//! unit-bounded columns of `ΘX̃`. The splitting introduces `H ≈ ΘX̃`,
//! `G ≈ Θ`, `Q ≈ ΘX̃` (nonnegative) and `S ≈ ΘX̃` (columns in the unit
//! ball), with multipliers `Λ₁..Λ₄` and an increasing penalty `μ`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::data::{AdmmConfig, AuxInit};
use crate::error::{JpsaError, Result};
use crate::graph::SparseMatrix;
use crate::linalg::{all_finite, solve_spd, solve_spd_right};

/// Input of one layer solve: `X̃_{l−1}` with its Gram and graph products.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub x: DMatrix<f64>,
    pub xxt: DMatrix<f64>,
    /// `X̃ L X̃ᵀ`
    pub xlxt: DMatrix<f64>,
}

impl LayerData {
    pub fn new(x: DMatrix<f64>, lap: &SparseMatrix) -> Result<Self> {
        if lap.n() != x.ncols() {
            return Err(JpsaError::input(format!(
                "Laplacian is {0}x{0} but X̃ has {1} columns",
                lap.n(),
                x.ncols()
            )));
        }
        let xlxt = lap.sandwich(&x);
        Ok(Self::with_graph_term(x, xlxt))
    }

    pub fn with_graph_term(x: DMatrix<f64>, xlxt: DMatrix<f64>) -> Self {
        let xxt = &x * x.transpose();
        Self { x, xxt, xlxt }
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub theta: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub lambda3: DMatrix<f64>,
    pub lambda4: DMatrix<f64>,
    pub mu: f64,
}

impl AdmmState {
    /// `H = Θ⁰X̃`, every other block and multiplier zero.
    pub fn init(theta0: DMatrix<f64>, data: &LayerData, mu0: f64) -> Self {
        Self::init_with(theta0, data, mu0, AuxInit::Zero)
    }

    pub fn init_with(theta0: DMatrix<f64>, data: &LayerData, mu0: f64, mode: AuxInit) -> Self {
        let (d_out, d_in) = theta0.shape();
        let n = data.n_cols();
        let h = &theta0 * &data.x;
        let z = || DMatrix::zeros(d_out, n);
        let (g, q, s) = match mode {
            AuxInit::Zero => (DMatrix::zeros(d_out, d_in), z(), z()),
            AuxInit::Consensus => (theta0.clone(), prox_nonneg(&h), prox_unit_ball(&h)),
        };
        Self {
            theta: theta0,
            h,
            g,
            q,
            s,
            lambda1: z(),
            lambda2: DMatrix::zeros(d_out, d_in),
            lambda3: z(),
            lambda4: z(),
            mu: mu0,
        }
    }

    fn is_finite(&self) -> bool {
        [
            &self.theta,
            &self.h,
            &self.g,
            &self.q,
            &self.s,
            &self.lambda1,
            &self.lambda2,
            &self.lambda3,
            &self.lambda4,
        ]
        .iter()
        .all(|m| all_finite(m))
            && self.mu.is_finite()
    }
}

/// Elementwise `max(·, 0)`.
pub fn prox_nonneg(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

/// Rescale every column with norm above 1 onto the unit sphere.
pub fn prox_unit_ball(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > 1.0 {
            col /= norm;
        }
    }
    out
}

/// Closed-form Θ step with graph weight `eta`:
/// `(μ(H+Q+S)X̃ᵀ + μG + (Λ₁+Λ₃+Λ₄)X̃ᵀ + Λ₂)·(η X̃LX̃ᵀ + 3μX̃X̃ᵀ + μI)⁻¹`.
pub fn update_theta(state: &AdmmState, data: &LayerData, eta: f64) -> Result<DMatrix<f64>> {
    let mu = state.mu;
    let xt = data.x.transpose();
    let stacked = (&state.h + &state.q + &state.s) * mu + &state.lambda1 + &state.lambda3 + &state.lambda4;
    let numer = stacked * &xt + &state.g * mu + &state.lambda2;
    let d = data.dim();
    let sys = &data.xlxt * eta + &data.xxt * (3.0 * mu) + DMatrix::identity(d, d) * mu;
    solve_spd_right(&numer, &sys)
}

/// `H = (GGᵀ + μI)⁻¹ (GX̃ + μΘX̃ − Λ₁)`.
pub fn update_h_pretrain(state: &AdmmState, data: &LayerData) -> Result<DMatrix<f64>> {
    let mu = state.mu;
    let k = state.g.nrows();
    let sys = &state.g * state.g.transpose() + DMatrix::identity(k, k) * mu;
    let rhs = &state.g * &data.x + (&state.theta * &data.x) * mu - &state.lambda1;
    solve_spd(&sys, &rhs)
}

/// `G = (HHᵀ + μI)⁻¹ (HX̃ᵀ + μΘ − Λ₂)`, the minimizer of
/// `½‖X̃ − GᵀH‖² + (μ/2)‖G − Θ‖² + ⟨Λ₂, G − Θ⟩`.
pub fn update_g(state: &AdmmState, data: &LayerData) -> Result<DMatrix<f64>> {
    let mu = state.mu;
    let k = state.h.nrows();
    let sys = &state.h * state.h.transpose() + DMatrix::identity(k, k) * mu;
    let rhs = &state.h * data.x.transpose() + &state.theta * mu - &state.lambda2;
    solve_spd(&sys, &rhs)
}

/// `Q = max(ΘX̃ − Λ₃/μ, 0)`.
pub fn update_q(state: &AdmmState, data: &LayerData) -> DMatrix<f64> {
    let target = &state.theta * &data.x - &state.lambda3 / state.mu;
    prox_nonneg(&target)
}

/// `S = prox_ball(ΘX̃ − Λ₄/μ)`.
pub fn update_s(state: &AdmmState, data: &LayerData) -> DMatrix<f64> {
    let target = &state.theta * &data.x - &state.lambda4 / state.mu;
    prox_unit_ball(&target)
}

/// Dual ascent on all four constraints with the current `μ`.
pub fn update_multipliers(state: &mut AdmmState, data: &LayerData) {
    let mu = state.mu;
    let tx = &state.theta * &data.x;
    state.lambda1 += (&state.h - &tx) * mu;
    state.lambda2 += (&state.g - &state.theta) * mu;
    state.lambda3 += (&state.q - &tx) * mu;
    state.lambda4 += (&state.s - &tx) * mu;
}

/// Frobenius norms of `H − ΘX̃`, `G − Θ`, `Q − ΘX̃`, `S − ΘX̃`.
pub fn residuals(state: &AdmmState, data: &LayerData) -> [f64; 4] {
    let tx = &state.theta * &data.x;
    [
        (&state.h - &tx).norm(),
        (&state.g - &state.theta).norm(),
        (&state.q - &tx).norm(),
        (&state.s - &tx).norm(),
    ]
}

/// Pre-training objective at `theta`:
/// `½‖X̃ − ΘᵀΘX̃‖² + (η/2)·tr(ΘX̃LX̃ᵀΘᵀ)`.
pub fn pretrain_objective(theta: &DMatrix<f64>, data: &LayerData, eta: f64) -> f64 {
    let recon = &data.x - theta.transpose() * (theta * &data.x);
    0.5 * recon.norm_squared() + 0.5 * eta * (theta * &data.xlxt * theta.transpose()).trace()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub residuals: [f64; 4],
    pub mu: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AutoRuleReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_residuals: [f64; 4],
    pub trace: Vec<TraceRow>,
}

impl AutoRuleReport {
    /// CSV with header `iter,r_H,r_G,r_Q,r_S,mu,objective`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,r_H,r_G,r_Q,r_S,mu,objective\n");
        for row in &self.trace {
            let [a, b, c, d] = row.residuals;
            let _ = writeln!(out, "{},{a:e},{b:e},{c:e},{d:e},{:e},{:e}", row.iter, row.mu, row.objective);
        }
        out
    }
}

/// Generic ADMM loop shared by pre-training and fine-tuning.
///
/// Runs Θ → H → G → Q → S → Λ → μ until all four residuals drop below
/// `cfg.eps` or `cfg.max_iters` iterations pass. `h_step` supplies the
/// H-update; `objective` is evaluated on each iterate for the trace.
pub fn run_admm<H, O>(
    data: &LayerData,
    theta0: DMatrix<f64>,
    graph_weight: f64,
    cfg: &AdmmConfig,
    mut h_step: H,
    objective: O,
) -> Result<(AdmmState, AutoRuleReport)>
where
    H: FnMut(&AdmmState, &LayerData) -> Result<DMatrix<f64>>,
    O: Fn(&DMatrix<f64>) -> f64,
{
    cfg.validate()?;
    if theta0.ncols() != data.dim() {
        return Err(JpsaError::input(format!(
            "Θ⁰ has {} columns but X̃ has {} rows",
            theta0.ncols(),
            data.dim()
        )));
    }
    let mut state = AdmmState::init_with(theta0, data, cfg.mu0, cfg.init);
    let mut report = AutoRuleReport::default();
    let mut t = 0;
    while t < cfg.max_iters {
        state.theta = update_theta(&state, data, graph_weight)?;
        state.h = h_step(&state, data)?;
        state.g = update_g(&state, data)?;
        state.q = update_q(&state, data);
        state.s = update_s(&state, data);
        let mu_used = state.mu;
        update_multipliers(&mut state, data);
        state.mu = (cfg.rho * state.mu).min(cfg.mu_max);
        t += 1;
        if !state.is_finite() {
            return Err(JpsaError::numerical(format!("non-finite ADMM state at iteration {t}")));
        }
        let res = residuals(&state, data);
        report.trace.push(TraceRow {
            iter: t,
            residuals: res,
            mu: mu_used,
            objective: objective(&state.theta),
        });
        report.final_residuals = res;
        if res.iter().all(|&r| r < cfg.eps) {
            report.converged = true;
            break;
        }
    }
    report.iterations = t;
    Ok((state, report))
}

/// Pre-train one layer from the initial projection `theta0`.
pub fn autorule_fit(
    x: &DMatrix<f64>,
    lap: &SparseMatrix,
    theta0: DMatrix<f64>,
    eta: f64,
    cfg: &AdmmConfig,
) -> Result<(DMatrix<f64>, AutoRuleReport)> {
    let data = LayerData::new(x.clone(), lap)?;
    autorule_fit_data(&data, theta0, eta, cfg)
}

pub fn autorule_fit_data(
    data: &LayerData,
    theta0: DMatrix<f64>,
    eta: f64,
    cfg: &AdmmConfig,
) -> Result<(DMatrix<f64>, AutoRuleReport)> {
    let (state, report) = run_admm(data, theta0, eta, cfg, update_h_pretrain, |th| {
        pretrain_objective(th, data, eta)
    })?;
    Ok((state.theta, report))
}
