//! The global JPSA fit: greedy layer-wise initialization followed by
//! alternating fine-tuning of the regression matrix `P` and every projection
//! `Θ_l`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::autorule::{self, run_admm, AdmmState, AutoRuleReport, LayerData};
use crate::data::{two_stream_concat, AdmmConfig, FeatureMatrix, HyperParams, StreamKind};
use crate::embed::lpp_fit;
use crate::error::{JpsaError, Result};
use crate::graph::{build_fused_graph, GraphBundle, SparseMatrix};
use crate::linalg::{all_finite, select_columns, solve_spd, solve_spd_right};

/// The learned chain `Θ_1 … Θ_m` plus the optional regression matrix `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStack {
    pub thetas: Vec<DMatrix<f64>>,
    pub p: Option<DMatrix<f64>>,
    /// Global factor applied to raw spectra before the first projection.
    pub input_scale: f64,
}

impl ProjectionStack {
    pub fn new(thetas: Vec<DMatrix<f64>>, p: Option<DMatrix<f64>>) -> Result<Self> {
        let s = Self {
            thetas,
            p,
            input_scale: 1.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(JpsaError::input("projection stack has no layers"));
        }
        for (l, pair) in self.thetas.windows(2).enumerate() {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(JpsaError::input(format!(
                    "layer {} outputs {} dims but layer {} expects {}",
                    l + 1,
                    pair[0].nrows(),
                    l + 2,
                    pair[1].ncols()
                )));
            }
        }
        if let Some(p) = &self.p {
            if p.ncols() != self.output_dim() {
                return Err(JpsaError::input(format!(
                    "P has {} columns, last layer outputs {}",
                    p.ncols(),
                    self.output_dim()
                )));
            }
        }
        let finite = self.thetas.iter().all(all_finite)
            && self.p.as_ref().is_none_or(all_finite)
            && self.input_scale.is_finite();
        if !finite {
            return Err(JpsaError::numerical("projection stack contains non-finite values"));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.thetas.len()
    }

    pub fn input_dim(&self) -> usize {
        self.thetas[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.thetas.last().map_or(0, |t| t.nrows())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.thetas.iter().map(|t| t.nrows()).collect()
    }

    /// `Θ_m ⋯ Θ_{l+1}` (identity when `l = m`); `l` is 1-based.
    pub fn downstream(&self, l: usize) -> DMatrix<f64> {
        let d = self.thetas[l - 1].nrows();
        let mut acc = DMatrix::identity(d, d);
        for theta in &self.thetas[l..] {
            acc = theta * acc;
        }
        acc
    }

    /// Inputs of every layer: `[X̃_0, X̃_1, …, X̃_m]` for an already scaled `x`.
    pub fn layer_inputs(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.m() + 1);
        out.push(x.clone());
        for theta in &self.thetas {
            let next = theta * out.last().unwrap();
            out.push(next);
        }
        out
    }
}

/// Project new spectra through the whole chain: `Θ_m ⋯ Θ_1 (s·x)`.
pub fn transform(stack: &ProjectionStack, x_new: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x_new.dim() != stack.input_dim() {
        return Err(JpsaError::input(format!(
            "input has {} bands, model expects {}",
            x_new.dim(),
            stack.input_dim()
        )));
    }
    let mut cur = x_new.values() * stack.input_scale;
    for theta in &stack.thetas {
        cur = theta * cur;
    }
    FeatureMatrix::new(cur, StreamKind::Pixel)
}

/// Everything the fine-tuning objective needs besides the stack.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    /// Scaled two-stream matrix `X̃`.
    pub x: DMatrix<f64>,
    /// `Ỹ` restricted to the supervised columns.
    pub targets: DMatrix<f64>,
    /// Columns of `x` that carry a label.
    pub supervised: Vec<usize>,
    pub lap: SparseMatrix,
}

impl TrainingProblem {
    /// Every column supervised.
    pub fn fully_supervised(x: DMatrix<f64>, targets: DMatrix<f64>, lap: SparseMatrix) -> Result<Self> {
        if targets.ncols() != x.ncols() || lap.n() != x.ncols() {
            return Err(JpsaError::input(format!(
                "X̃ has {} columns, Ỹ {}, Laplacian {}",
                x.ncols(),
                targets.ncols(),
                lap.n()
            )));
        }
        let supervised = (0..x.ncols()).collect();
        Ok(Self {
            x,
            targets,
            supervised,
            lap,
        })
    }

    fn all_supervised(&self) -> bool {
        self.supervised.len() == self.x.ncols()
    }

    /// Targets widened to every column of `x` (zero where unsupervised) and
    /// the matching column mask.
    fn full_targets(&self) -> (DMatrix<f64>, Vec<bool>) {
        let mut full = DMatrix::zeros(self.targets.nrows(), self.x.ncols());
        let mut mask = vec![false; self.x.ncols()];
        for (k, &c) in self.supervised.iter().enumerate() {
            full.set_column(c, &self.targets.column(k));
            mask[c] = true;
        }
        (full, mask)
    }
}

/// The four terms of the global objective, unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// Self-reconstruction loss summed over layers.
    pub reconstruction: f64,
    /// Prediction loss on supervised columns.
    pub prediction: f64,
    /// Graph regularizer summed over layers.
    pub graph: f64,
    /// `‖P‖²`
    pub regression: f64,
}

impl ObjectiveTerms {
    pub fn weighted(&self, hp: &HyperParams) -> f64 {
        0.5 * self.reconstruction + 0.5 * hp.alpha * self.prediction + 0.5 * hp.beta * self.graph
            + 0.5 * hp.gamma * self.regression
    }
}

pub fn objective_terms(stack: &ProjectionStack, problem: &TrainingProblem) -> Result<ObjectiveTerms> {
    let p = stack
        .p
        .as_ref()
        .ok_or_else(|| JpsaError::input("objective needs a fitted regression matrix P"))?;
    if stack.input_dim() != problem.x.nrows() {
        return Err(JpsaError::input(format!(
            "stack expects {} rows, X̃ has {}",
            stack.input_dim(),
            problem.x.nrows()
        )));
    }
    if p.nrows() != problem.targets.nrows() {
        return Err(JpsaError::input(format!(
            "P predicts {} classes, Ỹ has {}",
            p.nrows(),
            problem.targets.nrows()
        )));
    }
    let inputs = stack.layer_inputs(&problem.x);
    let mut reconstruction = 0.0;
    let mut graph = 0.0;
    for (l, theta) in stack.thetas.iter().enumerate() {
        let xin = &inputs[l];
        let out = &inputs[l + 1];
        reconstruction += (xin - theta.transpose() * out).norm_squared();
        graph += (problem.lap.left_mul(out).component_mul(out)).sum();
    }
    let v = select_columns(&inputs[stack.m()], &problem.supervised);
    let prediction = (&problem.targets - p * v).norm_squared();
    Ok(ObjectiveTerms {
        reconstruction,
        prediction,
        graph,
        regression: p.norm_squared(),
    })
}

/// `½Υ + (α/2)E + (β/2)Φ + (γ/2)Ψ` with every column of `x̃` supervised by `ỹ`.
pub fn objective_value(
    stack: &ProjectionStack,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lap: &SparseMatrix,
    hp: &HyperParams,
) -> Result<f64> {
    let problem = TrainingProblem::fully_supervised(x.clone(), y.clone(), lap.clone())?;
    Ok(objective_terms(stack, &problem)?.weighted(hp))
}

/// Ridge regression `P = αỸVᵀ (αVVᵀ + γI)⁻¹`.
pub fn update_p(v: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64, gamma: f64) -> Result<DMatrix<f64>> {
    if v.ncols() != y.ncols() {
        return Err(JpsaError::input(format!(
            "V has {} columns, Ỹ has {}",
            v.ncols(),
            y.ncols()
        )));
    }
    if alpha == 0.0 {
        return Ok(DMatrix::zeros(y.nrows(), v.nrows()));
    }
    let d = v.nrows();
    let sys = (v * v.transpose()) * alpha + DMatrix::identity(d, d) * gamma;
    let numer = (y * v.transpose()) * alpha;
    solve_spd_right(&numer, &sys)
}

/// Fine-tuning H step:
/// `H = (α P_lᵀP_l + GGᵀ + μI)⁻¹ (α P_lᵀỸ + GX̃ + μΘX̃ − Λ₁)`.
pub fn update_h_finetune(
    state: &AdmmState,
    data: &LayerData,
    p_l: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    update_h_finetune_masked(state, data, p_l, y, None, alpha)
}

/// As [`update_h_finetune`], but only columns with `mask[c]` carry the
/// prediction term; the rest take the pre-training update.
fn update_h_finetune_masked(
    state: &AdmmState,
    data: &LayerData,
    p_l: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mask: Option<&[bool]>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let mu = state.mu;
    let k = state.g.nrows();
    let base = &state.g * state.g.transpose() + DMatrix::identity(k, k) * mu;
    let rhs_base = &state.g * &data.x + (&state.theta * &data.x) * mu - &state.lambda1;
    let sup_sys = &base + (p_l.transpose() * p_l) * alpha;
    let sup_rhs = &rhs_base + (p_l.transpose() * y) * alpha;
    match mask {
        None => solve_spd(&sup_sys, &sup_rhs),
        Some(mask) => {
            let sup = solve_spd(&sup_sys, &sup_rhs)?;
            let unsup = solve_spd(&base, &rhs_base)?;
            let mut out = unsup;
            for (c, &m) in mask.iter().enumerate() {
                if m {
                    out.set_column(c, &sup.column(c));
                }
            }
            Ok(out)
        }
    }
}

/// Layer objective of the Θ_l subproblem: own reconstruction and graph terms
/// plus the prediction loss through the downstream map `p_l`.
fn layer_objective(
    theta: &DMatrix<f64>,
    data: &LayerData,
    p_l: &DMatrix<f64>,
    problem: &TrainingProblem,
    hp: &HyperParams,
) -> f64 {
    let out = theta * &data.x;
    let recon = (&data.x - theta.transpose() * &out).norm_squared();
    let graph = (theta * &data.xlxt * theta.transpose()).trace();
    let pred = (&problem.targets - p_l * select_columns(&out, &problem.supervised)).norm_squared();
    0.5 * recon + 0.5 * hp.alpha * pred + 0.5 * hp.beta * graph
}

/// Outcome of one fine-tuning solve for a layer.
#[derive(Debug, Clone)]
pub struct LayerUpdate {
    pub theta: DMatrix<f64>,
    pub report: AutoRuleReport,
    /// Whether the ADMM result replaced the previous projection.
    pub accepted: bool,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Re-solve `Θ_l` (1-based) with every other layer and `P` fixed.
///
/// Runs the pre-training ADMM with the supervised H step and `β` as graph
/// weight. The new projection is kept only when neither the layer objective
/// nor the global objective increases, which makes each sweep a descent step.
pub fn finetune_theta(
    l: usize,
    stack: &ProjectionStack,
    problem: &TrainingProblem,
    hp: &HyperParams,
    cfg: &AdmmConfig,
) -> Result<LayerUpdate> {
    if l == 0 || l > stack.m() {
        return Err(JpsaError::input(format!("layer {l} outside 1..={}", stack.m())));
    }
    let p = stack
        .p
        .as_ref()
        .ok_or_else(|| JpsaError::input("fine-tuning needs a fitted regression matrix P"))?;
    let inputs = stack.layer_inputs(&problem.x);
    let data = LayerData::new(inputs[l - 1].clone(), &problem.lap)?;
    let p_l = p * stack.downstream(l);
    let (y_full, mask) = problem.full_targets();
    let mask_ref = (!problem.all_supervised()).then_some(mask.as_slice());
    let theta_old = stack.thetas[l - 1].clone();

    let objective = |th: &DMatrix<f64>| layer_objective(th, &data, &p_l, problem, hp);
    let (state, report) = run_admm(
        &data,
        theta_old.clone(),
        hp.beta,
        cfg,
        |st, d| update_h_finetune_masked(st, d, &p_l, &y_full, mask_ref, hp.alpha),
        objective,
    )?;

    let before_layer = objective(&theta_old);
    let after_layer = objective(&state.theta);
    let mut candidate = stack.clone();
    candidate.thetas[l - 1] = state.theta.clone();
    let before = objective_terms(stack, problem)?.weighted(hp);
    let after = objective_terms(&candidate, problem)?.weighted(hp);
    let accepted = after_layer <= before_layer && after <= before && all_finite(&state.theta);
    Ok(LayerUpdate {
        theta: if accepted { state.theta } else { theta_old },
        report,
        accepted,
        objective_before: before_layer,
        objective_after: if accepted { after_layer } else { before_layer },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative objective change fell below ζ.
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub outer_iterations: usize,
    /// Objective after initialization, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub pretrain: Vec<AutoRuleReport>,
    /// `finetune[t][l]` for outer iteration `t` and layer `l`.
    pub finetune: Vec<Vec<LayerUpdate>>,
}

impl FitReport {
    /// CSV with header `outer_iter,objective`; row 0 is the initialization.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outer_iter,objective\n");
        for (t, v) in self.objective_trace.iter().enumerate() {
            let _ = writeln!(out, "{t},{v:e}");
        }
        out
    }
}

/// Training set prepared for [`jpsa_fit_problem`]: scaled two-stream matrix,
/// targets and the fused graph.
#[derive(Debug, Clone)]
pub struct PreparedTraining {
    pub problem: TrainingProblem,
    pub graph: GraphBundle,
    pub input_scale: f64,
    pub n_classes: usize,
}

/// Factor that maps the widest column of `x` onto the unit sphere.
pub fn unit_ball_scale(x: &DMatrix<f64>) -> f64 {
    let max_norm = x.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if max_norm > 0.0 { 1.0 / max_norm } else { 1.0 }
}

/// Build the fused graph, the scaled two-stream matrix and `Ỹ = [Y Y]`.
///
/// `labels` holds one class id per column (0 = unlabeled); `segment_of` the
/// superpixel id of each column.
pub fn prepare_training(
    x: &FeatureMatrix,
    xsp: &FeatureMatrix,
    labels: &[usize],
    segment_of: &[usize],
    hp: &HyperParams,
) -> Result<PreparedTraining> {
    hp.validate()?;
    let n = x.n_samples();
    if labels.len() != n || segment_of.len() != n {
        return Err(JpsaError::input(format!(
            "{n} columns but {} labels and {} segment ids",
            labels.len(),
            segment_of.len()
        )));
    }
    let n_classes = labels.iter().copied().max().unwrap_or(0);
    if n_classes == 0 {
        return Err(JpsaError::input("no labeled samples"));
    }
    let two = two_stream_concat(x, xsp)?;
    let input_scale = unit_ball_scale(two.values());
    let xs = two.values() * input_scale;
    // distances, and hence σ, are measured on the scaled spectra
    let graph = build_fused_graph(
        &(x.values() * input_scale),
        &(xsp.values() * input_scale),
        segment_of,
        hp.knn_k,
        hp.sigma,
    )?;

    let mut supervised = Vec::new();
    let mut class_of = Vec::new();
    for half in 0..2 {
        for (i, &lab) in labels.iter().enumerate() {
            if lab > 0 {
                supervised.push(half * n + i);
                class_of.push(lab - 1);
            }
        }
    }
    let mut targets = DMatrix::zeros(n_classes, supervised.len());
    for (k, &c) in class_of.iter().enumerate() {
        targets[(c, k)] = 1.0;
    }
    Ok(PreparedTraining {
        problem: TrainingProblem {
            x: xs,
            targets,
            supervised,
            lap: graph.lf.clone(),
        },
        graph,
        input_scale,
        n_classes,
    })
}

/// Fit the full model. See [`prepare_training`] for the argument layout.
pub fn jpsa_fit(
    x: &FeatureMatrix,
    xsp: &FeatureMatrix,
    labels: &[usize],
    segment_of: &[usize],
    hp: &HyperParams,
    cfg: &AdmmConfig,
) -> Result<(ProjectionStack, FitReport)> {
    let prepared = prepare_training(x, xsp, labels, segment_of, hp)?;
    let (mut stack, report) = jpsa_fit_problem(&prepared.problem, &prepared.graph.degree, hp, cfg)?;
    stack.input_scale = prepared.input_scale;
    Ok((stack, report))
}

/// Greedy initialization then alternating fine-tuning on a prepared problem.
/// `degree` is the diagonal of `D^f`, used by the LPP initializer.
pub fn jpsa_fit_problem(
    problem: &TrainingProblem,
    degree: &[f64],
    hp: &HyperParams,
    cfg: &AdmmConfig,
) -> Result<(ProjectionStack, FitReport)> {
    hp.validate()?;
    cfg.validate()?;
    if problem.supervised.is_empty() {
        return Err(JpsaError::input("no labeled samples"));
    }
    let mut thetas = Vec::with_capacity(hp.m);
    let mut pretrain = Vec::with_capacity(hp.m);
    let mut cur = problem.x.clone();
    for (l, &d_out) in hp.dims.iter().enumerate() {
        let init = lpp_fit(&cur, &problem.lap, degree, d_out)
            .map_err(|e| JpsaError::input(format!("layer {} LPP init: {e}", l + 1)))?;
        // generalized eigenvectors carry an arbitrary XDXᵀ scale; start from unit rows
        let mut theta0 = init.projection;
        for mut row in theta0.row_iter_mut() {
            let n = row.norm();
            if n > 0.0 {
                row /= n;
            }
        }
        let data = LayerData::new(cur.clone(), &problem.lap)?;
        let (theta, rep) = autorule::autorule_fit_data(&data, theta0, hp.eta, cfg)?;
        cur = &theta * &cur;
        thetas.push(theta);
        pretrain.push(rep);
    }

    let mut stack = ProjectionStack {
        thetas,
        p: None,
        input_scale: 1.0,
    };
    refresh_p(&mut stack, problem, hp)?;
    let mut obj = objective_terms(&stack, problem)?.weighted(hp);
    if !obj.is_finite() {
        return Err(JpsaError::numerical("non-finite objective after initialization"));
    }
    let mut trace = vec![obj];
    let mut finetune = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;
    let mut t = 0;
    while t < hp.max_outer_iters {
        refresh_p(&mut stack, problem, hp)?;
        let mut sweep = Vec::with_capacity(stack.m());
        for l in 1..=stack.m() {
            let upd = finetune_theta(l, &stack, problem, hp, cfg)?;
            stack.thetas[l - 1] = upd.theta.clone();
            sweep.push(upd);
        }
        finetune.push(sweep);
        t += 1;
        let next = objective_terms(&stack, problem)?.weighted(hp);
        if !next.is_finite() {
            return Err(JpsaError::numerical(format!("non-finite objective at outer iteration {t}")));
        }
        trace.push(next);
        let rel = if obj != 0.0 { ((next - obj) / obj).abs() } else { (next - obj).abs() };
        obj = next;
        if rel < hp.zeta {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    stack.validate()?;
    Ok((
        stack,
        FitReport {
            outer_iterations: t,
            objective_trace: trace,
            stop_reason,
            pretrain,
            finetune,
        },
    ))
}

fn refresh_p(stack: &mut ProjectionStack, problem: &TrainingProblem, hp: &HyperParams) -> Result<()> {
    let inputs = stack.layer_inputs(&problem.x);
    let v = select_columns(&inputs[stack.m()], &problem.supervised);
    stack.p = Some(update_p(&v, &problem.targets, hp.alpha, hp.gamma)?);
    Ok(())
}
