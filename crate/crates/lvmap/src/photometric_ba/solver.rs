use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Image, Intrinsics};

use super::problem::CostItem;
use super::residual::{photometric_residual, residual_jacobians, FRAME_PARAMS};
use super::{CameraState, SolverConfig};

type Matrix7 = SMatrix<f64, 7, 7>;
type Vector7 = SVector<f64, 7>;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no active cost items")]
    NoActiveItems,
    #[error("normal equations rank-deficient; unconstrained frames: {frames:?}")]
    RankDeficient { frames: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
}

/// One LM iteration record for the optimization report.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub level: usize,
    pub iteration: usize,
    pub cost: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub active_items: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub level: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Frames that had no cost item at all and were held fixed.
    pub inactive_frames: Vec<usize>,
    pub num_items: usize,
}

/// Robustified cost of one pixel residual: Huber applied to the
/// Sigma-weighted residual norm.
fn huber_cost(scaled_norm: f64, delta: f64) -> f64 {
    if scaled_norm <= delta {
        scaled_norm * scaled_norm
    } else {
        delta * (2.0 * scaled_norm - delta)
    }
}

/// IRLS weight for the same robustifier (1 inside the inlier region).
fn huber_weight(scaled_norm: f64, delta: f64) -> f64 {
    if scaled_norm <= delta {
        1.0
    } else {
        delta / scaled_norm
    }
}

/// Robustified total cost at the given states; also returns the number of
/// non-degenerate items.
fn total_cost(
    states: &[CameraState],
    items: &[CostItem],
    images: &[&Image],
    k: &Intrinsics,
    delta: f64,
) -> (f64, usize) {
    let per_item: Vec<Option<f64>> = items
        .par_iter()
        .map(|item| {
            photometric_residual(
                &states[item.ref_frame],
                &states[item.target_frame],
                item,
                images,
                k,
            )
            .map(|eval| {
                let sw = eval.sigma_weight.sqrt();
                eval.residuals
                    .iter()
                    .map(|r| huber_cost(sw * r.norm(), delta))
                    .sum()
            })
        })
        .collect();
    let mut cost = 0.0;
    let mut active = 0;
    for c in per_item.into_iter().flatten() {
        cost += c;
        active += 1;
    }
    (cost, active)
}

/// Per-item contribution to the normal equations, reduced in item order
/// for determinism.
struct ItemSystem {
    ref_slot: usize,
    tgt_slot: usize,
    h_rr: Matrix7,
    h_rt: Matrix7,
    h_tt: Matrix7,
    g_r: Vector7,
    g_t: Vector7,
    cost: f64,
}

/// Minimize the robustified photometric cost over camera poses and log
/// exposures with Levenberg-Marquardt on block-sparse normal equations.
///
/// Frames never referenced by any item are held fixed and reported; the
/// log exposure of the lowest-indexed active frame is pinned as the
/// exposure gauge (all residuals are invariant to a common exposure
/// scale). With `optimize_exposure` false all exposures stay fixed.
pub fn lm_solve(
    states: &mut [CameraState],
    items: &[CostItem],
    images: &[&Image],
    k: &Intrinsics,
    cfg: &SolverConfig,
    optimize_exposure: bool,
    level: usize,
) -> Result<SolveReport, SolveError> {
    if items.is_empty() {
        return Err(SolveError::NoActiveItems);
    }
    // Frames touched by at least one item, in index order.
    let mut active = vec![false; states.len()];
    for item in items {
        active[item.ref_frame] = true;
        active[item.target_frame] = true;
    }
    let frames: Vec<usize> = (0..states.len()).filter(|&f| active[f]).collect();
    let inactive_frames: Vec<usize> = (0..states.len()).filter(|&f| !active[f]).collect();
    let mut slot_of = vec![usize::MAX; states.len()];
    for (slot, &f) in frames.iter().enumerate() {
        slot_of[f] = slot;
    }
    let n_params = frames.len() * FRAME_PARAMS;
    let gauge_exposure_param = slot_of[frames[0]] * FRAME_PARAMS + 6;

    let delta = cfg.huber_threshold;
    let (mut current_cost, initial_active) = total_cost(states, items, images, k, delta);
    if initial_active == 0 {
        return Err(SolveError::NoActiveItems);
    }
    let initial_cost = current_cost;
    let mut lambda = cfg.lambda_init;
    let mut rejects = 0;
    let mut iterations = Vec::new();
    let mut termination = Termination::MaxIterations;

    for iter in 0..cfg.max_iters {
        // Parallel per-item linearization, deterministic in-order merge.
        let systems: Vec<Option<ItemSystem>> = items
            .par_iter()
            .map(|item| {
                let eval = residual_jacobians(
                    &states[item.ref_frame],
                    &states[item.target_frame],
                    item,
                    images,
                    k,
                )?;
                let sw_sqrt = eval.sigma_weight.sqrt();
                let mut sys = ItemSystem {
                    ref_slot: slot_of[item.ref_frame],
                    tgt_slot: slot_of[item.target_frame],
                    h_rr: Matrix7::zeros(),
                    h_rt: Matrix7::zeros(),
                    h_tt: Matrix7::zeros(),
                    g_r: Vector7::zeros(),
                    g_t: Vector7::zeros(),
                    cost: 0.0,
                };
                for ((r, jr), jt) in eval
                    .residuals
                    .iter()
                    .zip(&eval.j_ref)
                    .zip(&eval.j_tgt)
                {
                    let scaled = sw_sqrt * r.norm();
                    let w = eval.sigma_weight * huber_weight(scaled, delta);
                    sys.cost += huber_cost(scaled, delta);
                    sys.h_rr += jr.transpose() * *jr * w;
                    sys.h_rt += jr.transpose() * *jt * w;
                    sys.h_tt += jt.transpose() * *jt * w;
                    sys.g_r += jr.transpose() * r * w;
                    sys.g_t += jt.transpose() * r * w;
                }
                Some(sys)
            })
            .collect();

        let mut h = DMatrix::<f64>::zeros(n_params, n_params);
        let mut g = DVector::<f64>::zeros(n_params);
        let mut active_items = 0;
        for sys in systems.into_iter().flatten() {
            active_items += 1;
            let (ri, ti) = (sys.ref_slot * FRAME_PARAMS, sys.tgt_slot * FRAME_PARAMS);
            add_block(&mut h, ri, ri, &sys.h_rr);
            add_block(&mut h, ti, ti, &sys.h_tt);
            add_block(&mut h, ri, ti, &sys.h_rt);
            add_block(&mut h, ti, ri, &sys.h_rt.transpose());
            for d in 0..FRAME_PARAMS {
                g[ri + d] += sys.g_r[d];
                g[ti + d] += sys.g_t[d];
            }
        }
        if active_items == 0 {
            return Err(SolveError::NoActiveItems);
        }

        // Gauge and toggle pinning.
        let mut pinned = vec![gauge_exposure_param];
        if !optimize_exposure {
            pinned = (0..frames.len()).map(|s| s * FRAME_PARAMS + 6).collect();
        }
        for &p in &pinned {
            for i in 0..n_params {
                h[(p, i)] = 0.0;
                h[(i, p)] = 0.0;
            }
            h[(p, p)] = 1.0;
            g[p] = 0.0;
        }

        // Damped solve.
        let mut damped = h.clone();
        for i in 0..n_params {
            let d = damped[(i, i)];
            damped[(i, i)] = d + lambda * d.max(1e-12);
        }
        let solution = damped.cholesky().map(|chol| chol.solve(&(-&g)));
        let Some(step) = solution else {
            // Factorization failure: identify frames with an effectively
            // empty diagonal block before giving up.
            let mut weak = Vec::new();
            for (slot, &f) in frames.iter().enumerate() {
                let base = slot * FRAME_PARAMS;
                let trace: f64 = (0..6).map(|d| h[(base + d, base + d)]).sum();
                if trace < 1e-9 {
                    weak.push(f);
                }
            }
            lambda *= cfg.lambda_up;
            rejects += 1;
            if rejects >= cfg.max_reject {
                return Err(SolveError::RankDeficient { frames: weak });
            }
            continue;
        };
        let step_norm = step.norm();

        // Trial update.
        let mut trial: Vec<CameraState> = states.to_vec();
        for (slot, &f) in frames.iter().enumerate() {
            let base = slot * FRAME_PARAMS;
            let xi = Vector6::new(
                step[base],
                step[base + 1],
                step[base + 2],
                step[base + 3],
                step[base + 4],
                step[base + 5],
            );
            trial[f].pose = trial[f].pose.retract(&xi);
            trial[f].exposure = (trial[f].exposure.ln() + step[base + 6]).exp();
        }
        let (trial_cost, _) = total_cost(&trial, items, images, k, delta);

        let accepted = trial_cost.is_finite() && trial_cost < current_cost;
        iterations.push(IterationRecord {
            level,
            iteration: iter,
            cost: if accepted { trial_cost } else { current_cost },
            lambda,
            step_norm,
            active_items,
            accepted,
        });

        if accepted {
            let rel_change = (current_cost - trial_cost) / current_cost.max(1e-300);
            states.clone_from_slice(&trial);
            current_cost = trial_cost;
            lambda *= cfg.lambda_down;
            rejects = 0;
            if rel_change < cfg.cost_rel_tol || step_norm < cfg.step_tol {
                termination = Termination::Converged;
                break;
            }
        } else {
            lambda *= cfg.lambda_up;
            rejects += 1;
            if rejects >= cfg.max_reject {
                termination = Termination::Diverged;
                break;
            }
        }
    }

    Ok(SolveReport {
        level,
        initial_cost,
        final_cost: current_cost,
        iterations,
        termination,
        inactive_frames,
        num_items: items.len(),
    })
}

fn add_block(h: &mut DMatrix<f64>, row: usize, col: usize, block: &Matrix7) {
    for r in 0..FRAME_PARAMS {
        for c in 0..FRAME_PARAMS {
            h[(row + r, col + c)] += block[(r, c)];
        }
    }
}
