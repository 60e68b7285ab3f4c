//! The A²RC baseline: `w_k = w_{k-1} + μ_k a(θ_k)` with the minimum-modulus
//! `μ_k` on the level circle.
//!
//! A²RC never forms a covariance matrix, but its weight can always be read as
//! `T̆_k⁻¹ a(θ₀)` for the implicit VCM `T̆_k = I + A_k Σ̆_k A_k^H`. The diagonal
//! of `Σ̆_k` (generally complex) is tracked here step by step, so the
//! interferences it silently re-assigns at earlier directions can be shown
//! next to OPARC's single real INR per step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{Angle, ArrayModel};
use crate::control::{self, check_direction, check_level, level_circle_of, level_of, CircleR2};
use crate::error::{Error, Result};
use crate::metrics::array_gain;
use crate::numerics::{rank1_update, CMatrix, CVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2rcState {
    weight: CVector,
    mu_history: Vec<Complex64>,
    directions: Vec<Angle>,
    implicit_inrs: Vec<Complex64>,
}

impl A2rcState {
    /// Quiescent start, `w₀ = a(θ₀)`.
    pub fn new(model: &ArrayModel, theta0: Angle) -> Self {
        Self {
            weight: model.steering_vector(theta0),
            mu_history: Vec::new(),
            directions: Vec::new(),
            implicit_inrs: Vec::new(),
        }
    }

    pub fn weight(&self) -> &CVector {
        &self.weight
    }

    pub fn mu_history(&self) -> &[Complex64] {
        &self.mu_history
    }

    pub fn directions(&self) -> &[Angle] {
        &self.directions
    }

    /// `diag(Σ̆_k)`.
    pub fn implicit_inrs(&self) -> &[Complex64] {
        &self.implicit_inrs
    }

    pub fn step_count(&self) -> usize {
        self.mu_history.len()
    }

    /// `a(θ₀) + Σ μ_i a(θ_i)`.
    pub fn weight_from_history(&self, model: &ArrayModel, theta0: Angle) -> CVector {
        self.directions
            .iter()
            .zip(&self.mu_history)
            .fold(model.steering_vector(theta0), |w, (th, mu)| {
                w.add_scaled(*mu, &model.steering_vector(*th))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitInrUpdate {
    /// Full `diag(Σ̆_k)`.
    pub inrs: Vec<Complex64>,
    /// `Δ̆_{k,i} = β̆_{k,i} - β̆_{k-1,i}` for the `k-1` earlier directions.
    pub deltas: Vec<Complex64>,
    /// `β̆_{k,k}`.
    pub newest: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A2rcStepResult {
    pub direction: Angle,
    pub desired_level: f64,
    pub circle: CircleR2,
    pub mu: Complex64,
    pub weight_after: CVector,
    pub achieved_level: f64,
    pub implicit: ImplicitInrUpdate,
    /// `|w^H a(θ₀)|² / |w^H T̆_k w|`, linear.
    pub array_gain: f64,
}

fn guard(z: Complex64, scale: f64) -> Result<Complex64> {
    if z.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateControl("implicit INR recursion divides by zero"));
    }
    Ok(z)
}

/// Advances `diag(Σ̆)` for the step `w_k = w_{k-1} + μ_k a(θ_k)`:
///
/// ```text
/// 1/β̆_{k,i} = 1/β̆_{k-1,i} - μ_k a^H(θ_i)a(θ_k) / μ_i     (i < k)
/// 1/β̆_{k,k} = -a^H(θ_k) w_{k-1} / μ_k - ‖a(θ_k)‖²
/// ```
pub fn implicit_inrs_update(
    state: &A2rcState,
    model: &ArrayModel,
    theta_k: Angle,
    mu_k: Complex64,
) -> Result<ImplicitInrUpdate> {
    let ak = model.steering_vector(theta_k);
    let mu_k = guard(mu_k, 1.0)?;
    let mut inrs = Vec::with_capacity(state.step_count() + 1);
    let mut deltas = Vec::with_capacity(state.step_count());
    for ((theta_i, mu_i), beta_prev) in state.directions.iter().zip(&state.mu_history).zip(&state.implicit_inrs) {
        let mu_i = guard(*mu_i, 1.0)?;
        let beta_prev = guard(*beta_prev, 1.0)?;
        let coupling = model.steering_vector(*theta_i).dot(&ak);
        let inv = 1.0 / beta_prev - mu_k * coupling / mu_i;
        let beta = 1.0 / guard(inv, 1.0 / beta_prev.norm())?;
        deltas.push(beta - beta_prev);
        inrs.push(beta);
    }
    let inv_new = -ak.dot(&state.weight) / mu_k - ak.norm_sqr();
    let newest = 1.0 / guard(inv_new, ak.norm_sqr())?;
    inrs.push(newest);
    Ok(ImplicitInrUpdate { inrs, deltas, newest })
}

/// `β̆_{k,k} = -μ_k / (a^H(θ_k) w_{k-1} + μ_k ‖a(θ_k)‖²)`
pub fn newest_inr_closed_form(ak_h_w_prev: Complex64, mu_k: Complex64, ak_norm_sqr: f64) -> Complex64 {
    -mu_k / (ak_h_w_prev + mu_k * ak_norm_sqr)
}

/// `Δ̆_{k,i} = μ_k c β̆²_{k-1,i} / (μ_i - μ_k c β̆_{k-1,i})`, `c = a^H(θ_i) a(θ_k)`.
pub fn delta_closed_form(mu_k: Complex64, mu_i: Complex64, coupling: Complex64, beta_prev: Complex64) -> Complex64 {
    mu_k * coupling * beta_prev * beta_prev / (mu_i - mu_k * coupling * beta_prev)
}

pub fn a2rc_step(
    state: &A2rcState,
    model: &ArrayModel,
    theta0: Angle,
    theta_k: Angle,
    rho: f64,
) -> Result<(A2rcState, A2rcStepResult)> {
    check_level(rho)?;
    check_direction(theta0, theta_k)?;
    let a0 = model.steering_vector(theta0);
    let ak = model.steering_vector(theta_k);
    let (_, circle) = level_circle_of(&state.weight, &ak, &a0, &ak, rho)?;
    let center = circle.center_complex();
    let nc = center.norm();
    if nc <= 1e-14 {
        return Err(Error::OriginCenter);
    }
    // Nearest point of the circle to the origin, on the line through its centre.
    let mu = center * (1.0 - circle.radius / nc);

    let implicit = implicit_inrs_update(state, model, theta_k, mu)?;
    let weight_after = state.weight.add_scaled(mu, &ak);
    let mut next = state.clone();
    next.weight = weight_after.clone();
    next.mu_history.push(mu);
    next.directions.push(theta_k);
    next.implicit_inrs = implicit.inrs.clone();

    let achieved_level = level_of(&weight_after, &ak, &a0)?;
    let t_implicit = reconstruct_implicit_vcm(&next, model);
    let gain = array_gain(&weight_after, &t_implicit, &a0)?;
    Ok((
        next,
        A2rcStepResult {
            direction: theta_k,
            desired_level: rho,
            circle,
            mu,
            weight_after,
            achieved_level,
            implicit,
            array_gain: gain,
        },
    ))
}

/// `T̆_k = I + A_k Σ̆_k A_k^H`.
pub fn reconstruct_implicit_vcm(state: &A2rcState, model: &ArrayModel) -> CMatrix {
    let n = state.weight.len();
    state
        .directions
        .iter()
        .zip(&state.implicit_inrs)
        .fold(CMatrix::identity(n), |t, (th, beta)| {
            rank1_update(&t, &model.steering_vector(*th), *beta).expect("ledger conforms")
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstStepBranch {
    /// `ρ₁ ≤ ‖a(θ₁)‖²/‖a(θ₀)‖²`: the first A²RC step coincides with OPARC.
    MatchesOptimal,
    /// Otherwise A²RC takes the gain-inferior intersection.
    MatchesRejected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstStepReport {
    pub norm_ratio: f64,
    pub branch: FirstStepBranch,
    pub mu: Complex64,
    pub gamma_star: Complex64,
    pub gamma_rejected: Complex64,
    /// `|μ₁ - γ|` for the `γ` the branch predicts.
    pub deviation: f64,
}

impl FirstStepReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.deviation <= tol
    }
}

/// Runs the first step of both algorithms from a fresh state and reports
/// which intersection A²RC landed on.
pub fn check_first_step_branch(model: &ArrayModel, theta0: Angle, theta1: Angle, rho1: f64) -> Result<FirstStepReport> {
    let a0 = model.steering_vector(theta0);
    let a1 = model.steering_vector(theta1);
    let norm_ratio = a1.norm_sqr() / a0.norm_sqr();
    let (_, opt) = control::oparc_step(
        &control::VcmState::identity(model.len()),
        &a0,
        model,
        theta0,
        theta1,
        rho1,
    )?;
    let (_, a2) = a2rc_step(&A2rcState::new(model, theta0), model, theta0, theta1, rho1)?;
    let (branch, predicted) = if rho1 <= norm_ratio {
        (FirstStepBranch::MatchesOptimal, opt.gamma.gamma_star)
    } else {
        (FirstStepBranch::MatchesRejected, opt.gamma.gamma_rejected)
    };
    Ok(FirstStepReport {
        norm_ratio,
        branch,
        mu: a2.mu,
        gamma_star: opt.gamma.gamma_star,
        gamma_rejected: opt.gamma.gamma_rejected,
        deviation: (a2.mu - predicted).norm(),
    })
}
