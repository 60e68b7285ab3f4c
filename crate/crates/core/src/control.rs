//! Precise response control by sequentially assigning virtual interferences.
//!
//! Each step adds one virtual interference at the controlled direction `θ_k`
//! to the virtual covariance matrix (VCM) `T`. It picks the interference so
//! that the normalized response there lands exactly on the requested level
//! `ρ_k` and the array gain of the resulting optimal beamformer `T⁻¹a(θ₀)` is
//! as large as possible.
//!
//! Two parametrisations of the same one-dimensional family are used:
//!
//! * `γ`, the coefficient in `w_k = w_{k-1} + γ T⁻¹_{k-1} a(θ_k)`, and
//! * `β`, the INR of the added interference, `T_k = T_{k-1} + β a(θ_k)a^H(θ_k)`,
//!
//! related by the bilinear map `γ = Ψ(β) = -β ξ_c / (1 + β ξ_k)`. The set of
//! parameters meeting the level constraint is a circle in either plane; the
//! gain-optimal point is one of the two intersections of that circle with
//! the line through the origin (`γ`) or the real axis (`β`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{Angle, ArrayModel};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_defect, quad_form, rank1_inverse_update, rank1_update, solve, CMatrix, CVector};

/// Relative tolerance on "this value is real" claims.
pub(crate) const REAL_TOL: f64 = 1e-9;

/// One entry of the interference ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interference {
    pub direction: Angle,
    pub inr: f64,
}

/// Virtual covariance matrix with its inverse and the interferences that
/// built it. `T` and `T⁻¹` are both advanced on every step: the inverse by
/// the Woodbury form, the matrix additively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcmState {
    t_inv: CMatrix,
    t: CMatrix,
    interferences: Vec<Interference>,
}

impl VcmState {
    /// `T₀ = I`.
    pub fn identity(n: usize) -> Self {
        Self {
            t_inv: CMatrix::identity(n),
            t: CMatrix::identity(n),
            interferences: Vec::new(),
        }
    }

    pub fn t_inv(&self) -> &CMatrix {
        &self.t_inv
    }

    pub fn t(&self) -> &CMatrix {
        &self.t
    }

    pub fn interferences(&self) -> &[Interference] {
        &self.interferences
    }

    pub fn step_count(&self) -> usize {
        self.interferences.len()
    }

    pub fn dim(&self) -> usize {
        self.t.rows()
    }

    /// `I + A_k Σ_k A_k^H` rebuilt from the ledger.
    pub fn reconstruct(&self, model: &ArrayModel) -> CMatrix {
        let mut t = CMatrix::identity(self.dim());
        for itf in &self.interferences {
            let a = model.steering_vector(itf.direction);
            t = rank1_update(&t, &a, Complex64::new(itf.inr, 0.0)).expect("ledger conforms");
        }
        t
    }

    /// `T⁻¹ a(θ₀)`, the optimal weight for the current VCM.
    pub fn optimal_weight(&self, a0: &CVector) -> Result<CVector> {
        self.t_inv.mul_vec(a0)
    }
}

/// The four quadratic forms against `T⁻¹_{k-1}` that every closed form below
/// is written in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiQuartet {
    /// `a^H(θ₀) T⁻¹ a(θ₀)`
    pub xi0: f64,
    /// `a^H(θ_k) T⁻¹ a(θ_k)`
    pub xik: f64,
    /// `a^H(θ_k) T⁻¹ a(θ₀)`
    pub xic: Complex64,
    /// `a^H(θ₀) T⁻¹ a(θ_k)`
    pub xic_tilde: Complex64,
}

impl XiQuartet {
    /// `|ξ_c|² - ξ₀ ξ_k`; strictly negative when `T` is positive definite.
    pub fn gram_gap(&self) -> f64 {
        self.xic.norm_sqr() - self.xi0 * self.xik
    }
}

fn real_part_checked(z: Complex64) -> Result<f64> {
    if z.im.abs() > REAL_TOL * z.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotReal { residue: z.im.abs() });
    }
    Ok(z.re)
}

pub fn compute_xi(state: &VcmState, a0: &CVector, ak: &CVector) -> Result<XiQuartet> {
    let m = state.t_inv();
    let xi0 = quad_form(m, a0, a0)?;
    let xik = quad_form(m, ak, ak)?;
    let xic = quad_form(m, ak, a0)?;
    let xic_tilde = quad_form(m, a0, ak)?;
    Ok(XiQuartet {
        xi0: real_part_checked(xi0)?,
        xik: real_part_checked(xik)?,
        xic,
        xic_tilde,
    })
}

/// Circle in the complex plane, stored as `[re, im]` centre and radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleR2 {
    pub center: [f64; 2],
    pub radius: f64,
}

impl CircleR2 {
    pub fn center_complex(&self) -> Complex64 {
        Complex64::new(self.center[0], self.center[1])
    }

    /// `c + R e^{jφ}`
    pub fn point_at(&self, phi: f64) -> Complex64 {
        self.center_complex() + Complex64::from_polar(self.radius, phi)
    }

    /// Signed distance of `z` from the circle.
    pub fn offset(&self, z: Complex64) -> f64 {
        (z - self.center_complex()).norm() - self.radius
    }
}

/// 2×2 Hermitian form `B^H (a_k a_k^H - ρ a₀ a₀^H) B` with `B = [b1 b2]`.
/// Its zero set `z^H H z = 0`, `z = [1, x]`, is the set of `x` for which
/// `b1 + x b2` puts the level `ρ` at `θ_k`.
pub type LevelForm = [[Complex64; 2]; 2];

pub fn level_form(b1: &CVector, b2: &CVector, a0: &CVector, ak: &CVector, rho: f64) -> LevelForm {
    level_parts(b1, b2, a0, ak, rho).0
}

/// The form together with `-det H = ρ |p_k1 p_02 − p_k2 p_01|²`, where
/// `p_ki = b_i^H a_k` and `p_0i = b_i^H a₀`. The product form avoids the
/// cancellation in `|H12|² − H11 H22` at deep levels.
fn level_parts(b1: &CVector, b2: &CVector, a0: &CVector, ak: &CVector, rho: f64) -> (LevelForm, f64) {
    let pk = [b1.dot(ak), b2.dot(ak)];
    let p0 = [b1.dot(a0), b2.dot(a0)];
    let mut h = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for l in 0..2 {
            h[i][l] = pk[i] * pk[l].conj() - rho * p0[i] * p0[l].conj();
        }
    }
    let neg_det = rho * (pk[0] * p0[1] - pk[1] * p0[0]).norm_sqr();
    (h, neg_det)
}

fn circle_with_discriminant(h: &LevelForm, neg_det: f64) -> Result<CircleR2> {
    let scale = h.iter().flatten().fold(0.0f64, |m, z| m.max(z.norm()));
    let h22 = h[1][1].re;
    if h22.abs() <= 1e-12 * scale || h22 == 0.0 {
        return Err(Error::DegenerateControl(
            "level form H(2,2) vanishes; solution set is a line",
        ));
    }
    Ok(CircleR2 {
        center: [-h[0][1].re / h22, h[0][1].im / h22],
        radius: neg_det.sqrt() / h22.abs(),
    })
}

/// Circle of `x` solving `z^H H z = 0`.
pub fn level_circle(h: &LevelForm) -> Result<CircleR2> {
    let h22 = h[1][1].re;
    let neg_det = h[0][1].norm_sqr() - h[0][0].re * h22;
    let det_scale = h[0][1].norm_sqr().max((h[0][0].re * h22).abs());
    if neg_det < -1e-12 * det_scale {
        return Err(Error::NegativeDiscriminant(neg_det));
    }
    circle_with_discriminant(h, neg_det.max(0.0))
}

/// [`level_form`] and its circle, with the discriminant taken in product form.
pub fn level_circle_of(
    b1: &CVector,
    b2: &CVector,
    a0: &CVector,
    ak: &CVector,
    rho: f64,
) -> Result<(LevelForm, CircleR2)> {
    let (h, neg_det) = level_parts(b1, b2, a0, ak, rho);
    Ok((h, circle_with_discriminant(&h, neg_det)?))
}

/// Circle of all `γ` with `L(θ_k, θ₀) = ρ` for `w = w_prev + γ v_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCircle {
    pub circle: CircleR2,
    pub h: LevelForm,
}

pub fn gamma_circle(w_prev: &CVector, v_k: &CVector, a0: &CVector, ak: &CVector, rho: f64) -> Result<GammaCircle> {
    let (h, circle) = level_circle_of(w_prev, v_k, a0, ak, rho)?;
    Ok(GammaCircle { circle, h })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub circle: CircleR2,
    /// Intersection nearer the origin.
    pub gamma_a: Complex64,
    pub gamma_b: Complex64,
    pub zeta: f64,
    /// `-ξ₀ / ξ_c*`; the gain is `|ξ_c| |γ - d|`.
    pub d_point: Complex64,
    pub chi: f64,
    pub gamma_star: Complex64,
    /// The other intersection, `{γ_a, γ_b} \ γ_⋆`.
    pub gamma_rejected: Complex64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gain-optimal `γ` on the level circle.
///
/// The origin, the centre `c` and `d` are collinear, and the gain is the
/// distance from `d`, so the optimum is whichever line intersection lies
/// farther from `d`. `ζ = sign(c₁) sign(Re d - c₁)` encodes that: `ζ > 0`
/// picks `γ_a`, `ζ < 0` picks `γ_b`. When the line is vertical (`c₁ = 0`) the
/// same test is made on the imaginary parts. `ζ = 0` means `d` is the centre,
/// every point gives the same gain, and `γ_a` is returned.
pub fn select_gamma(quartet: &XiQuartet, geometry: &GammaCircle, rho: f64) -> Result<GammaSelection> {
    let circle = geometry.circle;
    let h22 = geometry.h[1][1].re;
    let chi = quartet.xik - rho * quartet.xi0;
    let nc = circle.center_complex().norm();
    if nc == 0.0 || quartet.xic.norm() == 0.0 {
        return Err(Error::DegenerateControl("gamma circle is centred at the origin"));
    }
    let base = -chi * quartet.xic / (nc * h22);
    let gamma_a = (nc - circle.radius) * base;
    let gamma_b = (nc + circle.radius) * base;
    let d_point = -quartet.xi0 / quartet.xic.conj();

    let [c1, c2] = circle.center;
    let zeta = if c1.abs() > 1e-12 * nc {
        sign(c1) * sign(d_point.re - c1)
    } else {
        sign(c2) * sign(d_point.im - c2)
    };
    let (gamma_star, gamma_rejected) = if zeta >= 0.0 {
        (gamma_a, gamma_b)
    } else {
        (gamma_b, gamma_a)
    };
    Ok(GammaSelection {
        circle,
        gamma_a,
        gamma_b,
        zeta,
        d_point,
        chi,
        gamma_star,
        gamma_rejected,
    })
}

/// Circle of all (complex) `β` meeting the level constraint. The centre is on
/// the real axis and does not depend on `ρ`.
pub fn beta_circle(quartet: &XiQuartet, rho: f64) -> Result<CircleR2> {
    let gap = quartet.gram_gap();
    if gap.abs() <= 1e-14 * (quartet.xi0 * quartet.xik).abs() || gap == 0.0 {
        return Err(Error::DegenerateControl("|xi_c|^2 equals xi0 * xik"));
    }
    Ok(CircleR2 {
        center: [quartet.xi0 / gap, 0.0],
        radius: quartet.xic.norm() / (rho.sqrt() * gap.abs()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSelection {
    pub circle: CircleR2,
    pub beta_l: f64,
    pub beta_r: f64,
    pub beta_star: f64,
    pub beta_rejected: f64,
}

/// Gain-optimal real INR. With `pd_shortcut` the caller vouches that
/// `T_{k-1}` is positive definite and the right intersection is taken in its
/// closed form; otherwise the general rule `β_r iff -1/ξ_k > c_β` decides.
pub fn select_beta(quartet: &XiQuartet, circle: &CircleR2, rho: f64, pd_shortcut: bool) -> BetaSelection {
    let cx = circle.center[0];
    let beta_r = cx + circle.radius;
    let beta_l = cx - circle.radius;
    let (beta_star, beta_rejected) = if pd_shortcut {
        let sr = rho.sqrt();
        let closed = (quartet.xic.norm() - sr * quartet.xi0) / (sr * -quartet.gram_gap());
        (closed, beta_l)
    } else if -1.0 / quartet.xik > cx {
        (beta_r, beta_l)
    } else {
        (beta_l, beta_r)
    };
    BetaSelection {
        circle: *circle,
        beta_l,
        beta_r,
        beta_star,
        beta_rejected,
    }
}

/// `Ψ⁻¹(γ) = -γ / (ξ_c + γ ξ_k)`
pub fn gamma_to_beta(gamma: Complex64, quartet: &XiQuartet) -> Result<Complex64> {
    let den = quartet.xic + gamma * quartet.xik;
    if den.norm() <= 1e-14 * (quartet.xic.norm() + (gamma * quartet.xik).norm()) || den.norm() == 0.0 {
        return Err(Error::MappingPole);
    }
    Ok(-gamma / den)
}

/// `Ψ(β) = -β ξ_c / (1 + β ξ_k)`
pub fn beta_to_gamma(beta: Complex64, quartet: &XiQuartet) -> Result<Complex64> {
    let den = 1.0 + beta * quartet.xik;
    if den.norm() <= 1e-14 * (1.0 + (beta * quartet.xik).norm()) || den.norm() == 0.0 {
        return Err(Error::MappingPole);
    }
    Ok(-beta * quartet.xic / den)
}

/// Per-step record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlStepResult {
    pub direction: Angle,
    /// Linear `ρ_k`.
    pub desired_level: f64,
    pub xi: XiQuartet,
    pub gamma: GammaSelection,
    pub beta: BetaSelection,
    /// Coefficient actually used (`γ_⋆` for OPARC, `γ_×` for PARC).
    pub gamma_applied: Complex64,
    /// INR actually assigned, `Ψ⁻¹(gamma_applied)`.
    pub beta_applied: f64,
    pub weight_after: CVector,
    /// Linear `L(θ_k, θ₀)` of `weight_after`.
    pub achieved_level: f64,
    /// Linear `|a^H(θ₀) T_k⁻¹ a(θ₀)|`.
    pub array_gain: f64,
}

pub(crate) fn check_level(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0 && rho <= 1.0) {
        return Err(Error::LevelOutOfRange { rho });
    }
    Ok(())
}

pub(crate) fn check_direction(theta0: Angle, theta_k: Angle) -> Result<()> {
    if (theta0.radians() - theta_k.radians()).abs() < 1e-12 {
        return Err(Error::DirectionIsBeamAxis);
    }
    Ok(())
}

pub(crate) fn level_of(w: &CVector, a_theta: &CVector, a0: &CVector) -> Result<f64> {
    let den = w.dot(a0).norm_sqr();
    if den.sqrt() <= 1e-14 * w.norm() * a0.norm() {
        return Err(Error::BeamAxisNull);
    }
    Ok(w.dot(a_theta).norm_sqr() / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pick {
    Optimal,
    Rejected,
}

fn controlled_step(
    state: &VcmState,
    w_prev: &CVector,
    model: &ArrayModel,
    theta0: Angle,
    theta_k: Angle,
    rho: f64,
    pick: Pick,
) -> Result<(VcmState, ControlStepResult)> {
    check_level(rho)?;
    check_direction(theta0, theta_k)?;
    let a0 = model.steering_vector(theta0);
    let ak = model.steering_vector(theta_k);
    if w_prev.len() != ak.len() || state.dim() != ak.len() {
        return Err(Error::DimensionMismatch {
            expected: ak.len(),
            got: w_prev.len(),
        });
    }

    let v = state.t_inv.mul_vec(&ak)?;
    let xi = compute_xi(state, &a0, &ak)?;
    let geometry = gamma_circle(w_prev, &v, &a0, &ak, rho)?;
    let gamma = select_gamma(&xi, &geometry, rho)?;
    let beta = select_beta(&xi, &beta_circle(&xi, rho)?, rho, false);

    let gamma_applied = match pick {
        Pick::Optimal => gamma.gamma_star,
        Pick::Rejected => gamma.gamma_rejected,
    };
    // γ = t ξ_c with t real, so β = Ψ⁻¹(γ) = −t / (1 + t ξ_k) in real arithmetic.
    let inverse_scale = real_part_checked(gamma_applied / xi.xic)?;
    let pole = 1.0 + inverse_scale * xi.xik;
    if pole.abs() <= 1e-14 * (1.0 + (inverse_scale * xi.xik).abs()) {
        return Err(Error::MappingPole);
    }
    let beta_applied = -inverse_scale / pole;

    let weight_after = w_prev.add_scaled(gamma_applied, &v);
    let t_inv = rank1_inverse_update(&state.t_inv, &v, Complex64::new(inverse_scale, 0.0))?;
    let t = rank1_update(&state.t, &ak, Complex64::new(beta_applied, 0.0))?;
    let mut interferences = state.interferences.clone();
    interferences.push(Interference {
        direction: theta_k,
        inr: beta_applied,
    });

    let achieved_level = level_of(&weight_after, &ak, &a0)?;
    let array_gain = quad_form(&t_inv, &a0, &a0)?.norm();
    let next = VcmState {
        t_inv,
        t,
        interferences,
    };
    let result = ControlStepResult {
        direction: theta_k,
        desired_level: rho,
        xi,
        gamma,
        beta,
        gamma_applied,
        beta_applied,
        weight_after,
        achieved_level,
        array_gain,
    };
    Ok((next, result))
}

/// One step of the weight-domain algorithm: pick `γ_⋆`, then
/// `w_k = w_{k-1} + γ_⋆ v_k` and `T_k⁻¹ = T_{k-1}⁻¹ + (γ_⋆/ξ_c) v_k v_k^H`.
pub fn oparc_step(
    state: &VcmState,
    w_prev: &CVector,
    model: &ArrayModel,
    theta0: Angle,
    theta_k: Angle,
    rho: f64,
) -> Result<(VcmState, ControlStepResult)> {
    controlled_step(state, w_prev, model, theta0, theta_k, rho, Pick::Optimal)
}

/// Same machinery as [`oparc_step`] with the gain-inferior intersection.
pub fn parc_step(
    state: &VcmState,
    w_prev: &CVector,
    model: &ArrayModel,
    theta0: Angle,
    theta_k: Angle,
    rho: f64,
) -> Result<(VcmState, ControlStepResult)> {
    controlled_step(state, w_prev, model, theta0, theta_k, rho, Pick::Rejected)
}

/// One step of the covariance-domain variant: pick `β_⋆` from the VCM alone
/// and add the interference. No intermediate weights are formed; use
/// [`terminal_weight`] at the end.
pub fn oparc_step_variant2(
    state: &VcmState,
    model: &ArrayModel,
    theta0: Angle,
    theta_k: Angle,
    rho: f64,
) -> Result<(VcmState, BetaSelection)> {
    check_level(rho)?;
    check_direction(theta0, theta_k)?;
    let a0 = model.steering_vector(theta0);
    let ak = model.steering_vector(theta_k);
    let xi = compute_xi(state, &a0, &ak)?;
    let selection = select_beta(&xi, &beta_circle(&xi, rho)?, rho, false);
    let beta = selection.beta_star;

    let den = 1.0 + beta * xi.xik;
    if den.abs() <= 1e-14 * (1.0 + (beta * xi.xik).abs()) {
        return Err(Error::MappingPole);
    }
    let v = state.t_inv.mul_vec(&ak)?;
    let t_inv = rank1_inverse_update(&state.t_inv, &v, Complex64::new(-beta / den, 0.0))?;
    let t = rank1_update(&state.t, &ak, Complex64::new(beta, 0.0))?;
    let mut interferences = state.interferences.clone();
    interferences.push(Interference {
        direction: theta_k,
        inr: beta,
    });
    Ok((
        VcmState {
            t_inv,
            t,
            interferences,
        },
        selection,
    ))
}

/// Solves `T_k w = a(θ₀)`.
pub fn terminal_weight(state: &VcmState, a0: &CVector) -> Result<CVector> {
    solve(state.t(), a0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaSign {
    /// Level is being lowered (or kept): `β_⋆ ≥ 0`.
    NonNegative,
    /// Level is being raised: `β_⋆ < 0`.
    Negative,
}

impl BetaSign {
    pub fn as_i8(self) -> i8 {
        match self {
            BetaSign::NonNegative => 1,
            BetaSign::Negative => -1,
        }
    }
}

/// Sign of the optimal INR predicted from the current response at `θ_k`,
/// valid for a positive definite `T_{k-1}`.
pub fn predict_beta_sign(w_prev: &CVector, ak: &CVector, a0: &CVector, rho: f64) -> Result<BetaSign> {
    let current = level_of(w_prev, ak, a0)?;
    Ok(if rho <= current {
        BetaSign::NonNegative
    } else {
        BetaSign::Negative
    })
}

/// Hermitian defect of `T⁻¹` relative to its largest entry.
pub fn relative_hermitian_defect(m: &CMatrix) -> f64 {
    hermitian_defect(m) / m.max_abs().max(f64::MIN_POSITIVE)
}
