//! Brute-force cross-checks for the closed forms. Used by tests and the
//! acceptance suite; the control path never calls into this module.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::a2rc::{a2rc_step, reconstruct_implicit_vcm, A2rcState};
use crate::array::{Angle, ArrayModel, ElementSpec, DEFAULT_WAVE_SPEED};
use crate::control::{
    beta_to_gamma, gamma_to_beta, oparc_step, parc_step, predict_beta_sign, relative_hermitian_defect, BetaSign,
    CircleR2, VcmState, XiQuartet,
};
use crate::error::{Error, Result};
use crate::metrics::{array_gain, from_db};
use crate::numerics::{invert, is_positive_definite, least_squares, quad_form, rank1_update, solve, CMatrix, CVector};

pub const DEFAULT_SAMPLES: usize = 720;
pub const MIN_SAMPLES: usize = 36;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleScan {
    pub samples: usize,
    pub best_param: Complex64,
    pub best_objective: f64,
    pub best_index: usize,
}

impl CircleScan {
    /// Arc length between neighbouring samples on `circle`.
    pub fn cell(&self, circle: &CircleR2) -> f64 {
        std::f64::consts::TAU * circle.radius / self.samples as f64
    }
}

/// Evaluates `objective` at `samples` equally spaced points of `circle`
/// (starting at angle 0) and keeps the first maximiser.
pub fn scan_circle<F>(circle: &CircleR2, samples: usize, mut objective: F) -> Result<CircleScan>
where
    F: FnMut(Complex64) -> Result<f64>,
{
    if samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples(samples));
    }
    let mut best: Option<CircleScan> = None;
    for i in 0..samples {
        let z = circle.point_at(std::f64::consts::TAU * i as f64 / samples as f64);
        let f = objective(z)?;
        if best.is_none_or(|b| f > b.best_objective) {
            best = Some(CircleScan {
                samples,
                best_param: z,
                best_objective: f,
                best_index: i,
            });
        }
    }
    Ok(best.expect("samples > 0"))
}

/// `G_k(γ) = |ξ₀ + γ ξ̃_c|`, the gain after the update `w + γ v`.
pub fn gain_of_gamma(quartet: &XiQuartet, gamma: Complex64) -> f64 {
    (quartet.xi0 + gamma * quartet.xic_tilde).norm()
}

pub fn scan_gamma_for_gain(circle: &CircleR2, quartet: &XiQuartet, samples: usize) -> Result<CircleScan> {
    scan_circle(circle, samples, |g| Ok(gain_of_gamma(quartet, g)))
}

/// `G_k(β) = |ξ₀ − β|ξ_c|²/(1 + βξ_k)|`, the gain once the interference
/// `β a(θ_k)a^H(θ_k)` is added.
pub fn gain_of_beta(quartet: &XiQuartet, beta: Complex64) -> Result<f64> {
    let den = 1.0 + beta * quartet.xik;
    if den.norm() <= 1e-14 {
        return Err(Error::MappingPole);
    }
    Ok((quartet.xi0 - beta * quartet.xic.norm_sqr() / den).norm())
}

/// On the level circle `|β − c_β| = R_β`, so the gain collapses to
/// `(ξ₀ξ_k − |ξ_c|²)/ξ_k · R_β / |β + 1/ξ_k|`.
pub fn gain_of_beta_on_circle(quartet: &XiQuartet, circle: &CircleR2, beta: Complex64) -> f64 {
    let gap = -quartet.gram_gap();
    gap.abs() / quartet.xik.abs() * circle.radius / (beta + 1.0 / quartet.xik).norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleArgmaxScan {
    /// Argmax of `|w^H a(θ₀)|² / (w^H T_{k-1} w)`.
    pub prev_vcm: CircleScan,
    /// Argmax of `|w^H a(θ₀)|² / |w^H T_k w|` with `T_k = T_{k-1} + β a a^H`.
    pub next_vcm: CircleScan,
}

impl DoubleArgmaxScan {
    /// Whether the two maximisers are within `cells` neighbouring samples.
    pub fn agree_within(&self, cells: usize) -> bool {
        let n = self.prev_vcm.samples;
        let d = self.prev_vcm.best_index.abs_diff(self.next_vcm.best_index);
        d.min(n - d) <= cells
    }
}

/// Scans both gain objectives over `C_β`, with `w(β) = T_k⁻¹ a(θ₀)`
/// obtained by a direct solve at every sample.
pub fn scan_beta_double_argmax(
    circle: &CircleR2,
    state_prev: &VcmState,
    a0: &CVector,
    ak: &CVector,
    samples: usize,
) -> Result<DoubleArgmaxScan> {
    let t_prev = state_prev.t();
    let mut next_best: Option<CircleScan> = None;
    let mut index = 0;
    let prev_vcm = scan_circle(circle, samples, |b| {
        let t_next = rank1_update(t_prev, ak, b)?;
        let w = solve(&t_next, a0)?;
        let next = array_gain(&w, &t_next, a0)?;
        if next_best.is_none_or(|s| next > s.best_objective) {
            next_best = Some(CircleScan {
                samples,
                best_param: b,
                best_objective: next,
                best_index: index,
            });
        }
        index += 1;
        let den = quad_form(t_prev, &w, &w)?.re;
        Ok(w.dot(a0).norm_sqr() / den)
    })?;
    Ok(DoubleArgmaxScan {
        prev_vcm,
        next_vcm: next_best.expect("scan ran"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanCheck {
    /// `‖w_delta − A c‖`.
    pub residual: f64,
    /// Coefficients on `[a(θ_k), a(θ_{k-1}), …, a(θ₁)]`, newest first.
    pub coefficients: Vec<Complex64>,
    pub rank_deficient: bool,
}

impl SpanCheck {
    pub fn relative_residual(&self, w_delta: &CVector) -> f64 {
        self.residual / w_delta.norm().max(f64::MIN_POSITIVE)
    }
}

/// Projects a weight increment onto the steering vectors of the controlled
/// directions, given oldest first.
pub fn span_decomposition_check(w_delta: &CVector, directions: &[Angle], model: &ArrayModel) -> Result<SpanCheck> {
    if directions.is_empty() {
        return Err(Error::DegenerateControl("span check needs at least one direction"));
    }
    let cols: Vec<CVector> = directions.iter().rev().map(|th| model.steering_vector(*th)).collect();
    let ls = least_squares(&CMatrix::from_columns(&cols)?, w_delta)?;
    Ok(SpanCheck {
        residual: ls.residual,
        coefficients: ls.coefficients,
        rank_deficient: ls.rank_deficient,
    })
}

/// A random control problem: array, beam axis and a list of `(θ_k, ρ_k)`.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: ArrayModel,
    pub theta0: Angle,
    pub steps: Vec<(Angle, f64)>,
}

/// Ranges for [`random_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub elements: RangeInclusive<usize>,
    pub max_steps: usize,
    pub rho_db: RangeInclusive<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            elements: 6..=12,
            max_steps: 5,
            rho_db: -60.0..=-3.0,
        }
    }
}

/// Draws a nonuniform linear array of tapered elements (spacing 0.3 to 0.7
/// wavelengths, λ = 1 m), a beam axis in [−40°, 40°], and 1 to `max_steps`
/// control points at least 8° from the beam axis and 2° from each other.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, spec: &ScenarioSpec) -> Scenario {
    let n = rng.gen_range(spec.elements.clone());
    let mut x = 0.0;
    let mut elements = Vec::with_capacity(n);
    for _ in 0..n {
        elements.push(ElementSpec {
            position_x: x,
            pattern_amp: rng.gen_range(0.7..1.3),
            pattern_scale: rng.gen_range(0.0..1.0),
        });
        x += rng.gen_range(0.3..0.7);
    }
    let model = ArrayModel::new(elements, std::f64::consts::TAU * DEFAULT_WAVE_SPEED, DEFAULT_WAVE_SPEED)
        .expect("generated array is valid");
    let theta0 = rng.gen_range(-40.0..40.0);
    let k = rng.gen_range(1..=spec.max_steps.max(1));
    let mut dirs: Vec<f64> = Vec::with_capacity(k);
    while dirs.len() < k {
        let th: f64 = rng.gen_range(-85.0..85.0);
        if (th - theta0).abs() >= 8.0 && dirs.iter().all(|d| (d - th).abs() >= 2.0) {
            dirs.push(th);
        }
    }
    let steps = dirs
        .into_iter()
        .map(|d| (Angle::from_degrees(d), from_db(rng.gen_range(spec.rho_db.clone()))))
        .collect();
    Scenario {
        model,
        theta0: Angle::from_degrees(theta0),
        steps,
    }
}

/// Worst cases of every per-step invariant over one scenario. Relative
/// quantities are scaled by the natural magnitude of the checked object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub steps: usize,
    /// `|L − ρ|/ρ` over OPARC, PARC and A²RC steps.
    pub max_level_error: f64,
    /// OPARC chain: relative Hermitian defect of `T_k` and `T_k⁻¹`.
    pub max_hermitian_defect: f64,
    pub non_pd_steps: usize,
    /// Steps from a positive definite `T_{k-1}` where `T_k ≻ 0` disagrees
    /// with `ρ_k < ξ_k²/|ξ_c|²`.
    pub pd_condition_mismatches: usize,
    /// OPARC chain: `‖invert(T_k) − T_k⁻¹‖_max / ‖T_k⁻¹‖_max`.
    pub max_woodbury_gap: f64,
    /// Samples of `C_γ` whose gain beats `γ_⋆` by more than `1e−9` relative.
    pub gamma_scan_violations: usize,
    /// Counted only from a positive definite `T_{k-1}`.
    pub argmax_disagreements: usize,
    pub max_roundtrip_error: f64,
    /// Counted only when the steering vectors of the controlled directions
    /// are linearly independent and fewer than `N`.
    pub max_span_residual: f64,
    pub span_leading_error: f64,
    /// Counted only from a positive definite `T_{k-1}`.
    pub sign_mismatches: usize,
    pub min_modulus_violations: usize,
    /// `‖T̆_k⁻¹ a(θ₀) − w_k‖ / ‖w_k‖`.
    pub max_implicit_residual: f64,
    /// `|ℑ(γ_⋆/ξ_c)| / |γ_⋆/ξ_c|`.
    pub max_reality_residue: f64,
}

impl Audit {
    /// Folds another audit into this one, keeping worst cases and totals.
    pub fn merge(&mut self, o: &Audit) {
        self.steps += o.steps;
        self.max_level_error = self.max_level_error.max(o.max_level_error);
        self.max_hermitian_defect = self.max_hermitian_defect.max(o.max_hermitian_defect);
        self.non_pd_steps += o.non_pd_steps;
        self.pd_condition_mismatches += o.pd_condition_mismatches;
        self.max_woodbury_gap = self.max_woodbury_gap.max(o.max_woodbury_gap);
        self.gamma_scan_violations += o.gamma_scan_violations;
        self.argmax_disagreements += o.argmax_disagreements;
        self.max_roundtrip_error = self.max_roundtrip_error.max(o.max_roundtrip_error);
        self.max_span_residual = self.max_span_residual.max(o.max_span_residual);
        self.span_leading_error = self.span_leading_error.max(o.span_leading_error);
        self.sign_mismatches += o.sign_mismatches;
        self.min_modulus_violations += o.min_modulus_violations;
        self.max_implicit_residual = self.max_implicit_residual.max(o.max_implicit_residual);
        self.max_reality_residue = self.max_reality_residue.max(o.max_reality_residue);
    }
}

fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(f64::MIN_POSITIVE)
}

/// Runs all three methods over the scenario and cross-checks every closed
/// form against brute force. Engine errors propagate.
pub fn audit_scenario(sc: &Scenario, samples: usize) -> Result<Audit> {
    let model = &sc.model;
    let a0 = model.steering_vector(sc.theta0);
    let mut audit = Audit {
        steps: sc.steps.len(),
        ..Audit::default()
    };

    let mut state = VcmState::identity(model.len());
    let mut prev_pd = true;
    let mut w = a0.clone();
    let mut done: Vec<Angle> = Vec::new();
    for &(theta_k, rho) in &sc.steps {
        let ak = model.steering_vector(theta_k);
        let predicted = predict_beta_sign(&w, &ak, &a0, rho)?;
        let (next, r) = oparc_step(&state, &w, model, sc.theta0, theta_k, rho)?;

        audit.max_level_error = audit.max_level_error.max(rel((r.achieved_level - rho).abs(), rho));
        let ratio = r.gamma.gamma_star / r.xi.xic;
        audit.max_reality_residue = audit.max_reality_residue.max(rel(ratio.im.abs(), ratio.norm()));

        let scan = scan_gamma_for_gain(&r.gamma.circle, &r.xi, samples)?;
        if scan.best_objective > gain_of_gamma(&r.xi, r.gamma.gamma_star) * (1.0 + 1e-9) {
            audit.gamma_scan_violations += 1;
        }

        for beta in [r.beta.beta_l, r.beta.beta_r] {
            let b = Complex64::new(beta, 0.0);
            let back = gamma_to_beta(beta_to_gamma(b, &r.xi)?, &r.xi)?;
            audit.max_roundtrip_error = audit.max_roundtrip_error.max(rel((back - b).norm(), b.norm().max(1.0)));
        }
        for g in [r.gamma.gamma_a, r.gamma.gamma_b] {
            let back = beta_to_gamma(gamma_to_beta(g, &r.xi)?, &r.xi)?;
            audit.max_roundtrip_error = audit.max_roundtrip_error.max(rel((back - g).norm(), g.norm().max(1.0)));
        }

        let pd = is_positive_definite(next.t())?;
        if !pd {
            audit.non_pd_steps += 1;
        }
        if prev_pd {
            let actual = if r.beta.beta_star >= 0.0 {
                BetaSign::NonNegative
            } else {
                BetaSign::Negative
            };
            if actual != predicted {
                audit.sign_mismatches += 1;
            }
            if !scan_beta_double_argmax(&r.beta.circle, &state, &a0, &ak, samples)?.agree_within(1) {
                audit.argmax_disagreements += 1;
            }
            if pd != (rho < r.xi.xik * r.xi.xik / r.xi.xic.norm_sqr()) {
                audit.pd_condition_mismatches += 1;
            }
        }

        done.push(theta_k);
        let delta = r.weight_after.sub(&w);
        if done.len() < model.len() && delta.norm() > 1e-12 * w.norm() {
            let span = span_decomposition_check(&delta, &done, model)?;
            if !span.rank_deficient {
                audit.max_span_residual = audit.max_span_residual.max(span.relative_residual(&delta));
                audit.span_leading_error = audit.span_leading_error.max(rel(
                    (span.coefficients[0] - r.gamma_applied).norm(),
                    r.gamma_applied.norm(),
                ));
            }
        }

        audit.max_hermitian_defect = audit
            .max_hermitian_defect
            .max(relative_hermitian_defect(next.t()))
            .max(relative_hermitian_defect(next.t_inv()));
        let direct = invert(next.t())?;
        audit.max_woodbury_gap = audit
            .max_woodbury_gap
            .max(rel(direct.sub(next.t_inv())?.max_abs(), next.t_inv().max_abs()));

        state = next;
        prev_pd = pd;
        w = r.weight_after;
    }

    let mut state = VcmState::identity(model.len());
    let mut w = a0.clone();
    for &(theta_k, rho) in &sc.steps {
        let (next, r) = parc_step(&state, &w, model, sc.theta0, theta_k, rho)?;
        audit.max_level_error = audit.max_level_error.max(rel((r.achieved_level - rho).abs(), rho));
        state = next;
        w = r.weight_after;
    }

    let mut a2 = A2rcState::new(model, sc.theta0);
    for &(theta_k, rho) in &sc.steps {
        let (next, r) = a2rc_step(&a2, model, sc.theta0, theta_k, rho)?;
        audit.max_level_error = audit.max_level_error.max(rel((r.achieved_level - rho).abs(), rho));
        let probe = scan_circle(&r.circle, samples, |z| Ok(-z.norm()))?;
        if r.mu.norm() > -probe.best_objective + 1e-12 {
            audit.min_modulus_violations += 1;
        }
        let implicit_w = solve(&reconstruct_implicit_vcm(&next, model), &a0)?;
        audit.max_implicit_residual = audit
            .max_implicit_residual
            .max(rel(implicit_w.sub(next.weight()).norm(), next.weight().norm()));
        a2 = next;
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{beta_circle, compute_xi, gamma_circle, select_gamma};
    use rand::SeedableRng;

    fn setup() -> (ArrayModel, Angle, CVector) {
        let m = ArrayModel::tapered11();
        let th0 = Angle::from_degrees(20.0);
        let a0 = m.steering_vector(th0);
        (m, th0, a0)
    }

    #[test]
    fn gamma_scan_lands_near_closed_form() {
        let (m, _, a0) = setup();
        let ak = m.steering_vector(Angle::from_degrees(-45.0));
        let s0 = VcmState::identity(11);
        let xi = compute_xi(&s0, &a0, &ak).unwrap();
        let geo = gamma_circle(&a0, &ak, &a0, &ak, 1e-4).unwrap();
        let sel = select_gamma(&xi, &geo, 1e-4).unwrap();
        let scan = scan_gamma_for_gain(&geo.circle, &xi, DEFAULT_SAMPLES).unwrap();
        assert!((scan.best_param - sel.gamma_star).norm() <= scan.cell(&geo.circle) + 1e-12);
        assert!(gain_of_gamma(&xi, sel.gamma_star) >= scan.best_objective * (1.0 - 1e-9));
    }

    #[test]
    fn too_few_samples() {
        let c = CircleR2 {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        assert_eq!(scan_circle(&c, 10, |_| Ok(0.0)), Err(Error::TooFewSamples(10)));
    }

    #[test]
    fn flat_objective_returns_first_sample() {
        let c = CircleR2 {
            center: [1.0, 0.0],
            radius: 0.5,
        };
        let s = scan_circle(&c, 36, |_| Ok(2.0)).unwrap();
        assert_eq!(s.best_index, 0);
        assert_eq!(s.best_param, Complex64::new(1.5, 0.0));
    }

    #[test]
    fn beta_gain_closed_forms_agree() {
        let (m, th0, a0) = setup();
        let (s1, _) = oparc_step(&VcmState::identity(11), &a0, &m, th0, Angle::from_degrees(-45.0), 1e-4).unwrap();
        let ak = m.steering_vector(Angle::from_degrees(-5.0));
        let xi = compute_xi(&s1, &a0, &ak).unwrap();
        let c = beta_circle(&xi, 1e-3).unwrap();
        for i in 0..32 {
            let b = c.point_at(std::f64::consts::TAU * (i as f64 + 0.5) / 32.0);
            let direct = {
                let t = rank1_update(s1.t(), &ak, b).unwrap();
                let w = crate::numerics::solve(&t, &a0).unwrap();
                array_gain(&w, &t, &a0).unwrap()
            };
            let g1 = gain_of_beta(&xi, b).unwrap();
            let g2 = gain_of_beta_on_circle(&xi, &c, b);
            assert!((g1 - direct).abs() < 1e-9 * direct, "{g1} {direct}");
            assert!((g2 - direct).abs() < 1e-9 * direct, "{g2} {direct}");
        }
    }

    #[test]
    fn double_argmax_scans_agree_on_step_two() {
        let (m, th0, a0) = setup();
        let (s1, r1) = oparc_step(&VcmState::identity(11), &a0, &m, th0, Angle::from_degrees(-45.0), 1e-4).unwrap();
        let ak = m.steering_vector(Angle::from_degrees(-5.0));
        let (_, r2) = oparc_step(&s1, &r1.weight_after, &m, th0, Angle::from_degrees(-5.0), 1e-3).unwrap();
        let scan = scan_beta_double_argmax(&r2.beta.circle, &s1, &a0, &ak, DEFAULT_SAMPLES).unwrap();
        assert!(scan.agree_within(1), "{scan:?}");
        let cell = scan.next_vcm.cell(&r2.beta.circle);
        assert!((scan.next_vcm.best_param - r2.beta.beta_star).norm() <= cell);
        assert!((scan.prev_vcm.best_param - r2.beta.beta_star).norm() <= cell);
    }

    #[test]
    fn span_of_first_step_is_exact() {
        let (m, th0, a0) = setup();
        let th1 = Angle::from_degrees(-45.0);
        let (_, r1) = oparc_step(&VcmState::identity(11), &a0, &m, th0, th1, 1e-4).unwrap();
        let delta = r1.weight_after.sub(&a0);
        let chk = span_decomposition_check(&delta, &[th1], &m).unwrap();
        assert!(chk.residual <= 1e-12);
        assert!((chk.coefficients[0] - r1.gamma_applied).norm() < 1e-12);
    }

    #[test]
    fn span_of_second_step_leads_with_gamma() {
        let (m, th0, a0) = setup();
        let (th1, th2) = (Angle::from_degrees(-45.0), Angle::from_degrees(-5.0));
        let (s1, r1) = oparc_step(&VcmState::identity(11), &a0, &m, th0, th1, 1e-4).unwrap();
        let (_, r2) = oparc_step(&s1, &r1.weight_after, &m, th0, th2, 1e-3).unwrap();
        let delta = r2.weight_after.sub(&r1.weight_after);
        let chk = span_decomposition_check(&delta, &[th1, th2], &m).unwrap();
        assert!(chk.relative_residual(&delta) <= 1e-9);
        assert!(!chk.rank_deficient);
        assert!((chk.coefficients[0] - r2.gamma_applied).norm() < 1e-9);
    }

    #[test]
    fn span_flags_repeated_direction() {
        let (m, _, _) = setup();
        let th = Angle::from_degrees(-45.0);
        let delta = m.steering_vector(th);
        let chk = span_decomposition_check(&delta, &[th, th], &m).unwrap();
        assert!(chk.rank_deficient);
        assert!(chk.residual < 1e-12);
        assert!(span_decomposition_check(&delta, &[], &m).is_err());
    }

    #[test]
    fn audit_of_random_scenarios_is_clean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let sc = random_scenario(&mut rng, &ScenarioSpec::default());
            let a = audit_scenario(&sc, 180).unwrap();
            assert!(a.max_level_error <= 1e-9, "{a:?}");
            assert_eq!(
                (a.non_pd_steps, a.sign_mismatches, a.gamma_scan_violations),
                (0, 0, 0),
                "{a:?}"
            );
            assert_eq!(
                (
                    a.pd_condition_mismatches,
                    a.argmax_disagreements,
                    a.min_modulus_violations
                ),
                (0, 0, 0)
            );
        }
    }
}
