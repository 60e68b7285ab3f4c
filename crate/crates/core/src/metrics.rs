//! Normalised response patterns, array gain, and the step-comparison costs
//! `D` (level shift at an earlier control point, dB) and `J` (RMS change of
//! the linear pattern).

use serde::{Deserialize, Serialize};

use crate::array::{Angle, ArrayModel};
use crate::error::{Error, Result};
use crate::numerics::{quad_form, CMatrix, CVector};

/// Floor applied to dB levels in exported files only.
pub const EXPORT_FLOOR_DB: f64 = -200.0;

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `L(θ, θ₀) = |w^H a(θ)|² / |w^H a(θ₀)|²`.
pub fn normalized_response(w: &CVector, model: &ArrayModel, theta: Angle, theta0: Angle) -> Result<f64> {
    let a0 = model.steering_vector(theta0);
    let ref_resp = w.dot(&a0).norm_sqr();
    if ref_resp.sqrt() <= 1e-14 * w.norm() * a0.norm() {
        return Err(Error::BeamAxisNull);
    }
    Ok(w.dot(&model.steering_vector(theta)).norm_sqr() / ref_resp)
}

/// `G = |w^H a(θ₀)|² / |w^H T w|`, linear.
///
/// The modulus in the denominator lets the same formula serve the complex
/// (non-Hermitian) implicit VCM of A²RC.
pub fn array_gain(w: &CVector, t: &CMatrix, a0: &CVector) -> Result<f64> {
    let num = w.dot(a0).norm_sqr();
    let den = quad_form(t, w, w)?.norm();
    if den.is_nan() || den <= 1e-300 || !num.is_finite() {
        return Err(Error::DegenerateGain);
    }
    Ok(num / den)
}

/// `|10 log10 L₂(θ₁) − 10 log10 L₁(θ₁)|`.
pub fn metric_d(w1: &CVector, w2: &CVector, model: &ArrayModel, theta1: Angle, theta0: Angle) -> Result<f64> {
    let l1 = normalized_response(w1, model, theta1, theta0)?;
    let l2 = normalized_response(w2, model, theta1, theta0)?;
    Ok((to_db(l2) - to_db(l1)).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub from_deg: f64,
    pub to_deg: f64,
    pub step_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            from_deg: -90.0,
            to_deg: 90.0,
            step_deg: 0.2,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.from_deg.is_finite()
            && self.to_deg.is_finite()
            && self.step_deg.is_finite()
            && self.step_deg > 0.0
            && self.from_deg <= self.to_deg
            && self.from_deg >= -90.0
            && self.to_deg <= 90.0
            && self.len_unchecked() <= 1_000_000;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "from={} to={} step={}",
                self.from_deg, self.to_deg, self.step_deg
            )))
        }
    }

    fn len_unchecked(&self) -> usize {
        ((self.to_deg - self.from_deg) / self.step_deg + 1e-9).floor() as usize + 1
    }

    /// Number of samples; both endpoints are included when the span is a
    /// whole number of steps.
    pub fn len(&self) -> usize {
        self.len_unchecked()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Angles computed as `from + i·step` so no error accumulates.
    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.from_deg + i as f64 * self.step_deg)
            .collect()
    }
}

/// `J = sqrt(mean |L₂(ϑ_i) − L₁(ϑ_i)|²)` over the grid, on linear levels.
pub fn metric_j(w1: &CVector, w2: &CVector, model: &ArrayModel, theta0: Angle, grid: &GridSpec) -> Result<f64> {
    grid.validate()?;
    let angles = grid.angles_deg();
    let mut acc = 0.0;
    for deg in &angles {
        let th = Angle::from_degrees(*deg);
        let d = normalized_response(w2, model, th, theta0)? - normalized_response(w1, model, th, theta0)?;
        acc += d * d;
    }
    Ok((acc / angles.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternGrid {
    pub angles_deg: Vec<f64>,
    pub levels_db: Vec<f64>,
}

impl PatternGrid {
    /// Level at the sample closest to `deg`.
    pub fn level_near(&self, deg: f64) -> Option<f64> {
        self.angles_deg
            .iter()
            .zip(&self.levels_db)
            .min_by(|a, b| (a.0 - deg).abs().total_cmp(&(b.0 - deg).abs()))
            .map(|(_, l)| *l)
    }

    /// Copy with levels clamped at [`EXPORT_FLOOR_DB`].
    pub fn floored(&self) -> PatternGrid {
        PatternGrid {
            angles_deg: self.angles_deg.clone(),
            levels_db: self.levels_db.iter().map(|l| l.max(EXPORT_FLOOR_DB)).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,level_db\n");
        for (a, l) in self.angles_deg.iter().zip(&self.levels_db) {
            out.push_str(&format!("{a:.4},{:.10}\n", l.max(EXPORT_FLOOR_DB)));
        }
        out
    }
}

pub fn sample_pattern(w: &CVector, model: &ArrayModel, theta0: Angle, grid: &GridSpec) -> Result<PatternGrid> {
    grid.validate()?;
    let angles_deg = grid.angles_deg();
    let levels_db = angles_deg
        .iter()
        .map(|deg| normalized_response(w, model, Angle::from_degrees(*deg), theta0).map(to_db))
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternGrid { angles_deg, levels_db })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Largest `D` over the earlier control directions; absent at step 1.
    pub d_db: Option<f64>,
    pub j_rms: f64,
    pub gain_db: f64,
}

/// Metrics for the transition `w_prev → w_next`.
pub fn step_metrics(
    w_prev: &CVector,
    w_next: &CVector,
    model: &ArrayModel,
    theta0: Angle,
    earlier: &[Angle],
    gain_linear: f64,
    grid: &GridSpec,
) -> Result<StepMetrics> {
    let mut d_db: Option<f64> = None;
    for th in earlier {
        let d = metric_d(w_prev, w_next, model, *th, theta0)?;
        d_db = Some(d_db.map_or(d, |m| m.max(d)));
    }
    Ok(StepMetrics {
        d_db,
        j_rms: metric_j(w_prev, w_next, model, theta0, grid)?,
        gain_db: to_db(gain_linear),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::make_ula;
    use num_complex::Complex64;

    fn ula() -> ArrayModel {
        make_ula(8, 0.5, 6.0 * std::f64::consts::PI * 1e8).unwrap()
    }

    #[test]
    fn self_normalisation() {
        let m = ArrayModel::tapered11();
        let th0 = Angle::from_degrees(20.0);
        let w = m.steering_vector(th0);
        assert!((normalized_response(&w, &m, th0, th0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beam_axis_null_is_rejected() {
        let m = make_ula(2, 0.5, 6.0 * std::f64::consts::PI * 1e8).unwrap();
        // [1, -1] nulls broadside.
        let w = CVector::new(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]).unwrap();
        let r = normalized_response(&w, &m, Angle::from_degrees(30.0), Angle::from_degrees(0.0));
        assert_eq!(r, Err(Error::BeamAxisNull));
    }

    #[test]
    fn quiescent_gain_is_norm_squared() {
        let m = ArrayModel::tapered11();
        let a0 = m.steering_vector(Angle::from_degrees(20.0));
        let g = array_gain(&a0, &CMatrix::identity(11), &a0).unwrap();
        assert!((g - a0.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn gain_scale_invariant() {
        let m = ula();
        let a0 = m.steering_vector(Angle::from_degrees(10.0));
        let w = a0.add_scaled(
            Complex64::new(0.3, -0.2),
            &m.steering_vector(Angle::from_degrees(-30.0)),
        );
        let t = CMatrix::identity(8);
        let g1 = array_gain(&w, &t, &a0).unwrap();
        let g2 = array_gain(&w.scale(Complex64::new(-2.0, 5.0)), &t, &a0).unwrap();
        assert!((g1 - g2).abs() < 1e-10 * g1);
        assert_eq!(array_gain(&CVector::zeros(8), &t, &a0), Err(Error::DegenerateGain));
    }

    #[test]
    fn identical_weights_give_zero_metrics() {
        let m = ArrayModel::tapered11();
        let th0 = Angle::from_degrees(20.0);
        let w = m.steering_vector(th0);
        assert_eq!(metric_d(&w, &w, &m, Angle::from_degrees(-45.0), th0).unwrap(), 0.0);
        assert_eq!(metric_j(&w, &w, &m, th0, &GridSpec::default()).unwrap(), 0.0);
    }

    #[test]
    fn metrics_symmetric() {
        let m = ula();
        let th0 = Angle::from_degrees(0.0);
        let w1 = m.steering_vector(th0);
        let w2 = w1.add_scaled(
            Complex64::new(-0.1, 0.05),
            &m.steering_vector(Angle::from_degrees(40.0)),
        );
        let th1 = Angle::from_degrees(40.0);
        let g = GridSpec::default();
        assert_eq!(
            metric_d(&w1, &w2, &m, th1, th0).unwrap(),
            metric_d(&w2, &w1, &m, th1, th0).unwrap()
        );
        assert_eq!(
            metric_j(&w1, &w2, &m, th0, &g).unwrap(),
            metric_j(&w2, &w1, &m, th0, &g).unwrap()
        );
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(GridSpec::default().len(), 901);
        let fine = GridSpec {
            from_deg: -90.0,
            to_deg: 90.0,
            step_deg: 0.1,
        };
        assert_eq!(fine.len(), 1801);
        let a = fine.angles_deg();
        assert_eq!((a[0], a[1800]), (-90.0, 90.0));
        assert!(GridSpec {
            from_deg: 0.0,
            to_deg: 1.0,
            step_deg: 0.0
        }
        .validate()
        .is_err());
        assert!(GridSpec {
            from_deg: 10.0,
            to_deg: -10.0,
            step_deg: 1.0
        }
        .validate()
        .is_err());
        assert!(GridSpec {
            from_deg: -100.0,
            to_deg: 0.0,
            step_deg: 1.0
        }
        .validate()
        .is_err());
    }

    fn peak_deg(m: &ArrayModel, th0: Angle) -> f64 {
        let p = sample_pattern(&m.steering_vector(th0), m, th0, &GridSpec::default()).unwrap();
        let (imax, _) = p
            .levels_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        p.angles_deg[imax]
    }

    #[test]
    fn quiescent_peak_at_beam_axis() {
        let th0 = Angle::from_degrees(20.0);
        assert!((peak_deg(&ula(), th0) - 20.0).abs() < 1e-9);
        // Element tapering pulls the tapered peak slightly toward broadside.
        let m = ArrayModel::tapered11();
        assert!((peak_deg(&m, th0) - 20.0).abs() <= 0.2 + 1e-9);
        let p = sample_pattern(&m.steering_vector(th0), &m, th0, &GridSpec::default()).unwrap();
        assert!(p.level_near(20.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn export_floor_is_presentation_only() {
        let p = PatternGrid {
            angles_deg: vec![0.0, 1.0],
            levels_db: vec![f64::NEG_INFINITY, -3.0],
        };
        assert_eq!(p.floored().levels_db, vec![EXPORT_FLOOR_DB, -3.0]);
        assert!(p.to_csv().starts_with("angle_deg,level_db\n0.0000,-200.0000000000\n"));
        assert_eq!(p.levels_db[0], f64::NEG_INFINITY);
    }
}
