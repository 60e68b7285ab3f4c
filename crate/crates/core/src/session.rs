//! Sequential control sessions: one method, one array, one beam axis, and an
//! immutable chain of states that undo simply truncates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::a2rc::{a2rc_step, A2rcState};
use crate::array::{Angle, ArrayModel};
use crate::control::{oparc_step, parc_step, CircleR2, ControlStepResult, VcmState};
use crate::error::{Error, Result};
use crate::metrics::{from_db, sample_pattern, step_metrics, to_db, GridSpec, PatternGrid, StepMetrics};
use crate::numerics::CVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oparc,
    Parc,
    A2rc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Oparc, Method::Parc, Method::A2rc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Oparc => "oparc",
            Method::Parc => "parc",
            Method::A2rc => "a2rc",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oparc" => Ok(Method::Oparc),
            "parc" => Ok(Method::Parc),
            "a2rc" => Ok(Method::A2rc),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub theta_deg: f64,
    pub rho_db: f64,
}

impl StepRequest {
    pub fn validate(&self) -> Result<()> {
        if !self.theta_deg.is_finite() || !self.rho_db.is_finite() {
            return Err(Error::NonFinite("step request"));
        }
        if !(-90.0..=90.0).contains(&self.theta_deg) {
            return Err(Error::InvalidDirection(self.theta_deg));
        }
        if self.rho_db > 0.0 {
            return Err(Error::LevelOutOfRange {
                rho: from_db(self.rho_db),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleWire {
    pub center: [f64; 2],
    pub radius: f64,
}

impl From<CircleR2> for CircleWire {
    fn from(c: CircleR2) -> Self {
        Self {
            center: c.center,
            radius: c.radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSummary {
    pub circle: CircleWire,
    pub gamma_a: Complex64,
    pub gamma_b: Complex64,
    pub zeta: f64,
    pub d_point: Complex64,
    pub chi: f64,
    pub gamma_star: Complex64,
    pub gamma_rejected: Complex64,
    pub applied: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSummary {
    pub circle: CircleWire,
    pub beta_l: f64,
    pub beta_r: f64,
    pub beta_star: f64,
    pub beta_rejected: f64,
    pub applied: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSummary {
    pub circle: CircleWire,
    pub mu: Complex64,
    /// `diag(Σ̆_k)` after this step.
    pub implicit_inrs: Vec<Complex64>,
    /// `β̆_{k,i} − β̆_{k−1,i}` for the earlier directions.
    pub deltas: Vec<Complex64>,
    pub newest_inr: Complex64,
}

/// Everything a client needs to redraw after one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    /// 1-based.
    pub index: usize,
    pub method: Method,
    pub theta_deg: f64,
    pub rho_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSummary>,
    pub achieved_level_db: f64,
    pub gain_db: f64,
    pub metrics: StepMetrics,
    pub weight: CVector,
}

#[derive(Clone, Debug)]
enum Engine {
    Vcm { state: VcmState, weight: CVector },
    A2rc(A2rcState),
}

impl Engine {
    fn weight(&self) -> &CVector {
        match self {
            Engine::Vcm { weight, .. } => weight,
            Engine::A2rc(s) => s.weight(),
        }
    }
}

#[derive(Clone, Debug)]
struct Link {
    request: StepRequest,
    engine: Engine,
    summary: StepSummary,
}

#[derive(Clone, Debug)]
pub struct Session {
    model: ArrayModel,
    theta0: Angle,
    method: Method,
    grid: GridSpec,
    origin: Engine,
    chain: Vec<Link>,
}

fn summarize_vcm(r: &ControlStepResult) -> (GammaSummary, BetaSummary) {
    let g = &r.gamma;
    let b = &r.beta;
    (
        GammaSummary {
            circle: g.circle.into(),
            gamma_a: g.gamma_a,
            gamma_b: g.gamma_b,
            zeta: g.zeta,
            d_point: g.d_point,
            chi: g.chi,
            gamma_star: g.gamma_star,
            gamma_rejected: g.gamma_rejected,
            applied: r.gamma_applied,
        },
        BetaSummary {
            circle: b.circle.into(),
            beta_l: b.beta_l,
            beta_r: b.beta_r,
            beta_star: b.beta_star,
            beta_rejected: b.beta_rejected,
            applied: r.beta_applied,
        },
    )
}

impl Session {
    pub fn new(model: ArrayModel, theta0: Angle, method: Method) -> Self {
        let origin = match method {
            Method::A2rc => Engine::A2rc(A2rcState::new(&model, theta0)),
            _ => Engine::Vcm {
                state: VcmState::identity(model.len()),
                weight: model.steering_vector(theta0),
            },
        };
        Self {
            model,
            theta0,
            method,
            grid: GridSpec::default(),
            origin,
            chain: Vec::new(),
        }
    }

    /// Grid used for `J`.
    pub fn with_metric_grid(mut self, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        self.grid = grid;
        Ok(self)
    }

    pub fn model(&self) -> &ArrayModel {
        &self.model
    }

    pub fn theta0(&self) -> Angle {
        self.theta0
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn step_count(&self) -> usize {
        self.chain.len()
    }

    pub fn requests(&self) -> Vec<StepRequest> {
        self.chain.iter().map(|l| l.request).collect()
    }

    pub fn summaries(&self) -> Vec<&StepSummary> {
        self.chain.iter().map(|l| &l.summary).collect()
    }

    pub fn last_summary(&self) -> Option<&StepSummary> {
        self.chain.last().map(|l| &l.summary)
    }

    fn head(&self) -> &Engine {
        self.chain.last().map_or(&self.origin, |l| &l.engine)
    }

    pub fn weight(&self) -> &CVector {
        self.head().weight()
    }

    /// OPARC/PARC state, if this is a VCM-based session.
    pub fn vcm_state(&self) -> Option<&VcmState> {
        match self.head() {
            Engine::Vcm { state, .. } => Some(state),
            Engine::A2rc(_) => None,
        }
    }

    pub fn a2rc_state(&self) -> Option<&A2rcState> {
        match self.head() {
            Engine::A2rc(s) => Some(s),
            Engine::Vcm { .. } => None,
        }
    }

    pub fn pattern(&self, grid: &GridSpec) -> Result<PatternGrid> {
        sample_pattern(self.weight(), &self.model, self.theta0, grid)
    }

    /// Applies one control step. On error the session is unchanged.
    pub fn step(&mut self, request: StepRequest) -> Result<&StepSummary> {
        request.validate()?;
        let theta_k = Angle::from_degrees(request.theta_deg);
        let rho = from_db(request.rho_db).min(1.0);
        let head = self.head();
        let w_prev = head.weight().clone();
        let (engine, gamma, beta, mu, achieved, gain) = match head {
            Engine::Vcm { state, weight } => {
                let f = if self.method == Method::Parc {
                    parc_step
                } else {
                    oparc_step
                };
                let (next, r) = f(state, weight, &self.model, self.theta0, theta_k, rho)?;
                let (g, b) = summarize_vcm(&r);
                let engine = Engine::Vcm {
                    state: next,
                    weight: r.weight_after.clone(),
                };
                (engine, Some(g), Some(b), None, r.achieved_level, r.array_gain)
            }
            Engine::A2rc(state) => {
                let (next, r) = a2rc_step(state, &self.model, self.theta0, theta_k, rho)?;
                let mu = MuSummary {
                    circle: r.circle.into(),
                    mu: r.mu,
                    implicit_inrs: r.implicit.inrs.clone(),
                    deltas: r.implicit.deltas.clone(),
                    newest_inr: r.implicit.newest,
                };
                (Engine::A2rc(next), None, None, Some(mu), r.achieved_level, r.array_gain)
            }
        };
        let earlier: Vec<Angle> = self
            .chain
            .iter()
            .map(|l| Angle::from_degrees(l.request.theta_deg))
            .collect();
        let metrics = step_metrics(
            &w_prev,
            engine.weight(),
            &self.model,
            self.theta0,
            &earlier,
            gain,
            &self.grid,
        )?;
        let summary = StepSummary {
            index: self.chain.len() + 1,
            method: self.method,
            theta_deg: request.theta_deg,
            rho_db: request.rho_db,
            gamma,
            beta,
            mu,
            achieved_level_db: to_db(achieved),
            gain_db: to_db(gain),
            metrics,
            weight: engine.weight().clone(),
        };
        self.chain.push(Link {
            request,
            engine,
            summary,
        });
        Ok(&self.chain.last().expect("just pushed").summary)
    }

    /// Drops the last step. Returns `false` when there was nothing to undo.
    pub fn undo(&mut self) -> bool {
        self.chain.pop().is_some()
    }

    /// Rebuilds a session by replaying requests in order.
    pub fn replay(model: ArrayModel, theta0: Angle, method: Method, requests: &[StepRequest]) -> Result<Self> {
        let mut s = Session::new(model, theta0, method);
        for r in requests {
            s.step(*r)?;
        }
        Ok(s)
    }
}
