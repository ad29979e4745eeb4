//! Air-to-ground signal loss and the graded coverage function.
//!
//! The loss between a UAV at `x` and a ground user at `y` is
//! `F + 10 η log10(‖x − y‖) + B / (1 + α exp(−β (θ − α)))`, where `θ` is the
//! elevation angle in degrees, `F = 10 η log10(4π f / c) + φ_NLoS` and
//! `B = φ_LoS − φ_NLoS`. Coverage degrades affinely from 1 at the minimum
//! achievable loss `L−` to 0 at the user's threshold.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Box3, Point2, Point3, Rect2};

/// UAV and user closer than this (meters) are treated as coincident.
pub const DISTANCE_FLOOR: f64 = 1e-6;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// The seven raw channel parameters; this is the on-disk form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Excess LoS loss in dB.
    pub phi_los: f64,
    /// Excess NLoS loss in dB.
    pub phi_nlos: f64,
    /// Carrier frequency in Hz.
    pub freq: f64,
    pub light_speed: f64,
}

impl ChannelParams {
    /// Suburban parameters at 2 GHz.
    pub const fn suburban() -> Self {
        ChannelParams {
            eta: 2.0,
            alpha: 4.88,
            beta: 0.43,
            phi_los: 0.1,
            phi_nlos: 21.0,
            freq: 2e9,
            light_speed: SPEED_OF_LIGHT,
        }
    }

    pub fn f_const(&self) -> f64 {
        10.0 * self.eta * (4.0 * std::f64::consts::PI * self.freq / self.light_speed).log10()
            + self.phi_nlos
    }

    pub fn b_const(&self) -> f64 {
        self.phi_los - self.phi_nlos
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("phi_los", self.phi_los),
            ("phi_nlos", self.phi_nlos),
            ("freq", self.freq),
            ("light_speed", self.light_speed),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("env.{name}"), "must be finite"));
            }
        }
        if self.eta <= 0.0 {
            return Err(Error::invalid("env.eta", "must be positive"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::invalid("env.alpha", "must be positive"));
        }
        if self.freq <= 0.0 || self.light_speed <= 0.0 {
            return Err(Error::invalid("env.freq", "frequency and light speed must be positive"));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::suburban()
    }
}

/// Channel parameters with the derived loss constants and the loss range
/// attainable over a given flight box and demand region.
///
/// Serializes as the raw [`ChannelParams`]; derived fields are always
/// recomputed from the geometry they are bound to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub params: ChannelParams,
    pub f_const: f64,
    pub b_const: f64,
    pub l_lower: f64,
    pub l_upper: f64,
}

impl Serialize for Environment {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.params.serialize(serializer)
    }
}

impl Environment {
    pub fn new(params: ChannelParams, q: &Box3, s: &Rect2) -> Result<Self> {
        params.validate()?;
        if !q.is_valid() {
            return Err(Error::invalid("q_region", "bounds must be finite and ordered"));
        }
        if !s.is_valid() {
            return Err(Error::invalid("s_region", "bounds must be finite and ordered"));
        }
        if q.h_min <= 0.0 {
            return Err(Error::NonPositiveAltitude(q.h_min));
        }
        let (l_lower, l_upper) = loss_bounds(&params, q, s);
        if !(l_upper > l_lower) {
            return Err(Error::DegenerateLossBounds {
                lower: l_lower,
                upper: l_upper,
            });
        }
        Ok(Environment {
            params,
            f_const: params.f_const(),
            b_const: params.b_const(),
            l_lower,
            l_upper,
        })
    }

    pub fn from_json(json: &str, q: &Box3, s: &Rect2) -> Result<Self> {
        let params: ChannelParams = serde_json::from_str(json).map_err(|source| Error::Json {
            path: "env".into(),
            source,
        })?;
        Environment::new(params, q, s)
    }

    /// The elevation-angle blend term `B / (1 + α e^{−β(θ−α)})`.
    pub fn sigmoid_term(&self, theta_deg: f64) -> f64 {
        let p = &self.params;
        self.b_const / (1.0 + p.alpha * (-p.beta * (theta_deg - p.alpha)).exp())
    }

    /// Path loss without the distance-floor check. Callers guarantee the
    /// UAV is strictly above the ground plane.
    pub fn loss(&self, uav: Point3, user: Point2) -> f64 {
        let dist = uav.distance_to_user(user);
        self.f_const
            + 10.0 * self.params.eta * dist.log10()
            + self.sigmoid_term(elevation_angle(uav, user))
    }

    /// Loss with the LoS term forced on: `F + 10 η log10(dist) + B`.
    pub fn los_loss(&self, dist: f64) -> f64 {
        self.f_const + 10.0 * self.params.eta * dist.log10() + self.b_const
    }

    /// `M = L+ − L−`.
    pub fn big_m(&self) -> f64 {
        self.l_upper - self.l_lower
    }
}

/// Elevation angle in degrees of the UAV seen from the user. Directly
/// overhead maps to 90.
pub fn elevation_angle(uav: Point3, user: Point2) -> f64 {
    uav.z.atan2(uav.horizontal_distance(user)).to_degrees()
}

pub fn path_loss(uav: Point3, user: Point2, env: &Environment) -> Result<f64> {
    let distance = uav.distance_to_user(user);
    if !(distance >= DISTANCE_FLOOR) {
        return Err(Error::CoincidentPoints {
            distance,
            floor: DISTANCE_FLOOR,
        });
    }
    Ok(env.loss(uav, user))
}

/// Loss seen directly below a UAV hovering at altitude `h`, with the LoS
/// term at its limit.
pub fn overhead_loss(h: f64, env: &Environment) -> Result<f64> {
    overhead_loss_raw(h, &env.params)
}

fn overhead_loss_raw(h: f64, params: &ChannelParams) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveAltitude(h));
    }
    Ok(params.f_const() + 10.0 * params.eta * h.log10() + params.b_const())
}

/// `max{0, (d − L)/(d − L−)}`, clamped to `[0, 1]`.
pub fn coverage_from_loss(loss: f64, mslt: f64, l_lower: f64) -> f64 {
    ((mslt - loss) / (mslt - l_lower)).clamp(0.0, 1.0)
}

pub fn coverage_mu(uav: Point3, user: Point2, mslt: f64, env: &Environment) -> Result<f64> {
    if !(mslt > env.l_lower) {
        return Err(Error::ThresholdBelowMinimumLoss {
            mslt,
            l_lower: env.l_lower,
        });
    }
    let loss = path_loss(uav, user, env)?;
    Ok(coverage_from_loss(loss, mslt, env.l_lower))
}

/// `(L−, L+)` over `Q × S`.
///
/// `L−` is the overhead loss at the lowest altitude. `L+` combines the
/// largest corner-to-corner separation with the blend term at its NLoS
/// extreme, which bounds every attainable loss from above.
pub fn loss_bounds(params: &ChannelParams, q: &Box3, s: &Rect2) -> (f64, f64) {
    // h_min > 0 is checked by the caller; fall back to NaN so a bad box
    // surfaces as degenerate bounds rather than a panic.
    let l_lower = overhead_loss_raw(q.h_min, params).unwrap_or(f64::NAN);
    let max_dist = q
        .corners()
        .iter()
        .flat_map(|c| s.corners().map(|u| c.distance_to_user(u)))
        .fold(0.0_f64, f64::max);
    let nlos_extreme = params.b_const().max(0.0);
    let l_upper = params.f_const() + 10.0 * params.eta * max_dist.log10() + nlos_extreme;
    (l_lower, l_upper)
}
