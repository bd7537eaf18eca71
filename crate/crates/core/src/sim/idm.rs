use serde::{Deserialize, Serialize};

/// Hard floor on any IDM output; also what a vehicle gets when its leader
/// already overlaps it.
pub const EMERGENCY_DECEL: f64 = 9.0;

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    #[serde(alias = "v0")]
    pub desired_speed: f64,
    #[serde(alias = "s0")]
    pub min_gap: f64,
    #[serde(alias = "T")]
    pub time_headway: f64,
    #[serde(alias = "a")]
    pub max_accel: f64,
    #[serde(alias = "b")]
    pub comfort_decel: f64,
    #[serde(alias = "delta")]
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 28.0,
            min_gap: 2.0,
            time_headway: 1.5,
            max_accel: 2.0,
            comfort_decel: 3.0,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    pub fn is_valid(&self) -> bool {
        [
            self.desired_speed,
            self.min_gap,
            self.time_headway,
            self.max_accel,
            self.comfort_decel,
            self.exponent,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite())
    }
}

/// Partial IDM override as written in scenario files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmOverrides {
    #[serde(default, alias = "v0", skip_serializing_if = "Option::is_none")]
    pub desired_speed: Option<f64>,
    #[serde(default, alias = "s0", skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    #[serde(default, alias = "T", skip_serializing_if = "Option::is_none")]
    pub time_headway: Option<f64>,
    #[serde(default, alias = "a", skip_serializing_if = "Option::is_none")]
    pub max_accel: Option<f64>,
    #[serde(default, alias = "b", skip_serializing_if = "Option::is_none")]
    pub comfort_decel: Option<f64>,
    #[serde(default, alias = "delta", skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

impl IdmOverrides {
    pub fn apply(&self, base: IdmParams) -> IdmParams {
        IdmParams {
            desired_speed: self.desired_speed.unwrap_or(base.desired_speed),
            min_gap: self.min_gap.unwrap_or(base.min_gap),
            time_headway: self.time_headway.unwrap_or(base.time_headway),
            max_accel: self.max_accel.unwrap_or(base.max_accel),
            comfort_decel: self.comfort_decel.unwrap_or(base.comfort_decel),
            exponent: self.exponent.unwrap_or(base.exponent),
        }
    }
}

/// Nearest vehicle ahead: bumper-to-bumper gap and its speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmAccel {
    pub accel: f64,
    /// Set when the gap was already non-positive and the output was forced
    /// to full emergency braking.
    pub emergency: bool,
}

/// `a * [1 - (v/v0)^delta - (s*/s)^2]` with
/// `s* = s0 + max(0, v*T + v*dv / (2*sqrt(a*b)))`; no leader drops the
/// interaction term.
pub fn idm_acceleration(speed: f64, leader: Option<Leader>, p: &IdmParams) -> IdmAccel {
    let free = p.max_accel * (1.0 - (speed / p.desired_speed).powf(p.exponent));
    let accel = match leader {
        None => free,
        Some(l) if l.gap <= 0.0 => {
            return IdmAccel {
                accel: -EMERGENCY_DECEL,
                emergency: true,
            }
        }
        Some(l) => {
            let approach = speed - l.speed;
            let dynamic = speed * p.time_headway
                + speed * approach / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
            let desired_gap = p.min_gap + dynamic.max(0.0);
            free - p.max_accel * (desired_gap / l.gap).powi(2)
        }
    };
    IdmAccel {
        accel: accel.clamp(-EMERGENCY_DECEL, p.max_accel),
        emergency: false,
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn params() -> IdmParams {
        IdmParams {
            desired_speed: 30.0,
            ..IdmParams::default()
        }
    }

    #[test]
    fn free_flow_equilibrium_is_zero() {
        let out = idm_acceleration(30.0, None, &params());
        assert_eq!(out.accel, 0.0);
        assert!(!out.emergency);
    }

    #[test]
    fn equilibrium_spacing_matches_direct_formula() {
        // Independent evaluation: v=v0=30, dv=0, s=s0+vT=47 so s*=47 and
        // a*[1 - 1 - (47/47)^2] = -2.
        let p = params();
        let gap = 2.0 + 30.0 * 1.5;
        let expected = 2.0 * (1.0 - (30.0f64 / 30.0).powi(4) - (47.0f64 / gap).powi(2));
        let out = idm_acceleration(30.0, Some(Leader { gap, speed: 30.0 }), &p);
        assert_relative_eq!(out.accel, expected, epsilon = 1e-12);
        assert_relative_eq!(out.accel, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn standstill_behind_stopped_leader_does_not_creep() {
        let p = params();
        let at_min_gap = idm_acceleration(0.0, Some(Leader { gap: 2.0, speed: 0.0 }), &p);
        assert!(at_min_gap.accel <= 0.0);
        let inside = idm_acceleration(0.0, Some(Leader { gap: 1.0, speed: 0.0 }), &p);
        assert_relative_eq!(inside.accel, 2.0 * (1.0 - 4.0), epsilon = 1e-12);
    }

    #[test]
    fn non_positive_gap_is_emergency_braking() {
        let out = idm_acceleration(20.0, Some(Leader { gap: 0.0, speed: 10.0 }), &params());
        assert!(out.emergency);
        assert_eq!(out.accel, -EMERGENCY_DECEL);
        let out = idm_acceleration(20.0, Some(Leader { gap: -3.0, speed: 10.0 }), &params());
        assert!(out.emergency);
    }

    #[test]
    fn output_is_bounded() {
        let p = params();
        let hard = idm_acceleration(35.0, Some(Leader { gap: 0.5, speed: 0.0 }), &p);
        assert_eq!(hard.accel, -EMERGENCY_DECEL);
        let free = idm_acceleration(0.0, None, &p);
        assert_eq!(free.accel, p.max_accel);
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let o: IdmOverrides = toml::from_str("v0 = 22.0\nT = 1.0").unwrap();
        let p = o.apply(IdmParams::default());
        assert_eq!(p.desired_speed, 22.0);
        assert_eq!(p.time_headway, 1.0);
        assert_eq!(p.min_gap, 2.0);
    }
}
