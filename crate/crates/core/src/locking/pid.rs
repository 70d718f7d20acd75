use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// +1 or −1; multiplies the error before the controller terms.
    pub sign: f64,
    /// Actuation limit in radians.
    pub output_limit: f64,
}

impl PidConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pid.kp", self.kp), ("pid.ki", self.ki), ("pid.kd", self.kd)] {
            ensure(v.is_finite() && v >= 0.0, name, v, "must be finite and non-negative")?;
        }
        ensure(
            self.sign == 1.0 || self.sign == -1.0,
            "pid.sign",
            self.sign,
            "must be +1 or -1",
        )?;
        ensure(
            self.output_limit > 0.0 && self.output_limit.is_finite(),
            "pid.output_limit",
            self.output_limit,
            "must be positive",
        )
    }

    pub fn with_sign(&self, sign: f64) -> Self {
        Self {
            sign,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub previous_error: Option<f64>,
    pub output: f64,
}

/// One controller update. The integrator only accumulates while the output is inside the
/// limit or the error drives it back inside.
pub fn pid_step(state: &mut PidState, config: &PidConfig, error: f64, dt: f64) -> f64 {
    let e = config.sign * error;
    let derivative = state.previous_error.map_or(0.0, |p| (e - p) / dt);
    state.previous_error = Some(e);
    let limit = config.output_limit;
    let direct = config.kp * e + config.kd * derivative;
    let candidate = state.integral + config.ki * e * dt;
    // The integrator may move toward the limit but never past it, and is never pushed
    // back by saturation caused by the other terms.
    let upper = (limit - direct).max(state.integral);
    let lower = (-limit - direct).min(state.integral);
    state.integral = candidate.clamp(lower, upper);
    let output = (config.kp * e + state.integral + config.kd * derivative).clamp(-limit, limit);
    state.output = output;
    output
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kp: f64, ki: f64, sign: f64) -> PidConfig {
        PidConfig {
            kp,
            ki,
            kd: 0.0,
            sign,
            output_limit: 1.0,
        }
    }

    #[test]
    fn proportional_response_follows_sign() {
        for sign in [1.0, -1.0] {
            let mut s = PidState::default();
            let u = pid_step(&mut s, &cfg(1.0, 0.0, sign), 0.1, 1e-3);
            assert!((u - 0.1 * sign).abs() < 1e-15);
        }
    }

    #[test]
    fn integrator_ramps_to_limit_and_recovers() {
        let c = cfg(0.0, 10.0, 1.0);
        let mut s = PidState::default();
        let mut last = 0.0;
        for _ in 0..1000 {
            let u = pid_step(&mut s, &c, 1.0, 1e-3);
            assert!(u >= last && u <= 1.0);
            last = u;
        }
        assert_eq!(last, 1.0);
        assert!(s.integral <= 1.0);
        // No stored windup: reversing the error unwinds immediately.
        let u = pid_step(&mut s, &c, -1.0, 1e-3);
        assert!(u < 1.0);
    }

    #[test]
    fn derivative_acts_on_change() {
        let c = PidConfig {
            kd: 1e-3,
            ..cfg(0.0, 0.0, 1.0)
        };
        let mut s = PidState::default();
        assert_eq!(pid_step(&mut s, &c, 0.0, 1e-3), 0.0);
        assert!((pid_step(&mut s, &c, 0.1, 1e-3) - 0.1).abs() < 1e-12);
    }
}
