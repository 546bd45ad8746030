//! 3D Gauss-Markov mobility with reflecting boundaries.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::sim::{NodeState, Role};
use crate::{Error, Result};

/// Mobility tick in seconds.
pub const MOBILITY_TICK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmParams {
    pub alpha: f64,
    pub mean_speed: f64,
    pub tick: f64,
    pub area: [f64; 3],
}

/// One Gauss-Markov update of a scalar: `a*prev + (1-a)*mean + sqrt(1-a^2)*g`.
pub fn gm_update(prev: f64, mean: f64, alpha: f64, g: f64) -> f64 {
    alpha * prev + (1.0 - alpha) * mean + (1.0 - alpha * alpha).sqrt() * g
}

/// Advances a mobile node by one tick. Speed, heading and pitch each follow
/// the Gauss-Markov recurrence with an independent standard normal draw;
/// heading reverts to the node's mean heading and pitch to level flight.
/// Positions leaving the box are folded back inside and the corresponding
/// angle (and mean heading) mirrored.
pub fn gm_step<R: Rng + ?Sized>(state: &NodeState, p: &GmParams, rng: &mut R) -> Result<NodeState> {
    if !(0.0..=1.0).contains(&p.alpha) {
        return Err(Error::InvalidArgument(format!("gm alpha {} outside [0, 1]", p.alpha)));
    }
    if state.role == Role::Gbs {
        return Err(Error::InvalidArgument("the ground base station does not move".into()));
    }
    let finite = state.position.iter().all(|v| v.is_finite())
        && state.speed.is_finite()
        && state.direction.is_finite()
        && state.pitch.is_finite()
        && state.mean_direction.is_finite();
    if !finite {
        return Err(Error::InvalidArgument(format!("node {} has non-finite state", state.id)));
    }

    let g_speed: f64 = rng.sample(StandardNormal);
    let g_dir: f64 = rng.sample(StandardNormal);
    let g_pitch: f64 = rng.sample(StandardNormal);

    let mut next = state.clone();
    next.speed = gm_update(state.speed, p.mean_speed, p.alpha, g_speed).max(0.0);
    next.direction = gm_update(state.direction, state.mean_direction, p.alpha, g_dir);
    next.pitch = gm_update(state.pitch, 0.0, p.alpha, g_pitch).clamp(-FRAC_PI_2, FRAC_PI_2);

    let horizontal = next.speed * next.pitch.cos();
    let velocity = [
        horizontal * next.direction.cos(),
        horizontal * next.direction.sin(),
        next.speed * next.pitch.sin(),
    ];
    for axis in 0..3 {
        next.position[axis] += velocity[axis] * p.tick;
    }
    reflect(&mut next, &p.area);
    Ok(next)
}

fn reflect(s: &mut NodeState, area: &[f64; 3]) {
    for axis in 0..3 {
        let max = area[axis];
        let mut bounced = false;
        // A single tick can overshoot by more than one box width only with
        // absurd speeds; loop until inside either way.
        while s.position[axis] < 0.0 || s.position[axis] > max {
            if s.position[axis] < 0.0 {
                s.position[axis] = -s.position[axis];
            } else {
                s.position[axis] = 2.0 * max - s.position[axis];
            }
            bounced = !bounced;
        }
        if bounced {
            match axis {
                0 => {
                    s.direction = PI - s.direction;
                    s.mean_direction = PI - s.mean_direction;
                }
                1 => {
                    s.direction = -s.direction;
                    s.mean_direction = -s.mean_direction;
                }
                _ => s.pitch = -s.pitch,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn mobile(position: [f64; 3]) -> NodeState {
        NodeState {
            id: 0,
            position,
            speed: 100.0,
            direction: 0.3,
            pitch: 0.0,
            mean_direction: 0.3,
            role: Role::Relay,
        }
    }

    fn params(alpha: f64) -> GmParams {
        GmParams {
            alpha,
            mean_speed: 100.0,
            tick: MOBILITY_TICK,
            area: [1000.0, 1000.0, 300.0],
        }
    }

    #[test]
    fn recurrence_direct_evaluation() {
        // 100*0.5 + 100*0.5 + sqrt(0.75)*1
        let v = gm_update(100.0, 100.0, 0.5, 1.0);
        assert!((v - (100.0 + 0.75f64.sqrt())).abs() < 1e-12);
        assert!((v - 100.8660).abs() < 1e-4);
    }

    #[test]
    fn alpha_one_keeps_speed() {
        let mut s = mobile([500.0, 500.0, 150.0]);
        s.speed = 37.25;
        let mut r = rng::stream(1, "t", 0);
        let next = gm_step(&s, &params(1.0), &mut r).unwrap();
        assert_eq!(next.speed, 37.25);
    }

    #[test]
    fn ceiling_reflects_pitch() {
        let mut s = mobile([500.0, 500.0, 300.0]);
        s.pitch = 0.4;
        let mut r = rng::stream(1, "t", 0);
        let next = gm_step(&s, &params(1.0), &mut r).unwrap();
        assert!(next.pitch < 0.0);
        assert!(next.position[2] <= 300.0);
    }

    #[test]
    fn rejects_bad_alpha_and_nan() {
        let s = mobile([1.0, 1.0, 1.0]);
        let mut r = rng::stream(1, "t", 0);
        assert!(gm_step(&s, &params(1.5), &mut r).is_err());
        let mut bad = s.clone();
        bad.position[0] = f64::NAN;
        assert!(gm_step(&bad, &params(0.5), &mut r).is_err());
        let mut gbs = s;
        gbs.role = Role::Gbs;
        assert!(gm_step(&gbs, &params(0.5), &mut r).is_err());
    }

    #[test]
    fn stationary_mean_speed() {
        let p = GmParams { alpha: 0.75, ..params(0.75) };
        let mut s = mobile([500.0, 500.0, 150.0]);
        let mut r = rng::stream(42, "stationarity", 0);
        let mut sum = 0.0;
        let steps = 10_000;
        for _ in 0..steps {
            s = gm_step(&s, &p, &mut r).unwrap();
            sum += s.speed;
        }
        let mean = sum / steps as f64;
        assert!((mean - 100.0).abs() < 5.0, "mean speed {mean}");
    }

    proptest::proptest! {
        #[test]
        fn positions_stay_in_box(seed in 0u64..500, alpha in 0.0f64..=1.0, speed in 0.0f64..400.0) {
            let p = GmParams { alpha, mean_speed: speed, tick: MOBILITY_TICK, area: [300.0, 200.0, 50.0] };
            let mut s = mobile([150.0, 100.0, 25.0]);
            s.speed = speed;
            let mut r = rng::stream(seed, "box", 0);
            for _ in 0..200 {
                s = gm_step(&s, &p, &mut r).unwrap();
                for axis in 0..3 {
                    proptest::prop_assert!(s.position[axis] >= 0.0 && s.position[axis] <= p.area[axis]);
                }
            }
        }
    }
}
