//! Random-direction mobility at constant speed with specular boundary reflection.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::scenario::{Area, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub heading_rad: f64,
    pub speed_mps: f64,
    /// Steps left before the heading is redrawn.
    pub redraw_countdown_steps: u32,
    /// Length of one random-direction epoch, steps.
    pub epoch_steps: u32,
}

impl MobilityState {
    pub fn new(heading_rad: f64, speed_mps: f64, epoch_steps: u32) -> Self {
        Self {
            heading_rad: wrap_heading(heading_rad),
            speed_mps,
            redraw_countdown_steps: epoch_steps,
            epoch_steps,
        }
    }
}

fn wrap_heading(h: f64) -> f64 {
    let w = h.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Advances one UE by `dt` seconds.
///
/// When the countdown has expired the heading is redrawn uniformly before
/// moving. A boundary crossing folds the overshoot back into the area and
/// mirrors the heading component normal to that wall.
pub fn step_position<R: Rng + ?Sized>(
    position: Point,
    state: MobilityState,
    dt: f64,
    area: Area,
    rng: &mut R,
) -> (Point, MobilityState) {
    let mut next = state;
    if next.redraw_countdown_steps == 0 {
        next.heading_rad = rng.random_range(0.0..TAU);
        next.redraw_countdown_steps = next.epoch_steps;
    }
    next.redraw_countdown_steps -= 1;

    let step = next.speed_mps * dt;
    let (mut x, mut y) = (
        position.x + step * next.heading_rad.cos(),
        position.y + step * next.heading_rad.sin(),
    );
    let mut heading = next.heading_rad;
    let (mut flip_x, mut flip_y) = (false, false);
    while !(0.0..=area.width).contains(&x) {
        x = if x < 0.0 { -x } else { 2.0 * area.width - x };
        flip_x = !flip_x;
    }
    while !(0.0..=area.height).contains(&y) {
        y = if y < 0.0 { -y } else { 2.0 * area.height - y };
        flip_y = !flip_y;
    }
    if flip_x {
        heading = PI - heading;
    }
    if flip_y {
        heading = -heading;
    }
    next.heading_rad = wrap_heading(heading);
    (Point::new(x, y), next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    const AREA: Area = Area {
        width: 300.0,
        height: 200.0,
    };

    #[test]
    fn thirty_kmh_moves_8_333_m_per_second() {
        let s = MobilityState::new(0.7, 30.0 / 3.6, 20);
        let p = Point::new(150.0, 100.0);
        let (q, _) = step_position(p, s, 1.0, AREA, &mut stream(1, Stream::Mobility, 0));
        assert!((p.distance(&q) - 8.333_333_333).abs() < 1e-6);
    }

    #[test]
    fn outward_heading_at_the_wall_reflects() {
        let s = MobilityState::new(0.0, 10.0, 20);
        let (q, n) = step_position(
            Point::new(300.0, 50.0),
            s,
            1.0,
            AREA,
            &mut stream(1, Stream::Mobility, 0),
        );
        assert!(AREA.contains(&q));
        assert!((q.x - 290.0).abs() < 1e-9);
        assert!((n.heading_rad - PI).abs() < 1e-12);
    }

    #[test]
    fn heading_is_redrawn_when_the_epoch_expires() {
        let mut s = MobilityState::new(1.0, 5.0, 3);
        let mut p = Point::new(150.0, 100.0);
        let mut rng = stream(3, Stream::Mobility, 0);
        let mut headings = Vec::new();
        for _ in 0..7 {
            (p, s) = step_position(p, s, 1.0, AREA, &mut rng);
            headings.push(s.heading_rad);
        }
        assert_eq!(headings[0], headings[2]);
        assert_ne!(headings[2], headings[3]);
        assert_eq!(headings[3], headings[5]);
        assert_ne!(headings[5], headings[6]);
    }

    #[test]
    fn trajectory_is_reproducible() {
        let run = || {
            let mut rng = stream(5, Stream::Mobility, 1);
            let mut s = MobilityState::new(2.0, 120.0 / 3.6, 20);
            let mut p = Point::new(10.0, 10.0);
            (0..100)
                .map(|_| {
                    (p, s) = step_position(p, s, 1.0, AREA, &mut rng);
                    p
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn stays_inside_and_keeps_speed(seed in any::<u64>(), x in 0.0f64..=300.0, y in 0.0f64..=200.0,
                                        heading in 0.0f64..TAU, kmh in 1.0f64..150.0) {
            let mut rng = stream(seed, Stream::Mobility, 0);
            let mut s = MobilityState::new(heading, kmh / 3.6, 20);
            let mut p = Point::new(x, y);
            for _ in 0..200 {
                let before = s.heading_rad;
                let (q, n) = step_position(p, s, 1.0, AREA, &mut rng);
                prop_assert!(AREA.contains(&q));
                prop_assert!((0.0..TAU).contains(&n.heading_rad));
                let direct = Point::new(p.x + s.speed_mps * n.heading_rad.cos(), p.y + s.speed_mps * n.heading_rad.sin());
                let reflected = direct.distance(&q) > 1e-9;
                if !reflected && s.redraw_countdown_steps > 0 {
                    prop_assert!((p.distance(&q) - s.speed_mps).abs() < 1e-9);
                    prop_assert_eq!(before, n.heading_rad);
                }
                p = q;
                s = n;
            }
        }
    }
}
