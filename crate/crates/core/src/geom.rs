//! Small geometric helpers shared by the planners.

use std::f64::consts::PI;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Wraps an angle to `[-PI, PI]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Absolute shortest angular difference, in `[0, PI]`.
pub fn yaw_distance(from: f64, to: f64) -> f64 {
    wrap_angle(to - from).abs()
}

/// Horizontal bearing from `from` to `to`.
pub fn bearing(from: &Vec3, to: &Vec3) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Azimuth (relative to `yaw`) and elevation of `target` seen from `eye`, in radians.
pub fn view_angles(eye: &Vec3, yaw: f64, target: &Vec3) -> (f64, f64) {
    let d = target - eye;
    let horiz = (d.x * d.x + d.y * d.y).sqrt();
    let az = wrap_angle(d.y.atan2(d.x) - yaw);
    let el = d.z.atan2(horiz);
    (az, el)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_range() {
        for k in -20..20 {
            let a = k as f64 * 0.7;
            let w = wrap_angle(a);
            assert!((-PI..=PI).contains(&w), "{a} -> {w}");
            assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((a - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn yaw_distance_is_shortest_arc() {
        assert!((yaw_distance(0.1, -0.1) - 0.2).abs() < 1e-12);
        assert!((yaw_distance(PI - 0.1, -PI + 0.1) - 0.2).abs() < 1e-12);
    }
}
