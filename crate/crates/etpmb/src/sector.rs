//! Circular-sector field-of-view geometry shared by the filter (detection
//! probability), the simulator (ray fan) and the fusion layer (deployment
//! region partitioning).

use nalgebra::Vector2;

/// A sensor field of view: a circular sector anchored at the sensor.
#[derive(Debug, Clone)]
pub struct Sector {
    pub origin: Vector2<f64>,
    /// Boresight direction (rad, global frame).
    pub orientation: f64,
    /// Full opening angle (rad), at most `2*pi`.
    pub opening: f64,
    pub max_range: f64,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

impl Sector {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let d = p - self.origin;
        let range = d.norm();
        if range > self.max_range {
            return false;
        }
        if range == 0.0 {
            return true;
        }
        let bearing = d.y.atan2(d.x);
        wrap_angle(bearing - self.orientation).abs() <= self.opening / 2.0 + 1e-12
    }
}
