//! Affine charts onto the unit ball with a smooth cutoff `h_i`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ball::smooth_step;

/// Affine chart `phi(x) = (x - center) / radius` from `V = B(center, radius)` onto the unit
/// ball, with a cutoff equal to 1 where `|phi(x)| <= inner_radius` and 0 outside `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartCutoff {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_inner_radius")]
    pub inner_radius: f64,
}

fn default_inner_radius() -> f64 {
    0.5
}

/// The same construction serves the metric atlas.
pub type AtlasChart = ChartCutoff;

impl ChartCutoff {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            inner_radius: default_inner_radius(),
        }
    }

    pub fn unit(dimension: usize) -> Self {
        Self::new(vec![0.0; dimension], 1.0)
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn to_chart(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(&self.center)
                .map(|(a, c)| (a - c) / self.radius),
        )
    }

    pub fn from_chart(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            u.len(),
            u.iter().zip(&self.center).map(|(a, c)| c + self.radius * a),
        )
    }

    /// `|phi(x)|`.
    pub fn chart_radius(&self, x: &DVector<f64>) -> f64 {
        self.to_chart(x).norm()
    }

    /// Whether `x` lies in the open chart domain `V`.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.chart_radius(x) < 1.0
    }

    /// `h_i(x)`.
    pub fn cutoff(&self, x: &DVector<f64>) -> f64 {
        self.cutoff_at_radius(self.chart_radius(x))
    }

    pub fn cutoff_at_radius(&self, r: f64) -> f64 {
        if r <= self.inner_radius {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            1.0 - smooth_step((r - self.inner_radius) / (1.0 - self.inner_radius))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_levels() {
        let c = ChartCutoff::new(vec![1.0, 0.0], 2.0);
        assert_eq!(c.cutoff(&DVector::from_vec(vec![1.5, 0.5])), 1.0);
        assert_eq!(c.cutoff(&DVector::from_vec(vec![3.0, 0.0])), 0.0);
        assert_eq!(c.cutoff(&DVector::from_vec(vec![-2.0, 0.0])), 0.0);
        let mid = c.cutoff(&DVector::from_vec(vec![2.5, 0.0]));
        assert!(mid > 0.0 && mid < 1.0);
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let back = c.from_chart(&c.to_chart(&x));
        assert!((back - x).norm() < 1e-15);
    }
}
