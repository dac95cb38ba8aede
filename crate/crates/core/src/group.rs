//! Compact group actions by orthogonal matrices with Haar weights.
//!
//! Finite subgroups of `O(n)` carry uniform weights and are checked for closure.
//! A circle group acting by rotations in the `(0, 1)` coordinate plane is realized by
//! trapezoidal quadrature over `N` equispaced angles.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Finite,
    Circle { nodes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    pub dimension: usize,
    pub elements: Vec<DMatrix<f64>>,
    pub haar_weights: Vec<f64>,
    pub kind: GroupKind,
}

const ORTHOGONALITY_TOL: f64 = 1e-12;
const CLOSURE_TOL: f64 = 1e-10;

/// Snap entries within `1e-15` of `0` or `+-1` so quarter turns are exact.
fn snap(v: f64) -> f64 {
    for target in [0.0, 1.0, -1.0] {
        if (v - target).abs() < 1e-15 {
            return target;
        }
    }
    v
}

/// Rotation by `theta` in the `(0, 1)` plane of `R^n`.
pub fn plane_rotation(n: usize, theta: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    let (s, c) = theta.sin_cos();
    m[(0, 0)] = snap(c);
    m[(0, 1)] = snap(-s);
    m[(1, 0)] = snap(s);
    m[(1, 1)] = snap(c);
    m
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

impl GroupAction {
    pub fn trivial(n: usize) -> Self {
        Self {
            dimension: n,
            elements: vec![DMatrix::identity(n, n)],
            haar_weights: vec![1.0],
            kind: GroupKind::Finite,
        }
    }

    /// Finite group from explicit orthogonal matrices; rejects non-orthogonal or non-closed sets.
    pub fn finite(elements: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = elements
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidGroup("empty element list".into()))?;
        let id = DMatrix::<f64>::identity(n, n);
        for m in &elements {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidGroup(
                    "elements must be square of equal size".into(),
                ));
            }
            let err = max_abs(&(m.transpose() * m - &id));
            if err > ORTHOGONALITY_TOL {
                return Err(Error::InvalidGroup(format!(
                    "element not orthogonal (residual {err:e})"
                )));
            }
        }
        let find = |target: &DMatrix<f64>| {
            elements
                .iter()
                .any(|e| max_abs(&(e - target)) < CLOSURE_TOL)
        };
        if !find(&id) {
            return Err(Error::InvalidGroup("identity missing".into()));
        }
        for a in &elements {
            if !find(&a.transpose()) {
                return Err(Error::InvalidGroup("not closed under inverses".into()));
            }
            for b in &elements {
                if !find(&(a * b)) {
                    return Err(Error::InvalidGroup("not closed under products".into()));
                }
            }
        }
        let w = 1.0 / elements.len() as f64;
        Ok(Self {
            dimension: n,
            haar_weights: vec![w; elements.len()],
            elements,
            kind: GroupKind::Finite,
        })
    }

    /// Cyclic group `Z_k` of rotations in the `(0, 1)` plane.
    pub fn cyclic(n: usize, order: usize) -> Result<Self> {
        if n < 2 || order == 0 {
            return Err(Error::InvalidGroup(format!(
                "cyclic group needs n >= 2 and order >= 1 (n={n}, order={order})"
            )));
        }
        let elements = (0..order)
            .map(|k| plane_rotation(n, 2.0 * PI * k as f64 / order as f64))
            .collect();
        Self::finite(elements)
    }

    /// `Z_2` generated by the reflection across the hyperplane orthogonal to `axis`.
    pub fn reflection(n: usize, axis: usize) -> Result<Self> {
        if axis >= n {
            return Err(Error::InvalidGroup(format!(
                "axis {axis} out of range for n={n}"
            )));
        }
        let mut r = DMatrix::identity(n, n);
        r[(axis, axis)] = -1.0;
        Self::finite(vec![DMatrix::identity(n, n), r])
    }

    /// Circle group with `nodes` equispaced quadrature angles and weights `1/nodes`.
    pub fn circle(n: usize, nodes: usize) -> Result<Self> {
        if n < 2 || nodes == 0 {
            return Err(Error::InvalidGroup(format!(
                "circle action needs n >= 2 and nodes >= 1 (n={n}, nodes={nodes})"
            )));
        }
        let elements = (0..nodes)
            .map(|k| plane_rotation(n, 2.0 * PI * k as f64 / nodes as f64))
            .collect();
        Ok(Self {
            dimension: n,
            elements,
            haar_weights: vec![1.0 / nodes as f64; nodes],
            kind: GroupKind::Circle { nodes },
        })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_finite(&self) -> bool {
        self.kind == GroupKind::Finite
    }

    /// Elements to test invariance against: all elements of a finite group, or the
    /// quadrature angles plus `extra` off-grid angles for the circle.
    pub fn probe_elements(&self, extra: usize) -> Vec<DMatrix<f64>> {
        match self.kind {
            GroupKind::Finite => self.elements.clone(),
            GroupKind::Circle { nodes } => {
                let mut out = self.elements.clone();
                for k in 0..extra {
                    // Irrational offsets so probes avoid the quadrature grid.
                    let theta = 2.0 * PI * ((k as f64 + 0.5) * 0.618_033_988_749_895).fract()
                        + 0.1 / nodes as f64;
                    out.push(plane_rotation(self.dimension, theta));
                }
                out
            }
        }
    }
}
