//! Finitely represented currents: weighted Dirac m-vectors and polyhedral chains.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use super::forms::TestForm;
use crate::diffeo::Diffeo;
use crate::error::{Error, Result};
use crate::quadrature::simplex_rule;

pub type Density = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Collapsed Gauss order used on simplices unless overridden.
pub const DEFAULT_SIMPLEX_ORDER: usize = 8;

#[derive(Clone)]
pub enum Piece {
    /// `weight * <omega(point), frame_1 ^ ... ^ frame_m>`.
    Dirac {
        point: DVector<f64>,
        frame: Vec<DVector<f64>>,
        weight: f64,
    },
    /// Oriented simplex `[v_0, ..., v_m]`; an optional density multiplies the integrand.
    Simplex {
        vertices: Vec<DVector<f64>>,
        multiplicity: f64,
        density: Option<Density>,
    },
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Dirac {
                point,
                frame,
                weight,
            } => f
                .debug_struct("Dirac")
                .field("point", &point.as_slice())
                .field(
                    "frame",
                    &frame
                        .iter()
                        .map(|v| v.as_slice().to_vec())
                        .collect::<Vec<_>>(),
                )
                .field("weight", weight)
                .finish(),
            Piece::Simplex {
                vertices,
                multiplicity,
                density,
            } => f
                .debug_struct("Simplex")
                .field(
                    "vertices",
                    &vertices
                        .iter()
                        .map(|v| v.as_slice().to_vec())
                        .collect::<Vec<_>>(),
                )
                .field("multiplicity", multiplicity)
                .field("weighted", &density.is_some())
                .finish(),
        }
    }
}

impl Piece {
    /// Distance from the origin to the piece's support.
    pub fn min_norm(&self) -> f64 {
        self.distance_to(&DVector::zeros(self.dimension()))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Piece::Dirac { point, .. } => point.len(),
            Piece::Simplex { vertices, .. } => vertices[0].len(),
        }
    }

    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        match self {
            Piece::Dirac { point, .. } => (point - p).norm(),
            Piece::Simplex { vertices, .. } => distance_to_simplex(p, vertices),
        }
    }

    /// Largest distance from `p` to the piece's support.
    pub fn max_distance_to(&self, p: &DVector<f64>) -> f64 {
        match self {
            Piece::Dirac { point, .. } => (point - p).norm(),
            Piece::Simplex { vertices, .. } => {
                vertices.iter().map(|v| (v - p).norm()).fold(0.0, f64::max)
            }
        }
    }

    fn scaled(&self, factor: f64) -> Piece {
        match self.clone() {
            Piece::Dirac {
                point,
                frame,
                weight,
            } => Piece::Dirac {
                point,
                frame,
                weight: weight * factor,
            },
            Piece::Simplex {
                vertices,
                multiplicity,
                density,
            } => Piece::Simplex {
                vertices,
                multiplicity: multiplicity * factor,
                density,
            },
        }
    }
}

/// Euclidean distance from `p` to the convex hull of `vertices`, by projected gradient on the
/// barycentric simplex (exact for points and segments, converged iteration otherwise).
pub fn distance_to_simplex(p: &DVector<f64>, vertices: &[DVector<f64>]) -> f64 {
    match vertices.len() {
        1 => (p - &vertices[0]).norm(),
        2 => {
            let e = &vertices[1] - &vertices[0];
            let t = ((p - &vertices[0]).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            (p - (&vertices[0] + e * t)).norm()
        }
        _ => {
            // Closest point over the faces when the projection lands outside.
            let a = &vertices[0];
            let m = vertices.len() - 1;
            let e = DMatrix::from_fn(a.len(), m, |r, c| vertices[c + 1][r] - a[r]);
            let gram = e.transpose() * &e;
            if let Some(inv) = gram.try_inverse() {
                let t = inv * e.transpose() * (p - a);
                if t.iter().all(|v| *v >= 0.0) && t.sum() <= 1.0 {
                    return (p - (a + &e * t)).norm();
                }
            }
            (0..vertices.len())
                .map(|skip| {
                    let face: Vec<DVector<f64>> = vertices
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| v.clone())
                        .collect();
                    distance_to_simplex(p, &face)
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// A finite sum of Dirac and simplex pieces of a common degree.
#[derive(Clone)]
pub struct Current {
    dimension: usize,
    degree: usize,
    pieces: Vec<Piece>,
    rule: Arc<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl fmt::Debug for Current {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Current")
            .field("dimension", &self.dimension)
            .field("degree", &self.degree)
            .field("pieces", &self.pieces)
            .finish()
    }
}

fn gram_determinant(vectors: &[DVector<f64>]) -> f64 {
    let m = vectors.len();
    DMatrix::from_fn(m, m, |i, j| vectors[i].dot(&vectors[j])).determinant()
}

impl Current {
    pub fn empty(dimension: usize, degree: usize) -> Self {
        Self {
            dimension,
            degree,
            pieces: Vec::new(),
            rule: Arc::new(simplex_rule(degree, DEFAULT_SIMPLEX_ORDER)),
        }
    }

    pub fn from_pieces(dimension: usize, degree: usize, pieces: Vec<Piece>) -> Result<Self> {
        let mut c = Self::empty(dimension, degree);
        for p in pieces {
            c.push(p)?;
        }
        Ok(c)
    }

    /// `weight * delta_point`, a 0-current.
    pub fn dirac(point: DVector<f64>, weight: f64) -> Self {
        let n = point.len();
        let mut c = Self::empty(n, 0);
        c.pieces.push(Piece::Dirac {
            point,
            frame: vec![],
            weight,
        });
        c
    }

    /// Oriented segment `[a, b]` with multiplicity one.
    pub fn segment(a: DVector<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.len();
        Self::from_pieces(
            n,
            1,
            vec![Piece::Simplex {
                vertices: vec![a, b],
                multiplicity: 1.0,
                density: None,
            }],
        )
    }

    /// Closed polygon through `points` (in order) as a polyhedral 1-current.
    pub fn polygon(points: &[DVector<f64>]) -> Result<Self> {
        let n = points.first().map_or(0, |p| p.len());
        let pieces = (0..points.len())
            .map(|k| Piece::Simplex {
                vertices: vec![points[k].clone(), points[(k + 1) % points.len()].clone()],
                multiplicity: 1.0,
                density: None,
            })
            .collect();
        Self::from_pieces(n, 1, pieces)
    }

    pub fn push(&mut self, piece: Piece) -> Result<()> {
        if piece.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: piece.dimension(),
            });
        }
        match &piece {
            Piece::Dirac { frame, .. } => {
                if frame.len() != self.degree {
                    return Err(Error::DegreeMismatch {
                        current: self.degree,
                        form: frame.len(),
                    });
                }
                if frame.iter().any(|v| v.len() != self.dimension) {
                    return Err(Error::Domain(
                        "frame vectors must live in the ambient space".into(),
                    ));
                }
                if self.degree > 0 && gram_determinant(frame) <= 1e-14 {
                    return Err(Error::Degenerate(
                        "Dirac frame vectors are linearly dependent".into(),
                    ));
                }
            }
            Piece::Simplex { vertices, .. } => {
                if vertices.len() != self.degree + 1 {
                    return Err(Error::DegreeMismatch {
                        current: self.degree,
                        form: vertices.len().saturating_sub(1),
                    });
                }
                if vertices.iter().any(|v| v.len() != self.dimension) {
                    return Err(Error::Domain(
                        "simplex vertices must live in the ambient space".into(),
                    ));
                }
                let edges: Vec<DVector<f64>> =
                    vertices[1..].iter().map(|v| v - &vertices[0]).collect();
                if self.degree > 0 && gram_determinant(&edges) <= 1e-24 {
                    return Err(Error::Degenerate("simplex has zero volume".into()));
                }
            }
        }
        if self.degree > self.dimension {
            return Err(Error::Domain(format!(
                "degree {} exceeds dimension {}",
                self.degree, self.dimension
            )));
        }
        self.pieces.push(piece);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `factor * T`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.pieces = self.pieces.iter().map(|p| p.scaled(factor)).collect();
        out
    }

    /// `T + S` as a formal sum of pieces.
    pub fn add(&self, other: &Current) -> Result<Self> {
        if other.degree != self.degree {
            return Err(Error::DegreeMismatch {
                current: self.degree,
                form: other.degree,
            });
        }
        let mut out = self.clone();
        for p in &other.pieces {
            out.push(p.clone())?;
        }
        Ok(out)
    }

    /// `(alpha^g)_* T` for a linear map, applied to the geometry directly.
    pub fn pushforward_linear(&self, l: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.pieces = self
            .pieces
            .iter()
            .map(|p| match p.clone() {
                Piece::Dirac {
                    point,
                    frame,
                    weight,
                } => Piece::Dirac {
                    point: l * point,
                    frame: frame.into_iter().map(|v| l * v).collect(),
                    weight,
                },
                Piece::Simplex {
                    vertices,
                    multiplicity,
                    density,
                } => {
                    let density = density.map(|d| {
                        let inv = l.clone().try_inverse().unwrap_or_else(|| l.transpose());
                        Arc::new(move |x: &DVector<f64>| d(&(&inv * x))) as Density
                    });
                    Piece::Simplex {
                        vertices: vertices.into_iter().map(|v| l * v).collect(),
                        multiplicity,
                        density,
                    }
                }
            })
            .collect();
        out
    }

    /// Distance between the support of the current and `p`.
    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        self.pieces
            .iter()
            .map(|q| q.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest norm over the support.
    pub fn min_norm(&self) -> f64 {
        self.distance_to(&DVector::zeros(self.dimension))
    }

    /// Largest norm over the support.
    pub fn max_norm(&self) -> f64 {
        let o = DVector::zeros(self.dimension);
        self.pieces
            .iter()
            .map(|q| q.max_distance_to(&o))
            .fold(0.0, f64::max)
    }

    fn check(&self, omega: &TestForm) -> Result<()> {
        if omega.degree() != self.degree {
            return Err(Error::DegreeMismatch {
                current: self.degree,
                form: omega.degree(),
            });
        }
        if omega.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: omega.dimension(),
            });
        }
        Ok(())
    }

    /// `T(omega)`.
    pub fn evaluate(&self, omega: &TestForm) -> Result<f64> {
        self.check(omega)?;
        let mut acc = 0.0;
        for p in &self.pieces {
            acc += self.pair_piece(p, omega, None)?;
        }
        Ok(acc)
    }

    /// `T(Phi^* omega)`, i.e. `(Phi_* T)(omega)`.
    pub fn pushforward_pairing(&self, phi: &dyn Diffeo, omega: &TestForm) -> Result<f64> {
        self.check(omega)?;
        let mut acc = 0.0;
        for p in &self.pieces {
            acc += self.pair_piece(p, omega, Some(phi))?;
        }
        Ok(acc)
    }

    /// Pairing of a single piece with `Phi^* omega` (`Phi = id` when `None`).
    pub fn pair_piece(
        &self,
        piece: &Piece,
        omega: &TestForm,
        phi: Option<&dyn Diffeo>,
    ) -> Result<f64> {
        let eval = |x: &DVector<f64>, vectors: &[DVector<f64>]| -> Result<f64> {
            match phi {
                None => Ok(omega.evaluate(x, vectors)),
                Some(map) => {
                    let (y, j) = map.apply_with_jacobian(x)?;
                    let pushed: Vec<DVector<f64>> = vectors.iter().map(|v| &j * v).collect();
                    Ok(omega.evaluate(&y, &pushed))
                }
            }
        };
        match piece {
            Piece::Dirac {
                point,
                frame,
                weight,
            } => Ok(weight * eval(point, frame)?),
            Piece::Simplex {
                vertices,
                multiplicity,
                density,
            } => {
                let a = &vertices[0];
                let edges: Vec<DVector<f64>> = vertices[1..].iter().map(|v| v - a).collect();
                let (nodes, weights) = &*self.rule;
                let mut acc = 0.0;
                for (t, w) in nodes.iter().zip(weights) {
                    let mut x = a.clone();
                    for (tk, e) in t.iter().zip(&edges) {
                        x += e * *tk;
                    }
                    let rho = density.as_ref().map_or(1.0, |d| d(&x));
                    if rho != 0.0 {
                        acc += w * rho * eval(&x, &edges)?;
                    }
                }
                Ok(multiplicity * acc)
            }
        }
    }
}

/// Serializable current description used by scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentSpec {
    #[serde(default)]
    pub label: String,
    pub dimension: usize,
    pub degree: usize,
    pub pieces: Vec<PieceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceSpec {
    Dirac {
        point: Vec<f64>,
        #[serde(default)]
        frame: Vec<Vec<f64>>,
        #[serde(default = "one")]
        weight: f64,
    },
    Simplex {
        vertices: Vec<Vec<f64>>,
        #[serde(default = "one")]
        multiplicity: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl CurrentSpec {
    pub fn build(&self) -> Result<Current> {
        let vec = |v: &Vec<f64>| DVector::from_column_slice(v);
        let pieces = self
            .pieces
            .iter()
            .map(|p| match p {
                PieceSpec::Dirac {
                    point,
                    frame,
                    weight,
                } => Piece::Dirac {
                    point: vec(point),
                    frame: frame.iter().map(vec).collect(),
                    weight: *weight,
                },
                PieceSpec::Simplex {
                    vertices,
                    multiplicity,
                } => Piece::Simplex {
                    vertices: vertices.iter().map(vec).collect(),
                    multiplicity: *multiplicity,
                    density: None,
                },
            })
            .collect();
        Current::from_pieces(self.dimension, self.degree, pieces)
    }
}
