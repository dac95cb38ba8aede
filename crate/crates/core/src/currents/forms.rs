//! Compactly supported test forms `omega = sum_I omega_I dx^I` with a smooth radial cutoff.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::ball::smooth_step;
use crate::error::{Error, Result};

pub type Coefficient = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// A smooth `m`-form whose coefficients are multiplied by a cutoff equal to 1 on
/// `B(center, plateau_radius)` and 0 outside `B(center, support_radius)`.
#[derive(Clone)]
pub struct TestForm {
    dimension: usize,
    degree: usize,
    center: DVector<f64>,
    support_radius: f64,
    plateau_radius: f64,
    terms: Vec<(Vec<usize>, Coefficient)>,
    /// `Some(L)` represents the linear pullback `L^* omega`.
    precompose: Option<DMatrix<f64>>,
    label: String,
}

impl fmt::Debug for TestForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestForm")
            .field("label", &self.label)
            .field("degree", &self.degree)
            .field("dimension", &self.dimension)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

/// Determinant of the rows `index` of the column matrix `[v_1 .. v_m]`.
fn minor(vectors: &[DVector<f64>], index: &[usize]) -> f64 {
    match index.len() {
        0 => 1.0,
        1 => vectors[0][index[0]],
        2 => {
            let (i, j) = (index[0], index[1]);
            vectors[0][i] * vectors[1][j] - vectors[1][i] * vectors[0][j]
        }
        m => DMatrix::from_fn(m, m, |r, c| vectors[c][index[r]]).determinant(),
    }
}

impl TestForm {
    /// `terms` pairs an increasing multi-index with its coefficient function.
    pub fn new(
        dimension: usize,
        degree: usize,
        center: DVector<f64>,
        plateau_radius: f64,
        support_radius: f64,
        terms: Vec<(Vec<usize>, Coefficient)>,
    ) -> Result<Self> {
        if degree > dimension {
            return Err(Error::Domain(format!(
                "form degree {degree} exceeds dimension {dimension}"
            )));
        }
        if center.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: center.len(),
            });
        }
        if !(support_radius > 0.0 && plateau_radius >= 0.0 && plateau_radius < support_radius) {
            return Err(Error::Domain(format!(
                "need 0 <= plateau_radius < support_radius, got {plateau_radius} and {support_radius}"
            )));
        }
        for (index, _) in &terms {
            if index.len() != degree
                || index.windows(2).any(|w| w[0] >= w[1])
                || index.iter().any(|&i| i >= dimension)
            {
                return Err(Error::Domain(format!(
                    "invalid increasing multi-index {index:?}"
                )));
            }
        }
        Ok(Self {
            dimension,
            degree,
            center,
            support_radius,
            plateau_radius,
            terms,
            precompose: None,
            label: String::new(),
        })
    }

    /// A 0-form with a single coefficient function.
    pub fn function<F>(
        dimension: usize,
        plateau_radius: f64,
        support_radius: f64,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            dimension,
            0,
            DVector::zeros(dimension),
            plateau_radius,
            support_radius,
            vec![(vec![], Arc::new(f))],
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Center and radius of the support ball in the coordinates `omega` is evaluated in.
    pub fn support_ball(&self) -> (DVector<f64>, f64) {
        match &self.precompose {
            // L is orthogonal for every pullback built by this crate; L^T c is the preimage center.
            Some(l) => (l.transpose() * &self.center, self.support_radius),
            None => (self.center.clone(), self.support_radius),
        }
    }

    fn cutoff(&self, d: f64) -> f64 {
        if d <= self.plateau_radius {
            1.0
        } else {
            1.0 - smooth_step(
                (d - self.plateau_radius) / (self.support_radius - self.plateau_radius),
            )
        }
    }

    /// `omega(x)(v_1, ..., v_m)`; exactly zero outside the support ball.
    pub fn evaluate(&self, x: &DVector<f64>, vectors: &[DVector<f64>]) -> f64 {
        match &self.precompose {
            Some(l) => {
                let lx = l * x;
                let lv: Vec<DVector<f64>> = vectors.iter().map(|v| l * v).collect();
                self.evaluate_plain(&lx, &lv)
            }
            None => self.evaluate_plain(x, vectors),
        }
    }

    fn evaluate_plain(&self, x: &DVector<f64>, vectors: &[DVector<f64>]) -> f64 {
        let d = (x - &self.center).norm();
        if !(d < self.support_radius) {
            return 0.0;
        }
        let chi = self.cutoff(d);
        if chi == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (index, coef) in &self.terms {
            let m = minor(vectors, index);
            if m != 0.0 {
                acc += coef(x) * m;
            }
        }
        acc * chi
    }

    /// `L^* omega` for a linear map `L` (group elements act this way).
    pub fn pullback_linear(&self, l: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.precompose = Some(match &self.precompose {
            Some(existing) => existing * l,
            None => l.clone(),
        });
        out
    }
}

/// Serializable description of a test form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    #[serde(default)]
    pub label: String,
    pub degree: usize,
    pub center: Vec<f64>,
    pub plateau_radius: f64,
    pub support_radius: f64,
    pub terms: Vec<FormTermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormTermSpec {
    pub index: Vec<usize>,
    pub coefficient: CoefficientSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `sum_k coef_k prod_i x_i^{powers_k[i]}`.
    Polynomial { monomials: Vec<Monomial> },
    /// `amplitude * sin(frequencies . x + phase)`.
    Oscillatory {
        amplitude: f64,
        frequencies: Vec<f64>,
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl CoefficientSpec {
    pub fn constant(c: f64, dimension: usize) -> Self {
        CoefficientSpec::Polynomial {
            monomials: vec![Monomial {
                coef: c,
                powers: vec![0; dimension],
            }],
        }
    }

    fn build(&self, dimension: usize) -> Result<Coefficient> {
        match self.clone() {
            CoefficientSpec::Polynomial { monomials } => {
                if monomials.iter().any(|m| m.powers.len() != dimension) {
                    return Err(Error::Config(format!(
                        "monomial powers must have length {dimension}"
                    )));
                }
                Ok(Arc::new(move |x: &DVector<f64>| {
                    monomials
                        .iter()
                        .map(|m| {
                            m.coef
                                * m.powers
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &p)| x[i].powi(p as i32))
                                    .product::<f64>()
                        })
                        .sum()
                }))
            }
            CoefficientSpec::Oscillatory {
                amplitude,
                frequencies,
                phase,
            } => {
                if frequencies.len() != dimension {
                    return Err(Error::Config(format!(
                        "frequencies must have length {dimension}"
                    )));
                }
                Ok(Arc::new(move |x: &DVector<f64>| {
                    let arg: f64 = frequencies.iter().zip(x.iter()).map(|(k, xi)| k * xi).sum();
                    amplitude * (arg + phase).sin()
                }))
            }
        }
    }
}

impl FormSpec {
    pub fn build(&self) -> Result<TestForm> {
        let n = self.center.len();
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((t.index.clone(), t.coefficient.build(n)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TestForm::new(
            n,
            self.degree,
            DVector::from_column_slice(&self.center),
            self.plateau_radius,
            self.support_radius,
            terms,
        )?
        .with_label(self.label.clone()))
    }
}

fn monomial(coef: f64, powers: &[u32]) -> Monomial {
    Monomial {
        coef,
        powers: powers.to_vec(),
    }
}

/// The standard bank of 12 test forms of the given degree in `R^2`: constants, coordinate
/// monomials up to degree two and one oscillatory coefficient, all cut off smoothly
/// between radius `plateau` and `support`.
pub fn standard_form_bank(degree: usize, plateau: f64, support: f64) -> Vec<FormSpec> {
    let poly = |ms: Vec<Monomial>| CoefficientSpec::Polynomial { monomials: ms };
    let coefficients: Vec<(&str, CoefficientSpec)> = vec![
        ("1", poly(vec![monomial(1.0, &[0, 0])])),
        ("x", poly(vec![monomial(1.0, &[1, 0])])),
        ("y", poly(vec![monomial(1.0, &[0, 1])])),
        ("x^2", poly(vec![monomial(1.0, &[2, 0])])),
        ("xy", poly(vec![monomial(1.0, &[1, 1])])),
        ("y^2", poly(vec![monomial(1.0, &[0, 2])])),
        (
            "2+x",
            poly(vec![monomial(2.0, &[0, 0]), monomial(1.0, &[1, 0])]),
        ),
        (
            "x-y",
            poly(vec![monomial(1.0, &[1, 0]), monomial(-1.0, &[0, 1])]),
        ),
        (
            "x^2+y^2",
            poly(vec![monomial(1.0, &[2, 0]), monomial(1.0, &[0, 2])]),
        ),
        (
            "1+x^2-xy",
            poly(vec![
                monomial(1.0, &[0, 0]),
                monomial(1.0, &[2, 0]),
                monomial(-1.0, &[1, 1]),
            ]),
        ),
        (
            "3-y+y^2",
            poly(vec![
                monomial(3.0, &[0, 0]),
                monomial(-1.0, &[0, 1]),
                monomial(1.0, &[0, 2]),
            ]),
        ),
        (
            "sin(3x+2y+0.4)",
            CoefficientSpec::Oscillatory {
                amplitude: 1.0,
                frequencies: vec![3.0, 2.0],
                phase: 0.4,
            },
        ),
    ];
    coefficients
        .into_iter()
        .enumerate()
        .map(|(k, (name, c))| {
            let terms = match degree {
                0 => vec![FormTermSpec {
                    index: vec![],
                    coefficient: c,
                }],
                // Alternate the covector so both dx and dy are exercised, plus a mixed term.
                1 => {
                    let mut t = vec![FormTermSpec {
                        index: vec![k % 2],
                        coefficient: c.clone(),
                    }];
                    if k % 3 == 0 {
                        t.push(FormTermSpec {
                            index: vec![(k + 1) % 2],
                            coefficient: CoefficientSpec::constant(0.5, 2),
                        });
                    }
                    t
                }
                _ => vec![FormTermSpec {
                    index: vec![0, 1],
                    coefficient: c,
                }],
            };
            let label = match degree {
                0 => name.to_string(),
                1 => format!("({name}) d{}", if k % 2 == 0 { "x" } else { "y" }),
                _ => format!("({name}) dx^dy"),
            };
            FormSpec {
                label,
                degree,
                center: vec![0.0, 0.0],
                plateau_radius: plateau,
                support_radius: support,
                terms,
            }
        })
        .collect()
}
