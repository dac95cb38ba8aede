//! Maps that supply a value and a Jacobian at any point, for pullbacks of forms and metrics.

use nalgebra::{DMatrix, DVector};

use crate::ball::ShiftMap;
use crate::chart::ChartCutoff;
use crate::error::Result;

pub trait Diffeo: Send + Sync {
    fn dimension(&self) -> usize;

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>;

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.apply_with_jacobian(x)?.0)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.apply_with_jacobian(x)?.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Identity(pub usize);

impl Diffeo for Identity {
    fn dimension(&self) -> usize {
        self.0
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((x.clone(), DMatrix::identity(self.0, self.0)))
    }
}

/// `tau_y(x) = x + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation(pub DVector<f64>);

impl Diffeo for Translation {
    fn dimension(&self) -> usize {
        self.0.len()
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.0.len();
        Ok((x + &self.0, DMatrix::identity(n, n)))
    }
}

/// `x -> A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Affine {
    pub fn linear(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self {
            matrix,
            offset: DVector::zeros(n),
        }
    }
}

impl Diffeo for Affine {
    fn dimension(&self) -> usize {
        self.offset.len()
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((&self.matrix * x + &self.offset, self.matrix.clone()))
    }
}

impl Diffeo for ShiftMap {
    fn dimension(&self) -> usize {
        self.y.len()
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        ShiftMap::apply_with_jacobian(self, x)
    }
}

/// `phi^-1 o s_y o phi` for an affine chart `phi`; the chart scaling cancels in the Jacobian.
#[derive(Debug, Clone)]
pub struct ChartShift<'a> {
    pub chart: &'a ChartCutoff,
    pub shift: ShiftMap,
}

impl Diffeo for ChartShift<'_> {
    fn dimension(&self) -> usize {
        self.shift.y.len()
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let u = self.chart.to_chart(x);
        let (su, j) = self.shift.apply_with_jacobian(&u)?;
        Ok((self.chart.from_chart(&su), j))
    }
}

/// `outer o inner`.
pub struct Compose<'a> {
    pub outer: &'a dyn Diffeo,
    pub inner: &'a dyn Diffeo,
}

impl Diffeo for Compose<'_> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn apply_with_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (y, ji) = self.inner.apply_with_jacobian(x)?;
        let (z, jo) = self.outer.apply_with_jacobian(&y)?;
        Ok((z, jo * ji))
    }
}

/// Central finite-difference Jacobian, used as an independent check of analytic Jacobians.
pub fn finite_difference_jacobian(
    map: &dyn Diffeo,
    x: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += step;
        xm[k] -= step;
        let col = (map.apply(&xp)? - map.apply(&xm)?) / (2.0 * step);
        j.set_column(k, &col);
    }
    Ok(j)
}
