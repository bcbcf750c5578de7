use std::ops::Deref;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Node-indexed finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<ScalarField> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ScalarField(values))
    }

    pub fn constant(n: usize, value: f64) -> ScalarField {
        ScalarField(vec![value; n])
    }

    pub fn zeros(n: usize) -> ScalarField {
        ScalarField::constant(n, 0.0)
    }

    /// Samples `f` at every node of the cloud.
    pub fn from_fn(cloud: &PointCloud, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
        ScalarField::new((0..cloud.len()).map(|i| f(cloud.point(i))).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> ScalarField {
        ScalarField(values)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl Deref for ScalarField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScalarField {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(ScalarField::new(vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(ScalarField::new(vec![1.0, f64::NEG_INFINITY]).is_err());
        assert_eq!(ScalarField::constant(3, 2.0).values(), &[2.0, 2.0, 2.0]);
    }
}
