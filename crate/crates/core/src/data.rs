//! Datasets, pseudo-observations and parameter vectors.
//!
//! A [`Dataset`] stores its inputs in one row-major buffer so that very large
//! conjugate studies (a million scalar observations) do not allocate per row.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(x, y)` pair in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

/// Borrowed view of a single row of a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRef<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// An ordered collection of observations sharing one input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    input_dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// An empty dataset with the given input dimension.
    pub fn empty(input_dim: usize) -> Self {
        Self {
            input_dim,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn from_observations(input_dim: usize, observations: &[Observation]) -> Result<Self> {
        let mut ds = Self::empty(input_dim);
        for obs in observations {
            ds.push(&obs.x, obs.y)?;
        }
        Ok(ds)
    }

    /// Build from a flat row-major input buffer.
    pub fn from_flat(input_dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != input_dim * ys.len() {
            return Err(Error::config(format!(
                "input buffer of length {} does not hold {} rows of dimension {}",
                xs.len(),
                ys.len(),
                input_dim
            )));
        }
        if let Some(i) = xs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite input in row {}",
                i / input_dim.max(1)
            )));
        }
        if let Some(i) = ys.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite target in row {i}")));
        }
        Ok(Self { input_dim, xs, ys })
    }

    /// Scalar targets with an empty input vector, as used by the conjugate models.
    pub fn from_targets(ys: Vec<f64>) -> Result<Self> {
        Self::from_flat(0, Vec::new(), ys)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::config(format!(
                "observation has input dimension {}, dataset expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("observation contains a non-finite value".into()));
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.ys
    }

    pub fn get(&self, i: usize) -> ObservationRef<'_> {
        ObservationRef {
            x: self.x(i),
            y: self.ys[i],
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ObservationRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut xs = Vec::with_capacity(indices.len() * self.input_dim);
        let mut ys = Vec::with_capacity(indices.len());
        for &i in indices {
            xs.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
        }
        Self {
            input_dim: self.input_dim,
            xs,
            ys,
        }
    }

    pub fn to_observations(&self) -> Vec<Observation> {
        self.iter().map(|o| Observation::new(o.x.to_vec(), o.y)).collect()
    }
}

/// The self-predicted pair `(x_new, y_hat)` appended to the objective as a
/// sensitivity probe. It is never merged into the [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservation {
    pub x_new: Vec<f64>,
    pub y_hat: f64,
}

impl PseudoObservation {
    pub fn new(x_new: Vec<f64>, y_hat: f64) -> Self {
        Self { x_new, y_hat }
    }

    pub fn as_ref(&self) -> ObservationRef<'_> {
        ObservationRef {
            x: &self.x_new,
            y: self.y_hat,
        }
    }
}

/// A finite, non-empty parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("parameter vector must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameter vector has a non-finite entry".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}
