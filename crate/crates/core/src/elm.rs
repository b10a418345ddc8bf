//! Extreme learning machine regression with a single scalar output.
//!
//! Input weights and offsets of the hidden layer are fixed up front (drawn at
//! random, or supplied by an optimizer); only the output weights are fitted,
//! in closed form, by least squares on the hidden-layer output matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{least_squares_solve, Activation, Matrix, RandomStream};

/// Hidden layer of an ELM: `hidden` nodes over `inputs` features.
#[derive(Clone, Debug, PartialEq)]
pub struct ElmParams {
    /// `hidden x inputs`, row `i` holds the input weights of node `i`.
    input_weights: Matrix,
    offsets: Vec<f64>,
    activation: Activation,
}

impl ElmParams {
    pub fn new(input_weights: Matrix, offsets: Vec<f64>, activation: Activation) -> Result<Self> {
        if offsets.len() != input_weights.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} hidden nodes but {} offsets",
                input_weights.rows(),
                offsets.len()
            )));
        }
        if offsets.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("hidden offsets"));
        }
        Ok(ElmParams {
            input_weights,
            offsets,
            activation,
        })
    }

    /// Input dimension `n`.
    pub fn inputs(&self) -> usize {
        self.input_weights.cols()
    }

    /// Hidden node count `L`.
    pub fn hidden(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn input_weights(&self) -> &Matrix {
        &self.input_weights
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn node_outputs<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.input_weights
            .row_iter()
            .zip(&self.offsets)
            .map(move |(a, b)| {
                let z = a.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                self.activation.apply(z)
            })
    }
}

/// Draws every input weight and offset uniformly from `[-1, 1)`.
pub fn init_params(
    inputs: usize,
    hidden: usize,
    activation: Activation,
    stream: &mut RandomStream,
) -> Result<ElmParams> {
    if inputs == 0 || hidden == 0 {
        return Err(Error::InvalidArgument(format!(
            "ELM needs at least one input and one hidden node, got n={inputs}, L={hidden}"
        )));
    }
    let weights = (0..hidden * inputs)
        .map(|_| stream.uniform(-1.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let offsets = (0..hidden)
        .map(|_| stream.uniform(-1.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    ElmParams::new(Matrix::new(hidden, inputs, weights)?, offsets, activation)
}

/// Hidden-layer output matrix: entry `(j, i)` is `f(a_i . x_j + b_i)`.
pub fn hidden_matrix(params: &ElmParams, x: &Matrix) -> Result<Matrix> {
    if x.cols() != params.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} features, model expects {}",
            x.cols(),
            params.inputs()
        )));
    }
    let mut data = Vec::with_capacity(x.rows() * params.hidden());
    for row in x.row_iter() {
        data.extend(params.node_outputs(row));
    }
    Matrix::new(x.rows(), params.hidden(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElmModel {
    params: ElmParams,
    output_weights: Vec<f64>,
}

impl ElmModel {
    pub fn new(params: ElmParams, output_weights: Vec<f64>) -> Result<Self> {
        if output_weights.len() != params.hidden() {
            return Err(Error::DimensionMismatch(format!(
                "{} hidden nodes but {} output weights",
                params.hidden(),
                output_weights.len()
            )));
        }
        if output_weights.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("output weights"));
        }
        Ok(ElmModel {
            params,
            output_weights,
        })
    }

    pub fn params(&self) -> &ElmParams {
        &self.params
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output_weights
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.params.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} features, model expects {}",
                x.len(),
                self.params.inputs()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction input"));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.params
            .node_outputs(x)
            .zip(&self.output_weights)
            .map(|(h, beta)| h * beta)
            .sum()
    }

    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.params.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} features, model expects {}",
                x.cols(),
                self.params.inputs()
            )));
        }
        Ok(x.row_iter().map(|r| self.predict_unchecked(r)).collect())
    }

    /// Sum of squared errors over the samples (not the mean).
    pub fn loss(&self, x: &Matrix, t: &[f64]) -> Result<f64> {
        check_targets(x, t)?;
        Ok(self
            .predict_all(x)?
            .iter()
            .zip(t)
            .map(|(p, y)| (p - y).powi(2))
            .sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ElmModel::from_json(&text)
    }
}

fn check_targets(x: &Matrix, t: &[f64]) -> Result<()> {
    if x.rows() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} targets",
            x.rows(),
            t.len()
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    Ok(())
}

/// Randomly initialises a hidden layer and fits the output weights.
pub fn train(
    x: &Matrix,
    t: &[f64],
    hidden: usize,
    activation: Activation,
    stream: &mut RandomStream,
) -> Result<ElmModel> {
    check_targets(x, t)?;
    let params = init_params(x.cols(), hidden, activation, stream)?;
    train_with_params(params, x, t)
}

/// Fits output weights for an already fixed hidden layer.
pub fn train_with_params(params: ElmParams, x: &Matrix, t: &[f64]) -> Result<ElmModel> {
    check_targets(x, t)?;
    let h = hidden_matrix(&params, x)?;
    let beta = least_squares_solve(&h, &Matrix::column(t)?)?;
    ElmModel::new(params, beta.into_vec())
}

/// Flat JSON layout of a trained model. Floats are written in shortest
/// round-trip form, so a save/load cycle is bit-exact.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    n: usize,
    hidden_nodes: usize,
    activation: Activation,
    input_weights: Vec<f64>,
    offsets: Vec<f64>,
    output_weights: Vec<f64>,
}

impl From<&ElmModel> for ModelDocument {
    fn from(m: &ElmModel) -> Self {
        ModelDocument {
            n: m.params.inputs(),
            hidden_nodes: m.params.hidden(),
            activation: m.params.activation,
            input_weights: m.params.input_weights.as_slice().to_vec(),
            offsets: m.params.offsets.clone(),
            output_weights: m.output_weights.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for ElmModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let weights = Matrix::new(doc.hidden_nodes, doc.n, doc.input_weights)?;
        let params = ElmParams::new(weights, doc.offsets, doc.activation)?;
        ElmModel::new(params, doc.output_weights)
    }
}

// Model JSON is embedded in larger pipeline documents.
impl Serialize for ElmModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ElmModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDocument::deserialize(d)?;
        ElmModel::try_from(doc).map_err(serde::de::Error::custom)
    }
}
