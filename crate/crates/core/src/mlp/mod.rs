//! One-hidden-layer perceptron regression: forward pass, exact
//! back-propagated gradients, three trainers and grid-search
//! cross-validation.

mod grid;
pub mod lbfgs;
mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use grid::{grid_search, kfold_indices, Candidate, CvRow, GridResult, GridSpec};
pub use train::{train, TrainConfig, TrainLimits, TrainReport};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    /// Linear hidden units. Not part of the search grid; useful for tests
    /// where the model must be affine.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    /// The relu derivative at 0 is 0.
    #[inline]
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Lbfgs,
    Sgd,
    Adam,
}

impl Solver {
    pub fn id(self) -> &'static str {
        match self {
            Solver::Lbfgs => "lbfgs",
            Solver::Sgd => "sgd",
            Solver::Adam => "adam",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lbfgs" => Ok(Solver::Lbfgs),
            "sgd" => Ok(Solver::Sgd),
            "adam" => Ok(Solver::Adam),
            other => Err(Error::InvalidParameter(format!("unknown solver `{other}`"))),
        }
    }
}

/// How a model was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: Solver,
    pub neurons: usize,
    /// Mean cross-validated MSE of this configuration, when it came out of
    /// a grid search.
    pub cv_mse: Option<f64>,
    pub seed: u64,
}

/// Parameter layout of a network with `inputs` inputs and `hidden` hidden
/// units, flattened as `w1 (row-major H x F) | b1 | w2 | b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub inputs: usize,
    pub hidden: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }
    fn b1(&self) -> usize {
        self.hidden * self.inputs
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// H x F input-to-hidden weights.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// Hidden-to-output weights.
    pub w2: Array1<f64>,
    pub b2: f64,
    pub activation: Activation,
    pub provenance: Provenance,
}

impl MlpModel {
    pub fn n_inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout {
            inputs: self.n_inputs(),
            hidden: self.n_hidden(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.layout().len());
        p.extend(self.w1.iter());
        p.extend(self.b1.iter());
        p.extend(self.w2.iter());
        p.push(self.b2);
        p
    }

    pub(crate) fn from_flat(
        layout: Layout,
        p: &[f64],
        activation: Activation,
        provenance: Provenance,
    ) -> Self {
        assert_eq!(p.len(), layout.len());
        Self {
            w1: Array2::from_shape_vec((layout.hidden, layout.inputs), p[..layout.b1()].to_vec())
                .expect("layout"),
            b1: Array1::from(p[layout.b1()..layout.w2()].to_vec()),
            w2: Array1::from(p[layout.w2()..layout.b2()].to_vec()),
            b2: p[layout.b2()],
            activation,
            provenance,
        }
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.n_hidden(), self.b1.len())?;
        check_dim(self.n_hidden(), self.w2.len())?;
        let finite = self
            .w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .all(|v| v.is_finite())
            && self.b2.is_finite();
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "network has non-finite parameters".into(),
            ))
        }
    }

    /// `w2 . act(w1 x + b1) + b2`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n_inputs(), x.len())?;
        self.validate()?;
        Ok(predict_flat(
            self.layout(),
            self.activation,
            &self.to_flat(),
            x,
        ))
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        check_dim(self.n_inputs(), x.ncols())?;
        self.validate()?;
        let p = self.to_flat();
        let x = x.as_standard_layout();
        let f = self.n_inputs();
        let flat = x.as_slice().expect("standard layout");
        Ok((0..x.nrows())
            .map(|i| {
                predict_flat(
                    self.layout(),
                    self.activation,
                    &p,
                    &flat[i * f..(i + 1) * f],
                )
            })
            .collect())
    }
}

/// Gradient of the batch MSE with the same shapes as [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    /// The batch MSE at which the gradient was taken.
    pub loss: f64,
}

impl Gradient {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.w1.iter().copied().collect();
        p.extend(self.b1.iter());
        p.extend(self.w2.iter());
        p.push(self.b2);
        p
    }
}

/// Exact gradient of `(1/m) sum (y - yhat)^2` over the batch.
pub fn gradient(model: &MlpModel, x: &Array2<f64>, y: &Array1<f64>) -> Result<Gradient> {
    check_dim(model.n_inputs(), x.ncols())?;
    check_dim(x.nrows(), y.len())?;
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    model.validate()?;
    let layout = model.layout();
    let batch = Batch::new(x, y.as_slice().expect("contiguous target"));
    let mut g = vec![0.0; layout.len()];
    let loss = loss_and_gradient(
        layout,
        model.activation,
        &model.to_flat(),
        &batch,
        None,
        &mut g,
    );
    let m = MlpModel::from_flat(layout, &g, model.activation, model.provenance.clone());
    Ok(Gradient {
        w1: m.w1,
        b1: m.b1,
        w2: m.w2,
        b2: m.b2,
        loss,
    })
}

/// Row-major training inputs.
pub(crate) struct Batch<'a> {
    x: std::borrow::Cow<'a, [f64]>,
    y: &'a [f64],
    inputs: usize,
}

impl<'a> Batch<'a> {
    pub fn new(x: &'a Array2<f64>, y: &'a [f64]) -> Self {
        let inputs = x.ncols();
        let x = match x.as_slice() {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(x.as_standard_layout().iter().copied().collect()),
        };
        Self { x, y, inputs }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.inputs..(i + 1) * self.inputs]
    }
}

pub(crate) fn predict_flat(layout: Layout, act: Activation, p: &[f64], x: &[f64]) -> f64 {
    let f = layout.inputs;
    let (w1, rest) = p.split_at(layout.b1());
    let (b1, rest) = rest.split_at(layout.hidden);
    let (w2, b2) = rest.split_at(layout.hidden);
    let mut out = b2[0];
    for j in 0..layout.hidden {
        let z = b1[j]
            + w1[j * f..(j + 1) * f]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        out += w2[j] * act.apply(z);
    }
    out
}

/// MSE over the rows in `subset` (all rows when `None`); writes the
/// gradient into `grad`.
pub(crate) fn loss_and_gradient(
    layout: Layout,
    act: Activation,
    p: &[f64],
    batch: &Batch<'_>,
    subset: Option<&[usize]>,
    grad: &mut [f64],
) -> f64 {
    let f = layout.inputs;
    let h = layout.hidden;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (w1, rest) = p.split_at(layout.b1());
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let (gw1, grest) = grad.split_at_mut(layout.b1());
    let (gb1, grest) = grest.split_at_mut(h);
    let (gw2, gb2) = grest.split_at_mut(h);

    let m = subset.map_or(batch.len(), |s| s.len());
    let scale = 2.0 / m as f64;
    let mut z = vec![0.0; h];
    let mut a = vec![0.0; h];
    let mut sse = 0.0;
    let mut step = |i: usize| {
        let x = batch.row(i);
        let mut out = b2[0];
        for j in 0..h {
            z[j] = b1[j]
                + w1[j * f..(j + 1) * f]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            a[j] = act.apply(z[j]);
            out += w2[j] * a[j];
        }
        let err = out - batch.y[i];
        sse += err * err;
        let g = scale * err;
        gb2[0] += g;
        for j in 0..h {
            gw2[j] += g * a[j];
            let delta = g * w2[j] * act.derivative(z[j], a[j]);
            if delta != 0.0 {
                gb1[j] += delta;
                for (gw, v) in gw1[j * f..(j + 1) * f].iter_mut().zip(x) {
                    *gw += delta * v;
                }
            }
        }
    };
    match subset {
        Some(idx) => idx.iter().for_each(|&i| step(i)),
        None => (0..batch.len()).for_each(&mut step),
    }
    sse / m as f64
}
