//! Dense feed-forward classifier, its flat parameter layout, and training.
//!
//! Parameters are laid out layer by layer; within a layer the weight matrix
//! (outputs × inputs) comes first in row-major order, followed by the bias.

mod data;
mod train;

pub use data::{blobs, partition_dataset, read_csv, write_csv, BlobSpec, DataShard};
pub use train::{evaluate, local_train, loss_and_gradient, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "identity" | "linear" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Validated stack of dense layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelArch {
    layers: Vec<LayerSpec>,
}

impl ModelArch {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArch("no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.inputs == 0 || layer.outputs == 0 {
                return Err(Error::InvalidArch(format!("layer {i} has zero width")));
            }
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(Error::InvalidArch(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    layer.inputs,
                    layers[i - 1].outputs
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Builds `widths[0] → widths[1] → … → widths[n]` with `hidden` between
    /// layers and an identity output layer (logits).
    pub fn dense(widths: &[usize], hidden: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArch(
                "need at least an input and an output width".into(),
            ));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| LayerSpec {
                inputs: widths[i],
                outputs: widths[i + 1],
                activation: if i + 1 == n {
                    Activation::Identity
                } else {
                    hidden
                },
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest(
            self.layers
                .iter()
                .map(|l| LayerShape {
                    rows: l.outputs,
                    cols: l.inputs,
                    bias: l.outputs,
                })
                .collect(),
        )
    }
}

/// Shape of one layer's parameter block: a `rows × cols` weight matrix
/// followed by `bias` entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    pub bias: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.bias
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Manifest(pub Vec<LayerShape>);

impl Manifest {
    /// Manifest for an unstructured vector of `len` values.
    pub fn flat(len: usize) -> Self {
        Manifest(vec![LayerShape {
            rows: 1,
            cols: len,
            bias: 0,
        }])
    }

    pub fn total_len(&self) -> usize {
        self.0.iter().map(LayerShape::len).sum()
    }
}

/// Flat model parameters together with the layout they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector<T> {
    values: Vec<T>,
    manifest: Manifest,
}

impl<T: Scalar> ParameterVector<T> {
    pub fn new(manifest: Manifest, values: Vec<T>) -> Result<Self> {
        let expected = manifest.total_len();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { values, manifest })
    }

    /// Unstructured vector, e.g. a test signal or a model difference.
    pub fn from_flat(values: Vec<T>) -> Self {
        Self {
            manifest: Manifest::flat(values.len()),
            values,
        }
    }

    pub fn zeros(manifest: Manifest) -> Self {
        Self {
            values: vec![T::zero(); manifest.total_len()],
            manifest,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.manifest.clone(), values)
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }

    /// `self − other`, keeping `self`'s manifest.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            values,
            manifest: self.manifest.clone(),
        })
    }

    /// `self + other`, keeping `self`'s manifest.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            values,
            manifest: self.manifest.clone(),
        })
    }

    /// Mean squared difference, accumulated in `f64`.
    pub fn mse(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        if self.is_empty() {
            return Ok(0.0);
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                let d = (a - b).to_f64_lossy();
                d * d
            })
            .sum();
        Ok(sum / self.len() as f64)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn power_sum(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }
}

/// Row-major `rows × cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }
}

/// Structured parameters of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Copy> LayerParams<T> {
    fn shape(&self) -> LayerShape {
        LayerShape {
            rows: self.weights.rows,
            cols: self.weights.cols,
            bias: self.bias.len(),
        }
    }
}

pub fn flatten<T: Scalar>(layers: &[LayerParams<T>]) -> Result<ParameterVector<T>> {
    let manifest = Manifest(layers.iter().map(LayerParams::shape).collect());
    let mut values = Vec::with_capacity(manifest.total_len());
    for (i, layer) in layers.iter().enumerate() {
        if layer.weights.data.len() != layer.weights.rows * layer.weights.cols {
            return Err(Error::ManifestMismatch(format!(
                "layer {i} weight buffer does not match its shape"
            )));
        }
        values.extend_from_slice(&layer.weights.data);
        values.extend_from_slice(&layer.bias);
    }
    ParameterVector::new(manifest, values)
}

pub fn unflatten<T: Scalar>(params: &ParameterVector<T>) -> Result<Vec<LayerParams<T>>> {
    let total = params.manifest.total_len();
    if total != params.len() {
        return Err(Error::LengthMismatch {
            expected: total,
            actual: params.len(),
        });
    }
    let mut offset = 0;
    let mut layers = Vec::with_capacity(params.manifest.0.len());
    for shape in &params.manifest.0 {
        let w_len = shape.rows * shape.cols;
        let weights = Matrix {
            rows: shape.rows,
            cols: shape.cols,
            data: params.values[offset..offset + w_len].to_vec(),
        };
        offset += w_len;
        let bias = params.values[offset..offset + shape.bias].to_vec();
        offset += shape.bias;
        layers.push(LayerParams { weights, bias });
    }
    Ok(layers)
}

/// Deterministic initialization: every weight and bias of a layer is drawn
/// from U[-1/√fan_in, 1/√fan_in).
pub fn build_model<T: Scalar>(arch: &ModelArch, seed: u64) -> ParameterVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(arch.param_count());
    for layer in arch.layers() {
        let bound: T = lit::<T>(1.0) / lit::<T>(layer.inputs as f64).sqrt();
        for _ in 0..layer.param_count() {
            values.push(T::symmetric_uniform(&mut rng) * bound);
        }
    }
    ParameterVector {
        values,
        manifest: arch.manifest(),
    }
}

pub(crate) fn check_params<T: Scalar>(arch: &ModelArch, params: &ParameterVector<T>) -> Result<()> {
    if params.len() != arch.param_count() {
        return Err(Error::LengthMismatch {
            expected: arch.param_count(),
            actual: params.len(),
        });
    }
    if params.manifest != arch.manifest() {
        return Err(Error::ManifestMismatch(
            "parameter manifest does not match architecture".into(),
        ));
    }
    Ok(())
}

/// Scratch buffers for one forward pass; `acts[0]` is the input.
pub(crate) struct Forward<T> {
    pub acts: Vec<Vec<T>>,
}

impl<T: Scalar> Forward<T> {
    pub fn new(arch: &ModelArch) -> Self {
        let mut acts = vec![vec![T::zero(); arch.input_dim()]];
        acts.extend(arch.layers().iter().map(|l| vec![T::zero(); l.outputs]));
        Self { acts }
    }

    /// Runs the network on `x`; logits end up in the last buffer.
    pub fn run(&mut self, arch: &ModelArch, params: &[T], x: &[T]) {
        self.acts[0].copy_from_slice(x);
        let mut offset = 0;
        for (li, layer) in arch.layers().iter().enumerate() {
            let (prev, next) = self.acts.split_at_mut(li + 1);
            let input = &prev[li];
            let output = &mut next[0];
            let w = &params[offset..offset + layer.inputs * layer.outputs];
            let b = &params[offset + layer.inputs * layer.outputs..offset + layer.param_count()];
            for (o, out) in output.iter_mut().enumerate() {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let mut z = b[o];
                for (&wi, &xi) in row.iter().zip(input.iter()) {
                    z += wi * xi;
                }
                *out = layer.activation.apply(z);
            }
            offset += layer.param_count();
        }
    }

    pub fn logits(&self) -> &[T] {
        &self.acts[self.acts.len() - 1]
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub(crate) fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn validate_hyper(cfg: &TrainConfig) -> Result<()> {
    if !(cfg.lr > 0.0) {
        return Err(invalid("lr", "must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(invalid("momentum", "must lie in [0, 1)"));
    }
    if cfg.weight_decay < 0.0 {
        return Err(invalid("weight_decay", "must be non-negative"));
    }
    if cfg.batch_size == Some(0) {
        return Err(invalid("batch_size", "must be positive"));
    }
    Ok(())
}
