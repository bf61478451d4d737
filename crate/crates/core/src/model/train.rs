use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, check_params, validate_hyper, DataShard, Forward, ModelArch, ParameterVector};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Momentum SGD hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Mini-batch shuffling seed; unused for full-batch training.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Mean cross-entropy over `indices` of `data` and its gradient with respect
/// to every parameter. Weight decay is not included.
pub fn loss_and_gradient<T: Scalar>(
    arch: &ModelArch,
    params: &ParameterVector<T>,
    data: &DataShard<T>,
    indices: &[usize],
) -> Result<(T, Vec<T>)> {
    check_params(arch, params)?;
    check_data(arch, data)?;
    let mut grad = vec![T::zero(); params.len()];
    let loss = accumulate_gradient(arch, params.values(), data, indices, &mut grad);
    Ok((loss, grad))
}

fn check_data<T: Scalar>(arch: &ModelArch, data: &DataShard<T>) -> Result<()> {
    if data.dim() != arch.input_dim() {
        return Err(Error::LengthMismatch {
            expected: arch.input_dim(),
            actual: data.dim(),
        });
    }
    if data.num_classes() > arch.num_classes() {
        return Err(Error::ManifestMismatch(format!(
            "dataset has {} classes but the model emits {}",
            data.num_classes(),
            arch.num_classes()
        )));
    }
    Ok(())
}

fn accumulate_gradient<T: Scalar>(
    arch: &ModelArch,
    params: &[T],
    data: &DataShard<T>,
    indices: &[usize],
    grad: &mut [T],
) -> T {
    grad.iter_mut().for_each(|g| *g = T::zero());
    if indices.is_empty() {
        return T::zero();
    }
    let layers = arch.layers();
    let offsets: Vec<usize> = layers
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.param_count();
            Some(o)
        })
        .collect();
    let mut fwd = Forward::new(arch);
    let mut delta: Vec<T> = Vec::new();
    let mut delta_prev: Vec<T> = Vec::new();
    let mut loss = T::zero();
    let scale = T::one() / lit::<T>(indices.len() as f64);

    for &idx in indices {
        let (x, y) = data.sample(idx);
        fwd.run(arch, params, x);

        // softmax cross-entropy
        let logits = fwd.logits();
        let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let denom: T = logits.iter().map(|&v| (v - max).exp()).sum();
        loss += (denom.ln() + max - logits[y]) * scale;
        delta.clear();
        delta.extend(logits.iter().map(|&v| (v - max).exp() / denom * scale));
        delta[y] -= scale;

        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let off = offsets[li];
            let input = &fwd.acts[li];
            let w_len = layer.inputs * layer.outputs;
            {
                let (gw, gb) = grad[off..off + layer.param_count()].split_at_mut(w_len);
                for (o, &d) in delta.iter().enumerate() {
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &a) in row.iter_mut().zip(input.iter()) {
                        *g += d * a;
                    }
                    gb[o] += d;
                }
            }
            if li == 0 {
                break;
            }
            let w = &params[off..off + w_len];
            let prev_act = layers[li - 1].activation;
            delta_prev.clear();
            delta_prev.resize(layer.inputs, T::zero());
            for (o, &d) in delta.iter().enumerate() {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                for (dp, &wi) in delta_prev.iter_mut().zip(row.iter()) {
                    *dp += wi * d;
                }
            }
            for (dp, &a) in delta_prev.iter_mut().zip(input.iter()) {
                *dp *= prev_act.derivative_from_output(a);
            }
            std::mem::swap(&mut delta, &mut delta_prev);
        }
    }
    loss
}

/// Runs `epochs` passes of momentum SGD over `shard`, starting from `params`
/// with a fresh momentum buffer.
pub fn local_train<T: Scalar>(
    arch: &ModelArch,
    params: &ParameterVector<T>,
    shard: &DataShard<T>,
    epochs: usize,
    cfg: &TrainConfig,
) -> Result<ParameterVector<T>> {
    check_params(arch, params)?;
    check_data(arch, shard)?;
    validate_hyper(cfg)?;
    let mut out = params.clone();
    if epochs == 0 || shard.is_empty() {
        return Ok(out);
    }
    let lr = lit::<T>(cfg.lr);
    let mu = lit::<T>(cfg.momentum);
    let wd = lit::<T>(cfg.weight_decay);
    let mut velocity = vec![T::zero(); params.len()];
    let mut grad = vec![T::zero(); params.len()];
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let batch = cfg.batch_size.unwrap_or(shard.len()).min(shard.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for _ in 0..epochs {
        if batch < shard.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            accumulate_gradient(arch, out.values(), shard, chunk, &mut grad);
            for ((w, v), &g) in out.values_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                let g = g + wd * *w;
                *v = mu * *v + g;
                *w -= lr * *v;
            }
        }
    }
    Ok(out)
}

/// Top-1 accuracy of `params` on `test`.
pub fn evaluate<T: Scalar>(
    arch: &ModelArch,
    params: &ParameterVector<T>,
    test: &DataShard<T>,
) -> Result<f64> {
    check_params(arch, params)?;
    check_data(arch, test)?;
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut fwd = Forward::new(arch);
    let correct = (0..test.len())
        .filter(|&i| {
            let (x, y) = test.sample(i);
            fwd.run(arch, params.values(), x);
            argmax(fwd.logits()) == y
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{blobs, build_model, Activation, BlobSpec};

    fn arch_2_4_3() -> ModelArch {
        ModelArch::dense(&[2, 4, 3], Activation::Tanh).unwrap()
    }

    fn tiny_data() -> DataShard<f64> {
        blobs(
            &BlobSpec {
                samples: 12,
                dim: 2,
                classes: 3,
                center_spread: 1.5,
                noise: 0.5,
                offset: 0.0,
            },
            3,
            4,
        )
        .unwrap()
    }

    fn mean_ce(arch: &ModelArch, p: &[f64], data: &DataShard<f64>) -> f64 {
        // Independent forward: explicit loops over the flat layout.
        let mut total = 0.0;
        for i in 0..data.len() {
            let (x, y) = data.sample(i);
            let mut a = x.to_vec();
            let mut off = 0;
            for layer in arch.layers() {
                let mut z = vec![0.0; layer.outputs];
                for o in 0..layer.outputs {
                    z[o] = p[off + layer.inputs * layer.outputs + o];
                    for k in 0..layer.inputs {
                        z[o] += p[off + o * layer.inputs + k] * a[k];
                    }
                    z[o] = match layer.activation {
                        Activation::Identity => z[o],
                        Activation::Relu => z[o].max(0.0),
                        Activation::Tanh => z[o].tanh(),
                    };
                }
                off += layer.param_count();
                a = z;
            }
            let lse = a.iter().map(|v| v.exp()).sum::<f64>().ln();
            total += lse - a[y];
        }
        total / data.len() as f64
    }

    #[test]
    fn gradient_matches_central_differences() {
        let arch = arch_2_4_3();
        let params: ParameterVector<f64> = build_model(&arch, 7);
        let data = tiny_data();
        let idx: Vec<usize> = (0..data.len()).collect();
        let (loss, grad) = loss_and_gradient(&arch, &params, &data, &idx).unwrap();
        assert!((loss - mean_ce(&arch, params.values(), &data)).abs() < 1e-12);
        let h = 1e-6;
        for i in 0..params.len() {
            let mut p = params.values().to_vec();
            p[i] += h;
            let up = mean_ce(&arch, &p, &data);
            p[i] -= 2.0 * h;
            let down = mean_ce(&arch, &p, &data);
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom < 1e-4,
                "param {i}: fd {fd} vs analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn relu_gradient_matches_central_differences() {
        let arch = ModelArch::dense(&[2, 4, 3], Activation::Relu).unwrap();
        let params: ParameterVector<f64> = build_model(&arch, 11);
        let data = tiny_data();
        let idx: Vec<usize> = (0..data.len()).collect();
        let (_, grad) = loss_and_gradient(&arch, &params, &data, &idx).unwrap();
        let h = 1e-6;
        for i in 0..params.len() {
            let mut p = params.values().to_vec();
            p[i] += h;
            let up = mean_ce(&arch, &p, &data);
            p[i] -= 2.0 * h;
            let fd = (up - mean_ce(&arch, &p, &data)) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!((fd - grad[i]).abs() / denom < 1e-4, "param {i}");
        }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let arch = arch_2_4_3();
        let params: ParameterVector<f64> = build_model(&arch, 1);
        let out = local_train(&arch, &params, &tiny_data(), 0, &TrainConfig::default()).unwrap();
        assert_eq!(out, params);
    }

    #[test]
    fn single_step_matches_hand_sgd() {
        // One-layer softmax regression on one sample, no momentum history,
        // no weight decay: w' = w − lr · (softmax(Wx + b) − e_y) xᵀ.
        let arch = ModelArch::dense(&[2, 3], Activation::Relu).unwrap();
        let params: ParameterVector<f64> = build_model(&arch, 5);
        let data = DataShard::new(2, 3, vec![0.5, -1.0], vec![2]).unwrap();
        let cfg = TrainConfig {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: None,
            seed: 0,
        };
        let out = local_train(&arch, &params, &data, 1, &cfg).unwrap();

        let p = params.values();
        let x = [0.5, -1.0];
        let z: Vec<f64> = (0..3)
            .map(|o| p[6 + o] + p[o * 2] * x[0] + p[o * 2 + 1] * x[1])
            .collect();
        let s: f64 = z.iter().map(|v| v.exp()).sum();
        let mut want = p.to_vec();
        for o in 0..3 {
            let d = z[o].exp() / s - if o == 2 { 1.0 } else { 0.0 };
            want[o * 2] -= 0.1 * d * x[0];
            want[o * 2 + 1] -= 0.1 * d * x[1];
            want[6 + o] -= 0.1 * d;
        }
        for (a, b) in out.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_blobs_train_above_ninety_percent() {
        let arch = ModelArch::dense(&[2, 8, 3], Activation::Relu).unwrap();
        let data: DataShard<f32> = blobs(
            &BlobSpec {
                samples: 300,
                dim: 2,
                classes: 3,
                center_spread: 4.0,
                noise: 0.5,
                offset: 0.0,
            },
            21,
            22,
        )
        .unwrap();
        let params: ParameterVector<f32> = build_model(&arch, 3);
        let trained = local_train(&arch, &params, &data, 60, &TrainConfig::default()).unwrap();
        let acc = evaluate(&arch, &trained, &data).unwrap();
        assert!(acc > 0.9, "accuracy {acc}");
    }

    #[test]
    fn training_is_deterministic_with_minibatches() {
        let arch = arch_2_4_3();
        let params: ParameterVector<f64> = build_model(&arch, 1);
        let cfg = TrainConfig {
            batch_size: Some(5),
            seed: 42,
            ..TrainConfig::default()
        };
        let a = local_train(&arch, &params, &tiny_data(), 3, &cfg).unwrap();
        let b = local_train(&arch, &params, &tiny_data(), 3, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_class_zero_model() {
        // Zero weights and a bias favouring class 0.
        let arch = ModelArch::dense(&[2, 3], Activation::Relu).unwrap();
        let mut v = vec![0.0f32; 9];
        v[6] = 1.0;
        let p = ParameterVector::new(arch.manifest(), v).unwrap();
        let zeros = DataShard::new(2, 3, vec![0.3, 0.1, -2.0, 5.0], vec![0, 0]).unwrap();
        let ones = DataShard::new(2, 3, vec![0.3, 0.1, -2.0, 5.0], vec![1, 1]).unwrap();
        assert_eq!(evaluate(&arch, &p, &zeros).unwrap(), 1.0);
        assert_eq!(evaluate(&arch, &p, &ones).unwrap(), 0.0);
    }

    #[test]
    fn random_init_is_near_chance() {
        let arch = ModelArch::dense(&[10, 32, 3], Activation::Relu).unwrap();
        let test: DataShard<f32> = blobs(
            &BlobSpec {
                samples: 900,
                dim: 10,
                classes: 3,
                center_spread: 1.0,
                noise: 1.0,
                offset: 0.0,
            },
            1,
            2,
        )
        .unwrap();
        let accs: Vec<f64> = (0..20)
            .map(|s| evaluate(&arch, &build_model(&arch, s), &test).unwrap())
            .collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.1, "mean accuracy {mean}");
    }

    #[test]
    fn empty_test_set_is_error() {
        let arch = arch_2_4_3();
        let p: ParameterVector<f32> = build_model(&arch, 0);
        let empty = DataShard::new(2, 3, vec![], vec![]).unwrap();
        assert_eq!(evaluate(&arch, &p, &empty), Err(Error::EmptyDataset));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let arch = arch_2_4_3();
        let p = ParameterVector::<f32>::from_flat(vec![0.0; 27]);
        assert!(local_train(&arch, &p, &DataShard::new(2, 3, vec![], vec![]).unwrap(), 1, &TrainConfig::default()).is_err());
    }
}
