//! Per-view evidence networks: small fully connected nets whose final ReLU
//! makes every output a valid (non-negative) evidence count.
//!
//! Forward and backward passes are hand-written over plain `Vec<f64>`
//! buffers. `forward` caches pre-activations per layer in a [`ForwardTrace`];
//! `backward` consumes the trace plus an upstream gradient with respect to
//! the evidence and returns exact parameter gradients (validated against
//! central differences in the tests). ReLU uses the zero subgradient at the
//! kink, so results are deterministic.
//!
//! Checkpoints are a small binary format: magic `EMLP`, a version number,
//! the view index and init seed, layer shapes, then row-major weights and
//! biases as little-endian `f64`. The exact layout is documented in the
//! repository README.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opinion::Evidence;

const CHECKPOINT_MAGIC: &[u8; 4] = b"EMLP";
const CHECKPOINT_VERSION: u16 = 1;

/// Layer sizes of an evidence net: input width, hidden widths, output width
/// (= number of classes). Every layer, including the last, applies ReLU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim < 2 || hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter {
                name: "mlp spec",
                reason: format!(
                    "invalid sizes: input {input_dim}, hidden {hidden_dims:?}, output {output_dim}"
                ),
            });
        }
        Ok(MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
        })
    }

    /// `(in, out)` pairs for each layer.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One dense layer: `out_dim × in_dim` weights (row-major) plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Parameters of one view's evidence network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub layers: Vec<Layer>,
    /// Which view this net reads; recorded in checkpoints.
    pub view_index: usize,
    /// Seed used by [`init`]; recorded in checkpoints.
    pub seed: u64,
}

/// Gradients with the same shapes as the net's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl MlpGradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGradients {
            layers: params
                .layers
                .iter()
                .map(|layer| LayerGradients {
                    weights: vec![0.0; layer.weights.len()],
                    biases: vec![0.0; layer.biases.len()],
                })
                .collect(),
        }
    }

    /// `self += other · scale`, used to merge gradient contributions.
    pub fn add_scaled(&mut self, other: &MlpGradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y * scale;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y * scale;
            }
        }
    }
}

/// Cached forward state for one batch: the input and each layer's
/// pre-activations (needed to gate the ReLU backward pass) and activations.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Vec<Vec<f64>>,
    /// `pre[l][n]` = pre-activation of layer `l` for batch element `n`.
    pre: Vec<Vec<Vec<f64>>>,
    /// `act[l][n]` = ReLU(pre[l][n]).
    act: Vec<Vec<Vec<f64>>>,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.input.len()
    }
}

/// Deterministic initialization: hidden and output weights uniform in
/// `±1/√fan_in`, hidden biases zero, final-layer biases `+0.1` so the output
/// ReLU starts alive (all-zero evidence has zero gradient into the biases).
pub fn init(spec: &MlpSpec, view_index: usize, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = spec.layer_shapes();
    let last = shapes.len() - 1;
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(l, &(in_dim, out_dim))| {
            let scale = 1.0 / (in_dim as f64).sqrt();
            Layer {
                weights: (0..in_dim * out_dim)
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect(),
                biases: vec![if l == last { 0.1 } else { 0.0 }; out_dim],
                in_dim,
                out_dim,
            }
        })
        .collect();
    MlpParams {
        spec: spec.clone(),
        layers,
        view_index,
        seed,
    }
}

impl MlpParams {
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Runs the batch through every layer (affine then ReLU), returning the
    /// evidence vectors and the trace needed for [`backward`](Self::backward).
    pub fn forward(&self, batch: &[Vec<f64>]) -> Result<(Vec<Evidence>, ForwardTrace)> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = Vec::with_capacity(self.layers.len());
        for x in batch {
            if x.len() != self.spec.input_dim {
                return Err(Error::dim("mlp input", self.spec.input_dim, x.len()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "mlp input".into(),
                });
            }
        }
        let mut current: Vec<Vec<f64>> = batch.to_vec();
        for layer in &self.layers {
            let mut layer_pre = Vec::with_capacity(batch.len());
            let mut layer_act = Vec::with_capacity(batch.len());
            for x in &current {
                let mut z = layer.biases.clone();
                for (row, z_k) in z.iter_mut().enumerate() {
                    let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                    *z_k += w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                }
                // Overflowed pre-activations must surface as an error here:
                // `NaN.max(0.0)` is 0.0, so the ReLU below would otherwise
                // silently launder a diverged parameter set into zeros.
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: "mlp pre-activation".into(),
                    });
                }
                let a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                layer_pre.push(z);
                layer_act.push(a);
            }
            current = layer_act.clone();
            pre.push(layer_pre);
            act.push(layer_act);
        }
        let evidence = current
            .iter()
            .map(|e| Evidence::new(e.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            evidence,
            ForwardTrace {
                input: batch.to_vec(),
                pre,
                act,
            },
        ))
    }

    /// Reverse-mode pass. `upstream[n]` is `∂L/∂e` for batch element `n`;
    /// returns parameter gradients summed over the batch plus `∂L/∂x` per
    /// element. ReLU gates with `pre > 0` (zero subgradient at the kink).
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        upstream: &[Vec<f64>],
    ) -> Result<(MlpGradients, Vec<Vec<f64>>)> {
        let batch = trace.batch_size();
        if upstream.len() != batch {
            return Err(Error::dim("mlp upstream batch", batch, upstream.len()));
        }
        for g in upstream {
            if g.len() != self.spec.output_dim {
                return Err(Error::dim("mlp upstream", self.spec.output_dim, g.len()));
            }
        }
        if trace.pre.len() != self.layers.len() {
            return Err(Error::dim(
                "mlp trace layers",
                self.layers.len(),
                trace.pre.len(),
            ));
        }

        let mut grads = MlpGradients::zeros_like(self);
        // delta[n] = ∂L/∂(current layer's pre-activation), walked backwards.
        let mut delta: Vec<Vec<f64>> = (0..batch)
            .map(|n| {
                upstream[n]
                    .iter()
                    .zip(&trace.pre[self.layers.len() - 1][n])
                    .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                    .collect()
            })
            .collect();

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let grad = &mut grads.layers[l];
            let mut prev_delta: Vec<Vec<f64>> = vec![vec![0.0; layer.in_dim]; batch];
            for n in 0..batch {
                let x: &[f64] = if l == 0 {
                    &trace.input[n]
                } else {
                    &trace.act[l - 1][n]
                };
                for row in 0..layer.out_dim {
                    let d = delta[n][row];
                    if d == 0.0 {
                        continue;
                    }
                    grad.biases[row] += d;
                    let w_row = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                    let g_row = &mut grad.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for col in 0..layer.in_dim {
                        g_row[col] += d * x[col];
                        prev_delta[n][col] += d * w_row[col];
                    }
                }
            }
            if l > 0 {
                // Gate through the previous layer's ReLU.
                for n in 0..batch {
                    for (pd, &z) in prev_delta[n].iter_mut().zip(&trace.pre[l - 1][n]) {
                        if z <= 0.0 {
                            *pd = 0.0;
                        }
                    }
                }
            }
            delta = prev_delta;
        }
        Ok((grads, delta))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save_writer(&mut w)
    }

    pub fn save_writer(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.view_index as u16).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            w.write_all(&(layer.in_dim as u32).to_le_bytes())?;
            w.write_all(&(layer.out_dim as u32).to_le_bytes())?;
        }
        for layer in &self.layers {
            for &value in layer.weights.iter().chain(&layer.biases) {
                w.write_all(&value.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MlpParams> {
        MlpParams::load_reader(&mut BufReader::new(File::open(path)?))
    }

    pub fn load_reader(r: &mut impl Read) -> Result<MlpParams> {
        fn read_exact<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf).map_err(|e| Error::Checkpoint {
                reason: format!("truncated while reading {what}: {e}"),
            })?;
            Ok(buf)
        }
        let magic: [u8; 4] = read_exact(r, "magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint {
                reason: format!("bad magic {magic:?}, not an evidence-net checkpoint"),
            });
        }
        let version = u16::from_le_bytes(read_exact(r, "version")?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint {
                reason: format!("unsupported version {version}"),
            });
        }
        let view_index = u16::from_le_bytes(read_exact(r, "view index")?) as usize;
        let seed = u64::from_le_bytes(read_exact(r, "seed")?);
        let n_layers = u32::from_le_bytes(read_exact(r, "layer count")?) as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::Checkpoint {
                reason: format!("implausible layer count {n_layers}"),
            });
        }
        let mut shapes: Vec<(usize, usize)> = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let in_dim = u32::from_le_bytes(read_exact(r, "layer shape")?) as usize;
            let out_dim = u32::from_le_bytes(read_exact(r, "layer shape")?) as usize;
            if in_dim == 0 || out_dim == 0 {
                return Err(Error::Checkpoint {
                    reason: format!("layer {i} has zero dimension"),
                });
            }
            if i > 0 && shapes[i - 1].1 != in_dim {
                return Err(Error::Checkpoint {
                    reason: format!("layer {i} input {in_dim} does not chain"),
                });
            }
            shapes.push((in_dim, out_dim));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for &(in_dim, out_dim) in &shapes {
            let mut weights = Vec::with_capacity(in_dim * out_dim);
            for _ in 0..in_dim * out_dim {
                weights.push(f64::from_le_bytes(read_exact(r, "weights")?));
            }
            let mut biases = Vec::with_capacity(out_dim);
            for _ in 0..out_dim {
                biases.push(f64::from_le_bytes(read_exact(r, "biases")?));
            }
            if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint {
                    reason: "non-finite parameter".into(),
                });
            }
            layers.push(Layer {
                weights,
                biases,
                in_dim,
                out_dim,
            });
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::Checkpoint {
            reason: e.to_string(),
        })? != 0
        {
            return Err(Error::Checkpoint {
                reason: "trailing bytes after parameters".into(),
            });
        }
        let spec = MlpSpec {
            input_dim: shapes[0].0,
            hidden_dims: shapes[..n_layers - 1].iter().map(|s| s.1).collect(),
            output_dim: shapes[n_layers - 1].1,
        };
        Ok(MlpParams {
            spec,
            layers,
            view_index,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_difference_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(input: usize, hidden: &[usize], output: usize) -> MlpSpec {
        MlpSpec::new(input, hidden.to_vec(), output).unwrap()
    }

    /// Flattened view of all parameters, for finite-difference probing.
    fn get_params(net: &MlpParams) -> Vec<f64> {
        net.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn set_params(net: &mut MlpParams, flat: &[f64]) {
        let mut it = flat.iter();
        for layer in &mut net.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
        assert!(it.next().is_none());
    }

    fn flat_grad(grads: &MlpGradients) -> Vec<f64> {
        grads
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    #[test]
    fn zero_parameters_yield_zero_evidence() {
        let mut net = init(&spec(3, &[4], 2), 0, 0);
        for layer in &mut net.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        let (evidence, _) = net.forward(&[vec![1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(evidence[0].values(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_layer_is_relu() {
        // Single 2×2 identity layer: ReLU of the input itself.
        let net = MlpParams {
            spec: spec(2, &[], 2),
            layers: vec![Layer {
                weights: vec![1.0, 0.0, 0.0, 1.0],
                biases: vec![0.0, 0.0],
                in_dim: 2,
                out_dim: 2,
            }],
            view_index: 0,
            seed: 0,
        };
        let (evidence, _) = net.forward(&[vec![1.0, -1.0]]).unwrap();
        assert_eq!(evidence[0].values(), &[1.0, 0.0]);
    }

    #[test]
    fn outputs_are_never_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let net = init(&spec(4, &[6], 3), 0, trial);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let (evidence, _) = net.forward(&[x]).unwrap();
            assert!(evidence[0].values().iter().all(|&e| e >= 0.0));
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = init(&spec(3, &[4], 2), 0, 0);
        assert!(net.forward(&[vec![1.0, 2.0]]).is_err());
        assert!(net.forward(&[vec![1.0, f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = init(&spec(3, &[5], 2), 0, 1);
        let (_, trace) = net.forward(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let (grads, dx) = net.backward(&trace, &[vec![0.0, 0.0]]).unwrap();
        assert!(flat_grad(&grads).iter().all(|&g| g == 0.0));
        assert!(dx[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input_broadcast() {
        // Single layer, positive pre-activations, L = Σ e ⇒ ∂L/∂W_kj = x_j.
        let net = MlpParams {
            spec: spec(2, &[], 2),
            layers: vec![Layer {
                weights: vec![1.0, 0.0, 0.0, 1.0],
                biases: vec![5.0, 5.0],
                in_dim: 2,
                out_dim: 2,
            }],
            view_index: 0,
            seed: 0,
        };
        let x = vec![2.0, 3.0];
        let (_, trace) = net.forward(&[x.clone()]).unwrap();
        let (grads, dx) = net.backward(&trace, &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(grads.layers[0].weights, vec![2.0, 3.0, 2.0, 3.0]);
        assert_eq!(grads.layers[0].biases, vec![1.0, 1.0]);
        // ∂L/∂x_j = Σ_k W_kj = 1 for the identity matrix.
        assert_eq!(dx[0], vec![1.0, 1.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // ≥ 20 random (net, input, upstream) triples; fixed seeds keep the
        // ReLU kinks away from the probe step often enough to be exact.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..25 {
            let input_dim = rng.gen_range(2..5);
            let hidden: Vec<usize> = (0..rng.gen_range(0..3usize))
                .map(|_| rng.gen_range(2..6))
                .collect();
            let output_dim = rng.gen_range(2..4);
            let net = init(&spec(input_dim, &hidden, output_dim), 0, 1000 + trial);
            let batch: Vec<Vec<f64>> = (0..rng.gen_range(1..4usize))
                .map(|_| (0..input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let upstream: Vec<Vec<f64>> = (0..batch.len())
                .map(|_| (0..output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();

            let (_, trace) = net.forward(&batch).unwrap();
            let (grads, _) = net.backward(&trace, &upstream).unwrap();
            let analytic = flat_grad(&grads);

            let flat0 = get_params(&net);
            let mut probe_net = net.clone();
            let loss = |theta: &[f64]| {
                set_params(&mut probe_net, theta);
                let (evidence, _) = probe_net.forward(&batch).unwrap();
                evidence
                    .iter()
                    .zip(&upstream)
                    .map(|(e, u)| e.values().iter().zip(u).map(|(ev, uv)| ev * uv).sum::<f64>())
                    .sum()
            };
            let numeric = finite_difference_gradient(loss, &flat0, 1e-5).unwrap();
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
                assert!(
                    rel < 1e-4,
                    "trial {trial} parameter {i}: analytic {a}, numeric {n}"
                );
            }
        }
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let net = init(&spec(4, &[6], 3), 0, 7);
        let x = vec![0.5, -1.0, 2.0, 0.25];
        let upstream = vec![vec![1.0, -0.5, 0.75]];
        let (_, trace) = net.forward(&[x.clone()]).unwrap();
        let (_, dx) = net.backward(&trace, &upstream).unwrap();
        let loss = |xi: &[f64]| {
            let (evidence, _) = net.forward(&[xi.to_vec()]).unwrap();
            evidence[0]
                .values()
                .iter()
                .zip(&upstream[0])
                .map(|(e, u)| e * u)
                .sum()
        };
        let numeric = finite_difference_gradient(loss, &x, 1e-6).unwrap();
        for (a, n) in dx[0].iter().zip(&numeric) {
            assert!((a - n).abs() / a.abs().max(n.abs()).max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn init_is_deterministic_and_biases_start_positive() {
        let s = spec(5, &[8], 4);
        let a = init(&s, 2, 42);
        let b = init(&s, 2, 42);
        assert_eq!(a, b);
        let c = init(&s, 2, 43);
        assert_ne!(a, c);
        assert_eq!(a.layers.last().unwrap().biases, vec![0.1; 4]);
        assert_eq!(a.layers[0].biases, vec![0.0; 8]);
        // Hidden weights bounded by 1/√fan_in.
        let bound = 1.0 / (5.0f64).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn spec_rejects_zero_widths() {
        assert!(MlpSpec::new(0, vec![4], 2).is_err());
        assert!(MlpSpec::new(3, vec![0], 2).is_err());
        assert!(MlpSpec::new(3, vec![4], 1).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = init(&spec(6, &[10, 7], 3), 4, 123);
        let mut buf = Vec::new();
        net.save_writer(&mut buf).unwrap();
        let back = MlpParams::load_reader(&mut buf.as_slice()).unwrap();
        assert_eq!(net, back);
        assert_eq!(back.view_index, 4);
        assert_eq!(back.seed, 123);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let net = init(&spec(3, &[4], 2), 0, 9);
        let mut buf = Vec::new();
        net.save_writer(&mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(MlpParams::load_reader(&mut bad_magic.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 3];
        assert!(MlpParams::load_reader(&mut &truncated[..]).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(MlpParams::load_reader(&mut trailing.as_slice()).is_err());
    }

    #[test]
    fn batch_forward_matches_single_forward() {
        let net = init(&spec(3, &[5], 2), 0, 17);
        let xs = vec![vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 0.5]];
        let (batch_ev, _) = net.forward(&xs).unwrap();
        for (x, expected) in xs.iter().zip(&batch_ev) {
            let (single, _) = net.forward(std::slice::from_ref(x)).unwrap();
            assert_eq!(single[0], *expected);
        }
    }
}
