//! The training loop: impute once, extract per-view evidence, fuse under a
//! selectable rule, backpropagate the evidential objective, and update every
//! trainable (network weights and the per-view discount logits ρ) with
//! adaptive-moment gradient descent.
//!
//! Everything is deterministic per seed: shuffles and initializations draw
//! from counter-derived ChaCha streams, parallel maps preserve order, and
//! gradient reductions run in a fixed sequence, so two runs with the same
//! config produce bit-identical parameters.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MultiViewSample};
use crate::error::{Error, Result};
use crate::fusion::{discount_fuse_views, ds_fuse_opinions, naive_fuse, DsFold, FusionWeights};
use crate::impute::{
    compute_class_centers, impute_test, impute_train_dataset, ClassCenters, MissingCenterPolicy,
};
use crate::loss::{l_acc_grad, lambda_t, total_loss, LossBreakdown, Schedule};
use crate::mlp::{init, MlpGradients, MlpParams, MlpSpec};
use crate::opinion::{uniform_base_rate, DirichletParams, Evidence, Opinion};
use crate::par::{maybe_par_map, maybe_par_map_index};

/// How per-view opinions are combined into the fused head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// Learnable discount fusion: `ē = (1/V) Σ_v σ(ρ_v) e_v`.
    Discount,
    /// Plain evidence average (all discounts pinned to 1).
    Naive,
    /// Sequential Dempster combination of the per-view opinions.
    Ds,
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Discount => "discount",
            FusionMode::Naive => "naive",
            FusionMode::Ds => "ds",
        })
    }
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discount" => Ok(FusionMode::Discount),
            "naive" => Ok(FusionMode::Naive),
            "ds" => Ok(FusionMode::Ds),
            other => Err(Error::InvalidParameter {
                name: "fusion",
                reason: format!("expected discount, naive, or ds; got {other:?}"),
            }),
        }
    }
}

/// Everything `fit` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden layer widths of every view network (empty = single dense layer).
    pub hidden_dims: Vec<usize>,
    /// Weight β of the per-view loss terms.
    pub beta: f64,
    pub schedule: Schedule,
    pub fusion: FusionMode,
    pub seed: u64,
    /// Fraction held out (class-stratified) for the per-epoch validation
    /// accuracy column; 0 disables the split.
    pub val_fraction: f64,
    /// Early stopping patience in epochs; `None` (default) trains the full
    /// schedule so runs stay reproducible length-wise.
    pub patience: Option<usize>,
    pub center_policy: MissingCenterPolicy,
    /// Use the thread pool for per-view and per-sample maps. Results are
    /// identical either way; this only trades wall-clock for cores.
    pub parallel: bool,
}

impl TrainConfig {
    /// Conventional defaults: batch 64, learning rate 1e-3, one hidden layer
    /// of 64, β = 1, λ ramping to its cap of 1 over the first half of
    /// training, discount fusion, 20% validation split.
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden_dims: vec![64],
            beta: 1.0,
            schedule: Schedule {
                annealing_epochs: (epochs as f64 / 2.0).max(1.0),
                cap: 1.0,
            },
            fusion: FusionMode::Discount,
            seed,
            val_fraction: 0.2,
            patience: None,
            center_policy: MissingCenterPolicy::Strict,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: format!("must be positive and finite, got {}", self.learning_rate),
            });
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be finite and non-negative, got {}", self.beta),
            });
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidParameter {
                name: "val_fraction",
                reason: format!("must lie in [0, 1), got {}", self.val_fraction),
            });
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidParameter {
                name: "patience",
                reason: "early stopping needs at least 1 epoch of patience".into(),
            });
        }
        Schedule::new(self.schedule.annealing_epochs, self.schedule.cap)?;
        Ok(())
    }
}

/// Splitmix-style seed derivation so each consumer (split, per-view init,
/// per-epoch shuffle) gets an independent, reproducible stream.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_SPLIT: u64 = 1;
const TAG_NET: u64 = 1 << 8;
const TAG_EPOCH: u64 = 1 << 24;

/// Adaptive-moment optimizer state (decaying first/second moment estimates)
/// covering every view network plus the fusion logits.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_nets: Vec<MlpGradients>,
    v_nets: Vec<MlpGradients>,
    m_rho: Vec<f64>,
    v_rho: Vec<f64>,
    step: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(nets: &[MlpParams], n_views: usize) -> Self {
        AdamState {
            m_nets: nets.iter().map(MlpGradients::zeros_like).collect(),
            v_nets: nets.iter().map(MlpGradients::zeros_like).collect(),
            m_rho: vec![0.0; n_views],
            v_rho: vec![0.0; n_views],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from the step's gradients.
    fn apply(
        &mut self,
        nets: &mut [MlpParams],
        weights: &mut FusionWeights,
        grads: &StepGradients,
        lr: f64,
    ) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (vi, net) in nets.iter_mut().enumerate() {
            for (li, layer) in net.layers.iter_mut().enumerate() {
                let g = &grads.nets[vi].layers[li];
                let m = &mut self.m_nets[vi].layers[li];
                let v = &mut self.v_nets[vi].layers[li];
                for i in 0..layer.weights.len() {
                    update(
                        &mut layer.weights[i],
                        &mut m.weights[i],
                        &mut v.weights[i],
                        g.weights[i],
                    );
                }
                for i in 0..layer.biases.len() {
                    update(
                        &mut layer.biases[i],
                        &mut m.biases[i],
                        &mut v.biases[i],
                        g.biases[i],
                    );
                }
            }
        }
        let rho = weights.rho_mut();
        for i in 0..rho.len() {
            update(&mut rho[i], &mut self.m_rho[i], &mut self.v_rho[i], grads.rho[i]);
        }
    }
}

/// All trainables plus the artifacts needed to predict: the class centers fit
/// on the training data and a snapshot of the config.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub nets: Vec<MlpParams>,
    pub weights: FusionWeights,
    pub adam: AdamState,
    pub epoch: usize,
    pub centers: ClassCenters,
    pub config: TrainConfig,
}

impl TrainState {
    pub fn num_views(&self) -> usize {
        self.nets.len()
    }

    pub fn n_classes(&self) -> usize {
        self.nets[0].spec.output_dim
    }

    /// The discount vector the configured fusion actually applies: `σ(ρ)`
    /// under discount fusion, all ones otherwise.
    pub fn effective_gammas(&self) -> Vec<f64> {
        match self.config.fusion {
            FusionMode::Discount => self.weights.gammas(),
            FusionMode::Naive | FusionMode::Ds => vec![1.0; self.num_views()],
        }
    }
}

/// One epoch's log line: the annealing coefficient, batch-averaged loss
/// breakdown, and accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: f64,
    pub loss: LossBreakdown,
    pub train_accuracy: f64,
    /// Absent when `val_fraction` is 0.
    pub val_accuracy: Option<f64>,
}

/// The full training transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochRecord>,
    /// Discounts in effect at the end of training (see
    /// [`TrainState::effective_gammas`]).
    pub final_gammas: Vec<f64>,
    pub wall_clock_secs: f64,
    /// True when patience ended training before the configured epoch count.
    pub stopped_early: bool,
}

/// Loss value and every gradient produced by one differentiable step on a
/// batch. `rho` is zero except under discount fusion, where it is
/// `∂L/∂ρ_v` including the logistic factor.
#[derive(Debug, Clone)]
pub struct StepGradients {
    /// Batch-mean loss breakdown.
    pub loss: LossBreakdown,
    pub nets: Vec<MlpGradients>,
    pub rho: Vec<f64>,
}

/// Per-sample piece of the fused-head backward pass: cotangents on each
/// view's evidence and on each view's discount.
struct SampleGrads {
    loss: LossBreakdown,
    d_evidence: Vec<Vec<f64>>,
    d_gamma: Vec<f64>,
}

fn sample_loss_and_grads(
    evidences: &[&Evidence],
    label: usize,
    gammas: &[f64],
    mode: FusionMode,
    beta: f64,
    lambda: f64,
) -> Result<SampleGrads> {
    let v = evidences.len();
    let k = evidences[0].len();
    let view_alphas: Vec<DirichletParams> = evidences
        .iter()
        .map(|e| DirichletParams::from_evidence(e))
        .collect();

    // Per-view heads contribute β · ∂L_acc(α_v)/∂α_v regardless of fusion
    // (α_v = e_v + 1, so the Jacobian onto evidence is the identity).
    let mut d_evidence: Vec<Vec<f64>> = view_alphas
        .iter()
        .map(|alpha| {
            Ok(l_acc_grad(alpha, label, lambda)?
                .into_iter()
                .map(|g| beta * g)
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut d_gamma = vec![0.0; v];

    let fused_alpha = match mode {
        FusionMode::Discount | FusionMode::Naive => {
            let used: Vec<f64> = if mode == FusionMode::Discount {
                gammas.to_vec()
            } else {
                vec![1.0; v]
            };
            let fused_evidence = {
                let owned: Vec<Evidence> = evidences.iter().map(|e| (*e).clone()).collect();
                discount_fuse_views(&owned, &used)?
            };
            let fused_alpha = DirichletParams::from_evidence(&fused_evidence);
            let g_fused = l_acc_grad(&fused_alpha, label, lambda)?;
            for (view, e) in evidences.iter().enumerate() {
                let gv = used[view];
                for (j, d) in d_evidence[view].iter_mut().enumerate() {
                    *d += gv / v as f64 * g_fused[j];
                }
                if mode == FusionMode::Discount {
                    d_gamma[view] = e
                        .values()
                        .iter()
                        .zip(&g_fused)
                        .map(|(ev, g)| ev * g)
                        .sum::<f64>()
                        / v as f64;
                }
            }
            fused_alpha
        }
        FusionMode::Ds => {
            // e → (b, u): b = e/S, u = K/S with S = K + Σe; then a Dempster
            // fold over the pairs; then back to α via ᾱ = K·b̄/ū + 1.
            let strengths: Vec<f64> = evidences
                .iter()
                .map(|e| k as f64 + e.total())
                .collect();
            let pairs: Vec<(Vec<f64>, f64)> = evidences
                .iter()
                .zip(&strengths)
                .map(|(e, &s)| (e.values().iter().map(|x| x / s).collect(), k as f64 / s))
                .collect();
            let fold = DsFold::new(pairs)?;
            let b_bar = fold.belief().to_vec();
            let u_bar = fold.uncertainty();
            let fused_alpha = DirichletParams::new(
                b_bar.iter().map(|b| k as f64 * b / u_bar + 1.0).collect(),
            )?;
            let g_fused = l_acc_grad(&fused_alpha, label, lambda)?;
            let d_belief: Vec<f64> = g_fused.iter().map(|g| g * k as f64 / u_bar).collect();
            let d_uncertainty = -(k as f64 / (u_bar * u_bar))
                * g_fused.iter().zip(&b_bar).map(|(g, b)| g * b).sum::<f64>();
            let per_view = fold.backward(&d_belief, d_uncertainty)?;
            for (view, ((db, du), e)) in per_view.iter().zip(evidences).enumerate() {
                let s = strengths[view];
                let dot: f64 = db.iter().zip(e.values()).map(|(d, x)| d * x).sum();
                for (j, d) in d_evidence[view].iter_mut().enumerate() {
                    *d += db[j] / s - dot / (s * s) - du * k as f64 / (s * s);
                }
            }
            fused_alpha
        }
    };

    let loss = total_loss(&fused_alpha, &view_alphas, label, beta, lambda)?;
    Ok(SampleGrads {
        loss,
        d_evidence,
        d_gamma,
    })
}

/// Forward + backward over one batch: per-view evidence extraction, fusion,
/// the full objective, and gradients for every network parameter and every
/// discount logit. `batches[v][n]` is view `v` of batch element `n`.
///
/// This is the trainer's single differentiable step, exposed so callers can
/// verify the whole analytic gradient against finite differences.
pub fn loss_and_gradients(
    nets: &[MlpParams],
    weights: &FusionWeights,
    batches: &[Vec<Vec<f64>>],
    labels: &[usize],
    beta: f64,
    lambda: f64,
    mode: FusionMode,
    parallel: bool,
) -> Result<StepGradients> {
    let v = nets.len();
    if v == 0 {
        return Err(Error::EmptyInput {
            context: "training step: no view networks".into(),
        });
    }
    if batches.len() != v {
        return Err(Error::dim("training step views", v, batches.len()));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyInput {
            context: "training step: empty batch".into(),
        });
    }
    for batch in batches {
        if batch.len() != n {
            return Err(Error::dim("training step batch", n, batch.len()));
        }
    }
    if weights.rho().len() != v {
        return Err(Error::dim("fusion weights", v, weights.rho().len()));
    }
    let gammas = weights.gammas();

    // Phase 1: per-view forward passes (independent → parallel over views).
    let forwards = maybe_par_map_index(v, parallel, |view| nets[view].forward(&batches[view]));
    let mut evidences = Vec::with_capacity(v);
    let mut traces = Vec::with_capacity(v);
    for f in forwards {
        let (e, t) = f?;
        evidences.push(e);
        traces.push(t);
    }

    // Phase 2: per-sample fusion + loss + evidence cotangents (independent →
    // parallel over samples; collected in order).
    let per_sample = maybe_par_map_index(n, parallel, |i| {
        let sample_views: Vec<&Evidence> = evidences.iter().map(|e| &e[i]).collect();
        sample_loss_and_grads(&sample_views, labels[i], &gammas, mode, beta, lambda)
    });
    let mut upstream: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n); v];
    let mut rho_grads = vec![0.0; v];
    let mut breakdowns = Vec::with_capacity(n);
    let scale = 1.0 / n as f64;
    for item in per_sample {
        let s = item?;
        breakdowns.push(s.loss);
        for (view, d) in s.d_evidence.into_iter().enumerate() {
            // Pre-scale so the per-view backward pass sums straight to the
            // batch-mean gradient.
            upstream[view].push(d.into_iter().map(|g| g * scale).collect());
        }
        for (view, dg) in s.d_gamma.iter().enumerate() {
            // Chain through the logistic: ∂γ/∂ρ = γ(1 − γ).
            rho_grads[view] += dg * gammas[view] * (1.0 - gammas[view]) * scale;
        }
    }

    // Phase 3: per-view backward passes (independent → parallel over views).
    let backwards =
        maybe_par_map_index(v, parallel, |view| nets[view].backward(&traces[view], &upstream[view]));
    let net_grads = backwards
        .into_iter()
        .map(|r| r.map(|(g, _)| g))
        .collect::<Result<Vec<_>>>()?;

    let loss = LossBreakdown::mean(&breakdowns).expect("batch checked non-empty");
    Ok(StepGradients {
        loss,
        nets: net_grads,
        rho: rho_grads,
    })
}

/// Extracts `batches[v][n]` matrices for the given sample indices. Samples
/// must be complete (post-imputation).
fn gather_batches(ds: &Dataset, indices: &[usize]) -> Result<(Vec<Vec<Vec<f64>>>, Vec<usize>)> {
    let v = ds.num_views();
    let mut batches: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(indices.len()); v];
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let sample = &ds.samples[i];
        labels.push(sample.label.ok_or(Error::MissingLabel { sample: sample.id })?);
        for (view, slot) in sample.views.iter().enumerate() {
            let x = slot.as_ref().ok_or(Error::NoPresentViews { sample: sample.id })?;
            batches[view].push(x.clone());
        }
    }
    Ok((batches, labels))
}

/// A single sample's outcome: the argmax of the fused expected probability
/// plus the fused opinion itself, so callers can read off uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub opinion: Opinion,
    /// Which views were filled in by nearest-center imputation.
    pub imputed_views: Vec<bool>,
}

/// Accuracy and mean fused uncertainty over a labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_uncertainty: f64,
    pub n: usize,
}

/// Classifies one sample: impute missing views from the nearest class
/// center (label-free), run every view network, fuse under the trained mode.
pub fn predict(
    state: &TrainState,
    sample: &MultiViewSample,
    centers: &ClassCenters,
) -> Result<Prediction> {
    let filled = impute_test(sample, centers, state.config.center_policy)?;
    let k = state.n_classes();
    let base = uniform_base_rate(k);
    let mut evidences = Vec::with_capacity(state.num_views());
    for (view, net) in state.nets.iter().enumerate() {
        let x = filled.views[view]
            .as_ref()
            .ok_or(Error::NoPresentViews { sample: sample.id })?;
        let (mut e, _) = net.forward(std::slice::from_ref(x))?;
        evidences.push(e.pop().expect("batch of one"));
    }
    let fused = match state.config.fusion {
        FusionMode::Discount => {
            discount_fuse_views(&evidences, &state.weights.gammas())?.to_opinion(&base)?
        }
        FusionMode::Naive => naive_fuse(&evidences)?.to_opinion(&base)?,
        FusionMode::Ds => {
            let opinions = evidences
                .iter()
                .map(|e| e.to_opinion(&base))
                .collect::<Result<Vec<_>>>()?;
            ds_fuse_opinions(&opinions)?
        }
    };
    Ok(Prediction {
        class: fused.predicted_class(),
        opinion: fused,
        imputed_views: filled.imputed.clone(),
    })
}

/// Accuracy (fraction of correct argmax predictions) and mean fused
/// uncertainty over a labeled dataset.
pub fn evaluate(state: &TrainState, ds: &Dataset, centers: &ClassCenters) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::EmptyInput {
            context: "evaluation dataset".into(),
        });
    }
    let outcomes = maybe_par_map(&ds.samples, state.config.parallel, |sample| {
        let label = sample.label.ok_or(Error::MissingLabel { sample: sample.id })?;
        let p = predict(state, sample, centers)?;
        Ok::<(bool, f64), Error>((p.class == label, p.opinion.uncertainty()))
    });
    let mut correct = 0usize;
    let mut uncertainty = 0.0;
    for o in outcomes {
        let (hit, u) = o?;
        correct += hit as usize;
        uncertainty += u;
    }
    let n = ds.len();
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        mean_uncertainty: uncertainty / n as f64,
        n,
    })
}

/// Maps mid-step numeric failures (overflowed activations, non-finite loss)
/// to a divergence error carrying the epoch; structural errors pass through.
fn diverged_if_numeric(err: Error, epoch: usize) -> Error {
    match err {
        Error::NonFinite { .. } | Error::Domain { .. } | Error::InvalidParameter { .. } => {
            Error::Diverged {
                epoch,
                loss: f64::NAN,
            }
        }
        other => other,
    }
}

/// Runs the full training procedure on `train`:
///
/// 1. split off a validation part (class-stratified, seeded),
/// 2. fit class centers on the training part and impute it once,
/// 3. initialize one evidence network per view plus the fusion logits,
/// 4. loop: shuffle, batch, [`loss_and_gradients`], adaptive-moment update,
/// 5. log one [`EpochRecord`] per epoch.
///
/// Deterministic per config: rerunning yields bit-identical parameters.
pub fn fit(train: &Dataset, config: &TrainConfig) -> Result<(TrainState, FitReport)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let started = Instant::now();
    config.validate()?;
    train.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput {
            context: "training dataset".into(),
        });
    }

    // Hold out the validation part before anything is fit, so centers and
    // normalization see training data only.
    let (train_part, val_part) = if config.val_fraction > 0.0 {
        train.split_stratified(config.val_fraction, derive_seed(config.seed, TAG_SPLIT))?
    } else {
        (train.clone(), Dataset { samples: vec![], ..train.clone() })
    };
    if train_part.is_empty() {
        return Err(Error::EmptyInput {
            context: "training split (validation fraction left nothing)".into(),
        });
    }

    // Algorithm step 1: impute the training split once, up front. The
    // validation part is imputed label-free, exactly as test data will be.
    let centers = compute_class_centers(&train_part)?;
    let train_filled =
        impute_train_dataset(&train_part, &centers, config.center_policy, config.parallel)?;
    let val_filled = if val_part.is_empty() {
        None
    } else {
        let filled = maybe_par_map(&val_part.samples, config.parallel, |s| {
            impute_test(s, &centers, config.center_policy)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Some(Dataset {
            samples: filled,
            ..val_part.clone()
        })
    };

    let v = train.num_views();
    let k = train.n_classes;
    let nets: Vec<MlpParams> = (0..v)
        .map(|view| {
            let spec = MlpSpec::new(train.view_dims[view], config.hidden_dims.clone(), k)?;
            Ok(init(
                &spec,
                view,
                derive_seed(config.seed, TAG_NET + view as u64),
            ))
        })
        .collect::<Result<_>>()?;
    let weights = FusionWeights::new(v)?;
    let adam = AdamState::new(&nets, v);
    let mut state = TrainState {
        nets,
        weights,
        adam,
        epoch: 0,
        centers,
        config: config.clone(),
    };

    let mut records: Vec<EpochRecord> = Vec::with_capacity(config.epochs);
    let mut stopped_early = false;
    let mut best_metric = f64::NEG_INFINITY;
    let mut epochs_since_best = 0usize;
    let mut indices: Vec<usize> = (0..train_filled.len()).collect();

    for epoch in 0..config.epochs {
        let lambda = lambda_t(epoch, &config.schedule);
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_EPOCH + epoch as u64));
        indices.shuffle(&mut rng);

        let mut batch_losses = Vec::new();
        for chunk in indices.chunks(config.batch_size) {
            let (batches, labels) = gather_batches(&train_filled, chunk)?;
            let step = loss_and_gradients(
                &state.nets,
                &state.weights,
                &batches,
                &labels,
                config.beta,
                lambda,
                config.fusion,
                config.parallel,
            )
            .map_err(|e| diverged_if_numeric(e, epoch))?;
            if !step.loss.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: step.loss.total,
                });
            }
            state.adam.apply(
                &mut state.nets,
                &mut state.weights,
                &step,
                config.learning_rate,
            );
            batch_losses.push(step.loss);
        }
        state.epoch = epoch + 1;

        let loss = LossBreakdown::mean(&batch_losses).expect("at least one batch per epoch");
        let train_eval = evaluate(&state, &train_filled, &state.centers)
            .map_err(|e| diverged_if_numeric(e, epoch))?;
        let val_accuracy = match &val_filled {
            Some(ds) => Some(
                evaluate(&state, ds, &state.centers)
                    .map_err(|e| diverged_if_numeric(e, epoch))?
                    .accuracy,
            ),
            None => None,
        };
        records.push(EpochRecord {
            epoch,
            lambda,
            loss,
            train_accuracy: train_eval.accuracy,
            val_accuracy,
        });

        if let Some(patience) = config.patience {
            // Monitor validation accuracy when available, otherwise the
            // negated training loss (so "higher is better" throughout).
            let metric = val_accuracy.unwrap_or(-records.last().unwrap().loss.total);
            if metric > best_metric {
                best_metric = metric;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let report = FitReport {
        final_gammas: state.effective_gammas(),
        epochs: records,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        stopped_early,
    };
    Ok((state, report))
}
