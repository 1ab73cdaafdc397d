//! Synthetic multi-view data: generation, missing-view masking, and
//! adversarial corruption.
//!
//! Generation draws one Gaussian class center per (view, class) and scatters
//! unit-variance samples around it; `separation` scales the centers, so it
//! directly controls how far apart classes sit relative to the noise.
//! Masking removes an exact quota of view slots uniformly at random while
//! guaranteeing every sample keeps at least one view. Corruption overwrites
//! targeted views with zeros, ones, scaled Gaussian noise, or donor vectors
//! from the next class. All three are pure, seeded transformations: the same
//! seed always produces the same bytes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, MultiViewSample};
use crate::error::{Error, Result};

/// What to write over a corrupted view slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    /// Replace with the all-zeros vector.
    Zeros,
    /// Replace with the all-ones vector.
    Ones,
    /// Replace with zero-mean Gaussian noise scaled per feature to the clean
    /// view's standard deviation (times `noise_scale`).
    GaussianNoise,
    /// Replace with the same view of a random donor sample from class
    /// `(c + 1) mod C`.
    Misaligned,
}

impl std::str::FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(CorruptionKind::Zeros),
            "ones" => Ok(CorruptionKind::Ones),
            "gaussian" | "gaussian-noise" => Ok(CorruptionKind::GaussianNoise),
            "misaligned" => Ok(CorruptionKind::Misaligned),
            other => Err(Error::InvalidParameter {
                name: "corruption kind",
                reason: format!(
                    "unknown kind {other:?}, expected zeros | ones | gaussian-noise | misaligned"
                ),
            }),
        }
    }
}

impl std::fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CorruptionKind::Zeros => "zeros",
            CorruptionKind::Ones => "ones",
            CorruptionKind::GaussianNoise => "gaussian-noise",
            CorruptionKind::Misaligned => "misaligned",
        };
        f.write_str(name)
    }
}

/// Which views to corrupt, how, and for what fraction of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub target_views: Vec<usize>,
    /// Fraction of samples affected, in [0, 1]. The affected set is drawn
    /// uniformly at random; 1.0 hits every sample.
    pub fraction: f64,
    /// Multiplier on the per-feature standard deviation for
    /// [`CorruptionKind::GaussianNoise`]; ignored by the other kinds.
    pub noise_scale: f64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, target_views: Vec<usize>) -> Self {
        CorruptionSpec {
            kind,
            target_views,
            fraction: 1.0,
            noise_scale: 1.0,
        }
    }

    /// Checks this corruption spec against a concrete view count.
    pub fn validate(&self, n_views: usize) -> Result<()> {
        if self.target_views.is_empty() {
            return Err(Error::EmptyInput {
                context: "corruption target views".into(),
            });
        }
        for &v in &self.target_views {
            if v >= n_views {
                return Err(Error::InvalidParameter {
                    name: "target_views",
                    reason: format!("view {v} out of range for {n_views} views"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::InvalidParameter {
                name: "fraction",
                reason: format!("fraction must lie in [0, 1], got {}", self.fraction),
            });
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                reason: format!("scale must be positive and finite, got {}", self.noise_scale),
            });
        }
        Ok(())
    }
}

/// Generates a balanced labeled dataset of `n_samples` over `n_views` views.
///
/// Class centers are drawn per (view, class) as `separation · N(0, I)`; each
/// sample is its class center plus unit Gaussian noise. Labels are assigned
/// round-robin, so class counts differ by at most one.
pub fn generate_synthetic(
    n_views: usize,
    n_classes: usize,
    dims: &[usize],
    n_samples: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_views < 2 {
        return Err(Error::InvalidParameter {
            name: "n_views",
            reason: format!("need at least 2 views, got {n_views}"),
        });
    }
    if n_classes < 2 {
        return Err(Error::FrameTooSmall { got: n_classes });
    }
    if n_samples < n_classes {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            reason: format!("need at least one sample per class ({n_classes}), got {n_samples}"),
        });
    }
    if dims.len() != n_views {
        return Err(Error::dim("view dimensions", n_views, dims.len()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter {
            name: "dims",
            reason: "every view needs at least one feature".into(),
        });
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "separation",
            reason: format!("separation must be finite and non-negative, got {separation}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<Vec<f64>>> = (0..n_views)
        .map(|v| {
            (0..n_classes)
                .map(|_| {
                    (0..dims[v])
                        .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        })
        .collect();

    let samples = (0..n_samples)
        .map(|i| {
            let label = i % n_classes;
            let views = (0..n_views)
                .map(|v| {
                    centers[v][label]
                        .iter()
                        .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            MultiViewSample::complete(i as u64, Some(label), views)
        })
        .collect();

    Ok(Dataset {
        samples,
        view_dims: dims.to_vec(),
        n_classes,
        provenance: format!(
            "synthetic(seed={seed}, views={n_views}, classes={n_classes}, n={n_samples}, separation={separation})"
        ),
    })
}

/// Removes exactly `⌊η · V · N⌋` view slots uniformly at random, never
/// leaving a sample without views. `η` may range up to `(V − 1)/V`, the point
/// where every sample keeps exactly one view.
pub fn apply_missing_mask(ds: &Dataset, eta: f64, seed: u64) -> Result<Dataset> {
    let v = ds.num_views();
    let n = ds.len();
    let max_eta = (v as f64 - 1.0) / v as f64;
    if !(eta.is_finite() && (0.0..=max_eta + 1e-12).contains(&eta)) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("missing rate must lie in [0, {max_eta}], got {eta}"),
        });
    }
    let total_slots = v * n;
    // The epsilon guards against products like 0.3 · 300 landing one ulp
    // below the integer they represent exactly.
    let quota = ((eta * total_slots as f64) + 1e-9).floor() as usize;

    let mut out = ds.clone();
    if quota == 0 {
        return Ok(out);
    }

    let mut slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..v).map(move |view| (i, view)))
        .filter(|&(i, view)| ds.samples[i].views[view].is_some())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);

    let mut present: Vec<usize> = ds.samples.iter().map(|s| s.n_present()).collect();
    let mut removed = 0;
    for (i, view) in slots {
        if removed == quota {
            break;
        }
        // Skipping slots whose sample is down to one view cannot strand the
        // quota: any sample that still has two or more present views at the
        // end of the pass would have had them removed when visited.
        if present[i] > 1 {
            out.samples[i].views[view] = None;
            present[i] -= 1;
            removed += 1;
        }
    }
    if removed < quota {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!(
                "quota of {quota} removals unreachable: only {removed} slots could be removed"
            ),
        });
    }
    out.provenance = format!("{}; masked(eta={eta}, seed={seed})", ds.provenance);
    Ok(out)
}

/// Overwrites targeted views of an affected sample subset according to
/// `spec`. Only present slots change; labels, ids, and missing masks are
/// untouched. Statistics (noise scale, misalignment donors) always come from
/// the *input* dataset, so corrupting several views is order-independent.
pub fn corrupt(ds: &Dataset, spec: &CorruptionSpec, seed: u64) -> Result<Dataset> {
    spec.validate(ds.num_views())?;
    let n = ds.len();
    let n_affected = ((spec.fraction * n as f64) + 1e-9).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut affected = vec![false; n];
    for &i in order.iter().take(n_affected) {
        affected[i] = true;
    }

    // Per-feature standard deviation of each targeted view, over the clean
    // input's present slots (population variance).
    let mut view_stds: Vec<Option<Vec<f64>>> = vec![None; ds.num_views()];
    if spec.kind == CorruptionKind::GaussianNoise {
        for &view in &spec.target_views {
            let d = ds.view_dims[view];
            let mut count = 0.0;
            let mut mean = vec![0.0; d];
            let mut m2 = vec![0.0; d];
            for sample in &ds.samples {
                if let Some(x) = &sample.views[view] {
                    count += 1.0;
                    for (f, &value) in x.iter().enumerate() {
                        let delta = value - mean[f];
                        mean[f] += delta / count;
                        m2[f] += delta * (value - mean[f]);
                    }
                }
            }
            if count == 0.0 {
                return Err(Error::EmptyInput {
                    context: format!("view {view} has no present slots to estimate noise scale"),
                });
            }
            view_stds[view] = Some(m2.iter().map(|s| (s / count).sqrt()).collect());
        }
    }

    // Donor pools per (class, view) from the clean input.
    let mut donors: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); ds.num_views()]; ds.n_classes];
    if spec.kind == CorruptionKind::Misaligned {
        for (i, sample) in ds.samples.iter().enumerate() {
            if let Some(label) = sample.label {
                for (view, _) in sample.present_views() {
                    donors[label][view].push(i);
                }
            }
        }
    }

    let mut out = ds.clone();
    for i in 0..n {
        if !affected[i] {
            continue;
        }
        for &view in &spec.target_views {
            if ds.samples[i].views[view].is_none() {
                continue;
            }
            let d = ds.view_dims[view];
            let replacement = match spec.kind {
                CorruptionKind::Zeros => vec![0.0; d],
                CorruptionKind::Ones => vec![1.0; d],
                CorruptionKind::GaussianNoise => {
                    let stds = view_stds[view].as_ref().expect("computed above");
                    stds.iter()
                        .map(|s| spec.noise_scale * s * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                }
                CorruptionKind::Misaligned => {
                    let label = ds.samples[i]
                        .label
                        .ok_or(Error::MissingLabel {
                            sample: ds.samples[i].id,
                        })?;
                    let donor_class = (label + 1) % ds.n_classes;
                    let pool = &donors[donor_class][view];
                    if pool.is_empty() {
                        return Err(Error::EmptyInput {
                            context: format!(
                                "no donor with view {view} present in class {donor_class}"
                            ),
                        });
                    }
                    let donor = pool[rng.gen_range(0..pool.len())];
                    ds.samples[donor].views[view].clone().expect("donor present")
                }
            };
            out.samples[i].views[view] = Some(replacement);
        }
    }
    out.provenance = format!(
        "{}; corrupted(kind={}, views={:?}, fraction={}, seed={seed})",
        ds.provenance, spec.kind, spec.target_views, spec.fraction
    );
    Ok(out)
}
