//! Multi-view dataset container, JSON-lines serialization, and seeded
//! stratified splitting.
//!
//! A dataset holds N samples over V views with per-view dimensions; any view
//! slot may be absent (that's the whole point). On disk a dataset is a
//! JSON-lines file: a header object declaring `views`, `classes`, `dims` and
//! `provenance`, then one object per sample where a missing view is an
//! explicit `null`. Serialization round-trips `f64` exactly (serde_json emits
//! shortest-round-trip decimals), so `load(save(ds)) == ds` bit for bit.
//!
//! Synthetic generation, masking, and corruption live in [`synth`]
//! (re-exported here).

mod synth;

pub use synth::{apply_missing_mask, corrupt, generate_synthetic, CorruptionKind, CorruptionSpec};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write as IoWrite};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sample: an id, an optional class label, and V view slots of which at
/// least one is present. `imputed[v]` marks slots filled in by imputation
/// rather than observed.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewSample {
    pub id: u64,
    pub label: Option<usize>,
    pub views: Vec<Option<Vec<f64>>>,
    pub imputed: Vec<bool>,
}

impl MultiViewSample {
    /// A fully observed sample (no missing slots, nothing imputed).
    pub fn complete(id: u64, label: Option<usize>, views: Vec<Vec<f64>>) -> Self {
        let n = views.len();
        MultiViewSample {
            id,
            label,
            views: views.into_iter().map(Some).collect(),
            imputed: vec![false; n],
        }
    }

    /// Indices and feature vectors of the present views.
    pub fn present_views(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.views
            .iter()
            .enumerate()
            .filter_map(|(v, slot)| slot.as_deref().map(|x| (v, x)))
    }

    pub fn n_present(&self) -> usize {
        self.views.iter().filter(|s| s.is_some()).count()
    }

    pub fn n_imputed(&self) -> usize {
        self.imputed.iter().filter(|&&f| f).count()
    }
}

/// A collection of multi-view samples with shared shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MultiViewSample>,
    pub view_dims: Vec<usize>,
    pub n_classes: usize,
    /// Where the data came from: generator parameters or a source path, plus
    /// any masking/corruption applied afterwards.
    pub provenance: String,
}

impl Dataset {
    pub fn num_views(&self) -> usize {
        self.view_dims.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of view slots that are absent.
    pub fn missing_rate(&self) -> f64 {
        let total = self.len() * self.num_views();
        if total == 0 {
            return 0.0;
        }
        let missing: usize = self
            .samples
            .iter()
            .map(|s| s.views.iter().filter(|v| v.is_none()).count())
            .sum();
        missing as f64 / total as f64
    }

    /// Checks every structural invariant; [`load`](Dataset::load) output and
    /// generator output always pass.
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::FrameTooSmall {
                got: self.n_classes,
            });
        }
        if self.view_dims.is_empty() {
            return Err(Error::EmptyInput {
                context: "dataset view dimensions".into(),
            });
        }
        let v = self.num_views();
        for sample in &self.samples {
            if sample.views.len() != v {
                return Err(Error::dim(
                    format!("sample {} views", sample.id),
                    v,
                    sample.views.len(),
                ));
            }
            if sample.imputed.len() != v {
                return Err(Error::dim(
                    format!("sample {} imputed flags", sample.id),
                    v,
                    sample.imputed.len(),
                ));
            }
            if sample.n_present() == 0 {
                return Err(Error::NoPresentViews { sample: sample.id });
            }
            for (view, x) in sample.present_views() {
                if x.len() != self.view_dims[view] {
                    return Err(Error::dim(
                        format!("sample {} view {view}", sample.id),
                        self.view_dims[view],
                        x.len(),
                    ));
                }
                if x.iter().any(|f| !f.is_finite()) {
                    return Err(Error::NonFinite {
                        context: format!("sample {} view {view}", sample.id),
                    });
                }
            }
            if let Some(label) = sample.label {
                if label >= self.n_classes {
                    return Err(Error::LabelOutOfRange {
                        sample: sample.id,
                        label,
                        classes: self.n_classes,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save_writer(&mut w)
    }

    pub fn save_writer(&self, w: &mut impl IoWrite) -> Result<()> {
        let header = HeaderLine {
            views: self.num_views(),
            classes: self.n_classes,
            dims: self.view_dims.clone(),
            provenance: self.provenance.clone(),
        };
        writeln!(w, "{}", to_json(&header))?;
        for sample in &self.samples {
            let record = RecordLine {
                id: sample.id,
                label: sample.label,
                views: sample.views.clone(),
                imputed: if sample.imputed.iter().any(|&f| f) {
                    sample.imputed.clone()
                } else {
                    Vec::new()
                },
            };
            writeln!(w, "{}", to_json(&record))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        Dataset::load_reader(BufReader::new(File::open(path)?))
    }

    pub fn load_reader(r: impl Read) -> Result<Dataset> {
        let mut lines = BufReader::new(r).lines();
        let header_text = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::DatasetFormat {
                    line: 1,
                    reason: "file is empty, expected a header object".into(),
                })
            }
        };
        let header: HeaderLine =
            serde_json::from_str(&header_text).map_err(|e| Error::DatasetFormat {
                line: 1,
                reason: e.to_string(),
            })?;
        if header.dims.len() != header.views {
            return Err(Error::DatasetFormat {
                line: 1,
                reason: format!(
                    "header declares {} views but {} dimensions",
                    header.views,
                    header.dims.len()
                ),
            });
        }

        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2; // 1-based, after the header
            let text = line?;
            if text.trim().is_empty() {
                return Err(Error::DatasetFormat {
                    line: line_no,
                    reason: "blank line inside record stream".into(),
                });
            }
            let record: RecordLine =
                serde_json::from_str(&text).map_err(|e| Error::DatasetFormat {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            if record.views.len() != header.views {
                return Err(Error::DatasetFormat {
                    line: line_no,
                    reason: format!(
                        "record has {} view slots, header declares {}",
                        record.views.len(),
                        header.views
                    ),
                });
            }
            for (v, slot) in record.views.iter().enumerate() {
                if let Some(x) = slot {
                    if x.len() != header.dims[v] {
                        return Err(Error::DatasetFormat {
                            line: line_no,
                            reason: format!(
                                "view {v} has dimension {}, header declares {}",
                                x.len(),
                                header.dims[v]
                            ),
                        });
                    }
                }
            }
            if record.views.iter().all(|v| v.is_none()) {
                return Err(Error::DatasetFormat {
                    line: line_no,
                    reason: "every view slot is null".into(),
                });
            }
            if let Some(label) = record.label {
                if label >= header.classes {
                    return Err(Error::DatasetFormat {
                        line: line_no,
                        reason: format!(
                            "label {label} outside [0, {})",
                            header.classes
                        ),
                    });
                }
            }
            let imputed = if record.imputed.is_empty() {
                vec![false; header.views]
            } else if record.imputed.len() == header.views {
                record.imputed
            } else {
                return Err(Error::DatasetFormat {
                    line: line_no,
                    reason: format!(
                        "imputed flags have length {}, expected {}",
                        record.imputed.len(),
                        header.views
                    ),
                });
            };
            samples.push(MultiViewSample {
                id: record.id,
                label: record.label,
                views: record.views,
                imputed,
            });
        }

        Ok(Dataset {
            samples,
            view_dims: header.dims,
            n_classes: header.classes,
            provenance: header.provenance,
        })
    }

    /// Seeded class-stratified split into `(rest, held_out)` where the held
    /// out part gets `round(fraction · count_c)` samples of each class `c`.
    /// Sample order within each part follows the original dataset order.
    /// Requires every sample to carry a label.
    pub fn split_stratified(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter {
                name: "fraction",
                reason: format!("split fraction must lie in [0, 1], got {fraction}"),
            });
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes];
        for (i, sample) in self.samples.iter().enumerate() {
            let label = sample.label.ok_or(Error::MissingLabel { sample: sample.id })?;
            if label >= self.n_classes {
                return Err(Error::LabelOutOfRange {
                    sample: sample.id,
                    label,
                    classes: self.n_classes,
                });
            }
            by_class[label].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut held = vec![false; self.len()];
        for indices in &mut by_class {
            let take = (fraction * indices.len() as f64).round() as usize;
            indices.shuffle(&mut rng);
            for &i in indices.iter().take(take) {
                held[i] = true;
            }
        }
        let pick = |want: bool| Dataset {
            samples: self
                .samples
                .iter()
                .enumerate()
                .filter(|(i, _)| held[*i] == want)
                .map(|(_, s)| s.clone())
                .collect(),
            view_dims: self.view_dims.clone(),
            n_classes: self.n_classes,
            provenance: self.provenance.clone(),
        };
        Ok((pick(false), pick(true)))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data structs always serialize")
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    views: usize,
    classes: usize,
    dims: Vec<usize>,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    views: Vec<Option<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    imputed: Vec<bool>,
}
