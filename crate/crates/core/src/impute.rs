//! Class-center imputation of missing views.
//!
//! Training-time: a missing view of a labeled sample is replaced by its
//! class's mean feature vector for that view (computed over samples where the
//! view is present). Test-time, labels are off limits: the best-matching
//! class `c*` is chosen by summed squared distance between the sample's
//! *present* views and each class's centers, and missing views are filled
//! from class `c*`. Classes lacking a center for some present view are
//! skipped during scoring; ties go to the smallest class index.
//!
//! Center cells can be undefined (a class never observed in a view). By
//! default imputation fails loudly on such cells; [`MissingCenterPolicy`]
//! optionally falls back to the view's global mean.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MultiViewSample};
use crate::error::{Error, Result};
use crate::par::maybe_par_map;

/// What to do when imputation needs a center that was never observed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingCenterPolicy {
    /// Error, naming the (class, view) cell.
    #[default]
    Strict,
    /// Substitute the view's mean over all present slots, regardless of class.
    GlobalMeanFallback,
}

/// Per-(class, view) mean feature vectors plus contribution counts, and the
/// per-view global means used by the fallback policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCenters {
    /// `centers[c][v]` is defined iff `counts[c][v] > 0`.
    centers: Vec<Vec<Option<Vec<f64>>>>,
    counts: Vec<Vec<usize>>,
    /// `global[v]` is the mean over every present slot of view `v` (labels
    /// ignored); `None` when the view is observed nowhere.
    global: Vec<Option<Vec<f64>>>,
    view_dims: Vec<usize>,
    n_classes: usize,
}

impl ClassCenters {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn num_views(&self) -> usize {
        self.view_dims.len()
    }

    /// Center of class `c` in view `v`, if any sample contributed to it.
    pub fn center(&self, class: usize, view: usize) -> Option<&[f64]> {
        self.centers[class][view].as_deref()
    }

    pub fn count(&self, class: usize, view: usize) -> usize {
        self.counts[class][view]
    }

    pub fn global_mean(&self, view: usize) -> Option<&[f64]> {
        self.global[view].as_deref()
    }

    /// Center under the given policy; the strict policy errors on undefined
    /// cells, the fallback substitutes the global view mean.
    fn resolve(&self, class: usize, view: usize, policy: MissingCenterPolicy) -> Result<&[f64]> {
        if let Some(center) = self.center(class, view) {
            return Ok(center);
        }
        match policy {
            MissingCenterPolicy::Strict => Err(Error::MissingCenter { class, view }),
            MissingCenterPolicy::GlobalMeanFallback => self
                .global_mean(view)
                .ok_or(Error::MissingCenter { class, view }),
        }
    }
}

/// Computes per-class per-view mean vectors over the present slots of
/// labeled samples. Unlabeled samples contribute only to the global means.
pub fn compute_class_centers(ds: &Dataset) -> Result<ClassCenters> {
    if ds.is_empty() {
        return Err(Error::EmptyInput {
            context: "class centers".into(),
        });
    }
    let (v, c) = (ds.num_views(), ds.n_classes);
    let mut sums = vec![vec![Vec::<f64>::new(); v]; c];
    let mut counts = vec![vec![0usize; v]; c];
    let mut global_sums: Vec<Vec<f64>> = ds.view_dims.iter().map(|&d| vec![0.0; d]).collect();
    let mut global_counts = vec![0usize; v];

    for sample in &ds.samples {
        if let Some(label) = sample.label {
            if label >= c {
                return Err(Error::LabelOutOfRange {
                    sample: sample.id,
                    label,
                    classes: c,
                });
            }
        }
        for (view, x) in sample.present_views() {
            if x.len() != ds.view_dims[view] {
                return Err(Error::dim(
                    format!("sample {} view {view}", sample.id),
                    ds.view_dims[view],
                    x.len(),
                ));
            }
            global_counts[view] += 1;
            for (acc, &value) in global_sums[view].iter_mut().zip(x) {
                *acc += value;
            }
            if let Some(label) = sample.label {
                let cell = &mut sums[label][view];
                if cell.is_empty() {
                    cell.resize(x.len(), 0.0);
                }
                counts[label][view] += 1;
                for (acc, &value) in cell.iter_mut().zip(x) {
                    *acc += value;
                }
            }
        }
    }

    let centers = sums
        .into_iter()
        .enumerate()
        .map(|(class, row)| {
            row.into_iter()
                .enumerate()
                .map(|(view, sum)| {
                    let count = counts[class][view];
                    (count > 0).then(|| sum.iter().map(|s| s / count as f64).collect())
                })
                .collect()
        })
        .collect();
    let global = global_sums
        .into_iter()
        .enumerate()
        .map(|(view, sum)| {
            (global_counts[view] > 0)
                .then(|| sum.iter().map(|s| s / global_counts[view] as f64).collect())
        })
        .collect();

    Ok(ClassCenters {
        centers,
        counts,
        global,
        view_dims: ds.view_dims.clone(),
        n_classes: c,
    })
}

/// Fills a labeled sample's missing views with its own class's centers.
/// Present views are untouched; filled slots are flagged as imputed.
pub fn impute_train(
    sample: &MultiViewSample,
    centers: &ClassCenters,
    policy: MissingCenterPolicy,
) -> Result<MultiViewSample> {
    let label = sample.label.ok_or(Error::MissingLabel { sample: sample.id })?;
    if label >= centers.n_classes() {
        return Err(Error::LabelOutOfRange {
            sample: sample.id,
            label,
            classes: centers.n_classes(),
        });
    }
    let mut out = sample.clone();
    for view in 0..centers.num_views() {
        if out.views[view].is_none() {
            out.views[view] = Some(centers.resolve(label, view, policy)?.to_vec());
            out.imputed[view] = true;
        }
    }
    Ok(out)
}

/// Scores classes by summed squared distance between the sample's present
/// views and the class centers. Classes missing a center for any present
/// view are skipped. Returns the winning class (smallest index on ties).
/// Labels are never read.
pub fn nearest_center_class(
    sample: &MultiViewSample,
    centers: &ClassCenters,
    policy: MissingCenterPolicy,
) -> Result<usize> {
    if sample.n_present() == 0 {
        return Err(Error::NoPresentViews { sample: sample.id });
    }
    let mut best: Option<(usize, f64)> = None;
    'class: for c in 0..centers.n_classes() {
        let mut dist = 0.0;
        for (view, x) in sample.present_views() {
            let center = match centers.resolve(c, view, policy) {
                Ok(center) => center,
                // Unscorable under the current policy: skip the class.
                Err(_) => continue 'class,
            };
            dist += x
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let better = match best {
            None => true,
            Some((_, best_dist)) => dist < best_dist, // strict: ties keep the smaller index
        };
        if better {
            best = Some((c, dist));
        }
    }
    best.map(|(c, _)| c)
        .ok_or(Error::NoScorableClass { sample: sample.id })
}

/// Fills a sample's missing views with the centers of the nearest class per
/// [`nearest_center_class`]. The label field is passed through untouched but
/// never consulted.
pub fn impute_test(
    sample: &MultiViewSample,
    centers: &ClassCenters,
    policy: MissingCenterPolicy,
) -> Result<MultiViewSample> {
    if sample.n_present() == centers.num_views() {
        return Ok(sample.clone());
    }
    let class = nearest_center_class(sample, centers, policy)?;
    let mut out = sample.clone();
    for view in 0..centers.num_views() {
        if out.views[view].is_none() {
            out.views[view] = Some(centers.resolve(class, view, policy)?.to_vec());
            out.imputed[view] = true;
        }
    }
    Ok(out)
}

/// [`impute_train`] over a whole dataset (optionally parallel per sample).
pub fn impute_train_dataset(
    ds: &Dataset,
    centers: &ClassCenters,
    policy: MissingCenterPolicy,
    parallel: bool,
) -> Result<Dataset> {
    let samples = maybe_par_map(&ds.samples, parallel, |s| impute_train(s, centers, policy))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        ..ds.clone()
    })
}

/// [`impute_test`] over a whole dataset (optionally parallel per sample).
pub fn impute_test_dataset(
    ds: &Dataset,
    centers: &ClassCenters,
    policy: MissingCenterPolicy,
    parallel: bool,
) -> Result<Dataset> {
    let samples = maybe_par_map(&ds.samples, parallel, |s| impute_test(s, centers, policy))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        ..ds.clone()
    })
}
