//! The subcommand handlers.
//!
//! Shared discipline: every input is loaded and validated before anything is
//! written, and all seeds/cells must succeed before the first report byte
//! reaches disk — a failing invocation never leaves a partial run directory.
//! Wall-clock timing goes to stderr only, so stdout and every written file
//! are byte-identical across reruns of the same configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use edpmvc_core::data::{
    apply_missing_mask, corrupt, generate_synthetic, CorruptionSpec, Dataset,
};
use edpmvc_core::error::Error as CoreError;
use edpmvc_core::impute::MissingCenterPolicy;
use edpmvc_core::loss::Schedule;
use edpmvc_core::par::maybe_par_map;
use edpmvc_core::train::{
    derive_seed, evaluate, fit, Evaluation, FitReport, FusionMode, TrainConfig, TrainState,
};

use crate::args::{EvalArgs, GenerateArgs, GeneratorArgs, SweepArgs, TrainArgs, TrainKnobs};
use crate::artifacts::{self, DatasetShape, TrainManifest};
use crate::corruption::parse_corruption_spec;
use crate::metrics::{mean_std, render_metrics_csv, SeedOutcome};
use crate::{default_seed, parse_list, parse_seed_list, CliError};

/// Tags for deriving independent stage seeds from one invocation seed.
/// Chosen disjoint from the trainer's internal tags, so a dataset built here
/// never shares a stream with the shuffles/initializers inside `fit`.
const TAG_DATA: u64 = 0xA5A5_0001;
const TAG_CORRUPT: u64 = 0xA5A5_0002;
const TAG_MASK: u64 = 0xA5A5_0003;
const TAG_TEST_SPLIT: u64 = 0xA5A5_0004;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(err: anyhow::Error) -> CliError {
    CliError::Runtime(err)
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path)
        .map_err(anyhow::Error::from)
        .map_err(|e| runtime(e.context(format!("loading dataset {}", path.display()))))
}

/// Generator flags with lists parsed and the corruption spec validated.
#[derive(Debug, Clone)]
pub struct ResolvedGenerator {
    pub views: usize,
    pub classes: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    pub corruption: Option<CorruptionSpec>,
}

pub fn resolve_generator(g: &GeneratorArgs) -> Result<ResolvedGenerator, CliError> {
    let dims = match &g.dims {
        Some(raw) => {
            let dims: Vec<usize> = parse_list(raw, "--dims")?;
            if dims.len() != g.views {
                return Err(usage(format!(
                    "--dims lists {} dimensions but --views is {}",
                    dims.len(),
                    g.views
                )));
            }
            dims
        }
        None => vec![g.dim; g.views],
    };
    let corruption = match &g.corrupt {
        Some(raw) => {
            let spec = parse_corruption_spec(raw)?;
            spec.validate(g.views)
                .map_err(|e| usage(format!("--corrupt: {e}")))?;
            Some(spec)
        }
        None => None,
    };
    Ok(ResolvedGenerator {
        views: g.views,
        classes: g.classes,
        n: g.n,
        dims,
        separation: g.separation,
        corruption,
    })
}

fn check_eta(eta: f64, views: usize) -> Result<(), CliError> {
    let max_eta = (views as f64 - 1.0) / views as f64;
    if !(eta.is_finite() && (0.0..=max_eta + 1e-12).contains(&eta)) {
        return Err(usage(format!(
            "eta {eta} out of range: must lie in [0, {max_eta:.4}] for {views} views \
             so every sample keeps at least one view"
        )));
    }
    Ok(())
}

/// Generate → corrupt → mask, each stage on its own derived seed so adding
/// or removing one stage never shifts the randomness of the others.
pub fn build_dataset(
    gen: &ResolvedGenerator,
    eta: f64,
    seed: u64,
) -> Result<Dataset, CoreError> {
    let mut ds = generate_synthetic(
        gen.views,
        gen.classes,
        &gen.dims,
        gen.n,
        gen.separation,
        derive_seed(seed, TAG_DATA),
    )?;
    if let Some(spec) = &gen.corruption {
        ds = corrupt(&ds, spec, derive_seed(seed, TAG_CORRUPT))?;
    }
    if eta > 0.0 {
        ds = apply_missing_mask(&ds, eta, derive_seed(seed, TAG_MASK))?;
    }
    Ok(ds)
}

/// Resolves shared training flags into a template config with `seed: 0`;
/// callers stamp the per-seed value.
pub fn knobs_to_config(knobs: &TrainKnobs) -> Result<TrainConfig, CliError> {
    let fusion: FusionMode = knobs
        .fusion
        .parse()
        .map_err(|e| usage(format!("--fusion: {e}")))?;
    let hidden: Vec<usize> = parse_list(&knobs.hidden, "--hidden")?;
    let annealing = knobs
        .annealing_epochs
        .unwrap_or((knobs.epochs as f64 / 2.0).max(1.0));
    let schedule = Schedule::new(annealing, knobs.lambda_cap)
        .map_err(|e| usage(format!("--annealing-epochs / --lambda-cap: {e}")))?;
    let config = TrainConfig {
        epochs: knobs.epochs,
        batch_size: knobs.batch_size,
        learning_rate: knobs.learning_rate,
        hidden_dims: hidden,
        beta: knobs.beta,
        schedule,
        fusion,
        seed: 0,
        val_fraction: knobs.val_fraction,
        patience: knobs.patience,
        center_policy: if knobs.fallback_global_mean {
            MissingCenterPolicy::GlobalMeanFallback
        } else {
            MissingCenterPolicy::Strict
        },
        parallel: !knobs.sequential,
    };
    config.validate().map_err(|e| usage(format!("{e}")))?;
    Ok(config)
}

/// `generate` writes its manifest next to the dataset it describes.
pub fn generate_manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Provenance block written next to a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateManifest {
    pub command: String,
    pub seed: u64,
    pub views: usize,
    pub classes: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionSpec>,
    /// The `--eta` flag as given.
    pub eta_requested: f64,
    /// The exact realized missing rate `⌊η·V·N⌋ / (V·N)`.
    pub eta_realized: f64,
    pub out: String,
}

pub fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let gen = resolve_generator(&args.generator)?;
    check_eta(args.eta, gen.views)?;

    let ds = build_dataset(&gen, args.eta, seed)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    ds.save(&args.out)?;
    let manifest = GenerateManifest {
        command: "generate".into(),
        seed,
        views: gen.views,
        classes: gen.classes,
        n: gen.n,
        dims: gen.dims.clone(),
        separation: gen.separation,
        corruption: gen.corruption.clone(),
        eta_requested: args.eta,
        eta_realized: ds.missing_rate(),
        out: args.out.display().to_string(),
    };
    artifacts::write_json(&generate_manifest_path(&args.out), &manifest)?;
    println!(
        "wrote {} samples ({} views, {} classes, missing rate {}) to {}",
        ds.len(),
        ds.num_views(),
        ds.n_classes,
        ds.missing_rate(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let seeds = parse_seed_list(args.seeds.as_deref(), default_seed()?)?;
    let base = knobs_to_config(&args.knobs)?;

    let data = load_dataset(&args.data)?;
    let test = match &args.test_data {
        Some(path) => {
            let t = load_dataset(path)?;
            if t.view_dims != data.view_dims || t.n_classes != data.n_classes {
                return Err(runtime(anyhow!(
                    "test data shape mismatch: train has dims {:?} with {} classes, \
                     test has {:?} with {}",
                    data.view_dims,
                    data.n_classes,
                    t.view_dims,
                    t.n_classes
                )));
            }
            Some(t)
        }
        None => None,
    };

    let started = Instant::now();
    let results: Vec<Result<(TrainState, FitReport, Evaluation), CoreError>> =
        maybe_par_map(&seeds, base.parallel, |&seed| {
            let config = TrainConfig {
                seed,
                ..base.clone()
            };
            let (state, report) = fit(&data, &config)?;
            let eval = evaluate(&state, test.as_ref().unwrap_or(&data), &state.centers)?;
            Ok((state, report, eval))
        });
    let mut trained = Vec::with_capacity(results.len());
    for (seed, res) in seeds.iter().zip(results) {
        trained.push(res.map_err(|e| {
            runtime(anyhow::Error::from(e).context(format!("training seed {seed}")))
        })?);
    }
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut outcomes = Vec::with_capacity(trained.len());
    for (state, report, eval) in &trained {
        artifacts::write_seed_artifacts(&args.out, state, report)?;
        outcomes.push(SeedOutcome {
            seed: state.config.seed,
            accuracy: eval.accuracy,
            mean_uncertainty: eval.mean_uncertainty,
            gammas: state.effective_gammas(),
        });
    }
    let csv = render_metrics_csv(base.fusion, &outcomes);
    let csv_path = args.out.join("metrics.csv");
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let manifest = TrainManifest {
        command: "train".into(),
        data: args.data.display().to_string(),
        test_data: args.test_data.as_ref().map(|p| p.display().to_string()),
        seeds: seeds.clone(),
        config: base.clone(),
        dataset: DatasetShape::of(&data),
    };
    artifacts::write_json(&args.out.join("manifest.json"), &manifest)?;

    let accs: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (acc_mean, acc_std) = mean_std(&accs);
    println!(
        "{} seed(s), {} fusion: accuracy {:.4} ± {:.4} -> {}",
        outcomes.len(),
        base.fusion,
        acc_mean,
        acc_std,
        args.out.display()
    );
    eprintln!("trained {} seed(s) in {elapsed:.1}s", outcomes.len());
    Ok(())
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let manifest_path = args.run.join("manifest.json");
    let manifest: TrainManifest = artifacts::read_json(&manifest_path)?;
    let seeds = match args.seeds.as_deref() {
        Some(raw) => {
            let requested: Vec<u64> = parse_list(raw, "--seeds")?;
            if requested.is_empty() {
                return Err(usage("--seeds: empty list"));
            }
            for s in &requested {
                if !manifest.seeds.contains(s) {
                    return Err(usage(format!(
                        "--seeds: seed {s} is not part of this run (trained: {:?})",
                        manifest.seeds
                    )));
                }
            }
            requested
        }
        None => manifest.seeds.clone(),
    };

    let data = load_dataset(&args.data)?;
    if data.view_dims != manifest.dataset.view_dims || data.n_classes != manifest.dataset.n_classes
    {
        return Err(runtime(anyhow!(
            "dataset shape mismatch: run was trained on dims {:?} with {} classes, \
             {} has {:?} with {}",
            manifest.dataset.view_dims,
            manifest.dataset.n_classes,
            args.data.display(),
            data.view_dims,
            data.n_classes
        )));
    }
    let states = seeds
        .iter()
        .map(|&s| artifacts::load_seed_artifacts(&args.run, s))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let evals = maybe_par_map(&states, manifest.config.parallel, |state| {
        evaluate(state, &data, &state.centers)
    });
    let mut outcomes = Vec::with_capacity(states.len());
    for (state, res) in states.iter().zip(evals) {
        let eval = res.map_err(|e| {
            runtime(
                anyhow::Error::from(e)
                    .context(format!("evaluating seed {}", state.config.seed)),
            )
        })?;
        outcomes.push(SeedOutcome {
            seed: state.config.seed,
            accuracy: eval.accuracy,
            mean_uncertainty: eval.mean_uncertainty,
            gammas: state.effective_gammas(),
        });
    }
    let csv = render_metrics_csv(manifest.config.fusion, &outcomes);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Provenance block for a sweep: grids, seeds, generator, and the shared
/// training config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub command: String,
    pub views: usize,
    pub classes: usize,
    pub n: usize,
    pub dims: Vec<usize>,
    pub separation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionSpec>,
    pub eta_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub config: TrainConfig,
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let seeds = parse_seed_list(args.seeds.as_deref(), default_seed()?)?;
    let gen = resolve_generator(&args.generator)?;
    let base = knobs_to_config(&args.knobs)?;
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(usage(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }

    let etas: Vec<f64> = parse_list(&args.eta_grid, "--eta-grid")?;
    if etas.is_empty() {
        return Err(usage("--eta-grid: empty grid"));
    }
    for &eta in &etas {
        check_eta(eta, gen.views)?;
    }
    let ps: Vec<f64> = match &args.p_grid {
        Some(raw) => {
            let ps = parse_list(raw, "--p-grid")?;
            if ps.is_empty() {
                return Err(usage("--p-grid: empty grid"));
            }
            ps
        }
        None => vec![base.schedule.annealing_epochs],
    };
    let qs: Vec<f64> = match &args.q_grid {
        Some(raw) => {
            let qs = parse_list(raw, "--q-grid")?;
            if qs.is_empty() {
                return Err(usage("--q-grid: empty grid"));
            }
            qs
        }
        None => vec![base.schedule.cap],
    };

    // Cartesian cell list, eta-major so rows group by missing rate.
    let mut cells: Vec<(f64, Schedule)> = Vec::with_capacity(etas.len() * ps.len() * qs.len());
    for &eta in &etas {
        for &p in &ps {
            for &q in &qs {
                let schedule = Schedule::new(p, q)
                    .map_err(|e| usage(format!("--p-grid / --q-grid: {e}")))?;
                cells.push((eta, schedule));
            }
        }
    }
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| seeds.iter().map(move |&s| (ci, s)))
        .collect();

    let started = Instant::now();
    let results = maybe_par_map(&jobs, base.parallel, |&(ci, seed)| {
        let (eta, schedule) = &cells[ci];
        let ds = build_dataset(&gen, *eta, seed)?;
        let (train_ds, test_ds) =
            ds.split_stratified(args.test_fraction, derive_seed(seed, TAG_TEST_SPLIT))?;
        let config = TrainConfig {
            schedule: schedule.clone(),
            seed,
            ..base.clone()
        };
        let (state, _report) = fit(&train_ds, &config)?;
        let eval = evaluate(&state, &test_ds, &state.centers)?;
        Ok::<(f64, f64), CoreError>((eval.accuracy, eval.mean_uncertainty))
    });
    let mut flat = Vec::with_capacity(results.len());
    for (&(ci, seed), res) in jobs.iter().zip(results) {
        let (eta, schedule) = &cells[ci];
        flat.push(res.map_err(|e| {
            runtime(anyhow::Error::from(e).context(format!(
                "sweep cell eta={eta} p={} q={} seed={seed}",
                schedule.annealing_epochs, schedule.cap
            )))
        })?);
    }
    let elapsed = started.elapsed().as_secs_f64();

    let seed_list = seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let mut csv = String::from("eta,p,q,fusion,seeds,accuracy_mean,accuracy_std,uncertainty_mean\n");
    for (ci, (eta, schedule)) in cells.iter().enumerate() {
        let cell_rows = &flat[ci * seeds.len()..(ci + 1) * seeds.len()];
        let accs: Vec<f64> = cell_rows.iter().map(|r| r.0).collect();
        let uncs: Vec<f64> = cell_rows.iter().map(|r| r.1).collect();
        let (acc_mean, acc_std) = mean_std(&accs);
        let (unc_mean, _) = mean_std(&uncs);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            eta,
            schedule.annealing_epochs,
            schedule.cap,
            base.fusion,
            seed_list,
            acc_mean,
            acc_std,
            unc_mean
        ));
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("sweep.csv");
    fs::write(&csv_path, &csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let manifest = SweepManifest {
        command: "sweep".into(),
        views: gen.views,
        classes: gen.classes,
        n: gen.n,
        dims: gen.dims.clone(),
        separation: gen.separation,
        corruption: gen.corruption.clone(),
        eta_grid: etas,
        p_grid: ps,
        q_grid: qs,
        seeds: seeds.clone(),
        test_fraction: args.test_fraction,
        config: base.clone(),
    };
    artifacts::write_json(&args.out.join("manifest.json"), &manifest)?;

    print!("{csv}");
    eprintln!(
        "swept {} cells x {} seeds in {elapsed:.1}s -> {}",
        cells.len(),
        seeds.len(),
        args.out.display()
    );
    Ok(())
}
