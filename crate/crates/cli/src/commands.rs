use std::fs::File;
use std::path::{Path, PathBuf};

use heatcast_core::io::{format_timestamp, parse_timestamp, read_dataset, write_dataset_csv, write_site};
use heatcast_core::sim::simulate_detailed;
use heatcast_core::{AlmanacSolar, BuildingDataset, SimConfig, WINDOW_LEN};
use heatcast_dl::{Checkpoint, ModelKind, NeuralModel};
use heatcast_eval::report::{write_drift, write_rmse, write_scores, write_sweep, write_uq};
use heatcast_eval::{
    is_valid_instant, predict_instants, prior_sweep, uncertainty_error_bins, EvalError, Forecaster, ModelReport,
    Predictions, PreparedBuilding,
};
use heatcast_graybox::{fit_variational, GrayboxPosterior};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DatasetRef, ExperimentConfig, ModelChoice};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

/// A trained model of either family.
pub enum Trained {
    Graybox(GrayboxPosterior),
    Neural(NeuralModel),
}

impl Trained {
    fn forecaster(&self) -> Forecaster<'_> {
        match self {
            Trained::Graybox(p) => Forecaster::Graybox(p),
            Trained::Neural(m) => Forecaster::Neural(m),
        }
    }

    fn choice(&self) -> ModelChoice {
        match self {
            Trained::Graybox(_) => ModelChoice::Graybox,
            Trained::Neural(m) => match m.kind() {
                ModelKind::LstmMlp => ModelChoice::LstmMlp,
                ModelKind::LstmBnn => ModelChoice::LstmBnn,
            },
        }
    }

    /// Either checkpoint format; neural checkpoints carry a format version.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::Config(format!("checkpoint {} does not exist", path.display())));
        }
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a checkpoint: {e}", path.display())))?;
        if value.get("format_version").is_some() {
            Ok(Trained::Neural(Checkpoint::from_json(&text)?.model))
        } else {
            let p = GrayboxPosterior::from_json(&text)
                .map_err(|e| CliError::Data(format!("{}: not a checkpoint: {e}", path.display())))?;
            Ok(Trained::Graybox(p))
        }
    }
}

fn command_dir(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    let dir = cfg.output_dir.join(name);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_dataset(d: &DatasetRef, manifest: &mut Manifest) -> Result<BuildingDataset> {
    for p in [&d.csv, &d.site] {
        if !p.is_file() {
            return Err(CliError::Config(format!("dataset file {} does not exist", p.display())));
        }
    }
    manifest.input(&d.csv)?;
    manifest.input(&d.site)?;
    Ok(read_dataset(&d.csv, &d.site)?)
}

fn prepare(cfg: &ExperimentConfig, ds: BuildingDataset, name: &str) -> Result<PreparedBuilding> {
    cfg.eval.protocol.prepare(ds, &AlmanacSolar).map_err(|e| match e {
        EvalError::InsufficientData(m) => CliError::Data(format!("{name}: {m}")),
        other => other.into(),
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = command_dir(cfg, "simulate")?;
    let mut manifest = Manifest::new("simulate", cfg, &dir);
    let s = &cfg.simulate;
    for i in 0..s.buildings {
        let sim_cfg = SimConfig { seed: cfg.seed.wrapping_add(i as u64), ..s.sim.clone() };
        let sim = simulate_detailed(&sim_cfg, &s.site, s.hours)?;
        let stem = format!("building_{i}");
        write_dataset_csv(&dir.join(format!("{stem}.csv")), &sim.dataset)?;
        write_site(&dir.join(format!("{stem}.site.json")), &s.site)?;
        let mut truth = serde_json::to_string_pretty(&sim.truth)?;
        truth.push('\n');
        std::fs::write(dir.join(format!("{stem}.truth.json")), truth)?;
        for ext in ["csv", "site.json", "truth.json"] {
            manifest.output(&format!("{stem}.{ext}"))?;
        }
    }
    manifest.write()
}

/// Fit one model on the pre-test part of a building; returns the model and
/// its loss trace as CSV rows.
fn fit(cfg: &ExperimentConfig, model: ModelChoice, prep: &PreparedBuilding) -> Result<(Trained, Vec<[String; 3]>)> {
    match model.neural() {
        None => {
            let g = &cfg.graybox;
            let post = fit_variational(&prep.fit, &g.priors, g.max_iters, g.tol)?;
            let trace =
                post.elbo_trace.iter().enumerate().map(|(i, e)| [(i + 1).to_string(), e.to_string(), String::new()]);
            let trace = trace.collect();
            Ok((Trained::Graybox(post), trace))
        }
        Some(kind) => {
            let out = heatcast_dl::train(kind, &prep.train, &prep.val, cfg.train.get(kind))?;
            let trace = out
                .train_loss
                .iter()
                .zip(&out.val_loss)
                .enumerate()
                .map(|(i, (t, v))| [(i + 1).to_string(), t.to_string(), v.to_string()])
                .collect();
            Ok((Trained::Neural(out.model), trace))
        }
    }
}

pub fn train(cfg: &ExperimentConfig, model: ModelChoice) -> Result<()> {
    let dir = command_dir(cfg, "train")?;
    let mut manifest = Manifest::new("train", cfg, &dir);
    for d in cfg.dataset_refs() {
        let name = d.name();
        let ds = load_dataset(&d, &mut manifest)?;
        let prep = prepare(cfg, ds, &name)?;
        let stem = format!("{name}.{}", model.name());
        match model.neural() {
            None => {
                let (trained, trace) = fit(cfg, model, &prep)?;
                let Trained::Graybox(post) = trained else { unreachable!() };
                post.save(&dir.join(format!("{stem}.json")))?;
                write_trace(&dir.join(format!("{stem}.loss.csv")), ["iteration", "elbo", ""], &trace)?;
            }
            Some(kind) => {
                let config = cfg.train.get(kind).clone();
                let out = heatcast_dl::train(kind, &prep.train, &prep.val, &config)?;
                let trace: Vec<[String; 3]> = out
                    .train_loss
                    .iter()
                    .zip(&out.val_loss)
                    .enumerate()
                    .map(|(i, (t, v))| [(i + 1).to_string(), t.to_string(), v.to_string()])
                    .collect();
                manifest.note(format!("{stem}: best epoch {} of {}", out.best_epoch + 1, config.epochs));
                Checkpoint::new(out.model, config, out.best_val_loss, out.best_epoch)
                    .save(&dir.join(format!("{stem}.json")))?;
                write_trace(&dir.join(format!("{stem}.loss.csv")), ["epoch", "train_loss", "val_loss"], &trace)?;
            }
        }
        manifest.output(&format!("{stem}.json"))?;
        manifest.output(&format!("{stem}.loss.csv"))?;
    }
    manifest.write()
}

fn write_trace(path: &Path, header: [&str; 3], rows: &[[String; 3]]) -> Result<()> {
    let keep = if header[2].is_empty() { 2 } else { 3 };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header[..keep])?;
    for r in rows {
        w.write_record(&r[..keep])?;
    }
    w.flush()?;
    Ok(())
}

pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub origin: Option<String>,
    pub horizon: usize,
    pub samples: usize,
}

pub fn predict(cfg: &ExperimentConfig, args: &PredictArgs) -> Result<()> {
    if args.horizon == 0 || args.samples == 0 {
        return Err(CliError::Config("horizon and samples must be positive".into()));
    }
    let dir = command_dir(cfg, "predict")?;
    let mut manifest = Manifest::new("predict", cfg, &dir);
    let d = cfg.dataset_refs().into_iter().next().ok_or_else(|| CliError::Config("predict needs a dataset".into()))?;
    let ds = load_dataset(&d, &mut manifest)?;
    let model = Trained::load(&args.checkpoint)?;
    manifest.input(&args.checkpoint)?;
    let h = args.horizon;
    let index = match &args.origin {
        Some(text) => {
            let ts = parse_timestamp(text).ok_or_else(|| CliError::Config(format!("bad origin timestamp `{text}`")))?;
            ds.position(ts).ok_or_else(|| CliError::Data(format!("origin {text} is not in the dataset")))?
        }
        None => (0..ds.len())
            .rev()
            .find(|&i| is_valid_instant(&ds, i, h, WINDOW_LEN))
            .ok_or_else(|| CliError::Data(format!("no origin with {WINDOW_LEN} h of history and {h} h ahead")))?,
    };
    if !is_valid_instant(&ds, index, h, WINDOW_LEN) {
        return Err(CliError::Data(format!(
            "origin {} needs {WINDOW_LEN} h of contiguous history and {h} contiguous hours after it",
            format_timestamp(ds.records()[index].timestamp)
        )));
    }
    manifest.note(format!("origin {}", format_timestamp(ds.records()[index].timestamp)));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = model.forecaster().forecast_at(&ds, index, h, args.samples, &mut rng)?;
    let mut w = csv::Writer::from_writer(File::create(dir.join("forecast.csv"))?);
    w.write_record(["step", "mean", "step_std", "cum_std"])?;
    for j in 0..f.horizon() {
        w.write_record([
            (j + 1).to_string(),
            f.mean[j].to_string(),
            f.step_std[j].to_string(),
            f.cum_std[j].to_string(),
        ])?;
    }
    w.flush()?;
    manifest.output("forecast.csv")?;
    manifest.write()
}

fn evaluate_building(
    cfg: &ExperimentConfig,
    index: usize,
    d: &DatasetRef,
    checkpoints: &Path,
    manifest: &mut Manifest,
) -> Result<Vec<Predictions>> {
    let name = d.name();
    let ds = load_dataset(d, manifest)?;
    let prep = prepare(cfg, ds, &name)?;
    let p = &cfg.eval.protocol;
    let mut out = Vec::new();
    for &model in &cfg.eval.models {
        let path = checkpoints.join(format!("{name}.{}.json", model.name()));
        let trained = if path.is_file() {
            let t = Trained::load(&path)?;
            if t.choice() != model {
                return Err(CliError::Config(format!("{} does not hold a {} model", path.display(), model.name())));
            }
            manifest.input(&path)?;
            t
        } else {
            manifest.note(format!("{name}: trained {} in-process", model.name()));
            fit(cfg, model, &prep)?.0
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
        out.push(predict_instants(
            trained.forecaster(),
            &prep.dataset,
            &prep.instants,
            p.horizon,
            p.n_samples,
            &mut rng,
        )?);
    }
    Ok(out)
}

pub fn evaluate(cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<()> {
    let dir = command_dir(cfg, "evaluate")?;
    let mut manifest = Manifest::new("evaluate", cfg, &dir);
    let ckpt_dir = checkpoints.map_or_else(|| cfg.output_dir.join("train"), Path::to_path_buf);
    let refs = cfg.dataset_refs();

    // Buildings are independent; each worker keeps its own manifest entries,
    // merged afterwards in dataset order.
    let results: Vec<Result<(Vec<Predictions>, Manifest)>> = std::thread::scope(|s| {
        let handles: Vec<_> = refs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let ckpt_dir = &ckpt_dir;
                let dir = &dir;
                s.spawn(move || {
                    let mut local = Manifest::new("evaluate", cfg, dir);
                    evaluate_building(cfg, i, d, ckpt_dir, &mut local).map(|p| (p, local))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });

    let h = cfg.eval.protocol.horizon;
    let mut pooled: Vec<Predictions> = cfg.eval.models.iter().map(|_| Predictions::new(h)).collect::<Result<_, _>>()?;
    for r in results {
        let (preds, local) = r?;
        manifest.inputs.extend(local.inputs);
        manifest.notes.extend(local.notes);
        for (acc, p) in pooled.iter_mut().zip(&preds) {
            acc.extend(p)?;
        }
    }

    let reports = cfg
        .eval
        .models
        .iter()
        .zip(&pooled)
        .map(|(m, p)| ModelReport::compute(m.name(), p, &cfg.eval.ks, &cfg.eval.profiles))
        .collect::<Result<Vec<_>, _>>()?;
    write_rmse(&dir, &reports)?;
    write_drift(&dir, &reports)?;
    write_scores(&dir, &reports)?;
    for k in &cfg.eval.ks {
        manifest.output(&format!("rmse_K{k}.csv"))?;
    }
    manifest.output("drift.csv")?;
    manifest.output("scores.csv")?;

    let mut uq = Vec::new();
    for (m, p) in cfg.eval.models.iter().zip(&pooled) {
        match uncertainty_error_bins(&p.first_step_std(), &p.first_step_abs_error(), cfg.eval.uq_bins) {
            Ok(r) => uq.push((m.name().to_string(), r)),
            Err(EvalError::InsufficientData(why)) => manifest.note(format!("no uq bins for {}: {why}", m.name())),
            Err(e) => return Err(e.into()),
        }
    }
    if !uq.is_empty() {
        write_uq(&dir, &uq)?;
        manifest.output("uq_bins.csv")?;
    }
    manifest.write()
}

pub fn prior_sweep_cmd(cfg: &ExperimentConfig) -> Result<()> {
    let dir = command_dir(cfg, "prior-sweep")?;
    let mut manifest = Manifest::new("prior-sweep", cfg, &dir);
    let mut fixtures = Vec::new();
    for d in cfg.dataset_refs() {
        let name = d.name();
        let ds = load_dataset(&d, &mut manifest)?;
        fixtures.push(prepare(cfg, ds, &name)?);
    }
    let records = prior_sweep(
        &cfg.sweep.priors,
        &cfg.sweep_seeds(),
        &fixtures,
        &cfg.train.lstm_bnn,
        &cfg.eval.protocol,
        &cfg.eval.ks,
    )?;
    write_sweep(&dir, &records)?;
    manifest.output("prior_sweep.csv")?;
    manifest.write()
}
