use std::fs;
use std::path::Path;

use bscb_core::bandit::BanditConfig;
use bscb_core::blackspot::{black_spot_statistics, BlackSpotMap};
use bscb_core::experiment::{
    build_black_spots, load_state, make_predictor, save_state, simulate, sweep, train_predictor, Drives,
    ExperimentConfig, PredictorKind, SweepParameter,
};
use bscb_core::metrics::{comparative_report, EfficiencyIndicators, RunGroup};
use bscb_core::schemes::SchemeKind;
use bscb_core::sim::{write_event_log, EpochResult, LogEpochs};
use bscb_core::{ForestModel, RatePredictor};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::run::{self, Inputs, Loaded, RunManifest, RUN_FILE};
use crate::{Cli, Command, ModelArgs, SchemeArgs};

/// What `simulate` leaves for `report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: SchemeKind,
    pub seed: u64,
    /// Hash of the config without scheme and seed; runs to be compared should share it.
    pub config_tag: String,
    pub resumed: bool,
    pub epochs: usize,
    pub convergence_epoch: usize,
    pub black_spots: Option<usize>,
    pub bandit: BanditConfig,
    /// Mean of the evaluation epochs.
    pub summary: EpochResult,
    pub efficiency: EfficiencyIndicators,
    pub eval_results: Vec<EpochResult>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (mut cfg, base) = match &cli.config {
        None => (ExperimentConfig::default(), Inputs::default()),
        Some(path) => match run::load_config(path)? {
            Loaded::Config(c) => (c, Inputs::default()),
            Loaded::Manifest(m) if m.command != cli.command.name() => {
                return Err(CliError::Usage(format!(
                    "{} records a `{}` run, not `{}`",
                    path.display(),
                    m.command,
                    cli.command.name()
                )))
            }
            Loaded::Manifest(m) => (m.config, m.inputs),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.as_path();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let name = cli.command.name();
    let inputs = match cli.command {
        Command::TrainPredictor => train(&cfg, out)?,
        Command::BuildBlackspots(a) => blackspots(&cfg, a, base, out)?,
        Command::Simulate(a) => {
            let inputs = Inputs {
                resume_state: a.resume_state.or(base.resume_state.clone()),
                ..Inputs::default()
            };
            if let Some(l) = a.log_epochs {
                cfg.log_epochs = l;
            }
            simulate_cmd(&mut cfg, a.scheme, base, inputs, out)?
        }
        Command::Sweep(a) => {
            let inputs = Inputs {
                parameter: a.parameter.or(base.parameter.clone()),
                values: a.values.or(base.values.clone()),
                ..Inputs::default()
            };
            sweep_cmd(&mut cfg, a.scheme, base, inputs, out)?
        }
        Command::Report(a) => {
            let runs = if a.runs.is_empty() { base.runs } else { a.runs };
            report(&runs, out)?;
            Inputs {
                runs,
                ..Inputs::default()
            }
        }
    };
    run::write_json(out, RUN_FILE, &RunManifest::new(name, &cfg, inputs))
}

fn prepared(cfg: &ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let c = cfg.clone().with_derived_seeds();
    c.validate()?;
    Ok(c)
}

fn predictor(cfg: &ExperimentConfig, drives: &Drives, model: Option<&Path>) -> Result<RatePredictor, CliError> {
    let forest = match model {
        Some(p) => Some(ForestModel::load(p)?),
        None if cfg.predictor.kind == PredictorKind::Forest => Some(train_predictor(drives, &cfg.predictor.forest)?),
        None => None,
    };
    Ok(make_predictor(cfg, forest)?)
}

fn train(cfg: &ExperimentConfig, out: &Path) -> Result<Inputs, CliError> {
    let c = prepared(cfg)?;
    let drives = c.load_drives()?;
    let model = train_predictor(&drives, &c.predictor.forest)?;
    run::write(out, "model.json", model.to_json()?)?;
    Ok(Inputs::default())
}

fn blackspots(cfg: &ExperimentConfig, a: ModelArgs, base: Inputs, out: &Path) -> Result<Inputs, CliError> {
    let inputs = Inputs {
        model: a.model.or(base.model),
        ..Inputs::default()
    };
    let c = prepared(cfg)?;
    let drives = c.load_drives()?;
    let pred = predictor(&c, &drives, inputs.model.as_deref())?;
    let build = build_black_spots(&drives, &pred, &c.blackspot)?;
    let map = &build.map;

    run::write(out, "blackspots.json", map.to_json()?)?;
    run::write_json(out, "blackspots.geojson", &map.to_geojson())?;

    let mut clusters = String::from("cluster,x,y,members,rmse,black_spot\n");
    for (i, cl) in build.clusters.iter().enumerate() {
        clusters.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            cl.centroid.x,
            cl.centroid.y,
            cl.members.len(),
            cl.rmse,
            cl.rmse > map.threshold_used
        ));
    }
    run::write(out, "clusters.csv", clusters)?;

    // ECDFs of the replay drive's stretches inside black spots
    let stats = black_spot_statistics(&drives.replay, map);
    let mut ecdf = String::from("metric,value,fraction\n");
    for (metric, points) in [("distance_m", stats.distance_ecdf()), ("duration_s", stats.duration_ecdf())] {
        for (v, f) in points {
            ecdf.push_str(&format!("{metric},{v},{f}\n"));
        }
    }
    run::write(out, "blackspot_ecdf.csv", ecdf)?;
    Ok(inputs)
}

/// Applies the scheme flags and loads drives, predictor and map.
fn scheme_setup(
    cfg: &mut ExperimentConfig,
    a: SchemeArgs,
    base: Inputs,
    inputs: &mut Inputs,
) -> Result<(ExperimentConfig, Drives, RatePredictor, Option<BlackSpotMap>), CliError> {
    if let Some(s) = a.scheme {
        cfg.scheme = s;
    }
    if let Some(n) = a.epochs {
        cfg.epochs = n;
    }
    inputs.model = a.model.model.or(base.model);
    inputs.map = a.map.or(base.map);

    let c = prepared(cfg)?;
    let drives = c.load_drives()?;
    let pred = predictor(&c, &drives, inputs.model.as_deref())?;
    let map = match &inputs.map {
        Some(p) => Some(BlackSpotMap::load(p)?),
        None if c.scheme == SchemeKind::Bscb => Some(build_black_spots(&drives, &pred, &c.blackspot)?.map),
        None => None,
    };
    Ok((c, drives, pred, map))
}

fn simulate_cmd(
    cfg: &mut ExperimentConfig,
    a: SchemeArgs,
    base: Inputs,
    mut inputs: Inputs,
    out: &Path,
) -> Result<Inputs, CliError> {
    let (c, drives, pred, map) = scheme_setup(cfg, a, base, &mut inputs)?;
    let resume = match &inputs.resume_state {
        Some(p) => Some(load_state(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?),
        None => None,
    };
    let resumed = resume.is_some();
    let sim = simulate(&c, &drives, &pred, map.as_ref(), resume)?;

    run::write_csv(out, "epochs.csv", |w| sim.report.write_csv(w))?;
    run::write_csv(out, "events.csv", |w| write_event_log(&sim.log, w))?;
    run::write(out, "state.json", save_state(&sim.scheme)? + "\n")?;
    let tail = sim.report.epochs.len().saturating_sub(c.eval_epochs);
    let summary = RunSummary {
        scheme: c.scheme,
        seed: c.seed,
        config_tag: config_tag(cfg)?,
        resumed,
        epochs: c.epochs,
        convergence_epoch: sim.report.convergence_epoch,
        black_spots: map.as_ref().map(|m| m.ellipses().len()),
        bandit: sim.bandit,
        summary: sim.summary,
        efficiency: sim.efficiency,
        eval_results: sim.report.epochs[tail..].to_vec(),
    };
    run::write_json(out, "summary.json", &summary)?;
    Ok(inputs)
}

fn sweep_cmd(
    cfg: &mut ExperimentConfig,
    a: SchemeArgs,
    base: Inputs,
    mut inputs: Inputs,
    out: &Path,
) -> Result<Inputs, CliError> {
    let parameter: SweepParameter = inputs
        .parameter
        .as_deref()
        .ok_or_else(|| CliError::Usage("sweep needs --parameter".into()))?
        .parse()?;
    let values = inputs
        .values
        .clone()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::Usage("sweep needs --values".into()))?;
    cfg.log_epochs = LogEpochs::None;
    let (c, drives, pred, map) = scheme_setup(cfg, a, base, &mut inputs)?;
    let rows = sweep(&c, &drives, &pred, map.as_ref(), parameter, &values)?;

    let mut csv = String::from("parameter,value,e_s,e_aoi,mean_data_rate,mean_aoi\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            parameter.name(),
            r.value,
            r.e_s,
            r.e_aoi,
            r.mean_data_rate,
            r.mean_aoi
        ));
    }
    run::write(out, "sweep.csv", csv)?;
    Ok(inputs)
}

fn report(runs: &[std::path::PathBuf], out: &Path) -> Result<(), CliError> {
    if runs.is_empty() {
        return Err(CliError::Usage("report needs simulate run directories".into()));
    }
    let mut groups: Vec<RunGroup> = Vec::new();
    for dir in runs {
        let path = dir.join("summary.json");
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let s: RunSummary = serde_json::from_str(&text).map_err(|e| CliError::parse(&path, e))?;
        let name = s.scheme.name();
        match groups.iter_mut().find(|g| g.scheme == name) {
            Some(g) => g.results.extend(s.eval_results),
            None => groups.push(RunGroup {
                scheme: name.into(),
                config_tag: s.config_tag,
                results: s.eval_results,
            }),
        }
    }
    let report = comparative_report(&groups)?;
    run::write_json(out, "report.json", &report)?;
    run::write_csv(out, "report.csv", |w| report.write_csv(w))
}

/// FNV-1a of the config JSON with scheme, seed and logging neutralized.
fn config_tag(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut c = cfg.clone();
    c.scheme = SchemeKind::Periodic;
    c.seed = 0;
    c.log_epochs = LogEpochs::default();
    let json = serde_json::to_string(&c).map_err(bscb_core::Error::from)?;
    let hash = json
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    Ok(format!("{hash:016x}"))
}
