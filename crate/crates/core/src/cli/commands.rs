use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::params::Resolved;
use super::CliError;
use crate::dataio::{read_frames, split_open_set, write_frames, SplitSpec};
use crate::eval::{
    accuracy_curve_svg, comparison_bars_svg, evaluate_close, evaluate_open, export_features, feature_scatter_svg,
    features_to_csv, fit_open_set, write_svg, EvalReport, OpenMode, SnrRow, SnrTable,
};
use crate::network::{Architecture, ChannelSet, DcLstmModel};
use crate::numcore::{streams, Rng};
use crate::openset::{centers_from_csv, centers_to_csv, read_text, tails_from_csv, tails_to_csv, write_text};
use crate::represent::RepresentOptions;
use crate::siggen::{gen_dataset, parse_class_list, GenConfig};
use crate::training::{load_checkpoint, save_checkpoint, train, Checkpoint, LossMode, TrainConfig, TrainState};
use crate::Error;

type CmdResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cfg: &Resolved) -> CmdResult {
    match cfg.subcommand {
        "generate" => generate(cfg),
        "split" => split(cfg),
        "train" => train_cmd(cfg),
        "eval-close" => eval_close(cfg),
        "fit-weibull" => fit_weibull_cmd(cfg),
        "eval-open" => eval_open(cfg),
        "export-features" => export_features_cmd(cfg),
        "plot" => plot(cfg),
        other => Err(usage(format!("unknown subcommand `{other}`"))),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write(path: &Path, text: &str) -> CmdResult {
    write_text(path, text)?;
    Ok(())
}

/// Manifest beside a single output file.
fn file_manifest(out: &Path, cfg: &Resolved) -> CmdResult {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    write(Path::new(&name), &cfg.manifest())
}

fn classes(key: &str, v: &str) -> Result<Vec<crate::siggen::ModulationType>, CliError> {
    parse_class_list(v).map_err(|e| usage(format!("--{key}: {e}")))
}

/// `start:stop:step` (inclusive) or a single value.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [a, b, c] => {
            let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
                return Err("step must be positive and bounds finite".into());
            }
            if stop < start {
                return Err("stop lies below start".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        _ => Err(format!("expected start:stop:step, got `{s}`")),
    }
}

fn generate(cfg: &Resolved) -> CmdResult {
    let gen = GenConfig {
        classes: classes("classes", cfg.str("classes"))?,
        samples_per_symbol: cfg.parse("sps")?,
        frame_length: cfg.parse("length")?,
        snrs_db: parse_snr_range(cfg.str("snr")).map_err(|e| usage(format!("--snr: {e}")))?,
        frames_per_pair: cfg.parse("frames")?,
        seed: cfg.parse("seed")?,
        random_phase: cfg.flag("random-phase")?,
        cfo_max: cfg.parse("cfo-max")?,
    };
    gen.validate().map_err(|e| usage(e.to_string()))?;
    let out = cfg.path("out");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let summary = gen_dataset(&gen, &out)?;
    file_manifest(&out, cfg)?;
    eprintln!("wrote {} frames to {}", summary.total, out.display());
    Ok(())
}

fn split(cfg: &Resolved) -> CmdResult {
    let source = read_frames(&cfg.path("input"))?;
    let known = classes("known-classes", cfg.str("known-classes"))?;
    let full = match cfg.get("classes") {
        Some(v) => classes("classes", v)?,
        None => source.classes.clone(),
    };
    let train_fraction: f64 = cfg.parse("train-fraction")?;
    let test_fraction = match cfg.get("test-fraction") {
        Some(_) => cfg.parse("test-fraction")?,
        None => 1.0 - train_fraction,
    };
    let spec = SplitSpec {
        known,
        full,
        train_fraction,
        test_fraction,
    };
    let mut rng = Rng::new(cfg.parse("seed")?, streams::SPLIT);
    let (tr, te) = split_open_set(&source, &spec, &mut rng)?;
    let dir = cfg.path("out");
    create_dir(&dir)?;
    write_frames(&tr, &dir.join("train.sigf"))?;
    write_frames(&te, &dir.join("test.sigf"))?;
    write(&dir.join("manifest.txt"), &cfg.manifest())?;
    eprintln!("train: {} frames, test: {} frames", tr.frames.len(), te.frames.len());
    Ok(())
}

fn train_cmd(cfg: &Resolved) -> CmdResult {
    let file = read_frames(&cfg.path("train"))?;
    let loss_mode: LossMode = cfg.parse("loss")?;
    let mut config = TrainConfig {
        batch: cfg.parse("batch")?,
        lambda: cfg.parse("lambda")?,
        alpha: cfg.parse("alpha")?,
        epochs: cfg.parse("epochs")?,
        seed: cfg.parse("seed")?,
        loss_mode,
        represent: RepresentOptions {
            literal_eq5: cfg.flag("literal-eq5")?,
        },
        ..TrainConfig::default()
    };
    config.adam.lr = cfg.parse("lr")?;
    config.validate().map_err(|e| usage(e.to_string()))?;

    let mut arch = Architecture::new(cfg.parse::<ChannelSet>("channels")?, cfg.parse("cells")?, file.classes.len());
    arch.bidirectional = cfg.flag("bidirectional")?;
    arch.visualization = cfg.flag("visualization")?;
    arch.validate().map_err(|e| usage(e.to_string()))?;

    let dir = cfg.path("out");
    create_dir(&dir)?;
    let ckpt_path = dir.join("model.ckpt");
    let state = if cfg.flag("resume")? && ckpt_path.exists() {
        let ck = load_checkpoint(&ckpt_path)?;
        if ck.state.model.arch != arch {
            return Err(usage("checkpoint architecture differs from the requested one"));
        }
        if ck.state.classes != file.classes {
            return Err(usage("checkpoint classes differ from the training file"));
        }
        if ck.represent != config.represent || ck.seed != config.seed {
            return Err(usage("checkpoint seed or representation differs from the requested one"));
        }
        eprintln!("resuming after epoch {}", ck.state.epochs_done);
        ck.state
    } else {
        let model = DcLstmModel::init(&arch, config.seed)?;
        TrainState::fresh(model, file.classes.clone(), &config)?
    };
    write(&dir.join("manifest.txt"), &cfg.manifest())?;

    let total = config.epochs;
    let (lambda, seed, represent) = (config.lambda, config.seed, config.represent);
    let state = train(&file, &config, state, |s| {
        let ck = Checkpoint {
            state: s.clone(),
            lambda,
            seed,
            represent,
        };
        save_checkpoint(&ck, &ckpt_path)?;
        write_text(&dir.join("train_log.csv"), &s.log.to_csv())?;
        write_text(&dir.join("timing.csv"), &s.log.timing_csv())?;
        if let Some(r) = s.log.records.last() {
            eprintln!(
                "epoch {}/{}  softmax {:.4}  center {:.4}  acc {:.4}  {:.1}s",
                r.epoch, total, r.softmax_loss, r.center_loss, r.accuracy, r.seconds
            );
        }
        Ok(())
    })?;
    if state.log.records.is_empty() {
        // Nothing left to train; still leave a usable checkpoint behind.
        save_checkpoint(
            &Checkpoint {
                state,
                lambda,
                seed,
                represent,
            },
            &ckpt_path,
        )?;
    }
    Ok(())
}

fn write_report(dir: &Path, report: &EvalReport, cfg: &Resolved) -> CmdResult {
    create_dir(dir)?;
    write(&dir.join("report.csv"), &report.to_csv())?;
    write(&dir.join("per_snr.csv"), &report.per_snr.to_csv())?;
    write(&dir.join("confusion.csv"), &report.confusion.to_csv(&report.names))?;
    write(&dir.join("manifest.txt"), &cfg.manifest())?;
    eprintln!(
        "mean accuracy {:.4}, macro accuracy {:.4}{}",
        report.mean_accuracy,
        report.macro_accuracy,
        report
            .unknown_recall
            .map(|u| format!(", unknown recall {u:.4}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn eval_close(cfg: &Resolved) -> CmdResult {
    let ck = load_checkpoint(&cfg.path("model"))?;
    let test = read_frames(&cfg.path("test"))?;
    let preds = evaluate_close(&ck.state.model, &ck.state.classes, &test, ck.represent)?;
    write_report(&cfg.path("out"), &preds.report()?, cfg)
}

fn fit_weibull_cmd(cfg: &Resolved) -> CmdResult {
    let ck = load_checkpoint(&cfg.path("model"))?;
    let train = read_frames(&cfg.path("train"))?;
    let m: usize = cfg.parse("m-tail")?;
    let (centers, tails) = fit_open_set(&ck.state.model, &ck.state.classes, &train, ck.represent, m)?;
    for t in tails.iter().filter(|t| t.saturated) {
        eprintln!(
            "warning: {} has fewer correct examples than the tail size; fitted on {}",
            t.class, t.m_used
        );
    }
    let dir = cfg.path("out");
    create_dir(&dir)?;
    write(&dir.join("tails.csv"), &tails_to_csv(&tails))?;
    write(&dir.join("centers.csv"), &centers_to_csv(&ck.state.classes, &centers))?;
    write(&dir.join("manifest.txt"), &cfg.manifest())?;
    Ok(())
}

fn eval_open(cfg: &Resolved) -> CmdResult {
    let mode: OpenMode = cfg.parse("mode")?;
    let ck = load_checkpoint(&cfg.path("model"))?;
    let trained_with = ck.state.loss_mode;
    match (mode, trained_with) {
        (OpenMode::CenterWeibull, LossMode::SoftmaxCenter) => {}
        (OpenMode::SoftmaxOnly | OpenMode::SoftmaxWeibull, LossMode::SoftmaxOnly) => {}
        _ => {
            return Err(usage(format!(
                "mode {mode} does not apply to a model trained with {} loss",
                trained_with.name()
            )))
        }
    }
    let test = read_frames(&cfg.path("test"))?;
    let known = &ck.state.classes;
    let weibull = if mode.uses_weibull() {
        let tails_path = cfg
            .get("tails")
            .map(PathBuf::from)
            .ok_or_else(|| usage(format!("mode {mode} requires --tails")))?;
        let centers_path = match cfg.get("centers") {
            Some(p) => PathBuf::from(p),
            None => tails_path.with_file_name("centers.csv"),
        };
        let tails = tails_from_csv(&read_text(&tails_path)?)?;
        let (center_classes, centers) = centers_from_csv(&read_text(&centers_path)?)?;
        if &center_classes != known {
            return Err(usage("centers file classes differ from the model classes"));
        }
        if tails.len() != known.len() {
            return Err(usage("tails file does not cover every model class"));
        }
        Some((centers, tails))
    } else {
        None
    };
    let preds = evaluate_open(
        &ck.state.model,
        known,
        &test,
        ck.represent,
        mode,
        weibull.as_ref().map(|(c, t)| (c, t.as_slice())),
    )?;
    write_report(&cfg.path("out"), &preds.report()?, cfg)
}

fn export_features_cmd(cfg: &Resolved) -> CmdResult {
    let ck = load_checkpoint(&cfg.path("model"))?;
    let input = read_frames(&cfg.path("input"))?;
    let points = export_features(&ck.state.model, &ck.state.classes, &input, ck.represent)?;
    let out = cfg.path("out");
    write(&out, &features_to_csv(&points, &ck.state.classes))?;
    file_manifest(&out, cfg)
}

/// Rows of a CSV with a header; fields are split on commas.
fn csv_rows(text: &str, columns: &[&str], origin: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let bad = |line: usize, msg: &str| usage(format!("{}:{line}: {msg}", origin.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let head: Vec<&str> = header.split(',').map(str::trim).collect();
    let idx = columns
        .iter()
        .map(|c| head.iter().position(|h| h == c).ok_or_else(|| bad(1, &format!("missing column `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    lines
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            idx.iter()
                .map(|&k| fields.get(k).map(|s| s.to_string()).ok_or_else(|| bad(i + 1, "short row")))
                .collect()
        })
        .collect()
}

fn num(v: &str, origin: &Path) -> Result<f64, CliError> {
    v.parse().map_err(|_| usage(format!("{}: `{v}` is not a number", origin.display())))
}

fn plot(cfg: &Resolved) -> CmdResult {
    let input = cfg.path("input");
    let text = read_text(&input)?;
    let title = cfg.str("title");
    let svg = match cfg.str("kind") {
        "snr" => {
            let rows = csv_rows(&text, &["snr_db", "accuracy", "count"], &input)?
                .into_iter()
                .map(|r| {
                    let count = num(&r[2], &input)? as usize;
                    Ok(SnrRow {
                        snr_db: num(&r[0], &input)?,
                        correct: (num(&r[1], &input)? * count as f64).round() as usize,
                        count,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            accuracy_curve_svg(&SnrTable { rows }, title)?
        }
        "bars" => {
            let rows = csv_rows(&text, &["scenario", "model", "accuracy"], &input)?;
            let mut scenarios: Vec<String> = Vec::new();
            let mut models: Vec<String> = Vec::new();
            let mut cells = BTreeMap::new();
            for r in &rows {
                if !scenarios.contains(&r[0]) {
                    scenarios.push(r[0].clone());
                }
                if !models.contains(&r[1]) {
                    models.push(r[1].clone());
                }
                cells.insert((r[0].clone(), r[1].clone()), num(&r[2], &input)?);
            }
            let values = scenarios
                .iter()
                .map(|s| models.iter().map(|m| cells.get(&(s.clone(), m.clone())).copied().unwrap_or(0.0)).collect())
                .collect::<Vec<Vec<f64>>>();
            comparison_bars_svg(&scenarios, &models, &values, title)?
        }
        "features" => {
            let rows = csv_rows(&text, &["x", "y", "true"], &input)?;
            let mut names: Vec<String> = rows.iter().map(|r| r[2].clone()).collect();
            names.sort();
            names.dedup();
            let points = rows
                .iter()
                .map(|r| {
                    let class = names.iter().position(|n| *n == r[2]).unwrap_or(0);
                    Ok((num(&r[0], &input)?, num(&r[1], &input)?, class))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            feature_scatter_svg(&points, &names, title)?
        }
        other => return Err(usage(format!("--kind: expected snr, bars or features, got `{other}`"))),
    };
    let out = cfg.path("out");
    write_svg(&out, &svg)?;
    Ok(())
}
