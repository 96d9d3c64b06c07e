use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spikecoder::data::{
    load_checkpoint, load_idx, load_spectrograms, save_checkpoint, save_spectrograms,
    synth_spectrograms, ImageSet, PairingMode, SpectrogramSet,
};
use spikecoder::metrics::{evaluate_autoencoder, N_CLASSES};
use spikecoder::network::{infer, synthesize_batch, train_autoencoder};
use spikecoder::pipeline::{run_audio_experiment, synthetic_audio_splits};
use spikecoder::rng::{stream, Stream};
use spikecoder::{EvalReport, SpikingNetwork, TrainConfig};

use crate::config::FileConfig;
use crate::output::{batch_log_csv, ensure_dir, gray, run_file, write_sheet, write_text};
use crate::{Cli, CliError, Command, HyperArgs, SyntheticArgs};

const SHEET_SAMPLES: usize = 50;

struct Globals {
    file: FileConfig,
    seed: Option<u64>,
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = file.maybe("seed", cli.seed)?;
    let out = file.pick("out", cli.out, PathBuf::from("runs"))?;
    let g = Globals { file, seed, out };
    match cli.command {
        Command::TrainAe {
            data,
            hidden,
            limit,
            hyper,
        } => train_ae(&g, data, hidden, limit, &hyper),
        Command::Eval {
            checkpoint,
            data,
            steps,
            limit,
            split,
        } => eval(&g, checkpoint, data, steps, limit, split),
        Command::TrainAudio {
            ae,
            images,
            audio_train,
            audio_test,
            mode,
            hidden_steps,
            hidden,
            synthetic,
            hyper,
        } => train_audio(
            &g,
            ae,
            images,
            audio_train,
            audio_test,
            mode,
            hidden_steps,
            hidden,
            &synthetic,
            &hyper,
        ),
        Command::Synthesize {
            ae,
            audiocoder,
            audio,
            class,
            count,
            synthetic,
        } => synthesize(&g, ae, audiocoder, audio, class, count, &synthetic),
        Command::Sweep {
            param,
            values,
            data,
            hidden,
            limit,
            test_limit,
            hyper,
        } => sweep(&g, param, values, data, hidden, limit, test_limit, &hyper),
        Command::GenSpectrograms {
            classes,
            per_class,
            channels,
            frames,
            output,
        } => gen_spectrograms(&g, classes, per_class, channels, frames, output),
    }
}

fn parse_mask(raw: &str) -> Result<bool, CliError> {
    match raw.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(CliError::Config(format!(
            "mask must be on or off, got {other:?}"
        ))),
    }
}

/// Resolves everything except alpha, which callers may sweep.
fn train_config(g: &Globals, h: &HyperArgs, base: TrainConfig) -> Result<TrainConfig, CliError> {
    let f = &g.file;
    let mask = match f.maybe::<String>("mask", h.mask.clone())? {
        Some(m) => parse_mask(&m)?,
        None => base.use_mask,
    };
    let cfg = TrainConfig {
        v_th: f.pick("v_th", h.v_th, base.v_th)?,
        steps: f.pick("steps", h.steps, base.steps)?,
        lr: f.pick("lr", h.lr, base.lr)?,
        weight_decay: f.pick("weight_decay", h.weight_decay, base.weight_decay)?,
        batch_size: f.pick("batch_size", h.batch_size, base.batch_size)?,
        epochs: f.pick("epochs", h.epochs, base.epochs)?,
        max_rate: f.pick("max_rate", h.max_rate, base.max_rate)?,
        seed: g.seed.unwrap_or(base.seed),
        use_mask: mask,
        ..base
    };
    Ok(cfg)
}

fn alphas(g: &Globals, h: &HyperArgs, default: f32) -> Result<Vec<f32>, CliError> {
    g.file
        .list("alpha", h.alpha.as_deref(), &default.to_string())
}

fn load_images(dir: &Path, split: &str) -> Result<ImageSet, CliError> {
    Ok(load_idx(
        dir.join(format!("{split}-images-idx3-ubyte")),
        dir.join(format!("{split}-labels-idx1-ubyte")),
    )?)
}

fn data_dir(g: &Globals, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    g.file.pick(key, flag, PathBuf::from("data/mnist"))
}

fn limited(set: ImageSet, limit: Option<usize>) -> ImageSet {
    match limit {
        Some(n) => set.take(n),
        None => set,
    }
}

fn square_side(n: usize) -> Result<usize, CliError> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(CliError::Io(format!(
            "{n} outputs do not form a square image"
        )));
    }
    Ok(side)
}

fn tag(name: &str, value: impl std::fmt::Display, many: bool) -> Option<String> {
    many.then(|| format!("{name}{value}"))
}

/// Originals and reconstructions of the first test images, in alternating
/// rows of ten.
fn reconstruction_sheet(
    net: &SpikingNetwork,
    test: &ImageSet,
    cfg: &TrainConfig,
    path: &Path,
) -> Result<(), CliError> {
    let sample = test.take(SHEET_SAMPLES);
    let runs = infer(
        net,
        &sample.scaled_all(),
        cfg.steps,
        cfg.max_rate,
        &mut stream(cfg.seed, Stream::Evaluation),
    )?;
    let mut tiles = Vec::new();
    for row in (0..sample.len()).collect::<Vec<_>>().chunks(10) {
        tiles.extend(row.iter().map(|&i| sample.image(i).to_vec()));
        tiles.extend(row.iter().map(|&i| gray(&runs[i].output.counts_f32())));
    }
    write_sheet(path, &tiles, test.width, 10)
}

fn train_ae(
    g: &Globals,
    data: Option<PathBuf>,
    hidden: Option<usize>,
    limit: Option<usize>,
    hyper: &HyperArgs,
) -> Result<(), CliError> {
    let dir = data_dir(g, "data", data)?;
    let hidden = g.file.pick("hidden", hidden, 196)?;
    let limit = g.file.maybe("limit", limit)?;
    let mut base = train_config(g, hyper, TrainConfig::autoencoder())?;
    // Only the audio pipeline reads hidden_steps; keep it valid for any T.
    base.hidden_steps = base.steps;
    let alphas = alphas(g, hyper, base.alpha)?;
    for &alpha in &alphas {
        TrainConfig { alpha, ..base }.validate()?;
    }
    let train = limited(load_images(&dir, "train")?, limit);
    let test = load_images(&dir, "t10k")?;
    ensure_dir(&g.out)?;
    let many = alphas.len() > 1;
    for &alpha in &alphas {
        let cfg = TrainConfig { alpha, ..base };
        let t = tag("alpha", alpha, many);
        let (net, log) = train_autoencoder(&train.scaled_all(), hidden, &cfg, |_| {})?;
        let ckpt = run_file(&g.out, "ae", "saec", t.as_deref());
        save_checkpoint(&net, &cfg, &ckpt)?;
        write_text(
            &run_file(&g.out, "train_log", "csv", t.as_deref()),
            &batch_log_csv(&log),
        )?;
        reconstruction_sheet(
            &net,
            &test,
            &cfg,
            &run_file(&g.out, "reconstructions", "pgm", t.as_deref()),
        )?;
        let last = log.last().map_or(f64::NAN, |b| b.spike_mse);
        println!(
            "alpha {alpha}: {} batches, final batch spike-mse {last:.4}, checkpoint {}",
            log.len(),
            ckpt.display()
        );
    }
    Ok(())
}

const EVAL_HEADER: &str = "split,n_samples,spike_mse,pixel_mse";

fn eval_row(split: &str, r: &EvalReport) -> String {
    let mut s = format!("{split},{},{},{}", r.n_samples, r.spike_mse, r.pixel_mse);
    for v in r.per_class_mse {
        let _ = write!(s, ",{v}");
    }
    s
}

fn eval(
    g: &Globals,
    checkpoint: Option<PathBuf>,
    data: Option<PathBuf>,
    steps: Option<usize>,
    limit: Option<usize>,
    split: Option<String>,
) -> Result<(), CliError> {
    let ckpt = g
        .file
        .maybe("checkpoint", checkpoint)?
        .ok_or_else(|| CliError::Config("eval needs --checkpoint".into()))?;
    let dir = data_dir(g, "data", data)?;
    let limit = g.file.maybe("limit", limit)?;
    let split = g.file.pick("split", split, "both".to_string())?;
    let splits: &[(&str, &str)] = match split.as_str() {
        "train" => &[("train", "train")],
        "test" => &[("test", "t10k")],
        "both" => &[("train", "train"), ("test", "t10k")],
        other => {
            return Err(CliError::Config(format!(
                "split must be train, test or both, got {other:?}"
            )))
        }
    };
    let (net, cfg) = load_checkpoint(&ckpt)?;
    let steps = g.file.pick("steps", steps, cfg.steps)?;
    let seed = g.seed.unwrap_or(cfg.seed);

    let mut csv = String::from(EVAL_HEADER);
    for c in 0..N_CLASSES {
        let _ = write!(csv, ",class_{c}");
    }
    csv.push('\n');
    for (name, prefix) in splits {
        let images = limited(load_images(&dir, prefix)?, limit);
        let report = evaluate_autoencoder(
            &net,
            &images,
            steps,
            cfg.max_rate,
            &mut stream(seed, Stream::Evaluation),
        )?;
        println!(
            "{name}: {} samples, spike-mse {:.4}, mse {:.4}",
            report.n_samples, report.spike_mse, report.pixel_mse
        );
        csv.push_str(&eval_row(name, &report));
        csv.push('\n');
    }
    ensure_dir(&g.out)?;
    write_text(&g.out.join("eval.csv"), &csv)
}

fn audio_splits(
    g: &Globals,
    audio_train: Option<PathBuf>,
    audio_test: Option<PathBuf>,
    synthetic: &SyntheticArgs,
    seed: u64,
) -> Result<(SpectrogramSet, SpectrogramSet), CliError> {
    let f = &g.file;
    let train_path = f.maybe("audio_train", audio_train)?;
    let test_path = f.maybe("audio_test", audio_test)?;
    match (train_path, test_path) {
        (Some(tr), Some(te)) => Ok((load_spectrograms(tr)?, load_spectrograms(te)?)),
        (None, None) => Ok(synthetic_audio_splits(
            seed,
            f.pick("train_per_class", synthetic.train_per_class, 20)?,
            f.pick("test_per_class", synthetic.test_per_class, 5)?,
            f.pick("channels", synthetic.channels, 39)?,
            f.pick("frames", synthetic.frames, 100)?,
        )),
        _ => Err(CliError::Config(
            "give both --audio-train and --audio-test, or neither".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn train_audio(
    g: &Globals,
    ae: Option<PathBuf>,
    images: Option<PathBuf>,
    audio_train: Option<PathBuf>,
    audio_test: Option<PathBuf>,
    mode: Option<String>,
    hidden_steps: Option<String>,
    hidden: Option<usize>,
    synthetic: &SyntheticArgs,
    hyper: &HyperArgs,
) -> Result<(), CliError> {
    let f = &g.file;
    let ae_path = f
        .maybe("ae", ae)?
        .ok_or_else(|| CliError::Config("train-audio needs --ae".into()))?;
    let mode: PairingMode = f.pick("mode", mode, "A".to_string())?.parse()?;
    let hidden = f.pick("hidden", hidden, 512)?;
    let th_list: Vec<usize> = f.list("hidden_steps", hidden_steps.as_deref(), "10")?;
    let mut base = train_config(g, hyper, TrainConfig::audiocoder())?;
    base.alpha = f.pick(
        "alpha",
        hyper
            .alpha
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(|e: std::num::ParseFloatError| CliError::Config(format!("alpha: {e}")))?,
        base.alpha,
    )?;
    for &th in &th_list {
        TrainConfig {
            hidden_steps: th,
            ..base
        }
        .validate()?;
    }

    let (ae_net, ae_cfg) = load_checkpoint(&ae_path)?;
    let images = load_images(&data_dir(g, "images", images)?, "train")?;
    let (train, test) = audio_splits(g, audio_train, audio_test, synthetic, base.seed)?;
    ensure_dir(&g.out)?;
    let many = th_list.len() > 1;
    for &th in &th_list {
        let cfg = TrainConfig {
            hidden_steps: th,
            ..base
        };
        let t = tag("th", th, many);
        let run = run_audio_experiment(
            &ae_net,
            ae_cfg.steps,
            &images,
            &train,
            &test,
            mode,
            hidden,
            &cfg,
            true,
        )?;
        save_checkpoint(
            &run.audiocoder,
            &cfg,
            run_file(&g.out, "audiocoder", "saec", t.as_deref()),
        )?;
        write_text(
            &run_file(&g.out, "train_log", "csv", t.as_deref()),
            &batch_log_csv(&run.log),
        )?;
        let mut csv = String::from("epoch,test_mse\n");
        for (e, m) in run.epoch_test_mse.iter().enumerate() {
            let _ = writeln!(csv, "{},{m}", e + 1);
        }
        write_text(&run_file(&g.out, "epoch_mse", "csv", t.as_deref()), &csv)?;
        println!(
            "T_h {th}, mode {mode:?}: final test mse {:.4}",
            run.final_test_mse
        );
    }
    Ok(())
}

fn synthesize(
    g: &Globals,
    ae: Option<PathBuf>,
    audiocoder: Option<PathBuf>,
    audio: Option<PathBuf>,
    class: Option<u8>,
    count: Option<usize>,
    synthetic: &SyntheticArgs,
) -> Result<(), CliError> {
    let f = &g.file;
    let need = |k: &str, v: Option<PathBuf>| -> Result<PathBuf, CliError> {
        f.maybe(k, v)?
            .ok_or_else(|| CliError::Config(format!("synthesize needs --{k}")))
    };
    let (ae_net, _) = load_checkpoint(need("ae", ae)?)?;
    let (coder, coder_cfg) = load_checkpoint(need("audiocoder", audiocoder)?)?;
    let seed = g.seed.unwrap_or(coder_cfg.seed);
    let decoder = ae_net
        .layers()
        .last()
        .ok_or_else(|| CliError::Io("autoencoder checkpoint has no layers".into()))?;
    let side = square_side(decoder.n_out())?;

    let audio = match f.maybe("audio", audio)? {
        Some(p) => load_spectrograms(p)?,
        None => {
            synthetic_audio_splits(
                seed,
                f.pick("train_per_class", synthetic.train_per_class, 20)?,
                f.pick("test_per_class", synthetic.test_per_class, 5)?,
                f.pick("channels", synthetic.channels, 39)?,
                f.pick("frames", synthetic.frames, 100)?,
            )
            .1
        }
    };
    let mut indices: Vec<usize> = (0..audio.len()).collect();
    if let Some(c) = f.maybe("class", class)? {
        indices.retain(|&i| audio.labels.get(i) == Some(&c));
        if indices.is_empty() {
            return Err(CliError::Io(format!("no audio sample has class {c}")));
        }
    }
    if let Some(n) = f.maybe("count", count)? {
        indices.truncate(n);
    }
    let audio = audio.select(&indices);
    let rasters = synthesize_batch(
        &audio.samples(),
        &coder,
        decoder,
        coder_cfg.steps,
        coder_cfg.max_rate,
        &mut stream(seed, Stream::Evaluation),
    )?;

    ensure_dir(&g.out)?;
    let tiles: Vec<Vec<u8>> = rasters.iter().map(|r| gray(&r.counts_f32())).collect();
    for (k, tile) in tiles.iter().enumerate() {
        let name = match audio.labels.get(k) {
            Some(l) => format!("sample_{k:03}_class{l}.pgm"),
            None => format!("sample_{k:03}.pgm"),
        };
        spikecoder::data::write_pgm(g.out.join(name), side, side, tile)?;
    }
    // One column per class when every class is present equally often.
    let labelled = audio.labels.len() == tiles.len() && !tiles.is_empty();
    let per = tiles.len() / N_CLASSES;
    let balanced = labelled
        && tiles.len().is_multiple_of(N_CLASSES)
        && (0..N_CLASSES as u8).all(|c| audio.labels.iter().filter(|&&l| l == c).count() == per);
    let sheet = if balanced {
        let mut by_class: Vec<Vec<&Vec<u8>>> = vec![Vec::new(); N_CLASSES];
        for (t, &l) in tiles.iter().zip(&audio.labels) {
            by_class[l as usize].push(t);
        }
        (0..per)
            .flat_map(|k| by_class.iter().map(move |col| col[k].clone()))
            .collect::<Vec<_>>()
    } else {
        tiles.clone()
    };
    write_sheet(
        &g.out.join("contact_sheet.pgm"),
        &sheet,
        side,
        10.min(sheet.len().max(1)),
    )?;
    println!("wrote {} images to {}", tiles.len(), g.out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    g: &Globals,
    param: Option<String>,
    values: Option<String>,
    data: Option<PathBuf>,
    hidden: Option<usize>,
    limit: Option<usize>,
    test_limit: Option<usize>,
    hyper: &HyperArgs,
) -> Result<(), CliError> {
    let f = &g.file;
    let param = f
        .maybe("param", param)?
        .ok_or_else(|| CliError::Config("sweep needs --param".into()))?;
    let values: Vec<String> = f.list("values", values.as_deref(), "")?;
    if values.iter().any(|v| v.is_empty()) {
        return Err(CliError::Config("sweep needs --values".into()));
    }
    let dir = data_dir(g, "data", data)?;
    let hidden = f.pick("hidden", hidden, 196)?;
    let limit = f.maybe("limit", limit)?;
    let test_limit = f.maybe("test_limit", test_limit)?;
    let mut base = train_config(g, hyper, TrainConfig::autoencoder())?;
    base.hidden_steps = base.steps;
    base.alpha = alphas(g, hyper, base.alpha)?[0];

    let bad = |v: &str| CliError::Config(format!("{param} value {v:?} is not valid"));
    let mut runs = Vec::new();
    for v in &values {
        let mut cfg = base;
        let mut h = hidden;
        match param.as_str() {
            "alpha" => cfg.alpha = v.parse().map_err(|_| bad(v))?,
            "steps" => {
                cfg.steps = v.parse().map_err(|_| bad(v))?;
                cfg.hidden_steps = cfg.steps;
            }
            "lr" => cfg.lr = v.parse().map_err(|_| bad(v))?,
            "mask" => cfg.use_mask = parse_mask(v)?,
            "hidden" => h = v.parse().map_err(|_| bad(v))?,
            other => {
                return Err(CliError::Config(format!(
                    "cannot sweep {other:?}; use alpha, hidden, steps, lr or mask"
                )))
            }
        }
        cfg.validate()?;
        runs.push((v.clone(), cfg, h));
    }

    let train = limited(load_images(&dir, "train")?, limit);
    let test = limited(load_images(&dir, "t10k")?, test_limit);
    ensure_dir(&g.out)?;
    let mut summary = format!("{param},test_spike_mse,test_mse,final_vmem_loss\n");
    for (v, cfg, h) in runs {
        let (net, log) = train_autoencoder(&train.scaled_all(), h, &cfg, |_| {})?;
        write_text(
            &g.out.join(format!("train_log_{param}{v}.csv")),
            &batch_log_csv(&log),
        )?;
        save_checkpoint(&net, &cfg, g.out.join(format!("ae_{param}{v}.saec")))?;
        let r = evaluate_autoencoder(
            &net,
            &test,
            cfg.steps,
            cfg.max_rate,
            &mut stream(cfg.seed, Stream::Evaluation),
        )?;
        let last = log.last().map_or(f64::NAN, |b| b.vmem_loss);
        let _ = writeln!(summary, "{v},{},{},{last}", r.spike_mse, r.pixel_mse);
        println!(
            "{param}={v}: test spike-mse {:.4}, mse {:.4}",
            r.spike_mse, r.pixel_mse
        );
    }
    write_text(&g.out.join("summary.csv"), &summary)
}

fn gen_spectrograms(
    g: &Globals,
    classes: Option<usize>,
    per_class: Option<usize>,
    channels: Option<usize>,
    frames: Option<usize>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let f = &g.file;
    let classes = f.pick("classes", classes, 10)?;
    if classes > N_CLASSES {
        return Err(CliError::Config(format!("at most {N_CLASSES} classes")));
    }
    let set = synth_spectrograms(
        classes,
        f.pick("per_class", per_class, 20)?,
        f.pick("channels", channels, 39)?,
        f.pick("frames", frames, 100)?,
        &mut stream(g.seed.unwrap_or(0), Stream::Synthetic),
    );
    let path = match f.maybe("output", output)? {
        Some(p) => p,
        None => {
            ensure_dir(&g.out)?;
            g.out.join("spectrograms.spc1")
        }
    };
    save_spectrograms(&set, &path)?;
    println!("wrote {} spectrograms to {}", set.len(), path.display());
    Ok(())
}
