use std::path::Path;
use std::process::{Command, Output};

use spikecoder::data::{load_checkpoint, load_spectrograms, write_idx, ImageSet};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikecoder"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spikecoder")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Ten classes of 28x28 images, each a vertical bar at a class-specific column.
fn bars(n: usize) -> ImageSet {
    let mut pixels = vec![0u8; n * 784];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 10) as u8;
        labels.push(c);
        let col = 3 + 2 * c as usize;
        for r in 4..24 {
            pixels[i * 784 + r * 28 + col] = 255;
            pixels[i * 784 + r * 28 + col + 1] = 200;
        }
    }
    ImageSet::from_parts(n, 28, 28, pixels, labels).unwrap()
}

fn write_data(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    write_idx(
        &bars(200),
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
    )
    .unwrap();
    write_idx(
        &bars(40),
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn train_eval_and_audio_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let ae_dir = tmp.path().join("ae");

    ok(&[
        "--seed",
        "5",
        "--out",
        p(&ae_dir),
        "train-ae",
        "--data",
        p(&data),
        "--hidden",
        "32",
        "--batch-size",
        "50",
    ]);
    let log = lines(&ae_dir.join("train_log.csv"));
    assert_eq!(log[0], "batch_index,spike_mse_loss,vmem_loss,mask_sparsity");
    assert_eq!(log.len(), 1 + 4);
    let (net, cfg) = load_checkpoint(ae_dir.join("ae.saec")).unwrap();
    assert_eq!(net.topology(), vec![784, 32, 784]);
    assert_eq!((cfg.seed, cfg.batch_size), (5, 50));
    let sheet = std::fs::read(ae_dir.join("reconstructions.pgm")).unwrap();
    assert!(sheet.starts_with(b"P5\n"));

    let ev = tmp.path().join("ev");
    ok(&[
        "--out",
        p(&ev),
        "eval",
        "--checkpoint",
        p(&ae_dir.join("ae.saec")),
        "--data",
        p(&data),
        "--split",
        "test",
    ]);
    let rows = lines(&ev.join("eval.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("split,n_samples,spike_mse,pixel_mse,class_0"));
    assert!(rows[1].starts_with("test,40,"));
    assert_eq!(rows[1].split(',').count(), 14);

    let au = tmp.path().join("au");
    ok(&[
        "--seed",
        "5",
        "--out",
        p(&au),
        "train-audio",
        "--ae",
        p(&ae_dir.join("ae.saec")),
        "--images",
        p(&data),
        "--hidden",
        "16",
        "--epochs",
        "2",
        "--batch-size",
        "10",
        "--steps",
        "8",
        "--hidden-steps",
        "4",
        "--train-per-class",
        "2",
        "--test-per-class",
        "1",
        "--channels",
        "6",
        "--frames",
        "8",
    ]);
    let epochs = lines(&au.join("epoch_mse.csv"));
    assert_eq!(epochs.len(), 3);
    assert_eq!(epochs[0], "epoch,test_mse");
    let (coder, ccfg) = load_checkpoint(au.join("audiocoder.saec")).unwrap();
    assert_eq!(coder.topology(), vec![48, 16, 32]);
    assert_eq!(ccfg.hidden_steps, 4);

    let sy = tmp.path().join("sy");
    ok(&[
        "--seed",
        "5",
        "--out",
        p(&sy),
        "synthesize",
        "--ae",
        p(&ae_dir.join("ae.saec")),
        "--audiocoder",
        p(&au.join("audiocoder.saec")),
        "--train-per-class",
        "2",
        "--test-per-class",
        "1",
        "--channels",
        "6",
        "--frames",
        "8",
        "--class",
        "3",
    ]);
    assert!(sy.join("sample_000_class3.pgm").exists());
    assert!(sy.join("contact_sheet.pgm").exists());
}

#[test]
fn training_is_reproducible_from_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let train = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "--seed",
            "9",
            "--out",
            p(&out),
            "train-ae",
            "--data",
            p(&data),
            "--hidden",
            "16",
            "--limit",
            "100",
        ]);
        std::fs::read(out.join("ae.saec")).unwrap()
    };
    assert_eq!(train("a"), train("b"));
}

#[test]
fn alpha_list_writes_one_run_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let out = tmp.path().join("runs");
    ok(&[
        "--out",
        p(&out),
        "train-ae",
        "--data",
        p(&data),
        "--hidden",
        "8",
        "--limit",
        "100",
        "--alpha",
        "0,0.4",
    ]);
    for a in ["0", "0.4"] {
        assert!(out.join(format!("ae_alpha{a}.saec")).exists());
        assert!(out.join(format!("train_log_alpha{a}.csv")).exists());
    }
    let (_, cfg) = load_checkpoint(out.join("ae_alpha0.4.saec")).unwrap();
    assert_eq!(cfg.alpha, 0.4);
}

#[test]
fn config_file_feeds_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let out = tmp.path().join("runs");
    let conf = tmp.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# small run\ndata = {}\nout = {}\nhidden = 8\nlimit = 100\nsteps = 9\nlr = 0.001\n",
            p(&data),
            p(&out)
        ),
    )
    .unwrap();
    ok(&["--config", p(&conf), "train-ae", "--steps", "6"]);
    let (net, cfg) = load_checkpoint(out.join("ae.saec")).unwrap();
    assert_eq!(net.topology(), vec![784, 8, 784]);
    assert_eq!(cfg.steps, 6);
    assert_eq!(cfg.lr, 0.001);
}

#[test]
fn sweep_tabulates_each_value() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let out = tmp.path().join("sw");
    ok(&[
        "--out",
        p(&out),
        "sweep",
        "--param",
        "mask",
        "--values",
        "on,off",
        "--data",
        p(&data),
        "--hidden",
        "8",
        "--limit",
        "100",
    ]);
    let rows = lines(&out.join("summary.csv"));
    assert_eq!(rows[0], "mask,test_spike_mse,test_mse,final_vmem_loss");
    assert!(rows[1].starts_with("on,"));
    assert!(rows[2].starts_with("off,"));
}

#[test]
fn gen_spectrograms_writes_labelled_set() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("s.spc1");
    ok(&[
        "gen-spectrograms",
        "--classes",
        "3",
        "--per-class",
        "2",
        "--channels",
        "5",
        "--frames",
        "7",
        "--output",
        p(&file),
    ]);
    let set = load_spectrograms(&file).unwrap();
    assert_eq!(set.len(), 6);
    assert_eq!(set.width(), 35);
    let mut labels = set.labels.clone();
    labels.sort();
    assert_eq!(labels, vec![0, 0, 1, 1, 2, 2]);
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args).status.code();

    assert_eq!(code(&["eval"]), Some(2));
    assert_eq!(
        code(&["train-ae", "--alpha", "1.5", "--data", p(tmp.path())]),
        Some(2)
    );
    assert_eq!(code(&["train-ae", "--mask", "maybe"]), Some(2));
    assert_eq!(
        code(&["train-audio", "--ae", "x.saec", "--mode", "C"]),
        Some(2)
    );

    let conf = tmp.path().join("bad.conf");
    std::fs::write(&conf, "colour = blue\n").unwrap();
    assert_eq!(code(&["--config", p(&conf), "gen-spectrograms"]), Some(2));

    let missing = tmp.path().join("nothing.saec");
    assert_eq!(code(&["eval", "--checkpoint", p(&missing)]), Some(3));

    let junk = tmp.path().join("junk.saec");
    std::fs::write(&junk, b"NOPE and some bytes").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", p(&junk)]), Some(3));

    let out = tmp.path().join("o");
    assert_eq!(
        code(&[
            "--out",
            p(&out),
            "train-ae",
            "--data",
            p(&tmp.path().join("absent"))
        ]),
        Some(3)
    );
}

#[test]
fn diverging_training_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_data(&data);
    let out = run(&[
        "--out",
        p(&tmp.path().join("o")),
        "train-ae",
        "--data",
        p(&data),
        "--hidden",
        "8",
        "--limit",
        "100",
        "--lr",
        "1e38",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
