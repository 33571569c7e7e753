use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_seiswarp");

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn outputs(dir: &Path) -> Vec<String> {
    manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

/// Small two-class run that finishes quickly.
const SMALL: &str = r#"
[dataset]
n_per_class = 12
[train]
k_init = 4
max_epochs = 300
stagnation_epochs = 300
batch_size = 24
"#;

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["--help"], dir.path())), 0);
    assert_eq!(code(&run(&["--version"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&[], dir.path())), 1);
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&run(&["fit", "--scale", "bark"], dir.path())), 1);
    assert_eq!(code(&run(&["fit", "--seed", "-3"], dir.path())), 1);
    let bad = write_config(dir.path(), "bad.toml", "[train]\nk_itit = 3\n");
    assert_eq!(code(&run(&["fit", "--config", bad.to_str().unwrap()], dir.path())), 1);
    assert_eq!(code(&run(&["fit", "--config", "missing.toml"], dir.path())), 1);
    assert_eq!(code(&run(&["assign"], dir.path())), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[data]\nsource = \"files\"\nfiles = [\"nowhere.csv\"]\n",
    );
    let o = run(&["fit", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("load"));

    let cfg = write_config(
        dir.path(),
        "k.toml",
        "[dataset]\nn_per_class = 2\n[train]\nk_init = 10\n",
    );
    assert_eq!(code(&run(&["fit", "--config", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn numeric_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // loads fine, but the covariance has a negative eigenvalue
    fs::write(
        dir.path().join("m.gmm"),
        "seiswarp-gmm 1\ncomponents 1\ndim 2\ncovariance_mode full\nweights\n1\nmeans\n0 0\ncovariances\n1 2\n2 1\n",
    )
    .unwrap();
    fs::write(dir.path().join("f.csv"), "segment_id,label,f0,f1\na,,0.5,0.5\n").unwrap();
    let o = run(
        &["assign", "--model", "m.gmm", "--features", "f.csv", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 3, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_silent_channel_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.toml",
        "[synthetic]\nchannels = 1\nduration_s = 2.0\nnoise_floor = 0.0\n",
    );
    ok(&run(
        &["synth", "--config", cfg.to_str().unwrap(), "--out", "s"],
        dir.path(),
    ));
    let waves: Vec<String> = outputs(&dir.path().join("s"))
        .into_iter()
        .filter(|f| !f.contains(".labels."))
        .collect();
    assert_eq!(waves, vec!["SYN000.csv".to_string()]);
    let text = fs::read_to_string(dir.path().join("s/SYN000.csv")).unwrap();
    let samples: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(samples.len(), 200);
    assert!(samples.iter().all(|&v| v == 0.0));
}

#[test]
fn synth_is_reproducible_and_counts_channels() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[synthetic]\nchannels = 3\nduration_s = 20.0\n[[synthetic.events]]\nkind = \"burst\"\nonset_s = 2.0\nduration_s = 3.0\ncenter_freq_hz = 8.0\nbandwidth_hz = 2.0\namplitude = 1.0\n";
    let cfg = write_config(dir.path(), "s.toml", text);
    for out in ["a", "b"] {
        ok(&run(
            &["synth", "--config", cfg.to_str().unwrap(), "--out", out],
            dir.path(),
        ));
    }
    let a = outputs(&dir.path().join("a"));
    assert_eq!(a.iter().filter(|f| !f.contains(".labels.")).count(), 3);
    assert_eq!(manifest(&dir.path().join("a"))["summary"]["channels"], 3);
    for f in &a {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    // distinct channels get distinct noise
    assert_ne!(
        fs::read(dir.path().join("a/SYN000.csv")).unwrap(),
        fs::read(dir.path().join("a/SYN001.csv")).unwrap()
    );
}

fn read_spectrogram_csv(p: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrogram_images_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let synth = write_config(
        dir.path(),
        "s.toml",
        "[synthetic]\nchannels = 1\nduration_s = 25.6\nnoise_floor = 0.0\n",
    );
    ok(&run(
        &["synth", "--config", synth.to_str().unwrap(), "--out", "w"],
        dir.path(),
    ));
    let cfg = write_config(
        dir.path(),
        "p.toml",
        "[data]\nsource = \"files\"\nfiles = [\"w/SYN000.csv\"]\n[spectrogram]\nscales = [\"mel\", \"warped:2595,1\"]\n",
    );
    ok(&run(
        &["spectrogram", "--config", cfg.to_str().unwrap(), "--out", "sp"],
        dir.path(),
    ));
    let sp = dir.path().join("sp");
    let outs = outputs(&sp);
    // two segments, each emitted for both scales before the next segment
    let images: Vec<&String> = outs.iter().filter(|f| f.ends_with(".pgm")).collect();
    assert_eq!(
        images,
        vec![
            "spectrograms/mel/0000.pgm",
            "spectrograms/warped_2595_1/0000.pgm",
            "spectrograms/mel/0001.pgm",
            "spectrograms/warped_2595_1/0001.pgm",
        ]
    );

    for img in images {
        let bytes = fs::read(sp.join(img)).unwrap();
        let text = String::from_utf8_lossy(&bytes[..20]).to_string();
        let mut parts = text.split_whitespace();
        assert_eq!(parts.next(), Some("P5"));
        let w: usize = parts.next().unwrap().parse().unwrap();
        let h: usize = parts.next().unwrap().parse().unwrap();
        let rows = read_spectrogram_csv(&sp.join(img.replace(".pgm", ".csv")));
        assert!(rows.iter().all(|r| r.len() == 16), "one column per filter");
        assert_eq!((w, h), (rows.len(), 16), "frames across, filters down");
        // a silent waveform sits on the floor everywhere
        let pixels = &bytes[bytes.len() - w * h..];
        assert!(pixels.iter().all(|&p| p == pixels[0]));
        assert!(rows.iter().all(|r| r.iter().all(|&v| v == -100.0)));
    }
}

#[test]
fn spectrogram_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.toml", "[dataset]\nn_per_class = 1\n");
    ok(&run(
        &[
            "spectrogram",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "sp",
            "--scale",
            "mel",
        ],
        dir.path(),
    ));
    let p = dir.path().join("sp/spectrograms/mel/0000.csv");
    let s = seiswarp::spectral::load_spectrogram_csv::<f64>(&p).unwrap();
    let segs = seiswarp::signal::low_frequency_two_class::<f64>(&seiswarp::signal::LowFrequencyTwoClass {
        n_per_class: 1,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let direct = seiswarp::pipeline::compute_spectrograms(
        &segs[..1],
        seiswarp::spectral::FrequencyScale::mel(),
        &Default::default(),
    )
    .unwrap();
    assert_eq!(s.shape(), direct[0].shape());
    for (a, b) in s.values().iter().zip(direct[0].values()) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }
}

/// Mixture read straight from the text file, no library code involved.
struct Mixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<Vec<f64>>>,
}

fn parse_mixture(text: &str) -> Mixture {
    let lines: Vec<&str> = text.lines().collect();
    let k: usize = lines[1].strip_prefix("components ").unwrap().parse().unwrap();
    let d: usize = lines[2].strip_prefix("dim ").unwrap().parse().unwrap();
    assert_eq!(lines[3], "covariance_mode full");
    let nums = |l: &str| {
        l.split_whitespace()
            .map(|v| v.parse::<f64>().unwrap())
            .collect::<Vec<_>>()
    };
    let weights = nums(lines[5]);
    let means = (0..k).map(|i| nums(lines[7 + i])).collect();
    let start = 8 + k;
    let covs = (0..k)
        .map(|c| (0..d).map(|r| nums(lines[start + c * d + r])).collect())
        .collect();
    Mixture { weights, means, covs }
}

/// Summed negative log-likelihood, via a textbook Cholesky and log-sum-exp.
fn oracle_nll(m: &Mixture, rows: &[Vec<f64>]) -> f64 {
    let d = m.means[0].len();
    let chols: Vec<Vec<Vec<f64>>> = m
        .covs
        .iter()
        .map(|a| {
            let mut l = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..=i {
                    let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                    l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
                }
            }
            l
        })
        .collect();
    let mut total = 0.0;
    for x in rows {
        let terms: Vec<f64> = (0..m.weights.len())
            .map(|c| {
                let l = &chols[c];
                let mut z = vec![0.0; d];
                for i in 0..d {
                    let s: f64 = x[i] - m.means[c][i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>();
                    z[i] = s / l[i][i];
                }
                let maha: f64 = z.iter().map(|v| v * v).sum();
                let logdet: f64 = 2.0 * (0..d).map(|i| l[i][i].ln()).sum::<f64>();
                m.weights[c].ln() - 0.5 * (maha + logdet + d as f64 * (2.0 * std::f64::consts::PI).ln())
            })
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        total -= top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    }
    total
}

fn feature_rows(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(p).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (
                cells[0].to_string(),
                cells[2..].iter().map(|c| c.parse().unwrap()).collect(),
            )
        })
        .unzip()
}

#[test]
fn fit_outputs_reload_and_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", SMALL);
    ok(&run(
        &[
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "f",
            "--scale",
            "warped:2595,1",
        ],
        dir.path(),
    ));
    let f = dir.path().join("f");
    let mut outs = outputs(&f);
    outs.sort();
    assert_eq!(outs, ["assignments.csv", "features.csv", "loss.csv", "model.gmm"]);

    let loss = fs::read_to_string(f.join("loss.csv")).unwrap();
    let last: f64 = loss.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let mixture = parse_mixture(&fs::read_to_string(f.join("model.gmm")).unwrap());
    let (ids, rows) = feature_rows(&f.join("features.csv"));
    assert_eq!(rows.len(), 24);
    let recomputed = oracle_nll(&mixture, &rows);
    assert!(
        (recomputed - last).abs() <= 1e-6 * last.abs().max(1.0),
        "{recomputed} vs {last}"
    );

    let assignments = fs::read_to_string(f.join("assignments.csv")).unwrap();
    let lines: Vec<&str> = assignments.lines().collect();
    assert_eq!(lines[0], "segment_id,cluster_id,max_posterior");
    assert_eq!(lines.len() - 1, 24);
    for (line, id) in lines[1..].iter().zip(&ids) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], id);
        let k: usize = cells[1].parse().unwrap();
        assert!(k < mixture.weights.len());
        let p: f64 = cells[2].parse().unwrap();
        assert!(p >= 1.0 / mixture.weights.len() as f64 - 1e-12 && p <= 1.0 + 1e-12);
    }
}

#[test]
fn assign_matches_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", SMALL);
    ok(&run(
        &["fit", "--config", cfg.to_str().unwrap(), "--out", "f"],
        dir.path(),
    ));
    ok(&run(
        &[
            "assign",
            "--model",
            "f/model.gmm",
            "--features",
            "f/features.csv",
            "--out",
            "a",
        ],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("a/assignments.csv")).unwrap(),
        fs::read(dir.path().join("f/assignments.csv")).unwrap()
    );
}

#[test]
fn fit_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", SMALL);
    let c = cfg.to_str().unwrap();
    ok(&run(&["fit", "--config", c, "--out", "a"], dir.path()));
    ok(&run(&["fit", "--config", c, "--out", "b"], dir.path()));
    ok(&run(&["fit", "--config", c, "--out", "s", "--seed", "7"], dir.path()));
    let read = |d: &str| fs::read(dir.path().join(d).join("loss.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("s"));
    assert_eq!(manifest(&dir.path().join("s"))["seed"], 7);
}

#[test]
fn features_command_writes_matrix_and_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", SMALL);
    ok(&run(
        &["features", "--config", cfg.to_str().unwrap(), "--out", "x"],
        dir.path(),
    ));
    let (ids, rows) = feature_rows(&dir.path().join("x/features.csv"));
    assert_eq!(ids.len(), 24);
    assert!(rows.iter().all(|r| r.len() == 8));
    let cnn = seiswarp::features::load_cnn::<f64>(&dir.path().join("x/cnn.txt")).unwrap();
    assert_eq!(cnn.config.input_shape.1, 16);
}

fn compare_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("compare.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn compare_identity_columns_are_equal() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}[compare]\nbaseline = \"warped:2595,700\"\nwarped = \"warped:2595,700\"\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    ok(&run(
        &["compare", "--config", cfg.to_str().unwrap(), "--out", "c"],
        dir.path(),
    ));
    let rows = compare_rows(&dir.path().join("c"));
    assert_eq!(rows.len(), 2, "header plus one row");
    assert_eq!(rows[1][1], rows[1][2]);
    assert_eq!(rows[1][3], rows[1][4]);
    assert!(rows[1][6].is_empty());
    assert!(fs::read_to_string(dir.path().join("c/compare.txt"))
        .unwrap()
        .starts_with("depth"));
}

#[test]
fn compare_columns_differ_only_in_scale() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}[compare]\nwarped = \"warped:2595,1\"\n[[compare.depths]]\nlabel = \"one\"\nblocks = [{{ filters = 8, stride = 1 }}]\n[[compare.depths]]\nlabel = \"three\"\nblocks = [{{ filters = 8, stride = 1 }}, {{ filters = 16, stride = 2 }}, {{ filters = 16, stride = 1 }}]\n"
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    ok(&run(
        &["compare", "--config", cfg.to_str().unwrap(), "--out", "c"],
        dir.path(),
    ));
    let rows = compare_rows(&dir.path().join("c"));
    assert_eq!(
        rows.iter().skip(1).map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["one", "three"]
    );
    let cols: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c/compare_columns.json")).unwrap()).unwrap();
    for col in cols.as_array().unwrap() {
        assert_eq!(col["baseline"]["pipeline"], col["warped"]["pipeline"]);
        assert_eq!(col["baseline"]["scale"], "linear");
        assert_eq!(col["warped"]["scale"], "warped:2595,1");
    }
    assert_ne!(
        cols[0]["baseline"]["pipeline"]["cnn"],
        cols[1]["baseline"]["pipeline"]["cnn"]
    );
}

#[test]
fn compare_reports_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    // two blocks of stride 4 shrink the 17 x 16 input below one cell
    let text = format!(
        "{SMALL}[compare]\nwarped = \"mel\"\n[[compare.depths]]\nlabel = \"ok\"\nblocks = [{{ filters = 8, stride = 1 }}]\n[[compare.depths]]\nlabel = \"broken\"\nblocks = [{{ filters = 8, stride = 4 }}, {{ filters = 8, stride = 4 }}, {{ filters = 8, stride = 4 }}]\n"
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    let o = run(
        &["compare", "--config", cfg.to_str().unwrap(), "--out", "c"],
        dir.path(),
    );
    ok(&o);
    let rows = compare_rows(&dir.path().join("c"));
    assert!(rows[1][6].is_empty());
    assert!(!rows[2][6].is_empty());
    assert!(rows[2][1].is_empty() && rows[2][2].is_empty());
}

const SEARCH: &str = r#"
[dataset]
n_per_class = 10
[train]
k_init = 3
max_epochs = 100
stagnation_epochs = 100
batch_size = 20
[search]
n_trials = 4
inner_max_epochs = 30
"#;

#[test]
fn search_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let text = SEARCH.replace("n_trials = 4", "n_trials = 1");
    let cfg = write_config(dir.path(), "s.toml", &text);
    ok(&run(
        &["search", "--config", cfg.to_str().unwrap(), "--out", "s"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("s/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn search_best_is_csv_minimum_and_reruns_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SEARCH);
    for out in ["a", "b"] {
        ok(&run(
            &["search", "--config", cfg.to_str().unwrap(), "--out", out],
            dir.path(),
        ));
    }
    let a = fs::read_to_string(dir.path().join("a/trials.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b/trials.csv")).unwrap());
    let best: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/best.json")).unwrap()).unwrap();
    let losses: Vec<(usize, f64)> = a
        .lines()
        .skip(1)
        .filter_map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            cells[3].parse().ok().map(|v| (cells[0].parse().unwrap(), v))
        })
        .collect();
    let min = losses
        .iter()
        .cloned()
        .fold((0, f64::INFINITY), |m, x| if x.1 < m.1 { x } else { m });
    assert_eq!(best["trial"].as_u64().unwrap() as usize, min.0);
    assert_eq!(best["search_loss"].as_f64().unwrap(), min.1);
}
