//! One function per subcommand. Each writes into `cfg.out` and finishes
//! with `manifest.json`.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde_json::json;

use seiswarp::cluster::{
    adjusted_rand_index, assign_all, gmm_to_text, load_gmm, loss_history_to_csv, nll, purity, Assignment,
};
use seiswarp::features::cnn_to_text;
use seiswarp::pipeline::{
    cnn_for_shape, compute_spectrograms, extract_features, run_pipeline, PipelineOutput, PipelineSettings,
};
use seiswarp::search::{refit_best, search_constants, trials_to_csv};
use seiswarp::signal::{
    generate_synthetic, load_labels, load_waveform, low_frequency_two_class, save_labels, save_waveform, segment,
    segment_labeled, Segment, SyntheticSpec, WaveformFormat,
};
use seiswarp::spectral::{spectrogram_to_csv, spectrogram_to_pgm, FrequencyScale};

use crate::config::{parse_scale, Config, DataSource};
use crate::error::{CliError, StageExt};
use crate::output::{aligned_table, csv, Outputs};

type Scale = FrequencyScale<f64>;

pub fn synth(cfg: &Config) -> Result<(), CliError> {
    let sc = &cfg.synthetic;
    let format = match sc.format.as_str() {
        "csv" => WaveformFormat::Csv,
        "wav" => WaveformFormat::Wav,
        other => {
            return Err(CliError::Usage(format!(
                "synthetic.format must be csv or wav, got `{other}`"
            )))
        }
    };
    if sc.channels == 0 {
        return Err(CliError::Usage("synthetic.channels must be >= 1".into()));
    }
    let mut out = Outputs::create(&cfg.out)?;
    for i in 0..sc.channels {
        let spec = SyntheticSpec {
            duration_s: sc.duration_s,
            sample_rate: sc.sample_rate,
            events: sc.events.clone(),
            noise_floor: sc.noise_floor,
            seed: cfg.channel_seed(i),
            channel_id: format!("SYN{i:03}"),
        };
        let (wave, labels) = generate_synthetic::<f64>(&spec).stage("synth")?;
        let stem = format!("SYN{i:03}");
        let wave_rel = format!("{stem}.{}", sc.format);
        let labels_rel = format!("{stem}.labels.csv");
        save_waveform(&out.path(&wave_rel), &wave, format).stage("synth")?;
        save_labels(&out.path(&labels_rel), &labels).stage("synth")?;
        out.record(wave_rel);
        out.record(labels_rel);
    }
    out.note("channels", json!(sc.channels));
    out.finish("synth", cfg)?;
    println!("synth: wrote {} channel(s) to {}", sc.channels, cfg.out.display());
    Ok(())
}

/// `<dir>/<stem>.labels.csv` next to a waveform file.
fn labels_path(wave: &Path) -> PathBuf {
    let stem = wave
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    wave.with_file_name(format!("{stem}.labels.csv"))
}

/// The segments every analysis command works on.
pub fn load_segments(cfg: &Config) -> Result<Vec<Segment<f64>>, CliError> {
    match cfg.data.source {
        DataSource::TwoClass => low_frequency_two_class(&cfg.dataset).stage("dataset"),
        DataSource::Files => {
            if cfg.data.files.is_empty() {
                return Err(CliError::Usage("data.source = \"files\" needs data.files".into()));
            }
            let mut all = Vec::new();
            for f in &cfg.data.files {
                let format = WaveformFormat::from_path(f).ok_or_else(|| {
                    CliError::Usage(format!("{}: unknown waveform extension (csv, txt or wav)", f.display()))
                })?;
                let wave = load_waveform::<f64>(f, format).stage("load")?;
                let lp = labels_path(f);
                let segs = if lp.exists() {
                    let labels = load_labels(&lp).stage("load")?;
                    segment_labeled(&wave, &labels, cfg.data.window_s, cfg.data.stride_s).stage("segment")?
                } else {
                    segment(&wave, cfg.data.window_s, cfg.data.stride_s).stage("segment")?
                };
                all.extend(segs);
            }
            if all.is_empty() {
                return Err(CliError::Stage {
                    stage: "segment",
                    source: seiswarp::Error::NotEnoughData("no complete window in the input files".into()),
                });
            }
            Ok(all)
        }
    }
}

/// Ground-truth labels when every segment carries one.
fn truth(segments: &[Segment<f64>]) -> Option<Vec<&str>> {
    segments.iter().map(|s| s.label.as_deref()).collect()
}

pub fn spectrogram(cfg: &Config) -> Result<(), CliError> {
    let scales: Vec<Scale> = if cfg.spectrogram.scales.is_empty() {
        vec![cfg.scale()?]
    } else {
        cfg.spectrogram
            .scales
            .iter()
            .map(|s| parse_scale(s))
            .collect::<Result<_, _>>()?
    };
    let segments = load_segments(cfg)?;
    let per_scale = scales
        .iter()
        .map(|&s| compute_spectrograms(&segments, s, &cfg.spectral).stage("spectrogram"))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outputs::create(&cfg.out)?;
    let floor = cfg.spectral.floor_db;
    // segment-major so every scale of one segment is written together
    for i in 0..segments.len() {
        for (scale, specs) in scales.iter().zip(&per_scale) {
            let stem = format!("spectrograms/{}/{i:04}", scale.tag());
            out.write(&format!("{stem}.csv"), spectrogram_to_csv(&specs[i]))?;
            out.write(&format!("{stem}.pgm"), spectrogram_to_pgm(&specs[i], floor))?;
        }
    }
    out.write("segments.csv", segments_csv(&segments))?;
    out.note("segments", json!(segments.len()));
    out.note(
        "scales",
        json!(scales.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
    );
    out.finish("spectrogram", cfg)?;
    println!("spectrogram: {} segment(s) x {} scale(s)", segments.len(), scales.len());
    Ok(())
}

fn segments_csv(segments: &[Segment<f64>]) -> String {
    csv(
        &["index", "segment_id", "label"],
        segments
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i.to_string(), s.id(), s.label.clone().unwrap_or_default()]),
    )
}

/// `segment_id,label,f0,...`; `label` is empty when unknown.
fn features_csv(segments: &[Segment<f64>], x: &Array2<f64>) -> String {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    let mut header = vec!["segment_id", "label"];
    header.extend(names.iter().map(String::as_str));
    csv(
        &header,
        segments.iter().zip(x.rows()).map(|(s, row)| {
            let mut r = vec![s.id(), s.label.clone().unwrap_or_default()];
            r.extend(row.iter().map(|v| v.to_string()));
            r
        }),
    )
}

/// Reads a file written by [`features_csv`].
pub fn read_features_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>), CliError> {
    let data_err = |line: usize, reason: String| CliError::Stage {
        stage: "load",
        source: seiswarp::Error::Malformed {
            path: path.to_path_buf(),
            line,
            reason,
        },
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Stage {
        stage: "load",
        source: seiswarp::Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    if header.len() < 3 || header[0] != "segment_id" || header[1] != "label" {
        return Err(data_err(1, "expected header `segment_id,label,f0,...`".into()));
    }
    let d = header.len() - 2;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 2 {
            return Err(data_err(
                n + 2,
                format!("row {} has {} cells, expected {}", n + 1, cells.len(), d + 2),
            ));
        }
        ids.push(cells[0].to_string());
        for c in &cells[2..] {
            let v: f64 = c
                .trim()
                .parse()
                .map_err(|_| data_err(n + 2, format!("row {}: `{c}` is not a number", n + 1)))?;
            values.push(v);
        }
    }
    let x = Array2::from_shape_vec((ids.len(), d), values).expect("row lengths checked");
    Ok((ids, x))
}

pub fn features(cfg: &Config) -> Result<(), CliError> {
    let segments = load_segments(cfg)?;
    let specs = compute_spectrograms(&segments, cfg.scale()?, &cfg.spectral).stage("spectrogram")?;
    let cnn = cnn_for_shape::<f64>(&cfg.cnn, specs[0].shape()).stage("features")?;
    let x = extract_features(&cnn, &specs).stage("features")?;
    let mut out = Outputs::create(&cfg.out)?;
    out.write("features.csv", features_csv(&segments, &x))?;
    out.write("cnn.txt", cnn_to_text(&cnn))?;
    out.note("segments", json!(segments.len()));
    out.note("feature_dim", json!(x.ncols()));
    out.finish("features", cfg)?;
    println!("features: {} x {}", x.nrows(), x.ncols());
    Ok(())
}

fn assignments_csv(ids: &[String], a: &[Assignment<f64>]) -> String {
    csv(
        &["segment_id", "cluster_id", "max_posterior"],
        ids.iter()
            .zip(a)
            .map(|(id, a)| vec![id.clone(), a.cluster_id.to_string(), a.max_posterior().to_string()]),
    )
}

/// Purity and ARI against ground truth, when the segments are labelled.
fn scores(segments: &[Segment<f64>], run: &PipelineOutput<f64>) -> Option<(f64, f64)> {
    let t = truth(segments)?;
    let p = run.cluster_ids();
    Some((purity(&t, &p), adjusted_rand_index(&t, &p)))
}

pub fn fit(cfg: &Config) -> Result<(), CliError> {
    let segments = load_segments(cfg)?;
    let scale = cfg.scale()?;
    let run = run_pipeline(&segments, scale, &cfg.pipeline()).stage("fit")?;
    let ids: Vec<String> = segments.iter().map(Segment::id).collect();

    let mut out = Outputs::create(&cfg.out)?;
    out.write("model.gmm", gmm_to_text(&run.fit.model))?;
    out.write("loss.csv", loss_history_to_csv(&run.fit.loss_history))?;
    out.write("assignments.csv", assignments_csv(&ids, &run.assignments))?;
    out.write("features.csv", features_csv(&segments, &run.features))?;
    out.note("scale", json!(scale.to_string()));
    out.note("segments", json!(segments.len()));
    out.note("training_rows", json!(run.n_train));
    out.note("components", json!(run.fit.model.n_components()));
    out.note("epochs", json!(run.fit.epochs_run()));
    out.note("initial_nll", json!(run.fit.initial_nll));
    out.note("final_nll", json!(run.loss()));
    if let Some((p, ari)) = scores(&segments, &run) {
        out.note("purity", json!(p));
        out.note("adjusted_rand_index", json!(ari));
    }
    out.finish("fit", cfg)?;
    println!(
        "fit: {} component(s), NLL {} -> {} over {} epoch(s)",
        run.fit.model.n_components(),
        run.fit.initial_nll,
        run.loss(),
        run.fit.epochs_run()
    );
    Ok(())
}

pub fn assign(cfg: &Config) -> Result<(), CliError> {
    let model_path = cfg
        .assign
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("assign needs a model (--model or assign.model)".into()))?;
    let feat_path = cfg
        .assign
        .features
        .as_ref()
        .ok_or_else(|| CliError::Usage("assign needs features (--features or assign.features)".into()))?;
    let model = load_gmm::<f64>(model_path).stage("load")?;
    let (ids, x) = read_features_csv(feat_path)?;
    let a = assign_all(&model, x.view()).stage("assign")?;
    let loss = nll(&model, x.view()).stage("assign")?;
    let mut out = Outputs::create(&cfg.out)?;
    out.write("assignments.csv", assignments_csv(&ids, &a))?;
    out.note("rows", json!(ids.len()));
    out.note("nll", json!(loss));
    out.finish("assign", cfg)?;
    println!("assign: {} row(s), NLL {loss}", ids.len());
    Ok(())
}

/// One row of the comparison report.
struct Row {
    label: String,
    baseline: Result<(f64, Option<f64>), CliError>,
    warped: Result<(Scale, f64, Option<f64>), CliError>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn compare(cfg: &Config) -> Result<(), CliError> {
    let baseline = parse_scale(&cfg.compare.baseline)?;
    let warped_fixed = match cfg.compare.warped.as_str() {
        "search" => None,
        s => Some(parse_scale(s)?),
    };
    if warped_fixed.is_none() {
        cfg.search
            .validate()
            .map_err(|e| CliError::Usage(format!("search: {e}")))?;
    }
    let segments = load_segments(cfg)?;
    let depths: Vec<(String, PipelineSettings)> = if cfg.compare.depths.is_empty() {
        vec![(format!("{}-block", cfg.cnn.blocks.len()), cfg.pipeline())]
    } else {
        cfg.compare
            .depths
            .iter()
            .map(|d| {
                let mut p = cfg.pipeline();
                p.cnn.blocks = d.blocks.clone();
                (d.label.clone(), p)
            })
            .collect()
    };

    let mut rows = Vec::new();
    let mut columns = Vec::new();
    for (label, settings) in &depths {
        let score = |run: &PipelineOutput<f64>| scores(&segments, run).map(|(p, _)| p);
        let base = run_pipeline(&segments, baseline, settings)
            .stage("compare")
            .map(|r| (r.loss(), score(&r)));
        let warped = match warped_fixed {
            Some(scale) => run_pipeline(&segments, scale, settings)
                .stage("compare")
                .map(|r| (scale, r)),
            None => search_constants(&segments, &cfg.search, settings)
                .and_then(|o| {
                    let scale = FrequencyScale::warped(o.best_c1, o.best_c2)?;
                    Ok((scale, refit_best(&segments, &o, settings)?))
                })
                .stage("compare"),
        }
        .map(|(s, r)| (s, r.loss(), score(&r)));
        let warped_scale = warped
            .as_ref()
            .map(|w| w.0.to_string())
            .unwrap_or_else(|_| cfg.compare.warped.clone());
        // logged in full per column so the shared settings can be checked
        columns.push(json!({
            "depth": label,
            "baseline": { "scale": baseline.to_string(), "pipeline": settings },
            "warped": { "scale": warped_scale, "pipeline": settings },
        }));
        rows.push(Row {
            label: label.clone(),
            baseline: base,
            warped,
        });
    }

    let header = [
        "depth",
        "loss_baseline",
        "loss_warped",
        "purity_baseline",
        "purity_warped",
        "warped_scale",
        "error",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut errors = Vec::new();
            let (lb, pb) = match &r.baseline {
                Ok((l, p)) => (l.to_string(), fmt_opt(*p)),
                Err(e) => {
                    errors.push(format!("baseline: {e}"));
                    (String::new(), String::new())
                }
            };
            let (lw, pw, sw) = match &r.warped {
                Ok((s, l, p)) => (l.to_string(), fmt_opt(*p), s.to_string()),
                Err(e) => {
                    errors.push(format!("warped: {e}"));
                    (String::new(), String::new(), String::new())
                }
            };
            let err = errors.join("; ").replace(',', ";");
            vec![r.label.clone(), lb, lw, pb, pw, sw.replace(',', " "), err]
        })
        .collect();

    let mut out = Outputs::create(&cfg.out)?;
    out.write("compare.csv", csv(&header, cells.clone()))?;
    let table = aligned_table(&header, &cells);
    out.write("compare.txt", &table)?;
    let columns_text = serde_json::to_string_pretty(&columns).expect("columns serialise") + "\n";
    out.write("compare_columns.json", columns_text)?;
    out.note("rows", json!(rows.len()));
    out.note("baseline", json!(baseline.to_string()));
    out.finish("compare", cfg)?;
    print!("{table}");

    // the report is written either way; fail only if no row produced both losses
    if rows.iter().all(|r| r.baseline.is_err() || r.warped.is_err()) {
        let r = rows.into_iter().next().expect("at least one depth");
        return Err(r.baseline.err().or(r.warped.err()).expect("row failed"));
    }
    Ok(())
}

pub fn search(cfg: &Config) -> Result<(), CliError> {
    cfg.search
        .validate()
        .map_err(|e| CliError::Usage(format!("search: {e}")))?;
    let segments = load_segments(cfg)?;
    let settings = cfg.pipeline();
    let outcome = search_constants(&segments, &cfg.search, &settings).stage("search")?;
    let refit = refit_best(&segments, &outcome, &settings).stage("refit")?;
    let best = FrequencyScale::<f64>::warped(outcome.best_c1, outcome.best_c2).stage("search")?;

    let mut out = Outputs::create(&cfg.out)?;
    out.write("trials.csv", trials_to_csv(&outcome.trials))?;
    let mut best_doc = json!({
        "trial": outcome.best,
        "c1": outcome.best_c1,
        "c2": outcome.best_c2,
        "scale": best.to_string(),
        "search_loss": outcome.best_loss,
        "refit_loss": refit.loss(),
        "refit_components": refit.fit.model.n_components(),
    });
    if let Some((p, ari)) = scores(&segments, &refit) {
        best_doc["purity"] = json!(p);
        best_doc["adjusted_rand_index"] = json!(ari);
    }
    out.write(
        "best.json",
        serde_json::to_string_pretty(&best_doc).expect("best serialises") + "\n",
    )?;
    out.write("refit_loss.csv", loss_history_to_csv(&refit.fit.loss_history))?;
    let failed = outcome.trials.iter().filter(|t| t.outcome.is_err()).count();
    out.note("trials", json!(outcome.trials.len()));
    out.note("failed_trials", json!(failed));
    out.note("best_scale", json!(best.to_string()));
    out.finish("search", cfg)?;
    println!(
        "search: best {best} (trial {}), search loss {}, refit loss {} ({failed} of {} trials failed)",
        outcome.best,
        outcome.best_loss,
        refit.loss(),
        outcome.trials.len()
    );
    Ok(())
}
