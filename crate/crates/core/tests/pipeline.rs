//! End-to-end composition checked against the stages run by hand.

use seiswarp::cluster::{assign_all, fit, gmm_from_text, gmm_to_text, nll, TrainConfig};
use seiswarp::features::{forward, init_cnn, stack_features, CnnConfig};
use seiswarp::pipeline::{run_pipeline, FeatureScaling, PipelineSettings, Scaler};
use seiswarp::search::{search_constants, SearchConfig};
use seiswarp::signal::{low_frequency_two_class, LowFrequencyTwoClass, Segment};
use seiswarp::spectral::FrequencyScale;

fn dataset<T: seiswarp::Scalar>(n_per_class: usize) -> Vec<Segment<T>> {
    low_frequency_two_class(&LowFrequencyTwoClass {
        n_per_class,
        ..Default::default()
    })
    .unwrap()
}

fn settings() -> PipelineSettings {
    PipelineSettings {
        train: TrainConfig {
            k_init: 3,
            max_epochs: 80,
            batch_size: 10,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn pipeline_equals_manual_composition() {
    let segs = dataset::<f64>(5);
    let st = settings();
    let scale = FrequencyScale::warped(2595.0, 1.0).unwrap();
    let out = run_pipeline(&segs, scale, &st).unwrap();

    let builder = st.spectral.builder(scale, 100.0).unwrap();
    let specs: Vec<_> = segs.iter().map(|s| builder.compute(s).unwrap()).collect();
    let cnn = init_cnn::<f64>(&CnnConfig {
        input_shape: specs[0].shape(),
        ..st.cnn.clone()
    })
    .unwrap();
    let raw = stack_features(&specs.iter().map(|s| forward(&cnn, s).unwrap()).collect::<Vec<_>>()).unwrap();
    let z = Scaler::fit(&raw, FeatureScaling::Standardize).unwrap().apply(&raw);
    let fitted = fit(z.view(), &st.train).unwrap();

    assert_eq!(out.spectrograms, specs);
    assert_eq!(out.features, z);
    assert_eq!(out.fit.loss_history, fitted.loss_history);
    assert_eq!(out.fit.model, fitted.model);
    let ids: Vec<usize> = assign_all(&fitted.model, z.view())
        .unwrap()
        .iter()
        .map(|a| a.cluster_id)
        .collect();
    assert_eq!(out.cluster_ids(), ids);
    assert_eq!(out.loss(), nll(&fitted.model, z.view()).unwrap());
}

#[test]
fn saved_model_reproduces_the_final_loss() {
    let segs = dataset::<f64>(5);
    let out = run_pipeline(&segs, FrequencyScale::mel(), &settings()).unwrap();
    let text = gmm_to_text(&out.fit.model);
    let back = gmm_from_text::<f64>(std::path::Path::new("mem"), &text).unwrap();
    assert_eq!(nll(&back, out.features.view()).unwrap(), out.loss());
}

#[test]
fn single_precision_pipeline_runs() {
    let segs = dataset::<f32>(5);
    let out = run_pipeline(&segs, FrequencyScale::warped(2595.0f32, 1.0).unwrap(), &settings()).unwrap();
    assert!(out.loss().is_finite());
    assert_eq!(out.assignments.len(), 10);
    assert!(out.fit.best_nll <= out.fit.initial_nll);
}

#[test]
fn augmentation_only_adds_training_rows() {
    let segs = dataset::<f64>(5);
    let mut st = settings();
    st.augment = Some(seiswarp::augment::AugmentPolicy {
        copies_per_item: 2,
        ..Default::default()
    });
    let out = run_pipeline(&segs, FrequencyScale::mel(), &st).unwrap();
    assert_eq!(out.n_train, 30);
    assert_eq!(out.features.nrows(), 10);
    assert_eq!(out.assignments.len(), 10);
}

#[test]
fn search_returns_logged_minimum_and_reruns_exactly() {
    let segs = dataset::<f64>(5);
    let scfg = SearchConfig {
        n_trials: 6,
        inner_max_epochs: 20,
        seed: 3,
        ..Default::default()
    };
    let a = search_constants(&segs, &scfg, &settings()).unwrap();
    let b = search_constants(&segs, &scfg, &settings()).unwrap();
    assert_eq!(a, b);
    let min = a
        .trials
        .iter()
        .filter_map(|t| t.outcome.as_ref().ok().copied())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_loss, min);
    assert_eq!(a.trials[a.best].outcome, Ok(min));
    for t in &a.trials {
        assert!((100.0..=1e4).contains(&t.c1) && (0.1..=1000.0).contains(&t.c2));
    }
}
