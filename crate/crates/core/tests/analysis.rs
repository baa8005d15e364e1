mod common;

use common::{random_model, record, rng};
use sparse_evo_core::analysis::DEFAULT_ABLATION_STEP;
use sparse_evo_core::{
    ablation_curve, accuracy, degree_histogram, evolve_epoch, input_degrees, snapshot_curves,
    AblationOrder, Dataset, EvolutionPolicy, SequentialCosine, TrainConfig,
};
use rand::Rng;

fn config() -> TrainConfig {
    TrainConfig {
        zeta: 0.3,
        ..TrainConfig::default()
    }
}

fn dataset(n_features: usize, n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..n_features).map(|_| r.random_range(-1.0..1.0)).collect();
        labels.push(usize::from(x[0] > 0.0));
        features.extend(x);
    }
    Dataset::new(features, n_features, labels).unwrap()
}

#[test]
fn untrained_degrees_are_row_sums() {
    let mut r = rng(1);
    let model = random_model(&[30, 20, 2], 0.3, EvolutionPolicy::Set, config(), &mut r);
    let profile = input_degrees(&model, false);
    let mut expected = vec![0; 30];
    for e in model.topology().layer(0).edges() {
        expected[e.source as usize] += 1;
    }
    assert_eq!(profile.degrees, expected);
    assert_eq!(profile.total(), model.topology().layer(0).len());
    assert_eq!(profile.excluded_epoch, None);
    assert_eq!(input_degrees(&model, true).degrees, expected);
}

#[test]
fn final_epoch_additions_are_excluded() {
    let mut r = rng(2);
    let mut model = random_model(&[30, 20, 2], 0.3, EvolutionPolicy::CoDaSet, config(), &mut r);
    for _ in 0..3 {
        let mut records = record(&model, &common::random_samples(10, 30, &mut r));
        evolve_epoch(&mut model, &mut records, &SequentialCosine, &mut r).unwrap();
    }
    let first = model.topology().layer(0);
    let older = first.edges().iter().filter(|e| e.birth_epoch < 3).count();
    let with = input_degrees(&model, false);
    let without = input_degrees(&model, true);
    assert_eq!(with.total(), first.len());
    assert_eq!(without.total(), older);
    assert_eq!(without.excluded_epoch, Some(3));
    assert!(older < first.len());
}

#[test]
fn ablation_endpoints() {
    let mut r = rng(3);
    let model = random_model(&[50, 16, 2], 0.4, EvolutionPolicy::Set, config(), &mut r);
    let data = dataset(50, 600, 4);
    let curve = ablation_curve(&model, &data, AblationOrder::Ascending, 10).unwrap();
    assert_eq!(curve.points[0], (0, accuracy(&model, &data).unwrap()));
    let removed: Vec<usize> = curve.points.iter().map(|p| p.0).collect();
    assert_eq!(removed, vec![0, 10, 20, 30, 40, 50]);
    assert!(curve.points.iter().all(|&(_, a)| (0.0..=1.0).contains(&a)));
    let prior = data.class_priors().into_iter().fold(0.0, f64::max);
    assert!(curve.accuracy_at(50).unwrap() <= prior + 0.05);
    assert!(ablation_curve(&model, &data, AblationOrder::Descending, 50).is_err());
    assert!(ablation_curve(&model, &data, AblationOrder::Descending, 0).is_err());
    assert!(ablation_curve(&model, &dataset(49, 10, 1), AblationOrder::Ascending, 5).is_err());
}

#[test]
fn snapshot_of_one_checkpoint_equals_its_curve() {
    let mut r = rng(5);
    let model = random_model(&[40, 12, 2], 0.4, EvolutionPolicy::Set, config(), &mut r);
    let data = dataset(40, 100, 6);
    let curves = snapshot_curves(std::slice::from_ref(&model), &data, DEFAULT_ABLATION_STEP).unwrap();
    assert_eq!(
        curves,
        vec![ablation_curve(&model, &data, AblationOrder::Ascending, DEFAULT_ABLATION_STEP).unwrap()]
    );
    let other = random_model(&[41, 12, 2], 0.4, EvolutionPolicy::Set, config(), &mut r);
    assert!(snapshot_curves(&[model, other], &data, 5).is_err());
}

#[test]
fn histogram_counts_every_input() {
    let mut r = rng(7);
    let model = random_model(&[64, 30, 2], 0.25, EvolutionPolicy::Set, config(), &mut r);
    let profile = input_degrees(&model, false);
    let hist = degree_histogram(&profile, 7).unwrap();
    assert_eq!(hist.counts.iter().sum::<usize>(), 64);
    let max = *profile.degrees.iter().max().unwrap() as f64;
    assert!((hist.bin_width() - max / 7.0).abs() < 1e-12);
    assert_eq!(hist.edges.len(), 8);
}
