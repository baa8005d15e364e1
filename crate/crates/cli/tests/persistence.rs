use sparse_evo::core::{accuracy, gen_madelon_like, EvolutionPolicy, Model, Normalization, TrainConfig, Trainer};
use sparse_evo::model_io::{load_model, save_model, ModelFile};

fn trained(policy: EvolutionPolicy) -> (Model, sparse_evo::core::Dataset) {
    let mut data = gen_madelon_like(300, 5).unwrap();
    data.normalize(Normalization::ZScore).unwrap();
    let (train, test) = data.split_counts(100, 0).unwrap();
    let cfg = TrainConfig {
        hidden_dims: vec![32, 16],
        epochs: 3,
        eta: 0.05,
        seed: 4,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(Model::new(500, 2, policy, cfg).unwrap());
    for _ in 0..3 {
        t.run_epoch(&train, None).unwrap();
    }
    (t.into_model(), test)
}

#[test]
fn save_load_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for policy in [EvolutionPolicy::Set, EvolutionPolicy::CoPaCoRSet] {
        let (model, test) = trained(policy);
        let path = dir.path().join(format!("{policy}.json"));
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.topology(), model.topology());
        assert_eq!(back.epoch(), 3);
        assert_eq!(back.policy(), policy);
        assert_eq!(back.config(), model.config());
        let bits = |m: &Model| m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&model));
        assert_eq!(
            back.predict(&test.samples()).unwrap(),
            model.predict(&test.samples()).unwrap()
        );
        assert_eq!(accuracy(&back, &test).unwrap(), accuracy(&model, &test).unwrap());
        assert!(model
            .topology()
            .layers()
            .iter()
            .flat_map(|l| l.edges())
            .any(|e| e.birth_epoch > 0));
    }
}

#[test]
fn edge_order_in_the_file_does_not_matter() {
    let (model, test) = trained(EvolutionPolicy::CoDaSet);
    let mut file = ModelFile::from_model(&model);
    for layer in &mut file.layers {
        layer.edges.reverse();
    }
    let back = file.into_model().unwrap();
    assert_eq!(back.flat_params(), model.flat_params());
    assert_eq!(accuracy(&back, &test).unwrap(), accuracy(&model, &test).unwrap());
}

#[test]
fn corrupt_files_are_rejected() {
    let (model, _) = trained(EvolutionPolicy::Set);
    let mut file = ModelFile::from_model(&model);
    file.format = "something-else".into();
    assert!(file.into_model().is_err());

    let mut file = ModelFile::from_model(&model);
    let dup = file.layers[0].edges[0];
    file.layers[0].edges.push(dup);
    assert!(file.into_model().is_err());

    let mut file = ModelFile::from_model(&model);
    file.layers[1].srelu.pop();
    assert!(file.into_model().is_err());

    let mut file = ModelFile::from_model(&model);
    file.epoch = 1;
    assert!(file.into_model().is_err(), "edges born after the stored epoch");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    assert!(load_model(&path).is_err());
}
