use decompkan::data::{gen_scenario, ScenarioKind, ScenarioSpec, SeriesDataset, Split};
use decompkan::inspect::{layer_activity, top_edges, Branch};
use decompkan::model::{read_checkpoint, write_checkpoint, ModelConfig, ModelParams};
use decompkan::train::{evaluate_split, fit, TrainConfig};

fn trained() -> (ModelConfig, ModelParams, SeriesDataset) {
    let ds = gen_scenario(&ScenarioSpec::new(ScenarioKind::Periodic, 3)).unwrap();
    let mut model = ModelConfig::new(96, 24, ds.channels());
    model.embed_dim = 16;
    model.kan_hidden = 16;
    model.stats_hidden = 16;
    let train = TrainConfig {
        lr: 1e-3,
        max_epochs: 4,
        max_batches_per_epoch: Some(20),
        ..TrainConfig::default()
    };
    let (params, _) = fit(&model, &ds, &train).unwrap();
    (model, params, ds)
}

#[test]
fn trained_model_properties() {
    let (model, params, ds) = trained();

    // the first KAN layer is the quietest in each branch
    let activity = layer_activity(&params, &model);
    for branch in [Branch::Trend, Branch::Residual] {
        let layers: Vec<_> = activity.iter().filter(|a| a.branch == branch).collect();
        assert!(layers.len() >= 3, "{branch:?} has {} KAN layers", layers.len());
        for later in &layers[1..] {
            assert!(
                layers[0].mean_range < later.mean_range,
                "{branch:?}: layer 0 mean range {} vs layer {} {}",
                layers[0].mean_range,
                later.layer,
                later.mean_range
            );
        }
    }

    // ranking is by descending activation range over [-3, 3]
    let top = top_edges(&params, &model, Branch::Residual, 0, 8).unwrap();
    assert_eq!(top.len(), 8);
    assert!(top.windows(2).all(|w| w[0].activation_range >= w[1].activation_range));
    for c in &top {
        assert_eq!((c.x[0], *c.x.last().unwrap()), (-3.0, 3.0));
        let (lo, hi) = c.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        assert_eq!(c.activation_range, hi - lo);
    }

    // a checkpoint round trip reproduces the metrics exactly
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &model, &params).unwrap();
    let (model2, params2) = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(model2, model);
    let a = evaluate_split(&params, &model, &ds, Split::Test).unwrap();
    let b = evaluate_split(&params2, &model2, &ds, Split::Test).unwrap();
    assert_eq!((a.mse, a.mae), (b.mse, b.mae));
    assert!(a.mse.is_finite() && a.mse > 0.0);
}
