use acrank_core::features::{FeatureLayout, FeatureVector, DENSE_POPULARITY};
use acrank_core::ranker::{
    batch_loss_and_grad, prepare_pairs, score_candidates, train_network, Checkpoint, InputScaler,
    LossConfig, Network, NetworkConfig, PairExample, TrainConfig, TrainingMetadata, Workspace,
};
use acrank_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> NetworkConfig {
    NetworkConfig {
        query_repr_units: 8,
        lstm_units: 4,
        context_repr_units: 8,
        head_units: 6,
        dropout_rate: 0.0,
        ..NetworkConfig::with_dims(4, 3, 4)
    }
}

fn random_features(rng: &mut ChaCha8Rng) -> FeatureVector {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    FeatureVector {
        dense: v(4),
        series: v(3),
        context: v(4),
    }
}

fn random_pairs(n: usize, seed: u64) -> Vec<PairExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rank_p = rng.random_range(1..=10);
            let mut rank_n = rng.random_range(1..=10);
            if rank_n == rank_p {
                rank_n = rank_p % 10 + 1;
            }
            PairExample {
                positive: random_features(&mut rng),
                negative: random_features(&mut rng),
                rank_p,
                rank_n,
                weight: rng.random_range(0.1..3.0),
            }
        })
        .collect()
}

fn small_net(cfg: NetworkConfig) -> Network {
    Network::init(cfg, InputScaler::identity(4, 3, 4)).unwrap()
}

fn loss_and_grad(net: &Network, pairs: &[PairExample], loss: &LossConfig) -> (f64, Vec<f64>) {
    let prepared = prepare_pairs(net, pairs, loss).unwrap();
    let mut grads = vec![0.0; net.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let l = batch_loss_and_grad(net, &prepared, Some(&mut grads), false, &mut rng, &mut Workspace::default());
    (l, grads)
}

#[test]
fn batch_gradient_matches_finite_differences() {
    let loss = LossConfig::default();
    let pairs = random_pairs(100, 3);
    let mut net = small_net(small_config());
    let (_, grads) = loss_and_grad(&net, &pairs, &loss);
    let eps = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..net.param_count() {
        let orig = net.params[i];
        net.params[i] = orig + eps;
        let up = loss_and_grad(&net, &pairs, &loss).0;
        net.params[i] = orig - eps;
        let down = loss_and_grad(&net, &pairs, &loss).0;
        net.params[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let err = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn doubling_weight_doubles_gradient() {
    let loss = LossConfig::default();
    let mut pairs = random_pairs(1, 9);
    let net = small_net(small_config());
    let (l1, g1) = loss_and_grad(&net, &pairs, &loss);
    pairs[0].weight *= 2.0;
    let (l2, g2) = loss_and_grad(&net, &pairs, &loss);
    assert!((l2 - 2.0 * l1).abs() < 1e-12);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn branches_share_parameters() {
    // swapping positive and negative with the same features gives a zero
    // score gap either way: both branches are one function
    let mut pairs = random_pairs(1, 4);
    pairs[0].negative = pairs[0].positive.clone();
    let net = small_net(small_config());
    let off = LossConfig { use_delta_ndcg: false };
    let (l, g) = loss_and_grad(&net, &pairs, &off);
    assert!((l * 1.0 / pairs[0].weight - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(g.iter().all(|x| x.abs() < 1e-15));
}

fn separable_pairs(n: usize, seed: u64) -> Vec<PairExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = random_features(&mut rng);
            let mut q = random_features(&mut rng);
            p.dense[0] = rng.random_range(0.2..1.0);
            q.dense[0] = rng.random_range(-1.0..-0.2);
            PairExample {
                positive: p,
                negative: q,
                rank_p: 2,
                rank_n: 1,
                weight: 1.0,
            }
        })
        .collect()
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_pairs_are_learned() {
    let train = separable_pairs(512, 1);
    let cfg = NetworkConfig {
        dropout_rate: 0.1,
        ..small_config()
    };
    let (_, history) =
        train_network(small_net(cfg), &train, &[], &LossConfig::default(), &quick_train()).unwrap();
    let last = *history.train_loss.last().unwrap();
    assert!(last < 0.1 * history.initial_train_loss, "{history:?}");
    // empty validation set keeps the final epoch
    assert_eq!(history.best_epoch, 20);
    assert!(history.val_loss.is_empty());
}

#[test]
fn keeps_best_validation_epoch_and_is_deterministic() {
    let train = separable_pairs(256, 2);
    let val = separable_pairs(64, 3);
    let run = || {
        train_network(
            small_net(small_config()),
            &train,
            &val,
            &LossConfig::default(),
            &TrainConfig {
                epochs: 6,
                ..quick_train()
            },
        )
        .unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.params, b.params);
    assert_eq!(ha, hb);
    assert_eq!(ha.val_loss.len(), 6);
    let best = ha
        .val_loss
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap()
        .0;
    assert_eq!(ha.best_epoch, best + 1);
}

#[test]
fn training_errors() {
    let loss = LossConfig::default();
    let cfg = TrainConfig::default();
    assert!(matches!(
        train_network(small_net(small_config()), &[], &[], &loss, &cfg),
        Err(Error::EmptyTrainingSet)
    ));
    let mut bad = random_pairs(4, 1);
    bad[2].positive.dense[1] = f64::NAN;
    let err = train_network(small_net(small_config()), &bad, &[], &loss, &cfg).unwrap_err();
    assert!(matches!(err, Error::NonFiniteFeature("dense")), "{err}");
    // an absurd step size drives the parameters to infinity
    let wild = TrainConfig {
        learning_rate: 1e300,
        batch_size: 2,
        ..cfg.clone()
    };
    let err = train_network(small_net(small_config()), &random_pairs(8, 1), &[], &loss, &wild).unwrap_err();
    match err {
        Error::NonFiniteLoss { last_finite, .. } => assert!(last_finite.is_finite()),
        other => panic!("{other}"),
    }
    let mut same = random_pairs(1, 1);
    same[0].rank_n = same[0].rank_p;
    assert!(matches!(
        train_network(small_net(small_config()), &same, &[], &loss, &cfg),
        Err(Error::DegeneratePair(_))
    ));
}

fn checkpoint() -> Checkpoint {
    let layout = FeatureLayout::new(3, 1, 7.0, 2);
    let cfg = NetworkConfig::with_dims(layout.dense_len(), 3, layout.context_len());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let feats: Vec<FeatureVector> = (0..20)
        .map(|_| FeatureVector {
            dense: (0..6).map(|_| rng.random_range(0.0..5.0)).collect(),
            series: (0..3).map(|_| rng.random_range(0.0..50.0)).collect(),
            context: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let refs: Vec<&FeatureVector> = feats.iter().collect();
    let net = Network::init(cfg, InputScaler::fit(&refs).unwrap()).unwrap();
    Checkpoint::new(net, layout, TrainingMetadata::default()).unwrap()
}

fn layout_features(seed: u64) -> FeatureVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureVector {
        dense: (0..6).map(|_| rng.random_range(0.0..5.0)).collect(),
        series: (0..3).map(|_| rng.random_range(0.0..50.0)).collect(),
        context: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let ck = checkpoint();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::load(bytes.as_slice()).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    for seed in 0..10 {
        let f = layout_features(seed);
        assert_eq!(
            ck.network.score(&f).unwrap().to_bits(),
            back.network.score(&f).unwrap().to_bits()
        );
    }
    let mut json = Vec::new();
    ck.export_json(&mut json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["tensors"][0]["name"], "query.weight");
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let bytes = checkpoint().to_bytes().unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(Checkpoint::load(bad_magic.as_slice()), Err(Error::Checkpoint(_))));
    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(Checkpoint::load(truncated), Err(Error::Checkpoint(_))));
    let mut version = bytes.clone();
    version[8] = 9;
    assert!(Checkpoint::load(version.as_slice()).is_err());
}

#[test]
fn ranking_order_and_ties() {
    let ck = checkpoint();
    let f = layout_features(1);
    let single = score_candidates("n", &ck.network, &[("only", &f)]).unwrap();
    assert_eq!(single.items.len(), 1);

    // identical features tie on score; popularity decides, then text
    let mut popular = f.clone();
    popular.dense[DENSE_POPULARITY] += 1.0;
    let mut g = f.clone();
    g.dense[DENSE_POPULARITY] = popular.dense[DENSE_POPULARITY];
    let items = [("b", &f), ("a", &f)];
    let out = score_candidates("n", &ck.network, &items).unwrap();
    assert_eq!(out.queries().collect::<Vec<_>>(), ["a", "b"]);

    let many: Vec<FeatureVector> = (0..8).map(layout_features).collect();
    let names: Vec<String> = (0..8).map(|i| format!("q{i}")).collect();
    let mut items: Vec<(&str, &FeatureVector)> =
        names.iter().map(String::as_str).zip(many.iter()).collect();
    let base = score_candidates("n", &ck.network, &items).unwrap();
    items.reverse();
    assert_eq!(score_candidates("n", &ck.network, &items).unwrap(), base);
    items.rotate_left(3);
    assert_eq!(score_candidates("n", &ck.network, &items).unwrap(), base);
}
