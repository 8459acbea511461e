use super::*;
use crate::relational::Database;
use crate::sample::random_database;
use crate::Schema;

fn reference_scores(net: &Dhn<f64>, db: &Database, values: &[Value]) -> Vec<f64> {
    let trace = net.trace(db).unwrap();
    let last = trace.last().unwrap();
    values.iter().map(|v| net.classifier.score(last.get(v).unwrap()).unwrap()).collect()
}

fn small_arch() -> Arch {
    Arch {
        hidden: 4,
        layers: 2,
        combine_hidden_layers: 1,
        classifier_hidden: 3,
        ..Arch::default()
    }
}

fn nets(rng: &mut ChaCha8Rng) -> Vec<Dhn<f64>> {
    let arch = small_arch();
    let pats = pattern_catalog_lt();
    let mut out = vec![
        dhn_model(&pats[..5], MatchMode::Hom, Aggregation::Sum, &arch, rng),
        dhn_model(&pats[8..11], MatchMode::Hom, Aggregation::Max, &arch, rng),
        dhn_model(&pats[2..4], MatchMode::Injective, Aggregation::Mean, &arch, rng),
    ];
    let split = PointedDatabase::new(Database::from_edges(&[("r", "a"), ("b", "c")]).with_value("d"), Value::new("r")).unwrap();
    out.push(dhn_model(&[split, pats[1].clone()], MatchMode::Hom, Aggregation::Sum, &arch, rng));
    out.push(ModelConfig::Gin { arch }.build(rng));
    out
}

#[test]
fn disconnected_sum_patterns_use_message_passing() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let all = nets(&mut rng);
    let db = random_database(&mut rng, &Schema::graph(), 5, 0.4);
    let (split, gin) = (&all[3], &all[4]);
    assert_eq!(Engine::new(split, &db).unwrap().num_tree_queries(), 4);
    let e = Engine::new(gin, &db).unwrap();
    assert_eq!(e.num_tree_queries(), gin.queries().count());
    assert_eq!(e.num_matches(), 0);
}

#[test]
fn engine_forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for net in nets(&mut rng) {
        for _ in 0..5 {
            let n = rng.gen_range(1..=7);
            let db = random_database(&mut rng, &Schema::graph(), n, 0.35);
            let e = Engine::new(&net, &db).unwrap();
            let (logits, _) = e.forward();
            let want = reference_scores(&net, &db, e.values());
            for (a, b) in logits.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn engine_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for net in nets(&mut rng) {
        let db = random_database(&mut rng, &Schema::graph(), 6, 0.4);
        let mut e = Engine::new(&net, &db).unwrap();
        let coef: Vec<f64> = (0..e.num_values()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let objective = |e: &Engine| e.forward().0.iter().zip(&coef).map(|(l, c)| l * c).sum::<f64>();
        let (_, tape) = e.forward();
        let grads = e.backward(&tape, &coef).unwrap();
        let h = 1e-6;
        for _ in 0..60 {
            let i = rng.gen_range(0..e.params.len());
            let p = e.params[i];
            e.params[i] = p + h;
            let up = objective(&e);
            e.params[i] = p - h;
            let down = objective(&e);
            e.params[i] = p;
            let fd = if e.trainable[i] { (up - down) / (2.0 * h) } else { 0.0 };
            // Max aggregation and leaky kinks make a few coordinates non-smooth.
            assert!((fd - grads[i]).abs() < 1e-4 * (1.0 + fd.abs()), "param {i}: fd {fd} vs {}", grads[i]);
        }
    }
}

#[test]
fn export_round_trips_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for net in nets(&mut rng) {
        let db = Database::from_edges(&[("a", "b"), ("b", "c")]);
        let e = Engine::new(&net, &db).unwrap();
        assert_eq!(e.export(&net).unwrap(), net);
    }
}

#[test]
fn gin_transforms_are_frozen() {
    let net = ModelConfig::Gin { arch: small_arch() }.build(&mut ChaCha8Rng::seed_from_u64(4));
    let db = Database::from_edges(&[("a", "b"), ("b", "a"), ("b", "c")]);
    let e = Engine::new(&net, &db).unwrap();
    let (_, tape) = e.forward();
    let g = e.backward(&tape, &[1.0, -1.0, 0.5]).unwrap();
    assert!(e.trainable.iter().any(|t| !t));
    assert!(g.iter().zip(&e.trainable).all(|(g, t)| *t || *g == 0.0));
}

#[test]
fn metric_examples() {
    let labels = [true, false, true, false];
    assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.1], &labels).unwrap(), 0.75);
    assert_eq!(auroc(&[1.0, -1.0, 2.0, -2.0], &labels).unwrap(), 1.0);
    assert_eq!(auroc(&[-1.0, 1.0, -2.0, 2.0], &labels).unwrap(), 0.0);
    assert_eq!(auroc(&[0.0; 4], &labels).unwrap(), 0.5);
    assert_eq!(f1(&[1.0, -1.0, 2.0, -2.0], &labels, 0.0).unwrap(), 1.0);
    assert!(auroc(&[1.0], &[true]).is_err());
    assert!(f1(&[], &[], 0.0).is_err());
}

fn toy_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        dataset: DatasetConfig::LocalTransitivity {
            seed: 5,
            params: LtParams {
                n_chains: 6,
                chain_len: 8,
                delete: 40,
            },
        },
        model: ModelConfig::Dhn {
            patterns: PatternSet::LtCatalog,
            mode: MatchMode::Hom,
            agg: Aggregation::Sum,
            arch: small_arch(),
        },
        lr: 1e-2,
        epochs,
        restarts: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn one_step_lowers_the_loss() {
    let cfg = toy_config(2);
    let ds = cfg.dataset.load().unwrap();
    let sp = split(ds.labels.len(), 0, cfg.split).unwrap();
    let net = cfg.model.build(&mut ChaCha8Rng::seed_from_u64(0));
    let out = train(&net, &ds, &sp, cfg.lr, 2, 0).unwrap();
    assert!(out.history[1].loss < out.history[0].loss);
}

#[test]
fn constant_labels_are_fitted() {
    let mut ds = toy_config(0).dataset.load().unwrap();
    ds.labels.values_mut().for_each(|l| *l = true);
    let sp = split(ds.labels.len(), 0, (0.6, 0.2, 0.2)).unwrap();
    let net = toy_config(0).model.build(&mut ChaCha8Rng::seed_from_u64(1));
    let out = train(&net, &ds, &sp, 0.05, 50, 0).unwrap();
    assert_eq!(out.test.f1, 1.0);
}

#[test]
fn experiments_are_deterministic_and_select_best_run() {
    let cfg = toy_config(5);
    let (a, net_a) = run_experiment(&cfg).unwrap();
    let (b, net_b) = run_experiment(&cfg).unwrap();
    assert_eq!(net_a, net_b);
    let untimed = |r: &Report| r.runs.iter().map(|x| RunSummary { secs: 0.0, ..x.clone() }).collect::<Vec<_>>();
    assert_eq!(untimed(&a), untimed(&b));
    assert_eq!(a.runs.len(), 2);
    let best = a.runs.iter().map(|r| r.val.f1).fold(f64::MIN, f64::max);
    assert_eq!(a.runs[a.selected].val.f1, best);
    assert_eq!(a.config, cfg);
    let back: Report = serde_json::from_value(serde_json::to_value(&a).unwrap()).unwrap();
    assert_eq!(back.config, a.config);
    assert_eq!(back.runs.len(), a.runs.len());
}
