//! Full-batch training of float networks for vertex classification.

mod engine;
mod metrics;

pub use engine::{Engine, Tape};
pub use metrics::{auroc, compute as compute_metrics, f1, Metrics};

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_local_transitivity, gen_sun, pattern_catalog_lt, split, sun_patterns, Dataset, LtParams, Split, SunParams};
use crate::dhn::{gin_baseline, Aggregation, Classifier, Combine, Dhn, DhnLayer, GinConfig, HomQuery, Transform};
use crate::error::{Error, Result};
use crate::hom::MatchMode;
use crate::neural::{bce_with_logits, Activation, Adam, Fnn, LayerNorm};
use crate::relational::{PointedDatabase, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    LocalTransitivity {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: LtParams,
    },
    Sun {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: SunParams,
    },
    File {
        path: PathBuf,
    },
}

impl DatasetConfig {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetConfig::LocalTransitivity { seed, params } => gen_local_transitivity(*seed, params),
            DatasetConfig::Sun { seed, params } => gen_sun(*seed, params),
            DatasetConfig::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                Dataset::from_json(&serde_json::from_str(&text)?)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternSet {
    /// The 13 rooted directed patterns with at most three vertices.
    LtCatalog,
    /// Symmetric 6-cycle and symmetric edge.
    Sun,
}

impl PatternSet {
    pub fn patterns(self) -> Vec<PointedDatabase> {
        match self {
            PatternSet::LtCatalog => pattern_catalog_lt(),
            PatternSet::Sun => sun_patterns(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Arch {
    pub hidden: usize,
    pub layers: usize,
    pub transform_hidden_layers: usize,
    pub combine_hidden_layers: usize,
    pub classifier_hidden: usize,
    pub leaky_slope: f64,
    pub layer_norm: bool,
    pub layer_norm_eps: f64,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            hidden: 32,
            layers: 3,
            transform_hidden_layers: 1,
            combine_hidden_layers: 3,
            classifier_hidden: 32,
            leaky_slope: 0.01,
            layer_norm: true,
            layer_norm_eps: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Dhn {
        patterns: PatternSet,
        mode: MatchMode,
        agg: Aggregation,
        #[serde(default)]
        arch: Arch,
    },
    Gin {
        #[serde(default)]
        arch: Arch,
    },
}

impl ModelConfig {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Dhn<f64> {
        match self {
            ModelConfig::Dhn { patterns, mode, agg, arch } => dhn_model(&patterns.patterns(), *mode, *agg, arch, rng),
            ModelConfig::Gin { arch } => gin_baseline(
                &GinConfig {
                    hidden_dim: arch.hidden,
                    n_layers: arch.layers,
                    combine_hidden_layers: arch.combine_hidden_layers,
                    classifier_hidden: arch.classifier_hidden,
                    leaky_slope: arch.leaky_slope,
                    layer_norm: arch.layer_norm,
                    layer_norm_eps: arch.layer_norm_eps,
                },
                rng,
            ),
        }
    }
}

/// A trainable network with one query per pattern in every layer. Each
/// pattern value gets its own transform network; the first layer's
/// transforms take no input and so learn a constant vector.
pub fn dhn_model<R: Rng + ?Sized>(patterns: &[PointedDatabase], mode: MatchMode, agg: Aggregation, arch: &Arch, rng: &mut R) -> Dhn<f64> {
    let d = arch.hidden;
    let leaky = Activation::LeakyRelu(arch.leaky_slope);
    let mut layers = Vec::new();
    for i in 0..arch.layers {
        let inp = if i == 0 { 0 } else { d };
        let mut dims = vec![inp];
        dims.extend(std::iter::repeat_n(d, arch.transform_hidden_layers + 1));
        let queries: Vec<HomQuery<f64>> = patterns
            .iter()
            .map(|p| {
                let transforms: BTreeMap<Value, Transform<f64>> = p
                    .db
                    .adom()
                    .iter()
                    .map(|v| (v.clone(), Transform::new(Fnn::random(&dims, leaky.clone(), leaky.clone(), rng))))
                    .collect();
                HomQuery::new(p.clone(), transforms, agg, mode).expect("transform per value")
            })
            .collect();
        let mut cdims = vec![d * queries.len()];
        cdims.extend(std::iter::repeat_n(d, arch.combine_hidden_layers + 1));
        let combine = Fnn::random(&cdims, leaky.clone(), leaky.clone(), rng);
        let mut layer = DhnLayer::new(queries, Combine::Fnn(combine)).expect("dims chain");
        if arch.layer_norm && i + 1 < arch.layers {
            layer.layer_norm = Some(LayerNorm::new(d, arch.layer_norm_eps));
        }
        layers.push(layer);
    }
    let head = Fnn::random(&[d, arch.classifier_hidden, 1], leaky, Activation::Identity, rng);
    Dhn::new(layers, Classifier::Fnn { net: head, threshold: 0.0 }).expect("dims chain")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub lr: f64,
    pub epochs: usize,
    /// Independent initializations; the one with the best validation F1 wins.
    pub restarts: usize,
    pub seed: u64,
    pub split: (f64, f64, f64),
    /// Print progress every this many epochs (0 = silent).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            name: "experiment".into(),
            dataset: DatasetConfig::LocalTransitivity {
                seed: 0,
                params: LtParams::default(),
            },
            model: ModelConfig::Dhn {
                patterns: PatternSet::LtCatalog,
                mode: MatchMode::Hom,
                agg: Aggregation::Sum,
                arch: Arch::default(),
            },
            lr: 3e-4,
            epochs: 1000,
            restarts: 3,
            seed: 0,
            split: (0.6, 0.2, 0.2),
            log_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation F1.
    pub net: Dhn<f64>,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    pub val: Metrics,
    pub test: Metrics,
    pub secs: f64,
}

fn positions(engine: &Engine, ds: &Dataset) -> Result<Vec<(usize, bool)>> {
    let index: HashMap<&Value, usize> = engine.values().iter().enumerate().map(|(i, v)| (v, i)).collect();
    ds.labels
        .iter()
        .map(|(v, &l)| {
            index
                .get(v)
                .map(|&i| (i, l))
                .ok_or_else(|| Error::MissingRoot(v.to_string()))
        })
        .collect()
}

fn metrics_on(logits: &[f64], examples: &[(usize, bool)], idx: &[usize]) -> Metrics {
    let scores: Vec<f64> = idx.iter().map(|&i| logits[examples[i].0]).collect();
    let labels: Vec<bool> = idx.iter().map(|&i| examples[i].1).collect();
    compute_metrics(&scores, &labels, 0.0)
}

/// Full-batch Adam on mean binary cross-entropy over the training examples.
pub fn train(net: &Dhn<f64>, ds: &Dataset, sp: &Split, lr: f64, epochs: usize, log_every: usize) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut engine = Engine::new(net, &ds.db)?;
    let examples = positions(&engine, ds)?;
    let mut adam = Adam::new(lr);
    let mut history = Vec::with_capacity(epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let n_train = sp.train.len().max(1) as f64;
    for epoch in 0..=epochs {
        let (logits, tape) = engine.forward();
        let val_f1 = metrics_on(&logits, &examples, &sp.val).f1;
        if best.as_ref().is_none_or(|b| val_f1 > b.0) {
            best = Some((val_f1, epoch, engine.params.clone()));
        }
        if epoch == epochs {
            break;
        }
        let mut dlogits = vec![0.0; logits.len()];
        let mut loss = 0.0;
        for &i in &sp.train {
            let (pos, label) = examples[i];
            let (l, d) = bce_with_logits(logits[pos], label);
            loss += l / n_train;
            dlogits[pos] += d / n_train;
        }
        if !loss.is_finite() {
            return Err(Error::NoGradient(format!("loss diverged at epoch {epoch}")));
        }
        history.push(EpochLog { epoch, loss, val_f1 });
        if log_every > 0 && epoch % log_every == 0 {
            eprintln!("epoch {epoch:5}  loss {loss:.5}  val_f1 {val_f1:.4}  {:.1}s", start.elapsed().as_secs_f64());
        }
        let grads = engine.backward(&tape, &dlogits)?;
        drop(tape);
        adam.step(&mut engine.params, &grads)?;
    }
    let (_, best_epoch, params) = best.expect("at least one evaluation");
    engine.params = params;
    let (logits, _) = engine.forward();
    Ok(TrainOutcome {
        net: engine.export(net)?,
        best_epoch,
        history,
        val: metrics_on(&logits, &examples, &sp.val),
        test: metrics_on(&logits, &examples, &sp.test),
        secs: start.elapsed().as_secs_f64(),
    })
}

/// Metrics of `net` on the labeled values of `ds` whose example positions
/// are in `idx` (all examples when `None`).
pub fn evaluate(net: &Dhn<f64>, ds: &Dataset, idx: Option<&[usize]>) -> Result<Metrics> {
    let engine = Engine::new(net, &ds.db)?;
    let examples = positions(&engine, ds)?;
    let (logits, _) = engine.forward();
    let all: Vec<usize> = (0..examples.len()).collect();
    Ok(metrics_on(&logits, &examples, idx.unwrap_or(&all)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub val: Metrics,
    pub test: Metrics,
    pub secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub config: TrainConfig,
    pub examples: usize,
    pub positives: usize,
    pub split: (usize, usize, usize),
    pub runs: Vec<RunSummary>,
    /// Index into `runs` of the selected run.
    pub selected: usize,
    pub test: Metrics,
    /// Mean and standard error of test F1 and AUROC across runs.
    pub f1_mean: f64,
    pub f1_stderr: f64,
    pub auroc_mean: f64,
    pub auroc_stderr: f64,
    pub secs: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{}: {} examples ({} positive), split {}/{}/{}\n",
            self.name, self.examples, self.positives, self.split.0, self.split.1, self.split.2
        );
        for (i, r) in self.runs.iter().enumerate() {
            s += &format!(
                "{} run {i} seed {}: best epoch {}, val F1 {:.4}, test F1 {:.4}, test AUROC {:.4}, {:.1}s\n",
                if i == self.selected { "*" } else { " " },
                r.seed,
                r.best_epoch,
                r.val.f1,
                r.test.f1,
                r.test.auroc,
                r.secs
            );
        }
        s += &format!("test F1 {:.4}  AUROC {:.4}  accuracy {:.4}\n", self.test.f1, self.test.auroc, self.test.accuracy);
        s += &format!(
            "over runs: F1 {:.4} ± {:.4}  AUROC {:.4} ± {:.4}\n",
            self.f1_mean, self.f1_stderr, self.auroc_mean, self.auroc_stderr
        );
        s
    }
}

/// Loads the dataset, trains `restarts` initializations on one split and
/// keeps the run with the best validation F1.
pub fn run_experiment(cfg: &TrainConfig) -> Result<(Report, Dhn<f64>)> {
    let start = Instant::now();
    let ds = cfg.dataset.load()?;
    let sp = split(ds.labels.len(), cfg.seed, cfg.split)?;
    let mut runs = Vec::new();
    let mut best: Option<(f64, usize, Dhn<f64>)> = None;
    for k in 0..cfg.restarts.max(1) {
        let seed = cfg.seed.wrapping_add(k as u64);
        let net = cfg.model.build(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = train(&net, &ds, &sp, cfg.lr, cfg.epochs, cfg.log_every)?;
        if best.as_ref().is_none_or(|b| out.val.f1 > b.0) {
            best = Some((out.val.f1, k, out.net.clone()));
        }
        runs.push(RunSummary {
            seed,
            best_epoch: out.best_epoch,
            final_loss: out.history.last().map_or(f64::NAN, |h| h.loss),
            val: out.val,
            test: out.test,
            secs: out.secs,
        });
    }
    let (_, selected, net) = best.expect("at least one run");
    let (f1_mean, f1_stderr) = mean_stderr(&runs.iter().map(|r| r.test.f1).collect::<Vec<_>>());
    let (auroc_mean, auroc_stderr) = mean_stderr(&runs.iter().map(|r| r.test.auroc).collect::<Vec<_>>());
    let report = Report {
        name: cfg.name.clone(),
        config: cfg.clone(),
        examples: ds.labels.len(),
        positives: ds.positives(),
        split: (sp.train.len(), sp.val.len(), sp.test.len()),
        test: runs[selected].test,
        runs,
        selected,
        f1_mean,
        f1_stderr,
        auroc_mean,
        auroc_stderr,
        secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, net))
}

#[cfg(test)]
mod tests;
