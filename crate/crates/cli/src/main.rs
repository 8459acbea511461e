use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use homnet::analysis::{emptiness_bounded, subsumption_bounded, Verdict};
use homnet::compiler::{check_equivalence, compile, EquivConfig, Target};
use homnet::datasets::{gen_local_transitivity, gen_sun, split, Dataset, LtParams, SunParams};
use homnet::dhn::Dhn;
use homnet::hom::{count, count_all_roots, Constraints, MatchMode};
use homnet::logic::{parse, Formula};
use homnet::relational::DatabaseDoc;
use homnet::train::{evaluate, run_experiment, TrainConfig};
use homnet::{PointedDatabase, Rational, Scalar, Schema, Value};

#[derive(Parser)]
#[command(name = "homnet", version, about = "Deep homomorphism networks: counting, compilation, training and analysis")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lt,
    Sun,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Val,
    Test,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic labeled dataset.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Generator parameters as inline JSON.
        #[arg(long)]
        params: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Train networks as described by a JSON config and report the best run.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Where to write the selected network.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a trained network on a labeled dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        part: Part,
    },
    /// Compile a formula into a network with exact weights.
    Compile {
        /// Formula text or a file containing it.
        #[arg(long)]
        formula: String,
        #[arg(long)]
        target: Target,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare a network against a formula on small and random databases.
    CheckEquiv {
        #[arg(long)]
        formula: String,
        #[arg(long)]
        model: PathBuf,
        /// Largest random database.
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        /// Every database up to this many values is checked.
        #[arg(long, default_value_t = 3)]
        exhaustive: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Count pattern matches in a target database.
    Count {
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value = "hom")]
        mode: MatchMode,
        /// One line `value count` per target value instead of the target's root.
        #[arg(long)]
        all_roots: bool,
    },
    /// Run a network on a database.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        db: PathBuf,
        /// Defaults to the database's root, or every value when it has none.
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        trace: bool,
    },
    /// Search for a database the network accepts.
    /// Exit code 0: witness, 3: empty (definitive), 4: empty up to the cap.
    Emptiness {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        max_size: usize,
    },
    /// Search for a database accepted by the first network and rejected by
    /// the second. Exit code 0: counterexample, 3: subsumed (definitive),
    /// 4: subsumed up to the cap.
    Subsume {
        #[arg(long)]
        model1: PathBuf,
        #[arg(long)]
        model2: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        max_size: usize,
    },
}

enum AnyNet {
    Exact(Dhn<Rational>),
    Float(Dhn<f64>),
}

fn read_json(path: &Path) -> Result<Json> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Large documents (datasets, trained weights) are written without indentation.
fn write_json(path: Option<&Path>, v: &Json, pretty: bool) -> Result<()> {
    let text = if pretty { serde_json::to_string_pretty(v)? } else { serde_json::to_string(v)? };
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_net(path: &Path) -> Result<AnyNet> {
    let v = read_json(path)?;
    Ok(match Dhn::<f64>::numeric_of(&v) {
        Some("float") => AnyNet::Float(Dhn::from_json(&v)?),
        _ => AnyNet::Exact(Dhn::from_json(&v)?),
    })
}

fn load_float(path: &Path) -> Result<Dhn<f64>> {
    Ok(Dhn::from_json(&read_json(path)?)?)
}

fn load_doc(path: &Path) -> Result<DatabaseDoc> {
    Ok(serde_json::from_value(read_json(path)?)?)
}

fn load_formula(arg: &str) -> Result<Formula> {
    let text = if Path::new(arg).is_file() { fs::read_to_string(arg)? } else { arg.to_string() };
    Ok(parse(text.trim())?)
}

fn verdict_code(v: &Verdict) -> ExitCode {
    match v {
        Verdict::Found(_) => ExitCode::SUCCESS,
        Verdict::None { definitive: true, .. } => ExitCode::from(3),
        Verdict::None { definitive: false, .. } => ExitCode::from(4),
    }
}

fn run_net<S: Scalar>(net: &Dhn<S>, doc: &DatabaseDoc, root: Option<String>, trace: bool) -> Result<()> {
    let db = doc.database()?;
    let roots: Vec<Value> = match root.or_else(|| doc.root.clone()) {
        Some(r) => vec![Value::new(&r)],
        None => db.adom().iter().cloned().collect(),
    };
    let tr = net.trace(&db)?;
    let last = tr.last().expect("trace has the input");
    for r in &roots {
        let x = last.get(r).with_context(|| format!("unknown value `{r}`"))?;
        println!("{r}\t{}", if net.classifier.accepts(x)? { "accept" } else { "reject" });
    }
    if trace {
        let layers: Vec<Json> = tr.iter().map(|e| e.to_json()).collect();
        println!("{}", serde_json::to_string_pretty(&layers)?);
    }
    Ok(())
}

fn equiv<S: Scalar>(f: &Formula, net: &Dhn<S>, cfg: &EquivConfig) -> Result<bool> {
    let r = check_equivalence(f, net, cfg)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    eprintln!(
        "{} databases ({} pointed), exhaustive up to {} values: {} disagreements",
        r.databases,
        r.pointed,
        r.exhaustive_values,
        r.disagreements.len()
    );
    Ok(r.ok())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Generate { kind, params, out } => {
            let seed = seed.unwrap_or(0);
            let params = params.as_deref().map(serde_json::from_str::<Json>).transpose()?.unwrap_or(json!({}));
            let ds = match kind {
                Kind::Lt => gen_local_transitivity(seed, &serde_json::from_value::<LtParams>(params)?)?,
                Kind::Sun => gen_sun(seed, &serde_json::from_value::<SunParams>(params)?)?,
            };
            eprintln!(
                "{} values, {} facts, {} examples ({} positive)",
                ds.db.num_values(),
                ds.db.facts().len(),
                ds.labels.len(),
                ds.positives()
            );
            write_json(out.as_deref(), &ds.to_json(), false)?;
        }
        Cmd::Train {
            config,
            epochs,
            restarts,
            out,
            report,
        } => {
            let mut cfg: TrainConfig = serde_json::from_value(read_json(&config)?).context("invalid training config")?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(r) = restarts {
                cfg.restarts = r;
            }
            let (rep, net) = run_experiment(&cfg)?;
            print!("{}", rep.to_text());
            if let Some(p) = report {
                write_json(Some(&p), &serde_json::to_value(&rep)?, true)?;
            }
            if let Some(p) = out {
                write_json(Some(&p), &net.to_json(), false)?;
            }
        }
        Cmd::Eval { model, data, part } => {
            let net = load_float(&model)?;
            let ds = Dataset::from_json(&read_json(&data)?)?;
            let sp = split(ds.labels.len(), seed.unwrap_or(0), (0.6, 0.2, 0.2))?;
            let idx = match part {
                Part::Train => Some(&sp.train[..]),
                Part::Val => Some(&sp.val[..]),
                Part::Test => Some(&sp.test[..]),
                Part::All => None,
            };
            let m = evaluate(&net, &ds, idx)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Cmd::Compile { formula, target, out } => {
            let f = load_formula(&formula)?;
            let net = compile::<Rational>(&f, target, &Schema::graph().union(&f.schema())?)?;
            eprintln!("{} layers, {} queries", net.layers.len(), net.queries().count());
            write_json(out.as_deref(), &net.to_json(), true)?;
        }
        Cmd::CheckEquiv {
            formula,
            model,
            max_size,
            exhaustive,
            samples,
        } => {
            let f = load_formula(&formula)?;
            let cfg = EquivConfig {
                schema: Schema::graph().union(&f.schema())?,
                exhaustive_values: exhaustive,
                samples,
                max_values: max_size,
                seed: seed.unwrap_or(0),
                ..EquivConfig::default()
            };
            let ok = match load_net(&model)? {
                AnyNet::Exact(n) => equiv(&f, &n, &cfg)?,
                AnyNet::Float(n) => equiv(&f, &n, &cfg)?,
            };
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
        Cmd::Count {
            pattern,
            target,
            mode,
            all_roots,
        } => {
            let p: PointedDatabase = load_doc(&pattern)?.pointed()?;
            let doc = load_doc(&target)?;
            let c = Constraints::none();
            if all_roots {
                for (v, n) in count_all_roots(&p, &doc.database()?, mode, &c)? {
                    println!("{v}\t{n}");
                }
            } else {
                let d = doc.pointed().context("target needs a `root` (or pass --all-roots)")?;
                println!("{}", count(&p, &d, mode, &c)?);
            }
        }
        Cmd::Run { model, db, root, trace } => {
            let doc = load_doc(&db)?;
            match load_net(&model)? {
                AnyNet::Exact(n) => run_net(&n, &doc, root, trace)?,
                AnyNet::Float(n) => run_net(&n, &doc, root, trace)?,
            }
        }
        Cmd::Emptiness { model, degree, max_size } => {
            if max_size == 0 {
                bail!("--max-size must be at least 1");
            }
            let v = match load_net(&model)? {
                AnyNet::Exact(n) => emptiness_bounded(&n, degree, max_size)?,
                AnyNet::Float(n) => emptiness_bounded(&n, degree, max_size)?,
            };
            println!("{}", serde_json::to_string_pretty(&v.to_json())?);
            return Ok(verdict_code(&v));
        }
        Cmd::Subsume {
            model1,
            model2,
            degree,
            max_size,
        } => {
            let v = match (load_net(&model1)?, load_net(&model2)?) {
                (AnyNet::Exact(a), AnyNet::Exact(b)) => subsumption_bounded(&a, &b, degree, max_size)?,
                (AnyNet::Float(a), AnyNet::Float(b)) => subsumption_bounded(&a, &b, degree, max_size)?,
                _ => bail!("both networks must use the same numeric backend"),
            };
            println!("{}", serde_json::to_string_pretty(&v.to_json())?);
            return Ok(verdict_code(&v));
        }
    }
    Ok(ExitCode::SUCCESS)
}
