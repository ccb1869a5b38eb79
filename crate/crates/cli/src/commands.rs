use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use matt_core::dataset::{
    build_bags, generate_synthetic, load_metadata, write_metadata, BagSet, FeatureStore, LabelPolicy, SegmentTable,
    Split, SynthConfig, SYNTH_FAMILY,
};
use matt_core::dsp::feature_set_families;
use matt_core::evaluation::{evaluate, evaluate_oracle, ranking, EvalMode, DEFAULT_KS, DEFAULT_SUBSETS};
use matt_core::formats::{
    feature_cache_path, format_report, load_checkpoint, read_feature_cache, read_oracle, save_checkpoint,
    write_atomic, write_feature_cache, write_oracle, write_report, write_train_log,
};
use matt_core::model::{Aggregator, EncoderConfig, MattModel, ModelConfig};
use matt_core::numeric::{finite_difference_check, Algorithm, ParamStore};
use matt_core::training::{nll_loss, segment_bags, train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{existing, parse_named, pick, require, RunConfig};
use crate::{
    extract, invalid, BuildBagsArgs, Cli, Command, DataArgs, EvaluateArgs, GenSynthArgs, GradCheckArgs, PredictArgs,
    TrainArgs,
};

pub const CHECKPOINT_FILE: &str = "model.matt";
pub const MODEL_INFO_FILE: &str = "model.toml";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::ExtractFeatures(args) => extract::run(args, &cfg),
        Command::BuildBags(args) => build_bags_cmd(args, &cfg),
        Command::GenSynth(args) => gen_synth(args, &cfg),
        Command::Train(args) => train_cmd(args, &cfg),
        Command::Evaluate(args) => evaluate_cmd(args, &cfg),
        Command::Predict(args) => predict_cmd(args, &cfg),
        Command::GradCheck(args) => grad_check(args, &cfg),
    }
}

/// Side information stored next to the checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct ModelInfo {
    aggregator: String,
    feature_set: String,
    genres: Vec<String>,
}

fn parse_list(text: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| invalid(format!("{what}: `{t}` is not a non-negative integer"))))
        .collect()
}

fn label_policy(flag: Option<String>, cfg: &RunConfig) -> anyhow::Result<LabelPolicy> {
    flag.or(cfg.train.label_policy.clone())
        .map_or(Ok(LabelPolicy::default()), |s| parse_named(&s))
}

fn load_table(metadata: Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<SegmentTable> {
    let path = existing(require(metadata, cfg.paths.metadata.clone(), "metadata")?, "metadata")?;
    load_metadata(&path).with_context(|| format!("reading {}", path.display()))
}

fn checkpoint_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    require(flag, cfg.paths.checkpoint_dir.clone(), "checkpoint-dir")
}

fn load_features(feature_dir: &Path, feature_set: &str) -> anyhow::Result<FeatureStore> {
    if feature_set != SYNTH_FAMILY {
        feature_set_families(feature_set)?;
    }
    let path = existing(feature_cache_path(feature_dir, feature_set), "feature cache")?;
    Ok(read_feature_cache(&path)?)
}

fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_bags_cmd(args: BuildBagsArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let table = load_table(args.metadata, cfg)?;
    let bags = build_bags(&table, label_policy(args.label_policy, cfg)?)?;
    let mut out = String::from("artist_id,album_id,split,genre,size,segments\n");
    for bag in &bags.bags {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            bag.artist_id,
            bag.album_id,
            bag.split,
            bags.vocabulary.names[bag.genre_id],
            bag.len(),
            bag.segment_ids.join(";")
        )?;
    }
    for split in Split::ALL {
        info!("{split}: {} bags", bags.split(split).count());
    }
    write_text(args.out.as_deref(), &out)
}

fn gen_synth(args: GenSynthArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let out = require(args.out, cfg.paths.feature_dir.clone(), "out")?;
    let s = &cfg.synth;
    let d = SynthConfig::default();
    let synth = SynthConfig {
        n_genres: pick(args.genres, s.genres, d.n_genres),
        zipf_exponent: pick(args.zipf, s.zipf, d.zipf_exponent),
        head_count: pick(args.head_count, s.head_count, d.head_count),
        bag_size_range: (
            pick(args.bag_size_min, s.bag_size_min, d.bag_size_range.0),
            pick(args.bag_size_max, s.bag_size_max, d.bag_size_range.1),
        ),
        feature_dim: pick(args.dim, s.dim, d.feature_dim),
        centroid_separation: pick(args.separation, s.separation, d.centroid_separation),
        noise_rate: pick(args.noise_rate, s.noise_rate, d.noise_rate),
        validation_bags_per_genre: pick(args.val_bags, s.val_bags, d.validation_bags_per_genre),
        test_bags_per_genre: pick(args.test_bags, s.test_bags, d.test_bags_per_genre),
        seed: pick(args.seed, cfg.seed, d.seed),
    };
    let data = generate_synthetic(&synth)?;
    let mut metadata = Vec::new();
    write_metadata(&data.table, &mut metadata)?;
    write_atomic(&out.join("metadata.csv"), &metadata)?;
    write_feature_cache(&feature_cache_path(&out, SYNTH_FAMILY), &data.features)?;
    write_oracle(&out.join("oracle.csv"), &data.oracle)?;
    println!(
        "wrote {} segments in {} bags ({} genres) to {}",
        data.table.len(),
        data.bags.len(),
        synth.n_genres,
        out.display()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let DataArgs {
        metadata,
        feature_dir,
        feature_set,
        label_policy: policy_flag,
        checkpoint_dir: ckpt_flag,
    } = args.data;
    let table = load_table(metadata, cfg)?;
    let feature_dir = require(feature_dir, cfg.paths.feature_dir.clone(), "feature-dir")?;
    let feature_set = pick(feature_set, cfg.features.set.clone(), "1to9".to_string());
    let features = load_features(&feature_dir, &feature_set)?;
    let ckpt_dir = checkpoint_dir(ckpt_flag, cfg)?;
    let policy = label_policy(policy_flag, cfg)?;
    let m = &cfg.model;
    let aggregator: Aggregator = parse_named(&pick(args.aggregator, m.aggregator.clone(), "matt".into()))?;
    let hidden = match args.hidden {
        Some(text) => parse_list(&text, "--hidden")?,
        None => m.hidden.clone().unwrap_or_default(),
    };
    let model_cfg = ModelConfig {
        encoder: EncoderConfig {
            input_dim: features.dim(),
            hidden_dims: hidden,
            output_dim: pick(args.embedding_dim, m.embedding_dim, 32),
        },
        n_genres: table.vocabulary.len(),
        aggregator,
    };
    let t = &cfg.train;
    let d = TrainConfig::default();
    let optimizer: Algorithm = parse_named(&pick(args.optimizer, t.optimizer.clone(), d.optimizer.to_string()))?;
    let train_cfg = TrainConfig {
        epochs: pick(args.epochs, t.epochs, d.epochs),
        bags_per_batch: pick(args.batch_size, t.batch_size, d.bags_per_batch),
        optimizer,
        learning_rate: pick(args.learning_rate, t.learning_rate, d.learning_rate),
        seed: pick(args.seed, cfg.seed, d.seed),
        early_stop_patience: pick(args.patience, t.patience, d.early_stop_patience),
        label_policy: policy,
        feature_set: feature_set.clone(),
        class_reweighting: args.class_reweighting || t.class_reweighting.unwrap_or(false),
    };
    let bags = if args.segment_level {
        segment_bags(&table)
    } else {
        build_bags(&table, policy)?
    };
    let (model, log) = train(&bags, &features, model_cfg, &train_cfg)?;
    save_checkpoint(&ckpt_dir.join(CHECKPOINT_FILE), model.params())?;
    let info = ModelInfo {
        aggregator: aggregator.to_string(),
        feature_set,
        genres: table.vocabulary.names.clone(),
    };
    write_atomic(&ckpt_dir.join(MODEL_INFO_FILE), toml::to_string(&info)?.as_bytes())?;
    write_train_log(&ckpt_dir.join(TRAIN_LOG_FILE), &log)?;
    let best_val = log
        .epochs
        .iter()
        .find(|e| e.epoch == log.best_epoch)
        .and_then(|e| e.val_accuracy)
        .map_or("n/a".into(), |a| format!("{a:.4}"));
    println!(
        "trained {} epochs on {} training bags; kept epoch {} (val accuracy {best_val})",
        log.epochs.len(),
        bags.split(Split::Train).count(),
        log.best_epoch,
    );
    Ok(())
}

struct Loaded {
    model: MattModel,
    table: SegmentTable,
    bags: BagSet,
    features: FeatureStore,
}

fn load_trained(data: DataArgs, cfg: &RunConfig) -> anyhow::Result<Loaded> {
    let ckpt_dir = existing(checkpoint_dir(data.checkpoint_dir, cfg)?, "checkpoint dir")?;
    let info_path = existing(ckpt_dir.join(MODEL_INFO_FILE), "model info")?;
    let info: ModelInfo = toml::from_str(&std::fs::read_to_string(&info_path)?)
        .with_context(|| format!("parsing {}", info_path.display()))?;
    let params: ParamStore = load_checkpoint(&existing(ckpt_dir.join(CHECKPOINT_FILE), "checkpoint")?)?;
    let aggregator: Aggregator = parse_named(&info.aggregator)?;
    let model = MattModel::from_params(MattModel::infer_config(&params, aggregator)?, params)?;
    let table = load_table(data.metadata, cfg)?;
    if table.vocabulary.names != info.genres {
        return Err(invalid("metadata genres differ from the ones the checkpoint was trained on"));
    }
    let feature_dir = require(data.feature_dir, cfg.paths.feature_dir.clone(), "feature-dir")?;
    let feature_set = data.feature_set.unwrap_or_else(|| info.feature_set.clone());
    let features = load_features(&feature_dir, &feature_set)?;
    if features.dim() != model.config().encoder.input_dim {
        return Err(invalid(format!(
            "feature set {feature_set} has {} columns, the checkpoint expects {}",
            features.dim(),
            model.config().encoder.input_dim
        )));
    }
    let bags = build_bags(&table, label_policy(data.label_policy, cfg)?)?;
    Ok(Loaded {
        model,
        table,
        bags,
        features,
    })
}

fn eval_mode(flag: Option<String>, cfg: &RunConfig) -> anyhow::Result<EvalMode> {
    flag.or(cfg.eval.mode.clone()).map_or(Ok(EvalMode::Bag), |s| parse_named(&s))
}

fn evaluate_cmd(args: EvaluateArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let report_dir = require(args.report_dir, cfg.paths.report_dir.clone(), "report-dir")?;
    let mode = eval_mode(args.mode, cfg)?;
    let subsets = match args.subsets {
        Some(text) => parse_list(&text, "--subsets")?,
        None => cfg.eval.subsets.clone().unwrap_or(DEFAULT_SUBSETS.to_vec()),
    };
    let ks = match args.ks {
        Some(text) => parse_list(&text, "--ks")?,
        None => cfg.eval.ks.clone().unwrap_or(DEFAULT_KS.to_vec()),
    };
    let oracle = args.oracle.map(|p| existing(p, "oracle")).transpose()?;
    let loaded = load_trained(args.data, cfg)?;
    if loaded.bags.split(Split::Test).next().is_none() {
        return Err(invalid("metadata has no test rows"));
    }
    let report = evaluate(&loaded.model, &loaded.bags, &loaded.features, mode, &subsets, &ks)?;
    write_report(&report_dir, &report)?;
    print!("{}", format_report(&report));
    if let Some(path) = oracle {
        let oracle = read_oracle(&path)?;
        let report = evaluate_oracle(&oracle, &loaded.bags, &loaded.features, mode, &subsets, &ks)?;
        write_report(&report_dir.join("oracle"), &report)?;
        println!("oracle:");
        print!("{}", format_report(&report));
    }
    Ok(())
}

fn predict_cmd(args: PredictArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let mode = eval_mode(args.mode, cfg)?;
    let split = Split::parse(&args.split).ok_or_else(|| invalid(format!("unknown split `{}`", args.split)))?;
    let Loaded {
        model,
        table,
        bags,
        features,
        ..
    } = load_trained(args.data, cfg)?;
    let bags = match mode {
        EvalMode::Bag => bags,
        EvalMode::Segment => segment_bags(&table),
    };
    let names = &table.vocabulary.names;
    let mut out = String::from("track_id\tpredicted_genre\tp_max\ttop5\tattention\n");
    for bag in bags.split(split) {
        let pred = model.forward_bag(&features.bag_vectors(bag)?)?;
        let p = &pred.probabilities;
        let order = ranking(p);
        let top: Vec<String> = order.iter().take(5).map(|&g| format!("{}:{:.6}", names[g], p[g])).collect();
        let weights: Vec<String> = pred.attention_weights.iter().map(|w| format!("{w:.6}")).collect();
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}",
            bag.segment_ids.join(";"),
            names[order[0]],
            p[order[0]],
            top.join(","),
            weights.join(";")
        )?;
    }
    write_text(args.out.as_deref(), &out)
}

fn grad_check(args: GradCheckArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let aggregator: Aggregator = parse_named(&args.aggregator)?;
    let model_cfg = ModelConfig {
        encoder: EncoderConfig {
            input_dim: args.input_dim,
            hidden_dims: parse_list(&args.hidden, "--hidden")?,
            output_dim: args.embedding_dim,
        },
        n_genres: args.genres,
        aggregator,
    };
    model_cfg.validate()?;
    let sizes = parse_list(&args.bag_sizes, "--bag-sizes")?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(invalid("--bag-sizes needs positive sizes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pick(args.seed, cfg.seed, 0));
    let mut failed = Vec::new();
    for m in sizes {
        let model = MattModel::new(model_cfg.clone(), rng.random())?;
        let bag: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..args.input_dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let gold = rng.random_range(0..args.genres);
        let forward = model.forward_traced(&bag)?;
        let (_, d_scores) = nll_loss(&forward.prediction, gold);
        let mut grads = model.params().zeroed_clone();
        model.backward(&forward, &d_scores, &mut grads)?;
        let mut analytic = model.params().clone();
        for (p, g) in analytic.params_mut().iter_mut().zip(grads.params()) {
            p.grad = g.grad.clone();
        }
        let loss = |p: &ParamStore| {
            let probe = MattModel::from_params(model_cfg.clone(), p.clone()).expect("same layout");
            nll_loss(&probe.forward_bag(&bag).expect("valid bag"), gold).0
        };
        let report = finite_difference_check(loss, &analytic, 1e-5, args.tolerance, rng.random());
        for p in &report.params {
            println!("bag size {m}\t{}\t{} entries\tmax rel err {:.3e}", p.name, p.checked, p.max_rel_error);
        }
        if !report.passed() {
            failed.push(format!("bag size {m}: {:.3e}", report.max_rel_error()));
        }
    }
    if failed.is_empty() {
        println!("gradient check passed (tolerance {:e})", args.tolerance);
        Ok(())
    } else {
        anyhow::bail!("gradient check failed: {}", failed.join(", "))
    }
}
