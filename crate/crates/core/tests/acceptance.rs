//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use matt_core::dataset::{generate_synthetic, SynthConfig};
use matt_core::dsp::{
    self, spectral_bandwidth, spectral_centroid, summarize, time_domain_descriptors, AudioSignal, FeatureConfig,
    FeatureExtractor, FeatureFamily, Stft, StftConfig,
};
use matt_core::evaluation::{evaluate, evaluate_oracle, EvalMode, EvalReport, DEFAULT_KS, DEFAULT_SUBSETS};
use matt_core::formats::{write_checkpoint, write_report};
use matt_core::model::{Aggregator, EncoderConfig, MattModel, ModelConfig, ATTENTION_BIAS, ATTENTION_WEIGHT};
use matt_core::numeric::{finite_difference_check, ParamStore};
use matt_core::training::{nll_loss, train, train_segment_baseline, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tone(freq: f64, amp: f64, seconds: f64) -> AudioSignal {
    let rate = 44_100;
    let n = (seconds * rate as f64) as usize;
    let s = (0..n)
        .map(|i| (amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32)
        .collect();
    AudioSignal::new(s, rate).unwrap()
}

fn noise(seconds: f64, seed: u64) -> AudioSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * 44_100.0) as usize;
    AudioSignal::new((0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect(), 44_100).unwrap()
}

fn criterion_1() -> Outcome {
    let expected = [
        (FeatureFamily::ChromaStft, 84),
        (FeatureFamily::ChromaCqt, 84),
        (FeatureFamily::ChromaCens, 84),
        (FeatureFamily::Tonnetz, 42),
        (FeatureFamily::Mfcc, 140),
        (FeatureFamily::SpecCentroid, 7),
        (FeatureFamily::SpecBandwidth, 7),
        (FeatureFamily::SpecContrast, 49),
        (FeatureFamily::SpecRolloff, 7),
        (FeatureFamily::Rms, 7),
        (FeatureFamily::Zcr, 7),
    ];
    let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let (frames, _) = ex.frame_features(&noise(30.0, 1)).unwrap();
    let started = Instant::now();
    let summaries: Vec<_> = frames.iter().map(|f| summarize(f).unwrap()).collect();
    let elapsed = started.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    for (family, dim) in expected {
        let s = summaries.iter().find(|s| s.family == family).unwrap();
        if s.values.len() != dim {
            problems.push(format!("{} has {}", family.name(), s.values.len()));
        }
    }
    let features = ex.extract(&noise(3.0, 2)).unwrap();
    for (set, dim) in [("3+6", 189), ("3+6+4", 196), ("1to9", 518)] {
        let got = features.feature_set(set).unwrap().len();
        if got != dim || dsp::feature_set_columns(set).unwrap().len() != dim {
            problems.push(format!("{set} has {got}"));
        }
    }
    check(
        problems.is_empty() && elapsed < 1.0,
        format!("11 families + 3 named sets, summarize {elapsed:.3}s {problems:?}"),
    )
}

fn criterion_2() -> Outcome {
    let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let clips = [
        ("1 s tone", tone(440.0, 0.5, 1.0)),
        ("1.7 s noise", noise(1.7, 3)),
        ("31.6 s noise", noise(31.6, 4)),
        ("45 s tone", tone(1000.0, 0.3, 45.0)),
        ("1 s silence", AudioSignal::new(vec![0.0; 44_100], 44_100).unwrap()),
    ];
    let mut shapes = Vec::new();
    for (name, clip) in &clips {
        let mel = ex.log_mel_spectrogram(clip).unwrap();
        let ok = mel.n_mels == 96 && mel.n_frames == 1360 && mel.values.len() == 96 * 1360;
        if !ok {
            shapes.push(format!("{name}: {}x{}", mel.n_mels, mel.n_frames));
        }
    }
    check(shapes.is_empty(), format!("{} clips all 96x1360 {shapes:?}", clips.len()))
}

fn model_config(input: usize, hidden: &[usize], d: usize, g: usize) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            input_dim: input,
            hidden_dims: hidden.to_vec(),
            output_dim: d,
        },
        n_genres: g,
        aggregator: Aggregator::Matt,
    }
}

fn random_bag(rng: &mut ChaCha8Rng, m: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for hidden in [vec![], vec![7], vec![6, 5]] {
        for m in [1, 2, 7] {
            for g in [2, 16] {
                let cfg = model_config(8, &hidden, 5, g);
                let model = MattModel::new(cfg.clone(), rng.random()).unwrap();
                let bag = random_bag(&mut rng, m, 8, 1.5);
                let gold = rng.random_range(0..g);
                let fwd = model.forward_traced(&bag).unwrap();
                let (_, d_scores) = nll_loss(&fwd.prediction, gold);
                let mut grads = model.params().zeroed_clone();
                model.backward(&fwd, &d_scores, &mut grads).unwrap();
                let mut analytic = model.params().clone();
                for (p, gr) in analytic.params_mut().iter_mut().zip(grads.params()) {
                    p.grad = gr.grad.clone();
                }
                let loss = |p: &ParamStore| {
                    let probe = MattModel::from_params(cfg.clone(), p.clone()).unwrap();
                    nll_loss(&probe.forward_bag(&bag).unwrap(), gold).0
                };
                let report = finite_difference_check(loss, &analytic, 1e-5, 1e-4, rng.random());
                worst = worst.max(report.max_rel_error());
                checks += 1;
                if !report.passed() {
                    failures.push(format!("depth {} m {m} G {g}: {:.2e}", hidden.len(), report.max_rel_error()));
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    check(
        failures.is_empty() && elapsed < 60.0,
        format!("{checks} configurations, max rel err {worst:.2e}, {elapsed:.1}s {failures:?}"),
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bound = 2f64.exp() + 1e-9;
    let (mut worst_sum, mut worst_ratio, mut worst_perm, mut worst_dup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut problems = Vec::new();
    for i in 0..1000 {
        let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(2..9)).collect();
        let (dim, d, g) = (rng.random_range(1..10), rng.random_range(1..8), rng.random_range(2..17));
        let mut model = MattModel::new(model_config(dim, &hidden, d, g), rng.random()).unwrap();
        // Large attention weights push tanh towards saturation, probing the bound.
        let scale = rng.random_range(0.1..50.0);
        let w = model.params().index_of(ATTENTION_WEIGHT).unwrap();
        model.params_mut().value_mut(w).as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        let b = model.params().index_of(ATTENTION_BIAS).unwrap();
        model.params_mut().value_mut(b).set(0, 0, rng.random_range(-5.0..5.0));

        let m = rng.random_range(1..13);
        let bag = random_bag(&mut rng, m, dim, 3.0);
        let pred = model.forward_bag(&bag).unwrap();
        let a = &pred.attention_weights;
        worst_sum = worst_sum.max((a.iter().sum::<f64>() - 1.0).abs());
        let (lo, hi) = a.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo <= 0.0 {
            problems.push(format!("bag {i}: non-positive weight"));
        }
        worst_ratio = worst_ratio.max(hi / lo);

        let mut shuffled = bag.clone();
        shuffled.reverse();
        shuffled.rotate_left(m / 2);
        worst_perm = worst_perm.max(max_abs_diff(&model.forward_bag(&shuffled).unwrap().probabilities, &pred.probabilities));
        let doubled: Vec<_> = bag.iter().chain(bag.iter()).cloned().collect();
        worst_dup = worst_dup.max(max_abs_diff(&model.forward_bag(&doubled).unwrap().probabilities, &pred.probabilities));

        let single = model.forward_bag(&bag[..1]).unwrap();
        let direct = model.genre_scores(&model.encode_segment(&bag[0]).unwrap()).unwrap().1;
        if single.probabilities != direct
            || model.predict_segment(&bag[0]).unwrap() != single
            || single.attention_weights != [1.0]
        {
            problems.push(format!("bag {i}: singleton mismatch"));
        }
    }
    let ok = problems.is_empty() && worst_sum <= 1e-12 && worst_ratio <= bound && worst_perm <= 1e-9 && worst_dup <= 1e-9;
    check(
        ok,
        format!(
            "1000 bags: |sum-1| {worst_sum:.1e}, max ratio {worst_ratio:.4} (bound {bound:.4}), perm {worst_perm:.1e}, dup {worst_dup:.1e} {problems:?}"
        ),
    )
}

/// Reflect padding without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period.max(1));
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Energy ratio between the one-sided spectrum (expanded to both sides) and
/// N times the windowed time-domain energy, worst over all frames.
fn parseval_error(signal: &AudioSignal, cfg: StftConfig) -> f64 {
    let stft = Stft::new(cfg).unwrap();
    let spec = stft.magnitudes(signal).unwrap();
    let n = cfg.n_fft;
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let x = signal.samples();
    let pad = if cfg.center { (n / 2) as isize } else { 0 };
    let mut worst = 0.0f64;
    for t in 0..spec.n_frames() {
        let start = (t * cfg.hop) as isize - pad;
        let time: f64 = (0..n)
            .map(|i| {
                let v = x[reflect(start + i as isize, x.len())] as f64 * window[i];
                v * v
            })
            .sum::<f64>()
            * n as f64;
        let frame = spec.frame(t);
        let freq: f64 = frame
            .iter()
            .enumerate()
            .map(|(k, m)| if k == 0 || k == n / 2 { m * m } else { 2.0 * m * m })
            .sum();
        worst = worst.max((freq - time).abs() / time.max(1e-300));
    }
    worst
}

fn criterion_5() -> Outcome {
    let mut problems = Vec::new();
    let bin = 44_100.0 / 2048.0;
    let stft_cfg = StftConfig::default();

    for freq in [220.0, 440.0, 1000.0, 3520.0, 8000.0] {
        let spec = dsp::stft(&tone(freq, 0.5, 2.0), stft_cfg).unwrap();
        let c = spectral_centroid(&spec);
        // frames touching the reflected edges are excluded
        let worst = c[2..c.len() - 2].iter().map(|v| (v - freq).abs()).fold(0.0, f64::max);
        if worst > bin {
            problems.push(format!("centroid of {freq} Hz off by {worst:.2} Hz"));
        }
        let bw = spectral_bandwidth(&spec, &c);
        if bw.iter().any(|v| !v.is_finite()) {
            problems.push("non-finite bandwidth".into());
        }
    }

    for amp in [0.1, 0.5, 0.9] {
        let d = time_domain_descriptors(&tone(440.0, amp, 2.0), 2048, 512).unwrap();
        let target = amp / 2f64.sqrt();
        let worst = d.rms.values.as_slice().iter().map(|v| ((v - target) / target).abs()).fold(0.0, f64::max);
        if worst > 0.01 {
            problems.push(format!("rms of amplitude {amp} off by {:.2}%", 100.0 * worst));
        }
    }

    let alternating = AudioSignal::new((0..44_100).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect(), 44_100).unwrap();
    let zcr = time_domain_descriptors(&alternating, 2048, 512).unwrap().zcr;
    if zcr.values.as_slice().iter().any(|&v| v != 1.0) {
        problems.push("alternating-sign zcr != 1".into());
    }

    let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let silent = ex.extract(&AudioSignal::new(vec![0.0; 3 * 44_100], 44_100).unwrap()).unwrap();
    let finite = silent.summaries.iter().all(|s| s.values.iter().all(|v| v.is_finite()))
        && silent.mel.values.iter().all(|v| v.is_finite());
    if !finite {
        problems.push("silence produced non-finite features".into());
    }

    let mut parseval = 0.0f64;
    for (signal, cfg) in [
        (noise(1.0, 5), stft_cfg),
        (tone(440.0, 0.7, 1.0), StftConfig { center: false, ..stft_cfg }),
        (noise(0.5, 6), StftConfig { n_fft: 1024, hop: 256, center: true }),
    ] {
        parseval = parseval.max(parseval_error(&signal, cfg));
    }
    if parseval > 1e-6 {
        problems.push(format!("parseval rel err {parseval:.2e}"));
    }
    check(
        problems.is_empty(),
        format!("centroid, rms, zcr, silence, parseval rel err {parseval:.1e} {problems:?}"),
    )
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn benchmark_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 300,
        bags_per_batch: 16,
        learning_rate: 3e-3,
        early_stop_patience: 20,
        seed,
        ..TrainConfig::default()
    }
}

struct SeedRun {
    matt_bag: EvalReport,
    matt_segment: EvalReport,
    baseline_segment: EvalReport,
    oracle: EvalReport,
    /// Bayes oracle using the imbalanced training prior instead of a uniform one.
    prior_oracle: EvalReport,
    artifacts: Vec<u8>,
}

fn report_bytes(report: &EvalReport, dir: &Path) -> Vec<u8> {
    write_report(dir, report).unwrap();
    ["report.txt", "topk.csv", "pr.csv"]
        .iter()
        .flat_map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

fn run_seed(seed: u64) -> SeedRun {
    let synth = SynthConfig {
        n_genres: 16,
        zipf_exponent: 1.2,
        head_count: 400,
        bag_size_range: (3, 10),
        feature_dim: 32,
        noise_rate: 0.4,
        seed,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&synth).unwrap();
    let cfg = model_config(32, &[], 32, 16);
    let train_cfg = benchmark_train_config(seed);
    let (matt, _) = train(&data.bags, &data.features, cfg.clone(), &train_cfg).unwrap();
    let (baseline, _) = train_segment_baseline(&data.table, &data.features, cfg, &train_cfg).unwrap();
    let eval = |m: &MattModel, mode| evaluate(m, &data.bags, &data.features, mode, &DEFAULT_SUBSETS, &DEFAULT_KS).unwrap();
    let mut prior_oracle = data.oracle.clone();
    let counts = synth.train_bag_counts();
    let total: usize = counts.iter().sum();
    prior_oracle.log_prior = counts.iter().map(|&c| (c as f64 / total as f64).ln()).collect();
    let run = SeedRun {
        matt_bag: eval(&matt, EvalMode::Bag),
        matt_segment: eval(&matt, EvalMode::Segment),
        baseline_segment: eval(&baseline, EvalMode::Segment),
        oracle: evaluate_oracle(&data.oracle, &data.bags, &data.features, EvalMode::Bag, &DEFAULT_SUBSETS, &DEFAULT_KS)
            .unwrap(),
        prior_oracle: evaluate_oracle(&prior_oracle, &data.bags, &data.features, EvalMode::Bag, &DEFAULT_SUBSETS, &DEFAULT_KS)
            .unwrap(),
        artifacts: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    let mut artifacts = write_checkpoint(matt.params());
    artifacts.extend(write_checkpoint(baseline.params()));
    for r in [&run.matt_bag, &run.matt_segment, &run.baseline_segment, &run.oracle] {
        artifacts.extend(report_bytes(r, dir.path()));
    }
    SeedRun { artifacts, ..run }
}

fn tail(r: &EvalReport) -> f64 {
    r.top_k(100, 2).expect("tail subset is non-empty")
}

fn criterion_6(runs: &[SeedRun], elapsed: f64) -> Outcome {
    let n = runs.len() as f64;
    let matt: Vec<f64> = runs.iter().map(|r| tail(&r.matt_bag)).collect();
    let base: Vec<f64> = runs.iter().map(|r| tail(&r.baseline_segment)).collect();
    let oracle_mean = runs.iter().map(|r| tail(&r.oracle)).sum::<f64>() / n;
    let prior_oracle_mean = runs.iter().map(|r| tail(&r.prior_oracle)).sum::<f64>() / n;
    let matt_mean = matt.iter().sum::<f64>() / n;
    let base_mean = base.iter().sum::<f64>() / n;
    let every_seed = matt.iter().zip(&base).all(|(m, b)| m > b);
    let margin = matt_mean - base_mean;
    let ratio = matt_mean / oracle_mean;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    check(
        every_seed && margin >= 0.10 && ratio >= 0.60 && elapsed < 600.0,
        format!(
            "tail Top@2 matt [{}] baseline [{}]; every seed {every_seed}, margin {:.1}pp (need 10), \
             matt/oracle {matt_mean:.3}/{oracle_mean:.3} = {:.0}% (need 60; oracle with training prior {prior_oracle_mean:.3}), {elapsed:.0}s",
            fmt(&matt),
            fmt(&base),
            100.0 * margin,
            100.0 * ratio
        ),
    )
}

fn criterion_7(runs: &[SeedRun]) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (seed, r) in SEEDS.iter().zip(runs) {
        let (bag, seg, base) = (
            r.matt_bag.overall_accuracy,
            r.matt_segment.overall_accuracy,
            r.baseline_segment.overall_accuracy,
        );
        ok &= seg < bag && seg > base;
        lines.push(format!("seed {seed}: {bag:.3} > {seg:.3} > {base:.3}"));
    }
    check(ok, format!("bag > segment > baseline segment accuracy; {}", lines.join(", ")))
}

fn criterion_8(runs: &[SeedRun]) -> Outcome {
    let mismatched: Vec<u64> = SEEDS
        .iter()
        .zip(runs)
        .filter(|(&seed, r)| run_seed(seed).artifacts != r.artifacts)
        .map(|(&seed, _)| seed)
        .collect();
    let bytes: usize = runs.iter().map(|r| r.artifacts.len()).sum();
    check(
        mismatched.is_empty(),
        format!("{} seeds rerun, {bytes} checkpoint+report bytes compared, mismatched seeds {mismatched:?}", SEEDS.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "dimensionality contract", criterion_1()),
        (2, "mel shape contract", criterion_2()),
        (3, "gradient suite", criterion_3()),
        (4, "attention invariants", criterion_4()),
        (5, "DSP analytic suite", criterion_5()),
    ];
    let started = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| run_seed(s)).collect();
    let elapsed = started.elapsed().as_secs_f64();
    results.push((6, "synthetic long-tail benchmark", criterion_6(&runs, elapsed)));
    results.push((7, "bag-trained model evaluated per segment", criterion_7(&runs)));
    results.push((8, "determinism", criterion_8(&runs)));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n} [{status}] {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
