use matt_core::dataset::{build_bags, generate_synthetic, parse_metadata, write_metadata, LabelPolicy, SynthConfig};
use matt_core::dsp::{all_feature_set_names, feature_set_columns, AudioSignal, FeatureConfig, FeatureExtractor};
use matt_core::formats::{read_mel, read_wav, write_mel, write_wav};

fn chirp(seconds: f64) -> AudioSignal {
    let rate = 44_100u32;
    let n = (seconds * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (0.4 * (2.0 * std::f64::consts::PI * (200.0 + 400.0 * t) * t).sin()) as f32
        })
        .collect();
    AudioSignal::new(samples, rate).unwrap()
}

#[test]
fn extraction_is_finite_deterministic_and_sized_by_feature_set() {
    let extractor = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let signal = chirp(2.0);
    let a = extractor.extract(&signal).unwrap();
    let b = extractor.extract(&signal).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.mel.n_mels, a.mel.n_frames), (96, 1360));
    for name in all_feature_set_names() {
        let v = a.feature_set(&name).unwrap();
        assert_eq!(v.len(), feature_set_columns(&name).unwrap().len(), "{name}");
        assert!(v.iter().all(|x| x.is_finite()), "{name}");
    }
    assert_eq!(a.feature_set("1to9").unwrap().len(), 518);
}

#[test]
fn silence_is_handled_and_sits_on_the_db_floor() {
    let extractor = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let silence = AudioSignal::new(vec![0.0; 44_100], 44_100).unwrap();
    let f = extractor.extract(&silence).unwrap();
    assert!(f.mel.values.iter().all(|&v| v == -80.0));
    assert!(f.feature_set("1to9").unwrap().iter().all(|x| x.is_finite()));
}

#[test]
fn wav_and_mel_files_preserve_features() {
    let dir = tempfile::tempdir().unwrap();
    let extractor = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let signal = chirp(1.2);
    let wav = dir.path().join("x.wav");
    write_wav(&wav, &signal).unwrap();
    let decoded = read_wav(&wav).unwrap();
    let direct = extractor.extract(&signal).unwrap();
    let reread = extractor.extract(&decoded).unwrap();
    assert_eq!(direct, reread);

    let mel_path = dir.path().join("x.mel");
    write_mel(&mel_path, &direct.mel).unwrap();
    assert_eq!(read_mel(&mel_path).unwrap().values, direct.mel.values);
}

#[test]
fn metadata_written_for_a_synthetic_set_rebuilds_the_same_bags() {
    let data = generate_synthetic(&SynthConfig {
        n_genres: 5,
        head_count: 20,
        feature_dim: 6,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut bytes = Vec::new();
    write_metadata(&data.table, &mut bytes).unwrap();
    let table = parse_metadata(bytes.as_slice()).unwrap();
    assert_eq!(table.records, data.table.records);
    assert_eq!(build_bags(&table, LabelPolicy::Strict).unwrap().bags, data.bags.bags);
}
