use lora_rake::channel::{add_awgn, apply_channel, build_frame};
use lora_rake::sim::{run_detectors, ChannelSpec, Detector, DetectorKind, EbN0Axis, SimConfig};
use lora_rake::waveform::{ebn0_from_snr_db, noise_variance, snr_from_ebn0_db};
use lora_rake::{LoRaParams, MultipathChannel, SelectionMode, Symbol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn measured_snr_matches_nominal() {
    let params = LoRaParams::new(7).unwrap();
    let data: Vec<Symbol> = (0..400).map(|i| Symbol::new(i % 128, &params).unwrap()).collect();
    let frame = build_frame(&params, 0, &data);
    let clean = apply_channel(&params, &frame, &MultipathChannel::identity()).unwrap();
    for ebn0 in [-4.0, 0.0, 6.0] {
        let snr = snr_from_ebn0_db(&params, ebn0);
        assert!((ebn0_from_snr_db(&params, snr) - ebn0).abs() < 1e-12);
        let mut rx = clean.clone();
        add_awgn(&mut rx, noise_variance(snr), &mut ChaCha8Rng::seed_from_u64(4));
        let signal: f64 = clean.iter().map(|c| c.norm_sqr()).sum();
        let noise: f64 = rx.iter().zip(&clean).map(|(r, c)| (r - c).norm_sqr()).sum();
        let measured = 10.0 * (signal / noise).log10();
        assert!((measured - snr).abs() < 0.05, "{measured} vs {snr}");
    }
}

#[test]
fn noise_free_c1_frames_are_decoded_by_every_detector() {
    let cfg = SimConfig {
        channel: ChannelSpec::Named("c1".into()),
        ebn0: EbN0Axis::List(vec![300.0]),
        n_trials: 2,
        n_d: 100,
        ..SimConfig::default()
    };
    let dets: Vec<Detector> = DetectorKind::ALL
        .iter()
        .map(|&k| Detector::from_kind(k, SelectionMode::Threshold(0.3)))
        .collect();
    let points = run_detectors(&cfg, &dets).unwrap();
    assert_eq!(points.len(), DetectorKind::ALL.len());
    for p in points {
        assert_eq!(p.errors, 0, "{:?}", p.detector);
    }
}
