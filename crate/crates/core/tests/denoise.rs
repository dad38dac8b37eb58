use eventf2s::evaluation::{roc_sweep, spike_stats, synth_mixture, MixtureSpec};
use eventf2s::sste::{encode_stream, SsteConfig, SsteState};

fn uncapped(theta: f64) -> SsteConfig {
    SsteConfig { theta, max_spikes_per_pixel: u32::MAX, ..Default::default() }
}

#[test]
fn tiny_threshold_passes_every_supported_event() {
    let (mixed, _) = synth_mixture(&MixtureSpec::default(), 0.9, 3).unwrap();
    let cfg = uncapped(1e-9);
    let mut st = SsteState::new(cfg, mixed.geometry()).unwrap();
    let supported = mixed.events().iter().filter(|e| st.process_event_traced(e).unwrap().potential >= 1e-9).count();
    let kept = encode_stream(&cfg, &mixed).unwrap();
    assert_eq!(kept.len(), supported);

    let rows = roc_sweep(&uncapped(1.0), &[1e-9, 1e9], &mixed).unwrap();
    assert!(rows[0].tp_rate > 0.95, "{:?}", rows[0]);
    assert_eq!((rows[1].tp_rate, rows[1].fp_rate), (0.0, 0.0));
}

#[test]
fn mixture_lands_near_requested_snr_on_average() {
    for snr in [0.9, 0.97, 0.98] {
        let runs: Vec<f64> = (0..20).map(|seed| synth_mixture(&MixtureSpec::default(), snr, seed).unwrap().1).collect();
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        assert!((mean - snr).abs() < 0.01, "asked {snr}, got {mean}");
    }
    let (mixed, _) = synth_mixture(&MixtureSpec::default(), 0.9, 1).unwrap();
    assert!(mixed.events().iter().all(|e| e.label.is_some()));
    assert!(synth_mixture(&MixtureSpec::default(), 0.0, 1).is_err());
}

#[test]
fn mixture_is_seeded() {
    let spec = MixtureSpec::default();
    assert_eq!(synth_mixture(&spec, 0.9, 8).unwrap(), synth_mixture(&spec, 0.9, 8).unwrap());
    assert_ne!(synth_mixture(&spec, 0.9, 8).unwrap().0, synth_mixture(&spec, 0.9, 9).unwrap().0);
}

#[test]
fn encoded_mixture_has_one_spike_per_active_pixel() {
    let (mixed, _) = synth_mixture(&MixtureSpec::default(), 0.9, 5).unwrap();
    let enc = encode_stream(&SsteConfig::default(), &mixed).unwrap();
    let s = spike_stats(&mixed, &enc).unwrap();
    assert!(s.n_s_raw > 1.0);
    assert_eq!(s.n_s_encoded, 1.0);
}
