use std::path::{Path, PathBuf};
use std::time::Instant;

use eventf2s::checkpoint::Checkpoint;
use eventf2s::dataset::encode_samples;
use eventf2s::evaluation::{
    compute_cost, denoise_csv_row, roc_sweep, spike_stats, synth_mixture, CostReport, DenoiseMetrics,
    DENOISE_CSV_HEADER,
};
use eventf2s::io::write_csv_events;
use eventf2s::network::ZMap;
use eventf2s::training::{init_weights, predict, train as run_training, EpochStats, TrainError, TrainReport};
use eventf2s::{encode_stream, F2sNetwork, LayerSpec, Sample};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::data::{self, geometry};
use crate::error::{CliError, Result};

/// `--out` when given, otherwise `runs/<command>-<UTC timestamp>`.
pub fn run_dir(out: Option<&Path>, command: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
            let base = PathBuf::from("runs").join(format!("{command}-{stamp}"));
            let mut dir = base.clone();
            let mut n = 1;
            while dir.exists() {
                dir = PathBuf::from(format!("{}-{n}", base.display()));
                n += 1;
            }
            dir
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Writes via a sibling temp file and rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types are serialisable");
    text.push('\n');
    write_atomic(path, &text)
}

fn archive_config(dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    write_atomic(&dir.join("config.toml"), &cfg.to_toml())
}

fn encode_split(cfg: &PipelineConfig, samples: &[Sample]) -> Result<Vec<(ZMap, usize)>> {
    encode_samples(&cfg.sste, samples, cfg.dataset.t_max_norm).map_err(|e| CliError::data("encoding", e))
}

#[derive(Debug, Serialize)]
pub struct EncodeSummary {
    pub events_in: usize,
    pub events_out: usize,
    pub active_pixels_in: usize,
    pub n_s_raw: f64,
    pub n_s_encoded: f64,
}

pub fn encode(cfg: &PipelineConfig, input: &Path, output: &Path, out_dir: Option<&Path>) -> Result<EncodeSummary> {
    let raw = data::read_events(input, geometry(cfg))?;
    let enc = encode_stream(&cfg.sste, &raw).map_err(|e| CliError::data(input.display(), e))?;
    let stats = spike_stats(&raw, &enc).map_err(|e| CliError::data(input.display(), e))?;
    write_atomic(output, &write_csv_events(&enc))?;
    let summary = EncodeSummary {
        events_in: raw.len(),
        events_out: enc.len(),
        active_pixels_in: stats.active_raw,
        n_s_raw: stats.n_s_raw,
        n_s_encoded: stats.n_s_encoded,
    };
    if let Some(dir) = out_dir {
        let dir = run_dir(Some(dir), "encode")?;
        archive_config(&dir, cfg)?;
        write_json(&dir.join("encode_summary.json"), &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct DenoiseBlock {
    pub snr_target: f64,
    pub seed: u64,
    pub snr: f64,
    pub tp_monotone: bool,
    pub fp_monotone: bool,
    pub rows: Vec<DenoiseMetrics>,
}

#[derive(Debug, Serialize)]
pub struct DenoiseSummary {
    pub snr_definition: &'static str,
    pub blocks: Vec<DenoiseBlock>,
}

pub fn denoise_bench(cfg: &PipelineConfig, dir: &Path) -> Result<DenoiseSummary> {
    archive_config(dir, cfg)?;
    let mut csv = format!("seed,{DENOISE_CSV_HEADER}\n");
    let mut blocks = Vec::new();
    for &snr_target in &cfg.eval.snrs {
        for &seed in &cfg.eval.seeds {
            let (mixed, snr) =
                synth_mixture(&cfg.eval.mixture, snr_target, seed).map_err(|e| CliError::Config(format!("eval.mixture: {e}")))?;
            let rows = roc_sweep(&cfg.sste, &cfg.eval.thetas, &mixed).map_err(|e| CliError::data("denoise sweep", e))?;
            for r in &rows {
                csv.push_str(&format!("{seed},{}\n", denoise_csv_row(snr_target, r)));
            }
            blocks.push(DenoiseBlock {
                snr_target,
                seed,
                snr,
                tp_monotone: rows.windows(2).all(|w| w[1].tp_rate <= w[0].tp_rate),
                fp_monotone: rows.windows(2).all(|w| w[1].fp_rate <= w[0].fp_rate),
                rows,
            });
        }
    }
    write_atomic(&dir.join("denoise.csv"), &csv)?;
    let summary = DenoiseSummary { snr_definition: "signal / (signal + noise)", blocks };
    write_json(&dir.join("denoise_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub start_epoch: usize,
    pub epochs_total: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub final_epoch: Option<EpochStats>,
}

#[derive(Serialize)]
struct Timing {
    total_s: f64,
    epochs_s: Vec<f64>,
}

fn check_compatible(net: &F2sNetwork, cfg: &PipelineConfig) -> Result<()> {
    let want = cfg.build_network()?.specs();
    if net.specs() != want {
        let (c, h, w) = net.input_shape();
        return Err(CliError::Data(format!(
            "checkpoint network (input {c}x{h}x{w}, {} classes, {} layers) does not match the configured network \
             (input 1x{}x{}, {} classes, {} layers)",
            net.classes(),
            net.layers.len(),
            cfg.dataset.height,
            cfg.dataset.width,
            cfg.dataset.classes,
            want.len()
        )));
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, F2sNetwork)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let ck = Checkpoint::from_json(&text).map_err(|e| CliError::data(path.display(), e))?;
    let net = ck.network().map_err(|e| CliError::data(path.display(), e))?;
    Ok((ck, net))
}

/// Rows of an earlier report up to and including `epoch`, kept when a run
/// resumes into the same directory.
fn earlier_rows(path: &Path, epoch: usize) -> String {
    let Ok(text) = std::fs::read_to_string(path) else {
        return String::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| l.split(',').next().and_then(|e| e.parse::<usize>().ok()).is_some_and(|e| e <= epoch))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn train(cfg: &PipelineConfig, dir: &Path, resume: Option<&Path>) -> Result<TrainSummary> {
    let started = Instant::now();
    archive_config(dir, cfg)?;
    let splits = data::load(cfg)?;
    let train_set = encode_split(cfg, &splits.train)?;
    let test_set = encode_split(cfg, &splits.test)?;

    let (mut net, start_epoch) = match resume {
        Some(path) => {
            let (ck, net) = load_checkpoint(path)?;
            check_compatible(&net, cfg)?;
            (net, ck.epoch)
        }
        None => {
            let mut net = cfg.build_network()?;
            init_weights(&mut net, cfg.network.init_seed, cfg.train.init_weight_sum, cfg.train.init_spread);
            (net, 0)
        }
    };

    let ck_path = dir.join("checkpoint.json");
    let csv_path = dir.join("train_report.csv");
    let header = TrainReport::default().to_csv();
    let mut rows = if start_epoch > 0 { earlier_rows(&csv_path, start_epoch) } else { String::new() };
    let mut epoch_times = Vec::new();
    let report = run_training(
        &mut net,
        &train_set,
        (!test_set.is_empty()).then_some(&test_set[..]),
        &cfg.train,
        start_epoch,
        |stats, net| {
            let fail = |e: CliError| TrainError::Callback(e.to_string());
            write_atomic(&ck_path, &Checkpoint::new(net, stats.epoch).to_json()).map_err(fail)?;
            let one = TrainReport { epochs: vec![stats.clone()] }.to_csv();
            rows.push_str(&one[header.len()..]);
            write_atomic(&csv_path, &format!("{header}{rows}")).map_err(fail)?;
            epoch_times.push(stats.wall_time_s);
            eprintln!(
                "epoch {:>3}  lr {:<6}  loss {:.4}  train {:.3}  test {}",
                stats.epoch,
                stats.lr,
                stats.train_loss,
                stats.train_accuracy,
                stats.test_accuracy.map_or("-".into(), |a| format!("{a:.3}"))
            );
            Ok(())
        },
    )
    .map_err(|e| match e {
        TrainError::Callback(msg) => CliError::Io { path: dir.to_path_buf(), source: std::io::Error::other(msg) },
        other => CliError::data("training", other),
    })?;
    if start_epoch >= cfg.train.epochs_total {
        write_atomic(&ck_path, &Checkpoint::new(&net, start_epoch).to_json())?;
    }

    let summary = TrainSummary {
        start_epoch,
        epochs_total: cfg.train.epochs_total,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        final_epoch: report.epochs.last().cloned(),
    };
    write_json(&dir.join("train_summary.json"), &summary)?;
    write_json(&dir.join("timing.json"), &Timing { total_s: started.elapsed().as_secs_f64(), epochs_s: epoch_times })?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub checkpoint_epoch: usize,
    pub samples: usize,
    pub accuracy: f64,
    pub abstained: usize,
    pub per_class_accuracy: Vec<f64>,
}

pub fn eval(cfg: &PipelineConfig, checkpoint: &Path, dir: &Path) -> Result<EvalReport> {
    archive_config(dir, cfg)?;
    let (ck, net) = load_checkpoint(checkpoint)?;
    let (c, h, w) = net.input_shape();
    if (c, h, w) != (1, cfg.dataset.height as usize, cfg.dataset.width as usize) || net.classes() != cfg.dataset.classes {
        return Err(CliError::Data(format!(
            "checkpoint expects {c}x{h}x{w} input and {} classes; dataset is 1x{}x{} with {} classes",
            net.classes(),
            cfg.dataset.height,
            cfg.dataset.width,
            cfg.dataset.classes
        )));
    }
    let splits = data::load(cfg)?;
    let set = encode_split(cfg, splits.eval_set())?;
    let classes = cfg.dataset.classes;
    let (mut hits, mut seen, mut abstained) = (vec![0usize; classes], vec![0usize; classes], 0);
    for (x, y) in &set {
        let (z, _) = net.forward(x).map_err(|e| CliError::data("forward pass", e))?;
        seen[*y] += 1;
        match predict(&z) {
            Some(k) if k == *y => hits[*y] += 1,
            Some(_) => {}
            None => abstained += 1,
        }
    }
    let report = EvalReport {
        checkpoint_epoch: ck.epoch,
        samples: set.len(),
        accuracy: hits.iter().sum::<usize>() as f64 / set.len().max(1) as f64,
        abstained,
        per_class_accuracy: hits.iter().zip(&seen).map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect(),
    };
    write_json(&dir.join("eval.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct CostSummary {
    pub samples: usize,
    pub first_layer: LayerSpec,
    pub raw: CostReport,
    pub encoded: CostReport,
    /// `encoded.n_e / raw.n_e`.
    pub ratio: f64,
    /// Mean over samples of raw events per active pixel.
    pub n_s_raw: f64,
    pub n_s_encoded: f64,
    /// Largest per-pixel encoded count seen in any sample.
    pub max_encoded_per_pixel: u32,
    /// Samples with a repeated raw pixel whose encoded stream is not smaller.
    pub samples_not_reduced: usize,
}

pub fn cost(cfg: &PipelineConfig, dir: &Path) -> Result<CostSummary> {
    archive_config(dir, cfg)?;
    let first_layer = cfg.build_network()?.layers[0].spec;
    let splits = data::load(cfg)?;
    let set = splits.eval_set();
    let (mut raw_total, mut enc_total, mut ns_raw, mut ns_enc) = (0usize, 0usize, 0.0, 0.0);
    let (mut max_pp, mut not_reduced) = (0u32, 0usize);
    for s in set {
        let enc = encode_stream(&cfg.sste, &s.stream).map_err(|e| CliError::data("encoding", e))?;
        let st = spike_stats(&s.stream, &enc).map_err(|e| CliError::data("spike stats", e))?;
        raw_total += s.stream.len();
        enc_total += enc.len();
        ns_raw += st.n_s_raw;
        ns_enc += st.n_s_encoded;
        max_pp = max_pp.max(enc.pixel_counts().into_iter().max().unwrap_or(0));
        let repeated = s.stream.pixel_counts().iter().any(|&c| c >= 2);
        if repeated && enc.len() >= s.stream.len() {
            not_reduced += 1;
        }
    }
    let n = set.len().max(1) as f64;
    let raw = compute_cost(raw_total as f64 / n, &first_layer);
    let encoded = compute_cost(enc_total as f64 / n, &first_layer);
    let summary = CostSummary {
        samples: set.len(),
        first_layer,
        ratio: if raw.n_e > 0.0 { encoded.n_e / raw.n_e } else { 0.0 },
        raw,
        encoded,
        n_s_raw: ns_raw / n,
        n_s_encoded: ns_enc / n,
        max_encoded_per_pixel: max_pp,
        samples_not_reduced: not_reduced,
    };
    write_json(&dir.join("cost.json"), &summary)?;
    Ok(summary)
}
