//! Pipeline stages. Each reads its inputs from a working directory, writes
//! its outputs there and returns a report whose `Display` is a one-line
//! `key=value` summary.
//!
//! Binary artifacts embed the config hash and the SHA-256 of every input
//! file; a stage refuses inputs whose recorded upstream hashes no longer
//! match the files on disk. Files named `*_timing.csv`, `benchmark.csv` and
//! `replay_latency.csv` hold wall-clock measurements and differ between
//! runs; every other output is byte-identical for identical config and seed.

use crate::artifacts::{
    basis_from_artifact, basis_to_artifact, dataset_from_artifact, dataset_to_artifact, training_set_from_artifact,
    training_set_to_artifact, FrameLog, BASIS_KIND, DATASET_KIND, FRAME_LOG_KIND, TRAINING_SET_KIND,
};
use crate::config::PipelineConfig;
use rodrecon::baseline::{benchmark, percentile, BenchmarkRow, BenchmarkSummary};
use rodrecon::datagen::{build_training_set, generate_frames, generate_initial_dataset, SurrogateConfig, TrainingSet};
use rodrecon::format::{file_sha256, Artifact};
use rodrecon::geom::Pose;
use rodrecon::net::{infer, train_with_restarts, MlpModel, Problem, TrainReport};
use rodrecon::reduction::{fit_pca, BasisSet};
use rodrecon::rod::{objective, MeasurementSet, RodProperties};
use rodrecon::{Error, Result};
use serde::Serialize;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

pub const DATASET_FILE: &str = "dataset.bin";
pub const BASIS_FILE: &str = "basis.bin";
pub const TRAINING_SET_FILE: &str = "training_set.bin";
pub const FRAMES_FILE: &str = "frames.bin";
pub const MODEL_FILE: &str = "model.bin";

fn stamp(a: &mut Artifact, cfg: &PipelineConfig, dir: &Path, inputs: &[&str]) -> Result<()> {
    a.set("config_sha256", cfg.checksum());
    let mut map = serde_json::Map::new();
    for name in inputs {
        map.insert(name.to_string(), file_sha256(&dir.join(name))?.into());
    }
    a.set("inputs", serde_json::Value::Object(map));
    Ok(())
}

/// Reads an artifact and checks its recorded inputs against the files now
/// in `dir`.
fn read_checked(dir: &Path, name: &str, kind: &str) -> Result<Artifact> {
    let a = Artifact::read(&dir.join(name), kind)?;
    if let Some(inputs) = a.meta.get("inputs").and_then(|v| v.as_object()) {
        for (input, expected) in inputs {
            let expected = expected.as_str().unwrap_or_default();
            let found = file_sha256(&dir.join(input))?;
            if found != expected {
                return Err(Error::ChecksumMismatch {
                    what: format!("{input} (input of {name})"),
                    expected: expected.to_string(),
                    found,
                });
            }
        }
    }
    Ok(a)
}

fn write_artifact(a: &Artifact, dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    a.write(&path)?;
    file_sha256(&path)
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidInput(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for row in rows {
        w.serialize(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn check_grid(basis: &BasisSet, rod: &RodProperties) -> Result<()> {
    if basis.grid() != rod.grid().as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "basis grid has {} nodes over {} m, config asks for {} over {} m",
            basis.grid().len(),
            basis.grid().last().copied().unwrap_or(0.0),
            rod.n_nodes,
            rod.length
        )));
    }
    Ok(())
}

pub fn load_basis(dir: &Path) -> Result<BasisSet> {
    basis_from_artifact(&read_checked(dir, BASIS_FILE, BASIS_KIND)?)
}

pub fn load_frames(dir: &Path) -> Result<FrameLog> {
    FrameLog::from_artifact(&read_checked(dir, FRAMES_FILE, FRAME_LOG_KIND)?)
}

/// Model checked against both its recorded inputs and the basis.
pub fn load_model(dir: &Path, basis: &BasisSet) -> Result<MlpModel> {
    let model = MlpModel::from_artifact(&read_checked(dir, MODEL_FILE, "model")?)?;
    model.check_basis(basis)?;
    Ok(model)
}

pub fn load_training_set(dir: &Path, basis: &BasisSet) -> Result<TrainingSet> {
    let (set, checksum) = training_set_from_artifact(&read_checked(dir, TRAINING_SET_FILE, TRAINING_SET_KIND)?)?;
    if checksum != basis.checksum() {
        return Err(Error::ChecksumMismatch {
            what: "basis of training set".into(),
            expected: checksum,
            found: basis.checksum(),
        });
    }
    Ok(set)
}

fn problem<'a>(cfg: &PipelineConfig, basis: &'a BasisSet, rod: &'a RodProperties) -> Problem<'a> {
    Problem {
        basis,
        rod,
        base: Pose::identity(),
        eta: cfg.eta,
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(16)]
}

#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub samples: usize,
    pub nodes: usize,
    pub sha256: String,
}

impl fmt::Display for SimulateReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "simulate samples={} nodes={} out={DATASET_FILE} sha256={}",
            self.samples,
            self.nodes,
            short(&self.sha256)
        )
    }
}

/// Surrogate strain trajectories to `dataset.bin`.
pub fn cmd_simulate(cfg: &PipelineConfig, dir: &Path) -> Result<SimulateReport> {
    ensure_dir(dir)?;
    let data = generate_initial_dataset(&cfg.surrogate()?)?;
    let mut a = dataset_to_artifact(&data);
    stamp(&mut a, cfg, dir, &[])?;
    Ok(SimulateReport {
        samples: data.len(),
        nodes: data.grid().len(),
        sha256: write_artifact(&a, dir, DATASET_FILE)?,
    })
}

#[derive(Clone, Debug)]
pub struct PcaReport {
    pub n_basis: usize,
    pub n_coefficients: usize,
    pub retained_variance: Vec<f64>,
    pub checksum: String,
}

impl fmt::Display for PcaReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let retained: Vec<String> = self.retained_variance.iter().map(|v| format!("{v:.6}")).collect();
        write!(
            f,
            "pca n_basis={} coefficients={} retained={} out={BASIS_FILE} checksum={}",
            self.n_basis,
            self.n_coefficients,
            retained.join(","),
            short(&self.checksum)
        )
    }
}

#[derive(Serialize)]
struct PcaRow {
    strain: usize,
    frozen: bool,
    retained_variance: f64,
    leading_eigenvalue: f64,
}

#[derive(Serialize)]
struct BasisRow {
    strain: usize,
    /// -1 for the mean, otherwise the basis-function index.
    function: i64,
    s: f64,
    value: f64,
}

/// `dataset.bin` to `basis.bin`, `pca.csv` and `basis.csv`.
pub fn cmd_pca(cfg: &PipelineConfig, dir: &Path) -> Result<PcaReport> {
    let data = dataset_from_artifact(&read_checked(dir, DATASET_FILE, DATASET_KIND)?)?;
    let basis = fit_pca(&data, &cfg.pca())?;
    check_grid(&basis, &cfg.rod()?)?;
    let mut a = basis_to_artifact(&basis);
    stamp(&mut a, cfg, dir, &[DATASET_FILE])?;
    write_artifact(&a, dir, BASIS_FILE)?;

    write_csv(
        &dir.join("pca.csv"),
        basis.strains().iter().enumerate().map(|(i, b)| PcaRow {
            strain: i,
            frozen: b.is_frozen(),
            retained_variance: b.retained_variance,
            leading_eigenvalue: b.eigenvalues.first().copied().unwrap_or(0.0),
        }),
    )?;
    let grid = basis.grid();
    let mut rows = Vec::new();
    for (i, b) in basis.strains().iter().enumerate() {
        for (j, f) in std::iter::once(&b.mean).chain(&b.functions).enumerate() {
            rows.extend(grid.iter().zip(f).map(|(&s, &value)| BasisRow {
                strain: i,
                function: j as i64 - 1,
                s,
                value,
            }));
        }
    }
    write_csv(&dir.join("basis.csv"), rows)?;
    Ok(PcaReport {
        n_basis: basis.n_basis(),
        n_coefficients: basis.n_coefficients(),
        retained_variance: basis.strains().iter().map(|b| b.retained_variance).collect(),
        checksum: basis.checksum(),
    })
}

#[derive(Clone, Debug)]
pub struct SampleReport {
    pub samples: usize,
    pub frames: usize,
    pub markers: usize,
}

impl fmt::Display for SampleReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "sample samples={} frames={} markers={} out={TRAINING_SET_FILE},{FRAMES_FILE}",
            self.samples, self.frames, self.markers
        )
    }
}

/// Held-out frames along fresh surrogate trajectories.
pub fn frame_log(cfg: &PipelineConfig) -> Result<FrameLog> {
    let surrogate = SurrogateConfig {
        seed: cfg.seeds().frames,
        ..cfg.surrogate()?
    };
    let marker_s = cfg.marker_s();
    let frames = generate_frames(
        &surrogate,
        &Pose::identity(),
        &marker_s,
        &cfg.frame_noise(),
        cfg.n_frames,
        cfg.frame_rate_hz,
    )?;
    FrameLog::new(cfg.frame_rate_hz, cfg.length_m, marker_s, frames)
}

/// `basis.bin` to `training_set.bin` (sampled postures) and `frames.bin`
/// (held-out frame log).
pub fn cmd_sample(cfg: &PipelineConfig, dir: &Path) -> Result<SampleReport> {
    let basis = load_basis(dir)?;
    let rod = cfg.rod()?;
    check_grid(&basis, &rod)?;
    let marker_s = cfg.marker_s();
    let set = build_training_set(
        &basis,
        &rod,
        &Pose::identity(),
        &marker_s,
        cfg.n_training_samples,
        &cfg.noise(),
        cfg.seeds().sample,
    )?;
    let mut a = training_set_to_artifact(&set, &basis);
    stamp(&mut a, cfg, dir, &[BASIS_FILE])?;
    write_artifact(&a, dir, TRAINING_SET_FILE)?;

    let log = frame_log(cfg)?;
    let mut a = log.to_artifact();
    stamp(&mut a, cfg, dir, &[])?;
    write_artifact(&a, dir, FRAMES_FILE)?;
    Ok(SampleReport {
        samples: set.len(),
        frames: log.frames.len(),
        markers: marker_s.len(),
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub restart: usize,
    pub seconds: f64,
}

impl TrainOutcome {
    pub fn first_val_normalized(&self) -> f64 {
        self.report.epochs.first().map_or(f64::NAN, |e| e.val_normalized)
    }

    pub fn last_val_normalized(&self) -> f64 {
        self.report.epochs.last().map_or(f64::NAN, |e| e.val_normalized)
    }
}

impl fmt::Display for TrainOutcome {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let best = &self.report.epochs[self.report.best_epoch];
        write!(
            f,
            "train epochs={} restart={} best_epoch={} val_normalized_first={:.4e} val_normalized_last={:.4e} \
             val_normalized_best={:.4e} seconds={:.1} out={MODEL_FILE}",
            self.report.epochs.len(),
            self.restart,
            self.report.best_epoch + 1,
            self.first_val_normalized(),
            self.last_val_normalized(),
            best.val_normalized,
            self.seconds
        )
    }
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    train_normalized: f64,
    val_normalized: f64,
    best: bool,
}

#[derive(Serialize)]
struct EpochTimingRow {
    epoch: usize,
    seconds: f64,
}

/// `training_set.bin` and `basis.bin` to `model.bin`, `training.csv` and
/// `training_timing.csv`. `restarts` overrides the configured count.
pub fn cmd_train(cfg: &PipelineConfig, dir: &Path, restarts: Option<usize>) -> Result<TrainOutcome> {
    let basis = load_basis(dir)?;
    let rod = cfg.rod()?;
    check_grid(&basis, &rod)?;
    let set = load_training_set(dir, &basis)?;
    let start = Instant::now();
    let restarts = restarts.unwrap_or(cfg.restarts);
    if restarts == 0 {
        return Err(Error::config("restarts", "must be at least 1"));
    }
    let (model, report, restart) = train_with_restarts(&cfg.train(), &set, &problem(cfg, &basis, &rod), restarts)?;
    let seconds = start.elapsed().as_secs_f64();

    let mut a = model.to_artifact();
    a.set("restart", restart);
    a.set("best_epoch", report.best_epoch + 1);
    stamp(&mut a, cfg, dir, &[BASIS_FILE, TRAINING_SET_FILE])?;
    write_artifact(&a, dir, MODEL_FILE)?;
    write_csv(
        &dir.join("training.csv"),
        report.epochs.iter().enumerate().map(|(i, e)| EpochRow {
            epoch: i + 1,
            train_loss: e.train_loss,
            val_loss: e.val_loss,
            train_normalized: e.train_normalized,
            val_normalized: e.val_normalized,
            best: i == report.best_epoch,
        }),
    )?;
    write_csv(
        &dir.join("training_timing.csv"),
        report.epochs.iter().enumerate().map(|(i, e)| EpochTimingRow {
            epoch: i + 1,
            seconds: e.seconds,
        }),
    )?;
    Ok(TrainOutcome {
        report,
        restart,
        seconds,
    })
}

/// Per-frame reconstruction quality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameResult {
    pub frame: usize,
    pub time: f64,
    /// Mismatch per marker, `Phi / N_m`.
    pub e_t: f64,
    pub normalized_loss: f64,
    pub tip_x: f64,
    pub tip_y: f64,
    pub tip_z: f64,
    pub marker_tip_x: f64,
    pub marker_tip_y: f64,
    pub marker_tip_z: f64,
}

#[derive(Clone, Debug)]
pub struct InferReport {
    pub frames: Vec<FrameResult>,
}

impl InferReport {
    pub fn errors(&self) -> Vec<f64> {
        self.frames.iter().map(|r| r.e_t).collect()
    }

    pub fn mean_error(&self) -> f64 {
        let e = self.errors();
        e.iter().sum::<f64>() / e.len().max(1) as f64
    }
}

impl fmt::Display for InferReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "infer frames={} e_t_mean={:.4e} e_t_p95={:.4e} out=reconstruction.csv",
            self.frames.len(),
            self.mean_error(),
            percentile(&self.errors(), 0.95)
        )
    }
}

#[derive(Serialize)]
struct CenterlineRow {
    frame: usize,
    s: f64,
    x: f64,
    y: f64,
    z: f64,
    d1_x: f64,
    d1_y: f64,
    d1_z: f64,
    d3_x: f64,
    d3_y: f64,
    d3_z: f64,
}

fn frame_result(
    frame: usize,
    time: f64,
    meas: &MeasurementSet,
    p: &Problem,
    poses: &[Pose],
    field: &rodrecon::rod::StrainField,
    e_t: f64,
) -> Result<FrameResult> {
    let j = objective(field, &p.base, meas, p.rod, p.eta)?;
    let tip = poses.last().expect("nonempty posture").position;
    let marker = meas.markers().last().expect("nonempty measurement").pose.position;
    Ok(FrameResult {
        frame,
        time,
        e_t,
        normalized_loss: j / p.normalizer(meas.len()),
        tip_x: tip.x,
        tip_y: tip.y,
        tip_z: tip.z,
        marker_tip_x: marker.x,
        marker_tip_y: marker.y,
        marker_tip_z: marker.z,
    })
}

/// Reconstructs every frame of `frames.bin` into `reconstruction.csv`;
/// with `centerline`, also writes every node pose to `centerline.csv`.
pub fn cmd_infer(cfg: &PipelineConfig, dir: &Path, centerline: bool) -> Result<InferReport> {
    let basis = load_basis(dir)?;
    let rod = cfg.rod()?;
    check_grid(&basis, &rod)?;
    let model = load_model(dir, &basis)?;
    let log = load_frames(dir)?;
    let p = problem(cfg, &basis, &rod);
    let outputs = rodrecon::par::map(&log.frames, |fr| -> Result<_> {
        let inf = infer(&model, &p, &fr.measurement)?;
        Ok((inf.field, inf.poses, inf.error))
    });
    let mut frames = Vec::with_capacity(outputs.len());
    let mut nodes = Vec::new();
    for (i, (fr, out)) in log.frames.iter().zip(outputs).enumerate() {
        let (field, poses, e_t) = out?;
        frames.push(frame_result(i, fr.time, &fr.measurement, &p, &poses, &field, e_t)?);
        if centerline {
            for (&s, q) in field.grid().iter().zip(&poses) {
                let (d1, d3) = (q.rotation.director(0), q.rotation.director(2));
                nodes.push(CenterlineRow {
                    frame: i,
                    s,
                    x: q.position.x,
                    y: q.position.y,
                    z: q.position.z,
                    d1_x: d1.x,
                    d1_y: d1.y,
                    d1_z: d1.z,
                    d3_x: d3.x,
                    d3_y: d3.y,
                    d3_z: d3.z,
                });
            }
        }
    }
    write_csv(&dir.join("reconstruction.csv"), &frames)?;
    if centerline {
        write_csv(&dir.join("centerline.csv"), nodes)?;
    }
    Ok(InferReport { frames })
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Option<BenchmarkSummary>,
}

impl BenchmarkReport {
    pub fn unconverged(&self) -> usize {
        self.rows.iter().filter(|r| !r.baseline_converged).count()
    }
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let Some(s) = &self.summary else {
            return write!(f, "benchmark frames=0 out=benchmark.csv");
        };
        let iters: Vec<f64> = self.rows.iter().map(|r| r.baseline_iterations as f64).collect();
        write!(
            f,
            "benchmark frames={} nn_median_s={:.3e} baseline_median_s={:.3e} speed_ratio={:.3e} \
             nn_median_loss={:.4e} baseline_median_loss={:.4e} within_10x={:.3} baseline_median_iters={} \
             baseline_converged={}/{} out=benchmark.csv",
            s.frames,
            s.nn_median_seconds,
            s.baseline_median_seconds,
            s.speed_ratio,
            s.nn_median_loss,
            s.baseline_median_loss,
            s.within_10x,
            percentile(&iters, 0.5),
            s.baseline_converged,
            s.frames
        )
    }
}

#[derive(Serialize)]
struct BenchmarkCsvRow {
    frame: usize,
    method: &'static str,
    seconds: f64,
    normalized_loss: f64,
    e_t: f64,
    iterations: usize,
    converged: bool,
}

/// Network against baseline solver on the first `count` frames, on the
/// calling thread. Writes `benchmark.csv` (one row per frame and method).
pub fn cmd_benchmark(cfg: &PipelineConfig, dir: &Path, count: usize) -> Result<BenchmarkReport> {
    let basis = load_basis(dir)?;
    let rod = cfg.rod()?;
    check_grid(&basis, &rod)?;
    let model = load_model(dir, &basis)?;
    let log = load_frames(dir)?;
    let frames: Vec<MeasurementSet> = log.frames.iter().take(count).map(|f| f.measurement.clone()).collect();
    let rows = benchmark(&frames, &model, &problem(cfg, &basis, &rod), &cfg.solver())?;
    write_csv(
        &dir.join("benchmark.csv"),
        rows.iter().flat_map(|r| {
            [
                BenchmarkCsvRow {
                    frame: r.frame,
                    method: "network",
                    seconds: r.nn_seconds,
                    normalized_loss: r.nn_normalized_loss,
                    e_t: r.nn_error,
                    iterations: 1,
                    converged: true,
                },
                BenchmarkCsvRow {
                    frame: r.frame,
                    method: "baseline",
                    seconds: r.baseline_seconds,
                    normalized_loss: r.baseline_normalized_loss,
                    e_t: r.baseline_error,
                    iterations: r.baseline_iterations,
                    converged: r.baseline_converged,
                },
            ]
        }),
    )?;
    Ok(BenchmarkReport {
        summary: BenchmarkSummary::from_rows(&rows),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub rate_hz: f64,
    pub paced: bool,
    pub latencies: Vec<f64>,
    pub elapsed: f64,
    pub frames: Vec<FrameResult>,
}

impl ReplayReport {
    pub fn p50(&self) -> f64 {
        percentile(&self.latencies, 0.5)
    }

    pub fn p95(&self) -> f64 {
        percentile(&self.latencies, 0.95)
    }

    /// Frames whose inference took longer than one frame period.
    pub fn deadline_misses(&self) -> usize {
        self.latencies.iter().filter(|&&l| l > 1.0 / self.rate_hz).count()
    }

    /// Frames processed per second of wall time.
    pub fn achieved_hz(&self) -> f64 {
        self.latencies.len() as f64 / self.elapsed
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "replay frames={} rate_hz={} paced={} achieved_hz={:.2} latency_p50_s={:.3e} latency_p95_s={:.3e} \
             latency_max_s={:.3e} deadline_misses={} out=replay.csv,replay_latency.csv",
            self.latencies.len(),
            self.rate_hz,
            self.paced,
            self.achieved_hz(),
            self.p50(),
            self.p95(),
            self.latencies.iter().copied().fold(0.0, f64::max),
            self.deadline_misses()
        )
    }
}

#[derive(Serialize)]
struct LatencyRow {
    frame: usize,
    time: f64,
    latency_s: f64,
    lateness_s: f64,
}

/// Streams `frames.bin` through the network, releasing frame `i` at its
/// timestamp unless `pace` is off. Writes the e_t series to `replay.csv`
/// and per-frame latencies to `replay_latency.csv`.
pub fn cmd_replay(cfg: &PipelineConfig, dir: &Path, pace: bool) -> Result<ReplayReport> {
    let basis = load_basis(dir)?;
    let rod = cfg.rod()?;
    check_grid(&basis, &rod)?;
    let model = load_model(dir, &basis)?;
    let log = load_frames(dir)?;
    let p = problem(cfg, &basis, &rod);
    let t0 = log.frames.first().map_or(0.0, |f| f.time);

    let start = Instant::now();
    let mut latencies = Vec::with_capacity(log.frames.len());
    let mut lateness = Vec::with_capacity(log.frames.len());
    let mut inferred = Vec::with_capacity(log.frames.len());
    for fr in &log.frames {
        let due = start + Duration::from_secs_f64(fr.time - t0);
        if pace {
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let begin = Instant::now();
        let inf = infer(&model, &p, &fr.measurement)?;
        latencies.push(begin.elapsed().as_secs_f64());
        lateness.push(begin.saturating_duration_since(due).as_secs_f64());
        inferred.push(inf);
    }
    let elapsed = start.elapsed().as_secs_f64();

    let frames = log
        .frames
        .iter()
        .zip(&inferred)
        .enumerate()
        .map(|(i, (fr, inf))| frame_result(i, fr.time, &fr.measurement, &p, &inf.poses, &inf.field, inf.error))
        .collect::<Result<Vec<_>>>()?;
    write_csv(&dir.join("replay.csv"), &frames)?;
    write_csv(
        &dir.join("replay_latency.csv"),
        log.frames.iter().enumerate().map(|(i, fr)| LatencyRow {
            frame: i,
            time: fr.time,
            latency_s: latencies[i],
            lateness_s: lateness[i],
        }),
    )?;
    Ok(ReplayReport {
        rate_hz: log.rate_hz,
        paced: pace,
        latencies,
        elapsed,
        frames,
    })
}

/// Output files whose contents include wall-clock measurements.
pub const TIMING_FILES: &[&str] = &["training_timing.csv", "benchmark.csv", "replay_latency.csv"];

/// Runs simulate, pca, sample and train in `dir`.
pub fn run_through_train(cfg: &PipelineConfig, dir: &Path) -> Result<TrainOutcome> {
    cmd_simulate(cfg, dir)?;
    cmd_pca(cfg, dir)?;
    cmd_sample(cfg, dir)?;
    cmd_train(cfg, dir, None)
}
