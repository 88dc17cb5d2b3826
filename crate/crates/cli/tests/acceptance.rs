//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs single-threaded so timings are comparable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rodrecon::baseline::percentile;
use rodrecon::datagen::{build_training_set, generate_initial_dataset, Envelope, NoiseModel, SurrogateConfig};
use rodrecon::geom::{exp_se3, exp_so3, hat, Mat3, Pose, Twist, Vec3};
use rodrecon::net::{loss, loss_gradient, MlpModel, Problem};
use rodrecon::reduction::{fit_pca, PcaConfig};
use rodrecon::rod::{
    even_marker_layout, integrate_kinematics, interpolate_pose, objective, objective_gradient, Marker,
    MeasurementSet, RodProperties, StrainField, StrainVector,
};
use rodrecon_cli::config::{PipelineConfig, Preset};
use rodrecon_cli::pipeline::{
    cmd_benchmark, cmd_infer, cmd_pca, cmd_replay, cmd_sample, cmd_simulate, cmd_train, run_through_train,
    TIMING_FILES,
};
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;
use tempfile::TempDir;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn report(id: usize, name: &str, (v, secs): (Verdict, f64), limit_s: Option<f64>) -> bool {
    let in_time = limit_s.is_none_or(|l| secs < l);
    let pass = v.pass && in_time;
    let limit = limit_s.map_or(String::new(), |l| format!(" limit {l} s"));
    println!(
        "{} {id:>2} {name}: {} [{secs:.1} s{limit}]",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale
}

/// Explicit Euler on `R' = R w^`, `x' = R v` with `n`, `2n` and `4n`
/// substeps, Richardson-extrapolated twice.
fn euler_oracle(xi: &Twist, h: f64, n: usize) -> (Mat3, Vec3) {
    let run = |steps: usize| {
        let dt = h / steps as f64;
        let w = hat(&xi.angular);
        let (mut r, mut x) = (Mat3::identity(), Vec3::zeros());
        for _ in 0..steps {
            x += r * xi.linear * dt;
            r += r * w * dt;
        }
        (r, x)
    };
    let (r1, x1) = run(n);
    let (r2, x2) = run(2 * n);
    let (r4, x4) = run(4 * n);
    ((r4 * 8.0 - r2 * 6.0 + r1) / 3.0, (x4 * 8.0 - x2 * 6.0 + x1) / 3.0)
}

fn criterion_1() -> Verdict {
    let length = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut pos, mut rot) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let xi = Twist::new(
            Vec3::from_fn(|_, _| rng.random_range(-15.0..15.0)),
            Vec3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(0.8..1.2),
            ),
        );
        let g = exp_se3(&xi, length);
        let (r, x) = euler_oracle(&xi, length, 10_000);
        pos = pos.max((g.position - x).norm());
        rot = rot.max((g.rotation.matrix() - r).norm());
    }
    verdict(
        pos <= 1e-7 * length && rot <= 1e-8,
        format!("max position error {:.2e} L0, max rotation error {rot:.2e}", pos / length),
    )
}

fn criterion_2() -> Verdict {
    let length = 0.2;
    let props = RodProperties::new(length, 200).unwrap();
    let circle = StrainVector::new(Vec3::new(2.0 * PI / length, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
    let field = StrainField::constant(props.grid(), circle).unwrap();
    let poses = integrate_kinematics(&field, &Pose::identity()).unwrap();
    let gap = poses.last().unwrap().position.norm() / length;
    verdict(gap <= 1e-6, format!("tip-to-base distance {gap:.2e} L0"))
}

fn smooth_field(rng: &mut ChaCha8Rng, props: &RodProperties) -> StrainField {
    let amp: [f64; 6] = std::array::from_fn(|i| rng.random_range(-1.0..1.0) * if i < 3 { 8.0 } else { 0.1 });
    let freq: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.5..2.0));
    let phase: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let length = props.length;
    StrainField::from_fn(props.grid(), |s| {
        let mut v = StrainVector::rest().to_array();
        for i in 0..6 {
            v[i] += amp[i] * (freq[i] * PI * s / length + phase[i]).sin();
        }
        StrainVector::from_array(v)
    })
    .unwrap()
}

/// A strain field and markers read off a different smooth posture, each
/// perturbed by a few percent of the length and a few degrees.
fn rod_instance(seed: u64) -> (StrainField, MeasurementSet, RodProperties) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = 0.2;
    let mut props = RodProperties::new(length, 25).unwrap();
    props.stiffness_angular = Vec3::from_fn(|_, _| rng.random_range(0.5..2.0));
    props.stiffness_linear = Vec3::from_fn(|_, _| rng.random_range(1.0..10.0));
    let field = smooth_field(&mut rng, &props);
    let other = smooth_field(&mut rng, &props);
    let poses = integrate_kinematics(&other, &Pose::identity()).unwrap();
    let mut s: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95) * length).collect();
    s.sort_by(f64::total_cmp);
    s.push(length);
    let markers = s
        .iter()
        .map(|&s| {
            let q = interpolate_pose(&other, &poses, s).unwrap();
            let dx = Vec3::from_fn(|_, _| rng.random_range(-0.03..0.03)) * length;
            let dr = Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05));
            Marker {
                s,
                pose: Pose::new(exp_so3(&dr, 1.0) * q.rotation, q.position + dx),
            }
        })
        .collect();
    (field, MeasurementSet::new(markers, length).unwrap(), props)
}

fn central_difference(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut p = x.to_vec();
            p[i] = x[i] + h;
            let fp = f(&p);
            p[i] = x[i] - h;
            (fp - f(&p)) / (2.0 * h)
        })
        .collect()
}

fn criterion_3() -> Verdict {
    let eta = 1e4;
    let mut rod_worst = 0.0f64;
    for seed in 0..20 {
        let (field, meas, props) = rod_instance(seed);
        let grid = field.grid().to_vec();
        let exact: Vec<f64> = objective_gradient(&field, &Pose::identity(), &meas, &props, eta)
            .unwrap()
            .concat();
        let fd = central_difference(&field.to_flat(), |x| {
            let f = StrainField::from_flat(grid.clone(), x).unwrap();
            objective(&f, &Pose::identity(), &meas, &props, eta).unwrap()
        });
        rod_worst = rod_worst.max(norm_rel_err(&exact, &fd));
    }

    let mut net_worst = 0.0f64;
    for seed in 0..20 {
        let rod = RodProperties::new(0.3, 20).unwrap();
        let cfg = SurrogateConfig {
            rod: rod.clone(),
            n_modes: 3,
            amplitude_angular: Vec3::repeat(4.0),
            amplitude_linear: Vec3::new(0.02, 0.02, 0.05),
            n_trajectories: 4,
            steps_per_trajectory: 6,
            envelope: Envelope::Sinusoid,
            seed,
        };
        let basis = fit_pca(&generate_initial_dataset(&cfg).unwrap(), &PcaConfig::new(2)).unwrap();
        let marker_s = even_marker_layout(rod.length, 3);
        let noise = NoiseModel {
            sigma_position: 3e-4,
            sigma_angle: 0.01,
            seed,
        };
        let set = build_training_set(&basis, &rod, &Pose::identity(), &marker_s, 5, &noise, seed).unwrap();
        let p = Problem {
            basis: &basis,
            rod: &rod,
            base: Pose::identity(),
            eta: 1e4,
        };
        let model = MlpModel::new(&[6, 5], &marker_s, rod.length, &basis, seed).unwrap();
        let batch: Vec<usize> = (0..set.len()).collect();
        let (_, exact) = loss_gradient(&model, &p, &set, &batch).unwrap();
        let fd = central_difference(model.mlp.params(), |w| {
            let mut m = model.clone();
            m.mlp.params_mut().copy_from_slice(w);
            loss(&m, &p, &set, &batch).unwrap()
        });
        net_worst = net_worst.max(norm_rel_err(&exact, &fd));
    }
    verdict(
        rod_worst <= 1e-5 && net_worst <= 1e-4,
        format!("worst relative error rod {rod_worst:.2e} (<= 1e-5), network {net_worst:.2e} (<= 1e-4)"),
    )
}

fn criterion_4() -> Verdict {
    let cfg = PipelineConfig::preset(Preset::Octopus)
        .with_overrides(toml::from_str("n_modes = 3\nn_basis = 3").unwrap())
        .unwrap();
    let data = generate_initial_dataset(&cfg.surrogate().unwrap()).unwrap();
    let basis = fit_pca(&data, &cfg.pca()).unwrap();
    let retained = basis
        .strains()
        .iter()
        .map(|b| b.retained_variance)
        .fold(f64::INFINITY, f64::min);
    let worst = data
        .samples()
        .iter()
        .map(|f| {
            let back = basis.synthesize(&basis.project(f).unwrap()).unwrap();
            norm_rel_err(&back.to_flat(), &f.to_flat())
        })
        .fold(0.0, f64::max);
    verdict(
        retained >= 0.99 && worst <= 1e-2,
        format!(
            "min retained variance {retained:.6}, worst round-trip error {worst:.2e} over {} samples",
            data.len()
        ),
    )
}

fn criterion_5(dirs: &mut Vec<(u64, TempDir)>) -> Verdict {
    let mut ratios = Vec::new();
    for seed in 1..=10u64 {
        let mut cfg = PipelineConfig::preset(Preset::Br2);
        cfg.seed = seed;
        let dir = tempfile::tempdir().unwrap();
        let out = run_through_train(&cfg, dir.path()).unwrap();
        ratios.push(out.first_val_normalized() / out.last_val_normalized());
        dirs.push((seed, dir));
    }
    let passing = ratios.iter().filter(|&&r| r >= 100.0).count();
    let listed: Vec<String> = ratios.iter().map(|r| format!("{r:.0}")).collect();
    verdict(
        passing >= 8,
        format!("{passing}/10 seeds with epoch-1/epoch-100 validation loss >= 100 (ratios {})", listed.join(" ")),
    )
}

fn criterion_9(reference: &Path) -> Verdict {
    let mut cfg = PipelineConfig::preset(Preset::Br2);
    cfg.seed = 1;
    cmd_infer(&cfg, reference, true).unwrap();
    cmd_replay(&cfg, reference, false).unwrap();
    let rerun = tempfile::tempdir().unwrap();
    let dir = rerun.path();
    cmd_simulate(&cfg, dir).unwrap();
    cmd_pca(&cfg, dir).unwrap();
    cmd_sample(&cfg, dir).unwrap();
    cmd_train(&cfg, dir, None).unwrap();
    cmd_infer(&cfg, dir, true).unwrap();
    cmd_replay(&cfg, dir, false).unwrap();
    let mut compared = Vec::new();
    let mut differing = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if TIMING_FILES.contains(&name.as_str()) {
            continue;
        }
        if std::fs::read(dir.join(&name)).ok() != std::fs::read(reference.join(&name)).ok() {
            differing.push(name.clone());
        }
        compared.push(name);
    }
    compared.sort();
    verdict(
        differing.is_empty() && compared.len() >= 10,
        format!(
            "{} files compared byte for byte, {} differ {differing:?}",
            compared.len(),
            differing.len()
        ),
    )
}

fn criterion_10(dir: &Path) -> Verdict {
    let mut cfg = PipelineConfig::preset(Preset::Br2);
    cfg.seed = 1;
    let r = cmd_replay(&cfg, dir, true).unwrap();
    verdict(
        r.p95() < 0.01 && r.achieved_hz() >= 0.99 * r.rate_hz,
        format!(
            "{} frames at {} Hz: achieved {:.2} Hz, latency p50 {:.1} us, p95 {:.1} us, {} deadline misses",
            r.latencies.len(),
            r.rate_hz,
            r.achieved_hz(),
            r.p50() * 1e6,
            r.p95() * 1e6,
            r.deadline_misses()
        ),
    )
}

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    let mut all = Vec::new();

    all.push(report(1, "geometry exactness", timed(criterion_1), Some(5.0)));
    all.push(report(2, "kinematic closure", timed(criterion_2), Some(1.0)));
    all.push(report(3, "gradient correctness", timed(criterion_3), Some(60.0)));
    all.push(report(4, "PCA fidelity", timed(criterion_4), Some(30.0)));

    let mut br2_dirs = Vec::new();
    let c5 = timed(|| criterion_5(&mut br2_dirs));
    all.push(report(5, "training convergence (BR2)", c5, Some(1800.0)));

    let octopus = PipelineConfig::preset(Preset::Octopus);
    let oct_dir = tempfile::tempdir().unwrap();
    let c6 = timed(|| {
        let trained = run_through_train(&octopus, oct_dir.path()).unwrap();
        let inferred = cmd_infer(&octopus, oct_dir.path(), false).unwrap();
        let errors = inferred.errors();
        let (mean, p95) = (inferred.mean_error(), percentile(&errors, 0.95));
        verdict(
            mean <= 2e-3 && p95 <= 5e-3,
            format!(
                "{} held-out frames: mean e_t {mean:.3e} (<= 2e-3), p95 {p95:.3e} (<= 5e-3); trained in {:.0} s",
                errors.len(),
                trained.seconds
            ),
        )
    });
    all.push(report(6, "reconstruction accuracy (octopus)", c6, None));

    let start = Instant::now();
    let bench = cmd_benchmark(&octopus, oct_dir.path(), 100).unwrap();
    let bench_secs = start.elapsed().as_secs_f64();
    let s = bench.summary.clone().expect("frames benchmarked");
    let iters: Vec<f64> = bench.rows.iter().map(|r| r.baseline_iterations as f64).collect();
    let c7 = verdict(
        s.speed_ratio >= 1e3,
        format!(
            "median network {:.1} us, baseline {:.3} s ({} median iterations, {}/{} converged): ratio {:.2e} (>= 1e3)",
            s.nn_median_seconds * 1e6,
            s.baseline_median_seconds,
            percentile(&iters, 0.5),
            s.baseline_converged,
            s.frames,
            s.speed_ratio
        ),
    );
    all.push(report(7, "speedup", (c7, bench_secs), None));
    let c8 = verdict(
        s.within_10x >= 0.9,
        format!(
            "{:.0}% of frames with network loss <= 10x baseline (>= 90%); median normalized loss {:.3e} vs {:.3e}",
            100.0 * s.within_10x,
            s.nn_median_loss,
            s.baseline_median_loss
        ),
    );
    all.push(report(8, "accuracy comparability", (c8, 0.0), None));

    let seed_one = br2_dirs[0].1.path();
    let c10 = timed(|| criterion_10(seed_one));
    let c9 = timed(|| criterion_9(seed_one));
    all.push(report(9, "determinism", c9, None));
    all.push(report(10, "replay latency (BR2)", c10, None));

    let passed = all.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", all.len());
    if passed != all.len() {
        std::process::exit(1);
    }
}
