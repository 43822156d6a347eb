//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{brute_nearest, sample_gmm4, Rng};
use gmmap::bench::{bench_resolution, BenchConfig};
use gmmap::eval::{build_ground_truth, compute_metrics, psnr_from_mse, PSNR_CAP_DB};
use gmmap::gaussian::{cholesky_lower, gaussian_log_density};
use gmmap::io::{self, load_manifest, transform_cloud, Pose};
use gmmap::mixture::{gmm_log_likelihood, marginalize_spatial};
use gmmap::sogmm::{e_step, em_fit, kinit_responsibilities};
use gmmap::spatialhash::hash_key;
use gmmap::synth::{build_dataset, RenderNoise, SceneKind};
use gmmap::{
    reconstruct, Component, Gmm4, HashGridSpec, InferenceConfig, MapperConfig, MapperState, Mixture,
    MultimodalPoint, MultimodalPointCloud, ObservedFrame, SogmmConfig,
};
use nalgebra::{DMatrix, DVector, Matrix4, SMatrix, SVector, Vector3, Vector4};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn observed(ds: &gmmap::synth::SynthDataset, k: usize, decimation: u32) -> ObservedFrame {
    let (cloud, depths) = ds.world_frame(k, &RenderNoise::default(), decimation).unwrap();
    ObservedFrame::new(cloud, depths).unwrap()
}

fn em_correctness() -> Outcome {
    let truth = Mixture::new(
        vec![
            Component::new(
                0.5,
                Vector4::new(0.0, 0.0, 0.0, 0.2),
                Matrix4::from_diagonal(&Vector4::new(0.04, 0.02, 0.03, 0.01)),
            ),
            Component::new(0.3, Vector4::new(1.2, 0.4, 0.1, 0.5), {
                let mut c = Matrix4::from_diagonal(&Vector4::new(0.03, 0.05, 0.02, 0.02));
                c[(0, 3)] = 0.01;
                c[(3, 0)] = 0.01;
                c
            }),
            Component::new(
                0.2,
                Vector4::new(0.1, 1.3, 1.0, 0.8),
                Matrix4::from_diagonal(&Vector4::new(0.02, 0.02, 0.05, 0.005)),
            ),
        ],
        2000,
    )
    .unwrap();
    let mut rng = Rng::new(11);
    let (pts, _) = sample_gmm4(&truth, 2000, &mut rng);

    // Farthest-point seeds and nearest-seed labels; no knowledge of the truth.
    let mut seeds = vec![pts[0]];
    while seeds.len() < 3 {
        let far = pts
            .iter()
            .max_by(|a, b| {
                let da = seeds.iter().map(|s| (*a - s).norm()).fold(f64::INFINITY, f64::min);
                let db = seeds.iter().map(|s| (*b - s).norm()).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        seeds.push(*far);
    }
    let labels: Vec<usize> = pts
        .iter()
        .map(|p| {
            (0..3)
                .min_by(|&a, &b| (p - seeds[a]).norm().total_cmp(&(p - seeds[b]).norm()))
                .unwrap()
        })
        .collect();
    let init = kinit_responsibilities(&labels, 3).unwrap();

    let t = Instant::now();
    let out = single_thread(|| em_fit(&pts, &init.responsibilities, &SogmmConfig::default())).unwrap();
    let secs = t.elapsed().as_secs_f64();

    let worst_drop = out
        .log_likelihood_trace
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = out.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-8 * w[0].abs());

    let mut used = vec![false; out.model.len()];
    let mut worst_w = 0.0f64;
    let mut matched = out.model.len() == 3;
    for tc in &truth.components {
        let (j, _) = out
            .model
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| (j, (c.mean - tc.mean).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        matched &= !used[j];
        used[j] = true;
        worst_w = worst_w.max((out.model.components[j].weight - tc.weight).abs());
    }
    check(
        monotone && matched && worst_w <= 0.03 && secs < 5.0,
        format!(
            "{} iterations, largest relative drop {worst_drop:.2e}, max weight error {worst_w:.4}, {secs:.2}s on one thread",
            out.iterations
        ),
    )
}

fn direct_density(x: &Vector4<f64>, c: &Component<4>) -> f64 {
    let d = x - c.mean;
    let inv = c.covariance.try_inverse().unwrap();
    let det = c.covariance.determinant();
    (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp() / ((2.0 * std::f64::consts::PI).powi(4) * det).sqrt()
}

fn log_space_equivalence() -> Outcome {
    let mut rng = Rng::new(22);
    let model = rng.gmm4(3, 0.3, 0.2, 500);
    let (pts, _) = sample_gmm4(&model, 500, &mut rng);
    let (resp, _) = e_step(&pts, &model.components).unwrap();
    let mut worst = 0.0f64;
    for (n, x) in pts.iter().enumerate() {
        let num: Vec<f64> = model.components.iter().map(|c| c.weight * direct_density(x, c)).collect();
        let den: f64 = num.iter().sum();
        for (b, v) in num.iter().enumerate() {
            worst = worst.max((resp.get(n, b) - v / den).abs());
        }
    }
    check(worst <= 1e-9, format!("max |Δγ| = {worst:.2e}"))
}

/// Determinant and inverse through a dynamically sized LU decomposition.
fn explicit_log_density<const D: usize>(x: &SVector<f64, D>, m: &SVector<f64, D>, cov: &SMatrix<f64, D, D>) -> f64 {
    let d = DVector::from_column_slice((x - m).as_slice());
    let cov = DMatrix::from_column_slice(D, D, cov.as_slice());
    let inv = cov.clone().try_inverse().unwrap();
    -0.5 * (D as f64 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + (d.transpose() * inv * d)[(0, 0)])
}

fn cholesky_trial<const D: usize>(rng: &mut Rng) -> f64 {
    let scale = rng.range(0.05, 3.0);
    let cov = rng.spd::<D>(scale, 0.1);
    let mean = rng.vector::<D>(2.0);
    let x = mean + rng.vector::<D>(1.5);
    let got = gaussian_log_density(&x, &mean, &cholesky_lower(&cov).unwrap()).unwrap();
    let want = explicit_log_density(&x, &mean, &cov);
    (got - want).abs() / want.abs()
}

fn cholesky_oracle() -> Outcome {
    let mut rng = Rng::new(33);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let e = match i % 3 {
            0 => cholesky_trial::<2>(&mut rng),
            1 => cholesky_trial::<3>(&mut rng),
            _ => cholesky_trial::<4>(&mut rng),
        };
        worst = worst.max(e);
    }
    check(worst <= 1e-10, format!("1000 instances, max relative error {worst:.2e}"))
}

/// `ln ∫ p(x, i) di` by composite Simpson over a range covering every component.
fn quadrature_marginal(model: &Gmm4, x: &Vector3<f64>) -> f64 {
    let sd = model
        .components
        .iter()
        .map(|c| c.intensity_variance().sqrt())
        .fold(0.0, f64::max);
    let lo = model.components.iter().map(|c| c.intensity_mean()).fold(f64::INFINITY, f64::min) - 40.0 * sd;
    let hi = model.components.iter().map(|c| c.intensity_mean()).fold(f64::NEG_INFINITY, f64::max) + 40.0 * sd;
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let f = |i: f64| {
        let p = Vector4::new(x.x, x.y, x.z, i);
        model.components.iter().map(|c| c.weight * direct_density(&p, c)).sum::<f64>()
    };
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
    }
    (s * h / 3.0).ln()
}

fn marginalization_oracle() -> Outcome {
    let mut rng = Rng::new(44);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let model = rng.gmm4(2, 0.3, 0.3, 100);
        let (pts, _) = sample_gmm4(&model, 50, &mut rng);
        let xs: Vec<Vector3<f64>> = pts.iter().map(|p| p.fixed_rows::<3>(0).into_owned()).collect();
        let got = gmm_log_likelihood(&xs, &marginalize_spatial(&model), None).unwrap();
        for (x, g) in xs.iter().zip(got) {
            worst = worst.max((g - quadrature_marginal(&model, x)).abs());
        }
    }
    check(worst <= 1e-3, format!("500 queries, max |Δ ln p| = {worst:.2e}"))
}

/// Cell index along one axis by scanning every cell's interval.
fn scan_axis(v: f64, origin: f64, alpha: f64, n: u32) -> Option<i64> {
    (0..n as i64).find(|&j| {
        let lo = origin + j as f64 * alpha;
        v >= lo && v < lo + alpha
    })
}

fn hash_arithmetic() -> Outcome {
    let spec = HashGridSpec::new(0.25, [40, 30, 20]).unwrap();
    let o = spec.origin();
    let [nx, ny, nz] = spec.extents;
    let mut rng = Rng::new(55);
    let mut mismatches = 0;
    let mut outside = 0;
    for _ in 0..10_000 {
        let p = Vector3::new(
            1.1 * rng.range(o.x, -o.x),
            1.1 * rng.range(o.y, -o.y),
            1.1 * rng.range(o.z, -o.z),
        );
        let cell = (
            scan_axis(p.y, o.y, spec.resolution, ny),
            scan_axis(p.x, o.x, spec.resolution, nx),
            scan_axis(p.z, o.z, spec.resolution, nz),
        );
        let want = match cell {
            (Some(r), Some(c), Some(s)) => Some((nz as i64 * (r * nx as i64 + c) + s) as u64),
            _ => None,
        };
        outside += want.is_none() as usize;
        if hash_key(&p, &spec).ok() != want {
            mismatches += 1;
        }
    }
    let worked = hash_key(&Vector3::zeros(), &HashGridSpec::new(1.0, [4, 4, 4]).unwrap()).unwrap();
    check(
        mismatches == 0 && worked == 42,
        format!("{mismatches} mismatches over 10000 points ({outside} outside the grid), worked example -> {worked}"),
    )
}

/// Frame 1 of the overlap scene scored against the model of frame 0.
struct OverlapProbe {
    full: Vec<bool>,
    sub: Vec<bool>,
    n_submap: usize,
    n_components: usize,
    overlap: Vec<bool>,
}

fn overlap_probe(use_marginal: bool) -> OverlapProbe {
    let ds = build_dataset(SceneKind::Overlap, 2).unwrap();
    let frames: Vec<ObservedFrame> = (0..2).map(|k| observed(&ds, k, 5)).collect();
    let cfg = MapperConfig {
        use_marginal,
        ..MapperConfig::default()
    };
    let mut state = MapperState::new(HashGridSpec::default()).unwrap();
    state.process_frame(&frames[0], &cfg, &SogmmConfig::default()).unwrap();
    let phi = state.phi().unwrap();
    let cloud = &frames[1].cloud;
    let (full, _) = state.classify(cloud, phi, use_marginal, false).unwrap();
    let (sub, n_submap) = state.classify(cloud, phi, use_marginal, true).unwrap();
    OverlapProbe {
        full,
        sub,
        n_submap: n_submap.unwrap_or(0),
        n_components: state.n_components(),
        overlap: cloud.iter().map(|p| ds.visible_from(0, &p.position, 0.02)).collect(),
    }
}

fn submap_fidelity(probe: &OverlapProbe) -> Outcome {
    let same = probe.full.iter().zip(&probe.sub).filter(|(a, b)| a == b).count();
    let agreement = same as f64 / probe.full.len() as f64;
    check(
        agreement >= 0.95 && probe.n_submap < probe.n_components,
        format!(
            "agreement {agreement:.4} over {} points, |B| = {} of |K| = {}",
            probe.full.len(),
            probe.n_submap,
            probe.n_components
        ),
    )
}

fn speedup_trend() -> Outcome {
    let t = Instant::now();
    let ds = build_dataset(SceneKind::Corridor, 50).unwrap();
    let frames: Vec<ObservedFrame> = (0..50).map(|k| observed(&ds, k, 5)).collect();
    let spec = HashGridSpec {
        resolution: 0.2,
        ..HashGridSpec::default()
    };
    let bench = BenchConfig {
        repeats: 5,
        ..BenchConfig::default()
    };
    let rows = bench_resolution(
        &frames,
        &spec,
        &MapperConfig::default(),
        &SogmmConfig::with_bandwidth(0.05),
        &bench,
    )
    .unwrap();
    let secs = t.elapsed().as_secs_f64();

    let ratios: Vec<f64> = rows.iter().map(|r| r.cumulative_ratio()).collect();
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let mut sum_b = 0.0;
    let mut eligible = 0;
    let mut worst_eligible = f64::INFINITY;
    for (i, r) in rows.iter().enumerate() {
        sum_b += r.n_submap as f64;
        let avg_b = sum_b / (i + 1) as f64;
        if r.n_components as f64 >= 20.0 * avg_b {
            eligible += 1;
            worst_eligible = worst_eligible.min(r.cumulative_ratio());
        }
    }
    let last = rows.last().unwrap();
    check(
        eligible > 0 && worst_eligible >= 5.0 && monotone && secs < 300.0,
        format!(
            "{} frames scored, ratio {:.2} -> {:.2} (non-decreasing: {monotone}), min ratio where |K| >= 20 avg|B|: {worst_eligible:.2} over {eligible} frames, final |K| = {}, {secs:.0}s",
            rows.len(),
            ratios[0],
            last.cumulative_ratio(),
            last.n_components
        ),
    )
}

fn marginal_vs_4d(marginal: &OverlapProbe, full4d: &OverlapProbe) -> Outcome {
    let count = |p: &OverlapProbe| p.full.iter().zip(&p.overlap).filter(|(r, o)| **r && **o).count();
    let (n4, n3) = (count(full4d), count(marginal));
    let overlap = marginal.overlap.iter().filter(|&&o| o).count();
    check(
        n4 > n3,
        format!("of {overlap} overlap points, 4D marks {n4} relevant, spatial marginal {n3}"),
    )
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let ds = build_dataset(SceneKind::Room, 20).unwrap();
    let manifest = load_manifest(ds.write(dir.path(), "room", &RenderNoise::default()).unwrap()).unwrap();

    let mut state = MapperState::new(HashGridSpec::default()).unwrap();
    let (mcfg, scfg) = (MapperConfig::default(), SogmmConfig::with_bandwidth(0.02));
    let mut frames = Vec::new();
    for k in 0..manifest.frames.len() {
        let f = manifest.load_frame(k, 5).unwrap();
        let obs = ObservedFrame::new(transform_cloud(&f.cloud, &f.pose), f.depths).unwrap();
        state.process_frame(&obs, &mcfg, &scfg).unwrap();
        let full = manifest.load_frame(k, 1).unwrap();
        frames.push((full.cloud, full.pose));
    }
    let model = state.global().unwrap().clone();
    let pred = reconstruct(
        &model,
        &InferenceConfig {
            total_samples: 2_000_000,
            ..InferenceConfig::default()
        },
    )
    .unwrap();
    let gt = build_ground_truth(&frames, 0.01).unwrap();
    let m = compute_metrics(&pred, &gt, 0.01).unwrap();

    // Noise-free geometry, for reference only.
    let clean: Vec<(MultimodalPointCloud, Pose)> = (0..ds.poses.len())
        .map(|k| {
            let r = ds.render(k, &RenderNoise::none()).unwrap();
            (io::load_frame(&r.depth, &r.intensity, &ds.intrinsics, 1).unwrap().0, ds.poses[k])
        })
        .collect();
    let clean_m = compute_metrics(&pred, &build_ground_truth(&clean, 0.01).unwrap(), 0.01).unwrap();
    let secs = t.elapsed().as_secs_f64();

    check(
        m.mre <= 0.01 && m.precision >= 0.9 && m.recall >= 0.95 && m.psnr >= 20.0 && secs < 600.0,
        format!(
            "|K| = {}, MRE {:.4} m, precision {:.3}, recall {:.3}, PSNR {:.2} dB, {secs:.0}s \
             (noise-free geometry: MRE {:.4}, precision {:.3}, recall {:.3})",
            model.len(),
            m.mre,
            m.precision,
            m.recall,
            m.psnr,
            clean_m.mre,
            clean_m.precision,
            clean_m.recall
        ),
    )
}

fn merge_bookkeeping() -> Outcome {
    let mut rng = Rng::new(1010);
    let mut worst = 0.0f64;
    let mut count_ok = true;
    for _ in 0..20 {
        let mut state = MapperState::new(HashGridSpec::default()).unwrap();
        let mut total = 0;
        for _ in 0..50 {
            let j = 1 + rng.index(12);
            let support = 1 + rng.index(20_000) as u64;
            let local = rng.gmm4(j, 5.0, 0.2, support);
            state.merge_global(&local).unwrap();
            total += j;
            let g = state.global().unwrap();
            worst = worst.max((g.weight_sum() - 1.0).abs());
            count_ok &= g.len() == total && state.n_components() == total;
        }
    }
    check(
        worst <= 1e-9 && count_ok,
        format!("20 sequences of 50 merges, max |Σw - 1| = {worst:.2e}, |K| bookkeeping exact: {count_ok}"),
    )
}

fn bits(model: &Gmm4) -> Vec<u64> {
    model
        .components
        .iter()
        .flat_map(|c| {
            std::iter::once(c.weight)
                .chain(c.mean.iter().copied())
                .chain(c.covariance.iter().copied())
        })
        .map(f64::to_bits)
        .collect()
}

fn storage_accounting() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(1111);
    let mut details = Vec::new();
    let mut ok = true;
    for k in [1usize, 7, 500, 4096] {
        let m = rng.gmm4(k, 10.0, 0.1, 123_456);
        let p1 = dir.path().join(format!("m{k}.sgmm"));
        let p2 = dir.path().join(format!("m{k}b.sgmm"));
        io::save_model(&m, &p1).unwrap();
        let size = std::fs::metadata(&p1).unwrap().len();
        let loaded = io::load_model(&p1).unwrap();
        io::save_model(&loaded, &p2).unwrap();
        let reloaded = io::load_model(&p2).unwrap();
        let rounded: Vec<u64> = bits(&m)
            .into_iter()
            .map(|b| ((f64::from_bits(b) as f32) as f64).to_bits())
            .collect();
        let same_file = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
        let exact = bits(&loaded) == rounded && bits(&reloaded) == bits(&loaded);
        let size_ok = size == 16 + 60 * k as u64;
        ok &= same_file && exact && size_ok && loaded.support_count == m.support_count;
        details.push(format!("K={k}: {size} B"));
    }
    check(ok, format!("{}, files and reloads bit-identical: {ok}", details.join(", ")))
}

/// MRE, precision, recall and PSNR by exhaustive search.
fn brute_metrics(pred: &MultimodalPointCloud, gt: &MultimodalPointCloud, thresh: f64) -> [f64; 4] {
    let n = pred.len() as f64;
    let (mut sum_d, mut hits, mut sse) = (0.0, 0usize, 0.0);
    for p in pred.iter() {
        let (j, d) = brute_nearest(gt, &p.position);
        sum_d += d;
        hits += (d <= thresh) as usize;
        sse += (p.intensity - gt.points[j].intensity).powi(2);
    }
    let covered = gt
        .iter()
        .filter(|g| brute_nearest(pred, &g.position).1 <= thresh)
        .count();
    let psnr = if sse == 0.0 { PSNR_CAP_DB } else { (-10.0 * (sse / n).log10()).min(PSNR_CAP_DB) };
    [sum_d / n, hits as f64 / n, covered as f64 / gt.len() as f64, psnr]
}

fn grid_cloud(n: usize, intensity: f64) -> MultimodalPointCloud {
    let pts = (0..n)
        .map(|k| {
            let p = Vector3::new((k % 5) as f64, ((k / 5) % 5) as f64, (k / 25) as f64) * 0.125;
            MultimodalPoint::new(p, intensity).unwrap()
        })
        .collect();
    MultimodalPointCloud::from_points(pts).unwrap()
}

fn metric_oracle() -> Outcome {
    let mut rng = Rng::new(1212);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let pred = rng.cloud(100, 0.05);
        let gt = rng.cloud(100, 0.05);
        for thresh in [0.01, 0.02, 0.05] {
            let m = compute_metrics(&pred, &gt, thresh).unwrap();
            let b = brute_metrics(&pred, &gt, thresh);
            for (x, y) in [m.mre, m.precision, m.recall, m.psnr].iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }

    let a = rng.cloud(100, 0.05);
    let id = compute_metrics(&a, &a, 0.01).unwrap();
    let identity = id.mre == 0.0 && id.precision == 1.0 && id.recall == 1.0 && id.psnr == PSNR_CAP_DB;

    // Grid spacing 1/8 and shifts of 1/64 and 1/16 keep every operation exact.
    let base = grid_cloud(100, 0.5);
    let shifted = MultimodalPointCloud::from_points(
        base.iter()
            .map(|p| MultimodalPoint::new(p.position + Vector3::new(1.0 / 64.0, 0.0, 0.0), 0.5 + 1.0 / 16.0).unwrap())
            .collect(),
    )
    .unwrap();
    let near = compute_metrics(&shifted, &base, 0.02).unwrap();
    let far = compute_metrics(&shifted, &base, 0.01).unwrap();
    let shift = near.mre == 1.0 / 64.0
        && near.precision == 1.0
        && near.recall == 1.0
        && far.precision == 0.0
        && far.recall == 0.0
        && near.psnr == psnr_from_mse(1.0 / 256.0)
        && (near.psnr - 10.0 * 256f64.log10()).abs() < 1e-12;
    check(
        worst <= 1e-12 && identity && shift,
        format!("max deviation from exhaustive oracle {worst:.2e}, identity exact: {identity}, uniform shift exact: {shift}"),
    )
}

fn main() {
    let total = Instant::now();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&mut *run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} [{tag}] {name}: {detail} ({:.1}s)", t.elapsed().as_secs_f64());
    };

    report(1, "EM correctness", &mut em_correctness);
    report(2, "log-space responsibilities", &mut log_space_equivalence);
    report(3, "Cholesky log-density", &mut cholesky_oracle);
    report(4, "spatial marginal vs quadrature", &mut marginalization_oracle);
    report(5, "hash arithmetic", &mut hash_arithmetic);
    let marginal = catch_unwind(|| overlap_probe(true));
    let full4d = catch_unwind(|| overlap_probe(false));
    report(6, "submap fidelity", &mut || match &marginal {
        Ok(p) => submap_fidelity(p),
        Err(_) => Err("overlap scene failed to map".into()),
    });
    report(7, "speedup trend", &mut speedup_trend);
    report(8, "4D vs marginal classification", &mut || match (&marginal, &full4d) {
        (Ok(m), Ok(f)) => marginal_vs_4d(m, f),
        _ => Err("overlap scene failed to map".into()),
    });
    report(9, "end-to-end reconstruction", &mut end_to_end);
    report(10, "merge bookkeeping", &mut merge_bookkeeping);
    report(11, "storage accounting", &mut storage_accounting);
    report(12, "metric oracle", &mut metric_oracle);

    println!(
        "acceptance: {} of 12 criteria passed in {:.0}s",
        12 - failures,
        total.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
