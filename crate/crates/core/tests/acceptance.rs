//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mslesion_core::brainx::otsu_from_histogram;
use mslesion_core::config::PipelineConfig;
use mslesion_core::dwt::{dwt2, idwt2, Band, WaveletSpec};
use mslesion_core::evalx::{self, make_splits, table_kernels, CvMethod, Dataset, MetricsReport};
use mslesion_core::imgcore::Raster;
use mslesion_core::pca::{self, Retain};
use mslesion_core::phantom::{generate_case, PhantomSpec};
use mslesion_core::pipeline::{build_dataset, eval_params, evaluate_dataset};
use mslesion_core::slic::{boundary_recall, segment, segment_traced, SlicParams, BACKGROUND};
use mslesion_core::svm::{kkt_audit, train_raw, KernelSpec, SvmParams};
use mslesion_core::texfeat::{region_moments, Class, FeatureMatrix};

const E2E_ACCURACY: f64 = 0.95;
const E2E_BUDGET: Duration = Duration::from_secs(120);
const TABLE_ACCURACY: f64 = 0.90;
const DWT_TOL: f64 = 1e-9;
const MOMENTS_TOL: f64 = 1e-12;
const PCA_OFFDIAG_TOL: f64 = 1e-8;
const PCA_TRACE_TOL: f64 = 1e-9;
const PCA_ROUNDTRIP_TOL: f64 = 1e-9;
const PCA_LINE_TOL: f64 = 1e-8;
const SVM_ANALYTIC_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-3;
const GRID_TOL: f64 = 1e-3;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

struct PhantomRun {
    dataset: Dataset<f64>,
    report: MetricsReport<f64>,
    elapsed: Duration,
}

fn phantom_run() -> mslesion_core::Result<PhantomRun> {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    common::default_phantom(dir.path());
    let (dataset, _) = build_dataset(&cfg, dir.path(), None)?;
    let report = evaluate_dataset(&cfg, &dataset)?;
    Ok(PhantomRun {
        dataset,
        report,
        elapsed: start.elapsed(),
    })
}

fn end_to_end(r: &mut Report, run: &mslesion_core::Result<PhantomRun>) {
    match run {
        Ok(run) => {
            let acc = run.report.image.accuracy();
            let secs = run.elapsed.as_secs_f64();
            r.line(
                "end_to_end_phantom",
                acc >= E2E_ACCURACY && run.elapsed <= E2E_BUDGET,
                format!(
                    "polynomial 10-fold image accuracy {acc:.4} (>= {E2E_ACCURACY}), {} images, {} rows, {secs:.1}s (<= {}s)",
                    run.report.image.total(),
                    run.dataset.features.rows(),
                    E2E_BUDGET.as_secs()
                ),
            );
        }
        Err(e) => r.line("end_to_end_phantom", false, format!("pipeline error: {e}")),
    }
}

fn table_shape(r: &mut Report, run: &mslesion_core::Result<PhantomRun>) {
    let Ok(run) = run else {
        return r.line("kernel_table", false, "no dataset".into());
    };
    let params = eval_params(&PipelineConfig::default());
    match evalx::kernel_table(&run.dataset, &[0], &params) {
        Ok(rows) => {
            let expected = [
                ("rbf", "10-fold"),
                ("rbf", "holdout"),
                ("polynomial", "10-fold"),
                ("polynomial", "holdout"),
                ("quadratic", "10-fold"),
                ("quadratic", "holdout"),
            ];
            let shape = rows.len() == 6
                && rows
                    .iter()
                    .zip(expected)
                    .all(|(row, (k, m))| row.kernel == k && row.method == m);
            let worst = rows
                .iter()
                .map(|row| row.accuracy)
                .fold(f64::INFINITY, f64::min);
            let cells: Vec<String> = rows
                .iter()
                .map(|row| format!("{}/{}={:.4}", row.kernel, row.method, row.accuracy))
                .collect();
            r.line(
                "kernel_table",
                shape && worst >= TABLE_ACCURACY,
                format!(
                    "{} rows, min image accuracy {worst:.4} (>= {TABLE_ACCURACY}): {}",
                    rows.len(),
                    cells.join(" ")
                ),
            );
        }
        Err(e) => r.line(
            "kernel_table",
            false,
            format!("solver or split failure: {e}"),
        ),
    }
}

fn dwt(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut recon, mut energy) = (0.0f64, 0.0f64);
    let mut runs = 0;
    for _ in 0..100 {
        let w = 4 * rng.random_range(2..=16);
        let h = 4 * rng.random_range(2..=16);
        let img = Raster::from_fn(w, h, |_, _| rng.random_range(-100.0..255.0));
        let input: f64 = img.data().iter().map(|v| v * v).sum();
        for spec in [WaveletSpec::haar(), WaveletSpec::db2()] {
            for levels in [1, 2] {
                let bands = dwt2(&img, &spec, levels).expect("dwt2");
                let back = idwt2(&bands, &spec).expect("idwt2");
                let err = img
                    .data()
                    .iter()
                    .zip(back.data())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                recon = recon.max(err);
                energy = energy.max((bands.energy() - input).abs() / input);
                runs += 1;
            }
        }
    }
    let (a, b, c, d) = (3.0, 7.0, 1.0, 12.0);
    let img = Raster::new(2, 2, vec![a, b, c, d]).unwrap();
    let s = dwt2(&img, &WaveletSpec::haar(), 1).unwrap();
    let got = |band| s.band(band).unwrap().data()[0];
    let exact = got(Band::Approx(1)) == (a + b + c + d) / 2.0
        && got(Band::Horizontal(1)) == ((a + b) - (c + d)) / 2.0
        && got(Band::Vertical(1)) == ((a - b) + (c - d)) / 2.0
        && got(Band::Diagonal(1)) == ((a - b) - (c - d)) / 2.0;
    r.line(
        "dwt",
        recon <= DWT_TOL && energy <= DWT_TOL && exact,
        format!(
            "{runs} transforms: max reconstruction error {recon:.2e}, max relative energy error {energy:.2e} (<= {DWT_TOL:e}); 2x2 haar exact: {exact}"
        ),
    );
}

fn moments(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=80);
        let spread = rng.random_range(1..=256);
        let vals: Vec<i64> = (0..n).map(|_| rng.random_range(-spread..spread)).collect();
        let want = common::moments_oracle(&vals);
        let got = region_moments(&vals.iter().map(|&v| v as f64).collect::<Vec<_>>())
            .expect("non-empty")
            .to_array();
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    let k = region_moments(&[0.0, 2.0]).unwrap().kurtosis;
    r.line(
        "moments",
        worst <= MOMENTS_TOL && k == -2.0,
        format!("1000 multisets: max scaled error {worst:.2e} (<= {MOMENTS_TOL:e}); kurtosis of {{0,2}} = {k}"),
    );
}

fn pca_checks(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut offdiag, mut trace, mut roundtrip) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let dims = rng.random_range(2..=16);
        let rows = rng.random_range(dims + 1..=60);
        let mix: Vec<f64> = (0..dims * dims)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut values = Vec::with_capacity(rows * dims);
        for _ in 0..rows {
            let z: Vec<f64> = (0..dims).map(|_| rng.random_range(-10.0..10.0)).collect();
            values.extend(
                (0..dims).map(|i| (0..dims).map(|j| mix[i * dims + j] * z[j]).sum::<f64>() + 5.0),
            );
        }
        let fm = FeatureMatrix::new(dims, values.clone(), None, vec![(0, 0); rows]).unwrap();
        let model = pca::fit(&fm, Retain::Count(dims)).unwrap();
        let mut projected = Vec::with_capacity(values.len());
        for row in values.chunks(dims) {
            let y = model.transform(row, dims).unwrap();
            let back = model.inverse(&y).unwrap();
            roundtrip = roundtrip.max(
                row.iter()
                    .zip(&back)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            projected.extend(y);
        }
        let pc = common::covariance(&projected, dims);
        for i in 0..dims {
            for j in 0..dims {
                if i != j {
                    offdiag = offdiag.max(pc[i * dims + j].abs());
                }
            }
        }
        let cov = common::covariance(&values, dims);
        let tr: f64 = (0..dims).map(|i| cov[i * dims + i]).sum();
        let ev: f64 = model.eigenvalues().iter().sum();
        trace = trace.max((ev - tr).abs() / tr.abs());
    }
    let line = [
        [1.0, 2.0],
        [2.0, 4.0],
        [3.0, 6.0],
        [-1.0, -2.0],
        [-2.0, -4.0],
        [-3.0, -6.0],
    ];
    let fm =
        FeatureMatrix::from_rows(&line.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    let model = pca::fit(&fm, Retain::Count(2)).unwrap();
    let s5 = 5f64.sqrt();
    let pc = model.component(0);
    let line_err = (pc[0] - 1.0 / s5).abs().max((pc[1] - 2.0 / s5).abs());
    r.line(
        "pca",
        offdiag <= PCA_OFFDIAG_TOL && trace <= PCA_TRACE_TOL && roundtrip <= PCA_ROUNDTRIP_TOL && line_err <= PCA_LINE_TOL,
        format!(
            "projected covariance off-diagonal {offdiag:.2e} (<= {PCA_OFFDIAG_TOL:e}), eigenvalue/trace {trace:.2e} (<= {PCA_TRACE_TOL:e}), round trip {roundtrip:.2e} (<= {PCA_ROUNDTRIP_TOL:e}), line direction {line_err:.2e} (<= {PCA_LINE_TOL:e})"
        ),
    );
}

fn slic(r: &mut Report) {
    let vals = [20.0, 90.0, 160.0, 230.0];
    let q = |x: usize, y: usize| (x / 16 + 2 * (y / 16)) as u32;
    let img = Raster::from_fn(32, 32, |x, y| vals[q(x, y) as usize]);
    let truth: Vec<u32> = (0..32 * 32).map(|i| q(i % 32, i / 32)).collect();
    let params = SlicParams {
        k: 4,
        ..SlicParams::default()
    };
    let lm = segment(&img, &params, None).unwrap();
    let recall = boundary_recall(32, 32, &lm.labels, &truth, 0);

    let (mut all_labeled, mut monotone, mut deterministic) = (true, true, true);
    let mut steps = 0;
    for seed in 0..20 {
        let spec = PhantomSpec {
            seed,
            ..PhantomSpec::default()
        };
        let case = generate_case(&spec, seed as usize).unwrap();
        let (lm, trace) = segment_traced(&case.image, &SlicParams::default(), None).unwrap();
        all_labeled &= lm
            .labels
            .iter()
            .all(|&l| l != BACKGROUND && (l as usize) < lm.num_superpixels());
        for &(before, after) in &trace.assign_objective {
            monotone &= after <= before;
            steps += 1;
        }
        let again = segment(&case.image, &SlicParams::default(), None).unwrap();
        deterministic &= again == lm;
    }
    r.line(
        "slic",
        recall == 1.0 && all_labeled && monotone && deterministic,
        format!(
            "quadrant boundary recall {recall}; 20 phantoms: every pixel labeled {all_labeled}, assignment objective non-increasing over {steps} steps {monotone}, deterministic {deterministic}"
        ),
    );
}

fn svm(r: &mut Report, run: &mslesion_core::Result<PhantomRun>) {
    let raw = SvmParams {
        c: 10.0,
        standardize: false,
        ..SvmParams::default()
    };
    let two = train_raw::<f64>(&[-1.0, 1.0], 1, &[-1.0, 1.0], &KernelSpec::linear(), &raw).unwrap();
    let analytic = (two.alpha[0] - 0.5).abs() <= SVM_ANALYTIC_TOL
        && (two.alpha[1] - 0.5).abs() <= SVM_ANALYTIC_TOL
        && two.model.bias.abs() <= SVM_ANALYTIC_TOL;

    // every fold model of every table configuration
    let (mut audited, mut kkt_ok, mut worst_kkt) = (0usize, true, 0.0f64);
    let mut kkt_note = String::new();
    if let Ok(run) = run {
        let base = eval_params(&PipelineConfig::default());
        for (_, kernel) in table_kernels::<f64>() {
            for method in [CvMethod::KFold(10), CvMethod::Holdout(0.3)] {
                let plan = make_splits(&run.dataset.images(), method, 0).unwrap();
                let params = evalx::EvalParams {
                    kernel,
                    ..base.clone()
                };
                let report = match evalx::evaluate(&run.dataset, &plan, &params) {
                    Ok(rep) => rep,
                    Err(e) => {
                        kkt_ok = false;
                        kkt_note = format!(" ({e})");
                        continue;
                    }
                };
                for f in &report.folds {
                    let train = f
                        .pca
                        .transform_matrix(&run.dataset.features.select(&f.train_rows))
                        .unwrap();
                    let y: Vec<f64> = train.labels().unwrap().iter().map(|c| c.sign()).collect();
                    let audit = kkt_audit(&f.svm, train.values(), &y, KKT_TOL).unwrap();
                    kkt_ok &= audit.passed();
                    worst_kkt = worst_kkt.max(audit.max_violation);
                    audited += 1;
                }
            }
        }
    } else {
        kkt_ok = false;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut problems, mut grid_gap) = (0usize, 0.0f64);
    while problems < 300 {
        let n = rng.random_range(2..=4);
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        if !(y.contains(&1.0) && y.contains(&-1.0)) {
            continue;
        }
        let c = [0.5, 1.0, 5.0][problems % 3];
        let (spec, k): (KernelSpec<f64>, Box<dyn Fn(&[f64], &[f64]) -> f64>) = match problems % 3 {
            0 => (KernelSpec::linear(), Box::new(common::linear)),
            1 => (
                KernelSpec::quadratic().with_gamma(0.5),
                Box::new(|a, b| common::poly(0.5, 1.0, 2, a, b)),
            ),
            _ => (
                KernelSpec::rbf().with_gamma(0.5),
                Box::new(|a, b| common::rbf(0.5, a, b)),
            ),
        };
        let params = SvmParams {
            c,
            tol: 1e-6,
            standardize: false,
            ..SvmParams::default()
        };
        let sol = train_raw(&x, 2, &y, &spec, &params).unwrap();
        let gram: Vec<f64> = (0..n * n)
            .map(|t| {
                k(
                    &x[2 * (t / n)..2 * (t / n) + 2],
                    &x[2 * (t % n)..2 * (t % n) + 2],
                )
            })
            .collect();
        let smo = common::dual_value(&sol.alpha, &y, &gram);
        let oracle = common::grid_dual_oracle(&gram, &y, c);
        grid_gap = grid_gap.max((smo - oracle).abs());
        problems += 1;
    }

    let xor = [1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
    let xy = [1.0, 1.0, -1.0, -1.0];
    let model = train_raw(&xor, 2, &xy, &KernelSpec::rbf().with_gamma(1.0), &raw)
        .unwrap()
        .model;
    let xor_hits = (0..4)
        .filter(|&i| model.predict(&xor[2 * i..2 * i + 2]).unwrap() == Class::from_sign(xy[i]))
        .count();

    r.line(
        "svm",
        analytic && audited > 0 && kkt_ok && grid_gap <= GRID_TOL && xor_hits == 4,
        format!(
            "2-point alpha=({:.6}, {:.6}) b={:.1e}; KKT on {audited} fold models, max violation {worst_kkt:.2e} (tol {KKT_TOL:e}){kkt_note}; {problems} small duals within {grid_gap:.2e} of grid oracle (<= {GRID_TOL:e}); XOR rbf {xor_hits}/4",
            two.alpha[0], two.alpha[1], two.model.bias
        ),
    );
}

fn otsu(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut agree = 0;
    for i in 0..100 {
        let mut hist = [0u64; 256];
        if i % 2 == 0 {
            for h in hist.iter_mut() {
                if rng.random_bool(0.4) {
                    *h = rng.random_range(1..500);
                }
            }
        } else {
            // two noisy modes
            let (m0, m1) = (rng.random_range(10..120), rng.random_range(130..250));
            for _ in 0..rng.random_range(200..4000) {
                let m = if rng.random_bool(0.5) { m0 } else { m1 };
                let v = (m + rng.random_range(-15i32..=15)).clamp(0, 255);
                hist[v as usize] += 1;
            }
        }
        hist[0] += 1;
        hist[255] += 1;
        if otsu_from_histogram(&hist).ok() == common::otsu_oracle(&hist) {
            agree += 1;
        }
    }
    r.line(
        "otsu",
        agree == 100,
        format!("{agree}/100 histograms match the exhaustive oracle"),
    );
}

fn leakage(r: &mut Report, run: &mslesion_core::Result<PhantomRun>) {
    let Ok(run) = run else {
        return r.line("leakage_guard", false, "no dataset".into());
    };
    let full = pca::fit(&run.dataset.features, Retain::Count(10)).unwrap();
    let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let differ = run
        .report
        .folds
        .iter()
        .filter(|f| bits(f.pca.mean()) != bits(full.mean()))
        .count();
    r.line(
        "leakage_guard",
        differ == run.report.folds.len() && differ > 0,
        format!(
            "{differ}/{} fold PCA means differ bytewise from the full-data mean",
            run.report.folds.len()
        ),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    let run = phantom_run();
    end_to_end(&mut r, &run);
    table_shape(&mut r, &run);
    dwt(&mut r);
    moments(&mut r);
    pca_checks(&mut r);
    slic(&mut r);
    svm(&mut r, &run);
    otsu(&mut r);
    leakage(&mut r, &run);
    if r.failed > 0 {
        println!("{} criteria failed", r.failed);
        std::process::exit(1);
    }
}
