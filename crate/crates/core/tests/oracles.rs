mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mslesion_core::dwt::{analyze_1d, dwt2, idwt2, WaveletSpec};
use mslesion_core::evalx::{evaluate, make_splits, CvMethod, Dataset, EvalParams};
use mslesion_core::pca::{self, jacobi_eigen, Retain};
use mslesion_core::svm::{gram_matrix, KernelSpec};
use mslesion_core::texfeat::{Class, FeatureMatrix};
use mslesion_core::GrayImage;

use common::{covariance, linear, poly, rbf, sym3_eigenvalues};

/// Columns are the transform of each unit impulse; returns `WᵀW`.
fn gram_of_columns(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = linear(&cols[i], &cols[j]);
        }
    }
    g
}

fn assert_identity(g: &[f64], n: usize, tol: f64) {
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(
                (g[i * n + j] - want).abs() < tol,
                "entry ({i},{j}) = {}",
                g[i * n + j]
            );
        }
    }
}

#[test]
fn one_level_1d_operator_is_orthogonal() {
    for spec in [WaveletSpec::<f64>::haar(), WaveletSpec::db2()] {
        let n = 8;
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let e: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i == k))).collect();
                let (a, d) = analyze_1d(&e, &spec).unwrap();
                a.into_iter().chain(d).collect()
            })
            .collect();
        assert_identity(&gram_of_columns(&cols), n, 1e-12);
    }
}

#[test]
fn two_level_2d_operator_is_orthogonal() {
    for spec in [WaveletSpec::<f64>::haar(), WaveletSpec::db2()] {
        let (w, h) = (8, 8);
        let cols: Vec<Vec<f64>> = (0..w * h)
            .map(|k| {
                let img = GrayImage::from_fn(w, h, |x, y| f64::from(u8::from(y * w + x == k)));
                dwt2(&img, &spec, 2).unwrap().coefficients().collect()
            })
            .collect();
        assert!(cols.iter().all(|c| c.len() == w * h));
        assert_identity(&gram_of_columns(&cols), w * h, 1e-12);
    }
}

#[test]
fn db2_annihilates_ramps_away_from_the_wrap() {
    let spec = WaveletSpec::<f64>::db2();
    let ramp: Vec<f64> = (0..16).map(|i| 3.0 + 0.5 * i as f64).collect();
    let (_, d) = analyze_1d(&ramp, &spec).unwrap();
    // The last output reads samples across the periodic seam.
    for v in &d[..d.len() - 1] {
        assert!(v.abs() < 1e-12, "{v}");
    }
    let taps = spec.h0();
    let s3 = 3f64.sqrt();
    let textbook = [1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3].map(|t| t / (4.0 * 2f64.sqrt()));
    for (a, b) in taps.iter().zip(textbook) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn odd_sizes_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (w, h) in [(9, 7), (13, 10), (17, 17)] {
        let img = GrayImage::from_fn(w, h, |_, _| rng.random_range(0.0..255.0));
        for spec in [WaveletSpec::haar(), WaveletSpec::db2()] {
            let back = idwt2(&dwt2(&img, &spec, 2).unwrap(), &spec).unwrap();
            assert_eq!(back.dims(), (w, h));
            for (a, b) in back.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn dwt_is_linear(a in prop::collection::vec(-50.0f64..50.0, 64), b in prop::collection::vec(-50.0f64..50.0, 64), s in -3.0f64..3.0) {
        let spec = WaveletSpec::db2();
        let ia = GrayImage::new(8, 8, a.clone()).unwrap();
        let ib = GrayImage::new(8, 8, b.clone()).unwrap();
        let mix = GrayImage::new(8, 8, a.iter().zip(&b).map(|(x, y)| x + s * y).collect()).unwrap();
        let ca: Vec<f64> = dwt2(&ia, &spec, 2).unwrap().coefficients().collect();
        let cb: Vec<f64> = dwt2(&ib, &spec, 2).unwrap().coefficients().collect();
        let cm: Vec<f64> = dwt2(&mix, &spec, 2).unwrap().coefficients().collect();
        for i in 0..64 {
            prop_assert!((cm[i] - ca[i] - s * cb[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_eigenvalues_match_cubic_roots(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 6..30)) {
        let fm = FeatureMatrix::from_rows(&rows).unwrap();
        let model = pca::fit(&fm, Retain::Count(3)).unwrap();
        let cov = covariance(fm.values(), 3);
        let want = sym3_eigenvalues(&cov.clone().try_into().unwrap());
        let scale = want[0].abs().max(1.0);
        for (g, w) in model.eigenvalues().iter().zip(want) {
            prop_assert!((g - w).abs() < 1e-8 * scale, "{g} vs {w}");
        }
        // Eigenvector check: ‖C v − λ v‖ small for each component.
        for k in 0..3 {
            let v = model.component(k);
            let lam = model.eigenvalues()[k];
            for i in 0..3 {
                let cv: f64 = (0..3).map(|j| cov[i * 3 + j] * v[j]).sum();
                prop_assert!((cv - lam * v[i]).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn jacobi_matches_two_by_two_closed_form(a in -20.0f64..20.0, b in -20.0f64..20.0, d in -20.0f64..20.0) {
        let (vals, _) = jacobi_eigen(&[a, b, b, d], 2).unwrap();
        let mid = (a + d) / 2.0;
        let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
        prop_assert!((vals[0] - (mid + rad)).abs() < 1e-10 * (1.0 + rad + mid.abs()));
        prop_assert!((vals[1] - (mid - rad)).abs() < 1e-10 * (1.0 + rad + mid.abs()));
    }
}

#[test]
fn kernel_matrices_match_formulas_and_rbf_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let gamma = 0.3;
    let specs: [(KernelSpec<f64>, Box<dyn Fn(&[f64], &[f64]) -> f64>); 3] = [
        (KernelSpec::linear(), Box::new(linear)),
        (
            KernelSpec::rbf().with_gamma(gamma),
            Box::new(move |a, b| rbf(gamma, a, b)),
        ),
        (
            KernelSpec::polynomial(3).with_gamma(gamma),
            Box::new(move |a, b| poly(gamma, 1.0, 3, a, b)),
        ),
    ];
    for (spec, formula) in &specs {
        let g = gram_matrix(spec, &rows).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let w = formula(&rows[i], &rows[j]);
                assert!(
                    (g[i * 50 + j] - w).abs() < 1e-12 * w.abs().max(1.0),
                    "{spec:?} at ({i},{j})"
                );
            }
        }
    }
    let g = gram_matrix(&specs[1].0, &rows).unwrap();
    let (vals, _) = jacobi_eigen(&g, 50).unwrap();
    assert!(
        vals.iter().all(|&v| v >= -1e-8),
        "min eigenvalue {}",
        vals[49]
    );
}

/// Two blobs per image class; lesion images carry a few rows from the far blob.
fn toy_dataset(images: usize) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rows, mut labels, mut prov) = (Vec::new(), Vec::new(), Vec::new());
    let mut image_labels = BTreeMap::new();
    for img in 0..images {
        let lesion = img % 2 == 0;
        image_labels.insert(img, if lesion { Class::Lesion } else { Class::Normal });
        for sp in 0..12u32 {
            let positive = lesion && sp < 3;
            let c = if positive { 4.0 } else { 0.0 };
            rows.push(
                (0..5)
                    .map(|_| c + rng.random_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            );
            labels.push(if positive {
                Class::Lesion
            } else {
                Class::Normal
            });
            prov.push((img, sp));
        }
    }
    let base = FeatureMatrix::from_rows(&rows).unwrap();
    let fm = FeatureMatrix::new(5, base.values().to_vec(), Some(labels), prov).unwrap();
    Dataset::new(fm, image_labels).unwrap()
}

#[test]
fn fold_counts_add_up_and_folds_are_disjoint() {
    let ds = toy_dataset(12);
    let params = EvalParams {
        kernel: KernelSpec::linear(),
        retain: Retain::Count(3),
        ..EvalParams::default()
    };
    for method in [CvMethod::KFold(4), CvMethod::Holdout(0.3)] {
        let plan = make_splits(&ds.images(), method, 5).unwrap();
        let report = evaluate(&ds, &plan, &params).unwrap();
        let (mut sp, mut im) = (0, 0);
        for f in &report.folds {
            sp += f.superpixel.total();
            im += f.image.total();
            let test: Vec<usize> = f.test_images.clone();
            for &r in &f.train_rows {
                assert!(!test.contains(&ds.features.provenance()[r].0));
            }
            assert_eq!(f.train_images.len() + f.test_images.len(), 12);
        }
        assert_eq!(report.superpixel.total(), sp);
        assert_eq!(report.image.total(), im);
        match method {
            CvMethod::KFold(_) => assert_eq!(im, 12),
            CvMethod::Holdout(f) => assert_eq!(im, (f * 12.0).ceil() as usize),
        }
        assert_eq!(report.image.accuracy(), 1.0);
    }
}
