//! Image-grouped cross-validation, confusion metrics and the kernel table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::num::Float;
use crate::pca::{self, PcaModel, Retain};
use crate::svm::{self, KernelSpec, SvmModel, SvmParams};
use crate::texfeat::{Class, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CvMethod {
    KFold(usize),
    /// Test fraction.
    Holdout(f64),
}

impl fmt::Display for CvMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvMethod::KFold(k) => write!(f, "kfold:{k}"),
            CvMethod::Holdout(p) => write!(f, "holdout:{p}"),
        }
    }
}

impl FromStr for CvMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad cross-validation method '{s}'"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "kfold" => Ok(CvMethod::KFold(arg.parse().map_err(|_| bad())?)),
            "holdout" => {
                let f: f64 = arg.parse().map_err(|_| bad())?;
                if f > 0.0 && f < 1.0 {
                    Ok(CvMethod::Holdout(f))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }
}

impl CvMethod {
    /// Table label: `10-fold` or `holdout`.
    pub fn table_name(&self) -> String {
        match self {
            CvMethod::KFold(k) => format!("{k}-fold"),
            CvMethod::Holdout(_) => "holdout".into(),
        }
    }
}

/// Fold assignment per group (image). Holdout uses fold 0 as the test set
/// and fold 1 as training only.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPlan {
    pub method: CvMethod,
    pub seed: u64,
    /// Sorted distinct group ids.
    pub groups: Vec<usize>,
    /// Fold of `groups[i]`.
    pub assignments: Vec<usize>,
}

impl SplitPlan {
    /// Folds that serve as a test set.
    pub fn test_folds(&self) -> Vec<usize> {
        match self.method {
            CvMethod::KFold(k) => (0..k).collect(),
            CvMethod::Holdout(_) => vec![0],
        }
    }

    pub fn groups_in(&self, fold: usize) -> Vec<usize> {
        self.groups
            .iter()
            .zip(&self.assignments)
            .filter(|&(_, &f)| f == fold)
            .map(|(&g, _)| g)
            .collect()
    }

    pub fn fold_of(&self, group: usize) -> Option<usize> {
        self.groups
            .binary_search(&group)
            .ok()
            .map(|i| self.assignments[i])
    }
}

/// Seeded shuffle of the distinct groups, then round-robin folds.
pub fn make_splits(groups: &[usize], method: CvMethod, seed: u64) -> Result<SplitPlan> {
    let groups: Vec<usize> = groups
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = groups.len();
    let needed = match method {
        CvMethod::KFold(k) if k < 2 => {
            return Err(Error::InvalidArgument(format!(
                "k-fold needs k ≥ 2, got {k}"
            )))
        }
        CvMethod::KFold(k) => k,
        CvMethod::Holdout(f) if !(f > 0.0 && f < 1.0) => {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction {f} outside (0, 1)"
            )));
        }
        CvMethod::Holdout(_) => 2,
    };
    if n < needed {
        return Err(Error::TooFewGroups { needed, have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    match method {
        CvMethod::KFold(k) => {
            for (pos, &g) in order.iter().enumerate() {
                assignments[g] = pos % k;
            }
        }
        CvMethod::Holdout(f) => {
            let test = ((f * n as f64).ceil() as usize).clamp(1, n - 1);
            for (pos, &g) in order.iter().enumerate() {
                assignments[g] = usize::from(pos >= test);
            }
        }
    }
    Ok(SplitPlan {
        method,
        seed,
        groups,
        assignments,
    })
}

/// Binary confusion counts with lesion as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Class, predicted: Class) {
        match (truth, predicted) {
            (Class::Lesion, Class::Lesion) => self.tp += 1,
            (Class::Normal, Class::Lesion) => self.fp += 1,
            (Class::Lesion, Class::Normal) => self.fn_ += 1,
            (Class::Normal, Class::Normal) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Labeled superpixel rows plus the ground-truth class of every image.
#[derive(Clone, Debug)]
pub struct Dataset<F> {
    pub features: FeatureMatrix<F>,
    pub image_labels: BTreeMap<usize, Class>,
}

impl<F: Float> Dataset<F> {
    pub fn new(features: FeatureMatrix<F>, image_labels: BTreeMap<usize, Class>) -> Result<Self> {
        if features.labels().is_none() {
            return Err(Error::InvalidArgument(
                "dataset rows carry no labels".into(),
            ));
        }
        if let Some(&(img, _)) = features
            .provenance()
            .iter()
            .find(|(img, _)| !image_labels.contains_key(img))
        {
            return Err(Error::InvalidArgument(format!(
                "row from image {img} has no image label"
            )));
        }
        Ok(Dataset {
            features,
            image_labels,
        })
    }

    pub fn images(&self) -> Vec<usize> {
        self.image_labels.keys().copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct EvalParams<F> {
    pub kernel: KernelSpec<F>,
    pub svm: SvmParams<F>,
    pub retain: Retain,
    /// Lesion superpixels needed to call an image abnormal.
    pub min_lesion_count: usize,
    pub parallel: bool,
}

impl<F: Float> Default for EvalParams<F> {
    fn default() -> Self {
        EvalParams {
            kernel: KernelSpec::polynomial(3),
            svm: SvmParams::default(),
            retain: Retain::default(),
            min_lesion_count: 1,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoldReport<F> {
    pub fold: usize,
    pub train_images: Vec<usize>,
    pub test_images: Vec<usize>,
    /// Dataset rows used for fitting.
    pub train_rows: Vec<usize>,
    pub pca: PcaModel<F>,
    pub svm: SvmModel<F>,
    pub superpixel: Confusion,
    pub image: Confusion,
    /// `(image, truth, predicted, lesion superpixel count)` per test image.
    pub image_predictions: Vec<(usize, Class, Class, usize)>,
}

#[derive(Clone, Debug)]
pub struct MetricsReport<F> {
    pub method: CvMethod,
    pub kernel: KernelSpec<F>,
    pub folds: Vec<FoldReport<F>>,
    pub superpixel: Confusion,
    pub image: Confusion,
}

/// PCA on the raw rows, then the SVM on the projected rows.
pub fn fit_models<F: Float>(
    train: &FeatureMatrix<F>,
    params: &EvalParams<F>,
) -> Result<(PcaModel<F>, SvmModel<F>)> {
    let pca = pca::fit(train, params.retain)?;
    let reduced = pca.transform_matrix(train)?;
    let svm = svm::train(&reduced, &params.kernel, &params.svm)?;
    Ok((pca, svm))
}

fn run_fold<F: Float>(
    dataset: &Dataset<F>,
    plan: &SplitPlan,
    fold: usize,
    params: &EvalParams<F>,
) -> Result<FoldReport<F>> {
    let fm = &dataset.features;
    let test_images = plan.groups_in(fold);
    let test_set: BTreeSet<usize> = test_images.iter().copied().collect();
    let train_images: Vec<usize> = plan
        .groups
        .iter()
        .copied()
        .filter(|g| !test_set.contains(g))
        .collect();
    let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
    for (i, &(img, _)) in fm.provenance().iter().enumerate() {
        if test_set.contains(&img) {
            test_rows.push(i);
        } else if plan.fold_of(img).is_some() {
            train_rows.push(i);
        }
    }
    let train = fm.select(&train_rows);
    let labels = train.labels().unwrap_or(&[]);
    if !(labels.contains(&Class::Lesion) && labels.contains(&Class::Normal)) {
        return Err(Error::DegenerateFold(fold));
    }
    let (pca, svm) = fit_models(&train, params)?;
    let test = pca.transform_matrix(&fm.select(&test_rows))?;
    let mut superpixel = Confusion::default();
    let mut hits: BTreeMap<usize, usize> = test_images.iter().map(|&g| (g, 0)).collect();
    let truth = test.labels().unwrap_or(&[]);
    for (k, row) in test.iter_rows().enumerate() {
        let p = svm.predict(row)?;
        superpixel.record(truth[k], p);
        if p == Class::Lesion {
            *hits.entry(test.provenance()[k].0).or_default() += 1;
        }
    }
    let mut image = Confusion::default();
    let mut image_predictions = Vec::with_capacity(hits.len());
    for (&img, &count) in &hits {
        let t = dataset.image_labels[&img];
        let p = if count >= params.min_lesion_count.max(1) {
            Class::Lesion
        } else {
            Class::Normal
        };
        image.record(t, p);
        image_predictions.push((img, t, p, count));
    }
    Ok(FoldReport {
        fold,
        train_images,
        test_images,
        train_rows,
        pca,
        svm,
        superpixel,
        image,
        image_predictions,
    })
}

/// Fits PCA and the SVM on each fold's training images and scores its test images.
pub fn evaluate<F: Float>(
    dataset: &Dataset<F>,
    plan: &SplitPlan,
    params: &EvalParams<F>,
) -> Result<MetricsReport<F>> {
    let known: BTreeSet<usize> = dataset.image_labels.keys().copied().collect();
    if plan.groups.iter().any(|g| !known.contains(g)) {
        return Err(Error::InvalidArgument(
            "split plan names images outside the dataset".into(),
        ));
    }
    let folds = plan.test_folds();
    let reports: Vec<Result<FoldReport<F>>> = if params.parallel {
        folds
            .par_iter()
            .map(|&f| run_fold(dataset, plan, f, params))
            .collect()
    } else {
        folds
            .iter()
            .map(|&f| run_fold(dataset, plan, f, params))
            .collect()
    };
    let folds = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let (mut superpixel, mut image) = (Confusion::default(), Confusion::default());
    for f in &folds {
        superpixel += f.superpixel;
        image += f.image;
    }
    Ok(MetricsReport {
        method: plan.method,
        kernel: params.kernel,
        folds,
        superpixel,
        image,
    })
}

/// One cell of the kernel comparison, averaged over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub kernel: String,
    pub method: String,
    pub accuracy: f64,
    pub superpixel_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// `rbf`, `polynomial` (degree 3) and `quadratic` kernels.
pub fn table_kernels<F: Float>() -> Vec<(&'static str, KernelSpec<F>)> {
    vec![
        ("rbf", KernelSpec::rbf()),
        ("polynomial", KernelSpec::polynomial(3)),
        ("quadratic", KernelSpec::quadratic()),
    ]
}

/// Runs every kernel under 10-fold and 30% holdout validation. Each cell is
/// the mean over `seeds`; `base` supplies everything except the kernel.
pub fn kernel_table<F: Float>(
    dataset: &Dataset<F>,
    seeds: &[u64],
    base: &EvalParams<F>,
) -> Result<Vec<TableRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "kernel table needs at least one seed".into(),
        ));
    }
    let images = dataset.images();
    let mut rows = Vec::with_capacity(6);
    for (name, kernel) in table_kernels::<F>() {
        for method in [CvMethod::KFold(10), CvMethod::Holdout(0.3)] {
            let params = EvalParams {
                kernel,
                ..base.clone()
            };
            let mut acc = [0.0f64; 4];
            for &seed in seeds {
                let plan = make_splits(&images, method, seed)?;
                let r = evaluate(dataset, &plan, &params)?;
                acc[0] += r.image.accuracy();
                acc[1] += r.superpixel.accuracy();
                acc[2] += r.image.sensitivity();
                acc[3] += r.image.specificity();
            }
            let k = seeds.len() as f64;
            rows.push(TableRow {
                kernel: name.into(),
                method: method.table_name(),
                accuracy: acc[0] / k,
                superpixel_accuracy: acc[1] / k,
                sensitivity: acc[2] / k,
                specificity: acc[3] / k,
            });
        }
    }
    Ok(rows)
}

/// `kernel,method,accuracy` with image-level accuracy.
pub fn write_table_csv<W: Write>(rows: &[TableRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "kernel,method,accuracy")?;
    for r in rows {
        writeln!(w, "{},{},{:.6}", r.kernel, r.method, r.accuracy)?;
    }
    Ok(())
}

/// Table with both aggregation levels.
pub fn write_table_detailed<W: Write>(rows: &[TableRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "kernel,method,image_accuracy,superpixel_accuracy,image_sensitivity,image_specificity"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.kernel, r.method, r.accuracy, r.superpixel_accuracy, r.sensitivity, r.specificity
        )?;
    }
    Ok(())
}

/// Human-readable table.
pub fn format_table(rows: &[TableRow]) -> String {
    let mut s = format!(
        "{:<12} {:<10} {:>9} {:>11}\n",
        "kernel", "method", "image", "superpixel"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:<10} {:>9.4} {:>11.4}\n",
            r.kernel, r.method, r.accuracy, r.superpixel_accuracy
        ));
    }
    s
}

/// Per-fold and overall metrics as CSV.
pub fn write_report_csv<F: Float, W: Write>(
    report: &MetricsReport<F>,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "fold,level,tp,fp,fn,tn,accuracy,sensitivity,specificity")?;
    let line = |w: &mut W, fold: &str, level: &str, c: &Confusion| {
        writeln!(
            w,
            "{fold},{level},{},{},{},{},{:.6},{:.6},{:.6}",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            c.accuracy(),
            c.sensitivity(),
            c.specificity()
        )
    };
    for f in &report.folds {
        line(&mut w, &f.fold.to_string(), "image", &f.image)?;
        line(&mut w, &f.fold.to_string(), "superpixel", &f.superpixel)?;
    }
    line(&mut w, "all", "image", &report.image)?;
    line(&mut w, "all", "superpixel", &report.superpixel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kfold_sizes() {
        let plan = make_splits(&(0..10).collect::<Vec<_>>(), CvMethod::KFold(5), 1).unwrap();
        for f in 0..5 {
            assert_eq!(plan.groups_in(f).len(), 2);
        }
        let plan = make_splits(&(0..70).collect::<Vec<_>>(), CvMethod::KFold(10), 7).unwrap();
        assert!((0..10).all(|f| plan.groups_in(f).len() == 7));
        let uneven = make_splits(&(0..23).collect::<Vec<_>>(), CvMethod::KFold(5), 3).unwrap();
        let sizes: Vec<usize> = (0..5).map(|f| uneven.groups_in(f).len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), 23);
    }

    #[test]
    fn splits_are_seeded() {
        let g: Vec<usize> = (0..30).collect();
        assert_eq!(
            make_splits(&g, CvMethod::KFold(3), 5).unwrap(),
            make_splits(&g, CvMethod::KFold(3), 5).unwrap()
        );
        assert_ne!(
            make_splits(&g, CvMethod::KFold(3), 5).unwrap().assignments,
            make_splits(&g, CvMethod::KFold(3), 6).unwrap().assignments
        );
    }

    #[test]
    fn holdout_size_and_errors() {
        let plan = make_splits(&(0..70).collect::<Vec<_>>(), CvMethod::Holdout(0.3), 0).unwrap();
        assert_eq!(plan.groups_in(0).len(), 21);
        let plan = make_splits(&(0..10).collect::<Vec<_>>(), CvMethod::Holdout(0.25), 0).unwrap();
        assert_eq!(plan.groups_in(0).len(), 3);
        assert!(matches!(
            make_splits(&[1, 2], CvMethod::KFold(3), 0),
            Err(Error::TooFewGroups { needed: 3, have: 2 })
        ));
        assert!(make_splits(&[1], CvMethod::Holdout(0.3), 0).is_err());
    }

    #[test]
    fn method_text() {
        assert_eq!("kfold:10".parse::<CvMethod>().unwrap(), CvMethod::KFold(10));
        assert_eq!(
            "holdout:0.3".parse::<CvMethod>().unwrap(),
            CvMethod::Holdout(0.3)
        );
        assert!("holdout:1.5".parse::<CvMethod>().is_err());
        assert_eq!(CvMethod::KFold(10).table_name(), "10-fold");
    }

    #[test]
    fn confusion_arithmetic() {
        let c = Confusion {
            tp: 45,
            fp: 5,
            fn_: 5,
            tn: 45,
        };
        assert_eq!(
            (c.accuracy(), c.sensitivity(), c.specificity()),
            (0.9, 0.9, 0.9)
        );
        let perfect = Confusion {
            tp: 35,
            tn: 35,
            ..Confusion::default()
        };
        assert_eq!(perfect.accuracy(), 1.0);
        let all_normal = Confusion {
            fn_: 35,
            tn: 35,
            ..Confusion::default()
        };
        assert_eq!(
            (all_normal.accuracy(), all_normal.sensitivity()),
            (0.5, 0.0)
        );
        assert_eq!(Confusion::default().accuracy(), 0.0);
    }

    /// Two well-separated clusters, `per` rows per image.
    fn toy(images: usize, per: usize) -> Dataset<f64> {
        let (mut rows, mut labels, mut prov) = (Vec::new(), Vec::new(), Vec::new());
        let mut image_labels = BTreeMap::new();
        for img in 0..images {
            let lesion_img = img % 2 == 0;
            image_labels.insert(
                img,
                if lesion_img {
                    Class::Lesion
                } else {
                    Class::Normal
                },
            );
            for s in 0..per {
                let lesion = lesion_img && s == 0;
                let base = if lesion { 5.0 } else { 0.0 };
                let jitter = ((img * 31 + s * 17) % 13) as f64 / 13.0;
                rows.push(vec![base + jitter, base - jitter, jitter * 0.5]);
                labels.push(if lesion { Class::Lesion } else { Class::Normal });
                prov.push((img, s as u32));
            }
        }
        let fm = FeatureMatrix::new(3, rows.concat(), Some(labels), prov).unwrap();
        Dataset::new(fm, image_labels).unwrap()
    }

    fn small_params() -> EvalParams<f64> {
        EvalParams {
            retain: Retain::Count(2),
            ..EvalParams::default()
        }
    }

    #[test]
    fn separable_toy_is_perfect() {
        let d = toy(20, 4);
        let plan = make_splits(&d.images(), CvMethod::KFold(5), 3).unwrap();
        let r = evaluate(&d, &plan, &small_params()).unwrap();
        assert_eq!(
            r.image,
            Confusion {
                tp: 10,
                tn: 10,
                ..Confusion::default()
            }
        );
        let mut sum = Confusion::default();
        r.folds.iter().for_each(|f| sum += f.image);
        assert_eq!(sum, r.image);
        // each fold's PCA mean comes from its own training rows
        let full = pca::fit(&d.features, Retain::Count(2)).unwrap();
        assert!(r.folds.iter().all(|f| f.pca.mean() != full.mean()));
    }

    #[test]
    fn degenerate_fold() {
        // only image 0 has lesion rows; the fold holding it trains on normals only
        let mut d = toy(6, 3);
        for v in d.image_labels.values_mut() {
            *v = Class::Normal;
        }
        d.image_labels.insert(0, Class::Lesion);
        let keep: Vec<usize> = (0..d.features.rows())
            .filter(|&i| {
                d.features.labels().unwrap()[i] == Class::Normal
                    || d.features.provenance()[i].0 == 0
            })
            .collect();
        d.features = d.features.select(&keep);
        let plan = make_splits(&d.images(), CvMethod::KFold(3), 0).unwrap();
        let e = evaluate(&d, &plan, &small_params()).unwrap_err();
        assert!(matches!(e, Error::DegenerateFold(_)));
        assert!(e.to_string().starts_with("degenerate fold"));
    }

    #[test]
    fn table_shape() {
        let d = toy(20, 3);
        let rows = kernel_table(&d, &[1], &small_params()).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("kernel,method,accuracy\nrbf,10-fold,"));
    }
}
