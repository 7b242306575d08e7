//! End-to-end run: extract → segment → prune → DWT → features → PCA/SVM
//! cross-validation, with per-stage artifacts under `out/<stage>/`.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::brainx::{extract_brain, BrainMask};
use crate::config::PipelineConfig;
use crate::dwt::{dwt2, Band, SubbandSet, WaveletSpec};
use crate::error::{Error, Result};
use crate::evalx::{self, make_splits, Dataset, EvalParams, MetricsReport, TableRow};
use crate::imgcore::{
    load_image, load_mask, save_mask, save_overlay, save_pgm, write_pgm_u16, write_pgm_u8,
    BinaryMask, Raster,
};
use crate::phantom::{read_manifest, ManifestEntry};
use crate::slic::{prune_superpixels, segment, LabelMap, BACKGROUND};
use crate::texfeat::{label_superpixels, superpixel_features, Class, FeatureMatrix};

/// Everything derived from one slice.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub id: usize,
    pub brain: BrainMask,
    /// Input multiplied by the brain mask.
    pub stripped: Raster<f64>,
    pub labels: LabelMap<f64>,
    /// Superpixels that survive pruning and lie in the brain.
    pub kept: Vec<u32>,
    pub bands: SubbandSet<f64>,
    pub features: FeatureMatrix<f64>,
}

/// Superpixels of `kept` with at least `fraction` of their pixels in `mask`.
pub fn brain_superpixels(
    lm: &LabelMap<f64>,
    mask: &BinaryMask,
    kept: &[u32],
    fraction: f64,
) -> Vec<u32> {
    let mut counts = vec![(0usize, 0usize); lm.num_superpixels()];
    for (i, &l) in lm.labels.iter().enumerate() {
        if l != BACKGROUND {
            counts[l as usize].0 += 1;
            counts[l as usize].1 += usize::from(mask.bits()[i]);
        }
    }
    kept.iter()
        .copied()
        .filter(|&l| {
            let (n, inside) = counts[l as usize];
            inside > 0 && inside as f64 >= fraction * n as f64
        })
        .collect()
}

/// Runs the per-image stages. Rows are labeled when `truth` is given.
pub fn process_case(
    cfg: &PipelineConfig,
    id: usize,
    image: &Raster<f64>,
    truth: Option<&BinaryMask>,
) -> Result<CaseResult> {
    let brain =
        extract_brain(image, &cfg.extract_params()).map_err(|e| e.at_stage("extract", id))?;
    let stripped = image
        .masked(&brain.mask)
        .map_err(|e| e.at_stage("extract", id))?;
    let labels =
        segment(&stripped, &cfg.slic_params(), None).map_err(|e| e.at_stage("segment", id))?;
    let pruned = prune_superpixels(&labels, &stripped, cfg.bright_quantile)
        .map_err(|e| e.at_stage("prune", id))?;
    let kept = brain_superpixels(&labels, &brain.mask, &pruned, cfg.brain_fraction);
    if kept.is_empty() {
        return Err(Error::NothingSurvives.at_stage("prune", id));
    }
    let bands = dwt2(&stripped, &WaveletSpec::new(cfg.wavelet), cfg.levels)
        .map_err(|e| e.at_stage("dwt", id))?;
    let mut features = superpixel_features(id, &labels, &kept, &bands, &cfg.sources)
        .map_err(|e| e.at_stage("features", id))?;
    if let Some(t) = truth {
        let rows: Vec<u32> = features.provenance().iter().map(|&(_, sp)| sp).collect();
        let classes = label_superpixels(&labels, &rows, t, cfg.overlap)
            .map_err(|e| e.at_stage("features", id))?;
        features = features
            .with_labels(classes.into_iter().map(|(_, c)| c).collect())
            .map_err(|e| e.at_stage("features", id))?;
    }
    Ok(CaseResult {
        id,
        brain,
        stripped,
        labels,
        kept,
        bands,
        features,
    })
}

/// Loads the slice and, when present, its truth mask.
pub fn load_case(dir: &Path, entry: &ManifestEntry) -> Result<(Raster<f64>, Option<BinaryMask>)> {
    let img = load_image(dir.join(entry.image_file())).map_err(|e| e.at_stage("load", entry.id))?;
    let truth_path = dir.join(entry.truth_file());
    let truth = if truth_path.exists() {
        Some(load_mask(&truth_path).map_err(|e| e.at_stage("load", entry.id))?)
    } else if entry.label == Class::Normal {
        Some(BinaryMask::empty(img.width(), img.height()))
    } else {
        None
    };
    Ok((img, truth))
}

pub fn manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    if !dir.join("manifest.csv").is_file() {
        return Err(Error::ManifestNotFound(dir.to_path_buf()));
    }
    read_manifest(dir)
}

/// Processes every case of `dir` (in parallel, results in manifest order),
/// optionally writing per-case artifacts under `out`.
pub fn build_dataset(
    cfg: &PipelineConfig,
    dir: &Path,
    out: Option<&Path>,
) -> Result<(Dataset<f64>, Vec<CaseResult>)> {
    let entries = manifest(dir)?;
    let results: Vec<Result<CaseResult>> = entries
        .par_iter()
        .map(|e| {
            let (img, truth) = load_case(dir, e)?;
            let truth = truth.ok_or_else(|| {
                Error::InvalidArgument(format!("missing {}", e.truth_file()))
                    .at_stage("features", e.id)
            })?;
            let res = process_case(cfg, e.id, &img, Some(&truth))?;
            if let Some(out) = out {
                write_case_artifacts(out, &res)?;
            }
            Ok(res)
        })
        .collect();
    let cases = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut features = FeatureMatrix::empty(4 * cfg.sources.len());
    for c in &cases {
        features.append(c.features.clone())?;
    }
    let image_labels: BTreeMap<usize, Class> = entries.iter().map(|e| (e.id, e.label)).collect();
    if features.rows() == 0 {
        return Err(Error::InvalidArgument("no feature rows extracted".into()));
    }
    Ok((Dataset::new(features, image_labels)?, cases))
}

fn stage_dir(out: &Path, stage: &str) -> Result<PathBuf> {
    let d = out.join(stage);
    fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    Ok(d)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Masks, label maps, overlays, kept lists and subband previews of one case.
pub fn write_case_artifacts(out: &Path, c: &CaseResult) -> Result<()> {
    let id = c.id;
    let ex = stage_dir(out, "extract")?;
    save_mask(&c.brain.mask, ex.join(format!("case_{id:03}_mask.pgm")))?;
    save_pgm(&c.stripped, ex.join(format!("case_{id:03}_stripped.pgm")))?;
    let seg = stage_dir(out, "segment")?;
    write_pgm_u16(
        c.labels.width,
        c.labels.height,
        &c.labels.to_u16(),
        seg.join(format!("case_{id:03}_labels.pgm")),
    )?;
    save_overlay(
        &c.stripped,
        &c.labels,
        seg.join(format!("case_{id:03}_overlay.png")),
    )?;
    let kept: Vec<String> = c.kept.iter().map(u32::to_string).collect();
    write_text(
        &seg.join(format!("case_{id:03}_kept.txt")),
        &(kept.join("\n") + "\n"),
    )?;
    let dw = stage_dir(out, "dwt")?;
    for level in 1..=c.bands.depth() {
        for b in Band::level_set(level) {
            if let Some(r) = c.bands.band(b) {
                write_pgm_u8(
                    r.width(),
                    r.height(),
                    &r.normalized_u8(),
                    dw.join(format!("case_{id:03}_{}.pgm", b.name())),
                )?;
            }
        }
    }
    Ok(())
}

pub fn eval_params(cfg: &PipelineConfig) -> EvalParams<f64> {
    EvalParams {
        kernel: cfg.kernel,
        svm: cfg.svm_params(),
        retain: cfg.pca,
        min_lesion_count: cfg.min_lesion_count,
        parallel: true,
    }
}

/// Cross-validates the configured kernel and method.
pub fn evaluate_dataset(
    cfg: &PipelineConfig,
    dataset: &Dataset<f64>,
) -> Result<MetricsReport<f64>> {
    let plan = make_splits(&dataset.images(), cfg.cv, cfg.seed)?;
    evalx::evaluate(dataset, &plan, &eval_params(cfg))
}

/// Writes the report CSV and each fold's PCA and SVM models.
pub fn write_evaluation(out: &Path, report: &MetricsReport<f64>) -> Result<()> {
    let ev = stage_dir(out, "evaluate")?;
    let p = ev.join("report.csv");
    evalx::write_report_csv(report, create(&p)?).map_err(|e| Error::io(&p, e))?;
    let tr = stage_dir(out, "train")?;
    for f in &report.folds {
        let p = tr.join(format!("fold_{:02}_pca.txt", f.fold));
        f.pca
            .write_text(create(&p)?)
            .map_err(|e| Error::io(&p, e))?;
        let p = tr.join(format!("fold_{:02}_svm.txt", f.fold));
        f.svm
            .write_text(create(&p)?)
            .map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PipelineSummary {
    pub cases: usize,
    pub rows: usize,
    pub report: MetricsReport<f64>,
    pub table: Vec<TableRow>,
    pub elapsed: Duration,
}

/// Full run over the dataset in `data`, writing artifacts to `out`.
pub fn run_pipeline(cfg: &PipelineConfig, data: &Path, out: &Path) -> Result<PipelineSummary> {
    cfg.validate()?;
    let start = Instant::now();
    manifest(data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    let (dataset, cases) = build_dataset(cfg, data, Some(out))?;
    log::info!(
        "{} cases, {} superpixel rows",
        cases.len(),
        dataset.features.rows()
    );
    let fe = stage_dir(out, "features")?;
    let p = fe.join("features.csv");
    dataset
        .features
        .write_csv(create(&p)?)
        .map_err(|e| Error::io(&p, e))?;
    let report = evaluate_dataset(cfg, &dataset)?;
    write_evaluation(out, &report)?;
    let table = evalx::kernel_table(&dataset, &cfg.table_seeds, &eval_params(cfg))?;
    let p = out.join("metrics.csv");
    evalx::write_table_csv(&table, create(&p)?).map_err(|e| Error::io(&p, e))?;
    let p = out.join("metrics_detailed.csv");
    evalx::write_table_detailed(&table, create(&p)?).map_err(|e| Error::io(&p, e))?;
    Ok(PipelineSummary {
        cases: cases.len(),
        rows: dataset.features.rows(),
        report,
        table,
        elapsed: start.elapsed(),
    })
}
