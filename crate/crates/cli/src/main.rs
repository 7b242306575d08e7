use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mslesion_core::brainx::{extract_brain, Element, ExtractParams};
use mslesion_core::config::PipelineConfig;
use mslesion_core::dwt::{dwt2, Band, WaveletKind, WaveletSpec};
use mslesion_core::evalx::{self, Dataset};
use mslesion_core::imgcore::{
    load_image, load_mask, read_pgm_u16, save_mask, save_overlay, write_pgm_u16, write_pgm_u8,
};
use mslesion_core::phantom::{export, generate, PhantomSpec};
use mslesion_core::pipeline::{
    self, build_dataset, eval_params, evaluate_dataset, run_pipeline, write_evaluation,
};
use mslesion_core::slic::{prune_superpixels, segment, LabelMap, SlicParams};
use mslesion_core::svm::{KernelKind, KernelSpec};
use mslesion_core::texfeat::{label_superpixels, superpixel_features, Class, FeatureMatrix};
use mslesion_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mslesion",
    version,
    about = "MS lesion detection on 2D MR slices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with truth masks and a manifest.
    Phantom(PhantomArgs),
    /// Skull-strip one image: mask PGM plus overlay PNG.
    Extract(ExtractArgs),
    /// SLIC superpixels of one image: 16-bit label PGM plus overlay PNG.
    Segment(SegmentArgs),
    /// Wavelet subbands of one image as normalized PGMs.
    Dwt(DwtArgs),
    /// Superpixel feature CSV for a dataset or a single segmented image.
    Features(FeaturesArgs),
    /// Fit PCA and the SVM on a feature CSV.
    Train(TrainArgs),
    /// Cross-validate a feature CSV.
    Evaluate(EvaluateArgs),
    /// Run every stage on a dataset directory.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 35)]
    n_lesion: usize,
    #[arg(long, default_value_t = 35)]
    n_healthy: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    input: PathBuf,
    /// Fixed threshold instead of Otsu.
    #[arg(long)]
    threshold: Option<u8>,
    /// Disc radius of the morphology element.
    #[arg(long, default_value_t = 2)]
    radius: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 500)]
    k: usize,
    #[arg(long, default_value_t = 5.0)]
    m: f64,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    tol: f64,
    #[arg(long, default_value_t = 0.9)]
    bright_quantile: f64,
    /// Restrict segmentation to this mask.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DwtArgs {
    input: PathBuf,
    #[arg(long, default_value = "haar")]
    wavelet: WaveletKind,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Dataset directory with manifest.csv.
    #[arg(long, conflicts_with = "image")]
    data: Option<PathBuf>,
    /// Single image; requires --labels.
    #[arg(long, requires = "labels")]
    image: Option<PathBuf>,
    /// 16-bit label map written by `segment`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Kept superpixel ids, one per line (default: all).
    #[arg(long)]
    kept: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    id: usize,
    #[command(flatten)]
    settings: Settings,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled feature CSV.
    features: PathBuf,
    #[command(flatten)]
    settings: Settings,
    /// Writes model.pca and model.svm here.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labeled feature CSV.
    features: PathBuf,
    /// Manifest directory for image labels (default: an image is a lesion
    /// image when any of its rows is).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Also run the kernel × method comparison.
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    settings: Settings,
    /// Print the resolved settings and exit.
    #[arg(long)]
    print_config: bool,
    /// Print the resolved settings; touch nothing.
    #[arg(long)]
    dry_run: bool,
}

/// Config file plus overrides, applied in that order.
#[derive(Args)]
struct Settings {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    wavelet: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    pca_r: Option<usize>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, name = "C")]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    cv: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other setting as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Settings {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::parse(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
            None => PipelineConfig::default(),
        };
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut opt = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        opt("k", self.k.map(|v| v.to_string()));
        opt("m", self.m.map(|v| v.to_string()));
        opt("wavelet", self.wavelet.clone());
        opt("levels", self.levels.map(|v| v.to_string()));
        opt("pca_r", self.pca_r.map(|v| v.to_string()));
        opt("kernel", self.kernel.clone());
        opt("c", self.c.map(|v| v.to_string()));
        opt("gamma", self.gamma.map(|v| v.to_string()));
        opt("cv", self.cv.clone());
        opt("seed", self.seed.map(|v| v.to_string()));
        for (k, v) in pairs {
            cfg.set(k, &v)?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{kv}'"))
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: p.to_path_buf(),
        source: e,
    }
}

fn create(p: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(p)
        .map(BufWriter::new)
        .map_err(|e| io_err(p, e))
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_phantom(a: PhantomArgs) -> Result<()> {
    let mut spec = PhantomSpec {
        seed: a.seed,
        n_lesion: a.n_lesion,
        n_healthy: a.n_healthy,
        size: a.size,
        ..PhantomSpec::default()
    };
    if let Some(s) = a.noise_sigma {
        spec.noise_sigma = s;
    }
    let cases = generate(&spec)?;
    export(&cases, &a.out)?;
    println!("wrote {} cases to {}", cases.len(), a.out.display());
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let params = ExtractParams {
        threshold: a.threshold,
        element: Element::Disc(a.radius),
        ..ExtractParams::default()
    };
    let brain = extract_brain(&img, &params)?;
    mkdir(&a.out)?;
    let s = stem(&a.input);
    save_mask(&brain.mask, a.out.join(format!("{s}_mask.pgm")))?;
    save_overlay(
        &img,
        &brain.mask,
        a.out.join(format!("{s}_mask_overlay.png")),
    )?;
    println!(
        "threshold {} brain pixels {}",
        brain.threshold,
        brain.mask.count()
    );
    Ok(())
}

fn cmd_segment(a: SegmentArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let roi = a.mask.as_ref().map(load_mask).transpose()?;
    let params = SlicParams {
        k: a.k,
        m: a.m,
        max_iters: a.max_iters,
        tol: a.tol,
        ..SlicParams::default()
    };
    let lm = segment(&img, &params, roi.as_ref())?;
    let kept = prune_superpixels(&lm, &img, a.bright_quantile)?;
    mkdir(&a.out)?;
    let s = stem(&a.input);
    write_pgm_u16(
        lm.width,
        lm.height,
        &lm.to_u16(),
        a.out.join(format!("{s}_labels.pgm")),
    )?;
    save_overlay(&img, &lm, a.out.join(format!("{s}_overlay.png")))?;
    let p = a.out.join(format!("{s}_kept.txt"));
    let mut w = create(&p)?;
    for l in &kept {
        writeln!(w, "{l}").map_err(|e| io_err(&p, e))?;
    }
    w.flush().map_err(|e| io_err(&p, e))?;
    println!("{} superpixels, {} kept", lm.num_superpixels(), kept.len());
    Ok(())
}

fn cmd_dwt(a: DwtArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let bands = dwt2(&img, &WaveletSpec::new(a.wavelet), a.levels)?;
    mkdir(&a.out)?;
    let s = stem(&a.input);
    for level in 1..=bands.depth() {
        for b in Band::level_set(level) {
            if let Some(r) = bands.band(b) {
                write_pgm_u8(
                    r.width(),
                    r.height(),
                    &r.normalized_u8(),
                    a.out.join(format!("{s}_{}.pgm", b.name())),
                )?;
            }
        }
    }
    Ok(())
}

fn read_kept(p: &Path) -> Result<Vec<u32>> {
    fs::read_to_string(p)
        .map_err(|e| io_err(p, e))?
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Malformed(format!("superpixel id '{t}'")))
        })
        .collect()
}

fn write_features(fm: &FeatureMatrix<f64>, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            fm.write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_err(p, e))
        }
        None => fm
            .write_csv(std::io::stdout().lock())
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let fm = match (&a.data, &a.image, &a.labels) {
        (Some(dir), _, _) => build_dataset(&cfg, dir, None)?.0.features,
        (None, Some(img), Some(labels)) => {
            let img = load_image::<f64>(img)?;
            let (w, h, raw) = read_pgm_u16(labels)?;
            if (w, h) != img.dims() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", img.width(), img.height()),
                    actual: format!("{w}x{h}"),
                });
            }
            let lm = LabelMap::from_u16(&img, &raw)?;
            let kept = match &a.kept {
                Some(p) => read_kept(p)?,
                None => (0..lm.num_superpixels() as u32).collect(),
            };
            let bands = dwt2(&img, &WaveletSpec::new(cfg.wavelet), cfg.levels)?;
            let mut fm = superpixel_features(a.id, &lm, &kept, &bands, &cfg.sources)?;
            if let Some(t) = &a.truth {
                let rows: Vec<u32> = fm.provenance().iter().map(|&(_, l)| l).collect();
                let classes = label_superpixels(&lm, &rows, &load_mask(t)?, cfg.overlap)?;
                fm = fm.with_labels(classes.into_iter().map(|(_, c)| c).collect())?;
            }
            fm
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give --data, or --image with --labels".into(),
            ))
        }
    };
    write_features(&fm, a.out.as_deref())
}

fn read_features(p: &Path) -> Result<FeatureMatrix<f64>> {
    let f = fs::File::open(p).map_err(|e| io_err(p, e))?;
    FeatureMatrix::read_csv(BufReader::new(f))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let fm = read_features(&a.features)?;
    let (pca, svm) = evalx::fit_models(&fm, &eval_params(&cfg))?;
    mkdir(&a.out)?;
    let p = a.out.join("model.pca");
    pca.write_text(create(&p)?).map_err(|e| io_err(&p, e))?;
    let p = a.out.join("model.svm");
    svm.write_text(create(&p)?).map_err(|e| io_err(&p, e))?;
    println!(
        "{} rows, {} components, {} support vectors",
        fm.rows(),
        pca.retained(),
        svm.n_support()
    );
    Ok(())
}

/// Lesion image when any of its rows is labeled lesion.
fn labels_from_rows(fm: &FeatureMatrix<f64>) -> Result<BTreeMap<usize, Class>> {
    let labels = fm
        .labels()
        .ok_or_else(|| Error::InvalidArgument("feature rows carry no labels".into()))?;
    let mut out = BTreeMap::new();
    for (&(img, _), &c) in fm.provenance().iter().zip(labels) {
        let e = out.entry(img).or_insert(Class::Normal);
        if c == Class::Lesion {
            *e = Class::Lesion;
        }
    }
    Ok(out)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let fm = read_features(&a.features)?;
    let image_labels = match &a.data {
        Some(dir) => pipeline::manifest(dir)?
            .into_iter()
            .map(|e| (e.id, e.label))
            .collect(),
        None => labels_from_rows(&fm)?,
    };
    let dataset = Dataset::new(fm, image_labels)?;
    let report = evaluate_dataset(&cfg, &dataset)?;
    let mut csv = Vec::new();
    evalx::write_report_csv(&report, &mut csv).expect("in-memory write");
    match &a.out {
        Some(dir) => write_evaluation(dir, &report)?,
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    println!(
        "{} {}: image accuracy {:.4}, superpixel accuracy {:.4}",
        kernel_name(&report.kernel),
        report.method,
        report.image.accuracy(),
        report.superpixel.accuracy()
    );
    if a.table {
        let table = evalx::kernel_table(&dataset, &cfg.table_seeds, &eval_params(&cfg))?;
        print!("{}", evalx::format_table(&table));
        if let Some(dir) = &a.out {
            let p = dir.join("metrics.csv");
            evalx::write_table_csv(&table, create(&p)?).map_err(|e| io_err(&p, e))?;
        }
    }
    Ok(())
}

fn kernel_name(k: &KernelSpec<f64>) -> String {
    match k.kind {
        KernelKind::Polynomial => format!("polynomial(d={})", k.degree),
        kind => kind.to_string(),
    }
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    if a.print_config || a.dry_run {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let summary = run_pipeline(&cfg, &a.data, &a.out)?;
    println!(
        "{} cases, {} superpixel rows, {:.1}s",
        summary.cases,
        summary.rows,
        summary.elapsed.as_secs_f64()
    );
    println!(
        "{} {}: image accuracy {:.4}",
        kernel_name(&summary.report.kernel),
        summary.report.method,
        summary.report.image.accuracy()
    );
    print!("{}", evalx::format_table(&summary.table));
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MSLESION_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "MSLESION_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Dwt(a) => cmd_dwt(a),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ManifestNotFound(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
