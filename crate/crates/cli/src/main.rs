//! `morsegrid`: RGB image to grayscale, persistence diagrams, plots and
//! lifespan predictions.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 internal consistency
//! failure (oracle mismatch), 4 insufficient data for prediction.

mod batch;
mod config;

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use morsegrid::color::{self, ConversionMethod, PreprocessSpec, Rect, SurjectionTable, Weights};
use morsegrid::export::{self, ExportOptions, PlotStyle};
use morsegrid::image_io::{self, PnmMode, RgbFormat};
use morsegrid::persistence::{self, PersistenceDiagram};
use morsegrid::predict::{self, PredictConfig, PredictError};
use morsegrid::{analyze, build_complex, Execution, GrayImage, RgbImage};
use num_rational::Ratio;

#[derive(Parser, Debug)]
#[command(
    name = "morsegrid",
    version,
    about = "Discrete-Morse persistent homology for RGB and grayscale images",
    args_override_self = true,
    after_help = "MORSEGRID_THREADS caps how many images are processed at once."
)]
struct Cli {
    /// key=value file mirroring the long flags; command-line flags win [default: none]
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convert RGB images (PPM or PNG) to PGM
    Convert(ConvertArgs),
    /// Persistence diagram of PGM images, written as .txt and .csv
    Persist(PersistArgs),
    /// Plot a .txt diagram as SVG
    Render(RenderArgs),
    /// Extrapolate lifespans across dated .csv diagrams
    Predict(PredictArgs),
    /// Every stage: convert, persist, render, then predict over the inputs
    Pipeline(PipelineArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Average,
    Luminosity,
    Weighted,
    Surjection,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Style {
    Barcode,
    Scatter,
}

impl From<Style> for PlotStyle {
    fn from(s: Style) -> Self {
        match s {
            Style::Barcode => PlotStyle::Barcode,
            Style::Scatter => PlotStyle::Scatter,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ConversionArgs {
    /// RGB to gray mapping
    #[arg(long, value_enum, default_value_t = Method::Luminosity)]
    method: Method,
    /// Channel weights for --method weighted, e.g. 0.5,0.25,0.25 or 1/2,1/4,1/4 [default: none]
    #[arg(long, value_name = "R,G,B")]
    weights: Option<Weights>,
    /// Surjection table (r,g,b,gray lines) for --method surjection [default: none]
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Crop rectangle applied first [default: none]
    #[arg(long, value_name = "X,Y,W,H")]
    crop: Option<Rect>,
    /// Background color to mask to white; repeatable [default: none]
    #[arg(long, value_name = "R,G,B", value_parser = parse_rgb)]
    background: Vec<[u8; 3]>,
    /// Per-channel tolerance for --background
    #[arg(long, default_value_t = 0)]
    tolerance: u8,
    /// Push every chromatic pixel to full saturation
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    saturate: bool,
    /// Stretch each channel to the full 0..255 range
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    contrast: bool,
}

#[derive(Args, Debug, Clone)]
struct ExportArgs {
    /// Keep pairs with birth equal to death
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    keep_zero: bool,
    /// Write essential classes to the .csv with death inf
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    include_essential: bool,
    /// Use the superlevel filtration (analyze 255 - v)
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    invert: bool,
    /// Cross-check against full boundary reduction; exit 3 on mismatch
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    oracle: bool,
    /// Largest cell count the oracle accepts
    #[arg(long, default_value_t = persistence::DEFAULT_ORACLE_LIMIT)]
    oracle_limit: usize,
}

impl ExportArgs {
    fn options(&self) -> ExportOptions {
        ExportOptions {
            keep_zero: self.keep_zero,
            include_essential: self.include_essential,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct PredictTuning {
    /// Seed for the ChaCha8 subsampling generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Degree of the least-squares polynomial
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Drop dates with fewer records than this share of the others' median
    #[arg(long, value_name = "RATIO", default_value = "1/2")]
    outlier_ratio: Ratio<u64>,
}

impl PredictTuning {
    fn config(&self) -> PredictConfig {
        PredictConfig {
            seed: self.seed,
            degree: self.degree,
            outlier_ratio: self.outlier_ratio,
        }
    }
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Input PPM or PNG image [default: none]
    #[arg(required_unless_present = "glob")]
    input: Option<PathBuf>,
    /// Process every matching file; -o is then a directory [default: none]
    #[arg(long, value_name = "PATTERN")]
    glob: Option<String>,
    /// Output PGM, or directory in --glob mode [default: none, required]
    #[arg(short, long)]
    output: PathBuf,
    /// Write plain-text P2 instead of binary P5
    #[arg(long, default_value_t = false, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    ascii: bool,
    #[command(flatten)]
    conversion: ConversionArgs,
}

#[derive(Args, Debug)]
struct PersistArgs {
    /// Input PGM image [default: none]
    #[arg(required_unless_present = "glob")]
    input: Option<PathBuf>,
    /// Process every matching file [default: none]
    #[arg(long, value_name = "PATTERN")]
    glob: Option<String>,
    /// Directory for <stem>.txt and <stem>.csv
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    export: ExportArgs,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Diagram in .txt form
    input: PathBuf,
    /// Plot style
    #[arg(long, value_enum, default_value_t = Style::Barcode)]
    style: Style,
    /// Output SVG [default: input with .svg extension]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Dated diagram as DATE=PATH, DATE counting intervals from 1; repeatable [default: none]
    #[arg(long = "input", value_name = "DATE=PATH", value_parser = parse_dated)]
    inputs: Vec<(u32, PathBuf)>,
    /// Diagrams dated 1, 2, ... in sorted path order [default: none]
    #[arg(long, value_name = "PATTERN")]
    glob: Option<String>,
    /// Observed diagram at --next to score against; without it the last date is held out [default: none]
    #[arg(long, value_name = "PATH")]
    actual: Option<PathBuf>,
    /// Date to predict [default: last input date + 1 with --actual, else last input date]
    #[arg(long)]
    next: Option<u32>,
    /// Report path
    #[arg(short, long, default_value = "prediction.csv")]
    output: PathBuf,
    #[command(flatten)]
    tuning: PredictTuning,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Input images, oldest first [default: none]
    #[arg(required_unless_present = "glob")]
    inputs: Vec<PathBuf>,
    /// Input images in sorted path order [default: none]
    #[arg(long, value_name = "PATTERN")]
    glob: Option<String>,
    /// Directory for every output
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Plot style
    #[arg(long, value_enum, default_value_t = Style::Barcode)]
    style: Style,
    #[command(flatten)]
    conversion: ConversionArgs,
    #[command(flatten)]
    export: ExportArgs,
    #[command(flatten)]
    tuning: PredictTuning,
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, g, b] = parts[..] else {
        return Err(format!("expected R,G,B, got {s:?}"));
    };
    let c = |v: &str| v.parse::<u8>().map_err(|e| format!("{v:?}: {e}"));
    Ok([c(r)?, c(g)?, c(b)?])
}

fn parse_dated(s: &str) -> Result<(u32, PathBuf), String> {
    let (date, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected DATE=PATH, got {s:?}"))?;
    let date = date
        .trim()
        .parse::<u32>()
        .map_err(|e| format!("bad date {date:?}: {e}"))?;
    Ok((date, PathBuf::from(path)))
}

/// An oracle disagreement. Maps to exit code 3.
#[derive(Debug)]
struct OracleMismatch(String);

impl fmt::Display for OracleMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "oracle mismatch: {}", self.0)
    }
}

impl std::error::Error for OracleMismatch {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<OracleMismatch>().is_some() {
            return 3;
        }
        if let Some(PredictError::InsufficientData(_)) = cause.downcast_ref::<PredictError>() {
            return 4;
        }
    }
    2
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Write via a temporary file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let mut paths = glob::glob(pattern)
        .with_context(|| format!("bad glob pattern {pattern:?}"))?
        .collect::<Result<Vec<_>, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("glob {pattern:?} matched no files");
    }
    Ok(paths)
}

fn gather(input: Option<&PathBuf>, glob: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = input.cloned().into_iter().collect();
    if let Some(g) = glob {
        paths.extend(expand_glob(g)?);
    }
    Ok(paths)
}

fn conversion_method(c: &ConversionArgs) -> Result<ConversionMethod> {
    Ok(match c.method {
        Method::Average => ConversionMethod::Average,
        Method::Luminosity => ConversionMethod::Luminosity,
        Method::Weighted => {
            let w = c.weights.context("--method weighted needs --weights")?;
            ConversionMethod::Weighted(w)
        }
        Method::Surjection => {
            let path = c
                .table
                .as_ref()
                .context("--method surjection needs --table")?;
            let text = String::from_utf8(read(path)?)
                .with_context(|| format!("{} is not UTF-8", path.display()))?;
            let table =
                SurjectionTable::parse(&text).with_context(|| format!("in {}", path.display()))?;
            ConversionMethod::Surjection(table)
        }
    })
}

fn preprocess_spec(c: &ConversionArgs) -> PreprocessSpec {
    PreprocessSpec {
        crop: c.crop,
        background_colors: c.background.clone(),
        tolerance: c.tolerance,
        saturate: c.saturate,
        contrast_stretch: c.contrast,
    }
}

fn read_rgb_file(path: &Path) -> Result<RgbImage> {
    let bytes = read(path)?;
    let format = RgbFormat::sniff(&bytes)
        .with_context(|| format!("{}: not a PPM or PNG image", path.display()))?;
    image_io::read_rgb(&bytes, format).with_context(|| format!("cannot parse {}", path.display()))
}

/// `min max mean levels` plus an eight-bin histogram.
fn histogram_summary(img: &GrayImage) -> String {
    let mut counts = [0usize; 256];
    for &v in img.values() {
        counts[v as usize] += 1;
    }
    let n = img.values().len().max(1);
    let min = counts.iter().position(|&c| c > 0).unwrap_or(0);
    let max = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    let sum: usize = counts.iter().enumerate().map(|(v, c)| v * c).sum();
    let levels = counts.iter().filter(|&&c| c > 0).count();
    let bins: Vec<String> = counts
        .chunks(32)
        .map(|c| c.iter().sum::<usize>().to_string())
        .collect();
    format!(
        "min={min} max={max} mean={:.2} levels={levels} hist32=[{}]",
        sum as f64 / n as f64,
        bins.join(" ")
    )
}

fn convert_one(
    path: &Path,
    out: &Path,
    method: &ConversionMethod,
    spec: &PreprocessSpec,
    mode: PnmMode,
    exec: Execution,
) -> Result<String> {
    let rgb = read_rgb_file(path)?;
    let rgb = color::preprocess(&rgb, spec).with_context(|| format!("{}", path.display()))?;
    let gray =
        color::to_gray_with(&rgb, method, exec).with_context(|| format!("{}", path.display()))?;
    write_atomic(out, &image_io::write_pgm(&gray, mode))?;

    let mut report = format!("{} -> {}\n", path.display(), out.display());
    let mut shown = vec![ConversionMethod::Average, ConversionMethod::Luminosity];
    if !shown.contains(method) {
        shown.push(method.clone());
    }
    for m in &shown {
        let g = if m == method {
            gray.clone()
        } else {
            color::to_gray_with(&rgb, m, exec)?
        };
        let mark = if m == method { "*" } else { " " };
        report.push_str(&format!("  {mark} {m}: {}\n", histogram_summary(&g)));
    }
    Ok(report)
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let method = conversion_method(&a.conversion)?;
    let spec = preprocess_spec(&a.conversion);
    let mode = if a.ascii {
        PnmMode::Ascii
    } else {
        PnmMode::Binary
    };
    let inputs = gather(a.input.as_ref(), a.glob.as_deref())?;
    let batch = a.glob.is_some();
    println!("method: {method}");
    let reports = batch::run(&inputs, |path, exec| {
        let out = if batch {
            a.output.join(format!("{}.pgm", stem(path)))
        } else {
            a.output.clone()
        };
        convert_one(path, &out, &method, &spec, mode, exec)
    })?;
    for r in reports {
        print!("{r}");
    }
    Ok(())
}

struct Persisted {
    diagram: PersistenceDiagram,
    csv: Vec<u8>,
    report: String,
}

fn persist_gray(
    img: &GrayImage,
    name: &str,
    out_dir: &Path,
    e: &ExportArgs,
    exec: Execution,
) -> Result<Persisted> {
    let img = if e.invert {
        img.inverted()
    } else {
        img.clone()
    };
    let diagram = analyze(&img, false, exec).context("Morse reduction failed")?;
    let mut report = String::new();
    if e.oracle {
        let k = build_complex(&img);
        let oracle = persistence::oracle_persistence(&k, e.oracle_limit)
            .with_context(|| format!("{name}: oracle unavailable"))?;
        if oracle.signature() != diagram.signature() {
            return Err(OracleMismatch(format!(
                "{name}: Morse route {:?}, oracle {:?}",
                diagram.signature(),
                oracle.signature()
            ))
            .into());
        }
        report.push_str(&format!("  oracle: match on {} cells\n", k.num_cells()));
    }
    let opts = e.options();
    let txt_path = out_dir.join(format!("{name}.txt"));
    let csv_path = out_dir.join(format!("{name}.csv"));
    let csv = export::write_csv(&diagram, opts);
    write_atomic(&txt_path, &export::write_txt(&diagram, opts))?;
    write_atomic(&csv_path, &csv)?;
    let essential = diagram.pairs().iter().filter(|p| p.is_essential()).count();
    let visible = diagram.signature().len() - essential;
    let per_dim: Vec<usize> = (0..=1)
        .map(|d| {
            diagram
                .dimension(d)
                .filter(|p| !p.is_essential() && !p.is_zero_length())
                .count()
        })
        .collect();
    report.insert_str(
        0,
        &format!(
            "{} finite pairs (dim0 {}, dim1 {}), {essential} essential -> {}, {}\n",
            visible,
            per_dim[0],
            per_dim[1],
            txt_path.display(),
            csv_path.display()
        ),
    );
    Ok(Persisted {
        diagram,
        csv,
        report,
    })
}

fn cmd_persist(a: &PersistArgs) -> Result<()> {
    let inputs = gather(a.input.as_ref(), a.glob.as_deref())?;
    let reports = batch::run(&inputs, |path, exec| {
        let img = image_io::read_pgm(&read(path)?)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        let p = persist_gray(&img, &stem(path), &a.out_dir, &a.export, exec)?;
        Ok(format!("{}: {}", path.display(), p.report))
    })?;
    for r in reports {
        print!("{r}");
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let text = String::from_utf8(read(&a.input)?)
        .with_context(|| format!("{} is not UTF-8", a.input.display()))?;
    let d =
        export::parse_txt(&text).with_context(|| format!("cannot parse {}", a.input.display()))?;
    let out = a
        .output
        .clone()
        .unwrap_or_else(|| a.input.with_extension("svg"));
    write_atomic(&out, &export::render_diagram(&d, a.style.into()))?;
    println!("{} pairs -> {}", d.len(), out.display());
    Ok(())
}

fn run_predict(
    dated: &[(u32, Vec<u8>)],
    holdout: Option<u32>,
    tuning: &PredictTuning,
    output: &Path,
) -> Result<()> {
    let refs: Vec<(u32, &[u8])> = dated.iter().map(|(d, b)| (*d, b.as_slice())).collect();
    let report = predict::run_prediction(&refs, holdout, &tuning.config())?;
    for d in &report.dropped {
        eprintln!("dropped date {}: {}", d.date_index, d.reason);
    }
    write_atomic(output, report.to_csv().as_bytes())?;
    println!(
        "predicted {} lifespans at date {} -> {}",
        report.actual.len(),
        report.x_next,
        output.display()
    );
    println!("{}", report.summary_line());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let mut dated: Vec<(u32, PathBuf)> = a.inputs.clone();
    if let Some(g) = &a.glob {
        dated.extend(
            expand_glob(g)?
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as u32 + 1, p)),
        );
    }
    let mut files = dated
        .iter()
        .map(|(d, p)| Ok((*d, read(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let last = files.iter().map(|f| f.0).max().unwrap_or(0);
    let holdout = match &a.actual {
        Some(path) => {
            let next = a.next.unwrap_or(last + 1);
            files.push((next, read(path)?));
            Some(next)
        }
        None => a.next,
    };
    run_predict(&files, holdout, &a.tuning, &a.output)
}

fn cmd_pipeline(a: &PipelineArgs) -> Result<()> {
    let mut inputs = a.inputs.clone();
    if let Some(g) = &a.glob {
        inputs.extend(expand_glob(g)?);
    }
    let method = conversion_method(&a.conversion)?;
    let spec = preprocess_spec(&a.conversion);
    println!("method: {method}");
    let results = batch::run(&inputs, |path, exec| {
        let name = stem(path);
        let rgb = read_rgb_file(path)?;
        let rgb = color::preprocess(&rgb, &spec).with_context(|| format!("{}", path.display()))?;
        let gray = color::to_gray_with(&rgb, &method, exec)?;
        let pgm = a.out_dir.join(format!("{name}.pgm"));
        write_atomic(&pgm, &image_io::write_pgm(&gray, PnmMode::Binary))?;
        let p = persist_gray(&gray, &name, &a.out_dir, &a.export, exec)?;
        let svg = a.out_dir.join(format!("{name}.svg"));
        write_atomic(&svg, &export::render_diagram(&p.diagram, a.style.into()))?;
        let report = format!(
            "{}: {}\n  {}",
            path.display(),
            histogram_summary(&gray),
            p.report
        );
        Ok((report, p.csv))
    })?;
    let mut dated = Vec::new();
    for (i, (report, csv)) in results.into_iter().enumerate() {
        print!("{report}");
        dated.push((i as u32 + 1, csv));
    }
    if dated.len() < 3 {
        println!(
            "prediction skipped: {} images, need at least 3",
            dated.len()
        );
        return Ok(());
    }
    run_predict(&dated, None, &a.tuning, &a.out_dir.join("prediction.csv"))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Cmd::Convert(a) => cmd_convert(a),
        Cmd::Persist(a) => cmd_persist(a),
        Cmd::Render(a) => cmd_render(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect(), &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
