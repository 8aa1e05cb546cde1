use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crosspeak::angular::{self, AngleGrid};
use crosspeak::catalog::{Catalog, CatalogError};
use crosspeak::crossing::{self, CrossingError, SweepSpec};
use crosspeak::output;
use crosspeak::spectrum::{
    self, AbscissaKind, AssumedCrossing, Branch, Fiducial, PeakConfig, PeakFit, PeakWindow, ScanMetadata,
    Spectrum, SpectrumError, ZfsUncertainties,
};
use crosspeak::spin::{parse_axis, OrientationClass, SelectionRule, SpinError, SpinSpecies};

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "crosspeak", version, about = "NV cross-relaxation prediction and PL scan analysis")]
struct Cli {
    /// Species catalog (JSON); the built-in catalog is used when absent.
    #[arg(long, global = true, env = "CROSSPEAK_CATALOG")]
    catalog: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }
    fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transition curves of one or more species along a field axis.
    Predict(PredictArgs),
    /// Resonances between two species, or the NV–P1 three-body fields.
    Crossings(CrossingArgs),
    /// Baseline, dip detection and Gaussian fits for a PL scan.
    Fit(FitArgs),
    /// Zero-field splitting from a dip center.
    Invert(InvertArgs),
    /// PL map versus field angle around a reference axis.
    Map(MapArgs),
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Comma-separated species names.
    #[arg(long, value_delimiter = ',', required = true)]
    species: Vec<String>,
    #[arg(long, default_value = "100")]
    axis: String,
    /// B_min:B_max in gauss.
    #[arg(long, default_value = "0:145")]
    range: String,
    #[arg(long, default_value_t = crossing::DEFAULT_STEP)]
    step: f64,
    /// NV_PROBE, ALL_PAIRS or COMPLEX_SPLIT; defaults per species.
    #[arg(long)]
    rule: Option<String>,
}

#[derive(Args, Debug)]
struct CrossingArgs {
    #[arg(long, required_unless_present = "p1_three_body")]
    a: Option<String>,
    #[arg(long, required_unless_present = "p1_three_body")]
    b: Option<String>,
    /// Solve the NV–P1 three-body matching condition instead.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    p1_three_body: bool,
    #[arg(long, default_value = "NV")]
    nv: String,
    #[arg(long, default_value = "P1")]
    p1: String,
    #[arg(long, default_value = "100")]
    axis: String,
    /// B_min:B_max in gauss; 15:145 for pairs, 0:300 for the three-body search.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value_t = crossing::DEFAULT_STEP)]
    step: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Scan CSV: abscissa, counts.
    scan: PathBuf,
    /// Abscissa kind; read from the sidecar JSON when not given, else field.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Sidecar JSON with scan metadata; defaults to <scan>.json if present.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Fiducial CSV (voltage, frequency_MHz[, branch]) for voltage scans.
    #[arg(long)]
    fiducials: Option<PathBuf>,
    #[arg(long)]
    axis: Option<String>,
    /// Dip windows "lo:hi,lo:hi" in gauss; detected automatically otherwise.
    #[arg(long)]
    windows: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    #[arg(long, default_value = "NV")]
    nv: String,
    /// Also invert every fitted dip into a zero-field splitting.
    #[arg(long)]
    invert: bool,
    #[command(flatten)]
    unc: UncertaintyArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Field,
    Voltage,
}

#[derive(Args, Debug, Clone)]
struct UncertaintyArgs {
    /// Field calibration uncertainty, G.
    #[arg(long, default_value_t = 1.0)]
    cal_unc: f64,
    /// Field direction uncertainty, degrees.
    #[arg(long, default_value_t = 0.5)]
    angle_unc: f64,
    /// NV zero-field splitting uncertainty, MHz.
    #[arg(long, default_value_t = spectrum::zfs::DEFAULT_NV_D_UNCERTAINTY)]
    nv_d_unc: f64,
    #[arg(long, value_enum, default_value_t = BranchArg::Lower)]
    nv_branch: BranchArg,
    #[arg(long, value_enum, default_value_t = BranchArg::Upper)]
    target_branch: BranchArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    Lower,
    Upper,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Lower => Branch::Lower,
            BranchArg::Upper => Branch::Upper,
        }
    }
}

#[derive(Args, Debug)]
struct InvertArgs {
    /// Dip center, G.
    #[arg(long, required_unless_present = "report", conflicts_with = "report")]
    center: Option<f64>,
    /// Standard error of the dip center, G.
    #[arg(long, default_value_t = 0.0)]
    center_sigma: f64,
    /// Report JSON written by `fit`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Only this peak of the report (0-based).
    #[arg(long)]
    peak: Option<usize>,
    #[arg(long, default_value = "100")]
    axis: String,
    #[arg(long, default_value = "NV")]
    nv: String,
    #[command(flatten)]
    unc: UncertaintyArgs,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long, default_value_t = angular::DEFAULT_AMPLITUDE)]
    amplitude: f64,
    /// Half-range of both angles, degrees.
    #[arg(long, default_value_t = 20.0)]
    max: f64,
    #[arg(long, default_value_t = 101)]
    steps: usize,
    #[arg(long, default_value = "100")]
    reference: String,
    #[arg(long, default_value_t = angular::DEFAULT_LINEWIDTH)]
    linewidth: f64,
    #[arg(long, default_value_t = angular::DEFAULT_CONTRAST)]
    contrast: f64,
    #[arg(long, default_value = "NV")]
    nv: String,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e.into(),
    }
}

fn spin_code(e: &SpinError) -> u8 {
    match e {
        SpinError::TrackingFailure { .. } | SpinError::NotHermitian(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

impl From<SpinError> for Failure {
    fn from(e: SpinError) -> Self {
        Failure {
            code: spin_code(&e),
            error: e.into(),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        config(e)
    }
}

impl From<CrossingError> for Failure {
    fn from(e: CrossingError) -> Self {
        let code = match &e {
            CrossingError::Spin(s) => spin_code(s),
            _ => EXIT_CONFIG,
        };
        Failure { code, error: e.into() }
    }
}

impl From<SpectrumError> for Failure {
    fn from(e: SpectrumError) -> Self {
        let code = match &e {
            SpectrumError::NoSolution(_) => EXIT_DOMAIN,
            SpectrumError::Underdetermined { .. } => EXIT_NUMERICAL,
            SpectrumError::Spin(s) => spin_code(s),
            SpectrumError::Crossing(CrossingError::Spin(s)) => spin_code(s),
            _ => EXIT_CONFIG,
        };
        Failure { code, error: e.into() }
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    catalog: Catalog,
    out_dir: PathBuf,
    format: Format,
    verbose: u8,
}

impl Ctx {
    fn species(&self, name: &str) -> Result<SpinSpecies, Failure> {
        Ok(self.catalog.get(name)?.clone())
    }

    fn note(&self, msg: impl fmt::Display) {
        if self.verbose > 0 {
            eprintln!("{msg}");
        }
    }

    /// Writes every file or none: all contents are rendered before the first write.
    fn write_all(&self, files: Vec<(&str, String)>) -> Outcome {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("cannot create {}", self.out_dir.display()))
            .map_err(config)?;
        for (name, contents) in files {
            let path = self.out_dir.join(name);
            output::write_atomic(&path, contents.as_bytes())
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(config)?;
            self.note(format_args!("wrote {}", path.display()));
        }
        Ok(())
    }

    fn emit(&self, stem: &str, csv: Option<String>, json: Option<Value>) -> Outcome {
        let mut files = Vec::new();
        let csv_name = format!("{stem}.csv");
        let json_name = format!("{stem}.json");
        if self.format.csv() {
            if let Some(c) = csv {
                files.push((csv_name.as_str(), c));
            }
        }
        if self.format.json() {
            if let Some(j) = json {
                files.push((json_name.as_str(), output::to_json_string(&j)));
            }
        }
        self.write_all(files)
    }
}

fn parse_range(text: &str) -> Result<(f64, f64), Failure> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| config(anyhow!("range must look like MIN:MAX, got '{text}'")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| config(anyhow!("'{s}' in range '{text}' is not a number")))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_rule(text: &str) -> Result<SelectionRule, Failure> {
    match text.to_ascii_uppercase().replace('-', "_").as_str() {
        "NV_PROBE" => Ok(SelectionRule::NvProbe),
        "ALL_PAIRS" => Ok(SelectionRule::AllPairs),
        "COMPLEX_SPLIT" => Ok(SelectionRule::ComplexSplit),
        _ => Err(config(anyhow!("unknown selection rule '{text}'"))),
    }
}

fn parse_windows(text: &str) -> Result<Vec<PeakWindow>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|w| parse_range(w).map(|(a, b)| PeakWindow::from_range(a, b)))
        .collect()
}

fn cmd_predict(ctx: &Ctx, args: &PredictArgs) -> Outcome {
    let axis = parse_axis(&args.axis)?;
    let (lo, hi) = parse_range(&args.range)?;
    let spec = SweepSpec::new(axis, lo, hi, args.step)?;
    let forced = args.rule.as_deref().map(parse_rule).transpose()?;
    let mut curves = Vec::new();
    for name in &args.species {
        let s = ctx.species(name)?;
        let rule = forced.unwrap_or_else(|| SelectionRule::default_for(&s));
        let c = crossing::sweep_curves(&s, &spec, &OrientationClass::all(), rule)?;
        if let Some(bad) = c.iter().find(|c| !c.tracking_ok()) {
            return Err(Failure {
                code: EXIT_NUMERICAL,
                error: anyhow!(
                    "label tracking lost on {} (overlap {:.3})",
                    bad,
                    bad.min_overlap
                ),
            });
        }
        curves.extend(c);
    }
    say!("{} curves", curves.len());
    for c in &curves {
        say!("  {c}");
    }
    ctx.emit("curves", Some(output::curves_csv(&curves)), Some(output::curves_json(&curves)))
}

fn cmd_crossings(ctx: &Ctx, args: &CrossingArgs) -> Outcome {
    let axis = parse_axis(&args.axis)?;
    let events = if args.p1_three_body {
        let (lo, hi) = parse_range(args.range.as_deref().unwrap_or("0:300"))?;
        let spec = SweepSpec::new(axis, lo, hi, args.step)?;
        crossing::p1_three_body_fields(&ctx.species(&args.nv)?, &ctx.species(&args.p1)?, &spec)?
    } else {
        let (lo, hi) = parse_range(args.range.as_deref().unwrap_or("15:145"))?;
        let spec = SweepSpec::new(axis, lo, hi, args.step)?;
        let sweep = |name: &str| -> Result<_, Failure> {
            let s = ctx.species(name)?;
            Ok(crossing::sweep_curves(&s, &spec, &OrientationClass::all(), SelectionRule::default_for(&s))?)
        };
        let a = sweep(args.a.as_deref().expect("clap requires --a"))?;
        let b = sweep(args.b.as_deref().expect("clap requires --b"))?;
        crossing::find_crossings(&a, &b)?
    };
    say!("{} events", events.len());
    for e in &events {
        say!(
            "  B* = {} G  f* = {} MHz  {} {} x {} {}",
            output::gauss(e.b_star),
            output::mhz(e.f_star),
            e.species_a,
            e.transition_a,
            e.species_b,
            e.transition_b
        );
    }
    if args.p1_three_body {
        let fields = crossing::distinct_fields(&events, crossing::MERGE_DISTANCE);
        let list: Vec<String> = fields.iter().map(|f| format!("{f:.2}")).collect();
        say!("{} distinct fields: {}", fields.len(), list.join(", "));
    }
    ctx.emit("crossings", Some(output::crossings_csv(&events)), Some(output::crossings_json(&events)))
}

fn uncertainties(u: &UncertaintyArgs) -> (ZfsUncertainties, AssumedCrossing) {
    (
        ZfsUncertainties {
            calibration: u.cal_unc,
            angle: u.angle_unc,
            nv_d: u.nv_d_unc,
        },
        AssumedCrossing {
            nv_branch: u.nv_branch.into(),
            target_branch: u.target_branch.into(),
            ..AssumedCrossing::default()
        },
    )
}

#[derive(serde::Deserialize, Default)]
struct Sidecar {
    #[serde(default)]
    abscissa_kind: Option<AbscissaKind>,
    #[serde(flatten)]
    metadata: ScanMetadata,
}

fn read_sidecar(args: &FitArgs) -> Result<Sidecar, Failure> {
    let path = match &args.meta {
        Some(p) => p.clone(),
        None => {
            let p = args.scan.with_extension("json");
            if !p.exists() {
                return Ok(Sidecar::default());
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(config)?;
    serde_json::from_str(&text)
        .with_context(|| format!("bad sidecar {}", path.display()))
        .map_err(config)
}

fn cmd_fit(ctx: &Ctx, args: &FitArgs) -> Outcome {
    let sidecar = read_sidecar(args)?;
    let kind = match args.kind {
        Some(KindArg::Field) => AbscissaKind::Field,
        Some(KindArg::Voltage) => AbscissaKind::Voltage,
        None => sidecar.abscissa_kind.unwrap_or(AbscissaKind::Field),
    };
    let axis_text = args
        .axis
        .clone()
        .or(sidecar.metadata.sweep_axis.clone())
        .unwrap_or_else(|| "100".into());
    let axis = parse_axis(&axis_text)?;
    let nv = ctx.species(&args.nv)?;
    let mut scan = Spectrum::from_csv_path(&args.scan, kind)?;
    scan.metadata = sidecar.metadata;

    let (scan, calibration) = match kind {
        AbscissaKind::Field => (scan, None),
        AbscissaKind::Voltage => {
            let path = args
                .fiducials
                .as_ref()
                .ok_or_else(|| config(anyhow!("a voltage scan needs --fiducials")))?;
            let file = std::fs::File::open(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(config)?;
            let fid = Fiducial::from_csv(file)?;
            let map = spectrum::calibrate(&scan, &fid, &nv, axis)?;
            if map.quality != spectrum::CalibrationQuality::Linear {
                eprintln!(
                    "warning: calibration is non-linear (max deviation {:.3} G)",
                    map.max_nonlinearity
                );
            }
            (map.apply(&scan)?, Some(map))
        }
    };
    let windows = args.windows.as_deref().map(parse_windows).transpose()?;
    let cfg = PeakConfig {
        k: args.k,
        ..PeakConfig::default()
    };
    let mut report = spectrum::analyze(&scan, windows.as_deref(), &cfg)?;
    report.calibration = calibration;
    if args.invert {
        let (unc, crossing) = uncertainties(&args.unc);
        for p in &report.peaks {
            report.zfs.push(spectrum::infer_zfs(p, &unc, &nv, &crossing, axis)?);
        }
    }
    say!("{} peaks", report.peaks.len());
    for p in &report.peaks {
        say!(
            "  center {} ± {} G  sigma {} G{}{}",
            output::gauss(p.center),
            output::gauss(p.center_sigma()),
            output::gauss(p.sigma),
            if p.poor_fit { "  [poor fit]" } else { "" },
            if p.edge_truncated { "  [edge truncated]" } else { "" },
        );
    }
    ctx.emit("report", Some(output::report_csv(&report)), Some(output::report_json(&report)))
}

fn report_peaks(path: &Path) -> Result<Vec<PeakFit>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(config)?;
    let v: Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not JSON", path.display()))
        .map_err(config)?;
    let peaks = v
        .get("peaks")
        .and_then(Value::as_array)
        .ok_or_else(|| config(anyhow!("{} has no 'peaks' array", path.display())))?;
    peaks
        .iter()
        .map(|p| {
            let center = p
                .get("center_G")
                .and_then(Value::as_f64)
                .ok_or_else(|| config(anyhow!("peak without center_G")))?;
            let sigma = p.get("center_sigma_G").and_then(Value::as_f64).unwrap_or(0.0);
            Ok(PeakFit::from_center(center, sigma))
        })
        .collect()
}

fn cmd_invert(ctx: &Ctx, args: &InvertArgs) -> Outcome {
    let axis = parse_axis(&args.axis)?;
    let nv = ctx.species(&args.nv)?;
    let mut peaks = match (&args.report, args.center) {
        (Some(path), _) => report_peaks(path)?,
        (None, Some(c)) => vec![PeakFit::from_center(c, args.center_sigma)],
        (None, None) => unreachable!("clap requires --center or --report"),
    };
    if let Some(k) = args.peak {
        if k >= peaks.len() {
            return Err(config(anyhow!("peak {k} requested, report has {}", peaks.len())));
        }
        peaks = vec![peaks.swap_remove(k)];
    }
    let (unc, crossing) = uncertainties(&args.unc);
    let mut estimates = Vec::new();
    for p in &peaks {
        let z = spectrum::infer_zfs(p, &unc, &nv, &crossing, axis)?;
        say!(
            "center {} G -> D = {} ± {} MHz",
            output::gauss(z.center),
            output::mhz(z.d),
            output::mhz(z.sigma_d)
        );
        estimates.push(output::zfs_json(&z));
    }
    let json = json!({ "nv": nv.name, "axis": args.axis, "estimates": estimates });
    ctx.write_all(vec![("zfs.json", output::to_json_string(&json))])
}

fn cmd_map(ctx: &Ctx, args: &MapArgs) -> Outcome {
    let reference = parse_axis(&args.reference)?;
    let grid = AngleGrid::square(args.max, args.steps)?;
    let nv = ctx.species(&args.nv)?;
    let map = angular::simulate_map(&grid, reference, args.amplitude, &nv, args.linewidth, args.contrast)?;
    let loci = angular::plane_loci(reference, &grid);
    let (i, j) = map.min_point();
    say!(
        "minimum pl_proxy {:.6} at (phi, theta) = ({:.4}, {:.4}) deg",
        map.value(i, j),
        grid.phis()[i],
        grid.thetas()[j]
    );
    if map.uniform {
        eprintln!("warning: the map is uniform; the field carries no direction information");
    }
    let mut files = Vec::new();
    if ctx.format.csv() {
        files.push(("map.csv", output::map_csv(&map)));
        files.push(("loci.csv", output::loci_csv(&loci)));
    }
    if ctx.format.json() {
        files.push(("map.json", output::to_json_string(&output::map_metadata(&map, &loci))));
    }
    ctx.write_all(files)
}

fn run(cli: Cli) -> Outcome {
    let catalog = match &cli.catalog {
        Some(p) => Catalog::load(p)?,
        None => Catalog::builtin(),
    };
    let ctx = Ctx {
        catalog,
        out_dir: cli.out_dir,
        format: cli.format,
        verbose: cli.verbose,
    };
    ctx.note(format_args!("catalog: {} species", ctx.catalog.names().count()));
    match &cli.command {
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Crossings(a) => cmd_crossings(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Invert(a) => cmd_invert(&ctx, a),
        Command::Map(a) => cmd_map(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
