//! `star`: decompose, enhance, color-correct and inspect weight maps for
//! single images or whole directories.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 computation error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use star_core::engine::{decompose_planes, stage_weights};
use star_core::image::{
    hsv_to_rgb, load_rgb, replace_value_channel, rgb_to_hsv, save_gray, save_rgb, write_raw_grid,
};
use star_core::{
    angular_error, color_correct, enhance_lowlight, objective, star_decompose, HsvImage,
    IlluminantEstimate, ImageGrid, Preconditioner, SolverSettings, StarError, StarParams,
    WeightKind, WindowSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

/// Environment variable capping batch parallelism (0 = one thread per core).
pub const THREADS_ENV: &str = "STAR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "star",
    version,
    about = "Structure and texture aware Retinex decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the value channel into illumination and reflectance.
    Decompose(CommonArgs),
    /// Brighten low-light images.
    Enhance {
        #[command(flatten)]
        common: CommonArgs,
        /// Exponent applied to the illumination as I^(1/gamma_e).
        #[arg(long, default_value_t = 2.2)]
        gamma_e: f64,
    },
    /// Estimate the illuminant per RGB channel and remove the color cast.
    Correct {
        #[command(flatten)]
        common: CommonArgs,
        /// Ground-truth illuminant "r,g,b"; prints the angular error when given.
        #[arg(long, value_parser = parse_truth)]
        truth: Option<[f64; 3]>,
    },
    /// Dump the initial structure and texture weight maps.
    Weights(CommonArgs),
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Decompose(c) | Command::Weights(c) => c,
            Command::Enhance { common, .. } | Command::Correct { common, .. } => common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightKindArg {
    Etv,
    Emlv,
}

impl From<WeightKindArg> for WeightKind {
    fn from(k: WeightKindArg) -> Self {
        match k {
            WeightKindArg::Etv => WeightKind::Etv,
            WeightKindArg::Emlv => WeightKind::Emlv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreconditionerArg {
    Jacobi,
    Ic,
}

impl From<PreconditionerArg> for Preconditioner {
    fn from(p: PreconditionerArg) -> Self {
        match p {
            PreconditionerArg::Jacobi => Preconditioner::Jacobi,
            PreconditionerArg::Ic => Preconditioner::IncompleteCholesky,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Image files or directories of PNG/JPEG images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory, created if absent.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
    /// Illumination smoothness weight.
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Reflectance smoothness weight.
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    /// Structure-map exponent (> 1).
    #[arg(long, default_value_t = 1.5)]
    pub gamma_s: f64,
    /// Texture-map exponent (< 1).
    #[arg(long, default_value_t = 0.5)]
    pub gamma_t: f64,
    /// Inner iteration budget per stage (K).
    #[arg(long, default_value_t = 20)]
    pub inner_iters: usize,
    /// Weight refreshes after the first stage (L).
    #[arg(long, default_value_t = 4)]
    pub outer_iters: usize,
    /// Relative-change threshold of the inner loop.
    #[arg(long, default_value_t = 1e-2)]
    pub eps_conv: f64,
    /// Stabilizer added before inverting the weight maps.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_weight: f64,
    /// Stabilizer added to division denominators.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_div: f64,
    #[arg(long, value_enum, default_value_t = WeightKindArg::Emlv)]
    pub weight_kind: WeightKindArg,
    /// Averaging window radius of the MLV map (1 = 3×3).
    #[arg(long, default_value_t = 1)]
    pub window_radius: usize,
    /// Relative residual at which conjugate gradients stop.
    #[arg(long, default_value_t = 1e-6)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub cg_max_iters: usize,
    /// CG preconditioner. Jacobi solves that run out of iterations retry
    /// with incomplete Cholesky unless --no-ic-fallback is given.
    #[arg(long, value_enum, default_value_t = PreconditionerArg::Jacobi)]
    pub preconditioner: PreconditionerArg,
    #[arg(long)]
    pub no_ic_fallback: bool,
    /// Ridge added to the normal equations.
    #[arg(long, default_value_t = 1e-12)]
    pub tikhonov: f64,
    /// Also write STARF32 raw dumps.
    #[arg(long)]
    pub dump_raw: bool,
    /// Also write the per-iteration convergence trace as CSV.
    #[arg(long)]
    pub dump_trace: bool,
}

impl CommonArgs {
    pub fn params(&self) -> StarParams {
        StarParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma_s: self.gamma_s,
            gamma_t: self.gamma_t,
            eps_div: self.eps_div,
            eps_weight: self.eps_weight,
            eps_conv: self.eps_conv,
            max_inner_iters: self.inner_iters,
            outer_iters: self.outer_iters,
            window: WindowSpec::new(self.window_radius),
            weight_kind: self.weight_kind.into(),
            solver: SolverSettings {
                cg_tol: self.cg_tol,
                cg_max_iters: self.cg_max_iters,
                tikhonov: self.tikhonov,
                preconditioner: self.preconditioner.into(),
                ic_fallback: !self.no_ic_fallback,
                ..SolverSettings::default()
            },
        }
    }
}

fn parse_truth(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() || *slot < 0.0 {
            return Err(format!(
                "components must be finite and non-negative, got {p}"
            ));
        }
    }
    if out.iter().all(|&v| v == 0.0) {
        return Err("illuminant must be nonzero".into());
    }
    Ok(out)
}

/// Failure of one image, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

fn classify(context: &Path, e: StarError) -> CliError {
    let msg = format!("{}: {e}", context.display());
    if e.is_computational() {
        CliError::Compute(msg)
    } else {
        CliError::Input(msg)
    }
}

/// Summary printed as the final `RESULT` line of each image.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub stem: String,
    pub iterations: usize,
    pub objective: f64,
}

impl Report {
    pub fn result_line(&self) -> String {
        format!(
            "RESULT {} iters={} objective={:.6e}",
            self.stem, self.iterations, self.objective
        )
    }
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Expands directories (non-recursively) into their images, sorted by name.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input)
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(CliError::Input(format!(
                "{}: no such file or directory",
                input.display()
            )));
        }
    }
    Ok(files)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn write_raw(grid: &ImageGrid, path: &Path) -> Result<(), CliError> {
    let file =
        File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    write_raw_grid(grid, BufWriter::new(file)).map_err(|e| classify(path, e))
}

fn save_display(hsv: &HsvImage, plane: &ImageGrid, path: &Path) -> Result<(), CliError> {
    let recombined = replace_value_channel(hsv, plane)
        .and_then(|h| hsv_to_rgb(&h))
        .map_err(|e| classify(path, e))?;
    save_rgb(&recombined, path).map_err(|e| classify(path, e))
}

fn write_trace(d: &star_core::Decomposition, path: &Path) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    d.write_trace_csv(BufWriter::new(file)).map_err(io_err)
}

fn decompose_one(path: &Path, args: &CommonArgs) -> Result<Report, CliError> {
    let stem = stem_of(path);
    let img = load_rgb(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let hsv = rgb_to_hsv(&img);
    let d = star_decompose(hsv.value(), &args.params()).map_err(|e| classify(path, e))?;
    let out = &args.output;
    save_display(&hsv, &d.illumination, &out.join(format!("{stem}_I.png")))?;
    save_display(&hsv, &d.reflectance, &out.join(format!("{stem}_R.png")))?;
    if args.dump_raw {
        write_raw(&d.illumination, &out.join(format!("{stem}_I.starf32")))?;
        write_raw(&d.reflectance, &out.join(format!("{stem}_R.starf32")))?;
    }
    if args.dump_trace {
        write_trace(&d, &out.join(format!("{stem}_trace.csv")))?;
    }
    Ok(Report {
        stem,
        iterations: d.iterations(),
        objective: d.final_objective(),
    })
}

fn enhance_one(path: &Path, args: &CommonArgs, gamma_e: f64) -> Result<Report, CliError> {
    let stem = stem_of(path);
    let img = load_rgb(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let enhanced =
        enhance_lowlight(&img, &args.params(), gamma_e).map_err(|e| classify(path, e))?;
    let out = &args.output;
    let target = out.join(format!("{stem}_enhanced.png"));
    save_rgb(&enhanced.image, &target).map_err(|e| classify(&target, e))?;
    let d = &enhanced.decomposition;
    if args.dump_raw {
        write_raw(&d.illumination, &out.join(format!("{stem}_I.starf32")))?;
        write_raw(&d.reflectance, &out.join(format!("{stem}_R.starf32")))?;
        write_raw(
            &enhanced.value,
            &out.join(format!("{stem}_enhanced_V.starf32")),
        )?;
    }
    if args.dump_trace {
        write_trace(d, &out.join(format!("{stem}_trace.csv")))?;
    }
    Ok(Report {
        stem,
        iterations: d.iterations(),
        objective: d.final_objective(),
    })
}

fn correct_one(
    path: &Path,
    args: &CommonArgs,
    truth: Option<[f64; 3]>,
) -> Result<Report, CliError> {
    let stem = stem_of(path);
    let img = load_rgb(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let params = args.params();
    let planes = decompose_planes(&img, &params).map_err(|e| classify(path, e))?;
    let est = IlluminantEstimate::from_decompositions(&planes).map_err(|e| classify(path, e))?;
    let corrected = color_correct(&img, &est).map_err(|e| classify(path, e))?;
    let target = args.output.join(format!("{stem}_corrected.png"));
    save_rgb(&corrected, &target).map_err(|e| classify(&target, e))?;
    let [r, g, b] = est.0;
    println!("ILLUMINANT {stem} {r:.3} {g:.3} {b:.3}");
    if let Some(truth) = truth {
        let err = angular_error(&est.0, &truth).map_err(|e| classify(path, e))?;
        println!("ANGULAR_ERROR {stem} {err:.3}");
    }
    // summed over the three channel decompositions
    Ok(Report {
        stem,
        iterations: planes.iter().map(|d| d.iterations()).sum(),
        objective: planes.iter().map(|d| d.final_objective()).sum(),
    })
}

fn weights_one(path: &Path, args: &CommonArgs) -> Result<Report, CliError> {
    let stem = stem_of(path);
    let img = load_rgb(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let params = args.params();
    params.validate().map_err(|e| classify(path, e))?;
    let value = rgb_to_hsv(&img).value().clone();
    let init = value.map(f64::sqrt);
    let (s, t) = stage_weights(&init, &init, &params).map_err(|e| classify(path, e))?;
    let out = &args.output;
    for (name, grid) in [("Sx", &s.x), ("Sy", &s.y), ("Tx", &t.x), ("Ty", &t.y)] {
        write_raw(grid, &out.join(format!("{stem}_{name}.starf32")))?;
        // eps_weight · w lies in (0, 1]
        let png = out.join(format!("{stem}_{name}.png"));
        save_gray(&grid.map(|w| w * params.eps_weight), &png).map_err(|e| classify(&png, e))?;
    }
    let obj = objective(&value, &init, &init, &s, &t, params.alpha, params.beta)
        .map_err(|e| classify(path, e))?;
    Ok(Report {
        stem,
        iterations: 0,
        objective: obj,
    })
}

/// Reads `STAR_THREADS`; `None` means automatic.
fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Input(format!(
                "{THREADS_ENV}={v:?} is not a thread count"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn process(command: &Command, path: &Path) -> Result<Report, CliError> {
    match command {
        Command::Decompose(args) => decompose_one(path, args),
        Command::Enhance { common, gamma_e } => enhance_one(path, common, *gamma_e),
        Command::Correct { common, truth } => correct_one(path, common, *truth),
        Command::Weights(args) => weights_one(path, args),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_batch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_batch(cli: &Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let files = collect_inputs(&common.inputs)?;
    if files.is_empty() {
        return Err(CliError::Input("no input images found".into()));
    }
    common
        .params()
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    if let Command::Enhance { gamma_e, .. } = &cli.command {
        if !(*gamma_e > 0.0 && gamma_e.is_finite()) {
            return Err(CliError::Input(format!(
                "--gamma-e must be positive, got {gamma_e}"
            )));
        }
    }
    fs::create_dir_all(&common.output)
        .map_err(|e| CliError::Input(format!("{}: {e}", common.output.display())))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Compute(e.to_string()))?;
    let failures: Vec<CliError> = pool.install(|| {
        files
            .par_iter()
            .filter_map(|path| {
                println!("processing {}", path.display());
                match process(&cli.command, path) {
                    Ok(report) => {
                        println!("{}", report.result_line());
                        None
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        Some(e)
                    }
                }
            })
            .collect()
    });
    // Worst failure decides the exit code; each was already reported.
    match failures.into_iter().max_by_key(CliError::exit_code) {
        None => Ok(()),
        Some(CliError::Input(_)) => Err(CliError::Input("one or more images failed".into())),
        Some(CliError::Compute(_)) => Err(CliError::Compute("one or more images failed".into())),
    }
}
