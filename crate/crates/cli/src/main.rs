use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use shic_core::codec::tree::{subdivide_encode_with, TreeConfig, TreeMode};
use shic_core::codec::{decode, CodecId};
use shic_core::error::Error as CoreError;
use shic_core::eval::{disk_experiment, encode_for_ratio_with, rd_sweep_with, scaling_study, DiskConfig, ScaleMethod};
use shic_core::homdiff::{inpaint_hom, SolverConfig};
use shic_core::image::DiskShape;
use shic_core::mask::make_regular_mask;
use shic_core::metrics::mse;
use shic_core::pgm::{read_pgm, write_pgm};
use shic_core::shepard::aniso::inpaint_aniso;
use shic_core::shepard::iso::{compute_sigma, inpaint_iso};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Shepard inpainting image codecs.
///
/// Exit status: 0 success, 1 usage error, 2 data error, 3 infeasible target.
#[derive(Debug, Parser)]
#[command(name = "shic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a PGM image into a .shic file
    Encode(EncodeArgs),
    /// Decompress a .shic file into a PGM image
    Decode(DecodeArgs),
    /// Reconstruct an image from a regular grid of its own pixels
    Inpaint(InpaintArgs),
    /// Rate-distortion sweep over target ratios, written as CSV
    Rd(RdArgs),
    /// Isotropic, anisotropic and diffusion reconstruction of a synthetic disk
    DiskBench(DiskArgs),
    /// Runtime and operation counts over successive 2x downsamplings
    ScaleBench(ScaleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Codec {
    Rjip,
    RjipA,
    TreeIso,
    TreeAniso,
}

impl From<Codec> for CodecId {
    fn from(c: Codec) -> Self {
        match c {
            Codec::Rjip => CodecId::Rjip,
            Codec::RjipA => CodecId::RjipA,
            Codec::TreeIso => CodecId::TreeIso,
            Codec::TreeAniso => CodecId::TreeAniso,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Iso,
    Aniso,
    Hom,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Input PGM image (required)
    #[arg(short, long)]
    input: PathBuf,
    /// Output .shic file (required)
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Codec::Rjip)]
    codec: Codec,
    /// Target compression ratio; exactly one of --ratio and --split-error is required
    #[arg(long, conflicts_with = "split_error", required_unless_present = "split_error")]
    ratio: Option<f64>,
    /// Leaf split error for the tree codecs, instead of a target ratio
    #[arg(long)]
    split_error: Option<f64>,
    /// Seed for the tonal optimisation order
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimisation rounds per tree refinement step
    #[arg(long, default_value_t = TreeConfig::default().iter_max)]
    tree_rounds: usize,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Input .shic file (required)
    #[arg(short, long)]
    input: PathBuf,
    /// Output PGM image (required)
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct InpaintArgs {
    /// Input PGM image (required)
    #[arg(short, long)]
    input: PathBuf,
    /// Output PGM image (required)
    #[arg(short, long)]
    output: PathBuf,
    /// Grid spacing of the mask
    #[arg(long, default_value_t = 3)]
    mask_grid: usize,
    #[arg(long, value_enum, default_value_t = Mode::Iso)]
    mode: Mode,
    /// Contrast parameter of the anisotropic kernels
    #[arg(long, default_value_t = 8.0)]
    lambda: f64,
}

#[derive(Debug, Args)]
struct RdArgs {
    /// Input PGM image (required)
    #[arg(short, long)]
    input: PathBuf,
    /// CSV output; standard output when absent
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Codec::Rjip)]
    codec: Codec,
    /// Ascending target ratios
    #[arg(long, value_delimiter = ',', default_value = "20,40,80,160")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimisation rounds per tree refinement step
    #[arg(long, default_value_t = TreeConfig::default().iter_max)]
    tree_rounds: usize,
    /// Write 0 in the timing columns so the CSV is reproducible; off by default
    #[arg(long, default_value_t = false)]
    no_timings: bool,
}

#[derive(Debug, Args)]
struct DiskArgs {
    /// Image side length
    #[arg(long, default_value_t = DiskConfig::default().disk.size)]
    size: usize,
    #[arg(long, default_value_t = DiskConfig::default().disk.radius)]
    radius: f64,
    /// Grid spacing of the mask
    #[arg(long, default_value_t = DiskConfig::default().grid)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Input PGM image at the largest scale (required)
    #[arg(short, long)]
    input: PathBuf,
    /// CSV output; standard output when absent
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Number of scales including the input
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write 0 in the seconds column so the CSV is reproducible; off by default
    #[arg(long, default_value_t = false)]
    no_timings: bool,
}

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidParameter(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn encode(args: EncodeArgs) -> Result<u8> {
    let image = read_pgm(&args.input)?;
    let codec = CodecId::from(args.codec);
    let tree = TreeConfig {
        iter_max: args.tree_rounds,
        seed: args.seed,
        ..TreeConfig::default()
    };
    let (encoded, feasible) = match (args.ratio, args.split_error) {
        (Some(ratio), _) => encode_for_ratio_with(&image, codec, ratio, args.seed, &tree)?,
        (None, Some(threshold)) => {
            let mode = match codec {
                CodecId::TreeIso => TreeMode::Isotropic,
                CodecId::TreeAniso => TreeMode::Anisotropic,
                _ => {
                    return Err(UsageError(format!("--split-error needs a tree codec, not {codec}")).into());
                }
            };
            (subdivide_encode_with(&image, threshold, mode, &tree)?.encoded, true)
        }
        (None, None) => unreachable!("clap requires one of --ratio and --split-error"),
    };
    fs::write(&args.output, &encoded.bytes).with_context(|| format!("cannot write {}", args.output.display()))?;
    println!(
        "codec {codec} bytes {} ratio {:.4} mse {:.4}",
        encoded.bytes.len(),
        encoded.ratio(),
        encoded.mse
    );
    if !feasible {
        eprintln!(
            "shic: target ratio {} not reached (achieved {:.2}); file written anyway",
            args.ratio.unwrap_or_default(),
            encoded.ratio()
        );
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn decode_file(args: DecodeArgs) -> Result<u8> {
    let bytes = fs::read(&args.input).with_context(|| format!("cannot read {}", args.input.display()))?;
    let image = decode(&bytes)?;
    write_pgm(&args.output, &image)?;
    Ok(0)
}

fn inpaint(args: InpaintArgs) -> Result<u8> {
    let image = read_pgm(&args.input)?;
    let (w, h) = (image.width(), image.height());
    let mask = make_regular_mask(w, h, args.mask_grid)?;
    let values = mask.sample(&image)?;
    let sigma = compute_sigma(mask.len(), w, h)?;
    let out = match args.mode {
        Mode::Iso => inpaint_iso(&mask, &values, sigma)?,
        Mode::Aniso => inpaint_aniso(&mask, &values, &vec![sigma; mask.len()], args.lambda)?,
        Mode::Hom => inpaint_hom(&mask, &values, &SolverConfig::default())?,
    };
    write_pgm(&args.output, &out)?;
    println!("points {} mse {:.4}", mask.len(), mse(&image, &out.rounded())?);
    Ok(0)
}

fn rd(args: RdArgs) -> Result<u8> {
    let image = read_pgm(&args.input)?;
    let tree = TreeConfig {
        iter_max: args.tree_rounds,
        ..TreeConfig::default()
    };
    let points = rd_sweep_with(&image, args.codec.into(), &args.ratios, args.seed, &tree)?;
    shic_core::eval::write_rd_csv(output_writer(args.output.as_deref())?, &points, !args.no_timings)?;
    for p in points.iter().filter(|p| !p.feasible) {
        eprintln!(
            "shic: target {} infeasible (achieved {:.2})",
            p.target_ratio, p.achieved_ratio
        );
    }
    Ok(0)
}

fn disk_bench(args: DiskArgs) -> Result<u8> {
    let defaults = DiskConfig::default();
    let mut config = DiskConfig {
        disk: DiskShape {
            size: args.size,
            radius: args.radius,
            ..defaults.disk
        },
        grid: args.grid,
        ..defaults
    };
    config.aniso.seed = args.seed;
    println!("{}", disk_experiment(&config)?);
    Ok(0)
}

fn scale_bench(args: ScaleArgs) -> Result<u8> {
    let image = read_pgm(&args.input)?;
    let study = scaling_study(&image, args.levels, args.seed)?;
    study.write_csv(output_writer(args.output.as_deref())?, !args.no_timings)?;
    for m in ScaleMethod::ALL {
        eprintln!(
            "{:<7} op slope {:.3} time slope {:.3}",
            m.name(),
            study.op_slope(m),
            study.time_slope(m)
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode_file(a),
        Command::Inpaint(a) => inpaint(a),
        Command::Rd(a) => rd(a),
        Command::DiskBench(a) => disk_bench(a),
        Command::ScaleBench(a) => scale_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("shic: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
