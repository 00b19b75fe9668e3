//! Command-line front end: ingest a definition file or gallery name,
//! run the full check pipeline, and emit a text or JSON report.
//!
//! Exit codes: 0 metrizable at constant flag curvature, 1 not
//! metrizable, 2 out of scope or inconclusive, 3 input or validation
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use sprayck::checks::{analyze, SampleSpec, DEFAULT_COUNT, DEFAULT_SEED};
use sprayck::dsl::{parse_definition_file, Definition};
use sprayck::finsler::{reconstruct_finsler, GeodesicSpray};
use sprayck::gallery::{get_example, list_examples};
use sprayck::geom::{ExpressionSpray, Spray};
use sprayck::report::{build_report, exit_code, render_text};

#[derive(Parser)]
#[command(
    name = "sprayck",
    version,
    about = "Decides whether a spray is metrizable by a Finsler function of \
             constant flag curvature, and reconstructs the energy when it is"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a definition file or a built-in example.
    Run(Box<RunArgs>),
    /// List the built-in examples.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a spray or Finsler definition file.
    #[arg(long, value_name = "PATH", required_unless_present = "gallery", conflicts_with = "gallery")]
    input: Option<PathBuf>,

    /// Name of a built-in example (see `sprayck list`).
    #[arg(long, value_name = "NAME")]
    gallery: Option<String>,

    /// Parameter for a parametric example, as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// How to interpret the definition.
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,

    /// Number of sample points.
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    points: usize,

    /// Seed of the deterministic sampler.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Residual tolerance for every pass/fail decision.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Sampling intervals lo:hi, either one for every coordinate or a
    /// comma-separated list with one entry per coordinate.
    #[arg(long = "box", value_name = "LO:HI[,LO:HI...]")]
    box_spec: Option<String>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    report: Format,

    /// Include the per-point residual table in the report.
    #[arg(long)]
    per_point: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Auto,
    Spray,
    Finsler,
}

impl Mode {
    fn key(self) -> &'static str {
        match self {
            Mode::Auto => "auto",
            Mode::Spray => "spray",
            Mode::Finsler => "finsler",
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            print_catalog();
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(*args) {
            Ok(code) => ExitCode::from(code),
            Err(err) => {
                eprintln!("error: {err:#}");
                ExitCode::from(3)
            }
        },
    }
}

fn print_catalog() {
    for name in list_examples() {
        let hint = match name {
            "deformed_half_plane" => " (param: lambda, default 2)",
            "shen_randers_11_2" => " (params: a1 a2, default 0.1 0)",
            _ => "",
        };
        let entry = get_example(name, &[]).expect("catalog entries instantiate");
        println!("{name:<22} {:<8}{hint}", entry.kind());
        println!("    {}", entry.provenance);
    }
}

fn run(args: RunArgs) -> anyhow::Result<u8> {
    if args.points == 0 {
        bail!("--points must be at least 1");
    }
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }

    let (definition, margin, name) = if let Some(gallery_name) = &args.gallery {
        let params = parse_params(&args.params)?;
        let entry = get_example(gallery_name, &params)?;
        (entry.definition, entry.margin, entry.name)
    } else {
        let path = args.input.as_ref().expect("clap requires input or gallery");
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let definition = parse_definition_file(&text)?;
        let name = definition.name().to_string();
        (definition, sprayck::checks::DEFAULT_MARGIN, name)
    };

    match (args.mode, &definition) {
        (Mode::Spray, Definition::Finsler(_)) => {
            bail!("`{name}` is a Finsler definition, but --mode spray was requested")
        }
        (Mode::Finsler, Definition::Spray(_)) => {
            bail!("`{name}` is a spray definition, but --mode finsler was requested")
        }
        _ => {}
    }

    let (spray, kind): (Box<dyn Spray>, &str) = match &definition {
        Definition::Spray(s) => (Box::new(ExpressionSpray::new(s.clone())), "spray"),
        Definition::Finsler(f) => (Box::new(GeodesicSpray::new(f.clone())), "finsler"),
    };

    let dim = definition.dim();
    let spec = SampleSpec {
        count: args.points,
        intervals: parse_box(args.box_spec.as_deref(), dim)?,
        seed: args.seed,
        margin,
    };

    let (points, verdict) = analyze(spray.as_ref(), &spec, args.tol)?;
    let reconstruction = if verdict.kappa.is_some() {
        Some(reconstruct_finsler(spray.as_ref(), &points)?)
    } else {
        None
    };

    let report = build_report(
        &name,
        kind,
        args.mode.key(),
        &spec,
        args.tol,
        &verdict,
        reconstruction.as_ref(),
        args.per_point,
    );
    match args.report {
        Format::Text => print!("{}", render_text(&report)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(exit_code(verdict.status) as u8)
}

fn parse_params(raw: &[String]) -> anyhow::Result<Vec<(String, f64)>> {
    raw.iter()
        .map(|item| {
            let (key, value) = item
                .split_once('=')
                .with_context(|| format!("--param `{item}` is not of the form key=value"))?;
            let value: f64 = value
                .parse()
                .with_context(|| format!("--param `{item}` has a non-numeric value"))?;
            Ok((key.to_string(), value))
        })
        .collect()
}

fn parse_box(spec: Option<&str>, dim: usize) -> anyhow::Result<Vec<(f64, f64)>> {
    let Some(spec) = spec else {
        return Ok(SampleSpec::default_for(dim).intervals);
    };
    let parse_interval = |part: &str| -> anyhow::Result<(f64, f64)> {
        let (lo, hi) = part
            .split_once(':')
            .with_context(|| format!("--box entry `{part}` is not of the form lo:hi"))?;
        let lo: f64 = lo.trim().parse().with_context(|| format!("bad bound in `{part}`"))?;
        let hi: f64 = hi.trim().parse().with_context(|| format!("bad bound in `{part}`"))?;
        Ok((lo, hi))
    };
    let entries: Vec<(f64, f64)> = spec
        .split(',')
        .map(parse_interval)
        .collect::<anyhow::Result<_>>()?;
    match entries.len() {
        1 => Ok(vec![entries[0]; 2 * dim]),
        len if len == 2 * dim => Ok(entries),
        len => bail!("--box needs 1 or {} intervals, got {len}", 2 * dim),
    }
}
