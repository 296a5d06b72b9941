use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use extremal_integrals::cli::{analyze, builtin, parse_param, Flags, Format, ProblemFile};
use extremal_integrals::ocp::Backend;

#[derive(Parser)]
#[command(version, about = "Find first integrals of Pontryagin extremals and certify integrability by quadratures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a problem file (or a builtin name with --builtin).
    Analyze {
        /// Path to a problem JSON file.
        file: Option<PathBuf>,
        /// Use a built-in problem instead of a file.
        #[arg(long, conflicts_with = "file")]
        builtin: Option<String>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Print a built-in problem file.
    Builtin { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Closed,
    Implicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

#[derive(clap::Args)]
struct Opts {
    /// Degree of the generator templates.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// Rows of the discovery system (default 3 per ansatz column).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 100)]
    holdout: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Leave explicit time out of the ansatz.
    #[arg(long)]
    no_time: bool,
    /// Also search all polynomial integrals up to this degree.
    #[arg(long)]
    poly_degree: Option<u32>,
    /// Symbols to leave out of the polynomial basis (repeatable).
    #[arg(long)]
    poly_exclude: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Parameter override `name=value` (repeatable).
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Extremals integrated for the drift check (0 skips it).
    #[arg(long, default_value_t = 3)]
    extremals: usize,
    /// Include wall-clock timings (makes the report non-reproducible).
    #[arg(long)]
    timings: bool,
}

impl Opts {
    fn flags(self) -> Flags {
        Flags {
            degree: self.degree,
            samples: self.samples,
            holdout: self.holdout,
            seed: self.seed,
            tol: self.tol,
            include_time: !self.no_time,
            poly_degree: self.poly_degree,
            poly_exclude: self.poly_exclude,
            backend: match self.backend {
                BackendArg::Auto => Backend::Auto,
                BackendArg::Closed => Backend::Closed,
                BackendArg::Implicit => Backend::Implicit,
            },
            format: match self.format {
                FormatArg::Json => Format::Json,
                FormatArg::Text => Format::Text,
            },
            params: self.params,
            extremals: self.extremals,
            timings: self.timings,
            ..Flags::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Builtin { name } => builtin(&name).map(|f| {
            println!("{}", f.to_json());
            0
        }),
        Command::Analyze { file, builtin: name, opts } => {
            let flags = opts.flags();
            let problem = match (file, name) {
                (Some(path), _) => ProblemFile::load(&path),
                (None, Some(name)) => builtin(&name),
                (None, None) => {
                    eprintln!("error: give a problem file or --builtin <name>");
                    return ExitCode::from(1);
                }
            };
            problem.and_then(|p| analyze(&p, &flags)).map(|a| {
                println!("{}", a.report().render(flags.format));
                a.exit_code()
            })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
