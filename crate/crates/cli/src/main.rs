use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use weave_core::kernel::calc::CalcKernel;
use weave_core::kernel::{serve, KernelRegistry, Timeouts};
use weave_core::render::{
    check_file, render_file, Diagnostic, FormatOverride, RenderError, RenderOptions,
};

const KERNEL_ENV_PREFIX: &str = "WEAVE_KERNEL_";

#[derive(Parser)]
#[command(
    name = "weave",
    version,
    about = "Render literate markdown documents to HTML"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a document's code and write its HTML outputs.
    Render {
        input: PathBuf,
        /// Directory for outputs (default: the input's directory).
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Override the outputs named in the header.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Per-chunk execution timeout.
        #[arg(long, value_name = "SECS", default_value_t = 30)]
        timeout_secs: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Parse and validate a document and list its chunks, without running it.
    Check {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a builtin kernel on stdin/stdout.
    #[command(hide = true)]
    Kernel {
        #[command(subcommand)]
        kind: KernelKind,
    },
}

#[derive(Subcommand)]
enum KernelKind {
    Calc {
        /// Language names to announce in the handshake.
        #[arg(long = "lang", default_value = "calc")]
        langs: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Register an external kernel, e.g. `py=python3 kernel.py`.
    #[arg(long = "kernel", value_name = "LANG=COMMAND")]
    kernels: Vec<String>,
    /// Treat unresolved citations and unknown header keys as errors.
    #[arg(long)]
    strict: bool,
    /// Also log informational diagnostics and chunk progress.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    Slides,
    All,
}

impl From<Format> for FormatOverride {
    fn from(f: Format) -> Self {
        match f {
            Format::Html => FormatOverride::Html,
            Format::Slides => FormatOverride::Slides,
            Format::All => FormatOverride::All,
        }
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
}

/// Builtins, then `WEAVE_KERNEL_<LANG>` variables, then `--kernel` flags.
fn registry(flags: &[String]) -> anyhow::Result<KernelRegistry> {
    let mut registry = KernelRegistry::with_builtins();
    let mut from_env: Vec<(String, String)> = std::env::vars()
        .filter_map(|(key, value)| {
            let lang = key.strip_prefix(KERNEL_ENV_PREFIX)?;
            Some((lang.to_ascii_lowercase(), value))
        })
        .collect();
    from_env.sort();
    for (lang, command) in from_env {
        registry
            .register_spec(&format!("{lang}={command}"))
            .map_err(|e| anyhow!("{KERNEL_ENV_PREFIX}{}: {e}", lang.to_ascii_uppercase()))?;
    }
    for flag in flags {
        registry
            .register_spec(flag)
            .map_err(|e| anyhow!("--kernel: {e}"))?;
    }
    Ok(registry)
}

fn report(diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        log::log!(d.level, "{}", d.message);
    }
}

fn fail(err: &RenderError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Render {
            input,
            output_dir,
            format,
            timeout_secs,
            common,
        } => {
            init_logging(common.verbose);
            let registry = match registry(&common.kernels) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return Ok(ExitCode::from(1));
                }
            };
            let opts = RenderOptions {
                output_dir,
                format: format.map(Into::into),
                strict: common.strict,
                timeouts: Timeouts {
                    exec: Duration::from_secs(timeout_secs.max(1)),
                    ..Timeouts::default()
                },
            };
            match render_file(&input, &registry, &opts) {
                Ok(result) => {
                    report(&result.diagnostics);
                    let mut stdout = std::io::stdout().lock();
                    for path in &result.written {
                        writeln!(stdout, "{}", path.display()).context("writing to stdout")?;
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(err) => Ok(fail(&err)),
            }
        }
        Command::Check { input, common } => {
            init_logging(common.verbose);
            let registry = match registry(&common.kernels) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return Ok(ExitCode::from(1));
                }
            };
            let opts = RenderOptions {
                strict: common.strict,
                ..RenderOptions::default()
            };
            match check_file(&input, &registry, &opts) {
                Ok(prepared) => {
                    report(&prepared.diagnostics);
                    print_chunks(&prepared).context("writing to stdout")?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(err) => Ok(fail(&err)),
            }
        }
        Command::Kernel {
            kind: KernelKind::Calc { langs },
        } => {
            let mut kernel = CalcKernel::with_langs(langs);
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            let code = serve(&mut kernel, stdin, stdout).context("kernel I/O")?;
            Ok(ExitCode::from(code.clamp(0, 255) as u8))
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_chunks(prepared: &weave_core::render::Prepared) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<6} {:<16} {:<6} {:<5} {:<7} {:<7} {:<7} {:<5} {:<7} {:<9} {:<10} defer",
        "line",
        "label",
        "lang",
        "echo",
        "include",
        "message",
        "warning",
        "error",
        "results",
        "fig_width",
        "fig_height",
    )?;
    for chunk in &prepared.chunks {
        let o = &chunk.options;
        writeln!(
            out,
            "{:<6} {:<16} {:<6} {:<5} {:<7} {:<7} {:<7} {:<5} {:<7} {:<9} {:<10} {}",
            chunk.line,
            chunk.label(),
            o.lang,
            yes_no(o.echo),
            yes_no(o.include),
            yes_no(o.message),
            yes_no(o.warning),
            yes_no(o.error),
            o.results.name(),
            o.fig_width,
            o.fig_height,
            yes_no(o.defer_output)
        )?;
    }
    writeln!(
        out,
        "{} chunk(s), {} inline expression(s), outputs: {}",
        prepared.chunks.len(),
        prepared.inline.len(),
        prepared
            .outputs
            .iter()
            .map(|o| o.kind.name())
            .collect::<Vec<_>>()
            .join(", ")
    )?;
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with other input problems; clap's
    // default of 2 would read as a failed chunk.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
