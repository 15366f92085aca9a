use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use packconv_cli::bench::{self, BenchConfig, BenchLevel, KernelFill, LayerShape};
use packconv_cli::throughput::{self, Format};
use packconv_cli::verify::{self, Level, VerifyConfig};
use packconv_cli::{conv, to_json, CliError, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "packconv",
    version,
    about = "Quantized convolution on a wide integer multiplier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct Multiplier {
    /// Width of the first multiplier port.
    #[arg(long)]
    bit_a: u32,
    /// Width of the second multiplier port.
    #[arg(long)]
    bit_b: u32,
}

#[derive(clap::Args, Clone, Copy)]
struct Quant {
    /// Input bitwidth.
    #[arg(long)]
    p: u32,
    /// Kernel bitwidth.
    #[arg(long)]
    q: u32,
    #[arg(long)]
    signed_f: bool,
    #[arg(long)]
    signed_g: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Best packing for every (p, q) on one multiplier.
    Throughput {
        #[command(flatten)]
        mul: Multiplier,
        #[arg(long, default_value_t = 8)]
        pmax: u32,
        #[arg(long, default_value_t = 8)]
        qmax: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Check the packed kernels against the naive oracle on seeded inputs.
    Verify {
        #[command(flatten)]
        mul: Multiplier,
        #[command(flatten)]
        quant: Quant,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Level::Extended)]
        level: Level,
    },
    /// Count and time packed against naive convolution.
    Bench {
        #[command(flatten)]
        mul: Multiplier,
        #[command(flatten)]
        quant: Quant,
        #[arg(long, value_enum, default_value_t = BenchLevel::OneD)]
        level: BenchLevel,
        /// Input length for the 1-D level.
        #[arg(long, default_value_t = 3000)]
        size: usize,
        #[arg(long, default_value_t = LayerShape::default().ci)]
        ci: usize,
        #[arg(long, default_value_t = LayerShape::default().co)]
        co: usize,
        #[arg(long, default_value_t = LayerShape::default().hi)]
        hi: usize,
        #[arg(long, default_value_t = LayerShape::default().wi)]
        wi: usize,
        #[arg(long, default_value_t = LayerShape::default().k)]
        k: usize,
        #[arg(long, value_enum, default_value_t = KernelFill::Random)]
        kernel: KernelFill,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convolve two tensor files.
    Conv {
        #[command(flatten)]
        mul: Multiplier,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Runs a command, returning its stdout and exit code.
fn dispatch(command: Command) -> Result<(String, u8), CliError> {
    match command {
        Command::Throughput {
            mul,
            pmax,
            qmax,
            format,
        } => Ok((
            throughput::run(mul.bit_a, mul.bit_b, pmax, qmax, format)?,
            EXIT_OK,
        )),
        Command::Verify {
            mul,
            quant,
            trials,
            seed,
            level,
        } => {
            let report = verify::run(VerifyConfig {
                level,
                p: quant.p,
                q: quant.q,
                bit_a: mul.bit_a,
                bit_b: mul.bit_b,
                signed_f: quant.signed_f,
                signed_g: quant.signed_g,
                trials,
                seed,
            })?;
            let code = if report.failures == 0 {
                EXIT_OK
            } else {
                EXIT_FAILURE
            };
            Ok((to_json(&report), code))
        }
        Command::Bench {
            mul,
            quant,
            level,
            size,
            ci,
            co,
            hi,
            wi,
            k,
            kernel,
            seed,
        } => {
            let report = bench::run(BenchConfig {
                level,
                p: quant.p,
                q: quant.q,
                bit_a: mul.bit_a,
                bit_b: mul.bit_b,
                signed_f: quant.signed_f,
                signed_g: quant.signed_g,
                seed,
                size,
                shape: LayerShape { ci, co, hi, wi, k },
                kernel,
            })?;
            Ok((to_json(&report), EXIT_OK))
        }
        Command::Conv {
            mul,
            input,
            kernel,
            output,
        } => {
            let y = conv::run(&input, &kernel, &output, mul.bit_a, mul.bit_b)?;
            Ok((
                format!("wrote {} {:?}\n", output.display(), y.shape),
                EXIT_OK,
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(out.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(EXIT_FAILURE);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
