//! `m1` — command-line front end tying the assembler, emulator, kernel
//! generators, and timing models into reproducible batch runs.
//!
//! Exit codes: 0 success, 2 syntax error in an input file, 3 DMA hazard,
//! 4 address/context fault, 5 missing input, 1 any other failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use m1_core::asm::{assemble, disassemble};
use m1_core::emu::{self, DmaConfig, EmuError};
use m1_core::kernels::{
    golden_matmul, golden_vector_add, golden_vector_scale, run_kernel, KernelInputs, KernelSpec,
    KernelValues,
};
use m1_core::machine::MachineState;
use m1_core::memimage::{apply_image, format_image, image_of_memory, parse_image};
use m1_core::perf::{build_report, BenchResults, PerfError, ReportMode};

const EXIT_SYNTAX: u8 = 2;
const EXIT_HAZARD: u8 = 3;
const EXIT_FAULT: u8 = 4;
const EXIT_MISSING: u8 = 5;

#[derive(Parser)]
#[command(
    name = "m1",
    version,
    about = "MorphoSys M1 toolchain: TinyRISC assembler, cycle-counting emulator, \
             transformation kernels, and cycle-comparison reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a TinyRISC source file and report its instruction count
    Assemble {
        /// Source file (.m1asm)
        src: PathBuf,
        /// Write the canonical form of the program here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a program back in canonical form
    Disasm {
        /// Source file (.m1asm)
        src: PathBuf,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a program on the emulator and dump final main memory
    Run {
        /// Program file (.m1asm)
        program: PathBuf,
        /// Initial main-memory image ("ADDR: WORD" hex lines)
        #[arg(long)]
        image: Option<PathBuf>,
        /// Emit a JSON-lines execution trace on stderr
        #[arg(long)]
        trace: bool,
        /// Write the final memory dump here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate and run one kernel configuration on sample data
    Kernel {
        /// Which algorithm to run
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Problem size: vector length (8 or 64) or matrix dimension (4 or 8)
        #[arg(long)]
        n: u32,
        /// Scaling constant (scale kernels only)
        #[arg(long, default_value_t = 5)]
        constant: i16,
        /// Emit a JSON-lines execution trace on stderr
        #[arg(long)]
        trace: bool,
    },
    /// Run all six kernel configurations and persist their cycle counts
    Bench {
        /// Results file consumed by `report --mode recomputed`
        #[arg(long, default_value = "bench_results.json")]
        out: PathBuf,
    },
    /// Emit the cycle-comparison table
    Report {
        /// Reproduce published cycle counts, or substitute measured ones
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Bench results file (recomputed mode)
        #[arg(long, default_value = "bench_results.json")]
        bench: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Translate,
    Scale,
    Matmul,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Recomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Failure::new(1, message)
    }
}

fn emu_failure(err: EmuError) -> Failure {
    let code = match err {
        EmuError::DmaHazard { .. } => EXIT_HAZARD,
        EmuError::AddressFault { .. } | EmuError::ContextFault { .. } => EXIT_FAULT,
        EmuError::UnsupportedContext { .. } | EmuError::BadOperand { .. } => 1,
    };
    Failure::new(code, err.to_string())
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_MISSING, format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content)
        .map_err(|e| Failure::general(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_output(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn dma_config() -> Result<DmaConfig, Failure> {
    DmaConfig::from_env().map_err(Failure::general)
}

fn load_program(path: &Path) -> Result<m1_core::asm::TrProgram, Failure> {
    let text = read_input(path)?;
    assemble(&text).map_err(|e| Failure::new(EXIT_SYNTAX, e.to_string()))
}

fn cmd_assemble(src: &Path, out: Option<&PathBuf>) -> Result<(), Failure> {
    let program = load_program(src)?;
    if let Some(path) = out {
        write_output(path, &disassemble(&program))?;
    }
    println!("{} instructions", program.len());
    Ok(())
}

fn cmd_disasm(src: &Path, out: Option<&PathBuf>) -> Result<(), Failure> {
    let program = load_program(src)?;
    emit(out, &disassemble(&program))
}

fn cmd_run(
    program: &Path,
    image: Option<&PathBuf>,
    trace: bool,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let program = load_program(program)?;
    let mut state = MachineState::default();
    if let Some(path) = image {
        let text = read_input(path)?;
        let entries = parse_image(&text).map_err(|e| Failure::new(EXIT_SYNTAX, e.to_string()))?;
        apply_image(&mut state.mem, &entries);
    }
    let (final_state, exec_trace) =
        emu::run(&program, state, dma_config()?).map_err(emu_failure)?;
    if trace {
        eprint!("{}", exec_trace.to_json_lines());
    }
    println!("cycles: {}", final_state.tinyrisc.cycle_counter);
    let dump = format_image(&image_of_memory(&final_state.mem));
    emit(out, &dump)
}

fn sample_vector(n: u32, offset: i16) -> Vec<i16> {
    (0..n).map(|i| i as i16 + offset).collect()
}

fn sample_matrix_a(n: u32) -> Vec<Vec<i16>> {
    (0..n)
        .map(|i| (0..n).map(|k| ((i + k) % 7) as i16 - 3).collect())
        .collect()
}

fn sample_matrix_b(n: u32) -> Vec<Vec<i16>> {
    (0..n)
        .map(|k| (0..n).map(|j| ((3 * j + k) % 11) as i16 - 5).collect())
        .collect()
}

fn kernel_config(kind: KindArg, n: u32, constant: i16) -> (KernelSpec, KernelInputs) {
    match kind {
        KindArg::Translate => (
            KernelSpec::translate(n),
            KernelInputs::Translate {
                u: sample_vector(n, 0),
                v: sample_vector(n, 100),
            },
        ),
        KindArg::Scale => (
            KernelSpec::scale(n, constant),
            KernelInputs::Scale {
                u: sample_vector(n, 0),
            },
        ),
        KindArg::Matmul => (
            KernelSpec::matmul(n),
            KernelInputs::MatMul {
                a: sample_matrix_a(n),
                b: sample_matrix_b(n),
            },
        ),
    }
}

fn golden_values(spec: &KernelSpec, inputs: &KernelInputs) -> KernelValues {
    match inputs {
        KernelInputs::Translate { u, v } => KernelValues::Vector(golden_vector_add(u, v).wrapped),
        KernelInputs::Scale { u } => {
            KernelValues::Vector(golden_vector_scale(spec.constant, u).wrapped)
        }
        KernelInputs::MatMul { a, b } => KernelValues::Matrix(golden_matmul(a, b).wrapped),
    }
}

fn kernel_failure(err: m1_core::kernels::KernelError) -> Failure {
    match err {
        m1_core::kernels::KernelError::Emulation(e) => emu_failure(e),
        other => Failure::general(other.to_string()),
    }
}

fn cmd_kernel(kind: KindArg, n: u32, constant: i16, trace: bool) -> Result<(), Failure> {
    let dma = dma_config()?;
    let (spec, inputs) = kernel_config(kind, n, constant);
    if trace {
        // Re-generate to obtain the trace alongside the packaged run.
        let generated =
            m1_core::kernels::generate_program(&spec, &inputs, dma).map_err(kernel_failure)?;
        let mut state = MachineState::default();
        apply_image(&mut state.mem, &generated.image);
        let (_, exec_trace) = emu::run(&generated.program, state, dma).map_err(emu_failure)?;
        eprint!("{}", exec_trace.to_json_lines());
    }
    let run = run_kernel(&spec, &inputs, dma).map_err(kernel_failure)?;
    println!("kernel {} n={}", spec.kind.name(), spec.n);
    println!("cycles: {}", run.cycle_count);
    println!("breakdown:");
    println!("{}", run.breakdown);
    if run.values == golden_values(&spec, &inputs) {
        println!("results match the golden model");
        Ok(())
    } else {
        Err(Failure::general(
            "emulated results diverge from the golden model",
        ))
    }
}

fn bench_configs() -> [(&'static str, KernelSpec, KernelInputs); 6] {
    let (t64, t64i) = kernel_config(KindArg::Translate, 64, 5);
    let (t8, t8i) = kernel_config(KindArg::Translate, 8, 5);
    let (s64, s64i) = kernel_config(KindArg::Scale, 64, 5);
    let (s8, s8i) = kernel_config(KindArg::Scale, 8, 5);
    let (m8, m8i) = kernel_config(KindArg::Matmul, 8, 5);
    let (m4, m4i) = kernel_config(KindArg::Matmul, 4, 5);
    [
        ("translate_64", t64, t64i),
        ("translate_8", t8, t8i),
        ("scale_64", s64, s64i),
        ("scale_8", s8, s8i),
        ("matmul_8", m8, m8i),
        ("matmul_4", m4, m4i),
    ]
}

fn cmd_bench(out: &Path) -> Result<(), Failure> {
    let dma = dma_config()?;
    let mut results = BenchResults::default();
    for (key, spec, inputs) in bench_configs() {
        let run = run_kernel(&spec, &inputs, dma).map_err(kernel_failure)?;
        if run.values != golden_values(&spec, &inputs) {
            return Err(Failure::general(format!(
                "{key}: emulated results diverge from the golden model"
            )));
        }
        println!("{key}: {} cycles", run.cycle_count);
        results.set(key, run.cycle_count);
    }
    let mut text = serde_json::to_string_pretty(&results)
        .map_err(|e| Failure::general(format!("cannot serialize results: {e}")))?;
    text.push('\n');
    write_output(out, &text)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_report(
    mode: ModeArg,
    format: FormatArg,
    bench_path: &Path,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let (mode, bench) = match mode {
        ModeArg::Paper => (ReportMode::PaperPublished, None),
        ModeArg::Recomputed => {
            let text = read_input(bench_path)?;
            let bench: BenchResults = serde_json::from_str(&text).map_err(|e| {
                Failure::new(
                    EXIT_SYNTAX,
                    format!("malformed bench results {}: {e}", bench_path.display()),
                )
            })?;
            (ReportMode::Recomputed, Some(bench))
        }
    };
    let report = build_report(mode, bench.as_ref()).map_err(|e| match e {
        PerfError::MissingInput(_) => Failure::new(EXIT_MISSING, e.to_string()),
        other => Failure::general(other.to_string()),
    })?;
    let rendered = match format {
        FormatArg::Csv => report.to_csv(),
        FormatArg::Md => report.to_markdown(),
        FormatArg::Json => report.to_json(),
    };
    emit(out, &rendered)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Assemble { src, out } => cmd_assemble(&src, out.as_ref()),
        Command::Disasm { src, out } => cmd_disasm(&src, out.as_ref()),
        Command::Run {
            program,
            image,
            trace,
            out,
        } => cmd_run(&program, image.as_ref(), trace, out.as_ref()),
        Command::Kernel {
            kind,
            n,
            constant,
            trace,
        } => cmd_kernel(kind, n, constant, trace),
        Command::Bench { out } => cmd_bench(&out),
        Command::Report {
            mode,
            format,
            bench,
            out,
        } => cmd_report(mode, format, &bench, out.as_ref()),
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes early (`m1 report | head`)
    // instead of panicking on the failed stdout write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
