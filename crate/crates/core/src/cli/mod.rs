//! `ternlut` command-line front end.
//!
//! Every command is a pure function of its flags and input files; randomness only enters
//! through `rand --seed`. Exit codes: 0 success, 2 validation error, 3 infeasible schedule,
//! 4 `gemm --check` mismatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::archsim::{
    dse, simulate_model, Catalog, DseGrid, ExecMode, HardwareConfig, Scalarization, SimError, SimReport, Stage,
    TileSchedule, REFERENCE_POINT,
};
use crate::costmodel::{census_prediction, encoding_csv, encoding_sweep, sweep_chunk_size, GemmShape, Method};
use crate::lutkernel::{
    decode_tensor, encode_tensor, mpgemm_bitserial, mpgemm_ternary, naive_gemm, ActivationMatrix, GemmResult, Tensor,
    TensorDtype, TENSOR_MAGIC,
};
use crate::matrix::Matrix;
use crate::pathgen::{
    decode_path, encode_path, generate_path, path_hash, path_to_json, verify_path, BuildPath, ChunkConfig, LutMode,
    PathError,
};
use crate::weightcodec::{
    decode_packed, decompose_bitplanes, decompose_sign_split, encode_packed, pack_ternary, unpack_ternary, CodecError,
    TernaryMatrix,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SCHEDULE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Schedule(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => EXIT_VALIDATION,
            CliError::Schedule(_) => EXIT_SCHEDULE,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }
}

impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::Schedule { .. } => CliError::Schedule(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InfeasibleSchedule { .. } => CliError::Schedule(e.to_string()),
            SimError::Path(p) => p.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Path(p) => p.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<crate::lutkernel::KernelError> for CliError {
    fn from(e: crate::lutkernel::KernelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<crate::costmodel::CostError> for CliError {
    fn from(e: crate::costmodel::CostError) -> Self {
        CliError::Validation(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "ternlut", version, about = "LUT-based low-bit GEMM toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Ternary,
    Binary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExecArg {
    Ternary,
    Bitserial,
}

impl ExecArg {
    fn mode(self) -> ExecMode {
        match self {
            ExecArg::Ternary => ExecMode::Ternary,
            ExecArg::Bitserial => ExecMode::BitSerial { planes: 2 },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StageArg {
    Prefill,
    Decode,
}

impl StageArg {
    fn stage(self) -> Stage {
        match self {
            StageArg::Prefill => Stage::Prefill,
            StageArg::Decode => Stage::Decode,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Dist {
    /// Uniform over {-1, 0, 1}.
    Ternary,
    /// Uniform over the signed range of `--bits`.
    Signed,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a LUT build path and write it as a PLTP file plus a JSON dump.
    Genpath {
        #[arg(long, value_enum, default_value = "ternary")]
        mode: ModeArg,
        #[arg(long, short = 'c', default_value_t = 5)]
        c: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// JSON dump location; defaults to the output path with a .json extension.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a random integer matrix as a PLTT tensor.
    Rand {
        #[arg(long, value_enum, default_value = "ternary")]
        dist: Dist,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 8)]
        bits: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Pack a ternary PLTT weight tensor against a ternary build path into a PLTW file.
    Pack {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Run the LUT GEMM on packed weights and PLTT activations.
    Gemm {
        /// PLTW packed ternary weights, or a PLTT integer tensor in bit-serial mode.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        acts: PathBuf,
        /// Ternary build path the weights were packed with.
        #[arg(long)]
        path: PathBuf,
        #[arg(long, value_enum, default_value = "ternary")]
        mode: ExecArg,
        /// Plane count for integer weights in bit-serial mode.
        #[arg(long, default_value_t = 2)]
        weight_bits: usize,
        #[arg(long, default_value_t = 8)]
        act_bits: u32,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Census JSON location; defaults to the output path with a .census.json suffix.
        #[arg(long)]
        census: Option<PathBuf>,
        /// Compare against the naive GEMM and exit 4 on any difference.
        #[arg(long)]
        check: bool,
    },
    /// Simulate one model stage on the accelerator.
    Sim {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, default_value = "b1.58-3B")]
        model: String,
        #[arg(long, value_enum, default_value = "prefill")]
        stage: StageArg,
        #[arg(long, value_enum, default_value = "ternary")]
        mode: ExecArg,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep tile sizes and loop orders over the prefill kernels of every catalogued model.
    Dse {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ternary")]
        mode: ExecArg,
        #[arg(long, value_enum, default_value = "prefill")]
        stage: StageArg,
        /// Restrict to one model; all catalogued models by default.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        latency_weight: f64,
        #[arg(long, default_value_t = 0.5)]
        energy_weight: f64,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Closed-form addition counts over a range of chunk sizes.
    Cost {
        #[arg(long, default_value_t = 1080)]
        m: u64,
        #[arg(long, default_value_t = 3200)]
        k: u64,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long, default_value_t = 2)]
        c_min: u32,
        #[arg(long, default_value_t = 8)]
        c_max: u32,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Bits-per-weight table over the same range.
        #[arg(long)]
        encoding_out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
/// Normal output goes to `out`, errors to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write(path, text.as_bytes())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<HardwareConfig> {
    match path {
        Some(p) => Ok(HardwareConfig::from_json(&read_text(p)?)?),
        None => Ok(HardwareConfig::default()),
    }
}

fn o(out: &mut dyn Write, line: std::fmt::Arguments) {
    let _ = out.write_fmt(line);
    let _ = out.write_all(b"\n");
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Genpath {
            mode,
            c,
            depth,
            out: dest,
            json,
        } => {
            let mode = match mode {
                ModeArg::Ternary => LutMode::Ternary,
                ModeArg::Binary => LutMode::Binary,
            };
            let path = generate_path(&ChunkConfig::new(mode, c, depth)?)?;
            let report = verify_path(&path);
            if !report.passed {
                return Err(CliError::Validation(format!("generated path failed verification: {:?}", report.violation)));
            }
            write(&dest, &encode_path(&path))?;
            write_json(&json.unwrap_or_else(|| dest.with_extension("json")), &path_to_json(&path))?;
            o(out, format_args!("steps: {}", path.steps.len()));
            match path.min_raw_distance() {
                Some(d) => o(out, format_args!("min RAW distance: {d}")),
                None => o(out, format_args!("min RAW distance: none (no step reads a written entry)")),
            }
            o(out, format_args!("path hash: {:016x}", path_hash(&path)));
            Ok(())
        }
        Command::Rand {
            dist,
            rows,
            cols,
            bits,
            seed,
            out: dest,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (dtype, data) = match dist {
                Dist::Ternary => (TensorDtype::I8, Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1..=1))),
                Dist::Signed => {
                    if !(1..=16).contains(&bits) {
                        return Err(CliError::Validation(format!("--bits must be in 1..=16, got {bits}")));
                    }
                    let lo = -(1i32 << (bits - 1));
                    let hi = (1i32 << (bits - 1)) - 1;
                    let dtype = if bits <= 8 { TensorDtype::I8 } else { TensorDtype::I16 };
                    (dtype, Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..=hi)))
                }
            };
            write(&dest, &encode_tensor(&Tensor { dtype, data })?)?;
            o(out, format_args!("wrote {rows}x{cols} tensor (seed {seed})"));
            Ok(())
        }
        Command::Pack {
            weights,
            path,
            out: dest,
        } => {
            let path = decode_path(&read(&path)?)?;
            let t = decode_tensor(&read(&weights)?)?;
            if t.data.rows() == 0 || t.data.cols() == 0 {
                return Err(CliError::Validation("weight matrix is empty".into()));
            }
            let w = TernaryMatrix::new(narrow_i8(&t.data)?)?;
            let stream = pack_ternary(&w, &path)?;
            let bytes = encode_packed(&stream);
            write(&dest, &bytes)?;
            o(out, format_args!("payload bits/weight: {:.4}", stream.bits_per_weight()));
            o(
                out,
                format_args!(
                    "file bits/weight: {:.4}",
                    bytes.len() as f64 * 8.0 / (stream.rows * stream.cols) as f64
                ),
            );
            Ok(())
        }
        Command::Gemm {
            weights,
            acts,
            path,
            mode,
            weight_bits,
            act_bits,
            out: dest,
            census,
            check,
        } => cmd_gemm(
            &weights,
            &acts,
            &path,
            mode,
            weight_bits,
            act_bits,
            &dest,
            census.as_deref(),
            check,
            out,
        ),
        Command::Sim {
            config,
            schedule,
            model,
            stage,
            mode,
            out_dir,
        } => {
            let cfg = load_config(config.as_deref())?;
            let mode = mode.mode();
            let schedule = match schedule {
                Some(p) => TileSchedule::from_json(&read_text(&p)?)?,
                None => TileSchedule::default_for(&cfg, mode),
            };
            let stage = stage.stage();
            let report = simulate_model(&cfg, &schedule, &Catalog::default(), &model, stage, mode)?;
            let m = &report.metrics;
            o(out, format_args!("{} {} {}: {} cycles", report.model, stage, mode, report.counters.total_cycles));
            o(out, format_args!("throughput: {:.1} GOP/s", m.throughput_gops));
            o(out, format_args!("latency: {:.1} us per block", m.latency_us));
            o(out, format_args!("energy: {:.4e} pJ per block", report.energy.total));
            o(
                out,
                format_args!(
                    "utilization: adders {:.1}% (all provisioned {:.1}%), query LUT ports {:.1}%, PPEs {:.1}%",
                    m.utilization.adders * 100.0,
                    m.utilization.adders_provisioned * 100.0,
                    m.utilization.lut_ports_query * 100.0,
                    m.utilization.ppes * 100.0
                ),
            );
            if let Some(dir) = out_dir {
                let stem = format!("{}_{}_{}", report.model, stage, mode);
                write_json(&dir.join(format!("{stem}.json")), &report)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["multiplicity"].iter().chain(SimReport::CSV_HEADER.iter())).unwrap();
                for k in &report.kernels {
                    let mut row = vec![k.multiplicity.to_string()];
                    row.extend(k.report.csv_row());
                    w.write_record(row).unwrap();
                }
                write(&dir.join(format!("{stem}.csv")), &w.into_inner().unwrap())?;
            }
            Ok(())
        }
        Command::Dse {
            config,
            grid,
            mode,
            stage,
            model,
            latency_weight,
            energy_weight,
            out: dest,
        } => {
            let cfg = load_config(config.as_deref())?;
            let grid = match grid {
                Some(p) => DseGrid::from_json(&read_text(&p)?)?,
                None => DseGrid::default(),
            };
            let catalog = Catalog::default();
            let stage = stage.stage();
            let shapes = match model {
                Some(m) => catalog.kernels(&m, stage)?,
                None => catalog.all_kernels(stage),
            };
            if !(latency_weight >= 0.0 && energy_weight >= 0.0 && latency_weight + energy_weight > 0.0) {
                return Err(CliError::Validation("scalarization weights must be non-negative, not both zero".into()));
            }
            let result = dse(
                &cfg,
                &shapes,
                &grid,
                mode.mode(),
                Scalarization {
                    latency_weight,
                    energy_weight,
                },
            )?;
            write(&dest, result.to_csv().as_bytes())?;
            let feasible = result.points.iter().filter(|p| p.feasible).count();
            o(out, format_args!("points: {} ({} feasible)", result.points.len(), feasible));
            o(out, format_args!("pareto front: {} points", result.pareto_front().len()));
            if let Some(best) = result.ranked().first() {
                let s = best.schedule;
                o(out, format_args!("best: m={} k={} n={} {}", s.m_tile, s.k_tile, s.n_tile, s.stationarity));
            }
            if let Some(p) = result.find(&REFERENCE_POINT) {
                o(
                    out,
                    format_args!(
                        "reference point (1080, 520, 32, mnk): feasible={} pareto={} rank={}",
                        p.feasible,
                        p.pareto,
                        p.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
                    ),
                );
            }
            Ok(())
        }
        Command::Cost {
            m,
            k,
            n,
            c_min,
            c_max,
            out: dest,
            encoding_out,
        } => {
            let shape = GemmShape::new(m, k, n)?;
            if c_min > c_max {
                return Err(CliError::Validation(format!("empty chunk range {c_min}..={c_max}")));
            }
            let sweep = sweep_chunk_size(&shape, c_min..=c_max)?;
            write(&dest, sweep.to_csv().as_bytes())?;
            for method in [Method::Bitserial, Method::TernaryNaive, Method::TernaryPath] {
                let c = sweep.argmin(method).expect("non-empty sweep");
                o(
                    out,
                    format_args!("{}: best c={} ({} adds)", method.name(), c, sweep.adds(method, c).unwrap()),
                );
            }
            if let Some(p) = encoding_out {
                write(&p, encoding_csv(&encoding_sweep(c_min..=c_max)?).as_bytes())?;
            }
            Ok(())
        }
    }
}

fn narrow_i8(m: &Matrix<i32>) -> Result<Matrix<i8>> {
    if let Some(v) = m.data().iter().find(|v| i8::try_from(**v).is_err()) {
        return Err(CliError::Validation(format!("weight {v} is not ternary")));
    }
    Ok(m.map(|v| v as i8))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gemm(
    weights: &Path,
    acts: &Path,
    path: &Path,
    mode: ExecArg,
    weight_bits: usize,
    act_bits: u32,
    dest: &Path,
    census_path: Option<&Path>,
    check: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let path = decode_path(&read(path)?)?;
    let x = ActivationMatrix::new(decode_tensor(&read(acts)?)?.data, act_bits)?;
    let wbytes = read(weights)?;

    // integer weights for the oracle, plus the engine result
    let (w_int, result, planes): (Matrix<i32>, GemmResult, usize) = if wbytes.starts_with(TENSOR_MAGIC) {
        if !matches!(mode, ExecArg::Bitserial) {
            return Err(CliError::Validation("ternary mode needs packed PLTW weights".into()));
        }
        let w = decode_tensor(&wbytes)?.data;
        let planes = decompose_bitplanes(&w, weight_bits, true)?;
        let bpath = binary_path(&path)?;
        let r = mpgemm_bitserial(&planes, &x, &bpath)?;
        (w, r, planes.bits())
    } else {
        let stream = decode_packed(&wbytes)?;
        let w = unpack_ternary(&stream, &path)?.matrix;
        match mode {
            ExecArg::Ternary => {
                let r = mpgemm_ternary(&stream, &x, &path)?;
                (w.as_matrix().map(i32::from), r, 1)
            }
            ExecArg::Bitserial => {
                let bpath = binary_path(&path)?;
                let r = mpgemm_bitserial(&decompose_sign_split(&w), &x, &bpath)?;
                (w.as_matrix().map(i32::from), r, 2)
            }
        }
    };

    write(
        dest,
        &encode_tensor(&Tensor {
            dtype: TensorDtype::I32,
            data: result.output.clone(),
        })?,
    )?;
    let (m, k, n) = (w_int.rows() as u64, w_int.cols() as u64, x.cols() as u64);
    let shape = GemmShape::new(m, k, n)?;
    let (c, plane_arg) = match mode {
        ExecArg::Ternary => (path.config.c() as u32, None),
        ExecArg::Bitserial => (crate::pathgen::ChunkConfig::binary_default().c() as u32, Some(planes as u64)),
    };
    let census_json = json!({
        "mode": match mode { ExecArg::Ternary => "ternary", ExecArg::Bitserial => "bitserial" },
        "shape": { "m": m, "k": k, "n": n },
        "census": result.census,
        "predicted": census_prediction(&shape, c, plane_arg)?,
    });
    write_json(&census_path.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(dest, ".census.json")), &census_json)?;
    o(
        out,
        format_args!(
            "construct adds: {}, queries: {}, merge adds: {}, reduce adds: {}",
            result.census.construct_adds, result.census.queries, result.census.merge_adds, result.census.reduce_adds
        ),
    );

    if check {
        let oracle = naive_gemm(&w_int, &x)?.output;
        let diffs = oracle
            .data()
            .iter()
            .zip(result.output.data())
            .filter(|(a, b)| a != b)
            .count();
        if diffs > 0 {
            return Err(CliError::Mismatch(format!("{diffs} outputs differ from the naive GEMM")));
        }
        o(out, format_args!("check: output matches naive GEMM"));
    }
    Ok(())
}

/// Binary path used for bit-serial execution, with the same pipeline depth as `ternary`.
fn binary_path(ternary: &BuildPath) -> Result<BuildPath> {
    let base = ChunkConfig::binary_default();
    let cfg = ChunkConfig::new(LutMode::Binary, base.c(), ternary.config.pipeline_depth())?;
    Ok(generate_path(&cfg)?)
}
