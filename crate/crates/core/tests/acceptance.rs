//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits non-zero
//! if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ternlut::archsim::{
    dse, simulate_model, Catalog, DseGrid, ExecMode, HardwareConfig, Scalarization, Stage, TileSchedule,
    REFERENCE_POINT,
};
use ternlut::costmodel::{
    adds_bitserial, adds_ternary_naive, adds_ternary_path, bitserial_terms, ternary_naive_terms, ternary_path_terms,
    GemmShape,
};
use ternlut::lutkernel::{
    mpgemm_bitserial, mpgemm_bitserial_with, mpgemm_ternary, mpgemm_ternary_with, naive_gemm, ActivationMatrix,
    Construction, KernelOptions,
};
use ternlut::pathgen::{generate_path, verify_path, BuildPath, ChunkConfig, LutMode};
use ternlut::weightcodec::{
    bits_per_weight, decode_packed, decompose_bitplanes, decompose_sign_split, encode_packed, pack_ternary,
    unpack_ternary, TernaryMatrix,
};
use ternlut::Matrix;

const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "LUT cardinalities", lut_cardinalities),
        (3, "RAW schedule", raw_schedule),
        (4, "encoding", encoding),
        (5, "cost-model agreement", cost_model_agreement),
        (6, "throughput", throughput),
        (7, "mode speedup", mode_speedup),
        (8, "utilization", utilization),
        (9, "DSE feasibility", dse_feasibility),
        (10, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        println!(
            "{} criterion {n} ({name}): {} [{:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

fn paths() -> (BuildPath, BuildPath) {
    (
        generate_path(&ChunkConfig::ternary_default()).unwrap(),
        generate_path(&ChunkConfig::binary_default()).unwrap(),
    )
}

fn int8_acts(rng: &mut ChaCha8Rng, k: usize, n: usize) -> ActivationMatrix {
    ActivationMatrix::int8(Matrix::from_fn(k, n, |_, _| rng.gen_range(-128..=127))).unwrap()
}

/// Runs both LUT engines on ternary `w` and returns a description of the first mismatch.
fn compare_ternary(w: &TernaryMatrix, x: &ActivationMatrix, tp: &BuildPath, bp: &BuildPath) -> Option<String> {
    let expected = naive_gemm(&w.as_matrix().map(i32::from), x).unwrap().output;
    let packed = pack_ternary(w, tp).unwrap();
    if mpgemm_ternary(&packed, x, tp).unwrap().output != expected {
        return Some(format!("ternary mismatch at {}x{}x{}", w.rows(), w.cols(), x.cols()));
    }
    if mpgemm_bitserial(&decompose_sign_split(w), x, bp).unwrap().output != expected {
        return Some(format!("bit-serial mismatch at {}x{}x{}", w.rows(), w.cols(), x.cols()));
    }
    None
}

fn log_uniform(rng: &mut ChaCha8Rng, max: usize) -> usize {
    ((rng.gen::<f64>() * (max as f64).ln()).exp().round() as usize).clamp(1, max)
}

fn oracle_equivalence() -> Outcome {
    let (tp, bp) = paths();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    // Every ternary M×K matrix, stacked into tall batches that share one activation matrix.
    const BATCH: usize = 1 << 16;
    let mut exhaustive = 0u64;
    for m in 1..=4usize {
        for k in 1..=4usize {
            let total = 3usize.pow((m * k) as u32);
            let mut start = 0;
            while start < total {
                let count = BATCH.min(total - start);
                let w = Matrix::from_fn(count * m, k, |r, c| {
                    let idx = start + r / m;
                    let digit = (r % m) * k + c;
                    ((idx / 3usize.pow(digit as u32)) % 3) as i8 - 1
                });
                let w = TernaryMatrix::new(w).unwrap();
                for n in 1..=2 {
                    let x = int8_acts(&mut rng, k, n);
                    if let Some(e) = compare_ternary(&w, &x, &tp, &bp) {
                        return Outcome::new(false, format!("exhaustive M={m} K={k}: {e}"));
                    }
                }
                exhaustive += count as u64;
                start += count;
            }
        }
    }

    let cases = 1000;
    let mut multibit = 0;
    for i in 0..cases {
        let (m, k, n) = if i == 0 {
            (1080, 520, 32)
        } else {
            (log_uniform(&mut rng, 1080), log_uniform(&mut rng, 520), log_uniform(&mut rng, 32))
        };
        let x = int8_acts(&mut rng, k, n);
        let w = TernaryMatrix::new(Matrix::from_fn(m, k, |_, _| rng.gen_range(-1i8..=1))).unwrap();
        if let Some(e) = compare_ternary(&w, &x, &tp, &bp) {
            return Outcome::new(false, format!("random case {i}: {e}"));
        }
        if i % 4 == 0 {
            let bits = rng.gen_range(2..=4usize);
            let half = 1i32 << (bits - 1);
            let wi = Matrix::from_fn(m, k, |_, _| rng.gen_range(-half..half));
            let planes = decompose_bitplanes(&wi, bits, true).unwrap();
            let got = mpgemm_bitserial(&planes, &x, &bp).unwrap().output;
            if got != naive_gemm(&wi, &x).unwrap().output {
                return Outcome::new(false, format!("random case {i}: {bits}-bit bit-serial mismatch at {m}x{k}x{n}"));
            }
            multibit += 1;
        }
    }
    Outcome::new(
        true,
        format!(
            "{exhaustive} exhaustive ternary matrices (M,K<=4, N=1,2) and {cases} random cases up to 1080x520x32 \
             ({multibit} with multi-bit weights) match naive_gemm exactly in both modes"
        ),
    )
}

fn lut_cardinalities() -> Outcome {
    let (tp, bp) = paths();
    let stored = (tp.config.stored_entries(), bp.config.stored_entries());
    let steps = (tp.steps.len(), bp.steps.len());

    // Measured construction cost of one ternary chunk under both strategies.
    let x = ActivationMatrix::int8(Matrix::from_fn(5, 1, |r, _| r as i32 + 1)).unwrap();
    let w = pack_ternary(&TernaryMatrix::new(Matrix::zeros(1, 5)).unwrap(), &tp).unwrap();
    let run = |construction| {
        let opts = KernelOptions {
            construction,
            ..Default::default()
        };
        mpgemm_ternary_with(&w, &x, &tp, &opts).unwrap().census.construct_adds
    };
    let (naive, path) = (run(Construction::Naive), run(Construction::Path));
    let ratio = naive as f64 / path as f64;

    let pass = stored == (122, 128)
        && steps == (121, 127)
        && (naive, path) == (5 * 243, 121)
        && (9.5..=10.5).contains(&ratio);
    Outcome::new(
        pass,
        format!(
            "stored {}/{}, steps {}/{}, construction adds naive {naive} vs path {path} = {ratio:.3}x (want [9.5, 10.5])",
            stored.0, stored.1, steps.0, steps.1
        ),
    )
}

fn raw_schedule() -> Outcome {
    let (tp, bp) = paths();
    let depth = tp.config.pipeline_depth();
    let t = verify_path(&tp);
    let b = verify_path(&bp);
    let dist = tp.min_raw_distance().unwrap_or(0);
    let pass = depth == 4 && dist >= depth && t.passed && b.passed && t.min_raw_distance == Some(dist);
    Outcome::new(
        pass,
        format!(
            "ternary c=5 min RAW distance {dist} (depth {depth}), verify_path ternary {} binary {}",
            t.passed, b.passed
        ),
    )
}

fn encoding() -> Outcome {
    let (tp, _) = paths();
    let bpw = bits_per_weight(5);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let trials = 10_000;
    let mut ragged = 0;
    for i in 0..trials {
        let rows = rng.gen_range(1..=12);
        let cols = rng.gen_range(1..=37);
        if cols % 5 != 0 {
            ragged += 1;
        }
        let w = TernaryMatrix::new(Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1i8..=1))).unwrap();
        let packed = pack_ternary(&w, &tp).unwrap();
        let file = encode_packed(&packed);
        let decoded = decode_packed(&file).unwrap();
        let back = unpack_ternary(&decoded, &tp).unwrap();
        if decoded.bytes != packed.bytes || encode_packed(&decoded) != file || back.matrix != w || back.nonzero_padding != 0 {
            return Outcome::new(false, format!("round trip {i} failed at {rows}x{cols}"));
        }
    }
    let pass = bpw == Ratio::new(8, 5);
    Outcome::new(
        pass,
        format!("bits_per_weight(5) = {bpw}; {trials} round trips identical ({ragged} with K not a multiple of 5)"),
    )
}

fn cost_model_agreement() -> Outcome {
    let ternary: BTreeMap<usize, BuildPath> = (2..=5)
        .map(|c| (c, generate_path(&ChunkConfig::new(LutMode::Ternary, c, 1).unwrap()).unwrap()))
        .collect();
    let binary: BTreeMap<usize, BuildPath> = (2..=7)
        .map(|c| (c, generate_path(&ChunkConfig::new(LutMode::Binary, c, 1).unwrap()).unwrap()))
        .collect();
    let naive_opts = KernelOptions {
        construction: Construction::Naive,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut slack_total = 0;
    for i in 0..100 {
        let (m, k, n) = (rng.gen_range(1..=300), rng.gen_range(1..=300), rng.gen_range(1..=4));
        let (tc, bc) = (rng.gen_range(2..=5usize), rng.gen_range(2..=7usize));
        let shape = GemmShape::new(m as u64, k as u64, n as u64).unwrap();
        let (mu, nu) = (m as u64, n as u64);
        let w = TernaryMatrix::new(Matrix::from_fn(m, k, |_, _| rng.gen_range(-1i8..=1))).unwrap();
        let x = int8_acts(&mut rng, k, n);
        let mismatch = |what: &str| Outcome::new(false, format!("shape {i} ({m}x{k}x{n}): {what}"));

        // ternary, path construction
        let tp = &ternary[&tc];
        let g = k.div_ceil(tc) as u64;
        let packed = pack_ternary(&w, tp).unwrap();
        let census = mpgemm_ternary(&packed, &x, tp).unwrap().census;
        let terms = ternary_path_terms(&shape, tc as u32).unwrap();
        let construct = g * 3u64.pow(tc as u32).div_ceil(2) * nu;
        if terms.construct * nu != construct || terms.reduce * nu != mu * (g - 1) * nu {
            return mismatch("ternary path terms disagree with the closed form");
        }
        // the root entry is zero and costs no addition
        if construct - census.construct_adds != g * nu {
            return mismatch("ternary path construction outside the one-entry-per-chunk slack");
        }
        slack_total += construct - census.construct_adds;
        if census.queries != mu * g * nu || census.reduce_adds != terms.reduce * nu || census.merge_adds != 0 {
            return mismatch("ternary path query/reduce terms");
        }
        if adds_ternary_path(&shape, tc as u32).unwrap() != construct + mu * (g - 1) * nu {
            return mismatch("adds_ternary_path total");
        }

        // ternary, unoptimised construction
        let census = mpgemm_ternary_with(&packed, &x, tp, &naive_opts).unwrap().census;
        let terms = ternary_naive_terms(&shape, tc as u32).unwrap();
        let construct = g * tc as u64 * 3u64.pow(tc as u32) * nu;
        if census.construct_adds != construct || terms.construct * nu != construct {
            return mismatch("ternary naive construction");
        }
        if census.reduce_adds != terms.reduce * nu || census.queries != mu * g * nu {
            return mismatch("ternary naive query/reduce terms");
        }
        if adds_ternary_naive(&shape, tc as u32).unwrap() != construct + mu * (g - 1) * nu {
            return mismatch("adds_ternary_naive total");
        }

        // bit-serial over the two sign planes, unoptimised construction
        let bp = &binary[&bc];
        let g = k.div_ceil(bc) as u64;
        let census = mpgemm_bitserial_with(&decompose_sign_split(&w), &x, bp, &naive_opts).unwrap().census;
        let terms = bitserial_terms(&shape, bc as u32, 2).unwrap();
        let construct = g * bc as u64 * (1u64 << bc) * nu;
        let (merge, reduce) = (mu * g * nu, mu * (g - 1) * nu);
        if census.construct_adds != construct || terms.construct * nu != construct {
            return mismatch("bit-serial construction");
        }
        if census.merge_adds != merge || terms.merge * nu != merge {
            return mismatch("bit-serial merge term");
        }
        if census.reduce_adds != reduce || terms.reduce * nu != reduce || census.queries != 2 * mu * g * nu {
            return mismatch("bit-serial query/reduce terms");
        }
        if adds_bitserial(&shape, bc as u32).unwrap() != construct + merge + reduce {
            return mismatch("adds_bitserial total");
        }
    }

    // Addition counts across chunk sizes at M=1080 for the 3B reduction dimensions.
    let mut violations = Vec::new();
    for k in [3200u64, 8640] {
        let shape = GemmShape::new(1080, k, 1).unwrap();
        for c in 2..=8u32 {
            let g = k.div_ceil(c as u64);
            let folded = g * 3u64.pow(c).div_ceil(2) + 1080 * (g - 1);
            let bs = g * c as u64 * (1 << c) + 1080 * g + 1080 * (g - 1);
            let naive = 1080 * k;
            if adds_ternary_path(&shape, c).unwrap() != folded || adds_bitserial(&shape, c).unwrap() != bs {
                return Outcome::new(false, format!("closed forms disagree at K={k} c={c}"));
            }
            if folded > bs {
                violations.push(format!("K={k} c={c}: ternary-path {folded} > bit-serial {bs}"));
            }
            if folded >= naive {
                violations.push(format!("K={k} c={c}: ternary-path {folded} >= naive {naive}"));
            }
            if bs >= naive {
                violations.push(format!("K={k} c={c}: bit-serial {bs} >= naive {naive}"));
            }
        }
    }
    let mut detail = format!(
        "census matches all terms on 100 shapes (construction slack {slack_total} adds, one per chunk per column); "
    );
    if violations.is_empty() {
        detail.push_str("ordering holds for c in [2, 8] at M=1080");
    } else {
        detail.push_str(&format!("ordering at M=1080 violated: {}", violations.join("; ")));
    }
    Outcome::new(violations.is_empty(), detail)
}

fn model_run(stage: Stage, mode: ExecMode) -> ternlut::archsim::ModelReport {
    let cfg = HardwareConfig::default();
    let schedule = TileSchedule::default_for(&cfg, mode);
    simulate_model(&cfg, &schedule, &Catalog::default(), "b1.58-3B", stage, mode).unwrap()
}

fn throughput() -> Outcome {
    let r = model_run(Stage::Prefill, ExecMode::Ternary);
    let gops = r.metrics.throughput_gops;
    let (lo, hi) = (1534.0 * 0.75, 1534.0 * 1.25);
    Outcome::new(
        (lo..=hi).contains(&gops),
        format!("b1.58-3B prefill {gops:.1} GOP/s (want [{lo:.1}, {hi:.1}])"),
    )
}

fn mode_speedup() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for stage in [Stage::Prefill, Stage::Decode] {
        let t = model_run(stage, ExecMode::Ternary).counters.total_cycles;
        let b = model_run(stage, ExecMode::BitSerial { planes: 2 }).counters.total_cycles;
        let ratio = b as f64 / t as f64;
        pass &= (1.2..=1.6).contains(&ratio);
        parts.push(format!("{stage} {ratio:.3} ({b}/{t} cycles)"));
    }
    Outcome::new(pass, format!("bit-serial/ternary cycles {} (want [1.2, 1.6])", parts.join(", ")))
}

fn utilization() -> Outcome {
    let u = model_run(Stage::Prefill, ExecMode::Ternary).metrics.utilization;
    let port_ok = (u.lut_ports_query - 1.0).abs() < 1e-12;
    let adder_ok = (u.adders * 100.0 - 90.5).abs() <= 3.0;
    Outcome::new(
        port_ok && adder_ok,
        format!(
            "query LUT ports {:.4}%, adders {:.2}% over active PPEs (want 90.5 +/- 3), {:.2}% over all provisioned",
            u.lut_ports_query * 100.0,
            u.adders * 100.0,
            u.adders_provisioned * 100.0
        ),
    )
}

fn dse_feasibility() -> Outcome {
    let cfg = HardwareConfig::default();
    let shapes = Catalog::default().kernels("b1.58-3B", Stage::Prefill).unwrap();
    let result = dse(&cfg, &shapes, &DseGrid::default(), ExecMode::Ternary, Scalarization::default()).unwrap();
    let budget = 324 * 1024;
    let Some(p) = result.find(&REFERENCE_POINT) else {
        return Outcome::new(false, "reference point missing from the grid");
    };
    // independent dominance check
    let (lat, en) = (p.latency_cycles.unwrap_or(u64::MAX), p.energy_pj.unwrap_or(f64::INFINITY));
    let dominated = result.points.iter().filter(|q| q.feasible).any(|q| {
        let (ql, qe) = (q.latency_cycles.unwrap(), q.energy_pj.unwrap());
        ql <= lat && qe <= en && (ql < lat || qe < en)
    });
    let feasible = result.points.iter().filter(|q| q.feasible).count();
    let pass = p.feasible
        && cfg.buffers.sram_total() <= budget
        && p.buffer_bytes <= cfg.buffers.sram_total()
        && p.pareto
        && !dominated;
    Outcome::new(
        pass,
        format!(
            "(1080, 520, 32, mnk) feasible={} using {} of {budget} SRAM bytes, pareto={} (undominated={}), rank {:?} of {feasible} feasible",
            p.feasible,
            p.buffer_bytes,
            p.pareto,
            !dominated,
            p.rank
        ),
    )
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = ternlut::cli::run(std::iter::once("ternlut").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

/// Runs every subcommand into `dir` with fixed seeds.
fn run_all(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let runs: Vec<Vec<String>> = vec![
        vec!["genpath".into(), "-o".into(), p("t.pltp")],
        vec!["genpath".into(), "--mode".into(), "binary".into(), "-c".into(), "7".into(), "-o".into(), p("b.pltp")],
        vec!["rand", "--rows", "96", "--cols", "131", "--seed", "7", "-o"]
            .into_iter()
            .map(String::from)
            .chain([p("w.pltt")])
            .collect(),
        vec!["rand", "--dist", "signed", "--rows", "131", "--cols", "12", "--seed", "9", "-o"]
            .into_iter()
            .map(String::from)
            .chain([p("x.pltt")])
            .collect(),
        vec!["rand", "--dist", "signed", "--bits", "3", "--rows", "96", "--cols", "131", "-o"]
            .into_iter()
            .map(String::from)
            .chain([p("wi.pltt")])
            .collect(),
        vec!["pack".into(), "--weights".into(), p("w.pltt"), "--path".into(), p("t.pltp"), "-o".into(), p("w.pltw")],
        vec![
            "gemm".into(),
            "--weights".into(),
            p("w.pltw"),
            "--acts".into(),
            p("x.pltt"),
            "--path".into(),
            p("t.pltp"),
            "--check".into(),
            "-o".into(),
            p("y.pltt"),
        ],
        vec![
            "gemm".into(),
            "--mode".into(),
            "bitserial".into(),
            "--weight-bits".into(),
            "3".into(),
            "--weights".into(),
            p("wi.pltt"),
            "--acts".into(),
            p("x.pltt"),
            "--path".into(),
            p("t.pltp"),
            "--check".into(),
            "-o".into(),
            p("yb.pltt"),
        ],
        vec!["sim".into(), "--stage".into(), "decode".into(), "--out-dir".into(), p("sim")],
        vec!["sim".into(), "--mode".into(), "bitserial".into(), "--out-dir".into(), p("sim")],
        vec!["dse".into(), "--model".into(), "b1.58-3B".into(), "-o".into(), p("dse.csv")],
        vec!["cost".into(), "-o".into(), p("cost.csv"), "--encoding-out".into(), p("enc.csv")],
    ];
    for args in &runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, err) = cli(&refs);
        if code != 0 {
            return Err(format!("`{}` exited {code}: {err}", refs[0]));
        }
    }
    Ok(())
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        if let Err(e) = run_all(dir) {
            return Outcome::new(false, e);
        }
    }
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    let bytes: usize = fa.values().map(Vec::len).sum();
    Outcome::new(
        differing.is_empty() && fa.len() == fb.len() && fa.len() >= 14,
        format!(
            "12 commands run twice: {} artifacts ({bytes} bytes), {} differ",
            fa.len(),
            differing.len()
        ),
    )
}
