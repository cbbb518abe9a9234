use serde::Serialize;

use super::path::BuildPath;

/// First problem found while replaying a build path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    StepCount { expected: usize, found: usize },
    AddressOutOfRange { step: usize, address: u8 },
    BadInputIndex { step: usize, j: u8 },
    NonSequentialDst { step: usize, expected: u8, found: u8 },
    DuplicateWrite { step: usize, dst: u8 },
    UnwrittenSource { step: usize, src: u8 },
    RawViolation { step: usize, src: u8, distance: usize, required: usize },
    ValueMismatch { address: u8, code: u32 },
    ZeroNotAtOrigin { address: u8 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub steps: usize,
    pub min_raw_distance: Option<usize>,
    pub violation: Option<Violation>,
}

/// Replays a path symbolically over formal inputs `a_0..a_{c-1}` and checks it against the
/// canonical map: sequential fresh destinations, sources already written and old enough for
/// the pipeline, and every address holding exactly the coefficient vector of its code.
pub fn verify_path(path: &BuildPath) -> VerifyReport {
    let cfg = &path.config;
    let stored = cfg.stored_entries();
    let mut report = VerifyReport {
        passed: false,
        steps: path.steps.len(),
        min_raw_distance: path.min_raw_distance(),
        violation: None,
    };
    let fail = |mut r: VerifyReport, v: Violation| {
        r.violation = Some(v);
        r
    };

    if path.canonical_map.len() != stored {
        return fail(
            report,
            Violation::StepCount {
                expected: stored,
                found: path.canonical_map.len(),
            },
        );
    }

    // symbolic LUT: coefficient of each formal input, per address
    let mut coeffs: Vec<Option<Vec<i32>>> = vec![None; stored];
    let mut written_at: Vec<Option<usize>> = vec![None; stored];
    coeffs[0] = Some(vec![0; cfg.c()]);

    for (pos, step) in path.steps.iter().enumerate() {
        for addr in [step.dst, step.src] {
            if addr as usize >= stored {
                return fail(report, Violation::AddressOutOfRange { step: pos, address: addr });
            }
        }
        if step.j as usize >= cfg.c() {
            return fail(report, Violation::BadInputIndex { step: pos, j: step.j });
        }
        if coeffs[step.dst as usize].is_some() {
            return fail(report, Violation::DuplicateWrite { step: pos, dst: step.dst });
        }
        let expected_dst = (pos + 1) as u8;
        if step.dst != expected_dst {
            return fail(
                report,
                Violation::NonSequentialDst {
                    step: pos,
                    expected: expected_dst,
                    found: step.dst,
                },
            );
        }
        let Some(src) = coeffs[step.src as usize].clone() else {
            return fail(report, Violation::UnwrittenSource { step: pos, src: step.src });
        };
        if let Some(w) = written_at[step.src as usize] {
            let distance = pos - w;
            if distance < cfg.pipeline_depth() {
                return fail(
                    report,
                    Violation::RawViolation {
                        step: pos,
                        src: step.src,
                        distance,
                        required: cfg.pipeline_depth(),
                    },
                );
            }
        }
        let mut v = src;
        v[step.j as usize] += if step.sign == 0 { 1 } else { -1 };
        coeffs[step.dst as usize] = Some(v);
        written_at[step.dst as usize] = Some(pos);
    }

    if path.steps.len() != stored - 1 {
        return fail(
            report,
            Violation::StepCount {
                expected: stored - 1,
                found: path.steps.len(),
            },
        );
    }

    let zero_addr = path.canonical_map.address(cfg.zero_code()).unwrap_or(u8::MAX);
    if zero_addr != 0 {
        return fail(report, Violation::ZeroNotAtOrigin { address: zero_addr });
    }

    for code in 0..stored as u32 {
        let address = path.canonical_map.address(code).expect("map covers stored codes");
        let want: Vec<i32> = cfg.decode(code).into_iter().map(i32::from).collect();
        if coeffs[address as usize].as_ref() != Some(&want) {
            return fail(report, Violation::ValueMismatch { address, code });
        }
    }

    report.passed = true;
    report
}
