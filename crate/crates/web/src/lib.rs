//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers and strings and returns a JSON string.
//! The `*_json` functions hold the logic so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ctc_boxlab::boxworld::{
    chsh_success, is_bell_local, is_no_signaling, isotropic_chsh_box, Behavior,
};
use ctc_boxlab::ctc_circuits::{run_circuit, swap_op, CtcCircuit, PartyOp, PartyWires};
use ctc_boxlab::ctc_engine::DEFAULT_TOL;
use ctc_boxlab::sampling;
use ctc_boxlab::zigzag::{singlet_summary, AngleGrid, Protocol};

const MAX_SCAN_STEPS: usize = 2000;
const MAX_SAMPLES: u64 = 2_000_000;
const MAX_DIRECTIONS: usize = 360;

#[derive(Serialize)]
struct ScanPoint {
    p: f64,
    chsh_success: f64,
    local: bool,
    violation_gap: f64,
}

#[derive(Serialize)]
struct Scan {
    points: Vec<ScanPoint>,
    /// Smallest scanned `p` that is not Bell-local.
    first_nonlocal: Option<f64>,
    tsirelson: f64,
}

/// Locality of the isotropic family `p ∈ [0.5, 1]` on `steps + 1` points.
pub fn isotropic_scan_json(steps: usize) -> Result<String, String> {
    if steps == 0 || steps > MAX_SCAN_STEPS {
        return Err(format!("steps must be in 1..={MAX_SCAN_STEPS}"));
    }
    let mut points = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let p = 0.5 + 0.5 * i as f64 / steps as f64;
        let beh = isotropic_chsh_box(p).map_err(|e| e.to_string())?;
        let cert = is_bell_local(&beh, DEFAULT_TOL).map_err(|e| e.to_string())?;
        points.push(ScanPoint {
            p,
            chsh_success: chsh_success(&beh).map_err(|e| e.to_string())?,
            local: cert.is_local,
            violation_gap: cert.violation_gap,
        });
    }
    let first_nonlocal = points.iter().find(|pt| !pt.local).map(|pt| pt.p);
    let tsirelson = (std::f64::consts::PI / 8.0).cos().powi(2);
    to_json(&Scan {
        points,
        first_nonlocal,
        tsirelson,
    })
}

#[derive(Serialize)]
struct CircuitView {
    behavior: Behavior,
    chsh_success: f64,
    no_signaling: bool,
    max_signaling: f64,
    fp_space_dims: Vec<usize>,
    consistent_v: Vec<Vec<f64>>,
}

fn party(kind: &str, seed: u64, stream: u64) -> Result<PartyOp, String> {
    let w = PartyWires::BINARY;
    let mut rng = sampling::stream(seed, stream);
    match kind {
        "swap" => swap_op(w),
        "deterministic" => PartyOp::random_deterministic(w, &mut rng),
        "stochastic" => PartyOp::random_stochastic(w, &mut rng),
        other => return Err(format!("unknown operation {other:?}")),
    }
    .map_err(|e| e.to_string())
}

/// Runs the binary CTC circuit with an isotropic box of strength `p` in the
/// common future. Each party is `"swap"`, `"deterministic"` or
/// `"stochastic"`; random operations are drawn from `seed`.
pub fn ctc_circuit_json(p: f64, alice: &str, bob: &str, seed: u64) -> Result<String, String> {
    let future_box = isotropic_chsh_box(p).map_err(|e| e.to_string())?;
    let circuit = CtcCircuit::new(party(alice, seed, 0)?, party(bob, seed, 1)?, future_box)
        .map_err(|e| e.to_string())?;
    let run = run_circuit(&circuit, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let ns = is_no_signaling(&run.behavior, DEFAULT_TOL);
    to_json(&CircuitView {
        chsh_success: chsh_success(&run.behavior).map_err(|e| e.to_string())?,
        no_signaling: ns.holds,
        max_signaling: ns.max_deviation(),
        fp_space_dims: run.runs.iter().map(|r| r.report.fp_space_dim).collect(),
        consistent_v: run
            .runs
            .iter()
            .map(|r| r.report.consistent_v.weights().to_vec())
            .collect(),
        behavior: run.behavior,
    })
}

/// Singlet correlation curve on `directions` angles in `[0, 2π)`.
pub fn singlet_curve_json(
    protocol: &str,
    directions: usize,
    samples: u64,
    seed: u64,
) -> Result<String, String> {
    let protocol: Protocol = protocol.parse()?;
    if directions == 0 || directions > MAX_DIRECTIONS {
        return Err(format!("directions must be in 1..={MAX_DIRECTIONS}"));
    }
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must be in 1..={MAX_SAMPLES}"));
    }
    let grid = AngleGrid::uniform(directions).map_err(|e| e.to_string())?;
    to_json(&singlet_summary(protocol, &grid, samples, seed))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn isotropic_scan(steps: usize) -> Result<String, JsError> {
    isotropic_scan_json(steps).map_err(|e| JsError::new(&e))
}

// u32 rather than u64 so JavaScript passes plain numbers, not BigInt.
#[wasm_bindgen]
pub fn ctc_circuit(p: f64, alice: &str, bob: &str, seed: u32) -> Result<String, JsError> {
    ctc_circuit_json(p, alice, bob, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn singlet_curve(
    protocol: &str,
    directions: usize,
    samples: u32,
    seed: u32,
) -> Result<String, JsError> {
    singlet_curve_json(protocol, directions, samples.into(), seed.into())
        .map_err(|e| JsError::new(&e))
}
