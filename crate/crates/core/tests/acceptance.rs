//! Acceptance criteria. Each criterion prints one PASS/FAIL line with its
//! measured value and runtime; the test fails if any criterion does.
//!
//! Criteria run sequentially inside one test so their runtimes are not
//! distorted by sibling tests.

use std::time::{Duration, Instant};

use ctc_boxlab::boxworld::{
    chsh_success, deterministic_box, is_bell_local, is_no_signaling, isotropic_chsh_box, pr_box,
    random_ns_behavior, Scenario,
};
use ctc_boxlab::ctc_circuits::{
    observable_behavior, pr_ctc_circuit, run_circuit, swap_op, CtcCircuit, PartyOp, PartyWires,
};
use ctc_boxlab::ctc_engine::{max_entropy_fixed_point, solve_max_entropy, DEFAULT_TOL};
use ctc_boxlab::prob::{Alphabet, Channel, Dist};
use ctc_boxlab::zigzag::{
    hidden_influence, md_from_target, random_md_model, singlet_summary, AngleGrid, Protocol,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{closed_form_max_entropy, degenerate_map, entropy, mix, simplex};

const EXACT_TOL: f64 = 1e-9;
const THRESHOLD_TOL: f64 = 1e-6;
const QUANTUM_P: f64 = 0.853553;
const UNIFORM_TOL: f64 = 1e-7;
const ENTROPY_TOL: f64 = 1e-6;
const SINGLET_SAMPLES: u64 = 1_000_000;
const SINGLET_BOUND: f64 = 0.004;
const HIDDEN_INFLUENCE_FLOOR: f64 = 0.1;
/// Exact `I(Λ ; XY)` of the universal model for the PR box: `h(1/4)`.
const PR_HIDDEN_INFLUENCE: f64 = 0.8112781244591328;
const MI_ZERO_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

fn criterion(id: u32, name: &str, limit: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let passed = outcome.passed && in_time;
    println!(
        "[{}] {id}. {name}: {} ({:.2?}, limit {:.0?}{})",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed,
        limit,
        if in_time { "" } else { ", too slow" }
    );
    passed
}

fn pr_via_ctc() -> Outcome {
    let run = run_circuit(&pr_ctc_circuit(), DEFAULT_TOL).unwrap();
    let diff = run.behavior.max_abs_diff(&pr_box()).unwrap();
    let score = chsh_success(&run.behavior).unwrap();
    let dims: Vec<usize> = run.runs.iter().map(|r| r.report.fp_space_dim).collect();
    Outcome {
        passed: diff <= EXACT_TOL
            && (score - 1.0).abs() <= EXACT_TOL
            && dims.len() == 4
            && dims.iter().all(|&d| d == 0),
        detail: format!("max |P - PR| = {diff:.2e}, chsh = {score}, fixed-space dims {dims:?}"),
    }
}

fn classical_bound() -> Outcome {
    let mut best: f64 = 0.0;
    for f in 0..4 {
        for g in 0..4 {
            let beh = deterministic_box(&[f & 1, f >> 1], &[g & 1, g >> 1], 2, 2).unwrap();
            best = best.max(chsh_success(&beh).unwrap());
        }
    }
    let local = |p: f64| {
        is_bell_local(&isotropic_chsh_box(p).unwrap(), EXACT_TOL)
            .unwrap()
            .is_local
    };
    let (mut lo, mut hi) = (0.5, 1.0);
    let bracket_ok = local(lo) && !local(hi);
    while hi - lo > THRESHOLD_TOL / 8.0 {
        let mid = 0.5 * (lo + hi);
        if local(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    Outcome {
        passed: best == 0.75 && bracket_ok && (threshold - 0.75).abs() <= THRESHOLD_TOL,
        detail: format!("max deterministic chsh = {best}, locality threshold p = {threshold:.8}"),
    }
}

fn quantum_point() -> Outcome {
    let beh = isotropic_chsh_box(QUANTUM_P).unwrap();
    let ns = is_no_signaling(&beh, EXACT_TOL);
    let cert = is_bell_local(&beh, EXACT_TOL).unwrap();
    Outcome {
        passed: ns.holds && ns.max_deviation() == 0.0 && !cert.is_local && cert.violation_gap > 0.0,
        detail: format!(
            "signaling deviation {:.1e}, local = {}, violation gap {:.4}",
            ns.max_deviation(),
            cert.is_local,
            cert.violation_gap
        ),
    }
}

fn universality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let swap = swap_op(PartyWires::BINARY).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let target = random_ns_behavior(&mut rng);
        let circuit = CtcCircuit::new(swap.clone(), swap.clone(), target.clone()).unwrap();
        let out = observable_behavior(&circuit, DEFAULT_TOL).unwrap();
        worst = worst.max(out.max_abs_diff(&target).unwrap());
    }
    Outcome {
        passed: worst <= EXACT_TOL,
        detail: format!("50 random no-signaling boxes, worst deviation {worst:.2e}"),
    }
}

fn deviations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let circuit = pr_ctc_circuit();
    let w = PartyWires::BINARY;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..300 {
        let (a, b) = if i < 200 {
            (
                PartyOp::random_deterministic(w, &mut rng),
                PartyOp::random_deterministic(w, &mut rng),
            )
        } else {
            (
                PartyOp::random_stochastic(w, &mut rng),
                PartyOp::random_stochastic(w, &mut rng),
            )
        };
        match observable_behavior(
            &circuit.with_ops(a.unwrap(), b.unwrap()).unwrap(),
            DEFAULT_TOL,
        ) {
            Ok(beh) => worst = worst.max(is_no_signaling(&beh, EXACT_TOL).max_deviation()),
            Err(_) => failures += 1,
        }
    }
    Outcome {
        passed: failures == 0 && worst <= EXACT_TOL,
        detail: format!("200 deterministic + 100 stochastic, worst signaling {worst:.2e}, solver failures {failures}"),
    }
}

fn max_entropy_selection() -> Outcome {
    let mut worst_uniform: f64 = 0.0;
    let mut worst_entropy: f64 = 0.0;
    for n in 2..=16 {
        let alpha = Alphabet::new(n).unwrap();
        let d = max_entropy_fixed_point(&Channel::identity(alpha.clone()), DEFAULT_TOL).unwrap();
        worst_uniform = worst_uniform.max(d.max_abs_diff(&Dist::uniform(alpha)).unwrap());
        worst_entropy = worst_entropy.max((d.entropy() - (n as f64).log2()).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut beaten = 0;
    let mut worst_oracle: f64 = 0.0;
    for i in 0..100 {
        let classes: Vec<usize> = (0..2 + i % 3).map(|_| rng.random_range(1..5)).collect();
        let (m, pis) = degenerate_map(&mut rng, &classes, i % 3);
        let best = solve_max_entropy(&m, DEFAULT_TOL, None)
            .unwrap()
            .dist
            .entropy();
        worst_oracle = worst_oracle.max((best - closed_form_max_entropy(&pis)).abs());
        for _ in 0..50 {
            if entropy(&mix(&pis, &simplex(&mut rng, pis.len()))) > best + 1e-9 {
                beaten += 1;
            }
        }
    }
    Outcome {
        passed: worst_uniform <= UNIFORM_TOL && worst_entropy <= ENTROPY_TOL && beaten == 0 && worst_oracle <= ENTROPY_TOL,
        detail: format!(
            "identity sizes 2-16: uniform err {worst_uniform:.1e}, entropy err {worst_entropy:.1e}; \
             100 degenerate maps: {beaten} of 5000 feasible points beat the maximizer, closed-form err {worst_oracle:.1e}"
        ),
    }
}

fn singlet() -> Outcome {
    let grid = AngleGrid::uniform(12).unwrap();
    let tb = singlet_summary(Protocol::TonerBacon, &grid, SINGLET_SAMPLES, 7);
    let pr = singlet_summary(Protocol::PrAssisted, &grid, SINGLET_SAMPLES, 7);
    Outcome {
        passed: tb.max_deviation <= SINGLET_BOUND && pr.max_deviation <= SINGLET_BOUND,
        detail: format!(
            "12 directions x 1e6: Toner-Bacon max dev {:.4}, PR-assisted max dev {:.4}",
            tb.max_deviation, pr.max_deviation
        ),
    }
}

fn hidden_influence_check() -> Outcome {
    let uniform = Dist::uniform(Alphabet::new(4).unwrap());
    let pr = hidden_influence(&md_from_target(&pr_box()), &uniform).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_mi: f64 = 0.0;
    for _ in 0..20 {
        let model = random_md_model(&mut rng, Scenario::BINARY, 6, true).unwrap();
        worst_mi = worst_mi.max(hidden_influence(&model, &uniform).unwrap().abs());
    }
    Outcome {
        passed: pr > HIDDEN_INFLUENCE_FLOOR
            && (pr - PR_HIDDEN_INFLUENCE).abs() <= 1e-12
            && worst_mi <= MI_ZERO_TOL,
        detail: format!("PR model {pr:.16} bits, measurement-independent max {worst_mi:.1e}"),
    }
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "PR box via CTC", s(1), pr_via_ctc),
        criterion(2, "classical CHSH bound", s(5), classical_bound),
        criterion(3, "quantum point", s(1), quantum_point),
        criterion(4, "universality", s(10), universality),
        criterion(5, "no-signaling preservation", s(30), deviations),
        criterion(6, "max-entropy selection", s(30), max_entropy_selection),
        criterion(7, "singlet Monte Carlo", s(60), singlet),
        criterion(8, "hidden influence", s(1), hidden_influence_check),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len());
}
