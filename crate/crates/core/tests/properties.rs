use ctc_boxlab::boxworld::{
    chsh_success, deterministic_box, is_bell_local, is_no_signaling, isotropic_chsh_box,
    random_local_behavior, random_ns_behavior, Behavior, Scenario,
};
use ctc_boxlab::ctc_circuits::{
    observable_behavior, pr_ctc_circuit, swap_op, CtcCircuit, PartyOp, PartyWires,
};
use ctc_boxlab::ctc_engine::{
    fixed_point_residual, fixed_point_set, solve_max_entropy, DEFAULT_TOL,
};
use ctc_boxlab::prob::{Alphabet, Channel, Dist};
use ctc_boxlab::zigzag::{hidden_influence, md_behavior, md_from_target, random_md_model};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{closed_form_max_entropy, degenerate_map, entropy, mix, simplex};

fn weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, 1..max_len)
        .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-6)
        .prop_map(normalized)
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

proptest! {
    #[test]
    fn construction_normalizes(w in weights(12)) {
        let d = Dist::from_weights(w).unwrap();
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.weights().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn uniform_entropy_is_log_size(n in 1usize..64) {
        let d = Dist::uniform(Alphabet::new(n).unwrap());
        prop_assert!((d.entropy() - (n as f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_bounded(w in weights(16)) {
        let d = Dist::from_weights(w).unwrap();
        let h = d.entropy();
        prop_assert!(h >= 0.0 && h <= (d.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn product_has_no_mutual_information(a in weights(6), b in weights(6)) {
        let d1 = Dist::from_weights(a).unwrap();
        let d2 = Dist::from_weights(b).unwrap();
        let joint = d1.tensor(&d2);
        prop_assert!(joint.mutual_information().unwrap().abs() < 1e-10);
        prop_assert!(joint.marginal(&[0]).unwrap().max_abs_diff(&d1).unwrap() < 1e-12);
        prop_assert!(joint.marginal(&[1]).unwrap().max_abs_diff(&d2).unwrap() < 1e-12);
        prop_assert!((joint.entropy() - d1.entropy() - d2.entropy()).abs() < 1e-10);
    }

    #[test]
    fn mutual_information_is_symmetric_and_bounded(w in prop::collection::vec(0.01f64..1.0, 12).prop_map(normalized)) {
        let joint = Dist::new(Alphabet::product_of(&[3, 4]).unwrap(), w.clone()).unwrap();
        let mut swapped = vec![0.0; 12];
        for i in 0..3 {
            for j in 0..4 {
                swapped[j * 3 + i] = w[i * 4 + j];
            }
        }
        let swapped = Dist::new(Alphabet::product_of(&[4, 3]).unwrap(), swapped).unwrap();
        let mi = joint.mutual_information().unwrap();
        prop_assert!((mi - swapped.mutual_information().unwrap()).abs() < 1e-12);
        prop_assert!(mi >= -1e-12 && mi <= 3f64.log2() + 1e-12);
    }

    #[test]
    fn channels_preserve_normalization(seed in any::<u64>(), n_in in 1usize..6, n_out in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..n_in).map(|_| simplex(&mut rng, n_out)).collect();
        let c = Channel::from_columns(Alphabet::new(n_in).unwrap(), Alphabet::new(n_out).unwrap(), cols).unwrap();
        let d = Dist::from_weights(simplex(&mut rng, n_in)).unwrap();
        let out = c.apply(&d).unwrap();
        prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(Channel::from_json(&c.to_json()).unwrap().stochasticity_error() < 1e-12);
    }

    #[test]
    fn isotropic_score_is_p(p in 0.0f64..=1.0) {
        let beh = isotropic_chsh_box(p).unwrap();
        prop_assert!((chsh_success(&beh).unwrap() - p).abs() < 1e-12);
        prop_assert!(is_no_signaling(&beh, 1e-12).holds);
    }
}

#[test]
fn locality_certificates_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let beh = random_ns_behavior(&mut rng);
        let cert = is_bell_local(&beh, 1e-9).unwrap();
        if cert.is_local {
            let rebuilt = cert.reconstruct(beh.scenario()).unwrap();
            assert!(rebuilt.max_abs_diff(&beh).unwrap() <= 1e-7);
            assert!(chsh_success(&beh).unwrap() <= 0.75 + 1e-9);
        } else {
            assert!(cert.violation_gap > 0.0);
        }
    }
}

#[test]
fn random_local_mixtures_are_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let scenarios = [
        Scenario::BINARY,
        Scenario::new(3, 2, 2, 3).unwrap(),
        Scenario::new(2, 3, 3, 2).unwrap(),
    ];
    for i in 0..200 {
        let s = scenarios[i % scenarios.len()];
        let beh = random_local_behavior(&mut rng, s, 1 + i % 7);
        let cert = is_bell_local(&beh, 1e-9).unwrap();
        assert!(
            cert.is_local,
            "mixture {i} rejected, gap {}",
            cert.violation_gap
        );
        let rebuilt = cert.reconstruct(s).unwrap();
        assert!(rebuilt.max_abs_diff(&beh).unwrap() <= 1e-7);
    }
}

#[test]
fn behavior_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let beh = random_ns_behavior(&mut rng);
        let back = Behavior::from_json(&beh.to_json()).unwrap();
        assert!(back.max_abs_diff(&beh).unwrap() < 1e-15);
    }
}

fn random_channel(rng: &mut impl Rng, n: usize) -> Channel {
    let cols = (0..n).map(|_| simplex(rng, n)).collect();
    Channel::from_columns(Alphabet::new(n).unwrap(), Alphabet::new(n).unwrap(), cols).unwrap()
}

#[test]
fn every_stochastic_map_has_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for i in 0..500 {
        let n = 1 + i % 12;
        let m = random_channel(&mut rng, n);
        let set = fixed_point_set(&m, DEFAULT_TOL).unwrap();
        assert!(
            fixed_point_residual(&m, set.vertex.weights()) <= 1e-9,
            "map {i}"
        );
    }
}

#[test]
fn max_entropy_dominates_and_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for i in 0..100 {
        let classes: Vec<usize> = (0..2 + i % 3).map(|_| rng.random_range(1..5)).collect();
        let (m, pis) = degenerate_map(&mut rng, &classes, i % 3);
        let sol = solve_max_entropy(&m, DEFAULT_TOL, None).unwrap();
        assert_eq!(sol.fp_space_dim, classes.len() - 1);
        let best = sol.dist.entropy();

        let oracle = closed_form_max_entropy(&pis);
        assert!((best - oracle).abs() < 1e-7, "map {i}: {best} vs {oracle}");

        for _ in 0..50 {
            let c = simplex(&mut rng, pis.len());
            let point = mix(&pis, &c);
            assert!(fixed_point_residual(&m, &point) < 1e-9);
            assert!(best >= entropy(&point) - 1e-9);
        }
    }
}

#[test]
fn max_entropy_is_start_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..30 {
        let (m, pis) = degenerate_map(&mut rng, &[3, 2, 2], 1);
        let starts: Vec<Vec<f64>> = (0..2)
            .map(|_| mix(&pis, &simplex(&mut rng, pis.len())))
            .collect();
        let a = solve_max_entropy(&m, DEFAULT_TOL, Some(&starts[0])).unwrap();
        let b = solve_max_entropy(&m, DEFAULT_TOL, Some(&starts[1])).unwrap();
        assert!(a.dist.max_abs_diff(&b.dist).unwrap() < 1e-7);
    }
}

#[test]
fn ctc_construction_is_universal() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let swap = swap_op(PartyWires::BINARY).unwrap();
    for _ in 0..50 {
        let target = random_ns_behavior(&mut rng);
        let circuit = CtcCircuit::new(swap.clone(), swap.clone(), target.clone()).unwrap();
        let out = observable_behavior(&circuit, DEFAULT_TOL).unwrap();
        assert!(out.max_abs_diff(&target).unwrap() <= 1e-9);
    }
}

#[test]
fn deviations_never_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let circuit = pr_ctc_circuit();
    let w = PartyWires::BINARY;
    for i in 0..300 {
        let (alice, bob) = if i < 200 {
            (
                PartyOp::random_deterministic(w, &mut rng).unwrap(),
                PartyOp::random_deterministic(w, &mut rng).unwrap(),
            )
        } else {
            (
                PartyOp::random_stochastic(w, &mut rng).unwrap(),
                PartyOp::random_stochastic(w, &mut rng).unwrap(),
            )
        };
        let beh = observable_behavior(&circuit.with_ops(alice, bob).unwrap(), DEFAULT_TOL).unwrap();
        let report = is_no_signaling(&beh, 1e-9);
        assert!(report.holds, "deviation {i}: {}", report.max_deviation());
    }
}

#[test]
fn swap_circuit_ctc_is_open() {
    // the value sent back is never fed forward again: ε only moves v into the future box
    let circuit = pr_ctc_circuit();
    for x in 0..2 {
        for y in 0..2 {
            let inst = circuit.compile(x, y).unwrap();
            let nr = inst.r_alphabet().size();
            let nv = inst.v_alphabet().size();
            for r_in in 0..nr {
                for v_in in 0..nv {
                    for r_out in 0..nr {
                        for v_out in 0..nv {
                            let p = inst.transition(r_out, v_out, r_in, v_in);
                            assert_eq!(p, inst.transition(r_out, v_out, 0, v_in));
                            // the swap sends (x, y) forward as the future-box inputs,
                            // so the outputs (a, b) equal the incoming CTC value
                            if r_out != v_in {
                                assert_eq!(p, 0.0);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn deterministic_boxes_through_ctc() {
    let swap = swap_op(PartyWires::BINARY).unwrap();
    for f in 0..4 {
        for g in 0..4 {
            let target = deterministic_box(&[f & 1, f >> 1], &[g & 1, g >> 1], 2, 2).unwrap();
            let circuit = CtcCircuit::new(swap.clone(), swap.clone(), target.clone()).unwrap();
            assert!(observable_behavior(&circuit, DEFAULT_TOL)
                .unwrap()
                .approx_eq(&target, 1e-9));
        }
    }
}

#[test]
fn md_construction_is_universal() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for i in 0..50 {
        let s = Scenario::new(2 + i % 2, 2, 2 + i % 3, 2).unwrap();
        // arbitrary conditional tables, signaling ones included
        let table: Vec<f64> = (0..s.x * s.y)
            .flat_map(|_| simplex(&mut rng, s.a * s.b))
            .collect();
        let target = Behavior::new(s, table).unwrap();
        let out = md_behavior(&md_from_target(&target)).unwrap();
        assert!(out.max_abs_diff(&target).unwrap() <= 1e-12);
    }
}

#[test]
fn measurement_independent_models_are_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let uniform = Dist::uniform(Alphabet::new(4).unwrap());
    for _ in 0..30 {
        let model = random_md_model(&mut rng, Scenario::BINARY, 4, true).unwrap();
        let beh = md_behavior(&model).unwrap();
        let cert = is_bell_local(&beh, 1e-9).unwrap();
        assert!(cert.is_local);
        assert!(
            cert.reconstruct(Scenario::BINARY)
                .unwrap()
                .max_abs_diff(&beh)
                .unwrap()
                <= 1e-7
        );
        assert!(hidden_influence(&model, &uniform).unwrap().abs() <= 1e-12);
    }
}

#[test]
fn ctc_construction_is_universal_beyond_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let alice = PartyWires {
        input: 3,
        ctc: 2,
        output: 2,
        future: 3,
    };
    let bob = PartyWires {
        input: 2,
        ctc: 3,
        output: 3,
        future: 2,
    };
    let scenario = Scenario::new(3, 2, 2, 3).unwrap();
    for i in 0..20 {
        let target = random_local_behavior(&mut rng, scenario, 1 + i % 5);
        let circuit = CtcCircuit::new(
            swap_op(alice).unwrap(),
            swap_op(bob).unwrap(),
            target.clone(),
        )
        .unwrap();
        let out = observable_behavior(&circuit, DEFAULT_TOL).unwrap();
        assert!(out.max_abs_diff(&target).unwrap() <= 1e-9);
    }
}
