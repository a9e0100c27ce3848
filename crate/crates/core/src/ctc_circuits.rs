//! Two parties, a box in their common future, and a CTC carrying the box
//! outputs back to the parties.
//!
//! Alice's operation reads her input `x` and the CTC wire `λ1`, and writes
//! her output `a` and a message `m1` toward the common future (Bob likewise
//! with `y`, `λ2`, `b`, `m2`). The future box maps `(m1, m2)` to
//! `(λ1', λ2')`, which travel back and become `(λ1, λ2)`. The curve is open:
//! `V = (Λ1, Λ2)` never interacts with its own later copy except through the
//! party operations and the box.
//!
//! Inputs are exogenous: each `(x, y)` compiles to its own [`CtcInstance`]
//! with `R = A × B`. The pre-evolution content of `R` is a placeholder point
//! mass on `(0, 0)` that `ε` ignores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boxworld::{is_no_signaling, Behavior, NoSignalingReport, Scenario};
use crate::ctc_engine::{evolve, CtcInstance, FixedPointReport};
use crate::error::{Error, Result};
use crate::prob::{Alphabet, Channel, Dist};

/// Alphabet sizes of the four wires touching one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyWires {
    /// Classical input (`x` or `y`).
    pub input: usize,
    /// Wire arriving from the CTC (`λ1` or `λ2`).
    pub ctc: usize,
    /// Classical output (`a` or `b`).
    pub output: usize,
    /// Message toward the common future (`m1` or `m2`).
    pub future: usize,
}

impl PartyWires {
    pub const BINARY: PartyWires = PartyWires {
        input: 2,
        ctc: 2,
        output: 2,
        future: 2,
    };

    fn validate(&self) -> Result<()> {
        if [self.input, self.ctc, self.output, self.future].contains(&0) {
            return Err(Error::EmptyAlphabet);
        }
        Ok(())
    }

    fn in_alphabet(&self) -> Alphabet {
        Alphabet::product_of(&[self.input, self.ctc]).expect("validated sizes")
    }

    fn out_alphabet(&self) -> Alphabet {
        Alphabet::product_of(&[self.output, self.future]).expect("validated sizes")
    }
}

/// A party's local operation `P(out, fut | in, ctc)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartyOpRepr", into = "PartyOpRepr")]
pub struct PartyOp {
    wires: PartyWires,
    channel: Channel,
}

#[derive(Serialize, Deserialize)]
struct PartyOpRepr {
    wires: PartyWires,
    channel: Channel,
}

impl TryFrom<PartyOpRepr> for PartyOp {
    type Error = Error;

    fn try_from(r: PartyOpRepr) -> Result<Self> {
        PartyOp::new(r.wires, r.channel)
    }
}

impl From<PartyOp> for PartyOpRepr {
    fn from(op: PartyOp) -> Self {
        PartyOpRepr {
            wires: op.wires,
            channel: op.channel,
        }
    }
}

impl PartyOp {
    /// `channel` maps `(input, ctc)` to `(output, future)`, first factor slowest.
    pub fn new(wires: PartyWires, channel: Channel) -> Result<Self> {
        wires.validate()?;
        if channel.input().size() != wires.input * wires.ctc
            || channel.output().size() != wires.output * wires.future
        {
            return Err(Error::AlphabetMismatch(
                "party channel does not match its wire sizes".into(),
            ));
        }
        let channel = Channel::from_fn(wires.in_alphabet(), wires.out_alphabet(), |o, i| {
            channel.entry(o, i)
        })?;
        Ok(Self { wires, channel })
    }

    /// Deterministic operation `(input, ctc) -> (output, future)`.
    pub fn from_fn(wires: PartyWires, f: impl Fn(usize, usize) -> (usize, usize)) -> Result<Self> {
        wires.validate()?;
        let mut targets = Vec::with_capacity(wires.input * wires.ctc);
        for inp in 0..wires.input {
            for ctc in 0..wires.ctc {
                let (out, fut) = f(inp, ctc);
                if out >= wires.output {
                    return Err(Error::OutOfRange {
                        name: "party output",
                        value: out as f64,
                    });
                }
                if fut >= wires.future {
                    return Err(Error::OutOfRange {
                        name: "future message",
                        value: fut as f64,
                    });
                }
                targets.push(out * wires.future + fut);
            }
        }
        let channel =
            Channel::deterministic(wires.in_alphabet(), wires.out_alphabet(), |i| targets[i])?;
        Ok(Self { wires, channel })
    }

    /// Uniformly random deterministic operation.
    pub fn random_deterministic<R: Rng + ?Sized>(wires: PartyWires, rng: &mut R) -> Result<Self> {
        wires.validate()?;
        let table: Vec<(usize, usize)> = (0..wires.input * wires.ctc)
            .map(|_| {
                (
                    rng.random_range(0..wires.output),
                    rng.random_range(0..wires.future),
                )
            })
            .collect();
        Self::from_fn(wires, |i, l| table[i * wires.ctc + l])
    }

    /// Operation with independent flat-Dirichlet columns.
    pub fn random_stochastic<R: Rng + ?Sized>(wires: PartyWires, rng: &mut R) -> Result<Self> {
        wires.validate()?;
        let columns = (0..wires.input * wires.ctc)
            .map(|_| crate::boxworld::random_simplex_point(rng, wires.output * wires.future))
            .collect();
        let channel = Channel::from_columns(wires.in_alphabet(), wires.out_alphabet(), columns)?;
        Ok(Self { wires, channel })
    }

    pub fn wires(&self) -> PartyWires {
        self.wires
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    /// `P(out, fut | inp, ctc)`.
    pub fn prob(&self, out: usize, fut: usize, inp: usize, ctc: usize) -> f64 {
        self.channel
            .entry(out * self.wires.future + fut, inp * self.wires.ctc + ctc)
    }
}

/// Output takes the CTC value, the future message takes the input.
pub fn swap_op(wires: PartyWires) -> Result<PartyOp> {
    if wires.output != wires.ctc || wires.future != wires.input {
        return Err(Error::AlphabetMismatch(format!(
            "swap needs output = ctc ({} vs {}) and future = input ({} vs {})",
            wires.output, wires.ctc, wires.future, wires.input
        )));
    }
    PartyOp::from_fn(wires, |inp, ctc| (ctc, inp))
}

/// The full setup: two party operations and the common-future box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CtcCircuitRepr", into = "CtcCircuitRepr")]
pub struct CtcCircuit {
    alice: PartyOp,
    bob: PartyOp,
    future_box: Behavior,
}

#[derive(Serialize, Deserialize)]
struct CtcCircuitRepr {
    alice: PartyOp,
    bob: PartyOp,
    future_box: Behavior,
}

impl TryFrom<CtcCircuitRepr> for CtcCircuit {
    type Error = Error;

    fn try_from(r: CtcCircuitRepr) -> Result<Self> {
        CtcCircuit::new(r.alice, r.bob, r.future_box)
    }
}

impl From<CtcCircuit> for CtcCircuitRepr {
    fn from(c: CtcCircuit) -> Self {
        CtcCircuitRepr {
            alice: c.alice,
            bob: c.bob,
            future_box: c.future_box,
        }
    }
}

impl CtcCircuit {
    /// The box takes `(m1, m2)` as inputs and returns `(λ1', λ2')`.
    pub fn new(alice: PartyOp, bob: PartyOp, future_box: Behavior) -> Result<Self> {
        let s = future_box.scenario();
        let (aw, bw) = (alice.wires, bob.wires);
        if s.x != aw.future || s.y != bw.future || s.a != aw.ctc || s.b != bw.ctc {
            return Err(Error::AlphabetMismatch(format!(
                "future box {}x{} -> {}x{} does not match messages {}x{} and CTC wires {}x{}",
                s.x, s.y, s.a, s.b, aw.future, bw.future, aw.ctc, bw.ctc
            )));
        }
        Ok(Self {
            alice,
            bob,
            future_box,
        })
    }

    pub fn alice(&self) -> &PartyOp {
        &self.alice
    }

    pub fn bob(&self) -> &PartyOp {
        &self.bob
    }

    pub fn future_box(&self) -> &Behavior {
        &self.future_box
    }

    /// Scenario of the observable behavior `P(a, b | x, y)`.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            x: self.alice.wires.input,
            y: self.bob.wires.input,
            a: self.alice.wires.output,
            b: self.bob.wires.output,
        }
    }

    /// Same box, different party operations; the wires must match.
    pub fn with_ops(&self, alice: PartyOp, bob: PartyOp) -> Result<Self> {
        if alice.wires != self.alice.wires || bob.wires != self.bob.wires {
            return Err(Error::AlphabetMismatch(
                "replacement operations must use the same wires".into(),
            ));
        }
        Self::new(alice, bob, self.future_box.clone())
    }

    /// Builds the CTC instance for fixed inputs `(x, y)`.
    ///
    /// `ε((a, b), (λ1', λ2') | r, (λ1, λ2)) =
    ///   Σ_{m1, m2} A(a, m1 | x, λ1) · B(b, m2 | y, λ2) · box(λ1', λ2' | m1, m2)`,
    /// the same for every `r`.
    pub fn compile(&self, x: usize, y: usize) -> Result<CtcInstance> {
        let (aw, bw) = (self.alice.wires, self.bob.wires);
        if x >= aw.input {
            return Err(Error::OutOfRange {
                name: "x",
                value: x as f64,
            });
        }
        if y >= bw.input {
            return Err(Error::OutOfRange {
                name: "y",
                value: y as f64,
            });
        }
        let r = Alphabet::product_of(&[aw.output, bw.output])?;
        let v = Alphabet::product_of(&[aw.ctc, bw.ctc])?;
        let joint = r.product(&v);
        let (nr, nv) = (r.size(), v.size());

        // One column per V value; R's content does not enter.
        let mut v_columns = Vec::with_capacity(nv);
        for l1 in 0..aw.ctc {
            for l2 in 0..bw.ctc {
                let mut col = vec![0.0; nr * nv];
                for a in 0..aw.output {
                    for m1 in 0..aw.future {
                        let pa = self.alice.prob(a, m1, x, l1);
                        if pa == 0.0 {
                            continue;
                        }
                        for b in 0..bw.output {
                            for m2 in 0..bw.future {
                                let pb = self.bob.prob(b, m2, y, l2);
                                if pb == 0.0 {
                                    continue;
                                }
                                let r_out = a * bw.output + b;
                                for (v_out, &pbox) in
                                    self.future_box.block(m1, m2).iter().enumerate()
                                {
                                    col[r_out * nv + v_out] += pa * pb * pbox;
                                }
                            }
                        }
                    }
                }
                v_columns.push(col);
            }
        }
        let columns: Vec<Vec<f64>> = (0..nr * nv).map(|i| v_columns[i % nv].clone()).collect();
        let epsilon = Channel::from_columns(joint.clone(), joint, columns)?;
        CtcInstance::new(r.clone(), v, epsilon, Dist::point(r, 0)?)
    }
}

/// The PR-box setup: binary wires, swaps on both sides, PR box in the future.
pub fn pr_ctc_circuit() -> CtcCircuit {
    let swap = swap_op(PartyWires::BINARY).expect("binary swap");
    CtcCircuit::new(swap.clone(), swap, crate::boxworld::pr_box()).expect("binary wiring")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRun {
    pub x: usize,
    pub y: usize,
    pub report: FixedPointReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRun {
    pub runs: Vec<InputRun>,
    pub behavior: Behavior,
}

/// Evolves one input pair.
pub fn run_inputs(circuit: &CtcCircuit, x: usize, y: usize, tol: f64) -> Result<InputRun> {
    let report = evolve(&circuit.compile(x, y)?, tol)?;
    Ok(InputRun { x, y, report })
}

/// Evolves every input pair and assembles `P(a, b | x, y)` from the final
/// states of `R`.
pub fn run_circuit(circuit: &CtcCircuit, tol: f64) -> Result<CircuitRun> {
    let s = circuit.scenario();
    let pairs: Vec<(usize, usize)> = (0..s.x)
        .flat_map(|x| (0..s.y).map(move |y| (x, y)))
        .collect();

    #[cfg(feature = "parallel")]
    let runs: Result<Vec<InputRun>> = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|&(x, y)| run_inputs(circuit, x, y, tol))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Result<Vec<InputRun>> = pairs
        .iter()
        .map(|&(x, y)| run_inputs(circuit, x, y, tol))
        .collect();

    let runs = runs?;
    let table: Vec<f64> = runs
        .iter()
        .flat_map(|run| run.report.final_r.weights().iter().copied())
        .collect();
    let behavior = Behavior::new(s, table)?;
    Ok(CircuitRun { runs, behavior })
}

/// The behavior the parties observe.
pub fn observable_behavior(circuit: &CtcCircuit, tol: f64) -> Result<Behavior> {
    run_circuit(circuit, tol).map(|run| run.behavior)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub behavior: Behavior,
    pub no_signaling: NoSignalingReport,
}

/// Replaces both party operations and checks whether the result signals.
pub fn deviation_test(
    circuit: &CtcCircuit,
    alice_alt: PartyOp,
    bob_alt: PartyOp,
    tol: f64,
) -> Result<DeviationReport> {
    let deviated = circuit.with_ops(alice_alt, bob_alt)?;
    let behavior = observable_behavior(&deviated, tol)?;
    let no_signaling = is_no_signaling(&behavior, tol);
    Ok(DeviationReport {
        behavior,
        no_signaling,
    })
}
