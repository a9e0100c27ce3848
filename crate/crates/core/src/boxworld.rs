//! Bipartite behaviors `P(a, b | x, y)`: the PR box, no-signaling checks,
//! Bell-locality by linear programming and CHSH scoring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::prob::{normalize_weights, VALIDATION_TOL};

/// Default cap on the number of deterministic strategy pairs an LP may use.
pub const DEFAULT_STRATEGY_CAP: u128 = 1_000_000;

/// Largest elementwise mismatch accepted when replaying a locality certificate.
pub const CERTIFICATE_REPLAY_TOL: f64 = 1e-7;

/// Input and output alphabet sizes of a bipartite behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

impl Scenario {
    pub const BINARY: Scenario = Scenario {
        x: 2,
        y: 2,
        a: 2,
        b: 2,
    };

    pub fn new(x: usize, y: usize, a: usize, b: usize) -> Result<Self> {
        if [x, y, a, b].contains(&0) {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self { x, y, a, b })
    }

    pub fn table_len(&self) -> usize {
        self.x * self.y * self.a * self.b
    }

    /// Flat index of `(x, y, a, b)`, row-major.
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.y + y) * self.a + a) * self.b + b
    }

    pub fn is_binary(&self) -> bool {
        *self == Self::BINARY
    }

    /// Number of deterministic strategy pairs, `|A|^|X| · |B|^|Y|`, saturating.
    pub fn strategy_count(&self) -> u128 {
        let pow = |base: usize, exp: usize| {
            (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base as u128))
        };
        pow(self.a, self.x)
            .zip(pow(self.b, self.y))
            .and_then(|(l, r)| l.checked_mul(r))
            .unwrap_or(u128::MAX)
    }

    /// Decodes strategy pair `index` into response tables `(f, g)`.
    ///
    /// Alice's table is the slow part of the index; within a table, input 0
    /// is the most significant digit.
    pub fn strategy(&self, index: usize) -> (Vec<usize>, Vec<usize>) {
        let bob_count = self.b.pow(self.y as u32);
        let decode = |mut code: usize, base: usize, len: usize| {
            let mut table = vec![0; len];
            for slot in table.iter_mut().rev() {
                *slot = code % base;
                code /= base;
            }
            table
        };
        (
            decode(index / bob_count, self.a, self.x),
            decode(index % bob_count, self.b, self.y),
        )
    }
}

/// A bipartite conditional distribution `P(a, b | x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BehaviorRepr", into = "BehaviorRepr")]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BehaviorRepr {
    x: usize,
    y: usize,
    a: usize,
    b: usize,
    table: Vec<f64>,
}

impl TryFrom<BehaviorRepr> for Behavior {
    type Error = Error;

    fn try_from(r: BehaviorRepr) -> Result<Self> {
        Behavior::new(Scenario::new(r.x, r.y, r.a, r.b)?, r.table)
    }
}

impl From<Behavior> for BehaviorRepr {
    fn from(beh: Behavior) -> Self {
        let Scenario { x, y, a, b } = beh.scenario;
        BehaviorRepr {
            x,
            y,
            a,
            b,
            table: beh.table,
        }
    }
}

impl Behavior {
    /// Validates a table in `(x, y, a, b)` row-major order; each `(x, y)`
    /// block must be a distribution.
    pub fn new(scenario: Scenario, mut table: Vec<f64>) -> Result<Self> {
        if table.len() != scenario.table_len() {
            return Err(Error::LengthMismatch {
                expected: scenario.table_len(),
                actual: table.len(),
            });
        }
        let block = scenario.a * scenario.b;
        for (i, chunk) in table.chunks_mut(block).enumerate() {
            normalize_weights(chunk).map_err(|e| match e {
                Error::NegativeWeight { index, value } => Error::NegativeWeight {
                    index: i * block + index,
                    value,
                },
                Error::NonFinite { index } => Error::NonFinite {
                    index: i * block + index,
                },
                other => other,
            })?;
        }
        Ok(Self { scenario, table })
    }

    pub fn from_fn(
        scenario: Scenario,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(scenario.table_len());
        for x in 0..scenario.x {
            for y in 0..scenario.y {
                for a in 0..scenario.a {
                    for b in 0..scenario.b {
                        table.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(scenario, table)
    }

    /// Convex combination `Σ w_i B_i`; weights are normalized first.
    pub fn mixture(parts: &[(f64, &Behavior)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        })?;
        let scenario = first.1.scenario;
        let mut weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        normalize_weights(&mut weights)?;
        let mut table = vec![0.0; scenario.table_len()];
        for (w, (_, beh)) in weights.iter().zip(parts) {
            if beh.scenario != scenario {
                return Err(Error::AlphabetMismatch(
                    "mixture parts have different scenarios".into(),
                ));
            }
            for (t, &p) in table.iter_mut().zip(&beh.table) {
                *t += w * p;
            }
        }
        Self::new(scenario, table)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.table[self.scenario.index(x, y, a, b)]
    }

    /// Joint output distribution for inputs `(x, y)`, indexed `a * |B| + b`.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.scenario.index(x, y, 0, 0);
        &self.table[start..start + self.scenario.a * self.scenario.b]
    }

    pub fn max_abs_diff(&self, other: &Behavior) -> Option<f64> {
        (self.scenario == other.scenario).then(|| {
            self.table
                .iter()
                .zip(&other.table)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        })
    }

    /// Elementwise equality within `tol`.
    pub fn approx_eq(&self, other: &Behavior, tol: f64) -> bool {
        self.max_abs_diff(other).is_some_and(|d| d <= tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("Behavior serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// CSV with header `x,y,a,b,p`, one row per table entry.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let s = self.scenario;
        for x in 0..s.x {
            for y in 0..s.y {
                for a in 0..s.a {
                    for b in 0..s.b {
                        w.serialize(TableRow {
                            x,
                            y,
                            a,
                            b,
                            p: self.get(x, y, a, b),
                        })
                        .expect("in-memory CSV write");
                    }
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
    }

    /// Reads the [`Behavior::to_csv`] format. Rows may come in any order but
    /// every `(x, y, a, b)` cell must appear exactly once; alphabet sizes
    /// are one past the largest index seen.
    pub fn from_csv(s: &str) -> Result<Self> {
        let rows: Vec<TableRow> = csv::Reader::from_reader(s.as_bytes())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Table(e.to_string()))?;
        let size = |f: fn(&TableRow) -> usize| rows.iter().map(f).max().map_or(0, |m| m + 1);
        let scenario = Scenario::new(size(|r| r.x), size(|r| r.y), size(|r| r.a), size(|r| r.b))?;
        if rows.len() != scenario.table_len() {
            return Err(Error::Table(format!(
                "{} rows for a table of {} cells",
                rows.len(),
                scenario.table_len()
            )));
        }
        let mut table = vec![f64::NAN; scenario.table_len()];
        for r in &rows {
            let cell = &mut table[scenario.index(r.x, r.y, r.a, r.b)];
            if !cell.is_nan() {
                return Err(Error::Table(format!(
                    "duplicate cell ({}, {}, {}, {})",
                    r.x, r.y, r.a, r.b
                )));
            }
            *cell = r.p;
        }
        Behavior::new(scenario, table)
    }
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    x: usize,
    y: usize,
    a: usize,
    b: usize,
    p: f64,
}

/// `P(a, b | x, y) = 1/2` iff `a ⊕ b = x·y`.
pub fn pr_box() -> Behavior {
    pr_box_variant(0, 0, 0)
}

/// The PR-type vertex `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ` of the binary
/// no-signaling polytope.
pub fn pr_box_variant(alpha: usize, beta: usize, gamma: usize) -> Behavior {
    Behavior::from_fn(Scenario::BINARY, |x, y, a, b| {
        let target = (x * y) ^ (alpha & x) ^ (beta & y) ^ (gamma & 1);
        if a ^ b == target {
            0.5
        } else {
            0.0
        }
    })
    .expect("PR table is normalized")
}

/// `P(a, b | x, y) = [a = f(x)]·[b = g(y)]`.
pub fn deterministic_box(
    f: &[usize],
    g: &[usize],
    a_size: usize,
    b_size: usize,
) -> Result<Behavior> {
    let scenario = Scenario::new(f.len(), g.len(), a_size, b_size)?;
    if let Some(&v) = f.iter().find(|&&v| v >= a_size) {
        return Err(Error::OutOfRange {
            name: "alice response",
            value: v as f64,
        });
    }
    if let Some(&v) = g.iter().find(|&&v| v >= b_size) {
        return Err(Error::OutOfRange {
            name: "bob response",
            value: v as f64,
        });
    }
    Behavior::from_fn(
        scenario,
        |x, y, a, b| {
            if a == f[x] && b == g[y] {
                1.0
            } else {
                0.0
            }
        },
    )
}

/// Binary box winning the CHSH game with probability `p` on every input pair.
pub fn isotropic_chsh_box(p: f64) -> Result<Behavior> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
        });
    }
    Behavior::from_fn(Scenario::BINARY, |x, y, a, b| {
        if a ^ b == x * y {
            p / 2.0
        } else {
            (1.0 - p) / 2.0
        }
    })
}

/// The 24 vertices of the binary no-signaling polytope: 16 deterministic
/// boxes followed by 8 PR-type boxes.
pub fn binary_ns_vertices() -> Vec<Behavior> {
    let mut out: Vec<Behavior> = (0..16)
        .map(|s| {
            let (f, g) = Scenario::BINARY.strategy(s);
            deterministic_box(&f, &g, 2, 2).expect("binary strategy")
        })
        .collect();
    for alpha in 0..2 {
        for beta in 0..2 {
            for gamma in 0..2 {
                out.push(pr_box_variant(alpha, beta, gamma));
            }
        }
    }
    out
}

/// Flat Dirichlet weights.
pub(crate) fn random_simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// A random mixture of binary no-signaling vertices.
pub fn random_ns_behavior<R: Rng + ?Sized>(rng: &mut R) -> Behavior {
    let vertices = binary_ns_vertices();
    let weights = random_simplex_point(rng, vertices.len());
    let parts: Vec<(f64, &Behavior)> = weights.into_iter().zip(&vertices).collect();
    Behavior::mixture(&parts).expect("vertices share a scenario")
}

/// A random mixture of `terms` deterministic boxes in `scenario`.
pub fn random_local_behavior<R: Rng + ?Sized>(
    rng: &mut R,
    scenario: Scenario,
    terms: usize,
) -> Behavior {
    let boxes: Vec<Behavior> = (0..terms.max(1))
        .map(|_| {
            let f: Vec<usize> = (0..scenario.x)
                .map(|_| rng.random_range(0..scenario.a))
                .collect();
            let g: Vec<usize> = (0..scenario.y)
                .map(|_| rng.random_range(0..scenario.b))
                .collect();
            deterministic_box(&f, &g, scenario.a, scenario.b).expect("in range")
        })
        .collect();
    let weights = random_simplex_point(rng, boxes.len());
    let parts: Vec<(f64, &Behavior)> = weights.into_iter().zip(&boxes).collect();
    Behavior::mixture(&parts).expect("same scenario")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalDirection {
    /// Alice's marginal varies with Bob's input.
    BobToAlice,
    /// Bob's marginal varies with Alice's input.
    AliceToBob,
}

/// One row of the signaling report: the spread of a party's marginal
/// `P(output | own input, other input)` over the other party's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingEntry {
    pub direction: SignalDirection,
    pub input: usize,
    pub output: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingReport {
    pub holds: bool,
    pub tol: f64,
    pub bob_to_alice: f64,
    pub alice_to_bob: f64,
    pub entries: Vec<SignalingEntry>,
}

impl NoSignalingReport {
    pub fn max_deviation(&self) -> f64 {
        self.bob_to_alice.max(self.alice_to_bob)
    }

    /// CSV with header `direction,input,output,deviation`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("CSV is UTF-8")
    }

    pub fn entries_from_csv(s: &str) -> std::result::Result<Vec<SignalingEntry>, csv::Error> {
        csv::Reader::from_reader(s.as_bytes())
            .deserialize()
            .collect()
    }
}

/// Checks that each party's output marginal ignores the other party's input.
pub fn is_no_signaling(beh: &Behavior, tol: f64) -> NoSignalingReport {
    let s = beh.scenario();
    let alice = |x: usize, y: usize, a: usize| (0..s.b).map(|b| beh.get(x, y, a, b)).sum::<f64>();
    let bob = |x: usize, y: usize, b: usize| (0..s.a).map(|a| beh.get(x, y, a, b)).sum::<f64>();
    let spread = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        hi - lo
    };

    let mut entries = Vec::with_capacity(s.x * s.a + s.y * s.b);
    for x in 0..s.x {
        for a in 0..s.a {
            entries.push(SignalingEntry {
                direction: SignalDirection::BobToAlice,
                input: x,
                output: a,
                deviation: spread(&mut (0..s.y).map(|y| alice(x, y, a))),
            });
        }
    }
    for y in 0..s.y {
        for b in 0..s.b {
            entries.push(SignalingEntry {
                direction: SignalDirection::AliceToBob,
                input: y,
                output: b,
                deviation: spread(&mut (0..s.x).map(|x| bob(x, y, b))),
            });
        }
    }
    let max_of = |dir| {
        entries
            .iter()
            .filter(|e| e.direction == dir)
            .map(|e| e.deviation)
            .fold(0.0, f64::max)
    };
    let bob_to_alice = max_of(SignalDirection::BobToAlice);
    let alice_to_bob = max_of(SignalDirection::AliceToBob);
    NoSignalingReport {
        holds: bob_to_alice <= tol && alice_to_bob <= tol,
        tol,
        bob_to_alice,
        alice_to_bob,
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityCertificate {
    pub is_local: bool,
    /// Convex weights over deterministic strategy pairs, indexed as in
    /// [`Scenario::strategy`]. Present iff `is_local`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
    /// Phase-1 objective at termination: the mass that no sub-normalized
    /// local mixture can cover. A lower-bound witness, not a tight distance.
    pub violation_gap: f64,
}

impl LocalityCertificate {
    /// Rebuilds the behavior from the certificate weights.
    pub fn reconstruct(&self, scenario: Scenario) -> Option<Behavior> {
        let weights = self.weights.as_ref()?;
        let mut table = vec![0.0; scenario.table_len()];
        for (s, &w) in weights.iter().enumerate().filter(|(_, &w)| w > 0.0) {
            let (f, g) = scenario.strategy(s);
            for x in 0..scenario.x {
                for y in 0..scenario.y {
                    table[scenario.index(x, y, f[x], g[y])] += w;
                }
            }
        }
        Behavior::new(scenario, table).ok()
    }
}

/// Bell-locality test with the default strategy cap.
pub fn is_bell_local(beh: &Behavior, tol: f64) -> Result<LocalityCertificate> {
    is_bell_local_capped(beh, tol, DEFAULT_STRATEGY_CAP)
}

/// LP feasibility over convex weights on all deterministic strategy pairs.
pub fn is_bell_local_capped(beh: &Behavior, tol: f64, cap: u128) -> Result<LocalityCertificate> {
    let s = beh.scenario();
    let count = s.strategy_count();
    if count > cap {
        return Err(Error::DimensionTooLarge { count, cap });
    }
    let cols = count as usize;
    let rows = s.table_len() + 1;
    let mut a = vec![0.0; rows * cols];
    for strat in 0..cols {
        let (f, g) = s.strategy(strat);
        for x in 0..s.x {
            for y in 0..s.y {
                a[s.index(x, y, f[x], g[y]) * cols + strat] = 1.0;
            }
        }
        a[(rows - 1) * cols + strat] = 1.0;
    }
    let mut b = beh.table().to_vec();
    b.push(1.0);

    let outcome = lp::phase_one(&a, rows, cols, &b);
    if outcome.infeasibility > tol {
        return Ok(LocalityCertificate {
            is_local: false,
            weights: None,
            violation_gap: outcome.infeasibility,
        });
    }

    let mut weights = outcome.x;
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let cert = LocalityCertificate {
        is_local: true,
        weights: Some(weights),
        violation_gap: 0.0,
    };
    let replay = cert
        .reconstruct(s)
        .and_then(|rebuilt| rebuilt.max_abs_diff(beh))
        .unwrap_or(f64::INFINITY);
    if replay > CERTIFICATE_REPLAY_TOL {
        return Ok(LocalityCertificate {
            is_local: false,
            weights: None,
            violation_gap: replay.max(outcome.infeasibility),
        });
    }
    Ok(cert)
}

/// Probability of winning the CHSH game (`a ⊕ b = xy`) under uniform inputs.
pub fn chsh_success(beh: &Behavior) -> Result<f64> {
    if !beh.scenario().is_binary() {
        return Err(Error::NotBinary);
    }
    let mut total = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                total += beh.get(x, y, a, a ^ (x * y));
            }
        }
    }
    Ok(total / 4.0)
}

/// Equality tolerance for behaviors.
pub const BEHAVIOR_EQ_TOL: f64 = VALIDATION_TOL;
