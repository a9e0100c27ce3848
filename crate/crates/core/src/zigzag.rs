//! Measurement-dependent local models and retro-causal singlet protocols.
//!
//! A measurement-dependent model lets the shared variable `Λ` depend on the
//! inputs: `P(a, b | x, y) = Σ_λ P(λ | x, y) P(a | x, λ) P(b | y, λ)`. Read
//! retro-causally, whatever `Λ` learns about the inputs travelled to the
//! common past.
//!
//! Two singlet simulations are provided as samplers:
//!
//! * Toner–Bacon: one communicated bit `c`, here the retro-causal bit.
//! * PR-assisted: one PR box whose two inputs are the retro-causal bits.
//!
//! Sign conventions (frozen): `sgn(0) = +1`, `χ(t) = 0` for `t ≥ 0` and `1`
//! otherwise. In the PR-assisted protocol Bob outputs
//! `B = -(-1)^(q ⊕ χ(ŷ·λ+))`; the unnegated form yields `E[AB] = +x̂·ŷ`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::boxworld::{Behavior, Scenario};
use crate::error::{Error, Result};
use crate::prob::{Alphabet, Channel, Dist};
use crate::sampling;

/// Measurement-dependent local model.
#[derive(Debug, Clone, PartialEq)]
pub struct MdModel {
    lambda: Alphabet,
    x_size: usize,
    y_size: usize,
    /// `P(λ | x, y)` at index `x * |Y| + y`.
    lambda_given_xy: Vec<Dist>,
    /// `(x, λ) -> a`, input index `x * |Λ| + λ`.
    alice: Channel,
    /// `(y, λ) -> b`, input index `y * |Λ| + λ`.
    bob: Channel,
}

impl MdModel {
    pub fn new(
        lambda: Alphabet,
        x_size: usize,
        y_size: usize,
        lambda_given_xy: Vec<Dist>,
        alice: Channel,
        bob: Channel,
    ) -> Result<Self> {
        if x_size == 0 || y_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if lambda_given_xy.len() != x_size * y_size {
            return Err(Error::LengthMismatch {
                expected: x_size * y_size,
                actual: lambda_given_xy.len(),
            });
        }
        if lambda_given_xy
            .iter()
            .any(|d| !d.alphabet().same_size(&lambda))
        {
            return Err(Error::AlphabetMismatch(
                "every P(λ | x, y) must be over Λ".into(),
            ));
        }
        if alice.input().size() != x_size * lambda.size() {
            return Err(Error::AlphabetMismatch(
                "Alice's response must read (x, λ)".into(),
            ));
        }
        if bob.input().size() != y_size * lambda.size() {
            return Err(Error::AlphabetMismatch(
                "Bob's response must read (y, λ)".into(),
            ));
        }
        Ok(Self {
            lambda,
            x_size,
            y_size,
            lambda_given_xy,
            alice,
            bob,
        })
    }

    /// Ordinary local model: the same `P(λ)` for every input pair.
    pub fn measurement_independent(
        lambda: Dist,
        x_size: usize,
        y_size: usize,
        alice: Channel,
        bob: Channel,
    ) -> Result<Self> {
        let alphabet = lambda.alphabet().clone();
        Self::new(
            alphabet,
            x_size,
            y_size,
            vec![lambda; x_size * y_size],
            alice,
            bob,
        )
    }

    pub fn lambda_alphabet(&self) -> &Alphabet {
        &self.lambda
    }

    pub fn lambda_given(&self, x: usize, y: usize) -> &Dist {
        &self.lambda_given_xy[x * self.y_size + y]
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            x: self.x_size,
            y: self.y_size,
            a: self.alice.output().size(),
            b: self.bob.output().size(),
        }
    }

    pub fn is_measurement_independent(&self, tol: f64) -> bool {
        let first = &self.lambda_given_xy[0];
        self.lambda_given_xy
            .iter()
            .all(|d| d.max_abs_diff(first).is_some_and(|v| v <= tol))
    }
}

/// `P(a, b | x, y) = Σ_λ P(λ | x, y) P(a | x, λ) P(b | y, λ)`.
pub fn md_behavior(model: &MdModel) -> Result<Behavior> {
    let s = model.scenario();
    let nl = model.lambda.size();
    let mut table = Vec::with_capacity(s.table_len());
    for x in 0..s.x {
        for y in 0..s.y {
            let lam = model.lambda_given(x, y);
            for a in 0..s.a {
                for b in 0..s.b {
                    let p: f64 = (0..nl)
                        .map(|l| {
                            lam.prob(l)
                                * model.alice.entry(a, x * nl + l)
                                * model.bob.entry(b, y * nl + l)
                        })
                        .sum();
                    table.push(p);
                }
            }
        }
    }
    Behavior::new(s, table)
}

/// Universal construction: `Λ = A × B` is drawn from the target for the
/// actual inputs and each party reads off its own component.
pub fn md_from_target(target: &Behavior) -> MdModel {
    let s = target.scenario();
    let lambda = Alphabet::product_of(&[s.a, s.b]).expect("valid scenario");
    let nl = lambda.size();
    let lambda_given_xy = (0..s.x)
        .flat_map(|x| (0..s.y).map(move |y| (x, y)))
        .map(|(x, y)| Dist::new(lambda.clone(), target.block(x, y).to_vec()).expect("target block"))
        .collect();
    let alice = Channel::deterministic(
        Alphabet::product_of(&[s.x, nl]).expect("sizes"),
        Alphabet::new(s.a).expect("size"),
        |i| (i % nl) / s.b,
    )
    .expect("component in range");
    let bob = Channel::deterministic(
        Alphabet::product_of(&[s.y, nl]).expect("sizes"),
        Alphabet::new(s.b).expect("size"),
        |i| (i % nl) % s.b,
    )
    .expect("component in range");
    MdModel::new(lambda, s.x, s.y, lambda_given_xy, alice, bob).expect("consistent construction")
}

/// `I(Λ ; XY)` in bits for inputs drawn from `input_dist` (indexed `x * |Y| + y`).
pub fn hidden_influence(model: &MdModel, input_dist: &Dist) -> Result<f64> {
    let pairs = model.x_size * model.y_size;
    if input_dist.len() != pairs {
        return Err(Error::AlphabetMismatch(format!(
            "input distribution has {} symbols, model has {pairs} input pairs",
            input_dist.len()
        )));
    }
    let nl = model.lambda.size();
    let joint_alphabet = Alphabet::product_of(&[nl, pairs])?;
    let mut weights = vec![0.0; nl * pairs];
    for (xy, lam) in model.lambda_given_xy.iter().enumerate() {
        let q = input_dist.prob(xy);
        for l in 0..nl {
            weights[l * pairs + xy] = lam.prob(l) * q;
        }
    }
    Dist::new(joint_alphabet, weights)?.mutual_information()
}

/// A direction in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3(pub [f64; 3]);

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3([1.0, 0.0, 0.0]);

    /// Accepts only vectors of norm one within `1e-12`.
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = norm(v);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                name: "unit vector norm",
                value: n,
            });
        }
        Ok(Self(v))
    }

    pub fn normalized(v: [f64; 3]) -> Option<Self> {
        let n = norm(v);
        (n > 1e-150 && n.is_finite()).then(|| Self(v.map(|c| c / n)))
    }

    /// Direction at `angle` radians from `X` in the x–y plane.
    pub fn in_plane(angle: f64) -> Self {
        Self([angle.cos(), angle.sin(), 0.0])
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        dot(self.0, other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(self.0)
    }

    /// Azimuth of the projection onto the x–y plane, in `(-π, π]`.
    pub fn azimuth(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(v: [f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

fn sgn(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

fn chi(t: f64) -> u8 {
    if t >= 0.0 {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "tb")]
    TonerBacon,
    #[serde(rename = "pr")]
    PrAssisted,
}

impl Protocol {
    /// Bits sent to the common past per run.
    pub fn payload_bits(&self) -> u32 {
        match self {
            Protocol::TonerBacon => 1,
            Protocol::PrAssisted => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::TonerBacon => "tb",
            Protocol::PrAssisted => "pr",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tb" | "toner-bacon" | "toner_bacon" => Ok(Protocol::TonerBacon),
            "pr" | "pr-assisted" | "pr_assisted" => Ok(Protocol::PrAssisted),
            other => Err(format!("unknown protocol {other:?} (expected tb or pr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonerBaconSample {
    pub a: i8,
    pub b: i8,
    /// The communicated bit, read as travelling to the common past.
    pub c: i8,
    pub lambda1: UnitVector3,
    pub lambda2: UnitVector3,
}

/// One run of the Toner–Bacon protocol.
pub fn toner_bacon_sample<R: RngCore + ?Sized>(
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    rng: &mut R,
) -> TonerBaconSample {
    let lambda1 = sampling::sphere_point(rng);
    let lambda2 = sampling::sphere_point(rng);
    let s1 = sgn(x_hat.dot(&lambda1));
    let s2 = sgn(x_hat.dot(&lambda2));
    let a = -s1;
    let c = s1 * s2;
    let cf = c as f64;
    let mix = [
        lambda1.0[0] + cf * lambda2.0[0],
        lambda1.0[1] + cf * lambda2.0[1],
        lambda1.0[2] + cf * lambda2.0[2],
    ];
    let b = sgn(dot(y_hat.0, mix));
    TonerBaconSample {
        a,
        b,
        c,
        lambda1,
        lambda2,
    }
}

fn plus_minus(l1: &UnitVector3, l2: &UnitVector3) -> (UnitVector3, UnitVector3) {
    let sum = [l1.0[0] + l2.0[0], l1.0[1] + l2.0[1], l1.0[2] + l2.0[2]];
    let diff = [l1.0[0] - l2.0[0], l1.0[1] - l2.0[1], l1.0[2] - l2.0[2]];
    // λ1 = ±λ2 has probability zero; fall back to a fixed direction
    (
        UnitVector3::normalized(sum).unwrap_or(UnitVector3::X),
        UnitVector3::normalized(diff).unwrap_or(UnitVector3::X),
    )
}

/// Alice's PR-box input `χ(x̂·λ1) ⊕ χ(x̂·λ2)`.
pub fn alice_pr_input(x_hat: &UnitVector3, l1: &UnitVector3, l2: &UnitVector3) -> u8 {
    chi(x_hat.dot(l1)) ^ chi(x_hat.dot(l2))
}

/// Bob's PR-box input `χ(ŷ·λ+) ⊕ χ(ŷ·λ-)` with `λ± = (λ1 ± λ2)/|λ1 ± λ2|`.
pub fn bob_pr_input(y_hat: &UnitVector3, l1: &UnitVector3, l2: &UnitVector3) -> u8 {
    let (lp, lm) = plus_minus(l1, l2);
    chi(y_hat.dot(&lp)) ^ chi(y_hat.dot(&lm))
}

/// Alice's output from her own data and her PR-box output `p` only.
pub fn alice_pr_output(x_hat: &UnitVector3, l1: &UnitVector3, _l2: &UnitVector3, p: u8) -> i8 {
    if (p ^ chi(x_hat.dot(l1))) == 0 {
        1
    } else {
        -1
    }
}

/// Bob's output from his own data and his PR-box output `q` only.
pub fn bob_pr_output(y_hat: &UnitVector3, l1: &UnitVector3, l2: &UnitVector3, q: u8) -> i8 {
    let (lp, _) = plus_minus(l1, l2);
    if (q ^ chi(y_hat.dot(&lp))) == 0 {
        -1
    } else {
        1
    }
}

/// PR box outputs: `p` uniform, `q = p ⊕ xy`.
pub fn pr_box_sample<R: RngCore + ?Sized>(x: u8, y: u8, rng: &mut R) -> (u8, u8) {
    let p = (rng.next_u64() >> 63) as u8;
    (p, p ^ (x & y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrAssistedSample {
    pub a: i8,
    pub b: i8,
    /// PR input of Alice (first retro-causal bit).
    pub x_bit: u8,
    /// PR input of Bob (second retro-causal bit).
    pub y_bit: u8,
    pub lambda1: UnitVector3,
    pub lambda2: UnitVector3,
}

/// One run of the PR-assisted singlet simulation.
pub fn pr_assisted_singlet_sample<R: RngCore + ?Sized>(
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    rng: &mut R,
) -> PrAssistedSample {
    let lambda1 = sampling::sphere_point(rng);
    let lambda2 = sampling::sphere_point(rng);
    let x_bit = alice_pr_input(x_hat, &lambda1, &lambda2);
    let y_bit = bob_pr_input(y_hat, &lambda1, &lambda2);
    let (p, q) = pr_box_sample(x_bit, y_bit, rng);
    PrAssistedSample {
        a: alice_pr_output(x_hat, &lambda1, &lambda2, p),
        b: bob_pr_output(y_hat, &lambda1, &lambda2, q),
        x_bit,
        y_bit,
        lambda1,
        lambda2,
    }
}

/// A protocol run reduced to what reports need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub a: i8,
    pub b: i8,
    /// Retro-causal payload, most significant bit first.
    pub payload: u8,
    pub lambda1: UnitVector3,
    pub lambda2: UnitVector3,
}

impl Draw {
    pub fn payload_bits(&self, protocol: Protocol) -> Vec<u8> {
        let n = protocol.payload_bits();
        (0..n).rev().map(|i| (self.payload >> i) & 1).collect()
    }
}

pub fn draw<R: RngCore + ?Sized>(
    protocol: Protocol,
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    rng: &mut R,
) -> Draw {
    match protocol {
        Protocol::TonerBacon => {
            let s = toner_bacon_sample(x_hat, y_hat, rng);
            Draw {
                a: s.a,
                b: s.b,
                payload: (s.c < 0) as u8,
                lambda1: s.lambda1,
                lambda2: s.lambda2,
            }
        }
        Protocol::PrAssisted => {
            let s = pr_assisted_singlet_sample(x_hat, y_hat, rng);
            Draw {
                a: s.a,
                b: s.b,
                payload: (s.x_bit << 1) | s.y_bit,
                lambda1: s.lambda1,
                lambda2: s.lambda2,
            }
        }
    }
}

/// Samples per independent random stream. Sample `i` of a batch always
/// comes from shard `i / SHARD_SIZE`, whatever the worker count.
pub const SHARD_SIZE: u64 = 1 << 16;

fn shard_stream(batch: u32, shard: u64) -> u64 {
    ((batch as u64) << 32) | shard
}

/// Visits the draws of batch `batch` in order.
pub fn for_each_draw(
    protocol: Protocol,
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    seed: u64,
    batch: u32,
    samples: u64,
    mut visit: impl FnMut(u64, &Draw),
) {
    let shards = samples.div_ceil(SHARD_SIZE);
    for shard in 0..shards {
        let mut rng = sampling::stream(seed, shard_stream(batch, shard));
        let start = shard * SHARD_SIZE;
        let end = (start + SHARD_SIZE).min(samples);
        for i in start..end {
            visit(i, &draw(protocol, x_hat, y_hat, &mut rng));
        }
    }
}

fn shard_sum(
    protocol: Protocol,
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    seed: u64,
    batch: u32,
    shard: u64,
    samples: u64,
) -> i64 {
    let mut rng = sampling::stream(seed, shard_stream(batch, shard));
    let start = shard * SHARD_SIZE;
    let end = (start + SHARD_SIZE).min(samples);
    (start..end)
        .map(|_| {
            let d = draw(protocol, x_hat, y_hat, &mut rng);
            (d.a * d.b) as i64
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Empirical `E[ab]` over `samples` runs of batch `batch`.
pub fn estimate_correlation(
    protocol: Protocol,
    x_hat: &UnitVector3,
    y_hat: &UnitVector3,
    seed: u64,
    batch: u32,
    samples: u64,
) -> CorrelationEstimate {
    let shards: Vec<u64> = (0..samples.div_ceil(SHARD_SIZE)).collect();
    let run = |&shard: &u64| shard_sum(protocol, x_hat, y_hat, seed, batch, shard, samples);
    #[cfg(feature = "parallel")]
    let total: i64 = {
        use rayon::prelude::*;
        shards.par_iter().map(run).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let total: i64 = shards.iter().map(run).sum();

    let n = samples.max(1) as f64;
    let mean = total as f64 / n;
    CorrelationEstimate {
        mean,
        std_error: ((1.0 - mean * mean).max(0.0) / n).sqrt(),
        samples,
    }
}

/// Measurement settings in the x–y plane: Alice fixed along `X`, Bob at
/// angles `2πk/n`, or a single explicit angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub angles: Vec<f64>,
}

impl AngleGrid {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange {
                name: "angle grid size",
                value: 0.0,
            });
        }
        Ok(Self {
            angles: (0..n)
                .map(|k| std::f64::consts::TAU * k as f64 / n as f64)
                .collect(),
        })
    }

    pub fn single(angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::OutOfRange {
                name: "angle",
                value: angle,
            });
        }
        Ok(Self {
            angles: vec![angle],
        })
    }

    pub fn settings(&self) -> impl Iterator<Item = (UnitVector3, UnitVector3)> + '_ {
        self.angles
            .iter()
            .map(|&t| (UnitVector3::X, UnitVector3::in_plane(t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub index: usize,
    pub angle: f64,
    pub x_hat: UnitVector3,
    pub y_hat: UnitVector3,
    pub estimate: f64,
    pub std_error: f64,
    /// Singlet prediction `-x̂·ŷ`.
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletSummary {
    pub protocol: Protocol,
    pub seed: u64,
    /// Samples per direction.
    pub samples: u64,
    /// Acceptance bound `4 / sqrt(samples)`.
    pub bound: f64,
    pub max_deviation: f64,
    pub all_within: bool,
    pub directions: Vec<DirectionResult>,
}

/// Runs `protocol` on every grid setting; direction `k` uses batch `k`.
pub fn singlet_summary(
    protocol: Protocol,
    grid: &AngleGrid,
    samples: u64,
    seed: u64,
) -> SingletSummary {
    let directions: Vec<DirectionResult> = grid
        .settings()
        .enumerate()
        .map(|(k, (x_hat, y_hat))| {
            let est = estimate_correlation(protocol, &x_hat, &y_hat, seed, k as u32, samples);
            let expected = -x_hat.dot(&y_hat);
            DirectionResult {
                index: k,
                angle: grid.angles[k],
                x_hat,
                y_hat,
                estimate: est.mean,
                std_error: est.std_error,
                expected,
                deviation: (est.mean - expected).abs(),
            }
        })
        .collect();
    let bound = 4.0 / (samples.max(1) as f64).sqrt();
    let max_deviation = directions.iter().map(|d| d.deviation).fold(0.0, f64::max);
    SingletSummary {
        protocol,
        seed,
        samples,
        bound,
        max_deviation,
        all_within: max_deviation <= bound,
        directions,
    }
}

/// Histogram bins per continuous coordinate in the mutual-information estimates.
pub const MI_BINS: usize = 64;

/// Batches used by [`zigzag_decomposition`] start here so they never
/// overlap the correlation batches.
const DECOMPOSITION_BATCH: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagDecomposition {
    pub protocol: Protocol,
    /// Bits that travel to the common past per run.
    pub payload_bits: u32,
    pub directions: usize,
    pub samples: u64,
    pub bins: usize,
    /// Plug-in estimate of `I((φ1, φ2, payload) ; x̂)` in bits, where `φi`
    /// is the binned azimuth of `λi`. This is the shared randomness of the
    /// zigzag reading, and it depends on Alice's setting.
    pub mi_hidden_estimate: f64,
    /// Plug-in estimate of `I(payload ; x̂)` in bits.
    pub mi_payload_estimate: f64,
}

fn azimuth_bin(v: &UnitVector3) -> usize {
    let t = (v.azimuth() + std::f64::consts::PI) / std::f64::consts::TAU;
    ((t * MI_BINS as f64) as usize).min(MI_BINS - 1)
}

/// Reports the retro-causal payload of `protocol` and estimates how much the
/// shared randomness, payload included, reveals about Alice's setting.
///
/// Alice's direction runs over `directions` in-plane angles `2πk/n` with
/// equal frequency (`samples / directions` runs each); Bob's stays along `X`.
pub fn zigzag_decomposition(
    protocol: Protocol,
    directions: usize,
    samples: u64,
    seed: u64,
) -> Result<ZigzagDecomposition> {
    let grid = AngleGrid::uniform(directions)?;
    let per_direction = (samples / directions as u64).max(1);
    let payload_values = 1usize << protocol.payload_bits();
    let cells = MI_BINS * MI_BINS * payload_values;
    let mut hidden = vec![0u64; cells * directions];
    let mut payload_only = vec![0u64; payload_values * directions];
    for (k, &angle) in grid.angles.iter().enumerate() {
        let x_hat = UnitVector3::in_plane(angle);
        for_each_draw(
            protocol,
            &x_hat,
            &UnitVector3::X,
            seed,
            DECOMPOSITION_BATCH + k as u32,
            per_direction,
            |_, d| {
                let p = d.payload as usize;
                let cell = (azimuth_bin(&d.lambda1) * MI_BINS + azimuth_bin(&d.lambda2))
                    * payload_values
                    + p;
                hidden[cell * directions + k] += 1;
                payload_only[p * directions + k] += 1;
            },
        );
    }
    let total = (per_direction * directions as u64) as f64;
    let mi = |counts: &[u64], rows: usize| -> Result<f64> {
        let alphabet = Alphabet::product_of(&[rows, directions])?;
        let weights = counts.iter().map(|&c| c as f64 / total).collect();
        Dist::new(alphabet, weights)?.mutual_information()
    };
    Ok(ZigzagDecomposition {
        protocol,
        payload_bits: protocol.payload_bits(),
        directions,
        samples: per_direction * directions as u64,
        bins: MI_BINS,
        mi_hidden_estimate: mi(&hidden, cells)?,
        mi_payload_estimate: mi(&payload_only, payload_values)?,
    })
}

/// One JSONL row of raw protocol output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub x_hat: UnitVector3,
    pub y_hat: UnitVector3,
    pub seed: u64,
    pub a: i8,
    pub b: i8,
    pub payload: Vec<u8>,
}

/// Random measurement-dependent model with `|Λ| = lambda_size`.
pub fn random_md_model<R: Rng + ?Sized>(
    rng: &mut R,
    scenario: Scenario,
    lambda_size: usize,
    measurement_independent: bool,
) -> Result<MdModel> {
    let lambda = Alphabet::new(lambda_size)?;
    let draw_dist = |rng: &mut R| {
        Dist::new(
            lambda.clone(),
            crate::boxworld::random_simplex_point(rng, lambda_size),
        )
    };
    let shared = draw_dist(rng)?;
    let lambda_given_xy = (0..scenario.x * scenario.y)
        .map(|_| {
            if measurement_independent {
                Ok(shared.clone())
            } else {
                draw_dist(rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let response = |rng: &mut R, inputs: usize, outputs: usize| {
        let columns = (0..inputs * lambda_size)
            .map(|_| crate::boxworld::random_simplex_point(rng, outputs))
            .collect();
        Channel::from_columns(
            Alphabet::product_of(&[inputs, lambda_size])?,
            Alphabet::new(outputs)?,
            columns,
        )
    };
    let alice = response(rng, scenario.x, scenario.a)?;
    let bob = response(rng, scenario.y, scenario.b)?;
    MdModel::new(lambda, scenario.x, scenario.y, lambda_given_xy, alice, bob)
}
