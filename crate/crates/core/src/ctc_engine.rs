//! Classical Deutsch closed time-like curves.
//!
//! A causality-respecting register `R` and a causality-violating register
//! `V` evolve jointly under `ε = P(R', V' | R, V)`. The state of `V` must be a
//! fixed point of the map it induces on itself once `R` is averaged out; when
//! several fixed points exist, the one of maximal entropy is selected. The
//! final state of `R` is then read off by running `ε` once more.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::prob::{Alphabet, Channel, Dist};

/// Singular values below this count as zero, and the solver stops once the
/// entropy gradient along the fixed subspace is this small.
pub const DEFAULT_TOL: f64 = 1e-9;

pub const MAX_ITERATIONS: usize = 10_000;

/// Coordinates whose projected weight falls below this fraction of the
/// largest one are treated as forced to zero.
const SUPPORT_CUTOFF: f64 = 1e-12;

/// One use of a classical Deutsch CTC.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcInstance {
    r: Alphabet,
    v: Alphabet,
    epsilon: Channel,
    r_init: Dist,
}

#[derive(Serialize, Deserialize)]
struct CtcInstanceRepr {
    r: usize,
    v: usize,
    /// `nm × nm`, row = output `(r', v')`, column = input `(r, v)`.
    epsilon: Vec<Vec<f64>>,
    r_init: Vec<f64>,
}

impl Serialize for CtcInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.epsilon.output().size();
        let m = self.epsilon.input().size();
        CtcInstanceRepr {
            r: self.r.size(),
            v: self.v.size(),
            epsilon: (0..n)
                .map(|o| (0..m).map(|i| self.epsilon.entry(o, i)).collect())
                .collect(),
            r_init: self.r_init.weights().to_vec(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CtcInstance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CtcInstanceRepr::deserialize(deserializer)?;
        let r = Alphabet::new(repr.r).map_err(D::Error::custom)?;
        let v = Alphabet::new(repr.v).map_err(D::Error::custom)?;
        let joint = r.product(&v);
        let n = joint.size();
        if repr.epsilon.len() != n || repr.epsilon.iter().any(|row| row.len() != n) {
            return Err(D::Error::custom(format!("epsilon must be {n} x {n}")));
        }
        let epsilon = Channel::from_fn(joint.clone(), joint, |o, i| repr.epsilon[o][i])
            .map_err(D::Error::custom)?;
        let r_init = Dist::new(r.clone(), repr.r_init).map_err(D::Error::custom)?;
        CtcInstance::new(r, v, epsilon, r_init).map_err(D::Error::custom)
    }
}

impl CtcInstance {
    /// `epsilon` maps `R × V` to `R × V`, both flattened with `R` slowest.
    pub fn new(r: Alphabet, v: Alphabet, epsilon: Channel, r_init: Dist) -> Result<Self> {
        let n = r.size() * v.size();
        if epsilon.input().size() != n || epsilon.output().size() != n {
            return Err(Error::AlphabetMismatch(format!(
                "epsilon must act on {} x {} = {n} joint symbols",
                r.size(),
                v.size()
            )));
        }
        if !r_init.alphabet().same_size(&r) {
            return Err(Error::AlphabetMismatch(
                "initial distribution is not over R".into(),
            ));
        }
        Ok(Self {
            r,
            v,
            epsilon,
            r_init,
        })
    }

    pub fn r_alphabet(&self) -> &Alphabet {
        &self.r
    }

    pub fn v_alphabet(&self) -> &Alphabet {
        &self.v
    }

    pub fn epsilon(&self) -> &Channel {
        &self.epsilon
    }

    pub fn r_init(&self) -> &Dist {
        &self.r_init
    }

    /// `ε(r', v' | r, v)`.
    pub fn transition(&self, r_out: usize, v_out: usize, r_in: usize, v_in: usize) -> f64 {
        let m = self.v.size();
        self.epsilon.entry(r_out * m + v_out, r_in * m + v_in)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("CtcInstance serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// `M(v' | v) = Σ_{r', r} ε(r', v' | r, v) · P_init(r)`.
///
/// `ε` is marginalized over `R'` before `R` is averaged out, which is the same
/// sum taken in a different order.
pub fn induced_map(inst: &CtcInstance) -> Channel {
    let n = inst.r.size();
    Channel::from_fn(inst.v.clone(), inst.v.clone(), |v_out, v_in| {
        let mut total = 0.0;
        for r_in in 0..n {
            let p = inst.r_init.prob(r_in);
            if p == 0.0 {
                continue;
            }
            let marginal: f64 = (0..n)
                .map(|r_out| inst.transition(r_out, v_out, r_in, v_in))
                .sum();
            total += marginal * p;
        }
        total
    })
    .expect("a mixture of stochastic columns is stochastic")
}

/// The fixed probability vectors of a stochastic map.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSet {
    /// Affine dimension of the fixed polytope (kernel dimension minus one).
    pub dim: usize,
    /// Orthonormal basis of `ker(M - I)`, one vector per entry.
    pub kernel_basis: Vec<Vec<f64>>,
    /// A vertex of the fixed polytope.
    pub vertex: Dist,
}

fn square_size(m: &Channel) -> Result<usize> {
    if !m.input().same_size(m.output()) {
        return Err(Error::AlphabetMismatch(format!(
            "map must be square, got {} -> {}",
            m.input().size(),
            m.output().size()
        )));
    }
    Ok(m.input().size())
}

/// Orthonormal basis of `ker(M - I)` from the SVD, as columns of an `n × k` matrix.
fn kernel_basis(m: &Channel, tol: f64) -> Result<DMatrix<f64>> {
    let n = square_size(m)?;
    let a = DMatrix::from_fn(n, n, |i, j| m.entry(i, j) - if i == j { 1.0 } else { 0.0 });
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut kernel = Vec::new();
    for (idx, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma >= tol / 10.0 && sigma <= tol * 10.0 {
            return Err(Error::NumericalRankAmbiguity { value: sigma, tol });
        }
        if sigma < tol {
            kernel.push(v_t.row(idx).transpose());
        }
    }
    if kernel.is_empty() {
        let smallest = svd
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoFixedPoint { smallest });
    }
    Ok(DMatrix::from_columns(&kernel))
}

/// Largest entry of `|M v - v|`.
pub fn fixed_point_residual(m: &Channel, v: &[f64]) -> f64 {
    (0..v.len())
        .map(|o| {
            let mv: f64 = (0..v.len()).map(|i| m.entry(o, i) * v[i]).sum();
            (mv - v[o]).abs()
        })
        .fold(0.0, f64::max)
}

/// Describes `{v ≥ 0, Σ v = 1, M v = v}`: its dimension, the kernel basis,
/// and one vertex found by phase-1 simplex.
pub fn fixed_point_set(m: &Channel, tol: f64) -> Result<FixedPointSet> {
    let n = square_size(m)?;
    let kernel = kernel_basis(m, tol)?;

    let rows = n + 1;
    let mut a = vec![0.0; rows * n];
    for o in 0..n {
        for i in 0..n {
            a[o * n + i] = m.entry(o, i) - if o == i { 1.0 } else { 0.0 };
        }
    }
    a[n * n..].iter_mut().for_each(|v| *v = 1.0);
    let mut b = vec![0.0; rows];
    b[n] = 1.0;
    let outcome = lp::phase_one(&a, rows, n, &b);
    if outcome.infeasibility > tol {
        return Err(Error::ConvergenceFailure {
            iterations: outcome.pivots,
            residual: outcome.infeasibility,
        });
    }
    let vertex = Dist::new(m.input().clone(), outcome.x)?;

    Ok(FixedPointSet {
        dim: kernel.ncols() - 1,
        kernel_basis: kernel
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        vertex,
    })
}

/// Result of the entropy maximization over the fixed polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntropySolution {
    pub dist: Dist,
    pub fp_space_dim: usize,
    /// `max |M v - v|`, evaluated directly on the returned vector.
    pub residual: f64,
    /// Norm of the entropy gradient projected onto the fixed subspace.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// The maximum-entropy fixed point of `m`.
pub fn max_entropy_fixed_point(m: &Channel, tol: f64) -> Result<Dist> {
    solve_max_entropy(m, tol, None).map(|s| s.dist)
}

fn entropy_bits(v: &[f64]) -> f64 {
    -v.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Entropy maximization over `{v ≥ 0, Σ v = 1, M v = v}`.
///
/// The fixed subspace comes from the SVD of `M - I`. Coordinates that vanish
/// on the whole subspace are dropped; on the remaining support the optimum
/// is interior, and a damped Newton iteration in the affine fixed subspace
/// finds it. Each step is halved until it stays strictly positive and does
/// not decrease the entropy.
///
/// `start`, when given, replaces the default starting point (the normalized
/// projection of the uniform vector onto the fixed subspace). It must lie
/// in the fixed polytope with full support on the fixed set.
pub fn solve_max_entropy(
    m: &Channel,
    tol: f64,
    start: Option<&[f64]>,
) -> Result<MaxEntropySolution> {
    let n = square_size(m)?;
    let kernel = kernel_basis(m, tol)?;
    let k = kernel.ncols();

    let ones = DVector::from_element(n, 1.0);
    let mut u = &kernel * (kernel.transpose() * &ones);
    let total = u.sum();
    u /= total;
    let peak = u.amax();
    let support: Vec<usize> = (0..n).filter(|&i| u[i] > SUPPORT_CUTOFF * peak).collect();

    let v0: Vec<f64> = match start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: s.len(),
                });
            }
            s.to_vec()
        }
        None => u.iter().map(|&x| x.max(0.0)).collect(),
    };

    let finish = |v: Vec<f64>, iterations: usize, kkt: f64| -> Result<MaxEntropySolution> {
        let mut v = v;
        for (i, p) in v.iter_mut().enumerate() {
            if !support.contains(&i) || *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|p| *p /= s);
        let residual = fixed_point_residual(m, &v);
        Ok(MaxEntropySolution {
            dist: Dist::new(m.input().clone(), v)?,
            fp_space_dim: k - 1,
            residual,
            kkt_residual: kkt,
            iterations,
        })
    };

    if k == 1 {
        return finish(v0, 0, 0.0);
    }

    // Tangent directions: kernel vectors with zero total mass.
    let s = kernel.transpose() * &ones;
    let q = orthonormal_complement(&s);
    let tangent_full = &kernel * q;
    let d = tangent_full.ncols();
    let tangent = DMatrix::from_fn(support.len(), d, |i, j| tangent_full[(support[i], j)]);

    let mut v = DVector::from_iterator(support.len(), support.iter().map(|&i| v0[i]));
    if v.iter().any(|&p| p <= 0.0) {
        return Err(Error::ConvergenceFailure {
            iterations: 0,
            residual: v.min(),
        });
    }
    let ln2 = std::f64::consts::LN_2;
    let mut h = entropy_bits(v.as_slice());
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let grad_v = v.map(|p| -p.log2() - 1.0 / ln2);
        let grad = tangent.transpose() * &grad_v;
        kkt = grad.amax();
        if kkt <= tol {
            break;
        }
        iterations += 1;

        let weights = v.map(|p| 1.0 / (p * ln2));
        let scaled = DMatrix::from_fn(tangent.nrows(), d, |i, j| tangent[(i, j)] * weights[i]);
        let hessian = tangent.transpose() * scaled;
        let step = match hessian.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone(),
        };
        let direction = &tangent * step;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &v + &direction * alpha;
            if candidate.iter().all(|&p| p > 0.0) {
                let hc = entropy_bits(candidate.as_slice());
                if hc >= h - 1e-15 {
                    v = candidate;
                    h = hc;
                    accepted = true;
                    break;
                }
            }
            alpha /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if kkt > tol {
        return Err(Error::ConvergenceFailure {
            iterations,
            residual: kkt,
        });
    }

    let mut full = vec![0.0; n];
    for (slot, &i) in support.iter().enumerate() {
        full[i] = v[slot];
    }
    finish(full, iterations, kkt)
}

/// Orthonormal basis of the complement of `s` in `R^k`, as columns.
fn orthonormal_complement(s: &DVector<f64>) -> DMatrix<f64> {
    let k = s.len();
    let mut basis: Vec<DVector<f64>> = vec![s.normalize()];
    for e in 0..k {
        let mut cand = DVector::from_fn(k, |i, _| if i == e { 1.0 } else { 0.0 });
        for b in &basis {
            let proj = b.dot(&cand);
            cand -= b * proj;
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            basis.push(cand / norm);
        }
        if basis.len() == k {
            break;
        }
    }
    DMatrix::from_columns(&basis[1..])
}

/// Outcome of running an instance through the CTC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub consistent_v: Dist,
    pub final_r: Dist,
    pub fp_space_dim: usize,
    pub residual: f64,
    pub entropy_bits: f64,
    pub iterations: usize,
}

/// Selects the maximum-entropy consistent state of `V` and propagates `R`:
/// `P_fin(r') = Σ_{v', r, v} ε(r', v' | r, v) P_init(r) P_cons(v)`.
pub fn evolve(inst: &CtcInstance, tol: f64) -> Result<FixedPointReport> {
    let map = induced_map(inst);
    let solution = solve_max_entropy(&map, tol, None)?;
    if solution.residual > tol.max(DEFAULT_TOL) {
        return Err(Error::ConvergenceFailure {
            iterations: solution.iterations,
            residual: solution.residual,
        });
    }
    let joint_in = inst.r_init.tensor(&solution.dist);
    let joint_out = inst.epsilon.apply(&joint_in)?;
    let (n, m) = (inst.r.size(), inst.v.size());
    let final_weights: Vec<f64> = (0..n)
        .map(|r| joint_out.weights()[r * m..(r + 1) * m].iter().sum())
        .collect();
    let final_r = Dist::new(inst.r.clone(), final_weights)?;
    Ok(FixedPointReport {
        entropy_bits: solution.dist.entropy(),
        consistent_v: solution.dist,
        final_r,
        fp_space_dim: solution.fp_space_dim,
        residual: solution.residual,
        iterations: solution.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(n: usize) -> Alphabet {
        Alphabet::new(n).unwrap()
    }

    fn not_map() -> Channel {
        Channel::deterministic(alpha(2), alpha(2), |i| 1 - i).unwrap()
    }

    fn swap_instance(n: usize, r0: usize) -> CtcInstance {
        let joint = alpha(n).product(&alpha(n));
        let eps = Channel::deterministic(joint.clone(), joint, |i| (i % n) * n + i / n).unwrap();
        CtcInstance::new(alpha(n), alpha(n), eps, Dist::point(alpha(n), r0).unwrap()).unwrap()
    }

    #[test]
    fn induced_map_examples() {
        let joint = alpha(2).product(&alpha(3));
        let id = CtcInstance::new(
            alpha(2),
            alpha(3),
            Channel::identity(joint),
            Dist::from_weights(vec![0.3, 0.7]).unwrap(),
        )
        .unwrap();
        assert_eq!(induced_map(&id), Channel::identity(alpha(3)));

        let eps = Channel::identity(alpha(2)).tensor(&not_map());
        let inst = CtcInstance::new(alpha(2), alpha(2), eps, Dist::uniform(alpha(2))).unwrap();
        assert_eq!(induced_map(&inst), not_map());

        let m = induced_map(&swap_instance(3, 1));
        for v in 0..3 {
            assert_eq!(m.column(v), &[0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn fixed_point_set_examples() {
        let id = fixed_point_set(&Channel::identity(alpha(4)), DEFAULT_TOL).unwrap();
        assert_eq!(id.dim, 3);
        assert_eq!(id.kernel_basis.len(), 4);

        let not = fixed_point_set(&not_map(), DEFAULT_TOL).unwrap();
        assert_eq!(not.dim, 0);
        // v0 = v1 and v0 + v1 = 1 give v = (1/2, 1/2)
        assert!(not.vertex.max_abs_diff(&Dist::uniform(alpha(2))).unwrap() < 1e-12);

        let q = vec![0.2, 0.5, 0.3];
        let constant = Channel::from_columns(alpha(3), alpha(3), vec![q.clone(); 3]).unwrap();
        let fp = fixed_point_set(&constant, DEFAULT_TOL).unwrap();
        assert_eq!(fp.dim, 0);
        assert!(
            fp.vertex
                .max_abs_diff(&Dist::from_weights(q).unwrap())
                .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn rank_ambiguity_is_reported() {
        // M - I has singular values {0, 2e-9}: neither clearly zero nor clearly not.
        let e = 1e-9;
        let m = Channel::from_columns(alpha(2), alpha(2), vec![vec![1.0 - e, e], vec![e, 1.0 - e]])
            .unwrap();
        assert!(matches!(
            fixed_point_set(&m, DEFAULT_TOL),
            Err(Error::NumericalRankAmbiguity { .. })
        ));
        assert!(matches!(
            max_entropy_fixed_point(&m, DEFAULT_TOL),
            Err(Error::NumericalRankAmbiguity { .. })
        ));
    }

    #[test]
    fn non_square_map_is_rejected() {
        let m = Channel::from_columns(alpha(2), alpha(3), vec![vec![1.0, 0.0, 0.0]; 2]).unwrap();
        assert!(matches!(
            fixed_point_set(&m, DEFAULT_TOL),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn max_entropy_examples() {
        for n in [1usize, 2, 5, 16] {
            let v = max_entropy_fixed_point(&Channel::identity(alpha(n)), DEFAULT_TOL).unwrap();
            assert!(v.max_abs_diff(&Dist::uniform(alpha(n))).unwrap() < 1e-9);
        }
        let v = max_entropy_fixed_point(&not_map(), DEFAULT_TOL).unwrap();
        assert!(v.max_abs_diff(&Dist::uniform(alpha(2))).unwrap() < 1e-12);

        // constant columns pinned to a point mass: the fixed set is a single vertex
        let pinned = Channel::from_columns(alpha(2), alpha(2), vec![vec![1.0, 0.0]; 2]).unwrap();
        let v = max_entropy_fixed_point(&pinned, DEFAULT_TOL).unwrap();
        assert_eq!(v.weights(), &[1.0, 0.0]);
        assert_eq!(v.entropy(), 0.0);
    }

    #[test]
    fn block_identity_maximizer_beats_grid() {
        // identity blocks of sizes 1 and 3: every vector is fixed
        let m = Channel::identity(alpha(4));
        let v = max_entropy_fixed_point(&m, DEFAULT_TOL).unwrap();
        let best_grid = (0..=100)
            .flat_map(|i| {
                (0..=100 - i).flat_map(move |j| (0..=100 - i - j).map(move |k| (i, j, k)))
            })
            .map(|(i, j, k)| {
                let w = [i, j, k, 100 - i - j - k].map(|c| c as f64 / 100.0);
                entropy_bits(&w)
            })
            .fold(0.0, f64::max);
        assert!((best_grid - 2.0).abs() < 1e-12);
        assert!((v.entropy() - best_grid).abs() < 1e-9);
    }

    #[test]
    fn transient_states_are_eliminated() {
        // state 2 leaks into the closed classes {0} and {1}
        let m = Channel::from_columns(
            alpha(3),
            alpha(3),
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.25, 0.25, 0.5],
            ],
        )
        .unwrap();
        let sol = solve_max_entropy(&m, DEFAULT_TOL, None).unwrap();
        assert_eq!(sol.fp_space_dim, 1);
        assert_eq!(sol.dist.weights()[2], 0.0);
        assert!((sol.dist.weights()[0] - 0.5).abs() < 1e-9);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn evolve_examples() {
        let report = evolve(&swap_instance(2, 0), DEFAULT_TOL).unwrap();
        assert_eq!(report.consistent_v.weights(), &[1.0, 0.0]);
        assert_eq!(report.final_r.weights(), &[1.0, 0.0]);
        assert_eq!(report.fp_space_dim, 0);

        let r_init = Dist::from_weights(vec![0.1, 0.6, 0.3]).unwrap();
        let joint = alpha(3).product(&alpha(4));
        let inst =
            CtcInstance::new(alpha(3), alpha(4), Channel::identity(joint), r_init.clone()).unwrap();
        let report = evolve(&inst, DEFAULT_TOL).unwrap();
        assert!(
            report
                .consistent_v
                .max_abs_diff(&Dist::uniform(alpha(4)))
                .unwrap()
                < 1e-9
        );
        assert!(report.final_r.max_abs_diff(&r_init).unwrap() < 1e-12);
        assert!((report.entropy_bits - 2.0).abs() < 1e-9);
        assert_eq!(report.fp_space_dim, 3);
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = swap_instance(2, 1);
        let json = inst.to_json();
        assert!(json.starts_with(r#"{"r":2,"v":2,"epsilon":[[1.0,0.0,0.0,0.0],[0.0,0.0,1.0,0.0]"#));
        assert_eq!(CtcInstance::from_json(&json).unwrap(), inst);
        assert!(
            CtcInstance::from_json(r#"{"r":2,"v":2,"epsilon":[[1.0]],"r_init":[1,0]}"#).is_err()
        );
    }
}
