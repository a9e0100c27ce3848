//! Finite probability primitives.
//!
//! Product alphabets are flattened row-major: the first factor varies
//! slowest. A symbol `(i, j)` of `A × B` sits at index `i * |B| + j`. Every
//! type in the crate that indexes a joint space follows this order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance kept after a value has been accepted and renormalized.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance used when validating user-supplied weights.
pub const VALIDATION_TOL: f64 = 1e-9;

/// A finite alphabet, optionally labelled and optionally declared as a
/// product of smaller alphabets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr")]
pub struct Alphabet {
    size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factors: Option<Vec<usize>>,
}

#[derive(Deserialize)]
struct AlphabetRepr {
    size: usize,
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    factors: Option<Vec<usize>>,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;

    fn try_from(repr: AlphabetRepr) -> Result<Self> {
        let mut alphabet = Alphabet::new(repr.size)?;
        if let Some(factors) = repr.factors {
            if factors.is_empty()
                || factors.contains(&0)
                || factors.iter().product::<usize>() != repr.size
            {
                return Err(Error::NotProduct);
            }
            alphabet.factors = Some(factors);
        }
        match repr.labels {
            Some(labels) => alphabet.with_labels(labels),
            None => Ok(alphabet),
        }
    }
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            size,
            labels: None,
            factors: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.size {
            return Err(Error::InvalidLabels);
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidLabels);
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Product alphabet over factors of the given sizes.
    pub fn product_of(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            size: sizes.iter().product(),
            labels: None,
            factors: (sizes.len() > 1).then(|| sizes.to_vec()),
        })
    }

    /// `self × other`, flattening any existing product structure.
    pub fn product(&self, other: &Alphabet) -> Alphabet {
        let mut factors = self.factor_sizes();
        factors.extend(other.factor_sizes());
        let labels = match (&self.labels, &other.labels) {
            (Some(l), Some(r)) => Some(
                l.iter()
                    .flat_map(|a| r.iter().map(move |b| format!("{a},{b}")))
                    .collect(),
            ),
            _ => None,
        };
        Alphabet {
            size: self.size * other.size,
            labels,
            factors: Some(factors),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Sizes of the declared factors; an atomic alphabet is its own single factor.
    pub fn factor_sizes(&self) -> Vec<usize> {
        self.factors.clone().unwrap_or_else(|| vec![self.size])
    }

    pub fn is_product(&self) -> bool {
        self.factors.is_some()
    }

    /// Same size, labels and factor structure ignored.
    pub fn same_size(&self, other: &Alphabet) -> bool {
        self.size == other.size
    }
}

/// Validates and normalizes raw weights in place.
///
/// Negatives above `-CONSTRUCTION_TOL` are treated as round-off and clamped;
/// the sum must be within `VALIDATION_TOL` of one.
pub(crate) fn normalize_weights(weights: &mut [f64]) -> Result<()> {
    for (index, w) in weights.iter_mut().enumerate() {
        if !w.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if *w < 0.0 {
            if *w < -CONSTRUCTION_TOL {
                return Err(Error::NegativeWeight { index, value: *w });
            }
            *w = 0.0;
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > VALIDATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(())
}

pub(crate) fn xlog2x(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// A probability distribution over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr")]
pub struct Dist {
    alphabet: Alphabet,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct DistRepr {
    alphabet: Alphabet,
    weights: Vec<f64>,
}

impl TryFrom<DistRepr> for Dist {
    type Error = Error;

    fn try_from(repr: DistRepr) -> Result<Self> {
        Dist::new(repr.alphabet, repr.weights)
    }
}

impl Dist {
    pub fn new(alphabet: Alphabet, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != alphabet.size() {
            return Err(Error::LengthMismatch {
                expected: alphabet.size(),
                actual: weights.len(),
            });
        }
        normalize_weights(&mut weights)?;
        Ok(Self { alphabet, weights })
    }

    /// Distribution over a fresh atomic alphabet of matching size.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        Dist::new(Alphabet::new(weights.len())?, weights)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        Self {
            alphabet,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(alphabet: Alphabet, symbol: usize) -> Result<Self> {
        if symbol >= alphabet.size() {
            return Err(Error::OutOfRange {
                name: "symbol",
                value: symbol as f64,
            });
        }
        let mut weights = vec![0.0; alphabet.size()];
        weights[symbol] = 1.0;
        Ok(Self { alphabet, weights })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.weights[symbol]
    }

    /// Shannon entropy in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let h = -self.weights.iter().map(|&p| xlog2x(p)).sum::<f64>();
        h.max(0.0)
    }

    /// Product distribution; `self` indexes the slow factor.
    pub fn tensor(&self, other: &Dist) -> Dist {
        let weights = self
            .weights
            .iter()
            .flat_map(|&p| other.weights.iter().map(move |&q| p * q))
            .collect();
        Dist {
            alphabet: self.alphabet.product(&other.alphabet),
            weights,
        }
    }

    /// Sums out every factor not listed in `keep`. Kept factors appear in
    /// ascending order regardless of the order given.
    pub fn marginal(&self, keep: &[usize]) -> Result<Dist> {
        if !self.alphabet.is_product() {
            return Err(Error::NotProduct);
        }
        let sizes = self.alphabet.factor_sizes();
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::NotProduct);
        }
        if let Some(&index) = keep.iter().find(|&&k| k >= sizes.len()) {
            return Err(Error::InvalidFactor {
                index,
                factors: sizes.len(),
            });
        }
        if keep.len() == sizes.len() {
            return Ok(self.clone());
        }

        let kept_sizes: Vec<usize> = keep.iter().map(|&k| sizes[k]).collect();
        let alphabet = Alphabet::product_of(&kept_sizes)?;
        let mut weights = vec![0.0; alphabet.size()];
        let mut digits = vec![0usize; sizes.len()];
        for &p in &self.weights {
            let target = keep
                .iter()
                .fold(0usize, |acc, &k| acc * sizes[k] + digits[k]);
            weights[target] += p;
            // advance the mixed-radix counter, last factor fastest
            for f in (0..sizes.len()).rev() {
                digits[f] += 1;
                if digits[f] < sizes[f] {
                    break;
                }
                digits[f] = 0;
            }
        }
        Ok(Dist { alphabet, weights })
    }

    /// `I(M1; M2) = H(M1) + H(M2) - H(M1 M2)` for a joint over exactly two factors.
    pub fn mutual_information(&self) -> Result<f64> {
        let sizes = self.alphabet.factor_sizes();
        if sizes.len() != 2 {
            return Err(Error::NotProduct);
        }
        let left = self.marginal(&[0])?;
        let right = self.marginal(&[1])?;
        Ok((left.entropy() + right.entropy() - self.entropy()).max(0.0))
    }

    /// Largest elementwise difference; `None` on size mismatch.
    pub fn max_abs_diff(&self, other: &Dist) -> Option<f64> {
        (self.len() == other.len()).then(|| {
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("Dist serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn entropy(d: &Dist) -> f64 {
    d.entropy()
}

pub fn tensor(d1: &Dist, d2: &Dist) -> Dist {
    d1.tensor(d2)
}

pub fn marginal(d: &Dist, keep: &[usize]) -> Result<Dist> {
    d.marginal(keep)
}

pub fn mutual_information(joint: &Dist) -> Result<f64> {
    joint.mutual_information()
}

/// A stochastic map between finite alphabets.
///
/// Stored column by column: column `i` is the output distribution for input
/// symbol `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input: Alphabet,
    output: Alphabet,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    #[serde(rename = "in")]
    input: usize,
    #[serde(rename = "out")]
    output: usize,
    matrix: Vec<Vec<f64>>,
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ChannelRepr {
            input: self.input.size(),
            output: self.output.size(),
            matrix: self.columns().map(<[f64]>::to_vec).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ChannelRepr::deserialize(deserializer)?;
        let input = Alphabet::new(repr.input).map_err(serde::de::Error::custom)?;
        let output = Alphabet::new(repr.output).map_err(serde::de::Error::custom)?;
        Channel::from_columns(input, output, repr.matrix).map_err(serde::de::Error::custom)
    }
}

impl Channel {
    /// Builds a channel from one output distribution per input symbol.
    pub fn from_columns(input: Alphabet, output: Alphabet, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != input.size() {
            return Err(Error::LengthMismatch {
                expected: input.size(),
                actual: columns.len(),
            });
        }
        let mut data = Vec::with_capacity(input.size() * output.size());
        for mut col in columns {
            if col.len() != output.size() {
                return Err(Error::LengthMismatch {
                    expected: output.size(),
                    actual: col.len(),
                });
            }
            normalize_weights(&mut col)?;
            data.extend(col);
        }
        Ok(Self {
            input,
            output,
            data,
        })
    }

    /// Builds a channel from `P(out | in)` given as `f(out, in)`.
    pub fn from_fn(
        input: Alphabet,
        output: Alphabet,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let columns = (0..input.size())
            .map(|i| (0..output.size()).map(|o| f(o, i)).collect())
            .collect();
        Self::from_columns(input, output, columns)
    }

    pub fn deterministic(
        input: Alphabet,
        output: Alphabet,
        f: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let n_out = output.size();
        let mut data = vec![0.0; input.size() * n_out];
        for i in 0..input.size() {
            let o = f(i);
            if o >= n_out {
                return Err(Error::OutOfRange {
                    name: "deterministic output",
                    value: o as f64,
                });
            }
            data[i * n_out + o] = 1.0;
        }
        Ok(Self {
            input,
            output,
            data,
        })
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        Self::deterministic(alphabet.clone(), alphabet, |i| i).expect("identity is in range")
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    /// `P(out | in)`.
    pub fn entry(&self, out: usize, inp: usize) -> f64 {
        self.data[inp * self.output.size() + out]
    }

    pub fn column(&self, inp: usize) -> &[f64] {
        let n = self.output.size();
        &self.data[inp * n..(inp + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.output.size())
    }

    /// Pushes a distribution through the channel.
    pub fn apply(&self, d: &Dist) -> Result<Dist> {
        if !self.input.same_size(d.alphabet()) {
            return Err(Error::AlphabetMismatch(format!(
                "channel input has {} symbols, distribution has {}",
                self.input.size(),
                d.len()
            )));
        }
        let mut weights = vec![0.0; self.output.size()];
        for (col, &p) in self.columns().zip(d.weights()) {
            if p == 0.0 {
                continue;
            }
            for (w, &c) in weights.iter_mut().zip(col) {
                *w += c * p;
            }
        }
        for w in &mut weights {
            if *w < 0.0 && *w > -1e-15 {
                *w = 0.0;
            }
        }
        Dist::new(self.output.clone(), weights)
    }

    /// `next ∘ self`: first `self`, then `next`.
    pub fn then(&self, next: &Channel) -> Result<Channel> {
        if !self.output.same_size(&next.input) {
            return Err(Error::AlphabetMismatch(format!(
                "cannot feed {} outputs into {} inputs",
                self.output.size(),
                next.input.size()
            )));
        }
        let n_out = next.output.size();
        let mut data = vec![0.0; self.input.size() * n_out];
        for (i, col) in self.columns().enumerate() {
            let target = &mut data[i * n_out..(i + 1) * n_out];
            for (mid, &p) in col.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (t, &q) in target.iter_mut().zip(next.column(mid)) {
                    *t += p * q;
                }
            }
        }
        Ok(Channel {
            input: self.input.clone(),
            output: next.output.clone(),
            data,
        })
    }

    /// Parallel composition: `(i, j) -> (o, p)` with independent factors.
    pub fn tensor(&self, other: &Channel) -> Channel {
        let input = self.input.product(&other.input);
        let output = self.output.product(&other.output);
        let (n1, n2) = (self.output.size(), other.output.size());
        let mut data = Vec::with_capacity(input.size() * output.size());
        for i in 0..self.input.size() {
            for j in 0..other.input.size() {
                for o in 0..n1 {
                    let p = self.entry(o, i);
                    data.extend((0..n2).map(|q| p * other.entry(q, j)));
                }
            }
        }
        Channel {
            input,
            output,
            data,
        }
    }

    /// Largest deviation of any column sum from one.
    pub fn stochasticity_error(&self) -> f64 {
        self.columns()
            .map(|c| (c.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("Channel serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn channel_apply(c: &Channel, d: &Dist) -> Result<Dist> {
    c.apply(d)
}
