//! I.i.d. disorder realizations and the shift action on them.
//!
//! A realization ω assigns a potential value to every vertex. It is a pure
//! function of (master seed, sample index, canonical vertex label): the value
//! at a vertex is identical across volumes, runs, and thread counts, which is
//! what lets one ω be truncated to many finite volumes consistently.
//!
//! Shifts act by relabeling: [T_x ω](y) = ω(τ_x⁻¹ y). The consistency
//! relation T_x T_y = T_{τ_x(y)} mirrors the compositional identity of the
//! underlying shifts and therefore holds exactly on forward pairs (word
//! concatenation canonical, the case path machinery composes along) and not
//! in general — see the lattice module tests for the counterexample.
//! Shifted realizations store their shift words lazily and compose by list
//! append, so these identities are genuine (tested) statements rather than
//! construction artifacts.
//!
//! Only the i.i.d. family ships; it is the one concrete instance of the
//! abstract ergodic hypotheses with computational content.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{self, GeneratorWord, LatticeContext, VertexLabel};
use crate::numerics::{hash64, unit_from_hash};

#[derive(Debug, Error, PartialEq)]
pub enum DisorderError {
    #[error("discrete distribution needs matching, nonempty values/weights; got {values} values, {weights} weights")]
    BadDiscrete { values: usize, weights: usize },
    #[error("bernoulli probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// Single-site distribution of the i.i.d. potential. All variants have
/// bounded support (the sampling function must be essentially bounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// V ≡ 0 (the free Laplacian).
    Zero,
    /// V ≡ c.
    Constant { c: f64 },
    /// Uniform on [−c, c].
    Uniform { c: f64 },
    /// +w with probability p, −w otherwise.
    Bernoulli { p: f64, w: f64 },
    /// Finitely many values with the given (unnormalized) weights.
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

impl Distribution {
    pub fn validate(&self) -> Result<(), DisorderError> {
        match self {
            Distribution::Bernoulli { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(DisorderError::BadProbability(*p));
                }
            }
            Distribution::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(DisorderError::BadDiscrete {
                        values: values.len(),
                        weights: weights.len(),
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Inverse CDF at u ∈ [0, 1).
    fn quantile(&self, u: f64) -> f64 {
        match self {
            Distribution::Zero => 0.0,
            Distribution::Constant { c } => *c,
            Distribution::Uniform { c } => (2.0 * u - 1.0) * c,
            Distribution::Bernoulli { p, w } => {
                if u < *p {
                    *w
                } else {
                    -*w
                }
            }
            Distribution::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights.iter()) {
                    acc += w / total;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated nonempty")
            }
        }
    }

    /// Bound C with support ⊆ [−C, C].
    pub fn support_bound(&self) -> f64 {
        match self {
            Distribution::Zero => 0.0,
            Distribution::Constant { c } => c.abs(),
            Distribution::Uniform { c } => c.abs(),
            Distribution::Bernoulli { w, .. } => w.abs(),
            Distribution::Discrete { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Constant-valued distributions admit closed recursions (every vertex
    /// carries the same potential).
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Distribution::Zero => Some(0.0),
            Distribution::Constant { c } => Some(*c),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Zero => 0.0,
            Distribution::Constant { c } => *c,
            Distribution::Uniform { .. } => 0.0,
            Distribution::Bernoulli { p, w } => w * (2.0 * p - 1.0),
            Distribution::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values
                    .iter()
                    .zip(weights.iter())
                    .map(|(v, w)| v * w / total)
                    .sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution::Zero | Distribution::Constant { .. } => 0.0,
            Distribution::Uniform { c } => c * c / 3.0,
            Distribution::Bernoulli { p, w } => {
                let m = self.mean();
                p * (w - m) * (w - m) + (1.0 - p) * (-w - m) * (-w - m)
            }
            Distribution::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                let m = self.mean();
                values
                    .iter()
                    .zip(weights.iter())
                    .map(|(v, w)| (v - m) * (v - m) * w / total)
                    .sum()
            }
        }
    }
}

/// Distribution + master seed: everything needed to reconstruct the ergodic
/// family byte-for-byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub distribution: Distribution,
    pub master_seed: u64,
}

impl DisorderSpec {
    pub fn new(distribution: Distribution, master_seed: u64) -> Result<Self, DisorderError> {
        distribution.validate()?;
        Ok(Self {
            distribution,
            master_seed,
        })
    }

    pub fn zero(master_seed: u64) -> Self {
        Self {
            distribution: Distribution::Zero,
            master_seed,
        }
    }

    /// The ω for Monte-Carlo sample `index` (index 0 is the base stream).
    pub fn realization(&self, index: u64) -> DisorderRealization {
        DisorderRealization {
            spec: self.clone(),
            sample: index,
            shifts: Vec::new(),
        }
    }
}

/// One accumulated shift: the generator word of some x, with `inverse`
/// marking T_x⁻¹ rather than T_x.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftToken {
    pub word: GeneratorWord,
    pub inverse: bool,
}

/// A disorder realization ω, possibly relabeled by accumulated shifts.
///
/// Evaluation applies the stored shifts' inverses to the queried vertex
/// (most recent shift first) and then samples the i.i.d. field at the
/// resulting label.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    spec: DisorderSpec,
    sample: u64,
    shifts: Vec<ShiftToken>,
}

impl DisorderRealization {
    pub fn spec(&self) -> &DisorderSpec {
        &self.spec
    }

    pub fn sample_index(&self) -> u64 {
        self.sample
    }

    /// Evaluates to the same value at every vertex when the distribution is
    /// constant (shifts are then irrelevant).
    pub fn constant_value(&self) -> Option<f64> {
        self.spec.distribution.constant_value()
    }

    /// V_ω(x): the potential of this realization at vertex x.
    pub fn potential_at(&self, ctx: &LatticeContext, x: &VertexLabel) -> f64 {
        if let Some(c) = self.constant_value() {
            return c;
        }
        let mut effective = x.clone();
        for token in self.shifts.iter().rev() {
            effective = if token.inverse {
                // (T_x^{-1})^{-1} = T_x relabeling: omega(tau_x y)
                lattice::apply_word(ctx, &token.word, &effective)
            } else {
                lattice::apply_word_inverse(ctx, &token.word, &effective)
            };
        }
        self.sample_raw(&effective)
    }

    /// Sample the unshifted i.i.d. field at a label.
    fn sample_raw(&self, v: &VertexLabel) -> f64 {
        let h = hash64(
            self.spec.master_seed,
            self.sample,
            v.label_string().as_bytes(),
        );
        self.spec.distribution.quantile(unit_from_hash(h))
    }

    /// T_x ω: shift the realization by the generalized shift of x.
    pub fn shift(&self, ctx: &LatticeContext, x: &VertexLabel) -> DisorderRealization {
        let mut out = self.clone();
        out.shifts.push(ShiftToken {
            word: lattice::exponents_of(ctx, x),
            inverse: false,
        });
        out
    }

    /// T_x⁻¹ ω.
    pub fn shift_inverse(&self, ctx: &LatticeContext, x: &VertexLabel) -> DisorderRealization {
        let mut out = self.clone();
        out.shifts.push(ShiftToken {
            word: lattice::exponents_of(ctx, x),
            inverse: true,
        });
        out
    }
}
