//! Exact integer geometry of the Bethe lattice.
//!
//! Vertices are labeled by the digit tuple (0, a₁, …, a_ℓ) encoding the unique
//! path from the root: a₁ ∈ {0, …, κ} picks one of the κ+1 forward neighbors
//! of the root, and a_j ∈ {0, …, κ−1} for j ≥ 2 picks one of the κ forward
//! neighbors at deeper levels. The root itself is the empty digit sequence;
//! the printed form "0,a₁,…" is a serialization concern only.
//!
//! Two elementary automorphisms generate all shifts:
//!
//! - τ₁, a generalized level translation that moves the root to (0,0), and
//! - τ₂, a generalized rotation that fixes the root and rotates each level.
//!
//! Every vertex x at level ℓ is reached from the root by a unique word
//! x = (τ₂^{d₁}τ₁)⋯(τ₂^{d_ℓ}τ₁)(0) with d₁ = a₁ and d_j = (a_j − a_{j−1}) mod κ,
//! and the generalized shift τ_x is that same product acting on arbitrary
//! vertices. [`tau_x_closed`] evaluates τ_x(z) in closed form (a four-case
//! analysis); [`apply_word`] evaluates it by iterating τ₁/τ₂. The two routes
//! are independent implementations and their equality is the core property
//! test of this module.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Errors from lattice-geometry operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("digit {digit} at position {position} out of range for connectivity {kappa}")]
    InvalidDigit {
        digit: u32,
        position: usize,
        kappa: u32,
    },
    #[error("connectivity must satisfy kappa >= 1, got {0}")]
    InvalidKappa(u32),
    #[error("word exponent {exponent} at position {position} out of range for connectivity {kappa}")]
    InvalidExponent {
        exponent: u32,
        position: usize,
        kappa: u32,
    },
    #[error("ball of radius {radius} has {size} vertices, above the guard of {guard}")]
    BallTooLarge { radius: u32, size: u128, guard: u128 },
    #[error("first spine digit {a1} out of range 0..={kappa}")]
    InvalidSpineDigit { a1: u32, kappa: u32 },
    #[error("path must contain at least one vertex")]
    EmptyPath,
}

/// Connectivity context: κ ≥ 1 forward neighbors per non-root vertex.
///
/// κ = 1 is the chain ℤ and is fully supported; vertices from different
/// contexts never mix (every operation validates its inputs against κ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeContext {
    kappa: u32,
}

impl LatticeContext {
    pub fn new(kappa: u32) -> Result<Self, LatticeError> {
        if kappa < 1 {
            return Err(LatticeError::InvalidKappa(kappa));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Degree of every vertex (root included): κ + 1.
    pub fn degree(&self) -> u32 {
        self.kappa + 1
    }

    /// Check that `v` is a valid label for this connectivity.
    pub fn validate(&self, v: &VertexLabel) -> Result<(), LatticeError> {
        for (j, &d) in v.digits.iter().enumerate() {
            let bound = if j == 0 { self.kappa } else { self.kappa - 1 };
            if d > bound {
                return Err(LatticeError::InvalidDigit {
                    digit: d,
                    position: j + 1,
                    kappa: self.kappa,
                });
            }
        }
        Ok(())
    }

    /// Check that `w` is a valid generator word for this connectivity.
    pub fn validate_word(&self, w: &GeneratorWord) -> Result<(), LatticeError> {
        for (j, &d) in w.exponents.iter().enumerate() {
            let bound = if j == 0 { self.kappa } else { self.kappa - 1 };
            if d > bound {
                return Err(LatticeError::InvalidExponent {
                    exponent: d,
                    position: j + 1,
                    kappa: self.kappa,
                });
            }
        }
        Ok(())
    }
}

/// A vertex of 𝔹 as its digit tuple; the root is the empty sequence.
///
/// Ordering is canonical: by level first, then lexicographic digits. This
/// order indexes every matrix and CSV row produced by the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexLabel {
    // Ord derives (level, lex) because Vec compares lexicographically only
    // after the level field.
    level: usize,
    digits: Vec<u32>,
}

impl VertexLabel {
    pub fn root() -> Self {
        Self {
            level: 0,
            digits: Vec::new(),
        }
    }

    pub fn new(ctx: &LatticeContext, digits: Vec<u32>) -> Result<Self, LatticeError> {
        let v = Self {
            level: digits.len(),
            digits,
        };
        ctx.validate(&v)?;
        Ok(v)
    }

    /// Construct without range checks; used by the automorphisms whose
    /// arithmetic keeps digits in range by construction.
    pub(crate) fn from_digits_unchecked(digits: Vec<u32>) -> Self {
        Self {
            level: digits.len(),
            digits,
        }
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Distance from the root.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn is_root(&self) -> bool {
        self.digits.is_empty()
    }

    /// The unique neighbor one level closer to the root; `None` at the root.
    pub fn parent(&self) -> Option<VertexLabel> {
        if self.is_root() {
            None
        } else {
            Some(Self::from_digits_unchecked(
                self.digits[..self.level - 1].to_vec(),
            ))
        }
    }

    /// Forward extension by one digit (validity is the caller's concern).
    pub fn child(&self, digit: u32) -> VertexLabel {
        let mut d = self.digits.clone();
        d.push(digit);
        Self::from_digits_unchecked(d)
    }

    /// `w` is a prefix-extension of `self`.
    pub fn is_ancestor_of(&self, w: &VertexLabel) -> bool {
        self.level <= w.level && w.digits[..self.level] == self.digits[..]
    }

    /// Stable text form: comma-joined digits with a leading "0", e.g. "0,2,1".
    /// Used in CSV keys and RNG seeding; the root prints as "0".
    pub fn label_string(&self) -> String {
        let mut s = String::from("0");
        for d in &self.digits {
            s.push(',');
            s.push_str(&d.to_string());
        }
        s
    }

    pub fn parse(ctx: &LatticeContext, s: &str) -> Result<Self, LatticeError> {
        let trimmed = s.trim();
        if trimmed == "0" {
            return Ok(Self::root());
        }
        let mut digits = Vec::new();
        for (i, part) in trimmed.split(',').enumerate() {
            let d: u32 = part.trim().parse().map_err(|_| LatticeError::InvalidDigit {
                digit: u32::MAX,
                position: i,
                kappa: ctx.kappa,
            })?;
            if i == 0 {
                if d != 0 {
                    return Err(LatticeError::InvalidDigit {
                        digit: d,
                        position: 0,
                        kappa: ctx.kappa,
                    });
                }
            } else {
                digits.push(d);
            }
        }
        Self::new(ctx, digits)
    }
}

impl fmt::Display for VertexLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label_string())
    }
}

/// Exponent sequence (d₁, …, d_ℓ) of the product (τ₂^{d₁}τ₁)⋯(τ₂^{d_ℓ}τ₁).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneratorWord {
    exponents: Vec<u32>,
}

impl GeneratorWord {
    pub fn new(ctx: &LatticeContext, exponents: Vec<u32>) -> Result<Self, LatticeError> {
        let w = Self { exponents };
        ctx.validate_word(&w)?;
        Ok(w)
    }

    pub fn empty() -> Self {
        Self {
            exponents: Vec::new(),
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

/// A path γ(0)=root, γ(1), …, γ(L−1), each vertex a one-digit forward
/// extension of the previous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootPath {
    vertices: Vec<VertexLabel>,
}

impl RootPath {
    pub fn new(vertices: Vec<VertexLabel>) -> Result<Self, LatticeError> {
        if vertices.is_empty() {
            return Err(LatticeError::EmptyPath);
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[VertexLabel] {
        &self.vertices
    }

    /// Number of vertices L.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn endpoint(&self) -> &VertexLabel {
        self.vertices.last().expect("non-empty by construction")
    }

    /// True when the generator word of the endpoint is [a₁, 0, 0, …] — the
    /// eventually-zero-exponent criterion that guarantees the path is
    /// macroscopically representative.
    pub fn is_spine(&self, ctx: &LatticeContext) -> bool {
        let word = exponents_of(ctx, self.endpoint());
        word.exponents().iter().skip(1).all(|&d| d == 0)
    }
}

/// Graph distance: number of edges on the unique path between x and y.
pub fn distance(
    ctx: &LatticeContext,
    x: &VertexLabel,
    y: &VertexLabel,
) -> Result<usize, LatticeError> {
    ctx.validate(x)?;
    ctx.validate(y)?;
    let common = x
        .digits
        .iter()
        .zip(y.digits.iter())
        .take_while(|(a, b)| a == b)
        .count();
    Ok(x.level + y.level - 2 * common)
}

/// The κ+1 neighbors of a vertex: its parent (absent at the root) plus its
/// forward children.
pub fn neighbors(ctx: &LatticeContext, v: &VertexLabel) -> Result<Vec<VertexLabel>, LatticeError> {
    ctx.validate(v)?;
    let mut out = Vec::with_capacity(ctx.degree() as usize);
    if let Some(p) = v.parent() {
        out.push(p);
    }
    let child_range = if v.is_root() {
        0..=ctx.kappa
    } else {
        0..=ctx.kappa.saturating_sub(1)
    };
    for d in child_range {
        out.push(v.child(d));
    }
    out.sort();
    Ok(out)
}

/// Generalized level translation τ₁.
///
/// Four defining clauses: the root moves up to (0,0); (0,κ) drops to the
/// root; labels starting with κ are left-shifted with the new first digit
/// incremented mod κ+1; all other labels are right-shifted by a leading 0.
pub fn tau1(ctx: &LatticeContext, v: &VertexLabel) -> VertexLabel {
    let k = ctx.kappa;
    let d = &v.digits;
    if d.is_empty() {
        return VertexLabel::from_digits_unchecked(vec![0]);
    }
    if d[0] == k {
        if d.len() == 1 {
            return VertexLabel::root();
        }
        // left shift: drop a1, bump the new head mod (kappa+1)
        let mut out = Vec::with_capacity(d.len() - 1);
        out.push((d[1] + 1) % (k + 1));
        out.extend_from_slice(&d[2..]);
        return VertexLabel::from_digits_unchecked(out);
    }
    // right shift by a leading zero
    let mut out = Vec::with_capacity(d.len() + 1);
    out.push(0);
    out.extend_from_slice(d);
    VertexLabel::from_digits_unchecked(out)
}

/// Generalized rotation τ₂: fixes the root, increments the first digit
/// mod κ+1 and every later digit mod κ. Levels are preserved.
pub fn tau2(ctx: &LatticeContext, v: &VertexLabel) -> VertexLabel {
    let k = ctx.kappa;
    let out: Vec<u32> = v
        .digits
        .iter()
        .enumerate()
        .map(|(j, &a)| if j == 0 { (a + 1) % (k + 1) } else { (a + 1) % k })
        .collect();
    VertexLabel::from_digits_unchecked(out)
}

/// Inverse of τ₁ (derived; no closed form is given for it upstream).
pub fn tau1_inv(ctx: &LatticeContext, v: &VertexLabel) -> VertexLabel {
    let k = ctx.kappa;
    let d = &v.digits;
    if d.is_empty() {
        return VertexLabel::from_digits_unchecked(vec![k]);
    }
    if d[0] == 0 {
        // strip the leading zero ((0,0) strips to the root)
        return VertexLabel::from_digits_unchecked(d[1..].to_vec());
    }
    // preimage under the left-shift clause
    let mut out = Vec::with_capacity(d.len() + 1);
    out.push(k);
    out.push((d[0] + k) % (k + 1)); // d[0] - 1 mod (kappa+1), d[0] >= 1
    out.extend_from_slice(&d[1..]);
    VertexLabel::from_digits_unchecked(out)
}

/// Inverse of τ₂: decrements digits in their respective moduli.
pub fn tau2_inv(ctx: &LatticeContext, v: &VertexLabel) -> VertexLabel {
    let k = ctx.kappa;
    let out: Vec<u32> = v
        .digits
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if j == 0 {
                (a + k) % (k + 1)
            } else {
                (a + k - 1) % k
            }
        })
        .collect();
    VertexLabel::from_digits_unchecked(out)
}

/// The unique generator word with `apply_word(word, root) = x`:
/// d₁ = a₁ and d_j = (a_j − a_{j−1}) mod κ. The root maps to the empty word.
pub fn exponents_of(ctx: &LatticeContext, x: &VertexLabel) -> GeneratorWord {
    let k = ctx.kappa as i64;
    let d = &x.digits;
    let mut exps = Vec::with_capacity(d.len());
    for j in 0..d.len() {
        if j == 0 {
            exps.push(d[0]);
        } else {
            exps.push((d[j] as i64 - d[j - 1] as i64).rem_euclid(k) as u32);
        }
    }
    GeneratorWord { exponents: exps }
}

/// Evaluate (τ₂^{d₁}τ₁)⋯(τ₂^{d_ℓ}τ₁)(v) by iterated application of τ₁ and
/// τ₂, rightmost factor first. The empty word is the identity.
pub fn apply_word(ctx: &LatticeContext, word: &GeneratorWord, v: &VertexLabel) -> VertexLabel {
    let mut cur = v.clone();
    for &d in word.exponents.iter().rev() {
        cur = tau1(ctx, &cur);
        for _ in 0..d {
            cur = tau2(ctx, &cur);
        }
    }
    cur
}

/// Evaluate the inverse shift τ_x⁻¹(v) for the word of x: the factor
/// inverses (τ₁⁻¹ τ₂^{−d_j}) applied left factor first.
pub fn apply_word_inverse(
    ctx: &LatticeContext,
    word: &GeneratorWord,
    v: &VertexLabel,
) -> VertexLabel {
    let mut cur = v.clone();
    for &d in word.exponents.iter() {
        for _ in 0..d {
            cur = tau2_inv(ctx, &cur);
        }
        cur = tau1_inv(ctx, &cur);
    }
    cur
}

/// Which clause of the closed-form shift evaluation fired.
///
/// `Extend` is the generic forward case; `PopSingle` the single-digit
/// backtrack; `PartialPop` the left-shift run that turns forward again;
/// `PopAll` the full truncation; `PassRoot` the left-shift run that crosses
/// the old root. The instrumentation exists so tests can assert every
/// branch of the case analysis is exercised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftCase {
    /// x = root (identity shift) or z = root (τ_x(0) = x).
    Trivial,
    /// b₁ ≠ κ: γ_z is grafted forward at x.
    Extend,
    /// b₁ = κ, single digit: one step back toward the old root.
    PopSingle,
    /// b₁ = κ, backtrack n < min(m,ℓ) steps, then forward again.
    PartialPop,
    /// every stage backtracks and m ≤ ℓ: z lands on a prefix of x.
    PopAll,
    /// every stage backtracks and m > ℓ: z passes through the old root.
    PassRoot,
}

/// Closed-form generalized shift τ_x(z), with the case that fired.
///
/// Equals `apply_word(exponents_of(x), z)` for every input; the two
/// implementations share no code and their exhaustive agreement on balls is
/// asserted in tests and by `bethe verify`.
pub fn tau_x_closed_traced(
    ctx: &LatticeContext,
    x: &VertexLabel,
    z: &VertexLabel,
) -> (VertexLabel, ShiftCase) {
    let k = ctx.kappa as i64;
    if x.is_root() {
        return (z.clone(), ShiftCase::Trivial);
    }
    if z.is_root() {
        return (x.clone(), ShiftCase::Trivial);
    }
    let a = &x.digits; // a_1..a_ell (1-based in the math)
    let b = &z.digits; // b_1..b_m
    let ell = a.len();
    let m = b.len();
    let word = exponents_of(ctx, x);
    let d = word.exponents();
    let a_ell = a[ell - 1] as i64;

    if b[0] != ctx.kappa {
        // graft: (0, a_1..a_ell, (b_1 + a_ell) mod k, ..., (b_m + a_ell) mod k)
        let mut out = Vec::with_capacity(ell + m);
        out.extend_from_slice(a);
        for &bj in b.iter() {
            out.push(((bj as i64 + a_ell).rem_euclid(k)) as u32);
        }
        return (VertexLabel::from_digits_unchecked(out), ShiftCase::Extend);
    }
    if m == 1 {
        return (
            VertexLabel::from_digits_unchecked(a[..ell - 1].to_vec()),
            ShiftCase::PopSingle,
        );
    }

    // scan for the smallest n in 1..min(m,ell)-1 with c_{n+1} != kappa, where
    // c_{n+1} = [ (b_{n+1} + sum_{j=ell-(n-2)}^{ell} d_j) mod k + 1 + d_{ell-(n-1)} ] mod (k+1)
    let bound = m.min(ell) - 1;
    let mut tail_sum: i64 = 0; // sum_{j=ell-(n-2)}^{ell} d_j, empty at n = 1
    for n in 1..=bound {
        let c = ((b[n] as i64 + tail_sum).rem_euclid(k) + 1 + d[ell - n] as i64)
            .rem_euclid(k + 1) as u32;
        if c != ctx.kappa {
            // backtrack n levels, turn forward with digit (c + a_{ell-n}) mod k,
            // then graft the remaining digits of z shifted by a_ell
            let keep = ell - n;
            let mut out = Vec::with_capacity(keep + 1 + m.saturating_sub(n + 1));
            out.extend_from_slice(&a[..keep]);
            out.push(((c as i64 + a[keep - 1] as i64).rem_euclid(k)) as u32);
            for &bj in &b[n + 1..] {
                out.push(((bj as i64 + a_ell).rem_euclid(k)) as u32);
            }
            return (
                VertexLabel::from_digits_unchecked(out),
                ShiftCase::PartialPop,
            );
        }
        tail_sum += d[ell - n] as i64;
    }

    if m <= ell {
        return (
            VertexLabel::from_digits_unchecked(a[..ell - m].to_vec()),
            ShiftCase::PopAll,
        );
    }
    // m > ell: the shift passes through the old root; the first digit of the
    // image mixes b_{ell+1} with a_ell and a_1, the rest graft with +a_ell.
    let a1 = a[0] as i64;
    let head =
        ((b[ell] as i64 + a_ell - a1).rem_euclid(k) + 1 + a1).rem_euclid(k + 1) as u32;
    let mut out = Vec::with_capacity(m - ell);
    out.push(head);
    for &bj in &b[ell + 1..] {
        out.push(((bj as i64 + a_ell).rem_euclid(k)) as u32);
    }
    (VertexLabel::from_digits_unchecked(out), ShiftCase::PassRoot)
}

/// Closed-form generalized shift τ_x(z) (see [`tau_x_closed_traced`]).
pub fn tau_x_closed(ctx: &LatticeContext, x: &VertexLabel, z: &VertexLabel) -> VertexLabel {
    tau_x_closed_traced(ctx, x, z).0
}

/// τ_x⁻¹(z), evaluated through the inverse word. Satisfies
/// τ_x⁻¹ = τ_w with w = τ_x⁻¹(root) (verified against brute force in tests).
pub fn tau_x_inverse(ctx: &LatticeContext, x: &VertexLabel, z: &VertexLabel) -> VertexLabel {
    apply_word_inverse(ctx, &exponents_of(ctx, x), z)
}

/// Number of vertices within distance L of the root.
pub fn ball_size(ctx: &LatticeContext, radius: u32) -> u128 {
    let k = ctx.kappa as u128;
    if k == 1 {
        return 2 * radius as u128 + 1;
    }
    let mut pow: u128 = 1;
    for _ in 0..radius {
        pow = pow.saturating_mul(k);
    }
    1 + (k + 1) * (pow - 1) / (k - 1)
}

/// Guard on materialized ball sizes.
pub const BALL_SIZE_GUARD: u128 = 50_000_000;

/// All vertices with distance ≤ L from the root, in canonical order
/// (level, then lexicographic digits).
pub fn ball(ctx: &LatticeContext, radius: u32) -> Result<Vec<VertexLabel>, LatticeError> {
    let size = ball_size(ctx, radius);
    if size > BALL_SIZE_GUARD {
        return Err(LatticeError::BallTooLarge {
            radius,
            size,
            guard: BALL_SIZE_GUARD,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    out.push(VertexLabel::root());
    let mut level_start = 0;
    for _ in 0..radius {
        let level_end = out.len();
        for i in level_start..level_end {
            let v = out[i].clone();
            let hi = if v.is_root() { ctx.kappa } else { ctx.kappa - 1 };
            for d in 0..=hi {
                out.push(v.child(d));
            }
        }
        level_start = level_end;
    }
    Ok(out)
}

/// The spine path with generator word [a₁, 0, 0, …]: γ(1) = (0,a₁) and every
/// later step extends by the digit a₁ mod κ. Eventually-zero exponents make
/// every spine macroscopically representative.
pub fn spine_path(
    ctx: &LatticeContext,
    a1: u32,
    length: usize,
) -> Result<RootPath, LatticeError> {
    if a1 > ctx.kappa {
        return Err(LatticeError::InvalidSpineDigit { a1, kappa: ctx.kappa });
    }
    if length == 0 {
        return Err(LatticeError::EmptyPath);
    }
    let mut vertices = Vec::with_capacity(length);
    let mut cur = VertexLabel::root();
    vertices.push(cur.clone());
    for j in 1..length {
        let digit = if j == 1 { a1 } else { a1 % ctx.kappa };
        cur = cur.child(digit);
        vertices.push(cur.clone());
    }
    RootPath::new(vertices)
}

/// Collect the set of [`ShiftCase`]s hit while checking closed-form/word
/// agreement of τ_x over all x, z in `ball(radius)`; returns the mismatch
/// count and the case set. Used by tests and `bethe verify`.
pub fn shift_equivalence_sweep(
    ctx: &LatticeContext,
    radius: u32,
) -> Result<(usize, HashSet<ShiftCase>), LatticeError> {
    let vertices = ball(ctx, radius)?;
    let mut mismatches = 0;
    let mut cases = HashSet::new();
    for x in &vertices {
        let word = exponents_of(ctx, x);
        for z in &vertices {
            let (closed, case) = tau_x_closed_traced(ctx, x, z);
            cases.insert(case);
            if closed != apply_word(ctx, &word, z) {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches, cases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet, VecDeque};

    fn ctx(k: u32) -> LatticeContext {
        LatticeContext::new(k).unwrap()
    }

    fn v(ctx_: &LatticeContext, digits: &[u32]) -> VertexLabel {
        VertexLabel::new(ctx_, digits.to_vec()).unwrap()
    }

    /// Brute-force BFS distance over the ball adjacency, the independent
    /// oracle for the prefix-arithmetic distance.
    fn bfs_distance(c: &LatticeContext, from: &VertexLabel, to: &VertexLabel) -> usize {
        let mut seen: HashMap<VertexLabel, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        seen.insert(from.clone(), 0);
        queue.push_back(from.clone());
        while let Some(u) = queue.pop_front() {
            let d = seen[&u];
            if &u == to {
                return d;
            }
            for w in neighbors(c, &u).unwrap() {
                if !seen.contains_key(&w) {
                    seen.insert(w.clone(), d + 1);
                    queue.push_back(w);
                }
            }
        }
        unreachable!("tree is connected");
    }

    #[test]
    fn distance_examples() {
        let c = ctx(2);
        let root = VertexLabel::root();
        assert_eq!(distance(&c, &root, &root).unwrap(), 0);
        assert_eq!(distance(&c, &v(&c, &[1]), &v(&c, &[1, 0])).unwrap(), 1);
        let a = v(&c, &[0]);
        let b = v(&c, &[1]);
        assert_eq!(distance(&c, &a, &b).unwrap(), 2);
        assert_eq!(bfs_distance(&c, &a, &b), 2);
    }

    #[test]
    fn distance_matches_bfs_on_ball() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 3).unwrap();
            for x in &verts {
                for y in &verts {
                    let d = distance(&c, x, y).unwrap();
                    assert_eq!(d, bfs_distance(&c, x, y), "k={k} x={x} y={y}");
                    assert_eq!(d, distance(&c, y, x).unwrap());
                    assert_eq!(d == 0, x == y);
                }
            }
        }
    }

    #[test]
    fn distance_rejects_invalid_digits() {
        let c = ctx(2);
        let bad = VertexLabel::from_digits_unchecked(vec![3]);
        assert!(matches!(
            distance(&c, &bad, &VertexLabel::root()),
            Err(LatticeError::InvalidDigit { .. })
        ));
    }

    #[test]
    fn neighbors_examples() {
        let c = ctx(2);
        let n_root = neighbors(&c, &VertexLabel::root()).unwrap();
        assert_eq!(n_root, vec![v(&c, &[0]), v(&c, &[1]), v(&c, &[2])]);
        let n1 = neighbors(&c, &v(&c, &[1])).unwrap();
        assert_eq!(
            n1,
            vec![VertexLabel::root(), v(&c, &[1, 0]), v(&c, &[1, 1])]
        );
        let c1 = ctx(1);
        let n = neighbors(&c1, &v(&c1, &[0])).unwrap();
        assert_eq!(n.len(), 2);
        assert!(n.contains(&VertexLabel::root()) && n.contains(&v(&c1, &[0, 0])));
        for k in [1u32, 2, 3] {
            let ck = ctx(k);
            for w in ball(&ck, 2).unwrap() {
                assert_eq!(neighbors(&ck, &w).unwrap().len() as u32, k + 1);
            }
        }
    }

    #[test]
    fn tau1_defining_clauses() {
        let c = ctx(2);
        assert_eq!(tau1(&c, &VertexLabel::root()), v(&c, &[0]));
        assert_eq!(tau1(&c, &v(&c, &[2])), VertexLabel::root());
        assert_eq!(tau1(&c, &v(&c, &[2, 1, 0])), v(&c, &[2, 0]));
        assert_eq!(tau1(&c, &v(&c, &[1, 0])), v(&c, &[0, 1, 0]));
    }

    #[test]
    fn tau2_defining_clauses() {
        let c = ctx(2);
        assert_eq!(tau2(&c, &VertexLabel::root()), VertexLabel::root());
        assert_eq!(tau2(&c, &v(&c, &[2])), v(&c, &[0]));
        assert_eq!(tau2(&c, &v(&c, &[2, 1])), v(&c, &[0, 0]));
        for w in ball(&c, 3).unwrap() {
            assert_eq!(tau2(&c, &w).level(), w.level());
        }
    }

    #[test]
    fn tau_inverses_roundtrip() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            for w in ball(&c, 4).unwrap() {
                assert_eq!(tau1_inv(&c, &tau1(&c, &w)), w, "tau1 k={k} w={w}");
                assert_eq!(tau1(&c, &tau1_inv(&c, &w)), w, "tau1' k={k} w={w}");
                assert_eq!(tau2_inv(&c, &tau2(&c, &w)), w, "tau2 k={k} w={w}");
                assert_eq!(tau2(&c, &tau2_inv(&c, &w)), w, "tau2' k={k} w={w}");
            }
        }
    }

    #[test]
    fn tau_bijective_on_ball5() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 5).unwrap();
            let images1: HashSet<_> = verts.iter().map(|w| tau1(&c, w)).collect();
            let images2: HashSet<_> = verts.iter().map(|w| tau2(&c, w)).collect();
            assert_eq!(images1.len(), verts.len(), "tau1 injective, k={k}");
            assert_eq!(images2.len(), verts.len(), "tau2 injective, k={k}");
        }
    }

    #[test]
    fn exponents_examples() {
        let c = ctx(2);
        assert_eq!(exponents_of(&c, &v(&c, &[1])).exponents(), &[1]);
        // round-trip oracle for the derived words
        let w = exponents_of(&c, &v(&c, &[1, 0]));
        assert_eq!(w.exponents(), &[1, 1]);
        assert_eq!(apply_word(&c, &w, &VertexLabel::root()), v(&c, &[1, 0]));
        let w = exponents_of(&c, &v(&c, &[2, 1, 1]));
        assert_eq!(w.exponents(), &[2, 1, 0]);
        assert_eq!(apply_word(&c, &w, &VertexLabel::root()), v(&c, &[2, 1, 1]));
        assert!(exponents_of(&c, &VertexLabel::root()).is_empty());
    }

    #[test]
    fn apply_word_examples() {
        let c = ctx(2);
        for w in ball(&c, 3).unwrap() {
            assert_eq!(apply_word(&c, &GeneratorWord::empty(), &w), w);
        }
        let word = GeneratorWord::new(&c, vec![1, 1]).unwrap();
        assert_eq!(apply_word(&c, &word, &VertexLabel::root()), v(&c, &[1, 0]));
        for a1 in 0..=2 {
            let word = GeneratorWord::new(&c, vec![a1]).unwrap();
            assert_eq!(apply_word(&c, &word, &VertexLabel::root()), v(&c, &[a1]));
        }
    }

    #[test]
    fn word_reaches_vertex_and_telescopes() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            for x in ball(&c, 4).unwrap() {
                let word = exponents_of(&c, &x);
                assert_eq!(apply_word(&c, &word, &VertexLabel::root()), x, "k={k}");
                // telescoping: partial sums of exponents reproduce digits mod k
                let mut sum = 0i64;
                for (n, &d) in word.exponents().iter().enumerate() {
                    sum += d as i64;
                    assert_eq!(
                        sum.rem_euclid(k as i64),
                        (x.digits()[n] as i64).rem_euclid(k as i64),
                        "telescoping k={k} x={x} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn word_uniqueness_exhaustive_ball3() {
        // every vertex of ball(3) is produced by exactly one valid word of
        // its own length
        for k in [1, 2, 3] {
            let c = ctx(k);
            for x in ball(&c, 3).unwrap() {
                let ell = x.level();
                let mut hits = 0;
                let mut stack: Vec<Vec<u32>> = vec![Vec::new()];
                while let Some(partial) = stack.pop() {
                    if partial.len() == ell {
                        let wd = GeneratorWord::new(&c, partial).unwrap();
                        if apply_word(&c, &wd, &VertexLabel::root()) == x {
                            hits += 1;
                        }
                        continue;
                    }
                    let hi = if partial.is_empty() { k } else { k - 1 };
                    for d in 0..=hi {
                        let mut nxt = partial.clone();
                        nxt.push(d);
                        stack.push(nxt);
                    }
                }
                assert_eq!(hits, 1, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn closed_shift_examples() {
        let c = ctx(2);
        assert_eq!(
            tau_x_closed(&c, &v(&c, &[1]), &v(&c, &[0])),
            v(&c, &[1, 1])
        );
        assert_eq!(
            tau_x_closed(&c, &v(&c, &[1]), &v(&c, &[2])),
            VertexLabel::root()
        );
        for x in ball(&c, 3).unwrap() {
            assert_eq!(tau_x_closed(&c, &x, &VertexLabel::root()), x);
        }
    }

    #[test]
    fn closed_shift_equals_word_shift_ball4_all_cases() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            let (mismatches, cases) = shift_equivalence_sweep(&c, 4).unwrap();
            assert_eq!(mismatches, 0, "k={k}");
            // PartialPop needs a nonzero exponent below the top of the word,
            // which chain words (d_j = 0 for j >= 2) never have
            let expected: &[ShiftCase] = if k == 1 {
                &[
                    ShiftCase::Extend,
                    ShiftCase::PopSingle,
                    ShiftCase::PopAll,
                    ShiftCase::PassRoot,
                ]
            } else {
                &[
                    ShiftCase::Extend,
                    ShiftCase::PopSingle,
                    ShiftCase::PartialPop,
                    ShiftCase::PopAll,
                    ShiftCase::PassRoot,
                ]
            };
            for case in expected {
                assert!(cases.contains(case), "k={k} case {case:?} never fired");
            }
        }
    }

    #[test]
    fn compositional_law_exact_for_forward_pairs() {
        // When y does not start with the backtracking digit kappa, the
        // concatenated word of x and y is valid and canonical, so
        // tau_x . tau_y = tau_{tau_x(y)} exactly. This forward subfamily is
        // the one the path machinery composes along.
        for k in [1, 2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 3).unwrap();
            for x in &verts {
                let wx = exponents_of(&c, x);
                for y in &verts {
                    if y.digits().first() == Some(&k) {
                        continue;
                    }
                    let wy = exponents_of(&c, y);
                    let xy = tau_x_closed(&c, x, y);
                    let wxy = exponents_of(&c, &xy);
                    for z in &verts {
                        let lhs = apply_word(&c, &wx, &apply_word(&c, &wy, z));
                        let rhs = apply_word(&c, &wxy, z);
                        assert_eq!(lhs, rhs, "k={k} x={x} y={y} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn composition_root_image_is_always_the_shifted_vertex() {
        // (tau_x . tau_y)(root) = tau_x(y) for every pair; the composite
        // re-roots correctly even when it leaves the shift family
        for k in [2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 3).unwrap();
            for x in &verts {
                let wx = exponents_of(&c, x);
                for y in &verts {
                    let lhs = apply_word(&c, &wx, y);
                    assert_eq!(lhs, tau_x_closed(&c, x, y), "k={k} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn compositional_law_fails_on_backtracking_pairs() {
        // Documented counterexample: x=(0,0), y=(0,2) at kappa=2 gives
        // tau_x(y) = root, so the claimed composite is the identity, yet
        // tau_x(tau_y(0,0)) = (0,1). A composite that fixes the root without
        // being the identity cannot lie in the vertex-indexed family; the
        // composition identity is therefore restricted to forward pairs.
        let c = ctx(2);
        let x = v(&c, &[0]);
        let y = v(&c, &[2]);
        assert_eq!(tau_x_closed(&c, &x, &y), VertexLabel::root());
        let z = v(&c, &[0]);
        let composite = tau_x_closed(&c, &x, &tau_x_closed(&c, &y, &z));
        assert_eq!(composite, v(&c, &[1]));
        assert_ne!(composite, z, "composite is not the identity");
        // every violating pair on ball(3) backtracks (first digit of y = kappa)
        let verts = ball(&c, 3).unwrap();
        for xx in &verts {
            let wx = exponents_of(&c, xx);
            for yy in &verts {
                let wxy = exponents_of(&c, &tau_x_closed(&c, xx, yy));
                let violated = verts.iter().any(|zz| {
                    apply_word(&c, &wx, &tau_x_closed(&c, yy, zz))
                        != apply_word(&c, &wxy, zz)
                });
                if violated {
                    assert_eq!(
                        yy.digits().first(),
                        Some(&2),
                        "violation outside the backtracking family: x={xx} y={yy}"
                    );
                }
            }
        }
    }

    #[test]
    fn inverse_compositional_law_on_ancestor_pairs() {
        // If x is a word-prefix of y, the suffix word is canonical and
        // tau_x^{-1} . tau_y = tau_{tau_x^{-1}(y)} holds exactly.
        for k in [2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 3).unwrap();
            for y in &verts {
                let wy = exponents_of(&c, y);
                for m in 0..=y.level() {
                    let x = VertexLabel::from_digits_unchecked(y.digits()[..m].to_vec());
                    let wx = exponents_of(&c, &x);
                    let xinv_y = apply_word_inverse(&c, &wx, y);
                    let w_comp = exponents_of(&c, &xinv_y);
                    for z in verts.iter().step_by(3) {
                        let lhs = apply_word_inverse(&c, &wx, &apply_word(&c, &wy, z));
                        let rhs = apply_word(&c, &w_comp, z);
                        assert_eq!(lhs, rhs, "k={k} x={x} y={y} z={z}");
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_shift_matches_brute_force_ball3() {
        // invert tau_x by exhaustive search over a larger ball, then compare
        for k in [1, 2, 3] {
            let c = ctx(k);
            let small = ball(&c, 3).unwrap();
            let big = ball(&c, 6).unwrap();
            for x in &small {
                let mut forward: HashMap<VertexLabel, VertexLabel> = HashMap::new();
                for w in &big {
                    forward.insert(tau_x_closed(&c, x, w), w.clone());
                }
                for y in &small {
                    let brute = forward.get(y).unwrap_or_else(|| {
                        panic!("preimage of {y} under tau_{x} not in ball(6)")
                    });
                    assert_eq!(
                        &tau_x_inverse(&c, x, y),
                        brute,
                        "k={k} x={x} y={y}"
                    );
                }
            }
        }
    }

    #[test]
    fn inverse_maps_image_back() {
        let c = ctx(2);
        for x in ball(&c, 3).unwrap() {
            // tau_x^{-1}(x) = root, and the inverse undoes the closed shift
            assert_eq!(tau_x_inverse(&c, &x, &x), VertexLabel::root());
            for z in ball(&c, 3).unwrap() {
                let image = tau_x_closed(&c, &x, &z);
                assert_eq!(tau_x_inverse(&c, &x, &image), z, "x={x} z={z}");
            }
        }
    }

    #[test]
    fn shift_preserves_adjacency_ball3() {
        for k in [1, 2, 3] {
            let c = ctx(k);
            let verts = ball(&c, 3).unwrap();
            for x in &verts {
                for u in &verts {
                    for w in neighbors(&c, u).unwrap() {
                        if w.level() > 3 {
                            continue;
                        }
                        let iu = tau_x_closed(&c, x, u);
                        let iw = tau_x_closed(&c, x, &w);
                        assert_eq!(
                            distance(&c, &iu, &iw).unwrap(),
                            1,
                            "k={k} x={x} edge ({u},{w})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ball_sizes() {
        let c = ctx(2);
        assert_eq!(ball(&c, 0).unwrap(), vec![VertexLabel::root()]);
        assert_eq!(ball(&c, 1).unwrap().len(), 4);
        let b3 = ball(&c, 3).unwrap();
        assert_eq!(b3.len(), 22);
        // enumeration cross-check of the geometric-sum formula
        for k in [1u32, 2, 3] {
            let ck = ctx(k);
            for radius in 0..=4 {
                let listed = ball(&ck, radius).unwrap().len() as u128;
                assert_eq!(listed, ball_size(&ck, radius), "k={k} L={radius}");
            }
        }
        // canonical order: level then lexicographic
        for w in b3.windows(2) {
            assert!(w[0] < w[1], "ball not canonically ordered");
        }
        assert!(matches!(
            ball(&ctx(3), 30),
            Err(LatticeError::BallTooLarge { .. })
        ));
    }

    #[test]
    fn spine_path_examples() {
        let c = ctx(2);
        let p = spine_path(&c, 0, 4).unwrap();
        assert_eq!(
            p.vertices(),
            &[
                VertexLabel::root(),
                v(&c, &[0]),
                v(&c, &[0, 0]),
                v(&c, &[0, 0, 0])
            ]
        );
        let p = spine_path(&c, 1, 3).unwrap();
        assert_eq!(p.vertices()[2].level(), 2);
        assert!(v(&c, &[1]).is_ancestor_of(&p.vertices()[2]));
        for a1 in 0..=2 {
            let p = spine_path(&c, a1, 5).unwrap();
            assert!(p.is_spine(&c));
            let word = exponents_of(&c, p.endpoint());
            assert_eq!(word.exponents()[0], a1);
            assert!(word.exponents()[1..].iter().all(|&d| d == 0));
            for (j, vtx) in p.vertices().iter().enumerate() {
                assert_eq!(vtx.level(), j);
                assert_eq!(
                    distance(&c, &VertexLabel::root(), vtx).unwrap(),
                    j
                );
            }
        }
    }

    #[test]
    fn label_string_roundtrip() {
        let c = ctx(3);
        for w in ball(&c, 3).unwrap() {
            let s = w.label_string();
            assert_eq!(VertexLabel::parse(&c, &s).unwrap(), w);
        }
        assert_eq!(VertexLabel::root().label_string(), "0");
        assert_eq!(v(&c, &[2, 1]).label_string(), "0,2,1");
    }
}
