//! Four Green-function engines and the free-lattice closed form.
//!
//! For a finite operator H on a region and Im z ≠ 0, G(z; x, y) is the
//! matrix element ⟨δ_x, (H−z)⁻¹ δ_y⟩. The engines:
//!
//! - [`green_direct`] — dense complex LU solve with a residual check; the
//!   reference implementation the others are tested against.
//! - [`green_rw`] — truncated Neumann (random-walk) expansion
//!   Σ_n [−(V−z)⁻¹Δ]ⁿ (V−z)⁻¹ by sparse matrix-vector iteration, valid for
//!   |Im z| > ‖Δ‖ ≤ κ+1, with the analytic remainder bound
//!   (1/|Im z|)(‖Δ‖/|Im z|)ⁿ.
//! - [`green_saw`] — the self-avoiding-walk factorization. On a tree the
//!   expansion collapses to the single product over the unique path γ: x→y,
//!   (−1)^|γ| ∏_k ⟨δ_{γ(k)}, G_{region∖γ([0,k−1])}(z) δ_{γ(k)}⟩, each factor
//!   a diagonal Green value on a vertex-deleted forest; valid for all
//!   Im z ≠ 0 by analytic continuation.
//! - [`m_recursive`] — the Weyl m-function of a depth-truncated rooted
//!   subtree, M = 1/(V − z − Σ_children M_child), the Schur-complement
//!   recursion grounded in the κ+1-fold decoupling at a vertex.
//!
//! [`m_free_closed`] is the zero-potential fixed point, the Herglotz root of
//! κM² + zM + 1 = 0, with |M(E)| = κ^{−1/2} on the free spectrum
//! (−2√κ, 2√κ).

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::ergodic::DisorderRealization;
use crate::lattice::{LatticeContext, VertexLabel};
use crate::operator::{assemble, FiniteOperator, ForestStructure, Region};

/// Guard for the dense direct solve.
pub const DENSE_SOLVE_GUARD: usize = 5_000;

/// Cost guard for virtual-subtree recursions with nonconstant disorder.
pub const RECURSION_VERTEX_GUARD: u128 = 40_000_000;

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("spectral parameter must have Im z != 0")]
    RealSpectralParameter,
    #[error("random-walk expansion needs |Im z| > {required}, got {given}")]
    RwPrecondition { required: f64, given: f64 },
    #[error("self-avoiding-walk factorization needs x != y")]
    SameVertex,
    #[error("vertex {0} not in region")]
    NotInRegion(String),
    #[error("vertices {0} and {1} are disconnected in the region")]
    Disconnected(String, String),
    #[error("direct solve residual {residual} above 1e-12")]
    SolveResidual { residual: f64 },
    #[error("region has {size} vertices, above the direct-solve guard of {guard}")]
    TooLargeForSolve { size: usize, guard: usize },
    #[error("m-function recursion needs depth >= 1")]
    ZeroDepth,
    #[error("m-function recursion is rooted at a forward neighbor; got the root")]
    RootChild,
    #[error("recursion over ~{vertices} vertices exceeds the guard of {guard}")]
    RecursionTooDeep { vertices: u128, guard: u128 },
    #[error(
        "real z = {z} lies outside the closed free spectrum; Herglotz limit is the real branch {real_branch}"
    )]
    RealAxisOutsideSpectrum { z: f64, real_branch: f64 },
}

/// ⟨δ_x, (H−z)⁻¹ δ_y⟩ by dense LU, with residual verified to 1e−12.
pub fn green_direct(
    op: &FiniteOperator,
    z: Complex64,
    x: &VertexLabel,
    y: &VertexLabel,
) -> Result<Complex64, GreenError> {
    if z.im == 0.0 {
        return Err(GreenError::RealSpectralParameter);
    }
    let n = op.len();
    if n > DENSE_SOLVE_GUARD {
        return Err(GreenError::TooLargeForSolve {
            size: n,
            guard: DENSE_SOLVE_GUARD,
        });
    }
    let ix = op
        .region()
        .index_of(x)
        .ok_or_else(|| GreenError::NotInRegion(x.label_string()))?;
    let iy = op
        .region()
        .index_of(y)
        .ok_or_else(|| GreenError::NotInRegion(y.label_string()))?;
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        m[(i, i)] = Complex64::new(op.potential()[i], 0.0) - z;
        for &j in &op.adjacency()[i] {
            m[(i, j)] = Complex64::new(1.0, 0.0);
        }
    }
    let mut rhs = nalgebra::DVector::from_element(n, Complex64::new(0.0, 0.0));
    rhs[iy] = Complex64::new(1.0, 0.0);
    let lu = m.clone().lu();
    let u = lu
        .solve(&rhs)
        .ok_or(GreenError::SolveResidual { residual: f64::NAN })?;
    let residual = (&m * &u - &rhs).norm() / (1.0 + u.norm());
    if residual > 1e-12 {
        return Err(GreenError::SolveResidual { residual });
    }
    Ok(u[ix])
}

/// Truncated random-walk (Neumann) expansion with its analytic error bound.
///
/// Returns the partial sum over walk lengths n < `n_terms` and the bound
/// (1/|Im z|)(‖Δ‖/|Im z|)^{n_terms} on the dropped remainder.
pub fn green_rw(
    op: &FiniteOperator,
    z: Complex64,
    x: &VertexLabel,
    y: &VertexLabel,
    n_terms: usize,
) -> Result<(Complex64, f64), GreenError> {
    let delta_norm = (op.region().kappa() + 1) as f64;
    if z.im.abs() <= delta_norm {
        return Err(GreenError::RwPrecondition {
            required: delta_norm,
            given: z.im.abs(),
        });
    }
    let ix = op
        .region()
        .index_of(x)
        .ok_or_else(|| GreenError::NotInRegion(x.label_string()))?;
    let iy = op
        .region()
        .index_of(y)
        .ok_or_else(|| GreenError::NotInRegion(y.label_string()))?;
    let n = op.len();
    let inv_vz: Vec<Complex64> = op
        .potential()
        .iter()
        .map(|&v| (Complex64::new(v, 0.0) - z).inv())
        .collect();
    // v_0 = (V-z)^{-1} delta_y; v_{k+1} = -(V-z)^{-1} Delta v_k
    let mut cur = vec![Complex64::new(0.0, 0.0); n];
    cur[iy] = inv_vz[iy];
    let mut partial = Complex64::new(0.0, 0.0);
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..n_terms {
        partial += cur[ix];
        op.apply_adjacency(&cur, &mut scratch);
        for i in 0..n {
            cur[i] = -inv_vz[i] * scratch[i];
        }
    }
    let ratio = delta_norm / z.im.abs();
    let bound = ratio.powi(n_terms as i32) / z.im.abs();
    Ok((partial, bound))
}

/// All diagonal Green values ⟨δ_v, (H−z)⁻¹ δ_v⟩ on the forest obtained by
/// masking `deleted` vertices, by the two-pass rooted elimination
/// (subtree m-functions upward, complement m-functions downward). O(n).
pub fn forest_diag_green(
    op: &FiniteOperator,
    z: Complex64,
    deleted: &[bool],
) -> Vec<Complex64> {
    let forest = op.forest_without(deleted);
    forest_diag_green_with(op, z, deleted, &forest)
}

/// [`forest_diag_green`] with a prebuilt forest structure.
pub fn forest_diag_green_with(
    op: &FiniteOperator,
    z: Complex64,
    deleted: &[bool],
    forest: &ForestStructure,
) -> Vec<Complex64> {
    let n = op.len();
    let pot = op.potential();
    // upward: m_down[v] = 1 / (V - z - sum_children m_down)
    let mut m_down = vec![Complex64::new(0.0, 0.0); n];
    for &v in &forest.post_order {
        let mut d = Complex64::new(pot[v], 0.0) - z;
        for &c in &forest.children[v] {
            d -= m_down[c];
        }
        m_down[v] = d.inv();
    }
    // downward: m_up[v] = contribution of the component through the parent
    let mut m_up = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    for &root in &forest.roots {
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let child_sum: Complex64 = forest.children[v].iter().map(|&c| m_down[c]).sum();
            let dv = Complex64::new(pot[v], 0.0) - z - m_up[v];
            diag[v] = (dv - child_sum).inv();
            for &c in &forest.children[v] {
                m_up[c] = (dv - (child_sum - m_down[c])).inv();
                stack.push(c);
            }
        }
    }
    for (v, was_deleted) in deleted.iter().enumerate() {
        if *was_deleted {
            diag[v] = Complex64::new(0.0, 0.0);
        }
    }
    diag
}

/// Unique path between two region vertices, or `None` if disconnected.
pub fn region_path(
    op: &FiniteOperator,
    x: &VertexLabel,
    y: &VertexLabel,
) -> Result<Option<Vec<usize>>, GreenError> {
    let ix = op
        .region()
        .index_of(x)
        .ok_or_else(|| GreenError::NotInRegion(x.label_string()))?;
    let iy = op
        .region()
        .index_of(y)
        .ok_or_else(|| GreenError::NotInRegion(y.label_string()))?;
    let n = op.len();
    let mut prev = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    prev[ix] = ix;
    queue.push_back(ix);
    while let Some(v) = queue.pop_front() {
        if v == iy {
            break;
        }
        for &w in &op.adjacency()[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    if prev[iy] == usize::MAX {
        return Ok(None);
    }
    let mut path = vec![iy];
    let mut cur = iy;
    while cur != ix {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(Some(path))
}

/// Off-diagonal Green value by the single-path self-avoiding-walk product.
///
/// Computes (−1)^|γ| ∏_{k=0}^{|γ|} G_{region∖γ([0,k−1])}(z; γ(k), γ(k)) along
/// the unique path γ: x→y; each factor is evaluated by rooted elimination on
/// the vertex-deleted forest.
pub fn green_saw(
    ctx: &LatticeContext,
    region: &Region,
    omega: &DisorderRealization,
    z: Complex64,
    x: &VertexLabel,
    y: &VertexLabel,
) -> Result<Complex64, GreenError> {
    if z.im == 0.0 {
        return Err(GreenError::RealSpectralParameter);
    }
    if x == y {
        return Err(GreenError::SameVertex);
    }
    let op = assemble(ctx, region, omega);
    let path = region_path(&op, x, y)?
        .ok_or_else(|| GreenError::Disconnected(x.label_string(), y.label_string()))?;
    let edges = path.len() - 1;
    let mut deleted = vec![false; op.len()];
    let mut product = Complex64::new(1.0, 0.0);
    for (k, &vk) in path.iter().enumerate() {
        let diag = forest_diag_green(&op, z, &deleted)[vk];
        product *= diag;
        if k < path.len() - 1 {
            deleted[vk] = true;
        }
    }
    let sign = if edges % 2 == 0 { 1.0 } else { -1.0 };
    Ok(product * sign)
}

/// Number of vertices in a depth-d subtree with branching κ.
fn subtree_size(kappa: u32, depth: u32) -> u128 {
    let k = kappa as u128;
    if k == 1 {
        return depth as u128;
    }
    (k.pow(depth.min(127)) - 1) / (k - 1)
}

/// Weyl m-function of the depth-truncated rooted subtree at `child`:
/// M = 1/(V − z − Σ_{forward children} M_c), leaves at depth 1 using
/// M = 1/(V − z). Herglotz: Im M > 0 whenever Im z > 0.
pub fn m_recursive(
    ctx: &LatticeContext,
    omega: &DisorderRealization,
    z: Complex64,
    child: &VertexLabel,
    depth: u32,
) -> Result<Complex64, GreenError> {
    if depth == 0 {
        return Err(GreenError::ZeroDepth);
    }
    if child.is_root() {
        return Err(GreenError::RootChild);
    }
    if z.im <= 0.0 {
        return Err(GreenError::RealSpectralParameter);
    }
    if let Some(c) = omega.constant_value() {
        return Ok(m_constant_finite(z, ctx.kappa(), c, depth));
    }
    let size = subtree_size(ctx.kappa(), depth);
    if size > RECURSION_VERTEX_GUARD {
        return Err(GreenError::RecursionTooDeep {
            vertices: size,
            guard: RECURSION_VERTEX_GUARD,
        });
    }
    let mut digits = child.digits().to_vec();
    Ok(m_rec_inner(ctx, omega, z, &mut digits, depth))
}

fn m_rec_inner(
    ctx: &LatticeContext,
    omega: &DisorderRealization,
    z: Complex64,
    digits: &mut Vec<u32>,
    depth: u32,
) -> Complex64 {
    let label = VertexLabel::from_digits_unchecked(digits.clone());
    let mut d = Complex64::new(omega.potential_at(ctx, &label), 0.0) - z;
    if depth > 1 {
        for b in 0..ctx.kappa() {
            digits.push(b);
            d -= m_rec_inner(ctx, omega, z, digits, depth - 1);
            digits.pop();
        }
    }
    d.inv()
}

/// Finite-depth m-value for a constant potential c (closed iteration).
pub fn m_constant_finite(z: Complex64, kappa: u32, c: f64, depth: u32) -> Complex64 {
    let vz = Complex64::new(c, 0.0) - z;
    let k = kappa as f64;
    let mut m = vz.inv();
    for _ in 1..depth {
        m = (vz - m * k).inv();
    }
    m
}

/// Free-lattice finite-depth m-value (V ≡ 0).
pub fn m_free_finite(z: Complex64, kappa: u32, depth: u32) -> Complex64 {
    m_constant_finite(z, kappa, 0.0, depth)
}

/// Closed-form free m-function: the Herglotz root of κM² + zM + 1 = 0.
///
/// For real z inside the open spectrum (−2√κ, 2√κ) the boundary value
/// (−z + i√(4κ−z²))/(2κ) is returned, with |M| = κ^{−1/2}. Real z outside
/// the closed spectrum is an error carrying the real (decaying) branch.
pub fn m_free_closed(z: Complex64, kappa: u32) -> Result<Complex64, GreenError> {
    let k = kappa as f64;
    let edge = 2.0 * k.sqrt();
    if z.im == 0.0 {
        let e = z.re;
        if e.abs() < edge {
            return Ok(Complex64::new(-e / (2.0 * k), (4.0 * k - e * e).sqrt() / (2.0 * k)));
        }
        let disc = (e * e - 4.0 * k).sqrt();
        let r1 = (-e + disc) / (2.0 * k);
        let r2 = (-e - disc) / (2.0 * k);
        let real_branch = if r1.abs() < r2.abs() { r1 } else { r2 };
        return Err(GreenError::RealAxisOutsideSpectrum { z: e, real_branch });
    }
    let disc = (z * z - Complex64::new(4.0 * k, 0.0)).sqrt();
    let r1 = (-z + disc) / (2.0 * k);
    let r2 = (-z - disc) / (2.0 * k);
    // r1*r2 = 1/k, so exactly one root lies in the half plane of Im z
    Ok(if r1.im * z.im > 0.0 { r1 } else { r2 })
}

/// G_{Λ_radius}(z; 0, 0): the finite-ball root diagonal by splitting at the
/// root, 1/(V(0) − z − Σ_{j=0}^{κ} M_j) with each M_j the depth-`radius`
/// m-value of the subtree at (0, j). Radius 0 is the single-vertex value.
pub fn rooted_green_at_root(
    ctx: &LatticeContext,
    omega: &DisorderRealization,
    z: Complex64,
    radius: u32,
) -> Result<Complex64, GreenError> {
    if z.im <= 0.0 {
        return Err(GreenError::RealSpectralParameter);
    }
    let root = VertexLabel::root();
    let v0 = Complex64::new(omega.potential_at(ctx, &root), 0.0);
    if radius == 0 {
        return Ok((v0 - z).inv());
    }
    let mut d = v0 - z;
    if let Some(c) = omega.constant_value() {
        let m = m_constant_finite(z, ctx.kappa(), c, radius);
        d -= m * (ctx.kappa() + 1) as f64;
    } else {
        for j in 0..=ctx.kappa() {
            let child = root.child(j);
            d -= m_recursive(ctx, omega, z, &child, radius)?;
        }
    }
    Ok(d.inv())
}
