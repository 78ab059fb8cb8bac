//! The four Green-function engines, cross-checked on one disordered ball.
//!
//! Direct dense solve, truncated random-walk expansion with its analytic
//! error bound, the self-avoiding-walk product (exact single term on a
//! tree), and the rooted m-function recursion.
//!
//! ```bash
//! cargo run --release -p bethe --example green_engines
//! ```

use bethe::ergodic::{DisorderSpec, Distribution};
use bethe::green::{
    green_direct, green_rw, green_saw, m_free_closed, m_recursive, rooted_green_at_root,
};
use bethe::lattice::{LatticeContext, VertexLabel};
use bethe::operator::{assemble, Region};
use num_complex::Complex64;

fn main() {
    let ctx = LatticeContext::new(2).unwrap();
    let spec = DisorderSpec::new(Distribution::Uniform { c: 1.0 }, 42).unwrap();
    let omega = spec.realization(0);
    let region = Region::ball(&ctx, 3).unwrap();
    let op = assemble(&ctx, &region, &omega);
    println!(
        "ball(3) at kappa=2: {} vertices, potential sup {:.3}",
        region.len(),
        op.potential_sup()
    );

    let x = VertexLabel::root();
    let y = VertexLabel::new(&ctx, vec![1, 0, 1]).unwrap();

    println!("\n== direct vs SAW at z = 0.4 + 0.6i ==");
    let z = Complex64::new(0.4, 0.6);
    let direct = green_direct(&op, z, &x, &y).unwrap();
    let saw = green_saw(&ctx, &region, &omega, z, &x, &y).unwrap();
    println!("direct: {direct}");
    println!("saw:    {saw}   (relative gap {:.2e})", (direct - saw).norm() / direct.norm());

    println!("\n== random-walk expansion at z = 10i (|Im z| > kappa+1) ==");
    let z10 = Complex64::new(0.0, 10.0);
    let exact = green_direct(&op, z10, &x, &y).unwrap();
    for terms in [3, 6, 12, 24] {
        let (partial, bound) = green_rw(&op, z10, &x, &y, terms).unwrap();
        println!(
            "n = {terms:>2}: partial = {partial}, |error| = {:.2e} <= bound {:.2e}",
            (partial - exact).norm(),
            bound
        );
    }

    println!("\n== rooted m-function recursion ==");
    let child = VertexLabel::root().child(0);
    let z2 = Complex64::new(0.0, 2.0);
    let depths = [5, 10, 20, 40, 60];
    let closed = m_free_closed(z2, 2).unwrap();
    let free = DisorderSpec::zero(0).realization(0);
    for depth in depths {
        let m = m_recursive(&ctx, &free, z2, &child, depth).unwrap();
        println!("free M at depth {depth:>2}: {m}  (|M - closed| = {:.2e})", (m - closed).norm());
    }
    println!("closed-form Herglotz root: {closed} = i(sqrt(3)-1)/2");

    // disordered m equals the diagonal Green value of the assembled subtree
    let zm = Complex64::new(0.3, 0.9);
    let m_dis = m_recursive(&ctx, &omega, zm, &child, 6).unwrap();
    let subtree = Region::rooted_subtree(&ctx, &child, 6).unwrap();
    let sub_op = assemble(&ctx, &subtree, &omega);
    let g_dis = green_direct(&sub_op, zm, &child, &child).unwrap();
    println!(
        "disordered M (depth 6) {m_dis} vs direct diagonal {g_dis}: gap {:.2e}",
        (m_dis - g_dis).norm()
    );

    println!("\n== finite-ball root Green function ==");
    for radius in [2, 4, 8, 16] {
        let g = rooted_green_at_root(&ctx, &free, z2, radius).unwrap();
        println!("free G_ball({radius:>2})(2i; 0, 0) = {g}");
    }
}
