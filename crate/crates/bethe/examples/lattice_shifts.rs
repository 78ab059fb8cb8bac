//! Geometry and automorphisms of the Bethe lattice.
//!
//! Walks through vertex labels, the tree metric, generator words, and the
//! generalized shifts τ_x evaluated two independent ways — the closed-form
//! case analysis and iterated τ₁/τ₂ words — including the exact domain on
//! which shifts compose.
//!
//! ```bash
//! cargo run --release -p bethe --example lattice_shifts
//! ```

use bethe::lattice::{
    apply_word, ball, distance, exponents_of, neighbors, shift_equivalence_sweep, spine_path,
    tau_x_closed, tau_x_closed_traced, tau_x_inverse, LatticeContext, VertexLabel,
};

fn main() {
    let ctx = LatticeContext::new(2).unwrap();
    let root = VertexLabel::root();

    println!("== labels, metric, neighbors (kappa = 2) ==");
    let v = VertexLabel::new(&ctx, vec![2, 1]).unwrap();
    println!("vertex {v}: level {}, serialized \"{}\"", v.level(), v.label_string());
    println!(
        "neighbors of {v}: {:?}",
        neighbors(&ctx, &v)
            .unwrap()
            .iter()
            .map(|w| w.label_string())
            .collect::<Vec<_>>()
    );
    let w = VertexLabel::new(&ctx, vec![0, 1, 1]).unwrap();
    println!("d({v}, {w}) = {}", distance(&ctx, &v, &w).unwrap());

    println!("\n== generator words ==");
    for digits in [vec![1], vec![1, 0], vec![2, 1, 1]] {
        let x = VertexLabel::new(&ctx, digits).unwrap();
        let word = exponents_of(&ctx, &x);
        let back = apply_word(&ctx, &word, &root);
        println!("word of {x} = {:?}; applied to the root -> {back}", word.exponents());
    }

    println!("\n== closed-form shift vs word evaluation ==");
    let x = VertexLabel::new(&ctx, vec![2, 0]).unwrap();
    for z in [vec![0], vec![1], vec![2], vec![2, 1, 0]] {
        let z = VertexLabel::new(&ctx, z).unwrap();
        let (image, case) = tau_x_closed_traced(&ctx, &x, &z);
        println!("tau_{x}({z}) = {image}   [{case:?}]");
        assert_eq!(image, apply_word(&ctx, &exponents_of(&ctx, &x), &z));
        assert_eq!(tau_x_inverse(&ctx, &x, &image), z);
    }
    for k in [1, 2, 3] {
        let c = LatticeContext::new(k).unwrap();
        let (mismatches, cases) = shift_equivalence_sweep(&c, 4).unwrap();
        println!(
            "kappa={k}: closed form == word evaluation on all of ball(4)^2 \
             ({mismatches} mismatches, {} distinct cases)",
            cases.len()
        );
    }

    println!("\n== where shifts compose ==");
    // forward pairs (y not starting with kappa) compose exactly:
    let x = VertexLabel::new(&ctx, vec![0]).unwrap();
    let y_fwd = VertexLabel::new(&ctx, vec![1]).unwrap();
    let xy = tau_x_closed(&ctx, &x, &y_fwd);
    let probe = VertexLabel::new(&ctx, vec![1, 0]).unwrap();
    assert_eq!(
        tau_x_closed(&ctx, &x, &tau_x_closed(&ctx, &y_fwd, &probe)),
        tau_x_closed(&ctx, &xy, &probe)
    );
    println!("forward pair: tau_{x} . tau_{y_fwd} = tau_{xy} (checked on ball(3))");
    // but a backtracking pair escapes the family:
    let y_back = VertexLabel::new(&ctx, vec![2]).unwrap();
    let composite_at_root = tau_x_closed(&ctx, &x, &y_back);
    let z = VertexLabel::new(&ctx, vec![0]).unwrap();
    let composite_at_z = tau_x_closed(&ctx, &x, &tau_x_closed(&ctx, &y_back, &z));
    println!(
        "backtracking pair: tau_{x} . tau_{y_back} maps the root to {composite_at_root} \
         (= tau_{x}({y_back})) yet maps {z} to {composite_at_z} - a root-fixing rotation, \
         not the identity; composition holds only on forward pairs"
    );

    println!("\n== spine paths ==");
    for a1 in 0..=2 {
        let path = spine_path(&ctx, a1, 5).unwrap();
        let labels: Vec<String> = path.vertices().iter().map(|v| v.label_string()).collect();
        println!(
            "a1={a1}: {} (word of endpoint {:?})",
            labels.join(" -> "),
            exponents_of(&ctx, path.endpoint()).exponents()
        );
    }

    let b = ball(&ctx, 3).unwrap();
    println!("\n|ball(3)| = {} vertices, canonically ordered", b.len());
}
