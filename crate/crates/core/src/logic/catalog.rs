use super::{Block, Formula};
use crate::scalar::ratio;

/// `y` has exactly one neighbor: `∃z E(y,z) ∧ ¬∃z₁z₂ (E(y,z₁) ∧ E(y,z₂) ∧ z₁≠z₂)`.
fn exactly_one_neighbor(y: &str) -> Formula {
    let some = Formula::exists(Block::new(y, &["z"]).atom("E", &[y, "z"]));
    let two = Formula::exists(
        Block::new(y, &["z1", "z2"])
            .atom("E", &[y, "z1"])
            .atom("E", &[y, "z2"])
            .neq("z1", "z2"),
    );
    Formula::and(some, Formula::not(two))
}

/// The sun property: `x1` lies on a 6-cycle of pairwise distinct vertices,
/// each of which has a neighbor of degree 1.
pub fn phi_sun() -> Formula {
    let xs = ["x1", "x2", "x3", "x4", "x5", "x6"];
    let mut b = Block::new("x1", &xs[1..]);
    for i in 0..6 {
        b = b.atom("E", &[xs[i], xs[(i + 1) % 6]]);
    }
    for i in 0..6 {
        for j in i + 1..6 {
            b = b.neq(xs[i], xs[j]);
        }
    }
    for x in xs {
        let pendant = Formula::exists(Block::new(x, &["y"]).atom("E", &[x, "y"]).sub("y", exactly_one_neighbor("y")));
        b = b.sub(x, pendant);
    }
    Formula::exists(b)
}

/// Local transitivity, `∀u₁u₂ (E(x,u₁) ∧ E(u₁,u₂) → E(x,u₂))`, written as
/// the negation of an EML block with a negated atom.
pub fn local_transitivity() -> Formula {
    Formula::not(Formula::exists(
        Block::new("x", &["u1", "u2"])
            .atom("E", &["x", "u1"])
            .atom("E", &["u1", "u2"])
            .not_atom("E", &["x", "u2"]),
    ))
}

/// At least half of the triangles through `x` have a loop on every vertex.
pub fn triangle_loops() -> Formula {
    let block = Block::new("x", &["y", "z"])
        .atom("E", &["x", "y"])
        .atom("E", &["y", "z"])
        .atom("E", &["z", "x"])
        .sub("x", Formula::atom("E", &["x", "x"]))
        .sub("y", Formula::atom("E", &["y", "y"]))
        .sub("z", Formula::atom("E", &["z", "z"]));
    Formula::Ratio {
        strict: false,
        threshold: ratio(1, 2),
        block,
    }
}

pub fn builtin_formulas() -> Vec<(&'static str, Formula)> {
    vec![
        ("sun", phi_sun()),
        ("local-transitivity", local_transitivity()),
        ("triangle-loops", triangle_loops()),
        (
            "sink",
            Formula::not(Formula::exists(Block::new("x", &["y"]).atom("E", &["x", "y"]))),
        ),
        (
            "out-degree-2",
            Formula::Count(2, Block::new("x", &["y"]).atom("E", &["x", "y"])),
        ),
    ]
}
