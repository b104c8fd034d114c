//! Builds an explicit terrain by hand, checks which partitions conform to
//! it, restricts it to a subset and lists its maximally coarse partitions.
//!
//! Run with `cargo run --example terrains`.

use scdt::enumerate::maximally_coarse_partitions_explicit;
use scdt::{LevelSet, Partition, Terrain};

fn main() -> scdt::Result<()> {
    // Four colours where only warm and cool pairs may be grouped.
    let levels = ["red", "orange", "blue", "green"];
    let t = Terrain::explicit(
        &levels,
        &[vec!["red", "orange"], vec!["blue", "green"]],
    )?;
    let show = |s: &LevelSet| {
        s.ids().iter().map(|&i| levels[i]).collect::<Vec<_>>().join("+")
    };

    let warm_cool = Partition::new(vec![LevelSet::new([0, 1]), LevelSet::new([2, 3])])?;
    let mixed = Partition::new(vec![LevelSet::new([0, 2]), LevelSet::new([1, 3])])?;
    println!("warm|cool conforms: {}", t.conforms(&warm_cool)?);
    println!("mixed pairs conform: {}", t.conforms(&mixed)?);

    for p in maximally_coarse_partitions_explicit(&t)? {
        let parts: Vec<String> = p.parts().iter().map(show).collect();
        println!("maximal: {}", parts.join(" | "));
    }

    let warm = t.restrict(&LevelSet::new([0, 1]))?;
    let members: Vec<String> = warm.members().iter().map(show).collect();
    println!("restricted to warm: {}", members.join(", "));
    Ok(())
}
