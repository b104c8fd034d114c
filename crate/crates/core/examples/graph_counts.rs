//! Counts maximally coarse partitions and connected sets for grid graphs,
//! and lists the binary splits of a small cycle.
//!
//! Run with `cargo run --release --example graph_counts`.

use scdt::enumerate::{graph_counts, maximally_coarse_partitions};
use scdt::{Builtin, LevelGraph};

fn main() -> scdt::Result<()> {
    println!("{:>6} {:>8} {:>10} {:>10}", "graph", "MP", "CS'", "CS");
    for (r, c) in [(3, 3), (3, 4), (4, 4), (4, 5)] {
        let g = LevelGraph::builtin(Builtin::Grid(r, c))?;
        let k = graph_counts(&g);
        println!("{:>6} {:>8} {:>10} {:>10}", format!("{r}x{c}"), k.mp, k.cs_half, k.cs);
    }

    let ring = LevelGraph::builtin(Builtin::Cycle(5))?;
    println!("\nsplits of a 5-cycle:");
    for s in maximally_coarse_partitions(&ring)? {
        println!(
            "  {:?} | {:?}",
            ring.names_of(&s.side_a),
            ring.names_of(&s.side_b)
        );
    }
    Ok(())
}
