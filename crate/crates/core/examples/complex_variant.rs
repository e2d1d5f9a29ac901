//! The holomorphic variant in complex dimensions one and two.

use stable_cantor::cantor::Field;
use stable_cantor::constructions::flagship::{complex_variant, counting_gate, literal_duplication_rank};
use stable_cantor::constructions::ExampleParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for d in [1, 2] {
        counting_gate(d, Field::Complex)?;
        let c = complex_variant(d, &ExampleParams::flagship(d))?;
        println!("d = {d}: {} elements, realified dimension {}, U slack {:.3e}, passes {}", c.sl.size(), c.dim, c.u_slack, c.passes());
        let dup = literal_duplication_rank(d, 1e-3, 1e-2)?;
        println!("  phase-duplicated real cover spans {} of {} directions", dup.rank, dup.algebra_dim);
    }
    Ok(())
}
