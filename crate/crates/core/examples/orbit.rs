//! A certified renormalization orbit of `(2, 0, Id)` under the perturbed examples.

use stable_cantor::constructions::flagship::{scale_config, verify_theorem_6_5};
use stable_cantor::constructions::ExampleParams;
use stable_cantor::lab::flagship_orbit;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = verify_theorem_6_5(&ExampleParams::flagship(2))?;
    let o = flagship_orbit(&c, &scale_config(2.0, c.dim, c.d), 100)?;
    for s in o.steps.iter().take(12) {
        println!("{:>10} {} s = {:.6} margin {:.2e}", s.label, if s.expanding { "E" } else { "C" }, s.point[0], s.margin);
    }
    println!("...");
    println!("scale range [{:.4}, {:.4}], runs E {} C {}, min margin {:.2e}", o.scale_range.0, o.scale_range.1, o.max_expanding_run, o.max_contracting_run, o.min_margin);
    Ok(())
}
