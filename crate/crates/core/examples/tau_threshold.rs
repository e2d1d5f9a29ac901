//! Bisection for the largest `tau` keeping the planar certificates valid.

use stable_cantor::constructions::{prop_6_2_margin, tau_star, ExampleParams};
use stable_cantor::scalar::Scalar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ExampleParams::robust(7);
    let t = tau_star(&p, 3)?;
    println!("tau* = {} after {} steps; {} fails", t.tau_star, t.iterations, t.failing);
    for tau in [Scalar::ratio(1, 1000), t.tau_star.clone(), t.failing.clone()] {
        println!("  tau = {tau}: margin {}", prop_6_2_margin(&p.with_tau(tau.clone()))?);
    }
    Ok(())
}
