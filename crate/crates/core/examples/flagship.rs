//! Certificate for the perturbed examples on `W_2 x U`, with a grid re-check.

use stable_cantor::constructions::flagship::verify_theorem_6_5;
use stable_cantor::constructions::ExampleParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = std::time::Instant::now();
    let c = verify_theorem_6_5(&ExampleParams::flagship(2))?;
    println!("built in {:?}", t.elapsed());
    println!("SL cover: {} matrices, margin {:.3e}", c.sl.size(), c.sl.c);
    println!("planar chains: {}, one-step delta {:.3e}", c.chains.chains.len(), c.chains.one_step.delta.mid());
    println!("lifted steps: slack {:.3e}, U slack {:.3e}", c.w_slack, c.u_slack);
    println!("words: slack {:.3e}, U slack {:.3e}", c.word_slack, c.u_word_slack);
    if let Some(m) = &c.product_margin {
        println!("exact fiber-product margin {:.3e}", m.mid());
    }
    let b = &c.systems.bunching;
    println!("det drift {:.1e}, bunching kappa^2 mu = {:.4}", c.systems.det_drift, b.kappa * b.kappa * b.mu);
    let (bad, n) = c.brute_force(2_000, 1);
    println!("passes: {}, grid: {bad} bad of {n}", c.passes());
    Ok(())
}
