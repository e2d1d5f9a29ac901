//! Dimension bounds and a box-counting estimate for `K_1`.

use stable_cantor::cantor::box_counting_estimate;
use stable_cantor::constructions::build_k1;
use stable_cantor::constructions::dim::{dim_bound, min_n_for};
use stable_cantor::scalar::Scalar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tau = Scalar::ratio(1, 100);
    let k1 = build_k1(7, &tau)?;
    println!("similarity dimension {:.6}", k1.similarity_dim()?.value());
    let pts = k1.render(7, 1 << 22)?;
    let scales: Vec<f64> = (2..=6).map(|k| 7.01f64.powi(-k)).collect();
    let r = box_counting_estimate(&pts, &scales)?;
    println!("box counting slope {:.4} (rms {:.2e})", r.slope, r.residual);
    for d in 1..=3 {
        println!("d = {d}: bound {:.4}", dim_bound(7, &tau, d));
    }
    for (eps, d) in [("1/2", 2), ("1", 2), ("1/10", 1)] {
        let s = min_n_for(&Scalar::parse(eps)?, d, &Scalar::zero())?;
        println!("least N with bound < {eps} in d = {d}: {} ({:.6})", s.n, s.bound);
    }
    Ok(())
}
