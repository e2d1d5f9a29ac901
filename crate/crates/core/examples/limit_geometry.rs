//! Convergence of normalized compositions and limit geometries of a perturbed Cantor set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use stable_cantor::cantor::PerturbedCantorSystem;
use stable_cantor::constructions::build_k1prime;
use stable_cantor::limit::{
    control_of_shape, convergence_report, distortion_check, limit_convergence, limit_geometry, ContractionSequence,
};
use stable_cantor::scalar::Scalar;
use stable_cantor::smooth::{Perturbation, PerturbedAffine, SmoothMap};
use stable_cantor::symbolic::LeftWord;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = PerturbedAffine::new(DMatrix::from_element(1, 1, 0.5), DVector::zeros(1), Perturbation::quadratic(vec![0.01]));
    let maps: Vec<Arc<dyn SmoothMap>> = (0..30).map(|_| Arc::new(h.clone()) as Arc<dyn SmoothMap>).collect();
    let seq = ContractionSequence::new(maps, 0.5, 1.0, 0.02)?;
    let r = convergence_report(&seq, 30)?;
    println!("x/2 + x^2/100: rate {:.4}, residual {:.3}, bunching {:.3}", r.rate, r.residual, seq.hypotheses().bunching());
    let s = control_of_shape(&seq, 0.125, 20)?;
    println!("shape factors in [{:.4}, {:.4}]", s.eta1, s.eta2);
    let x = DVector::from_element(1, 0.2);
    for k in 0..4 {
        let y = DVector::from_element(1, 0.2 + 0.1 / 2f64.powi(k));
        println!("  |x - y| = {:.4}: distortion {:.3e}", (&x - &y).norm(), distortion_check(&seq, &x, &y, 20)?.deviation());
    }

    let base = build_k1prime(&Scalar::ratio(1, 10))?;
    let sys = PerturbedCantorSystem::from_letter_perturbations(base, vec![Perturbation::sine(1, 0.01, 1.0); 2], 1.0)?;
    let theta = LeftWord::constant(1);
    let r = limit_convergence(&sys, &theta, 24)?;
    println!("perturbed K1': rate {:.4} (mu {:.4}), residual {:.3}", r.rate, sys.mu(), r.residual);
    let k = limit_geometry(&sys, &theta, 12, None)?;
    let p = DVector::from_element(1, 0.75);
    println!("k^theta_12(0.75) = {:.10}, error bound {:.2e}", k.geometry.eval(&p)[0], k.error_bound);
    Ok(())
}
