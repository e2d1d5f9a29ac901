//! Random perturbations inside and outside the stability radius of a certificate.

use stable_cantor::affine::RealAffine;
use stable_cantor::cantor::AffineCantorSystem;
use stable_cantor::constructions::{verify_prop_6_2, ExampleParams};
use stable_cantor::covering::stability_radius;
use stable_cantor::lab::{perturb_and_retest, StressSystems};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = verify_prop_6_2(&ExampleParams::exact(7))?;
    let cert = &r.certificates[0];
    let radius = stability_radius(cert).coefficient.mid();
    let m = AffineCantorSystem::middle_third();
    let b = RealAffine::identity(1);
    let sys = StressSystems { k: &m, kp: &m, b: &b, depth: 8, cap: 256 };
    for factor in [0.5, 10.0, 100.0] {
        let s = perturb_and_retest(3, radius * factor, 50, cert, Some(&sys))?;
        println!("eps = {factor} x {radius:.3e}: {} passed, {} failed, first failure {:?}", s.passed, s.failed, s.first_failure);
    }
    Ok(())
}
