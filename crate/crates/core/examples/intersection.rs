//! Breadth-first search for linked cylinder pairs.

use stable_cantor::affine::RealAffine;
use stable_cantor::cantor::AffineCantorSystem;
use stable_cantor::constructions::{build_k1, build_k1prime};
use stable_cantor::lab::empirical_intersection;
use stable_cantor::scalar::Scalar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = build_k1(7, &Scalar::ratio(1, 100))?;
    let kp = build_k1prime(&Scalar::ratio(1, 100))?;
    for (s, t) in [(2, 0), (1, 0), (3, -1)] {
        let b = RealAffine::line(Scalar::int(s), Scalar::int(t))?;
        let r = empirical_intersection(&k, &kp, &b, 10, 4096)?;
        println!("B(x) = {s} x + ({t}): {:?}, frontier {:?}", r.verdict, r.frontier);
    }
    let m = AffineCantorSystem::middle_third();
    let shift = RealAffine::line(Scalar::one(), Scalar::int(2))?;
    println!("middle third vs its translate by 2: {:?}", empirical_intersection(&m, &m, &shift, 5, 64)?.verdict);
    Ok(())
}
