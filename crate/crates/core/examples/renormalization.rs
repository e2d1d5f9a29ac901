//! Renormalization operators on relative configurations of `K_1` and `K_1'`.

use stable_cantor::affine::RealAffine;
use stable_cantor::constructions::{build_k1, build_k1prime};
use stable_cantor::renorm::{apply, distinct_actions, generators, RelativeAffineConfig, RenormOp};
use stable_cantor::scalar::Scalar;
use stable_cantor::symbolic::{LeftWord, Word};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = build_k1(7, &Scalar::zero())?;
    let kp = build_k1prime(&Scalar::zero())?;
    let (contracting, expanding) = distinct_actions(&k, &kp)?;
    println!("{} generators, {} contracting and {} expanding actions", generators(&k, &kp).len(), contracting.len(), expanding.len());
    let mut c = RelativeAffineConfig::new(RealAffine::line(Scalar::int(2), Scalar::zero())?, LeftWord::constant(0), LeftWord::constant(0));
    let ops = [
        RenormOp::contracting(Word::new(vec![0, 1]))?,
        RenormOp::contracting(Word::new(vec![1, 0]))?,
        RenormOp::expanding(Word::new(vec![0, 2]))?,
    ];
    for op in &ops {
        c = apply(op, &c, &k, &kp)?;
        let dec = c.b.decompose()?;
        println!("after {:?}/{:?}: scale {}, translation {}", op.a.letters(), op.a_p.letters(), dec.s, dec.v[0]);
    }
    Ok(())
}
