//! The expanding cover of the fiber product `W_d` and its constants.

use stable_cantor::constructions::{alternation_bound, verify_lemma_6_4, ExampleParams, LETTER_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = ExampleParams::exact(7);
    for d in [1, 2, 3] {
        let t = std::time::Instant::now();
        let r = verify_lemma_6_4(&p, d)?;
        println!(
            "d = {d}: {} cells, {} maps, delta {}, eps1 {:.3e}, eps2 {:.3e} ({:?})",
            r.certificate.cells.len(),
            r.certificate.maps.len(),
            r.certificate.delta,
            r.eps1.mid(),
            r.eps2.mid(),
            t.elapsed()
        );
        if d == 2 {
            for f in &r.families {
                let names: Vec<String> = f.members.iter().map(|m| m.iter().map(|&a| LETTER_NAMES[a]).collect::<Vec<_>>().join("x")).collect();
                println!("  H{:?}: {}", f.alpha, names.join(" "));
            }
        }
    }
    let a = alternation_bound(&p);
    println!("alternation: {a:?}");
    Ok(())
}
