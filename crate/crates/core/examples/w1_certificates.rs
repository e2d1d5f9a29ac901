//! Exact covering certificates of the planar region `W_1` for a few values of `N`.

use stable_cantor::constructions::{verify_prop_6_2, ExampleParams, CELL_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [7, 10, 13] {
        let r = verify_prop_6_2(&ExampleParams::exact(n))?;
        println!("N = {n}: min margin {}", r.min_margin);
        for (j, c) in r.certificates.iter().enumerate() {
            let cells: Vec<String> = c.margins.iter().map(|m| format!("{} via {}: {}", CELL_NAMES[m.cell], c.labels[m.map], m.margin)).collect();
            println!("  j = {}: {}", j + 1, cells.join(", "));
        }
    }
    Ok(())
}
