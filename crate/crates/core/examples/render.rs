//! Writes a point cloud of `K_1 x K_1` and the `W_1` figures to the temp directory.

use stable_cantor::constructions::svg::{scatter_svg, w1_figure};
use stable_cantor::constructions::{build_k1, ExampleParams};
use stable_cantor::scalar::Scalar;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir();
    let k = build_k1(7, &Scalar::ratio(1, 100))?.product_system(2)?;
    let pts = k.render(3, 1 << 20)?;
    let csv: String = pts.iter().map(|p| format!("{:.10},{:.10}\n", p[0], p[1])).collect();
    std::fs::write(dir.join("k1_squared.csv"), csv)?;
    std::fs::write(dir.join("k1_squared.svg"), scatter_svg(&pts, 600.0))?;
    let p = ExampleParams::exact(7);
    for j in 1..=3 {
        std::fs::write(dir.join(format!("w1_{j}.svg")), w1_figure(&p, j)?)?;
    }
    println!("{} points and 4 figures in {}", pts.len(), dir.display());
    Ok(())
}
