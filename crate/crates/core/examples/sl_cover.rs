//! Small covers of a chart ball in `SL(d)` and their certified margins.

use stable_cantor::cantor::Field;
use stable_cantor::covering::sl::sl_cover_construct;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (d, field) in [(2, Field::Real), (3, Field::Real), (1, Field::Complex), (2, Field::Complex)] {
        let c = sl_cover_construct(d, field, 5e-7, 5e-8, 2_000)?;
        println!(
            "{field:?} d = {d}: {} elements, c = {:.3e} (linear {:.3e}, BCH {:.1e}), worst grid {:.3e}",
            c.size(),
            c.c,
            c.c_lin,
            c.bch_error,
            c.grid_worst
        );
    }
    Ok(())
}
