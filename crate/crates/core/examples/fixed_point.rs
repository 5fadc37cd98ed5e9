//! Quantizes a few reals onto the signed 6.3 grid used for every bias and
//! weight, showing rounding, ties and saturation.
//!
//! ```bash
//! cargo run -p pbit-nqs --example fixed_point
//! ```

use pbit_nqs::fixed::{quantize, FixedPoint};

fn main() -> pbit_nqs::Result<()> {
    println!("{:>10}  {:>5}  {:>8}  {:>8}", "x", "raw", "value", "error");
    for x in [0.3, 0.0625, 0.1875, -1.23, 63.9, 100.0, -64.2, -200.0] {
        let q = quantize(x)?;
        println!("{x:>10}  {:>5}  {:>8}  {:>8.4}", q.raw(), q.to_f64(), q.to_f64() - x);
    }
    println!("range [{}, {}], step 0.125", FixedPoint::MIN.to_f64(), FixedPoint::MAX.to_f64());
    let sum = FixedPoint::MAX.saturating_add(quantize(1.0)?);
    println!("63.875 + 1 saturates to {}", sum.to_f64());
    match quantize(f64::NAN) {
        Ok(_) => unreachable!(),
        Err(e) => println!("NaN: {e}"),
    }
    Ok(())
}
