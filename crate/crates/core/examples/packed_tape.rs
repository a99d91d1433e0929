//! Registers packed into one integer `x = Σ r_i·q^{i-1}`, with carry
//! correction on update and the one-bit sanitization of invalid raw bits.
//!
//! ```text
//! cargo run --example packed_tape
//! ```

use catalytic_savitch::catalyst::{PackedTape, Sign};
use num_bigint::BigUint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tape = PackedTape::pack(&[2, 1], 3)?;
    println!("pack (2, 1) mod 3: x = {}", tape.raw());
    tape.packed_update(1, 2, Sign::Plus)?;
    println!(
        "r_1 += 2:          x = {}  registers {:?}",
        tape.raw(),
        tape.decode()?
    );
    tape.packed_update(1, 2, Sign::Minus)?;
    println!(
        "r_1 -= 2:          x = {}  registers {:?}",
        tape.raw(),
        tape.decode()?
    );

    // 4 raw bits can hold 0..=15 but only 0..=8 encode two registers mod 3.
    let mut raw = PackedTape::from_raw(3, 2, BigUint::from(12u32))?;
    println!("raw 12 valid? {}", raw.is_valid());
    raw.sanitize();
    println!("sanitized: x = {}  flag = {}", raw.raw(), raw.msb_flipped());
    raw.packed_update(2, 1, Sign::Plus)?;
    raw.packed_update(2, 1, Sign::Minus)?;
    raw.desanitize();
    println!(
        "desanitized after a round trip of updates: x = {}",
        raw.raw()
    );
    assert_eq!(raw.raw(), &BigUint::from(12u32));
    Ok(())
}
