//! Runs the finite-difference gradient suite over every layer.
//!
//!     cargo run --example gradient_check [seed]

use aucap::selfcheck::{gradient_suite, TOLERANCE};

fn main() -> aucap::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for c in gradient_suite(seed)? {
        let mark = if c.max_relative_error < TOLERANCE { "ok" } else { "BAD" };
        println!("{:<11} {:>9.2e} over {:>5} entries  {mark}", c.layer, c.max_relative_error, c.checked);
    }
    Ok(())
}
