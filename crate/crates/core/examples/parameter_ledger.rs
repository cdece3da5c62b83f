//! Evaluates the exponent inequalities for a few exponent caps.

use lsv_evl::montecarlo::{exponent_ledger, Exponents};

fn main() {
    let exponents = Exponents::default();
    for alpha in [0.05, 0.1, 0.13, 1.0 / 7.0] {
        println!("alpha = {alpha:.4}");
        for check in exponent_ledger(alpha, &exponents) {
            let mark = if check.satisfied { "ok  " } else { "FAIL" };
            println!("  {mark} {:<20} {}  ({:.4} vs {:.4})", check.name, check.statement, check.lhs, check.rhs);
        }
    }
}
