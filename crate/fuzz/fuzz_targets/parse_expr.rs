#![no_main]

use equiwave::expr::Expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(e) = Expr::parse(src) {
            let _ = e.eval(0.5);
            // Printing and reparsing must not fail.
            let _ = Expr::parse(&e.to_string()).expect("display output parses");
        }
    }
});
