#![no_main]

use fracneumann::Expression;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(expr) = Expression::parse(text) {
        // evaluation may fail but must not panic
        let _ = expr.eval(0.25, 0.75);
        let _ = expr.eval(-1.0, 1e300);
    }
});
