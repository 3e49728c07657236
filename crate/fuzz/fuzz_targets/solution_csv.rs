#![no_main]

use fracneumann::io::parse_solution_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_solution_csv(data);
});
