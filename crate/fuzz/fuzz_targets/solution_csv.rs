#![no_main]

use libfuzzer_sys::fuzz_target;
use ltvprop::csv::parse_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_table(text) {
        assert!(table.rows.iter().all(|r| r.len() == table.columns.len()));
    }
});
