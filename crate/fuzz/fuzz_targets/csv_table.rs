#![no_main]

use isw::io::{format_float, CsvTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(table) = CsvTable::parse(text) else {
        return;
    };
    // Anything we accept must survive a write/read cycle unchanged.
    let again = CsvTable::parse(&table.to_csv_string()).expect("written table parses");
    assert_eq!(again.columns, table.columns);
    assert_eq!(again.rows.len(), table.rows.len());
    for (a, b) in again.rows.iter().flatten().zip(table.rows.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits(), "{}", format_float(*b));
    }
});
