#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = isw::io::parse_profile(text) {
            assert_eq!(p.grid.len(), p.state.zeta.len());
        }
    }
});
