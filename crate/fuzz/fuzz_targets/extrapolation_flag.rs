#![no_main]

use isw::solver::Extrapolation;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(e) = s.parse::<Extrapolation>() {
            assert_eq!(e.to_string().parse::<Extrapolation>(), Ok(e));
        }
    }
});
