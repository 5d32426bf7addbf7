#![no_main]

use isw::io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json_str(text) {
        let _ = cfg.validate();
        let json = serde_json::to_string(&cfg).expect("config serializes");
        assert_eq!(RunConfig::from_json_str(&json).ok().as_ref(), Some(&cfg));
    }
});

