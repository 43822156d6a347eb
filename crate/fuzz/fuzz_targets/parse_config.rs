#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = gmmap::RunConfig::from_toml(text) {
            let again = gmmap::RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(again, cfg);
        }
    }
});
