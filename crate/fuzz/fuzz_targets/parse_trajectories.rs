#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = gmmap::io::convert::parse_trajectory_log(text);
        let _ = gmmap::io::convert::parse_tum_list(text);
        let _ = gmmap::io::convert::parse_tum_trajectory(text);
    }
});
