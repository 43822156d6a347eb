#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let base = std::path::Path::new("/data");
        if let Ok(m) = gmmap::io::parse_manifest(text, base) {
            let again = gmmap::io::parse_manifest(&m.to_text(base), base).unwrap();
            assert_eq!(again.frames.len(), m.frames.len());
        }
    }
});
