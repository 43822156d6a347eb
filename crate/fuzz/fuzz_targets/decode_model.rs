#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = gmmap::io::decode_model(data) {
        // Anything that decodes must encode back to the same bytes.
        assert_eq!(gmmap::io::encode_model(&model).unwrap(), data);
    }
});
