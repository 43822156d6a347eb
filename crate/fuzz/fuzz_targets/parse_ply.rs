#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = gmmap::io::parse_ply(data) {
        let mut out = Vec::new();
        gmmap::io::write_ply(&cloud, &mut out).unwrap();
        assert_eq!(gmmap::io::parse_ply(&out).unwrap().len(), cloud.len());
    }
});
