#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(depth) = gmmap::io::decode_depth_png(data) {
        // Keep the frame small enough that back-projection stays cheap.
        if depth.width() as u64 * depth.height() as u64 <= 1 << 16 {
            let intrinsics = gmmap::io::CameraIntrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: depth.width() as f64 / 2.0,
                cy: depth.height() as f64 / 2.0,
                width: depth.width(),
                height: depth.height(),
                depth_scale: 1000.0,
            };
            let gray = gmmap::io::GrayImage::new(depth.width(), depth.height());
            let _ = gmmap::io::load_frame(&depth, &gray, &intrinsics, 1);
        }
    }
    let _ = gmmap::io::decode_intensity_png(data);
});
