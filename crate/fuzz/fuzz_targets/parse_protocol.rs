#![no_main]

use libfuzzer_sys::fuzz_target;
use manifold_icp::kinematics::TrajectoryProtocol;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = text.parse::<TrajectoryProtocol>();
    }
});
