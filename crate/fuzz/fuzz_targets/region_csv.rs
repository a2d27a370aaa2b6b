#![no_main]

use crs_core::region::RateRegion;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(region) = RateRegion::read_csv(data) {
        let _ = region.frontier();
        let _ = region.hypervolume();
        let mut out = Vec::new();
        region.write_csv(&mut out).expect("write to memory");
        let again = RateRegion::read_csv(&out[..]).expect("written region parses");
        assert_eq!(region.points.len(), again.points.len());
    }
});
