#![no_main]
use libfuzzer_sys::fuzz_target;
use tom_core::{PolicyTable, PROB_TOL};

fuzz_target!(|data: &[u8]| {
    let Ok(policy) = serde_json::from_slice::<PolicyTable>(data) else {
        return;
    };
    for row in policy.rows() {
        let total: f64 = row.iter().sum();
        assert!((total - 1.0).abs() <= PROB_TOL);
    }
    let json = serde_json::to_vec(&policy).unwrap();
    let back: PolicyTable = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, policy);
});
