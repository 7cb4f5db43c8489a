#![no_main]
use libfuzzer_sys::fuzz_target;
use tom_core::config::AgentSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = AgentSpec::parse_flag(text) else {
        return;
    };
    // range checks happen at resolve time, so NaN and inf can get this far
    if let AgentSpec::Tom { a, b, epsilon, .. } = &spec {
        if !(a.is_finite() && b.is_finite() && epsilon.is_none_or(f64::is_finite)) {
            return;
        }
    }
    let json = serde_json::to_string(&spec).unwrap();
    let back: AgentSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);
});
