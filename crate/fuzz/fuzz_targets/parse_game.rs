#![no_main]
use libfuzzer_sys::fuzz_target;
use tom_core::GameSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(game) = GameSpec::parse_unchecked(text) else {
        return;
    };
    let report = game.validate();
    assert_eq!(report.issues.is_empty(), GameSpec::parse(text).is_ok());

    // canonical form must parse back to the same game
    let again = GameSpec::parse_unchecked(&game.to_json()).expect("canonical JSON parses");
    assert_eq!(again, game);
});
