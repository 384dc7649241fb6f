#![no_main]

use cislunar_cli::{parse_scenario, render_scenario};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything accepted must survive a render and re-parse unchanged.
    if let Ok(scenario) = parse_scenario(text) {
        let rendered = render_scenario(&scenario).expect("valid scenario renders");
        assert_eq!(parse_scenario(&rendered).expect("rendered scenario parses"), scenario);
    }
});
