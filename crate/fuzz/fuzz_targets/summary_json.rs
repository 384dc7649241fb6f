#![no_main]

use cislunar_cli::output::to_json;
use cislunar_cli::parse_summary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(summary) = parse_summary(text) {
        let _ = summary.render();
        let json = to_json(&summary).expect("summary serializes");
        assert_eq!(parse_summary(&json).expect("written summary parses"), summary);
    }
});
