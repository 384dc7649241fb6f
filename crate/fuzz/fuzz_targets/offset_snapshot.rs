#![no_main]

use cislunar_core::transactnet::{parse_snapshot, write_snapshot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(graph) = parse_snapshot(text) {
        let again = parse_snapshot(&write_snapshot(&graph)).expect("written snapshot parses");
        assert_eq!(again.edges(), graph.edges());
    }
});
