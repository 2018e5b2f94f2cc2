#![no_main]

use libfuzzer_sys::fuzz_target;
use ltvprop::problem::ProblemFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = ProblemFile::from_json(text) else {
        return;
    };
    let again = ProblemFile::from_json(&file.to_json()).expect("serialized problems parse");
    assert_eq!(file, again);
    // Building validates every shape and expression; solving is left out
    // because a valid file may legitimately ask for a large grid.
    let _ = file.build();
});
