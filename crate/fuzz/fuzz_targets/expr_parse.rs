#![no_main]

use libfuzzer_sys::fuzz_target;
use ltvprop::expr::parse;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = parse(text) else {
        return;
    };
    let printed = e.to_string();
    let again = parse(&printed).expect("printed expressions parse");
    assert_eq!(e, again);
    for x in [0.0, 0.5, 1.0, 1e3] {
        let _ = e.eval(x);
    }
});
