#![no_main]

use dhkpr::report::Report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(report) = Report::parse(text) else { return };
    let printed = report.to_string();
    let again = Report::parse(&printed).expect("printed reports parse");
    assert_eq!(again, report);
    assert_eq!(again.to_string(), printed);
});
