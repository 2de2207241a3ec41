#![no_main]
//! Report JSON: anything accepted re-serialises to an equal report.

use libfuzzer_sys::fuzz_target;
use strength_ties::report::FitReport;

fuzz_target!(|text: &str| {
    let Ok(report) = FitReport::from_json(text) else {
        return;
    };
    let _ = report.gamma();
    let _ = report.converged();
    if let Ok(json) = report.to_json() {
        let again = FitReport::from_json(&json).expect("serialised report parses");
        assert_eq!(again, report);
    }
});
