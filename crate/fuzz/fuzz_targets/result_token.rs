#![no_main]

use libfuzzer_sys::fuzz_target;
use strength_ties::data::{parse_result_token, result_token};

fuzz_target!(|token: &str| {
    if let Some(outcome) = parse_result_token(token) {
        assert_eq!(parse_result_token(result_token(outcome)), Some(outcome));
    }
});
