#![no_main]
//! Arbitrary bytes through the games reader. Accepted files must survive a
//! write/read round trip and the roster and diagnostic builders.

use libfuzzer_sys::fuzz_target;
use strength_ties::data::{binned_draw_diagnostic, build_roster_and_dataset, parse_games, scan_games, write_games};

fuzz_target!(|data: &[u8]| {
    let _ = scan_games(data);
    let Ok(rows) = parse_games(data) else {
        return;
    };
    let mut out = Vec::new();
    write_games(&rows, &mut out).expect("accepted rows are writable");
    let again = parse_games(out.as_slice()).expect("written rows parse");
    assert_eq!(rows.len(), again.len());
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!((&a.event_id, &a.white_id, &a.black_id), (&b.event_id, &b.white_id, &b.black_id));
        assert_eq!((a.white_rating, a.black_rating, a.outcome), (b.white_rating, b.black_rating, b.outcome));
    }
    let _ = build_roster_and_dataset(&rows);
    let _ = binned_draw_diagnostic(&rows, 200.0, 50.0);
});
