//! Games files, rosters and the rating scale.
//!
//! A games file is UTF-8 CSV with the header
//! `event_id,white_id,black_id,white_rating,black_rating,result`
//! (columns may appear in any order; extra columns are ignored). Fields are
//! split on commas with no quoting, so IDs containing commas are rejected,
//! and surrounding whitespace is trimmed. Blank lines are skipped. Ratings are integers on the Elo scale and may be
//! blank; results are one of `1-0`, `0-1`, `1/2-1/2`, `1`, `0`, `0.5`, read
//! from white's side.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, ParseError, Result};
use crate::likelihood::{Dataset, Game, PriorSpec};
use crate::model::GameOutcome;

pub const GAMES_CSV_HEADER: [&str; 6] = ["event_id", "white_id", "black_id", "white_rating", "black_rating", "result"];

pub const RATING_CENTER: f64 = 1500.0;

/// `θ` per Elo point, `ln 10 / 400`.
pub fn rating_slope() -> f64 {
    std::f64::consts::LN_10 / 400.0
}

pub fn rating_to_theta(rating: f64) -> Result<f64> {
    ensure_finite("rating", rating)?;
    Ok((rating - RATING_CENTER) * rating_slope())
}

pub fn theta_to_rating(theta: f64) -> Result<f64> {
    ensure_finite("theta", theta)?;
    Ok(RATING_CENTER + theta / rating_slope())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGameRow {
    pub event_id: String,
    pub white_id: String,
    pub black_id: String,
    pub white_rating: Option<i64>,
    pub black_rating: Option<i64>,
    pub outcome: GameOutcome,
    /// 1-based line in the source file; 0 for rows built in memory.
    pub line: u64,
}

impl RawGameRow {
    /// White's score: 1, 0.5 or 0.
    pub fn score(&self) -> f64 {
        self.outcome.score()
    }
}

pub fn parse_result_token(token: &str) -> Option<GameOutcome> {
    match token {
        "1-0" | "1" => Some(GameOutcome::Win),
        "0-1" | "0" => Some(GameOutcome::Loss),
        "1/2-1/2" | "0.5" => Some(GameOutcome::Draw),
        _ => None,
    }
}

pub fn result_token(outcome: GameOutcome) -> &'static str {
    match outcome {
        GameOutcome::Win => "1-0",
        GameOutcome::Loss => "0-1",
        GameOutcome::Draw => "1/2-1/2",
    }
}

/// Outcome of scanning a games file: every data line is accounted for as
/// either a row or an error.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub rows: Vec<RawGameRow>,
    pub errors: Vec<ParseError>,
    /// Non-blank data lines read (header excluded).
    pub records: usize,
}

struct Columns {
    index: [usize; 6],
    width: usize,
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn header_columns(header: &[&str]) -> Result<Columns, ParseError> {
    let mut index = [0; 6];
    for (slot, name) in index.iter_mut().zip(GAMES_CSV_HEADER) {
        *slot = header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| ParseError::new(1, Some(name), "missing required column"))?;
    }
    Ok(Columns { index, width: header.len() })
}

fn parse_rating(field: &str, line: u64, column: &str) -> Result<Option<i64>, ParseError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<i64>()
        .map(Some)
        .map_err(|_| ParseError::new(line, Some(column), format!("rating `{field}` is not an integer")))
}

fn parse_record(fields: &[&str], columns: &Columns, line: u64) -> Result<RawGameRow, ParseError> {
    if fields.len() != columns.width {
        return Err(ParseError::new(
            line,
            None,
            format!(
                "expected {} fields, found {} (IDs containing commas are not supported)",
                columns.width,
                fields.len()
            ),
        ));
    }
    let field = |i: usize| fields[columns.index[i]];
    let id = |i: usize| -> Result<String, ParseError> {
        let v = field(i);
        if v.is_empty() {
            Err(ParseError::new(line, Some(GAMES_CSV_HEADER[i]), "empty identifier"))
        } else {
            Ok(v.to_owned())
        }
    };
    let event_id = id(0)?;
    let white_id = id(1)?;
    let black_id = id(2)?;
    if white_id == black_id {
        return Err(ParseError::new(line, Some("black_id"), format!("player `{white_id}` paired against themself")));
    }
    let white_rating = parse_rating(field(3), line, "white_rating")?;
    let black_rating = parse_rating(field(4), line, "black_rating")?;
    let token = field(5);
    let outcome = parse_result_token(token)
        .ok_or_else(|| ParseError::new(line, Some("result"), format!("unsupported result token `{token}`")))?;
    Ok(RawGameRow {
        event_id,
        white_id,
        black_id,
        white_rating,
        black_rating,
        outcome,
        line,
    })
}

/// Next line without its terminator, or `None` at end of input.
fn next_line<R: BufRead>(input: &mut R, buf: &mut Vec<u8>, line: u64) -> Result<Option<Result<String, ParseError>>, ParseError> {
    buf.clear();
    let n = input
        .read_until(b'\n', buf)
        .map_err(|e| ParseError::new(line, None, format!("read failed: {e}")))?;
    if n == 0 {
        return Ok(None);
    }
    while matches!(buf.last(), Some(b'\n' | b'\r')) {
        buf.pop();
    }
    Ok(Some(
        String::from_utf8(std::mem::take(buf)).map_err(|_| ParseError::new(line, None, "invalid UTF-8")),
    ))
}

/// Parses every line, collecting rows and positioned errors side by side.
/// Fails outright only when the header is unusable or the input cannot be read.
pub fn scan_games<R: Read>(input: R) -> Result<ScanResult, ParseError> {
    let mut input = BufReader::new(input);
    let mut buf = Vec::new();
    let header = match next_line(&mut input, &mut buf, 1)? {
        Some(h) => h?,
        None => return Err(ParseError::new(1, None, "header row missing")),
    };
    let columns = header_columns(&split_fields(header.trim_start_matches('\u{feff}')))?;
    let mut out = ScanResult::default();
    let mut line = 1;
    while let Some(text) = next_line(&mut input, &mut buf, line + 1)? {
        line += 1;
        let parsed = text.and_then(|text| {
            if text.trim().is_empty() {
                return Ok(None);
            }
            parse_record(&split_fields(&text), &columns, line).map(Some)
        });
        match parsed {
            Ok(None) => continue,
            Ok(Some(row)) => out.rows.push(row),
            Err(e) => out.errors.push(e),
        }
        out.records += 1;
    }
    Ok(out)
}

/// Parses a games file, stopping at the first bad line.
pub fn parse_games<R: Read>(input: R) -> Result<Vec<RawGameRow>, ParseError> {
    let scan = scan_games(input)?;
    match scan.errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(scan.rows),
    }
}

pub fn read_games_file(path: impl AsRef<Path>) -> Result<Vec<RawGameRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_games(std::io::BufReader::new(file))?)
}

pub fn write_games<W: Write>(rows: &[RawGameRow], out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let to_io = |e: std::io::Error| Error::io("<games output>", e);
    writeln!(out, "{}", GAMES_CSV_HEADER.join(",")).map_err(to_io)?;
    let rating = |r: Option<i64>| r.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let ids = [&row.event_id, &row.white_id, &row.black_id];
        if ids.iter().any(|s| s.contains([',', '\n', '\r']) || s.trim() != s.as_str() || s.is_empty()) {
            return Err(Error::invalid(format!(
                "identifiers on line {} cannot be written: empty, padded, or containing a comma or newline",
                row.line
            )));
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.event_id,
            row.white_id,
            row.black_id,
            rating(row.white_rating),
            rating(row.black_rating),
            result_token(row.outcome)
        )
        .map_err(to_io)?;
    }
    out.flush().map_err(to_io)
}

pub fn write_games_file(path: impl AsRef<Path>, rows: &[RawGameRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_games(rows, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// A player within one event. The same person in two events is two entries.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayerKey {
    pub player_id: String,
    pub event_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub key: PlayerKey,
    pub rating: Option<i64>,
    /// `rating_to_theta(rating)` when rated.
    pub prior_mean: Option<f64>,
}

/// Players in lexicographic key order; a player's index in the roster is
/// its index in the dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub entries: Vec<RosterEntry>,
}

impl Roster {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, key: &PlayerKey) -> Option<usize> {
        self.entries.binary_search_by(|e| e.key.cmp(key)).ok()
    }

    pub fn prior_means(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.prior_mean).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingConflict {
    pub key: PlayerKey,
    pub kept: i64,
    /// Line numbers whose rating disagreed with (or was missing relative to) the kept one.
    pub lines: Vec<u64>,
}

impl std::fmt::Display for RatingConflict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "player `{}` in event `{}` has inconsistent ratings; kept {} (other values on lines {:?})",
            self.key.player_id, self.key.event_id, self.kept, self.lines
        )
    }
}

#[derive(Clone, Debug)]
pub struct RosterBuild {
    pub roster: Roster,
    pub dataset: Dataset,
    /// Informative prior with means from ratings; unrated players are absent.
    pub prior: PriorSpec,
    pub warnings: Vec<RatingConflict>,
}

pub fn build_roster_and_dataset(rows: &[RawGameRow]) -> Result<RosterBuild> {
    if rows.is_empty() {
        return Err(Error::invalid("no games"));
    }
    // First non-absent rating wins; later disagreements are remembered per player.
    let mut ratings: BTreeMap<PlayerKey, (Option<i64>, Vec<u64>)> = BTreeMap::new();
    for row in rows {
        for (id, rating) in [(&row.white_id, row.white_rating), (&row.black_id, row.black_rating)] {
            let key = PlayerKey {
                player_id: id.clone(),
                event_id: row.event_id.clone(),
            };
            let slot = ratings.entry(key).or_insert((None, Vec::new()));
            match (slot.0, rating) {
                (None, Some(r)) => slot.0 = Some(r),
                (Some(kept), r) if r != Some(kept) => slot.1.push(row.line),
                _ => {}
            }
        }
    }
    // A blank seen before the first rating also counts as inconsistent.
    for row in rows {
        for (id, rating) in [(&row.white_id, row.white_rating), (&row.black_id, row.black_rating)] {
            if rating.is_some() {
                continue;
            }
            let key = PlayerKey {
                player_id: id.clone(),
                event_id: row.event_id.clone(),
            };
            let slot = ratings.get_mut(&key).expect("key inserted above");
            if slot.0.is_some() && !slot.1.contains(&row.line) {
                slot.1.push(row.line);
            }
        }
    }
    let mut warnings = Vec::new();
    let mut entries = Vec::with_capacity(ratings.len());
    for (key, (rating, mut lines)) in ratings {
        if let (Some(kept), false) = (rating, lines.is_empty()) {
            lines.sort_unstable();
            lines.dedup();
            warnings.push(RatingConflict { key: key.clone(), kept, lines });
        }
        let prior_mean = rating.map(|r| rating_to_theta(r as f64)).transpose()?;
        entries.push(RosterEntry { key, rating, prior_mean });
    }
    let roster = Roster { entries };
    let index = |id: &str, event: &str| {
        roster
            .index_of(&PlayerKey {
                player_id: id.to_owned(),
                event_id: event.to_owned(),
            })
            .expect("every player is in the roster")
    };
    let games: Vec<Game> = rows
        .iter()
        .map(|r| Game {
            white: index(&r.white_id, &r.event_id),
            black: index(&r.black_id, &r.event_id),
            outcome: r.outcome,
        })
        .collect();
    let dataset = Dataset::new(roster.len(), games)?;
    let prior = PriorSpec::informative(roster.prior_means());
    Ok(RosterBuild {
        roster,
        dataset,
        prior,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawRateBin {
    /// Inclusive lower edge of the average-rating bin.
    pub lower: f64,
    pub upper: f64,
    pub games: usize,
    pub draws: usize,
    pub draw_rate: f64,
    /// White wins among decisive games; absent when every game was drawn.
    pub white_win_rate: Option<f64>,
}

/// Empirical draw rate by average pre-event rating, over games between two
/// rated players at most `max_rating_gap` apart. Bins are aligned to
/// multiples of `bin_width` and only non-empty bins are returned.
pub fn binned_draw_diagnostic(rows: &[RawGameRow], max_rating_gap: f64, bin_width: f64) -> Result<Vec<DrawRateBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin_width must be positive"));
    }
    if !(max_rating_gap >= 0.0) {
        return Err(Error::invalid("max_rating_gap must be non-negative"));
    }
    // bin index -> (games, draws, white wins)
    let mut bins: BTreeMap<i64, (usize, usize, usize)> = BTreeMap::new();
    for row in rows {
        let (Some(w), Some(b)) = (row.white_rating, row.black_rating) else {
            continue;
        };
        if ((w - b).abs() as f64) > max_rating_gap {
            continue;
        }
        let avg = (w + b) as f64 / 2.0;
        let slot = bins.entry((avg / bin_width).floor() as i64).or_default();
        slot.0 += 1;
        match row.outcome {
            GameOutcome::Draw => slot.1 += 1,
            GameOutcome::Win => slot.2 += 1,
            GameOutcome::Loss => {}
        }
    }
    Ok(bins
        .into_iter()
        .map(|(i, (games, draws, wins))| {
            let decisive = games - draws;
            DrawRateBin {
                lower: i as f64 * bin_width,
                upper: (i + 1) as f64 * bin_width,
                games,
                draws,
                draw_rate: draws as f64 / games as f64,
                white_win_rate: (decisive > 0).then(|| wins as f64 / decisive as f64),
            }
        })
        .collect())
}
