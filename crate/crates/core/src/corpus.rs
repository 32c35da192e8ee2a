//! Corpus ingestion and normalization.
//!
//! A corpus is a list of pieces, each an n×l grid of [`Symbol`]s. Grids
//! come either directly from the JSON grid format or from an onset list
//! (`[voice, onset, duration, pitch]` in bins) that is reduced to one
//! column per beat ([`beat_quantize`]) or per metrical bin
//! ([`encode_rhythm_grid`]).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::symbol::{ChordSequence, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "major" => Ok(Mode::Major),
            "minor" => Ok(Mode::Minor),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

/// A grid-encoded piece.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Piece {
    pub id: String,
    pub mode: Mode,
    /// Pitch class of the tonic, 0 (C) to 11.
    pub original_key: u8,
    pub beats_per_bar: Option<u32>,
    pub grid: ChordSequence,
}

/// One note of an onset list. Times are in integer bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NoteEvent {
    pub voice: usize,
    pub onset: u32,
    pub duration: u32,
    pub pitch: u8,
}

/// A piece still in onset-list form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScorePiece {
    pub id: String,
    pub mode: Mode,
    pub original_key: u8,
    pub beats_per_bar: Option<u32>,
    pub voices: usize,
    pub events: Vec<NoteEvent>,
}

impl ScorePiece {
    /// End of the last sounding note.
    pub fn end(&self) -> u32 {
        self.events.iter().map(|e| e.onset + e.duration).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let mut by_voice: Vec<Vec<&NoteEvent>> = vec![Vec::new(); self.voices];
        for e in &self.events {
            if e.voice >= self.voices {
                return Err(Error::Shape(format!(
                    "piece {}: event voice {} but only {} voices",
                    self.id, e.voice, self.voices
                )));
            }
            if e.duration == 0 {
                return Err(Error::Shape(format!("piece {}: zero-length note", self.id)));
            }
            if e.pitch > 127 {
                return Err(Error::Range(format!("pitch {} outside [0, 127]", e.pitch)));
            }
            by_voice[e.voice].push(e);
        }
        for (v, evs) in by_voice.iter_mut().enumerate() {
            evs.sort_by_key(|e| e.onset);
            for w in evs.windows(2) {
                if w[0].onset + w[0].duration > w[1].onset {
                    return Err(Error::Shape(format!(
                        "piece {}: overlapping notes in voice {v} at bin {}",
                        self.id, w[1].onset
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A set of pieces sharing a voice count, with per-voice alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    voices: usize,
    pieces: Vec<Piece>,
    alphabets: Vec<Vec<Symbol>>,
}

impl Corpus {
    pub fn new(voices: usize, pieces: Vec<Piece>) -> Result<Self> {
        if voices == 0 {
            return Err(Error::Shape("corpus must have at least one voice".into()));
        }
        for p in &pieces {
            if p.grid.voices() != voices {
                return Err(Error::Shape(format!(
                    "piece {} has {} voices, corpus declares {voices}",
                    p.id,
                    p.grid.voices()
                )));
            }
            if p.grid.is_empty() {
                return Err(Error::Shape(format!("piece {} has no columns", p.id)));
            }
            if p.original_key > 11 {
                return Err(Error::Range(format!(
                    "piece {}: original_key {} outside 0-11",
                    p.id, p.original_key
                )));
            }
        }
        let alphabets = compute_alphabets(voices, &pieces);
        Ok(Self { voices, pieces, alphabets })
    }

    pub fn voices(&self) -> usize {
        self.voices
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<Piece> {
        self.pieces
    }

    /// Per-voice sorted alphabets: exactly the symbols observed in each voice.
    pub fn alphabets(&self) -> &[Vec<Symbol>] {
        &self.alphabets
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn total_columns(&self) -> usize {
        self.pieces.iter().map(|p| p.grid.len()).sum()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &ChordSequence> {
        self.pieces.iter().map(|p| &p.grid)
    }

    /// Stable content hash (hex, 16 chars) of the corpus JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = self.to_json();
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CorpusFile::from(self)).expect("corpus serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn compute_alphabets(voices: usize, pieces: &[Piece]) -> Vec<Vec<Symbol>> {
    let mut sets = vec![BTreeSet::new(); voices];
    for p in pieces {
        for (i, set) in sets.iter_mut().enumerate() {
            set.extend(p.grid.row(i).iter().copied());
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

// ---------------------------------------------------------------------------
// JSON interchange

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    voices: usize,
    pieces: Vec<PieceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PieceFile {
    id: String,
    mode: Mode,
    original_key: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beats_per_bar: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<Vec<Symbol>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    events: Option<Vec<[i64; 4]>>,
}

impl From<&Corpus> for CorpusFile {
    fn from(c: &Corpus) -> Self {
        CorpusFile {
            voices: c.voices,
            pieces: c.pieces.iter().map(PieceFile::from).collect(),
        }
    }
}

impl From<&Piece> for PieceFile {
    fn from(p: &Piece) -> Self {
        PieceFile {
            id: p.id.clone(),
            mode: p.mode,
            original_key: p.original_key,
            beats_per_bar: p.beats_per_bar,
            grid: Some(p.grid.rows().to_vec()),
            events: None,
        }
    }
}

/// How an onset-list piece is turned into a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnsetEncoding {
    /// One column per beat; beats fall every `bins_per_beat` bins.
    Beats { bins_per_beat: u32, options: BeatOptions },
    /// One column per metrical bin, with Rest/Hold symbols.
    Rhythm { bins_per_cycle: u32, resolution: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorpusFormat {
    /// Every piece carries a `grid`.
    Grid,
    /// Every piece carries `events`, converted with the given encoding.
    Onsets(OnsetEncoding),
}

/// Parse corpus JSON text.
pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<Corpus> {
    let file: CorpusFile = serde_json::from_str(text)?;
    let voices = file.voices;
    let mut pieces = Vec::with_capacity(file.pieces.len());
    for pf in file.pieces {
        let piece = match (format, pf.grid, pf.events) {
            (CorpusFormat::Grid, Some(grid), _) => {
                let grid = ChordSequence::new(grid)
                    .map_err(|e| Error::Shape(format!("piece {}: {e}", pf.id)))?;
                Piece {
                    id: pf.id,
                    mode: pf.mode,
                    original_key: pf.original_key,
                    beats_per_bar: pf.beats_per_bar,
                    grid,
                }
            }
            (CorpusFormat::Onsets(enc), _, Some(raw)) => {
                let events = raw
                    .iter()
                    .map(|&[v, on, dur, p]| {
                        if v < 0 || on < 0 || dur < 0 || !(0..=127).contains(&p) {
                            return Err(Error::Parse(format!("invalid event {:?}", [v, on, dur, p])));
                        }
                        Ok(NoteEvent { voice: v as usize, onset: on as u32, duration: dur as u32, pitch: p as u8 })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let score = ScorePiece {
                    id: pf.id,
                    mode: pf.mode,
                    original_key: pf.original_key,
                    beats_per_bar: pf.beats_per_bar,
                    voices,
                    events,
                };
                match enc {
                    OnsetEncoding::Beats { bins_per_beat, options } => {
                        let beats = regular_beats(&score, bins_per_beat)?;
                        beat_quantize(&score, &beats, options)?
                    }
                    OnsetEncoding::Rhythm { bins_per_cycle, resolution } => {
                        encode_rhythm_grid(&score, bins_per_cycle, resolution)?
                    }
                }
            }
            (CorpusFormat::Grid, None, _) => {
                return Err(Error::Parse(format!("piece {} has no \"grid\"", pf.id)))
            }
            (CorpusFormat::Onsets(_), _, None) => {
                return Err(Error::Parse(format!("piece {} has no \"events\"", pf.id)))
            }
        };
        pieces.push(piece);
    }
    Corpus::new(voices, pieces)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, format)
}

// ---------------------------------------------------------------------------
// Beat quantization

/// What to keep at a beat when the sounding note was struck earlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoundingPolicy {
    /// Keep whatever pitch sounds at the beat onset.
    #[default]
    Sounding,
    /// Only notes struck exactly on a beat are kept; notes struck off the
    /// beat are ignored entirely.
    OnsetOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BeatOptions {
    pub policy: SoundingPolicy,
    /// Emit `Rest` for silent beats instead of failing.
    pub rests: bool,
}

/// Beat onsets every `bins_per_beat` bins up to the end of the piece.
pub fn regular_beats(piece: &ScorePiece, bins_per_beat: u32) -> Result<Vec<u32>> {
    if bins_per_beat == 0 {
        return Err(Error::Resolution("bins_per_beat must be positive".into()));
    }
    Ok((0..piece.end()).step_by(bins_per_beat as usize).collect())
}

/// Reduce an onset list to one column per beat.
pub fn beat_quantize(piece: &ScorePiece, beat_grid: &[u32], options: BeatOptions) -> Result<Piece> {
    piece.validate()?;
    if beat_grid.is_empty() {
        return Err(Error::Shape(format!("piece {}: empty beat grid", piece.id)));
    }
    let beats: BTreeSet<u32> = beat_grid.iter().copied().collect();
    let mut rows = vec![Vec::with_capacity(beat_grid.len()); piece.voices];
    for (voice, row) in rows.iter_mut().enumerate() {
        for (b, &t) in beat_grid.iter().enumerate() {
            let sounding = piece.events.iter().find(|e| {
                e.voice == voice
                    && e.onset <= t
                    && t < e.onset + e.duration
                    && (options.policy == SoundingPolicy::Sounding || beats.contains(&e.onset))
            });
            match sounding {
                Some(e) => row.push(Symbol::Pitch(e.pitch)),
                None if options.rests => row.push(Symbol::Rest),
                None => return Err(Error::EmptyBeat { voice, beat: b }),
            }
        }
    }
    Ok(Piece {
        id: piece.id.clone(),
        mode: piece.mode,
        original_key: piece.original_key,
        beats_per_bar: piece.beats_per_bar,
        grid: ChordSequence::new(rows)?,
    })
}

// ---------------------------------------------------------------------------
// Rhythm grid

/// Encode an onset list onto metrical bins: onsets emit the pitch, sustained
/// bins emit `Hold`, silence emits `Rest`. `resolution` is the number of
/// source bins per grid bin. The grid is padded with rests to whole cycles;
/// column `j` has metrical position `j % bins_per_cycle`.
pub fn encode_rhythm_grid(piece: &ScorePiece, bins_per_cycle: u32, resolution: u32) -> Result<Piece> {
    piece.validate()?;
    if bins_per_cycle == 0 || resolution == 0 {
        return Err(Error::Resolution("bins_per_cycle and resolution must be positive".into()));
    }
    for e in &piece.events {
        if e.onset % resolution != 0 || (e.onset + e.duration) % resolution != 0 {
            return Err(Error::Resolution(format!(
                "piece {}: note at source bin {} (duration {}) falls between grid bins",
                piece.id, e.onset, e.duration
            )));
        }
    }
    let bins = piece.end().div_ceil(resolution).max(1);
    let len = bins.div_ceil(bins_per_cycle) * bins_per_cycle;
    let mut rows = vec![vec![Symbol::Rest; len as usize]; piece.voices];
    for e in &piece.events {
        let start = (e.onset / resolution) as usize;
        let dur = (e.duration / resolution) as usize;
        let row = &mut rows[e.voice];
        row[start] = Symbol::Pitch(e.pitch);
        for cell in &mut row[start + 1..start + dur] {
            *cell = Symbol::Hold;
        }
    }
    Ok(Piece {
        id: piece.id.clone(),
        mode: piece.mode,
        original_key: piece.original_key,
        beats_per_bar: piece.beats_per_bar,
        grid: ChordSequence::new(rows)?,
    })
}

/// Inverse of [`encode_rhythm_grid`]: merge Hold runs into their note and
/// drop rests. A Hold with no note to continue is treated as silence.
pub fn decode_rhythm_grid(grid: &ChordSequence, resolution: u32) -> Vec<NoteEvent> {
    let mut out = Vec::new();
    for voice in 0..grid.voices() {
        let mut current: Option<NoteEvent> = None;
        for (j, &s) in grid.row(voice).iter().enumerate() {
            let t = j as u32 * resolution;
            match s {
                Symbol::Pitch(p) => {
                    out.extend(current.take());
                    current = Some(NoteEvent { voice, onset: t, duration: resolution, pitch: p });
                }
                Symbol::Hold => {
                    if let Some(e) = current.as_mut() {
                        e.duration += resolution;
                    }
                }
                Symbol::Rest => out.extend(current.take()),
            }
        }
        out.extend(current);
    }
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Transposition and splitting

/// Semitone shift bringing key `pc` to C, chosen in [-6, +5].
pub fn key_shift(pc: u8) -> i32 {
    let s = (-(pc as i32)).rem_euclid(12);
    if s > 5 {
        s - 12
    } else {
        s
    }
}

/// Shift every pitch by `semitones`; `original_key` is left unchanged.
pub fn transpose_by(piece: &Piece, semitones: i32) -> Result<Piece> {
    let grid = piece
        .grid
        .map_symbols(|s| s.transposed(semitones))
        .map_err(|e| Error::Range(format!("piece {}: {e}", piece.id)))?;
    Ok(Piece { grid, ..piece.clone() })
}

/// Transpose a piece into C and set its key to 0.
pub fn transpose_to_c(piece: &Piece) -> Result<Piece> {
    let mut out = transpose_by(piece, key_shift(piece.original_key))?;
    out.original_key = 0;
    Ok(out)
}

/// Undo [`transpose_to_c`] given the key the piece was stored in.
pub fn transpose_from_c(piece: &Piece, key: u8) -> Result<Piece> {
    let mut out = transpose_by(piece, -key_shift(key % 12))?;
    out.original_key = key % 12;
    Ok(out)
}

/// Transpose every piece to C, recomputing alphabets.
pub fn normalize(corpus: &Corpus) -> Result<Corpus> {
    let pieces = corpus.pieces.iter().map(transpose_to_c).collect::<Result<Vec<_>>>()?;
    Corpus::new(corpus.voices, pieces)
}

/// Partition by mode into (major, minor).
pub fn split_by_mode(corpus: &Corpus) -> (Corpus, Corpus) {
    let (major, minor): (Vec<Piece>, Vec<Piece>) =
        corpus.pieces.iter().cloned().partition(|p| p.mode == Mode::Major);
    (
        Corpus::new(corpus.voices, major).expect("sub-corpus of a valid corpus"),
        Corpus::new(corpus.voices, minor).expect("sub-corpus of a valid corpus"),
    )
}

/// Deterministic split: every `every`-th piece (starting at `offset`) goes
/// to the second corpus.
pub fn holdout_split(corpus: &Corpus, every: usize, offset: usize) -> (Corpus, Corpus) {
    let (test, train): (Vec<(usize, Piece)>, Vec<(usize, Piece)>) = corpus
        .pieces
        .iter()
        .cloned()
        .enumerate()
        .partition(|(k, _)| every > 0 && k % every == offset % every.max(1));
    let strip = |v: Vec<(usize, Piece)>| v.into_iter().map(|(_, p)| p).collect::<Vec<_>>();
    (
        Corpus::new(corpus.voices, strip(train)).expect("sub-corpus of a valid corpus"),
        Corpus::new(corpus.voices, strip(test)).expect("sub-corpus of a valid corpus"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: u8) -> Symbol {
        Symbol::Pitch(x)
    }

    fn score(events: &[(usize, u32, u32, u8)], voices: usize) -> ScorePiece {
        ScorePiece {
            id: "s".into(),
            mode: Mode::Major,
            original_key: 0,
            beats_per_bar: Some(4),
            voices,
            events: events
                .iter()
                .map(|&(voice, onset, duration, pitch)| NoteEvent { voice, onset, duration, pitch })
                .collect(),
        }
    }

    #[test]
    fn loads_grid_json() {
        let json = r#"{"voices": 4, "pieces": [{"id": "a", "mode": "major", "original_key": 0,
            "grid": [[72,72,74,76,77,76,74,72],[67,67,67,67,69,67,67,67],
                     [64,64,65,64,65,64,65,64],[48,48,47,48,41,48,43,48]]}]}"#;
        let c = parse_corpus(json, CorpusFormat::Grid).unwrap();
        assert_eq!(c.voices(), 4);
        assert_eq!(c.pieces().len(), 1);
        assert_eq!(c.pieces()[0].grid.len(), 8);
        assert_eq!(c.alphabets()[3], vec![p(41), p(43), p(47), p(48)]);
    }

    #[test]
    fn ragged_rows_are_a_shape_error() {
        let json = r#"{"voices": 2, "pieces": [{"id": "a", "mode": "major", "original_key": 0,
            "grid": [[60,60,60,60,60,60,60,60],[48,48,48,48,48,48,48]]}]}"#;
        assert!(matches!(parse_corpus(json, CorpusFormat::Grid), Err(Error::Shape(_))));
        let json = r#"{"voices": 3, "pieces": [{"id": "a", "mode": "major", "original_key": 0,
            "grid": [[60],[48]]}]}"#;
        assert!(matches!(parse_corpus(json, CorpusFormat::Grid), Err(Error::Shape(_))));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_corpus("{\"voices\": 2", CorpusFormat::Grid), Err(Error::Parse(_))));
        let json = r#"{"voices": 1, "pieces": [{"id": "a", "mode": "dorian", "original_key": 0, "grid": [[60]]}]}"#;
        assert!(matches!(parse_corpus(json, CorpusFormat::Grid), Err(Error::Parse(_))));
    }

    #[test]
    fn half_note_is_sampled_at_both_beats() {
        let s = score(&[(0, 0, 8, 60)], 1);
        let piece = beat_quantize(&s, &[0, 4], BeatOptions::default()).unwrap();
        assert_eq!(piece.grid.row(0), &[p(60), p(60)]);
    }

    #[test]
    fn eighth_pair_keeps_the_onset_symbol() {
        // C4 then D4 as eighths within beat 1 (4 bins per beat).
        let s = score(&[(0, 0, 2, 60), (0, 2, 2, 62), (0, 4, 4, 64)], 1);
        let piece = beat_quantize(&s, &[0, 4], BeatOptions::default()).unwrap();
        assert_eq!(piece.grid.row(0), &[p(60), p(64)]);
    }

    #[test]
    fn silent_beat_needs_rests() {
        let s = score(&[(0, 0, 8, 60), (0, 12, 4, 62)], 1);
        let beats = [0, 4, 8, 12];
        assert!(matches!(
            beat_quantize(&s, &beats, BeatOptions::default()),
            Err(Error::EmptyBeat { voice: 0, beat: 2 })
        ));
        let piece = beat_quantize(&s, &beats, BeatOptions { rests: true, ..Default::default() }).unwrap();
        assert_eq!(piece.grid.row(0), &[p(60), p(60), Symbol::Rest, p(62)]);
    }

    #[test]
    fn onset_only_drops_offbeat_notes() {
        // D4 struck off the beat and sustained across beat 2.
        let s = score(&[(0, 0, 2, 60), (0, 2, 4, 62), (0, 6, 2, 64)], 1);
        let sounding = beat_quantize(&s, &[0, 4], BeatOptions::default()).unwrap();
        assert_eq!(sounding.grid.row(0), &[p(60), p(62)]);
        let opts = BeatOptions { policy: SoundingPolicy::OnsetOnly, rests: true };
        let onset = beat_quantize(&s, &[0, 4], opts).unwrap();
        assert_eq!(onset.grid.row(0), &[p(60), Symbol::Rest]);
    }

    #[test]
    fn rhythm_grid_encodes_hold_and_rest() {
        let s = score(&[(0, 0, 2, 60), (1, 8, 8, 55)], 2);
        let piece = encode_rhythm_grid(&s, 8, 1).unwrap();
        assert_eq!(piece.grid.len(), 16);
        assert_eq!(&piece.grid.row(0)[..2], &[p(60), Symbol::Hold]);
        assert!(piece.grid.row(0)[2..].iter().all(|&x| x == Symbol::Rest));
        // full-bar rest in voice 1
        assert_eq!(&piece.grid.row(1)[..8], &[Symbol::Rest; 8]);
        assert_eq!(decode_rhythm_grid(&piece.grid, 1), {
            let mut e = s.events.clone();
            e.sort();
            e
        });
    }

    #[test]
    fn rhythm_grid_rejects_offgrid_onsets() {
        let s = score(&[(0, 1, 2, 60)], 1);
        assert!(matches!(encode_rhythm_grid(&s, 8, 2), Err(Error::Resolution(_))));
        let ok = encode_rhythm_grid(&score(&[(0, 2, 4, 60)], 1), 8, 2).unwrap();
        assert_eq!(&ok.grid.row(0)[..3], &[Symbol::Rest, p(60), Symbol::Hold]);
    }

    #[test]
    fn overlapping_events_are_rejected() {
        let s = score(&[(0, 0, 4, 60), (0, 2, 4, 62)], 1);
        assert!(matches!(encode_rhythm_grid(&s, 8, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn transposition_examples() {
        let piece = |key: u8, pitch: u8| Piece {
            id: "t".into(),
            mode: Mode::Major,
            original_key: key,
            beats_per_bar: None,
            grid: ChordSequence::new(vec![vec![p(pitch), Symbol::Rest]]).unwrap(),
        };
        let c = piece(0, 60);
        assert_eq!(transpose_to_c(&c).unwrap(), c);
        assert_eq!(transpose_to_c(&piece(2, 62)).unwrap().grid.get(0, 0), p(60));
        let g = transpose_to_c(&piece(7, 67)).unwrap();
        assert_eq!(g.grid.get(0, 0), p(72));
        assert_eq!(g.grid.get(0, 1), Symbol::Rest);
        assert_eq!(g.original_key, 0);
        assert!(matches!(transpose_to_c(&piece(7, 125)), Err(Error::Range(_))));
    }

    #[test]
    fn key_shift_is_minimal() {
        // Exhaustive: the chosen shift is congruent to -key and has the
        // smallest magnitude, ties going to the negative shift.
        for key in 0u8..12 {
            let s = key_shift(key);
            assert!((-6..=5).contains(&s));
            assert_eq!((s + key as i32).rem_euclid(12), 0);
            let best = (-12..=12)
                .filter(|c: &i32| (c + key as i32).rem_euclid(12) == 0)
                .min_by_key(|c| (c.abs(), *c > 0))
                .unwrap();
            assert_eq!(s, best, "key {key}");
        }
    }

    #[test]
    fn split_partitions_by_mode() {
        let mk = |id: &str, mode| Piece {
            id: id.into(),
            mode,
            original_key: 0,
            beats_per_bar: None,
            grid: ChordSequence::new(vec![vec![p(60)]]).unwrap(),
        };
        let c = Corpus::new(1, vec![mk("a", Mode::Major), mk("b", Mode::Minor), mk("c", Mode::Major)]).unwrap();
        let (maj, min) = split_by_mode(&c);
        assert_eq!(maj.pieces().len(), 2);
        assert_eq!(min.pieces().len(), 1);
        let all_major = Corpus::new(1, vec![mk("a", Mode::Major)]).unwrap();
        let (maj, min) = split_by_mode(&all_major);
        assert_eq!(maj, all_major);
        assert!(min.is_empty());
        assert!(min.alphabets()[0].is_empty());
    }
}
