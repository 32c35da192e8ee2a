//! Seeded synthetic corpora for tests, examples and calibration.
//!
//! [`chorale_corpus`] writes four-voice homorhythmic pieces: a Markov chord
//! progression in phrases of eight beats ending on cadences, with root or
//! first-inversion basses, a mostly stepwise soprano and inner voices chosen
//! by smooth voice leading. [`rhythmic_corpus`] writes two- or three-voice
//! pieces on an eight-bin bar with held notes and rests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{encode_rhythm_grid, key_shift, transpose_by, Corpus, Mode, NoteEvent, Piece, ScorePiece};
use crate::symbol::{ChordSequence, Symbol};

const SOPRANO: (u8, u8) = (60, 79);
const ALTO: (u8, u8) = (55, 74);
const TENOR: (u8, u8) = (48, 67);
const BASS: (u8, u8) = (40, 57);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Degree {
    I,
    II,
    III,
    IV,
    V,
    V7,
    VI,
    VII,
    VofV,
    VofVI,
}

use Degree::*;

fn successors(d: Degree) -> &'static [(Degree, u32)] {
    match d {
        I => &[(IV, 3), (V, 3), (VI, 2), (II, 2), (III, 1), (I, 1), (VofV, 1), (VofVI, 1)],
        II => &[(V, 5), (V7, 2), (VII, 1)],
        III => &[(VI, 3), (IV, 2)],
        IV => &[(V, 3), (I, 2), (II, 2), (V7, 1), (VofV, 1)],
        VofV => &[(V, 4), (V7, 2)],
        VofVI => &[(VI, 5), (IV, 1)],
        V => &[(I, 5), (VI, 2), (V7, 1)],
        V7 => &[(I, 6), (VI, 1)],
        VI => &[(II, 3), (IV, 3), (V, 1)],
        VII => &[(I, 4)],
    }
}

/// Pitch classes of a degree in C, root first then third.
fn chord_tones(d: Degree, mode: Mode) -> &'static [u8] {
    match (mode, d) {
        (Mode::Major, I) => &[0, 4, 7],
        (Mode::Major, II) => &[2, 5, 9],
        (Mode::Major, III) => &[4, 7, 11],
        (Mode::Major, IV) => &[5, 9, 0],
        (Mode::Major, VI) => &[9, 0, 4],
        (Mode::Minor, I) => &[0, 3, 7],
        (Mode::Minor, II) => &[2, 5, 8],
        (Mode::Minor, III) => &[3, 7, 10],
        (Mode::Minor, IV) => &[5, 8, 0],
        (Mode::Minor, VI) => &[8, 0, 3],
        (_, V) => &[7, 11, 2],
        (_, V7) => &[7, 11, 2, 5],
        (_, VII) => &[11, 2, 5],
        (_, VofV) => &[2, 6, 9],
        (Mode::Major, VofVI) => &[4, 8, 11],
        (Mode::Minor, VofVI) => &[3, 7, 10],
    }
}

fn weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    items.choose_weighted(rng, |x| x.1).expect("non-empty positive weights").0
}

fn pitches_in(pcs: &[u8], range: (u8, u8)) -> Vec<u8> {
    (range.0..=range.1).filter(|p| pcs.contains(&(p % 12))).collect()
}

/// Eight-beat phrases; the last phrase closes on V-I.
fn progression(rng: &mut ChaCha8Rng, phrases: usize) -> Vec<Degree> {
    let mut out = Vec::with_capacity(phrases * 8);
    let mut cur = I;
    for ph in 0..phrases {
        let authentic = ph + 1 == phrases || rng.random_bool(0.6);
        for beat in 0..8 {
            cur = match (beat, authentic) {
                (0, _) if ph == 0 => I,
                (6, true) => weighted(rng, &[(V, 3.0), (V7, 1.0)]),
                (7, true) => I,
                (6, false) => weighted(rng, &[(IV, 1.0), (II, 1.0), (I, 1.0)]),
                (7, false) => V,
                _ => {
                    let next = successors(cur);
                    let items: Vec<(Degree, f64)> = next.iter().map(|&(d, w)| (d, w as f64)).collect();
                    weighted(rng, &items)
                }
            };
            out.push(cur);
        }
    }
    out
}

type Voicing = [u8; 4];

/// Softness of the voice-leading choice; higher gives more varied voicings.
const VOICING_TEMPERATURE: f64 = 1.0;

fn scale_of(mode: Mode) -> [u8; 7] {
    match mode {
        Mode::Major => [0, 2, 4, 5, 7, 9, 11],
        Mode::Minor => [0, 2, 3, 5, 7, 8, 11],
    }
}

/// Replace some notes by passing or neighbor tones, keeping the voices
/// in order.
fn embellish(rng: &mut ChaCha8Rng, rows: &mut [Vec<u8>], mode: Mode) {
    let scale = scale_of(mode);
    let in_scale = |p: u8| scale.contains(&(p % 12));
    let len = rows[0].len();
    for j in 1..len.saturating_sub(2) {
        for v in 0..4 {
            let (a, b, c) = (rows[v][j - 1], rows[v][j], rows[v][j + 1]);
            let candidate = if a.abs_diff(c) >= 3 && a.abs_diff(c) <= 4 && rng.random_bool(0.5) {
                // passing tone between a and c
                (a.min(c) + 1..a.max(c)).filter(|&p| in_scale(p) && p != b).collect::<Vec<_>>().choose(rng).copied()
            } else if v < 3 && a == b && b == c && rng.random_bool(0.35) {
                let up = (b + 1..=b + 2).find(|&p| in_scale(p));
                let down = (b - 2..b).rev().find(|&p| in_scale(p));
                if rng.random_bool(0.5) { up } else { down }
            } else {
                None
            };
            let Some(p) = candidate else { continue };
            let above = if v == 0 { u8::MAX } else { rows[v - 1][j] };
            let below = if v == 3 { 0 } else { rows[v + 1][j] };
            if p < above && p > below {
                rows[v][j] = p;
            }
        }
    }
}

fn voice_chord(rng: &mut ChaCha8Rng, d: Degree, mode: Mode, prev: Option<Voicing>, final_beat: bool) -> Voicing {
    let tones = chord_tones(d, mode);
    let bass_pc = if final_beat || rng.random_bool(0.75) { tones[0] } else { tones[1] };
    let bass_cands = pitches_in(&[bass_pc], BASS);
    let bass = match prev {
        Some(p) => {
            let items: Vec<(u8, f64)> =
                bass_cands.iter().map(|&b| (b, (-(b as f64 - p[3] as f64).abs() / 3.0).exp())).collect();
            weighted(rng, &items)
        }
        None => *bass_cands.choose(rng).expect("bass candidate"),
    };
    let sop_cands = pitches_in(tones, SOPRANO);
    let sop_pc_final = final_beat.then_some(tones[0]);
    let soprano = {
        let items: Vec<(u8, f64)> = sop_cands
            .iter()
            .filter(|&&s| s >= bass + 12 && sop_pc_final.is_none_or(|pc| s % 12 == pc))
            .map(|&s| {
                let w = match prev {
                    Some(p) => {
                        let step = (s as f64 - p[0] as f64).abs();
                        if step == 0.0 {
                            0.6
                        } else {
                            (-step / 2.0).exp()
                        }
                    }
                    None => 1.0,
                };
                (s, w)
            })
            .collect();
        weighted(rng, &items)
    };
    let altos = pitches_in(tones, ALTO);
    let tenors = pitches_in(tones, TENOR);
    let mut best: Vec<(Voicing, f64)> = Vec::new();
    // strict spacing first; relax it when nothing fits
    for strict in [true, false] {
        for &alto in &altos {
            for &tenor in &tenors {
                if !(bass <= tenor && tenor < alto && alto < soprano) {
                    continue;
                }
                if strict && (soprano - alto > 12 || alto - tenor > 12) {
                    continue;
                }
                let v = [soprano, alto, tenor, bass];
                best.push((v, (-voicing_cost(&v, tones, prev) / VOICING_TEMPERATURE).exp()));
            }
        }
        if !best.is_empty() {
            break;
        }
    }
    weighted(rng, &best)
}

fn voicing_cost(v: &Voicing, tones: &[u8], prev: Option<Voicing>) -> f64 {
    let mut cost = 0.0;
    if let Some(p) = prev {
        cost += (v[1] as f64 - p[1] as f64).abs() + (v[2] as f64 - p[2] as f64).abs();
        for a in 0..4 {
            for b in a + 1..4 {
                let was = (p[a] as i32 - p[b] as i32).rem_euclid(12);
                let now = (v[a] as i32 - v[b] as i32).rem_euclid(12);
                // parallel fifths and octaves
                if was == now && (now == 0 || now == 7) && p[a] != v[a] {
                    cost += 4.0;
                }
            }
        }
    }
    let present: Vec<u8> = v.iter().map(|p| p % 12).collect();
    for (k, pc) in tones.iter().enumerate() {
        // the fifth may be omitted
        if !present.contains(pc) {
            cost += if k == 2 { 1.5 } else { 6.0 };
        }
    }
    if present.iter().filter(|&&pc| pc == tones[1]).count() > 1 {
        cost += 3.0;
    }
    cost
}

/// One chorale-like piece of `phrases` eight-beat phrases, in C.
pub fn chorale_piece(rng: &mut ChaCha8Rng, id: String, mode: Mode, phrases: usize) -> Piece {
    let prog = progression(rng, phrases);
    let mut rows: Vec<Vec<u8>> = vec![Vec::with_capacity(prog.len()); 4];
    let mut prev = None;
    for (j, &d) in prog.iter().enumerate() {
        let v = voice_chord(rng, d, mode, prev, j + 1 == prog.len());
        for (row, p) in rows.iter_mut().zip(v) {
            row.push(p);
        }
        prev = Some(v);
    }
    embellish(rng, &mut rows, mode);
    let grid = rows.into_iter().map(|r| r.into_iter().map(Symbol::Pitch).collect()).collect();
    Piece { id, mode, original_key: 0, beats_per_bar: Some(4), grid: ChordSequence::new(grid).expect("rectangular") }
}

/// `pieces` chorale-like pieces of 4 to 6 phrases, all in C of `mode`.
pub fn chorale_corpus(seed: u64, pieces: usize, mode: Mode) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = (0..pieces)
        .map(|k| {
            let phrases = rng.random_range(4..=6);
            chorale_piece(&mut rng, format!("chorale-{}-{k:03}", mode.as_str()), mode, phrases)
        })
        .collect();
    Corpus::new(4, pieces).expect("fixture pieces are valid")
}

/// Like [`chorale_corpus`] but each piece is moved to a random key, so that
/// normalizing to C recovers [`chorale_corpus`] exactly.
pub fn chorale_corpus_in_keys(seed: u64, pieces: usize, mode: Mode) -> Corpus {
    let base = chorale_corpus(seed, pieces, mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7973);
    let moved = base
        .into_pieces()
        .into_iter()
        .map(|p| {
            let key = rng.random_range(0..12u8);
            let mut q = transpose_by(&p, -key_shift(key)).expect("transposition stays in MIDI range");
            q.original_key = key;
            q
        })
        .collect();
    Corpus::new(4, moved).expect("fixture pieces are valid")
}

const BAR: u32 = 8;

const BAR_PATTERNS: &[(&[u32], f64)] = &[
    (&[8], 1.0),
    (&[4, 4], 3.0),
    (&[2, 2, 4], 2.0),
    (&[4, 2, 2], 2.0),
    (&[2, 2, 2, 2], 1.5),
    (&[6, 2], 1.5),
    (&[3, 1, 4], 1.0),
    (&[4, 1, 1, 2], 0.5),
];

/// Dorian-like scale degrees used by [`rhythmic_corpus`].
const MODAL_SCALE: [u8; 7] = [0, 2, 3, 5, 7, 9, 10];

/// Two- or three-voice pieces on an eight-bin bar: mostly stepwise lines
/// with notes of one to eight bins, occasional rests, and a final long note.
pub fn rhythmic_corpus(seed: u64, pieces: usize, voices: usize) -> Corpus {
    assert!((1..=4).contains(&voices), "1 to 4 voices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [72u8, 65, 58, 50];
    let mut out = Vec::with_capacity(pieces);
    for k in 0..pieces {
        let bars: u32 = rng.random_range(6..=10);
        let mut events = Vec::new();
        for (v, &center) in centers.iter().enumerate().take(voices) {
            let scale: Vec<u8> =
                (center - 9..=center + 9).filter(|p| MODAL_SCALE.contains(&((p + 12 - 2) % 12))).collect();
            let mut idx = scale.len() / 2;
            // lower voices enter late sometimes
            let first_bar = if v > 0 && rng.random_bool(0.3) { 1 } else { 0 };
            for bar in first_bar..bars {
                let pattern: &[u32] = if bar + 1 == bars {
                    &[8]
                } else {
                    let items: Vec<(&[u32], f64)> = BAR_PATTERNS.to_vec();
                    weighted(&mut rng, &items)
                };
                let mut t = bar * BAR;
                for &dur in pattern {
                    if bar + 1 != bars && rng.random_bool(0.06) {
                        // rest for this slot
                        t += dur;
                        continue;
                    }
                    let step: i32 = *[-2, -1, -1, 0, 1, 1, 2].choose(&mut rng).expect("steps");
                    idx = (idx as i32 + step).clamp(0, scale.len() as i32 - 1) as usize;
                    events.push(NoteEvent { voice: v, onset: t, duration: dur, pitch: scale[idx] });
                    t += dur;
                }
            }
        }
        let score = ScorePiece {
            id: format!("motet-{k:03}"),
            mode: Mode::Minor,
            original_key: 0,
            beats_per_bar: Some(BAR),
            voices,
            events,
        };
        out.push(encode_rhythm_grid(&score, BAR, 1).expect("fixture events are on the grid"));
    }
    Corpus::new(voices, out).expect("fixture pieces are valid")
}

/// Deterministic C-major melody for harmonization examples: the opening of
/// a familiar stepwise tune.
pub fn stepwise_melody() -> Vec<Symbol> {
    [64, 64, 65, 67, 67, 65, 64, 62, 60, 60, 62, 64, 64, 62, 62, 62, 64, 64, 65, 67, 67, 65, 64, 62, 60, 60, 62, 64, 62, 60, 60, 60]
        .into_iter()
        .map(|p| Symbol::Pitch(p + 12))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize;

    #[test]
    fn chorales_are_deterministic_and_in_range() {
        let a = chorale_corpus(1, 10, Mode::Major);
        assert_eq!(a, chorale_corpus(1, 10, Mode::Major));
        assert_ne!(a, chorale_corpus(2, 10, Mode::Major));
        for p in a.pieces() {
            assert!(p.grid.len() >= 32);
            for j in 0..p.grid.len() {
                let c = p.grid.column(j);
                let ps: Vec<u8> = c.iter().map(|s| if let Symbol::Pitch(x) = s { *x } else { 0 }).collect();
                assert!(ps[0] > ps[1] && ps[1] > ps[2] && ps[2] >= ps[3], "{ps:?}");
            }
            // final chord is a root-position tonic with the tonic on top
            let last = p.grid.column(p.grid.len() - 1);
            assert_eq!(last[0], Symbol::Pitch(last[0].code() as u8 / 12 * 12));
            assert_eq!(last[3].code() % 12, 0);
        }
    }

    #[test]
    fn keyed_chorales_normalize_back() {
        let plain = chorale_corpus(3, 6, Mode::Minor);
        let keyed = chorale_corpus_in_keys(3, 6, Mode::Minor);
        assert_ne!(plain, keyed);
        assert_eq!(normalize(&keyed).unwrap(), plain);
    }

    #[test]
    fn rhythmic_pieces_fill_whole_bars() {
        let c = rhythmic_corpus(4, 8, 3);
        for p in c.pieces() {
            assert_eq!(p.grid.len() % 8, 0);
            for v in 0..3 {
                // a hold always continues a note or another hold
                let row = p.grid.row(v);
                for j in 1..row.len() {
                    if row[j] == Symbol::Hold {
                        assert_ne!(row[j - 1], Symbol::Rest);
                    }
                }
            }
        }
        let holds = c.sequences().flat_map(|s| s.row(0).to_vec()).filter(|s| *s == Symbol::Hold).count();
        assert!(holds > 0);
    }

    #[test]
    fn melody_is_in_c() {
        let m = stepwise_melody();
        assert!(m.iter().all(|s| matches!(s, Symbol::Pitch(p) if [0, 2, 4, 5, 7, 9, 11].contains(&(p % 12)))));
    }
}
