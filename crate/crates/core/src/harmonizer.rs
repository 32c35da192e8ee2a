//! Melody reharmonization with per-beat keys.
//!
//! Models are trained in C. A melody is analyzed into a per-beat key track;
//! each beat is sampled in its own key frame, where cell `(i, j)` holds a
//! symbol of the model alphabet and the absolute pitch is that symbol
//! shifted back out of the frame. A move at beat `j` is scored with the
//! model for `j`'s mode after moving the neighborhood into `j`'s frame;
//! neighbors that leave the alphabet there are dropped from the ratio.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Mode;
use crate::error::{Error, Result};
use crate::model::{load_model, score_delta, EncodedSeq, Model};
use crate::sampler::{run_with, ConstraintSet, SamplerConfig, Target, RNG_ALGORITHM};
use crate::symbol::{ChordSequence, Symbol};

/// Krumhansl-Kessler major key profile, tonic first.
pub const MAJOR_PROFILE: [f64; 12] = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
/// Krumhansl-Kessler minor key profile, tonic first.
pub const MINOR_PROFILE: [f64; 12] = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

/// Analysis window, in beats, centered on the beat as `[j - 4, j + 4)`.
pub const KEY_WINDOW: usize = 8;
/// Consecutive windows a challenger must win before the key changes.
pub const KEY_HYSTERESIS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key {
    /// Tonic pitch class, 0 = C.
    pub tonic: u8,
    pub mode: Mode,
}

impl Key {
    pub const C_MAJOR: Key = Key { tonic: 0, mode: Mode::Major };

    pub fn new(tonic: u8, mode: Mode) -> Self {
        Self { tonic: tonic % 12, mode }
    }

    pub fn transposed(self, semitones: i32) -> Self {
        Self::new((self.tonic as i32 + semitones).rem_euclid(12) as u8, self.mode)
    }

    /// The 24 keys: major tonics 0..12, then minor.
    pub fn all() -> impl Iterator<Item = Key> {
        [Mode::Major, Mode::Minor].into_iter().flat_map(|m| (0..12).map(move |t| Key::new(t, m)))
    }
}

/// Per-beat key labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyTrack(pub Vec<Key>);

impl KeyTrack {
    pub fn constant(key: Key, len: usize) -> Self {
        Self(vec![key; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn transposed(&self, semitones: i32) -> Self {
        Self(self.0.iter().map(|k| k.transposed(semitones)).collect())
    }

    /// `[[beat, keypc, mode], ...]`, one entry per beat.
    pub fn to_json(&self) -> String {
        let rows: Vec<(usize, u8, Mode)> = self.0.iter().enumerate().map(|(j, k)| (j, k.tonic, k.mode)).collect();
        serde_json::to_string(&rows).expect("key track serializes")
    }

    /// Accepts one entry per beat, or change points starting at beat 0
    /// that are held until the next entry.
    pub fn parse(text: &str, len: usize) -> Result<Self> {
        let rows: Vec<(usize, u8, Mode)> = serde_json::from_str(text)?;
        if rows.first().map(|r| r.0) != Some(0) {
            return Err(Error::Validation("key track must start at beat 0".into()));
        }
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation("key track beats must increase".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.1 > 11 || r.0 >= len) {
            return Err(Error::Validation(format!("key track entry {r:?} is out of range")));
        }
        let mut out = Vec::with_capacity(len);
        for (idx, &(beat, pc, mode)) in rows.iter().enumerate() {
            let end = rows.get(idx + 1).map_or(len, |r| r.0);
            out.extend(std::iter::repeat_n(Key::new(pc, mode), end - beat));
        }
        Ok(Self(out))
    }

    pub fn load(path: &Path, len: usize) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, len)
    }
}

/// Pitch-class histogram of a melody slice; a hold extends the last pitch.
fn pitch_class_histogram(melody: &[Symbol], range: std::ops::Range<usize>) -> [f64; 12] {
    let mut h = [0.0; 12];
    let mut last = None;
    // a hold at the start of the window continues a pitch sounding before it
    for s in melody[..range.start].iter().rev() {
        match s {
            Symbol::Pitch(p) => {
                last = Some(*p);
                break;
            }
            Symbol::Rest => break,
            Symbol::Hold => {}
        }
    }
    for &s in &melody[range] {
        match s {
            Symbol::Pitch(p) => {
                last = Some(p);
                h[(p % 12) as usize] += 1.0;
            }
            Symbol::Hold => {
                if let Some(p) = last {
                    h[(p % 12) as usize] += 1.0;
                }
            }
            Symbol::Rest => last = None,
        }
    }
    h
}

fn pearson(x: &[f64; 12], y: impl Fn(usize) -> f64) -> Option<f64> {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = (0..12).map(&y).sum::<f64>() / 12.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (k, &xv) in x.iter().enumerate() {
        let (dx, dy) = (xv - mx, y(k) - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Correlation of a histogram with each of the 24 key profiles.
pub fn key_correlations(hist: &[f64; 12]) -> Option<Vec<(Key, f64)>> {
    Key::all()
        .map(|key| {
            let profile = match key.mode {
                Mode::Major => &MAJOR_PROFILE,
                Mode::Minor => &MINOR_PROFILE,
            };
            // sum in tonic-relative order so transposed inputs round identically
            let rotated: [f64; 12] = std::array::from_fn(|k| hist[(k + key.tonic as usize) % 12]);
            pearson(&rotated, |k| profile[k]).map(|r| (key, r))
        })
        .collect()
}

/// Best key for a histogram. Ties go to `incumbent`, then to the key nearest
/// it on the circle of fifths, then to the smallest upward interval from it,
/// so the choice commutes with transposition.
fn best_key(hist: &[f64; 12], incumbent: Option<Key>) -> Option<Key> {
    let corr = key_correlations(hist)?;
    let top = corr.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tied = corr.iter().filter(|c| c.1 == top).map(|c| c.0);
    match incumbent {
        None => tied.min(),
        Some(inc) => tied.min_by_key(|k| {
            let up = (k.tonic as usize + 12 - inc.tonic as usize) % 12;
            let fifths = (up * 7) % 12;
            (*k != inc, fifths.min(12 - fifths), up, k.mode != inc.mode)
        }),
    }
}

/// Sliding-window key analysis with hysteresis.
///
/// The track starts in the best key of the whole melody. A challenger
/// replaces the incumbent after winning `KEY_HYSTERESIS` consecutive
/// windows, and the change is dated back to the first of those windows.
pub fn detect_keys(melody: &[Symbol]) -> KeyTrack {
    let l = melody.len();
    let global = best_key(&pitch_class_histogram(melody, 0..l), None).unwrap_or(Key::C_MAJOR);
    let mut track = vec![global; l];
    let mut incumbent = global;
    let mut streak: Option<(Key, usize, usize)> = None;
    let half = KEY_WINDOW / 2;
    for j in 0..l {
        let range = j.saturating_sub(half)..(j + half).min(l);
        let winner = best_key(&pitch_class_histogram(melody, range), Some(incumbent)).unwrap_or(incumbent);
        if winner == incumbent {
            streak = None;
        } else {
            streak = match streak {
                Some((k, start, n)) if k == winner => Some((k, start, n + 1)),
                _ => Some((winner, j, 1)),
            };
            if let Some((k, start, n)) = streak {
                if n >= KEY_HYSTERESIS {
                    incumbent = k;
                    track[start..j].iter_mut().for_each(|t| *t = k);
                    streak = None;
                }
            }
        }
        track[j] = incumbent;
    }
    KeyTrack(track)
}

/// Models trained in C, one per mode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSet {
    pub major: Option<Model>,
    pub minor: Option<Model>,
}

impl ModelSet {
    pub fn single(mode: Mode, model: Model) -> Self {
        match mode {
            Mode::Major => Self { major: Some(model), minor: None },
            Mode::Minor => Self { major: None, minor: Some(model) },
        }
    }

    pub fn get(&self, mode: Mode) -> Result<&Model> {
        match mode {
            Mode::Major => self.major.as_ref(),
            Mode::Minor => self.minor.as_ref(),
        }
        .ok_or_else(|| Error::MissingModel(mode.as_str().into()))
    }

    /// Reads `major.json` and `minor.json` from a directory; either may be
    /// absent but not both.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Option<Model>> {
            let p = dir.join(name);
            if p.exists() {
                load_model(&p).map(Some)
            } else {
                Ok(None)
            }
        };
        let set = Self { major: read("major.json")?, minor: read("minor.json")? };
        if set.major.is_none() && set.minor.is_none() {
            return Err(Error::MissingModel(format!("major or minor in {}", dir.display())));
        }
        Ok(set)
    }
}

/// The per-beat glued target.
pub struct GluedTarget<'a> {
    models: Vec<&'a Model>,
    /// Semitones added to an absolute pitch to enter beat `j`'s frame.
    shifts: Vec<i32>,
    /// Beats share a frame iff their ids are equal.
    frames: Vec<usize>,
}

impl<'a> GluedTarget<'a> {
    pub fn new(models: &'a ModelSet, keys: &KeyTrack, shift_of: impl Fn(Key) -> i32) -> Result<Self> {
        let mut frame_keys: Vec<(Mode, i32)> = Vec::new();
        let mut out = Self { models: Vec::new(), shifts: Vec::new(), frames: Vec::new() };
        for &key in &keys.0 {
            let m = models.get(key.mode)?;
            let s = shift_of(key);
            let id = match frame_keys.iter().position(|&f| f == (key.mode, s)) {
                Some(id) => id,
                None => {
                    frame_keys.push((key.mode, s));
                    frame_keys.len() - 1
                }
            };
            out.models.push(m);
            out.shifts.push(s);
            out.frames.push(id);
        }
        let n = out.models.first().map(|m| m.topology.voices());
        if out.models.iter().any(|m| Some(m.topology.voices()) != n) {
            return Err(Error::Shape("models for different modes have different voice counts".into()));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn shift(&self, col: usize) -> i32 {
        self.shifts[col]
    }
}

impl Target for GluedTarget<'_> {
    fn voices(&self) -> usize {
        self.models[0].topology.voices()
    }

    fn domain_size(&self, voice: usize, col: usize) -> usize {
        self.models[col].topology.alphabet(voice).len()
    }

    fn encode_symbol(&self, voice: usize, col: usize, s: Symbol) -> Option<u16> {
        let t = s.transposed(self.shifts[col]).ok()?;
        self.models[col].topology.index_of(voice, t)
    }

    fn decode_symbol(&self, voice: usize, col: usize, k: u16) -> Symbol {
        let s = self.models[col].topology.alphabet(voice)[k as usize];
        s.transposed(-self.shifts[col]).expect("alphabet symbols decode in range")
    }

    fn log_ratio(&self, state: &EncodedSeq, voice: usize, col: usize, new: u16) -> f64 {
        let model = self.models[col];
        let frame = self.frames[col];
        let neighbor = |v: usize, c: usize| {
            let k = state.get(v, c);
            if self.frames[c] == frame {
                return Some(k);
            }
            let abs = self.decode_symbol(v, c, k);
            self.encode_symbol(v, col, abs)
        };
        score_delta(model, voice, col, state.len, state.get(voice, col), new, neighbor)
    }
}

/// Per-key shift into the C frame: `-tonic` up to whole octaves, choosing
/// the octave that puts the most of that key's melody beats inside the
/// melody voice's alphabet, then the one centering the melody best.
pub fn key_shifts(models: &ModelSet, melody: &[Symbol], voice: usize, keys: &KeyTrack) -> Result<Vec<(Key, i32)>> {
    let mut distinct: Vec<Key> = keys.0.clone();
    distinct.sort();
    distinct.dedup();
    let mut out = Vec::new();
    for key in distinct {
        let model = models.get(key.mode)?;
        if voice >= model.topology.voices() {
            return Err(Error::Shape(format!("melody voice {voice} but models have {} voices", model.topology.voices())));
        }
        let alphabet = model.topology.alphabet(voice);
        let pitches: Vec<f64> = alphabet
            .iter()
            .filter_map(|s| match s {
                Symbol::Pitch(p) => Some(*p as f64),
                _ => None,
            })
            .collect();
        let center = pitches.iter().sum::<f64>() / pitches.len().max(1) as f64;
        let notes: Vec<u8> = melody
            .iter()
            .zip(&keys.0)
            .filter(|(_, k)| **k == key)
            .filter_map(|(s, _)| match s {
                Symbol::Pitch(p) => Some(*p),
                _ => None,
            })
            .collect();
        let mean = notes.iter().map(|&p| p as f64).sum::<f64>() / notes.len().max(1) as f64;
        let best = (-3..=3)
            .map(|m| -(key.tonic as i32) + 12 * m)
            .map(|s| {
                let fit = notes
                    .iter()
                    .filter(|&&p| Symbol::pitch(p as i64 + s as i64).is_ok_and(|t| model.topology.index_of(voice, t).is_some()))
                    .count();
                let miss = if notes.is_empty() { 0.0 } else { (mean + s as f64 - center).abs() };
                (s, fit, miss)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.total_cmp(&a.2)))
            .expect("candidate shifts");
        out.push((key, best.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizationRequest {
    pub melody: Vec<Symbol>,
    /// Voice the melody is placed in.
    pub voice: usize,
    pub constraints: ConstraintSet,
    /// Analyzed from the melody when absent.
    pub keys: Option<KeyTrack>,
    pub sampler: SamplerConfig,
}

impl HarmonizationRequest {
    pub fn new(melody: Vec<Symbol>, sampler: SamplerConfig) -> Self {
        Self { melody, voice: 0, constraints: ConstraintSet::new(), keys: None, sampler }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonization {
    pub sequence: ChordSequence,
    pub keys: KeyTrack,
    pub shifts: Vec<(Key, i32)>,
    pub steps: u64,
    pub accepted: u64,
    pub seed: u64,
    pub rng: &'static str,
}

pub fn reharmonize(models: &ModelSet, request: &HarmonizationRequest) -> Result<Harmonization> {
    let melody = &request.melody;
    if melody.is_empty() {
        return Err(Error::Shape("melody is empty".into()));
    }
    let keys = match &request.keys {
        Some(k) if k.len() != melody.len() => {
            return Err(Error::Shape(format!("key track has {} beats, melody {}", k.len(), melody.len())));
        }
        Some(k) => k.clone(),
        None => detect_keys(melody),
    };
    let shifts = key_shifts(models, melody, request.voice, &keys)?;
    let shift_of = |k: Key| shifts.iter().find(|s| s.0 == k).map(|s| s.1).expect("every key has a shift");
    let target = GluedTarget::new(models, &keys, shift_of)?;
    let mut constraints = request.constraints.clone();
    constraints.pin_voice(request.voice, melody)?;
    for (j, &s) in melody.iter().enumerate() {
        if target.encode_symbol(request.voice, j, s).is_none() {
            return Err(Error::Alphabet(format!(
                "melody note {s} at beat {j} is outside the voice alphabet in key {} {}",
                keys.0[j].tonic,
                keys.0[j].mode.as_str()
            )));
        }
    }
    let run = run_with(&target, melody.len(), &constraints, &request.sampler)?;
    Ok(Harmonization {
        sequence: run.sequence,
        keys,
        shifts,
        steps: run.plan.total_steps,
        accepted: run.accepted,
        seed: run.seed,
        rng: RNG_ALGORITHM,
    })
}
