//! Grid cell symbols and the n×l chord sequence they fill.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// One cell of a voice: a MIDI pitch, or one of the two rhythm symbols.
///
/// The derived ordering puts pitches first (ascending), then `Rest`, then
/// `Hold`; alphabets are stored in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Pitch(u8),
    Rest,
    Hold,
}

/// Number of distinct symbol codes (128 pitches + rest + hold).
pub const SYMBOL_CODES: usize = 130;

impl Symbol {
    pub fn pitch(p: i64) -> Result<Symbol> {
        if (0..=127).contains(&p) {
            Ok(Symbol::Pitch(p as u8))
        } else {
            Err(Error::Range(format!("pitch {p} outside [0, 127]")))
        }
    }

    /// Dense code in `0..SYMBOL_CODES`.
    pub fn code(self) -> usize {
        match self {
            Symbol::Pitch(p) => p as usize,
            Symbol::Rest => 128,
            Symbol::Hold => 129,
        }
    }

    pub fn is_pitch(self) -> bool {
        matches!(self, Symbol::Pitch(_))
    }

    /// Shift a pitch by `semitones`; rhythm symbols are unchanged.
    pub fn transposed(self, semitones: i32) -> Result<Symbol> {
        match self {
            Symbol::Pitch(p) => Symbol::pitch(p as i64 + semitones as i64),
            other => Ok(other),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Pitch(p) => write!(f, "{p}"),
            Symbol::Rest => f.write_str("R"),
            Symbol::Hold => f.write_str("H"),
        }
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Symbol::Pitch(p) => s.serialize_u8(*p),
            Symbol::Rest => s.serialize_str("R"),
            Symbol::Hold => s.serialize_str("H"),
        }
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CellVisitor;

        impl<'de> Visitor<'de> for CellVisitor {
            type Value = Symbol;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer pitch 0-127, \"R\" or \"H\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Symbol, E> {
                if v <= 127 {
                    Ok(Symbol::Pitch(v as u8))
                } else {
                    Err(E::custom(format!("pitch {v} outside [0, 127]")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Symbol, E> {
                if (0..=127).contains(&v) {
                    Ok(Symbol::Pitch(v as u8))
                } else {
                    Err(E::custom(format!("pitch {v} outside [0, 127]")))
                }
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Symbol, E> {
                match v {
                    "R" => Ok(Symbol::Rest),
                    "H" => Ok(Symbol::Hold),
                    other => Err(E::custom(format!("unknown cell {other:?}"))),
                }
            }
        }

        d.deserialize_any(CellVisitor)
    }
}

/// An n×l grid of symbols; row `i` is voice `i` (soprano first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Symbol>>", into = "Vec<Vec<Symbol>>")]
pub struct ChordSequence {
    rows: Vec<Vec<Symbol>>,
}

impl ChordSequence {
    /// Build from rows, rejecting ragged or empty grids.
    pub fn new(rows: Vec<Vec<Symbol>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Shape("grid has no voices".into()));
        }
        let len = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
            return Err(Error::Shape(format!(
                "voice {i} has {} columns, voice 0 has {len}",
                r.len()
            )));
        }
        Ok(Self { rows })
    }

    pub fn voices(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, voice: usize, col: usize) -> Symbol {
        self.rows[voice][col]
    }

    pub fn set(&mut self, voice: usize, col: usize, s: Symbol) {
        self.rows[voice][col] = s;
    }

    pub fn row(&self, voice: usize) -> &[Symbol] {
        &self.rows[voice]
    }

    pub fn rows(&self) -> &[Vec<Symbol>] {
        &self.rows
    }

    pub fn column(&self, col: usize) -> Vec<Symbol> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    pub fn map_symbols(&self, mut f: impl FnMut(Symbol) -> Result<Symbol>) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&s| f(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }
}

impl TryFrom<Vec<Vec<Symbol>>> for ChordSequence {
    type Error = Error;

    fn try_from(rows: Vec<Vec<Symbol>>) -> Result<Self> {
        ChordSequence::new(rows)
    }
}

impl From<ChordSequence> for Vec<Vec<Symbol>> {
    fn from(s: ChordSequence) -> Self {
        s.rows
    }
}
