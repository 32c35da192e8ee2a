use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::symbol::{ChordSequence, Symbol, SYMBOL_CODES};

const NO_INDEX: u16 = u16::MAX;

/// Position-dependent local fields over a repeating metrical cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rhythm {
    pub bins_per_cycle: usize,
}

/// A block of pair parameters for one canonical (first voice, second voice,
/// offset) triple. Entry `(a, b)` lives at `base + a * cols + b`, with `a`
/// and `b` alphabet indices of the first and second voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub first: usize,
    pub second: usize,
    pub offset: usize,
    pub base: usize,
    pub rows: usize,
    pub cols: usize,
}

/// A pair term seen from one cell: the neighbor sits in voice `other`,
/// `delta` columns away, and the parameter for (center `c`, neighbor `b`)
/// is at `base + c * center_mul + b * neighbor_mul`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub other: usize,
    pub delta: isize,
    pub base: usize,
    pub center_mul: usize,
    pub neighbor_mul: usize,
}

/// Shape of the graphical model: voices, scopes, alphabets, and the dense
/// parameter layout derived from them.
#[derive(Debug, Clone)]
pub struct Topology {
    voices: usize,
    scope: usize,
    cross_scope: usize,
    alphabets: Vec<Vec<Symbol>>,
    rhythm: Option<Rhythm>,
    lookup: Vec<Vec<u16>>,
    local_base: Vec<usize>,
    blocks: Vec<Block>,
    block_of: HashMap<(usize, usize, usize), usize>,
    couplings: Vec<Vec<Coupling>>,
    dim: usize,
}

impl PartialEq for Topology {
    fn eq(&self, o: &Self) -> bool {
        self.voices == o.voices
            && self.scope == o.scope
            && self.cross_scope == o.cross_scope
            && self.alphabets == o.alphabets
            && self.rhythm == o.rhythm
    }
}

impl Topology {
    /// `scope` is the horizontal scope K, `cross_scope` the cross-voice
    /// scope L. Alphabets are sorted and de-duplicated.
    pub fn new(
        scope: usize,
        cross_scope: usize,
        alphabets: Vec<Vec<Symbol>>,
        rhythm: Option<Rhythm>,
    ) -> Result<Self> {
        let voices = alphabets.len();
        if voices == 0 {
            return Err(Error::Validation("topology needs at least one voice".into()));
        }
        if cross_scope > scope {
            return Err(Error::Validation(format!(
                "cross-voice scope L = {cross_scope} exceeds scope K = {scope}"
            )));
        }
        if let Some(r) = rhythm {
            if r.bins_per_cycle == 0 {
                return Err(Error::Validation("bins_per_cycle must be positive".into()));
            }
        }
        let mut alphabets = alphabets;
        for (i, a) in alphabets.iter_mut().enumerate() {
            a.sort();
            a.dedup();
            if a.is_empty() {
                return Err(Error::Validation(format!("alphabet of voice {i} is empty")));
            }
        }
        let lookup = alphabets
            .iter()
            .map(|a| {
                let mut t = vec![NO_INDEX; SYMBOL_CODES];
                for (k, s) in a.iter().enumerate() {
                    t[s.code()] = k as u16;
                }
                t
            })
            .collect();

        let positions = rhythm.map_or(1, |r| r.bins_per_cycle);
        let mut dim = 0;
        let mut local_base = Vec::with_capacity(voices);
        for a in &alphabets {
            local_base.push(dim);
            dim += positions * a.len();
        }
        let mut blocks = Vec::new();
        let mut block_of = HashMap::new();
        for offset in 0..=scope {
            for first in 0..voices {
                for second in 0..voices {
                    let keep = if first == second {
                        offset > 0
                    } else if offset == 0 {
                        first < second
                    } else {
                        offset <= cross_scope
                    };
                    if !keep {
                        continue;
                    }
                    let (rows, cols) = (alphabets[first].len(), alphabets[second].len());
                    block_of.insert((first, second, offset), blocks.len());
                    blocks.push(Block { first, second, offset, base: dim, rows, cols });
                    dim += rows * cols;
                }
            }
        }

        let mut couplings = vec![Vec::new(); voices];
        for (center, list) in couplings.iter_mut().enumerate() {
            for other in 0..voices {
                let reach = if other == center { scope } else { cross_scope } as isize;
                for delta in -reach..=reach {
                    if other == center && delta == 0 {
                        continue;
                    }
                    let center_first = delta > 0 || (delta == 0 && center < other);
                    let (first, second) = if center_first { (center, other) } else { (other, center) };
                    let b = blocks[block_of[&(first, second, delta.unsigned_abs())]];
                    let (center_mul, neighbor_mul) = if center_first { (b.cols, 1) } else { (1, b.cols) };
                    list.push(Coupling { other, delta, base: b.base, center_mul, neighbor_mul });
                }
            }
        }

        Ok(Self {
            voices,
            scope,
            cross_scope,
            alphabets,
            rhythm,
            lookup,
            local_base,
            blocks,
            block_of,
            couplings,
            dim,
        })
    }

    pub fn voices(&self) -> usize {
        self.voices
    }

    /// Horizontal scope K.
    pub fn scope(&self) -> usize {
        self.scope
    }

    /// Cross-voice scope L.
    pub fn cross_scope(&self) -> usize {
        self.cross_scope
    }

    pub fn alphabets(&self) -> &[Vec<Symbol>] {
        &self.alphabets
    }

    pub fn alphabet(&self, voice: usize) -> &[Symbol] {
        &self.alphabets[voice]
    }

    pub fn rhythm(&self) -> Option<Rhythm> {
        self.rhythm
    }

    /// Number of local-field copies per symbol (1 without rhythm).
    pub fn positions(&self) -> usize {
        self.rhythm.map_or(1, |r| r.bins_per_cycle)
    }

    pub fn position_of(&self, col: usize) -> usize {
        col % self.positions()
    }

    /// Mean alphabet size |A|.
    pub fn mean_alphabet(&self) -> f64 {
        self.alphabets.iter().map(Vec::len).sum::<usize>() as f64 / self.voices as f64
    }

    /// Total number of parameters in the dense layout.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, first: usize, second: usize, offset: usize) -> Option<&Block> {
        self.block_of.get(&(first, second, offset)).map(|&b| &self.blocks[b])
    }

    pub fn couplings(&self, voice: usize) -> &[Coupling] {
        &self.couplings[voice]
    }

    pub fn index_of(&self, voice: usize, s: Symbol) -> Option<u16> {
        let k = self.lookup[voice][s.code()];
        (k != NO_INDEX).then_some(k)
    }

    /// Dense offset of the local field for `(voice, symbol index, position)`.
    #[inline]
    pub fn local_offset(&self, voice: usize, position: usize, sym: usize) -> usize {
        self.local_base[voice] + position * self.alphabets[voice].len() + sym
    }

    /// Is dense offset `k` a local field?
    pub fn is_local(&self, k: usize) -> bool {
        self.blocks.first().map_or(true, |b| k < b.base)
    }

    pub fn encode(&self, seq: &ChordSequence) -> Result<EncodedSeq> {
        if seq.voices() != self.voices {
            return Err(Error::Shape(format!(
                "sequence has {} voices, model has {}",
                seq.voices(),
                self.voices
            )));
        }
        let len = seq.len();
        let mut cells = Vec::with_capacity(self.voices * len);
        for i in 0..self.voices {
            for &s in seq.row(i) {
                let k = self.index_of(i, s).ok_or_else(|| {
                    Error::Alphabet(format!("symbol {s} is not in the alphabet of voice {i}"))
                })?;
                cells.push(k);
            }
        }
        Ok(EncodedSeq { voices: self.voices, len, cells })
    }

    pub fn decode(&self, enc: &EncodedSeq) -> ChordSequence {
        let rows = (0..enc.voices)
            .map(|i| enc.row(i).iter().map(|&k| self.alphabets[i][k as usize]).collect())
            .collect();
        ChordSequence::new(rows).expect("encoded sequences are rectangular")
    }
}

/// A sequence as per-voice alphabet indices, voice-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedSeq {
    pub voices: usize,
    pub len: usize,
    pub cells: Vec<u16>,
}

impl EncodedSeq {
    #[inline]
    pub fn get(&self, voice: usize, col: usize) -> u16 {
        self.cells[voice * self.len + col]
    }

    #[inline]
    pub fn set(&mut self, voice: usize, col: usize, v: u16) {
        self.cells[voice * self.len + col] = v;
    }

    pub fn row(&self, voice: usize) -> &[u16] {
        &self.cells[voice * self.len..(voice + 1) * self.len]
    }
}
