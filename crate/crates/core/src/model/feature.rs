use serde::{Deserialize, Serialize};

use super::topology::Topology;
use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// Key of one pairwise feature: symbol `a` in voice `i` precedes symbol `b`
/// in voice `j` by `k` columns. Local fields are `(a, a, i, i, 0)`.
///
/// Values built through [`canonicalize`] are always in canonical
/// orientation: `k > 0`, or `k == 0 && i < j`, or a local field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureIndex {
    pub a: Symbol,
    pub b: Symbol,
    pub i: usize,
    pub j: usize,
    pub k: i32,
}

impl FeatureIndex {
    pub fn local(voice: usize, s: Symbol) -> Self {
        FeatureIndex { a: s, b: s, i: voice, j: voice, k: 0 }
    }

    pub fn is_local(&self) -> bool {
        self.k == 0 && self.i == self.j
    }
}

/// Pick the representative of `{(a,b,i,j,k), (b,a,j,i,-k)}`.
pub fn canonicalize(topology: &Topology, a: Symbol, b: Symbol, i: usize, j: usize, k: i32) -> Result<FeatureIndex> {
    let n = topology.voices();
    if i >= n || j >= n {
        return Err(Error::Validation(format!("voice index out of range (n = {n})")));
    }
    let reach = k.unsigned_abs() as usize;
    if reach > topology.scope() {
        return Err(Error::Scope(format!("|k| = {reach} exceeds scope K = {}", topology.scope())));
    }
    if i != j && reach > topology.cross_scope() {
        return Err(Error::Scope(format!(
            "cross-voice |k| = {reach} exceeds L = {}",
            topology.cross_scope()
        )));
    }
    if topology.index_of(i, a).is_none() || topology.index_of(j, b).is_none() {
        return Err(Error::Alphabet(format!("({a}, {b}) not in the alphabets of voices ({i}, {j})")));
    }
    if k == 0 && i == j {
        if a != b {
            return Err(Error::ZeroFeature { a: a.to_string(), b: b.to_string(), i });
        }
        return Ok(FeatureIndex::local(i, a));
    }
    if k < 0 || (k == 0 && i > j) {
        Ok(FeatureIndex { a: b, b: a, i: j, j: i, k: -k })
    } else {
        Ok(FeatureIndex { a, b, i, j, k })
    }
}

/// Key of any parameter in the dense layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Feature(FeatureIndex),
    /// Position-dependent local field (rhythm extension).
    Position { voice: usize, symbol: Symbol, position: usize },
}

impl Topology {
    /// Dense offset of a canonical feature. For rhythm topologies local
    /// fields are position-dependent and have no plain offset.
    pub fn feature_offset(&self, f: &FeatureIndex) -> Option<usize> {
        let a = self.index_of(f.i, f.a)? as usize;
        let b = self.index_of(f.j, f.b)? as usize;
        if f.is_local() {
            if a != b || self.rhythm().is_some() {
                return None;
            }
            return Some(self.local_offset(f.i, 0, a));
        }
        if f.k < 0 {
            return None;
        }
        let block = self.block(f.i, f.j, f.k as usize)?;
        Some(block.base + a * block.cols + b)
    }

    pub fn position_offset(&self, voice: usize, symbol: Symbol, position: usize) -> Option<usize> {
        self.rhythm()?;
        if voice >= self.voices() || position >= self.positions() {
            return None;
        }
        let a = self.index_of(voice, symbol)? as usize;
        Some(self.local_offset(voice, position, a))
    }

    /// Key of the parameter at dense offset `k`.
    pub fn key_at(&self, k: usize) -> ParamKey {
        assert!(k < self.dim(), "offset {k} outside layout");
        if self.is_local(k) {
            let voice = (0..self.voices())
                .rev()
                .find(|&v| self.local_offset(v, 0, 0) <= k)
                .expect("voice 0 starts the layout");
            let rel = k - self.local_offset(voice, 0, 0);
            let size = self.alphabet(voice).len();
            let symbol = self.alphabet(voice)[rel % size];
            return match self.rhythm() {
                Some(_) => ParamKey::Position { voice, symbol, position: rel / size },
                None => ParamKey::Feature(FeatureIndex::local(voice, symbol)),
            };
        }
        let b = self
            .blocks()
            .iter()
            .rev()
            .find(|b| b.base <= k)
            .expect("offset lies in a block");
        let rel = k - b.base;
        ParamKey::Feature(FeatureIndex {
            a: self.alphabet(b.first)[rel / b.cols],
            b: self.alphabet(b.second)[rel % b.cols],
            i: b.first,
            j: b.second,
            k: b.offset as i32,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn p(x: u8) -> Symbol {
        Symbol::Pitch(x)
    }

    fn topo(n: usize, k: usize, l: usize, alpha: &[u8]) -> Topology {
        let a: Vec<Symbol> = alpha.iter().map(|&x| p(x)).collect();
        Topology::new(k, l, vec![a; n], None).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let t = topo(3, 2, 1, &[55, 60, 62]);
        let f = canonicalize(&t, p(60), p(62), 1, 1, 1).unwrap();
        assert_eq!(f, FeatureIndex { a: p(60), b: p(62), i: 1, j: 1, k: 1 });
        assert_eq!(canonicalize(&t, p(62), p(60), 1, 1, -1).unwrap(), f);
        assert_eq!(
            canonicalize(&t, p(60), p(55), 2, 1, 0).unwrap(),
            FeatureIndex { a: p(55), b: p(60), i: 1, j: 2, k: 0 }
        );
    }

    #[test]
    fn canonical_errors() {
        let t = topo(2, 2, 1, &[60, 62]);
        assert!(matches!(canonicalize(&t, p(60), p(62), 0, 0, 3), Err(Error::Scope(_))));
        assert!(matches!(canonicalize(&t, p(60), p(62), 0, 1, 2), Err(Error::Scope(_))));
        assert!(matches!(canonicalize(&t, p(60), p(62), 0, 0, 0), Err(Error::ZeroFeature { .. })));
        assert!(matches!(canonicalize(&t, p(61), p(62), 0, 0, 1), Err(Error::Alphabet(_))));
    }

    #[test]
    fn every_offset_round_trips_through_its_key() {
        let t = topo(3, 2, 1, &[55, 60, 62]);
        for k in 0..t.dim() {
            match t.key_at(k) {
                ParamKey::Feature(f) => assert_eq!(t.feature_offset(&f), Some(k)),
                ParamKey::Position { .. } => unreachable!(),
            }
        }
        let r = Topology::new(1, 0, vec![vec![p(60), Symbol::Rest, Symbol::Hold]], Some(super::super::Rhythm { bins_per_cycle: 4 })).unwrap();
        for k in 0..r.dim() {
            match r.key_at(k) {
                ParamKey::Feature(f) => assert_eq!(r.feature_offset(&f), Some(k)),
                ParamKey::Position { voice, symbol, position } => {
                    assert_eq!(r.position_offset(voice, symbol, position), Some(k))
                }
            }
        }
    }

    /// Enumeration oracle: canonicalize every raw (a,b,i,j,k) and count the
    /// distinct results.
    fn enumerate_family(t: &Topology) -> usize {
        let mut set = BTreeSet::new();
        let k_max = t.scope() as i32;
        for i in 0..t.voices() {
            for j in 0..t.voices() {
                for k in -k_max..=k_max {
                    for &a in t.alphabet(i) {
                        for &b in t.alphabet(j) {
                            if let Ok(f) = canonicalize(t, a, b, i, j, k) {
                                set.insert(f);
                            }
                        }
                    }
                }
            }
        }
        set.len()
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        for (n, k, l, size) in [(1, 1, 0, 3), (2, 1, 1, 3), (3, 2, 1, 4), (4, 4, 2, 3), (4, 3, 3, 2), (2, 0, 0, 5)] {
            let alpha: Vec<u8> = (0..size as u8).map(|x| 60 + x).collect();
            let t = topo(n, k, l, &alpha);
            let a2 = size * size;
            // local + horizontal + vertical + diagonal (both orientations per voice pair)
            let closed = n * size + n * k * a2 + n * (n - 1) / 2 * a2 + n * (n - 1) * l * a2;
            assert_eq!(enumerate_family(&t), closed, "n={n} K={k} L={l}");
            assert_eq!(t.dim(), closed);
        }
    }

    #[test]
    fn full_family_is_half_the_two_orientation_count() {
        // With L = K each unordered pair of (offset, voice) orientations is
        // stored once, so the two-orientation count n²(2K+1)|A|² is twice
        // the pair count plus the excluded (k=0, i=j, a≠b) entries.
        let (n, k, size) = (3usize, 2usize, 4usize);
        let alpha: Vec<u8> = (0..size as u8).collect();
        let t = topo(n, k, k, &alpha);
        let pairs = t.dim() - n * size;
        let zero_features = n * (size * size - size);
        assert_eq!(2 * pairs + n * size + zero_features, n * n * (2 * k + 1) * size * size);
    }
}
