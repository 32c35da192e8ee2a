//! Feature counts, energy and single-cell conditionals.

use std::collections::BTreeMap;

use super::feature::{FeatureIndex, ParamKey};
use super::topology::{EncodedSeq, Topology};
use super::Model;
use crate::error::Result;
use crate::symbol::{ChordSequence, Symbol};

/// Occurrence counts of every canonical feature present in `seq`.
/// Local-field counts are symbol occurrence counts (summed over metrical
/// positions for rhythm topologies).
pub fn count_features(seq: &ChordSequence, topology: &Topology) -> Result<BTreeMap<FeatureIndex, u64>> {
    let enc = topology.encode(seq)?;
    let mut out = BTreeMap::new();
    for (k, c) in dense_counts(&enc, topology).into_iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let f = match topology.key_at(k) {
            ParamKey::Feature(f) => f,
            ParamKey::Position { voice, symbol, .. } => FeatureIndex::local(voice, symbol),
        };
        *out.entry(f).or_insert(0) += c as u64;
    }
    Ok(out)
}

/// Counts of position-dependent local fields `(voice, symbol, position)`.
pub fn count_position_fields(seq: &ChordSequence, topology: &Topology) -> Result<BTreeMap<(usize, Symbol, usize), u64>> {
    let enc = topology.encode(seq)?;
    let mut out = BTreeMap::new();
    for i in 0..enc.voices {
        for (col, &s) in enc.row(i).iter().enumerate() {
            let key = (i, topology.alphabet(i)[s as usize], topology.position_of(col));
            *out.entry(key).or_insert(0) += 1;
        }
    }
    Ok(out)
}

/// Feature counts in the dense parameter layout.
pub fn dense_counts(enc: &EncodedSeq, topology: &Topology) -> Vec<f64> {
    let mut counts = vec![0.0; topology.dim()];
    add_counts(enc, topology, &mut counts, 1.0);
    counts
}

pub(crate) fn add_counts(enc: &EncodedSeq, topology: &Topology, counts: &mut [f64], weight: f64) {
    for i in 0..enc.voices {
        for (col, &s) in enc.row(i).iter().enumerate() {
            counts[topology.local_offset(i, topology.position_of(col), s as usize)] += weight;
        }
    }
    for b in topology.blocks() {
        if b.offset >= enc.len {
            continue;
        }
        let first = enc.row(b.first);
        let second = enc.row(b.second);
        for m in 0..enc.len - b.offset {
            counts[b.base + first[m] as usize * b.cols + second[m + b.offset] as usize] += weight;
        }
    }
}

/// `E(s) = -Σ θ f(s)` computed directly on an encoded sequence.
pub fn energy_encoded(enc: &EncodedSeq, model: &Model) -> f64 {
    let t = &model.topology;
    let theta = &model.theta;
    let mut sum = 0.0;
    for i in 0..enc.voices {
        for (col, &s) in enc.row(i).iter().enumerate() {
            sum += theta[t.local_offset(i, t.position_of(col), s as usize)];
        }
    }
    for b in t.blocks() {
        if b.offset >= enc.len {
            continue;
        }
        let first = enc.row(b.first);
        let second = enc.row(b.second);
        for m in 0..enc.len - b.offset {
            sum += theta[b.base + first[m] as usize * b.cols + second[m + b.offset] as usize];
        }
    }
    -sum
}

pub fn energy(seq: &ChordSequence, model: &Model) -> Result<f64> {
    Ok(energy_encoded(&model.topology.encode(seq)?, model))
}

/// Unnormalized log-probabilities `-E(s with s_ij := c) + const` for every
/// symbol `c` of voice `i`, using only the cell's neighborhood.
pub fn conditional_scores(model: &Model, enc: &EncodedSeq, voice: usize, col: usize, out: &mut [f64]) {
    let t = &model.topology;
    let theta = &model.theta;
    let pos = t.position_of(col);
    for (c, o) in out.iter_mut().enumerate() {
        *o = theta[t.local_offset(voice, pos, c)];
    }
    for cp in t.couplings(voice) {
        let Some(nc) = col.checked_add_signed(cp.delta).filter(|&x| x < enc.len) else {
            continue;
        };
        let base = cp.base + enc.get(cp.other, nc) as usize * cp.neighbor_mul;
        for (c, o) in out.iter_mut().enumerate() {
            *o += theta[base + c * cp.center_mul];
        }
    }
}

/// In-place softmax; returns the log normalizer.
pub fn softmax(scores: &mut [f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        z += *s;
    }
    for s in scores.iter_mut() {
        *s /= z;
    }
    max + z.ln()
}

/// `P(s_ij = c | rest of s)` for every `c` in the voice alphabet.
pub fn conditional_distribution(seq: &ChordSequence, voice: usize, col: usize, model: &Model) -> Result<Vec<f64>> {
    let enc = model.topology.encode(seq)?;
    Ok(conditional_encoded(model, &enc, voice, col))
}

pub fn conditional_encoded(model: &Model, enc: &EncodedSeq, voice: usize, col: usize) -> Vec<f64> {
    let mut out = vec![0.0; model.topology.alphabet(voice).len()];
    conditional_scores(model, enc, voice, col, &mut out);
    softmax(&mut out);
    out
}

/// `E(s) - E(s')` where `s'` replaces symbol `old` by `new` at `(voice, col)`.
/// `neighbor(v, c)` yields the alphabet index of the cell `(v, c)` in this
/// model's frame, or `None` to drop that term. Touches O(nK) parameters.
#[inline]
pub fn score_delta(
    model: &Model,
    voice: usize,
    col: usize,
    len: usize,
    old: u16,
    new: u16,
    neighbor: impl Fn(usize, usize) -> Option<u16>,
) -> f64 {
    if old == new {
        return 0.0;
    }
    let t = &model.topology;
    let theta = &model.theta;
    let pos = t.position_of(col);
    let (old, new) = (old as usize, new as usize);
    let mut d = theta[t.local_offset(voice, pos, new)] - theta[t.local_offset(voice, pos, old)];
    for cp in t.couplings(voice) {
        let Some(nc) = col.checked_add_signed(cp.delta).filter(|&x| x < len) else {
            continue;
        };
        let Some(b) = neighbor(cp.other, nc) else {
            continue;
        };
        let base = cp.base + b as usize * cp.neighbor_mul;
        d += theta[base + new * cp.center_mul] - theta[base + old * cp.center_mul];
    }
    d
}
