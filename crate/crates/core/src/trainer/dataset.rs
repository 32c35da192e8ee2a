//! Per-voice pseudo-likelihood datasets and their preprocessed form.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::Topology;
use crate::symbol::Symbol;

/// One center cell with its full K-window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub voice: usize,
    pub piece: usize,
    /// Column of the center within its piece.
    pub position: usize,
    pub center: Symbol,
    /// Neighbor symbols in the order of `Topology::couplings(voice)`.
    pub neighborhood: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoiceDataset {
    pub voice: usize,
    pub samples: Vec<TrainingSample>,
}

impl VoiceDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Interior columns of a piece of length `len`: those whose whole K-window
/// lies inside the piece.
pub fn interior_columns(len: usize, scope: usize) -> std::ops::Range<usize> {
    if len < 2 * scope + 1 {
        0..0
    } else {
        scope..len - scope
    }
}

/// Split the corpus into one dataset per voice. Pieces are kept separate,
/// so no window straddles a piece boundary.
pub fn build_datasets(corpus: &Corpus, topology: &Topology) -> Result<Vec<VoiceDataset>> {
    if corpus.voices() != topology.voices() {
        return Err(Error::Shape(format!(
            "corpus has {} voices, topology {}",
            corpus.voices(),
            topology.voices()
        )));
    }
    let scope = topology.scope();
    let mut out: Vec<VoiceDataset> =
        (0..topology.voices()).map(|voice| VoiceDataset { voice, samples: Vec::new() }).collect();
    for (pi, piece) in corpus.pieces().iter().enumerate() {
        // validates every symbol against the alphabets
        topology.encode(&piece.grid)?;
        let grid = &piece.grid;
        for col in interior_columns(grid.len(), scope) {
            for (voice, ds) in out.iter_mut().enumerate() {
                let neighborhood = topology
                    .couplings(voice)
                    .iter()
                    .map(|cp| grid.get(cp.other, (col as isize + cp.delta) as usize))
                    .collect();
                ds.samples.push(TrainingSample {
                    voice,
                    piece: pi,
                    position: col,
                    center: grid.get(voice, col),
                    neighborhood,
                });
            }
        }
    }
    if out[0].is_empty() {
        return Err(Error::EmptyDataset(2 * scope + 1));
    }
    Ok(out)
}

/// Preprocessed per-voice data: for each sample, the dense offsets of every
/// parameter its center touches, as `(offset, stride)` so that the entry
/// for candidate symbol `c` is `offset + c * stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceStats {
    pub voice: usize,
    pub alphabet_size: usize,
    pub terms_per_sample: usize,
    pub centers: Vec<u16>,
    pub terms: Vec<(u32, u32)>,
    /// Empirical feature counts over this voice's samples (dense layout).
    pub counts: Vec<f64>,
}

impl VoiceStats {
    pub fn samples(&self) -> usize {
        self.centers.len()
    }

    pub fn sample_terms(&self, s: usize) -> &[(u32, u32)] {
        &self.terms[s * self.terms_per_sample..(s + 1) * self.terms_per_sample]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub voices: Vec<VoiceStats>,
    /// Empirical term of the gradient: `Σ_i counts_i / (n · #D_i)`.
    pub empirical: Vec<f64>,
}

impl SufficientStats {
    /// Empirical mean `μ` of dense parameter `k` over voice `i`'s samples.
    pub fn empirical_mean(&self, voice: usize, k: usize) -> f64 {
        let v = &self.voices[voice];
        v.counts[k] / v.samples() as f64
    }
}

pub fn precompute_stats(topology: &Topology, datasets: &[VoiceDataset]) -> Result<SufficientStats> {
    let n = datasets.len();
    let mut empirical = vec![0.0; topology.dim()];
    let mut voices = Vec::with_capacity(n);
    for ds in datasets {
        let i = ds.voice;
        let couplings = topology.couplings(i);
        let terms_per_sample = couplings.len() + 1;
        let mut centers = Vec::with_capacity(ds.len());
        let mut terms = Vec::with_capacity(ds.len() * terms_per_sample);
        let mut counts = vec![0.0; topology.dim()];
        let index = |v: usize, s: Symbol| {
            topology
                .index_of(v, s)
                .ok_or_else(|| Error::Alphabet(format!("symbol {s} is not in the alphabet of voice {v}")))
        };
        for sample in &ds.samples {
            let x = index(i, sample.center)?;
            centers.push(x);
            let local = topology.local_offset(i, topology.position_of(sample.position), 0);
            terms.push((local as u32, 1));
            for (cp, &nb) in couplings.iter().zip(&sample.neighborhood) {
                let b = index(cp.other, nb)? as usize;
                terms.push(((cp.base + b * cp.neighbor_mul) as u32, cp.center_mul as u32));
            }
            for &(off, stride) in &terms[terms.len() - terms_per_sample..] {
                counts[off as usize + x as usize * stride as usize] += 1.0;
            }
        }
        let w = 1.0 / (n as f64 * ds.len() as f64);
        for (e, c) in empirical.iter_mut().zip(&counts) {
            *e += w * c;
        }
        voices.push(VoiceStats {
            voice: i,
            alphabet_size: topology.alphabet(i).len(),
            terms_per_sample,
            centers,
            terms,
            counts,
        });
    }
    Ok(SufficientStats { voices, empirical })
}
