//! Style-imitation and invention measures.
//!
//! Chords are exact ordered columns (voicing-sensitive). A generated chord
//! or quadrilateral tuple is *cited* when it occurs in the training corpus,
//! *discovered* when it occurs only in the reference corpus, and
//! *invented* otherwise.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{add_counts, FeatureIndex, Model, ModelMetadata, ParamKey, Topology};
use crate::sampler::{run_target, ConstraintSet, SamplerConfig};
use crate::symbol::{ChordSequence, Symbol};
use crate::trainer::{fit, TrainingConfig};

pub type ChordKey = Vec<Symbol>;

/// Two voices `lo < hi` over columns `j, j + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadKey {
    pub lo: usize,
    pub hi: usize,
    pub lo_first: Symbol,
    pub lo_second: Symbol,
    pub hi_first: Symbol,
    pub hi_second: Symbol,
}

pub fn chords(seq: &ChordSequence) -> impl Iterator<Item = ChordKey> + '_ {
    (0..seq.len()).map(|j| seq.column(j))
}

pub fn quads(seq: &ChordSequence) -> impl Iterator<Item = QuadKey> + '_ {
    let n = seq.voices();
    (0..n).flat_map(move |lo| {
        (lo + 1..n).flat_map(move |hi| {
            (0..seq.len().saturating_sub(1)).map(move |j| QuadKey {
                lo,
                hi,
                lo_first: seq.get(lo, j),
                lo_second: seq.get(lo, j + 1),
                hi_first: seq.get(hi, j),
                hi_second: seq.get(hi, j + 1),
            })
        })
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub cited: u64,
    pub discovered: u64,
    pub invented: u64,
}

impl Tally {
    pub fn total(&self) -> u64 {
        self.cited + self.discovered + self.invented
    }

    /// `(cited, discovered, invented)` as fractions; zeros when empty.
    pub fn fractions(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t == 0 {
            return (0.0, 0.0, 0.0);
        }
        let t = t as f64;
        let c = self.cited as f64 / t;
        let d = self.discovered as f64 / t;
        (c, d, 1.0 - c - d)
    }

    pub fn percentages(&self) -> (f64, f64, f64) {
        let (c, d, i) = self.fractions();
        (100.0 * c, 100.0 * d, 100.0 * i)
    }

    fn add(&mut self, class: Class) {
        match class {
            Class::Cited => self.cited += 1,
            Class::Discovered => self.discovered += 1,
            Class::Invented => self.invented += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Cited,
    Discovered,
    Invented,
}

/// Counted once per occurrence and once per distinct item.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TaxonomyReport {
    pub tokens: Tally,
    pub distinct: Tally,
}

/// Lookup sets built from a training and an optional reference corpus.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    train_chords: HashSet<ChordKey>,
    reference_chords: HashSet<ChordKey>,
    train_quads: HashSet<QuadKey>,
    reference_quads: HashSet<QuadKey>,
}

impl Taxonomy {
    pub fn new<'a>(
        train: impl IntoIterator<Item = &'a ChordSequence>,
        reference: impl IntoIterator<Item = &'a ChordSequence>,
    ) -> Self {
        let mut t = Self::default();
        for s in train {
            t.train_chords.extend(chords(s));
            t.train_quads.extend(quads(s));
        }
        for s in reference {
            t.reference_chords.extend(chords(s));
            t.reference_quads.extend(quads(s));
        }
        t
    }

    pub fn from_corpora(train: &Corpus, reference: Option<&Corpus>) -> Self {
        Self::new(train.sequences(), reference.into_iter().flat_map(|c| c.sequences()))
    }

    pub fn chord_class(&self, c: &ChordKey) -> Class {
        if self.train_chords.contains(c) {
            Class::Cited
        } else if self.reference_chords.contains(c) {
            Class::Discovered
        } else {
            Class::Invented
        }
    }

    pub fn quad_class(&self, q: &QuadKey) -> Class {
        if self.train_quads.contains(q) {
            Class::Cited
        } else if self.reference_quads.contains(q) {
            Class::Discovered
        } else {
            Class::Invented
        }
    }

    pub fn classify_chords<'a>(&self, generated: impl IntoIterator<Item = &'a ChordSequence>) -> TaxonomyReport {
        let mut report = TaxonomyReport::default();
        let mut seen = HashSet::new();
        for s in generated {
            for c in chords(s) {
                let class = self.chord_class(&c);
                report.tokens.add(class);
                if seen.insert(c) {
                    report.distinct.add(class);
                }
            }
        }
        report
    }

    pub fn classify_quads<'a>(&self, generated: impl IntoIterator<Item = &'a ChordSequence>) -> TaxonomyReport {
        let mut report = TaxonomyReport::default();
        let mut seen = HashSet::new();
        for s in generated {
            for q in quads(s) {
                let class = self.quad_class(&q);
                report.tokens.add(class);
                if seen.insert(q) {
                    report.distinct.add(class);
                }
            }
        }
        report
    }
}

pub fn classify_chords(generated: &[ChordSequence], train: &Corpus, reference: Option<&Corpus>) -> TaxonomyReport {
    Taxonomy::from_corpora(train, reference).classify_chords(generated)
}

pub fn classify_quads(generated: &[ChordSequence], train: &Corpus, reference: Option<&Corpus>) -> TaxonomyReport {
    Taxonomy::from_corpora(train, reference).classify_quads(generated)
}

/// Restitution and discovery percentages over distinct chord sets:
/// the share of training chords the generation reproduces, and the share
/// of test-only chords it finds.
pub fn restitution_discovery<'a>(
    generated: impl IntoIterator<Item = &'a ChordSequence>,
    train: &Corpus,
    test: &Corpus,
) -> Result<(f64, f64)> {
    let train_set: HashSet<ChordKey> = train.sequences().flat_map(chords).collect();
    let test_only: HashSet<ChordKey> =
        test.sequences().flat_map(chords).filter(|c| !train_set.contains(c)).collect();
    if test_only.is_empty() {
        return Err(Error::EmptyReference);
    }
    if train_set.is_empty() {
        return Err(Error::Validation("training corpus has no chords".into()));
    }
    let gen: HashSet<ChordKey> = generated.into_iter().flat_map(chords).collect();
    let restituted = gen.iter().filter(|c| train_set.contains(*c)).count();
    let discovered = gen.iter().filter(|c| test_only.contains(*c)).count();
    Ok((
        100.0 * restituted as f64 / train_set.len() as f64,
        100.0 * discovered as f64 / test_only.len() as f64,
    ))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStatRow {
    pub feature: FeatureIndex,
    pub freq_generated: f64,
    pub freq_corpus: f64,
}

/// Normalized pair-feature frequencies of a generation against a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatsTable {
    pub rows: Vec<PairStatRow>,
}

impl PairStatsTable {
    /// Pearson correlation over rows whose corpus frequency exceeds
    /// `min_corpus_freq`.
    pub fn correlation(&self, min_corpus_freq: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.freq_corpus > min_corpus_freq)
            .map(|r| (r.freq_generated, r.freq_corpus))
            .unzip();
        pearson(&x, &y)
    }

    /// Correlation per `(i, j, k)` connection group.
    pub fn group_correlations(&self, min_corpus_freq: f64) -> BTreeMap<(usize, usize, i32), f64> {
        let mut groups: BTreeMap<(usize, usize, i32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.freq_corpus > min_corpus_freq) {
            let g = groups.entry((r.feature.i, r.feature.j, r.feature.k)).or_default();
            g.0.push(r.freq_generated);
            g.1.push(r.freq_corpus);
        }
        groups.into_iter().filter_map(|(k, (x, y))| pearson(&x, &y).map(|r| (k, r))).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["a", "b", "i", "j", "k", "freq_generated", "freq_corpus"]).map_err(csv_err)?;
        for r in &self.rows {
            let f = r.feature;
            w.write_record([
                f.a.to_string(),
                f.b.to_string(),
                f.i.to_string(),
                f.j.to_string(),
                f.k.to_string(),
                r.freq_generated.to_string(),
                r.freq_corpus.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-parameter pair frequencies: count over the number of column pairs
/// at that offset. Local fields are omitted.
fn pair_frequencies<'a>(seqs: impl IntoIterator<Item = &'a ChordSequence>, topology: &Topology) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; topology.dim()];
    let mut slots: BTreeMap<usize, f64> = BTreeMap::new();
    for s in seqs {
        let enc = topology.encode(s)?;
        add_counts(&enc, topology, &mut counts, 1.0);
        for offset in 0..=topology.scope() {
            *slots.entry(offset).or_default() += s.len().saturating_sub(offset) as f64;
        }
    }
    for b in topology.blocks() {
        let slots = slots.get(&b.offset).copied().unwrap_or(0.0);
        for k in b.base..b.base + b.rows * b.cols {
            counts[k] = if slots > 0.0 { counts[k] / slots } else { 0.0 };
        }
    }
    Ok(counts)
}

pub fn pair_statistics_table(
    generated: &[ChordSequence],
    corpus: &[ChordSequence],
    topology: &Topology,
) -> Result<PairStatsTable> {
    let g = pair_frequencies(generated, topology)?;
    let c = pair_frequencies(corpus, topology)?;
    let mut rows = Vec::new();
    for b in topology.blocks() {
        for k in b.base..b.base + b.rows * b.cols {
            if g[k] == 0.0 && c[k] == 0.0 {
                continue;
            }
            let ParamKey::Feature(feature) = topology.key_at(k) else { unreachable!("blocks hold pair features") };
            rows.push(PairStatRow { feature, freq_generated: g[k], freq_corpus: c[k] });
        }
    }
    Ok(PairStatsTable { rows })
}

/// Per-voice alphabets covering every sequence given.
pub fn union_alphabets<'a>(voices: usize, seqs: impl IntoIterator<Item = &'a ChordSequence>) -> Result<Vec<Vec<Symbol>>> {
    let mut sets = vec![std::collections::BTreeSet::new(); voices];
    for s in seqs {
        if s.voices() != voices {
            return Err(Error::Shape(format!("sequence has {} voices, expected {voices}", s.voices())));
        }
        for (i, set) in sets.iter_mut().enumerate() {
            set.extend(s.row(i).iter().copied());
        }
    }
    Ok(sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Local fields only, set to the log empirical unigram frequencies.
    Independent,
    /// Same-column couplings only (K = 0, L = 0), trained.
    VerticalOnly,
}

pub fn baseline_model(corpus: &Corpus, kind: BaselineKind, config: &TrainingConfig) -> Result<Model> {
    let topology = Topology::new(0, 0, corpus.alphabets().to_vec(), None)?;
    match kind {
        BaselineKind::VerticalOnly => fit(corpus, &topology, config),
        BaselineKind::Independent => {
            let mut theta = vec![0.0; topology.dim()];
            for i in 0..corpus.voices() {
                let mut counts = vec![0.0; topology.alphabet(i).len()];
                for s in corpus.sequences() {
                    for &sym in s.row(i) {
                        counts[topology.index_of(i, sym).expect("corpus alphabets") as usize] += 1.0;
                    }
                }
                let total: f64 = counts.iter().sum();
                for (a, c) in counts.iter().enumerate() {
                    theta[topology.local_offset(i, 0, a)] = (c / total).ln();
                }
            }
            let metadata = ModelMetadata {
                corpus_fingerprint: Some(corpus.fingerprint()),
                extra: [("baseline".to_string(), "independent".into())].into_iter().collect(),
                ..Default::default()
            };
            Model::from_dense(topology, theta, metadata)
        }
    }
}

/// Taxonomy fractions along a chain, sampled every `every` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    /// Steps divided by `|A| · n · l`.
    pub normalized: f64,
    pub chords: (f64, f64, f64),
}

pub fn taxonomy_trajectory(
    model: &Model,
    len: usize,
    taxonomy: &Taxonomy,
    config: &SamplerConfig,
) -> Result<Vec<TrajectoryPoint>> {
    let scale: f64 = (0..model.topology.voices()).map(|i| model.topology.alphabet(i).len() as f64).sum::<f64>() * len as f64;
    let mut out = Vec::new();
    run_target(model, len, &ConstraintSet::new(), config, |step, state| {
        let seq = model.topology.decode(state);
        let r = taxonomy.classify_chords([&seq]);
        out.push(TrajectoryPoint { step, normalized: step as f64 / scale, chords: r.tokens.fractions() });
    })?;
    Ok(out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Validation(format!("csv: {other:?}")),
    }
}

/// Writes `taxonomy.csv`: one row per unit (chord, quad) and counting.
pub fn write_taxonomy_csv(path: &Path, chords: &TaxonomyReport, quads: &TaxonomyReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "unit", "counting", "cited", "discovered", "invented", "cited_pct", "discovered_pct", "invented_pct",
    ])
    .map_err(csv_err)?;
    for (unit, r) in [("chord", chords), ("quad", quads)] {
        for (counting, t) in [("tokens", r.tokens), ("distinct", r.distinct)] {
            let (c, d, i) = t.percentages();
            w.write_record([
                unit.to_string(),
                counting.to_string(),
                t.cited.to_string(),
                t.discovered.to_string(),
                t.invented.to_string(),
                c.to_string(),
                d.to_string(),
                i.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestitutionRow {
    pub lambda: Option<f64>,
    pub mode: String,
    pub restitution: f64,
    pub discovery: f64,
}

/// Writes `restitution_discovery.csv` with header `lambda,mode,restitution,discovery`.
pub fn write_restitution_csv(path: &Path, rows: &[RestitutionRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["lambda", "mode", "restitution", "discovery"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.lambda.map(|l| l.to_string()).unwrap_or_default(),
            r.mode.clone(),
            r.restitution.to_string(),
            r.discovery.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mode, Piece};
    use crate::model::conditional_distribution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(rows: &[&[u8]]) -> ChordSequence {
        ChordSequence::new(rows.iter().map(|r| r.iter().map(|&p| Symbol::Pitch(p)).collect()).collect()).unwrap()
    }

    fn corpus(seqs: Vec<ChordSequence>) -> Corpus {
        let n = seqs[0].voices();
        let pieces = seqs
            .into_iter()
            .enumerate()
            .map(|(k, grid)| Piece { id: format!("p{k}"), mode: Mode::Major, original_key: 0, beats_per_bar: None, grid })
            .collect();
        Corpus::new(n, pieces).unwrap()
    }

    fn random_corpus(seed: u64, pieces: usize, len: usize) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        corpus(
            (0..pieces)
                .map(|_| {
                    let top: Vec<u8> = (0..len).map(|_| 60 + rng.random_range(0..5)).collect();
                    let bottom: Vec<u8> = top.iter().map(|t| t - 12 + rng.random_range(0..2)).collect();
                    seq(&[&top, &bottom])
                })
                .collect(),
        )
    }

    #[test]
    fn training_corpus_is_all_cited() {
        let c = random_corpus(1, 4, 20);
        let gen: Vec<ChordSequence> = c.sequences().cloned().collect();
        for r in [classify_chords(&gen, &c, None), classify_quads(&gen, &c, None)] {
            assert_eq!(r.tokens.cited, r.tokens.total());
            assert_eq!(r.tokens.fractions(), (1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn classes_partition_the_items() {
        let train = corpus(vec![seq(&[&[60, 62], &[48, 50]])]);
        let reference = corpus(vec![seq(&[&[64, 65], &[52, 53]])]);
        let gen = vec![seq(&[&[60, 64, 70, 60], &[48, 52, 40, 48]])];
        let r = classify_chords(&gen, &train, Some(&reference));
        assert_eq!(r.tokens, Tally { cited: 2, discovered: 1, invented: 1 });
        assert_eq!(r.distinct, Tally { cited: 1, discovered: 1, invented: 1 });
        let (c, d, i) = r.tokens.fractions();
        assert!((c + d + i - 1.0).abs() < 1e-12);
        let q = classify_quads(&gen, &train, Some(&reference));
        assert_eq!(q.tokens.total(), 3);
        assert_eq!(q.tokens.invented, 3);
    }

    #[test]
    fn quads_enumerate_pairs_and_columns() {
        let s = seq(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]]);
        let qs: Vec<QuadKey> = quads(&s).collect();
        assert_eq!(qs.len(), 3 * 2);
        assert_eq!(
            qs[0],
            QuadKey {
                lo: 0,
                hi: 1,
                lo_first: Symbol::Pitch(1),
                lo_second: Symbol::Pitch(2),
                hi_first: Symbol::Pitch(4),
                hi_second: Symbol::Pitch(5)
            }
        );
    }

    #[test]
    fn restitution_extremes_and_scale_freedom() {
        let train = corpus(vec![seq(&[&[60, 62, 64], &[48, 50, 52]])]);
        let test = corpus(vec![seq(&[&[60, 65], &[48, 53]])]);
        let gen: Vec<ChordSequence> = train.sequences().cloned().collect();
        assert_eq!(restitution_discovery(&gen, &train, &test).unwrap(), (100.0, 0.0));
        let none = vec![seq(&[&[70], &[30]])];
        assert_eq!(restitution_discovery(&none, &train, &test).unwrap(), (0.0, 0.0));
        let mixed = vec![seq(&[&[60, 65, 70], &[48, 53, 30]])];
        let once = restitution_discovery(&mixed, &train, &test).unwrap();
        let twice: Vec<ChordSequence> = [mixed.clone(), mixed].concat();
        assert_eq!(restitution_discovery(&twice, &train, &test).unwrap(), once);
        assert!((once.0 - 100.0 / 3.0).abs() < 1e-12 && once.1 == 100.0);
        assert!(matches!(restitution_discovery(&gen, &train, &train), Err(Error::EmptyReference)));
    }

    #[test]
    fn self_comparison_has_unit_correlation() {
        let c = random_corpus(2, 5, 30);
        let seqs: Vec<ChordSequence> = c.sequences().cloned().collect();
        let t = Topology::new(2, 1, c.alphabets().to_vec(), None).unwrap();
        let table = pair_statistics_table(&seqs, &seqs, &t).unwrap();
        assert!(table.rows.iter().all(|r| r.freq_generated == r.freq_corpus));
        assert_eq!(table.correlation(0.0), Some(1.0));
        assert!(table.group_correlations(0.0).values().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pair_frequencies_are_normalized_per_offset() {
        let s = seq(&[&[60, 60, 60, 60], &[48, 48, 48, 48]]);
        let t = Topology::new(2, 1, vec![vec![Symbol::Pitch(60)], vec![Symbol::Pitch(48)]], None).unwrap();
        let table = pair_statistics_table(std::slice::from_ref(&s), std::slice::from_ref(&s), &t).unwrap();
        // every pair feature fills all of its slots
        assert!(table.rows.iter().all(|r| r.freq_corpus == 1.0));
        assert_eq!(table.rows.len(), 2 + 1 + 2 + 2);
    }

    #[test]
    fn independent_baseline_reproduces_unigrams() {
        let c = random_corpus(3, 6, 40);
        let m = baseline_model(&c, BaselineKind::Independent, &TrainingConfig::default()).unwrap();
        let s = c.pieces()[0].grid.clone();
        for i in 0..2 {
            let total = c.total_columns() as f64;
            let p = conditional_distribution(&s, i, 5, &m).unwrap();
            for (a, sym) in m.topology.alphabet(i).iter().enumerate() {
                let freq = c.sequences().flat_map(|q| q.row(i)).filter(|x| *x == sym).count() as f64 / total;
                assert!((p[a] - freq).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertical_baseline_ignores_horizontal_context() {
        let c = random_corpus(4, 6, 40);
        let m = baseline_model(&c, BaselineKind::VerticalOnly, &TrainingConfig::with_lambda(1e-4)).unwrap();
        assert_eq!(m.topology.scope(), 0);
        let a = seq(&[&[60, 61, 62], &[48, 49, 50]]);
        let b = seq(&[&[64, 61, 60], &[52, 49, 48]]);
        assert_eq!(
            conditional_distribution(&a, 0, 1, &m).unwrap(),
            conditional_distribution(&b, 0, 1, &m).unwrap()
        );
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let r = TaxonomyReport::default();
        write_taxonomy_csv(&dir.path().join("taxonomy.csv"), &r, &r).unwrap();
        let text = std::fs::read_to_string(dir.path().join("taxonomy.csv")).unwrap();
        assert!(text.starts_with("unit,counting,cited,discovered,invented,"));
        assert_eq!(text.lines().count(), 5);
        let rows = [RestitutionRow { lambda: Some(1e-5), mode: "major".into(), restitution: 50.0, discovery: 2.5 }];
        write_restitution_csv(&dir.path().join("rd.csv"), &rows).unwrap();
        let text = std::fs::read_to_string(dir.path().join("rd.csv")).unwrap();
        assert_eq!(text, "lambda,mode,restitution,discovery\n0.00001,major,50,2.5\n");
    }
}
