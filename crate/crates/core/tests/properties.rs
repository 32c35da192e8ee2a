use polymax::corpus::{holdout_split, parse_corpus, transpose_from_c, transpose_to_c, Corpus, CorpusFormat, Mode, Piece};
use polymax::evaluator::{classify_chords, classify_quads, pearson};
use polymax::harmonizer::{detect_keys, key_correlations};
use polymax::model::{conditional_distribution, energy, model_to_json, parse_model, score_delta, Model, ModelMetadata, Topology};
use polymax::{ChordSequence, Symbol};
use proptest::prelude::*;

const ALPHABET: [u8; 4] = [60, 62, 64, 67];

/// A grid of `voices` rows over a small pitch set.
fn grid(voices: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = ChordSequence> {
    len.prop_flat_map(move |l| {
        proptest::collection::vec(proptest::collection::vec(0usize..ALPHABET.len(), l), voices)
            .prop_map(|rows| {
                ChordSequence::new(
                    rows.into_iter().map(|r| r.into_iter().map(|k| Symbol::Pitch(ALPHABET[k])).collect()).collect(),
                )
                .unwrap()
            })
    })
}

fn corpus(voices: usize) -> impl Strategy<Value = Corpus> {
    proptest::collection::vec((grid(voices, 1..7), 0u8..12, any::<bool>()), 1..6).prop_map(move |ps| {
        let pieces = ps
            .into_iter()
            .enumerate()
            .map(|(k, (grid, key, minor))| Piece {
                id: format!("p{k}"),
                mode: if minor { Mode::Minor } else { Mode::Major },
                original_key: key,
                beats_per_bar: Some(4),
                grid,
            })
            .collect();
        Corpus::new(voices, pieces).unwrap()
    })
}

/// A random model over the full alphabet with scopes (K, L).
fn model(voices: usize, scope: usize, cross: usize) -> impl Strategy<Value = Model> {
    let alphabets = vec![ALPHABET.iter().map(|&p| Symbol::Pitch(p)).collect::<Vec<_>>(); voices];
    let t = Topology::new(scope, cross, alphabets, None).unwrap();
    let dim = t.dim();
    proptest::collection::vec(-2.0f64..2.0, dim)
        .prop_map(move |theta| Model::from_dense(t.clone(), theta, ModelMetadata::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_json_round_trips(c in corpus(3)) {
        let back = parse_corpus(&c.to_json(), CorpusFormat::Grid).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.fingerprint(), c.fingerprint());
    }

    #[test]
    fn transposition_to_c_and_back_is_identity(c in corpus(2)) {
        for p in c.pieces() {
            let there = transpose_to_c(p).unwrap();
            prop_assert_eq!(there.original_key, 0);
            let back = transpose_from_c(&there, p.original_key).unwrap();
            prop_assert_eq!(&back, p);
        }
    }

    #[test]
    fn holdout_split_partitions(c in corpus(1), every in 1usize..4, offset in 0usize..4) {
        let (train, test) = holdout_split(&c, every, offset);
        prop_assert_eq!(train.pieces().len() + test.pieces().len(), c.pieces().len());
        let mut ids: Vec<_> = train.pieces().iter().chain(test.pieces()).map(|p| p.id.clone()).collect();
        ids.sort();
        let mut want: Vec<_> = c.pieces().iter().map(|p| p.id.clone()).collect();
        want.sort();
        prop_assert_eq!(ids, want);
    }

    #[test]
    fn model_json_is_bit_exact(m in model(2, 2, 1)) {
        let back = parse_model(&model_to_json(&m)).unwrap();
        prop_assert_eq!(back.theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        m.theta.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back.topology, m.topology);
    }

    #[test]
    fn single_cell_delta_is_energy_difference(
        m in model(3, 2, 1),
        s in grid(3, 1..8),
        v in 0usize..3,
        c in 0usize..8,
        new in 0usize..ALPHABET.len(),
    ) {
        let c = c % s.len();
        let t = &m.topology;
        let enc = t.encode(&s).unwrap();
        let mut moved = s.clone();
        moved.set(v, c, Symbol::Pitch(ALPHABET[new]));
        let d = score_delta(&m, v, c, s.len(), enc.get(v, c), new as u16, |i, j| Some(enc.get(i, j)));
        let want = energy(&s, &m).unwrap() - energy(&moved, &m).unwrap();
        prop_assert!((d - want).abs() < 1e-9, "{d} vs {want}");
    }

    #[test]
    fn conditionals_are_energy_ratios(m in model(2, 3, 2), s in grid(2, 1..7), v in 0usize..2, c in 0usize..7) {
        let c = c % s.len();
        let p = conditional_distribution(&s, v, c, &m).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let e: Vec<f64> = ALPHABET.iter().map(|&a| {
            let mut x = s.clone();
            x.set(v, c, Symbol::Pitch(a));
            energy(&x, &m).unwrap()
        }).collect();
        for a in 1..ALPHABET.len() {
            let log_ratio = (p[a] / p[0]).ln();
            prop_assert!((log_ratio - (e[0] - e[a])).abs() < 1e-9);
        }
    }

    #[test]
    fn taxonomy_classes_partition_every_count(g in corpus(3), train in corpus(3), test in corpus(3)) {
        let seqs: Vec<ChordSequence> = g.sequences().cloned().collect();
        let columns: usize = seqs.iter().map(|s| s.len()).sum();
        let pairs: usize = seqs.iter().map(|s| 3 * s.len().saturating_sub(1)).sum();
        let chords = classify_chords(&seqs, &train, Some(&test));
        let quads = classify_quads(&seqs, &train, Some(&test));
        prop_assert_eq!(chords.tokens.total(), columns as u64);
        prop_assert_eq!(quads.tokens.total(), pairs as u64);
        for tally in [chords.tokens, chords.distinct, quads.tokens, quads.distinct] {
            let (a, b, c) = tally.percentages();
            prop_assert!((a + b + c - 100.0).abs() < 1e-9 || tally.total() == 0);
        }
        prop_assert!(chords.distinct.total() <= chords.tokens.total());
        prop_assert!(quads.distinct.total() <= quads.tokens.total());
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(xy in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..30)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Some(r) = pearson(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            prop_assert!((pearson(&y, &x).unwrap() - r).abs() < 1e-12);
            let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
            prop_assert!((pearson(&shifted, &y).unwrap() - r).abs() < 1e-9);
        }
    }

    #[test]
    fn key_detection_follows_transposition(notes in proptest::collection::vec(55u8..80, 1..40), shift in -6i32..6) {
        let melody: Vec<Symbol> = notes.iter().map(|&p| Symbol::Pitch(p)).collect();
        let moved: Vec<Symbol> = melody.iter().map(|s| s.transposed(shift).unwrap()).collect();
        // the opening key has no incumbent to break an exact tie against
        let mut hist = [0.0; 12];
        notes.iter().for_each(|&p| hist[(p % 12) as usize] += 1.0);
        let corr = key_correlations(&hist).unwrap_or_default();
        let top = corr.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(corr.iter().filter(|c| c.1 == top).count() <= 1);
        let a = detect_keys(&melody);
        let b = detect_keys(&moved);
        prop_assert_eq!(b, a.transposed(shift));
    }
}
