//! The `train`, `sample`, `reharmonize` and `evaluate` subcommands.

use std::path::{Path, PathBuf};

use polymax::corpus::{
    load_corpus, normalize, parse_corpus, split_by_mode, Corpus, CorpusFormat, Mode, OnsetEncoding, Piece,
};
use polymax::evaluator::{
    pair_statistics_table, restitution_discovery, union_alphabets, write_restitution_csv, write_taxonomy_csv,
    RestitutionRow, Taxonomy,
};
use polymax::harmonizer::{reharmonize, HarmonizationRequest, Harmonization, KeyTrack, ModelSet};
use polymax::model::{load_model, save_model, Model, Topology};
use polymax::sampler::{run, ConstraintSet, SamplerConfig};
use polymax::trainer::{fit_with_report, TrainConfigFile};
use polymax::{ChordSequence, Error, Symbol};

use crate::error::{CliError, CliResult};

/// A single-piece corpus document for a generated sequence.
pub fn piece_document(id: String, mode: Mode, original_key: u8, beats_per_bar: Option<u32>, grid: ChordSequence) -> String {
    let voices = grid.voices();
    let piece = Piece { id, mode, original_key, beats_per_bar, grid };
    Corpus::new(voices, vec![piece]).expect("generated sequences are valid pieces").to_json()
}

pub fn model_mode(model: &Model) -> Mode {
    model.metadata.mode.unwrap_or(Mode::Major)
}

/// Loads a training corpus. Onset-list corpora are read on the rhythm grid
/// when the config sets `bins_per_cycle`.
pub fn read_training_corpus(text: &str, config: &TrainConfigFile) -> polymax::Result<Corpus> {
    match parse_corpus(text, CorpusFormat::Grid) {
        Err(Error::Parse(msg)) if msg.contains("\"grid\"") => match config.bins_per_cycle {
            Some(bins) => parse_corpus(
                text,
                CorpusFormat::Onsets(OnsetEncoding::Rhythm { bins_per_cycle: bins as u32, resolution: 1 }),
            ),
            None => Err(Error::Parse(msg)),
        },
        other => other,
    }
}

/// Transposes to C and optionally keeps one mode.
pub fn prepare_corpus(corpus: &Corpus, mode: Option<Mode>) -> polymax::Result<Corpus> {
    let corpus = normalize(corpus)?;
    let corpus = match mode {
        None => corpus,
        Some(m) => {
            let (major, minor) = split_by_mode(&corpus);
            if m == Mode::Major { major } else { minor }
        }
    };
    if corpus.is_empty() {
        return Err(Error::Validation("no pieces left to train on".into()));
    }
    Ok(corpus)
}

pub struct TrainSummary {
    pub model: Model,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

pub fn train_model(corpus: &Corpus, config: &TrainConfigFile) -> polymax::Result<TrainSummary> {
    let topology = config.topology(corpus)?;
    let (model, report) = fit_with_report(corpus, &topology, &config.training())?;
    Ok(TrainSummary { model, iterations: report.iterations, converged: report.converged, objective: report.final_objective })
}

pub fn train(corpus: &Path, config: &Path, out: &Path, mode: Option<Mode>) -> CliResult<String> {
    let config = TrainConfigFile::load(config)?;
    let text = std::fs::read_to_string(corpus)?;
    let corpus = prepare_corpus(&read_training_corpus(&text, &config)?, mode)?;
    let s = train_model(&corpus, &config)?;
    save_model(&s.model, out)?;
    Ok(serde_json::json!({
        "model": out.display().to_string(),
        "pieces": corpus.pieces().len(),
        "parameters": s.model.topology.dim(),
        "nonzero": s.model.count_nonzero(),
        "iterations": s.iterations,
        "converged": s.converged,
        "objective": s.objective,
    })
    .to_string())
}

pub struct SampleArgs<'a> {
    pub model: &'a Path,
    pub length: usize,
    pub steps: u64,
    pub seed: u64,
    pub burn_in: Option<u64>,
    pub constraints: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn sample(a: SampleArgs) -> CliResult<String> {
    if a.length == 0 {
        return Err(CliError::Usage("--length must be at least 1".into()));
    }
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let model = load_model(a.model)?;
    let constraints = match a.constraints {
        Some(p) => ConstraintSet::load(p)?,
        None => ConstraintSet::new(),
    };
    let cfg = SamplerConfig { total_steps: Some(a.steps), burn_in: a.burn_in, seed: a.seed, ..Default::default() };
    let result = run(&model, a.length, &constraints, &cfg)?;
    let doc = piece_document(format!("sample-{}", a.seed), model_mode(&model), 0, None, result.sequence);
    std::fs::write(a.out, doc)?;
    Ok(serde_json::json!({
        "out": a.out.display().to_string(),
        "steps": result.plan.total_steps,
        "accepted": result.accepted,
        "seed": result.seed,
        "rng": result.rng,
    })
    .to_string())
}

/// A melody together with where it goes and what else is constrained.
#[derive(Debug, Clone, PartialEq)]
pub struct MelodyInput {
    pub id: String,
    pub melody: Vec<Symbol>,
    pub voice: usize,
    pub constraints: ConstraintSet,
    pub beats_per_bar: Option<u32>,
}

/// Reads a melody from a corpus document holding one single-voice piece,
/// or from a constraint document whose pins in one voice run from beat 0.
pub fn parse_melody(text: &str) -> polymax::Result<MelodyInput> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("pieces").is_some() {
        let corpus = parse_corpus(text, CorpusFormat::Grid)?;
        let [piece] = corpus.pieces() else {
            return Err(Error::Shape(format!("melody file has {} pieces, expected 1", corpus.pieces().len())));
        };
        if piece.grid.voices() != 1 {
            return Err(Error::Shape(format!("melody piece has {} voices, expected 1", piece.grid.voices())));
        }
        return Ok(MelodyInput {
            id: piece.id.clone(),
            melody: piece.grid.row(0).to_vec(),
            voice: 0,
            constraints: ConstraintSet::new(),
            beats_per_bar: piece.beats_per_bar,
        });
    }
    melody_from_constraints(&ConstraintSet::parse(text)?)
}

/// The melody is the lowest voice pinned at beat 0; its pins must be
/// contiguous. Every other constraint is kept.
pub fn melody_from_constraints(cs: &ConstraintSet) -> polymax::Result<MelodyInput> {
    let voice = cs
        .pins()
        .keys()
        .filter(|&&(_, j)| j == 0)
        .map(|&(v, _)| v)
        .min()
        .ok_or_else(|| Error::Validation("no voice is pinned at beat 0; cannot find a melody".into()))?;
    let melody: Vec<Symbol> = (0..).map_while(|j| cs.pins().get(&(voice, j)).copied()).collect();
    let mut rest = ConstraintSet::new();
    for (&(v, j), &s) in cs.pins() {
        if v == voice {
            if j >= melody.len() {
                return Err(Error::Validation(format!("melody pins in voice {voice} have a gap before beat {j}")));
            }
        } else {
            rest.pin(v, j, s)?;
        }
    }
    for (&(v, j), set) in cs.ranges() {
        rest.restrict(v, j, set.iter().copied())?;
    }
    Ok(MelodyInput { id: "melody".into(), melody, voice, constraints: rest, beats_per_bar: None })
}

/// The harmonized piece as a corpus document, labeled with the first key.
pub fn harmonization_document(id: String, beats_per_bar: Option<u32>, h: &Harmonization) -> String {
    let first = h.keys.0[0];
    piece_document(id, first.mode, first.tonic, beats_per_bar, h.sequence.clone())
}

pub fn keys_sidecar(out: &Path) -> PathBuf {
    out.with_extension("keys.json")
}

pub struct ReharmonizeArgs<'a> {
    pub model_dir: &'a Path,
    pub melody: &'a Path,
    pub keys: Option<&'a Path>,
    pub constraints: Option<&'a Path>,
    pub steps: Option<u64>,
    pub seed: u64,
    pub out: &'a Path,
}

pub fn reharmonize_cmd(a: ReharmonizeArgs) -> CliResult<String> {
    if a.steps == Some(0) {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let models = ModelSet::load_dir(a.model_dir)?;
    let input = parse_melody(&std::fs::read_to_string(a.melody)?)?;
    let mut constraints = input.constraints.clone();
    if let Some(p) = a.constraints {
        let extra = ConstraintSet::load(p)?;
        for (&(v, j), &s) in extra.pins() {
            constraints.pin(v, j, s)?;
        }
        for (&(v, j), set) in extra.ranges() {
            constraints.restrict(v, j, set.iter().copied())?;
        }
    }
    let keys = a.keys.map(|p| KeyTrack::load(p, input.melody.len())).transpose()?;
    let request = HarmonizationRequest {
        melody: input.melody.clone(),
        voice: input.voice,
        constraints,
        keys,
        sampler: SamplerConfig { total_steps: a.steps, seed: a.seed, ..Default::default() },
    };
    let h = reharmonize(&models, &request)?;
    std::fs::write(a.out, harmonization_document(format!("{}-harmonized", input.id), input.beats_per_bar, &h))?;
    let sidecar = keys_sidecar(a.out);
    std::fs::write(&sidecar, h.keys.to_json())?;
    Ok(serde_json::json!({
        "out": a.out.display().to_string(),
        "keys": sidecar.display().to_string(),
        "steps": h.steps,
        "accepted": h.accepted,
        "seed": h.seed,
    })
    .to_string())
}

pub struct EvaluateArgs<'a> {
    pub generated: &'a Path,
    pub train_corpus: &'a Path,
    pub test_corpus: Option<&'a Path>,
    pub report_dir: &'a Path,
    pub lambda: Option<f64>,
    pub scope: usize,
    pub cross_scope: usize,
}

fn corpus_mode(c: &Corpus) -> String {
    let mut modes = c.pieces().iter().map(|p| p.mode);
    match modes.next() {
        Some(first) if modes.all(|m| m == first) => first.as_str().into(),
        Some(_) => "mixed".into(),
        None => String::new(),
    }
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<String> {
    if a.cross_scope > a.scope {
        return Err(CliError::Usage("--cross-scope must not exceed --scope".into()));
    }
    let generated = load_corpus(a.generated, CorpusFormat::Grid)?;
    let train = load_corpus(a.train_corpus, CorpusFormat::Grid)?;
    let test = a.test_corpus.map(|p| load_corpus(p, CorpusFormat::Grid)).transpose()?;
    for other in std::iter::once(&train).chain(test.as_ref()) {
        if other.voices() != generated.voices() {
            return Err(Error::Shape(format!(
                "generated pieces have {} voices, reference corpus {}",
                generated.voices(),
                other.voices()
            ))
            .into());
        }
    }
    std::fs::create_dir_all(a.report_dir)?;

    let taxonomy = Taxonomy::from_corpora(&train, test.as_ref());
    let chords = taxonomy.classify_chords(generated.sequences());
    let quads = taxonomy.classify_quads(generated.sequences());
    write_taxonomy_csv(&a.report_dir.join("taxonomy.csv"), &chords, &quads)?;

    let gen_seqs: Vec<ChordSequence> = generated.sequences().cloned().collect();
    let train_seqs: Vec<ChordSequence> = train.sequences().cloned().collect();
    let alphabets = union_alphabets(generated.voices(), gen_seqs.iter().chain(&train_seqs))?;
    let topology = Topology::new(a.scope, a.cross_scope, alphabets, None)?;
    let table = pair_statistics_table(&gen_seqs, &train_seqs, &topology)?;
    table.write_csv(&a.report_dir.join("pair_stats.csv"))?;

    let mut summary = serde_json::json!({
        "report_dir": a.report_dir.display().to_string(),
        "chords_pct": chords.tokens.percentages(),
        "quads_pct": quads.tokens.percentages(),
        "pair_correlation": table.correlation(1e-3),
    });
    if let Some(test) = &test {
        let (restitution, discovery) = restitution_discovery(generated.sequences(), &train, test)?;
        let row = RestitutionRow { lambda: a.lambda, mode: corpus_mode(&train), restitution, discovery };
        write_restitution_csv(&a.report_dir.join("restitution_discovery.csv"), &[row])?;
        summary["restitution"] = restitution.into();
        summary["discovery"] = discovery.into();
    }
    Ok(summary.to_string())
}
