//! Constrained single-cell Metropolis-Hastings generation.
//!
//! A move picks one unpinned cell uniformly, then a symbol uniformly from
//! the cell's allowed set (the current symbol included, so the proposal is
//! symmetric), and accepts with probability `min(1, exp(E(s) - E(s')))`.
//! The ratio is computed from the parameters touching the changed cell
//! only.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{score_delta, EncodedSeq, Model};
use crate::symbol::{ChordSequence, Symbol};

/// Name of the generator recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Default constant in the `c · n · l · |A|` step budget.
pub const DEFAULT_BUDGET_CONSTANT: u64 = 20;

/// A distribution the chain can sample: per-cell symbol domains plus the
/// log acceptance ratio of single-cell moves.
pub trait Target: Sync {
    fn voices(&self) -> usize;

    /// Number of symbols cell `(voice, col)` can take.
    fn domain_size(&self, voice: usize, col: usize) -> usize;

    fn encode_symbol(&self, voice: usize, col: usize, s: Symbol) -> Option<u16>;

    fn decode_symbol(&self, voice: usize, col: usize, k: u16) -> Symbol;

    /// `log α = E(s) - E(s')` for setting `(voice, col)` to `new`.
    fn log_ratio(&self, state: &EncodedSeq, voice: usize, col: usize, new: u16) -> f64;
}

impl Target for Model {
    fn voices(&self) -> usize {
        self.topology.voices()
    }

    fn domain_size(&self, voice: usize, _col: usize) -> usize {
        self.topology.alphabet(voice).len()
    }

    fn encode_symbol(&self, voice: usize, _col: usize, s: Symbol) -> Option<u16> {
        self.topology.index_of(voice, s)
    }

    fn decode_symbol(&self, voice: usize, _col: usize, k: u16) -> Symbol {
        self.topology.alphabet(voice)[k as usize]
    }

    #[inline]
    fn log_ratio(&self, state: &EncodedSeq, voice: usize, col: usize, new: u16) -> f64 {
        score_delta(self, voice, col, state.len, state.get(voice, col), new, |v, c| Some(state.get(v, c)))
    }
}

/// Pinned cells and per-cell allowed symbol sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pins: BTreeMap<(usize, usize), Symbol>,
    ranges: BTreeMap<(usize, usize), BTreeSet<Symbol>>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    #[serde(default)]
    pins: Vec<(usize, usize, Symbol)>,
    #[serde(default)]
    ranges: Vec<(usize, usize, Vec<Symbol>)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty() && self.ranges.is_empty()
    }

    pub fn pins(&self) -> &BTreeMap<(usize, usize), Symbol> {
        &self.pins
    }

    pub fn ranges(&self) -> &BTreeMap<(usize, usize), BTreeSet<Symbol>> {
        &self.ranges
    }

    pub fn pin(&mut self, voice: usize, position: usize, s: Symbol) -> Result<()> {
        if self.ranges.contains_key(&(voice, position)) {
            return Err(Error::Constraint(format!("cell ({voice}, {position}) is both pinned and range-constrained")));
        }
        if self.pins.insert((voice, position), s).is_some_and(|old| old != s) {
            return Err(Error::Constraint(format!("cell ({voice}, {position}) is pinned twice")));
        }
        Ok(())
    }

    pub fn restrict(&mut self, voice: usize, position: usize, allowed: impl IntoIterator<Item = Symbol>) -> Result<()> {
        let set: BTreeSet<Symbol> = allowed.into_iter().collect();
        if set.is_empty() {
            return Err(Error::Constraint(format!("empty allowed set at ({voice}, {position})")));
        }
        if self.pins.contains_key(&(voice, position)) {
            return Err(Error::Constraint(format!("cell ({voice}, {position}) is both pinned and range-constrained")));
        }
        if self.ranges.insert((voice, position), set).is_some() {
            return Err(Error::Constraint(format!("cell ({voice}, {position}) has two ranges")));
        }
        Ok(())
    }

    /// Pin a whole voice to `row`, starting at column 0.
    pub fn pin_voice(&mut self, voice: usize, row: &[Symbol]) -> Result<()> {
        for (j, &s) in row.iter().enumerate() {
            self.pin(voice, j, s)?;
        }
        Ok(())
    }

    pub fn satisfied_by(&self, seq: &ChordSequence) -> bool {
        let inside = |v: usize, j: usize| v < seq.voices() && j < seq.len();
        self.pins.iter().all(|(&(v, j), &s)| inside(v, j) && seq.get(v, j) == s)
            && self.ranges.iter().all(|(&(v, j), set)| inside(v, j) && set.contains(&seq.get(v, j)))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConstraintFile = serde_json::from_str(text)?;
        let mut out = Self::new();
        for (v, j, s) in file.pins {
            out.pin(v, j, s)?;
        }
        for (v, j, set) in file.ranges {
            out.restrict(v, j, set)?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = ConstraintFile {
            pins: self.pins.iter().map(|(&(v, j), &s)| (v, j, s)).collect(),
            ranges: self.ranges.iter().map(|(&(v, j), set)| (v, j, set.iter().copied().collect())).collect(),
        };
        serde_json::to_string(&file).expect("constraints serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Choices {
    All(u16),
    Set(Vec<u16>),
}

/// Constraints resolved against a target and a length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPlan {
    voices: usize,
    len: usize,
    pinned: Vec<Option<u16>>,
    free: Vec<(usize, usize)>,
    choices: Vec<Choices>,
}

impl CellPlan {
    pub fn new<T: Target + ?Sized>(target: &T, len: usize, constraints: &ConstraintSet) -> Result<Self> {
        let n = target.voices();
        let check = |v: usize, j: usize| {
            if v >= n || j >= len {
                Err(Error::Constraint(format!("cell ({v}, {j}) outside the {n} x {len} grid")))
            } else {
                Ok(())
            }
        };
        let encode = |v: usize, j: usize, s: Symbol| {
            target
                .encode_symbol(v, j, s)
                .ok_or_else(|| Error::Alphabet(format!("symbol {s} at ({v}, {j}) is not in the voice alphabet")))
        };
        let mut pinned = vec![None; n * len];
        for (&(v, j), &s) in &constraints.pins {
            check(v, j)?;
            pinned[v * len + j] = Some(encode(v, j, s)?);
        }
        let mut ranges = BTreeMap::new();
        for (&(v, j), set) in &constraints.ranges {
            check(v, j)?;
            let ks = set.iter().map(|&s| encode(v, j, s)).collect::<Result<Vec<u16>>>()?;
            ranges.insert((v, j), ks);
        }
        let mut free = Vec::new();
        let mut choices = Vec::new();
        for v in 0..n {
            for j in 0..len {
                if pinned[v * len + j].is_some() {
                    continue;
                }
                free.push((v, j));
                choices.push(match ranges.remove(&(v, j)) {
                    Some(ks) => Choices::Set(ks),
                    None => Choices::All(target.domain_size(v, j) as u16),
                });
            }
        }
        Ok(Self { voices: n, len, pinned, free, choices })
    }

    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free
    }

    fn draw(&self, idx: usize, rng: &mut ChaCha8Rng) -> u16 {
        match &self.choices[idx] {
            Choices::All(m) => rng.random_range(0..*m),
            Choices::Set(ks) => ks[rng.random_range(0..ks.len())],
        }
    }

    /// A uniform random state honoring every constraint.
    fn initial_state(&self, rng: &mut ChaCha8Rng) -> EncodedSeq {
        let mut st = EncodedSeq { voices: self.voices, len: self.len, cells: vec![0; self.voices * self.len] };
        for (k, p) in self.pinned.iter().enumerate() {
            if let Some(p) = p {
                st.cells[k] = *p;
            }
        }
        for (idx, &(v, j)) in self.free.iter().enumerate() {
            let s = self.draw(idx, rng);
            st.set(v, j, s);
        }
        st
    }
}

/// Draw a move: a uniform unpinned cell and a uniform allowed symbol for it.
pub fn propose(plan: &CellPlan, rng: &mut ChaCha8Rng) -> Result<(usize, usize, u16)> {
    if plan.free.is_empty() {
        return Err(Error::FullyPinned);
    }
    let idx = rng.random_range(0..plan.free.len());
    let (v, j) = plan.free[idx];
    Ok((v, j, plan.draw(idx, rng)))
}

/// `α = P(s') / P(s)` for replacing the symbol at `(voice, col)` by `new`.
pub fn acceptance_ratio(model: &Model, seq: &ChordSequence, voice: usize, col: usize, new: Symbol) -> Result<f64> {
    let enc = model.topology.encode(seq)?;
    let k = model
        .topology
        .index_of(voice, new)
        .ok_or_else(|| Error::Alphabet(format!("symbol {new} is not in the alphabet of voice {voice}")))?;
    Ok(model.log_ratio(&enc, voice, col, k).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub voice: usize,
    pub col: usize,
    pub proposed: u16,
    pub accepted: bool,
}

/// One Markov chain over a target.
pub struct Chain<'a, T: Target + ?Sized> {
    target: &'a T,
    plan: CellPlan,
    state: EncodedSeq,
    rng: ChaCha8Rng,
    steps: u64,
    accepted: u64,
}

impl<'a, T: Target + ?Sized> Chain<'a, T> {
    pub fn new(target: &'a T, len: usize, constraints: &ConstraintSet, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::Config("sequence length must be positive".into()));
        }
        let plan = CellPlan::new(target, len, constraints)?;
        if plan.free.is_empty() {
            return Err(Error::FullyPinned);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = plan.initial_state(&mut rng);
        Ok(Self { target, plan, state, rng, steps: 0, accepted: 0 })
    }

    /// Start from a given state, which must satisfy the constraints.
    pub fn with_state(mut self, state: EncodedSeq) -> Result<Self> {
        if state.voices != self.state.voices || state.len != self.state.len {
            return Err(Error::Shape("initial state has the wrong shape".into()));
        }
        for (k, p) in self.plan.pinned.iter().enumerate() {
            if p.is_some_and(|p| state.cells[k] != p) {
                return Err(Error::Constraint("initial state violates a pin".into()));
            }
        }
        for (idx, &(v, j)) in self.plan.free.iter().enumerate() {
            let ok = match &self.plan.choices[idx] {
                Choices::All(m) => state.get(v, j) < *m,
                Choices::Set(ks) => ks.contains(&state.get(v, j)),
            };
            if !ok {
                return Err(Error::Constraint(format!("initial state violates the allowed set at ({v}, {j})")));
            }
        }
        self.state = state;
        Ok(self)
    }

    #[inline]
    pub fn step(&mut self) -> StepOutcome {
        let idx = self.rng.random_range(0..self.plan.free.len());
        let (voice, col) = self.plan.free[idx];
        let proposed = self.plan.draw(idx, &mut self.rng);
        let log_alpha = self.target.log_ratio(&self.state, voice, col, proposed);
        let accepted = log_alpha >= 0.0 || self.rng.random::<f64>() < log_alpha.exp();
        if accepted {
            self.state.set(voice, col, proposed);
            self.accepted += 1;
        }
        self.steps += 1;
        StepOutcome { voice, col, proposed, accepted }
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn state(&self) -> &EncodedSeq {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn sequence(&self) -> ChordSequence {
        decode_state(self.target, &self.state)
    }
}

pub fn decode_state<T: Target + ?Sized>(target: &T, state: &EncodedSeq) -> ChordSequence {
    let rows = (0..state.voices)
        .map(|v| (0..state.len).map(|j| target.decode_symbol(v, j, state.get(v, j))).collect())
        .collect();
    ChordSequence::new(rows).expect("states are rectangular")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Defaults to [`default_step_budget`].
    pub total_steps: Option<u64>,
    /// Defaults to half the steps.
    pub burn_in: Option<u64>,
    /// Steps between recorded states; defaults to `n · l`.
    pub thinning: Option<u64>,
    pub seed: u64,
    pub record_trajectory: bool,
    pub budget_constant: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            total_steps: None,
            burn_in: None,
            thinning: None,
            seed: 0,
            record_trajectory: false,
            budget_constant: DEFAULT_BUDGET_CONSTANT,
        }
    }
}

impl SamplerConfig {
    pub fn with_steps(total_steps: u64, seed: u64) -> Self {
        Self { total_steps: Some(total_steps), seed, ..Self::default() }
    }
}

/// `c · l · Σ_i |A_i|`, i.e. `c · n · l · |A|` for equal alphabets.
pub fn default_step_budget(model: &Model, len: usize) -> u64 {
    budget_for(model, len, DEFAULT_BUDGET_CONSTANT)
}

fn budget_for<T: Target + ?Sized>(target: &T, len: usize, c: u64) -> u64 {
    if len == 0 {
        return 0;
    }
    let symbols: u64 = (0..target.voices()).map(|v| target.domain_size(v, 0) as u64).sum();
    c * len as u64 * symbols
}

/// Resolved step counts for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub total_steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
}

pub fn plan_run<T: Target + ?Sized>(target: &T, len: usize, config: &SamplerConfig) -> Result<RunPlan> {
    let total_steps = config.total_steps.unwrap_or_else(|| budget_for(target, len, config.budget_constant));
    let burn_in = config.burn_in.unwrap_or(total_steps / 2);
    let thinning = config.thinning.unwrap_or((target.voices() * len) as u64);
    if total_steps > 0 && burn_in >= total_steps {
        return Err(Error::Config(format!("burn_in {burn_in} must be below total_steps {total_steps}")));
    }
    if thinning == 0 {
        return Err(Error::Config("thinning must be at least 1".into()));
    }
    Ok(RunPlan { total_steps, burn_in, thinning })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub sequence: ChordSequence,
    /// `(step, state)` after burn-in every `thinning` steps, when requested.
    pub trajectory: Vec<(u64, ChordSequence)>,
    pub plan: RunPlan,
    pub accepted: u64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Run a chain over any target and report recorded states to `observe`
/// (post-burn-in, every `thinning` steps).
pub fn run_target<T: Target + ?Sized>(
    target: &T,
    len: usize,
    constraints: &ConstraintSet,
    config: &SamplerConfig,
    mut observe: impl FnMut(u64, &EncodedSeq),
) -> Result<(ChordSequence, RunPlan, u64)> {
    let plan = plan_run(target, len, config)?;
    let mut chain = Chain::new(target, len, constraints, config.seed)?;
    for t in 1..=plan.total_steps {
        chain.step();
        if t > plan.burn_in && (t - plan.burn_in) % plan.thinning == 0 {
            observe(t, chain.state());
        }
    }
    Ok((chain.sequence(), plan, chain.accepted()))
}

pub fn run_with<T: Target + ?Sized>(
    target: &T,
    len: usize,
    constraints: &ConstraintSet,
    config: &SamplerConfig,
) -> Result<SampleRun> {
    let mut trajectory = Vec::new();
    let record = config.record_trajectory;
    let (sequence, plan, accepted) = run_target(target, len, constraints, config, |t, st| {
        if record {
            trajectory.push((t, decode_state(target, st)));
        }
    })?;
    Ok(SampleRun { sequence, trajectory, plan, accepted, seed: config.seed, rng: RNG_ALGORITHM })
}

pub fn run(model: &Model, len: usize, constraints: &ConstraintSet, config: &SamplerConfig) -> Result<SampleRun> {
    run_with(model, len, constraints, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy, Topology};
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn alpha(k: u8) -> Vec<Symbol> {
        (0..k).map(|x| Symbol::Pitch(60 + x)).collect()
    }

    fn random_model(n: usize, a: u8, k: usize, l: usize, seed: u64) -> Model {
        let t = Topology::new(k, l, vec![alpha(a); n], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..t.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Model::from_dense(t, theta, Default::default()).unwrap()
    }

    #[test]
    fn proposals_are_uniform_over_cells() {
        let m = random_model(4, 3, 1, 0, 1);
        let plan = CellPlan::new(&m, 10, &ConstraintSet::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 1_000_000;
        let mut counts = vec![0u64; 40];
        for _ in 0..draws {
            let (v, j, _) = propose(&plan, &mut rng).unwrap();
            counts[v * 10 + j] += 1;
        }
        let e = draws as f64 / 40.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 39 degrees of freedom; 99.9% quantile is about 72.1
        assert!(chi2 < 72.1, "chi2 = {chi2}");
        let sigma = (e * (1.0 - 1.0 / 40.0)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - e).abs() < 5.0 * sigma));
    }

    #[test]
    fn forced_cell_is_always_proposed() {
        let m = random_model(2, 3, 1, 1, 3);
        let mut cs = ConstraintSet::new();
        for v in 0..2 {
            for j in 0..4 {
                if (v, j) != (1, 2) {
                    cs.pin(v, j, Symbol::Pitch(61)).unwrap();
                }
            }
        }
        cs.restrict(1, 2, [Symbol::Pitch(60)]).unwrap();
        let plan = CellPlan::new(&m, 4, &cs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(propose(&plan, &mut rng).unwrap(), (1, 2, 0));
        }
        cs.pins.clear();
        cs.ranges.clear();
        for v in 0..2 {
            cs.pin_voice(v, &[Symbol::Pitch(60); 4]).unwrap();
        }
        let plan = CellPlan::new(&m, 4, &cs).unwrap();
        assert!(matches!(propose(&plan, &mut rng), Err(Error::FullyPinned)));
        assert!(matches!(run(&m, 4, &cs, &SamplerConfig::with_steps(10, 0)), Err(Error::FullyPinned)));
    }

    #[test]
    fn self_moves_and_zero_model_accept() {
        let m = random_model(2, 3, 1, 1, 4);
        let seq = ChordSequence::new(vec![alpha(3), alpha(3)]).unwrap();
        assert_eq!(acceptance_ratio(&m, &seq, 0, 1, Symbol::Pitch(61)).unwrap(), 1.0);
        let z = Model::zeros(m.topology.clone());
        assert_eq!(acceptance_ratio(&z, &seq, 1, 2, Symbol::Pitch(60)).unwrap(), 1.0);
    }

    #[test]
    fn incremental_ratio_matches_full_energy() {
        let m = random_model(3, 4, 2, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let len = 12;
        for _ in 0..2000 {
            let rows = (0..3).map(|_| (0..len).map(|_| Symbol::Pitch(60 + rng.random_range(0..4))).collect()).collect();
            let s = ChordSequence::new(rows).unwrap();
            let (v, j, c) = (rng.random_range(0..3), rng.random_range(0..len), Symbol::Pitch(60 + rng.random_range(0..4)));
            let mut s2 = s.clone();
            s2.set(v, j, c);
            let full = (energy(&s, &m).unwrap() - energy(&s2, &m).unwrap()).exp();
            let inc = acceptance_ratio(&m, &s, v, j, c).unwrap();
            assert!((inc - full).abs() <= 1e-9 * full, "{inc} vs {full}");
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let m = random_model(3, 5, 2, 1, 7);
        let cfg = SamplerConfig { record_trajectory: true, ..SamplerConfig::with_steps(5000, 42) };
        let a = run(&m, 20, &ConstraintSet::new(), &cfg).unwrap();
        let b = run(&m, 20, &ConstraintSet::new(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectory.len(), 2500 / 60);
        let c = run(&m, 20, &ConstraintSet::new(), &SamplerConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.sequence, c.sequence);
    }

    #[test]
    fn budget_formula() {
        let t = Topology::new(1, 0, vec![alpha(20); 4], None).unwrap();
        let m = Model::zeros(t);
        assert_eq!(default_step_budget(&m, 100), 160_000);
        assert_eq!(default_step_budget(&m, 0), 0);
        let p = plan_run(&m, 100, &SamplerConfig::default()).unwrap();
        assert_eq!(p, RunPlan { total_steps: 160_000, burn_in: 80_000, thinning: 400 });
        let bad = SamplerConfig { burn_in: Some(10), ..SamplerConfig::with_steps(10, 0) };
        assert!(matches!(plan_run(&m, 5, &bad), Err(Error::Config(_))));
        let bad = SamplerConfig { thinning: Some(0), ..SamplerConfig::with_steps(10, 0) };
        assert!(matches!(plan_run(&m, 5, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn constraint_file_round_trip_and_errors() {
        let text = r#"{"pins": [[0, 1, 60], [1, 0, "R"]], "ranges": [[0, 2, [60, 61]]]}"#;
        let cs = ConstraintSet::parse(text).unwrap();
        assert_eq!(ConstraintSet::parse(&cs.to_json()).unwrap(), cs);
        assert!(matches!(
            ConstraintSet::parse(r#"{"pins": [[0, 1, 60]], "ranges": [[0, 1, [60]]]}"#),
            Err(Error::Constraint(_))
        ));
        assert!(matches!(ConstraintSet::parse(r#"{"ranges": [[0, 1, []]]}"#), Err(Error::Constraint(_))));
        let m = random_model(2, 3, 1, 0, 8);
        let mut cs = ConstraintSet::new();
        cs.pin(0, 0, Symbol::Pitch(90)).unwrap();
        assert!(matches!(CellPlan::new(&m, 4, &cs), Err(Error::Alphabet(_))));
        let mut cs = ConstraintSet::new();
        cs.pin(0, 9, Symbol::Pitch(60)).unwrap();
        assert!(matches!(CellPlan::new(&m, 4, &cs), Err(Error::Constraint(_))));
    }

    #[test]
    fn pinned_melody_is_verbatim() {
        let m = random_model(3, 4, 2, 1, 9);
        let melody: Vec<Symbol> = (0..16).map(|j| Symbol::Pitch(60 + (j % 4) as u8)).collect();
        let mut cs = ConstraintSet::new();
        cs.pin_voice(0, &melody).unwrap();
        let out = run(&m, 16, &cs, &SamplerConfig::with_steps(3000, 1)).unwrap();
        assert_eq!(out.sequence.row(0), &melody[..]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn recorded_states_honor_constraints(
            seed in any::<u64>(),
            pins in proptest::collection::vec((0usize..3, 0usize..8, 0u8..4), 0..10),
            ranges in proptest::collection::vec((0usize..3, 0usize..8, proptest::collection::btree_set(0u8..4, 1..3)), 0..6),
        ) {
            let m = random_model(3, 4, 2, 1, seed % 7);
            let mut cs = ConstraintSet::new();
            for (v, j, s) in pins {
                let _ = cs.pin(v, j, Symbol::Pitch(60 + s));
            }
            for (v, j, set) in ranges {
                let _ = cs.restrict(v, j, set.into_iter().map(|s| Symbol::Pitch(60 + s)));
            }
            let cfg = SamplerConfig { thinning: Some(1), burn_in: Some(0), record_trajectory: true,
                ..SamplerConfig::with_steps(400, seed) };
            let out = run(&m, 8, &cs, &cfg).unwrap();
            prop_assert!(cs.satisfied_by(&out.sequence));
            for (_, s) in &out.trajectory {
                prop_assert!(cs.satisfied_by(s));
            }
        }
    }
}
