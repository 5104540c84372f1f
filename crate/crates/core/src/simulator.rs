//! Markov-chain generator of atomic-event traces and labeled datasets.
//!
//! A dataset mixes two kinds of traces: background traces from a neutral
//! chain that rarely completes any rule, and scenario traces from the base
//! chain nudged toward one rule's events. Every record draws from its own
//! random stream, seeded from the configuration seed and the record index,
//! so any record can be regenerated alone.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::DatasetRecord;
use crate::labeler::Priority;
use crate::model::{parse_ae_token, AeTrace, AtomicEvent, ComplexEvent, NUM_ATOMIC};
use crate::rules::RuleSet;

/// Self-transition probability of every class in the default chain.
pub const DEFAULT_DWELL: f64 = 0.5;
/// P(wash | flush_toilet) in the default chain.
pub const FLUSH_WASH_BIAS: f64 = 0.7;
/// Dwell of brush and wash in the neutral chain.
pub const NEUTRAL_DWELL: f64 = 0.1;
/// Factor applied to transitions into eat, drink, flush_toilet and brush
/// in the neutral chain.
pub const NEUTRAL_SUPPRESSION: f64 = 0.05;
/// Factor applied to transitions into a scenario's key events.
pub const SCENARIO_BOOST: f64 = 3.0;
pub const DEFAULT_BACKGROUND_FRACTION: f64 = 0.6;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("{row}: probabilities sum to {sum}, expected 1")]
    NotStochastic { row: String, sum: f64 },
    #[error("{row}: entry {value} is negative or not finite")]
    BadEntry { row: String, value: f64 },
    #[error("dwell stretch must be at least 1")]
    BadStretch,
    #[error("invalid generation config: {0}")]
    Config(String),
}

type Row = [f64; NUM_ATOMIC];

/// First-order chain over the nine atomic events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub initial: Row,
    /// `matrix[a][b]` is P(next = b | current = a).
    pub matrix: [Row; NUM_ATOMIC],
    /// Each sampled event is repeated this many windows.
    pub dwell_stretch: u32,
}

fn normalize(row: &mut Row) {
    let s: f64 = row.iter().sum();
    for x in row.iter_mut() {
        *x /= s;
    }
}

/// Sets the diagonal entry to `d`, scaling the rest of the row to `1 - d`.
fn set_dwell(row: &mut Row, i: usize, d: f64) {
    let off: f64 = row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, x)| x)
        .sum();
    for (j, x) in row.iter_mut().enumerate() {
        *x = if j == i { d } else { *x * (1.0 - d) / off };
    }
}

fn uniform_row(i: usize, dwell: f64) -> Row {
    let mut row = [(1.0 - dwell) / (NUM_ATOMIC - 1) as f64; NUM_ATOMIC];
    row[i] = dwell;
    row
}

impl TransitionModel {
    pub fn new(
        initial: Row,
        matrix: [Row; NUM_ATOMIC],
        dwell_stretch: u32,
    ) -> Result<Self, SimError> {
        let m = TransitionModel {
            initial,
            matrix,
            dwell_stretch,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.dwell_stretch < 1 {
            return Err(SimError::BadStretch);
        }
        let rows = std::iter::once(("initial".to_string(), &self.initial)).chain(
            AtomicEvent::ALL
                .iter()
                .map(|a| (a.as_str().to_string(), &self.matrix[a.index()])),
        );
        for (name, row) in rows {
            if let Some(&value) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(SimError::BadEntry { row: name, value });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(SimError::NotStochastic { row: name, sum });
            }
        }
        Ok(())
    }

    pub fn prob(&self, from: AtomicEvent, to: AtomicEvent) -> f64 {
        self.matrix[from.index()][to.index()]
    }

    pub fn with_stretch(mut self, dwell_stretch: u32) -> Self {
        self.dwell_stretch = dwell_stretch;
        self
    }

    /// Plain-text form: a `stretch` line, an `initial` line and one row per
    /// event, columns in the order given by the `columns` line.
    pub fn to_text(&self) -> String {
        let names: Vec<&str> = AtomicEvent::ALL.iter().map(|a| a.as_str()).collect();
        let fmt_row = |r: &Row| {
            r.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        let _ = writeln!(s, "# rows: current event; columns: next event");
        let _ = writeln!(s, "columns {}", names.join(" "));
        let _ = writeln!(s, "stretch {}", self.dwell_stretch);
        let _ = writeln!(s, "initial {}", fmt_row(&self.initial));
        for a in AtomicEvent::ALL {
            let _ = writeln!(s, "{} {}", a.as_str(), fmt_row(&self.matrix[a.index()]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut columns: Vec<usize> = (0..NUM_ATOMIC).collect();
        let mut stretch = 1;
        let mut initial: Option<Row> = None;
        let mut rows: [Option<Row>; NUM_ATOMIC] = [None; NUM_ATOMIC];
        let err = |line: usize, reason: String| SimError::Format { line, reason };
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            let parse_row = |rest: &[&str]| -> Result<Row, SimError> {
                if rest.len() != NUM_ATOMIC {
                    return Err(err(
                        n,
                        format!("expected {NUM_ATOMIC} values, found {}", rest.len()),
                    ));
                }
                let mut row = [0.0; NUM_ATOMIC];
                for (k, w) in rest.iter().enumerate() {
                    let v: f64 = w
                        .parse()
                        .map_err(|_| err(n, format!("`{w}` is not a number")))?;
                    row[columns[k]] = v;
                }
                Ok(row)
            };
            match head {
                "columns" => {
                    let mut cols = Vec::new();
                    for w in &rest {
                        let a = parse_ae_token(w).map_err(|e| err(n, e.to_string()))?;
                        if cols.contains(&a.index()) {
                            return Err(err(n, format!("column `{w}` repeated")));
                        }
                        cols.push(a.index());
                    }
                    if cols.len() != NUM_ATOMIC {
                        return Err(err(n, format!("expected {NUM_ATOMIC} columns")));
                    }
                    columns = cols;
                }
                "stretch" => {
                    stretch = match rest.as_slice() {
                        [v] => v
                            .parse()
                            .map_err(|_| err(n, format!("`{v}` is not a count")))?,
                        _ => return Err(err(n, "expected one value".into())),
                    };
                }
                "initial" => initial = Some(parse_row(&rest)?),
                name => {
                    let a = parse_ae_token(name).map_err(|e| err(n, e.to_string()))?;
                    if rows[a.index()].is_some() {
                        return Err(err(n, format!("row `{name}` repeated")));
                    }
                    rows[a.index()] = Some(parse_row(&rest)?);
                }
            }
        }
        let mut matrix = [[0.0; NUM_ATOMIC]; NUM_ATOMIC];
        for a in AtomicEvent::ALL {
            matrix[a.index()] = rows[a.index()].ok_or_else(|| SimError::Format {
                line: text.lines().count(),
                reason: format!("missing row `{a}`"),
            })?;
        }
        let initial = initial.unwrap_or([1.0 / NUM_ATOMIC as f64; NUM_ATOMIC]);
        TransitionModel::new(initial, matrix, stretch)
    }

    /// SHA-256 of the text form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Uniform start, dwell 0.5 and uniform residual mass, except that
/// flush_toilet is followed by wash with probability 0.7 (the remaining
/// 0.3 is spread uniformly over the other eight classes).
pub fn default_transition_model() -> TransitionModel {
    let mut matrix = [[0.0; NUM_ATOMIC]; NUM_ATOMIC];
    for (i, row) in matrix.iter_mut().enumerate() {
        *row = uniform_row(i, DEFAULT_DWELL);
    }
    let f = AtomicEvent::FlushToilet.index();
    let w = AtomicEvent::Wash.index();
    matrix[f] = [(1.0 - FLUSH_WASH_BIAS) / (NUM_ATOMIC - 1) as f64; NUM_ATOMIC];
    matrix[f][w] = FLUSH_WASH_BIAS;
    TransitionModel {
        initial: [1.0 / NUM_ATOMIC as f64; NUM_ATOMIC],
        matrix,
        dwell_stretch: 1,
    }
}

/// Background chain derived from `base`: no flush→wash bias, short brush
/// and wash dwell, rare eat/drink/flush/brush, and no walk right after
/// work, so that rule completions become rare.
pub fn neutral_model(base: &TransitionModel) -> TransitionModel {
    use AtomicEvent::*;
    let mut m = base.clone();
    m.matrix[FlushToilet.index()] = uniform_row(FlushToilet.index(), DEFAULT_DWELL);
    for a in [Brush, Wash] {
        set_dwell(&mut m.matrix[a.index()], a.index(), NEUTRAL_DWELL);
    }
    let rare = [Eat, Drink, FlushToilet, Brush];
    for a in AtomicEvent::ALL {
        let row = &mut m.matrix[a.index()];
        for c in rare {
            if c != a {
                row[c.index()] *= NEUTRAL_SUPPRESSION;
            }
        }
        if matches!(a, Type | Click) {
            row[Walk.index()] = 0.0;
        }
        normalize(row);
    }
    for c in rare {
        m.initial[c.index()] *= NEUTRAL_SUPPRESSION;
    }
    normalize(&mut m.initial);
    m
}

struct Scenario {
    key: &'static [AtomicEvent],
    dwell: &'static [(AtomicEvent, f64)],
    fixed: &'static [(AtomicEvent, AtomicEvent, f64)],
}

fn scenario(ce: ComplexEvent) -> Scenario {
    use AtomicEvent::*;
    let s = |key, dwell, fixed| Scenario { key, dwell, fixed };
    match ce.id() {
        1 => s(
            &[FlushToilet, Type, Click],
            &[],
            &[(FlushToilet, Wash, 0.3)],
        ),
        2 => s(&[Eat, Drink], &[], &[]),
        3 => s(&[Brush], &[(Brush, 0.8)], &[]),
        4 => s(&[Brush, Eat, Drink], &[], &[]),
        5 => s(&[Sit, Type, Click, Walk], &[], &[]),
        6 => s(&[Wash], &[(Wash, 0.85)], &[]),
        7 => s(&[Brush], &[(Brush, 0.95)], &[]),
        8 => s(&[Eat], &[(Sit, 0.97), (Walk, 0.97)], &[]),
        9 => s(&[Type], &[(Type, 0.2)], &[]),
        10 => s(&[Sit, Click], &[(Click, 0.7)], &[]),
        _ => s(&[], &[], &[]),
    }
}

/// `base` nudged toward the events of rule `ce`: transitions into its key
/// events are boosted and some dwell times changed.
pub fn scenario_model(base: &TransitionModel, ce: ComplexEvent) -> TransitionModel {
    let sc = scenario(ce);
    let mut m = base.clone();
    for a in AtomicEvent::ALL {
        let i = a.index();
        let row = &mut m.matrix[i];
        for c in sc.key {
            if *c != a {
                row[c.index()] *= SCENARIO_BOOST;
            }
        }
        for &(from, to, p) in sc.fixed {
            if from == a {
                let rest: f64 = row.iter().sum::<f64>() - row[to.index()];
                for x in row.iter_mut() {
                    *x *= (1.0 - p) / rest;
                }
                row[to.index()] = p;
            }
        }
        if let Some(&(_, d)) = sc.dwell.iter().find(|(x, _)| *x == a) {
            set_dwell(row, i, d);
        }
        normalize(row);
    }
    for c in sc.key {
        m.initial[c.index()] *= SCENARIO_BOOST;
    }
    normalize(&mut m.initial);
    m
}

/// Precomputed samplers for one chain.
struct Chain {
    initial: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
    stretch: usize,
}

impl Chain {
    fn new(m: &TransitionModel) -> Self {
        Chain {
            initial: WeightedIndex::new(m.initial).expect("validated model"),
            rows: m
                .matrix
                .iter()
                .map(|r| WeightedIndex::new(r).expect("validated model"))
                .collect(),
            stretch: m.dwell_stretch.max(1) as usize,
        }
    }

    fn sample<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<AtomicEvent> {
        let mut out = Vec::with_capacity(len);
        let mut cur = self.initial.sample(rng);
        loop {
            for _ in 0..self.stretch {
                if out.len() == len {
                    return out;
                }
                out.push(AtomicEvent::ALL[cur]);
            }
            cur = self.rows[cur].sample(rng);
        }
    }
}

/// Samples `len` windows from `model` with a generator seeded by `seed`.
pub fn sample_trace(model: &TransitionModel, len: usize, seed: u64) -> AeTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trace_with(model, len, &mut rng)
}

pub fn sample_trace_with<R: Rng>(model: &TransitionModel, len: usize, rng: &mut R) -> AeTrace {
    assert!(len >= 1, "trace length must be positive");
    AeTrace::new(Chain::new(model).sample(len, rng)).expect("non-empty trace")
}

/// Seed of record `index`, a splitmix64 mix of the run seed and index.
pub fn record_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

/// Named dataset sizes and lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Train,
    Val,
    Test,
    Ood15,
    Ood30,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Train,
        Preset::Val,
        Preset::Test,
        Preset::Ood15,
        Preset::Ood30,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Train => "train",
            Preset::Val => "val",
            Preset::Test => "test",
            Preset::Ood15 => "ood15",
            Preset::Ood30 => "ood30",
        }
    }

    /// `(num_traces, trace_len, dwell_stretch)`.
    pub fn shape(self) -> (usize, usize, u32) {
        match self {
            Preset::Train => (10_000, 60, 1),
            Preset::Val | Preset::Test => (2_000, 60, 1),
            Preset::Ood15 => (2_000, 180, 3),
            Preset::Ood30 => (2_000, 360, 6),
        }
    }

    pub fn config(self, seed: u64) -> GenerationConfig {
        let (num_traces, trace_len, dwell_stretch) = self.shape();
        GenerationConfig {
            num_traces,
            trace_len,
            seed,
            dwell_stretch,
            id_prefix: self.name().to_string(),
            ..GenerationConfig::default()
        }
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub num_traces: usize,
    pub trace_len: usize,
    pub seed: u64,
    /// Repetition factor applied to every chain used for this dataset.
    pub dwell_stretch: u32,
    /// Share of records drawn from the neutral chain.
    pub background_fraction: f64,
    /// Relative weights of the scenario chains for e1..e10; `None` draws
    /// non-background records from the base chain itself.
    pub scenario_weights: Option<Vec<f64>>,
    pub id_prefix: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            num_traces: 10_000,
            trace_len: 60,
            seed: 0,
            dwell_stretch: 1,
            background_fraction: DEFAULT_BACKGROUND_FRACTION,
            scenario_weights: Some(vec![1.0; 10]),
            id_prefix: "train".to_string(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.num_traces == 0 {
            return bad("num_traces must be positive");
        }
        if self.trace_len == 0 {
            return bad("trace_len must be positive");
        }
        if self.dwell_stretch == 0 {
            return bad("dwell_stretch must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.background_fraction) {
            return bad("background_fraction must lie in [0, 1]");
        }
        if let Some(w) = &self.scenario_weights {
            if w.len() != 10 {
                return bad("scenario_weights needs one weight per class e1..e10");
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return bad("scenario_weights must be non-negative with a positive sum");
            }
        }
        if self.id_prefix.is_empty() {
            return bad("id_prefix must not be empty");
        }
        Ok(())
    }

    /// Id of record `index`, zero padded so ids sort in index order.
    pub fn record_id(&self, index: usize) -> String {
        let width = (self.num_traces.saturating_sub(1)).to_string().len().max(6);
        format!("{}-{index:0width$}", self.id_prefix)
    }
}

/// Generates and labels `cfg.num_traces` records from `base` and the
/// chains derived from it.
pub fn generate_dataset(
    rules: &RuleSet,
    base: &TransitionModel,
    cfg: &GenerationConfig,
    priority: &Priority,
) -> Result<Vec<DatasetRecord>, SimError> {
    cfg.validate()?;
    base.validate()?;
    let base = base.clone().with_stretch(cfg.dwell_stretch);
    let background = Chain::new(&neutral_model(&base));
    let plain = Chain::new(&base);
    let scenarios: Vec<Chain> = ComplexEvent::positive()
        .map(|ce| Chain::new(&scenario_model(&base, ce)))
        .collect();
    let pick = cfg
        .scenario_weights
        .as_ref()
        .map(|w| WeightedIndex::new(w).expect("validated weights"));

    let records = (0..cfg.num_traces)
        .into_par_iter()
        .map(|i| {
            let seed = record_seed(cfg.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chain = if rng.random::<f64>() < cfg.background_fraction {
                &background
            } else if let Some(p) = &pick {
                &scenarios[p.sample(&mut rng)]
            } else {
                &plain
            };
            let trace = chain.sample(cfg.trace_len, &mut rng);
            DatasetRecord::label(cfg.record_id(i), seed, trace, rules, priority)
        })
        .collect();
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use AtomicEvent::*;

    #[test]
    fn default_model_entries() {
        let m = default_transition_model();
        m.validate().unwrap();
        assert_eq!(m.prob(FlushToilet, Wash), 0.7);
        assert_eq!(m.prob(Walk, Walk), 0.5);
        assert_eq!(m.prob(Walk, Sit), 0.0625);
    }

    #[test]
    fn derived_models_are_stochastic() {
        let base = default_transition_model();
        neutral_model(&base).validate().unwrap();
        for ce in ComplexEvent::positive() {
            scenario_model(&base, ce).validate().unwrap();
        }
        assert!((scenario_model(&base, ComplexEvent::of(6)).prob(Wash, Wash) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let m = scenario_model(&default_transition_model(), ComplexEvent::of(8)).with_stretch(3);
        let back = TransitionModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
    }

    #[test]
    fn text_rejects_bad_rows() {
        let text = default_transition_model()
            .to_text()
            .replace("walk 0.5 ", "walk 0.6 ");
        assert!(matches!(
            TransitionModel::from_text(&text),
            Err(SimError::NotStochastic { row, .. }) if row == "walk"
        ));
        let text = default_transition_model()
            .to_text()
            .replace("stretch 1", "stretch 0");
        assert_eq!(TransitionModel::from_text(&text), Err(SimError::BadStretch));
    }

    #[test]
    fn degenerate_chain_and_stretch() {
        let mut m = default_transition_model();
        m.initial = [0.0; NUM_ATOMIC];
        m.initial[Wash.index()] = 1.0;
        m.matrix[Wash.index()] = [0.0; NUM_ATOMIC];
        m.matrix[Wash.index()][Wash.index()] = 1.0;
        assert_eq!(sample_trace(&m, 6, 1).events(), &[Wash; 6]);
        let m = default_transition_model().with_stretch(3);
        let t = sample_trace(&m, 10, 5);
        for chunk in t.events().chunks(3) {
            assert!(chunk.iter().all(|a| *a == chunk[0]));
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let m = default_transition_model();
        assert_eq!(sample_trace(&m, 60, 42), sample_trace(&m, 60, 42));
        assert_ne!(sample_trace(&m, 60, 42), sample_trace(&m, 60, 43));
    }

    #[test]
    fn presets() {
        assert_eq!(Preset::Ood30.config(1).trace_len, 360);
        assert_eq!("ood15".parse::<Preset>().unwrap().shape(), (2000, 180, 3));
        assert_eq!(Preset::Val.config(0).record_id(7), "val-000007");
    }
}
