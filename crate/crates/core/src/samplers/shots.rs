//! Shot sets, outcome distributions, empirical moments and the shot-file
//! format used to ingest measurements from hardware:
//!
//! ```text
//! nnha-shots v1
//! n 3 M 2
//! # sampler=aquila
//! 010
//! 101
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graphs::BitString;

const MAGIC: &str = "nnha-shots v1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShotMeta {
    pub sampler: String,
    /// Sampler parameters rendered as text, e.g. `t = 1.5`.
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Only set for ingested shots; emulated samplers leave it empty so their
    /// output stays a pure function of the inputs.
    pub timestamp: Option<String>,
}

impl ShotMeta {
    pub fn new(sampler: impl Into<String>) -> Self {
        Self {
            sampler: sampler.into(),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// Ordered, non-empty collection of equal-length bit strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotSet {
    n: usize,
    shots: Vec<BitString>,
    meta: ShotMeta,
}

impl ShotSet {
    pub fn new(shots: Vec<BitString>, meta: ShotMeta) -> Result<Self> {
        let Some(first) = shots.first() else {
            return Err(Error::Parameter(
                "a shot set needs at least one shot".into(),
            ));
        };
        let n = first.len();
        if let Some(bad) = shots.iter().position(|s| s.len() != n) {
            return Err(Error::Dimension(format!(
                "shot {bad} has {} bits, expected {n}",
                shots[bad].len()
            )));
        }
        Ok(Self { n, shots, meta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn shots(&self) -> &[BitString] {
        &self.shots
    }

    pub fn meta(&self) -> &ShotMeta {
        &self.meta
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BitString> {
        self.shots.iter()
    }
}

impl<'a> IntoIterator for &'a ShotSet {
    type Item = &'a BitString;
    type IntoIter = std::slice::Iter<'a, BitString>;

    fn into_iter(self) -> Self::IntoIter {
        self.shots.iter()
    }
}

/// Measurement distribution over `2^n` outcomes, stored as a cumulative table
/// so repeated sampling from one (expensive) state is cheap.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    n: usize,
    cumulative: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn from_probabilities(n: usize, probs: &[f64]) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::Dimension(format!(
                "{} probabilities for {n} qubits",
                probs.len()
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|&p| {
                acc += p.max(0.0);
                acc
            })
            .collect::<Vec<_>>();
        if !(acc > 0.0) {
            return Err(Error::Numerical("distribution has no mass".into()));
        }
        Ok(Self { n, cumulative })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probability(&self, index: usize) -> f64 {
        let total = self.total();
        let below = if index == 0 {
            0.0
        } else {
            self.cumulative[index - 1]
        };
        (self.cumulative[index] - below) / total
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.cumulative.len())
            .map(|i| self.probability(i))
            .collect()
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let u = rng.random::<f64>() * self.total();
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        BitString::from_index(idx, self.n)
    }

    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<BitString> {
        (0..shots).map(|_| self.draw(rng)).collect()
    }

    /// Index of the most probable outcome (lowest index on ties).
    pub fn mode(&self) -> BitString {
        let mut best = 0;
        for i in 1..self.cumulative.len() {
            if self.probability(i) > self.probability(best) {
                best = i;
            }
        }
        BitString::from_index(best, self.n)
    }
}

/// Empirical `<n_i>` and `<n_i n_j>` over a shot set.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupations {
    pub means: DVector<f64>,
    pub second_moments: DMatrix<f64>,
}

pub fn estimate_occupations(shots: &ShotSet) -> Occupations {
    let n = shots.n();
    let mut counts = DMatrix::<f64>::zeros(n, n);
    let mut ones = Vec::with_capacity(n);
    for shot in shots {
        ones.clear();
        ones.extend(shot.ones_positions());
        for (a, &i) in ones.iter().enumerate() {
            for &j in &ones[a..] {
                counts[(i, j)] += 1.0;
            }
        }
    }
    let m = shots.len() as f64;
    for i in 0..n {
        for j in i + 1..n {
            counts[(j, i)] = counts[(i, j)];
        }
    }
    let second_moments = counts / m;
    let means = second_moments.diagonal();
    Occupations {
        means,
        second_moments,
    }
}

/// `count` independent uniformly random strings: the no-quantum limit of the
/// MaxCut pipeline.
pub fn uniform_sample(n: usize, shots: usize, seed: u64) -> Result<ShotSet> {
    let mut rng = crate::seed::rng(seed);
    let list = (0..shots)
        .map(|_| BitString::new((0..n).map(|_| rng.random::<bool>()).collect()))
        .collect();
    ShotSet::new(list, ShotMeta::new("uniform").with_seed(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantValue {
    Zeros,
    Ones,
}

pub fn constant_sample(n: usize, value: ConstantValue, shots: usize) -> Result<ShotSet> {
    let shot = match value {
        ConstantValue::Zeros => BitString::zeros(n),
        ConstantValue::Ones => BitString::ones(n),
    };
    let name = match value {
        ConstantValue::Zeros => "constant-zeros",
        ConstantValue::Ones => "constant-ones",
    };
    ShotSet::new(vec![shot; shots], ShotMeta::new(name))
}

pub fn write_shots(shots: &ShotSet) -> String {
    let mut out = format!("{MAGIC}\nn {} M {}\n", shots.n(), shots.len());
    let meta = shots.meta();
    if !meta.sampler.is_empty() {
        let _ = writeln!(out, "# sampler={}", meta.sampler);
    }
    if let Some(seed) = meta.seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    if let Some(ts) = &meta.timestamp {
        let _ = writeln!(out, "# timestamp={ts}");
    }
    for (k, v) in &meta.params {
        let _ = writeln!(out, "# {k}={v}");
    }
    for s in shots {
        let _ = writeln!(out, "{s}");
    }
    out
}

pub fn save_shots(shots: &ShotSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_shots(shots)).map_err(|e| Error::io(path, e))
}

pub fn load_shots(path: impl AsRef<Path>) -> Result<ShotSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_shots(&text, path)
}

pub fn parse_shots(text: &str, origin: &Path) -> Result<ShotSet> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let format_err = |msg: String| Error::Format {
        path: origin.to_path_buf(),
        msg,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((no, other)) => {
            return Err(parse_err(
                no,
                format!("expected {MAGIC:?}, found {other:?}"),
            ))
        }
        None => return Err(format_err("empty file".into())),
    }
    let (no, header) = lines
        .next()
        .ok_or_else(|| format_err("missing `n <qubits> M <shots>` line".into()))?;
    let (n, m) = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["n", n, "M", m] => (
            n.parse::<usize>()
                .map_err(|_| parse_err(no, format!("bad qubit count {n:?}")))?,
            m.parse::<usize>()
                .map_err(|_| parse_err(no, format!("bad shot count {m:?}")))?,
        ),
        _ => {
            return Err(parse_err(
                no,
                format!("expected `n <qubits> M <shots>`, found {header:?}"),
            ))
        }
    };

    let mut meta = ShotMeta::default();
    let mut shots = Vec::with_capacity(m);
    for (no, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            if !shots.is_empty() {
                return Err(parse_err(no, "metadata after the first shot".into()));
            }
            let (k, v) = rest.trim().split_once('=').ok_or_else(|| {
                parse_err(no, format!("metadata line {line:?} is not `# key=value`"))
            })?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "sampler" => meta.sampler = v.to_string(),
                "seed" => {
                    meta.seed = Some(
                        v.parse()
                            .map_err(|_| parse_err(no, format!("bad seed {v:?}")))?,
                    )
                }
                "timestamp" => meta.timestamp = Some(v.to_string()),
                _ => {
                    meta.params.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bits: BitString = line.trim().parse().map_err(|msg| parse_err(no, msg))?;
        if bits.len() != n {
            return Err(format_err(format!(
                "line {no}: shot has {} bits, header says {n}",
                bits.len()
            )));
        }
        shots.push(bits);
    }
    if shots.is_empty() {
        return Err(format_err("no shots".into()));
    }
    if shots.len() != m {
        return Err(format_err(format!(
            "header declares {m} shots, found {}",
            shots.len()
        )));
    }
    ShotSet::new(shots, meta)
}
