//! Experiment configuration read from TOML.
//!
//! ```toml
//! experiment = "maxcut-ensemble"
//! out = "results/maxcut"
//! shots = 100
//!
//! [seeds]
//! master = 7
//! streams = 1
//!
//! [graphs]
//! kind = "random-regular"
//! n = 16
//! degree = 3
//! count = 256
//! ```
//!
//! `seeds.master` is required; nothing is seeded from the clock. `streams`
//! is the number of independently seeded repetitions per instance and
//! method. `out` and `threads` do not enter the configuration hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nnha_core::anneal::{AnnealRun, ClusterMode, DEFAULT_DISSIPATION};
use nnha_core::samplers::{AnnealProtocol, QuenchParams, RydbergModel};
use nnha_core::spectral::{EigenMode, SpectralOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MaxcutEnsemble,
    Kcut,
    MisGreedy,
    MisCluster,
    Optimize,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MaxcutEnsemble => "maxcut-ensemble",
            Experiment::Kcut => "kcut",
            Experiment::MisGreedy => "mis-greedy",
            Experiment::MisCluster => "mis-cluster",
            Experiment::Optimize => "optimize",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    /// Shots per evaluation: per graph and stream for MaxCut, per ansatz for
    /// k-cut, per stream for greedy MIS.
    #[serde(default = "default_shots")]
    pub shots: usize,
    pub seeds: Seeds,
    pub graphs: GraphSource,
    #[serde(default)]
    pub sampler: Option<SamplerSpec>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub maxcut: MaxcutSection,
    #[serde(default)]
    pub kcut: KcutSection,
    #[serde(default)]
    pub mis: MisSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_shots() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    #[serde(default = "one")]
    pub streams: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSource {
    RandomRegular {
        n: usize,
        degree: usize,
        count: usize,
    },
    Kings {
        rows: usize,
        cols: usize,
        dropout: f64,
        count: usize,
    },
    File {
        paths: Vec<PathBuf>,
    },
}

impl GraphSource {
    pub fn count(&self) -> usize {
        match self {
            GraphSource::RandomRegular { count, .. } | GraphSource::Kings { count, .. } => *count,
            GraphSource::File { paths } => paths.len(),
        }
    }
}

/// `qaoa`, `rydberg`, `uniform`, `constant`, or `file:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SamplerSpec {
    Qaoa,
    Rydberg,
    Uniform,
    Constant,
    File(PathBuf),
}

impl FromStr for SamplerSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "qaoa" => Ok(SamplerSpec::Qaoa),
            "rydberg" => Ok(SamplerSpec::Rydberg),
            "uniform" => Ok(SamplerSpec::Uniform),
            "constant" => Ok(SamplerSpec::Constant),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(SamplerSpec::File(PathBuf::from(p))),
                _ => Err(format!("unknown sampler `{s}`; expected qaoa, rydberg, uniform, constant or file:<path>")),
            },
        }
    }
}

impl TryFrom<String> for SamplerSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<SamplerSpec> for String {
    fn from(s: SamplerSpec) -> String {
        match s {
            SamplerSpec::Qaoa => "qaoa".into(),
            SamplerSpec::Rydberg => "rydberg".into(),
            SamplerSpec::Uniform => "uniform".into(),
            SamplerSpec::Constant => "constant".into(),
            SamplerSpec::File(p) => format!("file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub c6: f64,
    pub spacing: f64,
    pub max_qubits: usize,
    pub max_step: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = RydbergModel::default();
        Self {
            c6: m.c6,
            spacing: m.spacing,
            max_qubits: m.max_qubits,
            max_step: m.max_step,
        }
    }
}

impl ModelSection {
    pub fn model(&self) -> RydbergModel {
        RydbergModel {
            c6: self.c6,
            spacing: self.spacing,
            max_qubits: self.max_qubits,
            max_step: self.max_step,
            ..RydbergModel::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxcutSection {
    pub p_max: usize,
    /// Graphs drawn from the same generator (on their own seeds) whose
    /// mean `<cut>` the angles are optimized for.
    pub train_graphs: usize,
    pub angle_starts: usize,
    pub angle_evals: usize,
    /// Precomputed angles instead of optimization.
    pub angles: Option<PathBuf>,
}

impl Default for MaxcutSection {
    fn default() -> Self {
        Self {
            p_max: 4,
            train_graphs: 8,
            angle_starts: 4,
            angle_evals: 200,
            angles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenChoice {
    Largest,
    Smallest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KcutSection {
    pub k: usize,
    /// `[t, delta]` pairs, us and rad/us.
    pub quench: Vec<[f64; 2]>,
    pub lambdas: Vec<f64>,
    pub eigen: EigenChoice,
    pub normalize_rows: bool,
    pub restarts: usize,
    pub nested: Option<NestedSection>,
}

impl Default for KcutSection {
    fn default() -> Self {
        Self {
            k: 3,
            quench: vec![[0.3, 0.0], [0.8, 5.0], [1.6, 10.0]],
            lambdas: vec![1.0, 1.0, 1.0],
            eigen: EigenChoice::Largest,
            normalize_rows: false,
            restarts: 10,
            nested: None,
        }
    }
}

impl KcutSection {
    pub fn quench_list(&self) -> Vec<QuenchParams> {
        self.quench
            .iter()
            .map(|[t, d]| QuenchParams::new(*t, *d))
            .collect()
    }

    pub fn options(&self) -> SpectralOptions {
        SpectralOptions {
            eigen_mode: match self.eigen {
                EigenChoice::Largest => EigenMode::Largest,
                EigenChoice::Smallest => EigenMode::Smallest,
            },
            normalize_rows: self.normalize_rows,
            restarts: self.restarts,
            ..SpectralOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedSection {
    pub outer: usize,
    pub inner: usize,
    #[serde(default = "three")]
    pub ansatze: usize,
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterChoice {
    Sandpile,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisSection {
    pub t_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub epochs: usize,
    /// One inverse temperature, or one per epoch; `inf` is allowed.
    pub beta: Vec<f64>,
    pub cluster: ClusterChoice,
    pub dissipation: f64,
    pub radius: usize,
    /// Streams whose full trajectories are written out.
    pub trajectory_runs: usize,
}

impl Default for MisSection {
    fn default() -> Self {
        let p = AnnealProtocol::default();
        Self {
            t_max: p.t_max,
            delta_min: p.delta_min,
            delta_max: p.delta_max,
            epochs: 10,
            beta: vec![f64::INFINITY],
            cluster: ClusterChoice::Sandpile,
            dissipation: DEFAULT_DISSIPATION,
            radius: 1,
            trajectory_runs: 5,
        }
    }
}

impl MisSection {
    pub fn protocol(&self) -> AnnealProtocol {
        AnnealProtocol {
            t_max: self.t_max,
            delta_min: self.delta_min,
            delta_max: self.delta_max,
            ..Default::default()
        }
    }

    pub fn run(&self) -> nnha_core::Result<AnnealRun> {
        let cluster = match self.cluster {
            ClusterChoice::Sandpile => ClusterMode::Sandpile {
                dissipation: self.dissipation,
            },
            ClusterChoice::Ball => ClusterMode::Ball {
                radius: self.radius,
            },
        };
        AnnealRun::new(self.beta.clone(), self.epochs, cluster)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineChoice {
    Maxcut,
    Kcut,
    MisGreedy,
    MisCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub pipeline: PipelineChoice,
    /// QAOA layers for the MaxCut pipeline.
    pub p: usize,
    pub max_evals: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub initial: Option<Vec<f64>>,
    /// Clustering seeds per k-cut evaluation.
    pub repetitions: usize,
    /// Fresh streams used to re-score the final parameters.
    pub final_streams: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            pipeline: PipelineChoice::Maxcut,
            p: 1,
            max_evals: 30,
            rho_begin: 0.25,
            rho_end: 1e-3,
            lower: None,
            upper: None,
            initial: None,
            repetitions: 5,
            final_streams: 10,
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Reads and parses `path`; relative file references inside resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GraphSource::File { paths } = &mut self.graphs {
            paths.iter_mut().for_each(fix);
        }
        if let Some(SamplerSpec::File(p)) = &mut self.sampler {
            fix(p);
        }
        if let Some(p) = &mut self.maxcut.angles {
            fix(p);
        }
    }

    /// Sampler in effect: the configured one or the experiment's default.
    pub fn sampler(&self) -> SamplerSpec {
        self.sampler.clone().unwrap_or(match self.experiment {
            Experiment::MaxcutEnsemble => SamplerSpec::Qaoa,
            Experiment::Optimize if self.optimize.pipeline == PipelineChoice::Maxcut => {
                SamplerSpec::Qaoa
            }
            _ => SamplerSpec::Rydberg,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(config_err("shots must be >= 1"));
        }
        if self.seeds.streams == 0 {
            return Err(config_err("seeds.streams must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be >= 1"));
        }
        if self.graphs.count() == 0 {
            return Err(config_err("the graph source yields no instances"));
        }
        match &self.graphs {
            GraphSource::Kings { dropout, .. } if !(0.0..1.0).contains(dropout) => {
                return Err(config_err(format!("dropout {dropout} outside [0, 1)")));
            }
            GraphSource::File { paths } => {
                for p in paths {
                    require_file(p)?;
                }
            }
            _ => {}
        }
        if let Some(p) = &self.maxcut.angles {
            require_file(p)?;
        }
        let sampler = self.sampler();
        if let SamplerSpec::File(p) = &sampler {
            require_file(p)?;
            if self.graphs.count() != 1 {
                return Err(config_err("a shot file pairs with exactly one graph"));
            }
        }
        let allowed: &[&str] = match (self.experiment, self.optimize.pipeline) {
            (Experiment::MaxcutEnsemble, _) => &["qaoa", "uniform"],
            (Experiment::Kcut, _) => &["rydberg", "file"],
            (Experiment::MisGreedy | Experiment::MisCluster, _) => &["rydberg", "constant", "file"],
            // the optimizer needs a parameterized sampler
            (Experiment::Optimize, PipelineChoice::Maxcut) => &["qaoa"],
            (Experiment::Optimize, _) => &["rydberg"],
        };
        let name = String::from(sampler.clone());
        let kind = if name.starts_with("file:") {
            "file"
        } else {
            name.as_str()
        };
        if !allowed.contains(&kind) {
            return Err(config_err(format!(
                "sampler `{name}` does not apply to {}",
                self.experiment
            )));
        }
        match self.experiment {
            Experiment::MaxcutEnsemble => {
                if self.maxcut.angles.is_none()
                    && (self.maxcut.angle_starts == 0 || self.maxcut.angle_evals == 0)
                {
                    return Err(config_err(
                        "angle optimization needs angle_starts and angle_evals >= 1",
                    ));
                }
            }
            Experiment::Kcut => self.validate_kcut()?,
            Experiment::MisGreedy | Experiment::MisCluster => {
                self.mis
                    .protocol()
                    .validate()
                    .map_err(|e| config_err(e.to_string()))?;
                if self.experiment == Experiment::MisCluster {
                    self.mis.run().map_err(|e| config_err(e.to_string()))?;
                }
            }
            Experiment::Optimize => {
                let o = &self.optimize;
                if o.max_evals == 0 || o.final_streams == 0 || o.repetitions == 0 {
                    return Err(config_err(
                        "optimize.max_evals, repetitions and final_streams must be >= 1",
                    ));
                }
                match o.pipeline {
                    PipelineChoice::Kcut => self.validate_kcut()?,
                    PipelineChoice::MisCluster => {
                        self.mis.run().map_err(|e| config_err(e.to_string()))?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn validate_kcut(&self) -> Result<()> {
        let k = &self.kcut;
        if k.k < 2 {
            return Err(config_err(format!("kcut.k must be >= 2, got {}", k.k)));
        }
        if k.restarts == 0 {
            return Err(config_err("kcut.restarts must be >= 1"));
        }
        if k.nested.is_none() && !matches!(self.sampler(), SamplerSpec::File(_)) {
            if k.quench.is_empty() || k.quench.len() != k.lambdas.len() {
                return Err(config_err(format!(
                    "{} quenches with {} weights",
                    k.quench.len(),
                    k.lambdas.len()
                )));
            }
            for q in k.quench_list() {
                q.validate().map_err(|e| config_err(e.to_string()))?;
            }
        }
        if let Some(n) = k.nested {
            if n.outer == 0 || n.inner == 0 || n.ansatze == 0 {
                return Err(config_err(
                    "kcut.nested budgets and ansatz count must be >= 1",
                ));
            }
        }
        Ok(())
    }

    /// Canonical serialization of every field that affects results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(config_err(format!(
            "referenced file {} does not exist",
            p.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        experiment = "maxcut-ensemble"
        [seeds]
        master = 3
        [graphs]
        kind = "random-regular"
        n = 8
        degree = 3
        count = 2
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.shots, 100);
        assert_eq!(c.seeds.streams, 1);
        assert_eq!(c.sampler(), SamplerSpec::Qaoa);
        assert_eq!(c.maxcut.p_max, 4);
    }

    #[test]
    fn seed_is_mandatory_and_unknown_keys_rejected() {
        let no_seed = MINIMAL.replace("[seeds]\n        master = 3", "");
        assert!(ExperimentConfig::parse(&no_seed).is_err());
        let typo = MINIMAL.replace("count = 2", "count = 2\n        cuont = 3");
        assert!(ExperimentConfig::parse(&typo).is_err());
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.threads = Some(4);
        assert_eq!(a.hash(), b.hash());
        b.seeds.master = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn sampler_specs_round_trip() {
        for s in ["qaoa", "rydberg", "uniform", "constant", "file:shots.txt"] {
            let spec: SamplerSpec = s.parse().unwrap();
            assert_eq!(String::from(spec), s);
        }
        assert!("file:".parse::<SamplerSpec>().is_err());
        assert!("annealer".parse::<SamplerSpec>().is_err());
    }

    #[test]
    fn missing_files_fail_validation() {
        let text = MINIMAL.replace(
            "kind = \"random-regular\"\n        n = 8\n        degree = 3\n        count = 2",
            "kind = \"file\"\n        paths = [\"/nonexistent/graph.txt\"]",
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn sampler_must_fit_experiment() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.sampler = Some(SamplerSpec::Rydberg);
        assert!(c.validate().is_err());
    }

    #[test]
    fn infinite_beta_parses() {
        let text = r#"
            experiment = "mis-cluster"
            [seeds]
            master = 1
            [graphs]
            kind = "kings"
            rows = 3
            cols = 3
            dropout = 0.3
            count = 1
            [mis]
            beta = [inf]
        "#;
        let c = ExperimentConfig::parse(text).unwrap();
        c.validate().unwrap();
        assert!(c.mis.beta[0].is_infinite());
    }
}
