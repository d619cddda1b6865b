//! Shot-based estimates of the post-processed objective `<C(F({z}))>`.

use crate::anneal::{
    run_cluster_sa, AnnealRun, ConstantReservoir, DistributionReservoir, Reservoir,
};
use crate::error::{Error, Result};
use crate::graphs::{BitString, Graph};
use crate::postprocess::{flip_shots, repair_shots};
use crate::samplers::{
    anneal_distribution, constant_sample, AnnealProtocol, ConstantValue, QaoaInstance, QaoaParams,
    QuenchParams, RydbergModel,
};
use crate::seed;
use crate::spectral::{ansatz_distributions, kcut_from_shots, sample_ansatze, SpectralOptions};

use super::dfo::Evaluation;

const TAG_SAMPLE: u64 = 1;
const TAG_POST: u64 = 2;

/// Where the MIS pipelines get raw strings from.
#[derive(Debug, Clone, Copy)]
pub enum MisSource<'a> {
    /// Adiabatic sweep; parameters are `[t_max, delta_min, delta_max]`.
    Anneal(&'a RydbergModel),
    /// Parameter-free constant strings.
    Constant(ConstantValue),
}

#[derive(Debug, Clone)]
pub enum Pipeline<'a> {
    /// QAOA shots, greedy flip per shot; value is the cut. Parameters are
    /// `[gamma_1..gamma_p, beta_1..beta_p]`.
    MaxCut {
        graph: &'a Graph,
        qaoa: &'a QaoaInstance,
    },
    /// Spectral k-cut; parameters are `[t_1, delta_1, .., t_A, delta_A,
    /// lambda_1..lambda_A]`. Each evaluation draws the shots once and
    /// averages the cut over `repetitions` clustering seeds.
    KCut {
        graph: &'a Graph,
        model: &'a RydbergModel,
        k: usize,
        options: SpectralOptions,
        repetitions: usize,
    },
    /// Greedy repair per shot; value is the set size.
    MisGreedy {
        graph: &'a Graph,
        source: MisSource<'a>,
    },
    /// One annealing chain per "shot"; value is the chain's best size.
    MisCluster {
        graph: &'a Graph,
        source: MisSource<'a>,
        run: &'a AnnealRun,
    },
}

#[derive(Debug, Clone)]
pub struct ObjectiveSpec<'a> {
    pub pipeline: Pipeline<'a>,
    /// Shots per evaluation (per ansatz for k-cut, chains for cluster MIS).
    pub shots: usize,
}

impl<'a> ObjectiveSpec<'a> {
    pub fn new(pipeline: Pipeline<'a>, shots: usize) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Parameter("shots per evaluation must be >= 1".into()));
        }
        Ok(Self { pipeline, shots })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(len)`; NaN for a single value.
    pub stderr: f64,
    /// Raw quantum shots consumed.
    pub shots: usize,
    pub values: Vec<f64>,
}

impl Estimate {
    pub fn from_values(values: Vec<f64>, shots: usize) -> Self {
        let (mean, stderr) = mean_stderr(&values);
        Self {
            mean,
            stderr,
            shots,
            values,
        }
    }

    pub fn evaluation(&self) -> Evaluation {
        Evaluation {
            value: self.mean,
            stderr: self.stderr,
            shots: self.shots,
        }
    }
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `[t_max, delta_min, delta_max]` with the default pulse shape.
pub fn anneal_protocol_from(params: &[f64]) -> Result<AnnealProtocol> {
    if params.len() != 3 {
        return Err(Error::Dimension(format!(
            "anneal protocol takes 3 parameters, got {}",
            params.len()
        )));
    }
    let p = AnnealProtocol {
        t_max: params[0],
        delta_min: params[1],
        delta_max: params[2],
        ..Default::default()
    };
    p.validate()?;
    Ok(p)
}

/// Splits a k-cut parameter vector into quenches and weights.
pub fn spectral_params_from(params: &[f64]) -> Result<(Vec<QuenchParams>, Vec<f64>)> {
    if params.is_empty() || !params.len().is_multiple_of(3) {
        return Err(Error::Dimension(format!(
            "k-cut parameter vector of length {}",
            params.len()
        )));
    }
    let a = params.len() / 3;
    let quenches = (0..a)
        .map(|i| QuenchParams::new(params[2 * i], params[2 * i + 1]))
        .collect();
    Ok((quenches, params[2 * a..].to_vec()))
}

fn mis_strings(
    graph: &Graph,
    source: MisSource<'_>,
    params: &[f64],
    shots: usize,
    seed: u64,
) -> Result<crate::samplers::ShotSet> {
    match source {
        MisSource::Anneal(model) => {
            let protocol = anneal_protocol_from(params)?;
            let dist = anneal_distribution(graph, &protocol, model)?;
            let draws = dist.sample(shots, &mut seed::rng(seed::derive(seed, TAG_SAMPLE)));
            crate::samplers::ShotSet::new(draws, crate::samplers::anneal_meta(&protocol, seed))
        }
        MisSource::Constant(v) => {
            no_params(params)?;
            constant_sample(graph.n(), v, shots)
        }
    }
}

fn no_params(params: &[f64]) -> Result<()> {
    if params.is_empty() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "constant sampler takes no parameters, got {}",
            params.len()
        )))
    }
}

/// Mean and standard error of the pipeline's objective at `params`. A pure
/// function of `(spec, params, seed)`.
pub fn estimate_objective(spec: &ObjectiveSpec<'_>, params: &[f64], seed: u64) -> Result<Estimate> {
    let m = spec.shots;
    match &spec.pipeline {
        Pipeline::MaxCut { graph, qaoa } => {
            let angles = QaoaParams::from_slice(params)?;
            let shots = qaoa.sample(&angles, m, seed::derive(seed, TAG_SAMPLE))?;
            let cuts = flip_shots(graph, &shots, seed::derive(seed, TAG_POST))?;
            Ok(Estimate::from_values(
                cuts.iter().map(|&(_, c)| c as f64).collect(),
                m,
            ))
        }
        Pipeline::KCut {
            graph,
            model,
            k,
            options,
            repetitions,
        } => {
            if *repetitions == 0 {
                return Err(Error::Parameter(
                    "k-cut estimate needs at least one repetition".into(),
                ));
            }
            let (quenches, lambdas) = spectral_params_from(params)?;
            let dists = ansatz_distributions(graph, &quenches, model)?;
            let sets = sample_ansatze(&dists, &quenches, m, seed::derive(seed, TAG_SAMPLE))?;
            let values = (0..*repetitions)
                .map(|r| {
                    let s = seed::derive_path(seed, &[TAG_POST, r as u64]);
                    Ok(kcut_from_shots(graph, &sets, &lambdas, *k, options, s)?
                        .diagnostics
                        .cut as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Estimate::from_values(values, m * quenches.len()))
        }
        Pipeline::MisGreedy { graph, source } => {
            let strings = mis_strings(graph, *source, params, m, seed)?;
            let sets = repair_shots(graph, &strings, seed::derive(seed, TAG_POST))?;
            let shots = if matches!(source, MisSource::Constant(_)) {
                0
            } else {
                m
            };
            Ok(Estimate::from_values(
                sets.iter().map(|s| s.size() as f64).collect(),
                shots,
            ))
        }
        Pipeline::MisCluster { graph, source, run } => {
            let mut reservoir: Box<dyn Reservoir> = match source {
                MisSource::Anneal(model) => {
                    let protocol = anneal_protocol_from(params)?;
                    Box::new(DistributionReservoir::new(anneal_distribution(
                        graph, &protocol, model,
                    )?))
                }
                MisSource::Constant(v) => {
                    no_params(params)?;
                    let bits = match v {
                        ConstantValue::Zeros => BitString::zeros(graph.n()),
                        ConstantValue::Ones => BitString::ones(graph.n()),
                    };
                    Box::new(ConstantReservoir::new(bits))
                }
            };
            let values = (0..m)
                .map(|i| {
                    let s = seed::derive_path(seed, &[TAG_POST, i as u64]);
                    Ok(run_cluster_sa(graph, run, reservoir.as_mut(), s)?
                        .best
                        .size() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let draws = if matches!(source, MisSource::Constant(_)) {
                0
            } else {
                m * run.epochs() * graph.n()
            };
            Ok(Estimate::from_values(values, draws))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::random_regular;

    #[test]
    fn zero_layer_maxcut_beats_two_thirds() {
        let g = random_regular(12, 3, 4).unwrap();
        let q = QaoaInstance::new(&g).unwrap();
        let spec = ObjectiveSpec::new(
            Pipeline::MaxCut {
                graph: &g,
                qaoa: &q,
            },
            200,
        )
        .unwrap();
        let e = estimate_objective(&spec, &[], 1).unwrap();
        assert!(e.mean / g.num_edges() as f64 >= 2.0 / 3.0);
        assert!(e.values.iter().all(|&v| v / 18.0 >= 2.0 / 3.0));
        assert_eq!(e, estimate_objective(&spec, &[], 1).unwrap());
    }

    #[test]
    fn constant_mis_source_on_empty_graph_has_zero_stderr() {
        let g = Graph::empty(6);
        let spec = ObjectiveSpec::new(
            Pipeline::MisGreedy {
                graph: &g,
                source: MisSource::Constant(ConstantValue::Zeros),
            },
            20,
        )
        .unwrap();
        let e = estimate_objective(&spec, &[], 0).unwrap();
        assert_eq!(e.mean, 6.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.shots, 0);
    }

    #[test]
    fn parameter_shapes_are_checked() {
        let g = Graph::empty(3);
        let spec = ObjectiveSpec::new(
            Pipeline::MisGreedy {
                graph: &g,
                source: MisSource::Constant(ConstantValue::Zeros),
            },
            2,
        )
        .unwrap();
        assert!(matches!(
            estimate_objective(&spec, &[1.0], 0),
            Err(Error::Dimension(_))
        ));
        assert!(ObjectiveSpec::new(spec.pipeline.clone(), 0).is_err());
        assert!(spectral_params_from(&[1.0, 2.0]).is_err());
        let (q, l) = spectral_params_from(&[1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        assert_eq!((q[1].t, q[1].delta), (3.0, 4.0));
        assert_eq!(l, vec![0.5, -0.5]);
    }

    #[test]
    fn stderr_of_known_values() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[2.0]).1.is_nan());
    }
}
