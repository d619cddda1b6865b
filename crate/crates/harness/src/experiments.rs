//! Experiment drivers. Instances run in parallel; every random choice is
//! drawn from a substream keyed by (purpose, instance, stream), so the
//! thread schedule never changes a result.

use std::fmt::Write as _;

use log::{info, warn};
use nnha_core::anneal::{
    run_cluster_sa, AnnealOutcome, AnnealRun, ConstantReservoir, DistributionReservoir, Reservoir,
    ShotPool,
};
use nnha_core::graphs::{
    cut_value, kings_subgraph, load_graph, mis_status, random_regular, BitString, Graph,
};
use nnha_core::postprocess::{flip_shots, repair_shots};
use nnha_core::samplers::{
    anneal_distribution, constant_sample, load_shots, uniform_sample, ConstantValue,
    OutcomeDistribution, QaoaInstance, QaoaParams, QuenchParams, RydbergModel, ShotSet,
};
use nnha_core::seed;
use nnha_core::spectral::{
    ansatz_distributions, classical_limit_kcut, kcut_from_shots, sample_ansatze,
};
use nnha_core::varopt::{
    dfo_maximize, estimate_objective, generic_start, optimize_angle_ladder, regular_degree,
    AngleSettings, AngleTable, MisSource, NestedSettings, ObjectiveSpec, Pipeline, SearchBox,
    BETA_MAX, GAMMA_MAX,
};
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, GraphSource, PipelineChoice, SamplerSpec};
use crate::error::{HarnessError, Result};
use crate::exact;
use crate::table::{histogram, ExperimentOutput, Method, PlotData, ResultTable};

const TAG_GRAPH: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_ANGLES: u64 = 3;
const TAG_SHOTS: u64 = 4;
const TAG_POST: u64 = 5;
const TAG_NESTED: u64 = 6;
const TAG_OPT: u64 = 7;
const TAG_FINAL: u64 = 8;

#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub graph: Graph,
}

fn generate(source: &GraphSource, tag: u64, master: u64, i: usize) -> Result<Graph> {
    let s = seed::derive_path(master, &[tag, i as u64]);
    Ok(match source {
        GraphSource::RandomRegular { n, degree, .. } => random_regular(*n, *degree, s)?,
        GraphSource::Kings {
            rows,
            cols,
            dropout,
            ..
        } => kings_subgraph(*rows, *cols, *dropout, s)?,
        GraphSource::File { paths } => load_graph(&paths[i])?,
    })
}

pub fn build_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    (0..cfg.graphs.count())
        .map(|i| {
            let graph = generate(&cfg.graphs, TAG_GRAPH, cfg.seeds.master, i)?;
            let id = match &cfg.graphs {
                GraphSource::File { paths } => {
                    let stem = paths[i]
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    format!("{i:04}-{stem}")
                }
                _ => format!("g{i:04}"),
            };
            Ok(Instance { id, graph })
        })
        .collect()
}

fn stream_seed(cfg: &ExperimentConfig, tag: u64, instance: usize, stream: usize) -> u64 {
    seed::derive_path(cfg.seeds.master, &[tag, instance as u64, stream as u64])
}

fn optimum(
    id: &str,
    g: &Graph,
    cap: usize,
    solve: impl FnOnce(&Graph) -> nnha_core::Result<usize>,
) -> Option<f64> {
    if g.n() > cap {
        warn!(
            "{id}: {} vertices exceed the exact-solver cap of {cap}; ratio column omitted",
            g.n()
        );
        return None;
    }
    solve(g).ok().map(|v| v as f64)
}

fn shot_file(cfg: &ExperimentConfig, g: &Graph) -> Result<Option<ShotSet>> {
    match cfg.sampler() {
        SamplerSpec::File(path) => {
            let shots = load_shots(&path)?;
            if shots.n() != g.n() {
                return Err(HarnessError::Config(format!(
                    "{} holds {}-qubit shots for a {}-vertex graph",
                    path.display(),
                    shots.n(),
                    g.n()
                )));
            }
            Ok(Some(shots))
        }
        _ => Ok(None),
    }
}

fn space_joined(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Runs `cfg.experiment`, inside a pool of `cfg.threads` workers if set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let run = || match cfg.experiment {
        Experiment::MaxcutEnsemble => run_maxcut_ensemble(cfg),
        Experiment::Kcut => run_kcut(cfg),
        Experiment::MisGreedy => run_mis_greedy(cfg),
        Experiment::MisCluster => run_mis_cluster(cfg),
        Experiment::Optimize => run_optimize(cfg),
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn merge(parts: Vec<(ResultTable, Vec<PlotData>)>, plots: &mut Vec<PlotData>) -> ResultTable {
    let mut table = ResultTable::default();
    for (t, ps) in parts {
        table.extend(t);
        for p in ps {
            match plots.iter_mut().find(|q| q.name == p.name) {
                Some(q) => q.rows.extend(p.rows),
                None => plots.push(p),
            }
        }
    }
    table
}

/// Angles per layer count `0..=p_max`: read from the table, or optimized
/// for the mean `<cut>` over training graphs.
pub fn maxcut_angles(
    cfg: &ExperimentConfig,
    instances: &[Instance],
) -> Result<Vec<(QaoaParams, Option<f64>)>> {
    let p_max = cfg.maxcut.p_max;
    if let Some(path) = &cfg.maxcut.angles {
        let table = AngleTable::load(path)?;
        let nu = regular_degree(&instances[0].graph)
            .filter(|&d| {
                instances
                    .iter()
                    .all(|i| regular_degree(&i.graph) == Some(d))
            })
            .ok_or_else(|| {
                HarnessError::Config("angle tables need graphs of one common degree".into())
            })?;
        return (0..=p_max).map(|p| Ok((table.get(nu, p)?, None))).collect();
    }
    let train: Vec<Graph> = match &cfg.graphs {
        GraphSource::File { .. } => instances
            .iter()
            .take(cfg.maxcut.train_graphs.max(1))
            .map(|i| i.graph.clone())
            .collect(),
        source => (0..cfg.maxcut.train_graphs.max(1))
            .map(|j| generate(source, TAG_TRAIN, cfg.seeds.master, j))
            .collect::<Result<_>>()?,
    };
    let train: Vec<QaoaInstance> = train
        .iter()
        .map(QaoaInstance::new)
        .collect::<nnha_core::Result<_>>()?;
    let settings = AngleSettings {
        starts: cfg.maxcut.angle_starts,
        max_evals: cfg.maxcut.angle_evals,
        seed: seed::derive(cfg.seeds.master, TAG_ANGLES),
    };
    info!(
        "optimizing angles up to p = {p_max} on {} training graphs",
        train.len()
    );
    Ok(optimize_angle_ladder(&train, p_max, &settings)?
        .into_iter()
        .map(|(params, mean)| (params, Some(mean)))
        .collect())
}

pub fn run_maxcut_ensemble(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let instances = build_instances(cfg)?;
    let angles = maxcut_angles(cfg, &instances)?;
    let m = cfg.shots;
    let streams = cfg.seeds.streams;
    let uniform_hybrid = cfg.sampler() == SamplerSpec::Uniform;

    let parts: Vec<(ResultTable, [usize; 3])> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<(ResultTable, [usize; 3])> {
            let g = &inst.graph;
            let q = QaoaInstance::new(g)?;
            let opt = optimum(&inst.id, g, exact::MAXCUT_CAP, exact::max_cut);
            let mut t = ResultTable::default();
            // [dominance violations, shots checked, p = 0 mismatches]
            let mut counts = [0usize; 3];
            let post = |shots: &ShotSet, r: usize, counts: &mut [usize; 3]| -> Result<Vec<f64>> {
                let pairs = flip_shots(g, shots, stream_seed(cfg, TAG_POST, i, r))?;
                counts[0] += pairs.iter().filter(|(raw, out)| out < raw).count();
                counts[1] += pairs.len();
                Ok(pairs.iter().map(|&(_, c)| c as f64).collect())
            };
            let mut classical = Vec::with_capacity(m * streams);
            for r in 0..streams {
                let shots = uniform_sample(g.n(), m, stream_seed(cfg, TAG_SHOTS, i, r))?;
                classical.extend(post(&shots, r, &mut counts)?);
            }
            for (p, (params, _)) in angles.iter().enumerate() {
                let param = format!("p={p}");
                t.push(
                    &inst.id,
                    Method::RawQuantum,
                    &param,
                    &[q.expectation(params)],
                    opt,
                    0,
                    0,
                );
                let mut values = Vec::with_capacity(m * streams);
                for r in 0..streams {
                    let s = stream_seed(cfg, TAG_SHOTS, i, r);
                    let shots = if uniform_hybrid {
                        uniform_sample(g.n(), m, s)?
                    } else {
                        q.sample(params, m, s)?
                    };
                    values.extend(post(&shots, r, &mut counts)?);
                }
                if p == 0 && values != classical {
                    counts[2] += 1;
                }
                t.push(
                    &inst.id,
                    Method::Hybrid,
                    &param,
                    &values,
                    opt,
                    m * streams,
                    0,
                );
            }
            t.push(
                &inst.id,
                Method::ClassicalLimit,
                "uniform",
                &classical,
                opt,
                0,
                0,
            );
            Ok((t, counts))
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentOutput::default();
    let mut totals = [0usize; 3];
    for (t, c) in parts {
        out.table.extend(t);
        for k in 0..3 {
            totals[k] += c[k];
        }
    }
    out.checks
        .insert("dominance_violations".into(), totals[0] as f64);
    out.checks.insert("shots_checked".into(), totals[1] as f64);
    out.checks
        .insert("p0_classical_mismatches".into(), totals[2] as f64);

    let mut plot = PlotData::new("angles", &["p", "train_mean_cut", "gammas", "betas"]);
    let mut table = AngleTable::default();
    let nu = regular_degree(&instances[0].graph);
    for (p, (params, mean)) in angles.iter().enumerate() {
        plot.push(vec![
            p.to_string(),
            mean.map_or(String::new(), |v| v.to_string()),
            space_joined(&params.gammas),
            space_joined(&params.betas),
        ]);
        if let (Some(nu), true) = (nu, p > 0) {
            table.insert(nu, params.clone());
        }
    }
    out.plots.push(plot);
    if nu.is_some() {
        out.texts.push(("angles.txt".into(), table.write()));
    }
    Ok(out)
}

enum KcutShots {
    Fixed(Vec<ShotSet>),
    Emulated {
        dists: Vec<OutcomeDistribution>,
        quench: Vec<QuenchParams>,
    },
}

pub fn run_kcut(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let instances = build_instances(cfg)?;
    let model = cfg.model.model();
    let k = cfg.kcut.k;
    let options = cfg.kcut.options();
    let m = cfg.shots;
    let reps = cfg.seeds.streams;

    let parts = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<(ResultTable, Vec<PlotData>, usize)> {
            let g = &inst.graph;
            let id = inst.id.as_str();
            let opt = if g.n() <= exact::KCUT_CAP {
                Some(exact::max_kcut(g, k)? as f64)
            } else {
                None
            };
            let mut evals = 0;
            let (source, lambdas) = match shot_file(cfg, g)? {
                Some(shots) => (KcutShots::Fixed(vec![shots]), vec![1.0]),
                None => {
                    let (quench, lambdas) = match cfg.kcut.nested {
                        Some(n) => {
                            let mut settings = NestedSettings::new(k, n.outer, n.inner);
                            settings.n_ansatz = n.ansatze;
                            settings.shots_per_ansatz = m;
                            settings.options = options.clone();
                            let found = nnha_core::varopt::nested_optimize_spectral(
                                g,
                                &model,
                                &settings,
                                seed::derive_path(cfg.seeds.master, &[TAG_NESTED, i as u64]),
                            )?;
                            evals = found.outer.iter().map(|o| o.inner_evals).sum();
                            (found.params.quench_list, found.params.lambdas)
                        }
                        None => (cfg.kcut.quench_list(), cfg.kcut.lambdas.clone()),
                    };
                    info!(
                        "{id}: emulating {} quenches on {} atoms",
                        quench.len(),
                        g.n()
                    );
                    let dists = ansatz_distributions(g, &quench, &model)?;
                    (KcutShots::Emulated { dists, quench }, lambdas)
                }
            };
            let mut diag = PlotData::new(
                "kcut_runs",
                &[
                    "instance",
                    "run",
                    "eigenvalues",
                    "degenerate",
                    "uninformative",
                    "wcss",
                    "raw_cut",
                    "cut",
                    "classical_cut",
                ],
            );
            let (mut raw, mut hybrid, mut classical) = (Vec::new(), Vec::new(), Vec::new());
            let mut violations = 0;
            for r in 0..reps {
                let s = stream_seed(cfg, TAG_SHOTS, i, r);
                let sampled;
                let sets = match &source {
                    KcutShots::Fixed(sets) => sets,
                    KcutShots::Emulated { dists, quench } => {
                        sampled = sample_ansatze(dists, quench, m, s)?;
                        &sampled
                    }
                };
                let outcome = kcut_from_shots(g, sets, &lambdas, k, &options, s)?;
                let d = &outcome.diagnostics;
                let base = cut_value(g, &classical_limit_kcut(g, k, s)?)?;
                violations += usize::from(d.cut < d.raw_cut);
                raw.push(d.raw_cut as f64);
                hybrid.push(d.cut as f64);
                classical.push(base as f64);
                diag.push(vec![
                    id.to_string(),
                    r.to_string(),
                    space_joined(&d.eigenvalues),
                    d.degenerate.to_string(),
                    d.uninformative.to_string(),
                    d.wcss.map_or(String::new(), |w| w.to_string()),
                    d.raw_cut.to_string(),
                    d.cut.to_string(),
                    base.to_string(),
                ]);
            }
            let shots = match &source {
                KcutShots::Fixed(sets) => sets.iter().map(|s| s.len()).sum(),
                KcutShots::Emulated { quench, .. } => reps * m * quench.len(),
            };
            let mut t = ResultTable::default();
            t.push(id, Method::RawQuantum, "spectral", &raw, opt, shots, evals);
            t.push(id, Method::Hybrid, "spectral", &hybrid, opt, shots, evals);
            t.push(id, Method::ClassicalLimit, "uniform", &classical, opt, 0, 0);
            let mut hist = PlotData::new("histogram", &["instance", "method", "cut", "count"]);
            for (method, values) in [
                (Method::Hybrid, &hybrid),
                (Method::ClassicalLimit, &classical),
            ] {
                for (v, c) in histogram(values) {
                    hist.push(vec![
                        id.to_string(),
                        method.to_string(),
                        v.to_string(),
                        c.to_string(),
                    ]);
                }
            }
            let mut params = PlotData::new(
                "kcut_params",
                &["instance", "quench_t", "quench_delta", "lambdas"],
            );
            if let KcutShots::Emulated { quench, .. } = &source {
                params.push(vec![
                    id.to_string(),
                    space_joined(&quench.iter().map(|q| q.t).collect::<Vec<_>>()),
                    space_joined(&quench.iter().map(|q| q.delta).collect::<Vec<_>>()),
                    space_joined(&lambdas),
                ]);
            }
            Ok((t, vec![hist, diag, params], violations))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = ExperimentOutput::default();
    let violations: usize = parts.iter().map(|p| p.2).sum();
    out.table = merge(
        parts.into_iter().map(|(t, p, _)| (t, p)).collect(),
        &mut out.plots,
    );
    out.checks
        .insert("dominance_violations".into(), violations as f64);
    Ok(out)
}

fn mis_distribution(cfg: &ExperimentConfig, g: &Graph) -> Result<Option<OutcomeDistribution>> {
    match cfg.sampler() {
        SamplerSpec::Rydberg => Ok(Some(anneal_distribution(
            g,
            &cfg.mis.protocol(),
            &cfg.model.model(),
        )?)),
        _ => Ok(None),
    }
}

/// Probability that a hybrid value is at least a classical one, over all
/// pairs.
pub fn equal_or_better(hybrid: &[f64], classical: &[f64]) -> f64 {
    let hits: usize = hybrid
        .iter()
        .map(|h| classical.iter().filter(|c| h >= c).count())
        .sum();
    hits as f64 / (hybrid.len() * classical.len()) as f64
}

fn mis_checks(out: &mut ExperimentOutput, per: &[[f64; 4]]) {
    // per instance: [invalid, above optimum, equal-or-better, hybrid/classical]
    let sum = |k: usize| per.iter().map(|p| p[k]).sum::<f64>();
    let mean = |k: usize| sum(k) / per.len() as f64;
    out.checks.insert("invalid_solutions".into(), sum(0));
    out.checks.insert("above_exact_optimum".into(), sum(1));
    out.checks.insert("equal_or_better".into(), mean(2));
    out.checks.insert("hybrid_over_classical".into(), mean(3));
}

fn valid_mis(g: &Graph, members: &[usize]) -> bool {
    mis_status(g, members)
        .map(|s| s.is_independent && s.is_maximal)
        .unwrap_or(false)
}

pub fn run_mis_greedy(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let instances = build_instances(cfg)?;
    let m = cfg.shots;
    let streams = cfg.seeds.streams;
    let parts = instances
        .par_iter()
        .enumerate()
        .map(
            |(i, inst)| -> Result<(ResultTable, Vec<PlotData>, [f64; 4])> {
                let g = &inst.graph;
                let opt = optimum(&inst.id, g, exact::MIS_CAP, exact::max_independent_set);
                let dist = mis_distribution(cfg, g)?;
                let file = shot_file(cfg, g)?;
                let (mut raw, mut hybrid, mut classical) = (Vec::new(), Vec::new(), Vec::new());
                let mut invalid = 0usize;
                let mut shots_used = 0;
                for r in 0..streams {
                    let s = stream_seed(cfg, TAG_SHOTS, i, r);
                    let post = stream_seed(cfg, TAG_POST, i, r);
                    let strings = match (&dist, &file) {
                        (Some(d), _) => {
                            ShotSet::new(d.sample(m, &mut seed::rng(s)), Default::default())?
                        }
                        (None, Some(f)) => f.clone(),
                        (None, None) => constant_sample(g.n(), ConstantValue::Zeros, m)?,
                    };
                    if dist.is_some() || file.is_some() {
                        shots_used += strings.len();
                    }
                    for z in strings.iter() {
                        let ones = z.ones_positions();
                        let independent = mis_status(g, &ones)?.is_independent;
                        raw.push(if independent { ones.len() as f64 } else { 0.0 });
                    }
                    for set in repair_shots(g, &strings, post)? {
                        invalid += usize::from(!valid_mis(g, set.members()));
                        hybrid.push(set.size() as f64);
                    }
                    let zeros = constant_sample(g.n(), ConstantValue::Zeros, strings.len())?;
                    for set in repair_shots(g, &zeros, post)? {
                        invalid += usize::from(!valid_mis(g, set.members()));
                        classical.push(set.size() as f64);
                    }
                }
                let above = opt.map_or(0, |o| {
                    hybrid.iter().chain(&classical).filter(|&&v| v > o).count()
                });
                let mut t = ResultTable::default();
                t.push(
                    &inst.id,
                    Method::RawQuantum,
                    "independent-or-zero",
                    &raw,
                    opt,
                    shots_used,
                    0,
                );
                t.push(
                    &inst.id,
                    Method::Hybrid,
                    "greedy",
                    &hybrid,
                    opt,
                    shots_used,
                    0,
                );
                t.push(
                    &inst.id,
                    Method::ClassicalLimit,
                    "zeros",
                    &classical,
                    opt,
                    0,
                    0,
                );
                let ratio = t.rows[1].mean / t.rows[2].mean;
                let mut hist = PlotData::new("sizes", &["instance", "method", "size", "count"]);
                for (method, values) in [
                    (Method::Hybrid, &hybrid),
                    (Method::ClassicalLimit, &classical),
                ] {
                    for (v, c) in histogram(values) {
                        hist.push(vec![
                            inst.id.clone(),
                            method.to_string(),
                            v.to_string(),
                            c.to_string(),
                        ]);
                    }
                }
                Ok((
                    t,
                    vec![hist],
                    [
                        invalid as f64,
                        above as f64,
                        equal_or_better(&hybrid, &classical),
                        ratio,
                    ],
                ))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut out = ExperimentOutput::default();
    let per: Vec<[f64; 4]> = parts.iter().map(|p| p.2).collect();
    out.table = merge(
        parts.into_iter().map(|(t, p, _)| (t, p)).collect(),
        &mut out.plots,
    );
    mis_checks(&mut out, &per);
    Ok(out)
}

fn monotone(outcome: &AnnealOutcome) -> bool {
    outcome
        .trajectory
        .windows(2)
        .all(|w| w[1].objective >= w[0].objective)
}

/// Per-instance table, plots, summary values and outcome counts.
type MisPart = (ResultTable, Vec<PlotData>, [f64; 4], [usize; 3]);

pub fn run_mis_cluster(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let instances = build_instances(cfg)?;
    let run = cfg.mis.run()?;
    let zero_temperature = cfg.mis.beta.iter().all(|b| b.is_infinite());
    let streams = cfg.seeds.streams;
    let parts = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| -> Result<MisPart> {
            let g = &inst.graph;
            let opt = optimum(&inst.id, g, exact::MIS_CAP, exact::max_independent_set);
            let dist = mis_distribution(cfg, g)?;
            let file = shot_file(cfg, g)?;
            let mut traj = PlotData::new(
                "trajectory",
                &[
                    "instance",
                    "method",
                    "run",
                    "step",
                    "epoch",
                    "cluster_size",
                    "delta",
                    "accepted",
                    "objective",
                ],
            );
            let (mut hybrid, mut classical) = (Vec::new(), Vec::new());
            let mut invalid = 0usize;
            // [non-monotone runs, hybrid runs at optimum, classical runs at optimum]
            let mut counts = [0usize; 3];
            for r in 0..streams {
                let s = stream_seed(cfg, TAG_POST, i, r);
                let mut quantum: Box<dyn Reservoir> = match (&dist, &file) {
                    (Some(d), _) => Box::new(DistributionReservoir::new(d.clone())),
                    (None, Some(f)) => Box::new(ShotPool::new(f)),
                    (None, None) => Box::new(ConstantReservoir::new(BitString::zeros(g.n()))),
                };
                let mut zeros = ConstantReservoir::new(BitString::zeros(g.n()));
                for (method, reservoir, values, hit) in [
                    (Method::Hybrid, quantum.as_mut(), &mut hybrid, 1),
                    (
                        Method::ClassicalLimit,
                        &mut zeros as &mut dyn Reservoir,
                        &mut classical,
                        2,
                    ),
                ] {
                    let o = run_cluster_sa(g, &run, reservoir, s)?;
                    invalid += usize::from(!valid_mis(g, o.best.members()))
                        + usize::from(!valid_mis(g, o.last.members()));
                    if zero_temperature && !monotone(&o) {
                        counts[0] += 1;
                    }
                    if opt == Some(o.best.size() as f64) {
                        counts[hit] += 1;
                    }
                    values.push(o.best.size() as f64);
                    if r < cfg.mis.trajectory_runs {
                        for st in &o.trajectory {
                            traj.push(vec![
                                inst.id.clone(),
                                method.to_string(),
                                r.to_string(),
                                st.step.to_string(),
                                st.epoch.to_string(),
                                st.cluster_size.to_string(),
                                st.delta.to_string(),
                                st.accepted.to_string(),
                                st.objective.to_string(),
                            ]);
                        }
                    }
                }
            }
            let above = opt.map_or(0, |o| {
                hybrid.iter().chain(&classical).filter(|&&v| v > o).count()
            });
            let draws = if dist.is_some() || file.is_some() {
                streams * run.epochs() * g.n()
            } else {
                0
            };
            let evals = run.epochs() * g.n();
            let mut t = ResultTable::default();
            t.push(
                &inst.id,
                Method::Hybrid,
                "cluster",
                &hybrid,
                opt,
                draws,
                evals,
            );
            t.push(
                &inst.id,
                Method::ClassicalLimit,
                "zeros",
                &classical,
                opt,
                0,
                evals,
            );
            let ratio = t.rows[0].mean / t.rows[1].mean;
            let checks = [
                invalid as f64,
                above as f64,
                equal_or_better(&hybrid, &classical),
                ratio,
            ];
            Ok((t, vec![traj], checks, counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ExperimentOutput::default();
    let per: Vec<[f64; 4]> = parts.iter().map(|p| p.2).collect();
    let runs = (instances.len() * streams) as f64;
    let with_opt = within_cap(&instances) as f64 * streams as f64;
    let counts = parts.iter().fold([0usize; 3], |mut a, p| {
        for (acc, c) in a.iter_mut().zip(p.3) {
            *acc += c;
        }
        a
    });
    out.table = merge(
        parts.into_iter().map(|(t, p, _, _)| (t, p)).collect(),
        &mut out.plots,
    );
    mis_checks(&mut out, &per);
    if zero_temperature {
        out.checks
            .insert("non_monotone_runs".into(), counts[0] as f64);
    }
    out.checks.insert("runs".into(), runs);
    if with_opt > 0.0 {
        out.checks
            .insert("hybrid_reached_optimum".into(), counts[1] as f64 / with_opt);
        out.checks.insert(
            "classical_reached_optimum".into(),
            counts[2] as f64 / with_opt,
        );
    }
    Ok(out)
}

fn within_cap(instances: &[Instance]) -> usize {
    instances
        .iter()
        .filter(|i| i.graph.n() <= exact::MIS_CAP)
        .count()
}

/// Default box and starting point for each pipeline's parameter vector.
fn default_box(cfg: &ExperimentConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match cfg.optimize.pipeline {
        PipelineChoice::Maxcut => {
            let p = cfg.optimize.p;
            let upper: Vec<f64> = [vec![GAMMA_MAX; p], vec![BETA_MAX; p]].concat();
            let initial = generic_start(p).to_vec();
            (vec![0.0; 2 * p], upper, initial)
        }
        PipelineChoice::Kcut => {
            let q = &cfg.kcut.quench;
            let a = q.len();
            let lower = [vec![0.0; 2 * a], vec![-1.0; a]].concat();
            let upper = [[4.0, 15.0].repeat(a), vec![1.0; a]].concat();
            let initial = q
                .iter()
                .flatten()
                .copied()
                .chain(cfg.kcut.lambdas.iter().copied())
                .collect();
            (lower, upper, initial)
        }
        PipelineChoice::MisGreedy | PipelineChoice::MisCluster => {
            let m = &cfg.mis;
            (
                vec![0.5, -30.0, 0.0],
                vec![4.0, 0.0, 60.0],
                vec![m.t_max, m.delta_min, m.delta_max],
            )
        }
    }
}

/// Parameter vector of the no-quantum limit with the same classical
/// machinery: zero QAOA layers, zero-time quenches, or constant strings.
fn classical_params(cfg: &ExperimentConfig, best: &[f64]) -> Vec<f64> {
    match cfg.optimize.pipeline {
        PipelineChoice::Maxcut | PipelineChoice::MisGreedy | PipelineChoice::MisCluster => {
            Vec::new()
        }
        PipelineChoice::Kcut => {
            let a = best.len() / 3;
            let mut v = best.to_vec();
            for j in 0..a {
                v[2 * j] = 0.0;
            }
            v
        }
    }
}

fn make_pipeline<'a>(
    cfg: &'a ExperimentConfig,
    g: &'a Graph,
    qaoa: Option<&'a QaoaInstance>,
    model: &'a RydbergModel,
    run: &'a AnnealRun,
    source: MisSource<'a>,
) -> Pipeline<'a> {
    match cfg.optimize.pipeline {
        PipelineChoice::Maxcut => Pipeline::MaxCut {
            graph: g,
            qaoa: qaoa.expect("QAOA instance for MaxCut"),
        },
        PipelineChoice::Kcut => Pipeline::KCut {
            graph: g,
            model,
            k: cfg.kcut.k,
            options: cfg.kcut.options(),
            repetitions: cfg.optimize.repetitions,
        },
        PipelineChoice::MisGreedy => Pipeline::MisGreedy { graph: g, source },
        PipelineChoice::MisCluster => Pipeline::MisCluster {
            graph: g,
            source,
            run,
        },
    }
}

pub fn run_optimize(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let inst = build_instances(cfg)?.swap_remove(0);
    let g = &inst.graph;
    let o = &cfg.optimize;
    let model = cfg.model.model();
    let run = cfg.mis.run()?;
    let qaoa = match o.pipeline {
        PipelineChoice::Maxcut => Some(QaoaInstance::new(g)?),
        _ => None,
    };
    let pipeline = |source| make_pipeline(cfg, g, qaoa.as_ref(), &model, &run, source);
    let spec = ObjectiveSpec::new(pipeline(MisSource::Anneal(&model)), cfg.shots)?;
    let classical_spec = ObjectiveSpec::new(
        pipeline(MisSource::Constant(ConstantValue::Zeros)),
        cfg.shots,
    )?;

    let (lower, upper, initial) = default_box(cfg);
    let bounds = SearchBox::new(
        o.lower.clone().unwrap_or(lower),
        o.upper.clone().unwrap_or(upper),
        o.initial.clone().unwrap_or(initial),
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?
    .with_max_evals(o.max_evals)
    .with_radii(o.rho_begin, o.rho_end);
    bounds
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    let master = cfg.seeds.master;
    let dfo = dfo_maximize(
        |x, idx| {
            Ok(
                estimate_objective(&spec, x, seed::derive_path(master, &[TAG_OPT, idx as u64]))?
                    .evaluation(),
            )
        },
        &bounds,
    )?;
    if let Some(e) = dfo.error {
        return Err(e.into());
    }

    let mut out = ExperimentOutput::default();
    let mut history = PlotData::new(
        "history",
        &["eval", "value", "stderr", "shots", "rho", "params"],
    );
    for (i, h) in dfo.history.iter().enumerate() {
        history.push(vec![
            i.to_string(),
            h.value.to_string(),
            h.stderr.to_string(),
            h.shots.to_string(),
            h.rho.to_string(),
            space_joined(&h.params),
        ]);
    }
    out.plots.push(history);

    let opt = match o.pipeline {
        PipelineChoice::Maxcut => optimum(&inst.id, g, exact::MAXCUT_CAP, exact::max_cut),
        PipelineChoice::Kcut if g.n() <= exact::KCUT_CAP => {
            Some(exact::max_kcut(g, cfg.kcut.k)? as f64)
        }
        PipelineChoice::Kcut => None,
        _ => optimum(&inst.id, g, exact::MIS_CAP, exact::max_independent_set),
    };
    let rescore = |spec: &ObjectiveSpec<'_>, x: &[f64]| -> Result<(Vec<f64>, usize)> {
        let mut values = Vec::with_capacity(o.final_streams);
        let mut shots = 0;
        for r in 0..o.final_streams {
            let e = estimate_objective(spec, x, seed::derive_path(master, &[TAG_FINAL, r as u64]))?;
            values.push(e.mean);
            shots += e.shots;
        }
        Ok((values, shots))
    };
    let evals = dfo.history.len();
    let (v, s) = rescore(&spec, &bounds.initial)?;
    out.table
        .push(&inst.id, Method::Hybrid, "initial", &v, opt, s, 0);
    let (v, s) = rescore(&spec, &dfo.best_params)?;
    out.table
        .push(&inst.id, Method::Hybrid, "optimized", &v, opt, s, evals);
    let limit = classical_params(cfg, &dfo.best_params);
    let limit_spec = if o.pipeline == PipelineChoice::Kcut || o.pipeline == PipelineChoice::Maxcut {
        &spec
    } else {
        &classical_spec
    };
    let (v, s) = rescore(limit_spec, &limit)?;
    out.table.push(
        &inst.id,
        Method::ClassicalLimit,
        "no-quantum",
        &v,
        opt,
        s,
        0,
    );

    out.checks
        .insert("converged".into(), f64::from(u8::from(dfo.converged())));
    out.checks.insert("evals".into(), evals as f64);
    out.checks
        .insert("total_shots".into(), dfo.total_shots() as f64);
    out.checks.insert("best_estimate".into(), dfo.best_value);
    let mut best = PlotData::new("best_params", &["index", "value"]);
    for (i, x) in dfo.best_params.iter().enumerate() {
        best.push(vec![i.to_string(), x.to_string()]);
    }
    out.plots.push(best);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_or_better_counts_pairs() {
        assert_eq!(equal_or_better(&[3.0, 5.0], &[4.0, 5.0]), 0.5);
        assert_eq!(equal_or_better(&[5.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn instances_are_seeded_per_index() {
        let cfg = ExperimentConfig::parse(
            r#"
            experiment = "maxcut-ensemble"
            [seeds]
            master = 11
            [graphs]
            kind = "random-regular"
            n = 10
            degree = 3
            count = 3
            "#,
        )
        .unwrap();
        let a = build_instances(&cfg).unwrap();
        let mut bigger = cfg.clone();
        bigger.graphs = GraphSource::RandomRegular {
            n: 10,
            degree: 3,
            count: 5,
        };
        let b = build_instances(&bigger).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.graph, y.graph);
            assert_eq!(x.id, y.id);
        }
    }
}
