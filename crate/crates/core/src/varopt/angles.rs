//! QAOA angle setup: exact-expectation optimization with layer-by-layer
//! interpolated warm starts, or lookup in a user-supplied angle table.
//!
//! Table lines are `nu p gamma_1..gamma_p beta_1..beta_p` (radians), with
//! `#` comments.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::samplers::{QaoaInstance, QaoaParams};
use crate::seed;

use super::dfo::{dfo_maximize, Evaluation, SearchBox};

/// Angles are searched in `gamma in [0, pi]`, `beta in [0, pi/2]`, one
/// period of each for integer cut values.
pub const GAMMA_MAX: f64 = PI;
pub const BETA_MAX: f64 = FRAC_PI_2;

const POLISH_ROUNDS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AngleSettings {
    pub starts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for AngleSettings {
    fn default() -> Self {
        Self {
            starts: 4,
            max_evals: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AngleMode {
    Optimize(AngleSettings),
    Table(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AngleTable {
    entries: BTreeMap<(usize, usize), QaoaParams>,
}

impl AngleTable {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < 2 {
                return Err(err(format!("expected `nu p angles..`, got `{line}`")));
            }
            let nu: usize = tokens[0]
                .parse()
                .map_err(|_| err(format!("bad degree `{}`", tokens[0])))?;
            let p: usize = tokens[1]
                .parse()
                .map_err(|_| err(format!("bad layer count `{}`", tokens[1])))?;
            if tokens.len() != 2 + 2 * p {
                return Err(err(format!(
                    "p = {p} needs {} angles, found {}",
                    2 * p,
                    tokens.len() - 2
                )));
            }
            let angles = tokens[2..]
                .iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| err(format!("bad angle `{t}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            entries.insert((nu, p), QaoaParams::from_slice(&angles)?);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn insert(&mut self, nu: usize, params: QaoaParams) {
        self.entries.insert((nu, params.p()), params);
    }

    pub fn get(&self, nu: usize, p: usize) -> Result<QaoaParams> {
        if p == 0 {
            return Ok(QaoaParams::zero_layers());
        }
        self.entries.get(&(nu, p)).cloned().ok_or_else(|| {
            Error::Parameter(format!("angle table has no entry for nu = {nu}, p = {p}"))
        })
    }

    pub fn write(&self) -> String {
        let mut out = String::from("# nu p gammas.. betas..\n");
        for ((nu, p), params) in &self.entries {
            let _ = write!(out, "{nu} {p}");
            for a in params.to_vec() {
                let _ = write!(out, " {a:.17e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Common vertex degree, if the graph is regular.
pub fn regular_degree(g: &Graph) -> Option<usize> {
    let d = (g.n() > 0).then(|| g.degree(0))?;
    (0..g.n()).all(|v| g.degree(v) == d).then_some(d)
}

/// Constant-schedule start for `p` layers. Points with `gamma = pi/4` are
/// avoided: there `cos(2 gamma) = 0` makes every odd-degree objective flat.
pub fn generic_start(p: usize) -> QaoaParams {
    QaoaParams {
        gammas: vec![0.1 * GAMMA_MAX; p],
        betas: vec![0.75 * BETA_MAX; p],
    }
}

/// Warm start for `p + 1` layers from `p` optimized layers by linear
/// interpolation of the angle schedules.
pub fn interp_angles(prev: &QaoaParams) -> QaoaParams {
    let p = prev.p();
    if p == 0 {
        return generic_start(1);
    }
    let stretch = |v: &[f64]| -> Vec<f64> {
        (0..=p)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { v[i - 1] };
                let right = if i == p { 0.0 } else { v[i] };
                (i as f64 / p as f64) * left + ((p - i) as f64 / p as f64) * right
            })
            .collect()
    };
    QaoaParams {
        gammas: stretch(&prev.gammas),
        betas: stretch(&prev.betas),
    }
}

/// Representative of `params` with every gamma in `[0, pi/2)`, for graphs in
/// which every vertex has odd degree. There `exp(-i pi/2 C)` equals the
/// parity `Z^n` up to a global phase, and moving `Z^n` through the later
/// mixers negates their betas, so shifting `gamma_j` by `pi/2` together with
/// `beta_l -> pi/2 - beta_l` for `l >= j` leaves the distribution unchanged.
pub fn canonical_odd_degree(params: &QaoaParams) -> QaoaParams {
    let mut out = params.clone();
    let p = out.p();
    for j in 0..p {
        let shifts = (out.gammas[j] / FRAC_PI_2).floor();
        out.gammas[j] -= shifts * FRAC_PI_2;
        if (shifts as i64).rem_euclid(2) == 1 {
            for b in &mut out.betas[j..] {
                *b = FRAC_PI_2 - *b;
            }
        }
    }
    for b in &mut out.betas {
        *b = b.rem_euclid(FRAC_PI_2);
    }
    out
}

fn all_odd_degree(instances: &[QaoaInstance]) -> bool {
    instances.iter().all(|q| q.odd_degree())
}

fn angle_box(p: usize) -> (Vec<f64>, Vec<f64>) {
    let upper = std::iter::repeat_n(GAMMA_MAX, p)
        .chain(std::iter::repeat_n(BETA_MAX, p))
        .collect();
    (vec![0.0; 2 * p], upper)
}

/// Maximizes the mean exact `<cut>` over `instances` at `p` layers, from
/// `warm` (if given) plus random starts. Returns the angles and the mean.
pub fn optimize_angles(
    instances: &[QaoaInstance],
    p: usize,
    warm: Option<&QaoaParams>,
    settings: &AngleSettings,
) -> Result<(QaoaParams, f64)> {
    if instances.is_empty() {
        return Err(Error::Parameter(
            "angle optimization needs at least one graph".into(),
        ));
    }
    let mean = |params: &QaoaParams| {
        instances.iter().map(|q| q.expectation(params)).sum::<f64>() / instances.len() as f64
    };
    if p == 0 {
        let q = QaoaParams::zero_layers();
        let v = mean(&q);
        return Ok((q, v));
    }
    if settings.starts == 0 {
        return Err(Error::Parameter(
            "angle optimization needs at least one start".into(),
        ));
    }
    let (lower, upper) = angle_box(p);
    let mut rng = seed::rng(seed::derive(settings.seed, p as u64));
    let mut best: Option<(QaoaParams, f64)> = None;
    for s in 0..settings.starts {
        let start: Vec<f64> = match (s, warm) {
            (0, Some(w)) if w.p() == p => w
                .to_vec()
                .iter()
                .zip(&upper)
                .map(|(v, hi)| v.clamp(0.0, *hi))
                .collect(),
            _ => upper.iter().map(|hi| rng.random::<f64>() * hi).collect(),
        };
        // the exact objective is smooth, so a collapsed trust region is
        // restarted from the incumbent until a restart stops paying off
        let mut x = start;
        let mut value = f64::NEG_INFINITY;
        for round in 0..POLISH_ROUNDS {
            let rho = if round == 0 { 0.25 } else { 0.05 };
            let bounds = SearchBox::new(lower.clone(), upper.clone(), x.clone())?
                .with_max_evals(settings.max_evals)
                .with_radii(rho, 1e-4);
            let out = dfo_maximize(
                |x, _| Ok(Evaluation::exact(mean(&QaoaParams::from_slice(x)?))),
                &bounds,
            )?;
            if let Some(e) = out.error {
                return Err(e);
            }
            let gain = out.best_value - value;
            x = out.best_params;
            value = out.best_value;
            if gain < 1e-7 {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((QaoaParams::from_slice(&x)?, value));
        }
    }
    Ok(best.expect("starts >= 1"))
}

/// Optimized angles for every `p` in `0..=p_max`, each warm-started from
/// the interpolated optimum one layer down.
pub fn optimize_angle_ladder(
    instances: &[QaoaInstance],
    p_max: usize,
    settings: &AngleSettings,
) -> Result<Vec<(QaoaParams, f64)>> {
    let mut out: Vec<(QaoaParams, f64)> = Vec::with_capacity(p_max + 1);
    let odd = all_odd_degree(instances);
    for p in 0..=p_max {
        let warm = out.last().map(|(prev, _)| interp_angles(prev));
        let (mut params, value) = optimize_angles(instances, p, warm.as_ref(), settings)?;
        // interpolation needs every layer in the same symmetry image
        if odd {
            params = canonical_odd_degree(&params);
        }
        out.push((params, value));
    }
    Ok(out)
}

/// Angles for `g` at `p` layers: optimized on `g` itself, or read from a
/// table keyed by the graph's degree.
pub fn qaoa_angle_setup(g: &Graph, p: usize, mode: &AngleMode) -> Result<QaoaParams> {
    match mode {
        AngleMode::Optimize(settings) => {
            let inst = QaoaInstance::new(g)?;
            Ok(
                optimize_angle_ladder(std::slice::from_ref(&inst), p, settings)?
                    .pop()
                    .expect("p + 1 entries")
                    .0,
            )
        }
        AngleMode::Table(path) => {
            if p == 0 {
                return Ok(QaoaParams::zero_layers());
            }
            let nu = regular_degree(g).ok_or_else(|| {
                Error::Parameter("angle tables are keyed by degree; graph is not regular".into())
            })?;
            AngleTable::load(path)?.get(nu, p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_reaches_full_cut() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let params =
            qaoa_angle_setup(&g, 1, &AngleMode::Optimize(AngleSettings::default())).unwrap();
        let q = QaoaInstance::new(&g).unwrap();
        assert!((q.expectation(&params) - 1.0).abs() < 1e-3);
        // in the box the optima are (pi/4, 3pi/8) and (3pi/4, pi/8)
        let (gm, b) = (params.gammas[0], params.betas[0]);
        let near = |x: f64, y: f64| (gm - x).abs() < 0.05 && (b - y).abs() < 0.05;
        assert!(
            near(PI / 4.0, 3.0 * PI / 8.0) || near(3.0 * PI / 4.0, PI / 8.0),
            "{params:?}"
        );
    }

    #[test]
    fn odd_degree_canonical_form_keeps_expectation() {
        let g = crate::graphs::random_regular(10, 3, 4).unwrap();
        let q = QaoaInstance::new(&g).unwrap();
        let params = QaoaParams::new(vec![1.9, 0.4, 2.0 + PI], vec![0.5, 1.2, 0.1]).unwrap();
        let c = canonical_odd_degree(&params);
        assert!(c.gammas.iter().all(|g| (0.0..FRAC_PI_2).contains(g)));
        assert!(c.betas.iter().all(|b| (0.0..FRAC_PI_2).contains(b)));
        let (a, b) = (
            q.distribution(&params).unwrap(),
            q.distribution(&c).unwrap(),
        );
        for z in 0..1 << 10 {
            assert!((a.probability(z) - b.probability(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_start_escapes_the_flat_point() {
        let g = crate::graphs::random_regular(10, 3, 1).unwrap();
        let q = QaoaInstance::new(&g).unwrap();
        let settings = AngleSettings {
            starts: 1,
            max_evals: 60,
            seed: 0,
        };
        let ladder = optimize_angle_ladder(std::slice::from_ref(&q), 1, &settings).unwrap();
        let half = g.num_edges() as f64 / 2.0;
        assert!(ladder[1].1 > half + 0.1 * half, "{:?}", ladder[1]);
    }

    #[test]
    fn zero_layers_give_empty_angles() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let p = qaoa_angle_setup(&g, 0, &AngleMode::Optimize(AngleSettings::default())).unwrap();
        assert_eq!(p, QaoaParams::zero_layers());
    }

    #[test]
    fn interpolation_keeps_endpoints_and_grows() {
        let prev = QaoaParams::new(vec![0.2, 0.6], vec![0.5, 0.1]).unwrap();
        let next = interp_angles(&prev);
        assert_eq!(next.p(), 3);
        assert!((next.gammas[0] - 0.2).abs() < 1e-15 && (next.gammas[2] - 0.6).abs() < 1e-15);
        assert!((next.gammas[1] - 0.4).abs() < 1e-15);
        assert!((next.betas[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn table_round_trip_and_missing_entry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("angles.txt");
        let mut t = AngleTable::default();
        t.insert(3, QaoaParams::new(vec![0.3], vec![0.4]).unwrap());
        fs::write(&path, t.write()).unwrap();
        let g = crate::graphs::random_regular(8, 3, 0).unwrap();
        let got = qaoa_angle_setup(&g, 1, &AngleMode::Table(path.clone())).unwrap();
        assert_eq!(got, QaoaParams::new(vec![0.3], vec![0.4]).unwrap());
        assert!(matches!(
            qaoa_angle_setup(&g, 2, &AngleMode::Table(path)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn malformed_table_lines_report_position() {
        let e = AngleTable::parse("3 1 0.1 0.2\n3 2 0.1\n", Path::new("t")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }
}
