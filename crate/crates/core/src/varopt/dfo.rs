//! Derivative-free bounded maximization with a linear model over a simplex
//! and a shrinking trust region.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Evaluations without an improvement of the incumbent after which a run
/// counts as settled.
pub const STALL_EVALS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub initial: Vec<f64>,
    /// Objective evaluation budget.
    pub max_evals: usize,
    /// Initial and final trust radius as fractions of each bound span.
    pub rho_begin: f64,
    pub rho_end: f64,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        let b = Self {
            lower,
            upper,
            initial,
            max_evals: 30,
            rho_begin: 0.25,
            rho_end: 1e-3,
        };
        b.validate()?;
        Ok(b)
    }

    /// Box with the initial point at its center.
    pub fn centered(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let initial = lower
            .iter()
            .zip(&upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Self::new(lower, upper, initial)
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_radii(mut self, rho_begin: f64, rho_end: f64) -> Self {
        self.rho_begin = rho_begin;
        self.rho_end = rho_end;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, a), b)| *a <= *v && v <= b)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lower.len();
        if d == 0 {
            return Err(Error::Parameter("search box has no parameters".into()));
        }
        if self.upper.len() != d || self.initial.len() != d {
            return Err(Error::Dimension(format!(
                "bounds of length {} and {}, initial point of length {}",
                d,
                self.upper.len(),
                self.initial.len()
            )));
        }
        if let Some(i) =
            (0..d).find(|&i| !(self.lower[i] < self.upper[i]) || !self.upper[i].is_finite())
        {
            return Err(Error::Parameter(format!(
                "bounds [{}, {}] of parameter {i} are not ordered",
                self.lower[i], self.upper[i]
            )));
        }
        if !self.contains(&self.initial) {
            return Err(Error::Parameter(format!(
                "initial point {:?} outside the box",
                self.initial
            )));
        }
        if self.max_evals == 0 {
            return Err(Error::Parameter("evaluation budget must be >= 1".into()));
        }
        if !(self.rho_end > 0.0 && self.rho_end <= self.rho_begin && self.rho_begin <= 0.5) {
            return Err(Error::Parameter(format!(
                "trust radii must satisfy 0 < end <= begin <= 0.5, got {} and {}",
                self.rho_begin, self.rho_end
            )));
        }
        Ok(())
    }
}

/// One objective reading: value, its standard error and the shots it cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub stderr: f64,
    pub shots: usize,
}

impl Evaluation {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            shots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub params: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub shots: usize,
    /// Trust radius when the point was proposed.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TrustRegion,
    Budget,
    Failed,
}

#[derive(Debug)]
pub struct DfoOutcome {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<HistoryEntry>,
    pub stop: StopReason,
    /// Set when an objective evaluation failed; `history` holds what ran.
    pub error: Option<Error>,
}

impl DfoOutcome {
    pub fn total_shots(&self) -> usize {
        self.history.iter().map(|h| h.shots).sum()
    }

    /// Evaluations since the incumbent last improved.
    pub fn evals_since_improvement(&self) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut last = 0;
        for (i, h) in self.history.iter().enumerate() {
            if h.value > best {
                best = h.value;
                last = i;
            }
        }
        self.history.len().saturating_sub(last + 1)
    }

    /// Trust region collapsed, or the incumbent survived the last
    /// [`STALL_EVALS`] evaluations.
    pub fn converged(&self) -> bool {
        self.error.is_none()
            && (self.stop == StopReason::TrustRegion
                || self.evals_since_improvement() >= STALL_EVALS)
    }
}

struct Run<'a, F> {
    bounds: &'a SearchBox,
    u0: Vec<f64>,
    objective: F,
    history: Vec<HistoryEntry>,
}

impl<F: FnMut(&[f64], usize) -> Result<Evaluation>> Run<'_, F> {
    fn to_x(&self, u: &[f64]) -> Vec<f64> {
        let b = self.bounds;
        if u == self.u0.as_slice() {
            return b.initial.clone();
        }
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                (b.lower[i] + ui * (b.upper[i] - b.lower[i])).clamp(b.lower[i], b.upper[i])
            })
            .collect()
    }

    fn budget_left(&self) -> bool {
        self.history.len() < self.bounds.max_evals
    }

    fn eval(&mut self, u: &[f64], rho: f64) -> Result<f64> {
        let x = self.to_x(u);
        let e = (self.objective)(&x, self.history.len())?;
        if !e.value.is_finite() {
            return Err(Error::Numerical(format!(
                "objective returned {} at {x:?}",
                e.value
            )));
        }
        self.history.push(HistoryEntry {
            params: x,
            value: e.value,
            stderr: e.stderr,
            shots: e.shots,
            rho,
        });
        Ok(e.value)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// Smallest singular value of the displacements from `base`, over `rho`.
fn conditioning(points: &[Vec<f64>], base: &[f64], rho: f64) -> f64 {
    let d = base.len();
    if points.len() < d {
        return 0.0;
    }
    let m = DMatrix::from_fn(d, d, |r, c| (points[r][c] - base[c]) / rho);
    m.svd(false, false).singular_values.min()
}

// Axis step from `base` that stays in the unit box.
fn axis_point(base: &[f64], axis: usize, rho: f64, sign: f64) -> Vec<f64> {
    let mut u = base.to_vec();
    let up = base[axis] + sign * rho;
    u[axis] = if (0.0..=1.0).contains(&up) {
        up
    } else {
        (base[axis] - sign * rho).clamp(0.0, 1.0)
    };
    u
}

/// Maximizes `objective` inside `bounds`. The objective receives the
/// parameter vector and the evaluation index; every requested point lies
/// in the box. A point replaces the incumbent only on a strictly larger
/// observed value.
pub fn dfo_maximize<F>(objective: F, bounds: &SearchBox) -> Result<DfoOutcome>
where
    F: FnMut(&[f64], usize) -> Result<Evaluation>,
{
    bounds.validate()?;
    let d = bounds.dim();
    let u0: Vec<f64> = (0..d)
        .map(|i| (bounds.initial[i] - bounds.lower[i]) / (bounds.upper[i] - bounds.lower[i]))
        .collect();
    let mut run = Run {
        bounds,
        u0: u0.clone(),
        objective,
        history: Vec::new(),
    };
    let mut rho = bounds.rho_begin;

    let finish = |run: Run<'_, F>, best: &(Vec<f64>, f64), stop, error| {
        Ok(DfoOutcome {
            best_params: run.to_x(&best.0),
            best_value: best.1,
            history: run.history,
            stop,
            error,
        })
    };

    let f0 = match run.eval(&u0, rho) {
        Ok(f) => f,
        Err(e) => {
            return Ok(DfoOutcome {
                best_params: bounds.initial.clone(),
                best_value: f64::NAN,
                history: run.history,
                stop: StopReason::Failed,
                error: Some(e),
            })
        }
    };
    let mut best = (u0.clone(), f0);
    // the other d simplex vertices with their values
    let mut others: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d);

    macro_rules! evaluate {
        ($u:expr) => {
            match run.eval(&$u, rho) {
                Ok(f) => f,
                Err(e) => return finish(run, &best, StopReason::Failed, Some(e)),
            }
        };
    }

    for axis in 0..d {
        if !run.budget_left() {
            return finish(run, &best, StopReason::Budget, None);
        }
        let u = axis_point(&u0, axis, rho, 1.0);
        let f = evaluate!(u);
        others.push((u, f));
    }
    promote(&mut best, &mut others);

    loop {
        if rho < bounds.rho_end {
            return finish(run, &best, StopReason::TrustRegion, None);
        }
        if !run.budget_left() {
            return finish(run, &best, StopReason::Budget, None);
        }

        let pts: Vec<Vec<f64>> = others.iter().map(|(u, _)| u.clone()).collect();
        let far = (0..d)
            .map(|j| (j, dist(&pts[j], &best.0)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, r)| r > 2.0 * rho + 1e-15)
            .map(|(j, _)| j);
        if far.is_some() || conditioning(&pts, &best.0, rho) < 0.1 {
            // geometry step: replace a vertex (the far one if any) by the axis
            // point that leaves the best-spread simplex
            let slots: Vec<usize> = far.map_or_else(|| (0..d).collect(), |j| vec![j]);
            let mut choice = (slots[0], axis_point(&best.0, 0, rho, 1.0));
            let mut choice_cond = f64::NEG_INFINITY;
            for &j in &slots {
                for axis in 0..d {
                    for sign in [1.0, -1.0] {
                        let cand = axis_point(&best.0, axis, rho, sign);
                        let mut trial = pts.clone();
                        trial[j] = cand.clone();
                        let c = conditioning(&trial, &best.0, rho);
                        if c > choice_cond {
                            choice_cond = c;
                            choice = (j, cand);
                        }
                    }
                }
            }
            let (j, u) = choice;
            let f = evaluate!(u);
            others[j] = (u, f);
            promote(&mut best, &mut others);
            continue;
        }

        // linear model f(u) ~ f_best + g . (u - u_best)
        let dmat = DMatrix::from_fn(d, d, |r, c| others[r].0[c] - best.0[c]);
        let rhs = DVector::from_iterator(d, others.iter().map(|(_, f)| f - best.1));
        let grad = match dmat.lu().solve(&rhs) {
            Some(g) if g.iter().all(|v| v.is_finite()) => g,
            _ => {
                rho *= 0.5;
                continue;
            }
        };
        let mut dir: Vec<f64> = grad.iter().copied().collect();
        for (i, g) in dir.iter_mut().enumerate() {
            let u = best.0[i];
            if (*g > 0.0 && u >= 1.0) || (*g < 0.0 && u <= 0.0) {
                *g = 0.0;
            }
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            rho *= 0.5;
            continue;
        }
        let cand: Vec<f64> = best
            .0
            .iter()
            .zip(&dir)
            .map(|(u, g)| (u + rho * g / norm).clamp(0.0, 1.0))
            .collect();
        if dist(&cand, &best.0) < 1e-3 * rho {
            rho *= 0.5;
            continue;
        }
        let f = evaluate!(cand);
        if f > best.1 {
            // the new incumbent keeps the old one as a vertex and drops the
            // vertex farthest from it
            let j = farthest(&others, &cand);
            others[j] = std::mem::replace(&mut best, (cand, f));
        } else {
            let worst = others
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(j, _)| j)
                .expect("simplex has d >= 1 other vertices");
            if f > others[worst].1 {
                others[worst] = (cand, f);
            }
            rho *= 0.5;
        }
    }
}

fn farthest(others: &[(Vec<f64>, f64)], from: &[f64]) -> usize {
    others
        .iter()
        .enumerate()
        .max_by(|a, b| dist(&a.1 .0, from).total_cmp(&dist(&b.1 .0, from)))
        .map(|(j, _)| j)
        .expect("simplex has d >= 1 other vertices")
}

// Makes the best simplex vertex the incumbent when it strictly beats it.
fn promote(best: &mut (Vec<f64>, f64), others: &mut [(Vec<f64>, f64)]) {
    let top = others
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j);
    if let Some(j) = top {
        if others[j].1 > best.1 {
            std::mem::swap(best, &mut others[j]);
        }
    }
}
