//! Ideal (noise-free) emulation of a Rydberg atom array,
//!
//! `H(t) = Omega(t)/2 sum_i X_i - Delta(t) sum_i n_i + sum_{i<j} C6 / r_ij^6 n_i n_j`,
//!
//! with atoms placed at the graph's vertex positions scaled by the lattice
//! spacing. Time stepping composes three symmetric (Strang) splits of the
//! diagonal and drive terms into a fourth-order fixed-step scheme; every
//! factor is an exact exponential, so the propagator is unitary to rounding.

use num_complex::Complex64;

use super::shots::{OutcomeDistribution, ShotMeta, ShotSet};
use super::statevector::StateVector;
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::seed;

/// Rabi frequency used throughout the experiments (rad/us).
pub const DEFAULT_OMEGA: f64 = 15.0;
/// Blockade radius at [`DEFAULT_OMEGA`] (um).
pub const DEFAULT_BLOCKADE_RADIUS: f64 = 6.7;
/// Atom spacing for one unit of graph coordinates (um).
pub const DEFAULT_SPACING: f64 = 4.8;

#[derive(Debug, Clone, PartialEq)]
pub struct RydbergModel {
    /// Van der Waals coefficient, rad um^6 / us.
    pub c6: f64,
    /// Micrometers per unit of graph coordinates.
    pub spacing: f64,
    pub max_qubits: usize,
    /// Upper bound on the integration step, us.
    pub max_step: f64,
    pub norm_tolerance: f64,
}

impl Default for RydbergModel {
    fn default() -> Self {
        Self {
            c6: DEFAULT_OMEGA * DEFAULT_BLOCKADE_RADIUS.powi(6),
            spacing: DEFAULT_SPACING,
            max_qubits: 16,
            max_step: 5e-4,
            norm_tolerance: 1e-8,
        }
    }
}

impl RydbergModel {
    pub fn blockade_radius(&self, omega: f64) -> f64 {
        (self.c6 / omega).powf(1.0 / 6.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.c6 > 0.0) || !(self.spacing > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::Parameter(format!(
                "c6, spacing and max_step must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Atom coordinates in micrometers.
    pub fn atom_positions(&self, g: &Graph) -> Result<Vec<[f64; 2]>> {
        let pos = g
            .positions()
            .ok_or_else(|| Error::Parameter("Rydberg emulation needs vertex positions".into()))?;
        Ok(pos
            .iter()
            .map(|p| [p[0] * self.spacing, p[1] * self.spacing])
            .collect())
    }

    /// Interaction energy `sum_{i<j in z} C6/r^6` of every basis state.
    pub fn interaction_energies(&self, g: &Graph) -> Result<Vec<f64>> {
        let pos = self.atom_positions(g)?;
        let n = pos.len();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    return Err(Error::Parameter(format!("atoms {i} and {j} coincide")));
                }
                let v = self.c6 / (r2 * r2 * r2);
                pair[i * n + j] = v;
                pair[j * n + i] = v;
            }
        }
        let mut energies = vec![0.0; 1 << n];
        for z in 1usize..1 << n {
            let v = z.trailing_zeros() as usize;
            let rest = z & (z - 1);
            let mut e = energies[rest];
            let mut bits = rest;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                e += pair[v * n + j];
                bits &= bits - 1;
            }
            energies[z] = e;
        }
        Ok(energies)
    }
}

/// Time-dependent drive amplitudes.
pub trait Drive {
    fn omega(&self, t: f64) -> f64;
    fn delta(&self, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrive {
    pub omega: f64,
    pub delta: f64,
}

impl Drive for ConstantDrive {
    fn omega(&self, _t: f64) -> f64 {
        self.omega
    }

    fn delta(&self, _t: f64) -> f64 {
        self.delta
    }
}

/// Piecewise-linear waveform through `(time, value)` knots, held constant
/// outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    knots: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() || knots.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::Parameter(
                "waveform knots must be non-empty and time-ordered".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                if t1 == t0 {
                    return v1;
                }
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        k[k.len() - 1].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDrive {
    pub omega: Waveform,
    pub delta: Waveform,
}

impl Drive for PiecewiseDrive {
    fn omega(&self, t: f64) -> f64 {
        self.omega.at(t)
    }

    fn delta(&self, t: f64) -> f64 {
        self.delta.at(t)
    }
}

/// Sudden quench from the all-ground state under constant `omega`, `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchParams {
    /// Evolution time, us.
    pub t: f64,
    /// Detuning, rad/us.
    pub delta: f64,
    /// Rabi frequency, rad/us.
    pub omega: f64,
}

impl QuenchParams {
    pub fn new(t: f64, delta: f64) -> Self {
        Self {
            t,
            delta,
            omega: DEFAULT_OMEGA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !(self.omega >= 0.0) || !self.delta.is_finite() {
            return Err(Error::Parameter(format!("invalid quench {self:?}")));
        }
        Ok(())
    }
}

/// Trapezoidal Rabi pulse with a linear detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealProtocol {
    pub t_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub omega_max: f64,
    /// Fraction of `t_max` spent on each of the rise and fall ramps.
    pub ramp_fraction: f64,
}

impl Default for AnnealProtocol {
    fn default() -> Self {
        Self {
            t_max: 3.80,
            delta_min: -13.47,
            delta_max: 41.95,
            omega_max: DEFAULT_OMEGA,
            ramp_fraction: 0.15,
        }
    }
}

impl AnnealProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) {
            return Err(Error::Parameter(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.delta_min < self.delta_max) {
            return Err(Error::Parameter(format!(
                "delta_min {} must be below delta_max {}",
                self.delta_min, self.delta_max
            )));
        }
        if !(self.omega_max >= 0.0) || !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 0.5) {
            return Err(Error::Parameter(format!("invalid pulse shape {self:?}")));
        }
        Ok(())
    }

    pub fn drive(&self) -> Result<PiecewiseDrive> {
        self.validate()?;
        let ramp = self.ramp_fraction * self.t_max;
        Ok(PiecewiseDrive {
            omega: Waveform::new(vec![
                (0.0, 0.0),
                (ramp, self.omega_max),
                (self.t_max - ramp, self.omega_max),
                (self.t_max, 0.0),
            ])?,
            delta: Waveform::new(vec![(0.0, self.delta_min), (self.t_max, self.delta_max)])?,
        })
    }
}

// Yoshida triple-jump weights.
fn yoshida_weights() -> (f64, f64) {
    let cbrt2 = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - cbrt2);
    (w1, 1.0 - 2.0 * w1)
}

/// Integrates `i d|psi>/dt = H(t)|psi>` from `0` to `t_final`.
pub fn rydberg_evolve(
    g: &Graph,
    drive: &dyn Drive,
    model: &RydbergModel,
    t_final: f64,
    initial: StateVector,
) -> Result<StateVector> {
    model.validate()?;
    let n = g.n();
    if n > model.max_qubits {
        return Err(Error::Resource(format!(
            "{n} atoms exceeds the dense-evolution cap of {}",
            model.max_qubits
        )));
    }
    if initial.n() != n {
        return Err(Error::Dimension(format!(
            "initial state has {} qubits, graph has {n}",
            initial.n()
        )));
    }
    if !(t_final >= 0.0) {
        return Err(Error::Parameter(format!(
            "negative evolution time {t_final}"
        )));
    }
    let interactions = model.interaction_energies(g)?;
    if t_final == 0.0 {
        return Ok(initial);
    }

    let steps = (t_final / model.max_step).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let (w1, w0) = yoshida_weights();
    let taus = [w1 * h, w0 * h, w1 * h];
    // The trailing half-kick of one step and the leading one of the next are
    // fused, so each step costs three diagonal passes.
    let interaction_phase = |tau: f64| -> Vec<Complex64> {
        interactions
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * tau))
            .collect()
    };
    let edge_table = interaction_phase(0.5 * taus[0]);
    let inner_table = interaction_phase(0.5 * (taus[0] + taus[1]));
    let fused_table = interaction_phase(taus[0]);
    let popcount: Vec<u16> = (0..1usize << n).map(|z| z.count_ones() as u16).collect();

    let mut psi = initial;
    // multiplies by exp(-i V tau) exp(+i delta_weight * popcount), V via the table
    let diagonal = |psi: &mut StateVector, table: &[Complex64], delta_weight: f64| {
        let pop: Vec<Complex64> = (0..=n)
            .map(|k| Complex64::from_polar(1.0, delta_weight * k as f64))
            .collect();
        for ((amp, &v), &k) in psi.amplitudes_mut().iter_mut().zip(table).zip(&popcount) {
            *amp *= v * pop[k as usize];
        }
    };
    let mids = |step: usize| -> [f64; 3] {
        let t0 = step as f64 * h;
        [
            t0 + 0.5 * taus[0],
            t0 + taus[0] + 0.5 * taus[1],
            t0 + taus[0] + taus[1] + 0.5 * taus[2],
        ]
    };

    let mut pending = 0.5 * taus[0] * drive.delta(mids(0)[0]);
    let mut pending_table = &edge_table;
    for step in 0..steps {
        let m = mids(step);
        let deltas = m.map(|t| drive.delta(t));
        let omegas = m.map(|t| drive.omega(t));

        diagonal(&mut psi, pending_table, pending);
        psi.rotate_x_all(0.5 * omegas[0] * taus[0]);
        diagonal(
            &mut psi,
            &inner_table,
            0.5 * (taus[0] * deltas[0] + taus[1] * deltas[1]),
        );
        psi.rotate_x_all(0.5 * omegas[1] * taus[1]);
        diagonal(
            &mut psi,
            &inner_table,
            0.5 * (taus[1] * deltas[1] + taus[2] * deltas[2]),
        );
        psi.rotate_x_all(0.5 * omegas[2] * taus[2]);
        pending = 0.5 * taus[2] * deltas[2];
        if step + 1 < steps {
            pending += 0.5 * taus[0] * drive.delta(mids(step + 1)[0]);
            pending_table = &fused_table;
        } else {
            pending_table = &edge_table;
        }
    }
    diagonal(&mut psi, pending_table, pending);

    let drift = (psi.norm() - 1.0).abs();
    if drift > model.norm_tolerance {
        return Err(Error::Numerical(format!(
            "norm drifted by {drift:e} (tolerance {:e})",
            model.norm_tolerance
        )));
    }
    Ok(psi)
}

pub fn quench_state(g: &Graph, params: &QuenchParams, model: &RydbergModel) -> Result<StateVector> {
    params.validate()?;
    let drive = ConstantDrive {
        omega: params.omega,
        delta: params.delta,
    };
    rydberg_evolve(g, &drive, model, params.t, StateVector::ground(g.n()))
}

pub fn quench_distribution(
    g: &Graph,
    params: &QuenchParams,
    model: &RydbergModel,
) -> Result<OutcomeDistribution> {
    let psi = quench_state(g, params, model)?;
    OutcomeDistribution::from_probabilities(g.n(), &psi.probabilities())
}

pub fn quench_meta(params: &QuenchParams, seed: u64) -> ShotMeta {
    ShotMeta::new("quench")
        .with_seed(seed)
        .with_param("t", params.t)
        .with_param("delta", params.delta)
        .with_param("omega", params.omega)
}

pub fn quench_sample(
    g: &Graph,
    params: &QuenchParams,
    model: &RydbergModel,
    shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    let dist = quench_distribution(g, params, model)?;
    ShotSet::new(
        dist.sample(shots, &mut seed::rng(seed)),
        quench_meta(params, seed),
    )
}

pub fn anneal_state(
    g: &Graph,
    protocol: &AnnealProtocol,
    model: &RydbergModel,
) -> Result<StateVector> {
    let drive = protocol.drive()?;
    rydberg_evolve(g, &drive, model, protocol.t_max, StateVector::ground(g.n()))
}

pub fn anneal_distribution(
    g: &Graph,
    protocol: &AnnealProtocol,
    model: &RydbergModel,
) -> Result<OutcomeDistribution> {
    let psi = anneal_state(g, protocol, model)?;
    OutcomeDistribution::from_probabilities(g.n(), &psi.probabilities())
}

pub fn anneal_meta(protocol: &AnnealProtocol, seed: u64) -> ShotMeta {
    ShotMeta::new("anneal")
        .with_seed(seed)
        .with_param("t_max", protocol.t_max)
        .with_param("delta_min", protocol.delta_min)
        .with_param("delta_max", protocol.delta_max)
        .with_param("omega_max", protocol.omega_max)
        .with_param("ramp_fraction", protocol.ramp_fraction)
}

pub fn anneal_sample(
    g: &Graph,
    protocol: &AnnealProtocol,
    model: &RydbergModel,
    shots: usize,
    seed: u64,
) -> Result<ShotSet> {
    let dist = anneal_distribution(g, protocol, model)?;
    ShotSet::new(
        dist.sample(shots, &mut seed::rng(seed)),
        anneal_meta(protocol, seed),
    )
}
