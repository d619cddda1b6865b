use num_complex::Complex64;

use crate::graphs::BitString;

/// Dense `2^n` amplitude vector. Basis index bit `i` is qubit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn ground(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    /// `|+...+>`.
    pub fn plus(n: usize) -> Self {
        let a = (0.5f64).powf(n as f64 / 2.0);
        Self {
            n,
            amps: vec![Complex64::new(a, 0.0); 1 << n],
        }
    }

    pub fn basis(bits: &BitString) -> Self {
        let mut s = Self::ground(bits.len());
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[bits.to_index()] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Option<Self> {
        (amps.len() == 1 << n).then_some(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps
            .iter()
            .map(Complex64::norm_sqr)
            .sum::<f64>()
            .sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// Applies `exp(-i theta X_q)` on every qubit `q`.
    pub fn rotate_x_all(&mut self, theta: f64) {
        let (s, c) = theta.sin_cos();
        for q in 0..self.n {
            let stride = 1usize << q;
            for chunk in self.amps.chunks_exact_mut(2 * stride) {
                let (lo, hi) = chunk.split_at_mut(stride);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (a, b) = (*x, *y);
                    // (c - i s X) acting on (a, b)
                    *x = Complex64::new(c * a.re + s * b.im, c * a.im - s * b.re);
                    *y = Complex64::new(c * b.re + s * a.im, c * b.im - s * a.re);
                }
            }
        }
    }

    /// Multiplies amplitude `z` by `table[class[z]]`.
    pub(crate) fn apply_phase_classes(&mut self, class: &[u16], table: &[Complex64]) {
        for (amp, &c) in self.amps.iter_mut().zip(class) {
            *amp *= table[c as usize];
        }
    }
}
