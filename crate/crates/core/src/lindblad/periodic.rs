//! Long-time probe response without brute-force settling.
//!
//! Time-independent Hamiltonians use the Liouvillian null vector. For a
//! periodic Hamiltonian the one-period propagator `Φ(T)` is built from the
//! n² basis matrices and its fixed point gives the asymptotic periodic
//! state, which is then averaged over one period. When the fixed point is
//! not unique the state reached from |1⟩⟨1| is taken instead, as
//! `lim Φᴺ` applied to the ground state.

use std::f64::consts::TAU;

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    liouvillian, nullity, rhs_into, solve_with_trace_row, tidy_state, time_averaged_rho21, Dopri, EvolutionConfig,
    LevelScheme, Tolerances, STATIC_NULLITY_TOL,
};
use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::operator::{StateTolerance, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest common period accepted, in cycles of the fastest tone.
    pub max_cycles: f64,
    /// Singular values of `Φ(T) − I` below this fraction of the largest
    /// count towards the fixed-point space.
    pub nullity_tol: f64,
    /// Fall back to plain time averaging when no practical period exists.
    pub allow_time_average: bool,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions { rel_tol: 1e-10, abs_tol: 1e-12, max_cycles: 5000.0, nullity_tol: 1e-10, allow_time_average: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseMethod {
    Direct,
    PeriodicFixedPoint,
    GroundLimit,
    TimeAverage,
}

/// Period-averaged probe coherence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeResponse {
    pub rho21: C64,
    pub method: ResponseMethod,
}

impl ProbeResponse {
    pub fn im_rho21(&self) -> f64 {
        self.rho21.im
    }
}

/// Best rational approximation `p/q` with `q ≤ max_den`.
fn rationalize(x: f64, rel_tol: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e15 {
            return None;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= rel_tol * x {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Shortest `T` with every angular tone completing a whole number of
/// cycles, or `None` when that takes more than `max_cycles` cycles of the
/// fastest tone.
pub fn common_period(tones: &[f64], max_cycles: f64) -> Option<f64> {
    let tones: Vec<f64> = tones.iter().map(|t| t.abs()).filter(|&t| t > 0.0).collect();
    let slowest = tones.iter().copied().reduce(f64::min)?;
    let fastest = tones.iter().copied().fold(0.0, f64::max);
    let mut lcm: u64 = 1;
    for &t in &tones {
        let (_, q) = rationalize(t / slowest, 1e-12, 1_000_000)?;
        lcm = lcm.checked_mul(q / gcd(lcm, q))?;
    }
    let period = TAU * lcm as f64 / slowest;
    (fastest * period / TAU <= max_cycles * (1.0 + 1e-12)).then_some(period)
}

/// Makes every column of a superoperator preserve the trace exactly by
/// adjusting its (1,1) row.
fn enforce_trace(phi: &mut DMatrix<C64>, n: usize) {
    for k in 0..n * n {
        let target = if k % (n + 1) == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        let tr: C64 = (0..n).map(|i| phi[(i * (n + 1), k)]).sum();
        phi[(0, k)] += target - tr;
    }
}

/// `lim Φᴺ·vec(|1⟩⟨1|)` by repeated squaring.
fn ground_limit(mut phi: DMatrix<C64>, n: usize) -> Result<Vec<C64>> {
    enforce_trace(&mut phi, n);
    for _ in 0..200 {
        let mut sq = &phi * &phi;
        enforce_trace(&mut sq, n);
        let change = (&sq - &phi).iter().map(|z| z.norm()).fold(0.0, f64::max);
        phi = sq;
        if change <= 1e-13 {
            return Ok(phi.column(0).iter().copied().collect());
        }
        if !phi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            break;
        }
    }
    Err(Error::SingularSteadyState { nullity: 0 })
}

fn tolerances(opts: &SteadyStateOptions, period: f64, fastest: f64) -> Tolerances {
    let max_step = if fastest > 0.0 { TAU / fastest / 4.0 } else { period / 4.0 };
    Tolerances { rtol: opts.rel_tol, atol: opts.abs_tol, max_step, max_steps: 50_000_000 }
}

/// One-period propagator of the superoperator, columns = images of the
/// basis matrices E_k.
fn propagator(h: &TimeDependentHamiltonian, rates: &[f64], n: usize, period: f64, tol: Tolerances) -> Result<DMatrix<C64>> {
    let d = n * n;
    let mut y = vec![C64::new(0.0, 0.0); d * d];
    for k in 0..d {
        y[k * d + k] = C64::new(1.0, 0.0);
    }
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| {
        let ht = h.at(t);
        let hs = ht.as_slice();
        for (col, dcol) in y.chunks_exact(d).zip(dy.chunks_exact_mut(d)) {
            rhs_into(hs, col, rates, n, dcol);
        }
    };
    Dopri::new(d * d, tol).integrate(&mut f, 0.0, period, &mut y)?;
    Ok(DMatrix::from_vec(d, d, y))
}

/// Average of ρ₂₁ over one period starting from `v`; also returns the
/// state after that period.
fn period_average(
    h: &TimeDependentHamiltonian,
    rates: &[f64],
    n: usize,
    period: f64,
    tol: Tolerances,
    v: &[C64],
) -> Result<(C64, Vec<C64>)> {
    let d = n * n;
    let mut y = v.to_vec();
    y.push(C64::new(0.0, 0.0));
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| {
        rhs_into(h.at(t).as_slice(), &y[..d], rates, n, &mut dy[..d]);
        dy[d] = y[1];
    };
    Dopri::new(d + 1, tol).integrate(&mut f, 0.0, period, &mut y)?;
    let acc = y.pop().expect("accumulator present");
    Ok((acc / period, y))
}

fn checked_state(n: usize, v: &[C64]) -> Result<Vec<C64>> {
    let rho = tidy_state(n, v)?;
    let tol = StateTolerance::default();
    rho.check(StateTolerance { positivity: 10.0 * tol.positivity, ..tol })?;
    Ok(rho.as_operator().as_slice().to_vec())
}

/// Asymptotic period-averaged ρ₂₁ reached from |1⟩⟨1| under `h`.
pub fn probe_response(h: &TimeDependentHamiltonian, scheme: &LevelScheme, opts: &SteadyStateOptions) -> Result<ProbeResponse> {
    let frame = h.corotating();
    let n = frame.dim();
    if scheme.dim() != n {
        return Err(Error::Dimension(format!("H has dim {n}, scheme {}", scheme.dim())));
    }
    let rates = scheme.angular();

    if frame.is_static() {
        let l = liouvillian(&frame.at(0.0), scheme);
        let k = nullity(&l, STATIC_NULLITY_TOL);
        let (v, method) = if k <= 1 {
            (solve_with_trace_row(l, n)?, ResponseMethod::Direct)
        } else {
            debug!("static Liouvillian has a {k}-dimensional null space; following the ground state");
            let tau = 1.0 / scheme.max_rate().max(1e-3);
            (ground_limit((l * C64::new(tau, 0.0)).exp(), n)?, ResponseMethod::GroundLimit)
        };
        let v = checked_state(n, &v)?;
        return Ok(ProbeResponse { rho21: v[1], method });
    }

    let tones = frame.period_hints();
    let fastest = tones.iter().copied().fold(0.0, f64::max);
    let Some(period) = common_period(tones, opts.max_cycles) else {
        if !opts.allow_time_average {
            return Err(Error::param("period_hints", "tones have no common period within the cycle limit"));
        }
        debug!("no practical common period for tones {tones:?}; time averaging");
        let mut cfg = EvolutionConfig::for_system(scheme, h);
        cfg.samples = 2;
        let rho21 = time_averaged_rho21(h, scheme, &cfg)?;
        return Ok(ProbeResponse { rho21, method: ResponseMethod::TimeAverage });
    };

    let tol = tolerances(opts, period, fastest);
    let phi = propagator(frame, &rates, n, period, tol)?;
    let m = &phi - DMatrix::<C64>::identity(n * n, n * n);
    let k = nullity(&m, opts.nullity_tol);
    let (v, method) = if k <= 1 {
        (solve_with_trace_row(m, n)?, ResponseMethod::PeriodicFixedPoint)
    } else {
        debug!("one-period map has {k} fixed directions; following the ground state");
        match ground_limit(phi, n) {
            Ok(v) => (v, ResponseMethod::GroundLimit),
            Err(_) if opts.allow_time_average => {
                let mut cfg = EvolutionConfig::for_system(scheme, h);
                cfg.samples = 2;
                let rho21 = time_averaged_rho21(h, scheme, &cfg)?;
                return Ok(ProbeResponse { rho21, method: ResponseMethod::TimeAverage });
            }
            Err(_) => return Err(Error::SingularSteadyState { nullity: k }),
        }
    };
    let v = checked_state(n, &v)?;
    let (rho21, end) = period_average(frame, &rates, n, period, tol, &v)?;
    let drift = end.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if drift > 1e-6 {
        warn!("periodic state drifts by {drift:.2e} over one period");
    }
    Ok(ProbeResponse { rho21, method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_dual_floquet, MixingParams, PeriodicDriveParams};
    use crate::lindblad::quasi_steady_im_rho21;
    use crate::operator::{Freq, Operator};

    #[test]
    fn common_period_of_commensurate_tones() {
        let t = common_period(&[TAU * 1080.0, TAU * 1000.0], 5000.0).unwrap();
        assert!((t - 1.0 / 40.0).abs() < 1e-15);
        let t = common_period(&[TAU * 80.0, TAU * 40.0], 5000.0).unwrap();
        assert!((t - 1.0 / 40.0).abs() < 1e-15);
        let t = common_period(&[TAU * 920.5, TAU * 1000.0], 5000.0).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(common_period(&[TAU, TAU * std::f64::consts::SQRT_2], 5000.0).is_none());
        assert!(common_period(&[], 5000.0).is_none());
    }

    #[test]
    fn static_response_matches_two_level_oracle() {
        let mut h = Operator::zeros(4);
        h.add_hermitian_pair(1, 2, C64::new(-0.5 * Freq(1.0).angular(), 0.0));
        let scheme = LevelScheme::new(vec![Freq::ZERO, Freq(5.0), Freq(1.0), Freq(1.0)]).unwrap();
        let r = probe_response(&TimeDependentHamiltonian::constant(h), &scheme, &Default::default()).unwrap();
        assert_eq!(r.method, ResponseMethod::Direct);
        assert!((r.im_rho21() - 5.0 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_static_case_follows_ground_state() {
        // |3⟩ and |4⟩ are isolated and frozen; the ground-state branch is the
        // two-level answer
        let mut h = Operator::zeros(4);
        h.add_hermitian_pair(1, 2, C64::new(-0.5 * Freq(1.0).angular(), 0.0));
        h.add_hermitian_pair(3, 4, C64::new(Freq(2.0).angular(), 0.0));
        let r = probe_response(&TimeDependentHamiltonian::constant(h), &LevelScheme::cascade(Freq(5.0)).unwrap(), &Default::default()).unwrap();
        assert_eq!(r.method, ResponseMethod::GroundLimit);
        assert!((r.im_rho21() - 5.0 / 27.0).abs() < 1e-9);
    }

    #[test]
    fn periodic_fixed_point_matches_time_average() {
        let mixing = MixingParams { omega_m: Freq(4.0), freq_m: Freq(80.0), delta_m: Freq(4.0), phi_m: 0.0 };
        let drive = PeriodicDriveParams { g: 4.0, omega: Freq(40.0), phi: 0.5 };
        let h = build_dual_floquet(Freq(0.1), Freq(5.0), Freq(-17.0), Freq(40.0), &mixing, &drive).unwrap();
        let scheme = LevelScheme::cascade(Freq(5.0)).unwrap();
        let r = probe_response(&h, &scheme, &Default::default()).unwrap();
        assert_eq!(r.method, ResponseMethod::PeriodicFixedPoint);
        let mut cfg = EvolutionConfig::for_system(&scheme, &h);
        cfg.t_settle = 40.0;
        cfg.t_average = 2.0;
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-12;
        let avg = quasi_steady_im_rho21(&h, &scheme, &cfg).unwrap();
        assert!((avg - r.im_rho21()).abs() < 1e-5 * (1.0 + avg.abs()), "{avg} vs {}", r.im_rho21());
    }
}
