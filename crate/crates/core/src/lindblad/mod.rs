//! Master-equation dynamics with the cascade dissipator
//!
//! ```text
//! L(ρ)ᵢᵢ = Γᵢ₊₁ρᵢ₊₁,ᵢ₊₁ − Γᵢρᵢᵢ   (Γ₁ρ₁₁ omitted, level 1 is stable)
//! L(ρ)ᵢⱼ = −γᵢⱼρᵢⱼ,  γᵢⱼ = (Γᵢ + Γⱼ)/2
//! ```
//!
//! plus time propagation, steady states and probe transmission.

mod integrator;
mod periodic;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::operator::{DensityMatrix, Freq, Operator, StateTolerance, C64};

pub(crate) use integrator::{Dopri, Tolerances};
pub use periodic::{common_period, probe_response, ProbeResponse, ResponseMethod, SteadyStateOptions};

/// Per-level decay rates Γ₁..Γₙ of a cascade 𝑛 → … → 2 → 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    decay_rates: Vec<Freq>,
}

impl LevelScheme {
    pub fn new(decay_rates: Vec<Freq>) -> Result<Self> {
        for (i, g) in decay_rates.iter().enumerate() {
            if !(g.is_finite() && g.value() >= 0.0) {
                return Err(Error::param(&format!("gamma_{}", i + 1), "decay rate must be finite and ≥ 0"));
            }
        }
        Ok(LevelScheme { decay_rates })
    }

    /// Only |2⟩ decays: Γ₂ = Γ and Γ₁ = Γ₃ = Γ₄ = 0.
    pub fn cascade(gamma: Freq) -> Result<Self> {
        Self::new(vec![Freq::ZERO, gamma, Freq::ZERO, Freq::ZERO])
    }

    pub fn dim(&self) -> usize {
        self.decay_rates.len()
    }

    pub fn decay_rates(&self) -> &[Freq] {
        &self.decay_rates
    }

    /// γᵢⱼ in linear units (1-based indices).
    pub fn dephasing(&self, i: usize, j: usize) -> Freq {
        Freq(0.5 * (self.decay_rates[i - 1].value() + self.decay_rates[j - 1].value()))
    }

    fn angular(&self) -> Vec<f64> {
        self.decay_rates.iter().map(|g| g.angular()).collect()
    }

    fn max_rate(&self) -> f64 {
        self.decay_rates.iter().map(|g| g.angular()).fold(0.0, f64::max)
    }
}

/// Writes `−i[H, ρ] + L(ρ)` into `out`. All slices are column-major n×n.
pub(crate) fn rhs_into(h: &[C64], rho: &[C64], rates: &[f64], n: usize, out: &mut [C64]) {
    for j in 0..n {
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += h[i + k * n] * rho[k + j * n] - rho[i + k * n] * h[k + j * n];
            }
            let mut d = C64::new(acc.im, -acc.re); // −i·acc
            if i == j {
                if i + 1 < n {
                    d += rho[(i + 1) * (n + 1)] * rates[i + 1];
                }
                if i > 0 {
                    d -= rho[i * (n + 1)] * rates[i];
                }
            } else {
                d -= rho[i + j * n] * (0.5 * (rates[i] + rates[j]));
            }
            out[i + j * n] = d;
        }
    }
}

/// `dρ/dt = −i[H, ρ] + L(ρ)`.
pub fn lindblad_rhs(h: &Operator, rho: &DensityMatrix, scheme: &LevelScheme) -> Result<Operator> {
    let n = h.dim();
    if rho.dim() != n || scheme.dim() != n {
        return Err(Error::Dimension(format!(
            "H is {n}×{n}, ρ is {0}×{0}, scheme has {1} levels",
            rho.dim(),
            scheme.dim()
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    rhs_into(h.as_slice(), rho.as_operator().as_slice(), &scheme.angular(), n, &mut out);
    Operator::from_matrix(DMatrix::from_vec(n, n, out))
}

/// Integration and averaging windows. Times are in reciprocal linear units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_settle: f64,
    pub t_average: f64,
    pub max_step: f64,
    /// Number of evenly spaced trajectory samples over `[0, t_settle + t_average]`.
    pub samples: usize,
}

impl EvolutionConfig {
    /// rtol 1e-8, atol 1e-10, settle for 20/Γ and average over 20 periods
    /// of the slowest tone.
    pub fn for_system(scheme: &LevelScheme, h: &TimeDependentHamiltonian) -> Self {
        let gamma = scheme.max_rate();
        let t_settle = if gamma > 0.0 { 20.0 / gamma } else { 1.0 };
        let tones = h.corotating().period_hints();
        let slowest = tones.iter().copied().fold(f64::INFINITY, f64::min);
        let fastest = tones.iter().copied().fold(0.0, f64::max);
        let t_average = if slowest.is_finite() { 20.0 * std::f64::consts::TAU / slowest } else { t_settle };
        let max_step = if fastest > 0.0 { std::f64::consts::TAU / fastest / 4.0 } else { (t_settle + t_average) / 20.0 };
        EvolutionConfig { rel_tol: 1e-8, abs_tol: 1e-10, t_settle, t_average, max_step, samples: 201 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be positive and finite"))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("t_settle", self.t_settle)?;
        positive("t_average", self.t_average)?;
        positive("max_step", self.max_step)?;
        if self.samples < 2 {
            return Err(Error::param("samples", "need at least 2 samples"));
        }
        Ok(())
    }

    pub(crate) fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.rel_tol, atol: self.abs_tol, max_step: self.max_step, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn state_from_slice(n: usize, y: &[C64]) -> Result<DensityMatrix> {
    Ok(DensityMatrix::new_unchecked(Operator::from_matrix(DMatrix::from_column_slice(n, n, y))?))
}

fn check_loose(rho: &DensityMatrix, t: f64) -> Result<()> {
    let tol = StateTolerance::default();
    let loose = StateTolerance { trace: 10.0 * tol.trace, hermiticity: 10.0 * tol.hermiticity, positivity: 10.0 * tol.positivity };
    rho.check(loose).map_err(|e| match e {
        Error::Invariant(msg) => Error::Invariant(format!("{msg} at t = {t}")),
        other => other,
    })
}

/// Propagates `ρ₀` under `h` over `[0, t_settle + t_average]`.
pub fn evolve(
    h: &TimeDependentHamiltonian,
    rho0: &DensityMatrix,
    scheme: &LevelScheme,
    config: &EvolutionConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let n = rho0.dim();
    if h.dim() != n || scheme.dim() != n {
        return Err(Error::Dimension(format!("H has dim {}, ρ₀ {n}, scheme {}", h.dim(), scheme.dim())));
    }
    rho0.check(StateTolerance::default())?;
    let rates = scheme.angular();
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| rhs_into(h.at(t).as_slice(), y, &rates, n, dy);
    let mut y = rho0.as_operator().as_slice().to_vec();
    let mut solver = Dopri::new(n * n, config.tolerances());
    let total = config.t_settle + config.t_average;
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    for s in 1..config.samples {
        let t0 = total * (s - 1) as f64 / (config.samples - 1) as f64;
        let t1 = total * s as f64 / (config.samples - 1) as f64;
        solver.integrate(&mut f, t0, t1, &mut y)?;
        let rho = state_from_slice(n, &y)?;
        check_loose(&rho, t1)?;
        times.push(t1);
        states.push(rho);
    }
    Ok(Trajectory { times, states })
}

/// Time average of Im ρ₂₁ over `[t_settle, t_settle + t_average]` starting
/// from |1⟩⟨1|, propagated in the co-rotating frame when one is available.
pub fn quasi_steady_im_rho21(h: &TimeDependentHamiltonian, scheme: &LevelScheme, config: &EvolutionConfig) -> Result<f64> {
    Ok(time_averaged_rho21(h, scheme, config)?.im)
}

pub(crate) fn time_averaged_rho21(
    h: &TimeDependentHamiltonian,
    scheme: &LevelScheme,
    config: &EvolutionConfig,
) -> Result<C64> {
    config.validate()?;
    let frame = h.corotating();
    let n = frame.dim();
    if scheme.dim() != n {
        return Err(Error::Dimension(format!("H has dim {n}, scheme {}", scheme.dim())));
    }
    let gamma = scheme.max_rate();
    if gamma > 0.0 && config.t_settle < 10.0 / gamma {
        warn!("settling window {} is shorter than 10/Γ = {}", config.t_settle, 10.0 / gamma);
    }
    if let Some(slowest) = frame.period_hints().iter().copied().reduce(f64::min) {
        let needed = 10.0 * std::f64::consts::TAU / slowest;
        if config.t_average < needed {
            warn!("averaging window {} is shorter than 10 periods ({needed})", config.t_average);
        }
    }
    let rates = scheme.angular();
    let idx21 = 1;
    let mut y = vec![C64::new(0.0, 0.0); n * n + 1];
    y[0] = C64::new(1.0, 0.0);
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| {
        rhs_into(frame.at(t).as_slice(), &y[..n * n], &rates, n, &mut dy[..n * n]);
        dy[n * n] = y[idx21];
    };
    let mut solver = Dopri::new(n * n + 1, config.tolerances());
    // settle in chunks so the loose invariant check sees intermediate states
    let chunks = 10;
    for c in 0..chunks {
        let t0 = config.t_settle * c as f64 / chunks as f64;
        let t1 = config.t_settle * (c + 1) as f64 / chunks as f64;
        solver.integrate(&mut f, t0, t1, &mut y)?;
        check_loose(&state_from_slice(n, &y[..n * n])?, t1)?;
    }
    y[n * n] = C64::new(0.0, 0.0);
    solver.integrate(&mut f, config.t_settle, config.t_settle + config.t_average, &mut y)?;
    check_loose(&state_from_slice(n, &y[..n * n])?, config.t_settle + config.t_average)?;
    Ok(y[n * n] / config.t_average)
}

/// Liouvillian superoperator acting on column-major `vec(ρ)`.
pub(crate) fn liouvillian(h: &Operator, scheme: &LevelScheme) -> DMatrix<C64> {
    let n = h.dim();
    let rates = scheme.angular();
    let mut l = DMatrix::zeros(n * n, n * n);
    let mut basis = vec![C64::new(0.0, 0.0); n * n];
    let mut col = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n * n {
        basis[k] = C64::new(1.0, 0.0);
        rhs_into(h.as_slice(), &basis, &rates, n, &mut col);
        l.column_mut(k).copy_from_slice(&col);
        basis[k] = C64::new(0.0, 0.0);
    }
    l
}

/// Number of singular values below `rel·σ_max`.
pub(crate) fn nullity(m: &DMatrix<C64>, rel: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s <= rel * max).count()
}

pub(crate) const STATIC_NULLITY_TOL: f64 = 1e-11;

/// Solves `M·v = 0` with the first row replaced by the trace condition.
pub(crate) fn solve_with_trace_row(mut m: DMatrix<C64>, n: usize) -> Result<Vec<C64>> {
    let dim = n * n;
    for k in 0..dim {
        m[(0, k)] = C64::new(0.0, 0.0);
    }
    for i in 0..n {
        m[(0, i * (n + 1))] = C64::new(1.0, 0.0);
    }
    let mut rhs = nalgebra::DVector::zeros(dim);
    rhs[0] = C64::new(1.0, 0.0);
    let v = m.lu().solve(&rhs).ok_or(Error::SingularSteadyState { nullity: 2 })?;
    Ok(v.iter().copied().collect())
}

/// Hermitian, unit-trace part of a solved steady state.
pub(crate) fn tidy_state(n: usize, v: &[C64]) -> Result<DensityMatrix> {
    let raw = Operator::from_matrix(DMatrix::from_column_slice(n, n, v))?;
    let herm = (&raw + &crate::operator::dagger(&raw)).scale_real(0.5);
    let tr = herm.trace().re;
    Ok(DensityMatrix::new_unchecked(herm.scale_real(1.0 / tr)))
}

/// Unique steady state of a time-independent Hamiltonian.
pub fn steady_state(h: &Operator, scheme: &LevelScheme) -> Result<DensityMatrix> {
    let n = h.dim();
    if scheme.dim() != n {
        return Err(Error::Dimension(format!("H has dim {n}, scheme {}", scheme.dim())));
    }
    let l = liouvillian(h, scheme);
    let k = nullity(&l, STATIC_NULLITY_TOL);
    if k > 1 {
        return Err(Error::SingularSteadyState { nullity: k });
    }
    let v = solve_with_trace_row(l, n)?;
    let rho = tidy_state(n, &v)?;
    rho.check(StateTolerance::default())?;
    Ok(rho)
}

/// Optical-depth factor of `T = exp(−K·Im ρ₂₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    pub kappa: f64,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig { kappa: 50.0 }
    }
}

pub fn transmission(im_rho21: f64, cfg: TransmissionConfig) -> f64 {
    (-cfg.kappa * im_rho21).exp()
}

/// Parameters of the weak-probe loop model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopModelParams {
    pub omega_c1: Freq,
    pub omega_c2: Freq,
    pub omega_loop: Freq,
    pub phi_loop: f64,
    pub delta: Freq,
    pub omega_p: Freq,
    pub gamma: Freq,
}

/// Closed-form weak-probe Im ρ₂₁:
///
/// ```text
/// Ω_pΓ(2Δ+|Ω|)²(2Δ−|Ω|)² / (4[Δ(Ω_c1² + Ω_c2²) + Ω_c1Ω_c2|Ω|cos φ]² + Γ²(2Δ+|Ω|)²(2Δ−|Ω|)²)
/// ```
pub fn weak_probe_im_rho21_analytic(p: &LoopModelParams) -> Result<f64> {
    if !(p.gamma.value() > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if p.omega_loop.value() < 0.0 {
        return Err(Error::param("omega_loop", "must be ≥ 0"));
    }
    let (c1, c2, w, d) = (p.omega_c1.value(), p.omega_c2.value(), p.omega_loop.value(), p.delta.value());
    let g = p.gamma.value();
    let zeros = (2.0 * d + w).powi(2) * (2.0 * d - w).powi(2);
    let bracket = d * (c1 * c1 + c2 * c2) + c1 * c2 * w * p.phi_loop.cos();
    let denom = 4.0 * bracket * bracket + g * g * zeros;
    if denom == 0.0 {
        return Err(Error::param("delta", "numerator and denominator of the weak-probe response both vanish"));
    }
    Ok(p.omega_p.value() * g * zeros / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_chain_effective, build_dressed_effective, build_full, BareDriveParams, MixingParams};
    use crate::floquet::EffectiveCouplings;
    use crate::operator::{dagger, projector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cascade5() -> LevelScheme {
        LevelScheme::cascade(Freq(5.0)).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Operator {
        let mut h = Operator::zeros(n);
        for i in 1..=n {
            h.add_at(i, i, C64::new(scale * rng.random_range(-1.0..1.0), 0.0));
            for j in i + 1..=n {
                h.add_hermitian_pair(i, j, C64::new(scale * rng.random_range(-1.0..1.0), scale * rng.random_range(-1.0..1.0)));
            }
        }
        h
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let a = random_hermitian(rng, n, 1.0);
        let m = a.matmul(&dagger(&a)).unwrap();
        let m = &m + &Operator::identity(n).scale_real(0.1);
        let tr = m.trace().re;
        DensityMatrix::new(m.scale_real(1.0 / tr), StateTolerance::default()).unwrap()
    }

    #[test]
    fn ground_state_is_dark() {
        let d = lindblad_rhs(&Operator::zeros(4), &DensityMatrix::basis(1, 4).unwrap(), &cascade5()).unwrap();
        assert_eq!(d, Operator::zeros(4));
    }

    #[test]
    fn decay_of_level_two() {
        let d = lindblad_rhs(&Operator::zeros(4), &DensityMatrix::basis(2, 4).unwrap(), &cascade5()).unwrap();
        let g = Freq(5.0).angular();
        assert!((d.get(1, 1).re - g).abs() < 1e-12);
        assert!((d.get(2, 2).re + g).abs() < 1e-12);
    }

    #[test]
    fn dissipator_matches_cascade_matrix_entrywise() {
        let scheme = LevelScheme::new(vec![Freq(0.3), Freq(1.0), Freq(2.0), Freq(3.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_state(&mut rng, 4);
        let d = lindblad_rhs(&Operator::zeros(4), &rho, &scheme).unwrap();
        let g: Vec<f64> = scheme.decay_rates().iter().map(|f| f.angular()).collect();
        let p = |i| rho.get(i, i);
        let expected_diag = [p(2) * g[1], p(3) * g[2] - p(2) * g[1], p(4) * g[3] - p(3) * g[2], -p(4) * g[3]];
        for i in 1..=4 {
            assert!((d.get(i, i) - expected_diag[i - 1]).norm() < 1e-12);
            for j in 1..=4 {
                if i != j {
                    let want = -rho.get(i, j) * (0.5 * (g[i - 1] + g[j - 1]));
                    assert!((d.get(i, j) - want).norm() < 1e-12);
                }
            }
        }
    }

    /// The same dissipator written with jump operators √Γᵢ|i−1⟩⟨i| (i ≥ 2)
    /// when Γ₁ = 0.
    #[test]
    fn cascade_equals_jump_operator_form() {
        let scheme = LevelScheme::new(vec![Freq(0.0), Freq(1.3), Freq(0.7), Freq(2.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_state(&mut rng, 4);
        let rho_op = rho.as_operator();
        let mut expected = Operator::zeros(4);
        for i in 2..=4 {
            let g = scheme.decay_rates()[i - 1].angular();
            let c = projector(i - 1, i, 4).unwrap().scale_real(g.sqrt());
            let cd = dagger(&c);
            let jump = c.matmul(rho_op).unwrap().matmul(&cd).unwrap();
            let cdc = cd.matmul(&c).unwrap();
            let anti = &cdc.matmul(rho_op).unwrap() + &rho_op.matmul(&cdc).unwrap();
            expected = &(&expected + &jump) - &anti.scale_real(0.5);
        }
        let d = lindblad_rhs(&Operator::zeros(4), &rho, &scheme).unwrap();
        assert!(d.distance(&expected) < 1e-12);
    }

    proptest! {
        #[test]
        fn derivative_is_traceless_and_hermitian(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, 4, 10.0);
            let rho = random_state(&mut rng, 4);
            let scheme = LevelScheme::new((0..4).map(|_| Freq(rng.random_range(0.0..5.0))).collect()).unwrap();
            let d = lindblad_rhs(&h, &rho, &scheme).unwrap();
            prop_assert!(d.trace().norm() < 1e-10);
            prop_assert!(d.hermiticity_error() < 1e-12);
        }
    }

    fn short_config(t: f64) -> EvolutionConfig {
        EvolutionConfig { rel_tol: 1e-10, abs_tol: 1e-12, t_settle: t / 2.0, t_average: t / 2.0, max_step: t / 10.0, samples: 41 }
    }

    #[test]
    fn free_ground_state_is_constant() {
        let h = TimeDependentHamiltonian::constant(Operator::zeros(4));
        let tr = evolve(&h, &DensityMatrix::basis(1, 4).unwrap(), &cascade5(), &short_config(1.0)).unwrap();
        assert!(tr.states.iter().all(|s| s.population(1) == 1.0));
    }

    #[test]
    fn exponential_decay_oracle() {
        let h = TimeDependentHamiltonian::constant(Operator::zeros(4));
        let tr = evolve(&h, &DensityMatrix::basis(2, 4).unwrap(), &cascade5(), &short_config(0.2)).unwrap();
        let g = Freq(5.0).angular();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s.population(2) - (-g * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rabi_oracle() {
        let scheme = LevelScheme::new(vec![Freq::ZERO; 4]).unwrap();
        let wp = Freq(3.0).angular();
        let mut h = Operator::zeros(4);
        h.add_hermitian_pair(1, 2, C64::new(-0.5 * wp, 0.0));
        let tr = evolve(&TimeDependentHamiltonian::constant(h), &DensityMatrix::basis(1, 4).unwrap(), &scheme, &short_config(1.0)).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s.population(2) - (wp * t / 2.0).sin().powi(2)).abs() < 1e-8);
        }
    }

    fn two_level(omega_p: f64) -> Operator {
        let mut h = Operator::zeros(4);
        h.add_hermitian_pair(1, 2, C64::new(-0.5 * Freq(omega_p).angular(), 0.0));
        h
    }

    #[test]
    fn two_level_steady_state_oracle() {
        for wp in [0.1, 1.0, 4.0] {
            // upper levels decay so the steady state is unique
            let scheme = LevelScheme::new(vec![Freq::ZERO, Freq(5.0), Freq(1.0), Freq(1.0)]).unwrap();
            let rho = steady_state(&two_level(wp), &scheme).unwrap();
            let (o, g) = (wp, 5.0);
            let want = o * g / (g * g + 2.0 * o * o);
            assert!((rho.rho21().im - want).abs() < 1e-12, "{} vs {want}", rho.rho21().im);
        }
    }

    #[test]
    fn time_average_matches_two_level_oracle() {
        let h = TimeDependentHamiltonian::constant(two_level(1.0));
        let mut cfg = EvolutionConfig::for_system(&cascade5(), &h);
        cfg.t_settle *= 3.0;
        let im = quasi_steady_im_rho21(&h, &cascade5(), &cfg).unwrap();
        assert!((im - 5.0 / 27.0).abs() < 1e-6);
        let zero = TimeDependentHamiltonian::constant(Operator::zeros(4));
        assert_eq!(quasi_steady_im_rho21(&zero, &cascade5(), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn free_steady_state_is_ground() {
        let rho = steady_state(&Operator::zeros(4), &cascade5());
        // H = 0 leaves |3⟩, |4⟩ populations frozen when Γ₃ = Γ₄ = 0
        assert!(matches!(rho, Err(Error::SingularSteadyState { nullity }) if nullity > 1));
        let all = LevelScheme::new(vec![Freq::ZERO, Freq(5.0), Freq(1.0), Freq(1.0)]).unwrap();
        let rho = steady_state(&Operator::zeros(4), &all).unwrap();
        assert!((rho.population(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_matches_long_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scheme = LevelScheme::new(vec![Freq::ZERO, Freq(5.0), Freq(1.0), Freq(0.5)]).unwrap();
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 4, 3.0);
            let ss = steady_state(&h, &scheme).unwrap();
            let cfg = EvolutionConfig { rel_tol: 1e-10, abs_tol: 1e-13, t_settle: 60.0, t_average: 1e-3, max_step: 0.05, samples: 3 };
            let tr = evolve(&TimeDependentHamiltonian::constant(h), &DensityMatrix::basis(1, 4).unwrap(), &scheme, &cfg).unwrap();
            let last = tr.states.last().unwrap();
            assert!(last.as_operator().distance(ss.as_operator()) < 1e-6);
        }
    }

    #[test]
    fn lab_and_corotating_frames_agree() {
        let p = BareDriveParams {
            omega_p: Freq(1.0),
            omega_c: Freq(2.0),
            delta_c: Freq(7.0),
            omega_l: Freq(8.0),
            omega_1: Freq(3.0),
            delta_1: Freq(30.0),
            omega_2: Freq(2.0),
            delta_2: Freq(25.0),
        };
        let h = build_full(&p).unwrap();
        let cfg = short_config(0.6);
        let lab = evolve(&h, &DensityMatrix::basis(1, 4).unwrap(), &cascade5(), &cfg).unwrap();
        let rot = evolve(h.corotating(), &DensityMatrix::basis(1, 4).unwrap(), &cascade5(), &cfg).unwrap();
        for (a, b) in lab.states.iter().zip(&rot.states) {
            assert!((a.rho21() - b.rho21()).norm() < 1e-7);
            for l in 1..=4 {
                assert!((a.population(l) - b.population(l)).abs() < 1e-7);
            }
        }
        let mixing = MixingParams { omega_m: Freq(2.0), freq_m: Freq(9.0), delta_m: Freq(0.5), phi_m: 0.3 };
        let h = build_dressed_effective(Freq(1.0), Freq(2.0), Freq(6.0), Freq(8.0), &mixing).unwrap();
        let lab = evolve(&h, &DensityMatrix::basis(1, 4).unwrap(), &cascade5(), &cfg).unwrap();
        let rot = evolve(h.corotating(), &DensityMatrix::basis(1, 4).unwrap(), &cascade5(), &cfg).unwrap();
        for (a, b) in lab.states.iter().zip(&rot.states) {
            assert!((a.rho21() - b.rho21()).norm() < 1e-7);
        }
    }

    #[test]
    fn transmission_examples() {
        let k = TransmissionConfig::default();
        assert_eq!(transmission(0.0, k), 1.0);
        assert_eq!(transmission(0.7, TransmissionConfig { kappa: 0.0 }), 1.0);
        assert!((transmission(0.02, k) - (-1.0f64).exp()).abs() < 1e-15);
    }

    fn loop_params(delta: f64, phi: f64) -> LoopModelParams {
        LoopModelParams {
            omega_c1: Freq(2.0),
            omega_c2: Freq(1.5),
            omega_loop: Freq(4.0),
            phi_loop: phi,
            delta: Freq(delta),
            omega_p: Freq(0.05),
            gamma: Freq(5.0),
        }
    }

    #[test]
    fn analytic_examples() {
        assert_eq!(weak_probe_im_rho21_analytic(&loop_params(2.0, 0.3)).unwrap(), 0.0);
        let p = loop_params(0.0, std::f64::consts::FRAC_PI_2);
        let v = weak_probe_im_rho21_analytic(&p).unwrap();
        assert!((v - 0.05 / 5.0).abs() < 1e-15);
        let mut bad = p;
        bad.gamma = Freq(0.0);
        assert!(weak_probe_im_rho21_analytic(&bad).is_err());
    }

    proptest! {
        #[test]
        fn analytic_symmetry(delta in -10.0f64..10.0, phi in -3.2f64..3.2) {
            let a = weak_probe_im_rho21_analytic(&loop_params(delta, phi)).unwrap();
            let b = weak_probe_im_rho21_analytic(&loop_params(-delta, std::f64::consts::PI - phi)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    fn numerical_loop(p: &LoopModelParams) -> f64 {
        let couplings = EffectiveCouplings::loop_model(p.omega_c1, p.omega_c2, p.omega_loop, p.phi_loop);
        let h = build_chain_effective(p.omega_p, &couplings, p.delta);
        steady_state(&h, &LevelScheme::cascade(p.gamma).unwrap()).unwrap().rho21().im
    }

    #[test]
    fn analytic_matches_numerical_weak_probe() {
        for &(delta, phi) in &[(0.3, 0.4), (-1.1, 2.0), (2.5, 1.0), (0.0, 0.7)] {
            let mut errs = Vec::new();
            for div in [10.0, 100.0, 1000.0] {
                let mut p = loop_params(delta, phi);
                p.omega_p = Freq(5.0 / div);
                let exact = weak_probe_im_rho21_analytic(&p).unwrap();
                let num = numerical_loop(&p);
                errs.push(((num - exact) / exact).abs());
            }
            assert!(errs[1] <= 1e-2, "{errs:?}");
            assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "{errs:?}");
        }
    }
}
