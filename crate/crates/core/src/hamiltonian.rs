//! Hamiltonian builders for the four-level ladder.
//!
//! Every builder takes frequencies in linear units and produces operators in
//! angular units. Time-dependent builders return a [`TimeDependentHamiltonian`]
//! that also knows an equivalent co-rotating form: a frame rotating the
//! upper levels at the control detuning, in which the control coupling is
//! static. Populations and ρ₂₁ are identical in both frames.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::EffectiveCouplings;
use crate::operator::{Freq, Operator, C64, I, LEVELS};

/// Default ratio by which the far detunings must exceed every other scale
/// for the mixing reduction to apply.
pub const DEFAULT_QFM_RATIO: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BareDriveParams {
    pub omega_p: Freq,
    pub omega_c: Freq,
    pub delta_c: Freq,
    pub omega_l: Freq,
    pub omega_1: Freq,
    pub delta_1: Freq,
    pub omega_2: Freq,
    pub delta_2: Freq,
}

impl BareDriveParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("omega_p", self.omega_p),
            ("omega_c", self.omega_c),
            ("delta_c", self.delta_c),
            ("omega_L", self.omega_l),
            ("omega_1", self.omega_1),
            ("delta_1", self.delta_1),
            ("omega_2", self.omega_2),
            ("delta_2", self.delta_2),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.omega_l.value() < 0.0 {
            return Err(Error::param("omega_L", "must be non-negative"));
        }
        Ok(())
    }

    /// Whether Δ₁, Δ₂ exceed Ω_p, Ω_c, Ω_L, Δ_c and |Δ₁−Δ₂| by `ratio`.
    pub fn qfm_valid(&self, ratio: f64) -> bool {
        let d1 = self.delta_1.value().abs();
        let d2 = self.delta_2.value().abs();
        if d1 == 0.0 || d2 == 0.0 {
            return false;
        }
        let slow = [
            self.omega_p.value().abs(),
            self.omega_c.value().abs(),
            self.omega_l.value().abs(),
            self.delta_c.value().abs(),
            (self.delta_1.value() - self.delta_2.value()).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        d1.min(d2) >= ratio * slow
    }
}

/// Effective mixed-frequency field between the dressed states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    /// Ω_M
    pub omega_m: Freq,
    /// ω_M
    pub freq_m: Freq,
    /// δ_M, the AC Stark shift
    pub delta_m: Freq,
    /// φ_M in radians
    pub phi_m: f64,
}

impl MixingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m.is_finite() && self.freq_m.is_finite() && self.delta_m.is_finite())
            || !self.phi_m.is_finite()
        {
            return Err(Error::param("mixing", "must be finite"));
        }
        if self.omega_m.value() < 0.0 {
            return Err(Error::param("omega_M", "must be non-negative"));
        }
        if self.freq_m.value() < 0.0 {
            return Err(Error::param("freq_M", "must be non-negative"));
        }
        Ok(())
    }
}

/// Periodic modulation `1 + g·cos(ωt + φ)` of the LO splitting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodicDriveParams {
    pub g: f64,
    pub omega: Freq,
    pub phi: f64,
}

impl PeriodicDriveParams {
    pub fn off() -> Self {
        PeriodicDriveParams::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.omega.is_finite() && self.phi.is_finite()) {
            return Err(Error::param("drive", "must be finite"));
        }
        if self.g != 0.0 && self.omega.value() <= 0.0 {
            return Err(Error::param("omega", "drive frequency must be positive when g ≠ 0"));
        }
        Ok(())
    }
}

type Evaluator = dyn Fn(f64) -> Operator + Send + Sync;

/// `t ↦ H(t)` plus the angular frequencies it oscillates at.
#[derive(Clone)]
pub struct TimeDependentHamiltonian {
    evaluator: Arc<Evaluator>,
    period_hints: Vec<f64>,
    corotating: Option<Arc<TimeDependentHamiltonian>>,
}

impl fmt::Debug for TimeDependentHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentHamiltonian")
            .field("period_hints", &self.period_hints)
            .field("corotating", &self.corotating.is_some())
            .finish()
    }
}

impl TimeDependentHamiltonian {
    pub fn new<F>(evaluator: F, period_hints: Vec<f64>) -> Self
    where
        F: Fn(f64) -> Operator + Send + Sync + 'static,
    {
        TimeDependentHamiltonian { evaluator: Arc::new(evaluator), period_hints, corotating: None }
    }

    pub fn constant(op: Operator) -> Self {
        Self::new(move |_| op.clone(), Vec::new())
    }

    /// Attaches an equivalent Hamiltonian in a frame that rotates only the
    /// upper levels, so ρ₂₁ and populations are unchanged.
    pub fn with_corotating(mut self, frame: TimeDependentHamiltonian) -> Self {
        self.corotating = Some(Arc::new(frame));
        self
    }

    pub fn at(&self, t: f64) -> Operator {
        (self.evaluator)(t)
    }

    pub fn dim(&self) -> usize {
        self.at(0.0).dim()
    }

    /// Angular frequencies present in `H(t)`; empty iff time-independent.
    pub fn period_hints(&self) -> &[f64] {
        &self.period_hints
    }

    pub fn is_static(&self) -> bool {
        self.period_hints.is_empty()
    }

    /// The co-rotating form when one is attached, else `self`.
    pub fn corotating(&self) -> &TimeDependentHamiltonian {
        self.corotating.as_deref().unwrap_or(self)
    }
}

fn push_tone(tones: &mut Vec<f64>, amplitude: f64, freq: f64) {
    if amplitude != 0.0 && freq != 0.0 && !tones.contains(&freq.abs()) {
        tones.push(freq.abs());
    }
}

fn probe_term(h: &mut Operator, omega_p: f64) {
    h.add_hermitian_pair(1, 2, C64::new(-0.5 * omega_p, 0.0));
}

/// Lab-frame RWA Hamiltonian with LO and two far-detuned fields on 3↔4.
pub fn build_full(params: &BareDriveParams) -> Result<TimeDependentHamiltonian> {
    params.validate()?;
    let op = params.omega_p.angular();
    let oc = params.omega_c.angular();
    let dc = params.delta_c.angular();
    let ol = params.omega_l.angular();
    let (o1, d1) = (params.omega_1.angular(), params.delta_1.angular());
    let (o2, d2) = (params.omega_2.angular(), params.delta_2.angular());

    let upper = move |t: f64| {
        C64::new(ol, 0.0) + o1 * (I * d1 * t).exp() + o2 * (I * d2 * t).exp()
    };

    let lab = move |t: f64| {
        let mut h = Operator::zeros(LEVELS);
        probe_term(&mut h, op);
        h.add_hermitian_pair(2, 3, -0.5 * oc * (I * dc * t).exp());
        h.add_hermitian_pair(3, 4, -0.5 * upper(t));
        h
    };
    let rotating = move |t: f64| {
        let mut h = Operator::zeros(LEVELS);
        probe_term(&mut h, op);
        h.add_hermitian_pair(2, 3, C64::new(-0.5 * oc, 0.0));
        h.add_at(3, 3, C64::new(-dc, 0.0));
        h.add_at(4, 4, C64::new(-dc, 0.0));
        h.add_hermitian_pair(3, 4, -0.5 * upper(t));
        h
    };

    let mut fast = Vec::new();
    push_tone(&mut fast, o1, d1);
    push_tone(&mut fast, o2, d2);
    let mut hints = Vec::new();
    push_tone(&mut hints, oc, dc);
    hints.extend(fast.iter().copied().filter(|f| !hints.contains(f)).collect::<Vec<_>>());
    Ok(TimeDependentHamiltonian::new(lab, hints)
        .with_corotating(TimeDependentHamiltonian::new(rotating, fast)))
}

/// Dressed-state effective Hamiltonian with the mixed field between |d₃⟩ and
/// |d₄⟩ (slots 3 and 4).
pub fn build_dressed_effective(
    omega_p: Freq,
    omega_c: Freq,
    delta_c: Freq,
    omega_l: Freq,
    mixing: &MixingParams,
) -> Result<TimeDependentHamiltonian> {
    build_dual_floquet(omega_p, omega_c, delta_c, omega_l, mixing, &PeriodicDriveParams::off())
}

/// Dressed effective Hamiltonian whose LO splitting is modulated by
/// `1 + g·cos(ωt + φ)`.
pub fn build_dual_floquet(
    omega_p: Freq,
    omega_c: Freq,
    delta_c: Freq,
    omega_l: Freq,
    mixing: &MixingParams,
    drive: &PeriodicDriveParams,
) -> Result<TimeDependentHamiltonian> {
    mixing.validate()?;
    drive.validate()?;
    for (name, v) in [("omega_p", omega_p), ("omega_c", omega_c), ("delta_c", delta_c), ("omega_L", omega_l)] {
        if !v.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    let op = omega_p.angular();
    let oc = omega_c.angular() * FRAC_1_SQRT_2;
    let dc = delta_c.angular();
    let ol = omega_l.angular();
    let (om, wm, dm, phim) =
        (mixing.omega_m.angular(), mixing.freq_m.angular(), mixing.delta_m.angular(), mixing.phi_m);
    let (g, w, phi) = (drive.g, drive.omega.angular(), drive.phi);

    let upper = move |h: &mut Operator, t: f64| {
        let split = 0.5 * ol * (1.0 + g * (w * t + phi).cos());
        h.add_at(3, 3, C64::new(split, 0.0));
        h.add_at(4, 4, C64::new(-split, 0.0));
        let x = om * (wm * t + phim).cos() + dm;
        h.add_hermitian_pair(3, 4, C64::new(x, 0.0));
    };

    let lab = move |t: f64| {
        let mut h = Operator::zeros(LEVELS);
        probe_term(&mut h, op);
        let c = -0.5 * oc * (I * dc * t).exp();
        h.add_hermitian_pair(2, 3, c);
        h.add_hermitian_pair(2, 4, c);
        upper(&mut h, t);
        h
    };
    let rotating = move |t: f64| {
        let mut h = Operator::zeros(LEVELS);
        probe_term(&mut h, op);
        h.add_hermitian_pair(2, 3, C64::new(-0.5 * oc, 0.0));
        h.add_hermitian_pair(2, 4, C64::new(-0.5 * oc, 0.0));
        h.add_at(3, 3, C64::new(-dc, 0.0));
        h.add_at(4, 4, C64::new(-dc, 0.0));
        upper(&mut h, t);
        h
    };

    let mut fast = Vec::new();
    push_tone(&mut fast, om, wm);
    push_tone(&mut fast, g * ol, w);
    let mut hints = Vec::new();
    push_tone(&mut hints, oc, dc);
    for f in &fast {
        if !hints.contains(f) {
            hints.push(*f);
        }
    }
    Ok(TimeDependentHamiltonian::new(lab, hints)
        .with_corotating(TimeDependentHamiltonian::new(rotating, fast)))
}

/// Time-independent chain Hamiltonian in the resonant sideband frame:
/// probe, Bessel-weighted control couplings to |d₃⟩, |d₄⟩, a common
/// detuning `detuning` of both dressed states and the composite
/// dressed-dressed coupling `½|Ω|e^{iφ}`.
pub fn build_chain_effective(omega_p: Freq, couplings: &EffectiveCouplings, detuning: Freq) -> Operator {
    let mut h = Operator::zeros(LEVELS);
    probe_term(&mut h, omega_p.angular());
    h.add_hermitian_pair(2, 3, C64::new(-0.5 * couplings.omega_c_n.angular(), 0.0));
    h.add_hermitian_pair(2, 4, C64::new(-0.5 * couplings.omega_c_m.angular(), 0.0));
    let d = detuning.angular();
    h.add_at(3, 3, C64::new(-d, 0.0));
    h.add_at(4, 4, C64::new(-d, 0.0));
    let loop_coupling =
        0.5 * couplings.composite_magnitude.angular() * (I * couplings.composite_phase).exp();
    h.add_hermitian_pair(3, 4, loop_coupling);
    h
}

/// Columns are |d₃⟩ = (|3⟩−|4⟩)/√2 and |d₄⟩ = (|3⟩+|4⟩)/√2 in the bare
/// basis; identity on |1⟩, |2⟩.
fn dressing_unitary(dim: usize) -> DMatrix<C64> {
    let mut v = DMatrix::identity(dim, dim);
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    v[(2, 2)] = s;
    v[(3, 2)] = -s;
    v[(2, 3)] = s;
    v[(3, 3)] = s;
    v
}

/// Re-expresses a bare-basis operator in the dressed basis (`V†·op·V`).
pub fn dressed_transform(op: &Operator) -> Result<Operator> {
    if op.dim() != LEVELS {
        return Err(Error::Dimension(format!("dressed transform needs dim 4, got {}", op.dim())));
    }
    let v = dressing_unitary(LEVELS);
    Operator::from_matrix(v.adjoint() * op.matrix() * &v)
}

/// Inverse of [`dressed_transform`].
pub fn bare_transform(op: &Operator) -> Result<Operator> {
    if op.dim() != LEVELS {
        return Err(Error::Dimension(format!("bare transform needs dim 4, got {}", op.dim())));
    }
    let v = dressing_unitary(LEVELS);
    Operator::from_matrix(&v * op.matrix() * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::projector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn fig1() -> BareDriveParams {
        BareDriveParams {
            omega_p: Freq(2.0),
            omega_c: Freq(2.0),
            delta_c: Freq(40.0),
            omega_l: Freq(80.0),
            omega_1: Freq(108.0),
            delta_1: Freq(1080.0),
            omega_2: Freq(10.0),
            delta_2: Freq(1000.0),
        }
    }

    fn fig3_mixing() -> MixingParams {
        MixingParams { omega_m: Freq(4.0), freq_m: Freq(80.0), delta_m: Freq(4.0), phi_m: 0.0 }
    }

    fn random_times(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    #[test]
    fn zero_drives_give_zero_operator() {
        let p = BareDriveParams { delta_1: Freq(1080.0), delta_2: Freq(1000.0), ..Default::default() };
        let h = build_full(&p).unwrap();
        for t in [0.0, 0.3, 1.7] {
            assert_eq!(h.at(t), Operator::zeros(4));
        }
        assert!(h.is_static());
    }

    #[test]
    fn full_at_time_zero_has_real_upper_coupling() {
        let p = fig1();
        let h = build_full(&p).unwrap().at(0.0);
        let expected = -0.5 * (p.omega_l.angular() + p.omega_1.angular() + p.omega_2.angular());
        assert!((h.get(3, 4) - C64::new(expected, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn full_matches_scalar_evaluation() {
        let p = fig1();
        let t = 1.0 / (4.0 * (p.delta_1.value() - p.delta_2.value()).abs());
        let h = build_full(&p).unwrap().at(t);
        // independent evaluation: angular = 2π·ν, phases Δ·t
        let ph = |nu: f64| C64::from_polar(1.0, TAU * nu * t);
        let e34 = -0.5 * TAU * (80.0 + 108.0 * ph(1080.0) + 10.0 * ph(1000.0));
        let e23 = -0.5 * TAU * 2.0 * ph(40.0);
        assert!((h.get(3, 4) - e34).norm() < 1e-9);
        assert!((h.get(4, 3) - e34.conj()).norm() < 1e-9);
        assert!((h.get(2, 3) - e23).norm() < 1e-12);
        assert!((h.get(1, 2) - C64::new(-0.5 * TAU * 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn full_period_hints() {
        let h = build_full(&fig1()).unwrap();
        let hints: Vec<f64> = h.period_hints().iter().map(|w| w / TAU).collect();
        assert_eq!(hints.len(), 3);
        for nu in [40.0, 1080.0, 1000.0] {
            assert!(hints.iter().any(|h| (h - nu).abs() < 1e-9));
        }
        let rot: Vec<f64> = h.corotating().period_hints().iter().map(|w| w / TAU).collect();
        assert_eq!(rot.len(), 2);
    }

    #[test]
    fn dressed_without_mixing_decouples_dressed_states() {
        let mixing = MixingParams::default();
        let h = build_dressed_effective(Freq(2.0), Freq(2.0), Freq(3.0), Freq(80.0), &mixing).unwrap();
        for t in random_times(20, 1) {
            let op = h.at(t);
            assert_eq!(op.get(3, 4), C64::new(0.0, 0.0));
            assert!((op.get(3, 3).re - 0.5 * Freq(80.0).angular()).abs() < 1e-12);
            assert!((op.get(4, 4).re + 0.5 * Freq(80.0).angular()).abs() < 1e-12);
        }
    }

    #[test]
    fn dressed_control_coupling_magnitude() {
        let mixing = MixingParams {
            omega_m: Freq(0.52),
            freq_m: Freq(80.0),
            delta_m: Freq(2.725),
            phi_m: 0.0,
        };
        let h = build_dressed_effective(Freq(2.0), Freq(2.0), Freq(40.0), Freq(80.0), &mixing)
            .unwrap()
            .at(0.0);
        let expected = Freq(2.0).angular() / (2.0 * 2f64.sqrt());
        assert!((h.get(2, 3).norm() - expected).abs() < 1e-12);
        assert!((h.get(2, 4).norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_floquet_with_zero_strength_equals_dressed() {
        let mixing = fig3_mixing();
        let a = build_dressed_effective(Freq(0.1), Freq(5.0), Freq(-20.0), Freq(40.0), &mixing).unwrap();
        let drive = PeriodicDriveParams { g: 0.0, omega: Freq(40.0), phi: 1.1 };
        let b = build_dual_floquet(Freq(0.1), Freq(5.0), Freq(-20.0), Freq(40.0), &mixing, &drive).unwrap();
        for t in random_times(100, 2) {
            assert_eq!(a.at(t), b.at(t));
            assert_eq!(a.corotating().at(t), b.corotating().at(t));
        }
    }

    #[test]
    fn dual_floquet_splitting_vanishes_at_algebraic_zero() {
        let drive = PeriodicDriveParams { g: 2.0, omega: Freq(40.0), phi: 0.3 };
        // cos(ωt + φ) = −1/g
        let t = ((-0.5f64).acos() - drive.phi) / drive.omega.angular();
        let h = build_dual_floquet(Freq(0.1), Freq(5.0), Freq(0.0), Freq(40.0), &MixingParams::default(), &drive)
            .unwrap()
            .at(t);
        assert!(h.get(3, 3).norm() < 1e-9);
        assert!(h.get(4, 4).norm() < 1e-9);
    }

    #[test]
    fn dual_floquet_fig3_diagonal_at_origin() {
        let drive = PeriodicDriveParams { g: 4.81, omega: Freq(40.0), phi: FRAC_PI_2 };
        let h = build_dual_floquet(Freq(0.1), Freq(5.0), Freq(-20.0), Freq(40.0), &fig3_mixing(), &drive)
            .unwrap()
            .at(0.0);
        let expected = -0.5 * Freq(40.0).angular() * (1.0 + 4.81 * FRAC_PI_2.cos());
        assert!((h.get(4, 4).re - expected).abs() < 1e-12);
    }

    #[test]
    fn builders_are_hermitian_at_random_times() {
        let drive = PeriodicDriveParams { g: 4.0, omega: Freq(40.0), phi: 0.7 };
        let mixing = MixingParams { phi_m: 0.4, ..fig3_mixing() };
        let hs = [
            build_full(&fig1()).unwrap(),
            build_dressed_effective(Freq(2.0), Freq(2.0), Freq(40.0), Freq(80.0), &mixing).unwrap(),
            build_dual_floquet(Freq(0.1), Freq(5.0), Freq(-20.0), Freq(40.0), &mixing, &drive).unwrap(),
        ];
        for h in &hs {
            for t in random_times(100, 3) {
                assert!(h.at(t).is_hermitian(1e-12));
                assert!(h.corotating().at(t).is_hermitian(1e-12));
            }
        }
    }

    #[test]
    fn chain_effective_examples() {
        let zero = EffectiveCouplings::loop_model(Freq(0.0), Freq(0.0), Freq(0.0), 0.0);
        let h = build_chain_effective(Freq(1.0), &zero, Freq(0.0));
        let mut probe_only = Operator::zeros(4);
        probe_term(&mut probe_only, Freq(1.0).angular());
        assert_eq!(h, probe_only);

        let a = EffectiveCouplings::loop_model(Freq(1.0), Freq(0.5), Freq(2.0), 0.8);
        let b = EffectiveCouplings::loop_model(Freq(1.0), Freq(0.5), Freq(2.0), 0.8 + 2.0 * PI);
        let ha = build_chain_effective(Freq(0.1), &a, Freq(0.3));
        let hb = build_chain_effective(Freq(0.1), &b, Freq(0.3));
        assert!(ha.distance(&hb) < 1e-12);
        assert!(ha.is_hermitian(1e-14));
    }

    #[test]
    fn dressed_transform_examples() {
        let sx = &projector(3, 4, 4).unwrap() + &projector(4, 3, 4).unwrap();
        let expected = &projector(4, 4, 4).unwrap() - &projector(3, 3, 4).unwrap();
        assert!(dressed_transform(&sx).unwrap().distance(&expected) < 1e-15);
        let id = Operator::identity(4);
        assert!(dressed_transform(&id).unwrap().distance(&id) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let entries: Vec<C64> =
            (0..16).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let op = Operator::from_rows(4, &entries).unwrap();
        let back = bare_transform(&dressed_transform(&op).unwrap()).unwrap();
        assert!(back.distance(&op) < 1e-14);
        assert!(dressed_transform(&Operator::zeros(3)).is_err());
    }

    #[test]
    fn qfm_validity_flag() {
        assert!(fig1().qfm_valid(DEFAULT_QFM_RATIO));
        let close = BareDriveParams { delta_2: Freq(200.0), ..fig1() };
        assert!(!close.qfm_valid(DEFAULT_QFM_RATIO));
    }
}
