//! Two-mode quantum frequency mixing.
//!
//! A Hamiltonian `H(t) = Σ H_{m,n} e^{i(mω_a + nω_b)t}` with two fast modes is
//! reduced to a low-frequency effective Hamiltonian by keeping every
//! admissible `(l, k)` with `|lω_a + kω_b|` small and adding the
//! second-order correction
//!
//! ```text
//! H⁽²⁾_{l,k} = −½ Σ_{(p,q)≠(l,k)} [H_{l−p,k−q}, H_{p,q}] / (pω_a + qω_b)
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hamiltonian::{BareDriveParams, MixingParams};
use crate::operator::{commutator, dagger, projector, Freq, Operator, C64, I, LEVELS};

/// Default half-width of the `(l, k)` search window.
pub const DEFAULT_INDEX_WINDOW: i32 = 2;
/// Default low-frequency cutoff as a fraction of the slower mode.
pub const DEFAULT_CUTOFF_RATIO: f64 = 0.2;

/// Fourier components of a bichromatic Hamiltonian (angular units).
///
/// The `(0, 0)` component may carry slow explicit time dependence; it is
/// stored separately in `slow_terms` as `(ν, A)` pairs contributing
/// `A·e^{iνt}`.
#[derive(Clone, Debug)]
pub struct FourierDecomposition {
    modes: (f64, f64),
    components: BTreeMap<(i32, i32), Operator>,
    slow_terms: Vec<(f64, Operator)>,
}

impl FourierDecomposition {
    pub fn new(mode_a: f64, mode_b: f64) -> Result<Self> {
        if !(mode_a > 0.0 && mode_b > 0.0) {
            return Err(Error::param("modes", "both mode frequencies must be positive"));
        }
        Ok(FourierDecomposition { modes: (mode_a, mode_b), components: BTreeMap::new(), slow_terms: Vec::new() })
    }

    pub fn modes(&self) -> (f64, f64) {
        self.modes
    }

    /// Inserts `H_{m,n}`. Callers insert conjugate pairs so the total is
    /// Hermitian; see [`FourierDecomposition::is_hermitian`].
    pub fn insert(&mut self, m: i32, n: i32, op: Operator) -> &mut Self {
        self.components.insert((m, n), op);
        self
    }

    pub fn add_slow_term(&mut self, frequency: f64, op: Operator) -> &mut Self {
        self.slow_terms.push((frequency, op));
        self
    }

    pub fn component(&self, m: i32, n: i32) -> Option<&Operator> {
        self.components.get(&(m, n))
    }

    pub fn components(&self) -> impl Iterator<Item = (&(i32, i32), &Operator)> {
        self.components.iter()
    }

    pub fn slow_terms(&self) -> &[(f64, Operator)] {
        &self.slow_terms
    }

    /// `H_{−m,−n} = H_{m,n}†` for every stored pair.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.components.iter().all(|(&(m, n), op)| match self.components.get(&(-m, -n)) {
            Some(partner) => op.distance(&dagger(partner)) <= tol * (1.0 + op.frobenius_norm()),
            None => op.frobenius_norm() <= tol,
        })
    }

    fn frequency(&self, p: i32, q: i32) -> f64 {
        f64::from(p) * self.modes.0 + f64::from(q) * self.modes.1
    }

    /// Evaluates the full `H(t)`.
    pub fn evaluate(&self, t: f64) -> Option<Operator> {
        let dim = self.dim()?;
        let mut h = Operator::zeros(dim);
        for (&(m, n), op) in &self.components {
            h = &h + &op.scale((I * self.frequency(m, n) * t).exp());
        }
        for (nu, op) in &self.slow_terms {
            h = &h + &op.scale((I * nu * t).exp());
        }
        Some(h)
    }

    fn dim(&self) -> Option<usize> {
        self.components
            .values()
            .next()
            .or_else(|| self.slow_terms.first().map(|(_, op)| op))
            .map(Operator::dim)
    }
}

/// One low-frequency term of the effective Hamiltonian.
#[derive(Clone, Debug)]
pub struct EffectiveTerm {
    /// `lω_a + kω_b`, angular
    pub frequency: f64,
    pub indices: (i32, i32),
    pub operator: Operator,
}

/// The second-order correction `H⁽²⁾_{l,k}`.
pub fn second_order_term(decomp: &FourierDecomposition, target: (i32, i32)) -> Result<Operator> {
    let Some(dim) = decomp.dim() else {
        return Ok(Operator::zeros(LEVELS));
    };
    let (l, k) = target;
    let mut total = Operator::zeros(dim);
    for (&(p, q), h_pq) in &decomp.components {
        if (p, q) == (l, k) {
            continue;
        }
        let partner_idx = (l - p, k - q);
        if (p, q) == (0, 0) || partner_idx == (0, 0) {
            let other = if (p, q) == (0, 0) { decomp.components.get(&partner_idx) } else { Some(h_pq) };
            if let Some(other) = other {
                for (_, slow) in &decomp.slow_terms {
                    if commutator(slow, other)?.frobenius_norm() > 0.0 {
                        return Err(Error::SlowTermInSecondOrder { l, k });
                    }
                }
            }
        }
        let Some(partner) = decomp.components.get(&partner_idx) else {
            continue;
        };
        let numerator = commutator(partner, h_pq)?;
        if numerator.frobenius_norm() == 0.0 {
            continue;
        }
        let denom = decomp.frequency(p, q);
        let scale = decomp.modes.0.max(decomp.modes.1);
        if denom.abs() <= 1e-12 * scale {
            return Err(Error::DegenerateModes { p, q });
        }
        total = &total + &numerator.scale_real(-0.5 / denom);
    }
    Ok(total)
}

/// Low-frequency effective Hamiltonian over the default index window.
pub fn effective_hamiltonian(decomp: &FourierDecomposition, cutoff_ratio: f64) -> Result<Vec<EffectiveTerm>> {
    effective_hamiltonian_in_window(decomp, cutoff_ratio, DEFAULT_INDEX_WINDOW)
}

/// Every nonzero term `(l, k)` with `|l|, |k| ≤ window` and
/// `|lω_a + kω_b| < cutoff_ratio·min(ω_a, ω_b)`.
pub fn effective_hamiltonian_in_window(
    decomp: &FourierDecomposition,
    cutoff_ratio: f64,
    window: i32,
) -> Result<Vec<EffectiveTerm>> {
    if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0) {
        return Err(Error::param("cutoff_ratio", "must lie in (0, 1)"));
    }
    let limit = cutoff_ratio * decomp.modes.0.min(decomp.modes.1);
    let mut terms = Vec::new();
    for l in -window..=window {
        for k in -window..=window {
            let frequency = decomp.frequency(l, k);
            if frequency.abs() >= limit {
                continue;
            }
            let mut op = second_order_term(decomp, (l, k))?;
            if let Some(first) = decomp.components.get(&(l, k)) {
                op = &op + first;
            }
            if op.frobenius_norm() > 0.0 {
                terms.push(EffectiveTerm { frequency, indices: (l, k), operator: op });
            }
        }
    }
    Ok(terms)
}

/// `Σ terms·e^{iνt}` plus the slow part of `H_{0,0}`.
pub fn reconstruct(terms: &[EffectiveTerm], decomp: &FourierDecomposition, t: f64) -> Operator {
    let dim = terms.first().map(|e| e.operator.dim()).or_else(|| decomp.dim()).unwrap_or(LEVELS);
    let mut h = Operator::zeros(dim);
    for term in terms {
        h = &h + &term.operator.scale((I * term.frequency * t).exp());
    }
    for (nu, op) in &decomp.slow_terms {
        h = &h + &op.scale((I * nu * t).exp());
    }
    h
}

/// Fourier components of the lab-frame Hamiltonian with modes `(Δ₁, Δ₂)`.
pub fn ladder_decomposition(params: &BareDriveParams) -> Result<FourierDecomposition> {
    params.validate()?;
    let mut d = FourierDecomposition::new(params.delta_1.angular(), params.delta_2.angular())?;
    let half = |f: Freq| C64::new(-0.5 * f.angular(), 0.0);
    let p = |i, j| projector(i, j, LEVELS).expect("levels within dimension 4");

    let mut h00 = Operator::zeros(LEVELS);
    h00.add_hermitian_pair(1, 2, half(params.omega_p));
    h00.add_hermitian_pair(3, 4, half(params.omega_l));
    d.insert(0, 0, h00);
    d.insert(1, 0, p(3, 4).scale(half(params.omega_1)));
    d.insert(-1, 0, p(4, 3).scale(half(params.omega_1)));
    d.insert(0, 1, p(3, 4).scale(half(params.omega_2)));
    d.insert(0, -1, p(4, 3).scale(half(params.omega_2)));
    let dc = params.delta_c.angular();
    d.add_slow_term(dc, p(2, 3).scale(half(params.omega_c)));
    d.add_slow_term(-dc, p(3, 2).scale(half(params.omega_c)));
    Ok(d)
}

/// Closed-form mixing parameters:
/// `Ω_M = Ω₁Ω₂(1/4Δ₁ + 1/4Δ₂)`, `ω_M = |Δ₁ − Δ₂|`,
/// `δ_M = Ω₁²/4Δ₁ + Ω₂²/4Δ₂`.
pub fn mixing_parameters(omega_1: Freq, delta_1: Freq, omega_2: Freq, delta_2: Freq) -> Result<MixingParams> {
    let (o1, d1, o2, d2) = (omega_1.value(), delta_1.value(), omega_2.value(), delta_2.value());
    for (name, v) in [("omega_1", o1), ("delta_1", d1), ("omega_2", o2), ("delta_2", d2)] {
        if !v.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    if d1 == 0.0 {
        return Err(Error::param("delta_1", "detuning must be nonzero"));
    }
    if d2 == 0.0 {
        return Err(Error::param("delta_2", "detuning must be nonzero"));
    }
    Ok(MixingParams {
        omega_m: Freq(o1 * o2 * (1.0 / (4.0 * d1) + 1.0 / (4.0 * d2))),
        freq_m: Freq((d1 - d2).abs()),
        delta_m: Freq(o1 * o1 / (4.0 * d1) + o2 * o2 / (4.0 * d2)),
        phi_m: 0.0,
    })
}
