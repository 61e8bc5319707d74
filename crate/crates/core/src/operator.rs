//! Dense complex operators and density matrices on a small Hilbert space.
//!
//! Levels are addressed 1..=dim to match the |1⟩..|4⟩ labelling used
//! throughout the crate; the dressed basis reuses slots 3 and 4. All
//! energies are angular frequencies with ħ = 1.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hilbert-space dimension of the ladder system.
pub const LEVELS: usize = 4;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A frequency in linear units, ν = X/(2π). Dynamics always use
/// [`Freq::angular`].
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Freq(pub f64);

impl Freq {
    pub const ZERO: Freq = Freq(0.0);

    pub fn new(linear: f64) -> Self {
        Freq(linear)
    }

    pub fn from_angular(angular: f64) -> Self {
        Freq(angular / TAU)
    }

    /// Linear value ν.
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn angular(self) -> f64 {
        TAU * self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Operator { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entry".into()));
        }
        Ok(Operator { m })
    }

    /// Builds from row-major entries.
    pub fn from_rows(dim: usize, rows: &[C64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries, got {}",
                dim * dim,
                rows.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[C64] {
        self.m.as_slice()
    }

    /// Entry at 1-based (row, col).
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row - 1, col - 1)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.m[(row - 1, col - 1)] = value;
    }

    /// Adds `value·|row⟩⟨col|`.
    pub fn add_at(&mut self, row: usize, col: usize, value: C64) {
        self.m[(row - 1, col - 1)] += value;
    }

    /// Adds `value·|row⟩⟨col| + conj(value)·|col⟩⟨row|`.
    pub fn add_hermitian_pair(&mut self, row: usize, col: usize, value: C64) {
        self.add_at(row, col, value);
        self.add_at(col, row, value.conj());
    }

    pub fn scale(&self, factor: C64) -> Self {
        Operator { m: &self.m * factor }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        check_dims(self, other)?;
        Ok(Operator { m: &self.m * &other.m })
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self − other`.
    pub fn distance(&self, other: &Operator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Relative Frobenius deviation from hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let norm = self.frobenius_norm();
        let dev = self.distance(&dagger(self));
        if norm == 0.0 {
            dev
        } else {
            dev / norm
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn check_dims(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "operand dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m - &rhs.m }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m * &rhs.m }
    }
}

/// `ab − ba`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_dims(a, b)?;
    Ok(Operator { m: &a.m * &b.m - &b.m * &a.m })
}

/// Conjugate transpose.
pub fn dagger(a: &Operator) -> Operator {
    Operator { m: a.m.adjoint() }
}

/// `|i⟩⟨j|` on a `dim`-level space, 1-based.
pub fn projector(i: usize, j: usize, dim: usize) -> Result<Operator> {
    if i == 0 || j == 0 || i > dim || j > dim {
        return Err(Error::LevelIndex { i, j, dim });
    }
    let mut op = Operator::zeros(dim);
    op.set(i, j, C64::new(1.0, 0.0));
    Ok(op)
}

/// Tolerances used when validating a [`DensityMatrix`].
#[derive(Clone, Copy, Debug)]
pub struct StateTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub positivity: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        StateTolerance { trace: 1e-8, hermiticity: 1e-8, positivity: 1e-7 }
    }
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Pure population in level `level` (1-based).
    pub fn basis(level: usize, dim: usize) -> Result<Self> {
        Ok(DensityMatrix { op: projector(level, level, dim)? })
    }

    /// Wraps an operator after checking the state invariants.
    pub fn new(op: Operator, tol: StateTolerance) -> Result<Self> {
        let rho = DensityMatrix { op };
        rho.check(tol)?;
        Ok(rho)
    }

    /// Wraps an operator without validation; callers check invariants
    /// separately (integrator internals).
    pub(crate) fn new_unchecked(op: Operator) -> Self {
        DensityMatrix { op }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.op.get(row, col)
    }

    /// The probe coherence ρ₂₁ = ⟨2|ρ|1⟩.
    pub fn rho21(&self) -> C64 {
        self.op.get(2, 1)
    }

    pub fn population(&self, level: usize) -> f64 {
        self.op.get(level, level).re
    }

    pub fn trace_error(&self) -> f64 {
        (self.op.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.op.distance(&dagger(&self.op))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.op + &dagger(&self.op)).scale_real(0.5);
        let eig = nalgebra::SymmetricEigen::new(h.into_matrix());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self, tol: StateTolerance) -> Result<()> {
        if !self.op.is_finite() {
            return Err(Error::NonFinite("density matrix entry".into()));
        }
        let t = self.trace_error();
        if t > tol.trace {
            return Err(Error::Invariant(format!("trace deviates from 1 by {t:.3e}")));
        }
        let h = self.hermiticity_error();
        if h > tol.hermiticity {
            return Err(Error::Invariant(format!("hermiticity error {h:.3e}")));
        }
        let e = self.min_eigenvalue();
        if e < -tol.positivity {
            return Err(Error::Invariant(format!("negative eigenvalue {e:.3e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(seed: &[f64]) -> Operator {
        let mut op = Operator::zeros(4);
        let mut k = 0;
        for i in 1..=4 {
            op.set(i, i, c(seed[k], 0.0));
            k += 1;
            for j in (i + 1)..=4 {
                op.add_hermitian_pair(i, j, c(seed[k], seed[k + 1]));
                k += 2;
            }
        }
        op
    }

    #[test]
    fn self_commutator_vanishes() {
        let x = &projector(1, 2, 4).unwrap() + &projector(2, 1, 4).unwrap();
        assert_eq!(commutator(&x, &x).unwrap(), Operator::zeros(4));
    }

    #[test]
    fn raising_lowering_commutator_is_population_difference() {
        let a = projector(3, 4, 4).unwrap();
        let b = projector(4, 3, 4).unwrap();
        let expected = &projector(3, 3, 4).unwrap() - &projector(4, 4, 4).unwrap();
        assert_eq!(commutator(&a, &b).unwrap(), expected);
    }

    #[test]
    fn mixing_components_commutator() {
        // H_{1,0} = −Ω₁/2 |3⟩⟨4|, H_{0,−1} = −Ω₂/2 |4⟩⟨3|
        let (o1, o2) = (1.7, 0.6);
        let h10 = projector(3, 4, 4).unwrap().scale_real(-o1 / 2.0);
        let h0m1 = projector(4, 3, 4).unwrap().scale_real(-o2 / 2.0);
        let z = &projector(3, 3, 4).unwrap() - &projector(4, 4, 4).unwrap();
        let got = commutator(&h10, &h0m1).unwrap();
        assert!(got.distance(&z.scale_real(o1 * o2 / 4.0)) < 1e-15);
        let swapped = commutator(&h0m1, &h10).unwrap();
        assert!(swapped.distance(&z.scale_real(-o1 * o2 / 4.0)) < 1e-15);
    }

    #[test]
    fn commutator_rejects_mismatched_dims() {
        assert!(matches!(
            commutator(&Operator::zeros(3), &Operator::zeros(4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn dagger_examples() {
        assert_eq!(dagger(&projector(1, 2, 4).unwrap()), projector(2, 1, 4).unwrap());
        let iid = Operator::identity(4).scale(c(0.0, 1.0));
        assert_eq!(dagger(&iid), Operator::identity(4).scale(c(0.0, -1.0)));
    }

    #[test]
    fn projector_examples() {
        let p = projector(1, 2, 4).unwrap();
        assert_eq!(p.get(1, 2), c(1.0, 0.0));
        assert_eq!(p.frobenius_norm(), 1.0);
        let d = projector(3, 3, 4).unwrap();
        assert_eq!(d.trace(), c(1.0, 0.0));
        assert_eq!(projector(4, 3, 4).unwrap(), dagger(&projector(3, 4, 4).unwrap()));
        assert!(matches!(projector(0, 1, 4), Err(Error::LevelIndex { .. })));
        assert!(matches!(projector(1, 5, 4), Err(Error::LevelIndex { .. })));
    }

    #[test]
    fn freq_conversion_round_trips() {
        let f = Freq::new(2.725);
        assert_eq!(Freq::from_angular(f.angular()).value(), 2.725);
    }

    #[test]
    fn density_matrix_checks() {
        let rho = DensityMatrix::basis(1, 4).unwrap();
        assert!(rho.check(StateTolerance::default()).is_ok());
        let bad = DensityMatrix::new(projector(1, 2, 4).unwrap(), StateTolerance::default());
        assert!(bad.is_err());
        let mut neg = Operator::zeros(4);
        neg.set(1, 1, c(1.1, 0.0));
        neg.set(2, 2, c(-0.1, 0.0));
        assert!(DensityMatrix::new(neg, StateTolerance::default()).is_err());
    }

    proptest! {
        #[test]
        fn dagger_is_involution(v in proptest::collection::vec(-5.0f64..5.0, 32)) {
            let entries: Vec<C64> = v.chunks(2).map(|p| c(p[0], p[1])).collect();
            let a = Operator::from_rows(4, &entries).unwrap();
            prop_assert_eq!(dagger(&dagger(&a)), a);
        }

        #[test]
        fn commutator_adjoint_consistency(
            x in proptest::collection::vec(-3.0f64..3.0, 16),
            y in proptest::collection::vec(-3.0f64..3.0, 16),
        ) {
            let a = random_hermitian(&x);
            let b = random_hermitian(&y);
            let lhs = commutator(&a, &b).unwrap();
            // [a,b]† = [b†,a†]
            let rhs = dagger(&commutator(&dagger(&b), &dagger(&a)).unwrap());
            prop_assert!(lhs.distance(&rhs) < 1e-12);
            // for Hermitian a, b the commutator is anti-Hermitian
            prop_assert!(lhs.distance(&(-&dagger(&lhs))) < 1e-12);
        }
    }
}
