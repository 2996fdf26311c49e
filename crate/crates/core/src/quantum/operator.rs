//! Grids, Hermitian operators and the finite-difference `Ĥ₀` and dilation `ξ̂`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{ParamValue, SystemKind, SystemModel};
use crate::scalar::Real;

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

/// Interior points `q_j = q_min + (j+1) h`, `h = (q_max − q_min)/(n+1)`, with
/// Dirichlet conditions at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub q_min: T,
    pub q_max: T,
    pub n_points: usize,
    pub spacing: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(q_min: T, q_max: T, n_points: usize) -> Result<Self> {
        if n_points < 64 {
            return Err(Error::Precondition(format!("grid needs at least 64 points, got {n_points}")));
        }
        if !(q_max > q_min && q_min.is_finite() && q_max.is_finite()) {
            return Err(Error::Precondition(format!("empty grid domain [{q_min}, {q_max}]")));
        }
        Ok(GridSpec {
            q_min,
            q_max,
            n_points,
            spacing: (q_max - q_min) / T::count(n_points + 1),
        })
    }

    pub fn position(&self, j: usize) -> T {
        self.q_min + T::count(j + 1) * self.spacing
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    /// `∫ φ̄ ψ dq ≈ h Σ φ̄_j ψ_j`
    pub fn inner(&self, a: &[C<T>], b: &[C<T>]) -> C<T> {
        let s = a.iter().zip(b).fold(c(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y);
        s * re(self.spacing)
    }

    pub fn norm_sqr(&self, a: &[C<T>]) -> T {
        a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()) * self.spacing
    }
}

/// Hermitian tridiagonal matrix; `upper[j]` is `M[j][j+1]` and
/// `M[j+1][j] = conj(upper[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub diag: Vec<C<T>>,
    pub upper: Vec<C<T>>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            diag: vec![re(T::zero()); n],
            upper: vec![re(T::zero()); n.saturating_sub(1)],
        }
    }

    pub fn lower(&self) -> Vec<C<T>> {
        self.upper.iter().map(|u| u.conj()).collect()
    }

    /// `self + a · other`
    pub fn add_scaled(&self, a: T, other: &Tridiagonal<T>) -> Tridiagonal<T> {
        let k = re(a);
        Tridiagonal {
            diag: self.diag.iter().zip(&other.diag).map(|(x, y)| *x + k * y).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(x, y)| *x + k * y).collect(),
        }
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j] * v[j];
                if j + 1 < n {
                    s += self.upper[j] * v[j + 1];
                }
                if j > 0 {
                    s += self.upper[j - 1].conj() * v[j - 1];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let n = self.dim();
        let mut m = DMatrix::from_element(n, n, re(T::zero()));
        for j in 0..n {
            m[(j, j)] = self.diag[j];
            if j + 1 < n {
                m[(j, j + 1)] = self.upper[j];
                m[(j + 1, j)] = self.upper[j].conj();
            }
        }
        m
    }

    pub fn to_operator(&self) -> Result<HermitianOperator<T>> {
        HermitianOperator::new(self.to_dense())
    }

    /// Diagonal and off-diagonal of a real symmetric tridiagonal matrix.
    pub(crate) fn real_parts(&self) -> Result<(Vec<T>, Vec<T>)> {
        let scale = self.diag.iter().chain(&self.upper).fold(T::zero(), |a, z| a.max(cabs(*z)));
        let imag = self.diag.iter().chain(&self.upper).fold(T::zero(), |a, z| a.max(z.im.abs()));
        if imag > T::tol(1e-14) * scale {
            return Err(Error::Precondition("operator is not real symmetric".into()));
        }
        Ok((self.diag.iter().map(|z| z.re).collect(), self.upper.iter().map(|z| z.re).collect()))
    }
}

/// Dense Hermitian matrix together with its measured hermiticity defect
/// `max |M − M†|`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    matrix: DMatrix<C<T>>,
    defect: T,
}

impl<T: Real> HermitianOperator<T> {
    /// Rejects matrices whose defect exceeds `1e-12 ‖M‖` (max-entry norm).
    pub fn new(matrix: DMatrix<C<T>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Precondition("operator must be square".into()));
        }
        let n = matrix.nrows();
        let mut defect = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            for j in 0..n {
                defect = defect.max(cabs(matrix[(i, j)] - matrix[(j, i)].conj()));
                scale = scale.max(cabs(matrix[(i, j)]));
            }
        }
        if defect > T::tol(1e-12) * scale {
            return Err(Error::Precondition(format!("hermiticity defect {defect} exceeds tolerance (scale {scale})")));
        }
        Ok(HermitianOperator { matrix, defect })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn defect(&self) -> T {
        self.defect
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> T {
        self.matrix.iter().fold(T::zero(), |a, z| a.max(cabs(*z)))
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.matrix * x).iter().copied().collect()
    }

    /// Whether every imaginary part vanishes exactly.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == T::zero())
    }
}

/// Kinetic plus potential part of `Ĥ₀` as a real tridiagonal matrix.
pub fn h0_tridiagonal<T: Real>(
    system: &SystemModel<T>,
    lambda: &ParamValue<T>,
    grid: &GridSpec<T>,
    hbar: T,
) -> Result<Tridiagonal<T>> {
    if system.is_box() {
        let l = lambda.length;
        let tol = T::tol(1e-12) * l;
        if (grid.q_min).abs() > tol || (grid.q_max - l).abs() > tol {
            return Err(Error::Precondition(format!(
                "box grid must span [0, L] = [0, {l}], got [{}, {}]",
                grid.q_min, grid.q_max
            )));
        }
    }
    let k = hbar * hbar / (T::lit(2.0) * system.mass() * grid.spacing * grid.spacing);
    let n = grid.n_points;
    Ok(Tridiagonal {
        diag: (0..n)
            .map(|j| re(T::lit(2.0) * k + system.potential(grid.position(j), lambda.length)))
            .collect(),
        upper: vec![re(-k); n - 1],
    })
}

/// Second-order finite-difference `Ĥ₀(λ)` on `grid`. For the box the grid must
/// be `[0, L]`. For power laws the domain must reach `2 L (E_max/ε)^{1/b}` on
/// both sides; for generic potentials both ends must be classically forbidden
/// at `e_max`.
pub fn discretize_h0<T: Real>(
    system: &SystemModel<T>,
    lambda: &ParamValue<T>,
    grid: &GridSpec<T>,
    hbar: T,
    e_max: T,
) -> Result<HermitianOperator<T>> {
    check_domain(system, lambda, grid, e_max)?;
    h0_tridiagonal(system, lambda, grid, hbar)?.to_operator()
}

pub(crate) fn check_domain<T: Real>(
    system: &SystemModel<T>,
    lambda: &ParamValue<T>,
    grid: &GridSpec<T>,
    e_max: T,
) -> Result<()> {
    let l = lambda.length;
    match system.kind() {
        SystemKind::Box => Ok(()),
        SystemKind::PowerLaw { exponent, epsilon } => {
            let reach = T::lit(2.0) * l * (e_max.max(T::zero()) / *epsilon).powf(T::one() / T::count(*exponent as usize));
            if grid.q_max < reach || grid.q_min > -reach {
                Err(Error::Precondition(format!(
                    "grid [{}, {}] does not contain ±{reach} needed for energies up to {e_max}",
                    grid.q_min, grid.q_max
                )))
            } else {
                Ok(())
            }
        }
        SystemKind::Generic(_) => {
            if system.potential(grid.q_min, l) < e_max || system.potential(grid.q_max, l) < e_max {
                Err(Error::Precondition(format!(
                    "grid ends of [{}, {}] are classically allowed at energy {e_max}",
                    grid.q_min, grid.q_max
                )))
            } else {
                Ok(())
            }
        }
    }
}

/// `μ/(2L) (ℏ/i)(QD + DQ)` with the antisymmetric central difference `D`.
pub fn xi_dilation_tridiagonal<T: Real>(length: T, mu: T, grid: &GridSpec<T>, hbar: T) -> Tridiagonal<T> {
    let n = grid.n_points;
    let k = mu * hbar / (T::lit(2.0) * length) / (T::lit(2.0) * grid.spacing);
    Tridiagonal {
        diag: vec![re(T::zero()); n],
        upper: (0..n - 1)
            .map(|j| c(T::zero(), -k * (grid.position(j) + grid.position(j + 1))))
            .collect(),
    }
}

pub fn xi_dilation<T: Real>(length: T, mu: T, grid: &GridSpec<T>, hbar: T) -> Result<HermitianOperator<T>> {
    if !(mu >= T::zero() && mu <= T::one()) {
        return Err(Error::Precondition(format!("dilation coefficient must lie in [0, 1], got {mu}")));
    }
    xi_dilation_tridiagonal(length, mu, grid, hbar).to_operator()
}

/// Grid amplitude vector with representation tag.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState<T: Real> {
    Grid { grid: GridSpec<T>, amplitudes: Vec<C<T>> },
    Eigenbasis { reference: ParamValue<T>, coefficients: Vec<C<T>> },
}

impl<T: Real> QuantumState<T> {
    pub fn norm_sqr(&self) -> T {
        match self {
            QuantumState::Grid { grid, amplitudes } => grid.norm_sqr(amplitudes),
            QuantumState::Eigenbasis { coefficients, .. } => {
                coefficients.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
            }
        }
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        match self {
            QuantumState::Grid { amplitudes, .. } => amplitudes,
            QuantumState::Eigenbasis { coefficients, .. } => coefficients,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = GridSpec::<f64>::new(0.0, 1.0, 99).unwrap();
        assert!((g.spacing - 0.01).abs() < 1e-15);
        assert!((g.position(0) - 0.01).abs() < 1e-15);
        assert!((g.position(98) - 0.99).abs() < 1e-14);
        assert!(GridSpec::new(0.0, 1.0, 63).is_err());
    }

    #[test]
    fn dilation_is_hermitian_and_vanishes_at_zero_mu() {
        let g = GridSpec::new(-5.0, 5.0, 128).unwrap();
        let x = xi_dilation(1.3, 0.5, &g, 1.0).unwrap();
        assert!(x.defect() < 1e-14);
        let z = xi_dilation(1.3, 0.0, &g, 1.0).unwrap();
        assert_eq!(z.max_norm(), 0.0);
        assert!(xi_dilation(1.0, 1.5, &g, 1.0).is_err());
    }

    #[test]
    fn box_grid_must_match_walls() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let g = GridSpec::new(0.0, 1.0, 64).unwrap();
        assert!(discretize_h0(&sys, &ParamValue::new(1.0), &g, 1.0, 1.0).is_ok());
        assert!(discretize_h0(&sys, &ParamValue::new(1.2), &g, 1.0, 1.0).is_err());
    }

    #[test]
    fn power_law_domain_check() {
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let g = GridSpec::new(-3.0, 3.0, 64).unwrap();
        // reach = 2 L sqrt(E): 2 at E = 1, 4 at E = 4.
        assert!(discretize_h0(&sys, &ParamValue::new(1.0), &g, 1.0, 1.0).is_ok());
        assert!(discretize_h0(&sys, &ParamValue::new(1.0), &g, 1.0, 4.0).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::from_element(2, 2, re(0.0_f64));
        m[(0, 1)] = c(1.0, 0.0);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn tridiagonal_apply_matches_dense() {
        let g = GridSpec::new(-2.0, 2.0, 64).unwrap();
        let t = xi_dilation_tridiagonal(1.0, 1.0, &g, 1.0);
        let v: Vec<C<f64>> = (0..64).map(|j| c((j as f64).sin(), (j as f64 * 0.3).cos())).collect();
        let a = t.apply(&v);
        let b = t.to_operator().unwrap().apply(&v);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
