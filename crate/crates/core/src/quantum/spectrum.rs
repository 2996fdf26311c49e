//! Eigensystems of `Ĥ₀`, overlaps and the spectral construction of `ξ̂`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::operator::{c, cabs, h0_tridiagonal, re, GridSpec, HermitianOperator, QuantumState, Tridiagonal, C};
use crate::error::{Error, Result};
use crate::model::{ParamValue, SystemModel};
use crate::numerics::tridiag;
use crate::scalar::Real;

/// Ascending eigenvalues and unit-norm eigenvectors (`Σ_j |v_j|² = 1`). The
/// first component exceeding `1e-8` in magnitude of every vector is real
/// and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem<T> {
    pub lambda: Option<ParamValue<T>>,
    pub energies: Vec<T>,
    pub vectors: Vec<Vec<C<T>>>,
    /// `max_n ‖Ĥ₀ v_n − E_n v_n‖`
    pub residual: T,
    /// `max |V†V − I|` over the retained vectors.
    pub orthonormality_defect: T,
}

impl<T: Real> EigenSystem<T> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Level `n` as a grid state normalized with `h Σ |ψ_j|² = 1`.
    pub fn grid_state(&self, n: usize, grid: &GridSpec<T>) -> QuantumState<T> {
        let s = re(T::one() / grid.spacing.sqrt());
        QuantumState::Grid {
            grid: *grid,
            amplitudes: self.vectors[n].iter().map(|v| *v * s).collect(),
        }
    }

    /// `⟨n|ψ⟩`
    pub fn overlap(&self, psi: &QuantumState<T>, n: usize) -> C<T> {
        match psi {
            QuantumState::Grid { grid, amplitudes } => {
                let s = self.vectors[n]
                    .iter()
                    .zip(amplitudes)
                    .fold(re(T::zero()), |a, (v, x)| a + v.conj() * x);
                s * re(grid.spacing.sqrt())
            }
            QuantumState::Eigenbasis { coefficients, .. } => coefficients[n],
        }
    }

    /// `min_n (E_{n+1} − E_n)` and `E_max − E_min`.
    pub fn gap_and_spread(&self) -> (T, T) {
        let gap = self
            .energies
            .windows(2)
            .fold(T::max_value().unwrap_or(T::one()), |a, w| a.min(w[1] - w[0]));
        let spread = self.energies[self.len() - 1] - self.energies[0];
        (gap, spread)
    }
}

fn fix_phase<T: Real>(v: &mut [C<T>]) {
    let thr = T::lit(1e-8);
    if let Some(first) = v.iter().find(|z| cabs(**z) > thr).copied() {
        let phase = first.conj() / re(cabs(first));
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Minimum gap `1e-8 · spread`, checked for levels below `E_0 + cutoff · spread`.
fn check_nondegenerate<T: Real>(energies: &[T], cutoff: T) -> Result<()> {
    if energies.len() < 2 {
        return Ok(());
    }
    let spread = energies[energies.len() - 1] - energies[0];
    let ceiling = energies[0] + cutoff * spread;
    for (i, w) in energies.windows(2).enumerate() {
        if w[1] > ceiling {
            break;
        }
        if w[1] - w[0] <= T::tol(1e-8) * spread {
            return Err(Error::Degenerate(format!(
                "levels {i} and {} are degenerate (gap {}, spread {spread})",
                i + 1,
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

fn diagnostics<T: Real>(h: &DMatrix<C<T>>, energies: &[T], vectors: &[Vec<C<T>>]) -> (T, T) {
    let mut residual = T::zero();
    for (e, v) in energies.iter().zip(vectors) {
        let x = nalgebra::DVector::from_column_slice(v);
        let r = h * &x - x * re(*e);
        residual = residual.max(r.norm());
    }
    let k = vectors.len();
    let mut defect = T::zero();
    for a in 0..k {
        for b in a..k {
            let s = vectors[a].iter().zip(&vectors[b]).fold(re(T::zero()), |acc, (x, y)| acc + x.conj() * y);
            let target = if a == b { re(T::one()) } else { re(T::zero()) };
            defect = defect.max(cabs(s - target));
        }
    }
    (residual, defect)
}

/// Full dense decomposition. Errors on degenerate spectra.
pub fn eigensystem<T: Real>(op: &HermitianOperator<T>, lambda: Option<ParamValue<T>>) -> Result<EigenSystem<T>> {
    let n = op.dim();
    let m = op.matrix();
    let (values, columns): (Vec<T>, Vec<Vec<C<T>>>) = if op.is_real() {
        let real = DMatrix::from_fn(n, n, |i, j| m[(i, j)].re);
        let eig = SymmetricEigen::new(real);
        (
            eig.eigenvalues.iter().copied().collect(),
            (0..n).map(|k| eig.eigenvectors.column(k).iter().map(|&x| re(x)).collect()).collect(),
        )
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (
            eig.eigenvalues.iter().copied().collect(),
            (0..n).map(|k| eig.eigenvectors.column(k).iter().copied().collect()).collect(),
        )
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
    let energies: Vec<T> = order.iter().map(|&k| values[k]).collect();
    let mut vectors: Vec<Vec<C<T>>> = order.iter().map(|&k| columns[k].clone()).collect();
    for v in vectors.iter_mut() {
        fix_phase(v);
    }
    // The upper half of a finite-difference spectrum sits near the lattice band
    // edge, where states localize at both grid ends and pair up.
    check_nondegenerate(&energies, T::lit(0.5))?;
    let (residual, orthonormality_defect) = diagnostics(m, &energies, &vectors);
    Ok(EigenSystem { lambda, energies, vectors, residual, orthonormality_defect })
}

/// Lowest `k` levels of a real symmetric tridiagonal `Ĥ₀`.
pub fn lowest_levels<T: Real>(h: &Tridiagonal<T>, k: usize, lambda: Option<ParamValue<T>>) -> Result<EigenSystem<T>> {
    let (d, e) = h.real_parts()?;
    let (energies, vecs) = tridiag::lowest_eigenpairs(&d, &e, k)?;
    check_nondegenerate(&energies, T::one())?;
    let vectors: Vec<Vec<C<T>>> = vecs.into_iter().map(|v| v.into_iter().map(re).collect()).collect();
    let mut residual = T::zero();
    for (en, v) in energies.iter().zip(&vectors) {
        let hv = h.apply(v);
        let r = hv.iter().zip(v).fold(T::zero(), |a, (x, y)| a + (*x - *y * re(*en)).norm_sqr());
        residual = residual.max(r.sqrt());
    }
    let mut defect = T::zero();
    for a in 0..k {
        for b in a..k {
            let s = vectors[a].iter().zip(&vectors[b]).fold(T::zero(), |acc, (x, y)| acc + x.re * y.re);
            let target = if a == b { T::one() } else { T::zero() };
            defect = defect.max((s - target).abs());
        }
    }
    Ok(EigenSystem { lambda, energies, vectors, residual, orthonormality_defect: defect })
}

/// `|⟨n|ψ⟩|²`
pub fn fidelity<T: Real>(psi: &QuantumState<T>, eig: &EigenSystem<T>, n: usize) -> T {
    eig.overlap(psi, n).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryConnection<T> {
    /// `A_n = Re(i⟨n|∂n⟩)`
    pub connection: T,
    /// `Re⟨n|∂n⟩`, which vanishes for normalized states.
    pub normalization: T,
    /// Whether the second vector had to be sign-flipped.
    pub flipped: bool,
}

/// Finite-difference `i⟨n|∂_λ n⟩` between eigensystems at `λ` and `λ + δλ`,
/// evaluated at the midpoint `(n(λ) + n(λ+δλ))/2`.
pub fn berry_connection<T: Real>(a: &EigenSystem<T>, b: &EigenSystem<T>, n: usize, dlambda: T) -> Result<BerryConnection<T>> {
    let (u, w) = (&a.vectors[n], &b.vectors[n]);
    if u.len() != w.len() {
        return Err(Error::Precondition("eigensystems live on different grids".into()));
    }
    let ov = u.iter().zip(w).fold(re(T::zero()), |s, (x, y)| s + x.conj() * y);
    let flipped = ov.re < T::zero();
    let sign = if flipped { -T::one() } else { T::one() };
    let half = T::lit(0.5);
    let mut s = re(T::zero());
    for (x, y) in u.iter().zip(w) {
        let y = *y * re(sign);
        let mid = (*x + y) * re(half);
        s += mid.conj() * (y - *x);
    }
    let d = s / re(dlambda);
    Ok(BerryConnection {
        connection: (c(T::zero(), T::one()) * d).re,
        normalization: d.re,
        flipped,
    })
}

/// `ξ̂` in the truncated eigenbasis of `Ĥ₀(λ)`.
#[derive(Debug, Clone)]
pub struct SpectralXi<T: Real> {
    pub operator: HermitianOperator<T>,
    pub basis: EigenSystem<T>,
    /// `⟨m|∂_L Ĥ₀|n⟩` on the retained block.
    pub grad: DMatrix<T>,
    pub hbar: T,
}

impl<T: Real> SpectralXi<T> {
    /// `‖[ξ̂, Ĥ₀] − iℏ(∂Ĥ₀ − diag ∂Ĥ₀)‖_F / ‖∂Ĥ₀‖_F` on the block.
    pub fn commutator_residual(&self) -> T {
        let k = self.basis.len();
        let e = &self.basis.energies;
        let x = self.operator.matrix();
        let mut num = T::zero();
        let mut den = T::zero();
        for m in 0..k {
            for n in 0..k {
                let comm = x[(m, n)] * re(e[n] - e[m]);
                let target = if m == n { re(T::zero()) } else { c(T::zero(), self.hbar * self.grad[(m, n)]) };
                num += (comm - target).norm_sqr();
                den += self.grad[(m, n)] * self.grad[(m, n)];
            }
        }
        (num / den).sqrt()
    }

    /// `⟨m|M|n⟩` on the retained block.
    pub fn project(&self, op: &Tridiagonal<T>) -> DMatrix<C<T>> {
        let k = self.basis.len();
        let applied: Vec<Vec<C<T>>> = self.basis.vectors.iter().map(|v| op.apply(v)).collect();
        DMatrix::from_fn(k, k, |m, n| {
            self.basis.vectors[m]
                .iter()
                .zip(&applied[n])
                .fold(re(T::zero()), |s, (x, y)| s + x.conj() * y)
        })
    }

    /// `V ξ V†` on the full grid.
    pub fn to_grid(&self) -> Result<HermitianOperator<T>> {
        let k = self.basis.len();
        let dim = self.basis.vectors[0].len();
        let v = DMatrix::from_fn(dim, k, |j, n| self.basis.vectors[n][j]);
        HermitianOperator::new(&v * self.operator.matrix() * v.adjoint())
    }
}

/// Analytic box eigenfunctions at length `l`, resampled at `q` and scaled by
/// `√h` so that they are comparable with unit-norm grid vectors.
fn box_resampled<T: Real>(n: usize, l: T, grid: &GridSpec<T>) -> Vec<T> {
    let amp = (T::lit(2.0) / l).sqrt() * grid.spacing.sqrt();
    let k = T::count(n + 1) * T::pi() / l;
    (0..grid.n_points)
        .map(|j| {
            let q = grid.position(j);
            if q < l {
                amp * (k * q).sin()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Spectral `ξ̂` from `ξ_mn = iℏ (∂_L Ĥ₀)_mn / (E_n − E_m)`, zero diagonal.
///
/// For smooth potentials `∂_L Ĥ₀` is the diagonal matrix of `∂V/∂L`. The box
/// has no such matrix, so its elements are built from `(E_n − E_m)⟨m|∂_L n⟩`,
/// with `∂_L n` the central difference (`δ = 1e-5 L`) of the analytic
/// eigenfunctions at `L ± δ` sampled at this grid's positions, and the
/// diagonal `dE_n/dL = −2E_n/L`.
pub fn xi_spectral<T: Real>(
    system: &SystemModel<T>,
    lambda: &ParamValue<T>,
    grid: &GridSpec<T>,
    n_levels: usize,
    hbar: T,
) -> Result<SpectralXi<T>> {
    if n_levels < 2 {
        return Err(Error::Precondition("spectral generator needs at least two levels".into()));
    }
    let h0 = h0_tridiagonal(system, lambda, grid, hbar)?;
    let basis = lowest_levels(&h0, n_levels, Some(*lambda))?;
    let e = &basis.energies;
    let spread = e[n_levels - 1] - e[0];
    let k = n_levels;
    let l = lambda.length;
    let grad = if system.is_box() {
        let delta = T::lit(1e-5) * l;
        let plus: Vec<Vec<T>> = (0..k).map(|n| box_resampled(n, l + delta, grid)).collect();
        let minus: Vec<Vec<T>> = (0..k).map(|n| box_resampled(n, l - delta, grid)).collect();
        let conn = DMatrix::from_fn(k, k, |m, n| {
            basis.vectors[m]
                .iter()
                .zip(plus[n].iter().zip(&minus[n]))
                .fold(T::zero(), |s, (v, (p, q))| s + v.re * (*p - *q))
                / (T::lit(2.0) * delta)
        });
        // ⟨m|∂n⟩ is antisymmetric for a real basis; its grid estimate is only
        // approximately so, which would leave ∂_L Ĥ₀ non-symmetric.
        let conn = (&conn - conn.transpose()) * T::lit(0.5);
        DMatrix::from_fn(k, k, |m, n| if m == n { -T::lit(2.0) * e[n] / l } else { (e[n] - e[m]) * conn[(m, n)] })
    } else {
        let dv: Vec<T> = (0..grid.n_points)
            .map(|j| system.potential_dlength(grid.position(j), l))
            .collect();
        DMatrix::from_fn(k, k, |m, n| {
            basis.vectors[m]
                .iter()
                .zip(&basis.vectors[n])
                .zip(&dv)
                .fold(T::zero(), |s, ((x, y), w)| s + x.re * y.re * *w)
        })
    };
    let mut xi = DMatrix::from_element(k, k, re(T::zero()));
    for m in 0..k {
        for n in 0..k {
            if m == n {
                continue;
            }
            let gap = e[n] - e[m];
            if gap.abs() < T::tol(1e-8) * spread {
                return Err(Error::Degenerate(format!("levels {m} and {n} are too close (gap {gap})")));
            }
            xi[(m, n)] = c(T::zero(), hbar * grad[(m, n)] / gap);
        }
    }
    // Symmetrize away rounding asymmetry of the grid matrix elements.
    let xi = (&xi + xi.adjoint()) * re(T::lit(0.5));
    Ok(SpectralXi { operator: HermitianOperator::new(xi)?, basis, grad, hbar })
}
