//! The discretized Dunkl Laplacian, its spectral decomposition, and the heat
//! and Poisson semigroups built from it by spectral calculus.
//!
//! Kernel operators act by `(T f)(x) = int T(x, y) f(y) d omega(y)`, which on
//! the grid is `sum_j T(x_i, x_j) f_j m_j` with `m_j` the quadrature masses.
//! Internally every operator is stored in *weighted coordinates*
//! `W^{1/2} T W^{1/2}` (`W = diag(m)`): composition becomes a plain matrix
//! product and the `L^2(omega)` operator norm becomes the spectral norm.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_grid, GridFunction, GridKey, WeightedGrid};
use crate::quadrature::{spectral_norm, subordination_rule, symmetric_spectral_norm};

/// Default relative threshold for clamping positive eigenvalues to zero.
pub const DEFAULT_CLAMP_TOL: f64 = 1e-8;

/// Dense operator on grid values with an explicit kernel against `omega`.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    weighted: DMatrix<f64>,
    sqrt_mass: Arc<DVector<f64>>,
    key: GridKey,
}

impl KernelOperator {
    pub(crate) fn from_weighted(
        weighted: DMatrix<f64>,
        sqrt_mass: Arc<DVector<f64>>,
        key: GridKey,
    ) -> Self {
        Self {
            weighted,
            sqrt_mass,
            key,
        }
    }

    /// Builds an operator from kernel entries `K(x_i, x_j)`.
    pub fn from_kernel(kernel: &DMatrix<f64>, grid: &WeightedGrid) -> Result<Self> {
        let n = grid.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::GridMismatch(format!(
                "{}x{} kernel for a {n}-point grid",
                kernel.nrows(),
                kernel.ncols()
            )));
        }
        let s = Arc::new(grid.masses().map(f64::sqrt));
        let weighted = DMatrix::from_fn(n, n, |i, j| s[i] * kernel[(i, j)] * s[j]);
        Ok(Self::from_weighted(weighted, s, grid.key()))
    }

    /// The zero operator on the grid of `like`.
    pub fn zeros_like(like: &Self) -> Self {
        let n = like.len();
        Self::from_weighted(DMatrix::zeros(n, n), like.sqrt_mass.clone(), like.key)
    }

    pub fn len(&self) -> usize {
        self.weighted.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self) -> GridKey {
        self.key
    }

    /// `W^{1/2} K W^{1/2}`; unitarily equivalent to the operator on
    /// `L^2(omega)`.
    pub fn weighted_matrix(&self) -> &DMatrix<f64> {
        &self.weighted
    }

    pub(crate) fn sqrt_mass(&self) -> &Arc<DVector<f64>> {
        &self.sqrt_mass
    }

    /// Kernel entry `K(x_i, x_j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.weighted[(i, j)] / (self.sqrt_mass[i] * self.sqrt_mass[j])
    }

    /// Full kernel matrix `K(x_i, x_j)`.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        let s = &self.sqrt_mass;
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            self.weighted[(i, j)] / (s[i] * s[j])
        })
    }

    /// Kernel column `K(., x_j)` as a grid function.
    pub fn column(&self, j: usize) -> GridFunction {
        let s = &self.sqrt_mass;
        let v = DVector::from_fn(self.len(), |i, _| self.weighted[(i, j)] / (s[i] * s[j]));
        GridFunction::from_parts(self.key, v)
    }

    /// `int K(x_i, y) d omega(y)`.
    pub fn row_mass(&self, i: usize) -> f64 {
        let s = &self.sqrt_mass;
        self.weighted
            .row(i)
            .iter()
            .zip(s.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / s[i]
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.key() != self.key || f.len() != self.len() {
            return Err(Error::GridMismatch(
                "operator and function live on different grids".into(),
            ));
        }
        let u = f.values().component_mul(&self.sqrt_mass);
        let v = (&self.weighted * u).component_div(&self.sqrt_mass);
        Ok(GridFunction::from_parts(self.key, v))
    }

    /// Kernel of `self o other`: `int K1(x, z) K2(z, y) d omega(z)`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_weighted(&self.weighted * &other.weighted, self.sqrt_mass.clone(), self.key)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_weighted(&self.weighted + &other.weighted, self.sqrt_mass.clone(), self.key)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_weighted(&self.weighted - &other.weighted, self.sqrt_mass.clone(), self.key)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_weighted(&self.weighted * c, self.sqrt_mass.clone(), self.key)
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        self.weighted += &other.weighted;
    }

    /// Operator norm on `L^2(omega)`.
    pub fn operator_norm(&self) -> f64 {
        spectral_norm(&self.weighted)
    }

    /// Operator norm for operators known to be self-adjoint.
    pub fn self_adjoint_norm(&self) -> f64 {
        symmetric_spectral_norm(&self.weighted)
    }

    /// `max |K(x,y) - K(y,x)| / max |K|`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.kernel_matrix();
        let scale = k.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&k - k.transpose()).amax() / scale
    }
}

/// The Dunkl Laplacian discretized on a grid, acting on nodal values.
///
/// Second derivatives and `partial_a f` use centred differences, `f o s_a`
/// uses the exact grid permutation, and values outside the box are zero.
#[derive(Debug, Clone)]
pub struct DunklLaplacian {
    matrix: DMatrix<f64>,
    masses: DVector<f64>,
    key: GridKey,
    raw_asymmetry: f64,
}

impl DunklLaplacian {
    /// Action matrix: `(L f)_i = sum_j matrix[i, j] f_j`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }

    /// `max |W L - L^T W| / max |W L|` before symmetrization.
    pub fn raw_asymmetry(&self) -> f64 {
        self.raw_asymmetry
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.key() != self.key {
            return Err(Error::GridMismatch("Laplacian and function grids differ".into()));
        }
        Ok(GridFunction::from_parts(self.key, &self.matrix * f.values()))
    }

    /// `max |<Lf, g>_w - <f, Lg>_w|` over the basis, i.e. `max |W L - (W L)^T|`.
    pub fn self_adjointness_defect(&self) -> f64 {
        let wl = DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            self.masses[i] * self.matrix[(i, j)]
        });
        (&wl - wl.transpose()).amax()
    }
}

/// Assembles `Delta f + sum_a kappa(a) [partial_a f / <a,x> - (f(x) - f(s_a x)) / <a,x>^2]`
/// and replaces it by the average with its `omega`-adjoint.
pub fn assemble_dunkl_laplacian(grid: &WeightedGrid) -> Result<DunklLaplacian> {
    let n = grid.len();
    let dim = grid.dimension();
    let h = grid.spacing();
    let h2 = h * h;
    let structure = grid.structure();
    let roots = structure.roots();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let x = grid.point(i);
        for axis in 0..dim {
            a[(i, i)] -= 2.0 / h2;
            for dir in [-1i64, 1] {
                if let Some(j) = grid.neighbor(i, axis, dir) {
                    a[(i, j)] += 1.0 / h2;
                }
            }
        }
        for (r, (alpha, &kappa)) in roots.roots().iter().zip(roots.kappa()).enumerate() {
            if kappa == 0.0 {
                continue;
            }
            let ax: f64 = alpha.iter().zip(x).map(|(p, q)| p * q).sum();
            if ax == 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "grid point {x:?} lies on the hyperplane of root {r}"
                )));
            }
            // partial_a f / <a,x>
            for axis in 0..dim {
                let c = kappa * alpha[axis] / (2.0 * h * ax);
                if c == 0.0 {
                    continue;
                }
                if let Some(j) = grid.neighbor(i, axis, 1) {
                    a[(i, j)] += c;
                }
                if let Some(j) = grid.neighbor(i, axis, -1) {
                    a[(i, j)] -= c;
                }
            }
            // -(f(x) - f(s_a x)) / <a,x>^2
            let c = kappa / (ax * ax);
            let j = grid.reflection_permutation(r)[i];
            a[(i, i)] -= c;
            a[(i, j)] += c;
        }
    }
    let masses = grid.masses().clone();
    // omega-adjoint: W^{-1} A^T W
    let adjoint = DMatrix::from_fn(n, n, |i, j| a[(j, i)] * (masses[j] / masses[i]));
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let raw_asymmetry = (&a - &adjoint).amax() / scale;
    let matrix = (&a + &adjoint) * 0.5;
    Ok(DunklLaplacian {
        matrix,
        masses,
        key: grid.key(),
        raw_asymmetry,
    })
}

/// Eigen-decomposition of the Laplacian, orthonormal in `L^2(omega)`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    basis: DMatrix<f64>,
    sqrt_mass: Arc<DVector<f64>>,
    key: GridKey,
    raw_max: f64,
    clamp_excess: Option<f64>,
    similarity: DMatrix<f64>,
}

/// Decomposes `W^{1/2} L W^{-1/2}` with the default clamp tolerance.
pub fn spectral_decompose(l: &DunklLaplacian) -> Result<SpectralDecomposition> {
    spectral_decompose_with(l, DEFAULT_CLAMP_TOL)
}

pub fn spectral_decompose_with(l: &DunklLaplacian, clamp_tol: f64) -> Result<SpectralDecomposition> {
    let n = l.matrix.nrows();
    let s = Arc::new(l.masses.map(f64::sqrt));
    let sim = DMatrix::from_fn(n, n, |i, j| s[i] * l.matrix[(i, j)] / s[j]);
    let sim = (&sim + sim.transpose()) * 0.5;
    if sim.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite operator entries".into()));
    }
    let eig = SymmetricEigen::try_new(sim.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let raw: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut basis = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // fix the sign so results do not depend on solver internals
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    let lambda_min = raw.last().copied().unwrap_or(0.0);
    let raw_max = raw.first().copied().unwrap_or(0.0);
    let tol = clamp_tol * lambda_min.abs();
    let clamp_excess = if raw_max > tol { Some(raw_max) } else { None };
    let eigenvalues = DVector::from_iterator(n, raw.iter().map(|&v| v.min(0.0)));
    Ok(SpectralDecomposition {
        eigenvalues,
        basis,
        sqrt_mass: s,
        key: l.key,
        raw_max,
        clamp_excess,
        similarity: sim,
    })
}

impl SpectralDecomposition {
    /// Eigenvalues, descending and clamped to `<= 0`.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn key(&self) -> GridKey {
        self.key
    }

    /// Largest eigenvalue before clamping.
    pub fn raw_max_eigenvalue(&self) -> f64 {
        self.raw_max
    }

    /// Set when a positive eigenvalue exceeded the clamp tolerance; holds
    /// the offending magnitude.
    pub fn clamp_warning(&self) -> Option<f64> {
        self.clamp_excess
    }

    /// Orthonormal eigenvectors of the weighted similarity transform.
    pub fn weighted_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `j`-th eigenvector as a grid function, unit norm in `L^2(omega)`.
    pub fn eigenvector(&self, j: usize) -> GridFunction {
        let v = self.basis.column(j).component_div(&self.sqrt_mass);
        GridFunction::from_parts(self.key, v)
    }

    /// `max |<v_i, v_j>_omega - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        (g - DMatrix::<f64>::identity(self.len(), self.len())).amax()
    }

    /// `||L - V Lambda V^+|| / ||L||` in the weighted operator norm, using the
    /// unclamped spectrum.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.len();
        let raw: Vec<f64> = (0..n)
            .map(|j| {
                let v = self.basis.column(j);
                (v.transpose() * &self.similarity * v)[(0, 0)]
            })
            .collect();
        let mut scaled = self.basis.clone();
        for (j, lam) in raw.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*lam);
        }
        let rebuilt = scaled * self.basis.transpose();
        let norm = symmetric_spectral_norm(&self.similarity);
        symmetric_spectral_norm(&(&self.similarity - rebuilt)) / norm
    }

    /// `g(L)` by spectral calculus, with `symbol[j] = g(lambda_j)`.
    pub fn function_of(&self, symbol: &DVector<f64>) -> KernelOperator {
        let mut scaled = self.basis.clone();
        for (j, g) in symbol.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*g);
        }
        let weighted = scaled * self.basis.transpose();
        KernelOperator::from_weighted(weighted, self.sqrt_mass.clone(), self.key)
    }

    /// Kernel entries of `g(L)` restricted to `rows x cols`.
    pub fn kernel_entries(&self, symbol: &DVector<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let s = &self.sqrt_mass;
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
            let (i, j) = (rows[a], cols[b]);
            let mut acc = 0.0;
            for k in 0..self.len() {
                acc += self.basis[(i, k)] * symbol[k] * self.basis[(j, k)];
            }
            acc / (s[i] * s[j])
        })
    }

    /// `e^{t lambda}`.
    pub fn heat_symbol(&self, t: f64) -> DVector<f64> {
        self.eigenvalues.map(|l| (t * l).exp())
    }

    /// `e^{-t sqrt(-lambda)}`.
    pub fn poisson_symbol(&self, t: f64) -> DVector<f64> {
        self.eigenvalues.map(|l| (-t * (-l).sqrt()).exp())
    }

    /// Frequencies `xi_j = sqrt(-lambda_j)`.
    pub fn frequencies(&self) -> DVector<f64> {
        self.eigenvalues.map(|l| (-l).sqrt())
    }
}

/// Heat kernel `H_t = V e^{t Lambda} V^+`.
pub fn heat_kernel(t: f64, d: &SpectralDecomposition) -> Result<KernelOperator> {
    check_time(t)?;
    Ok(d.function_of(&d.heat_symbol(t)))
}

/// Poisson kernel `P_t = V e^{-t sqrt(-Lambda)} V^+`.
pub fn poisson_kernel(t: f64, d: &SpectralDecomposition) -> Result<KernelOperator> {
    check_time(t)?;
    Ok(d.function_of(&d.poisson_symbol(t)))
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// Poisson kernel entries from the subordination integral
/// `P_t = pi^{-1/2} int_0^inf e^{-u} H_{t^2/(4u)} u^{-1/2} du`, evaluated by a
/// log-substituted trapezoid rule. Independent of the direct Poisson symbol.
pub fn subordinated_poisson_entries(
    t: f64,
    d: &SpectralDecomposition,
    rows: &[usize],
    cols: &[usize],
) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let rule = subordination_rule(0.1, -90.0, 5.0);
    let symbol = d.eigenvalues.map(|l| {
        rule.iter()
            .map(|&(u, w)| w * (t * t / (4.0 * u) * l).exp())
            .sum::<f64>()
    });
    Ok(d.kernel_entries(&symbol, rows, cols))
}

/// Heat and Poisson kernels cached at the dyadic times `t = 2^{-k}`.
#[derive(Debug, Clone)]
pub struct SemigroupFamily {
    decomposition: Arc<SpectralDecomposition>,
    heat: BTreeMap<i32, KernelOperator>,
    poisson: BTreeMap<i32, KernelOperator>,
}

impl SemigroupFamily {
    /// Caches `H_{2^{-k}}` and `P_{2^{-k}}` for `k` in `k_lo..=k_hi`.
    pub fn new(decomposition: Arc<SpectralDecomposition>, k_lo: i32, k_hi: i32) -> Result<Self> {
        if k_lo > k_hi {
            return Err(Error::InvalidParams(format!(
                "empty time range k in [{k_lo}, {k_hi}]"
            )));
        }
        let ks: Vec<i32> = (k_lo..=k_hi).collect();
        let built: Vec<(i32, KernelOperator, KernelOperator)> = ks
            .par_iter()
            .map(|&k| {
                let t = dyadic_time(k);
                let d = decomposition.as_ref();
                (k, d.function_of(&d.heat_symbol(t)), d.function_of(&d.poisson_symbol(t)))
            })
            .collect();
        let mut heat = BTreeMap::new();
        let mut poisson = BTreeMap::new();
        for (k, h, p) in built {
            heat.insert(k, h);
            poisson.insert(k, p);
        }
        Ok(Self {
            decomposition,
            heat,
            poisson,
        })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn decomposition_arc(&self) -> Arc<SpectralDecomposition> {
        self.decomposition.clone()
    }

    /// Cached scale indices `k` (time `2^{-k}`).
    pub fn scales(&self) -> impl Iterator<Item = i32> + '_ {
        self.poisson.keys().copied()
    }

    pub fn k_range(&self) -> (i32, i32) {
        (
            *self.poisson.keys().next().unwrap(),
            *self.poisson.keys().next_back().unwrap(),
        )
    }

    fn lookup<'a>(&self, map: &'a BTreeMap<i32, KernelOperator>, k: i32) -> Result<&'a KernelOperator> {
        let (lo, hi) = self.k_range();
        map.get(&k).ok_or(Error::ScaleOutOfWindow { k, k_min: lo, k_max: hi })
    }

    /// `H_{2^{-k}}`.
    pub fn heat(&self, k: i32) -> Result<&KernelOperator> {
        self.lookup(&self.heat, k)
    }

    /// `P_{2^{-k}}`.
    pub fn poisson(&self, k: i32) -> Result<&KernelOperator> {
        self.lookup(&self.poisson, k)
    }

    /// `1 - min_x int H_t(x, .) d omega` over the interior points.
    pub fn boundary_leakage(&self, k: i32, interior: &[usize]) -> Result<f64> {
        let h = self.heat(k)?;
        Ok(1.0 - interior.iter().map(|&i| h.row_mass(i)).fold(f64::INFINITY, f64::min))
    }

    /// `max_x |int H_t(x, .) d omega - 1|` over the interior points.
    pub fn mass_defect(&self, k: i32, interior: &[usize]) -> Result<f64> {
        let h = self.heat(k)?;
        Ok(interior
            .iter()
            .map(|&i| (h.row_mass(i) - 1.0).abs())
            .fold(0.0, f64::max))
    }
}

/// `2^{-k}`.
pub fn dyadic_time(k: i32) -> f64 {
    2f64.powi(-k)
}

/// Assembles, decomposes and caches in one step.
pub fn build_semigroups(grid: &WeightedGrid, k_lo: i32, k_hi: i32) -> Result<SemigroupFamily> {
    let l = assemble_dunkl_laplacian(grid)?;
    let d = spectral_decompose(&l)?;
    SemigroupFamily::new(Arc::new(d), k_lo, k_hi)
}

/// Checks that `f` lives on the grid of the decomposition.
pub fn check_function(d: &SpectralDecomposition, grid: &WeightedGrid, f: &GridFunction) -> Result<()> {
    check_grid(grid, f)?;
    if d.key() != grid.key() {
        return Err(Error::GridMismatch("decomposition built on another grid".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::group::DunklStructure;

    fn grid(kappa: f64, m: usize) -> WeightedGrid {
        build_grid(
            GridSpec::new(8.0, m, 1),
            &DunklStructure::preset("z2", kappa).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn flat_case_is_three_point_stencil() {
        let g = grid(0.0, 32);
        let l = assemble_dunkl_laplacian(&g).unwrap();
        let h2 = g.spacing().powi(2);
        for i in 0..32usize {
            for j in 0..32 {
                let expect = if i == j {
                    -2.0 / h2
                } else if i.abs_diff(j) == 1 {
                    1.0 / h2
                } else {
                    0.0
                };
                assert_eq!(l.matrix()[(i, j)], expect);
            }
        }
    }

    #[test]
    fn flat_plane_is_five_point_stencil() {
        let g = build_grid(
            GridSpec::new(2.0, 8, 2),
            &DunklStructure::preset("z2xz2", 0.0).unwrap(),
        )
        .unwrap();
        let l = assemble_dunkl_laplacian(&g).unwrap();
        let h2 = g.spacing().powi(2);
        let i = g.index_of(&[0.25, -0.25]).unwrap();
        assert_eq!(l.matrix()[(i, i)], -4.0 / h2);
        let row_nonzero = l.matrix().row(i).iter().filter(|v| **v != 0.0).count();
        assert_eq!(row_nonzero, 5);
    }

    #[test]
    fn linear_and_quadratic_examples() {
        let kappa = 0.5;
        let g = grid(kappa, 128);
        let l = assemble_dunkl_laplacian(&g).unwrap();
        let lin = l.apply(&GridFunction::from_fn(&g, |x| x[0]).unwrap()).unwrap();
        let quad = l.apply(&GridFunction::from_fn(&g, |x| x[0] * x[0]).unwrap()).unwrap();
        for i in 1..127 {
            assert!(lin.values()[i].abs() < 1e-9, "{}", lin.values()[i]);
            assert!((quad.values()[i] - (2.0 + 4.0 * kappa)).abs() < 1e-9);
        }
    }

    #[test]
    fn weighted_self_adjoint_after_symmetrization() {
        let g = build_grid(
            GridSpec::new(2.0, 8, 2),
            &DunklStructure::preset("z2xz2", 0.7).unwrap(),
        )
        .unwrap();
        let l = assemble_dunkl_laplacian(&g).unwrap();
        let scale = l.matrix().amax() * g.masses().max();
        assert!(l.self_adjointness_defect() <= 1e-12 * scale);
    }

    #[test]
    fn spectrum_contract() {
        let g = grid(0.5, 128);
        let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
        let ev = d.eigenvalues();
        assert!(ev.iter().all(|&v| v <= 0.0));
        assert!(ev.as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert!(d.orthonormality_defect() <= 1e-10);
        assert!(d.reconstruction_error() <= 1e-8);
        assert!(d.clamp_warning().is_none());
    }

    #[test]
    fn flat_dirichlet_ground_state() {
        let g = grid(0.0, 512);
        let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
        let expect = (std::f64::consts::PI / 16.0).powi(2);
        let got = -d.eigenvalues()[0];
        assert!((got - expect).abs() / expect < 0.05, "{got} vs {expect}");
    }

    #[test]
    fn dunkl_ground_state_matches_bessel_zero() {
        // kappa = 1/2: the even sector is a Bessel operator of order 0 on (0, L),
        // so the top eigenvalue is -(j_{0,1} / L)^2
        let g = grid(0.5, 512);
        let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
        let j01 = 2.404_825_557_695_773;
        let expect = (j01 / 8.0f64).powi(2);
        let got = -d.eigenvalues()[0];
        assert!((got - expect).abs() / expect < 5e-3, "{got} vs {expect}");
    }

    #[test]
    fn semigroup_identities_small_grid() {
        let g = grid(0.5, 64);
        let fam = build_semigroups(&g, 0, 3).unwrap();
        let h1 = fam.heat(1).unwrap();
        let h2 = fam.heat(2).unwrap();
        // H_{1/4} H_{1/4} = H_{1/2}
        let prod = h2.compose(h2);
        let rel = prod.sub(h1).operator_norm() / h1.operator_norm();
        assert!(rel <= 1e-10, "{rel}");
        assert!(h1.symmetry_defect() <= 1e-10);
        let p1 = fam.poisson(1).unwrap();
        let p2 = fam.poisson(2).unwrap();
        let rel = p2.compose(p2).sub(p1).operator_norm() / p1.operator_norm();
        assert!(rel <= 1e-10);
        assert!(matches!(fam.heat(7), Err(Error::ScaleOutOfWindow { .. })));
    }

    #[test]
    fn invalid_time_is_rejected() {
        let g = grid(0.5, 16);
        let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
        assert!(heat_kernel(0.0, &d).is_err());
        assert!(poisson_kernel(-1.0, &d).is_err());
    }

    #[test]
    fn kernel_entries_match_full_operator() {
        let g = grid(0.5, 32);
        let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
        let p = poisson_kernel(0.5, &d).unwrap();
        let e = d.kernel_entries(&d.poisson_symbol(0.5), &[3, 10], &[7, 20, 31]);
        for (a, &i) in [3usize, 10].iter().enumerate() {
            for (b, &j) in [7usize, 20, 31].iter().enumerate() {
                assert!((e[(a, b)] - p.entry(i, j)).abs() <= 1e-12 * p.entry(i, i).abs());
            }
        }
    }
}
