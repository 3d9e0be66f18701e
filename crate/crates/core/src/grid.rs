//! The truncated computational grid, midpoint quadrature against the Dunkl
//! measure, weighted `L^p` norms, and deterministic test functions.
//!
//! Points sit at half-step offsets `x_i = -L + (i + 1/2) * h` with
//! `h = 2L / m`, so no point lies on a coordinate hyperplane and the point
//! set is symmetric about the origin. Multi-dimensional grids are stored in
//! row-major order (last axis fastest).

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::group::DunklStructure;

/// Points closer than this to a reflecting hyperplane are rejected.
const HYPERPLANE_TOL: f64 = 1e-12;

/// Box and resolution of a grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    /// `L`: the box is `[-L, L]^n`.
    pub half_width: f64,
    /// `m`: points per axis, positive and even.
    pub points_per_axis: usize,
    pub dimension: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points_per_axis: usize, dimension: usize) -> Self {
        Self {
            half_width,
            points_per_axis,
            dimension,
        }
    }

    /// `L = 8` with 512 points on the line and 32 per axis in the plane.
    pub fn default_for(dimension: usize) -> Self {
        let m = match dimension {
            1 => 512,
            2 => 32,
            _ => 8,
        };
        Self::new(8.0, m, dimension)
    }

    /// Grid step `h = 2L / m`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "box half-width must be positive, got {}",
                self.half_width
            )));
        }
        if self.points_per_axis == 0 || self.points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be positive and even, got {}",
                self.points_per_axis
            )));
        }
        if self.dimension == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        Ok(())
    }
}

/// Per-point quadrature masses `w(x_i) h^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights(DVector<f64>);

impl QuadratureWeights {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(self.0.as_slice())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for QuadratureWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Identifies the grid a function lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridKey {
    pub half_width: f64,
    pub points_per_axis: usize,
    pub dimension: usize,
}

/// A G-invariant offset grid carrying Dunkl quadrature masses and the
/// permutations induced by the reflection group.
#[derive(Debug, Clone)]
pub struct WeightedGrid {
    spec: GridSpec,
    structure: DunklStructure,
    coords: Vec<f64>,
    masses: QuadratureWeights,
    root_perms: Vec<Vec<usize>>,
    group_perms: Vec<Vec<usize>>,
}

/// Builds the grid for `spec` and the Dunkl structure `s`.
pub fn build_grid(spec: GridSpec, s: &DunklStructure) -> Result<WeightedGrid> {
    WeightedGrid::new(spec, s.clone())
}

impl WeightedGrid {
    pub fn new(spec: GridSpec, structure: DunklStructure) -> Result<Self> {
        spec.validate()?;
        if structure.dimension() != spec.dimension {
            return Err(Error::DimensionMismatch {
                expected: spec.dimension,
                found: structure.dimension(),
            });
        }
        let n = spec.dimension;
        let m = spec.points_per_axis;
        let len = spec.len();
        let mut coords = Vec::with_capacity(len * n);
        for idx in 0..len {
            let mut rem = idx;
            let mut p = vec![0.0; n];
            for axis in (0..n).rev() {
                p[axis] = spec.axis_coordinate(rem % m);
                rem /= m;
            }
            coords.extend_from_slice(&p);
        }
        let cell = spec.spacing().powi(n as i32);
        let mut masses = DVector::zeros(len);
        for i in 0..len {
            let x = &coords[i * n..(i + 1) * n];
            if structure.on_hyperplane(x, HYPERPLANE_TOL) {
                return Err(Error::InvalidGrid(format!(
                    "grid point {x:?} lies on a reflecting hyperplane"
                )));
            }
            masses[i] = structure.weight(x) * cell;
        }
        let mut grid = Self {
            spec,
            structure,
            coords,
            masses: QuadratureWeights(masses),
            root_perms: Vec::new(),
            group_perms: Vec::new(),
        };
        let roots = grid.structure.roots().roots().to_vec();
        grid.root_perms = roots
            .iter()
            .map(|a| grid.permutation_of(|x| crate::group::reflect(a, x)))
            .collect::<Result<_>>()?;
        let group = grid.structure.group().clone();
        grid.group_perms = (0..group.order())
            .map(|g| grid.permutation_of(|x| group.act(g, x)))
            .collect::<Result<_>>()?;
        Ok(grid)
    }

    fn permutation_of(&self, map: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<usize>> {
        (0..self.len())
            .map(|i| {
                let y = map(self.point(i));
                self.index_of(&y).ok_or_else(|| {
                    Error::InvalidGrid(format!(
                        "grid is not closed under the group: image {y:?} of point {i} is not a grid point"
                    ))
                })
            })
            .collect()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            half_width: self.spec.half_width,
            points_per_axis: self.spec.points_per_axis,
            dimension: self.spec.dimension,
        }
    }

    pub fn structure(&self) -> &DunklStructure {
        &self.structure
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.spec.dimension;
        &self.coords[i * n..(i + 1) * n]
    }

    pub fn masses(&self) -> &DVector<f64> {
        self.masses.as_vector()
    }

    pub fn weights(&self) -> &QuadratureWeights {
        &self.masses
    }

    /// Axis indices of point `i`.
    pub fn axis_indices(&self, i: usize) -> Vec<usize> {
        let n = self.spec.dimension;
        let m = self.spec.points_per_axis;
        let mut rem = i;
        let mut out = vec![0; n];
        for axis in (0..n).rev() {
            out[axis] = rem % m;
            rem /= m;
        }
        out
    }

    fn flat_index(&self, axes: &[usize]) -> usize {
        let m = self.spec.points_per_axis;
        axes.iter().fold(0, |acc, &a| acc * m + a)
    }

    /// Neighbour of `i` one step along `axis` (`dir = +1 / -1`); `None` past
    /// the box edge.
    pub fn neighbor(&self, i: usize, axis: usize, dir: i64) -> Option<usize> {
        let mut axes = self.axis_indices(i);
        let j = axes[axis] as i64 + dir;
        if j < 0 || j >= self.spec.points_per_axis as i64 {
            return None;
        }
        axes[axis] = j as usize;
        Some(self.flat_index(&axes))
    }

    /// Index of the grid point at `x`, matching within `1e-9 h`.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let l = self.spec.half_width;
        let mut axes = Vec::with_capacity(x.len());
        for &c in x {
            let f = (c + l) / h - 0.5;
            let r = f.round();
            if (f - r).abs() > 1e-9 || r < 0.0 || r >= self.spec.points_per_axis as f64 {
                return None;
            }
            axes.push(r as usize);
        }
        Some(self.flat_index(&axes))
    }

    /// Grid point closest to `x` (ties to the lowest index).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let l = self.spec.half_width;
        let m = self.spec.points_per_axis as f64;
        let axes: Vec<usize> = x
            .iter()
            .map(|&c| ((c + l) / h - 0.5).round().clamp(0.0, m - 1.0) as usize)
            .collect();
        self.flat_index(&axes)
    }

    /// Permutation `i -> index of s_a(x_i)` for root `root`.
    pub fn reflection_permutation(&self, root: usize) -> &[usize] {
        &self.root_perms[root]
    }

    /// Permutation `i -> index of g(x_i)` for group element `g`.
    pub fn group_permutation(&self, g: usize) -> &[usize] {
        &self.group_perms[g]
    }

    /// Points with `|x|_inf <= fraction * L`.
    pub fn interior_indices(&self, fraction: f64) -> Vec<usize> {
        let bound = fraction * self.spec.half_width;
        (0..self.len())
            .filter(|&i| self.point(i).iter().all(|c| c.abs() <= bound))
            .collect()
    }

    /// Total quadrature mass of the box.
    pub fn total_mass(&self) -> f64 {
        self.masses.total()
    }
}

/// Real values sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    key: GridKey,
    values: DVector<f64>,
}

impl GridFunction {
    pub fn new(grid: &WeightedGrid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at point {i}")));
        }
        Ok(Self {
            key: grid.key(),
            values,
        })
    }

    /// Wraps values produced by an internal, already checked computation.
    pub(crate) fn from_parts(key: GridKey, values: DVector<f64>) -> Self {
        Self { key, values }
    }

    pub fn zeros(grid: &WeightedGrid) -> Self {
        Self {
            key: grid.key(),
            values: DVector::zeros(grid.len()),
        }
    }

    pub fn from_fn(grid: &WeightedGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = DVector::from_iterator(grid.len(), (0..grid.len()).map(|i| f(grid.point(i))));
        Self::new(grid, values)
    }

    pub fn key(&self) -> GridKey {
        self.key
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            key: self.key,
            values: &self.values * c,
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            key: self.key,
            values: &self.values * a + &other.values * b,
        })
    }

    /// `f(g x)` for the group element `g`.
    pub fn compose_group(&self, grid: &WeightedGrid, g: usize) -> Result<Self> {
        check_grid(grid, self)?;
        let perm = grid.group_permutation(g);
        Ok(Self {
            key: self.key,
            values: DVector::from_iterator(self.len(), perm.iter().map(|&j| self.values[j])),
        })
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.key != other.key || self.len() != other.len() {
            return Err(Error::GridMismatch(
                "functions live on different grids".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_grid(grid: &WeightedGrid, f: &GridFunction) -> Result<()> {
    if f.key != grid.key() || f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "function with {} values does not live on the {}-point grid",
            f.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Fixed pairwise summation tree; the result does not depend on how callers
/// parallelize around it.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `sum_i f(x_i) mass_i`.
pub fn integrate(f: &GridFunction, grid: &WeightedGrid) -> Result<f64> {
    check_grid(grid, f)?;
    let m = grid.masses();
    let terms: Vec<f64> = f.values.iter().zip(m.iter()).map(|(v, w)| v * w).collect();
    Ok(pairwise_sum(&terms))
}

/// `<f, g>_omega`.
pub fn inner_product(f: &GridFunction, g: &GridFunction, grid: &WeightedGrid) -> Result<f64> {
    check_grid(grid, f)?;
    check_grid(grid, g)?;
    let m = grid.masses();
    let terms: Vec<f64> = (0..f.len()).map(|i| f.values[i] * g.values[i] * m[i]).collect();
    Ok(pairwise_sum(&terms))
}

/// `(int |f|^p d omega)^(1/p)`.
pub fn lp_norm(f: &GridFunction, p: f64, grid: &WeightedGrid) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParams(format!("p must be positive, got {p}")));
    }
    check_grid(grid, f)?;
    Ok(weighted_lp(f.values.as_slice(), p, grid.masses().as_slice()))
}

/// `(sum |v_i|^p w_i)^(1/p)` with pairwise summation.
pub(crate) fn weighted_lp(values: &[f64], p: f64, masses: &[f64]) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .zip(masses)
        .map(|(v, w)| {
            if p == 2.0 {
                v * v * w
            } else {
                v.abs().powf(p) * w
            }
        })
        .collect();
    pairwise_sum(&terms).powf(1.0 / p)
}

/// Seeded generator; `stream` separates independent trials.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Kinds of generated test functions.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctionKind {
    /// `exp(-|x - center|^2 / width^2)`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// Smooth compactly supported bump of the given radius.
    Bump { center: Vec<f64>, radius: f64 },
    /// Independent standard normal values.
    Random,
    /// `(sum_{k=a}^{b} D_k) g` for seeded noise `g`, projected onto the
    /// frame band; built by [`crate::frame::FrameContext`].
    Bandlimited { a: i32, b: i32 },
}

impl TestFunctionKind {
    /// Parses `gaussian`, `bump`, `random` or `bandlimited` with default
    /// parameters for dimension `n`.
    pub fn parse(name: &str, n: usize) -> Result<Self> {
        match name {
            "gaussian" => Ok(Self::Gaussian {
                center: vec![0.0; n],
                width: 1.0,
            }),
            "bump" => Ok(Self::Bump {
                center: vec![0.0; n],
                radius: 2.0,
            }),
            "random" => Ok(Self::Random),
            "bandlimited" => Ok(Self::Bandlimited { a: -2, b: 5 }),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// Deterministic test functions that need no semigroup data.
pub fn make_test_function(
    kind: &TestFunctionKind,
    seed: u64,
    grid: &WeightedGrid,
) -> Result<GridFunction> {
    match kind {
        TestFunctionKind::Gaussian { center, width } => {
            check_center(center, grid)?;
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (width * width)).exp()
            })
        }
        TestFunctionKind::Bump { center, radius } => {
            check_center(center, grid)?;
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let s = r2 / (radius * radius);
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            })
        }
        TestFunctionKind::Random => {
            let mut rng = seeded_rng(seed, 0);
            let values = DVector::from_iterator(
                grid.len(),
                (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)),
            );
            GridFunction::new(grid, values)
        }
        TestFunctionKind::Bandlimited { .. } => Err(Error::Unsupported(
            "band-limited functions need the semigroup family; use FrameContext::make_test_function"
                .into(),
        )),
    }
}

fn check_center(center: &[f64], grid: &WeightedGrid) -> Result<()> {
    if center.len() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            found: center.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2(kappa: f64, m: usize) -> WeightedGrid {
        build_grid(
            GridSpec::new(8.0, m, 1),
            &DunklStructure::preset("z2", kappa).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn offsets_and_spacing() {
        let g = z2(0.5, 512);
        assert_eq!(g.spacing(), 0.03125);
        assert_eq!(g.point(0)[0], -8.0 + 0.015625);
        assert_eq!(g.point(256)[0], 0.015625);
        assert_eq!(g.point(255)[0], -0.015625);
    }

    #[test]
    fn group_permutes_points() {
        let g = z2(0.5, 64);
        let p = g.group_permutation(0);
        let mut seen = p.to_vec();
        seen.sort();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());
        for i in 0..64 {
            assert_eq!(g.point(p[i])[0], -g.point(i)[0]);
        }
    }

    #[test]
    fn flat_masses_are_cell_volume() {
        let g = build_grid(
            GridSpec::new(4.0, 16, 2),
            &DunklStructure::preset("z2xz2", 0.0).unwrap(),
        )
        .unwrap();
        assert!(g.masses().iter().all(|&m| m == 0.25));
    }

    #[test]
    fn odd_resolution_is_rejected() {
        let s = DunklStructure::preset("z2", 0.5).unwrap();
        assert!(build_grid(GridSpec::new(8.0, 15, 1), &s).is_err());
        assert!(build_grid(GridSpec::new(-1.0, 16, 1), &s).is_err());
    }

    #[test]
    fn hyperplane_points_are_rejected() {
        // the diagonal roots of B2 have hyperplanes x1 = +-x2 through grid points
        let h = 1.0;
        let r = std::f64::consts::SQRT_2;
        let rs = crate::group::RootSystem::new(
            2,
            vec![
                vec![r, 0.0],
                vec![-r, 0.0],
                vec![0.0, r],
                vec![0.0, -r],
                vec![h, h],
                vec![-h, -h],
                vec![h, -h],
                vec![-h, h],
            ],
            vec![0.5; 8],
        )
        .unwrap();
        let s = DunklStructure::new(rs).unwrap();
        assert!(matches!(
            build_grid(GridSpec::new(4.0, 8, 2), &s),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn integrate_examples() {
        let g = z2(0.5, 512);
        assert_eq!(integrate(&GridFunction::zeros(&g), &g).unwrap(), 0.0);
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        let total = integrate(&one, &g).unwrap();
        assert!((total - 64.0 * std::f64::consts::SQRT_2).abs() < 1e-10, "{total}");
    }

    #[test]
    fn gaussian_against_fine_reference() {
        // 10x finer midpoint rule as the reference
        let g = z2(0.5, 512);
        let fine = z2(0.5, 5120);
        let f = |x: &[f64]| (-x[0] * x[0]).exp();
        let coarse = integrate(&GridFunction::from_fn(&g, f).unwrap(), &g).unwrap();
        let reference = integrate(&GridFunction::from_fn(&fine, f).unwrap(), &fine).unwrap();
        // exact value is sqrt(2); the midpoint rule overshoots by sqrt(2) h^2 / 12
        // because the weight has a kink at the origin
        let h = g.spacing();
        let hf = fine.spacing();
        let exact = std::f64::consts::SQRT_2;
        assert!(((reference - exact) / exact - hf * hf / 12.0).abs() < 1e-9);
        let predicted = (h * h - hf * hf) / 12.0;
        let rel = (coarse - reference) / reference;
        assert!((rel - predicted).abs() <= 1e-3 * predicted, "{rel} vs {predicted}");
    }

    #[test]
    fn lp_norm_basics() {
        let g = z2(0.5, 128);
        let f = make_test_function(&TestFunctionKind::Random, 3, &g).unwrap();
        assert_eq!(lp_norm(&GridFunction::zeros(&g), 1.5, &g).unwrap(), 0.0);
        let n = lp_norm(&f, 1.5, &g).unwrap();
        let n3 = lp_norm(&f.scaled(-3.0), 1.5, &g).unwrap();
        assert!((n3 - 3.0 * n).abs() <= 1e-12 * n3);
        let n2 = lp_norm(&f, 2.0, &g).unwrap();
        let ip = inner_product(&f, &f, &g).unwrap();
        assert!((n2 * n2 - ip).abs() <= 1e-12 * ip);
        assert!(lp_norm(&f, 0.0, &g).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let g = z2(0.5, 64);
        let a = make_test_function(&TestFunctionKind::Random, 42, &g).unwrap();
        let b = make_test_function(&TestFunctionKind::Random, 42, &g).unwrap();
        let c = make_test_function(&TestFunctionKind::Random, 43, &g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let gauss = make_test_function(&TestFunctionKind::parse("gaussian", 1).unwrap(), 0, &g)
            .unwrap();
        for i in 0..64 {
            let x = g.point(i)[0];
            assert_eq!(gauss.values()[i], (-x * x).exp());
        }
        assert!(matches!(
            TestFunctionKind::parse("sinc", 1),
            Err(Error::UnknownKind(_))
        ));
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let g = z2(0.0, 64);
        let b = make_test_function(
            &TestFunctionKind::Bump {
                center: vec![1.0],
                radius: 0.5,
            },
            0,
            &g,
        )
        .unwrap();
        for i in 0..64 {
            if (g.point(i)[0] - 1.0).abs() >= 0.5 {
                assert_eq!(b.values()[i], 0.0);
            }
        }
        assert!(b.values().max() > 0.0);
    }

    #[test]
    fn total_mass_grows_with_box() {
        let s = DunklStructure::preset("z2", 0.5).unwrap();
        let small = build_grid(GridSpec::new(4.0, 128, 1), &s).unwrap();
        let big = build_grid(GridSpec::new(8.0, 256, 1), &s).unwrap();
        assert!(big.total_mass() > small.total_mass());
        assert!(small.masses().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = z2(0.5, 16);
        let mut v = DVector::zeros(16);
        v[3] = f64::NAN;
        assert!(GridFunction::new(&g, v).is_err());
        assert!(GridFunction::new(&g, DVector::zeros(15)).is_err());
    }
}
