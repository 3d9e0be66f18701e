//! Dyadic cubes, the difference operators `D_k` and their windows `D_k^M`,
//! coefficient sampling and the Triebel-Lizorkin family of norms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_grid, pairwise_sum, weighted_lp, GridFunction, GridKey, WeightedGrid};
use crate::operator::{KernelOperator, SemigroupFamily};

/// Range of dyadic scales and the window half-width `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub k_min: i32,
    pub k_max: i32,
    pub m: u32,
}

impl Default for ScaleWindow {
    fn default() -> Self {
        Self {
            k_min: -3,
            k_max: 6,
            m: 2,
        }
    }
}

impl ScaleWindow {
    pub fn new(k_min: i32, k_max: i32, m: u32) -> Result<Self> {
        let w = Self { k_min, k_max, m };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min >= self.k_max {
            return Err(Error::InvalidParams(format!(
                "scale window needs k_min < k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.m > 30 {
            return Err(Error::InvalidParams(format!("window width M = {} is too large", self.m)));
        }
        Ok(())
    }

    pub fn with_m(self, m: u32) -> Self {
        Self { m, ..self }
    }

    pub fn scales(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    /// Position of scale `k` in `scales()`.
    pub fn position(&self, k: i32) -> Result<usize> {
        if !self.contains(k) {
            return Err(Error::ScaleOutOfWindow {
                k,
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        Ok((k - self.k_min) as usize)
    }

    /// Scales `l` with `|l - k| <= M` clipped to the window.
    pub fn neighbours(&self, k: i32) -> std::ops::RangeInclusive<i32> {
        let m = self.m as i32;
        (k - m).max(self.k_min)..=(k + m).min(self.k_max)
    }

    /// Cube side `2^{-k-M}` at scale `k`.
    pub fn cube_side(&self, k: i32) -> f64 {
        2f64.powi(-k - self.m as i32)
    }
}

/// One dyadic cube that contains at least one grid point.
#[derive(Debug, Clone)]
pub struct DyadicCube {
    /// Integer corner: the cube is `prod [index_d * side, (index_d + 1) * side)`.
    pub index: Vec<i64>,
    pub members: Vec<usize>,
    /// Grid point used as `x_Q`.
    pub sample: usize,
    pub omega: f64,
}

/// Cubes of side `2^{-k-M}` at one scale.
#[derive(Debug, Clone)]
pub struct DyadicScale {
    pub k: i32,
    pub side: f64,
    pub cubes: Vec<DyadicCube>,
    point_cube: Vec<usize>,
}

impl DyadicScale {
    /// Cube containing grid point `i`.
    pub fn cube_of(&self, i: usize) -> usize {
        self.point_cube[i]
    }

    /// Sample points `x_Q` in cube order.
    pub fn samples(&self) -> Vec<usize> {
        self.cubes.iter().map(|c| c.sample).collect()
    }
}

/// A level of the lattice used for the Carleson supremum.
#[derive(Debug, Clone)]
struct CarlesonLevel {
    /// Smallest window scale whose cubes count as subcubes here.
    k_from: i32,
    omegas: Vec<f64>,
    /// `parent[s][q]` for window scales `k_from..`, indexed by position in the window.
    parent: Vec<Option<Vec<usize>>>,
}

/// Dyadic cubes for every scale of a window, anchored at the origin.
#[derive(Debug, Clone)]
pub struct DyadicGrid {
    window: ScaleWindow,
    key: GridKey,
    masses: Arc<DVector<f64>>,
    scales: Vec<DyadicScale>,
    lattice: Vec<CarlesonLevel>,
}

fn cube_index(x: &[f64], side: f64) -> Vec<i64> {
    x.iter().map(|v| (v / side).floor() as i64).collect()
}

fn group_points(grid: &WeightedGrid, side: f64) -> (Vec<(Vec<i64>, Vec<usize>)>, Vec<usize>) {
    let mut map: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for i in 0..grid.len() {
        map.entry(cube_index(grid.point(i), side)).or_default().push(i);
    }
    let groups: Vec<(Vec<i64>, Vec<usize>)> = map.into_iter().collect();
    let mut owner = vec![0; grid.len()];
    for (c, (_, members)) in groups.iter().enumerate() {
        for &i in members {
            owner[i] = c;
        }
    }
    (groups, owner)
}

impl DyadicGrid {
    pub fn new(grid: &WeightedGrid, window: ScaleWindow) -> Result<Self> {
        window.validate()?;
        let masses = grid.masses();
        let scales: Vec<DyadicScale> = window
            .scales()
            .map(|k| {
                let side = window.cube_side(k);
                let (groups, point_cube) = group_points(grid, side);
                let cubes = groups
                    .into_iter()
                    .map(|(index, members)| {
                        let center: Vec<f64> = index.iter().map(|&c| (c as f64 + 0.5) * side).collect();
                        let mut sample = members[0];
                        let mut best = f64::INFINITY;
                        for &i in &members {
                            let d: f64 = grid
                                .point(i)
                                .iter()
                                .zip(&center)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            if d < best {
                                best = d;
                                sample = i;
                            }
                        }
                        let w: Vec<f64> = members.iter().map(|&i| masses[i]).collect();
                        DyadicCube {
                            index,
                            omega: pairwise_sum(&w),
                            members,
                            sample,
                        }
                    })
                    .collect();
                DyadicScale {
                    k,
                    side,
                    cubes,
                    point_cube,
                }
            })
            .collect();

        // Carleson lattice: sides from the finest window side up to the box
        // size, then the box itself.
        let m = window.m as i32;
        let j_fine = window.k_max + m;
        let j_coarse = -(grid.spec().half_width.log2().floor() as i32);
        let mut lattice = Vec::new();
        for j in (j_coarse..=j_fine).rev() {
            let side = 2f64.powi(-j);
            let (groups, _) = group_points(grid, side);
            let lookup: BTreeMap<&[i64], usize> = groups
                .iter()
                .enumerate()
                .map(|(p, (idx, _))| (idx.as_slice(), p))
                .collect();
            let omegas = groups
                .iter()
                .map(|(_, mem)| pairwise_sum(&mem.iter().map(|&i| masses[i]).collect::<Vec<_>>()))
                .collect();
            let k_from = j - m;
            let parent = scales
                .iter()
                .map(|sc| {
                    if sc.k < k_from {
                        return None;
                    }
                    let shift = (sc.k + m - j) as u32;
                    Some(
                        sc.cubes
                            .iter()
                            .map(|c| {
                                let idx: Vec<i64> =
                                    c.index.iter().map(|v| v.div_euclid(1i64 << shift)).collect();
                                lookup[idx.as_slice()]
                            })
                            .collect(),
                    )
                })
                .collect();
            lattice.push(CarlesonLevel {
                k_from,
                omegas,
                parent,
            });
        }
        lattice.push(CarlesonLevel {
            k_from: i32::MIN,
            omegas: vec![grid.total_mass()],
            parent: scales.iter().map(|sc| Some(vec![0; sc.cubes.len()])).collect(),
        });

        Ok(Self {
            window,
            key: grid.key(),
            masses: Arc::new(masses.clone()),
            scales,
            lattice,
        })
    }

    pub fn window(&self) -> ScaleWindow {
        self.window
    }

    pub fn key(&self) -> GridKey {
        self.key
    }

    pub fn scales(&self) -> &[DyadicScale] {
        &self.scales
    }

    pub fn scale(&self, k: i32) -> Result<&DyadicScale> {
        Ok(&self.scales[self.window.position(k)?])
    }

    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }

    /// Total number of `(k, Q)` pairs.
    pub fn cube_count(&self) -> usize {
        self.scales.iter().map(|s| s.cubes.len()).sum()
    }

    /// Number of cubes `P` in the Carleson lattice, the whole box included.
    pub fn lattice_size(&self) -> usize {
        self.lattice.iter().map(|l| l.omegas.len()).sum()
    }
}

/// Sampled coefficients `lambda_{k,Q}`, one vector per scale in cube order.
#[derive(Debug, Clone, PartialEq)]
pub struct LpCoefficients {
    pub windowed: bool,
    k_min: i32,
    values: Vec<Vec<f64>>,
}

impl LpCoefficients {
    /// All-zero table shaped like `dg`.
    pub fn zeros(dg: &DyadicGrid, windowed: bool) -> Self {
        Self {
            windowed,
            k_min: dg.window.k_min,
            values: dg.scales.iter().map(|s| vec![0.0; s.cubes.len()]).collect(),
        }
    }

    /// Builds a table from per-scale vectors; shapes must match `dg`.
    pub fn from_values(dg: &DyadicGrid, windowed: bool, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != dg.scales.len()
            || values.iter().zip(&dg.scales).any(|(v, s)| v.len() != s.cubes.len())
        {
            return Err(Error::GridMismatch(
                "coefficient table does not match the dyadic grid".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        Ok(Self {
            windowed,
            k_min: dg.window.k_min,
            values,
        })
    }

    pub fn scale_values(&self, k: i32) -> &[f64] {
        &self.values[(k - self.k_min) as usize]
    }

    pub fn get(&self, k: i32, q: usize) -> f64 {
        self.values[(k - self.k_min) as usize][q]
    }

    pub fn set(&mut self, k: i32, q: usize, v: f64) {
        self.values[(k - self.k_min) as usize][q] = v;
    }

    pub fn scales(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.values
            .iter()
            .enumerate()
            .map(move |(s, v)| (self.k_min + s as i32, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `sum_k sum_Q |lambda|^2`.
    pub fn l2_mass(&self) -> f64 {
        self.values.iter().flatten().map(|v| v * v).sum()
    }

    /// `sum_Q |lambda_{k,Q}|^2` per scale.
    pub fn scale_energy(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.iter().map(|x| x * x).sum()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            windowed: self.windowed,
            k_min: self.k_min,
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|x| x * c).collect())
                .collect(),
        }
    }
}

/// A Lebesgue or summation exponent that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    /// Hoelder conjugate `q / (q - 1)`; `1 -> inf`, `inf -> 1`.
    pub fn conjugate(self) -> Result<Self> {
        match self {
            Self::Infinite => Ok(Self::Finite(1.0)),
            Self::Finite(1.0) => Ok(Self::Infinite),
            Self::Finite(q) if q > 1.0 => Ok(Self::Finite(q / (q - 1.0))),
            Self::Finite(q) => Err(Error::InvalidParams(format!(
                "no conjugate exponent for q = {q} <= 1"
            ))),
        }
    }
}

impl From<f64> for Exponent {
    fn from(v: f64) -> Self {
        if v.is_infinite() {
            Self::Infinite
        } else {
            Self::Finite(v)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if matches!(s, "inf" | "Inf" | "infinity" | "∞") {
            return Ok(Self::Infinite);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParams(format!("cannot parse exponent `{s}`")))?;
        if !(v > 0.0) {
            return Err(Error::InvalidParams(format!("exponent must be positive, got {v}")));
        }
        Ok(Self::from(v))
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(*v),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Indices `(alpha, p, q)` of a Triebel-Lizorkin norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TLParams {
    pub alpha: f64,
    pub p: f64,
    pub q: Exponent,
}

impl TLParams {
    pub fn new(alpha: f64, p: f64, q: impl Into<Exponent>) -> Self {
        Self {
            alpha,
            p,
            q: q.into(),
        }
    }

    /// Parses `"alpha,p,q"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidParams(format!("expected `alpha,p,q`, got `{s}`")));
        }
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParams(format!("cannot parse `{t}`")))
        };
        Ok(Self {
            alpha: num(parts[0])?,
            p: num(parts[1])?,
            q: parts[2].parse()?,
        })
    }

    /// Parses `"a,p,q;a,p,q;..."`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(';')
            .filter(|t| !t.trim().is_empty())
            .map(Self::parse)
            .collect()
    }
}

/// Which bound of the admissible index region decided a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constraint {
    /// `|alpha| < 1`.
    AlphaRange,
    /// `p, q > N / (N + 1)`.
    DimensionBound,
    /// `p, q > N / (N + alpha + 1)`.
    SmoothnessBound,
    /// `p < inf`.
    FiniteP,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AlphaRange => "|alpha| < 1",
            Self::DimensionBound => "p, q > N/(N+1)",
            Self::SmoothnessBound => "p, q > N/(N+alpha+1)",
            Self::FiniteP => "p < inf",
        })
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamVerdict {
    pub valid: bool,
    /// `max{N/(N+1), N/(N+alpha+1)}`.
    pub threshold: f64,
    /// The binding constraint: violated one when invalid, tightest one otherwise.
    pub binding: Constraint,
}

impl ParamVerdict {
    pub fn into_result(self, params: &TLParams) -> Result<()> {
        if self.valid {
            return Ok(());
        }
        Err(Error::InvalidParams(format!(
            "(alpha, p, q) = ({}, {}, {}) violates {} (threshold {:.6})",
            params.alpha, params.p, params.q, self.binding, self.threshold
        )))
    }
}

/// Checks `|alpha| < 1` and `max{N/(N+1), N/(N+alpha+1)} < p, q` with `p`
/// finite.
pub fn validate_params(alpha: f64, p: f64, q: Exponent, n_hom: f64) -> ParamVerdict {
    let t1 = n_hom / (n_hom + 1.0);
    let t2 = n_hom / (n_hom + alpha + 1.0);
    let threshold = t1.max(t2);
    let tight = if t2 > t1 {
        Constraint::SmoothnessBound
    } else {
        Constraint::DimensionBound
    };
    let fail = |binding| ParamVerdict {
        valid: false,
        threshold,
        binding,
    };
    if !(alpha.abs() < 1.0) {
        return fail(Constraint::AlphaRange);
    }
    if !p.is_finite() {
        return fail(Constraint::FiniteP);
    }
    let q_ok = match q {
        Exponent::Finite(q) => q > threshold,
        Exponent::Infinite => true,
    };
    if !(p > threshold) || !q_ok {
        return fail(tight);
    }
    ParamVerdict {
        valid: true,
        threshold,
        binding: tight,
    }
}

/// `S_q^alpha`: `(sum_k sum_Q (2^{k alpha} |lambda_{k,Q}|)^q chi_Q(x))^{1/q}`,
/// or the pointwise supremum for `q = inf`.
pub fn q_function(c: &LpCoefficients, dg: &DyadicGrid, alpha: f64, q: Exponent) -> Result<GridFunction> {
    check_shape(c, dg)?;
    let n = dg.masses.len();
    let mut acc = vec![0.0; n];
    for (sc, (k, vals)) in dg.scales.iter().zip(c.scales()) {
        let w = 2f64.powf(k as f64 * alpha);
        for (i, a) in acc.iter_mut().enumerate() {
            let v = w * vals[sc.point_cube[i]].abs();
            match q {
                Exponent::Finite(q) => *a += v.powf(q),
                Exponent::Infinite => *a = a.max(v),
            }
        }
    }
    if let Exponent::Finite(q) = q {
        for a in acc.iter_mut() {
            *a = a.powf(1.0 / q);
        }
    }
    Ok(GridFunction::from_parts(dg.key, DVector::from_vec(acc)))
}

fn check_shape(c: &LpCoefficients, dg: &DyadicGrid) -> Result<()> {
    if c.k_min != dg.window.k_min
        || c.values.len() != dg.scales.len()
        || c.values.iter().zip(&dg.scales).any(|(v, s)| v.len() != s.cubes.len())
    {
        return Err(Error::GridMismatch(
            "coefficient table does not match the dyadic grid".into(),
        ));
    }
    Ok(())
}

/// `|| S_q^alpha ||_{L^p(omega)}` for a coefficient table.
pub fn tl_norm_of(c: &LpCoefficients, dg: &DyadicGrid, params: &TLParams) -> Result<f64> {
    if !(params.p > 0.0) {
        return Err(Error::InvalidParams(format!("p must be positive, got {}", params.p)));
    }
    let s = q_function(c, dg, params.alpha, params.q)?;
    Ok(weighted_lp(s.values().as_slice(), params.p, dg.masses.as_slice()))
}

/// Carleson norm
/// `sup_P (omega(P)^{-(q/p - q/q')} sum_{Q in P} omega(Q) |2^{k alpha} lambda_{k,Q}|^q)^{1/q}`
/// with `q' = q/(q-1)`, over the finite cube lattice.
pub fn cmo_norm_of(c: &LpCoefficients, dg: &DyadicGrid, alpha: f64, q: f64, p: f64) -> Result<f64> {
    check_shape(c, dg)?;
    if !(p > 0.0 && p <= 1.0 && q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "Carleson norm needs 0 < p <= 1 < q < inf, got p = {p}, q = {q}"
        )));
    }
    let q_conj = q / (q - 1.0);
    let expo = -(1.0 / p - 1.0 / q_conj);
    let mut best = 0.0f64;
    for level in &dg.lattice {
        let mut sums = vec![0.0; level.omegas.len()];
        for ((sc, (k, vals)), parent) in dg.scales.iter().zip(c.scales()).zip(&level.parent) {
            let Some(parent) = parent else { continue };
            debug_assert!(k >= level.k_from);
            let w = 2f64.powf(k as f64 * alpha);
            for (qi, cube) in sc.cubes.iter().enumerate() {
                sums[parent[qi]] += cube.omega * (w * vals[qi].abs()).powf(q);
            }
        }
        for (s, &om) in sums.iter().zip(&level.omegas) {
            if *s > 0.0 {
                best = best.max(om.powf(expo) * s.powf(1.0 / q));
            }
        }
    }
    Ok(best)
}

/// `|| sup_{k,Q} 2^{k alpha} |lambda_{k,Q}| chi_Q ||_{L^p(omega)}`.
pub fn f_infty_p_norm_of(c: &LpCoefficients, dg: &DyadicGrid, alpha: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParams(format!("p must be positive, got {p}")));
    }
    let s = q_function(c, dg, alpha, Exponent::Infinite)?;
    if p.is_infinite() {
        return Ok(s.values().amax());
    }
    Ok(weighted_lp(s.values().as_slice(), p, dg.masses.as_slice()))
}

/// `sup_{k,Q} 2^{k alpha} |lambda_{k,Q}|`.
pub fn f_infty_infty_norm_of(c: &LpCoefficients, alpha: f64) -> f64 {
    c.scales()
        .flat_map(|(k, v)| {
            let w = 2f64.powf(k as f64 * alpha);
            v.iter().map(move |x| w * x.abs())
        })
        .fold(0.0, f64::max)
}

/// `D_k` and `D_k^M` over a window, built from a cached semigroup family.
#[derive(Debug, Clone)]
pub struct LittlewoodPaley {
    family: Arc<SemigroupFamily>,
    dyadic: DyadicGrid,
    dk: Vec<KernelOperator>,
    dk_window: Vec<KernelOperator>,
    n_hom: f64,
}

impl LittlewoodPaley {
    /// Needs `P_{2^{-k}}` cached for `k` in `k_min..=k_max + 1`.
    pub fn new(family: Arc<SemigroupFamily>, grid: &WeightedGrid, window: ScaleWindow) -> Result<Self> {
        window.validate()?;
        let (lo, hi) = family.k_range();
        if lo > window.k_min || hi < window.k_max + 1 {
            return Err(Error::InvalidParams(format!(
                "semigroup cache [{lo}, {hi}] does not cover [{}, {}]",
                window.k_min,
                window.k_max + 1
            )));
        }
        if family.decomposition().key() != grid.key() {
            return Err(Error::GridMismatch("semigroups built on another grid".into()));
        }
        let dyadic = DyadicGrid::new(grid, window)?;
        let dk: Vec<KernelOperator> = window
            .scales()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&k| Ok(family.poisson(k)?.sub(family.poisson(k + 1)?)))
            .collect::<Result<_>>()?;
        let dk_window = window
            .scales()
            .map(|k| {
                let mut acc = KernelOperator::zeros_like(&dk[0]);
                for l in window.neighbours(k) {
                    acc.add_assign(&dk[(l - window.k_min) as usize]);
                }
                acc
            })
            .collect();
        Ok(Self {
            family,
            dyadic,
            dk,
            dk_window,
            n_hom: grid.structure().homogeneous_dimension(),
        })
    }

    /// Builds the semigroups for `k_min..=k_max + 1` and the dyadic data.
    pub fn build(grid: &WeightedGrid, window: ScaleWindow) -> Result<Self> {
        window.validate()?;
        let family = crate::operator::build_semigroups(grid, window.k_min, window.k_max + 1)?;
        Self::new(Arc::new(family), grid, window)
    }

    pub fn window(&self) -> ScaleWindow {
        self.dyadic.window
    }

    pub fn family(&self) -> &SemigroupFamily {
        &self.family
    }

    pub fn family_arc(&self) -> Arc<SemigroupFamily> {
        self.family.clone()
    }

    pub fn dyadic(&self) -> &DyadicGrid {
        &self.dyadic
    }

    /// Homogeneous dimension `N` of the underlying structure.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.n_hom
    }

    /// `D_k = P_{2^{-k}} - P_{2^{-k-1}}`.
    pub fn dk(&self, k: i32) -> Result<&KernelOperator> {
        Ok(&self.dk[self.window().position(k)?])
    }

    /// `D_k^M = sum_{|l - k| <= M} D_l`, clipped to the window.
    pub fn dk_window(&self, k: i32) -> Result<&KernelOperator> {
        Ok(&self.dk_window[self.window().position(k)?])
    }

    /// `sum_{k=a}^{b} D_k` as the telescoped difference `P_{2^{-a}} - P_{2^{-b-1}}`.
    pub fn band_sum(&self, a: i32, b: i32) -> Result<KernelOperator> {
        let w = self.window();
        w.position(a)?;
        w.position(b)?;
        Ok(self.family.poisson(a)?.sub(self.family.poisson(b + 1)?))
    }

    /// `lambda_{k,Q} = (D_k f)(x_Q)`, or `(D_k^M f)(x_Q)` when `windowed`.
    pub fn analyze(&self, f: &GridFunction, windowed: bool) -> Result<LpCoefficients> {
        if f.key() != self.dyadic.key {
            return Err(Error::GridMismatch("function lives on another grid".into()));
        }
        let ops = if windowed { &self.dk_window } else { &self.dk };
        let values = ops
            .par_iter()
            .zip(&self.dyadic.scales)
            .map(|(op, sc)| {
                let v = op.apply(f)?;
                Ok(sc.cubes.iter().map(|c| v.values()[c.sample]).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(LpCoefficients {
            windowed,
            k_min: self.window().k_min,
            values,
        })
    }

    /// Triebel-Lizorkin norm from plain coefficients. Parameters are checked
    /// against the admissible region first.
    pub fn tl_norm(&self, f: &GridFunction, params: &TLParams) -> Result<f64> {
        validate_params(params.alpha, params.p, params.q, self.n_hom).into_result(params)?;
        self.tl_norm_unchecked(f, params)
    }

    /// Same as [`Self::tl_norm`] without the index check.
    pub fn tl_norm_unchecked(&self, f: &GridFunction, params: &TLParams) -> Result<f64> {
        tl_norm_of(&self.analyze(f, false)?, &self.dyadic, params)
    }

    /// Carleson norm from windowed coefficients.
    pub fn cmo_norm(&self, f: &GridFunction, alpha: f64, q: f64, p: f64) -> Result<f64> {
        cmo_norm_of(&self.analyze(f, true)?, &self.dyadic, alpha, q, p)
    }

    pub fn f_infty_p_norm(&self, f: &GridFunction, alpha: f64, p: f64) -> Result<f64> {
        f_infty_p_norm_of(&self.analyze(f, true)?, &self.dyadic, alpha, p)
    }

    pub fn f_infty_infty_norm(&self, f: &GridFunction, alpha: f64) -> Result<f64> {
        Ok(f_infty_infty_norm_of(&self.analyze(f, true)?, alpha))
    }
}

/// Checks that `f` is a function on `grid` and on the grid of `lp`.
pub fn check_lp_function(lp: &LittlewoodPaley, grid: &WeightedGrid, f: &GridFunction) -> Result<()> {
    check_grid(grid, f)?;
    if lp.dyadic.key != grid.key() {
        return Err(Error::GridMismatch("Littlewood-Paley data built on another grid".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::group::DunklStructure;
    use crate::operator::build_semigroups;

    fn setup(kappa: f64, m: usize, window: ScaleWindow) -> (WeightedGrid, LittlewoodPaley) {
        let g = build_grid(
            GridSpec::new(8.0, m, 1),
            &DunklStructure::preset("z2", kappa).unwrap(),
        )
        .unwrap();
        let fam = build_semigroups(&g, window.k_min, window.k_max + 1).unwrap();
        let lp = LittlewoodPaley::new(Arc::new(fam), &g, window).unwrap();
        (g, lp)
    }

    #[test]
    fn validate_examples() {
        let v = validate_params(0.0, 0.7, Exponent::Finite(0.7), 2.0);
        assert!(v.valid);
        assert!((v.threshold - 2.0 / 3.0).abs() < 1e-15);
        let v = validate_params(-0.5, 0.7, Exponent::Finite(2.0), 2.0);
        assert!(!v.valid);
        assert_eq!(v.binding, Constraint::SmoothnessBound);
        assert!((v.threshold - 0.8).abs() < 1e-15);
        let v = validate_params(1.2, 2.0, Exponent::Finite(2.0), 2.0);
        assert_eq!(v.binding, Constraint::AlphaRange);
        assert!(!v.valid);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinite);
        assert_eq!("1.5".parse::<Exponent>().unwrap(), Exponent::Finite(1.5));
        assert!("-1".parse::<Exponent>().is_err());
        assert_eq!(Exponent::Finite(2.0).conjugate().unwrap(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Finite(1.0).conjugate().unwrap(), Exponent::Infinite);
        let list = TLParams::parse_list("0,2,2;0.5,1.5,inf").unwrap();
        assert_eq!(list[1].q, Exponent::Infinite);
    }

    #[test]
    fn cubes_partition_and_nest() {
        let (g, lp) = setup(0.5, 64, ScaleWindow::new(-1, 2, 1).unwrap());
        let dg = lp.dyadic();
        let total = g.total_mass();
        for sc in dg.scales() {
            let mut seen = vec![0; g.len()];
            for c in &sc.cubes {
                for &i in &c.members {
                    seen[i] += 1;
                }
                assert!(c.members.contains(&c.sample));
            }
            assert!(seen.iter().all(|&n| n == 1));
            let om: f64 = sc.cubes.iter().map(|c| c.omega).sum();
            assert!((om - total).abs() <= 1e-12 * total);
        }
        // every fine cube sits inside one coarse cube
        for w in dg.scales().windows(2) {
            for c in &w[1].cubes {
                let owners: std::collections::BTreeSet<usize> =
                    c.members.iter().map(|&i| w[0].cube_of(i)).collect();
                assert_eq!(owners.len(), 1);
            }
        }
    }

    #[test]
    fn telescoping() {
        let (_, lp) = setup(0.5, 64, ScaleWindow::new(-1, 3, 1).unwrap());
        let mut acc = KernelOperator::zeros_like(lp.dk(-1).unwrap());
        for k in -1..=3 {
            acc.add_assign(lp.dk(k).unwrap());
        }
        let direct = lp.band_sum(-1, 3).unwrap();
        assert!(acc.sub(&direct).operator_norm() <= 1e-12);
    }

    #[test]
    fn single_coefficient_norms() {
        let (_, lp) = setup(0.5, 64, ScaleWindow::new(-1, 2, 1).unwrap());
        let dg = lp.dyadic();
        let mut c = LpCoefficients::zeros(dg, false);
        let (k0, q0, v) = (1, 3, -0.7);
        c.set(k0, q0, v);
        let alpha = 0.5;
        let s = q_function(&c, dg, alpha, Exponent::Finite(2.0)).unwrap();
        let cube = &dg.scale(k0).unwrap().cubes[q0];
        let expect = 2f64.powf(k0 as f64 * alpha) * v.abs();
        for i in 0..s.len() {
            let want = if cube.members.contains(&i) { expect } else { 0.0 };
            assert!((s.values()[i] - want).abs() <= 1e-15);
        }
        assert_eq!(f_infty_infty_norm_of(&c, alpha), expect);
        let zero = LpCoefficients::zeros(dg, false);
        assert_eq!(tl_norm_of(&zero, dg, &TLParams::new(0.0, 2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(cmo_norm_of(&zero, dg, 0.0, 2.0, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn tl_norm_rearrangement() {
        let (g, lp) = setup(0.5, 64, ScaleWindow::new(-1, 2, 1).unwrap());
        let f = GridFunction::from_fn(&g, |x| (-x[0] * x[0]).exp() * (1.0 + x[0])).unwrap();
        let c = lp.analyze(&f, false).unwrap();
        let n = lp.tl_norm(&f, &TLParams::new(0.0, 2.0, 2.0)).unwrap();
        let direct: f64 = c
            .scales()
            .map(|(k, v)| {
                let sc = lp.dyadic().scale(k).unwrap();
                v.iter().zip(&sc.cubes).map(|(x, q)| q.omega * x * x).sum::<f64>()
            })
            .sum();
        assert!((n * n - direct).abs() <= 1e-12 * direct);
    }
}
