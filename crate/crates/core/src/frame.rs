//! The splitting `I~ = T_M + R_1 + R_2`, inversion of `T_M` on the frame band
//! and the analysis/synthesis codec built on it.
//!
//! `I~ = (sum_{k=a}^{b} D_k)^2` is the identity the finite window can
//! actually reproduce; the frame band is the spectral subspace on which its
//! symbol is at least `1 - tau`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    lp_norm, make_test_function, seeded_rng, GridFunction, TestFunctionKind, WeightedGrid,
};
use crate::lp::{
    tl_norm_of, validate_params, LittlewoodPaley, LpCoefficients, ScaleWindow, TLParams,
};
use crate::operator::{build_semigroups, KernelOperator, SpectralDecomposition};
use crate::quadrature::spectral_norm;

/// Default band threshold `tau`.
pub const DEFAULT_BAND_TOL: f64 = 0.05;

/// Spectral subspace where the symbol of `I~` is at least `1 - tau`.
#[derive(Debug, Clone)]
pub struct FrameBand {
    basis: DMatrix<f64>,
    modes: Vec<usize>,
    frequencies: Vec<f64>,
    tau: f64,
}

/// Symbol of `I~` at frequency `xi`: `(e^{-2^{-b-1} xi} - e^{-2^{-a} xi})^2`.
pub fn truncated_identity_symbol(xi: f64, a: i32, b: i32) -> f64 {
    let s = (-(2f64.powi(-b - 1)) * xi).exp() - (-(2f64.powi(-a)) * xi).exp();
    s * s
}

impl FrameBand {
    pub fn new(d: &SpectralDecomposition, a: i32, b: i32, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParams(format!("band threshold must lie in (0, 1), got {tau}")));
        }
        let xi = d.frequencies();
        let modes: Vec<usize> = (0..d.len())
            .filter(|&j| truncated_identity_symbol(xi[j], a, b) >= 1.0 - tau)
            .collect();
        if modes.is_empty() {
            return Err(Error::InvalidParams(format!(
                "no eigenmode has symbol above 1 - {tau} for the window [{a}, {b}]"
            )));
        }
        let basis = d.weighted_basis().select_columns(&modes);
        Ok(Self {
            frequencies: modes.iter().map(|&j| xi[j]).collect(),
            basis,
            modes,
            tau,
        })
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Frequencies `sqrt(-lambda)` of the retained modes.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Orthonormal basis of the band in weighted coordinates.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub(crate) fn project_weighted(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// `Pi f`.
    pub fn project(&self, f: &GridFunction, sqrt_mass: &DVector<f64>) -> GridFunction {
        let u = f.values().component_mul(sqrt_mass);
        GridFunction::from_parts(f.key(), self.project_weighted(&u).component_div(sqrt_mass))
    }

    /// `Pi A Pi` as an `r x r` matrix in band coordinates.
    pub fn compress(&self, op: &KernelOperator) -> DMatrix<f64> {
        self.basis.transpose() * op.weighted_matrix() * &self.basis
    }
}

/// Grid, semigroups, Littlewood-Paley data and the frame band.
#[derive(Debug, Clone)]
pub struct FrameContext {
    grid: Arc<WeightedGrid>,
    lp: Arc<LittlewoodPaley>,
    band: Arc<FrameBand>,
}

impl FrameContext {
    /// Builds everything for `grid` and `window`; semigroups are cached for
    /// `k_min..=k_max + 1`.
    pub fn new(grid: WeightedGrid, window: ScaleWindow, band_tol: f64) -> Result<Self> {
        window.validate()?;
        let family = Arc::new(build_semigroups(&grid, window.k_min, window.k_max + 1)?);
        let band = FrameBand::new(family.decomposition(), window.k_min, window.k_max, band_tol)?;
        let lp = LittlewoodPaley::new(family, &grid, window)?;
        Ok(Self {
            grid: Arc::new(grid),
            lp: Arc::new(lp),
            band: Arc::new(band),
        })
    }

    /// Same grid and semigroups with a different window width `M`.
    pub fn with_m(&self, m: u32) -> Result<Self> {
        let window = self.window().with_m(m);
        let lp = LittlewoodPaley::new(self.lp.family_arc(), &self.grid, window)?;
        Ok(Self {
            grid: self.grid.clone(),
            lp: Arc::new(lp),
            band: self.band.clone(),
        })
    }

    /// Same grid and semigroups with a different band threshold.
    pub fn with_band_tol(&self, tau: f64) -> Result<Self> {
        let w = self.window();
        let band = FrameBand::new(self.lp.family().decomposition(), w.k_min, w.k_max, tau)?;
        Ok(Self {
            grid: self.grid.clone(),
            lp: self.lp.clone(),
            band: Arc::new(band),
        })
    }

    pub fn grid(&self) -> &WeightedGrid {
        &self.grid
    }

    pub fn lp(&self) -> &LittlewoodPaley {
        &self.lp
    }

    pub fn band(&self) -> &FrameBand {
        &self.band
    }

    pub fn window(&self) -> ScaleWindow {
        self.lp.window()
    }

    fn sqrt_mass(&self) -> DVector<f64> {
        self.grid.masses().map(f64::sqrt)
    }

    /// `Pi f`.
    pub fn project(&self, f: &GridFunction) -> GridFunction {
        self.band.project(f, &self.sqrt_mass())
    }

    /// Any test function kind, band-limited ones included. Band-limited
    /// functions are `Pi (sum_{k=a}^{b} D_k) g` for seeded noise `g`,
    /// normalized in `L^2(omega)`.
    pub fn make_test_function(&self, kind: &TestFunctionKind, seed: u64) -> Result<GridFunction> {
        self.make_test_function_stream(kind, seed, 0)
    }

    /// As [`make_test_function`](Self::make_test_function), drawing the
    /// band-limited noise from `(seed, stream)`.
    pub fn make_test_function_stream(
        &self,
        kind: &TestFunctionKind,
        seed: u64,
        stream: u64,
    ) -> Result<GridFunction> {
        match kind {
            TestFunctionKind::Bandlimited { a, b } => {
                let g = self.noise(seed, stream)?;
                let f = self.project(&self.lp.band_sum(*a, *b)?.apply(&g)?);
                let n = lp_norm(&f, 2.0, &self.grid)?;
                if n == 0.0 {
                    return Err(Error::InvalidParams(
                        "band-limited generator produced the zero function".into(),
                    ));
                }
                Ok(f.scaled(1.0 / n))
            }
            other => make_test_function(other, seed, &self.grid),
        }
    }

    /// Band-limited function on the default generator window `[-2, 5]`,
    /// clipped to the scale window.
    pub fn bandlimited(&self, seed: u64) -> Result<GridFunction> {
        self.bandlimited_stream(seed, 0)
    }

    pub fn bandlimited_stream(&self, seed: u64, stream: u64) -> Result<GridFunction> {
        let w = self.window();
        let kind = TestFunctionKind::Bandlimited {
            a: (-2).max(w.k_min),
            b: 5.min(w.k_max),
        };
        self.make_test_function_stream(&kind, seed, stream)
    }

    /// Standard normal values from `(seed, stream)`.
    pub fn noise(&self, seed: u64, stream: u64) -> Result<GridFunction> {
        let mut rng = seeded_rng(seed, stream);
        let v = DVector::from_iterator(
            self.grid.len(),
            (0..self.grid.len()).map(|_| StandardNormal.sample(&mut rng)),
        );
        GridFunction::new(&self.grid, v)
    }

    pub fn build_operators(&self) -> Result<FrameOperatorSet> {
        build_operators(&self.lp)
    }
}

/// `T_M`, `R_1`, `R_2` and `I~` as dense operators.
#[derive(Debug, Clone)]
pub struct FrameOperatorSet {
    pub t_m: KernelOperator,
    pub r1: KernelOperator,
    pub r2: KernelOperator,
    pub identity: KernelOperator,
    pub window: ScaleWindow,
}

impl FrameOperatorSet {
    /// `|| T_M + R_1 + R_2 - I~ ||`.
    pub fn splitting_residual(&self) -> f64 {
        self.t_m.add(&self.r1).add(&self.r2).sub(&self.identity).operator_norm()
    }
}

/// Assembles
/// `T_M f(x) = sum_k sum_Q omega(Q) D_k^M(x, x_Q) (D_k f)(x_Q)`,
/// `R_1 = sum_{|k-l| > M} D_l D_k` and `R_2 = sum_k D_k^M D_k - T_M`.
pub fn build_operators(lp: &LittlewoodPaley) -> Result<FrameOperatorSet> {
    let window = lp.window();
    let total = lp.band_sum(window.k_min, window.k_max)?;
    let identity = total.compose(&total);
    let sqrt_mass = total.sqrt_mass().clone();
    let scales: Vec<i32> = window.scales().collect();
    let parts: Vec<[DMatrix<f64>; 3]> = scales
        .par_iter()
        .map(|&k| {
            let dk = lp.dk(k)?.weighted_matrix();
            let dkm = lp.dk_window(k)?.weighted_matrix();
            let scale = lp.dyadic().scale(k)?;
            let samples = scale.samples();
            // in weighted coordinates the point evaluation at x_Q carries 1 / m(x_Q)
            let left = dkm.select_columns(&samples);
            let mut right = dk.select_rows(&samples);
            for (r, cube) in scale.cubes.iter().enumerate() {
                let s = sqrt_mass[cube.sample];
                right.row_mut(r).scale_mut(cube.omega / (s * s));
            }
            let sampled = left * right;
            let near = dkm * dk;
            let m = window.m as i32;
            let far_scales: Vec<i32> = window.scales().filter(|l| (l - k).abs() > m).collect();
            let far = if far_scales.is_empty() {
                DMatrix::zeros(dk.nrows(), dk.ncols())
            } else {
                let mut acc = DMatrix::zeros(dk.nrows(), dk.ncols());
                for l in far_scales {
                    acc += lp.dk(l)?.weighted_matrix();
                }
                acc * dk
            };
            Ok([sampled, near, far])
        })
        .collect::<Result<_>>()?;
    let n = sqrt_mass.len();
    let mut t = DMatrix::zeros(n, n);
    let mut near = DMatrix::zeros(n, n);
    let mut r1 = DMatrix::zeros(n, n);
    for [a, b, c] in &parts {
        t += a;
        near += b;
        r1 += c;
    }
    let r2 = near - &t;
    let key = total.key();
    let wrap = |m| KernelOperator::from_weighted(m, sqrt_mass.clone(), key);
    Ok(FrameOperatorSet {
        t_m: wrap(t),
        r1: wrap(r1),
        r2: wrap(r2),
        identity,
        window,
    })
}

/// Contraction numbers of `T_M` on the frame band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    /// `|| Pi (I~ - T_M) Pi ||`.
    pub rho_hat: f64,
    /// `|| Pi (I - T_M) Pi ||`, the factor that governs the iteration.
    pub iteration_factor: f64,
}

pub fn contraction_estimate(ops: &FrameOperatorSet, band: &FrameBand) -> Contraction {
    let r = band.rank();
    let t = band.compress(&ops.t_m);
    let id = band.compress(&ops.identity);
    Contraction {
        rho_hat: spectral_norm(&(id - &t)),
        iteration_factor: spectral_norm(&(DMatrix::identity(r, r) - t)),
    }
}

/// `|| I~ - T_M ||` on the whole grid space.
pub fn full_space_defect(ops: &FrameOperatorSet) -> f64 {
    ops.identity.sub(&ops.t_m).operator_norm()
}

/// Stopping rule for the Richardson iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeumannConfig {
    /// Target for `|| Pi (f - T_M h) || / || f ||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Project each update onto the frame band.
    pub subspace: bool,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 40,
            subspace: true,
        }
    }
}

impl NeumannConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParams(format!(
                "Neumann iteration needs tol > 0 and max_iter >= 1, got {} and {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// What happened during [`invert_tm`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inversion {
    /// Absolute residuals `|| Pi (f - T_M h_j) ||`, starting from `h_0 = 0`.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual of the direct band solve, run only when the
    /// iteration did not converge.
    pub fallback_residual: Option<f64>,
}

impl Inversion {
    /// Successive ratios `r_{j+1} / r_j`.
    pub fn ratios(&self) -> Vec<f64> {
        self.residual_history.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Solves `T_M h = f` by `h <- h + Pi (f - T_M h)`. On failure the direct
/// solve of `Pi T_M Pi` on the band is returned instead and flagged.
pub fn invert_tm(
    f: &GridFunction,
    ops: &FrameOperatorSet,
    band: &FrameBand,
    cfg: &NeumannConfig,
) -> Result<(GridFunction, Inversion)> {
    cfg.validate()?;
    let s = ops.t_m.sqrt_mass().clone();
    if f.key() != ops.t_m.key() {
        return Err(Error::GridMismatch("function and operators live on different grids".into()));
    }
    let a = ops.t_m.weighted_matrix();
    let u = f.values().component_mul(&s);
    let proj = |v: DVector<f64>| if cfg.subspace { band.project_weighted(&v) } else { v };
    let f_norm = u.norm();
    let mut h = DVector::zeros(u.len());
    let mut residual = proj(u.clone());
    let mut history = vec![residual.norm()];
    let mut iterations = 0;
    let target = cfg.tol * f_norm;
    while history[iterations] > target && iterations < cfg.max_iter {
        h += &residual;
        residual = proj(&u - a * &h);
        history.push(residual.norm());
        iterations += 1;
    }
    let converged = history[iterations] <= target;
    let mut fallback_residual = None;
    if !converged {
        let b = band.compress(&ops.t_m);
        let c = band.basis().transpose() * &u;
        let z = b
            .lu()
            .solve(&c)
            .ok_or_else(|| Error::Eigen("restricted T_M is singular".into()))?;
        h = band.basis() * z;
        fallback_residual = Some(band.project_weighted(&(&u - a * &h)).norm() / f_norm);
    }
    let h = GridFunction::from_parts(f.key(), h.component_div(&s));
    Ok((
        h,
        Inversion {
            residual_history: history,
            iterations,
            converged,
            fallback_residual,
        },
    ))
}

/// `T_M h`: synthesis of windowed kernel columns against `D_k h` sampled at
/// the cube points.
pub fn reconstruct(h: &GridFunction, ops: &FrameOperatorSet) -> Result<GridFunction> {
    ops.t_m.apply(h)
}

/// `sum_k sum_Q omega(Q) lambda_{k,Q} D_k^M(., x_Q)` for an arbitrary table.
pub fn synthesize(lambda: &LpCoefficients, lp: &LittlewoodPaley) -> Result<GridFunction> {
    let dg = lp.dyadic();
    let s = lp.dk(lp.window().k_min)?.sqrt_mass().clone();
    let n = s.len();
    let mut acc = DVector::zeros(n);
    for (sc, (k, vals)) in dg.scales().iter().zip(lambda.scales()) {
        if sc.cubes.len() != vals.len() || sc.k != k {
            return Err(Error::GridMismatch(
                "coefficient table does not match the dyadic grid".into(),
            ));
        }
        let a = lp.dk_window(k)?.weighted_matrix();
        for (cube, &v) in sc.cubes.iter().zip(vals) {
            if v == 0.0 {
                continue;
            }
            let c = cube.omega * v / s[cube.sample];
            acc.axpy(c, &a.column(cube.sample), 1.0);
        }
    }
    Ok(GridFunction::from_parts(dg.key(), acc.component_div(&s)))
}

/// Outcome of one analysis/synthesis round trip, serialized flat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub seed: u64,
    pub m: u32,
    pub k_min: i32,
    pub k_max: i32,
    pub band_tol: f64,
    pub band_rank: usize,
    pub rho_hat: f64,
    pub iteration_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
    pub fallback_residual: Option<f64>,
    pub residual_history: Vec<f64>,
    pub f_l2: f64,
    pub h_l2: f64,
    pub l2_ratio: f64,
    /// `|| Pi (f - T_M h) || / || f ||`.
    pub roundtrip_residual: f64,
    /// `|| (I - Pi) T_M h || / || f ||`: what `T_M h` puts outside the band.
    pub leakage: f64,
    pub tl_alpha: Vec<f64>,
    pub tl_p: Vec<f64>,
    pub tl_q: Vec<crate::lp::Exponent>,
    pub tl_f: Vec<f64>,
    pub tl_h: Vec<f64>,
    pub tl_ratio: Vec<f64>,
}

impl FrameReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Operators and contraction numbers for one context, ready to invert.
#[derive(Debug, Clone)]
pub struct Codec {
    ctx: FrameContext,
    ops: FrameOperatorSet,
    contraction: Contraction,
    cfg: NeumannConfig,
}

impl Codec {
    pub fn new(ctx: &FrameContext, cfg: NeumannConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = ctx.build_operators()?;
        let contraction = contraction_estimate(&ops, ctx.band());
        Ok(Self {
            ctx: ctx.clone(),
            ops,
            contraction,
            cfg,
        })
    }

    pub fn context(&self) -> &FrameContext {
        &self.ctx
    }

    pub fn operators(&self) -> &FrameOperatorSet {
        &self.ops
    }

    pub fn contraction(&self) -> Contraction {
        self.contraction
    }

    pub fn config(&self) -> NeumannConfig {
        self.cfg
    }

    pub fn invert(&self, f: &GridFunction) -> Result<(GridFunction, Inversion)> {
        invert_tm(f, &self.ops, self.ctx.band(), &self.cfg)
    }

    /// Inverts, reconstructs and compares norms of `f` and `h`.
    pub fn roundtrip(&self, f: &GridFunction, seed: u64, params: &[TLParams]) -> Result<FrameReport> {
        codec_roundtrip(f, params, self, seed)
    }
}

/// Runs [`invert_tm`] then [`reconstruct`] and records `L^2` and
/// Triebel-Lizorkin norm ratios between `h` and `f`.
pub fn codec_roundtrip(
    f: &GridFunction,
    params: &[TLParams],
    codec: &Codec,
    seed: u64,
) -> Result<FrameReport> {
    let ctx = &codec.ctx;
    let lp = ctx.lp();
    let n_hom = lp.homogeneous_dimension();
    for p in params {
        validate_params(p.alpha, p.p, p.q, n_hom).into_result(p)?;
    }
    let (h, inv) = codec.invert(f)?;
    let back = reconstruct(&h, &codec.ops)?;
    let grid = ctx.grid();
    let f_l2 = lp_norm(f, 2.0, grid)?;
    let h_l2 = lp_norm(&h, 2.0, grid)?;
    let diff = f.combine(1.0, &back, -1.0)?;
    let in_band = ctx.project(&diff);
    let outside = back.combine(1.0, &ctx.project(&back), -1.0)?;
    let rel = |v: f64| if f_l2 == 0.0 { 0.0 } else { v / f_l2 };
    let cf = lp.analyze(f, false)?;
    let ch = lp.analyze(&h, false)?;
    let mut tl_f = Vec::new();
    let mut tl_h = Vec::new();
    for p in params {
        tl_f.push(tl_norm_of(&cf, lp.dyadic(), p)?);
        tl_h.push(tl_norm_of(&ch, lp.dyadic(), p)?);
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let w = ctx.window();
    Ok(FrameReport {
        seed,
        m: w.m,
        k_min: w.k_min,
        k_max: w.k_max,
        band_tol: ctx.band().tau(),
        band_rank: ctx.band().rank(),
        rho_hat: codec.contraction.rho_hat,
        iteration_factor: codec.contraction.iteration_factor,
        tol: codec.cfg.tol,
        max_iter: codec.cfg.max_iter,
        iterations: inv.iterations,
        converged: inv.converged,
        fallback_residual: inv.fallback_residual,
        residual_history: inv.residual_history,
        f_l2,
        h_l2,
        l2_ratio: ratio(h_l2, f_l2),
        roundtrip_residual: rel(lp_norm(&in_band, 2.0, grid)?),
        leakage: rel(lp_norm(&outside, 2.0, grid)?),
        tl_alpha: params.iter().map(|p| p.alpha).collect(),
        tl_p: params.iter().map(|p| p.p).collect(),
        tl_q: params.iter().map(|p| p.q).collect(),
        tl_ratio: tl_h.iter().zip(&tl_f).map(|(a, b)| ratio(*a, *b)).collect(),
        tl_f,
        tl_h,
    })
}
