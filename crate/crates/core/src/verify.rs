//! Numerical batteries for the kernel, orthogonality, duality and
//! norm-equivalence estimates. Empirical constants are reported; pass flags
//! encode stability criteria only.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{Codec, FrameContext, FrameOperatorSet};
use crate::grid::{inner_product, lp_norm, seeded_rng, GridFunction, WeightedGrid};
use crate::group::{ball_volume, dunkl_metric};
use crate::lp::{
    cmo_norm_of, f_infty_infty_norm_of, f_infty_p_norm_of, tl_norm_of, validate_params, Exponent,
    LittlewoodPaley, LpCoefficients, TLParams,
};
use crate::operator::SemigroupFamily;

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Minimum number of `(k, j)` pairs the decay fit accepts.
pub const MIN_FIT_PAIRS: usize = 6;

/// Fitted decay of `|| D_k D_j ||` in `|k - j|` and of the kernel off the
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub k: Vec<i32>,
    pub j: Vec<i32>,
    pub norms: Vec<f64>,
    /// `eps'`: minus the slope of `log2 || D_k D_j ||` against `|k - j|`.
    pub epsilon_prime: Option<f64>,
    pub r_squared: Option<f64>,
    /// Fitted off-diagonal exponent `gamma`.
    pub gamma: Option<f64>,
    pub gamma_r_squared: Option<f64>,
    pub insufficient_data: bool,
    pub pass: bool,
}

/// Computes `|| D_k D_j ||` for every pair with `|k - j| <= max_gap` and fits
/// `log2 || D_k D_j || = c - eps' |k - j|`.
pub fn almost_orthogonality_decay(lp: &LittlewoodPaley, grid: &WeightedGrid, max_gap: i32) -> Result<DecayReport> {
    let w = lp.window();
    let mut pairs = Vec::new();
    for k in w.scales() {
        for j in w.scales() {
            if j >= k && j - k <= max_gap {
                pairs.push((k, j));
            }
        }
    }
    let norms: Vec<f64> = pairs
        .par_iter()
        .map(|&(k, j)| Ok(lp.dk(k)?.compose(lp.dk(j)?).self_adjoint_norm()))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = pairs.iter().map(|(k, j)| (j - k) as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.log2()).collect();
    let fit = if pairs.len() >= MIN_FIT_PAIRS && xs.iter().any(|&x| x > 0.0) {
        fit_line(&xs, &ys)
    } else {
        None
    };
    let epsilon_prime = fit.map(|f| -f.slope);
    let gamma_fit = match epsilon_prime {
        Some(e) => spatial_decay(lp, grid, e)?,
        None => None,
    };
    let pass = matches!(fit, Some(f) if -f.slope >= 0.3 && f.r_squared >= 0.9);
    Ok(DecayReport {
        k: pairs.iter().map(|p| p.0).collect(),
        j: pairs.iter().map(|p| p.1).collect(),
        norms,
        epsilon_prime,
        r_squared: fit.map(|f| f.r_squared),
        gamma: gamma_fit.map(|f| f.slope),
        gamma_r_squared: gamma_fit.map(|f| f.r_squared),
        insufficient_data: fit.is_none(),
        pass,
    })
}

/// Fits `log(|D_k D_j(x,y)| V 2^{|k-j| eps'}) = c + gamma log(r / (r + d))`
/// with `r = 2^{-min(k,j)}`, `d` the orbit distance and `V` the model ball
/// volume, over far-field samples in the inner half-box.
fn spatial_decay(lp: &LittlewoodPaley, grid: &WeightedGrid, eps: f64) -> Result<Option<LineFit>> {
    let w = lp.window();
    let s = grid.structure();
    let interior = grid.interior_indices(0.5);
    let stride = (interior.len() / 24).max(1);
    let sample: Vec<usize> = interior.iter().step_by(stride).copied().collect();
    let half = grid.spec().half_width / 2.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in w.scales() {
        let r = 2f64.powi(-k);
        if r > half / 2.0 {
            continue;
        }
        for j in [k, k + 1] {
            if !w.contains(j) {
                continue;
            }
            let op = lp.dk(k)?.compose(lp.dk(j)?);
            for &a in &sample {
                for &b in &sample {
                    let (x, y) = (grid.point(a), grid.point(b));
                    let d = dunkl_metric(x, y, s.group())?;
                    let ratio = r / (r + d);
                    if ratio > 0.5 {
                        continue;
                    }
                    let v = s.ball_volume_model(x, r + d).max(s.ball_volume_model(y, r + d));
                    let z = op.entry(a, b).abs() * v * 2f64.powf((j - k) as f64 * eps);
                    if z > 0.0 {
                        xs.push(ratio.ln());
                        ys.push(z.ln());
                    }
                }
            }
        }
    }
    Ok(fit_line(&xs, &ys))
}

/// Index cases of the duality theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DualityCase {
    /// `1 < p, q < inf`: dual `F^{-alpha, q'}_{p'}`.
    A,
    /// `p <= 1 < q`: dual `CMO^{-alpha, q'}_p`.
    B,
    /// `1 < p`, `q <= 1`: dual `F^{-alpha, inf}_{p'}`.
    C,
    /// `p, q <= 1`: dual `F^{-alpha + N(1/p - 1), inf}_inf`.
    D,
}

impl DualityCase {
    pub const ALL: [DualityCase; 4] = [Self::A, Self::B, Self::C, Self::D];

    /// Representative `(alpha, p, q)` used by the batteries.
    pub fn representative(self) -> TLParams {
        match self {
            Self::A => TLParams::new(0.0, 2.0, 2.0),
            Self::B => TLParams::new(0.0, 0.9, 2.0),
            Self::C => TLParams::new(0.0, 2.0, 0.9),
            Self::D => TLParams::new(0.0, 0.9, 0.9),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            "D" | "d" => Ok(Self::D),
            other => Err(Error::InvalidParams(format!("unknown duality case `{other}`"))),
        }
    }

    /// Checks that `params` fall in this case's index range.
    pub fn check(self, params: &TLParams, n_hom: f64) -> Result<()> {
        validate_params(params.alpha, params.p, params.q, n_hom).into_result(params)?;
        let q = params
            .q
            .finite()
            .ok_or_else(|| Error::InvalidParams("duality cases need a finite q".into()))?;
        let p = params.p;
        let ok = match self {
            Self::A => p > 1.0 && q > 1.0,
            Self::B => p <= 1.0 && q > 1.0,
            Self::C => p > 1.0 && q <= 1.0,
            Self::D => p <= 1.0 && q <= 1.0,
        };
        if !ok {
            return Err(Error::InvalidParams(format!(
                "(alpha, p, q) = ({}, {p}, {q}) is outside case {self:?}",
                params.alpha
            )));
        }
        Ok(())
    }

    /// Norm of the primal function `f`.
    pub fn primal_norm(self, c_plain: &LpCoefficients, lp: &LittlewoodPaley, params: &TLParams) -> Result<f64> {
        tl_norm_of(c_plain, lp.dyadic(), params)
    }

    /// Norm of `g` in the dual space, computed from `coeffs`.
    pub fn dual_norm(self, coeffs: &LpCoefficients, lp: &LittlewoodPaley, params: &TLParams) -> Result<f64> {
        let dg = lp.dyadic();
        let a = -params.alpha;
        let p = params.p;
        let q = params.q.finite().unwrap_or(f64::INFINITY);
        match self {
            Self::A => {
                let pc = p / (p - 1.0);
                let qc = Exponent::Finite(q).conjugate()?;
                tl_norm_of(coeffs, dg, &TLParams::new(a, pc, qc))
            }
            Self::B => cmo_norm_of(coeffs, dg, a, q / (q - 1.0), p),
            Self::C => f_infty_p_norm_of(coeffs, dg, a, p / (p - 1.0)),
            Self::D => {
                let n = lp.homogeneous_dimension();
                Ok(f_infty_infty_norm_of(coeffs, a + n * (1.0 / p - 1.0)))
            }
        }
    }

    /// Whether the dual norm is built from windowed coefficients: only the
    /// Carleson norm of case B is.
    pub fn dual_windowed(self) -> bool {
        self == Self::B
    }
}

/// Per-trial ratios and the empirical constant of a battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub suite: String,
    pub case: Option<DualityCase>,
    pub alpha: f64,
    pub p: f64,
    pub q: Exponent,
    pub seed: u64,
    pub streams: Vec<u64>,
    pub ratios: Vec<f64>,
    pub skipped: usize,
    /// `max` of the ratios.
    pub c_hat: f64,
    pub min_ratio: f64,
    pub all_finite: bool,
}

impl BatteryReport {
    fn new(suite: &str, case: Option<DualityCase>, params: &TLParams, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            case,
            alpha: params.alpha,
            p: params.p,
            q: params.q,
            seed,
            streams: Vec::new(),
            ratios: Vec::new(),
            skipped: 0,
            c_hat: 0.0,
            min_ratio: 0.0,
            all_finite: true,
        }
    }

    fn finish(mut self) -> Self {
        self.all_finite = self.ratios.iter().all(|r| r.is_finite());
        self.c_hat = self.ratios.iter().copied().fold(0.0, f64::max);
        self.min_ratio = self.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        if self.ratios.is_empty() {
            self.min_ratio = 0.0;
        }
        self
    }

    /// `max / min` of the ratios.
    pub fn spread(&self) -> f64 {
        if self.min_ratio > 0.0 {
            self.c_hat / self.min_ratio
        } else {
            f64::INFINITY
        }
    }
}

/// `|<f, g>| / (||f|| ||g||)` for one pair, or `None` when a norm vanishes.
pub fn duality_ratio(
    case: DualityCase,
    params: &TLParams,
    f: &GridFunction,
    g: &GridFunction,
    lp: &LittlewoodPaley,
    grid: &WeightedGrid,
) -> Result<Option<f64>> {
    let nf = case.primal_norm(&lp.analyze(f, false)?, lp, params)?;
    let ng = case.dual_norm(&lp.analyze(g, case.dual_windowed())?, lp, params)?;
    if nf == 0.0 || ng == 0.0 {
        return Ok(None);
    }
    Ok(Some(inner_product(f, g, grid)?.abs() / (nf * ng)))
}

/// `trials` seeded pairs of band-limited functions; trial `t` draws `f`
/// from stream `2t` and `g` from stream `2t + 1`.
pub fn duality_battery(
    ctx: &FrameContext,
    case: DualityCase,
    params: &TLParams,
    trials: usize,
    seed: u64,
) -> Result<BatteryReport> {
    let lp = ctx.lp();
    case.check(params, lp.homogeneous_dimension())?;
    let out: Vec<Option<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let f = ctx.bandlimited_stream(seed, 2 * t)?;
            let g = ctx.bandlimited_stream(seed, 2 * t + 1)?;
            duality_ratio(case, params, &f, &g, lp, ctx.grid())
        })
        .collect::<Result<_>>()?;
    let mut rep = BatteryReport::new("duality", Some(case), params, seed);
    for (t, r) in out.into_iter().enumerate() {
        match r {
            Some(r) => {
                rep.streams.push(2 * t as u64);
                rep.ratios.push(r);
            }
            None => rep.skipped += 1,
        }
    }
    Ok(rep.finish())
}

/// `max(a/b, b/a)`.
pub fn stability_factor(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return f64::INFINITY;
    }
    (a / b).max(b / a)
}

/// Dual-space norms of the kernel columns `D_k(., y)`, one per sample point.
/// Coefficients are plain `D_j` samples.
pub fn lemma51_battery(
    lp: &LittlewoodPaley,
    k: i32,
    case: DualityCase,
    params: &TLParams,
    sample_points: &[usize],
) -> Result<BatteryReport> {
    case.check(params, lp.homogeneous_dimension())?;
    let dk = lp.dk(k)?;
    let norms: Vec<f64> = sample_points
        .par_iter()
        .map(|&y| {
            let col = dk.column(y);
            case.dual_norm(&lp.analyze(&col, false)?, lp, params)
        })
        .collect::<Result<_>>()?;
    let mut rep = BatteryReport::new("lemma51", Some(case), params, 0);
    rep.streams = sample_points.iter().map(|&i| i as u64).collect();
    rep.ratios = norms;
    Ok(rep.finish())
}

/// `count` grid points evenly spread over the inner half-box of a
/// one-dimensional grid, or over the interior index list otherwise.
pub fn sample_points(grid: &WeightedGrid, count: usize) -> Vec<usize> {
    let half = grid.spec().half_width / 2.0;
    if grid.dimension() == 1 {
        return (0..count)
            .map(|i| {
                let x = if count == 1 {
                    0.0
                } else {
                    -half + 2.0 * half * i as f64 / (count - 1) as f64
                };
                grid.nearest_index(&[x])
            })
            .collect();
    }
    let interior = grid.interior_indices(0.5);
    let stride = (interior.len() / count.max(1)).max(1);
    interior.into_iter().step_by(stride).take(count).collect()
}

/// Norm-ratio brackets from repeated codec round trips.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub seed: u64,
    pub trials: usize,
    pub l2_ratios: Vec<f64>,
    pub l2_min: f64,
    pub l2_max: f64,
    pub params: Vec<TLParams>,
    /// `tl_ratios[i][t]` for parameter set `i`, trial `t`.
    pub tl_ratios: Vec<Vec<f64>>,
    pub tl_min: Vec<f64>,
    pub tl_max: Vec<f64>,
    pub iterations: Vec<usize>,
    pub not_converged: usize,
    pub max_step_ratio: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// Runs the codec on `trials` band-limited inputs (seeds `seed + t`).
pub fn norm_equivalence_battery(
    codec: &Codec,
    params: &[TLParams],
    trials: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let ctx = codec.context();
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let f = ctx.bandlimited(seed + t)?;
            codec.roundtrip(&f, seed + t, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let l2: Vec<f64> = reports.iter().map(|r| r.l2_ratio).collect();
    let tl: Vec<Vec<f64>> = (0..params.len())
        .map(|i| reports.iter().map(|r| r.tl_ratio[i]).collect())
        .collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_step_ratio = reports
        .iter()
        .flat_map(|r| r.residual_history.windows(2).map(|w| w[1] / w[0]).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let tl_min: Vec<f64> = tl.iter().map(|v| min(v)).collect();
    let tl_max: Vec<f64> = tl.iter().map(|v| max(v)).collect();
    let (l2_min, l2_max) = (min(&l2), max(&l2));
    let pass = l2_min >= 0.25
        && l2_max <= 4.0
        && tl_min.iter().all(|&v| v >= 0.1)
        && tl_max.iter().all(|&v| v <= 10.0);
    Ok(EquivalenceReport {
        seed,
        trials,
        l2_min,
        l2_max,
        l2_ratios: l2,
        params: params.to_vec(),
        tl_ratios: tl,
        tl_min,
        tl_max,
        iterations: reports.iter().map(|r| r.iterations).collect(),
        not_converged: reports.iter().filter(|r| !r.converged).count(),
        max_step_ratio,
        max_residual: reports.iter().map(|r| r.roundtrip_residual).fold(0.0, f64::max),
        pass,
    })
}

/// Radii `h/2, h, 2h, ...` up to the box diameter.
pub fn radius_menu(grid: &WeightedGrid) -> Vec<f64> {
    let h = grid.spacing();
    let diameter = 2.0 * grid.spec().half_width * (grid.dimension() as f64).sqrt();
    let mut out = vec![0.5 * h];
    let mut r = h;
    while r < 2.0 * diameter {
        out.push(r);
        r *= 2.0;
    }
    out
}

/// `Mf(x) = max_r omega(B(x,r))^{-1} int_{B(x,r)} |f| d omega` over
/// [`radius_menu`], balls clipped to the box.
pub fn maximal_function(f: &GridFunction, grid: &WeightedGrid) -> Result<GridFunction> {
    crate::grid::GridFunction::new(grid, f.values().clone())?;
    let radii = radius_menu(grid);
    let m = grid.masses();
    let n = grid.len();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let mut d2: Vec<(f64, usize)> = (0..n)
                .map(|j| {
                    let y = grid.point(j);
                    (x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(), j)
                })
                .collect();
            d2.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut best = 0.0f64;
            let mut num = 0.0;
            let mut den = 0.0;
            let mut pos = 0;
            for r in &radii {
                let r2 = r * r;
                while pos < n && d2[pos].0 <= r2 {
                    let j = d2[pos].1;
                    num += f.values()[j].abs() * m[j];
                    den += m[j];
                    pos += 1;
                }
                if den > 0.0 {
                    best = best.max(num / den);
                }
            }
            best
        })
        .collect();
    GridFunction::new(grid, nalgebra::DVector::from_vec(values))
}

/// `||Mf||_2 / ||f||_2` over seeded white-noise inputs.
pub fn maximal_battery(grid: &WeightedGrid, trials: usize, seed: u64) -> Result<BatteryReport> {
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(seed, t);
            let v = nalgebra::DVector::from_iterator(
                grid.len(),
                (0..grid.len()).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)),
            );
            let f = GridFunction::new(grid, v)?;
            let mf = maximal_function(&f, grid)?;
            Ok(lp_norm(&mf, 2.0, grid)? / lp_norm(&f, 2.0, grid)?)
        })
        .collect::<Result<_>>()?;
    let mut rep = BatteryReport::new("maximal", None, &TLParams::new(0.0, 2.0, 2.0), seed);
    rep.streams = (0..trials as u64).collect();
    rep.ratios = ratios;
    Ok(rep.finish())
}

/// Result of the splitting check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitCheck {
    pub residual: f64,
    pub r1_norm: f64,
    pub r2_norm: f64,
    pub pass: bool,
}

/// Tolerance of the splitting identity.
pub const SPLIT_TOL: f64 = 1e-10;

pub fn identity_split_check(ops: &FrameOperatorSet) -> SplitCheck {
    let residual = ops.splitting_residual();
    SplitCheck {
        residual,
        r1_norm: ops.r1.operator_norm(),
        r2_norm: ops.r2.operator_norm(),
        pass: residual <= SPLIT_TOL,
    }
}

/// Ratios of quadrature ball volumes to `r^n prod (|<a,x>| + r)^kappa`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub c: f64,
}

fn random_ball(grid: &WeightedGrid, rng: &mut impl Rng, max_radius: f64) -> (Vec<f64>, f64) {
    let l = grid.spec().half_width;
    let h = grid.spacing();
    loop {
        let r = rng.random_range(4.0 * h..max_radius);
        let x: Vec<f64> = (0..grid.dimension()).map(|_| rng.random_range(-l + r..l - r)).collect();
        if x.iter().all(|v| v.abs() + r <= l) {
            return (x, r);
        }
    }
}

pub fn ball_comparability_battery(grid: &WeightedGrid, trials: usize, seed: u64) -> Result<BallReport> {
    let mut rng = seeded_rng(seed, 0);
    let s = grid.structure();
    let l = grid.spec().half_width;
    let mut rep = BallReport {
        centers: vec![],
        radii: vec![],
        ratios: vec![],
        c: 1.0,
    };
    for _ in 0..trials {
        let (x, r) = random_ball(grid, &mut rng, l / 2.0);
        let ratio = ball_volume(&x, r, grid)? / s.ball_volume_model(&x, r);
        rep.c = rep.c.max(ratio).max(1.0 / ratio);
        rep.centers.push(x);
        rep.radii.push(r);
        rep.ratios.push(ratio);
    }
    Ok(rep)
}

/// `omega(B(x, lambda r)) / omega(B(x, r))` against `lambda^n` and `lambda^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub lambdas: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Smallest `C` with `lambda^n / C <= ratio <= C lambda^N` on every trial.
    pub c: f64,
}

pub fn doubling_battery(grid: &WeightedGrid, trials: usize, seed: u64) -> Result<DoublingReport> {
    let mut rng = seeded_rng(seed, 1);
    let s = grid.structure();
    let n = grid.dimension() as f64;
    let big_n = s.homogeneous_dimension();
    let l = grid.spec().half_width;
    let mut rep = DoublingReport {
        lambdas: vec![],
        ratios: vec![],
        c: 1.0,
    };
    for _ in 0..trials {
        let lambda: f64 = rng.random_range(1.0..4.0);
        let (x, r) = loop {
            let (x, r) = random_ball(grid, &mut rng, l / 8.0);
            if x.iter().all(|v| v.abs() + lambda * r <= l) {
                break (x, r);
            }
        };
        let ratio = ball_volume(&x, lambda * r, grid)? / ball_volume(&x, r, grid)?;
        rep.c = rep.c.max(lambda.powf(n) / ratio).max(ratio / lambda.powf(big_n));
        rep.lambdas.push(lambda);
        rep.ratios.push(ratio);
    }
    Ok(rep)
}

/// Measured kernel health on the cached scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelHealth {
    pub k: Vec<i32>,
    /// `1 - min_x int H_t(x, .) d omega` over the inner half-box.
    pub leakage: Vec<f64>,
    /// `max_x |int H_t(x, .) d omega - 1|` over the inner half-box.
    pub mass_defect: Vec<f64>,
    pub heat_symmetry: Vec<f64>,
    /// `min entry / max entry` over interior entries, heat and Poisson.
    pub heat_min_ratio: Vec<f64>,
    pub poisson_min_ratio: Vec<f64>,
}

pub fn kernel_health(family: &SemigroupFamily, grid: &WeightedGrid) -> Result<KernelHealth> {
    let interior = grid.interior_indices(0.5);
    let ks: Vec<i32> = family.scales().collect();
    let min_ratio = |op: &crate::operator::KernelOperator| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &interior {
            for &j in &interior {
                let v = op.entry(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        lo / hi
    };
    let mut rep = KernelHealth {
        k: ks.clone(),
        leakage: vec![],
        mass_defect: vec![],
        heat_symmetry: vec![],
        heat_min_ratio: vec![],
        poisson_min_ratio: vec![],
    };
    for k in ks {
        let h = family.heat(k)?;
        rep.leakage.push(family.boundary_leakage(k, &interior)?);
        rep.mass_defect.push(family.mass_defect(k, &interior)?);
        rep.heat_symmetry.push(h.symmetry_defect());
        rep.heat_min_ratio.push(min_ratio(h));
        rep.poisson_min_ratio.push(min_ratio(family.poisson(k)?));
    }
    Ok(rep)
}

/// Named suites of the `verify` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Orthogonality,
    Duality,
    Lemma51,
    Equivalence,
    Split,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Self::Orthogonality,
        Self::Duality,
        Self::Lemma51,
        Self::Equivalence,
        Self::Split,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "orthogonality" => Self::Orthogonality,
            "duality" => Self::Duality,
            "lemma51" => Self::Lemma51,
            "equivalence" => Self::Equivalence,
            "split" => Self::Split,
            "all" => Self::All,
            other => return Err(Error::InvalidParams(format!("unknown suite `{other}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Orthogonality => "orthogonality",
            Self::Duality => "duality",
            Self::Lemma51 => "lemma51",
            Self::Equivalence => "equivalence",
            Self::Split => "split",
            Self::All => "all",
        }
    }

    /// Trials used when none are requested.
    pub fn default_trials(self) -> usize {
        match self {
            Self::Duality => 50,
            Self::Equivalence => 20,
            _ => 0,
        }
    }
}

/// Index tuples of the norm-equivalence suite.
pub const EQUIVALENCE_PARAMS: &str = "0,2,2;0.5,1.5,1.5;-0.5,3,2;0,0.9,2;0,2,0.9";

/// Scales of the kernel-column suite.
pub const LEMMA_SCALES: [i32; 3] = [0, 1, 2];

/// Number of sampled `y` in the kernel-column suite.
pub const LEMMA_POINTS: usize = 10;

/// Allowed `max/min` over `y` in cases B and D.
pub const LEMMA_SPREAD: f64 = 3.0;

/// Allowed change of a duality constant between resolutions `m/2` and `m`.
pub const STABILITY_FACTOR: f64 = 2.0;

/// Self-describing result of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub config: crate::config::RunConfig,
    pub seed: u64,
    pub trials: Option<usize>,
    pub results: serde_json::Value,
    pub pass: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Serialize)]
struct DualityEntry {
    case: DualityCase,
    fine: BatteryReport,
    coarse: BatteryReport,
    coarse_points: usize,
    stability: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LemmaEntry {
    k: i32,
    case: DualityCase,
    report: BatteryReport,
    spread: f64,
    pass: bool,
}

fn context(cfg: &crate::config::RunConfig) -> Result<FrameContext> {
    FrameContext::new(cfg.grid()?, cfg.window()?, cfg.band_tol)
}

/// Runs one suite (or all of them) for a configuration.
pub fn run_suite(
    suite: Suite,
    cfg: &crate::config::RunConfig,
    trials: Option<usize>,
    seed: u64,
) -> Result<SuiteReport> {
    cfg.validate()?;
    let ctx = context(cfg)?;
    let (results, pass) = run_on(suite, cfg, &ctx, trials, seed)?;
    Ok(SuiteReport {
        suite,
        config: cfg.clone(),
        seed,
        trials,
        results,
        pass,
    })
}

fn run_on(
    suite: Suite,
    cfg: &crate::config::RunConfig,
    ctx: &FrameContext,
    trials: Option<usize>,
    seed: u64,
) -> Result<(serde_json::Value, bool)> {
    let n = trials.unwrap_or(suite.default_trials());
    fn value<T: Serialize>(v: T) -> serde_json::Result<serde_json::Value> {
        serde_json::to_value(v)
    }
    Ok(match suite {
        Suite::All => {
            let mut map = serde_json::Map::new();
            let mut pass = true;
            for s in Suite::EACH {
                let (v, p) = run_on(s, cfg, ctx, trials, seed)?;
                map.insert(s.name().to_string(), v);
                pass &= p;
            }
            (serde_json::Value::Object(map), pass)
        }
        Suite::Orthogonality => {
            let r = almost_orthogonality_decay(ctx.lp(), ctx.grid(), 5)?;
            let pass = r.pass;
            (value(r)?, pass)
        }
        Suite::Split => {
            let r = identity_split_check(&ctx.build_operators()?);
            (value(r)?, r.pass)
        }
        Suite::Equivalence => {
            let codec = Codec::new(ctx, cfg.neumann())?;
            let params = TLParams::parse_list(EQUIVALENCE_PARAMS)?;
            let r = norm_equivalence_battery(&codec, &params, n, seed)?;
            let pass = r.pass;
            (value(r)?, pass)
        }
        Suite::Duality => {
            let mut coarse_cfg = cfg.clone();
            let spec = cfg.grid_spec()?;
            coarse_cfg.points = Some(spec.points_per_axis / 2);
            let coarse = context(&coarse_cfg)?;
            let mut entries = Vec::new();
            for case in DualityCase::ALL {
                let params = case.representative();
                let fine = duality_battery(ctx, case, &params, n, seed)?;
                let c = duality_battery(&coarse, case, &params, n, seed)?;
                let stability = stability_factor(fine.c_hat, c.c_hat);
                let pass = fine.all_finite && c.all_finite && stability <= STABILITY_FACTOR;
                entries.push(DualityEntry {
                    case,
                    fine,
                    coarse: c,
                    coarse_points: spec.points_per_axis / 2,
                    stability,
                    pass,
                });
            }
            let pass = entries.iter().all(|e| e.pass);
            (value(entries)?, pass)
        }
        Suite::Lemma51 => {
            let ys = sample_points(ctx.grid(), LEMMA_POINTS);
            let mut entries = Vec::new();
            for k in LEMMA_SCALES {
                for case in DualityCase::ALL {
                    let report = lemma51_battery(ctx.lp(), k, case, &case.representative(), &ys)?;
                    let spread = report.spread();
                    let mut pass = report.all_finite;
                    if matches!(case, DualityCase::B | DualityCase::D) {
                        pass &= spread <= LEMMA_SPREAD;
                    }
                    entries.push(LemmaEntry {
                        k,
                        case,
                        report,
                        spread,
                        pass,
                    });
                }
            }
            let pass = entries.iter().all(|e| e.pass);
            (value(entries)?, pass)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.7 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.7).abs() < 1e-14);
        assert!((f.intercept - 1.5).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0], &[2.0]).is_none());
    }

    #[test]
    fn stability_factor_is_symmetric() {
        assert_eq!(stability_factor(2.0, 1.0), 2.0);
        assert_eq!(stability_factor(1.0, 2.0), 2.0);
        assert!(stability_factor(0.0, 1.0).is_infinite());
    }

    #[test]
    fn case_ranges() {
        for case in DualityCase::ALL {
            case.check(&case.representative(), 2.0).unwrap();
        }
        assert!(DualityCase::A.check(&TLParams::new(0.0, 0.9, 2.0), 2.0).is_err());
    }
}
