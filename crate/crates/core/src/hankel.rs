//! Rank-one heat kernel by the even/odd Hankel split of the one-dimensional
//! Dunkl transform. Independent of the grid, used as an oracle.
//!
//! With respect to `d omega = 2^kappa |x|^{2 kappa} dx` the kernel is
//!
//! `H_t(x, y) = 2^{-kappa} / 2 [p_{kappa-1/2}(|x|, |y|) + x y p_{kappa+1/2}(|x|, |y|)]`
//!
//! where `p_nu(r, s) = int_0^inf e^{-t xi^2} Jt_nu(r xi) Jt_nu(s xi) xi^{2 nu + 1} d xi`
//! and `Jt_nu(z) = z^{-nu} J_nu(z)`.

use puruspe::{gamma, Inu_Knu, Jnu_Ynu};

use crate::error::{Error, Result};
use crate::group::DunklStructure;
use crate::quadrature::composite_gauss_legendre;

const PANEL_ORDER: usize = 20;

/// `z^{-nu} J_nu(z)`, for `nu > -1` and `z >= 0`.
pub fn reduced_bessel_j(nu: f64, z: f64) -> f64 {
    assert!(nu > -1.0, "order {nu} out of range");
    let z = z.abs();
    if z < 2.0 {
        // power series; converges fast for small arguments
        let q = -0.25 * z * z;
        let mut term = 1.0 / (2f64.powf(nu) * gamma(nu + 1.0));
        let mut sum = term;
        for m in 1..60 {
            let m = m as f64;
            term *= q / (m * (m + nu));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    bessel_j(nu, z) * z.powf(-nu)
}

/// `J_nu(z)` for `z > 0`, extended below order zero by the three-term
/// recurrence, which is stable in the downward direction.
fn bessel_j(nu: f64, z: f64) -> f64 {
    if nu >= 0.0 {
        return Jnu_Ynu(nu, z).0;
    }
    let j1 = Jnu_Ynu(nu + 1.0, z).0;
    let j2 = Jnu_Ynu(nu + 2.0, z).0;
    2.0 * (nu + 1.0) / z * j1 - j2
}

/// `I_nu(z)` for `z > 0` and `nu > -1`.
fn bessel_i(nu: f64, z: f64) -> f64 {
    if nu >= 0.0 {
        return Inu_Knu(nu, z).0;
    }
    let i1 = Inu_Knu(nu + 1.0, z).0;
    let i2 = Inu_Knu(nu + 2.0, z).0;
    i2 + 2.0 * (nu + 1.0) / z * i1
}

/// `p_nu(r, s)` by composite Gauss-Legendre quadrature in `xi`, truncated
/// where `e^{-t xi^2} < e^{-40}`.
pub fn hankel_integral(nu: f64, t: f64, r: f64, s: f64) -> f64 {
    let xi_max = (40.0 / t).sqrt();
    // roughly one panel per half oscillation of the faster Bessel factor
    let panels = (xi_max * (r + s + 1.0) / 2.0).ceil() as usize + 16;
    let width = xi_max / panels as f64;
    // xi^{2 nu + 1} is not smooth at 0 for fractional nu: grade the first panel
    let mut rule = Vec::new();
    let mut hi = width;
    for _ in 0..40 {
        rule.extend(composite_gauss_legendre(0.5 * hi, hi, 1, PANEL_ORDER));
        hi *= 0.5;
    }
    rule.extend(composite_gauss_legendre(width, xi_max, panels - 1, PANEL_ORDER));
    rule.into_iter()
        .map(|(xi, w)| {
            w * (-t * xi * xi).exp()
                * reduced_bessel_j(nu, r * xi)
                * reduced_bessel_j(nu, s * xi)
                * xi.powf(2.0 * nu + 1.0)
        })
        .sum()
}

/// Closed form of `p_nu`: `(2t)^{-1} (rs)^{-nu} e^{-(r^2+s^2)/4t} I_nu(rs/2t)`.
pub fn hankel_integral_closed(nu: f64, t: f64, r: f64, s: f64) -> f64 {
    let z = r * s / (2.0 * t);
    let gauss = (-(r * r + s * s) / (4.0 * t)).exp();
    if z < 1e-8 {
        // I_nu(z) (rs)^{-nu} -> (4t)^{-nu} / Gamma(nu + 1)
        return gauss / (2.0 * t) * (4.0 * t).powf(-nu) / gamma(nu + 1.0);
    }
    gauss / (2.0 * t) * (r * s).powf(-nu) * bessel_i(nu, z)
}

/// Heat kernel of the rank-one Dunkl Laplacian with multiplicity `kappa` on
/// each of the two roots, by numerical Hankel quadrature.
pub fn rank_one_heat_kernel(t: f64, x: f64, y: f64, kappa: f64) -> Result<f64> {
    check(t, kappa)?;
    Ok(combine(t, x, y, kappa, hankel_integral))
}

/// Same kernel through the modified Bessel closed form.
pub fn closed_form_heat_kernel(t: f64, x: f64, y: f64, kappa: f64) -> Result<f64> {
    check(t, kappa)?;
    Ok(combine(t, x, y, kappa, hankel_integral_closed))
}

fn combine(t: f64, x: f64, y: f64, kappa: f64, p: fn(f64, f64, f64, f64) -> f64) -> f64 {
    let (r, s) = (x.abs(), y.abs());
    let even = p(kappa - 0.5, t, r, s);
    let odd = p(kappa + 0.5, t, r, s);
    2f64.powf(-kappa) * 0.5 * (even + x * y * odd)
}

fn check(t: f64, kappa: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("time must be positive, got {t}")));
    }
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParams(format!("multiplicity must be nonnegative, got {kappa}")));
    }
    Ok(())
}

/// Hankel reference for a structure, which must be `Z2` on the line.
pub fn hankel_reference(t: f64, x: f64, y: f64, s: &DunklStructure) -> Result<f64> {
    let roots = s.roots();
    if s.dimension() != 1 {
        return Err(Error::Unsupported(format!(
            "Hankel reference needs rank one, got dimension {}",
            s.dimension()
        )));
    }
    let kappa = match roots.kappa() {
        [] => 0.0,
        [a, b] if a == b => *a,
        _ => {
            return Err(Error::Unsupported(
                "Hankel reference needs the Z2 root system".into(),
            ))
        }
    };
    rank_one_heat_kernel(t, x, y, kappa)
}
