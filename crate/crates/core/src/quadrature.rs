//! Adaptive Gauss–Kronrod (7/15) integration.

use alloc::vec::Vec;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Largest number of panels before giving up.
pub const MAX_PANELS: usize = 4096;

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        rk += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            rg += WG[i / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: rk * half,
        error: ((rk - rg) * half).abs(),
    }
}

/// ∫_a^b f to absolute accuracy `abs_tol`, splitting the worst panel until
/// the summed error estimate is small enough.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(16);
    panels.push(kronrod(&mut f, a, b));
    loop {
        let (value, error) = panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        // Accept once error is within tolerance or at the resolution of f64.
        if error <= abs_tol || error <= 50.0 * f64::EPSILON * value.abs() {
            return Ok(value);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureDiverged {
                tolerance: abs_tol,
                error,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::QuadratureDiverged {
                tolerance: abs_tol,
                error,
            });
        }
        panels.push(kronrod(&mut f, p.a, mid));
        panels.push(kronrod(&mut f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::{exp, sin, sqrt};

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_functions() {
        let v = integrate(exp, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (exp(1.0) - 1.0)).abs() < 1e-12);
        let v = integrate(sin, 0.0, core::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_needs_subdivision() {
        let v = integrate(sqrt, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn sharp_peak() {
        let v = integrate(|x| exp(-1e4 * (x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-12).unwrap();
        let expect = sqrt(core::f64::consts::PI / 1e4);
        assert!((v - expect).abs() < 1e-12);
    }
}
