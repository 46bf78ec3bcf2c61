//! One- and two-dimensional quadrature: composite Simpson and trapezoid on
//! uniform samples, and adaptive Gauss–Kronrod (7/15) for integrands given
//! as closures.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("composite Simpson needs an odd number of samples (at least 3), got {0}")]
    SimpsonSampleCount(usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    NotConverged { tol: f64, estimate: f64 },
    #[error("integrand is not finite")]
    NonFinite,
}

/// Composite Simpson rule over uniformly spaced samples.
pub fn simpson(values: &[f64], h: f64) -> Result<f64, QuadratureError> {
    let n = values.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(QuadratureError::SimpsonSampleCount(n));
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even))
}

pub fn trapezoid(values: &[f64], h: f64) -> Result<f64, QuadratureError> {
    let n = values.len();
    if n < 2 {
        return Err(QuadratureError::TooFewSamples(n));
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    Ok(h * (0.5 * (values[0] + values[n - 1]) + inner))
}

/// Simpson weights when the count allows it, trapezoid otherwise.
pub fn uniform_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 3 && n % 2 == 1 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == 0 || i == n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    } else if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Tensor-product rule over a row-major `(ny, nx)` grid of samples.
pub fn tensor_2d(values: &[f64], nx: usize, ny: usize, hx: f64, hy: f64) -> f64 {
    let wx = uniform_weights(nx, hx);
    let wy = uniform_weights(ny, hy);
    let mut total = 0.0;
    for (j, row) in values.chunks(nx).take(ny).enumerate() {
        let line: f64 = row.iter().zip(&wx).map(|(v, w)| v * w).sum();
        total += wy[j] * line;
    }
    total
}

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
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn kronrod_15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn gauss_kronrod(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return gauss_kronrod(f, b, a, abs_tol).map(|v| -v);
    }
    const MAX_DEPTH: u32 = 48;
    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (value, err) = kronrod_15(&mut f, lo, hi);
        if !value.is_finite() {
            return Err(QuadratureError::NonFinite);
        }
        let floor = 50.0 * f64::EPSILON * value.abs();
        if err <= tol.max(floor) {
            total += value;
        } else if depth >= MAX_DEPTH {
            worst = worst.max(err);
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    if worst > abs_tol {
        return Err(QuadratureError::NotConverged { tol: abs_tol, estimate: worst });
    }
    Ok(total)
}
