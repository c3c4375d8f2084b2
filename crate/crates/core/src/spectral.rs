//! Fourier calculus on uniformly sampled periodic functions.
//!
//! Samples live at `θ_k = 2πk/N`. Coefficients follow the unnormalized FFT
//! convention; index `j` carries wavenumber `j` for `j < N/2`, `j - N` above,
//! and `j = N/2` is the Nyquist mode, treated as `cos(Nθ/2)`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed wavenumber of coefficient index `j` on an `n`-point grid.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

/// Inverse transform, normalized, keeping the real part.
pub fn inverse(mut coeffs: Vec<Complex64>) -> Vec<f64> {
    let n = coeffs.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut coeffs));
    let scale = 1.0 / n as f64;
    coeffs.into_iter().map(|c| c.re * scale).collect()
}

/// Multiplies each Fourier mode by `symbol(k, is_nyquist)`.
pub fn apply_symbol<F>(values: &[f64], symbol: F) -> Vec<f64>
where
    F: Fn(i64, bool) -> Complex64,
{
    let n = values.len();
    let mut c = forward(values);
    for (j, cj) in c.iter_mut().enumerate() {
        let nyquist = n.is_multiple_of(2) && j == n / 2;
        *cj *= symbol(wavenumber(j, n), nyquist);
    }
    inverse(c)
}

/// Modes below this fraction of the largest one are FFT roundoff. They are
/// dropped before differentiating so that `k^order` does not amplify them.
pub const ROUNDOFF_CHOP: f64 = 8.0 * f64::EPSILON;

/// Spectral derivative of order 1 or 2 (any order is accepted; odd orders
/// drop the Nyquist mode).
pub fn derivative(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let mut c = forward(values);
    let floor = ROUNDOFF_CHOP * c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (j, cj) in c.iter_mut().enumerate() {
        let nyquist = n.is_multiple_of(2) && j == n / 2;
        if cj.norm() <= floor || (nyquist && order % 2 == 1) {
            *cj = Complex64::new(0.0, 0.0);
        } else {
            *cj *= Complex64::new(0.0, wavenumber(j, n) as f64).powu(order);
        }
    }
    inverse(c)
}

/// Band-limited interpolant evaluated at the shifted nodes `θ_k + phase`.
pub fn shift(values: &[f64], phase: f64) -> Vec<f64> {
    apply_symbol(values, |k, nyquist| {
        let a = k as f64 * phase;
        if nyquist {
            Complex64::new(a.cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, a)
        }
    })
}

/// Trapezoid mean `⨍ f dθ` on the uniform grid.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// The node parameters `θ_k = 2πk/N`.
pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        nodes(n).into_iter().map(f).collect()
    }

    #[test]
    fn derivatives_of_trigonometric_polynomials() {
        let n = 64;
        let f = sample(n, |t| (3.0 * t).sin() + 0.5 * (7.0 * t).cos() + 2.0);
        let d1 = derivative(&f, 1);
        let d2 = derivative(&f, 2);
        for (k, t) in nodes(n).into_iter().enumerate() {
            let e1 = 3.0 * (3.0 * t).cos() - 3.5 * (7.0 * t).sin();
            let e2 = -9.0 * (3.0 * t).sin() - 24.5 * (7.0 * t).cos();
            assert!((d1[k] - e1).abs() < 1e-12);
            assert!((d2[k] - e2).abs() < 1e-11);
        }
    }

    #[test]
    fn second_derivative_error_does_not_grow_with_n() {
        for n in [64, 256, 1024] {
            let f = sample(n, |t| (3.0 * t).cos());
            let d2 = derivative(&f, 2);
            let err = d2.iter().zip(&f).map(|(a, b)| (a + 9.0 * b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-13, "n={n}: {err:e}");
        }
    }

    #[test]
    fn nyquist_mode_conventions() {
        let n = 32;
        let f = sample(n, |t| (16.0 * t).cos());
        assert!(derivative(&f, 1).iter().all(|v| v.abs() < 1e-12));
        let d2 = derivative(&f, 2);
        for (a, b) in d2.iter().zip(&f) {
            assert!((a + 256.0 * b).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_is_exact_for_band_limited_signals() {
        let n = 32;
        let f = sample(n, |t| (2.0 * t).cos() + (5.0 * t).sin());
        let phase = 0.3719;
        let g = shift(&f, phase);
        for (k, t) in nodes(n).into_iter().enumerate() {
            let e = (2.0 * (t + phase)).cos() + (5.0 * (t + phase)).sin();
            assert!((g[k] - e).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_is_spectrally_accurate() {
        let f = sample(40, |t| (t.cos()).exp());
        // ⨍ e^{cos θ} = I₀(1)
        assert!((mean(&f) - 1.266_065_877_752_008_4).abs() < 1e-14);
    }
}
