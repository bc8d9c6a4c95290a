use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{NumericsError, Result};

/// Forward DFT, `X[k] = Σₙ x[n] e^{-2πikn/N}` (unnormalized).
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    transform(x, false)
}

/// Inverse DFT, normalized by `1/N` so that `idft(dft(x)) == x`.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = transform(x, true)?;
    let scale = 1.0 / out.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Forward DFT of a real sequence.
pub fn real_dft(x: &[f64]) -> Result<Vec<Complex64>> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft(&buf)
}

fn transform(x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(NumericsError::Empty);
    }
    if !x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(x.len()) } else { planner.plan_fft_forward(x.len()) };
    let mut buf = x.to_vec();
    fft.process(&mut buf);
    Ok(buf)
}
