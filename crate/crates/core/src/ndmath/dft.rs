use crate::error::{invalid, Result};

/// Magnitudes of the unnormalized DFT for bins `0..=N/2`, by direct summation.
///
/// `X_k = Σ_t x[t]·exp(-2πi·k·t/N)`. Accumulation is in `f64`; trace lengths here
/// stay small enough that the O(N²) sum is cheap.
pub fn dft_magnitude(signal: &[f32]) -> Result<Vec<f32>> {
    let n = signal.len();
    if n < 2 {
        return Err(invalid("dft_magnitude: signal needs at least 2 samples"));
    }
    let step = -2.0 * std::f64::consts::PI / n as f64;
    Ok((0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, &x) in signal.iter().enumerate() {
                // reduce k·t mod N first so the angle stays small and exact
                let angle = step * ((k * t) % n) as f64;
                re += x as f64 * angle.cos();
                im += x as f64 * angle.sin();
            }
            re.hypot(im) as f32
        })
        .collect())
}
