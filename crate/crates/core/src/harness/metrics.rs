//! Trace and wavefield measures used by the harness.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{Axis, SpectralGrid, Stagger};
use crate::state::WaveState;

/// `‖a − b‖₂ / ‖a‖₂` over `window` (clipped to the trace length).
///
/// Zero when both traces vanish there, infinite when only `a` does.
pub fn relative_l2(a: &[f64], b: &[f64], window: Range<usize>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let w = window.start.min(a.len())..window.end.min(a.len());
    let (mut num, mut den) = (0.0, 0.0);
    for k in w {
        num += (a[k] - b[k]).powi(2);
        den += a[k] * a[k];
    }
    Ok(match (num == 0.0, den == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        _ => (num / den).sqrt(),
    })
}

/// Root-mean-square of `x` over a centred window of `2 half + 1` samples.
pub fn rms_envelope(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (k, v) in x.iter().enumerate() {
        prefix[k + 1] = prefix[k] + v * v;
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0).sqrt()
        })
        .collect()
}

/// Local maxima of `env` whose topographic prominence is at least
/// `min_prominence` times the global maximum, in time order.
pub fn prominent_peaks(env: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = env.len();
    let top = env.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut k = 1;
    while k + 1 < n {
        if env[k] > env[k - 1] {
            // skip plateaus
            let mut e = k;
            while e + 1 < n && env[e + 1] == env[k] {
                e += 1;
            }
            if e + 1 < n && env[e + 1] < env[k] {
                let h = env[k];
                let mut left = h;
                for &v in env[..k].iter().rev() {
                    if v > h {
                        break;
                    }
                    left = left.min(v);
                }
                let mut right = h;
                for &v in &env[e + 1..] {
                    if v > h {
                        break;
                    }
                    right = right.min(v);
                }
                if h - left.max(right) >= min_prominence * top {
                    peaks.push(k);
                }
            }
            k = e + 1;
        } else {
            k += 1;
        }
    }
    peaks
}

/// Arrivals in a trace window: prominent maxima of its RMS envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalPicks {
    /// Pick times on the shifted axis `τ = t − shift`.
    pub times: Vec<f64>,
    /// Envelope over the window only.
    pub envelope: Vec<f64>,
}

/// Picks arrivals on the moveout-corrected axis `τ = t − shift`, where
/// sample `k` sits at `t = (k + 1) dt`.
///
/// `shift` is normally `t0 + r / v_max`: no compressional energy can peak
/// much before `τ = 0`. The envelope averages over one period `1/f0` and
/// only maxima strictly inside `window` count; prominence is relative to
/// the window's largest envelope value.
pub fn pick_arrivals(
    trace: &[f64],
    dt: f64,
    f0: f64,
    shift: f64,
    window: [f64; 2],
    min_prominence: f64,
) -> ArrivalPicks {
    let tau = |k: usize| (k + 1) as f64 * dt - shift;
    let half = ((0.5 / f0) / dt).round().max(1.0) as usize;
    let full = rms_envelope(trace, half);
    let lo = (0..trace.len()).take_while(|&k| tau(k) < window[0]).count();
    let hi = (0..trace.len()).take_while(|&k| tau(k) <= window[1]).count().max(lo);
    let envelope = full[lo..hi].to_vec();
    let times = prominent_peaks(&envelope, min_prominence)
        .into_iter()
        .map(|k| tau(lo + k))
        .collect();
    ArrivalPicks { times, envelope }
}

/// Rotational energy `Σ (∂x vz − ∂z vx)² ΔxΔz` of the solid velocity,
/// evaluated on the corner lattice.
pub fn rotational_energy(state: &WaveState, grid: &SpectralGrid) -> Result<f64> {
    let dxvz = grid.derivative(&state.vz, Axis::X, Stagger::Forward)?;
    let dzvx = grid.derivative(&state.vx, Axis::Z, Stagger::Forward)?;
    let s: f64 = dxvz
        .values
        .iter()
        .zip(&dzvx.values)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(s * grid.cell_area())
}
