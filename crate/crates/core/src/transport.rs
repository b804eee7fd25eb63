//! Observables of the self-consistent device: directional transmittance,
//! rectification figures of merit and the intracavity standing wave.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solver::{self, DeviceConfig, SolverSettings, SteadyStateSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ltr" | "left-to-right" | "lefttoright" | "12" => Ok(Direction::LeftToRight),
            "rtl" | "right-to-left" | "righttoleft" | "21" => Ok(Direction::RightToLeft),
            _ => Err(Error::invalid("direction", format!("expected ltr or rtl, got `{s}`"))),
        }
    }
}

/// The device as seen from the given side. Right-to-left is left-to-right on
/// the emitter-swapped device.
pub fn oriented(dev: &DeviceConfig, dir: Direction) -> DeviceConfig {
    match dir {
        Direction::LeftToRight => *dev,
        Direction::RightToLeft => dev.swapped(),
    }
}

pub fn transmit(
    p_inc: f64,
    dev: &DeviceConfig,
    dir: Direction,
    s: &SolverSettings,
) -> Result<(f64, SteadyStateSolution)> {
    let sol = solver::solve(p_inc, &oriented(dev, dir), s)?;
    Ok((sol.transmittance, sol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectificationResult {
    pub t12: f64,
    pub t21: f64,
    /// `|T12 − T21| / (T12 + T21)`, or 0 when both vanish.
    pub r_factor: f64,
    /// `T12 · r_factor`.
    pub l_factor: f64,
    pub both_converged: bool,
    pub forward: SteadyStateSolution,
    pub backward: SteadyStateSolution,
}

pub fn rectification_factors(t12: f64, t21: f64) -> (f64, f64) {
    let sum = t12 + t21;
    let r = if sum > 0.0 { (t12 - t21).abs() / sum } else { 0.0 };
    (r, t12 * r)
}

pub fn rectify(p_inc: f64, dev: &DeviceConfig, s: &SolverSettings) -> Result<RectificationResult> {
    let (t12, forward) = transmit(p_inc, dev, Direction::LeftToRight, s)?;
    let (t21, backward) = transmit(p_inc, dev, Direction::RightToLeft, s)?;
    let (r_factor, l_factor) = rectification_factors(t12, t21);
    Ok(RectificationResult {
        t12,
        t21,
        r_factor,
        l_factor,
        both_converged: forward.converged && backward.converged,
        forward,
        backward,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    /// Sample positions in wavelengths, uniform on `[0, L]` with both ends.
    pub positions: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Closed-form spatial average.
    pub average: f64,
    /// Composite Simpson average of the samples.
    pub average_quadrature: f64,
    pub solution: SteadyStateSolution,
}

/// `(1/L)∫₀ᴸ e^{2ik(z − L)} dz = (1 − e^{−ix}) / (ix)` with `x = 2kL`.
fn mean_cross_phase(length: f64) -> Complex64 {
    let x = 2.0 * TAU * length;
    if x.abs() < 1e-4 {
        let i = Complex64::i();
        // 1 − ix/2 − x²/6 + ix³/24
        return 1.0 - i * x / 2.0 - x * x / 6.0 + i * x * x * x / 24.0;
    }
    let i = Complex64::i();
    (1.0 - (-i * x).exp()) / (i * x)
}

/// Closed-form spatial average of `|a·e^{ik(z−L)} + b·e^{−ik(z−L)}|²` over
/// `[0, L]`.
pub fn closed_form_average(forward: Complex64, backward: Complex64, length: f64) -> f64 {
    forward.norm_sqr() + backward.norm_sqr() + 2.0 * (forward * backward.conj() * mean_cross_phase(length)).re
}

/// Composite Simpson rule on uniform samples; a 3/8 panel closes an odd
/// number of intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let simpson_end = if intervals.is_multiple_of(2) { n - 1 } else { n - 4 };
            let mut sum = 0.0;
            for k in (0..simpson_end).step_by(2) {
                sum += values[k] + 4.0 * values[k + 1] + values[k + 2];
            }
            let mut total = h / 3.0 * sum;
            if simpson_end != n - 1 {
                let v = &values[n - 4..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

pub fn intracavity_profile(
    p_inc: f64,
    dev: &DeviceConfig,
    n_samples: usize,
    s: &SolverSettings,
) -> Result<IntensityProfile> {
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", format!("need at least 2, got {n_samples}")));
    }
    let sol = solver::solve(p_inc, dev, s)?;
    profile_from_solution(&sol, dev, n_samples)
}

pub fn profile_from_solution(
    sol: &SteadyStateSolution,
    dev: &DeviceConfig,
    n_samples: usize,
) -> Result<IntensityProfile> {
    let length = dev.geometry.length_wavelengths;
    let wave = sol.standing_wave(&dev.geometry)?;
    let positions: Vec<f64> = (0..n_samples)
        .map(|i| length * i as f64 / (n_samples - 1) as f64)
        .collect();
    let intensities: Vec<f64> = positions.iter().map(|&z| wave.intensity(z)).collect();
    let average = closed_form_average(wave.forward_coeff, wave.backward_coeff, length);
    let average_quadrature = if length > 0.0 {
        simpson(&intensities, length / (n_samples - 1) as f64) / length
    } else {
        intensities[0]
    };
    Ok(IntensityProfile {
        positions,
        intensities,
        average,
        average_quadrature,
        solution: *sol,
    })
}

/// Spatially averaged intracavity intensity for each incident power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub p_inc: f64,
    pub average: f64,
    pub converged: bool,
}

pub fn average_intracavity_scaling(
    dev: &DeviceConfig,
    p_inc_list: &[f64],
    s: &SolverSettings,
) -> Result<Vec<ScalingPoint>> {
    p_inc_list
        .iter()
        .map(|&p| {
            let sol = solver::solve(p, dev, s)?;
            let wave = sol.standing_wave(&dev.geometry)?;
            Ok(ScalingPoint {
                p_inc: p,
                average: closed_form_average(wave.forward_coeff, wave.backward_coeff, dev.geometry.length_wavelengths),
                converged: sol.converged,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(average)` against `ln(p_inc)`.
pub fn log_log_slope(points: &[ScalingPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.p_inc.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.average.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev(dw1: f64, dw2: f64, l: f64) -> DeviceConfig {
        DeviceConfig::with_detunings(dw1, dw2, l).unwrap()
    }

    #[test]
    fn identical_emitters_are_reciprocal() {
        let s = SolverSettings::default();
        let r = rectify(0.05, &dev(0.3, 0.3, 0.7), &s).unwrap();
        assert_eq!(r.t12, r.t21);
        assert!(r.r_factor <= 1e-10);
    }

    #[test]
    fn transparent_transmission() {
        let s = SolverSettings::default();
        for dir in [Direction::LeftToRight, Direction::RightToLeft] {
            let (t, _) = transmit(0.2, &dev(1e6, -1e6, 0.4), dir, &s).unwrap();
            assert!((t - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_profile_without_second_mirror() {
        let s = SolverSettings::default();
        let p = intracavity_profile(0.2, &dev(0.3, 1e9, 0.8), 101, &s).unwrap();
        let max = p.intensities.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.intensities.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min <= 1e-8 * max);
    }

    #[test]
    fn zero_length_profile() {
        let s = SolverSettings::default();
        let p = intracavity_profile(0.2, &dev(0.3, 0.1, 0.0), 5, &s).unwrap();
        assert!((p.average - p.intensities[0]).abs() <= 1e-12 * p.average);
        assert_eq!(p.average_quadrature, p.intensities[0]);
    }

    #[test]
    fn small_length_series_matches_exact() {
        let a = Complex64::new(0.3, -0.2);
        let b = Complex64::new(-0.1, 0.25);
        let l = 1e-5 / (2.0 * TAU);
        let l2 = 1.0001e-4 / (2.0 * TAU);
        // Continuity across the series switch.
        let below = closed_form_average(a, b, l * 9.999);
        let above = closed_form_average(a, b, l2);
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn simpson_rules() {
        // Exact for cubics with either parity of interval count (n = 2 is the trapezoid).
        for n in [3usize, 4, 5, 6, 11, 12] {
            let h = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| {
                let x = i as f64 * h;
                x * x * x - x + 1.0
            }).collect();
            let exact = 4.0 - 2.0 + 2.0;
            assert!((simpson(&v, h) - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("ltr".parse::<Direction>().unwrap(), Direction::LeftToRight);
        assert_eq!("RTL".parse::<Direction>().unwrap(), Direction::RightToLeft);
        assert!("up".parse::<Direction>().is_err());
    }

    #[test]
    fn profile_needs_two_samples() {
        assert!(intracavity_profile(0.1, &dev(0.0, 0.0, 1.0), 1, &SolverSettings::default()).is_err());
    }

    #[test]
    fn zero_power_scaling_point() {
        let pts = average_intracavity_scaling(&dev(0.0, 0.0, 1.0), &[0.0], &SolverSettings::default()).unwrap();
        assert_eq!(pts[0].average, 0.0);
    }
}
