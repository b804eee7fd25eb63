//! Built-in self-checks run by the `validate` subcommand: analytic limits,
//! independent routes to the same quantity, and a few frozen reference values.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cavity::{self, CavityGeometry, MirrorPair};
use crate::emitter::{self, EmitterParams};
use crate::solver::{self, DeviceConfig, SolverSettings};
use crate::transport;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: format!("error: {e}"),
    }
}

macro_rules! attempt {
    ($name:expr, $body:expr) => {
        match (|| -> crate::Result<Check> { $body })() {
            Ok(c) => c,
            Err(e) => failed($name, e),
        }
    };
}

fn reflectance_examples() -> Check {
    attempt!("reflectance and phase examples", {
        let cases = [
            (emitter::reflectance(0.0, &EmitterParams::new(1.0, 0.0)?)?, 1.0),
            (emitter::reflectance(0.25, &EmitterParams::new(1.0, 0.0)?)?, 0.5),
            (emitter::reflectance(0.0, &EmitterParams::new(1.0, 0.5)?)?, 0.5),
            (emitter::reflectance_from_bloch(1.0, &EmitterParams::new(1.0, 1.0)?)?, 1.0 / 9.0),
            (emitter::phase_shift(&EmitterParams::new(1.0, 0.0)?)?, -PI),
            (emitter::phase_shift(&EmitterParams::new(1.0, 0.5)?)?, -0.75 * PI),
        ];
        let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(check("reflectance and phase examples", worst, 1e-12))
    })
}

fn bloch_route() -> Check {
    attempt!("Bloch-route reflectance", {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let em = EmitterParams::new(rng.gen_range(0.1..10.0), rng.gen_range(-10.0..10.0))?;
            let p = 100.0 * (1.0 - rng.gen::<f64>());
            let a = emitter::reflectance(p, &em)?;
            let b = emitter::reflectance_from_bloch(p, &em)?;
            worst = worst.max(((a - b) / a).abs());
        }
        Ok(check("Bloch-route reflectance", worst, 1e-12))
    })
}

fn single_mirror_limit() -> Check {
    attempt!("single-mirror limit", {
        let mut worst: f64 = 0.0;
        for i in 0..50 {
            let r1 = 0.019 * i as f64;
            let t = cavity::transmittance_formula(r1, 0.0, -2.0 + 0.01 * i as f64, 0.37 * i as f64)?;
            worst = worst.max((t - (1.0 - r1)).abs());
        }
        Ok(check("single-mirror limit", worst, 1e-12))
    })
}

fn transparent_limit() -> Check {
    attempt!("transparent emitters", {
        let s = SolverSettings::default();
        let mut worst: f64 = 0.0;
        for &(l, p) in &[(0.0, 0.01), (0.3, 1.0), (0.77, 10.0)] {
            let dev = DeviceConfig::with_detunings(1e6, -1e6, l)?;
            let r = transport::rectify(p, &dev, &s)?;
            worst = worst.max((r.t12 - 1.0).abs()).max((r.t21 - 1.0).abs());
        }
        Ok(check("transparent emitters", worst, 1e-6))
    })
}

fn series_oracle() -> Check {
    attempt!("round-trip series vs closed form", {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst_excess: f64 = 0.0;
        for _ in 0..200 {
            let (r1, r2) = (rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.9));
            let (th1, th2) = (rng.gen_range(-1.5 * PI..-0.5 * PI), rng.gen_range(-1.5 * PI..-0.5 * PI));
            let l: f64 = rng.gen_range(0.0..2.0);
            let mp = MirrorPair::from_reflectances(r1, r2, th1, th2)?;
            let closed = cavity::output_amplitude(1.0, &mp, &CavityGeometry::new(l)?, l)?;
            let ratio = (r1 * r2).sqrt();
            let step = Complex64::from_polar(ratio, 4.0 * PI * l + th1 + th2);
            let mut term = Complex64::new(((1.0 - r1) * (1.0 - r2)).sqrt(), 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for _ in 0..64 {
                sum += term;
                term *= step;
            }
            let bound = ratio.powi(64) / (1.0 - ratio);
            worst_excess = worst_excess.max((closed - sum).norm() - bound);
        }
        Ok(check("round-trip series vs closed form", worst_excess.max(0.0), 1e-13))
    })
}

fn residual_certificate() -> Check {
    attempt!("solver residual certificate", {
        let s = SolverSettings::default();
        let mut worst: f64 = 0.0;
        let mut all_converged = true;
        for &(p, dw1, dw2, l) in &[(0.1, 0.0, 0.0, 1.0), (0.001, 0.6, 0.0, 0.45), (1.0, -0.3, 0.2, 0.3), (0.1, 0.0, 0.0, 0.5)] {
            let dev = DeviceConfig::with_detunings(dw1, dw2, l)?;
            let sol = solver::solve(p, &dev, &s)?;
            all_converged &= sol.converged;
            let res = solver::residual(sol.p1, sol.p2, p, &dev)?;
            let tol = (s.rel_tol * sol.p1.max(sol.p2)).max(s.abs_tol);
            worst = worst.max(res / tol);
        }
        let mut c = check("solver residual certificate", worst, 1.0);
        c.passed &= all_converged;
        Ok(c)
    })
}

fn reference_fixed_point() -> Check {
    attempt!("reference fixed point", {
        // Resonant pair, L = 1, p_inc = 0.1, from an independent root solve.
        let dev = DeviceConfig::with_detunings(0.0, 0.0, 1.0)?;
        let sol = solver::solve(0.1, &dev, &SolverSettings::default())?;
        let worst = ((sol.p1 - 0.004304331818550511) / 0.004304331818550511)
            .abs()
            .max(((sol.p2 - 0.08388636398466394) / 0.08388636398466394).abs());
        Ok(check("reference fixed point", worst, 1e-6))
    })
}

fn reciprocity() -> Check {
    attempt!("reciprocity of identical emitters", {
        let s = SolverSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let dw = rng.gen_range(-3.0..3.0);
            let dev = DeviceConfig::with_detunings(dw, dw, rng.gen_range(0.0..1.0))?;
            let r = transport::rectify(10f64.powf(rng.gen_range(-3.0..1.0)), &dev, &s)?;
            worst = worst.max(r.r_factor);
        }
        Ok(check("reciprocity of identical emitters", worst, 1e-10))
    })
}

fn profile_average() -> Check {
    attempt!("profile average: quadrature vs closed form", {
        let s = SolverSettings::default();
        let mut worst: f64 = 0.0;
        for &(p, dw1, dw2, l) in &[(0.1, 0.0, 0.0, 1.0), (0.01, 0.4, -0.2, 0.63), (1.0, 0.0, 0.5, 0.31)] {
            let dev = DeviceConfig::with_detunings(dw1, dw2, l)?;
            let prof = transport::intracavity_profile(p, &dev, 2001, &s)?;
            worst = worst.max(((prof.average - prof.average_quadrature) / prof.average).abs());
        }
        Ok(check("profile average: quadrature vs closed form", worst, 1e-8))
    })
}

pub fn run_checks() -> Vec<Check> {
    vec![
        reflectance_examples(),
        bloch_route(),
        single_mirror_limit(),
        transparent_limit(),
        series_oracle(),
        residual_certificate(),
        reference_fixed_point(),
        reciprocity(),
        profile_average(),
    ]
}
