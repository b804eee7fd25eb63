//! Coherent amplitude algebra of a two-mirror cavity.
//!
//! Light enters from the left, emitter 1 sits at `z = 0` and emitter 2 at
//! `z = L`. The field phase is referenced to zero at `z = L`, and positions are
//! measured in wavelengths so that `k = 2π`. Mirrors transmit with a real
//! positive amplitude `√(1 − R)` and reflect with `√R·e^{iθ}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field amplitude in units of √(photons per lifetime).
pub type ComplexAmplitude = Complex64;

/// Round-trip denominators below this magnitude are treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-14;

/// Emitter separation, in photon wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    pub length_wavelengths: f64,
}

impl CavityGeometry {
    pub fn new(length_wavelengths: f64) -> Result<Self> {
        let g = CavityGeometry { length_wavelengths };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_wavelengths.is_finite() && self.length_wavelengths >= 0.0) {
            return Err(Error::invalid(
                "length",
                format!("must be finite and >= 0, got {}", self.length_wavelengths),
            ));
        }
        Ok(())
    }

    /// Propagation phase `kL`.
    pub fn kl(&self) -> f64 {
        TAU * self.length_wavelengths
    }

    /// Half the propagation phase, `μ = kL/2`.
    pub fn mu(&self) -> f64 {
        PI * self.length_wavelengths
    }
}

/// Amplitude reflectances/transmittances and reflection phases of both mirrors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorPair {
    pub r1: f64,
    pub r2: f64,
    pub t1: f64,
    pub t2: f64,
    pub theta1: f64,
    pub theta2: f64,
    theta_plus: f64,
}

impl MirrorPair {
    /// Builds the pair from power reflectances in `[0, 1]`. `R = 1` is
    /// representable here; the formulas that cannot handle it reject it.
    pub fn from_reflectances(
        reflectance1: f64,
        reflectance2: f64,
        theta1: f64,
        theta2: f64,
    ) -> Result<Self> {
        check_reflectance("R1", reflectance1, true)?;
        check_reflectance("R2", reflectance2, true)?;
        if !(theta1.is_finite() && theta2.is_finite()) {
            return Err(Error::invalid("theta", "reflection phases must be finite"));
        }
        Ok(MirrorPair {
            r1: reflectance1.sqrt(),
            r2: reflectance2.sqrt(),
            t1: (1.0 - reflectance1).sqrt(),
            t2: (1.0 - reflectance2).sqrt(),
            theta1,
            theta2,
            theta_plus: 0.5 * (theta1 + theta2),
        })
    }

    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }

    pub fn reflectances(&self) -> (f64, f64) {
        (self.r1 * self.r1, self.r2 * self.r2)
    }

    /// The same mirrors seen by light travelling the other way.
    pub fn swapped(&self) -> Self {
        MirrorPair {
            r1: self.r2,
            r2: self.r1,
            t1: self.t2,
            t2: self.t1,
            theta1: self.theta2,
            theta2: self.theta1,
            theta_plus: self.theta_plus,
        }
    }
}

fn check_reflectance(name: &'static str, r: f64, allow_one: bool) -> Result<()> {
    if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
        return Err(Error::invalid(name, format!("must lie in [0, 1], got {r}")));
    }
    if !allow_one && r >= 1.0 {
        return Err(Error::Singular(format!(
            "{name} = 1 makes the Fabry-Perot coefficients diverge"
        )));
    }
    Ok(())
}

/// `(F1, F2)` of the Airy transmittance `T = 1/(F1 + F2·sin²(2μ + θ₊))`.
pub fn fp_coefficients(reflectance1: f64, reflectance2: f64) -> Result<(f64, f64)> {
    check_reflectance("R1", reflectance1, false)?;
    check_reflectance("R2", reflectance2, false)?;
    let rr = (reflectance1 * reflectance2).sqrt();
    let den = (1.0 - reflectance1) * (1.0 - reflectance2);
    Ok(((1.0 - rr) * (1.0 - rr) / den, 4.0 * rr / den))
}

pub fn transmittance_formula(
    reflectance1: f64,
    reflectance2: f64,
    theta_plus: f64,
    mu: f64,
) -> Result<f64> {
    let (f1, f2) = fp_coefficients(reflectance1, reflectance2)?;
    let s = (2.0 * mu + theta_plus).sin();
    Ok(1.0 / (f1 + f2 * s * s))
}

/// `e^{ik·x}` for `x` in wavelengths.
fn propagate(x_wavelengths: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x_wavelengths)
}

/// `D = 1 − √(R1R2)·e^{2i(kL + θ₊)}`, the geometric-series denominator shared
/// by every multiply-reflected amplitude.
pub fn round_trip_denominator(mp: &MirrorPair, geom: &CavityGeometry) -> Result<Complex64> {
    let phase = 2.0 * (geom.kl() + mp.theta_plus);
    let d = Complex64::new(1.0, 0.0) - Complex64::from_polar(mp.r1 * mp.r2, phase);
    if d.norm() < SINGULAR_DENOMINATOR {
        return Err(Error::Singular(format!(
            "round-trip denominator |D| = {:e} (R1 = {}, R2 = {})",
            d.norm(),
            mp.r1 * mp.r1,
            mp.r2 * mp.r2
        )));
    }
    Ok(d)
}

fn check_incident(p_inc: f64) -> Result<()> {
    if !(p_inc.is_finite() && p_inc >= 0.0) {
        return Err(Error::invalid(
            "p_inc",
            format!("incident power must be finite and >= 0, got {p_inc}"),
        ));
    }
    Ok(())
}

/// Incident field at `z ≤ 0`: `√p_inc·e^{ik(z − L)}`.
pub fn incident_amplitude(p_inc: f64, geom: &CavityGeometry, z: f64) -> Result<ComplexAmplitude> {
    check_incident(p_inc)?;
    geom.validate()?;
    if !(z <= 0.0) {
        return Err(Error::invalid("z", format!("incident side needs z <= 0, got {z}")));
    }
    Ok(p_inc.sqrt() * propagate(z - geom.length_wavelengths))
}

/// Fully transmitted field at `z ≥ L`, the closed form of the sum over all
/// round trips.
pub fn output_amplitude(
    p_inc: f64,
    mp: &MirrorPair,
    geom: &CavityGeometry,
    z: f64,
) -> Result<ComplexAmplitude> {
    check_incident(p_inc)?;
    geom.validate()?;
    if !(z >= geom.length_wavelengths) {
        return Err(Error::invalid(
            "z",
            format!("output side needs z >= L = {}, got {z}", geom.length_wavelengths),
        ));
    }
    let d = round_trip_denominator(mp, geom)?;
    Ok(p_inc.sqrt() * mp.t1 * mp.t2 * propagate(z - geom.length_wavelengths) / d)
}

/// Forward and backward waves between the mirrors.
///
/// `forward(z) = a·e^{ik(z − L)}` and `backward(z) = b·e^{−ik(z − L)}`, so both
/// magnitudes are independent of `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWave {
    pub forward_coeff: ComplexAmplitude,
    pub backward_coeff: ComplexAmplitude,
    pub length_wavelengths: f64,
}

impl StandingWave {
    pub fn new(p_inc: f64, mp: &MirrorPair, geom: &CavityGeometry) -> Result<Self> {
        check_incident(p_inc)?;
        geom.validate()?;
        let d = round_trip_denominator(mp, geom)?;
        let forward_coeff = p_inc.sqrt() * mp.t1 / d;
        // No directly reflected backward term: the series starts with one
        // reflection off mirror 2.
        let backward_coeff = forward_coeff * mp.r2 * Complex64::from_polar(1.0, geom.kl() + mp.theta2);
        Ok(StandingWave {
            forward_coeff,
            backward_coeff,
            length_wavelengths: geom.length_wavelengths,
        })
    }

    pub fn forward(&self, z: f64) -> ComplexAmplitude {
        self.forward_coeff * propagate(z - self.length_wavelengths)
    }

    pub fn backward(&self, z: f64) -> ComplexAmplitude {
        self.backward_coeff * propagate(self.length_wavelengths - z)
    }

    /// `|forward(z) + backward(z)|²`.
    pub fn intensity(&self, z: f64) -> f64 {
        (self.forward(z) + self.backward(z)).norm_sqr()
    }
}

pub fn intracavity_amplitudes(
    p_inc: f64,
    mp: &MirrorPair,
    geom: &CavityGeometry,
    z: f64,
) -> Result<(ComplexAmplitude, ComplexAmplitude)> {
    if !(z >= 0.0 && z <= geom.length_wavelengths) {
        return Err(Error::invalid(
            "z",
            format!("intracavity position must lie in [0, L], got {z}"),
        ));
    }
    let w = StandingWave::new(p_inc, mp, geom)?;
    Ok((w.forward(z), w.backward(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(l: f64) -> CavityGeometry {
        CavityGeometry::new(l).unwrap()
    }

    fn pair(r1: f64, r2: f64, th1: f64, th2: f64) -> MirrorPair {
        MirrorPair::from_reflectances(r1, r2, th1, th2).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn fp_coefficient_examples() {
        assert_eq!(fp_coefficients(0.0, 0.0).unwrap(), (1.0, 0.0));
        let (f1, f2) = fp_coefficients(0.5, 0.5).unwrap();
        assert_relative_eq!(f1, 1.0, max_relative = 1e-14);
        assert_relative_eq!(f2, 8.0, max_relative = 1e-14);
        let (f1, f2) = fp_coefficients(0.9, 0.9).unwrap();
        assert_relative_eq!(f1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(f2, 360.0, max_relative = 1e-12);
    }

    #[test]
    fn fp_coefficients_reject_unit_reflectance() {
        assert!(matches!(fp_coefficients(1.0, 0.3), Err(Error::Singular(_))));
        assert!(matches!(fp_coefficients(0.3, 1.0), Err(Error::Singular(_))));
        assert!(fp_coefficients(1.2, 0.3).is_err());
    }

    #[test]
    fn transmittance_examples() {
        for &(th, mu) in &[(0.0, 0.0), (-2.0, 1.3), (-PI, 0.37)] {
            assert_relative_eq!(
                transmittance_formula(0.3, 0.0, th, mu).unwrap(),
                0.7,
                max_relative = 1e-14
            );
        }
        // sin(2μ + θ₊) = 0 with θ₊ = −π, μ = π/2.
        assert_relative_eq!(
            transmittance_formula(0.5, 0.5, -PI, PI / 2.0).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        // sin² = 1 with θ₊ = −π, μ = π/4.
        assert_relative_eq!(
            transmittance_formula(0.5, 0.5, -PI, PI / 4.0).unwrap(),
            1.0 / 9.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn transparent_output() {
        let a = output_amplitude(1.0, &pair(0.0, 0.0, -PI, -PI), &geom(0.7), 0.7).unwrap();
        assert!(close(a, Complex64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn quarter_wave_antiresonance() {
        let mp = pair(0.5, 0.5, -PI, -PI);
        let a = output_amplitude(0.001, &mp, &geom(0.25), 0.25).unwrap();
        assert_relative_eq!(a.norm_sqr() / 0.001, 1.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn incident_examples() {
        let a = incident_amplitude(1.0, &geom(1.0), 0.0).unwrap();
        assert!(close(a, Complex64::new(1.0, 0.0), 1e-15));
        let a = incident_amplitude(4.0, &geom(0.0), 0.0).unwrap();
        assert!(close(a, Complex64::new(2.0, 0.0), 0.0));
        let a = incident_amplitude(1.0, &geom(0.25), 0.0).unwrap();
        assert!(close(a, Complex64::new(0.0, -1.0), 1e-15));
        assert!(incident_amplitude(1.0, &geom(0.25), 0.1).is_err());
    }

    #[test]
    fn backward_vanishes_without_second_mirror() {
        let mp = pair(0.6, 0.0, -2.0, -PI);
        for i in 0..=10 {
            let z = 0.83 * i as f64 / 10.0;
            let (_, b) = intracavity_amplitudes(0.3, &mp, &geom(0.83), z).unwrap();
            assert_eq!(b, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn free_propagation_inside() {
        let mp = pair(0.0, 0.0, -PI, -PI);
        let (f, _) = intracavity_amplitudes(0.3, &mp, &geom(0.4), 0.1).unwrap();
        assert_relative_eq!(f.norm_sqr(), 0.3, max_relative = 1e-14);
    }

    #[test]
    fn singular_denominator() {
        // R1 = R2 = 1 on resonance: 2(kL + θ₊) = 2(2π − π).
        let mp = pair(1.0, 1.0, -PI, -PI);
        assert!(matches!(
            output_amplitude(1.0, &mp, &geom(1.0), 1.0),
            Err(Error::Singular(_))
        ));
        assert!(matches!(
            intracavity_amplitudes(1.0, &mp, &geom(1.0), 0.5),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn position_checks() {
        let mp = pair(0.3, 0.3, -PI, -PI);
        assert!(output_amplitude(1.0, &mp, &geom(1.0), 0.5).is_err());
        assert!(intracavity_amplitudes(1.0, &mp, &geom(1.0), 1.5).is_err());
        assert!(intracavity_amplitudes(1.0, &mp, &geom(1.0), -0.1).is_err());
    }

    /// Explicit partial sums of the round-trip series, independent of the
    /// closed forms above.
    fn series_output(p: f64, r1: f64, r2: f64, th1: f64, th2: f64, l: f64, n: usize) -> Complex64 {
        let (a1, a2) = (r1.sqrt(), r2.sqrt());
        let (b1, b2) = ((1.0 - r1).sqrt(), (1.0 - r2).sqrt());
        let kl = 2.0 * PI * l;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(b1 * b2, 0.0);
        let step = Complex64::new(0.0, 2.0 * kl + th1 + th2).exp() * a1 * a2;
        for _ in 0..n {
            sum += term;
            term *= step;
        }
        p.sqrt() * sum
    }

    fn series_backward_at(p: f64, r1: f64, r2: f64, th1: f64, th2: f64, l: f64, z: f64, n: usize) -> Complex64 {
        let kl = 2.0 * PI * l;
        let thp = 0.5 * (th1 + th2);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(0.0, kl + th2).exp() * ((1.0 - r1) * r2).sqrt();
        let step = Complex64::new(0.0, 2.0 * (kl + thp)).exp() * (r1 * r2).sqrt();
        for _ in 0..n {
            sum += term;
            term *= step;
        }
        p.sqrt() * Complex64::new(0.0, -2.0 * PI * (z - l)).exp() * sum
    }

    proptest! {
        #[test]
        fn output_matches_transmittance(
            r1 in 0.0f64..0.999,
            r2 in 0.0f64..0.999,
            th1 in -1.5 * PI..-0.5 * PI,
            th2 in -1.5 * PI..-0.5 * PI,
            l in 0.0f64..3.0,
            p in 1e-6f64..100.0,
        ) {
            let mp = pair(r1, r2, th1, th2);
            let g = geom(l);
            let a = output_amplitude(p, &mp, &g, l).unwrap();
            let t = transmittance_formula(r1, r2, mp.theta_plus(), g.mu()).unwrap();
            prop_assert!((a.norm_sqr() / p - t).abs() <= 1e-12 * t.max(1e-300) + 1e-15);
            prop_assert!(t > 0.0 && t <= 1.0 + 1e-15);
        }

        #[test]
        fn backward_to_forward_ratio(
            r1 in 0.0f64..0.999,
            r2 in 1e-6f64..0.999,
            th1 in -1.5 * PI..-0.5 * PI,
            th2 in -1.5 * PI..-0.5 * PI,
            l in 0.0f64..3.0,
            frac in 0.0f64..=1.0,
        ) {
            let mp = pair(r1, r2, th1, th2);
            let (f, b) = intracavity_amplitudes(0.7, &mp, &geom(l), frac * l).unwrap();
            prop_assert!((b.norm_sqr() / f.norm_sqr() - r2).abs() <= 1e-12);
            let (f0, b0) = intracavity_amplitudes(0.7, &mp, &geom(l), 0.0).unwrap();
            prop_assert!((f.norm() - f0.norm()).abs() <= 1e-12 * f0.norm());
            prop_assert!((b.norm() - b0.norm()).abs() <= 1e-12 * f0.norm());
        }

        #[test]
        fn truncated_series_converges(
            r1 in 0.0f64..0.9,
            r2 in 0.0f64..0.9,
            th1 in -1.5 * PI..-0.5 * PI,
            th2 in -1.5 * PI..-0.5 * PI,
            l in 0.0f64..2.0,
            frac in 0.0f64..=1.0,
        ) {
            let n = 64;
            let p = 1.0;
            let ratio = (r1 * r2).sqrt();
            let tail = ratio.powi(n as i32) / (1.0 - ratio);
            let mp = pair(r1, r2, th1, th2);
            let g = geom(l);
            let closed = output_amplitude(p, &mp, &g, l).unwrap();
            let summed = series_output(p, r1, r2, th1, th2, l, n);
            prop_assert!((closed - summed).norm() <= tail + 1e-13);
            let z = frac * l;
            let (_, b) = intracavity_amplitudes(p, &mp, &g, z).unwrap();
            let summed_b = series_backward_at(p, r1, r2, th1, th2, l, z, n);
            prop_assert!((b - summed_b).norm() <= tail + 1e-13);
        }

        #[test]
        fn transmittance_period_half_wavelength(
            r1 in 0.0f64..0.99,
            r2 in 0.0f64..0.99,
            thp in -1.5 * PI..-0.5 * PI,
            mu in 0.0f64..10.0,
        ) {
            let a = transmittance_formula(r1, r2, thp, mu).unwrap();
            let b = transmittance_formula(r1, r2, thp, mu + PI).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn mirror_energy_balance(r in 0.0f64..=1.0) {
            let mp = pair(r, r, -PI, -PI);
            prop_assert!((mp.r1 * mp.r1 + mp.t1 * mp.t1 - 1.0).abs() <= 1e-14);
        }
    }
}
