//! Self-consistent powers impinging on the two emitters.
//!
//! Each emitter's reflectance depends on the power reaching it, and that power
//! depends on both reflectances through the cavity sums:
//!
//! ```text
//! p1 = |incident(0) + backward(0)|²
//! p2 = |forward(L)|²
//! ```
//!
//! The pair `(p1, p2)` is found by damped fixed-point iteration. At zero input
//! the map is `0/0` indeterminate at `(0, 0)`; that point is reported as the
//! perfect-mirror limit with `T = 0`.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cavity::{self, CavityGeometry, MirrorPair, StandingWave};
use crate::emitter::{self, EmitterParams};
use crate::error::{Error, Result};

/// Below this incident power the default strategy ramps up from near zero.
pub const CONTINUATION_THRESHOLD: f64 = 0.01;

/// Consecutive singular evaluations after which the iterate is declared to sit
/// in the perfect-mirror limit.
const MAX_CONSECUTIVE_CLAMPS: usize = 100;

/// Iterations without halving the best residual before the damping is reduced.
const STALL_WINDOW: usize = 2000;

/// How many times the damping may be halved after a stalled attempt.
const MAX_DAMPING_HALVINGS: usize = 6;

/// Fixed points closer than this (relative, max-norm) are the same branch.
const CLUSTER_TOLERANCE: f64 = 1e-6;

/// Two emitters and their separation. Light travelling left to right meets
/// `emitter1` first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceConfig {
    pub emitter1: EmitterParams,
    pub emitter2: EmitterParams,
    pub geometry: CavityGeometry,
}

impl DeviceConfig {
    pub fn new(emitter1: EmitterParams, emitter2: EmitterParams, geometry: CavityGeometry) -> Result<Self> {
        let dev = DeviceConfig {
            emitter1,
            emitter2,
            geometry,
        };
        dev.validate()?;
        Ok(dev)
    }

    /// Unit decay rates, given detunings and length in wavelengths.
    pub fn with_detunings(dw1: f64, dw2: f64, length: f64) -> Result<Self> {
        Self::new(
            EmitterParams::with_detuning(dw1)?,
            EmitterParams::with_detuning(dw2)?,
            CavityGeometry::new(length)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter1.validate()?;
        self.emitter2.validate()?;
        self.geometry.validate()
    }

    /// The device as seen by light travelling right to left.
    pub fn swapped(&self) -> Self {
        DeviceConfig {
            emitter1: self.emitter2,
            emitter2: self.emitter1,
            geometry: self.geometry,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Mixing factor `α` of `p ← (1 − α)p + α·f(p)`.
    pub damping: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
    /// Random restarts used by [`scan_fixed_points`].
    pub n_seeds: usize,
    /// Warm-started solves in the incident-power ramp.
    pub continuation_steps: usize,
    /// Seed for the restart generator, so scans are reproducible.
    pub rng_seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            damping: 0.5,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iterations: 100_000,
            n_seeds: 16,
            continuation_steps: 20,
            rng_seed: 0x5eed,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(
                "damping",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol", format!("must be > 0, got {}", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("abs_tol", format!("must be > 0, got {}", self.abs_tol)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be >= 1"));
        }
        if self.continuation_steps == 0 {
            return Err(Error::invalid("continuation_steps", "must be >= 1"));
        }
        Ok(())
    }

    fn tolerance(&self, p1: f64, p2: f64) -> f64 {
        (self.rel_tol * p1.max(p2)).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateSolution {
    pub p_inc: f64,
    pub p1: f64,
    pub p2: f64,
    pub r1: f64,
    pub r2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub transmittance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `max(|p1 − f1(p)|, |p2 − f2(p)|)` at the reported point.
    pub residual: f64,
    /// Distinct fixed points found by a seed scan; `None` when no scan ran.
    pub branch_count: Option<usize>,
    /// Both powers collapsed to zero with unit reflectances; `T` is reported as 0.
    pub perfect_mirror_limit: bool,
}

impl SteadyStateSolution {
    pub fn mirrors(&self) -> Result<MirrorPair> {
        MirrorPair::from_reflectances(self.r1, self.r2, self.theta1, self.theta2)
    }

    /// Forward/backward intracavity waves at the solved reflectances.
    pub fn standing_wave(&self, geom: &CavityGeometry) -> Result<StandingWave> {
        if self.perfect_mirror_limit || self.p_inc == 0.0 {
            return Ok(StandingWave {
                forward_coeff: 0.0.into(),
                backward_coeff: 0.0.into(),
                length_wavelengths: geom.length_wavelengths,
            });
        }
        StandingWave::new(self.p_inc, &self.mirrors()?, geom)
    }
}

fn check_power(p_inc: f64) -> Result<()> {
    if !(p_inc.is_finite() && p_inc >= 0.0) {
        return Err(Error::invalid(
            "p_inc",
            format!("incident power must be finite and >= 0, got {p_inc}"),
        ));
    }
    Ok(())
}

fn mirrors_at(p1: f64, p2: f64, dev: &DeviceConfig) -> Result<MirrorPair> {
    MirrorPair::from_reflectances(
        emitter::reflectance(p1, &dev.emitter1)?,
        emitter::reflectance(p2, &dev.emitter2)?,
        emitter::phase_shift(&dev.emitter1)?,
        emitter::phase_shift(&dev.emitter2)?,
    )
}

/// One evaluation of the self-consistency map `(p1, p2) ↦ (p1', p2')`.
///
/// With no input light the map returns `(0, 0)` for any trial powers.
pub fn fixed_point_map(p1: f64, p2: f64, p_inc: f64, dev: &DeviceConfig) -> Result<(f64, f64)> {
    check_power(p_inc)?;
    if p_inc == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mp = mirrors_at(p1, p2, dev)?;
    let geom = &dev.geometry;
    let wave = StandingWave::new(p_inc, &mp, geom)?;
    let incident = cavity::incident_amplitude(p_inc, geom, 0.0)?;
    let at_first = (incident + wave.backward(0.0)).norm_sqr();
    let at_second = wave.forward(geom.length_wavelengths).norm_sqr();
    Ok((at_first, at_second))
}

/// `max(|p1 − f1(p)|, |p2 − f2(p)|)`.
pub fn residual(p1: f64, p2: f64, p_inc: f64, dev: &DeviceConfig) -> Result<f64> {
    let (q1, q2) = fixed_point_map(p1, p2, p_inc, dev)?;
    Ok((q1 - p1).abs().max((q2 - p2).abs()))
}

/// The plain-iteration seed `(p_inc, (1 − R1(p_inc))·p_inc)`, exact when there
/// is no feedback from the second emitter.
pub fn default_seed(p_inc: f64, dev: &DeviceConfig) -> Result<(f64, f64)> {
    let r1 = emitter::reflectance(p_inc, &dev.emitter1)?;
    Ok((p_inc, (1.0 - r1) * p_inc))
}

fn build_solution(
    p_inc: f64,
    p1: f64,
    p2: f64,
    dev: &DeviceConfig,
    converged: bool,
    iterations: usize,
    residual: f64,
) -> Result<SteadyStateSolution> {
    let r1 = emitter::reflectance(p1, &dev.emitter1)?;
    let r2 = emitter::reflectance(p2, &dev.emitter2)?;
    let theta1 = emitter::phase_shift(&dev.emitter1)?;
    let theta2 = emitter::phase_shift(&dev.emitter2)?;
    let transmittance = if r1 >= 1.0 || r2 >= 1.0 {
        0.0
    } else {
        cavity::transmittance_formula(r1, r2, 0.5 * (theta1 + theta2), dev.geometry.mu())?
    };
    Ok(SteadyStateSolution {
        p_inc,
        p1,
        p2,
        r1,
        r2,
        theta1,
        theta2,
        transmittance,
        converged,
        iterations,
        residual,
        branch_count: None,
        perfect_mirror_limit: false,
    })
}

fn perfect_mirror(p_inc: f64, dev: &DeviceConfig, iterations: usize) -> Result<SteadyStateSolution> {
    let mut sol = build_solution(p_inc, 0.0, 0.0, dev, p_inc == 0.0, iterations, 0.0)?;
    sol.perfect_mirror_limit = true;
    sol.transmittance = 0.0;
    if p_inc > 0.0 {
        sol.residual = f64::NAN;
    }
    Ok(sol)
}

enum Attempt {
    Converged { p: (f64, f64), residual: f64, iterations: usize },
    PerfectMirror { iterations: usize },
    Failed { p: (f64, f64), residual: f64, iterations: usize },
}

fn damped_attempt(
    p_inc: f64,
    dev: &DeviceConfig,
    s: &SolverSettings,
    seed: (f64, f64),
    damping: f64,
    budget: usize,
) -> Attempt {
    let (mut p1, mut p2) = seed;
    let mut clamps = 0;
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut last_residual = f64::INFINITY;
    for it in 0..budget {
        let (q1, q2) = match fixed_point_map(p1, p2, p_inc, dev) {
            Ok(q) => {
                clamps = 0;
                q
            }
            Err(Error::Singular(_)) => {
                clamps += 1;
                if clamps >= MAX_CONSECUTIVE_CLAMPS {
                    return Attempt::PerfectMirror { iterations: it + 1 };
                }
                p1 = p1.max(s.abs_tol);
                p2 = p2.max(s.abs_tol);
                continue;
            }
            Err(e) => {
                warn!("fixed-point map failed: {e}");
                return Attempt::Failed {
                    p: (p1, p2),
                    residual: f64::NAN,
                    iterations: it + 1,
                };
            }
        };
        let res = (q1 - p1).abs().max((q2 - p2).abs());
        last_residual = res;
        if res <= s.tolerance(p1, p2) {
            return Attempt::Converged {
                p: (p1, p2),
                residual: res,
                iterations: it + 1,
            };
        }
        if !res.is_finite() {
            break;
        }
        if res < 0.5 * best {
            best = res;
            best_at = it;
        } else if it - best_at > STALL_WINDOW {
            return Attempt::Failed {
                p: (p1, p2),
                residual: res,
                iterations: it + 1,
            };
        }
        p1 = (1.0 - damping) * p1 + damping * q1;
        p2 = (1.0 - damping) * p2 + damping * q2;
    }
    Attempt::Failed {
        p: (p1, p2),
        residual: last_residual,
        iterations: budget,
    }
}

/// Damped iteration from an explicit starting point.
///
/// When an attempt stalls (oscillation around a fixed point whose map has a
/// strongly negative slope) the damping is halved and the attempt restarts
/// from the original seed, within the overall `max_iterations` budget.
pub fn solve_from(
    p_inc: f64,
    dev: &DeviceConfig,
    s: &SolverSettings,
    seed: (f64, f64),
) -> Result<SteadyStateSolution> {
    check_power(p_inc)?;
    dev.validate()?;
    s.validate()?;
    if p_inc == 0.0 {
        return perfect_mirror(0.0, dev, 0);
    }
    if !(seed.0 >= 0.0 && seed.1 >= 0.0 && seed.0.is_finite() && seed.1.is_finite()) {
        return Err(Error::invalid("seed", format!("seed powers must be finite and >= 0, got {seed:?}")));
    }
    let mut damping = s.damping;
    let mut used = 0;
    let mut last = (seed, f64::NAN);
    for _ in 0..=MAX_DAMPING_HALVINGS {
        if used >= s.max_iterations {
            break;
        }
        match damped_attempt(p_inc, dev, s, seed, damping, s.max_iterations - used) {
            Attempt::Converged { p, residual, iterations } => {
                return build_solution(p_inc, p.0, p.1, dev, true, used + iterations, residual);
            }
            Attempt::PerfectMirror { iterations } => {
                warn!("iterate pinned at the perfect-mirror limit (p_inc = {p_inc})");
                return perfect_mirror(p_inc, dev, used + iterations);
            }
            Attempt::Failed { p, residual, iterations } => {
                used += iterations;
                last = (p, residual);
                debug!("damping {damping} stalled at residual {residual:e}; halving");
                damping *= 0.5;
            }
        }
    }
    let ((p1, p2), res) = last;
    build_solution(p_inc, p1, p2, dev, false, used, res)
}

/// Damped iteration from the default seed.
pub fn solve_steady_state(p_inc: f64, dev: &DeviceConfig, s: &SolverSettings) -> Result<SteadyStateSolution> {
    check_power(p_inc)?;
    dev.validate()?;
    solve_from(p_inc, dev, s, default_seed(p_inc, dev)?)
}

/// Every solve of the incident-power ramp, lowest power first.
///
/// The ramp is geometric from `min(p_inc, 10·abs_tol)` to `p_inc` with
/// `continuation_steps` points, each warm-started from the previous fixed point.
pub fn continuation_path(
    p_inc: f64,
    dev: &DeviceConfig,
    s: &SolverSettings,
) -> Result<Vec<SteadyStateSolution>> {
    check_power(p_inc)?;
    dev.validate()?;
    s.validate()?;
    let start = p_inc.min(10.0 * s.abs_tol);
    let n = s.continuation_steps;
    if p_inc == 0.0 || n == 1 || start >= p_inc {
        return Ok(vec![solve_steady_state(p_inc, dev, s)?]);
    }
    let ratio = (p_inc / start).ln() / (n - 1) as f64;
    let mut path: Vec<SteadyStateSolution> = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i == n - 1 { p_inc } else { start * (ratio * i as f64).exp() };
        let sol = match path.last() {
            Some(prev) if !prev.perfect_mirror_limit => solve_from(p, dev, s, (prev.p1, prev.p2))?,
            _ => solve_steady_state(p, dev, s)?,
        };
        if !sol.converged {
            debug!("continuation step {i} at p = {p:e} did not converge");
        }
        path.push(sol);
    }
    Ok(path)
}

pub fn solve_with_continuation(
    p_inc: f64,
    dev: &DeviceConfig,
    s: &SolverSettings,
) -> Result<SteadyStateSolution> {
    let path = continuation_path(p_inc, dev, s)?;
    let total: usize = path.iter().map(|x| x.iterations).sum();
    let mut last = *path.last().expect("continuation path is never empty");
    last.iterations = total;
    Ok(last)
}

/// Default strategy: the continuation branch below [`CONTINUATION_THRESHOLD`],
/// plain iteration above it.
pub fn solve(p_inc: f64, dev: &DeviceConfig, s: &SolverSettings) -> Result<SteadyStateSolution> {
    if p_inc < CONTINUATION_THRESHOLD {
        solve_with_continuation(p_inc, dev, s)
    } else {
        solve_steady_state(p_inc, dev, s)
    }
}

/// Runs the iteration from `n_seeds` random log-uniform seeds in
/// `[abs_tol, 10·max(p_inc, 1)]²` and returns the distinct converged fixed
/// points sorted by `p1`, each tagged with the branch count.
pub fn scan_fixed_points(
    p_inc: f64,
    dev: &DeviceConfig,
    s: &SolverSettings,
) -> Result<Vec<SteadyStateSolution>> {
    check_power(p_inc)?;
    dev.validate()?;
    s.validate()?;
    if p_inc == 0.0 {
        let mut sol = perfect_mirror(0.0, dev, 0)?;
        sol.branch_count = Some(1);
        return Ok(vec![sol]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.rng_seed);
    let lo = s.abs_tol.ln();
    let hi = (10.0 * p_inc.max(1.0)).ln();
    let mut found: Vec<SteadyStateSolution> = Vec::new();
    for _ in 0..s.n_seeds {
        let seed = (rng.gen_range(lo..hi).exp(), rng.gen_range(lo..hi).exp());
        let sol = solve_from(p_inc, dev, s, seed)?;
        if !sol.converged {
            continue;
        }
        let duplicate = found.iter().any(|f| {
            let scale = f.p1.max(f.p2).max(sol.p1).max(sol.p2);
            let dist = (f.p1 - sol.p1).abs().max((f.p2 - sol.p2).abs());
            dist <= CLUSTER_TOLERANCE * scale
        });
        if !duplicate {
            found.push(sol);
        }
    }
    found.sort_by(|a, b| a.p1.total_cmp(&b.p1));
    let count = found.len();
    if count > 1 {
        warn!(
            "{count} distinct fixed points at p_inc = {p_inc}, dw1 = {}, dw2 = {}, L = {}",
            dev.emitter1.delta_omega, dev.emitter2.delta_omega, dev.geometry.length_wavelengths
        );
    }
    for f in &mut found {
        f.branch_count = Some(count);
    }
    Ok(found)
}
