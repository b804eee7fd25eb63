//! Search over `(L, dw1)` for the best rectifier at fixed drive and `dw2`.
//!
//! The objective is `min(r_factor, l_factor)`, i.e. a point must both rectify
//! and transmit. A coarse grid is followed by rounds that re-grid a window a
//! quarter of the previous size around the incumbent. High-rectification
//! regions at low power are narrow (a few hundredths of a wavelength), so the
//! refinement rounds matter.

use log::info;

use crate::error::{Error, Result};
use crate::solver::SolverSettings;
use crate::sweep::{parallel_map, PointParams};
use crate::transport::{self, RectificationResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub p_inc: f64,
    pub dw2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub length_bounds: (f64, f64),
    pub dw1_bounds: (f64, f64),
    /// Points per axis in every round.
    pub grid: usize,
    pub refine_rounds: usize,
    /// Window shrink factor between rounds.
    pub shrink: f64,
    /// Force `dw1 = dw2`; only `L` is searched.
    pub identical_emitters: bool,
    pub workers: Option<usize>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            p_inc: 0.001,
            dw2: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
            length_bounds: (0.0, 1.0),
            dw1_bounds: (-3.0, 3.0),
            grid: 65,
            refine_rounds: 3,
            shrink: 4.0,
            identical_emitters: false,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub length: f64,
    pub dw1: f64,
    pub r_factor: f64,
    pub l_factor: f64,
    pub rectification: RectificationResult,
    /// Best objective after the coarse grid and after each refinement round.
    pub history: Vec<f64>,
    pub rounds: usize,
    pub evaluated: usize,
}

impl SearchResult {
    pub fn objective(&self) -> f64 {
        self.r_factor.min(self.l_factor)
    }

    pub fn params(&self, spec: &SearchSpec) -> PointParams {
        PointParams {
            p_inc: spec.p_inc,
            length: self.length,
            dw1: self.dw1,
            dw2: spec.dw2,
            gamma1: spec.gamma1,
            gamma2: spec.gamma2,
        }
    }
}

fn check_bounds(name: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid(name, format!("need finite lo <= hi, got ({lo}, {hi})")));
    }
    Ok(())
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        check_bounds("length_bounds", self.length_bounds)?;
        check_bounds("dw1_bounds", self.dw1_bounds)?;
        if self.length_bounds.0 < 0.0 {
            return Err(Error::invalid("length_bounds", "lengths must be >= 0"));
        }
        if self.grid < 2 {
            return Err(Error::invalid("grid", "need at least 2 points per axis"));
        }
        if !(self.shrink > 1.0) {
            return Err(Error::invalid("shrink", "window shrink factor must exceed 1"));
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// A window of the given width centred on `c`, shifted to stay inside `bounds`.
fn window(c: f64, width: f64, bounds: (f64, f64)) -> (f64, f64) {
    let width = width.min(bounds.1 - bounds.0);
    let lo = (c - 0.5 * width).max(bounds.0);
    let hi = (lo + width).min(bounds.1);
    (hi - width, hi)
}

pub fn design_search(spec: &SearchSpec, s: &SolverSettings) -> Result<SearchResult> {
    spec.validate()?;
    s.validate()?;
    let mut l_win = spec.length_bounds;
    let mut d_win = if spec.identical_emitters {
        (spec.dw2, spec.dw2)
    } else {
        spec.dw1_bounds
    };
    let mut best: Option<(f64, f64, RectificationResult)> = None;
    let mut history = Vec::with_capacity(spec.refine_rounds + 1);
    let mut evaluated = 0;
    for round in 0..=spec.refine_rounds {
        let mut candidates = Vec::new();
        for &l in &linspace(l_win.0, l_win.1, spec.grid) {
            for &d in &linspace(d_win.0, d_win.1, spec.grid) {
                candidates.push((l, d));
            }
        }
        evaluated += candidates.len();
        let results = parallel_map(&candidates, spec.workers, |&(l, d)| {
            let p = PointParams {
                p_inc: spec.p_inc,
                length: l,
                dw1: d,
                dw2: spec.dw2,
                gamma1: spec.gamma1,
                gamma2: spec.gamma2,
            };
            p.device()
                .and_then(|dev| transport::rectify(spec.p_inc, &dev, s))
                .ok()
                .filter(|r| r.both_converged)
        })?;
        for (&(l, d), r) in candidates.iter().zip(results) {
            let Some(r) = r else { continue };
            let obj = r.r_factor.min(r.l_factor);
            // Strict improvement keeps the earliest grid point on ties.
            if best.as_ref().is_none_or(|b| obj > b.2.r_factor.min(b.2.l_factor)) {
                best = Some((l, d, r));
            }
        }
        let Some((bl, bd, br)) = best else {
            return Err(Error::NoConvergedPoint(format!(
                "no converged grid point in round {round}"
            )));
        };
        history.push(br.r_factor.min(br.l_factor));
        info!(
            "search round {round}: L = {bl}, dw1 = {bd}, r = {:.6}, l = {:.6}",
            br.r_factor, br.l_factor
        );
        l_win = window(bl, (l_win.1 - l_win.0) / spec.shrink, spec.length_bounds);
        if !spec.identical_emitters {
            d_win = window(bd, (d_win.1 - d_win.0) / spec.shrink, spec.dw1_bounds);
        }
    }
    let (length, dw1, rectification) = best.expect("at least one round ran");
    Ok(SearchResult {
        length,
        dw1,
        r_factor: rectification.r_factor,
        l_factor: rectification.l_factor,
        rectification,
        history,
        rounds: spec.refine_rounds,
        evaluated,
    })
}
