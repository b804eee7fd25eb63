//! Parameter grids over the device and drive, evaluated point by point and
//! written as CSV.
//!
//! Rows come out row-major over the axes in declaration order regardless of
//! how many workers evaluate them, so repeated runs give byte-identical files.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{DeviceConfig, SolverSettings};
use crate::transport::{self, Direction, RectificationResult};

/// Column order of every CSV written by this crate.
pub const CSV_HEADER: [&str; 19] = [
    "p_inc",
    "L",
    "dw1",
    "dw2",
    "gamma1",
    "gamma2",
    "p1",
    "p2",
    "R1",
    "R2",
    "T12",
    "T21",
    "r_factor",
    "l_factor",
    "avg_intracavity",
    "converged_12",
    "converged_21",
    "iterations",
    "residual",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    PInc,
    Length,
    Dw1,
    Dw2,
    Gamma1,
    Gamma2,
}

impl Parameter {
    pub const ALL: [Parameter; 6] = [
        Parameter::PInc,
        Parameter::Length,
        Parameter::Dw1,
        Parameter::Dw2,
        Parameter::Gamma1,
        Parameter::Gamma2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::PInc => "p_inc",
            Parameter::Length => "L",
            Parameter::Dw1 => "dw1",
            Parameter::Dw2 => "dw2",
            Parameter::Gamma1 => "gamma1",
            Parameter::Gamma2 => "gamma2",
        }
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p_inc" | "p-inc" => Ok(Parameter::PInc),
            "L" | "length" => Ok(Parameter::Length),
            "dw1" => Ok(Parameter::Dw1),
            "dw2" => Ok(Parameter::Dw2),
            "gamma1" => Ok(Parameter::Gamma1),
            "gamma2" => Ok(Parameter::Gamma2),
            other => Err(Error::invalid("axis", format!("unknown parameter `{other}`"))),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub parameter: Parameter,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(parameter: Parameter, min: f64, max: f64, count: usize) -> Self {
        Axis {
            parameter,
            min,
            max,
            count,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(parameter: Parameter, min: f64, max: f64, count: usize) -> Self {
        Axis {
            spacing: Spacing::Log,
            ..Self::linear(parameter, min, max, count)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::invalid("axis", format!("{}: count must be >= 2", self.parameter)));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid("axis", format!("{}: bounds must be finite", self.parameter)));
        }
        if self.spacing == Spacing::Log && !(self.min > 0.0 && self.max > 0.0) {
            return Err(Error::invalid(
                "axis",
                format!("{}: log spacing needs positive bounds", self.parameter),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == self.count - 1 {
                    return self.max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

/// `name:min:max:count[:linear|log]`, e.g. `L:0:1:65` or `p_inc:1e-5:1e4:50:log`.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if !(parts.len() == 4 || parts.len() == 5) {
            return Err(Error::invalid(
                "axis",
                format!("expected name:min:max:count[:spacing], got `{s}`"),
            ));
        }
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::invalid("axis", format!("bad number `{t}` in `{s}`")))
        };
        let count = parts[3]
            .parse::<usize>()
            .map_err(|_| Error::invalid("axis", format!("bad count `{}` in `{s}`", parts[3])))?;
        let spacing = match parts.get(4).copied() {
            None | Some("linear") | Some("lin") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(Error::invalid("axis", format!("unknown spacing `{other}`"))),
        };
        let axis = Axis {
            parameter: parts[0].parse()?,
            min: num(parts[1])?,
            max: num(parts[2])?,
            count,
            spacing,
        };
        axis.validate()?;
        Ok(axis)
    }
}

/// Values of all six parameters at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub p_inc: f64,
    pub length: f64,
    pub dw1: f64,
    pub dw2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for PointParams {
    fn default() -> Self {
        PointParams {
            p_inc: 0.001,
            length: 1.0,
            dw1: 0.0,
            dw2: 0.0,
            gamma1: 1.0,
            gamma2: 1.0,
        }
    }
}

impl PointParams {
    pub fn get(&self, p: Parameter) -> f64 {
        match p {
            Parameter::PInc => self.p_inc,
            Parameter::Length => self.length,
            Parameter::Dw1 => self.dw1,
            Parameter::Dw2 => self.dw2,
            Parameter::Gamma1 => self.gamma1,
            Parameter::Gamma2 => self.gamma2,
        }
    }

    pub fn set(&mut self, p: Parameter, v: f64) {
        match p {
            Parameter::PInc => self.p_inc = v,
            Parameter::Length => self.length = v,
            Parameter::Dw1 => self.dw1 = v,
            Parameter::Dw2 => self.dw2 = v,
            Parameter::Gamma1 => self.gamma1 = v,
            Parameter::Gamma2 => self.gamma2 = v,
        }
    }

    pub fn device(&self) -> Result<DeviceConfig> {
        DeviceConfig::new(
            crate::EmitterParams::new(self.gamma1, self.dw1)?,
            crate::EmitterParams::new(self.gamma2, self.dw2)?,
            crate::CavityGeometry::new(self.length)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Output {
    Transmit,
    Rectify,
    ProfileAverage,
    P1,
    P2,
}

impl FromStr for Output {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "transmit" => Ok(Output::Transmit),
            "rectify" => Ok(Output::Rectify),
            "profile_average" => Ok(Output::ProfileAverage),
            "p1" => Ok(Output::P1),
            "p2" => Ok(Output::P2),
            other => Err(Error::invalid("outputs", format!("unknown output `{other}`"))),
        }
    }
}

/// Parses a comma-separated output list such as `transmit,rectify,p1`.
pub fn parse_outputs(s: &str) -> Result<BTreeSet<Output>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub fixed: PointParams,
    pub solver: SolverSettings,
    pub outputs: BTreeSet<Output>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::invalid(
                "axes",
                format!("a sweep needs one or two axes, got {}", self.axes.len()),
            ));
        }
        for a in &self.axes {
            a.validate()?;
        }
        if self.axes.len() == 2 && self.axes[0].parameter == self.axes[1].parameter {
            return Err(Error::invalid("axes", "the two axes must sweep different parameters"));
        }
        if self.outputs.is_empty() {
            return Err(Error::invalid("outputs", "at least one output is required"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        self.solver.validate()
    }

    pub fn row_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Grid points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<PointParams> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut out = Vec::with_capacity(self.row_count());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let mut p = self.fixed;
            for (k, axis) in self.axes.iter().enumerate() {
                p.set(axis.parameter, values[k][idx[k]]);
            }
            out.push(p);
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.axes[k].count {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// One CSV row. Optional fields are written empty when not requested or not
/// finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub params: PointParams,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub t12: Option<f64>,
    pub t21: Option<f64>,
    pub r_factor: Option<f64>,
    pub l_factor: Option<f64>,
    pub avg_intracavity: Option<f64>,
    pub converged_12: bool,
    pub converged_21: bool,
    pub iterations: usize,
    pub residual: Option<f64>,
}

impl SweepRecord {
    pub fn converged(&self) -> bool {
        self.converged_12 && self.converged_21
    }

    /// Full record for a two-direction solve.
    pub fn from_rectification(params: PointParams, r: &RectificationResult) -> Self {
        let fw = &r.forward;
        SweepRecord {
            params,
            p1: Some(fw.p1),
            p2: Some(fw.p2),
            r1: Some(fw.r1),
            r2: Some(fw.r2),
            t12: Some(r.t12),
            t21: Some(r.t21),
            r_factor: Some(r.r_factor),
            l_factor: Some(r.l_factor),
            avg_intracavity: None,
            converged_12: fw.converged,
            converged_21: r.backward.converged,
            iterations: fw.iterations.max(r.backward.iterations),
            residual: finite(fw.residual.max(r.backward.residual)),
        }
    }

    fn failed(params: PointParams) -> Self {
        SweepRecord {
            params,
            p1: None,
            p2: None,
            r1: None,
            r2: None,
            t12: None,
            t21: None,
            r_factor: None,
            l_factor: None,
            avg_intracavity: None,
            converged_12: false,
            converged_21: false,
            iterations: 0,
            residual: None,
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Solves both directions at one point and keeps the requested columns.
pub fn evaluate_point(
    params: PointParams,
    outputs: &BTreeSet<Output>,
    s: &SolverSettings,
) -> Result<SweepRecord> {
    let dev = params.device()?;
    let r = transport::rectify(params.p_inc, &dev, s)?;
    let fw = r.forward;
    let want = |o| outputs.contains(&o);
    let avg = if want(Output::ProfileAverage) {
        let wave = fw.standing_wave(&dev.geometry)?;
        finite(transport::closed_form_average(wave.forward_coeff, wave.backward_coeff, params.length))
    } else {
        None
    };
    let show_powers = want(Output::P1) || want(Output::P2);
    Ok(SweepRecord {
        params,
        p1: want(Output::P1).then_some(fw.p1),
        p2: want(Output::P2).then_some(fw.p2),
        r1: show_powers.then_some(fw.r1),
        r2: show_powers.then_some(fw.r2),
        t12: (want(Output::Transmit) || want(Output::Rectify)).then_some(r.t12),
        t21: want(Output::Rectify).then_some(r.t21),
        r_factor: want(Output::Rectify).then_some(r.r_factor),
        l_factor: want(Output::Rectify).then_some(r.l_factor),
        avg_intracavity: avg,
        converged_12: fw.converged,
        converged_21: r.backward.converged,
        iterations: fw.iterations.max(r.backward.iterations),
        residual: finite(fw.residual.max(r.backward.residual)),
    })
}

/// Single-direction record used by the `transmit` subcommand: the transmittance
/// lands in `T12` or `T21` according to `dir`.
pub fn evaluate_direction(params: PointParams, dir: Direction, s: &SolverSettings) -> Result<SweepRecord> {
    let dev = params.device()?;
    let (t, sol) = transport::transmit(params.p_inc, &dev, dir, s)?;
    let mut rec = SweepRecord::failed(params);
    rec.p1 = Some(sol.p1);
    rec.p2 = Some(sol.p2);
    rec.r1 = Some(sol.r1);
    rec.r2 = Some(sol.r2);
    match dir {
        Direction::LeftToRight => {
            rec.t12 = Some(t);
            rec.converged_12 = sol.converged;
        }
        Direction::RightToLeft => {
            rec.t21 = Some(t);
            rec.converged_21 = sol.converged;
        }
    }
    rec.iterations = sol.iterations;
    rec.residual = finite(sol.residual);
    Ok(rec)
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `f` over `items` on a pool of `workers` threads, preserving order.
pub(crate) fn parallel_map<T, U, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    let pool = build_pool(workers)?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Evaluates every grid point. Per-point failures become unconverged rows and
/// never abort the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let points = spec.points();
    info!("sweep: {} points", points.len());
    let records = parallel_map(&points, spec.workers, |&p| {
        evaluate_point(p, &spec.outputs, &spec.solver).unwrap_or_else(|e| {
            warn!("point {p:?} failed: {e}");
            SweepRecord::failed(p)
        })
    })?;
    let unconverged = records.iter().filter(|r| !r.converged()).count();
    if unconverged > 0 {
        warn!("sweep: {unconverged} of {} points did not converge", records.len());
    }
    Ok(records)
}

/// Shortest decimal text that parses back to the same `f64`; exponent form
/// outside `[1e-5, 1e16)` keeps fields short.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(format_number).unwrap_or_default()
}

impl SweepRecord {
    pub fn to_fields(&self) -> Vec<String> {
        let p = &self.params;
        vec![
            format_number(p.p_inc),
            format_number(p.length),
            format_number(p.dw1),
            format_number(p.dw2),
            format_number(p.gamma1),
            format_number(p.gamma2),
            opt(self.p1),
            opt(self.p2),
            opt(self.r1),
            opt(self.r2),
            opt(self.t12),
            opt(self.t21),
            opt(self.r_factor),
            opt(self.l_factor),
            opt(self.avg_intracavity),
            self.converged_12.to_string(),
            self.converged_21.to_string(),
            self.iterations.to_string(),
            opt(self.residual),
        ]
    }

    pub fn from_fields(fields: &[&str]) -> Result<Self> {
        if fields.len() != CSV_HEADER.len() {
            return Err(Error::Io(format!(
                "expected {} fields, got {}",
                CSV_HEADER.len(),
                fields.len()
            )));
        }
        let req = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::Io(format!("column {}: bad number `{}`", CSV_HEADER[i], fields[i])))
        };
        let optional = |i: usize| -> Result<Option<f64>> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                req(i).map(Some)
            }
        };
        let flag = |i: usize| match fields[i] {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::Io(format!("column {}: bad flag `{other}`", CSV_HEADER[i]))),
        };
        Ok(SweepRecord {
            params: PointParams {
                p_inc: req(0)?,
                length: req(1)?,
                dw1: req(2)?,
                dw2: req(3)?,
                gamma1: req(4)?,
                gamma2: req(5)?,
            },
            p1: optional(6)?,
            p2: optional(7)?,
            r1: optional(8)?,
            r2: optional(9)?,
            t12: optional(10)?,
            t21: optional(11)?,
            r_factor: optional(12)?,
            l_factor: optional(13)?,
            avg_intracavity: optional(14)?,
            converged_12: flag(15)?,
            converged_21: flag(16)?,
            iterations: fields[17]
                .parse()
                .map_err(|_| Error::Io(format!("column iterations: bad count `{}`", fields[17])))?,
            residual: optional(18)?,
        })
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(CSV_HEADER)?;
    }
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Io(format!("unexpected CSV header: {header:?}")));
    }
    rd.records()
        .map(|row| {
            let row = row?;
            let fields: Vec<&str> = row.iter().collect();
            SweepRecord::from_fields(&fields)
        })
        .collect()
}
