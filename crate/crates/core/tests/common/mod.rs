//! Brute-force reference for the self-consistent powers, sharing no code with
//! the library: fields are summed bounce by bounce and the fixed point is
//! located by nested bisection over `[0, 40·p_inc]²`.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy)]
pub struct Emitter {
    pub gamma: f64,
    pub dw: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Device {
    pub e1: Emitter,
    pub e2: Emitter,
    pub length: f64,
}

impl Device {
    pub fn new(dw1: f64, dw2: f64, gamma1: f64, gamma2: f64, length: f64) -> Self {
        Device {
            e1: Emitter { gamma: gamma1, dw: dw1 },
            e2: Emitter { gamma: gamma2, dw: dw2 },
            length,
        }
    }
}

fn refl(p: f64, e: Emitter) -> f64 {
    let g2 = e.gamma * e.gamma;
    g2 / (g2 + 4.0 * e.dw * e.dw + 4.0 * p * g2)
}

fn phase(e: Emitter) -> f64 {
    (2.0 * e.dw / e.gamma).atan() - PI
}

#[derive(Debug, Clone, Copy)]
struct C(f64, f64);

impl C {
    fn polar(r: f64, th: f64) -> C {
        C(r * th.cos(), r * th.sin())
    }
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn abs2(self) -> f64 {
        self.0 * self.0 + self.1 * self.1
    }
}

/// `Σ_n q^n` as the partial sum over `n < 2^K`, built by doubling:
/// `Σ_{n<2^{k+1}} = Σ_{n<2^k}·(1 + q^{2^k})`. Stops once `|q|^{2^K}` (the
/// relative size of the dropped tail) is below 1e-18.
fn bounce_sum(q: C) -> C {
    let mut sum = C(1.0, 0.0);
    let mut power = q;
    for _ in 0..64 {
        if power.abs2().sqrt() < 1e-18 {
            break;
        }
        sum = sum.mul(C(1.0 + power.0, power.1));
        power = power.mul(power);
    }
    sum
}

/// `(p1', p2')` for trial powers, fields referenced to phase 0 at `z = L`.
///
/// Every backward addend arriving at the first emitter carries the extra
/// `e^{ikL}` of the reference model on top of its path phase.
pub fn map(p1: f64, p2: f64, p_inc: f64, d: &Device) -> (f64, f64) {
    let kl = TAU * d.length;
    let (r1, r2) = (refl(p1, d.e1), refl(p2, d.e2));
    let (th1, th2) = (phase(d.e1), phase(d.e2));
    let round = C::polar((r1 * r2).sqrt(), 2.0 * kl + th1 + th2);
    let s = bounce_sum(round);
    let a = p_inc.sqrt() * (1.0 - r1).sqrt();
    let at_second = C(a, 0.0).mul(s);
    let back_at_first = C::polar(a * r2.sqrt(), 2.0 * kl + th2).mul(s);
    let incident_at_first = C::polar(p_inc.sqrt(), -kl);
    (incident_at_first.add(back_at_first).abs2(), at_second.abs2())
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All sign changes of `f` on a uniform scan of `[lo, hi]`, refined by bisection.
fn roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = lo + (hi - lo) * i as f64 / n as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push(x0);
        } else if (f0 > 0.0) != (f1 > 0.0) {
            out.push(bisect(&f, x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Every fixed point with both powers in `[0, 40·p_inc]`.
pub fn fixed_points(p_inc: f64, d: &Device) -> Vec<(f64, f64)> {
    let hi = 40.0 * p_inc;
    let inner = |p1: f64| -> Option<f64> {
        roots(|p2| map(p1, p2, p_inc, d).1 - p2, 0.0, hi, 400).first().copied()
    };
    let outer = |p1: f64| match inner(p1) {
        Some(p2) => map(p1, p2, p_inc, d).0 - p1,
        None => f64::NAN,
    };
    roots(outer, 0.0, hi, 400)
        .into_iter()
        .filter_map(|p1| inner(p1).map(|p2| (p1, p2)))
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
