//! Planar isotropic equation `h^{1-p} (h'' + h) = 1`, solved by shooting on
//! `h'' = h^{p-1} - h`, `h(0) = a`, `h'(0) = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::SphericalDomain;
use crate::body::SupportField;
use crate::error::{HbmError, Result};
use crate::inequality::fmt17;

/// Integrator tolerances (absolute, relative).
pub const ODE_ATOL: f64 = 1e-12;
pub const ODE_RTOL: f64 = 1e-10;
/// Tolerances for root polishing and profile sampling.
const FINE_ATOL: f64 = 1e-15;
const FINE_RTOL: f64 = 1e-14;
/// Target for `|h'(pi/k)|` after polishing.
pub const SHOOT_TOL: f64 = 1e-12;
/// Number of seed points in the default search window.
pub const SEED_COUNT: usize = 400;

/// Embedded Dormand-Prince 5(4) stepper for autonomous systems in `R^2`.
struct Dopri5<F> {
    rhs: F,
    atol: f64,
    rtol: f64,
    max_steps: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 2];

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl<F: Fn(&State) -> Option<State>> Dopri5<F> {
    /// Integrates from `t0` to `t1`, calling `observe` after every accepted
    /// step. Returns `None` if the right-hand side leaves its domain or the
    /// step budget is exhausted.
    fn integrate(
        &self,
        y0: State,
        t0: f64,
        t1: f64,
        mut observe: impl FnMut(f64, &State),
    ) -> Option<State> {
        let mut t = t0;
        let mut y = y0;
        let mut k1 = (self.rhs)(&y)?;
        let mut h = ((t1 - t0) * 1e-3).max(1e-12);
        for _ in 0..self.max_steps {
            if t >= t1 {
                return Some(y);
            }
            if t + h > t1 {
                h = t1 - t;
            }
            let stage = || -> Option<(State, State, f64)> {
                let k2 = (self.rhs)(&axpy(&y, &[(A21, &k1)], h))?;
                let k3 = (self.rhs)(&axpy(&y, &[(A31, &k1), (A32, &k2)], h))?;
                let k4 = (self.rhs)(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h))?;
                let k5 = (self.rhs)(&axpy(
                    &y,
                    &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
                    h,
                ))?;
                let k6 = (self.rhs)(&axpy(
                    &y,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    h,
                ))?;
                let y5 = axpy(
                    &y,
                    &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                    h,
                );
                let k7 = (self.rhs)(&y5)?;
                let mut err: f64 = 0.0;
                for i in 0..2 {
                    let e = h
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                    let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                    err = err.max((e / sc).abs());
                }
                Some((y5, k7, err))
            };
            match stage() {
                Some((y5, k7, err)) if err <= 1.0 => {
                    t += h;
                    y = y5;
                    k1 = k7;
                    observe(t, &y);
                    let fac = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h *= fac;
                }
                Some((_, _, err)) => h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9),
                None => h *= 0.25,
            }
            if h < 1e-300 {
                return None;
            }
        }
        None
    }
}

fn stepper(p: f64, atol: f64, rtol: f64) -> Dopri5<impl Fn(&State) -> Option<State>> {
    Dopri5 {
        rhs: move |y: &State| {
            if y[0] > 0.0 {
                Some([y[1], y[0].powf(p - 1.0) - y[0]])
            } else {
                None
            }
        },
        atol,
        rtol,
        max_steps: 2_000_000,
    }
}

/// `(h, h')` at `theta` starting from `h(0) = a`, `h'(0) = 0`.
pub fn shoot(p: f64, a: f64, theta: f64) -> Option<(f64, f64)> {
    let y = stepper(p, ODE_ATOL, ODE_RTOL).integrate([a, 0.0], 0.0, theta, |_, _| {})?;
    Some((y[0], y[1]))
}

/// Conserved energy `h'^2/2 + h^2/2 - h^p/p` of the planar ODE.
pub fn energy(p: f64, h: f64, dh: f64) -> f64 {
    0.5 * dh * dh + 0.5 * h * h - h.powf(p) / p
}

/// Shooting parameter ranges for `h(0)`.
#[derive(Clone, Debug)]
pub struct SearchWindow {
    pub lower: (f64, f64),
    pub upper: (f64, f64),
    pub seeds: usize,
}

impl Default for SearchWindow {
    fn default() -> Self {
        SearchWindow {
            lower: (0.05, 1.0),
            upper: (1.0, 20.0),
            seeds: SEED_COUNT,
        }
    }
}

impl SearchWindow {
    /// Seeds spaced geometrically in `|a - 1|` on both sides of the circle.
    fn seeds(&self) -> Vec<Vec<f64>> {
        let half = self.seeds / 2;
        let side = |lo: f64, hi: f64, toward_one_from_below: bool| -> Vec<f64> {
            let (dmin, dmax) = if toward_one_from_below {
                ((1.0 - hi).max(1e-4), 1.0 - lo)
            } else {
                ((lo - 1.0).max(1e-4), hi - 1.0)
            };
            (0..half)
                .map(|i| {
                    let t = i as f64 / (half - 1) as f64;
                    let d = dmin * (dmax / dmin).powf(t);
                    if toward_one_from_below {
                        1.0 - d
                    } else {
                        1.0 + d
                    }
                })
                .collect()
        };
        vec![
            side(self.lower.0, self.lower.1, true),
            side(self.upper.0, self.upper.1, false),
        ]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanarSolution {
    pub p: f64,
    pub k: usize,
    /// `h(0)`; solutions are reported with `h(0)` at the maximum of `h`.
    pub h0: f64,
    /// Samples `(theta, h, h')` on `[0, pi/k]`.
    pub profile: Vec<[f64; 3]>,
    /// `max |h'' + h - h^{p-1}|` at the series samples, with `h''` from the
    /// sine series of `h'`.
    pub residual: f64,
    /// `|h'(pi/k)|` at the polished root.
    pub endpoint_slope: f64,
    /// Signs of `h'(pi/k)` at the ends of the final bracket.
    pub bracket_signs: (i8, i8),
    /// Coefficients of `h(theta) = sum_m c_m cos(m k theta)`.
    pub cosine_coeffs: Vec<f64>,
}

struct Root {
    a: f64,
    slope: f64,
    signs: (i8, i8),
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisection on `g` to a narrow bracket, then secant polish on the more
/// accurate `fine`.
fn refine(
    g: &impl Fn(f64) -> Option<f64>,
    fine: &impl Fn(f64) -> Option<f64>,
    mut lo: f64,
    mut glo: f64,
    mut hi: f64,
    ghi: f64,
) -> Option<Root> {
    let signs = (sign(glo), sign(ghi));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-9 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Some(Root {
                a: mid,
                slope: 0.0,
                signs,
            });
        }
        if sign(gm) == sign(glo) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (fine(lo)?, fine(hi)?);
    let (mut best, mut gbest) = if glo.abs() < ghi.abs() {
        (lo, glo)
    } else {
        (hi, ghi)
    };
    let (mut x0, mut g0, mut x1, mut g1) = (lo, glo, hi, ghi);
    let pad = 1e-6 * hi.abs().max(1.0);
    for _ in 0..30 {
        if gbest.abs() < SHOOT_TOL || g1 == g0 {
            break;
        }
        let x2 = (x1 - g1 * (x1 - x0) / (g1 - g0)).clamp(lo.min(hi) - pad, lo.max(hi) + pad);
        let g2 = fine(x2)?;
        if g2.abs() < gbest.abs() {
            best = x2;
            gbest = g2;
        }
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g2;
        if (x1 - x0).abs() < 1e-16 * x1.abs() {
            break;
        }
    }
    Some(Root {
        a: best,
        slope: gbest.abs(),
        signs,
    })
}

/// Number of sign changes of `h'` strictly inside `(0, pi/k)`.
fn interior_turns(p: f64, a: f64, k: usize) -> Option<usize> {
    let end = PI / k as f64;
    let amp = (a - 1.0).abs().max(1e-12);
    let mut last = 0i8;
    let mut turns = 0;
    stepper(p, ODE_ATOL, ODE_RTOL).integrate([a, 0.0], 0.0, end, |t, y| {
        if t > 1e-3 * end && t < (1.0 - 1e-3) * end && y[1].abs() > 1e-6 * amp {
            let s = sign(y[1]);
            if last != 0 && s != last {
                turns += 1;
            }
            last = s;
        }
    })?;
    Some(turns)
}

/// All non-circular solutions with minimal period `2 pi / k` whose `h(0)`
/// lies in the window, one per orbit (reported from the maximum of `h`).
pub fn solve_planar_branch(p: f64, k: usize, window: &SearchWindow) -> Result<Vec<PlanarSolution>> {
    if !(p < 0.0) || k == 0 {
        return Err(HbmError::InvalidDefinition(format!(
            "need p < 0 and k >= 1, got p={p}, k={k}"
        )));
    }
    let end = PI / k as f64;
    let g = |a: f64| shoot(p, a, end).map(|(_, dh)| dh);
    let fine = |a: f64| {
        stepper(p, FINE_ATOL, FINE_RTOL)
            .integrate([a, 0.0], 0.0, end, |_, _| {})
            .map(|y| y[1])
    };
    let mut roots: Vec<Root> = Vec::new();
    for side in window.seeds() {
        let vals: Vec<Option<f64>> = side.par_iter().map(|a| g(*a)).collect();
        let brackets: Vec<(usize, usize)> = (0..side.len().saturating_sub(1))
            .filter(|&i| match (vals[i], vals[i + 1]) {
                (Some(x), Some(y)) => sign(x) * sign(y) < 0,
                _ => false,
            })
            .map(|i| (i, i + 1))
            .collect();
        let found: Vec<Root> = brackets
            .par_iter()
            .filter_map(|&(i, j)| refine(&g, &fine, side[i], vals[i]?, side[j], vals[j]?))
            .collect();
        roots.extend(found);
        for (i, v) in vals.iter().enumerate() {
            if v == &Some(0.0) {
                roots.push(Root {
                    a: side[i],
                    slope: 0.0,
                    signs: (0, 0),
                });
            }
        }
    }
    roots.retain(|r| (r.a - 1.0).abs() > 1e-6 && interior_turns(p, r.a, k) == Some(0));
    // Same orbit, started from its maximum and from its minimum.
    let mut orbits: Vec<(f64, Root)> = Vec::new();
    for r in roots {
        let e = energy(p, r.a, 0.0);
        match orbits
            .iter_mut()
            .find(|(e2, _)| (e - *e2).abs() <= 1e-6 * e.abs().max(1.0))
        {
            Some(slot) => {
                if r.a > slot.1.a {
                    slot.1 = r;
                }
            }
            None => orbits.push((e, r)),
        }
    }
    let mut out: Vec<PlanarSolution> = Vec::new();
    for (_, r) in orbits {
        let a = if r.a > 1.0 {
            r.a
        } else {
            shoot(p, r.a, end).map(|(h, _)| h).unwrap_or(r.a)
        };
        out.push(build_solution(p, k, a, r.slope, r.signs)?);
    }
    out.sort_by(|x, y| x.h0.total_cmp(&y.h0));
    Ok(out)
}

const PROFILE_SAMPLES: usize = 129;
const SERIES_SAMPLES: usize = 256;
const SERIES_FLOOR: f64 = 5e-14;

fn build_solution(p: f64, k: usize, a: f64, slope: f64, signs: (i8, i8)) -> Result<PlanarSolution> {
    let end = PI / k as f64;
    let fine = stepper(p, FINE_ATOL, FINE_RTOL);
    // One continuous pass through the sorted sample angles.
    let sweep = |thetas: &[f64]| -> Result<Vec<State>> {
        let mut y = [a, 0.0];
        let mut t = 0.0;
        let mut out = Vec::with_capacity(thetas.len());
        for &th in thetas {
            if th > t {
                y = fine.integrate(y, t, th, |_, _| {}).ok_or_else(|| {
                    HbmError::InvalidDefinition(format!("integration failed at h(0)={a}"))
                })?;
                t = th;
            }
            out.push(y);
        }
        Ok(out)
    };
    let grid: Vec<f64> = (0..PROFILE_SAMPLES)
        .map(|i| end * i as f64 / (PROFILE_SAMPLES - 1) as f64)
        .collect();
    let profile = grid
        .iter()
        .zip(sweep(&grid)?)
        .map(|(th, y)| [*th, y[0], y[1]])
        .collect();
    let m = SERIES_SAMPLES;
    let mids: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * end / m as f64).collect();
    let states = sweep(&mids)?;
    let phase = |i: usize, j: usize| PI * i as f64 * (j as f64 + 0.5) / m as f64;
    let mut coeffs: Vec<f64> = (0..m)
        .map(|i| {
            let s: f64 = states
                .iter()
                .enumerate()
                .map(|(j, y)| y[0] * phase(i, j).cos())
                .sum();
            s * if i == 0 { 1.0 } else { 2.0 } / m as f64
        })
        .collect();
    coeffs.truncate(noise_cut(&coeffs, coeffs[0].abs()));
    // h' as a sine series, differentiated once, against the sampled h.
    let sines: Vec<f64> = (1..=m)
        .map(|i| {
            let s: f64 = states
                .iter()
                .enumerate()
                .map(|(j, y)| y[1] * phase(i, j).sin())
                .sum();
            s * if i == m { 1.0 } else { 2.0 } / m as f64
        })
        .collect();
    let sines = &sines[..noise_cut(&sines, coeffs[0].abs())];
    let kf = k as f64;
    let residual = mids
        .iter()
        .zip(&states)
        .map(|(th, y)| {
            let d2: f64 = sines
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let w = (i + 1) as f64 * kf;
                    c * w * (w * th).cos()
                })
                .sum();
            (d2 + y[0] - y[0].powf(p - 1.0)).abs()
        })
        .fold(0.0, f64::max);
    let sol = PlanarSolution {
        p,
        k,
        h0: a,
        profile,
        residual,
        endpoint_slope: slope,
        bracket_signs: signs,
        cosine_coeffs: coeffs,
    };
    Ok(sol)
}

/// Length of the series before its coefficients reach the integration noise floor.
fn noise_cut(c: &[f64], scale: f64) -> usize {
    let floor = SERIES_FLOOR * scale;
    c.iter()
        .position(|x| x.abs() < floor)
        .unwrap_or(c.len())
        .max(1)
}

impl PlanarSolution {
    /// `(h, h', h'')` from the cosine series, at any angle.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        let k = self.k as f64;
        let mut out = (0.0, 0.0, 0.0);
        for (m, c) in self.cosine_coeffs.iter().enumerate() {
            let w = m as f64 * k;
            let (s, co) = (w * theta).sin_cos();
            out.0 += c * co;
            out.1 -= c * w * s;
            out.2 -= c * w * w * co;
        }
        out
    }

    /// k-fold periodic extension projected onto the circle basis.
    pub fn to_support_field(&self, domain: &Arc<SphericalDomain>) -> Result<SupportField> {
        if domain.n() != 2 {
            return Err(HbmError::WrongDimension {
                expected: 2,
                got: domain.n(),
            });
        }
        SupportField::from_fn(domain, |x| self.eval(x[1].atan2(x[0])).0)
    }

    /// Cutoff that holds the whole cosine series.
    pub fn natural_lmax(&self) -> usize {
        (self.k * self.cosine_coeffs.len()).max(16)
    }

    /// Profile CSV with columns `theta, h, dh`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("theta,h,dh\n");
        for [t, h, dh] in &self.profile {
            s.push_str(&format!("{},{},{}\n", fmt17(*t), fmt17(*h), fmt17(*dh)));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchCount {
    pub k: usize,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub p: f64,
    pub branches: Vec<BranchCount>,
    /// `{k : 3 <= k < sqrt(2 - p)}`.
    pub predicted: Vec<usize>,
    pub found: Vec<usize>,
    pub matches_prediction: bool,
    #[serde(skip)]
    pub solutions: Vec<PlanarSolution>,
}

/// `{k : 3 <= k < sqrt(2 - p)}`.
pub fn predicted_branches(p: f64) -> Vec<usize> {
    let bound = (2.0 - p).sqrt();
    (3..).take_while(|k| (*k as f64) < bound).collect()
}

pub fn classify_planar(p: f64) -> Result<Classification> {
    classify_planar_with(p, &SearchWindow::default())
}

pub fn classify_planar_with(p: f64, window: &SearchWindow) -> Result<Classification> {
    if !(p < -2.0) {
        return Err(HbmError::InvalidDefinition(format!(
            "classification needs p < -2, got {p}"
        )));
    }
    let kmax = (2.0 - p).sqrt().ceil() as usize + 1;
    let mut branches = Vec::new();
    let mut solutions = Vec::new();
    for k in 3..=kmax {
        let sols = solve_planar_branch(p, k, window)?;
        branches.push(BranchCount {
            k,
            count: sols.len(),
        });
        solutions.extend(sols);
    }
    let found: Vec<usize> = branches
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.k)
        .collect();
    let predicted = predicted_branches(p);
    Ok(Classification {
        p,
        matches_prediction: found == predicted,
        branches,
        predicted,
        found,
        solutions,
    })
}
