//! Borel–Laplace resummation of additive difference equations `D(T) f = g` with
//! `T·f(s) = f(s - χ)`.
//!
//! `g` is a finite sum of `c·log((s-a)/(s-b))` and `c/(s-a)^{l+1}`. Its Borel transform is
//! entire, and `f_ψ(s) = ∫_{ray} ĝ(t)/D(e^{χt}) e^{-ts} dt` along `t = r e^{-iψ}`.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{q_to_f64, LaurentPoly, Q};
use crate::qcartan::polynomial_roots;

/// Refuse rays closer than this to a kernel-pole direction.
pub const DELTA_MIN: f64 = 1e-3;
/// Taylor order of the kernel near `t = 0`.
pub const KERNEL_TAYLOR_ORDER: usize = 32;
/// Maximum number of functional-equation steps in a continuation.
pub const MAX_CONTINUATION_DEPTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTerm {
    pub a: C64,
    pub b: C64,
    #[serde(default = "one")]
    pub c: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    pub a: C64,
    pub l: u32,
    #[serde(default = "one")]
    pub c: C64,
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// `g(s) = Σ c log((s-a)/(s-b)) + Σ c/(s-a)^{l+1}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RationalLogInput {
    pub log_terms: Vec<LogTerm>,
    pub pole_terms: Vec<PoleTerm>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl RationalLogInput {
    pub fn is_zero(&self) -> bool {
        self.log_terms.iter().all(|t| t.c == C64::new(0.0, 0.0) || t.a == t.b)
            && self.pole_terms.iter().all(|t| t.c == C64::new(0.0, 0.0))
    }

    pub fn add(&self, other: &RationalLogInput) -> RationalLogInput {
        let mut out = self.clone();
        out.log_terms.extend(other.log_terms.iter().copied());
        out.pole_terms.extend(other.pole_terms.iter().copied());
        out
    }

    pub fn scale(&self, k: C64) -> RationalLogInput {
        RationalLogInput {
            log_terms: self.log_terms.iter().map(|t| LogTerm { c: t.c * k, ..*t }).collect(),
            pole_terms: self.pole_terms.iter().map(|t| PoleTerm { c: t.c * k, ..*t }).collect(),
        }
    }

    /// `g(s + d)`.
    pub fn translate(&self, d: C64) -> RationalLogInput {
        RationalLogInput {
            log_terms: self.log_terms.iter().map(|t| LogTerm { a: t.a - d, b: t.b - d, c: t.c }).collect(),
            pole_terms: self.pole_terms.iter().map(|t| PoleTerm { a: t.a - d, ..*t }).collect(),
        }
    }

    /// `g(-s)`. `log((-s-a)/(-s-b)) = log((s+a)/(s+b))` and `1/(-s-a)^{l+1} = (-1)^{l+1}/(s+a)^{l+1}`.
    pub fn reflect(&self) -> RationalLogInput {
        RationalLogInput {
            log_terms: self.log_terms.iter().map(|t| LogTerm { a: -t.a, b: -t.b, c: t.c }).collect(),
            pole_terms: self
                .pole_terms
                .iter()
                .map(|t| PoleTerm { a: -t.a, l: t.l, c: if t.l % 2 == 0 { -t.c } else { t.c } })
                .collect(),
        }
    }

    /// Principal-branch evaluation.
    pub fn eval(&self, s: C64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.log_terms {
            if t.a == t.b {
                continue;
            }
            let (da, db) = (s - t.a, s - t.b);
            if da.norm() == 0.0 || db.norm() == 0.0 {
                return Err(Error::PoleEncountered { re: s.re, im: s.im });
            }
            let z = da / db;
            let gap = PI - z.arg().abs();
            if gap < 1e-6 {
                return Err(Error::BranchCutProximity(gap));
            }
            acc += t.c * z.ln();
        }
        for t in &self.pole_terms {
            let d = s - t.a;
            if d.norm() < 1e-300 {
                return Err(Error::PoleEncountered { re: s.re, im: s.im });
            }
            acc += t.c / d.powu(t.l + 1);
        }
        Ok(acc)
    }

    /// Coefficients `g_0..=g_n` of `g(s) = Σ g_n s^{-n-1}`.
    pub fn taylor_at_infinity(&self, n: usize) -> Vec<C64> {
        (0..=n)
            .map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for t in &self.log_terms {
                    acc += t.c * (t.b.powu(k as u32 + 1) - t.a.powu(k as u32 + 1)) / (k as f64 + 1.0);
                }
                for t in &self.pole_terms {
                    let l = t.l as usize;
                    if k >= l {
                        acc += t.c * binom(k, l) * t.a.powu((k - l) as u32);
                    }
                }
                acc
            })
            .collect()
    }

    /// Largest modulus among the points `a, b`, at least 1.
    pub fn scale_bound(&self) -> f64 {
        self.log_terms
            .iter()
            .flat_map(|t| [t.a.norm(), t.b.norm()])
            .chain(self.pole_terms.iter().map(|t| t.a.norm()))
            .fold(1.0, f64::max)
    }

    /// Sum of coefficient moduli, used to scale vanishing tolerances.
    pub fn magnitude(&self) -> f64 {
        self.log_terms.iter().map(|t| t.c.norm()).chain(self.pole_terms.iter().map(|t| t.c.norm())).sum()
    }

    /// Check that `g_0 .. g_{k-1}` vanish to `tol` relative to the input's natural scale.
    pub fn check_vanishing(&self, k: usize, tol: f64) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        let g = self.taylor_at_infinity(k - 1);
        let m = self.scale_bound();
        for (n, gn) in g.iter().enumerate() {
            let scale = self.magnitude().max(1e-300) * m.powi(n as i32 + 1);
            if gn.norm() > tol * scale {
                return Err(Error::NotSolvable(format!(
                    "g has a nonzero s^-{} coefficient ({:e}) but D vanishes to order {k}",
                    n + 1,
                    gn.norm()
                )));
            }
        }
        Ok(())
    }
}

/// `ĝ(t) = Σ g_n t^n / n!`, evaluated in closed form.
#[derive(Clone, Debug)]
pub struct BorelKernel {
    pub input: RationalLogInput,
    /// `|ĝ(t)| ≤ c1 e^{c2 |t|}` for `|t| > r`.
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
}

pub fn borel_transform(g: &RationalLogInput) -> BorelKernel {
    let c2 = g.scale_bound() + if g.pole_terms.iter().any(|t| t.l > 0) { 1.0 } else { 0.0 };
    let c1 = g.log_terms.iter().map(|t| 2.0 * t.c.norm()).sum::<f64>() + g.pole_terms.iter().map(|t| t.c.norm()).sum::<f64>();
    BorelKernel { input: g.clone(), c1, c2, r: 1.0 }
}

impl BorelKernel {
    pub fn eval(&self, t: C64) -> C64 {
        self.eval_shifted(t, C64::new(0.0, 0.0))
    }

    /// `ĝ(t) e^{-wt}`, with the exponent folded into each term so that nothing overflows.
    pub fn eval_shifted(&self, t: C64, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for term in &self.input.log_terms {
            let m = term.a.norm().max(term.b.norm()).max(1.0);
            if (t * m).norm() < 1e-2 {
                // (e^{bt} - e^{at})/t by series; the common factor e^{-wt} stays outside
                let mut s = C64::new(0.0, 0.0);
                let mut pw = C64::new(1.0, 0.0);
                for n in 0..12 {
                    s += (term.b.powu(n + 1) - term.a.powu(n + 1)) * pw / factorial(n as usize + 1);
                    pw *= t;
                }
                acc += term.c * s * (-w * t).exp();
            } else {
                acc += term.c * (((term.b - w) * t).exp() - ((term.a - w) * t).exp()) / t;
            }
        }
        for term in &self.input.pole_terms {
            acc += term.c * t.powu(term.l) / factorial(term.l as usize) * ((term.a - w) * t).exp();
        }
        acc
    }

    /// Taylor coefficients `g_n/n!` of `ĝ` at `t = 0`.
    pub fn taylor(&self, order: usize) -> Vec<C64> {
        self.input.taylor_at_infinity(order).into_iter().enumerate().map(|(n, g)| g / factorial(n)).collect()
    }

    /// `max Re(a e^{-iψ})` over all exponents, at least 0: the growth rate along the ray.
    pub fn ray_growth(&self, psi: f64) -> f64 {
        let u = C64::from_polar(1.0, -psi);
        self.input
            .log_terms
            .iter()
            .flat_map(|t| [t.a, t.b])
            .chain(self.input.pole_terms.iter().map(|t| t.a))
            .map(|a| (a * u).re)
            .fold(0.0, f64::max)
    }
}

/// A difference operator with real coefficients `Σ d_r T^r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealDifferenceOperator {
    pub terms: Vec<(i64, f64)>,
}

impl RealDifferenceOperator {
    pub fn new(mut terms: Vec<(i64, f64)>) -> Result<Self> {
        terms.retain(|&(_, c)| c != 0.0);
        terms.sort_by_key(|&(e, _)| e);
        if terms.is_empty() {
            return Err(Error::InvalidData("difference operator is zero".into()));
        }
        Ok(RealDifferenceOperator { terms })
    }

    pub fn from_laurent(p: &LaurentPoly) -> Result<Self> {
        Self::new(p.terms().map(|(e, c)| (e, q_to_f64(c))).collect())
    }

    pub fn min_exp(&self) -> i64 {
        self.terms[0].0
    }

    pub fn max_exp(&self) -> i64 {
        self.terms[self.terms.len() - 1].0
    }

    pub fn coeff(&self, e: i64) -> f64 {
        self.terms.iter().find(|&&(r, _)| r == e).map_or(0.0, |&(_, c)| c)
    }

    /// `Σ d_r r^l`.
    pub fn moment(&self, l: usize) -> f64 {
        self.terms.iter().map(|&(r, c)| c * (r as f64).powi(l as i32)).sum()
    }

    /// Order of vanishing at `T = 1`, with moments compared against their natural scale.
    pub fn order_at_one(&self) -> usize {
        (0..=self.terms.len())
            .find(|&l| {
                let scale: f64 = self.terms.iter().map(|&(r, c)| c.abs() * (r.unsigned_abs() as f64).powi(l as i32)).sum();
                self.moment(l).abs() > 1e-12 * scale.max(1e-300)
            })
            .unwrap_or(self.terms.len())
    }

    /// `Σ d_r f(s - rχ)`.
    pub fn apply(&self, f: impl Fn(C64) -> Result<C64>, s: C64, chi: C64) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for &(r, c) in &self.terms {
            acc += c * f(s - chi * r as f64)?;
        }
        Ok(acc)
    }

    /// Distance from 0 to the nearest nonzero root of `t ↦ D(e^{χt})`.
    pub fn nearest_kernel_pole(&self, chi: C64) -> f64 {
        let exact = LaurentPoly::from_terms(
            self.terms.iter().map(|&(e, c)| (e, Q::from_float(c).expect("finite coefficient"))),
        );
        let mut best = 2.0 * PI;
        for z in polynomial_roots(&exact) {
            if (z - 1.0).norm() > 1e-8 {
                best = best.min(z.ln().norm());
            }
        }
        best / chi.norm()
    }

    /// Taylor coefficients of `D(e^{χt})`.
    fn exp_taylor(&self, chi: C64, order: usize) -> Vec<C64> {
        (0..=order).map(|n| chi.powu(n as u32) * self.moment(n) / factorial(n)).collect()
    }

    /// `D(e^{χt}) e^{-top·χt}` with `top` chosen so that no exponential overflows.
    fn eval_scaled(&self, t: C64, chi: C64, top: i64) -> C64 {
        self.terms.iter().map(|&(r, c)| c * (chi * t * (r - top) as f64).exp()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// The integrand is truncated once `e^{-gap·t}` falls below this.
    pub tail: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { rel_tol: 1e-13, abs_tol: 1e-16, max_panels: 40_000, tail: 1e-18 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eta {
    Up,
    Down,
}

/// The Laplace solver for one equation: `D`, `χ`, the kernel and its Taylor data at 0.
#[derive(Clone, Debug)]
pub struct RaySolver {
    pub d: RealDifferenceOperator,
    pub chi: C64,
    pub kernel: BorelKernel,
    pub settings: QuadSettings,
    /// Margin required beyond the growth rate for a direct Laplace evaluation.
    pub margin: f64,
    k: usize,
    kernel_taylor: Vec<C64>,
    taylor_radius: f64,
}

impl RaySolver {
    pub fn new(d: RealDifferenceOperator, chi: C64, kernel: BorelKernel) -> Result<Self> {
        if chi.norm() == 0.0 {
            return Err(Error::InvalidData("step χ must be nonzero".into()));
        }
        let k = d.order_at_one();
        kernel.input.check_vanishing(k, 1e-9)?;
        let gt = kernel.taylor(KERNEL_TAYLOR_ORDER + k);
        let dt = d.exp_taylor(chi, KERNEL_TAYLOR_ORDER + k);
        // ĝ and D(e^{χt}) both vanish to order k; divide the shifted series.
        let mut kt: Vec<C64> = Vec::with_capacity(KERNEL_TAYLOR_ORDER + 1);
        for j in 0..=KERNEL_TAYLOR_ORDER {
            let mut acc = gt[j + k];
            for (i, ki) in kt.iter().enumerate() {
                acc -= ki * dt[j + k - i];
            }
            kt.push(acc / dt[k]);
        }
        // within a quarter of the kernel's convergence radius the series is accurate to
        // 4^-32; beyond `2/|a|` the closed forms no longer cancel badly
        let radius = (d.nearest_kernel_pole(chi) / 4.0).min(2.0 / kernel.input.scale_bound());
        Ok(RaySolver {
            d,
            chi,
            kernel,
            settings: QuadSettings::default(),
            margin: 1e-2,
            k,
            kernel_taylor: kt,
            taylor_radius: radius,
        })
    }

    pub fn from_input(d: RealDifferenceOperator, chi: C64, g: &RationalLogInput) -> Result<Self> {
        Self::new(d, chi, borel_transform(g))
    }

    /// Order of vanishing of `D` at 1.
    pub fn order(&self) -> usize {
        self.k
    }

    /// Taylor coefficients of `ĝ(t)/D(e^{χt})` at 0. The formal solution is `F_n = n!·K_n`.
    pub fn kernel_taylor(&self) -> &[C64] {
        &self.kernel_taylor
    }

    pub fn formal_coefficients(&self) -> Vec<C64> {
        self.kernel_taylor.iter().enumerate().map(|(n, k)| k * factorial(n)).collect()
    }

    /// `ĝ(t)/D(e^{χt})`.
    pub fn kernel_eval(&self, t: C64) -> C64 {
        self.integrand(t, C64::new(0.0, 0.0), 0.0)
    }

    fn check_ray(&self, psi: f64) -> Result<()> {
        let theta = self.chi.arg();
        for pole_dir in [theta + PI / 2.0, theta - PI / 2.0] {
            let gap = angle_distance(psi, pole_dir);
            if gap < DELTA_MIN {
                return Err(Error::RayTooCloseToKernelPoles { psi, gap });
            }
        }
        Ok(())
    }

    /// Growth rate along `ψ` that `Re(s e^{-iψ})` must exceed.
    pub fn growth(&self, psi: f64) -> f64 {
        self.kernel.ray_growth(psi)
    }

    pub fn in_domain(&self, psi: f64, s: C64) -> bool {
        (s * C64::from_polar(1.0, -psi)).re > self.growth(psi) + self.margin
    }

    /// Integrand `ĝ(t)/D(e^{χt}) · e^{-ts}`, where `psi` only selects the scaling exponent.
    fn integrand(&self, t: C64, s: C64, psi: f64) -> C64 {
        if t.norm() < self.taylor_radius {
            let mut acc = C64::new(0.0, 0.0);
            let mut pw = C64::new(1.0, 0.0);
            for c in &self.kernel_taylor {
                acc += c * pw;
                pw *= t;
            }
            return acc * (-t * s).exp();
        }
        let dir = (self.chi * C64::from_polar(1.0, -psi)).re;
        let top = if dir >= 0.0 { self.d.max_exp() } else { self.d.min_exp() };
        let w = s + self.chi * top as f64;
        self.kernel.eval_shifted(t, w) / self.d.eval_scaled(t, self.chi, top)
    }

    /// `f_ψ(s)` by adaptive Gauss–Kronrod quadrature along `t = r e^{-iψ}`.
    pub fn laplace_solve(&self, psi: f64, s: C64) -> Result<C64> {
        self.check_ray(psi)?;
        let u = C64::from_polar(1.0, -psi);
        let gap = (s * u).re - self.growth(psi);
        if gap <= self.margin {
            return Err(Error::DomainViolation { re: s.re, im: s.im, margin: gap - self.margin });
        }
        if self.kernel.input.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        let f = |r: f64| self.integrand(u * r, s, psi) * u;
        let mut len = -self.settings.tail.ln() / gap;
        // include the kernel's prefactor in the tail estimate
        let pref = self.kernel.c1.max(1.0) / self.d.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max).max(1e-300);
        len += pref.ln().max(0.0) / gap;
        let omega = s.norm() + self.kernel.input.scale_bound() + self.chi.norm() * self.d.max_exp().abs().max(self.d.min_exp().abs()) as f64;
        let (mut val, mut err) = gauss_kronrod_adaptive(&f, 0.0, len, omega, &self.settings)?;
        for _ in 0..8 {
            let tail = f(len).norm() / gap;
            if tail <= 1e-16 * val.norm().max(1e-300) || tail < 1e-300 {
                break;
            }
            let (v2, e2) = gauss_kronrod_adaptive(&f, len, 2.0 * len, omega, &self.settings)?;
            val += v2;
            err += e2;
            len *= 2.0;
        }
        let _ = err;
        Ok(val)
    }

    /// Canonical ray of each fundamental solution.
    pub fn canonical_psi(&self, eta: Eta) -> f64 {
        match eta {
            Eta::Up => self.chi.arg(),
            Eta::Down => self.chi.arg() + PI,
        }
    }

    /// `f^η(s)`: direct Laplace evaluation on the canonical ray when `s` is in its half-plane,
    /// otherwise continuation through the functional equation.
    pub fn evaluate(&self, eta: Eta, s: C64) -> Result<C64> {
        let psi = self.canonical_psi(eta);
        if self.in_domain(psi, s) {
            return self.laplace_solve(psi, s);
        }
        self.continue_to(eta, psi, s)
    }

    /// `f^η(s)` by direct Laplace evaluation along an arbitrary admissible ray.
    pub fn evaluate_on_ray(&self, psi: f64, s: C64) -> Result<C64> {
        self.laplace_solve(psi, s)
    }

    fn continue_to(&self, eta: Eta, psi: f64, s: C64) -> Result<C64> {
        // march along the lattice s + σ jχ until it enters the half-plane
        let sigma = match eta {
            Eta::Up => 1.0,
            Eta::Down => -1.0,
        };
        let step = self.chi * sigma;
        let mut k = 0usize;
        while !self.in_domain(psi, s + step * k as f64) {
            k += 1;
            if k > MAX_CONTINUATION_DEPTH {
                return Err(Error::ContinuationDepth(MAX_CONTINUATION_DEPTH));
            }
        }
        let (pmin, pmax) = (self.d.min_exp(), self.d.max_exp());
        let span = (pmax - pmin) as usize;
        let mut vals = vec![C64::new(0.0, 0.0); k + span];
        for j in k..k + span {
            vals[j] = self.laplace_solve(psi, s + step * j as f64)?;
        }
        let g = &self.kernel.input;
        for j in (0..k).rev() {
            let sj = s + step * j as f64;
            let v = match eta {
                Eta::Up => {
                    // Σ_r d_r f(sj + (pmax - r)χ) = g(sj + pmax χ)
                    let mut acc = g.eval(sj + self.chi * pmax as f64)?;
                    for &(r, c) in &self.d.terms {
                        if r != pmax {
                            acc -= c * vals[j + (pmax - r) as usize];
                        }
                    }
                    acc / self.d.coeff(pmax)
                }
                Eta::Down => {
                    // Σ_r d_r f(sj - (r - pmin)χ) = g(sj + pmin χ)
                    let mut acc = g.eval(sj + self.chi * pmin as f64)?;
                    for &(r, c) in &self.d.terms {
                        if r != pmin {
                            acc -= c * vals[j + (r - pmin) as usize];
                        }
                    }
                    acc / self.d.coeff(pmin)
                }
            };
            if !v.is_finite() {
                return Err(Error::PoleEncountered { re: sj.re, im: sj.im });
            }
            vals[j] = v;
        }
        Ok(vals[0])
    }

    /// `|D(T) f(s) - g(s)|` for the given branch.
    pub fn residual(&self, eta: Eta, s: C64) -> Result<f64> {
        let lhs = self.d.apply(|z| self.evaluate(eta, z), s, self.chi)?;
        Ok((lhs - self.kernel.input.eval(s)?).norm())
    }
}

/// Both fundamental solutions share one solver; this is a convenience constructor.
pub fn fundamental_pair(d: RealDifferenceOperator, chi: C64, g: &RationalLogInput) -> Result<RaySolver> {
    RaySolver::from_input(d, chi, g)
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let x = (a - b).rem_euclid(2.0 * PI);
    x.min(2.0 * PI - x)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Returns the Kronrod value, the Kronrod-Gauss difference, and the integral of `|f|`.
fn gk15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS[7];
    let mut g = fc * G_WEIGHTS[3];
    let mut l1 = fc.norm() * GK_WEIGHTS[7];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let (f1, f2) = (f(c - x), f(c + x));
        k += (f1 + f2) * GK_WEIGHTS[i];
        l1 += (f1.norm() + f2.norm()) * GK_WEIGHTS[i];
        if i % 2 == 1 {
            g += (f1 + f2) * G_WEIGHTS[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm(), l1 * h.abs())
}

/// Rounding in the integrand bounds the attainable error from below.
const NOISE_FACTOR: f64 = 200.0 * f64::EPSILON;

/// Globally adaptive G7–K15 on `[a, b]`. `omega` estimates the oscillation frequency and
/// sets the initial panel width.
pub fn gauss_kronrod_adaptive(
    f: &impl Fn(f64) -> C64,
    a: f64,
    b: f64,
    omega: f64,
    settings: &QuadSettings,
) -> Result<(C64, f64)> {
    let n0 = (((b - a) * omega / PI).ceil() as usize).clamp(4, settings.max_panels / 4);
    let w = (b - a) / n0 as f64;
    let mut panels: Vec<(f64, f64, C64, f64, f64)> = (0..n0)
        .map(|i| {
            let (x0, x1) = (a + w * i as f64, a + w * (i + 1) as f64);
            let (v, e, l1) = gk15(f, x0, x1);
            (x0, x1, v, e, l1)
        })
        .collect();
    loop {
        let total: C64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let l1: f64 = panels.iter().map(|p| p.4).sum();
        if !total.is_finite() {
            return Err(Error::QuadratureFailure { achieved: f64::INFINITY });
        }
        let floor = NOISE_FACTOR * l1;
        if err <= settings.abs_tol.max(settings.rel_tol * total.norm()).max(floor) {
            return Ok((total, err));
        }
        if panels.len() >= settings.max_panels {
            return Err(Error::QuadratureFailure { achieved: err / total.norm().max(1e-300) });
        }
        // split every panel carrying more than its share of the error
        let target = err / panels.len() as f64;
        let mut next = Vec::with_capacity(panels.len() * 2);
        for p in panels {
            if p.3 > target && p.3 > NOISE_FACTOR * p.4 && p.1 - p.0 > 1e-14 * (1.0 + p.0.abs()) {
                let m = 0.5 * (p.0 + p.1);
                let (v1, e1, l1) = gk15(f, p.0, m);
                let (v2, e2, l2) = gk15(f, m, p.1);
                next.push((p.0, m, v1, e1, l1));
                next.push((m, p.1, v2, e2, l2));
            } else {
                next.push(p);
            }
        }
        panels = next;
    }
}

/// Scaled remainders `S_n(r) = max_ψ |s|^{n+1} |f(s) - Σ_{m≤n} F_m s^{-m-1}|` on circles.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub radii: Vec<f64>,
    /// `scaled[n][k]` is `S_n(radii[k])`.
    pub scaled: Vec<Vec<f64>>,
    /// Per order: `S_n` strictly decreasing and shrinking at least like `r^{-1/2}`.
    pub decays: Vec<bool>,
    pub all_decay: bool,
    pub max_residual: f64,
}

pub fn verify_asymptotics(
    f: impl Fn(C64) -> Result<C64>,
    coeffs: &[C64],
    sector: (f64, f64),
    radii: &[f64],
    n_angles: usize,
) -> Result<AsymptoticsReport> {
    let (center, half) = sector;
    let angles: Vec<f64> = if n_angles <= 1 {
        vec![center]
    } else {
        (0..n_angles).map(|k| center - half + 2.0 * half * k as f64 / (n_angles - 1) as f64).collect()
    };
    let mut scaled = vec![vec![0.0; radii.len()]; coeffs.len()];
    for (ri, &r) in radii.iter().enumerate() {
        for &a in &angles {
            let s = C64::from_polar(r, a);
            let fv = f(s)?;
            let mut partial = C64::new(0.0, 0.0);
            for (n, c) in coeffs.iter().enumerate() {
                partial += c / s.powu(n as u32 + 1);
                let v = ((fv - partial) * s.powu(n as u32 + 1)).norm();
                scaled[n][ri] = f64::max(scaled[n][ri], v);
            }
        }
    }
    let decays: Vec<bool> = scaled
        .iter()
        .map(|row| {
            let strictly = row.windows(2).all(|w| w[1] < w[0] || w[0] < 1e-12);
            let first = row[0];
            let last = row[row.len() - 1];
            let rate = (radii[0] / radii[radii.len() - 1]).sqrt();
            strictly && (last <= first * rate || first < 1e-12)
        })
        .collect();
    let max_residual = scaled.iter().flat_map(|r| r.iter().copied()).fold(0.0, f64::max);
    Ok(AsymptoticsReport { radii: radii.to_vec(), all_decay: decays.iter().all(|&d| d), decays, scaled, max_residual })
}

/// Exponent-to-coefficient JSON form of a real difference operator.
pub fn laurent_to_real_terms(p: &LaurentPoly) -> Vec<(i64, f64)> {
    p.terms().map(|(e, c)| (e, q_to_f64(c))).collect()
}

pub fn hbar_to_chi(hbar: C64) -> C64 {
    hbar / 2.0
}

/// `18 ln 10`, the exponent behind the default tail cutoff.
pub const TAIL_EXPONENT: f64 = 18.0 * LN_10;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn d_sinh() -> RealDifferenceOperator {
        RealDifferenceOperator::new(vec![(1, 1.0), (-1, -1.0)]).unwrap()
    }

    /// `D = T - T^{-1}` applied to `1/s`.
    fn manufactured(chi: C64) -> RationalLogInput {
        RationalLogInput {
            log_terms: vec![],
            pole_terms: vec![PoleTerm { a: chi, l: 0, c: one() }, PoleTerm { a: -chi, l: 0, c: -one() }],
        }
    }

    #[test]
    fn borel_examples() {
        let (a, b) = (c(0.3, -0.2), c(-1.1, 0.4));
        let g = RationalLogInput { log_terms: vec![LogTerm { a, b, c: one() }], pole_terms: vec![] };
        let k = borel_transform(&g);
        for t in [c(0.7, 0.1), c(-2.0, 1.0)] {
            let expect = ((b * t).exp() - (a * t).exp()) / t;
            assert!((k.eval(t) - expect).norm() < 1e-12 * expect.norm().max(1.0));
        }
        // the closed form cancels near 0, so compare against the Taylor sum there
        let t = c(1e-5, 2e-6);
        let series: C64 = k.taylor(8).iter().enumerate().map(|(n, x)| x * t.powu(n as u32)).sum();
        assert!((k.eval(t) - series).norm() < 1e-15);
        let g = RationalLogInput { log_terms: vec![], pole_terms: vec![PoleTerm { a, l: 2, c: one() }] };
        let k = borel_transform(&g);
        let t = c(0.9, -0.4);
        let expect = t * t / 2.0 * (a * t).exp();
        assert!((k.eval(t) - expect).norm() < 1e-14);
        assert_eq!(borel_transform(&RationalLogInput::default()).eval(t), c(0.0, 0.0));
    }

    /// Taylor coefficients at infinity against direct evaluation at large `s`.
    #[test]
    fn taylor_at_infinity_matches_evaluation() {
        let g = RationalLogInput {
            log_terms: vec![LogTerm { a: c(0.2, 0.1), b: c(-0.5, 0.3), c: c(2.0, 0.0) }],
            pole_terms: vec![PoleTerm { a: c(0.4, -0.2), l: 1, c: c(0.0, 1.0) }],
        };
        let co = g.taylor_at_infinity(30);
        let s = c(40.0, 13.0);
        let series: C64 = co.iter().enumerate().map(|(n, x)| x / s.powu(n as u32 + 1)).sum();
        assert!((series - g.eval(s).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn manufactured_solution() {
        for chi in [c(0.5, 0.0), c(0.3, 0.4)] {
            let solver = RaySolver::from_input(d_sinh(), chi, &manufactured(chi)).unwrap();
            for s in [c(3.0, 0.5), c(7.0, -4.0), c(1.5, 2.0) * chi / chi.norm() * 2.0] {
                let f = solver.evaluate(Eta::Up, s).unwrap();
                assert!((f - 1.0 / s).norm() < 1e-8 * (1.0 / s).norm(), "χ={chi} s={s} f={f}");
            }
        }
    }

    #[test]
    fn zero_input() {
        let solver = RaySolver::from_input(d_sinh(), c(0.5, 0.0), &RationalLogInput::default()).unwrap();
        assert_eq!(solver.evaluate(Eta::Up, c(2.0, 1.0)).unwrap(), c(0.0, 0.0));
        assert_eq!(solver.evaluate(Eta::Down, c(-2.0, 1.0)).unwrap(), c(0.0, 0.0));
    }

    fn cubic_problem() -> (RealDifferenceOperator, RationalLogInput) {
        // D = (T - T^{-1})^3 vanishes to order 3; the right-hand side must vanish to order 3.
        let d = RealDifferenceOperator::new(vec![(3, 1.0), (1, -3.0), (-1, 3.0), (-3, -1.0)]).unwrap();
        // third finite difference of log((s-a)/(s-b)) kills the s^-1..s^-3 terms
        let base = LogTerm { a: c(0.3, 0.2), b: c(-0.4, 0.1), c: one() };
        let mut g = RationalLogInput::default();
        for (k, w) in [(0, 1.0), (1, -3.0), (2, 3.0), (3, -1.0)] {
            let sh = c(0.25 * k as f64, 0.0);
            g.log_terms.push(LogTerm { a: base.a + sh, b: base.b + sh, c: c(w, 0.0) });
        }
        (d, g)
    }

    #[test]
    fn functional_equation_and_ray_independence() {
        let (d, g) = cubic_problem();
        let chi = c(0.5, 0.0);
        let solver = RaySolver::from_input(d, chi, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let s = c(rng.gen_range(4.0..9.0), rng.gen_range(-5.0..5.0));
            let r = solver.residual(Eta::Up, s).unwrap();
            assert!(r < 1e-8, "s={s} residual {r}");
            let v0 = solver.evaluate_on_ray(0.0, s).unwrap();
            for psi in [-PI / 3.0, PI / 3.0] {
                if solver.in_domain(psi, s) {
                    let v = solver.evaluate_on_ray(psi, s).unwrap();
                    assert!((v - v0).norm() < 1e-8 * v0.norm().max(1e-3), "ψ={psi}");
                }
            }
            let sd = -s;
            let r = solver.residual(Eta::Down, sd).unwrap();
            assert!(r < 1e-8, "down s={sd} residual {r}");
        }
    }

    #[test]
    fn continuation_agrees_with_rotated_ray() {
        let (d, g) = cubic_problem();
        let solver = RaySolver::from_input(d, c(0.5, 0.0), &g).unwrap();
        // Re s is small but s is deep in the half-plane of ψ = π/3
        let s = c(0.2, 6.0);
        assert!(!solver.in_domain(0.0, s));
        let cont = solver.evaluate(Eta::Up, s).unwrap();
        let ray = solver.evaluate_on_ray(PI / 3.0, s).unwrap();
        assert!((cont - ray).norm() < 1e-7 * ray.norm().max(1e-3), "{cont} vs {ray}");
    }

    #[test]
    fn refuses_anti_stokes_rays_and_bad_domains() {
        let (d, g) = cubic_problem();
        let solver = RaySolver::from_input(d, c(0.5, 0.0), &g).unwrap();
        assert!(matches!(solver.laplace_solve(PI / 2.0, c(0.0, 5.0)), Err(Error::RayTooCloseToKernelPoles { .. })));
        assert!(matches!(solver.laplace_solve(0.0, c(-1.0, 0.0)), Err(Error::DomainViolation { .. })));
        let far = c(-200.0, 0.0);
        assert!(matches!(solver.evaluate(Eta::Up, far), Err(Error::ContinuationDepth(_))));
    }

    #[test]
    fn nonvanishing_input_is_rejected() {
        let (d, _) = cubic_problem();
        let g = RationalLogInput { log_terms: vec![LogTerm { a: c(0.0, 0.0), b: c(1.0, 0.0), c: one() }], pole_terms: vec![] };
        assert!(matches!(RaySolver::from_input(d, c(0.5, 0.0), &g), Err(Error::NotSolvable(_))));
    }

    #[test]
    fn watson_detects_wrong_coefficient() {
        let f = |s: C64| Ok(1.0 / s);
        let ok = verify_asymptotics(f, &[one(), c(0.0, 0.0), c(0.0, 0.0)], (0.0, 0.5), &[5.0, 10.0, 20.0], 3).unwrap();
        assert!(ok.max_residual < 1e-8 && ok.all_decay);
        let (d, g) = cubic_problem();
        let solver = RaySolver::from_input(d, c(0.5, 0.0), &g).unwrap();
        let coeffs: Vec<C64> = solver.formal_coefficients()[..6].to_vec();
        let eval = |s: C64| solver.evaluate(Eta::Up, s);
        let rep = verify_asymptotics(eval, &coeffs, (0.0, 0.6), &[6.0, 9.0, 13.0, 19.0], 3).unwrap();
        assert!(rep.all_decay, "{:?}", rep.scaled);
        let mut bad = coeffs.clone();
        bad[1] += c(0.05, 0.0);
        let rep = verify_asymptotics(eval, &bad, (0.0, 0.6), &[6.0, 9.0, 13.0, 19.0], 3).unwrap();
        assert!(!rep.decays[1]);
    }

    /// The kernel Taylor coefficients reproduce the exact formal solution of the
    /// difference equation, computed here by back-substitution.
    #[test]
    fn kernel_taylor_is_formal_solution() {
        let (d, g) = cubic_problem();
        let chi = c(0.5, 0.0);
        let solver = RaySolver::from_input(d.clone(), chi, &g).unwrap();
        let n = 10;
        let gs = g.taylor_at_infinity(n + 3);
        let mut f: Vec<C64> = Vec::new();
        for m in 3..=n + 3 {
            let mut acc = gs[m];
            for l in 4..=m {
                acc -= binom(m, l) * chi.powu(l as u32) * d.moment(l) * f[m - l];
            }
            f.push(acc / (binom(m, 3) * chi.powu(3) * d.moment(3)));
        }
        let fc = solver.formal_coefficients();
        for k in 0..=n {
            assert!((fc[k] - f[k]).norm() < 1e-9 * f[k].norm().max(1e-6), "n={k}: {} vs {}", fc[k], f[k]);
        }
    }

    #[test]
    fn reflect_and_translate() {
        let g = RationalLogInput {
            log_terms: vec![LogTerm { a: c(0.2, 0.1), b: c(-0.5, 0.3), c: c(2.0, 0.0) }],
            pole_terms: vec![PoleTerm { a: c(0.4, -0.2), l: 1, c: c(0.0, 1.0) }],
        };
        let s = c(3.0, 1.0);
        assert!((g.reflect().eval(s).unwrap() - g.eval(-s).unwrap()).norm() < 1e-14);
        let d = c(0.7, -0.2);
        assert!((g.translate(d).eval(s).unwrap() - g.eval(s + d).unwrap()).norm() < 1e-14);
    }
}
