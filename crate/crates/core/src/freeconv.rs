//! The deformed semicircle law `ρ_fc = ρ_sc ⊞ ν^ϑ`.
//!
//! Its Stieltjes transform `m` is the unique solution with `Im m > 0` of
//!
//! ```text
//! m(z) = ∫ dν(x) / (ϑx − z − m(z)),      Im z > 0.
//! ```
//!
//! With `s_k = ∫ dν(x) / (ϑx − z − m)^k`, implicit differentiation gives
//! `m' = s₂/(1 − s₂)`, hence `1 + m' = 1/(1 − s₂)`, and `m'' = 2 s₃ (1 + m')³`.
//! The support edges are found through the inverse map `z(ξ) = ξ − m_{ν^ϑ}(ξ)`
//! on the real axis: edges sit where `∫ dν^ϑ(x)/(x − ξ)² = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atoms, Deformation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on `|m − F(m)|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `ω` of the fixed-point step `m ← (1−ω)m + ωF(m)`.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

/// Converged solution of the self-consistent equation at one spectral point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub m: Complex64,
    /// `∫ dν(x) / (ϑx − z − m)²`
    pub s2: Complex64,
    /// `∫ dν(x) / (ϑx − z − m)³`
    pub s3: Complex64,
    /// `m'(z)`
    pub m1: Complex64,
    /// `m''(z)`
    pub m2: Complex64,
    pub residual: f64,
    pub iterations: usize,
    /// Refinement level of the integration rule the solution was computed on.
    pub level: u32,
}

impl StieltjesSolution {
    fn conjugated(self) -> Self {
        Self {
            z: self.z.conj(),
            m: self.m.conj(),
            s2: self.s2.conj(),
            s3: self.s3.conj(),
            m1: self.m1.conj(),
            m2: self.m2.conj(),
            ..self
        }
    }

    /// `z + m(z)`
    pub fn omega(&self) -> Complex64 {
        self.z + self.m
    }
}

/// Support `[L₋, L₊]` of `ρ_fc` and the edge parameters `ξ±`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub l_minus: f64,
    pub l_plus: f64,
    pub xi_minus: f64,
    pub xi_plus: f64,
}

/// `I(z₁, z₂) = ∫ dν(x) / ((ϑx − z₁ − m₁)(ϑx − z₂ − m₂))` and its partials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IKernelValue {
    pub z1: Complex64,
    pub z2: Complex64,
    pub i: Complex64,
    pub d_i_dz1: Complex64,
    pub d_i_dz2: Complex64,
    /// `∂²I / ∂z₁∂z₂`
    pub d2_i: Complex64,
}

/// Stieltjes transform of the semicircle law.
pub fn m_sc(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z.im < 0.0 {
        return m_sc(z.conj()).conj();
    }
    // sqrt(z−2)·sqrt(z+2) has its cut on [−2, 2] only and behaves like z at
    // infinity; m = −2/(z + s) is the root of m² + zm + 1 = 0 that decays.
    let s = (z - 2.0 * one).sqrt() * (z + 2.0 * one).sqrt();
    -2.0 / (z + s)
}

/// Solver for `m_fc^ϑ` bound to one deformation law and coupling.
pub struct FreeConvolution<'a, D: Deformation + ?Sized> {
    law: &'a D,
    theta: f64,
    opts: SolverOptions,
    rules: Vec<Atoms>,
}

impl<'a, D: Deformation + ?Sized> FreeConvolution<'a, D> {
    pub fn new(law: &'a D, theta: f64) -> Result<Self> {
        Self::with_options(law, theta, SolverOptions::default())
    }

    pub fn with_options(law: &'a D, theta: f64, opts: SolverOptions) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::Domain(format!("coupling must be finite and >= 0, got {theta}")));
        }
        if !(opts.tol > 0.0 && opts.damping > 0.0 && opts.damping <= 1.0 && opts.max_iter > 0) {
            return Err(Error::Domain(format!("invalid solver options {opts:?}")));
        }
        let rules = (0..=law.max_level()).map(|l| law.atoms(l)).collect();
        Ok(Self {
            law,
            theta,
            opts,
            rules,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn law(&self) -> &'a D {
        self.law
    }

    pub fn options(&self) -> SolverOptions {
        self.opts
    }

    /// Integration rule at a refinement level.
    pub fn rule(&self, level: u32) -> &Atoms {
        &self.rules[(level as usize).min(self.rules.len() - 1)]
    }

    fn eval(&self, atoms: &Atoms, z: Complex64, m: Complex64) -> (Complex64, Complex64) {
        let omega = z + m;
        let mut f_sum = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        for (p, w) in atoms.points.iter().zip(&atoms.weights) {
            let f = 1.0 / (self.theta * p - omega);
            f_sum += w * f;
            s2 += w * f * f;
        }
        (f_sum, s2)
    }

    /// Solves at `z`, starting from `m_sc(z)`.
    pub fn solve(&self, z: Complex64) -> Result<StieltjesSolution> {
        self.solve_from(z, None)
    }

    /// Solves at `z`, warm-started from `guess` when given. Points in the
    /// lower half plane are solved by reflection `m(z̄) = conj m(z)`.
    pub fn solve_from(&self, z: Complex64, guess: Option<Complex64>) -> Result<StieltjesSolution> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite spectral parameter {z}")));
        }
        if z.im < 0.0 {
            return Ok(self.solve_from(z.conj(), guess.map(|g| g.conj()))?.conjugated());
        }
        let mut m = match guess {
            Some(g) if g.im >= 0.0 && g.re.is_finite() && g.im.is_finite() => g,
            _ => m_sc(z),
        };
        if z.im == 0.0 {
            // Real z outside the support: the solution is real.
            m = Complex64::new(m.re, 0.0);
        }
        let top = self.rules.len() - 1;
        let mut level = 0;
        let mut iterations = 0;
        loop {
            let (next, it) = self.iterate(&self.rules[level], z, m)?;
            m = next;
            iterations += it;
            if level == top {
                break;
            }
            let (f_fine, _) = self.eval(&self.rules[level + 1], z, m);
            if (f_fine - m).norm() <= self.opts.tol {
                break;
            }
            level += 1;
        }
        let atoms = &self.rules[level];
        let omega = z + m;
        let mut f_sum = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut s3 = Complex64::new(0.0, 0.0);
        for (p, w) in atoms.points.iter().zip(&atoms.weights) {
            let f = 1.0 / (self.theta * p - omega);
            let f2 = f * f;
            f_sum += w * f;
            s2 += w * f2;
            s3 += w * f2 * f;
        }
        if z.im == 0.0 && !(s2.re < 1.0) {
            // Real fixed points with s₂ ≥ 1 are spurious: outside the support
            // m' = ∫ dρ/(x − z)² > 0 forces 0 < s₂ < 1.
            return Err(Error::Domain(format!("z = {} lies inside the support of the deformed law", z.re)));
        }
        let m1 = s2 / (1.0 - s2);
        let one_plus = 1.0 + m1;
        let m2 = 2.0 * s3 * one_plus * one_plus * one_plus;
        Ok(StieltjesSolution {
            z,
            m,
            s2,
            s3,
            m1,
            m2,
            residual: (f_sum - m).norm(),
            iterations,
            level: level as u32,
        })
    }

    /// Damped fixed-point iteration with safeguarded Newton steps on
    /// `G(m) = m − F(m)`, `G'(m) = 1 − s₂`.
    fn iterate(&self, atoms: &Atoms, z: Complex64, m0: Complex64) -> Result<(Complex64, usize)> {
        let upper = z.im > 0.0;
        let mut m = m0;
        let (mut f, mut s2) = self.eval(atoms, z, m);
        let mut r = (f - m).norm();
        let mut omega = self.opts.damping;
        for it in 0..self.opts.max_iter {
            if r <= self.opts.tol {
                return Ok((m, it));
            }
            let denom = 1.0 - s2;
            let newton = m - (m - f) / denom;
            let mut accepted = false;
            if newton.re.is_finite() && newton.im.is_finite() && (!upper || newton.im > 0.0) {
                let (fc, s2c) = self.eval(atoms, z, newton);
                let rc = (fc - newton).norm();
                if rc < r {
                    m = newton;
                    f = fc;
                    s2 = s2c;
                    r = rc;
                    accepted = true;
                }
            }
            if !accepted {
                let cand = (1.0 - omega) * m + omega * f;
                if upper && cand.im <= 0.0 {
                    return Err(Error::NonHerglotz { z });
                }
                let (fc, s2c) = self.eval(atoms, z, cand);
                let rc = (fc - cand).norm();
                if rc > r {
                    omega = (0.5 * omega).max(1.0 / 1024.0);
                }
                m = cand;
                f = fc;
                s2 = s2c;
                r = rc;
            }
        }
        if r <= self.opts.tol {
            return Ok((m, self.opts.max_iter));
        }
        Err(Error::NoConvergence {
            op: "solve_mfc",
            iterations: self.opts.max_iter,
            residual: r,
        })
    }

    /// Density `(1/π) Im m(E + iη)` at `η = eta_floor`, reached by halving
    /// `η` from 1 with warm starts. Values below `10·eta_floor` are
    /// reported as 0.
    pub fn density(&self, e: f64, eta_floor: f64) -> Result<f64> {
        if !(1e-9..=1e-3).contains(&eta_floor) {
            return Err(Error::Domain(format!("eta_floor must lie in [1e-9, 1e-3], got {eta_floor}")));
        }
        let mut guess = None;
        let mut k = 0;
        let m = loop {
            let eta = f64::max(eta_floor, 0.5f64.powi(k));
            let sol = self.solve_from(Complex64::new(e, eta), guess)?;
            if eta == eta_floor {
                break sol.m;
            }
            guess = Some(sol.m);
            k += 1;
        };
        let rho = m.im / PI;
        Ok(if rho < 10.0 * eta_floor { 0.0 } else { rho })
    }

    /// Support edges via the real inverse map.
    pub fn edges(&self) -> Result<SupportInterval> {
        let theta = self.theta;
        if theta > 0.0 {
            let (argmin, g) = self.law.regularity_profile();
            if g <= theta * theta {
                return Err(Error::EdgeNotBracketed {
                    side: "interior",
                    reason: format!(
                        "inverse-square moment of the scaled measure drops to {:.6} <= 1 near x = {:.6}; \
                         the support may split",
                        g / (theta * theta),
                        theta * argmin
                    ),
                });
            }
        }
        let (smin, smax) = self.law.support();
        let h = |xi: f64| self.law.edge_moment(theta, xi) - 1.0;

        let xi_plus = {
            let (mut lo, mut hi) = (theta * smax + 1e-12, theta * smax + 1e3);
            if !(h(lo) > 0.0 && h(hi) < 0.0) {
                return Err(Error::EdgeNotBracketed {
                    side: "right",
                    reason: format!("edge function has no sign change on [{lo}, {hi}]"),
                });
            }
            bisect(&h, &mut lo, &mut hi, true)
        };
        let xi_minus = {
            let (mut lo, mut hi) = (theta * smin - 1e3, theta * smin - 1e-12);
            if !(h(lo) < 0.0 && h(hi) > 0.0) {
                return Err(Error::EdgeNotBracketed {
                    side: "left",
                    reason: format!("edge function has no sign change on [{lo}, {hi}]"),
                });
            }
            bisect(&h, &mut lo, &mut hi, false)
        };
        let l_plus = xi_plus - self.law.stieltjes(theta, Complex64::new(xi_plus, 0.0))?.re;
        let l_minus = xi_minus - self.law.stieltjes(theta, Complex64::new(xi_minus, 0.0))?.re;
        Ok(SupportInterval {
            l_minus,
            l_plus,
            xi_minus,
            xi_plus,
        })
    }

    /// `f_k = 1/(ϑ p_k − z − m)` on the nodes of `rule(level)`.
    pub fn resolvent_profile(&self, sol: &StieltjesSolution, level: u32) -> Vec<Complex64> {
        let omega = sol.omega();
        self.rule(level)
            .points
            .iter()
            .map(|p| 1.0 / (self.theta * p - omega))
            .collect()
    }

    /// `I(z₁, z₂)` with its partials, from converged solutions.
    pub fn kernel_from(&self, a: &StieltjesSolution, b: &StieltjesSolution) -> IKernelValue {
        let level = a.level.max(b.level);
        let fa = self.resolvent_profile(a, level);
        let fb = self.resolvent_profile(b, level);
        kernel_terms(&self.rule(level).weights, a, &fa, b, &fb)
    }

    pub fn i_kernel(&self, z1: Complex64, z2: Complex64) -> Result<IKernelValue> {
        let a = self.solve(z1)?;
        let b = self.solve(z2)?;
        Ok(self.kernel_from(&a, &b))
    }
}

/// Kernel sums given resolvent profiles on a common rule.
pub fn kernel_terms(
    weights: &[f64],
    a: &StieltjesSolution,
    fa: &[Complex64],
    b: &StieltjesSolution,
    fb: &[Complex64],
) -> IKernelValue {
    let mut i = Complex64::new(0.0, 0.0);
    let mut i_aab = Complex64::new(0.0, 0.0);
    let mut i_abb = Complex64::new(0.0, 0.0);
    let mut i_aabb = Complex64::new(0.0, 0.0);
    for ((w, x), y) in weights.iter().zip(fa).zip(fb) {
        let xy = x * y;
        i += w * xy;
        i_aab += w * xy * x;
        i_abb += w * xy * y;
        i_aabb += w * xy * xy;
    }
    let ga = 1.0 + a.m1;
    let gb = 1.0 + b.m1;
    IKernelValue {
        z1: a.z,
        z2: b.z,
        i,
        d_i_dz1: ga * i_aab,
        d_i_dz2: gb * i_abb,
        d2_i: ga * gb * i_aabb,
    }
}

/// Bisection to machine precision; `decreasing` tells which end is positive.
fn bisect<F: Fn(f64) -> f64>(h: &F, lo: &mut f64, hi: &mut f64, decreasing: bool) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (*lo + *hi);
        if mid <= *lo || mid >= *hi {
            break;
        }
        let positive = h(mid) > 0.0;
        if positive == decreasing {
            *lo = mid;
        } else {
            *hi = mid;
        }
    }
    0.5 * (*lo + *hi)
}

pub fn solve_mfc<D: Deformation + ?Sized>(
    law: &D,
    theta: f64,
    z: Complex64,
    opts: SolverOptions,
) -> Result<StieltjesSolution> {
    FreeConvolution::with_options(law, theta, opts)?.solve(z)
}

pub fn density<D: Deformation + ?Sized>(law: &D, theta: f64, e: f64, eta_floor: f64) -> Result<f64> {
    FreeConvolution::new(law, theta)?.density(e, eta_floor)
}

pub fn support_edges<D: Deformation + ?Sized>(law: &D, theta: f64) -> Result<SupportInterval> {
    FreeConvolution::new(law, theta)?.edges()
}

pub fn i_kernel<D: Deformation + ?Sized>(
    law: &D,
    theta: f64,
    z1: Complex64,
    z2: Complex64,
) -> Result<IKernelValue> {
    FreeConvolution::new(law, theta)?.i_kernel(z1, z2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{quantile_diag, SpectralMeasure};
    use crate::quadrature::integrate_adaptive;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_point() -> SpectralMeasure {
        SpectralMeasure::two_point(0.5).unwrap()
    }

    /// Roots of the monic cubic m³ + 2z m² + (z² − c² + 1) m + z, obtained by
    /// clearing denominators in m = ½[1/(−c−z−m) + 1/(c−z−m)] with c = ϑa,
    /// via eigenvalues of the companion matrix.
    fn cubic_oracle(a: f64, theta: f64, z: Complex64) -> Complex64 {
        let cc = theta * a;
        let coeffs = [z, z * z - cc * cc + 1.0, 2.0 * z]; // c0, c1, c2
        let comp = faer::Mat::<Complex64>::from_fn(3, 3, |i, j| {
            if j == 2 {
                -coeffs[i]
            } else if i == j + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let roots = comp.eigenvalues().unwrap();
        let upper: Vec<Complex64> = roots.into_iter().filter(|r| r.im > 0.0).collect();
        assert_eq!(upper.len(), 1, "exactly one Herglotz root expected");
        upper[0]
    }

    #[test]
    fn semicircle_closed_form() {
        let s = solve_mfc(&two_point(), 0.0, c(0.0, 1.0), SolverOptions::default()).unwrap();
        assert!((s.m - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-12);
        let s = solve_mfc(&two_point(), 0.0, c(0.0, 2.0), SolverOptions::default()).unwrap();
        assert!((s.m - c(0.0, 2f64.sqrt() - 1.0)).norm() < 1e-12);
        assert!(s.residual <= 1e-12);
    }

    #[test]
    fn m_sc_solves_quadratic() {
        for z in [c(0.3, 0.01), c(-3.0, 0.0), c(3.0, 0.0), c(1.0, 2.0), c(0.0, 1e-9), c(-1.0, -0.5)] {
            let m = m_sc(z);
            assert!((m * m + z * m + 1.0).norm() < 1e-12, "z={z}");
            if z.im > 0.0 {
                assert!(m.im > 0.0);
            }
        }
        assert!(m_sc(c(-3.0, 0.0)).re > 0.0);
    }

    #[test]
    fn two_point_matches_cubic_companion_oracle() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 1.0).unwrap();
        for z in [c(0.0, 1.0), c(1.3, 0.05), c(-2.0, 0.5), c(0.2, 3.0)] {
            let s = fc.solve(z).unwrap();
            let want = cubic_oracle(0.5, 1.0, z);
            assert!((s.m - want).norm() < 1e-10, "z={z}: {} vs {want}", s.m);
        }
    }

    #[test]
    fn derivative_identities_hold_by_construction() {
        let law = two_point();
        let s = solve_mfc(&law, 1.0, c(0.4, 0.7), SolverOptions::default()).unwrap();
        assert!((1.0 + s.m1 - 1.0 / (1.0 - s.s2)).norm() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let u = SpectralMeasure::uniform(0.5).unwrap();
        let t = two_point();
        let laws: [(&dyn Deformation, f64); 2] = [(&t, 1.0), (&u, 0.3)];
        for (law, theta) in laws {
            let fc = FreeConvolution::new(law, theta).unwrap();
            for z in [c(0.5, 0.6), c(-2.4, 0.3), c(1.0, 1.5)] {
                let s = fc.solve(z).unwrap();
                let h = 1e-4;
                let mp = fc.solve(z + h).unwrap().m;
                let mm = fc.solve(z - h).unwrap().m;
                let d1 = (mp - mm) / (2.0 * h);
                assert!((d1 - s.m1).norm() < 1e-7 * (1.0 + s.m1.norm()), "m' at {z}");
                let h = 1e-3;
                let mp = fc.solve(z + h).unwrap().m;
                let mm = fc.solve(z - h).unwrap().m;
                let d2 = (mp - 2.0 * s.m + mm) / (h * h);
                assert!((d2 - s.m2).norm() < 1e-5 * (1.0 + s.m2.norm()), "m'' at {z}");
            }
        }
    }

    #[test]
    fn semicircle_third_power_identity() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 0.0).unwrap();
        for z in [c(0.0, 1.0), c(1.5, 0.4), c(-3.0, 0.2)] {
            let s = fc.solve(z).unwrap();
            let rhs = 0.5 * s.m2 / (1.0 + s.m1).powi(3);
            assert!((s.m.powi(3) - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn reflection_in_lower_half_plane() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 1.0).unwrap();
        let up = fc.solve(c(0.3, 0.8)).unwrap();
        let down = fc.solve(c(0.3, -0.8)).unwrap();
        assert_eq!(down.m, up.m.conj());
        assert_eq!(down.m2, up.m2.conj());
    }

    #[test]
    fn real_point_outside_support_is_real() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 1.0).unwrap();
        let s = fc.solve(c(4.0, 0.0)).unwrap();
        assert_eq!(s.m.im, 0.0);
        assert!(s.m.re < 0.0);
        assert!(matches!(fc.solve(c(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn semicircle_density() {
        let law = two_point();
        let rho0 = density(&law, 0.0, 0.0, 1e-9).unwrap();
        assert!((rho0 - 1.0 / PI).abs() < 1e-8);
        for e in [-2.5, 2.5] {
            assert!(density(&law, 0.0, e, 1e-6).unwrap() < 1e-4);
        }
        let e: f64 = 1.2;
        let want = (4.0 - e * e).sqrt() / (2.0 * PI);
        assert!((density(&law, 0.0, e, 1e-9).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn density_rejects_bad_floor() {
        assert!(matches!(density(&two_point(), 0.0, 0.0, 1e-12), Err(Error::Domain(_))));
    }

    #[test]
    fn semicircle_edges() {
        let e = support_edges(&two_point(), 0.0).unwrap();
        assert!((e.l_plus - 2.0).abs() < 1e-10);
        assert!((e.l_minus + 2.0).abs() < 1e-10);
        assert!((e.xi_plus - 1.0).abs() < 1e-10);
        assert!((e.xi_minus + 1.0).abs() < 1e-10);
    }

    #[test]
    fn deformed_edges_match_density() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 1.0).unwrap();
        let e = fc.edges().unwrap();
        assert!(e.l_minus < 0.0 && 0.0 < e.l_plus);
        assert!((e.l_plus + e.l_minus).abs() < 1e-10, "symmetric law");
        assert!(fc.density(e.l_plus - 1e-3, 1e-9).unwrap() > 0.0);
        assert!(fc.density(e.l_minus + 1e-3, 1e-9).unwrap() > 0.0);
        assert!(fc.density(e.l_plus + 1e-3, 1e-9).unwrap() < 1e-6);
        assert!(fc.density(e.l_minus - 1e-3, 1e-9).unwrap() < 1e-6);
    }

    fn moment_by_density<D: Deformation + ?Sized>(law: &D, theta: f64, k: i32) -> f64 {
        let fc = FreeConvolution::new(law, theta).unwrap();
        let e = fc.edges().unwrap();
        let half = 0.5 * (e.l_plus - e.l_minus);
        // E = L₋ + half(1 − cos t) smooths the square-root edges.
        let (v, _) = integrate_adaptive(
            |t| {
                let x = e.l_minus + half * (1.0 - t.cos());
                Ok(fc.density(x, 1e-9)? * x.powi(k) * half * t.sin())
            },
            0.0,
            PI,
            1e-11,
            500,
        )
        .unwrap();
        v
    }

    #[test]
    fn mass_and_variance_two_point() {
        let law = two_point();
        assert!((moment_by_density(&law, 1.0, 0) - 1.0).abs() < 1e-6);
        assert!((moment_by_density(&law, 1.0, 2) - 1.25).abs() < 1e-6);
    }

    #[test]
    fn uniform_variance_adds() {
        let law = SpectralMeasure::uniform(0.5).unwrap();
        let theta: f64 = 0.3;
        let want = 1.0 + theta * theta * 0.25 / 3.0;
        assert!((moment_by_density(&law, theta, 2) - want).abs() < 1e-6);
    }

    #[test]
    fn split_support_is_refused() {
        let law = SpectralMeasure::two_point(2.0).unwrap();
        let err = support_edges(&law, 1.0).unwrap_err();
        assert!(matches!(err, Error::EdgeNotBracketed { .. }));
    }

    #[test]
    fn kernel_at_zero_coupling_is_product() {
        let law = two_point();
        let k = i_kernel(&law, 0.0, c(0.0, 1.0), c(0.0, 1.0)).unwrap();
        let r = (5f64.sqrt() - 1.0) / 2.0;
        assert!((k.i - c(-r * r, 0.0)).norm() < 1e-12);
        let (z1, z2) = (c(0.7, 0.4), c(-1.0, -0.9));
        let k = i_kernel(&law, 0.0, z1, z2).unwrap();
        assert!((k.i - m_sc(z1) * m_sc(z2)).norm() < 1e-12);
    }

    #[test]
    fn kernel_partials_match_finite_differences() {
        let law = two_point();
        let fc = FreeConvolution::new(&law, 0.5).unwrap();
        let (z1, z2) = (c(0.4, 0.7), c(-1.2, -0.5));
        let k = fc.i_kernel(z1, z2).unwrap();
        let i = |a: Complex64, b: Complex64| fc.i_kernel(a, b).unwrap().i;
        let h = 1e-5;
        let d1 = (i(z1 + h, z2) - i(z1 - h, z2)) / (2.0 * h);
        let d2 = (i(z1, z2 + h) - i(z1, z2 - h)) / (2.0 * h);
        assert!((d1 - k.d_i_dz1).norm() < 1e-6 * k.d_i_dz1.norm());
        assert!((d2 - k.d_i_dz2).norm() < 1e-6 * k.d_i_dz2.norm());
        let h = 1e-4;
        let d12 = (i(z1 + h, z2 + h) - i(z1 + h, z2 - h) - i(z1 - h, z2 + h) + i(z1 - h, z2 - h)) / (4.0 * h * h);
        assert!((d12 - k.d2_i).norm() < 1e-6 * k.d2_i.norm());
    }

    #[test]
    fn empirical_solution_approaches_limit() {
        let law = SpectralMeasure::uniform(0.5).unwrap();
        let limit = FreeConvolution::new(&law, 0.8).unwrap();
        let pts = [c(0.0, 0.5), c(1.5, 0.5), c(-2.5, 0.2), c(2.6, 0.0)];
        let dev = |n: usize| {
            let d = quantile_diag(&law, n);
            let emp = FreeConvolution::new(&d, 0.8).unwrap();
            pts.iter()
                .map(|&z| (emp.solve(z).unwrap().m - limit.solve(z).unwrap().m).norm())
                .fold(0.0, f64::max)
        };
        let (a, b, d) = (dev(50), dev(200), dev(800));
        assert!(a > b && b > d, "{a} {b} {d}");
    }
}
