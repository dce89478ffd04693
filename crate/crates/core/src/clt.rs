//! Limiting mean and variance of linear spectral statistics.
//!
//! For `φ` analytic around the support,
//!
//! ```text
//! M(φ) = −(1/2πi) ∮ φ(z) b(z) dz
//! V(φ) = (1/2πi)² ∮∮ φ(z₁) φ(z₂) Γ(z₁, z₂) dz₁ dz₂
//! Ṽ(φ) = (1/2πi)² ϑ⁻² ∮∮ φ(z₁) φ(z₂) (1 + m'(z₁))(1 + m'(z₂)) (I(z₁, z₂) − m(z₁) m(z₂)) dz₁ dz₂
//! ```
//!
//! over a counterclockwise rectangle enclosing `[L₋, L₊]`, with
//!
//! ```text
//! b = ½ m'' / (1 + m')² · [(w₂ − 1) + m' + (W₄ − 3) m'/(1 + m')]
//! Γ = ∂₁∂₂ [(w₂ − 2) I + ½(W₄ − 3) I² − 2 log(1 − I)]
//! ```

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeconv::{kernel_terms, FreeConvolution, IKernelValue, StieltjesSolution, SupportInterval};
use crate::measures::Deformation;
use crate::quadrature::{gauss_legendre, pairwise_sum, pairwise_sum_complex, periodic_mean};

const MAX_POLY_DEGREE: usize = 16;
const TAU_NODES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `Σ c_k x^k`, ascending powers.
    Polynomial { coeffs: Vec<f64> },
    /// `A (1 − t²)³` for `|t| < 1`, `t = (x − c)/h`; C² with compact support.
    SmoothBump {
        center: f64,
        halfwidth: f64,
        amplitude: f64,
    },
}

impl TestFunction {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("polynomial needs at least one coefficient".into()));
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::Domain(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        Ok(TestFunction::Polynomial { coeffs })
    }

    /// `x^k`
    pub fn monomial(k: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self::polynomial(coeffs)
    }

    pub fn bump(center: f64, halfwidth: f64, amplitude: f64) -> Result<Self> {
        if !(center.is_finite() && amplitude.is_finite() && halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(Error::Domain(format!(
                "bump needs finite center/amplitude and halfwidth > 0, got ({center}, {halfwidth}, {amplitude})"
            )));
        }
        Ok(TestFunction::SmoothBump {
            center,
            halfwidth,
            amplitude,
        })
    }

    /// Parses `poly:c0,c1,...` or `bump:center,halfwidth,amplitude`.
    pub fn parse(desc: &str) -> Result<Self> {
        let (kind, rest) = desc
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("test function `{desc}`: expected `poly:...` or `bump:...`")))?;
        let nums = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("test function `{desc}`: `{t}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match kind {
            "poly" => Self::polynomial(nums),
            "bump" => match nums[..] {
                [c, h, a] => Self::bump(c, h, a),
                _ => Err(Error::Parse(format!("test function `{desc}`: bump takes three numbers"))),
            },
            _ => Err(Error::Parse(format!("test function `{desc}`: unknown kind `{kind}`"))),
        }
    }

    pub fn descriptor(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
        match self {
            TestFunction::Polynomial { coeffs } => format!("poly:{}", join(coeffs)),
            TestFunction::SmoothBump {
                center,
                halfwidth,
                amplitude,
            } => format!("bump:{}", join(&[*center, *halfwidth, *amplitude])),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, TestFunction::Polynomial { .. })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            TestFunction::SmoothBump {
                center,
                halfwidth,
                amplitude,
            } => {
                let t = (x - center) / halfwidth;
                if t.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - t * t).powi(3)
                }
            }
        }
    }

    /// Value at a complex point; `None` for non-analytic functions.
    pub fn eval_complex(&self, z: Complex64) -> Option<Complex64> {
        match self {
            TestFunction::Polynomial { coeffs } => Some(
                coeffs
                    .iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c),
            ),
            TestFunction::SmoothBump { .. } => None,
        }
    }

    /// Support of a bump, `None` for polynomials.
    pub fn compact_support(&self) -> Option<(f64, f64)> {
        match self {
            TestFunction::SmoothBump { center, halfwidth, .. } => Some((center - halfwidth, center + halfwidth)),
            TestFunction::Polynomial { .. } => None,
        }
    }

    fn require_analytic(&self) -> Result<()> {
        if self.is_analytic() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} is not analytic; contour formulas need a polynomial",
                self.descriptor()
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourNode {
    pub z: Complex64,
    /// Quadrature weight including `dz`.
    pub w: Complex64,
    pub side: Side,
}

/// Counterclockwise rectangle with vertices `a± ± i v0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    pub a_minus: f64,
    pub a_plus: f64,
    pub v0: f64,
    pub nodes_per_side: usize,
    pub nodes: Vec<ContourNode>,
}

impl Contour {
    /// `∮ g(z) dz` by the node rule.
    pub fn integrate<F: Fn(Complex64) -> Complex64>(&self, g: F) -> Complex64 {
        let terms: Vec<Complex64> = self.nodes.iter().map(|n| g(n.z) * n.w).collect();
        pairwise_sum_complex(&terms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourOptions {
    pub margin: f64,
    pub v0: f64,
    pub nodes_per_side: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            margin: 0.5,
            v0: 0.5,
            nodes_per_side: 64,
        }
    }
}

/// Rectangle `[L₋ − margin, L₊ + margin] × [−v0, v0]`, traversed
/// counterclockwise. Each side carries a composite Gauss–Legendre rule with
/// 16-node panels when `nodes_per_side` is a multiple of 16, a single
/// panel otherwise.
pub fn build_contour(edges: &SupportInterval, margin: f64, v0: f64, nodes_per_side: usize) -> Result<Contour> {
    if !(margin > 0.0 && margin.is_finite() && v0 > 0.0 && v0.is_finite()) {
        return Err(Error::Domain(format!("contour needs margin > 0 and v0 > 0, got {margin}, {v0}")));
    }
    if nodes_per_side == 0 {
        return Err(Error::Domain("contour needs at least one node per side".into()));
    }
    let a_minus = edges.l_minus - margin;
    let a_plus = edges.l_plus + margin;
    let (panels, order) = if nodes_per_side.is_multiple_of(16) {
        (nodes_per_side / 16, 16)
    } else {
        (1, nodes_per_side)
    };
    let (gx, gw) = gauss_legendre(order);
    // Nodes and weights of the rule on [0, 1].
    let mut unit = Vec::with_capacity(nodes_per_side);
    for p in 0..panels {
        let h = 1.0 / panels as f64;
        let mid = h * (p as f64 + 0.5);
        for (x, w) in gx.iter().zip(&gw) {
            unit.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    let corners = [
        (Complex64::new(a_minus, -v0), Complex64::new(a_plus, -v0), Side::Bottom),
        (Complex64::new(a_plus, -v0), Complex64::new(a_plus, v0), Side::Right),
        (Complex64::new(a_plus, v0), Complex64::new(a_minus, v0), Side::Top),
        (Complex64::new(a_minus, v0), Complex64::new(a_minus, -v0), Side::Left),
    ];
    let mut nodes = Vec::with_capacity(4 * nodes_per_side);
    for (start, end, side) in corners {
        let d = end - start;
        for &(t, w) in &unit {
            let mut z = start + d * t;
            // keep the vertical sides exactly at a±
            if matches!(side, Side::Right | Side::Left) {
                z.re = start.re;
            } else {
                z.im = start.im;
            }
            nodes.push(ContourNode { z, w: d * w, side });
        }
    }
    Ok(Contour {
        a_minus,
        a_plus,
        v0,
        nodes_per_side,
        nodes,
    })
}

/// Limiting CLT parameters of one test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltParameters {
    pub m_phi: f64,
    pub v_phi: f64,
    pub vtilde_phi: Option<f64>,
    pub quad_error: f64,
}

/// `b(z)` from a converged solution.
pub fn b_from_solution(s: &StieltjesSolution, w2: f64, w4: f64) -> Complex64 {
    let g = 1.0 + s.m1;
    0.5 * s.m2 / (g * g) * ((w2 - 1.0) + s.m1 + (w4 - 3.0) * s.m1 / g)
}

/// `Γ(z₁, z₂)` from the kernel and its partials.
pub fn gamma_from_kernel(k: &IKernelValue, w2: f64, w4: f64) -> Result<Complex64> {
    let modulus = k.i.norm();
    if !(modulus < 1.0) {
        return Err(Error::KernelOutOfRange(modulus));
    }
    let one_minus = 1.0 - k.i;
    let cross = k.d_i_dz1 * k.d_i_dz2;
    Ok((w2 - 2.0) * k.d2_i
        + (w4 - 3.0) * (k.i * k.d2_i + cross)
        + 2.0 / (one_minus * one_minus) * (cross + one_minus * k.d2_i))
}

pub fn mean_density_b<D: Deformation + ?Sized>(law: &D, theta: f64, z: Complex64, w2: f64, w4: f64) -> Result<Complex64> {
    let s = FreeConvolution::new(law, theta)?.solve(z)?;
    Ok(b_from_solution(&s, w2, w4))
}

pub fn cov_kernel_gamma<D: Deformation + ?Sized>(
    law: &D,
    theta: f64,
    z1: Complex64,
    z2: Complex64,
    w2: f64,
    w4: f64,
) -> Result<Complex64> {
    let k = FreeConvolution::new(law, theta)?.i_kernel(z1, z2)?;
    gamma_from_kernel(&k, w2, w4)
}

/// `ϑ⁻² (1 + m'₁)(1 + m'₂)(I − m₁ m₂)` with `I − m₁m₂` formed as the
/// covariance of the resolvent profiles under the integration rule.
fn vtilde_from_profiles(
    weights: &[f64],
    theta: f64,
    a: &StieltjesSolution,
    fa: &[Complex64],
    b: &StieltjesSolution,
    fb: &[Complex64],
) -> Complex64 {
    let mean = |f: &[Complex64]| {
        let t: Vec<Complex64> = f.iter().zip(weights).map(|(x, w)| x * w).collect();
        pairwise_sum_complex(&t)
    };
    let (ma, mb) = (mean(fa), mean(fb));
    let cov: Vec<Complex64> = fa
        .iter()
        .zip(fb)
        .zip(weights)
        .map(|((x, y), w)| w * (x - ma) * (y - mb))
        .collect();
    (1.0 + a.m1) * (1.0 + b.m1) * pairwise_sum_complex(&cov) / (theta * theta)
}

pub fn vtilde_kernel<D: Deformation + ?Sized>(law: &D, theta: f64, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    if !(theta > 0.0) {
        return Err(Error::Domain("the random-deformation kernel needs theta > 0".into()));
    }
    let fc = FreeConvolution::new(law, theta)?;
    let a = fc.solve(z1)?;
    let b = fc.solve(z2)?;
    let level = a.level.max(b.level);
    let fa = fc.resolvent_profile(&a, level);
    let fb = fc.resolvent_profile(&b, level);
    Ok(vtilde_from_profiles(&fc.rule(level).weights, theta, &a, &fa, &b, &fb))
}

/// Solutions and kernels on the nodes of a fixed contour, reusable across
/// test functions and entry moments.
pub struct CltEvaluator<'a, D: Deformation + ?Sized> {
    fc: FreeConvolution<'a, D>,
    contour: Contour,
    sols: Vec<StieltjesSolution>,
    level: u32,
    profiles: Vec<Vec<Complex64>>,
    kernels: OnceLock<Vec<IKernelValue>>,
    vtilde: OnceLock<Vec<Complex64>>,
}

impl<'a, D: Deformation + ?Sized> CltEvaluator<'a, D> {
    pub fn new(law: &'a D, theta: f64, contour: Contour) -> Result<Self> {
        let fc = FreeConvolution::new(law, theta)?;
        let sols = contour
            .nodes
            .par_iter()
            .map(|n| fc.solve(n.z))
            .collect::<Result<Vec<_>>>()?;
        let level = sols.iter().map(|s| s.level).max().unwrap_or(0);
        let profiles = sols.iter().map(|s| fc.resolvent_profile(s, level)).collect();
        Ok(Self {
            fc,
            contour,
            sols,
            level,
            profiles,
            kernels: OnceLock::new(),
            vtilde: OnceLock::new(),
        })
    }

    pub fn contour(&self) -> &Contour {
        &self.contour
    }

    pub fn theta(&self) -> f64 {
        self.fc.theta()
    }

    pub fn solutions(&self) -> &[StieltjesSolution] {
        &self.sols
    }

    fn n(&self) -> usize {
        self.sols.len()
    }

    fn kernels(&self) -> &[IKernelValue] {
        self.kernels.get_or_init(|| {
            let weights = &self.fc.rule(self.level).weights;
            let n = self.n();
            (0..n * n)
                .into_par_iter()
                .map(|idx| {
                    let (j, k) = (idx / n, idx % n);
                    kernel_terms(weights, &self.sols[j], &self.profiles[j], &self.sols[k], &self.profiles[k])
                })
                .collect()
        })
    }

    fn vtilde_matrix(&self) -> &[Complex64] {
        self.vtilde.get_or_init(|| {
            let weights = &self.fc.rule(self.level).weights;
            let theta = self.fc.theta();
            let n = self.n();
            (0..n * n)
                .into_par_iter()
                .map(|idx| {
                    let (j, k) = (idx / n, idx % n);
                    vtilde_from_profiles(weights, theta, &self.sols[j], &self.profiles[j], &self.sols[k], &self.profiles[k])
                })
                .collect()
        })
    }

    /// `max |I|` over all node pairs.
    pub fn max_kernel_modulus(&self) -> f64 {
        self.kernels().iter().map(|k| k.i.norm()).fold(0.0, f64::max)
    }

    fn phi_weights(&self, phi: &TestFunction) -> Result<Vec<Complex64>> {
        phi.require_analytic()?;
        Ok(self
            .contour
            .nodes
            .iter()
            .map(|n| phi.eval_complex(n.z).expect("analytic") * n.w)
            .collect())
    }

    /// `(1/2πi)² Σ_jk u_j u_k K_jk`, row sums reduced pairwise.
    fn double_sum(&self, u: &[Complex64], kernel: &[Complex64]) -> Complex64 {
        let n = self.n();
        let rows: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let terms: Vec<Complex64> = (0..n).map(|k| u[k] * kernel[j * n + k]).collect();
                u[j] * pairwise_sum_complex(&terms)
            })
            .collect();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        pairwise_sum_complex(&rows) / (two_pi_i * two_pi_i)
    }

    /// `−(1/2πi) ∮ m dz`; equals 1 for an enclosing contour.
    pub fn mass(&self) -> Complex64 {
        let terms: Vec<Complex64> = self.sols.iter().zip(&self.contour.nodes).map(|(s, n)| s.m * n.w).collect();
        -pairwise_sum_complex(&terms) / Complex64::new(0.0, 2.0 * PI)
    }

    /// `∫ φ dρ_fc = −(1/2πi) ∮ φ m dz`.
    pub fn centering(&self, phi: &TestFunction) -> Result<Complex64> {
        let u = self.phi_weights(phi)?;
        let terms: Vec<Complex64> = u.iter().zip(&self.sols).map(|(u, s)| u * s.m).collect();
        Ok(-pairwise_sum_complex(&terms) / Complex64::new(0.0, 2.0 * PI))
    }

    /// `M(φ)` as a complex number; the imaginary part is quadrature noise.
    pub fn m_phi(&self, phi: &TestFunction, w2: f64, w4: f64) -> Result<Complex64> {
        let u = self.phi_weights(phi)?;
        let terms: Vec<Complex64> = u
            .iter()
            .zip(&self.sols)
            .map(|(u, s)| u * b_from_solution(s, w2, w4))
            .collect();
        Ok(-pairwise_sum_complex(&terms) / Complex64::new(0.0, 2.0 * PI))
    }

    pub fn v_phi(&self, phi: &TestFunction, w2: f64, w4: f64) -> Result<Complex64> {
        let u = self.phi_weights(phi)?;
        let gamma = self
            .kernels()
            .par_iter()
            .map(|k| gamma_from_kernel(k, w2, w4))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.double_sum(&u, &gamma))
    }

    /// `Ṽ(φ)`; at `ϑ = 0` the limit `Var(v₁) τ₁(φ)²`.
    pub fn vtilde_phi(&self, phi: &TestFunction) -> Result<Complex64> {
        phi.require_analytic()?;
        if self.fc.theta() == 0.0 {
            let t1 = tau_ell(phi, 1);
            return Ok(Complex64::new(self.fc.law().variance() * t1 * t1, 0.0));
        }
        let u = self.phi_weights(phi)?;
        Ok(self.double_sum(&u, self.vtilde_matrix()))
    }
}

fn raw_parameters<D: Deformation + ?Sized>(
    ev: &CltEvaluator<'_, D>,
    phi: &TestFunction,
    w2: f64,
    w4: f64,
) -> Result<[Complex64; 3]> {
    Ok([ev.m_phi(phi, w2, w4)?, ev.v_phi(phi, w2, w4)?, ev.vtilde_phi(phi)?])
}

/// `M(φ)`, `V(φ)`, `Ṽ(φ)` on the contour built from the support edges.
/// `quad_error` is the largest change against the same contour with half
/// the nodes, plus the largest discarded imaginary part.
pub fn clt_parameters<D: Deformation + ?Sized>(
    law: &D,
    theta: f64,
    w2: f64,
    w4: f64,
    phi: &TestFunction,
    opts: ContourOptions,
) -> Result<CltParameters> {
    phi.require_analytic()?;
    let edges = FreeConvolution::new(law, theta)?.edges()?;
    let contour = build_contour(&edges, opts.margin, opts.v0, opts.nodes_per_side)?;
    let fine = raw_parameters(&CltEvaluator::new(law, theta, contour)?, phi, w2, w4)?;
    let half = (opts.nodes_per_side / 2).max(4);
    let coarse_contour = build_contour(&edges, opts.margin, opts.v0, half)?;
    let coarse = raw_parameters(&CltEvaluator::new(law, theta, coarse_contour)?, phi, w2, w4)?;
    let diff = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (f.re - c.re).abs())
        .fold(0.0, f64::max);
    let imag = fine.iter().map(|f| f.im.abs()).fold(0.0, f64::max);
    Ok(CltParameters {
        m_phi: fine[0].re,
        v_phi: fine[1].re,
        vtilde_phi: Some(fine[2].re),
        quad_error: diff + imag,
    })
}

pub fn m_phi<D: Deformation + ?Sized>(
    phi: &TestFunction,
    contour: &Contour,
    law: &D,
    theta: f64,
    w2: f64,
    w4: f64,
) -> Result<f64> {
    Ok(CltEvaluator::new(law, theta, contour.clone())?.m_phi(phi, w2, w4)?.re)
}

pub fn v_phi<D: Deformation + ?Sized>(
    phi: &TestFunction,
    contour: &Contour,
    law: &D,
    theta: f64,
    w2: f64,
    w4: f64,
) -> Result<f64> {
    Ok(CltEvaluator::new(law, theta, contour.clone())?.v_phi(phi, w2, w4)?.re)
}

pub fn vtilde_phi<D: Deformation + ?Sized>(phi: &TestFunction, contour: &Contour, law: &D, theta: f64) -> Result<f64> {
    Ok(CltEvaluator::new(law, theta, contour.clone())?.vtilde_phi(phi)?.re)
}

/// `τ_ℓ(φ) = (1/2π) ∫_{−π}^{π} φ(2cos t) cos(ℓt) dt`
pub fn tau_ell(phi: &TestFunction, ell: usize) -> f64 {
    let l = ell as f64;
    periodic_mean(|t| phi.eval(2.0 * t.cos()) * (l * t).cos(), TAU_NODES)
}

/// Closed forms at `ϑ = 0`, the variance series truncated after `cutoff`
/// terms.
pub fn baiyao_closed_forms(phi: &TestFunction, w2: f64, w4: f64, cutoff: usize) -> (f64, f64) {
    let tau: Vec<f64> = (0..=cutoff.max(4)).map(|l| tau_ell(phi, l)).collect();
    let m = 0.25 * (phi.eval(2.0) + phi.eval(-2.0)) - 0.5 * tau[0] + (w2 - 2.0) * tau[2] + (w4 - 3.0) * tau[4];
    let series: Vec<f64> = (1..=cutoff).map(|l| l as f64 * tau[l] * tau[l]).collect();
    let v = (w2 - 2.0) * tau[1] * tau[1] + 2.0 * (w4 - 3.0) * tau[2] * tau[2] + 2.0 * pairwise_sum(&series);
    (m, v)
}
