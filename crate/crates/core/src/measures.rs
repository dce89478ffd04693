//! Deformation measures `ν`, their empirical versions `ν̂_N`, and exact
//! integrals against them.
//!
//! A measure enters the free-convolution solver through the [`Deformation`]
//! trait: atomic laws are integrated exactly, the uniform law through a
//! composite Gauss–Legendre rule that can be refined on demand.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss_legendre;

const WEIGHT_RENORM_TOL: f64 = 1e-9;
const CENTERING_TOL: f64 = 1e-12;

/// Number of 16-node panels of the level-0 rule for the uniform law.
const UNIFORM_BASE_PANELS: usize = 8;
const UNIFORM_PANEL_ORDER: usize = 16;
const UNIFORM_MAX_LEVEL: u32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasureKind {
    /// `½(δ₋ₐ + δₐ)`
    TwoPoint { a: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
    /// Finite atomic law, points sorted ascending.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

/// A centered, compactly supported probability measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    kind: MeasureKind,
    support_min: f64,
    support_max: f64,
}

impl SpectralMeasure {
    pub fn two_point(a: f64) -> Result<Self> {
        check_scale(a)?;
        Ok(Self {
            kind: MeasureKind::TwoPoint { a },
            support_min: -a,
            support_max: a,
        })
    }

    pub fn uniform(a: f64) -> Result<Self> {
        check_scale(a)?;
        Ok(Self {
            kind: MeasureKind::Uniform { a },
            support_min: -a,
            support_max: a,
        })
    }

    /// Atomic measure. Weights summing to within `1e-9` of one are
    /// renormalized; anything else is rejected, as is a nonzero mean.
    pub fn discrete(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "need a nonempty list of (point, weight) pairs, got {} points and {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom location".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_RENORM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let mut pairs: Vec<(f64, f64)> = points
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mean: f64 = pairs.iter().map(|(p, w)| p * w).sum();
        if mean.abs() > CENTERING_TOL {
            return Err(Error::InvalidMeasure(format!("measure is not centered (mean {mean:e})")));
        }
        let support_min = pairs.first().map(|p| p.0).unwrap_or(0.0);
        let support_max = pairs.last().map(|p| p.0).unwrap_or(0.0);
        let (points, weights) = pairs.into_iter().unzip();
        Ok(Self {
            kind: MeasureKind::Discrete { points, weights },
            support_min,
            support_max,
        })
    }

    /// Parses the plain-text discrete format: one `point weight` pair per
    /// line, `#` starts a comment.
    pub fn parse_discrete(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected `point weight`, got {:?}",
                    lineno + 1,
                    raw
                )));
            }
            points.push(parse_strict_float(fields[0], lineno + 1)?);
            weights.push(parse_strict_float(fields[1], lineno + 1)?);
        }
        Self::discrete(points, weights)
    }

    pub fn from_discrete_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_discrete(&text)
    }

    /// Parses `two_point:a`, `uniform:a` or `discrete:path`.
    pub fn from_descriptor(desc: &str) -> Result<Self> {
        let (kind, arg) = desc
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("measure `{desc}`: expected kind:argument")))?;
        match kind.trim() {
            "two_point" => Self::two_point(parse_strict_float(arg.trim(), 0)?),
            "uniform" => Self::uniform(parse_strict_float(arg.trim(), 0)?),
            "discrete" => Self::from_discrete_file(Path::new(arg.trim())),
            other => Err(Error::Parse(format!("unknown measure kind `{other}`"))),
        }
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn support_min(&self) -> f64 {
        self.support_min
    }

    pub fn support_max(&self) -> f64 {
        self.support_max
    }

    /// `∫ xᵏ dν`, exact for atoms and in closed form for the uniform law.
    pub fn moment(&self, k: u32) -> f64 {
        assert!(k <= 8, "moments are provided up to order 8");
        match &self.kind {
            MeasureKind::TwoPoint { a } => {
                if k.is_multiple_of(2) {
                    a.powi(k as i32)
                } else {
                    0.0
                }
            }
            MeasureKind::Uniform { a } => {
                if k.is_multiple_of(2) {
                    a.powi(k as i32) / (k as f64 + 1.0)
                } else {
                    0.0
                }
            }
            MeasureKind::Discrete { points, weights } => {
                points.iter().zip(weights).map(|(p, w)| w * p.powi(k as i32)).sum()
            }
        }
    }

    /// Inverse distribution function with the convention
    /// `F⁻¹(p) = inf{x : F(x) ≥ p}`.
    pub fn quantile(&self, p: f64) -> f64 {
        match &self.kind {
            MeasureKind::TwoPoint { a } => {
                if p <= 0.5 {
                    -a
                } else {
                    *a
                }
            }
            MeasureKind::Uniform { a } => a * (2.0 * p - 1.0),
            MeasureKind::Discrete { points, weights } => {
                let mut cum = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    cum += w;
                    if cum >= p - 1e-15 {
                        return *x;
                    }
                }
                *points.last().expect("nonempty")
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match &self.kind {
            MeasureKind::TwoPoint { a } => format!("two_point:{a}"),
            MeasureKind::Uniform { a } => format!("uniform:{a}"),
            MeasureKind::Discrete { points, .. } => format!("discrete[{} atoms]", points.len()),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            MeasureKind::TwoPoint { a } => {
                if rng.random::<bool>() {
                    *a
                } else {
                    -a
                }
            }
            MeasureKind::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
            MeasureKind::Discrete { .. } => self.quantile(rng.random::<f64>()),
        }
    }
}

fn check_scale(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!("scale parameter must be finite and > 0, got {a}")))
    }
}

fn parse_strict_float(tok: &str, line: usize) -> Result<f64> {
    let ok_chars = tok
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    let v: f64 = if ok_chars { tok.parse().ok() } else { None }
        .ok_or_else(|| Error::Parse(format!("line {line}: `{tok}` is not a decimal number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: `{tok}` is not finite")));
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagonalMode {
    DeterministicQuantile,
    IidSample,
}

/// The diagonal entries `v_1, …, v_N` of the deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSpec {
    pub mode: DiagonalMode,
    pub values: Vec<f64>,
}

impl DiagonalSpec {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The empirical measure `ν̂_N` as merged atoms.
    pub fn empirical_atoms(&self) -> Atoms {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / sorted.len() as f64;
        let mut points: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for v in sorted {
            match points.last() {
                Some(&last) if last == v => *weights.last_mut().expect("paired") += w,
                _ => {
                    points.push(v);
                    weights.push(w);
                }
            }
        }
        Atoms { points, weights }
    }
}

/// Classical-location diagonal: `v_i = F⁻¹((i − ½)/N)`.
pub fn quantile_diag(measure: &SpectralMeasure, n: usize) -> DiagonalSpec {
    assert!(n >= 1, "quantile_diag needs N >= 1");
    let values = (1..=n)
        .map(|i| measure.quantile((i as f64 - 0.5) / n as f64))
        .collect();
    DiagonalSpec {
        mode: DiagonalMode::DeterministicQuantile,
        values,
    }
}

/// `N` independent draws from `ν`.
pub fn sample_iid<R: Rng + ?Sized>(measure: &SpectralMeasure, n: usize, rng: &mut R) -> DiagonalSpec {
    assert!(n >= 1, "sample_iid needs N >= 1");
    let values = (0..n).map(|_| measure.draw(rng)).collect();
    DiagonalSpec {
        mode: DiagonalMode::IidSample,
        values,
    }
}

/// Weighted point set used to integrate against a deformation measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Atoms {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Atoms {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn stieltjes(&self, theta: f64, z: Complex64) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| *w / (theta * p - z))
            .sum()
    }

    /// `∫ (v − x)⁻² dν(v)` for real `x`.
    pub fn inverse_square(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let d = p - x;
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    w / (d * d)
                }
            })
            .sum()
    }

    /// Infimum of [`Atoms::inverse_square`] over the convex hull of the
    /// points: `(argmin, min)`.
    ///
    /// `g` is convex on every gap between consecutive atoms and blows up at
    /// the atoms, so each gap is minimized by golden-section search. Gaps are
    /// visited by increasing midpoint value and pruned by the two-atom lower
    /// bound `(w_l^{1/3} + w_r^{1/3})³ / gap²`.
    pub fn regularity_profile(&self) -> (f64, f64) {
        if self.points.len() < 2 {
            return (self.points.first().copied().unwrap_or(0.0), f64::INFINITY);
        }
        let mut gaps: Vec<(usize, f64)> = (0..self.points.len() - 1)
            .map(|i| {
                let mid = 0.5 * (self.points[i] + self.points[i + 1]);
                (i, self.inverse_square(mid))
            })
            .collect();
        gaps.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut best = (f64::NAN, f64::INFINITY);
        for (i, _) in gaps {
            let (lo, hi) = (self.points[i], self.points[i + 1]);
            let gap = hi - lo;
            let lower = (self.weights[i].cbrt() + self.weights[i + 1].cbrt()).powi(3) / (gap * gap);
            if lower >= best.1 {
                continue;
            }
            let (x, g) = golden_section_min(|x| self.inverse_square(x), lo, hi, 1e-10);
            if g < best.1 {
                best = (x, g);
            }
        }
        best
    }
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Result of the regularity check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityReport {
    pub regular: bool,
    pub argmin: f64,
    pub min_value: f64,
    pub threshold: f64,
}

impl RegularityReport {
    pub fn into_result(self) -> Result<Self> {
        if self.regular {
            Ok(self)
        } else {
            Err(Error::RegularityViolation {
                min_value: self.min_value,
                threshold: self.threshold,
                argmin: self.argmin,
            })
        }
    }
}

/// Checks `inf_{x ∈ I_ν} ∫ (v − x)⁻² dν(v) ≥ 1 + ϖ`.
pub fn check_regularity<D: Deformation + ?Sized>(law: &D, varpi: f64) -> RegularityReport {
    let (argmin, min_value) = law.regularity_profile();
    let threshold = 1.0 + varpi;
    RegularityReport {
        regular: min_value >= threshold,
        argmin,
        min_value,
        threshold,
    }
}

/// A deformation law as seen by the free-convolution solver.
pub trait Deformation: Sync {
    /// Integration rule at refinement `level`. Atomic laws ignore `level`.
    fn atoms(&self, level: u32) -> Atoms;

    /// Highest refinement level (0 when [`Deformation::atoms`] is exact).
    fn max_level(&self) -> u32;

    /// Endpoints of the smallest interval containing the support.
    fn support(&self) -> (f64, f64);

    /// `∫ dν(x) / (ϑx − z)`, exact.
    fn stieltjes(&self, theta: f64, z: Complex64) -> Result<Complex64>;

    /// `∫ dν(x) / (ϑx − ξ)²` for real `ξ` outside `ϑ·I_ν`, exact.
    fn edge_moment(&self, theta: f64, xi: f64) -> f64;

    /// `(argmin, inf)` of `∫ (v − x)⁻² dν(v)` over `I_ν`.
    fn regularity_profile(&self) -> (f64, f64);

    fn variance(&self) -> f64;
}

impl Deformation for SpectralMeasure {
    fn atoms(&self, level: u32) -> Atoms {
        match &self.kind {
            MeasureKind::TwoPoint { a } => Atoms {
                points: vec![-a, *a],
                weights: vec![0.5, 0.5],
            },
            MeasureKind::Uniform { a } => {
                let level = level.min(UNIFORM_MAX_LEVEL);
                let panels = UNIFORM_BASE_PANELS << level;
                let (points, w) = composite_gauss_legendre(-a, *a, panels, UNIFORM_PANEL_ORDER);
                let weights = w.into_iter().map(|w| w / (2.0 * a)).collect();
                Atoms { points, weights }
            }
            MeasureKind::Discrete { points, weights } => Atoms {
                points: points.clone(),
                weights: weights.clone(),
            },
        }
    }

    fn max_level(&self) -> u32 {
        match self.kind {
            MeasureKind::Uniform { .. } => UNIFORM_MAX_LEVEL,
            _ => 0,
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.support_min, self.support_max)
    }

    fn stieltjes(&self, theta: f64, z: Complex64) -> Result<Complex64> {
        stieltjes_nu(self, theta, z)
    }

    fn edge_moment(&self, theta: f64, xi: f64) -> f64 {
        match &self.kind {
            MeasureKind::Uniform { a } => {
                let c = theta * a;
                if xi.abs() <= c {
                    f64::INFINITY
                } else {
                    1.0 / (xi * xi - c * c)
                }
            }
            _ => self.atoms(0).edge_moment(theta, xi),
        }
    }

    fn regularity_profile(&self) -> (f64, f64) {
        match &self.kind {
            // The integrand is not integrable at any point of [-a, a].
            MeasureKind::Uniform { .. } => (0.0, f64::INFINITY),
            _ => self.atoms(0).regularity_profile(),
        }
    }

    fn variance(&self) -> f64 {
        self.moment(2)
    }
}

impl Atoms {
    fn edge_moment(&self, theta: f64, xi: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| {
                let d = theta * p - xi;
                w / (d * d)
            })
            .sum()
    }
}

impl Deformation for DiagonalSpec {
    fn atoms(&self, _level: u32) -> Atoms {
        self.empirical_atoms()
    }

    fn max_level(&self) -> u32 {
        0
    }

    fn support(&self) -> (f64, f64) {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn stieltjes(&self, theta: f64, z: Complex64) -> Result<Complex64> {
        let atoms = self.empirical_atoms();
        check_off_atoms(&atoms, theta, z)?;
        Ok(atoms.stieltjes(theta, z))
    }

    fn edge_moment(&self, theta: f64, xi: f64) -> f64 {
        self.empirical_atoms().edge_moment(theta, xi)
    }

    fn regularity_profile(&self) -> (f64, f64) {
        self.empirical_atoms().regularity_profile()
    }

    fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

fn check_off_atoms(atoms: &Atoms, theta: f64, z: Complex64) -> Result<()> {
    if z.im == 0.0 && atoms.points.iter().any(|p| theta * p == z.re) {
        return Err(Error::Domain(format!("z = {} lies on an atom of the scaled measure", z.re)));
    }
    Ok(())
}

/// Stieltjes transform of `ν^ϑ`: `∫ dν(x) / (ϑx − z)`.
pub fn stieltjes_nu(measure: &SpectralMeasure, theta: f64, z: Complex64) -> Result<Complex64> {
    if theta == 0.0 {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::Domain("z = 0 lies on the support of δ₀".into()));
        }
        return Ok(-1.0 / z);
    }
    match &measure.kind {
        MeasureKind::Uniform { a } => {
            let c = theta * a;
            if z.im == 0.0 && z.re.abs() <= c {
                return Err(Error::Domain(format!(
                    "z = {} lies inside the scaled support [-{c}, {c}]",
                    z.re
                )));
            }
            // ∫_{-a}^{a} dx / (2a(ϑx − z)) = −atanh(c/z)/c with c = ϑa; the
            // principal branch of atanh is analytic off the real segment |w| ≥ 1.
            let w = Complex64::new(c, 0.0) / z;
            Ok(-w.atanh() / c)
        }
        _ => {
            let atoms = measure.atoms(0);
            check_off_atoms(&atoms, theta, z)?;
            Ok(atoms.stieltjes(theta, z))
        }
    }
}
