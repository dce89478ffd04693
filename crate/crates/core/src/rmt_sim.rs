//! Deformed Wigner matrices `W = A/√N + ϑ diag(v)` and their linear
//! spectral statistics.

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clt::{build_contour, CltEvaluator, ContourOptions, TestFunction};
use crate::error::{Error, Result};
use crate::freeconv::FreeConvolution;
use crate::measures::{quantile_diag, sample_iid, Deformation, DiagonalMode, DiagonalSpec, SpectralMeasure};
use crate::quadrature::{integrate_adaptive, pairwise_sum, pairwise_sum_complex};

/// Law of the entries of `A`. Off-diagonal entries have mean 0 and
/// variance 1; diagonal entries mean 0 and variance `w2_diag`. Third
/// moments are not controlled (all laws here are symmetric).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EntryDistribution {
    Gaussian { w2_diag: f64 },
    /// Off-diagonal `±1`, diagonal `±√w2_diag`.
    Rademacher { w2_diag: f64 },
    /// Symmetric three-point law `P(±b) = 1/(2b²)`, `P(0) = 1 − 1/b²`,
    /// `b = √W4`; the diagonal uses the same law scaled by `√w2_diag`.
    FourthMoment { w4_target: f64, w2_diag: f64 },
}

impl EntryDistribution {
    pub fn validate(&self) -> Result<()> {
        let w2 = self.w2();
        if !(w2.is_finite() && w2 > 0.0) {
            return Err(Error::Domain(format!("diagonal variance must be > 0, got {w2}")));
        }
        if let EntryDistribution::FourthMoment { w4_target, .. } = self {
            if !(w4_target.is_finite() && *w4_target >= 1.0) {
                return Err(Error::Domain(format!("fourth moment must be >= 1, got {w4_target}")));
            }
        }
        Ok(())
    }

    /// Parses `gaussian`, `rademacher` or `fourth:W4`.
    pub fn parse(desc: &str, w2_diag: f64) -> Result<Self> {
        let d = match desc.split_once(':') {
            None if desc == "gaussian" => EntryDistribution::Gaussian { w2_diag },
            None if desc == "rademacher" => EntryDistribution::Rademacher { w2_diag },
            Some(("fourth", w4)) => EntryDistribution::FourthMoment {
                w4_target: w4
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("entries `{desc}`: `{w4}` is not a number")))?,
                w2_diag,
            },
            _ => {
                return Err(Error::Parse(format!(
                    "entries `{desc}`: expected `gaussian`, `rademacher` or `fourth:W4`"
                )))
            }
        };
        d.validate()?;
        Ok(d)
    }

    pub fn descriptor(&self) -> String {
        match self {
            EntryDistribution::Gaussian { .. } => "gaussian".into(),
            EntryDistribution::Rademacher { .. } => "rademacher".into(),
            EntryDistribution::FourthMoment { w4_target, .. } => format!("fourth:{w4_target}"),
        }
    }

    /// `E A_ii²`
    pub fn w2(&self) -> f64 {
        match *self {
            EntryDistribution::Gaussian { w2_diag }
            | EntryDistribution::Rademacher { w2_diag }
            | EntryDistribution::FourthMoment { w2_diag, .. } => w2_diag,
        }
    }

    /// `E A_ij³`, `i ≠ j`
    pub fn w3(&self) -> f64 {
        0.0
    }

    /// `E A_ij⁴`, `i ≠ j`
    pub fn w4(&self) -> f64 {
        match *self {
            EntryDistribution::Gaussian { .. } => 3.0,
            EntryDistribution::Rademacher { .. } => 1.0,
            EntryDistribution::FourthMoment { w4_target, .. } => w4_target,
        }
    }

    fn unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EntryDistribution::Gaussian { .. } => rng.sample(StandardNormal),
            EntryDistribution::Rademacher { .. } => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::FourthMoment { w4_target, .. } => {
                let u: f64 = rng.random();
                let p = 1.0 / (2.0 * w4_target);
                let b = w4_target.sqrt();
                if u < p {
                    -b
                } else if u < 2.0 * p {
                    b
                } else {
                    0.0
                }
            }
        }
    }

    pub fn draw_offdiag<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.unit(rng)
    }

    pub fn draw_diag<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.w2().sqrt() * self.unit(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub theta: f64,
    pub measure: SpectralMeasure,
    pub v_mode: DiagonalMode,
    pub entry: EntryDistribution,
    pub master_seed: u64,
}

impl EnsembleConfig {
    /// Checks the configuration; returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n < 2 {
            return Err(Error::Domain(format!("N must be >= 2, got {}", self.n)));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::Domain(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        self.entry.validate()?;
        let mut warnings = Vec::new();
        if self.theta > 0.0 && self.theta * (self.n as f64).sqrt() < 1.0 {
            warnings.push(format!(
                "theta * sqrt(N) = {:.3} < 1: the deformation is below the fluctuation scale",
                self.theta * (self.n as f64).sqrt()
            ));
        }
        Ok(warnings)
    }

    /// Random stream of one replica.
    pub fn rng(&self, replica: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replica);
        rng
    }

    /// The deterministic diagonal, if the mode is quantile-based.
    pub fn deterministic_diag(&self) -> Option<DiagonalSpec> {
        match self.v_mode {
            DiagonalMode::DeterministicQuantile => Some(quantile_diag(&self.measure, self.n)),
            DiagonalMode::IidSample => None,
        }
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// From a full row-major array; rejects asymmetry beyond `1e-12`.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
        self.data[j * self.n + i] = x;
    }

    pub fn trace(&self) -> f64 {
        let d: Vec<f64> = (0..self.n).map(|i| self.get(i, i)).collect();
        pairwise_sum(&d)
    }

    /// `Tr W² = ‖W‖_F²`
    pub fn frobenius_sq(&self) -> f64 {
        let sq: Vec<f64> = self.data.iter().map(|x| x * x).collect();
        pairwise_sum(&sq)
    }

    /// `max_i Σ_j |W_ij|`, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs()).sum())
            .fold(0.0, f64::max)
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// One realization of the ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample {
    pub matrix: SymmetricMatrix,
    pub v: DiagonalSpec,
}

/// Draws replica `replica`. The iid diagonal is drawn first, then the upper
/// triangle of `A` row by row, all from the replica's own stream.
pub fn sample_matrix(config: &EnsembleConfig, replica: u64) -> MatrixSample {
    let mut rng = config.rng(replica);
    let n = config.n;
    let v = match config.deterministic_diag() {
        Some(v) => v,
        None => sample_iid(&config.measure, n, &mut rng),
    };
    let scale = 1.0 / (n as f64).sqrt();
    let mut matrix = SymmetricMatrix::zeros(n);
    for i in 0..n {
        let d = config.entry.draw_diag(&mut rng);
        matrix.set(i, i, scale * d + config.theta * v.values[i]);
        for j in i + 1..n {
            matrix.set(i, j, scale * config.entry.draw_offdiag(&mut rng));
        }
    }
    MatrixSample { matrix, v }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub v_used: DiagonalSpec,
}

/// Full spectrum, ascending.
pub fn eigenvalues(matrix: &SymmetricMatrix) -> Result<Vec<f64>> {
    let ev = matrix
        .to_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    if ev.iter().any(|x| !x.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as
/// columns, row-major `n × n`.
pub fn eigenpairs(matrix: &SymmetricMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let evd = matrix
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    let n = matrix.n();
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vectors[i * n + j] = u[(i, j)];
        }
    }
    Ok((values, vectors))
}

/// Samples replica `replica` and computes its spectrum.
pub fn simulate_spectrum(config: &EnsembleConfig, replica: u64) -> Result<SpectrumResult> {
    let MatrixSample { matrix, v } = sample_matrix(config, replica);
    Ok(SpectrumResult {
        eigenvalues: eigenvalues(&matrix)?,
        v_used: v,
    })
}

/// `Σ φ(λ_i)`, pairwise-summed.
pub fn linear_statistic(eigs: &[f64], phi: &TestFunction) -> f64 {
    let vals: Vec<f64> = eigs.iter().map(|&x| phi.eval(x)).collect();
    pairwise_sum(&vals)
}

/// `T_N = Σ φ(λ_i) − centering` with `centering = N ∫ φ dρ̂_fc`.
pub fn lss_t(eigs: &[f64], phi: &TestFunction, centering: f64) -> f64 {
    linear_statistic(eigs, phi) - centering
}

/// `S_N = (Σ φ(λ_i) − N·centering)/(√N ϑ)` with `centering = ∫ φ dρ_fc`.
pub fn lss_s(eigs: &[f64], phi: &TestFunction, centering: f64, theta: f64, n: usize) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain("S statistic needs theta > 0".into()));
    }
    let nf = n as f64;
    Ok((linear_statistic(eigs, phi) - nf * centering) / (nf.sqrt() * theta))
}

/// `∫ φ dρ` for the deformed law of `law` at coupling `theta`.
///
/// Polynomials use `−(1/2πi) ∮ φ m dz` on the default contour; bumps
/// integrate `φ·ρ` on the real axis with `ρ` evaluated at `η = 10⁻⁶`.
pub fn centering_integral<D: Deformation + ?Sized>(law: &D, theta: f64, phi: &TestFunction) -> Result<f64> {
    centering_integral_with(law, theta, phi, ContourOptions::default())
}

pub fn centering_integral_with<D: Deformation + ?Sized>(
    law: &D,
    theta: f64,
    phi: &TestFunction,
    opts: ContourOptions,
) -> Result<f64> {
    let fc = FreeConvolution::new(law, theta)?;
    let edges = fc.edges()?;
    match phi.compact_support() {
        None => {
            let contour = build_contour(&edges, opts.margin, opts.v0, opts.nodes_per_side)?;
            Ok(CltEvaluator::new(law, theta, contour)?.centering(phi)?.re)
        }
        Some((lo, hi)) => {
            let (a, b) = (lo.max(edges.l_minus), hi.min(edges.l_plus));
            if a >= b {
                return Ok(0.0);
            }
            let (v, _) = integrate_adaptive(|x| Ok(phi.eval(x) * fc.density(x, 1e-6)?), a, b, 1e-7, 2000)?;
            Ok(v)
        }
    }
}

/// `m_N(z) = (1/N) Σ 1/(λ_i − z)`
pub fn resolvent_trace(eigs: &[f64], z: Complex64) -> Complex64 {
    let terms: Vec<Complex64> = eigs.iter().map(|&l| 1.0 / (l - z)).collect();
    pairwise_sum_complex(&terms) / eigs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn config(n: usize, theta: f64, entry: EntryDistribution, mode: DiagonalMode) -> EnsembleConfig {
        EnsembleConfig {
            n,
            theta,
            measure: SpectralMeasure::two_point(0.5).unwrap(),
            v_mode: mode,
            entry,
            master_seed: 7,
        }
    }

    fn gaussian() -> EntryDistribution {
        EntryDistribution::Gaussian { w2_diag: 2.0 }
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = config(2, 0.5, gaussian(), DiagonalMode::IidSample);
        assert_eq!(sample_matrix(&c, 3), sample_matrix(&c, 3));
        assert_ne!(sample_matrix(&c, 3), sample_matrix(&c, 4));
    }

    #[test]
    fn implied_moments() {
        assert_eq!(gaussian().w4(), 3.0);
        assert_eq!(EntryDistribution::Rademacher { w2_diag: 1.0 }.w4(), 1.0);
        let f = EntryDistribution::FourthMoment { w4_target: 5.0, w2_diag: 2.0 };
        assert_eq!((f.w2(), f.w3(), f.w4()), (2.0, 0.0, 5.0));
        assert!(EntryDistribution::FourthMoment { w4_target: 0.5, w2_diag: 1.0 }.validate().is_err());
        assert_eq!(EntryDistribution::parse("fourth:5", 2.0).unwrap(), f);
        assert!(EntryDistribution::parse("cauchy", 1.0).is_err());
    }

    fn offdiag_moments(c: &EnsembleConfig) -> (f64, f64, usize) {
        let s = sample_matrix(c, 0).matrix;
        let n = c.n;
        let scale = (n as f64).sqrt();
        let (mut m2, mut m4, mut k) = (0.0, 0.0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let x = scale * s.get(i, j);
                m2 += x * x;
                m4 += x.powi(4);
                k += 1;
            }
        }
        (m2 / k as f64, m4 / k as f64, k)
    }

    #[test]
    fn rademacher_second_moment() {
        let c = config(500, 0.0, EntryDistribution::Rademacher { w2_diag: 1.0 }, DiagonalMode::DeterministicQuantile);
        let (m2, _, _) = offdiag_moments(&c);
        assert_eq!(m2, 1.0);
    }

    #[test]
    fn fourth_moment_law() {
        let c = config(
            500,
            0.0,
            EntryDistribution::FourthMoment { w4_target: 5.0, w2_diag: 1.0 },
            DiagonalMode::DeterministicQuantile,
        );
        let (m2, m4, k) = offdiag_moments(&c);
        // Var(x⁴) = E x⁸ − 25 = b⁶ − 25 = 100
        let sd4 = (100.0 / k as f64).sqrt();
        assert!((m4 - 5.0).abs() < 3.0 * sd4, "{m4}");
        let sd2 = (4.0 / k as f64).sqrt();
        assert!((m2 - 1.0).abs() < 3.0 * sd2);
    }

    #[test]
    fn entry_moments_over_many_draws() {
        let n = 1_000_000;
        let laws = [
            (EntryDistribution::Gaussian { w2_diag: 1.0 }, 3.0, 96.0),
            (EntryDistribution::Rademacher { w2_diag: 1.0 }, 1.0, 0.0),
            (EntryDistribution::FourthMoment { w4_target: 4.0, w2_diag: 1.0 }, 4.0, 48.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (law, w4, var4) in laws {
            let xs: Vec<f64> = (0..n).map(|_| law.draw_offdiag(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
            let nf = n as f64;
            assert!(mean.abs() < 4.0 / nf.sqrt());
            assert!((m2 - 1.0).abs() <= 4.0 * ((w4 - 1.0) / nf).sqrt() + 1e-15);
            assert!((m4 - w4).abs() <= 4.0 * (var4 / nf).sqrt() + 1e-12);
        }
        let law = EntryDistribution::Rademacher { w2_diag: 3.0 };
        let d: f64 = law.draw_diag(&mut rng);
        assert!((d * d - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_only_spectrum_is_sorted_v() {
        let v = vec![0.3, -1.0, 2.0, 0.5];
        let mut m = SymmetricMatrix::zeros(4);
        for (i, x) in v.iter().enumerate() {
            m.set(i, i, *x);
        }
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let ev = eigenvalues(&m).unwrap();
        for (a, b) in ev.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_swap() {
        let m = SymmetricMatrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        assert!(SymmetricMatrix::from_rows(2, vec![0.0, 1.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn trace_identities_and_backward_error() {
        let c = config(300, 0.7, gaussian(), DiagonalMode::IidSample);
        let m = sample_matrix(&c, 1).matrix;
        let (vals, vecs) = eigenpairs(&m).unwrap();
        let s1 = pairwise_sum(&vals);
        let s2 = pairwise_sum(&vals.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!((s1 - m.trace()).abs() <= 1e-8 * m.trace().abs().max(1.0));
        assert!((s2 - m.frobenius_sq()).abs() <= 1e-8 * m.frobenius_sq());
        let n = m.n();
        let norm = m.norm_inf();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let k = rng.random_range(0..n);
            let mut r2 = 0.0;
            for i in 0..n {
                let wx: f64 = (0..n).map(|j| m.get(i, j) * vecs[j * n + k]).sum();
                r2 += (wx - vals[k] * vecs[i * n + k]).powi(2);
            }
            assert!(r2.sqrt() <= 1e-10 * norm);
        }
        let only = eigenvalues(&m).unwrap();
        for (a, b) in only.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn goe_edge() {
        let c = config(500, 0.0, EntryDistribution::Gaussian { w2_diag: 1.0 }, DiagonalMode::DeterministicQuantile);
        let mut inside = 0;
        for r in 0..10 {
            let ev = simulate_spectrum(&c, r).unwrap().eigenvalues;
            if (1.8..=2.2).contains(ev.last().unwrap()) {
                inside += 1;
            }
        }
        assert_eq!(inside, 10);
    }

    #[test]
    fn statistics_of_constants_vanish() {
        let c = config(50, 0.5, gaussian(), DiagonalMode::IidSample);
        let ev = simulate_spectrum(&c, 0).unwrap().eigenvalues;
        let k = TestFunction::polynomial(vec![2.5]).unwrap();
        let n = ev.len() as f64;
        assert_eq!(lss_t(&ev, &k, n * 2.5), 0.0);
        assert_eq!(lss_s(&ev, &k, 2.5, 0.5, ev.len()).unwrap(), 0.0);
        assert!(lss_s(&ev, &k, 2.5, 0.0, ev.len()).is_err());
    }

    #[test]
    fn s_is_rescaled_t() {
        let c = config(80, 0.5, gaussian(), DiagonalMode::IidSample);
        let ev = simulate_spectrum(&c, 2).unwrap().eigenvalues;
        let phi = TestFunction::monomial(3).unwrap();
        let centering = 0.013;
        let t = lss_t(&ev, &phi, 80.0 * centering);
        let s = lss_s(&ev, &phi, centering, 0.5, 80).unwrap();
        assert!((s - t / (80f64.sqrt() * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn trace_statistic_variance_is_w2() {
        // φ = x at ϑ = 0: T = Σ A_ii / √N exactly, variance w2.
        let c = config(40, 0.0, gaussian(), DiagonalMode::DeterministicQuantile);
        let x = TestFunction::monomial(1).unwrap();
        let ts: Vec<f64> = (0..2000).map(|r| lss_t(&simulate_spectrum(&c, r).unwrap().eigenvalues, &x, 0.0)).collect();
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        let var = ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (ts.len() - 1) as f64;
        assert!((var / 2.0 - 1.0).abs() < 4.0 * (2.0 / 2000f64).sqrt());
    }

    #[test]
    fn centering_values() {
        let law = SpectralMeasure::two_point(0.5).unwrap();
        let x2 = TestFunction::monomial(2).unwrap();
        let x4 = TestFunction::monomial(4).unwrap();
        assert!((centering_integral(&law, 0.0, &x2).unwrap() - 1.0).abs() < 1e-8);
        assert!((centering_integral(&law, 0.0, &x4).unwrap() - 2.0).abs() < 1e-8);
        let theta: f64 = 0.8;
        let want = 1.0 + theta * theta * 0.25;
        assert!((centering_integral(&law, theta, &x2).unwrap() - want).abs() < 1e-6);
        // A bump equal to 1 - 3t² + 3t⁴ - t⁶ on [-3, 3] covers the whole support.
        let bump = TestFunction::bump(0.0, 3.0, 1.0).unwrap();
        let poly = TestFunction::polynomial(vec![1.0, 0.0, -1.0 / 3.0, 0.0, 1.0 / 27.0, 0.0, -1.0 / 729.0]).unwrap();
        let a = centering_integral(&law, 0.0, &bump).unwrap();
        let b = centering_integral(&law, 0.0, &poly).unwrap();
        assert!((a - b).abs() < 1e-5, "{a} {b}");
    }

    #[test]
    fn resolvent_trace_basics() {
        assert!((resolvent_trace(&[0.0], Complex64::new(0.0, 1.0)) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let c = config(1000, 0.0, EntryDistribution::Gaussian { w2_diag: 1.0 }, DiagonalMode::DeterministicQuantile);
        let ev = simulate_spectrum(&c, 0).unwrap().eigenvalues;
        let m = resolvent_trace(&ev, Complex64::new(0.0, 2.0));
        assert!(m.im > 0.0);
        assert!((m - Complex64::new(0.0, 2f64.sqrt() - 1.0)).norm() < 0.05);
    }

    #[test]
    fn weak_coupling_warning() {
        let c = config(100, 0.05, gaussian(), DiagonalMode::IidSample);
        assert_eq!(c.validate().unwrap().len(), 1);
        let c = config(1, 0.5, gaussian(), DiagonalMode::IidSample);
        assert!(c.validate().is_err());
    }
}
