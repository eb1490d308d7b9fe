//! Statistical inference on samples of mm-spaces: mean rho-spectra,
//! pointwise confidence bands, the bootstrap two-sample test and the
//! concentration-bound calculator.
//!
//! The resampling unit is always a whole space's spectral curve (the i.i.d.
//! sampling model), never an individual eigenvalue.

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::signatures::QuantileGrid;
use crate::spectrum::SpectralCurve;

/// A sample of spectral curves evaluated on a shared grid and truncated to a
/// common `k_prime`. Evaluation happens once at construction so that
/// resampling only averages precomputed matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub grid: QuantileGrid,
    pub k_prime: usize,
    /// One `G x k_prime` matrix per curve.
    values: Vec<DMatrix<f64>>,
}

impl SpectrumSample {
    pub fn new(curves: &[SpectralCurve], grid: QuantileGrid, k_prime: usize) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::SampleTooSmall { needed: 1, got: 0 });
        }
        for c in curves {
            if k_prime == 0 || k_prime > c.k() {
                return Err(Error::KPrimeOutOfRange { k_prime, k: c.k() });
            }
        }
        let g = grid.len();
        let values = curves
            .iter()
            .map(|c| {
                DMatrix::from_fn(g, k_prime, |gi, k| c.values_at(grid.values[gi])[k])
            })
            .collect();
        Ok(SpectrumSample {
            grid,
            k_prime,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Mean of the curves selected by `idx` (with repetitions).
    fn mean_of(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.grid.len(), self.k_prime);
        for &i in idx {
            acc += &self.values[i];
        }
        acc / idx.len() as f64
    }

    fn mean(&self) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.n()).collect();
        self.mean_of(&idx)
    }
}

/// Coordinatewise mean spectrum over a sample with per-coordinate sample
/// standard deviations (unbiased, `n - 1` denominator; absent when `n = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpectrumEstimate {
    pub grid: QuantileGrid,
    pub k_prime: usize,
    pub n: usize,
    /// `G x k_prime`; column 0 (the smallest eigenvalue) is identically 0.
    pub mean: DMatrix<f64>,
    pub sd: Option<DMatrix<f64>>,
}

pub fn mean_spectrum(sample: &SpectrumSample) -> MeanSpectrumEstimate {
    let mean = sample.mean();
    let n = sample.n();
    let sd = (n >= 2).then(|| {
        let mut acc = DMatrix::zeros(sample.grid.len(), sample.k_prime);
        for v in &sample.values {
            let d = v - &mean;
            acc += d.component_mul(&d);
        }
        (acc / (n - 1) as f64).map(f64::sqrt)
    });
    MeanSpectrumEstimate {
        grid: sample.grid.clone(),
        k_prime: sample.k_prime,
        n,
        mean,
        sd,
    }
}

/// One grid point of a pointwise confidence band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub rho: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pointwise Student bands `mean +- t_{n-1, (1+level)/2} sd / sqrt(n)` for
/// eigenvalue coordinate `which` (1-based ascending: the Fiedler eigenvalue
/// is 2, the largest is `k_prime`). Lower bounds are clamped at zero.
pub fn confidence_bands(
    est: &MeanSpectrumEstimate,
    level: f64,
    which: usize,
) -> Result<Vec<BandPoint>> {
    if level.is_nan() || level <= 0.0 || level >= 1.0 {
        return Err(Error::InvalidLevel(level));
    }
    if which == 0 || which > est.k_prime {
        return Err(Error::WhichOutOfRange {
            which,
            k_prime: est.k_prime,
        });
    }
    let sd = est.sd.as_ref().ok_or(Error::SampleTooSmall {
        needed: 2,
        got: est.n,
    })?;
    let student = StudentsT::new(0.0, 1.0, (est.n - 1) as f64)
        .expect("n >= 2 gives a valid degree of freedom");
    let quantile = student.inverse_cdf((1.0 + level) / 2.0);
    let col = which - 1;
    Ok((0..est.grid.len())
        .map(|g| {
            let mean = est.mean[(g, col)];
            let half = quantile * sd[(g, col)] / (est.n as f64).sqrt();
            BandPoint {
                rho: est.grid.values[g],
                mean,
                lower: (mean - half).max(0.0),
                upper: mean + half,
            }
        })
        .collect())
}

fn check_compatible(a: &SpectrumSample, b: &SpectrumSample) -> Result<()> {
    if a.k_prime != b.k_prime || a.grid.values != b.grid.values {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn sup_norm_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// The raw two-sample statistic
/// `T_{n,m} = sup_rho || mean_1(rho) - mean_2(rho) ||_inf` over the grid.
pub fn test_statistic(sample1: &SpectrumSample, sample2: &SpectrumSample) -> Result<f64> {
    check_compatible(sample1, sample2)?;
    Ok(sup_norm_diff(&sample1.mean(), &sample2.mean()))
}

/// How the observed statistic is scaled before comparison with the bootstrap
/// replicates `theta_b = sup || G*_n - G*_m ||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    /// Multiply `T` by `sqrt(2nm / (n + m))` (= `sqrt(n)` when `n = m`), the
    /// factor under which the scaled statistic and the replicates share the
    /// same limit. Default.
    Calibrated,
    /// Compare the unscaled statistic, as the procedure reads literally.
    /// Asymptotically this never rejects; kept for reference runs.
    Raw,
}

impl ScalingMode {
    pub fn factor(self, n: usize, m: usize) -> f64 {
        match self {
            ScalingMode::Calibrated => {
                (2.0 * n as f64 * m as f64 / (n as f64 + m as f64)).sqrt()
            }
            ScalingMode::Raw => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalingMode::Calibrated => "calibrated",
            ScalingMode::Raw => "raw",
        }
    }
}

/// Outcome of the bootstrap two-sample test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    /// The statistic actually compared against the replicates (scaled
    /// according to `scaling`).
    pub statistic: f64,
    /// Unscaled `T_{n,m}`.
    pub raw_statistic: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub scaling: ScalingMode,
    pub plus_one: bool,
    pub warning: Option<String>,
}

/// Derive a per-replicate seed; replicates then run in parallel with
/// order-independent aggregation.
fn replicate_seed(seed: u64, b: u64) -> u64 {
    let mut z = seed ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bootstrap two-sample test: resample curves with replacement within each
/// sample, form the centred processes `G*_n = sqrt(n)(P*_n - P_n)`, and take
/// `theta_b = sup_rho || G*_{n,1} - G*_{m,2} ||_inf`. The p-value is the
/// fraction of replicates exceeding the (scaled) observed statistic; with
/// `plus_one` it is `(1 + #{theta_b >= T}) / (B + 1)`.
pub fn bootstrap_test(
    sample1: &SpectrumSample,
    sample2: &SpectrumSample,
    replicates: usize,
    seed: u64,
    scaling: ScalingMode,
    plus_one: bool,
) -> Result<TestResult> {
    check_compatible(sample1, sample2)?;
    if replicates == 0 {
        return Err(Error::NoReplicates);
    }
    let (n, m) = (sample1.n(), sample2.n());
    if n < 2 || m < 2 {
        return Err(Error::SampleTooSmall {
            needed: 2,
            got: n.min(m),
        });
    }
    let raw_statistic = test_statistic(sample1, sample2)?;
    let statistic = raw_statistic * scaling.factor(n, m);

    let mean1 = sample1.mean();
    let mean2 = sample2.mean();
    let (sqrt_n, sqrt_m) = ((n as f64).sqrt(), (m as f64).sqrt());
    let theta: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, b as u64));
            let idx1: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let idx2: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            let boot1 = sample1.mean_of(&idx1);
            let boot2 = sample2.mean_of(&idx2);
            let mut sup = 0.0f64;
            for (((b1, m1), b2), m2) in boot1
                .iter()
                .zip(mean1.iter())
                .zip(boot2.iter())
                .zip(mean2.iter())
            {
                sup = sup.max((sqrt_n * (b1 - m1) - sqrt_m * (b2 - m2)).abs());
            }
            sup
        })
        .collect();

    let mut warning = None;
    let p_value = if statistic == 0.0 && theta.iter().all(|&t| t == 0.0) {
        warning = Some(
            "degenerate samples: all curves identical in both samples; p-value forced to 1"
                .to_string(),
        );
        1.0
    } else if plus_one {
        let count = theta.iter().filter(|&&t| t >= statistic).count();
        (1 + count) as f64 / (replicates + 1) as f64
    } else {
        let count = theta.iter().filter(|&&t| t > statistic).count();
        count as f64 / replicates as f64
    };

    Ok(TestResult {
        statistic,
        raw_statistic,
        p_value,
        replicates,
        theta,
        seed,
        scaling,
        plus_one,
        warning,
    })
}

/// Inputs of the concentration-bound calculator. `kappa` is the universal
/// bracketing constant, supplied by the user since the bound is only
/// practically useful once it is made explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationParams {
    pub mass_bound: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub t: f64,
}

impl ConcentrationParams {
    pub fn new(mass_bound: f64, k: usize, n: usize, m: usize, kappa: f64, t: f64) -> Result<Self> {
        for (name, v) in [("mass_bound", mass_bound), ("kappa", kappa), ("t", t)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Parse(format!("{name} must be positive, got {v}")));
            }
        }
        if k < 2 || n == 0 || m == 0 {
            return Err(Error::Parse(
                "concentration bound needs k >= 2 and positive sample sizes".to_string(),
            ));
        }
        Ok(ConcentrationParams {
            mass_bound,
            k,
            n,
            m,
            kappa,
            t,
        })
    }
}

/// Evaluation of the tail bound on `P(T_{n,m} > t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationBound {
    /// The usable probability bound, clamped to [0, 1].
    pub bound: f64,
    /// The unclamped sum of exponential terms.
    pub raw_sum: f64,
    /// Set when `t/2` does not exceed the expectation bound, in which case
    /// the inequality carries no information and `bound` is 1.
    pub vacuous: bool,
}

/// Evaluate
/// `sum_{j=2..K} sum_{xi in {n,m}} exp(-(t/2 - EZ_xi)^2 / (2 nu_xi + 2 m^2 t / 3))`
/// with `EZ` and `nu` replaced by their explicit upper bounds
/// `EZ_xi = 4 kappa mb^2 sqrt((2/xi) log(max(K/mb, e^2 mb)))` and
/// `nu_xi = 16 mb^4 kappa sqrt((2/xi) log(max(K/mb, e^2 mb))) + 4 xi mb^4`.
pub fn concentration_bound(params: &ConcentrationParams) -> ConcentrationBound {
    let mb = params.mass_bound;
    let log_term = (params.k as f64 / mb)
        .max(std::f64::consts::E.powi(2) * mb)
        .ln();
    let ez = |xi: usize| params.kappa * 4.0 * mb * mb * (2.0 / xi as f64 * log_term).sqrt();
    let nu = |xi: usize| {
        16.0 * mb.powi(4) * params.kappa * (2.0 / xi as f64 * log_term).sqrt()
            + 4.0 * xi as f64 * mb.powi(4)
    };
    let half_t = params.t / 2.0;
    if half_t <= ez(params.n) || half_t <= ez(params.m) {
        return ConcentrationBound {
            bound: 1.0,
            raw_sum: f64::INFINITY,
            vacuous: true,
        };
    }
    let term = |xi: usize| {
        let gap = half_t - ez(xi);
        (-(gap * gap) / (2.0 * nu(xi) + 2.0 * mb * mb * params.t / 3.0)).exp()
    };
    let raw_sum = (params.k - 1) as f64 * (term(params.n) + term(params.m));
    ConcentrationBound {
        bound: raw_sum.min(1.0),
        raw_sum,
        vacuous: false,
    }
}
