//! Synthetic data for the observation model y(tᵢ) = g(tᵢ) + σ εᵢ, the noise
//! families, the residual-sum-of-squares noise estimator, and the
//! observation file contract.

use std::f64::consts::SQRT_2;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{self, frequency, CoefficientMethod, CoefficientVector, UniformGrid};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic, write_json};
use crate::signal::{SignPattern, SignalSpec, SignalSpectrum};
use crate::special::{gamma_fn, hurwitz_zeta};
use crate::spectrum::KernelSpec;

/// Standardized (mean 0, variance 1) noise distributions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    #[default]
    Gaussian,
    /// Symmetric Weibull-type tails: P(|ε| > u) = exp(−(u/Q₀)^q) with Q₀ set
    /// by the unit variance. `tail_scale` is the declared Q in
    /// P(ε > u) ≤ exp(−(u/Q)^q) and must be at least Q₀ (defaults to Q₀).
    Subweibull {
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_scale: Option<f64>,
    },
    /// Student t with `df ≥ 5` degrees of freedom, rescaled to unit variance.
    StudentT { df: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian => Ok(()),
            NoiseModel::Subweibull { q, tail_scale } => {
                if !(q > 0.0 && q.is_finite()) {
                    return Err(Error::config("noise.q", format!("must be finite and > 0, got {q}")));
                }
                let natural = subweibull_scale(q);
                if let Some(declared) = tail_scale {
                    if !(declared >= natural && declared.is_finite()) {
                        return Err(Error::config(
                            "noise.tail_scale",
                            format!("must be >= {natural} for unit variance at q = {q}, got {declared}"),
                        ));
                    }
                }
                Ok(())
            }
            NoiseModel::StudentT { df } => {
                if !(df >= 5.0 && df.is_finite()) {
                    return Err(Error::config("noise.df", format!("must be finite and >= 5, got {df}")));
                }
                Ok(())
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::Subweibull { .. } => "subweibull",
            NoiseModel::StudentT { .. } => "student_t",
        }
    }

    /// (q, Q) of the exponential tail bound, when the family has one.
    pub fn tail_params(&self) -> Option<(f64, f64)> {
        match *self {
            // P(Z > u) ≤ ½ e^{−u²/2} ≤ exp(−(u/√2)²)
            NoiseModel::Gaussian => Some((2.0, SQRT_2)),
            NoiseModel::Subweibull { q, tail_scale } => Some((q, tail_scale.unwrap_or_else(|| subweibull_scale(q)))),
            NoiseModel::StudentT { .. } => None,
        }
    }

    pub fn sampler(&self) -> Result<NoiseSampler> {
        self.validate()?;
        Ok(match *self {
            NoiseModel::Gaussian => NoiseSampler::Gaussian,
            NoiseModel::Subweibull { q, .. } => NoiseSampler::Subweibull {
                inv_q: 1.0 / q,
                scale: subweibull_scale(q),
            },
            NoiseModel::StudentT { df } => NoiseSampler::StudentT {
                dist: StudentT::new(df).map_err(|e| Error::config("noise.df", e.to_string()))?,
                scale: ((df - 2.0) / df).sqrt(),
            },
        })
    }
}

/// Q₀ = Γ(1 + 2/q)^{−1/2}, the Weibull scale with unit second moment.
fn subweibull_scale(q: f64) -> f64 {
    1.0 / gamma_fn(1.0 + 2.0 / q).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub enum NoiseSampler {
    Gaussian,
    Subweibull { inv_q: f64, scale: f64 },
    StudentT { dist: StudentT<f64>, scale: f64 },
}

impl NoiseSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Gaussian => StandardNormal.sample(rng),
            NoiseSampler::Subweibull { inv_q, scale } => {
                let e: f64 = Exp1.sample(rng);
                let magnitude = scale * e.powf(*inv_q);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            NoiseSampler::StudentT { dist, scale } => scale * dist.sample(rng),
        }
    }
}

/// The generator used for every stochastic output: ChaCha8 seeded from a u64.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-replication seed: base + replication index.
pub fn replication_seed(base: u64, replication: usize) -> u64 {
    base.wrapping_add(replication as u64)
}

/// Sidecar metadata describing how observations were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMetadata {
    pub n: usize,
    pub sigma_true: Option<f64>,
    pub seed: Option<u64>,
    pub noise_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    pub signal: Option<SignalSpec>,
    pub kernel: Option<KernelSpec>,
}

/// Noisy values y(tᵢ) on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    grid: UniformGrid,
    y: Vec<f64>,
    sigma_true: Option<f64>,
    seed: Option<u64>,
    provenance: Option<ObservationMetadata>,
}

impl ObservationSet {
    /// Observations from raw grid values, y[i−1] taken at tᵢ = i/n.
    pub fn from_values(y: Vec<f64>) -> Result<Self> {
        let grid = UniformGrid::new(y.len())?;
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observation {} is not finite", pos + 1)));
        }
        Ok(ObservationSet {
            grid,
            y,
            sigma_true: None,
            seed: None,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, meta: ObservationMetadata) -> Self {
        self.sigma_true = meta.sigma_true.or(self.sigma_true);
        self.seed = meta.seed.or(self.seed);
        self.provenance = Some(meta);
        self
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma_true(&self) -> Option<f64> {
        self.sigma_true
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn provenance(&self) -> Option<&ObservationMetadata> {
        self.provenance.as_ref()
    }

    pub fn metadata(&self) -> ObservationMetadata {
        let mut meta = self.provenance.clone().unwrap_or(ObservationMetadata {
            n: self.n(),
            sigma_true: None,
            seed: None,
            noise_family: None,
            noise: None,
            signal: None,
            kernel: None,
        });
        meta.n = self.n();
        meta.sigma_true = self.sigma_true;
        meta.seed = self.seed;
        meta
    }
}

/// Grid values g(tᵢ) = Σ_k c(k) φ_k(tᵢ).
///
/// Frequencies above the grid's resolution alias onto residues modulo n;
/// for power-law spectra each aliased sum is evaluated in closed form, so no
/// truncation of the series is involved. This requires Δ > 1, which makes
/// the series absolutely convergent.
pub fn forward(sig: &SignalSpectrum, grid: UniformGrid) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut cos_amp = vec![0.0; n];
    let mut sin_amp = vec![0.0; n];
    let constant;
    match sig.spec() {
        SignalSpec::Explicit { values } | SignalSpec::TrigPoly { values } => {
            constant = values[0];
            for (idx, &c) in values.iter().enumerate().skip(1) {
                let k = idx + 1;
                let r = frequency(k) % n;
                if k % 2 == 0 {
                    cos_amp[r] += c;
                } else {
                    sin_amp[r] += c;
                }
            }
        }
        SignalSpec::PowerLaw { delta, scale, signs } => {
            if *delta <= 1.0 {
                return Err(Error::Model(format!(
                    "grid values of a power-law signal need delta > 1 for absolute convergence, got {delta}"
                )));
            }
            constant = sig.c(1);
            let nf = n as f64;
            for r in 1..=n {
                let rf = r as f64;
                let sum = match signs {
                    SignPattern::AllPositive => nf.powf(-delta) * hurwitz_zeta(*delta, rf / nf),
                    SignPattern::Alternating if n % 2 == 0 => {
                        let s = if r % 2 == 0 { 1.0 } else { -1.0 };
                        s * nf.powf(-delta) * hurwitz_zeta(*delta, rf / nf)
                    }
                    SignPattern::Alternating => {
                        let s = if r % 2 == 0 { 1.0 } else { -1.0 };
                        let two_n = 2.0 * nf;
                        s * two_n.powf(-delta)
                            * (hurwitz_zeta(*delta, rf / two_n) - hurwitz_zeta(*delta, (rf + nf) / two_n))
                    }
                };
                cos_amp[r % n] += scale * sum;
                sin_amp[r % n] += scale * sum;
            }
        }
    }
    let mut buf: Vec<Complex64> = cos_amp
        .iter()
        .zip(&sin_amp)
        .map(|(&a, &b)| Complex64::new(a, -b))
        .collect();
    basis::inverse_fft(n).process(&mut buf);
    Ok((1..=n).map(|i| constant + SQRT_2 * buf[i % n].re).collect())
}

/// Adds σ·εᵢ to `g` in place using `rng`.
pub fn add_noise<R: Rng + ?Sized>(g: &mut [f64], sigma: f64, sampler: &NoiseSampler, rng: &mut R) {
    for v in g.iter_mut() {
        *v += sigma * sampler.sample(rng);
    }
}

/// y(tᵢ) = g(tᵢ) + σ εᵢ; identical (seed, noise, n) give identical output.
pub fn observe(g: &[f64], sigma: f64, noise: &NoiseModel, seed: u64) -> Result<ObservationSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::config("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let sampler = noise.sampler()?;
    let mut y = g.to_vec();
    if sigma > 0.0 {
        add_noise(&mut y, sigma, &sampler, &mut rng_for(seed));
    }
    let mut obs = ObservationSet::from_values(y)?;
    obs.sigma_true = Some(sigma);
    obs.seed = Some(seed);
    obs.provenance = Some(ObservationMetadata {
        n: obs.n(),
        sigma_true: Some(sigma),
        seed: Some(seed),
        noise_family: Some(noise.family_name().to_string()),
        noise: Some(*noise),
        signal: None,
        kernel: None,
    });
    Ok(obs)
}

/// Ent(n^{1/3}), the default preliminary truncation for [`estimate_sigma`].
pub fn default_pre_truncation(n: usize) -> usize {
    let mut m = (n as f64).cbrt().floor() as usize;
    while (m + 1).pow(3) <= n {
        m += 1;
    }
    while m > 1 && m.pow(3) > n {
        m -= 1;
    }
    m.max(1)
}

/// σ(n) = [Σ (y(tᵢ) − ĝ(tᵢ))² / (n − 1)]^{1/2}, with ĝ the projection fit of
/// g on the first `pre_n` basis functions.
pub fn estimate_sigma(obs: &ObservationSet, pre_n: usize) -> Result<f64> {
    let n = obs.n();
    if pre_n == 0 {
        return Err(Error::Domain("preliminary truncation must be >= 1".into()));
    }
    if 3 * pre_n >= n {
        return Err(Error::Range {
            what: "preliminary truncation",
            value: pre_n,
            bound: (n - 1) / 3,
        });
    }
    let coeffs = CoefficientVector::new(basis::grid_coefficients(obs.values(), pre_n, CoefficientMethod::Fast))?;
    let grid = obs.grid();
    let rss: f64 = grid
        .points()
        .zip(obs.values())
        .map(|(t, y)| {
            let fit = basis::synthesize(&coeffs, None, t).expect("no multipliers");
            (y - fit).powi(2)
        })
        .sum();
    Ok((rss / (n - 1) as f64).sqrt())
}

/// Writes the "i,t,y" table.
pub fn write_observations_csv(path: &Path, obs: &ObservationSet) -> Result<()> {
    let grid = obs.grid();
    write_atomic(path, |w| {
        writeln!(w, "i,t,y")?;
        for (i, y) in obs.values().iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, fmt_f64(grid.point(i + 1)), fmt_f64(*y))?;
        }
        Ok(())
    })
}

pub fn write_metadata_json(path: &Path, obs: &ObservationSet) -> Result<()> {
    write_json(path, &obs.metadata())
}

/// Reads an "i,t,y" table. Rows must be ordered i = 1..n with tᵢ = i/n.
pub fn read_observations_csv(path: &Path) -> Result<ObservationSet> {
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["i", "t", "y"] {
        return Err(parse_err(1, format!("expected header \"i,t,y\", found \"{}\"", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        // row numbers count the header as row 1
        let row = idx + 2;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(row, format!("expected 3 fields, found {}", record.len())));
        }
        let i: usize = record[0].parse().map_err(|_| parse_err(row, format!("bad index {:?}", &record[0])))?;
        let t: f64 = record[1].parse().map_err(|_| parse_err(row, format!("bad position {:?}", &record[1])))?;
        let y: f64 = record[2].parse().map_err(|_| parse_err(row, format!("bad value {:?}", &record[2])))?;
        if i != idx + 1 {
            return Err(parse_err(row, format!("expected index {}, found {i}", idx + 1)));
        }
        if !y.is_finite() {
            return Err(parse_err(row, "value is not finite".into()));
        }
        rows.push((t, y));
    }
    let n = rows.len();
    if n < basis::MIN_SAMPLES {
        return Err(parse_err(n + 1, format!("need at least {} rows, found {n}", basis::MIN_SAMPLES)));
    }
    for (idx, (t, _)) in rows.iter().enumerate() {
        let expected = (idx + 1) as f64 / n as f64;
        if (t - expected).abs() > 1e-9 {
            return Err(parse_err(idx + 2, format!("position {t} is not on the uniform grid (expected {expected})")));
        }
    }
    ObservationSet::from_values(rows.into_iter().map(|(_, y)| y).collect())
}

pub fn read_metadata_json(path: &Path) -> Result<ObservationMetadata> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
