//! Temporally correlated Rayleigh channels.
//!
//! Every link is a vector of circularly symmetric complex Gaussian gains that
//! evolves slot to slot through a first-order Gauss-Markov recursion
//!
//! ```text
//! h(t) = rho * h(t-1) + sqrt(1 - rho^2) * e(t),    e(t) ~ CN(0, s^2 I)
//! ```
//!
//! With `innovation_variance == element_variance` the process is stationary.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-length vector of complex channel gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        Self(entries)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Builds a vector from `(re, im)` pairs.
    pub fn from_parts(parts: &[(f64, f64)]) -> Self {
        Self(parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Sum of `re^2 + im^2` over all entries.
    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * c).collect())
    }

    /// Appends interleaved `(re, im)` features to `out`.
    pub fn extend_features(&self, out: &mut Vec<f64>) {
        for z in &self.0 {
            out.push(z.re);
            out.push(z.im);
        }
    }
}

/// See [`squared_norm`](ComplexVector::squared_norm).
pub fn squared_norm(h: &ComplexVector) -> f64 {
    h.squared_norm()
}

/// Parameters of one Gauss-Markov link class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingParams {
    pub rho: f64,
    pub element_variance: f64,
    pub innovation_variance: f64,
}

impl FadingParams {
    pub fn new(rho: f64, element_variance: f64, innovation_variance: f64) -> Result<Self> {
        let params = Self {
            rho,
            element_variance,
            innovation_variance,
        };
        params.validate()?;
        Ok(params)
    }

    /// Stationary process: innovations share the element variance.
    pub fn stationary(rho: f64, variance: f64) -> Result<Self> {
        Self::new(rho, variance, variance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho {} outside [0, 1]", self.rho)));
        }
        if !(self.element_variance > 0.0 && self.element_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "element variance {} must be positive",
                self.element_variance
            )));
        }
        if !(self.innovation_variance > 0.0 && self.innovation_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "innovation variance {} must be positive",
                self.innovation_variance
            )));
        }
        Ok(())
    }
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            rho: 0.95,
            element_variance: 1.0,
            innovation_variance: 1.0,
        }
    }
}

fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Draws `dims` i.i.d. CN(0, variance) entries.
pub fn sample_initial<R: Rng + ?Sized>(
    dims: usize,
    variance: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    if dims == 0 {
        return Err(Error::invalid("channel dimension must be at least 1"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance {variance} must be positive")));
    }
    Ok(ComplexVector(
        (0..dims).map(|_| complex_gaussian(variance, rng)).collect(),
    ))
}

/// One step of the autoregressive recursion.
pub fn evolve<R: Rng + ?Sized>(
    h_prev: &ComplexVector,
    params: &FadingParams,
    rng: &mut R,
) -> Result<ComplexVector> {
    params.validate()?;
    let rho = params.rho;
    let innovation_gain = (1.0 - rho * rho).sqrt();
    Ok(ComplexVector(
        h_prev
            .0
            .iter()
            .map(|&h| rho * h + innovation_gain * complex_gaussian(params.innovation_variance, rng))
            .collect(),
    ))
}

/// Zeroth-order Bessel function of the first kind.
///
/// Evaluates Bessel's integral `J0(x) = (1/pi) * int_0^pi cos(x sin t) dt` with
/// the trapezoidal rule. The integrand is smooth and periodic, so the rule
/// converges geometrically once the node count exceeds `|x|`.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let n = 48 + x.ceil() as usize;
    let h = std::f64::consts::PI / n as f64;
    let interior: f64 = (1..n).map(|k| (x * (k as f64 * h).sin()).cos()).sum();
    (1.0 + interior) / n as f64
}

/// Jakes temporal correlation `rho = J0(2 pi f_d tau)`.
pub fn correlation_from_doppler(doppler_hz: f64, slot_seconds: f64) -> Result<f64> {
    if !(doppler_hz >= 0.0 && doppler_hz.is_finite()) {
        return Err(Error::invalid(format!(
            "doppler frequency {doppler_hz} must be non-negative"
        )));
    }
    if !(slot_seconds > 0.0 && slot_seconds.is_finite()) {
        return Err(Error::invalid(format!(
            "slot length {slot_seconds} must be positive"
        )));
    }
    Ok(bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * slot_seconds))
}

/// Fading parameters for the three link classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFading {
    /// Source to relay.
    pub si: FadingParams,
    /// Relay to destination.
    pub id: FadingParams,
    /// Source to destination.
    pub sd: FadingParams,
}

impl LinkFading {
    pub fn uniform(params: FadingParams) -> Self {
        Self {
            si: params,
            id: params,
            sd: params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.si.validate()?;
        self.id.validate()?;
        self.sd.validate()
    }
}

impl Default for LinkFading {
    fn default() -> Self {
        Self::uniform(FadingParams::default())
    }
}

/// All channel gains of one time slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSnapshot {
    /// Source to relay `k`, length `N_S` each.
    pub h_si: Vec<ComplexVector>,
    /// Relay `k` to destination, length `N_D` each.
    pub h_id: Vec<ComplexVector>,
    /// Source to destination, `N_S x N_D` row-major.
    pub h_sd: ComplexVector,
    pub slot_index: u64,
}

impl ChannelSnapshot {
    pub fn draw<R: Rng + ?Sized>(
        relays: usize,
        source_antennas: usize,
        destination_antennas: usize,
        fading: &LinkFading,
        rng: &mut R,
    ) -> Result<Self> {
        if relays == 0 {
            return Err(Error::invalid("at least one relay is required"));
        }
        let h_si = (0..relays)
            .map(|_| sample_initial(source_antennas, fading.si.element_variance, rng))
            .collect::<Result<Vec<_>>>()?;
        let h_id = (0..relays)
            .map(|_| sample_initial(destination_antennas, fading.id.element_variance, rng))
            .collect::<Result<Vec<_>>>()?;
        let h_sd = sample_initial(
            source_antennas * destination_antennas,
            fading.sd.element_variance,
            rng,
        )?;
        Ok(Self {
            h_si,
            h_id,
            h_sd,
            slot_index: 0,
        })
    }

    /// Advances every link one slot.
    pub fn advance<R: Rng + ?Sized>(&self, fading: &LinkFading, rng: &mut R) -> Result<Self> {
        let h_si = self
            .h_si
            .iter()
            .map(|h| evolve(h, &fading.si, rng))
            .collect::<Result<Vec<_>>>()?;
        let h_id = self
            .h_id
            .iter()
            .map(|h| evolve(h, &fading.id, rng))
            .collect::<Result<Vec<_>>>()?;
        let h_sd = evolve(&self.h_sd, &fading.sd, rng)?;
        Ok(Self {
            h_si,
            h_id,
            h_sd,
            slot_index: self.slot_index + 1,
        })
    }

    pub fn relays(&self) -> usize {
        self.h_si.len()
    }

    pub fn feature_len(&self) -> usize {
        2 * (self.h_si.iter().map(ComplexVector::len).sum::<usize>()
            + self.h_id.iter().map(ComplexVector::len).sum::<usize>()
            + self.h_sd.len())
    }

    /// Flattens the snapshot: all `h_si` by relay, all `h_id` by relay, then `h_sd`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_len());
        for h in &self.h_si {
            h.extend_features(&mut out);
        }
        for h in &self.h_id {
            h.extend_features(&mut out);
        }
        self.h_sd.extend_features(&mut out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.h_si.iter().all(ComplexVector::is_finite)
            && self.h_id.iter().all(ComplexVector::is_finite)
            && self.h_sd.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    // mpmath besselj(0, x) at 40 digits
    const J0_REFERENCE: &[(f64, f64)] = &[
        (0.0, 1.0),
        (0.5, 0.938_469_807_240_812_9),
        (1.0, 0.765_197_686_557_966_6),
        (2.0, 0.223_890_779_141_235_67),
        (2.404_825_557_695_773, -6.108_765_259_736_73e-17),
        (3.0, -0.260_051_954_901_933_4),
        (5.0, -0.177_596_771_314_338_3),
        (5.520_078_110_286_311, -2.752_264_943_262_183e-17),
        (7.5, 0.266_339_657_880_378_4),
        (10.0, -0.245_935_764_451_348_34),
        (12.5, 0.146_884_054_700_421_1),
        (15.0, -0.014_224_472_826_780_773),
        (17.5, -0.103_110_398_228_685_92),
        (20.0, 0.167_024_664_340_583_15),
    ];

    /// Direct power series, fine for small arguments.
    fn j0_series(x: f64) -> f64 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= q / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn squared_norm_examples() {
        assert_eq!(ComplexVector::zeros(3).squared_norm(), 0.0);
        assert_eq!(ComplexVector::from_parts(&[(3.0, 4.0)]).squared_norm(), 25.0);
        assert_eq!(
            ComplexVector::from_parts(&[(1.0, 0.0), (0.0, 1.0)]).squared_norm(),
            2.0
        );
    }

    #[test]
    fn sample_initial_rejects_bad_arguments() {
        let mut rng = seeded_rng(1);
        assert!(matches!(
            sample_initial(0, 1.0, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
        assert!(sample_initial(2, 0.0, &mut rng).is_err());
        assert!(sample_initial(2, -1.0, &mut rng).is_err());
    }

    #[test]
    fn sample_initial_variance_monte_carlo() {
        let mut rng = seeded_rng(7);
        let draws = 100_000;
        let mut total = 0.0;
        let mut re_sq = 0.0;
        for _ in 0..draws {
            let h = sample_initial(4, 1.0, &mut rng).unwrap();
            assert!(h.is_finite());
            total += h.squared_norm() / 4.0;
            re_sq += h.entries()[0].re.powi(2);
        }
        let per_entry = total / draws as f64;
        assert!((per_entry - 1.0).abs() < 0.02, "per-entry variance {per_entry}");
        let re_var = re_sq / draws as f64;
        assert!((re_var - 0.5).abs() < 0.02, "real-part variance {re_var}");
    }

    #[test]
    fn tiny_variance_gives_tiny_entries() {
        let mut rng = seeded_rng(3);
        for _ in 0..1000 {
            let h = sample_initial(1, 1e-12, &mut rng).unwrap();
            assert!(h.squared_norm() < 1e-6);
        }
    }

    #[test]
    fn evolve_degenerate_correlations() {
        let mut rng = seeded_rng(11);
        let h = sample_initial(5, 1.0, &mut rng).unwrap();
        let frozen = FadingParams::stationary(1.0, 1.0).unwrap();
        assert_eq!(evolve(&h, &frozen, &mut rng).unwrap(), h);

        // rho = 0: output is exactly the innovation draw
        let white = FadingParams::stationary(0.0, 1.0).unwrap();
        let mut a = seeded_rng(5);
        let mut b = seeded_rng(5);
        let from_h = evolve(&h, &white, &mut a).unwrap();
        let from_zero = evolve(&ComplexVector::zeros(5), &white, &mut b).unwrap();
        assert_eq!(from_h, from_zero);
    }

    #[test]
    fn evolve_lag_one_correlation() {
        let params = FadingParams::stationary(0.95, 1.0).unwrap();
        let mut rng = seeded_rng(2024);
        let mut h = sample_initial(1, 1.0, &mut rng).unwrap();
        let steps = 100_000;
        let mut xs = Vec::with_capacity(steps + 1);
        xs.push(h.entries()[0].re);
        for _ in 0..steps {
            h = evolve(&h, &params, &mut rng).unwrap();
            xs.push(h.entries()[0].re);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let cov = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (xs.len() - 1) as f64;
        let corr = cov / var;
        assert!((corr - 0.95).abs() < 0.01, "lag-1 correlation {corr}");
    }

    #[test]
    fn evolve_preserves_stationary_variance() {
        let params = FadingParams::stationary(0.8, 2.0).unwrap();
        let mut rng = seeded_rng(99);
        let mut h = sample_initial(1, 2.0, &mut rng).unwrap();
        let steps = 100_000;
        let mut acc = 0.0;
        for _ in 0..steps {
            h = evolve(&h, &params, &mut rng).unwrap();
            acc += h.squared_norm();
        }
        let var = acc / steps as f64;
        assert!((var / 2.0 - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn evolve_rejects_invalid_params() {
        let mut rng = seeded_rng(0);
        let h = ComplexVector::zeros(2);
        let bad = FadingParams {
            rho: 1.5,
            element_variance: 1.0,
            innovation_variance: 1.0,
        };
        assert!(evolve(&h, &bad, &mut rng).is_err());
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(correlation_from_doppler(0.0, 1e-3).unwrap(), 1.0);
        let tau = 1.0 / (2.0 * std::f64::consts::PI);
        let at_one = correlation_from_doppler(1.0, tau).unwrap();
        assert!((at_one - 0.765_198).abs() < 1e-6);
        assert!((at_one - j0_series(1.0)).abs() < 1e-14);
        let zero = correlation_from_doppler(2.404_826, tau).unwrap();
        assert!(zero.abs() < 1e-5);
        assert!(correlation_from_doppler(-1.0, 1e-3).is_err());
        assert!(correlation_from_doppler(1.0, 0.0).is_err());
    }

    #[test]
    fn bessel_matches_reference_values() {
        for &(x, expected) in J0_REFERENCE {
            let got = bessel_j0(x);
            assert!((got - expected).abs() < 1e-9, "J0({x}) = {got}, want {expected}");
        }
        for i in 0..=40 {
            let x = i as f64 * 0.1;
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_is_even_and_bounded() {
        for i in 0..=2000 {
            let x = i as f64 * 0.01;
            let v = bessel_j0(x);
            assert_eq!(v, bessel_j0(-x));
            assert!((-0.5..=1.0).contains(&v));
        }
    }

    #[test]
    fn snapshot_layout() {
        let mut rng = seeded_rng(4);
        let snap = ChannelSnapshot::draw(10, 2, 2, &LinkFading::default(), &mut rng).unwrap();
        assert_eq!(snap.feature_len(), 88);
        let f = snap.features();
        assert_eq!(f.len(), 88);
        assert_eq!(f[0], snap.h_si[0].entries()[0].re);
        assert_eq!(f[1], snap.h_si[0].entries()[0].im);
        assert_eq!(f[40], snap.h_id[0].entries()[0].re);
        assert_eq!(f[80], snap.h_sd.entries()[0].re);
        let next = snap.advance(&LinkFading::default(), &mut rng).unwrap();
        assert_eq!(next.slot_index, 1);
        assert_eq!(next.feature_len(), 88);
    }
}
