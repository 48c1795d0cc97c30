//! Radio-geometry primitives: Poisson interferer fields, power-law path
//! gain, Rayleigh fading, aggregate interference, and SINR evaluation.
//!
//! Everything is in linear units (watts, dimensionless gains); dB conversion
//! happens only at the configuration boundary. All stochastic operations take
//! an explicit random stream so callers control reproducibility.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum link distance in meters. Applied by interference/gain callers
/// before evaluating the power-law, which diverges at zero separation.
pub const MIN_LINK_DISTANCE: f64 = 0.1;

/// A location in the 2D simulation plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Fading law applied per link per slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingKind {
    /// No fading: the power coefficient is exactly 1.
    None,
    /// Rayleigh fading: exponentially distributed power with unit mean.
    Rayleigh,
}

/// Propagation model: power-law path loss plus optional Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    /// Path-loss exponent alpha. Must exceed 2 so an infinite Poisson field
    /// has finite mean interference.
    pub pathloss_exponent: f64,
    /// Linear power gain at unit distance.
    pub reference_gain: f64,
    #[serde(rename = "fading")]
    pub fading_kind: FadingKind,
    /// Linear watts; may be 0 for interference-limited SIR analysis.
    pub noise_power: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::Config(format!(
                "channel.pathloss_exponent must exceed 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.reference_gain > 0.0) {
            return Err(Error::Config(format!(
                "channel.reference_gain must be positive, got {}",
                self.reference_gain
            )));
        }
        if !(self.noise_power >= 0.0) {
            return Err(Error::Config(format!(
                "channel.noise_power must be non-negative, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            pathloss_exponent: 4.0,
            reference_gain: 1.0,
            fading_kind: FadingKind::Rayleigh,
            noise_power: 0.0,
        }
    }
}

/// Homogeneous Poisson field of interferers on a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldModel {
    /// Interferers per square meter.
    pub density: f64,
    /// Per-interferer transmit power, linear watts.
    pub tx_power: f64,
    /// Simulation disk radius, meters.
    pub region_radius: f64,
}

impl FieldModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.density >= 0.0) {
            return Err(Error::Config(format!(
                "field.density must be non-negative, got {}",
                self.density
            )));
        }
        if !(self.tx_power > 0.0) {
            return Err(Error::Config(format!(
                "field.tx_power must be positive, got {}",
                self.tx_power
            )));
        }
        if !(self.region_radius > 0.0) {
            return Err(Error::Config(format!(
                "field.region_radius must be positive, got {}",
                self.region_radius
            )));
        }
        Ok(())
    }

    /// Expected number of interferers on the disk.
    pub fn mean_count(&self) -> f64 {
        self.density * std::f64::consts::PI * self.region_radius * self.region_radius
    }

    /// Fraction of the mean interference at the disk center that is lost by
    /// truncating the field at `region_radius`.
    ///
    /// Mean interference from an annulus [a, b] is
    /// 2*pi*lambda*P*k * (a^(2-alpha) - b^(2-alpha)) / (alpha - 2); the
    /// fraction uses [MIN_LINK_DISTANCE, R] as the retained part and
    /// [R, inf) as the lost tail.
    pub fn truncation_tail_fraction(&self, channel: &ChannelModel) -> f64 {
        if self.density == 0.0 {
            return 0.0;
        }
        let alpha = channel.pathloss_exponent;
        let tail = self.region_radius.powf(2.0 - alpha);
        let total = MIN_LINK_DISTANCE.powf(2.0 - alpha);
        tail / total
    }
}

impl Default for FieldModel {
    fn default() -> Self {
        Self {
            density: 0.0,
            tx_power: 1.0,
            region_radius: 500.0,
        }
    }
}

/// Dense matrix of linear power gains, indexed (tx, rx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    n_tx: usize,
    n_rx: usize,
    gains: Vec<f64>,
}

impl GainMatrix {
    /// Build from rows (one per transmitter). Every entry must be positive
    /// and every row the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_tx = rows.len();
        let n_rx = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut gains = Vec::with_capacity(n_tx * n_rx);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_rx {
                return Err(Error::Config(format!(
                    "gain matrix row {i} has {} entries, expected {n_rx}",
                    row.len()
                )));
            }
            for (j, &g) in row.iter().enumerate() {
                if !(g > 0.0) {
                    return Err(Error::Config(format!(
                        "gain matrix entry ({i}, {j}) must be positive, got {g}"
                    )));
                }
                gains.push(g);
            }
        }
        Ok(Self { n_tx, n_rx, gains })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        assert!(tx < self.n_tx && rx < self.n_rx, "gain index out of range");
        self.gains[tx * self.n_rx + rx]
    }
}

/// Sample a homogeneous Poisson point process on the field's disk, centered
/// at the origin. Point count is Poisson(lambda * pi * R^2); points are
/// uniform on the disk. Zero density yields the empty set.
pub fn sample_ppp<R: Rng + ?Sized>(field: &FieldModel, rng: &mut R) -> Vec<Point> {
    let mut points = Vec::new();
    sample_ppp_into(field, rng, &mut points);
    points
}

/// Buffer-reusing variant of [`sample_ppp`] for rejection-sampling loops.
pub fn sample_ppp_into<R: Rng + ?Sized>(field: &FieldModel, rng: &mut R, out: &mut Vec<Point>) {
    out.clear();
    let mean = field.mean_count();
    if mean == 0.0 {
        return;
    }
    let count = Poisson::new(mean)
        .expect("validated field has positive mean count")
        .sample(rng) as usize;
    out.reserve(count);
    for _ in 0..count {
        // Uniform on the disk: radius via sqrt of a uniform.
        let r = field.region_radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        out.push(Point::new(r * phi.cos(), r * phi.sin()));
    }
}

/// Power-law path gain `reference_gain * distance^(-alpha)`.
///
/// Errors on non-positive distance; callers clamp to [`MIN_LINK_DISTANCE`]
/// before evaluating realistic topologies.
pub fn path_gain(distance: f64, channel: &ChannelModel) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::DegenerateColocation);
    }
    Ok(channel.reference_gain * distance.powf(-channel.pathloss_exponent))
}

/// One fading power coefficient: exactly 1 without fading, Exp(1) under
/// Rayleigh.
pub fn sample_fading<R: Rng + ?Sized>(channel: &ChannelModel, rng: &mut R) -> f64 {
    match channel.fading_kind {
        FadingKind::None => 1.0,
        FadingKind::Rayleigh => Exp1.sample(rng),
    }
}

/// Aggregate interference at `location` from a set of interferer points,
/// each at `field.tx_power`, with independent fading per link.
///
/// Distances are clamped to [`MIN_LINK_DISTANCE`]. Points are accumulated in
/// slice order, so splitting a point set keeps fading draws aligned with the
/// concatenated evaluation.
pub fn aggregate_interference<R: Rng + ?Sized>(
    location: Point,
    interferers: &[Point],
    channel: &ChannelModel,
    field: &FieldModel,
    rng: &mut R,
) -> f64 {
    let alpha = channel.pathloss_exponent;
    let mut total = 0.0;
    for p in interferers {
        let d = location.distance_to(p).max(MIN_LINK_DISTANCE);
        let gain = channel.reference_gain * d.powf(-alpha);
        total += field.tx_power * gain * sample_fading(channel, rng);
    }
    total
}

/// SINR at receiver `rx` for the signal of `desired_tx`, given the set of
/// active transmitters `(index, power)` and an extra external interference
/// term:
///
/// `P_d * g(d, rx) / (sum_{j != d} P_j * g(j, rx) + external + noise)`
pub fn sinr(
    rx: usize,
    desired_tx: usize,
    active: &[(usize, f64)],
    gains: &GainMatrix,
    external_interference: f64,
    channel: &ChannelModel,
) -> Result<f64> {
    let desired_power = active
        .iter()
        .find(|(tx, p)| *tx == desired_tx && *p > 0.0)
        .map(|(_, p)| *p)
        .ok_or(Error::DesiredInactive(desired_tx))?;
    let signal = desired_power * gains.get(desired_tx, rx);
    let mut denom = external_interference + channel.noise_power;
    for &(tx, power) in active {
        if tx != desired_tx {
            denom += power * gains.get(tx, rx);
        }
    }
    if denom == 0.0 {
        return Err(Error::SilentNetwork);
    }
    Ok(signal / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn no_fading() -> ChannelModel {
        ChannelModel {
            fading_kind: FadingKind::None,
            ..ChannelModel::default()
        }
    }

    #[test]
    fn ppp_zero_density_is_empty() {
        let field = FieldModel {
            density: 0.0,
            tx_power: 1.0,
            region_radius: 100.0,
        };
        assert!(sample_ppp(&field, &mut stream(1, "ppp", 0)).is_empty());
    }

    #[test]
    fn ppp_same_seed_same_points() {
        let field = FieldModel {
            density: 1e-3,
            tx_power: 1.0,
            region_radius: 200.0,
        };
        let a = sample_ppp(&field, &mut stream(9, "ppp", 0));
        let b = sample_ppp(&field, &mut stream(9, "ppp", 0));
        assert_eq!(a, b);
    }

    #[test]
    fn ppp_count_mean_and_variance_match_poisson() {
        // lambda * pi * R^2 = 1e-3 * pi * 500^2 = 785.398...
        let field = FieldModel {
            density: 1e-3,
            tx_power: 1.0,
            region_radius: 500.0,
        };
        let expected = field.mean_count();
        assert!((expected - 785.398).abs() < 1e-3);

        let n = 10_000usize;
        let mut rng = stream(1234, "ppp-count", 0);
        let counts: Vec<f64> = (0..n)
            .map(|_| sample_ppp(&field, &mut rng).len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64;

        // 3-sigma bands for the sample mean and sample variance of a Poisson.
        let mean_sigma = (expected / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * mean_sigma,
            "mean {mean} vs expected {expected}"
        );
        let var_sigma = ((2.0 * expected * expected + expected) / n as f64).sqrt();
        assert!(
            (var - expected).abs() < 3.0 * var_sigma,
            "variance {var} vs expected {expected}"
        );
    }

    #[test]
    fn ppp_points_stay_on_disk() {
        let field = FieldModel {
            density: 1e-3,
            tx_power: 1.0,
            region_radius: 50.0,
        };
        let origin = Point::new(0.0, 0.0);
        for p in sample_ppp(&field, &mut stream(5, "ppp", 1)) {
            assert!(origin.distance_to(&p) <= field.region_radius);
        }
    }

    #[test]
    fn path_gain_worked_values() {
        let mut ch = no_fading();
        assert_eq!(path_gain(1.0, &ch).unwrap(), 1.0);
        assert!((path_gain(10.0, &ch).unwrap() - 1e-4).abs() < 1e-18);
        ch.reference_gain = 0.5;
        ch.pathloss_exponent = 3.0;
        assert!((path_gain(2.0, &ch).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn path_gain_zero_distance_errors() {
        assert!(matches!(
            path_gain(0.0, &no_fading()),
            Err(Error::DegenerateColocation)
        ));
    }

    #[test]
    fn fading_none_is_unit() {
        let ch = no_fading();
        let mut rng = stream(1, "fading", 0);
        for _ in 0..10 {
            assert_eq!(sample_fading(&ch, &mut rng), 1.0);
        }
    }

    #[test]
    fn rayleigh_fading_statistics() {
        let ch = ChannelModel::default();
        let mut rng = stream(7, "fading", 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut above_one = 0usize;
        for _ in 0..n {
            let h = sample_fading(&ch, &mut rng);
            sum += h;
            if h > 1.0 {
                above_one += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let tail = above_one as f64 / n as f64;
        assert!(
            (tail - (-1.0f64).exp()).abs() < 0.005,
            "P(h > 1) = {tail}, expected {}",
            (-1.0f64).exp()
        );
    }

    #[test]
    fn aggregate_interference_worked_values() {
        let ch = no_fading();
        let field = FieldModel {
            density: 1e-3,
            tx_power: 1.0,
            region_radius: 100.0,
        };
        let at = Point::new(0.0, 0.0);
        let mut rng = stream(1, "agg", 0);
        assert_eq!(aggregate_interference(at, &[], &ch, &field, &mut rng), 0.0);

        let one = vec![Point::new(10.0, 0.0)];
        let i1 = aggregate_interference(at, &one, &ch, &field, &mut rng);
        assert!((i1 - 1e-4).abs() < 1e-18);

        let two = vec![Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
        let i2 = aggregate_interference(at, &two, &ch, &field, &mut rng);
        assert!((i2 - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn aggregate_additivity_with_matched_fading() {
        let ch = ChannelModel::default(); // rayleigh
        let field = FieldModel {
            density: 1e-3,
            tx_power: 2.0,
            region_radius: 100.0,
        };
        let at = Point::new(1.0, -2.0);
        let set_a = vec![Point::new(5.0, 5.0), Point::new(-3.0, 8.0)];
        let set_b = vec![Point::new(20.0, 1.0)];
        let union: Vec<Point> = set_a.iter().chain(set_b.iter()).copied().collect();

        let total = aggregate_interference(at, &union, &ch, &field, &mut stream(3, "agg", 1));
        // Same stream, consumed across the two disjoint subsets in order.
        let mut rng = stream(3, "agg", 1);
        let part_a = aggregate_interference(at, &set_a, &ch, &field, &mut rng);
        let part_b = aggregate_interference(at, &set_b, &ch, &field, &mut rng);
        assert!((total - (part_a + part_b)).abs() < 1e-15 * total);
    }

    #[test]
    fn sinr_worked_values() {
        // Two-transmitter gain matrix: rows are TXs, columns are RXs.
        let gains = GainMatrix::from_rows(vec![vec![0.04, 0.05], vec![0.05, 0.04]]).unwrap();
        let ch = ChannelModel {
            noise_power: 0.0,
            ..no_fading()
        };
        let both = [(0usize, 1.0), (1usize, 1.0)];

        let s1 = sinr(0, 0, &both, &gains, 0.0125, &ch).unwrap();
        assert!((s1 - 0.64).abs() < 1e-12, "{s1}");
        let s2 = sinr(1, 1, &both, &gains, 0.02, &ch).unwrap();
        assert!((s2 - 0.04 / 0.07).abs() < 1e-12, "{s2}");

        let only_tx1 = [(0usize, 1.0)];
        let s1_alone = sinr(0, 0, &only_tx1, &gains, 0.0125, &ch).unwrap();
        assert!((s1_alone - 3.2).abs() < 1e-12, "{s1_alone}");
    }

    #[test]
    fn sinr_zero_denominator_errors() {
        let gains = GainMatrix::from_rows(vec![vec![0.04]]).unwrap();
        let ch = ChannelModel {
            noise_power: 0.0,
            ..no_fading()
        };
        assert!(matches!(
            sinr(0, 0, &[(0, 1.0)], &gains, 0.0, &ch),
            Err(Error::SilentNetwork)
        ));
    }

    #[test]
    fn sinr_desired_inactive_errors() {
        let gains = GainMatrix::from_rows(vec![vec![0.04]]).unwrap();
        let ch = no_fading();
        assert!(matches!(
            sinr(0, 0, &[], &gains, 0.1, &ch),
            Err(Error::DesiredInactive(0))
        ));
    }

    #[test]
    fn gain_matrix_rejects_non_positive_entries() {
        assert!(GainMatrix::from_rows(vec![vec![0.04, 0.0]]).is_err());
        assert!(GainMatrix::from_rows(vec![vec![0.04], vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn truncation_tail_fraction_small_for_default_radius() {
        let field = FieldModel {
            density: 1e-3,
            tx_power: 1.0,
            region_radius: 500.0,
        };
        let frac = field.truncation_tail_fraction(&ChannelModel::default());
        assert!(frac < 1e-6, "{frac}");
        let empty = FieldModel {
            density: 0.0,
            ..field
        };
        assert_eq!(empty.truncation_tail_fraction(&ChannelModel::default()), 0.0);
    }

    proptest! {
        #[test]
        fn path_gain_strictly_decreasing(d in 0.1f64..1e4, factor in 1.01f64..10.0) {
            let ch = no_fading();
            let near = path_gain(d, &ch).unwrap();
            let far = path_gain(d * factor, &ch).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn sinr_monotone_in_interference_and_power(
            ext in 0.0f64..1.0,
            extra in 1e-6f64..1.0,
            p2 in 0.1f64..10.0,
            boost in 1.01f64..10.0,
        ) {
            let gains = GainMatrix::from_rows(vec![vec![0.04, 0.05], vec![0.05, 0.04]]).unwrap();
            let ch = ChannelModel { noise_power: 1e-9, ..no_fading() };
            let base = sinr(0, 0, &[(0, 1.0), (1, p2)], &gains, ext, &ch).unwrap();
            // More external interference strictly lowers SINR.
            let worse = sinr(0, 0, &[(0, 1.0), (1, p2)], &gains, ext + extra, &ch).unwrap();
            prop_assert!(worse < base);
            // A stronger interferer strictly lowers SINR.
            let worse2 = sinr(0, 0, &[(0, 1.0), (1, p2 * boost)], &gains, ext, &ch).unwrap();
            prop_assert!(worse2 < base);
            // More desired power strictly raises SINR.
            let better = sinr(0, 0, &[(0, boost), (1, p2)], &gains, ext, &ch).unwrap();
            prop_assert!(better > base);
        }

        #[test]
        fn sinr_scale_invariant(c in 1e-3f64..1e3, ext in 1e-6f64..1.0) {
            let gains = GainMatrix::from_rows(vec![vec![0.04, 0.05], vec![0.05, 0.04]]).unwrap();
            let ch = ChannelModel { noise_power: 1e-6, ..no_fading() };
            let scaled_ch = ChannelModel { noise_power: 1e-6 * c, ..no_fading() };
            let base = sinr(0, 0, &[(0, 1.0), (1, 0.5)], &gains, ext, &ch).unwrap();
            let scaled = sinr(0, 0, &[(0, c), (1, 0.5 * c)], &gains, ext * c, &scaled_ch).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.abs());
        }
    }
}
