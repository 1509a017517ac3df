//! Path loss, Rayleigh fading, RSRP and SINR.
//!
//! Macro cells use the UMa NLOS closed form and small cells the UMi NLOS
//! closed form, both with default antenna heights folded into the constant.
//! Interference is co-tier only: the two tiers transmit on different bands.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

use crate::scenario::{BaseStation, BsId, Point, Tier};

pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Distances below this are clamped to keep the log term finite.
pub const MIN_DISTANCE_M: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("carrier frequency must be positive, got {0} GHz")]
    Frequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMeasurement {
    pub bs_id: BsId,
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub thermal_noise_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    pub rayleigh_enabled: bool,
}

impl NoiseModel {
    /// Noise power over the given bandwidth, dBm.
    pub fn noise_dbm(&self, bw_mhz: f64) -> f64 {
        self.thermal_noise_dbm_per_hz + 10.0 * (bw_mhz * 1e6).log10() + self.noise_figure_db
    }
}

/// NLOS path loss in dB.
pub fn path_loss_db(tier: Tier, freq_ghz: f64, distance_m: f64) -> Result<f64, ChannelError> {
    if !(freq_ghz > 0.0) {
        return Err(ChannelError::Frequency(freq_ghz));
    }
    Ok(path_loss_unchecked(tier, freq_ghz, distance_m))
}

fn path_loss_unchecked(tier: Tier, freq_ghz: f64, distance_m: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    match tier {
        Tier::Macro => 13.54 + 39.08 * d.log10() + 20.0 * freq_ghz.log10(),
        Tier::Small => 22.4 + 35.3 * d.log10() + 21.3 * freq_ghz.log10(),
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// `10 log10(S / (sum I + N))`, all inputs in dBm.
pub fn sinr_db(signal_dbm: f64, interferer_dbm: &[f64], noise_dbm: f64) -> f64 {
    let interference: f64 = interferer_dbm.iter().copied().map(dbm_to_mw).sum();
    10.0 * (dbm_to_mw(signal_dbm) / (interference + dbm_to_mw(noise_dbm))).log10()
}

/// One measurement per station, in station order.
///
/// With fading enabled each link draws `E ~ Exp(1)` (Rayleigh power gain)
/// and RSRP is reduced by the fading loss `-10 log10(E)`. Draw order is the
/// station order, one draw per link.
pub fn measure<R: Rng + ?Sized>(
    position: Point,
    stations: &[BaseStation],
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<LinkMeasurement> {
    let mut links: Vec<LinkMeasurement> = stations
        .iter()
        .map(|bs| {
            let distance_m = position.distance(&bs.position);
            let mut rsrp_dbm = bs.tx_dbm - path_loss_unchecked(bs.tier, bs.freq_ghz, distance_m);
            if noise.rayleigh_enabled {
                let gain: f64 = Exp1.sample(rng);
                rsrp_dbm += 10.0 * gain.log10();
            }
            LinkMeasurement {
                bs_id: bs.id,
                rsrp_dbm,
                sinr_db: 0.0,
                distance_m,
            }
        })
        .collect();

    let mut interferers = Vec::with_capacity(stations.len());
    for (i, bs) in stations.iter().enumerate() {
        interferers.clear();
        interferers.extend(
            stations
                .iter()
                .zip(&links)
                .enumerate()
                .filter(|(j, (other, _))| *j != i && other.tier == bs.tier)
                .map(|(_, (_, l))| l.rsrp_dbm),
        );
        links[i].sinr_db = sinr_db(links[i].rsrp_dbm, &interferers, noise.noise_dbm(bs.bw_mhz));
    }
    links
}

/// Station with the highest SINR; ties go to the lower id.
pub fn best_by_sinr(links: &[LinkMeasurement]) -> Option<BsId> {
    links
        .iter()
        .fold(None::<&LinkMeasurement>, |best, l| match best {
            Some(b) if b.sinr_db >= l.sinr_db => Some(b),
            _ => Some(l),
        })
        .map(|l| l.bs_id)
}
