//! Link budget: log-distance path loss with log-normal shadowing, thermal
//! noise over the allocated band, and Shannon capacity.

use serde::{Deserialize, Serialize};

/// Thermal noise floor at room temperature.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance.
    pub ref_loss_db: f64,
    pub shadow_sigma_db: f64,
    pub noise_figure_db: f64,
    /// Informational; the carrier is already reflected in `ref_loss_db`.
    pub carrier_ghz: f64,
    pub server_tx_power_dbm: [f64; 2],
    pub user_tx_power_dbm: [f64; 2],
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pathloss_exponent: 3.5,
            ref_loss_db: 30.0,
            shadow_sigma_db: 8.0,
            noise_figure_db: 6.0,
            carrier_ghz: 3.5,
            server_tx_power_dbm: [30.0, 43.0],
            user_tx_power_dbm: [20.0, 30.0],
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.pathloss_exponent > 0.0) {
            return Err("pathloss_exponent must be positive".into());
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return Err("shadow_sigma_db must be non-negative".into());
        }
        for (name, r) in [
            ("server_tx_power_dbm", self.server_tx_power_dbm),
            ("user_tx_power_dbm", self.user_tx_power_dbm),
        ] {
            if !(r[0] <= r[1]) {
                return Err(format!("{name} range is empty"));
            }
        }
        Ok(())
    }
}

/// A user-server link, fixed for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub gain: f64,
    pub distance_m: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Total path loss in dB; distances below 1 m are clamped to 1 m.
pub fn path_loss_db(distance_m: f64, shadow_db: f64, params: &ChannelParams) -> f64 {
    let d = distance_m.max(1.0);
    params.ref_loss_db + 10.0 * params.pathloss_exponent * d.log10() + shadow_db
}

pub fn path_gain(distance_m: f64, shadow_db: f64, params: &ChannelParams) -> f64 {
    10f64.powf(-path_loss_db(distance_m, shadow_db, params) / 10.0)
}

/// Receiver noise power in watts over `bandwidth_hz`.
pub fn noise_power(bandwidth_hz: f64, params: &ChannelParams) -> f64 {
    if bandwidth_hz <= 0.0 {
        return 0.0;
    }
    let dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + params.noise_figure_db;
    dbm_to_watts(dbm)
}

pub fn shannon_rate(bandwidth_hz: f64, tx_power_w: f64, gain: f64, noise_w: f64) -> f64 {
    if bandwidth_hz <= 0.0 {
        return 0.0;
    }
    bandwidth_hz * (1.0 + tx_power_w * gain / noise_w).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn path_gain_examples() {
        let p = ChannelParams::default();
        assert!(rel(path_gain(1.0, 0.0, &p), 1e-3) < 1e-12);
        assert!(rel(path_gain(10.0, 0.0, &p), 10f64.powf(-6.5)) < 1e-12);
        assert_eq!(path_gain(0.5, 0.0, &p), path_gain(1.0, 0.0, &p));
    }

    #[test]
    fn noise_examples() {
        let p = ChannelParams::default();
        assert!(rel(noise_power(1e6, &p), 10f64.powf(-13.8)) < 1e-12);
        assert!(rel(noise_power(1e6, &p), 1.585e-14) < 1e-3);
        assert_eq!(noise_power(0.0, &p), 0.0);
        assert!(rel(noise_power(1.0, &p), 10f64.powf(-19.8)) < 1e-12);
    }

    #[test]
    fn shannon_examples() {
        assert!(rel(shannon_rate(1e6, 1.0, 1.0, 1.0), 1e6) < 1e-15);
        assert!(rel(shannon_rate(1e7, 3.0, 1.0, 1.0), 2e7) < 1e-15);
        assert_eq!(shannon_rate(0.0, 5.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn path_loss_slope_in_log_distance() {
        let p = ChannelParams::default();
        for (d1, d2) in [(2.0, 20.0), (5.0, 500.0), (17.0, 900.0)] {
            let g1 = 10.0 * path_gain(d1, 0.0, &p).log10();
            let g2 = 10.0 * path_gain(d2, 0.0, &p).log10();
            let slope = (g2 - g1) / (f64::log10(d2) - f64::log10(d1));
            assert!((slope + 35.0).abs() < 1e-9, "slope {slope}");
        }
    }

    #[test]
    fn shadowed_mean_matches_deterministic_loss() {
        let p = ChannelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shadow = Normal::new(0.0, p.shadow_sigma_db).unwrap();
        let n = 100_000;
        let mean_db: f64 = (0..n)
            .map(|_| 10.0 * path_gain(250.0, shadow.sample(&mut rng), &p).log10())
            .sum::<f64>()
            / n as f64;
        let det = -path_loss_db(250.0, 0.0, &p);
        assert!((mean_db - det).abs() < 0.5, "{mean_db} vs {det}");
    }

    proptest! {
        #[test]
        fn shannon_monotone(b in 0.0f64..1e8, db in 0.0f64..1e7, p in 0.0f64..20.0, dp in 0.0f64..5.0,
                            g in 1e-15f64..1e-3, dg in 0.0f64..1e-3) {
            let n = 1e-13;
            let base = shannon_rate(b, p, g, n);
            prop_assert!(shannon_rate(b + db, p, g, n) >= base);
            prop_assert!(shannon_rate(b, p + dp, g, n) >= base);
            prop_assert!(shannon_rate(b, p, g + dg, n) >= base);
        }
    }
}
