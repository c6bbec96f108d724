//! User profiles: anchor places, their radio environments and a weekly
//! timetable.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geo::GeodeticCoord;

pub const HOURS_PER_WEEK: usize = 7 * 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub name: String,
    pub mac: String,
    pub frequency: String,
}

/// The network a device joins at a place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiNetwork {
    pub ssid: String,
    pub router_mac: String,
    pub ip: String,
    pub network_id: String,
    pub frequency: String,
    pub router_ip: String,
    pub dns1: String,
    pub dns2: String,
    pub rssi_mean: f64,
    pub rssi_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiEnvironment {
    /// `None` when the device keeps Wi-Fi off here.
    pub connected: Option<WifiNetwork>,
    pub nearby: Vec<AccessPoint>,
    /// Chance each nearby AP shows up in a given scan.
    pub nearby_visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEnvironment {
    pub operator: String,
    pub mcc_mnc: String,
    pub lac: String,
    pub cell_ids: Vec<String>,
    pub data_type: String,
    pub rssi_mean: f64,
    pub rssi_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BluetoothDevice {
    pub name: String,
    pub mac: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
    /// Degrees, degrees, meters above the ellipsoid.
    pub anchor: GeodeticCoord,
    /// dBFS
    pub noise_mean: f64,
    pub noise_std: f64,
    /// µT
    pub mag_mean: f64,
    pub mag_std: f64,
    /// degrees
    pub inclination_mean: f64,
    pub inclination_std: f64,
    pub wifi: WifiEnvironment,
    pub cell: CellEnvironment,
    pub bluetooth: Vec<BluetoothDevice>,
    pub bluetooth_visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub name: String,
    pub places: Vec<Place>,
    /// Seven rows (Monday first) of 24 place indices.
    pub schedule: Vec<Vec<usize>>,
    /// Standard deviation of horizontal position noise, meters.
    pub gps_noise_std: f64,
    /// Share of samples taken between two places.
    pub transition_fraction: f64,
    /// Share of hours spent somewhere other than the timetable says.
    pub schedule_noise: f64,
    /// Weather-report reference pressure (hPa) and temperature (°C).
    pub ref_pressure: f64,
    pub ref_temp: f64,
    /// Standard deviation of barometer readings, hPa.
    pub pressure_std: f64,
    /// Unix time of the first sample; treated as Monday 00:00 local.
    pub start_timestamp: i64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Profile { user: self.name.clone(), msg: m });
        if self.places.len() < 2 {
            return bad(format!("{} places, need at least 2", self.places.len()));
        }
        if self.schedule.len() != 7 || self.schedule.iter().any(|d| d.len() != 24) {
            return bad("schedule must be 7 rows of 24 hours".into());
        }
        if let Some(&p) = self.schedule.iter().flatten().find(|&&p| p >= self.places.len()) {
            return bad(format!("schedule refers to place {p}"));
        }
        for (what, v) in [
            ("gps_noise_std", self.gps_noise_std),
            ("pressure_std", self.pressure_std),
            ("transition_fraction", self.transition_fraction),
            ("schedule_noise", self.schedule_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{what} must be non-negative"));
            }
        }
        if self.transition_fraction > 1.0 || self.schedule_noise > 1.0 {
            return bad("fractions must not exceed 1".into());
        }
        for p in &self.places {
            let spreads = [
                p.noise_std,
                p.mag_std,
                p.inclination_std,
                p.cell.rssi_std,
                p.wifi.connected.as_ref().map_or(0.0, |w| w.rssi_std),
            ];
            if spreads.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return bad(format!("place {}: spreads must be non-negative", p.name));
            }
            if !(0.0..=1.0).contains(&p.wifi.nearby_visibility) || !(0.0..=1.0).contains(&p.bluetooth_visibility) {
                return bad(format!("place {}: visibilities must lie in [0, 1]", p.name));
            }
            if p.cell.cell_ids.is_empty() {
                return bad(format!("place {}: needs at least one cell id", p.name));
            }
        }
        Ok(())
    }

    /// Place the timetable assigns to an hour of the week (0 = Monday 00h).
    pub fn scheduled_place(&self, hour_of_week: usize) -> usize {
        let h = hour_of_week % HOURS_PER_WEEK;
        self.schedule[h / 24][h % 24]
    }
}

/// A set of profiles as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBank {
    #[serde(rename = "user")]
    pub users: Vec<UserProfile>,
}

impl ProfileBank {
    pub fn from_toml(s: &str) -> Result<Self, SimError> {
        let bank: Self = toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        for u in &bank.users {
            u.validate()?;
        }
        Ok(bank)
    }

    pub fn to_toml(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }
}
