use serde::{Deserialize, Serialize};

use crate::geo::GeodeticCoord;

/// Categorical modalities, in canonical (wire) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CategoricalField {
    WifiState,
    WifiRouterMac,
    WifiSsid,
    WifiIp,
    WifiNetworkId,
    WifiFrequency,
    WifiRouterIp,
    WifiDns1,
    WifiDns2,
    NearbyWifiNames,
    NearbyWifiMacs,
    NearbyWifiFrequencies,
    SimState,
    NetworkDataState,
    NetworkDataType,
    NetworkOperator,
    NetworkMccMnc,
    NetworkLac,
    NetworkCellId,
    BluetoothNames,
    BluetoothMacs,
    DayIndex,
}

impl CategoricalField {
    pub const ALL: [CategoricalField; 22] = [
        Self::WifiState,
        Self::WifiRouterMac,
        Self::WifiSsid,
        Self::WifiIp,
        Self::WifiNetworkId,
        Self::WifiFrequency,
        Self::WifiRouterIp,
        Self::WifiDns1,
        Self::WifiDns2,
        Self::NearbyWifiNames,
        Self::NearbyWifiMacs,
        Self::NearbyWifiFrequencies,
        Self::SimState,
        Self::NetworkDataState,
        Self::NetworkDataType,
        Self::NetworkOperator,
        Self::NetworkMccMnc,
        Self::NetworkLac,
        Self::NetworkCellId,
        Self::BluetoothNames,
        Self::BluetoothMacs,
        Self::DayIndex,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn name(self) -> &'static str {
        match self {
            Self::WifiState => "wifi_state",
            Self::WifiRouterMac => "wifi_router_mac",
            Self::WifiSsid => "wifi_ssid",
            Self::WifiIp => "wifi_ip",
            Self::WifiNetworkId => "wifi_network_id",
            Self::WifiFrequency => "wifi_frequency",
            Self::WifiRouterIp => "wifi_router_ip",
            Self::WifiDns1 => "wifi_dns1",
            Self::WifiDns2 => "wifi_dns2",
            Self::NearbyWifiNames => "nearby_wifi_names",
            Self::NearbyWifiMacs => "nearby_wifi_macs",
            Self::NearbyWifiFrequencies => "nearby_wifi_frequencies",
            Self::SimState => "sim_state",
            Self::NetworkDataState => "network_data_state",
            Self::NetworkDataType => "network_data_type",
            Self::NetworkOperator => "network_operator",
            Self::NetworkMccMnc => "network_mcc_mnc",
            Self::NetworkLac => "network_lac",
            Self::NetworkCellId => "network_cell_id",
            Self::BluetoothNames => "bluetooth_names",
            Self::BluetoothMacs => "bluetooth_macs",
            Self::DayIndex => "day_index",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_list(self) -> bool {
        matches!(
            self,
            Self::NearbyWifiNames
                | Self::NearbyWifiMacs
                | Self::NearbyWifiFrequencies
                | Self::BluetoothNames
                | Self::BluetoothMacs
        )
    }
}

/// One raw multi-sensor sample. Never leaves the device.
///
/// `None` on a categorical field means the modality was unavailable (radio
/// off, no SIM, ...). An empty list means it was available but saw nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub timestamp: i64,
    pub position: GeodeticCoord,
    /// hPa
    pub pressure: f64,
    /// Reference pressure (hPa) and temperature (°C) from a weather report.
    pub ref_pressure: f64,
    pub ref_temp: f64,
    /// dBFS, averaged over a 3 s capture
    pub noise_level: f64,
    /// µT
    pub mag_field_strength: f64,
    /// degrees
    pub mag_inclination: f64,

    pub wifi_state: Option<String>,
    pub wifi_router_mac: Option<String>,
    pub wifi_ssid: Option<String>,
    pub wifi_ip: Option<String>,
    pub wifi_network_id: Option<String>,
    pub wifi_frequency: Option<String>,
    pub wifi_router_ip: Option<String>,
    pub wifi_dns1: Option<String>,
    pub wifi_dns2: Option<String>,
    pub nearby_wifi_names: Option<Vec<String>>,
    pub nearby_wifi_macs: Option<Vec<String>>,
    pub nearby_wifi_frequencies: Option<Vec<String>>,
    pub sim_state: Option<String>,
    pub network_data_state: Option<String>,
    pub network_data_type: Option<String>,
    pub network_operator: Option<String>,
    pub network_mcc_mnc: Option<String>,
    pub network_lac: Option<String>,
    pub network_cell_id: Option<String>,
    pub bluetooth_names: Option<Vec<String>>,
    pub bluetooth_macs: Option<Vec<String>>,
    /// 0 = Monday
    pub day_index: u8,

    /// dBm
    pub wifi_rssi: Option<f64>,
    pub network_rssi: Option<f64>,
    /// Hours since local midnight, [0, 24).
    pub time_of_day: f64,
}

impl ContextRecord {
    /// Values of a categorical field, `None` when the modality is absent.
    pub fn categorical(&self, field: CategoricalField) -> Option<Vec<&str>> {
        use CategoricalField as F;
        fn one(v: &Option<String>) -> Option<Vec<&str>> {
            v.as_deref().map(|s| vec![s])
        }
        fn many(v: &Option<Vec<String>>) -> Option<Vec<&str>> {
            v.as_ref().map(|l| l.iter().map(String::as_str).collect())
        }
        match field {
            F::WifiState => one(&self.wifi_state),
            F::WifiRouterMac => one(&self.wifi_router_mac),
            F::WifiSsid => one(&self.wifi_ssid),
            F::WifiIp => one(&self.wifi_ip),
            F::WifiNetworkId => one(&self.wifi_network_id),
            F::WifiFrequency => one(&self.wifi_frequency),
            F::WifiRouterIp => one(&self.wifi_router_ip),
            F::WifiDns1 => one(&self.wifi_dns1),
            F::WifiDns2 => one(&self.wifi_dns2),
            F::NearbyWifiNames => many(&self.nearby_wifi_names),
            F::NearbyWifiMacs => many(&self.nearby_wifi_macs),
            F::NearbyWifiFrequencies => many(&self.nearby_wifi_frequencies),
            F::SimState => one(&self.sim_state),
            F::NetworkDataState => one(&self.network_data_state),
            F::NetworkDataType => one(&self.network_data_type),
            F::NetworkOperator => one(&self.network_operator),
            F::NetworkMccMnc => one(&self.network_mcc_mnc),
            F::NetworkLac => one(&self.network_lac),
            F::NetworkCellId => one(&self.network_cell_id),
            F::BluetoothNames => many(&self.bluetooth_names),
            F::BluetoothMacs => many(&self.bluetooth_macs),
            F::DayIndex => Some(vec![day_name(self.day_index)]),
        }
    }
}

fn day_name(d: u8) -> &'static str {
    ["0", "1", "2", "3", "4", "5", "6"].get(d as usize).copied().unwrap_or("?")
}
