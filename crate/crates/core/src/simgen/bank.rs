//! The default ten-user synthetic bank.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::profile::{
    AccessPoint, BluetoothDevice, CellEnvironment, Place, ProfileBank, UserProfile, WifiEnvironment, WifiNetwork,
};
use crate::geo::{destination, great_circle_km, GeodeticCoord};

pub const DEFAULT_BANK_SIZE: usize = 10;
/// Place separations within one user's set, km.
pub const MIN_SEPARATION_KM: f64 = 0.5;
pub const MAX_SEPARATION_KM: f64 = 50.0;

/// (name, lat, lon, ground altitude m, operator, mcc-mnc)
const CITIES: [(&str, f64, f64, f64, &str, &str); DEFAULT_BANK_SIZE] = [
    ("delft", 52.0116, 4.3571, 5.0, "KPN", "204-08"),
    ("lyon", 45.7640, 4.8357, 170.0, "Orange F", "208-01"),
    ("munich", 48.1351, 11.5820, 520.0, "Telekom.de", "262-01"),
    ("turin", 45.0703, 7.6869, 240.0, "TIM", "222-01"),
    ("madrid", 40.4168, -3.7038, 650.0, "Movistar", "214-07"),
    ("leeds", 53.8008, -1.5491, 60.0, "EE", "234-30"),
    ("krakow", 50.0647, 19.9450, 220.0, "Plus", "260-01"),
    ("uppsala", 59.8586, 17.6389, 20.0, "Telia", "240-01"),
    ("porto", 41.1579, -8.6291, 90.0, "MEO", "268-06"),
    ("graz", 47.0707, 15.4395, 350.0, "A1", "232-01"),
];

const PLACE_KINDS: [&str; 6] = ["home", "work", "gym", "shop", "friend", "park"];

fn hex_bytes<R: Rng>(rng: &mut R, n: usize, sep: &str) -> String {
    (0..n).map(|_| format!("{:02x}", rng.gen::<u8>())).collect::<Vec<_>>().join(sep)
}

fn mac<R: Rng>(rng: &mut R) -> String {
    hex_bytes(rng, 6, ":")
}

fn frequency<R: Rng>(rng: &mut R) -> String {
    ["2412", "2437", "2462", "5180", "5240", "5500"].choose(rng).unwrap().to_string()
}

fn make_place<R: Rng>(rng: &mut R, user: usize, idx: usize, anchor: GeodeticCoord, city: &(&str, f64, f64, f64, &str, &str)) -> Place {
    let kind = PLACE_KINDS[idx];
    let outdoor = kind == "park";
    let connected = match kind {
        "home" | "work" | "friend" => true,
        "gym" | "shop" => rng.gen_bool(0.5),
        _ => false,
    };
    let subnet = rng.gen_range(0..=254u8);
    let wifi_net = connected.then(|| WifiNetwork {
        ssid: format!("{}-{}-{}", kind, city.0, hex_bytes(rng, 2, "")),
        router_mac: mac(rng),
        ip: format!("192.168.{subnet}.{}", rng.gen_range(2..250)),
        network_id: rng.gen_range(0..40).to_string(),
        frequency: frequency(rng),
        router_ip: format!("192.168.{subnet}.1"),
        dns1: format!("192.168.{subnet}.1"),
        dns2: ["8.8.8.8", "1.1.1.1", "9.9.9.9"].choose(rng).unwrap().to_string(),
        rssi_mean: rng.gen_range(-70.0..-40.0),
        rssi_std: rng.gen_range(2.0..6.0),
    });
    let nearby = (0..if outdoor { rng.gen_range(0..4) } else { rng.gen_range(4..14) })
        .map(|_| AccessPoint {
            name: format!("ap-{}-{}-{}", city.0, user, hex_bytes(rng, 3, "")),
            mac: mac(rng),
            frequency: frequency(rng),
        })
        .collect();
    let bluetooth = (0..rng.gen_range(0..6))
        .map(|j| BluetoothDevice { name: format!("bt-{kind}-{j}-{}", hex_bytes(rng, 2, "")), mac: mac(rng) })
        .collect();
    let lac = format!("{}", rng.gen_range(1000..60000));
    let cell_ids = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(10_000..9_999_999).to_string()).collect();
    Place {
        name: kind.to_string(),
        anchor,
        noise_mean: if outdoor { rng.gen_range(-40.0..-25.0) } else { rng.gen_range(-65.0..-40.0) },
        noise_std: rng.gen_range(2.0..6.0),
        mag_mean: rng.gen_range(35.0..65.0),
        mag_std: rng.gen_range(0.5..3.0),
        inclination_mean: rng.gen_range(55.0..72.0),
        inclination_std: rng.gen_range(0.2..1.5),
        wifi: WifiEnvironment { connected: wifi_net, nearby, nearby_visibility: rng.gen_range(0.6..0.95) },
        cell: CellEnvironment {
            operator: city.4.to_string(),
            mcc_mnc: city.5.to_string(),
            lac,
            cell_ids,
            data_type: ["LTE", "LTE", "NR", "HSPA"].choose(rng).unwrap().to_string(),
            rssi_mean: rng.gen_range(-105.0..-70.0),
            rssi_std: rng.gen_range(2.0..6.0),
        },
        bluetooth,
        bluetooth_visibility: rng.gen_range(0.5..0.9),
    }
}

fn make_schedule<R: Rng>(rng: &mut R, places: usize) -> Vec<Vec<usize>> {
    let extras: Vec<usize> = (2..places).collect();
    let (wake, leave, back) = (rng.gen_range(6..9), rng.gen_range(8..10), rng.gen_range(16..19));
    (0..7)
        .map(|day| {
            let weekend = day >= 5;
            let evening_spot = extras.choose(rng).copied();
            let weekend_spot = extras.choose(rng).copied();
            (0..24)
                .map(|h| {
                    if h < wake || h >= 22 {
                        0
                    } else if !weekend && (leave..back).contains(&h) {
                        1
                    } else if !weekend && (back..back + 2).contains(&h) && day % 2 == 0 {
                        evening_spot.unwrap_or(0)
                    } else if weekend && (11..17).contains(&h) {
                        weekend_spot.unwrap_or(1)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// Builds user `index` of the bank; deterministic in `(seed, index)`.
pub fn default_profile(seed: u64, index: usize) -> UserProfile {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let city = &CITIES[index % CITIES.len()];
    let home = GeodeticCoord::new(city.1, city.2, city.3).expect("city table is valid");
    let count = rng.gen_range(3..=6);

    let mut anchors = vec![home];
    while anchors.len() < count {
        let candidate = destination(
            &home,
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(MIN_SEPARATION_KM..MAX_SEPARATION_KM / 2.0),
        );
        let candidate = candidate.with_alt(city.3 + rng.gen_range(0.0..40.0)).expect("finite");
        if anchors.iter().all(|a| great_circle_km(a, &candidate) >= MIN_SEPARATION_KM) {
            anchors.push(candidate);
        }
    }
    let places = anchors.iter().enumerate().map(|(i, a)| make_place(&mut rng, index, i, *a, city)).collect();
    UserProfile {
        name: format!("user{index:02}-{}", city.0),
        places,
        schedule: make_schedule(&mut rng, count),
        gps_noise_std: 15.0,
        transition_fraction: 0.05,
        schedule_noise: 0.2,
        ref_pressure: rng.gen_range(1005.0..1025.0),
        ref_temp: rng.gen_range(5.0..25.0),
        pressure_std: 0.15,
        start_timestamp: 1_704_067_200, // 2024-01-01, a Monday
    }
}

pub fn default_bank(seed: u64) -> ProfileBank {
    ProfileBank { users: (0..DEFAULT_BANK_SIZE).map(|i| default_profile(seed, i)).collect() }
}
