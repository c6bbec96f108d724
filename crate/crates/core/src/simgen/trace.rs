//! Trace generation from a profile.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::profile::{Place, UserProfile, HOURS_PER_WEEK};
use super::SimError;
use crate::geo::{destination, great_circle_km, offset_en, pressure_at_altitude, GeodeticCoord};
use crate::protect::ContextRecord;

/// Default sampling interval, seconds.
pub const SAMPLE_INTERVAL_S: i64 = 600;

fn gauss<R: Rng>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean;
    }
    Normal::new(mean, std).expect("std checked non-negative").sample(rng)
}

/// Where a sample was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Whereabouts {
    At(usize),
    /// Between two places, `t` of the way from the first.
    Transit { from: usize, to: usize, t: f64 },
}

/// One record per `interval_s` over `weeks` weeks, with the ground truth
/// location of each.
pub fn generate_trace_labeled(
    profile: &UserProfile,
    weeks: u32,
    interval_s: i64,
    seed: u64,
) -> Result<Vec<(ContextRecord, Whereabouts)>, SimError> {
    profile.validate()?;
    if interval_s <= 0 {
        return Err(SimError::Interval(interval_s));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let total_s = weeks as i64 * HOURS_PER_WEEK as i64 * 3600;
    let count = (total_s + interval_s - 1) / interval_s;

    // Off-timetable detours are decided per hour so they last a while.
    let hours = weeks as usize * HOURS_PER_WEEK;
    let place_by_hour: Vec<usize> = (0..hours)
        .map(|h| {
            let planned = profile.scheduled_place(h);
            if rng.gen::<f64>() < profile.schedule_noise {
                let others: Vec<usize> = (0..profile.places.len()).filter(|&p| p != planned).collect();
                *others.choose(&mut rng).unwrap()
            } else {
                planned
            }
        })
        .collect();

    let mut out = Vec::with_capacity(count as usize);
    for i in 0..count {
        let offset = i * interval_s;
        let hour = (offset / 3600) as usize;
        let here = place_by_hour[hour];
        let whereabouts = if rng.gen::<f64>() < profile.transition_fraction {
            let next = place_by_hour.get(hour + 1).copied().unwrap_or(here);
            let to = if next != here {
                next
            } else {
                let others: Vec<usize> = (0..profile.places.len()).filter(|&p| p != here).collect();
                *others.choose(&mut rng).unwrap()
            };
            Whereabouts::Transit { from: here, to, t: rng.gen_range(0.1..0.9) }
        } else {
            Whereabouts::At(here)
        };
        let record = sample_record(profile, whereabouts, profile.start_timestamp + offset, offset, &mut rng);
        out.push((record, whereabouts));
    }
    Ok(out)
}

pub fn generate_trace(
    profile: &UserProfile,
    weeks: u32,
    interval_s: i64,
    seed: u64,
) -> Result<Vec<ContextRecord>, SimError> {
    Ok(generate_trace_labeled(profile, weeks, interval_s, seed)?.into_iter().map(|(r, _)| r).collect())
}

fn along(a: &GeodeticCoord, b: &GeodeticCoord, t: f64) -> GeodeticCoord {
    let d = great_circle_km(a, b);
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlon = (b.lon() - a.lon()).to_radians();
    let bearing = (dlon.sin() * lat2.cos()).atan2(lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos());
    let p = destination(a, bearing, d * t);
    p.with_alt(a.alt() + (b.alt() - a.alt()) * t).expect("finite altitude")
}

fn sample_record<R: Rng>(
    profile: &UserProfile,
    whereabouts: Whereabouts,
    timestamp: i64,
    offset_s: i64,
    rng: &mut R,
) -> ContextRecord {
    let (place, anchor, in_transit): (&Place, GeodeticCoord, bool) = match whereabouts {
        Whereabouts::At(p) => (&profile.places[p], profile.places[p].anchor, false),
        Whereabouts::Transit { from, to, t } => {
            let (a, b) = (&profile.places[from], &profile.places[to]);
            (if t < 0.5 { a } else { b }, along(&a.anchor, &b.anchor, t), true)
        }
    };

    let position = offset_en(
        &anchor,
        gauss(rng, 0.0, profile.gps_noise_std),
        gauss(rng, 0.0, profile.gps_noise_std),
    );
    let pressure = gauss(rng, pressure_at_altitude(position.alt(), profile.ref_pressure, profile.ref_temp), profile.pressure_std);

    let mut r = ContextRecord {
        timestamp,
        position,
        pressure,
        ref_pressure: profile.ref_pressure,
        ref_temp: profile.ref_temp,
        noise_level: gauss(rng, place.noise_mean + if in_transit { 15.0 } else { 0.0 }, place.noise_std),
        mag_field_strength: gauss(rng, place.mag_mean, place.mag_std),
        mag_inclination: gauss(rng, place.inclination_mean, place.inclination_std),
        wifi_state: Some("disabled".into()),
        wifi_router_mac: None,
        wifi_ssid: None,
        wifi_ip: None,
        wifi_network_id: None,
        wifi_frequency: None,
        wifi_router_ip: None,
        wifi_dns1: None,
        wifi_dns2: None,
        nearby_wifi_names: None,
        nearby_wifi_macs: None,
        nearby_wifi_frequencies: None,
        sim_state: Some("ready".into()),
        network_data_state: Some("connected".into()),
        network_data_type: Some(place.cell.data_type.clone()),
        network_operator: Some(place.cell.operator.clone()),
        network_mcc_mnc: Some(place.cell.mcc_mnc.clone()),
        network_lac: Some(place.cell.lac.clone()),
        network_cell_id: Some(place.cell.cell_ids.choose(rng).unwrap().clone()),
        bluetooth_names: None,
        bluetooth_macs: None,
        day_index: ((offset_s / 86_400) % 7) as u8,
        wifi_rssi: None,
        network_rssi: Some(gauss(rng, place.cell.rssi_mean, place.cell.rssi_std)),
        time_of_day: (offset_s % 86_400) as f64 / 3600.0,
    };

    if in_transit {
        r.wifi_state = Some("enabled".into());
        r.nearby_wifi_names = Some(Vec::new());
        r.nearby_wifi_macs = Some(Vec::new());
        r.nearby_wifi_frequencies = Some(Vec::new());
        r.bluetooth_names = Some(Vec::new());
        r.bluetooth_macs = Some(Vec::new());
        return r;
    }

    if let Some(w) = &place.wifi.connected {
        r.wifi_state = Some("connected".into());
        r.wifi_router_mac = Some(w.router_mac.clone());
        r.wifi_ssid = Some(w.ssid.clone());
        r.wifi_ip = Some(w.ip.clone());
        r.wifi_network_id = Some(w.network_id.clone());
        r.wifi_frequency = Some(w.frequency.clone());
        r.wifi_router_ip = Some(w.router_ip.clone());
        r.wifi_dns1 = Some(w.dns1.clone());
        r.wifi_dns2 = Some(w.dns2.clone());
        r.wifi_rssi = Some(gauss(rng, w.rssi_mean, w.rssi_std));
    } else if !place.wifi.nearby.is_empty() {
        r.wifi_state = Some("enabled".into());
    }
    if r.wifi_state.as_deref() != Some("disabled") {
        let seen: Vec<_> = place.wifi.nearby.iter().filter(|_| rng.gen::<f64>() < place.wifi.nearby_visibility).collect();
        r.nearby_wifi_names = Some(seen.iter().map(|a| a.name.clone()).collect());
        r.nearby_wifi_macs = Some(seen.iter().map(|a| a.mac.clone()).collect());
        r.nearby_wifi_frequencies = Some(seen.iter().map(|a| a.frequency.clone()).collect());
    }
    let bt: Vec<_> = place.bluetooth.iter().filter(|_| rng.gen::<f64>() < place.bluetooth_visibility).collect();
    r.bluetooth_names = Some(bt.iter().map(|d| d.name.clone()).collect());
    r.bluetooth_macs = Some(bt.iter().map(|d| d.mac.clone()).collect());
    r
}

/// Raw records as CSV. The output holds unprotected location and network
/// identifiers; it exists for debugging the generator only.
pub fn records_to_debug_csv(records: &[ContextRecord]) -> Result<String, SimError> {
    use crate::protect::CategoricalField;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "timestamp", "lat", "lon", "alt", "pressure", "ref_pressure", "ref_temp", "noise_level",
        "mag_field_strength", "mag_inclination",
    ];
    header.extend(CategoricalField::ALL.iter().map(|f| f.name()));
    header.extend(["wifi_rssi", "network_rssi", "time_of_day"]);
    let csv_err = |e: csv::Error| SimError::Config(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        let mut row = vec![
            r.timestamp.to_string(),
            r.position.lat().to_string(),
            r.position.lon().to_string(),
            r.position.alt().to_string(),
            r.pressure.to_string(),
            r.ref_pressure.to_string(),
            r.ref_temp.to_string(),
            r.noise_level.to_string(),
            r.mag_field_strength.to_string(),
            r.mag_inclination.to_string(),
        ];
        // Lists are '|'-joined; an absent modality is an empty cell.
        row.extend(CategoricalField::ALL.iter().map(|&f| r.categorical(f).map_or(String::new(), |v| v.join("|"))));
        row.extend([opt(r.wifi_rssi), opt(r.network_rssi), r.time_of_day.to_string()]);
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Config(e.to_string()))?;
    Ok(format!("# DEBUG ONLY: raw, unprotected context records\n{}", String::from_utf8(bytes).expect("utf-8 input")))
}
