//! Synthetic Southeast relay network: 19 metro hubs joined by their 95
//! closest pairs.

use relaynet::network::{ArcRow, Hub, NetworkDoc};

const CITIES: [(&str, f64, f64); 19] = [
    ("Jackson", -90.18, 32.30),
    ("Memphis", -90.05, 35.15),
    ("Meridian", -88.70, 32.36),
    ("Mobile", -88.04, 30.69),
    ("Birmingham", -86.80, 33.52),
    ("Nashville", -86.78, 36.16),
    ("Huntsville", -86.59, 34.73),
    ("Montgomery", -86.30, 32.37),
    ("Chattanooga", -85.31, 35.05),
    ("Atlanta", -84.39, 33.75),
    ("Tallahassee", -84.28, 30.44),
    ("Knoxville", -83.92, 35.96),
    ("Macon", -83.63, 32.84),
    ("Greenville", -82.40, 34.85),
    ("Augusta", -81.97, 33.47),
    ("Jacksonville", -81.66, 30.33),
    ("Savannah", -81.10, 32.08),
    ("Columbia", -81.03, 34.00),
    ("Charlotte", -80.84, 35.23),
];

pub const NUM_ARCS: usize = 95;
/// Road miles per great-circle mile.
const CIRCUITY: f64 = 1.2;
/// One-way cap that keeps an out-and-back leg within 11 driving hours at
/// 50 mph.
const MAX_LEG_MILES: f64 = 275.0;

fn great_circle_miles(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lon1, lat1) = (a.0.to_radians(), a.1.to_radians());
    let (lon2, lat2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * 3958.8 * h.sqrt().asin()
}

/// Hubs sorted west to east; each arc is one 6-hour step.
pub fn southeast_network() -> NetworkDoc {
    let hubs: Vec<Hub> = CITIES
        .iter()
        .enumerate()
        .map(|(id, &(name, lon, lat))| Hub {
            id,
            name: name.into(),
            lon: Some(lon),
            lat: Some(lat),
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..hubs.len() {
        for j in i + 1..hubs.len() {
            let miles = CIRCUITY * great_circle_miles((CITIES[i].1, CITIES[i].2), (CITIES[j].1, CITIES[j].2));
            pairs.push((miles, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let arcs = pairs
        .into_iter()
        .take(NUM_ARCS)
        .map(|(miles, i, j)| ArcRow {
            from: i,
            to: j,
            travel_steps: 1,
            distance_miles: (miles.min(MAX_LEG_MILES) * 10.0).round() / 10.0,
            directed: false,
        })
        .collect();
    NetworkDoc { hubs, arcs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use relaynet::network::load_physical_network;

    #[test]
    fn testbed_has_nineteen_hubs_and_ninety_five_arcs() {
        let doc = southeast_network();
        assert_eq!(doc.hubs.len(), 19);
        assert_eq!(doc.arcs.len(), 95);
        let pnet = load_physical_network(&doc).unwrap();
        for h in 1..19 {
            assert!(pnet.shortest_distance_miles(0, h).is_ok());
        }
        assert!(doc.arcs.iter().all(|a| a.distance_miles <= 275.0));
    }

    #[test]
    fn atlanta_to_birmingham_is_about_170_road_miles() {
        let d = great_circle_miles((-84.39, 33.75), (-86.80, 33.52)) * CIRCUITY;
        assert!((d - 168.0).abs() < 15.0, "{d}");
    }
}
