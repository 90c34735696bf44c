//! Walker-Delta constellation geometry.
//!
//! Satellites follow circular two-body orbits in an Earth-centred inertial
//! frame. Ground stations sit on a spherical Earth rotating at the sidereal
//! rate. Every satellite keeps four permanent ISLs arranged as a torus: two
//! in-plane neighbours (N ahead along the direction of motion, S behind) and
//! two neighbours in the adjacent planes (W, E) sharing the same slot index.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const EARTH_RADIUS: f64 = 6_371_000.0;
pub const MU_EARTH: f64 = 3.986004418e14;
/// Sidereal rotation rate of the Earth in rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkerConfig {
    pub num_planes: usize,
    pub sats_per_plane: usize,
    /// Metres above the spherical Earth.
    pub altitude: f64,
    /// Degrees.
    pub inclination: f64,
    pub phasing_factor: usize,
    pub earth_radius: f64,
    pub mu: f64,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            num_planes: 72,
            sats_per_plane: 22,
            altitude: 600_000.0,
            inclination: 53.0,
            phasing_factor: 1,
            earth_radius: EARTH_RADIUS,
            mu: MU_EARTH,
        }
    }
}

impl WalkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_planes < 1 || self.sats_per_plane < 1 {
            return Err(config_err("walker: need at least one plane and one satellite per plane"));
        }
        if !(self.altitude > 0.0) || !self.altitude.is_finite() {
            return Err(config_err("walker: altitude must be positive"));
        }
        if !(0.0..=180.0).contains(&self.inclination) {
            return Err(config_err("walker: inclination must lie in [0, 180] degrees"));
        }
        if self.phasing_factor >= self.num_planes {
            return Err(config_err("walker: phasing factor must be below the number of planes"));
        }
        if !(self.earth_radius > 0.0) || !(self.mu > 0.0) {
            return Err(config_err("walker: earth radius and mu must be positive"));
        }
        Ok(())
    }

    pub fn num_satellites(&self) -> usize {
        self.num_planes * self.sats_per_plane
    }

    /// Semi-major axis of the circular orbit.
    pub fn orbital_radius(&self) -> f64 {
        self.earth_radius + self.altitude
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.mu / self.orbital_radius().powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Satellite(usize),
    GroundStation(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Satellite(i) => write!(f, "sat{i}"),
            NodeId::GroundStation(i) => write!(f, "gs{i}"),
        }
    }
}

/// Outgoing ISL directions of a satellite, relative to its direction of motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North = 0,
    South = 1,
    West = 2,
    East = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::West, Direction::East];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Self::ALL.get(i).copied()
    }
}

/// A point in the Earth-centred inertial frame, metres, tagged with its epoch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub timestamp: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64, timestamp: f64) -> Self {
        Self { x, y, z, timestamp }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Position3D) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Position3D) -> Position3D {
        Position3D::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
            self.timestamp,
        )
    }

    pub fn sub(&self, o: &Position3D) -> Position3D {
        Position3D::new(self.x - o.x, self.y - o.y, self.z - o.z, self.timestamp)
    }

    pub fn scale(&self, k: f64) -> Position3D {
        Position3D::new(self.x * k, self.y * k, self.z * k, self.timestamp)
    }

    pub fn unit(&self) -> Position3D {
        let n = self.norm();
        if n == 0.0 {
            *self
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn distance(&self, o: &Position3D) -> f64 {
        self.sub(o).norm()
    }
}

/// Geodetic coordinates on the spherical Earth, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStation {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default = "default_min_elevation")]
    pub min_elevation: f64,
}

fn default_min_elevation() -> f64 {
    15.0
}

impl GroundStation {
    pub fn new(name: &str, latitude: f64, longitude: f64, min_elevation: f64) -> Self {
        Self { name: name.to_string(), latitude, longitude, min_elevation }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.abs() <= 90.0) {
            return Err(config_err(format!("station {}: |latitude| must be <= 90", self.name)));
        }
        if !(-180.0..180.0).contains(&self.longitude) {
            return Err(config_err(format!("station {}: longitude must lie in [-180, 180)", self.name)));
        }
        if !(0.0..90.0).contains(&self.min_elevation) {
            return Err(config_err(format!("station {}: min elevation must lie in [0, 90)", self.name)));
        }
        Ok(())
    }

    pub fn geo(&self) -> GeoPoint {
        GeoPoint { latitude: self.latitude, longitude: self.longitude }
    }

    /// Inertial position at time `t`; the station co-rotates with the Earth.
    pub fn position(&self, earth_radius: f64, t: f64) -> Position3D {
        let lat = self.latitude.to_radians();
        let lon = self.longitude.to_radians() + EARTH_ROTATION_RATE * t;
        Position3D::new(
            earth_radius * lat.cos() * lon.cos(),
            earth_radius * lat.cos() * lon.sin(),
            earth_radius * lat.sin(),
            t,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrbitSlot {
    raan: f64,
    anomaly0: f64,
}

#[derive(Debug, Clone)]
pub struct Constellation {
    cfg: WalkerConfig,
    slots: Vec<OrbitSlot>,
    radius: f64,
    mean_motion: f64,
    cos_i: f64,
    sin_i: f64,
}

/// Builds a Walker-Delta constellation: RAANs evenly spread over 360 degrees,
/// in-plane anomalies evenly spread, and plane `p` offset by
/// `p * F * 360 / (P * S)` degrees.
pub fn build_walker(cfg: &WalkerConfig) -> Result<Constellation> {
    cfg.validate()?;
    let planes = cfg.num_planes;
    let per_plane = cfg.sats_per_plane;
    let total = (planes * per_plane) as f64;
    let mut slots = Vec::with_capacity(planes * per_plane);
    for p in 0..planes {
        let raan = 2.0 * PI * p as f64 / planes as f64;
        let phase = 2.0 * PI * (cfg.phasing_factor * p) as f64 / total;
        for s in 0..per_plane {
            let anomaly0 = 2.0 * PI * s as f64 / per_plane as f64 + phase;
            slots.push(OrbitSlot { raan, anomaly0 });
        }
    }
    let inc = cfg.inclination.to_radians();
    Ok(Constellation {
        cfg: cfg.clone(),
        slots,
        radius: cfg.orbital_radius(),
        mean_motion: cfg.mean_motion(),
        cos_i: inc.cos(),
        sin_i: inc.sin(),
    })
}

impl Constellation {
    pub fn config(&self) -> &WalkerConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn plane_of(&self, sat: usize) -> usize {
        sat / self.cfg.sats_per_plane
    }

    pub fn slot_of(&self, sat: usize) -> usize {
        sat % self.cfg.sats_per_plane
    }

    pub fn orbital_radius(&self) -> f64 {
        self.radius
    }

    pub fn earth_radius(&self) -> f64 {
        self.cfg.earth_radius
    }

    /// Argument of latitude at epoch, radians.
    pub fn initial_anomaly(&self, sat: usize) -> f64 {
        self.slots[sat].anomaly0
    }

    pub fn raan(&self, sat: usize) -> f64 {
        self.slots[sat].raan
    }

    pub fn position(&self, sat: usize, t: f64) -> Position3D {
        let slot = self.slots[sat];
        let u = slot.anomaly0 + self.mean_motion * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = slot.raan.sin_cos();
        Position3D::new(
            self.radius * (cu * co - su * self.cos_i * so),
            self.radius * (cu * so + su * self.cos_i * co),
            self.radius * su * self.sin_i,
            t,
        )
    }

    /// Unit vector along the velocity of `sat` at time `t`.
    pub fn velocity_direction(&self, sat: usize, t: f64) -> Position3D {
        let slot = self.slots[sat];
        let u = slot.anomaly0 + self.mean_motion * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = slot.raan.sin_cos();
        Position3D::new(
            -su * co - cu * self.cos_i * so,
            -su * so + cu * self.cos_i * co,
            cu * self.sin_i,
            t,
        )
    }

    pub fn propagate(&self, t: f64) -> Vec<Position3D> {
        (0..self.len()).map(|s| self.position(s, t)).collect()
    }

    /// `[N, S, W, E]` neighbours of `sat`; the torus wraps within a plane
    /// and across the seam between the last and the first plane.
    pub fn grid_neighbors(&self, sat: usize) -> [usize; 4] {
        let per = self.cfg.sats_per_plane;
        let planes = self.cfg.num_planes;
        let p = sat / per;
        let s = sat % per;
        [
            p * per + (s + 1) % per,
            p * per + (s + per - 1) % per,
            ((p + planes - 1) % planes) * per + s,
            ((p + 1) % planes) * per + s,
        ]
    }

    pub fn neighbor(&self, sat: usize, dir: Direction) -> usize {
        self.grid_neighbors(sat)[dir.index()]
    }

    /// Visible satellite with the highest elevation; ties go to the lowest index.
    pub fn access_satellite(&self, gs: &GroundStation, positions: &[Position3D], t: f64) -> Option<usize> {
        let gs_pos = gs.position(self.cfg.earth_radius, t);
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in positions.iter().enumerate() {
            let el = elevation_angle(&gs_pos, p);
            if el < gs.min_elevation {
                continue;
            }
            match best {
                Some((_, b)) if el <= b => {}
                _ => best = Some((i, el)),
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Elevation in degrees of `sat` above the local horizontal plane at `station`.
pub fn elevation_angle(station: &Position3D, sat: &Position3D) -> f64 {
    let up = station.unit();
    let d = sat.sub(station);
    let n = d.norm();
    if n == 0.0 {
        return 90.0;
    }
    (d.dot(&up) / n).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Haversine distance on a sphere of radius `radius`.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint, radius: f64) -> f64 {
    let (la1, la2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * radius * h.sqrt().min(1.0).asin()
}

/// Angle between two position vectors, radians. Stable near 0 and pi.
pub fn central_angle(a: &Position3D, b: &Position3D) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(planes: usize, per: usize, f: usize) -> Constellation {
        build_walker(&WalkerConfig {
            num_planes: planes,
            sats_per_plane: per,
            phasing_factor: f,
            ..WalkerConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn full_scale_satellite_count() {
        let c = build_walker(&WalkerConfig::default()).unwrap();
        assert_eq!(c.len(), 1584);
    }

    #[test]
    fn degenerate_single_satellite() {
        let c = small(1, 1, 0);
        assert_eq!(c.len(), 1);
        assert_eq!(c.initial_anomaly(0), 0.0);
        assert_eq!(c.grid_neighbors(0), [0, 0, 0, 0]);
    }

    #[test]
    fn two_per_plane_spacing_is_half_turn() {
        let c = small(2, 2, 0);
        let d = c.initial_anomaly(1) - c.initial_anomaly(0);
        assert!((d.to_degrees() - 180.0).abs() < 1e-12);
        // N and S coincide when a plane has two satellites.
        let n = c.grid_neighbors(0);
        assert_eq!(n[0], n[1]);
    }

    #[test]
    fn phasing_offset_between_planes() {
        let c = small(4, 3, 1);
        let off = (c.initial_anomaly(3) - c.initial_anomaly(0)).to_degrees();
        assert!((off - 360.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            WalkerConfig { num_planes: 0, ..Default::default() },
            WalkerConfig { altitude: -1.0, ..Default::default() },
            WalkerConfig { inclination: 181.0, ..Default::default() },
            WalkerConfig { phasing_factor: 72, ..Default::default() },
        ] {
            assert!(build_walker(&cfg).is_err());
        }
    }

    #[test]
    fn orbital_radius_and_period() {
        let cfg = WalkerConfig::default();
        assert_eq!(cfg.orbital_radius(), 6_971_000.0);
        let c = build_walker(&cfg).unwrap();
        let period = 2.0 * PI * (cfg.orbital_radius().powi(3) / cfg.mu).sqrt();
        for s in [0, 17, 500, 1583] {
            let a = c.position(s, 123.0);
            let b = c.position(s, 123.0 + period);
            assert!(a.distance(&b) / a.norm() < 1e-6);
            assert!((a.norm() / cfg.orbital_radius() - 1.0).abs() < 1e-6);
        }
        assert_eq!(c.propagate(0.0)[5], c.position(5, 0.0));
    }

    #[test]
    fn velocity_is_orthogonal_to_radius() {
        let c = small(6, 5, 1);
        for s in 0..c.len() {
            let r = c.position(s, 42.0).unit();
            let v = c.velocity_direction(s, 42.0);
            assert!(r.dot(&v).abs() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            // The N neighbour lies ahead along the velocity.
            let n = c.position(c.neighbor(s, Direction::North), 42.0);
            assert!(n.sub(&c.position(s, 42.0)).dot(&v) > 0.0);
        }
    }

    #[test]
    fn seam_neighbors() {
        let c = small(72, 22, 1);
        for k in 0..22 {
            assert_eq!(c.neighbor(k, Direction::West), 71 * 22 + k);
            assert_eq!(c.neighbor(71 * 22 + k, Direction::East), k);
        }
        for s in 0..c.len() {
            let n = c.grid_neighbors(s);
            let mut uniq = n.to_vec();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 4);
            assert_eq!(c.neighbor(n[2], Direction::East), s);
            assert_eq!(c.neighbor(n[0], Direction::South), s);
        }
    }

    #[test]
    fn elevation_zenith_and_horizon() {
        let gs = Position3D::new(EARTH_RADIUS, 0.0, 0.0, 0.0);
        let zen = Position3D::new(EARTH_RADIUS + 600e3, 0.0, 0.0, 0.0);
        assert!((elevation_angle(&gs, &zen) - 90.0).abs() < 1e-12);
        let hor = Position3D::new(EARTH_RADIUS, 1000e3, 0.0, 0.0);
        assert!(elevation_angle(&gs, &hor).abs() < 1e-12);
    }

    #[test]
    fn elevation_matches_spherical_oracle() {
        // Satellite at radius r and central angle g from the station:
        // elevation = atan2(cos g - R/r, sin g).
        let r_e = EARTH_RADIUS;
        for (r, g) in [(6_971_000.0, 0.1), (7_500_000.0, 0.3), (6_971_000.0, 0.001), (8e6, 0.55)] {
            let gs = Position3D::new(r_e, 0.0, 0.0, 0.0);
            let sat = Position3D::new(r * f64::cos(g), r * f64::sin(g), 0.0, 0.0);
            let oracle = (g.cos() - r_e / r).atan2(g.sin()).to_degrees();
            assert!((elevation_angle(&gs, &sat) - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn access_satellite_cases() {
        let c = small(1, 1, 0);
        let gs = GroundStation::new("eq", 0.0, 0.0, 15.0);
        // Satellite 0 starts at x-axis, same as a station at (0, 0).
        let pos = c.propagate(0.0);
        assert_eq!(c.access_satellite(&gs, &pos, 0.0), Some(0));
        let far = GroundStation::new("far", 0.0, 179.0, 15.0);
        assert_eq!(c.access_satellite(&far, &pos, 0.0), None);

        // Two satellites mirrored about the station meridian: equal elevation.
        let c2 = small(1, 2, 0);
        let r = c2.orbital_radius();
        let a = 0.05f64;
        let mirrored = vec![
            Position3D::new(r * a.cos(), r * a.sin(), 0.0, 0.0),
            Position3D::new(r * a.cos(), -r * a.sin(), 0.0, 0.0),
        ];
        assert_eq!(c2.access_satellite(&gs, &mirrored, 0.0), Some(0));
        let swapped = vec![mirrored[1], mirrored[0]];
        assert_eq!(c2.access_satellite(&gs, &swapped, 0.0), Some(0));
    }

    #[test]
    fn great_circle_cases() {
        let a = GeoPoint { latitude: 49.6116, longitude: 6.1319 };
        assert_eq!(great_circle_distance(a, a, EARTH_RADIUS), 0.0);
        let anti = GeoPoint { latitude: -49.6116, longitude: 6.1319 - 180.0 };
        assert!((great_circle_distance(a, anti, EARTH_RADIUS) - PI * EARTH_RADIUS).abs() < 1e-6);
        // Spherical law of cosines as an independent route.
        let b = GeoPoint { latitude: 39.9042, longitude: 116.4074 };
        let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
        let dl = (b.longitude - a.longitude).to_radians();
        let oracle = EARTH_RADIUS * (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).acos();
        assert!((great_circle_distance(a, b, EARTH_RADIUS) - oracle).abs() < 1.0);
        assert!((great_circle_distance(a, b, EARTH_RADIUS) - great_circle_distance(b, a, EARTH_RADIUS)).abs() < 1e-9);
    }

    #[test]
    fn central_angle_agrees_with_haversine() {
        let gs_a = GroundStation::new("a", 25.2048, 55.2708, 0.0);
        let gs_b = GroundStation::new("b", 39.9042, 116.4074, 0.0);
        let ang = central_angle(&gs_a.position(EARTH_RADIUS, 0.0), &gs_b.position(EARTH_RADIUS, 0.0));
        let gcd = great_circle_distance(gs_a.geo(), gs_b.geo(), EARTH_RADIUS);
        assert!((ang * EARTH_RADIUS - gcd).abs() < 1e-3);
    }
}
