use super::{GeoPoint, PlanarPoint, EARTH_RADIUS_KM};
use serde::{Deserialize, Serialize};

/// Equirectangular projection about an origin, adequate at city scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin: GeoPoint,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Self {
        Self { origin }
    }

    fn cos_lat0(&self) -> f64 {
        self.origin.lat.to_radians().cos()
    }

    pub fn forward(&self, g: GeoPoint) -> PlanarPoint {
        let x = (g.lon - self.origin.lon).to_radians() * self.cos_lat0() * EARTH_RADIUS_KM;
        let y = (g.lat - self.origin.lat).to_radians() * EARTH_RADIUS_KM;
        PlanarPoint::new(x, y)
    }

    pub fn inverse(&self, p: PlanarPoint) -> GeoPoint {
        let lat = self.origin.lat + (p.y_km / EARTH_RADIUS_KM).to_degrees();
        let lon = self.origin.lon + (p.x_km / (EARTH_RADIUS_KM * self.cos_lat0())).to_degrees();
        GeoPoint::new(lat, lon)
    }
}

impl std::str::FromStr for LocalProjection {
    type Err = String;

    /// Parses `LAT,LON`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lat, lon) = s
            .split_once(',')
            .ok_or_else(|| format!("expected LAT,LON, got `{s}`"))?;
        let lat: f64 = lat.trim().parse().map_err(|e| format!("latitude: {e}"))?;
        let lon: f64 = lon.trim().parse().map_err(|e| format!("longitude: {e}"))?;
        Ok(Self::new(GeoPoint::new(lat, lon)))
    }
}
