use super::{distance, validate_sites, DistanceMetric, FacilitySite, Grid, SpatialError};
use ndarray::{Array2, Axis};
use rayon::prelude::*;

/// Below this distance a cell centroid and a site are treated as co-located.
pub const DEFAULT_COLOCATION_EPSILON_KM: f64 = 0.001;

/// L×K distances between cell centroids and sites.
pub fn distance_matrix(
    grid: &Grid,
    sites: &[FacilitySite],
    metric: DistanceMetric,
) -> Result<Array2<f64>, SpatialError> {
    if grid.is_empty() {
        return Err(SpatialError::EmptyGrid);
    }
    validate_sites(sites)?;
    let mut out = Array2::<f64>::zeros((grid.len(), sites.len()));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(grid.cells().par_iter())
        .try_for_each(|(mut row, cell)| {
            for (slot, site) in row.iter_mut().zip(sites) {
                *slot = distance(&cell.centroid, &site.location, metric)?;
            }
            Ok(())
        })?;
    Ok(out)
}

/// Binary catchment membership: `true` iff distance ≤ tau.
#[derive(Debug, Clone, PartialEq)]
pub struct CatchmentMatrix {
    entries: Array2<bool>,
    tau_km: f64,
    metric: DistanceMetric,
}

impl CatchmentMatrix {
    pub fn build(
        grid: &Grid,
        sites: &[FacilitySite],
        tau_km: f64,
        metric: DistanceMetric,
    ) -> Result<Self, SpatialError> {
        let dist = distance_matrix(grid, sites, metric)?;
        Self::from_distances(&dist, tau_km, metric)
    }

    pub fn from_distances(
        dist: &Array2<f64>,
        tau_km: f64,
        metric: DistanceMetric,
    ) -> Result<Self, SpatialError> {
        if !(tau_km > 0.0 && tau_km.is_finite()) {
            return Err(SpatialError::InvalidTau(tau_km));
        }
        Ok(Self {
            entries: dist.mapv(|d| d <= tau_km),
            tau_km,
            metric,
        })
    }

    pub fn entries(&self) -> &Array2<bool> {
        &self.entries
    }

    pub fn get(&self, cell: usize, site: usize) -> bool {
        self.entries[(cell, site)]
    }

    pub fn tau_km(&self) -> f64 {
        self.tau_km
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }
}

/// Distance-decay weights: 1 inside the colocation radius, `distance^gamma` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayMatrix {
    entries: Array2<f64>,
    gamma: f64,
    metric: DistanceMetric,
    colocation_epsilon_km: f64,
}

impl DecayMatrix {
    pub fn build(
        grid: &Grid,
        sites: &[FacilitySite],
        gamma: f64,
        metric: DistanceMetric,
        colocation_epsilon_km: f64,
    ) -> Result<Self, SpatialError> {
        let dist = distance_matrix(grid, sites, metric)?;
        Self::from_distances(&dist, gamma, metric, colocation_epsilon_km)
    }

    pub fn from_distances(
        dist: &Array2<f64>,
        gamma: f64,
        metric: DistanceMetric,
        colocation_epsilon_km: f64,
    ) -> Result<Self, SpatialError> {
        if !(colocation_epsilon_km > 0.0 && colocation_epsilon_km.is_finite()) {
            return Err(SpatialError::InvalidEpsilon(colocation_epsilon_km));
        }
        let mut entries = Array2::<f64>::zeros(dist.dim());
        for (w, &d) in entries.iter_mut().zip(dist.iter()) {
            *w = decay_weight(d, gamma, colocation_epsilon_km);
            if !w.is_finite() {
                return Err(SpatialError::NonFiniteDecay { gamma, distance: d });
            }
        }
        Ok(Self {
            entries,
            gamma,
            metric,
            colocation_epsilon_km,
        })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn get(&self, cell: usize, site: usize) -> f64 {
        self.entries[(cell, site)]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn colocation_epsilon_km(&self) -> f64 {
        self.colocation_epsilon_km
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }
}

#[inline]
fn decay_weight(d: f64, gamma: f64, eps: f64) -> f64 {
    if d < eps {
        1.0
    } else {
        d.powf(gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{GridCell, Location};
    use ndarray::array;

    fn one_cell_one_site(site_x: f64, site_y: f64) -> (Grid, Vec<FacilitySite>) {
        let grid = Grid::from_cells(
            vec![GridCell {
                cell_id: "c0".into(),
                centroid: Location::planar(0.0, 0.0),
                population: 1.0,
            }],
            1.0,
        )
        .unwrap();
        (grid, vec![FacilitySite::new("S", Location::planar(site_x, site_y))])
    }

    #[test]
    fn catchment_boundary_is_inclusive() {
        let (g, s) = one_cell_one_site(3.0, 4.0);
        let c = CatchmentMatrix::build(&g, &s, 5.0, DistanceMetric::ProjectedEuclidean).unwrap();
        assert!(c.get(0, 0));
        let c = CatchmentMatrix::build(&g, &s, 4.9, DistanceMetric::ProjectedEuclidean).unwrap();
        assert!(!c.get(0, 0));
    }

    #[test]
    fn rejects_non_positive_tau() {
        let (g, s) = one_cell_one_site(1.0, 0.0);
        for tau in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                CatchmentMatrix::build(&g, &s, tau, DistanceMetric::ProjectedEuclidean),
                Err(SpatialError::InvalidTau(_))
            ));
        }
    }

    #[test]
    fn decay_power_and_colocation() {
        let d = array![[2.0, 0.0005, 0.001]];
        let m = DecayMatrix::from_distances(&d, -2.0, DistanceMetric::ProjectedEuclidean, 0.001).unwrap();
        assert_eq!(m.entries(), &array![[0.25, 1.0, 1.0e6]]);
    }

    #[test]
    fn zero_gamma_is_all_ones() {
        let d = array![[0.0, 3.0], [7.5, 0.2]];
        let m = DecayMatrix::from_distances(&d, 0.0, DistanceMetric::ProjectedEuclidean, 0.001).unwrap();
        assert!(m.entries().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn decay_rejects_bad_epsilon_and_non_finite() {
        let d = array![[1.0]];
        assert!(matches!(
            DecayMatrix::from_distances(&d, -2.0, DistanceMetric::ProjectedEuclidean, 0.0),
            Err(SpatialError::InvalidEpsilon(_))
        ));
        let far = array![[1.0e200]];
        assert!(matches!(
            DecayMatrix::from_distances(&far, 2.0, DistanceMetric::ProjectedEuclidean, 0.001),
            Err(SpatialError::NonFiniteDecay { .. })
        ));
    }
}
