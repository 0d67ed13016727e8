use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Wigner,
    Husimi,
    Classical,
}

impl DistributionKind {
    pub fn code(self) -> u64 {
        match self {
            Self::Wigner => 0,
            Self::Husimi => 1,
            Self::Classical => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Self::Wigner),
            1 => Some(Self::Husimi),
            2 => Some(Self::Classical),
            _ => None,
        }
    }
}

/// Real-valued grid over phase space.
///
/// `values[[i, k]]` is the weight of the cell centred at
/// `(x_min + i·x_step, p_min + k·p_step)`; rows run along `x`. All kinds are
/// normalized so the grid sums to one. Husimi and classical grids are
/// nonnegative, Wigner grids may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceDistribution {
    pub kind: DistributionKind,
    pub values: Array2<f64>,
    pub x_min: f64,
    pub x_step: f64,
    pub p_min: f64,
    pub p_step: f64,
}

impl PhaseSpaceDistribution {
    /// Grid of `bins_x × bins_p` equal cells covering `[-π, π)²`, with
    /// values at the cell centres.
    pub fn cell_centered(kind: DistributionKind, values: Array2<f64>) -> Self {
        let (bx, bp) = values.dim();
        Self {
            kind,
            values,
            x_min: -PI + PI / bx as f64,
            x_step: TAU / bx as f64,
            p_min: -PI + PI / bp as f64,
            p_step: TAU / bp as f64,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.x_step
    }

    pub fn p_center(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.p_step
    }

    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Rescale so the grid sums to one.
    pub fn normalize(&mut self) {
        let total = self.total();
        if total != 0.0 {
            self.values.mapv_inplace(|v| v / total);
        }
    }

    fn same_grid(&self, other: &Self) -> bool {
        const TOL: f64 = 1e-12;
        self.shape() == other.shape()
            && (self.x_min - other.x_min).abs() < TOL
            && (self.x_step - other.x_step).abs() < TOL
            && (self.p_min - other.p_min).abs() < TOL
            && (self.p_step - other.p_step).abs() < TOL
    }
}

/// Total-variation distance `½ Σ |q - c|` between two normalized grids.
pub fn correspondence_distance(
    quantum: &PhaseSpaceDistribution,
    classical: &PhaseSpaceDistribution,
) -> Result<f64> {
    if !quantum.same_grid(classical) {
        return Err(Error::Contract(format!(
            "phase-space grids differ: {:?} vs {:?}",
            quantum.shape(),
            classical.shape()
        )));
    }
    if quantum.kind == DistributionKind::Wigner || classical.kind == DistributionKind::Wigner {
        return Err(Error::Contract(
            "total variation needs nonnegative densities; smooth the Wigner grid first".into(),
        ));
    }
    Ok(0.5
        * quantum
            .values
            .iter()
            .zip(classical.values.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_cell(i: usize, k: usize) -> PhaseSpaceDistribution {
        let mut v = Array2::zeros((8, 8));
        v[[i, k]] = 1.0;
        PhaseSpaceDistribution::cell_centered(DistributionKind::Classical, v)
    }

    #[test]
    fn distance_extremes() {
        let a = single_cell(1, 2);
        let b = single_cell(5, 6);
        assert_eq!(correspondence_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(correspondence_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = single_cell(1, 2);
        let b = PhaseSpaceDistribution::cell_centered(DistributionKind::Husimi, Array2::zeros((8, 16)));
        assert!(matches!(correspondence_distance(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn kind_codes_roundtrip() {
        for k in [DistributionKind::Wigner, DistributionKind::Husimi, DistributionKind::Classical] {
            assert_eq!(DistributionKind::from_code(k.code()), Some(k));
        }
        assert_eq!(DistributionKind::from_code(7), None);
    }
}
