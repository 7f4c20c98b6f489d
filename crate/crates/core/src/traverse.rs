use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::GridRow;
use crate::occ::NormalModel;

/// Number of points along one traversed coordinate.
pub const STEPS: usize = 10;
/// Traversal covers ±SPAN standard deviations around the mean.
pub const SPAN: f64 = 4.0;

/// Which coordinates to traverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dims {
    All,
    List(Vec<usize>),
}

impl FromStr for Dims {
    type Err = Error;

    /// `all` or a comma-separated list of indices such as `0,2,5`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Self::All);
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad dimension index `{t}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::List)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraversalGrid {
    pub dim_index: usize,
    pub base: Vec<f64>,
    /// Per-dimension standard deviation of the fitted normal model.
    pub sigma: Vec<f64>,
    /// Offsets in units of `sigma[dim_index]`.
    pub offsets: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// `steps` evenly spaced values from −SPAN to +SPAN inclusive; a single
/// step yields the centre.
pub fn offsets(steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![0.0];
    }
    let last = (steps - 1) as f64;
    (0..steps)
        .map(|j| -SPAN + 2.0 * SPAN * j as f64 / last)
        .collect()
}

fn sigma(model: &NormalModel) -> Vec<f64> {
    model.gaussian().cov().diagonal().iter().map(|v| v.sqrt()).collect()
}

fn check_dim(model: &NormalModel, i: usize) -> Result<()> {
    if i >= model.dim() {
        return Err(Error::invalid(format!(
            "dimension {i} out of range for a {}-dimensional model",
            model.dim()
        )));
    }
    Ok(())
}

/// One grid per requested coordinate: the fitted mean with that coordinate
/// moved to μ̂ᵢ + σᵢ·t for each of the STEPS offsets.
pub fn traversal(model: &NormalModel, dims: &Dims) -> Result<Vec<TraversalGrid>> {
    let list: Vec<usize> = match dims {
        Dims::All => (0..model.dim()).collect(),
        Dims::List(l) => l.clone(),
    };
    let base = model.mean().to_vec();
    let sigma = sigma(model);
    let offs = offsets(STEPS);
    list.into_iter()
        .map(|i| {
            check_dim(model, i)?;
            let values = offs
                .iter()
                .map(|t| {
                    let mut z = base.clone();
                    z[i] = base[i] + sigma[i] * t;
                    z
                })
                .collect();
            Ok(TraversalGrid {
                dim_index: i,
                base: base.clone(),
                sigma: sigma.clone(),
                offsets: offs.clone(),
                values,
            })
        })
        .collect()
}

/// `steps × steps` lattice over coordinates `dim_a` (row) and `dim_b`
/// (column), other coordinates held at the fitted mean.
pub fn pairwise_plane(model: &NormalModel, dim_a: usize, dim_b: usize, steps: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    check_dim(model, dim_a)?;
    check_dim(model, dim_b)?;
    if dim_a == dim_b {
        return Err(Error::invalid("plane needs two distinct dimensions"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    let base = model.mean();
    let sigma = sigma(model);
    let offs = offsets(steps);
    Ok(offs
        .iter()
        .map(|ta| {
            offs.iter()
                .map(|tb| {
                    let mut z = base.to_vec();
                    z[dim_a] = base[dim_a] + sigma[dim_a] * ta;
                    z[dim_b] = base[dim_b] + sigma[dim_b] * tb;
                    z
                })
                .collect()
        })
        .collect())
}

/// Flatten grids into the `{"dim", "step", "z"}` lines of a grid file.
pub fn grid_rows(grids: &[TraversalGrid]) -> Vec<GridRow> {
    grids
        .iter()
        .flat_map(|g| {
            g.values.iter().enumerate().map(|(step, z)| GridRow {
                dim: g.dim_index,
                step,
                z: z.clone(),
            })
        })
        .collect()
}
