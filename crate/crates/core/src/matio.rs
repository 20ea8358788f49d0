//! Serde adapters writing `nalgebra` matrices as row-major nested arrays.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    if rows.iter().any(|v| v.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub mod mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let r = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&r).map_err(D::Error::custom)
    }
}

pub mod mat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let r = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        r.iter()
            .map(|m| from_rows(m).map_err(D::Error::custom))
            .collect()
    }
}
