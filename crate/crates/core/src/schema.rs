//! JSON file formats. Matrices are row-major arrays of `[re, im]` pairs; a bare
//! number is read as a real entry.

use serde::{Deserialize, Serialize};

use crate::algebra::{StarSubalgebra, SubalgebraJson};
use crate::channel::{ChoiMatrix, QuantumChannel};
use crate::error::{Error, Result};
use crate::operator::{CMat, C64};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum JsonEntry {
    Real(f64),
    Complex([f64; 2]),
}

impl JsonEntry {
    fn value(self) -> C64 {
        match self {
            JsonEntry::Real(x) => C64::new(x, 0.0),
            JsonEntry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct JsonMatrix(pub Vec<Vec<JsonEntry>>);

impl JsonMatrix {
    pub fn from_matrix(m: &CMat) -> Self {
        JsonMatrix(
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| JsonEntry::Complex([clean(m[(i, j)].re), clean(m[(i, j)].im)]))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn from_real(m: &nalgebra::DMatrix<f64>) -> Self {
        JsonMatrix(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| JsonEntry::Real(clean(m[(i, j)]))).collect())
                .collect(),
        )
    }

    /// Decodes a rectangular matrix; ragged rows are malformed.
    pub fn to_rect(&self) -> Result<CMat> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Malformed("ragged matrix rows".into()));
        }
        let mut m = CMat::zeros(rows, cols);
        for (i, row) in self.0.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let v = e.value();
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Malformed("non-finite matrix entry".into()));
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Decodes a square matrix.
    pub fn to_matrix(&self) -> Result<CMat> {
        let m = self.to_rect()?;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        Ok(m)
    }

    /// Decodes a real matrix, rejecting imaginary parts above `1e-12`.
    pub fn to_real(&self) -> Result<nalgebra::DMatrix<f64>> {
        let m = self.to_rect()?;
        if m.iter().any(|z| z.im.abs() > 1e-12) {
            return Err(Error::Malformed("expected a real matrix".into()));
        }
        Ok(m.map(|z| z.re))
    }
}

/// Rounds away negative zero so that serialized reports are stable.
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelJson {
    Kraus {
        kraus: Vec<JsonMatrix>,
    },
    Choi {
        choi: JsonMatrix,
        in_dim: usize,
    },
}

impl ChannelJson {
    pub fn to_channel(&self) -> Result<QuantumChannel> {
        match self {
            ChannelJson::Kraus { kraus } => {
                let ops = kraus.iter().map(JsonMatrix::to_rect).collect::<Result<Vec<_>>>()?;
                let first = ops.first().ok_or_else(|| Error::Malformed("empty Kraus list".into()))?;
                QuantumChannel::from_kraus(first.ncols(), first.nrows(), ops)
            }
            ChannelJson::Choi { choi, in_dim } => {
                let m = choi.to_matrix()?;
                if *in_dim == 0 || m.nrows() % in_dim != 0 {
                    return Err(Error::Malformed("Choi size not divisible by in_dim".into()));
                }
                let out_dim = m.nrows() / in_dim;
                QuantumChannel::from_choi(&ChoiMatrix { in_dim: *in_dim, out_dim, matrix: m })
            }
        }
    }

    pub fn from_channel(ch: &QuantumChannel) -> Self {
        ChannelJson::Kraus { kraus: ch.kraus().iter().map(JsonMatrix::from_matrix).collect() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateJson {
    #[serde(default)]
    pub theta: Vec<f64>,
    pub density: JsonMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentJson {
    pub dim: usize,
    pub states: Vec<StateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subalgebra: Option<SubalgebraJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpFamilyJson {
    #[serde(rename = "H")]
    pub h: JsonMatrix,
    pub generators: Vec<JsonMatrix>,
    pub theta_grid: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianJson {
    pub alpha: JsonMatrix,
    pub sigma: JsonMatrix,
    pub n: usize,
    #[serde(default)]
    pub m_list: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalMemberJson {
    #[serde(default)]
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub family: Vec<ClassicalMemberJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Vec<usize>>,
}

pub fn subalgebra_from_json(j: &SubalgebraJson) -> Result<StarSubalgebra> {
    StarSubalgebra::from_json(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let src = r#"[[[1, 0], [0, -1]], [[0, 1], 2.5]]"#;
        let m: JsonMatrix = serde_json::from_str(src).unwrap();
        let x = m.to_matrix().unwrap();
        assert_eq!(x[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(x[(1, 1)], C64::new(2.5, 0.0));
        let back = JsonMatrix::from_matrix(&x).to_matrix().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn non_square_rejected() {
        let m: JsonMatrix = serde_json::from_str("[[1, 2, 3], [4, 5, 6]]").unwrap();
        assert!(matches!(m.to_matrix(), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn channel_forms() {
        let k: ChannelJson = serde_json::from_str(r#"{"kraus": [[[1, 0], [0, 1]]]}"#).unwrap();
        assert_eq!(k.to_channel().unwrap().in_dim(), 2);
        let id = QuantumChannel::identity(2).choi().matrix;
        let j = ChannelJson::Choi { choi: JsonMatrix::from_matrix(&id), in_dim: 2 };
        let text = serde_json::to_string(&j).unwrap();
        let parsed: ChannelJson = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.to_channel().unwrap().out_dim(), 2);
    }
}
