//! Design variables: stream powers, the transmissive coefficient matrix and
//! the common-rate allocation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column / power index of the common stream. Private stream of user `k`
/// (zero-based) lives at `k + 1`.
pub const COMMON: usize = 0;

#[inline]
pub fn private_index(user: usize) -> usize {
    user + 1
}

/// Which stream a user is decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Common,
    Private,
}

impl Stream {
    /// Power/column index of this stream for `user`.
    pub fn index(self, user: usize) -> usize {
        match self {
            Stream::Common => COMMON,
            Stream::Private => private_index(user),
        }
    }
}

/// One candidate solution `(p, F, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignJson", into = "DesignJson")]
pub struct Design {
    /// `[p_c, p_1, .., p_K]` in watts.
    pub power: DVector<f64>,
    /// `N x (K+1)` matrix with columns `[f_c, f_1, .., f_K]`.
    pub transmissive: DMatrix<Complex64>,
    /// Common-rate share `C_k` of every user, bits/s/Hz.
    pub common_rates: DVector<f64>,
}

impl Design {
    pub fn zeros(num_subarrays: usize, num_users: usize) -> Self {
        Design {
            power: DVector::zeros(num_users + 1),
            transmissive: DMatrix::zeros(num_subarrays, num_users + 1),
            common_rates: DVector::zeros(num_users),
        }
    }

    pub fn num_users(&self) -> usize {
        self.common_rates.len()
    }

    pub fn num_subarrays(&self) -> usize {
        self.transmissive.nrows()
    }

    /// `h^H f_j` for column `j`.
    pub fn gain(&self, h: &DVector<Complex64>, column: usize) -> Complex64 {
        h.iter()
            .zip(self.transmissive.column(column).iter())
            .map(|(hn, fn_)| hn.conj() * fn_)
            .sum()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let k = self.common_rates.len();
        if self.power.len() != k + 1 {
            return Err(Error::Dimension {
                context: "design power vector",
                expected: k + 1,
                actual: self.power.len(),
            });
        }
        if self.transmissive.ncols() != k + 1 {
            return Err(Error::Dimension {
                context: "design transmissive columns",
                expected: k + 1,
                actual: self.transmissive.ncols(),
            });
        }
        Ok(())
    }

    /// Total transmit power `p_c + Σ p_k`.
    pub fn total_power(&self) -> f64 {
        self.power.sum()
    }

    /// Largest entry magnitude of `F`.
    pub fn max_amplitude(&self) -> f64 {
        self.transmissive
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Wire form: complex numbers as `[re, im]`, `F` stored column by column.
#[derive(Serialize, Deserialize)]
struct DesignJson {
    power: Vec<f64>,
    transmissive: Vec<Vec<[f64; 2]>>,
    common_rates: Vec<f64>,
}

impl From<Design> for DesignJson {
    fn from(d: Design) -> Self {
        DesignJson {
            power: d.power.iter().copied().collect(),
            transmissive: d
                .transmissive
                .column_iter()
                .map(|col| col.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            common_rates: d.common_rates.iter().copied().collect(),
        }
    }
}

impl TryFrom<DesignJson> for Design {
    type Error = String;

    fn try_from(j: DesignJson) -> std::result::Result<Self, String> {
        let cols = j.transmissive.len();
        let rows = j.transmissive.first().map_or(0, Vec::len);
        if j.transmissive.iter().any(|c| c.len() != rows) {
            return Err("ragged transmissive matrix".into());
        }
        let design = Design {
            power: DVector::from_vec(j.power),
            transmissive: DMatrix::from_fn(rows, cols, |r, c| {
                let [re, im] = j.transmissive[c][r];
                Complex64::new(re, im)
            }),
            common_rates: DVector::from_vec(j.common_rates),
        };
        design.check_dimensions().map_err(|e| e.to_string())?;
        Ok(design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    prop_compose! {
        fn arb_design()(n in 1usize..4, k in 1usize..4)
            (vals in prop::collection::vec(-2.0f64..2.0, (k + 1) + 2 * n * (k + 1) + k), n in Just(n), k in Just(k))
            -> Design {
            let mut it = vals.into_iter();
            let power = DVector::from_fn(k + 1, |_, _| it.next().unwrap().abs());
            let transmissive = DMatrix::from_fn(n, k + 1, |_, _| Complex64::new(it.next().unwrap(), it.next().unwrap()));
            let common_rates = DVector::from_fn(k, |_, _| it.next().unwrap().abs());
            Design { power, transmissive, common_rates }
        }
    }

    proptest! {
        #[test]
        fn json_round_trip(d in arb_design()) {
            let back = Design::from_json(&d.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, d);
        }
    }

    #[test]
    fn json_layout_uses_pairs() {
        let mut d = Design::zeros(1, 1);
        d.transmissive[(0, 1)] = Complex64::new(0.5, -0.25);
        let v: serde_json::Value = serde_json::from_str(&d.to_json().unwrap()).unwrap();
        assert_eq!(v["transmissive"][1][0], serde_json::json!([0.5, -0.25]));
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let json = r#"{"power":[1,2,3],"transmissive":[[[1,0]],[[1,0]]],"common_rates":[0]}"#;
        assert!(Design::from_json(json).is_err());
    }

    #[test]
    fn gain_conjugates_channel() {
        let mut d = Design::zeros(1, 1);
        d.transmissive[(0, 0)] = Complex64::new(1.0, 0.0);
        let h = DVector::from_element(1, Complex64::new(0.0, 1.0));
        assert_eq!(d.gain(&h, 0), Complex64::new(0.0, -1.0));
    }
}
