//! JSON form `{modes, cutoff, data: [[re, im], …]}` with row-major data.
//! Unnormalized matrices additionally carry `"normalized": false`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::basis::basis_dim;
use super::FockDensityMatrix;

#[derive(Serialize, Deserialize)]
struct Wire {
    modes: usize,
    cutoff: usize,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    normalized: bool,
    data: Vec<[f64; 2]>,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

impl Serialize for FockDensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let m = self.matrix();
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Wire {
            modes: self.modes(),
            cutoff: self.cutoff(),
            normalized: self.is_normalized(),
            data,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FockDensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let w = Wire::deserialize(deserializer)?;
        let dim = basis_dim(w.modes, w.cutoff);
        if w.data.len() != dim * dim {
            return Err(D::Error::custom(format!(
                "expected {} entries for {} modes at cutoff {}, got {}",
                dim * dim,
                w.modes,
                w.cutoff,
                w.data.len()
            )));
        }
        let m = DMatrix::from_row_iterator(dim, dim, w.data.iter().map(|[re, im]| Complex64::new(*re, *im)));
        let rho = if w.normalized {
            FockDensityMatrix::new(w.modes, w.cutoff, m)
        } else {
            FockDensityMatrix::new_unnormalized(w.modes, w.cutoff, m)
        };
        rho.map_err(D::Error::custom)
    }
}

impl FockDensityMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("density matrix serialization is infallible")
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{c64, FockKet};
    use proptest::prelude::*;

    #[test]
    fn layout_is_row_major_pairs() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = FockKet::new(1, 1, nalgebra::DVector::from_vec(vec![c64(s, 0.0), c64(0.0, s)])).unwrap();
        let rho = FockDensityMatrix::from_ket(&psi);
        let v: serde_json::Value = serde_json::from_str(&rho.to_json()).unwrap();
        assert_eq!(v["modes"], 1);
        assert_eq!(v["cutoff"], 1);
        assert!(v.get("normalized").is_none());
        // ⟨0|ρ|1⟩ = s · conj(i s) = -i/2
        assert_eq!(v["data"][1][0].as_f64().unwrap(), 0.0);
        assert!((v["data"][1][1].as_f64().unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_length() {
        let bad = r#"{"modes":1,"cutoff":1,"data":[[1,0]]}"#;
        assert!(FockDensityMatrix::from_json(bad).is_err());
    }

    #[test]
    fn unnormalized_flag_survives() {
        let m = DMatrix::from_diagonal_element(2, 2, c64(0.125, 0.0));
        let rho = FockDensityMatrix::new_unnormalized(1, 1, m).unwrap();
        let back = FockDensityMatrix::from_json(&rho.to_json()).unwrap();
        assert_eq!(back, rho);
    }

    proptest! {
        #[test]
        fn exact_float_round_trip(raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3)) {
            // random pure qutrit state; any bit-level drift would break equality
            let v = nalgebra::DVector::from_iterator(3, raw.iter().map(|&(a, b)| c64(a, b) + c64(1e-3, 0.0)));
            let psi = FockKet::new_unnormalized(1, 2, v).unwrap().normalize().unwrap();
            let rho = FockDensityMatrix::from_ket(&psi);
            let back = FockDensityMatrix::from_json(&rho.to_json()).unwrap();
            prop_assert_eq!(back.matrix(), rho.matrix());
        }
    }
}
