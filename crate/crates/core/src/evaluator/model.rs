use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Linear map applied to provider embeddings (rows) before the cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    /// `dim_in × dim_out`.
    pub projection: Array2<f64>,
    pub provider: String,
    pub trained_epochs: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim_in: usize,
    dim_out: usize,
    projection: Vec<Vec<f64>>,
    provider: String,
    trained_epochs: usize,
}

impl ScorerModel {
    pub fn identity(dim: usize, provider: impl Into<String>) -> Self {
        ScorerModel {
            projection: Array2::eye(dim),
            provider: provider.into(),
            trained_epochs: 0,
        }
    }

    /// Uniformly random orthogonal matrix (Gram-Schmidt on a Gaussian draw).
    pub fn random_rotation<R: Rng + ?Sized>(dim: usize, provider: impl Into<String>, rng: &mut R) -> Self {
        let mut q = Array2::<f64>::zeros((dim, dim));
        let mut j = 0;
        while j < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            for k in 0..j {
                let dot: f64 = (0..dim).map(|i| v[i] * q[[i, k]]).sum();
                (0..dim).for_each(|i| v[i] -= dot * q[[i, k]]);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            (0..dim).for_each(|i| q[[i, j]] = v[i] / norm);
            j += 1;
        }
        ScorerModel {
            projection: q,
            provider: provider.into(),
            trained_epochs: 0,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.projection.nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.projection.ncols()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            dim_in: self.dim_in(),
            dim_out: self.dim_out(),
            projection: self.projection.rows().into_iter().map(|r| r.to_vec()).collect(),
            provider: self.provider.clone(),
            trained_epochs: self.trained_epochs,
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| EvalError::Model(e.to_string()))?;
        if f.projection.len() != f.dim_in || f.projection.iter().any(|r| r.len() != f.dim_out) {
            return Err(EvalError::Model(format!(
                "projection is not {}x{}",
                f.dim_in, f.dim_out
            )));
        }
        if f.dim_in == 0 || f.dim_out == 0 {
            return Err(EvalError::Model("empty projection".into()));
        }
        let flat: Vec<f64> = f.projection.into_iter().flatten().collect();
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(EvalError::Model("non-finite projection entry".into()));
        }
        Ok(ScorerModel {
            projection: Array2::from_shape_vec((f.dim_in, f.dim_out), flat).expect("validated shape"),
            provider: f.provider,
            trained_epochs: f.trained_epochs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_is_orthogonal() {
        let m = ScorerModel::random_rotation(12, "p", &mut ChaCha8Rng::seed_from_u64(4));
        let qtq = m.projection.t().dot(&m.projection);
        let eye = Array2::<f64>::eye(12);
        assert!((qtq - eye).iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = ScorerModel::random_rotation(5, "deterministic-trigram-5", &mut ChaCha8Rng::seed_from_u64(1));
        let back = ScorerModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["dim_in"], 5);
        assert_eq!(v["trained_epochs"], 0);
    }

    #[test]
    fn rejects_ragged_projection() {
        let bad = r#"{"dim_in":2,"dim_out":2,"projection":[[1,0],[0]],"provider":"x","trained_epochs":0}"#;
        assert!(ScorerModel::from_json(bad).is_err());
    }
}
