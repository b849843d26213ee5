//! JSON model snapshots.
//!
//! ```json
//! {"algorithm":"krls-ald-reg","kernel":{…},"lambda":0.1,"delta":0.01,
//!  "centers":[[…],…],"centers_checksum":"…","alpha":[…],"n":300,
//!  "resume_exact":true,"P":[[…]],"M":[[…]]}
//! {"algorithm":"klms","kernel":{…},"eta":0.2,"centers":[[…],…],"coeffs":[…]}
//! {"algorithm":"lms"|"rls","weights":[…],"affine":true,…}
//! ```
//!
//! The dictionary Gram matrix and its inverse are recomputed on load by
//! replaying growth over the stored centers, after the centers are checked
//! against `centers_checksum`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dictionary::{centers_checksum, Dictionary};
use crate::error::{KafError, Result};
use crate::filter::OnlineFilter;
use crate::kernels::{Expansion, KernelSpec};
use crate::klms::{Klms, KlmsConfig};
use crate::krls::{KrlsConfig, RegKrls};
use crate::linear::{LinearConfig, LinearFilter};
use crate::matrix::GrowMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum ModelSnapshot {
    #[serde(rename = "krls-ald-reg")]
    Krls(KrlsSnapshot),
    #[serde(rename = "klms")]
    Klms(KlmsSnapshot),
    #[serde(rename = "lms")]
    Lms(LinearSnapshot),
    #[serde(rename = "rls")]
    Rls(LinearSnapshot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrlsSnapshot {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unregularized: bool,
    pub centers: Vec<Vec<f64>>,
    pub centers_checksum: String,
    pub alpha: Vec<f64>,
    pub n: usize,
    #[serde(default)]
    pub resume_exact: bool,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlmsSnapshot {
    pub kernel: KernelSpec,
    pub eta: f64,
    pub centers: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSnapshot {
    pub weights: Vec<f64>,
    pub affine: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<Vec<Vec<f64>>>,
}

impl KrlsSnapshot {
    pub fn config(&self) -> KrlsConfig {
        KrlsConfig {
            kernel: self.kernel,
            lambda: self.lambda,
            delta: self.delta,
            unregularized: self.unregularized,
        }
    }

    fn verify_checksum(&self) -> Result<()> {
        let dim = self.centers.first().map_or(0, Vec::len);
        let sum = centers_checksum(dim, self.centers.iter().map(Vec::as_slice));
        if sum != self.centers_checksum {
            return Err(KafError::Snapshot(
                "centers do not match `centers_checksum`".into(),
            ));
        }
        Ok(())
    }

    /// Rebuilds the dictionary after checking the centers' checksum.
    pub fn dictionary(&self) -> Result<Dictionary> {
        self.verify_checksum()?;
        Dictionary::from_centers(self.kernel, &self.centers)
    }

    /// Restores a filter that continues exactly where it stopped.
    pub fn restore(&self) -> Result<RegKrls> {
        if !self.resume_exact {
            return Err(KafError::Snapshot(
                "snapshot was written without `resume_exact`; replay the stream to rebuild P and M"
                    .into(),
            ));
        }
        let (p, m) = match (&self.p, &self.m) {
            (Some(p), Some(m)) => (p, m),
            _ => return Err(KafError::Snapshot("`resume_exact` requires `P` and `M`".into())),
        };
        let bad = || KafError::Snapshot("`P` and `M` must be square".into());
        let p = GrowMatrix::from_rows(p).ok_or_else(bad)?;
        let m = GrowMatrix::from_rows(m).ok_or_else(bad)?;
        RegKrls::from_parts(self.config(), self.dictionary()?, self.alpha.clone(), p, m, self.n)
    }

    /// Evaluates the stored expansion `Σ αᵢ κ(cᵢ, u)` without rebuilding state.
    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        Expansion::new(&self.alpha, &self.centers)?.eval(&self.kernel, u)
    }
}

impl ModelSnapshot {
    pub fn algorithm(&self) -> &'static str {
        match self {
            ModelSnapshot::Krls(_) => "krls-ald-reg",
            ModelSnapshot::Klms(_) => "klms",
            ModelSnapshot::Lms(_) => "lms",
            ModelSnapshot::Rls(_) => "rls",
        }
    }

    /// Restores a live filter. KRLS snapshots must carry `P` and `M`.
    pub fn into_filter(&self) -> Result<Box<dyn OnlineFilter>> {
        Ok(match self {
            ModelSnapshot::Krls(s) => Box::new(s.restore()?),
            ModelSnapshot::Klms(s) => Box::new(Klms::from_parts(
                KlmsConfig::new(s.kernel, s.eta),
                &s.centers,
                s.coeffs.clone(),
            )?),
            ModelSnapshot::Lms(s) => {
                let eta = s.eta.ok_or_else(|| KafError::Snapshot("lms snapshot without `eta`".into()))?;
                Box::new(LinearFilter::from_snapshot(
                    LinearConfig::Lms { eta, affine: s.affine },
                    s,
                )?)
            }
            ModelSnapshot::Rls(s) => {
                let lambda = s
                    .lambda
                    .ok_or_else(|| KafError::Snapshot("rls snapshot without `lambda`".into()))?;
                Box::new(LinearFilter::from_snapshot(
                    LinearConfig::Rls { lambda, affine: s.affine },
                    s,
                )?)
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| KafError::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| KafError::io(path.display().to_string(), e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trained_krls() -> RegKrls {
        let cfg = KrlsConfig::new(KernelSpec::gaussian(1.0), 0.1, 0.01);
        let mut f = RegKrls::new(cfg, &[0.0, 0.0], 0.3).unwrap();
        for i in 1..80 {
            let t = i as f64 * 0.21;
            f.step(&[t.sin(), (1.7 * t).cos()], (3.0 * t).sin()).unwrap();
        }
        f
    }

    #[test]
    fn krls_exact_resume_continues_identically() {
        let mut f = trained_krls();
        let json = ModelSnapshot::Krls(f.to_snapshot(true)).to_json().unwrap();
        let snap = ModelSnapshot::from_json(&json).unwrap();
        let mut g = snap.into_filter().unwrap();
        for i in 0..20 {
            let t = 100.0 + i as f64 * 0.33;
            let u = [t.sin(), t.cos()];
            let a = f.step(&u, 0.5).unwrap();
            let b = g.step(&u, 0.5).unwrap();
            assert!((a.y - b.y).abs() < 1e-9, "{} vs {}", a.y, b.y);
        }
    }

    #[test]
    fn krls_json_keys() {
        let f = trained_krls();
        let v: serde_json::Value =
            serde_json::to_value(ModelSnapshot::Krls(f.to_snapshot(false))).unwrap();
        assert_eq!(v["algorithm"], "krls-ald-reg");
        for key in ["kernel", "lambda", "delta", "centers", "alpha", "n", "centers_checksum"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("P").is_none());
        let v: serde_json::Value =
            serde_json::to_value(ModelSnapshot::Krls(f.to_snapshot(true))).unwrap();
        assert!(v.get("P").is_some() && v.get("M").is_some());
    }

    #[test]
    fn krls_predict_only_and_checksum() {
        let f = trained_krls();
        let mut s = f.to_snapshot(false);
        assert!(s.restore().is_err());
        let u = [0.2, -0.4];
        assert!((s.predict(&u).unwrap() - f.predict(&u).unwrap()).abs() < 1e-12);
        let d = s.dictionary().unwrap();
        assert!((d.gram_inv().to_dmatrix() - f.dictionary().gram_inv().to_dmatrix()).amax() < 1e-8);
        s.centers[0][0] += 1e-9;
        assert!(matches!(s.dictionary(), Err(KafError::Snapshot(_))));
    }

    #[test]
    fn klms_and_linear_roundtrip() {
        let mut k = Klms::new(KlmsConfig::new(KernelSpec::gaussian(0.5), 0.3), &[0.1], 1.0).unwrap();
        k.step(&[0.4], -0.5).unwrap();
        let json = k.snapshot().to_json().unwrap();
        assert!(json.contains("\"algorithm\": \"klms\""));
        let g = ModelSnapshot::from_json(&json).unwrap().into_filter().unwrap();
        assert_eq!(g.predict(&[0.2]).unwrap(), k.predict(&[0.2]).unwrap());

        let mut l = LinearFilter::new(LinearConfig::Lms { eta: 0.1, affine: true }, 2).unwrap();
        l.step(&[1.0, 2.0], 0.5).unwrap();
        let snap = l.snapshot();
        assert_eq!(snap.algorithm(), "lms");
        let g = ModelSnapshot::from_json(&snap.to_json().unwrap())
            .unwrap()
            .into_filter()
            .unwrap();
        assert_eq!(g.predict(&[0.5, 0.5]).unwrap(), l.predict(&[0.5, 0.5]).unwrap());
    }
}
