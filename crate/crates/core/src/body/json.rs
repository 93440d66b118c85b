//! JSON body definitions.
//!
//! ```json
//! {"dim": 2, "kind": "ellipsoid", "semi_axes": [2.0, 1.0]}
//! {"dim": 3, "kind": "perturbed_ball", "degree": 2, "order": 0, "amplitude": 0.1}
//! {"dim": 3, "kind": "coeffs", "lmax": 8, "coeffs": [...]}
//! ```
//!
//! Coefficients are written with shortest round-trip formatting, so a
//! write/read cycle reproduces them bit for bit.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SupportField;
use crate::basis::{make_domain, SphericalDomain};
use crate::error::{HbmError, Result};

/// Default basis cutoff for bodies given in closed form.
pub fn default_lmax(dim: usize) -> usize {
    if dim == 2 {
        16
    } else {
        12
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyShape {
    Ball {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        /// Optional rotation `R`; the body is `R diag(semi_axes) B + center`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Coeffs {
        lmax: usize,
        coeffs: Vec<f64>,
    },
    PerturbedBall {
        degree: usize,
        #[serde(default)]
        order: i64,
        amplitude: f64,
        #[serde(default = "one")]
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyDefinition {
    pub dim: usize,
    #[serde(flatten)]
    pub shape: BodyShape,
}

impl BodyDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        let def: BodyDefinition = serde_json::from_str(text)?;
        def.validate()?;
        Ok(def)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        BodyDefinition::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Stores a body by its coefficient vector.
    pub fn from_body(body: &SupportField) -> Self {
        let dom = super::SupportFunction::domain(body);
        BodyDefinition {
            dim: dom.n(),
            shape: BodyShape::Coeffs {
                lmax: dom.lmax(),
                coeffs: body.coeffs().to_vec(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(HbmError::UnsupportedDimension(self.dim));
        }
        let bad = |m: String| Err(HbmError::InvalidDefinition(m));
        let check_vec = |name: &str, v: &Option<Vec<f64>>| -> Result<()> {
            match v {
                Some(v) if v.len() != self.dim => Err(HbmError::InvalidDefinition(format!(
                    "{name} has length {}, expected {}",
                    v.len(),
                    self.dim
                ))),
                _ => Ok(()),
            }
        };
        match &self.shape {
            BodyShape::Ball { radius, center } => {
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                check_vec("center", center)
            }
            BodyShape::Ellipsoid {
                semi_axes,
                rotation,
                center,
            } => {
                if semi_axes.len() != self.dim || semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return bad(format!("semi_axes must be {} positive numbers", self.dim));
                }
                if let Some(r) = rotation {
                    if r.len() != self.dim || r.iter().any(|row| row.len() != self.dim) {
                        return bad("rotation must be a dim x dim matrix".into());
                    }
                }
                check_vec("center", center)
            }
            BodyShape::Coeffs { lmax, coeffs } => {
                let expected = basis_len(self.dim, *lmax);
                if coeffs.len() != expected {
                    return bad(format!(
                        "expected {expected} coefficients for lmax {lmax}, got {}",
                        coeffs.len()
                    ));
                }
                Ok(())
            }
            BodyShape::PerturbedBall { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                Ok(())
            }
        }
    }

    /// Cutoff the definition naturally lives at.
    pub fn natural_lmax(&self) -> usize {
        match &self.shape {
            BodyShape::Coeffs { lmax, .. } => (*lmax).max(4),
            _ => default_lmax(self.dim),
        }
    }

    /// Builds the body on a fresh domain (`lmax` defaults to [`Self::natural_lmax`]).
    pub fn build(&self, lmax: Option<usize>) -> Result<SupportField> {
        let dom = make_domain(self.dim, lmax.unwrap_or_else(|| self.natural_lmax()))?;
        self.build_on(&dom)
    }

    pub fn build_on(&self, domain: &Arc<SphericalDomain>) -> Result<SupportField> {
        self.validate()?;
        if domain.n() != self.dim {
            return Err(HbmError::WrongDimension {
                expected: domain.n(),
                got: self.dim,
            });
        }
        let n = self.dim;
        match &self.shape {
            BodyShape::Ball { radius, center } => {
                let b = SupportField::ball(domain, *radius)?;
                match center {
                    Some(c) => b.translate(c),
                    None => Ok(b),
                }
            }
            BodyShape::Ellipsoid {
                semi_axes,
                rotation,
                center,
            } => {
                let mut t =
                    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(semi_axes));
                if let Some(r) = rotation {
                    let rm = DMatrix::from_fn(n, n, |i, j| r[i][j]);
                    t = rm * t;
                }
                let e = SupportField::ball_image(domain, &t)?;
                match center {
                    Some(c) => e.translate(c),
                    None => Ok(e),
                }
            }
            BodyShape::Coeffs { lmax, coeffs } => {
                if *lmax > domain.lmax() {
                    let tail_nonzero = coeffs[domain.basis_len().min(coeffs.len())..]
                        .iter()
                        .any(|c| *c != 0.0);
                    if tail_nonzero {
                        return Err(HbmError::InvalidDefinition(format!(
                            "coefficients of degree up to {lmax} do not fit basis cutoff {}",
                            domain.lmax()
                        )));
                    }
                }
                let mut c = vec![0.0; domain.basis_len()];
                let k = c.len().min(coeffs.len());
                c[..k].copy_from_slice(&coeffs[..k]);
                SupportField::from_coeffs(domain, c)
            }
            BodyShape::PerturbedBall {
                degree,
                order,
                amplitude,
                radius,
            } => SupportField::perturbed_ball(domain, *radius, *degree, *order, *amplitude),
        }
    }
}

fn basis_len(dim: usize, lmax: usize) -> usize {
    if dim == 2 {
        2 * lmax + 1
    } else {
        (lmax + 1) * (lmax + 1)
    }
}
