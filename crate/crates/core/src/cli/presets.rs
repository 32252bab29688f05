//! The three histogram-smoothing experiments: 30 bins, a handful of counts,
//! and four priors — a flat Dirichlet graph, two nearest-neighbour
//! generators, and a 1 : 2.5 average of the Dirichlet and the first
//! neighbour generator.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::generator::{AveragePart, GeneratorSpec};
use crate::posterior::CountVector;

pub const PRESET_DIM: usize = 30;

/// Per-category Dirichlet weight of the flat prior, `w = 2/29`.
pub const DIRICHLET_WEIGHT: f64 = 2.0 / 29.0;

/// Weight on the neighbour generator in the averaged prior.
pub const AVERAGE_WEIGHT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Normal,
    Gamma,
    Wrapped,
}

impl PresetName {
    pub const ALL: [PresetName; 3] = [PresetName::Normal, PresetName::Gamma, PresetName::Wrapped];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Normal => "normal",
            PresetName::Gamma => "gamma",
            PresetName::Wrapped => "wrapped",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset '{s}' (expected normal, gamma or wrapped)")))
    }
}

/// One prior within a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetPrior {
    /// Short identifier, `g1`..`g4`.
    pub key: &'static str,
    pub title: String,
    pub spec: GeneratorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePreset {
    pub name: PresetName,
    pub dim: usize,
    /// `(1-based bin, count)` placements.
    pub placements: Vec<(usize, u32)>,
    pub priors: Vec<PresetPrior>,
}

impl FigurePreset {
    pub fn new(name: PresetName) -> Self {
        let d = PRESET_DIM;
        let (placements, second, third) = match name {
            PresetName::Normal => (
                vec![(10, 1), (12, 1), (15, 2), (17, 2)],
                ("tridiagonal w=3", GeneratorSpec::tridiagonal(d, 3.0)),
                ("tridiagonal w=8", GeneratorSpec::tridiagonal(d, 8.0)),
            ),
            PresetName::Gamma => (
                vec![(1, 1), (2, 1), (3, 1), (7, 1), (16, 1)],
                ("tridiagonal w=8", GeneratorSpec::tridiagonal(d, 8.0)),
                ("tridiagonal w=16", GeneratorSpec::tridiagonal(d, 16.0)),
            ),
            PresetName::Wrapped => (
                vec![(3, 1)],
                ("wrapped tridiagonal w=3", GeneratorSpec::wrapped(d, 3.0)),
                ("tridiagonal w=3", GeneratorSpec::tridiagonal(d, 3.0)),
            ),
        };
        let first = GeneratorSpec::dirichlet(vec![DIRICHLET_WEIGHT; d]);
        let average = GeneratorSpec::Average {
            divisor: 1.0 + AVERAGE_WEIGHT,
            parts: vec![
                AveragePart {
                    coef: 1.0,
                    spec: first.clone(),
                },
                AveragePart {
                    coef: AVERAGE_WEIGHT,
                    spec: second.1.clone(),
                },
            ],
            labels: None,
        };
        let priors = vec![
            PresetPrior {
                key: "g1",
                title: "Dirichlet w=2/29".into(),
                spec: first,
            },
            PresetPrior {
                key: "g2",
                title: second.0.into(),
                spec: second.1,
            },
            PresetPrior {
                key: "g3",
                title: third.0.into(),
                spec: third.1,
            },
            PresetPrior {
                key: "g4",
                title: "(G1 + 2.5 G2) / 3.5".into(),
                spec: average,
            },
        ];
        Self {
            name,
            dim: d,
            placements,
            priors,
        }
    }

    pub fn counts(&self) -> CountVector {
        let mut c = vec![0u32; self.dim];
        for &(bin, n) in &self.placements {
            c[bin - 1] += n;
        }
        CountVector::new(c)
    }

    pub fn prior(&self, key: &str) -> Option<&PresetPrior> {
        self.priors.iter().find(|p| p.key == key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in PresetName::ALL {
            let p = FigurePreset::new(name);
            assert_eq!(p.priors.len(), 4);
            for prior in &p.priors {
                assert_eq!(prior.spec.build().unwrap().dim(), 30);
            }
            assert_eq!(name.as_str().parse::<PresetName>().unwrap(), name);
        }
        assert_eq!(FigurePreset::new(PresetName::Normal).counts().total(), 6);
        assert_eq!(FigurePreset::new(PresetName::Gamma).counts().total(), 5);
        assert_eq!(FigurePreset::new(PresetName::Wrapped).counts().as_slice()[2], 1);
        assert!("poisson".parse::<PresetName>().is_err());
    }
}
