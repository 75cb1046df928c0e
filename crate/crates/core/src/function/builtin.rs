//! Built-in benchmark functions with known block structure.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::SpecError;
use crate::subset::{Partition, VariableSubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    /// `Σ x_j²`
    Sphere,
    /// `Σ sin(2π x_j)`
    SumSin,
    /// `x1² + x2·x4 + x3·x5²`, blocks `{1},{2,4},{3,5}`
    Paper5,
    /// `x1·x2`
    Bilinear,
    /// `Π x_j`
    Product,
    /// `Σ_{j<s} x_j·x_{j+1}`
    Chain,
}

impl Benchmark {
    pub const ALL: [Benchmark; 6] = [
        Benchmark::Sphere,
        Benchmark::SumSin,
        Benchmark::Paper5,
        Benchmark::Bilinear,
        Benchmark::Product,
        Benchmark::Chain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sphere => "sphere",
            Benchmark::SumSin => "sumsin",
            Benchmark::Paper5 => "paper5",
            Benchmark::Bilinear => "bilinear",
            Benchmark::Product => "product",
            Benchmark::Chain => "chain",
        }
    }

    /// The dimension the benchmark is defined for, if it is not variable.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Benchmark::Paper5 => Some(5),
            Benchmark::Bilinear => Some(2),
            _ => None,
        }
    }

    pub(crate) fn check_dim(self, dim: usize) -> Result<(), SpecError> {
        if dim == 0 {
            return Err(SpecError::ZeroDimension);
        }
        if let Some(required) = self.fixed_dim() {
            if dim != required {
                return Err(SpecError::FixedDimension {
                    name: self.name(),
                    required,
                    got: dim,
                });
            }
        }
        if self == Benchmark::Chain && dim < 2 {
            return Err(SpecError::TooSmall {
                name: self.name(),
                min: 2,
                got: dim,
            });
        }
        Ok(())
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Sphere => x.iter().map(|v| v * v).sum(),
            Benchmark::SumSin => x.iter().map(|v| (2.0 * PI * v).sin()).sum(),
            Benchmark::Paper5 => x[0] * x[0] + x[1] * x[3] + x[2] * x[4] * x[4],
            Benchmark::Bilinear => x[0] * x[1],
            Benchmark::Product => x.iter().product(),
            Benchmark::Chain => x.windows(2).map(|w| w[0] * w[1]).sum(),
        }
    }

    /// The finest partition the benchmark is separable with respect to.
    pub fn ground_truth(self, dim: usize) -> Result<Partition, SpecError> {
        self.check_dim(dim)?;
        let partition = match self {
            Benchmark::Sphere | Benchmark::SumSin => Partition::singletons(dim),
            Benchmark::Paper5 => Partition::new(
                [&[1][..], &[2, 4], &[3, 5]]
                    .iter()
                    .map(|b| VariableSubset::from_indices(b.iter().copied()))
                    .collect::<Result<_, _>>()
                    .expect("fixed blocks"),
                5,
            ),
            Benchmark::Bilinear | Benchmark::Product | Benchmark::Chain => Partition::trivial(dim),
        };
        Ok(partition.expect("dimension checked"))
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = SpecError;

    fn from_str(name: &str) -> Result<Self, Self::Err> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| SpecError::UnknownBuiltin(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert!("rosenbrock".parse::<Benchmark>().is_err());
    }

    #[test]
    fn dimension_rules() {
        assert!(Benchmark::Paper5.check_dim(4).is_err());
        assert!(Benchmark::Bilinear.check_dim(2).is_ok());
        assert!(Benchmark::Chain.check_dim(1).is_err());
        assert!(Benchmark::Sphere.check_dim(0).is_err());
    }

    #[test]
    fn values() {
        assert_eq!(Benchmark::Sphere.eval(&[0.5, 0.5]), 0.5);
        assert_eq!(Benchmark::Paper5.eval(&[1.0, 0.5, 0.5, 0.5, 0.5]), 1.375);
        assert_eq!(Benchmark::Chain.eval(&[1.0, 2.0, 3.0]), 8.0);
        assert!(Benchmark::SumSin.eval(&[0.25]) - 1.0 < 1e-15);
    }

    #[test]
    fn ground_truths() {
        assert_eq!(
            Benchmark::Paper5.ground_truth(5).unwrap().to_string(),
            "{1}|{2,4}|{3,5}"
        );
        assert_eq!(Benchmark::Sphere.ground_truth(3).unwrap().len(), 3);
        assert_eq!(Benchmark::Chain.ground_truth(4).unwrap().len(), 1);
    }
}
