use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Behaviour of a sequence beyond its explicit prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tail {
    Zeros,
    Constant(Rational),
}

/// An element of ω: an explicit prefix (coordinates `1..=len`) followed by a
/// tail rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceVector {
    prefix: Vec<Rational>,
    tail: Tail,
}

impl SequenceVector {
    pub fn new(prefix: Vec<Rational>, tail: Tail) -> Self {
        Self { prefix, tail }
    }

    /// Finitely supported vector.
    pub fn finite(prefix: Vec<Rational>) -> Self {
        Self::new(prefix, Tail::Zeros)
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(Vec::new(), Tail::Constant(c))
    }

    /// The unit vector `e_j`.
    pub fn unit(j: usize) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        let mut prefix = vec![Rational::zero(); j];
        prefix[j - 1] = rational::int(1);
        Self::finite(prefix)
    }

    pub fn prefix(&self) -> &[Rational] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    /// Coordinate `j` (1-based).
    pub fn coordinate(&self, j: usize) -> Rational {
        assert!(j >= 1, "coordinates are 1-based");
        match self.prefix.get(j - 1) {
            Some(v) => v.clone(),
            None => match &self.tail {
                Tail::Zeros => Rational::zero(),
                Tail::Constant(c) => c.clone(),
            },
        }
    }

    /// `π_n`: coordinates `1..=n`.
    pub fn project(&self, n: usize) -> Vec<Rational> {
        (1..=n).map(|j| self.coordinate(j)).collect()
    }

    /// `αx + βy`, with the tails combined the same way.
    pub fn linear_combination(alpha: &Rational, x: &Self, beta: &Rational, y: &Self) -> Self {
        let len = x.prefix.len().max(y.prefix.len());
        let prefix = (1..=len)
            .map(|j| alpha * x.coordinate(j) + beta * y.coordinate(j))
            .collect();
        let tail_value = |t: &Tail| match t {
            Tail::Zeros => Rational::zero(),
            Tail::Constant(c) => c.clone(),
        };
        let c = alpha * tail_value(&x.tail) + beta * tail_value(&y.tail);
        let tail = if c.is_zero() {
            Tail::Zeros
        } else {
            Tail::Constant(c)
        };
        Self::new(prefix, tail)
    }
}

/// `π_n` on an explicit coordinate list; missing coordinates read as zero.
pub fn project(coords: &[Rational], n: usize) -> Vec<Rational> {
    (0..n)
        .map(|i| coords.get(i).cloned().unwrap_or_else(Rational::zero))
        .collect()
}

/// JSON form: `{"prefix": ["1", "1/2"], "tail": "zeros" | {"constant": "c"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpec {
    #[serde(default)]
    pub prefix: Vec<String>,
    #[serde(default = "zeros_tail")]
    pub tail: TailSpec,
}

fn zeros_tail() -> TailSpec {
    TailSpec::Zeros
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSpec {
    Zeros,
    Constant(String),
}

impl VectorSpec {
    pub fn build(&self) -> Result<SequenceVector> {
        let prefix = self
            .prefix
            .iter()
            .enumerate()
            .map(|(i, s)| {
                rational::parse(s).map_err(|_| Error::InvalidField {
                    field: format!("prefix[{i}]"),
                    message: format!("not a rational: {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = match &self.tail {
            TailSpec::Zeros => Tail::Zeros,
            TailSpec::Constant(s) => {
                Tail::Constant(rational::parse(s).map_err(|_| Error::InvalidField {
                    field: "tail.constant".into(),
                    message: format!("not a rational: {s:?}"),
                })?)
            }
        };
        Ok(SequenceVector::new(prefix, tail))
    }
}

impl From<&SequenceVector> for VectorSpec {
    fn from(v: &SequenceVector) -> Self {
        Self {
            prefix: v.prefix.iter().map(rational::format).collect(),
            tail: match &v.tail {
                Tail::Zeros => TailSpec::Zeros,
                Tail::Constant(c) => TailSpec::Constant(rational::format(c)),
            },
        }
    }
}

impl SequenceVector {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: VectorSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VectorSpec::from(self)).expect("vector spec serializes")
    }
}
