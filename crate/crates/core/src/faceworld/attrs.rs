use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

pub const NUM_ATTRIBUTES: usize = 5;

/// Probability of `beard = +1` under the prior. Deliberately unbalanced.
pub const PRIOR_BEARD_RATE: f32 = 0.3;
pub const PRIOR_GLASSES_RATE: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Glasses,
    Beard,
    Smile,
    HairLength,
    FaceWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

impl Attribute {
    pub const ALL: [Attribute; NUM_ATTRIBUTES] = [
        Attribute::Glasses,
        Attribute::Beard,
        Attribute::Smile,
        Attribute::HairLength,
        Attribute::FaceWidth,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Attribute> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Glasses => "glasses",
            Attribute::Beard => "beard",
            Attribute::Smile => "smile",
            Attribute::HairLength => "hair_length",
            Attribute::FaceWidth => "face_width",
        }
    }

    pub fn kind(self) -> AttributeKind {
        match self {
            Attribute::Glasses | Attribute::Beard => AttributeKind::Categorical,
            _ => AttributeKind::Numeric,
        }
    }

    pub fn is_categorical(self) -> bool {
        self.kind() == AttributeKind::Categorical
    }

    /// Value range; categorical attributes take only the two endpoints.
    pub fn range(self) -> (f32, f32) {
        match self {
            Attribute::Glasses | Attribute::Beard | Attribute::Smile => (-1.0, 1.0),
            Attribute::HairLength => (0.0, 1.0),
            Attribute::FaceWidth => (0.5, 1.0),
        }
    }

    /// Prior mean and standard deviation, used for standardization.
    pub fn prior_moments(self) -> (f32, f32) {
        match self {
            Attribute::Glasses => bernoulli_pm(PRIOR_GLASSES_RATE),
            Attribute::Beard => bernoulli_pm(PRIOR_BEARD_RATE),
            // uniform on [a, b]: mean (a+b)/2, sd (b-a)/sqrt(12)
            Attribute::Smile => (0.0, 2.0 / 12f32.sqrt()),
            Attribute::HairLength => (0.5, 1.0 / 12f32.sqrt()),
            Attribute::FaceWidth => (0.75, 0.5 / 12f32.sqrt()),
        }
    }

    pub fn standardize(self, value: f32) -> f32 {
        let (m, s) = self.prior_moments();
        (value - m) / s
    }

    pub fn destandardize(self, value: f32) -> f32 {
        let (m, s) = self.prior_moments();
        value * s + m
    }

    /// Split point used when a numeric attribute is scored as a binary class
    /// (face width stands in for a binary "gender" label in separability scores).
    pub fn class_threshold(self) -> f32 {
        match self.kind() {
            AttributeKind::Categorical => 0.0,
            AttributeKind::Numeric => self.prior_moments().0,
        }
    }
}

fn bernoulli_pm(p: f32) -> (f32, f32) {
    // values ±1 with P(+1) = p
    (2.0 * p - 1.0, 2.0 * (p * (1.0 - p)).sqrt())
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| invalid(format!("unknown attribute `{s}`")))
    }
}

/// The five semantic features of a face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub glasses: f32,
    pub beard: f32,
    pub smile: f32,
    pub hair_length: f32,
    pub face_width: f32,
}

impl AttributeVector {
    pub fn new(glasses: f32, beard: f32, smile: f32, hair_length: f32, face_width: f32) -> Result<Self> {
        let v = Self {
            glasses,
            beard,
            smile,
            hair_length,
            face_width,
        };
        v.validate()?;
        Ok(v)
    }

    /// Neutral face: no glasses or beard, mid-range numerics.
    pub fn neutral() -> Self {
        Self {
            glasses: -1.0,
            beard: -1.0,
            smile: 0.0,
            hair_length: 0.5,
            face_width: 0.75,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in Attribute::ALL {
            let v = self.get(a);
            if !v.is_finite() {
                return Err(invalid(format!("{a} is not finite")));
            }
            let (lo, hi) = a.range();
            if a.is_categorical() {
                if v != lo && v != hi {
                    return Err(invalid(format!("{a} must be -1 or +1, got {v}")));
                }
            } else if v < lo || v > hi {
                return Err(invalid(format!("{a} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn get(&self, a: Attribute) -> f32 {
        self.to_array()[a.index()]
    }

    pub fn set(&mut self, a: Attribute, v: f32) {
        let mut arr = self.to_array();
        arr[a.index()] = v;
        *self = Self::from_array(arr);
    }

    pub fn to_array(&self) -> [f32; NUM_ATTRIBUTES] {
        [self.glasses, self.beard, self.smile, self.hair_length, self.face_width]
    }

    pub fn from_array(a: [f32; NUM_ATTRIBUTES]) -> Self {
        Self {
            glasses: a[0],
            beard: a[1],
            smile: a[2],
            hair_length: a[3],
            face_width: a[4],
        }
    }

    pub fn standardized(&self) -> [f32; NUM_ATTRIBUTES] {
        let mut out = self.to_array();
        for a in Attribute::ALL {
            out[a.index()] = a.standardize(out[a.index()]);
        }
        out
    }

    /// Binary class of each attribute (categorical sign, numeric above prior mean).
    pub fn classes(&self) -> [bool; NUM_ATTRIBUTES] {
        let mut out = [false; NUM_ATTRIBUTES];
        for a in Attribute::ALL {
            out[a.index()] = self.get(a) > a.class_threshold();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(AttributeVector::new(1.0, -1.0, 0.2, 0.5, 0.7).is_ok());
        assert!(AttributeVector::new(0.5, -1.0, 0.2, 0.5, 0.7).is_err());
        assert!(AttributeVector::new(1.0, -1.0, 1.2, 0.5, 0.7).is_err());
        assert!(AttributeVector::new(1.0, -1.0, 0.0, 0.5, 0.4).is_err());
    }

    #[test]
    fn names_round_trip() {
        for a in Attribute::ALL {
            assert_eq!(a.name().parse::<Attribute>().unwrap(), a);
        }
        assert!("halo".parse::<Attribute>().is_err());
    }

    #[test]
    fn standardization_inverts() {
        for a in Attribute::ALL {
            let (lo, hi) = a.range();
            for v in [lo, hi, 0.5 * (lo + hi)] {
                assert!((a.destandardize(a.standardize(v)) - v).abs() < 1e-6);
            }
        }
        // glasses is balanced: ±1 standardizes to ±1
        assert!((Attribute::Glasses.standardize(1.0) - 1.0).abs() < 1e-6);
    }
}
