use std::str::FromStr;

use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Parameter initialization schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`. For a matrix the
    /// fans are its column and row counts; a vector uses its length for both.
    ScaledUniform,
    Zeros,
    Ones,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled-uniform" => Ok(Self::ScaledUniform),
            "zeros" => Ok(Self::Zeros),
            "ones" => Ok(Self::Ones),
            other => Err(Error::Config(format!("unknown init scheme '{other}'"))),
        }
    }
}

pub fn init_param<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    scheme: InitScheme,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Contract(format!("cannot initialize shape {shape:?}")));
    }
    Ok(match scheme {
        InitScheme::Zeros => Tensor::zeros(shape),
        InitScheme::Ones => Tensor::ones(shape),
        InitScheme::ScaledUniform => {
            let (fan_out, fan_in) = match shape {
                [n] => (*n, *n),
                _ => (shape[0], shape[1..].iter().product()),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let len = shape.iter().product();
            let data = (0..len)
                .map(|_| T::lit(rng.gen_range(-bound..=bound)))
                .collect();
            Tensor::new(shape.to_vec(), data)?
        }
    })
}
