use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{init_param, Graph, InitScheme, ParamStore, Scalar, Tensor, Var};

/// Fully connected layer `x·Wᵀ + b`, `W` is `[out×in]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    w: Var,
    b: Var,
}

impl Linear {
    pub(crate) fn init<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        out: usize,
        input: usize,
        rng: &mut R,
    ) -> Result<()> {
        store.insert(&format!("{prefix}/w"), init_param(&[out, input], InitScheme::ScaledUniform, rng)?)?;
        store.insert(&format!("{prefix}/b"), Tensor::zeros(&[out]))
    }

    pub(crate) fn bind<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        Ok(Self {
            w: g.param(store, &format!("{prefix}/w"))?,
            b: g.param(store, &format!("{prefix}/b"))?,
        })
    }

    pub(crate) fn apply<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let z = g.matmul_t(x, self.w)?;
        g.add_row(z, self.b)
    }
}

/// Embeds each step's ids with one shared table.
pub(crate) fn embed_steps<T: Scalar>(g: &mut Graph<T>, table: Var, steps: Vec<Vec<usize>>) -> Result<Vec<Var>> {
    steps.iter().map(|ids| g.gather(table, ids)).collect()
}

/// Mean over positions of `[B×d]` states, skipping masked rows. `lengths`
/// holds the unmasked count per row.
pub(crate) fn masked_mean<T: Scalar>(
    g: &mut Graph<T>,
    states: &[Var],
    masks: Option<&[Var]>,
    lengths: &[usize],
) -> Result<Var> {
    let terms = match masks {
        Some(masks) => states
            .iter()
            .zip(masks)
            .map(|(&h, &m)| g.mul_col(h, m))
            .collect::<Result<Vec<_>>>()?,
        None => states.to_vec(),
    };
    let total = g.add_all(&terms)?;
    if lengths.contains(&0) {
        return Err(Error::Contract("mean over an empty sequence".into()));
    }
    let inv = lengths.iter().map(|&l| T::one() / T::lit(l as f64)).collect();
    let inv = g.leaf(Tensor::new(vec![lengths.len(), 1], inv)?);
    g.mul_col(total, inv)
}

/// Row-wise argmax of a logit matrix, ties to the lowest class.
pub(crate) fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    logits
        .data()
        .chunks(logits.cols())
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
