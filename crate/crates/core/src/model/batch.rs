use crate::error::{Error, Result};
use crate::numeric::{Graph, Scalar, Tensor, Var};
use crate::tasks::{Example, Label, PAD};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BatchLabels {
    Class(Vec<usize>),
    /// `[B][n]`; `None` on padding.
    Tags(Vec<Vec<Option<usize>>>),
}

/// Right-padded token matrix `[B×n]` with its mask and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub tokens: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
    pub lengths: Vec<usize>,
    pub labels: BatchLabels,
    /// Target spans, 1-based inclusive, one per row.
    pub spans: Option<Vec<(usize, usize)>>,
}

impl SequenceBatch {
    pub fn from_examples(examples: &[&Example]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::Contract("empty batch".into()))?;
        let n = examples.iter().map(|e| e.tokens.len()).max().unwrap_or(0);
        if n == 0 || examples.iter().any(|e| e.tokens.is_empty()) {
            return Err(Error::Data("empty sequence in batch".into()));
        }
        let mut tokens = Vec::with_capacity(examples.len());
        let mut mask = Vec::with_capacity(examples.len());
        for e in examples {
            let mut row = e.tokens.clone();
            row.resize(n, PAD);
            tokens.push(row);
            mask.push((0..n).map(|t| t < e.tokens.len()).collect());
        }
        let labels = match first.label {
            Label::Class(_) => BatchLabels::Class(
                examples
                    .iter()
                    .map(|e| match e.label {
                        Label::Class(c) => Ok(c),
                        Label::Tags(_) => Err(Error::Data("mixed label kinds in one batch".into())),
                    })
                    .collect::<Result<_>>()?,
            ),
            Label::Tags(_) => BatchLabels::Tags(
                examples
                    .iter()
                    .map(|e| match &e.label {
                        Label::Tags(tags) if tags.len() == e.tokens.len() => {
                            let mut row: Vec<Option<usize>> = tags.iter().copied().map(Some).collect();
                            row.resize(n, None);
                            Ok(row)
                        }
                        Label::Tags(_) => Err(Error::Data("tag count differs from token count".into())),
                        Label::Class(_) => Err(Error::Data("mixed label kinds in one batch".into())),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        let spans = if examples.iter().all(|e| e.span.is_some()) {
            let spans: Vec<(usize, usize)> = examples.iter().filter_map(|e| e.span).collect();
            for (e, &(a, b)) in examples.iter().zip(&spans) {
                if a == 0 || a > b || b > e.tokens.len() {
                    return Err(Error::Data(format!("span ({a}, {b}) outside sequence")));
                }
            }
            Some(spans)
        } else {
            None
        };
        Ok(Self {
            lengths: examples.iter().map(|e| e.tokens.len()).collect(),
            tokens,
            mask,
            labels,
            spans,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn max_len(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }

    pub fn is_padded(&self) -> bool {
        self.lengths.iter().any(|&l| l != self.max_len())
    }

    /// Token ids of position `t` across the batch.
    pub fn step_ids(&self, t: usize) -> Vec<usize> {
        self.tokens.iter().map(|row| row[t]).collect()
    }

    /// Mask column of position `t` as a `[B×1]` leaf.
    pub fn step_mask<T: Scalar>(&self, g: &mut Graph<T>, t: usize) -> Result<Var> {
        let data = self.mask.iter().map(|row| if row[t] { T::one() } else { T::zero() }).collect();
        Ok(g.leaf(Tensor::new(vec![self.batch_size(), 1], data)?))
    }

    /// Per-step mask leaves, or `None` when no row is padded.
    pub fn step_masks<T: Scalar>(&self, g: &mut Graph<T>) -> Result<Option<Vec<Var>>> {
        if !self.is_padded() {
            return Ok(None);
        }
        (0..self.max_len()).map(|t| self.step_mask(g, t)).collect::<Result<_>>().map(Some)
    }

    /// Tag targets in position-major order (`t·B + b`), matching logits
    /// stacked position by position.
    pub fn stacked_tags(&self) -> Result<Vec<Option<usize>>> {
        let BatchLabels::Tags(tags) = &self.labels else {
            return Err(Error::Config("tagging head fed sequence labels".into()));
        };
        Ok((0..self.max_len())
            .flat_map(|t| tags.iter().map(move |row| row[t]))
            .collect())
    }

    pub fn classes(&self) -> Result<Vec<Option<usize>>> {
        match &self.labels {
            BatchLabels::Class(c) => Ok(c.iter().copied().map(Some).collect()),
            BatchLabels::Tags(_) => Err(Error::Config("classification head fed tag labels".into())),
        }
    }

    /// Left and right contexts of every target, each ordered so that the
    /// token next to the target comes last, left-padded to a common length.
    /// Rows with an empty side get a single padding position.
    pub fn split_at_targets(&self) -> Result<(SideBatch, SideBatch)> {
        let spans = self
            .spans
            .as_ref()
            .ok_or_else(|| Error::Data("target-split head needs a span per row".into()))?;
        let mut left = Vec::with_capacity(spans.len());
        let mut right = Vec::with_capacity(spans.len());
        for ((row, &len), &(a, b)) in self.tokens.iter().zip(&self.lengths).zip(spans) {
            left.push(row[..a - 1].to_vec());
            right.push(row[b..len].iter().rev().copied().collect());
        }
        Ok((SideBatch::new(left), SideBatch::new(right)))
    }
}

/// One side of a target split: left-padded token rows and their mask.
#[derive(Clone, Debug, PartialEq)]
pub struct SideBatch {
    pub tokens: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
}

impl SideBatch {
    fn new(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut tokens = Vec::with_capacity(rows.len());
        let mut mask = Vec::with_capacity(rows.len());
        for row in rows {
            let pad = n - row.len();
            let mut padded = vec![PAD; pad];
            padded.extend_from_slice(&row);
            tokens.push(padded);
            mask.push((0..n).map(|t| t >= pad).collect());
        }
        Self { tokens, mask }
    }

    pub fn len(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step_ids(&self, t: usize) -> Vec<usize> {
        self.tokens.iter().map(|row| row[t]).collect()
    }

    pub fn step_masks<T: Scalar>(&self, g: &mut Graph<T>) -> Result<Vec<Var>> {
        (0..self.len())
            .map(|t| {
                let data = self.mask.iter().map(|row| if row[t] { T::one() } else { T::zero() }).collect();
                Ok(g.leaf(Tensor::new(vec![self.tokens.len(), 1], data)?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(tokens: Vec<usize>, label: Label, span: Option<(usize, usize)>) -> Example {
        Example { tokens, label, span }
    }

    #[test]
    fn pads_and_masks() {
        let a = ex(vec![2, 3, 4], Label::Tags(vec![0, 1, 0]), None);
        let b = ex(vec![5], Label::Tags(vec![1]), None);
        let batch = SequenceBatch::from_examples(&[&a, &b]).unwrap();
        assert_eq!(batch.tokens[1], vec![5, PAD, PAD]);
        assert_eq!(batch.mask[1], vec![true, false, false]);
        assert_eq!(
            batch.stacked_tags().unwrap(),
            vec![Some(0), Some(1), Some(1), None, Some(0), None]
        );
        assert!(batch.classes().is_err());
    }

    #[test]
    fn split_puts_the_target_neighbours_last() {
        let a = ex(vec![2, 3, 9, 4, 5, 6], Label::Class(1), Some((3, 3)));
        let b = ex(vec![9, 7], Label::Class(0), Some((1, 1)));
        let batch = SequenceBatch::from_examples(&[&a, &b]).unwrap();
        let (l, r) = batch.split_at_targets().unwrap();
        assert_eq!(l.tokens, vec![vec![2, 3], vec![PAD, PAD]]);
        assert_eq!(l.mask[1], vec![false, false]);
        assert_eq!(r.tokens, vec![vec![6, 5, 4], vec![PAD, PAD, 7]]);
        assert_eq!(r.mask[1], vec![false, false, true]);
    }

    #[test]
    fn rejects_bad_spans() {
        let a = ex(vec![2, 3], Label::Class(1), Some((2, 3)));
        assert!(SequenceBatch::from_examples(&[&a]).is_err());
    }
}
