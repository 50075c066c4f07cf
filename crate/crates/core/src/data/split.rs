use rand::seq::index;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Sizes and seed for drawing disjoint train and test sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draw disjoint uniformly random index chunks of the given sizes from `0..n`.
pub fn partition_indices(n: usize, sizes: &[usize], rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    let needed: usize = sizes.iter().sum();
    if needed > n {
        return Err(Error::InsufficientData {
            needed,
            available: n,
        });
    }
    let drawn = index::sample(rng, n, needed).into_vec();
    let mut chunks = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        chunks.push(drawn[start..start + s].to_vec());
        start += s;
    }
    Ok(chunks)
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    let mut rng = SeededRng::new(spec.seed, 0);
    let mut chunks = partition_indices(n, &[spec.n_train, spec.n_test], &mut rng)?;
    let test = chunks.pop().unwrap_or_default();
    let train = chunks.pop().unwrap_or_default();
    Ok(SplitIndices { train, test })
}

/// Disjoint uniformly sampled train and test sets. The test set is `None`
/// when `n_test == 0`.
pub fn sample_split(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    if spec.n_train == 0 {
        return Err(Error::InvalidArgument("n_train must be positive".into()));
    }
    let idx = split_indices(ds.n_rows(), spec)?;
    let test = (!idx.test.is_empty()).then(|| ds.select(&idx.test));
    Ok((ds.select(&idx.train), test))
}
