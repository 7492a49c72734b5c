use rayon::prelude::*;

use super::model::{dc_forward, DcInput, DcLstmModel, ForwardOutput};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::represent::RepresentationPair;

/// Examples per forward call when evaluating a dataset.
pub const INFER_CHUNK: usize = 64;

/// Features and logits for every representation, in input order.
pub fn infer(model: &DcLstmModel, reps: &[RepresentationPair]) -> Result<ForwardOutput> {
    if reps.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let parts: Vec<ForwardOutput> = reps
        .par_chunks(INFER_CHUNK)
        .map(|chunk| {
            let refs: Vec<&RepresentationPair> = chunk.iter().collect();
            let input = DcInput::from_pairs(&refs)?;
            dc_forward(&input, model).map(|(out, _)| out)
        })
        .collect::<Result<_>>()?;
    let d = model.arch.feature_dim();
    let n = model.arch.classes;
    let mut features = Vec::with_capacity(reps.len() * d);
    let mut logits = Vec::with_capacity(reps.len() * n);
    for p in parts {
        features.extend_from_slice(p.features.as_slice());
        logits.extend_from_slice(p.logits.as_slice());
    }
    Ok(ForwardOutput {
        features: Matrix::from_vec(reps.len(), d, features)?,
        logits: Matrix::from_vec(reps.len(), n, logits)?,
    })
}
