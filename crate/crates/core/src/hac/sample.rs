use rand::Rng;
use rayon::prelude::*;

use super::model::{HacModel, HacNode};
use crate::copula::{inner_frailty, root_frailty, ArchimedeanGenerator, UniformSample};
use crate::error::{Error, Result};
use crate::rng::{exp1, substream};

/// Nested Marshall–Olkin sampling. Row i uses the random stream `(seed, i)`.
pub fn sample_hac(model: &HacModel, n: usize, seed: u64) -> Result<UniformSample> {
    if !model.check_nesting() {
        return Err(Error::Nesting(
            "a parent θ exceeds one of its children's".into(),
        ));
    }
    let d = model.dim();
    let mut values = vec![0.0; n * d];
    values.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let mut rng = substream(seed, i as u64);
        fill(model.root(), None, 0.0, &mut rng, row);
    });
    Ok(UniformSample { n, d, values })
}

fn fill<R: Rng>(
    node: &HacNode,
    parent: Option<&ArchimedeanGenerator>,
    v_parent: f64,
    rng: &mut R,
    row: &mut [f64],
) {
    let HacNode::Internal {
        generator,
        children,
    } = node
    else {
        unreachable!("leaves are handled by their parent");
    };
    let v = match parent {
        None => root_frailty(generator, rng),
        Some(p) => inner_frailty(p, generator, v_parent, rng),
    };
    for child in children {
        match child {
            HacNode::Leaf(i) => {
                row[*i] = crate::copula::clamp_open(generator.laplace(exp1(rng) / v))
            }
            HacNode::Internal { .. } => fill(child, Some(generator), v, rng, row),
        }
    }
}
