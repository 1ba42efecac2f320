use log::info;

use super::model::{HacModel, HacNode};
use crate::copula::{theta_from_tau, ArchimedeanGenerator, GeneratorFamily};
use crate::error::{Error, Result};

/// Smallest node tau handed to the θ inversion.
pub const TAU_FLOOR: f64 = 1e-6;

/// Estimated model together with the merge record.
#[derive(Debug, Clone)]
pub struct StructureEstimate {
    pub model: HacModel,
    /// Mean pairwise tau of every merge, in merge order (innermost first),
    /// before flooring.
    pub node_taus: Vec<f64>,
}

/// Bottom-up estimation: repeatedly merge the two clusters with the largest
/// mean pairwise tau and set θ from that mean.
pub fn estimate_structure(tau: &[Vec<f64>], family: GeneratorFamily) -> Result<HacModel> {
    estimate_structure_with_taus(tau, family).map(|e| e.model)
}

pub fn estimate_structure_with_taus(
    tau: &[Vec<f64>],
    family: GeneratorFamily,
) -> Result<StructureEstimate> {
    validate_matrix(tau)?;
    let d = tau.len();
    struct Cluster {
        members: Vec<usize>,
        node: HacNode,
        theta: Option<f64>,
    }
    let mut clusters: Vec<Cluster> = (0..d)
        .map(|i| Cluster {
            members: vec![i],
            node: HacNode::Leaf(i),
            theta: None,
        })
        .collect();
    let mut node_taus = Vec::with_capacity(d - 1);

    while clusters.len() > 1 {
        let mut best = (0, 1, f64::NEG_INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let m = mean_tau(tau, &clusters[a].members, &clusters[b].members);
                if m > best.2 {
                    best = (a, b, m);
                }
            }
        }
        let (a, b, mean) = best;
        if mean >= 1.0 {
            return Err(Error::UnattainableTau {
                family: family.to_string(),
                tau: mean,
            });
        }
        node_taus.push(mean);
        let used = if mean < TAU_FLOOR {
            info!("mean tau {mean:.3e} floored at {TAU_FLOOR:e} for {family}");
            TAU_FLOOR
        } else {
            mean
        };
        let mut theta = theta_from_tau(family, used)?;
        let right = clusters.remove(b);
        let left = std::mem::replace(
            &mut clusters[a],
            Cluster {
                members: Vec::new(),
                node: HacNode::Leaf(usize::MAX),
                theta: None,
            },
        );
        for child in [left.theta, right.theta].into_iter().flatten() {
            if theta > child {
                info!("θ {theta} clamped to child θ {child} to keep the nesting order");
                theta = child;
            }
        }
        let generator = ArchimedeanGenerator::new(family, theta)?;
        let mut members = left.members;
        members.extend(right.members);
        clusters[a] = Cluster {
            members,
            node: HacNode::internal(generator, vec![left.node, right.node]),
            theta: Some(theta),
        };
    }
    let root = clusters.pop().expect("one cluster").node;
    Ok(StructureEstimate {
        model: HacModel::new(root)?,
        node_taus,
    })
}

fn mean_tau(tau: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let sum: f64 = a
        .iter()
        .flat_map(|&i| b.iter().map(move |&j| tau[i][j]))
        .sum();
    sum / (a.len() * b.len()) as f64
}

fn validate_matrix(tau: &[Vec<f64>]) -> Result<()> {
    let d = tau.len();
    if d < 2 {
        return Err(Error::param("a Kendall matrix needs at least two assets"));
    }
    for (i, row) in tau.iter().enumerate() {
        if row.len() != d {
            return Err(Error::param("Kendall matrix is not square"));
        }
        if (row[i] - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "diagonal entry {} is {}, not 1",
                i + 1,
                row[i]
            )));
        }
        for j in 0..d {
            if !row[j].is_finite() || row[j].abs() > 1.0 + 1e-12 {
                return Err(Error::param(format!(
                    "entry ({}, {}) is not a valid tau",
                    i + 1,
                    j + 1
                )));
            }
            if (row[j] - tau[j][i]).abs() > 1e-9 {
                return Err(Error::param("Kendall matrix is not symmetric"));
            }
        }
    }
    Ok(())
}
