use alloc::vec::Vec;

use super::pr::KnnSupport;
use crate::autodiff::{Mlp, Tensor};
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::jfn::{self, JfnMethod};

/// Precision of each newly admitted bucket of samples as the kept ratio
/// grows, samples being admitted in ascending JFN order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCurve {
    pub kept_ratios: Vec<f64>,
    pub marginal_precision: Vec<f64>,
    pub cumulative_precision: Vec<f64>,
    pub bucket_sizes: Vec<usize>,
    /// True where an empty bucket from the requested grid was folded into
    /// this row.
    pub merged: Vec<bool>,
}

impl MarginalCurve {
    pub fn len(&self) -> usize {
        self.kept_ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_ratios.is_empty()
    }
}

/// Marginal curve for arbitrary per-point scores (lower is admitted first).
pub fn marginal_precision_from_scores(
    points: &Tensor,
    scores: &[f64],
    real: &SampleSet,
    ratios: &[f64],
    k: usize,
) -> Result<MarginalCurve> {
    if scores.len() != points.rows() {
        return Err(Error::Contract("one score per point is required".into()));
    }
    if points.rows() == 0 {
        return Err(Error::Contract("no generated points".into()));
    }
    if points.cols() != real.dim() {
        return Err(Error::Dimension {
            expected: (points.rows(), real.dim()),
            found: (points.rows(), points.cols()),
        });
    }
    if ratios.is_empty()
        || ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0))
        || ratios.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Contract(
            "ratios must be strictly increasing within (0, 1]".into(),
        ));
    }
    let support = KnnSupport::new(&real.points, k)?;
    let order = jfn::rank_by_score(scores);
    let inside: Vec<bool> = order
        .iter()
        .map(|&i| support.contains(points.row(i)))
        .collect();

    let n = points.rows();
    let mut curve = MarginalCurve {
        kept_ratios: Vec::new(),
        marginal_precision: Vec::new(),
        cumulative_precision: Vec::new(),
        bucket_sizes: Vec::new(),
        merged: Vec::new(),
    };
    let mut start = 0;
    let mut pending_merge = false;
    for &ratio in ratios {
        let end = jfn::kept_count(ratio, n);
        if end == start {
            // empty bucket: fold into the previous row (or the next one if
            // nothing has been emitted yet)
            match curve.merged.last_mut() {
                Some(flag) => {
                    *flag = true;
                    if let Some(r) = curve.kept_ratios.last_mut() {
                        *r = ratio;
                    }
                }
                None => pending_merge = true,
            }
            continue;
        }
        let hits = inside[start..end].iter().filter(|&&b| b).count();
        let cum_hits = inside[..end].iter().filter(|&&b| b).count();
        curve.kept_ratios.push(ratio);
        curve.marginal_precision.push(hits as f64 / (end - start) as f64);
        curve.cumulative_precision.push(cum_hits as f64 / end as f64);
        curve.bucket_sizes.push(end - start);
        curve.merged.push(core::mem::take(&mut pending_merge));
        start = end;
    }
    Ok(curve)
}

/// Generates `G(latents)`, ranks by JFN and measures the marginal curve
/// against `real`.
pub fn marginal_precision_curve(
    gen: &Mlp,
    real: &SampleSet,
    latents: &SampleSet,
    ratios: &[f64],
    k: usize,
    method: JfnMethod,
    probe_seed: u64,
) -> Result<MarginalCurve> {
    let outputs = gen.forward(&latents.points)?;
    let scores = jfn::jfn_values(gen, &latents.points, method, probe_seed)?;
    marginal_precision_from_scores(&outputs, &scores, real, ratios, k)
}
