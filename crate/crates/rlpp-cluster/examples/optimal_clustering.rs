//! The exact Bayes clusterer on a masked synthetic instance, compared with
//! the true labels point by point.
//!
//! Run with:
//! ```bash
//! cargo run --release --example optimal_clustering
//! ```

use nalgebra::{DMatrix, DVector};
use rlpp_cluster::rng::substream;
use rlpp_cluster::{
    clustering_error, generate_instance, mcar_mask, optimal_cluster, FixedParams, ModelSpec,
};

fn main() -> rlpp_cluster::Result<()> {
    // The benchmark's fixed-parameters model: means 0 and 0.445 on every
    // coordinate, isotropic covariance 0.23, five features.
    let d = 5;
    let model = ModelSpec::fixed(vec![
        FixedParams {
            mean: DVector::from_element(d, 0.0),
            covariance: DMatrix::identity(d, d) * 0.23,
        },
        FixedParams {
            mean: DVector::from_element(d, 0.445),
            covariance: DMatrix::identity(d, d) * 0.23,
        },
    ])?;

    let mut rng = substream(42, &[0]);
    let (complete, truth) = generate_instance(&model, 10, 10, &mut rng)?;
    let masked = mcar_mask(&complete, 0.2, &mut substream(42, &[1]))?;
    println!(
        "instance: n = {}, d = {}, {:.0}% of entries hidden",
        masked.len(),
        masked.dim(),
        100.0 * masked.missing_fraction()
    );

    // Reference set: partitions with the correct block sizes (126 of them
    // at 10+10); candidates: all 2^19 partitions.
    let out = optimal_cluster(&masked, &model, Some((10, 10)), 0, &mut substream(42, &[2]), false)?;
    println!("posterior-expected error of the chosen partition: {:.4}", out.expected_error);
    println!("clustering error vs truth: {:.4}", clustering_error(&truth, &out.partition)?);

    println!("point | truth | chosen block");
    for i in 0..masked.len() {
        println!(
            "{i:>5} | {:>5} | {:>5}",
            truth.label(i),
            out.partition.block_of(i)
        );
    }
    Ok(())
}
