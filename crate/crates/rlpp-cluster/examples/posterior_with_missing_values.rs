//! Label-function posteriors on a point set with missing features, under
//! all three Gaussian models.
//!
//! Run with:
//! ```bash
//! cargo run --release --example posterior_with_missing_values
//! ```

use nalgebra::{DMatrix, DVector};
use rlpp_cluster::rng::substream;
use rlpp_cluster::{
    enumerate_partitions, posterior_table, FixedParams, GaussianMeanParams, GiwParams,
    LabelFunction, ModelSpec, Partition, PointSet,
};

fn main() -> rlpp_cluster::Result<()> {
    // Six points in R^2, two of them with a missing coordinate. The first
    // three come from a cluster near the origin, the rest from one near
    // (1.5, 1.5).
    let s = PointSet::new(
        vec![
            vec![0.1, -0.2],
            vec![-0.3, 0.2],
            vec![0.2, 0.0], // second coordinate missing
            vec![1.4, 1.6],
            vec![1.7, 0.0], // second coordinate missing
            vec![1.3, 1.4],
        ],
        vec![
            vec![true, true],
            vec![true, true],
            vec![true, false],
            vec![true, true],
            vec![true, false],
            vec![true, true],
        ],
    )?;
    let truth = LabelFunction::new(vec![0, 0, 0, 1, 1, 1], 2)?;
    let d = 2;

    let fixed = ModelSpec::fixed(vec![
        FixedParams {
            mean: DVector::from_element(d, 0.0),
            covariance: DMatrix::identity(d, d) * 0.3,
        },
        FixedParams {
            mean: DVector::from_element(d, 1.5),
            covariance: DMatrix::identity(d, d) * 0.3,
        },
    ])?;
    let gaussian_mean = ModelSpec::gaussian_mean(vec![
        GaussianMeanParams {
            prior_mean: DVector::from_element(d, 0.0),
            mean_confidence: 10.0,
            covariance: DMatrix::identity(d, d) * 0.3,
        },
        GaussianMeanParams {
            prior_mean: DVector::from_element(d, 1.5),
            mean_confidence: 10.0,
            covariance: DMatrix::identity(d, d) * 0.3,
        },
    ])?;
    let giw = ModelSpec::gaussian_inverse_wishart(vec![
        GiwParams {
            prior_mean: DVector::from_element(d, 0.0),
            mean_confidence: 10.0,
            dof: 8.0,
            scale: DMatrix::identity(d, d) * 1.5,
        },
        GiwParams {
            prior_mean: DVector::from_element(d, 1.5),
            mean_confidence: 10.0,
            dof: 8.0,
            scale: DMatrix::identity(d, d) * 1.5,
        },
    ])?;

    let reference: Vec<Partition> = enumerate_partitions(s.len(), 2, None)?.collect();
    let truth_partition = Partition::from_labels(&truth);

    for (name, model, mc) in [
        ("fixed parameters     ", &fixed, 0usize),
        ("gaussian means       ", &gaussian_mean, 0),
        ("inverse-wishart covs ", &giw, 500),
    ] {
        let mut rng = substream(7, &[0]);
        let table = posterior_table(&s, &reference, model, mc, &mut rng)?;
        let map = table.map_entry();
        let truth_prob = table
            .entries()
            .iter()
            .find(|(p, _, _)| *p == truth_partition)
            .map(|e| e.2)
            .unwrap_or(0.0);
        println!(
            "{name}: MAP partition {:?}  P(MAP) = {:.4}  P(truth) = {:.4}",
            map.0.assignment(),
            map.2,
            truth_prob
        );
    }
    Ok(())
}
