//! The two suboptimal searches against the exact clusterer: same answers
//! at a fraction of the cost on small instances, and the only feasible
//! option at larger ones.
//!
//! Run with:
//! ```bash
//! cargo run --release --example suboptimal_searches
//! ```

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rlpp_cluster::rng::substream;
use rlpp_cluster::{
    clustering_error, generate_instance, mcar_mask, optimal_cluster, pmax_cluster, pseed_cluster,
    FixedParams, ModelSpec, SearchConfig,
};

fn main() -> rlpp_cluster::Result<()> {
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

    // Small instance: all three searches run, and usually agree.
    let (complete, truth) = generate_instance(&model, 10, 10, &mut substream(3, &[0]))?;
    let s = mcar_mask(&complete, 0.15, &mut substream(3, &[1]))?;
    let cfg = SearchConfig {
        hamming_radius: 2,
        size_constraint: Some((10, 10)),
        mc_samples: 0,
        ..Default::default()
    };

    let t = Instant::now();
    let opt = optimal_cluster(&s, &model, Some((10, 10)), 0, &mut substream(3, &[2]), false)?;
    let t_opt = t.elapsed();
    let t = Instant::now();
    let pmax = pmax_cluster(&s, &model, &cfg, &mut substream(3, &[3]))?;
    let t_pmax = t.elapsed();
    let t = Instant::now();
    let pseed = pseed_cluster(&s, &model, &cfg, &mut substream(3, &[4]))?;
    let t_pseed = t.elapsed();

    println!("n = 20, radius 2:");
    println!(
        "  optimal: error {:.3}  ({t_opt:.1?})",
        clustering_error(&truth, &opt.partition)?
    );
    println!(
        "  pmax   : error {:.3}  ({t_pmax:.1?})  same partition as optimal: {}",
        clustering_error(&truth, &pmax.partition)?,
        pmax.partition == opt.partition
    );
    println!(
        "  pseed  : error {:.3}  ({t_pseed:.1?})  same partition as optimal: {}",
        clustering_error(&truth, &pseed.partition)?,
        pseed.partition == opt.partition
    );

    // Larger instance: exhaustive search is refused, the seeded search
    // still runs in seconds.
    let (complete, truth) = generate_instance(&model, 42, 28, &mut substream(4, &[0]))?;
    let s = mcar_mask(&complete, 0.15, &mut substream(4, &[1]))?;
    let err = optimal_cluster(&s, &model, Some((42, 28)), 0, &mut substream(4, &[2]), false);
    println!("\nn = 70:");
    println!("  optimal: {}", err.unwrap_err());
    let cfg = SearchConfig {
        hamming_radius: 2,
        size_constraint: Some((42, 28)),
        mc_samples: 0,
        ..Default::default()
    };
    let t = Instant::now();
    let pseed = pseed_cluster(&s, &model, &cfg, &mut substream(4, &[3]))?;
    println!(
        "  pseed  : error {:.3}  ({:.1?})",
        clustering_error(&truth, &pseed.partition)?,
        t.elapsed()
    );
    Ok(())
}
