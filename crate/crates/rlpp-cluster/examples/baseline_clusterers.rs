//! The comparison clusterers on one masked instance: direct methods for
//! incomplete data (k-POD, FCM-OCS) and classical algorithms on imputed
//! data.
//!
//! Run with:
//! ```bash
//! cargo run --release --example baseline_clusterers
//! ```

use nalgebra::{DMatrix, DVector};
use rlpp_cluster::rng::substream;
use rlpp_cluster::{
    clustering_error, fcm_ocs, fuzzy_cmeans, generate_instance, gibbs_impute, hierarchical,
    kmeans, kpod, mcar_mask, mean_impute, random_cluster, BaselineConfig, FixedParams, Linkage,
    ModelSpec,
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
    let (complete, truth) = generate_instance(&model, 10, 10, &mut substream(5, &[0]))?;
    let s = mcar_mask(&complete, 0.2, &mut substream(5, &[1]))?;
    let cfg = BaselineConfig::default();

    println!("direct methods on incomplete data:");
    let p = kpod(&s, &cfg, &mut substream(5, &[2]))?;
    println!("  k-pod   : error {:.3}", clustering_error(&truth, &p)?);
    let p = fcm_ocs(&s, &cfg, &mut substream(5, &[3]))?;
    println!("  fcm-ocs : error {:.3}", clustering_error(&truth, &p)?);

    println!("classical methods on Gibbs-imputed data:");
    let x = gibbs_impute(&s, 500, 100, &mut substream(5, &[4]))?;
    let p = kmeans(&x, &cfg, &mut substream(5, &[5]))?;
    println!("  k-means : error {:.3}", clustering_error(&truth, &p)?);
    let (p, _) = fuzzy_cmeans(&x, &cfg, &mut substream(5, &[6]))?;
    println!("  fcm     : error {:.3}", clustering_error(&truth, &p)?);
    let p = hierarchical(&x, Linkage::Single, 2)?;
    println!("  hier-si : error {:.3}", clustering_error(&truth, &p)?);
    let p = hierarchical(&x, Linkage::Complete, 2)?;
    println!("  hier-co : error {:.3}", clustering_error(&truth, &p)?);

    println!("other reference points:");
    let x = mean_impute(&s);
    let p = kmeans(&x, &cfg, &mut substream(5, &[7]))?;
    println!("  mean-impute + k-means : error {:.3}", clustering_error(&truth, &p)?);
    let p = random_cluster(s.len(), (10, 10), &mut substream(5, &[8]))?;
    println!("  random                : error {:.3}", clustering_error(&truth, &p)?);
    Ok(())
}
