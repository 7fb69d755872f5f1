//! Partitions, label functions, and the label-switching-invariant error
//! metrics.
//!
//! Run with:
//! ```bash
//! cargo run --release --example partitions_and_costs
//! ```

use rlpp_cluster::{
    clustering_error, enumerate_partitions, label_mismatch_error, partition_cost,
    partition_hamming_distance, LabelFunction, Partition,
};

fn main() -> rlpp_cluster::Result<()> {
    // Two label functions that differ only by swapping the label names
    // induce the same partition.
    let phi_a = LabelFunction::new(vec![0, 0, 1, 1, 1], 2)?;
    let phi_b = LabelFunction::new(vec![1, 1, 0, 0, 0], 2)?;
    let pa = Partition::from_labels(&phi_a);
    let pb = Partition::from_labels(&phi_b);
    println!("raw label mismatch : {}", label_mismatch_error(&phi_a, &phi_b)?);
    println!("same partition     : {}", pa == pb);
    println!("canonical form     : {:?}", pa.assignment());

    // Partition cost minimizes the mismatch over relabelings.
    let q = Partition::from_assignment(&[0, 1, 0, 1, 1])?;
    println!("partition cost     : {}", partition_cost(&q, &pa)?);
    println!("hamming distance   : {}", partition_hamming_distance(&q, &pa)?);
    println!("clustering error   : {}", clustering_error(&phi_a, &q)?);

    // Enumeration: 2^(n-1) two-block partitions, fewer with fixed sizes.
    let n = 10;
    println!(
        "partitions of {n} points, l = 2        : {}",
        enumerate_partitions(n, 2, None)?.count()
    );
    println!(
        "partitions of {n} points, sizes 5+5    : {}",
        enumerate_partitions(n, 2, Some(&[5, 5]))?.count()
    );
    println!(
        "partitions of {n} points, sizes 6+4    : {}",
        enumerate_partitions(n, 2, Some(&[6, 4]))?.count()
    );

    // The first few partitions in canonical enumeration order.
    println!("first five partitions of 4 points:");
    for p in enumerate_partitions(4, 2, None)?.take(5) {
        println!("  {:?}", p.assignment());
    }
    Ok(())
}
