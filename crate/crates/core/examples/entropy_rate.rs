use domlab::dynamics::Diffeo;
use domlab::entropy::{entropy_rate, measure_sample, EntropyParams, GridPartition};
use domlab::measures::Measure;

fn main() -> domlab::Result<()> {
    let sample = measure_sample(&Measure::Lebesgue { dim: 2 }, 400)?;
    for k in [4, 8, 16] {
        let params = EntropyParams {
            partition: GridPartition::with_cells(2, k)?,
            q_max: 6,
            miller_madow: true,
            strict: false,
        };
        let rate = entropy_rate(&Diffeo::Cat, &sample, &params)?;
        println!("k = {k:>2}: h ~ {:.4}", rate.h_estimate);
        for row in &rate.rows {
            println!("    q {} H {:.4} words {}{}", row.q, row.h, row.distinct_words, if row.bias_flag { " (undersampled)" } else { "" });
        }
        for w in &rate.warnings {
            println!("    warning: {w}");
        }
    }
    println!("exact: {:.4}", ((3.0 + 5f64.sqrt()) / 2.0).ln());
    Ok(())
}
