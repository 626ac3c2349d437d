//! Transport distances: quantile quadrature against closed forms, and Talagrand's bound.

use nalgebra::{DMatrix, DVector};
use shiftrisk::transport::{kl_numeric, talagrand_w2_upper, w2_1d, w2_gaussian, w2_smoothed_uniform_closed};
use shiftrisk::DistributionSpec;

fn main() -> shiftrisk::Result<()> {
    let p = DistributionSpec::gaussian_1d(0.0, 1.0);
    let q = DistributionSpec::gaussian_1d(0.5, 2.0);
    println!(
        "N(0,1) vs N(0.5,4): quadrature {:.12}, closed form {:.12}",
        w2_1d(&p, &q, 1e-10)?,
        (0.25f64 + 1.0).sqrt()
    );

    let s1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let s2 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let m = DVector::zeros(2);
    println!("bures distance in 2-d: {:.10}", w2_gaussian(&m, &s1, &m, &s2)?);

    for tau in [0.05, 0.25] {
        let su = DistributionSpec::SmoothedUniform { theta: 0.0, tau };
        let u = DistributionSpec::UniformLocation { theta: 0.0 };
        println!(
            "smoothed uniform tau={tau}: {:.10} vs {:.10}",
            w2_1d(&u, &su, 1e-10)?,
            w2_smoothed_uniform_closed(tau)?
        );
    }

    let kl = kl_numeric(&q, &p, 1e-10)?;
    println!("KL = {kl:.6}, transport bound {:.6}", talagrand_w2_upper(kl, 1.0)?);
    Ok(())
}
