use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::blr::BlrModel;
use crate::error::{DaisError, Result};
use crate::rng::SplitStream;

/// Synthetic regression data: `X_ij ~ N(0, 0.01)`, `y_i ~ N(0, 1)`,
/// `sigma2 = 1` and a standard normal prior.
pub fn gen_blr_data(n: usize, d: usize, seed: u64) -> Result<BlrModel> {
    if n == 0 || d == 0 {
        return Err(DaisError::invalid("n and d must be at least 1"));
    }
    let root = SplitStream::new(seed);
    let mut rng_x = root.substream(0).rng();
    let mut rng_y = root.substream(1).rng();
    let nx = Normal::new(0.0, 0.1).expect("valid scale");
    let x = DMatrix::from_fn(n, d, |_, _| nx.sample(&mut rng_x));
    let y = DVector::from_fn(n, |_, _| rand_distr::StandardNormal.sample(&mut rng_y));
    BlrModel::new(x, y, 1.0, DVector::zeros(d), DMatrix::identity(d, d))
}
