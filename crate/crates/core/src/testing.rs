use crate::kernels::Rbf;
use crate::ski::SkiModel;
use crate::synthetic::{sine_1d, structure_for};

pub(crate) fn synthetic_model(n: usize, m: usize, noise: f64, seed: u64) -> SkiModel {
    let data = sine_1d(n, 10, noise.sqrt(), seed);
    let s = structure_for(&data, Box::new(Rbf::new(1.0, 0.5).unwrap()), m).unwrap();
    SkiModel::new(s, data.train_x, &data.train_y, noise).unwrap()
}
