use bfa_elm::data::{Dataset, Provenance, Record};
use bfa_elm::elm::ElmModel;
use bfa_elm::numerics::{Activation, RandomStream};
use bfa_elm::pipeline;

/// Noiseless targets from a known sigmoid ELM with five hidden nodes. Node 0
/// has zero input weights, so the planted model keeps an exact representation
/// after the pipeline rescales the target. Returns the dataset and the planted
/// position.
pub fn planted_dataset(seed: u64, records: usize) -> (Dataset, Vec<f64>) {
    let mut s = RandomStream::new(1000 + seed);
    let hidden = 5;
    let position: Vec<f64> = (0..pipeline::position_dim(5, hidden))
        .map(|i| if i < 5 { 0.5 } else { s.unit() })
        .collect();
    let params = pipeline::decode_position(&position, 5, hidden, Activation::Sigmoid).unwrap();
    let beta: Vec<f64> = (0..hidden).map(|_| s.uniform(-1.0, 1.0).unwrap()).collect();
    let model = ElmModel::new(params, beta).unwrap();
    let rows = (0..records)
        .map(|_| {
            let f: [f64; 5] = std::array::from_fn(|_| s.unit());
            Record::new(f, model.predict(&f).unwrap()).unwrap()
        })
        .collect();
    (Dataset::new(rows, Provenance::Synthetic), position)
}
