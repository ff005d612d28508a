use std::time::Instant;

use dgpic_core::data::{generate_primitive, make_denoising_pair, ShapeKind};
use dgpic_core::model::{draw_mask, patchify_pair, Example, ModelConfig, ModelParams};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (m, k, c, blocks) = (args[0], args[1], args[2], args[3]);
    let cfg = ModelConfig { feature_dim: c, patch_count: m, patch_size: k, n_blocks: blocks, ..Default::default() };
    let params = ModelParams::init(&cfg).unwrap();
    let q = make_denoising_pair(&generate_primitive(ShapeKind::ChairComposite, 1024, 1).unwrap(), 0.05, 2).unwrap();
    let t = Instant::now();
    let pair = patchify_pair(&q.input, &q.target, m, k).unwrap();
    println!("patchify {:?}", t.elapsed());
    let ex = Example { query: pair.clone(), prompt: pair, masked: draw_mask(m, 0.7, 0) };
    let mut g = vec![0.0; params.len()];
    let t = Instant::now();
    for _ in 0..5 {
        ex.accumulate_gradient(&params, &mut g, 1.0).unwrap();
    }
    println!("grad {:?}/example, params {}", t.elapsed() / 5, params.len());
    let t = Instant::now();
    for _ in 0..5 {
        ex.loss(&params).unwrap();
    }
    println!("fwd {:?}/example", t.elapsed() / 5);
}
