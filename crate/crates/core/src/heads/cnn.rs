use rand_chacha::ChaCha8Rng;

use super::config::HeadConfig;
use crate::diffmath::{conv1d, conv1d_backward, glorot_bound, relu, relu_backward, ParamStore, Scalar, Tensor};
use crate::error::Result;

pub(super) fn kernel_name(branch: usize) -> String {
    format!("conv{branch}.kernel")
}

pub(super) fn bias_name(branch: usize) -> String {
    format!("conv{branch}.bias")
}

#[derive(Clone, Debug)]
pub(super) struct Cache<T: Scalar> {
    x: Tensor<T>,
    /// Post-ReLU output of each branch, `L x F`.
    branches: Vec<Tensor<T>>,
}

/// Returns the feature width fed to the output layer.
pub(super) fn init(cfg: &HeadConfig, ps: &mut ParamStore<f32>, rng: &mut ChaCha8Rng) -> Result<usize> {
    let (h, f) = (cfg.hidden_size, cfg.filters_per_kernel);
    for (k, &w) in cfg.kernel_widths.iter().enumerate() {
        let bound = glorot_bound(w * h, w * f);
        ps.insert(kernel_name(k), Tensor::uniform(&[w, h, f], bound, rng))?;
        ps.insert(bias_name(k), Tensor::zeros(&[f]))?;
    }
    Ok(f * cfg.kernel_widths.len())
}

pub(super) fn forward<T: Scalar>(
    cfg: &HeadConfig,
    ps: &ParamStore<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Cache<T>)> {
    let len = x.dim(0);
    let f = cfg.filters_per_kernel;
    let n = cfg.kernel_widths.len();
    let mut branches = Vec::with_capacity(n);
    let mut feats = Tensor::zeros(&[len, f * n]);
    for k in 0..n {
        let y = relu(&conv1d(x, ps.get(&kernel_name(k))?, ps.get(&bias_name(k))?)?);
        for l in 0..len {
            feats.row_mut(l)[k * f..(k + 1) * f].copy_from_slice(y.row(l));
        }
        branches.push(y);
    }
    Ok((
        feats,
        Cache {
            x: x.clone(),
            branches,
        },
    ))
}

pub(super) fn backward<T: Scalar>(
    cfg: &HeadConfig,
    ps: &mut ParamStore<T>,
    cache: &Cache<T>,
    dfeats: &Tensor<T>,
) -> Result<()> {
    let len = cache.x.dim(0);
    let f = cfg.filters_per_kernel;
    for (k, y) in cache.branches.iter().enumerate() {
        let mut dy = Tensor::zeros(&[len, f]);
        for l in 0..len {
            dy.row_mut(l).copy_from_slice(&dfeats.row(l)[k * f..(k + 1) * f]);
        }
        let dz = relu_backward(y, &dy);
        let g = conv1d_backward(&cache.x, ps.get(&kernel_name(k))?, &dz)?;
        ps.accumulate_grad(&kernel_name(k), &g.dkernel)?;
        ps.accumulate_grad(&bias_name(k), &g.dbias)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::heads::{HeadModel, HeadVariant, OUTPUT_BIAS, OUTPUT_WEIGHT};

    fn cfg(hidden: usize, widths: Vec<usize>, filters: usize) -> HeadConfig {
        let mut c = HeadConfig::new(HeadVariant::BasicCnn, hidden);
        c.kernel_widths = widths;
        c.filters_per_kernel = filters;
        c
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let model = HeadModel::new(cfg(4, vec![3, 5], 3)).unwrap();
        let mut ps = model.init_params(0).unwrap().cast::<f64>();
        for k in 0..2 {
            let shape = ps.get(&kernel_name(k)).unwrap().shape().to_vec();
            ps.set(&kernel_name(k), Tensor::zeros(&shape)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::uniform(&[6, 4], 1.0, &mut rng);
        let l = model.forward(&ps, &x, 6, None).unwrap().logits;
        assert!(l.start.iter().chain(&l.end).all(|&v| v == 0.0));
    }

    #[test]
    fn width_one_identity_reduces_to_affine() {
        // Width-1 identity filters pass positive embeddings straight through,
        // so the head collapses to the fully connected head on those inputs.
        let h = 3;
        let model = HeadModel::new(cfg(h, vec![1], h)).unwrap();
        let mut ps = model.init_params(0).unwrap().cast::<f64>();
        let mut ident = Tensor::zeros(&[1, h, h]);
        for i in 0..h {
            ident.data_mut()[i * h + i] = 1.0;
        }
        ps.set(&kernel_name(0), ident).unwrap();
        let avg = Tensor::from_vec(&[h, 2], vec![1.0 / 3.0; h * 2]).unwrap();
        ps.set(OUTPUT_WEIGHT, avg).unwrap();
        ps.set(OUTPUT_BIAS, Tensor::zeros(&[2])).unwrap();
        let x = Tensor::from_rows(&[vec![0.3, 0.6, 0.9], vec![1.5, 0.0, 1.5]]).unwrap();
        let l = model.forward(&ps, &x, 2, None).unwrap().logits;
        assert!((l.start[0] - 0.6).abs() < 1e-12);
        assert!((l.end[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_concat_matches_per_branch_computation() {
        let widths = vec![1, 2, 3];
        let c = cfg(8, widths.clone(), 4);
        let model = HeadModel::new(c.clone()).unwrap();
        let ps = model.init_params(5).unwrap().cast::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::uniform(&[9, 8], 1.0, &mut rng);
        let (feats, _) = forward(&c, &ps, &x).unwrap();
        assert_eq!(feats.shape(), [9, 12]);
        for (k, _) in widths.iter().enumerate() {
            let branch = relu(
                &conv1d(&x, ps.get(&kernel_name(k)).unwrap(), ps.get(&bias_name(k)).unwrap()).unwrap(),
            );
            for l in 0..9 {
                assert_eq!(&feats.row(l)[k * 4..(k + 1) * 4], branch.row(l));
            }
        }
    }
}
