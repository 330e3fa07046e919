mod common;

use common::{head_grad_check, rng};
use spanqa_core::diffmath::ops::{
    conv1d, conv1d_backward, matmul_affine, matmul_affine_backward, max_over_rows, max_over_rows_backward, relu,
    relu_backward,
};
use spanqa_core::diffmath::{
    grad_check, lstm_cell, lstm_cell_backward, softmax_cross_entropy, ParamStore, Tensor, DEFAULT_EPSILON,
};
use spanqa_core::heads::HeadVariant;
use spanqa_core::Result;

const TOL: f64 = 1e-4;

fn store(entries: Vec<(&str, Tensor<f64>)>) -> ParamStore<f64> {
    let mut ps = ParamStore::new();
    for (n, t) in entries {
        ps.insert(n, t).unwrap();
    }
    ps
}

/// Contract an output against a fixed random tensor to get a scalar loss.
fn contract(out: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn affine_gradients() {
    let mut g = rng(1);
    let ps = store(vec![
        ("x", Tensor::uniform(&[4, 5], 1.0, &mut g)),
        ("w", Tensor::uniform(&[5, 3], 1.0, &mut g)),
        ("b", Tensor::uniform(&[3], 1.0, &mut g)),
    ]);
    let r = Tensor::uniform(&[4, 3], 1.0, &mut g);
    let rep = grad_check(
        |ps: &mut ParamStore<f64>| -> Result<f64> {
            let (x, w) = (ps.get("x")?.clone(), ps.get("w")?.clone());
            let y = matmul_affine(&x, &w, ps.get("b")?)?;
            let gr = matmul_affine_backward(&x, &w, &r)?;
            ps.accumulate_grad("x", &gr.dx)?;
            ps.accumulate_grad("w", &gr.dw)?;
            ps.accumulate_grad("b", &gr.db)?;
            Ok(contract(&y, &r))
        },
        &ps,
        DEFAULT_EPSILON,
    )
    .unwrap();
    assert!(rep.max_relative_error < TOL, "{rep:?}");
}

#[test]
fn conv1d_gradients_all_widths() {
    for width in 1..=5 {
        let mut g = rng(10 + width as u64);
        let ps = store(vec![
            ("x", Tensor::uniform(&[7, 4], 1.0, &mut g)),
            ("k", Tensor::uniform(&[width, 4, 3], 1.0, &mut g)),
            ("b", Tensor::uniform(&[3], 1.0, &mut g)),
        ]);
        let r = Tensor::uniform(&[7, 3], 1.0, &mut g);
        let rep = grad_check(
            |ps: &mut ParamStore<f64>| -> Result<f64> {
                let (x, k) = (ps.get("x")?.clone(), ps.get("k")?.clone());
                let y = conv1d(&x, &k, ps.get("b")?)?;
                let gr = conv1d_backward(&x, &k, &r)?;
                ps.accumulate_grad("x", &gr.dx)?;
                ps.accumulate_grad("k", &gr.dkernel)?;
                ps.accumulate_grad("b", &gr.dbias)?;
                Ok(contract(&y, &r))
            },
            &ps,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert!(rep.max_relative_error < TOL, "width {width}: {rep:?}");
    }
}

#[test]
fn relu_and_max_pool_gradients() {
    let mut g = rng(3);
    let ps = store(vec![("x", Tensor::uniform(&[6, 5], 1.0, &mut g))]);
    let r = Tensor::uniform(&[6, 5], 1.0, &mut g);
    let rp = Tensor::uniform(&[1, 5], 1.0, &mut g);
    let rep = grad_check(
        |ps: &mut ParamStore<f64>| -> Result<f64> {
            let x = ps.get("x")?.clone();
            let y = relu(&x);
            let (pooled, arg) = max_over_rows(&x, 4)?;
            let mut dx = relu_backward(&y, &r);
            dx.add_assign(&max_over_rows_backward(6, &arg, &rp))?;
            ps.accumulate_grad("x", &dx)?;
            Ok(contract(&y, &r) + contract(&pooled, &rp))
        },
        &ps,
        DEFAULT_EPSILON,
    )
    .unwrap();
    assert!(rep.max_relative_error < TOL, "{rep:?}");
}

#[test]
fn lstm_cell_gradients() {
    let (input, d) = (4, 3);
    let mut g = rng(4);
    let ps = store(vec![
        ("x", Tensor::uniform(&[input], 1.0, &mut g)),
        ("h", Tensor::uniform(&[d], 1.0, &mut g)),
        ("c", Tensor::uniform(&[d], 1.0, &mut g)),
        ("w", Tensor::uniform(&[input + d, 4 * d], 1.0, &mut g)),
        ("b", Tensor::uniform(&[4 * d], 1.0, &mut g)),
    ]);
    let rh: Vec<f64> = Tensor::<f64>::uniform(&[d], 1.0, &mut g).into_data();
    let rc: Vec<f64> = Tensor::<f64>::uniform(&[d], 1.0, &mut g).into_data();
    let rep = grad_check(
        |ps: &mut ParamStore<f64>| -> Result<f64> {
            let w = ps.get("w")?.clone();
            let step = lstm_cell(ps.get("x")?.data(), ps.get("h")?.data(), ps.get("c")?.data(), &w, ps.get("b")?)?;
            let mut dw = Tensor::zeros(w.shape());
            let mut db = Tensor::zeros(&[4 * d]);
            let gr = lstm_cell_backward(&step, &w, &rh, &rc, &mut dw, &mut db)?;
            ps.accumulate_grad("w", &dw)?;
            ps.accumulate_grad("b", &db)?;
            ps.accumulate_grad("x", &Tensor::from_vec(&[input], gr.dx)?)?;
            ps.accumulate_grad("h", &Tensor::from_vec(&[d], gr.dh_prev)?)?;
            ps.accumulate_grad("c", &Tensor::from_vec(&[d], gr.dc_prev)?)?;
            let loss: f64 = step.h.iter().zip(&rh).chain(step.c.iter().zip(&rc)).map(|(a, b)| a * b).sum();
            Ok(loss)
        },
        &ps,
        DEFAULT_EPSILON,
    )
    .unwrap();
    assert!(rep.max_relative_error < TOL, "{rep:?}");
}

#[test]
fn softmax_cross_entropy_gradients() {
    let mut g = rng(5);
    let ps = store(vec![("z", Tensor::uniform(&[9], 3.0, &mut g))]);
    let rep = grad_check(
        |ps: &mut ParamStore<f64>| -> Result<f64> {
            let (loss, grad) = softmax_cross_entropy(ps.get("z")?.data(), 4)?;
            ps.accumulate_grad("z", &Tensor::from_vec(&[9], grad)?)?;
            Ok(loss)
        },
        &ps,
        DEFAULT_EPSILON,
    )
    .unwrap();
    assert!(rep.max_relative_error < TOL, "{rep:?}");
}

#[test]
fn every_head_end_to_end() {
    for variant in HeadVariant::ALL {
        for (seed, (len, valid)) in [(12, 9), (12, 12), (7, 3)].into_iter().enumerate() {
            let rep = head_grad_check(variant, 8, len, valid, seed as u64, false).unwrap();
            assert!(rep.max_relative_error < TOL, "{variant:?} L={len}: {rep:?}");
        }
    }
}

#[test]
fn every_head_many_seeds() {
    for variant in HeadVariant::ALL {
        for seed in 100..120 {
            let rep = head_grad_check(variant, 16, 12, 10, seed, false).unwrap();
            assert!(rep.max_relative_error < TOL, "{variant:?} seed {seed}: {rep:?}");
        }
    }
}

#[test]
fn every_head_with_fixed_dropout_mask() {
    for variant in HeadVariant::ALL {
        let rep = head_grad_check(variant, 16, 10, 8, 42, true).unwrap();
        assert!(rep.max_relative_error < TOL, "{variant:?}: {rep:?}");
    }
}

#[test]
fn context_cnn_both_stages_at_default_widths() {
    let rep = common::context_cnn_default_grad_check(9).unwrap();
    assert!(rep.max_relative_error < TOL, "{rep:?}");
    assert!(rep.coords_checked >= 256);
}
