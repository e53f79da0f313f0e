//! The two-branch decomposed KAN forecaster.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION};
pub use config::{count_params, make_ablation, Ablation, CoreKind, ModelConfig};
pub use forward::{backward, forward, forward_rows, predict_rows, ForwardCache};
pub use params::{BranchParams, CoreParams, ModelParams};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradients, GradCheckOptions};
    use crate::nn::{DenseParams, Parameters};
    use crate::numcore::{rand_normal, rand_uniform, Rng, Tensor2};
    use crate::preprocess::moving_average;

    fn tiny() -> ModelConfig {
        let mut c = ModelConfig::new(32, 4, 2);
        c.patch_len = 8;
        c.stride = 8;
        c.kan_hidden = 8;
        c.mlp_hidden = 8;
        c.ma_kernel = 5;
        c
    }

    /// Random weights everywhere, including the zero-initialized heads.
    fn randomized(config: &ModelConfig, seed: u64) -> ModelParams {
        let mut p = ModelParams::init(config, &Rng::new(seed));
        let mut rng = Rng::new(seed + 1000);
        if let Some(a) = &mut p.adaptive {
            a.norm_head = DenseParams::init(&mut rng, config.stats_dim, 2);
            a.denorm_out = DenseParams::init(&mut rng, config.denorm_hidden, 2);
            a.norm_head.weight.scale_in_place(0.3);
            a.denorm_out.weight.scale_in_place(0.3);
        }
        p
    }

    fn probe(y: &Tensor2, r: &Tensor2) -> f64 {
        y.hadamard(r).unwrap().sum()
    }

    #[test]
    fn output_shape_for_all_lookback_horizon_pairs() {
        for l in [336usize, 512] {
            for h in [96usize, 192, 336, 720] {
                let mut c = ModelConfig::new(l, h, 2);
                c.kan_hidden = 4;
                let p = ModelParams::init(&c, &Rng::new(0));
                let x = rand_normal(&mut Rng::new(1), 0.0, 1.0, l, 2).unwrap();
                assert_eq!(forward(&x, &p, &c).unwrap().0.shape(), (h, 2));
            }
        }
    }

    #[test]
    fn zero_cores_forecast_the_window_mean() {
        let c = tiny();
        let mut p = ModelParams::init(&c, &Rng::new(4));
        p.trend.as_mut().unwrap().core.silence();
        p.residual.core.silence();
        let x = rand_normal(&mut Rng::new(5), 3.0, 2.0, 32, 2).unwrap();
        let (y, _) = forward(&x, &p, &c).unwrap();
        for ch in 0..2 {
            let mu = x.col(ch).iter().sum::<f64>() / 32.0;
            for t in 0..4 {
                assert!((y.get(t, ch) - mu).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_pipeline_gradients_match_finite_differences() {
        let base = tiny();
        let mut variants = vec![base.clone()];
        variants.extend(Ablation::ALL.iter().map(|&v| make_ablation(&base, v)));
        for (vi, c) in variants.iter().enumerate() {
            for seed in 0..3u64 {
                let p = randomized(c, seed + 10 * vi as u64);
                let mut rng = Rng::new(77 + seed);
                let x = rand_normal(&mut rng, 0.5, 1.5, 32, 2).unwrap();
                let r = rand_uniform(&mut rng, -1.0, 1.0, 4, 2).unwrap();
                let (_, cache) = forward(&x, &p, c).unwrap();
                let g = backward(&cache, &p, &r).unwrap();
                g.matches(&p).unwrap();
                let opts = GradCheckOptions {
                    max_per_tensor: Some(40),
                    seed,
                    ..GradCheckOptions::default()
                };
                let report = check_gradients(&p, &g, &opts, |q: &ModelParams| probe(&forward(&x, q, c).unwrap().0, &r));
                assert!(report.passes(1e-4), "{} seed {seed}: {:?}", c.describe(), report.worst());
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let c = tiny();
        let p = randomized(&c, 1);
        let x = rand_normal(&mut Rng::new(2), 0.0, 1.0, 32, 2).unwrap();
        let (_, cache) = forward(&x, &p, &c).unwrap();
        let g = backward(&cache, &p, &Tensor2::zeros(4, 2)).unwrap();
        assert!(g.iter().all(|(_, t)| t.max_abs() == 0.0));
        assert!(backward(&cache, &p, &Tensor2::zeros(5, 2)).is_err());
    }

    #[test]
    fn trend_gradients_ignore_residual_activations() {
        let c = tiny();
        let p = randomized(&c, 3);
        let mut q = p.clone();
        q.residual = randomized(&c, 99).residual;
        // without the adaptive heads the branch upstream is the same for both
        let c = make_ablation(&c, Ablation::NoAdaptive);
        let mut p = p;
        p.adaptive = None;
        q.adaptive = None;
        let x = rand_normal(&mut Rng::new(8), 0.0, 1.0, 32, 2).unwrap();
        let r = rand_uniform(&mut Rng::new(9), -1.0, 1.0, 4, 2).unwrap();
        let gp = backward(&forward(&x, &p, &c).unwrap().1, &p, &r).unwrap();
        let gq = backward(&forward(&x, &q, &c).unwrap().1, &q, &r).unwrap();
        for (name, t) in gp.iter().filter(|(n, _)| n.starts_with("trend.")) {
            assert_eq!(t, gq.get(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn channel_permutation_is_equivariant() {
        let mut c = tiny();
        c.channels = 4;
        let p = randomized(&c, 6);
        let x = rand_normal(&mut Rng::new(7), 0.0, 2.0, 32, 4).unwrap();
        let perm = [2usize, 0, 3, 1];
        let mut xp = Tensor2::zeros(32, 4);
        for (j, &src) in perm.iter().enumerate() {
            for t in 0..32 {
                xp.set(t, j, x.get(t, src));
            }
        }
        let y = forward(&x, &p, &c).unwrap().0;
        let yp = forward(&xp, &p, &c).unwrap().0;
        for (j, &src) in perm.iter().enumerate() {
            assert_eq!(yp.col(j), y.col(src));
        }
    }

    /// With identity norms, a silenced trend core turns the decomposed model
    /// into the residual branch applied to `x − MA(x)`; with linear cores
    /// (no biases) and identical branches, decomposition is exactly
    /// undone by the branch sum.
    #[test]
    fn decomposition_wiring() {
        let mut c = make_ablation(&make_ablation(&tiny(), Ablation::NoAdaptive), Ablation::NoRevin);
        c.channels = 1;
        let x = rand_normal(&mut Rng::new(11), 0.0, 1.0, 32, 1).unwrap();

        let mut p = ModelParams::init(&c, &Rng::new(12));
        p.trend.as_mut().unwrap().core.silence();
        let single = make_ablation(&c, Ablation::NoDecomp);
        let sp = ModelParams {
            adaptive: None,
            trend: None,
            residual: p.residual.clone(),
        };
        let y = forward(&x, &p, &c).unwrap().0;
        let resid = x.transpose().sub(&moving_average(&x.transpose(), c.ma_kernel).unwrap()).unwrap();
        let expect = forward(&resid.transpose(), &sp, &single).unwrap().0;
        for (a, b) in y.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }

        let lin = make_ablation(&c, Ablation::CoreLinear);
        let mut lp = ModelParams::init(&lin, &Rng::new(13));
        lp.visit_mut("", &mut |n, t| {
            if n.ends_with("bias") {
                t.fill(0.0)
            }
        });
        lp.trend = Some(lp.residual.clone());
        let ls = make_ablation(&lin, Ablation::NoDecomp);
        let lsp = ModelParams {
            adaptive: None,
            trend: None,
            residual: lp.residual.clone(),
        };
        let a = forward(&x, &lp, &lin).unwrap().0;
        let b = forward(&x, &lsp, &ls).unwrap().0;
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn no_revin_still_applies_adaptive_stage() {
        let c = make_ablation(&tiny(), Ablation::NoRevin);
        let mut p = randomized(&c, 2);
        let x = rand_normal(&mut Rng::new(3), 0.0, 1.0, 32, 2).unwrap();
        let y1 = forward(&x, &p, &c).unwrap().0;
        p.adaptive.as_mut().unwrap().reset_norm_head();
        let y2 = forward(&x, &p, &c).unwrap().0;
        assert_ne!(y1, y2);
    }

    #[test]
    fn non_finite_values_name_the_stage() {
        let c = tiny();
        let mut p = randomized(&c, 1);
        let x = rand_normal(&mut Rng::new(3), 0.0, 1.0, 32, 2).unwrap();
        if let CoreParams::Kan(layers) = &mut p.residual.core {
            layers[1].base_weight.set(0, 0, f64::NAN);
        }
        match forward(&x, &p, &c) {
            Err(crate::Error::NonFinite { stage }) => assert_eq!(stage, "residual.core"),
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = x.clone();
        bad.set(3, 1, f64::INFINITY);
        assert!(matches!(forward(&bad, &randomized(&c, 1), &c), Err(crate::Error::NonFinite { .. })));
    }

    #[test]
    fn mismatched_layouts_are_rejected() {
        let c = tiny();
        let p = randomized(&c, 1);
        let other = make_ablation(&c, Ablation::CoreMlp);
        let x = rand_normal(&mut Rng::new(3), 0.0, 1.0, 32, 2).unwrap();
        assert!(forward(&x, &p, &other).is_err());
        assert!(forward(&Tensor2::zeros(31, 2), &p, &c).is_err());
        assert!(forward(&Tensor2::zeros(32, 3), &p, &c).is_err());
    }
}
