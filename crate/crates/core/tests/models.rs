mod common;

use common::oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vologan_core::autodiff::Graph;
use vologan_core::models::{count_parameters, Ablation, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Mode};
use vologan_core::nn::Ctx;
use vologan_core::optim::InitSpec;
use vologan_core::tensor::Tensor;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn image(n: usize, size: usize, seed: u64) -> Tensor<f32> {
    let mut r = rng(seed);
    Tensor::from_fn([n, 4, size, size], |_, _, _, _| r.gen_range(0.0..1.0))
}

fn toy_generator(seed: u64) -> Generator<f32> {
    Generator::build(GeneratorConfig::toy(), InitSpec::default(), &mut rng(seed)).unwrap()
}

fn toy_discriminator(seed: u64) -> Discriminator<f32> {
    Discriminator::build(DiscriminatorConfig::toy(), InitSpec::default(), &mut rng(seed)).unwrap()
}

#[test]
fn toy_generator_preserves_shape_and_range() {
    let g = toy_generator(1);
    let x = image(1, 64, 2);
    let y = g.forward(&x, Mode::Train, &mut rng(3)).unwrap();
    assert_eq!(y.shape(), x.shape());
    assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn full_generator_bottleneck_is_eight_wide() {
    let cfg = GeneratorConfig::default();
    assert_eq!(cfg.extent(cfg.levels), [8, 8]);
}

#[test]
fn toy_discriminator_head_shapes() {
    let d = toy_discriminator(4);
    let [low, layout, content] = d.forward(&image(2, 64, 5), Mode::Train, &mut rng(6)).unwrap();
    assert_eq!(low.shape().0, [2, 1, 8, 8]);
    assert_eq!(layout.shape().0, [2, 1, 4, 4]);
    assert_eq!(content.shape().0, [2, 1, 1, 1]);
}

#[test]
fn wrong_input_shape_is_rejected() {
    let g = toy_generator(1);
    assert!(g.forward(&image(1, 32, 0), Mode::Eval, &mut rng(0)).is_err());
    let d = toy_discriminator(1);
    assert!(d.forward(&image(1, 32, 0), Mode::Eval, &mut rng(0)).is_err());
}

#[test]
fn attention_level_must_be_a_decoder_width() {
    let cfg = GeneratorConfig {
        attention_level: 24,
        ..GeneratorConfig::toy()
    };
    assert!(Generator::<f32>::build(cfg, InitSpec::default(), &mut rng(0)).is_err());
}

#[test]
fn forward_is_deterministic_per_seed() {
    let g = toy_generator(7);
    let x = image(2, 64, 8);
    let a = g.forward(&x, Mode::Train, &mut rng(9)).unwrap();
    let b = g.forward(&x, Mode::Train, &mut rng(9)).unwrap();
    assert_eq!(a.data(), b.data());
    let d = toy_discriminator(7);
    let a = d.forward(&x, Mode::Train, &mut rng(9)).unwrap();
    let b = d.forward(&x, Mode::Train, &mut rng(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn eval_mode_ignores_the_rng() {
    let g = toy_generator(7);
    let x = image(1, 64, 8);
    let a = g.forward(&x, Mode::Eval, &mut rng(1)).unwrap();
    let b = g.forward(&x, Mode::Eval, &mut rng(2)).unwrap();
    assert_eq!(a.data(), b.data());
    let train = g.forward(&x, Mode::Train, &mut rng(1)).unwrap();
    assert_ne!(a.data(), train.data());
    let d = toy_discriminator(7);
    assert_eq!(d.forward(&x, Mode::Eval, &mut rng(1)).unwrap(), d.forward(&x, Mode::Eval, &mut rng(2)).unwrap());
}

fn ablated(g: &Generator<f32>, x: &Tensor<f32>, ablation: Ablation) -> Tensor<f32> {
    let graph = Graph::new();
    let bound = g.params.bind(&graph, false).unwrap();
    let mut r = rng(0);
    let mut ctx = Ctx {
        bound: &bound,
        training: false,
        rng: &mut r,
    };
    let xv = graph.constant(x.clone());
    let y = g.forward_ablated(&mut ctx, xv, ablation).unwrap();
    (*graph.value(y)).clone()
}

#[test]
fn skip_connections_carry_encoder_information() {
    let mut g = toy_generator(11);
    // non-zero gammas so attention is not a pass-through
    for (name, p) in g.params.iter_mut() {
        if name.ends_with(".gamma") {
            p.value = Tensor::scalar(0.5);
        }
    }
    let (x1, x2) = (image(1, 64, 12), image(1, 64, 13));
    let no_up = Ablation {
        zero_upsampled: Some(0),
        zero_skips: false,
    };
    let no_skips = Ablation {
        zero_upsampled: None,
        zero_skips: true,
    };
    let a = ablated(&g, &x1, no_up);
    assert_ne!(a.data(), ablated(&g, &x1, no_skips).data());
    // with the last non-skip input gone the output still depends on x
    assert_ne!(a.data(), ablated(&g, &x2, no_up).data());
}

#[test]
fn counts_match_the_shape_oracle() {
    let g = toy_generator(0);
    let want = oracle::generator(&g.cfg);
    let got = count_parameters(&g.params);
    assert_eq!((got.trainable, got.non_trainable), (want.trainable, want.non_trainable));
    let d = toy_discriminator(0);
    let want = oracle::discriminator(&d.cfg);
    let got = count_parameters(&d.params);
    assert_eq!((got.trainable, got.non_trainable), (want.trainable, want.non_trainable));
    assert_eq!(got.total, got.trainable + got.non_trainable);
}

#[test]
fn single_sn_conv_contributes_its_out_channels() {
    use vologan_core::nn::{Conv, ParamStore};
    let mut s = ParamStore::<f32>::new();
    Conv::reflect_sn("c", 3, 16, 3, 1).register(&mut s, InitSpec::default(), &mut rng(0)).unwrap();
    assert_eq!(s.count().non_trainable, 16);
    let mut s = ParamStore::<f32>::new();
    Conv::pointwise("p", 3, 16).register(&mut s, InitSpec::default(), &mut rng(0)).unwrap();
    assert_eq!(s.count().non_trainable, 0);
}

#[test]
fn doubling_base_channels_increases_the_count() {
    for base in [2, 4, 8] {
        let small = GeneratorConfig {
            base_channels: base,
            ..GeneratorConfig::toy()
        };
        let big = GeneratorConfig {
            base_channels: 2 * base,
            ..small.clone()
        };
        assert!(oracle::generator(&big).total() > oracle::generator(&small).total());
        let build = |c| count_parameters(&Generator::<f32>::build(c, InitSpec::default(), &mut rng(0)).unwrap().params).total;
        assert!(build(big) > build(small));
        let small = DiscriminatorConfig {
            base_channels: base,
            ..DiscriminatorConfig::toy()
        };
        let big = DiscriminatorConfig {
            base_channels: 2 * base,
            ..small.clone()
        };
        let build = |c| count_parameters(&Discriminator::<f32>::build(c, InitSpec::default(), &mut rng(0)).unwrap().params).total;
        assert!(build(big) > build(small));
    }
}
