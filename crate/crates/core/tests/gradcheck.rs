use kanformer_core::gradcheck::{run_suite, run_target, GradcheckOptions, PRIMITIVE_TARGETS};
use kanformer_core::{Graph, OpKind, ParamStore, Tensor};

#[test]
fn primitives_match_finite_differences_to_1e6_on_ten_seeds() {
    let opts = GradcheckOptions {
        tol: 1e-6,
        ..GradcheckOptions::default()
    };
    for seed in 0..10 {
        for t in PRIMITIVE_TARGETS {
            let r = run_target(t, seed, &opts).unwrap();
            assert!(r.pass, "{t} seed {seed}: {r:?}");
        }
    }
}

#[test]
fn full_suite_passes_at_default_tolerance() {
    for seed in [0, 7] {
        for e in run_suite(seed, 1e-4).unwrap() {
            assert!(e.report.pass, "{} seed {seed}: {:?}", e.target, e.report);
        }
    }
}

#[test]
fn tolerance_below_rounding_noise_fails() {
    let suite = run_suite(0, 1e-12).unwrap();
    assert!(suite.iter().any(|e| !e.report.pass));
}

#[test]
fn injected_gradient_fault_is_detected() {
    let mut store = ParamStore::<f64>::new();
    let x = store.add("x", Tensor::new([3], vec![0.3, -0.2, 0.9]).unwrap());
    let f = |inject: bool| {
        kanformer_core::gradcheck::gradcheck_params(
            &store,
            |g: &mut Graph<'_, f64>| {
                if inject {
                    g.inject_gradient_fault(OpKind::Tanh, 1.01);
                }
                let v = g.param(x);
                let t = g.tanh(v);
                Ok(g.sum(t))
            },
            &GradcheckOptions::default(),
        )
        .unwrap()
    };
    assert!(f(false).pass);
    let bad = f(true);
    assert!(!bad.pass);
    assert_eq!(bad.worst.as_ref().map(|w| w.0.as_str()), Some("x"));
}
