//! Structural invariants checked on states produced by the full chain.

use hybridswap::channel::{apply_channel, ChannelSpec};
use hybridswap::entanglement::log_negativity;
use hybridswap::fock::{hermitian_eigen, partial_transpose, trace_norm, Complex64};
use hybridswap::state_prep::{beam_splitter, split_photon, tmsv, tmsv_tail_weight, Impurity, SplitPhotonSpec, TmsvSpec};
use hybridswap::{FockDensityMatrix, FockKet};
use proptest::prelude::*;

fn source(reflectivity: f64, vacuum: f64) -> SplitPhotonSpec {
    let multiphoton = 0.011;
    SplitPhotonSpec::impure(reflectivity, Impurity::new(1.0 - vacuum - multiphoton, vacuum, multiphoton))
}

#[test]
fn pure_source_negativity_follows_schmidt_form() {
    for refl in [0.0, 0.25, 0.5, 0.67, 1.0] {
        let rho = split_photon(&SplitPhotonSpec::pure(refl), 3).unwrap();
        let want = 2.0 * (f64::sqrt(refl) + f64::sqrt(1.0 - refl)).log2();
        let got = log_negativity(&rho, &[0]).unwrap().log_negativity;
        assert!((got - want).abs() < 1e-10, "R {refl}: {got} vs {want}");
    }
}

#[test]
fn squeezed_vacuum_tail_has_closed_form() {
    for r in [0.0, 0.3, 0.71, 1.01] {
        let tail = tmsv_tail_weight(r, 17);
        assert!(tail < 1e-4, "r {r}");
        assert!((tail - f64::tanh(r).powi(36)).abs() < 1e-15);
    }
    let psi = tmsv(&TmsvSpec { r: 1.01, cutoff: 12 }).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn swapped_states_are_normalized_states(
        refl in 0.05f64..0.95,
        vacuum in 0.0f64..0.3,
        r in 0.0f64..1.1,
        g in 0.0f64..1.1,
        pre in 0.5f64..=1.0,
        post in 0.5f64..=1.0,
    ) {
        let input = split_photon(&source(refl, vacuum), 3).unwrap();
        let out = apply_channel(&input, 1, &ChannelSpec::new(r, g).with_losses(pre, post)).unwrap();
        out.validate().unwrap();
        prop_assert!((trace_norm(&out).unwrap() - 1.0).abs() < 1e-9);
        let twice = partial_transpose(&partial_transpose(&out, &[0]).unwrap(), &[0]).unwrap();
        prop_assert!((twice.matrix() - out.matrix()).camax() < 1e-15);
        let e_in = log_negativity(&input, &[0]).unwrap().log_negativity;
        let e_out = log_negativity(&out, &[0]).unwrap().log_negativity;
        prop_assert!(e_out <= e_in + 1e-9, "{e_out} > {e_in}");
    }

    #[test]
    fn eigenpairs_have_small_residuals(refl in 0.05f64..0.95, r in 0.0f64..1.1, g in 0.0f64..1.1) {
        let input = split_photon(&source(refl, 0.1), 2).unwrap();
        let out = apply_channel(&input, 1, &ChannelSpec::new(r, g)).unwrap();
        let pt = partial_transpose(&out, &[0]).unwrap();
        let eig = hermitian_eigen(pt.matrix()).unwrap();
        for (k, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(k);
            let residual = (pt.matrix() * v - v * Complex64::from(lambda)).norm();
            prop_assert!(residual <= 1e-8, "{residual}");
        }
    }

    #[test]
    fn beam_splitter_conserves_photon_number(
        t in 0.0f64..=1.0,
        phase in 0.0f64..std::f64::consts::TAU,
        a in 0usize..=2,
        b in 0usize..=2,
    ) {
        let rho = FockDensityMatrix::from_ket(&FockKet::basis(&[a, b], 4));
        let out = beam_splitter(&rho, 0, 1, t, phase).unwrap();
        let total = out.mean_photon_number(0) + out.mean_photon_number(1);
        prop_assert!((total - (a + b) as f64).abs() < 1e-10);
    }
}
