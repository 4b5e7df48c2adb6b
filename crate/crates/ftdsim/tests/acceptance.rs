//! Acceptance checks. Each test prints exactly one line,
//! `criterion NN [PASS|FAIL] <name>`, and fails the build if the
//! criterion does not hold. Tolerances are pinned next to each check.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftdsim::channels::{
    classify_product_preserving_unitary, cnot, one_sided_dephasing,
    reconstruct_unitary_from_channel, swap_operator, Channel, ReconstructionError, UnitaryClass,
};
use ftdsim::entanglement::{classify_separability, min_pt_eigenvalue, Classification};
use ftdsim::ftd::{detect_ftd, unital_mixing_window, Dynamics, FtdOutcome};
use ftdsim::lindblad::{
    amplitude_damping_generator, dephasing_generator, depolarizing_generator, evolve_state,
    integrate, IntegrationOptions, LindbladGenerator,
};
use ftdsim::random::{haar_product, haar_pure, haar_unitary, haar_vector, random_density};
use ftdsim::states::{
    bell_state, is_product, isotropic_mix, phase_family_all_product, BellState, DensityOperator,
    PureState,
};
use ftdsim::tensor::{
    hermitian_spectrum, kron, max_diff_up_to_phase, partial_transpose, vec_norm, BipartiteDims,
    ComplexMatrix, C64,
};

fn criterion(number: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let failure = match outcome {
        Ok(Ok(())) => None,
        Ok(Err(msg)) => Some(msg),
        Err(panic) => Some(
            panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into()),
        ),
    };
    let verdict = if failure.is_none() { "PASS" } else { "FAIL" };
    println!("criterion {number:02} [{verdict}] {name}");
    if let Some(msg) = failure {
        panic!("criterion {number:02} ({name}) failed: {msg}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn dims22() -> BipartiteDims {
    BipartiteDims::new(2, 2).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ginibre(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ginibre(n, rng);
    g.add(&g.adjoint()).scale_re(0.5)
}

#[test]
fn criterion_01_bell_pt_eigenvalue() {
    criterion(1, "maximally entangled PT minimum is -1/2", || {
        let phi = bell_state(BellState::PhiPlus).density();
        let lm = min_pt_eigenvalue(&phi);
        ensure((lm + 0.5).abs() <= 1e-12, || {
            format!("lambda_minus = {lm}, expected -0.5 within 1e-12")
        })
    });
}

#[test]
fn criterion_02_werner_threshold() {
    criterion(2, "Werner mixture crosses separability at p = 1/3", || {
        let phi = bell_state(BellState::PhiPlus).density();
        let measured = |p: f64| -> Result<f64, String> {
            Ok(min_pt_eigenvalue(&lib(isotropic_mix(&phi, 1.0 - p))?))
        };
        // Affine closed form p(-1/2 - 1/4) + 1/4 pointwise, within 1e-12.
        for p in [0.0, 0.1, 1.0 / 3.0, 0.5, 0.9, 1.0] {
            let formula = p * (-0.5 - 0.25) + 0.25;
            let got = measured(p)?;
            ensure((got - formula).abs() <= 1e-12, || {
                format!("p = {p}: lambda_minus {got} vs formula {formula}")
            })?;
        }
        // Bisection over p agrees with the formula root 1/3 within 1e-9.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if measured(mid)? < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        ensure((root - 1.0 / 3.0).abs() <= 1e-9, || {
            format!("bisection root {root}, expected 1/3 within 1e-9")
        })
    });
}

#[test]
fn criterion_03_depolarizing_ftd_onset() {
    criterion(3, "depolarizing onset at ln 3 within 1e-4", || {
        let dynamics = lib(Dynamics::semigroup(
            lib(depolarizing_generator(1.0))?,
            2.0,
        ))?; // default integrator step 1e-3
        let rho0 = bell_state(BellState::PhiPlus).density();
        match lib(detect_ftd(&dynamics, &rho0, 64))? {
            FtdOutcome::Ftd(report) => {
                let a = report.intervals[0].start;
                ensure((a - 3.0f64.ln()).abs() <= 1e-4, || {
                    format!("onset {a}, expected ln 3 = {} within 1e-4", 3.0f64.ln())
                })
            }
            FtdOutcome::NoFtdFound => Err("no FTD detected".into()),
        }
    });
}

#[test]
fn criterion_04_closed_system_pipeline_on_cnot() {
    criterion(4, "CNOT maps the 2/3-Bell mixture strictly inside", || {
        let phi = bell_state(BellState::PhiPlus).density();
        let rho_e = lib(isotropic_mix(&phi, 1.0 / 3.0))?;
        let v = classify_separability(&rho_e);
        ensure(v.classification == Classification::Entangled, || {
            format!("witness classified {:?}", v.classification)
        })?;
        ensure((v.lambda_minus + 0.25).abs() <= 1e-9, || {
            format!("lambda_minus {}, expected -1/4 within 1e-9", v.lambda_minus)
        })?;
        let ch = lib(Channel::unitary(cnot(), Some(dims22())))?;
        let image = lib(ch.apply(&rho_e))?;
        let iv = classify_separability(&image);
        ensure(iv.classification == Classification::SeparableInterior, || {
            format!("image classified {:?}", iv.classification)
        })?;
        // Brute-force eigensolves: image and its PT sit at least 1/12
        // above zero (within 1e-9).
        let bound = 1.0 / 12.0 - 1e-9;
        let spec = lib(hermitian_spectrum(image.matrix()))?;
        ensure(spec[0] >= bound, || {
            format!("image minimum eigenvalue {}", spec[0])
        })?;
        let pt = lib(partial_transpose(image.matrix(), dims22()))?;
        let pt_spec = lib(hermitian_spectrum(&pt.hermitize()))?;
        ensure(pt_spec[0] >= bound, || {
            format!("image PT minimum eigenvalue {}", pt_spec[0])
        })
    });
}

#[test]
fn criterion_05_unital_pipeline_on_dephasing() {
    criterion(5, "one-sided dephasing q=1/2 witness arithmetic", || {
        let ch = lib(one_sided_dephasing(0.5))?;
        let phi = bell_state(BellState::PhiPlus).density();
        let delta = min_pt_eigenvalue(&lib(ch.apply(&phi))?);
        ensure(delta.abs() <= 1e-9, || {
            format!("delta = {delta}, expected 0 within 1e-9")
        })?;
        let (lo, hi) = lib(unital_mixing_window(delta))?;
        ensure((lo - 1.0 / 3.0).abs() <= 1e-12 && (hi - 1.0).abs() <= 1e-9, || {
            format!("window ({lo}, {hi}), expected (1/3, 1)")
        })?;
        let p = 2.0 / 3.0;
        let witness = lib(isotropic_mix(&phi, 1.0 - p))?;
        let initial = min_pt_eigenvalue(&witness);
        ensure((initial + 0.25).abs() <= 1e-9, || {
            format!("initial lambda_minus {initial}, expected -1/4")
        })?;
        let image = min_pt_eigenvalue(&lib(ch.apply(&witness))?);
        ensure((image - 1.0 / 12.0).abs() <= 1e-9, || {
            format!("image lambda_minus {image}, expected 1/12")
        })
    });
}

#[test]
fn criterion_06_purity_derivative_identity() {
    criterion(6, "purity derivative matches finite differences", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC06);
        for trial in 0..20 {
            let dims = if trial % 2 == 0 {
                dims22()
            } else {
                BipartiteDims::new(2, 3).unwrap()
            };
            let d = dims.total();
            let h = hermitian(d, &mut rng).scale_re(0.5);
            let jumps: Vec<ComplexMatrix> = (0..1 + trial % 2)
                .map(|_| ginibre(d, &mut rng).scale_re(0.2))
                .collect();
            let gen = lib(LindbladGenerator::new(h, jumps, dims))?;
            let psi = haar_pure(dims, &mut rng);
            let rho0 = psi.density();
            let formula = lib(gen.purity_derivative_at_pure(&psi))?;
            let fd = |h: f64| -> Result<f64, String> {
                let opts = IntegrationOptions {
                    step: h / 20.0,
                    ..Default::default()
                };
                let rho_h = lib(evolve_state(&gen, &rho0, h, &opts))?;
                Ok((rho_h.purity() - 1.0) / h)
            };
            let e1 = (fd(1e-3)? - formula).abs();
            let e2 = (fd(1e-4)? - formula).abs();
            for (h, e) in [(1e-3, e1), (1e-4, e2)] {
                ensure(e <= 10.0 * h, || {
                    format!("trial {trial}, h = {h}: defect {e} vs formula {formula}")
                })?;
            }
            // The defect is first order in h, so a tenfold shrink in h
            // must shrink it at least fivefold (down to a 1e-9 floor).
            ensure(e2 <= (e1 / 5.0).max(1e-9), || {
                format!("trial {trial}: defects {e1} -> {e2} did not converge")
            })?;
        }
        // Jumps proportional to the identity: derivative vanishes.
        for trial in 0..20 {
            let dims = dims22();
            let h = hermitian(4, &mut rng);
            let c = C64::new(gaussian(&mut rng), gaussian(&mut rng));
            let gen = lib(LindbladGenerator::new(
                h,
                vec![ComplexMatrix::identity(4).scale(c)],
                dims,
            ))?;
            let psi = haar_pure(dims, &mut rng);
            let dp = lib(gen.purity_derivative_at_pure(&psi))?;
            ensure(dp.abs() <= 1e-12, || {
                format!("trial {trial}: trivial jumps gave derivative {dp}")
            })?;
        }
        Ok(())
    });
}

#[test]
fn criterion_07_unitary_classification_census() {
    criterion(7, "600+600 product-preserving classifications per dims", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC07);
        for (da, db) in [(2usize, 2usize), (3, 3)] {
            let dims = BipartiteDims::new(da, db).unwrap();
            let swap = lib(swap_operator(dims))?;
            for i in 0..200 {
                // Constructed local product.
                let a = haar_unitary(da, &mut rng);
                let b = haar_unitary(db, &mut rng);
                let u = kron(&a, &b);
                match lib(classify_product_preserving_unitary(&u, dims))? {
                    UnitaryClass::Local { factor_a, factor_b } => {
                        let res = max_diff_up_to_phase(&kron(&factor_a, &factor_b), &u);
                        ensure(res <= 1e-8, || {
                            format!("local {da}x{db} #{i}: residual {res}")
                        })?;
                    }
                    other => {
                        return Err(format!("local {da}x{db} #{i} tagged {}", other.tag()))
                    }
                }
                // Constructed local-after-swap.
                let us = kron(&haar_unitary(da, &mut rng), &haar_unitary(db, &mut rng)).mul(&swap);
                match lib(classify_product_preserving_unitary(&us, dims))? {
                    UnitaryClass::LocalSwap { factor_a, factor_b } => {
                        let rebuilt = kron(&factor_a, &factor_b).mul(&swap);
                        let res = max_diff_up_to_phase(&rebuilt, &us);
                        ensure(res <= 1e-8, || {
                            format!("local-swap {da}x{db} #{i}: residual {res}")
                        })?;
                    }
                    other => {
                        return Err(format!("local-swap {da}x{db} #{i} tagged {}", other.tag()))
                    }
                }
                // Haar-global: almost surely not product preserving.
                let g = haar_unitary(dims.total(), &mut rng);
                let class = lib(classify_product_preserving_unitary(&g, dims))?;
                ensure(class.tag() == "not_product_preserving", || {
                    format!("global {da}x{db} #{i} tagged {}", class.tag())
                })?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_08_unitary_reconstruction() {
    criterion(8, "unitary reconstruction round-trips and rejections", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC08);
        for d in [2usize, 3, 4, 6] {
            for i in 0..25 {
                let u = haar_unitary(d, &mut rng);
                let ch = lib(Channel::new(vec![u.clone()], None))?;
                let v = reconstruct_unitary_from_channel(&ch)
                    .map_err(|e| format!("d = {d} #{i}: {e}"))?;
                let res = max_diff_up_to_phase(&v, &u);
                ensure(res <= 1e-8, || format!("d = {d} #{i}: residual {res}"))?;
            }
        }
        // One-sided dephasing is unital but not pure-state preserving.
        let dephasing = lib(one_sided_dephasing(0.5))?;
        match reconstruct_unitary_from_channel(&dephasing) {
            Err(ReconstructionError::NotPurePreserving { .. }) => {}
            other => return Err(format!("dephasing gave {other:?}")),
        }
        // The constant channel to |0><0| is not unital.
        let mut k0 = ComplexMatrix::zeros(2, 2);
        k0.set(0, 0, C64::new(1.0, 0.0));
        let mut k1 = ComplexMatrix::zeros(2, 2);
        k1.set(0, 1, C64::new(1.0, 0.0));
        let constant = lib(Channel::new(vec![k0, k1], None))?;
        match reconstruct_unitary_from_channel(&constant) {
            Err(ReconstructionError::NotUnital) => Ok(()),
            other => Err(format!("constant channel gave {other:?}")),
        }
    });
}

#[test]
fn criterion_09_phase_family_oracle() {
    criterion(9, "phase-family verdicts match 720-point sampling", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC09);
        let dims_cycle = [
            BipartiteDims::new(2, 2).unwrap(),
            BipartiteDims::new(2, 3).unwrap(),
            BipartiteDims::new(3, 3).unwrap(),
        ];
        for i in 0..1000 {
            let dims = dims_cycle[i % 3];
            let (phi, psi) = build_pair(dims, i % 5, &mut rng);
            let claimed = lib(phase_family_all_product(&phi, &psi))?;
            let sampled = theta_oracle(&phi, &psi, 720);
            ensure(claimed == sampled, || {
                format!(
                    "pair #{i} ({}x{}, mode {}): verdict {claimed}, sampling says {sampled}",
                    dims.d_a(),
                    dims.d_b(),
                    i % 5
                )
            })?;
            if claimed {
                ensure(is_product(&phi) && is_product(&psi), || {
                    format!("pair #{i}: true verdict but inputs are not both product")
                })?;
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_10_integrator_hygiene() {
    criterion(10, "trace/positivity guards and RK4 convergence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xAC10);
        let dims = dims22();
        let phi = bell_state(BellState::PhiPlus).density();
        let mut skew = vec![C64::new(0.0, 0.0); 4];
        skew[0] = C64::new(0.1f64.sqrt(), 0.0);
        skew[3] = C64::new(0.9f64.sqrt(), 0.0);
        let skewed = PureState::new(skew, dims).unwrap().density();
        let random_gen = {
            let h = hermitian(4, &mut rng).scale_re(0.4);
            let a = ginibre(4, &mut rng).scale_re(0.4);
            lib(LindbladGenerator::new(h, vec![a], dims))?
        };
        let cases: Vec<(LindbladGenerator, DensityOperator)> = vec![
            (lib(depolarizing_generator(1.0))?, phi.clone()),
            (lib(amplitude_damping_generator(1.0, 1.0))?, skewed),
            (
                lib(dephasing_generator(0.7))?,
                random_density(dims, 2, &mut rng),
            ),
            (random_gen, haar_product(dims, &mut rng).density()),
        ];
        let opts = IntegrationOptions::default();
        for (idx, (gen, rho0)) in cases.iter().enumerate() {
            let traj = lib(integrate(gen, rho0, 2.0, &opts))?;
            for (state, t) in traj.states.iter().zip(traj.times.iter()) {
                let drift = (state.matrix().trace().re - 1.0).abs();
                ensure(drift <= 1e-8, || {
                    format!("case {idx}, t = {t}: trace drift {drift}")
                })?;
                let min = state.min_eigenvalue();
                ensure(min >= -1e-8, || {
                    format!("case {idx}, t = {t}: min eigenvalue {min}")
                })?;
            }
        }
        // RK4 order check against the closed-form depolarizing flow
        // rho(t) = e^{-rt} rho0 + (1 - e^{-rt}) I/4 at r = 2, t = 1.
        let gen = lib(depolarizing_generator(2.0))?;
        let decay = (-2.0f64).exp();
        let exact = phi
            .matrix()
            .scale_re(decay)
            .add(&ComplexMatrix::identity(4).scale_re((1.0 - decay) / 4.0));
        let err = |step: f64| -> Result<f64, String> {
            let opts = IntegrationOptions {
                step,
                ..Default::default()
            };
            Ok(lib(evolve_state(&gen, &phi, 1.0, &opts))?
                .matrix()
                .max_diff(&exact))
        };
        let coarse = err(1e-2)?;
        let fine = err(5e-3)?;
        let ratio = coarse / fine;
        ensure((8.0..=32.0).contains(&ratio), || {
            format!("error ratio {ratio} (coarse {coarse}, fine {fine}), expected about 16")
        })
    });
}

/// Pair construction for the phase-family oracle: shared left factor,
/// shared right factor, independent products, product against a generic
/// state, and equality up to a global phase.
fn build_pair(dims: BipartiteDims, mode: usize, rng: &mut ChaCha8Rng) -> (PureState, PureState) {
    let (da, db) = (dims.d_a(), dims.d_b());
    match mode {
        0 => {
            let a = haar_vector(da, rng);
            (
                PureState::product(&a, &haar_vector(db, rng), dims).unwrap(),
                PureState::product(&a, &haar_vector(db, rng), dims).unwrap(),
            )
        }
        1 => {
            let b = haar_vector(db, rng);
            (
                PureState::product(&haar_vector(da, rng), &b, dims).unwrap(),
                PureState::product(&haar_vector(da, rng), &b, dims).unwrap(),
            )
        }
        2 => (haar_product(dims, rng), haar_product(dims, rng)),
        3 => (haar_product(dims, rng), haar_pure(dims, rng)),
        _ => {
            let phi = haar_product(dims, rng);
            let phase = C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            let amps: Vec<C64> = phi.amplitudes().iter().map(|z| z * phase).collect();
            let psi = PureState::new(amps, dims).unwrap();
            (phi, psi)
        }
    }
}

/// Independent oracle for the phase family: test membership pointwise
/// on a uniform grid of the circle via the Schmidt decomposition.
fn theta_oracle(phi: &PureState, psi: &PureState, points: usize) -> bool {
    let dims = phi.dims();
    for k in 0..points {
        let theta = std::f64::consts::TAU * k as f64 / points as f64;
        let z = C64::from_polar(1.0, theta);
        let amps: Vec<C64> = phi
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(a, b)| a + z * b)
            .collect();
        if vec_norm(&amps) < 1e-6 {
            continue;
        }
        let member = PureState::from_unnormalized(&amps, dims).unwrap();
        if !is_product(&member) {
            return false;
        }
    }
    true
}
