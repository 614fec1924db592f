use ssp::ddim::{
    ddim_inverse_step, ddim_step, guided_eps, invert, sample, Direction, CLEAN_TIMESTEP,
};
use ssp::guidance::GuidanceConfig;
use ssp::rng::{SeededRng, Stream};
use ssp::schedule::{NoiseSchedule, ScheduleParams};
use ssp::score::{
    make_conditional_mixture, ConditionalMixture, GaussianMixture, ScoreModel, SlotMatch,
};
use ssp::{Grid, Shape};

fn noise(shape: Shape, seed: u64, std: f64) -> Grid {
    SeededRng::new(seed, Stream::Named("ddim-test")).normal_grid(shape, std)
}

fn schedule(n: usize) -> NoiseSchedule {
    NoiseSchedule::new(ScheduleParams::default(), n).unwrap()
}

fn unguided(model: &dyn ScoreModel) -> GuidanceConfig {
    GuidanceConfig::none(model.null_condition(), model.null_condition())
}

fn round_trip(
    model: &dyn ScoreModel,
    x0: &Grid,
    n: usize,
    inv: &GuidanceConfig,
    smp: &GuidanceConfig,
) -> f64 {
    let s = schedule(n);
    let zt = invert(model, &s, x0, inv).unwrap();
    let back = sample(model, &s, zt.last(), smp).unwrap();
    back.last().sub(x0).unwrap().norm() / x0.norm()
}

/// The zero-mean, unit-scale isotropic model.
fn standard_model(shape: Shape) -> GaussianMixture {
    GaussianMixture::isotropic(Grid::zeros(shape), 1.0).unwrap()
}

#[test]
fn single_step_inverse_identity() {
    let shape = Shape::new(4, 4, 3);
    for seed in 0..20 {
        let z = noise(shape, seed, 2.0);
        let e = noise(shape, seed + 100, 1.0);
        let s = schedule(50);
        let (at, ap) = s.ddim_pair(1 + (seed as usize) % 49).unwrap();
        let down = ddim_step(&z, &e, at, ap).unwrap();
        let up = ddim_inverse_step(&down, &e, ap, at).unwrap();
        assert!(up.sub(&z).unwrap().max_abs() < 1e-12);
    }
}

/// Probability-flow ODE in `x̄ = z/√ᾱ`, `σ = √(1/ᾱ − 1)`: `dx̄/dσ = ε(√ᾱ·x̄, ᾱ)`.
fn rk4_flow(model: &dyn ScoreModel, z: &Grid, abar_from: f64, abar_to: f64, steps: usize) -> Grid {
    let sig = |a: f64| (1.0 / a - 1.0).sqrt();
    let f = |x: &Grid, sigma: f64| {
        let abar = 1.0 / (1.0 + sigma * sigma);
        model
            .eps(
                &x.scale(abar.sqrt()),
                abar,
                &model.null_condition(),
                SlotMatch::Full,
            )
            .unwrap()
    };
    let (s0, s1) = (sig(abar_from), sig(abar_to));
    let h = (s1 - s0) / steps as f64;
    let mut x = z.scale(1.0 / abar_from.sqrt());
    for i in 0..steps {
        let s = s0 + h * i as f64;
        let k1 = f(&x, s);
        let k2 = f(&x.add(&k1.scale(h / 2.0)).unwrap(), s + h / 2.0);
        let k3 = f(&x.add(&k2.scale(h / 2.0)).unwrap(), s + h / 2.0);
        let k4 = f(&x.add(&k3.scale(h)).unwrap(), s + h);
        let incr = k1
            .add(&k2.scale(2.0))
            .unwrap()
            .add(&k3.scale(2.0))
            .unwrap()
            .add(&k4)
            .unwrap();
        x = x.add(&incr.scale(h / 6.0)).unwrap();
    }
    x.scale(abar_to.sqrt())
}

/// Exact flow of the isotropic model: `(x̄ − μ)/√(s² + σ²)` is conserved.
fn closed_form_flow(mu: &Grid, scale: f64, z: &Grid, abar_from: f64, abar_to: f64) -> Grid {
    let sig2 = |a: f64| 1.0 / a - 1.0;
    let k = ((scale * scale + sig2(abar_to)) / (scale * scale + sig2(abar_from))).sqrt();
    z.scale(1.0 / abar_from.sqrt())
        .zip_map(mu, |x, m| m + (x - m) * k)
        .unwrap()
        .scale(abar_to.sqrt())
}

#[test]
fn rk4_oracle_matches_closed_form() {
    let shape = Shape::new(4, 4, 1);
    let mu = noise(shape, 1, 1.0);
    let model = GaussianMixture::isotropic(mu.clone(), 0.7).unwrap();
    let s = schedule(50);
    let (at, ap) = s.ddim_pair(30).unwrap();
    let z = noise(shape, 2, 1.0);
    let fine = rk4_flow(&model, &z, at, ap, 2000);
    let exact = closed_form_flow(&mu, 0.7, &z, at, ap);
    assert!(fine.sub(&exact).unwrap().norm() / exact.norm() < 1e-10);
}

#[test]
fn one_step_tracks_fine_ode() {
    let shape = Shape::new(4, 4, 2);
    let mu = noise(shape, 3, 1.0);
    let model = GaussianMixture::isotropic(mu.clone(), 0.8).unwrap();
    let s = schedule(50);
    for k in [49, 40, 25, 10, 1] {
        let (at, ap) = s.ddim_pair(k).unwrap();
        let z = mu
            .scale(at.sqrt())
            .add(&noise(shape, 10 + k as u64, 1.0))
            .unwrap();
        let eps = model
            .eps(&z, at, &model.null_condition(), SlotMatch::Full)
            .unwrap();
        let step = ddim_step(&z, &eps, at, ap).unwrap();
        let fine = rk4_flow(&model, &z, at, ap, 10_000);
        let rel = step.sub(&fine).unwrap().norm() / fine.norm();
        // The first step from z_T is pinned at 1e-3; later steps only need to stay small.
        let tol = if k == 49 { 1e-3 } else { 5e-3 };
        assert!(rel < tol, "k={k}: {rel:e}");
    }
}

#[test]
fn fifty_step_round_trip_and_convergence() {
    let shape = Shape::new(8, 8, 2);
    let model = standard_model(shape);
    let g = unguided(&model);
    let x0 = noise(shape, 4, 1.0);
    let errs: Vec<f64> = [10, 25, 50, 100]
        .iter()
        .map(|&n| round_trip(&model, &x0, n, &g, &g))
        .collect();
    assert!(errs[2] < 1e-2, "{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn convergence_with_offset_mean() {
    let shape = Shape::new(4, 4, 2);
    let mu = noise(shape, 5, 1.0);
    let model = GaussianMixture::isotropic(mu.clone(), 0.5).unwrap();
    let g = unguided(&model);
    let x0 = mu.add(&noise(shape, 6, 0.5)).unwrap();
    let errs: Vec<f64> = [10, 25, 50, 100]
        .iter()
        .map(|&n| round_trip(&model, &x0, n, &g, &g))
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    // First-order in the step size: halving h roughly halves the error.
    assert!((errs[2] / errs[3] - 2.0).abs() < 0.3, "{errs:?}");
}

fn two_label_model(shape: Shape) -> ConditionalMixture {
    make_conditional_mixture(vec![
        (
            "a".into(),
            None,
            GaussianMixture::isotropic(noise(shape, 7, 0.3), 1.0).unwrap(),
        ),
        (
            "b".into(),
            None,
            GaussianMixture::isotropic(noise(shape, 8, 0.3), 1.0).unwrap(),
        ),
    ])
    .unwrap()
}

#[test]
fn mismatched_cfg_degrades_reconstruction() {
    let shape = Shape::new(8, 8, 1);
    let model = two_label_model(shape);
    let pos = model.labels()[0].embedding.clone();
    let null = model.null_condition();
    let cfg = GuidanceConfig::cfg(pos.clone(), null.clone(), 5.0);
    let plain = GuidanceConfig::none(pos, null);
    let x0 = model.labels()[0]
        .mixture
        .mean()
        .add(&noise(shape, 9, 1.0))
        .unwrap();
    let matched = round_trip(&model, &x0, 50, &cfg, &cfg);
    let matched_plain = round_trip(&model, &x0, 50, &plain, &plain);
    let mismatched = round_trip(&model, &x0, 50, &plain, &cfg);
    assert!(
        matched < 5e-2 && matched_plain < 5e-2,
        "{matched} {matched_plain}"
    );
    assert!(matched < mismatched, "{matched} vs {mismatched}");

    // With a single isotropic model the conditional and unconditional
    // predictions coincide, so CFG cannot change anything.
    let iso = standard_model(shape);
    let e1 = round_trip(&iso, &x0, 50, &unguided(&iso), &unguided(&iso));
    let cfg_iso = GuidanceConfig::cfg(iso.null_condition(), iso.null_condition(), 5.0);
    assert_eq!(e1, round_trip(&iso, &x0, 50, &unguided(&iso), &cfg_iso));
}

#[test]
fn samples_land_near_the_mode() {
    let shape = Shape::new(4, 4, 1);
    let mu = noise(shape, 11, 2.0);
    let scale = 0.6;
    let model = GaussianMixture::isotropic(mu.clone(), scale).unwrap();
    let s = schedule(50);
    let abar_t = s.alpha_bar_at(49).unwrap();
    let marginal_std = (abar_t * scale * scale + 1.0 - abar_t).sqrt();
    let n = 100;
    let mut sums = [0.0; 16];
    let mut inside = [0usize; 16];
    for seed in 0..n {
        let zt = SeededRng::new(seed, Stream::Named("marginal"))
            .normal_grid(shape, marginal_std)
            .add(&mu.scale(abar_t.sqrt()))
            .unwrap();
        let out = sample(&model, &s, &zt, &unguided(&model)).unwrap();
        for (i, (v, m)) in out.last().data().iter().zip(mu.data()).enumerate() {
            sums[i] += v - m;
            if (v - m).abs() < 3.0 * scale {
                inside[i] += 1;
            }
        }
    }
    for i in 0..16 {
        let mean_offset = sums[i] / n as f64;
        assert!(
            mean_offset.abs() < 3.0 * scale / (n as f64).sqrt(),
            "bin {i}: {mean_offset}"
        );
        assert!(
            inside[i] >= 95,
            "bin {i}: {} of {n} within 3 std",
            inside[i]
        );
    }
}

#[test]
fn trajectories_record_every_level() {
    let shape = Shape::new(4, 4, 1);
    let model = standard_model(shape);
    let s = schedule(10);
    let x0 = noise(shape, 12, 1.0);
    let inv = invert(&model, &s, &x0, &unguided(&model)).unwrap();
    assert_eq!(inv.direction, Direction::Inversion);
    assert_eq!(inv.entries.len(), 11);
    assert_eq!(inv.entries[0].timestep, CLEAN_TIMESTEP);
    assert_eq!(inv.first(), &x0);
    let ts: Vec<i64> = inv.entries[1..].iter().map(|e| e.timestep).collect();
    assert_eq!(
        ts,
        s.sample_steps()
            .iter()
            .map(|&t| t as i64)
            .collect::<Vec<_>>()
    );
    let smp = sample(&model, &s, inv.last(), &unguided(&model)).unwrap();
    assert_eq!(smp.direction, Direction::Sampling);
    assert_eq!(smp.entries[0].timestep, 999);
    assert_eq!(smp.entries.last().unwrap().timestep, CLEAN_TIMESTEP);
    let rev: Vec<i64> = smp.entries.iter().rev().map(|e| e.timestep).collect();
    assert_eq!(
        rev,
        inv.entries.iter().map(|e| e.timestep).collect::<Vec<_>>()
    );
}

#[test]
fn guided_eps_queries_expected_branches() {
    let shape = Shape::new(8, 8, 1);
    let model = two_label_model(shape);
    let (a, b) = (
        model.labels()[0].embedding.clone(),
        model.labels()[1].embedding.clone(),
    );
    let z = noise(shape, 13, 1.0);
    let e = |c| model.eps(&z, 0.5, c, SlotMatch::Full).unwrap();
    let neg = guided_eps(
        &model,
        &z,
        0.5,
        &GuidanceConfig::negative(a.clone(), b.clone(), 1.5),
        SlotMatch::Full,
    )
    .unwrap();
    let want = e(&b).zip_map(&e(&a), |n, p| n + 1.5 * (p - n)).unwrap();
    assert!(neg.sub(&want).unwrap().max_abs() < 1e-12);
    let none = guided_eps(
        &model,
        &z,
        0.5,
        &GuidanceConfig::none(a.clone(), b.clone()),
        SlotMatch::Full,
    )
    .unwrap();
    assert_eq!(none, e(&a));
}

#[test]
fn shape_and_parameter_errors() {
    let model = standard_model(Shape::new(4, 4, 1));
    let s = schedule(10);
    let wrong = Grid::zeros(Shape::new(4, 5, 1));
    assert!(invert(&model, &s, &wrong, &unguided(&model)).is_err());
    assert!(sample(&model, &s, &wrong, &unguided(&model)).is_err());
    let bad = GuidanceConfig::cfg(model.null_condition(), model.null_condition(), -1.0);
    assert!(sample(&model, &s, &Grid::zeros(model.shape()), &bad).is_err());
}
