use coordwise::diagnostics::iat;
use coordwise::diffusion::*;
use coordwise::models::diffusion::{DiffusionModel, Drift, ThetaPrior};
use coordwise::quadrature::integrate;
use coordwise::rng::stream;

fn normal_pdf(y: f64, m: f64, v: f64) -> f64 {
    (-(y - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

fn sign(conv: Convention) -> f64 {
    match conv {
        Convention::Reduced => 1.0,
        Convention::Ito => -1.0,
    }
}

/// −½ Σ (θ² sin² y_k ∓ θ cos y_k) dt written out directly.
fn sine_log_weight(vals: &[f64], dt: f64, theta: f64, s: f64) -> f64 {
    let r = vals.len() - 1;
    -0.5 * vals[..r].iter().map(|y| theta * theta * y.sin().powi(2) - s * theta * y.cos()).sum::<f64>() * dt
}

#[test]
fn bridge_midpoint_variance() {
    let mut rng = stream(11, &[]);
    let n = 400_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let y = sample_brownian_bridge((0.0, 0.0), (0.0, 1.0), 2, &mut rng).unwrap().values()[1];
        s += y;
        s2 += y * y;
    }
    let (mean, var) = (s / n as f64, s2 / n as f64);
    // var of the sample variance is 2σ⁴/n
    let se = (2.0 * 0.25f64.powi(2) / n as f64).sqrt();
    assert!(mean.abs() < 4.0 * (0.25 / n as f64).sqrt());
    assert!((var - 0.25).abs() < 4.0 * se, "{var}");
    // the variance scales linearly with the interval length
    let short =
        (0..n).map(|_| sample_brownian_bridge((0.0, 0.0), (0.0, 1e-6), 2, &mut rng).unwrap().values()[1].powi(2)).sum::<f64>() / n as f64;
    assert!((short / 0.25e-6 - 1.0).abs() < 4.0 * se / 0.25);
}

#[test]
fn theta_posterior_mean_matches_quadrature() {
    let obs = vec![0.1, 0.9, 1.4, 2.2];
    let mut rng = stream(12, &[]);
    for conv in [Convention::Reduced, Convention::Ito] {
        for prior in [ThetaPrior::Flat, ThetaPrior::Gaussian { mean: 0.5, prec: 1.5 }] {
            let model = DiffusionModel::new(Drift::Sine, 0.7, obs.clone(), (0.0, 2.0), prior).unwrap();
            let segs: Vec<PathSegment> = (0..3)
                .map(|i| sample_brownian_bridge((obs[i], obs[i + 1]), (0.7 * i as f64, 0.7 * (i + 1) as f64), 16, &mut rng).unwrap())
                .collect();
            let stats: Vec<PathStats> = segs.iter().map(|s| PathStats::of(s, Drift::Sine).unwrap()).collect();
            let (a, b) = theta_coefficients(&model, &stats, conv);
            let post = theta_posterior(a, b, prior, model.support).unwrap();
            let end = -obs[3].cos() + obs[0].cos();
            let logpost = |t: f64| {
                t * end + segs.iter().map(|s| sine_log_weight(s.values(), s.dt(), t, sign(conv))).sum::<f64>() + model.log_prior(t)
            };
            let shift = logpost(1.0);
            let z = integrate(|t| (logpost(t) - shift).exp(), 0.0, 2.0, 1e-14, 1e-13).unwrap().value;
            let m = integrate(|t| t * (logpost(t) - shift).exp(), 0.0, 2.0, 1e-14, 1e-13).unwrap().value;
            assert!((post.mean_truncated() - m / z).abs() < 1e-6, "{conv:?} {prior:?}");
        }
    }
}

/// R = 2: the single interior point has proposal N(mid, Δ/4) and weight w(y).
struct OnePoint {
    x0: f64,
    x1: f64,
    len: f64,
    theta: f64,
}

impl OnePoint {
    fn seg(&self, y: f64) -> PathSegment {
        PathSegment::from_values(0.0, self.len, vec![self.x0, y, self.x1]).unwrap()
    }
    fn w(&self, y: f64) -> f64 {
        girsanov_log_weight(&self.seg(y), self.theta, Drift::Sine).unwrap().log_weight.exp()
    }
    fn q(&self, y: f64) -> f64 {
        normal_pdf(y, 0.5 * (self.x0 + self.x1), self.len / 4.0)
    }
    fn range(&self) -> (f64, f64) {
        let m = 0.5 * (self.x0 + self.x1);
        let sd = (self.len / 4.0).sqrt();
        (m - 12.0 * sd, m + 12.0 * sd)
    }
    fn accept_prob(&self, y: f64) -> f64 {
        let (lo, hi) = self.range();
        let wy = self.w(y);
        integrate(|z| self.q(z) * (self.w(z) / wy).min(1.0), lo, hi, 1e-13, 1e-12).unwrap().value
    }
}

#[test]
fn one_point_imh_leaves_target_invariant() {
    let p = OnePoint { x0: 0.3, x1: 1.9, len: 1.2, theta: 1.6 };
    let (lo, hi) = p.range();
    let z = integrate(|y| p.q(y) * p.w(y), lo, hi, 1e-14, 1e-13).unwrap().value;
    let pi = |y: f64| p.q(y) * p.w(y) / z;
    for f in [|y: f64| y, |y: f64| y * y, |y: f64| y.sin()] {
        // E_π[Pf] − E_π[f] = ∫∫ π(y) q(y') α(y, y') (f(y') − f(y))
        let inner = |y: f64| {
            let wy = p.w(y);
            integrate(|yp| p.q(yp) * (p.w(yp) / wy).min(1.0) * (f(yp) - f(y)), lo, hi, 1e-13, 1e-12).unwrap().value
        };
        let d = integrate(|y| pi(y) * inner(y), lo, hi, 1e-12, 1e-12).unwrap().value;
        assert!(d.abs() < 1e-8, "{d}");
    }
}

#[test]
fn one_point_acceptance_matches_quadrature() {
    let p = OnePoint { x0: 0.3, x1: 1.9, len: 1.2, theta: 1.6 };
    let mut rng = stream(13, &[]);
    for y0 in [1.1, -0.4, 2.8] {
        let want = p.accept_prob(y0);
        let n = 200_000;
        let mut hits = 0;
        for _ in 0..n {
            let mut s = p.seg(y0);
            if bridge_imh_update(&mut s, p.theta, Drift::Sine, &mut rng).unwrap() {
                hits += 1;
            }
        }
        let got = hits as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se, "y0 = {y0}: {got} vs {want}");
    }
}

/// Marginal θ density of the N = 2, R = 2 discretised posterior, up to a constant.
fn coarse_theta_density(obs: &[f64], delta: f64, conv: Convention) -> impl Fn(f64) -> f64 + '_ {
    move |t: f64| {
        let s = sign(conv);
        let end = -obs[2].cos() + obs[0].cos();
        let mut log_val = t * end;
        let mut val = 1.0;
        for i in 0..2 {
            let m = 0.5 * (obs[i] + obs[i + 1]);
            let v = delta / 4.0;
            let sd = v.sqrt();
            let dt = delta / 2.0;
            let x = obs[i];
            log_val += -0.5 * (t * t * x.sin().powi(2) - s * t * x.cos()) * dt;
            let g = |y: f64| normal_pdf(y, m, v) * (-0.5 * (t * t * y.sin().powi(2) - s * t * y.cos()) * dt).exp();
            val *= integrate(g, m - 12.0 * sd, m + 12.0 * sd, 1e-14, 1e-12).unwrap().value;
        }
        val * log_val.exp()
    }
}

#[test]
fn coarse_da_theta_moments_match_quadrature() {
    let obs = vec![0.0, 1.1, 2.4];
    let delta = 1.0;
    for (ci, conv) in [Convention::Reduced, Convention::Ito].into_iter().enumerate() {
        let dens = coarse_theta_density(&obs, delta, conv);
        let z = integrate(&dens, 0.0, 2.0, 1e-13, 1e-12).unwrap().value;
        let m1 = integrate(|t| t * dens(t), 0.0, 2.0, 1e-13, 1e-12).unwrap().value / z;
        let m2 = integrate(|t| t * t * dens(t), 0.0, 2.0, 1e-13, 1e-12).unwrap().value / z;

        let model = DiffusionModel::new(Drift::Sine, delta, obs.clone(), (0.0, 2.0), ThetaPrior::Flat).unwrap();
        let mut rng = stream(14, &[ci as u64]);
        let mut s = DaSampler::new(model, 2, 1.0, &mut rng).unwrap().with_convention(conv);
        let run = s.run(10_000_000, 1000, &mut rng).unwrap();
        for (k, want) in [(1, m1), (2, m2)] {
            let xs: Vec<f64> = run.theta.iter().map(|t| t.powi(k)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let se = (var * iat(&xs).unwrap().iat / n).sqrt();
            assert!((mean - want).abs() < 3.0 * se, "{conv:?} moment {k}: {mean} vs {want} (se {se})");
        }
    }
}

#[test]
fn acceptance_study_is_reproducible() {
    let st = AcceptanceStudy {
        drift: Drift::Sine,
        theta_true: 1.0,
        horizon: 2.0,
        support: (0.0, 2.0),
        r: 8,
        iters: 400,
        burnin: 100,
        seed: 9,
        convention: Convention::Reduced,
    };
    let a = st.run(&[2, 4]).unwrap();
    let b = st.run(&[2, 4]).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.acceptance > 0.5 && r.acceptance <= 1.0));
    assert!(st.run(&[3, 4]).is_err());
}
