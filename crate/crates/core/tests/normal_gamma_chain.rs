use coordwise::models::NormalGammaPrior;
use coordwise::quadrature::integrate;
use coordwise::rng::stream;
use coordwise::special::normal_logpdf;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const Y: [f64; 3] = [0.3, -0.8, 1.5];

/// log p(μ, τ | y) up to a constant, with θ integrated out: y_j ~ N(μ, 1/τ + 1).
fn log_post(prior: &NormalGammaPrior, mu: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let prec = tau / (1.0 + tau);
    prior.log_density(mu, tau) + Y.iter().map(|y| normal_logpdf(*y, mu, prec)).sum::<f64>()
}

fn mass(prior: &NormalGammaPrior, mu: (f64, f64), tau: (f64, f64)) -> f64 {
    integrate(
        |t| if t <= 0.0 { 0.0 } else { integrate(|m| log_post(prior, m, t).exp(), mu.0, mu.1, 1e-14, 1e-11).unwrap().value },
        tau.0,
        tau.1,
        1e-14,
        1e-10,
    )
    .unwrap()
    .value
}

fn chi2(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            assert!(e >= 5.0, "expected count {e}");
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

fn bin(edges: &[f64], x: f64) -> usize {
    edges.iter().position(|&e| x < e).unwrap_or(edges.len())
}

/// Gibbs on (ψ, θ) for y_j | θ_j ~ N(θ_j, 1), θ_j | ψ ~ N(μ, 1/τ), with the conjugate
/// ψ update; thinned marginal histograms of μ and τ against quadrature.
#[test]
fn gibbs_with_conjugate_update_matches_quadrature_marginals() {
    let prior = NormalGammaPrior::new(2.0, 1.0, 1.0, 0.0).unwrap();
    let (mu_lim, tau_lim) = ((-30.0, 30.0), (1e-12, 60.0));
    let z = mass(&prior, mu_lim, tau_lim);
    let mu_edges = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
    let tau_edges = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
    let probs = |edges: &[f64], lim: (f64, f64), is_mu: bool| -> Vec<f64> {
        let mut cuts = vec![lim.0];
        cuts.extend_from_slice(edges);
        cuts.push(lim.1);
        cuts.windows(2).map(|w| if is_mu { mass(&prior, (w[0], w[1]), tau_lim) } else { mass(&prior, mu_lim, (w[0], w[1])) } / z).collect()
    };
    let p_mu = probs(&mu_edges, mu_lim, true);
    let p_tau = probs(&tau_edges, tau_lim, false);
    assert!((p_mu.iter().sum::<f64>() - 1.0).abs() < 1e-8);

    let mut rng = stream(21, &[]);
    let mut theta = Y.to_vec();
    let (mut c_mu, mut c_tau) = (vec![0usize; p_mu.len()], vec![0usize; p_tau.len()]);
    let thin = 50;
    for sweep in 0..1_000_000 {
        let (mu, tau) = prior.update(&theta, &mut rng).unwrap();
        for (t, y) in theta.iter_mut().zip(Y) {
            let prec = tau + 1.0;
            *t = Normal::new((tau * mu + y) / prec, prec.sqrt().recip()).unwrap().sample(&mut rng);
        }
        if sweep % thin == 0 {
            c_mu[bin(&mu_edges, mu)] += 1;
            c_tau[bin(&tau_edges, tau)] += 1;
        }
    }
    for (name, c, p) in [("mu", &c_mu, &p_mu), ("tau", &c_tau, &p_tau)] {
        let stat = chi2(c, p);
        let crit = ChiSquared::new((p.len() - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "{name}: chi2 {stat:.2} >= {crit:.2}");
    }
}
