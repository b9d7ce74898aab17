use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepm::diagnostics::{
    alpha_grid_in_box, alpha_grid_with_margins, check_boundedness_g, check_condition_a, check_condition_b,
    check_condition_c, check_escape_f, check_identifiability_d, estimate_delta, estimate_lambda0,
    expected_shifted_loss, population_gap, population_objective, sample_gammas, shifted_loss_curve,
    ErrorDistribution, Expectation, XDistribution, ZERO_TOL,
};
use sepm::model::{
    exponential_decay, exponential_growth, logistic_growth, michaelis_menten, AlphaDomain, BetaCone, ParameterPoint,
    SeparableModel,
};
use sepm::{Error, LossFunction};

fn xs(dist: &XDistribution, n: usize, seed: u64) -> Vec<f64> {
    dist.sample_n(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn gauss(mean: f64, sd: f64) -> ErrorDistribution {
    ErrorDistribution::gaussian(mean, sd).unwrap()
}

fn mm_truth() -> ParameterPoint {
    ParameterPoint::new(vec![2.0], vec![1.0])
}

/// `h = (x/(x+α₁), x/(x+α₂))`: swapping the labels of `α` and `β` gives the
/// same regression function.
struct TwinMm {
    domain: AlphaDomain,
}

impl SeparableModel for TwinMm {
    fn name(&self) -> String {
        "twin-mm".into()
    }
    fn q(&self) -> usize {
        1
    }
    fn p2(&self) -> usize {
        2
    }
    fn alpha_domain(&self) -> &AlphaDomain {
        &self.domain
    }
    fn beta_cone(&self) -> BetaCone {
        BetaCone::NonnegativeOrthant
    }
    fn eval_basis(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        out[0] = x[0] / (x[0] + alpha[0]);
        out[1] = x[0] / (x[0] + alpha[1]);
    }
    fn default_search_box(&self) -> Vec<(f64, f64)> {
        vec![(1e-3, 1e3); 2]
    }
}

/// `h = 1`: `α` has no effect at all.
struct Flat {
    domain: AlphaDomain,
}

impl SeparableModel for Flat {
    fn name(&self) -> String {
        "flat".into()
    }
    fn q(&self) -> usize {
        1
    }
    fn p2(&self) -> usize {
        1
    }
    fn alpha_domain(&self) -> &AlphaDomain {
        &self.domain
    }
    fn beta_cone(&self) -> BetaCone {
        BetaCone::NonnegativeOrthant
    }
    fn eval_basis(&self, _x: &[f64], _alpha: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
    fn default_search_box(&self) -> Vec<(f64, f64)> {
        vec![(1e-3, 1e3)]
    }
}

fn positive_domain(p: usize) -> AlphaDomain {
    AlphaDomain::new(vec![(0.0, f64::INFINITY); p])
}

#[test]
fn expected_loss_examples() {
    let sq = LossFunction::square();
    let v = expected_shifted_loss(&sq, &gauss(0.0, 1.0), 0.0, Expectation::Quadrature).unwrap();
    assert!((v - 1.0).abs() < 1e-6);
    let bis = LossFunction::bisquare(4.685).unwrap();
    let v = expected_shifted_loss(&bis, &gauss(0.0, 1e-12), 0.0, Expectation::Quadrature).unwrap();
    assert!(v.abs() < 1e-9);
    let hub = LossFunction::huber(1.345).unwrap();
    let q = expected_shifted_loss(&hub, &gauss(0.0, 1.0), 0.0, Expectation::Quadrature).unwrap();
    let mc = expected_shifted_loss(&hub, &gauss(0.0, 1.0), 0.0, Expectation::MonteCarlo { n: 1_000_000, seed: 3 }).unwrap();
    assert!((q - mc).abs() < 0.01 * q, "{q} vs {mc}");
}

#[test]
fn lambda0_square_gaussian_is_the_variance() {
    for sd in [0.5, 1.0, 2.0] {
        let v = estimate_lambda0(&LossFunction::square(), &gauss(0.0, sd), Expectation::Quadrature).unwrap();
        assert!((v - sd * sd).abs() <= 1e-4 * sd * sd);
    }
}

#[test]
fn shifted_curve_is_symmetric_for_symmetric_errors() {
    let t: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.15).collect();
    let contaminated = ErrorDistribution::contaminated(1.0, 0.2, 0.0, 5.0).unwrap();
    for loss in [LossFunction::huber(1.345).unwrap(), LossFunction::bisquare(4.685).unwrap()] {
        let m = shifted_loss_curve(&loss, &contaminated, &t, Expectation::Quadrature).unwrap();
        for i in 0..t.len() {
            assert!((m[i] - m[t.len() - 1 - i]).abs() < 1e-7, "{loss} at {}", t[i]);
        }
    }
}

#[test]
fn condition_a_is_structural() {
    let r = check_condition_a(&michaelis_menten(), 200, 1).unwrap();
    assert!(r.passed && r.margin > 0.0);
}

#[test]
fn condition_b_examples() {
    let mm = michaelis_menten();
    let x = xs(&XDistribution::Uniform { lo: 0.0, hi: 10.0 }, 2000, 1);
    let betas = vec![vec![0.5], vec![1.0], vec![20.0]];
    let grid = alpha_grid_with_margins(&mm, 50);
    let bis = check_condition_b(&mm, &LossFunction::bisquare(4.685).unwrap(), &gauss(0.0, 0.1), &mm_truth(), &betas, &grid, &x, 2)
        .unwrap();
    assert!(bis.passed && bis.estimate("sup_mean_rho").unwrap() <= 1.0);
    let sq = check_condition_b(&mm, &LossFunction::square(), &gauss(0.0, 0.1), &mm_truth(), &betas, &grid, &x, 2).unwrap();
    assert!(sq.passed);

    let growth = exponential_growth(1).unwrap();
    let heavy = xs(&XDistribution::LogNormal { mu: 0.0, sigma: 1.5 }, 2000, 4);
    let truth = ParameterPoint::new(vec![0.5], vec![1.0, 1.0]);
    let blow = check_condition_b(
        &growth,
        &LossFunction::square(),
        &gauss(0.0, 0.1),
        &truth,
        &[vec![1.0, 1.0]],
        &alpha_grid_with_margins(&growth, 40),
        &heavy,
        5,
    )
    .unwrap();
    assert!(!blow.passed && blow.margin < 0.0);
}

#[test]
fn condition_c_lambda0_entry() {
    let t: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.3).collect();
    for loss in [LossFunction::square(), LossFunction::bisquare(2.0).unwrap()] {
        let d = gauss(0.0, 0.7);
        let r = check_condition_c(&loss, &d, &t, Expectation::Quadrature).unwrap();
        let l0 = estimate_lambda0(&loss, &d, Expectation::Quadrature).unwrap();
        assert_eq!(r.estimate("lambda0").unwrap(), l0);
        assert!(r.passed);
    }
    assert!(matches!(
        check_condition_c(&LossFunction::square(), &gauss(0.0, 1.0), &[0.0, 1.0, 2.0], Expectation::Quadrature),
        Err(Error::Usage(_))
    ));
}

#[test]
fn condition_d_examples() {
    let mm = michaelis_menten();
    let x = xs(&XDistribution::Uniform { lo: 0.0, hi: 10.0 }, 5000, 7);
    let alphas: Vec<Vec<f64>> = alpha_grid_in_box(&mm, 200).into_iter().filter(|a| (a[0] - 2.0).abs() >= 1e-3).collect();
    let betas: Vec<Vec<f64>> = (1..=20).map(|i| vec![0.25 * i as f64]).collect();
    let r = check_identifiability_d(&mm, &x, &mm_truth(), &alphas, &betas, 1e-3).unwrap();
    assert!(r.passed);
    assert_eq!(r.estimate("max_match_fraction"), Some(0.0));

    let twin = TwinMm { domain: positive_domain(2) };
    let truth = ParameterPoint::new(vec![1.0, 3.0], vec![1.0, 2.0]);
    let r = check_identifiability_d(&twin, &x, &truth, &[vec![3.0, 1.0], vec![5.0, 5.0]], &[vec![2.0, 1.0]], 1e-3).unwrap();
    assert!(!r.passed);
    assert_eq!(r.estimate("max_match_fraction"), Some(1.0));

    assert!(matches!(
        check_identifiability_d(&mm, &x, &mm_truth(), &[vec![2.0]], &betas, 1e-3),
        Err(Error::Usage(_))
    ));
}

#[test]
fn delta_examples() {
    let mm = michaelis_menten();
    let sq = LossFunction::square();
    let positive = xs(&XDistribution::Uniform { lo: 0.1, hi: 10.0 }, 10_000, 8);
    let gammas = sample_gammas(BetaCone::NonnegativeOrthant, 1, 1, 0);
    let r = estimate_delta(&mm, &sq, 0.01, &positive, &alpha_grid_in_box(&mm, 100), &gammas, ZERO_TOL).unwrap();
    assert_eq!(r.estimate("delta_hat"), Some(0.0));

    let mix = XDistribution::Discrete {
        points: vec![0.0, 1.0, 2.0, 4.0, 8.0],
        probs: vec![0.3, 0.2, 0.2, 0.15, 0.15],
    };
    let x = xs(&mix, 10_000, 9);
    let r = estimate_delta(&mm, &sq, 0.01, &x, &alpha_grid_in_box(&mm, 100), &gammas, ZERO_TOL).unwrap();
    assert!((r.estimate("delta_hat").unwrap() - 0.3).abs() < 0.02);

    let decay = exponential_decay(2).unwrap();
    let unit = vec![vec![0.0, 1.0, 0.0]];
    // e^{αx} must stay above the zero tolerance over the whole predictor range.
    let short = xs(&XDistribution::Uniform { lo: 0.1, hi: 2.5 }, 1000, 18);
    let r = estimate_delta(&decay, &sq, 0.01, &short, &[vec![-3.0, -0.5]], &unit, ZERO_TOL).unwrap();
    assert_eq!(r.estimate("delta_hat"), Some(0.0));

    assert!(estimate_delta(&decay, &sq, 0.01, &positive, &[vec![-3.0, -0.5]], &[vec![1.0, 1.0, 0.0]], ZERO_TOL).is_err());
}

#[test]
fn delta_is_antitone_in_the_tolerance() {
    let decay = exponential_decay(1).unwrap();
    let x = xs(&XDistribution::Uniform { lo: 0.0, hi: 30.0 }, 5000, 10);
    let grid = alpha_grid_with_margins(&decay, 40);
    let gammas = vec![vec![0.0, 1.0]];
    let sq = LossFunction::square();
    let loose = estimate_delta(&decay, &sq, 0.0, &x, &grid, &gammas, 1e-12).unwrap().estimate("delta_hat").unwrap();
    let tight = estimate_delta(&decay, &sq, 0.0, &x, &grid, &gammas, 1e-15).unwrap().estimate("delta_hat").unwrap();
    assert!(tight <= loose);
    assert!(loose > 0.0);
}

#[test]
fn bounded_loss_delta_sides_lie_in_unit_interval() {
    let mm = michaelis_menten();
    let bis = LossFunction::bisquare(4.685).unwrap();
    let l0 = estimate_lambda0(&bis, &gauss(0.0, 1.0), Expectation::Quadrature).unwrap();
    assert!(l0 > 0.0 && l0 < 1.0);
    let x = xs(&XDistribution::Uniform { lo: 0.1, hi: 10.0 }, 1000, 11);
    let r = estimate_delta(&mm, &bis, l0, &x, &alpha_grid_in_box(&mm, 20), &[vec![1.0]], ZERO_TOL).unwrap();
    for side in ["delta_hat", "bound"] {
        assert!((0.0..=1.0).contains(&r.estimate(side).unwrap()));
    }
    assert!((r.estimate("bound").unwrap() - (1.0 - l0)).abs() < 1e-15);
}

#[test]
fn escape_examples() {
    let mm = michaelis_menten();
    let x = xs(&XDistribution::Uniform { lo: 0.0, hi: 10.0 }, 2000, 12);
    let betas: Vec<Vec<f64>> = (1..=10).map(|i| vec![0.3 * i as f64]).collect();
    let radii: Vec<f64> = (1..=10).map(|i| 2f64.powi(i)).collect();
    let r = check_escape_f(&mm, &mm_truth(), &x, &betas, &radii, 100, 0.01, 13).unwrap();
    assert!(r.passed);
    assert!(r.details.contains("surrogate"));

    let flat = Flat { domain: positive_domain(1) };
    let r = check_escape_f(&flat, &ParameterPoint::new(vec![1.0], vec![1.0]), &x, &[vec![1.0]], &radii, 50, 0.01, 13).unwrap();
    assert!(!r.passed);

    assert!(matches!(check_escape_f(&mm, &mm_truth(), &x, &betas, &[], 10, 0.01, 0), Err(Error::Usage(_))));
    assert!(matches!(check_escape_f(&mm, &mm_truth(), &x, &betas, &[4.0, 2.0], 10, 0.01, 0), Err(Error::Usage(_))));
}

#[test]
fn boundedness_examples() {
    let wide = xs(&XDistribution::Uniform { lo: 0.0, hi: 10.0 }, 2000, 14);
    let mm = michaelis_menten();
    let r = check_boundedness_g(&mm, &wide, &alpha_grid_with_margins(&mm, 200)).unwrap();
    assert!(r.passed && r.estimate("sup_h").unwrap() <= 1.0);
    let decay = exponential_decay(2).unwrap();
    let r = check_boundedness_g(&decay, &wide, &alpha_grid_with_margins(&decay, 30)).unwrap();
    assert!(r.passed && r.estimate("sup_h").unwrap() <= 1.0);
    let lg = logistic_growth();
    assert!(check_boundedness_g(&lg, &wide, &alpha_grid_with_margins(&lg, 30)).unwrap().passed);
    let growth = exponential_growth(1).unwrap();
    assert!(!check_boundedness_g(&growth, &wide, &alpha_grid_with_margins(&growth, 30)).unwrap().passed);
}

#[test]
fn population_objective_examples() {
    let mm = michaelis_menten();
    let xd = XDistribution::Uniform { lo: 0.1, hi: 10.0 };
    let e = gauss(0.0, 0.1);
    let sq = LossFunction::square();
    let at_truth = population_objective(&mm, &sq, &e, &xd, &mm_truth(), &mm_truth(), 100_000, 15).unwrap();
    let l0 = estimate_lambda0(&sq, &e, Expectation::Quadrature).unwrap();
    assert!((at_truth.mean - l0).abs() <= 3.0 * at_truth.std_error);

    let once = |seed| population_objective(&mm, &sq, &e, &xd, &mm_truth(), &ParameterPoint::new(vec![3.0], vec![1.2]), 1, seed);
    assert_eq!(once(4).unwrap(), once(4).unwrap());
    assert_eq!(once(4).unwrap().std_error, 0.0);

    let gap = population_gap(&mm, &sq, &e, &xd, &mm_truth(), &ParameterPoint::new(vec![2.5], vec![1.0]), 10_000, 16).unwrap();
    assert!(gap.mean > 3.0 * gap.std_error);
    assert!(population_objective(&mm, &sq, &e, &xd, &mm_truth(), &mm_truth(), 0, 1).is_err());
}

#[test]
fn checks_are_deterministic() {
    let mm = michaelis_menten();
    let x = xs(&XDistribution::Uniform { lo: 0.0, hi: 10.0 }, 500, 17);
    let radii = [2.0, 4.0, 8.0];
    let run = || check_escape_f(&mm, &mm_truth(), &x, &[vec![1.0]], &radii, 30, 0.01, 5).unwrap();
    assert_eq!(run(), run());
}
