//! Randomized brute-force checks of the bounds the engine relies on.
//!
//! Every check draws its trials from a ChaCha stream keyed by the user seed,
//! a per-check salt, and the trial index, so a report depends only on
//! `(seed, trials)` and trials could run in any order.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::decoy::{single_gain_lower, single_q_upper, GainChannel, YieldModel};
use crate::error::{Error, Result};
use crate::fock::{
    alice_conditional, attenuation_operator, basis_change, build_povm, conditional_entropy_xb,
    diag, hermitian_eigenvalues, kron, measure_alice_x, partial_trace_first, real_trace,
    trace_product, Basis, CMatrix, Detection, MINUS, PLUS,
};
use crate::keyrate::{
    derive_bounds, keyrate_multiphoton, objective, pdet2_upper, Observables,
};
use crate::scalarmath::{double_click_residual, h, p01_min, theta, MismatchEta};
use crate::simulate::observables_from_state;

/// Outcome of one randomized check.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub suite: String,
    pub trials: usize,
    /// Smallest observed margin; negative beyond the tolerance is a violation.
    pub worst_slack: f64,
    pub violations: usize,
    pub seed: u64,
}

impl TrialReport {
    pub const CSV_HEADER: &'static str = "suite,trials,worst_slack,violations,seed";

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6e},{},{}",
            self.suite, self.trials, self.worst_slack, self.violations, self.seed
        )
    }
}

impl fmt::Display for TrialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {} trials={} worst_slack={:.6e} violations={} seed={}",
            self.suite,
            if self.passed() { "ok  " } else { "FAIL" },
            self.trials,
            self.worst_slack,
            self.violations,
            self.seed
        )
    }
}

/// Running minimum of slacks with a violation count.
#[derive(Debug)]
struct Tally {
    suite: String,
    seed: u64,
    tol: f64,
    trials: usize,
    worst: f64,
    violations: usize,
}

impl Tally {
    fn new(suite: impl Into<String>, seed: u64, tol: f64) -> Self {
        Tally {
            suite: suite.into(),
            seed,
            tol,
            trials: 0,
            worst: f64::INFINITY,
            violations: 0,
        }
    }

    /// Records one trial whose checks produced `slacks`.
    fn trial(&mut self, slacks: &[f64]) {
        self.trials += 1;
        let mut bad = false;
        for &s in slacks {
            // NaN counts as a violation.
            if !(s >= -self.tol) {
                bad = true;
            }
            self.worst = self.worst.min(if s.is_nan() { f64::NEG_INFINITY } else { s });
        }
        if bad {
            self.violations += 1;
        }
    }

    fn finish(self) -> TrialReport {
        TrialReport {
            suite: self.suite,
            trials: self.trials,
            worst_slack: if self.trials == 0 { 0.0 } else { self.worst },
            violations: self.violations,
            seed: self.seed,
        }
    }
}

/// Independent stream for trial `trial` of the check identified by `salt`.
pub fn trial_rng(seed: u64, salt: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial);
    rng
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `G G† / Tr(G G†)` for a `dim x rank` matrix of standard complex Gaussians.
pub fn sample_density_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, rank.max(1), |_, _| gaussian_complex(rng));
    let m = &g * g.adjoint();
    let tr = real_trace(&m);
    m / Complex64::new(tr, 0.0)
}

pub fn sample_density_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    sample_density_rank(dim, dim, rng)
}

/// Full-rank Ginibre density matrix from a seed.
pub fn sample_density(dim: usize, seed: u64) -> CMatrix {
    sample_density_with(dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random rank between 1 and `dim`, so boundary states are exercised too.
fn sample_mixed<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let rank = rng.random_range(1..=dim);
    sample_density_rank(dim, rank, rng)
}

fn pauli_z() -> CMatrix {
    diag(&[1.0, -1.0])
}

/// `(rho + (Z⊗Z) rho (Z⊗Z)) / 2` on Alice's qubit and one photon.
pub fn phase_flip_twirl(rho: &CMatrix) -> CMatrix {
    let zz = kron(&pauli_z(), &pauli_z());
    (rho + &zz * rho * &zz) * Complex64::new(0.5, 0.0)
}

/// Mean perfect-detection double-click probability of a sector state.
pub fn mean_perfect_double_click(n: usize, rho: &CMatrix) -> f64 {
    let z = build_povm(n, MismatchEta::perfect(), Basis::Z, Detection::Perfect);
    let x = build_povm(n, MismatchEta::perfect(), Basis::X, Detection::Perfect);
    0.5 * (trace_product(rho, &z.double) + trace_product(rho, &x.double))
}

/// `(p, slack)` of the double-click entropy inequality for one state.
pub fn double_click_entropy_slack(n: usize, rho: &CMatrix) -> (f64, f64) {
    let p = mean_perfect_double_click(n, rho);
    (p, double_click_residual(n as u32, p))
}

pub fn check_lemma4(n: usize, trials: usize, seed: u64) -> Result<TrialReport> {
    if !(3..=6).contains(&n) {
        return Err(Error::domain("n", n as f64, "3..=6"));
    }
    let floor = p01_min(n as u32)?;
    let mut tally = Tally::new(format!("lemma4[n={n}]"), seed, 1e-9);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x4c4d_0000 + n as u64, t as u64);
        let rho = sample_mixed(n + 1, &mut rng);
        let (p, slack) = double_click_entropy_slack(n, &rho);
        tally.trial(&[slack, p - floor]);
    }
    Ok(tally.finish())
}

/// Isometry from the `n`-photon sector into `n` qubits: the occupation
/// state with `k` photons in mode 1 maps to the uniform superposition of
/// bit strings of weight `k`.
pub fn symmetric_embedding(n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut e = CMatrix::zeros(dim, n + 1);
    let mut counts = vec![0usize; n + 1];
    for a in 0..dim {
        counts[a.count_ones() as usize] += 1;
    }
    for a in 0..dim {
        let k = a.count_ones() as usize;
        e[(a, k)] = Complex64::new(1.0 / (counts[k] as f64).sqrt(), 0.0);
    }
    e
}

/// `H^{⊗n}` with entries `(-1)^{popcount(a & b)} / 2^{n/2}`.
pub fn hadamard_power(n: usize) -> CMatrix {
    let dim = 1usize << n;
    let norm = (dim as f64).sqrt();
    CMatrix::from_fn(dim, dim, |a, b| {
        let sign = if (a & b).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign / norm, 0.0)
    })
}

fn shannon(probs: impl Iterator<Item = f64>) -> f64 {
    probs.filter(|&p| p > 1e-300).map(|p| -p * p.log2()).sum()
}

/// Entropy sum `H(Z) + H(X)` of the embedded state and its mean double-click
/// probability read off the bit strings.
pub fn eur_quantities(n: usize, rho: &CMatrix) -> (f64, f64) {
    let e = symmetric_embedding(n);
    let big = &e * rho * e.adjoint();
    let hx = hadamard_power(n);
    let rotated = &hx * &big * &hx;
    let dim = 1usize << n;
    let pz: Vec<f64> = (0..dim).map(|a| big[(a, a)].re).collect();
    let px: Vec<f64> = (0..dim).map(|a| rotated[(a, a)].re).collect();
    let mixed = |p: &[f64]| p.iter().enumerate().filter(|&(a, _)| a != 0 && a != dim - 1).map(|(_, v)| v).sum::<f64>();
    let entropy = shannon(pz.iter().copied()) + shannon(px.iter().copied());
    (entropy, 0.5 * (mixed(&pz) + mixed(&px)))
}

pub fn check_eur(n: usize, trials: usize, seed: u64) -> Result<TrialReport> {
    if !(1..=6).contains(&n) {
        return Err(Error::domain("n", n as f64, "1..=6"));
    }
    let mut tally = Tally::new(format!("eur[n={n}]"), seed, 1e-9);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x4555_0000 + n as u64, t as u64);
        let rho = sample_mixed(n + 1, &mut rng);
        let (entropy, p_bits) = eur_quantities(n, &rho);
        let p_fock = if n >= 1 { mean_perfect_double_click(n, &rho) } else { 0.0 };
        // The two double-click routes must agree.
        tally.trial(&[entropy - n as f64, 1e-10 - (p_bits - p_fock).abs()]);
    }
    Ok(tally.finish())
}

/// Single-photon quantities of a joint state on Alice's qubit and one photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonCheck {
    pub pdet1: f64,
    pub delta_z: f64,
    pub delta_x: f64,
    /// `H(X|B)` of the z-attenuated, normalized state.
    pub entropy: f64,
    pub bound: f64,
}

/// Right-hand side of the single-photon entropy bound.
pub fn single_photon_bound(delta_z: f64, delta_x: f64) -> f64 {
    let r = (delta_x * delta_x + delta_z * delta_z).sqrt().min(1.0);
    h((1.0 - r) / 2.0) + 1.0 - h((1.0 - delta_z) / 2.0)
}

pub fn single_photon_check(rho: &CMatrix, eta: MismatchEta) -> Result<SinglePhotonCheck> {
    let e = eta.value();
    let z = build_povm(1, eta, Basis::Z, Detection::Imperfect);
    let x = build_povm(1, eta, Basis::X, Detection::Imperfect);
    let bob = partial_trace_first(rho, 2);
    let p0 = trace_product(&bob, &z.click0);
    let p1 = trace_product(&bob, &z.click1);
    let pdet1 = p0 + p1;
    let t1 = p0 + p1 / e;
    let q1 = trace_product(&alice_conditional(rho, PLUS), &x.click1) / e
        + trace_product(&alice_conditional(rho, MINUS), &x.click0);
    let delta_z = (p0 - p1) / pdet1;
    let delta_x = e.sqrt() * (t1 - 2.0 * q1) / pdet1;

    let g = kron(&CMatrix::identity(2, 2), &attenuation_operator(1, eta));
    let sigma = &g * rho * &g;
    let cq = measure_alice_x(&sigma) / Complex64::new(real_trace(&sigma), 0.0);
    let entropy = conditional_entropy_xb(&cq, 2)?;
    Ok(SinglePhotonCheck {
        pdet1,
        delta_z,
        delta_x,
        entropy,
        bound: single_photon_bound(delta_z, delta_x),
    })
}

/// Joint state whose attenuated `+` block is `(1/2)[[1+dz, dx], [dx, 1-dz]]`
/// and whose `-` block is its phase flip.
pub fn extremal_single_photon_state(delta_z: f64, delta_x: f64, eta: MismatchEta) -> CMatrix {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new((1.0 + delta_z) / 2.0, 0.0),
            Complex64::new(delta_x / 2.0, 0.0),
            Complex64::new(delta_x / 2.0, 0.0),
            Complex64::new((1.0 - delta_z) / 2.0, 0.0),
        ],
    );
    let ginv = diag(&[1.0, 1.0 / eta.value().sqrt()]);
    let plus = &ginv * &m * &ginv;
    let minus = pauli_z() * &plus * pauli_z();
    let proj = |v: [f64; 2]| {
        let v = DVector::from_iterator(2, v.iter().map(|&c| Complex64::new(c, 0.0)));
        &v * v.adjoint()
    };
    let rho = kron(&proj(PLUS), &plus) + kron(&proj(MINUS), &minus);
    let tr = real_trace(&rho);
    rho / Complex64::new(tr, 0.0)
}

pub fn check_prop3(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("prop3", seed, 1e-8);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x5033, t as u64);
        let eta = MismatchEta::new(rng.random_range(0.05..=1.0))?;
        let mut rho = sample_mixed(4, &mut rng);
        if t % 2 == 1 {
            rho = phase_flip_twirl(&rho);
        }
        let c = single_photon_check(&rho, eta)?;
        let r2 = c.delta_x * c.delta_x + c.delta_z * c.delta_z;
        tally.trial(&[c.bound - c.entropy, 1.0 - r2]);
    }
    // Equality on the extremal family.
    let eta = MismatchEta::new(0.7)?;
    for i in 0..9 {
        for j in 0..9 {
            let dz = -0.8 + 0.2 * i as f64;
            let dx = (-1.0 + 0.25 * j as f64) * (1.0 - dz * dz).sqrt();
            let c = single_photon_check(&extremal_single_photon_state(dz, dx, eta), eta)?;
            tally.trial(&[
                -(c.bound - c.entropy).abs(),
                -(c.delta_z - dz).abs(),
                -(c.delta_x - dx).abs(),
            ]);
        }
    }
    Ok(tally.finish())
}

/// Which square-root term the two-photon check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootForm {
    /// `sqrt(2 p01 / (eta t2))`, as the trace-distance argument gives.
    AsDerived,
    /// `sqrt(p01 / (eta t2))`.
    AsStated,
}

/// Two-photon observables of `(|+><+| ⊗ rho_plus + |-><-| ⊗ rho_minus) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonStats {
    pub t2: f64,
    pub q2: f64,
    pub p1: f64,
    pub p01: f64,
    pub pdet2: f64,
}

pub fn two_photon_stats(rho_plus: &CMatrix, rho_minus: &CMatrix, eta: MismatchEta) -> TwoPhotonStats {
    let z = build_povm(2, eta, Basis::Z, Detection::Imperfect);
    let x = build_povm(2, eta, Basis::X, Detection::Imperfect);
    let half = Complex64::new(0.5, 0.0);
    let bob = (rho_plus + rho_minus) * half;
    let q2 = 0.5 * trace_product(rho_plus, &(&x.click1 + &x.double * half)) / eta.value()
        + 0.5 * trace_product(rho_minus, &(&x.click0 + &x.double * half));
    TwoPhotonStats {
        t2: real_trace(&bob),
        q2,
        p1: trace_product(&bob, &z.click1),
        p01: 0.5 * (trace_product(&bob, &z.double) + trace_product(&bob, &x.double)),
        pdet2: real_trace(&bob) - trace_product(&bob, &z.empty),
    }
}

/// Slacks of the two per-`t2` inequalities and the two final forms in `pdet2`.
pub fn two_photon_slacks(s: &TwoPhotonStats, eta: MismatchEta, form: RootForm) -> [f64; 4] {
    let th = theta(eta, 2);
    let e = eta.value();
    let root = match form {
        RootForm::AsDerived => (2.0 * s.p01 / (e * s.t2)).sqrt(),
        RootForm::AsStated => (s.p01 / (e * s.t2)).sqrt(),
    };
    let a = (2.0 * s.p01 * s.pdet2 / (e * th)).sqrt();
    [
        s.q2 / s.t2 - ((1.0 + th) / 4.0 - root),
        (th / 2.0 + root) - s.p1 / s.t2,
        s.q2 - ((1.0 + th) * s.pdet2 / 4.0 - a),
        (s.pdet2 / 2.0 + a) - s.p1,
    ]
}

pub fn check_prop4(trials: usize, seed: u64, form: RootForm) -> Result<TrialReport> {
    let name = match form {
        RootForm::AsDerived => "prop4",
        RootForm::AsStated => "prop4[stated]",
    };
    let mut tally = Tally::new(name, seed, 1e-9);
    for (k, e) in [0.5, 0.9].into_iter().enumerate() {
        let eta = MismatchEta::new(e)?;
        for t in 0..trials {
            let mut rng = trial_rng(seed, 0x5034_0000 + k as u64, t as u64);
            // The two conditional blocks may carry different weights.
            let w_plus: f64 = rng.random_range(0.05..=1.0);
            let w_minus: f64 = rng.random_range(0.05..=1.0);
            let scale = 2.0 / (w_plus + w_minus);
            let rp = sample_mixed(3, &mut rng) * Complex64::new(w_plus * scale, 0.0);
            let rm = sample_mixed(3, &mut rng) * Complex64::new(w_minus * scale, 0.0);
            let s = two_photon_stats(&rp, &rm, eta);
            if s.t2 <= 1e-12 {
                continue;
            }
            tally.trial(&two_photon_slacks(&s, eta, form));
        }
    }
    Ok(tally.finish())
}

/// `q2 / t2` for `I_A/2 ⊗ |Phi+><Phi+|`.
pub fn bell_state_ratio(eta: MismatchEta) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = DVector::from_vec(vec![
        Complex64::new(s, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
    ]);
    let bell = &phi * phi.adjoint();
    let stats = two_photon_stats(&bell, &bell, eta);
    stats.q2 / stats.t2
}

/// A random convex quadratic `g` on `[x0, x1]` with `0 <= g(x)/x <= 1/2`.
#[derive(Debug, Clone, Copy)]
struct Quadratic {
    a: f64,
    b: f64,
    c: f64,
    x0: f64,
    x1: f64,
}

impl Quadratic {
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let x0: f64 = rng.random_range(0.01..1.0);
        let x1 = x0 + rng.random_range(0.01..2.0);
        let mut a: f64 = rng.random_range(0.0..1.0);
        let mut c: f64 = rng.random_range(-0.2..0.2);
        // g(x)/x = a x + b + c/x; bound the spread of a x + c/x.
        let range = |a: f64, c: f64| {
            let v = |x: f64| a * x + c / x;
            let mut lo = v(x0).min(v(x1));
            let hi = v(x0).max(v(x1));
            if a > 0.0 && c > 0.0 {
                let xs = (c / a).sqrt();
                if xs > x0 && xs < x1 {
                    lo = lo.min(v(xs));
                }
            }
            (lo, hi)
        };
        let (lo, hi) = range(a, c);
        if hi - lo > 0.5 {
            let shrink = 0.5 / (hi - lo) * rng.random_range(0.0..1.0);
            a *= shrink;
            c *= shrink;
        }
        let (lo, hi) = range(a, c);
        let b = rng.random_range(-lo..=(0.5 - hi).max(-lo));
        Quadratic { a, b, c, x0, x1 }
    }

    fn g(&self, x: f64) -> f64 {
        self.a * x * x + self.b * x + self.c
    }

    fn f(&self, x: f64) -> f64 {
        x * h(0.5 - self.g(x) / x)
    }
}

/// A random observable set from a depolarized line with extra double
/// clicks and perturbed single clicks.
pub fn random_observables<R: Rng + ?Sized>(rng: &mut R) -> Result<Observables> {
    let eta: f64 = rng.random_range(0.3..=1.0);
    let t: f64 = rng.random_range(0.05..=1.0);
    let qber: f64 = rng.random_range(0.0..0.1);
    let p_det = t * (1.0 + eta) / 2.0;
    let p_1 = (t * eta / 2.0 * rng.random_range(0.9..1.1)).min(p_det);
    let p_01 = p_det * rng.random_range(0.0..1e-3);
    Observables::new(MismatchEta::new(eta)?, p_det, p_1, qber * p_det, p_01, qber)
}

/// Midpoint convexity of the engine objective on random feasible inputs.
pub fn check_objective_convexity(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("objective-convexity", seed, 1e-10);
    let mut t = 0u64;
    while tally.trials < trials {
        let mut rng = trial_rng(seed, 0x4f42, t);
        t += 1;
        let obs = random_observables(&mut rng)?;
        if !keyrate_multiphoton(&obs).status.is_feasible() {
            continue;
        }
        let upper = pdet2_upper(&obs);
        let slacks: Vec<f64> = (0..50)
            .map(|_| {
                let a = rng.random_range(0.0..=upper);
                let b = rng.random_range(0.0..=upper);
                0.5 * (objective(&obs, a) + objective(&obs, b)) - objective(&obs, 0.5 * (a + b))
            })
            .collect();
        tally.trial(&slacks);
    }
    Ok(tally.finish())
}

pub fn check_concavity(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("concavity", seed, 1e-10);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x434f, t as u64);
        let g = Quadratic::sample(&mut rng);
        let slacks: Vec<f64> = (0..50)
            .map(|_| {
                let a = rng.random_range(g.x0..=g.x1);
                let b = rng.random_range(g.x0..=g.x1);
                g.f(0.5 * (a + b)) - 0.5 * (g.f(a) + g.f(b))
            })
            .collect();
        tally.trial(&slacks);
    }
    let objective = check_objective_convexity(trials, seed)?;
    let mut report = tally.finish();
    report.trials += objective.trials;
    report.violations += objective.violations;
    report.worst_slack = report.worst_slack.min(objective.worst_slack);
    Ok(report)
}

/// `p01_min(n+1) - p01_min(n)` for `n = 3..max_n`.
pub fn check_p01min_monotone(max_n: u32, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("p01min-monotone", seed, 0.0);
    for n in 3..max_n {
        tally.trial(&[p01_min(n + 1)? - p01_min(n)?]);
    }
    Ok(tally.finish())
}

/// `(P̃01^z + P̃01^x) / 2`; its smallest eigenvalue is the exact minimum
/// of the mean double-click probability over sector states.
pub fn mean_double_click_operator(n: usize) -> CMatrix {
    let z = build_povm(n, MismatchEta::perfect(), Basis::Z, Detection::Perfect);
    let x = build_povm(n, MismatchEta::perfect(), Basis::X, Detection::Perfect);
    (z.double + x.double) * Complex64::new(0.5, 0.0)
}

/// Random-restart local search for the smallest mean double-click
/// probability over pure `n`-photon states. The first restart is `|n,0>_z`.
pub fn min_double_click(n: usize, iterations: usize, seed: u64) -> Result<f64> {
    if !(3..=5).contains(&n) {
        return Err(Error::domain("n", n as f64, "3..=5"));
    }
    let m = mean_double_click_operator(n);
    let value = |v: &DVector<Complex64>| {
        let num = (v.adjoint() * &m * v)[(0, 0)].re;
        num / v.norm_squared()
    };
    let restarts = 8;
    let mut best = f64::INFINITY;
    for r in 0..restarts {
        let mut rng = trial_rng(seed, 0x4d44_0000 + n as u64, r);
        let mut v = if r == 0 {
            let mut e = DVector::zeros(n + 1);
            e[0] = Complex64::new(1.0, 0.0);
            e
        } else {
            DVector::from_fn(n + 1, |_, _| gaussian_complex(&mut rng))
        };
        let mut fv = value(&v);
        let mut step = 0.5;
        for _ in 0..iterations {
            let trial = &v + DVector::from_fn(n + 1, |_, _| gaussian_complex(&mut rng) * step);
            let ft = value(&trial);
            if ft < fv {
                let norm = trial.norm();
                v = trial / Complex64::new(norm, 0.0);
                fv = ft;
            } else {
                step *= 0.995;
            }
        }
        best = best.min(fv);
    }
    Ok(best)
}

/// Exact minimum of the mean double-click probability.
pub fn min_double_click_exact(n: usize) -> f64 {
    hermitian_eigenvalues(&mean_double_click_operator(n))
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Sector infrastructure: completeness, basis change, and the double-click
/// sandwich on random states.
pub fn check_fock(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("fock", seed, 1e-12);
    let max_abs = |m: &CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for n in 0..=6usize {
        let id = CMatrix::identity(n + 1, n + 1);
        let u = basis_change(n);
        tally.trial(&[-max_abs(&(&u * u.adjoint() - &id)), -max_abs(&(&u * &u - &id))]);
        for e in [0.3, 0.7, 1.0] {
            let eta = MismatchEta::new(e)?;
            for basis in [Basis::Z, Basis::X] {
                for det in [Detection::Perfect, Detection::Imperfect] {
                    let p = build_povm(n, eta, basis, det);
                    let sum = &p.empty + &p.click0 + &p.click1 + &p.double;
                    let min_eig = p
                        .elements()
                        .iter()
                        .flat_map(|m| hermitian_eigenvalues(m))
                        .fold(f64::INFINITY, f64::min);
                    tally.trial(&[-max_abs(&(sum - &id)), min_eig]);
                }
            }
        }
    }
    for n in 1..=6usize {
        for t in 0..trials {
            let mut rng = trial_rng(seed, 0x464b_0000 + n as u64, t as u64);
            let eta = MismatchEta::new(rng.random_range(0.05..=1.0))?;
            let rho = sample_mixed(n + 1, &mut rng);
            let mut slacks = Vec::with_capacity(6);
            for basis in [Basis::Z, Basis::X] {
                let perfect = trace_product(&rho, &build_povm(n, eta, basis, Detection::Perfect).double);
                let imperfect = build_povm(n, eta, basis, Detection::Imperfect);
                let real = trace_product(&rho, &imperfect.double);
                slacks.push(perfect - real);
                slacks.push(real - eta.value() * perfect);
                let total: f64 = imperfect.probabilities(&rho).iter().sum();
                slacks.push(-(total - real_trace(&rho)).abs());
            }
            tally.trial(&slacks);
        }
    }
    Ok(tally.finish())
}

/// The engine's entropy bound against the exact `H(X|B)` of random
/// single-photon states: `f_min <= p_det (1 - H(X|B))`.
pub fn check_engine_single_photon(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("engine-single-photon", seed, 1e-8);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x454e, t as u64);
        let eta = MismatchEta::new(rng.random_range(0.3..=1.0))?;
        let rho = sample_mixed(4, &mut rng);
        let state = crate::fock::JointState::new().with_block(1, rho.clone())?;
        let (obs, _) = observables_from_state(&state, eta)?;
        let exact = single_photon_check(&rho, eta)?;
        // Zero error-correction cost isolates the entropy term.
        let obs = Observables::new(eta, obs.p_det(), obs.p_1(), obs.q(), obs.p_01(), 0.0)?;
        let result = keyrate_multiphoton(&obs);
        let at_zero = derive_bounds(&obs, 0.0)?;
        // With no double clicks the bounds at pdet2 = 0 are exact.
        let mut slacks = vec![-(at_zero.delta_x_l.unwrap_or(f64::NAN) - exact.delta_x).abs()];
        if result.status.is_feasible() {
            slacks.push(obs.p_det() * (1.0 - exact.entropy) - result.k_bound);
        }
        tally.trial(&slacks);
    }
    Ok(tally.finish())
}

/// Decoy estimates against the forward model that generated the gains.
pub fn check_decoy_bracketing(trials: usize, seed: u64) -> Result<TrialReport> {
    let mut tally = Tally::new("decoy-bracketing", seed, 0.0);
    for t in 0..trials {
        let mut rng = trial_rng(seed, 0x4443, t as u64);
        let eta = MismatchEta::new(rng.random_range(0.3..=1.0))?;
        let model = random_yield_model(&mut rng, eta);
        let mu: f64 = rng.random_range(0.3..0.9);
        let nu1 = mu * rng.random_range(0.05..0.45);
        let nu2 = nu1 * rng.random_range(0.0..0.9) * if rng.random_bool(0.3) { 0.0 } else { 1.0 };
        let d = model.inputs(mu, nu1, nu2, eta)?;
        let tiny = 1e-15;
        tally.trial(&[
            model.true_single_gain(mu, GainChannel::Detect) - single_gain_lower(&d, GainChannel::Detect)? + tiny,
            model.true_single_gain(mu, GainChannel::Click1) - single_gain_lower(&d, GainChannel::Click1)? + tiny,
            single_q_upper(&d)? - model.true_single_q(mu, eta) + tiny,
            model.true_y0() - crate::decoy::y0_lower(&d)? + tiny,
        ]);
    }
    Ok(tally.finish())
}

/// Random photon-number-resolved yields: arbitrary per-`n` detection, split
/// and error probabilities, with a vacuum yield up to `1e-3`.
pub fn random_yield_model<R: Rng + ?Sized>(rng: &mut R, eta: MismatchEta) -> YieldModel {
    let max_n = 25;
    let transmit: f64 = rng.random_range(0.01..1.0);
    let mut m = YieldModel {
        detect: Vec::new(),
        click1: Vec::new(),
        double: Vec::new(),
        err0: Vec::new(),
        err1: Vec::new(),
    };
    for n in 0..=max_n {
        let y = if n == 0 {
            rng.random_range(0.0..=1e-3)
        } else {
            (1.0 - (1.0 - transmit).powi(n)) * rng.random_range(0.5..=1.0)
        };
        let split: f64 = rng.random_range(0.0..=1.0);
        let dbl: f64 = if n >= 2 { rng.random_range(0.0..0.3) } else { rng.random_range(0.0..1e-3) };
        let click1 = y * (1.0 - dbl) * split * eta.value().min(1.0);
        let err: f64 = rng.random_range(0.0..0.15);
        m.detect.push(y);
        m.click1.push(click1.min(y));
        m.double.push(y * dbl);
        m.err0.push(y * err * rng.random_range(0.0..=1.0));
        m.err1.push(y * err * rng.random_range(0.0..=1.0) * eta.value());
    }
    m
}

pub const SUITES: [&str; 8] = [
    "all",
    "lemma4",
    "eur",
    "prop3",
    "prop4",
    "concavity",
    "p01min-monotone",
    "fock",
];

/// Runs a named suite; `all` runs every suite in the order of [`SUITES`].
pub fn run_suite(name: &str, trials: usize, seed: u64) -> Result<Vec<TrialReport>> {
    let mut out = Vec::new();
    let wanted = |s: &str| name == "all" || name == s;
    if !SUITES.contains(&name) {
        return Err(Error::Invalid(format!(
            "unknown suite '{name}' (expected one of {})",
            SUITES.join(", ")
        )));
    }
    if wanted("lemma4") {
        for n in 3..=5 {
            out.push(check_lemma4(n, trials, seed)?);
        }
    }
    if wanted("eur") {
        for n in 1..=6 {
            out.push(check_eur(n, trials, seed)?);
        }
    }
    if wanted("prop3") {
        out.push(check_prop3(trials, seed)?);
    }
    if wanted("prop4") {
        out.push(check_prop4(trials, seed, RootForm::AsDerived)?);
    }
    if wanted("concavity") {
        out.push(check_concavity(trials, seed)?);
    }
    if wanted("p01min-monotone") {
        out.push(check_p01min_monotone(12, seed)?);
    }
    if wanted("fock") {
        out.push(check_fock(trials, seed)?);
    }
    Ok(out)
}
