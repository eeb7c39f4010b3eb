//! Key-rate bounds from observed detection statistics.
//!
//! The multiphoton engine treats the two-photon detection probability
//! `pdet2` as a free parameter, derives bounds on the single-photon
//! quantities from it, and minimizes the resulting entropy bound over the
//! feasible segment of `pdet2`.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalarmath::{
    bisect_last_feasible, golden_section_min, h, p01_min, theta, MismatchEta, Probability,
};

/// Width of the final golden-section bracket.
pub const MINIMIZER_WIDTH: f64 = 1e-10;
/// Absolute tolerance of the `pdet2` upper endpoint.
pub const UPPER_TOL: f64 = 1e-12;
/// Slack for `delta_x^2 + delta_z^2 <= 1`.
pub const DELTA_TOL: f64 = 1e-10;

fn p01_min3() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| p01_min(3).expect("n = 3 is in range"))
}

/// The measured rates fed to the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    eta: MismatchEta,
    p_det: f64,
    p_1: f64,
    q: f64,
    p_01: f64,
    q_z: f64,
}

impl Observables {
    /// `q` is the weighted x-basis error rate and may exceed 1/2 of `p_det`.
    ///
    /// `p_01` is not required to stay below `p_det`: with strong mismatch a
    /// state can double-click in x more often than it is detected in z.
    pub fn new(eta: MismatchEta, p_det: f64, p_1: f64, q: f64, p_01: f64, q_z: f64) -> Result<Self> {
        let p_det = Probability::new(p_det).map_err(|_| Error::domain("p_det", p_det, "[0, 1]"))?.value();
        let p_1 = Probability::new(p_1).map_err(|_| Error::domain("p_1", p_1, "[0, 1]"))?.value();
        if p_1 > p_det + crate::scalarmath::PROB_TOL {
            return Err(Error::Invalid(format!("p_1 = {p_1} exceeds p_det = {p_det}")));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::domain("q", q, "[0, inf)"));
        }
        let p_01 = Probability::new(p_01).map_err(|_| Error::domain("p_01", p_01, "[0, 1]"))?.value();
        let q_z = Probability::new(q_z).map_err(|_| Error::domain("q_z", q_z, "[0, 1]"))?.value();
        Ok(Observables {
            eta,
            p_det,
            p_1: p_1.min(p_det),
            q,
            p_01,
            q_z,
        })
    }

    pub fn eta(&self) -> MismatchEta {
        self.eta
    }
    pub fn p_det(&self) -> f64 {
        self.p_det
    }
    pub fn p_1(&self) -> f64 {
        self.p_1
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn p_01(&self) -> f64 {
        self.p_01
    }
    pub fn q_z(&self) -> f64 {
        self.q_z
    }

    /// Observables after a lossy line of transmittance `t`. Every rate is a
    /// per-pulse probability, so all of them scale and `q_z` is unchanged.
    pub fn with_transmittance(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain("transmittance", t, "(0, 1]"));
        }
        Observables::new(
            self.eta,
            self.p_det * t,
            self.p_1 * t,
            self.q * t,
            self.p_01 * t,
            self.q_z,
        )
    }

    /// Replaces the double-click rate.
    pub fn with_p01(&self, p_01: f64) -> Result<Self> {
        Observables::new(self.eta, self.p_det, self.p_1, self.q, p_01, self.q_z)
    }
}

/// Which sign joins the lost single-photon clicks to `t1_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum T1Sign {
    /// `t1_l = pdet1_l + (1/eta - 1) p1_1_l`
    #[default]
    Plus,
    /// `t1_l = pdet1_l - (1/eta - 1) p1_1_l`, for literal comparison only.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    pub t1_sign: T1Sign,
}

/// Every intermediate bound at one value of `pdet2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedBounds {
    pub pdet2: f64,
    pub pdet3plus_u: f64,
    pub pdet1_l: f64,
    pub p1_2_u: f64,
    pub p1_1_l: f64,
    pub t1_l: f64,
    pub q2_l: f64,
    pub q1_u: f64,
    /// `None` when `pdet1_l <= 0`: no single-photon detections remain.
    pub delta_x_l: Option<f64>,
}

/// Engine pieces that do not depend on `pdet2`.
#[derive(Debug, Clone, Copy)]
struct Setup {
    obs: Observables,
    sqrt_eta: f64,
    /// `1/eta - 1`, negated for [`T1Sign::Minus`].
    loss: f64,
    theta2: f64,
    pdet3plus_u: f64,
    /// `sqrt(2 p01 / (eta theta_2))`; the correction terms are `a * sqrt(pdet2)`.
    a: f64,
}

impl Setup {
    fn new(obs: &Observables, opts: EngineOptions) -> Self {
        let eta = obs.eta.value();
        let theta2 = theta(obs.eta, 2);
        let loss = 1.0 / eta - 1.0;
        Setup {
            obs: *obs,
            sqrt_eta: eta.sqrt(),
            loss: match opts.t1_sign {
                T1Sign::Plus => loss,
                T1Sign::Minus => -loss,
            },
            theta2,
            pdet3plus_u: obs.p_01 / (eta * p01_min3()),
            a: (2.0 * obs.p_01 / (eta * theta2)).sqrt(),
        }
    }

    /// Largest admissible `pdet2`.
    fn cap(&self) -> f64 {
        self.obs.p_det - self.pdet3plus_u
    }

    /// `q2_l` before the upper clamp at `q`.
    fn q2_raw(&self, pdet2: f64) -> f64 {
        (1.0 + self.theta2) * pdet2 / 4.0 - self.a * pdet2.sqrt()
    }

    fn bounds(&self, pdet2: f64) -> DerivedBounds {
        let o = &self.obs;
        let root = self.a * pdet2.sqrt();
        let pdet1_l = o.p_det - pdet2 - self.pdet3plus_u;
        let p1_2_u = (pdet2 / 2.0 + root).min(pdet2);
        let p1_1_l = o.p_1 - p1_2_u - self.pdet3plus_u;
        let t1_l = pdet1_l + self.loss * p1_1_l;
        let q2_l = self.q2_raw(pdet2).clamp(0.0, o.q);
        let q1_u = o.q - q2_l;
        let delta_x_l = (pdet1_l > 0.0).then(|| self.sqrt_eta * (t1_l - 2.0 * q1_u) / pdet1_l);
        DerivedBounds {
            pdet2,
            pdet3plus_u: self.pdet3plus_u,
            pdet1_l,
            p1_2_u,
            p1_1_l,
            t1_l,
            q2_l,
            q1_u,
            delta_x_l,
        }
    }

    /// `t1_l - 2 q1_u` with `q2_l` clamped only from below. Convex in `pdet2`.
    fn margin(&self, pdet2: f64) -> f64 {
        let b = self.bounds(pdet2);
        let q2 = self.q2_raw(pdet2).max(0.0);
        b.t1_l - 2.0 * (self.obs.q - q2)
    }

    /// Convex feasibility residual: nonpositive exactly on the segment where
    /// `delta_x_l <= 1` and `q2_l` does not exceed the observed `q`.
    fn residual(&self, pdet2: f64) -> f64 {
        let pdet1 = self.obs.p_det - pdet2 - self.pdet3plus_u;
        let r = self.sqrt_eta * self.margin(pdet2) - pdet1;
        r.max(self.q2_raw(pdet2) - self.obs.q)
    }

    fn objective(&self, pdet2: f64) -> f64 {
        let b = self.bounds(pdet2);
        match b.delta_x_l {
            Some(d) => b.pdet1_l * (1.0 - h((1.0 - d.min(1.0)) / 2.0)),
            None => 0.0,
        }
    }

    fn upper(&self) -> f64 {
        let cap = self.cap();
        if cap <= 0.0 || self.residual(0.0) > 0.0 {
            return 0.0;
        }
        if self.residual(cap) <= 0.0 {
            return cap;
        }
        bisect_last_feasible(|x| self.residual(x), 0.0, cap, UPPER_TOL)
    }
}

/// Bounds at `pdet2` with the default options.
pub fn derive_bounds(obs: &Observables, pdet2: f64) -> Result<DerivedBounds> {
    derive_bounds_with(obs, pdet2, EngineOptions::default())
}

pub fn derive_bounds_with(obs: &Observables, pdet2: f64, opts: EngineOptions) -> Result<DerivedBounds> {
    if !(pdet2 >= 0.0 && pdet2 <= obs.p_det) {
        return Err(Error::domain("pdet2", pdet2, "[0, p_det]"));
    }
    Ok(Setup::new(obs, opts).bounds(pdet2))
}

/// Upper end of the feasible `pdet2` segment, by bisection.
pub fn pdet2_upper(obs: &Observables) -> f64 {
    Setup::new(obs, EngineOptions::default()).upper()
}

pub fn pdet2_upper_with(obs: &Observables, opts: EngineOptions) -> f64 {
    Setup::new(obs, opts).upper()
}

/// The same endpoint solved piecewise in `s = sqrt(pdet2)`.
///
/// In `s` the residual is quadratic on three pieces: the `p1_2_u` clamp
/// active (`s <= 2A`), `q2_l` clamped at zero (`s <= 4A/(1 + theta_2)`),
/// and neither. The `q2_l <= q` condition has its own closed-form root.
pub fn pdet2_upper_closed_form(obs: &Observables) -> f64 {
    let st = Setup::new(obs, EngineOptions::default());
    let cap = st.cap();
    if cap <= 0.0 {
        return 0.0;
    }
    let k = st.sqrt_eta;
    let c = st.loss;
    let a = st.a;
    let base = cap;
    let r0 = k * (base + c * (obs.p_1 - st.pdet3plus_u) - 2.0 * obs.q) - base;
    if r0 > 0.0 {
        return 0.0;
    }
    let s_cap = cap.sqrt();
    let edges = [0.0, 2.0 * a, 4.0 * a / (1.0 + st.theta2), f64::INFINITY];
    // Coefficients (s^2, s) of each piece; the constant is r0 throughout.
    let pieces = [
        (1.0 - k - k * c, 0.0),
        (1.0 - k - k * c / 2.0, -k * c * a),
        (
            1.0 - k - k * c / 2.0 + k * (1.0 + st.theta2) / 2.0,
            -(k * c * a + 2.0 * k * a),
        ),
    ];
    let mut s_star = s_cap;
    for (i, &(qa, qb)) in pieces.iter().enumerate() {
        let lo = edges[i].min(s_cap);
        let hi = edges[i + 1].min(s_cap);
        if hi <= lo {
            continue;
        }
        let r = |s: f64| qa * s * s + qb * s + r0;
        if r(hi) <= 0.0 {
            continue;
        }
        s_star = crossing(qa, qb, r0, lo, hi);
        break;
    }
    let half = (1.0 + st.theta2) / 2.0;
    let s_q = (a + (a * a + 2.0 * half * obs.q).sqrt()) / half;
    (s_star * s_star).min(s_q * s_q).min(cap)
}

/// Where `qa s^2 + qb s + c0` turns positive inside `[lo, hi]`, given it is
/// nonpositive at `lo` and positive at `hi`.
fn crossing(qa: f64, qb: f64, c0: f64, lo: f64, hi: f64) -> f64 {
    let in_range = |s: f64| s >= lo - 1e-15 && s <= hi + 1e-15;
    if qa.abs() < 1e-300 {
        return (-c0 / qb).clamp(lo, hi);
    }
    let disc = (qb * qb - 4.0 * qa * c0).max(0.0).sqrt();
    // Stable pair of roots.
    let t = -0.5 * (qb + qb.signum() * disc);
    let mut roots: Vec<f64> = [t / qa, if t != 0.0 { c0 / t } else { 0.0 }]
        .into_iter()
        .filter(|&s| in_range(s))
        .collect();
    roots.sort_by(f64::total_cmp);
    let pick = if qa > 0.0 { roots.last() } else { roots.first() };
    pick.copied().unwrap_or(hi).clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abort {
    /// The single-photon error bound reaches half of `t1_l` somewhere.
    ErrorRate,
    /// No room is left for single-photon detections.
    NoSinglePhoton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Feasible,
    Aborted(Abort),
}

impl Status {
    pub fn is_feasible(self) -> bool {
        self == Status::Feasible
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Aborted(Abort::ErrorRate) => "abort_error_rate",
            Status::Aborted(Abort::NoSinglePhoton) => "abort_no_single_photon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    /// Zero unless the status is feasible; clamped below at zero.
    pub k_bound: f64,
    pub argmin_pdet2: f64,
    pub pdet2_upper: f64,
    pub status: Status,
}

impl KeyRateResult {
    fn aborted(abort: Abort, upper: f64) -> Self {
        KeyRateResult {
            k_bound: 0.0,
            argmin_pdet2: 0.0,
            pdet2_upper: upper,
            status: Status::Aborted(abort),
        }
    }
}

/// `pdet1_l [1 - h((1 - delta_x_l)/2)]`, the quantity minimized over `pdet2`.
pub fn objective(obs: &Observables, pdet2: f64) -> f64 {
    Setup::new(obs, EngineOptions::default()).objective(pdet2)
}

/// Minimizer and minimum of [`objective`] on `[0, pdet2_upper]`.
pub fn minimize_objective(obs: &Observables) -> (f64, f64) {
    let st = Setup::new(obs, EngineOptions::default());
    golden_section_min(|x| st.objective(x), 0.0, st.upper(), MINIMIZER_WIDTH)
}

pub fn keyrate_multiphoton(obs: &Observables) -> KeyRateResult {
    keyrate_multiphoton_with(obs, EngineOptions::default())
}

pub fn keyrate_multiphoton_with(obs: &Observables, opts: EngineOptions) -> KeyRateResult {
    let st = Setup::new(obs, opts);
    if st.cap() <= 0.0 {
        return KeyRateResult::aborted(Abort::NoSinglePhoton, 0.0);
    }
    let upper = st.upper();
    // The margin is convex, so its minimum over the segment decides.
    let (_, worst_margin) = golden_section_min(|x| st.margin(x), 0.0, upper, MINIMIZER_WIDTH);
    if worst_margin <= 0.0 {
        return KeyRateResult::aborted(Abort::ErrorRate, upper);
    }
    let (argmin, fmin) = golden_section_min(|x| st.objective(x), 0.0, upper, MINIMIZER_WIDTH);
    KeyRateResult {
        k_bound: (fmin - obs.p_det * h(obs.q_z)).max(0.0),
        argmin_pdet2: argmin,
        pdet2_upper: upper,
        status: Status::Feasible,
    }
}

/// Bias parameters of the attenuated single-photon state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPair {
    delta_z: f64,
    delta_x: f64,
}

impl DeltaPair {
    pub fn new(delta_z: f64, delta_x: f64) -> Result<Self> {
        if !(delta_z.abs() <= 1.0 + DELTA_TOL) {
            return Err(Error::domain("delta_z", delta_z, "[-1, 1]"));
        }
        if !(delta_x.abs() <= 1.0 + DELTA_TOL) {
            return Err(Error::domain("delta_x", delta_x, "[-1, 1]"));
        }
        let r2 = delta_x * delta_x + delta_z * delta_z;
        if r2 > 1.0 + DELTA_TOL {
            return Err(Error::domain("delta_x^2 + delta_z^2", r2, "[0, 1]"));
        }
        Ok(DeltaPair { delta_z, delta_x })
    }

    pub fn delta_z(&self) -> f64 {
        self.delta_z
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn radius(&self) -> f64 {
        (self.delta_x * self.delta_x + self.delta_z * self.delta_z).sqrt().min(1.0)
    }
}

/// Single-photon rate with both biases, without an error-correction term.
pub fn keyrate_single_tight(p_det: Probability, deltas: DeltaPair) -> f64 {
    p_det.value() * (h((1.0 - deltas.delta_z) / 2.0) - h((1.0 - deltas.radius()) / 2.0))
}

pub fn keyrate_single_simple(p_det: Probability, delta_x: f64) -> Result<f64> {
    if !(delta_x.abs() <= 1.0) {
        return Err(Error::domain("delta_x", delta_x, "[-1, 1]"));
    }
    Ok(p_det.value() * (1.0 - h((1.0 - delta_x) / 2.0)))
}

/// `p_det (1 - 2 h(Q))` for matched detectors, clamped at zero.
pub fn keyrate_no_mismatch(p_det: Probability, qber: Probability) -> f64 {
    (p_det.value() * (1.0 - 2.0 * h(qber.value()))).max(0.0)
}

pub fn deltas_from_single_obs(pdet1: f64, p1_1: f64, t1: f64, q1: f64, eta: MismatchEta) -> Result<DeltaPair> {
    if !(pdet1 > 0.0) {
        return Err(Error::domain("pdet1", pdet1, "(0, 1]"));
    }
    if p1_1 > pdet1 * (1.0 + DELTA_TOL) {
        return Err(Error::Invalid(format!("p1_1 = {p1_1} exceeds pdet1 = {pdet1}")));
    }
    let delta_z = (pdet1 - 2.0 * p1_1) / pdet1;
    let delta_x = eta.value().sqrt() * (t1 - 2.0 * q1) / pdet1;
    DeltaPair::new(delta_z, delta_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn obs(eta: f64, p_det: f64, p_1: f64, q: f64, p_01: f64, q_z: f64) -> Observables {
        Observables::new(MismatchEta::new(eta).unwrap(), p_det, p_1, q, p_01, q_z).unwrap()
    }

    fn reference() -> Observables {
        obs(1.0, 1.0, 0.5, 0.05, 1e-5, 0.05)
    }

    fn prob(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    #[test]
    fn bounds_at_zero_pdet2() {
        let b = derive_bounds(&reference(), 0.0).unwrap();
        assert_eq!(b.p1_2_u, 0.0);
        assert_eq!(b.q2_l, 0.0);
        assert_eq!(b.q1_u, 0.05);
        let d = 1e-5 / p01_min(3).unwrap();
        assert_abs_diff_eq!(b.pdet1_l, 1.0 - d, epsilon = 1e-15);
        assert_abs_diff_eq!(b.pdet1_l, 0.999864, epsilon = 2e-6);
        // delta = (pdet1 - 0.1) / pdet1 at eta = 1.
        assert_abs_diff_eq!(b.delta_x_l.unwrap(), 1.0 - 0.1 / (1.0 - d), epsilon = 1e-14);
        assert_abs_diff_eq!(b.delta_x_l.unwrap(), 0.9, epsilon = 2e-5);
    }

    #[test]
    fn bounds_without_double_clicks() {
        let o = obs(1.0, 0.8, 0.4, 0.1, 0.0, 0.1);
        let b = derive_bounds(&o, 0.0).unwrap();
        assert_eq!(b.pdet3plus_u, 0.0);
        assert_abs_diff_eq!(b.delta_x_l.unwrap(), (0.8 - 0.2) / 0.8, epsilon = 1e-15);
    }

    #[test]
    fn derive_bounds_rejects_out_of_range_pdet2() {
        assert!(derive_bounds(&reference(), -0.1).is_err());
        assert!(derive_bounds(&reference(), 1.1).is_err());
    }

    #[test]
    fn observables_validation() {
        let e = MismatchEta::perfect();
        assert!(Observables::new(e, 1.2, 0.5, 0.0, 0.0, 0.0).is_err());
        assert!(Observables::new(e, 0.5, 0.6, 0.0, 0.0, 0.0).is_err());
        assert!(Observables::new(e, 0.5, 0.2, -0.1, 0.0, 0.0).is_err());
        assert!(Observables::new(e, 0.5, 0.2, 0.1, 0.0, 1.5).is_err());
    }

    #[test]
    fn upper_endpoint_solvers_agree() {
        let o = reference();
        let u = pdet2_upper(&o);
        let c = pdet2_upper_closed_form(&o);
        assert!(u > 0.0 && u < 1.0);
        assert!((u - c).abs() < 1e-9, "bisection {u} vs closed form {c}");
        let b = derive_bounds(&o, u).unwrap();
        assert!(b.delta_x_l.unwrap() <= 1.0 + 1e-10);
    }

    #[test]
    fn upper_endpoint_solvers_agree_under_mismatch() {
        for &(eta, q, p01) in &[(0.5, 0.05, 1e-5), (0.8, 0.09, 1e-4), (0.3, 0.01, 1e-3), (0.9, 0.0, 0.0)] {
            let p = (1.0 + eta) / 2.0;
            let o = obs(eta, p, eta / 2.0, q, p01, q);
            let u = pdet2_upper(&o);
            let c = pdet2_upper_closed_form(&o);
            assert!((u - c).abs() < 1e-9, "eta={eta}: {u} vs {c}");
        }
    }

    #[test]
    fn zero_double_clicks_close_the_segment() {
        // Any two-photon share would force q2 > 0 = q.
        let o = obs(1.0, 1.0, 0.5, 0.0, 0.0, 0.0);
        assert_eq!(pdet2_upper(&o), 0.0);
        assert_eq!(pdet2_upper_closed_form(&o), 0.0);
        let r = keyrate_multiphoton(&o);
        assert!(r.status.is_feasible());
        assert_abs_diff_eq!(r.k_bound, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_rate() {
        let r = keyrate_multiphoton(&reference());
        assert!(r.status.is_feasible());
        let target = 1.0 - 2.0 * h(0.05);
        assert!((r.k_bound - target).abs() < 2e-3, "{} vs {target}", r.k_bound);
        assert!(r.argmin_pdet2 <= r.pdet2_upper);
    }

    #[test]
    fn large_error_rate_aborts() {
        let r = keyrate_multiphoton(&obs(1.0, 1.0, 0.5, 0.5, 1e-5, 0.05));
        assert_eq!(r.status, Status::Aborted(Abort::ErrorRate));
        assert_eq!(r.k_bound, 0.0);
    }

    #[test]
    fn many_double_clicks_abort() {
        let p = p01_min(3).unwrap();
        let r = keyrate_multiphoton(&obs(0.9, 0.5, 0.2, 0.01, 0.9 * p * 0.5, 0.01));
        assert_eq!(r.status, Status::Aborted(Abort::NoSinglePhoton));
    }

    #[test]
    fn small_double_click_limit() {
        for &(q, p) in &[(0.05, 1.0), (0.02, 0.7)] {
            let delta = (p - 2.0 * q) / p;
            let limit = p * (1.0 - h((1.0 - delta) / 2.0)) - p * h(q);
            let mut prev = f64::INFINITY;
            for p01 in [1e-7, 1e-9] {
                let r = keyrate_multiphoton(&obs(1.0, p, p / 2.0, q, p01, q));
                let gap = (r.k_bound - limit).abs();
                assert!(gap < prev);
                prev = gap;
            }
            assert!(prev < 1e-3);
        }
    }

    #[test]
    fn minus_sign_is_not_larger() {
        let o = obs(0.7, 0.85, 0.35, 0.03, 1e-5, 0.03);
        let plus = keyrate_multiphoton(&o);
        let minus = keyrate_multiphoton_with(&o, EngineOptions { t1_sign: T1Sign::Minus });
        assert!(minus.k_bound <= plus.k_bound);
        let b = derive_bounds_with(&o, 0.0, EngineOptions { t1_sign: T1Sign::Minus }).unwrap();
        assert!(b.t1_l < b.pdet1_l);
    }

    #[test]
    fn transmittance_scales_rate() {
        let o = obs(0.8, 0.9, 0.4, 0.05, 1e-5, 0.05);
        let full = keyrate_multiphoton(&o).k_bound;
        let part = keyrate_multiphoton(&o.with_transmittance(0.25).unwrap()).k_bound;
        assert_abs_diff_eq!(part, 0.25 * full, epsilon = 1e-9);
    }

    #[test]
    fn single_photon_formulas() {
        let p = prob(0.9);
        assert_abs_diff_eq!(keyrate_single_tight(p, DeltaPair::new(0.0, 1.0).unwrap()), 0.9);
        assert_abs_diff_eq!(keyrate_single_tight(p, DeltaPair::new(0.0, 0.0).unwrap()), 0.0);
        assert_abs_diff_eq!(
            keyrate_single_tight(p, DeltaPair::new(0.6, 0.8).unwrap()),
            0.9 * h(0.2),
            epsilon = 1e-15
        );
        assert!(DeltaPair::new(0.8, 0.8).is_err());
        assert_abs_diff_eq!(keyrate_single_simple(p, 1.0).unwrap(), 0.9);
        assert_eq!(keyrate_single_simple(p, 0.0).unwrap(), 0.0);
        assert!(keyrate_single_simple(p, 1.5).is_err());
        for dx in [0.1, 0.5, 0.93] {
            assert_abs_diff_eq!(
                keyrate_single_simple(p, dx).unwrap(),
                keyrate_single_tight(p, DeltaPair::new(0.0, dx).unwrap()),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn matched_detector_rate() {
        assert_eq!(keyrate_no_mismatch(prob(0.7), prob(0.0)), 0.7);
        assert_eq!(keyrate_no_mismatch(prob(0.7), prob(0.5)), 0.0);
        let k = keyrate_no_mismatch(prob(1.0), prob(0.11));
        assert!(k > 0.0 && k < 3e-3, "{k}");
    }

    #[test]
    fn deltas_from_observations() {
        let e = MismatchEta::perfect();
        assert_eq!(deltas_from_single_obs(0.8, 0.4, 0.8, 0.1, e).unwrap().delta_z(), 0.0);
        assert_eq!(deltas_from_single_obs(0.8, 0.3, 0.8, 0.4, e).unwrap().delta_x(), 0.0);
        assert_abs_diff_eq!(
            deltas_from_single_obs(0.8, 0.4, 0.8, 0.04, e).unwrap().delta_x(),
            0.9,
            epsilon = 1e-15
        );
        assert!(deltas_from_single_obs(0.0, 0.0, 0.0, 0.0, e).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn observables() -> impl Strategy<Value = Observables> {
            (0.3f64..=1.0, 0.0f64..0.08, 0.0f64..1e-3, 0.5f64..=1.0).prop_map(|(eta, qf, p01, t)| {
                let p = (1.0 + eta) / 2.0;
                obs(eta, p * t, eta / 2.0 * t, qf * t, p01 * t, qf)
            })
        }

        proptest! {
            #[test]
            fn objective_is_midpoint_convex(o in observables(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
                let upper = pdet2_upper(&o);
                let (a, b) = (u * upper, v * upper);
                let mid = objective(&o, 0.5 * (a + b));
                prop_assert!(mid <= 0.5 * (objective(&o, a) + objective(&o, b)) + 1e-10);
            }

            #[test]
            fn solvers_agree(o in observables()) {
                let u = pdet2_upper(&o);
                let c = pdet2_upper_closed_form(&o);
                prop_assert!((u - c).abs() < 1e-9, "{} vs {}", u, c);
            }

            #[test]
            fn delta_bounded_on_segment(o in observables(), f in 0.0f64..=1.0) {
                let b = derive_bounds(&o, f * pdet2_upper(&o)).unwrap();
                if let Some(d) = b.delta_x_l {
                    prop_assert!(d <= 1.0 + 1e-10);
                }
            }

            #[test]
            fn rate_decreases_with_double_clicks(o in observables(), extra in 0.0f64..1e-3) {
                let more = o.with_p01(o.p_01() + extra).unwrap();
                prop_assert!(keyrate_multiphoton(&more).k_bound <= keyrate_multiphoton(&o).k_bound + 1e-12);
            }
        }
    }
}
