//! Observables from channel models and from explicit states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    alice_conditional, build_povm, partial_trace_first, trace_product, Basis, CMatrix, Detection,
    JointState, MINUS, ONE, PLUS, ZERO,
};
use crate::keyrate::{
    deltas_from_single_obs, keyrate_multiphoton, keyrate_no_mismatch, keyrate_single_simple,
    keyrate_single_tight, Observables, Status,
};
use crate::scalarmath::{h, theta, MismatchEta, Probability};

/// Single photons through a depolarizing line with error weight `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizingModel {
    qber: Probability,
    eta: MismatchEta,
    p01_override: Probability,
}

impl DepolarizingModel {
    pub fn new(qber: Probability, eta: MismatchEta, p01_override: Probability) -> Result<Self> {
        if qber.value() > 0.5 {
            return Err(Error::domain("Q", qber.value(), "[0, 1/2]"));
        }
        Ok(DepolarizingModel {
            qber,
            eta,
            p01_override,
        })
    }

    pub fn qber(&self) -> Probability {
        self.qber
    }

    pub fn eta(&self) -> MismatchEta {
        self.eta
    }
}

/// Closed-form observables of the depolarized single-photon state. The
/// state itself never double-clicks; `p_01` is the injected override.
pub fn depolarized_observables(m: &DepolarizingModel) -> Observables {
    let eta = m.eta.value();
    let q = m.qber.value();
    Observables::new(m.eta, (1.0 + eta) / 2.0, eta / 2.0, q, m.p01_override.value(), q)
        .expect("closed forms are valid probabilities")
}

/// `(1 - 2Q) |Phi+><Phi+| + 2Q I/4` on Alice's qubit and one photon.
pub fn depolarized_state(m: &DepolarizingModel) -> JointState {
    let q = m.qber.value();
    let mut block = CMatrix::identity(4, 4) * Complex64::new(q / 2.0, 0.0);
    // Phi+ = (|0>|1,0> + |1>|0,1>)/sqrt2 has support on indices 0 and 3.
    let w = Complex64::new((1.0 - 2.0 * q) / 2.0, 0.0);
    for &r in &[0, 3] {
        for &c in &[0, 3] {
            block[(r, c)] += w;
        }
    }
    JointState::new().with_block(1, block).expect("depolarized state is a density matrix")
}

/// Detection statistics of one photon-number sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorRow {
    pub n: usize,
    /// Probability of the sector.
    pub t: f64,
    pub p_empty: f64,
    pub p_0: f64,
    pub p_1: f64,
    /// z-basis double clicks.
    pub p_01_z: f64,
    pub p_01_x: f64,
    pub p_det: f64,
    /// Contribution to the mean double-click rate.
    pub p_01: f64,
    /// Contribution to the weighted x-basis error rate.
    pub q: f64,
    /// Contribution to z-basis errors, double clicks counted half.
    pub z_errors: f64,
}

impl SectorRow {
    /// `p_{0+01} + p_1 / theta_n`; equals `t` for `n >= 1`.
    pub fn loss_accounting(&self, eta: MismatchEta) -> Option<f64> {
        (self.n >= 1).then(|| self.p_0 + self.p_01_z + self.p_1 / theta(eta, self.n as u32))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SectorStats {
    pub rows: Vec<SectorRow>,
}

fn sector_row(n: usize, block: &CMatrix, eta: MismatchEta) -> SectorRow {
    let z = build_povm(n, eta, Basis::Z, Detection::Imperfect);
    let x = build_povm(n, eta, Basis::X, Detection::Imperfect);
    let bob = partial_trace_first(block, 2);
    let [p_empty, p_0, p_1, p_01_z] = z.probabilities(&bob);
    let p_01_x = trace_product(&bob, &x.double);

    let half = Complex64::new(0.5, 0.0);
    let plus = alice_conditional(block, PLUS);
    let minus = alice_conditional(block, MINUS);
    let q = trace_product(&plus, &(&x.click1 + &x.double * half)) / eta.value()
        + trace_product(&minus, &(&x.click0 + &x.double * half));

    let zero = alice_conditional(block, ZERO);
    let one = alice_conditional(block, ONE);
    let z_errors = trace_product(&zero, &(&z.click1 + &z.double * half))
        + trace_product(&one, &(&z.click0 + &z.double * half));

    SectorRow {
        n,
        t: bob.trace().re,
        p_empty,
        p_0,
        p_1,
        p_01_z,
        p_01_x,
        p_det: p_0 + p_1 + p_01_z,
        p_01: 0.5 * (p_01_z + p_01_x),
        q,
        z_errors,
    }
}

/// Exact observables of a block-diagonal state under imperfect detection.
pub fn observables_from_state(state: &JointState, eta: MismatchEta) -> Result<(Observables, SectorStats)> {
    let rows: Vec<SectorRow> = state.blocks().map(|(n, b)| sector_row(n, b, eta)).collect();
    let sum = |f: fn(&SectorRow) -> f64| rows.iter().map(f).sum::<f64>();
    let p_det = sum(|r| r.p_det);
    let z_errors = sum(|r| r.z_errors);
    let q_z = if p_det > 0.0 { z_errors / p_det } else { 0.0 };
    let obs = Observables::new(eta, p_det, sum(|r| r.p_1), sum(|r| r.q).max(0.0), sum(|r| r.p_01), q_z)?;
    Ok((obs, SectorStats { rows }))
}

/// `steps` evenly spaced efficiencies from `eta_min` to `eta_max`.
pub fn eta_grid(eta_min: f64, eta_max: f64, steps: usize) -> Result<Vec<f64>> {
    MismatchEta::new(eta_min)?;
    MismatchEta::new(eta_max)?;
    if eta_min > eta_max {
        return Err(Error::Invalid(format!("eta-min {eta_min} exceeds eta-max {eta_max}")));
    }
    if steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    if steps == 1 {
        return Ok(vec![eta_min]);
    }
    let step = (eta_max - eta_min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { eta_max } else { eta_min + step * i as f64 })
        .collect())
}

/// One efficiency of the sweep. Single-photon columns use the depolarized
/// single-photon observables; all but `k_tight` include the error-correction
/// cost `p_det h(Q)`, and `k_tight` subtracts it here as well so the
/// columns compare like with like.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    /// `None` when the engine aborts.
    pub k_main: Option<f64>,
    pub k_tight: f64,
    pub k_simple: f64,
    pub k_nomismatch: f64,
    pub ratio: Option<f64>,
    pub status: Status,
}

impl SweepRow {
    /// Rates for a line of transmittance `t`; every column is linear in the
    /// observed rates, so the ratio is unchanged.
    pub fn scaled(self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain("transmittance", t, "(0, 1]"));
        }
        Ok(SweepRow {
            k_main: self.k_main.map(|k| k * t),
            k_tight: self.k_tight * t,
            k_simple: self.k_simple * t,
            k_nomismatch: self.k_nomismatch * t,
            ..self
        })
    }
}

pub fn sweep_row(qber: Probability, p01: Probability, eta: MismatchEta) -> Result<SweepRow> {
    let model = DepolarizingModel::new(qber, eta, p01)?;
    let obs = depolarized_observables(&model);
    let result = keyrate_multiphoton(&obs);
    let e = eta.value();
    let q = qber.value();
    let p_det = Probability::new(obs.p_det())?;
    // Single-photon state: t_1 = p_0 + p_1/eta = 1, q_1 = Q.
    let t1 = obs.p_det() + (1.0 / e - 1.0) * obs.p_1();
    let deltas = deltas_from_single_obs(obs.p_det(), obs.p_1(), t1, q, eta)?;
    let ec = obs.p_det() * h(q);
    let k_tight = (keyrate_single_tight(p_det, deltas) - ec).max(0.0);
    let k_simple = (keyrate_single_simple(p_det, deltas.delta_x())? - ec).max(0.0);
    let k_nomismatch = keyrate_no_mismatch(p_det, qber);
    let k_main = result.status.is_feasible().then_some(result.k_bound);
    let ratio = k_main.map(|k| if k_nomismatch > 0.0 { k / k_nomismatch } else { 0.0 });
    Ok(SweepRow {
        eta: e,
        k_main,
        k_tight,
        k_simple,
        k_nomismatch,
        ratio,
        status: result.status,
    })
}

/// Rows in ascending efficiency order.
pub fn sweep_figure(qber: Probability, p01: Probability, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let mut etas = grid.to_vec();
    etas.sort_by(f64::total_cmp);
    etas.into_iter()
        .map(|e| sweep_row(qber, p01, MismatchEta::new(e)?))
        .collect()
}
