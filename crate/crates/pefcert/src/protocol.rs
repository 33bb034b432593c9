//! The certification protocol: accumulates per-trial PEF logs as a test
//! supermartingale, freezes once the success threshold is reached (early
//! stopping), and converts the final product into a smooth conditional
//! min-entropy certificate.
//!
//! The power `beta`, error bound `epsilon`, success-probability bound `kappa`
//! and target bits `b` are all fixed before the run. The planned conditional
//! probability bound `p` is derived from `(b, kappa, beta)` so that a
//! successful run certifies exactly `b` bits:
//! `-log2 p = b + (1 + 1/beta) * (-log2 kappa)`.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bellmodel::{TrialDistribution, TrialModel};
use crate::pefopt::{optimize_pef, Pef};
use crate::{cell_index, Error, Result, NUM_CELLS};

const MEMBERSHIP_TOL: f64 = 1e-8;

/// Protocol parameters, immutable for the lifetime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificationParams {
    beta: f64,
    epsilon: f64,
    kappa: f64,
    target_bits: f64,
    n_max: u64,
}

impl CertificationParams {
    pub fn new(beta: f64, epsilon: f64, kappa: f64, target_bits: f64, n_max: u64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be > 0")));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0, 1]")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} outside (0, 1]")));
        }
        if !(target_bits >= 0.0) {
            return Err(Error::InvalidParameter(format!("target_bits = {target_bits} must be >= 0")));
        }
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        Ok(CertificationParams { beta, epsilon, kappa, target_bits, n_max })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn target_bits(&self) -> f64 {
        self.target_bits
    }
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// `-log2 p` of the planned probability bound.
    pub fn neg_log2_p(&self) -> f64 {
        self.target_bits + (1.0 + 1.0 / self.beta) * (-self.kappa.log2())
    }

    /// Success threshold on `log2 T_n`: reaching it means
    /// `T_n >= 1/(p^beta epsilon)`.
    pub fn threshold_log2(&self) -> f64 {
        self.beta * self.neg_log2_p() - self.epsilon.log2()
    }
}

/// One trial's inputs and outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
}

impl TrialRecord {
    fn cell(&self) -> Result<usize> {
        if self.x > 1 || self.y > 1 || self.a > 1 || self.b > 1 {
            return Err(Error::InvalidParameter(format!(
                "trial {} has out-of-range values ({},{},{},{})",
                self.index, self.x, self.y, self.a, self.b
            )));
        }
        Ok(cell_index(self.x as usize, self.y as usize, self.a as usize, self.b as usize))
    }
}

/// Compensated (Kahan) accumulator for the running log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
    fn value(&self) -> f64 {
        self.sum
    }
}

/// Running state of a certification run.
#[derive(Debug, Clone)]
pub struct AccumulatorState {
    log2_t: KahanSum,
    trials_used: u64,
    frozen: bool,
    failed: bool,
    current_pef: Pef,
    params: CertificationParams,
    threshold_log2: f64,
    counts: [u64; NUM_CELLS],
    pef_replans: u64,
    last_index: u64,
}

impl AccumulatorState {
    /// Starts a run with a PEF optimized for the planning distribution
    /// `nu0`, which must be a member of the model.
    pub fn new_run(
        params: CertificationParams,
        model: &TrialModel,
        nu0: &TrialDistribution,
    ) -> Result<Self> {
        if model.is_member(nu0, MEMBERSHIP_TOL).is_none() {
            return Err(Error::NotInModel { residual: f64::NAN, tol: MEMBERSHIP_TOL });
        }
        let (pef, _) = optimize_pef(model, nu0, params.beta, params.n_max, params.epsilon)?;
        Ok(Self::from_pef(params, pef))
    }

    /// Starts a run with an explicitly supplied PEF (fixed schedules,
    /// soundness simulations). The PEF power must match the params.
    pub fn with_pef(params: CertificationParams, pef: Pef) -> Result<Self> {
        if (pef.beta() - params.beta).abs() > 0.0 {
            return Err(Error::ProtocolState(format!(
                "PEF power {} differs from the run power {}; beta is fixed for the run",
                pef.beta(),
                params.beta
            )));
        }
        Ok(Self::from_pef(params, pef))
    }

    fn from_pef(params: CertificationParams, pef: Pef) -> Self {
        let threshold_log2 = params.threshold_log2();
        AccumulatorState {
            log2_t: KahanSum::default(),
            trials_used: 0,
            frozen: false,
            failed: false,
            current_pef: pef,
            params,
            threshold_log2,
            counts: [0; NUM_CELLS],
            pef_replans: 0,
            last_index: 0,
        }
    }

    pub fn log2_t(&self) -> f64 {
        if self.failed {
            f64::NEG_INFINITY
        } else {
            self.log2_t.value()
        }
    }
    pub fn trials_used(&self) -> u64 {
        self.trials_used
    }
    pub fn frozen(&self) -> bool {
        self.frozen
    }
    pub fn failed(&self) -> bool {
        self.failed
    }
    pub fn current_pef(&self) -> &Pef {
        &self.current_pef
    }
    pub fn params(&self) -> &CertificationParams {
        &self.params
    }
    pub fn threshold_log2(&self) -> f64 {
        self.threshold_log2
    }
    pub fn counts(&self) -> &[u64; NUM_CELLS] {
        &self.counts
    }
    pub fn pef_replans(&self) -> u64 {
        self.pef_replans
    }

    /// True once the run has ended (frozen, failed, or `n_max` trials seen).
    pub fn ended(&self) -> bool {
        self.frozen || self.failed || self.trials_used >= self.params.n_max
    }

    /// Feeds one trial. After the freeze the factor is 1 by construction and
    /// the state does not change. A record landing on a zero-PEF cell aborts
    /// the run as failed.
    pub fn update(&mut self, record: TrialRecord) -> Result<()> {
        if self.failed {
            return Err(Error::ProtocolState("run already aborted".into()));
        }
        if record.index <= self.last_index {
            return Err(Error::ProtocolState(format!(
                "trial index {} does not increase (last was {})",
                record.index, self.last_index
            )));
        }
        let cell = record.cell()?;
        self.last_index = record.index;
        if self.frozen {
            return Ok(());
        }
        let factor = self.current_pef.value_at(cell);
        if factor <= 0.0 {
            self.counts[cell] += 1;
            self.trials_used += 1;
            self.failed = true;
            self.frozen = true;
            return Err(Error::ZeroPefCell { cell });
        }
        self.counts[cell] += 1;
        self.log2_t.add(factor.log2());
        self.trials_used += 1;
        if self.log2_t.value() >= self.threshold_log2 {
            self.frozen = true;
        }
        Ok(())
    }

    /// Replaces the working PEF with one freshly optimized at the same power
    /// for `empirical_nu` (projected into the model when slightly outside).
    /// Past contributions to the running log are untouched.
    pub fn replan_pef(
        &mut self,
        model: &TrialModel,
        empirical_nu: &TrialDistribution,
    ) -> Result<()> {
        if self.frozen {
            return Err(Error::ProtocolState("cannot replan a frozen run".into()));
        }
        let nu = if model.is_member(empirical_nu, MEMBERSHIP_TOL).is_some() {
            *empirical_nu
        } else {
            model.project_to_hull(&empirical_nu.as_array()).0
        };
        let (pef, _) =
            optimize_pef(model, &nu, self.params.beta, self.params.n_max, self.params.epsilon)?;
        self.current_pef = pef;
        self.pef_replans += 1;
        Ok(())
    }

    /// Replans from the accumulated cell counts with add-one smoothing.
    pub fn replan_from_counts(&mut self, model: &TrialModel) -> Result<()> {
        let total: u64 = self.counts.iter().sum();
        let denom = (total + NUM_CELLS as u64) as f64;
        let mut probs = [0.0; NUM_CELLS];
        for (p, &c) in probs.iter_mut().zip(&self.counts) {
            *p = (c + 1) as f64 / denom;
        }
        let smoothed = TrialDistribution::new(probs)
            .expect("smoothed frequencies are a valid distribution");
        self.replan_pef(model, &smoothed)
    }

    /// Installs an explicit PEF mid-run. The power cannot change.
    pub fn set_pef(&mut self, pef: Pef) -> Result<()> {
        if self.frozen {
            return Err(Error::ProtocolState("cannot change the PEF of a frozen run".into()));
        }
        if (pef.beta() - self.params.beta).abs() > 0.0 {
            return Err(Error::ProtocolState(format!(
                "PEF power {} differs from the run power {}; beta is fixed for the run",
                pef.beta(),
                self.params.beta
            )));
        }
        self.current_pef = pef;
        Ok(())
    }

    /// Issues the entropy certificate once the run has ended.
    ///
    /// Success requires `log2 T_n >= beta * (-log2 p) - log2 epsilon` with the
    /// planned `p`; a successful run certifies
    /// `-log2(p / kappa^(1 + 1/beta)) = target_bits` bits of epsilon-smooth
    /// conditional min-entropy on the success event.
    pub fn certify(&self) -> Result<EntropyCertificate> {
        if !self.ended() {
            return Err(Error::ProtocolState(format!(
                "run not ended: {} of {} trials and not frozen",
                self.trials_used, self.params.n_max
            )));
        }
        let neg_log2_p = self.params.neg_log2_p();
        // p must stay above 1/|Rng(C)| = 4^-n; an aborted run certifies
        // nothing, so the bound is not needed there
        if !self.failed && neg_log2_p > 2.0 * self.trials_used as f64 {
            return Err(Error::InvalidParameter(format!(
                "planned p = 2^-{neg_log2_p:.3} is below 4^-n for n = {}",
                self.trials_used
            )));
        }
        let log2_tn = self.log2_t();
        let success = !self.failed && log2_tn >= self.threshold_log2;
        let entropy_bits = if success {
            neg_log2_p + (1.0 + 1.0 / self.params.beta) * self.params.kappa.log2()
        } else {
            0.0
        };
        Ok(EntropyCertificate {
            success,
            p_log2: -neg_log2_p,
            entropy_bits,
            epsilon: self.params.epsilon,
            kappa: self.params.kappa,
            beta: self.params.beta,
            log2_tn,
            n: self.trials_used,
            pef_replans: self.pef_replans,
        })
    }

    /// Level-epsilon probability-estimate value `(epsilon T_n)^(-1/beta)`.
    pub fn upe_bound(&self) -> UpeBound {
        let exponent = -(self.log2_t() + self.params.epsilon.log2()) / self.params.beta;
        UpeBound { u: exponent.exp2() }
    }
}

/// Smooth conditional min-entropy certificate for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub success: bool,
    /// `log2` of the planned conditional probability bound `p`.
    pub p_log2: f64,
    /// Certified bits on success (0 on failure).
    pub entropy_bits: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub beta: f64,
    pub log2_tn: f64,
    pub n: u64,
    pub pef_replans: u64,
}

/// Level-epsilon uniform probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpeBound {
    pub u: f64,
}

/// Draws `n` i.i.d. trials from `nu`, deterministically in the seed.
pub fn simulate_trials(nu: &TrialDistribution, n: u64, seed: u64) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = nu.as_array();
    let mut records = Vec::with_capacity(n as usize);
    for index in 1..=n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut cell = NUM_CELLS - 1;
        for (c, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                cell = c;
                break;
            }
        }
        let (x, y, a, b) = crate::cell_coords(cell);
        records.push(TrialRecord { index, x: x as u8, y: y as u8, a: a as u8, b: b as u8 });
    }
    records
}

/// Writes a trial log as CSV with header `trial,x,y,a,b`.
pub fn write_trial_log<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(format!("trial log write: {e}"));
    writeln!(w, "trial,x,y,a,b").map_err(io)?;
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.index, r.x, r.y, r.a, r.b).map_err(io)?;
    }
    Ok(())
}

/// Reads a trial log produced by [`write_trial_log`].
pub fn read_trial_log<R: BufRead>(r: R) -> Result<Vec<TrialRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty trial log".into()))?
        .map_err(|e| Error::Format(format!("trial log read: {e}")))?;
    if header.trim() != "trial,x,y,a,b" {
        return Err(Error::Format(format!("unexpected trial log header: {header:?}")));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Format(format!("trial log read: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!("line {}: expected 5 fields", lineno + 2)));
        }
        let parse = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))
        };
        records.push(TrialRecord {
            index: parse(fields[0])?,
            x: parse(fields[1])? as u8,
            y: parse(fields[2])? as u8,
            a: parse(fields[3])? as u8,
            b: parse(fields[4])? as u8,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellmodel::{lr_vertex, ns_model, InputDistribution};
    use crate::distributions::family_werner;
    use crate::pefopt::validate_pef;

    fn uniform_ns() -> TrialModel {
        ns_model(&InputDistribution::uniform()).unwrap()
    }

    fn basic_params() -> CertificationParams {
        CertificationParams::new(1.0, 0.1, 1.0, 10.0_f64.log2(), 1000).unwrap()
    }

    #[test]
    fn new_run_starts_empty_and_rejects_non_members() {
        let model = uniform_ns();
        let nu = family_werner(0.9).unwrap();
        let state = AccumulatorState::new_run(basic_params(), &model, &nu).unwrap();
        assert_eq!(state.log2_t(), 0.0);
        assert_eq!(state.trials_used(), 0);
        assert!(!state.frozen());
        assert!(validate_pef(&model, state.current_pef()) <= 1.0 + 1e-9);

        // a signaling table is rejected up front
        let mut probs = [0.0; NUM_CELLS];
        for x in 0..2 {
            for y in 0..2 {
                probs[cell_index(x, y, y, 0)] = 0.25;
            }
        }
        let signaling = TrialDistribution::new(probs).unwrap();
        assert!(matches!(
            AccumulatorState::new_run(basic_params(), &model, &signaling),
            Err(Error::NotInModel { .. })
        ));
    }

    #[test]
    fn unit_pef_leaves_log_unchanged() {
        let params = basic_params();
        let mut state = AccumulatorState::with_pef(params, Pef::unit(1.0).unwrap()).unwrap();
        for i in 1..=50 {
            state
                .update(TrialRecord { index: i, x: 0, y: 1, a: 1, b: 0 })
                .unwrap();
        }
        assert_eq!(state.log2_t(), 0.0);
        assert_eq!(state.trials_used(), 50);
    }

    #[test]
    fn factor_two_adds_one_bit() {
        let params = basic_params();
        let mut values = [1.0; NUM_CELLS];
        values[cell_index(0, 0, 0, 0)] = 2.0;
        let mut state =
            AccumulatorState::with_pef(params, Pef::new(values, 1.0).unwrap()).unwrap();
        state.update(TrialRecord { index: 1, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        assert!((state.log2_t() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn freeze_blocks_further_accumulation() {
        // threshold log2 T >= 1 * log2(10) + log2(10) = 6.64; give 2 bits per hit
        let params = basic_params();
        let mut values = [1.0; NUM_CELLS];
        values[cell_index(0, 0, 0, 0)] = 4.0;
        let mut state =
            AccumulatorState::with_pef(params, Pef::new(values, 1.0).unwrap()).unwrap();
        let mut i = 0;
        while !state.frozen() {
            i += 1;
            state.update(TrialRecord { index: i, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        }
        let frozen_at = state.log2_t();
        let trials_at = state.trials_used();
        for j in 1..=100 {
            state.update(TrialRecord { index: i + j, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        }
        assert_eq!(state.log2_t(), frozen_at);
        assert_eq!(state.trials_used(), trials_at);
        assert!(state.ended());
    }

    #[test]
    fn zero_pef_cell_aborts_run() {
        let params = basic_params();
        let mut values = [1.0; NUM_CELLS];
        values[cell_index(1, 1, 0, 0)] = 0.0;
        let mut state =
            AccumulatorState::with_pef(params, Pef::new(values, 1.0).unwrap()).unwrap();
        let err = state.update(TrialRecord { index: 1, x: 1, y: 1, a: 0, b: 0 });
        assert!(matches!(err, Err(Error::ZeroPefCell { .. })));
        assert!(state.failed());
        assert_eq!(state.log2_t(), f64::NEG_INFINITY);
        let cert = state.certify().unwrap();
        assert!(!cert.success);
    }

    #[test]
    fn beta_is_immutable_mid_run() {
        let params = basic_params();
        let mut state = AccumulatorState::with_pef(params, Pef::unit(1.0).unwrap()).unwrap();
        assert!(state.set_pef(Pef::unit(0.5).unwrap()).is_err());
        assert!(AccumulatorState::with_pef(params, Pef::unit(2.0).unwrap()).is_err());
        assert_eq!(state.params().beta(), 1.0);
    }

    #[test]
    fn certification_arithmetic_matches_hand_computation() {
        // log2 Tn = 100, beta = 1, eps = 2^-20, kappa = 1, b = 80:
        // threshold = 80 + 20 = 100, p = 2^-80, entropy = 80
        let params = CertificationParams::new(1.0, (2.0_f64).powi(-20), 1.0, 80.0, 10_000).unwrap();
        let mut values = [1.0; NUM_CELLS];
        values[cell_index(0, 0, 0, 0)] = 2.0;
        let mut state =
            AccumulatorState::with_pef(params, Pef::new(values, 1.0).unwrap()).unwrap();
        for i in 1..=100 {
            state.update(TrialRecord { index: i, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        }
        assert!(state.frozen());
        let cert = state.certify().unwrap();
        assert!(cert.success);
        assert!((cert.log2_tn - 100.0).abs() < 1e-9);
        assert!((cert.p_log2 + 80.0).abs() < 1e-9);
        assert!((cert.entropy_bits - 80.0).abs() < 1e-9);

        let upe = state.upe_bound();
        assert!((upe.u.log2() + 80.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_penalty_shifts_planned_p() {
        let base = CertificationParams::new(1.0, 0.5, 1.0, 64.0, 100).unwrap();
        let conservative =
            CertificationParams::new(1.0, 0.5, (2.0_f64).powi(-64), 64.0, 100).unwrap();
        let penalty = conservative.neg_log2_p() - base.neg_log2_p();
        assert!((penalty - 128.0).abs() < 1e-9);
    }

    #[test]
    fn upe_trivial_and_monotone() {
        let params = CertificationParams::new(1.0, 1.0, 1.0, 0.0, 100).unwrap();
        let state = AccumulatorState::with_pef(params, Pef::unit(1.0).unwrap()).unwrap();
        assert!((state.upe_bound().u - 1.0).abs() < 1e-12);

        let params = CertificationParams::new(2.0, 0.25, 1.0, 0.0, 100).unwrap();
        let mut values = [1.0; NUM_CELLS];
        values[0] = 2.0;
        let mut s1 = AccumulatorState::with_pef(params, Pef::new(values, 2.0).unwrap()).unwrap();
        let mut s2 = s1.clone();
        s1.update(TrialRecord { index: 1, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        s2.update(TrialRecord { index: 1, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        s2.update(TrialRecord { index: 2, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        assert!(s2.upe_bound().u < s1.upe_bound().u);
    }

    #[test]
    fn certify_requires_run_end_and_valid_p() {
        let params = basic_params();
        let mut state = AccumulatorState::with_pef(params, Pef::unit(1.0).unwrap()).unwrap();
        assert!(state.certify().is_err());
        // huge target with few trials: p < 4^-n
        let big = CertificationParams::new(1.0, 0.5, 1.0, 1000.0, 10).unwrap();
        let mut s = AccumulatorState::with_pef(big, Pef::unit(1.0).unwrap()).unwrap();
        for i in 1..=10 {
            s.update(TrialRecord { index: i, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        }
        assert!(s.certify().is_err());
        // normal path: ended by n_max, threshold missed
        for i in 1..=1000 {
            state.update(TrialRecord { index: i, x: 0, y: 1, a: 0, b: 1 }).unwrap();
        }
        let cert = state.certify().unwrap();
        assert!(!cert.success);
        assert_eq!(cert.entropy_bits, 0.0);
    }

    #[test]
    fn certification_is_order_independent() {
        // target far above reach, so the freeze never fires and the final
        // log depends only on the multiset of records
        let model = uniform_ns();
        let nu = family_werner(1.0).unwrap();
        let params = CertificationParams::new(0.5, 1e-3, 1.0, 500.0, 500).unwrap();
        let records = simulate_trials(&nu, 500, 42);
        let mut reversed: Vec<TrialRecord> = records.iter().rev().cloned().collect();
        for (i, r) in reversed.iter_mut().enumerate() {
            r.index = i as u64 + 1;
        }
        let mut s1 = AccumulatorState::new_run(params, &model, &nu).unwrap();
        let mut s2 = AccumulatorState::with_pef(params, s1.current_pef().clone()).unwrap();
        for r in &records {
            s1.update(*r).unwrap();
        }
        for r in &reversed {
            s2.update(*r).unwrap();
        }
        assert!((s1.log2_t() - s2.log2_t()).abs() < 1e-9);
        let c1 = s1.certify().unwrap();
        let c2 = s2.certify().unwrap();
        assert_eq!(c1.success, c2.success);
        assert!((c1.log2_tn - c2.log2_tn).abs() < 1e-9);
    }

    #[test]
    fn replan_keeps_history_and_respects_freeze() {
        let model = uniform_ns();
        let nu = family_werner(0.95).unwrap();
        let params = CertificationParams::new(0.3, 1e-6, 1.0, 500.0, 100_000).unwrap();
        let mut state = AccumulatorState::new_run(params, &model, &nu).unwrap();
        let before_obj = crate::pefopt::pef_log_rate(state.current_pef(), &nu).unwrap();
        for r in simulate_trials(&nu, 200, 7) {
            state.update(r).unwrap();
        }
        let log_before = state.log2_t();
        state.replan_pef(&model, &nu).unwrap();
        assert_eq!(state.log2_t(), log_before);
        assert_eq!(state.pef_replans(), 1);
        let after_obj = crate::pefopt::pef_log_rate(state.current_pef(), &nu).unwrap();
        assert!((before_obj - after_obj).abs() < 1e-9);

        // counts-based replanning also works
        state.replan_from_counts(&model).unwrap();
        assert_eq!(state.pef_replans(), 2);

        // frozen runs reject replanning
        let short = CertificationParams::new(0.3, 1.0, 1.0, 0.0, 10).unwrap();
        let mut frozen = AccumulatorState::with_pef(short, Pef::unit(0.3).unwrap()).unwrap();
        frozen.update(TrialRecord { index: 1, x: 0, y: 0, a: 0, b: 0 }).unwrap();
        assert!(frozen.frozen(), "threshold 0 freezes immediately");
        assert!(frozen.replan_pef(&model, &nu).is_err());
    }

    #[test]
    fn accumulated_log_tracks_expected_rate() {
        let model = uniform_ns();
        let nu = family_werner(1.0).unwrap();
        let (pef, _) = optimize_pef(&model, &nu, 0.2, 1, 1.0).unwrap();
        // moments of log2 F under nu
        let mut mean = 0.0;
        let mut second = 0.0;
        for c in 0..NUM_CELLS {
            let p = nu.prob_at(c);
            if p > 0.0 {
                let l = pef.value_at(c).log2();
                mean += p * l;
                second += p * l * l;
            }
        }
        let sd = (second - mean * mean).sqrt();
        let n = 100_000u64;
        let params = CertificationParams::new(0.2, 1e-9, 1.0, 1e6, n).unwrap();
        let mut state = AccumulatorState::with_pef(params, pef).unwrap();
        for r in simulate_trials(&nu, n, 12345) {
            state.update(r).unwrap();
        }
        let avg = state.log2_t() / n as f64;
        let band = 3.0 * sd / (n as f64).sqrt();
        assert!((avg - mean).abs() <= band, "avg {avg}, mean {mean}, band {band}");
    }

    #[test]
    fn simulate_is_deterministic_and_matches_frequencies() {
        let nu = family_werner(1.0).unwrap();
        let a = simulate_trials(&nu, 1000, 99);
        let b = simulate_trials(&nu, 1000, 99);
        assert_eq!(a, b);

        let n = 100_000u64;
        let records = simulate_trials(&nu, n, 4242);
        let mut counts = [0u64; NUM_CELLS];
        for r in &records {
            counts[cell_index(r.x as usize, r.y as usize, r.a as usize, r.b as usize)] += 1;
        }
        for c in 0..NUM_CELLS {
            let p = nu.prob_at(c);
            let band = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            let freq = counts[c] as f64 / n as f64;
            assert!((freq - p).abs() <= band.max(1e-4), "cell {c}: {freq} vs {p}");
        }
    }

    #[test]
    fn simulate_point_mass_gives_constant_records() {
        let nu = lr_vertex(&InputDistribution::uniform(), 0, 0, 0, 0);
        let records = simulate_trials(&nu, 100, 5);
        for r in &records {
            assert_eq!(r.a, 0);
            assert_eq!(r.b, 0);
        }
    }

    #[test]
    fn trial_log_round_trip() {
        let nu = family_werner(0.8).unwrap();
        let records = simulate_trials(&nu, 50, 3);
        let mut buf = Vec::new();
        write_trial_log(&mut buf, &records).unwrap();
        let parsed = read_trial_log(&buf[..]).unwrap();
        assert_eq!(records, parsed);
    }
}
