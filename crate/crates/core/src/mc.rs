//! Ensemble orchestration: runs a per-path experiment across many seeds,
//! accumulates streaming statistics, and evaluates convergence targets with
//! explicit confidence tolerances.
//!
//! Paths are chunked and chunks reduced in a fixed order, so results are
//! bit-identical for any thread count.

use rayon::prelude::*;

use crate::bsde::{self, BsdePair, ParticleParams, PsiSpec};
use crate::circuit::{
    build_overline, build_underline, ito_energy_explicit, Family, RestartSchedule,
};
use crate::error::CoreError;
use crate::randpath::{sample_wiener, CircuitParams, CounterRng, SeedSpec, Stream, TimeGrid};
use crate::real::Real;
use crate::stochint::{alpha_integral_prefix, energy_sde_ito, euler_maruyama, AlphaRule};

/// Streaming mean/variance accumulator (Welford) with an order-insensitive
/// merge, plus running min/max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleStats<F> {
    n: u64,
    mean: F,
    m2: F,
    min: F,
    max: F,
}

impl<F: Real> Default for EnsembleStats<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> EnsembleStats<F> {
    pub fn new() -> Self {
        EnsembleStats {
            n: 0,
            mean: F::zero(),
            m2: F::zero(),
            min: F::infinity(),
            max: F::neg_infinity(),
        }
    }

    pub fn push(&mut self, x: F) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / F::of_usize(self.n as usize);
        self.m2 = self.m2 + delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Combines two accumulators as if their samples had been pushed into
    /// one; associative and commutative up to floating-point rounding.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let na = F::of_usize(self.n as usize);
        let nb = F::of_usize(other.n as usize);
        let n = na + nb;
        let delta = other.mean - self.mean;
        EnsembleStats {
            n: self.n + other.n,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    /// Unbiased sample variance `m2 / (n - 1)`; zero for fewer than two
    /// samples.
    pub fn variance(&self) -> F {
        if self.n >= 2 {
            self.m2 / F::of_usize((self.n - 1) as usize)
        } else {
            F::zero()
        }
    }

    pub fn standard_error(&self) -> F {
        if self.n == 0 {
            F::zero()
        } else {
            (self.variance() / F::of_usize(self.n as usize)).sqrt()
        }
    }

    pub fn min(&self) -> F {
        self.min
    }

    pub fn max(&self) -> F {
        self.max
    }
}

/// Outcome of comparing an ensemble mean against a target value at a given
/// number of standard errors.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceCheck<F> {
    pub target: F,
    pub tolerance_se_multiples: F,
    pub observed: EnsembleStats<F>,
    pub standard_error: F,
    pub pass: bool,
}

impl<F: Real> ConvergenceCheck<F> {
    pub fn evaluate(observed: &EnsembleStats<F>, target: F, tolerance_se_multiples: F) -> Self {
        let se = observed.standard_error();
        ConvergenceCheck {
            target,
            tolerance_se_multiples,
            observed: *observed,
            standard_error: se,
            pass: (observed.mean() - target).abs() <= tolerance_se_multiples * se,
        }
    }
}

/// Equipartition verdict: the mean energy against `V^2/(4R)`, plus whether
/// that target coincides with `kb_tau / 2` (exactly the fluctuation-
/// dissipation choice of `V`).
#[derive(Clone, Copy, Debug)]
pub struct EquipartitionCheck<F> {
    pub check: ConvergenceCheck<F>,
    pub target_equals_half_kbtau: bool,
}

/// Compares long-time mean-energy statistics against the equipartition value.
/// The statistics must come from an energy observable at a time at least a
/// few relaxation times `L/(2R)` into the run.
pub fn check_equipartition<F: Real>(
    stats: &EnsembleStats<F>,
    params: &CircuitParams<F>,
    tolerance_se_multiples: F,
) -> Result<EquipartitionCheck<F>, CoreError<F>> {
    if stats.n() < 100 {
        return Err(CoreError::Underpowered {
            n: stats.n() as usize,
            min: 100,
        });
    }
    let target = params.v() * params.v() / (F::of(4.0) * params.r());
    let half_kbtau = F::of(0.5) * params.kb_tau();
    Ok(EquipartitionCheck {
        check: ConvergenceCheck::evaluate(stats, target, tolerance_se_multiples),
        target_equals_half_kbtau: (target - half_kbtau).abs() <= F::of(1e-12),
    })
}

/// Per-path initial energy: a fixed value, or one drawn from the stationary
/// current law (finite moments of every order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialEnergy<F> {
    Fixed(F),
    Equilibrium,
}

impl<F: Real> InitialEnergy<F> {
    fn validate(&self) -> Result<(), CoreError<F>> {
        if let InitialEnergy::Fixed(e) = self {
            if !(*e >= F::zero()) || !e.is_finite() {
                return Err(CoreError::invalid(
                    "initial.energy",
                    "must be nonnegative and finite",
                ));
            }
        }
        Ok(())
    }

    fn realize(&self, params: &CircuitParams<F>, seed: SeedSpec) -> F {
        match self {
            InitialEnergy::Fixed(e) => *e,
            InitialEnergy::Equilibrium => {
                let rng = CounterRng::new(seed, Stream::InitialCondition);
                let i0 = F::of(rng.normal_at(0)) * params.stationary_current_variance().sqrt();
                F::of(0.5) * params.l() * i0 * i0
            }
        }
    }
}

/// A restart duration: fixed, or exponentially distributed with the given
/// rate, drawn from the path's dedicated stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DurationSpec<F> {
    Fixed(F),
    Exponential { rate: F },
}

impl<F: Real> DurationSpec<F> {
    fn validate(&self, name: &'static str, strictly_positive: bool) -> Result<(), CoreError<F>> {
        match self {
            DurationSpec::Fixed(d) => {
                let ok = d.is_finite() && (*d > F::zero() || (!strictly_positive && *d >= F::zero()));
                if !ok {
                    return Err(CoreError::invalid(name, "fixed duration out of range"));
                }
            }
            DurationSpec::Exponential { rate } => {
                if !(*rate > F::zero()) || !rate.is_finite() {
                    return Err(CoreError::invalid(name, "exponential rate must be > 0"));
                }
            }
        }
        Ok(())
    }

    fn realize(&self, rng: &CounterRng, slot: u64) -> F {
        match self {
            DurationSpec::Fixed(d) => *d,
            DurationSpec::Exponential { rate } => {
                F::of(rng.exponential_at(slot, rate.to_f64().expect("finite rate")))
            }
        }
    }
}

/// Restart schedule with per-path randomness: realizes a concrete
/// [`RestartSchedule`] for each seed from streams independent of the Wiener
/// increments.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSpec<F> {
    family: Family,
    lambdas: Vec<DurationSpec<F>>,
    mus: Vec<DurationSpec<F>>,
}

impl<F: Real> ScheduleSpec<F> {
    pub fn overline(
        lambdas: Vec<DurationSpec<F>>,
        mus: Vec<DurationSpec<F>>,
    ) -> Result<Self, CoreError<F>> {
        if lambdas.is_empty() || mus.len() != lambdas.len() {
            return Err(CoreError::invalid(
                "schedule.mus",
                "overline family needs one mu per lambda (N+1 of each)",
            ));
        }
        Self::validated(Family::Overline, lambdas, mus)
    }

    pub fn underline(
        lambdas: Vec<DurationSpec<F>>,
        mus: Vec<DurationSpec<F>>,
    ) -> Result<Self, CoreError<F>> {
        if lambdas.is_empty() || mus.len() + 1 != lambdas.len() {
            return Err(CoreError::invalid(
                "schedule.mus",
                "underline family needs N mus for N+1 lambdas",
            ));
        }
        Self::validated(Family::Underline, lambdas, mus)
    }

    fn validated(
        family: Family,
        lambdas: Vec<DurationSpec<F>>,
        mus: Vec<DurationSpec<F>>,
    ) -> Result<Self, CoreError<F>> {
        for l in &lambdas {
            l.validate("schedule.lambdas", true)?;
        }
        for m in &mus {
            m.validate("schedule.mus", false)?;
        }
        Ok(ScheduleSpec {
            family,
            lambdas,
            mus,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn realize(&self, seed: SeedSpec) -> RestartSchedule<F> {
        let lrng = CounterRng::new(seed, Stream::RestartLambda);
        let mrng = CounterRng::new(seed, Stream::RestartMu);
        let lambdas = self
            .lambdas
            .iter()
            .enumerate()
            .map(|(i, l)| l.realize(&lrng, i as u64))
            .collect();
        let mus = self
            .mus
            .iter()
            .enumerate()
            .map(|(i, m)| m.realize(&mrng, i as u64))
            .collect();
        match self.family {
            Family::Overline => RestartSchedule::overline(lambdas, mus),
            Family::Underline => RestartSchedule::underline(lambdas, mus),
        }
        .expect("realized durations satisfy the validated spec")
    }
}

/// A registered per-path procedure.
#[derive(Clone, Debug)]
pub enum Experiment<F: Real> {
    /// Closed-form (Ito) energy along a sampled Wiener path.
    PhysicalEnergy {
        circuit: CircuitParams<F>,
        initial: InitialEnergy<F>,
    },
    /// Euler-Maruyama on the Ito energy equation (scheme witness).
    ItoEnergyEuler {
        circuit: CircuitParams<F>,
        initial: InitialEnergy<F>,
    },
    /// Restart family with a final escape excursion.
    OverlineEnergy {
        circuit: CircuitParams<F>,
        initial: InitialEnergy<F>,
        schedule: ScheduleSpec<F>,
    },
    /// Restart family absorbed at zero after the last stopping time.
    UnderlineEnergy {
        circuit: CircuitParams<F>,
        initial: InitialEnergy<F>,
        schedule: ScheduleSpec<F>,
    },
    /// Running evaluation-point integral of the Wiener path against itself.
    AlphaIntegral { rule: AlphaRule<F> },
    /// Backward solution pair with Gaussian terminal data.
    Bsde {
        particle: ParticleParams<F>,
        psi: PsiSpec<F>,
    },
}

/// What to record from each path, and when.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    /// Energy value (energy-family experiments).
    Energy,
    /// Dissipated power `(2R/L) E`.
    Power,
    /// 1.0 when the energy is exactly zero at the node, else 0.0.
    IsZero,
    /// Running alpha-integral value.
    Integral,
    /// Terminal velocity draw of the backward pair.
    TerminalValue,
    /// `|V_T - F|` of the backward pair.
    TerminalGap,
    /// Diffusion of the backward pair at a time.
    Sigma,
    /// Velocity of the backward pair at a time.
    Velocity,
    /// Exponentially rescaled velocity `e^{gamma (t - T)} V_t` (a discrete
    /// martingale in t).
    MartingaleU,
}

impl ObservableKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObservableKind::Energy => "energy",
            ObservableKind::Power => "power",
            ObservableKind::IsZero => "is_zero",
            ObservableKind::Integral => "integral",
            ObservableKind::TerminalValue => "terminal_value",
            ObservableKind::TerminalGap => "terminal_gap",
            ObservableKind::Sigma => "sigma",
            ObservableKind::Velocity => "velocity",
            ObservableKind::MartingaleU => "martingale_u",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observable<F> {
    pub kind: ObservableKind,
    pub time: F,
}

impl<F: Real> Observable<F> {
    pub fn new(kind: ObservableKind, time: F) -> Self {
        Observable { kind, time }
    }

    pub fn label(&self) -> String {
        format!("{}@{}", self.kind.name(), self.time)
    }
}

/// Ensemble run parameters. `chunk_size` fixes the deterministic reduction
/// granularity and does not affect results; `max_failed_fraction` is the
/// budget of per-path construction failures tolerated before the whole run
/// fails.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub n_paths: usize,
    pub master_seed: u64,
    pub chunk_size: usize,
    pub max_failed_fraction: f64,
}

impl RunConfig {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        RunConfig {
            n_paths,
            master_seed,
            chunk_size: 256,
            max_failed_fraction: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ObservableStats<F> {
    pub kind: ObservableKind,
    pub time: F,
    pub stats: EnsembleStats<F>,
}

#[derive(Clone, Debug)]
pub struct EnsembleReport<F> {
    /// One entry per requested observable, in request order.
    pub entries: Vec<ObservableStats<F>>,
    pub n_paths: usize,
    pub failed_paths: usize,
}

impl<F: Real> EnsembleReport<F> {
    /// Statistics for the first entry of the given kind whose time matches
    /// within rounding.
    pub fn stats_at(&self, kind: ObservableKind, time: F) -> Option<&EnsembleStats<F>> {
        let tol = F::of(1e-9) * (F::one() + time.abs());
        self.entries
            .iter()
            .find(|e| e.kind == kind && (e.time - time).abs() <= tol)
            .map(|e| &e.stats)
    }
}

fn supported(experiment: &Experiment<impl Real>, kind: ObservableKind) -> bool {
    use ObservableKind::*;
    match experiment {
        Experiment::PhysicalEnergy { .. }
        | Experiment::ItoEnergyEuler { .. }
        | Experiment::OverlineEnergy { .. }
        | Experiment::UnderlineEnergy { .. } => matches!(kind, Energy | Power | IsZero),
        Experiment::AlphaIntegral { .. } => matches!(kind, Integral),
        Experiment::Bsde { .. } => matches!(
            kind,
            TerminalValue | TerminalGap | Sigma | Velocity | MartingaleU
        ),
    }
}

fn energy_observables<F: Real>(
    circuit: &CircuitParams<F>,
    values: &[F],
    observables: &[Observable<F>],
    nodes: &[usize],
) -> Vec<F> {
    let power_scale = F::of(2.0) * circuit.theta();
    observables
        .iter()
        .zip(nodes)
        .map(|(o, &node)| match o.kind {
            ObservableKind::Energy => values[node],
            ObservableKind::Power => power_scale * values[node],
            ObservableKind::IsZero => {
                if values[node] == F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            _ => unreachable!("validated upfront"),
        })
        .collect()
}

fn bsde_observables<F: Real>(
    particle: &ParticleParams<F>,
    pair: &BsdePair<F>,
    observables: &[Observable<F>],
    nodes: &[usize],
) -> Vec<F> {
    observables
        .iter()
        .zip(nodes)
        .map(|(o, &node)| match o.kind {
            ObservableKind::TerminalValue => pair.terminal_value(),
            ObservableKind::TerminalGap => pair.terminal_gap(),
            ObservableKind::Sigma => pair.sigma()[node],
            ObservableKind::Velocity => pair.velocity()[node],
            ObservableKind::MartingaleU => {
                let t = pair.grid().node(node);
                (particle.gamma() * (t - particle.t_end())).exp() * pair.velocity()[node]
            }
            _ => unreachable!("validated upfront"),
        })
        .collect()
}

fn run_path<F: Real>(
    experiment: &Experiment<F>,
    grid: &TimeGrid<F>,
    observables: &[Observable<F>],
    nodes: &[usize],
    seed: SeedSpec,
) -> Result<Vec<F>, CoreError<F>> {
    match experiment {
        Experiment::PhysicalEnergy { circuit, initial } => {
            let path = sample_wiener(grid, seed);
            let e0 = initial.realize(circuit, seed);
            let energy = ito_energy_explicit(circuit, e0, &path);
            Ok(energy_observables(
                circuit,
                energy.values(),
                observables,
                nodes,
            ))
        }
        Experiment::ItoEnergyEuler { circuit, initial } => {
            let path = sample_wiener(grid, seed);
            let e0 = initial.realize(circuit, seed);
            let traj = euler_maruyama(&energy_sde_ito(circuit), e0, &path);
            Ok(energy_observables(circuit, &traj, observables, nodes))
        }
        Experiment::OverlineEnergy {
            circuit,
            initial,
            schedule,
        } => {
            let path = sample_wiener(grid, seed);
            let e0 = initial.realize(circuit, seed);
            let realized = schedule.realize(seed);
            let (energy, _log) = build_overline(circuit, e0, &path, &realized)?;
            Ok(energy_observables(
                circuit,
                energy.values(),
                observables,
                nodes,
            ))
        }
        Experiment::UnderlineEnergy {
            circuit,
            initial,
            schedule,
        } => {
            let path = sample_wiener(grid, seed);
            let e0 = initial.realize(circuit, seed);
            let realized = schedule.realize(seed);
            let (energy, _log) = build_underline(circuit, e0, &path, &realized)?;
            Ok(energy_observables(
                circuit,
                energy.values(),
                observables,
                nodes,
            ))
        }
        Experiment::AlphaIntegral { rule } => {
            let path = sample_wiener(grid, seed);
            let prefix = alpha_integral_prefix(path.values(), &path, *rule)
                .expect("integrand sampled on its own grid");
            Ok(observables
                .iter()
                .zip(nodes)
                .map(|(_, &node)| prefix[node])
                .collect())
        }
        Experiment::Bsde { particle, psi } => {
            let path = sample_wiener(grid, seed);
            let pair = bsde::solve_pair(particle, psi, &path)?;
            Ok(bsde_observables(particle, &pair, observables, nodes))
        }
    }
}

fn validate_run<F: Real>(
    experiment: &Experiment<F>,
    grid: &TimeGrid<F>,
    observables: &[Observable<F>],
    run: &RunConfig,
) -> Result<Vec<usize>, CoreError<F>> {
    if run.n_paths == 0 {
        return Err(CoreError::invalid("run.n_paths", "must be >= 1"));
    }
    if run.chunk_size == 0 {
        return Err(CoreError::invalid("run.chunk_size", "must be >= 1"));
    }
    match experiment {
        Experiment::PhysicalEnergy { initial, .. }
        | Experiment::ItoEnergyEuler { initial, .. } => initial.validate()?,
        Experiment::OverlineEnergy { initial, .. } | Experiment::UnderlineEnergy { initial, .. } => {
            initial.validate()?
        }
        Experiment::AlphaIntegral { .. } => {}
        Experiment::Bsde { particle, psi } => bsde::validate_setup(particle, psi, grid)?,
    }
    let half_step = F::of(0.51) * grid.dt();
    observables
        .iter()
        .map(|o| {
            if !supported(experiment, o.kind) {
                return Err(CoreError::invalid(
                    "observable",
                    format!("{} not supported by this experiment", o.kind.name()),
                ));
            }
            let node = grid.nearest_node(o.time);
            if (grid.node(node) - o.time).abs() > half_step {
                return Err(CoreError::invalid(
                    "observable.time",
                    format!("{} lies outside the grid", o.label()),
                ));
            }
            Ok(node)
        })
        .collect()
}

/// Runs the experiment over `n_paths` seeds and accumulates one statistic per
/// requested observable. Deterministic in `(experiment, grid, observables,
/// run)`: per-path seeds are `(master_seed, path_index)` and the reduction
/// order is fixed by `chunk_size`, not by scheduling.
///
/// Per-path construction failures (e.g. a restart schedule outrunning the
/// grid) are counted; the run fails once they exceed the configured budget.
pub fn run_ensemble<F: Real>(
    experiment: &Experiment<F>,
    grid: &TimeGrid<F>,
    observables: &[Observable<F>],
    run: &RunConfig,
) -> Result<EnsembleReport<F>, CoreError<F>> {
    let nodes = validate_run(experiment, grid, observables, run)?;
    let n_chunks = run.n_paths.div_ceil(run.chunk_size);

    let chunk_results: Vec<(Vec<EnsembleStats<F>>, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * run.chunk_size;
            let hi = ((c + 1) * run.chunk_size).min(run.n_paths);
            let mut acc = vec![EnsembleStats::new(); observables.len()];
            let mut failed = 0usize;
            for p in lo..hi {
                let seed = SeedSpec::new(run.master_seed, p as u64);
                match run_path(experiment, grid, observables, &nodes, seed) {
                    Ok(values) => {
                        for (stats, value) in acc.iter_mut().zip(values) {
                            stats.push(value);
                        }
                    }
                    Err(_) => failed += 1,
                }
            }
            (acc, failed)
        })
        .collect();

    let mut totals = vec![EnsembleStats::new(); observables.len()];
    let mut failed_paths = 0usize;
    for (acc, failed) in chunk_results {
        for (total, stats) in totals.iter_mut().zip(&acc) {
            *total = total.merge(stats);
        }
        failed_paths += failed;
    }

    if failed_paths as f64 > run.max_failed_fraction * run.n_paths as f64 {
        return Err(CoreError::FailedPathBudget {
            failed: failed_paths,
            total: run.n_paths,
        });
    }

    Ok(EnsembleReport {
        entries: observables
            .iter()
            .zip(totals)
            .map(|(o, stats)| ObservableStats {
                kind: o.kind,
                time: o.time,
                stats,
            })
            .collect(),
        n_paths: run.n_paths,
        failed_paths,
    })
}

/// Fraction of underline-family paths whose energy is exactly zero at
/// `t_check`. Incomplete constructions are counted separately and excluded
/// from the fraction.
#[derive(Clone, Copy, Debug)]
pub struct ZeroFractionReport {
    pub zero_paths: usize,
    pub completed_paths: usize,
    pub incomplete_paths: usize,
}

impl ZeroFractionReport {
    pub fn fraction(&self) -> f64 {
        if self.completed_paths == 0 {
            0.0
        } else {
            self.zero_paths as f64 / self.completed_paths as f64
        }
    }
}

pub fn almost_sure_zero_fraction<F: Real>(
    circuit: &CircuitParams<F>,
    initial: InitialEnergy<F>,
    schedule: &ScheduleSpec<F>,
    grid: &TimeGrid<F>,
    t_check: F,
    run: &RunConfig,
) -> Result<ZeroFractionReport, CoreError<F>> {
    if schedule.family() != Family::Underline {
        return Err(CoreError::invalid(
            "schedule.family",
            "zero-fraction check applies to the underline family",
        ));
    }
    let experiment = Experiment::UnderlineEnergy {
        circuit: *circuit,
        initial,
        schedule: schedule.clone(),
    };
    // Incomplete paths are reported, not budgeted, here.
    let mut tolerant = *run;
    tolerant.max_failed_fraction = 1.0;
    let report = run_ensemble(
        &experiment,
        grid,
        &[Observable::new(ObservableKind::IsZero, t_check)],
        &tolerant,
    )?;
    let stats = report.entries[0].stats;
    let completed = stats.n() as usize;
    let zero_paths = (stats.mean() * F::of_usize(completed))
        .round()
        .to_usize()
        .unwrap_or(0);
    Ok(ZeroFractionReport {
        zero_paths,
        completed_paths: completed,
        incomplete_paths: report.failed_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_stats(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn welford_matches_two_pass_statistics() {
        let values: Vec<f64> = (0..1_000)
            .map(|k| ((k * 2_654_435_761u64.wrapping_mul(k as u64 + 1)) % 1_000) as f64 / 997.0)
            .collect();
        let mut stats = EnsembleStats::new();
        for &v in &values {
            stats.push(v);
        }
        let (mean, var) = naive_stats(&values);
        assert!((stats.mean() - mean).abs() < 1e-12);
        assert!((stats.variance() - var).abs() < 1e-12);
        assert_eq!(stats.n(), 1_000);
        assert_eq!(
            stats.min(),
            values.iter().cloned().fold(f64::INFINITY, f64::min)
        );
        assert_eq!(
            stats.max(),
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }

    #[test]
    fn merge_agrees_with_sequential_push() {
        let values: Vec<f64> = (0..301).map(|k| (k as f64).sin()).collect();
        let mut whole = EnsembleStats::new();
        for &v in &values {
            whole.push(v);
        }
        let blocks = [&values[..100], &values[100..250], &values[250..]];
        let merged = blocks
            .iter()
            .map(|b| {
                let mut s = EnsembleStats::new();
                for &v in *b {
                    s.push(v);
                }
                s
            })
            .fold(EnsembleStats::new(), |acc, s| acc.merge(&s));
        assert_eq!(merged.n(), whole.n());
        assert!((merged.mean() - whole.mean()).abs() <= 1e-12 * whole.mean().abs().max(1.0));
        assert!(
            (merged.variance() - whole.variance()).abs()
                <= 1e-12 * whole.variance().abs().max(1.0)
        );
        assert_eq!(merged.min(), whole.min());
        assert_eq!(merged.max(), whole.max());
    }

    #[test]
    fn merge_reordering_changes_results_negligibly() {
        let values: Vec<f64> = (0..2_000).map(|k| (k as f64 * 0.7).cos()).collect();
        let mk = |range: std::ops::Range<usize>| {
            let mut s = EnsembleStats::new();
            for &v in &values[range] {
                s.push(v);
            }
            s
        };
        let (a, b, c) = (mk(0..700), mk(700..1_300), mk(1_300..2_000));
        let abc = a.merge(&b).merge(&c);
        let cab = c.merge(&a).merge(&b);
        let bca = b.merge(&c.merge(&a));
        for other in [cab, bca] {
            assert!((abc.mean() - other.mean()).abs() <= 1e-9 * abc.mean().abs().max(1.0));
            assert!(
                (abc.variance() - other.variance()).abs()
                    <= 1e-9 * abc.variance().abs().max(1.0)
            );
        }
    }

    #[test]
    fn convergence_check_verdict_rule() {
        let mut stats = EnsembleStats::new();
        for k in 0..400 {
            stats.push(0.5 + 0.01 * ((k % 7) as f64 - 3.0));
        }
        let se = stats.standard_error();
        let pass = ConvergenceCheck::evaluate(&stats, stats.mean() + 2.9 * se, 3.0);
        assert!(pass.pass);
        let fail = ConvergenceCheck::evaluate(&stats, stats.mean() + 3.1 * se, 3.0);
        assert!(!fail.pass);
    }

    #[test]
    fn equipartition_check_examples() {
        // V = 2, R = 2: target V^2/(4R) = 0.5, equal to kb_tau/2 for kb_tau = 1.
        let params = CircuitParams::new(1.0, 2.0, 2.0, 1.0).unwrap();
        let mut good = EnsembleStats::new();
        let mut bad = EnsembleStats::new();
        for k in 0..10_000 {
            let jitter = 1e-4 * (((k * 37) % 100) as f64 - 49.5);
            good.push(0.5 + jitter);
            bad.push(0.9 + jitter);
        }
        let verdict = check_equipartition(&good, &params, 3.0).unwrap();
        assert!(verdict.check.pass);
        assert!(verdict.target_equals_half_kbtau);
        let verdict = check_equipartition(&bad, &params, 3.0).unwrap();
        assert!(!verdict.check.pass);

        let mut tiny = EnsembleStats::new();
        tiny.push(0.5);
        assert!(matches!(
            check_equipartition(&tiny, &params, 3.0),
            Err(CoreError::Underpowered { .. })
        ));
    }

    #[test]
    fn single_path_run_equals_direct_evaluation() {
        let circuit = CircuitParams::new(1.0, 1.0, 2.0f64.sqrt(), 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 500).unwrap();
        let exp = Experiment::PhysicalEnergy {
            circuit,
            initial: InitialEnergy::Fixed(0.25),
        };
        let obs = [
            Observable::new(ObservableKind::Energy, 5.0),
            Observable::new(ObservableKind::Power, 5.0),
        ];
        let report = run_ensemble(&exp, &grid, &obs, &RunConfig::new(1, 99)).unwrap();

        let path = sample_wiener(&grid, SeedSpec::new(99, 0));
        let energy = ito_energy_explicit(&circuit, 0.25, &path);
        let e = energy.value_at(500);
        assert_eq!(report.entries[0].stats.mean(), e);
        assert_eq!(report.entries[0].stats.n(), 1);
        assert_eq!(report.entries[1].stats.mean(), 2.0 * e);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let circuit = CircuitParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 200).unwrap();
        let exp = Experiment::PhysicalEnergy {
            circuit,
            initial: InitialEnergy::Equilibrium,
        };
        let obs = [Observable::new(ObservableKind::Energy, 2.0)];
        let run = RunConfig::new(2_000, 7);
        let a = run_ensemble(&exp, &grid, &obs, &run).unwrap();
        let b = run_ensemble(&exp, &grid, &obs, &run).unwrap();
        assert_eq!(a.entries[0].stats, b.entries[0].stats);
    }

    #[test]
    fn observable_list_does_not_change_per_path_trajectories() {
        let circuit = CircuitParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 200).unwrap();
        let exp = Experiment::PhysicalEnergy {
            circuit,
            initial: InitialEnergy::Fixed(0.0),
        };
        let run = RunConfig::new(500, 13);
        let only = run_ensemble(
            &exp,
            &grid,
            &[Observable::new(ObservableKind::Energy, 2.0)],
            &run,
        )
        .unwrap();
        let many = run_ensemble(
            &exp,
            &grid,
            &[
                Observable::new(ObservableKind::IsZero, 1.0),
                Observable::new(ObservableKind::Energy, 2.0),
                Observable::new(ObservableKind::Power, 2.0),
            ],
            &run,
        )
        .unwrap();
        assert_eq!(
            only.entries[0].stats,
            many.entries[1].stats,
            "adding observables must not disturb the energy statistic"
        );
    }

    #[test]
    fn master_seed_changes_results() {
        let circuit = CircuitParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let exp = Experiment::PhysicalEnergy {
            circuit,
            initial: InitialEnergy::Fixed(0.0),
        };
        let obs = [Observable::new(ObservableKind::Energy, 1.0)];
        let a = run_ensemble(&exp, &grid, &obs, &RunConfig::new(200, 1)).unwrap();
        let b = run_ensemble(&exp, &grid, &obs, &RunConfig::new(200, 2)).unwrap();
        assert_ne!(a.entries[0].stats.mean(), b.entries[0].stats.mean());
    }

    #[test]
    fn unsupported_observables_are_rejected() {
        let circuit = CircuitParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let exp = Experiment::PhysicalEnergy {
            circuit,
            initial: InitialEnergy::Fixed(0.0),
        };
        let bad = [Observable::new(ObservableKind::Sigma, 1.0)];
        assert!(run_ensemble(&exp, &grid, &bad, &RunConfig::new(10, 1)).is_err());
        let off_grid = [Observable::new(ObservableKind::Energy, 55.0)];
        assert!(run_ensemble(&exp, &grid, &off_grid, &RunConfig::new(10, 1)).is_err());
    }

    #[test]
    fn failed_path_budget_is_enforced() {
        //

        // V = 0 with a positive start never hits zero, so every overline path
        // is incomplete.
        let circuit = CircuitParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let exp = Experiment::OverlineEnergy {
            circuit,
            initial: InitialEnergy::Fixed(1.0),
            schedule: ScheduleSpec::overline(
                vec![DurationSpec::Fixed(0.1)],
                vec![DurationSpec::Fixed(0.1)],
            )
            .unwrap(),
        };
        let obs = [Observable::new(ObservableKind::Energy, 1.0)];
        match run_ensemble(&exp, &grid, &obs, &RunConfig::new(50, 3)) {
            Err(CoreError::FailedPathBudget { failed, total }) => {
                assert_eq!(failed, 50);
                assert_eq!(total, 50);
            }
            other => panic!("expected budget breach, got {other:?}"),
        }
    }

    #[test]
    fn schedule_spec_realization_is_deterministic_and_positive() {
        let spec = ScheduleSpec::overline(
            vec![
                DurationSpec::Exponential { rate: 2.0 },
                DurationSpec::Fixed(0.5),
            ],
            vec![
                DurationSpec::Fixed(0.0),
                DurationSpec::Exponential { rate: 1.0 },
            ],
        )
        .unwrap();
        let a = spec.realize(SeedSpec::new(5, 17));
        let b = spec.realize(SeedSpec::new(5, 17));
        assert_eq!(a, b);
        let c = spec.realize(SeedSpec::new(5, 18));
        assert_ne!(a.lambdas()[0], c.lambdas()[0]);
        assert!(a.lambdas().iter().all(|&l| l > 0.0));
        assert_eq!(a.lambdas()[1], 0.5);
        assert_eq!(a.mus()[0], 0.0);
    }

    #[test]
    fn schedule_spec_validates_like_the_realized_type() {
        assert!(ScheduleSpec::overline(vec![DurationSpec::Fixed(0.5)], vec![]).is_err());
        assert!(ScheduleSpec::overline(
            vec![DurationSpec::Fixed(0.0)],
            vec![DurationSpec::Fixed(0.0)]
        )
        .is_err());
        assert!(ScheduleSpec::<f64>::underline(
            vec![DurationSpec::Exponential { rate: -1.0 }],
            vec![]
        )
        .is_err());
    }
}
