//! Circuit-energy solutions: the physical Ito path, the dissipated power, and
//! the two families of pinned-restart (spurious Stratonovich) solutions built
//! from zero-hitting stopping times.
//!
//! All constructions live on one grid and consume one Wiener path: stopping
//! times are realized on-grid (a crossing found in `(t_k, t_{k+1}]` snaps to
//! node `k + 1`), and excursion integrals restart from that node using the
//! same increments.

use crate::error::CoreError;
use crate::randpath::{CircuitParams, TimeGrid, WienerPath};
use crate::real::Real;

/// Energy trajectory `E_t = L I_t^2 / 2` on a grid; values are nonnegative.
#[derive(Clone, Debug)]
pub struct EnergyPath<F> {
    grid: TimeGrid<F>,
    values: Vec<F>,
}

impl<F: Real> EnergyPath<F> {
    pub fn from_values(grid: TimeGrid<F>, values: Vec<F>) -> Result<Self, CoreError<F>> {
        if values.len() != grid.n_nodes() {
            return Err(CoreError::GridMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if values.iter().any(|&e| !(e >= F::zero()) || !e.is_finite()) {
            return Err(CoreError::invalid(
                "energy.values",
                "must be nonnegative and finite",
            ));
        }
        Ok(EnergyPath { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn value_at(&self, node: usize) -> F {
        self.values[node]
    }
}

/// Fluctuation-dissipation amplitude of the circuit noise:
/// `V = sqrt(2 k_B tau R)`.
pub fn fdr_voltage<F: Real>(kb_tau: F, r: F) -> F {
    debug_assert!(kb_tau > F::zero() && r > F::zero());
    (F::of(2.0) * kb_tau * r).sqrt()
}

/// Closed-form mean energy:
/// `V^2/(4R) + (E[E_0] - V^2/(4R)) exp(-2 R t / L)`, tending to `V^2/(4R)`.
pub fn mean_energy<F: Real>(params: &CircuitParams<F>, mean_e0: F, t: F) -> F {
    debug_assert!(t >= F::zero());
    let equilibrium = params.v() * params.v() / (F::of(4.0) * params.r());
    equilibrium + (mean_e0 - equilibrium) * (-F::of(2.0) * params.theta() * t).exp()
}

/// Signed current of the physical solution, node by node:
/// `x_k = exp(-theta k dt) sqrt(2 E0 / L) + (V/L) J_k`, where `J` is the
/// left-point discretization of the decayed stochastic convolution,
/// `J_{k+1} = exp(-theta dt) (J_k + dB_k)`.
fn physical_current<'a, F: Real>(
    params: &CircuitParams<F>,
    e0: F,
    path: &'a WienerPath<F>,
) -> impl Iterator<Item = F> + 'a {
    let grid = *path.grid();
    let theta = params.theta();
    let dt = grid.dt();
    let a = (-theta * dt).exp();
    let cv = params.v() / params.l();
    let s0 = (F::of(2.0) * e0 / params.l()).sqrt();
    let increments = path.increments();
    let mut j = F::zero();
    let mut k = 0usize;
    std::iter::from_fn(move || {
        if k > grid.n_steps() {
            return None;
        }
        let x = if s0 == F::zero() {
            cv * j
        } else {
            (-theta * F::of_usize(k) * dt).exp() * s0 + cv * j
        };
        if k < grid.n_steps() {
            j = a * (j + increments[k]);
        }
        k += 1;
        Some(x)
    })
}

/// Discretized closed-form solution of the Ito energy equation:
/// `E_k = L/2 [exp(-theta t_k) sqrt(2 E0/L) + (V/L) J_k]^2` with the inner
/// stochastic integral taken with the left-point (Ito) rule on the path grid.
pub fn ito_energy_explicit<F: Real>(
    params: &CircuitParams<F>,
    e0: F,
    path: &WienerPath<F>,
) -> EnergyPath<F> {
    assert!(e0 >= F::zero(), "initial energy must be nonnegative");
    let half_l = F::of(0.5) * params.l();
    let values = physical_current(params, e0, path)
        .map(|x| half_l * x * x)
        .collect();
    EnergyPath {
        grid: *path.grid(),
        values,
    }
}

/// Dissipated power `D_t = R I_t^2 = (2R/L) E_t`, pointwise.
pub fn power_from_energy<F: Real>(params: &CircuitParams<F>, energy: &EnergyPath<F>) -> Vec<F> {
    let scale = F::of(2.0) * params.theta();
    energy.values().iter().map(|&e| scale * e).collect()
}

/// A detected zero of a signed trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroHit<F> {
    /// Index `k` of the segment `(t_k, t_{k+1}]` containing the zero (equals
    /// `node` for an exact on-node zero).
    pub segment: usize,
    /// Grid node the hit snaps to for path surgery.
    pub node: usize,
    /// Linear-interpolation estimate of the crossing time.
    pub time: F,
}

/// First zero of the trajectory at or after `from_index`: either an exact
/// on-node zero, or a sign change across a segment. Returns `None` if no zero
/// occurs before the end of the grid.
pub fn detect_zero_hit<F: Real>(
    trajectory: &[F],
    grid: &TimeGrid<F>,
    from_index: usize,
) -> Option<ZeroHit<F>> {
    debug_assert!(trajectory.len() <= grid.n_nodes());
    if trajectory.is_empty() {
        return None;
    }
    let last = trajectory.len() - 1;
    let dt = grid.dt();
    for k in from_index..last {
        let x0 = trajectory[k];
        let x1 = trajectory[k + 1];
        if x0 == F::zero() {
            return Some(ZeroHit {
                segment: k,
                node: k,
                time: grid.node(k),
            });
        }
        if x0.signum() != x1.signum() {
            // Crossing in (t_k, t_{k+1}]; x1 == 0 lands exactly on t_{k+1}.
            let frac = x0 / (x0 - x1);
            return Some(ZeroHit {
                segment: k,
                node: k + 1,
                time: grid.node(k) + frac * dt,
            });
        }
    }
    if from_index <= last && trajectory[last] == F::zero() && from_index == last {
        return Some(ZeroHit {
            segment: last,
            node: last,
            time: grid.node(last),
        });
    }
    None
}

/// Which restart family a schedule describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Keeps a final escape excursion after the last pinned interval; its
    /// mean energy re-equilibrates to `V^2/(4R)`.
    Overline,
    /// No escape: the path is absorbed at zero after the last stopping time.
    Underline,
}

/// Realized restart data: `N + 1` positive waiting times `lambda_0..lambda_N`
/// opening each zero-search window, and the pinned durations `mu_n`
/// (`mu_1..mu_{N+1}` for the overline family, `mu_1..mu_N` for the underline
/// family).
#[derive(Clone, Debug, PartialEq)]
pub struct RestartSchedule<F> {
    family: Family,
    lambdas: Vec<F>,
    mus: Vec<F>,
}

impl<F: Real> RestartSchedule<F> {
    pub fn overline(lambdas: Vec<F>, mus: Vec<F>) -> Result<Self, CoreError<F>> {
        if lambdas.is_empty() || mus.len() != lambdas.len() {
            return Err(CoreError::invalid(
                "schedule.mus",
                "overline family needs one mu per lambda (N+1 of each)",
            ));
        }
        Self::validated(Family::Overline, lambdas, mus)
    }

    pub fn underline(lambdas: Vec<F>, mus: Vec<F>) -> Result<Self, CoreError<F>> {
        if lambdas.is_empty() || mus.len() + 1 != lambdas.len() {
            return Err(CoreError::invalid(
                "schedule.mus",
                "underline family needs N mus for N+1 lambdas",
            ));
        }
        Self::validated(Family::Underline, lambdas, mus)
    }

    fn validated(family: Family, lambdas: Vec<F>, mus: Vec<F>) -> Result<Self, CoreError<F>> {
        if lambdas.iter().any(|&l| !(l > F::zero()) || !l.is_finite()) {
            return Err(CoreError::invalid(
                "schedule.lambdas",
                "must be positive and finite",
            ));
        }
        if mus.iter().any(|&m| !(m >= F::zero()) || !m.is_finite()) {
            return Err(CoreError::invalid(
                "schedule.mus",
                "must be nonnegative and finite",
            ));
        }
        Ok(RestartSchedule {
            family,
            lambdas,
            mus,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Number of interior excursions N.
    pub fn interior_excursions(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn lambdas(&self) -> &[F] {
        &self.lambdas
    }

    pub fn mus(&self) -> &[F] {
        &self.mus
    }
}

/// Realized stopping data of a restart construction.
#[derive(Clone, Debug)]
pub struct StoppingLog<F> {
    /// Realized stopping times `T_1..` (grid-node times).
    pub stopping_times: Vec<F>,
    /// Grid node of each stopping time.
    pub stopping_nodes: Vec<usize>,
    /// Pinned intervals `[T_n, T_n + mu_n]` as realized times.
    pub zero_intervals: Vec<(F, F)>,
    /// The same intervals as inclusive node ranges.
    pub zero_node_ranges: Vec<(usize, usize)>,
}

impl<F> Default for StoppingLog<F> {
    fn default() -> Self {
        StoppingLog {
            stopping_times: Vec::new(),
            stopping_nodes: Vec::new(),
            zero_intervals: Vec::new(),
            zero_node_ranges: Vec::new(),
        }
    }
}

/// Overline-family solution: physical until `T_1`, pinned at zero for `mu_n`
/// after each stopping time, restarted excursions in between, and a final
/// escape excursion that runs to the end of the grid.
///
/// Fails with an incomplete-construction error (carrying the partial log)
/// when the grid ends mid-schedule. The degenerate case where the very first
/// search window never opens inside the grid returns the physical solution
/// with an empty log.
pub fn build_overline<F: Real>(
    params: &CircuitParams<F>,
    e0: F,
    path: &WienerPath<F>,
    schedule: &RestartSchedule<F>,
) -> Result<(EnergyPath<F>, StoppingLog<F>), CoreError<F>> {
    if schedule.family() != Family::Overline {
        return Err(CoreError::invalid(
            "schedule.family",
            "build_overline needs an overline schedule",
        ));
    }
    build_family(params, e0, path, schedule)
}

/// Underline-family solution: same surgery as [`build_overline`] but with no
/// final escape; after the last stopping time the path is identically zero.
pub fn build_underline<F: Real>(
    params: &CircuitParams<F>,
    e0: F,
    path: &WienerPath<F>,
    schedule: &RestartSchedule<F>,
) -> Result<(EnergyPath<F>, StoppingLog<F>), CoreError<F>> {
    if schedule.family() != Family::Underline {
        return Err(CoreError::invalid(
            "schedule.family",
            "build_underline needs an underline schedule",
        ));
    }
    build_family(params, e0, path, schedule)
}

fn build_family<F: Real>(
    params: &CircuitParams<F>,
    e0: F,
    path: &WienerPath<F>,
    schedule: &RestartSchedule<F>,
) -> Result<(EnergyPath<F>, StoppingLog<F>), CoreError<F>> {
    if !(e0 >= F::zero()) || !e0.is_finite() {
        return Err(CoreError::invalid("e0", "must be nonnegative and finite"));
    }
    let grid = *path.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let theta = params.theta();
    let a = (-theta * dt).exp();
    let cv = params.v() / params.l();
    let half_l = F::of(0.5) * params.l();
    let increments = path.increments();
    let needed = schedule.lambdas().len();

    let mut values = vec![F::zero(); n + 1];
    let mut log = StoppingLog::default();

    // First segment index whose crossings count for a search window opening
    // at `time`; floor with a tolerance so on-node thresholds stay exact.
    let window_segment = |time: F| -> usize {
        let idx = ((time - grid.t_start()) / dt).to_f64().unwrap_or(f64::MAX);
        (idx + 1e-9).floor().max(0.0) as usize
    };
    // First node at or after `time`.
    let node_at_or_after = |time: F| -> usize {
        let idx = ((time - grid.t_start()) / dt).to_f64().unwrap_or(f64::MAX);
        (idx - 1e-9).ceil().max(0.0) as usize
    };

    // Phase one: physical solution, searching for T_1 once the window opens.
    // The current iterator matches ito_energy_explicit operation for
    // operation, so the no-stopping degenerate case is bit-identical to it.
    let first_window = window_segment(grid.t_start() + schedule.lambdas()[0]);
    let mut hit_node: Option<usize> = None;
    {
        let mut current = physical_current(params, e0, path);
        let mut x_prev = current.next().expect("grid has at least one node");
        values[0] = half_l * x_prev * x_prev;
        for (k, x_next) in current.enumerate() {
            if k >= first_window && (x_next == F::zero() || x_prev * x_next < F::zero()) {
                hit_node = Some(k + 1);
                break;
            }
            values[k + 1] = half_l * x_next * x_next;
            x_prev = x_next;
        }
    }
    let mut hit = match hit_node {
        Some(h) => h,
        None if first_window >= n => {
            // The first window never opened: T_1 was never sampled and the
            // output is the physical solution on the whole grid.
            return Ok((EnergyPath { grid, values }, log));
        }
        None => {
            return Err(CoreError::IncompleteConstruction {
                log,
                realized: 0,
                needed,
            })
        }
    };

    loop {
        log.stopping_nodes.push(hit);
        log.stopping_times.push(grid.node(hit));
        let realized = log.stopping_times.len();
        let is_last = realized == needed;

        if is_last && schedule.family() == Family::Underline {
            // Absorbed: zero from the last stopping time onward.
            for v in &mut values[hit..=n] {
                *v = F::zero();
            }
            log.zero_node_ranges.push((hit, n));
            log.zero_intervals.push((grid.node(hit), grid.node(n)));
            return Ok((EnergyPath { grid, values }, log));
        }

        let mu = schedule.mus()[realized - 1];
        let restart = node_at_or_after(grid.node(hit) + mu);
        if restart > n {
            for v in &mut values[hit..=n] {
                *v = F::zero();
            }
            log.zero_node_ranges.push((hit, n));
            log.zero_intervals.push((grid.node(hit), grid.node(n)));
            return Err(CoreError::IncompleteConstruction {
                log,
                realized,
                needed,
            });
        }
        for v in &mut values[hit..=restart] {
            *v = F::zero();
        }
        log.zero_node_ranges.push((hit, restart));
        log.zero_intervals.push((grid.node(hit), grid.node(restart)));

        if is_last {
            // Overline escape: one more excursion, no further stopping.
            let mut j = F::zero();
            for k in restart..n {
                j = a * (j + increments[k]);
                let x = cv * j;
                values[k + 1] = half_l * x * x;
            }
            return Ok((EnergyPath { grid, values }, log));
        }

        // Interior excursion: restart the integral at zero and search for the
        // next stopping time once its window opens.
        let window = window_segment(grid.node(restart) + schedule.lambdas()[realized]);
        let mut j = F::zero();
        let mut x_prev = F::zero();
        let mut next_hit: Option<usize> = None;
        for k in restart..n {
            j = a * (j + increments[k]);
            let x_next = cv * j;
            if k >= window && (x_next == F::zero() || x_prev * x_next < F::zero()) {
                next_hit = Some(k + 1);
                break;
            }
            values[k + 1] = half_l * x_next * x_next;
            x_prev = x_next;
        }
        match next_hit {
            Some(h) => hit = h,
            None => {
                return Err(CoreError::IncompleteConstruction {
                    log,
                    realized,
                    needed,
                })
            }
        }
    }
}
