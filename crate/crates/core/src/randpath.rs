//! Reproducible random streams, Wiener-path sampling, and the noisy-circuit
//! current.
//!
//! Every random quantity is a pure function of `(master_seed, path_index,
//! stream, step)`, so ensembles reproduce bit-for-bit regardless of how work
//! is scheduled across threads.

use crate::error::CoreError;
use crate::real::Real;

const SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const PATH_SALT: u64 = 0xa076_1d64_78bd_642f;
const STREAM_SALT: u64 = 0xe703_7ed1_a0b4_28db;
const STEP_SALT: u64 = 0x8ebc_6af0_9c88_c6e3;

/// SplitMix64 finalizer; bijective avalanche mix.
#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one ensemble member. Distinct `(master_seed, path_index)` pairs
/// yield statistically independent streams; identical pairs yield bit-identical
/// streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        SeedSpec {
            master_seed,
            path_index,
        }
    }
}

/// Named substreams hanging off one [`SeedSpec`], so that e.g. Wiener
/// increments and restart-duration draws never share counter slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    WienerIncrements = 0,
    OuChain = 1,
    RestartLambda = 2,
    RestartMu = 3,
    InitialCondition = 4,
}

/// Counter-based generator: draw `k` of a stream is addressed directly, with
/// no sequential state to carry or synchronize.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: SeedSpec, stream: Stream) -> Self {
        let k = mix64(seed.master_seed ^ SEED_SALT);
        let k = mix64(k ^ mix64(seed.path_index.wrapping_add(PATH_SALT)));
        let k = mix64(k ^ mix64((stream as u64).wrapping_add(STREAM_SALT)));
        CounterRng { key: k }
    }

    #[inline(always)]
    pub fn u64_at(&self, step: u64) -> u64 {
        mix64(self.key ^ mix64(step.wrapping_add(STEP_SALT)))
    }

    /// Uniform draw in the open interval (0, 1), 53-bit resolution.
    #[inline(always)]
    pub fn uniform_at(&self, step: u64) -> f64 {
        (((self.u64_at(step) >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw `i` via Box-Muller; consumes counter slots
    /// `2i` and `2i + 1`.
    #[inline(always)]
    pub fn normal_at(&self, i: u64) -> f64 {
        let u1 = self.uniform_at(i.wrapping_mul(2));
        let u2 = self.uniform_at(i.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Exponential draw `i` with the given rate.
    #[inline(always)]
    pub fn exponential_at(&self, i: u64, rate: f64) -> f64 {
        -self.uniform_at(i).ln() / rate
    }
}

/// Uniform time grid. Node `k` is `t_start + k * dt` computed directly, never
/// by repeated addition, so node times carry no cumulative rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<F> {
    t_start: F,
    dt: F,
    n_steps: usize,
}

impl<F: Real> TimeGrid<F> {
    pub fn new(t_start: F, dt: F, n_steps: usize) -> Result<Self, CoreError<F>> {
        if !t_start.is_finite() {
            return Err(CoreError::invalid("grid.t_start", "must be finite"));
        }
        if !(dt > F::zero()) || !dt.is_finite() {
            return Err(CoreError::invalid("grid.dt", "must be > 0 and finite"));
        }
        if n_steps == 0 {
            return Err(CoreError::invalid("grid.n_steps", "must be >= 1"));
        }
        Ok(TimeGrid {
            t_start,
            dt,
            n_steps,
        })
    }

    /// Grid over `[0, horizon]` with the given step.
    pub fn from_horizon(horizon: F, dt: F) -> Result<Self, CoreError<F>> {
        if !(horizon > F::zero()) || !horizon.is_finite() {
            return Err(CoreError::invalid("grid.horizon", "must be > 0 and finite"));
        }
        if !(dt > F::zero()) || !dt.is_finite() {
            return Err(CoreError::invalid("grid.dt", "must be > 0 and finite"));
        }
        let n = (horizon / dt)
            .round()
            .to_usize()
            .ok_or_else(|| CoreError::invalid("grid.dt", "horizon/dt overflows a count"))?;
        TimeGrid::new(F::zero(), dt, n.max(1))
    }

    pub fn t_start(&self) -> F {
        self.t_start
    }

    pub fn dt(&self) -> F {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn node(&self, k: usize) -> F {
        self.t_start + F::of_usize(k) * self.dt
    }

    pub fn t_end(&self) -> F {
        self.node(self.n_steps)
    }

    /// Index of the grid node nearest to `t`, clamped to the grid.
    pub fn nearest_node(&self, t: F) -> usize {
        let idx = ((t - self.t_start) / self.dt).round();
        if idx <= F::zero() {
            0
        } else {
            idx.to_usize().unwrap_or(self.n_steps).min(self.n_steps)
        }
    }

    pub fn times(&self) -> impl Iterator<Item = F> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }
}

/// One sampled Brownian path on a uniform grid.
///
/// `values[0] = 0` and `values[k + 1] - values[k] == increments[k]` holds
/// bit-exactly: increments are recomputed as differences of the running sum.
#[derive(Clone, Debug)]
pub struct WienerPath<F> {
    grid: TimeGrid<F>,
    increments: Vec<F>,
    values: Vec<F>,
}

impl<F: Real> WienerPath<F> {
    /// Builds a path from raw increments (tests, refinement studies).
    pub fn from_increments(grid: TimeGrid<F>, raw: Vec<F>) -> Result<Self, CoreError<F>> {
        if raw.len() != grid.n_steps() {
            return Err(CoreError::GridMismatch {
                expected: grid.n_steps(),
                got: raw.len(),
            });
        }
        let mut values = Vec::with_capacity(grid.n_nodes());
        values.push(F::zero());
        let mut w = F::zero();
        for &d in &raw {
            w = w + d;
            values.push(w);
        }
        let increments = (0..grid.n_steps())
            .map(|k| values[k + 1] - values[k])
            .collect();
        Ok(WienerPath {
            grid,
            increments,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    pub fn increments(&self) -> &[F] {
        &self.increments
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    /// The same Brownian motion on a grid coarsened by `factor`: coarse
    /// increments are block sums of fine ones.
    pub fn coarsen(&self, factor: usize) -> Result<Self, CoreError<F>> {
        if factor == 0 || self.grid.n_steps() % factor != 0 {
            return Err(CoreError::invalid(
                "coarsen.factor",
                "must divide the number of steps",
            ));
        }
        let n = self.grid.n_steps() / factor;
        let dt = self.grid.dt() * F::of_usize(factor);
        let grid = TimeGrid::new(self.grid.t_start(), dt, n)?;
        let raw = (0..n)
            .map(|k| {
                let mut s = F::zero();
                for j in 0..factor {
                    s = s + self.increments[k * factor + j];
                }
                s
            })
            .collect();
        WienerPath::from_increments(grid, raw)
    }
}

/// Samples a Wiener path: each increment is Normal(0, dt). Deterministic in
/// `(grid, seed)`.
pub fn sample_wiener<F: Real>(grid: &TimeGrid<F>, seed: SeedSpec) -> WienerPath<F> {
    let rng = CounterRng::new(seed, Stream::WienerIncrements);
    let sqrt_dt = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.n_nodes());
    values.push(F::zero());
    let mut w = F::zero();
    for k in 0..grid.n_steps() {
        w = w + F::of(rng.normal_at(k as u64)) * sqrt_dt;
        values.push(w);
    }
    let increments = (0..grid.n_steps())
        .map(|k| values[k + 1] - values[k])
        .collect();
    WienerPath {
        grid: *grid,
        increments,
        values,
    }
}

/// Electrical parameters of the noisy circuit: self-inductance, resistance,
/// noise amplitude, and thermal energy (k_B times temperature, as one number).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams<F> {
    l: F,
    r: F,
    v: F,
    kb_tau: F,
}

impl<F: Real> CircuitParams<F> {
    pub fn new(l: F, r: F, v: F, kb_tau: F) -> Result<Self, CoreError<F>> {
        if !(l > F::zero()) || !l.is_finite() {
            return Err(CoreError::invalid("circuit.l", "must be > 0 and finite"));
        }
        if !(r > F::zero()) || !r.is_finite() {
            return Err(CoreError::invalid("circuit.r", "must be > 0 and finite"));
        }
        if !(v >= F::zero()) || !v.is_finite() {
            return Err(CoreError::invalid("circuit.v", "must be >= 0 and finite"));
        }
        if !(kb_tau > F::zero()) || !kb_tau.is_finite() {
            return Err(CoreError::invalid(
                "circuit.kb_tau",
                "must be > 0 and finite",
            ));
        }
        Ok(CircuitParams { l, r, v, kb_tau })
    }

    pub fn l(&self) -> F {
        self.l
    }

    pub fn r(&self) -> F {
        self.r
    }

    pub fn v(&self) -> F {
        self.v
    }

    pub fn kb_tau(&self) -> F {
        self.kb_tau
    }

    /// Decay rate R/L of the current.
    pub fn theta(&self) -> F {
        self.r / self.l
    }

    /// Stationary variance V^2 / (2 R L) of the current.
    pub fn stationary_current_variance(&self) -> F {
        self.v * self.v / (F::of(2.0) * self.r * self.l)
    }
}

/// Exact one-step transition of the circuit current: the conditional law of
/// the linear SDE `L dI = -R I dt + V dB` over a step of length `dt` is
/// `Normal(a I, b^2)` with `a = exp(-(R/L) dt)` and
/// `b = V sqrt((1 - exp(-2 R dt / L)) / (2 R L))`.
pub fn ou_exact_step<F: Real>(i_k: F, params: &CircuitParams<F>, dt: F, normal_draw: F) -> F {
    debug_assert!(dt > F::zero());
    let theta = params.theta();
    let a = (-theta * dt).exp();
    let b = params.v()
        * ((F::one() - (-F::of(2.0) * theta * dt).exp()) / (F::of(2.0) * params.r() * params.l()))
            .sqrt();
    a * i_k + b * normal_draw
}

/// Simulates the current by chaining the exact transition with fresh draws
/// from the seed's dedicated stream. No discretization error.
pub fn simulate_current_exact<F: Real>(
    params: &CircuitParams<F>,
    i0: F,
    grid: &TimeGrid<F>,
    seed: SeedSpec,
) -> Vec<F> {
    let rng = CounterRng::new(seed, Stream::OuChain);
    let theta = params.theta();
    let dt = grid.dt();
    let a = (-theta * dt).exp();
    let b = params.v()
        * ((F::one() - (-F::of(2.0) * theta * dt).exp()) / (F::of(2.0) * params.r() * params.l()))
            .sqrt();
    let mut out = Vec::with_capacity(grid.n_nodes());
    let mut i = i0;
    out.push(i);
    for k in 0..grid.n_steps() {
        i = a * i + b * F::of(rng.normal_at(k as u64));
        out.push(i);
    }
    out
}

/// Drives the current along explicit Wiener increments with the exact decay
/// propagator: `I_{k+1} = exp(-(R/L) dt) (I_k + (V/L) dB_k)`. This reproduces
/// the left-point discretization of the closed-form solution node for node,
/// which downstream consistency checks rely on.
pub fn simulate_current_from_path<F: Real>(
    params: &CircuitParams<F>,
    i0: F,
    path: &WienerPath<F>,
) -> Vec<F> {
    let theta = params.theta();
    let a = (-theta * path.grid().dt()).exp();
    let c = params.v() / params.l();
    let mut out = Vec::with_capacity(path.grid().n_nodes());
    let mut i = i0;
    out.push(i);
    for &db in path.increments() {
        i = a * (i + c * db);
        out.push(i);
    }
    out
}
