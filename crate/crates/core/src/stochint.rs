//! Discrete stochastic integrals and forward SDE schemes.
//!
//! The evaluation-point family interpolates between the Ito rule (left point,
//! `alpha = 0`) and beyond; `alpha = 1/2` is the Stratonovich rule. Forward
//! integration uses Euler-Maruyama for Ito equations and the derivative-free
//! Heun predictor-corrector for Stratonovich ones.

use std::marker::PhantomData;

use crate::error::CoreError;
use crate::randpath::{CircuitParams, WienerPath};
use crate::real::Real;

/// Evaluation-point rule for discrete Riemann-Stieltjes sums against a noise
/// path: on each increment the integrand is taken as
/// `alpha * f_{k+1} + (1 - alpha) * f_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaRule<F> {
    alpha: F,
}

impl<F: Real> AlphaRule<F> {
    pub fn new(alpha: F) -> Result<Self, CoreError<F>> {
        if !(alpha >= F::zero() && alpha <= F::one()) {
            return Err(CoreError::invalid("alpha", "must lie in [0, 1]"));
        }
        Ok(AlphaRule { alpha })
    }

    /// Left-point rule.
    pub fn ito() -> Self {
        AlphaRule { alpha: F::zero() }
    }

    /// Midpoint-value rule.
    pub fn stratonovich() -> Self {
        AlphaRule { alpha: F::of(0.5) }
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }
}

/// `sum_k (alpha f_{k+1} + (1 - alpha) f_k) (B_{k+1} - B_k)`.
///
/// The integrand must be sampled on the integrator's grid (same node count).
pub fn alpha_integral<F: Real>(
    integrand: &[F],
    integrator: &WienerPath<F>,
    rule: AlphaRule<F>,
) -> Result<F, CoreError<F>> {
    if integrand.len() != integrator.values().len() {
        return Err(CoreError::GridMismatch {
            expected: integrator.values().len(),
            got: integrand.len(),
        });
    }
    let a = rule.alpha();
    let b = F::one() - a;
    let mut sum = F::zero();
    for (k, &db) in integrator.increments().iter().enumerate() {
        sum = sum + (a * integrand[k + 1] + b * integrand[k]) * db;
    }
    Ok(sum)
}

/// Running values of [`alpha_integral`] at every grid node (node 0 is 0).
pub fn alpha_integral_prefix<F: Real>(
    integrand: &[F],
    integrator: &WienerPath<F>,
    rule: AlphaRule<F>,
) -> Result<Vec<F>, CoreError<F>> {
    if integrand.len() != integrator.values().len() {
        return Err(CoreError::GridMismatch {
            expected: integrator.values().len(),
            got: integrand.len(),
        });
    }
    let a = rule.alpha();
    let b = F::one() - a;
    let mut out = Vec::with_capacity(integrand.len());
    let mut sum = F::zero();
    out.push(sum);
    for (k, &db) in integrator.increments().iter().enumerate() {
        sum = sum + (a * integrand[k + 1] + b * integrand[k]) * db;
        out.push(sum);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpretation {
    Ito,
    Stratonovich,
}

/// Scalar SDE `dX = drift(X, t) dt + diffusion(X, t) dB` with a declared
/// noise interpretation. Drift and diffusion must be total on the nonnegative
/// half-line; the schemes clamp the state there.
pub struct SdeSpec<F, D, G>
where
    D: Fn(F, F) -> F,
    G: Fn(F, F) -> F,
{
    drift: D,
    diffusion: G,
    interpretation: Interpretation,
    _scalar: PhantomData<F>,
}

impl<F: Real, D, G> SdeSpec<F, D, G>
where
    D: Fn(F, F) -> F,
    G: Fn(F, F) -> F,
{
    pub fn ito(drift: D, diffusion: G) -> Self {
        SdeSpec {
            drift,
            diffusion,
            interpretation: Interpretation::Ito,
            _scalar: PhantomData,
        }
    }

    pub fn stratonovich(drift: D, diffusion: G) -> Self {
        SdeSpec {
            drift,
            diffusion,
            interpretation: Interpretation::Stratonovich,
            _scalar: PhantomData,
        }
    }

    pub fn interpretation(&self) -> Interpretation {
        self.interpretation
    }

    pub fn drift(&self, x: F, t: F) -> F {
        (self.drift)(x, t)
    }

    pub fn diffusion(&self, x: F, t: F) -> F {
        (self.diffusion)(x, t)
    }
}

/// Ito form of the circuit-energy equation:
/// `dE = V^2/(2L) dt - 2 (R/L) E dt + sqrt(2 V^2 E / L) dB`.
pub fn energy_sde_ito<F: Real>(
    params: &CircuitParams<F>,
) -> SdeSpec<F, impl Fn(F, F) -> F, impl Fn(F, F) -> F> {
    let two_theta = F::of(2.0) * params.theta();
    let drift_const = params.v() * params.v() / (F::of(2.0) * params.l());
    let diff_coeff = F::of(2.0) * params.v() * params.v() / params.l();
    SdeSpec::ito(
        move |e, _t| drift_const - two_theta * e,
        move |e, _t| (diff_coeff * e).sqrt(),
    )
}

/// Stratonovich form of the circuit-energy equation:
/// `dE = -2 (R/L) E dt + sqrt(2 V^2 E / L) o dB`.
pub fn energy_sde_stratonovich<F: Real>(
    params: &CircuitParams<F>,
) -> SdeSpec<F, impl Fn(F, F) -> F, impl Fn(F, F) -> F> {
    let two_theta = F::of(2.0) * params.theta();
    let diff_coeff = F::of(2.0) * params.v() * params.v() / params.l();
    SdeSpec::stratonovich(
        move |e, _t| -two_theta * e,
        move |e, _t| (diff_coeff * e).sqrt(),
    )
}

/// One Euler-Maruyama step, result clamped to the nonnegative half-line.
#[inline]
pub fn em_step<F: Real>(
    drift: impl Fn(F, F) -> F,
    diffusion: impl Fn(F, F) -> F,
    x: F,
    t: F,
    dt: F,
    db: F,
) -> F {
    (x + drift(x, t) * dt + diffusion(x, t) * db).max(F::zero())
}

/// One Heun predictor-corrector step for a Stratonovich equation: the drift
/// advances by plain Euler, the diffusion is averaged between the current
/// state and the Euler predictor. States are clamped to >= 0 before the
/// diffusion is evaluated and after the step.
#[inline]
pub fn heun_step<F: Real>(
    drift: impl Fn(F, F) -> F,
    diffusion: impl Fn(F, F) -> F,
    x: F,
    t: F,
    dt: F,
    db: F,
) -> F {
    let a = drift(x, t) * dt;
    let b0 = diffusion(x, t);
    let predictor = (x + a + b0 * db).max(F::zero());
    let b1 = diffusion(predictor, t + dt);
    (x + a + F::of(0.5) * (b0 + b1) * db).max(F::zero())
}

/// Euler-Maruyama trajectory of an Ito equation along the given path, state
/// clamped to >= 0 after every step.
pub fn euler_maruyama<F: Real, D, G>(
    spec: &SdeSpec<F, D, G>,
    x0: F,
    path: &WienerPath<F>,
) -> Vec<F>
where
    D: Fn(F, F) -> F,
    G: Fn(F, F) -> F,
{
    assert_eq!(
        spec.interpretation(),
        Interpretation::Ito,
        "euler_maruyama integrates Ito equations"
    );
    let grid = path.grid();
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.n_nodes());
    let mut x = x0.max(F::zero());
    out.push(x);
    for (k, &db) in path.increments().iter().enumerate() {
        x = em_step(|y, t| spec.drift(y, t), |y, t| spec.diffusion(y, t), x, grid.node(k), dt, db);
        out.push(x);
    }
    out
}

/// Heun trajectory of a Stratonovich equation along the given path, state
/// clamped to >= 0 after every step.
pub fn stratonovich_heun<F: Real, D, G>(
    spec: &SdeSpec<F, D, G>,
    x0: F,
    path: &WienerPath<F>,
) -> Vec<F>
where
    D: Fn(F, F) -> F,
    G: Fn(F, F) -> F,
{
    assert_eq!(
        spec.interpretation(),
        Interpretation::Stratonovich,
        "stratonovich_heun integrates Stratonovich equations"
    );
    let grid = path.grid();
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.n_nodes());
    let mut x = x0.max(F::zero());
    out.push(x);
    for (k, &db) in path.increments().iter().enumerate() {
        x = heun_step(|y, t| spec.drift(y, t), |y, t| spec.diffusion(y, t), x, grid.node(k), dt, db);
        out.push(x);
    }
    out
}
