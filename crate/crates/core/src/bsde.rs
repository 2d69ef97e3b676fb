//! Backward-equation solution pairs for the Langevin velocity.
//!
//! The velocity satisfies `dV_t = -gamma V_t dt + sigma_t dW_t` with a
//! prescribed terminal value `V_T = F`, solved jointly for the adapted pair
//! `(V_t, sigma_t)`. Only the Gaussian terminal family is implemented: `F` is
//! a normalized Wiener integral of a deterministic weight `psi`, which makes
//! both processes available in closed form.

use crate::error::CoreError;
use crate::randpath::{TimeGrid, WienerPath};
use crate::real::Real;

/// Langevin-particle parameters (unit mass): viscosity rate, thermal energy,
/// and the terminal time of the backward problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleParams<F> {
    gamma: F,
    kb_tau: F,
    t_end: F,
}

impl<F: Real> ParticleParams<F> {
    pub fn new(gamma: F, kb_tau: F, t_end: F) -> Result<Self, CoreError<F>> {
        if !(gamma > F::zero()) || !gamma.is_finite() {
            return Err(CoreError::invalid(
                "particle.gamma",
                "must be > 0 and finite",
            ));
        }
        if !(kb_tau > F::zero()) || !kb_tau.is_finite() {
            return Err(CoreError::invalid(
                "particle.kb_tau",
                "must be > 0 and finite",
            ));
        }
        if !(t_end > F::zero()) || !t_end.is_finite() {
            return Err(CoreError::invalid(
                "particle.t_end",
                "must be > 0 and finite",
            ));
        }
        Ok(ParticleParams {
            gamma,
            kb_tau,
            t_end,
        })
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn kb_tau(&self) -> F {
        self.kb_tau
    }

    pub fn t_end(&self) -> F {
        self.t_end
    }
}

/// Deterministic weight `psi` defining the terminal value.
///
/// `Constant` and `OuForm` (`psi_t = exp(gamma (t - T))`) use their analytic
/// L2 norms, so the OU form reduces exactly to its closed-form pair;
/// tabulated weights are normalized with the same left-point sum used for the
/// stochastic integral.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiSpec<F> {
    Constant,
    OuForm,
    /// One value per grid node (the last one only enters `sigma`).
    Tabulated(Vec<F>),
}

impl<F: Real> PsiSpec<F> {
    fn value_at(&self, k: usize, grid: &TimeGrid<F>, params: &ParticleParams<F>) -> F {
        match self {
            PsiSpec::Constant => F::one(),
            PsiSpec::OuForm => (params.gamma() * (grid.node(k) - params.t_end())).exp(),
            PsiSpec::Tabulated(vals) => vals[k],
        }
    }

    fn norm_sq(&self, grid: &TimeGrid<F>, params: &ParticleParams<F>) -> Result<F, CoreError<F>> {
        let norm_sq = match self {
            PsiSpec::Constant => F::of_usize(grid.n_steps()) * grid.dt(),
            PsiSpec::OuForm => {
                let two_gamma = F::of(2.0) * params.gamma();
                (F::one() - (-two_gamma * params.t_end()).exp()) / two_gamma
            }
            PsiSpec::Tabulated(vals) => {
                if vals.len() != grid.n_nodes() {
                    return Err(CoreError::GridMismatch {
                        expected: grid.n_nodes(),
                        got: vals.len(),
                    });
                }
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(CoreError::invalid("psi.values", "must be finite"));
                }
                let mut s = F::zero();
                for k in 0..grid.n_steps() {
                    s = s + vals[k] * vals[k];
                }
                s * grid.dt()
            }
        };
        if !(norm_sq > F::zero()) || !norm_sq.is_finite() {
            return Err(CoreError::DegeneratePsi);
        }
        Ok(norm_sq)
    }
}

/// Joint trajectories of the backward pair, with the terminal value the
/// velocity is pinned to.
#[derive(Clone, Debug)]
pub struct BsdePair<F> {
    grid: TimeGrid<F>,
    velocity: Vec<F>,
    sigma: Vec<F>,
    terminal: F,
}

impl<F: Real> BsdePair<F> {
    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    pub fn velocity(&self) -> &[F] {
        &self.velocity
    }

    pub fn sigma(&self) -> &[F] {
        &self.sigma
    }

    pub fn terminal_value(&self) -> F {
        self.terminal
    }

    /// Gap `|V_T - F|` between the last velocity node and the terminal value.
    pub fn terminal_gap(&self) -> F {
        (*self.velocity.last().unwrap() - self.terminal).abs()
    }
}

fn validate_span<F: Real>(
    grid: &TimeGrid<F>,
    params: &ParticleParams<F>,
) -> Result<(), CoreError<F>> {
    let tol = F::of(1e-9) * params.t_end().max(F::one());
    if grid.t_start().abs() > tol || (grid.t_end() - params.t_end()).abs() > tol {
        return Err(CoreError::invalid(
            "grid",
            "must span [0, T] of the particle parameters",
        ));
    }
    Ok(())
}

/// Checks that a grid and weight are usable for the backward problem without
/// touching any path data: the grid must span `[0, T]` and the weight must
/// have a positive L2 norm on it.
pub fn validate_setup<F: Real>(
    params: &ParticleParams<F>,
    psi: &PsiSpec<F>,
    grid: &TimeGrid<F>,
) -> Result<(), CoreError<F>> {
    validate_span(grid, params)?;
    psi.norm_sq(grid, params).map(|_| ())
}

/// Terminal velocity draw
/// `F = sqrt(kb_tau) (sum_k psi_k dW_k) / sqrt(norm_sq(psi))`, the
/// Maxwell-Boltzmann sample attached to this path.
pub fn terminal_value<F: Real>(
    params: &ParticleParams<F>,
    psi: &PsiSpec<F>,
    path: &WienerPath<F>,
) -> Result<F, CoreError<F>> {
    let grid = path.grid();
    validate_span(grid, params)?;
    let norm = psi.norm_sq(grid, params)?.sqrt();
    let scale = params.kb_tau().sqrt();
    let mut s = F::zero();
    for (k, &dw) in path.increments().iter().enumerate() {
        s = s + psi.value_at(k, grid, params) * dw;
    }
    Ok(scale * s / norm)
}

/// Closed-form solution pair on the path's grid:
/// `V_k = sqrt(kb_tau) e^{gamma (T - t_k)} S_k / ||psi||` with
/// `S_k = sum_{j<k} psi_j dW_j`, and
/// `sigma_k = sqrt(kb_tau) e^{gamma (T - t_k)} psi_k / ||psi||`.
///
/// For the OU-form weight the exponentials cancel in `sigma`, which is then
/// constant in time: `sqrt(2 gamma kb_tau) / sqrt(1 - exp(-2 gamma T))`.
pub fn solve_pair<F: Real>(
    params: &ParticleParams<F>,
    psi: &PsiSpec<F>,
    path: &WienerPath<F>,
) -> Result<BsdePair<F>, CoreError<F>> {
    let grid = path.grid();
    validate_span(grid, params)?;
    let norm = psi.norm_sq(grid, params)?.sqrt();
    let scale = params.kb_tau().sqrt();
    let gamma = params.gamma();
    let t_end = params.t_end();
    let n = grid.n_steps();

    let mut velocity = Vec::with_capacity(n + 1);
    let mut sigma = Vec::with_capacity(n + 1);
    let mut s = F::zero();
    for k in 0..=n {
        let envelope = (gamma * (t_end - grid.node(k))).exp();
        velocity.push(scale * envelope * s / norm);
        sigma.push(scale * envelope * psi.value_at(k, grid, params) / norm);
        if k < n {
            s = s + psi.value_at(k, grid, params) * path.increments()[k];
        }
    }
    let terminal = scale * s / norm;
    Ok(BsdePair {
        grid: *grid,
        velocity,
        sigma,
        terminal,
    })
}

/// Per-step residual statistics of a pair against the backward dynamics:
/// `r_k = V_{k+1} - V_k + gamma V_k dt - sigma_k dW_k`.
#[derive(Clone, Copy, Debug)]
pub struct ResidualStats<F> {
    pub max_abs: F,
    pub rms: F,
    pub terminal_gap: F,
}

pub fn bsde_residual<F: Real>(
    pair: &BsdePair<F>,
    params: &ParticleParams<F>,
    path: &WienerPath<F>,
) -> ResidualStats<F> {
    let dt = pair.grid().dt();
    let gamma = params.gamma();
    let mut max_abs = F::zero();
    let mut sum_sq = F::zero();
    let n = pair.grid().n_steps();
    for k in 0..n {
        let r = pair.velocity[k + 1] - pair.velocity[k] + gamma * pair.velocity[k] * dt
            - pair.sigma[k] * path.increments()[k];
        max_abs = max_abs.max(r.abs());
        sum_sq = sum_sq + r * r;
    }
    ResidualStats {
        max_abs,
        rms: (sum_sq / F::of_usize(n)).sqrt(),
        terminal_gap: pair.terminal_gap(),
    }
}

/// Long-horizon limit of the diffusion: `sqrt(2 gamma kb_tau)`, the
/// fluctuation-dissipation amplitude of the particle.
pub fn fdr_limit_sigma<F: Real>(params: &ParticleParams<F>) -> F {
    (F::of(2.0) * params.gamma() * params.kb_tau()).sqrt()
}

/// Position recovered from the velocity by trapezoidal quadrature.
pub fn integrate_position<F: Real>(grid: &TimeGrid<F>, velocity: &[F], x0: F) -> Vec<F> {
    assert_eq!(
        velocity.len(),
        grid.n_nodes(),
        "velocity trajectory must cover the grid"
    );
    let half_dt = F::of(0.5) * grid.dt();
    let mut out = Vec::with_capacity(velocity.len());
    let mut x = x0;
    out.push(x);
    for k in 0..grid.n_steps() {
        x = x + half_dt * (velocity[k] + velocity[k + 1]);
        out.push(x);
    }
    out
}
