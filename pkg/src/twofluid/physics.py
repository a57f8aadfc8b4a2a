"""The normalized two-fluid system and its electrostatic variant: right-hand
sides, RK4 stepping, weighted energies, and constraint monitors.

The six unknowns are the density perturbations n, rho, the velocities v, u,
and the rescaled fields E, B on a periodic box, all stored as spectral
coefficient arrays.  Quadratic products are formed in physical space and
dealiased by the grid's 2/3 mask.

Two structural choices make the continuum conservation laws survive
discretization exactly rather than to O(dt^4):

* the dealiased currents (n+1)v and (rho+1)u are shared between the density
  equations and the Ampere law, so div E - (rho - n) is a stagewise invariant
  of the scheme (div curl vanishes identically on the lattice);
* the advection terms are evaluated in rotational form, v.grad v =
  grad|v|^2/2 - v x curl v, folded with the magnetic force into a single
  cross product against B - eps curl v (resp. B + curl u), so generalized
  irrotationality is preserved through every RK4 stage by bilinearity.
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .params import PlasmaParams
from .spectral import (
    Grid,
    cross,
    curl,
    dealias,
    div,
    grad,
    hermitize,
    is_hermitian,
    l2_norm,
    p_long,
    q2_apply,
    random_real_field,
    random_vector_field,
    to_physical,
    to_spectral,
)

__all__ = [
    "SystemKind",
    "PhysState",
    "ep_electric",
    "rhs",
    "cfl_dt",
    "step",
    "energy",
    "local_energy_residual",
    "constraints",
    "make_irrotational",
    "random_irrotational",
    "gronwall_quantities",
    "gronwall_constant",
]

FIELDS = ("n", "rho", "v", "u", "E", "B")

ENERGY_ORDER_MAX = 8
CFL_SAFETY = 0.5


class SystemKind(enum.Enum):
    euler_maxwell = "em"
    euler_poisson = "ep"


@dataclass
class PhysState:
    grid: Grid
    n: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    u: np.ndarray
    E: np.ndarray
    B: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, grid: Grid, t: float = 0.0) -> "PhysState":
        scal = lambda: np.zeros((grid.n,) * 3, dtype=complex)  # noqa: E731
        vec = lambda: np.zeros((3, grid.n, grid.n, grid.n), dtype=complex)  # noqa: E731
        return cls(grid, scal(), scal(), vec(), vec(), vec(), vec(), t)

    def copy(self) -> "PhysState":
        return replace(self, **{f: getattr(self, f).copy() for f in FIELDS})


def _require_real(state: PhysState) -> None:
    for name in FIELDS:
        f = getattr(state, name)
        comps = f if f.ndim == 4 else f[None]
        for c in comps:
            if not is_hermitian(c, tol=1e-10):
                raise ValueError(f"field {name} is not real (coefficients lack conjugate symmetry)")


def _combine(grid: Grid, t: float, terms) -> PhysState:
    fields = {
        name: sum(c * getattr(s, name) for c, s in terms) for name in FIELDS
    }
    return PhysState(grid=grid, t=t, **fields)


def ep_electric(grid: Grid, n: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Electrostatic field slaved to the charge density, div E = rho - n."""
    return -1j * grid.xi * ((rho - n) * grid.inv_xi_mag**2)


def rhs(state: PhysState, p: PlasmaParams,
        kind: SystemKind = SystemKind.euler_maxwell,
        linear: bool = False, check: bool = True) -> PhysState:
    """Tendencies of all six fields; the returned container carries d/dt
    arrays in the field slots and the evaluation time in t."""
    if check:
        _require_real(state)
    g = state.grid
    eps, T, Cb = p.epsilon, p.T, p.C_b
    electrostatic = kind is SystemKind.euler_poisson
    E = ep_electric(g, state.n, state.rho) if electrostatic else state.E

    if linear:
        Je, Ji = state.v, state.u
        dv = -(T / eps) * grad(g, state.n) - E / eps
        du = -grad(g, state.rho) + E
    else:
        n_p = to_physical(g, state.n).real
        rho_p = to_physical(g, state.rho).real
        v_p = to_physical(g, state.v).real
        u_p = to_physical(g, state.u).real
        Je = state.v + dealias(g, to_spectral(g, n_p * v_p))
        Ji = state.u + dealias(g, to_spectral(g, rho_p * u_p))
        B_eff = 0.0 if electrostatic else state.B
        # the generalized-vorticity combinations; zero on admissible data
        Y_p = to_physical(g, B_eff - eps * curl(g, state.v)).real
        Z_p = to_physical(g, B_eff + curl(g, state.u)).real
        v2 = dealias(g, to_spectral(g, np.sum(v_p**2, axis=0)))
        u2 = dealias(g, to_spectral(g, np.sum(u_p**2, axis=0)))
        dv = (
            -(T / eps) * grad(g, state.n)
            - E / eps
            - 0.5 * grad(g, v2)
            - dealias(g, to_spectral(g, cross(v_p, Y_p))) / eps
        )
        du = (
            -grad(g, state.rho)
            + E
            - 0.5 * grad(g, u2)
            + dealias(g, to_spectral(g, cross(u_p, Z_p)))
        )

    dn = -div(g, Je)
    drho = -div(g, Ji)
    if electrostatic:
        dB = np.zeros_like(state.B)
        dE = p_long(g, Je - Ji)
    else:
        dB = -curl(g, E)
        dE = (Cb / eps) * curl(g, state.B) + Je - Ji
    return PhysState(g, dn, drho, dv, du, dE, dB, t=state.t)


def cfl_dt(grid: Grid, p: PlasmaParams) -> float:
    """Advisory step bound from the fastest group velocity sqrt(C_b/eps)."""
    dx = 2.0 * grid.box_half / grid.n
    return CFL_SAFETY * dx * np.sqrt(p.epsilon / p.C_b)


def step(state: PhysState, dt: float, p: PlasmaParams,
         kind: SystemKind = SystemKind.euler_maxwell,
         linear: bool = False, check: bool = True) -> PhysState:
    """One classical RK4 step.  Negative dt integrates backward (the system
    is time-reversible)."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    if check:
        _require_real(state)
    if abs(dt) > cfl_dt(state.grid, p):
        warnings.warn("dt exceeds the advisory CFL bound", RuntimeWarning, stacklevel=2)
    g, t = state.grid, state.t
    f = lambda s: rhs(s, p, kind=kind, linear=linear, check=False)  # noqa: E731
    k1 = f(state)
    k2 = f(_combine(g, t + dt / 2, [(1.0, state), (dt / 2, k1)]))
    k3 = f(_combine(g, t + dt / 2, [(1.0, state), (dt / 2, k2)]))
    k4 = f(_combine(g, t + dt, [(1.0, state), (dt, k3)]))
    out = _combine(
        g, t + dt,
        [(1.0, state), (dt / 6, k1), (dt / 3, k2), (dt / 3, k3), (dt / 6, k4)],
    )
    for name in FIELDS:
        if not np.isfinite(np.sum(getattr(out, name))):
            raise FloatingPointError(f"non-finite value in field {name} at t = {out.t:.6g}")
    return out


# ---------------------------------------------------------------------------
# energies and monitors


def _multi_indices(order: int):
    for total in range(order + 1):
        for a, b in itertools.product(range(total + 1), repeat=2):
            if a + b <= total:
                yield (a, b, total - a - b)


def energy(state: PhysState, p: PlasmaParams, order: int = 0) -> float:
    """Weighted energy: sum over |gamma| <= order of the integrals of
    T|D^g n|^2 + eps(1+n)|D^g v|^2 + |D^g rho|^2 + (1+rho)|D^g u|^2
    + |D^g E|^2 + (C_b/eps)|D^g B|^2."""
    if not 0 <= order <= ENERGY_ORDER_MAX:
        raise ValueError(f"order must lie in [0, {ENERGY_ORDER_MAX}]")
    g = state.grid
    vol = (2.0 * g.box_half / g.n) ** 3
    n_p = to_physical(g, state.n).real
    rho_p = to_physical(g, state.rho).real
    total = 0.0
    for gamma in _multi_indices(order):
        sym = (1j * g.xi[0]) ** gamma[0] * (1j * g.xi[1]) ** gamma[1] * (1j * g.xi[2]) ** gamma[2]
        total += vol * (
            p.T * float(np.sum(np.abs(sym * state.n) ** 2))
            + float(np.sum(np.abs(sym * state.rho) ** 2))
            + float(np.sum(np.abs(sym * state.E) ** 2))
            + (p.C_b / p.epsilon) * float(np.sum(np.abs(sym * state.B) ** 2))
        )
        dv = to_physical(g, sym * state.v).real
        du = to_physical(g, sym * state.u).real
        total += vol * p.epsilon * float(np.sum((1.0 + n_p) * np.sum(dv**2, axis=0)))
        total += vol * float(np.sum((1.0 + rho_p) * np.sum(du**2, axis=0)))
    return total


def local_energy_residual(state: PhysState, tend: PhysState, p: PlasmaParams,
                          kind: SystemKind = SystemKind.euler_maxwell):
    """Pointwise residual of d/dt(energy density) + div(fluxes); returns the
    physical-space field and its L2 norm.

    For the electrostatic variant the magnetic flux is dropped and the work
    of the field against the transverse part of the current is kept: that
    part is not a divergence, but it integrates to zero against the
    longitudinal E, so global conservation is untouched.
    """
    g = state.grid
    eps, T, Cb = p.epsilon, p.T, p.C_b
    electrostatic = kind is SystemKind.euler_poisson

    phys_r = lambda c: to_physical(g, c).real  # noqa: E731
    n, rho = phys_r(state.n), phys_r(state.rho)
    v, u = phys_r(state.v), phys_r(state.u)
    E = phys_r(ep_electric(g, state.n, state.rho) if electrostatic else state.E)
    B = phys_r(state.B)
    dn, drho = phys_r(tend.n), phys_r(tend.rho)
    dv, du = phys_r(tend.v), phys_r(tend.u)
    dE, dB = phys_r(tend.E), phys_r(tend.B)

    de = (
        T * n * dn
        + 0.5 * eps * dn * np.sum(v**2, axis=0)
        + eps * (1.0 + n) * np.sum(v * dv, axis=0)
        + rho * drho
        + 0.5 * drho * np.sum(u**2, axis=0)
        + (1.0 + rho) * np.sum(u * du, axis=0)
        + np.sum(E * dE, axis=0)
    )
    if not electrostatic:
        de += (Cb / eps) * np.sum(B * dB, axis=0)

    Je = (1.0 + n) * v
    Ji = (1.0 + rho) * u
    flux = (T * n + 0.5 * eps * np.sum(v**2, axis=0)) * Je
    flux += (rho + 0.5 * np.sum(u**2, axis=0)) * Ji
    if not electrostatic:
        flux += (Cb / eps) * cross(E, B)
    residual = de + phys_r(div(g, to_spectral(g, flux)))
    if electrostatic:
        # complement of the longitudinal projection, mean current included:
        # the slaved field has no mean dynamics, so the whole mean part of
        # the current does unbalanced (but globally vanishing) work
        current = to_spectral(g, Je - Ji)
        residual += np.sum(E * phys_r(current - p_long(g, current)), axis=0)

    vol = (2.0 * g.box_half / g.n) ** 3
    return residual, float(np.sqrt(vol * np.sum(residual**2)))


def constraints(state: PhysState, p: PlasmaParams) -> dict:
    """L2 residuals of the four monitored identities."""
    g = state.grid
    return {
        "div_B": l2_norm(g, div(g, state.B)),
        "gauss": l2_norm(g, div(g, state.E) - (state.rho - state.n)),
        "girr_e": l2_norm(g, state.B - p.epsilon * curl(g, state.v)),
        "girr_i": l2_norm(g, state.B + curl(g, state.u)),
    }


# ---------------------------------------------------------------------------
# admissible data


def make_irrotational(grid: Grid, p: PlasmaParams, seed: dict) -> PhysState:
    """Assemble a state satisfying the four constraints to roundoff.

    Seed keys (all optional, spectral coefficient arrays):
      n, rho        density perturbations (projected mean-zero)
      v_pot, u_pot  scalar potentials for the longitudinal velocities
      b_seed        vector whose transverse part seeds the rotational sector
      v_rot, u_rot  explicit rotational velocities; must satisfy
                    u_rot = -eps * v_rot when both are given
      E_t           transverse electric seed (longitudinal part is solved
                    from rho - n)
      t             initial time
    """
    known = {"n", "rho", "v_pot", "u_pot", "b_seed", "v_rot", "u_rot", "E_t", "t"}
    if not set(seed) <= known:
        raise ValueError(f"unknown seed keys: {sorted(set(seed) - known)}")
    if "b_seed" in seed and ("v_rot" in seed or "u_rot" in seed):
        raise ValueError("give either b_seed or explicit rotational velocities, not both")

    scal = lambda key: hermitize(np.asarray(seed[key], dtype=complex)) if key in seed \
        else np.zeros((grid.n,) * 3, dtype=complex)  # noqa: E731
    vec = lambda key: hermitize(np.asarray(seed[key], dtype=complex)) if key in seed \
        else np.zeros((3, grid.n, grid.n, grid.n), dtype=complex)  # noqa: E731

    n = scal("n")
    rho = scal("rho")
    n[..., 0, 0, 0] = 0.0
    rho[..., 0, 0, 0] = 0.0

    if "v_rot" in seed or "u_rot" in seed:
        if "v_rot" in seed and "u_rot" in seed:
            vr, ur = vec("v_rot"), vec("u_rot")
            scale = max(np.max(np.abs(ur)), p.epsilon * np.max(np.abs(vr)), 1e-300)
            if np.max(np.abs(ur + p.epsilon * vr)) > 1e-12 * scale:
                raise ValueError("rotational seed violates u_rot = -eps * v_rot")
        elif "v_rot" in seed:
            vr = vec("v_rot")
        else:
            vr = vec("u_rot") / (-p.epsilon)
        vr = q2_apply(grid, vr)
    else:
        vr = q2_apply(grid, vec("b_seed"))

    v = grad(grid, scal("v_pot")) + vr
    u = grad(grid, scal("u_pot")) - p.epsilon * vr
    B = p.epsilon * curl(grid, vr)
    E = ep_electric(grid, n, rho) + q2_apply(grid, vec("E_t"))
    return PhysState(grid, n, rho, v, u, E, B, t=float(seed.get("t", 0.0)))


def random_irrotational(grid: Grid, p: PlasmaParams, rng,
                        amplitude: float = 1e-3, kmax: int = 4,
                        rotational: bool = True) -> PhysState:
    seed = {
        "n": random_real_field(grid, rng, kmax=kmax, rms=amplitude),
        "rho": random_real_field(grid, rng, kmax=kmax, rms=amplitude),
        "v_pot": random_real_field(grid, rng, kmax=kmax, rms=amplitude),
        "u_pot": random_real_field(grid, rng, kmax=kmax, rms=amplitude),
        "E_t": random_vector_field(grid, rng, kmax=kmax, rms=amplitude),
    }
    if rotational:
        seed["b_seed"] = random_vector_field(grid, rng, kmax=kmax, rms=amplitude)
    return make_irrotational(grid, p, seed)


# ---------------------------------------------------------------------------
# growth-rate monitors


def _sup(grid: Grid, coef: np.ndarray) -> float:
    return float(np.max(np.abs(to_physical(grid, coef).real)))


def _sup_grad(grid: Grid, coef: np.ndarray) -> float:
    comps = coef if coef.ndim == 4 else coef[None]
    return max(_sup(grid, grad(grid, c)) for c in comps)


def gronwall_quantities(state: PhysState) -> dict:
    """Sup-norms driving the energy inequality, and their sum A."""
    g = state.grid
    out = {
        "grad_n": _sup_grad(g, state.n),
        "v": _sup(g, state.v),
        "grad_v": _sup_grad(g, state.v),
        "grad_rho": _sup_grad(g, state.rho),
        "u": _sup(g, state.u),
        "grad_u": _sup_grad(g, state.u),
        "grad_E": _sup_grad(g, state.E),
        "B": _sup(g, state.B),
        "grad_B": _sup_grad(g, state.B),
    }
    out["A"] = sum(out.values())
    return out


def gronwall_constant(traj, p: PlasmaParams, order: int = 2):
    """Fit the smallest C with |E_N(t) - E_N(0)| <= C * int_0^t A E_N ds
    along a sampled trajectory; returns (C, per-sample table)."""
    times = np.array([s.t for s in traj])
    if len(traj) < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("need a strictly time-ordered trajectory")
    e = np.array([energy(s, p, order) for s in traj])
    a = np.array([gronwall_quantities(s)["A"] for s in traj])
    integrand = a * e
    integral = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (integrand[1:] + integrand[:-1]))]
    )
    drift = np.abs(e - e[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(integral > 0, drift / np.maximum(integral, 1e-300), 0.0)
    table = {"t": times, "energy": e, "A": a, "integral": integral, "ratio": ratio}
    return float(np.max(ratio)), table
