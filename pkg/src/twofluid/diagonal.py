"""Dispersive variables: exact diagonalization of the linearized system.

The linearization of the two-fluid system couples all six fields.  Three
complex unknowns decouple it,

    U_e = (2 sqrt(1+R^2))^{-1} [-sqrt(eps) |grad|^{-1} Lam_e n
            + R |grad|^{-1} Lam_e rho - i sqrt(eps) h + i R g],
    U_i = (2 sqrt(1+R^2))^{-1} [sqrt(eps) R |grad|^{-1} Lam_i n
            + |grad|^{-1} Lam_i rho + i sqrt(eps) R h + i g],
    U_b = [Lam_b |grad|^{-1} Q B - i Q^2 E] / 2,

with h = -|grad|^{-1} div v and g = -|grad|^{-1} div u, and each solves

    (d_t + i Lam_sigma) U_sigma = N_sigma,   sigma in {e, i, b},

with a quadratic right-hand side.  This module implements the change of
variables, its inverse, and N_sigma two independent ways: once straight
from the physical fields, and once as a lattice convolution against the
explicit multiplier catalog.  The routes share nothing past the radial
symbol tables, so their agreement exercises every entry of the catalog.

Zero-mode conventions follow module spectral: symbols carrying a 1/|xi|
that does not cancel drop the xi = 0 mode (mean-zero perturbations), while
Lam_i/|xi| is continued through the origin by its finite limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .dispersion import aux_symbols, lam, q_i
from .params import PlasmaParams
from .physics import PhysState, constraints, ep_electric
from .spectral import (
    Grid,
    curl,
    dealias,
    div,
    hermitize,
    inv_modulus,
    is_hermitian,
    l2_norm,
    q2_apply,
    q_apply,
    reflect,
    riesz,
    to_physical,
    to_spectral,
)

__all__ = [
    "SPECIES",
    "CATALOG_PAIRS",
    "DispState",
    "species_split",
    "to_dispersive",
    "from_dispersive",
    "nonlinearity_direct",
    "nonlinearity_multiplier",
    "multiplier",
    "dispersive_residual",
    "profile",
    "hn_norm",
]


# ---------------------------------------------------------------------------
# species bookkeeping

SPECIES = ("e+", "e-", "i+", "i-", "b+1", "b+2", "b+3", "b-1", "b-2", "b-3")

_BP = ("b+1", "b+2", "b+3")
_BM = ("b-1", "b-2", "b-3")

# Ordered (mu, nu) pairs of the quadratic interaction; the magnetosonic
# entries always sit in the second slot of a mixed pair, and the pair list
# is unordered in the sense that (e-, e+) never appears.
CATALOG_PAIRS = tuple(
    [("e+", "e+"), ("e+", "e-"), ("e-", "e-"),
     ("i+", "i+"), ("i+", "i-"), ("i-", "i-")]
    + [(a, b) for a in _BP for b in _BP]
    + [(a, b) for a in _BP for b in _BM]
    + [(a, b) for a in _BM for b in _BM]
    + [("e+", "i+"), ("e+", "i-"), ("e-", "i+"), ("e-", "i-")]
    + [(mu, nu) for mu in ("e+", "e-", "i+", "i-") for nu in _BP + _BM]
)

_PAIR_SET = frozenset(CATALOG_PAIRS)


def species_split(mu: str):
    """Decompose a member of the species index set into (branch, sign, component).

    The component is a 0-based axis index for magnetosonic entries, None for
    the two acoustic branches.
    """
    if mu not in SPECIES:
        raise ValueError(f"unknown species index {mu!r}")
    branch, sign = mu[0], mu[1]
    comp = int(mu[2]) - 1 if branch == "b" else None
    return branch, sign, comp


# ---------------------------------------------------------------------------
# state container and radial symbol tables


@dataclass
class DispState:
    """Dispersive unknowns as spectral coefficients.

    U_e, U_i are scalar complex fields, U_b a complex vector field; unlike a
    PhysState the coefficients carry no conjugate symmetry.
    """

    grid: Grid
    U_e: np.ndarray
    U_i: np.ndarray
    U_b: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, grid: Grid, t: float = 0.0) -> "DispState":
        n = grid.n
        return cls(grid, np.zeros((n,) * 3, complex), np.zeros((n,) * 3, complex),
                   np.zeros((3,) + (n,) * 3, complex), t)

    def copy(self) -> "DispState":
        return replace(self, U_e=self.U_e.copy(), U_i=self.U_i.copy(),
                       U_b=self.U_b.copy())


@lru_cache(maxsize=8)
def _symbols(grid: Grid, p: PlasmaParams) -> dict:
    r = grid.xi_mag
    out = {
        "lam_e": lam("e", r, p),
        "lam_i": lam("i", r, p),
        "lam_b": lam("b", r, p),
        "q_i": q_i(r, p),  # Lam_i/|xi|, regular through the origin
        "R": aux_symbols(r, p)["R"],
        "r": r,
    }
    out["norm"] = 1.0 / np.sqrt(1.0 + out["R"] ** 2)
    out["lam_e_over_r"] = out["lam_e"] * grid.inv_xi_mag  # zero mode dropped
    out["r_over_lam_e"] = r / out["lam_e"]
    return out


def _bar(coef: np.ndarray) -> np.ndarray:
    """Coefficients of the complex-conjugate field: Ubar^(xi) = conj(U^(-xi))."""
    return np.conj(reflect(coef))


def _re(coef: np.ndarray) -> np.ndarray:
    return 0.5 * (coef + _bar(coef))


def _im(coef: np.ndarray) -> np.ndarray:
    return -0.5j * (coef - _bar(coef))


# ---------------------------------------------------------------------------
# the change of variables and its inverse


def to_dispersive(s: PhysState, p: PlasmaParams, check: bool = True) -> DispState:
    """Map a physical state to the dispersive unknowns.

    The map reads B only through Q and drops the spatial means of v, u, E,
    B, so it is one-to-one exactly on the constraint manifold; with
    ``check`` a violation of the constraints raises a warning rather than
    an error.
    """
    g = s.grid
    if check:
        for name in ("n", "rho", "v", "u", "E", "B"):
            f = getattr(s, name)
            for c in f if f.ndim == 4 else f[None]:
                if not is_hermitian(c, tol=1e-10):
                    raise ValueError(f"field {name} is not real")
        viol = max(constraints(s, p).values())
        scale = max(l2_norm(g, getattr(s, name)) for name in
                    ("n", "rho", "v", "u", "E", "B"))
        if viol > 1e-8 * max(scale, 1e-12):
            warnings.warn(
                f"state violates constraints (worst residual {viol:.2e}); "
                "the reconstruction will keep only the consistent part",
                RuntimeWarning, stacklevel=2)

    sym = _symbols(g, p)
    seps = np.sqrt(p.epsilon)
    R, nrm = sym["R"], sym["norm"]

    h = -inv_modulus(g, div(g, s.v))
    gg = -inv_modulus(g, div(g, s.u))
    le = sym["lam_e_over_r"]

    U_e = 0.5 * nrm * (-seps * le * s.n + R * le * s.rho
                       - 1j * seps * h + 1j * R * gg)
    U_i = 0.5 * nrm * (seps * R * sym["q_i"] * s.n + sym["q_i"] * s.rho
                       + 1j * seps * R * h + 1j * gg)
    U_b = 0.5 * (sym["lam_b"] * inv_modulus(g, q_apply(g, s.B))
                 - 1j * q2_apply(g, s.E))
    return DispState(g, U_e, U_i, U_b, s.t)


def from_dispersive(d: DispState, p: PlasmaParams) -> PhysState:
    """Reconstruct the physical fields; real, with div B = 0 and Gauss law
    holding by construction."""
    g = d.grid
    sym = _symbols(g, p)
    R, nrm = sym["R"], sym["norm"]
    ieps = p.epsilon ** -0.5

    S_e, D_e = d.U_e + _bar(d.U_e), d.U_e - _bar(d.U_e)
    S_i, D_i = d.U_i + _bar(d.U_i), d.U_i - _bar(d.U_i)
    # U_b enters the fields through its transverse part only; projecting here
    # keeps the reconstruction admissible for arbitrary coefficient input
    U_b = q2_apply(g, d.U_b)
    re_b = _re(U_b)
    im_b = _im(U_b)

    r_le = sym["r_over_lam_e"]
    inv_qi = 1.0 / sym["q_i"]
    n = nrm * ieps * (-r_le * S_e + R * inv_qi * S_i)
    rho = nrm * (R * r_le * S_e + inv_qi * S_i)
    h = 1j * nrm * ieps * (D_e - R * D_i)
    gg = -1j * nrm * (R * D_e + D_i)

    a = re_b / sym["lam_b"]  # the vector potential-like combination
    v = riesz(g, h) + (2.0 / p.epsilon) * a
    u = riesz(g, gg) - 2.0 * a
    E = ep_electric(g, n, rho) - 2.0 * im_b
    B = 2.0 * curl(g, a)
    return PhysState(grid=g, n=n, rho=rho, v=v, u=u, E=E, B=B, t=d.t)


# ---------------------------------------------------------------------------
# nonlinearity, route one: straight from the physical fields


def nonlinearity_direct(s: PhysState, p: PlasmaParams):
    """Quadratic right-hand sides (N_e, N_i, N_b) from the physical fields.

    Products are formed pointwise in physical space and dealiased; the
    radial multipliers act on the transforms of the products.  Re(N_b) is
    zero by construction (the coefficients are symmetrized before the final
    rotation by i).
    """
    g = s.grid
    sym = _symbols(g, p)
    eps = p.epsilon
    seps = np.sqrt(eps)
    R, nrm, r = sym["R"], sym["norm"], sym["r"]

    h = -inv_modulus(g, div(g, s.v))
    gg = -inv_modulus(g, div(g, s.u))
    A = inv_modulus(g, q_apply(g, s.B))

    n_p = to_physical(g, s.n).real
    rho_p = to_physical(g, s.rho).real
    Rh_p = to_physical(g, riesz(g, h)).real
    Rg_p = to_physical(g, riesz(g, gg)).real
    A_p = to_physical(g, A).real

    def ps(values):
        return dealias(g, to_spectral(g, values))

    nRh = [ps(n_p * Rh_p[a]) for a in range(3)]
    rRg = [ps(rho_p * Rg_p[a]) for a in range(3)]
    nA = [ps(n_p * A_p[a]) for a in range(3)]
    rA = [ps(rho_p * A_p[a]) for a in range(3)]
    # squares summed over the component index before transforming
    P1 = ps(sum((eps * Rh_p[a] + A_p[a]) ** 2 for a in range(3)))
    P2 = ps(sum((Rg_p[a] - A_p[a]) ** 2 for a in range(3)))

    def riesz_sum(comps):
        return inv_modulus(g, div(g, np.stack(comps)))

    re_e = 0.5 * nrm * sym["lam_e"] * riesz_sum(
        [seps * nRh[a] - R * rRg[a] + nA[a] / seps + R * rA[a] for a in range(3)])
    im_e = 0.25 * nrm * r * (eps ** -1.5 * P1 - R * P2)

    re_i = -0.5 * nrm * sym["lam_i"] * riesz_sum(
        [seps * R * nRh[a] + rRg[a] + R * nA[a] / seps - rA[a] for a in range(3)])
    im_i = -0.25 * nrm * r * (eps ** -1.5 * R * P1 + P2)

    w_b = np.stack([hermitize(nRh[a] - rRg[a] + nA[a] / eps + rA[a])
                    for a in range(3)])
    N_b = -0.5j * q2_apply(g, w_b)

    return re_e + 1j * im_e, re_i + 1j * im_i, N_b


# ---------------------------------------------------------------------------
# nonlinearity, route two: the explicit multiplier catalog

# Coefficients of the three geometry kernels
#   A = Lam_out(xi) |zeta| (xi.eta)   / (2 |xi| |eta| Lam_1(zeta)),
#   B = Lam_out(xi) |eta|  (xi.zeta)  / (2 |xi| |zeta| Lam_2(eta)),
#   C = |xi| (zeta.eta) / (2 |zeta| |eta|),
# for the acoustic-acoustic entries, keyed by (output, same/cross, signs).
_ACOUSTIC_SIGNS = {
    ("e", "same", "+", "+"): (1.0, 0.0, 0.5),
    ("e", "same", "+", "-"): (-1.0, 1.0, -1.0),
    ("e", "same", "-", "-"): (-1.0, 0.0, 0.5),
    ("e", "cross", "+", "+"): (-1.0, -1.0, -1.0),
    ("e", "cross", "+", "-"): (1.0, -1.0, 1.0),
    ("e", "cross", "-", "+"): (-1.0, 1.0, 1.0),
    ("e", "cross", "-", "-"): (1.0, 1.0, -1.0),
    ("i", "same", "+", "+"): (-1.0, 0.0, -0.5),
    ("i", "same", "+", "-"): (1.0, -1.0, 1.0),
    ("i", "same", "-", "-"): (1.0, 0.0, -0.5),
    ("i", "cross", "+", "+"): (1.0, 1.0, 1.0),
    ("i", "cross", "+", "-"): (-1.0, 1.0, -1.0),
    ("i", "cross", "-", "+"): (1.0, -1.0, -1.0),
    ("i", "cross", "-", "-"): (-1.0, -1.0, 1.0),
}

# Magnetosonic-output rows, acoustic-acoustic inputs: coefficients of
#   P  = (|zeta|/Lam_1(zeta)) eta_beta  / |eta|,
#   P' = (|eta| /Lam_2(eta))  zeta_beta / |zeta|.
_B_ROW_SIGNS = {
    ("same", "+", "+"): (0.5, 0.0),
    ("same", "+", "-"): (-0.5, 0.5),
    ("same", "-", "-"): (-0.5, 0.0),
    ("cross", "+", "+"): (0.5, 0.5),
    ("cross", "+", "-"): (-0.5, 0.5),
    ("cross", "-", "+"): (0.5, -0.5),
    ("cross", "-", "-"): (-0.5, -0.5),
}


def _inv0(x: np.ndarray) -> np.ndarray:
    """1/x continued by 0 at x = 0 (lattice zero-mode convention)."""
    out = np.zeros_like(x)
    np.divide(1.0, x, out=out, where=x != 0)
    return out


def _R_of(r, p: PlasmaParams):
    return aux_symbols(r, p)["R"]


def _out_over_mod(sigma: str, r, p: PlasmaParams):
    """Lam_sigma(|xi|)/|xi|; factored for the ion branch, 0 at the origin
    otherwise."""
    if sigma == "i":
        return q_i(r, p)
    return lam(sigma, r, p) * _inv0(r)


def _mod_over_branch(branch: str, r, p: PlasmaParams):
    """|xi|/Lam_branch(|xi|); regular everywhere on both acoustic branches."""
    if branch == "i":
        return 1.0 / q_i(r, p)
    return r / lam("e", r, p)


def _eval_acoustic(sigma, mu, nu, xi, zeta, eta, p):
    """m_{sigma;mu,nu} for sigma in {e,i} and both inputs acoustic."""
    s1, i1, _ = species_split(mu)
    s2, i2, _ = species_split(nu)
    rx = np.sqrt(np.sum(xi * xi, 0))
    rz = np.sqrt(np.sum(zeta * zeta, 0))
    re_ = np.sqrt(np.sum(eta * eta, 0))
    Rx, Rz, Re = _R_of(rx, p), _R_of(rz, p), _R_of(re_, p)
    seps = p.epsilon ** -0.5

    if sigma == "e":
        if s1 == s2 == "e":
            num = seps - Rx * Rz * Re
        elif s1 == s2 == "i":
            num = seps * Rz * Re - Rx
        else:
            num = seps * Re + Rx * Rz
    else:
        if s1 == s2 == "e":
            num = seps * Rx + Rz * Re
        elif s1 == s2 == "i":
            num = seps * Rx * Rz * Re + 1.0
        else:
            num = seps * Rx * Re - Rz
    T = 1j * num / np.sqrt((1 + Rx ** 2) * (1 + Rz ** 2) * (1 + Re ** 2))

    lo = _out_over_mod(sigma, rx, p)
    A = 0.5 * lo * np.sum(xi * eta, 0) * _inv0(re_) * _mod_over_branch(s1, rz, p)
    B = 0.5 * lo * np.sum(xi * zeta, 0) * _inv0(rz) * _mod_over_branch(s2, re_, p)
    C = 0.5 * rx * np.sum(zeta * eta, 0) * _inv0(rz) * _inv0(re_)

    rel = "same" if s1 == s2 else "cross"
    cA, cB, cC = _ACOUSTIC_SIGNS[sigma, rel, i1, i2]
    return T * (cA * A + cB * B + cC * C)


def _eval_single_b(sigma, mu, nu, xi, zeta, eta, p):
    """m_{sigma;mu,nu} for sigma in {e,i}, mu acoustic, nu magnetosonic."""
    s1, i1, _ = species_split(mu)
    _, _, a2 = species_split(nu)
    rx = np.sqrt(np.sum(xi * xi, 0))
    rz = np.sqrt(np.sum(zeta * zeta, 0))
    re_ = np.sqrt(np.sum(eta * eta, 0))
    Rx, Rz = _R_of(rx, p), _R_of(rz, p)
    eps = p.epsilon

    if sigma == "e":
        num = (-1.0 / eps + Rx * Rz) if s1 == "e" else (Rz / eps + Rx)
    else:
        num = (Rx / eps + Rz) if s1 == "e" else -(Rx * Rz / eps - 1.0)
    T = 1j * num / (np.sqrt((1 + Rx ** 2) * (1 + Rz ** 2)) * lam("b", re_, p))

    G = (0.5 * _out_over_mod(sigma, rx, p) * xi[a2] * _mod_over_branch(s1, rz, p)
         + (1.0 if i1 == "+" else -1.0) * 0.5 * rx * zeta[a2] * _inv0(rz))
    return T * G


def _eval_double_b(sigma, mu, nu, xi, zeta, eta, p):
    """m_{sigma;mu,nu} for sigma in {e,i} and both inputs magnetosonic."""
    _, i1, a1 = species_split(mu)
    _, i2, a2 = species_split(nu)
    rx = np.sqrt(np.sum(xi * xi, 0))
    if a1 != a2:  # diagonal in the component indices
        return np.zeros(rx.shape, complex)
    rz = np.sqrt(np.sum(zeta * zeta, 0))
    re_ = np.sqrt(np.sum(eta * eta, 0))
    Rx = _R_of(rx, p)
    e32 = p.epsilon ** -1.5
    S = (1j * (e32 - Rx) if sigma == "e" else -1j * (e32 * Rx + 1.0))
    m = S / np.sqrt(1 + Rx ** 2) * rx / (4.0 * lam("b", rz, p) * lam("b", re_, p))
    return 2.0 * m if i1 != i2 else m


def _eval_b_core(mu, nu, xi, zeta, eta, p):
    """Magnetosonic-output row before the transverse projection.

    Returns the vector c with m_{b,alpha;mu,nu} = Q^2_{alpha beta}(xi) c_beta.
    """
    s1, i1, a1 = species_split(mu)
    s2, i2, a2 = species_split(nu)
    rz = np.sqrt(np.sum(zeta * zeta, 0))
    re_ = np.sqrt(np.sum(eta * eta, 0))
    Rz, Re = _R_of(rz, p), _R_of(re_, p)
    eps = p.epsilon
    shape = (3,) + np.broadcast_shapes(rz.shape, re_.shape)

    if s1 == "b" and s2 == "b":
        return np.zeros(shape, complex)  # no such source in the U_b equation

    if s2 == "b":
        e32 = eps ** -1.5
        if s1 == "e":
            s = 1j * (e32 - Rz) * _mod_over_branch("e", rz, p)
        else:
            s = -1j * (e32 * Rz + 1.0) * _mod_over_branch("i", rz, p)
        s = s / (2.0 * np.sqrt(1 + Rz ** 2) * lam("b", re_, p))
        out = np.zeros(shape, complex)
        out[a2] = s
        return out

    if s1 == s2 == "e":
        num = -1.0 / eps + Rz * Re
    elif s1 == s2 == "i":
        num = -Rz * Re / eps + 1.0
    else:
        num = Re / eps + Rz
    tau = 1j * num / np.sqrt((1 + Rz ** 2) * (1 + Re ** 2))

    P = _mod_over_branch(s1, rz, p) * eta * _inv0(re_)
    Pp = _mod_over_branch(s2, re_, p) * zeta * _inv0(rz)
    rel = "same" if s1 == s2 else "cross"
    cP, cPp = _B_ROW_SIGNS[rel, i1, i2]
    return tau * (cP * P + cPp * Pp)


def multiplier(sigma: str, mu: str, nu: str, xi, eta, p: PlasmaParams):
    """Catalog entry m_{sigma;mu,nu}(xi, eta).

    xi and eta have shape (3,) or (3, ...); the result is a complex scalar
    (array) for the acoustic outputs and carries a leading length-3 axis
    for sigma = "b".  Singular quotients are evaluated in factored form;
    at xi = 0 the ion row vanishes identically and the other rows follow
    the projected zero-mode convention.
    """
    if (mu, nu) not in _PAIR_SET:
        raise ValueError(f"({mu!r}, {nu!r}) is not a catalog pair")
    if sigma not in ("e", "i", "b"):
        raise ValueError(f"unknown output branch {sigma!r}")
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    scalar_in = xi.ndim == 1
    if scalar_in:
        xi, eta = xi[:, None], eta[:, None]
    zeta = xi - eta

    s1 = species_split(mu)[0]
    s2 = species_split(nu)[0]
    if sigma == "b":
        core = _eval_b_core(mu, nu, xi, zeta, eta, p)
        rx2 = np.sum(xi * xi, 0)
        out = core - xi * (np.sum(xi * core, 0) * _inv0(rx2))
        out[:, rx2 == 0] = 0.0
        return out[:, 0] if scalar_in else out
    if s1 == "b" and s2 == "b":
        out = _eval_double_b(sigma, mu, nu, xi, zeta, eta, p)
    elif s2 == "b":
        out = _eval_single_b(sigma, mu, nu, xi, zeta, eta, p)
    else:
        out = _eval_acoustic(sigma, mu, nu, xi, zeta, eta, p)
    return complex(out[0]) if scalar_in else out


def _active(flat: np.ndarray, tol: float) -> np.ndarray:
    mags = np.abs(flat)
    top = mags.max()
    if top == 0.0:
        return np.empty(0, np.intp)
    return np.nonzero(mags > tol * top)[0]


def nonlinearity_multiplier(d: DispState, p: PlasmaParams,
                            support_tol: float = 0.0, block: int = 1 << 21):
    """(N_e, N_i, N_b) as the literal lattice convolution against the catalog.

    For every catalog pair the sum runs over the product of the supports of
    the two inputs, scattering each contribution to the wrapped output mode
    xi = zeta + eta; the convolution constant for the unitary transform pair
    on n^3 points is c = n^{-3/2}.  Cost grows with the square of the input
    support, which is what makes this the verification route rather than
    the production one; ``support_tol`` > 0 trades exactness for speed by
    dropping relatively tiny coefficients.
    """
    g = d.grid
    n = g.n
    scale = float(g.xi_min)
    half = n // 2

    tables = {"e+": d.U_e, "e-": _bar(d.U_e), "i+": d.U_i, "i-": _bar(d.U_i)}
    for a in range(3):
        tables[f"b+{a + 1}"] = d.U_b[a]
        tables[f"b-{a + 1}"] = _bar(d.U_b[a])
    flat = {k: v.reshape(-1) for k, v in tables.items()}
    K = g.modes.reshape(3, -1)
    active = {k: _active(v, support_tol) for k, v in flat.items()}

    N_e = np.zeros(n ** 3, complex)
    N_i = np.zeros(n ** 3, complex)
    W_b = np.zeros((3, n ** 3), complex)

    for mu, nu in CATALOG_PAIRS:
        zi, hi = active[mu], active[nu]
        if zi.size == 0 or hi.size == 0:
            continue
        rows = max(1, block // max(hi.size, 1))
        for lo in range(0, zi.size, rows):
            zb = zi[lo:lo + rows]
            kz = K[:, zb][:, :, None]
            kh = K[:, hi][:, None, :]
            ks = kz + kh
            out_idx = ((ks[0] % n) * n + ks[1] % n) * n + ks[2] % n
            # output mode folded back into the band, as the circular
            # convolution of the physical-space product demands
            xi = ((ks + half) % n - half) * scale
            zeta = kz * scale
            eta = kh * scale
            prod = flat[mu][zb][:, None] * flat[nu][hi][None, :]

            s1 = species_split(mu)[0]
            s2 = species_split(nu)[0]
            if s1 == "b" and s2 == "b":
                m_e = _eval_double_b("e", mu, nu, xi, zeta, eta, p)
                m_i = _eval_double_b("i", mu, nu, xi, zeta, eta, p)
            elif s2 == "b":
                m_e = _eval_single_b("e", mu, nu, xi, zeta, eta, p)
                m_i = _eval_single_b("i", mu, nu, xi, zeta, eta, p)
            else:
                m_e = _eval_acoustic("e", mu, nu, xi, zeta, eta, p)
                m_i = _eval_acoustic("i", mu, nu, xi, zeta, eta, p)
            np.add.at(N_e, out_idx.ravel(), (m_e * prod).ravel())
            np.add.at(N_i, out_idx.ravel(), (m_i * prod).ravel())

            core = _eval_b_core(mu, nu, xi, zeta, eta, p)
            if core.any():
                contrib = core * prod
                for a in range(3):
                    np.add.at(W_b[a], out_idx.ravel(), contrib[a].ravel())

    c = n ** -1.5
    shape = (n, n, n)
    N_b = c * q2_apply(g, W_b.reshape((3,) + shape))
    return c * N_e.reshape(shape), c * N_i.reshape(shape), N_b


# ---------------------------------------------------------------------------
# residuals and profiles


def dispersive_residual(traj, p: PlasmaParams, include_nonlinearity: bool = True):
    """Per-branch L2 residual of (d_t + i Lam_sigma)U_sigma = N_sigma.

    ``traj`` is a uniformly sampled sequence of PhysState (at least five);
    d_t uses the 4th-order central stencil, so the first and last two
    snapshots carry no residual row.  With ``include_nonlinearity`` off the
    residual is taken against the free flow instead.
    """
    if len(traj) < 5:
        raise ValueError("need at least five snapshots for the time stencil")
    times = np.array([s.t for s in traj])
    steps = np.diff(times)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-8, atol=0.0):
        raise ValueError("snapshots are not uniformly spaced in time")

    g = traj[0].grid
    sym = _symbols(g, p)
    states = [to_dispersive(s, p, check=False) for s in traj]

    # the stencil only resolves phases that rotate slowly between snapshots
    for branch, U0 in (("e", states[0].U_e), ("i", states[0].U_i),
                       ("b", states[0].U_b)):
        mag = np.abs(U0)
        top = mag.max()
        if top == 0.0:
            continue
        live = mag > 1e-14 * top
        if U0.ndim == 4:
            live = live.any(axis=0)
        omega = float(np.max(sym[f"lam_{branch}"][live]))
        if omega * abs(dt) > 1.0:
            warnings.warn(
                f"branch {branch}: fastest retained mode turns {omega * abs(dt):.2f} "
                "radians per snapshot; the 4th-order stencil needs finer sampling",
                RuntimeWarning, stacklevel=2)

    out = {"t": times[2:-2], "e": [], "i": [], "b": []}
    for k in range(2, len(traj) - 2):
        if include_nonlinearity:
            N_e, N_i, N_b = nonlinearity_direct(traj[k], p)
        else:
            N_e = N_i = N_b = 0.0
        for branch, N in (("e", N_e), ("i", N_i), ("b", N_b)):
            U = [getattr(states[k + j], f"U_{branch}") for j in (-2, -1, 0, 1, 2)]
            Udot = (U[0] - 8 * U[1] + 8 * U[3] - U[4]) / (12.0 * dt)
            res = Udot + 1j * sym[f"lam_{branch}"] * U[2] - N
            out[branch].append(l2_norm(g, res))
    for branch in ("e", "i", "b"):
        out[branch] = np.array(out[branch])
    return out


def profile(d: DispState, p: PlasmaParams) -> DispState:
    """V_sigma = e^{+i t Lam_sigma} U_sigma; constant along the free flow."""
    sym = _symbols(d.grid, p)
    return DispState(
        d.grid,
        np.exp(1j * d.t * sym["lam_e"]) * d.U_e,
        np.exp(1j * d.t * sym["lam_i"]) * d.U_i,
        np.exp(1j * d.t * sym["lam_b"]) * d.U_b,
        d.t,
    )


def hn_norm(grid: Grid, coef: np.ndarray, order: int = 0) -> float:
    """Continuum-calibrated Sobolev norm of a coefficient field."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    w = (1.0 + grid.xi_mag ** 2) ** (order / 2.0)
    return l2_norm(grid, w * coef)
