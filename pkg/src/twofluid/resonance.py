"""Space-time resonance analysis for the three-branch quadratic interactions.

A quadratic interaction producing output branch sigma from inputs
mu = (sigma_1, iota_1) and nu = (sigma_2, iota_2) oscillates with the phase

    Phi(xi, eta) = Lambda_sigma(xi) - iota_1 Lambda_{sigma_1}(xi - eta)
                   - iota_2 Lambda_{sigma_2}(eta),

and the obstruction to removing the interaction by a normal form is the set
where both Phi and its eta-gradient Xi are small.  This module holds the
static classification of all 63 phases (strongly elliptic, nonresonant, or
cases A/B/C), brute-force near-resonant scans over dyadic shells, and the
constructive geometry of the resonant sets: the radial matching functions t,
their inverses r^{mu,nu}, the resonant curve p_res with Xi(xi, p_res(xi)) = 0,
the reduced phase Psi along it, and the case-B radii R_sigma.

A phase is written "sigma;mu,nu", e.g. "e;i+,e+".  The input pair is
unordered for classification (the tables identify (mu,nu) with (nu,mu),
via Phi^{sigma;mu,nu}(xi,eta) = Phi^{sigma;nu,mu}(xi,xi-eta)) but ordered
for the geometry functions, whose defining equations distinguish the slots.

The analytic box constant D is "sufficiently large" and carries no numeric
value; scans expose D_num (default 10) and report case assignment as a
function of it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dispersion import find_R_sigma, lam, lam_prime, lam_second
from .params import PlasmaParams

D_NUM = 10

BRANCHES = ("i", "e", "b")
PHASE_SPECIES = ("i+", "i-", "e+", "e-", "b+", "b-")


@dataclass(frozen=True, order=True)
class PhaseSpec:
    """One phase function Phi^{sigma;mu,nu}, input slots in order."""

    sigma: str
    mu: str
    nu: str

    def __post_init__(self):
        if self.sigma not in BRANCHES:
            raise ValueError(f"unknown output branch {self.sigma!r}")
        for q in (self.mu, self.nu):
            if q not in PHASE_SPECIES:
                raise ValueError(f"unknown input species {q!r}")

    @classmethod
    def parse(cls, text: str) -> "PhaseSpec":
        """Accepts 'e;i+,e+' (and 'e:i+,e+', the CLI spelling)."""
        head, _, tail = text.replace(":", ";").partition(";")
        mu, _, nu = tail.partition(",")
        return cls(head.strip(), mu.strip(), nu.strip())

    @property
    def key(self) -> str:
        return f"{self.sigma};{self.mu},{self.nu}"

    @property
    def branch1(self) -> str:
        return self.mu[0]

    @property
    def branch2(self) -> str:
        return self.nu[0]

    @property
    def iota1(self) -> int:
        return 1 if self.mu[1] == "+" else -1

    @property
    def iota2(self) -> int:
        return 1 if self.nu[1] == "+" else -1

    def swapped(self) -> "PhaseSpec":
        return PhaseSpec(self.sigma, self.nu, self.mu)

    def canonical(self) -> "PhaseSpec":
        """Representative modulo input swap (species order as in PHASE_SPECIES)."""
        if PHASE_SPECIES.index(self.mu) <= PHASE_SPECIES.index(self.nu):
            return self
        return self.swapped()


ALL_PHASES = tuple(
    PhaseSpec(sigma, PHASE_SPECIES[a], PHASE_SPECIES[b])
    for sigma in BRANCHES
    for a in range(6)
    for b in range(a, 6)
)


def _specs(text: str) -> frozenset:
    return frozenset(PhaseSpec.parse(tok) for tok in text.split())


# the 39 strongly elliptic phases: |Phi| has a positive lower bound on shells
T_SELL = _specs("""
    i;i+,e+ i;i+,e- i;i+,b+ i;i+,b- i;i-,e- i;i-,b- i;e+,e+ i;e+,b+ i;e-,e- i;e-,b-
    i;b+,b+ i;b-,b- e;i+,i- e;i+,e- e;i+,b- e;i-,i- e;i-,e- e;i-,b- e;e+,e+ e;e+,e-
    e;e+,b+ e;e+,b- e;e-,e- e;e-,b- e;b+,b+ e;b-,b- b;i+,i- b;i+,e- b;i+,b- b;i-,i-
    b;i-,e- b;i-,b- b;e+,e- b;e+,b- b;e-,e- b;e-,b- b;b+,b+ b;b+,b- b;b-,b-
""")

# 4 more with empty near-resonant sets for reasons involving Xi as well
T_NR = _specs("e;i+,i+ e;b+,b- b;i+,i+ b;i-,e+")

# the 20 genuinely resonant phases; A and B/C overlap in four entries
T_A = _specs("""
    i;i-,e+ i;i-,b+ i;e+,b- i;e-,b+ e;i+,e+ e;i+,b+ e;i-,b+ e;e-,b+
    b;i+,e+ b;i+,b+ b;e+,e+ b;e+,b+ b;e-,b+
""")
T_B = _specs("e;i+,e+ e;i-,e+ b;i+,b+ b;i-,b+")
T_C = _specs("i;i+,i+ i;i+,i- i;i-,i- i;e+,e- i;e+,b- i;e-,b+ i;b+,b-")

# ordered variant used by the resonant-curve construction: second slot swapped
# to the front so that sigma_1 carries the fast branch
T_A_ORDERED = frozenset(s.swapped() for s in T_A)

# phases whose near-zero window is provably empty inside the shell box: the
# collinear profile f starts nonnegative and increases, so it never returns
# to zero away from the domain edge
VACUOUS_A = _specs("e;e+,i+ b;e+,i+ b;b+,i+")

# proved sign of d/ds Psi on the near-zero window, per ordered phase; the two
# -1 entries are the phases whose resonant input is faster than the output
C_TILDE = {spec: -1 if spec.key in ("i;b-,e+", "e;b+,i-") else 1
           for spec in T_A_ORDERED}

_DEFP2 = PhaseSpec.parse("e;b+,i-")


@dataclass(frozen=True)
class PhaseClass:
    sell: bool
    nr: bool
    a: bool
    b: bool
    c: bool

    @property
    def resonant(self) -> bool:
        return self.a or self.b or self.c

    @property
    def labels(self) -> str:
        flags = zip("SNABC", (self.sell, self.nr, self.a, self.b, self.c))
        return "".join(ch for ch, on in flags if on)


def classify(spec: PhaseSpec) -> PhaseClass:
    """Static table lookup, symmetrized over the input order."""
    c = spec.canonical()
    return PhaseClass(c in T_SELL, c in T_NR, c in T_A, c in T_B, c in T_C)


# ---------------------------------------------------------------------------
# phase functions


def _norm3(v):
    return np.sqrt(np.sum(np.square(v), axis=0))


def phi(spec: PhaseSpec, xi, eta, p: PlasmaParams):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return (lam(spec.sigma, _norm3(xi), p)
            - spec.iota1 * lam(spec.branch1, _norm3(xi - eta), p)
            - spec.iota2 * lam(spec.branch2, _norm3(eta), p))


def xi(spec: PhaseSpec, xi, eta, p: PlasmaParams):
    """The eta-gradient of phi; a 3-vector (leading axis).

    Undefined where eta or xi - eta vanishes: the radial direction is
    ambiguous there even on the i branch, where lambda' stays finite.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    zeta = xi - eta
    zm = _norm3(zeta)
    em = _norm3(eta)
    if np.any(zm == 0.0) or np.any(em == 0.0):
        raise ValueError("gradient is singular where eta or xi - eta vanishes")
    return (spec.iota1 * lam_prime(spec.branch1, zm, p) * zeta / zm
            - spec.iota2 * lam_prime(spec.branch2, em, p) * eta / em)


# ---------------------------------------------------------------------------
# radial geometry of the space-resonant sets


def _t_sup(pair: str, p: PlasmaParams) -> float:
    # upper bounds on the matching radii; the ee pair is unbounded
    if pair == "ei":
        return np.sqrt(3.0 * p.epsilon / p.T)
    if pair == "bi":
        return np.sqrt(p.epsilon / p.C_b)
    if pair == "be":
        return np.sqrt(p.T * (1.0 + p.epsilon) / (p.C_b * (p.C_b - p.T)))
    return np.inf


def t_func(pair: str, r, p: PlasmaParams):
    """Radial matching functions between branch group velocities.

    t^{ee}(r) = r, and otherwise lambda'_e(t^{ei}(r)) = lambda'_i(r),
    lambda'_b(t^{bi}(r)) = lambda'_i(r), lambda'_b(t^{be}(r)) = lambda'_e(r).
    The b-targeted ones invert lambda'_b in closed form; t^{ei} is root-found.
    """
    r = np.asarray(r, dtype=float)
    if pair == "ee":
        return +r
    if pair in ("bi", "be"):
        v = lam_prime("i" if pair == "bi" else "e", r, p)
        eps, Cb = p.epsilon, p.C_b
        return np.sqrt(eps * (1.0 + eps)) * v / np.sqrt(Cb * (Cb - eps * v**2))
    if pair != "ei":
        raise ValueError(f"unknown matching pair {pair!r}")
    targets = np.atleast_1d(lam_prime("i", r, p))
    out = np.empty_like(targets)
    for j, v in enumerate(targets.ravel()):
        out.ravel()[j] = _invert_lam_prime("e", float(v), p)
    return out if r.ndim else float(out[0])


def _invert_lam_prime(branch: str, target: float, p: PlasmaParams) -> float:
    f = lambda x: lam_prime(branch, x, p) - target  # noqa: E731
    hi = np.sqrt(3.0 * p.epsilon / p.T)
    for _ in range(80):
        if f(hi) >= 0.0:
            return brentq(f, 0.0, hi, xtol=1e-15, rtol=8.9e-16)
        hi *= 2.0
    raise RuntimeError(f"bracket failure inverting lambda'_{branch} at {target:.6g}")


def t_func_prime(pair: str, r, p: PlasmaParams):
    """d t^{pair}/dr, the ratio of second derivatives along the matching."""
    r = np.asarray(r, dtype=float)
    if pair == "ee":
        return np.ones_like(r) if r.ndim else 1.0
    t = t_func(pair, r, p)
    src = "e" if pair == "be" else "i"
    dst = "b" if pair[0] == "b" else "e"
    return lam_second(src, r, p) / lam_second(dst, t, p)


def _pair_of(spec: PhaseSpec) -> str:
    pair = spec.branch1 + spec.branch2
    if pair not in ("ee", "ei", "bi", "be"):
        raise ValueError(f"no radial matching function for input branches {pair!r}")
    return pair


def t_tilde(spec: PhaseSpec, r, p: PlasmaParams):
    """The signed combination r + iota_1 iota_2 t^{sigma_1 sigma_2}(r)."""
    pair = _pair_of(spec)
    sgn = spec.iota1 * spec.iota2
    if pair == "ee" and sgn < 0:
        raise ValueError("t_tilde degenerates to 0 for opposite-sign ee inputs")
    return np.asarray(r, dtype=float) + sgn * t_func(pair, r, p)


def r_munu(spec: PhaseSpec, s, p: PlasmaParams):
    """Inverse of t_tilde; increasing from 0 on [iota_1 iota_2 t(0), infinity)."""
    pair = _pair_of(spec)
    sgn = spec.iota1 * spec.iota2
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if pair == "ee":
        if sgn < 0:
            raise ValueError("t_tilde degenerates to 0 for opposite-sign ee inputs")
        out = 0.5 * s_arr
        if np.any(s_arr < -1e-12):
            raise ValueError("s below the domain of r^{mu,nu}")
        return out if np.ndim(s) else float(out[0])
    s0 = sgn * float(t_func(pair, 0.0, p))
    if np.any(s_arr < s0 - 1e-12):
        raise ValueError(f"s below the domain of r^{{mu,nu}} (edge {s0:.6g})")
    hi_pad = 0.0 if sgn > 0 else 2.0 * _t_sup(pair, p)
    out = np.empty_like(s_arr)
    for j, sv in enumerate(s_arr):
        f = lambda r: r + sgn * float(t_func(pair, r, p)) - sv  # noqa: E731
        lo, hi = 0.0, max(sv, 0.0) + hi_pad + 1e-9
        out[j] = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
    return out if np.ndim(s) else float(out[0])


def r_munu_prime(spec: PhaseSpec, s, p: PlasmaParams):
    """d r^{mu,nu}/ds = 1 / (1 + iota_1 iota_2 dt(r^{mu,nu}(s)))."""
    pair = _pair_of(spec)
    r = r_munu(spec, s, p)
    return 1.0 / (1.0 + spec.iota1 * spec.iota2 * t_func_prime(pair, r, p))


def q_munu(spec: PhaseSpec, eta, p: PlasmaParams):
    """The xi with Xi^{mu,nu}(xi, eta) = 0 on the ray of eta."""
    eta = np.asarray(eta, dtype=float)
    em = _norm3(eta)
    if np.any(em == 0.0):
        raise ValueError("q^{mu,nu} is undefined at eta = 0")
    return t_tilde(spec, em, p) * eta / em


def _ordered_rep(spec: PhaseSpec) -> PhaseSpec:
    if spec in T_A_ORDERED:
        return spec
    if spec.swapped() in T_A_ORDERED:
        return spec.swapped()
    raise ValueError(f"{spec.key} has no resonant-curve parametrization")


def _interval(spec: PhaseSpec, p: PlasmaParams):
    """I^{sigma;mu,nu}, the radii where the resonant curve exists."""
    t0 = float(t_func(_pair_of(spec), 0.0, p))
    if spec == _DEFP2:
        return 0.0, t0
    return t0, np.inf


def _r_signed(spec: PhaseSpec, s: float, p: PlasmaParams) -> float:
    # radial coordinate of p_res along xi; negative for the one phase whose
    # resonant input points opposite to the output
    lo, hi = _interval(spec, p)
    if not (lo - 1e-12 <= s <= hi + 1e-12):
        raise ValueError(f"|xi| = {s:.6g} outside I = [{lo:.6g}, {hi:.6g}] for {spec.key}")
    if spec == _DEFP2:
        return -float(r_munu(spec, -s, p))
    return float(r_munu(spec, s, p))


def p_res(spec: PhaseSpec, xi, p: PlasmaParams):
    """The resonant input frequency: Xi^{mu,nu}(xi, p_res(xi)) = 0.

    Defined for the 13 case-A phases in either input order; for the order
    with the slow branch first the curve is xi - p_res of the swapped phase.
    """
    xi = np.asarray(xi, dtype=float)
    s = float(_norm3(xi))
    if s == 0.0:
        raise ValueError("p_res is undefined at xi = 0")
    if spec in T_A_ORDERED:
        if spec.branch1 == spec.branch2 and spec.iota1 == spec.iota2:
            # identical legs split the output frequency evenly; keep the
            # halving exact instead of routing through r(s) * xi / s
            return 0.5 * xi
        return _r_signed(spec, s, p) * xi / s
    return xi - _r_signed(_ordered_rep(spec), s, p) * xi / s


def psi(spec: PhaseSpec, s, p: PlasmaParams):
    """The reduced phase Psi(s) = Phi(s e, p_res(s e)) along the resonant curve."""
    sp = _ordered_rep(spec)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(s_arr)
    for j, sv in enumerate(s_arr):
        rr = _r_signed(sp, float(sv), p)
        out[j] = (lam(sp.sigma, sv, p)
                  - sp.iota1 * lam(sp.branch1, abs(rr - sv), p)
                  - sp.iota2 * lam(sp.branch2, abs(rr), p))
    return out if np.ndim(s) else float(out[0])


def f_profile(spec: PhaseSpec, r, p: PlasmaParams):
    """The phase along the space-resonant ray: f(r) = Phi(q(r e), r e).

    Equals lambda_sigma(|t_tilde(r)|) - iota_1 lambda_{sigma_1}(t(r))
    - iota_2 lambda_{sigma_2}(r); its zeros are the space-time resonant
    radii, and Psi is f read through the reparametrization s = |t_tilde(r)|.
    """
    pair = _pair_of(spec)
    r = np.asarray(r, dtype=float)
    return (lam(spec.sigma, np.abs(t_tilde(spec, r, p)), p)
            - spec.iota1 * lam(spec.branch1, t_func(pair, r, p), p)
            - spec.iota2 * lam(spec.branch2, r, p))


def r_fixed_point(p: PlasmaParams) -> float:
    """The radius with t^{bi}(r) = r, where the antiparallel branch closes."""
    return brentq(lambda r: float(t_func("bi", r, p)) - r,
                  0.0, float(_t_sup("bi", p)) + 1e-9, xtol=1e-15, rtol=8.9e-16)


def psi_zeros(spec: PhaseSpec, p: PlasmaParams, r_hi: float = 64.0,
              n: int = 4096) -> list:
    """Interior zeros of Psi, located through the profile f.

    Scans f on a geometric radial grid (for the antiparallel phase, on its
    closed branch r in (0, r_fixed_point)), refines each sign change with a
    root finder, and measures d/ds Psi there by a central difference.
    Returns dicts with keys r, s, dpsi.  The degenerate zero that several
    phases have at the domain edge itself is excluded by construction.
    """
    sp = _ordered_rep(spec)
    if sp == _DEFP2:
        r0 = r_fixed_point(p)
        grid = np.linspace(r0 * 1e-6, r0 * (1.0 - 1e-9), n)
    else:
        grid = np.geomspace(1e-6, r_hi, n)
    vals = f_profile(sp, grid, p)
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    out = []
    for j in sign_change:
        rz = brentq(lambda r: float(f_profile(sp, r, p)), grid[j], grid[j + 1],
                    xtol=1e-15, rtol=8.9e-16)
        sz = abs(float(t_tilde(sp, rz, p)))
        lo, hi = _interval(sp, p)
        if not lo <= sz <= hi:
            continue
        h = 1e-6 * max(sz, 1.0)
        dpsi = (psi(sp, min(sz + h, hi), p) - psi(sp, max(sz - h, lo), p)) / (
            min(sz + h, hi) - max(sz - h, lo))
        out.append({"r": float(rz), "s": sz, "dpsi": float(dpsi)})
    return out


def ctilde_report(p: PlasmaParams, r_hi: float = 64.0, n: int = 4096) -> dict:
    """Measured resonant-zero structure against the proved c-tilde table.

    For each ordered case-A phase: the profile value f(0) at the domain
    edge, the interior zeros of Psi with the measured sign of d/ds Psi
    there, and whether that sign matches the table.  Discrepancies are
    reported, never resolved: 'agree' is False when a measured sign differs
    from the proved one, and when a phase proved window-free shows an
    interior zero.
    """
    rows = {}
    for sp in sorted(T_A_ORDERED):
        zeros = psi_zeros(sp, p, r_hi=r_hi, n=n)
        signs = {int(np.sign(z["dpsi"])) for z in zeros}
        measured = signs.pop() if len(signs) == 1 else (0 if signs else None)
        vacuous = sp in VACUOUS_A
        agree = measured in (None, C_TILDE[sp]) and not (vacuous and zeros)
        rows[sp.key] = {"f0": float(f_profile(sp, 0.0, p)),
                        "zeros": zeros, "measured": measured,
                        "proved": C_TILDE[sp], "vacuous": vacuous,
                        "agree": agree}
    return rows


def caseB_r(spec: PhaseSpec, s: float, p: PlasmaParams,
            D_num: int = D_NUM) -> dict:
    """Case-B resonant radius: the root r of lambda'_{sigma_2}(r) = lambda'_i(|s - r|).

    The even extension of lambda'_i is C^1 at zero (lambda_i'' vanishes
    there), so the equation has a single root near R_{sigma_2} regardless
    of the ion sign; which side of R_{sigma_2} the near-resonances live on
    is decided by iota_1 afterwards.
    """
    c = spec.canonical()
    if c not in T_B:
        raise ValueError(f"{spec.key} is not a case-B phase")
    sigma2 = c.branch2
    R = find_R_sigma(sigma2, p)
    if not abs(s - R) < 2.0 ** (-D_num / 5.0):
        raise ValueError(f"s = {s:.6g} outside the case-B window around {R:.6g}")
    g = lambda r: lam_prime(sigma2, r, p) - lam_prime("i", abs(s - r), p)  # noqa: E731
    lo = max(R - 2.0 ** (-D_num / 10.0), 0.0)
    hi = R + 2.0 ** (-D_num / 10.0)
    root = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)
    return {"R": R, "r": float(root), "residual": float(g(root))}


# ---------------------------------------------------------------------------
# brute-force shell scans


@dataclass(frozen=True)
class ResonanceSample:
    xi: np.ndarray
    eta: np.ndarray
    phi_abs: float
    xi_abs: float
    k: int
    k1: int
    k2: int
    cases: tuple


def admissible_cases(pc: PhaseClass, k: int, k1: int, k2: int,
                     D_num: int = D_NUM) -> tuple:
    """Case letters the shell trichotomy allows for a classified phase."""
    out = []
    if pc.a and -D_num / 2 <= min(k, k1, k2) and max(k, k1, k2) <= D_num / 2:
        out.append("A")
    if pc.b and min(k1, k2) <= -D_num / 3 and k >= -D_num / 4:
        out.append("B")
    if pc.c and k <= -D_num / 4:
        out.append("C")
    return tuple(out)


def stronglyell_deltas(k1: int, k2: int, D_num: int = D_NUM) -> tuple:
    """(delta_1, delta_2) thresholds for shell (k1, k2)."""
    m = max(k1, k2, 0)
    return 2.0 ** (-D_num - 4 * m), 2.0 ** (-D_num - m)


def _plane_tables(p: PlasmaParams, s_vals, rho, costh) -> dict:
    """Radial quantities on the (s, rho, theta) product, rotation-reduced.

    xi = s zhat and eta lies in a half-plane through zhat; everything any
    phase needs is a function of the three radii and one angle cosine.
    """
    st = s_vals[:, None, None]
    rh = rho[None, :, None]
    ct = costh[None, None, :]
    zm = np.sqrt(np.maximum(st * st + rh * rh - 2.0 * st * rh * ct, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        cosb = (st * ct - rh) / zm  # angle between xi - eta and eta
    return {
        "s": s_vals, "rho": rho, "zm": zm, "cosb": cosb,
        "lam_s": {br: lam(br, s_vals, p) for br in BRANCHES},
        "lam_r": {br: lam(br, rho, p) for br in BRANCHES},
        "lam_z": {br: lam(br, zm, p) for br in BRANCHES},
        "lamp_r": {br: lam_prime(br, rho, p) for br in BRANCHES},
        "lamp_z": {br: lam_prime(br, zm, p) for br in BRANCHES},
    }


def _phase_on_plane(spec: PhaseSpec, t: dict):
    """(Phi, |Xi|^2) over a table block."""
    i1, i2 = spec.iota1, spec.iota2
    Phi = (t["lam_s"][spec.sigma][:, None, None]
           - i1 * t["lam_z"][spec.branch1]
           - i2 * t["lam_r"][spec.branch2][None, :, None])
    a = t["lamp_z"][spec.branch1]
    b = t["lamp_r"][spec.branch2][None, :, None]
    with np.errstate(invalid="ignore"):
        Xi2 = a * a + b * b - (2.0 * i1 * i2) * a * b * t["cosb"]
    return Phi, Xi2


def scan_near_resonant(spec: PhaseSpec, k: int, k1: int, k2: int,
                       delta1: float, delta2: float, p: PlasmaParams,
                       resolution: tuple = (256, 256, 128),
                       D_num: int = D_NUM, block: int = 64) -> list:
    """All grid samples of shell (k, k1, k2) with |Xi| <= delta1, |Phi| <= delta2.

    The scan is exhaustive over the rotation-reduced grid: radial xi times
    radial eta (both geometric) times the polar angle, with the xi - eta
    shell enforced as a filter.
    """
    n_s, n_r, n_t = resolution
    s_all = np.geomspace(2.0 ** (k - 4), 2.0 ** (k + 4), n_s)
    rho = np.geomspace(2.0 ** (k2 - 4), 2.0 ** (k2 + 4), n_r)
    theta = np.linspace(0.0, np.pi, n_t)
    costh, sinth = np.cos(theta), np.sin(theta)
    cases = admissible_cases(classify(spec), k, k1, k2, D_num)
    out = []
    for i0 in range(0, n_s, block):
        sb = s_all[i0:i0 + block]
        t = _plane_tables(p, sb, rho, costh)
        Phi, Xi2 = _phase_on_plane(spec, t)
        with np.errstate(invalid="ignore"):
            mask = ((t["zm"] >= 2.0 ** (k1 - 4)) & (t["zm"] <= 2.0 ** (k1 + 4))
                    & (np.abs(Phi) <= delta2) & (Xi2 <= delta1 * delta1))
        for ii, jj, kk in np.argwhere(mask):
            s, r = sb[ii], rho[jj]
            out.append(ResonanceSample(
                xi=np.array([0.0, 0.0, s]),
                eta=np.array([r * sinth[kk], 0.0, r * costh[kk]]),
                phi_abs=float(abs(Phi[ii, jj, kk])),
                xi_abs=float(np.sqrt(max(Xi2[ii, jj, kk], 0.0))),
                k=k, k1=k1, k2=k2, cases=cases))
    return out


def case_d_window(pc: PhaseClass, k: int, k1: int, k2: int,
                  d_lo: int = 4, d_hi: int = 48) -> dict:
    """Cutoff values D in [d_lo, d_hi] for which each case admits the triple.

    The case inequalities compare shells against fractions of a cutoff that
    the underlying analysis takes arbitrarily large, with thresholds that
    shrink along.  Run at a fixed cutoff and fixed thresholds, a triple near
    a case boundary is admissible only for a window of cutoffs; reporting
    the window says where the assignment lives instead of forcing a yes/no
    at one value.
    """
    out = {}
    if pc.a:
        lo = max(2 * max(abs(k), abs(k1), abs(k2)), d_lo)
        if lo <= d_hi:
            out["A"] = (lo, d_hi)
    if pc.b:
        lo = max(-4 * k, d_lo)
        hi = min(-3 * min(k1, k2), d_hi)
        if lo <= hi:
            out["B"] = (lo, hi)
    if pc.c:
        hi = min(-4 * k, d_hi)
        if d_lo <= hi:
            out["C"] = (d_lo, hi)
    return out


@dataclass
class PartitionReport:
    d_num: int
    shells: tuple
    resolution: tuple
    delta_base: float
    refined: bool = False
    hits: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    elliptic_floor: dict = field(default_factory=dict)

    @property
    def sell_or_nr_hits(self) -> dict:
        out = {}
        for key, shells in self.hits.items():
            cls = classify(PhaseSpec.parse(key))
            if (cls.sell or cls.nr) and shells:
                out[key] = sorted(shells)
        return out

    @property
    def ok(self) -> bool:
        return not self.unresolved and not self.sell_or_nr_hits

    def in_box(self, triple) -> bool:
        kmin, kmax = min(self.shells), max(self.shells)
        return all(kmin <= k <= kmax for k in triple)

    def summary(self) -> str:
        lines = [f"D_num = {self.d_num}, shells {self.shells[0]}..{self.shells[-1]}, "
                 f"resolution {self.resolution}, delta base {self.delta_base:.3e}, "
                 f"refined = {self.refined}"]
        for key in sorted(self.hits):
            shells = self.hits[key]
            if not shells:
                continue
            cls = classify(PhaseSpec.parse(key))
            n = sum(v[0] for v in shells.values())
            lines.append(f"  {key:10s} [{cls.labels:>3s}] near-resonant samples: {n:7d} "
                         f"in {len(shells):3d} home triples")
        lines.append(f"elliptic/nonresonant phases with hits: {len(self.sell_or_nr_hits)}")
        lines.append(f"triples outside the case conditions at D_num={self.d_num}: "
                     f"{len(self.violations)}")
        for key, triple, wins in self.violations:
            span = ", ".join(f"{c}:{lo}..{hi}" for c, (lo, hi) in sorted(wins.items()))
            lines.append(f"    {key:10s} {triple}  admissible at D_num {span or 'none'}")
        lines.append(f"triples outside every case at every cutoff: {len(self.unresolved)}")
        return "\n".join(lines)


def _on_manifold_probes(spec: PhaseSpec, p: PlasmaParams, base: float) -> list:
    """Deterministic (xi, eta) probes along this phase's exact resonant geometry.

    Uniform grids miss the thin pieces: the gradient-matching condition pins
    one input radius to within ~delta/lambda'' of a fixed value, far below
    any affordable grid spacing.  Seeding from the solved geometry instead
    of hoping a gridpoint lands there is what makes the scan exhaustive.
    """
    probes = []

    def emit(rep, xi_s, eta_r):
        # vectors for the representative's labeling; convert if the scanned
        # spec is its swap partner (same phase value, legs exchanged)
        xiv = np.array([0.0, 0.0, xi_s])
        etav = np.array([0.0, 0.0, eta_r])
        if rep != spec:
            etav = xiv - etav
        probes.append((xiv, etav))

    rep = spec if spec in T_A_ORDERED else spec.swapped()
    if rep in T_A_ORDERED:
        # sphere hits: exact zero of the radial profile, plus the window the
        # transversal derivative allows on either side
        for z in psi_zeros(rep, p):
            r0 = z["r"]
            halfwidth = 0.8 * base / (abs(z["dpsi"]) * 2.0 + 1e-30)
            for dr in np.linspace(-halfwidth, halfwidth, 15):
                r = r0 + dr
                if r > 0:
                    emit(rep, float(t_tilde(rep, r, p)), r)
        # endpoint slivers: the profile vanishes at r -> 0 for some phases,
        # so the whole low-r stretch of the manifold sits under the threshold
        r_hi = r_fixed_point(p) * (1.0 - 1e-9) if rep == _DEFP2 else 0.25
        for r in np.geomspace(2.0 ** -12, r_hi, 300):
            emit(rep, float(t_tilde(rep, r, p)), r)

    brep = spec if spec in T_B else spec.swapped()
    if brep in T_B:
        # degenerate hits: eta-leg radius pinned where its group velocity
        # matches the zero-frequency ion one, other input small
        sgn = brep.iota1
        for w in np.geomspace(2.0 ** -12, 2.0 ** -5, 160):
            target = lam_prime("i", w, p)
            rho_star = _invert_lam_prime(brep.branch2, target, p)
            s = rho_star + sgn * w
            if s <= 0:
                continue
            xiv = np.array([0.0, 0.0, s])
            etav = np.array([0.0, 0.0, rho_star])
            if brep != spec:
                etav = xiv - etav
            probes.append((xiv, etav))
    return probes


def verify_case_partition(p: PlasmaParams, specs=None, shells=range(-8, 5),
                          D_num: int = D_NUM, resolution: tuple = (1024, 512, 256),
                          delta_base: float = None, block: int = 16,
                          refine: bool = True) -> PartitionReport:
    """Exhaustive near-resonance census, binned by home dyadic shells.

    One global rotation-reduced grid is scanned for every phase at once;
    each sample passing the shell-weighted thresholds is charged to the
    dyadic shell of each of its three radii.  With refine on, exact-geometry
    probes are added so detection does not depend on the grid straddling the
    thin gradient-matched regions.  Sell and nonresonant phases must come
    back empty.  For the rest, every nonempty home triple inside the scanned
    box is checked against the case conditions at this D_num; failures are
    listed together with the cutoff window that admits them, and triples no
    cutoff admits land in `unresolved`.
    """
    specs = tuple(specs) if specs is not None else ALL_PHASES
    shells = tuple(shells)
    kmin, kmax = min(shells), max(shells)
    base = 2.0 ** (-D_num) if delta_base is None else float(delta_base)
    n_s, n_r, n_t = resolution
    s_all = np.geomspace(2.0 ** (kmin - 4), 2.0 ** (kmax + 4), n_s)
    rho = np.geomspace(2.0 ** (kmin - 4), 2.0 ** (kmax + 4), n_r)
    costh = np.cos(np.linspace(0.0, np.pi, n_t))

    report = PartitionReport(D_num, shells, resolution, base, refined=refine,
                             hits={sp.key: {} for sp in specs},
                             elliptic_floor={sp.key: np.inf for sp in specs})
    samples = {sp.key: [] for sp in specs}  # rows (k, k1, k2, |Phi|, |Xi|)

    def keep(key, s, z, r, aph, axi):
        # home shells plus the per-sample shell-weighted threshold test
        good = (s > 0) & (z > 0) & (r > 0) & np.isfinite(aph) & np.isfinite(axi)
        s, z, r, aph, axi = s[good], z[good], r[good], aph[good], axi[good]
        if not s.size:
            return
        k = np.floor(np.log2(s))
        k1 = np.floor(np.log2(z))
        k2 = np.floor(np.log2(r))
        m = np.maximum(np.maximum(k1, k2), 0.0)
        strict = (aph <= base * 2.0 ** (-m)) & (axi <= base * 2.0 ** (-4.0 * m))
        if strict.any():
            samples[key].append(np.column_stack([
                k[strict], k1[strict], k2[strict], aph[strict], axi[strict]]))

    for i0 in range(0, n_s, block):
        sb = s_all[i0:i0 + block]
        t = _plane_tables(p, sb, rho, costh)
        # pointwise analogue of the 2^{max(k1,k2,0)} shell weight
        w = np.maximum(t["zm"], np.maximum(rho[None, :, None], 1.0))
        for sp in specs:
            Phi, Xi2 = _phase_on_plane(sp, t)
            aphi = np.abs(Phi)
            floor = float(np.nanmin(aphi * w))
            report.elliptic_floor[sp.key] = min(report.elliptic_floor[sp.key], floor)
            with np.errstate(invalid="ignore"):
                mask = (aphi <= base) & (Xi2 <= base * base)
            if not mask.any():
                continue
            ii, jj, kk = np.nonzero(mask)
            keep(sp.key, sb[ii], t["zm"][ii, jj, kk], rho[jj],
                 aphi[ii, jj, kk], np.sqrt(np.maximum(Xi2[ii, jj, kk], 0.0)))

    if refine:
        for sp in specs:
            if not classify(sp).resonant:
                continue
            rows = []
            for xiv, etav in _on_manifold_probes(sp, p, base):
                zeta = xiv - etav
                rows.append((_norm3(xiv), _norm3(zeta), _norm3(etav),
                             abs(phi(sp, xiv, etav, p)),
                             _norm3(xi(sp, xiv, etav, p))))
            if rows:
                s, z, r, aph, axi = np.array(rows).T
                keep(sp.key, s, z, r, aph, axi)

    for sp in specs:
        if not samples[sp.key]:
            continue
        rows = np.concatenate(samples[sp.key])
        triples, inv = np.unique(rows[:, :3].astype(int), axis=0, return_inverse=True)
        counts = np.bincount(inv, minlength=len(triples))
        min_phi = np.full(len(triples), np.inf)
        min_xi = np.full(len(triples), np.inf)
        np.minimum.at(min_phi, inv, rows[:, 3])
        np.minimum.at(min_xi, inv, rows[:, 4])
        report.hits[sp.key] = {
            tuple(tr): [int(n), float(a), float(x)]
            for tr, n, a, x in zip(triples.tolist(), counts, min_phi, min_xi)}

    for sp in specs:
        cls = classify(sp)
        if cls.sell or cls.nr:
            continue  # any hit is already reported through sell_or_nr_hits
        for triple in sorted(report.hits[sp.key]):
            if not report.in_box(triple):
                continue
            if admissible_cases(cls, *triple, D_num=D_num):
                continue
            wins = case_d_window(cls, *triple)
            report.violations.append((sp.key, triple, wins))
            if not wins:
                report.unresolved.append((sp.key, triple))
    return report


def atlas(spec: PhaseSpec, p: PlasmaParams, shells=range(-8, 5),
          delta1: float = 2.0 ** -10, delta2: float = 2.0 ** -10,
          resolution: tuple = (2048, 1024, 512), D_num: int = D_NUM,
          block: int = 8) -> list:
    """Per-shell-triple survey of one phase for the CSV atlas.

    Every sample is charged to its home triple (the dyadic shell of each
    radius); rows carry the passing-sample count and the minima of |Phi|
    and |Xi| over everything the triple saw.
    """
    shells = tuple(shells)
    kmin, kmax = min(shells), max(shells)
    R = kmax - kmin + 1
    n_s, n_r, n_t = resolution
    s_all = np.geomspace(2.0 ** (kmin - 4), 2.0 ** (kmax + 4), n_s)
    rho = np.geomspace(2.0 ** (kmin - 4), 2.0 ** (kmax + 4), n_r)
    costh = np.cos(np.linspace(0.0, np.pi, n_t))

    def home(x):
        return np.clip(np.floor(np.log2(x)).astype(int), kmin, kmax) - kmin

    counts = np.zeros(R * R * R, dtype=np.int64)
    min_phi = np.full(R * R * R, np.inf)
    min_xi = np.full(R * R * R, np.inf)
    ik2 = home(rho)
    for i0 in range(0, n_s, block):
        sb = s_all[i0:i0 + block]
        t = _plane_tables(p, sb, rho, costh)
        Phi, Xi2 = _phase_on_plane(spec, t)
        aphi = np.abs(Phi)
        with np.errstate(invalid="ignore"):
            axi = np.sqrt(np.maximum(Xi2, 0.0))
            passing = (aphi <= delta2) & (Xi2 <= delta1 * delta1)
        # the gradient is undefined where xi - eta vanishes; those samples
        # must not poison the per-triple minima
        axi = np.where(np.isfinite(axi), axi, np.inf)
        ik = home(sb)
        with np.errstate(divide="ignore", invalid="ignore"):
            ik1 = home(np.where(t["zm"] > 0, t["zm"], s_all[0]))
        flat = (ik[:, None, None] * R + ik1) * R + ik2[None, :, None]
        counts += np.bincount(flat[passing].ravel(), minlength=R * R * R)
        # grouped minima: one masked sweep per k1 value keeps this vectorized
        for v in range(R):
            sel = ik1 == v
            if not sel.any():
                continue
            pv = np.where(sel, aphi, np.inf).min(axis=2)
            xv = np.where(sel, axi, np.inf).min(axis=2)
            rows = (ik[:, None] * R + v) * R + ik2[None, :]
            np.minimum.at(min_phi, rows.ravel(), pv.ravel())
            np.minimum.at(min_xi, rows.ravel(), xv.ravel())

    cls = classify(spec)
    rows = []
    for flat in np.flatnonzero(np.isfinite(min_phi)):
        k = kmin + flat // (R * R)
        k1 = kmin + (flat // R) % R
        k2 = kmin + flat % R
        rows.append({"k": k, "k1": k1, "k2": k2, "count": int(counts[flat]),
                     "min_phi": float(min_phi[flat]), "min_xi": float(min_xi[flat]),
                     "cases": "".join(admissible_cases(cls, k, k1, k2, D_num))})
    return rows
