"""Dispersion relations of the linearized two-fluid system.

Linearizing around the flat equilibrium and diagonalizing gives three wave
branches with radial dispersion relations

    lambda_{i,e}(r) = eps^{-1/2} sqrt( ((1+eps) + (T+eps) r^2 -/+ s) / 2 ),
    lambda_b(r)     = eps^{-1/2} sqrt( 1 + eps + C_b r^2 ),

where u = (1-eps) + (T-eps) r^2 and s = sqrt(u^2 + 4 eps).  The ion branch
(-) vanishes linearly at r = 0, the electron (+) and light (b) branches both
start at sqrt(1/eps + 1).

Direct evaluation of the radicals loses accuracy where the branches nearly
degenerate, so this module evaluates everything through forms that keep the
small differences explicit:

    s^2 - (1+eps)^2 = (T-eps) r^2 (2(1-eps) + (T-eps) r^2)   (exact),
    lambda_e^2 - H_eps^2 = 2/(u+s),                          (exact)
    lambda_i(r) = r q_i(r),   q_i = sqrt((1+T+T r^2)/(eps lambda_e^2)),

together with closed forms for the first two radial derivatives.  The
radical shape is kept as a private reference (`_lambda_i_radical`) and the
exact identities are verified in arbitrary precision by
:func:`verify_identities`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .params import PlasmaParams
from .reporting import Report

BRANCHES = ("i", "e", "b")

#: default parameter point used across examples and tests
DEFAULT_PARAMS = PlasmaParams(epsilon=1.0e-3, T=1.0, C_b=6.0)


def _check_branch(branch: str) -> str:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return branch


def _prep(r, p: PlasmaParams):
    """Common subexpressions; preserves the floating dtype of ``r``."""
    r = np.asarray(r)
    dtype = np.result_type(r.dtype, np.float64)
    r = r.astype(dtype, copy=False)
    eps = dtype.type(p.epsilon)
    T = dtype.type(p.T)
    one = dtype.type(1.0)
    r2 = r * r
    u = (one - eps) + (T - eps) * r2
    # s = sqrt(u^2 + 4 eps), rewritten so that s(0) = 1 + eps exactly and no
    # cancellation occurs anywhere on r >= 0
    s = np.sqrt((one + eps) ** 2 + (T - eps) * r2 * (2 * (one - eps) + (T - eps) * r2))
    return r, r2, u, s, eps, T, dtype


# -- branch values -------------------------------------------------------------

def _m_of_r(r2, s, eps, T):
    """M = eps * lambda_e^2 = ((1+eps) + (T+eps) r^2 + s)/2."""
    return ((1 + eps) + (T + eps) * r2 + s) / 2


def lam(branch: str, r, p: PlasmaParams):
    """Dispersion relation lambda_branch(r), vectorized over r >= 0."""
    _check_branch(branch)
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    if branch == "b":
        C_b = dtype.type(p.C_b)
        return np.sqrt((1 + eps + C_b * r2) / eps)
    M = _m_of_r(r2, s, eps, T)
    if branch == "e":
        return np.sqrt(M / eps)
    # ion branch in the factored form r * q_i(r); exact zero at r = 0
    A = 1 + T + T * r2
    return r * np.sqrt(A / M)


def lam_prime(branch: str, r, p: PlasmaParams):
    """First radial derivative of lambda_branch."""
    _check_branch(branch)
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    if branch == "b":
        C_b = dtype.type(p.C_b)
        lb = np.sqrt((1 + eps + C_b * r2) / eps)
        return C_b * r / (eps * lb)
    M = _m_of_r(r2, s, eps, T)
    if branch == "e":
        le = np.sqrt(M / eps)
        Mp = (T + eps) * r + (T - eps) * r * u / s
        return Mp / (2 * eps * le)
    # 2 lambda_i lambda_i' = r W with W = ((T+eps) - (T-eps) u/s)/eps
    A = 1 + T + T * r2
    qi = np.sqrt(A / M)
    W = ((T + eps) - (T - eps) * u / s) / eps
    return W / (2 * qi)


def lam_second(branch: str, r, p: PlasmaParams):
    """Second radial derivative of lambda_branch."""
    _check_branch(branch)
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    if branch == "b":
        C_b = dtype.type(p.C_b)
        lb = np.sqrt((1 + eps + C_b * r2) / eps)
        return C_b * (1 + eps) / (eps**2 * lb**3)
    M = _m_of_r(r2, s, eps, T)
    Mp = (T + eps) * r + (T - eps) * r * u / s
    # d(u/s)/dr = 4 eps u' / s^3 with u' = 2 (T-eps) r, since s^2 - u^2 = 4 eps
    Mpp = (T + eps) + (T - eps) * u / s + 8 * eps * (T - eps) ** 2 * r2 / s**3
    if branch == "e":
        le = np.sqrt(M / eps)
        lep = Mp / (2 * eps * le)
        return (Mpp / eps - 2 * lep * lep) / (2 * le)
    # lambda_i' = W/(2 q_i); differentiate the quotient
    A = 1 + T + T * r2
    qi = np.sqrt(A / M)
    W = ((T + eps) - (T - eps) * u / s) / eps
    Wp = -8 * (T - eps) ** 2 * r / s**3
    qip = qi * (T * r / A - Mp / (2 * M))
    return Wp / (2 * qi) - W * qip / (2 * qi * qi)


def speed(branch: str, p: PlasmaParams) -> float:
    """Asymptotic slope c_branch = lim lambda'(r):  c_i=1, c_e=sqrt(T/eps), c_b=sqrt(C_b/eps)."""
    _check_branch(branch)
    if branch == "i":
        return 1.0
    if branch == "e":
        return float(np.sqrt(p.T / p.epsilon))
    return float(np.sqrt(p.C_b / p.epsilon))


# -- auxiliary radial symbols --------------------------------------------------

def h_eps(r, p: PlasmaParams):
    """H_eps(r) = sqrt((1 + T r^2)/eps), the electron branch without coupling."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return np.sqrt((1 + T * r2) / eps)


def h_eps_prime(r, p: PlasmaParams):
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return T * r / (eps * np.sqrt((1 + T * r2) / eps))


def h_eps_second(r, p: PlasmaParams):
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    h = np.sqrt((1 + T * r2) / eps)
    return T / (eps**2 * h**3)


def aux_symbols(r, p: PlasmaParams) -> dict:
    """The auxiliary radial symbols {H1, Heps, R}.

    R(r) = 2 sqrt(eps)/(u+s) takes values in (0, sqrt(eps)], with
    R(0) = sqrt(eps); it measures the coupling between the two acoustic
    branches:  lambda_e^2 - H_eps^2 = R/sqrt(eps) and
    H_eps^2 - lambda_i^2 = 1/(R sqrt(eps)).
    """
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return {
        "H1": np.sqrt(1 + r2),
        "Heps": np.sqrt((1 + T * r2) / eps),
        "R": 2 * np.sqrt(eps) / (u + s),
    }


def q_i(r, p: PlasmaParams):
    """q_i(r) = lambda_i(r)/r, continued by q_i(0) = sqrt((1+T)/(1+eps)).

    Decreasing from q_i(0) to 1; in particular r <= lambda_i(r) <= q_i(0) r.
    """
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    A = 1 + T + T * r2
    return np.sqrt(A / _m_of_r(r2, s, eps, T))


def q_i_prime(r, p: PlasmaParams):
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    A = 1 + T + T * r2
    M = _m_of_r(r2, s, eps, T)
    Mp = (T + eps) * r + (T - eps) * r * u / s
    return np.sqrt(A / M) * (T * r / A - Mp / (2 * M))


# -- stable differences of squared branches ------------------------------------
# These evaluate algebraically exact recasts with no cancellation; the
# arbitrary-precision suite checks them against the literal differences.

def gap_e_heps(r, p: PlasmaParams):
    """lambda_e^2 - H_eps^2 = 2/(u+s) > 0."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return 2 / (u + s)


def gap_heps_i(r, p: PlasmaParams):
    """H_eps^2 - lambda_i^2 = (u+s)/(2 eps) > 0."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return (u + s) / (2 * eps)


def gap_heps_h1(r, p: PlasmaParams):
    """H_eps^2 - H_1^2 = u/eps > 0."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return u / eps


def gap_e_i(r, p: PlasmaParams):
    """lambda_e^2 - lambda_i^2 = s/eps > 0 (difference of the two roots)."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return s / eps


def gap_b_e(r, p: PlasmaParams):
    """lambda_b^2 - lambda_e^2, factored as r^2 * (positive bracket)/(2 eps).

    Both branches start at the same value, so the plain difference would be
    a catastrophic cancellation near r = 0; here the r^2 factor is explicit:

      lambda_b^2 - lambda_e^2
        = r^2/(2 eps) * [ (2 C_b - T - eps)
                          - (T-eps)(2(1-eps) + (T-eps) r^2)/(s + 1 + eps) ].
    """
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    C_b = dtype.type(p.C_b)
    bracket = (2 * C_b - T - eps) - (T - eps) * (2 * (1 - eps) + (T - eps) * r2) / (s + 1 + eps)
    return r2 * bracket / (2 * eps)


def qi_margin(r, p: PlasmaParams):
    """A - M = (u + 2T - s)/2 >= 0, the exact margin behind q_i >= 1."""
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return (u + 2 * T - s) / 2


def _lambda_i_radical(r, p: PlasmaParams):
    """Ion branch straight from the radical; reference route only.

    Suffers cancellation as r -> 0 (the radicand is a difference of nearly
    equal terms); kept to cross-check the production factored form away
    from the origin.
    """
    r, r2, u, s, eps, T, dtype = _prep(r, p)
    return np.sqrt(((1 + eps) + (T + eps) * r2 - s) / (2 * eps))


# -- distinguished radii -------------------------------------------------------

def find_r_star(p: PlasmaParams) -> float:
    """The unique inflection radius of the ion branch, lambda_i''(r_*) = 0.

    Located in (T^(-1/2), 4 T^(-1/2) + 4 T^(-1/4)); lambda_i'' is negative
    below it and positive above.
    """
    lo = p.T ** (-0.5)
    hi = 4 * p.T ** (-0.5) + 4 * p.T ** (-0.25)
    f = lambda r: float(lam_second("i", r, p))
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 < fhi):
        raise RuntimeError(
            f"lambda_i'' does not change sign on ({lo:.6g}, {hi:.6g}): f(lo)={flo:.3e}, f(hi)={fhi:.3e}"
        )
    root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    resid = abs(f(root))
    if resid > 1e-12 * p.T:
        raise RuntimeError(f"r_star residual {resid:.3e} exceeds 1e-12*T")
    return float(root)


def find_R_sigma(branch: str, p: PlasmaParams) -> float:
    """Radius where the e (or b) branch moves at the maximal ion speed.

    Solves lambda_branch'(R) = lambda_i'(0) = sqrt((1+T)/(1+eps)).  The
    left side increases from 0 to c_branch, which exceeds the target, so
    the root is unique.  These radii are where slow-ion output interacts
    resonantly with a fast branch; they scale like sqrt(eps).
    """
    if branch not in ("e", "b"):
        raise ValueError(f"R_sigma is defined for branches 'e' and 'b', got {branch!r}")
    target = float(lam_prime("i", 0.0, p))
    f = lambda r: float(lam_prime(branch, r, p)) - target
    hi = np.sqrt(p.epsilon)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket R_sigma")
    root = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(root)


@dataclass(frozen=True)
class DispersionCtx:
    """Parameter point together with its distinguished radii.

    k_star is log2(r_star); R_e and R_b are the fast-branch radii matching
    the maximal ion group speed.
    """

    params: PlasmaParams
    r_star: float
    k_star: float
    R_e: float
    R_b: float


def make_ctx(p: PlasmaParams) -> DispersionCtx:
    r_star = find_r_star(p)
    return DispersionCtx(
        params=p,
        r_star=r_star,
        k_star=float(np.log2(r_star)),
        R_e=find_R_sigma("e", p),
        R_b=find_R_sigma("b", p),
    )


# -- exact identity suite (arbitrary precision) --------------------------------

def _identity_radii(r_max: float = 10.0, n: int = 200) -> np.ndarray:
    """Radius sample covering [0, r_max]: origin, log fill of the small
    scales, linear fill of the rest."""
    n_log = max(2, (3 * n) // 5)
    n_lin = n - 1 - n_log
    radii = np.concatenate(
        [
            [0.0],
            np.logspace(-3, np.log10(r_max), n_log),
            np.linspace(0.02, r_max, n_lin),
        ]
    )
    return np.sort(radii)


def verify_identities(p: PlasmaParams, radii=None, rtol: float = 1e-10, dps: int = 40) -> Report:
    """Verify the exact algebraic identities of the branch symbols.

    Evaluates lambda_i, lambda_e from the literal radical definitions in
    ``dps``-digit arithmetic and checks, relative to the right-hand sides:

      * (lambda_e^2 - H_eps^2)(H_eps^2 - lambda_i^2) = 1/eps
      * lambda_e^2 - H_eps^2 = R/sqrt(eps),  H_eps^2 - lambda_i^2 = 1/(R sqrt(eps))
      * lambda_e^2 - H_eps^2 = H_1^2 - lambda_i^2
      * sqrt(eps) lambda_e lambda_i = r sqrt(1 + T + T r^2)
      * ordering lambda_e^2 >= H_eps^2 >= H_1^2 >= lambda_i^2 >= r^2

    and that the float64 production path agrees with the arbitrary-precision
    radicals to 5e-13 relative.  Double precision cannot certify these
    directly: the first identity multiplies a difference of order 1e-4 by a
    factor of order 1e7 at (T, r) = (100, 10), so the certification runs in
    mpmath and the fast path is checked against it.
    """
    import mpmath

    if radii is None:
        radii = _identity_radii()
    rep = Report(f"identities eps={p.epsilon:g} T={p.T:g} C_b={p.C_b:g}")
    worst = {k: 0.0 for k in ("pla3", "pla5a", "pla5b", "mk2", "product", "float64")}
    order_viol = 0

    lam_i64 = lam("i", radii, p)
    lam_e64 = lam("e", radii, p)
    lam_b64 = lam("b", radii, p)

    with mpmath.workdps(dps):
        eps = mpmath.mpf(p.epsilon)
        T = mpmath.mpf(p.T)
        C_b = mpmath.mpf(p.C_b)
        for idx, rv in enumerate(radii):
            r = mpmath.mpf(float(rv))
            r2 = r * r
            u = (1 - eps) + (T - eps) * r2
            s = mpmath.sqrt(u * u + 4 * eps)
            le2 = ((1 + eps) + (T + eps) * r2 + s) / (2 * eps)
            li2 = ((1 + eps) + (T + eps) * r2 - s) / (2 * eps)
            lb2 = (1 + eps + C_b * r2) / eps
            he2 = (1 + T * r2) / eps
            h12 = 1 + r2
            R = 2 * mpmath.sqrt(eps) / (u + s)

            ge = le2 - he2
            gi = he2 - li2
            worst["pla3"] = max(worst["pla3"], abs(ge * gi * eps - 1))
            worst["pla5a"] = max(worst["pla5a"], abs(ge - R / mpmath.sqrt(eps)) / (R / mpmath.sqrt(eps)))
            worst["pla5b"] = max(worst["pla5b"], abs(gi - 1 / (R * mpmath.sqrt(eps))) / (1 / (R * mpmath.sqrt(eps))))
            worst["mk2"] = max(worst["mk2"], abs(ge - (h12 - li2)) / ge)
            lhs = mpmath.sqrt(eps * le2 * li2)
            rhs = r * mpmath.sqrt(1 + T + T * r2)
            if rhs > 0:
                worst["product"] = max(worst["product"], abs(lhs - rhs) / rhs)
            if not (le2 >= he2 >= h12 >= li2 >= r2):
                order_viol += 1
            for v64, v2 in ((lam_i64[idx], li2), (lam_e64[idx], le2), (lam_b64[idx], lb2)):
                ref = mpmath.sqrt(v2)
                if ref > 0:
                    worst["float64"] = max(worst["float64"], abs(mpmath.mpf(float(v64)) - ref) / ref)

    for key in ("pla3", "pla5a", "pla5b", "mk2", "product"):
        w = float(worst[key])
        rep.add(f"identity {key}", w <= rtol, w, f"rtol={rtol:g}")
    rep.add("ordering chain", order_viol == 0, float(order_viol), f"{len(radii)} radii")
    w = float(worst["float64"])
    rep.add("float64 path vs radicals", w <= 5e-13, w, "max relative")
    return rep


# -- pointwise inequality suite ------------------------------------------------

def verify_tech99(p: PlasmaParams, n: int = 10_000, r_max: float = 10.0) -> Report:
    """Grid verification of the branch inequalities, zero slack.

    Every comparison is arranged so that mathematical equalities (all at
    r = 0) are evaluated through identical floating point expressions on
    both sides, hence hold exactly; strict inequalities carry real margins
    on the grid.  Constants the statements leave implicit are measured and
    reported instead of asserted.
    """
    rep = Report(f"branch inequalities eps={p.epsilon:g} T={p.T:g} C_b={p.C_b:g}")
    r = np.linspace(0.0, r_max, n)
    rpos = r[1:]
    T, eps = p.T, p.epsilon

    li, le, lb = (lam(b, r, p) for b in BRANCHES)
    lip, lep, lbp = (lam_prime(b, r, p) for b in BRANCHES)
    lis, les, lbs = (lam_second(b, r, p) for b in BRANCHES)
    qi = q_i(r, p)
    qip = q_i_prime(r, p)
    he, hep, hes = h_eps(r, p), h_eps_prime(r, p), h_eps_second(r, p)

    def count(bad) -> int:
        return int(np.count_nonzero(bad))

    # origin values, through the same expressions used on the grid
    li0 = float(lam("i", 0.0, p))
    q0 = float(q_i(0.0, p))
    lis0 = float(lam_second("i", 0.0, p))
    rep.add("lambda_i(0) = 0 and lambda_i''(0) = 0 exactly", li0 == 0.0 and lis0 == 0.0,
            max(abs(li0), abs(lis0)))

    third = float(lam_second("i", 1e-3, p)) / 1e-3
    rep.add("lambda_i'''(0) negative, order one", -100 * max(1.0, T) < third < -1e-2,
            third, "finite difference lambda_i''(h)/h")

    lip0 = float(lam_prime("i", 0.0, p))
    v = count(lip > lip0)
    rep.add("lambda_i' <= lambda_i'(0)", v == 0, v, "violations")
    v = count(lip <= 0)
    rep.add("lambda_i' > 0", v == 0, v,
            f"min {lip.min():.6g} at r={r[np.argmin(lip)]:.4g}")

    for name, l0, ls0 in (("e", le, les), ("b", lb, lbs)):
        lp0 = float(lam_prime(name, 0.0, p))
        rep.add(f"lambda_{name}'(0) = 0 exactly", lp0 == 0.0, abs(lp0))
        ratio = ls0[1:] * (1 + rpos**2) ** 1.5
        rep.add(
            f"lambda_{name}'' comparable to (1+r^2)^(-3/2)",
            bool(np.all(ratio > 0)),
            float(ratio.min()),
            f"ratio range [{ratio.min():.4g}, {ratio.max():.4g}]",
        )

    # inflection radius of the ion branch
    r_star = find_r_star(p)
    lo, hi = T**-0.5, 4 * (T**-0.5 + T**-0.25)
    rep.add("r_star inside predicted bracket", lo < r_star < hi, r_star,
            f"bracket ({lo:.4g}, {hi:.4g})")
    resid = abs(float(lam_second("i", r_star, p)))
    rep.add("lambda_i''(r_star) residual", resid <= 1e-12 * T, resid)
    away = np.abs(r - r_star) > 0.25 * r_star
    away &= r > 0
    ratio = np.abs(lis[away]) / np.minimum(r[away], r[away] ** -3.0)
    rep.add("|lambda_i''| comparable to min(r, r^-3) away from r_star",
            bool(np.all(ratio > 0)), float(ratio.min()),
            f"ratio range [{ratio.min():.4g}, {ratio.max():.4g}]")

    # first-order bounds (SimpleBdLie)
    ub = np.sqrt((T + 1) * (eps + 1))
    v = count((li < r) | (li > ub * r))
    rep.add("r <= lambda_i <= sqrt((T+1)(eps+1)) r", v == 0, v, "violations")
    for name, lvals in (("e", le), ("b", lb)):
        l0 = float(lam(name, 0.0, p))
        c = speed(name, p)
        v = count((lvals < np.maximum(l0, c * r)) | (lvals > l0 + c * r))
        rep.add(f"max(lambda_{name}(0), c r) <= lambda_{name} <= lambda_{name}(0) + c r",
                v == 0, v, "violations")

    # electron branch against its decoupled profile (Le1)
    root_eps = np.sqrt(eps)
    v = count(np.abs(le - he) > root_eps * np.abs(he))
    v += count(np.abs(lep - hep) > root_eps * np.abs(hep))
    v += count(np.abs(les - hes) > root_eps * np.abs(hes))
    rep.add("|D^k(lambda_e - H_eps)| <= sqrt(eps) |D^k H_eps|, k=0,1,2", v == 0, v, "violations")
    v = count(le < he) + count(lep > hep)
    rep.add("H_eps <= lambda_e and lambda_e' <= H_eps'", v == 0, v, "violations")
    d = le - he
    v = count(np.diff(d) > 0)
    rep.add("lambda_e - H_eps decreasing", v == 0, v, "grid differences")
    v = count(lep < (1 - root_eps) * hep)
    rep.add("lambda_e' >= (1-sqrt(eps)) T r / sqrt(eps (1+T r^2))", v == 0, v, "violations")

    # q_i shape
    v = count((qi < 1.0) | (qi > q0))
    rep.add("1 <= q_i <= q_i(0)", v == 0, v, "violations")
    v = count(np.diff(qi) > 0)
    rep.add("q_i non-increasing", v == 0, v, "grid differences")
    v = count(qip > -(T**2) * r / (2 * (1 + T + T * r**2) ** 2))
    rep.add("q_i' <= -T^2 r / (2 (1+T+T r^2)^2)", v == 0, v, "violations")

    # curvature bounds (alo5)
    v = count(np.abs(lis) > 8 * np.sqrt(2) * T)
    rep.add("|lambda_i''| <= 8 sqrt(2) T", v == 0, v, "violations")
    far = r >= hi
    v = count(lis[far] > 10 * r[far] ** -3.0)
    rep.add("lambda_i'' <= 10 r^-3 beyond the bracket", v == 0, v,
            f"{count(far)} grid points")

    # branch separation (nbc2); gaps through their stable factored forms
    v = count(qi_margin(r, p) < 0)
    v += count(gap_e_i(r, p) <= 0)
    v += count(gap_b_e(r, p) < 0)
    rep.add("r <= lambda_i <= lambda_e <= lambda_b", v == 0, v, "violations")
    gap_be = lb[1:] - le[1:]
    cmin = float((gap_be / rpos).min())
    rep.add("lambda_b - lambda_e > 0 for r > 0", bool(np.all(gap_be > 0)), cmin,
            "measured inf (lambda_b-lambda_e)/r; tends to 0 with r since both "
            "branches share value and slope at r=0")
    ratio = (le - li) / (1 + r)
    rep.add("lambda_e - lambda_i >= c (1+r)", bool(np.all(ratio > 0)), float(ratio.min()),
            f"measured c={ratio.min():.4g}")

    # two-point convexity defects (nbc3), 100 x 100 pair grid
    rr = np.linspace(0.0, r_max, 100)
    r1 = rr[:, None]
    r2 = rr[None, :]
    defect_i = lam("i", r1, p) + lam("i", r2, p) - lam("i", r1 + r2, p)
    v = count(defect_i < 0)
    rep.add("lambda_i(r1) + lambda_i(r2) >= lambda_i(r1+r2)", v == 0, v, "pair grid")
    for name in ("e", "b"):
        defect = lam(name, r1, p) + lam(name, r2, p) - lam(name, r1 + r2, p)
        scaled = defect * (1 + np.minimum(r1, r2))
        rep.add(f"lambda_{name} pair defect >= c/(1+min(r1,r2))",
                bool(np.all(scaled > 0)), float(scaled.min()),
                f"measured c={scaled.min():.4g}")

    # weak ellipticity of the ion branch (BdPhiiii): defect >= c a min(1,b)^2
    a = np.linspace(1e-3, 2.0 ** (-0.5), 100)[:, None]
    b = np.linspace(1e-3, r_max, 100)[None, :]
    a2, b2 = np.broadcast_arrays(a, np.maximum(a, b))
    defect = lam("i", a2, p) + lam("i", b2, p) - lam("i", a2 + b2, p)
    ratio = defect / (a2 * np.minimum(1.0, b2) ** 2)
    rep.add("ion defect >= c a min(1,b)^2 on a <= min(b, 2^(-1/2))",
            bool(np.all(ratio > 0)), float(ratio.min()),
            f"measured c={ratio.min():.4g}")

    return rep


# -- tabulation (CLI backend) --------------------------------------------------

TABLE_COLUMNS = (
    "r",
    "lambda_i", "lambda_e", "lambda_b",
    "dlambda_i", "dlambda_e", "dlambda_b",
    "d2lambda_i", "d2lambda_e", "d2lambda_b",
    "H1", "Heps", "R",
)


def dispersion_table(p: PlasmaParams, rmin: float, rmax: float, n: int) -> np.ndarray:
    """Tabulate all branch data on n radii; column order TABLE_COLUMNS."""
    if not (0 <= rmin < rmax and n >= 2):
        raise ValueError("need 0 <= rmin < rmax and n >= 2")
    r = np.linspace(rmin, rmax, n)
    aux = aux_symbols(r, p)
    cols = [r]
    cols += [lam(b, r, p) for b in BRANCHES]
    cols += [lam_prime(b, r, p) for b in BRANCHES]
    cols += [lam_second(b, r, p) for b in BRANCHES]
    cols += [aux["H1"], aux["Heps"], aux["R"]]
    return np.column_stack(cols)
