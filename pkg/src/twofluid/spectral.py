"""Periodic spectral toolbox: grid, Fourier multipliers, Riesz/curl
projections, dyadic frequency/space localization, and the weighted shell
norms used by the monitors.

Conventions
-----------
* The box is [-L, L]^3 with L = ``box_half``; the wavenumber lattice is
  (pi/L) * Z^3 truncated to |m_axis| <= n/2 - 1 (plus the Nyquist row).
* FFTs are orthonormal (scipy ``norm="ortho"``).  A field is stored as a
  bare complex coefficient array: (n, n, n) for scalars, (3, n, n, n) for
  vectors.
* Continuum calibration, any L::

      ||f||_L2   = (2L/n)^{3/2} * ||coef||_2
      f_hat(xi)  = (2L)^3 n^{-3/2} * coef(xi)        (hat_cont)
      L1 in xi   = sum * (pi/L)^3                    (lattice cell volume)

  so reported norm values are box-intrinsic, not lattice artifacts.
* The dyadic bump ``bump`` is the exponential smoothstep profile: even,
  C^inf, identically 1 on [-5/4, 5/4], supported in (-8/5, 8/5).  All
  frequency and space cutoffs derive from it, so partitions of unity
  telescope exactly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "to_spectral",
    "to_physical",
    "reflect",
    "hermitize",
    "is_hermitian",
    "apply_multiplier",
    "cross",
    "grad",
    "div",
    "curl",
    "riesz",
    "inv_modulus",
    "q_apply",
    "p_long",
    "q2_apply",
    "curl_ops",
    "dealias",
    "product",
    "l2_norm",
    "hat_cont",
    "hat_sup",
    "bump",
    "phi_low",
    "phi_shell",
    "phi_interval",
    "phi_tilde",
    "lp_project",
    "spatial_localize",
    "shell_range",
    "spatial_range",
    "DyadicPiece",
    "NormWeights",
    "DEFAULT_WEIGHTS",
    "b_norms",
    "ZNormUpper",
    "z_norm_upper",
    "random_real_field",
    "random_vector_field",
]


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L]^3 with n points per axis."""

    n: int
    box_half: float = np.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("points_per_axis must be an even integer >= 8")
        if not self.box_half > 0:
            raise ValueError("box_half must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @functools.cached_property
    def modes(self) -> np.ndarray:
        """Integer mode vectors, shape (3, n, n, n), FFT layout."""
        m = np.rint(sfft.fftfreq(self.n, d=1.0 / self.n)).astype(int)
        return np.stack(np.meshgrid(m, m, m, indexing="ij"))

    @functools.cached_property
    def xi(self) -> np.ndarray:
        return (np.pi / self.box_half) * self.modes

    @functools.cached_property
    def xi_mag(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi**2, axis=0))

    @functools.cached_property
    def inv_xi_mag(self) -> np.ndarray:
        """1/|xi| with the zero mode mapped to 0."""
        out = np.zeros_like(self.xi_mag)
        np.divide(1.0, self.xi_mag, out=out, where=self.xi_mag > 0)
        return out

    @functools.cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = math.floor(self.dealias_fraction * self.n / 2)
        keep = np.abs(self.modes) <= cut
        return keep[0] & keep[1] & keep[2]

    @functools.cached_property
    def x_radius(self) -> np.ndarray:
        """|x| of the minimal-image representative, shape (n, n, n)."""
        c = (2.0 * self.box_half / self.n) * np.arange(self.n)
        c = np.mod(c + self.box_half, 2.0 * self.box_half) - self.box_half
        return np.sqrt(
            c[:, None, None] ** 2 + c[None, :, None] ** 2 + c[None, None, :] ** 2
        )

    @property
    def xi_min(self) -> float:
        return np.pi / self.box_half

    @property
    def xi_max(self) -> float:
        return math.sqrt(3.0) * (self.n / 2) * np.pi / self.box_half

    @property
    def cell_volume_xi(self) -> float:
        return (np.pi / self.box_half) ** 3


def to_spectral(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, axes=(-3, -2, -1), norm="ortho", workers=-1)


def to_physical(grid: Grid, coef: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coef, axes=(-3, -2, -1), norm="ortho", workers=-1)


# ---------------------------------------------------------------------------
# symmetry helpers


def reflect(coef: np.ndarray) -> np.ndarray:
    """coef evaluated at -xi (index reversal respecting FFT layout)."""
    out = coef[..., ::-1, ::-1, ::-1]
    for ax in (-3, -2, -1):
        out = np.roll(out, 1, axis=ax)
    return out


def hermitize(coef: np.ndarray) -> np.ndarray:
    return 0.5 * (coef + np.conj(reflect(coef)))


def is_hermitian(coef: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(coef))))
    return float(np.max(np.abs(coef - np.conj(reflect(coef))))) <= tol * scale


# ---------------------------------------------------------------------------
# multipliers and vector calculus


def apply_multiplier(grid: Grid, symbol, f: np.ndarray, zero_mode=0.0) -> np.ndarray:
    """Coefficientwise product with symbol(xi).

    ``symbol`` is either a callable receiving the (3, n, n, n) lattice or a
    ready array.  ``zero_mode`` overrides the value at xi = 0 (pass None to
    keep whatever the symbol produced there).
    """
    sym = symbol(grid.xi) if callable(symbol) else symbol
    sym = np.asarray(sym)
    if zero_mode is not None:
        sym = sym.copy()
        sym[..., 0, 0, 0] = zero_mode
    if not np.all(np.isfinite(sym)):
        raise ValueError("multiplier symbol is not finite on the lattice")
    return sym * f


def grad(grid: Grid, f: np.ndarray) -> np.ndarray:
    return 1j * grid.xi * f


def div(grid: Grid, f: np.ndarray) -> np.ndarray:
    return 1j * np.sum(grid.xi * f, axis=0)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        (
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    )


def curl(grid: Grid, f: np.ndarray) -> np.ndarray:
    return 1j * cross(grid.xi, f)


def riesz(grid: Grid, f: np.ndarray) -> np.ndarray:
    """R_alpha f = i xi_alpha / |xi| * f, zero mode -> 0.  Scalar in, vector out."""
    return 1j * grid.xi * grid.inv_xi_mag * f


def inv_modulus(grid: Grid, f: np.ndarray) -> np.ndarray:
    """|nabla|^{-1} with the zero mode mapped to 0."""
    return grid.inv_xi_mag * f


def q_apply(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Q f = |nabla|^{-1} (curl f); kills gradients and the zero mode."""
    return 1j * grid.inv_xi_mag * cross(grid.xi, f)


def p_long(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Longitudinal projection xi (xi . f)/|xi|^2, zero mode -> 0."""
    return grid.xi * (np.sum(grid.xi * f, axis=0) * grid.inv_xi_mag**2)


def q2_apply(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Transverse projection Q^2 = Id - P on nonzero modes."""
    out = f - p_long(grid, f)
    out[..., 0, 0, 0] = 0.0
    return out


def curl_ops(grid: Grid, f: np.ndarray) -> dict:
    return {
        "Q": q_apply(grid, f),
        "P": p_long(grid, f),
        "curl": curl(grid, f),
        "div": div(grid, f),
    }


def dealias(grid: Grid, coef: np.ndarray) -> np.ndarray:
    return coef * grid.dealias_mask


def product(grid: Grid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Dealiased pointwise product of two coefficient fields."""
    return dealias(grid, to_spectral(grid, to_physical(grid, f) * to_physical(grid, g)))


# ---------------------------------------------------------------------------
# continuum-calibrated norms


def l2_norm(grid: Grid, coef: np.ndarray) -> float:
    scale = (2.0 * grid.box_half / grid.n) ** 1.5
    return scale * float(np.linalg.norm(coef.ravel()))


def hat_cont(grid: Grid, coef: np.ndarray) -> np.ndarray:
    """Continuum Fourier transform values on the lattice."""
    return (2.0 * grid.box_half) ** 3 * grid.n ** (-1.5) * coef


def hat_sup(grid: Grid, coef: np.ndarray) -> float:
    return float(np.max(np.abs(hat_cont(grid, coef))))


# ---------------------------------------------------------------------------
# dyadic cutoffs

_SUPP = 8.0 / 5.0
_FLAT = 5.0 / 4.0


def _sigma(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump(x) -> np.ndarray:
    """Even C^inf profile: 1 on [-5/4, 5/4], supported in (-8/5, 8/5)."""
    x = np.abs(np.asarray(x, dtype=float))
    t = (_SUPP - x) / (_SUPP - _FLAT)
    s = _sigma(t)
    return s / (s + _sigma(1.0 - t))


def phi_low(x, m: int) -> np.ndarray:
    """Cutoff to scales <= 2^m: bump(x / 2^m)."""
    return bump(np.asarray(x, dtype=float) / 2.0**m)


def phi_shell(x, k: int) -> np.ndarray:
    return phi_low(x, k) - phi_low(x, k - 1)


def phi_interval(x, a: int, b: int) -> np.ndarray:
    """Telescoped cutoff to the dyadic band [2^a, 2^b] (shells a..b)."""
    return phi_low(x, b) - phi_low(x, a - 1)


def phi_tilde(x, k: int, j: int) -> np.ndarray:
    """Spatial piece j of the frequency-k localization.

    The j-sum starting at max(-k, 0) telescopes to 1 pointwise; the first
    piece absorbs the whole ball |x| <~ 2^{max(-k,0)}.
    """
    if j < max(-k, 0):
        raise ValueError("(k, j) outside the admissible index set")
    if k + j == 0 and k <= 0:
        return phi_low(x, -k)
    if j == 0 and k >= 0:
        return phi_low(x, 0)
    return phi_shell(x, j)


def lp_project(grid: Grid, f: np.ndarray, k: int) -> np.ndarray:
    return phi_shell(grid.xi_mag, k) * f


def shell_range(grid: Grid) -> range:
    """Frequency shells that both touch the lattice and partition it."""
    kmin = math.floor(math.log2(0.625 * grid.xi_min)) + 1
    kmax = math.ceil(math.log2(1.6 * grid.xi_max)) - 1
    return range(kmin, kmax + 1)


def spatial_range(grid: Grid, k: int) -> range:
    """Spatial shells for frequency k; the last bump covers the whole box."""
    j0 = max(-k, 0)
    jmax = math.ceil(math.log2(0.8 * math.sqrt(3.0) * grid.box_half))
    return range(j0, max(jmax, j0) + 1)


def spatial_localize(grid: Grid, f: np.ndarray, k: int, j: int) -> np.ndarray:
    w = phi_tilde(grid.x_radius, k, j)
    return to_spectral(grid, w * to_physical(grid, f))


# ---------------------------------------------------------------------------
# weighted shell norms


@dataclass(frozen=True)
class DyadicPiece:
    k: int
    j: int
    field: np.ndarray

    def __post_init__(self):
        if self.j < max(-self.k, 0):
            raise ValueError("(k, j) outside the admissible index set")


@dataclass(frozen=True)
class NormWeights:
    beta: float = 0.01

    @property
    def alpha(self) -> float:
        return self.beta / 2.0

    @property
    def gamma(self) -> float:
        return 1.5 - 4.0 * self.beta


DEFAULT_WEIGHTS = NormWeights()


@functools.lru_cache(maxsize=None)
def _ball_kernel_hat(grid: Grid, m: int) -> np.ndarray:
    """FFT of the lattice indicator of the ball |xi| <= 2^m (minimal image)."""
    ind = (grid.xi_mag <= 2.0**m).astype(float)
    return sfft.fftn(ind)


def _ball_sum_max(grid: Grid, fa: np.ndarray, m: int) -> float:
    # circular convolution: sum of the |hat| array over a ball around every
    # lattice center at once; the periodic wrap can only enlarge a ball, so
    # the sup stays an upper bound for its continuum counterpart
    s = sfft.ifftn(fa * _ball_kernel_hat(grid, m)).real
    return float(s.max())


def _flat_hat(grid: Grid, coef: np.ndarray) -> np.ndarray:
    """Pointwise modulus of hat_cont, vector components combined."""
    a = np.abs(hat_cont(grid, coef))
    if a.ndim > 3:
        a = np.sqrt(np.sum(a**2, axis=tuple(range(a.ndim - 3))))
    return a


def b_norms(grid: Grid, piece: DyadicPiece, weights: NormWeights = DEFAULT_WEIGHTS) -> dict:
    """The two admissible shell norms and their min, an upper bound for the
    infimum norm of the (k, j) piece."""
    k, j = piece.k, piece.j
    a = _flat_hat(grid, piece.field)
    if not np.any(a):
        return {"B1": 0.0, "B2": 0.0, "B_upper": 0.0}

    hl2 = l2_norm(grid, piece.field)
    hsup = float(a.max())
    lead = 2.0 ** (weights.alpha * k) + 2.0 ** (10.0 * k)
    ktil = min(k, 0)

    b1 = lead * (2.0 ** ((1.0 + weights.beta) * j) * hl2 + 2.0 ** (0.5 * ktil - weights.beta * ktil) * hsup)

    fa = sfft.fftn(a)
    ball = max(
        4.0 ** (-m) * _ball_sum_max(grid, fa, m) * grid.cell_volume_xi
        for m in range(-j, k + 1)
    )
    b2 = 2.0 ** (10.0 * abs(k)) * lead * (
        2.0 ** ((1.0 - weights.beta) * j) * hl2 + hsup + 2.0 ** (weights.gamma * j) * ball
    )
    return {"B1": b1, "B2": b2, "B_upper": min(b1, b2)}


@dataclass(frozen=True)
class ZNormUpper:
    value: float
    k: int
    j: int
    table: tuple


def z_norm_upper(grid: Grid, f: np.ndarray, weights: NormWeights = DEFAULT_WEIGHTS) -> ZNormUpper:
    """sup over reachable (k, j) of the per-piece upper bound B_upper."""
    best = (0.0, 0, 0)
    rows = []
    for k in shell_range(grid):
        fk = lp_project(grid, f, k)
        if not np.any(fk):
            continue
        fk_phys = to_physical(grid, fk)
        for j in spatial_range(grid, k):
            w = phi_tilde(grid.x_radius, k, j)
            piece = DyadicPiece(k, j, to_spectral(grid, w * fk_phys))
            b = b_norms(grid, piece, weights)
            rows.append((k, j, b["B1"], b["B2"], b["B_upper"]))
            if b["B_upper"] > best[0]:
                best = (b["B_upper"], k, j)
    return ZNormUpper(value=best[0], k=best[1], j=best[2], table=tuple(rows))


# ---------------------------------------------------------------------------
# random band-limited fields


def random_real_field(grid: Grid, rng, kmax: int | None = None, rms: float = 1.0,
                      zero_mean: bool = True) -> np.ndarray:
    vals = rng.standard_normal((grid.n,) * 3)
    coef = to_spectral(grid, vals)
    if kmax is not None:
        keep = np.max(np.abs(grid.modes), axis=0) <= kmax
        coef = coef * keep
    if zero_mean:
        coef[0, 0, 0] = 0.0
    norm = float(np.linalg.norm(coef))
    if norm > 0:
        coef *= rms * grid.n**1.5 / norm
    return coef


def random_vector_field(grid: Grid, rng, kmax: int | None = None, rms: float = 1.0,
                        zero_mean: bool = True) -> np.ndarray:
    return np.stack(
        [random_real_field(grid, rng, kmax=kmax, rms=rms, zero_mean=zero_mean) for _ in range(3)]
    )
