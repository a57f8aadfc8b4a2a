"""Tests for the dispersive change of variables and the multiplier catalog."""

import numpy as np
import pytest

from twofluid import diagonal, physics
from twofluid.diagonal import (
    CATALOG_PAIRS,
    DispState,
    SPECIES,
    dispersive_residual,
    from_dispersive,
    hn_norm,
    multiplier,
    nonlinearity_direct,
    nonlinearity_multiplier,
    profile,
    species_split,
    to_dispersive,
)
from twofluid.dispersion import aux_symbols, lam
from twofluid.params import PlasmaParams
from twofluid.spectral import Grid, is_hermitian, l2_norm, q2_apply, reflect

P = PlasmaParams(epsilon=1.0e-3, T=1.0, C_b=6.0)
G16 = Grid(16)
G32 = Grid(32)


def _rng(seed=7):
    return np.random.default_rng(seed)


def _state(grid, seed=7, amplitude=1e-3, kmax=2):
    return physics.random_irrotational(grid, P, _rng(seed), amplitude=amplitude,
                                       kmax=kmax)


def _rel(grid, a, b):
    return l2_norm(grid, a - b) / max(l2_norm(grid, a), 1e-300)


def _random_disp(grid, seed=3, kmax=2):
    """Band-limited DispState with no acoustic zero modes, U_b transverse."""
    rng = np.random.default_rng(seed)
    n = grid.n

    def coef(shape):
        c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        keep = np.all(np.abs(grid.modes) <= kmax, axis=0)
        c *= keep
        c[..., 0, 0, 0] = 0.0
        return c

    return DispState(grid, coef((n,) * 3), coef((n,) * 3),
                     coef((3,) + (n,) * 3), t=0.25)


# -- the change of variables ----------------------------------------------------


def test_zero_state_round_trip():
    s = physics.PhysState.zero(G16)
    d = to_dispersive(s, P)
    assert not d.U_e.any() and not d.U_i.any() and not d.U_b.any()
    back = from_dispersive(d, P)
    for name in physics.FIELDS:
        assert not getattr(back, name).any()


def test_round_trip_on_constraint_states():
    for seed, rotational in ((3, True), (11, False)):
        s = physics.random_irrotational(G32, P, _rng(seed), amplitude=1e-3,
                                        kmax=4, rotational=rotational)
        back = from_dispersive(to_dispersive(s, P), P)
        for name in physics.FIELDS:
            a, b = getattr(s, name), getattr(back, name)
            scale = max(l2_norm(G32, a), 1e-300)
            assert l2_norm(G32, a - b) / scale < 1e-11, name
    assert back.t == s.t


def test_to_from_recovers_projected_part():
    d = _random_disp(G16)
    again = to_dispersive(from_dispersive(d, P), P, check=True)
    assert _rel(G16, d.U_e, again.U_e) < 1e-11
    assert _rel(G16, d.U_i, again.U_i) < 1e-11
    proj = q2_apply(G16, d.U_b)
    assert l2_norm(G16, again.U_b - proj) / l2_norm(G16, d.U_b) < 1e-11
    # and the projection genuinely discards something for generic U_b
    assert l2_norm(G16, d.U_b - proj) > 1e-3 * l2_norm(G16, d.U_b)


def test_reconstruction_is_real_and_constrained():
    back = from_dispersive(_random_disp(G16, seed=9), P)
    for name in physics.FIELDS:
        f = getattr(back, name)
        for c in f if f.ndim == 4 else f[None]:
            assert is_hermitian(c, tol=1e-13)
    viol = physics.constraints(back, P)
    scale = l2_norm(G16, back.B) + l2_norm(G16, back.E)
    assert viol["div_B"] <= 1e-13 * scale
    assert viol["gauss"] <= 1e-13 * max(scale, 1.0)


def test_to_dispersive_warns_on_broken_constraints():
    s = _state(G16)
    bad = s.copy()
    bad.B[0][1, 2, 1] += 1e-4  # real bump in a conjugate pair keeps reality
    bad.B[0][-1, -2, -1] += 1e-4  # conjugate slot
    with pytest.warns(RuntimeWarning, match="constraints"):
        to_dispersive(bad, P)


def test_to_dispersive_rejects_complex_input():
    s = _state(G16)
    s.n[1, 0, 0] += 0.5  # no matching conjugate mode
    with pytest.raises(ValueError, match="not real"):
        to_dispersive(s, P)
    to_dispersive(s, P, check=False)  # escape hatch for internal callers


def test_transfer_constant_is_order_one():
    # measured on this ensemble: C close to 0.36 for orders 0 and 4 alike
    ratios = []
    for seed in (3, 11, 27):
        s = physics.random_irrotational(G32, P, _rng(seed), amplitude=1e-3,
                                        kmax=4)
        d = to_dispersive(s, P)
        for order in (0, 4):
            disp = np.sqrt(hn_norm(G32, d.U_e, order) ** 2
                           + hn_norm(G32, d.U_i, order) ** 2
                           + hn_norm(G32, d.U_b, order) ** 2)
            phys = np.sqrt(sum(hn_norm(G32, getattr(s, nm), order) ** 2
                               for nm in physics.FIELDS))
            ratios.append(disp / phys)
    assert 0.05 < min(ratios) and max(ratios) < 50.0
    assert max(ratios) / min(ratios) < 1.5


def test_hn_norm_basics():
    d = _random_disp(G16)
    assert hn_norm(G16, d.U_e, 0) == pytest.approx(l2_norm(G16, d.U_e))
    assert hn_norm(G16, d.U_e, 4) > hn_norm(G16, d.U_e, 2)
    with pytest.raises(ValueError):
        hn_norm(G16, d.U_e, -1)


# -- nonlinearities, both routes ------------------------------------------------


def test_nonlinearity_zero_state():
    z = physics.PhysState.zero(G16)
    for N in nonlinearity_direct(z, P):
        assert not N.any()
    for N in nonlinearity_multiplier(to_dispersive(z, P), P):
        assert not N.any()


def test_re_nb_vanishes_exactly():
    _, _, N_b = nonlinearity_direct(_state(G32, kmax=4), P)
    re_part = 0.5 * (N_b + np.conj(reflect(N_b)))
    assert np.max(np.abs(re_part)) == 0.0


def test_bilinearity_exponent():
    s = _state(G16, seed=5)
    big = physics._combine(G16, s.t, [(2.0, s)])
    for N1, N2 in zip(nonlinearity_direct(s, P), nonlinearity_direct(big, P)):
        expo = np.log2(l2_norm(G16, N2) / l2_norm(G16, N1))
        assert abs(expo - 2.0) < 0.01


def test_direct_and_multiplier_routes_agree():
    # the executable form of the whole catalog: every pair participates
    s = _state(G32, seed=11, amplitude=1e-3, kmax=4)
    d = to_dispersive(s, P)
    direct = nonlinearity_direct(s, P)
    conv = nonlinearity_multiplier(d, P)
    for name, a, b in zip(("N_e", "N_i", "N_b"), direct, conv):
        rel = l2_norm(G32, a - b) / l2_norm(G32, a)
        assert rel < 1e-9, f"{name}: {rel:.3e}"


def test_multiplier_route_matches_handmade_convolution():
    # two modes in U_e only; every surviving term reconstructed one by one
    n = G16.n
    d = DispState.zero(G16)
    k1, k2 = (1, 0, 1), (0, 2, -1)
    d.U_e[k1] = 0.3 - 0.7j
    d.U_e[k2] = -0.2 + 0.4j

    tables = {"e+": {}, "e-": {}}
    for k, z in ((k1, d.U_e[k1]), (k2, d.U_e[k2])):
        kv = np.array(k)
        tables["e+"][tuple(kv)] = z
        tables["e-"][tuple(-kv)] = np.conj(z)

    hand = {"e": np.zeros((n,) * 3, complex), "i": np.zeros((n,) * 3, complex),
            "b": np.zeros((3,) + (n,) * 3, complex)}
    c = n ** -1.5
    for mu, nu in (("e+", "e+"), ("e+", "e-"), ("e-", "e-")):
        for kz, wz in tables[mu].items():
            for kh, wh in tables[nu].items():
                xi = np.array(kz, float) + np.array(kh, float)
                idx = tuple((np.array(kz) + np.array(kh)) % n)
                eta = np.array(kh, float)
                for sigma in ("e", "i"):
                    hand[sigma][idx] += c * wz * wh * multiplier(
                        sigma, mu, nu, xi, eta, P)
                hand["b"][(slice(None),) + idx] += c * wz * wh * multiplier(
                    "b", mu, nu, xi, eta, P)

    N_e, N_i, N_b = nonlinearity_multiplier(d, P)
    assert np.allclose(N_e, hand["e"], atol=1e-15)
    assert np.allclose(N_i, hand["i"], atol=1e-15)
    assert np.allclose(N_b, hand["b"], atol=1e-15)
    # acoustic input feeds every output branch
    assert l2_norm(G16, N_i) > 0 and l2_norm(G16, N_b) > 0


def test_single_species_isolation():
    # with U_e = U_b = 0 the ion-ion pairs are the only active ones
    d = _random_disp(G16, seed=21)
    d.U_e[:] = 0.0
    d.U_b[:] = 0.0
    full = nonlinearity_multiplier(d, P)

    only = DispState.zero(G16)
    only.U_i = d.U_i.copy()
    for a, b in zip(full, nonlinearity_multiplier(only, P)):
        assert np.array_equal(a, b)


def test_nonlinearity_multiplier_support_tol_drops_small_modes():
    d = _random_disp(G16, seed=2, kmax=1)
    d.U_i *= 0.0
    d.U_b *= 0.0
    d.U_e[1, 1, 0] = 1e-12  # far below the dominant coefficients
    exact = nonlinearity_multiplier(d, P)
    pruned = nonlinearity_multiplier(d, P, support_tol=1e-6)
    for a, b in zip(exact, pruned):
        assert l2_norm(G16, a - b) < 1e-11 * max(l2_norm(G16, a), 1e-300)


# -- the catalog itself ----------------------------------------------------------


def test_catalog_pair_census():
    assert len(CATALOG_PAIRS) == len(set(CATALOG_PAIRS)) == 61
    acoustic = ("e+", "e-", "i+", "i-")
    same = [(m, n) for m, n in CATALOG_PAIRS
            if m[0] == n[0] and m[0] in ("e", "i")]
    assert len(same) == 6
    cross = [(m, n) for m, n in CATALOG_PAIRS if (m[0], n[0]) == ("e", "i")]
    assert len(cross) == 4
    bb = [(m, n) for m, n in CATALOG_PAIRS if m[0] == n[0] == "b"]
    assert len(bb) == 27
    mixed = [(m, n) for m, n in CATALOG_PAIRS if m[0] != "b" and n[0] == "b"]
    assert len(mixed) == 24
    # magnetosonic entries never lead a mixed pair
    assert not any(m[0] == "b" and n[0] != "b" for m, n in CATALOG_PAIRS)
    assert set(acoustic + tuple(f"b{s}{a}" for s in "+-" for a in "123")) \
        == set(SPECIES)


def test_species_split():
    assert species_split("e+") == ("e", "+", None)
    assert species_split("b-2") == ("b", "-", 1)
    with pytest.raises(ValueError):
        species_split("x+")


def test_multiplier_rejects_off_catalog_pairs():
    xi = np.array([1.0, 0.0, 0.0])
    eta = np.array([0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="catalog"):
        multiplier("e", "i+", "e+", xi, eta, P)  # reversed mixed order
    with pytest.raises(ValueError, match="catalog"):
        multiplier("e", "b+1", "e+", xi, eta, P)
    with pytest.raises(ValueError, match="branch"):
        multiplier("q", "e+", "e+", xi, eta, P)


def test_t_eee_prefactor_value():
    # equilateral configuration |xi| = |xi-eta| = |eta| = 1: the geometry
    # bracket reduces to 1/8, exposing the prefactor itself
    xi = np.array([1.0, 0.0, 0.0])
    eta = np.array([0.5, np.sqrt(3.0) / 2.0, 0.0])
    R1 = float(aux_symbols(1.0, P)["R"])
    want = 1j * (P.epsilon ** -0.5 - R1 ** 3) / (1.0 + R1 ** 2) ** 1.5 / 8.0
    got = multiplier("e", "e+", "e+", xi, eta, P)
    assert got == pytest.approx(want, rel=1e-12)


def test_ion_row_null_structure():
    # |m_i| <= C |xi| down to tiny |xi|; measured C stays below 1 here
    rng = _rng(17)
    eta = np.array([0.7, -0.3, 0.5])
    worst = 0.0
    for pair in (("e+", "e+"), ("e+", "i-"), ("i+", "i+"), ("e+", "b+2"),
                 ("b+1", "b-1"), ("i-", "b-3")):
        for mag in (2.0 ** -6, 2.0 ** -8, 2.0 ** -10):
            direction = rng.normal(size=3)
            xi = mag * direction / np.linalg.norm(direction)
            ratio = abs(multiplier("i", *pair, xi, eta, P)) / mag
            worst = max(worst, ratio)
    assert worst < 5.0, f"max |m_i|/|xi| = {worst:.3e} for |xi| <= 2^-6"


def test_electron_row_growth_bound():
    rng = _rng(23)
    eta = np.array([0.7, -0.3, 0.5])
    for pair in (("e+", "e+"), ("e+", "i-"), ("i+", "i+"), ("e+", "b+2"),
                 ("b+1", "b-1")):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        for mag in (0.25, 1.0, 4.0, 16.0, 64.0):
            m = multiplier("e", *pair, mag * direction, eta, P)
            assert abs(m) <= 40.0 * np.sqrt(1.0 + mag ** 2)


def test_zero_output_mode_conventions():
    eta = np.array([0.4, 1.1, -0.2])
    zero = np.zeros(3)
    for pair in (("e+", "e-"), ("i+", "i-"), ("e+", "b+1"), ("b+2", "b-2")):
        assert multiplier("i", *pair, zero, eta, P) == 0.0
        assert multiplier("e", *pair, zero, eta, P) == 0.0
        assert not multiplier("b", *pair, zero, eta, P).any()


def test_bb_pairs_are_diagonal_and_doubled():
    xi = np.array([0.3, -1.2, 0.8])
    eta = np.array([-0.9, 0.4, 0.6])
    assert multiplier("e", "b+1", "b+2", xi, eta, P) == 0.0
    pp = multiplier("e", "b+1", "b+1", xi, eta, P)
    mm = multiplier("e", "b-1", "b-1", xi, eta, P)
    pm = multiplier("e", "b+1", "b-1", xi, eta, P)
    assert pp == mm and pm == pytest.approx(2.0 * pp, rel=1e-14)
    # the magnetosonic output has no such source at all
    assert not multiplier("b", "b+1", "b-1", xi, eta, P).any()


def test_b_row_is_transverse():
    xi = np.array([0.3, -1.2, 0.8])
    eta = np.array([-0.9, 0.4, 0.6])
    for pair in (("e+", "e-"), ("e-", "i+"), ("i+", "b-2")):
        m = multiplier("b", *pair, xi, eta, P)
        assert abs(np.dot(xi, m)) < 1e-14 * max(np.max(np.abs(m)), 1e-300)


def test_multiplier_batch_evaluation_matches_scalar():
    rng = _rng(31)
    xis = rng.normal(size=(3, 5))
    etas = rng.normal(size=(3, 5))
    batch = multiplier("e", "e+", "i-", xis, etas, P)
    for j in range(5):
        single = multiplier("e", "e+", "i-", xis[:, j], etas[:, j], P)
        assert batch[j] == pytest.approx(single, rel=1e-14)


# -- residuals and profiles -------------------------------------------------------


def _free_trajectory(grid, dt, count, seed=13, kmax=2):
    s0 = _state(grid, seed=seed, kmax=kmax)
    d0 = to_dispersive(s0, P)
    sym_e = lam("e", grid.xi_mag, P)
    sym_i = lam("i", grid.xi_mag, P)
    sym_b = lam("b", grid.xi_mag, P)
    traj = []
    for k in range(count):
        t = k * dt
        d = DispState(grid,
                      np.exp(-1j * t * sym_e) * d0.U_e,
                      np.exp(-1j * t * sym_i) * d0.U_i,
                      np.exp(-1j * t * sym_b) * d0.U_b, t)
        traj.append(from_dispersive(d, P))
    return traj


def test_residual_free_evolution_stencil_order():
    peaks = []
    for dt in (1e-3, 5e-4):
        traj = _free_trajectory(G16, dt, 7)
        res = dispersive_residual(traj, P, include_nonlinearity=False)
        peaks.append(max(res["e"].max(), res["i"].max(), res["b"].max()))
    assert 12.0 < peaks[0] / peaks[1] < 20.0  # 4th-order stencil: 16x per halving


def test_residual_linear_regime_scales_quadratically():
    maxima = []
    for amp in (1e-3, 2e-3):
        s = _state(G16, seed=29, amplitude=amp, kmax=2)
        traj = [s]
        for _ in range(6):
            traj.append(physics.step(traj[-1], 2e-4, P, linear=True))
        res = dispersive_residual(traj, P)
        maxima.append(max(res["e"].max(), res["i"].max(), res["b"].max()))
    expo = np.log2(maxima[1] / maxima[0])
    assert abs(expo - 2.0) < 0.1  # the residual IS the dropped nonlinearity


def test_residual_nonlinear_run_sits_on_discretization_floor():
    s = _state(G16, seed=41, amplitude=1e-4, kmax=2)
    floors = []
    for dt in (1e-3, 5e-4):
        traj = [s]
        for _ in range(6):
            traj.append(physics.step(traj[-1], dt, P))
        res = dispersive_residual(traj, P)
        floors.append(max(res["e"].max(), res["i"].max(), res["b"].max()))
    # halving dt sharpens the residual: time discretization dominates
    assert floors[1] < 0.2 * floors[0]


def test_residual_requires_uniform_fine_sampling():
    traj = _free_trajectory(G16, 1e-3, 7)
    with pytest.raises(ValueError, match="five"):
        dispersive_residual(traj[:4], P)
    skewed = traj[:5] + [traj[6]]
    with pytest.raises(ValueError, match="uniform"):
        dispersive_residual(skewed, P)
    with pytest.warns(RuntimeWarning, match="stencil"):
        dispersive_residual(_free_trajectory(G16, 0.05, 5), P,
                            include_nonlinearity=False)


def test_profile_identity_and_free_constancy():
    d0 = to_dispersive(_state(G16, seed=19), P)
    assert d0.t == 0.0
    v0 = profile(d0, P)
    assert np.array_equal(v0.U_e, d0.U_e)

    traj = _free_trajectory(G16, 2e-3, 5, seed=19)
    base = profile(to_dispersive(traj[0], P), P)
    for s in traj[1:]:
        v = profile(to_dispersive(s, P), P)
        assert _rel(G16, base.U_e, v.U_e) < 1e-10
        assert _rel(G16, base.U_i, v.U_i) < 1e-10
        assert l2_norm(G16, v.U_b - base.U_b) < 1e-10 * l2_norm(G16, base.U_b)


def test_profile_preserves_moduli():
    d = _random_disp(G16, seed=37)
    d.t = 3.7
    v = profile(d, P)
    assert np.allclose(np.abs(v.U_e), np.abs(d.U_e), atol=1e-15)
    assert np.allclose(np.abs(v.U_b), np.abs(d.U_b), atol=1e-15)
