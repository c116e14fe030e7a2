import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from opdnp.rqm import (ANCOOT_RQM, ANCOOT_SOISC, JSCAN_HIGHFIELD, JSCAN_XBAND, Q_LEVELS,
                       D1_LEVELS, RQM_PAIRS, STATE_LABELS, KineticState, RqmParams,
                       build_kinetic_generator, d0_polarization_trace, dq_rate_constants,
                       evolve_kinetics, excited_eigenbasis, j_scan, level_scheme,
                       pumping_reduction, rqm_polarization, selectivity_factor,
                       slr_direct_scaling, soisc_populations, zfs_matrix_elements)
from opdnp.rqm.kinetics import (IDX, SolverInstabilityError, equilibrium_initial_state,
                                d0_equilibrium_polarization, rk4_step_matrix)
from opdnp.rqm.levels import all_pair_zfs_norm
from opdnp.rqm.pumping import pumping_generator
from opdnp.rqm.rates import ResonanceWarning, arrhenius_factor
from opdnp.spincore import Orientation, powder_grid, spin_operators, euler_matrix
from opdnp.units import C_CM

from reference_data import REFERENCE_SCAN_188T


# ------------------------------------------------------------------ independent oracles

def _product_basis_hamiltonian(J, E_B):
    """Zeeman + exchange on |m_C> x |m_R> from plain Kronecker products."""
    t, d = spin_operators(3), spin_operators(2)
    SC = [np.kron(o, np.eye(2)) for o in (t.Sx, t.Sy, t.Sz)]
    SR = [np.kron(np.eye(3), o) for o in (d.Sx, d.Sy, d.Sz)]
    return E_B * (SC[2] + SR[2]) - 2 * J * sum(a @ b for a, b in zip(SC, SR))


def _coupled_states():
    """Clebsch-Gordan states of S=1 x S=1/2; product index 2 * (1 - m_C) + (0 up, 1 down)."""
    def ket(*terms):
        v = np.zeros(6)
        for c, mc, up in terms:
            v[2 * (1 - mc) + (0 if up else 1)] = c
        return v
    r13, r23 = math.sqrt(1 / 3), math.sqrt(2 / 3)
    return {
        "Q+3/2": ket((1, 1, True)),
        "Q+1/2": ket((r13, 1, False), (r23, 0, True)),
        "Q-1/2": ket((r23, 0, False), (r13, -1, True)),
        "Q-3/2": ket((1, -1, False)),
        "D1+1/2": ket((r23, 1, False), (-r13, 0, True)),
        "D1-1/2": ket((r13, 0, False), (-r23, -1, True)),
    }


def _zfs_cartesian(D, theta, phi):
    t = spin_operators(3)
    Sv = [np.kron(o, np.eye(2)) for o in (t.Sx, t.Sy, t.Sz)]
    R = euler_matrix(math.pi, theta, phi)
    Dl = R @ np.diag([-D / 3, -D / 3, 2 * D / 3]) @ R.T
    return sum(Dl[i, j] * Sv[i] @ Sv[j] for i in range(3) for j in range(3))


# ------------------------------------------------------------------------- level scheme

def test_level_scheme_matches_product_space_diagonalization():
    # [DERIVED] product-basis diagonalization
    J, nu = -4.2, 527e9
    sch = level_scheme(J, nu)
    H0 = _product_basis_hamiltonian(J, sch.E_B)
    exact = np.sort(np.linalg.eigvalsh(H0))
    np.testing.assert_allclose(np.sort(list(sch.energies.values())), exact, atol=1e-12)
    states = _coupled_states()
    for lab, v in states.items():
        np.testing.assert_allclose(H0 @ v, sch.energies[lab] * v, atol=1e-12)


@pytest.mark.parametrize("J", [-1.0, -3.4, -11.7])
def test_gap_formula(J):
    sch = level_scheme(J, 527e9)
    m = {"Q+3/2": 1.5, "Q+1/2": 0.5, "Q-1/2": -0.5, "Q-3/2": -1.5, "D1+1/2": 0.5,
         "D1-1/2": -0.5}
    for (q, d), dE in sch.deltaE.items():
        assert dE == pytest.approx(-3 * J + (m[q] - m[d]) * sch.E_B, abs=1e-12)


def test_resonance_condition():
    # [PAPER] -11.72 cm-1 at 527 GHz
    sch = level_scheme(-1.0, 527e9)
    J_res = -2 * sch.E_B / 3
    assert J_res == pytest.approx(-11.72, abs=0.02)
    assert level_scheme(J_res, 527e9).gap("Q-3/2", "D1+1/2") == pytest.approx(0, abs=1e-12)


def test_level_scheme_rejects_bad_field():
    with pytest.raises(ValueError):
        level_scheme(-1, 0.0)


def test_eigenbasis_labels_and_spins():
    b = excited_eigenbasis(-3.4, 9.5e9)
    assert sorted(b.labels) == sorted(Q_LEVELS + D1_LEVELS)
    for lab, s2 in zip(b.labels, b.s2):
        assert s2 == pytest.approx(3.75 if lab.startswith("Q") else 0.75, abs=1e-9)


def test_eigenbasis_degenerate_warns():
    # J = 0: quartet and doublet with equal M are degenerate
    with pytest.warns(UserWarning):
        b = excited_eigenbasis(0.0, 9.5e9)
    assert b.diagnostics


# --------------------------------------------------------------------- matrix elements

@pytest.mark.parametrize("theta,phi", [(0.3, 0.0), (1.1, 2.0), (2.6, 5.0)])
def test_zfs_elements_match_clebsch_gordan_oracle(theta, phi):
    # [DERIVED] Clebsch-Gordan states
    D, J, nu = 0.31, -5.0, 527e9
    got = zfs_matrix_elements(D, 0.0, J, nu, Orientation(theta, phi, 1.0))
    H = _zfs_cartesian(D, theta, phi)
    st = _coupled_states()
    for q in Q_LEVELS:
        for d in D1_LEVELS:
            want = abs(st[q] @ H @ st[d]) ** 2
            assert got[(q, d)] == pytest.approx(want, abs=1e-14)


def test_zfs_norm_is_trace_invariant():
    o = Orientation(0.8, 1.9, 1.0)
    pairs, trace = all_pair_zfs_norm(0.31, 0.04, -3.0, 9.5e9, o)
    assert pairs == pytest.approx(trace, rel=1e-12)
    # doublet x (2/3 D^2 + 2 E^2) for the triplet factor
    assert trace == pytest.approx(2 * (2 / 3 * 0.31 ** 2 + 2 * 0.04 ** 2), rel=1e-12)


def test_averaging_conventions_differ_and_validate():
    g = powder_grid(n=200)
    ms = zfs_matrix_elements(0.31, 0, -5, 527e9, g)
    sm = zfs_matrix_elements(0.31, 0, -5, 527e9, g, average="square-of-mean")
    assert all(sm[k] <= ms[k] + 1e-15 for k in ms)
    with pytest.raises(ValueError):
        zfs_matrix_elements(0.31, 0, -5, 527e9, g, average="median")


# ------------------------------------------------------------------------------- rates

def test_rate_constant_single_orientation_oracle():
    # [DERIVED] hand-computed rate for one orientation
    p = JSCAN_HIGHFIELD.replace(J_CR=-6.0)
    o = Orientation(0.9, 0.4, 1.0)
    tab = dq_rate_constants(p, [o])
    H = _zfs_cartesian(p.D_zfs, o.theta, o.phi)
    st = _coupled_states()
    sch = level_scheme(p.J_CR, p.field_frequency, light_speed=p.light_speed)
    pref = 1e13 * math.exp(-10.2e3 / (8.314462618 * 100.0))
    for q, d in RQM_PAIRS:
        want = pref * abs(st[q] @ H @ st[d]) ** 2 / sch.deltaE[(q, d)] ** 2
        assert tab.k_dq[(q, d)] == pytest.approx(want, rel=1e-9)
        assert tab.k_qd[(q, d)] == tab.k_dq[(q, d)]


def test_arrhenius():
    assert arrhenius_factor(0.0, 50.0) == 1.0
    assert arrhenius_factor(10.2, 100.0) == pytest.approx(math.exp(-10200 / (8.314462618 * 100)))


def test_rates_exclude_equal_m_pairs():
    tab = dq_rate_constants(JSCAN_XBAND, powder_grid(n=50))
    assert set(tab.k_dq) == set(RQM_PAIRS)
    assert ("Q+1/2", "D1+1/2") not in tab.k_dq and ("Q-1/2", "D1-1/2") not in tab.k_dq


def test_exact_resonance_warns_and_diverges():
    # E_B = 3 cm^-1 exactly, so J = -2 puts Q-3/2 and D1+1/2 on resonance
    p = JSCAN_HIGHFIELD.replace(J_CR=-2.0, field_frequency=9e10, light_speed=3e10)
    with pytest.warns(ResonanceWarning):
        tab = dq_rate_constants(p, powder_grid(n=50))
    assert math.isinf(tab.k_dq[("Q-3/2", "D1+1/2")])
    assert tab.diagnostics
    floored = dq_rate_constants(p, powder_grid(n=50), gap_floor=1e-3)
    assert math.isfinite(floored.k_dq[("Q-3/2", "D1+1/2")])


def test_microreversibility_slows_uphill():
    g = powder_grid(n=100)
    p = JSCAN_XBAND.replace(temperature=5.0)
    base = dq_rate_constants(p, g)
    mr = dq_rate_constants(p, g, microreversibility=True)
    for pair in RQM_PAIRS:
        assert min(mr.k_dq[pair], mr.k_qd[pair]) < base.k_dq[pair]
        assert max(mr.k_dq[pair], mr.k_qd[pair]) == base.k_dq[pair]


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        dq_rate_constants(JSCAN_XBAND, [])


def test_selectivity_and_polarization():
    assert rqm_polarization(1.0) == 0.0
    assert rqm_polarization(19.0) == pytest.approx(-0.9)
    assert rqm_polarization(math.inf) == -1.0
    with pytest.raises(ValueError):
        rqm_polarization(-1.0)
    from opdnp.rqm import RateTable
    z = {p: 0.0 for p in RQM_PAIRS}
    with pytest.raises(ZeroDivisionError):
        selectivity_factor(RateTable(z, z))
    k = {p: (3.0 if p[1] == "D1+1/2" else 1.0) for p in RQM_PAIRS}
    assert selectivity_factor(RateTable(k, k)) == pytest.approx(3.0)


def test_soisc_populations():
    P0, Pp, Pm = soisc_populations(1.0, 1.0, 1.0, 0.3, 9.5e9)
    E_B = 9.5e9 / C_CM
    assert P0 == pytest.approx(1.0)
    assert Pp - P0 == pytest.approx(0.4 * 0.3 / E_B * 3)
    assert P0 + Pp + Pm == pytest.approx(3.0)
    with pytest.raises(ValueError):
        soisc_populations(0, 0, 0, 0.3, 9.5e9)
    with pytest.raises(ValueError):
        soisc_populations(1, 1, 1, 0.3, 0.0)


def test_slr_scaling():
    assert slr_direct_scaling(1e3, 0.3, 100, 0.6, 50) == pytest.approx(1e3 * 4 * 0.5)
    with pytest.raises(ValueError):
        slr_direct_scaling(0, 0.3, 100, 0.6, 50)


def test_reference_scan_at_18p8_tesla():
    # [PAPER] reference J-scan, P +- 0.05, R_D1 and k_dq within 2x
    g = powder_grid(n=1000)
    res = j_scan(JSCAN_HIGHFIELD, [r[0] for r in REFERENCE_SCAN_188T], g)
    for (J, R, k, P), R_, k_, P_ in zip(REFERENCE_SCAN_188T, res.column("R_D1"),
                                         res.column("k_dq"), res.column("P")):
        assert abs(P_ - P) <= 0.05, J
        assert 0.5 <= R_ / R <= 2, J
        assert 0.5 <= k_ / k <= 2, J


def test_j_scan_rejects_nonnegative_and_empty():
    with pytest.raises(ValueError):
        j_scan(JSCAN_XBAND, [-1, 0.5], powder_grid(n=10))
    with pytest.raises(ValueError):
        j_scan(JSCAN_XBAND, [], powder_grid(n=10))


# ---------------------------------------------------------------------------- kinetics

def _random_params(rng):
    return RqmParams(
        J_CR=-rng.uniform(0.5, 8), D_zfs=rng.uniform(0.05, 0.5), E_a=rng.uniform(5, 15),
        temperature=rng.uniform(20, 300), field_frequency=rng.choice([9.5e9, 94e9, 263e9]),
        k_qt=10 ** rng.uniform(5, 8), k_Q0=10 ** rng.uniform(1, 4),
        W_Q1=10 ** rng.uniform(3, 6), W_D1=10 ** rng.uniform(2, 5),
        W_D0=10 ** rng.uniform(2, 5),
        initial_populations=tuple(rng.uniform(0, 1, 8)))


def test_generator_columns_sum_to_zero():
    p = ANCOOT_RQM
    M = build_kinetic_generator(p, dq_rate_constants(p, powder_grid(n=100)))
    np.testing.assert_allclose(M.sum(axis=0), 0, atol=1e-6 * np.abs(M).max())
    off = M - np.diag(np.diag(M))
    assert off.min() >= 0


def test_detailed_balance_fixed_point():
    # with no RQM mixing the only stationary state is all population in D0 at Boltzmann
    p = ANCOOT_SOISC
    M = build_kinetic_generator(p, dq_rate_constants(p, powder_grid(n=50)))
    eq = equilibrium_initial_state(p).populations
    np.testing.assert_allclose(M @ eq, 0, atol=1e-12)
    up, down = eq[IDX["D0+1/2"]], eq[IDX["D0-1/2"]]
    assert (down - up) / (down + up) == pytest.approx(d0_equilibrium_polarization(p))


def test_rk4_matches_expm_on_random_draws():
    # [DERIVED] matrix exponential oracle
    rng = np.random.default_rng(7)
    for _ in range(25):
        p = _random_params(rng)
        M = build_kinetic_generator(p, dq_rate_constants(p, powder_grid(n=30)))
        s0 = KineticState(0.0, p.initial_populations)
        times = np.geomspace(1e-9, 1e-3, 6)
        a = evolve_kinetics(M, s0, times, "rk4-fixed-step")
        b = evolve_kinetics(M, s0, times)
        for x, y in zip(a, b):
            scale = y.populations.max()
            assert np.max(np.abs(x.populations - y.populations)) <= 1e-6 * scale
            assert x.total == pytest.approx(s0.total, rel=1e-9)


def test_rk4_step_matrix_is_fourth_order_taylor():
    M = np.array([[-2.0, 1.0], [2.0, -1.0]])
    h = 0.05
    taylor = sum(np.linalg.matrix_power(h * M, k) / math.factorial(k) for k in range(5))
    np.testing.assert_allclose(rk4_step_matrix(M, h), taylor, atol=1e-15)
    # local error is O(h^5): (0.15)^5 / 120 ~ 6e-7
    assert np.abs(rk4_step_matrix(M, h) - expm(h * M)).max() < 1e-6


def test_evolve_validates():
    M = np.zeros((8, 8))
    s0 = KineticState(1.0, np.ones(8))
    with pytest.raises(ValueError):
        evolve_kinetics(M, s0, [0.5])
    with pytest.raises(ValueError):
        evolve_kinetics(M, s0, [2.0, 1.5])
    with pytest.raises(ValueError):
        evolve_kinetics(M, s0, [2.0], method="euler")
    with pytest.raises(ValueError):
        KineticState(0.0, np.ones(7))


def test_negative_population_raises():
    M = np.zeros((8, 8))
    M[0, 0] = 1.0  # unphysical source that drives population negative from below
    s0 = KineticState(0.0, [-1e-3] + [1.0] * 7)
    with pytest.raises(SolverInstabilityError):
        evolve_kinetics(M, s0, [1.0])


def test_d0_trace_equilibrium_is_zero_and_relaxes_back():
    p = ANCOOT_RQM
    M = build_kinetic_generator(p, dq_rate_constants(p, powder_grid(n=100)))
    eq = equilibrium_initial_state(p)
    t, y = d0_polarization_trace([eq, eq], 0.0, d0_equilibrium_polarization(p))
    np.testing.assert_allclose(y, 0, atol=1e-12)
    s0 = KineticState(0.0, p.initial_populations)
    states = evolve_kinetics(M, s0, np.linspace(0, 0.2, 50))
    t, y = d0_polarization_trace(states, 50e-9, d0_equilibrium_polarization(p))
    assert abs(y[-1]) < 1e-3
    assert y[0] == 0.0
    with pytest.raises(ValueError):
        d0_polarization_trace(states, 0.0, 0.0)


# ----------------------------------------------------------------------------- pumping

def _pumping_closed_form(Tz0, T1_T, r, T1e, p_eq):
    # 2x2 steady state by Cramer's rule
    a, b = 1 / T1_T, 1 / T1e
    A = np.array([[-a - r, r], [r, -b - r]])
    c = np.array([-Tz0 * a, -p_eq * b])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return (A[0, 0] * c[1] - A[1, 0] * c[0]) / det


def test_pumping_reduction_matches_linear_solve_and_propagation():
    # [DERIVED] Cramer solve and expm propagation
    args = (-0.75, 100e-9, 1e5, 0.3e-3, 0.12)
    red = pumping_reduction(*args)
    assert red.l_Tz0 == pytest.approx(_pumping_closed_form(*args), rel=1e-12)
    G = pumping_generator(*args)
    x = expm(G * 0.05) @ np.array([1.0, 0.0, 0.12])
    assert red.l_Tz0 == pytest.approx(x[2], rel=1e-9)
    assert abs(red.l_Tz0 - args[0]) <= 0.05 * abs(args[0])


def test_pumping_without_exchange_is_thermal():
    red = pumping_reduction(-0.75, 1e-7, 0.0, 1e-3, 0.12)
    assert red.l_Tz0 == pytest.approx(0.12)
    assert red.T1_eff == pytest.approx(1e-3)


def test_pumping_validates():
    with pytest.raises(ValueError):
        pumping_reduction(-0.75, 0, 1e5, 1e-3)
    with pytest.raises(ValueError):
        pumping_reduction(-0.75, 1e-7, -1, 1e-3)


def test_params_validation():
    with pytest.raises(ValueError):
        RqmParams(temperature=0)
    with pytest.raises(ValueError):
        RqmParams(initial_populations=(1, 0))
    with pytest.raises(ValueError):
        RqmParams(k_qt=-1)
    assert STATE_LABELS[:4] == Q_LEVELS
