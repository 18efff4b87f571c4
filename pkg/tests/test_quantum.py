import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.stats import chisquare, spearmanr

from oracles import rydberg_dense
from rydmis.counting import hardness_metrics, independence_polynomial
from rydmis.graph import PhysicalParams, UnitDiskGraph, generate_instance
from rydmis.quantum import (
    BasisMode, BasisTooLarge, PulseProgram, QuantumState, build_basis, build_system, evolve,
    filtered_detuning, min_gap_scan, pulse_schedule, run_qaoa, run_vqaa, sample_measurements,
)

P = PhysicalParams()
OMEGA = P.omega
SINGLE = UnitDiskGraph(1, 1, [(0, 0)])
PAIR = UnitDiskGraph(1, 2, [(0, 0), (0, 1)])
MODES = ["hard_blockade", "truncated", "full_tails"]

instances = st.builds(
    generate_instance, st.integers(1, 4), st.integers(1, 4), st.floats(0.5, 1.0), st.integers(0, 2**32 - 1),
)


def unique_mis_instances(count, sizes=((3, 4), (3, 5), (4, 4)), seed=0):
    """Distinct connected instances with N <= 14 and a single maximum independent set, hardest first."""
    found = []
    for r, c in sizes:
        for s in range(150):
            g = generate_instance(r, c, 0.8, seed + 1000 * r + 100 * c + s)
            if g.n > 14 or not g.is_connected():
                continue
            m = hardness_metrics(g)
            if m.d_mis == 1:
                found.append((m.hp, g, m))
    found.sort(key=lambda x: -x[0])
    out, spectra = [], set()
    for hp, g, m in found:
        key = (g.n, hp, independence_polynomial(g).coefficients)
        if key not in spectra:  # mirror images share every quantity
            spectra.add(key)
            out.append((g, m))
    return out[:count]


def reference_vqaa(graph, mode, pulse):
    """DOP853 on the dense Hamiltonian with the filter integrated as an extra ODE."""
    _, h0 = rydberg_dense([tuple(p) for p in graph.positions], mode, 1.0, 0.0, 0.0)
    _, hv = rydberg_dense([tuple(p) for p in graph.positions], mode, 0.0, 0.0, 0.0)
    _, hd = rydberg_dense([tuple(p) for p in graph.positions], mode, 0.0, 0.0, 1.0)
    drive, inter, det = h0 - hv, hv, hd - hv
    om = 2 * math.pi * pulse.omega_mhz
    knots = [0.0, pulse.tau_omega]
    vals = [pulse.delta0_mhz] * 2
    for tau, d in pulse.segments:
        knots.append(knots[-1] + tau)
        vals.append(d)
    knots.append(knots[-1] + pulse.tau_omega)
    vals.append(vals[-1])
    T = knots[-1]

    def rabi(t):
        if t < knots[1]:
            return om * t / pulse.tau_omega
        if t > knots[-2]:
            return om * (T - t) / pulse.tau_omega
        return om

    def rhs(t, y):
        psi, f = y[:-1], y[-1].real
        x = np.interp(t, knots, vals)
        df = (x - f) / pulse.tau_delta
        h = rabi(t) * drive + inter + 2 * math.pi * f * det
        return np.concatenate([-1j * (h @ psi), [df]])

    y = np.zeros(len(h0) + 1, dtype=complex)
    y[0], y[-1] = 1.0, pulse.delta0_mhz
    for a, b in zip(knots[:-1], knots[1:]):
        if b > a:
            y = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-12, atol=1e-13).y[:, -1]
    return y[:-1]


def test_single_vertex_basis():
    b = build_basis(SINGLE)
    assert b.size == 2 and b.configs().tolist() == [[0], [1]]


@pytest.mark.parametrize("mode", MODES)
def test_nearest_pair_basis(mode):
    assert build_basis(PAIR, mode).configs().tolist() == [[0, 0], [0, 1], [1, 0]]


def test_diagonal_pair_depends_on_mode():
    diag = UnitDiskGraph(2, 2, [(0, 0), (1, 1)])
    assert build_basis(diag, "hard_blockade").size == 3
    assert build_basis(diag, "truncated").size == 4


@settings(max_examples=40, deadline=None)
@given(instances.filter(lambda g: g.n <= 16))
def test_hard_basis_counts_independent_sets(g):
    assert build_basis(g).size == independence_polynomial(g).total()


@settings(max_examples=25, deadline=None)
@given(instances.filter(lambda g: g.n <= 10), st.sampled_from(MODES))
def test_basis_matches_brute_listing(g, mode):
    configs, _ = rydberg_dense([tuple(p) for p in g.positions], mode, 1.0, 0.0, 0.0)
    assert build_basis(g, mode).configs().tolist() == [list(c) for c in configs]


def test_basis_too_large_reports_size():
    g = generate_instance(4, 4, 1.0, 0)
    need = independence_polynomial(g).total()
    with pytest.raises(BasisTooLarge, match=f"{need} states required"):
        build_basis(g, limit=10)


@settings(max_examples=20, deadline=None)
@given(instances.filter(lambda g: g.n <= 9), st.sampled_from(MODES),
       st.floats(0.1, 30), st.floats(-math.pi, math.pi), st.floats(-50, 50))
def test_hamiltonian_matches_written_out_form(g, mode, omega, phi, delta):
    _, want = rydberg_dense([tuple(p) for p in g.positions], mode, omega, phi, delta)
    got = build_system(g, P, mode).dense(omega, phi, delta)
    assert np.allclose(got, want, atol=1e-9, rtol=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_hamiltonian_is_hermitian_exactly(mode):
    h = build_system(generate_instance(3, 4, 0.8, 5), P, mode).dense(OMEGA, 0.7, 13.0)
    assert np.array_equal(h, h.conj().T)


@pytest.mark.parametrize("t", [0.01, 0.0625, 0.1, 0.2337, 0.9])
def test_rabi_oscillation(t):
    p1 = run_qaoa(SINGLE, P, [(t, 0.0)]).probabilities()[1]
    assert p1 == pytest.approx(math.sin(OMEGA * t / 2) ** 2, abs=1e-6)


def test_pi_pulse_flips_the_atom():
    assert run_qaoa(SINGLE, P, [(P.pi_time, 1.1)]).probabilities()[1] == pytest.approx(1.0, abs=1e-12)


def test_blockaded_pair_oscillates_at_root_two():
    times = np.linspace(0.0, 0.5, 41)
    sys_ = build_system(PAIR, P)
    for t in times:
        s = run_qaoa(sys_, P, [(t, 0.0)])
        p = s.probabilities()
        assert p[0] == pytest.approx(math.cos(math.sqrt(2) * OMEGA * t / 2) ** 2, abs=1e-9)
        assert p[1] == pytest.approx(p[2], abs=1e-12)
    # the first full transfer into the symmetric state sets the frequency
    lo, hi = 0.5 * math.pi / (math.sqrt(2) * OMEGA) * 1.5, 1.5 * math.pi / (math.sqrt(2) * OMEGA)
    g = (math.sqrt(5) - 1) / 2
    f = lambda t: run_qaoa(sys_, P, [(t, 0.0)]).probabilities()[0]
    while hi - lo > 1e-9:
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(a) < f(b):
            hi = b
        else:
            lo = a
    freq = math.pi / (0.5 * (lo + hi))
    assert abs(freq / (math.sqrt(2) * OMEGA) - 1) < 1e-4


def test_zero_layers_are_identity():
    s = run_qaoa(generate_instance(3, 3, 0.8, 1), P, [(0.0, 0.3), (0.0, 2.0)])
    assert s.probabilities()[0] == 1.0


def test_qaoa_matches_matrix_exponentials():
    g = generate_instance(3, 3, 0.9, 4)
    layers = [(0.05, 0.0), (0.11, 1.3), (0.07, -2.2)]
    configs, _ = rydberg_dense([tuple(p) for p in g.positions], "truncated", OMEGA, 0.0, 0.0)
    psi = np.zeros(len(configs), dtype=complex)
    psi[0] = 1.0
    for tau, phi in layers:
        _, h = rydberg_dense([tuple(p) for p in g.positions], "truncated", OMEGA, phi, 0.0)
        psi = expm(-1j * tau * h) @ psi
    got = run_qaoa(g, P, layers, "truncated").amplitudes
    assert abs(np.vdot(psi, got)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_qaoa_equals_constant_sweep():
    g = generate_instance(3, 4, 0.8, 2)
    a = run_qaoa(g, P, [(0.3, 0.0)], "full_tails")
    pulse = PulseProgram.vqaa(0.0, [(0.3, 0.0)], tau_omega=0.0, tau_delta=0.0, omega_mhz=P.rabi_frequency_mhz)
    b = run_vqaa(g, P, pulse, "full_tails")
    assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-12)


def test_no_drive_keeps_ground_state():
    pulse = PulseProgram.vqaa(-5.0, [(1.0, 11.0)], omega_mhz=0.0)
    s = run_vqaa(generate_instance(4, 4, 0.8, 3), P, pulse)
    assert abs(s.amplitudes[0]) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("mode", MODES)
def test_sweep_matches_reference_integrator(mode):
    g = generate_instance(3, 4, 0.9, 1)
    pulse = PulseProgram.vqaa(-5.0, [(0.3, 2.0), (0.4, 6.0), (0.3, 11.0)], tau_omega=0.1, tau_delta=0.05)
    ref = reference_vqaa(g, mode, pulse)
    got = run_vqaa(g, P, pulse, mode).amplitudes
    assert 1 - abs(np.vdot(ref, got)) ** 2 < 1e-6


def test_norm_holds_over_long_sweep():
    g = generate_instance(4, 4, 0.8, 7)
    pulse = PulseProgram.linear(40 * P.pi_time)
    assert abs(run_vqaa(g, P, pulse, "truncated").norm - 1) < 1e-10


def test_energy_conserved_without_time_dependence():
    sys_ = build_system(generate_instance(3, 4, 0.8, 9), P, "full_tails")
    rng = np.random.default_rng(0)
    psi = rng.normal(size=sys_.size) + 1j * rng.normal(size=sys_.size)
    psi /= np.linalg.norm(psi)
    pulse = PulseProgram.vqaa(7.0, [(1.0, 7.0)], tau_omega=0.0, tau_delta=0.0)
    delta = 2 * math.pi * 7.0
    e0 = sys_.energy(psi, OMEGA, 0.0, delta)
    e1 = sys_.energy(evolve(QuantumState(sys_, psi), pulse).amplitudes, OMEGA, 0.0, delta)
    assert abs(e1 - e0) < 1e-8 * abs(e0)


def test_rejects_coarse_step():
    with pytest.raises(ValueError, match="does not resolve"):
        run_qaoa(SINGLE, P, [(0.1, 0.0)], dt=0.01)


def test_slow_sweep_reaches_the_mis():
    g, m = unique_mis_instances(1, sizes=((3, 4),))[0]
    sys_ = build_system(g, P)
    s = run_vqaa(sys_, P, PulseProgram.linear(40 * P.pi_time, -4.0, 16.0))
    w, v = np.linalg.eigh(sys_.dense(OMEGA, 0.0, 4 * OMEGA))
    ground_weight = float((np.abs(v[:, 0]) ** 2)[sys_.nexc == m.mis_size].sum())
    # switching the drive off afterwards can only purify the dressed ground state
    assert s.mis_probability(m.mis_size) > max(0.9, ground_weight - 0.01)


def test_slowing_down_at_the_gap_beats_linear():
    g, m = unique_mis_instances(1, sizes=((3, 5),))[0]
    sys_ = build_system(g, P)
    where = min_gap_scan(sys_, P).argmin_ratio * P.rabi_frequency_mhz
    T = 6 * P.pi_time
    linear = run_vqaa(sys_, P, PulseProgram.linear(T, -4.0, 16.0)).mis_probability(m.mis_size)
    three = PulseProgram.vqaa(-4.0, [(0.2 * T, where - 1.5), (0.6 * T, where + 1.5), (0.2 * T, 16.0)])
    assert run_vqaa(sys_, P, three).mis_probability(m.mis_size) > linear


def test_filter_passthrough_and_step_response():
    pulse = PulseProgram.vqaa(-5.0, [(1.0, 5.0), (0.5, 5.0)], tau_omega=0.2, tau_delta=0.0)
    t = np.linspace(0, 1.9, 39)
    assert np.allclose(filtered_detuning(pulse, t), np.interp(t, [0, 0.2, 1.2, 1.7, 1.9], [-5, -5, 5, 5, 5]))
    step = PulseProgram.vqaa(0.0, [(0.0, 0.0), (1e-12, 1.0), (2.0, 1.0)], tau_omega=0.0, tau_delta=0.3)
    t = np.array([0.1, 0.5, 1.0])
    assert np.allclose(filtered_detuning(step, t), 1 - np.exp(-t / 0.3), atol=1e-9)


def test_filter_matches_numerical_ode():
    pulse = PulseProgram.vqaa(-5.0, [(0.4, 3.0), (0.3, -1.0), (0.5, 11.0)], tau_omega=0.25, tau_delta=0.07)
    knots = [0, 0.25, 0.65, 0.95, 1.45, 1.7]
    vals = [-5, -5, 3, -1, 11, 11]
    t = np.linspace(0, 1.7, 50)
    ref = solve_ivp(lambda s, y: (np.interp(s, knots, vals) - y) / 0.07, (0, 1.7), [-5.0],
                    t_eval=t, rtol=1e-11, atol=1e-12, max_step=1e-3).y[0]
    assert np.allclose(filtered_detuning(pulse, t), ref, atol=1e-7)


def test_schedule_respects_ramps():
    pulse = PulseProgram.linear(1.0, tau_omega=0.3, tau_delta=0.0)
    s = pulse_schedule(pulse, P, 0.01)
    assert s.duration == pytest.approx(1.6)
    assert s.omega[0] < 0.05 * OMEGA and s.omega[-1] < 0.05 * OMEGA
    assert np.all(s.omega <= 2 * math.pi * pulse.omega_mhz + 1e-12)


def test_pulse_json_round_trip_and_depth():
    v = PulseProgram.linear(1.25)
    assert v.effective_depth() == pytest.approx(10.0)
    assert PulseProgram.from_json(v.to_json()) == v
    d = json.loads(v.to_json())
    assert set(d) == {"variant", "omega_mhz", "delta0_mhz", "segments", "tau_omega", "tau_delta"}
    q = PulseProgram.qaoa([(0.1, 0.5), (0.2, -1.0)])
    assert json.loads(q.to_json()) == {"variant": "qaoa", "layers": [[0.1, 0.5], [0.2, -1.0]]}
    assert PulseProgram.from_json(q.to_json()) == q
    assert q.effective_depth(P) == pytest.approx(0.3 / P.pi_time)


def test_pulse_validation_and_rescale():
    with pytest.raises(ValueError, match="non-negative"):
        PulseProgram.qaoa([(-0.1, 0.0)])
    with pytest.raises(ValueError, match="unknown pulse variant"):
        PulseProgram.from_json('{"variant": "spline"}')
    v = PulseProgram.vqaa(-5, [(0.5, 1.0), (0.75, 11.0)], tau_omega=0.2)
    r = v.rescaled(2.5)
    assert r.sweep_time == pytest.approx(2.5) and r.tau_omega == 0.2
    assert [d for _, d in r.segments] == [1.0, 11.0]


def test_sampled_and_slowdown_profiles():
    s = PulseProgram.from_samples([0, 0.2, 0.9], [-3, 1, 8], tau_omega=0.0, tau_delta=0.0)
    assert s.segments == ((0.2, 1.0), (0.7, 8.0)) and s.delta0_mhz == -3
    slow = PulseProgram.slowdown(2.0, 4.0, tau_delta=0.0)
    rates = np.array([(d1 - d0) / t for (t, d1), d0 in zip(slow.segments, [slow.delta0_mhz] + [d for _, d in slow.segments])])
    mid = np.array([d for _, d in slow.segments])
    assert slow.sweep_time == pytest.approx(2.0)
    assert np.all(rates > 0)
    assert abs(mid[np.argmin(rates)] - 4.0) < 0.5


def test_sampling_a_basis_state():
    s = QuantumState.ground(build_system(generate_instance(3, 3, 0.8, 0), P))
    shots = sample_measurements(s, 100, 1)
    assert shots.shape == (100, s.system.graph.n) and not shots.any()


def test_sampling_a_superposition():
    s = run_qaoa(SINGLE, P, [(P.pi_time / 2, 0.0)])
    ones = int(sample_measurements(s, 10_000, 3)[:, 0].sum())
    assert abs(ones - 5000) < 3 * 50


def test_sampling_chi_square_and_seed():
    g = generate_instance(3, 3, 1.0, 0)
    s = run_vqaa(g, P, PulseProgram.linear(0.4), "truncated")
    shots = sample_measurements(s, 100_000, 5)
    assert np.array_equal(shots, sample_measurements(s, 100_000, 5))
    idx = [s.system.basis.index(x) for x in shots[:20]]
    assert all(0 <= i < s.system.size for i in idx)
    codes = shots @ (1 << np.arange(g.n - 1, -1, -1))
    counts = np.array([np.count_nonzero(codes == c) for c in s.system.basis.codes])
    expected = s.probabilities() * len(shots)
    big = expected >= 5
    obs = np.append(counts[big], counts[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    assert chisquare(obs, exp).pvalue > 0.001


def test_single_vertex_gap_is_rabi():
    r = min_gap_scan(SINGLE, P)
    assert r.delta_min_mhz == pytest.approx(P.rabi_frequency_mhz, rel=1e-9)
    assert abs(r.argmin_ratio) < 1e-5
    assert np.allclose(r.gaps, OMEGA * np.sqrt(1 + r.ratios**2))


@pytest.mark.parametrize("mode", MODES)
def test_gap_eigenvalues_match_dense(mode):
    g = generate_instance(3, 4, 0.8, 12)
    grid = np.linspace(-1, 4, 6)
    r = min_gap_scan(g, P, mode, grid, refine=False)
    for x, e1, e2 in zip(grid, r.e1, r.e2):
        _, h = rydberg_dense([tuple(p) for p in g.positions], mode, OMEGA, 0.0, x * OMEGA)
        w = np.linalg.eigvalsh(h)
        assert (e1, e2) == pytest.approx((w[0], w[1]), abs=1e-8)
    assert r.delta_min_mhz == pytest.approx(r.gaps.min() / (2 * math.pi))


def test_gap_anticorrelates_with_hardness():
    chosen = unique_mis_instances(20)
    assert len(chosen) == 20
    hp = [m.hp for _, m in chosen]
    gaps = [min_gap_scan(g, P).delta_min_mhz for g, _ in chosen]
    assert spearmanr(hp, gaps).statistic < -0.5


def test_degenerate_manifold_sits_at_the_edge():
    g = generate_instance(4, 4, 0.8, 4)
    assert hardness_metrics(g).d_mis > 1
    r = min_gap_scan(g, P)
    assert r.at_edge and r.argmin_ratio == 4.0
