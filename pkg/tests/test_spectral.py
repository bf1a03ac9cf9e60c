import math

import numpy as np
import pytest

from cylidla import graphs, spectral
from cylidla.errors import InvalidParameter


def _oracle(g):
    lam = np.linalg.eigvalsh(g.kernel_matrix())
    return np.sort(lam)[::-1]


@pytest.mark.parametrize("g", [graphs.build_cycle(12), graphs.build_torus(4, 2),
                               graphs.build_generalized_petersen(12, 5),
                               graphs.build_hypercube(4), graphs.build_complete(7)])
def test_jacobi_matches_lapack(g):
    s = spectral.decompose(g)
    assert np.max(np.abs(s.eigenvalues - _oracle(g))) < 1e-12
    F = s.vectors
    assert np.max(np.abs(F.T @ F / g.N - np.eye(g.N))) < 1e-10
    assert np.max(np.abs(F[:, 0] - 1)) < 1e-12


def test_jacobi_and_eigh_share_block_projectors():
    g = graphs.build_torus(5, 2)
    a = spectral.decompose(g)
    b = spectral.decompose(g, method="eigh")
    for blk in a.blocks():
        assert np.max(np.abs(a.projector(blk) - b.projector(blk))) < 1e-9


def test_canonical_basis_is_deterministic():
    g = graphs.build_cycle(10)
    a = spectral.decompose(g)
    b = spectral.decompose(g, method="eigh")
    # Same projector, same seeding procedure -> same basis up to rounding.
    assert np.max(np.abs(a.vectors - b.vectors)) < 1e-8


def test_cycle_closed_form_values():
    s = spectral.closed_form_cycle(8)
    x = np.arange(8)
    assert np.allclose(s.f(2), math.sqrt(2) * np.cos(2 * math.pi * x / 8))
    assert np.allclose(s.f(3), math.sqrt(2) * np.sin(2 * math.pi * x / 8))
    assert np.allclose(s.f(8), (-1.0) ** x)
    assert s.lam(2) == s.lam(3) == pytest.approx(0.5 + 0.5 * math.cos(math.pi / 4))
    assert s.lam(8) == pytest.approx(0.0, abs=1e-15)


def test_odd_cycle_has_no_alternating_mode():
    s = spectral.closed_form_cycle(7)
    assert len(s.frequencies) == 7
    assert s.lam(7) == pytest.approx(0.5 + 0.5 * math.cos(2 * math.pi * 3 / 7))


def test_torus_closed_form_ordering():
    s = spectral.closed_form_torus(8, 2)
    assert s.frequencies[:5] == [(0, 0), (0, 1), (0, 7), (1, 0), (7, 0)]
    assert s.lam(2) == pytest.approx(0.5 + 0.25 * (1 + math.cos(math.pi / 4)))
    spectral.check_spectrum(graphs.build_torus(8, 2).kernel_matrix(), s, 1e-10)


def test_vertical_rate_values():
    assert spectral.vertical_rate(0.0) == pytest.approx(1.3169579, abs=1e-7)
    assert spectral.vertical_rate(0.5) == pytest.approx(0.9624237, abs=1e-7)
    assert spectral.vertical_rate(1.0) == 0.0
    with pytest.raises(InvalidParameter):
        spectral.vertical_rate(1.5)
    with pytest.raises(InvalidParameter):
        spectral.vertical_rate(-0.1)


def test_vertical_rate_solves_characteristic_equation():
    # psi = f e^{q y} harmonic <=> cosh q = 2 - lambda
    for lam in np.linspace(0, 1, 11):
        q = spectral.vertical_rate(lam)
        assert 0.25 * (math.exp(q) + math.exp(-q)) + 0.5 * lam == pytest.approx(1.0)


def test_rescaled_rate_cycle64():
    s = spectral.closed_form_cycle(64)
    assert spectral.rescaled_rate(s.lam(2), 64) == pytest.approx(4.4402083, abs=1e-6)


def test_default_a_N():
    assert spectral.default_a_N(graphs.build_cycle(20)) == 20
    assert spectral.default_a_N(graphs.build_torus(6, 3)) == 6
    g = graphs.build_complete(5)
    s = spectral.decompose(g)
    assert spectral.default_a_N(g, s) == pytest.approx(1 / math.sqrt(2 * s.gap))


def _mixing_oracle(g, threshold=0.25):
    P = g.kernel_matrix()
    row = np.zeros(g.N)
    row[0] = 1.0
    t = 0
    while 0.5 * np.abs(row - 1 / g.N).sum() > threshold + 1e-12:
        row = row @ P
        t += 1
    return t


@pytest.mark.parametrize("g", [graphs.build_complete(4), graphs.build_cycle(16),
                               graphs.build_cycle(64), graphs.build_torus(5, 2),
                               graphs.build_generalized_petersen(12, 5)])
def test_mixing_time_matches_linear_scan(g):
    assert spectral.mixing_time(g) == _mixing_oracle(g)


def test_mixing_time_frozen():
    assert spectral.mixing_time(graphs.build_complete(4)) == 1
    assert spectral.mixing_time(graphs.build_cycle(64)) == 389


def test_closed_form_gamma():
    s = spectral.closed_form_cycle(64)
    assert spectral.closed_form_gamma(s, 2) == pytest.approx(math.sqrt(2) * math.pi)
    assert spectral.closed_form_gamma(s, 5) == pytest.approx(2 * math.sqrt(2) * math.pi)
    t = spectral.closed_form_torus(8, 2)
    assert spectral.closed_form_gamma(t, 2) == pytest.approx(math.pi)


def test_assumption_check_flags_complete_graphs():
    rep = spectral.check_assumption_spectral("complete", [4, 8, 16], K=3)
    assert rep.flagged
    cyc = spectral.check_assumption_spectral("cycle", [16, 32, 64], K=3)
    assert not cyc.flagged
    assert cyc.gamma_extrapolated[2] == pytest.approx(math.sqrt(2) * math.pi, rel=1e-4)
    assert cyc.cauchy_gap[2] < 0.01


def test_scaling_bundle_cycle():
    b = spectral.scaling_bundle(graphs.build_cycle(32), K=3)
    assert b.a_N == 32 and len(b.gamma) == 2
    assert b.gamma[0] == pytest.approx(32 * math.sqrt(1 - math.cos(2 * math.pi / 32)))
    assert b.t_sharp == pytest.approx(32 * math.sqrt(b.tau_mix) * math.log(32) ** 2)


def test_spectrum_rows_columns():
    rows = spectral.spectrum_rows(spectral.closed_form_cycle(8), 8.0, K=3)
    assert [r["k"] for r in rows] == [1, 2, 3]
    assert rows[0]["q_k"] == 0.0 and rows[1]["q_k_rescaled"] == pytest.approx(8 * rows[1]["q_k"])


def test_decompose_cap():
    with pytest.raises(InvalidParameter):
        spectral.decompose(graphs.build_cycle(20), max_n=10)
