import csv

import numpy as np
import pytest

from jetreduce.nwaves import (
    CoincidentTimes,
    InsufficientSamples,
    LaxState,
    NotSkew,
    TwoTimeFrame,
    advance,
    clear_window,
    commutation_test,
    csv_header,
    flow_for,
    flow_rhs,
    gamma_from_q,
    half_trace_q_uk,
    hamiltonian_from_trace,
    hamiltonian_gradient,
    hamiltonian_k,
    invariant_drift,
    residue_hamiltonian,
    trace_power,
    trajectory,
    u_k,
    write_csv,
)


def skew(upper, n):
    q = np.zeros((n, n))
    for (i, j), v in upper.items():
        q[i, j], q[j, i] = v, -v
    return q


S3 = LaxState(skew({(0, 1): 1.0, (0, 2): 2.0, (1, 2): 3.0}, 3), [0.0, 1.0, 2.0])


# worked values --------------------------------------------------------------------

def test_gamma_worked_values():
    s = LaxState(skew({(0, 1): 2.5}, 2), [0.0, 1.0])
    assert gamma_from_q(s)[0, 1] == 2.5
    s = LaxState(skew({(0, 2): 2.0}, 3), [0.0, 1.0, 2.0])
    assert gamma_from_q(s)[0, 2] == 1.0
    assert not gamma_from_q(LaxState(np.zeros((3, 3)), [0.0, 1.0, 2.0])).any()


def test_u_k_worked_values():
    s = LaxState(skew({(0, 1): 1.0}, 3), [0.0, 1.0, 2.0])
    assert u_k(s, 0)[0, 1] == 1.0
    assert u_k(s, 1)[0, 1] == -1.0
    assert not u_k(LaxState(np.zeros((3, 3)), [0.0, 1.0, 2.0]), 0).any()


def test_u_k_sum_to_zero():
    s = LaxState.random(4, np.random.default_rng(1))
    assert np.abs(sum(u_k(s, k) for k in range(4))).max() <= 1e-15


def test_hamiltonian_worked_value():
    assert hamiltonian_k(S3, 0) == pytest.approx(1.5, abs=1e-15)
    assert hamiltonian_k(LaxState(np.zeros((3, 3)), [0.0, 1.0, 2.0]), 0) == 0


def test_flow_of_zero_is_zero():
    s = LaxState(np.zeros((3, 3)), [0.0, 1.0, 2.0])
    assert not flow_rhs(s, 1).any()
    assert advance(S3, 0, 0.0) is S3


# identities -----------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("n", [3, 4])
def test_trace_forms_of_H(n, seed):
    s = LaxState.random(n, np.random.default_rng(seed))
    for k in range(n):
        H = hamiltonian_k(s, k)
        assert abs(hamiltonian_from_trace(s, k) - H) <= 1e-12
        assert abs(half_trace_q_uk(s, k) + 2 * H) <= 1e-12
        assert abs(residue_hamiltonian(s, k) + 2 * H) <= 1e-12


def test_half_trace_is_not_H():
    # 1/2 Tr(q u_k) is -2 H_k, not H_k
    assert abs(half_trace_q_uk(S3, 0) - hamiltonian_k(S3, 0)) > 1.0


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    s = LaxState.random(4, rng)
    E = np.triu(rng.normal(size=(4, 4)), 1)
    E = E - E.T
    eps = 1e-6
    for k in range(4):
        hp = hamiltonian_k(LaxState(s.q + eps * E, s.times), k)
        hm = hamiltonian_k(LaxState(s.q - eps * E, s.times), k)
        want = -0.5 * np.trace(hamiltonian_gradient(s, k) @ E)
        assert (hp - hm) / (2 * eps) == pytest.approx(want, abs=1e-8)


def test_flow_is_isospectral_in_first_order():
    s = LaxState.random(4, np.random.default_rng(2))
    for k in range(4):
        d = flow_rhs(s, k)
        assert abs(np.trace(s.q @ d)) <= 1e-12
        assert np.array_equal(d, -d.T) or np.abs(d + d.T).max() <= 1e-14


# validation -----------------------------------------------------------------------

def test_state_validation():
    with pytest.raises(NotSkew):
        LaxState(np.ones((2, 2)), [0.0, 1.0])
    with pytest.raises(CoincidentTimes):
        LaxState(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(ValueError):
        LaxState(np.zeros((2, 3)), [0.0, 1.0])


def test_random_state_layout():
    s = LaxState.random(4, np.random.default_rng(0))
    assert np.array_equal(s.q, -s.q.T)
    t = np.sort(s.times)
    assert np.min(np.diff(t)) >= 0.5 and t[0] >= 0 and t[-1] <= 3


def test_flow_through_another_time_is_refused():
    with pytest.raises(CoincidentTimes):
        advance(S3, 0, 1.5, 1e-2)


def test_commutation_needs_two_deltas():
    with pytest.raises(InsufficientSamples):
        commutation_test(S3, 0, 1, [1e-2])
    with pytest.raises(ValueError):
        commutation_test(S3, 1, 1, [1e-2, 5e-3])


# dynamics -------------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4])
def test_skew_symmetry_is_exact_along_the_flow(n):
    s = LaxState.random(n, np.random.default_rng(11))
    end = flow_for(s, 0, 1.0, 1e-3)
    assert np.array_equal(end.q, -end.q.T)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n", [3, 4])
def test_trace_invariants_drift(n, seed):
    s = LaxState.random(n, np.random.default_rng(seed))
    for k in range(n):
        d = invariant_drift(s, k, 1.0, 1e-3)
        assert d[2] <= 1e-10


def test_flow_for_stays_in_clear_window():
    s = LaxState.random(3, np.random.default_rng(5))
    lo, hi = clear_window(s, 1)
    end = flow_for(s, 1, 1.0, 1e-3)
    assert lo - 1e-12 <= end.times[1] <= hi + 1e-12
    assert np.array_equal(np.delete(end.times, 1), np.delete(s.times, 1))


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n", [3, 4])
def test_flows_commute(n, seed):
    s = LaxState.random(n, np.random.default_rng(seed))
    for i in range(n):
        for j in range(i + 1, n):
            r = commutation_test(s, i, j, [1e-2, 5e-3, 2.5e-3])
            assert r.order >= 2.9
            assert max(r.errors) <= 1e-8


@pytest.mark.parametrize("n", [3, 4])
def test_mutated_flow_does_not_commute(n):
    s = LaxState.random(n, np.random.default_rng(0))
    r = commutation_test(s, 0, 1, [1e-2, 5e-3, 2.5e-3], mutate=True)
    assert r.order <= 2.3


# two-time frame --------------------------------------------------------------------

@pytest.fixture
def frame():
    return TwoTimeFrame([1.0, 2.0, -0.5], [0.3, -1.0, 2.0], 0.7, 1.1)


def test_frame_decomposition(frame):
    q = LaxState.random(3, np.random.default_rng(3)).q
    u, v = frame.uv(q)
    assert np.abs(frame.x * u + frame.t * v - q).max() <= 1e-14


def test_frame_generators(frame):
    q = LaxState.random(3, np.random.default_rng(3)).q
    s = frame.state(q)
    H = np.array([hamiltonian_k(s, k) for k in range(3)])
    assert frame.Q_t(q) == pytest.approx(frame.half_trace_qv(q), abs=1e-13)
    assert frame.Q_x(q) == pytest.approx(frame.half_trace_qu(q), abs=1e-13)
    assert frame.Q_t(q) == pytest.approx(2 * frame.b @ H, abs=1e-13)
    assert frame.Q_x(q) == pytest.approx(2 * frame.a @ H, abs=1e-13)
    assert frame.Q_t_components(q) == pytest.approx(frame.Q_t(q), abs=1e-13)
    assert frame.Q_x_components(q) == pytest.approx(frame.Q_x(q), abs=1e-13)


def test_frame_flows_commute(frame):
    q = LaxState.random(3, np.random.default_rng(3)).q
    errs = []
    for d in (1e-2, 5e-3):
        qa, fa = frame.advance_x(q, d)
        qa, fa = fa.advance_t(qa, d)
        qb, fb = frame.advance_t(q, d)
        qb, fb = fb.advance_x(qb, d)
        errs.append(np.abs(qa - qb).max())
        assert (fa.x, fa.t) == (fb.x, fb.t)
    assert errs[1] < errs[0] / 8


# output ------------------------------------------------------------------------------

def test_csv(tmp_path):
    assert csv_header(3) == ["t_1", "t_2", "t_3", "q_12", "q_13", "q_23", "H_1", "H_2", "H_3", "tr_q2"]
    states = trajectory(S3, 0, 0.2, 1e-2, samples=4)
    path = tmp_path / "nw.csv"
    write_csv(str(path), states)
    rows = list(csv.reader(open(path)))
    assert len(rows) == 6
    assert float(rows[1][3]) == 1.0 and float(rows[1][6]) == 1.5
    assert float(rows[-1][0]) == pytest.approx(0.2)
    assert float(rows[1][-1]) == trace_power(S3.q, 2) == -28.0
