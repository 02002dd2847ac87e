import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from dpsqkd.bounds import (
    KeyRateResult,
    NoDetectionsError,
    Observables,
    binary_entropy,
    key_rate,
    lambda_const,
    phase_error_bound,
)
from dpsqkd.optimizer import detection_rate
from dpsqkd.source import SourceStats, make_source_stats
from oracles import binary_entropy_mp, phase_error_bound_mp

LAM = lambda_const()
probs = st.floats(min_value=0.0, max_value=0.5)


def test_binary_entropy_endpoints():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.5) == 1.0


def test_binary_entropy_value():
    # Oracle: 50-digit evaluation.
    assert binary_entropy(0.11) == pytest.approx(0.499915958164528, rel=1e-14)
    assert binary_entropy(0.11) == pytest.approx(float(binary_entropy_mp("0.11")), rel=1e-14)


@pytest.mark.parametrize("x", [0.5000001, 0.7, 1.0, 3.5, 1e6])
def test_binary_entropy_saturates(x):
    assert binary_entropy(x) == 1.0


@pytest.mark.parametrize("x", [-1e-12, float("nan"), float("inf")])
def test_binary_entropy_domain(x):
    with pytest.raises(ValueError):
        binary_entropy(x)


@given(probs, probs)
def test_binary_entropy_concave(x, y):
    assert binary_entropy((x + y) / 2) >= (binary_entropy(x) + binary_entropy(y)) / 2 - 1e-15


def test_lambda_value_and_identities():
    assert LAM == pytest.approx(5.23606797749979, abs=1e-14)
    assert abs(LAM**2 - 6 * LAM + 4) <= 1e-12
    assert abs(LAM * (3 - math.sqrt(5)) / 2 - 2) <= 1e-12


def test_phase_error_bound_noiseless():
    assert phase_error_bound(Observables(0.1, 0.0), SourceStats(0.0, 0.0, 0.0)) == 0.0


def test_phase_error_bound_coherent_point():
    stats = make_source_stats(7e-3)
    got = phase_error_bound(Observables(0.013805, 0.02), stats)
    assert got == pytest.approx(0.18786849440612933, rel=1e-12)
    assert got == pytest.approx(float(phase_error_bound_mp(0.013805, 0.02, *stats.as_tuple())), rel=1e-13)


def test_phase_error_bound_saturation_path():
    got = phase_error_bound(Observables(1e-6, 0.0), SourceStats(1e-3, 1e-6, 1e-9))
    assert got == pytest.approx(6.2360679774997899, rel=1e-13)
    assert got > 0.5
    assert binary_entropy(got) == 1.0


def test_phase_error_bound_no_detections():
    with pytest.raises(NoDetectionsError):
        phase_error_bound(Observables(0.0, 0.01), SourceStats(0.1, 0.01, 0.001))


def test_key_rate_no_detections():
    with pytest.raises(NoDetectionsError):
        key_rate(Observables(0.0, 0.02), make_source_stats(0.01))


def test_key_rate_perfect_channel():
    r = key_rate(Observables(0.1, 0.0), SourceStats(0.0, 0.0, 0.0), f_EC=0.0)
    assert r.R == pytest.approx(0.1 / 3, rel=1e-15)
    assert not r.aborted


def test_key_rate_records_intermediates():
    stats = make_source_stats(7e-3)
    obs = Observables(detection_rate(1.0, 7e-3), 0.02)
    r = key_rate(obs, stats)
    assert isinstance(r, KeyRateResult)
    assert r.f_EC == pytest.approx(binary_entropy(0.02))
    assert r.e_ph_U == pytest.approx(phase_error_bound(obs, stats))
    assert r.mu == 7e-3 and r.Q == obs.Q and r.stats is stats
    # Closed-form pipeline at 50 digits.
    assert r.R == pytest.approx(0.00074352454596222818, rel=1e-12)


def test_key_rate_fixed_inefficiency():
    stats = make_source_stats(7e-3)
    obs = Observables(detection_rate(1.0, 7e-3), 0.02)
    shannon = key_rate(obs, stats)
    lossy = key_rate(obs, stats, f_EC=1.16 * binary_entropy(0.02))
    assert lossy.R < shannon.R
    assert lossy.R == pytest.approx(shannon.R - obs.Q * 0.16 * binary_entropy(0.02) / 3)


def test_key_rate_bad_f_ec():
    with pytest.raises(ValueError):
        key_rate(Observables(0.1, 0.0), SourceStats(0, 0, 0), f_EC="cascade")


def test_key_rate_clamps_and_flags():
    r = key_rate(Observables(0.01, 0.25), make_source_stats(1e-3))
    assert r.R == 0.0 and r.aborted and r.raw_rate < 0


def test_observables_validation():
    with pytest.raises(ValueError):
        Observables(1.5, 0.0)
    with pytest.raises(ValueError):
        Observables(0.5, -0.1)


def _stats(q1, r2, r3):
    # r2, r3 in [0, 1] give q2 = r2 q1 and q3 = r3 q2, keeping the tails nested.
    q2 = r2 * q1
    return SourceStats(q1, q2, r3 * q2)


stats_st = st.builds(
    _stats,
    st.floats(0.0, 0.2),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)


@given(
    st.floats(1e-4, 1.0),
    probs,
    stats_st,
)
def test_rate_invariants(Q, e_bit, stats):
    r = key_rate(Observables(Q, e_bit), stats)
    assert 0.0 <= r.R <= Q / 3
    assert r.e_ph_U >= LAM * e_bit
    if 1 - r.f_EC - binary_entropy(r.e_ph_U) <= 0:
        assert r.R == 0.0 and r.aborted


@given(st.floats(1e-4, 1.0), probs, probs, stats_st)
def test_rate_nonincreasing_in_e_bit(Q, e1, e2, stats):
    lo, hi = sorted((e1, e2))
    assert key_rate(Observables(Q, hi), stats).R <= key_rate(Observables(Q, lo), stats).R + 1e-15


@given(
    st.floats(1e-4, 1.0),
    probs,
    st.floats(1e-6, 0.2),
    st.floats(0.01, 1.0),
    st.floats(0.01, 1.0),
    st.sampled_from([0, 1, 2]),
    st.floats(1.0001, 1.5),
)
def test_monotone_in_each_tail_bound(Q, e_bit, q1, r2, r3, which, factor):
    base = [q1, r2 * q1, r3 * r2 * q1]
    bumped = list(base)
    bumped[which] *= factor
    assume(bumped[2] <= bumped[1] <= bumped[0] <= 1.0)
    obs = Observables(Q, e_bit)
    s0, s1 = SourceStats(*base), SourceStats(*bumped)
    assert phase_error_bound(obs, s1) > phase_error_bound(obs, s0)
    assert key_rate(obs, s1).R <= key_rate(obs, s0).R


@pytest.mark.parametrize(
    "ratio,eta_lo,eta_hi",
    [(1e-3, 1e-2, 1.0), (7e-3, 1e-2, 1e-1)],
)
def test_scaling_law_mu_proportional_to_eta(ratio, eta_lo, eta_hi):
    etas = [eta_lo * (eta_hi / eta_lo) ** (k / 10) for k in range(11)]
    results = []
    for eta in etas:
        mu = ratio * eta
        results.append(key_rate(Observables(detection_rate(eta, mu), 0.02), make_source_stats(mu)))
    e_ph = [r.e_ph_U for r in results]
    scaled = [r.R / eta**2 for r, eta in zip(results, etas)]
    assert max(e_ph) / min(e_ph) - 1 <= 1e-2
    assert max(scaled) / min(scaled) - 1 <= 1e-2
