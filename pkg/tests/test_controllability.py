import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nschow.brackets import parse_field_bracket
from nschow.controllability import (
    ArityError,
    CertificateMissing,
    CertifyConfig,
    SteerConfig,
    TargetTooFar,
    TooFewConverged,
    UniquenessHypothesisError,
    certify_bracket_generating,
    damped_pseudoinverse_solve,
    fit_holder_exponent,
    min_singular_over_selections,
    reachable_cloud,
    right_inverse,
    steer,
    verify_gdq_inequality,
)
from nschow.fields import VectorFieldSystem, builtin_system, parse_field_expression
from nschow.flow import FlowConfig
from nschow.lie_bracket import SamplingConfig, set_valued_bracket
from nschow.multiflow import bracket_family, replay
from nschow.polytope import BracketPolytope, inflate

FAST = SamplingConfig(samples_per_radius=60)


@pytest.fixture(scope="module")
def r4_cert():
    return certify_bracket_generating(bracket_family("default5"), builtin_system("example-r4"), np.zeros(4), FAST)


def test_certify_r4(r4_cert):
    assert r4_cert.status == "Certified"
    assert r4_cert.margin > 0.1


def test_certify_translations(trans):
    c = certify_bracket_generating(bracket_family("translations2"), trans, [0.3, -2.0], FAST)
    assert c.status == "Certified"
    assert abs(c.min_sigma - 1) < 1e-12


def test_truncated_family_fails(r4):
    c = certify_bracket_generating(bracket_family("truncated4"), r4, [0.5, 0.0, -0.3, 1.0], FAST)
    assert c.status == "Failed"


def test_arity_and_uh(r4):
    with pytest.raises(ArityError):
        certify_bracket_generating(bracket_family(["X1", "X2", "[X1,X2]"]), r4, np.zeros(4), FAST)
    s = VectorFieldSystem(2, (parse_field_expression("1; 0"), parse_field_expression("0; sign(x1)")))
    with pytest.raises(UniquenessHypothesisError):
        certify_bracket_generating(bracket_family(["X1", "X2"]), s, [0, 0], FAST)


_SETS = st.lists(arrays(float, st.tuples(st.integers(1, 2), st.just(2)), elements=st.floats(-2, 2)), min_size=3, max_size=3)


@settings(max_examples=25)
@given(_SETS, st.floats(0.01, 0.3))
def test_sandwich(sets, eps):
    cfg = CertifyConfig(starts=10)
    base = min_singular_over_selections(sets, cfg)["min_sigma"]
    big = min_singular_over_selections([inflate(v, eps) for v in sets], cfg)["min_sigma"]
    small = min_singular_over_selections([v.mean(axis=0)[None, :] for v in sets], cfg)["min_sigma"]
    assert big <= base + 1e-7
    assert small >= base - 1e-7


def test_interior_minimum_found():
    # the segment from -e2 to e2 passes through 0
    sets = [np.array([[1.0, 0.0]]), np.array([[0.0, -1.0], [0.0, 1.0]])]
    rep = min_singular_over_selections(sets)
    assert rep["min_sigma"] < 1e-6


def test_linear_rate_surrogate(rng):
    for _ in range(100):
        a = rng.normal(size=(3, 5))
        y = rng.normal(size=3)
        sol = damped_pseudoinverse_solve(lambda t: a @ t, a, y, 1e-12)
        assert sol.converged
        assert np.linalg.norm(sol.t) <= (np.linalg.norm(right_inverse(a), 2) + 0.01) * np.linalg.norm(y)


def test_damping_handles_overshoot():
    # cubic map: plain Newton-like steps with the linearization at 0 overshoot
    a = np.array([[1.0]])
    sol = damped_pseudoinverse_solve(lambda t: t + 3 * t**3, a, np.array([0.5]), 1e-10)
    assert sol.converged
    assert abs(sol.t[0] + 3 * sol.t[0] ** 3 - 0.5) < 1e-10


def test_steer_translations(trans):
    c = certify_bracket_generating(bracket_family("translations2"), trans, [0, 0], FAST)
    r = steer(c, trans, [0.3, -0.2])
    assert r.converged and r.iterations == 1
    assert np.allclose(r.t, [0.3, -0.2])
    assert abs(r.tau - 0.5) < 1e-15


def test_steer_r4(r4_cert, rng):
    r4 = builtin_system("example-r4")
    for _ in range(5):
        u = rng.normal(size=4)
        r = steer(r4_cert, r4, 1e-3 * u / np.linalg.norm(u))
        assert r.converged and r.error_norm <= 1e-5
        assert r.replay_error <= 5 * FlowConfig().error_target
        assert np.abs(replay(r.word, r4, np.zeros(4)) - r.terminal).max() <= 5e-10
        assert r.tau == r.word.total_time


def test_steer_requires_certificate(r4):
    with pytest.raises(CertificateMissing):
        steer(None, r4, np.zeros(4))
    failed = certify_bracket_generating(bracket_family("truncated4"), r4, np.zeros(4), FAST)
    with pytest.raises(CertificateMissing):
        steer(failed, r4, np.zeros(4))


def test_steer_target_distance(trans):
    c = certify_bracket_generating(bracket_family("translations2"), trans, [0, 0], FAST)
    with pytest.raises(TargetTooFar):
        steer(c, trans, [5, 0], SteerConfig(max_target_distance=1.0))


def test_holder_translations_and_reproducible(trans):
    c = certify_bracket_generating(bracket_family("translations2"), trans, [0, 0], FAST)
    a = fit_holder_exponent(c, trans, [1e-2, 3e-3, 1e-3, 3e-4], 10, seed=3)
    b = fit_holder_exponent(c, trans, [1e-2, 3e-3, 1e-3, 3e-4], 10, seed=3)
    assert 0.95 <= a.slope <= 1.05
    assert a.slope == b.slope
    assert a.expected == 1.0


def test_holder_too_few_converged(trans):
    c = certify_bracket_generating(bracket_family("translations2"), trans, [0, 0], FAST)
    with pytest.raises(TooFewConverged):
        fit_holder_exponent(c, trans, [1e-2, 1e-3], 5, SteerConfig(max_iter=0))


def test_reachable_cloud_trivial(trans):
    pts, skipped = reachable_cloud(trans, [0.2, 0.1], 0.0, 20, 5)
    assert skipped == 0 and np.allclose(pts, [0.2, 0.1])
    pts, _ = reachable_cloud(trans, [0.2, 0.1], 0.4, 200, 6, seed=2)
    assert np.all(np.abs(pts - [0.2, 0.1]).sum(axis=1) <= 0.4 + 1e-12)


def test_reachable_cloud_contains_steered_targets(r4_cert, rng):
    r4 = builtin_system("example-r4")
    results = []
    for _ in range(3):
        u = rng.normal(size=4)
        results.append(steer(r4_cert, r4, 1e-3 * u / np.linalg.norm(u)))
    budget = max(r.tau for r in results)
    pts, _ = reachable_cloud(r4, np.zeros(4), budget, 300, 12, seed=4)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.1 * (hi - lo)
    for r in results:
        assert np.all(r.terminal >= lo - pad) and np.all(r.terminal <= hi + pad)


def test_gdq_heisenberg(heis):
    rows = verify_gdq_inequality(parse_field_bracket("[X1,X2]"), heis, [0, 0], BracketPolytope(2, [[0, 1]]), [1e-1, 1e-2, 1e-3])
    assert max(r["max_residual"] for r in rows) <= 1e-6


def test_gdq_commuting(trans):
    rows = verify_gdq_inequality(parse_field_bracket("[X1,X2]"), trans, [0.1, 0.2], BracketPolytope(2, [[0, 0]]), [1e-1, 1e-3])
    assert max(r["max_residual"] for r in rows) <= 1e-12


def test_gdq_r4_monotone(r4):
    b = parse_field_bracket("[X1,[X1,X2]]")
    poly = set_valued_bracket(b, r4, np.zeros(4), FAST)
    rows = verify_gdq_inequality(b, r4, np.zeros(4), poly, [1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4])
    res = [r["max_residual"] for r in rows]
    # roundoff floor: residuals at the 1e-12 level carry no trend
    assert all(b <= 1.1 * a + 1e-9 for a, b in zip(res, res[1:]))
