import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nschow.brackets import Smoothness
from nschow.fields import (
    DomainError,
    ExpressionSyntaxError,
    UnknownSystem,
    UnknownVariable,
    builtin_system,
    eval_field,
    load_field_file,
    numeric_jacobian,
    parse_field_expression,
)


def test_builtin_fields_parse(r4):
    f1 = parse_field_expression("0; 1; 0; 1", 4)
    f2 = parse_field_expression("1; 0; 2*x2^2 + x2*abs(x2); 0", 4)
    assert np.array_equal(eval_field(f1, [3, -1, 2, 5]), [0, 1, 0, 1])
    assert np.array_equal(eval_field(f2, [0, 1, 0, 0]), [1, 0, 3, 0])
    assert f2.regularity == Smoothness(0, True)
    assert r4.field(2).regularity == Smoothness(1, True)


def test_zero_field():
    f = parse_field_expression("0;0;0")
    assert np.array_equal(f([1.5, -2, 3]), np.zeros(3))


def test_division_by_zero_is_domain_error():
    f = parse_field_expression("x1/0; 0", 2)
    with pytest.raises(DomainError):
        f([1.0, 2.0])


@pytest.mark.parametrize("text", ["1 +", "x1 ** ", "foo(x1); 0", "abs(x1, x2); 0", "(x1; 0", "x1 ^ 2 ^ 2; 0", "x1^1.5; 0", "x1 $ 2; 0"])
def test_syntax_errors(text):
    with pytest.raises(ExpressionSyntaxError):
        parse_field_expression(text, 2)


def test_unknown_variable():
    with pytest.raises(UnknownVariable):
        parse_field_expression("x3; 0", 2)


def test_component_count():
    with pytest.raises(ExpressionSyntaxError):
        parse_field_expression("1; 2; 3", 2)


def test_precedence_and_powers():
    f = parse_field_expression("-x1^2 + 2*3/4; (x1 - x2)^-1; min(x1, x2) - max(x1, x2)")
    x = [3.0, 1.0, 0.0]
    assert np.allclose(f(x), [-9 + 1.5, 0.5, -2])


def test_numeric_jacobian_f2():
    f2 = parse_field_expression("1; 0; 2*x2^2 + x2*abs(x2); 0", 4)
    jac = numeric_jacobian(f2, [0, 0.5, 0, 0], 1e-6)
    assert np.allclose(jac[:, 1], [0, 0, 3, 0], atol=1e-6)


def test_numeric_jacobian_constant_and_linear(rng):
    f = parse_field_expression("1; -2; 3")
    assert np.abs(numeric_jacobian(f, rng.normal(size=3))).max() < 1e-12
    a = rng.normal(size=(3, 3))
    text = "; ".join(" + ".join(f"({float(a[i, k])!r})*x{k + 1}" for k in range(3)) for i in range(3))
    lin = parse_field_expression(text)
    assert np.allclose(numeric_jacobian(lin, rng.normal(size=3), 1e-5), a, atol=1e-8)
    assert np.allclose(lin.jacobian(np.zeros(3)), a, atol=1e-15)


def test_builtin_systems():
    r4 = builtin_system("example-r4")
    assert r4.dim == 4 and len(r4) == 3
    tr = builtin_system("translations-r2")
    assert np.array_equal(tr.field(1)([5, 5]), [1, 0]) and np.array_equal(tr.field(2)([-1, 3]), [0, 1])
    h = builtin_system("heisenberg")
    x = np.array([0.7, -0.2])
    # [g1,g2] = Dg2 g1 - Dg1 g2 = e2
    bracket = h.field(2).jacobian(x) @ h.field(1)(x) - h.field(1).jacobian(x) @ h.field(2)(x)
    assert np.array_equal(bracket, [0, 1])
    with pytest.raises(UnknownSystem):
        builtin_system("nope")
    with pytest.raises(IndexError):
        r4.field(4)


def test_regularity_inference():
    assert parse_field_expression("x1^2; sin(x2)").regularity == Smoothness(None)
    assert parse_field_expression("abs(x1); 0").regularity == Smoothness(0, True)
    assert parse_field_expression("sign(x1); 0").regularity == Smoothness(0, False)
    assert parse_field_expression("abs(x1); 0", regularity="C1_1").regularity == Smoothness(1, True)


def test_pickle_round_trip(r4):
    f = pickle.loads(pickle.dumps(r4.field(2)))
    assert np.array_equal(f([0, -0.3, 0, 0]), r4.field(2)([0, -0.3, 0, 0]))
    assert np.array_equal(f.jacobian([0, -0.3, 0, 0]), r4.field(2).jacobian([0, -0.3, 0, 0]))


def test_field_file(tmp_path):
    p = tmp_path / "sys.txt"
    p.write_text("# regularity: C1_1\n1\n0\n2*x2^2 + x2*abs(x2)\n\n0; 1; 0\n")
    s = load_field_file(p)
    assert s.dim == 3 and len(s) == 2
    assert s.field(1).regularity == Smoothness(1, True)
    assert np.array_equal(s.field(1)([0, 1, 0]), [1, 0, 3])


_SMOOTH = [
    "sin(x1)*x2^3 - exp(x1*x2/4); cos(x2)^2 + x1^3; x1*x2*x3 - 1/(2 + x3^2)",
    "exp(-x1^2) * sin(3*x2); x3^-2 + x1; (x1 + x2 + x3)^4 / 10",
]


@pytest.mark.parametrize("text", _SMOOTH)
def test_analytic_matches_numeric_jacobian(text, rng):
    f = parse_field_expression(text)
    for _ in range(100):
        x = rng.uniform(-1.5, 1.5, 3)
        x[2] = np.sign(x[2]) * max(abs(x[2]), 0.3)
        exact = f.jacobian(x)
        for h in (1e-3, 1e-4):
            approx = numeric_jacobian(f, x, h)
            # h^2 truncation against a generous third-derivative scale
            assert np.abs(exact - approx).max() <= 10 * h**2 * 300 + 1e-9


def test_kink_jacobian_convention():
    f = parse_field_expression("abs(x1); max(x1, 2*x1)")
    assert np.array_equal(f.jacobian([0.0, 0.0]), np.zeros((2, 2)) + [[0, 0], [1.5, 0]])
    assert np.array_equal(f.jacobian([0.5, 0.0]), [[1, 0], [2, 0]])


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=4))
def test_evaluation_is_pure(x):
    f = builtin_system("example-r4").field(2)
    a, b = f(x), f(x)
    assert a.tobytes() == b.tobytes()
