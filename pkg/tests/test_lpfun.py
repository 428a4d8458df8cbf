import json
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spaceable import lpfun as lf
from spaceable import numerics as nx
from spaceable import sequences as sq

import oracles


def value(e, eps=F(1, 2**50)) -> float:
    iv = nx.enclose(e, eps)
    return float((iv.lo + iv.hi) / 2)


def test_witness_p2_norm_and_divergence():
    f = lf.fn_witness(2)
    v = lf.lq_fn_membership(f, 2)
    assert isinstance(v, sq.Converges) and v.exact and v.bound == nx.const(F(1, 3))
    d = lf.lq_fn_membership(f, 3)
    assert isinstance(d, sq.Diverges)
    assert d.certificate.exponent >= 1 and d.certificate.validate()
    assert d.certificate.lo == F(1, 4) and d.certificate.exponent == 1


def test_single_piece_examples():
    v = lf.lq_fn_membership(lf.constant_function(1), F(7, 3))
    assert v.bound == nx.ONE
    d = lf.lq_fn_membership(lf.power_piece(1, F(1, 3)), 3)
    assert isinstance(d, sq.Diverges) and d.certificate.exponent == 1
    c = lf.lq_fn_membership(lf.power_piece(1, F(1, 3)), 2)
    assert c.bound == nx.const(3)
    assert abs(oracles.piece_integral(0, 1, 0, 1, F(1, 3), 1.0, 2) - 3) < 3e-6


def test_quadrature_blow_up_near_log_singularity():
    # q gamma = 1 on the first block: integral over [a + h, b) grows like log(1/h)
    f = lf.fn_witness(2)
    pc = f.parts[0].piece(1)
    scale = value(pc.scale)
    vals = [oracles.piece_integral(pc.lo + F(1, 10**e), pc.hi, pc.anchor, pc.width, pc.gamma, scale, 3) for e in (3, 6, 9)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] - vals[1] > 0.9 * (vals[1] - vals[0])


@pytest.mark.parametrize("p", [F(1, 2), F(1), F(3, 2), F(2), F(3)])
def test_witness_pieces_have_block_norm(p):
    f = lf.fn_witness(p)
    fam = f.parts[0]
    for k in range(1, 6):
        pc = fam.piece(k)
        v = pc.power_integral(p)
        assert v.exact
        assert nx.certify_le(v.bound, nx.power(2, -k * p)) and nx.certify_le(nx.power(2, -k * p), v.bound)


def test_random_piece_integrals_match_quadrature():
    rng = random.Random(7)
    for _ in range(100):
        lo = F(rng.randint(0, 40), 64)
        hi = lo + F(rng.randint(1, 20), 64)
        if hi > 1:
            hi = F(1)
        anchor = lo - (F(rng.randint(0, 8), 64) if rng.random() < 0.5 else 0)
        anchor = max(anchor, F(0)) if anchor < 0 else anchor
        width = F(rng.randint(1, 32), 32)
        gamma = F(rng.randint(0, 11), 12)
        q = F(rng.randint(1, 12), 6)
        if anchor == lo and q * gamma >= 1:
            continue
        if q * gamma == 1:
            continue
        scale = nx.const(F(rng.randint(1, 9), rng.randint(1, 5)))
        pc = lf.Piece(lo, hi, anchor, width, gamma, scale)
        v = pc.power_integral(q)
        assert isinstance(v, sq.Converges)
        ref = oracles.piece_integral(lo, hi, anchor, width, gamma, float(scale.value), q)
        assert abs(value(v.bound) - ref) <= 1e-6 * abs(ref)


def test_rescaling_measure_identity():
    f = lf.fn_witness(F(3, 2))
    op = lf.build_fn_operator(f)
    base = lf.lq_fn_membership(op.f_tilde, op.p).bound
    for n in range(1, 9):
        fn = op.component(n)
        lo, hi = lf.dyadic_interval(n)
        mass = lf.lq_fn_membership(fn, op.p).bound
        assert nx.expands_to_zero(nx.add(mass, nx.mul(-(hi - lo), base)))
        assert all(lo <= part.support[0] and part.support[1] <= hi for part in fn.parts)


def test_rescaled_point_evaluation():
    f = lf.fn_witness(2)
    f1 = lf.rescale_to_interval(f, lf.dyadic_interval(1))
    for u in (F(1, 3), F(3, 10), F(1, 7), F(5, 16)):
        assert f1.value(F(1, 2) + u / 4) == f.value(u)
    assert lf.rescale_to_interval(lf.function(2, []), lf.dyadic_interval(1)).is_zero()
    with pytest.raises(ValueError):
        lf.rescale_to_interval(f, (F(1, 4), F(1, 2)))


def test_operator_examples():
    f = lf.fn_witness(2)
    op = lf.build_fn_operator(f)
    assert lf.apply_fn_operator(op, [1]).to_json() == f.to_json()
    f1 = lf.apply_fn_operator(op, [0, 1])
    lo, hi = lf.dyadic_interval(1)
    assert all(lo <= part.support[0] and part.support[1] <= hi for part in f1.parts)
    assert lf.injective_on_half(op, [1, 2])


def test_certify_fn_outside_examples():
    p = F(2)
    op = lf.build_fn_operator(lf.fn_witness(p))
    v = lf.certify_fn_outside(op, [1], p + F(1, 2))
    assert isinstance(v, sq.Diverges) and v.certificate.hi <= F(1, 2)
    v = lf.certify_fn_outside(op, [0, 0, 1], p + F(1, 2))
    lo, hi = lf.dyadic_interval(2)
    assert isinstance(v, sq.Diverges) and lo <= v.certificate.lo < v.certificate.hi <= hi
    with pytest.raises(ValueError):
        lf.certify_fn_outside(op, [0, 0], p + 1)


def test_component_supports_disjoint():
    op = lf.build_fn_operator(lf.fn_witness(1))
    spans = [lf.dyadic_interval(n) for n in range(1, 12)]
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
    assert spans[0][0] >= F(1, 2)


@pytest.mark.parametrize("p", [F(1, 2), F(1), F(2)])
def test_direction_flip_grid(p):
    f = lf.fn_witness(p)
    for j in range(1, 9):
        assert isinstance(lf.lq_fn_membership(f, p * j / 8), sq.Converges)
        assert isinstance(lf.lq_fn_membership(f, p + F(j, 8)), sq.Diverges)


def test_mixed_function_gives_lower_sum_evidence():
    f = lf.add_functions(lf.fn_witness(1), lf.power_piece(1, F(1, 2), 1, 0, F(1, 2)))
    assert f.mixed
    ev = lf.lq_fn_membership(f, F(5, 2), sq.Budget(threshold=F(50)))
    assert isinstance(ev, sq.NumericEvidence) and ev.threshold_reached


coeffs = st.fractions(min_value=F(-4), max_value=F(4), max_denominator=4)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([F(1, 2), F(1), F(2)]), st.lists(coeffs, min_size=1, max_size=6))
def test_norm_bound_and_outside(p, a):
    op = lf.build_fn_operator(lf.fn_witness(p))
    assert lf.fn_norm_bound_check(op, a)
    if any(a):
        v = lf.certify_fn_outside(op, a, p + F(1, 3))
        assert isinstance(v, sq.Diverges) and v.certificate.validate()


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([F(1, 2), F(1), F(2)]), st.lists(coeffs, min_size=1, max_size=5))
def test_function_descriptor_round_trip(p, a):
    op = lf.build_fn_operator(lf.fn_witness(p))
    g = op.apply(a)
    text = json.dumps(g.to_json(), sort_keys=True)
    assert json.dumps(lf.function_from_json(json.loads(text)).to_json(), sort_keys=True) == text
