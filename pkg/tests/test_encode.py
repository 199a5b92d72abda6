import math

import pytest
from hypothesis import given, strategies as st

from hdma.encode import (
    AnglePair, FeatureOutOfRange, FeatureVector, IdOverflow, Profile, ProfileFormatError,
    angle_embed, basis_decode, basis_encode, state_amplitudes, validate,
)
from hdma.datastore import Row

features = st.floats(-1.0, 1.0, allow_nan=False)


@pytest.mark.parametrize("f, expected", [
    ((-0.5, 0.5), (math.pi / 4, 3 * math.pi / 4)),
    ((-1.0, 1.0), (0.0, math.pi)),
    ((0.0, 0.0), (math.pi / 2, math.pi / 2)),
])
def test_angle_embed(f, expected):
    a = angle_embed(FeatureVector(*f))
    assert (a.theta, a.phi) == pytest.approx(expected, abs=1e-15)


def test_angle_embed_endpoints_exact():
    a = angle_embed(FeatureVector(-1.0, 1.0))
    assert a.theta == 0.0 and a.phi == math.pi


def test_angle_embed_out_of_range_reports_value():
    with pytest.raises(FeatureOutOfRange) as info:
        angle_embed(FeatureVector(1.5, 0.0))
    assert info.value.value == 1.5 and info.value.high == 1.0


@given(features, features)
def test_angle_embed_monotone(f, g):
    if f <= g:
        f, g = FeatureVector(f, f), FeatureVector(g, g)
        lo, hi = angle_embed(f), angle_embed(g)
        assert lo.theta <= hi.theta and lo.phi <= hi.phi
        if g.f1 - f.f1 > 1e-12:
            assert lo.theta < hi.theta and lo.phi < hi.phi


@given(features, features, features)
def test_angle_embed_affine(f, g, t):
    # theta(f) - theta(g) == (f - g) * pi / 2
    diff = angle_embed(FeatureVector(f, t)).theta - angle_embed(FeatureVector(g, t)).theta
    assert diff == pytest.approx((f - g) * math.pi / 2, abs=1e-12)


def test_state_amplitudes_examples():
    assert state_amplitudes(AnglePair(0.0, 2.0)) == (1, 0)
    a0, a1 = state_amplitudes(AnglePair(math.pi, 0.0))
    assert abs(a0) < 1e-12 and abs(a1 - 1) < 1e-12
    a0, a1 = state_amplitudes(AnglePair(math.pi / 4, 3 * math.pi / 4))
    assert a0 == pytest.approx(0.923880, abs=1e-6)
    assert a1 == pytest.approx(complex(-0.270598, 0.270598), abs=1e-6)


@given(features, features)
def test_amplitudes_unit_norm(f1, f2):
    a0, a1 = state_amplitudes(angle_embed(FeatureVector(f1, f2)))
    assert abs(abs(a0) ** 2 + abs(a1) ** 2 - 1) < 1e-12


@pytest.mark.parametrize("id, bits", [(2, [1, 0]), (3, [1, 1]), (0, [0, 0])])
def test_basis_encode(id, bits):
    assert basis_encode(id, 2) == bits


def test_basis_encode_overflow():
    with pytest.raises(IdOverflow):
        basis_encode(4, 2)


@given(st.integers(1, 12).flatmap(lambda w: st.tuples(st.just(w), st.integers(0, 2**w - 1))))
def test_basis_encode_round_trip(case):
    width, id = case
    bits = basis_encode(id, width)
    assert len(bits) == width and basis_decode(bits) == id


@given(st.integers(1, 8))
def test_basis_encode_injective(width):
    codes = {tuple(basis_encode(i, width)) for i in range(2**width)}
    assert len(codes) == 2**width


def test_validate_table1_ok(table1):
    assert validate(table1, Profile(max_points=16, id_bit_width=2)) == []


def test_validate_reports_every_violation():
    rows = [Row(0, 0.0, 0.0, "a", "centroid"), Row(1, 1.5, 0.0), Row(4, 0.0, 0.0)]
    kinds = {(v.kind, v.row_id, v.value) for v in validate(rows, Profile(max_points=1, id_bit_width=2))}
    assert kinds == {("FeatureOutOfRange", 1, 1.5), ("IdOverflow", 4, 4), ("TooManyPoints", None, 2)}


def test_profile_text_round_trip_and_defaults(tmp_path):
    path = tmp_path / "p.profile"
    path.write_text("max_points=16\nfeature_min=-1\nfeature_max=1\nid_bit_width=2\nshots=1000\nauto_regenerate=false\n")
    p = Profile.load(path)
    assert p == Profile(16, -1.0, 1.0, 2, 1000, False)
    assert Profile.from_text(p.to_text()) == p
    assert Profile.from_text("") == Profile()
    assert Profile().id_width_for([0, 1, 2, 3]) == 2
    assert Profile().id_width_for([0]) == 1
    assert Profile().id_width_for([4]) == 3


@pytest.mark.parametrize("text", [
    "max_points=-1", "feature_min=0.5\nfeature_max=0.5", "shots=0", "id_bit_width=0", "colour=red",
    "shots=many", "feature_max=2",
])
def test_profile_rejects_bad_values(text):
    with pytest.raises(ProfileFormatError):
        Profile.from_text(text)
