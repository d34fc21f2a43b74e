import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from bimanual_plan.transforms import RigidTransform, canonical_quat, relative_transform, slerp

coord = st.floats(-2.0, 2.0, allow_nan=False)
quat_part = st.floats(-1.0, 1.0, allow_nan=False)


@st.composite
def transforms(draw):
    q = np.array([draw(quat_part) for _ in range(4)])
    if np.linalg.norm(q) < 1e-3:
        q = np.array([1.0, 0.0, 0.0, 0.0])
    return RigidTransform(tuple(q / np.linalg.norm(q)), tuple(draw(coord) for _ in range(3)))


@given(transforms(), transforms(), transforms())
@settings(max_examples=60, deadline=None)
def test_composition_is_associative(a, b, c):
    left = a.compose(b).compose(c)
    right = a.compose(b.compose(c))
    assert left.almost_equal(right, 1e-9)


@given(transforms())
@settings(max_examples=60, deadline=None)
def test_inverse_gives_identity(a):
    assert a.compose(a.inverse()).almost_equal(RigidTransform.identity(), 1e-9)
    assert a.inverse().compose(a).almost_equal(RigidTransform.identity(), 1e-9)


@given(transforms(), transforms())
@settings(max_examples=60, deadline=None)
def test_relative_transform_reconstructs_pose(a, b):
    rel = relative_transform(a, b)
    assert b.compose(rel).almost_equal(a, 1e-9)
    # and the reverse relation undoes it
    assert rel.compose(relative_transform(b, a)).almost_equal(RigidTransform.identity(), 1e-9)


def test_compose_matches_homogeneous_matrices(rng):
    # oracle: 4x4 matrix products built from scipy rotations
    def matrix(t: RigidTransform):
        m = np.eye(4)
        w, x, y, z = t.rotation
        m[:3, :3] = Rotation.from_quat([x, y, z, w]).as_matrix()
        m[:3, 3] = t.translation
        return m

    for _ in range(20):
        a = RigidTransform(tuple(rng.normal(size=4)), tuple(rng.normal(size=3)))
        b = RigidTransform(tuple(rng.normal(size=4)), tuple(rng.normal(size=3)))
        assert np.allclose(matrix(a.compose(b)), matrix(a) @ matrix(b), atol=1e-12)


def test_canonical_quat_has_non_negative_w():
    q = canonical_quat([-0.5, 0.5, -0.5, 0.5])
    assert q[0] >= 0
    assert np.isclose(np.linalg.norm(q), 1.0)


def test_slerp_endpoints_and_midpoint():
    q0 = (1.0, 0.0, 0.0, 0.0)
    q1 = tuple(np.r_[np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])  # 90 deg about z
    assert np.allclose(slerp(q0, q1, 0.0), q0)
    assert np.allclose(slerp(q0, q1, 1.0), q1)
    mid = slerp(q0, q1, 0.5)
    assert np.allclose(mid, [np.cos(np.pi / 8), 0, 0, np.sin(np.pi / 8)])


def test_tuple7_round_trip():
    t = RigidTransform((0.5, 0.5, 0.5, 0.5), (1.0, -2.0, 3.0))
    assert RigidTransform.from_tuple7(t.as_tuple7()) == t
