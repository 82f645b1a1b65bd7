import numpy as np
import pytest

from deocc import morphable
from deocc.errors import ContractError, FormatError
from deocc.morphable import CoeffVector, rotation_matrix, synthesize, landmarks3d


def _quaternion_matrix(rx, ry, rz):
    """Independent oracle: compose axis quaternions qz*qy*qx, convert to a
    matrix."""
    def axis_quat(axis, angle):
        s = np.sin(angle / 2.0)
        return np.array([np.cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s])

    def qmul(a, b):
        w1, x1, y1, z1 = a
        w2, x2, y2, z2 = b
        return np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])

    q = qmul(axis_quat((0, 0, 1), rz), qmul(axis_quat((0, 1, 0), ry), axis_quat((1, 0, 0), rx)))
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


class TestCoeffVector:
    def test_layout(self):
        c = CoeffVector.build(rotation=(1, 2, 3), translation=(4, 5, 6),
                              shape=np.arange(144), texture=np.arange(80),
                              illumination=np.arange(9))
        assert c.data.shape == (239,)
        np.testing.assert_array_equal(c.rotation, [1, 2, 3])
        np.testing.assert_array_equal(c.translation, [4, 5, 6])
        assert c.shape[0] == 0 and c.shape[-1] == 143
        assert c.texture[-1] == 79 and c.illumination[-1] == 8

    def test_length_enforced(self):
        with pytest.raises(ContractError):
            CoeffVector(np.zeros(238))
        with pytest.raises(ContractError):
            CoeffVector(np.full(239, np.inf))


class TestRotation:
    def test_identity(self):
        np.testing.assert_allclose(rotation_matrix(np.zeros(3)), np.eye(3), atol=1e-15)

    def test_vs_quaternion_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            angles = rng.uniform(-np.pi, np.pi, 3)
            got = rotation_matrix(angles)
            want = _quaternion_matrix(*angles)
            assert np.abs(got - want).max() < 1e-12


class TestSynthesize:
    def test_zero_coeffs_is_mean(self, toy):
        mesh = synthesize(toy, CoeffVector.zeros())
        np.testing.assert_array_equal(mesh.positions, toy.mean_shape)
        np.testing.assert_array_equal(mesh.albedo, toy.mean_albedo)

    def test_pure_translation(self, toy):
        mesh = synthesize(toy, CoeffVector.build(translation=(1, 2, 3)))
        np.testing.assert_allclose(mesh.positions, toy.mean_shape + [1, 2, 3], atol=1e-12)

    def test_unit_shape_weight_matches_dense_oracle(self, toy):
        rng = np.random.default_rng(1)
        for k in rng.integers(0, 144, size=5):
            e = np.zeros(144)
            e[k] = 1.0
            mesh = synthesize(toy, CoeffVector.build(shape=e))
            expected = toy.mean_shape.reshape(-1) + toy.shape_basis[:, k]
            np.testing.assert_allclose(mesh.positions.reshape(-1), expected, atol=1e-12)

    def test_shape_linearity_at_identity_pose(self, toy):
        rng = np.random.default_rng(2)
        s1, s2 = rng.normal(size=144), rng.normal(size=144)
        p1 = synthesize(toy, CoeffVector.build(shape=s1)).positions
        p12 = synthesize(toy, CoeffVector.build(shape=s1 + s2)).positions
        extra = (toy.shape_basis @ s2).reshape(-1, 3)
        np.testing.assert_allclose(p12, p1 + extra, atol=1e-9)

    def test_rigid_invariance_of_distances(self, toy):
        rng = np.random.default_rng(3)
        c = CoeffVector.build(rotation=rng.uniform(-1, 1, 3), translation=(0.3, -1.0, 9.0))
        mesh = synthesize(toy, c)
        base = synthesize(toy, CoeffVector.zeros())
        idx = rng.integers(0, toy.vertex_count, size=(50, 2))
        d_posed = np.linalg.norm(mesh.positions[idx[:, 0]] - mesh.positions[idx[:, 1]], axis=1)
        d_mean = np.linalg.norm(base.positions[idx[:, 0]] - base.positions[idx[:, 1]], axis=1)
        np.testing.assert_allclose(d_posed, d_mean, atol=1e-9)

    def test_normals_unit(self, toy):
        mesh = synthesize(toy, CoeffVector.build(rotation=(0.3, -0.2, 0.1)))
        np.testing.assert_allclose(np.linalg.norm(mesh.normals, axis=1), 1.0, atol=1e-9)

    def test_albedo_clamped(self, toy):
        c = CoeffVector.build(texture=np.full(80, 50.0))
        mesh = synthesize(toy, c)
        assert mesh.albedo.min() >= 0.0 and mesh.albedo.max() <= 1.0


class TestLandmarks:
    def test_identity_pose(self, toy):
        mesh = synthesize(toy, CoeffVector.zeros())
        marks, weights = landmarks3d(mesh, toy)
        np.testing.assert_array_equal(marks, toy.mean_shape[toy.landmark_indices])
        assert set(np.unique(weights)) == {1.0, 20.0}
        assert (weights == 20.0).sum() == 10

    def test_translation_equivariance(self, toy):
        t = np.array([0.5, -0.25, 2.0])
        base, _ = landmarks3d(synthesize(toy, CoeffVector.zeros()), toy)
        moved, _ = landmarks3d(synthesize(toy, CoeffVector.build(translation=t)), toy)
        np.testing.assert_allclose(moved, base + t, atol=1e-12)

    def test_rotation_isometry(self, toy):
        c = CoeffVector.build(rotation=(0.4, 0.8, -0.3))
        marks, _ = landmarks3d(synthesize(toy, c), toy)
        base, _ = landmarks3d(synthesize(toy, CoeffVector.zeros()), toy)
        np.testing.assert_allclose(
            np.linalg.norm(marks - marks.mean(axis=0), axis=1),
            np.linalg.norm(base - base.mean(axis=0), axis=1), atol=1e-9)


class TestToyModel:
    def test_deterministic(self):
        a = morphable.toy_model(8, 42)
        b = morphable.toy_model(8, 42)
        np.testing.assert_array_equal(a.mean_shape, b.mean_shape)
        np.testing.assert_array_equal(a.shape_basis, b.shape_basis)
        np.testing.assert_array_equal(a.albedo_basis, b.albedo_basis)
        np.testing.assert_array_equal(a.landmark_indices, b.landmark_indices)

    def test_basis_orthogonality(self, toy):
        gram = toy.shape_basis.T @ toy.shape_basis
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() < 1e-9
        gram_a = toy.albedo_basis.T @ toy.albedo_basis
        off_a = gram_a - np.diag(np.diag(gram_a))
        assert np.abs(off_a).max() < 1e-9

    def test_mean_albedo_in_gamut(self, toy):
        assert toy.mean_albedo.min() >= 0.0 and toy.mean_albedo.max() <= 1.0

    def test_displacement_bound(self, toy):
        diag = np.linalg.norm(toy.mean_shape.max(axis=0) - toy.mean_shape.min(axis=0))
        per_vertex = np.linalg.norm(toy.shape_basis.reshape(toy.vertex_count, 3, -1), axis=1)
        assert per_vertex.max() <= 0.05 * diag + 1e-12

    def test_ring_count_minimum(self):
        with pytest.raises(ContractError):
            morphable.toy_model(3, 0)
        small = morphable.toy_model(4, 0)
        assert small.landmark_count == 68


class TestModelFile:
    def test_roundtrip(self, toy, tmp_path):
        path = tmp_path / "m.dmm"
        morphable.write_model(toy, path)
        back = morphable.read_model(path)
        # float32 at the file boundary
        np.testing.assert_array_equal(back.mean_shape, toy.mean_shape.astype(np.float32))
        np.testing.assert_array_equal(back.shape_basis, toy.shape_basis.astype(np.float32))
        np.testing.assert_array_equal(back.triangles, toy.triangles)
        np.testing.assert_array_equal(back.landmark_indices, toy.landmark_indices)
        np.testing.assert_array_equal(back.landmark_weights, toy.landmark_weights)
        # second write is byte-identical
        path2 = tmp_path / "m2.dmm"
        morphable.write_model(back, path2)
        morphable.write_model(morphable.read_model(path2), path)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dmm"
        path.write_bytes(b"NOPE" + b"\0" * 60)
        with pytest.raises(FormatError):
            morphable.read_model(path)

    def test_truncated(self, toy, tmp_path):
        path = tmp_path / "t.dmm"
        morphable.write_model(toy, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FormatError):
            morphable.read_model(path)
