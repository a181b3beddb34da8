import math

import numpy as np
import pytest

from emlb.errors import ConfigError
from emlb.fields import (
    Grid,
    PhysicalParams,
    curl,
    dealias,
    div,
    equilibrium,
    from_spectral,
    grad,
    l2_norm,
    laplacian,
    leray_project_hat,
    spectral_l2_norm,
    to_spectral,
)
from emlb.snapshot import read_snapshot, read_state, write_snapshot, write_state


class TestGrid:
    def test_validation(self):
        with pytest.raises(ConfigError):
            Grid(2, 48)
        with pytest.raises(ConfigError):
            Grid(2, 16)
        with pytest.raises(ConfigError):
            Grid(4, 32)
        with pytest.raises(ConfigError):
            Grid(2, (32, 64, 32))
        with pytest.raises(ConfigError):
            Grid(2, 32, dealias_fraction=0.0)

    def test_geometry(self, grid64):
        assert grid64.shape == (64, 64)
        assert grid64.spectral_shape == (64, 33)
        assert grid64.volume == pytest.approx(4 * math.pi ** 2)
        assert grid64.sigma == 2.0
        assert Grid(3, 32).sigma == 2.5

    def test_dealias_cutoff_two_thirds(self, grid64):
        assert grid64.dealias_cutoff == (21, 21)
        # mode 21 survives, 22 is removed
        x = grid64.coordinates()
        keep = np.broadcast_to(np.cos(21 * x[0]), grid64.shape)
        drop = np.broadcast_to(np.cos(22 * x[1]), grid64.shape)
        np.testing.assert_allclose(dealias(grid64, keep + drop), keep, atol=1e-13)

    def test_dict_round_trip(self):
        g = Grid(2, (32, 64), lengths=(1.0, 2.0))
        assert Grid.from_dict(g.to_dict()) == g

    def test_mode_index_conjugate(self, grid32):
        idx, conj = grid32.mode_index((3, -2))
        assert conj
        idx2, conj2 = grid32.mode_index((-3, 2))
        assert idx == idx2 and not conj2


class TestTransforms:
    def test_constant_and_cosine_coefficients(self, grid32):
        x = grid32.coordinates()
        fh = to_spectral(grid32, np.full(grid32.shape, 2.5))
        assert fh[0, 0] == pytest.approx(2.5)
        ch = to_spectral(grid32, np.broadcast_to(np.cos(x[0]), grid32.shape))
        assert ch[1, 0] == pytest.approx(0.5)
        assert ch[-1, 0] == pytest.approx(0.5)

    def test_round_trip_and_parseval(self, grid64, rng):
        f = rng.standard_normal(grid64.shape)
        fh = to_spectral(grid64, f)
        np.testing.assert_allclose(from_spectral(grid64, fh), f, atol=1e-13)
        assert spectral_l2_norm(grid64, fh) == pytest.approx(l2_norm(grid64, f), rel=1e-12)

    def test_shape_mismatch(self, grid32):
        with pytest.raises(Exception):
            to_spectral(grid32, np.zeros((16, 16)))


class TestOperators:
    def test_gradient_exact(self, grid32):
        x, y = grid32.coordinates()
        f = np.sin(3 * x) * np.cos(2 * y)
        g = grad(grid32, f)
        np.testing.assert_allclose(g[0], 3 * np.cos(3 * x) * np.cos(2 * y), atol=1e-12)
        np.testing.assert_allclose(g[1], -2 * np.sin(3 * x) * np.sin(2 * y), atol=1e-12)
        np.testing.assert_allclose(g[2], 0.0, atol=0)

    def test_laplacian_eigenvalue(self, grid32):
        x, y = grid32.coordinates()
        f = np.cos(2 * x) * np.cos(3 * y)
        np.testing.assert_allclose(laplacian(grid32, f), -13 * f, atol=1e-11)

    def test_curl_of_planar_field(self, grid32):
        x, y = grid32.coordinates()
        v = np.zeros((3,) + grid32.shape)
        v[2] = np.sin(x) * np.sin(y)
        c = curl(grid32, v)
        np.testing.assert_allclose(c[0], np.sin(x) * np.cos(y), atol=1e-12)
        np.testing.assert_allclose(c[1], -np.cos(x) * np.sin(y), atol=1e-12)

    def test_vector_identities(self, grid32, rng):
        v = rng.standard_normal((3,) + grid32.shape)
        assert np.max(np.abs(div(grid32, curl(grid32, v)))) < 1e-11
        s = rng.standard_normal(grid32.shape)
        assert np.max(np.abs(curl(grid32, grad(grid32, s)))) < 1e-11

    def test_leray_projection(self, grid32, rng):
        s = rng.standard_normal(grid32.shape)
        gh = to_spectral(grid32, grad(grid32, s))
        assert np.max(np.abs(leray_project_hat(grid32, gh))) < 1e-12
        vh = to_spectral(grid32, rng.standard_normal((3,) + grid32.shape))
        ph = leray_project_hat(grid32, vh)
        assert np.max(np.abs(div(grid32, from_spectral(grid32, ph)))) < 1e-11
        np.testing.assert_allclose(leray_project_hat(grid32, ph), ph, atol=1e-13)


class TestParams:
    def test_defaults(self):
        p = PhysicalParams()
        # P'(1) = p0 * gamma = 1
        assert p.psi_bar == pytest.approx(1.0)
        assert p.dp_bar == pytest.approx(1.0)

    @pytest.mark.parametrize("bad", [{"tau": 0.0}, {"eps": 1.5}, {"lam": -1.0}, {"gamma": 0.5}, {"p0": 0.0}, {"n_bar": -1.0}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            PhysicalParams(**bad)

    def test_dict_round_trip(self):
        p = PhysicalParams(tau=0.25, eps=0.5, lam=0.7, b_bar=(0, 0, 0.5))
        assert PhysicalParams.from_dict(p.to_dict()) == p

    def test_rejects_unknown_keys_and_variable_doping(self):
        with pytest.raises(ConfigError):
            PhysicalParams.from_dict({"temperature": 1.0})
        with pytest.raises(ConfigError):
            PhysicalParams.from_dict({"n_bar": [1.0, 1.0]})


class TestSnapshot:
    def test_round_trip(self, tmp_path, grid32, rng):
        p = PhysicalParams(tau=0.5)
        st = equilibrium(grid32, p)
        st.u = rng.standard_normal(st.u.shape)
        write_state(tmp_path / "a.emlb", grid32, p, 1.25, st)
        g, p2, t, st2 = read_state(tmp_path / "a.emlb")
        assert g == grid32 and p2 == p and t == 1.25
        np.testing.assert_array_equal(st2.u, st.u)
        np.testing.assert_array_equal(st2.n, st.n)

    def test_rejects_bad_magic_and_truncation(self, tmp_path, grid32):
        path = tmp_path / "b.emlb"
        write_snapshot(path, grid32, PhysicalParams(), 0.0, {"n": np.ones(grid32.shape)})
        data = path.read_bytes()
        (tmp_path / "c.emlb").write_bytes(b"XXXX" + data[4:])
        with pytest.raises(ConfigError):
            read_snapshot(tmp_path / "c.emlb")
        (tmp_path / "d.emlb").write_bytes(data[:-8])
        with pytest.raises(ConfigError):
            read_snapshot(tmp_path / "d.emlb")

    def test_missing_state_fields(self, tmp_path, grid32):
        write_snapshot(tmp_path / "e.emlb", grid32, PhysicalParams(), 0.0, {"n": np.ones(grid32.shape)})
        with pytest.raises(ConfigError):
            read_state(tmp_path / "e.emlb")
