import math

import numpy as np
import pytest
from scipy.integrate import quad

from emlb.errors import ConfigError, InputError
from emlb.fields import Grid, from_spectral, to_spectral
from emlb.littlewood_paley import (
    BesovSpec,
    CheminLernerSpec,
    FilterBank,
    bernstein_verify,
    besov_norm,
    block_norms,
    chemin_lerner_norm,
    chi,
    commutator_constant,
    decompose,
    norm_report,
    parse_exponent,
    phi,
    product_constant,
    time_lebesgue_besov_norm,
)


def quad_chi(r):
    """Independent evaluation of the low-pass symbol by adaptive quadrature."""
    bump = lambda x: math.exp(-1.0 / (1.0 - x * x)) if abs(x) < 1 else 0.0
    t = 2.0 * (r - 0.75) / (4.0 / 3.0 - 0.75) - 1.0
    if t <= -1:
        return 1.0
    if t >= 1:
        return 0.0
    mass = quad(bump, -1, 1, epsabs=1e-15)[0]
    return 1.0 - quad(bump, -1, t, epsabs=1e-15)[0] / mass


def cosine(grid, k):
    x = grid.coordinates()
    arg = sum(ki * xi for ki, xi in zip(k, x))
    return np.broadcast_to(np.cos(arg), grid.shape).copy()


class TestSymbols:
    @pytest.mark.parametrize("r", [0.0, 0.5, 0.75, 0.8, 1.0, 1.1, 1.3, 4.0 / 3.0, 2.0])
    def test_chi_matches_quadrature(self, r):
        assert float(chi(r)) == pytest.approx(quad_chi(r), abs=1e-12)

    def test_supports(self):
        r = np.linspace(0, 6, 2001)
        assert np.all(chi(r[r <= 0.75]) == 1.0)
        assert np.all(chi(r[r >= 4.0 / 3.0]) == 0.0)
        ph = phi(r)
        assert np.all(ph[(r <= 0.75) | (r >= 8.0 / 3.0)] == 0.0)
        assert np.all((ph >= 0) & (ph <= 1))

    def test_chi_monotone(self):
        vals = chi(np.linspace(0.7, 1.4, 500))
        assert np.all(np.diff(vals) <= 1e-15)


class TestFilterBank:
    def test_partition_of_unity(self):
        bank = FilterBank(Grid(2, 64))
        assert bank.partition_residual() <= 1e-12

    def test_block_count(self):
        # corner |k| = 32*sqrt(2); q_max = floor(log2(4/3 * 45.25))
        bank = FilterBank(Grid(2, 64))
        assert bank.q_max == int(math.floor(math.log2(4 / 3 * 32 * math.sqrt(2))))
        np.testing.assert_array_equal(bank.qs, np.arange(-1, bank.q_max + 1))

    def test_symbol_out_of_range(self, grid32):
        bank = FilterBank(grid32)
        with pytest.raises(ConfigError):
            bank.symbol(bank.q_max + 1)

    def test_reconstruction(self, grid64, rng):
        bank = FilterBank(grid64)
        f = rng.standard_normal(grid64.shape)
        dec = decompose(f, bank)
        assert len(dec.blocks) == bank.q_max + 2
        np.testing.assert_allclose(dec.reconstruct(), f, atol=1e-12)


class TestBesov:
    def test_single_mode_closed_form(self, grid64):
        # cos(5x) splits between blocks 1 and 2 with weights chi(5/4) and 1 - chi(5/4)
        bank = FilterBank(grid64)
        f = cosine(grid64, (5, 0))
        l2 = math.pi * math.sqrt(2.0)
        c = quad_chi(1.25)
        for s in (0.0, 1.5, 2.0):
            expected = l2 * (2 ** s * c + 4 ** s * (1 - c))
            assert besov_norm(f, BesovSpec(s), bank) == pytest.approx(expected, rel=1e-11)
        expected_inf = l2 * max(2 * c, 4 * (1 - c))
        assert besov_norm(f, BesovSpec(1.0, 2, math.inf), bank) == pytest.approx(expected_inf, rel=1e-11)

    def test_low_block_of_constant(self, grid32):
        bank = FilterBank(grid32)
        f = np.full(grid32.shape, 3.0)
        blocks = block_norms(f, bank)
        assert blocks[0] == pytest.approx(3.0 * 2 * math.pi)
        assert np.all(blocks[1:] < 1e-13)

    def test_linf_block_norm(self, grid32):
        bank = FilterBank(grid32)
        f = cosine(grid32, (4, 0))
        # |k| = 4 sits at 2^2 where the annulus symbol of block 2 is phi(1) = 1 - chi(1)
        c = quad_chi(1.0)
        blocks = block_norms(f, bank, p=math.inf)
        assert blocks[3] == pytest.approx(1 - c, rel=1e-10)
        assert blocks[2] == pytest.approx(c, rel=1e-10)

    def test_tuple_norm_is_sum(self, grid32, rng):
        bank = FilterBank(grid32)
        a, b = rng.standard_normal(grid32.shape), rng.standard_normal(grid32.shape)
        spec = BesovSpec(1.0)
        assert besov_norm((a, b), spec, bank) == pytest.approx(besov_norm(a, spec, bank) + besov_norm(b, spec, bank))

    def test_norm_report(self, grid32):
        bank = FilterBank(grid32)
        rep = norm_report(cosine(grid32, (2, 1)), BesovSpec(2.0, 2, math.inf), bank)
        assert rep["spec"]["r"] == "inf"
        assert rep["value"] == pytest.approx(max(v for _, v in rep["per_block"]))

    def test_invalid_exponents(self):
        with pytest.raises(ConfigError):
            BesovSpec(1.0, p=0.5)
        with pytest.raises(ConfigError):
            CheminLernerSpec(0.5, BesovSpec(1.0))
        assert parse_exponent("inf") == math.inf
        assert parse_exponent("2") == 2.0


class TestBernstein:
    @pytest.mark.parametrize("q", [0, 1, 2, 3])
    def test_single_mode_exact(self, grid64, q):
        r = bernstein_verify(cosine(grid64, (2 ** q, 0)), q, FilterBank(grid64))
        assert r["ratio"] == pytest.approx(1.0, abs=1e-12)

    def test_random_bracket(self, grid64, rng):
        bank = FilterBank(grid64)
        for q in range(bank.q_max + 1):
            f = rng.standard_normal(grid64.shape)
            ratio = bernstein_verify(f, q, bank)["ratio"]
            assert 0.75 <= ratio <= 8.0 / 3.0

    def test_empty_block(self, grid32):
        bank = FilterBank(grid32)
        with pytest.raises(InputError):
            bernstein_verify(np.ones(grid32.shape), 2, bank)
        with pytest.raises(ConfigError):
            bernstein_verify(np.ones(grid32.shape), -1, bank)


class TestCheminLerner:
    def setup_method(self):
        self.grid = Grid(2, 32)
        self.bank = FilterBank(self.grid)

    def series(self, rng, n=11):
        times = np.linspace(0.0, 1.0, n)
        a, b = cosine(self.grid, (1, 0)), cosine(self.grid, (0, 6))
        ca, cb = rng.standard_normal(n), rng.standard_normal(n)
        return times, [x * a + y * b for x, y in zip(ca, cb)], ca, cb

    def test_sup_norm_closed_form(self, rng):
        # blocks are disjoint here apart from the split of |k| = 6 between q=1 and q=2
        times, samples, ca, cb = self.series(rng)
        l2 = math.pi * math.sqrt(2.0)
        c1, c6 = quad_chi(1.0), quad_chi(1.5)
        spec = CheminLernerSpec(math.inf, BesovSpec(1.0))
        expected = l2 * np.max(np.abs(ca)) * (0.5 * c1 + 1 * (1 - c1))
        expected += l2 * np.max(np.abs(cb)) * (2 * c6 + 4 * (1 - c6))
        assert chemin_lerner_norm((times, samples), spec, self.bank) == pytest.approx(expected, rel=1e-10)

    def test_minkowski_ordering(self, rng):
        times, samples, _, _ = self.series(rng)
        # r <= rho: L^rho(B) <= L~^rho(B); r >= rho: the reverse
        for rho, r in ((2.0, 1.0), (math.inf, 1.0), (3.0, 2.0)):
            spec = CheminLernerSpec(rho, BesovSpec(1.0, 2, r))
            plain = time_lebesgue_besov_norm((times, samples), spec, self.bank)
            assert plain <= chemin_lerner_norm((times, samples), spec, self.bank) + 1e-12
        for rho, r in ((1.0, 2.0), (2.0, math.inf)):
            spec = CheminLernerSpec(rho, BesovSpec(1.0, 2, r))
            plain = time_lebesgue_besov_norm((times, samples), spec, self.bank)
            assert chemin_lerner_norm((times, samples), spec, self.bank) <= plain + 1e-12

    def test_equal_exponents_coincide(self, rng):
        times, samples, _, _ = self.series(rng)
        spec = CheminLernerSpec(2.0, BesovSpec(0.5, 2, 2.0))
        assert chemin_lerner_norm((times, samples), spec, self.bank) == pytest.approx(
            time_lebesgue_besov_norm((times, samples), spec, self.bank), rel=1e-12
        )

    def test_time_validation(self, rng):
        times, samples, _, _ = self.series(rng)
        spec = CheminLernerSpec(2.0, BesovSpec(1.0))
        with pytest.raises(InputError):
            chemin_lerner_norm((times[::-1], samples), spec, self.bank)
        with pytest.raises(InputError):
            chemin_lerner_norm((times[:1], samples[:1]), spec, self.bank)
        with pytest.raises(InputError):
            chemin_lerner_norm((times, samples), CheminLernerSpec(2.0, BesovSpec(1.0), t_final=2.0), self.bank)

    def test_truncation_at_t_final(self, rng):
        times, samples, _, _ = self.series(rng)
        spec = CheminLernerSpec(2.0, BesovSpec(1.0), t_final=0.5)
        full = CheminLernerSpec(2.0, BesovSpec(1.0))
        assert chemin_lerner_norm((times, samples), spec, self.bank) == pytest.approx(
            chemin_lerner_norm((times[:6], samples[:6]), full, self.bank)
        )


class TestEstimates:
    def test_commutator_constant_bounded(self, grid32, rng):
        bank = FilterBank(grid32)
        band = grid32.dealias_mask
        u = from_spectral(grid32, np.where(band, to_spectral(grid32, rng.standard_normal((3,) + grid32.shape)), 0))
        u[2] = 0.0
        f = from_spectral(grid32, np.where(band, to_spectral(grid32, rng.standard_normal(grid32.shape)), 0))
        c = commutator_constant(u, f, bank)
        assert np.isfinite(c) and 0 < c < 10

    def test_commutator_vanishes_for_constant_velocity(self, grid32, rng):
        bank = FilterBank(grid32)
        u = np.zeros((3,) + grid32.shape)
        u[0] = 1.0
        f = cosine(grid32, (3, 2))
        assert commutator_constant(u, f, bank) < 1e-12

    def test_product_constant(self, grid32):
        bank = FilterBank(grid32)
        times = np.linspace(0, 1, 5)
        f = [cosine(grid32, (1, 0)) * (1 + t) for t in times]
        g = [cosine(grid32, (0, 2)) for _ in times]
        c = product_constant(times, f, g, bank)
        assert np.isfinite(c) and c > 0
