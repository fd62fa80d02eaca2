"""Ewald lattice sums against mpmath zeta-function oracles."""

import itertools

import mpmath as mp
import numpy as np
import pytest

from fracgrad.lattice import epstein_zeta, shifted_odd_sum, shifted_power_sum, upper_gamma


@pytest.mark.parametrize("a", [2.5, 0.5, 0.0, -0.3, -1.7])
@pytest.mark.parametrize("x", [0.1, 1.0, 7.5])
def test_upper_gamma_any_sign(a, x):
    assert upper_gamma(a, x) == pytest.approx(float(mp.gammainc(a, x, mp.inf)), rel=1e-12)


@pytest.mark.parametrize("sigma", [-0.35, -0.1, 0.2, 0.75, 1.3, 2.0])
def test_epstein_one_dimensional(sigma):
    assert epstein_zeta(1, sigma) == pytest.approx(float(2 * mp.zeta(2 * sigma)), rel=1e-12)


@pytest.mark.parametrize("sigma", [-0.4, 0.3, 0.7, 1.5, 2.2])
def test_epstein_square_lattice(sigma):
    # sum over Z^2 \ 0 of |m|^{-2 sigma} = 4 zeta(sigma) beta(sigma)
    beta = mp.dirichlet(sigma, [0, 1, 0, -1])
    assert epstein_zeta(2, sigma) == pytest.approx(float(4 * mp.zeta(sigma) * beta), rel=1e-11)


def test_epstein_special_points():
    assert epstein_zeta(2, 0.0) == -1.0
    with pytest.raises(ValueError):
        epstein_zeta(2, 1.0)


@pytest.mark.parametrize("sigma", [0.3, 0.75, 1.4])
@pytest.mark.parametrize("a", [0.1, 0.37, 0.5])
def test_shifted_sum_hurwitz(sigma, a):
    exact = mp.zeta(2 * sigma, a) + mp.zeta(2 * sigma, 1 - a)
    assert shifted_power_sum(sigma, [[a]])[0] == pytest.approx(float(exact), rel=1e-11)


@pytest.mark.parametrize("tau", [0.4, 1.3])
@pytest.mark.parametrize("a", [0.1, 0.3])
def test_shifted_odd_sum_hurwitz(tau, a):
    # sum_m (m+a)|m+a|^{-2 tau - 2} = zeta(2 tau + 1, a) - zeta(2 tau + 1, 1 - a)
    exact = mp.zeta(2 * tau + 1, a) - mp.zeta(2 * tau + 1, 1 - a)
    assert shifted_odd_sum(tau, [[a]])[0, 0] == pytest.approx(float(exact), rel=1e-11)


def test_odd_sum_vanishes_on_half_period():
    out = shifted_odd_sum(0.8, [[0.5, 0.2]])
    assert out[0, 0] == 0.0 and out[0, 1] != 0.0


def test_two_dimensional_brute_force():
    # sigma large enough that a direct sum converges quickly
    sigma, a = 2.5, np.array([0.23, 0.41])
    direct = mp.fsum(
        mp.mpf(float(np.sum((np.array(m) + a) ** 2))) ** (-sigma)
        for m in itertools.product(range(-60, 61), repeat=2)
    )
    assert shifted_power_sum(sigma, [a])[0] == pytest.approx(float(direct), rel=1e-6)
