import mpmath as mp
import pytest

from dyadic_cascade import dissipation_time_bound
from dyadic_cascade.errors import DomainError


def oracle(epsilon, eta, delta):
    """Independent high-precision evaluation of
    2 sqrt(2) eta^{3/2} eps^{-2} (1 - 2^{-delta/3})^{-3}."""
    with mp.workdps(60):
        q = mp.mpf(2) ** (-mp.mpf(delta) / 3)
        val = 2 * mp.sqrt(2) * mp.mpf(eta) ** mp.mpf("1.5") \
            / (mp.mpf(epsilon) ** 2 * (1 - q) ** 3)
        return float(val)


def test_reference_value():
    t = dissipation_time_bound(1.0, 1.0, alpha=2.0, alpha_tilde=1.0)
    assert t == pytest.approx(oracle(1, 1, 1), rel=1e-14)
    assert abs(t - 322.1) < 0.5


def test_monotone_in_eta():
    ts = [dissipation_time_bound(1.0, eta, 2.0, 1.0)
          for eta in (1e-6, 1e-3, 0.1, 1.0, 10.0)]
    assert all(a < b for a, b in zip(ts, ts[1:]))
    assert ts[0] < 1e-6  # eta -> 0 drives T -> 0


def test_epsilon_scaling():
    t1 = dissipation_time_bound(1.0, 1.0, 2.5, 1.5)
    t2 = dissipation_time_bound(2.0, 1.0, 2.5, 1.5)
    assert t2 == pytest.approx(t1 / 4.0, rel=1e-14)


def test_domain():
    with pytest.raises(DomainError):
        dissipation_time_bound(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        dissipation_time_bound(1.0, 1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        dissipation_time_bound(0.0, 1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        dissipation_time_bound(1.0, -1.0, 2.0, 1.0)


@pytest.mark.parametrize("eps,eta,delta", [(0.5, 2.0, 1.0), (1.0, 1.0, 3.0),
                                           (0.1, 0.3, 0.5)])
def test_matches_oracle(eps, eta, delta):
    t = dissipation_time_bound(eps, eta, alpha=1.0 + delta, alpha_tilde=1.0)
    assert t == pytest.approx(oracle(eps, eta, delta), rel=1e-13)
