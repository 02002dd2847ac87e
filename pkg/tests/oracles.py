"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.
"""

import mpmath as mp

mp.mp.dps = 50


def poisson_tail_series(mu, n, n_max=200):
    """``Pr{Poisson(3 mu) >= n}`` by explicit summation of terms n..n_max at 50 digits."""
    x = 3 * mp.mpf(mu)
    if x == 0:
        return mp.mpf(0)
    return mp.fsum(mp.e ** (-x) * x**k / mp.factorial(k) for k in range(n, n_max + 1))


def binary_entropy_mp(x):
    x = mp.mpf(x)
    if x == 0:
        return mp.mpf(0)
    if x > mp.mpf("0.5"):
        return mp.mpf(1)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


LAMBDA_MP = 3 + mp.sqrt(5)


def phase_error_bound_mp(Q, e_bit, q1, q2, q3):
    Q, e_bit = mp.mpf(Q), mp.mpf(e_bit)
    return LAMBDA_MP * e_bit + (LAMBDA_MP * mp.sqrt(mp.mpf(q1) * mp.mpf(q3)) + mp.mpf(q2)) / Q


def coherent_key_rate_mp(eta, mu, e_bit):
    """Closed-form pipeline at high precision: Poisson q_n, Q = 2 eta mu e^{-2 eta mu}, f_EC = h(e_bit)."""
    eta, mu = mp.mpf(eta), mp.mpf(mu)
    q = [poisson_tail_series(mu, n) for n in (1, 2, 3)]
    Q = 2 * eta * mu * mp.e ** (-2 * eta * mu)
    e_ph = phase_error_bound_mp(Q, e_bit, *q)
    R = Q * (1 - binary_entropy_mp(e_bit) - binary_entropy_mp(e_ph)) / 3
    return max(R, mp.mpf(0)), e_ph, Q
