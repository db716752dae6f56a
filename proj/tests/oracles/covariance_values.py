"""High-precision reference values for Bessel-based correlation functions.
Values printed here are frozen into tests/test_covmodels.cpp.
"""
import mpmath as mp
mp.mp.dps = 40

def matern_c1(nu, phi, r):
    if r == 0:
        return mp.mpf(1)
    z = mp.sqrt(2 * nu) * r / phi
    return 2 ** (1 - nu) / mp.gamma(nu) * z ** nu * mp.besselk(nu, z)

def matern_c2(nu, phi, s):
    return matern_c1(nu, phi, mp.sqrt(s))

def rwm_c1(d, phi, r):
    if r == 0:
        return mp.mpf(1)
    z = mp.sqrt(d) * r / phi
    mu = mp.mpf(d) / 2 - 1
    return 2 ** mu * mp.gamma(mp.mpf(d) / 2) * z ** (-mu) * mp.besselj(mu, z)

def rwm_c2(d, phi, s):
    return rwm_c1(d, phi, mp.sqrt(s))

print("besselk")
for nu, x in [(0.5, 0.1), (2.5, 1.0), (3.0, 2.25), (1.5, 17.0), (0.25, 30.0), (4.5, 0.01), (0.0, 3.0)]:
    print(nu, x, mp.nstr(mp.besselk(nu, x), 20))
print("besselj")
for nu, x in [(0.0, 1.0), (1.0, 2.5), (2.0, 14.0), (3.5, 20.0), (0.5, 0.3)]:
    print(nu, x, mp.nstr(mp.besselj(nu, x), 20))
print("matern c1")
for nu, phi, r in [(2.5, 1.0, 1.0), (3.5, 0.7, 0.2), (3.0, 2.0, 5.0), (10.0, 1.0, 1.3)]:
    print(nu, phi, r, mp.nstr(matern_c1(nu, phi, r), 20))
print("matern c2 derivs (nu, phi, p, s)")
for nu, phi, p, s in [(3.0, 1.0, 2, 0.25), (3.5, 0.8, 3, 0.1), (4.5, 1.0, 4, 2.0), (2.5, 1.0, 1, 0.5)]:
    print(nu, phi, p, s, mp.nstr(mp.diff(lambda u: matern_c2(nu, phi, u), s, p), 20))
print("rwm c1 (d, phi, r)")
for d, phi, r in [(2, 1.0, 1.0), (3, 1.0, 2.0), (4, 0.5, 0.7)]:
    print(d, phi, r, mp.nstr(rwm_c1(d, phi, r), 20))
print("rwm c2 derivs (d, phi, p, s)")
for d, phi, p, s in [(2, 1.0, 1, 0.5), (3, 1.0, 2, 1.5), (2, 1.0, 3, 4.0), (1, 1.0, 2, 2.0), (4, 1.0, 4, 0.3)]:
    print(d, phi, p, s, mp.nstr(mp.diff(lambda u: rwm_c2(d, phi, u), s, p), 20))
