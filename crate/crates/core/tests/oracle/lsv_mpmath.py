"""Arbitrary-precision reference values for the LSV map tests.

Run with `python3 lsv_mpmath.py`; the printed digits are frozen into
tests/maps_oracle.rs.
"""
from mpmath import mp, mpf, findroot

mp.dps = 50


def lsv(alpha, x):
    if x < mpf(1) / 2:
        return x * (1 + mpf(2) ** alpha * x ** alpha)
    return 2 * x - 1


def dlsv(alpha, x):
    if x < mpf(1) / 2:
        return 1 + mpf(2) ** alpha * (1 + alpha) * x ** alpha
    return mpf(2)


a = mpf(1) / 7
x0 = mpf(1) / 4
x1 = lsv(a, x0)
x2 = lsv(a, x1)
print("apply(1/7, 0.25)      =", mp.nstr(x1, 30))
print("derivative(1/7, 0.25) =", mp.nstr(dlsv(a, x0), 30))
print("orbit[2]              =", mp.nstr(x2, 30))
y = mpf("0.47643")
root = findroot(lambda t: t * (1 + mpf(2) ** a * t ** a) - y, mpf("0.25"))
print("left_inverse(1/7, 0.47643) =", mp.nstr(root, 30))
# uniform-density closed forms for the n = 1 recurrence set, alpha = 0.1
b = mpf(1) / 10
for k in (4, 8, 14):
    eps = mpf(2) ** (-k)
    print("left_part(0.1, 2^-%d) =" % k, mp.nstr((eps / mpf(2) ** b) ** (1 / (1 + b)), 30))
# cone lower constant c for a = 20
for al in (mpf(1) / 10, mpf(1) / 7):
    c = min(mpf(20), (al * (1 + al) / mpf(20) ** al) ** (1 / (1 - al)))
    print("c_lower(a=20, alpha=%s) =" % mp.nstr(al, 6), mp.nstr(c, 30))


def left_inv(alpha, y):
    return findroot(lambda t: t * (1 + mpf(2) ** alpha * t ** alpha) - y, y / 2)


def preimage_mass(alphas, lo, hi):
    """Lebesgue measure of (T_n o ... o T_1)^-1 [lo, hi] via inverse branches."""
    intervals = [(lo, hi)]
    for al in reversed(alphas):
        nxt = []
        for (u, v) in intervals:
            nxt.append((left_inv(al, u), left_inv(al, v)))
            nxt.append(((u + 1) / 2, (v + 1) / 2))
        intervals = nxt
    return sum(v - u for (u, v) in intervals)


b = mpf(1) / 10
print("P1 mass [0.3, 0.3+1/64]  =", mp.nstr(preimage_mass([b], mpf("0.3"), mpf("0.3") + mpf(1) / 64), 30))
print("P1 mass [0, 1e-6]         =", mp.nstr(preimage_mass([b], mpf(0), mpf("1e-6")), 30))
print("P2 mass [0.3, 0.3+1/64]  =", mp.nstr(preimage_mass([b, b], mpf("0.3"), mpf("0.3") + mpf(1) / 64), 30))
print("P2 mass (0.05, 0.12) [0.7, 0.75] =",
      mp.nstr(preimage_mass([mpf("0.05"), mpf("0.12")], mpf("0.7"), mpf("0.75")), 30))
