#!/usr/bin/env python3
"""Regenerates tests/data/*_ref.txt.

Independent reference values for the two-scale coefficient banks, computed
with mpmath's arbitrary-precision polynomial rootfinder rather than the
library's own certified Newton boxes. Values carry ~50 correct digits; the
stated radius of 1e-40 is far above the expected error of either path.
"""

import math
import os

from mpmath import mp, mpf, mpc, polyroots, sqrt, nstr

mp.dps = 90

OUT = os.path.join(os.path.dirname(__file__), "..", "..", "tests", "data")


def y_roots(N):
    if N == 1:
        return []
    coeffs = [mpf(math.comb(N - 1 + k, k)) for k in range(N)]  # ascending
    return polyroots(list(reversed(coeffs)), maxsteps=200, extraprec=200)


def inside_z(y):
    s = 1 - 2 * mpc(y)
    d = sqrt(s * s - 1)
    z1, z2 = s - d, s + d
    return z1 if abs(z1) <= abs(z2) else z2


def reps_of(N):
    reals, pairs = [], []
    for y in y_roots(N):
        if abs(y.imag) < mpf("1e-30"):
            z = inside_z(y.real)
            reals.append(z.real)
        elif y.imag > 0:
            z = inside_z(y)
            pairs.append(z if z.imag > 0 else z.conjugate())
    assert len(reals) + 2 * len(pairs) == N - 1
    return reals, pairs


def phase_objective(reals, pairs, mask):
    # double precision is plenty to separate the flip candidates
    b = [1.0 + 0.0j]
    slots = [("r", complex(r)) for r in reals] + [("c", complex(z)) for z in pairs]
    for i, (kind, z) in enumerate(slots):
        if (mask >> i) & 1:
            z = 1.0 / z
        if kind == "r":
            f = [1.0, -z.real]
        else:
            f = [1.0, -2.0 * z.real, abs(z) ** 2]
        b = [
            sum(b[i] * f[j - i] for i in range(len(b)) if 0 <= j - i < len(f))
            for j in range(len(b) + len(f) - 1)
        ]
    grid = 400
    prev = sum(b)
    acc = 0.0
    theta = [0.0]
    for t in range(1, grid + 1):
        w = math.pi * t / grid
        v = 0.0j
        for c in reversed(b):
            v = v * complex(math.cos(w), math.sin(w)) + c
        acc += math.atan2((v / prev).imag, (v / prev).real)
        theta.append(acc)
        prev = v
    slope = theta[grid] / math.pi
    return sum((th - slope * math.pi * t / grid) ** 2 for t, th in enumerate(theta))


def assemble(N, reals, pairs, mask):
    roots = []
    slots = [("r", r) for r in reals] + [("c", z) for z in pairs]
    for i, (kind, z) in enumerate(slots):
        if (mask >> i) & 1:
            z = 1 / z
        if kind == "r":
            roots.append(mpc(z))
        else:
            roots.append(z)
            roots.append(z.conjugate())
    b = [mpc(1)]
    for r in roots:
        b = [
            (b[j] if j < len(b) else mpc(0)) - (r * b[j - 1] if j >= 1 else mpc(0))
            for j in range(len(b) + 1)
        ]
    binp = [mpf(math.comb(N, k)) / 2**N for k in range(N + 1)]
    numer = [
        sum(binp[i] * b[j - i] for i in range(len(binp)) if 0 <= j - i < len(b))
        for j in range(len(binp) + len(b) - 1)
    ]
    b1 = sum(b)
    u = [2 * c / b1 for c in numer]
    for c in u:
        assert abs(c.imag) < mpf("1e-50")
    return [c.real for c in u]


def bank(family, N):
    reals, pairs = reps_of(N)
    mask = 0
    if family == "symlet":
        best = None
        for m in range(1 << (len(reals) + len(pairs))):
            obj = phase_objective(reals, pairs, m)
            if best is None or obj < best - 1e-9 * (1 + abs(best)):
                best, mask = obj, m
    u = assemble(N, reals, pairs, mask)
    if family == "symlet":
        amax = max(range(len(u)), key=lambda k: abs(u[k]))
        if amax < N:
            u = list(reversed(u))
    even, odd = sum(u[0::2]), sum(u[1::2])
    assert abs(even - 1) < mpf("1e-50") and abs(odd - 1) < mpf("1e-50")
    for i in range(N):
        mom = sum((-1) ** k * mpf(k) ** i * u[k] for k in range(len(u)))
        scale = max(mpf(1), mpf(2 * N) ** i)
        assert abs(mom) < mpf("1e-45") * scale, (family, N, i, mom)
    return u


def write(family, N):
    u = bank(family, N)
    short = ("db" if family == "daubechies" else "sym") + str(N)
    path = os.path.join(OUT, short + "_ref.txt")
    with open(path, "w") as f:
        f.write(f"# family={family} N={N} K={N}\n")
        f.write("# reference values, independent multiprecision rootfinder\n")
        for c in u:
            f.write(nstr(c, 45) + " 1e-40\n")
    print("wrote", path)


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    for n in (1, 2, 3, 4, 6, 8, 10, 20):
        write("daubechies", n)
    for n in (4, 6, 8, 10, 20):
        write("symlet", n)
