"""Regenerate oracles.json: high-precision reference values from mpmath.

Every value is an independent evaluation of a defining integral or series
at 40 significant digits; the test suite reads the frozen file.

    python tests/data/make_oracles.py
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40


def gaussian_integral(q, z):
    f = lambda y: 2 * y ** (2 * q - 2) * mp.exp(-y * y) * mp.cos(2 * z * y)
    return mp.quad(f, [0] + list(range(1, 30)))


def kernel_f(s, theta):
    f = lambda x: 2 / mp.sqrt(2 * mp.pi) * x**-2 * mp.exp(-1 / (2 * x * x) - s * s * x * x) * mp.cos(theta * x)
    top = 12 / s if s else 200
    pts = [mp.mpf(0)] + [mp.mpf(2) ** k for k in range(-4, 12) if 2**k < top] + [top]
    val = mp.quad(f, pts)
    if not s:
        # algebraic oscillatory tail
        val += mp.quadosc(f, [top, mp.inf], omega=theta) if theta else mp.quad(f, [top, mp.inf])
    return val


def kernel_g(s, theta, q):
    f = lambda x: 2 * x ** (2 * q - 2) * mp.exp(-1 / (2 * x * x) - s * s * x * x) * mp.cos(theta * x)
    top = 12 / s
    pts = [mp.mpf(0)] + [mp.mpf(2) ** k for k in range(-4, 12) if 2**k < top] + [top]
    return mp.quad(f, pts)


def thermo(q, w):
    q = mp.mpf(q)
    kern = lambda z: mp.gamma(q - 0.5) * mp.hyp1f1(q - 0.5, 0.5, -z * z) / mp.gamma(q - 1)
    a = lambda z: 4 * z * z * w * w + 2 * (mp.exp(-z * z) + mp.sqrt(mp.pi) * z * mp.erf(z)) ** 2
    f = lambda z: kern(z) * mp.log(a(z))
    pts = sorted({mp.mpf(0), mp.mpf(0.1) / w, mp.mpf(1) / w, mp.mpf(10) / w, 1, 2, 3, 5, 8, 12})
    return -2 / mp.pi * mp.quad(f, pts + [mp.inf])


def main():
    out = {}
    zs = [5 * k / 19 for k in range(20)]
    out["f_q"] = [[q, z, float(gaussian_integral(q, z))] for q in range(2, 7) for z in zs]
    out["kummer"] = [
        [a, 0.5, x, float(mp.hyp1f1(a, 0.5, x))]
        for a in (0.6, 1.5, 1.7, 2.5, 3.3, 5.5)
        for x in (-400.0, -250.0, -120.0, -30.0, -5.0, -0.3, 0.0, 0.7, 12.0)
    ]
    out["f_kernel"] = [
        [s, th, float(kernel_f(s, th))]
        for s in (0.0, 0.05, 0.3, 1.0, 2.5)
        for th in (0.0, 0.4, 1.3, 5.0)
    ]
    out["g_kernel"] = [
        [s, th, q, float(kernel_g(s, th, q))]
        for s in (0.05, 0.3, 1.0, 2.5)
        for th in (0.0, 1.3, 5.0)
        for q in (2, 3, 2.5)
    ]
    out["thermo"] = [
        [q, w, float(thermo(q, w))]
        for q, w in ((2, 3.0), (3, 3.0), (4, 3.0), (2, 0.01), (2, 10.0), (2.5, 3.0), (1.2, 3.0))
    ]
    out["erf"] = [[x, float(mp.erf(x))] for x in (0.0, 0.1, 1.0, 2.5, 4.0, 6.0)]
    path = Path(__file__).with_name("oracles.json")
    path.write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
