"""Regenerate crates/core/data/tw1_cdf.txt.

The Tracy-Widom (beta = 1) distribution function is evaluated as the
Fredholm determinant F1(s) = det(I - B_s) on L2(0, inf) with kernel
B_s(x, y) = Ai(x + y + s), discretised with Gauss-Legendre quadrature.
"""
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import airy

X0, STEP, COUNT = -10.0, 0.01, 1601
NODES = 160


def f1(s):
    length = max(12.0, 12.0 - s)
    x, w = leggauss(NODES)
    x = (x + 1.0) * length / 2.0
    w = w * length / 2.0
    sw = np.sqrt(w)
    kernel = airy(x[:, None] + x[None, :] + s)[0]
    return np.linalg.det(np.eye(NODES) - sw[:, None] * kernel * sw[None, :])


def main():
    values = [min(max(f1(X0 + i * STEP), 0.0), 1.0) for i in range(COUNT)]
    for i in range(1, COUNT):
        values[i] = max(values[i], values[i - 1])
    with open("crates/core/data/tw1_cdf.txt", "w") as out:
        out.write(f"# tw1 cdf x0={X0} step={STEP} count={COUNT}\n")
        for v in values:
            out.write(f"{v:.17e}\n")


if __name__ == "__main__":
    main()
