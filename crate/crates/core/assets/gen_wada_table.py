#!/usr/bin/env python3
"""Regenerates wada_snr_table.txt.

Each row holds G(snr) = ln E|z| - E ln|z| for z = x + n, where |x| follows a
Gamma(0.4, 1) law with a random sign and n is zero-mean Gaussian noise whose
variance sets the given SNR. Integrals are evaluated with adaptive quadrature.

Usage: python3 gen_wada_table.py > wada_snr_table.txt
"""
import numpy as np
from scipy import integrate, special, stats

SHAPE = 0.4
phi = stats.norm.pdf


def mean_log_abs_normal(u):
    """E ln|N(u, 1)|."""
    pos = integrate.quad(lambda z: phi(z - u), 0, u + 12, weight="alg-loga", wvar=(0, 0), limit=200)[0]
    neg = 0.0
    if u < 12:
        neg = integrate.quad(lambda y: phi(-y - u), 0, 12 - u, weight="alg-loga", wvar=(0, 0), limit=200)[0]
    return pos + neg


def mean_abs_normal(u):
    """E|N(u, 1)|."""
    return np.sqrt(2 / np.pi) * np.exp(-u * u / 2) + u * special.erf(u / np.sqrt(2))


def gain(snr_db):
    a = SHAPE
    s = np.sqrt(a * (a + 1) / 10 ** (snr_db / 10))
    upper = 40.0
    c = s**a / special.gamma(a)
    m_abs = a + c * s * integrate.quad(
        lambda u: (mean_abs_normal(u) - u) * np.exp(-s * u), 0, upper, weight="alg", wvar=(a - 1, 0), limit=400
    )[0]
    i1 = integrate.quad(lambda u: mean_log_abs_normal(u) * np.exp(-s * u), 0, upper, weight="alg", wvar=(a - 1, 0), limit=400)[0]
    i2 = integrate.quad(lambda u: np.exp(-s * u), 0, upper, weight="alg-loga", wvar=(a - 1, 0), limit=400)[0]
    tail = integrate.quad(lambda g: -s * s / (2 * g * g) * stats.gamma.pdf(g, a), upper * s, np.inf, limit=400)[0]
    m_log = special.digamma(a) + c * (i1 - i2) + tail
    return np.log(m_abs) - m_log


def main():
    print("# WADA-SNR gain table v1: gain<TAB>snr_db, Gamma(0.4) speech amplitude in Gaussian noise")
    for db in range(-20, 101):
        print(f"{gain(db):.8f}\t{db}")


if __name__ == "__main__":
    main()
