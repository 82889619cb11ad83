#!/usr/bin/env python3
"""Generate the layered code fixtures under data/codes/.

perfect4x4.json
    4x4 perfect code over Q(i, theta), theta = 2cos(2pi/15), with the
    principal ideal (alpha), alpha = (1 - 3i) + i theta^2, the Z-basis
    {1, theta, theta^3 - 3 theta, 1 + 3 theta - theta^2 - theta^3} of that
    ideal (orthonormal under the trace form scaled by 1/15) and gamma = i.
    The basis is re-derived below by a short-vector search so that the file
    can be regenerated without trusting a transcription.

golden2x2.json
    The 2x2 Golden code, theta = (1 + sqrt5)/2, alpha = 1 + i - i theta,
    written out from the same formula the library hard-codes.

cyclic5x5.json
    Synthetic 5x5 layered code (unitary DFT generator, gamma = i). Used only
    for layer-mask and loader tests; it is not a perfect code.

Layer p (p = 0..m-1) occupies the positions of B^p, i.e. (r, (r - p) mod m),
and its symbols are ordered by row.
"""
import itertools
import json
import math
import pathlib

import numpy as np


def trace_gram(weight, conj, basis_pows):
    n = len(basis_pows)
    gram = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            gram[k, l] = sum(weight(t) * t ** (basis_pows[k] + basis_pows[l]) for t in conj)
    return gram


def perfect4x4():
    conj = [2 * math.cos(2 * math.pi * k / 15) for k in (1, 2, 4, 7)]
    alpha = lambda t: complex(1, -3) + 1j * t * t
    gram = trace_gram(lambda t: abs(alpha(t)) ** 2, conj, [0, 1, 2, 3])
    unit = np.round(gram / 15).astype(int)
    assert np.allclose(gram, 15 * unit)
    # orthonormal basis: coefficient vectors (in powers of theta) of norm 1
    shorts = [np.array(v) for v in itertools.product(range(-4, 5), repeat=4) if np.array(v) @ unit @ np.array(v) == 1]
    expected = [(1, 0, 0, 0), (0, 1, 0, 0), (0, -3, 0, 1), (1, 3, -1, -1)]
    for e in expected:
        assert any((v == np.array(e)).all() for v in shorts), e
    basis = [np.array(e) for e in expected]
    b = np.array(basis)
    assert (b @ unit @ b.T == np.eye(4, dtype=int)).all()

    def nu(coeffs, t):
        return sum(c * t ** p for p, c in enumerate(coeffs))

    rot = np.array([[alpha(t) * nu(v, t) for v in basis] for t in conj]) / math.sqrt(15)
    assert np.allclose(rot.conj().T @ rot, np.eye(4), atol=1e-12)
    return rot, 1j


def golden2x2():
    s5 = math.sqrt(5)
    th, th_c = (1 + s5) / 2, (1 - s5) / 2
    a, a_c = 1 + 1j - 1j * th, 1 + 1j - 1j * th_c
    g1 = np.array([[a, a * th], [a_c, a_c * th_c]]) / s5
    g2 = np.array([[a, a * th], [1j * a_c, 1j * a_c * th_c]]) / s5
    return [g1, g2]


def cyclic5x5():
    m = 5
    w = np.exp(-2j * math.pi / m)
    rot = np.array([[w ** (r * c) for c in range(m)] for r in range(m)]) / math.sqrt(m)
    return rot, 1j


def layered(rot, gamma):
    m = rot.shape[0]
    layers = []
    for p in range(m):
        k = (-p) % m
        scale = np.array([gamma if r + k >= m else 1 for r in range(m)])
        g = scale[:, None] * rot
        layers.append({"shift": p, "G": [[[float(z.real), float(z.imag)] for z in row] for row in g]})
    return layers


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "codes"
    out.mkdir(parents=True, exist_ok=True)
    for name, (rot, gamma) in {"perfect4x4": perfect4x4(), "cyclic5x5": cyclic5x5()}.items():
        m = rot.shape[0]
        doc = {"name": name, "m": m, "l": m, "layers": layered(rot, gamma)}
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
    gens = golden2x2()
    doc = {"name": "golden", "m": 2, "l": 2,
           "layers": [{"shift": p, "G": [[[float(z.real), float(z.imag)] for z in row] for row in g]} for p, g in enumerate(gens)]}
    (out / "golden2x2.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
