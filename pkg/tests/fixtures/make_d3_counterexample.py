"""Regenerate ``d3_counterexample.json``.

Seeded search over pairs of Gram matrices of random unit vectors in C^3:
keep the first pair with entrywise non-increasing moduli whose Hadamard
quotient has a minimum eigenvalue below -1e-3.
"""

import json
from pathlib import Path

import numpy as np

SEED = 20240611
OUT = Path(__file__).with_name("d3_counterexample.json")


def gram(vecs):
    v = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    return v.conj().T @ v


def search(seed=SEED, tries=100_000):
    rng = np.random.default_rng(seed)
    for k in range(tries):
        a, b = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2))
        ps, pt = gram(a), gram(b)
        off = ~np.eye(3, dtype=bool)
        if np.any(np.abs(pt)[off] > np.abs(ps)[off]):
            continue
        q = pt / ps
        lam = np.linalg.eigvalsh(0.5 * (q + q.conj().T))[0]
        if lam < -1e-3:
            return k, ps, pt, lam
    raise RuntimeError("no counterexample found")


def main():
    k, ps, pt, lam = search()
    phis = [np.ones((3, 3)), ps, pt]
    doc = {
        "seed": SEED,
        "draw": k,
        "times": [0.0, 1.0, 2.0],
        "phis": [[[[float(z.real), float(z.imag)] for z in row] for row in p] for p in phis],
        "min_eigenvalue": float(lam),
    }
    OUT.write_text(json.dumps(doc) + "\n")
    print(f"draw {k}: min eigenvalue {lam:.6f}")


if __name__ == "__main__":
    main()
