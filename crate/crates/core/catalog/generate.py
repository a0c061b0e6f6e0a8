"""Regenerates the catalog model documents.

Each non-scalar entry is a gauge transform Psi = G(x, lam) Psi_t of a simple
pair (P_t, Q_t) with diagonal or scalar x-dependence.  With
G = S(x) (I + lam N(u)), S unipotent and N nilpotent, G^-1 is polynomial, so
P = G_x G^-1 + G P_t G^-1 and Q = G_lam G^-1 + G Q_t G^-1 are polynomial in
the state and compatible for any vector field.

Run: python3 generate.py  (writes *.json next to this file)
"""
import json
import os

import sympy as sp

lam, x = sp.symbols("lam x")
u, s = sp.symbols("u s")


def to_text(e):
    e = sp.nsimplify(sp.expand(e))
    return str(e).replace("**", "^")


def coeffs_of(mat, lo, hi):
    # mat is a Laurent polynomial in lam; multiply through by lam^-lo.
    shifted = (mat * lam ** (-lo)).applyfunc(sp.expand)
    out = {}
    for k in range(lo, hi + 1):
        out[k] = shifted.applyfunc(lambda e: sp.expand(e).coeff(lam, k - lo))
    return out


def gauge_pair(q_tilde, p_tilde, field):
    S = sp.Matrix([[1, s], [0, 1]])
    Sinv = sp.Matrix([[1, -s], [0, 1]])
    N = sp.Matrix([[-u, 1], [-u**2, u]])
    G = S * (sp.eye(2) + lam * N)
    Ginv = (sp.eye(2) - lam * N) * Sinv
    assert sp.simplify(G * Ginv - sp.eye(2)) == sp.zeros(2)

    def dx(mat):
        return mat.applyfunc(
            lambda e: sp.diff(e, u) * field[0] + sp.diff(e, s) * field[1] + sp.diff(e, x)
        )

    P = (dx(G) * Ginv + G * p_tilde * Ginv).applyfunc(sp.expand)
    Q = (G.diff(lam) * Ginv + G * q_tilde * Ginv).applyfunc(sp.expand)
    return P, Q


def check_compatibility(P, Q, field):
    def dx(mat):
        return mat.applyfunc(
            lambda e: sp.diff(e, u) * field[0] + sp.diff(e, s) * field[1] + sp.diff(e, x)
        )

    R = dx(Q) - P.diff(lam) + Q * P - P * Q
    assert R.applyfunc(sp.simplify) == sp.zeros(2), R


def doc(name, description, m, n, P, Q, hiP, hiQ, field, u0):
    Pc = coeffs_of(P, m, hiP)
    Qc = coeffs_of(Q, n, hiQ)
    return {
        "name": name,
        "description": description,
        "dimension": 2,
        "m": m,
        "n": n,
        "state": ["u", "s"],
        "x0": 0.0,
        "u0": u0,
        "vector_field": [to_text(f) for f in field],
        "P": {str(k): [[to_text(e) for e in row] for row in v.tolist()] for k, v in Pc.items()},
        "Q": {str(k): [[to_text(e) for e in row] for row in v.tolist()] for k, v in Qc.items()},
    }


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    r = sp.Rational

    # irregular_2x2: Q_t = A/lam^2 + B/lam + E, P_t = D, all diagonal.
    field = [s, 1 - u**2]
    A = sp.diag(1, -1)
    B = sp.diag(r(1, 2), r(-1, 4))
    E = sp.diag(r(3, 10), r(-1, 5))
    D = sp.diag(u, r(1, 2))
    P, Q = gauge_pair(A / lam**2 + B / lam + E, D, field)
    check_compatibility(P, Q, field)
    d = doc(
        "irregular_2x2",
        "2x2 pair with a pole of order 2 in Q (leading eigenvalues 1, -1); "
        "gauge transform of a diagonal pair, compatible for the given vector field",
        0, -2, P, Q, 2, 2, field, ["0.2", "0.1"],
    )
    with open(os.path.join(here, "irregular_2x2.json"), "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")

    # regular_fuchsian: Q_t = R/lam + E, eigenvalues 3/10 and -2/5.
    field = [s, -u]
    R = sp.diag(r(3, 10), r(-2, 5))
    # A sizable constant part keeps the series coefficients from decaying
    # too fast, so truncation residuals stay above roundoff for small lam.
    E = sp.diag(4, -3)
    D = sp.diag(u, r(1, 2))
    P, Q = gauge_pair(R / lam + E, D, field)
    check_compatibility(P, Q, field)
    d = doc(
        "regular_fuchsian",
        "2x2 pair with a simple pole in Q, residue eigenvalues 3/10 and -2/5 "
        "(non-resonant); gauge transform of a diagonal pair",
        0, -1, P, Q, 2, 2, field, ["0.3", "-0.2"],
    )
    with open(os.path.join(here, "regular_fuchsian.json"), "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")

    # resonant_regular: residue eigenvalues 1 and 0, Q_t^(0) has a Jordan
    # coupling in the resonant entry, so logarithms are forced.
    field = [s, x - u]
    R = sp.diag(1, 0)
    E = sp.Matrix([[3, 1], [0, 3]])
    D = sp.diag(u, u)
    P, Q = gauge_pair(R / lam + E, D, field)
    check_compatibility(P, Q, field)
    d = doc(
        "resonant_regular",
        "2x2 pair with a simple pole in Q whose residue eigenvalues differ by 1; "
        "the order-1 coefficient couples the resonant entry, forcing log terms",
        0, -1, P, Q, 2, 2, field, ["0.1", "0.2"],
    )
    with open(os.path.join(here, "resonant_regular.json"), "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
