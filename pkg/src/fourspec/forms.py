"""Constant matrices for the boundary linear forms and bracket algebra.

U applies the quasi-derivative vector at x=0 unchanged; V permutes the
vector at x=1 so that rows select y[3], y[1], y[2], y[0].  J realizes the
Lagrange bracket as z^T J y; J0 and J1 are the constant factors appearing
in the symplectic identity for the Weyl matrix and in the adjoint form
definitions.
"""

import numpy as np

U = np.eye(4)

V = np.array([
    [0, 0, 0, 1],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [1, 0, 0, 0],
], dtype=float)

# J_{k,j} = (-1)^{k+1} delta_{k,5-j} (1-based indices)
J = np.array([
    [0, 0, 0, 1],
    [0, 0, -1, 0],
    [0, 1, 0, 0],
    [-1, 0, 0, 0],
], dtype=float)

J0 = np.array([
    [0, 0, 0, 1],
    [0, 0, -1, 0],
    [0, 1, 0, 0],
    [-1, 0, 0, 0],
], dtype=float)

J1 = np.array([
    [0, 0, 0, -1],
    [0, 0, -1, 0],
    [0, 1, 0, 0],
    [1, 0, 0, 0],
], dtype=float)

# Orders of the linear forms U_k, V_k (1-based k): p_{k,0} and p_{k,1}.
P_ORDERS_0 = (0, 1, 2, 3)
P_ORDERS_1 = (3, 1, 2, 0)


def adjoint_forms():
    """U* = [J U^-1 J0^-1]^T and V* = [J V^-1 J1^-1]^T."""
    u_star = (J @ np.linalg.inv(U) @ np.linalg.inv(J0)).T
    v_star = (J @ np.linalg.inv(V) @ np.linalg.inv(J1)).T
    return u_star, v_star


def verify_form_constants(tol=1e-14):
    """Self-test: the adjoint forms reproduce U and V; V and J0/J1 involutive.

    Catches transcription errors in the constant matrices; cheap enough to
    run at problem construction.
    """
    u_star, v_star = adjoint_forms()
    checks = {
        "U* == U": np.max(np.abs(u_star - U)),
        "V* == V": np.max(np.abs(v_star - V)),
        "V^2 == I": np.max(np.abs(V @ V - np.eye(4))),
        "J0^2 == -I": np.max(np.abs(J0 @ J0 + np.eye(4))),
        "J1^2 == -I": np.max(np.abs(J1 @ J1 + np.eye(4))),
        "J == J0": np.max(np.abs(J - J0)),
    }
    bad = {name: dev for name, dev in checks.items() if dev > tol}
    if bad:
        raise AssertionError(f"form constant self-test failed: {bad}")
    return checks
