"""Block operators that link stacked data matrices to the model parameters.

Naming (``i`` is the Hankel depth):

``Gamma_h``    stacked ``C1 A1^a``                       (n_y i x n_h)
``Gamma_vh``   lower Toeplitz, ``C2`` / ``C1 A1^. A2``    (n_y i x n_v i)
``K_h``        lower Toeplitz, ``I`` / ``C1 A1^. K1``     (n_y i x n_y i)
``Phi_h``      ``[A1^{i-1} ... A1 I]``                  (n_h x n_h i)
``Phi_vh``     ``Phi_h (I x A2)``                       (n_h x n_v i)
``L_h``        ``Phi_h (I x K1)``                       (n_h x n_y i)
``Theta_h``    stacked ``A1^a``                          (n_h i x n_h)
``Theta_vh``   ``(I x A3) Theta_h``                     (n_v i x n_h)
``A_vh``       lower Toeplitz, ``A4`` / ``A3 A1^. A2``    (n_v i x n_v i)
``K_vh``       lower Toeplitz, ``K2`` / ``A3 A1^. K1``    (n_v i x n_y i)
``G_A1``       strictly lower Toeplitz, ``A1^{a-b-1}``   (n_h i x n_h i)

and the column-propagation matrices over ``M + 1`` grid columns.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .linalg import block_toeplitz
from .model import RoesserModel


def _powers(A, count):
    out = [np.eye(A.shape[0])]
    for _ in range(count - 1):
        out.append(out[-1] @ A)
    return out


def _kron_eye(i, X):
    return np.kron(np.eye(i), X)


def _upper_toeplitz(diag, supers):
    """Upper block Toeplitz from a diagonal block and superdiagonal blocks."""
    blocks = [diag] + list(supers)
    n = len(blocks)
    r, c = diag.shape
    out = np.zeros((r * n, c * n))
    for a in range(n):
        for b in range(a, n):
            out[a * r:(a + 1) * r, b * c:(b + 1) * c] = blocks[b - a]
    return out


@dataclass(frozen=True)
class StructuredOperators:
    i: int
    M: int
    Gamma_h: np.ndarray
    Gamma_vh: np.ndarray
    K_h: np.ndarray
    Theta_h: np.ndarray
    Theta_vh: np.ndarray
    A_vh: np.ndarray
    K_vh: np.ndarray
    Phi_h: np.ndarray
    Phi_vh: np.ndarray
    L_h: np.ndarray
    G_A1: np.ndarray
    A1_i: np.ndarray
    bA_M_vh: np.ndarray
    bK_M_vh: np.ndarray
    bA_M_h: np.ndarray
    bK_M_h: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    identity_error: float


def _check(name, X, Y, tol):
    scale = max(1.0, np.abs(X).max() if X.size else 0.0)
    err = np.abs(X - Y).max() / scale if X.size else 0.0
    if err > tol:
        raise NumericalError(f"operator identity for {name} violated ({err:.3e})")
    return err


def build_operators(m: RoesserModel, i, M=0, check_tol=1e-12) -> StructuredOperators:
    """Build every structured operator for depth ``i`` and ``M + 1`` columns.

    Operators are formed from their block definitions and then checked
    against the Kronecker-product forms; a mismatch above ``check_tol``
    raises :class:`NumericalError`.
    """
    if i < 1 or M < 0:
        raise ValueError("need i >= 1 and M >= 0")
    nh, nv, ny = m.n_h, m.n_v, m.n_y
    A1, A2, A3, A4, C1, C2, K1 = m.A1, m.A2, m.A3, m.A4, m.C1, m.C2, m.K1
    K2 = m.K2 if m.K2 is not None else np.zeros((nv, ny))
    if K1 is None:
        K1 = np.zeros((nh, ny))
    pw = _powers(A1, i + 1)

    Gamma_h = np.vstack([C1 @ pw[a] for a in range(i)])
    Theta_h = np.vstack(pw[:i])
    Theta_vh = np.vstack([A3 @ pw[a] for a in range(i)])
    Phi_h = np.hstack(pw[:i][::-1])
    Phi_vh = np.hstack([pw[a] @ A2 for a in range(i - 1, -1, -1)])
    L_h = np.hstack([pw[a] @ K1 for a in range(i - 1, -1, -1)])
    Gamma_vh = block_toeplitz([C2] + [C1 @ pw[d - 1] @ A2 for d in range(1, i)])
    K_h = block_toeplitz([np.eye(ny)] + [C1 @ pw[d - 1] @ K1 for d in range(1, i)])
    A_vh = block_toeplitz([A4] + [A3 @ pw[d - 1] @ A2 for d in range(1, i)])
    K_vh = block_toeplitz([K2] + [A3 @ pw[d - 1] @ K1 for d in range(1, i)])
    G_A1 = block_toeplitz([np.zeros((nh, nh))] + [pw[d - 1] for d in range(1, i)])
    A1_i = pw[i]

    # column propagation
    Ap = _powers(A_vh, max(M, 1))
    bA_M_vh = np.hstack([Ap[d] @ Theta_vh for d in range(M)]) if M else np.zeros((nv * i, 0))
    bK_M_vh = np.hstack([Ap[d] @ K_vh for d in range(M)]) if M else np.zeros((nv * i, 0))
    bA_M_h = _upper_toeplitz(A1_i, [Phi_vh @ Ap[d - 1] @ Theta_vh for d in range(1, M + 1)])
    bK_M_h = _upper_toeplitz(L_h, [Phi_vh @ Ap[d - 1] @ K_vh for d in range(1, M + 1)])
    Q1 = np.hstack([np.zeros((nv * i, nh)), bA_M_vh])
    Q2 = np.hstack([np.zeros((nv * i, ny * i)), bK_M_vh])
    P1 = Q1 @ bA_M_h
    P2 = Q1 @ bK_M_h

    err = 0.0
    Ii = np.eye(i)
    err = max(err, _check("Theta_vh", Theta_vh, _kron_eye(i, A3) @ Theta_h, check_tol))
    err = max(err, _check("A_vh", A_vh, _kron_eye(i, A3) @ G_A1 @ _kron_eye(i, A2)
                          + _kron_eye(i, A4), check_tol))
    err = max(err, _check("K_vh", K_vh, _kron_eye(i, A3) @ G_A1 @ _kron_eye(i, K1)
                          + _kron_eye(i, K2), check_tol))
    err = max(err, _check("Gamma_vh", Gamma_vh, _kron_eye(i, C1) @ G_A1 @ _kron_eye(i, A2)
                          + _kron_eye(i, C2), check_tol))
    err = max(err, _check("K_h", K_h, _kron_eye(i, C1) @ G_A1 @ _kron_eye(i, K1)
                          + np.kron(Ii, np.eye(ny)), check_tol))
    err = max(err, _check("Phi_vh", Phi_vh, Phi_h @ _kron_eye(i, A2), check_tol))
    err = max(err, _check("L_h", L_h, Phi_h @ _kron_eye(i, K1), check_tol))

    return StructuredOperators(
        i=i, M=M, Gamma_h=Gamma_h, Gamma_vh=Gamma_vh, K_h=K_h, Theta_h=Theta_h,
        Theta_vh=Theta_vh, A_vh=A_vh, K_vh=K_vh, Phi_h=Phi_h, Phi_vh=Phi_vh, L_h=L_h,
        G_A1=G_A1, A1_i=A1_i, bA_M_vh=bA_M_vh, bK_M_vh=bK_M_vh, bA_M_h=bA_M_h,
        bK_M_h=bK_M_h, Q1=Q1, Q2=Q2, P1=P1, P2=P2, identity_error=err)


def transpose_model(m: RoesserModel) -> RoesserModel:
    """Swap the horizontal and vertical roles (for processing along ``s``)."""
    Q = R = S = None
    if m.Q is not None:
        perm = np.r_[np.arange(m.n_h, m.n_x), np.arange(m.n_h)]
        Q = m.Q[np.ix_(perm, perm)]
        R = m.R
        S = m.S[perm] if m.S is not None else None
    return RoesserModel(m.n_v, m.n_h, m.n_y, m.A4, m.A3, m.A2, m.A1, m.C2, m.C1,
                        K1=m.K2, K2=m.K1, Re=m.Re, Q=Q, R=R, S=S)
