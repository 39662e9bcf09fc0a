import numpy as np

from roesser_ssi.model import RoesserModel, construct_uncorrelated, coupled_lyapunov


def scalar_model(A1=0.5, A2=0.2, A3=0.3, A4=0.4, K1=1.0, K2=None, Re=1.0):
    return RoesserModel(1, 1, 1, [[A1]], [[A2]], [[A3]], [[A4]], [[1.0]], [[1.0]],
                        K1=[[K1]], K2=None if K2 is None else [[K2]], Re=[[Re]])


def uncorrelated_scalar():
    """Coupled scalar model with eigenvalues {0.5, 0.4} and zero state cross term."""
    return construct_uncorrelated(scalar_model())


def planted_scalar():
    """Scalar model whose state cross term is clearly nonzero."""
    return scalar_model(A2=0.0, A3=0.3, K1=0.6, K2=0.5)


def random_stable_matrix(rng, n, rho=0.8):
    A = rng.standard_normal((n, n))
    r = np.max(np.abs(np.linalg.eigvals(A)))
    return A * (rho / r) if r > 0 else A


def random_noise_model(rng, nh, nv, ny, rho=0.7, max_tries=200):
    """Stable model whose state update has a zero horizontal-vertical cross term.

    The diagonal noise blocks are random; the cross block of ``Q`` is chosen
    to cancel ``A1 Pi_h A3^T + A2 Pi_v A4^T``, and draws whose joint noise
    covariance is not positive definite are rejected.
    """
    nx = nh + nv
    for _ in range(max_tries):
        A = random_stable_matrix(rng, nx, rho)
        A1, A2, A3, A4 = A[:nh, :nh], A[:nh, nh:], A[nh:, :nh], A[nh:, nh:]
        B = rng.standard_normal((nx + ny, nx + ny))
        W = B @ B.T / (nx + ny) + np.eye(nx + ny)
        Qh, Qv = W[:nh, :nh], W[nh:nx, nh:nx]
        Pi_h, Pi_v = coupled_lyapunov(A1, A2, A3, A4, Qh, Qv)
        W[:nh, nh:nx] = -(A1 @ Pi_h @ A3.T + A2 @ Pi_v @ A4.T)
        W[nh:nx, :nh] = W[:nh, nh:nx].T
        if np.linalg.eigvalsh(W)[0] <= 1e-3:
            continue
        C = rng.standard_normal((ny, nx))
        return RoesserModel(nh, nv, ny, A1, A2, A3, A4, C[:, :nh], C[:, nh:],
                            Q=W[:nx, :nx], R=W[nx:, nx:], S=W[:nx, nx:])
    raise RuntimeError("no admissible random model found")


def random_innovations_model(rng, nh, nv, ny, rho=0.7, max_tries=500):
    """Stable innovations model whose predictor ``A - K C`` is also stable."""
    nx = nh + nv
    for _ in range(max_tries):
        A = random_stable_matrix(rng, nx, rho)
        C = rng.standard_normal((ny, nx))
        K = 0.5 * rng.standard_normal((nx, ny))
        if np.max(np.abs(np.linalg.eigvals(A - K @ C))) >= 0.9:
            continue
        B = rng.standard_normal((ny, ny))
        Re = B @ B.T / ny + 0.5 * np.eye(ny)
        return RoesserModel(nh, nv, ny, A[:nh, :nh], A[:nh, nh:], A[nh:, :nh], A[nh:, nh:],
                            C[:, :nh], C[:, nh:], K1=K[:nh], K2=K[nh:], Re=Re)
    raise RuntimeError("no admissible random innovations model found")


def rel(a, b):
    den = np.linalg.norm(b)
    return float(np.linalg.norm(np.asarray(a) - b) / den) if den else float(np.linalg.norm(a))


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
