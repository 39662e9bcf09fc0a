"""Roesser state-space models: covariances, gains, autocovariances, simulation.

The innovations form used throughout is::

    xh[r+1, s] = A1 xh[r, s] + A2 xv[r, s] + K1 e[r, s]
    xv[r, s+1] = A3 xh[r, s] + A4 xv[r, s] + K2 e[r, s]
    y[r, s]    = C1 xh[r, s] + C2 xv[r, s] + e[r, s]

with ``e`` white Gaussian of covariance ``Re``.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, InputError, NumericalError
from .grid import GridData

MAX_ITER = 100_000
REL_TOL = 1e-13

_MATRIX_FIELDS = ("A1", "A2", "A3", "A4", "C1", "C2", "K1", "K2", "Re", "Q", "R", "S")


def _mat(x, shape, name):
    if x is None:
        return None
    a = np.array(x, dtype=float, ndmin=2)
    if a.size == 0 and 0 in shape:
        a = np.zeros(shape)
    if a.shape != shape:
        raise InputError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RoesserModel:
    """System, gain, and noise parameters of a Roesser model.

    ``K1``, ``K2`` and ``Re`` describe the innovations form; ``Q``, ``R``,
    ``S`` the original noise model. Either set may be absent, but simulation
    needs the innovations form.
    """
    n_h: int
    n_v: int
    n_y: int
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A4: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    K1: np.ndarray = None
    K2: np.ndarray = None
    Re: np.ndarray = None
    Q: np.ndarray = None
    R: np.ndarray = None
    S: np.ndarray = None

    def __post_init__(self):
        nh, nv, ny = int(self.n_h), int(self.n_v), int(self.n_y)
        if nh < 0 or nv < 0 or ny < 1:
            raise InputError("dimensions must satisfy n_h, n_v >= 0 and n_y >= 1")
        nx = nh + nv
        shapes = {"A1": (nh, nh), "A2": (nh, nv), "A3": (nv, nh), "A4": (nv, nv),
                  "C1": (ny, nh), "C2": (ny, nv), "K1": (nh, ny), "K2": (nv, ny),
                  "Re": (ny, ny), "Q": (nx, nx), "R": (ny, ny), "S": (nx, ny)}
        for name in _MATRIX_FIELDS:
            object.__setattr__(self, name, _mat(getattr(self, name), shapes[name], name))
        for name in ("A1", "A2", "A3", "A4", "C1", "C2"):
            if getattr(self, name) is None:
                raise InputError(f"{name} is required")
        object.__setattr__(self, "n_h", nh)
        object.__setattr__(self, "n_v", nv)
        object.__setattr__(self, "n_y", ny)

    @property
    def n_x(self):
        return self.n_h + self.n_v

    @property
    def A(self):
        return np.block([[self.A1, self.A2], [self.A3, self.A4]])

    @property
    def C(self):
        return np.hstack([self.C1, self.C2])

    @property
    def K(self):
        if self.K1 is None or self.K2 is None:
            return None
        return np.vstack([self.K1, self.K2])

    @property
    def has_innovations(self):
        return self.K1 is not None and self.K2 is not None and self.Re is not None

    def noise_covariances(self):
        """``(Q, R, S)``: supplied values, or those implied by the innovations form."""
        if self.Q is not None and self.R is not None:
            S = self.S if self.S is not None else np.zeros((self.n_x, self.n_y))
            return self.Q, self.R, S
        if not self.has_innovations:
            raise InputError("model has neither {Q, R, S} nor {K1, K2, Re}")
        K = self.K
        return K @ self.Re @ K.T, self.Re.copy(), K @ self.Re

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {"n_h": self.n_h, "n_v": self.n_v, "n_y": self.n_y}
        for name in _MATRIX_FIELDS:
            val = getattr(self, name)
            if val is not None:
                out[name] = val.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            kw = {k: d[k] for k in ("n_h", "n_v", "n_y")}
        except KeyError as exc:
            raise InputError(f"model is missing field {exc}") from None
        unknown = set(d) - set(kw) - set(_MATRIX_FIELDS)
        if unknown:
            raise InputError(f"unknown model fields: {sorted(unknown)}")
        for name in _MATRIX_FIELDS:
            if name in d:
                kw[name] = d[name]
        return cls(**kw)


def _split(m, X):
    return X[:m.n_h, :m.n_h], X[:m.n_h, m.n_h:], X[m.n_h:, m.n_h:]


def spectral_radius(A):
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _min_eig(X):
    if X is None or X.size == 0:
        return np.inf
    return float(np.min(np.linalg.eigvalsh((X + X.T) / 2)))


@dataclass
class ValidationReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    flags: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)
    cross_term_norm: float = float("nan")

    @property
    def passed(self):
        return all(self.flags.values())

    def to_dict(self):
        return {"passed": self.passed, "spectral_radius": self.spectral_radius,
                "eigenvalue_magnitudes": np.abs(self.eigenvalues).tolist(),
                "flags": dict(self.flags), "messages": list(self.messages),
                "cross_term_norm": self.cross_term_norm}


def validate_model(m: RoesserModel, tol=1e-12) -> ValidationReport:
    """Stability and positive-(semi)definiteness checks.

    Reports on the spectral radius of ``A``, the noise covariances (given or
    implied by the innovations form), ``Re``, and the state covariance.
    """
    eig = np.linalg.eigvals(m.A) if m.n_x else np.zeros(0)
    rho = float(np.max(np.abs(eig))) if eig.size else 0.0
    rep = ValidationReport(eig, rho)
    rep.flags["stable"] = rho < 1
    if not rep.flags["stable"]:
        rep.messages.append(f"unstable: spectral radius {rho:.6g} >= 1")
    if m.Re is not None:
        rep.flags["Re_positive_definite"] = _min_eig(m.Re) > 0
        if not rep.flags["Re_positive_definite"]:
            rep.messages.append("Re not positive definite")
    try:
        Q, R, S = m.noise_covariances()
    except InputError as exc:
        rep.flags["noise_model"] = False
        rep.messages.append(str(exc))
        return rep
    rep.flags["R_positive_definite"] = _min_eig(R) > 0
    if not rep.flags["R_positive_definite"]:
        rep.messages.append("R not positive definite")
    scale = max(1.0, np.abs(Q).max() if Q.size else 0.0)
    rep.flags["Q_positive_semidefinite"] = _min_eig(Q) >= -tol * scale
    if not rep.flags["Q_positive_semidefinite"]:
        rep.messages.append("Q not positive semidefinite")
    joint = np.block([[Q, S], [S.T, R]])
    rep.flags["joint_positive_semidefinite"] = _min_eig(joint) >= -tol * max(1.0, np.abs(joint).max())
    if not rep.flags["joint_positive_semidefinite"]:
        rep.messages.append("[[Q, S], [S^T, R]] not positive semidefinite")
    if rep.flags["stable"]:
        try:
            Pi_h, Pi_v = solve_lyapunov(m)
            rep.flags["Pi_positive_definite"] = min(_min_eig(Pi_h), _min_eig(Pi_v)) > 0
            if not rep.flags["Pi_positive_definite"]:
                rep.messages.append("state covariance not positive definite")
            Pp = state_update_covariance(m, Pi_h, Pi_v)
            rep.cross_term_norm = float(np.linalg.norm(Pp[:m.n_h, m.n_h:]))
        except NumericalError as exc:
            rep.flags["Pi_positive_definite"] = False
            rep.messages.append(str(exc))
    return rep


# ---------------------------------------------------------------------------
# covariance equations

def coupled_lyapunov(A1, A2, A3, A4, W_h, W_v):
    """Solve the coupled diagonal-block Lyapunov pair directly.

    ``X_h = A1 X_h A1^T + A2 X_v A2^T + W_h`` and
    ``X_v = A3 X_h A3^T + A4 X_v A4^T + W_v``, as one linear system in
    ``(vec X_h, vec X_v)``.
    """
    nh, nv = A1.shape[0], A4.shape[0]
    Ih, Iv = np.eye(nh * nh), np.eye(nv * nv)
    L = np.block([[Ih - np.kron(A1, A1), -np.kron(A2, A2)],
                  [-np.kron(A3, A3), Iv - np.kron(A4, A4)]])
    rhs = np.concatenate([W_h.ravel(order="F"), W_v.ravel(order="F")])
    try:
        sol = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError:
        raise NumericalError("coupled Lyapunov system is singular") from None
    Xh = sol[:nh * nh].reshape(nh, nh, order="F")
    Xv = sol[nh * nh:].reshape(nv, nv, order="F")
    return (Xh + Xh.T) / 2, (Xv + Xv.T) / 2


def solve_lyapunov(m: RoesserModel, Q=None):
    """Block-diagonal state covariance ``(Pi_h, Pi_v)``.

    Solves the diagonal blocks of ``Pi = A Pi A^T + Q`` with the cross
    block of ``Pi`` held at zero.
    """
    if spectral_radius(m.A) >= 1:
        raise NumericalError("A is not stable; no stationary covariance")
    if Q is None:
        Q = m.noise_covariances()[0]
    Qhh, _, Qvv = _split(m, np.asarray(Q, dtype=float))
    return coupled_lyapunov(m.A1, m.A2, m.A3, m.A4, Qhh, Qvv)


def lyapunov_residual(m, Pi_h, Pi_v, Q=None):
    if Q is None:
        Q = m.noise_covariances()[0]
    Qhh, _, Qvv = _split(m, Q)
    rh = m.A1 @ Pi_h @ m.A1.T + m.A2 @ Pi_v @ m.A2.T + Qhh - Pi_h
    rv = m.A3 @ Pi_h @ m.A3.T + m.A4 @ Pi_v @ m.A4.T + Qvv - Pi_v
    num = np.sqrt(np.linalg.norm(rh) ** 2 + np.linalg.norm(rv) ** 2)
    den = np.sqrt(np.linalg.norm(Pi_h) ** 2 + np.linalg.norm(Pi_v) ** 2)
    return num / den if den else num


def state_update_covariance(m: RoesserModel, Pi_h, Pi_v, Q=None):
    """``A Pi A^T + Q`` for block-diagonal ``Pi``; its cross block is the update term."""
    if Q is None:
        Q = m.noise_covariances()[0]
    Pi = sla.block_diag(Pi_h, Pi_v)
    out = m.A @ Pi @ m.A.T + Q
    return (out + out.T) / 2


def _fixed_point(step, X0, what):
    X = X0
    for it in range(1, MAX_ITER + 1):
        Xn = step(X)
        dn = np.linalg.norm(Xn - X)
        nrm = np.linalg.norm(Xn)
        X = Xn
        if dn <= REL_TOL * nrm or dn == 0:
            return X, it
        if not np.isfinite(nrm):
            break
    raise ConvergenceError(f"{what} did not converge", residual=float(dn), iterations=it)


def riccati_forward(A, C, G, L00):
    """Iterate ``P = A P A^T + (G - A P C^T)(L00 - C P C^T)^{-1}(...)^T`` from zero.

    Returns
    -------
    P, K, Re : ndarray
        State-estimate covariance, gain ``(G - A P C^T) Re^{-1}`` and
        innovations covariance ``Re = L00 - C P C^T``.
    """
    A, C, G, L00 = (np.asarray(x, dtype=float) for x in (A, C, G, L00))

    def step(P):
        Re = L00 - C @ P @ C.T
        try:
            cf = sla.cho_factor(Re)
        except np.linalg.LinAlgError:
            raise ConvergenceError("innovations covariance became indefinite") from None
        W = G - A @ P @ C.T
        Pn = A @ P @ A.T + W @ sla.cho_solve(cf, W.T)
        return (Pn + Pn.T) / 2

    P, _ = _fixed_point(step, np.zeros_like(A), "forward Riccati iteration")
    Re = L00 - C @ P @ C.T
    K = np.linalg.solve(Re.T, (G - A @ P @ C.T).T).T
    return P, K, (Re + Re.T) / 2


def riccati_error(A, C, Q, R, S, Sigma0):
    """Iterate ``Sigma = A Sigma A^T + Q - (A Sigma C^T + S)(C Sigma C^T + R)^{-1}(...)^T``.

    Started from ``Sigma0`` (normally the state covariance).

    Returns
    -------
    Sigma, K : ndarray
    """
    A, C, Q, R, S = (np.asarray(x, dtype=float) for x in (A, C, Q, R, S))

    def step(Sg):
        W = A @ Sg @ C.T + S
        V = C @ Sg @ C.T + R
        Sn = A @ Sg @ A.T + Q - W @ np.linalg.solve(V, W.T)
        return (Sn + Sn.T) / 2

    Sigma, _ = _fixed_point(step, np.asarray(Sigma0, dtype=float), "error Riccati iteration")
    W = A @ Sigma @ C.T + S
    K = np.linalg.solve((C @ Sigma @ C.T + R).T, W.T).T
    return Sigma, K


def riccati_forward_residual(A, C, G, L00, P):
    W = G - A @ P @ C.T
    F = A @ P @ A.T + W @ np.linalg.solve(L00 - C @ P @ C.T, W.T)
    n = np.linalg.norm(P)
    return np.linalg.norm(F - P) / n if n else np.linalg.norm(F - P)


def riccati_error_residual(A, C, Q, R, S, Sigma):
    W = A @ Sigma @ C.T + S
    F = A @ Sigma @ A.T + Q - W @ np.linalg.solve(C @ Sigma @ C.T + R, W.T)
    n = np.linalg.norm(Sigma)
    return np.linalg.norm(F - Sigma) / n if n else np.linalg.norm(F - Sigma)


@dataclass
class CovarianceSet:
    """Second-order quantities derived from a model.

    ``P`` is the forward-Riccati solution and ``P_h, P_v`` its diagonal
    blocks. ``Pi_hv`` and ``P_hv`` are update cross terms such as
    ``A1 P_h A3^T + A2 P_v A4^T + K1 Re K2^T``, not same-site blocks.
    ``Sigma`` solves the error-form Riccati equation.
    """
    Pi_h: np.ndarray
    Pi_v: np.ndarray
    Pi_hv: np.ndarray
    P: np.ndarray
    P_h: np.ndarray
    P_v: np.ndarray
    P_hv: np.ndarray
    G: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    Lambda00: np.ndarray
    K: np.ndarray
    Re: np.ndarray
    Sigma: np.ndarray = None
    K_error_form: np.ndarray = None
    Sigma_h: np.ndarray = None
    Sigma_v: np.ndarray = None


def solve_riccati(m: RoesserModel) -> CovarianceSet:
    """State covariance, forward and error Riccati solutions, and gains."""
    Q, R, S = m.noise_covariances()
    Pi_h, Pi_v = solve_lyapunov(m, Q)
    Pi = sla.block_diag(Pi_h, Pi_v)
    Pp = state_update_covariance(m, Pi_h, Pi_v, Q)
    G = m.A @ Pi @ m.C.T + S
    L00 = m.C @ Pi @ m.C.T + R
    L00 = (L00 + L00.T) / 2
    P, K, Re = riccati_forward(m.A, m.C, G, L00)
    if np.min(np.linalg.eigvalsh(Re)) <= 0:
        raise NumericalError("innovations covariance is not positive definite")
    nh = m.n_h
    P_h, P_v = P[:nh, :nh], P[nh:, nh:]
    P_hv = (m.A1 @ P_h @ m.A3.T + m.A2 @ P_v @ m.A4.T
            + K[:nh] @ Re @ K[nh:].T)
    cs = CovarianceSet(Pi_h=Pi_h, Pi_v=Pi_v, Pi_hv=Pp[:nh, nh:], P=P,
                       P_h=P_h, P_v=P_v, P_hv=P_hv,
                       G=G, G1=G[:nh], G2=G[nh:], Lambda00=L00, K=K, Re=Re)
    Pi_full = sla.solve_discrete_lyapunov(m.A, Q)
    Sigma, K2 = riccati_error(m.A, m.C, Q, R, S, (Pi_full + Pi_full.T) / 2)
    cs.Sigma, cs.K_error_form = Sigma, K2
    cs.Sigma_h, cs.Sigma_v = Sigma[:nh, :nh], Sigma[nh:, nh:]
    return cs


def with_kalman_gain(m: RoesserModel) -> RoesserModel:
    """Fill in ``K1, K2, Re`` from the forward Riccati solution."""
    cs = solve_riccati(m)
    return m.replace(K1=cs.K[:m.n_h], K2=cs.K[m.n_h:], Re=cs.Re)


def innovation_state_covariance(m: RoesserModel):
    """``(P_h, P_v, P_hv)`` of the innovations-form states.

    ``P_h, P_v`` solve the coupled equations driven by ``K Re K^T``;
    ``P_hv`` is the resulting update cross term.
    """
    if not m.has_innovations:
        raise InputError("model lacks the innovations form")
    KReK = m.K @ m.Re @ m.K.T
    P_h, P_v = solve_lyapunov(m, KReK)
    P_hv = m.A1 @ P_h @ m.A3.T + m.A2 @ P_v @ m.A4.T + m.K1 @ m.Re @ m.K2.T
    return P_h, P_v, P_hv


def innovation_covariances(m: RoesserModel) -> CovarianceSet:
    """CovarianceSet of an innovations-form model, without any Riccati solve.

    The innovations states are themselves the state estimates, so ``P``
    comes from the coupled equations driven by ``K Re K^T`` and the error
    covariance is zero.
    """
    P_h, P_v, P_hv = innovation_state_covariance(m)
    P = sla.block_diag(P_h, P_v)
    G = m.A @ P @ m.C.T + m.K @ m.Re
    L00 = m.C @ P @ m.C.T + m.Re
    nh = m.n_h
    return CovarianceSet(Pi_h=P_h, Pi_v=P_v, Pi_hv=P_hv, P=P, P_h=P_h, P_v=P_v,
                         P_hv=P_hv, G=G, G1=G[:nh], G2=G[nh:], Lambda00=(L00 + L00.T) / 2,
                         K=m.K.copy(), Re=np.array(m.Re), Sigma=np.zeros_like(P),
                         K_error_form=m.K.copy(), Sigma_h=np.zeros_like(P_h),
                         Sigma_v=np.zeros_like(P_v))


def construct_uncorrelated(m: RoesserModel, max_iter=10_000, tol=1e-12) -> RoesserModel:
    """Choose ``K2`` so the innovations-state cross term vanishes.

    Alternates between the least-squares ``K2`` cancelling
    ``A1 P_h A3^T + A2 P_v A4^T`` through ``K1 Re K2^T`` and an exact
    re-solve of ``P_h, P_v``. Any supplied ``Q, R, S`` are dropped, since
    the result is an innovations-only model.

    Raises
    ------
    ConvergenceError
        No ``K2`` drives the cross term below ``1e-10`` within the cap.
    """
    if m.K1 is None or m.Re is None:
        raise InputError("construct_uncorrelated needs K1 and Re")
    if spectral_radius(m.A) >= 1:
        raise InputError("A is not stable")
    K1Re = m.K1 @ m.Re
    pinv = np.linalg.pinv(K1Re)
    K2 = np.zeros((m.n_v, m.n_y)) if m.K2 is None else np.array(m.K2)
    cur = m.replace(K2=K2, Q=None, R=None, S=None)
    cross = np.inf
    for _ in range(max_iter):
        P_h, P_v, _ = innovation_state_covariance(cur)
        X = m.A1 @ P_h @ m.A3.T + m.A2 @ P_v @ m.A4.T
        K2 = -(pinv @ X).T
        cur = cur.replace(K2=K2)
        P_h, P_v, P_hv = innovation_state_covariance(cur)
        cross = np.linalg.norm(P_hv)
        if cross < tol * max(1.0, np.linalg.norm(P_h) + np.linalg.norm(P_v)):
            return cur
        if not np.isfinite(cross) or spectral_radius(cur.A) >= 1:
            break
    if cross < 1e-10:
        return cur
    raise ConvergenceError("could not cancel the state cross term", residual=float(cross))


# ---------------------------------------------------------------------------
# Markov parameters and autocovariances

class MarkovPowers:
    """Memoised 2-D transition powers ``A^{k,m}``.

    ``A^{0,0} = I``, ``A^{k,m} = A10 A^{k-1,m} + A01 A^{k,m-1}`` and
    negative indices give zero.
    """

    def __init__(self, m: RoesserModel):
        nh, nx = m.n_h, m.n_x
        self.A10 = np.zeros((nx, nx))
        self.A10[:nh] = m.A[:nh]
        self.A01 = np.zeros((nx, nx))
        self.A01[nh:] = m.A[nh:]
        self._cache = {(0, 0): np.eye(nx)}
        self._zero = np.zeros((nx, nx))

    def __call__(self, k, l):
        if k < 0 or l < 0:
            return self._zero
        key = (k, l)
        if key not in self._cache:
            # fill iteratively to avoid deep recursion
            for kk in range(k + 1):
                for ll in range(l + 1):
                    if (kk, ll) not in self._cache:
                        self._cache[(kk, ll)] = (self.A10 @ self(kk - 1, ll)
                                                 + self.A01 @ self(kk, ll - 1))
        return self._cache[key]


def markov_power(m: RoesserModel, k, l, cache: MarkovPowers = None):
    if k < 0 or l < 0:
        raise InputError("Markov indices must be nonnegative")
    return (cache or MarkovPowers(m))(k, l)


def autocovariance(m: RoesserModel, covs: CovarianceSet, k, l, cache=None):
    """Theoretical ``E[y[r+k, s+l] y[r, s]^T]`` for ``k, l >= 0``."""
    if k < 0 or l < 0:
        raise InputError("lags must be nonnegative")
    if k == 0 and l == 0:
        return covs.Lambda00.copy()
    if l == 0:
        return m.C1 @ np.linalg.matrix_power(m.A1, k - 1) @ covs.G1
    if k == 0:
        return m.C2 @ np.linalg.matrix_power(m.A4, l - 1) @ covs.G2
    mp = cache or MarkovPowers(m)
    nh = m.n_h
    G10 = np.zeros_like(covs.G)
    G10[:nh] = covs.G1
    G01 = np.zeros_like(covs.G)
    G01[nh:] = covs.G2
    return m.C @ mp(k - 1, l) @ G10 + m.C @ mp(k, l - 1) @ G01


# ---------------------------------------------------------------------------
# simulation

def _sym_sqrt(X):
    w, V = np.linalg.eigh((X + X.T) / 2)
    if w.size and w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise InputError("Re must be positive semidefinite")
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.T


def make_rng(seed):
    """Counter-based Philox generator (64-bit key from ``seed``)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def propagate(m: RoesserModel, E, xh0=None, xv0=None):
    """Run the innovations recurrences over a given innovations field.

    Parameters
    ----------
    E : (N+1, M+1, n_y) ndarray
    xh0 : (M+1, n_h) ndarray, optional
        Boundary ``xh[0, s]``; zero if omitted.
    xv0 : (N+1, n_v) ndarray, optional
        Boundary ``xv[r, 0]``; zero if omitted.

    Returns
    -------
    Y, Xh, Xv : ndarray
        Fields of shape ``(N+1, M+1, .)``.
    """
    E = np.asarray(E, dtype=float)
    n1, m1, _ = E.shape
    Xh = np.zeros((n1, m1, m.n_h))
    Xv = np.zeros((n1, m1, m.n_v))
    if xh0 is not None:
        Xh[0] = xh0
    if xv0 is not None:
        Xv[:, 0] = xv0
    A1t, A2t, A3t, A4t = m.A1.T, m.A2.T, m.A3.T, m.A4.T
    K1t, K2t = m.K1.T, m.K2.T
    # sweep anti-diagonals d = r + s; every site on one depends only on the last
    for d in range(n1 + m1 - 2):
        r = np.arange(max(0, d - m1 + 1), min(d, n1 - 1) + 1)
        s = d - r
        xh, xv, e = Xh[r, s], Xv[r, s], E[r, s]
        ok = r + 1 < n1
        Xh[r[ok] + 1, s[ok]] = (xh @ A1t + xv @ A2t + e @ K1t)[ok]
        ok = s + 1 < m1
        Xv[r[ok], s[ok] + 1] = (xh @ A3t + xv @ A4t + e @ K2t)[ok]
    Y = Xh @ m.C1.T + Xv @ m.C2.T + E
    return Y, Xh, Xv


@dataclass(frozen=True)
class Simulation:
    Y: GridData
    Xh: GridData
    Xv: GridData
    E: GridData


def simulate(m: RoesserModel, N, M, seed, initial_h="zero", burn_in=0) -> Simulation:
    """Draw a realisation of the innovations model on ``[0, N] x [0, M]``.

    Parameters
    ----------
    initial_h : {"zero", "stationary"}
        Boundary ``xh[0, s]``: zero, or drawn i.i.d. from ``N(0, P_h)``.
    burn_in : int
        Simulate ``burn_in`` extra rows and columns before the kept window,
        which then starts near stationarity instead of at a zero boundary.

    Notes
    -----
    Innovations are ``Re^{1/2} z`` with ``z`` a standard-normal block of
    shape ``(N+1+burn_in, M+1+burn_in, n_y)`` drawn in C order from a Philox
    generator keyed by ``seed``; boundary states, if random, are drawn after.
    """
    if not m.has_innovations:
        raise InputError("simulation needs K1, K2 and Re")
    if N < 1 or M < 1:
        raise InputError("N and M must be at least 1")
    if initial_h not in ("zero", "stationary"):
        raise InputError("initial_h must be 'zero' or 'stationary'")
    b = int(burn_in)
    rng = make_rng(seed)
    z = rng.standard_normal((N + 1 + b, M + 1 + b, m.n_y))
    E = z @ _sym_sqrt(m.Re).T
    xh0 = None
    if initial_h == "stationary" and m.n_h:
        P_h = innovation_state_covariance(m)[0]
        xh0 = rng.standard_normal((M + 1 + b, m.n_h)) @ _sym_sqrt(P_h).T
    Y, Xh, Xv = propagate(m, E, xh0=xh0)
    win = (slice(b, None), slice(b, None))
    return Simulation(GridData(Y[win]), GridData(Xh[win]), GridData(Xv[win]), GridData(E[win]))
