"""Spin-1 algebra, the NV ground-state Hamiltonian and its transitions.

All matrices use the basis |+1>, |0>, |-1> quantized along the NV symmetry
axis (z). Energies and frequencies are in MHz, fields in Gauss, angles in
radians.
"""

from dataclasses import dataclass
import math

import numpy as np

D_DEFAULT = 2870.0  # MHz
GAMMA_DEFAULT = 2.8  # MHz/G

SQ = "SQ"
OT = "OT"

# pair order used everywhere: indices into ascending eigenvalues
PAIRS = ((0, 1), (0, 2), (1, 2))

_R2 = 1.0 / math.sqrt(2.0)
_SX = np.array([[0, _R2, 0], [_R2, 0, _R2], [0, _R2, 0]], dtype=complex)
_SY = np.array(
    [[0, -1j * _R2, 0], [1j * _R2, 0, -1j * _R2], [0, 1j * _R2, 0]], dtype=complex
)
_SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
_SZ2 = np.diag([1.0, 0.0, 1.0])
_RHO = np.eye(3) - _SZ2


class ConvergenceError(RuntimeError):
    """Raised when the Jacobi eigensolver fails to converge."""


def spin1_operators():
    """Return copies of (S_x, S_y, S_z) for spin 1."""
    return _SX.copy(), _SY.copy(), _SZ.copy()


def pumped_density():
    """Density operator after optical pumping, E - S_z^2 (all population in |0>)."""
    return _RHO.copy()


@dataclass(frozen=True)
class ModelParams:
    D: float = D_DEFAULT
    gamma_e: float = GAMMA_DEFAULT
    B: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("D", "gamma_e", "B", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.D <= 0:
            raise ValueError("D must be positive")
        if self.gamma_e <= 0:
            raise ValueError("gamma_e must be positive")
        if self.B < 0:
            raise ValueError("field B must be nonnegative")

    def with_theta(self, theta):
        return ModelParams(self.D, self.gamma_e, self.B, theta)


def hamiltonian_batch(D, gamma_e, B, theta):
    """Real Hamiltonians for broadcast arrays of field and angle.

    Returns an array of shape ``broadcast(B, theta).shape + (3, 3)``.
    """
    B, theta = np.broadcast_arrays(np.asarray(B, float), np.asarray(theta, float))
    zb = gamma_e * B
    bz = zb * np.cos(theta)
    bx = zb * np.sin(theta) * _R2
    h = np.zeros(B.shape + (3, 3))
    h[..., 0, 0] = D / 3.0 + bz
    h[..., 1, 1] = -2.0 * D / 3.0
    h[..., 2, 2] = D / 3.0 - bz
    h[..., 0, 1] = h[..., 1, 0] = bx
    h[..., 1, 2] = h[..., 2, 1] = bx
    return h


def build_hamiltonian(p):
    """H = D (S_z^2 - S^2/3) + gamma_e B (S_x sin(theta) + S_z cos(theta))."""
    return hamiltonian_batch(p.D, p.gamma_e, p.B, p.theta).astype(complex)


def jacobi_eigh(a, tol=1e-12, max_sweeps=60):
    """Cyclic Jacobi diagonalization of a stack of Hermitian 3x3 matrices.

    ``a`` has shape (..., 3, 3). Real input stays real. Iterates until every
    off-diagonal magnitude is at most ``tol * ||A||_F`` for each matrix.
    Returns unsorted ``(values, vectors)`` with eigenvectors in columns.
    """
    a = np.array(a, copy=True)
    if a.shape[-2:] != (3, 3):
        raise ValueError("expected 3x3 matrices")
    shape = a.shape[:-2]
    a = a.reshape((-1, 3, 3))
    n = a.shape[0]
    v = np.broadcast_to(np.eye(3, dtype=a.dtype), a.shape).copy()
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    thresh = tol * scale
    iu = ([0, 0, 1], [1, 2, 2])

    for _ in range(max_sweeps):
        off = np.abs(a[:, iu[0], iu[1]])
        if np.all(off <= thresh[:, None]):
            break
        for p, q in PAIRS:
            apq = a[:, p, q]
            mag = np.abs(apq)
            act = mag > thresh
            if not act.any():
                continue
            safe = np.where(act, mag, 1.0)
            tau = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(tau * tau + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c = np.where(act, c, 1.0)
            s = np.where(act, s, 0.0)
            u = np.zeros_like(a)
            u[:, 0, 0] = u[:, 1, 1] = u[:, 2, 2] = 1.0
            u[:, p, p] = c
            u[:, q, q] = c
            # phase (a sign, for real input) that makes a_pq positive before rotating
            ph = np.where(act, apq / safe, 1.0)
            u[:, p, q] = s
            u[:, q, p] = -s * np.conj(ph)
            u[:, q, q] = c * np.conj(ph)
            uh = np.conj(np.swapaxes(u, 1, 2))
            a = uh @ a @ u
            a[act, p, q] = 0.0
            a[act, q, p] = 0.0
            v = v @ u
    else:
        off = np.abs(a[:, iu[0], iu[1]])
        if not np.all(off <= thresh[:, None]):
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    return w.reshape(shape + (3,)), v.reshape(shape + (3, 3))


def _sort_and_phase(w, v):
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    # largest-magnitude component real and positive; first index wins near-ties
    mag = np.abs(v)
    big = mag >= mag.max(axis=-2, keepdims=True) - 1e-12
    k = np.argmax(big, axis=-2)
    lead = np.take_along_axis(v, k[..., None, :], axis=-2)
    v = v * (np.conj(lead) / np.abs(lead))
    return w, v


def eigh_sorted(h):
    """Batched Jacobi eigensystem with ascending values and fixed phases."""
    w, v = jacobi_eigh(h)
    return _sort_and_phase(w, v)


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray


def eigensystem(H):
    H = np.asarray(H)
    if H.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    norm = np.linalg.norm(H)
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(H - H.conj().T)) > 1e-9 * max(norm, 1e-300):
        raise ValueError("matrix is not Hermitian")
    w, v = eigh_sorted(H.astype(complex))
    return EigenSystem(values=w, vectors=v)


def _expect(vecs, op):
    # <v_k|op|v_k> for each column k
    return np.real(np.einsum("...ik,ij,...jk->...k", np.conj(vecs), op, vecs))


def _projection_gaps(vecs, op):
    """|<S_u>_f - <S_u>_i| for every pair in PAIRS."""
    m = np.real(np.einsum("...ik,...ij,...jk->...k", np.conj(vecs), op, vecs))
    return np.stack([np.abs(m[..., f] - m[..., i]) for i, f in PAIRS], axis=-1)


def overtone_pair_index(D, gamma_e, B, theta, vecs):
    """Index into PAIRS of the overtone transition, batched over orientations.

    The overtone is the pair whose spin projections differ by at least 1.5,
    judged first along the field and then, below the crossing gamma_e*B = D,
    along the NV axis. If neither axis gives such a pair (strong mixing), it is
    the pair that excludes the most populated, |0>-like, eigenstate.
    """
    B, theta = np.broadcast_arrays(np.asarray(B, float), np.asarray(theta, float))
    along_field = (
        np.sin(theta)[..., None, None] * _SX + np.cos(theta)[..., None, None] * _SZ
    )
    gap_b = _projection_gaps(vecs, along_field)
    gap_z = _projection_gaps(vecs, _SZ[(None,) * B.ndim])
    use_b = gap_b.max(axis=-1) >= 1.5
    use_z = ~use_b & (gamma_e * B < D) & (gap_z.max(axis=-1) >= 1.5)
    by_field = np.argmax(gap_b, axis=-1)
    by_axis = np.argmax(gap_z, axis=-1)

    pops = _expect(vecs, _RHO)
    top = pops >= pops.max(axis=-1, keepdims=True) - 1e-12
    excluded = np.argmax(top, axis=-1)  # lowest-energy state among ties
    # pair index that excludes state k: k=0 -> (1,2), k=1 -> (0,2), k=2 -> (0,1)
    by_population = 2 - excluded
    return np.where(use_b, by_field, np.where(use_z, by_axis, by_population))


@dataclass(frozen=True)
class TransitionTable:
    """Columnar transitions for a batch of orientations; last axis indexes PAIRS."""

    freq: np.ndarray
    m2: np.ndarray
    delta_rho: np.ndarray
    delta_sz2: np.ndarray
    kappa: np.ndarray
    is_ot: np.ndarray


def transitions_from_eigen(D, gamma_e, B, theta, values, vecs):
    ii = np.array([p[0] for p in PAIRS])
    ff = np.array([p[1] for p in PAIRS])
    freq = values[..., ff] - values[..., ii]
    vi = vecs[..., :, ii]
    vf = vecs[..., :, ff]
    mx = np.einsum("...ik,ij,...jk->...k", np.conj(vf), _SX, vi)
    my = np.einsum("...ik,ij,...jk->...k", np.conj(vf), _SY, vi)
    m2 = gamma_e**2 * (np.abs(mx) ** 2 + np.abs(my) ** 2)
    rho = _expect(vecs, _RHO)
    sz2 = _expect(vecs, _SZ2)
    delta_rho = rho[..., ff] - rho[..., ii]
    delta_sz2 = sz2[..., ff] - sz2[..., ii]
    kappa = m2 * delta_rho * delta_sz2
    ot = overtone_pair_index(D, gamma_e, B, theta, vecs)
    is_ot = np.arange(3) == ot[..., None]
    return TransitionTable(freq, m2, delta_rho, delta_sz2, kappa, is_ot)


def transition_table(D, gamma_e, B, theta):
    """Transitions for broadcast arrays of field and angle."""
    B, theta = np.broadcast_arrays(np.asarray(B, float), np.asarray(theta, float))
    w, v = eigh_sorted(hamiltonian_batch(D, gamma_e, B, theta))
    return transitions_from_eigen(D, gamma_e, B, theta, w, v)


@dataclass(frozen=True)
class Transition:
    i: int
    f: int
    freq: float
    m2: float
    delta_rho: float
    delta_sz2: float
    kappa: float
    cls: str


def classify_transition(es, p, pair):
    ot = int(overtone_pair_index(p.D, p.gamma_e, p.B, p.theta, es.vectors))
    return OT if PAIRS[ot] == tuple(pair) else SQ


def enumerate_transitions(es, p):
    """The three transitions of one orientation, in PAIRS order."""
    t = transitions_from_eigen(p.D, p.gamma_e, p.B, p.theta, es.values, es.vectors)
    return [
        Transition(
            i=i,
            f=f,
            freq=float(t.freq[k]),
            m2=float(t.m2[k]),
            delta_rho=float(t.delta_rho[k]),
            delta_sz2=float(t.delta_sz2[k]),
            kappa=float(t.kappa[k]),
            cls=OT if t.is_ot[k] else SQ,
        )
        for k, (i, f) in enumerate(PAIRS)
    ]
