"""Statevector inner loops, in two interchangeable implementations.

The numba versions are used by default.  Set ``QBDL_DISABLE_NUMBA=1`` in the
environment (before import) to force the pure-numpy path; the numpy path is
also used automatically when numba is not importable.

Conventions shared by both paths: qubit 0 is the least significant bit of the
amplitude index, and for a k-qubit matrix acting on ``targets`` the local basis
index is ``sum(bit(targets[i]) << i)``, i.e. ``targets[0]`` is the least
significant local bit.
"""
import os

import numpy as np

# -- pure numpy -------------------------------------------------------------


def apply_matrix_numpy(state, mat, targets):
    """Return ``mat`` applied to ``targets`` of ``state`` (new array)."""
    n = state.shape[0].bit_length() - 1
    k = len(targets)
    psi = state.reshape((2,) * n)
    # reshape mat so row/col axis 0 is the most significant local bit
    tens = mat.reshape((2,) * (2 * k))
    axes = [n - 1 - q for q in reversed(targets)]
    out = np.tensordot(tens, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return np.ascontiguousarray(out).reshape(-1)


def apply_x_numpy(state, qubit):
    view = state.reshape(-1, 2, 1 << qubit)
    return view[:, ::-1, :].reshape(-1).copy()


def prob_one_numpy(state, qubit):
    view = state.reshape(-1, 2, 1 << qubit)[:, 1, :]
    return float(np.vdot(view, view).real)


def collapse_numpy(state, qubit, outcome, prob):
    out = state.reshape(-1, 2, 1 << qubit).copy()
    out[:, 1 - outcome, :] = 0.0
    out /= np.sqrt(prob)
    return out.reshape(-1)


# -- numba ------------------------------------------------------------------

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(cache=True)
    def _apply_matrix_nb(state, mat, targets):
        k = targets.shape[0]
        dim = 1 << k
        n_amp = state.shape[0]
        out = state.copy()
        sorted_t = np.sort(targets)
        offsets = np.zeros(dim, dtype=np.int64)
        for loc in range(dim):
            off = 0
            for i in range(k):
                if (loc >> i) & 1:
                    off |= 1 << targets[i]
            offsets[loc] = off
        buf = np.empty(dim, dtype=np.complex128)
        for r in range(n_amp >> k):
            # spread r over the non-target bit positions
            base = r
            for i in range(k):
                t = sorted_t[i]
                low = base & ((1 << t) - 1)
                base = ((base >> t) << (t + 1)) | low
            for loc in range(dim):
                buf[loc] = state[base + offsets[loc]]
            for row in range(dim):
                acc = 0.0 + 0.0j
                for col in range(dim):
                    acc += mat[row, col] * buf[col]
                out[base + offsets[row]] = acc
        return out

    @njit(cache=True)
    def _apply_x_nb(state, qubit):
        out = state.copy()
        step = 1 << qubit
        n_amp = state.shape[0]
        for i in range(n_amp):
            if not (i >> qubit) & 1:
                out[i] = state[i + step]
                out[i + step] = state[i]
        return out

    @njit(cache=True)
    def _prob_one_nb(state, qubit):
        acc = 0.0
        for i in range(state.shape[0]):
            if (i >> qubit) & 1:
                acc += state[i].real ** 2 + state[i].imag ** 2
        return acc

    @njit(cache=True)
    def _collapse_nb(state, qubit, outcome, prob):
        out = np.empty_like(state)
        scale = 1.0 / np.sqrt(prob)
        for i in range(state.shape[0]):
            if ((i >> qubit) & 1) == outcome:
                out[i] = state[i] * scale
            else:
                out[i] = 0.0
        return out

    def apply_matrix_numba(state, mat, targets):
        return _apply_matrix_nb(state, mat, np.asarray(targets, dtype=np.int64))

    def apply_x_numba(state, qubit):
        return _apply_x_nb(state, qubit)

    def prob_one_numba(state, qubit):
        return float(_prob_one_nb(state, qubit))

    def collapse_numba(state, qubit, outcome, prob):
        return _collapse_nb(state, qubit, outcome, prob)


def _env_disabled():
    return os.environ.get("QBDL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _env_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    apply_matrix = apply_matrix_numba
    apply_x = apply_x_numba
    prob_one = prob_one_numba
    collapse = collapse_numba
else:
    apply_matrix = apply_matrix_numpy
    apply_x = apply_x_numpy
    prob_one = prob_one_numpy
    collapse = collapse_numpy
