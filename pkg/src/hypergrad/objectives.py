"""Training objectives and validation errors with exact product oracles.

Every objective exposes the same five operations: scalar value, gradient
in the parameters, Hessian-vector product, and the two mixed
parameter/hyperparameter cross products (forward direction ``cross_jvp``
and reverse direction ``cross_vjp``). The training dynamics build their
step Jacobian products out of exactly these, so the five must agree with
finite differences of ``value`` — the test suite enforces this for every
kind.

Parameter vectors for the linear softmax models are laid out as
``concat(W.ravel(), b)`` with W of shape (n_classes, n_features).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, MinibatchSchedule, full_batch_schedule
from .errors import DimensionMismatchError
from .layouts import VectorLayout
from .numerics import ensure_finite_scalar, make_rng

# ---------------------------------------------------------------------------
# Shared softmax cross-entropy kernels


def softmax_rows(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def unpack_linear(w, n_classes, n_features):
    """Split a flat parameter vector into (W, b)."""
    expected = n_classes * n_features + n_classes
    if len(w) != expected:
        raise DimensionMismatchError(
            f"parameter vector has length {len(w)}, model expects {expected}"
        )
    mat = w[: n_classes * n_features].reshape(n_classes, n_features)
    bias = w[n_classes * n_features :]
    return mat, bias


def pack_linear(mat, bias):
    return np.concatenate([mat.ravel(), bias])


def _ce_losses(x, y, mat, bias):
    """Per-example cross-entropy of a linear softmax model."""
    logp = _log_softmax_rows(x @ mat.T + bias)
    return -logp[np.arange(len(y)), y]


def _ce_grad_coefs(x, y, mat, bias):
    """Per-example dloss/dlogits = softmax - onehot, plus the probs."""
    p = softmax_rows(x @ mat.T + bias)
    g = p.copy()
    g[np.arange(len(y)), y] -= 1.0
    return g, p


def _assemble_wgrad(coefs, x):
    """Sum_i outer(coefs_i, x_i) and the bias part, flattened."""
    return pack_linear(coefs.T @ x, coefs.sum(axis=0))


def _gauss_newton_dirs(p, u):
    """Rows (diag(p_i) - p_i p_i^T) u_i for each example."""
    pu = p * u
    return pu - p * pu.sum(axis=1, keepdims=True)


class _BatchCache:
    """Memo of per-step softmax quantities keyed by (t, parameter bytes).

    Within one training step the dynamics evaluate several products at
    the same (t, w); caching the shared probabilities keeps forward-mode
    cost at one matrix pass per product instead of several. Pure
    speedup: every entry is a function of the key only.
    """

    def __init__(self, maxsize=4):
        self._store = {}
        self._maxsize = maxsize

    def get(self, t, w, build):
        key = (t, w.tobytes())
        hit = self._store.get(key)
        if hit is None:
            hit = build()
            if len(self._store) >= self._maxsize:
                self._store.pop(next(iter(self._store)))
            self._store[key] = hit
        return hit


# ---------------------------------------------------------------------------
# Objective kinds


class QuadraticToy:
    """J(w) = 0.5 ||w||^2, independent of data and hyperparameters."""

    def __init__(self, n_params, hyper_layout=None):
        self.n_params = n_params
        self.hyper_layout = hyper_layout

    def value(self, w, lam, t):
        return 0.5 * float(w @ w)

    def grad_w(self, w, lam, t):
        return w.copy()

    def hvp_w(self, w, lam, t, r):
        return r.copy()

    def cross_jvp(self, w, lam, t, q):
        return np.zeros_like(w)

    def cross_vjp(self, w, lam, t, alpha):
        return np.zeros_like(lam)

    def touched_hypers(self, t):
        return np.empty(0, dtype=np.int64)


class WeightedSoftmax:
    """Softmax regression with one weight per training example.

    J_t(w; lam) = (1/N) sum_{i in batch t} c_i * ce_i(w), where N is the
    full training-set size (so minibatch and full-batch formulations
    agree in expectation) and c is either the ``weight_segment`` slice of
    the hyper vector or a fixed constant vector.
    """

    def __init__(self, dataset: Dataset, hyper_layout: VectorLayout | None = None,
                 schedule: MinibatchSchedule | None = None,
                 weight_segment: str | None = "weights",
                 fixed_weights=None):
        if dataset.features is None or dataset.labels is None:
            raise ValueError("WeightedSoftmax needs features and integer labels")
        self.dataset = dataset
        self.n_classes = int(dataset.n_classes)
        self.n_features = dataset.n_features
        self.n_params = self.n_classes * (self.n_features + 1)
        self.schedule = schedule or full_batch_schedule(dataset.n)
        self.hyper_layout = hyper_layout
        self.weight_segment = weight_segment
        if weight_segment is not None:
            if hyper_layout is None or weight_segment not in hyper_layout:
                raise ValueError(f"hyper layout lacks segment {weight_segment!r}")
            if hyper_layout.length_of(weight_segment) != dataset.n:
                raise DimensionMismatchError(
                    f"segment {weight_segment!r} has length "
                    f"{hyper_layout.length_of(weight_segment)}, need one weight "
                    f"per example ({dataset.n})"
                )
            self.fixed_weights = None
        else:
            self.fixed_weights = (np.ones(dataset.n) if fixed_weights is None
                                  else np.asarray(fixed_weights, dtype=np.float64))
        self._scale = 1.0 / dataset.n
        self._cache = _BatchCache()

    def _weights(self, lam):
        if self.weight_segment is None:
            return self.fixed_weights
        return self.hyper_layout.get(lam, self.weight_segment)

    def _batch(self, t, w):
        def build():
            idx = self.schedule.indices(t)
            x = self.dataset.features[idx]
            y = self.dataset.labels[idx]
            g, p = _ce_grad_coefs(x, y, *unpack_linear(w, self.n_classes, self.n_features))
            return idx, x, y, g, p
        return self._cache.get(t, w, build)

    def value(self, w, lam, t):
        idx = self.schedule.indices(t)
        x = self.dataset.features[idx]
        y = self.dataset.labels[idx]
        losses = _ce_losses(x, y, *unpack_linear(w, self.n_classes, self.n_features))
        c = self._weights(lam)[idx]
        return ensure_finite_scalar(self._scale * float(c @ losses),
                                    "training objective", step=t)

    def grad_w(self, w, lam, t):
        idx, x, _, g, _ = self._batch(t, w)
        c = self._weights(lam)[idx]
        return self._scale * _assemble_wgrad(g * c[:, None], x)

    def hvp_w(self, w, lam, t, r):
        idx, x, _, _, p = self._batch(t, w)
        rmat, rb = unpack_linear(r, self.n_classes, self.n_features)
        u = x @ rmat.T + rb
        v = _gauss_newton_dirs(p, u)
        c = self._weights(lam)[idx]
        return self._scale * _assemble_wgrad(v * c[:, None], x)

    def cross_jvp(self, w, lam, t, q):
        if self.weight_segment is None:
            return np.zeros_like(w)
        idx, x, _, g, _ = self._batch(t, w)
        qb = self.hyper_layout.get(q, self.weight_segment)[idx]
        nz = np.nonzero(qb)[0]
        if nz.size == 0:
            return np.zeros_like(w)
        if nz.size == 1:
            # unit-direction case (B-column assembly): one example's
            # gradient, no batch-wide pass needed
            i = int(nz[0])
            return (self._scale * qb[i]) * pack_linear(np.outer(g[i], x[i]), g[i])
        return self._scale * _assemble_wgrad(g * qb[:, None], x)

    def cross_vjp(self, w, lam, t, alpha):
        out = np.zeros_like(lam)
        if self.weight_segment is None:
            return out
        idx, x, _, g, _ = self._batch(t, w)
        amat, ab = unpack_linear(alpha, self.n_classes, self.n_features)
        # alpha . grad(ce_i) for each batch example, in one pass
        per_example = ((x @ amat.T + ab) * g).sum(axis=1)
        seg = self.hyper_layout.slice_of(self.weight_segment)
        out[seg.start + idx] = self._scale * per_example
        return out

    def touched_hypers(self, t):
        if self.weight_segment is None:
            return np.empty(0, dtype=np.int64)
        seg = self.hyper_layout.slice_of(self.weight_segment)
        return np.sort(seg.start + self.schedule.indices(t))


class MultitaskLinear:
    """Softmax regression with a task-interaction penalty.

    The regularizer couples the per-class weight rows:

        reg(W) = sum_{j,k} C[j,k] ||w_j - w_k||^2 + sum_k rho_k ||w_k||^2

    with C symmetric nonnegative. C is stored as a full KxK hyper block
    but only the upper triangle is read (mirrored to the lower half), so
    symmetry holds structurally. ``coupling`` selects how C enters:
    "full" (K^2 hyper entries), "uniform" (a single shared entry a with
    C = a * ones), or "none" (C = 0, plain ridge softmax). ``rho`` is a
    scalar unless ``per_task_rho`` is set (one entry per class; used by
    the single-task grid baseline).

    The data term is the batch sum of cross-entropies scaled by
    batch/n so one full pass matches the full-batch objective.
    """

    def __init__(self, dataset: Dataset, hyper_layout: VectorLayout | None = None,
                 schedule: MinibatchSchedule | None = None,
                 coupling="full", coupling_segment: str | None = "coupling",
                 rho_segment: str | None = "rho",
                 fixed_coupling=None, fixed_rho=0.0, per_task_rho=False):
        if dataset.features is None or dataset.labels is None:
            raise ValueError("MultitaskLinear needs features and integer labels")
        if coupling not in ("full", "uniform", "none"):
            raise ValueError(f"unknown coupling mode {coupling!r}")
        self.dataset = dataset
        self.n_classes = int(dataset.n_classes)
        self.n_features = dataset.n_features
        self.n_params = self.n_classes * (self.n_features + 1)
        self.schedule = schedule or full_batch_schedule(dataset.n)
        self.hyper_layout = hyper_layout
        self.coupling = coupling
        self.coupling_segment = coupling_segment if coupling != "none" else None
        self.rho_segment = rho_segment
        self.per_task_rho = per_task_rho

        k = self.n_classes
        if self.coupling_segment is not None:
            want = k * k if coupling == "full" else 1
            if hyper_layout is None or coupling_segment not in hyper_layout:
                raise ValueError(f"hyper layout lacks segment {coupling_segment!r}")
            if hyper_layout.length_of(coupling_segment) != want:
                raise DimensionMismatchError(
                    f"coupling segment must have length {want}, got "
                    f"{hyper_layout.length_of(coupling_segment)}"
                )
            self.fixed_coupling = None
        else:
            self.fixed_coupling = (np.zeros((k, k)) if fixed_coupling is None
                                   else np.asarray(fixed_coupling, dtype=np.float64))
        if rho_segment is not None:
            want = k if per_task_rho else 1
            if hyper_layout is None or rho_segment not in hyper_layout:
                raise ValueError(f"hyper layout lacks segment {rho_segment!r}")
            if hyper_layout.length_of(rho_segment) != want:
                raise DimensionMismatchError(
                    f"rho segment must have length {want}, got "
                    f"{hyper_layout.length_of(rho_segment)}"
                )
            self.fixed_rho = None
        else:
            self.fixed_rho = np.broadcast_to(
                np.asarray(fixed_rho, dtype=np.float64), (k,)
            ).copy()
        self._cache = _BatchCache()

    # -- hyper access -------------------------------------------------

    def _coupling_matrix(self, lam):
        k = self.n_classes
        if self.coupling == "none":
            return self.fixed_coupling if self.coupling_segment is None else np.zeros((k, k))
        if self.coupling_segment is None:
            raw = self.fixed_coupling
        elif self.coupling == "uniform":
            a = self.hyper_layout.get(lam, self.coupling_segment)[0]
            return np.full((k, k), a)
        else:
            raw = self.hyper_layout.get(lam, self.coupling_segment).reshape(k, k)
        upper = np.triu(raw)
        return upper + np.triu(raw, 1).T

    def _rho(self, lam):
        k = self.n_classes
        if self.rho_segment is None:
            return self.fixed_rho
        seg = self.hyper_layout.get(lam, self.rho_segment)
        return seg if self.per_task_rho else np.broadcast_to(seg, (k,))

    def regularizer(self, w, lam):
        """The penalty term alone, full-strength (no batch scaling)."""
        mat, _ = unpack_linear(w, self.n_classes, self.n_features)
        c = self._coupling_matrix(lam)
        sq = (mat * mat).sum(axis=1)
        d = sq[:, None] + sq[None, :] - 2.0 * (mat @ mat.T)
        return float((c * d).sum() + self._rho(lam) @ sq)

    def _reg_grad_mat(self, mat, c, rho):
        lap = np.diag(c.sum(axis=1)) - c
        return 4.0 * lap @ mat + 2.0 * rho[:, None] * mat

    # -- objective interface -------------------------------------------

    def _batch(self, t, w):
        def build():
            idx = self.schedule.indices(t)
            x = self.dataset.features[idx]
            y = self.dataset.labels[idx]
            g, p = _ce_grad_coefs(x, y, *unpack_linear(w, self.n_classes, self.n_features))
            return idx, x, y, g, p
        return self._cache.get(t, w, build)

    def _frac(self, t):
        return len(self.schedule.indices(t)) / self.dataset.n

    def value(self, w, lam, t):
        idx = self.schedule.indices(t)
        x = self.dataset.features[idx]
        y = self.dataset.labels[idx]
        data = float(_ce_losses(x, y, *unpack_linear(w, self.n_classes,
                                                     self.n_features)).sum())
        return ensure_finite_scalar(data + self._frac(t) * self.regularizer(w, lam),
                                    "training objective", step=t)

    def grad_w(self, w, lam, t):
        idx, x, _, g, _ = self._batch(t, w)
        out = _assemble_wgrad(g, x)
        mat, _ = unpack_linear(w, self.n_classes, self.n_features)
        reg = self._reg_grad_mat(mat, self._coupling_matrix(lam), self._rho(lam))
        out[: mat.size] += self._frac(t) * reg.ravel()
        return out

    def hvp_w(self, w, lam, t, r):
        idx, x, _, _, p = self._batch(t, w)
        rmat, rb = unpack_linear(r, self.n_classes, self.n_features)
        v = _gauss_newton_dirs(p, x @ rmat.T + rb)
        out = _assemble_wgrad(v, x)
        reg = self._reg_grad_mat(rmat, self._coupling_matrix(lam), self._rho(lam))
        out[: rmat.size] += self._frac(t) * reg.ravel()
        return out

    def cross_jvp(self, w, lam, t, q):
        mat, _ = unpack_linear(w, self.n_classes, self.n_features)
        k = self.n_classes
        acc = np.zeros_like(mat)
        if self.coupling_segment is not None:
            if self.coupling == "uniform":
                qa = self.hyper_layout.get(q, self.coupling_segment)[0]
                if qa != 0.0:
                    ones = np.full((k, k), qa)
                    acc += self._reg_grad_mat(mat, ones, np.zeros(k))
            else:
                qc = self.hyper_layout.get(q, self.coupling_segment).reshape(k, k)
                qeff = np.triu(qc) + np.triu(qc, 1).T
                if np.any(qeff):
                    acc += self._reg_grad_mat(mat, qeff, np.zeros(k))
        if self.rho_segment is not None:
            qr = self.hyper_layout.get(q, self.rho_segment)
            rho_dir = qr if self.per_task_rho else np.broadcast_to(qr, (k,))
            acc += 2.0 * rho_dir[:, None] * mat
        out = np.zeros_like(w)
        out[: mat.size] = self._frac(t) * acc.ravel()
        return out

    def cross_vjp(self, w, lam, t, alpha):
        mat, _ = unpack_linear(w, self.n_classes, self.n_features)
        amat, _ = unpack_linear(alpha, self.n_classes, self.n_features)
        k = self.n_classes
        frac = self._frac(t)
        out = np.zeros_like(lam)
        if self.coupling_segment is not None:
            seg = self.hyper_layout.slice_of(self.coupling_segment)
            if self.coupling == "uniform":
                val = 4.0 * (k * (amat * mat).sum()
                             - amat.sum(axis=0) @ mat.sum(axis=0))
                out[seg] = frac * val
            else:
                # d<alpha, grad_W reg>/dC[j,k] for stored upper entries:
                # 4 (a_j - a_k).(w_j - w_k)
                m = amat @ mat.T
                diag = np.diag(m)
                pair = diag[:, None] + diag[None, :] - m - m.T
                vals = np.triu(4.0 * pair, 1)
                out[seg] = frac * vals.ravel()
        if self.rho_segment is not None:
            seg = self.hyper_layout.slice_of(self.rho_segment)
            per_task = 2.0 * (amat * mat).sum(axis=1)
            out[seg] = frac * (per_task if self.per_task_rho else per_task.sum())
        return out

    def touched_hypers(self, t):
        pieces = []
        if self.coupling_segment is not None:
            pieces.append(self.hyper_layout.indices(self.coupling_segment))
        if self.rho_segment is not None:
            pieces.append(self.hyper_layout.indices(self.rho_segment))
        if not pieces:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(pieces)


# ---------------------------------------------------------------------------
# Validation errors


class QuadraticValidation:
    """E(w) = 0.5 ||w - center||^2 on the weight block."""

    def __init__(self, n_params, center=None):
        self.n_params = n_params
        self.center = (np.zeros(n_params) if center is None
                       else np.asarray(center, dtype=np.float64))

    def value(self, w):
        d = w - self.center
        return 0.5 * float(d @ d)

    def grad(self, w):
        return w - self.center


@dataclass
class DatasetValidation:
    """Average loss of the linear softmax model on a validation set.

    ``kind`` is "cross_entropy" (mean CE over the set) or "mse" (mean
    squared error between scores and one-hot targets). When
    ``subset_size`` is set, a fixed random subset drawn once from
    ``subset_seed`` is used instead of the full set, mirroring
    stream-mode evaluation on a sampled validation slice; the value is
    still deterministic given the seed.
    """

    dataset: Dataset
    kind: str = "cross_entropy"
    subset_size: int | None = None
    subset_seed: int = 0

    def __post_init__(self):
        if self.dataset.features is None or self.dataset.labels is None:
            raise ValueError("validation needs features and labels")
        if self.kind not in ("cross_entropy", "mse"):
            raise ValueError(f"unknown validation kind {self.kind!r}")
        self.n_classes = int(self.dataset.n_classes)
        self.n_features = self.dataset.n_features
        self.n_params = self.n_classes * (self.n_features + 1)
        if self.subset_size is not None and self.subset_size < self.dataset.n:
            rng = make_rng(self.subset_seed, 0x5B5E7)
            idx = rng.choice(self.dataset.n, size=self.subset_size, replace=False)
            self._x = self.dataset.features[np.sort(idx)]
            self._y = self.dataset.labels[np.sort(idx)]
        else:
            self._x = self.dataset.features
            self._y = self.dataset.labels

    def value(self, w):
        mat, bias = unpack_linear(w, self.n_classes, self.n_features)
        if self.kind == "cross_entropy":
            val = float(_ce_losses(self._x, self._y, mat, bias).mean())
        else:
            scores = self._x @ mat.T + bias
            resid = scores - _onehot(self._y, self.n_classes)
            val = float((resid * resid).sum() / len(self._y))
        return ensure_finite_scalar(val, "validation error")

    def grad(self, w):
        mat, bias = unpack_linear(w, self.n_classes, self.n_features)
        n = len(self._y)
        if self.kind == "cross_entropy":
            g, _ = _ce_grad_coefs(self._x, self._y, mat, bias)
            return _assemble_wgrad(g, self._x) / n
        scores = self._x @ mat.T + bias
        resid = scores - _onehot(self._y, self.n_classes)
        return _assemble_wgrad(2.0 * resid, self._x) / n

    def accuracy(self, w):
        mat, bias = unpack_linear(w, self.n_classes, self.n_features)
        pred = (self._x @ mat.T + bias).argmax(axis=1)
        return float((pred == self._y).mean())


def _onehot(y, k):
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def val_value(val, state, state_layout) -> float:
    """Validation error at a full optimization state (reads the w block)."""
    return val.value(state_layout.get(state, "w"))


def val_grad_state(val, state, state_layout) -> np.ndarray:
    """Row gradient of the validation error over the full state.

    Zero on every non-weight block (the error depends on weights only).
    """
    out = np.zeros_like(state)
    sl = state_layout.slice_of("w")
    out[sl] = val.grad(state[sl])
    return out


def accuracy_of(val, state, state_layout) -> float:
    return val.accuracy(state_layout.get(state, "w"))
