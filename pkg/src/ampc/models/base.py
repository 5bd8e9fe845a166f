"""Forward-model contract, evaluation ledger and caching wrapper."""

from __future__ import annotations

import hashlib
import json
import threading
from collections import Counter

import numpy as np

from ..errors import ForwardModelError, InputError

CHEAP = "cheap"
EXPENSIVE = "expensive"


class ForwardModel:
    """Pure map from an ``n_z`` parameter vector to ``n_d`` observations.

    Subclasses implement :meth:`_evaluate`.  Implementations must be
    deterministic and reentrant: the same input always gives a bitwise
    identical output and no call mutates shared state.
    """

    n_z: int
    n_d: int
    cost_class = EXPENSIVE

    def _evaluate(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        """JSON-able parameters that determine the model's outputs."""
        return {}

    @property
    def model_id(self) -> str:
        payload = json.dumps({"type": type(self).__name__, **self.config()}, sort_keys=True, default=str)
        return f"{type(self).__name__}-{hashlib.sha1(payload.encode()).hexdigest()[:12]}"

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_z,):
            raise InputError(f"{type(self).__name__} expects {self.n_z} parameters, got shape {z.shape}")
        try:
            out = np.asarray(self._evaluate(z), dtype=float)
        except (ForwardModelError, InputError):
            raise
        except Exception as exc:
            raise ForwardModelError(f"{type(self).__name__} failed at {z.tolist()}: {exc}", point=z) from exc
        if not np.all(np.isfinite(out)):
            raise ForwardModelError(f"{type(self).__name__} returned non-finite output at {z.tolist()}", point=z)
        return out

    def evaluate_batch(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return np.array([self.evaluate(z) for z in Z]).reshape(len(Z), self.n_d)

    __call__ = evaluate


class EvaluationLedger:
    """Thread-safe count of high-fidelity evaluations by category."""

    def __init__(self):
        self._lock = threading.Lock()
        self.evaluations = Counter()
        self.cache_hits = Counter()

    def record(self, category, n=1):
        with self._lock:
            self.evaluations[category] += n

    def record_hit(self, category, n=1):
        with self._lock:
            self.cache_hits[category] += n

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self.evaluations.values())

    def count(self, category) -> int:
        with self._lock:
            return self.evaluations[category]

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "total": sum(self.evaluations.values()),
                "evaluations": dict(sorted(self.evaluations.items())),
                "cache_hits": dict(sorted(self.cache_hits.items())),
            }


class LedgeredModel(ForwardModel):
    """Counts (and for expensive models, caches) evaluations of ``model``.

    The cache is keyed by ``(model_id, point bytes)`` so it can be shared
    between wrappers of different models.
    """

    def __init__(self, model: ForwardModel, ledger: EvaluationLedger | None = None, cache: dict | None = None):
        self.model = model
        self.n_z = model.n_z
        self.n_d = model.n_d
        self.cost_class = model.cost_class
        self.ledger = ledger if ledger is not None else EvaluationLedger()
        self.use_cache = model.cost_class == EXPENSIVE
        self._cache = cache if cache is not None else {}
        self._lock = threading.Lock()
        self.category = "online"
        self._model_id = model.model_id

    def config(self):
        return self.model.config()

    @property
    def model_id(self):
        return self._model_id

    def _key(self, z):
        return (self._model_id, np.ascontiguousarray(z, dtype=float).tobytes())

    def evaluate(self, z, category=None) -> np.ndarray:
        category = category or self.category
        z = np.asarray(z, dtype=float)
        if self.use_cache:
            key = self._key(z)
            with self._lock:
                hit = self._cache.get(key)
            if hit is not None:
                self.ledger.record_hit(category)
                return hit.copy()
        out = self.model.evaluate(z)
        self.ledger.record(category)
        if self.use_cache:
            out.setflags(write=False)
            with self._lock:
                self._cache[key] = out
            return out.copy()
        return out

    __call__ = evaluate

    def evaluate_batch(self, Z, category=None) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return np.array([self.evaluate(z, category) for z in Z]).reshape(len(Z), self.n_d)

    def is_cached(self, z) -> bool:
        with self._lock:
            return self._key(np.asarray(z, dtype=float)) in self._cache


def ledgered(model, ledger=None):
    """Wrap ``model`` unless it already is a :class:`LedgeredModel`."""
    if isinstance(model, LedgeredModel):
        return model
    return LedgeredModel(model, ledger)


class FunctionModel(ForwardModel):
    """Adapter turning a plain callable into a :class:`ForwardModel`."""

    def __init__(self, fn, n_z, n_d, name="function", cost_class=CHEAP, params=None):
        self.fn = fn
        self.n_z = n_z
        self.n_d = n_d
        self.name = name
        self.cost_class = cost_class
        self.params = params or {}

    def config(self):
        return {"name": self.name, "n_z": self.n_z, "n_d": self.n_d, **self.params}

    def _evaluate(self, z):
        return np.atleast_1d(self.fn(z))
