"""Uniform prediction interface over the two attacked model families.

Both teachers expose hard labels and a probability distribution, and count
their own calls so tests can prove which information an attack consumed.
The DTW teacher memoizes distance matrices by input content because they
dominate runtime.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .data import Dataset
from .dtw import DistanceMatrix, dtw_pairwise, nn1_classify, soft_1nn
from .nn import Network, predict
from .util import readonly


class Teacher:
    kind = "?"

    def __init__(self):
        self.calls = {"predict_labels": 0, "predict_proba": 0}

    @property
    def num_classes(self) -> int:
        raise NotImplementedError

    def predict_labels(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FCNTeacher(Teacher):
    kind = "fcn"

    def __init__(self, model: Network):
        super().__init__()
        self.model = model

    @property
    def num_classes(self) -> int:
        return self.model.layers[-1].units

    def predict_labels(self, x):
        self.calls["predict_labels"] += 1
        _, probs = predict(self.model, _conv_input(x))
        return np.argmax(probs, axis=1)

    def predict_proba(self, x):
        self.calls["predict_proba"] += 1
        _, probs = predict(self.model, _conv_input(x))
        return probs


def _conv_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 1:
        x = x[None, :]
    return x[:, None, :]


class DTW1NNTeacher(Teacher):
    kind = "dtw1nn"

    def __init__(self, ref_values: np.ndarray, ref_labels: np.ndarray,
                 processes: int | None = None):
        super().__init__()
        self.ref_values = readonly(np.asarray(ref_values, dtype=np.float64))
        self.ref_labels = readonly(np.asarray(ref_labels, dtype=np.int64))
        if self.ref_values.ndim != 2 or self.ref_labels.shape[0] != self.ref_values.shape[0]:
            raise ValueError("reference values must be [M, T] with one label per row")
        self.processes = processes
        self._cache: dict[str, DistanceMatrix] = {}

    @classmethod
    def from_dataset(cls, dataset: Dataset, processes: int | None = None) -> "DTW1NNTeacher":
        return cls(dataset.values, dataset.labels, processes=processes)

    @property
    def num_classes(self) -> int:
        return int(self.ref_labels.max()) + 1

    def distance_matrix(self, x: np.ndarray) -> DistanceMatrix:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        key = hashlib.sha256(x.tobytes()).hexdigest()
        if key not in self._cache:
            values = dtw_pairwise(x, self.ref_values, processes=self.processes)
            self._cache[key] = DistanceMatrix(values=values, train_labels=self.ref_labels)
        return self._cache[key]

    def predict_labels(self, x):
        self.calls["predict_labels"] += 1
        return nn1_classify(self.distance_matrix(x))

    def predict_proba(self, x):
        self.calls["predict_proba"] += 1
        probs, _ = soft_1nn(self.distance_matrix(x))
        return probs
