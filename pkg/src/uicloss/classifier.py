from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearClassifier:
    """Decision rule sign(w @ x + b)."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        w.setflags(write=False)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("classifier parameters must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def theta(self) -> np.ndarray:
        return np.append(self.w, self.b)

    @classmethod
    def from_theta(cls, theta) -> "LinearClassifier":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:-1], theta[-1])

    def margin(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return (self.margin(X) > 0).astype(int)


def angle_between(u, v) -> float:
    """Angle in degrees between two direction vectors."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    # half-angle form stays accurate near 0 and 180 degrees, unlike arccos
    return float(np.degrees(2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v))))
