"""Canonical dataset / training-config / inference-record formats.

A dataset's identity is the digest of its canonical CSV bytes; a config's
identity is the digest of its canonical JSON. Loaders re-canonicalize loose
input, so the digest always names the canonical form. Feature values are
quantized to the 6-fractional-digit decimal rule on construction, which makes
the in-memory floats exactly the values a round trip through the file yields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import ConfigError, DomainError
from ..hashcore import (
    Digest,
    canonicalize,
    decimal_string,
    hash_bytes,
    parse_canonical,
    parse_decimal_string,
)

ACTIVATIONS = ("tanh", "relu")
OPTIMIZERS = ("sgd", "adam")

_RESERVED_COLUMNS = ("label", "sensitive")


def _quantize(values: Iterable[float]) -> np.ndarray:
    return np.array([float(decimal_string(float(v))) for v in values], dtype=np.float64)


@dataclass(frozen=True)
class Dataset:
    """Tabular rows of (features, class label, sensitive group)."""

    schema: tuple[str, ...]
    features: np.ndarray  # (N, k) float64, canonical-quantized
    labels: np.ndarray  # (N,) int64
    sensitive: np.ndarray  # (N,) int64

    def __post_init__(self) -> None:
        for name in self.schema:
            if not name or any(c in name for c in ",\n\r") or name in _RESERVED_COLUMNS:
                raise DomainError(f"invalid feature name: {name!r}")
        if len(set(self.schema)) != len(self.schema):
            raise DomainError("duplicate feature names in schema")
        if self.features.ndim != 2 or self.features.shape[1] != len(self.schema):
            raise DomainError("feature arity does not match schema")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.sensitive.shape != (n,):
            raise DomainError("labels/sensitive length does not match row count")
        if n and self.labels.min() < 0:
            raise DomainError("labels must be nonnegative integers")

    @classmethod
    def from_rows(
        cls,
        schema: Sequence[str],
        features: Sequence[Sequence[float]],
        labels: Sequence[int],
        sensitive: Sequence[int],
    ) -> "Dataset":
        feats = np.array(
            [[float(decimal_string(float(v))) for v in row] for row in features],
            dtype=np.float64,
        ).reshape(len(features), len(schema))
        return cls(
            schema=tuple(schema),
            features=feats,
            labels=np.array(labels, dtype=np.int64),
            sensitive=np.array(sensitive, dtype=np.int64),
        )

    @property
    def num_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return len(self.schema)

    @property
    def num_classes(self) -> int:
        if self.num_rows == 0:
            return 0
        return int(self.labels.max()) + 1

    @property
    def groups(self) -> tuple[int, ...]:
        return tuple(sorted(set(int(z) for z in self.sensitive)))

    @property
    def canonical_bytes(self) -> bytes:
        lines = [",".join(self.schema + _RESERVED_COLUMNS)]
        for i in range(self.num_rows):
            cells = [decimal_string(float(v)) for v in self.features[i]]
            cells.append(str(int(self.labels[i])))
            cells.append(str(int(self.sensitive[i])))
            lines.append(",".join(cells))
        return ("\n".join(lines) + "\n").encode("utf-8")

    @property
    def digest(self) -> Digest:
        return hash_bytes(self.canonical_bytes)

    @classmethod
    def from_csv_bytes(cls, data: bytes) -> "Dataset":
        text = data.decode("utf-8")
        lines = [line for line in text.replace("\r\n", "\n").split("\n") if line != ""]
        if not lines:
            raise DomainError("empty CSV: missing header")
        header = lines[0].split(",")
        if len(header) < 3 or tuple(header[-2:]) != _RESERVED_COLUMNS:
            raise DomainError("CSV header must end with 'label,sensitive'")
        schema = tuple(header[:-2])
        features, labels, sensitive = [], [], []
        for lineno, line in enumerate(lines[1:], start=2):
            cells = line.split(",")
            if len(cells) != len(header):
                raise DomainError(f"CSV line {lineno}: expected {len(header)} cells, got {len(cells)}")
            features.append([parse_decimal_string(c) for c in cells[:-2]])
            labels.append(int(cells[-2]))
            sensitive.append(int(cells[-1]))
        return cls.from_rows(schema, features, labels, sensitive)

    @classmethod
    def from_csv_file(cls, path: str | Path) -> "Dataset":
        from ..hashcore import hash_file_once

        content, _ = hash_file_once(path)
        return cls.from_csv_bytes(content)

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_bytes(self.canonical_bytes)

    def replace_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(
            schema=self.schema,
            features=features,
            labels=self.labels.copy(),
            sensitive=self.sensitive.copy(),
        )


@dataclass(frozen=True)
class Architecture:
    """MLP layout: input width, hidden widths, class count, activation."""

    num_features: int
    num_classes: int
    hidden: tuple[int, ...]
    activation: str

    def __post_init__(self) -> None:
        if self.num_features < 1 or self.num_classes < 2:
            raise ConfigError("architecture needs num_features >= 1 and num_classes >= 2")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r} (supported: {ACTIVATIONS})")

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.num_features, *self.hidden, self.num_classes)

    def to_json_value(self) -> dict[str, Any]:
        return {
            "activation": self.activation,
            "hidden": list(self.hidden),
            "num_classes": self.num_classes,
            "num_features": self.num_features,
        }

    @classmethod
    def from_json_value(cls, value: dict[str, Any]) -> "Architecture":
        return cls(
            num_features=int(value["num_features"]),
            num_classes=int(value["num_classes"]),
            hidden=tuple(int(h) for h in value["hidden"]),
            activation=value["activation"],
        )

    @property
    def canonical_bytes(self) -> bytes:
        return canonicalize(self.to_json_value())

    @property
    def digest(self) -> Digest:
        return hash_bytes(self.canonical_bytes)


@dataclass(frozen=True)
class TrainingConfig:
    architecture: Architecture
    epochs: int
    learning_rate: str  # decimal string, e.g. "0.001000"
    batch_size: int
    optimizer: str
    rng_seed: int

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r} (supported: {OPTIMIZERS})")
        if parse_decimal_string(self.learning_rate) <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be nonnegative")

    def to_json_value(self) -> dict[str, Any]:
        return {
            "architecture": self.architecture.to_json_value(),
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json_value(cls, value: dict[str, Any]) -> "TrainingConfig":
        try:
            return cls(
                architecture=Architecture.from_json_value(value["architecture"]),
                epochs=int(value["epochs"]),
                learning_rate=value["learning_rate"],
                batch_size=int(value["batch_size"]),
                optimizer=value["optimizer"],
                rng_seed=int(value["rng_seed"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed training config: {exc}") from exc

    @classmethod
    def from_json_bytes(cls, data: bytes) -> "TrainingConfig":
        return cls.from_json_value(parse_canonical(data))

    @property
    def canonical_bytes(self) -> bytes:
        return canonicalize(self.to_json_value())

    @property
    def digest(self) -> Digest:
        return hash_bytes(self.canonical_bytes)


@dataclass(frozen=True)
class InferenceRecord:
    """One inference: input features, per-class scores, chosen class.

    The predicted class is the argmax of the quantized score strings with
    ties broken toward the lowest class index, so the record is checkable
    from its serialized form alone.
    """

    features: tuple[float, ...]
    predicted_class: int
    scores: tuple[str, ...] = field(default_factory=tuple)

    def input_json_value(self) -> dict[str, Any]:
        return {"features": [decimal_string(v) for v in self.features]}

    def output_json_value(self) -> dict[str, Any]:
        return {"predicted_class": self.predicted_class, "scores": list(self.scores)}

    @property
    def input_digest(self) -> Digest:
        return hash_bytes(canonicalize(self.input_json_value()))

    @property
    def output_digest(self) -> Digest:
        return hash_bytes(canonicalize(self.output_json_value()))


def canonical_input_digest(features: Sequence[float]) -> Digest:
    """Digest of the canonical serialization of a bare input vector."""
    return hash_bytes(canonicalize({"features": [decimal_string(float(v)) for v in features]}))
