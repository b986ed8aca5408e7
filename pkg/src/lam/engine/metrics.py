"""Measured quantities: accuracy, demographic parity, robust accuracy, and
distributional properties. Counts are exact integers; every reported ratio is
the half-even 6-decimal formatting of its numerator/denominator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import DomainError
from ..hashcore import ratio_string
from .data import Dataset
from .model import Model, predicted_classes


@dataclass(frozen=True)
class MetricValue:
    metric: str  # accuracy | demographic_parity | robust_accuracy
    value: str
    numerator: int | None = None
    denominator: int | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    def to_json_value(self) -> dict[str, Any]:
        entry: dict[str, Any] = {"type": self.metric, "value": self.value}
        if self.numerator is not None:
            entry["numerator"] = self.numerator
            entry["denominator"] = self.denominator
        if self.parameters:
            entry["parameters"] = dict(self.parameters)
        return entry


@dataclass(frozen=True)
class DistributionalProperty:
    """Exact group counts, marginal or conditional on the class label."""

    kind: str  # "marginal" | "conditional"
    total: int
    counts: dict[str, int]  # marginal: group -> count
    ratios: dict[str, str]
    by_label: dict[str, dict[str, Any]] = field(default_factory=dict)  # conditional only

    def to_json_value(self) -> dict[str, Any]:
        value: dict[str, Any] = {"kind": self.kind, "total": self.total}
        if self.kind == "marginal":
            value["counts"] = dict(self.counts)
            value["ratios"] = dict(self.ratios)
        else:
            value["by_label"] = {
                label: {
                    "counts": dict(entry["counts"]),
                    "ratios": dict(entry["ratios"]),
                    "total": entry["total"],
                }
                for label, entry in self.by_label.items()
            }
        return value


def accuracy(model: Model, dataset: Dataset) -> MetricValue:
    """Fraction of rows whose predicted class equals the label."""
    if dataset.num_rows == 0:
        raise DomainError("accuracy undefined on an empty dataset")
    preds = predicted_classes(model, dataset.features)
    correct = int((preds == dataset.labels).sum())
    n = dataset.num_rows
    return MetricValue(
        metric="accuracy",
        value=ratio_string(correct, n),
        numerator=correct,
        denominator=n,
    )


def robust_accuracy(model: Model, d_rob: Dataset, epsilon: str | None = None) -> MetricValue:
    """Accuracy over an adversarially perturbed dataset."""
    base = accuracy(model, d_rob)
    params = {"epsilon": epsilon} if epsilon is not None else {}
    return MetricValue(
        metric="robust_accuracy",
        value=base.value,
        numerator=base.numerator,
        denominator=base.denominator,
        parameters=params,
    )


def demographic_parity(model: Model, dataset: Dataset) -> MetricValue:
    """|P(pred = 0 | z = 0) - P(pred = 0 | z = 1)|, computed exactly.

    Groups 0 and 1 must both be present; other group values are ignored.
    Per-group numerators and denominators are kept in parameters.
    """
    if dataset.num_rows == 0:
        raise DomainError("demographic parity undefined on an empty dataset")
    preds = predicted_classes(model, dataset.features)
    rates: dict[int, tuple[int, int]] = {}
    for group in (0, 1):
        mask = dataset.sensitive == group
        denom = int(mask.sum())
        if denom == 0:
            raise DomainError(f"demographic parity needs group {group} nonempty")
        num = int(((preds == 0) & mask).sum())
        rates[group] = (num, denom)
    (n0, d0), (n1, d1) = rates[0], rates[1]
    return MetricValue(
        metric="demographic_parity",
        value=ratio_string(abs(n0 * d1 - n1 * d0), d0 * d1),
        parameters={
            "group0_numerator": n0,
            "group0_denominator": d0,
            "group1_numerator": n1,
            "group1_denominator": d1,
        },
    )


def distribution(dataset: Dataset, kind: str) -> DistributionalProperty:
    """Exact counts of the sensitive attribute, marginal or conditional on y."""
    if dataset.num_rows == 0:
        raise DomainError("distribution undefined on an empty dataset")
    if kind not in ("marginal", "conditional"):
        raise DomainError(f"unknown distribution kind {kind!r}")
    n = dataset.num_rows
    if kind == "marginal":
        counts: dict[str, int] = {}
        for z in dataset.sensitive:
            key = str(int(z))
            counts[key] = counts.get(key, 0) + 1
        ratios = {g: ratio_string(c, n) for g, c in counts.items()}
        return DistributionalProperty(kind="marginal", total=n, counts=counts, ratios=ratios)

    by_label: dict[str, dict[str, Any]] = {}
    for y, z in zip(dataset.labels, dataset.sensitive):
        label = str(int(y))
        entry = by_label.setdefault(label, {"counts": {}, "total": 0})
        key = str(int(z))
        entry["counts"][key] = entry["counts"].get(key, 0) + 1
        entry["total"] += 1
    for entry in by_label.values():
        entry["ratios"] = {g: ratio_string(c, entry["total"]) for g, c in entry["counts"].items()}
    return DistributionalProperty(kind="conditional", total=n, counts={}, ratios={}, by_label=by_label)
