"""Density-dependent jump processes and their drifts.

A model has ``k`` density coordinates ``x1..xk`` living in a closed box.
Each jump adds an integer vector ``delta`` to the particle counts and fires
at rate ``n * q(x)``, so the scaled state moves by ``delta / n``.

All drift functions accept a single state of shape ``(k,)`` or a batch of
shape ``(N, k)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyJumps,
    MissingParam,
    NegativeRate,
    OutOfDomain,
    SchemaError,
    UnknownModel,
)
from .expr import ExprAst, SymbolTable, evaluate, free_variables, parse_expression, to_source

RATE_TOLERANCE = 1e-12
DOMAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DomainBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise SchemaError("domain bounds must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise SchemaError("domain must be bounded")
        if np.any(lower >= upper):
            raise SchemaError("domain needs lower < upper on every axis")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, k: int) -> "DomainBox":
        return cls(np.zeros(k), np.ones(k))

    @property
    def k(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, tol: float = DOMAIN_TOLERANCE):
        """Closed-box membership; vectorised over leading axes."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def grid(self, resolution: int, inset=0.0) -> np.ndarray:
        """Tensor grid with ``resolution`` points per axis, shape ``(resolution**k, k)``."""
        inset = np.broadcast_to(np.asarray(inset, dtype=float), (self.k,))
        axes = [np.linspace(lo + d, hi - d, resolution)
                for lo, hi, d in zip(self.lower, self.upper, inset)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


@dataclass(frozen=True)
class JumpSpec:
    delta: tuple[int, ...]
    rate: ExprAst

    @property
    def delta_array(self) -> np.ndarray:
        return np.asarray(self.delta, dtype=float)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    k: int
    params: Mapping[str, float]
    jumps: tuple[JumpSpec, ...]
    domain: DomainBox
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if not self.jumps:
            raise EmptyJumps("model has no jumps")
        if self.domain.k != self.k:
            raise SchemaError(f"domain has dimension {self.domain.k}, expected {self.k}")
        symbols = self.symbols
        for j, jump in enumerate(self.jumps):
            if len(jump.delta) != self.k:
                raise SchemaError(f"jump {j}: delta has length {len(jump.delta)}, expected {self.k}")
            if not any(jump.delta):
                raise SchemaError(f"jump {j}: delta is zero")
            unknown = free_variables(jump.rate) - set(symbols.states) - set(self.params)
            if unknown:
                raise SchemaError(f"jump {j}: undeclared names {sorted(unknown)}")
        deltas = np.array([j.delta for j in self.jumps], dtype=float)
        deltas.setflags(write=False)
        object.__setattr__(self, "_deltas", deltas)

    @property
    def symbols(self) -> SymbolTable:
        return SymbolTable.for_dimension(self.k, self.params)

    @property
    def deltas(self) -> np.ndarray:
        """Integer jump vectors as a float array of shape ``(J, k)``."""
        return self._deltas

    def _bindings(self, x):
        env = dict(self.params)
        for i in range(self.k):
            env[f"x{i + 1}"] = x[..., i]
        return env

    def rates(self, x) -> np.ndarray:
        """Density rates ``q_j(x)``, shape ``x.shape[:-1] + (J,)``.

        Slightly negative values (round-off near a boundary) are clamped to 0.
        """
        x = np.asarray(x, dtype=float)
        env = self._bindings(x)
        shape = x.shape[:-1]
        out = np.empty(shape + (len(self.jumps),))
        for j, jump in enumerate(self.jumps):
            out[..., j] = evaluate(jump.rate, env)
        if np.any(np.isnan(out)) or np.any(out < -RATE_TOLERANCE):
            bad = np.nanmin(out) if not np.all(np.isnan(out)) else float("nan")
            raise NegativeRate(f"rate evaluated to {bad!r}")
        return np.maximum(out, 0.0)

    def check_domain(self, x):
        if not np.all(self.domain.contains(x)):
            raise OutOfDomain("state outside the model domain")

    def to_document(self) -> dict:
        return {
            "k": self.k,
            "domain": {"lower": self.domain.lower.tolist(), "upper": self.domain.upper.tolist()},
            "params": dict(self.params),
            "jumps": [{"delta": list(j.delta), "rate": to_source(j.rate)} for j in self.jumps],
        }


def _check_rates_on_grid(model: ModelSpec, max_points: int = 4096):
    per_axis = min(11, max(2, int(max_points ** (1.0 / model.k))))
    try:
        model.rates(model.domain.grid(per_axis))
    except NegativeRate as exc:
        raise SchemaError(f"rate is negative inside the domain: {exc}") from exc


def _as_number(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{what} must be a number")
    return float(value)


def model_from_document(doc: Mapping, name: str = "custom") -> ModelSpec:
    if not isinstance(doc, Mapping):
        raise SchemaError("model document must be a JSON object")
    for key in ("k", "domain", "params", "jumps"):
        if key not in doc:
            raise SchemaError(f"missing field {key!r}")
    k = doc["k"]
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise SchemaError("k must be a positive integer")
    domain = doc["domain"]
    if not isinstance(domain, Mapping) or "lower" not in domain or "upper" not in domain:
        raise SchemaError("domain needs 'lower' and 'upper'")
    lower, upper = domain["lower"], domain["upper"]
    if not isinstance(lower, list) or not isinstance(upper, list):
        raise SchemaError("domain bounds must be lists")
    if len(lower) != k or len(upper) != k:
        raise SchemaError(f"domain bounds must have length {k}")
    box = DomainBox([_as_number(v, "domain bound") for v in lower],
                    [_as_number(v, "domain bound") for v in upper])
    params = doc["params"]
    if not isinstance(params, Mapping):
        raise SchemaError("params must be an object")
    params = {str(key): _as_number(v, f"param {key}") for key, v in params.items()}
    jumps_doc = doc["jumps"]
    if not isinstance(jumps_doc, list):
        raise SchemaError("jumps must be a list")
    if not jumps_doc:
        raise EmptyJumps("model has no jumps")
    try:
        symbols = SymbolTable.for_dimension(k, params)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    jumps = []
    for j, entry in enumerate(jumps_doc):
        if not isinstance(entry, Mapping) or "delta" not in entry or "rate" not in entry:
            raise SchemaError(f"jump {j} needs 'delta' and 'rate'")
        delta = entry["delta"]
        if not isinstance(delta, list) or not all(
                isinstance(d, int) and not isinstance(d, bool) for d in delta):
            raise SchemaError(f"jump {j}: delta must be a list of integers")
        if len(delta) != k:
            raise SchemaError(f"jump {j}: delta has length {len(delta)}, expected {k}")
        if not isinstance(entry["rate"], str):
            raise SchemaError(f"jump {j}: rate must be a string")
        jumps.append(JumpSpec(tuple(delta), parse_expression(entry["rate"], symbols)))
    model = ModelSpec(k, params, tuple(jumps), box, name=name)
    _check_rates_on_grid(model)
    return model


def load_model(document: str) -> ModelSpec:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return model_from_document(doc)


_BUILTINS = {
    "sis": {
        "k": 1,
        "params": ("beta", "gamma"),
        "jumps": [([1], "beta*x1*(1-x1)"), ([-1], "gamma*x1")],
    },
    # coordinates: male susceptible, male infected, female susceptible, female infected
    "bipartite_si": {
        "k": 4,
        "params": ("bm", "bf"),
        "jumps": [([-1, 1, 0, 0], "bm*x4*x1"), ([0, 0, -1, 1], "bf*x2*x3")],
    },
    "pure_death": {
        "k": 1,
        "params": ("gamma",),
        "jumps": [([-1], "gamma*x1")],
    },
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str, params: Mapping[str, float]) -> ModelSpec:
    """One of the built-in models on the unit box."""
    try:
        template = _BUILTINS[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    for p in template["params"]:
        if p not in params:
            raise MissingParam(f"model {name!r} needs parameter {p!r}")
    extra = set(params) - set(template["params"])
    if extra:
        raise SchemaError(f"unexpected parameters for {name!r}: {sorted(extra)}")
    k = template["k"]
    doc = {
        "k": k,
        "domain": {"lower": [0.0] * k, "upper": [1.0] * k},
        "params": {p: float(params[p]) for p in template["params"]},
        "jumps": [{"delta": d, "rate": r} for d, r in template["jumps"]],
    }
    return model_from_document(doc, name=name)


def _prepare(model: ModelSpec, n, x):
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.k:
        raise ValueError(f"state has dimension {x.shape[-1]}, expected {model.k}")
    model.check_domain(x)
    return x


def drift_m1(model: ModelSpec, n: int, x) -> np.ndarray:
    """Expected instantaneous change of the scaled state; independent of ``n``."""
    x = _prepare(model, n, x)
    return model.rates(x) @ model.deltas


def drift_m2(model: ModelSpec, n: int, x):
    """Expected instantaneous change of the sum of squared coordinates."""
    x = _prepare(model, n, x)
    q = model.rates(x)
    deltas = model.deltas
    # sum_j q_j * (2 delta_j . x + |delta_j|^2 / n)
    per_jump = 2.0 * (x @ deltas.T) + np.sum(deltas ** 2, axis=1) / n
    return np.sum(q * per_jump, axis=-1)


def jump_second_moment(model: ModelSpec, x):
    """``sum_j q_j(x) |delta_j|^2``; equals ``n * (m2n - m2bar)``."""
    x = np.asarray(x, dtype=float)
    model.check_domain(x)
    return model.rates(x) @ np.sum(model.deltas ** 2, axis=1)


def m1bar(model: ModelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    model.check_domain(x)
    return model.rates(x) @ model.deltas


def m2bar(model: ModelSpec, x):
    x = np.asarray(x, dtype=float)
    return np.sum(2.0 * m1bar(model, x) * x, axis=-1)


@dataclass(frozen=True)
class DriftEvaluators:
    m1n: Callable[[int, np.ndarray], np.ndarray]
    m2n: Callable[[int, np.ndarray], np.ndarray]
    m1bar: Callable[[np.ndarray], np.ndarray]
    m2bar: Callable[[np.ndarray], np.ndarray]


def limit_drifts(model: ModelSpec) -> DriftEvaluators:
    return DriftEvaluators(
        m1n=lambda n, x: drift_m1(model, n, x),
        m2n=lambda n, x: drift_m2(model, n, x),
        m1bar=lambda x: m1bar(model, x),
        m2bar=lambda x: m2bar(model, x),
    )


def parse_params(pairs: Sequence[str]) -> dict[str, float]:
    """``["beta=2", "gamma=1"]`` -> ``{"beta": 2.0, "gamma": 1.0}``."""
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise SchemaError(f"expected name=value, got {pair!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise SchemaError(f"parameter {key!r} is not a number: {value!r}") from None
    return out
