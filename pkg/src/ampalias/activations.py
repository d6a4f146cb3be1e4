"""Activation catalog with closed-form values and derivatives.

All functions operate elementwise on numpy arrays (scalars work too). At kinks
the right-hand derivative is returned.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace

import numpy as np

# Klambauer et al., "Self-Normalizing Neural Networks" (2017)
SELU_LAMBDA = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717
# Clevert et al. (2015) default
ELU_ALPHA = 1.0
# fixed, not learned
PRELU_SLOPE = 0.01


class Kind(str, enum.Enum):
    CustomTanh = "CustomTanh"
    Snake = "Snake"
    ReLUSquared = "ReLUSquared"
    ReLUSquaredDip = "ReLUSquaredDip"
    Swish = "Swish"
    Gaussian = "Gaussian"
    Sigmoid = "Sigmoid"
    Hardtanh = "Hardtanh"
    SELU = "SELU"
    ELU = "ELU"
    PReLU = "PReLU"
    Softsign = "Softsign"
    Mish = "Mish"
    Identity = "Identity"


ALPHA_KINDS = frozenset({Kind.CustomTanh, Kind.Snake, Kind.ReLUSquared, Kind.ReLUSquaredDip})
_KIND_BY_LOWER = {k.value.lower(): k for k in Kind}
_LABEL_RE = re.compile(r"^(True|False)_([A-Za-z]+)(?:_(.+))?$")


@dataclass(frozen=True)
class ActivationSpec:
    kind: Kind
    alpha: float = 1.0
    gated: bool = False

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, Kind) else _KIND_BY_LOWER[str(self.kind).lower()]
        object.__setattr__(self, "kind", kind)
        if kind in ALPHA_KINDS:
            alpha = float(self.alpha)
            if not (alpha > 0 and np.isfinite(alpha)):
                raise ValueError(f"{kind.value} needs a positive alpha, got {self.alpha}")
            object.__setattr__(self, "alpha", alpha)
        else:
            object.__setattr__(self, "alpha", 1.0)
        object.__setattr__(self, "gated", bool(self.gated))

    @property
    def label(self) -> str:
        return format_spec(self)

    def ungated(self) -> ActivationSpec:
        return replace(self, gated=False)

    def __str__(self):
        return self.label


def _format_alpha(alpha: float) -> str:
    return str(int(alpha)) if alpha.is_integer() else repr(alpha)


def format_spec(spec: ActivationSpec) -> str:
    """``{gated}_{Kind}[_{alpha}]``, e.g. ``False_CustomTanh_2``."""
    head = f"{spec.gated}_{spec.kind.value}"
    if spec.kind in ALPHA_KINDS:
        return f"{head}_{_format_alpha(spec.alpha)}"
    return head


def parse_spec(label: str) -> ActivationSpec:
    m = _LABEL_RE.match(label.strip())
    if m is None:
        raise ValueError(f"bad activation label {label!r}")
    gated, name, alpha = m.groups()
    kind = _KIND_BY_LOWER.get(name.lower())
    if kind is None:
        raise ValueError(f"unknown activation {name!r}")
    if alpha is not None:
        if kind not in ALPHA_KINDS:
            raise ValueError(f"{kind.value} takes no alpha")
        return ActivationSpec(kind, float(alpha), gated == "True")
    if kind in ALPHA_KINDS:
        raise ValueError(f"{kind.value} label needs an alpha, e.g. {gated}_{kind.value}_1")
    return ActivationSpec(kind, 1.0, gated == "True")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _eval(kind: Kind, a: float, x: np.ndarray) -> np.ndarray:
    if kind is Kind.CustomTanh:
        return np.tanh(x / a)
    if kind is Kind.Snake:
        return x + np.sin(a * x) ** 2 / a
    if kind is Kind.ReLUSquared:
        return a * np.maximum(x, 0.0) ** 2
    if kind is Kind.ReLUSquaredDip:
        return np.where(x >= 0, x * x, a * x * sigmoid(x))
    if kind is Kind.Swish:
        return x * sigmoid(x)
    if kind is Kind.Gaussian:
        return np.exp(-x * x)
    if kind is Kind.Sigmoid:
        return sigmoid(x)
    if kind is Kind.Hardtanh:
        return np.clip(x, -1.0, 1.0)
    if kind is Kind.SELU:
        return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    if kind is Kind.ELU:
        return np.where(x > 0, x, ELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    if kind is Kind.PReLU:
        return np.where(x >= 0, x, PRELU_SLOPE * x)
    if kind is Kind.Softsign:
        return x / (1.0 + np.abs(x))
    if kind is Kind.Mish:
        return x * np.tanh(np.logaddexp(0.0, x))
    if kind is Kind.Identity:
        return x.copy()
    raise AssertionError(kind)


def _grad(kind: Kind, a: float, x: np.ndarray) -> np.ndarray:
    if kind is Kind.CustomTanh:
        t = np.tanh(x / a)
        return (1.0 - t * t) / a
    if kind is Kind.Snake:
        return 1.0 + np.sin(2.0 * a * x)
    if kind is Kind.ReLUSquared:
        return 2.0 * a * np.maximum(x, 0.0)
    if kind is Kind.ReLUSquaredDip:
        s = sigmoid(x)
        return np.where(x >= 0, 2.0 * x, a * (s + x * s * (1.0 - s)))
    if kind is Kind.Swish:
        s = sigmoid(x)
        return s + x * s * (1.0 - s)
    if kind is Kind.Gaussian:
        return -2.0 * x * np.exp(-x * x)
    if kind is Kind.Sigmoid:
        s = sigmoid(x)
        return s * (1.0 - s)
    if kind is Kind.Hardtanh:
        return ((x >= -1.0) & (x < 1.0)).astype(np.float64)
    if kind is Kind.SELU:
        return SELU_LAMBDA * np.where(x >= 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))
    if kind is Kind.ELU:
        return np.where(x >= 0, 1.0, ELU_ALPHA * np.exp(np.minimum(x, 0.0)))
    if kind is Kind.PReLU:
        return np.where(x >= 0, 1.0, PRELU_SLOPE)
    if kind is Kind.Softsign:
        return 1.0 / (1.0 + np.abs(x)) ** 2
    if kind is Kind.Mish:
        t = np.tanh(np.logaddexp(0.0, x))
        return t + x * (1.0 - t * t) * sigmoid(x)
    if kind is Kind.Identity:
        return np.ones_like(x)
    raise AssertionError(kind)


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def evaluate(spec: ActivationSpec, x):
    """Value of the (ungated) nonlinearity at ``x``."""
    arr = np.asarray(x, dtype=np.float64)
    return _unwrap(x, _eval(spec.kind, spec.alpha, arr))


def grad(spec: ActivationSpec, x):
    """Analytic derivative of the (ungated) nonlinearity at ``x``."""
    arr = np.asarray(x, dtype=np.float64)
    return _unwrap(x, _grad(spec.kind, spec.alpha, arr))


def gated_eval(a, g, spec: ActivationSpec):
    """Act(a) * sigmoid(g), where a and g come from separate projections."""
    a_arr = np.asarray(a, dtype=np.float64)
    out = _eval(spec.kind, spec.alpha, a_arr) * sigmoid(np.asarray(g, dtype=np.float64))
    if np.ndim(a) == 0 and np.ndim(g) == 0:
        return float(out)
    return out


# alpha grid used for the parameterised families
ALPHA_GRID = (0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def catalog(alphas=(1.0,), gated=(False, True)) -> list:
    """Every kind, each alpha kind expanded over ``alphas``, times gating."""
    specs = []
    for g in gated:
        for kind in Kind:
            if kind in ALPHA_KINDS:
                specs.extend(ActivationSpec(kind, a, g) for a in alphas)
            else:
                specs.append(ActivationSpec(kind, 1.0, g))
    return specs
