"""Non-Hermitian Bloch Hamiltonians on the Brillouin-zone torus.

Models are immutable and evaluate vectorised: ``model.matrix(kx, ky)`` accepts
broadcastable arrays and returns an array of shape ``broadcast + (n, n)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


def reduce_angle(k):
    """Reduce angles to [0, 2pi); handles the -0.0 -> 2pi rounding edge."""
    r = np.mod(k, TWO_PI)
    if np.ndim(r) == 0:
        return 0.0 if r >= TWO_PI else float(r)
    r = np.where(r >= TWO_PI, 0.0, r)
    return r


def wrap_delta(d):
    """Signed angular difference mapped to [-pi, pi)."""
    return np.mod(np.asarray(d) + np.pi, TWO_PI) - np.pi


def torus_distance(a, b) -> np.ndarray:
    """Euclidean distance between points on the torus (minimum over images).

    ``a`` and ``b`` are ``(..., 2)`` arrays or MomentumPoints.
    """
    a = np.asarray(a.as_array() if isinstance(a, MomentumPoint) else a, dtype=float)
    b = np.asarray(b.as_array() if isinstance(b, MomentumPoint) else b, dtype=float)
    d = wrap_delta(a - b)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class MomentumPoint:
    kx: float
    ky: float

    def __post_init__(self):
        object.__setattr__(self, "kx", reduce_angle(float(self.kx)))
        object.__setattr__(self, "ky", reduce_angle(float(self.ky)))

    def as_array(self) -> np.ndarray:
        return np.array([self.kx, self.ky])

    def distance(self, other) -> float:
        return float(torus_distance(self, other))


def _as_k(k) -> tuple[float, float]:
    if isinstance(k, MomentumPoint):
        return k.kx, k.ky
    kx, ky = k
    return float(kx), float(ky)


class BlochModel:
    """Base class. Subclasses implement :meth:`matrix`."""

    bands: int

    def matrix(self, kx, ky) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, k) -> np.ndarray:
        """H(k) as an ``(n, n)`` complex array. ``k`` is a MomentumPoint or pair."""
        kx, ky = _as_k(k)
        return self.matrix(np.float64(kx), np.float64(ky))

    def to_config(self) -> dict:
        raise NotImplementedError

    def __add__(self, other: "BlochModel") -> "SumModel":
        return SumModel((self, other), (1.0, 1.0))


def _pauli_form(dz, dx, h0=None, dx_lower=None):
    """Assemble [[h0+dz, dx], [dx_lower, h0-dz]] over broadcast arrays."""
    dz = np.asarray(dz, dtype=complex)
    dx = np.asarray(dx, dtype=complex)
    dx_lower = dx if dx_lower is None else np.asarray(dx_lower, dtype=complex)
    shape = np.broadcast_shapes(dz.shape, dx.shape, dx_lower.shape)
    out = np.empty(shape + (2, 2), dtype=complex)
    h0 = 0.0 if h0 is None else h0
    out[..., 0, 0] = h0 + dz
    out[..., 1, 1] = h0 - dz
    out[..., 0, 1] = dx
    out[..., 1, 0] = dx_lower
    return out


def _fa(params, kx, ky):
    (delta,) = params
    c = (1.0 - np.cos(kx)) + 0.5j + 0.0 * ky
    return _pauli_form(delta + 1j + 0.0 * c, c)


def _fc(params, kx, ky):
    a, b = params
    s = b * kx + a * ky
    ak = a * kx - b * ky
    dz = 3.0 - np.cos(s) - np.cos(ak)
    dx = np.sin(s) - 3j * (1.0 - np.cos(s))
    return _pauli_form(dz, dx)


def _test(params, kx, ky):
    (gamma,) = params
    return _pauli_form(np.sin(ky) + 1j * gamma, np.sin(kx) + 0.0 * ky)


def _check_fa(params):
    if len(params) != 1:
        raise ConfigurationError("FA takes one parameter: delta")


def _check_fc(params):
    if len(params) != 2 or any(p not in (0, 1) for p in params):
        raise ConfigurationError(f"FC takes two bits (a, b) in {{0, 1}}, got {params}")


def _check_test(params):
    if len(params) != 1:
        raise ConfigurationError("TEST takes one parameter: gamma")
    if params[0] < 0:
        raise ConfigurationError(f"TEST requires gamma >= 0, got {params[0]}")


# name -> (bands, evaluator, validator, param names)
BUILTINS = {
    "FA": (2, _fa, _check_fa, ("delta",)),
    "FC": (2, _fc, _check_fc, ("a", "b")),
    "TEST": (2, _test, _check_test, ("gamma",)),
}


@dataclass(frozen=True)
class BuiltinModel(BlochModel):
    name: str
    params: tuple

    def __post_init__(self):
        if self.name not in BUILTINS:
            raise ConfigurationError(
                f"unknown builtin {self.name!r}; known: {', '.join(sorted(BUILTINS))}")
        params = tuple(float(p) for p in self.params)
        if self.name == "FC":
            params = tuple(int(p) if float(p).is_integer() else p for p in params)
        BUILTINS[self.name][2](params)
        object.__setattr__(self, "params", params)

    @property
    def bands(self) -> int:
        return BUILTINS[self.name][0]

    def matrix(self, kx, ky):
        kx = np.asarray(kx, dtype=float)
        ky = np.asarray(ky, dtype=float)
        return BUILTINS[self.name][1](self.params, kx, ky)

    def to_config(self):
        return {"bands": self.bands, "builtin": {"name": self.name, "params": list(self.params)}}


def builtin_FA(delta: float) -> BuiltinModel:
    """Two-band model with a closed Fermi arc along ky at kx = 0 when delta = 0."""
    return BuiltinModel("FA", (delta,))


def builtin_FC(a: int, b: int) -> BuiltinModel:
    """Four-state Fermi-cut family; (a, b) in {0, 1}^2.

    The cut sits on s = b*kx + a*ky = pi, so the measured class is (m_x, m_y) = (b, a).
    """
    return BuiltinModel("FC", (a, b))


def builtin_TEST(gamma: float) -> BuiltinModel:
    """dx = sin kx off-diagonal, dz = sin ky + i*gamma diagonal; 8 EP2s for 0 < gamma < 1."""
    return BuiltinModel("TEST", (gamma,))


def builtin(name: str, params: Sequence[float]) -> BuiltinModel:
    return BuiltinModel(name, tuple(params))


@dataclass(frozen=True)
class HoppingTerm:
    displacement: tuple[int, int]
    amplitude: np.ndarray = field(compare=False)

    def __post_init__(self):
        rx, ry = self.displacement
        if int(rx) != rx or int(ry) != ry:
            raise ConfigurationError(f"displacement must be integer, got {self.displacement}")
        object.__setattr__(self, "displacement", (int(rx), int(ry)))
        amp = np.array(self.amplitude, dtype=complex)
        if amp.ndim != 2 or amp.shape[0] != amp.shape[1]:
            raise ConfigurationError(f"hopping amplitude at R={self.displacement} is not square: "
                                     f"shape {amp.shape}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)


@dataclass(frozen=True)
class HoppingModel(BlochModel):
    """H(k) = sum_R A_R exp(i k.R)."""

    bands: int
    terms: tuple[HoppingTerm, ...] = ()

    def __post_init__(self):
        if self.bands < 2:
            raise ConfigurationError(f"hopping models need at least 2 bands, got {self.bands}")
        terms = tuple(t if isinstance(t, HoppingTerm) else HoppingTerm(*t) for t in self.terms)
        for i, t in enumerate(terms):
            if t.amplitude.shape != (self.bands, self.bands):
                raise ConfigurationError(
                    f"hoppings[{i}]: amplitude shape {t.amplitude.shape} inconsistent with "
                    f"bands={self.bands}")
        object.__setattr__(self, "terms", terms)

    def matrix(self, kx, ky):
        kx = np.asarray(kx, dtype=float)
        ky = np.asarray(ky, dtype=float)
        shape = np.broadcast_shapes(kx.shape, ky.shape)
        out = np.zeros(shape + (self.bands, self.bands), dtype=complex)
        for t in self.terms:
            rx, ry = t.displacement
            phase = np.exp(1j * (kx * rx + ky * ry))
            out += np.asarray(phase)[..., None, None] * t.amplitude
        return out

    def to_config(self):
        return {"bands": self.bands, "hoppings": [
            {"R": list(t.displacement), "re": t.amplitude.real.tolist(),
             "im": t.amplitude.imag.tolist()} for t in self.terms]}


@dataclass(frozen=True)
class SumModel(BlochModel):
    """Weighted sum of models with equal band count (unit weights by default)."""

    parts: tuple[BlochModel, ...]
    weights: tuple[complex, ...] | None = None

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * len(self.parts))
        if len(self.parts) != len(self.weights) or not self.parts:
            raise ConfigurationError("SumModel needs one weight per part")
        n = {p.bands for p in self.parts}
        if len(n) != 1:
            raise ConfigurationError(f"cannot add models with band counts {sorted(n)}")

    @property
    def bands(self) -> int:
        return self.parts[0].bands

    def matrix(self, kx, ky):
        out = None
        for w, p in zip(self.weights, self.parts):
            if w == 0:
                continue
            term = w * p.matrix(kx, ky)
            out = term if out is None else out + term
        if out is None:
            return 0.0 * self.parts[0].matrix(kx, ky)
        return out

    def to_config(self):
        return {"bands": self.bands, "sum": [
            {"weight": [complex(w).real, complex(w).imag], "model": p.to_config()}
            for w, p in zip(self.weights, self.parts)]}


@dataclass(frozen=True)
class BlockModel(BlochModel):
    """Direct sum of models; a block may also be a constant square matrix or scalar."""

    blocks: tuple

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            if isinstance(b, BlochModel):
                blocks.append(b)
            else:
                m = np.atleast_2d(np.array(b, dtype=complex))
                if m.shape[0] != m.shape[1]:
                    raise ConfigurationError(f"constant block not square: {m.shape}")
                m.setflags(write=False)
                blocks.append(m)
        object.__setattr__(self, "blocks", tuple(blocks))
        if self.bands < 2:
            raise ConfigurationError("block model needs at least 2 bands")

    @staticmethod
    def _size(b):
        return b.bands if isinstance(b, BlochModel) else b.shape[0]

    @property
    def bands(self) -> int:
        return sum(self._size(b) for b in self.blocks)

    def matrix(self, kx, ky):
        kx = np.asarray(kx, dtype=float)
        ky = np.asarray(ky, dtype=float)
        shape = np.broadcast_shapes(kx.shape, ky.shape)
        out = np.zeros(shape + (self.bands, self.bands), dtype=complex)
        i = 0
        for b in self.blocks:
            m = self._size(b)
            out[..., i:i + m, i:i + m] = b.matrix(kx, ky) if isinstance(b, BlochModel) else b
            i += m
        return out

    def to_config(self):
        blocks = []
        for b in self.blocks:
            if isinstance(b, BlochModel):
                blocks.append(b.to_config())
            else:
                blocks.append({"constant": {"re": b.real.tolist(), "im": b.imag.tolist()}})
        return {"bands": self.bands, "blocks": blocks}


def random_trigonometric(bands: int, rng: np.random.Generator, sup_norm: float = 1.0,
                         reach: int = 1) -> HoppingModel:
    """Random hopping model with ``max_k ||H(k)||_2 <= sup_norm``.

    Terms cover |Rx|, |Ry| <= reach; the bound follows from sum_R ||A_R||_2.
    """
    disp = [(rx, ry) for rx in range(-reach, reach + 1) for ry in range(-reach, reach + 1)]
    amps = [rng.normal(size=(bands, bands)) + 1j * rng.normal(size=(bands, bands)) for _ in disp]
    total = sum(np.linalg.norm(a, 2) for a in amps)
    scale = sup_norm / total
    return HoppingModel(bands, tuple(HoppingTerm(r, a * scale) for r, a in zip(disp, amps)))


def sup_norm(model: BlochModel, grid: int = 64) -> float:
    """Sampled estimate of max_k ||H(k)||_2."""
    k = np.arange(grid) * TWO_PI / grid
    kx, ky = np.meshgrid(k, k, indexing="ij")
    return float(np.linalg.norm(model.matrix(kx, ky), ord=2, axis=(-2, -1)).max())


# --- config ingestion -------------------------------------------------------

def _complex_matrix(obj, where: str) -> np.ndarray:
    try:
        if isinstance(obj, Mapping):
            re = np.array(obj["re"], dtype=float)
            im = np.array(obj.get("im", np.zeros_like(re)), dtype=float)
            if re.shape != im.shape:
                raise ConfigurationError(f"{where}: re/im shapes differ {re.shape} vs {im.shape}")
            return re + 1j * im
        arr = np.array(obj, dtype=float)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            return arr[..., 0] + 1j * arr[..., 1]
        return arr.astype(complex)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{where}: cannot read complex matrix ({exc})") from exc


def _complex_scalar(obj, where: str) -> complex:
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        return complex(float(obj[0]), float(obj[1]))
    try:
        return complex(float(obj))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: expected number or [re, im], got {obj!r}") from exc


_MODEL_KEYS = {"bands", "builtin", "hoppings", "sum", "blocks"}


def parse_model(config: Mapping[str, Any] | str, where: str = "model") -> BlochModel:
    """Build a model from a config mapping (or JSON text).

    Exactly one of ``builtin``, ``hoppings``, ``sum`` or ``blocks`` defines the
    model, except that ``builtin`` and ``hoppings`` may be combined, in which
    case the hoppings are added on top of the builtin. See README for the schema.
    """
    if isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{where}: invalid JSON: {exc}") from exc
    if not isinstance(config, Mapping):
        raise ConfigurationError(f"{where}: expected an object, got {type(config).__name__}")
    unknown = set(config) - _MODEL_KEYS
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")

    bands = config.get("bands")
    parts = []
    if "builtin" in config:
        entry = config["builtin"]
        if isinstance(entry, str):
            entry = {"name": entry, "params": []}
        if not isinstance(entry, Mapping) or "name" not in entry:
            raise ConfigurationError(f"{where}.builtin: expected {{name, params}}")
        extra = set(entry) - {"name", "params"}
        if extra:
            raise ConfigurationError(f"{where}.builtin: unknown keys {sorted(extra)}")
        try:
            parts.append(BuiltinModel(str(entry["name"]), tuple(entry.get("params", ()))))
        except ConfigurationError as exc:
            raise ConfigurationError(f"{where}.builtin: {exc}") from exc
    if "hoppings" in config:
        terms = []
        hop = config["hoppings"]
        if not isinstance(hop, list):
            raise ConfigurationError(f"{where}.hoppings: expected a list")
        for i, h in enumerate(hop):
            loc = f"{where}.hoppings[{i}]"
            if not isinstance(h, Mapping) or "R" not in h:
                raise ConfigurationError(f"{loc}: expected {{R, re, im}} or {{R, amplitude}}")
            amp = h["amplitude"] if "amplitude" in h else {"re": h.get("re"), "im": h.get("im", None)}
            if isinstance(amp, Mapping) and amp.get("im") is None:
                amp = {"re": amp["re"]}
            mat = _complex_matrix(amp, loc)
            try:
                terms.append(HoppingTerm(tuple(h["R"]), mat))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"{loc}: {exc}") from exc
        n = bands if bands is not None else (terms[0].amplitude.shape[0] if terms else None)
        if n is None:
            raise ConfigurationError(f"{where}: empty hopping list needs explicit 'bands'")
        try:
            parts.append(HoppingModel(int(n), tuple(terms)))
        except ConfigurationError as exc:
            raise ConfigurationError(f"{where}: {exc}") from exc
    if "sum" in config:
        if parts:
            raise ConfigurationError(f"{where}: 'sum' cannot be combined with other definitions")
        models, weights = [], []
        for i, item in enumerate(config["sum"]):
            loc = f"{where}.sum[{i}]"
            if not isinstance(item, Mapping) or "model" not in item:
                raise ConfigurationError(f"{loc}: expected {{weight, model}}")
            weights.append(_complex_scalar(item.get("weight", 1.0), loc + ".weight"))
            models.append(parse_model(item["model"], loc + ".model"))
        parts.append(SumModel(tuple(models), tuple(weights)))
    if "blocks" in config:
        if parts:
            raise ConfigurationError(f"{where}: 'blocks' cannot be combined with other definitions")
        blocks = []
        for i, item in enumerate(config["blocks"]):
            loc = f"{where}.blocks[{i}]"
            if isinstance(item, Mapping) and "constant" in item:
                blocks.append(_complex_matrix(item["constant"], loc + ".constant"))
            else:
                blocks.append(parse_model(item, loc))
        parts.append(BlockModel(tuple(blocks)))
    if not parts:
        raise ConfigurationError(f"{where}: needs one of builtin, hoppings, sum, blocks")

    model = parts[0] if len(parts) == 1 else SumModel(tuple(parts), (1.0,) * len(parts))
    if bands is not None and int(bands) != model.bands:
        raise ConfigurationError(f"{where}: declared bands={bands} but definition has "
                                 f"{model.bands}")
    return model


def load_model(path: str | Path) -> BlochModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read model file {path}: {exc}") from exc
    return parse_model(text, where=str(path))
