"""The driven, decaying qutrit and experiment configuration files."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .dynamics import ControlGrid, SystemModel
from .operators import ConstraintSpec, CoherencePair, DecoherenceChannel, DensityMatrix
from .pmp import SolverConfig

MODES = ("free", "constant_control", "optimize")


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    pass


class MissingField(ConfigError):
    """A section is present but lacks the key that gives it meaning."""


class ValidationError(ConfigError):
    def __init__(self, message: str, fields: tuple[str, ...] = ()):
        super().__init__(message)
        self.fields = fields


@dataclass(frozen=True)
class QutritParams:
    e0: float = 1.0
    e1: float = 1.5
    e2: float = 2.0
    gamma0: float = 0.1
    gamma1: float = 0.001
    gamma_d: float = 0.005
    omega_d: float = 0.1
    phi_d: float = math.pi / 2

    def __post_init__(self):
        for name in ("gamma0", "gamma1", "gamma_d"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"qutrit.{name} must be a finite non-negative rate, got {v}", (f"qutrit.{name}",))


def ket(i: int, dim: int = 3) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=complex)
    v[i, 0] = 1.0
    return v


def _proj(i, j, dim=3):
    return ket(i, dim) @ ket(j, dim).conj().T


def qutrit_drift(p: QutritParams) -> np.ndarray:
    """Drift Hamiltonian written as population differences; traceless."""
    p00, p11, p22 = _proj(0, 0), _proj(1, 1), _proj(2, 2)
    return (
        (p.e2 - p.e0) / 3 * (p22 - p00)
        + (p.e2 - p.e1) / 3 * (p22 - p11)
        + (p.e0 - p.e1) / 3 * (p00 - p11)
    )


def qutrit_channel(p: QutritParams) -> DecoherenceChannel:
    """Decay |2> -> |0>, decay |2> -> |1>, and 0-1 dephasing, in that order."""
    ops = [_proj(0, 2), _proj(1, 2), _proj(0, 0) - _proj(1, 1)]
    return DecoherenceChannel(np.array(ops), np.array([p.gamma0, p.gamma1, p.gamma_d]))


@dataclass(frozen=True)
class _DipoleEnvelope:
    """``(e^{i phi} |0><1| + h.c.) cos(omega t)``; picklable, unlike a closure."""

    omega: float
    phase: float

    def __call__(self, t: float) -> np.ndarray:
        c = math.cos(self.omega * t)
        out = np.zeros((3, 3), dtype=complex)
        out[0, 1] = np.exp(1j * self.phase) * c
        out[1, 0] = np.exp(-1j * self.phase) * c
        return out


def build_qutrit(params: QutritParams) -> SystemModel:
    return SystemModel(
        h0=qutrit_drift(params),
        channel=qutrit_channel(params),
        hc_envelope=_DipoleEnvelope(params.omega_d, params.phi_d),
    )


DEFAULT_RHO0 = np.array(
    [
        [0.21, 0.195 - 0.195j, 0.0],
        [0.195 + 0.195j, 0.78, 0.0],
        [0.0, 0.0, 0.01],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class GridSpec:
    t0: float = 0.0
    tf: float = 20.0
    steps: int = 1000
    u0: float = 0.0

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValidationError(f"grid.tf ({self.tf}) must exceed grid.t0 ({self.t0})", ("grid.t0", "grid.tf"))
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError(f"grid.steps must be a positive integer, got {self.steps}", ("grid.steps",))

    def control_grid(self, value: float | None = None) -> ControlGrid:
        return ControlGrid.constant(self.t0, self.tf, int(self.steps), self.u0 if value is None else value)


@dataclass(frozen=True)
class ExperimentConfig:
    qutrit: QutritParams = field(default_factory=QutritParams)
    rho0: DensityMatrix = field(default_factory=lambda: DensityMatrix(DEFAULT_RHO0))
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(ConstraintSpec.from_coherence_bounds(0.550, 0.553))
    )
    mode: str = "optimize"
    constant_amplitude: float = 0.1
    output_dir: Path = Path("out")

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}", ("mode",))

    def model(self) -> SystemModel:
        return build_qutrit(self.qutrit)


def paper_defaults() -> ExperimentConfig:
    """The qutrit experiment setup: rates, energies, drive, horizon and the coherence band."""
    return ExperimentConfig()


# -- config files --------------------------------------------------------------

_SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"constraint"}


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ParseError(f"[{name}] must be a table")
    return sec


def _reject_unknown(sec: dict, allowed, prefix: str):
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ValidationError(f"unknown keys: {', '.join(prefix + '.' + k for k in extra)}", tuple(prefix + "." + k for k in extra))


def _parse_rho0(value) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"state.rho0 must be rows of [re, im] pairs: {exc}", ("state.rho0",)) from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(
            f"state.rho0 must be an N x N array of [re, im] pairs, got shape {arr.shape}", ("state.rho0",)
        )
    return arr[..., 0] + 1j * arr[..., 1]


def config_from_dict(doc: dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed config document; missing keys fall back to the defaults."""
    base = paper_defaults()
    _reject_unknown(doc, {"mode", "output_dir", "qutrit", "grid", "solver", "constraint", "state", "control"}, "")

    q = _section(doc, "qutrit")
    _reject_unknown(q, {f.name for f in fields(QutritParams)}, "qutrit")
    qutrit = replace(base.qutrit, **{k: float(v) for k, v in q.items()})

    g = _section(doc, "grid")
    _reject_unknown(g, {f.name for f in fields(GridSpec)}, "grid")
    grid = replace(base.grid, **g)

    c = _section(doc, "constraint")
    _reject_unknown(c, {"alpha", "beta", "on", "pairs"}, "constraint")
    on = c.get("on", "coherence")
    if on not in ("coherence", "coherence_squared"):
        raise ValidationError(f"constraint.on must be 'coherence' or 'coherence_squared', got {on!r}", ("constraint.on",))
    default_lo, default_hi = (0.550, 0.553) if on == "coherence" else (0.550**2, 0.553**2)
    lo, hi = float(c.get("alpha", default_lo)), float(c.get("beta", default_hi))
    if not (0 <= lo < hi):
        raise ValidationError(
            f"constraint.alpha ({lo}) must be non-negative and below constraint.beta ({hi})",
            ("constraint.alpha", "constraint.beta"),
        )
    pairs = tuple(CoherencePair(*p) for p in c.get("pairs", [(0, 1)]))
    for p in pairs:
        if not (0 <= p.j < p.k < 3):
            raise ValidationError(f"constraint.pairs entry {tuple(p)} is not a valid qutrit pair", ("constraint.pairs",))
    constraint = (
        ConstraintSpec.from_coherence_bounds(lo, hi, pairs) if on == "coherence" else ConstraintSpec(lo, hi, pairs)
    )

    s = _section(doc, "solver")
    _reject_unknown(s, _SOLVER_KEYS, "solver")
    try:
        solver = replace(base.solver, constraint=constraint, **s)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"solver: {exc}", tuple("solver." + k for k in s)) from None

    st = _section(doc, "state")
    _reject_unknown(st, {"rho0"}, "state")
    if "state" in doc and "rho0" not in st:
        raise MissingField("[state] given without state.rho0")
    rho0 = base.rho0
    if "rho0" in st:
        try:
            rho0 = DensityMatrix(_parse_rho0(st["rho0"]))
        except ValidationError:
            raise
        except ValueError as exc:
            raise ValidationError(f"state.rho0: {exc}", ("state.rho0",)) from None
        if rho0.dim != 3:
            raise ValidationError(f"state.rho0 must be 3 x 3 for the qutrit, got {rho0.dim}", ("state.rho0",))

    ctl = _section(doc, "control")
    _reject_unknown(ctl, {"amplitude"}, "control")
    amplitude = float(ctl.get("amplitude", base.constant_amplitude))

    return ExperimentConfig(
        qutrit=qutrit,
        rho0=rho0,
        grid=grid,
        solver=solver,
        mode=doc.get("mode", base.mode),
        constant_amplitude=amplitude,
        output_dir=Path(doc.get("output_dir", base.output_dir)),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(doc)
