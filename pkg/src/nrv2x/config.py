"""Scenario configuration: ``key=value`` text, intensity presets, derived slot units."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

from .errors import ParseError, ValidationError
from .queue_model import eta_from_geometry
from .scheduler import PoolGeometry, rc_bounds

PRESETS = {
    "high": dict(t_c_ms=30.0, t_avg_ms=10.0, t_d_ms=20.0, rri_ms=10.0),
    "low": dict(t_c_ms=100.0, t_avg_ms=50.0, t_d_ms=100.0, rri_ms=50.0),
}
PRESET_ALIASES = {"high": "high", "high_intensity": "high", "low": "low", "low_intensity": "low", "custom": "custom"}

CHOICES = {
    "traffic": ("cam+denm", "cam"),
    "idle_reading": ("p_arr", "mean_gap"),
    "collision_exponent": ("interferers", "printed"),
    "latency_mode": ("geometric", "literal"),
    "scheduler_form": ("consistent", "printed"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    preset: str = "high"
    t_c_ms: float = 30.0
    t_avg_ms: float = 10.0
    t_d_ms: float = 20.0
    delta_t_d_ms: float | None = None
    k: int = 3
    rri_ms: float = 10.0
    scs_khz: int = 30
    n_subch: int = 4
    rb_per_subch: int = 12
    rb_per_csr: int = 4
    keep_probability: float = 0.4
    density_per_km: float = 150.0
    range_km: float = 1.0
    n: int | None = None
    queue_capacity: int = 20
    t1_slots: int = 2
    t2_slots: int | None = None
    t3_slots: int = 5
    p_re: float | None = None
    p_csr: float | None = None
    eta: float | None = None
    r_l: int | None = None
    r_u: int | None = None
    tol: float = 1e-9
    max_iter: int = 10_000
    damping: float = 0.5
    traffic: str = "cam+denm"
    idle_reading: str = "p_arr"
    collision_exponent: str = "interferers"
    latency_mode: str = "geometric"
    scheduler_form: str = "consistent"
    reevaluation: bool = True

    # derived slot quantities

    @property
    def slots_per_ms(self) -> int:
        return self.scs_khz // 15

    def _slots(self, ms: float) -> int:
        return int(round(ms * self.slots_per_ms))

    @property
    def t_c(self) -> int:
        return self._slots(self.t_c_ms)

    @property
    def t_avg(self) -> int:
        return self._slots(self.t_avg_ms)

    @property
    def t_d(self) -> int:
        return self._slots(self.t_d_ms)

    @property
    def delta_t_d(self) -> int:
        return self._slots(self.t_d_ms if self.delta_t_d_ms is None else self.delta_t_d_ms)

    @property
    def rri(self) -> int:
        return self._slots(self.rri_ms)

    @property
    def t1(self) -> int:
        return self.t1_slots

    @property
    def t2(self) -> int:
        return self.rri if self.t2_slots is None else self.t2_slots

    @property
    def t3(self) -> int:
        return self.t3_slots

    @property
    def n_vehicles(self) -> int:
        if self.n is not None:
            return self.n
        return max(1, int(round(self.density_per_km * self.range_km)))

    @property
    def rc_range(self) -> tuple[int, int]:
        lo, hi = rc_bounds(self.rri_ms)
        return (lo if self.r_l is None else self.r_l, hi if self.r_u is None else self.r_u)

    @property
    def csr_per_slot(self) -> int:
        return self.n_subch * self.rb_per_subch // self.rb_per_csr

    @property
    def eta_value(self) -> float:
        if self.eta is not None:
            return self.eta
        return eta_from_geometry(self.n_subch, self.rb_per_subch, self.rb_per_csr)

    @property
    def has_denm(self) -> bool:
        return self.traffic == "cam+denm"

    def geometry(self) -> PoolGeometry:
        return PoolGeometry(
            n=self.n_vehicles,
            window_slots=self.t2 - self.t1,
            n_subch=self.n_subch,
            csr_per_slot=self.csr_per_slot,
            slots_per_ms=self.slots_per_ms,
            rho=self.density_per_km,
        )

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def problems(self) -> list[str]:
        """Every violated invariant, empty when the config is usable."""
        out = []
        if self.preset not in ("high", "low", "custom"):
            out.append(f"preset must be high, low or custom, got {self.preset!r}")
        if self.scs_khz not in (15, 30, 60, 120):
            out.append(f"scs_khz must be one of 15, 30, 60, 120, got {self.scs_khz}")
            return out
        for name in ("t_c_ms", "t_avg_ms", "t_d_ms", "delta_t_d_ms", "rri_ms"):
            v = getattr(self, name)
            if v is None:
                continue
            s = v * self.slots_per_ms
            if v <= 0:
                out.append(f"{name} must be positive")
            elif abs(s - round(s)) > 1e-9:
                out.append(f"{name}={v} is not a whole number of {self.scs_khz} kHz slots")
        if not 1 <= self.rri_ms <= 1000:
            out.append(f"rri_ms={self.rri_ms} outside [1, 1000]")
        if self.t_c < 2:
            out.append("t_c_ms must span at least 2 slots")
        if self.t_avg_ms > self.t_d_ms:
            out.append("t_avg_ms must not exceed t_d_ms")
        if self.t_d < 2:
            out.append("t_d_ms must span at least 2 slots")
        if self.k < 1:
            out.append("k must be >= 1")
        for name in ("n_subch", "rb_per_subch", "rb_per_csr", "queue_capacity", "max_iter"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1")
        if self.rb_per_csr >= 1 and self.csr_per_slot < 1:
            out.append("a CSR needs more resource blocks than one slot offers")
        if not 0.0 <= self.keep_probability <= 1.0:
            out.append("keep_probability outside [0, 1]")
        if self.n is not None and self.n < 1:
            out.append("n must be >= 1")
        if self.n is None and (self.density_per_km <= 0 or self.range_km <= 0):
            out.append("density_per_km and range_km must be positive")
        if self.t1_slots < 0:
            out.append("t1_slots must be >= 0")
        if self.t3_slots < 1:
            out.append("t3_slots must be >= 1")
        if self.rri >= 1 and self.t2 - self.t1 < 2:
            out.append(f"selection window t2 - t1 = {self.t2 - self.t1} slots is below 2")
        for name in ("p_re", "p_csr"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                out.append(f"{name} override outside [0, 1]")
        if self.eta is not None and self.eta <= 0:
            out.append("eta override must be positive")
        if (self.r_l is None) != (self.r_u is None):
            out.append("r_l and r_u must be overridden together")
        elif self.r_l is not None and not 1 <= self.r_l <= self.r_u:
            out.append("need 1 <= r_l <= r_u")
        if not 0.0 < self.damping <= 1.0:
            out.append("damping must lie in (0, 1]")
        if self.tol <= 0:
            out.append("tol must be positive")
        for name, allowed in CHOICES.items():
            if getattr(self, name) not in allowed:
                out.append(f"{name} must be one of {', '.join(allowed)}")
        return out

    def validate(self) -> "ScenarioConfig":
        problems = self.problems()
        if problems:
            raise ValidationError(problems)
        return self


_FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def _convert(key: str, raw: str, line: int):
    kind = _FIELDS[key].type
    if raw.lower() == "none":
        if "None" not in kind:
            raise ParseError("value may not be none", line, key)
        return None
    try:
        if kind.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ParseError(f"cannot read {raw!r} as {kind.split()[0]}", line, key) from None
    return raw


def parse_config(text: str) -> ScenarioConfig:
    """Read ``key=value`` pairs separated by whitespace or newlines; ``#`` starts a comment.

    The preset is expanded first, explicit keys override it, and the result
    is validated as a whole.
    """
    preset = None
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ParseError(f"expected key=value, got {token!r}", lineno)
            key, raw = token.split("=", 1)
            if key not in _FIELDS:
                raise ParseError("unknown key", lineno, key)
            if key in values or (key == "preset" and preset is not None):
                raise ParseError("duplicate key", lineno, key)
            if key == "preset":
                if raw not in PRESET_ALIASES:
                    raise ParseError(f"unknown preset {raw!r}", lineno, key)
                preset = PRESET_ALIASES[raw]
            else:
                values[key] = _convert(key, raw, lineno)
    base = dict(PRESETS.get(preset or "high", {}))
    base.update(values)
    if preset is None:
        preset = "high" if not values else "custom"
    if preset in PRESETS and any(base[k] != v for k, v in PRESETS[preset].items()):
        preset = "custom"
    return ScenarioConfig(preset=preset, **base).validate()


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_config(cfg: ScenarioConfig) -> str:
    """One ``key=value`` per line; ``parse_config`` reads it back to an equal config."""
    return "".join(f"{f.name}={_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


def preset_config(name: str = "high", **overrides) -> ScenarioConfig:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ValidationError([f"unknown preset {name!r}"])
    cfg = ScenarioConfig(preset=name, **PRESETS[name])
    return cfg.replace(**overrides).validate() if overrides else cfg
