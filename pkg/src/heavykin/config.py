"""Run configuration: a flat, diff-friendly key-value format.

Files are UTF-8 text, one ``section.key = value`` per line, ``#`` starting a
comment.  The schema is strict: unknown or duplicate keys are parse errors
(with line numbers), and every model constraint is re-validated on load.
Serialization is canonical, so load -> serialize -> load is the identity.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass

from .errors import ConfigError
from .model import ModelParams

__all__ = ["RunConfig", "parse_config", "load_config", "serialize_config",
           "config_dict", "default_config", "validate_config"]

_SECTIONS = ("model", "discretization", "experiment", "output")
_PHI_CHOICES = ("gaussian", "packet", "constant")
_FORMATS = ("csv", "json", "binary", "gnuplot")


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description (model, grids, sweep, output)."""

    model: ModelParams
    nx: int = 256
    nv: int = 257
    vmax_policy: float | str = "auto"   # "auto" or explicit outermost speed
    scheme_order: int = 1
    dt_policy: float | str = "cfl"      # "cfl" (0.9) or explicit Courant fraction
    eps_list: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    t_final: float = 0.5
    snapshot_times: tuple[float, ...] | None = None
    particles: int = 0
    seed: int = 12345
    phi_choice: str = "gaussian"
    out_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


def _float(raw: str) -> float:
    return float(raw)


def _int(raw: str) -> int:
    if not raw.lstrip("+-").isdigit():
        raise ValueError(f"not an integer: {raw!r}")
    return int(raw)


def _float_list(raw: str) -> tuple[float, ...]:
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _str(raw: str) -> str:
    return raw


def _policy(raw: str) -> float | str:
    return "auto" if raw == "auto" else float(raw)


def _dt_policy(raw: str) -> float | str:
    return "cfl" if raw == "cfl" else float(raw)


def _str_list(raw: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in raw.split(",") if p.strip())
    if not parts:
        raise ValueError("empty list")
    return parts


# key -> (RunConfig attribute or model field, parser)
_SCHEMA: dict[str, tuple[str, object]] = {
    "model.alpha": ("alpha", _float),
    "model.beta": ("beta", _float),
    "model.kappa": ("kappa", _float),
    "model.core_asym": ("core_asym", _float),
    "model.nu0_mean": ("nu0_mean", _float),
    "model.nu0_delta": ("nu0_delta", _float),
    "model.domain_length": ("domain_length", _float),
    "discretization.nx": ("nx", _int),
    "discretization.nv": ("nv", _int),
    "discretization.vmax_policy": ("vmax_policy", _policy),
    "discretization.scheme_order": ("scheme_order", _int),
    "discretization.dt_policy": ("dt_policy", _dt_policy),
    "experiment.eps_list": ("eps_list", _float_list),
    "experiment.t_final": ("t_final", _float),
    "experiment.snapshot_times": ("snapshot_times", _float_list),
    "experiment.particles": ("particles", _int),
    "experiment.seed": ("seed", _int),
    "experiment.phi_choice": ("phi_choice", _str),
    "output.dir": ("out_dir", _str),
    "output.formats": ("formats", _str_list),
}

_MODEL_DEFAULTS = {"alpha": 1.5, "beta": 0.0, "kappa": 0.2, "core_asym": 0.5,
                   "nu0_mean": 1.0, "nu0_delta": 0.0, "domain_length": 20.0}


def default_config() -> RunConfig:
    """The default experiment (every key at its documented default)."""
    return RunConfig(model=ModelParams(**_MODEL_DEFAULTS))


def parse_config(text: str) -> RunConfig:
    """Parse config text; raise ConfigError (with line numbers) on bad input."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            hint = difflib.get_close_matches(key, _SCHEMA, n=1)
            extra = f" (did you mean {hint[0]!r}?)" if hint else ""
            section = key.split(".", 1)[0]
            if "." not in key or section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section in key {key!r}; "
                                  f"sections are {', '.join(_SECTIONS)}{extra}")
            raise ConfigError(f"line {lineno}: unknown key {key!r}{extra}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} "
                              f"(first set on line {entries[key][1]})")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        entries[key] = (value, lineno)

    model_kwargs = dict(_MODEL_DEFAULTS)
    config_kwargs: dict[str, object] = {}
    for key, (value, lineno) in entries.items():
        attr, parser = _SCHEMA[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        if key.startswith("model."):
            model_kwargs[attr] = parsed
        else:
            config_kwargs[attr] = parsed

    cfg = RunConfig(model=ModelParams(**model_kwargs), **config_kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def bad(constraint: str) -> ConfigError:
        return ConfigError(f"parameter constraint violated: {constraint}")

    if cfg.nx < 2:
        raise bad("discretization.nx >= 2")
    if cfg.nv < 9 or cfg.nv % 2 == 0:
        raise bad("discretization.nv odd and >= 9")
    if cfg.scheme_order not in (1, 2):
        raise bad("discretization.scheme_order in {1, 2}")
    if cfg.vmax_policy != "auto" and not float(cfg.vmax_policy) > 0:
        raise bad("discretization.vmax_policy 'auto' or > 0")
    if cfg.dt_policy != "cfl" and not 0.0 < float(cfg.dt_policy) <= 1.0:
        raise bad("discretization.dt_policy 'cfl' or a Courant fraction in (0, 1]")
    if not cfg.eps_list or not all(0.0 < e <= 1.0 for e in cfg.eps_list):
        raise bad("experiment.eps_list values in (0, 1]")
    if not cfg.t_final > 0:
        raise bad("experiment.t_final > 0")
    if cfg.snapshot_times is not None:
        snaps = cfg.snapshot_times
        if any(t < 0 for t in snaps) or list(snaps) != sorted(set(snaps)):
            raise bad("experiment.snapshot_times nonnegative, strictly increasing")
    if cfg.particles < 0:
        raise bad("experiment.particles >= 0")
    if cfg.seed < 0:
        raise bad("experiment.seed >= 0")
    if cfg.phi_choice not in _PHI_CHOICES:
        raise bad(f"experiment.phi_choice in {{{', '.join(_PHI_CHOICES)}}}")
    if not cfg.formats or any(f not in _FORMATS for f in cfg.formats):
        raise bad(f"output.formats subset of {{{', '.join(_FORMATS)}}}")


def validate_config(cfg: RunConfig) -> RunConfig:
    """Re-check every constraint on an already-built config.

    ``parse_config`` validates on the way in; use this after programmatic
    edits (``dataclasses.replace``) so hand-built configs share the same
    gate.  Returns the config unchanged on success.
    """
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, bool):  # pragma: no cover - no bool keys today
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_dict(cfg: RunConfig) -> dict[str, object]:
    """Canonical flat mapping key -> plain value (for report embedding)."""
    out: dict[str, object] = {}
    model = cfg.model.as_dict()
    for key, (attr, _) in _SCHEMA.items():
        if key.startswith("model."):
            value = model[attr]
        else:
            value = getattr(cfg, attr)
        if isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(cfg)) == cfg."""
    lines = []
    current_section = None
    model = cfg.model.as_dict()
    for key, (attr, _) in _SCHEMA.items():
        section = key.split(".", 1)[0]
        if section != current_section:
            if current_section is not None:
                lines.append("")
            lines.append(f"# {section}")
            current_section = section
        value = model[attr] if key.startswith("model.") else getattr(cfg, attr)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
