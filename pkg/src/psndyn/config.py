"""INI-style experiment profiles.

Sections mirror :class:`ExperimentConfig`: ``[experiment]``, ``[link]``,
``[tcp]``, ``[traffic]``, ``[perturbation]`` and ``[analysis]``. Missing keys
keep their defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .scenario import ExperimentConfig, LinkParams, TcpParams

PROFILES = ("paper", "desk")


@dataclass(frozen=True)
class AnalysisConfig:
    window: float = 10.0  # seconds per PCA window
    bins: int = 100  # quantisation bins per axis
    settle_fraction: float = 0.1  # transient discarded before peak picking
    peak_bin: float = 0.5  # MSS, for counting distinct peaks
    embed_dim: int = 5
    embed_delay: int = 10
    theiler: int = 50
    lyapunov_horizon: int = 20
    lyapunov_fit: tuple[int, int] = (0, 10)
    lyapunov_points: int = 5000

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Profile:
    experiment: ExperimentConfig
    analysis: AnalysisConfig


_SECTION_KEYS = {
    "experiment": ("duty", "duration", "seed", "sample_dt", "n_nodes", "record_events"),
    "traffic": ("packet_size", "ack_size", "app_rate", "duty_period", "pacing", "jitter"),
    "perturbation": ("perturb", "perturb_interval", "perturb_burst"),
}


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        return tuple(type(like[0])(p) for p in raw.replace(",", " ").split())
    return raw


def _read_dataclass(cp, section, obj, keys=None):
    if not cp.has_section(section):
        return obj
    fields = {f.name for f in dataclasses.fields(obj)}
    upd = {}
    for k, v in cp.items(section):
        if k not in fields or (keys is not None and k not in keys):
            raise ValueError(f"unknown key [{section}] {k}")
        upd[k] = _coerce(v, getattr(obj, k))
    return dataclasses.replace(obj, **upd)


def parse_profile(text: str) -> Profile:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    known = set(_SECTION_KEYS) | {"link", "tcp", "analysis"}
    for s in cp.sections():
        if s not in known:
            raise ValueError(f"unknown section [{s}]")
    exp = ExperimentConfig()
    for section, keys in _SECTION_KEYS.items():
        exp = _read_dataclass(cp, section, exp, keys)
    exp = dataclasses.replace(
        exp,
        link=_read_dataclass(cp, "link", LinkParams()),
        tcp=_read_dataclass(cp, "tcp", TcpParams()),
    )
    return Profile(exp, _read_dataclass(cp, "analysis", AnalysisConfig()))


def load_profile(path_or_name: str | Path) -> Profile:
    """Load a config file, or a bundled profile by name (``paper``, ``desk``)."""
    p = Path(path_or_name)
    if p.exists():
        return parse_profile(p.read_text())
    name = p.stem if p.suffix == ".cfg" else str(path_or_name)
    if name in PROFILES:
        return parse_profile(resources.files("psndyn.profiles").joinpath(f"{name}.cfg").read_text())
    raise FileNotFoundError(f"no config file or bundled profile named {path_or_name!r}")


def dump_profile(profile: Profile) -> str:
    exp = profile.experiment
    lines = []

    def section(name, items):
        lines.append(f"[{name}]")
        for k, v in items:
            if isinstance(v, tuple):
                v = " ".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        lines.append("")

    for name, keys in _SECTION_KEYS.items():
        section(name, [(k, getattr(exp, k)) for k in keys])
    section("link", dataclasses.asdict(exp.link).items())
    section("tcp", dataclasses.asdict(exp.tcp).items())
    section("analysis", profile.analysis.to_dict().items())
    return "\n".join(lines)
