"""Key-value run configuration for the command-line front end.

Config files are plain ``key = value`` lines ('#' comments, blank lines
ignored).  A run's config file is copied verbatim into its output
directory for provenance.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import DomainFamily, SamplingConfig


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the field."""


_FAMILIES = ("sphere", "ellipsoid", "bumped_sphere", "disk", "bumped_disk")


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        out[key.strip().lower()] = val.strip()
    return out


@dataclass
class RunConfig:
    raw: dict[str, str]
    path: Path | None = None
    overrides: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        return cls(raw=parse_config_text(p.read_text()), path=p)

    # -- generic typed getters -------------------------------------------

    def _get(self, key: str, default=None):
        if key in self.overrides:
            return self.overrides[key]
        return self.raw.get(key, default)

    def get_str(self, key: str, default: str | None = None) -> str:
        v = self._get(key, default)
        if v is None:
            raise ConfigError(f"missing required field: {key}")
        return str(v)

    def get_float(self, key: str, default=None) -> float:
        v = self._get(key, default)
        if v is None:
            raise ConfigError(f"missing required field: {key}")
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key}: expected a number, got {v!r}") from None

    def get_int(self, key: str, default=None) -> int:
        v = self._get(key, default)
        if v is None:
            raise ConfigError(f"missing required field: {key}")
        try:
            return int(str(v))
        except (TypeError, ValueError):
            raise ConfigError(f"field {key}: expected an integer, got {v!r}") from None

    def get_floats(self, key: str, default=None) -> list[float]:
        v = self._get(key, default)
        if v is None:
            raise ConfigError(f"missing required field: {key}")
        if isinstance(v, (list, tuple)):
            return [float(x) for x in v]
        try:
            return [float(s) for s in str(v).replace(";", ",").split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"field {key}: expected comma-separated numbers, "
                              f"got {v!r}") from None

    # -- domain/sampling views -------------------------------------------

    def family(self) -> DomainFamily:
        fam = self.get_str("family")
        if fam not in _FAMILIES:
            raise ConfigError(f"field family: unknown family {fam!r} "
                              f"(choose from {_FAMILIES})")
        radii = tuple(self.get_floats("radii", default="")) if self._get("radii") else ()
        amp = self.get_float("bump_amplitude", 0.0)
        freq = self.get_int("bump_frequency", 3)
        radius = self.get_float("radius", 1.0)
        if fam == "ellipsoid" and len(radii) != 3:
            raise ConfigError("field radii: ellipsoid needs three values a,b,c")
        if fam in ("bumped_sphere", "bumped_disk") and amp < 0:
            raise ConfigError("field bump_amplitude: must be >= 0")
        return DomainFamily(fam, radius=radius, radii=radii,
                            bump_amplitude=amp, bump_frequency=freq)

    def sigma(self) -> float:
        s = self.get_float("sigma", 0.5)
        if not 0.0 < s < 1.0:
            raise ConfigError(f"field sigma: must be in (0,1), got {s}")
        return s

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(
            points_per_chart=self.get_int("points_per_chart", 4096),
            pairs_per_chart=self.get_int("pairs_per_chart", 65536),
            eta=(self.get_float("eta") if self._get("eta") is not None else None))

    def seed(self) -> int:
        return self.get_int("seed", 1234)

    def kernels(self) -> list[str]:
        if self._get("kernels") is not None:
            return [s.strip() for s in self.get_str("kernels").split(",") if s.strip()]
        return [self.get_str("kernel")]

    def copy_into(self, outdir: Path) -> None:
        outdir.mkdir(parents=True, exist_ok=True)
        if self.path is not None:
            shutil.copyfile(self.path, outdir / self.path.name)
        else:
            lines = [f"{k} = {v}" for k, v in self.raw.items()]
            (outdir / "run.cfg").write_text("\n".join(lines) + "\n")
