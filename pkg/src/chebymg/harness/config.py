"""Case configuration and the flat ``key = value`` config-file format.

A config file holds one assignment per line; ``#`` starts a comment::

    # single case
    case.Lx = 64
    case.family = fourth
    case.cycle = one_sided
    case.k = 9

    # sweep axes (cross product)
    sweep.Lx = 1, 8, 64, 128
    sweep.k = 1..10

Values are parsed as int, float, bool (``true``/``false``) or string.  A
comma-separated value is a list and ``a..b`` an inclusive integer range.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..discretization import NOISE_KINDS as NOISE
from ..multigrid import FULL, ONE_SIDED
from ..smoothers import FAMILIES, FIRST_OPT, FOURTH_KIND

DRIVERS = ("pcg", "pgmres", "mg_solver")
CYCLES = (FULL, ONE_SIDED)


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class CaseConfig:
    """One solver run on the ``n x n`` finite-difference problem.

    ``k`` is the base order: the full cycle smooths ``(k, k)`` and the
    one-sided cycle ``(2k, 0)``.  ``lambda_min_mult = None`` with family
    ``first_opt_lambda`` triggers empirical tuning.
    """

    Lx: float = 1.0
    n: int = 128
    factor: int = 2
    family: str = "fourth"
    k: int = 1
    cycle: str = FULL
    driver: str = "pgmres"
    tol: float = 1e-6
    restart: int = 30
    maxit: int = 500
    rhs_seed: int = 0
    rhs_noise: str = "uniform01"
    eigen_seed: int = 0
    eigen_iterations: int = 30
    tune_seed: int = 1
    lambda_max_mult: float = 1.1
    lambda_min_mult: float | None = 0.1
    estimate_c: bool = False
    c_iterations: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.cycle not in CYCLES:
            raise ConfigError(f"unknown cycle {self.cycle!r}; expected one of {CYCLES}")
        if self.driver not in DRIVERS:
            raise ConfigError(f"unknown driver {self.driver!r}; expected one of {DRIVERS}")
        if self.rhs_noise not in NOISE:
            raise ConfigError(f"unknown rhs_noise {self.rhs_noise!r}")
        if self.cycle == ONE_SIDED and self.driver == "pcg":
            raise ConfigError("one-sided cycles are not symmetric; use pgmres or mg_solver")
        if self.n < 2 or self.factor < 2 or self.n % self.factor:
            raise ConfigError(f"factor {self.factor} must divide n={self.n}")
        if self.n // self.factor < 2:
            raise ConfigError("coarse grid has no interior nodes")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.Lx <= 0:
            raise ConfigError("Lx must be positive")
        if self.lambda_min_mult is None and self.family != FIRST_OPT:
            raise ConfigError("lambda_min_mult may only be tuned for first_opt_lambda")

    @property
    def k_pre(self) -> int:
        return 2 * self.k if self.cycle == ONE_SIDED else self.k

    @property
    def k_post(self) -> int:
        return 0 if self.cycle == ONE_SIDED else self.k

    @property
    def case_id(self) -> str:
        Lx = f"{self.Lx:g}"
        return (f"Lx{Lx}-n{self.n}-f{self.factor}-{self.family}-"
                f"{self.k_pre}_{self.k_post}-{self.driver}")

    def replace(self, **changes) -> "CaseConfig":
        return dataclasses.replace(self, **changes)

    @property
    def uses_lambda_min(self) -> bool:
        return self.family not in FOURTH_KIND


CASE_FIELDS = {f.name: f for f in dataclasses.fields(CaseConfig)}
SWEEP_AXES = ("Lx", "factor", "family", "k", "cycle")


def parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def parse_value(text: str):
    """Scalar, comma-separated list, or inclusive ``a..b`` integer range."""
    t = text.strip()
    if "," in t:
        out = []
        for part in t.split(","):
            v = parse_value(part)
            out.extend(v if isinstance(v, list) else [v])
        return out
    if ".." in t:
        a, _, b = t.partition("..")
        try:
            lo, hi = int(a), int(b)
        except ValueError as exc:
            raise ConfigError(f"bad range {t!r}") from exc
        if hi < lo:
            raise ConfigError(f"empty range {t!r}")
        return list(range(lo, hi + 1))
    return parse_scalar(t)


def parse_config_text(text: str) -> dict:
    """Parse config text into a flat ``{dotted.key: value}`` dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        out[key] = parse_value(value)
    return out


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _coerce(name, value):
    f = CASE_FIELDS[name]
    if value is None:
        return None
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    try:
        if typ.startswith("float"):
            return float(value)
        if typ.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ.startswith("bool"):
            return bool(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for {name}") from exc


def case_overrides(cfg: dict, section: str = "case") -> dict:
    """Collect ``section.<field>`` entries as typed :class:`CaseConfig` kwargs."""
    out = {}
    prefix = section + "."
    for key, value in cfg.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in CASE_FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        if isinstance(value, list):
            raise ConfigError(f"{key} takes a single value; use sweep.{name} for a list")
        out[name] = _coerce(name, value)
    return out


def sweep_axes(cfg: dict) -> dict:
    """``sweep.<field>`` entries as ``{field: [values...]}``."""
    axes = {}
    for key, value in cfg.items():
        if not key.startswith("sweep."):
            continue
        name = key[len("sweep."):]
        if name not in CASE_FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values = value if isinstance(value, list) else [value]
        axes[name] = [_coerce(name, v) for v in values]
    return axes


def check_sections(cfg: dict, allowed=("case", "sweep")):
    for key in cfg:
        if key.split(".", 1)[0] not in allowed or "." not in key:
            raise ConfigError(f"unknown key {key!r}")
