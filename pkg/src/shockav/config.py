"""Run-configuration schema: a flat key-value text format with sections.

Example::

    # comment
    scheme = hr-minmod
    solver = exact

    [case]
    kind = advancing
    ms = 20
    aspect = 0.25

    [av]
    c_av = 0.5

Section headers prefix the keys that follow (``[av]`` + ``c_av`` is the
same as a top-level ``av.c_av``).  Unknown keys are rejected by name;
malformed lines carry line/column positions.  A parsed config serializes
back to text that reparses to an equal config.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cases import CASE_NAMES, CaseKind, CaseSpec
from .integrate import Numerics, SchemeKind, default_cfl
from .reconstruct import LimiterKind, ReconConfig
from .riemann import SolverKind
from .viscosity import AvModel


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


# scheme aliases: stepper + reconstruction in one name
SCHEME_ALIASES = {
    "hr-minmod": (SchemeKind.HancockRodionov, "muscl", LimiterKind.Minmod),
    "hr-vanleer": (SchemeKind.HancockRodionov, "muscl", LimiterKind.VanLeer),
    "hr-mc": (SchemeKind.HancockRodionov, "muscl", LimiterKind.MC),
    "rk2-mc": (SchemeKind.RK2, "muscl", LimiterKind.MC),
    "rk2-minmod": (SchemeKind.RK2, "muscl", LimiterKind.Minmod),
    "rk3-weno5": (SchemeKind.RK3, "weno5", LimiterKind.Minmod),
    "firstorder": (SchemeKind.Euler, "firstorder", LimiterKind.Minmod),
}

_SOLVER_NAMES = {"exact": SolverKind.Exact, "roe": SolverKind.Roe,
                 "hllc": SolverKind.Hllc, "hll": SolverKind.Hll}

_LIMITER_NAMES = {"minmod": LimiterKind.Minmod, "vanleer": LimiterKind.VanLeer,
                  "mc": LimiterKind.MC}


@dataclass(frozen=True)
class RunConfig:
    case: CaseKind = CaseKind.AdvancingShock
    case_spec: CaseSpec = CaseSpec()
    gamma: float = 1.4
    scheme_name: str = "hr-minmod"
    numerics: Numerics = None  # resolved in parse/make
    t_end: float | None = None
    metrics_every: int = 10
    dump_every: int = 0        # steps between field dumps; 0 = final only
    out_dir: str = "out"
    threads: int = 1


_DEFAULTS = {
    "case.kind": "advancing",
    "case.ms": 20.0,
    "case.aspect": 1.0,
    "case.i": None,
    "case.j": None,
    "case.parallelogram": False,
    "case.alpha": None,
    "case.n_shift": None,
    "case.delta": None,
    "case.seed": 1234,
    "case.drift": None,
    "case.vortex_strength": 5.0,
    "case.vortex_dt_sign": -1,
    "gamma": 1.4,
    "scheme": "hr-minmod",
    "recon.limiter": None,         # None -> from the scheme alias
    "recon.variables": "characteristic",
    "recon.suggestion2": "off",
    "solver": "exact",
    "solver.entropy_fix": False,
    "av.c_av": 0.5,
    "av.c_th": 0.05,
    "av.prandtl": 0.75,
    "av.mu_molecular": 0.0,
    "cfl": None,                   # None -> 0.6 for rk3-weno5 else 0.8
    "t_end": None,
    "output.metrics_every": 10,
    "output.dump_every": 0,
    "output.dir": "out",
    "threads": 1,
}

_INT_KEYS = {"case.i", "case.j", "case.n_shift", "case.seed",
             "case.vortex_dt_sign", "output.metrics_every",
             "output.dump_every", "threads"}
_FLOAT_KEYS = {"case.ms", "case.aspect", "case.alpha", "case.delta",
               "case.drift", "case.vortex_strength", "gamma", "av.c_av",
               "av.c_th", "av.prandtl", "av.mu_molecular", "cfl", "t_end"}
_BOOL_KEYS = {"case.parallelogram", "solver.entropy_fix"}

# keys that may stay unset (case-dependent defaults apply downstream)
_OPTIONAL = {"case.i", "case.j", "case.alpha", "case.n_shift", "case.delta",
             "case.drift", "cfl", "t_end", "recon.limiter"}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str):
    if raw.lower() in ("none", "auto") and key in _OPTIONAL:
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        want = "integer" if key in _INT_KEYS else "number"
        raise ValidationError(key, f"expected {want}, got {raw!r}") from None
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValidationError(key, f"expected boolean, got {raw!r}")
    return raw


def _parse_lines(text: str) -> dict:
    values = {}
    section = ""
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", ln,
                                 line.index("[") + 1)
            section = stripped[1:-1].strip().lower()
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", ln,
                             len(line) - len(line.lstrip()) + 1)
        key, _, raw = stripped.partition("=")
        key, raw = key.strip().lower(), raw.strip()
        if not key:
            raise ParseError("empty key", ln, 1)
        if not raw:
            raise ParseError(f"empty value for {key!r}", ln,
                             stripped.index("=") + 2)
        full = f"{section}.{key}" if section else key
        if full == "case" or full == "case.kind":
            full = "case.kind"
        values[full] = (raw, ln)
    return values


def _resolve(values: dict) -> RunConfig:
    resolved = dict(_DEFAULTS)
    for key, (raw, ln) in values.items():
        if key not in _DEFAULTS:
            raise ValidationError(key, "unknown key")
        resolved[key] = _convert(key, raw)

    kind_name = str(resolved["case.kind"]).lower()
    if kind_name not in CASE_NAMES:
        raise ValidationError("case.kind",
                              f"unknown case {kind_name!r}; "
                              f"one of {sorted(CASE_NAMES)}")
    scheme = str(resolved["scheme"]).lower()
    if scheme not in SCHEME_ALIASES:
        raise ValidationError("scheme",
                              f"unknown scheme {scheme!r}; "
                              f"one of {sorted(SCHEME_ALIASES)}")
    stepper, recon_scheme, alias_limiter = SCHEME_ALIASES[scheme]

    limiter = resolved["recon.limiter"]
    if limiter is None:
        lim = alias_limiter
    else:
        limiter = str(limiter).lower()
        if limiter not in _LIMITER_NAMES:
            raise ValidationError("recon.limiter",
                                  f"unknown limiter {limiter!r}")
        lim = _LIMITER_NAMES[limiter]

    solver = str(resolved["solver"]).lower()
    if solver not in _SOLVER_NAMES:
        raise ValidationError("solver", f"unknown solver {solver!r}")

    if resolved["gamma"] <= 1.0:
        raise ValidationError("gamma", "must be > 1")
    if resolved["case.ms"] < 1.0:
        raise ValidationError("case.ms", "must be >= 1")
    if resolved["cfl"] is not None and not 0.0 < resolved["cfl"] <= 1.0:
        raise ValidationError("cfl", "must lie in (0, 1]")
    for key in ("av.c_av", "av.c_th", "av.mu_molecular"):
        if resolved[key] < 0.0:
            raise ValidationError(key, "must be non-negative")
    if resolved["av.prandtl"] <= 0.0:
        raise ValidationError("av.prandtl", "must be positive")
    for key in ("output.metrics_every", "threads"):
        if resolved[key] < 1:
            raise ValidationError(key, "must be a positive integer")
    if resolved["output.dump_every"] < 0:
        raise ValidationError("output.dump_every", "must be >= 0")

    try:
        recon = ReconConfig(scheme=recon_scheme, limiter=lim,
                            variables=str(resolved["recon.variables"]).lower(),
                            suggestion2=str(resolved["recon.suggestion2"]).lower())
        av = AvModel(c_av=resolved["av.c_av"], c_th=resolved["av.c_th"],
                     prandtl=resolved["av.prandtl"],
                     mu_molecular=resolved["av.mu_molecular"])
        numerics = Numerics(recon=recon, solver=_SOLVER_NAMES[solver],
                            stepper=stepper, av=av, cfl=resolved["cfl"],
                            entropy_fix=resolved["solver.entropy_fix"])
    except ValueError as exc:
        raise ValidationError("numerics", str(exc)) from exc
    # pin the resolved Courant number so serialize/parse round-trips
    numerics = replace(numerics, cfl=numerics.effective_cfl)

    spec = CaseSpec(ms=resolved["case.ms"], aspect=resolved["case.aspect"],
                    I=resolved["case.i"], J=resolved["case.j"],
                    parallelogram=resolved["case.parallelogram"],
                    alpha=resolved["case.alpha"],
                    n_shift=resolved["case.n_shift"],
                    delta=resolved["case.delta"], seed=resolved["case.seed"],
                    drift=resolved["case.drift"],
                    vortex_strength=resolved["case.vortex_strength"],
                    vortex_dT_sign=resolved["case.vortex_dt_sign"],
                    t_end=resolved["t_end"])
    return RunConfig(case=CASE_NAMES[kind_name], case_spec=spec,
                     gamma=resolved["gamma"], scheme_name=scheme,
                     numerics=numerics, t_end=resolved["t_end"],
                     metrics_every=resolved["output.metrics_every"],
                     dump_every=resolved["output.dump_every"],
                     out_dir=str(resolved["output.dir"]),
                     threads=resolved["threads"])


def parse_config(text: str) -> RunConfig:
    """Parse and fully resolve; unknown keys raise ValidationError, bad
    syntax raises ParseError."""
    return _resolve(_parse_lines(text))


def apply_overrides(cfg_text: str, overrides) -> RunConfig:
    """Parse cfg_text, then apply 'key=value' override strings on top."""
    values = _parse_lines(cfg_text)
    for n, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ParseError(f"override {item!r} is not key=value", n, 1)
        key, _, raw = item.partition("=")
        key, raw = key.strip().lower(), raw.strip()
        if key == "case":
            key = "case.kind"
        values[key] = (raw, 0)
    return _resolve(values)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Emit the fully-resolved key set; parse_config round-trips it."""
    num = cfg.numerics
    spec = cfg.case_spec
    limiter = {LimiterKind.Minmod: "minmod", LimiterKind.VanLeer: "vanleer",
               LimiterKind.MC: "mc"}[num.recon.limiter]
    solver = {v: k for k, v in _SOLVER_NAMES.items()}[num.solver]
    pairs = [
        ("case.kind", cfg.case.value),
        ("case.ms", spec.ms),
        ("case.aspect", spec.aspect),
        ("case.i", spec.I),
        ("case.j", spec.J),
        ("case.parallelogram", spec.parallelogram),
        ("case.alpha", spec.alpha),
        ("case.n_shift", spec.n_shift),
        ("case.delta", spec.delta),
        ("case.seed", spec.seed),
        ("case.drift", spec.drift),
        ("case.vortex_strength", spec.vortex_strength),
        ("case.vortex_dt_sign", spec.vortex_dT_sign),
        ("gamma", cfg.gamma),
        ("scheme", cfg.scheme_name),
        ("recon.limiter", limiter),
        ("recon.variables", num.recon.variables),
        ("recon.suggestion2", num.recon.suggestion2),
        ("solver", solver),
        ("solver.entropy_fix", num.entropy_fix),
        ("av.c_av", num.av.c_av),
        ("av.c_th", num.av.c_th),
        ("av.prandtl", num.av.prandtl),
        ("av.mu_molecular", num.av.mu_molecular),
        ("cfl", num.cfl),
        ("t_end", cfg.t_end),
        ("output.metrics_every", cfg.metrics_every),
        ("output.dump_every", cfg.dump_every),
        ("output.dir", cfg.out_dir),
        ("threads", cfg.threads),
    ]
    return "\n".join(f"{k} = {_fmt(v)}" for k, v in pairs) + "\n"
