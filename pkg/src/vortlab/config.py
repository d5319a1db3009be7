"""Plain-text configuration with sections, defaults, and stable hashing.

The grammar is INI-style (configparser): ``[section]`` headers, ``key =
value`` lines, ``#`` comments.  Lists use semicolons (``0.1; 0.05``) and
wavenumbers comma pairs (``1,0; 0,1``).  Unknown sections or keys are
rejected with the offending file line.  Every run writes back the resolved
configuration (all defaults expanded); its SHA-256 is the config hash
embedded in output files.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass


from .forcing import NoiseSpec
from .integrator import SolverConfig
from .spectral import Lattice

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


def _floats(text: str):
    return tuple(float(tok) for tok in text.split(";") if tok.strip())


def _ints(text: str):
    return tuple(int(tok) for tok in text.split(";") if tok.strip())


def _modes(text: str):
    out = []
    for tok in text.split(";"):
        tok = tok.strip()
        if not tok:
            continue
        a, b = tok.split(",")
        out.append((int(a), int(b)))
    return tuple(out)


_SCHEMA = {
    "lattice": {
        "n": (int, 64),
        "side_length": (float, 2.0 * math.pi),
        "dealias_fraction": (float, 2.0 / 3.0),
    },
    "noise": {
        "modes": (_modes, _modes("1,0; 2,0; 0,1; 0,2; 1,1; -1,1")),
        "b": (str, "auto"),
        "c": (float, 1.0),
        "alpha": (float, 0.5),
        "channels": (str, "both"),
    },
    "solver": {
        "nu": (float, 0.05),
        "tau": (float, 0.0),
        "gamma": (float, 0.0),
        "diss_exponent": (float, 2.0),
        "dt": (float, 2.5e-3),
        "t_end": (float, 100.0),
        "mode": (str, "full_nonlinear"),
        "seed": (int, 0),
        "guard": (float, 1e6),
        "advect_coeff": (float, 1.0),
        "drift_amplitude": (float, 1.0),
    },
    "estimate": {
        "burn_in": (float, -1.0),  # -1: use the heuristic default
        "total": (float, 2000.0),
        "replicas": (int, 8),
        "sample_stride": (int, 10),
        "delta": (float, -1.0),  # -1: 0.1 / (c^2 sum g^2)
        "observer_stride": (int, 10),
    },
    "sweep": {
        "kind": (str, "inviscid"),
        "values": (_floats, _floats("0.1; 0.05; 0.02; 0.01")),
        "alphas": (_floats, _floats("0.5; 0.25; 0; -0.25")),
        "dt_half_below": (float, 0.021),
        "p_values": (_ints, (2, 4)),
        "horizon": (float, 2.0),
        "replicas": (int, -1),
    },
    "moser": {
        "amplitudes": (_floats, _floats("0; 1; 100; 10000")),
        "window": (float, 0.125),
        "replicas": (int, 32),
    },
    "elliptic": {
        "n": (int, 128),
        "amplitudes": (_floats, _floats("0; 10; 100; 1000; 10000")),
        "tol": (float, 1e-10),
        "radii": (_floats, tuple(2.0**-k for k in range(3, 8))),
    },
    "output": {
        "dir": (str, "runs"),
    },
}


def _find_line(text: str, section: str, key: str | None) -> int:
    """Best-effort line number of a section header or of a key inside it."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            if key is None and stripped[1:-1].strip() == section:
                return lineno
            current = stripped[1:-1].strip()
        elif key is not None and current == section:
            head = stripped.split("=", 1)[0].split(":", 1)[0].strip()
            if head == key:
                return lineno
    return 0


@dataclass
class RunConfig:
    """Resolved configuration: every schema key has a concrete value."""

    values: dict
    source_text: str = ""

    def get(self, section: str, key: str):
        return self.values[section][key]

    # -- builders -----------------------------------------------------------

    def lattice(self) -> Lattice:
        sec = self.values["lattice"]
        return Lattice(n=sec["n"], side_length=sec["side_length"],
                       dealias_fraction=sec["dealias_fraction"])

    def noise(self) -> NoiseSpec:
        sec = self.values["noise"]
        modes = sec["modes"]
        if sec["b"] == "auto":
            b = tuple(1.0 / math.hypot(a, bb) for a, bb in modes)
        else:
            b = _floats(sec["b"])
        chans = sec["channels"]
        channels = tuple(c.strip() for c in chans.split(";")) if ";" in chans else (chans,) * len(modes)
        return NoiseSpec(modes=modes, b=b, c=sec["c"], alpha=sec["alpha"], channels=channels)

    def solver(self, **overrides) -> SolverConfig:
        sec = self.values["solver"]
        kwargs = dict(
            lattice=self.lattice(),
            noise=self.noise(),
            nu=sec["nu"],
            tau=sec["tau"],
            gamma=sec["gamma"],
            diss_exponent=sec["diss_exponent"],
            dt=sec["dt"],
            t_end=sec["t_end"],
            mode=sec["mode"],
            seed=sec["seed"],
            guard=sec["guard"],
            advect_coeff=sec["advect_coeff"],
        )
        kwargs.update(overrides)
        return SolverConfig(**kwargs)

    def estimate_args(self, config: SolverConfig) -> dict:
        from .measure import default_burn_in

        sec = self.values["estimate"]
        total = sec["total"]
        replicas = sec["replicas"]
        burn = sec["burn_in"]
        if burn < 0:
            burn = min(default_burn_in(config), 0.5 * total / replicas)
        delta = sec["delta"]
        if delta < 0:
            gsq = config.noise.g_sq_sum()
            delta = 0.1 / (config.noise.c**2 * gsq) if gsq > 0 else 0.1
        return {
            "burn_in": burn,
            "total": total,
            "replicas": replicas,
            "sample_stride": sec["sample_stride"],
            "delta": delta,
        }

    # -- canonical rendering --------------------------------------------------

    def resolved_text(self) -> str:
        buf = io.StringIO()
        for section in _SCHEMA:
            buf.write(f"[{section}]\n")
            for key in _SCHEMA[section]:
                val = self.values[section][key]
                if isinstance(val, tuple) and val and isinstance(val[0], tuple):
                    rendered = "; ".join(f"{a},{b}" for a, b in val)
                elif isinstance(val, tuple):
                    rendered = "; ".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in val)
                elif isinstance(val, float):
                    rendered = f"{val:.17g}"
                else:
                    rendered = str(val)
                buf.write(f"{key} = {rendered}\n")
            buf.write("\n")
        return buf.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate configuration text against the schema.

    ``overrides`` maps (section, key) to replacement raw strings, applied
    after the file (the CLI flags use this).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    values = {sec: {k: default for k, (_, default) in keys.items()}
              for sec, keys in _SCHEMA.items()}

    for section in parser.sections():
        if section not in _SCHEMA:
            line = _find_line(text, section, None)
            raise ConfigError(f"unknown section [{section}] (line {line})")
        for key, raw in parser[section].items():
            if key not in _SCHEMA[section]:
                line = _find_line(text, section, key)
                raise ConfigError(f"unknown key '{key}' in [{section}] (line {line})")
            typ, _ = _SCHEMA[section][key]
            try:
                values[section][key] = typ(raw)
            except Exception as exc:
                line = _find_line(text, section, key)
                raise ConfigError(
                    f"bad value for '{key}' in [{section}] (line {line}): {exc}"
                ) from exc

    for (section, key), raw in (overrides or {}).items():
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown override {section}.{key}")
        typ, _ = _SCHEMA[section][key]
        values[section][key] = typ(raw)

    cfg = RunConfig(values=values, source_text=text)
    # Round-trip guard: the resolved text must re-parse to the same values.
    reparsed = configparser.ConfigParser(inline_comment_prefixes=("#",))
    reparsed.read_string(cfg.resolved_text())
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
