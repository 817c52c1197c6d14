"""Experiment configuration: YAML parsing, validation and serialization.

A config is a nested mapping; see ``configs/`` in the repository for
commented examples. Every validation failure raises
:class:`~ch6relax.exceptions.ConfigError` naming the dotted field path and,
when the value came from a file, its line.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import yaml

from ch6relax.exceptions import ConfigError
from ch6relax.galerkin import ConstantForcing, GalerkinSystem, SeriesForcing, ZeroForcing
from ch6relax.integrators import SCHEMES
from ch6relax.potential import PotentialSpec
from ch6relax.spectral import Domain

INITIAL_KINDS = ("zero", "cosines", "coefficients", "random")
FORCING_KINDS = ("zero", "constant", "series")


# -- line tracking ----------------------------------------------------------------

def _to_python(loader, node, path, lines):
    """Plain Python data from a composed YAML node, recording key lines."""
    lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            sub = f"{path}.{key}" if path else key
            lines[sub] = key_node.start_mark.line + 1
            out[key] = _to_python(loader, value_node, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(loader, v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return loader.construct_object(node, deep=True)


def _load(text):
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        lines: dict = {}
        data = {} if node is None else _to_python(loader, node, "", lines)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1) from None
    finally:
        loader.dispose()
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping", 1)
    return data, lines


class _Reader:
    """Typed access to a section with field-and-line error reporting."""

    def __init__(self, data, prefix, lines):
        self.data = {} if data is None else data
        self.prefix = prefix
        self.lines = lines
        if not isinstance(self.data, dict):
            self.fail(None, "must be a mapping")

    def path(self, key):
        return f"{self.prefix}.{key}" if self.prefix and key else (key or self.prefix)

    def fail(self, key, message):
        path = self.path(key)
        raise ConfigError(path, message, self.lines.get(path))

    def unknown(self, allowed):
        extra = sorted(set(self.data) - set(allowed))
        if extra:
            self.fail(extra[0], f"unknown key (allowed: {', '.join(allowed)})")

    def get(self, key, default=None, required=False):
        if key not in self.data or self.data[key] is None:
            if required:
                self.fail(key, "is required")
            return default
        return self.data[key]

    def number(self, key, default=None, required=False, positive=False, nonnegative=False):
        value = self.get(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(key, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            self.fail(key, "must be finite")
        if positive and not value > 0:
            self.fail(key, "must be positive")
        if nonnegative and value < 0:
            self.fail(key, "must be nonnegative")
        return value

    def integer(self, key, default=None, required=False, minimum=None):
        value = self.get(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(key, f"must be >= {minimum}")
        return value

    def choice(self, key, options, default=None):
        value = self.get(key, default)
        if value not in options:
            self.fail(key, f"must be one of {', '.join(options)}, got {value!r}")
        return value

    def section(self, key):
        return _Reader(self.get(key, {}), self.path(key), self.lines)


# -- sections ---------------------------------------------------------------------

@dataclass(frozen=True)
class DomainConfig:
    lengths: tuple
    modes: tuple
    grid: Optional[tuple] = None
    dealias: bool = True

    @property
    def dim(self):
        return len(self.lengths)

    def build(self, degree=3) -> Domain:
        return Domain(self.lengths, self.modes, self.grid, self.dealias, degree)

    def to_dict(self):
        out = {"dim": self.dim, "lengths": list(self.lengths), "modes": list(self.modes)}
        if self.grid is not None:
            out["grid"] = list(self.grid)
        out["dealias"] = self.dealias
        return out


@dataclass(frozen=True)
class InitialData:
    """Initial field descriptor.

    ``zero``; ``cosines`` with terms ``[amplitude, q_1(, q_2)]`` meaning
    ``amplitude * prod cos(q_i x_i)``; ``coefficients`` (nested list shaped
    like the mode array, zero padded); ``random`` with Gaussian coefficients
    ``amplitude * N(0, 1) * exp(-decay * l_k)`` drawn from the config seed.
    """

    kind: str = "zero"
    terms: tuple = ()
    values: Optional[tuple] = None
    amplitude: float = 0.0
    decay: float = 1.0

    def build(self, domain: Domain, seed: int = 0, stream: int = 0):
        if self.kind == "zero":
            return domain.zeros()
        if self.kind == "cosines":
            out = domain.zeros()
            for term in self.terms:
                out = out + domain.cosine(tuple(term[1:]), term[0])
            return out
        if self.kind == "coefficients":
            values = np.asarray(self.values, dtype=float)
            if values.ndim != domain.dim or any(s > m for s, m in zip(values.shape, domain.modes)):
                raise ValueError(f"coefficient array of shape {values.shape} does not fit {domain.modes}")
            out = domain.zeros()
            out[tuple(slice(0, s) for s in values.shape)] = values
            return out
        rng = np.random.default_rng([seed, stream])
        return self.amplitude * rng.standard_normal(domain.modes) * np.exp(-self.decay * domain.eigenvalues)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "cosines":
            out["terms"] = [list(t) for t in self.terms]
        elif self.kind == "coefficients":
            out["values"] = _listify(self.values)
        elif self.kind == "random":
            out["amplitude"] = self.amplitude
            out["decay"] = self.decay
        return out


@dataclass(frozen=True)
class ForcingConfig:
    kind: str = "zero"
    value: float = 0.0
    times: tuple = ()
    coeffs: tuple = ()

    def build(self, domain: Domain):
        if self.kind == "zero":
            return ZeroForcing()
        if self.kind == "constant":
            return ConstantForcing(self.value)
        coeffs = np.zeros((len(self.times),) + domain.modes)
        for i, snap in enumerate(self.coeffs):
            snap = np.asarray(snap, dtype=float)
            if snap.ndim != domain.dim or any(s > m for s, m in zip(snap.shape, domain.modes)):
                raise ValueError(f"forcing snapshot {i} of shape {snap.shape} does not fit {domain.modes}")
            coeffs[(i,) + tuple(slice(0, s) for s in snap.shape)] = snap
        return SeriesForcing(np.asarray(self.times), coeffs)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "series":
            out["times"] = list(self.times)
            out["coeffs"] = [_listify(c) for c in self.coeffs]
        return out


def _listify(value):
    if isinstance(value, (tuple, list)):
        return [_listify(v) for v in value]
    return value


def _tupleify(value):
    if isinstance(value, (tuple, list)):
        return tuple(_tupleify(v) for v in value)
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainConfig
    potential: PotentialSpec
    scheme: str
    dt: float
    T: float
    save_every: Optional[float] = None
    tau: Optional[float] = None
    tau_list: Optional[tuple] = None
    phi0: InitialData = field(default_factory=InitialData)
    rho0: Optional[InitialData] = None
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    output: Optional[str] = None
    seed: int = 0
    ref_dt: Optional[float] = None
    ref_scheme: str = "imex2_parabolic"
    steps_per_tau: int = 32

    # -- builders

    def build_system(self) -> GalerkinSystem:
        domain = self.domain.build(self.potential.degree)
        return GalerkinSystem(domain, self.potential, self.forcing.build(domain))

    def initial_data(self, domain):
        phi0 = self.phi0.build(domain, self.seed, 0)
        rho0 = None if self.rho0 is None else self.rho0.build(domain, self.seed, 1)
        return phi0, rho0

    # -- serialization

    def to_dict(self):
        p = self.potential
        out = {
            "domain": self.domain.to_dict(),
            "potential": {
                "beta_coeffs": [list(c) for c in p.beta_coeffs],
                "lambda": p.lam, "nu": p.nu, "sigma": p.sigma,
                "offset": p.offset, "diagnostic": p.diagnostic,
            },
            "scheme": self.scheme,
            "dt": self.dt,
            "T": self.T,
        }
        if self.save_every is not None:
            out["save_every"] = self.save_every
        if self.tau is not None:
            out["tau"] = self.tau
        if self.tau_list is not None:
            out["tau_list"] = list(self.tau_list)
        out["initial"] = {"phi0": self.phi0.to_dict()}
        if self.rho0 is not None:
            out["initial"]["rho0"] = self.rho0.to_dict()
        out["forcing"] = self.forcing.to_dict()
        if self.output is not None:
            out["output"] = self.output
        out["seed"] = self.seed
        if self.ref_dt is not None:
            out["reference"] = {"dt": self.ref_dt, "scheme": self.ref_scheme}
        out["steps_per_tau"] = self.steps_per_tau
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def replace(self, **changes):
        return replace(self, **changes)


TOP_KEYS = ("domain", "potential", "scheme", "dt", "T", "save_every", "tau", "tau_list",
            "initial", "forcing", "output", "seed", "reference", "steps_per_tau")


def _domain(r: _Reader) -> DomainConfig:
    r.unknown(("dim", "lengths", "modes", "grid", "dealias"))
    lengths = r.get("lengths", required=True)
    lengths = [lengths] if not isinstance(lengths, list) else lengths
    dim = r.integer("dim", default=len(lengths))
    if dim not in (1, 2):
        r.fail("dim", "must be 1 or 2")
    if len(lengths) != dim:
        r.fail("lengths", f"expected {dim} entries, got {len(lengths)}")
    for L in lengths:
        if isinstance(L, bool) or not isinstance(L, (int, float)) or not (L > 0 and math.isfinite(L)):
            r.fail("lengths", f"entry {L!r} must be a positive number")

    def ints(key, required):
        value = r.get(key, required=required)
        if value is None:
            return None
        value = [value] * dim if not isinstance(value, list) else value
        if len(value) != dim:
            r.fail(key, f"expected {dim} entries, got {len(value)}")
        if any(isinstance(v, bool) or not isinstance(v, int) for v in value):
            r.fail(key, "entries must be integers")
        return tuple(value)

    modes = ints("modes", True)
    if any(m < 2 for m in modes):
        r.fail("modes", "entries must be >= 2")
    grid = ints("grid", False)
    if grid is not None and any(g < m for g, m in zip(grid, modes)):
        r.fail("grid", "entries must be >= modes")
    dealias = r.get("dealias", True)
    if not isinstance(dealias, bool):
        r.fail("dealias", "must be true or false")
    return DomainConfig(tuple(float(L) for L in lengths), modes, grid, dealias)


def _potential(r: _Reader) -> PotentialSpec:
    r.unknown(("beta_coeffs", "lambda", "nu", "sigma", "offset", "diagnostic"))
    raw = r.get("beta_coeffs", [[3, 1.0]])
    if not isinstance(raw, list) or any(not isinstance(p, list) or len(p) != 2 for p in raw):
        r.fail("beta_coeffs", "must be a list of [degree, coefficient] pairs")
    diagnostic = r.get("diagnostic", False)
    if not isinstance(diagnostic, bool):
        r.fail("diagnostic", "must be true or false")
    for d, c in raw:
        if isinstance(d, bool) or not isinstance(d, int):
            r.fail("beta_coeffs", f"degree {d!r} is not an integer")
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            r.fail("beta_coeffs", f"coefficient {c!r} is not a number")
    kwargs = dict(
        beta_coeffs=tuple((d, float(c)) for d, c in raw),
        lam=r.number("lambda", 1.0),
        nu=r.number("nu", 1.0),
        sigma=r.number("sigma", 0.1),
        offset=r.number("offset", 0.25),
        diagnostic=diagnostic,
    )
    try:
        return PotentialSpec(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k, name in (("sigma", "sigma"), ("lambda", "lam")) if msg.startswith(name)),
                   "beta_coeffs")
        r.fail(key, msg)


def _initial(r: _Reader) -> InitialData:
    r.unknown(("kind", "terms", "values", "amplitude", "decay"))
    kind = r.choice("kind", INITIAL_KINDS, "zero")
    if kind == "cosines":
        terms = r.get("terms", required=True)
        if not isinstance(terms, list) or any(
                not isinstance(t, list) or len(t) < 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in t)
                for t in terms):
            r.fail("terms", "must be a list of [amplitude, q1(, q2)] number lists")
        return InitialData(kind, tuple(tuple(float(v) for v in t) for t in terms))
    if kind == "coefficients":
        values = r.get("values", required=True)
        try:
            arr = np.asarray(values, dtype=float)
        except (TypeError, ValueError):
            r.fail("values", "must be a (nested) list of numbers")
        if arr.ndim == 0 or not np.all(np.isfinite(arr)):
            r.fail("values", "must be a finite (nested) list of numbers")
        return InitialData(kind, values=_tupleify(arr.tolist()))
    if kind == "random":
        return InitialData(kind, amplitude=r.number("amplitude", required=True, nonnegative=True),
                           decay=r.number("decay", 1.0, nonnegative=True))
    return InitialData("zero")


def _forcing(r: _Reader) -> ForcingConfig:
    r.unknown(("kind", "value", "times", "coeffs"))
    kind = r.choice("kind", FORCING_KINDS, "zero")
    if kind == "constant":
        return ForcingConfig(kind, value=r.number("value", required=True))
    if kind == "series":
        times = r.get("times", required=True)
        coeffs = r.get("coeffs", required=True)
        if not isinstance(times, list) or any(isinstance(t, bool) or not isinstance(t, (int, float)) for t in times):
            r.fail("times", "must be a list of numbers")
        if len(times) == 0 or any(b <= a for a, b in zip(times, times[1:])):
            r.fail("times", "must be nonempty and strictly increasing")
        if not isinstance(coeffs, list) or len(coeffs) != len(times):
            r.fail("coeffs", "must hold one coefficient snapshot per time")
        try:
            snaps = [np.asarray(c, dtype=float) for c in coeffs]
        except (TypeError, ValueError):
            r.fail("coeffs", "snapshots must be (nested) lists of numbers")
        if any(not np.all(np.isfinite(s)) for s in snaps):
            r.fail("coeffs", "snapshots must be finite")
        return ForcingConfig(kind, times=tuple(float(t) for t in times),
                             coeffs=tuple(_tupleify(s.tolist()) for s in snaps))
    return ForcingConfig("zero")


def _multiple(total, dt):
    count = total / dt
    return abs(count - round(count)) <= 1e-9 * max(1.0, count)


def from_dict(data: dict, lines: Optional[dict] = None) -> ExperimentConfig:
    """Validate a plain mapping into an :class:`ExperimentConfig`."""
    lines = {} if lines is None else lines
    r = _Reader(data, "", lines)
    r.unknown(TOP_KEYS)
    domain = _domain(r.section("domain"))
    potential = _potential(r.section("potential"))
    scheme = r.choice("scheme", SCHEMES, "imex1_hyperbolic")
    dt = r.number("dt", required=True, positive=True)
    T = r.number("T", required=True, nonnegative=True)
    save_every = r.number("save_every", positive=True)
    if not _multiple(T, dt):
        r.fail("T", f"{T!r} is not a multiple of dt={dt!r}")
    if save_every is not None and not _multiple(save_every, dt):
        r.fail("save_every", f"{save_every!r} is not a multiple of dt={dt!r}")

    tau = r.number("tau", nonnegative=True)
    tau_list = r.get("tau_list")
    if tau is not None and tau_list is not None:
        r.fail("tau_list", "give either tau or tau_list, not both")
    if tau is not None:
        if tau >= 1:
            r.fail("tau", "must lie in [0, 1)")
        if (tau > 0) != scheme.endswith("hyperbolic"):
            r.fail("scheme", f"{scheme} is incompatible with tau={tau!r}")
    if tau_list is not None:
        if not isinstance(tau_list, list) or any(
                isinstance(t, bool) or not isinstance(t, (int, float)) for t in tau_list):
            r.fail("tau_list", "must be a list of numbers")
        if any(not 0 < t < 1 for t in tau_list):
            r.fail("tau_list", "entries must lie in (0, 1)")
        if len(set(tau_list)) != len(tau_list):
            r.fail("tau_list", "duplicate tau entries")
        if any(b >= a for a, b in zip(tau_list, tau_list[1:])):
            r.fail("tau_list", "must be strictly decreasing")
        tau_list = tuple(float(t) for t in tau_list)

    init = r.section("initial")
    init.unknown(("phi0", "rho0"))
    phi0 = _initial(init.section("phi0"))
    rho0 = _initial(init.section("rho0")) if init.get("rho0") is not None else None
    if rho0 is not None and tau == 0:
        init.fail("rho0", "must be omitted for tau = 0")
    forcing = _forcing(r.section("forcing"))

    output = r.get("output")
    if output is not None and not isinstance(output, str):
        r.fail("output", "must be a path string")
    seed = r.integer("seed", 0, minimum=0)
    ref = r.section("reference")
    ref.unknown(("dt", "scheme"))
    ref_dt = ref.number("dt", positive=True)
    ref_scheme = ref.choice("scheme", ("imex1_parabolic", "imex2_parabolic"), "imex2_parabolic")
    if ref_dt is not None:
        if not _multiple(T, ref_dt):
            ref.fail("dt", f"T={T!r} is not a multiple of reference dt={ref_dt!r}")
        if save_every is not None and not _multiple(save_every, ref_dt):
            ref.fail("dt", "save_every is not a multiple of the reference dt")
    steps_per_tau = r.integer("steps_per_tau", 32, minimum=1)

    cfg = ExperimentConfig(domain, potential, scheme, dt, T, save_every, tau, tau_list, phi0, rho0,
                           forcing, output, seed, ref_dt, ref_scheme, steps_per_tau)
    # shape checks that need the built domain
    d = domain.build(potential.degree)
    for key, spec, stream in (("phi0", phi0, 0), ("rho0", rho0, 1)):
        if spec is None:
            continue
        try:
            spec.build(d, seed, stream)
        except (ValueError, IndexError) as exc:
            init.fail(key, str(exc))
    try:
        forcing.build(d)
    except ValueError as exc:
        r.fail("forcing", str(exc))
    return cfg


def loads(text: str) -> ExperimentConfig:
    data, lines = _load(text)
    return from_dict(data, lines)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
