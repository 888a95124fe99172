"""Scenario documents: one JSON file naming everything a run needs.

A scenario bundles the manifold, the generator list, optional letter
probabilities and contraction bound, plus named regions, certificates,
and blending regions that commands refer to by name.  Validation is
strict: unknown keys anywhere are an error, and every cross reference
must resolve.  That keeps golden files honest; a typo fails loudly
instead of silently falling back to a default.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json

from .blending import BlendingRegion
from .certificates import ExpandingCertificate, certificate_from_dict
from .geometry import Ball, Box, InputError, Manifold
from .ifs import IFSystem
from .maps import SmoothMap, Word, map_from_config

__all__ = ["Scenario", "load_scenario", "scenario_from_dict"]

_TOP_KEYS = {"manifold", "generators", "probs", "beta", "regions",
             "certificates", "blending", "params"}

# command parameters live in one flat namespace so overrides stay simple
_PARAM_KEYS = {
    "certificate", "blending", "region", "within", "mode", "grid_step",
    "kappa_target", "max_word_len", "x", "y", "x0", "n", "eps", "eval_step",
    "max_depth", "rounds", "resolution", "n_samples", "burn_in",
    "samples_per_axis", "depth", "seed", "alpha", "C", "kappa", "K",
    "radius", "threshold", "observables", "reference", "n_seeds",
    "quadrature_points", "tol", "min_coverage", "max_iter", "n_pairs",
    "streams", "levels", "tau_low", "group_mode",
}


@dataclass
class Scenario:
    manifold: Manifold
    generators: tuple[SmoothMap, ...]
    probs: tuple[float, ...] | None = None
    beta: float | None = None
    regions: dict[str, object] = field(default_factory=dict)
    certificates: dict[str, ExpandingCertificate] = field(default_factory=dict)
    blending: dict[str, BlendingRegion] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def system(self, need_probs: bool = False) -> IFSystem:
        """The generators as a contracting system; needs the beta field."""
        if self.beta is None:
            raise InputError("scenario field 'beta' is required for "
                             "contracting-system commands")
        if need_probs and self.probs is None:
            raise InputError("scenario field 'probs' is required for "
                             "sampling commands")
        return IFSystem(self.generators, self.beta, self.probs)

    def named(self, table: str, name: str | None):
        """Look up an entry of regions/certificates/blending by name.

        A missing name is allowed when the table has exactly one entry.
        """
        entries = getattr(self, table)
        if name is None:
            if len(entries) == 1:
                return next(iter(entries.values()))
            raise InputError(
                f"params.{_SINGULAR.get(table, table)} must name one of "
                f"{sorted(entries) or '(none defined)'}")
        if name not in entries:
            raise InputError(
                f"unknown {_SINGULAR.get(table, table)} {name!r}; scenario "
                f"defines {sorted(entries)}")
        return entries[name]


_SINGULAR = {"regions": "region", "certificates": "certificate",
             "blending": "blending"}


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise InputError(f"unknown keys {extra} in {where}")


def _parse_manifold(spec) -> Manifold:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InputError("manifold must be an object with a 'kind' key")
    kind = spec["kind"]
    if kind == "circle":
        _reject_unknown(spec, {"kind"}, "manifold")
        return Manifold.circle()
    if kind == "torus2":
        _reject_unknown(spec, {"kind"}, "manifold")
        return Manifold.torus2()
    if kind == "box":
        _reject_unknown(spec, {"kind", "bounds"}, "manifold")
        if "bounds" not in spec:
            raise InputError("manifold.bounds is required for kind 'box'")
        bounds = tuple(tuple(float(v) for v in b) for b in spec["bounds"])
        return Manifold.box(bounds)
    raise InputError(f"manifold.kind must be circle, torus2, or box, "
                     f"not {kind!r}")


def _parse_region(name: str, spec):
    where = f"regions[{name!r}]"
    if not isinstance(spec, dict) or "type" not in spec:
        raise InputError(f"{where} must be an object with a 'type' key")
    if spec["type"] == "ball":
        _reject_unknown(spec, {"type", "center", "radius"}, where)
        try:
            return Ball.of([float(v) for v in spec["center"]],
                           float(spec["radius"]))
        except (KeyError, TypeError, ValueError) as err:
            raise InputError(f"{where} needs numeric center and radius: "
                             f"{err}") from err
    if spec["type"] == "box":
        _reject_unknown(spec, {"type", "lo", "hi"}, where)
        try:
            return Box.of([float(v) for v in spec["lo"]],
                          [float(v) for v in spec["hi"]])
        except (KeyError, TypeError, ValueError) as err:
            raise InputError(f"{where} needs numeric lo and hi: {err}") from err
    raise InputError(f"{where}.type must be 'ball' or 'box'")


def _parse_blending(name: str, spec, regions: dict) -> BlendingRegion:
    where = f"blending[{name!r}]"
    if not isinstance(spec, dict):
        raise InputError(f"{where} must be an object")
    _reject_unknown(spec, {"B", "D", "words", "beta", "K"}, where)
    for key in ("B", "D", "words", "beta"):
        if key not in spec:
            raise InputError(f"{where}.{key} is required")
    for key in ("B", "D"):
        if spec[key] not in regions:
            raise InputError(f"{where}.{key} references unknown region "
                             f"{spec[key]!r}")
    words = tuple(Word.of(*(int(i) for i in w)) for w in spec["words"])
    return BlendingRegion(
        B=regions[spec["B"]],
        D=regions[spec["D"]],
        maps=words,
        beta=float(spec["beta"]),
        K=float(spec["K"]) if "K" in spec else None,
    )


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise InputError("scenario must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "scenario")
    for key in ("manifold", "generators"):
        if key not in doc:
            raise InputError(f"scenario field {key!r} is required")
    m = _parse_manifold(doc["manifold"])
    gens = tuple(map_from_config(m, g) for g in doc["generators"])
    if not gens:
        raise InputError("scenario field 'generators' must not be empty")
    probs = None
    if "probs" in doc:
        probs = tuple(float(v) for v in doc["probs"])
        if len(probs) != len(gens):
            raise InputError("scenario field 'probs' must match the "
                             "generator count")
    beta = float(doc["beta"]) if "beta" in doc else None
    regions = {name: _parse_region(name, spec)
               for name, spec in doc.get("regions", {}).items()}
    certs = {}
    for name, spec in doc.get("certificates", {}).items():
        try:
            certs[name] = certificate_from_dict(spec)
        except (InputError, KeyError, TypeError, ValueError) as err:
            raise InputError(f"certificates[{name!r}]: {err}") from err
    blend = {name: _parse_blending(name, spec, regions)
             for name, spec in doc.get("blending", {}).items()}
    params = dict(doc.get("params", {}))
    _reject_unknown(params, _PARAM_KEYS, "params")
    return Scenario(
        manifold=m,
        generators=gens,
        probs=probs,
        beta=beta,
        regions=regions,
        certificates=certs,
        blending=blend,
        params=params,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as err:
        raise InputError(f"scenario file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"scenario file does not parse as JSON: {err}") from err
    return scenario_from_dict(doc)
