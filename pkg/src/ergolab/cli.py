"""Command line front end: scenario in, deterministic artifacts out.

Every command reads one JSON scenario, runs one computation, and writes
its results under the output directory: delimited data (CSV), structured
summaries (JSON), rasters (PGM), rendered figures (PNG), and a manifest
listing every artifact with its SHA-256 hash.  Exit codes separate the
three outcomes a script needs to tell apart: 0 the computation ran and
the check (if any) passed, 1 the computation ran and the check failed,
2 the input was unusable.

Reruns with the same scenario and seed write byte-identical artifacts;
the thread count (--threads or SDL_THREADS) is recorded in the manifest
but never affects output bytes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from .blending import CodingError, code_point, find_cycle, verify_blending
from .certificates import (certificate_to_dict, search_certificate,
                           verify_expanding)
from .ergodicity import (birkhoff_test, density_ball_probe, jensen_diagnostic,
                         pullback_saturate, random_orbit_stats)
from .geometry import DomainError, InputError, verify_cover
from .ifs import (BoxSet, GridMeasure, ac_diagnostic, chaos_game,
                  distortion_constants, empirical_distortion,
                  hutchinson_attractor, ulam_stationary, vitali_check,
                  _chart_bounds)
from .minimality import amplify_density, invariant_arc_scan, orbit_eps_density
from .report import save_bars_figure, save_field_figure, save_tracks_figure
from .scenario import Scenario, load_scenario

__all__ = ["main", "run"]


# ---------------------------------------------------------------------------
# parameter access and artifact plumbing
# ---------------------------------------------------------------------------


def _need(params: dict, key: str):
    if key not in params:
        raise InputError(f"params.{key} is required for this command")
    return params[key]


def _num(params: dict, key: str, default: float) -> float:
    try:
        return float(params.get(key, default))
    except (TypeError, ValueError) as err:
        raise InputError(f"params.{key} must be a number") from err


def _count(params: dict, key: str, default: int) -> int:
    try:
        return int(params.get(key, default))
    except (TypeError, ValueError) as err:
        raise InputError(f"params.{key} must be an integer") from err


def _point(params: dict, key: str):
    raw = _need(params, key)
    try:
        return [float(v) for v in (raw if hasattr(raw, "__len__") else [raw])]
    except (TypeError, ValueError) as err:
        raise InputError(f"params.{key} must be a point "
                         f"(list of coordinates)") from err


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return str(obj) if not isinstance(obj, (str, type(None))) else obj


class Emitter:
    """Writes artifacts under one directory and tracks them for hashing."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.out_dir, name)

    def json(self, name: str, obj) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                cells = []
                for v in row:
                    if isinstance(v, (float, np.floating)):
                        cells.append("%.17g" % v)
                    else:
                        cells.append(str(v))
                fh.write(",".join(cells) + "\n")

    def manifest(self, command: str, params: dict, seed, threads: int,
                 wall: float) -> None:
        hashes = {}
        for name in self.artifacts:
            digest = hashlib.sha256()
            with open(os.path.join(self.out_dir, name), "rb") as fh:
                digest.update(fh.read())
            hashes[name] = digest.hexdigest()
        doc = {
            "command": command,
            "params": _jsonable(params),
            "seed": seed,
            "threads": threads,
            "wall_time_s": round(wall, 6),
            "artifacts": hashes,
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _boxset_from_region(m, region, res: int) -> BoxSet:
    probe = BoxSet.full(m, res)
    cen = probe.centers()
    inside = np.asarray(region.margin(m, cen)) >= 0
    mask = np.zeros((res,) * m.dim, dtype=bool)
    mask[tuple(probe.box_indices(cen[inside]).T)] = True
    if not mask.any():
        raise InputError("region grabs no boxes at this resolution")
    return BoxSet(m, res, mask)


# ---------------------------------------------------------------------------
# command handlers: expansion side
# ---------------------------------------------------------------------------


def _cmd_verify_expanding(sc: Scenario, p: dict, em: Emitter) -> int:
    cert = sc.named("certificates", p.get("certificate"))
    rep = verify_expanding(sc.generators, cert,
                           grid_step=_num(p, "grid_step", 1e-3))
    em.json("report.json", {
        "valid": rep.valid,
        "margin": rep.margin,
        "slack": rep.slack,
        "covers": rep.cover.covers,
        "lebesgue_lower_bound": rep.cover.lebesgue_number_lower_bound,
        "item_margins": rep.item_margins,
        "failures": rep.failures,
    })
    em.csv("margins.csv", ["index", "word", "kappa", "margin"],
           [(i, str(it.word), it.kappa_i, mg)
            for i, (it, mg) in enumerate(zip(cert.items, rep.item_margins))])
    save_bars_figure([str(it.word) for it in cert.items], rep.item_margins,
                     em.path("margins.png"), title="per-ball margin",
                     hline=rep.slack)
    return 0 if rep.valid else 1


def _cmd_search_certificate(sc: Scenario, p: dict, em: Emitter) -> int:
    res = search_certificate(
        sc.generators,
        kappa_target=float(_need(p, "kappa_target")),
        max_word_len=_count(p, "max_word_len", 8),
        grid_step=_num(p, "grid_step", 1e-2),
        group_mode=bool(p.get("group_mode", False)),
    )
    em.json("report.json", {
        "found": res.found,
        "items": 0 if res.certificate is None else len(res.certificate.items),
        "kappa": None if res.certificate is None else res.certificate.kappa,
        "misses": res.best_table,
    })
    if res.certificate is not None:
        em.json("certificate.json", certificate_to_dict(res.certificate))
        save_bars_figure(
            [str(it.word) for it in res.certificate.items],
            [it.kappa_i for it in res.certificate.items],
            em.path("kappas.png"), title="per-ball kappa", hline=1.0)
    return 0 if res.found else 1


def _cmd_orbit_density(sc: Scenario, p: dict, em: Emitter) -> int:
    eps = float(_need(p, "eps"))
    orbit = orbit_eps_density(
        sc.generators, _point(p, "x"), eps,
        max_depth=_count(p, "max_depth", 40),
        eval_step=float(p["eval_step"]) if "eval_step" in p else None,
    )
    ok = orbit.achieved_eps <= eps
    em.json("report.json", {
        "target_eps": eps,
        "achieved_eps": orbit.achieved_eps,
        "depth_reached": orbit.depth_reached,
        "points": len(orbit.points),
        "ok": ok,
    })
    em.csv("points.csv",
           ["x%d" % a for a in range(sc.manifold.dim)] + ["word"],
           [tuple(pt) + (str(w),) for pt, w in zip(orbit.points, orbit.words)])
    mfig = GridMeasure.from_points(sc.manifold, 128, orbit.points)
    save_field_figure(mfig, em.path("points.png"), title="orbit samples")
    return 0 if ok else 1


def _cmd_amplify(sc: Scenario, p: dict, em: Emitter) -> int:
    cert = sc.named("certificates", p.get("certificate"))
    eps = float(_need(p, "eps"))
    rounds = _count(p, "rounds", 1)
    cover_rep = verify_cover(sc.manifold, cert.cover,
                             _num(p, "grid_step", 1e-3))
    bound = cover_rep.lebesgue_number_lower_bound
    orbit = orbit_eps_density(
        sc.generators, _point(p, "x"), eps,
        max_depth=_count(p, "max_depth", 40),
        eval_step=float(p["eval_step"]) if "eval_step" in p else None,
    )
    history = [(0, orbit.achieved_eps, float("nan"))]
    for r in range(1, rounds + 1):
        nxt = amplify_density(sc.generators, cert, orbit,
                              lebesgue_bound=bound)
        history.append((r, nxt.achieved_eps,
                        nxt.achieved_eps / orbit.achieved_eps))
        orbit = nxt
    em.csv("rounds.csv", ["round", "achieved_eps", "ratio"], history)
    ratios = [h[2] for h in history[1:]]
    ok = all(r <= 1.0 for r in ratios)
    em.json("report.json", {
        "initial_eps": history[0][1],
        "final_eps": history[-1][1],
        "ratios": ratios,
        "lebesgue_bound": bound,
        "ok": ok,
    })
    save_bars_figure([str(h[0]) for h in history],
                     [h[1] for h in history], em.path("rounds.png"),
                     title="covering radius per round")
    return 0 if ok else 1


def _cmd_scan_invariant(sc: Scenario, p: dict, em: Emitter) -> int:
    arcs = invariant_arc_scan(sc.generators,
                              grid_step=_num(p, "grid_step", 1e-3),
                              tol=_num(p, "tol", 1e-9))
    em.json("arcs.json", {"count": len(arcs), "arcs": arcs})
    save_bars_figure([f"{a['start']:.3f}" for a in arcs] or ["none"],
                     [a["length"] for a in arcs] or [0.0],
                     em.path("arcs.png"), title="invariant arc lengths")
    # finding a proper invariant arc defeats minimality, hence 1
    return 1 if arcs else 0


# ---------------------------------------------------------------------------
# command handlers: blending side
# ---------------------------------------------------------------------------


def _cmd_verify_blending(sc: Scenario, p: dict, em: Emitter) -> int:
    region = sc.named("blending", p.get("blending"))
    rep = verify_blending(sc.generators, region,
                          mode=str(p.get("mode", "strict")),
                          grid_step=_num(p, "grid_step", 1e-3),
                          seed=_count(p, "seed", 0))
    em.json("report.json", {
        "ok": rep.ok,
        "mode": rep.mode,
        "covering_ok": rep.covering_ok,
        "covering_worst": rep.covering_worst,
        "contraction_ok": rep.contraction_ok,
        "contraction_worst": rep.contraction_worst,
        "containment_ok": rep.containment_ok,
        "containment_worst": rep.containment_worst,
    })
    save_bars_figure(
        ["covering", "contraction", "containment"],
        [rep.covering_worst[0], region.beta - rep.contraction_worst[0],
         rep.containment_worst[0]],
        em.path("margins.png"), title="worst margins", hline=0.0)
    return 0 if rep.ok else 1


def _cmd_find_cycle(sc: Scenario, p: dict, em: Emitter) -> int:
    region = sc.named("blending", p.get("blending"))
    wit = find_cycle(sc.generators, region,
                     max_word_len=_count(p, "max_word_len", 8),
                     grid_step=_num(p, "grid_step", 1e-2))
    em.json("cycle.json", {
        "found": wit.found,
        "T_words": [str(w) for w in wit.T_words],
        "S_words": [str(w) for w in wit.S_words],
        "t_residual": wit.t_residual,
        "s_residual": wit.s_residual,
    })
    save_bars_figure(["T residual", "S residual"],
                     [wit.t_residual, wit.s_residual],
                     em.path("residuals.png"), title="uncovered fractions")
    return 0 if wit.found else 1


def _cmd_code_point(sc: Scenario, p: dict, em: Emitter) -> int:
    region = sc.named("blending", p.get("blending"))
    x = _point(p, "x")
    n = _count(p, "n", 10)
    y = _point(p, "y") if "y" in p else None
    try:
        res = code_point(sc.generators, region, x, n, y=y)
    except CodingError as err:
        em.json("point.json", {"ok": False, "error": str(err)})
        return 1
    em.json("point.json", {
        "ok": True,
        "digits": res.digits,
        "word": str(res.word),
        "error_bound": res.error_bound,
        "final_point": res.final_point,
        "distance": res.distance,
    })
    em.csv("pullbacks.csv",
           ["level"] + ["x%d" % a for a in range(sc.manifold.dim)],
           [(i,) + tuple(pt) for i, pt in enumerate(res.pullbacks)])
    tracks = {"x%d" % a: [pt[a] for pt in res.pullbacks]
              for a in range(sc.manifold.dim)}
    save_tracks_figure(tracks, em.path("pullbacks.png"),
                       title="pullback trajectory", xlabel="level")
    return 0


# ---------------------------------------------------------------------------
# command handlers: contraction side
# ---------------------------------------------------------------------------


def _cmd_attractor(sc: Scenario, p: dict, em: Emitter) -> int:
    system = sc.system()
    res = hutchinson_attractor(system, _count(p, "resolution", 256))
    em.json("report.json", {
        "residual": res.residual,
        "iterations": res.iterations,
        "counts": res.counts,
        "converged": res.converged,
        "boxes": res.boxes.count(),
    })
    res.boxes.to_csv(em.path("boxes.csv"))
    res.boxes.to_pgm(em.path("attractor.pgm"))
    save_field_figure(res.boxes, em.path("attractor.png"), title="attractor")
    return 0 if res.converged else 1


def _cmd_chaos_game(sc: Scenario, p: dict, em: Emitter) -> int:
    system = sc.system(need_probs=True)
    res = chaos_game(system,
                     n_samples=_count(p, "n_samples", 1_000_000),
                     resolution=_count(p, "resolution", 256),
                     burn_in=_count(p, "burn_in", 64),
                     seed=_count(p, "seed", 0),
                     streams=_count(p, "streams", 8))
    spread = max(s.l1_distance(res.measure) for s in res.stream_measures)
    em.json("report.json", {
        "streams": res.streams,
        "burn_in": res.burn_in,
        "stream_l1_spread": spread,
    })
    res.measure.to_csv(em.path("measure.csv"))
    res.measure.to_pgm(em.path("measure.pgm"))
    save_field_figure(res.measure, em.path("measure.png"),
                      title="chaos game histogram")
    return 0


def _cmd_ulam(sc: Scenario, p: dict, em: Emitter) -> int:
    system = sc.system(need_probs=True)
    tol = _num(p, "tol", 1e-10)
    res = ulam_stationary(system,
                          resolution=_count(p, "resolution", 256),
                          samples_per_axis=_count(p, "samples_per_axis", 32),
                          tol=tol,
                          max_iter=_count(p, "max_iter", 20000))
    em.json("report.json", {
        "residual": res.residual,
        "iterations": res.iterations,
        "stagnated": res.second_measure is not None,
    })
    res.measure.to_csv(em.path("measure.csv"))
    res.measure.to_pgm(em.path("measure.pgm"))
    if res.second_measure is not None:
        res.second_measure.to_csv(em.path("second_measure.csv"))
    save_field_figure(res.measure, em.path("measure.png"),
                      title="stationary measure")
    return 0 if res.residual <= tol else 1


def _cmd_distortion(sc: Scenario, p: dict, em: Emitter) -> int:
    alpha = _num(p, "alpha", 1.0)
    if "C" in p:
        C = float(p["C"])
    else:
        C = max(g.log_deriv_lipschitz() for g in sc.generators)
    if "kappa" in p:
        kappa = float(p["kappa"])
    else:
        if sc.beta is None:
            raise InputError("params.kappa or scenario beta is required")
        kappa = 1.0 / sc.beta
    if "K" in p:
        K = float(p["K"])
    else:
        lo, hi = _chart_bounds(sc.manifold)
        K = float(np.linalg.norm(hi - lo))
    consts = distortion_constants(alpha, C, kappa, K)
    oracle = empirical_distortion(list(sc.generators),
                                  depth=_count(p, "depth", 4),
                                  n_pairs=_count(p, "n_pairs", 200),
                                  seed=_count(p, "seed", 0))
    round_tol = _num(p, "tol", 0.1)
    det_ok = oracle.sup_det_ratio <= consts.L_H * (1.0 + 1e-9)
    round_ok = (oracle.sup_roundness_ratio
                <= (1.0 / consts.K_H) * (1.0 + round_tol))
    em.json("report.json", {
        "L_H": consts.L_H,
        "K_H": consts.K_H,
        "alpha": alpha, "C": C, "kappa": kappa, "K": K,
        "oracle_det_ratio": oracle.sup_det_ratio,
        "oracle_roundness_ratio": oracle.sup_roundness_ratio,
        "words_checked": oracle.words_checked,
        "det_ok": det_ok,
        "roundness_ok": round_ok,
    })
    save_bars_figure(["oracle det", "L_H", "oracle round", "1/K_H"],
                     [oracle.sup_det_ratio, consts.L_H,
                      oracle.sup_roundness_ratio, 1.0 / consts.K_H],
                     em.path("bounds.png"), title="oracle vs closed form")
    return 0 if det_ok and round_ok else 1


def _cmd_vitali(sc: Scenario, p: dict, em: Emitter) -> int:
    system = sc.system()
    rep = vitali_check(system,
                       depth=_count(p, "depth", 4),
                       resolution=_count(p, "resolution", 128))
    em.json("report.json", {
        "c_vitali": rep.c_vitali,
        "worst_word": str(rep.worst_word),
        "per_depth": rep.per_depth,
        "growth": rep.growth,
        "v_regular": rep.v_regular,
        "shrinking_cover_ok": rep.shrinking_cover_ok,
        "cover_failures": rep.cover_failures,
        "excluded": rep.excluded,
    })
    save_bars_figure([str(d) for d in range(len(rep.per_depth))],
                     rep.per_depth, em.path("per_depth.png"),
                     title="regularity constant by depth")
    return 0 if rep.v_regular and rep.shrinking_cover_ok else 1


def _cmd_ac_diagnostic(sc: Scenario, p: dict, em: Emitter) -> int:
    system = sc.system(need_probs=True)
    res = _count(p, "resolution", 256)
    mu = ulam_stationary(system, res,
                         samples_per_axis=_count(p, "samples_per_axis", 32))
    attr = hutchinson_attractor(system, res)
    rep = ac_diagnostic(mu.measure, attr.boxes,
                        tau_low=_num(p, "tau_low", 0.01),
                        levels=_count(p, "levels", 3))
    em.json("report.json", {
        "verdict": rep.verdict,
        "frac_null_on_delta": rep.frac_null_on_delta,
        "mass_outside_delta": rep.mass_outside_delta,
        "occupancy_fractions": rep.occupancy_fractions,
        "trend_ratio": rep.trend_ratio,
        "null_boxes": rep.null_boxes,
    })
    mu.measure.to_csv(em.path("measure.csv"))
    save_field_figure(mu.measure, em.path("measure.png"),
                      title=f"stationary measure ({rep.verdict})")
    return 1 if rep.verdict == "singular-leaning" else 0


# ---------------------------------------------------------------------------
# command handlers: statistics side
# ---------------------------------------------------------------------------


def _cmd_orbit_stats(sc: Scenario, p: dict, em: Emitter) -> int:
    lo, hi = _chart_bounds(sc.manifold)
    x = _point(p, "x") if "x" in p else list((lo + hi) / 2.0)
    st = random_orbit_stats(sc.generators, sc.probs, x,
                            _count(p, "n", 10000),
                            seed=_count(p, "seed", 0))
    em.json("report.json", {
        "rho": st.rho,
        "c_omega": st.c_omega,
        "nue_average": st.nue_average,
        "temperedness_slope": st.temperedness_slope,
        "n": st.n,
        "seed": st.seed,
    })
    em.csv("stats.csv",
           ["step", "log_co_sum", "log_op_sum", "log_det_sum", "prefix_min"],
           zip(range(st.n + 1), st.log_co_sums, st.log_op_sums,
               st.log_det_sums, st.prefix_min))
    save_tracks_figure(
        {"log co-norm sum": st.log_co_sums,
         "log op-norm sum": st.log_op_sums,
         "log |det| sum": st.log_det_sums},
        em.path("tracks.png"), title="derivative growth along the orbit")
    return 0


def _cmd_jensen(sc: Scenario, p: dict, em: Emitter) -> int:
    rep = jensen_diagnostic(sc.generators,
                            _count(p, "quadrature_points", 10000))
    em.json("report.json", {
        "per_map": rep.per_map,
        "words": [str(w) for w in rep.words],
        "per_word": rep.per_word,
        "tolerance": rep.tolerance,
        "all_nonpositive": rep.all_nonpositive,
    })
    labels = [f"map {i}" for i in range(len(rep.per_map))]
    labels += [str(w) for w in rep.words]
    save_bars_figure(labels, list(rep.per_map) + list(rep.per_word),
                     em.path("integrals.png"),
                     title="volume integral of log |det Df|", hline=0.0)
    return 0 if rep.all_nonpositive else 1


def _cmd_birkhoff(sc: Scenario, p: dict, em: Emitter) -> int:
    observables = _need(p, "observables")
    if not isinstance(observables, list) or not observables:
        raise InputError("params.observables must be a nonempty list of tags")
    res = _count(p, "resolution", 256)
    reference = str(p.get("reference", "uniform"))
    if reference == "uniform":
        mu_ref = GridMeasure.uniform(sc.manifold, res)
    elif reference == "ulam":
        mu_ref = ulam_stationary(sc.system(need_probs=True), res).measure
    else:
        raise InputError("params.reference must be 'uniform' or 'ulam'")
    rep = birkhoff_test(
        sc.generators, sc.probs, mu_ref, observables,
        n=_count(p, "n", 10000),
        n_seeds=_count(p, "n_seeds", 8),
        seed=_count(p, "seed", 0),
        x0=_point(p, "x0") if "x0" in p else None,
        burn_in=_count(p, "burn_in", 64),
    )
    rep.to_csv(em.path("deviations.csv"))
    em.json("report.json", {
        "observables": rep.observables,
        "space_averages": rep.space_averages,
        "mean_deviation": rep.mean_deviation,
        "max_deviation": rep.max_deviation,
        "thresholds": rep.thresholds,
        "per_observable_pass": rep.per_observable_pass,
        "passed": rep.passed,
    })
    ratios = [d / t if t > 0 else float("inf")
              for d, t in zip(rep.max_deviation, rep.thresholds)]
    save_bars_figure(rep.observables, ratios, em.path("deviations.png"),
                     title="max deviation / threshold", hline=1.0)
    return 0 if rep.passed else 1


def _cmd_density_probe(sc: Scenario, p: dict, em: Emitter) -> int:
    radius = float(_need(p, "radius"))
    threshold = _num(p, "threshold", 0.99)
    res = _count(p, "resolution", 256)
    if "region" in p:
        A = _boxset_from_region(sc.manifold, sc.named("regions", p["region"]),
                                res)
    else:
        A = hutchinson_attractor(sc.system(), res).boxes
    rep = density_ball_probe(A, radius, threshold=threshold)
    em.json("report.json", {
        "center": rep.ball.center,
        "radius": rep.radius,
        "fill_ratio": rep.fill_ratio,
        "threshold": rep.threshold,
        "n_hits": len(rep.hits),
        "n_density_points": len(rep.density_points),
    })
    em.csv("hits.csv", ["x%d" % a for a in range(sc.manifold.dim)],
           [tuple(h) for h in rep.hits])
    save_field_figure(A, em.path("set.png"), title="probed set")
    return 0 if rep.fill_ratio >= threshold else 1


def _cmd_saturate(sc: Scenario, p: dict, em: Emitter) -> int:
    res = _count(p, "resolution", 512)
    region = sc.named("regions", p.get("region"))
    within = None
    if "within" in p:
        within = _boxset_from_region(
            sc.manifold, sc.named("regions", p["within"]), res)
    sat = pullback_saturate(sc.generators, region, res,
                            max_iter=_count(p, "max_iter", 64),
                            within=within)
    min_cov = _num(p, "min_coverage", 0.99)
    em.json("report.json", {
        "coverage": sat.coverage,
        "iterations": sat.iterations,
        "converged": sat.converged,
        "boxes": sat.boxes.count(),
    })
    sat.boxes.to_csv(em.path("boxes.csv"))
    sat.boxes.to_pgm(em.path("saturated.pgm"))
    save_field_figure(sat.boxes, em.path("saturated.png"),
                      title="saturated region")
    return 0 if sat.converged and sat.coverage >= min_cov else 1


_HANDLERS = {
    "verify-expanding": _cmd_verify_expanding,
    "search-certificate": _cmd_search_certificate,
    "verify-blending": _cmd_verify_blending,
    "find-cycle": _cmd_find_cycle,
    "code-point": _cmd_code_point,
    "orbit-density": _cmd_orbit_density,
    "amplify": _cmd_amplify,
    "scan-invariant": _cmd_scan_invariant,
    "attractor": _cmd_attractor,
    "chaos-game": _cmd_chaos_game,
    "ulam": _cmd_ulam,
    "distortion": _cmd_distortion,
    "vitali": _cmd_vitali,
    "ac-diagnostic": _cmd_ac_diagnostic,
    "orbit-stats": _cmd_orbit_stats,
    "jensen": _cmd_jensen,
    "birkhoff": _cmd_birkhoff,
    "density-probe": _cmd_density_probe,
    "saturate": _cmd_saturate,
}


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def run(command: str, scenario_path: str, out_dir: str,
        overrides: dict | None = None, threads: int | None = None) -> int:
    """Load, dispatch, emit; returns the exit code."""
    if command not in _HANDLERS:
        raise InputError(f"unknown command {command!r}")
    sc = load_scenario(scenario_path)
    params = dict(sc.params)
    for key, value in (overrides or {}).items():
        if value is not None:
            params[key] = value
    if threads is None:
        threads = int(os.environ.get("SDL_THREADS", "1") or "1")
    em = Emitter(out_dir)
    start = time.monotonic()
    code = _HANDLERS[command](sc, params, em)
    wall = time.monotonic() - start
    em.manifest(command, params, params.get("seed"), threads, wall)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ergolab",
        description="numerical laboratory for semigroup actions and "
                    "contracting systems",
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--res", type=int, default=None,
                        help="override params.resolution")
    parser.add_argument("--depth", type=int, default=None)
    parser.add_argument("--grid-step", type=float, default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker count; recorded, never changes results")
    args = parser.parse_args(argv)
    overrides = {
        "seed": args.seed,
        "resolution": args.res,
        "depth": args.depth,
        "grid_step": args.grid_step,
    }
    try:
        return run(args.command, args.scenario, args.out, overrides,
                   threads=args.threads)
    except (InputError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
