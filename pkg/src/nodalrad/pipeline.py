"""End-to-end analysis of one eigenfunction and of a seeded ensemble."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bounds
from .config import RunConfig
from .covering import ClaimViolation, CubeCovering, all_tau, build_covering, check_good_mass_floor, find_star_domain, \
    inradius_cube_size
from .nodal import NodalDecomposition, decompose, deficit_exponent, max_point_ball_profile
from .rayleigh import SpecialCube, all_domain_quotients, find_special_cube, mean_value_defect, nodal_points, \
    cube_quotient_constant, asymmetry_constant
from .sampling import SampledField, default_resolution, sample
from .spectral import EigenfunctionSpec, enumerate_eigenspace, random_eigenfunction

log = logging.getLogger(__name__)

POINTWISE = ("good_mass_floor", "special_cube_found", "star_domain_found", "mean_value_defect")


class StageError(RuntimeError):
    pass


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, (StageError, ClaimViolation)):
            raise StageError(f"{self.name}: {exc}") from exc
        return False


def spec_filename(lam: float, seed: int) -> str:
    return f"ef_lambda{lam:.6f}_seed{seed}.json"


def resolution_for(spec: EigenfunctionSpec, config: RunConfig) -> int:
    if config.resolution_rule == "fixed":
        return int(config.resolution)
    return default_resolution(spec, config.cells_per_wavelength, config.min_resolution)


@dataclass(eq=False)
class Analysis:
    field: SampledField
    decomposition: NodalDecomposition
    covering: CubeCovering
    special: dict[int, SpecialCube]
    report: bounds.BoundsReport


def analyze(spec: EigenfunctionSpec, config: RunConfig, name: str = "spec") -> Analysis:
    n = spec.dimension
    lam = spec.eigenvalue
    windows = config.windows
    with _stage("sample"):
        field = sample(spec, resolution_for(spec, config))
    with _stage("decompose"):
        dec = decompose(field)
    with _stage("covering"):
        h = config.h if config.h_rule == "fixed" else inradius_cube_size(field, dec, config.h_factor)
        if config.gamma_rule == "fixed":
            cov = build_covering(field, h, gamma=config.gamma, delta=config.delta)
        else:
            cov = build_covering(field, h, delta=config.delta, gamma_rule="4kappa")
    checks: dict[str, bool] = {}
    extras: dict = {}
    failures: list[str] = []

    with _stage("covering"):
        try:
            check_good_mass_floor(cov)
            checks["good_mass_floor"] = True
        except ClaimViolation as exc:
            checks["good_mass_floor"] = False
            failures.append(str(exc))
        try:
            star = find_star_domain(cov, dec)
            checks["star_domain_found"] = True
        except ClaimViolation as exc:
            star = None
            checks["star_domain_found"] = False
            failures.append(str(exc))
        taus = all_tau(cov, dec)

    special: dict[int, SpecialCube] = {}
    with _stage("rayleigh"):
        quotients = all_domain_quotients(dec)
        found_all = True
        for d in dec.domains:
            if taus.get(d.label, 0.0) <= 0:
                continue
            try:
                special[d.label] = find_special_cube(field, dec, d.label, cov)
            except ClaimViolation as exc:
                found_all = False
                failures.append(f"domain {d.label}: {exc}")
        checks["special_cube_found"] = found_all

        rng = np.random.default_rng([spec.rng_seed or 0, 4, 3])
        pts = nodal_points(field, config.mean_value_points, rng)
        radius = 0.5 / math.sqrt(lam)
        defects = [mean_value_defect(field, p, radius) for p in pts]
        level = windows["mean_value_level"]
        frac_ok = float(np.mean([v <= level for v in defects])) if defects else 1.0
        checks["mean_value_defect"] = frac_ok >= windows["mean_value_fraction"]
        extras["mean_value_defect"] = {"radius": radius, "count": len(defects), "fraction_ok": frac_ok,
                               "max_defect": max(defects) if defects else None,
                               "median_defect": float(np.median(defects)) if defects else None}

        top = max(dec.domains, key=lambda d: (abs(d.max_value), -d.label))
        guard = min(field.side_lengths) / 2 * math.sqrt(lam)
        radii = [r for r in config.ball_fraction_radii if r < guard]
        profile = max_point_ball_profile(field, dec, top.label, radii)
        extras["ball_fraction"] = {"label": top.label, "profile": [list(p) for p in profile],
                            "slope": deficit_exponent(profile, *windows["ball_fraction_deficit_range"])[0]}

    with _stage("bounds"):
        thm = {r["label"]: r for r in bounds.verify_good_mass_bound(field, dec, cov)}
        cor = {r["label"]: r for r in bounds.verify_l2_mass_bound(dec, cov)}
        rows = []
        for d in dec.domains:
            t, c = thm[d.label], cor[d.label]
            sc = special.get(d.label)
            flags = []
            if t["flag"]:
                flags.append(t["flag"])
            if not c["ok"]:
                flags.append("tau_below_quarter")
            rows.append(bounds.DomainRow(
                label=d.label, sign=d.sign, volume=d.volume, l2_mass=d.l2_mass,
                inradius=d.inradius, inradius_error=d.inradius_error,
                upper_ratio=d.inradius * math.sqrt(lam), tau=t["tau"], gamma=cov.gamma, kappa=cov.kappa,
                good_mass_bound_rhs_over_C=t["rhs_over_C"], good_mass_bound_ratio=t["ratio"],
                l2_mass_bound_rhs_over_C=c["rhs_over_C"], l2_mass_bound_ratio=c["ratio"],
                l2_mass_bound_gamma=c["gamma"], l2_mass_bound_tau=c["tau"], l2_mass_bound_ok=c["ok"],
                rayleigh_quotient=quotients.get(d.label),
                special_cube_quotient=None if sc is None else sc.quotient,
                special_cube_rhs=None if sc is None else sc.rhs,
                flags=flags,
            ))
        fat = dec.fat_domain
        sum_stat = bounds.verify_sum_inequality(dec, lam) if n >= 3 else None
        rel = [abs(q / lam - 1) for q in quotients.values()]
        extras["eigen_identity"] = {"max_rel_error": max(rel), "domains": len(rel),
                                    "within_tol": max(rel) <= windows["rayleigh_rel_tol"]}
        star_sc = special.get(star) if star is not None else None
        if star_sc is not None:
            extras["special_cube"] = {
                "label": star, "cube_quotient_C": cube_quotient_constant(star_sc.quotient, lam, cov.h, n),
                "asymmetry_C": asymmetry_constant(min(star_sc.positive_fraction, star_sc.negative_fraction),
                                                  cov.gamma),
            }
        extras["failures"] = failures
        extras["zero_cells"] = dec.zero_cell_count
        extras["domain_count"] = len(dec.domains)
        report = bounds.BoundsReport(
            spec_name=name, lam=lam, dimension=n, resolution=list(field.resolution), h=cov.h,
            delta=cov.delta, gamma=cov.gamma, kappa=cov.kappa, rows=rows,
            fat_domain_label=fat.label, fat_domain_inradius=fat.inradius, sum_power_statistic=sum_stat,
            star_domain=star, good_mass=cov.good_mass, good_mass_floor=cov.good_mass_floor,
            good_mass_margin=cov.good_mass_margin, checks=checks, extras=extras,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
    return Analysis(field, dec, cov, special, report)


def write_analysis(analysis: Analysis, out_dir, stem: str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "domains": out / f"{stem}_domains.csv",
        "covering": out / f"{stem}_covering.csv",
        "covering_header": out / f"{stem}_covering.json",
        "special": out / f"{stem}_special.json",
        "bounds": out / f"{stem}_bounds.json",
        "bounds_csv": out / f"{stem}_bounds.csv",
    }
    analysis.decomposition.to_csv(paths["domains"])
    analysis.covering.to_csv(paths["covering"], paths["covering_header"])
    star = analysis.report.star_domain
    sc = analysis.special.get(star) if star is not None else None
    if sc is None and analysis.special:
        sc = analysis.special[min(analysis.special)]
    paths["special"].write_text(sc.to_json() if sc is not None else json.dumps({"schema_version": 1}) + "\n",
                                encoding="utf-8")
    paths["bounds"].write_text(analysis.report.to_json(), encoding="utf-8")
    analysis.report.to_csv(paths["bounds_csv"])
    return paths


def load_spec(path) -> EigenfunctionSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return EigenfunctionSpec.loads(text)
    except json.JSONDecodeError as exc:
        raise StageError(f"parse: invalid JSON in {path}: {exc}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        raise StageError(f"parse: {msg}") from exc


def cmd_gen(config: RunConfig, out_dir=None) -> list[Path]:
    out = Path(out_dir if out_dir is not None else config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError(f"gen: cannot create output directory {out}: {exc}") from exc
    manifold = config.manifold_spec
    written = []
    for lam in config.eigenvalues():
        if not enumerate_eigenspace(manifold, lam, config.lam_window):
            log.warning("skipping lambda=%r: no modes at target eigenvalue", lam)
            continue
        for seed in config.seeds():
            spec = random_eigenfunction(manifold, lam, config.lam_window, seed)
            path = out / spec_filename(lam, seed)
            try:
                path.write_text(spec.dumps(), encoding="utf-8")
            except OSError as exc:
                raise StageError(f"gen: cannot write {path}: {exc}") from exc
            written.append(path)
    return written


def cmd_analyze(spec_path, config: RunConfig, out_dir=None) -> Analysis:
    spec = load_spec(spec_path)
    stem = Path(spec_path).stem
    analysis = analyze(spec, config, stem)
    write_analysis(analysis, out_dir if out_dir is not None else config.out_dir, stem)
    return analysis


def _scan_one(args):
    spec_path, config_text, out_dir = args
    config = RunConfig.loads(config_text)
    try:
        analysis = cmd_analyze(spec_path, config, out_dir)
        return spec_path, analysis.report.to_dict(), None
    except Exception as exc:  # scan continues through failures
        return spec_path, None, f"{type(exc).__name__}: {exc}"


def ensemble_summary(reports: list[bounds.BoundsReport], config: RunConfig) -> dict:
    w = config.windows
    summary: dict = {"schema_version": bounds.SCHEMA_VERSION, "members": len(reports)}
    pointwise = {k: all(r.checks.get(k, False) for r in reports) for k in POINTWISE}
    summary["pointwise"] = pointwise
    try:
        fat = bounds.verify_fat_domain_scaling(reports)
        summary["fat_domain_scaling"] = fat.to_dict()
        summary["fat_slope_in_window"] = w["fat_slope"][0] <= fat.slope <= w["fat_slope"][1]
    except ValueError as exc:
        summary["fat_domain_scaling"] = {"refused": str(exc)}
    if reports:
        lo, hi = w["inradius_product_band"]
        fat = [r.fat_domain_inradius * math.sqrt(r.lam) for r in reports]
        every = [row.upper_ratio for r in reports for row in r.rows]
        summary["inradius_products"] = {"fat_min": min(fat), "fat_max": max(fat), "all_domains_max": max(every),
                                        "band": [lo, hi],
                                        "in_band": bool(lo <= min(fat) and max(every) <= hi)}
    if reports and reports[0].dimension >= 3:
        try:
            s = bounds.sum_inequality_scaling(reports)
            summary["sum_inequality"] = s.to_dict()
            summary["sum_slope_ok"] = s.slope >= w["sum_slope_min"]
        except ValueError as exc:
            summary["sum_inequality"] = {"refused": str(exc)}
    if len({r.lam for r in reports}) >= 2:
        thm = bounds.bound_constant_stability(reports)
        summary["bound_constant"] = thm
        if "kendall_p" in thm:
            no_trend = thm["kendall_p"] > w["kendall_p"] or abs(thm["loglog_slope"]) <= w["bound_constant_slope_abs"]
            summary["bound_constant_ok"] = bool(thm["max_over_min"] < w["bound_constant_max_factor"] and no_trend)
    profiles = [r.extras["ball_fraction"]["profile"] for r in reports if "ball_fraction" in r.extras]
    common = min((len(p) for p in profiles), default=0)
    if common:
        slope, used = deficit_exponent([[tuple(x) for x in p[:common]] for p in profiles],
                                       *w["ball_fraction_deficit_range"])
        summary["ball_fraction"] = {"slope": slope, "points": used, "threshold": w["ball_fraction_slope_min"],
                             "ok": bool(slope >= w["ball_fraction_slope_min"]) if math.isfinite(slope) else None}
    summary["eigen_identity_max_rel_error"] = max(
        (r.extras["eigen_identity"]["max_rel_error"] for r in reports), default=None)
    return bounds._clean(summary)


def cmd_scan(config: RunConfig, out_dir=None, jobs: int | None = None) -> int:
    """Generate, analyse and summarise the ensemble. Returns the process exit code."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    if len(config.eigenvalues()) < 2:
        raise ValueError("scan needs at least 2 eigenvalues")
    specs = cmd_gen(config, out / "specs")
    jobs = config.jobs if jobs is None else jobs
    reports_dir = out / "reports"
    text = config.dumps()
    tasks = [(str(p), text, str(reports_dir)) for p in specs]
    if jobs <= 1:
        results = [_scan_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_one, tasks))
    reports, errors = [], {}
    for path, rep, err in results:
        if err is not None:
            errors[Path(path).name] = err
            log.error("%s failed: %s", Path(path).name, err)
        else:
            reports.append(bounds.BoundsReport.from_dict(rep))
    summary = ensemble_summary(reports, config) if reports else {"members": 0}
    summary["errors"] = errors
    failed = sorted(r.spec_name for r in reports if not all(r.checks.get(k, False) for k in POINTWISE))
    summary["pointwise_failures"] = failed
    (out / "scan_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    with open(out / "scan_reports.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["spec", "lambda", "resolution", "domains", "fat_inradius", "sum_power_statistic",
                     "good_mass", "good_mass_margin", "star_domain"] + list(POINTWISE))
        for r in reports:
            wr.writerow([r.spec_name, repr(r.lam), r.resolution[0], len(r.rows), repr(r.fat_domain_inradius),
                         "" if r.sum_power_statistic is None else repr(r.sum_power_statistic),
                         repr(r.good_mass), repr(r.good_mass_margin), r.star_domain]
                        + [int(r.checks.get(k, False)) for k in POINTWISE])
    return 1 if (failed or errors) else 0
