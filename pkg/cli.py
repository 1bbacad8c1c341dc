"""
Command-line interface: ``skewdyn <orbit|classify|green|stable|iterate|verify|sweep|raster>``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid configuration.
"""

import argparse
import io
import json
import logging
import sys
from typing import Callable, Dict, List, Optional, Sequence, TextIO

import symalg
from analysis import (InvalidRegionError, NoConvergenceError, Region, RegionSpec, SampleSpec, Verdict,
                      check_lemma_identity, classify, phase_transition_probe, region_test, sample_box,
                      sample_fibres, sample_omega, sample_omega_prime, sink_radius, speed_certificate, stable_root)
from config import ConfigError, RunConfig, load_config, schema_json, sweep_family
from data_processor import OrbitTable, growth_summary, write_csv, write_sweep
from dynsys import Point3, StopPolicy, check_conjugacy, check_fibonacci_restriction, orbit
from green import (check_functional_equation, check_semiconjugacy, continuity_scan, fit_growth_ceiling, green_minus,
                   green_plus)
from params import ParameterDomainError
from plotter import OrbitPlotter
from raster import render_raster
from utils import CheckReport, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

VERIFY_SAMPLES = 100
LEMMA_MAX_N = 15
FIBONACCI_MAX_N = 30
FIBONACCI_PAIRS = [(1, 0), (0, 1), (2, -3), (-5, 8), (7, 11), (13, -1), (2 ** 60 + 1, 3)]
SPEED_STEPS = 25
STABLE_SAMPLES = 10
CONTINUITY_RADII = [k * 1e-3 for k in range(11)]
CONTINUITY_MAX_JUMP = 0.1
STABLE_PERTURBATION = 1e-3

RASTER_FLAGS = {
    "fixed_axis": int, "fixed_re": float, "fixed_im": float, "center_x": float, "center_y": float,
    "width": float, "height": float, "nx": int, "ny": int,
}


def _dump_json(payload: Dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: Optional[str], stream: TextIO) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        logger.info("Wrote %s", out)
    else:
        stream.write(text)


def _point_payload(coords) -> List[List[float]]:
    return [[c.real, c.imag] for c in coords]


def _stop_policy(config: RunConfig) -> StopPolicy:
    return StopPolicy(log_escape=config.log_escape)


# --- commands ---------------------------------------------------------------

def cmd_orbit(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    params = config.params()
    # contraction never truncates the table; max_steps bounds it
    policy = StopPolicy(log_escape=config.log_escape, window=config.max_steps + 2)
    records = orbit(params, Point3.from_complex(*config.point_complex()), config.max_steps, policy)
    logger.info("Orbit growth: %s", growth_summary(records))
    table = OrbitTable()
    table.load_records(records)
    _emit(write_csv(table.to_frame()), config.out, stream)
    if config.plot:
        plotter = OrbitPlotter()
        plotter.plot_log_magnitude(table, params)
        plotter.save_plot(config.plot)
    return EXIT_OK


def cmd_classify(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    params = config.params()
    coords = config.point_complex()
    result = classify(params, Point3.from_complex(*coords), config.budget, config.target_error,
                      _stop_policy(config), config.max_terms)
    payload = {"params": params.as_dict(), "point": _point_payload(coords),
               "target_error": config.target_error, "max_terms": config.max_terms}
    payload.update(result.as_dict())
    _emit(_dump_json(payload), config.out, stream)
    return EXIT_OK


def cmd_green(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    params = config.params()
    coords = config.point_complex()
    point = Point3.from_complex(*coords)
    payload = {"params": params.as_dict(), "point": _point_payload(coords),
               "green_plus": green_plus(params, point, config.target_error, config.max_steps).as_dict()}
    if params.is_unimodular:
        payload["green_minus"] = green_minus(params, point, config.target_error, config.max_steps).as_dict()
    _emit(_dump_json(payload), config.out, stream)
    return EXIT_OK


def cmd_sweep(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    family = sweep_family(config)
    extra = [tuple(complex(re, im) for re, im in point) for point in config.extra_points]
    sample_spec = SampleSpec(config.samples, config.seed, extra_points=extra)
    table = phase_transition_probe(family, sample_spec, config.threads, config.budget, config.target_error)
    _emit(write_sweep(table.rows, table.histogram), config.out, stream)
    return EXIT_OK


def cmd_raster(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    params = config.params()
    image = render_raster(params, config.raster, config.threads, config.budget, config.target_error)
    path = config.out or "raster.pgm"
    sidecar = image.write(path)
    if config.plot:
        plotter = OrbitPlotter()
        plotter.plot_raster_preview(image)
        plotter.save_plot(config.plot)
    stream.write(f"{path}\n{sidecar}\n")
    return EXIT_OK


def cmd_stable(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    params = config.params()
    _, p1, p2 = config.point_complex()
    payload = {"params": params.as_dict(), "p1": [p1.real, p1.imag], "p2": [p2.real, p2.imag]}
    try:
        root = stable_root(params, p1, p2)
    except NoConvergenceError as e:
        logger.warning("No stable root: %s", e)
        payload.update({"converged": False, "error": str(e)})
        _emit(_dump_json(payload), config.out, stream)
        return EXIT_CHECK_FAILED
    point = Point3.from_complex(root.p0, p1, p2)
    payload.update({
        "converged": True,
        "p0": [root.p0.real, root.p0.imag],
        "iterations": root.iterations,
        "residual": root.residual,
        "validation_norm": root.validation_norm,
        "truncation": root.truncation,
        "in_omega_prime": region_test(params, point, RegionSpec(Region.OMEGA_PRIME)),
        "sink_radius": sink_radius(params),
    })
    _emit(_dump_json(payload), config.out, stream)
    return EXIT_OK


def symbolic_component(config: RunConfig) -> symalg.MultiPoly:
    """First component of the n_max-th iterate of the configured map."""
    q, d, n = config.q, config.d, config.n_max
    if config.symbolic_map == "psi":
        return symalg.iterate_psi_symbolic(q, d, n)[n + 1]
    if config.symbolic_map == "psi-inverse":
        # Psi^-n = (Q(n-1), Q(n), a^-n z2)
        return symalg.iterate_psi_inverse_symbolic(q, d, n)[n]
    maps = symalg.iterate_phi_symbolic(q, n, inverse=config.symbolic_map == "phi-inverse")
    return symalg.reduce_b_relation(maps[-1].components[0], q, d)


def cmd_iterate(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    poly = symbolic_component(config)
    buffer = io.StringIO()
    symalg.dump_poly(poly, buffer)
    _emit(buffer.getvalue(), config.out, stream)
    if config.expect:
        try:
            with open(config.expect, "r", encoding="utf-8") as fh:
                expected = symalg.load_poly(fh)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot read expected polynomial {config.expect}: {e}") from e
        if expected != poly:
            logger.warning("%s^%d differs from %s", config.symbolic_map, config.n_max, config.expect)
            return EXIT_CHECK_FAILED
    return EXIT_OK


# --- verification suites ----------------------------------------------------

def suite_degrees(config: RunConfig) -> List[CheckReport]:
    reports = []
    for rep in (symalg.verify_degree_formula(config.q, config.d, config.n_max)
                + symalg.verify_phi_degrees(config.q, config.d, config.n_max)):
        reports.append(CheckReport(
            name=f"degrees {rep.label}",
            passed=rep.passed,
            anchor="deg(Psi^n) = q^n + d(q^n - 1)/(q - 1), deg(Phi^n) = q^n",
            detail="degrees=" + ",".join(str(k) for k in rep.degrees),
        ))
    return reports


def suite_conjugacy(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    points = [p for p in sample_box(VERIFY_SAMPLES, config.seed) if not p.z2.is_zero]
    reports = [check_conjugacy(params, points)]
    if params.l_is_integral:
        reports.append(CheckReport(
            name="conjugacy symbolic",
            passed=symalg.check_conjugacy_symbolic(config.q, config.d),
            anchor="theta o Psi = Phi o theta",
            detail="exact polynomial identity with b = a^l",
        ))
    return reports


def suite_fibration(config: RunConfig) -> List[CheckReport]:
    control = not symalg.preserves_fibration(symalg.psi_map(config.q, config.d), axis=symalg.Z0)
    return [
        CheckReport("fibration", symalg.check_fibration_invariance(config.q, config.d),
                    anchor="{z2 = cst} is invariant", detail="Psi and Phi third components are a*z2"),
        CheckReport("fibration negative-control", control, anchor="{z0 = cst} is not invariant",
                    detail="first component of Psi involves z1"),
    ]


def suite_centralizer(config: RunConfig) -> List[CheckReport]:
    q, d = config.q, config.d
    roots = [k for k in range(q - 1) if symalg.check_centralizer_family(q, d, eta_exponent=k)]
    reports = [CheckReport(
        name="centralizer roots",
        passed=len(roots) == q - 1,
        anchor="(eta z0, eta z1, nu z2) commutes with Phi for eta^(q-1) = 1",
        detail="k=" + ",".join(str(k) for k in roots),
    )]
    if q % 2 == 1:
        reports.append(CheckReport("centralizer eta=-1", symalg.check_centralizer_family(q, d, eta_value=-1),
                                   anchor="eta = -1", detail="integer substitution"))
    reports.append(CheckReport("centralizer negative-control", not symalg.check_centralizer_family(q, d, eta_value=2),
                               anchor="eta = 2 is not a root of unity", detail="expected mismatch"))
    return reports


def suite_lemma_identity(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    failures = 0
    total = 0
    for p in sample_box(VERIFY_SAMPLES, config.seed):
        for n in range(LEMMA_MAX_N + 1):
            report = check_lemma_identity(params, p, n)
            total += 1
            if not report.passed:
                failures += 1
                logger.debug("lemma-identity failed: %s", report.detail)
    return [CheckReport("lemma-identity", failures == 0, anchor="P(n+1) + P(n)/phi = phi^n g_n",
                        detail=f"checks={total} failures={failures}")]


def suite_green_equations(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    reports = []
    for label, check in (("functional", check_functional_equation), ("semiconjugacy", check_semiconjugacy)):
        results = [check(params, p, config.target_error) for p in sample_omega(params, VERIFY_SAMPLES, config.seed)]
        worst = max(r.extra["max_error_bound"] for r in results)
        failed = sum(not r.passed for r in results)
        reports.append(CheckReport(
            name=f"green-equations {label}",
            passed=failed == 0,
            anchor=results[0].anchor,
            detail=f"points={len(results)} failures={failed} max_bound={worst:.3e}",
            heuristic=any(r.heuristic for r in results),
        ))
    return reports


def suite_hyperplane(config: RunConfig) -> List[CheckReport]:
    q, d = config.q, config.d
    cases = [
        ("Psi", symalg.psi_map(q, d), q + d, (1, 0, 0, 0), [{"z0", "z3"}, {"z2", "z3"}], False),
        ("Psi^-1", symalg.psi_inverse_map(q, d), q + d, (0, 1, 0, 0), [{"z1", "z3"}, {"z2", "z3"}], False),
        ("Phi", symalg.phi_map(q), q, (1, 0, 0, 0), [{"z0", "z3"}], True),
        ("Phi^-1", symalg.phi_inverse_map(q), q, (0, 1, 0, 0), [{"z1", "z3"}], True),
    ]
    reports = []
    for name, affine, degree, collapse_expected, ind_expected, stable_expected in cases:
        projective = symalg.homogenize(affine, degree)
        _, collapse = symalg.hyperplane_image(projective)
        loci = symalg.indeterminacy_on_hyperplane(projective)
        stable = symalg.check_algebraic_stability(projective)
        passed = (collapse == collapse_expected and sorted(map(sorted, loci)) == sorted(map(sorted, ind_expected))
                  and stable == stable_expected)
        reports.append(CheckReport(
            name=f"hyperplane {name}",
            passed=passed,
            anchor="z3 = 0 collapses to a point",
            detail=(f"collapse={symalg.format_point(collapse) if collapse else None} "
                    f"Ind={symalg.format_loci(loci)} stable={stable}"),
        ))
    return reports


def suite_fibonacci(config: RunConfig) -> List[CheckReport]:
    return [check_fibonacci_restriction(FIBONACCI_PAIRS, FIBONACCI_MAX_N)]


def suite_speed(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    certs = [speed_certificate(params, p, SPEED_STEPS, target_error=config.target_error)
             for p in sample_omega(params, VERIFY_SAMPLES, config.seed)]
    failed = sum(not c.passed for c in certs)
    return [CheckReport(
        name="speed",
        passed=failed == 0,
        anchor="x(n+1) >= q x(n) + n d ln|alpha| + d ln|p2| - ln 3, |P(n)| >= eta^(q^n)",
        detail=(f"points={len(certs)} failures={failed} min_slack={min(c.worst_bound_slack for c in certs):.3e} "
                f"min_eta={min(c.eta for c in certs):.6g}"),
    )]


def suite_regions(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    omega = sample_omega(params, VERIFY_SAMPLES, config.seed)
    inside = sum(region_test(params, p, RegionSpec(Region.OMEGA)) for p in omega)
    reports = [CheckReport("regions Omega", inside == len(omega),
                           anchor="|p0| > |p1| > 0, |p1|^(q-1) |p2|^d > 2 + phi^M",
                           detail=f"inside={inside}/{len(omega)}")]
    if params.is_subcritical:
        prime = sample_omega_prime(params, VERIFY_SAMPLES, config.seed)
        inside = sum(region_test(params, p, RegionSpec(Region.OMEGA_PRIME)) for p in prime)
        delta = sink_radius(params)
        reports.append(CheckReport("regions OmegaPrime", inside == len(prime) and delta > 0,
                                   anchor="((1 + eps) phi)^q |alpha|^d < phi",
                                   detail=f"inside={inside}/{len(prime)} sink_radius={delta:.6g}"))
    return reports


def suite_growth(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    points = sample_omega(params, VERIFY_SAMPLES, config.seed)
    fit = fit_growth_ceiling(params, points, config.target_error)
    scan = continuity_scan(params, points[0].to_complex(), (1, 0, 0), CONTINUITY_RADII, config.target_error)
    return [
        CheckReport(
            name="growth ceiling",
            passed=fit.c1 <= fit.ceiling_constant + config.target_error,
            anchor="G+ <= (1 + l) log+||p|| + ln3/(q - 1)",
            tolerance=config.target_error,
            detail=(f"points={len(points)} c1={fit.c1:.6g} ceiling_constant={fit.ceiling_constant:.6g} "
                    f"l_tilde={fit.l_tilde:g}"),
        ),
        CheckReport(
            name="growth continuity",
            passed=scan.max_jump <= CONTINUITY_MAX_JUMP,
            anchor="G+ along a short segment",
            detail=f"steps={len(scan.radii)} max_jump={scan.max_jump:.3e}",
            heuristic=True,
        ),
    ]


def suite_stable_manifold(config: RunConfig) -> List[CheckReport]:
    params = config.params()
    if config.suite == "all" and not params.is_subcritical:
        return []
    failures = 0
    worst = 0.0
    for p1, p2 in sample_fibres(STABLE_SAMPLES, config.seed, p1_radius=0.5):
        try:
            root = stable_root(params, p1, p2)
        except NoConvergenceError as e:
            logger.debug("stable-manifold failed at p1=%s p2=%s: %s", p1, p2, e)
            failures += 1
            continue
        worst = max(worst, root.validation_norm)
        perturbed = classify(params, Point3.from_complex(root.p0 + STABLE_PERTURBATION, p1, p2),
                             config.budget, config.target_error)
        if perturbed.verdict not in (Verdict.FIBONACCI, Verdict.MAXIMAL):
            failures += 1
    return [CheckReport(
        name="stable-manifold",
        passed=failures == 0,
        anchor="Psi^n(p0(p1, p2), p1, p2) -> 0, perturbed p0 escapes",
        detail=f"fibres={STABLE_SAMPLES} failures={failures} max_validation_norm={worst:.3e}",
    )]


SUITES: Dict[str, Callable[[RunConfig], List[CheckReport]]] = {
    "degrees": suite_degrees,
    "conjugacy": suite_conjugacy,
    "fibration": suite_fibration,
    "centralizer": suite_centralizer,
    "lemma-identity": suite_lemma_identity,
    "green-equations": suite_green_equations,
    "hyperplane": suite_hyperplane,
    "fibonacci": suite_fibonacci,
    "speed": suite_speed,
    "regions": suite_regions,
    "growth": suite_growth,
    "stable-manifold": suite_stable_manifold,
}


def run_suite(config: RunConfig) -> List[CheckReport]:
    names = list(SUITES) if config.suite == "all" else [config.suite]
    reports: List[CheckReport] = []
    for name in names:
        reports.extend(SUITES[name](config))
    return reports


def cmd_verify(config: RunConfig, stream: TextIO = sys.stdout) -> int:
    reports = run_suite(config)
    text = "".join(r.line() + "\n" for r in reports)
    _emit(text, config.out, stream)
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS = {
    "orbit": cmd_orbit,
    "classify": cmd_classify,
    "green": cmd_green,
    "stable": cmd_stable,
    "iterate": cmd_iterate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "raster": cmd_raster,
}


# --- argument parsing ---------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--q", type=int)
    common.add_argument("--d", type=int)
    common.add_argument("--alpha-re", type=float)
    common.add_argument("--alpha-im", type=float)
    common.add_argument("--point", type=complex, nargs=3, metavar=("Z0", "Z1", "Z2"),
                        help="three complex numbers, e.g. 1+0j 0 0.5j; wrap negatives as (-1+2j)")
    common.add_argument("--out", help="output path (stdout when omitted; raster defaults to raster.pgm)")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--max-steps", type=int)
    common.add_argument("--max-terms", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--target-error", type=float)
    common.add_argument("--log-escape", type=float)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--print-schema", action="store_true", help="print the RunConfig JSON schema and exit")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="skewdyn", description="Dynamics of the skew products Psi_alpha on C^3")
    sub = parser.add_subparsers(dest="command", required=True)

    orbit_p = sub.add_parser("orbit", parents=[common], help="orbit table as CSV")
    orbit_p.add_argument("--plot", help="PNG of ln max(|P(n)|, |P(n-1)|) against n")
    sub.add_parser("classify", parents=[common], help="verdict for one point as JSON")
    sub.add_parser("green", parents=[common], help="Green function estimate as JSON")
    sub.add_parser("stable", parents=[common], help="stable-manifold p0 over the point's (p1, p2) as JSON")
    iterate_p = sub.add_parser("iterate", parents=[common],
                               help="first component of a symbolic iterate, one monomial per line")
    iterate_p.add_argument("--map", dest="symbolic_map", choices=["psi", "psi-inverse", "phi", "phi-inverse"])
    iterate_p.add_argument("--n-max", type=int)
    iterate_p.add_argument("--expect", help="stored dump to compare with; exit 1 when it differs")

    verify_p = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify_p.add_argument("--suite", choices=list(SUITES) + ["all"])
    verify_p.add_argument("--n-max", type=int)

    sweep_p = sub.add_parser("sweep", parents=[common], help="classify one sample across alpha moduli")
    sweep_p.add_argument("--moduli", type=float, nargs="+")
    sweep_p.add_argument("--samples", type=int)

    raster_p = sub.add_parser("raster", parents=[common], help="render a slice as a 16-bit PGM")
    for flag, kind in RASTER_FLAGS.items():
        raster_p.add_argument("--" + flag.replace("_", "-"), type=kind)
    raster_p.add_argument("--channel", choices=["classification", "green", "g-magnitude"])
    raster_p.add_argument("--preview", help="PNG preview of the rendered image")
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    get = lambda name: getattr(args, name, None)
    overrides = {
        "q": get("q"), "d": get("d"), "alpha_re": get("alpha_re"), "alpha_im": get("alpha_im"),
        "out": get("out"), "threads": get("threads"), "seed": get("seed"), "max_steps": get("max_steps"),
        "max_terms": get("max_terms"), "budget": get("budget"), "target_error": get("target_error"),
        "log_escape": get("log_escape"), "suite": get("suite"), "n_max": get("n_max"),
        "alpha_moduli": get("moduli"), "samples": get("samples"), "plot": get("plot") or get("preview"),
        "symbolic_map": get("symbolic_map"), "expect": get("expect"),
    }
    if get("point") is not None:
        overrides["point"] = [[c.real, c.imag] for c in args.point]
    for flag in list(RASTER_FLAGS) + ["channel"]:
        overrides["raster." + flag] = get(flag)
    return overrides


def run(argv: Optional[Sequence[str]] = None, stream: TextIO = sys.stdout) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.WARNING)
    if args.print_schema:
        stream.write(schema_json() + "\n")
        return EXIT_OK
    try:
        config = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](config, stream)
    except (ConfigError, ParameterDomainError, InvalidRegionError, symalg.CapExceededError) as e:
        logger.error("%s", e)
        sys.stderr.write(f"skewdyn: configuration error: {e}\n")
        return EXIT_CONFIG
