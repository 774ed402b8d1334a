"""Batch front-end: experiment configs, orchestration, table/report emission.

Pipelines: eigs | billiards | lengths | hadamard-check | trace-scan |
rigidity | abel | flatness. Outputs are delimited text (tsv) or structured
text (json); every artifact embeds the resolved config echo and the package
version, and runs are deterministic for a fixed config (fixed seeds, fixed
summation order). Exit codes: 0 success, 2 usage, 3 numeric failure.
"""
import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .backend import backend_name
from .billiards import (PhasePoint, billiard_orbit, caustic_invariant,
                        length_spectrum, multiplicity_filter)
from .errors import BillispecError, CutoffError, FocalRayError
from .geometry import DeformationField, DomainSpec, EllipseDomain
from .hadamard import eig_variation, finite_difference_variation, trace_variation
from .rigidity import (abel_moments, abel_transform, first_nonflat_order,
                       null_space_test, reparametrize_flat)
from .spectral import (SolverOptions, load_spectrum, save_spectrum,
                       solve_spectrum)

PIPELINES = ("eigs", "billiards", "lengths", "hadamard-check", "trace-scan",
             "rigidity", "abel", "flatness")


@dataclass
class ExperimentConfig:
    """Flat bag of pipeline knobs; every field has a default. lam_max=None
    resolves to the desk-scale default 60/B at run time."""
    pipeline: str = "eigs"
    A: float = 2.0
    B: float = 1.0
    deform_coefs: list = None
    deform_eps: float = 0.0
    bc: str = "dirichlet"
    lam_max: float = None
    field_coefs: list = field(default_factory=lambda: [0.0, 1.0])
    field2_coefs: list = None
    sigma: float = 0.15
    h: float = 1e-4
    n_clusters: int = 10
    n_random_fields: int = 0
    q_max: int = 12
    window: list = None
    mult_tol: float = 1e-9
    theta0: float = 0.0
    zeta0: float = 0.3
    steps: int = 100
    t_lo: float = 3.5
    t_hi: float = 4.5
    t_n: int = 41
    tail_tol: float = 1e-8
    modes: int = 6
    curves: int = 12
    n_quad: int = 1024
    endpoint_constraints: bool = False
    k_max: int = 3
    method: str = "extrapolate"
    z_lo: float = 0.5
    z_hi: float = 0.99
    z_n: int = 20
    sequence: list = None
    seed: int = 1234
    out: str = "-"
    fmt: str = "tsv"
    save_spectrum: str = None
    spectrum_file: str = None
    matrix_out: str = None

    def resolved_lam_max(self):
        return self.lam_max if self.lam_max is not None else 60.0/self.B

    def domain(self):
        fld = None
        if self.deform_coefs:
            fld = DeformationField(coefficients=self.deform_coefs)
        return DomainSpec(EllipseDomain(self.A, self.B), field=fld,
                          eps=self.deform_eps)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _emit(config, columns, rows, out_path, extra_header=()):
    echo = json.dumps(config.to_dict(), sort_keys=True)
    if config.fmt == "json":
        doc = {"version": __version__, "config": config.to_dict(),
               "columns": list(columns), "data": [list(r) for r in rows]}
        text = json.dumps(doc, sort_keys=True, default=float) + "\n"
    else:
        lines = [f"# billispec {__version__}", f"# config {echo}"]
        lines += [f"# {h}" for h in extra_header]
        lines.append("\t".join(columns))
        lines += ["\t".join(_fmt(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as f:
            f.write(text)


def _emit_report(config, payload, out_path):
    doc = {"version": __version__, "config": config.to_dict(), "report": payload}
    text = json.dumps(doc, sort_keys=True, default=float) + "\n"
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as f:
            f.write(text)


def _field_from(coefs):
    return DeformationField(coefficients=coefs if coefs else [0.0])


def _get_spectrum(config):
    if config.spectrum_file:
        return load_spectrum(config.spectrum_file)
    spec = solve_spectrum(config.domain(), config.bc, config.resolved_lam_max(),
                          SolverOptions(seed=config.seed))
    if config.save_spectrum:
        save_spectrum(spec, config.save_spectrum)
    return spec


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _run_eigs(config):
    spec = _get_spectrum(config)
    rows = [(j, spec.lam2[j], spec.classes[j], int(spec.cluster_ids[j]))
            for j in range(spec.n_eigs)]
    _emit(config, ("index", "lam2", "class", "cluster"), rows, config.out)


def _run_billiards(config):
    dom = config.domain()
    thetas, zetas, chords = billiard_orbit(
        dom, PhasePoint(config.theta0, config.zeta0), config.steps)
    rows = []
    for k in range(config.steps + 1):
        if dom.is_deformed:
            z = float("nan")
        else:
            try:
                z = caustic_invariant(dom, PhasePoint(
                    thetas[k] % (2*np.pi), float(np.clip(zetas[k], -1 + 1e-15, 1 - 1e-15))))
            except FocalRayError:
                z = 0.0
        rows.append((k, thetas[k] % (2*np.pi), zetas[k],
                     chords[k - 1] if k else float("nan"), z))
    _emit(config, ("step", "theta", "zeta", "chord", "Z"), rows, config.out)


def _run_lengths(config):
    dom = config.domain()
    window = tuple(config.window) if config.window else None
    fams = length_spectrum(dom, config.q_max, window=window)
    groups = multiplicity_filter(fams, config.mult_tol)
    clean = {id(f): g.clean_simple for g in groups for f in g.families}
    rows = [(f.p, f.q, f.level, f.length, f.n_components, int(f.reversal_paired),
             f.kind, int(clean[id(f)]), int(f.perimeter_multiple))
            for f in fams]
    _emit(config, ("p", "q", "Z", "T", "components", "branch_paired", "kind",
                   "clean_simple", "perimeter_multiple"), rows, config.out)


def _run_hadamard_check(config):
    dom = config.domain()
    lam_max = config.lam_max if config.lam_max is not None else 5.0
    opts = SolverOptions(seed=config.seed)
    base = solve_spectrum(dom, config.bc, lam_max, opts)
    fields = []
    if config.n_random_fields > 0:
        rng = np.random.default_rng(config.seed)
        for _ in range(config.n_random_fields):
            k = rng.integers(2, 5)
            fields.append(DeformationField(
                coefficients=rng.standard_normal(k + 1)/(1.0 + np.arange(k + 1)**2)))
    else:
        fields.append(_field_from(config.field_coefs))
    rows = []
    for fi, fld in enumerate(fields):
        formula = eig_variation(base, fld)
        fd = finite_difference_variation(dom, fld, config.bc, config.h,
                                         lam_max, opts, base=base)
        for vf, vd in zip(formula[:config.n_clusters], fd[:config.n_clusters]):
            denom = max(abs(vd.value), 1e-14*max(1.0, vf.lam2))
            rows.append((fi, vf.cluster_id, vf.lam2, vf.size, vf.value,
                         vd.value, abs(vf.value - vd.value)/denom))
    _emit(config, ("field", "cluster", "lam2", "size", "formula", "fd",
                   "rel_err"), rows, config.out)


def scan_trace(config):
    """Table of the smoothed trace variation over a monotone T grid, with a
    length-spectrum marker column for overlay plotting. CutoffError is
    surfaced per grid point; rows that failed are flagged."""
    spec = _get_spectrum(config)
    fld = _field_from(config.field_coefs)
    variations = eig_variation(spec, fld)
    try:
        fams = length_spectrum(spec.domain, config.q_max) \
            if not spec.domain.is_deformed else []
    except BillispecError:
        fams = []
    tgrid = np.linspace(config.t_lo, config.t_hi, config.t_n)
    half = 0.5*(tgrid[1] - tgrid[0]) if config.t_n > 1 else 0.0
    rows = []
    n_fail = 0
    for T in tgrid:
        marker = ""
        near = [f.length for f in fams if abs(f.length - T) <= half]
        if near:
            marker = f"{min(near, key=lambda L: abs(L - T)):.12g}"
        try:
            tv = trace_variation(spec, variations, float(T), config.sigma,
                                 tail_tol=config.tail_tol)
            rows.append((T, tv.value, marker, "ok"))
        except CutoffError:
            n_fail += 1
            rows.append((T, float("nan"), marker, "cutoff-error"))
    extra = ()
    if n_fail:
        extra = (f"warning: {n_fail}/{config.t_n} grid points hit CutoffError",)
    _emit(config, ("T", "dtrace", "lsp_marker", "status"), rows, config.out,
          extra_header=extra)
    if n_fail == config.t_n:
        raise CutoffError("every grid point failed the tail-leakage gate")


def _run_rigidity(config):
    dom = config.domain()
    fld = _field_from(config.field_coefs) if config.field_coefs is not None else None
    report = null_space_test(dom, config.modes, config.curves,
                             n_quad=config.n_quad,
                             endpoint_constraints=config.endpoint_constraints,
                             fld=fld, refine_factor=4)
    if config.matrix_out:
        rows = [tuple(r) for r in report.matrix]
        cols = tuple(f"mode_{2*j}" for j in range(report.mode_count))
        _emit(config, cols, rows, config.matrix_out)
    _emit_report(config, report.to_dict(), config.out)


def _run_abel(config):
    dom = config.domain()
    fld = _field_from(config.field_coefs)
    if config.method in ("extrapolate", "analytic") and config.z_n == 0:
        m = abel_moments(dom, fld, config.k_max, n=config.n_quad,
                         method=config.method)
        rows = [(k, m[k]) for k in range(config.k_max + 1)]
        _emit(config, ("k", "moment"), rows, config.out)
        return
    zs = np.linspace(config.z_lo, config.z_hi, config.z_n)
    rows = [(Z, abel_transform(dom, fld, float(Z), n=config.n_quad)) for Z in zs]
    _emit(config, ("Z", "abel"), rows, config.out)


def _run_flatness(config):
    seq = [DeformationField(coefficients=c) for c in (config.sequence or [[0.0]])]
    res = first_nonflat_order(seq)
    if res is None:
        _emit(config, ("k", "coefficients"), [("flat", "")], config.out)
        return
    k, _ = res
    lead = reparametrize_flat(seq, k)
    rows = [(k, ",".join(f"{c:.17g}" for c in lead.coefficients))]
    _emit(config, ("k", "coefficients"), rows, config.out)


def run(config):
    """Run one pipeline; returns the process exit status (0 on success)."""
    dispatch = {
        "eigs": _run_eigs,
        "billiards": _run_billiards,
        "lengths": _run_lengths,
        "hadamard-check": _run_hadamard_check,
        "trace-scan": scan_trace,
        "rigidity": _run_rigidity,
        "abel": _run_abel,
        "flatness": _run_flatness,
    }
    if config.pipeline not in dispatch:
        raise ValueError(f"unknown pipeline {config.pipeline!r}")
    try:
        dispatch[config.pipeline](config)
    except BillispecError as exc:
        print(f"billispec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _add_common(sp):
    sp.add_argument("--A", type=float, default=2.0, help="semi-major axis")
    sp.add_argument("--B", type=float, default=1.0, help="semi-minor axis")
    sp.add_argument("--deform-coefs", type=_float_list, default=None,
                    help="cosine coefficients of a boundary deformation")
    sp.add_argument("--deform-eps", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=1234)
    sp.add_argument("--out", default="-", help="output path or - for stdout")
    sp.add_argument("--format", dest="fmt", choices=("tsv", "json"),
                    default="tsv")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="billispec",
        description="Billiard dynamics, Laplace spectra, Hadamard variations, "
                    "and rigidity diagnostics for (deformed) ellipses "
                    f"[kernels: {backend_name()}]")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="pipeline", required=True)

    sp = sub.add_parser("eigs", help="eigenvalue table")
    _add_common(sp)
    sp.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    sp.add_argument("--lam-max", type=float, default=None,
                    help="frequency cutoff (default: desk-scale 60/B)")
    sp.add_argument("--save-spectrum", default=None,
                    help="also write the full spectrum (traces) as JSON")
    sp.add_argument("--spectrum-file", default=None,
                    help="reuse a saved spectrum instead of solving")

    sp = sub.add_parser("billiards", help="billiard orbit records")
    _add_common(sp)
    sp.add_argument("--theta0", type=float, default=0.0)
    sp.add_argument("--zeta0", type=float, default=0.3)
    sp.add_argument("--steps", type=int, default=100)

    sp = sub.add_parser("lengths", help="length spectrum table")
    _add_common(sp)
    sp.add_argument("--q-max", type=int, default=12)
    sp.add_argument("--window", type=float, nargs=2, default=None,
                    metavar=("T_LO", "T_HI"))
    sp.add_argument("--mult-tol", type=float, default=1e-9)

    sp = sub.add_parser("hadamard-check",
                        help="formula vs finite-difference variation table")
    _add_common(sp)
    sp.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    sp.add_argument("--lam-max", type=float, default=5.0)
    sp.add_argument("--h", type=float, default=1e-4)
    sp.add_argument("--n-clusters", type=int, default=10)
    sp.add_argument("--field-coefs", type=_float_list, default=[0.0, 1.0])
    sp.add_argument("--random-fields", dest="n_random_fields", type=int,
                    default=0)

    sp = sub.add_parser("trace-scan", help="smoothed trace variation scan")
    _add_common(sp)
    sp.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    sp.add_argument("--lam-max", type=float, default=None)
    sp.add_argument("--spectrum-file", default=None)
    sp.add_argument("--save-spectrum", default=None)
    sp.add_argument("--field-coefs", type=_float_list, default=[0.0, 1.0])
    sp.add_argument("--t-lo", type=float, default=3.5)
    sp.add_argument("--t-hi", type=float, default=4.5)
    sp.add_argument("--t-n", type=int, default=41)
    sp.add_argument("--sigma", type=float, default=0.15)
    sp.add_argument("--tail-tol", type=float, default=1e-8)
    sp.add_argument("--q-max", type=int, default=12)

    sp = sub.add_parser("rigidity", help="moment-matrix null-space report")
    _add_common(sp)
    sp.add_argument("--modes", type=int, default=6)
    sp.add_argument("--curves", type=int, default=12)
    sp.add_argument("--n-quad", type=int, default=1024)
    sp.add_argument("--endpoint-constraints", action="store_true")
    sp.add_argument("--field-coefs", type=_float_list, default=None)
    sp.add_argument("--matrix-out", default=None)

    sp = sub.add_parser("abel", help="Abel function scan or endpoint moments")
    _add_common(sp)
    sp.add_argument("--field-coefs", type=_float_list, default=[0.0, 1.0])
    sp.add_argument("--z-lo", type=float, default=0.5)
    sp.add_argument("--z-hi", type=float, default=0.99)
    sp.add_argument("--z-n", type=int, default=20,
                    help="0 switches to moment output")
    sp.add_argument("--k-max", type=int, default=3)
    sp.add_argument("--method", choices=("extrapolate", "analytic"),
                    default="extrapolate")
    sp.add_argument("--n-quad", type=int, default=1024)

    sp = sub.add_parser("flatness", help="first non-flat order of a family")
    _add_common(sp)
    sp.add_argument("--sequence", type=json.loads, default=None,
                    help='JSON list of cosine-coefficient lists, e.g. '
                         '"[[0],[0],[1,0.5]]"')
    return ap


def config_from_args(args):
    cfg = ExperimentConfig(pipeline=args.pipeline)
    for k, v in vars(args).items():
        if k != "pipeline" and hasattr(cfg, k):
            setattr(cfg, k, v)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    try:
        status = run(cfg)
    except BillispecError as exc:
        print(f"billispec: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = 3
    sys.exit(status)


if __name__ == "__main__":
    main()
