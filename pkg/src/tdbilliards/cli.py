"""Command-line entry point.

Subcommands: validate-scene, tangent-audit, curve-growth, stable-proxy,
memory-loss, correlation, coupling-recursion.  Every CSV embeds a manifest
hash of all inputs in its header; identical manifests give byte-identical
files for any TDB_THREADS setting.

Exit codes: 0 ok, 1 usage, 2 geometry, 3 admissibility, 4 horizon,
5 runtime/numeric.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .errors import NoCollisionWithinHorizon, NotAdmissible, TdbError
from .geometry import admissibility, escape_time, horizon_check, load_scene, tau_min
from .scenario import from_spec


def manifest_hash(command, scene_path, params):
    try:
        with open(scene_path, "rb") as fh:
            scene_bytes = fh.read()
    except OSError:
        scene_bytes = b""
    inputs = {
        k: v for k, v in params.items() if k not in ("func", "out", "svg")
    }
    payload = json.dumps(
        {
            "command": command,
            "scene_sha": hashlib.sha256(scene_bytes).hexdigest(),
            "params": {k: repr(v) for k, v in sorted(inputs.items())},
            "version": __version__,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


class CsvWriter:
    """CSV with a self-describing comment header; stable float repr."""

    def __init__(self, path, command, manifest, columns):
        self.fh = open(path, "w", newline="\n")
        self.fh.write(f"# tool: tdbilliards {__version__}\n")
        self.fh.write(f"# command: {command}\n")
        self.fh.write(f"# manifest: {manifest}\n")
        self.fh.write(",".join(columns) + "\n")

    def row(self, *values):
        self.fh.write(",".join(_cell(v) for v in values) + "\n")

    def comment(self, text):
        self.fh.write(f"# {text}\n")

    def close(self):
        self.fh.close()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def cmd_validate_scene(args):
    scene = load_scene(args.scene)
    tmin = tau_min(scene.config)
    tesc = escape_time(scene.config, scene.beta)
    print(f"scene: {scene.name}")
    print(f"tau_min: {tmin:.6f}")
    print(f"escape_time(beta={scene.beta}): {tesc:.6f}")
    ok, witness, margin = horizon_check(
        scene.config, scene.horizon, resolution=args.resolution
    )
    print(
        f"horizon (t={scene.horizon.t}, phi={scene.horizon.phi}): "
        f"{'pass' if ok else 'FAIL'} (min margin {margin:.4f})"
    )
    if not ok:
        print(f"horizon witness: base={witness[0]} angle={witness[1]:.6f}")
    rc = 0
    if args.scenario != "none":
        scen = from_spec(
            scene, args.scenario, args.steps, eps=args.eps,
            speed=getattr(args, "speed", 0.0) or None,
        )
        dists = scen.step_distances()
        worst = -1.0
        worst_i = -1
        for i in range(scen.n_steps):
            rep = admissibility(
                scen.config(i), scen.config(i + 1), scene.beta, scene.horizon
            )
            slack = (rep.tau_min - rep.beta) - rep.escape_time
            if worst_i < 0 or slack < worst:
                worst, worst_i = slack, i
            if not rep.admissible:
                print(f"step {i + 1}: NOT ADMISSIBLE (slack {slack:.3e})")
                raise NotAdmissible(f"scenario step {i + 1}")
            if args.eps > 0 and dists[i] >= args.eps:
                print(f"step {i + 1}: step distance {dists[i]:.3e} >= eps")
                raise NotAdmissible(f"scenario step {i + 1} moves >= eps")
        print(
            f"scenario {args.scenario}: {scen.n_steps} steps admissible; "
            f"worst buffer slack {worst:.3e} at step {worst_i + 1}; "
            f"max step distance {max(dists):.3e}"
        )
    if args.out:
        man = manifest_hash("validate-scene", args.scene, vars(args))
        w = CsvWriter(
            args.out, "validate-scene", man,
            ["scene", "tau_min", "escape_time", "horizon_ok", "horizon_margin"],
        )
        w.row(scene.name, tmin, tesc, int(ok), margin)
        w.close()
    if not ok:
        return 4
    return rc


def cmd_tangent_audit(args):
    from .audit import tangent_audit

    scene = load_scene(args.scene)
    rep = tangent_audit(
        scene, scene.name, n_samples=args.samples, seed=args.seed,
        pair=args.pair, eps=args.eps, fd_samples=args.fd_samples,
    )
    man = manifest_hash("tangent-audit", args.scene, vars(args))
    w = CsvWriter(
        args.out, "tangent-audit", man,
        ["scene", "n_samples", "det_max_abs_err", "cone_violations",
         "fd_max_rel_err", "lambda_hat", "c_cos_low", "c_cos_high"],
    )
    r = rep.as_row()
    w.row(*[r[k] for k in
            ("scene", "n_samples", "det_max_abs_err", "cone_violations",
             "fd_max_rel_err", "lambda_hat", "c_cos_low", "c_cos_high")])
    w.close()
    print(
        f"tangent audit {scene.name}: det_err={rep.det_max_abs_err:.2e} "
        f"cone_violations={rep.cone_violations} fd_err={rep.fd_max_rel_err:.2e} "
        f"lambda_hat={rep.lambda_hat:.4f}"
    )
    return 0 if rep.cone_violations == 0 else 5


def cmd_curve_growth(args):
    from .curves import (
        CurveFamily,
        curvature_update_check,
        distortion_check,
        line_curve,
        push_family,
        uniform_measured,
        z_value,
    )
    from .growth import growth_statistics
    from .scenario import from_spec as scen_spec
    from .tangent import ConeSpec

    scene = load_scene(args.scene)
    scen = scen_spec(scene, args.scenario, max(args.n, args.steps), eps=args.eps)
    cone = ConeSpec.for_scene(scene.config, tau_min(scene.config))
    slope = 0.5 * (cone.slope_min + cone.slope_max)
    curve = line_curve(0, 0.3, args.curve_len, 0.05, slope, n_nodes=33)
    mc = uniform_measured(curve)

    eps_list = [float(e) for e in args.eps_list.split(",")]
    table = growth_statistics(
        curve, scen, args.n, eps_list, n_points=args.points
    )
    fam = CurveFamily([(1.0, mc)])
    kappa_max = 0.0
    ncomp = 1
    for m in range(min(args.n, args.full_steps)):
        fam = push_family(
            fam, scen.config(m), scen.config(m + 1), scene.beta,
            t_max=scene.horizon.t,
        )
        ncomp = len(fam.components)
        kappa_max = max(
            kappa_max,
            max(c.curve.curvature_estimate() for _, c in fam.components),
        )
    dist = distortion_check(mc, scen, min(args.n, args.full_steps))
    man = manifest_hash("curve-growth", args.scene, vars(args))
    w = CsvWriter(
        args.out, "curve-growth", man,
        ["scene", "n", "eps", "measure_below_eps", "n_components", "z_value",
         "max_distortion", "kappa_hat_max"],
    )
    zv = z_value(fam) / fam.total_mass
    for e, m_e in zip(table.epsilons, table.measure):
        w.row(scene.name, args.n, e, m_e, ncomp, zv, dist.max_log_ratio, kappa_max)
    slope_fit, intercept, r2 = table.affine_fit()
    w.comment(f"affine_fit: slope={slope_fit!r} intercept={intercept!r} r2={r2!r}")
    w.close()
    if args.svg:
        from .svgplot import line_plot

        line_plot(
            [("m(eps)", list(table.epsilons), list(table.measure))],
            args.svg, title=f"growth statistics n={args.n}",
            xlabel="eps", ylabel="measure",
        )
    print(
        f"curve-growth {scene.name}: n={args.n} slope={slope_fit:.4g} "
        f"r2={r2:.4f} components={ncomp}"
    )
    return 0


def cmd_stable_proxy(args):
    from .audit import lambda_hat_estimate
    from .curves import line_curve
    from .growth import stable_size_proxy
    from .scenario import from_spec as scen_spec
    from .tangent import ConeSpec

    scene = load_scene(args.scene)
    scen = scen_spec(scene, args.scenario, args.horizon_n + 1, eps=args.eps)
    cone = ConeSpec.for_scene(scene.config, tau_min(scene.config))
    slope = 0.5 * (cone.slope_min + cone.slope_max)
    curve = line_curve(0, 0.3, args.curve_len, 0.05, slope, n_nodes=33)
    lam = args.lambda_hat or lambda_hat_estimate(scene)
    us, rs = stable_size_proxy(
        curve, scen, args.horizon_n, args.c_norm, lam, n_points=args.points
    )
    man = manifest_hash("stable-proxy", args.scene, vars(args))
    w = CsvWriter(
        args.out, "stable-proxy", man,
        ["scene", "N", "c_norm", "lambda_hat", "bin_lo", "bin_hi", "count"],
    )
    hist, edges = np.histogram(us, bins=args.bins)
    for c, lo, hi in zip(hist, edges[:-1], edges[1:]):
        w.row(scene.name, args.horizon_n, args.c_norm, lam, lo, hi, int(c))
    w.close()
    if args.svg:
        from .svgplot import line_plot

        centers = 0.5 * (edges[:-1] + edges[1:])
        line_plot(
            [("u^s histogram", list(centers), [float(h) for h in hist])],
            args.svg, title=f"stable size proxy N={args.horizon_n}",
            xlabel="u^s", ylabel="count",
        )
    print(f"stable-proxy {scene.name}: N={args.horizon_n} median={np.median(us):.4g}")
    return 0


def _decay_csv(args, series, command):
    man = manifest_hash(command, args.scene, vars(args))
    w = CsvWriter(
        args.out, command, man,
        ["n", "estimate_mu1", "estimate_mu2", "delta", "stderr"],
    )
    for i in range(len(series.n)):
        w.row(
            int(series.n[i]),
            series.estimate_mu1[i],
            series.estimate_mu2[i],
            series.delta[i],
            series.stderr[i],
        )
    w.comment(
        f"fit: C={series.fit_c!r} theta={series.fit_theta!r} "
        f"r2={series.fit_r2!r} fit_range={series.fit_range[0]}:{series.fit_range[1]}"
    )
    if not getattr(series, "constants_validated", True):
        w.comment("constants unvalidated: custom observable")
    w.close()
    if args.svg:
        from .svgplot import line_plot

        line_plot(
            [
                ("delta", list(series.n), list(series.delta)),
                ("3*stderr", list(series.n), list(3.0 * series.stderr)),
            ],
            args.svg, title=command, xlabel="n", ylabel="delta", logy=True,
        )


def cmd_memory_loss(args):
    from .densities import cos_tilt_density, sine_density, uniform_density
    from .ensemble import memory_loss

    scene = load_scene(args.scene)
    scen = from_spec(scene, args.scenario, args.n_max, eps=args.eps)
    if args.scenario != "fixed":
        scen.validate()
        if args.eps > 0 and max(scen.step_distances()) >= args.eps:
            raise NotAdmissible("scenario step distance >= eps")
    dens = {
        "uniform": uniform_density,
        "sine": sine_density,
        "cos_tilt": cos_tilt_density,
    }
    mu1 = dens[args.mu1](scene.config)
    mu2 = dens[args.mu2](scene.config)
    series = memory_loss(
        mu1, mu2, args.observable, scen, args.n_max, args.particles, args.seed,
        estimator=args.estimator,
    )
    _decay_csv(args, series, "memory-loss")
    print(
        f"memory-loss {scene.name}: max delta={series.delta.max():.3e} "
        f"theta={series.fit_theta:.4g} r2={series.fit_r2:.4g} "
        f"range={series.fit_range}"
    )
    return 0


def cmd_correlation(args):
    from .ensemble import correlation_decay

    scene = load_scene(args.scene)
    series = correlation_decay(
        args.observable, args.g, scene.config, args.n_max, args.particles,
        args.seed, scene.beta, scene.horizon,
    )
    _decay_csv(args, series, "correlation")
    print(
        f"correlation {scene.name}: C(0)={series.delta[0]:.3e} "
        f"estimators agree={series.agree}"
    )
    return 0 if series.agree else 5


def cmd_coupling(args):
    from fractions import Fraction

    from .coupling import coupling_recursion, delta0_spacing, uniform_params

    lam = Fraction(args.lam)
    zeta = Fraction(args.zeta)
    c = Fraction(args.c)
    spacing = args.spacing or delta0_spacing(zeta, c, lam, args.s, args.n_p)
    params = uniform_params(zeta, c, lam, spacing, args.k_max, s=args.s)
    res = coupling_recursion(params)
    man = manifest_hash("coupling-recursion", "", vars(args))
    w = CsvWriter(
        args.out, "coupling-recursion", man,
        ["k", "P_k", "Q_k", "bound", "ok"],
    )
    base = 1.0 - float(res.zeta_tilde) / 2.0
    for k in range(len(res.P)):
        bound = base ** (k + 1)
        w.row(
            k + 1, float(res.P[k]), float(res.Q[k]), bound,
            int(res.P[k] <= res.Q[k]),
        )
    w.comment(
        f"spacing={spacing} p_le_q={res.p_le_q} exp_bound={res.exp_bound_ok} "
        f"exp_bound_shifted={res.exp_bound_shifted_ok} "
        f"delta_condition={all(res.delta_condition)}"
    )
    w.close()
    print(
        f"coupling-recursion: k_max={args.k_max} spacing={spacing} "
        f"P<=Q: {res.p_le_q} exponential bound (k>=2): {res.exp_bound_ok}"
    )
    return 0 if res.p_le_q else 5


def build_parser():
    p = argparse.ArgumentParser(
        prog="tdb",
        description="Dispersing billiards with slowly moving scatterers",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("validate-scene", help="geometry and scenario gates")
    q.add_argument("scene")
    q.add_argument("--scenario", default="none",
                   choices=["none", "fixed", "drift", "orbit"])
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--speed", type=float, default=0.0,
                   help="per-disk drift speed override (0 = derive from eps)")
    q.add_argument("--steps", type=int, default=20)
    q.add_argument("--resolution", type=float, default=1.0 / 256.0)
    q.add_argument("--out", default="")
    q.set_defaults(func=cmd_validate_scene)

    q = sub.add_parser("tangent-audit", help="derivative, cone and strip audits")
    q.add_argument("--scene", required=True)
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--fd-samples", type=int, default=300)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--pair", default="fixed", choices=["fixed", "drift"])
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_tangent_audit)

    q = sub.add_parser("curve-growth", help="growth-lemma statistics")
    q.add_argument("--scene", required=True)
    q.add_argument("--scenario", default="fixed",
                   choices=["fixed", "drift", "orbit"])
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--n", type=int, default=8)
    q.add_argument("--steps", type=int, default=8)
    q.add_argument("--full-steps", type=int, default=4)
    q.add_argument("--curve-len", type=float, default=0.02)
    q.add_argument("--points", type=int, default=2000)
    q.add_argument("--eps-list", default="1e-4,3e-4,1e-3,3e-3,1e-2")
    q.add_argument("--out", required=True)
    q.add_argument("--svg", default="")
    q.set_defaults(func=cmd_curve_growth)

    q = sub.add_parser("stable-proxy", help="stable-manifold size proxy")
    q.add_argument("--scene", required=True)
    q.add_argument("--scenario", default="fixed",
                   choices=["fixed", "drift", "orbit"])
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--horizon-n", type=int, default=8)
    q.add_argument("--c-norm", type=float, default=1.0)
    q.add_argument("--lambda-hat", type=float, default=0.0)
    q.add_argument("--curve-len", type=float, default=0.02)
    q.add_argument("--points", type=int, default=400)
    q.add_argument("--bins", type=int, default=40)
    q.add_argument("--out", required=True)
    q.add_argument("--svg", default="")
    q.set_defaults(func=cmd_stable_proxy)

    q = sub.add_parser("memory-loss", help="two-density decay experiment")
    q.add_argument("--scene", required=True)
    q.add_argument("--scenario", default="drift",
                   choices=["fixed", "drift", "orbit"])
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--n-max", type=int, default=14)
    q.add_argument("--particles", type=int, default=1_000_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--observable", default="cos_phi")
    q.add_argument("--mu1", default="cos_tilt",
                   choices=["uniform", "sine", "cos_tilt"])
    q.add_argument("--mu2", default="uniform",
                   choices=["uniform", "sine", "cos_tilt"])
    q.add_argument("--estimator", default="coupled",
                   choices=["coupled", "independent"])
    q.add_argument("--out", required=True)
    q.add_argument("--svg", default="")
    q.set_defaults(func=cmd_memory_loss)

    q = sub.add_parser("correlation", help="fixed-map correlation decay")
    q.add_argument("--scene", required=True)
    q.add_argument("--scenario", default="fixed", choices=["fixed"],
                   help="correlation decay is a fixed-configuration statement")
    q.add_argument("--eps", type=float, default=0.0)
    q.add_argument("--n-max", type=int, default=10)
    q.add_argument("--particles", type=int, default=200_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--observable", default="cos_phi")
    q.add_argument("--g", default="sin_r")
    q.add_argument("--out", required=True)
    q.add_argument("--svg", default="")
    q.set_defaults(func=cmd_correlation)

    q = sub.add_parser("coupling-recursion", help="exact mass bookkeeping")
    q.add_argument("--zeta", required=True)
    q.add_argument("--c", required=True)
    q.add_argument("--lambda", dest="lam", required=True)
    q.add_argument("--spacing", type=int, default=0)
    q.add_argument("--s", type=int, default=1)
    q.add_argument("--n-p", type=int, default=0)
    q.add_argument("--k-max", type=int, default=100)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_coupling)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except TdbError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
