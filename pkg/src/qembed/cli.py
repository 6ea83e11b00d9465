"""Command-line front end.

Subcommands: embed, distance, width, min-m, quasi-isometry,
consistency-width, counterexamples, lemmas, combinatorics, selftest.

Exit codes: 0 pass, 1 verdict fail, 2 usage or config error. All randomness
flows from --seed (or the QEMBED_SEED environment variable, default 0).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import distances, ensembles, experiments, geometry, quantizer, selftest
from .ensembles import InvalidArgument

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    pass


# --- config file: flat key=value with [section] headers ---

CONFIG_SCHEMA = {
    "experiment": {"seed", "out", "jobs", "scale"},
    "set": {"kind", "n", "k", "radius", "n1", "n2", "r", "h", "file", "basis"},
    "ensemble": {"kind", "kappa"},
    "quantizer": {"delta", "variant", "dithered"},
    "sweep": {"m_grid", "pairs", "trials", "k0", "eps"},
}


def parse_config(path: str) -> dict:
    """Parse the flat config format; unknown sections or keys are hard errors."""
    values: dict[str, dict[str, str]] = {}
    section = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in CONFIG_SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            values.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside any [section]")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in CONFIG_SCHEMA[section]:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in [{section}]")
        values[section][key] = val.strip()
    return values


def parse_set_spec(text: str) -> geometry.SetSpec:
    """Parse e.g. sparse:N=64,K=4,d=1 or ball:N=3,d=1 or mesh:N=3,h=0.3."""
    kind, _, rest = text.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            if "=" not in item:
                raise ConfigError(f"bad set parameter {item!r}")
            k, _, v = item.partition("=")
            kv[k.strip().lower()] = v.strip()
    try:
        if kind == "sparse":
            return geometry.SparseBall(n=int(kv["n"]), k=int(kv["k"]),
                                       radius=float(kv.get("d", 1.0)))
        if kind == "ball":
            return geometry.EuclideanBall(n=int(kv["n"]), radius=float(kv.get("d", 1.0)))
        if kind == "lowrank":
            return geometry.LowRankBall(n1=int(kv["n1"]), n2=int(kv["n2"]),
                                        r=int(kv["r"]), radius=float(kv.get("d", 1.0)))
        if kind == "mesh":
            return geometry.ball_mesh(int(kv.get("n", 3)), float(kv.get("h", 0.3)),
                                      float(kv.get("d", 1.0)))
        if kind == "finite":
            pts = read_vectors(kv["file"])
            return geometry.FiniteSet(points=np.asarray(pts))
    except KeyError as exc:
        raise ConfigError(f"set kind {kind!r} is missing parameter {exc}") from exc
    raise ConfigError(f"unknown set kind {kind!r}")


def read_vectors(path: str) -> list[np.ndarray]:
    """Whitespace-separated reals, one vector per line."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        out.append(np.array([float(tok) for tok in line.split()], dtype=np.float64))
    return out


def _default_seed() -> int:
    env = os.environ.get("QEMBED_SEED")
    return int(env) if env else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=".")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--ensemble", type=str, default="gaussian",
                        choices=list(ensembles.KINDS))
    common.add_argument("--kappa", type=str, default="default")
    common.add_argument("--delta", type=float, default=1.0)
    common.add_argument("--variant", type=str, default="floor", choices=["floor", "round"])
    common.add_argument("--no-dither", action="store_true")
    common.add_argument("--set", type=str, default=None, dest="set_spec")

    p = argparse.ArgumentParser(prog="qembed", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("embed", parents=[common], help="print codes for input vectors")
    pe.add_argument("--m", type=int, required=True)
    pe.add_argument("--in", dest="infile", type=str, required=True)

    pd = sub.add_parser("distance", parents=[common], help="pseudo-distances for vector pairs")
    pd.add_argument("--m", type=int, required=True)
    pd.add_argument("--in", dest="infile", type=str, required=True)
    pd.add_argument("--t", type=float, nargs="*", default=[])

    pw = sub.add_parser("width", parents=[common], help="Gaussian mean width of a set")
    pw.add_argument("--draws", type=int, default=8192)

    pm = sub.add_parser("min-m", parents=[common], help="minimal measurement count")
    pm.add_argument("--kind", type=str, required=True, choices=list(geometry.MINIMAL_M_KINDS))
    pm.add_argument("--eps", type=float, required=True)
    pm.add_argument("--c", type=float, default=1.0)

    pq = sub.add_parser("quasi-isometry", parents=[common], help="distortion decay sweep")
    pc = sub.add_parser("consistency-width", parents=[common], help="consistency width sweep")
    for sp in (pq, pc):
        sp.add_argument("--m-grid", type=str, default="128,256,512,1024,2048,4096,8192")
        sp.add_argument("--pairs", type=int, default=200)
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--k0", type=float, default=1.0)
        sp.add_argument("--slope-band", type=str, default=None,
                        help="lo,hi acceptance band for the fitted slope")

    px = sub.add_parser("counterexamples", parents=[common])
    px.add_argument("--which", type=str, required=True, choices=["no-dither", "section2-floor"])
    px.add_argument("--k0", type=int, default=64)
    px.add_argument("--s", type=float, default=0.4)
    px.add_argument("--m", type=int, default=512)
    px.add_argument("--trials", type=int, default=1000)

    pl = sub.add_parser("lemmas", parents=[common], help="lemma-level Monte Carlo checks")
    pl.add_argument("--trials", type=int, default=1000)

    pk = sub.add_parser("combinatorics", parents=[common])
    pk.add_argument("--stirling-max", type=int, default=10_000)
    pk.add_argument("--mad-max", type=int, default=40)

    ps = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    ps.add_argument("--scale", type=str, default="full", choices=["full", "quick"])
    return p


def _apply_config(args) -> None:
    if not args.config:
        return
    cfg = parse_config(args.config)
    exp = cfg.get("experiment", {})
    if args.seed is None and "seed" in exp:
        args.seed = int(exp["seed"])
    if "out" in exp and args.out == ".":
        args.out = exp["out"]
    if "jobs" in exp and args.jobs == 1:
        args.jobs = int(exp["jobs"])
    ens = cfg.get("ensemble", {})
    if "kind" in ens:
        args.ensemble = ens["kind"]
    if "kappa" in ens:
        args.kappa = ens["kappa"]
    q = cfg.get("quantizer", {})
    if "delta" in q:
        args.delta = float(q["delta"])
    if "variant" in q:
        args.variant = q["variant"]
    if "dithered" in q:
        args.no_dither = q["dithered"].lower() in ("0", "false", "no")
    st = cfg.get("set", {})
    if st and args.set_spec is None:
        kind = st.get("kind")
        if kind is None:
            raise ConfigError("[set] section needs a kind")
        parts = ",".join(f"{k}={v}" for k, v in st.items() if k != "kind")
        args.set_spec = f"{kind}:{parts}" if parts else kind
    sw = cfg.get("sweep", {})
    for key, attr in (("m_grid", "m_grid"), ("pairs", "pairs"), ("trials", "trials"),
                      ("k0", "k0")):
        if key in sw and hasattr(args, attr):
            cur = getattr(args, attr)
            default = {"m_grid": "128,256,512,1024,2048,4096,8192", "pairs": 200,
                       "trials": 20, "k0": 1.0}[key]
            if cur == default:
                val = sw[key]
                setattr(args, attr, val if attr == "m_grid" else type(default)(val))


def _ensemble(args) -> ensembles.Ensemble:
    return ensembles.make_ensemble(args.ensemble, args.kappa)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_bytes(text.encode())


def _qmap(args, m: int, n: int, seed):
    return quantizer.make_map(_ensemble(args), m, n, args.delta, seed,
                              dithered=not args.no_dither, variant=args.variant)


def cmd_embed(args) -> int:
    vecs = read_vectors(args.infile)
    if not vecs:
        raise ConfigError("no input vectors")
    n = len(vecs[0])
    qmap = _qmap(args, args.m, n, np.random.SeedSequence(args.seed))
    codes = [quantizer.apply(qmap, v) for v in vecs]
    sys.stdout.write(quantizer.serialize_codes(codes))
    return EXIT_PASS


def cmd_distance(args) -> int:
    vecs = read_vectors(args.infile)
    if len(vecs) < 2 or len(vecs) % 2 != 0:
        raise ConfigError("distance needs an even number of input vectors (pairs)")
    n = len(vecs[0])
    qmap = _qmap(args, args.m, n, np.random.SeedSequence(args.seed))
    for x, y in zip(vecs[0::2], vecs[1::2]):
        d = distances.pseudo_distance(qmap, x, y)
        cols = [f"{d:.12g}"]
        for t in args.t:
            cols.append(f"{distances.soft_pseudo_distance(qmap, x, y, t):.12g}")
        print(" ".join(cols))
    return EXIT_PASS


def cmd_width(args) -> int:
    spec = parse_set_spec(args.set_spec)
    est = geometry.width_estimate(spec, args.draws, np.random.SeedSequence(args.seed))
    d = geometry.diameter(spec)
    n = geometry.ambient_dim(spec)
    lower = ensembles.SQRT_2_OVER_PI * d
    upper = math.sqrt(n) * d
    ok = lower <= est.mean + 3 * est.stderr and est.mean <= upper + 3 * est.stderr
    print(f"width {est.mean:.6g} stderr {est.stderr:.3g} draws {est.draws} "
          f"diameter-link {'pass' if ok else 'fail'}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_min_m(args) -> int:
    spec = parse_set_spec(args.set_spec)
    m = geometry.minimal_m(spec, args.kind, args.eps, args.delta, args.c,
                           seed=np.random.SeedSequence(args.seed))
    print(m)
    return EXIT_PASS


def _sweep_common(args, which: str) -> int:
    spec = parse_set_spec(args.set_spec)
    grid = tuple(int(tok) for tok in str(args.m_grid).split(","))
    plan = experiments.TrialPlan(set_spec=spec, ensemble=_ensemble(args), delta=args.delta,
                                 m_grid=grid, pairs_per_m=args.pairs, trials_per_m=args.trials,
                                 k0=args.k0, master_seed=args.seed)
    band = None
    if args.slope_band:
        lo, hi = (float(t) for t in args.slope_band.split(","))
        band = (lo, hi)
    fn = experiments.quasi_isometry_sweep if which == "quasi-isometry" else experiments.consistency_width_sweep
    res = fn(plan, slope_band=band, jobs=args.jobs)
    out = _out_dir(args)
    _write(out / f"{which}.csv", experiments.rows_to_csv(res.rows))
    _write(out / f"{which}-summary.csv",
           experiments.summary_to_csv([(which, res.slope, res.slope_stderr, res.verdict)]))
    _write(out / f"{which}.dat", experiments.gnuplot_data(res))
    slope_txt = "n/a" if res.slope is None else f"{res.slope:.4f}"
    print(f"{which}: slope {slope_txt} stderr "
          f"{res.slope_stderr if res.slope_stderr is None else round(res.slope_stderr, 4)} "
          f"censored {res.censored_total} verdict "
          f"{'pass' if res.verdict else 'info' if res.verdict is None else 'fail'}")
    if res.verdict is None:
        return EXIT_PASS
    return EXIT_PASS if res.verdict else EXIT_FAIL


def cmd_counterexamples(args) -> int:
    out = _out_dir(args)
    if args.which == "no-dither":
        rep = experiments.no_dither_counterexample(args.k0, args.s, args.m, args.trials,
                                                   np.random.SeedSequence(args.seed))
        ok = rep.pass_rate == 1.0
        print(f"no-dither: pass rate {rep.pass_rate} width {rep.width:.6g}")
        _write(out / "counterexample-summary.csv",
               experiments.summary_to_csv([("no-dither", None, None, ok)]))
        return EXIT_PASS if ok else EXIT_FAIL
    rep = experiments.section2_bernoulli_floor(args.m, args.trials,
                                               np.random.SeedSequence(args.seed), contrast=True)
    ok = rep.all_exact and rep.implied_floor > 0.202
    print(f"section2-floor: exact {rep.all_exact} implied floor {rep.implied_floor:.6g} "
          f"gaussian contrast mean {rep.gaussian_mean:.4f}")
    _write(out / "counterexample-summary.csv",
           experiments.summary_to_csv([("section2-floor", None, None, ok)]))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_lemmas(args) -> int:
    seed = np.random.SeedSequence(args.seed)
    rng = np.random.default_rng(seed)
    ens = _ensemble(args)
    ok = True
    # local continuity sweep
    bad = 0
    for _ in range(args.trials // 10 or 1):
        n, m = 8, 32
        qmap = _qmap(args, m, n, rng.integers(2**63))
        x0 = rng.standard_normal(n)
        y0 = rng.standard_normal(n)
        xp = 0.01 * rng.standard_normal(n)
        yp = 0.01 * rng.standard_normal(n)
        phi = qmap.matrix.entries
        eta = max(np.linalg.norm(phi @ xp), np.linalg.norm(phi @ yp)) / math.sqrt(m)
        eta = max(eta, 1e-9)
        if not distances.lemma3_check(qmap, x0, y0, xp, yp, t=0.0, eta=eta, p_cap=4.0):
            bad += 1
    ok &= bad == 0
    print(f"continuity sweep: {bad} violations")
    spec = geometry.SparseBall(n=32, k=3, radius=1.0)
    rep4 = experiments.lemma4_diameter_check(spec, eta=0.5, ensemble=ens, m=128,
                                             trials=args.trials, seed=seed.spawn(1)[0],
                                             margin=0.5)
    ok &= rep4.failures == 0
    print(f"projection stability: pass rate {rep4.pass_rate}")
    u = rng.standard_normal(16)
    v = u - 0.5 * rng.standard_normal(16) / math.sqrt(16)
    rep5 = experiments.lemma5_chernoff_check(u, v, k0=1.0, t=0.0, ensemble=ens,
                                             delta=args.delta, m=64, r=4,
                                             trials=min(args.trials, 500),
                                             seed=seed.spawn(2)[1], p_samples=20_000)
    ok &= rep5.bound_holds
    print(f"tail bound: empirical {rep5.empirical:.4f} <= {rep5.chernoff_bound:.4f} "
          f"+ 3se ({'pass' if rep5.bound_holds else 'fail'})")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_combinatorics(args) -> int:
    stirling = experiments.stirling_gosper_check(args.stirling_max)
    st_ok = bool(np.all(stirling))
    mad_ok = True
    dm_worst = 0.0
    for n in range(2, args.mad_max + 1, 2):
        rep = experiments.bernoulli_floor_distortion(n)
        mad_ok &= rep.gap_ok and rep.distortion_ok
        dm_worst = max(dm_worst, experiments.de_moivre_agreement(n))
    ok = st_ok and mad_ok and dm_worst <= 1e-12
    print(f"stirling sandwich n<={args.stirling_max}: {'pass' if st_ok else 'fail'}")
    print(f"binomial MAD gap even n<={args.mad_max}: {'pass' if mad_ok else 'fail'} "
          f"(de moivre worst {dm_worst:.2e})")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_selftest(args) -> int:
    results, summary = selftest.run_selftest(seed=args.seed, jobs=args.jobs, scale=args.scale)
    out = _out_dir(args)
    _write(out / "selftest-summary.csv", summary)
    ok = all(r.passed for r in results)
    print(f"selftest: {sum(r.passed for r in results)}/{len(results)} criteria pass")
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {
    "embed": cmd_embed,
    "distance": cmd_distance,
    "width": cmd_width,
    "min-m": cmd_min_m,
    "quasi-isometry": lambda a: _sweep_common(a, "quasi-isometry"),
    "consistency-width": lambda a: _sweep_common(a, "consistency-width"),
    "counterexamples": cmd_counterexamples,
    "lemmas": cmd_lemmas,
    "combinatorics": cmd_combinatorics,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        _apply_config(args)
        if args.seed is None:
            args.seed = _default_seed()
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidArgument, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
