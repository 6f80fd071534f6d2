"""Command-line entry point.

Subcommands cover the whole pipeline: sample a geodesic forest (fpp), run
the particle system (sidla), construct and replay the ring coupling
(couple), check the exact shell identity (shells), collect height and
flank statistics (stats), compare the two pictures distributionally
(compare), and draw forests (render).

Every command is a pure function of its flags: seeds are explicit,
default output names embed them, files are written atomically, and
repeated invocations produce byte-identical artifacts.  Exit codes: 0
success, 1 configuration error, 2 verification failure, 3 internal fault.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, coupling, fpp, render, sidla
from .errors import ConfigError, CouplingFault, VerificationFailure
from .fileio import atomic_write_text
from .lattice import Vertex, Window, edge_str
from .sidla import SimulationLimitError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
EXIT_FAULT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def _add_common(sp: argparse.ArgumentParser, width: int = 16, height: int = 8) -> None:
    sp.add_argument("--seed", type=int, default=1, help="base seed (default 1)")
    sp.add_argument("--width", "-W", type=int, default=width,
                    help=f"boundary sites per period (default {width})")
    sp.add_argument("--height", "-M", type=int, default=height,
                    help=f"height cap (default {height})")
    sp.add_argument("--replicas", type=int, default=1,
                    help="independent runs with consecutive seeds (default 1)")
    sp.add_argument("--jobs", type=int, default=1,
                    help="worker processes for replicas (default 1)")


def _add_profile(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--profile", choices=[p.value for p in fpp.WeightProfile],
                    default="stretch", help="edge-rate profile (default stretch)")


def _window(args: argparse.Namespace) -> Window:
    return Window(args.width, args.height)


def _check_replicas(args: argparse.Namespace) -> None:
    if args.replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {args.replicas}")
    if args.jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {args.jobs}")


def _run_tasks(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _out_path(base: str | None, stem: str, seed: int, ext: str, multi: bool) -> str:
    if base is None:
        return f"{stem}_s{seed}{ext}"
    if not multi:
        return base
    root = base[: -len(ext)] if base.endswith(ext) else base
    return f"{root}_s{seed}{ext}"


# ---------------------------------------------------------------------------
# fpp


def _fpp_task(task):
    seed, W, M, profile_value = task
    field = fpp.WeightField(seed, fpp.WeightProfile(profile_value), Window(W, M))
    forest = fpp.build_forest(field)
    return seed, fpp.snapshot_text(forest), forest.max_dist


def cmd_fpp(args: argparse.Namespace) -> int:
    win = _window(args)
    _check_replicas(args)
    profile = fpp.WeightProfile.parse(args.profile)
    tasks = [(s, win.W, win.M, profile.value)
             for s in range(args.seed, args.seed + args.replicas)]
    multi = args.replicas > 1
    stem = f"fpp_w{win.W}_m{win.M}_{profile.value}"
    for seed, text, max_dist in _run_tasks(_fpp_task, tasks, args.jobs):
        path = _out_path(args.out, stem, seed, ".json", multi)
        atomic_write_text(path, text)
        print(f"fpp seed={seed} window={win.W}x{win.M} profile={profile.value} "
              f"interior={win.W * win.M} maxdist={format(max_dist, '.17g')} "
              f"wrote={path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sidla


def _sidla_task(task):
    seed, W, M, method = task
    state = sidla.run_until_covered(Window(W, M), seed, method=method,
                                    log_events=True)
    return (seed, fpp.snapshot_text(state), sidla.events_csv_text(state),
            state.n_rings, state.clock, len(state.censored))


def cmd_sidla(args: argparse.Namespace) -> int:
    win = _window(args)
    _check_replicas(args)
    tasks = [(s, win.W, win.M, args.method)
             for s in range(args.seed, args.seed + args.replicas)]
    stem = f"sidla_w{win.W}_m{win.M}"
    for seed, snap, events, n_rings, clock, censored in _run_tasks(
            _sidla_task, tasks, args.jobs):
        snap_path = _out_path(args.out, stem, seed, ".json", True)
        events_path = snap_path[: -len(".json")] + "_events.csv"
        atomic_write_text(snap_path, snap)
        atomic_write_text(events_path, events)
        print(f"sidla seed={seed} window={win.W}x{win.M} method={args.method} "
              f"rings={n_rings} clock={format(clock, '.17g')} "
              f"censored={censored} wrote={snap_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# couple


def _couple_task(task):
    seed, W, M, profile_value, horizon_factor, repeats = task
    report = coupling.verify_coupling(
        seed, Window(W, M),
        horizon_factor=horizon_factor,
        profile=fpp.WeightProfile(profile_value),
        repeats=repeats,
    )
    return report


def cmd_couple(args: argparse.Namespace) -> int:
    win = _window(args)
    _check_replicas(args)
    profile = fpp.WeightProfile.parse(args.profile)
    if args.horizon_factor < 1.0:
        raise ConfigError(
            f"horizon factor must be >= 1 (horizon below the coverage time "
            f"would censor rings), got {args.horizon_factor}"
        )
    if args.repeats not in ("auto",) + coupling.REPEAT_MODES:
        raise ConfigError(f"unknown repeats mode {args.repeats!r}")
    tasks = [(s, win.W, win.M, profile.value, args.horizon_factor, args.repeats)
             for s in range(args.seed, args.seed + args.replicas)]
    reports = _run_tasks(_couple_task, tasks, args.jobs)

    all_equal = all(r.forest_equal for r in reports)
    sites = np.concatenate([r.gap_sites for r in reports]) if reports else np.array([])
    gaps = np.concatenate([r.gap_sample for r in reports]) if reports else np.array([])
    censored = sum(r.censored_count for r in reports)
    if len(gaps) >= 10:
        ks = analysis.ks_test_exp1(gaps)
        ks_stat, ks_p = ks.statistic, ks.p_value
    else:
        ks_stat, ks_p = float("nan"), float("nan")

    for r in reports:
        print(f"couple seed={r.seed} forest_equal={str(r.forest_equal).lower()} "
              f"rings={r.n_rings} gaps={r.n_gaps} censored={r.censored_count}")

    def num(v: float) -> str:
        return "null" if np.isnan(v) else format(v, ".17g")

    report_text = (
        "{"
        f'"forest_equal": {"true" if all_equal else "false"}, '
        f'"n_gaps": {int(len(gaps))}, '
        f'"ks_stat": {num(ks_stat)}, '
        f'"ks_p": {num(ks_p)}, '
        f'"censored_count": {censored}'
        "}\n"
    )
    stem = f"couple_w{win.W}_m{win.M}"
    report_path = _out_path(args.out, stem, args.seed, ".json", False) \
        if args.out else f"{stem}_s{args.seed}.json"
    atomic_write_text(report_path, report_text)
    gaps_path = args.gaps_out or f"{stem}_s{args.seed}_gaps.csv"
    atomic_write_text(gaps_path, coupling.gaps_csv_text(sites, gaps))
    print(f"couple total replicas={args.replicas} "
          f"forest_equal={str(all_equal).lower()} n_gaps={len(gaps)} "
          f"ks_stat={num(ks_stat)} ks_p={num(ks_p)} censored={censored} "
          f"wrote={report_path}")
    return EXIT_OK if all_equal else EXIT_VERIFY


# ---------------------------------------------------------------------------
# shells


def cmd_shells(args: argparse.Namespace) -> int:
    k = args.max_edges
    count = 0
    for tree in analysis.enumerate_monotone_trees(k):
        if not analysis.shell_identity_check(tree):
            total = analysis.shell_profile(tree).weighted_sum()
            edges = ";".join(sorted(edge_str(e) for e in tree.edges))
            print(f"LEMMA22 FAIL k={k} edges=[{edges}] sum={total}")
            return EXIT_VERIFY
        count += 1
    print(f"LEMMA22 PASS k={k} trees={count}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stats


def _picture_run(picture: str, seed: int, W: int, M: int, profile_value: str,
                 method: str):
    win = Window(W, M)
    if picture == "fpp":
        field = fpp.WeightField(seed, fpp.WeightProfile(profile_value), win)
        return fpp.build_forest(field)
    return sidla.run_until_covered(win, seed, method=method)


def _stats_task(task):
    picture, seed, W, M, profile_value, method, slim_d, flank_levels = task
    obj = _picture_run(picture, seed, W, M, profile_value, method)
    win = obj.window
    heights, censored = analysis.root_heights(obj)
    params = analysis.SlimParams(D=slim_d)
    slim_fracs = []
    for j in range(W):
        if censored[j] or heights[j] < 1:
            continue
        tree = analysis.extract_tree(obj, 2 * j)
        frac = len(analysis.slim_levels(tree, params)) / heights[j]
        slim_fracs.append(frac)
    flank_samples = {
        n: analysis.flank_left_distances(obj, n) for n in flank_levels
    }
    return heights, censored, slim_fracs, flank_samples


def cmd_stats(args: argparse.Namespace) -> int:
    win = _window(args)
    _check_replicas(args)
    profile = fpp.WeightProfile.parse(args.profile)
    if args.picture not in ("fpp", "sidla"):
        raise ConfigError(f"unknown picture {args.picture!r}; use fpp or sidla")
    levels = _parse_levels(args.levels, win.M) if args.levels else \
        _default_levels(win.M)
    flank_levels = _parse_levels(args.flank_levels, win.M) \
        if args.flank_levels else []
    kappas = [float(k) for k in args.kappa.split(",")] if args.kappa else [2.0, 4.0]
    if args.slim_d <= 0:
        raise ConfigError(f"slim threshold must be positive, got {args.slim_d}")

    tasks = [(args.picture, s, win.W, win.M, profile.value, args.method,
              args.slim_d, tuple(flank_levels))
             for s in range(args.seed, args.seed + args.replicas)]
    results = _run_tasks(_stats_task, tasks, args.jobs)

    all_heights = np.concatenate([r[0] for r in results])
    all_censored = np.concatenate([r[1] for r in results])
    slim_fracs = [f for r in results for f in r[2]]
    survival = analysis.tail_height_estimate(all_heights, levels)

    lines = ["level,n,survival,ci_low,ci_high"]
    for n in levels:
        pt = survival[n]
        lines.append(
            f"{pt.level},{pt.n_samples},{format(pt.probability, '.17g')},"
            f"{format(pt.ci_low, '.17g')},{format(pt.ci_high, '.17g')}"
        )
    stem = f"stats_{args.picture}_w{win.W}_m{win.M}"
    out = args.out or f"{stem}_s{args.seed}.csv"
    atomic_write_text(out, "\n".join(lines) + "\n")

    cens_frac = float(all_censored.mean())
    print(f"stats picture={args.picture} replicas={args.replicas} "
          f"roots={len(all_heights)} censored_fraction={cens_frac:.6g} "
          f"beta_hat={cens_frac:.6g} "
          f"mean_trunc_height={float(all_heights.mean()):.6g} wrote={out}")
    if slim_fracs:
        print(f"stats slim D={args.slim_d:g} trees={len(slim_fracs)} "
              f"mean_slim_fraction={float(np.mean(slim_fracs)):.6g}")
    for n in flank_levels:
        samples = np.concatenate([r[3][n] for r in results])
        for kappa in kappas:
            try:
                rep = analysis.flank_bound_test(samples, n, kappa)
            except ValueError as exc:
                print(f"flank n={n} kappa={kappa:g} skipped ({exc})")
                continue
            print(rep.line())
    return EXIT_OK


def _default_levels(M: int) -> list[int]:
    levels = []
    n = 1
    while n <= M:
        levels.append(n)
        n *= 2
    if levels[-1] != M:
        levels.append(M)
    return levels


def _parse_levels(text: str, M: int) -> list[int]:
    try:
        levels = sorted({int(t) for t in text.split(",")})
    except ValueError:
        raise ConfigError(f"levels must be comma-separated integers, got {text!r}")
    if any(not 1 <= n <= M for n in levels):
        raise ConfigError(f"levels must lie in 1..{M}, got {levels}")
    return levels


# ---------------------------------------------------------------------------
# compare


def _compare_task(task):
    picture, seed, W, M, profile_value, method, height_clip = task
    obj = _picture_run(picture, seed, W, M, profile_value, method)
    t1 = analysis.level_profile(obj, 0, 1)
    heights, censored = analysis.root_heights(obj)
    h0 = int(heights[0])
    return t1, min(h0, height_clip)


def cmd_compare(args: argparse.Namespace) -> int:
    win = _window(args)
    _check_replicas(args)
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0,1), got {args.alpha}")
    clip = args.height_clip
    seeds = range(args.seed, args.seed + args.replicas)
    fpp_tasks = [("fpp", s, win.W, win.M, "stretch", args.method, clip)
                 for s in seeds]
    sidla_tasks = [("sidla", s, win.W, win.M, "stretch", args.method, clip)
                   for s in seeds]
    fpp_res = _run_tasks(_compare_task, fpp_tasks, args.jobs)
    sidla_res = _run_tasks(_compare_task, sidla_tasks, args.jobs)

    t1_a = analysis.histogram(r[0] for r in fpp_res)
    t1_b = analysis.histogram(r[0] for r in sidla_res)
    h_a = analysis.histogram(r[1] for r in fpp_res)
    h_b = analysis.histogram(r[1] for r in sidla_res)
    r_t1 = analysis.chi_square_compare(t1_a, t1_b)
    r_h = analysis.chi_square_compare(h_a, h_b)
    print(f"compare slice1 chi2={r_t1.statistic:.6g} p={r_t1.p_value:.6g} "
          f"bins={r_t1.n_bins}")
    print(f"compare height chi2={r_h.statistic:.6g} p={r_h.p_value:.6g} "
          f"bins={r_h.n_bins}")
    if args.out:
        text = (
            "{"
            f'"replicas": {args.replicas}, '
            f'"alpha": {format(args.alpha, ".17g")}, '
            f'"slice1": {{"statistic": {format(r_t1.statistic, ".17g")}, '
            f'"p_value": {format(r_t1.p_value, ".17g")}}}, '
            f'"height": {{"statistic": {format(r_h.statistic, ".17g")}, '
            f'"p_value": {format(r_h.p_value, ".17g")}}}'
            "}\n"
        )
        atomic_write_text(args.out, text)
        print(f"compare wrote={args.out}")
    passed = r_t1.p_value > args.alpha and r_h.p_value > args.alpha
    return EXIT_OK if passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# render


def cmd_render(args: argparse.Namespace) -> int:
    if args.input:
        obj = fpp.load_snapshot(args.input)
        win = obj.window
        seed = obj.seed
    else:
        win = _window(args)
        obj = _picture_run(args.picture, args.seed, win.W, win.M,
                           args.profile, args.method)
        seed = args.seed
    if args.highlight_root.lower() == "none":
        highlight = None
    else:
        try:
            x = int(args.highlight_root)
        except ValueError:
            raise ConfigError(
                f"highlight root must be an even integer or 'none', "
                f"got {args.highlight_root!r}"
            )
        if x % 2 != 0:
            raise ConfigError(f"highlight root must be even, got {x}")
        highlight = Vertex(x % win.period, 0)
    options = render.RenderOptions(
        highlight_root=highlight, scale=args.scale, max_level=args.max_level
    )
    svg = render.render_svg(obj, options)
    out = args.out or f"render_w{win.W}_m{win.M}_s{seed}.svg"
    atomic_write_text(out, svg)
    print(f"render seed={seed} window={win.W}x{win.M} bytes={len(svg)} "
          f"wrote={out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="sidlalab",
        description="Stretched internal DLA and its passage-time twin on the "
                    "half-plane lattice: simulation, coupling verification, "
                    "exact checks, statistics and rendering.",
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("fpp", help="sample a geodesic forest snapshot")
    _add_common(sp)
    _add_profile(sp)
    sp.add_argument("--out", default=None, help="output JSON path")
    sp.set_defaults(func=cmd_fpp)

    sp = sub.add_parser("sidla", help="run the particle system to coverage")
    _add_common(sp)
    sp.add_argument("--method", choices=["auto", "rings", "jumps"],
                    default="auto", help="driver (default auto)")
    sp.add_argument("--out", default=None, help="output prefix or JSON path")
    sp.set_defaults(func=cmd_sidla)

    sp = sub.add_parser("couple", help="verify the ring coupling against the "
                                       "forest")
    _add_common(sp)
    _add_profile(sp)
    sp.add_argument("--horizon-factor", type=float, default=1.5,
                    help="horizon as multiple of the coverage time "
                         "(default 1.5)")
    sp.add_argument("--repeats", default="auto",
                    choices=["auto", "full", "base", "none"],
                    help="boundary repeat streams (default auto)")
    sp.add_argument("--out", default=None, help="report JSON path")
    sp.add_argument("--gaps-out", default=None, help="gap CSV path")
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("shells", help="exact shell identity over enumerated "
                                       "trees")
    sp.add_argument("--max-edges", type=int, default=8,
                    help="enumerate trees up to this many edges (default 8)")
    sp.set_defaults(func=cmd_shells)

    sp = sub.add_parser("stats", help="height, slimness and flank statistics")
    _add_common(sp)
    _add_profile(sp)
    sp.add_argument("--picture", choices=["fpp", "sidla"], default="fpp",
                    help="which sampler to draw from (default fpp)")
    sp.add_argument("--method", choices=["auto", "rings", "jumps"],
                    default="auto", help="sidla driver (default auto)")
    sp.add_argument("--levels", default=None,
                    help="comma-separated survival levels (default powers "
                         "of 2)")
    sp.add_argument("--slim-d", type=float, default=4.0,
                    help="slim width threshold D (default 4)")
    sp.add_argument("--flank-levels", default=None,
                    help="comma-separated levels for flank bound lines")
    sp.add_argument("--kappa", default=None,
                    help="comma-separated kappa values (default 2,4)")
    sp.add_argument("--out", default=None, help="survival CSV path")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("compare", help="chi-square law comparison of the two "
                                        "pictures")
    _add_common(sp, width=64, height=32)
    sp.add_argument("--method", choices=["auto", "rings", "jumps"],
                    default="jumps", help="sidla driver (default jumps)")
    sp.add_argument("--alpha", type=float, default=0.01,
                    help="rejection threshold (default 0.01)")
    sp.add_argument("--height-clip", type=int, default=16,
                    help="clip heights at this level (default 16)")
    sp.add_argument("--out", default=None, help="optional report JSON path")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("render", help="draw a forest as SVG")
    _add_common(sp)
    _add_profile(sp)
    sp.add_argument("--picture", choices=["fpp", "sidla"], default="fpp",
                    help="sampler when no input file is given (default fpp)")
    sp.add_argument("--method", choices=["auto", "rings", "jumps"],
                    default="auto", help="sidla driver (default auto)")
    sp.add_argument("--in", dest="input", default=None,
                    help="render an existing snapshot JSON instead of "
                         "sampling")
    sp.add_argument("--highlight-root", default="0",
                    help="boundary x to highlight, or 'none' (default 0)")
    sp.add_argument("--scale", type=float, default=12.0,
                    help="pixels per lattice step (default 12)")
    sp.add_argument("--max-level", type=int, default=None,
                    help="clip drawing above this level")
    sp.add_argument("--out", default=None, help="output SVG path")
    sp.set_defaults(func=cmd_render)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, SimulationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except CouplingFault as exc:
        print(f"internal fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except Exception as exc:
        print(f"internal fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
