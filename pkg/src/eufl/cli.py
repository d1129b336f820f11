"""Command-line front end: generate, solve, verify, bench, game, params."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .augment import augment
from .clustering import cluster_conn, cluster_greedy
from .core import InputError, format_instance, read_instance
from .game import GammaDistribution, game_table, worst_case_ratio
from .generators import PROFILES, GenSpec, completeness_cost, generate_hardness, generate_random, read_graph
from .jms import jms_solve
from .lp import solve_relaxation
from .params import INFLATED, PAPER, validate_parameters
from .rounding import RoundingDiagnostics, best_solution, connection_dominant, estimate, run_bifactor, run_unifactor
from .verification import (appendix_grid_search, branch_and_bound_opt, brute_force_opt, check_lemmas,
                           worker_count)

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 2, 3
PARAM_SETS = {"paper": PAPER, "inflated": INFLATED}


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    return lo, hi


def _grid(text: str) -> list:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("grid needs lo <= hi and step > 0")
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def _emit(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {path}: {exc}") from None


def _greedy_baseline(inst, params, gamma, trials, seed):
    fs, _, dec = solve_relaxation(inst)
    aug = augment(fs, dec, gamma, inst)
    cl = cluster_greedy(range(inst.nc), aug, params)
    diag = estimate(aug, cl, trials, seed)
    diag.branch = "greedy"
    return best_solution(aug, cl, diag, seed), diag


def _solve(inst, algo, params, gamma, trials, seed):
    if algo == "bifactor":
        return run_bifactor(inst, params, gamma, trials, seed)
    if algo == "unifactor":
        return run_unifactor(inst, params, trials, seed)
    if algo == "greedy-baseline":
        return _greedy_baseline(inst, params, gamma, trials, seed)
    sol = jms_solve(inst)
    empty = np.zeros(0)
    return sol, RoundingDiagnostics(empty, empty, empty, 1, sol.total_cost, 0.0, branch="jms")


# -- subcommands ----------------------------------------------------------------

def cmd_generate(a) -> int:
    if a.graph:
        g = read_graph(a.graph)
        inst = generate_hardness(g, a.q, a.lam)
        text = format_instance(inst)
        if a.lam is not None:
            text = f"# completeness_cost {completeness_cost(g, a.q, a.lam)!r}\n" + text
    else:
        spec = GenSpec(seed=a.seed, dim=a.dim, n_facilities=a.facilities, n_clients=a.clients,
                       cost_range=a.cost_range, coordinate_scale=a.scale, profile=a.profile)
        text = format_instance(generate_random(spec))
    _emit(text, a.out)
    return EXIT_OK


def cmd_solve(a) -> int:
    inst = read_instance(a.instance)
    params = PARAM_SETS[a.params]
    sol, diag = _solve(inst, a.algo, params, a.gamma, a.trials, a.seed)
    _emit(sol.to_tsv(), a.out)
    diag_text = diag.to_tsv(inst.cids) if isinstance(diag, RoundingDiagnostics) else diag.to_tsv()
    diag_path = a.diag
    if diag_path is None and a.out not in (None, "-"):
        diag_path = str(a.out) + ".diag.tsv"
    if diag_path is not None:
        _emit(diag_text, diag_path)
    if a.summary:
        print(f"{a.algo}: total {sol.total_cost:.6f} over {len(sol.open_parents)} open facilities",
              file=sys.stderr)
    return EXIT_OK


def cmd_verify(a) -> int:
    if a.appendix is not None:
        rep = appendix_grid_search(PARAM_SETS[a.params], a.appendix, a.flip_b3)
        _emit(rep.to_tsv(), a.out)
        return EXIT_OK if rep.min_robust_margin > 0 else EXIT_VERIFY
    if a.instance is None:
        raise InputError("verify needs --instance or --appendix")
    inst = read_instance(a.instance)
    params = PARAM_SETS[a.params]
    rows = ["check\tstatus\tvalue"]
    ok = True
    fs, dual, dec = solve_relaxation(inst)         # raises on a duality gap
    gap = abs(fs.objective - dual.objective) / max(1.0, abs(fs.objective))
    rows.append(f"lp-dual-gap\tpass\t{gap!r}")
    costs = {}
    if a.full:
        aug = augment(fs, dec, a.gamma, inst)
        if connection_dominant(dec, params):
            cl = cluster_conn(aug, params)
        else:
            cl = cluster_greedy(range(inst.nc), aug, params)
        for c in check_lemmas(inst, aug, cl, params).checks:
            rows.append(f"lemma:{c.name}\t{c.status}\t{c.worst_margin!r}")
            ok &= c.status != "fail"
        for algo in ("bifactor", "unifactor", "jms", "greedy-baseline"):
            costs[algo] = _solve(inst, algo, params, a.gamma, a.trials, a.seed)[0].total_cost
    if inst.nf <= 20:
        opt = brute_force_opt(inst).opt_cost
        bnb = branch_and_bound_opt(inst)
        agree = abs(opt - bnb) <= 1e-9 * max(1.0, opt)
        lp_ok = fs.objective <= opt + 1e-9 * max(1.0, opt)
        rows.append(f"oracle-agreement\t{'pass' if agree else 'fail'}\t{opt!r}")
        rows.append(f"lp-below-opt\t{'pass' if lp_ok else 'fail'}\t{fs.objective!r}")
        ok &= agree and lp_ok
        for algo, c in costs.items():
            good = c >= opt - 1e-9 * max(1.0, opt)
            rows.append(f"opt-below:{algo}\t{'pass' if good else 'fail'}\t{c!r}")
            ok &= good
    else:
        rows.append("oracle-agreement\tn/a\t")
    _emit("\n".join(rows) + "\n", a.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bench(a) -> int:
    params = PARAM_SETS[a.params]
    algos = ["bifactor", "unifactor", "jms", "greedy-baseline"]
    rows = ["seed\tnf\tnc\topt\t" + "\t".join(algos)]
    for s in range(a.seed, a.seed + a.instances):
        spec = GenSpec(seed=s, dim=a.dim, n_facilities=a.facilities, n_clients=a.clients,
                       cost_range=a.cost_range, profile=a.profile)
        inst = generate_random(spec)
        opt = brute_force_opt(inst).opt_cost if inst.nf <= 20 else float("nan")
        vals = [_solve(inst, al, params, a.gamma, a.trials, s)[0].total_cost for al in algos]
        rows.append(f"{s}\t{inst.nf}\t{inst.nc}\t{opt!r}\t" + "\t".join(repr(v) for v in vals))
    _emit("\n".join(rows) + "\n", a.out)
    return EXIT_OK


def cmd_game(a) -> int:
    dist = GammaDistribution.mu1() if a.dist == "mu1" else GammaDistribution.mu2(a.eps7, a.kappa2)
    ratio, q = worst_case_ratio(dist, a.variant, a.eps7)
    text = f"# worst_ratio\t{ratio!r}\n# argmax_q\t{q!r}\n" + game_table(dist, a.variant, a.eps7, a.step)
    _emit(text, a.out)
    return EXIT_OK


def cmd_params(a) -> int:
    params = PARAM_SETS[a.params]
    rep = validate_parameters(params, a.grid, literal=a.literal)
    _emit(rep.to_tsv(), a.out)
    return EXIT_OK if rep.all_pass else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = Parser(prog="eufl", description="Euclidean facility location solver and verification suite.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(sp, out=True):
        sp.add_argument("--params", choices=sorted(PARAM_SETS), default="paper")
        if out:
            sp.add_argument("-o", "--out", default=None, help="output path (default: stdout)")

    g = sub.add_parser("generate", help="write a seeded random or hardness instance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--profile", choices=sorted(PROFILES), default="uniform_box")
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--facilities", type=int, default=4)
    g.add_argument("--clients", type=int, default=6)
    g.add_argument("--cost-range", type=_pair, default=(0.0, 1.0))
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--graph", help="edge-list file; builds the hardness instance instead")
    g.add_argument("--q", type=float, default=0.25)
    g.add_argument("--lambda", dest="lam", type=float, default=None)
    g.add_argument("-o", "--out", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--algo", choices=["bifactor", "unifactor", "jms", "greedy-baseline"], default="bifactor")
    s.add_argument("--gamma", type=float, default=PAPER.gamma)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--diag", default=None, help="diagnostics TSV path (default: <out>.diag.tsv)")
    s.add_argument("--summary", action="store_true", help="print a one-line summary to stderr")
    common(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run checkers on an instance or the coefficient grid")
    v.add_argument("--instance")
    v.add_argument("--full", action="store_true")
    v.add_argument("--gamma", type=float, default=PAPER.gamma)
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--appendix", type=float, default=None, metavar="D", help="run the grid search with step D")
    v.add_argument("--flip-b3", action="store_true", help="use the sign-corrected B3 coefficient")
    common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="compare all algorithms against the exact optimum")
    b.add_argument("--instances", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--profile", choices=sorted(PROFILES), default="uniform_box")
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--facilities", type=int, default=6)
    b.add_argument("--clients", type=int, default=10)
    b.add_argument("--cost-range", type=_pair, default=(0.0, 1.0))
    b.add_argument("--gamma", type=float, default=PAPER.gamma)
    b.add_argument("--trials", type=int, default=200)
    common(b)
    b.set_defaults(func=cmd_bench)

    gm = sub.add_parser("game", help="tabulate the game value against threshold profiles")
    gm.add_argument("--dist", choices=["mu1", "mu2"], default="mu1")
    gm.add_argument("--variant", choices=["nu", "nu_prime"], default="nu")
    gm.add_argument("--eps7", type=float, default=0.0)
    gm.add_argument("--kappa2", type=float, default=PAPER.kappa2)
    gm.add_argument("--step", type=float, default=0.01)
    gm.add_argument("-o", "--out", default=None)
    gm.set_defaults(func=cmd_game)

    pr = sub.add_parser("params", help="evaluate the parameter conditions over a gamma grid")
    pr.add_argument("--grid", type=_grid, default=None)
    pr.add_argument("--literal", action="store_true", help="use the constants exactly as printed")
    common(pr)
    pr.set_defaults(func=cmd_params)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        worker_count()
        return args.func(args)
    except InputError as exc:
        print(f"eufl: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
