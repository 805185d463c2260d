"""Command-line front end.

Subcommands: construct, reconcile, sweep, threshold, stability.  All output
meant for downstream tooling is CSV/JSON with fixed headers; every command
is deterministic given an explicit --seed.  Exit codes: 0 success, 1
protocol/decode failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import socket
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, codes, density_evolution, prng, protocol, rate_adapt
from .channel import BscParams
from .decoder import DecoderConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3

JOBS_ENV = "RATECON_JOBS"


def _parse_grid(spec: str) -> list[float]:
    """MIN:MAX:STEP inclusive grid (or a single value)."""
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be MIN:MAX:STEP, got {spec!r}")
    lo, hi, step = (float(x) for x in parts)
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _parse_float_list(spec: str) -> list[float]:
    return [float(x) for x in spec.split(",") if x.strip()]


def _efficiency_model(args, delta: float):
    if getattr(args, "efficiency_const", None) is not None:
        return rate_adapt.ConstantEfficiency(args.efficiency_const)
    if getattr(args, "efficiency_csv", None):
        return rate_adapt.TableEfficiency.from_csv(args.efficiency_csv)
    return rate_adapt.benchmark_efficiency(delta)


def _out_stream(path):
    return open(path, "w") if path else sys.stdout


# ---------------------------------------------------------------------------
# construct


def cmd_construct(args) -> int:
    dist = codes.read_ensemble(args.ensemble)
    seq = codes.degree_sequence(dist, args.n)
    code = codes.peg_construct(seq, args.seed)
    codes.write_alist(code, args.out)
    girth = code.girth()
    if args.skip_rank or (not code.rank_verified and code.n > codes.RANK_VERIFY_LIMIT):
        rank_text = "unverified (assumed full)"
    else:
        rank_text = str(code.rank)
    print(f"n: {code.n}")
    print(f"m: {code.m}")
    print(f"rate: {(code.n - code.m) / code.n:.6f}")
    print(f"girth: {girth if girth is not None else 'none'}")
    print(f"rank: {rank_text}")
    print(f"alist: {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reconcile


def _session_config(code, args, forced_rate=None):
    return protocol.SessionConfig(
        code=code,
        delta=args.delta,
        t=args.t,
        efficiency_model=_efficiency_model(args, args.delta),
        layout_seed=args.layout_seed,
        mode=args.mode,
        session_nonce=args.seed,
        decoder=DecoderConfig(max_iterations=args.max_iterations),
        forced_rate=forced_rate,
    )


def _load_bits(path, count, seed):
    if path:
        text = open(path).read().split()
        bits = np.array([int(b) for b in "".join(text)], dtype=np.uint8)
        if bits.size != count:
            raise ValueError(f"{path} holds {bits.size} bits, need {count}")
        return bits
    return prng.bits(prng.derive_seed(seed, 0x494E5054), np.arange(count, dtype=np.uint64))


def cmd_reconcile(args) -> int:
    code = codes.read_alist(args.alist)
    config = _session_config(code, args)

    if args.listen is not None or args.connect is not None:
        return _reconcile_networked(code, config, args)

    x = _load_bits(args.input, config.message_length, args.seed)
    report = protocol.run_session(
        x, BscParams(args.p, seed=prng.derive_seed(args.seed, 0x42534331)),
        config, sim_seed=args.seed,
    )
    print(report.to_json())
    return EXIT_OK if report.success else EXIT_FAILURE


def _reconcile_networked(code, config, args) -> int:
    import json

    if args.listen is not None:
        channel = None
        if args.p > 0.0:
            channel = BscParams(args.p, seed=prng.derive_seed(args.seed, 0x42534331))
        server = socket.create_server(("", args.listen))
        conn, _ = server.accept()
        with conn:
            report, _ = protocol.run_bob_networked(
                conn, config, sample_seed=args.seed, channel=channel)
        server.close()
    else:
        host, _, port = args.connect.rpartition(":")
        conn = socket.create_connection((host or "localhost", int(port)))
        with conn:
            x = _load_bits(args.input, config.message_length, args.seed)
            report = protocol.run_alice_networked(conn, config, x, fill_seed=args.seed)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if report["success"] else EXIT_FAILURE


# ---------------------------------------------------------------------------
# sweep

_P_GRID_STEP = 0.0005


def _trial_outcome(code, delta, rate, p, t, max_iterations, seed) -> bool:
    config = protocol.SessionConfig(
        code=code,
        delta=delta,
        t=t,
        layout_seed=prng.derive_seed(seed, 0x4C4159),
        session_nonce=seed,
        decoder=DecoderConfig(max_iterations=max_iterations),
        forced_rate=rate,
    )
    x = prng.bits(prng.derive_seed(seed, 0x58585858),
                  np.arange(config.message_length, dtype=np.uint64))
    report = protocol.run_session(
        x, BscParams(p, seed=prng.derive_seed(seed, 0x42534332)), config, sim_seed=seed
    )
    return report.success


def _point_fer(code, delta, rate, p, t, trials, max_iterations, seed, fail_budget):
    """Failure fraction over `trials`, stopping early once the budget of
    allowed failures is exhausted (the point already missed the criterion)."""
    jobs = int(os.environ.get(JOBS_ENV, "1"))
    failures = 0
    if jobs > 1:
        seeds = [prng.derive_seed(seed, i) for i in range(trials)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(
                _trial_worker,
                [(None, delta, rate, p, t, max_iterations, s) for s in seeds],
                chunksize=8,
            )
            failures = sum(0 if ok else 1 for ok in results)
        return failures / trials
    for i in range(trials):
        ok = _trial_outcome(code, delta, rate, p, t, max_iterations,
                            prng.derive_seed(seed, i))
        if not ok:
            failures += 1
            if failures > fail_budget:
                return failures / trials
    return failures / trials


_WORKER_CODE = None


def _trial_worker(argtuple):
    global _WORKER_CODE
    _, delta, rate, p, t, max_iterations, seed = argtuple
    return _trial_outcome(_WORKER_CODE, delta, rate, p, t, max_iterations, seed)


def _max_corrected_ber(code, delta, rate, t, trials, target_fer, max_iterations, seed):
    """Largest grid crossover whose empirical FER meets the criterion."""
    r0 = code.design_rate()
    lo_idx = 1
    hi_idx = int(0.499 / _P_GRID_STEP)
    fail_budget = int(math.floor(target_fer * trials))

    def ok(idx: int) -> bool:
        p = idx * _P_GRID_STEP
        fer = _point_fer(code, delta, rate, p, t, trials, max_iterations,
                         prng.derive_seed(seed, idx), fail_budget)
        return fer <= target_fer

    if not ok(lo_idx):
        return None
    # exponential climb then bisection on the grid
    step = 8
    last_good = lo_idx
    probe = lo_idx
    while probe < hi_idx:
        probe = min(probe + step, hi_idx)
        if ok(probe):
            last_good = probe
            step *= 2
        else:
            hi_idx = probe - 1
            break
    lo, hi = last_good, hi_idx
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo * _P_GRID_STEP


def cmd_sweep(args) -> int:
    global _WORKER_CODE
    code = codes.read_alist(args.alist)
    _WORKER_CODE = code
    rates = _parse_grid(args.rates)
    deltas = _parse_float_list(args.deltas)
    out = _out_stream(args.out)
    out.write("rate,delta,max_ber_corrected,f\n")
    r0 = code.design_rate()
    for delta in deltas:
        lo, hi = rate_adapt.achievable_range(r0, delta)
        for rate in rates:
            if rate < lo - 1e-9 or rate > hi + 1e-9:
                print(f"skipping rate {rate} outside achievable range for delta {delta}",
                      file=sys.stderr)
                continue
            ber = _max_corrected_ber(
                code, delta, rate, args.t, args.trials, args.target_fer,
                args.max_iterations, prng.derive_seed(args.seed, hash((rate, delta)) & 0xFFFF),
            )
            if ber is None:
                out.write(f"{rate},{delta},,\n")
            else:
                f = (1.0 - rate) / rate_adapt.binary_entropy(ber)
                out.write(f"{rate},{delta},{ber:.4f},{f:.4f}\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# threshold / stability


def cmd_threshold(args) -> int:
    dist = codes.read_ensemble(args.ensemble)
    r0 = codes.design_rate(dist)
    out = _out_stream(args.out)
    out.write("rate,delta,threshold_p\n")
    for delta in _parse_float_list(args.deltas):
        lo, hi = rate_adapt.achievable_range(r0, delta)
        for rate in _parse_grid(args.rates):
            if rate < lo - 1e-9 or rate > hi + 1e-9:
                print(f"skipping rate {rate} outside achievable range for delta {delta}",
                      file=sys.stderr)
                continue
            thr = density_evolution.threshold(
                dist, delta, rate, tol=args.tol,
                bin_width=args.bin_width, support=args.support,
            )
            out.write(f"{rate},{delta},{thr:.5f}\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_stability(args) -> int:
    dist = codes.read_ensemble(args.ensemble)
    ch = density_evolution.EnsembleChannel(
        p=args.p, delta=args.delta, pi=args.pi, sigma=args.delta - args.pi
    )
    report = density_evolution.stability_bound(dist, ch)
    print(f"lambda2: {report.lambda2:.6f}")
    print(f"bound: {report.bound:.6f}")
    print(f"stable: {'yes' if report.stable else 'no'}")
    print(f"bhattacharyya: {report.bhattacharyya:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser):
    """key=value file defaults; explicit flags win.

    Values are installed as string defaults on every subparser that has a
    matching destination, so argparse runs its usual type conversion.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    defaults = {}
    with open(known.config) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            defaults[key.strip().replace("-", "_")] = value.strip()
    for sub in parser._command_parsers.values():
        dests = {action.dest for action in sub._actions}
        matching = {k: v for k, v in defaults.items() if k in dests}
        sub.set_defaults(**matching)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratecon", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value defaults file (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="realize a Tanner graph and write alist")
    c.add_argument("ensemble", help="ensemble description file")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--seed", type=int, default=1)
    c.add_argument("--out", required=True)
    c.add_argument("--skip-rank", action="store_true")
    c.set_defaults(func=cmd_construct)

    r = sub.add_parser("reconcile", help="run one reconciliation session")
    r.add_argument("--alist", required=True)
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--p", type=float, default=0.05, help="simulated BSC crossover")
    r.add_argument("--t", type=int, default=256)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--mode", choices=(protocol.DATA_MODE, protocol.KEY_MODE),
                   default=protocol.DATA_MODE)
    r.add_argument("--layout-seed", type=int, default=7)
    r.add_argument("--max-iterations", type=int, default=2000)
    r.add_argument("--efficiency-const", type=float)
    r.add_argument("--efficiency-csv")
    r.add_argument("--input", help="file of 0/1 characters for the initiator string")
    r.add_argument("--listen", type=int, help="act as responder on this TCP port")
    r.add_argument("--connect", help="act as initiator; HOST:PORT of the responder")
    r.set_defaults(func=cmd_reconcile)

    s = sub.add_parser("sweep", help="max corrected BER over a rate/delta grid")
    s.add_argument("--alist", required=True)
    s.add_argument("--rates", required=True, help="MIN:MAX:STEP")
    s.add_argument("--deltas", required=True, help="comma-separated list")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--target-fer", type=float, default=0.1)
    s.add_argument("--t", type=int, default=256)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--max-iterations", type=int, default=300)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("threshold", help="density-evolution thresholds")
    t.add_argument("ensemble")
    t.add_argument("--deltas", required=True)
    t.add_argument("--rates", required=True, help="MIN:MAX:STEP")
    t.add_argument("--tol", type=float, default=2.5e-4)
    t.add_argument("--bin-width", type=float, default=density_evolution.DEFAULT_BIN_WIDTH)
    t.add_argument("--support", type=float, default=density_evolution.DEFAULT_SUPPORT)
    t.add_argument("--out")
    t.set_defaults(func=cmd_threshold)

    st = sub.add_parser("stability", help="degree-2 stability condition")
    st.add_argument("ensemble")
    st.add_argument("--delta", type=float, required=True)
    st.add_argument("--pi", type=float, required=True)
    st.add_argument("--p", type=float, required=True)
    st.set_defaults(func=cmd_stability)

    parser._command_parsers = {"construct": c, "reconcile": r, "sweep": s,
                               "threshold": t, "stability": st}
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, codes.InvalidEnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
