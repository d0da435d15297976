"""Command-line entry point.

Exit codes: 0 success, 1 runtime or verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, demos, verify
from .analysis import fmt
from .matcore import herm_eig, inv_sqrt_psd, unvec
from .model import ModelConfig, ModelParams, encode, forward, init_params, nll
from .qchannel import kraus_from_factor
from .qstate import DensityMatrix
from .rand import random_factor
from .train import DivergenceError, TrainConfig, fit

log = logging.getLogger("dmrnn")

CONFIG_KEYS = {"d", "m", "vocab", "K", "eps", "seed", "learning_rate", "steps",
               "fd_step", "log_every", "data"}
REQUIRED_KEYS = {"d", "m", "vocab", "learning_rate", "steps", "data"}


class UsageError(Exception):
    pass


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _bipartite(text: str | None):
    if text is None:
        return None
    try:
        a, b = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--bipartite expects AxB, got {text!r}") from None
    if a < 1 or b < 1:
        raise UsageError("--bipartite dimensions must be positive")
    return a, b


# --- verify ---------------------------------------------------------------

def cmd_verify(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.d < 1:
        raise UsageError("--d must be at least 1")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    results = verify.run_all(args.trials, args.d, args.tol, args.seed)
    for r in results:
        print(r.line(args.seed))
    ok = all(r.ok for r in results)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


# --- demo -----------------------------------------------------------------

def cmd_demo(args) -> int:
    out = _outdir(args.output_dir)
    for path in demos.DEMOS[args.name](out):
        print(path)
        sys.stdout.write(path.read_text(encoding="utf-8"))
    return 0


# --- train ----------------------------------------------------------------

def resolve_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("dmrnn") / "configs" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise UsageError(f"config not found: {path}")


def load_train_config(path: Path) -> tuple[ModelConfig, TrainConfig]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(doc) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    missing = REQUIRED_KEYS - set(doc)
    if missing:
        raise UsageError(f"missing config keys: {sorted(missing)}")
    try:
        mc = ModelConfig(d=doc["d"], m=doc["m"], vocab=tuple(doc["vocab"]), K=doc.get("K"),
                         eps=doc.get("eps", 1e-6), seed=doc.get("seed", 0))
        batch = [encode(seq, mc) for seq in doc["data"]]
        tc = TrainConfig(learning_rate=doc["learning_rate"], steps=doc["steps"], batch=batch,
                         fd_step=doc.get("fd_step", 1e-5), seed=doc.get("seed", 0),
                         log_every=doc.get("log_every", 10))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    return mc, tc


def cmd_train(args) -> int:
    mc, tc = load_train_config(resolve_config(args.config))
    if args.seed is not None:
        mc = ModelConfig(**{**mc.to_json(), "vocab": mc.vocab, "seed": args.seed})
    out = _outdir(args.output_dir)
    params = init_params(mc)
    try:
        fitted, history = fit(params, tc)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    (out / "checkpoint.json").write_text(fitted.dumps(), encoding="utf-8")
    lines = ["step,loss"] + [f"{s},{fmt(l)}" for s, l in history]
    (out / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    baseline = math.log(len(mc.vocab))
    final = history[-1][1] if history else float(np.mean([nll(s, fitted) for s in tc.batch]))
    print(f"final_nll_nats={fmt(final)}")
    print(f"uniform_baseline_nats={fmt(baseline)}")
    print(f"ratio={fmt(final / baseline)}")
    return 0


# --- run / analyze --------------------------------------------------------

def read_tokens(path: str) -> list[str]:
    tokens = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        tok = line.strip()
        if tok and not tok.startswith("#"):
            tokens.append(tok)
    return tokens


def load_checkpoint(path: str) -> ModelParams:
    try:
        return ModelParams.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot load checkpoint {path}: {exc}") from None


def _write_metrics(out: Path, trajectory, bip) -> None:
    records = analysis.trajectory_metrics(trajectory, bip)
    (out / "metrics.csv").write_text(analysis.metrics_csv(records), encoding="utf-8")
    (out / "metrics.jsonl").write_text(analysis.metrics_jsonl(records), encoding="utf-8")


def cmd_run(args) -> int:
    params = load_checkpoint(args.checkpoint)
    bip = _bipartite(args.bipartite)
    if bip and bip[0] * bip[1] != params.config.d:
        raise UsageError(f"--bipartite {bip[0]}x{bip[1]} does not match d={params.config.d}")
    tokens = read_tokens(args.tokens)
    if not tokens:
        raise UsageError("tokens file holds no tokens")
    try:
        idx = encode(tokens, params.config)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1
    out = _outdir(args.output_dir)
    trajectory, probs = forward(idx, params)
    header = "t,token," + ",".join(params.config.vocab)
    rows = [f"{t},{tokens[t]}," + ",".join(fmt(x) for x in p) for t, p in enumerate(probs)]
    (out / "probs.csv").write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    with open(out / "trajectory.jsonl", "w", encoding="utf-8") as fh:
        for rho in trajectory:
            fh.write(json.dumps(rho.to_json()) + "\n")
    _write_metrics(out, trajectory, bip)
    print(f"nll_nats={fmt(nll(idx, params))}")
    return 0


def cmd_analyze(args) -> int:
    bip = _bipartite(args.bipartite)
    try:
        lines = Path(args.trajectory).read_text(encoding="utf-8").splitlines()
        trajectory = [DensityMatrix.from_json(json.loads(l), tol=1e-6) for l in lines if l.strip()]
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read trajectory: {exc}") from None
    if not trajectory:
        raise UsageError("trajectory file is empty")
    out = _outdir(args.output_dir)
    _write_metrics(out, trajectory, bip)
    sys.stdout.write((out / "metrics.csv").read_text(encoding="utf-8"))
    return 0


# --- bench ----------------------------------------------------------------

def kraus_via_choi_eig(l: np.ndarray, eps: float) -> np.ndarray:
    """Reference route: eigendecompose ``C = L L^dagger`` and read Kraus operators off its spectrum."""
    eig = herm_eig(l @ l.conj().T)
    keep = eig.eigenvalues > 1e-12 * max(1.0, eig.eigenvalues[0])
    raw = np.stack([np.sqrt(lam) * unvec(u) for lam, u in zip(eig.eigenvalues[keep], eig.unitary[:, keep].T)])
    s = np.einsum("kji,kjl->il", raw.conj(), raw)
    return raw @ inv_sqrt_psd(s, eps)


def _median_us(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) * 1e6


def cmd_bench(args) -> int:
    try:
        ds = [int(x) for x in args.d.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--d expects a comma-separated list, got {args.d!r}") from None
    if not ds or any(not 1 <= d <= 16 for d in ds):
        raise UsageError("each --d value must lie in [1, 16]")
    lines = ["d,factor_us,choi_eig_us"]
    for d in ds:
        l = random_factor(d, np.random.default_rng([args.seed, d]))
        f_us = _median_us(lambda: kraus_from_factor(l, 1e-6), args.repeats)
        c_us = _median_us(lambda: kraus_via_choi_eig(l, 1e-6), args.repeats)
        lines.append(f"{d},{f_us:.1f},{c_us:.1f}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.output_dir:
        (_outdir(args.output_dir) / "bench.csv").write_text(text, encoding="utf-8")
    return 0


# --- parser ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dmrnn", description="Density-matrix RNN toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="randomized CPTP/POVM/entropy/QMI property suites")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--d", type=int, default=3)
    v.add_argument("--tol", type=float, default=None,
                   help="override every suite tolerance (defaults: cptp 1e-5, povm 1e-10, entropy/qmi 1e-8)")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="write the worked two-level examples as CSV")
    d.add_argument("name", choices=sorted(demos.DEMOS))
    d.add_argument("--output-dir", default="out")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_demo)

    t = sub.add_parser("train", help="fit a model from a JSON config")
    t.add_argument("--config", required=True, help="config path, or the name of a bundled config")
    t.add_argument("--output-dir", default="out")
    t.add_argument("--seed", type=int, default=None, help="override the config seed")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="forward pass of a checkpoint over a token file")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--tokens", required=True)
    r.add_argument("--bipartite", default=None, help="voice split AxB with A*B = d")
    r.add_argument("--output-dir", default="out")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="metrics for a trajectory JSONL file")
    a.add_argument("--trajectory", required=True)
    a.add_argument("--bipartite", default=None)
    a.add_argument("--output-dir", default="out")
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("bench", help="time factor normalization against Choi eigendecomposition")
    b.add_argument("--d", default="2,4,8")
    b.add_argument("--repeats", type=int, default=20)
    b.add_argument("--output-dir", default=None)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dmrnn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"dmrnn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
