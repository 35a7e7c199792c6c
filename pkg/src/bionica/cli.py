"""Experiment command line: generate data, run separators, evaluate output.

Commands:
    bionica generate  write S.csv, A.csv, X.csv for a synthetic instance
    bionica run       stream an algorithm over X.csv, write Y.csv + metrics
    bionica images    mix grayscale images, separate, write recovered PGMs
    bionica eval      score an existing (S.csv, Y.csv) pair

Configuration is a flat key=value file (one pair per line, '#' comments)
plus any number of --key value overrides on the command line; overrides
win. The seed falls back to the BIONICA_SEED environment variable when
neither source sets it. Exit codes: 0 success, 2 configuration error,
3 I/O error, 4 numerical abort.
"""

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from .baselines import run_nnpca
from .core import (
    Hyperparams,
    NumericalAbortError,
    collect_outputs,
    init_state,
    offline_fit,
    run_online,
    save_checkpoint,
)
from .datasets import (
    SourceConfig,
    ensure_dir,
    image_to_source,
    load_pgm,
    mix,
    random_mixing_matrix,
    read_matrix_csv,
    rescale_to_gray,
    sample_sparse_uniform,
    shuffled_epoch_stream,
    write_matrix_csv,
    write_pgm,
)
from .metrics import (
    best_permutation,
    correlation_match,
    error_trajectory,
    final_error,
    read_trajectory_csv,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


@dataclass
class ExperimentConfig:
    """Every knob of the four commands, with experiment-scale defaults."""

    algo: str = "bio-nica"
    d: int = 3
    k: int = 3
    T: int = 100000
    epochs: int = 1
    runs: int = 1
    seed: int = None
    stride: int = 100
    outdir: str = "out"
    indir: str = ""
    images: str = ""
    zero_prob: float = 0.5
    gamma: float = 0.1
    eta0: float = 0.01
    eta_decay: float = 3000.0
    tau: float = 0.1
    dyn_tol: float = 1e-6
    dyn_max_iter: int = 500
    warm_start: int = 0
    adaptive_gamma: int = 0
    outer_iters: int = 500
    y_inner_tol: float = 1e-6
    offline_eta0: float = 0.05
    offline_tau: float = 0.1
    offline_gamma: float = 0.3
    nnpca_eta0: float = 0.02
    nnpca_eta_decay: float = 10000.0

    def validate(self):
        if self.algo not in ("bio-nica", "nnpca", "offline"):
            raise ValueError("algo must be bio-nica, nnpca, or offline; got %r"
                             % (self.algo,))
        if self.d < 1 or self.k < self.d:
            raise ValueError("need k >= d >= 1, got d=%r k=%r" % (self.d, self.k))
        if self.T < 1 or self.epochs < 1 or self.runs < 1 or self.stride < 1:
            raise ValueError("T, epochs, runs, stride must all be >= 1")
        self.hyperparams().validate()

    def hyperparams(self) -> Hyperparams:
        if self.algo == "offline":
            return Hyperparams(
                gamma=self.offline_gamma, eta0=self.offline_eta0,
                eta_decay=0.0, tau=self.offline_tau,
                dyn_tol=self.dyn_tol, dyn_max_iter=self.dyn_max_iter)
        return Hyperparams(
            gamma=self.gamma, eta0=self.eta0, eta_decay=self.eta_decay,
            tau=self.tau, dyn_tol=self.dyn_tol,
            dyn_max_iter=self.dyn_max_iter,
            warm_start=bool(self.warm_start),
            adaptive_gamma=bool(self.adaptive_gamma))


def _coerce(name, raw, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ValueError("config key %s expects %s, got %r"
                         % (name, kind.__name__, raw))


def build_config(path, overrides) -> ExperimentConfig:
    """Merge defaults, a key=value file, overrides, and the env seed."""
    pairs = {}
    if path:
        if not os.path.exists(path):
            raise OSError("config file not found: %s" % path)
        with open(path) as fh:
            for ln_no, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError("%s:%d: expected key=value" % (path, ln_no))
                key, val = line.split("=", 1)
                pairs[key.strip()] = val.strip()
    pairs.update(overrides)

    cfg = ExperimentConfig()
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {"algo": str, "outdir": str, "indir": str, "images": str}
    for f in fields(ExperimentConfig):
        if f.name not in types:
            types[f.name] = type(getattr(cfg, f.name)) if f.name != "seed" else int
    for key, raw in pairs.items():
        if key not in known:
            raise ValueError("unknown config key: %s" % key)
        setattr(cfg, key, _coerce(key, raw, types[key]))
    if cfg.seed is None:
        env = os.environ.get("BIONICA_SEED")
        cfg.seed = int(env) if env else 0
    cfg.validate()
    return cfg


def _spawn_seeds(seed, n):
    """Independent child seeds for the run's sub-operations, in fixed order."""
    return np.random.SeedSequence(seed).spawn(n)


def _write_meta(path, entries):
    with open(path, "w") as fh:
        for key, val in entries:
            fh.write("%s,%s\n" % (key, val))


# ---------------------------------------------------------------------------
# commands

def cmd_generate(cfg: ExperimentConfig) -> int:
    out = ensure_dir(cfg.outdir)
    s_seed, a_seed = _spawn_seeds(cfg.seed, 2)
    S = sample_sparse_uniform(SourceConfig(
        d=cfg.d, T=cfg.T, zero_prob=cfg.zero_prob, seed=s_seed))
    A = random_mixing_matrix(cfg.k, cfg.d, a_seed)
    X = mix(A, S)
    write_matrix_csv(S, os.path.join(out, "S.csv"))
    write_matrix_csv(A, os.path.join(out, "A.csv"))
    write_matrix_csv(X, os.path.join(out, "X.csv"))
    print("generate: S %dx%d, A %dx%d, X %dx%d, seed %d -> %s"
          % (S.shape + A.shape + X.shape + (cfg.seed, out)))
    return EXIT_OK


def _load_inputs(cfg, need_sources):
    indir = cfg.indir or cfg.outdir
    xpath = os.path.join(indir, "X.csv")
    if not os.path.exists(xpath):
        raise OSError("missing input %s (run `bionica generate` first?)" % xpath)
    X = read_matrix_csv(xpath)
    S = None
    spath = os.path.join(indir, "S.csv")
    if os.path.exists(spath):
        S = read_matrix_csv(spath)
    elif need_sources:
        raise OSError("missing input %s (needed for error trajectories)" % spath)
    return X, S


def _single_run(cfg, X, S, run_seed, out):
    """One streaming/offline fit; returns the final Error(T) or None."""
    ensure_dir(out)
    p = cfg.hyperparams()
    init_seed, shuffle_seed = _spawn_seeds(run_seed, 2)
    T = X.shape[1]
    if cfg.epochs > 1:
        order = shuffled_epoch_stream(T, cfg.epochs, shuffle_seed)
        X_stream = X[:, order]
        S_stream = S[:, order] if S is not None else None
    else:
        X_stream = X
        S_stream = S

    t0 = time.perf_counter()
    extra = []
    if cfg.algo == "bio-nica":
        state = init_state(cfg.d, X.shape[0], init_seed)
        Y, summary = collect_outputs(state, X_stream, p)
        save_checkpoint(state, os.path.join(out, "checkpoint"), p)
        extra.append(("nonconverged_steps", summary.nonconverged))
    elif cfg.algo == "nnpca":
        Y, wt, _ = run_nnpca(X_stream, cfg.d, cfg.nnpca_eta0,
                             cfg.nnpca_eta_decay, init_seed)
        extra.append(("whitening_fit", "offline"))
        extra.append(("whitening_eigenvalues",
                      ";".join("%.17g" % v for v in wt.eigen.eigenvalues)))
    else:
        result = offline_fit(X_stream, cfg.d, p, cfg.outer_iters,
                             cfg.y_inner_tol, init_seed)
        Y = result.Y
        with open(os.path.join(out, "objective_trace.csv"), "w") as fh:
            fh.write("iter,objective\n")
            for i, v in enumerate(result.objective_trace):
                fh.write("%d,%.17g\n" % (i, v))
        extra.append(("inner_nonconverged", result.inner_nonconverged))
    wall = time.perf_counter() - t0

    write_matrix_csv(Y, os.path.join(out, "Y.csv"))
    err = None
    if S_stream is not None:
        traj = error_trajectory(S_stream, Y, stride=cfg.stride)
        write_trajectory_csv(traj, os.path.join(out, "error_trajectory.csv"))
        err = float(traj.errors[-1])
        extra.append(("final_error", "%.17g" % err))
        extra.append(("permutation", ";".join(str(v) for v in traj.permutation)))
    meta = [("algo", cfg.algo), ("d", cfg.d), ("k", X.shape[0]),
            ("T", T), ("epochs", cfg.epochs), ("seed", run_seed),
            ("gamma", "%.17g" % p.gamma), ("eta0", "%.17g" % p.eta0),
            ("eta_decay", "%.17g" % p.eta_decay), ("tau", "%.17g" % p.tau),
            ("dyn_tol", "%.17g" % p.dyn_tol),
            ("dyn_max_iter", p.dyn_max_iter),
            ("warm_start", int(p.warm_start)),
            ("adaptive_gamma", int(p.adaptive_gamma)),
            ("init", "gaussian-rows-1-over-sqrt-k"),
            ("wall_time_s", "%.3f" % wall)] + extra
    _write_meta(os.path.join(out, "run_meta.csv"), meta)
    return err


def cmd_run(cfg: ExperimentConfig) -> int:
    X, S = _load_inputs(cfg, need_sources=True)
    if X.shape[0] < cfg.d:
        raise ValueError("X has %d rows, need at least d=%d" % (X.shape[0], cfg.d))
    out = ensure_dir(cfg.outdir)
    if cfg.runs == 1:
        err = _single_run(cfg, X, S, cfg.seed, out)
        print("run: algo=%s seed=%d final_error=%s" % (cfg.algo, cfg.seed,
              "n/a" if err is None else "%.6g" % err))
        return EXIT_OK
    trajs = []
    finals = []
    for i in range(cfg.runs):
        rseed = cfg.seed + i
        rdir = os.path.join(out, "run_%d" % rseed)
        err = _single_run(cfg, X, S, rseed, rdir)
        finals.append(err)
        tpath = os.path.join(rdir, "error_trajectory.csv")
        if os.path.exists(tpath):
            trajs.append(read_trajectory_csv(tpath))
        print("run %d/%d: seed=%d final_error=%s" % (i + 1, cfg.runs, rseed,
              "n/a" if err is None else "%.6g" % err))
    if trajs:
        times = trajs[0][0]
        errs = np.vstack([tr[1] for tr in trajs])
        with open(os.path.join(out, "summary.csv"), "w") as fh:
            fh.write("t,mean,std\n")
            std = errs.std(axis=0, ddof=1) if errs.shape[0] > 1 else np.zeros(errs.shape[1])
            for j, t in enumerate(times):
                fh.write("%d,%.17g,%.17g\n" % (t, errs[:, j].mean(), std[j]))
        med = float(np.median([e for e in finals if e is not None]))
        print("summary: %d runs, median final_error=%.6g -> %s"
              % (cfg.runs, med, os.path.join(out, "summary.csv")))
    return EXIT_OK


def cmd_images(cfg: ExperimentConfig) -> int:
    paths = [p for p in cfg.images.split(",") if p.strip()]
    if len(paths) != 3:
        raise ValueError("images command needs exactly 3 comma-separated "
                         "PGM paths via --images, got %d" % len(paths))
    imgs = [load_pgm(p.strip()) for p in paths]
    shape = imgs[0].shape
    for p, im in zip(paths, imgs):
        if im.shape != shape:
            raise ValueError("image sizes differ: %s is %r, expected %r"
                             % (p, im.shape, shape))
    S = np.vstack([image_to_source(im) for im in imgs])
    d, N = S.shape
    k = 6
    out = ensure_dir(cfg.outdir)
    mix_seed, shuffle_seed, init_seed = _spawn_seeds(cfg.seed, 3)
    A = random_mixing_matrix(k, d, mix_seed)
    X = mix(A, S)
    order = shuffled_epoch_stream(N, cfg.epochs, shuffle_seed)
    p = cfg.hyperparams()
    state = init_state(d, k, init_seed)
    t0 = time.perf_counter()
    Y, summary = collect_outputs(state, X[:, order], p)
    wall = time.perf_counter() - t0
    write_matrix_csv(Y, os.path.join(out, "Y.csv"))
    save_checkpoint(state, os.path.join(out, "checkpoint"), p)

    last = order[-N:]
    S_last = S[:, last]
    Y_last = Y[:, -N:]
    perm = best_permutation(S_last, Y_last)
    corrs = correlation_match(S_last, Y_last, perm)
    for i in range(d):
        flat = np.empty(N)
        flat[last] = Y_last[perm[i]]
        write_pgm(rescale_to_gray(flat.reshape(shape)),
                  os.path.join(out, "recovered_%d.pgm" % i))
    with open(os.path.join(out, "correlations.csv"), "w") as fh:
        fh.write("image,correlation\n")
        for i in range(d):
            fh.write("%s,%.17g\n" % (os.path.basename(paths[i].strip()), corrs[i]))
    meta = [("algo", "bio-nica"), ("d", d), ("k", k), ("T", N),
            ("epochs", cfg.epochs), ("seed", cfg.seed),
            ("images", ";".join(p.strip() for p in paths)),
            ("gamma", "%.17g" % p.gamma), ("eta0", "%.17g" % p.eta0),
            ("eta_decay", "%.17g" % p.eta_decay), ("tau", "%.17g" % p.tau),
            ("nonconverged_steps", summary.nonconverged),
            ("permutation", ";".join(str(v) for v in perm)),
            ("wall_time_s", "%.3f" % wall)]
    _write_meta(os.path.join(out, "run_meta.csv"), meta)
    print("images: correlations " +
          " ".join("%.4f" % c for c in corrs) + " -> %s" % out)
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig) -> int:
    # ground truth lives with the data, outputs with the run; a file is
    # searched in its natural directory first, then the other one, so a
    # single shared directory works with either flag
    srcdir = cfg.indir or cfg.outdir
    rundir = cfg.outdir or cfg.indir
    spath = os.path.join(srcdir, "S.csv")
    if not os.path.exists(spath) and os.path.exists(
            os.path.join(rundir, "S.csv")):
        spath = os.path.join(rundir, "S.csv")
    ypath = os.path.join(rundir, "Y.csv")
    if not os.path.exists(ypath) and os.path.exists(
            os.path.join(srcdir, "Y.csv")):
        ypath = os.path.join(srcdir, "Y.csv")
        rundir = srcdir
    for q in (spath, ypath):
        if not os.path.exists(q):
            raise OSError("missing input %s" % q)
    S = read_matrix_csv(spath)
    Y = read_matrix_csv(ypath)
    if S.shape != Y.shape:
        raise ValueError("S and Y shapes differ: %r vs %r" % (S.shape, Y.shape))
    perm = best_permutation(S, Y)
    err = final_error(S, Y, perm)
    corrs = correlation_match(S, Y, perm)
    tpath = os.path.join(rundir, "error_trajectory.csv")
    if not os.path.exists(tpath):
        traj = error_trajectory(S, Y, perm, stride=cfg.stride)
        write_trajectory_csv(traj, tpath)
    print("eval: final_error=%.6g permutation=%s correlations=%s"
          % (err, [int(q) for q in perm], ["%.4f" % c for c in corrs]))
    return EXIT_OK


# ---------------------------------------------------------------------------

def parse_overrides(extra):
    """Turn ['--key', 'value', ...] into a dict; reject malformed input."""
    overrides = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ValueError("expected --key value pairs, got %r" % tok)
        if i + 1 >= len(extra):
            raise ValueError("missing value for %s" % tok)
        overrides[tok[2:]] = extra[i + 1]
        i += 2
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bionica",
        description="Nonnegative ICA experiments: generate, run, images, eval.")
    parser.add_argument("command", choices=["generate", "run", "images", "eval"])
    parser.add_argument("--config", default=None, help="flat key=value file")
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = parse_overrides(extra)
        cfg = build_config(args.config, overrides)
    except ValueError as e:
        print("config error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print("i/o error: %s" % e, file=sys.stderr)
        return EXIT_IO
    dispatch = {"generate": cmd_generate, "run": cmd_run,
                "images": cmd_images, "eval": cmd_eval}
    try:
        return dispatch[args.command](cfg)
    except NumericalAbortError as e:
        print("numerical abort: %s" % e, file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print("config error: %s" % e, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print("i/o error: %s" % e, file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
