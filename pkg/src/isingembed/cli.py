"""Command-line experiment driver.

Subcommands: ``gen``, ``theory``, ``exact-pl``, ``ratio``, ``project``,
``mc``, ``counterexample``.  Global flags ``--seed``, ``--out-dir``,
``--threads`` and ``--config`` apply to every subcommand; a config file
holds ``key value`` (or ``key=value``) lines with ``#`` comments, the same
tokenized text style as instance files, and supplies defaults that explicit
flags override.  Exit status is nonzero if any internal audit fails (or, for
``counterexample``, if the certificate does not hold).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments
from .experiments import AuditError


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        else:
            key, _, val = line.partition(" ")
        key, val = key.strip(), val.strip()
        if not key or not val:
            raise ValueError(f"malformed config line: {raw!r}")
        values[key] = val
    return values


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v != "")


class _Resolver:
    """CLI value if given, else config-file value, else default."""

    def __init__(self, args, config):
        self.args = vars(args)
        self.config = config

    def get(self, key, cast, default):
        cli = self.args.get(key)
        if cli is not None:
            return cast(cli) if isinstance(cli, str) else cli
        if key in self.config:
            return cast(self.config[key])
        return default


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="numba thread count")
    p.add_argument("--config", default=None, help="key=value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isingembed",
        description="Boltzmann sampling experiments for chain-embedded Ising models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random grid instance file")
    _add_common(p)
    p.add_argument("--n", type=int, default=None, help="number of spins")
    p.add_argument("--out", default=None, help="instance file path")

    p = sub.add_parser("theory", help="closed-form theory curves")
    _add_common(p)
    p.add_argument("--betas", default=None, help="comma-separated beta list")
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--j-f", dest="j_f", type=float, default=None)

    p = sub.add_parser("exact-pl", help="exact logical-subspace probability vs N")
    _add_common(p)
    p.add_argument("--betas", default=None)
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--j-f", dest="j_f", type=float, default=None)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--emb-mode", dest="emb_mode", default=None)

    p = sub.add_parser("ratio", help="exact P_n/P_{n-1} against the annealed line")
    _add_common(p)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--j-f", dest="j_f", type=float, default=None)

    p = sub.add_parser("project", help="exact MV/RRS projection comparison")
    _add_common(p)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--j-f", dest="j_f", type=float, default=None)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--emb-mode", dest="emb_mode", default=None)

    p = sub.add_parser("mc", help="Monte Carlo energy-level projection pipeline")
    _add_common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--j-f", dest="j_f", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--nt-native", dest="nt_native", type=int, default=None)
    p.add_argument("--nt-embedded", dest="nt_embedded", type=int, default=None)

    p = sub.add_parser("counterexample", help="ring impossibility certificate")
    _add_common(p)
    p.add_argument("--n-ring", dest="n_ring", type=int, default=None)
    p.add_argument("--j-f-mag", dest="j_f_mag", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = parse_config_file(args.config) if args.config else {}
    r = _Resolver(args, config)

    threads = r.get("threads", int, None)
    if threads is not None:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))

    seed = r.get("seed", int, 0)
    out_dir = Path(r.get("out_dir", str, "results"))

    try:
        return _dispatch(args.command, r, seed, out_dir)
    except AuditError as exc:
        print(f"AUDIT FAILURE: {exc}", file=sys.stderr)
        return 1


def _dispatch(command: str, r: _Resolver, seed: int, out_dir: Path) -> int:
    if command == "gen":
        n = r.get("n", int, 8)
        out = r.get("out", str, None) or out_dir / f"instance_n{n}_seed{seed}.txt"
        path = experiments.write_generated_instance(out, n, seed)
        print(f"wrote {path}")
        return 0

    if command == "theory":
        paths = experiments.theory_curves(
            out_dir,
            betas=r.get("betas", _floats, (0.4, 0.6)),
            n_min=r.get("n_min", int, 2),
            n_max=r.get("n_max", int, 10),
            k=r.get("k", int, 3),
            j_f=r.get("j_f", float, -2.0),
        )
        for name, path in paths.items():
            print(f"{name}: {path}")
        return 0

    if command == "exact-pl":
        res = experiments.exact_pl(
            out_dir,
            master_seed=seed,
            betas=r.get("betas", _floats, (0.4, 0.6)),
            n_min=r.get("n_min", int, 2),
            n_max=r.get("n_max", int, 8),
            k=r.get("k", int, 3),
            j_f=r.get("j_f", float, -2.0),
            instances=r.get("instances", int, 100),
            emb_mode=r.get("emb_mode", str, "deterministic"),
        )
        for beta, s in res["slopes"].items():
            print(
                f"beta={beta}: slope_exact={s['exact']:.6f}"
                f" slope_theory={s['theory']:.6f}"
            )
        return 0

    if command == "ratio":
        res = experiments.ratio_profile(
            out_dir,
            master_seed=seed,
            instances=r.get("instances", int, 100),
            j_f=r.get("j_f", float, -2.0),
        )
        for key, fit in res["fits"].items():
            print(f"{key}: slope={fit['slope']:.5f} pw={fit['pw']:.5f}")
        return 0

    if command == "project":
        res = experiments.projection_exact(
            out_dir,
            master_seed=seed,
            beta=r.get("beta", float, 0.6),
            n_min=r.get("n_min", int, 4),
            n_max=r.get("n_max", int, 8),
            k=r.get("k", int, 3),
            j_f=r.get("j_f", float, -2.0),
            instances=r.get("instances", int, 500),
            emb_mode=r.get("emb_mode", str, "random"),
        )
        for n, acc in res["per_n"].items():
            import numpy as np

            print(
                f"n={n}: KL(mv)={np.mean(acc['kl_mv']):.4g}"
                f" KL(rrs)={np.mean(acc['kl_rrs']):.4g}"
                f" beta_fit(rrs)={np.mean(acc['beta_fit_rrs']):.4f}"
            )
        return 0

    if command == "mc":
        res = experiments.mc_projection(
            out_dir,
            master_seed=seed,
            n=r.get("n", int, 20),
            k=r.get("k", int, 3),
            j_f=r.get("j_f", float, -2.0),
            beta=r.get("beta", float, 0.6),
            realizations=r.get("realizations", int, 200),
            samples_per_realization=r.get("samples", int, 5000),
            nt_native=r.get("nt_native", int, None),
            nt_embedded=r.get("nt_embedded", int, None),
        )
        for method, bf in res["fits"].items():
            print(f"beta_fit({method}) = {bf:.5f}")
        return 0

    if command == "counterexample":
        res = experiments.counterexample(
            out_dir,
            n_ring=r.get("n_ring", int, 5),
            j_f_mag=r.get("j_f_mag", float, 2.0),
            beta=r.get("beta", float, 0.6),
        )
        print(f"r(C1) = {res['r_c1']:.6f}")
        print(f"r(C2) = {res['r_c2']:.6f}")
        print(f"exact Z/Z_L - 1 = {res['exact']:.6f}")
        print(f"energy table matches direct evaluation: {res['energies_match']}")
        print("certificate:", "PASS" if res["pass"] else "FAIL")
        return 0 if res["pass"] else 1

    raise ValueError(f"unknown command {command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
