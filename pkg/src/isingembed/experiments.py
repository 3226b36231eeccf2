"""Reproducible experiment drivers with CSV emission.

Every experiment is a pure function of its parameters and a master seed:
instance ``t`` of a run draws from the stream ``master_seed + t`` and each
CSV row carries that per-instance seed, so any single point can be replayed
with ``generate_instance``.  Auxiliary streams (random embeddings, sampler
and projection seeds) are derived from the instance seed with fixed salts.
Floats are written with 17 significant digits; re-runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import _kernels
from .embedding import build_embedding
from .exact import (
    all_energies,
    broken_chain_profile,
    exact_ring_partition_ratio,
    fit_inverse_temperature,
    kl_divergence,
    level_probabilities,
    optimal_beta,
)
from .model import IsingModel, energy, energy_histogram, write_instance
from .projection import exact_projected_distributions, project_batch_mv, project_batch_rrs
from .rng import MASK64, SplitMix64
from .sampler import SamplerConfig, metropolis_sample
from .theory import (
    RING_COLUMNS,
    TheoryParams,
    jf_schedule,
    p0,
    penalty_weight,
    pn_ratio,
    ring_config,
    ring_energy_table,
    ring_model,
    ring_r_values,
)

COUPLING_GRID = np.array(
    [-1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
)

# stream salts: keep instance, embedding, sampler and projection draws apart
EMB_SALT = 0xE7037ED1A0B428DB
MC_NATIVE_SALT = 0xA0761D6478BD642F
MC_EMBEDDED_SALT = 0x8EBC6AF09C88C6E3
MV_SALT = 0x589965CC75374CC3
RRS_SALT = 0x1D8E4E27C47D124F

DEFAULT_RATIO_SETS = ((8, 3, 0.6), (6, 4, 0.6), (8, 3, 0.4))


class AuditError(RuntimeError):
    """An internal invariant audit failed inside an experiment."""


def generate_instance(
    n: int,
    seed: int,
    topology: str = "fully_connected",
    grid: np.ndarray = COUPLING_GRID,
) -> IsingModel:
    """Random instance with couplings and fields drawn uniformly from the
    11-value grid, couplings in sorted-edge order first, then fields."""
    if topology != "fully_connected":
        raise ValueError(f"unsupported topology {topology!r}")
    rng = SplitMix64(seed)
    m = len(grid)
    couplings = []
    for i in range(n):
        for j in range(i + 1, n):
            couplings.append((i, j, float(grid[rng.randrange(m)])))
    fields = [float(grid[rng.randrange(m)]) for _ in range(n)]
    return IsingModel(n, couplings, fields)


def _instance_seed(master_seed: int, counter: int) -> int:
    return (int(master_seed) + counter) & MASK64


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


# --- theory-curves -----------------------------------------------------------


def theory_curves(
    out_dir,
    betas=(0.4, 0.6),
    n_min: int = 2,
    n_max: int = 10,
    k: int = 3,
    j_f: float = -2.0,
    ratio_sets=DEFAULT_RATIO_SETS,
    jf_ks=(3, 4, 5),
    jf_betas=(0.4, 0.6),
    jf_n_max: int = 10**6,
) -> dict:
    """Closed-form curves: logical-subspace decay, break-count ratios, and
    the chain-strength schedule."""
    out_dir = Path(out_dir)

    p0_rows = []
    for beta in betas:
        for n in range(n_min, n_max + 1):
            p0_rows.append(
                (beta, n, k, j_f, p0(TheoryParams(n, k, float(beta), j_f)))
            )
    p0_path = write_csv(
        out_dir / "theory_p0.csv", ["beta", "n", "k", "j_f", "p0"], p0_rows
    )

    ratio_rows = []
    for n, kk, beta in ratio_sets:
        params = TheoryParams(n, kk, float(beta), j_f)
        for q in range(1, n + 1):
            ratio_rows.append(
                (n, kk, beta, j_f, q, q / (n + 1), pn_ratio(params, q))
            )
    ratio_path = write_csv(
        out_dir / "theory_ratio.csv",
        ["n", "k", "beta", "j_f", "n_broken", "x", "ratio"],
        ratio_rows,
    )

    ns = np.unique(np.geomspace(10, jf_n_max, 61).astype(np.int64))
    jf_rows = []
    for kk in jf_ks:
        for beta in jf_betas:
            for n in ns:
                jf_rows.append((kk, beta, int(n), jf_schedule(int(n), kk, beta)))
    jf_path = write_csv(
        out_dir / "theory_jf_schedule.csv", ["k", "beta", "n", "jf_mag"], jf_rows
    )
    return {"p0": p0_path, "ratio": ratio_path, "jf_schedule": jf_path}


# --- exact logical-subspace probability ---------------------------------------


def exact_pl(
    out_dir,
    master_seed: int,
    betas=(0.4, 0.6),
    n_min: int = 2,
    n_max: int = 8,
    k: int = 3,
    j_f: float = -2.0,
    instances: int = 100,
    emb_mode: str = "deterministic",
    cap: int | None = None,
) -> dict:
    """Per-instance exact P_0 against the closed-form prediction."""
    out_dir = Path(out_dir)
    rows = []
    per_point: dict[tuple[float, int], list[float]] = {
        (float(b), n): [] for b in betas for n in range(n_min, n_max + 1)
    }
    counter = 0
    for n in range(n_min, n_max + 1):
        for inst in range(instances):
            seed = _instance_seed(master_seed, counter)
            counter += 1
            model = generate_instance(n, seed)
            emb_seed = seed ^ EMB_SALT
            emb, embedded = build_embedding(
                model, k, j_f, emb_mode,
                emb_seed if emb_mode == "random" else None,
            )
            for beta in betas:
                prof = broken_chain_profile(embedded, emb, float(beta), cap)
                theory = p0(TheoryParams(n, k, float(beta), j_f))
                rows.append(
                    (float(beta), n, k, j_f, inst, seed, prof.p_logical, theory)
                )
                per_point[(float(beta), n)].append(prof.p_logical)
    rows.sort(key=lambda r: (r[1], r[4], r[0]))
    points_path = write_csv(
        out_dir / "exact_pl_instances.csv",
        ["beta", "n", "k", "j_f", "instance", "instance_seed", "p0_exact", "p0_theory"],
        rows,
    )

    summary_rows = []
    slopes = {}
    for beta in betas:
        beta = float(beta)
        ns = np.arange(n_min, n_max + 1)
        means = np.array([np.mean(per_point[(beta, n)]) for n in ns])
        stds = np.array([np.std(per_point[(beta, n)]) for n in ns])
        for n, mean, std in zip(ns, means, stds):
            summary_rows.append(
                (beta, int(n), mean, std, p0(TheoryParams(int(n), k, beta, j_f)))
            )
        slope_exact = float(np.polyfit(ns, np.log(means), 1)[0])
        slope_theory = -(k - 1) * math.log1p(math.exp(2.0 * beta * j_f))
        slopes[beta] = {"exact": slope_exact, "theory": slope_theory}
    summary_path = write_csv(
        out_dir / "exact_pl_summary.csv",
        ["beta", "n", "p0_mean", "p0_std", "p0_theory"],
        summary_rows,
    )
    slope_path = write_csv(
        out_dir / "exact_pl_slopes.csv",
        ["beta", "slope_exact", "slope_theory"],
        [(b, s["exact"], s["theory"]) for b, s in slopes.items()],
    )
    return {
        "instances": points_path,
        "summary": summary_path,
        "slopes_csv": slope_path,
        "per_point": per_point,
        "slopes": slopes,
    }


# --- broken-chain ratio profile ------------------------------------------------


def ratio_profile(
    out_dir,
    master_seed: int,
    param_sets=DEFAULT_RATIO_SETS,
    j_f: float = -2.0,
    instances: int = 100,
    cap: int | None = None,
) -> dict:
    """Exact P_n / P_{n-1} against the annealed line, instance-averaged."""
    out_dir = Path(out_dir)
    detail_rows = []
    point_rows = []
    fits = {}
    counter = 0
    for n, k, beta in param_sets:
        beta = float(beta)
        ratios = np.empty((instances, n))
        for inst in range(instances):
            seed = _instance_seed(master_seed, counter)
            counter += 1
            model = generate_instance(n, seed)
            emb, embedded = build_embedding(model, k, j_f, "deterministic")
            prof = broken_chain_profile(embedded, emb, beta, cap)
            r = prof.p_n[1:] / prof.p_n[:-1]
            ratios[inst] = r
            for q in range(1, n + 1):
                detail_rows.append((n, k, beta, j_f, inst, seed, q, r[q - 1]))
        params = TheoryParams(n, k, beta, j_f)
        mean_r = ratios.mean(axis=0)
        std_r = ratios.std(axis=0)
        x = np.array([(n + 1) / q - 1.0 for q in range(1, n + 1)])
        for q in range(1, n + 1):
            point_rows.append(
                (
                    n, k, beta, j_f, q, q / (n + 1), x[q - 1],
                    mean_r[q - 1], std_r[q - 1], pn_ratio(params, q),
                )
            )
        slope = float(np.dot(x, mean_r) / np.dot(x, x))  # least squares, origin
        fits[(n, k, beta)] = {
            "slope": slope,
            "pw": penalty_weight(k, beta, j_f),
        }
    detail_path = write_csv(
        out_dir / "ratio_instances.csv",
        ["n", "k", "beta", "j_f", "instance", "instance_seed", "n_broken", "ratio"],
        detail_rows,
    )
    points_path = write_csv(
        out_dir / "ratio_points.csv",
        ["n", "k", "beta", "j_f", "n_broken", "x", "x_inv", "ratio_mean", "ratio_std", "ratio_theory"],
        point_rows,
    )
    fit_path = write_csv(
        out_dir / "ratio_fits.csv",
        ["n", "k", "beta", "slope", "pw"],
        [(n, k, b, f["slope"], f["pw"]) for (n, k, b), f in fits.items()],
    )
    return {"instances": detail_path, "points": points_path, "fits_csv": fit_path, "fits": fits}


# --- exact projection comparison -------------------------------------------------


def boltzmann_dist_from_energies(e_nat: np.ndarray, beta: float):
    from .exact import DistributionTable, _logsumexp

    logw = -beta * e_nat
    logw -= _logsumexp(logw)
    return DistributionTable(np.arange(e_nat.shape[0], dtype=np.int64), np.exp(logw))


def _projection_metrics(model, emb, embedded, beta, e_nat, ideal):
    dists = exact_projected_distributions(emb, model, embedded, beta)
    out = {}
    for method in ("mv", "rrs"):
        d = dists[method]
        beta_fit, _ = fit_inverse_temperature(e_nat, d.probs)
        beta_opt = optimal_beta(d, model)
        out[method] = {
            "dist": d,
            "kl_ideal": kl_divergence(d, ideal),
            "kl_opt": kl_divergence(d, boltzmann_dist_from_energies(e_nat, beta_opt)),
            "beta_opt": beta_opt,
            "beta_fit": beta_fit,
        }
    return out


def projection_exact(
    out_dir,
    master_seed: int,
    beta: float = 0.6,
    n_min: int = 4,
    n_max: int = 8,
    k: int = 3,
    j_f: float = -2.0,
    instances: int = 500,
    emb_mode: str = "random",
    scatter_n: int = 8,
    scatter_jfs=(-2.0, -3.0),
    cap: int | None = None,
) -> dict:
    """Exact post-projection statistics.

    Emits a per-configuration scatter for one representative instance (both
    projections at two chain strengths) and the KL / effective-temperature
    scaling over a random ensemble.
    """
    out_dir = Path(out_dir)
    beta = float(beta)
    counter = 0

    # part A: single-instance scatter, deterministic embedding
    scatter_seed = _instance_seed(master_seed, counter)
    counter += 1
    scatter_model = generate_instance(scatter_n, scatter_seed)
    e_nat = all_energies(scatter_model)
    ideal = boltzmann_dist_from_energies(e_nat, beta)
    scatter_rows = []
    fit_rows = [("ideal", 0.0, beta, 0.0, scatter_seed)]
    for jf in scatter_jfs:
        emb, embedded = build_embedding(scatter_model, k, float(jf), "deterministic")
        dists = exact_projected_distributions(emb, scatter_model, embedded, beta)
        for c in range(2**scatter_n):
            scatter_rows.append(
                (
                    float(jf), c, e_nat[c], ideal.probs[c],
                    dists["mv"].probs[c], dists["rrs"].probs[c],
                )
            )
        for method in ("mv", "rrs"):
            bf, intercept = fit_inverse_temperature(e_nat, dists[method].probs)
            fit_rows.append((method, float(jf), bf, intercept, scatter_seed))
    scatter_path = write_csv(
        out_dir / "projection_scatter.csv",
        ["j_f", "config", "energy", "p_ideal", "p_mv", "p_rrs"],
        scatter_rows,
    )
    scatter_fit_path = write_csv(
        out_dir / "projection_scatter_fits.csv",
        ["method", "j_f", "beta_fit", "intercept", "instance_seed"],
        fit_rows,
    )

    # part B: ensemble scaling
    ens_rows = []
    per_n: dict[int, dict[str, list]] = {}
    for n in range(n_min, n_max + 1):
        acc = {
            "kl_mv": [], "kl_rrs": [], "kl_mv_opt": [], "kl_rrs_opt": [],
            "beta_opt_mv": [], "beta_opt_rrs": [],
            "beta_fit_mv": [], "beta_fit_rrs": [],
        }
        for inst in range(instances):
            seed = _instance_seed(master_seed, counter)
            counter += 1
            model = generate_instance(n, seed)
            emb_seed = seed ^ EMB_SALT
            emb, embedded = build_embedding(
                model, k, j_f, emb_mode,
                emb_seed if emb_mode == "random" else None,
            )
            e_n = all_energies(model)
            ideal_n = boltzmann_dist_from_energies(e_n, beta)
            metrics = _projection_metrics(model, emb, embedded, beta, e_n, ideal_n)
            mv, rr = metrics["mv"], metrics["rrs"]
            ens_rows.append(
                (
                    n, inst, seed, emb_seed if emb_mode == "random" else 0,
                    mv["kl_ideal"], rr["kl_ideal"],
                    mv["kl_opt"], rr["kl_opt"],
                    mv["beta_opt"], rr["beta_opt"],
                    mv["beta_fit"], rr["beta_fit"],
                )
            )
            acc["kl_mv"].append(mv["kl_ideal"])
            acc["kl_rrs"].append(rr["kl_ideal"])
            acc["kl_mv_opt"].append(mv["kl_opt"])
            acc["kl_rrs_opt"].append(rr["kl_opt"])
            acc["beta_opt_mv"].append(mv["beta_opt"])
            acc["beta_opt_rrs"].append(rr["beta_opt"])
            acc["beta_fit_mv"].append(mv["beta_fit"])
            acc["beta_fit_rrs"].append(rr["beta_fit"])
        per_n[n] = acc
    ens_path = write_csv(
        out_dir / "projection_ensemble.csv",
        [
            "n", "instance", "instance_seed", "emb_seed",
            "kl_mv_ideal", "kl_rrs_ideal", "kl_mv_opt", "kl_rrs_opt",
            "beta_opt_mv", "beta_opt_rrs", "beta_fit_mv", "beta_fit_rrs",
        ],
        ens_rows,
    )
    summary_rows = []
    for n, acc in per_n.items():
        rrs_better = np.mean(np.array(acc["kl_rrs"]) < np.array(acc["kl_mv"]))
        summary_rows.append(
            (
                n,
                np.mean(acc["kl_mv"]), np.std(acc["kl_mv"]),
                np.mean(acc["kl_rrs"]), np.std(acc["kl_rrs"]),
                np.mean(acc["kl_mv_opt"]), np.mean(acc["kl_rrs_opt"]),
                np.mean(acc["beta_opt_mv"]), np.mean(acc["beta_opt_rrs"]),
                np.mean(acc["beta_fit_mv"]), np.mean(acc["beta_fit_rrs"]),
                rrs_better,
            )
        )
    summary_path = write_csv(
        out_dir / "projection_summary.csv",
        [
            "n",
            "kl_mv_mean", "kl_mv_std", "kl_rrs_mean", "kl_rrs_std",
            "kl_mv_opt_mean", "kl_rrs_opt_mean",
            "beta_opt_mv_mean", "beta_opt_rrs_mean",
            "beta_fit_mv_mean", "beta_fit_rrs_mean",
            "frac_rrs_better",
        ],
        summary_rows,
    )
    return {
        "scatter": scatter_path,
        "scatter_fits": scatter_fit_path,
        "ensemble": ens_path,
        "summary": summary_path,
        "per_n": per_n,
        "scatter_fit_rows": fit_rows,
    }


# --- Monte Carlo projection pipeline ---------------------------------------------


def _level_counts(hist, energies: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Counts per spectrum level; every energy must match a level."""
    pos = np.searchsorted(hist.energies, energies)
    right = np.clip(pos, 0, hist.num_levels - 1)
    left = np.clip(pos - 1, 0, hist.num_levels - 1)
    d_right = np.abs(hist.energies[right] - energies)
    d_left = np.abs(hist.energies[left] - energies)
    level = np.where(d_left <= d_right, left, right)
    dist = np.minimum(d_left, d_right)
    if np.any(dist > tol):
        raise AuditError("sampled energy matches no exact level")
    return np.bincount(level, minlength=hist.num_levels)


def _level_fit(hist, counts: np.ndarray, min_count: int = 100):
    """ln(P_level / g) against E over well-populated levels; slope -> -beta."""
    total = counts.sum()
    mask = counts >= min_count
    if mask.sum() < 2:
        raise AuditError("too few populated levels for a temperature fit")
    p = counts[mask] / total
    return fit_inverse_temperature(
        hist.energies[mask], p / hist.degeneracies[mask]
    ), int(mask.sum())


def mc_projection(
    out_dir,
    master_seed: int,
    n: int = 20,
    k: int = 3,
    j_f: float = -2.0,
    beta: float = 0.6,
    realizations: int = 200,
    samples_per_realization: int = 5000,
    nt_native: int | None = None,
    nt_embedded: int | None = None,
    min_fit_count: int = 100,
) -> dict:
    """Energy-level sampling comparison: native Monte Carlo against the
    exact spectrum, and both projections of embedded Monte Carlo samples."""
    out_dir = Path(out_dir)
    beta = float(beta)
    if nt_native is None:
        nt_native = 20 * n
    if nt_embedded is None:
        nt_embedded = 10 * n * k

    seed = _instance_seed(master_seed, 0)
    model = generate_instance(n, seed)
    hist = energy_histogram(model)
    p_exact = level_probabilities(hist, beta)

    native_cfg = SamplerConfig(
        beta=beta,
        thermalization_steps=nt_native,
        samples_per_realization=samples_per_realization,
        realizations=realizations,
        seed=seed ^ MC_NATIVE_SALT,
    )
    native = metropolis_sample(model, native_cfg)
    counts_native = _level_counts(hist, native.energies)

    emb, embedded = build_embedding(model, k, j_f, "deterministic")
    emb_cfg = SamplerConfig(
        beta=beta,
        thermalization_steps=nt_embedded,
        samples_per_realization=samples_per_realization,
        realizations=realizations,
        seed=seed ^ MC_EMBEDDED_SALT,
    )
    emb_batch = metropolis_sample(embedded, emb_cfg)

    projected = {
        "mv": project_batch_mv(emb, emb_batch.configs, seed ^ MV_SALT),
        "rrs": project_batch_rrs(
            emb, model, emb_batch.configs, beta, seed ^ RRS_SALT
        ),
    }
    counts = {"native": counts_native}
    for method, cfgs in projected.items():
        e = np.empty(cfgs.shape[0])
        _kernels.energies_for_configs(
            cfgs, model.edge_i, model.edge_j, model.edge_w, model.fields, e
        )
        counts[method] = _level_counts(hist, e)

    total = native.num_samples
    fits = {}
    fit_rows = []
    for method in ("native", "mv", "rrs"):
        (bf, intercept), used = _level_fit(hist, counts[method], min_fit_count)
        fits[method] = bf
        fit_rows.append((method, bf, intercept, used, total))

    level_rows = []
    for lev in range(hist.num_levels):
        level_rows.append(
            (
                lev, hist.energies[lev], int(hist.degeneracies[lev]), p_exact[lev],
                int(counts["native"][lev]), int(counts["mv"][lev]),
                int(counts["rrs"][lev]),
            )
        )
    levels_path = write_csv(
        out_dir / "mc_levels.csv",
        ["level", "energy", "degeneracy", "p_exact", "count_native", "count_mv", "count_rrs"],
        level_rows,
    )
    fits_path = write_csv(
        out_dir / "mc_fits.csv",
        ["method", "beta_fit", "intercept", "levels_used", "samples"],
        fit_rows,
    )
    return {
        "levels": levels_path,
        "fits_csv": fits_path,
        "fits": fits,
        "hist": hist,
        "p_exact": p_exact,
        "counts": counts,
        "samples": total,
        "instance_seed": seed,
    }


# --- impossibility certificate -----------------------------------------------------


def counterexample(
    out_dir,
    n_ring: int = 5,
    j_f_mag: float = 2.0,
    beta: float = 0.6,
    tol: float = 1e-5,
) -> dict:
    """Ring certificate: the two single-configuration estimates of
    Z/Z_L - 1 disagree with each other and with the exact value, so no
    per-sample projection preserves the Boltzmann law at beta > 0."""
    out_dir = Path(out_dir)
    model = ring_model(n_ring, j_f_mag)
    table = ring_energy_table(n_ring, j_f_mag)
    table_rows = []
    energies_match = True
    for row, variant in enumerate(("C1", "C2")):
        for col, (a, b) in enumerate(RING_COLUMNS):
            direct = energy(model, ring_config(n_ring, variant, a, b))
            formula = float(table[row, col])
            match = direct == formula
            energies_match = energies_match and match
            table_rows.append((variant, a, b, formula, direct, int(match)))

    r1, r2 = ring_r_values(beta, j_f_mag)
    exact = exact_ring_partition_ratio(n_ring, j_f_mag, beta)
    distinct = (
        abs(r1 - r2) > 10 * tol
        and abs(r1 - exact) > 10 * tol
        and abs(r2 - exact) > 10 * tol
    )
    passed = bool(energies_match and distinct)

    write_csv(
        out_dir / "counterexample_table.csv",
        ["variant", "s0", "s1", "energy_formula", "energy_direct", "match"],
        table_rows,
    )
    write_csv(
        out_dir / "counterexample_summary.csv",
        ["n_ring", "j_f_mag", "beta", "r_c1", "r_c2", "exact_ratio", "pass"],
        [(n_ring, j_f_mag, beta, r1, r2, exact, int(passed))],
    )
    return {
        "r_c1": r1,
        "r_c2": r2,
        "exact": exact,
        "energies_match": energies_match,
        "pass": passed,
    }


def write_generated_instance(out_path, n: int, seed: int) -> Path:
    model = generate_instance(n, seed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_instance(model, out_path)
    return out_path
