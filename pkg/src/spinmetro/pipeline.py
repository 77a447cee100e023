"""Config-driven runs behind the command-line tool.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, evaluates
every time point (in a thread pool, results gathered in order) and writes its
files from the calling thread.  Outputs depend only on the config and the
seed, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import build_oat, build_xy, evolve
from .fisher import classical_fisher, fisher_fit, fisher_sampled, fisher_single, hellinger_curve, qfi_pure
from .husimi import q_csv, write_grid_binary
from .measurement import (
    DIRECTION_IDS,
    LINEAR_IDS,
    NLSP_SCHEME,
    RSP_SCHEME,
    apply_confusion,
    bootstrap_groups,
    correct_readout,
    estimate_moments,
    sample_readout,
    substream,
)
from .spin import coherent_spin_state, random_symmetric_state, spin_mean_and_covariance
from .squeezing import family_column, get_family, identity_residuals, squeeze_parameter, squeezing, vc_from_moments

IDENTITY_TOL = 1e-9


def header_line(config: ExperimentConfig) -> str:
    return (
        f"# spinmetro {__version__} config_sha256={config.config_hash} seed={config.seed} "
        f"mode={config.mode} time_unit={config.time_unit}\n"
    )


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return repr(float(x))


def _write_csv(path: Path, config: ExperimentConfig, columns, rows):
    with open(path, "w") as fh:
        fh.write(header_line(config))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


@dataclass
class Prepared:
    times: np.ndarray  # as given in the config
    states: list


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def prepare(config: ExperimentConfig) -> Prepared:
    """Initial coherent state along +x evolved to every configured time."""
    n = config.n_qubits
    psi0 = coherent_spin_state(n, "x", config.representation)
    if config.model == "oat":
        chi, solver_t = config.evolution_chi_and_times()
        ham = build_oat(n, chi, config.representation)
    else:
        ham = build_xy(config.coupling)
        solver_t = config.xy_times()
    states = _pmap(lambda t: evolve(psi0, ham, t), solver_t, config.workers)
    return Prepared(np.asarray(config.times, dtype=float), states)


def _out_dir(config, out=None) -> Path:
    p = Path(out if out is not None else config.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _best_alpha(state, grid):
    """Grid argmax of the classical Fisher information; ties go to the smallest |alpha|."""
    values = np.array([classical_fisher(state, a) for a in grid])
    best = values.max()
    cands = np.flatnonzero(values >= best - 1e-9 * max(1.0, best))
    k = min(cands, key=lambda i: (abs(grid[i]), grid[i]))
    return float(grid[k]), float(values[k]), values


# --- evolve ----------------------------------------------------------------------------


def run_evolve(config: ExperimentConfig, out=None) -> Path:
    prep = prepare(config)
    n = config.n_qubits

    def row(i):
        mean, cov = spin_mean_and_covariance(prep.states[i])
        return (prep.times[i], *mean, 4 * np.linalg.eigvalsh(cov)[-1] / n)

    rows = _pmap(row, range(len(prep.states)), config.workers)
    path = _out_dir(config, out) / "trajectory.csv"
    _write_csv(path, config, ["t", "jx", "jy", "jz", "qfi_over_n"], rows)
    return path


# --- squeezing -------------------------------------------------------------------------


def _sample_directions(config, state, t_index, directions):
    """Shot records (optionally corrupted) for every direction at one time point."""
    recs = {}
    for d in directions:
        rec = sample_readout(state, d, config.shots_per_direction, config.seed, substream_key=(t_index,))
        if config.confusion is not None:
            rec = apply_confusion(rec, config.confusion, config.seed, substream_key=(t_index,))
        recs[d] = rec
    return recs


def _sampled_xi2_inv(records, config, family):
    data = records
    if config.confusion is not None:
        data = {d: correct_readout(r, config.confusion) for d, r in records.items()}
    table = estimate_moments(data, config.n_qubits)
    v, c = vc_from_moments(table, family)
    return squeeze_parameter(v, c, config.n_qubits, family)


def _squeeze_point(config: ExperimentConfig, state, t_index):
    n = config.n_qubits
    alpha_opt, f_opt, _ = _best_alpha(state, config.alpha_grid_rad)
    out = {"alpha_opt": alpha_opt, "F_over_N": f_opt / n, "FQ_over_N": qfi_pure(state) / n, "reports": {}}
    if config.mode == "exact":
        for f in config.families:
            rep = squeezing(state, f)
            out["reports"][f] = rep.to_dict()
            out[f] = (rep.xi2_inv, None)
        return out

    fams = [get_family(f) for f in config.families]
    dirs = DIRECTION_IDS if any(f.needs_all_directions for f in fams) else LINEAR_IDS
    records = _sample_directions(config, state, t_index, dirs)
    for fam in fams:
        recs = records if fam.needs_all_directions else {d: records[d] for d in LINEAR_IDS}
        rep = _sampled_xi2_inv(recs, config, fam)
        scheme = RSP_SCHEME if fam.name == "s1" else NLSP_SCHEME
        boot = bootstrap_groups(recs, scheme, lambda agg, fam=fam: _sampled_xi2_inv(agg, config, fam).xi2_inv, seed=config.seed)
        d = rep.to_dict()
        d["bootstrap"] = {"mean": boot.mean, "std": boot.std, "groups": scheme.groups}
        out["reports"][fam.name] = d
        out[fam.name] = (rep.xi2_inv, boot.std)
    est = fisher_sampled(
        state, alpha_opt, config.theta_rad, config.shots_per_direction, config.seed,
        confusion=config.confusion, simulate_errors=config.confusion, stream=(t_index,),
    )
    out["F_sampled"] = (est.F / n, est.std / n)
    return out


def run_squeezing(config: ExperimentConfig, out=None) -> Path:
    """squeezing.csv (one row per time point) plus squeeze_reports.json."""
    prep = prepare(config)
    points = _pmap(lambda i: _squeeze_point(config, prep.states[i], i), range(len(prep.states)), config.workers)
    sampled = config.mode == "sampled"
    cols = ["t"]
    for f in config.families:
        cols.append(f"xi2_{family_column(f)}_inv")
        if sampled:
            cols.append(f"xi2_{family_column(f)}_inv_std")
    cols += ["F_over_N", "FQ_over_N"]
    if sampled:
        cols += ["F_over_N_sampled", "F_over_N_sampled_std"]
    rows = []
    for t, p in zip(prep.times, points):
        row = [t]
        for f in config.families:
            row.append(p[f][0])
            if sampled:
                row.append(p[f][1])
        row += [p["F_over_N"], p["FQ_over_N"]]
        if sampled:
            row += list(p["F_sampled"])
        rows.append(row)
    d = _out_dir(config, out)
    path = d / "squeezing.csv"
    _write_csv(path, config, cols, rows)
    reports = [{"t": float(t), "alpha_opt": p["alpha_opt"], "families": p["reports"]} for t, p in zip(prep.times, points)]
    (d / "squeeze_reports.json").write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")
    return path


# --- fisher ----------------------------------------------------------------------------


def _fisher_point(config: ExperimentConfig, state, t_index):
    alphas = config.alpha_grid_rad
    f_alpha = np.array([fisher_single(d2, config.theta_rad).F for d2 in (hellinger_curve(state, a, [config.theta_rad])[0] for a in alphas)])
    alpha_opt, f_cl, cl_values = _best_alpha(state, alphas)
    thetas = config.theta_grid_rad
    d2 = hellinger_curve(state, alpha_opt, thetas)
    fit = fisher_fit(thetas, d2, cubic=True, alpha=alpha_opt)
    single = fisher_single(float(hellinger_curve(state, alpha_opt, [config.theta_rad])[0]), config.theta_rad, alpha_opt)
    res = {
        "alpha_sweep": (alphas, f_alpha, cl_values),
        "theta_sweep": (thetas, d2),
        "alpha_opt": alpha_opt,
        "fit": fit,
        "single": single,
        "F_classical": f_cl,
        "F_Q": qfi_pure(state),
        "sampled": None,
    }
    if config.mode == "sampled":
        res["sampled"] = fisher_sampled(
            state, alpha_opt, config.theta_rad, config.shots_per_direction, config.seed,
            confusion=config.confusion, simulate_errors=config.confusion, stream=(t_index,),
        )
    return res


def run_fisher(config: ExperimentConfig, out=None) -> Path:
    """Per time point: alpha sweep, theta sweep at alpha_opt and a JSON estimate; plus a summary CSV."""
    prep = prepare(config)
    points = _pmap(lambda i: _fisher_point(config, prep.states[i], i), range(len(prep.states)), config.workers)
    d = _out_dir(config, out)
    sampled = config.mode == "sampled"
    summary = []
    for i, (t, p) in enumerate(zip(prep.times, points)):
        a, fa, fc = p["alpha_sweep"]
        _write_csv(d / f"fisher_alpha_t{i}.csv", config, ["alpha", "F_hellinger", "F_classical"], zip(a, fa, fc))
        th, d2 = p["theta_sweep"]
        _write_csv(d / f"fisher_theta_t{i}.csv", config, ["theta", "d2"], zip(th, d2))
        doc = {
            "t": float(t),
            "time_unit": config.time_unit,
            "n_qubits": config.n_qubits,
            "alpha_opt": p["alpha_opt"],
            "fit": p["fit"].to_dict(),
            "single": p["single"].to_dict(),
            "F_classical": p["F_classical"],
            "F_Q": p["F_Q"],
        }
        row = [t, p["alpha_opt"], p["fit"].F, p["single"].F, p["F_classical"], p["F_Q"]]
        if sampled:
            doc["sampled"] = p["sampled"].to_dict()
            row += [p["sampled"].F, p["sampled"].std]
        (d / f"fisher_t{i}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        summary.append(row)
    cols = ["t", "alpha_opt", "F_fit", "F_single", "F_classical", "F_Q"]
    if sampled:
        cols += ["F_sampled", "F_sampled_std"]
    path = d / "fisher_summary.csv"
    _write_csv(path, config, cols, summary)
    return path


# --- husimi ----------------------------------------------------------------------------


def run_husimi(config: ExperimentConfig, out=None) -> list[Path]:
    prep = prepare(config)
    d = _out_dir(config, out)
    h = config.husimi
    comment = header_line(config)[2:-1]
    paths = []
    for i, st in enumerate(prep.states):
        p = d / f"husimi_t{i}.csv"
        grid = q_csv(st, (h["n_theta"], h["n_phi"]), p, h["density"], header_comment=comment)
        if h["binary"]:
            write_grid_binary(grid, d / f"husimi_t{i}.bin")
        paths.append(p)
    return paths


# --- identity validation ---------------------------------------------------------------


def validate_identities(n_list, trials, seed=0, identities=None, out_path=None, header=None) -> dict:
    """Max residual of every reconstruction identity over random symmetric states.

    Returns ``{name: max_residual}``; NaN marks an identity that failed to evaluate.
    """
    worst = {}
    for n in n_list:
        rng = substream(seed, 4242, n)
        for _ in range(trials):
            st = random_symmetric_state(n, rng)
            for name, r in identity_residuals(st, identities).items():
                prev = worst.get(name, 0.0)
                worst[name] = np.nan if np.isnan(prev) or np.isnan(r) else max(prev, r)
    if out_path is not None:
        with open(out_path, "w") as fh:
            if header:
                fh.write(header)
            fh.write("name,max_residual\n")
            for name, r in worst.items():
                fh.write(f"\"{name}\",{_fmt(r)}\n")
    return worst


def identities_pass(residuals: dict, tol: float = IDENTITY_TOL) -> bool:
    return all(np.isfinite(r) and r <= tol for r in residuals.values())


__all__ = [
    "header_line",
    "identities_pass",
    "prepare",
    "run_evolve",
    "run_fisher",
    "run_husimi",
    "run_squeezing",
    "validate_identities",
]
