"""Scenario configuration, run orchestration, and bit-stable result emission.

Configs are flat key/value INI files with one section per module (see
configs/schema.ini for the documented schema).  Every run writes CSV series
plus a summary.json with a machine-readable pass/fail verdict per enabled
check.  Identical config + seed produces byte-identical outputs: floats are
emitted with 17 significant digits, JSON keys are sorted, and nothing
time- or host-dependent is written.

Exit codes: 0 all verdicts pass, 1 any check failed, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, dressing, dynamics, fock, hamiltonians, picard
from .initial_data import build_state, random_smooth_state
from .spectral import PhasePoint, build_form_factors, build_grid

CSV_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _csv_floats(text: str):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _float_or_inf(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


# schema: section -> key -> (converter, default)
SCHEMA = {
    "grid": {
        "d": (int, 3),
        "n": (int, 32),
        "length": (float, 16.0),
    },
    "form_factors": {
        "sigma0": (float, 0.75),
        "sigma": (_float_or_inf, math.inf),
    },
    "initial": {
        "u_family": (str, "gaussian"),
        "u_amp": (float, 0.5),
        "u_width": (float, 1.5),
        "u_center": (_csv_floats, None),
        "u_momentum": (_csv_floats, None),
        "alpha_family": (str, "gaussian"),
        "alpha_amp": (float, 0.3),
        "alpha_width": (float, 1.0),
        "shell_radius": (float, 1.0),
        "shell_width": (float, 0.3),
        "k_cut": (float, 0.5),
        "seed": (int, 0),
    },
    "evolution": {
        "dt": (float, 1e-3),
        "t_final": (float, 1.0),
        "scheme": (str, "strang-split"),
        "record_every": (int, 10),
    },
    "scenario": {
        "name": (str, "lp"),
        "n_states": (int, 100),
        "t_sample": (float, 0.5),
        "dt_levels": (_csv_floats, (4e-3, 2e-3, 1e-3)),
        "n_directions": (int, 200),
        "fd_step": (float, 1e-5),
        "picard_nodes": (int, 257),
        "picard_dt": (float, 2.5e-4),
        "picard_t_start": (float, 0.4),
    },
    "fock": {
        "particle_momenta": (_csv_floats, (0.0, 1.0, 2.0)),
        "phonon_momenta": (_csv_floats, (1.0, 2.0)),
        "dk": (float, 0.5),
        "lemma_dk": (float, 1e-6),
        "eps": (float, 0.5),
        "eps_list": (_csv_floats, (0.5, 0.25, 0.125)),
        "n_max_particles": (int, 6),
        "n_max_phonons": (int, 6),
        "sigma0": (float, 1.5),
        "phi0": (_csv_floats, (0.25, 0.15, 0.0)),
        "alpha0": (_csv_floats, (0.2, 0.1)),
        "t_final": (float, 0.5),
        "n_times": (int, 6),
        "klmn_samples": (int, 1000),
    },
}

SCENARIOS = ("free", "lp", "dressed", "energy_order", "conjugation",
             "dressed_identity", "gradient_check", "picard", "strichartz",
             "fock_lemma", "fock_correspondence", "fock_klmn")


def load_config(path: str | Path) -> dict:
    """Parse and validate an INI config against the schema.

    Unknown sections or keys are rejected by name; every value is converted
    by the schema type.  Missing entries take defaults.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = {sec: {k: d for k, (_, d) in keys.items()}
           for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for [{sec}] {key} = {raw!r}: {exc}") from exc
    if cfg["scenario"]["name"] not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {cfg['scenario']['name']!r}; choose from "
            f"{', '.join(SCENARIOS)}")
    return cfg


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path: Path, columns, rows) -> None:
    lines = [f"# schema={CSV_SCHEMA_VERSION}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")


TRAJECTORY_COLUMNS = (
    "t", "mass", "h1",
    "h_total", "h_kinetic", "h_phonon", "h_coupling",
    "hhat_total", "hhat_kinetic", "hhat_phonon", "hhat_coupling_ir",
    "hhat_pair", "hhat_quadratic", "hhat_drift",
    "L2t_L6x", "L4t_L3x", "L8t_L2.4x",
)


def _trajectory_rows(traj) -> list:
    rows = []
    for r in traj.rows:
        d = r.as_dict()
        row = {c: d.get(c, 0.0) for c in TRAJECTORY_COLUMNS}
        rows.append(row)
    return rows


def _write_trajectory(outdir: Path, traj) -> dict:
    write_csv(outdir / "trajectory.csv", TRAJECTORY_COLUMNS,
              _trajectory_rows(traj))
    mass = [r.mass for r in traj.rows]
    return {
        "mass_drift": float(np.max(np.abs(diagnostics.relative_drift(mass)))),
        "records": len(traj),
    }


# -- scenario runners ---------------------------------------------------------------


def _grid_and_state(cfg, seed):
    g = build_grid(cfg["grid"]["d"], cfg["grid"]["n"], cfg["grid"]["length"])
    ff = build_form_factors(g, cfg["form_factors"]["sigma0"],
                            cfg["form_factors"]["sigma"])
    z0 = build_state(g, cfg["initial"], seed)
    return g, ff, z0


def _evolution_config(cfg) -> dynamics.EvolutionConfig:
    e = cfg["evolution"]
    return dynamics.EvolutionConfig(dt=e["dt"], t_final=e["t_final"],
                                    scheme=e["scheme"],
                                    record_every=e["record_every"])


def run_free(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    ecfg = _evolution_config(cfg)
    stride = ecfg.dt * ecfg.record_every
    n_records = int(round(ecfg.t_final / stride))
    traj = dynamics.Trajectory()
    for i in range(n_records + 1):
        t = i * stride
        zt = dynamics.free_flow(z0, t)
        traj.append(t, zt, diagnostics.diagnostics_row(zt, ff, t))
    info = _write_trajectory(outdir, traj)
    mass = [r.mass for r in traj.rows]
    kin = [r.h.kinetic for r in traj.rows]
    verdicts = {
        "mass_exact": float(np.max(np.abs(diagnostics.relative_drift(mass)))) < 1e-12,
        "kinetic_exact": float(np.max(np.abs(diagnostics.relative_drift(kin)))) < 1e-12,
    }
    return {"info": info, "verdicts": verdicts}


def run_lp(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    traj = dynamics.lp_evolve(z0, _evolution_config(cfg), ff)
    info = _write_trajectory(outdir, traj)
    energies = [r.h.total for r in traj.rows]
    info["energy_drift"] = float(np.max(np.abs(
        diagnostics.relative_drift(energies))))
    verdicts = {"mass_conserved": info["mass_drift"] < 1e-8}
    return {"info": info, "verdicts": verdicts}


def run_dressed(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    traj = dynamics.dressed_evolve(z0, _evolution_config(cfg), ff)
    info = _write_trajectory(outdir, traj)
    energies = [r.hhat.total for r in traj.rows]
    info["energy_drift"] = float(np.max(np.abs(
        diagnostics.relative_drift(energies))))
    verdicts = {"mass_conserved": info["mass_drift"] < 1e-8}
    return {"info": info, "verdicts": verdicts}


def run_energy_order(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    levels = cfg["scenario"]["dt_levels"]
    t_final = cfg["evolution"]["t_final"]
    rows = []
    drifts = {"lp": [], "dressed": []}
    for dt in levels:
        for name, evolve, energy in (
                ("lp", dynamics.lp_evolve, lambda r: r.h.total),
                ("dressed", dynamics.dressed_evolve, lambda r: r.hhat.total)):
            ecfg = dynamics.EvolutionConfig(
                dt=dt, t_final=t_final,
                record_every=max(1, int(round(t_final / dt / 20))))
            traj = evolve(z0, ecfg, ff)
            vals = [energy(r) for r in traj.rows]
            drift = float(np.max(np.abs(diagnostics.relative_drift(vals))))
            drifts[name].append(drift)
            rows.append({"flow": name, "dt": dt, "energy_drift": drift})
    write_csv(outdir / "energy_order.csv", ("flow", "dt", "energy_drift"), rows)
    verdicts = {}
    summary = {"drifts": drifts}
    for name in ("lp", "dressed"):
        ratios = [drifts[name][i] / drifts[name][i + 1]
                  for i in range(len(levels) - 1)]
        summary[f"{name}_ratios"] = ratios
        verdicts[f"{name}_second_order"] = all(3.0 <= r <= 5.0 for r in ratios)
    return {"info": summary, "verdicts": verdicts}


def run_conjugation(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    t_sample = cfg["scenario"]["t_sample"]
    levels = cfg["scenario"]["dt_levels"]
    rows = []
    end_errors = []
    for dt in levels:
        ecfg = dynamics.EvolutionConfig(
            dt=dt, t_final=t_sample,
            record_every=max(1, int(round(t_sample / dt / 10))))
        times, errors = dressing.verify_conjugation(z0, t_sample, ecfg, ff)
        end_errors.append(float(errors[-1]))
        for t, e in zip(times, errors):
            rows.append({"dt": dt, "t": float(t), "error": float(e)})
    write_csv(outdir / "conjugation.csv", ("dt", "t", "error"), rows)
    orders, monotone = diagnostics.convergence_order(end_errors)
    info = {"errors": end_errors, "orders": orders.tolist(),
            "t0_error": rows[0]["error"]}
    verdicts = {
        "t0_exact": rows[0]["error"] < 1e-12,
        "second_order": monotone and all(1.7 <= o <= 2.3 for o in orders),
    }
    return {"info": info, "verdicts": verdicts}


def run_dressed_identity(cfg, outdir, seed):
    g = build_grid(cfg["grid"]["d"], cfg["grid"]["n"], cfg["grid"]["length"])
    ff = build_form_factors(g, cfg["form_factors"]["sigma0"],
                            cfg["form_factors"]["sigma"])
    n_states = cfg["scenario"]["n_states"]
    ini = cfg["initial"]
    rows = []
    for i in range(n_states):
        z = random_smooth_state(g, seed + i, u_amp=ini["u_amp"],
                                alpha_amp=ini["alpha_amp"],
                                k_cut=ini["k_cut"])
        rows.append({"state": i,
                     "residual": dressing.verify_dressed_identity(z, ff)})
    write_csv(outdir / "dressed_identity.csv", ("state", "residual"), rows)
    worst = max(r["residual"] for r in rows)
    return {"info": {"worst_residual": worst, "n_states": n_states},
            "verdicts": {"identity": worst < 1e-9}}


def run_gradient_check(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    h = cfg["scenario"]["fd_step"]
    n_dirs = cfg["scenario"]["n_directions"]
    rng = np.random.default_rng(seed + 1)
    targets = {
        "h": (lambda z: hamiltonians.h_undressed(z).total,
              hamiltonians.grad_undressed(z0)),
        "hhat": (lambda z: hamiltonians.h_dressed(z, ff).total,
                 hamiltonians.grad_dressed(z0, ff)),
    }
    rows = []
    worst = {}
    for name, (fun, grad) in targets.items():
        worst[name] = 0.0
        for i in range(n_dirs):
            v = PhasePoint(
                g,
                rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape),
                rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape),
                check=False)
            v = v.scaled(1.0 / v.norm())
            fd = (fun(z0.add(v, h)) - fun(z0.add(v, -h))) / (2.0 * h)
            an = 2.0 * grad.pairing(v).real
            rel = abs(fd - an) / (1.0 + abs(an))
            worst[name] = max(worst[name], rel)
            rows.append({"functional": name, "direction": i, "rel_error": rel})
    write_csv(outdir / "gradient_check.csv",
              ("functional", "direction", "rel_error"), rows)
    verdicts = {f"grad_{k}": v < 1e-6 for k, v in worst.items()}
    return {"info": {"worst": worst, "fd_step": h, "n_directions": n_dirs},
            "verdicts": verdicts}


def run_picard(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    sc = cfg["scenario"]
    t_c = picard.find_contraction_time(z0, t_start=sc["picard_t_start"],
                                       n_nodes=sc["picard_nodes"])
    ratios = picard.measure_contraction(z0, t_c, n_nodes=sc["picard_nodes"])
    t_match = min(t_c, 0.1)
    n_steps = max(1, int(round(t_match / sc["picard_dt"])))
    dt = t_match / n_steps
    gap = picard.picard_vs_strang(z0, t_match, ff,
                                  n_nodes=sc["picard_nodes"], dt=dt)
    rows = [{"n": i + 1, "ratio": r} for i, r in enumerate(ratios)]
    write_csv(outdir / "picard.csv", ("n", "ratio"), rows)
    info = {"contraction_time": t_c, "ratios": ratios,
            "endpoint_gap": gap, "match_horizon": t_match}
    verdicts = {
        "contracting": len(ratios) >= 5 and all(r <= 0.5 for r in ratios[:5]),
        "matches_strang": gap < 1e-6,
    }
    return {"info": info, "verdicts": verdicts}


def run_strichartz(cfg, outdir, seed):
    g, ff, z0 = _grid_and_state(cfg, seed)
    traj = dynamics.lp_evolve(z0, _evolution_config(cfg), ff)
    report = picard.strichartz_report(traj)
    n_states = cfg["scenario"]["n_states"]
    ini = cfg["initial"]
    rows = []
    worst = math.inf
    if g.d >= 3:
        for i in range(n_states):
            z = random_smooth_state(g, seed + 1000 + i, u_amp=ini["u_amp"],
                                    alpha_amp=ini["alpha_amp"],
                                    k_cut=ini["k_cut"])
            resid = picard.interpolation_residual(g, z.u)
            worst = min(worst, resid)
            rows.append({"state": i, "residual": resid})
        write_csv(outdir / "interpolation.csv", ("state", "residual"), rows)
    finite = all(math.isfinite(v) for k, v in report.items()
                 if isinstance(v, float))
    verdicts = {"norms_finite": bool(finite)}
    if g.d >= 3:
        verdicts["interpolation_nonnegative"] = worst >= -1e-10
    return {"info": {"report": report,
                     "worst_interpolation_residual":
                         None if worst is math.inf else worst},
            "verdicts": verdicts}


def _fock_model(cfg, eps=None, dk=None):
    f = cfg["fock"]
    return fock.FockModel(
        particle_momenta=list(f["particle_momenta"]),
        phonon_momenta=list(f["phonon_momenta"]),
        dk=f["dk"] if dk is None else dk,
        eps=f["eps"] if eps is None else eps,
        n_max_particles=f["n_max_particles"],
        n_max_phonons=f["n_max_phonons"],
        sigma0=f["sigma0"])


def run_fock_lemma(cfg, outdir, seed):
    model = _fock_model(cfg, dk=cfg["fock"]["lemma_dk"])
    rep = fock.dressed_comparison(model)
    rows = [{"quantity": "restricted_diff_norm",
             "value": rep["restricted_diff_norm"]},
            {"quantity": "restricted_scale", "value": rep["restricted_scale"]},
            {"quantity": "subspace_dim", "value": float(rep["subspace_dim"])}]
    write_csv(outdir / "fock_lemma.csv", ("quantity", "value"), rows)
    info = {k: rep[k] for k in ("restricted_diff_norm", "restricted_scale",
                                "n_cut", "subspace_dim")}
    return {"info": info,
            "verdicts": {"dressed_expansion":
                         rep["restricted_diff_norm"] < 1e-6}}


def run_fock_correspondence(cfg, outdir, seed):
    f = cfg["fock"]
    res = fock.correspondence_experiment(
        lambda eps: _fock_model(cfg, eps=eps),
        list(f["eps_list"]), list(f["phi0"]), list(f["alpha0"]),
        f["t_final"], n_times=f["n_times"])
    rows = []
    for eps, errs in res["errors"].items():
        for t, e in zip(res["times"], errs):
            rows.append({"eps": eps, "t": t, "error": e})
    write_csv(outdir / "correspondence.csv", ("eps", "t", "error"), rows)
    eps_sorted = sorted(res["errors"], reverse=True)
    final = [res["errors"][e][-1] for e in eps_sorted]
    monotone = all(final[i + 1] <= 1.1 * final[i]
                   for i in range(len(final) - 1))
    return {"info": {"eps": eps_sorted, "final_errors": final},
            "verdicts": {"monotone_in_eps": bool(monotone)}}


def run_fock_klmn(cfg, outdir, seed):
    model = _fock_model(cfg)
    rep = fock.klmn_check(model, n_samples=cfg["fock"]["klmn_samples"],
                          seed=seed)
    write_csv(outdir / "fock_klmn.csv", ("quantity", "value"),
              [{"quantity": "a", "value": rep["a"]},
               {"quantity": "C", "value": rep["C"]},
               {"quantity": "norm_kB_sq", "value": rep["norm_kB_sq"]}])
    return {"info": rep, "verdicts": {"form_bound": bool(rep["satisfied"])}}


RUNNERS = {
    "free": run_free,
    "lp": run_lp,
    "dressed": run_dressed,
    "energy_order": run_energy_order,
    "conjugation": run_conjugation,
    "dressed_identity": run_dressed_identity,
    "gradient_check": run_gradient_check,
    "picard": run_picard,
    "strichartz": run_strichartz,
    "fock_lemma": run_fock_lemma,
    "fock_correspondence": run_fock_correspondence,
    "fock_klmn": run_fock_klmn,
}


def run_scenario(cfg: dict, outdir: str | Path, seed: int | None = None,
                 scenario: str | None = None) -> dict:
    """Execute one scenario and write its artifacts; returns the summary."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = scenario or cfg["scenario"]["name"]
    if name not in RUNNERS:
        raise ConfigError(f"unknown scenario {name!r}")
    used_seed = cfg["initial"]["seed"] if seed is None else seed
    summary = {"scenario": name, "seed": used_seed,
               "csv_schema": CSV_SCHEMA_VERSION}
    try:
        result = RUNNERS[name](cfg, outdir, used_seed)
        summary.update(result)
        summary["passed"] = all(result["verdicts"].values())
    except dynamics.BlowUpError as exc:
        summary["blow_up"] = {"step": exc.step, "t": exc.t, "peak": exc.peak}
        summary["verdicts"] = {"no_blow_up": False}
        summary["passed"] = False
    (outdir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def _sweep_one(args):
    path, outdir, seed, scenario, section, key, value = args
    cfg = load_config(path)
    conv = SCHEMA[section][key][0]
    cfg[section][key] = conv(value)
    return value, run_scenario(cfg, outdir, seed=seed, scenario=scenario)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="polaronlab",
        description="Landau-Pekar numerical laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--outdir", default="out")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.add_argument("--scenario", default=None,
                       help="override the config scenario")
    p_run.add_argument("-v", "--verbose", action="store_true")

    p_sweep = sub.add_parser("sweep",
                             help="run one scenario over a list of values")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True,
                         help="section.key to vary, e.g. evolution.dt")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.add_argument("--outdir", default="out")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--scenario", default=None)
    p_sweep.add_argument("--jobs", type=int, default=2)

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")

    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            load_config(args.config)
            print("config ok")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            summary = run_scenario(cfg, args.outdir, seed=args.seed,
                                   scenario=args.scenario)
            if args.verbose:
                print(json.dumps(summary, sort_keys=True, indent=2))
            for check, ok in summary.get("verdicts", {}).items():
                print(f"{'PASS' if ok else 'FAIL'} {check}")
            return 0 if summary["passed"] else 1
        if args.command == "sweep":
            try:
                section, key = args.param.split(".", 1)
            except ValueError:
                raise ConfigError(
                    f"--param must look like section.key, got {args.param!r}")
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"unknown sweep parameter {args.param!r}")
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            jobs = []
            for v in values:
                outdir = Path(args.outdir) / f"{key}={v}"
                jobs.append((args.config, outdir, args.seed, args.scenario,
                             section, key, v))
            ok = True
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for value, summary in pool.map(_sweep_one, jobs):
                    ok &= summary["passed"]
                    print(f"{'PASS' if summary['passed'] else 'FAIL'} "
                          f"{args.param}={value}")
            return 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
