"""Simulation orchestration and the ``series.csv`` / ``summary.txt`` artifacts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as M
from .graph import MAX_ENUM_NODES, compute_W, diameter
from .observer import Network, Trajectory, simulate
from .scenario import Scenario
from .se3 import exp_so3, log_so3

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SIMULATION = 3
EXIT_SUITE = 4

SERIES_UNITS = (
    "# t [s]; p<i>x,p<i>y,p<i>z: position estimate of camera i in its own frame [m]; "
    "r<i>x,r<i>y,r<i>z: axis*angle of the world-frame orientation estimate R_wi R_bar_i [rad]; "
    "U_p [m^2]; U_R [-]; lambda_size: cameras with phi >= zeta [count]; in_S: 1 if every "
    "sym(R_bar_i^T R*_i) is positive definite"
)


def series_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"p{i}x", f"p{i}y", f"p{i}z", f"r{i}x", f"r{i}y", f"r{i}z"]
    return cols + ["U_p", "U_R", "lambda_size", "in_S"]


def _g(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class RunResult:
    scenario: Scenario
    network: Network
    trajectory: Trajectory
    baseline: M.AveragingBaseline
    report: M.PerformanceReport
    theory: M.TheoryConstants | None
    summary: dict

    def settled(self, tail_fraction: float | None = None) -> tuple[float, float]:
        f = self.scenario.analysis.tail_fraction if tail_fraction is None else tail_fraction
        return (M.tail_mean(self.report.U_p, self.report.t, f),
                M.tail_mean(self.report.U_R, self.report.t, f))


def graph_constants(network: Network) -> tuple[int | None, int]:
    W = compute_W(network.graph)[0] if network.n <= MAX_ENUM_NODES else None
    return W, diameter(network.graph)


def execute(scenario: Scenario) -> RunResult:
    """Simulate the scenario and evaluate every metric (no files written)."""
    net = scenario.build_network()
    base = M.baseline(net, zeta_margin=scenario.analysis.zeta_margin)
    it = scenario.integration
    init = scenario.initial_state()
    traj = simulate(net, init, scenario.gains, dt=it.dt, t_final=it.t_final,
                    record_every=it.record_every, scheme=it.scheme, error_mode=it.error_mode)
    rep = M.performance_report(traj, base, scenario.analysis.tail_fraction)
    W, diam = graph_constants(net)
    theory = None
    if W is not None and scenario.k_s > 0:
        theory = M.theory_constants(base, scenario.gains, W, diam, scenario.analysis.epsilon)
    summary = build_summary(scenario, net, base, rep, traj, theory, W, diam)
    return RunResult(scenario, net, traj, base, rep, theory, summary)


def build_summary(scenario, net, base, rep, traj, theory, W, diam) -> dict:
    an = scenario.analysis
    eps_ok = M.epsilon_level_achieved(traj, base, an.epsilon, an.tail_fraction)
    _, init_in_S = M.set_S_membership(traj.state(0), base)
    s: dict = {
        "n": net.n,
        "viewing": " ".join(str(net.cameras[i].id) for i in base.viewing),
        "k_e": scenario.k_e,
        "k_s": scenario.k_s,
        "k": scenario.gains.k,
        "scheme": scenario.integration.scheme,
        "error_mode": scenario.integration.error_mode,
        "dt": scenario.integration.dt,
        "t_final": scenario.integration.t_final,
        "p_star": " ".join(_g(x) for x in base.g_star.p),
        "xi_theta_star": " ".join(_g(x) for x in log_so3(base.g_star.R)),
        "rho_p": base.rho_p,
        "rho_R": base.rho_R,
        "phi_m": base.phi_m,
        "zeta": base.zeta,
        "beta": base.beta,
        "W": "n/a" if W is None else W,
        "diam": diam,
        "epsilon": an.epsilon,
        "epsilon_R": math.nan if theory is None else theory.epsilon_R,
        "epsilon_R_prime": math.nan if theory is None else theory.epsilon_R_prime,
        "alpha_R": math.nan if theory is None else theory.alpha_R,
        "attained_epsilon_p": rep.attained_epsilon_p,
        "attained_epsilon_R": rep.attained_epsilon_R,
        "epsilon_level_p": eps_ok[0],
        "epsilon_level_R": eps_ok[1],
        "settled_U_p": M.tail_mean(rep.U_p, rep.t, an.tail_fraction),
        "settled_U_R": M.tail_mean(rep.U_R, rep.t, an.tail_fraction),
        "assumption_distinct_targets": base.distinct_pair,
        "assumption_targets_positive": base.targets_positive,
        "beta_positive": base.beta_positive,
        "initial_in_S": init_in_S,
        "theorem_applicable": bool(theory is not None and theory.applicable and init_in_S
                                   and not net.has_schedule() and not net.has_moving_target()),
        "time_varying_visibility": net.has_schedule(),
        "moving_target": net.has_moving_target(),
    }
    return s


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _g(v)
    return str(v)


def summary_text(summary: dict) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items())


def series_rows(result: RunResult):
    traj, rep, net = result.trajectory, result.report, result.network
    Rw = net._arr["R_wi"] @ traj.R
    for k in range(len(traj)):
        row = [_g(traj.t[k])]
        for i in range(net.n):
            row += [_g(x) for x in traj.p[k, i]]
            row += [_g(x) for x in log_so3(Rw[k, i])]
        row += [_g(rep.U_p[k]), _g(rep.U_R[k]), str(int(rep.lambda_size[k])), str(int(rep.in_S[k]))]
        yield row


def write_series(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SERIES_UNITS + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(series_header(result.network.n))
        w.writerows(series_rows(result))


def run(scenario: Scenario, output_dir: Path | str) -> RunResult:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = execute(scenario)
    write_series(result, out / "series.csv")
    (out / "summary.txt").write_text(summary_text(result.summary))
    return result


def read_series(path: Path | str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[float(x) for x in r] for r in reader]
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row has {len(r)} columns, header declares {len(header)}")
    return header, np.array(rows).reshape(-1, len(header))


def recompute(series_path: Path | str, scenario: Scenario) -> dict:
    """Metrics recomputed from a recorded ``series.csv`` against its scenario."""
    header, data = read_series(series_path)
    net = scenario.build_network()
    if header != series_header(net.n):
        raise ValueError("series.csv columns do not match the scenario's camera count")
    base = M.baseline(net, zeta_margin=scenario.analysis.zeta_margin)
    t = data[:, 0]
    K = len(t)
    p = np.empty((K, net.n, 3))
    R = np.empty((K, net.n, 3, 3))
    R_wi = net._arr["R_wi"]
    for i in range(net.n):
        p[:, i] = data[:, 1 + 6 * i: 4 + 6 * i]
        for k in range(K):
            R[k, i] = R_wi[i].T @ exp_so3(data[k, 4 + 6 * i: 7 + 6 * i])
    traj = Trajectory(t, R, p)
    rep = M.performance_report(traj, base, scenario.analysis.tail_fraction)
    an = scenario.analysis
    return {
        "records": K,
        "settled_U_p": M.tail_mean(rep.U_p, t, an.tail_fraction),
        "settled_U_R": M.tail_mean(rep.U_R, t, an.tail_fraction),
        "attained_epsilon_p": rep.attained_epsilon_p,
        "attained_epsilon_R": rep.attained_epsilon_R,
        "max_abs_dev_U_p": float(np.max(np.abs(rep.U_p - data[:, -4]))),
        "max_abs_dev_U_R": float(np.max(np.abs(rep.U_R - data[:, -3]))),
    }


def baseline_text(scenario: Scenario) -> str:
    net = scenario.build_network()
    base = M.baseline(net, zeta_margin=scenario.analysis.zeta_margin)
    W, diam = graph_constants(net)
    d = {
        "p_star": " ".join(_g(x) for x in base.g_star.p),
        "xi_theta_star": " ".join(_g(x) for x in log_so3(base.g_star.R)),
        "rho_p": base.rho_p, "rho_R": base.rho_R, "phi_m": base.phi_m,
        "zeta": base.zeta, "beta": base.beta,
        "W": "n/a" if W is None else W, "diam": diam,
        "assumption_distinct_targets": base.distinct_pair,
        "assumption_targets_positive": base.targets_positive,
    }
    return summary_text(d)
