"""Command-line front end: reproducible file-driven runs of every pipeline.

Configuration is a flat ``key = value`` text file plus ``--key value``
overrides; every run writes its resolved parameters to ``<out>.manifest`` so
reruns are diffable.  Outputs are CSV or JSON-lines.  Exit codes: 0 success,
1 internal numeric failure, 2 configuration error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import interferometry, measurement, multiqubit, photon_transport, qrf
from . import fermion_transport as ferm
from . import geometry, trajectories
from .errors import ConfigError, RelQubitsError

_FMT = "%.17g"


def _fmt(x) -> str:
    return _FMT % float(x)


@dataclass
class RunConfig:
    command: str
    parameters: dict = field(default_factory=dict)
    output_path: str = "out.csv"


# Schemas: key -> (parser, default).  Unknown keys are rejected.
_SCHEMAS = {
    "cow-table": {
        "mass": (float, 1.67e-27),
        "v1": (float, 2794.0),
        "delta_z": (float, 0.0316),
        "ell": (float, 0.0316),
        "g": (float, 9.81),
        "precision_digits": (int, 50),
    },
    "transport-fermion": {
        "metric": (str, "minkowski"),
        "g": (float, 0.1),
        "M": (float, 1.0),
        "worldline": (str, "hover"),       # hover | circular
        "z": (float, 0.0),
        "r": (float, 10.0),
        "beta": (float, 0.5),
        "turns": (float, 1.0),
        "tau_span": (float, 1.0),
        "steps": (int, 2000),
        "spinor": (str, "1,0,0,0"),        # re1,im1,re2,im2 in the frame basis
    },
    "transport-photon": {
        "metric": (str, "rindler"),
        "g": (float, 0.1),
        "direction": (str, "1,0,0"),
        "span": (float, 2.0),
        "steps": (int, 4000),
        "jones": (str, "1,0,0,0"),
        "tetrad_rotation": (float, 0.0),   # fixed rotation about x, radians
    },
    "measure": {
        "state": (str, ""),                # file with 8 reals (spinor, velocity)
        "m": (str, "0,0,1"),
        "v": (str, "1,0,0,0"),
    },
    "teleport": {
        "alpha_re": (float, 0.6),
        "alpha_im": (float, 0.0),
        "beta_re": (float, 0.8),
        "beta_im": (float, 0.0),
        "metric": (str, "schwarzschild"),
        "M": (float, 1.0),
        "radii": (str, "8,10,12"),
        "turns": (float, 0.25),
        "steps": (int, 1500),
    },
    "qrf-decohere": {
        "group": (str, "u1"),
        "frame": (str, "u1-phase-eigenstate"),
        "size": (float, 4),
        "system_dim": (int, 2),
        "quadrature_n": (int, 256),
    },
    "qrf-overlap": {
        "kind": (str, "u1-phase-eigenstate"),
        "size": (float, 4),
        "points": (int, 256),
    },
    "bhd": {
        "kind": (str, "coherent"),         # coherent | phase
        "amp_a": (float, 2.0),
        "amp_b": (float, 2.0),
        "phase_a": (float, 0.0),
        "phase_b": (float, 0.7),
        "s_a": (int, 4),
        "s_b": (int, 4),
        "max_2j": (int, 40),
    },
}


def parse_config_file(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(line, "expected 'key = value'")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def resolve_parameters(command: str, raw: dict) -> dict:
    if command not in _SCHEMAS:
        raise ConfigError(command, "unknown command")
    schema = _SCHEMAS[command]
    params = {k: default for k, (_, default) in schema.items()}
    for key, value in raw.items():
        if key == "out":
            continue
        if key not in schema:
            raise ConfigError(key, "unknown key")
        parser = schema[key][0]
        try:
            params[key] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"bad value {value!r}: {exc}") from exc
    return params


def _write_manifest(cfg: RunConfig):
    lines = [f"command = {cfg.command}"]
    for k in sorted(cfg.parameters):
        lines.append(f"{k} = {cfg.parameters[k]}")
    lines.append(f"out = {cfg.output_path}")
    Path(str(cfg.output_path) + ".manifest").write_text("\n".join(lines) + "\n")


def _floats(text: str):
    return np.array([float(v) for v in text.split(",")])


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _run_cow_table(p, out):
    cfg = interferometry.COWConfig(p["mass"], p["v1"], p["delta_z"],
                                   p["ell"], p["g"], p["precision_digits"])
    rows = interferometry.cow_table(cfg)
    Path(out).write_text(interferometry.format_cow_table_csv(rows))


def _metric_from_params(p):
    return geometry.metric_from_config(
        {"metric": p["metric"], "g": p.get("g"), "M": p.get("M")})


def _run_transport_fermion(p, out):
    metric = _metric_from_params(p)
    if p["worldline"] == "hover":
        spatial = np.array([0.0, 0.0, p["z"]])
        traj = trajectories.hover_worldline(metric, spatial,
                                            (0.0, p["tau_span"]), p["steps"])
    elif p["worldline"] == "circular":
        if p["metric"] == "schwarzschild":
            traj = trajectories.schwarzschild_circular_orbit(
                p["M"], p["r"] * p["M"], p["steps"], p["turns"])
        else:
            traj = trajectories.flat_circular_orbit(p["beta"], p["steps"],
                                                    p["turns"])
    else:
        raise ConfigError("worldline", f"unknown worldline {p['worldline']!r}")
    vals = _floats(p["spinor"])
    q0 = ferm.WeylQubit(traj.x[0], traj.u_frame[0],
                        np.array([vals[0] + 1j * vals[1],
                                  vals[2] + 1j * vals[3]]))
    q0 = q0.normalized()
    omega = None
    if p["metric"] != "minkowski":
        omega = geometry.connection_field(metric, traj.tetrad)
    q1, T = ferm.transport(q0, traj, omega)
    rows = [
        ("initial", ferm.spinor_to_reals(q0)),
        ("final", ferm.spinor_to_reals(q1)),
        ("operator", ferm.operator_to_reals(T)),
    ]
    lines = ["label," + ",".join(f"v{i}" for i in range(8))]
    for label, arr in rows:
        lines.append(label + "," + ",".join(_fmt(v) for v in arr[:8]))
    Path(out).write_text("\n".join(lines) + "\n")


def _run_transport_photon(p, out):
    metric = _metric_from_params(p)
    tetrad = geometry.diagonal_tetrad(metric)
    if p["tetrad_rotation"] != 0.0:
        rot = geometry.rotation_lorentz([1.0, 0.0, 0.0], p["tetrad_rotation"])
        tetrad = geometry.transform_tetrad(tetrad, lambda x: rot,
                                           lambda x: np.zeros((4, 4, 4)))
    d = _floats(p["direction"])
    d = d / np.linalg.norm(d)
    k0_frame = np.concatenate([[1.0], d])
    k0 = tetrad.frame(np.zeros(4)) @ k0_frame
    traj = trajectories.integrate_null_geodesic(
        metric, np.zeros(4), k0, (0.0, p["span"]), p["span"] / p["steps"],
        tetrad=tetrad)
    omega = geometry.connection_field(metric, tetrad)
    jv = _floats(p["jones"])
    jones0 = np.array([jv[0] + 1j * jv[1], jv[2] + 1j * jv[3]])
    jones0 = jones0 / np.linalg.norm(jones0)
    q0 = photon_transport.jones_to_polarisation(jones0, traj.u_frame[0],
                                                traj.x[0])
    q1 = photon_transport.parallel_transport_polarisation(q0, traj, omega)
    theta = photon_transport.wigner_angle(traj, omega)
    jones1 = photon_transport.extract_jones(q1)
    lines = ["quantity,v0,v1,v2,v3",
             "jones_initial," + ",".join(_fmt(v) for v in
                                         [jones0[0].real, jones0[0].imag,
                                          jones0[1].real, jones0[1].imag]),
             "jones_final," + ",".join(_fmt(v) for v in
                                       [jones1[0].real, jones1[0].imag,
                                        jones1[1].real, jones1[1].imag]),
             "wigner_angle," + _fmt(theta) + ",0,0,0"]
    Path(out).write_text("\n".join(lines) + "\n")


def _run_measure(p, out):
    if p["state"]:
        vals = _floats(Path(p["state"]).read_text().strip().replace("\n", ","))
    else:
        vals = np.array([1.0, 0, 0, 0, 1, 0, 0, 0])
    q = ferm.spinor_from_reals(vals).normalized()
    m3 = _floats(p["m"])
    m3 = m3 / np.linalg.norm(m3)
    cfg = measurement.SternGerlachConfig(np.concatenate([[0.0], m3]),
                                         _floats(p["v"]), q.velocity)
    p_plus, p_minus, post_p, post_m = measurement.measure_spin(q, cfg)
    rec = {"p_plus": p_plus, "p_minus": p_minus,
           "post_plus": list(ferm.spinor_to_reals(post_p)[:4]),
           "post_minus": list(ferm.spinor_to_reals(post_m)[:4])}
    Path(out).write_text(json.dumps(rec, sort_keys=True) + "\n")


def _run_teleport(p, out):
    alpha = complex(p["alpha_re"], p["alpha_im"])
    beta = complex(p["beta_re"], p["beta_im"])
    norm = np.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    alpha, beta = alpha / norm, beta / norm
    M = p["M"]
    radii = [float(r) * M for r in p["radii"].split(",")]
    trajs = [trajectories.schwarzschild_circular_orbit(M, r, p["steps"],
                                                       p["turns"])
             for r in radii]
    metric = geometry.schwarzschild(M)
    omegas = [geometry.connection_field(metric, t.tetrad) for t in trajs]
    session = multiqubit.TeleportationSession.build(alpha, beta, trajs, omegas)
    probs = multiqubit.bell_probabilities(session)
    lines = []
    for label in multiqubit.BELL_LABELS:
        outcome, bob, fid = multiqubit.teleport(session, outcome=label)
        lines.append(json.dumps({
            "outcome": outcome, "probability": probs[label],
            "fidelity": fid,
            "bob_components": [bob[0].real, bob[0].imag,
                               bob[1].real, bob[1].imag]}, sort_keys=True))
    Path(out).write_text("\n".join(lines) + "\n")


def _system_rep_for(group, dim):
    if group == "u1":
        if dim != 2:
            return qrf.U1Rep(np.arange(dim, dtype=float))
        return qrf.u1_qubit_rep()
    return qrf.SU2Irrep((dim - 1) / 2.0)


def _run_qrf_decohere(p, out):
    frame = qrf.frame_state(p["frame"], p["size"])
    rep = _system_rep_for(p["group"], p["system_dim"])
    n = p["quadrature_n"]
    F = qrf.decoherence_map(frame, n, rep)
    if p["group"] == "u1":
        thetas, w = qrf.u1_haar_grid(n)
        elements, weights = qrf._frame_kernel(frame, n)
        kernel_rows = [(g, weights[i] / w[i]) for i, g in enumerate(elements)]
    else:
        elements, weights = qrf._frame_kernel(frame, max(8, min(n, 16)))
        kernel_rows = None
    d = rep.dim
    rho = np.full((d, d), 1.0 / d, dtype=complex)
    after = F(rho)
    lines = ["section,key,value_re,value_im"]
    if kernel_rows is not None:
        for g, k in kernel_rows:
            lines.append(f"kernel,{_fmt(g)},{_fmt(k)},0")
    for i in range(d):
        for jx in range(d):
            lines.append(f"rho_before,{i}{jx},{_fmt(rho[i, jx].real)},"
                         f"{_fmt(rho[i, jx].imag)}")
    for i in range(d):
        for jx in range(d):
            lines.append(f"rho_after,{i}{jx},{_fmt(after[i, jx].real)},"
                         f"{_fmt(after[i, jx].imag)}")
    Path(out).write_text("\n".join(lines) + "\n")


def _run_qrf_overlap(p, out):
    kind, size, n = p["kind"], p["size"], p["points"]
    lines = ["g,overlap"]
    if kind == "u1-phase-eigenstate":
        for g in np.linspace(-np.pi, np.pi, n):
            val = (size + 1) * qrf.u1_overlap(int(size), g)
            lines.append(f"{_fmt(g)},{_fmt(val)}")
    elif kind == "u1-coherent":
        frame = qrf.frame_state(kind, size)
        ket0 = frame.vector
        for g in np.linspace(-np.pi, np.pi, n):
            ov = np.vdot(frame.ml_ket(g), ket0)
            lines.append(f"{_fmt(g)},{_fmt(frame.rep.dim * abs(ov) ** 2)}")
    elif kind == "su2-fiducial":
        for om in np.linspace(0, np.pi, n):
            D = (2 * int(size) + 1) * (2 * int(size) + 3) * (int(size) + 1) / 3
            val = D * abs(qrf.su2_fiducial_overlap(int(size), om)) ** 2
            lines.append(f"{_fmt(om)},{_fmt(val)}")
    elif kind == "su2-coherent":
        for be in np.linspace(0, np.pi, n):
            val = (2 * size + 1) * np.cos(be / 2) ** (4 * size)
            lines.append(f"{_fmt(be)},{_fmt(val)}")
    else:
        raise ConfigError("kind", f"unknown frame kind {kind!r}")
    Path(out).write_text("\n".join(lines) + "\n")


def _run_bhd(p, out):
    lines = ["two_j,two_m,probability"]
    if p["kind"] == "coherent":
        a = qrf.frame_state("u1-coherent", p["amp_a"], p["phase_a"])
        b = qrf.frame_state("u1-coherent", p["amp_b"], p["phase_b"])
        for j, m, prob in qrf.bhd_coherent_grid(a, b):
            lines.append(f"{int(2 * j)},{int(2 * m)},{_fmt(prob)}")
    elif p["kind"] == "phase":
        for two_j in range(p["s_a"] + p["s_b"] + 2):
            prob = qrf.bhd_total_photon_probability(two_j / 2.0,
                                                    p["s_a"], p["s_b"])
            lines.append(f"{two_j},,{_fmt(prob)}")
    else:
        raise ConfigError("kind", f"unknown bhd kind {p['kind']!r}")
    Path(out).write_text("\n".join(lines) + "\n")


_RUNNERS = {
    "cow-table": _run_cow_table,
    "transport-fermion": _run_transport_fermion,
    "transport-photon": _run_transport_photon,
    "measure": _run_measure,
    "teleport": _run_teleport,
    "qrf-decohere": _run_qrf_decohere,
    "qrf-overlap": _run_qrf_overlap,
    "bhd": _run_bhd,
}


def run(cfg: RunConfig) -> int:
    """Execute a resolved configuration; returns the process exit status."""
    runner = _RUNNERS[cfg.command]
    runner(cfg.parameters, cfg.output_path)
    _write_manifest(cfg)
    return 0


def build_config(argv) -> RunConfig:
    if not argv:
        raise ConfigError("command", "usage: relqubits <command> [--config "
                          "FILE] [--out PATH] [--key value ...]")
    command = argv[0]
    raw = {}
    out = None
    i = 1
    while i < len(argv):
        tok = argv[i]
        if not tok.startswith("--"):
            raise ConfigError(tok, "expected --key value")
        key = tok[2:]
        if i + 1 >= len(argv):
            raise ConfigError(key, "missing value")
        value = argv[i + 1]
        i += 2
        if key == "config":
            raw.update(parse_config_file(value))
        elif key == "out":
            out = value
        else:
            raw[key] = value
    if out is None:
        out = raw.pop("out", f"{command}.csv")
    params = resolve_parameters(command, raw)
    return RunConfig(command, params, out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = build_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RelQubitsError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
