"""Command-line front end: scenario files in, reports and trajectories out.

Scenario files are plain text with [section] headers and key = value entries;
values may continue on indented lines (matrix rows). The full grammar is
documented in the README and the built-in default file (contain default).

Exit codes: 0 success / certified; 1 parse or input error; 2 standing-assumption
failure; 3 not controllable; 4 adaptive leakage too fast (varrho >= alpha);
5 bounds not certified by the run; 6 state diverged.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .control import (
    ADAPTIVE,
    CONTINUOUS_STATIC,
    DISCONTINUOUS_STATIC,
    KINDS,
    OBSERVER_BASED,
    ControllerConfig,
    LeaderInputSpec,
    LinearSystem,
    Sinusoid,
)
from .graph import (
    AssumptionViolated,
    BadAdjacency,
    NoFollower,
    NoLeader,
    Topology,
    build_topology,
    check_assumption1,
    partition_laplacian,
)
from .matlib import NotControllable, apply_tolerance_env, sym_eigs
from .sim import (
    Metrics,
    NonFiniteState,
    Scenario,
    Trajectory,
    compute_metrics,
    integrate,
)
from .synthesis import (
    BoundReport,
    GainSet,
    VarrhoTooLarge,
    compute_bound_report,
    compute_varrho,
    lmi_matrix,
    synthesize,
)


class ScenarioParseError(Exception):
    """Scenario file problem, with line/field context when known."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.message = message
        self.line = line
        self.field = field
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(field)
        parts.append(message)
        super().__init__(": ".join(parts))


# ---------------------------------------------------------------------------
# scenario text parsing


@dataclass
class _Value:
    fragments: list  # (text, line number) pairs

    @property
    def line(self) -> int:
        return self.fragments[0][1]

    def text(self) -> str:
        return " ".join(t for t, _ in self.fragments).strip()


def _parse_sections(text: str) -> dict:
    sections: dict = {}
    current_section = None
    current_key = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[0] not in " \t":
            current_key = None
        if stripped.startswith("["):
            if not (stripped.startswith("[") and stripped.endswith("]")):
                raise ScenarioParseError("malformed section header", line=lineno)
            name = stripped[1:-1].strip()
            if not name:
                raise ScenarioParseError("empty section name", line=lineno)
            if name in sections:
                raise ScenarioParseError(f"duplicate section [{name}]", line=lineno)
            sections[name] = {}
            current_section = name
            continue
        if raw[0] in " \t":
            # continuation of the previous key
            if current_section is None or current_key is None:
                raise ScenarioParseError("continuation line with no key", line=lineno)
            sections[current_section][current_key].fragments.append((stripped, lineno))
            continue
        if current_section is None:
            raise ScenarioParseError("content before any [section]", line=lineno)
        key, sep, value = raw.partition("=")
        if not sep:
            raise ScenarioParseError("expected key = value", line=lineno)
        key = key.strip()
        if not key:
            raise ScenarioParseError("empty key", line=lineno)
        if key in sections[current_section]:
            raise ScenarioParseError(
                f"duplicate key {key!r} in [{current_section}]", line=lineno
            )
        sections[current_section][key] = _Value([(value.strip(), lineno)])
        current_key = key
    return sections


def _get(sections, section, key) -> Optional[_Value]:
    return sections.get(section, {}).get(key)


def _require(sections, section, key) -> _Value:
    if section not in sections:
        raise ScenarioParseError(f"missing section [{section}]", field=section)
    value = sections[section].get(key)
    if value is None:
        raise ScenarioParseError(f"missing key {key!r}", field=f"[{section}]")
    return value


def _matrix(value: _Value, field: str) -> np.ndarray:
    rows = []
    width = None
    for text, lineno in value.fragments:
        for piece in text.split(";"):
            piece = piece.strip()
            if not piece:
                continue
            try:
                row = [float(tok) for tok in piece.split()]
            except ValueError:
                raise ScenarioParseError(
                    f"bad number in matrix row {piece!r}", line=lineno, field=field
                ) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ScenarioParseError(
                    f"ragged matrix row (expected {width} entries, got {len(row)})",
                    line=lineno,
                    field=field,
                )
            rows.append(row)
    if not rows:
        raise ScenarioParseError("empty matrix", line=value.line, field=field)
    return np.array(rows, dtype=float)


def _vector(value: _Value, field: str) -> np.ndarray:
    mat = _matrix(value, field)
    if mat.shape[0] != 1:
        raise ScenarioParseError(
            f"expected a single row, got {mat.shape[0]}", line=value.line, field=field
        )
    return mat[0]


def _scalar(value: _Value, field: str) -> float:
    try:
        return float(value.text())
    except ValueError:
        raise ScenarioParseError(
            f"bad number {value.text()!r}", line=value.line, field=field
        ) from None


def _sinusoids(value: _Value, field: str, n_channels: int) -> tuple:
    out = []
    text = value.text()
    if not text:
        return ()
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 4:
            raise ScenarioParseError(
                f"sinusoid must be channel:amplitude:omega:phase, got {item!r}",
                line=value.line,
                field=field,
            )
        try:
            channel = int(parts[0])
            amp, omega, phase = (float(p) for p in parts[1:])
        except ValueError:
            raise ScenarioParseError(
                f"bad sinusoid numbers in {item!r}", line=value.line, field=field
            ) from None
        if not 1 <= channel <= n_channels:
            raise ScenarioParseError(
                f"sinusoid channel {channel} out of range 1..{n_channels}",
                line=value.line,
                field=field,
            )
        out.append(Sinusoid(channel - 1, amp, omega, phase))
    return tuple(out)


@dataclass
class ParsedScenario:
    """A scenario file after parsing and overrides, before synthesis."""

    system: LinearSystem
    topology: Topology
    kind: str
    kappa: Optional[float]
    taus: Optional[np.ndarray]
    phis: Optional[np.ndarray]
    d0: Optional[np.ndarray]
    c1_scale: float
    c2_scale: float
    are_weight: Optional[np.ndarray]
    leader_specs: tuple          # canonical leader order
    x0_user: np.ndarray          # rows in file (user) order
    v0_user: Optional[np.ndarray]
    t_end: float
    h: float
    tail_fraction: float

    @property
    def gammas(self) -> list:
        return [spec.gamma for spec in self.leader_specs]


def parse_scenario(
    text: str,
    *,
    controller: Optional[str] = None,
    kappa: Optional[float] = None,
    h: Optional[float] = None,
    t_end: Optional[float] = None,
) -> ParsedScenario:
    """Parse scenario text and apply command-line overrides."""
    sections = _parse_sections(text)

    a = _matrix(_require(sections, "system", "A"), "[system].A")
    if a.shape[0] != a.shape[1]:
        raise ScenarioParseError(
            f"A must be square, got {a.shape}", field="[system].A"
        )
    n = a.shape[0]
    b = _matrix(_require(sections, "system", "B"), "[system].B")
    if b.shape[0] != n:
        raise ScenarioParseError(
            f"B must have {n} rows, got {b.shape[0]}", field="[system].B"
        )
    c_value = _get(sections, "system", "C")
    c = _matrix(c_value, "[system].C") if c_value is not None else np.eye(n)
    if c.shape[1] != n:
        raise ScenarioParseError(
            f"C must have {n} columns, got {c.shape[1]}", field="[system].C"
        )
    system = LinearSystem(A=a, B=b, C=c)

    adjacency = _matrix(_require(sections, "graph", "adjacency"), "[graph].adjacency")
    topology = build_topology(adjacency)
    m = topology.n_followers
    n_agents = topology.n_agents

    kind_value = _require(sections, "controller", "kind")
    kind = controller if controller is not None else kind_value.text()
    if kind not in KINDS:
        raise ScenarioParseError(
            f"unknown controller kind {kind!r} (one of {', '.join(KINDS)})",
            line=None if controller is not None else kind_value.line,
            field="[controller].kind",
        )

    kappa_value = _get(sections, "controller", "kappa")
    file_kappa = (
        _scalar(kappa_value, "[controller].kappa") if kappa_value is not None else None
    )
    eff_kappa = kappa if kappa is not None else file_kappa
    if kind == DISCONTINUOUS_STATIC:
        eff_kappa = None
    elif eff_kappa is None:
        raise ScenarioParseError(
            f"{kind} controller requires kappa", field="[controller].kappa"
        )
    elif eff_kappa <= 0.0:
        raise ScenarioParseError("kappa must be positive", field="[controller].kappa")

    taus = phis = d0 = None
    if kind == ADAPTIVE:
        taus = _vector(_require(sections, "controller", "taus"), "[controller].taus")
        phis = _vector(_require(sections, "controller", "phis"), "[controller].phis")
        d0_value = _get(sections, "controller", "d0")
        d0 = (
            _vector(d0_value, "[controller].d0")
            if d0_value is not None
            else np.zeros(m)
        )
        for name, vec in (("taus", taus), ("phis", phis), ("d0", d0)):
            if vec.shape != (m,):
                raise ScenarioParseError(
                    f"{name} must list one value per follower ({m}), got {vec.shape[0]}",
                    field=f"[controller].{name}",
                )

    def scale(key):
        value = _get(sections, "controller", key)
        return _scalar(value, f"[controller].{key}") if value is not None else 1.0

    c1_scale = scale("c1_scale")
    c2_scale = scale("c2_scale")
    weight_value = _get(sections, "controller", "are_weight")
    are_weight = (
        _matrix(weight_value, "[controller].are_weight")
        if weight_value is not None
        else None
    )

    if "leaders" not in sections:
        raise ScenarioParseError("missing section [leaders]", field="leaders")
    leader_keys = sections["leaders"]
    known = {}
    for key, value in leader_keys.items():
        label_text, sep, field_name = key.partition(".")
        if not sep or field_name not in ("gain", "sinusoids", "gamma"):
            raise ScenarioParseError(
                f"leader keys look like <label>.gain/.sinusoids/.gamma, got {key!r}",
                line=value.line,
                field="[leaders]",
            )
        try:
            label = int(label_text)
        except ValueError:
            raise ScenarioParseError(
                f"leader label {label_text!r} is not an integer",
                line=value.line,
                field="[leaders]",
            ) from None
        if label not in topology.leader_labels:
            raise ScenarioParseError(
                f"agent {label} is not a leader",
                line=value.line,
                field="[leaders]",
            )
        known.setdefault(label, {})[field_name] = value

    leader_specs = []
    for label in topology.leader_labels:
        fields = known.get(label, {})
        if "gamma" not in fields:
            raise ScenarioParseError(
                f"leader {label} needs a gamma declaration",
                field=f"[leaders].{label}.gamma",
            )
        gamma = _scalar(fields["gamma"], f"[leaders].{label}.gamma")
        if gamma <= 0.0:
            raise ScenarioParseError(
                "gamma must be positive", field=f"[leaders].{label}.gamma"
            )
        if "gain" in fields:
            gain = _matrix(fields["gain"], f"[leaders].{label}.gain")
            if gain.shape != (system.p, n):
                raise ScenarioParseError(
                    f"gain must be {system.p}x{n}, got {gain.shape[0]}x{gain.shape[1]}",
                    field=f"[leaders].{label}.gain",
                )
        else:
            gain = np.zeros((system.p, n))
        sins = (
            _sinusoids(fields["sinusoids"], f"[leaders].{label}.sinusoids", system.p)
            if "sinusoids" in fields
            else ()
        )
        leader_specs.append(
            LeaderInputSpec(feedback_gain=gain, sinusoids=sins, gamma=gamma)
        )

    x0 = _matrix(_require(sections, "sim", "x0"), "[sim].x0")
    if x0.shape != (n_agents, n):
        raise ScenarioParseError(
            f"x0 must be {n_agents}x{n} (one row per agent), got {x0.shape[0]}x{x0.shape[1]}",
            field="[sim].x0",
        )
    v0_value = _get(sections, "sim", "v0")
    v0 = _matrix(v0_value, "[sim].v0") if v0_value is not None else None
    if v0 is not None and v0.shape != (n_agents, n):
        raise ScenarioParseError(
            f"v0 must be {n_agents}x{n}, got {v0.shape[0]}x{v0.shape[1]}",
            field="[sim].v0",
        )
    if kind == OBSERVER_BASED and v0 is None:
        v0 = np.zeros((n_agents, n))

    def sim_scalar(key, default):
        value = _get(sections, "sim", key)
        return _scalar(value, f"[sim].{key}") if value is not None else default

    eff_t_end = t_end if t_end is not None else sim_scalar("t_end", 20.0)
    eff_h = h if h is not None else sim_scalar("h", 1e-3)
    tail_fraction = sim_scalar("tail_fraction", 0.2)
    if eff_h <= 0.0:
        raise ScenarioParseError("h must be positive", field="[sim].h")
    if eff_t_end < eff_h:
        raise ScenarioParseError("t_end must be at least h", field="[sim].t_end")
    if not 0.0 < tail_fraction <= 1.0:
        raise ScenarioParseError(
            "tail_fraction must be in (0, 1]", field="[sim].tail_fraction"
        )

    return ParsedScenario(
        system=system,
        topology=topology,
        kind=kind,
        kappa=eff_kappa,
        taus=taus,
        phis=phis,
        d0=d0,
        c1_scale=c1_scale,
        c2_scale=c2_scale,
        are_weight=are_weight,
        leader_specs=tuple(leader_specs),
        x0_user=x0,
        v0_user=v0,
        t_end=eff_t_end,
        h=eff_h,
        tail_fraction=tail_fraction,
    )


def load_scenario(path: str, **overrides) -> ParsedScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), **overrides)


# ---------------------------------------------------------------------------
# runtime assembly


def _controller_config(parsed: ParsedScenario, gains: GainSet) -> ControllerConfig:
    if parsed.kind == ADAPTIVE:
        return ControllerConfig(
            kind=parsed.kind,
            gains=gains,
            kappa=parsed.kappa,
            taus=parsed.taus,
            phis=parsed.phis,
            d0=parsed.d0,
        )
    if parsed.kind == DISCONTINUOUS_STATIC:
        return ControllerConfig(kind=parsed.kind, gains=gains)
    return ControllerConfig(kind=parsed.kind, gains=gains, kappa=parsed.kappa)


def _build_scenario(parsed: ParsedScenario, gains: GainSet) -> Scenario:
    perm = list(parsed.topology.user_positions)
    x0 = parsed.x0_user[perm]
    v0 = None
    if parsed.kind == OBSERVER_BASED:
        v0 = parsed.v0_user[perm]
    return Scenario(
        system=parsed.system,
        topology=parsed.topology,
        controller=_controller_config(parsed, gains),
        leader_specs=parsed.leader_specs,
        x0=x0,
        v0=v0,
        t_end=parsed.t_end,
        h=parsed.h,
    )


def _synthesize(parsed: ParsedScenario, part) -> GainSet:
    return synthesize(
        parsed.system,
        part,
        parsed.gammas,
        are_weight=parsed.are_weight,
        c1_scale=parsed.c1_scale,
        c2_scale=parsed.c2_scale,
        with_observer=parsed.kind == OBSERVER_BASED,
    )


# ---------------------------------------------------------------------------
# output formatting


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _fmt_matrix(mat: np.ndarray, indent: str = "  ") -> str:
    lines = []
    for row in np.atleast_2d(mat):
        lines.append(indent + "  ".join(f"{v: .6g}" for v in row))
    return "\n".join(lines)


def _user_order(topology: Topology):
    """(canonical index, label) pairs in original file order."""
    inverse = [0] * topology.n_agents
    for canon, upos in enumerate(topology.user_positions):
        inverse[upos] = canon
    return [(inverse[upos], topology.labels[inverse[upos]]) for upos in range(topology.n_agents)]


def trajectory_header(topology: Topology, system: LinearSystem, traj: Trajectory) -> list:
    n = system.n
    p = system.p
    m = topology.n_followers
    header = ["t"]
    order = _user_order(topology)
    for canon, label in order:
        for comp in range(1, n + 1):
            header.append(f"x{label}_{comp}")
    for canon, label in order:
        if canon < m:
            for ch in range(1, p + 1):
                header.append(f"u{label}_{ch}")
    header.append("xi_norm")
    header.append("v1")
    if traj.adaptive_gains is not None:
        header.extend(f"d_{i}" for i in range(1, m + 1))
    if traj.observer_states is not None:
        for canon, label in order:
            for comp in range(1, n + 1):
                header.append(f"v{label}_{comp}")
    return header


def _trajectory_columns(topology: Topology, system: LinearSystem, traj: Trajectory) -> list:
    n = system.n
    p = system.p
    m = topology.n_followers
    order = _user_order(topology)
    cols = [traj.times]
    for canon, _label in order:
        for comp in range(n):
            if canon < m:
                cols.append(traj.follower_states[:, canon, comp])
            else:
                cols.append(traj.leader_states[:, canon - m, comp])
    for canon, _label in order:
        if canon < m:
            for ch in range(p):
                cols.append(traj.follower_inputs[:, canon, ch])
    cols.append(traj.xi_norm)
    cols.append(traj.v1)
    if traj.adaptive_gains is not None:
        for i in range(m):
            cols.append(traj.adaptive_gains[:, i])
    if traj.observer_states is not None:
        for canon, _label in order:
            for comp in range(n):
                cols.append(traj.observer_states[:, canon, comp])
    return cols


def write_trajectory_csv(path: str, topology: Topology, system: LinearSystem, traj: Trajectory) -> list:
    """Write the CSV; values use shortest round-trip decimals. Returns the header."""
    header = trajectory_header(topology, system, traj)
    cols = _trajectory_columns(topology, system, traj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(traj.times)):
            fh.write(",".join(repr(float(col[k])) for col in cols) + "\n")
    return header


def write_metrics(
    path: str,
    parsed: ParsedScenario,
    gains: GainSet,
    part,
    bounds: BoundReport,
    metrics: Metrics,
    traj: Trajectory,
    certified: bool,
) -> None:
    lines = [
        f"kind = {parsed.kind}",
        f"steps = {len(traj.times)}",
        f"h = {parsed.h!r}",
        f"t_end = {parsed.t_end!r}",
        f"alpha = {gains.alpha!r}",
        f"lambda_min_L1 = {part.lambda_min_L1!r}",
        f"beta = {bounds.beta!r}",
        f"envelope_offset = {bounds.envelope_offset!r}",
        f"d1_radius_sq = {bounds.d1_radius_sq!r}",
        f"tail_sup_xi_sq = {metrics.tail_sup_xi_sq!r}",
        f"d1_certified = {metrics.d1_certified}",
    ]
    if parsed.kind == ADAPTIVE:
        varrho = (
            bounds.varrho
            if bounds.varrho is not None
            else compute_varrho(parsed.phis, parsed.taus)
        )
        lines.append(f"varrho = {varrho!r}")
        if bounds.d2_radius_sq is not None:
            lines.append(f"d2_radius_sq = {bounds.d2_radius_sq!r}")
            lines.append(f"d2_certified = {metrics.d2_certified}")
        else:
            lines.append("d2_radius_sq = uncertifiable (varrho >= alpha)")
            lines.append("d2_certified = False")
        lines.append(f"d_sup = {metrics.d_sup!r}")
    lines.append(f"envelope_violations = {metrics.envelope_violations}")
    lines.append(f"chattering_index = {metrics.chattering_index!r}")
    lines.append(f"assumption2_violations = {traj.assumption2_violations}")
    lines.append(f"verdict = {'certified' if certified else 'not certified'}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_plot_script(path: str, header: list, topology: Topology, system: LinearSystem) -> None:
    """gnuplot script: one panel per state component, plus adaptive gains."""
    n = system.n
    m = topology.n_followers
    order = _user_order(topology)
    col = {name: idx + 1 for idx, name in enumerate(header)}
    d_names = [name for name in header if name.startswith("d_")]
    panels = n + (1 if d_names else 0)

    lines = [
        "# gnuplot script generated alongside trajectory.csv",
        'set datafile separator ","',
        "set terminal pngcairo size 1100,%d" % (340 * panels),
        'set output "trajectory.png"',
        "set grid",
        "set key outside right",
        "set multiplot layout %d,1" % panels,
        'set xlabel "t [s]"',
    ]
    for comp in range(1, n + 1):
        lines.append(f'set title "state component {comp} (followers dash-dot, leaders solid)"')
        series = []
        for canon, label in order:
            name = f"x{label}_{comp}"
            dash = 4 if canon < m else 1
            series.append(
                f'"trajectory.csv" using 1:{col[name]} with lines dashtype {dash} '
                f'title "{name}"'
            )
        lines.append("plot " + ", \\\n     ".join(series))
    if d_names:
        lines.append('set title "adaptive coupling gains"')
        series = [
            f'"trajectory.csv" using 1:{col[name]} with lines title "{name}"'
            for name in d_names
        ]
        lines.append("plot " + ", \\\n     ".join(series))
    lines.append("unset multiplot")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(path: str, **overrides) -> int:
    parsed = load_scenario(path, **overrides)
    topo = parsed.topology
    print(f"agents: {topo.n_agents} (followers {topo.n_followers}, leaders {topo.n_leaders})")
    print("follower labels:", " ".join(str(x) for x in topo.follower_labels))
    print("leader labels:", " ".join(str(x) for x in topo.leader_labels))
    report = check_assumption1(topo)
    if not report.follower_subgraph_undirected:
        pairs = ", ".join(f"{a}<->{b}" for a, b in report.asymmetric_pairs)
        print(f"assumption check: FAIL (asymmetric follower pairs: {pairs})")
        return 2
    if report.unreachable_followers:
        missing = ", ".join(str(x) for x in report.unreachable_followers)
        print(f"assumption check: FAIL (no leader reaches followers: {missing})")
        return 2
    print("assumption check: PASS (undirected follower subgraph, all followers leader-reachable)")
    part = partition_laplacian(topo)
    print(f"lambda_min(L1) = {_fmt(part.lambda_min_L1)}")
    row_sums = part.W.sum(axis=1)
    print("W row sums:", " ".join(_fmt(v) for v in row_sums))
    w_min = float(part.W.min())
    if -1e-12 <= w_min < 0.0:
        w_min = 0.0  # clamp elimination dust for the report
    print(f"W min entry = {_fmt(w_min)}")
    return 0


def _gains_sidecar_path(scenario_path: str) -> str:
    stem, _ext = os.path.splitext(scenario_path)
    return stem + ".gains.json"


def cmd_synth(path: str, **overrides) -> int:
    parsed = load_scenario(path, **overrides)
    part = partition_laplacian(parsed.topology)
    gains = _synthesize(parsed, part)
    lmi_max = float(sym_eigs(lmi_matrix(parsed.system.A, parsed.system.B, gains.P)).values[-1])
    print("P =")
    print(_fmt_matrix(gains.P))
    print("K =")
    print(_fmt_matrix(gains.K))
    print("Gamma =")
    print(_fmt_matrix(gains.Gamma))
    print(f"c1 = {_fmt(gains.c1)}  (lambda_min(L1) = {_fmt(part.lambda_min_L1)})")
    print(f"c2 = {_fmt(gains.c2)}")
    print(f"alpha = {_fmt(gains.alpha)}")
    print(f"lambda_max(A P + P A' - 2 B B') = {_fmt(lmi_max)}  (certificate: < 0)")
    if gains.L_obs is not None:
        print("L_obs =")
        print(_fmt_matrix(gains.L_obs))
    sidecar = _gains_sidecar_path(path)
    payload = {
        "P": gains.P.tolist(),
        "K": gains.K.tolist(),
        "Gamma": gains.Gamma.tolist(),
        "c1": gains.c1,
        "c2": gains.c2,
        "alpha": gains.alpha,
        "lmi_lambda_max": lmi_max,
        "L_obs": None if gains.L_obs is None else gains.L_obs.tolist(),
    }
    try:
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"gains written to {sidecar}")
    except OSError as exc:
        print(f"warning: could not write {sidecar}: {exc}", file=sys.stderr)
    return 0


def cmd_bound(path: str, **overrides) -> int:
    parsed = load_scenario(path, **overrides)
    part = partition_laplacian(parsed.topology)
    gains = _synthesize(parsed, part)
    bounds = compute_bound_report(
        gains,
        part,
        parsed.topology.n_followers,
        parsed.kappa,
        parsed.gammas,
        phis=parsed.phis,
        taus=parsed.taus,
    )
    print(f"alpha = {_fmt(gains.alpha)}")
    print(f"envelope offset b/alpha = {_fmt(bounds.envelope_offset)}")
    print(f"D1 radius^2 = {_fmt(bounds.d1_radius_sq)}")
    if parsed.kind == ADAPTIVE:
        print(f"beta = {_fmt(bounds.beta)}")
        print(f"varrho = {_fmt(bounds.varrho)}")
        print(f"D2 radius^2 = {_fmt(bounds.d2_radius_sq)}")
    return 0


def cmd_simulate(path: str, out_dir: str, **overrides) -> int:
    parsed = load_scenario(path, **overrides)
    part = partition_laplacian(parsed.topology)
    gains = _synthesize(parsed, part)

    d2_uncertifiable = False
    try:
        bounds = compute_bound_report(
            gains,
            part,
            parsed.topology.n_followers,
            parsed.kappa,
            parsed.gammas,
            phis=parsed.phis,
            taus=parsed.taus,
        )
    except VarrhoTooLarge as exc:
        print(f"note: {exc}")
        d2_uncertifiable = True
        bounds = compute_bound_report(
            gains,
            part,
            parsed.topology.n_followers,
            parsed.kappa,
            parsed.gammas,
        )

    scn = _build_scenario(parsed, gains)
    traj = integrate(scn, gains, part)
    metrics = compute_metrics(
        traj, bounds, gains, part, scn.controller, tail_fraction=parsed.tail_fraction
    )

    if parsed.kind == CONTINUOUS_STATIC:
        certified = metrics.d1_certified
    elif parsed.kind == ADAPTIVE:
        certified = bool(metrics.d2_certified) and not d2_uncertifiable
    else:
        # The ideal discontinuous law and the observer-based law assert no
        # finite residual radius; nothing to gate on.
        certified = True

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "trajectory.csv")
    header = write_trajectory_csv(csv_path, parsed.topology, parsed.system, traj)
    write_metrics(
        os.path.join(out_dir, "metrics.txt"),
        parsed, gains, part, bounds, metrics, traj, certified,
    )
    write_plot_script(
        os.path.join(out_dir, "plot.gp"), header, parsed.topology, parsed.system
    )

    print(f"integrated {len(traj.times)} steps of h = {parsed.h} ({parsed.kind})")
    print(f"tail sup |xi|^2 = {_fmt(metrics.tail_sup_xi_sq)}")
    print(f"D1 radius^2 = {_fmt(bounds.d1_radius_sq)} (certified: {metrics.d1_certified})")
    if parsed.kind == ADAPTIVE:
        if bounds.d2_radius_sq is not None:
            print(
                f"D2 radius^2 = {_fmt(bounds.d2_radius_sq)} "
                f"(certified: {metrics.d2_certified})"
            )
        else:
            print("D2 radius^2: uncertifiable (varrho >= alpha)")
        print(f"d_sup = {_fmt(metrics.d_sup)}")
    print(f"envelope violations = {metrics.envelope_violations}")
    print(f"chattering index = {_fmt(metrics.chattering_index)}")
    print(f"leader bound violations = {traj.assumption2_violations}")
    print(f"wrote {csv_path}, metrics.txt, plot.gp")
    print(f"verdict: {'certified' if certified else 'not certified'}")
    return 0 if certified else 5


def default_scenario() -> str:
    """The built-in 8-agent scenario file (6-follower ring, 2 bounded leaders)."""
    half_pi = repr(math.pi / 2)
    return f"""\
# Default containment scenario: eight agents with identical second-order
# oscillatory dynamics. Followers 1-6 form an undirected ring; leader 7 feeds
# followers 1 and 2, leader 8 feeds followers 4 and 5 (this topology is a
# choice of this tool, made to satisfy the standing assumption).
# Matrix values: rows separated by ';' or by indented continuation lines.

[system]
A = 0 1; -1 1
B = 0; 1
C = 1 0; 0 1

[graph]
adjacency =
    0 1 0 0 0 1 1 0
    1 0 1 0 0 0 1 0
    0 1 0 1 0 0 0 0
    0 0 1 0 1 0 0 1
    0 0 0 1 0 1 0 1
    1 0 0 0 1 0 0 0
    0 0 0 0 0 0 0 0
    0 0 0 0 0 0 0 0

[controller]
kind = adaptive
kappa = 0.1
taus = 5 5 5 5 5 5
phis = 0.005 0.005 0.005 0.005 0.005 0.005
d0 = 0 0 0 0 0 0
# weight chosen so the closed loop settles well before the tail window;
# the identity weight leaves a slow zero near -0.15 that dominates for ~30s
are_weight = 4 0; 0 1

[leaders]
# sinusoids are channel:amplitude:omega:phase with 1-based channels;
# 2cos(t) is encoded as 2sin(t + pi/2).
7.gain = 0 -2
7.sinusoids = 1:4:2:0
7.gamma = 6
8.gain = -1 -3
8.sinusoids = 1:2:1:{half_pi}
8.gamma = 4

[sim]
x0 =
    0.5 -0.5
    1 -1
    1.5 -1.5
    2 -2
    2.5 -2.5
    3 -3
    1 0
    -1 0
t_end = 20
h = 0.001
"""


def cmd_default(out: Optional[str]) -> int:
    text = default_scenario()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contain",
        description="Containment control for linear multi-agent systems with bounded-input leaders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("scenario", help="scenario file path")
        sp.add_argument("--controller", choices=KINDS, help="override controller kind")
        sp.add_argument("--kappa", type=float, help="override boundary-layer width")
        sp.add_argument("--h", type=float, help="override step size [s]")
        sp.add_argument("--t-end", dest="t_end", type=float, help="override horizon [s]")

    add_common(sub.add_parser("validate", help="check topology and standing assumptions"))
    add_common(sub.add_parser("synth", help="synthesize gains and print certificates"))
    add_common(sub.add_parser("bound", help="compute residual-set radii"))
    sim = sub.add_parser("simulate", help="run the closed loop and write outputs")
    add_common(sim)
    sim.add_argument("--out", default=".", help="output directory (default: .)")
    dflt = sub.add_parser("default", help="emit the built-in default scenario file")
    dflt.add_argument("--out", default=None, help="write to this path instead of stdout")
    return parser


def main(argv=None) -> int:
    apply_tolerance_env()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "default":
            return cmd_default(args.out)
        overrides = dict(
            controller=args.controller,
            kappa=args.kappa,
            h=args.h,
            t_end=args.t_end,
        )
        if args.command == "validate":
            return cmd_validate(args.scenario, **overrides)
        if args.command == "synth":
            return cmd_synth(args.scenario, **overrides)
        if args.command == "bound":
            return cmd_bound(args.scenario, **overrides)
        if args.command == "simulate":
            return cmd_simulate(args.scenario, args.out, **overrides)
        raise AssertionError(f"unhandled command {args.command}")
    except ScenarioParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    except BadAdjacency as exc:
        print(f"bad adjacency: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except (NoLeader, NoFollower, AssumptionViolated) as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return 2
    except NotControllable as exc:
        print(f"not controllable: {exc}", file=sys.stderr)
        return 3
    except VarrhoTooLarge as exc:
        print(f"adaptive leakage too fast: {exc}", file=sys.stderr)
        return 4
    except NonFiniteState as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 6


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
