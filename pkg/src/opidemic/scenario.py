"""Run orchestration: initial conditions, main loop, popularity replay, CSV output.

A run advances the opinion step and the epidemic step under one adaptive
clock, records the opinion-weighted source F at every accepted step, and
afterwards replays the popularity equation against that series on its own
clock.  All artifacts are plain CSV with deterministic names and 17
significant digits, so identical configurations produce byte-identical
output trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Rectangle, ScenarioConfig
from .diagnostics import default_prominence, detect_waves, hellinger, l1_distance, relative_entropy
from .epidemic import effective_R, split_step
from .equilibria import (
    beta_equilibrium,
    global_sir_equilibrium,
    inverse_gamma_equilibrium,
    sample_beta_equilibrium,
)
from .errors import ConfigurationError, DomainError
from .graphon import GraphonLattice
from .grid import (
    COMPARTMENTS,
    CompartmentField,
    PhaseGrid,
    functional_F,
    functional_H,
    integrate_phase,
    moments,
    snap_threshold,
)
from .opinion_fp import VariantKind, assemble_coefficients, cfl_dt
from .popularity import PopularityField, PopularityRun, adapt_grid, run_popularity

FMT = "%.17g"


def _coverage(nodes: np.ndarray, spacing: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each node's dual cell covered by [lo, hi].

    Makes trapezoid masses of rectangle indicators exact, including
    rectangles whose edges fall between nodes.
    """
    half = spacing / 2.0
    cell_lo = np.maximum(nodes - half, nodes[0])
    cell_hi = np.minimum(nodes + half, nodes[-1])
    overlap = np.minimum(cell_hi, hi) - np.maximum(cell_lo, lo)
    return np.clip(overlap, 0.0, None) / (cell_hi - cell_lo)


def build_initial_condition(config: ScenarioConfig, grid: PhaseGrid) -> CompartmentField:
    """Piecewise-constant data renormalized to the exact target masses."""
    state = CompartmentField.zeros(grid)
    index = {J: k for k, J in enumerate(COMPARTMENTS)}
    for rect in config.rectangles:
        cov_x = _coverage(grid.x, grid.dx, rect.x_lo, rect.x_hi)
        cov_w = _coverage(grid.w, grid.dw, rect.w_lo, rect.w_hi)
        state.data[index[rect.compartment]] += rect.weight * np.outer(cov_x, cov_w)
    for J, k in index.items():
        target = config.rho_targets[J]
        mass = integrate_phase(grid, state.data[k])
        if target == 0.0:
            state.data[k][:] = 0.0
            continue
        if mass <= 0.0:
            raise ConfigurationError(f"initial condition for {J} has empty support")
        state.data[k] *= target / mass
    return state


@dataclass
class RunArtifacts:
    config: ScenarioConfig
    grid: PhaseGrid
    lattice: GraphonLattice
    w_hat: float
    times: np.ndarray
    series: dict[str, np.ndarray]
    F_times: np.ndarray
    F_values: np.ndarray
    snapshots: dict[float, np.ndarray]
    diagnostics: list[tuple[float, str, float]]
    pop_run: PopularityRun | None
    pop_grid: tuple[int, float] | None
    n_steps: int
    dt_min: float
    dt_max_seen: float
    final_state: CompartmentField


def _source(state, lattice, w_hat, above: bool) -> float:
    return functional_F(state, lattice, w_hat, above)


def run_scenario(config: ScenarioConfig) -> RunArtifacts:
    grid = PhaseGrid(config.n_x, config.n_w)
    lattice = GraphonLattice(config.graphon, grid.x)
    state = build_initial_condition(config, grid)
    w_hat = snap_threshold(grid, config.w_hat)

    mom0 = moments(state, lattice)
    H0 = functional_H(state, lattice)

    equilibrium = None
    if "l1_equilibrium" in config.diagnostics or "entropy" in config.diagnostics or "hellinger" in config.diagnostics:
        if config.epi.alpha == 0.0 and config.variant.kind is VariantKind.SIMPLIFIED_PROPENSITY:
            equilibrium = global_sir_equilibrium(state, mom0, config.epi, config.variant, lattice)
        else:
            raise ConfigurationError(
                "equilibrium-based diagnostics need alpha=0 and the simplified variant"
            )

    times = [0.0]
    cols = ("rho_S", "rho_I", "rho_R", "m_S", "m_I", "m_R", "m", "R_eff", "F")
    series: dict[str, list[float]] = {c: [] for c in cols}
    diag_rows: list[tuple[float, str, float]] = []
    snapshots: dict[float, np.ndarray] = {}
    pending_snaps = sorted(config.snapshot_times)

    def record(t: float, st: CompartmentField):
        mom = moments(st, lattice)
        F = _source(st, lattice, w_hat, config.indicator_above)
        for J in COMPARTMENTS:
            series[f"rho_{J}"].append(mom.rho[J])
            series[f"m_{J}"].append(mom.m[J])
        series["m"].append(mom.m_total)
        series["R_eff"].append(effective_R(mom, config.epi))
        series["F"].append(F)
        if "conservation" in config.diagnostics:
            total = sum(mom.rho.values())
            diag_rows.append((t, "mass_drift", total - sum(mom0.rho.values())))
            diag_rows.append((t, "mean_drift", mom.m_total - mom0.m_total))
            diag_rows.append((t, "weighted_mass_drift", mom.rho_ptilde - mom0.rho_ptilde))
            diag_rows.append((t, "weighted_mean_drift", mom.m_ptilde - mom0.m_ptilde))
            H = functional_H(st, lattice)
            diag_rows.append((t, "H_drift", float(np.max(np.abs(H - H0)))))
        if equilibrium is not None:
            if "l1_equilibrium" in config.diagnostics:
                wq = grid.quad_weights_interior
                for k, J in enumerate(COMPARTMENTS):
                    diag_rows.append(
                        (t, f"l1_{J}", l1_distance(st.data[k], equilibrium.data[k], wq))
                    )
            rho_S = mom.rho["S"]
            if rho_S > 0.0 and ("entropy" in config.diagnostics or "hellinger" in config.diagnostics):
                # local S equilibrium: current mass times the unit beta profile
                local_eq = equilibrium.data[0] * (rho_S / integrate_phase(grid, equilibrium.data[0]))
                wq = grid.quad_weights_interior
                if "entropy" in config.diagnostics:
                    diag_rows.append((t, "entropy_S", relative_entropy(st.data[0], local_eq, wq)))
                if "hellinger" in config.diagnostics:
                    diag_rows.append((t, "hellinger_S", hellinger(st.data[0], local_eq, wq)))

    record(0.0, state)
    F_times = [0.0]
    F_values = [series["F"][0]]
    while pending_snaps and pending_snaps[0] <= 0.0:
        snapshots[pending_snaps.pop(0)] = state.data.copy()

    t = 0.0
    n_steps = 0
    dt_lo, dt_hi = np.inf, 0.0
    next_record = config.output_interval
    while t < config.T - 1e-12:
        coeffs = assemble_coefficients(state, config.variant, lattice)
        dt = cfl_dt(coeffs, grid, config.safety, config.dt_max)
        dt = min(dt, config.T - t)
        state = split_step(state, coeffs, config.epi, dt)
        t += dt
        n_steps += 1
        dt_lo = min(dt_lo, dt)
        dt_hi = max(dt_hi, dt)
        F_times.append(t)
        F_values.append(_source(state, lattice, w_hat, config.indicator_above))
        if t >= next_record - 1e-12 or t >= config.T - 1e-12:
            times.append(t)
            record(t, state)
            while next_record <= t + 1e-12:
                next_record += config.output_interval
        while pending_snaps and t >= pending_snaps[0] - 1e-12:
            snapshots[pending_snaps.pop(0)] = state.data.copy()

    if "waves" in config.diagnostics:
        rho_I = np.array(series["rho_I"])
        for t_peak, peak in detect_waves(np.array(times), rho_I, default_prominence(rho_I)):
            diag_rows.append((t_peak, "wave_peak", peak))

    pop_run = None
    pop_grid = None
    if config.popularity_enabled:
        F_arr = np.array(F_values)
        F_max = float(F_arr.max())
        if F_max <= 0.0:
            raise DomainError("popularity enabled but the source F vanished for the whole run")
        p = config.popularity
        n_v, L = adapt_grid(config.grid_policy, p.mu, p.zeta2, p.theta, F_max)
        pop_grid = (n_v, L)
        F0 = F_values[0] if F_values[0] > 0.0 else F_max
        eq0 = inverse_gamma_equilibrium(F0, p.mu, p.zeta2, p.theta)
        fld = PopularityField(L, n_v, np.zeros(n_v + 1), p)
        fld.h = eq0.sample_on_grid(fld.v, fld.dv)
        pop_run = run_popularity(
            fld,
            np.array(F_times),
            F_arr,
            config.T,
            safety=config.safety,
            output_interval=config.output_interval,
            snapshot_times=tuple(config.snapshot_times),
        )

    return RunArtifacts(
        config=config,
        grid=grid,
        lattice=lattice,
        w_hat=w_hat,
        times=np.array(times),
        series={k: np.array(v) for k, v in series.items()},
        F_times=np.array(F_times),
        F_values=np.array(F_values),
        snapshots=snapshots,
        diagnostics=diag_rows,
        pop_run=pop_run,
        pop_grid=pop_grid,
        n_steps=n_steps,
        dt_min=float(dt_lo) if n_steps else 0.0,
        dt_max_seen=float(dt_hi),
        final_state=state,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(FMT % v for v in row))
    path.write_text("\n".join(lines) + "\n")


def _snapshot_rows(grid: PhaseGrid, data: np.ndarray):
    for i, xv in enumerate(grid.x):
        for j, wv in enumerate(grid.w):
            yield (xv, wv, data[0, i, j], data[1, i, j], data[2, i, j])


def emit_csv(art: RunArtifacts, out_dir) -> list[Path]:
    """Write every artifact under out_dir; returns the created files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    cols = ("rho_S", "rho_I", "rho_R", "m_S", "m_I", "m_R", "m", "R_eff", "F")
    rows = zip(art.times, *(art.series[c] for c in cols))
    path = out / "moments.csv"
    _write_csv(path, ["t", *cols], rows)
    created.append(path)

    path = out / "f_series.csv"
    _write_csv(path, ["t", "F"], zip(art.F_times, art.F_values))
    created.append(path)

    if art.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for t_req in sorted(art.snapshots):
            path = snap_dir / f"t_{t_req:.6f}.csv"
            _write_csv(path, ["x", "w", "f_S", "f_I", "f_R"], _snapshot_rows(art.grid, art.snapshots[t_req]))
            created.append(path)

    if art.diagnostics:
        path = out / "diagnostics.csv"
        lines = ["t,metric,value"]
        for t, name, value in art.diagnostics:
            lines.append(f"{FMT % t},{name},{FMT % value}")
        path.write_text("\n".join(lines) + "\n")
        created.append(path)

    if art.pop_run is not None:
        path = out / "popularity.csv"
        _write_csv(path, ["t", "m_p", "e_p"], zip(art.pop_run.times, art.pop_run.m_p, art.pop_run.e_p))
        created.append(path)
        if art.pop_run.snapshots:
            snap_dir = out / "snapshots"
            snap_dir.mkdir(exist_ok=True)
            v = art.pop_run.final.v
            for t_req in sorted(art.pop_run.snapshots):
                path = snap_dir / f"pop_t_{t_req:.6f}.csv"
                _write_csv(path, ["v", "h"], zip(v, art.pop_run.snapshots[t_req]))
                created.append(path)

    manifest = out / "manifest.txt"
    lines = ["[config]"]
    lines += [f"{k}={v}" for k, v in art.config.effective.items()]
    lines.append("[run]")
    lines.append(f"nodes_x={art.grid.N_x + 1}")
    lines.append(f"nodes_w={art.grid.N_w + 1}")
    lines.append(f"steps={art.n_steps}")
    lines.append(f"dt_min={FMT % art.dt_min}")
    lines.append(f"dt_max_seen={FMT % art.dt_max_seen}")
    lines.append(f"simulated_time={FMT % (art.F_times[-1] if len(art.F_times) else 0.0)}")
    lines.append(f"w_hat_snapped={FMT % art.w_hat}")
    if art.pop_grid is not None:
        lines.append(f"popularity_N_v={art.pop_grid[0]}")
        lines.append(f"popularity_L={FMT % art.pop_grid[1]}")
    manifest.write_text("\n".join(lines) + "\n")
    created.append(manifest)
    return created


def emit_equilibrium(config: ScenarioConfig, out_dir) -> list[Path]:
    """Write the analytic equilibria for a configuration (no time stepping)."""
    grid = PhaseGrid(config.n_x, config.n_w)
    lattice = GraphonLattice(config.graphon, grid.x)
    state = build_initial_condition(config, grid)
    mom0 = moments(state, lattice)
    eq = global_sir_equilibrium(state, mom0, config.epi, config.variant, lattice)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = []
    path = out / "equilibrium.csv"
    _write_csv(path, ["x", "w", "f_S", "f_I", "f_R"], _snapshot_rows(grid, eq.data))
    created.append(path)
    if config.popularity_enabled:
        w_hat = snap_threshold(grid, config.w_hat)
        eq_state = CompartmentField(grid, eq.data)
        F_inf = _source(eq_state, lattice, w_hat, config.indicator_above)
        p = config.popularity
        ig = inverse_gamma_equilibrium(F_inf, p.mu, p.zeta2, p.theta)
        n_v, L = adapt_grid(config.grid_policy, p.mu, p.zeta2, p.theta, F_inf)
        v = np.linspace(0.0, L, n_v + 1)
        h = ig.sample_on_grid(v, L / n_v)
        path = out / "popularity_equilibrium.csv"
        _write_csv(path, ["v", "h"], zip(v, h))
        created.append(path)
    return created


def load_snapshot(path, grid: PhaseGrid) -> CompartmentField:
    """Read a snapshot CSV back onto a grid of the expected shape."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    expected = (grid.N_x + 1) * (grid.N_w + 1)
    if raw.shape[0] != expected:
        raise ConfigurationError(
            f"snapshot has {raw.shape[0]} rows, expected {expected} for this grid"
        )
    data = raw[:, 2:5].T.reshape(3, grid.N_x + 1, grid.N_w + 1)
    return CompartmentField(grid, data.copy())
