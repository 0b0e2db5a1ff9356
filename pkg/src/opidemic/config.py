"""Plain-text key=value configuration, scenario presets, and validation.

The format is flat: one ``section.key=value`` per line, ``#`` comments.
A ``preset=<name>`` line expands to the full parameter table of one of
the bundled scenarios; explicit keys override preset values.  Every
default is materialized at load time so the manifest can echo the
complete effective configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .graphon import GraphonKind, GraphonSpec
from .opinion_fp import KernelKind, ModelVariant, VariantKind
from .epidemic import EpiParams
from .popularity import GridPolicy, PopularityParams


@dataclass(frozen=True)
class Rectangle:
    compartment: str
    x_lo: float
    x_hi: float
    w_lo: float
    w_hi: float
    weight: float

    def __post_init__(self):
        if self.compartment not in ("S", "I", "R"):
            raise ConfigurationError(f"unknown compartment {self.compartment!r}")
        if self.weight < 0.0:
            raise ConfigurationError("rectangle weight must be nonnegative")
        if self.x_lo > self.x_hi or self.w_lo > self.w_hi:
            raise ConfigurationError("rectangle bounds must be ordered")


# Scenario tables. Rectangles are (compartment, x_lo, x_hi, w_lo, w_hi, weight);
# per-compartment masses are renormalized to the rho targets after sampling.
_UNIFORM_I_R = [
    ("I", 0.0, 1.0, -1.0, 1.0, 1.0),
    ("R", 0.0, 1.0, -1.0, 1.0, 1.0),
]

PRESETS: dict[str, dict[str, str]] = {
    "test1_fat_tailed": {
        "model.variant": "simplified",
        "model.kernel": "unity",
        "model.lambda": "1.0",
        "model.sigma2_s": "0.16",
        "model.sigma2_i": "0.16",
        "model.sigma2_r": "0.16",
        "model.tau": "1.0",
        "model.nc_order": "6",
        "epi.beta": "0.8",
        "epi.alpha": "0.0",
        "epi.gamma": "0.6",
        "graphon.kind": "fat_tailed",
        "graphon.xi": "0.05",
        "graphon.chi": "0.5",
        "graphon.cutoff": "1e-10",
        "graphon.a": "1.0",
        "time.final": "50.0",
        "time.dt_max": "0.01",
        "ic.kind": "two_band",
        "ic.rho_s": "0.998",
        "ic.rho_i": "0.001",
        "ic.rho_r": "0.001",
    },
    "test1_spatial": {
        "model.variant": "simplified",
        "model.kernel": "unity",
        "model.lambda": "1.0",
        "model.sigma2_s": "0.01",
        "model.sigma2_i": "0.01",
        "model.sigma2_r": "0.01",
        "model.tau": "1.0",
        "model.nc_order": "6",
        "epi.beta": "0.8",
        "epi.alpha": "0.0",
        "epi.gamma": "0.6",
        "graphon.kind": "spatial_adjacency",
        "graphon.r": "0.2",
        "graphon.chi": "0.5",
        "graphon.cutoff": "0.0",
        "graphon.a": "0.5",
        "time.final": "150.0",
        "time.dt_max": "0.01",
        "ic.kind": "band",
        "ic.rho_s": "0.998",
        "ic.rho_i": "0.001",
        "ic.rho_r": "0.001",
    },
    "test3": {
        "model.variant": "simplified",
        "model.kernel": "bounded_confidence",
        "model.delta": "0.5",
        "model.lambda": "1.0",
        "model.sigma2_s": "0.05",
        "model.sigma2_i": "0.03",
        "model.sigma2_r": "0.01",
        "model.tau": "1.0",
        "model.nc_order": "2",
        "epi.beta": "0.8",
        "epi.alpha": "1.0",
        "epi.gamma": "0.4",
        "graphon.kind": "fat_tailed",
        "graphon.xi": "0.25",
        "graphon.chi": "2.0",
        "graphon.cutoff": "1e-10",
        "graphon.a": "1.0",
        "time.final": "450.0",
        "time.dt_max": "0.05",
        "ic.kind": "two_group",
        "ic.rho_s": "0.998",
        "ic.rho_i": "0.001",
        "ic.rho_r": "0.001",
    },
    "test4_no_leaders": {
        "model.variant": "full",
        "model.kernel": "bounded_confidence",
        "model.delta": "1.5",
        "model.lambda": "1.0",
        "model.sigma2_s": "0.05",
        "model.sigma2_i": "0.03",
        "model.sigma2_r": "0.01",
        "model.tau": "1.0",
        "model.nc_order": "2",
        "epi.beta": "0.8",
        "epi.alpha": "1.0",
        "epi.gamma": "0.4",
        "graphon.kind": "fat_tailed",
        "graphon.xi": "0.05",
        "graphon.chi": "0.5",
        "graphon.cutoff": "1e-3",
        "graphon.a": "1.0",
        "time.final": "35.0",
        "time.dt_max": "0.05",
        "ic.kind": "leaders_split",
        "ic.rho_s": "0.998",
        "ic.rho_i": "0.001",
        "ic.rho_r": "0.001",
    },
}

# Test 2 replays the popularity equation on top of the consensus run.
PRESETS["test2"] = dict(
    PRESETS["test1_spatial"],
    **{
        "popularity.enabled": "true",
        "popularity.mu": "1.5",
        "popularity.theta": "5.0",
        "popularity.zeta2": "1.0",
        "popularity.tau_p": "1.0",
        "popularity.w_hat": "0.3",
    },
)
# The leaders variant differs from its control only through the graphon.
PRESETS["test4_leaders"] = dict(
    PRESETS["test4_no_leaders"],
    **{"graphon.xi": "0.25", "graphon.chi": "2.0"},
)

IC_RECTANGLES: dict[str, list[tuple]] = {
    "two_band": [
        ("S", 0.0, 1.0, -1.0, 0.0, 2.0 / 3.0),
        ("S", 0.0, 1.0, 0.0, 1.0, 1.0 / 3.0),
        *_UNIFORM_I_R,
    ],
    "band": [
        ("S", 0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0, 1.0),
        *_UNIFORM_I_R,
    ],
    "two_group": [
        ("S", 0.65, 0.95, -0.9, -0.3, 0.25),
        ("S", 0.05, 0.35, 0.3, 0.9, 1.0),
        *_UNIFORM_I_R,
    ],
    "leaders_split": [
        ("S", 0.65, 0.95, -1.0, -0.2, 1.0),
        ("S", 0.0, 0.4, 0.55, 0.85, 0.25),
        *_UNIFORM_I_R,
    ],
    "uniform": [
        ("S", 0.0, 1.0, -1.0, 1.0, 1.0),
        *_UNIFORM_I_R,
    ],
}

_DEFAULTS: dict[str, str] = {
    "grid.n_x": "20",
    "grid.n_w": "100",
    "time.dt_max": "0.01",
    "time.safety": "0.95",
    "time.output_interval": "auto",
    "model.variant": "simplified",
    "model.kernel": "unity",
    "model.delta": "0.5",
    "model.lambda": "1.0",
    "model.sigma2_s": "0.16",
    "model.sigma2_i": "0.16",
    "model.sigma2_r": "0.16",
    "model.tau": "1.0",
    "model.nc_order": "6",
    "graphon.kind": "constant",
    "graphon.xi": "0.05",
    "graphon.r": "0.2",
    "graphon.chi": "0.5",
    "graphon.cutoff": "1e-10",
    "graphon.a": "1.0",
    "popularity.enabled": "false",
    "popularity.mu": "1.5",
    "popularity.theta": "5.0",
    "popularity.zeta2": "1.0",
    "popularity.tau_p": "1.0",
    "popularity.w_hat": "0.0",
    "popularity.indicator": "above",
    "popularity.eps_tail": "1e-12",
    "popularity.l_min_peaks": "8.0",
    "popularity.n_min": "101",
    "popularity.n_max": "801",
    "popularity.dv_target": "auto",
    "ic.rho_s": "0.998",
    "ic.rho_i": "0.001",
    "ic.rho_r": "0.001",
    "outputs.dir": "out",
    "outputs.snapshots": "",
    "outputs.diagnostics": "",
}

_GRAPHON_KINDS = {k.value: k for k in GraphonKind}
_VARIANTS = {"simplified": VariantKind.SIMPLIFIED_PROPENSITY, "full": VariantKind.FULL_GRAPHON}
_KERNELS = {"unity": KernelKind.UNITY, "bounded_confidence": KernelKind.BOUNDED_CONFIDENCE}


@dataclass
class ScenarioConfig:
    """Fully validated parameters for one run."""

    n_x: int
    n_w: int
    T: float
    dt_max: float
    safety: float
    output_interval: float
    variant: ModelVariant
    epi: EpiParams
    graphon: GraphonSpec
    popularity_enabled: bool
    popularity: PopularityParams
    w_hat: float
    indicator_above: bool
    grid_policy: GridPolicy
    rectangles: list[Rectangle]
    rho_targets: dict[str, float]
    out_dir: str
    snapshot_times: list[float]
    diagnostics: list[str]
    effective: dict[str, str] = field(default_factory=dict)


def _parse_lines(lines) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _float(kv, key) -> float:
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigurationError(f"{key}: not a number: {kv[key]!r}") from None


def _int(kv, key) -> int:
    try:
        return int(kv[key])
    except ValueError:
        raise ConfigurationError(f"{key}: not an integer: {kv[key]!r}") from None


def _bool(kv, key) -> bool:
    v = kv[key].lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigurationError(f"{key}: not a boolean: {kv[key]!r}")


def _enum(kv, key, table):
    v = kv[key]
    if v not in table:
        raise ConfigurationError(f"{key}: expected one of {sorted(table)}, got {v!r}")
    return table[v]


def config_from_mapping(user: dict[str, str]) -> ScenarioConfig:
    user = dict(user)
    kv = dict(_DEFAULTS)
    preset = user.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(f"preset: unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
        kv.update(PRESETS[preset])

    rect_specs: list[str] = []
    for key, value in user.items():
        if key.startswith("ic.rect."):
            rect_specs.append(value)
            continue
        if key not in kv and key not in ("ic.kind", "time.final"):
            raise ConfigurationError(f"unknown configuration key {key!r}")
        kv[key] = value

    if "time.final" not in kv:
        raise ConfigurationError("time.final: missing (no preset supplies it)")
    if "ic.kind" not in kv and not rect_specs:
        raise ConfigurationError("missing preset or custom block: no ic.kind and no ic.rect.* entries")

    T = _float(kv, "time.final")
    if T <= 0.0:
        raise ConfigurationError(f"time.final: must be positive, got {T}")
    dt_max = _float(kv, "time.dt_max")
    if dt_max <= 0.0:
        raise ConfigurationError("time.dt_max: must be positive")
    safety = _float(kv, "time.safety")
    if not 0.0 < safety < 1.0:
        raise ConfigurationError("time.safety: must lie in (0,1)")
    if kv["time.output_interval"] == "auto":
        output_interval = T / 200.0
        kv["time.output_interval"] = repr(output_interval)
    else:
        output_interval = _float(kv, "time.output_interval")
        if output_interval <= 0.0:
            raise ConfigurationError("time.output_interval: must be positive")

    variant = ModelVariant(
        kind=_enum(kv, "model.variant", _VARIANTS),
        kernel=_enum(kv, "model.kernel", _KERNELS),
        delta=_float(kv, "model.delta"),
        sigma2={
            "S": _float(kv, "model.sigma2_s"),
            "I": _float(kv, "model.sigma2_i"),
            "R": _float(kv, "model.sigma2_r"),
        },
        lambda_strength=_float(kv, "model.lambda"),
        tau=_float(kv, "model.tau"),
        nc_order=_int(kv, "model.nc_order"),
    )
    if variant.nc_order not in (2, 4, 6):
        raise ConfigurationError("model.nc_order: expected 2, 4, or 6")

    epi = EpiParams(
        beta=_float(kv, "epi.beta"),
        alpha=_float(kv, "epi.alpha"),
        gamma=_float(kv, "epi.gamma"),
    )
    graphon = GraphonSpec(
        kind=_enum(kv, "graphon.kind", _GRAPHON_KINDS),
        xi=_float(kv, "graphon.xi"),
        r=_float(kv, "graphon.r"),
        chi=_float(kv, "graphon.chi"),
        cutoff=_float(kv, "graphon.cutoff"),
        a=_float(kv, "graphon.a"),
    )

    pop_enabled = _bool(kv, "popularity.enabled")
    popularity = PopularityParams(
        mu=_float(kv, "popularity.mu"),
        theta=_float(kv, "popularity.theta"),
        zeta2=_float(kv, "popularity.zeta2"),
        tau_p=_float(kv, "popularity.tau_p"),
    )
    w_hat = _float(kv, "popularity.w_hat")
    if not -1.0 <= w_hat <= 1.0:
        raise ConfigurationError("popularity.w_hat: must lie in [-1, 1]")
    indicator = kv["popularity.indicator"]
    if indicator not in ("above", "below"):
        raise ConfigurationError("popularity.indicator: expected above or below")
    dv_target = None if kv["popularity.dv_target"] == "auto" else _float(kv, "popularity.dv_target")
    policy = GridPolicy(
        eps_tail=_float(kv, "popularity.eps_tail"),
        L_min_peaks=_float(kv, "popularity.l_min_peaks"),
        N_min=_int(kv, "popularity.n_min"),
        N_max=_int(kv, "popularity.n_max"),
        dv_target=dv_target,
    )

    rho = {
        "S": _float(kv, "ic.rho_s"),
        "I": _float(kv, "ic.rho_i"),
        "R": _float(kv, "ic.rho_r"),
    }
    for J, v in rho.items():
        if v < 0.0:
            raise ConfigurationError(f"ic.rho_{J.lower()}: must be nonnegative")
    rectangles: list[Rectangle] = []
    if rect_specs:
        kv["ic.kind"] = "custom"
        for spec_str in rect_specs:
            parts = [p.strip() for p in spec_str.split(";")]
            if len(parts) != 6:
                raise ConfigurationError(
                    f"ic.rect.*: expected 'J;x_lo;x_hi;w_lo;w_hi;weight', got {spec_str!r}"
                )
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError:
                raise ConfigurationError(f"ic.rect.*: non-numeric bound in {spec_str!r}") from None
            rectangles.append(Rectangle(parts[0], *nums))
    else:
        kind = kv["ic.kind"]
        if kind not in IC_RECTANGLES:
            raise ConfigurationError(f"ic.kind: unknown preset {kind!r}")
        rectangles = [Rectangle(*spec) for spec in IC_RECTANGLES[kind]]

    snapshots = []
    if kv["outputs.snapshots"]:
        try:
            snapshots = [float(s) for s in kv["outputs.snapshots"].split(",") if s.strip()]
        except ValueError:
            raise ConfigurationError("outputs.snapshots: expected comma-separated times") from None
    diag_raw = kv["outputs.diagnostics"]
    diagnostics = [d.strip() for d in diag_raw.split(",") if d.strip()]
    known = {"l1_equilibrium", "entropy", "hellinger", "conservation", "waves"}
    for d in diagnostics:
        if d not in known:
            raise ConfigurationError(f"outputs.diagnostics: unknown toggle {d!r}")

    n_x = _int(kv, "grid.n_x")
    n_w = _int(kv, "grid.n_w")
    if preset is not None:
        kv["preset"] = preset

    return ScenarioConfig(
        n_x=n_x,
        n_w=n_w,
        T=T,
        dt_max=dt_max,
        safety=safety,
        output_interval=output_interval,
        variant=variant,
        epi=epi,
        graphon=graphon,
        popularity_enabled=pop_enabled,
        popularity=popularity,
        w_hat=w_hat,
        indicator_above=indicator == "above",
        grid_policy=policy,
        rectangles=rectangles,
        rho_targets=rho,
        out_dir=kv["outputs.dir"],
        snapshot_times=snapshots,
        diagnostics=diagnostics,
        effective=dict(sorted(kv.items())),
    )


def load_config(path) -> ScenarioConfig:
    """Parse and validate a config file; every default is materialized."""
    text = Path(path).read_text()
    return config_from_mapping(_parse_lines(text.splitlines()))


def config_from_preset(name: str, overrides: dict[str, str] | None = None) -> ScenarioConfig:
    mapping = {"preset": name}
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)
