"""Configuration-driven Chernoff ladders: build (mu, psi, f, reference), run, fit, emit."""
import copy
import csv
import json
import os
import subprocess
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .engine import GridFunction, GridSpec, TransitionConfig, chernoff_iterate, lp_grid_error, mixed_topology_error
from .errors import ConfigError, DomainError
from .flows import FlowFamily, check_condition_D_star, default_samples, estimate_condition_D
from .levy import testfunctions
from .levy.conditions import check_condition_M, check_condition_M_star, check_condition_T
from .measures import MeasureFamily
from .numerics import loglog_slope
from .reference import OuSpec, SdeSpec, compound_poisson_apply, heat_semigroup_apply, mehler_ou_apply, sde_monte_carlo_apply
from .reports import FAIL, PASS

DEFAULT_LADDER = [8, 16, 32, 64, 128, 256]
BACKENDS = ("identity", "heat", "ou", "cpoisson", "sde", "killed")


@dataclass
class ExperimentConfig:
    name: str
    measure: dict
    test_function: dict
    reference: dict
    flow: dict = field(default_factory=lambda: {"kind": "identity"})
    t: float = 1.0
    k_ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    radii: list = field(default_factory=lambda: [1.0, 2.0])
    mode: str = "grid"
    n_paths: int = 10_000
    quad_nodes: int = 64
    grid: dict = field(default_factory=lambda: {"box": [[-8.0, 8.0]], "resolution": 321, "interpolation": "cubic"})
    tolerance: float = 1e-2
    seed: int = 0
    out_dir: str = "results"
    perturb: bool = False
    lp: list = field(default_factory=lambda: [1, 2, "inf"])

    def __post_init__(self):
        self.validate()

    def validate(self):
        ks = list(self.k_ladder)
        if not ks:
            raise ConfigError("k_ladder must not be empty")
        if any(int(k) != k or k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("k_ladder must be strictly increasing positive integers")
        if not self.t > 0:
            raise ConfigError("t must be positive")
        if self.mode not in ("grid", "particle"):
            raise ConfigError(f"mode must be 'grid' or 'particle', got {self.mode!r}")
        if self.reference.get("backend") not in BACKENDS:
            raise ConfigError(f"reference backend must be one of {BACKENDS}")
        if not self.radii or min(self.radii) <= 0:
            raise ConfigError("radii must be positive")
        try:
            spec = self.grid_spec()
        except DomainError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        inner = min(min(-lo, hi) for lo, hi in spec.box)
        if max(self.radii) > inner:
            raise ConfigError(f"radius {max(self.radii)} leaves the grid box")
        if "name" not in self.test_function:
            raise ConfigError("test_function needs a registry name")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")

    def grid_spec(self):
        g = self.grid
        return GridSpec(g["box"], g["resolution"], g.get("interpolation", "multilinear"))

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"name", "measure", "test_function", "reference"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return copy.deepcopy(asdict(self))


@dataclass
class ResultTable:
    name: str
    radii: list
    rows: list
    slope: dict
    verdict: str
    tolerance: float
    config: dict = field(default_factory=dict)
    version: str = ""
    extras: list = field(default_factory=list)

    def columns(self):
        return (["k", "h"] + [f"err_r{i + 1}" for i in range(len(self.radii))]
                + ["lp1", "lp2", "lpinf", "supbound", "stderr", "seconds"])

    def final_error(self):
        row = self.rows[-1]
        return max(row[f"err_r{i + 1}"] for i in range(len(self.radii)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def same_results(self, other):
        """Equality of everything except wall-clock times."""
        strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]  # noqa: E731
        a, b = json.dumps(strip(self.rows), sort_keys=True), json.dumps(strip(other.rows), sort_keys=True)
        return a == b and json.dumps(self.extras, sort_keys=True) == json.dumps(other.extras, sort_keys=True)


def version_string():
    """``git describe`` of the source tree, or the installed package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # noqa: BLE001  metadata lookups fail in odd ways on uninstalled trees
        return "0+unknown"


# assembling pieces


def build_measure(cfg):
    try:
        return MeasureFamily.from_config(cfg)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"measure block: {exc}") from exc


def build_flow(cfg, dim):
    try:
        return FlowFamily.from_config(cfg, dim)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"flow block: {exc}") from exc


def build_test_function(cfg, dim):
    try:
        return testfunctions.from_config(cfg, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"test_function block: {exc}") from exc


def reference_values(config, f, mu, psi, X):
    """Reference semigroup at time t on the points X; returns (values, errors)."""
    ref = dict(config.reference)
    backend = ref.pop("backend")
    t = config.t
    d = mu.dim
    if backend == "identity":
        v = f.value(X)
        return v, np.zeros_like(v)
    if backend == "heat":
        b = ref.get("b", np.zeros(d))
        return heat_semigroup_apply(b, ref.get("sigma", np.eye(d)), t, f, X)
    if backend == "ou":
        spec = OuSpec(ref["A"], ref.get("b", np.zeros(d)), ref.get("sigma", np.eye(d)))
        return mehler_ou_apply(spec, t, f, X)
    if backend == "cpoisson":
        return compound_poisson_apply(ref["rate"], ref["jumps"], ref.get("jump_weights"), ref.get("drift"), t, f, X,
                                      N=ref.get("N", 100_000), seed=config.seed, mode=ref.get("mode", "series"))
    if backend == "killed":
        v = np.exp(-float(ref["c"]) * t) * f.value(X)
        return v, np.zeros_like(v)
    if backend == "sde":
        noise = build_measure(ref["noise"]) if "noise" in ref else mu
        m = int(ref.get("m", 16 * max(config.k_ladder)))
        spec = SdeSpec(psi.F, float(psi.L), noise, t, m, int(ref.get("N", 20_000)), config.seed)
        out = [sde_monte_carlo_apply(spec, f, x) for x in X]
        return np.array([o.value for o in out]), np.array([o.error for o in out])
    raise ConfigError(f"unknown backend {backend!r}")


def _perturbed(f, k, dim):
    return f + testfunctions.bump(np.zeros(dim), 1.0, dim) * (1.0 / k)


def fit_slope(rows, n_err_cols, last=4):
    """Least squares of log error on log k over the last rows, dropping noise-dominated rows."""
    use = []
    for r in rows[-last:]:
        err = max(r[f"err_r{i + 1}"] for i in range(n_err_cols))
        if err > 0 and np.isfinite(err) and not r["stderr"] > 0.5 * err:
            use.append((r["k"], err))
    if len(use) < 3:
        return {"slope": float("nan"), "low": float("nan"), "high": float("nan"), "rows_used": len(use)}
    k, e = np.array(use, dtype=float).T
    fit = loglog_slope(k, e)
    return {"slope": fit.slope, "low": fit.lo, "high": fit.hi, "rows_used": len(use)}


def run_experiment(config, tolerance_scale=1.0, jobs=1, seed=None):
    """Chernoff iterate at h = t/k for every k on the ladder, against the reference."""
    if seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "seed": int(seed)})
    mu = build_measure(config.measure)
    psi = build_flow(config.flow, mu.dim)
    f = build_test_function(config.test_function, mu.dim)
    spec = config.grid_spec()
    if spec.dim != mu.dim:
        raise ConfigError("grid dimension differs from the measure dimension")
    pts = spec.points()
    expensive = config.reference["backend"] == "sde"
    near = np.linalg.norm(pts, axis=1) <= max(config.radii)
    ref_v = np.full(pts.shape[0], np.nan)
    ref_e = np.full(pts.shape[0], np.nan)
    sel = near if expensive else np.ones(pts.shape[0], dtype=bool)
    v, e = reference_values(config, f, mu, psi, pts[sel])
    ref_v[sel], ref_e[sel] = v, e
    ref_sup = float(np.nanmax(np.abs(ref_v)))
    ref_grid = GridFunction(spec, np.nan_to_num(ref_v), max(ref_sup, 1e-300))
    cfg = TransitionConfig(mode=config.mode, n_paths=config.n_paths, seed=config.seed,
                           quad_nodes=config.quad_nodes, jobs=jobs)
    rows, extras = [], []
    center = int(np.argmin(np.linalg.norm(pts, axis=1)))
    for k in config.k_ladder:
        h = config.t / k
        fk = _perturbed(f, k, mu.dim) if config.perturb else f
        start = time.perf_counter()
        g = chernoff_iterate(mu, psi, h, int(k), fk, spec, cfg)
        seconds = time.perf_counter() - start
        diff = np.abs(g.values.ravel() - ref_v)
        norms = np.linalg.norm(pts, axis=1)
        row = {"k": int(k), "h": h}
        for i, r in enumerate(config.radii):
            row[f"err_r{i + 1}"] = float(diff[norms <= r].max())
        if mu.dim == 1 and not expensive:
            for p in (1, 2, "inf"):
                row[f"lp{p}"] = lp_grid_error(g, ref_grid, np.inf if p == "inf" else p)
        else:
            row.update(lp1=float("nan"), lp2=float("nan"), lpinf=float("nan"))
        stat = 0.0 if g.stderr is None else float(g.stderr[near].max())
        row["supbound"] = float(max(g.sup_bound, ref_sup))
        row["stderr"] = stat + float(np.nanmax(ref_e[near]))
        row["seconds"] = seconds
        rows.append(row)
        extras.append({"k": int(k), "center": pts[center].tolist(), "value": float(g.values.ravel()[center]),
                       "reference": float(ref_v[center]), "excursions": int(g.meta.get("excursions", 0))})
    table = ResultTable(config.name, list(config.radii), rows, fit_slope(rows, len(config.radii)), FAIL,
                        config.tolerance * tolerance_scale, config.to_dict(), version_string(), extras)
    table.verdict = PASS if table.final_error() <= table.tolerance else FAIL
    return table


def emit(table, out_dir, formats=("csv", "json")):
    """Write <name>.csv (plot-ready rows) and/or <name>.json (full table with config echo)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        path = os.path.join(out_dir, f"{table.name}.csv")
        cols = table.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in table.rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
        paths.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, f"{table.name}.json")
        with open(path, "w") as fh:
            json.dump(table.to_dict(), fh, indent=2)
        paths.append(path)
    return paths


def load_table(path):
    with open(path) as fh:
        return ResultTable.from_dict(json.load(fh))


# built-in experiments

_COS = {"name": "cos", "wave": [1.0], "phase": 0.0}
_BUMP = {"name": "bump", "center": [0.0], "radius": 2.0}
_OU_GRID = {"box": [[-12.0, 12.0]], "resolution": 1201, "interpolation": "cubic"}
_OU_REF = {"backend": "ou", "A": [[-1.0]], "b": [0.0], "sigma": [[1.0]]}

REGISTRY = {
    "identity": dict(
        measure={"kind": "dirac_zero", "dim": 1}, test_function=_BUMP, reference={"backend": "identity"},
        grid={"box": [[-4.0, 4.0]], "resolution": 161, "interpolation": "multilinear"}, tolerance=1e-14),
    "clt": dict(
        measure={"kind": "scaled_iid", "base": "rademacher"}, test_function=_COS,
        reference={"backend": "heat", "b": [0.0], "sigma": [[1.0]]},
        grid={"box": [[-4.0, 4.0]], "resolution": 161, "interpolation": "multilinear"}, tolerance=2e-3),
    "heat": dict(
        measure={"kind": "brownian"}, test_function=_BUMP,
        reference={"backend": "heat", "b": [0.0], "sigma": [[1.0]]},
        grid={"box": [[-10.0, 10.0]], "resolution": 1001, "interpolation": "cubic"}, tolerance=1e-3),
    "cpoisson": dict(
        measure={"kind": "compound_poisson", "rate": 1.0, "jumps": [[1.0]]}, test_function=_BUMP,
        reference={"backend": "cpoisson", "rate": 1.0, "jumps": [[1.0]], "mode": "series"},
        grid={"box": [[-6.0, 6.0]], "resolution": 241, "interpolation": "multilinear"}, tolerance=1e-9),
    "ou-exactflow": dict(
        measure={"kind": "brownian"}, flow={"kind": "exact_affine", "A": [[-1.0]]}, test_function=_COS,
        reference=_OU_REF, grid=_OU_GRID, tolerance=5e-3),
    "ou-euler": dict(
        measure={"kind": "brownian"}, flow={"kind": "euler", "A": [[-1.0]]}, test_function=_COS,
        reference=_OU_REF, grid=_OU_GRID, tolerance=5e-3),
    "ou-rk4": dict(
        measure={"kind": "brownian"}, flow={"kind": "runge_kutta", "A": [[-1.0]], "tableau": "rk4"},
        test_function=_COS, reference=_OU_REF, grid=_OU_GRID, tolerance=5e-3),
    "sde-general": dict(
        measure={"kind": "levy_increment", "cov": [[0.25]], "rate": 1.0, "jumps": [[-0.5], [0.5]]},
        flow={"kind": "euler", "field": {"name": "neg_sin"}}, test_function=_COS,
        reference={"backend": "sde", "N": 20_000}, k_ladder=[8, 16, 32, 64],
        grid={"box": [[-8.0, 8.0]], "resolution": 161, "interpolation": "cubic"}, radii=[1.0], tolerance=5e-2),
    "counterexample": dict(
        measure={"kind": "three_atom_counterexample"}, test_function={"name": "bump", "center": [0.0], "radius": 1.0},
        reference={"backend": "killed", "c": 1.0},
        grid={"box": [[-4.0, 4.0]], "resolution": 1025, "interpolation": "cubic"}, tolerance=2e-2),
}


def registry_config(name, **overrides):
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; known: {sorted(REGISTRY)}")
    data = copy.deepcopy(REGISTRY[name])
    data.update(overrides)
    return ExperimentConfig.from_dict({"name": name, **data})


# consolidated condition checks

DEFAULT_H_LADDER = [2.0 ** -j for j in range(4, 13)]


def run_condition_suite(config):
    """(M), (M*), (T) for a measure block and (D), (D*) for a flow block; returns {name: ConditionReport}."""
    config = dict(config)
    hs = config.get("h_ladder", DEFAULT_H_LADDER)
    out = {}
    dim = 1
    if "measure" in config:
        mu = build_measure(config["measure"])
        dim = mu.dim
        out["M"] = check_condition_M(mu, hs, config.get("M_list", (0.5, 1.0, 2.0)))
        probes = [testfunctions.bump(np.zeros(dim), r, dim) for r in (1.0, 2.0)]
        probes.append(testfunctions.coordinate_probe(0, None, None, dim))
        out["M_star"] = check_condition_M_star(mu, hs, probes)
        out["T"] = check_condition_T(mu, hs, config.get("eps_list", (0.5, 0.1, 0.01)))
    if "flow" in config:
        psi = build_flow(config["flow"], dim)
        flow_hs = [h for h in hs if h < psi.declared_h0] or [psi.declared_h0 / 2]
        X, U = default_samples(psi, 64, seed=1)
        out["D"] = estimate_condition_D(psi, flow_hs, X, U)
        out["D_star"] = check_condition_D_star(psi, X[:8], flow_hs)
    if not out:
        raise ConfigError("condition suite needs a measure and/or a flow block")
    return out
