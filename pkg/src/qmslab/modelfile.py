"""YAML model, channel and scenario files, plus the resolved run config.

One structured-text format everywhere: nested mappings, dense complex
matrices as row lists of [re, im] pairs (bare reals are accepted on input
and widened). Every schema complaint carries the dotted field path.
"""

import dataclasses

import numpy as np
import yaml

from .errors import ConfigError
from .operator_core import dag
from .lindblad import JumpOperatorSet, LindbladModel
from .sdpi import KrausChannel, channel_from_model, depolarizing_channel
from .stateprep import GraphSpec
from .thermal import GibbsSpec


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def load_yaml(path):
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def _require_keys(node, path, required=(), optional=()):
    if not isinstance(node, dict):
        _fail(path, "must be a mapping")
    for key in required:
        if key not in node:
            _fail(f"{path}.{key}", "missing required field")
    allowed = set(required) | set(optional)
    for key in node:
        if key not in allowed:
            _fail(f"{path}.{key}", "unknown field")


def matrix_from_config(node, path):
    """Rectangular row list; entries are [re, im] pairs or bare reals."""
    if not isinstance(node, list) or not node:
        _fail(path, "must be a nonempty row list")
    rows = []
    width = None
    for i, row in enumerate(node):
        if not isinstance(row, list):
            _fail(f"{path}[{i}]", "row must be a list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(f"{path}[{i}]", f"row length {len(row)} != {width}")
        out = []
        for j, cell in enumerate(row):
            if isinstance(cell, (int, float)):
                out.append(complex(cell))
            elif isinstance(cell, list) and len(cell) == 2 \
                    and all(isinstance(x, (int, float)) for x in cell):
                out.append(complex(cell[0], cell[1]))
            else:
                _fail(f"{path}[{i}][{j}]", "entry must be real or [re, im]")
        rows.append(out)
    return np.array(rows, dtype=complex)


def matrix_to_config(A):
    A = np.asarray(A, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in A]


def _real_vector(node, path):
    if not isinstance(node, list) or not node \
            or not all(isinstance(x, (int, float)) for x in node):
        _fail(path, "must be a nonempty list of reals")
    return [float(x) for x in node]


def sigma_from_config(node, path, dim=None):
    """Invariant-state section: uniform, gibbs, eigenvalues(+basis), dense."""
    if node == "uniform":
        if dim is None:
            _fail(path, "uniform state needs an explicit dim")
        return np.eye(dim) / dim
    if not isinstance(node, dict):
        _fail(path, "must be 'uniform' or a mapping")
    if "gibbs" in node:
        _require_keys(node, path, required=("gibbs",))
        sub = node["gibbs"]
        _require_keys(sub, f"{path}.gibbs", required=("energies", "beta"))
        g = _gibbs_spec(sub, f"{path}.gibbs")
        return g.state().rho
    if "eigenvalues" in node:
        _require_keys(node, path, required=("eigenvalues",),
                      optional=("basis",))
        p = np.asarray(_real_vector(node["eigenvalues"],
                                    f"{path}.eigenvalues"))
        if p.min() <= 0 or abs(p.sum() - 1.0) > 1e-8:
            _fail(f"{path}.eigenvalues",
                  "must be positive and sum to 1 within 1e-8")
        rho = np.diag(p).astype(complex)
        if "basis" in node:
            U = matrix_from_config(node["basis"], f"{path}.basis")
            if U.shape != (p.size, p.size):
                _fail(f"{path}.basis", "shape does not match eigenvalues")
            rho = U @ rho @ dag(U)
        return rho
    if "dense" in node:
        _require_keys(node, path, required=("dense",))
        return matrix_from_config(node["dense"], f"{path}.dense")
    _fail(path, "expected one of: uniform, gibbs, eigenvalues, dense")


def _gibbs_spec(node, path):
    try:
        return GibbsSpec(tuple(_real_vector(node["energies"],
                                            f"{path}.energies")),
                         float(node["beta"]))
    except (TypeError, ValueError):
        _fail(f"{path}.beta", "must be a real number")


def _matrix_units(dim, pairs, chi):
    ops = []
    for r, s in pairs:
        E = np.zeros((dim, dim), dtype=complex)
        E[r, s] = chi
        ops.append(E)
    return ops


def jump_preset(name, dim, chi=1.0):
    """Named jump families; all come adjoint-closed."""
    if dim is None:
        raise ConfigError("jump preset needs an explicit dim")
    if name in ("ladder", "amplitude-damping"):
        if name == "amplitude-damping" and dim != 2:
            raise ConfigError("amplitude-damping preset is two-level")
        pairs = [(k, k + 1) for k in range(dim - 1)]
        pairs += [(s, r) for r, s in pairs]
        return _matrix_units(dim, pairs, chi)
    if name == "complete":
        pairs = [(r, s) for r in range(dim) for s in range(dim) if r != s]
        return _matrix_units(dim, pairs, chi)
    if name == "complete-units":
        pairs = [(r, s) for r in range(dim) for s in range(dim)]
        return _matrix_units(dim, pairs, chi)
    raise ConfigError(f"unknown jump preset '{name}'")


def close_under_adjoints(ops, tol=1e-12):
    """Append the adjoint of any op whose adjoint is not already present."""
    out = list(ops)
    for A in ops:
        Ad = dag(A)
        if not any(B.shape == Ad.shape and np.abs(B - Ad).max() <= tol
                   for B in out):
            out.append(Ad)
    return out


def jumps_from_config(node, path, dim=None):
    if isinstance(node, dict) and "preset" in node:
        _require_keys(node, path, required=("preset",), optional=("chi",))
        return jump_preset(str(node["preset"]), dim,
                           float(node.get("chi", 1.0)))
    if isinstance(node, dict) and "dense" in node:
        _require_keys(node, path, required=("dense",))
        node = node["dense"]
    if not isinstance(node, list) or not node:
        _fail(path, "expected a preset mapping or a list of matrices")
    return [matrix_from_config(mat, f"{path}[{i}]")
            for i, mat in enumerate(node)]


def model_from_config(node, path="model"):
    _require_keys(node, path, required=("sigma", "jumps"),
                  optional=("dim", "close_adjoint", "bohr_freqs", "label"))
    dim = node.get("dim")
    if dim is not None and (int(dim) != dim or dim < 2):
        _fail(f"{path}.dim", "must be an integer >= 2")
    dim = None if dim is None else int(dim)
    sigma = sigma_from_config(node["sigma"], f"{path}.sigma", dim)
    if dim is None:
        dim = sigma.shape[0]
    elif sigma.shape != (dim, dim):
        _fail(f"{path}.sigma", f"shape {sigma.shape} != dim {dim}")
    ops = jumps_from_config(node["jumps"], f"{path}.jumps", dim)
    if any(A.shape != (dim, dim) for A in ops):
        _fail(f"{path}.jumps", "jump shape does not match dim")
    if node.get("close_adjoint", True):
        ops = close_under_adjoints(ops)
    freqs = node.get("bohr_freqs")
    if freqs is not None:
        freqs = _real_vector(freqs, f"{path}.bohr_freqs")
        if len(freqs) != len(ops):
            _fail(f"{path}.bohr_freqs",
                  f"{len(freqs)} values for {len(ops)} jumps "
                  "(adjoint closure counts)")
    return LindbladModel.from_jumps(JumpOperatorSet(ops), sigma,
                                    bohr_freqs=freqs,
                                    label=str(node.get("label", "")))


def load_model(path):
    doc = load_yaml(path)
    if "model" not in doc:
        _fail(path, "missing top-level 'model' section")
    return model_from_config(doc["model"], "model")


def channel_from_config(node, path="channel"):
    if "preset" in node:
        _require_keys(node, path, required=("preset",),
                      optional=("dim", "p", "label"))
        if node["preset"] != "depolarizing":
            _fail(f"{path}.preset", f"unknown channel preset '{node['preset']}'")
        dim = int(node.get("dim", 2))
        p = float(node.get("p", 0.5))
        if not 0.0 <= p <= 1.0:
            _fail(f"{path}.p", "must lie in [0, 1]")
        return depolarizing_channel(dim, p)
    _require_keys(node, path, required=("kraus",),
                  optional=("sigma", "direction", "label"))
    ops = [matrix_from_config(mat, f"{path}.kraus[{i}]")
           for i, mat in enumerate(node["kraus"])]
    sigma = None
    if "sigma" in node:
        sigma = sigma_from_config(node["sigma"], f"{path}.sigma",
                                  ops[0].shape[0])
    return KrausChannel(ops, direction=str(node.get("direction",
                                                    "schrodinger")),
                        sigma=sigma, label=str(node.get("label", "")))


def load_channel(path):
    """Channel file: a 'channel' section, or a model plus a snapshot time."""
    doc = load_yaml(path)
    if "channel" in doc:
        return channel_from_config(doc["channel"], "channel")
    if "model" in doc and "time" in doc:
        model = model_from_config(doc["model"], "model")
        t = float(doc["time"])
        if t <= 0:
            _fail("time", "snapshot time must be positive")
        return channel_from_model(model, t)
    _fail(path, "need a 'channel' section or 'model' plus 'time'")


def graph_spec_from_config(node, path="graph"):
    _require_keys(node, path, required=("m",),
                  optional=("edges", "preset", "weights"))
    m = node["m"]
    if int(m) != m or m < 2:
        _fail(f"{path}.m", "must be an integer >= 2")
    m = int(m)
    if "preset" in node:
        name = str(node["preset"])
        builders = {"complete": GraphSpec.complete, "cycle": GraphSpec.cycle,
                    "path": GraphSpec.path}
        if name not in builders:
            _fail(f"{path}.preset", f"unknown graph preset '{name}'")
        spec = builders[name](m)
        base_edges = spec.edges
    elif "edges" in node:
        edges = node["edges"]
        if not isinstance(edges, list) or not edges:
            _fail(f"{path}.edges", "must be a nonempty list of [r, s] pairs")
        base_edges = []
        for i, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2
                    and all(int(x) == x for x in e)):
                _fail(f"{path}.edges[{i}]", "must be an [r, s] integer pair")
            base_edges.append((int(e[0]), int(e[1])))
    else:
        _fail(path, "need 'edges' or 'preset'")
    weights = {}
    for i, w in enumerate(node.get("weights") or []):
        if not (isinstance(w, list) and len(w) == 3):
            _fail(f"{path}.weights[{i}]", "must be [r, s, chi]")
        weights[(int(w[0]), int(w[1]))] = float(w[2])
    return GraphSpec(m, base_edges, weights)


def load_scenario(path):
    """Scenario file for the pipeline subcommands.

    The top-level section name picks the kind: 'graph', 'history' or
    'gibbs'. Everything model-like inside reuses the shared sections.
    """
    doc = load_yaml(path)
    kinds = [k for k in ("graph", "history", "gibbs") if k in doc]
    if len(kinds) != 1:
        _fail(path, "need exactly one of: graph, history, gibbs")
    kind = kinds[0]
    node = doc[kind]
    if kind == "graph":
        _require_keys(node, kind, required=("m", "sigma"),
                      optional=("edges", "preset", "weights",
                                "degenerate_rule"))
        spec = graph_spec_from_config(
            {k: v for k, v in node.items()
             if k in ("m", "edges", "preset", "weights")}, kind)
        sigma = sigma_from_config(node["sigma"], f"{kind}.sigma", spec.m)
        return {"kind": kind, "spec": spec, "sigma": sigma,
                "degenerate_rule": bool(node.get("degenerate_rule", False))}
    if kind == "history":
        _require_keys(node, kind, required=("logical", "unitaries"),
                      optional=("s_grid", "input_mode", "register_mult"))
        logical = model_from_config(node["logical"], f"{kind}.logical")
        unis = [matrix_from_config(mat, f"{kind}.unitaries[{i}]")
                for i, mat in enumerate(node["unitaries"])]
        s_grid = node.get("s_grid")
        if s_grid is not None:
            s_grid = _real_vector(s_grid, f"{kind}.s_grid")
        mode = str(node.get("input_mode", "uniform"))
        if mode not in ("uniform", "zero"):
            _fail(f"{kind}.input_mode", "must be 'uniform' or 'zero'")
        return {"kind": kind, "logical": logical, "unitaries": unis,
                "s_grid": s_grid, "input_mode": mode,
                "register_mult": float(node.get("register_mult", 1.0))}
    _require_keys(node, kind, required=("energies", "beta"),
                  optional=("chi", "cutoff_index", "cutoff_energy",
                            "time", "m_steps", "t1", "t1_dim_b"))
    g = _gibbs_spec(node, kind)
    out = {"kind": kind, "gibbs": g,
           "chi": float(node.get("chi", 1.0)),
           "m_steps": int(node.get("m_steps", 64)),
           "time": float(node.get("time", 1.0))}
    if "cutoff_index" in node:
        l = node["cutoff_index"]
        if int(l) != l or not 1 <= int(l) <= g.m:
            _fail(f"{kind}.cutoff_index", f"must be an integer in 1..{g.m}")
        out["cutoff_index"] = int(l)
    if "cutoff_energy" in node:
        out["cutoff_energy"] = float(node["cutoff_energy"])
    if "t1" in node:
        out["t1"] = float(node["t1"])
        out["t1_dim_b"] = int(node.get("t1_dim_b", 2))
    return out


_CONFIG_FIELDS = None


@dataclasses.dataclass
class ExperimentConfig:
    """Resolved run parameters; serializes round-trip stable."""

    command: str
    model: str = None
    model_prime: str = None
    channel: str = None
    scenario: str = None
    estimate: str = None
    rho: object = None
    times: list = None
    time: float = None
    seed: int = 0
    samples: int = 100
    tol_abs: float = 1e-9
    tol_rel: float = 1e-9
    workers: int = 1
    out: str = None
    figures: bool = True

    def as_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data, path="config"):
        global _CONFIG_FIELDS
        if _CONFIG_FIELDS is None:
            _CONFIG_FIELDS = {f.name for f in dataclasses.fields(cls)}
        if not isinstance(data, dict):
            _fail(path, "must be a mapping")
        for key in data:
            if key not in _CONFIG_FIELDS:
                _fail(f"{path}.{key}", "unknown field")
        if "command" not in data:
            _fail(f"{path}.command", "missing required field")
        cfg = cls(**data)
        if int(cfg.workers) < 1:
            _fail(f"{path}.workers", "must be >= 1")
        if int(cfg.samples) < 1:
            _fail(f"{path}.samples", "must be >= 1")
        cfg.seed = int(cfg.seed)
        cfg.samples = int(cfg.samples)
        cfg.workers = int(cfg.workers)
        cfg.tol_abs = float(cfg.tol_abs)
        cfg.tol_rel = float(cfg.tol_rel)
        return cfg


def load_experiment(path):
    return ExperimentConfig.from_dict(load_yaml(path), path)


def dump_experiment(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.as_dict(), fh, sort_keys=True,
                       default_flow_style=None)
